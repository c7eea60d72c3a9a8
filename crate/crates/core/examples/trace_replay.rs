//! Replays a textual micro-op trace and prints what each op returned.
//!
//! cargo run --example trace_replay [-- FILE]

use hdcr::device::{Device, DeviceGeometry};
use hdcr::trace::{parse_trace, run_trace};

const DEMO: &str = "\
# two random rows, their XOR, then a rotated copy
WRITE 0.0.15.0 0 rand:1
WRITE 0.0.15.0 1 rand:2
PHASE search
CIMOP 0.0.15.0 0 2 XOR
CIMOP 0.0.15.0 0 1 ROT_LEFT
READ  0.0.15.0 1
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => DEMO.to_string(),
    };
    let mut dev = Device::new(DeviceGeometry::default())?;
    for o in run_trace(&mut dev, &parse_trace(&text)?)? {
        let ones = o.row.map(|r| format!("  ones={}", r.count_ones())).unwrap_or_default();
        println!("{:>3} {:<32} {:>2} cyc{ones}", o.line, o.op.to_string(), o.cycles);
    }
    println!("total {} cycles", dev.ledger().total().cycles);
    Ok(())
}

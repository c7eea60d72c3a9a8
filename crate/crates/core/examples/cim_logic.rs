//! Bulk AND/OR/XOR through a transverse read of up to five stacked rows.

use hdcr::bits::BitBuf;
use hdcr::cim::{cimop, CimOpKind, CimRequest};
use hdcr::device::{DbcAddr, Device, DeviceGeometry};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = DeviceGeometry::default();
    let mut dev = Device::new(g.clone())?;
    // logic needs the periphery of the cim tile
    let a = DbcAddr::new(0, 0, g.cim_tile(), 0);

    let rows = ["1100", "1010", "1001"];
    for (i, r) in rows.iter().enumerate() {
        let mut bools: Vec<bool> = r.chars().map(|c| c == '1').collect();
        bools.resize(g.tracks_per_dbc, false);
        dev.write_at(a.at(i), &BitBuf::from_bools(&bools))?;
    }
    for r in &rows {
        println!("operand {r}");
    }
    for op in [CimOpKind::And, CimOpKind::Or, CimOpKind::Xor] {
        let before = dev.ledger().total().cycles;
        let out = cimop(
            &mut dev,
            CimRequest {
                src: a.at(0),
                size: rows.len() as u8,
                op,
            },
        )?;
        let bits: String = (0..4).map(|t| if out.get(t) { '1' } else { '0' }).collect();
        println!(
            "{:<7} {bits}   {} cycles",
            op.name(),
            dev.ledger().total().cycles - before
        );
    }
    Ok(())
}

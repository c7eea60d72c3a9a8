//! Shift, read and write on a single domain-block cluster, with the cycle
//! and bit-event cost of each step.

use hdcr::bits::BitBuf;
use hdcr::cost::EventClass;
use hdcr::device::{DbcAddr, Device, DeviceGeometry, Port};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = DeviceGeometry::default();
    println!(
        "DBC: {} tracks x {} domains, ports at {} and {}",
        g.tracks_per_dbc, g.domains_per_track, g.ap_low, g.ap_high
    );
    let mut dev = Device::new(g.clone())?;
    let a = DbcAddr::new(0, 0, 0, 0);

    let row = BitBuf::from_bools(&(0..g.tracks_per_dbc).map(|t| t % 3 == 0).collect::<Vec<_>>());
    for loc in [0, 13, 17, 31] {
        let before = dev.ledger().total();
        dev.write_at(a.at(loc), &row)?;
        let back = dev.read_at(a.at(loc))?;
        assert_eq!(back, row);
        let after = dev.ledger().total();
        println!(
            "location {loc:>2}: write+read took {:>2} cycles, {:>5} shift bits",
            after.cycles - before.cycles,
            after.bits(EventClass::Shift) - before.bits(EventClass::Shift)
        );
    }

    let moved = dev.shift_dbc(a, 5, Port::Low)?;
    println!("aligning location 5 under the low port: {moved} cycles");
    let t = dev.ledger().total();
    println!(
        "totals: {} cycles, {} shift / {} read / {} write bits",
        t.cycles,
        t.bits(EventClass::Shift),
        t.bits(EventClass::Read),
        t.bits(EventClass::Write)
    );
    Ok(())
}

//! Decimal counter on nanowire segments: Johnson digits, carries, preset
//! thresholds.

use hdcr::cost::EventClass;
use hdcr::counter::RtmCounter;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut c = RtmCounter::new(3);
    for _ in 0..7 {
        c.increment(1)?;
        let d = c.digit(0);
        println!("value {:>3}  lsd count {} P {}", c.value()?, d.tr_count(), d.p() as u8);
    }
    c.increment(992)?;
    println!("after 992 more: {}", c.value()?);
    println!("one more increment: {:?}", c.increment(1).err());

    // preset mode counts down from a threshold; the MSD P bit flags the hit
    let mut t = RtmCounter::new(2);
    t.preset_threshold(12)?;
    let hit_at = (0..20).find(|_| {
        let hit = t.threshold_hit().unwrap();
        t.increment(1).unwrap();
        hit
    });
    println!("threshold 12 reached after {} increments", hit_at.unwrap());
    let l = t.ledger();
    println!(
        "cost: {} cycles, {} tw bits, {} tr bits",
        l.cycles,
        l.bits(EventClass::TransverseWrite),
        l.bits(EventClass::TransverseRead)
    );
    Ok(())
}

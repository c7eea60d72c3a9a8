//! Hamming search on the device: XOR in the cim tile, popcount with the
//! nanowire counters.

use hdcr::engine::{HdcrConfig, SearchModule};
use hdcr::hdc::{self, AssociativeMemory, Hypervector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = HdcrConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut am = AssociativeMemory::new();
    for label in ["alpha", "beta", "gamma", "delta"] {
        am.insert(label, Hypervector::random(config.dim, &mut rng)?)?;
    }
    let mut search = SearchModule::load(&config, &am)?;

    // a noisy copy of "gamma"
    let mut bits = am.get("gamma").unwrap().bits().clone();
    for i in (0..config.dim).step_by(7) {
        bits.set(i, !bits.get(i));
    }
    let q = Hypervector::from_bits(bits)?;
    let (distances, ledger) = search.search(&q)?;
    let want = hdc::classify(&q, &am)?;
    for ((label, d), r) in distances.iter().zip(&want.distances) {
        assert_eq!(&(label.clone(), *d), r);
        println!("{label:<6} {d:>5}");
    }
    let t = ledger.total();
    println!(
        "search: {} cycles, {} tr bits, {} tw bits",
        t.cycles, t.tr_bits, t.tw_bits
    );
    Ok(())
}

//! Encodes one text on the device and checks it against the software
//! encoder, then shows where the cycles went.

use hdcr::corpus::normalize;
use hdcr::cost::Phase;
use hdcr::engine::{corpus_frequencies, plan_placement, Engine, HdcrConfig};
use hdcr::hdc;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = normalize("to be or not to be that is the question whether tis nobler in the mind to suffer");
    let config = HdcrConfig {
        num_pgs: 2,
        ..Default::default()
    };
    let placement = plan_placement(&corpus_frequencies([text.symbols()]))?;
    let mut engine = Engine::new(config.clone(), placement)?;

    let enc = engine.encode(text.symbols())?;
    let im = hdc::gen_item_memory(config.seed, config.dim)?;
    let want = hdc::encode_with(text.symbols(), config.n, &im)?;
    assert_eq!(enc.hv, want);
    println!(
        "{} symbols, {} n-grams, bit-exact with the reference",
        text.len(),
        enc.ngrams
    );
    for p in Phase::ALL {
        let l = enc.ledger.get(p);
        println!(
            "  {:<7} {:>6} cycles {:>9} tr bits {:>9} read bits",
            p.name(),
            l.cycles,
            l.tr_bits,
            l.read_bits
        );
    }
    println!("fetch shift histogram {:?}", engine.stats().fetch_shifts);
    Ok(())
}

//! End to end: train on a synthetic corpus on the device, classify the
//! test sentences, compare with the software pipeline and report energy.
//!
//! cargo run --release --example language_recognition [-- LANGUAGES]

use hdcr::corpus::{synth_corpus, SynthOptions};
use hdcr::cost::{report, EnergyParams};
use hdcr::engine::{train_on_device, HdcrConfig, Pipeline};
use hdcr::hdc::{self, EncodeParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let languages = std::env::args().nth(1).map_or(Ok(5), |s| s.parse())?;
    let ds = synth_corpus(
        42,
        &SynthOptions {
            languages,
            train_len: 3000,
            sentences: 20,
            sentence_len: 120,
            ..Default::default()
        },
    );
    let config = HdcrConfig {
        num_pgs: 2,
        ..Default::default()
    };
    let corpus: Vec<_> = ds
        .train
        .iter()
        .map(|(l, t)| (l.clone(), t.symbols().to_vec()))
        .collect();

    let trained = train_on_device(&config, &corpus)?;
    let p = EncodeParams {
        n: config.n,
        dim: config.dim,
        seed: config.seed,
    };
    let reference = hdc::train(corpus.iter().map(|(l, t)| (l.clone(), t)), &p)?;
    assert!(
        trained.am == reference,
        "device class vectors differ from the reference"
    );
    let setup = report(&trained.setup, &EnergyParams::default());
    println!(
        "trained {} classes; item memory write {:.1} nJ",
        trained.am.len(),
        setup.total_nj
    );

    let mut pipe = Pipeline::new(&config, trained.placement.clone(), &trained.am)?;
    let (mut correct, mut total, mut energy) = (0, 0, 0.0);
    for (label, s) in ds.usable_tests(config.n) {
        let out = pipe.classify(s.symbols())?;
        correct += (out.label == label) as usize;
        total += 1;
        energy += report(&out.ledger, &EnergyParams::default()).total_nj;
    }
    println!("accuracy {correct}/{total}, {:.1} nJ per query", energy / total as f64);
    Ok(())
}

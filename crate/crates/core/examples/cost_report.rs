//! Energy and latency of one average-length query against a 22-class memory.
//!
//! cargo run --release --example cost_report [-- LEN]

use hdcr::corpus::{synth_corpus, SynthOptions};
use hdcr::cost::{report, EnergyParams};
use hdcr::engine::{train_on_device, HdcrConfig, Pipeline};

fn main() {
    let len: usize = std::env::args()
        .nth(1)
        .map_or(150, |s| s.parse().expect("LEN is a number"));
    let ds = synth_corpus(
        1,
        &SynthOptions {
            languages: 22,
            train_len: 2000,
            sentences: 1,
            sentence_len: len,
            ..Default::default()
        },
    );
    let config = HdcrConfig::default();
    let corpus: Vec<_> = ds
        .train
        .iter()
        .map(|(l, t)| (l.clone(), t.symbols().to_vec()))
        .collect();
    let trained = train_on_device(&config, &corpus).expect("training");
    let mut pipe = Pipeline::new(&config, trained.placement.clone(), &trained.am).expect("setup");

    let (label, query) = ds.usable_tests(config.n).next().expect("one test sentence");
    let out = pipe.classify(query.symbols()).expect("classify");
    println!(
        "query of {} symbols from {label}: classified as {}",
        query.len(),
        out.label
    );

    let r = report(&out.ledger, &EnergyParams::default());
    println!("encoder   {:>10.2} nJ", r.encoder_nj);
    println!("sim check {:>10.2} nJ", r.simcheck_nj);
    println!("io        {:>10.2} nJ", r.io_nj);
    println!(
        "total     {:>10.2} nJ  ({:.2} dynamic, {:.2} background)",
        r.total_nj, r.dynamic_nj, r.background_nj
    );
    println!("cycles    {:>10}     ({:.1} us at 1 GHz)", r.cycles, r.runtime_ns / 1e3);
    for (phase, p) in &r.phases {
        println!("  {phase:<7} {:>8} cycles {:>10.2} nJ", p.cycles, p.total_nj);
    }
}

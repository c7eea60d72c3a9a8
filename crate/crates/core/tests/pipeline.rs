use hdcr::corpus::{self, synth_corpus, SynthOptions};
use hdcr::cost::{report, EnergyParams, Phase};
use hdcr::engine::{train_on_device, BundlingMode, HdcrConfig, Pipeline};
use hdcr::hdc::{self, AssociativeMemory, EncodeParams};

fn small() -> SynthOptions {
    SynthOptions {
        languages: 4,
        train_len: 900,
        sentences: 5,
        sentence_len: 100,
        ..Default::default()
    }
}

#[test]
fn dataset_on_disk_trains_like_in_memory() {
    let ds = synth_corpus(5, &small());
    let dir = tempfile::tempdir().unwrap();
    corpus::write_dataset(&ds, dir.path()).unwrap();
    let back = corpus::load_dataset(&dir.path().join("train"), &dir.path().join("test")).unwrap();
    assert_eq!(back.train, ds.train);

    let config = HdcrConfig {
        dim: 2048,
        num_pgs: 2,
        ..Default::default()
    };
    let train: Vec<_> = back
        .train
        .iter()
        .map(|(l, t)| (l.clone(), t.symbols().to_vec()))
        .collect();
    let trained = train_on_device(&config, &train).unwrap();
    let p = EncodeParams {
        n: config.n,
        dim: config.dim,
        seed: config.seed,
    };
    let reference = hdc::train(train.iter().map(|(l, t)| (l.clone(), t)), &p).unwrap();
    assert!(trained.am == reference);

    let bytes = trained.am.to_container_bytes(config.seed);
    let (am, seed) = AssociativeMemory::from_container_bytes(&bytes).unwrap();
    assert_eq!(seed, config.seed);
    assert!(am == reference);
}

#[test]
fn device_and_reference_agree_on_every_test_sentence() {
    let ds = synth_corpus(9, &small());
    let config = HdcrConfig {
        dim: 1024,
        ..Default::default()
    };
    let train: Vec<_> = ds
        .train
        .iter()
        .map(|(l, t)| (l.clone(), t.symbols().to_vec()))
        .collect();
    let trained = train_on_device(&config, &train).unwrap();
    let im = hdc::gen_item_memory(config.seed, config.dim).unwrap();
    let mut pipe = Pipeline::new(&config, trained.placement.clone(), &trained.am).unwrap();
    let mut queries = 0;
    for (_, s) in ds.usable_tests(config.n) {
        let dev = pipe.classify(s.symbols()).unwrap();
        let q = hdc::encode_with(s.symbols(), config.n, &im).unwrap();
        let r = hdc::classify(&q, &trained.am).unwrap();
        assert_eq!(dev.query, q);
        assert_eq!(dev.label, r.label);
        assert_eq!(dev.distances, r.distances);
        queries += 1;
    }
    assert_eq!(queries, 20);
}

#[test]
fn preset_and_exact_sum_produce_the_same_model() {
    let ds = synth_corpus(2, &small());
    let train: Vec<_> = ds
        .train
        .iter()
        .map(|(l, t)| (l.clone(), t.symbols().to_vec()))
        .collect();
    let base = HdcrConfig {
        dim: 1024,
        ..Default::default()
    };
    let exact = train_on_device(&base, &train).unwrap();
    let preset = train_on_device(
        &HdcrConfig {
            mode: BundlingMode::Preset,
            ..base
        },
        &train,
    )
    .unwrap();
    assert!(exact.am == preset.am);
}

#[test]
fn query_cost_is_split_across_phases() {
    let ds = synth_corpus(4, &small());
    let config = HdcrConfig {
        dim: 1024,
        ..Default::default()
    };
    let train: Vec<_> = ds
        .train
        .iter()
        .map(|(l, t)| (l.clone(), t.symbols().to_vec()))
        .collect();
    let trained = train_on_device(&config, &train).unwrap();
    let mut pipe = Pipeline::new(&config, trained.placement, &trained.am).unwrap();
    let (_, s) = ds.usable_tests(config.n).next().unwrap();
    let out = pipe.classify(s.symbols()).unwrap();
    for p in Phase::ALL {
        assert!(out.ledger.get(p).cycles > 0, "{} charged nothing", p.name());
    }
    let params = EnergyParams::default();
    let r = report(&out.ledger, &params);
    assert!((r.encoder_nj + r.simcheck_nj + r.io_nj - r.total_nj).abs() < 1e-9);
    assert_eq!(r.cycles, out.ledger.total().cycles);

    // longer queries cost more encoder energy, the search cost does not move
    let longer: Vec<_> = s.symbols().iter().chain(s.symbols()).copied().collect();
    let out2 = pipe.classify(&longer).unwrap();
    let r2 = report(&out2.ledger, &params);
    assert!(r2.encoder_nj > 1.5 * r.encoder_nj);
    assert_eq!(
        out2.ledger.get(Phase::Search).tr_bits,
        out.ledger.get(Phase::Search).tr_bits
    );
}

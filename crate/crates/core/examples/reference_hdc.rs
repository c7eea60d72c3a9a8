//! Software HDC: item memory, n-gram encoding, majority bundling and
//! Hamming search. This is the oracle the device pipeline is held to.

use hdcr::corpus::normalize;
use hdcr::hdc::{self, AssociativeMemory, EncodeParams};

const TEXTS: [(&str, &str); 3] = [
    (
        "en",
        "the quick brown fox jumps over the lazy dog while the farmer watches from the field",
    ),
    (
        "de",
        "der schnelle braune fuchs springt ueber den faulen hund waehrend der bauer zuschaut",
    ),
    (
        "it",
        "la volpe veloce salta sopra il cane pigro mentre il contadino guarda dal campo",
    ),
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = EncodeParams::default();
    let im = hdc::gen_item_memory(p.seed, p.dim)?;
    let a = im.get(normalize("a").symbols()[0]);
    let b = im.get(normalize("b").symbols()[0]);
    println!("D={} n={}: d(a,b) = {}", p.dim, p.n, hdc::hamming(a, b)?);

    let mut am = AssociativeMemory::new();
    for (label, text) in TEXTS {
        am.insert(label, hdc::encode(normalize(text).symbols(), &p)?)?;
    }
    for q in [
        "the dog jumps over the fox",
        "der hund springt ueber den fuchs",
        "il cane salta sopra la volpe",
    ] {
        let hv = hdc::encode(normalize(q).symbols(), &p)?;
        let r = hdc::classify(&hv, &am)?;
        println!("{q:<36} -> {:<3} {:?}", r.label, r.distances);
    }
    Ok(())
}

//! Shared fixtures for the benches: deterministic synthetic inputs at
//! a fixed desk scale, so timings are comparable across runs.

use phmmw_core::evalharness::SuperfamilyDataset;
use phmmw_core::seqdata::{AminoAcid, AnnotatedAlignment};
use phmmw_core::synthgen::{generate, SynthSpec};

/// One 24-sequence, 60-column annotated family alignment.
pub fn family_alignment() -> AnnotatedAlignment {
    let spec = SynthSpec {
        seed: 3,
        superfamilies: 1,
        families: 1,
        seqs_per_family: 24,
        length: 60,
        ..SynthSpec::default()
    };
    let datasets = generate(&spec).expect("fixed spec is valid");
    datasets[0].families[0].alignment.clone()
}

/// An unaligned query drawn from the fixture alignment.
pub fn query(aln: &AnnotatedAlignment) -> Vec<AminoAcid> {
    aln.sequences()[0].ungapped()
}

/// A two-superfamily corpus sized for a full experiment per iteration.
pub fn tiny_corpus() -> Vec<SuperfamilyDataset> {
    let spec = SynthSpec {
        seed: 4,
        superfamilies: 2,
        families: 3,
        seqs_per_family: 7,
        length: 12,
        ..SynthSpec::default()
    };
    generate(&spec).expect("fixed spec is valid")
}

//! Profile HMM training with structure-derived residue weights.
//!
//! The crate builds Plan7 profile HMMs from annotated multiple sequence
//! alignments. Training counts are weighted per residue: a tree-based
//! sequence weighting (GSC) corrects for redundancy, and optional
//! structural weight matrices (secondary structure, solvent
//! inaccessibility, contact density, core-structure proximity) emphasize
//! positions that carry structural signal. Models score sequences with
//! global Viterbi/Forward log-odds, are calibrated against a Gumbel null,
//! and can be grouped into small libraries with best-E-value or voting
//! combination. An evaluation harness runs leave-one-family-out
//! cross-validation and reports ROC/PR curves, AUCs, and paired t-tests.

pub mod evalharness;
pub mod plan7;
pub mod scorer;
pub mod seqdata;
pub mod seqweights;
pub mod stats;
pub mod structweights;
pub mod synthgen;

pub use evalharness::{
    EvalConfig, EvalError, EvalReport, FamilyData, LofoSplit, PairedTTest, SuperfamilyDataset,
};
pub use plan7::{
    BuildError, ModelIoError, NullModel, Plan7Model, PseudocountConfig, WeightScheme,
};
pub use scorer::{
    GumbelParams, Hit, LibraryPolicy, LibraryVerdict, ModelLibrary, ScoreError, Scorer,
};
pub use seqdata::{AminoAcid, AnnotatedAlignment, Cell, ResidueAnnotation, SeqDataError};
pub use seqweights::{WeightError, WeightMatrix, WeightTag};
pub use structweights::{HcsParams, StructWeightError};
pub use synthgen::{SynthError, SynthSpec};

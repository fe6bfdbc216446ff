//! Plan7 profile HMM estimation from weighted alignments.
//!
//! A model has K match nodes selected from alignment columns by weighted
//! occupancy. Every node carries match and insert emission distributions
//! and the seven Plan7 transitions (M->M, M->I, M->D, I->M, I->I, D->M,
//! D->D); a begin block adds B->M1/B->I0/B->D1 and the node-0 insert
//! state for residues before the first match column. I->D and D->I do
//! not exist.
//!
//! Training counts are weighted: each residue cell contributes its
//! weight-matrix entry to its column's emission counts, and each
//! consecutive state pair along a sequence's alignment path contributes
//! the mean of the generating column weights (a bare weight when one
//! side is silent, 1 when both are). Estimation adds a Dirichlet
//! pseudocount `A * background` per emission and a flat pseudocount per
//! legal transition, then normalizes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scorer::GumbelParams;
use crate::seqdata::{AminoAcid, AnnotatedAlignment, ALPHABET};
use crate::seqweights::{gsc_weight_matrix, WeightError, WeightMatrix};
use crate::structweights::{
    acc_weights, combine, hcs_weights, ooi_weights, ss_weights, HcsParams, StructWeightError,
};

/// Transition slot order within a node, used everywhere a node's seven
/// transitions appear as an array.
pub const TRANS_MM: usize = 0;
pub const TRANS_MI: usize = 1;
pub const TRANS_MD: usize = 2;
pub const TRANS_IM: usize = 3;
pub const TRANS_II: usize = 4;
pub const TRANS_DM: usize = 5;
pub const TRANS_DD: usize = 6;

/// Errors raised while building a model.
#[derive(Debug, Error, PartialEq)]
pub enum BuildError {
    #[error("dimension-mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("no-match-columns: weighted occupancy stays below 1/2 in every column")]
    NoMatchColumns,
    #[error("invalid-model: {reason}")]
    InvalidModel { reason: String },
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Struct(#[from] StructWeightError),
}

/// Errors raised by model serialization.
#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("unsupported-version: `{found}`")]
    UnsupportedVersion { found: String },
    #[error("checksum-mismatch: stored and recomputed digests differ")]
    ChecksumMismatch,
    #[error("malformed-model: {reason}")]
    MalformedModel { reason: String },
    #[error("io-error: {0}")]
    Io(#[from] std::io::Error),
}

/// Dirichlet pseudocounts for estimation: emissions receive
/// `emission_strength * background[residue]`, every legal transition
/// receives `transition_alpha`.
#[derive(Clone, PartialEq, Debug)]
pub struct PseudocountConfig {
    pub emission_strength: f64,
    pub background: [f64; 20],
    pub transition_alpha: f64,
}

/// Average residue frequencies of a large curated protein collection,
/// in [`ALPHABET`] order. Normalized exactly at load.
const BACKGROUND_RAW: [f64; 20] = [
    0.0826, 0.0137, 0.0546, 0.0675, 0.0386, 0.0708, 0.0227, 0.0593, 0.0584, 0.0966, 0.0242,
    0.0406, 0.0470, 0.0393, 0.0553, 0.0657, 0.0534, 0.0687, 0.0110, 0.0292,
];

/// The built-in background distribution (sums to 1).
pub fn default_background() -> [f64; 20] {
    let sum: f64 = BACKGROUND_RAW.iter().sum();
    let mut bg = BACKGROUND_RAW;
    for v in &mut bg {
        *v /= sum;
    }
    bg
}

impl Default for PseudocountConfig {
    fn default() -> Self {
        PseudocountConfig {
            emission_strength: 9.0,
            background: default_background(),
            transition_alpha: 1.0,
        }
    }
}

impl PseudocountConfig {
    /// Uniform background (1/20 per residue); mostly for tests and
    /// hand-checked fixtures.
    pub fn with_uniform_background(emission_strength: f64, transition_alpha: f64) -> Self {
        PseudocountConfig {
            emission_strength,
            background: [1.0 / 20.0; 20],
            transition_alpha,
        }
    }
}

/// Background residue distribution plus a geometric length term: a
/// sequence of length n has null probability
/// `prod(bg) * p1^n * (1 - p1)`.
#[derive(Clone, PartialEq, Debug)]
pub struct NullModel {
    pub background: [f64; 20],
    pub p1: f64,
}

impl NullModel {
    /// `expected_len` sets the geometric term via
    /// `p1 = expected_len / (expected_len + 1)`.
    pub fn new(background: [f64; 20], expected_len: usize) -> NullModel {
        let l = expected_len.max(1) as f64;
        NullModel {
            background,
            p1: l / (l + 1.0),
        }
    }

    /// Natural-log null probability of a residue string. Unknown
    /// residues contribute no background term (the scorer's emission
    /// term cancels the same way), but still count toward length.
    pub fn ln_prob(&self, seq: &[AminoAcid]) -> f64 {
        let mut lp = 0.0;
        for aa in seq {
            if let Some(i) = aa.index() {
                lp += self.background[i].ln();
            }
        }
        lp + seq.len() as f64 * self.p1.ln() + (1.0 - self.p1).ln()
    }
}

/// One match node of the model.
#[derive(Clone, PartialEq, Debug)]
pub struct Node {
    pub match_emission: [f64; 20],
    pub insert_emission: [f64; 20],
    /// Slots in [`TRANS_MM`]..[`TRANS_DD`] order. For the last node,
    /// M->M, I->M, D->M lead to the end state and the M->D/D->D slots
    /// are exactly zero.
    pub transitions: [f64; 7],
}

/// Entry block: transitions out of B and the node-0 insert state.
#[derive(Clone, PartialEq, Debug)]
pub struct BeginState {
    pub to_match: f64,
    pub to_insert: f64,
    pub to_delete: f64,
    pub insert_emission: [f64; 20],
    pub insert_to_match: f64,
    pub insert_loop: f64,
}

/// A Plan7 profile HMM with its null model and optional calibration.
#[derive(Clone, PartialEq, Debug)]
pub struct Plan7Model {
    pub name: String,
    pub begin: BeginState,
    pub nodes: Vec<Node>,
    /// Alignment columns (ascending) that became match nodes.
    pub match_columns: Vec<usize>,
    pub null: NullModel,
    pub calibration: Option<GumbelParams>,
    /// Free-form provenance (scheme, config hash, seed, ...); keys and
    /// values must not contain newlines.
    pub metadata: BTreeMap<String, String>,
}

impl Plan7Model {
    /// Number of match nodes.
    pub fn k(&self) -> usize {
        self.nodes.len()
    }

    /// Checks the structural invariants: every outgoing distribution
    /// sums to 1 within 1e-9, no negative entries, forbidden last-node
    /// slots exactly zero, match columns strictly ascending.
    pub fn validate(&self) -> Result<(), BuildError> {
        let fail = |reason: String| Err(BuildError::InvalidModel { reason });
        if self.nodes.is_empty() {
            return fail("model has no nodes".into());
        }
        if self.match_columns.len() != self.nodes.len() {
            return fail(format!(
                "{} match columns for {} nodes",
                self.match_columns.len(),
                self.nodes.len()
            ));
        }
        if !self.match_columns.windows(2).all(|w| w[0] < w[1]) {
            return fail("match columns not strictly ascending".into());
        }
        let sum_to_one = |values: &[f64], what: &str| -> Result<(), BuildError> {
            if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return fail(format!("{what} has a negative or non-finite entry"));
            }
            let s: f64 = values.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return fail(format!("{what} sums to {s}"));
            }
            Ok(())
        };
        sum_to_one(
            &[self.begin.to_match, self.begin.to_insert, self.begin.to_delete],
            "begin distribution",
        )?;
        sum_to_one(
            &[self.begin.insert_to_match, self.begin.insert_loop],
            "node-0 insert transitions",
        )?;
        sum_to_one(&self.begin.insert_emission, "node-0 insert emission")?;
        let last = self.nodes.len() - 1;
        for (idx, node) in self.nodes.iter().enumerate() {
            let label = format!("node {}", idx + 1);
            sum_to_one(&node.match_emission, &format!("{label} match emission"))?;
            sum_to_one(&node.insert_emission, &format!("{label} insert emission"))?;
            let t = &node.transitions;
            sum_to_one(&t[TRANS_MM..=TRANS_MD], &format!("{label} match transitions"))?;
            sum_to_one(&t[TRANS_IM..=TRANS_II], &format!("{label} insert transitions"))?;
            sum_to_one(&t[TRANS_DM..=TRANS_DD], &format!("{label} delete transitions"))?;
            if idx == last && (t[TRANS_MD] != 0.0 || t[TRANS_DD] != 0.0) {
                return fail("last node must not transition to a further delete".into());
            }
        }
        sum_to_one(&self.null.background, "null background")?;
        if !(self.null.p1 > 0.0 && self.null.p1 < 1.0) {
            return fail(format!("null p1 {} outside (0, 1)", self.null.p1));
        }
        if let Some(c) = &self.calibration {
            if !(c.lambda.is_finite() && c.lambda > 0.0 && c.mu.is_finite()) {
                return fail("calibration parameters not finite/positive".into());
            }
        }
        Ok(())
    }
}

fn check_dims(aln: &AnnotatedAlignment, weights: &WeightMatrix) -> Result<(), BuildError> {
    if weights.n_rows() != aln.n_sequences() || weights.n_cols() != aln.length() {
        return Err(BuildError::DimensionMismatch {
            context: format!(
                "weight matrix {}x{} for alignment {}x{}",
                weights.n_rows(),
                weights.n_cols(),
                aln.n_sequences(),
                aln.length()
            ),
        });
    }
    Ok(())
}

/// Match columns: weighted residue occupancy at least 1/2.
///
/// Occupancy of column j is the weight over residue cells divided by the
/// weight over all cells of the column.
pub fn select_match_columns(
    aln: &AnnotatedAlignment,
    weights: &WeightMatrix,
) -> Result<Vec<usize>, BuildError> {
    check_dims(aln, weights)?;
    let mut out = Vec::new();
    for j in 0..aln.length() {
        let mut residue = 0.0;
        let mut total = 0.0;
        for i in 0..aln.n_sequences() {
            let w = weights.get(i, j);
            total += w;
            if aln.cell(i, j).is_residue() {
                residue += w;
            }
        }
        if residue / total >= 0.5 {
            out.push(j);
        }
    }
    Ok(out)
}

/// Weighted counts accumulated from an alignment, prior to pseudocounts.
#[derive(Clone, PartialEq, Debug)]
pub struct WeightedCounts {
    /// B->M1, B->I0, B->D1.
    pub begin: [f64; 3],
    /// I0->M1, I0->I0.
    pub begin_insert: [f64; 2],
    pub begin_insert_emission: [f64; 20],
    pub match_emission: Vec<[f64; 20]>,
    pub insert_emission: Vec<[f64; 20]>,
    /// Per node, in [`TRANS_MM`]..[`TRANS_DD`] slot order.
    pub transitions: Vec<[f64; 7]>,
}

/// Weighted match-emission counts per match column: every residue cell
/// adds its weight to its column's count for that residue; unknown
/// residues add nothing.
pub fn weighted_emission_counts(
    aln: &AnnotatedAlignment,
    weights: &WeightMatrix,
    match_columns: &[usize],
) -> Result<Vec<[f64; 20]>, BuildError> {
    check_dims(aln, weights)?;
    let mut out = vec![[0.0f64; 20]; match_columns.len()];
    for (k, &j) in match_columns.iter().enumerate() {
        for i in 0..aln.n_sequences() {
            if let Some(aa) = aln.cell(i, j).residue() {
                if let Some(s) = aa.index() {
                    out[k][s] += weights.get(i, j);
                }
            }
        }
    }
    Ok(out)
}

/// One step of a sequence's alignment path. Emitting states carry the
/// weight of the column that generated them.
#[derive(Clone, Copy, PartialEq, Debug)]
enum PathStep {
    Begin,
    /// Node 1..=K.
    Match(usize, f64),
    /// Node 0..=K (0 is the begin block's insert state).
    Insert(usize, f64),
    /// Node 1..=K.
    Delete(usize),
    End,
}

impl PathStep {
    fn weight(self) -> Option<f64> {
        match self {
            PathStep::Match(_, w) | PathStep::Insert(_, w) => Some(w),
            _ => None,
        }
    }
}

/// Builds the canonical Plan7 path of one sequence.
///
/// Within a segment between consecutive matched nodes, insert residues
/// would collide with deletions (insert states only connect adjacent
/// match states), so with r insert residues and d deleted nodes,
/// min(r, d) residues are promoted into the leftmost deleted nodes'
/// match states, in order; the remainder stay as inserts at the
/// segment's left node. The result never contains I->D or D->I.
fn training_path(
    aln: &AnnotatedAlignment,
    weights: &WeightMatrix,
    match_columns: &[usize],
    seq: usize,
) -> Vec<PathStep> {
    let k_total = match_columns.len();
    // Emitted cells per node pool: matched nodes and insert weights.
    let mut matched: Vec<(usize, f64)> = Vec::new(); // (node 1..=K, weight)
    let mut insert_pool: Vec<Vec<f64>> = vec![Vec::new(); k_total + 1];
    let mut next_match = 0usize; // index into match_columns
    for j in 0..aln.length() {
        if next_match < k_total && match_columns[next_match] == j {
            if aln.cell(seq, j).is_residue() {
                matched.push((next_match + 1, weights.get(seq, j)));
            }
            next_match += 1;
        } else if aln.cell(seq, j).is_residue() {
            insert_pool[next_match].push(weights.get(seq, j));
        }
    }

    let mut path = vec![PathStep::Begin];
    let mut boundary = 0usize; // previous matched node; 0 means Begin
    let emit_segment = |path: &mut Vec<PathStep>, a: usize, b: usize| {
        // Insert residues of nodes a..b-1 lie between matched a and b.
        let pool: Vec<f64> = (a..b).flat_map(|p| insert_pool[p].iter().copied()).collect();
        let d = b - a - 1;
        let r = pool.len();
        let m = r.min(d);
        for &w in &pool[..r - m] {
            path.push(PathStep::Insert(a, w));
        }
        for (q, &w) in pool[r - m..].iter().enumerate() {
            path.push(PathStep::Match(a + 1 + q, w));
        }
        for node in (a + m + 1)..b {
            path.push(PathStep::Delete(node));
        }
    };
    for &(node, w) in &matched {
        emit_segment(&mut path, boundary, node);
        path.push(PathStep::Match(node, w));
        boundary = node;
    }
    emit_segment(&mut path, boundary, k_total + 1);
    path.push(PathStep::End);
    path
}

/// Weighted transition counts (and insert-emission counts) accumulated
/// over every sequence's canonical path.
///
/// A consecutive state pair contributes the mean of its members' column
/// weights; silent states (B, D, E) carry none, so one-sided pairs
/// contribute the emitting side's weight and fully silent pairs
/// contribute 1.
pub fn weighted_transition_counts(
    aln: &AnnotatedAlignment,
    weights: &WeightMatrix,
    match_columns: &[usize],
) -> Result<WeightedCounts, BuildError> {
    check_dims(aln, weights)?;
    // A model needs at least one node; with none, paths would run
    // B -> I0 -> E which has no transition slots at all.
    if match_columns.is_empty() {
        return Err(BuildError::NoMatchColumns);
    }
    let k_total = match_columns.len();
    let mut counts = WeightedCounts {
        begin: [0.0; 3],
        begin_insert: [0.0; 2],
        begin_insert_emission: [0.0; 20],
        match_emission: weighted_emission_counts(aln, weights, match_columns)?,
        insert_emission: vec![[0.0; 20]; k_total],
        transitions: vec![[0.0; 7]; k_total],
    };

    // Insert emissions are column counts, independent of path surgery:
    // each insert-column residue belongs to the insert state of the
    // preceding node.
    let mut next_match = 0usize;
    for j in 0..aln.length() {
        if next_match < k_total && match_columns[next_match] == j {
            next_match += 1;
            continue;
        }
        for i in 0..aln.n_sequences() {
            if let Some(aa) = aln.cell(i, j).residue() {
                if let Some(s) = aa.index() {
                    let slot = if next_match == 0 {
                        &mut counts.begin_insert_emission
                    } else {
                        &mut counts.insert_emission[next_match - 1]
                    };
                    slot[s] += weights.get(i, j);
                }
            }
        }
    }

    for i in 0..aln.n_sequences() {
        let path = training_path(aln, weights, match_columns, i);
        for pair in path.windows(2) {
            let (from, to) = (pair[0], pair[1]);
            let contribution = match (from.weight(), to.weight()) {
                (Some(a), Some(b)) => (a + b) / 2.0,
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => 1.0,
            };
            use PathStep::*;
            match (from, to) {
                (Begin, Match(1, _)) => counts.begin[0] += contribution,
                (Begin, Insert(0, _)) => counts.begin[1] += contribution,
                (Begin, Delete(1)) => counts.begin[2] += contribution,
                (Insert(0, _), Match(1, _)) => counts.begin_insert[0] += contribution,
                (Insert(0, _), Insert(0, _)) => counts.begin_insert[1] += contribution,
                (Match(k, _), Match(n, _)) if n == k + 1 => {
                    counts.transitions[k - 1][TRANS_MM] += contribution
                }
                (Match(k, _), End) if k == k_total => {
                    counts.transitions[k - 1][TRANS_MM] += contribution
                }
                (Match(k, _), Insert(n, _)) if n == k => {
                    counts.transitions[k - 1][TRANS_MI] += contribution
                }
                (Match(k, _), Delete(n)) if n == k + 1 => {
                    counts.transitions[k - 1][TRANS_MD] += contribution
                }
                (Insert(k, _), Match(n, _)) if k >= 1 && n == k + 1 => {
                    counts.transitions[k - 1][TRANS_IM] += contribution
                }
                (Insert(k, _), End) if k == k_total && k >= 1 => {
                    counts.transitions[k - 1][TRANS_IM] += contribution
                }
                (Insert(k, _), Insert(n, _)) if k >= 1 && n == k => {
                    counts.transitions[k - 1][TRANS_II] += contribution
                }
                (Delete(k), Match(n, _)) if n == k + 1 => {
                    counts.transitions[k - 1][TRANS_DM] += contribution
                }
                (Delete(k), End) if k == k_total => {
                    counts.transitions[k - 1][TRANS_DM] += contribution
                }
                (Delete(k), Delete(n)) if n == k + 1 => {
                    counts.transitions[k - 1][TRANS_DD] += contribution
                }
                other => unreachable!("illegal path adjacency {other:?}"),
            }
        }
    }
    Ok(counts)
}

/// Emission distribution from weighted counts and the Dirichlet prior.
pub fn estimate_emissions(counts: &[f64; 20], cfg: &PseudocountConfig) -> [f64; 20] {
    let mut out = [0.0f64; 20];
    let mut total = 0.0;
    for s in 0..20 {
        let v = counts[s] + cfg.emission_strength * cfg.background[s];
        out[s] = v;
        total += v;
    }
    for v in &mut out {
        *v /= total;
    }
    out
}

/// Transition distribution over one state's legal successors.
pub fn estimate_transitions(counts: &[f64], alpha: f64) -> Vec<f64> {
    let total: f64 = counts.iter().map(|c| c + alpha).sum();
    counts.iter().map(|c| (c + alpha) / total).collect()
}

/// Estimates a model from an alignment and a combined weight matrix.
pub fn build_model(
    aln: &AnnotatedAlignment,
    weights: &WeightMatrix,
    cfg: &PseudocountConfig,
    name: &str,
    metadata: BTreeMap<String, String>,
) -> Result<Plan7Model, BuildError> {
    let match_columns = select_match_columns(aln, weights)?;
    if match_columns.is_empty() {
        return Err(BuildError::NoMatchColumns);
    }
    let counts = weighted_transition_counts(aln, weights, &match_columns)?;
    let k_total = match_columns.len();
    let alpha = cfg.transition_alpha;

    let begin3 = estimate_transitions(&counts.begin, alpha);
    let begin_insert2 = estimate_transitions(&counts.begin_insert, alpha);
    let begin = BeginState {
        to_match: begin3[0],
        to_insert: begin3[1],
        to_delete: begin3[2],
        insert_emission: estimate_emissions(&counts.begin_insert_emission, cfg),
        insert_to_match: begin_insert2[0],
        insert_loop: begin_insert2[1],
    };

    let mut nodes = Vec::with_capacity(k_total);
    for k in 0..k_total {
        let t = &counts.transitions[k];
        let mut transitions = [0.0f64; 7];
        if k + 1 < k_total {
            let m = estimate_transitions(&t[TRANS_MM..=TRANS_MD], alpha);
            transitions[TRANS_MM] = m[0];
            transitions[TRANS_MI] = m[1];
            transitions[TRANS_MD] = m[2];
            let d = estimate_transitions(&t[TRANS_DM..=TRANS_DD], alpha);
            transitions[TRANS_DM] = d[0];
            transitions[TRANS_DD] = d[1];
        } else {
            // Last node: M->D and D->D do not exist.
            let m = estimate_transitions(&[t[TRANS_MM], t[TRANS_MI]], alpha);
            transitions[TRANS_MM] = m[0];
            transitions[TRANS_MI] = m[1];
            transitions[TRANS_DM] = 1.0;
        }
        let i = estimate_transitions(&t[TRANS_IM..=TRANS_II], alpha);
        transitions[TRANS_IM] = i[0];
        transitions[TRANS_II] = i[1];
        nodes.push(Node {
            match_emission: estimate_emissions(&counts.match_emission[k], cfg),
            insert_emission: estimate_emissions(&counts.insert_emission[k], cfg),
            transitions,
        });
    }

    let model = Plan7Model {
        name: name.to_string(),
        begin,
        nodes,
        match_columns,
        null: NullModel::new(cfg.background, aln.length()),
        calibration: None,
        metadata,
    };
    model.validate()?;
    Ok(model)
}

/// The five weighting schemes a model can be trained under.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum WeightScheme {
    /// Sequence weights only.
    Baseline,
    /// Secondary-structure weights.
    SecondaryStructure,
    /// Solvent-inaccessibility weights.
    Accessibility,
    /// Contact-density weights.
    ContactDensity,
    /// Core-structure proximity weights.
    CoreProximity,
}

impl WeightScheme {
    pub const ALL: [WeightScheme; 5] = [
        WeightScheme::Baseline,
        WeightScheme::SecondaryStructure,
        WeightScheme::Accessibility,
        WeightScheme::ContactDensity,
        WeightScheme::CoreProximity,
    ];

    /// Short tag used on the command line and in reports.
    pub fn tag(self) -> &'static str {
        match self {
            WeightScheme::Baseline => "1d",
            WeightScheme::SecondaryStructure => "2d",
            WeightScheme::Accessibility => "acc",
            WeightScheme::ContactDensity => "ooi",
            WeightScheme::CoreProximity => "3d",
        }
    }

    pub fn from_tag(tag: &str) -> Option<WeightScheme> {
        WeightScheme::ALL.iter().copied().find(|s| s.tag() == tag)
    }

    /// The scheme's structural matrix; `None` for the baseline.
    pub fn structural_matrix(
        self,
        aln: &AnnotatedAlignment,
        params: HcsParams,
    ) -> Result<Option<WeightMatrix>, StructWeightError> {
        Ok(match self {
            WeightScheme::Baseline => None,
            WeightScheme::SecondaryStructure => Some(ss_weights(aln, params.gap_weight)?),
            WeightScheme::Accessibility => Some(acc_weights(aln, params.gap_weight)?),
            WeightScheme::ContactDensity => Some(ooi_weights(aln, params)?),
            WeightScheme::CoreProximity => Some(hcs_weights(aln, params)?),
        })
    }
}

/// Builds a model under one scheme: GSC sequence weights, optionally
/// multiplied by the scheme's structural matrix.
pub fn build_scheme_model(
    aln: &AnnotatedAlignment,
    scheme: WeightScheme,
    cfg: &PseudocountConfig,
    params: HcsParams,
    name: &str,
    mut metadata: BTreeMap<String, String>,
) -> Result<Plan7Model, BuildError> {
    let w = gsc_weight_matrix(aln)?;
    let weights = match scheme.structural_matrix(aln, params)? {
        None => w,
        Some(m) => combine(&w, &m)?,
    };
    metadata.insert("scheme".to_string(), scheme.tag().to_string());
    build_model(aln, &weights, cfg, name, metadata)
}

const MODEL_HEADER: &str = "PHMMW 1";

fn fmt_f64(v: f64) -> String {
    // 17 significant digits: enough to reproduce the exact f64 on load.
    format!("{v:.16e}")
}

fn push_values(out: &mut String, label: &str, values: &[f64]) {
    out.push_str(label);
    for v in values {
        out.push(' ');
        out.push_str(&fmt_f64(*v));
    }
    out.push('\n');
}

/// Serializes a model to its text form, ending with a checksum line.
pub fn model_to_string(model: &Plan7Model) -> String {
    let mut out = String::new();
    out.push_str(MODEL_HEADER);
    out.push('\n');
    let _ = writeln!(out, "#name {}", model.name);
    for (key, value) in &model.metadata {
        debug_assert!(!key.contains('\n') && !value.contains('\n'));
        let _ = writeln!(out, "#{key} {value}");
    }
    let alphabet: String = ALPHABET.iter().collect();
    let _ = writeln!(out, "alphabet {alphabet}");
    let _ = writeln!(out, "nodes {}", model.nodes.len());
    out.push_str("matchcols");
    for j in &model.match_columns {
        let _ = write!(out, " {j}");
    }
    out.push('\n');
    push_values(&mut out, "null", &model.null.background);
    push_values(&mut out, "p1", &[model.null.p1]);
    if let Some(c) = &model.calibration {
        let _ = writeln!(
            out,
            "calibration {} {} {}",
            fmt_f64(c.mu),
            fmt_f64(c.lambda),
            c.n_samples
        );
    }
    push_values(
        &mut out,
        "begin",
        &[model.begin.to_match, model.begin.to_insert, model.begin.to_delete],
    );
    push_values(&mut out, "i0emit", &model.begin.insert_emission);
    push_values(
        &mut out,
        "i0trans",
        &[model.begin.insert_to_match, model.begin.insert_loop],
    );
    for (idx, node) in model.nodes.iter().enumerate() {
        let k = idx + 1;
        push_values(&mut out, &format!("match {k}"), &node.match_emission);
        push_values(&mut out, &format!("insert {k}"), &node.insert_emission);
        push_values(&mut out, &format!("trans {k}"), &node.transitions);
    }
    let digest = hex_digest(&Sha256::digest(out.as_bytes()));
    let _ = writeln!(out, "CHECKSUM {digest}");
    out
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(out, "{b:02x}");
    }
    out
}

struct LineReader<'a> {
    lines: std::iter::Peekable<std::str::Lines<'a>>,
    lineno: usize,
}

impl<'a> LineReader<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str, ModelIoError> {
        self.lineno += 1;
        self.lines.next().ok_or_else(|| ModelIoError::MalformedModel {
            reason: format!("unexpected end of file, expected {what}"),
        })
    }

    fn expect_values(&mut self, label: &str, count: usize) -> Result<Vec<f64>, ModelIoError> {
        let line = self.next(label)?;
        let rest = line
            .strip_prefix(label)
            .ok_or_else(|| ModelIoError::MalformedModel {
                reason: format!("expected `{label}` line, found `{line}`"),
            })?;
        let values: Vec<f64> = rest
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| ModelIoError::MalformedModel {
                reason: format!("bad number in `{label}`: {e}"),
            })?;
        if values.len() != count {
            return Err(ModelIoError::MalformedModel {
                reason: format!("`{label}` carries {} values, expected {count}", values.len()),
            });
        }
        Ok(values)
    }
}

fn to_array20(values: Vec<f64>) -> [f64; 20] {
    let mut out = [0.0; 20];
    out.copy_from_slice(&values);
    out
}

/// Parses a model from its text form, verifying the checksum.
pub fn model_from_str(text: &str) -> Result<Plan7Model, ModelIoError> {
    let checksum_pos = text.rfind("CHECKSUM ").ok_or_else(|| ModelIoError::MalformedModel {
        reason: "missing checksum line".to_string(),
    })?;
    let body = &text[..checksum_pos];
    let stored = text[checksum_pos..]
        .trim_end()
        .strip_prefix("CHECKSUM ")
        .expect("position found by rfind");
    let digest = hex_digest(&Sha256::digest(body.as_bytes()));
    if digest != stored {
        return Err(ModelIoError::ChecksumMismatch);
    }

    let mut reader = LineReader {
        lines: body.lines().peekable(),
        lineno: 0,
    };
    let header = reader.next("version header")?;
    if header != MODEL_HEADER {
        return Err(ModelIoError::UnsupportedVersion {
            found: header.to_string(),
        });
    }
    let mut name = String::from("model");
    let mut metadata = BTreeMap::new();
    while let Some(line) = reader.lines.peek() {
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        let (key, value) = rest.split_once(' ').unwrap_or((rest, ""));
        if key == "name" {
            name = value.to_string();
        } else {
            metadata.insert(key.to_string(), value.to_string());
        }
        reader.next("metadata")?;
    }

    let alphabet_line = reader.next("alphabet")?;
    let expected_alphabet: String = ALPHABET.iter().collect();
    if alphabet_line != format!("alphabet {expected_alphabet}") {
        return Err(ModelIoError::MalformedModel {
            reason: format!("unexpected alphabet line `{alphabet_line}`"),
        });
    }
    let nodes_line = reader.next("nodes")?;
    let k_total: usize = nodes_line
        .strip_prefix("nodes ")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| ModelIoError::MalformedModel {
            reason: format!("bad nodes line `{nodes_line}`"),
        })?;
    let match_line = reader.next("matchcols")?;
    let match_columns: Vec<usize> = match_line
        .strip_prefix("matchcols")
        .ok_or_else(|| ModelIoError::MalformedModel {
            reason: format!("expected matchcols, found `{match_line}`"),
        })?
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| ModelIoError::MalformedModel {
            reason: format!("bad match column: {e}"),
        })?;

    let background = to_array20(reader.expect_values("null", 20)?);
    let p1 = reader.expect_values("p1", 1)?[0];
    let calibration = if reader
        .lines
        .peek()
        .is_some_and(|l| l.starts_with("calibration "))
    {
        let line = reader.next("calibration")?;
        let mut parts = line.split_whitespace().skip(1);
        let parse = |t: Option<&str>| -> Result<f64, ModelIoError> {
            t.and_then(|v| v.parse().ok())
                .ok_or_else(|| ModelIoError::MalformedModel {
                    reason: "bad calibration line".to_string(),
                })
        };
        let mu = parse(parts.next())?;
        let lambda = parse(parts.next())?;
        let n_samples = parts
            .next()
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| ModelIoError::MalformedModel {
                reason: "bad calibration sample count".to_string(),
            })?;
        Some(GumbelParams {
            mu,
            lambda,
            n_samples,
        })
    } else {
        None
    };

    let begin3 = reader.expect_values("begin", 3)?;
    let insert_emission = to_array20(reader.expect_values("i0emit", 20)?);
    let i0trans = reader.expect_values("i0trans", 2)?;
    let begin = BeginState {
        to_match: begin3[0],
        to_insert: begin3[1],
        to_delete: begin3[2],
        insert_emission,
        insert_to_match: i0trans[0],
        insert_loop: i0trans[1],
    };

    let mut nodes = Vec::with_capacity(k_total);
    for k in 1..=k_total {
        let match_emission = to_array20(reader.expect_values(&format!("match {k}"), 20)?);
        let insert_emission = to_array20(reader.expect_values(&format!("insert {k}"), 20)?);
        let trans = reader.expect_values(&format!("trans {k}"), 7)?;
        let mut transitions = [0.0; 7];
        transitions.copy_from_slice(&trans);
        nodes.push(Node {
            match_emission,
            insert_emission,
            transitions,
        });
    }
    if reader.lines.next().is_some() {
        return Err(ModelIoError::MalformedModel {
            reason: "trailing content after last node".to_string(),
        });
    }

    let model = Plan7Model {
        name,
        begin,
        nodes,
        match_columns,
        null: NullModel { background, p1 },
        calibration,
        metadata,
    };
    model
        .validate()
        .map_err(|e| ModelIoError::MalformedModel {
            reason: e.to_string(),
        })?;
    Ok(model)
}

/// Writes a model file.
pub fn save_model(model: &Plan7Model, path: &Path) -> Result<(), ModelIoError> {
    std::fs::write(path, model_to_string(model))?;
    Ok(())
}

/// Reads a model file.
pub fn load_model(path: &Path) -> Result<Plan7Model, ModelIoError> {
    let text = std::fs::read_to_string(path)?;
    model_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqdata::parse_alignment;
    use crate::seqweights::{broadcast, WeightTag};

    fn matrix(rows: &[&[f64]]) -> WeightMatrix {
        let n = rows.len();
        let l = rows[0].len();
        let values: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        WeightMatrix::new(WeightTag::Combined, n, l, values).unwrap()
    }

    fn uniform_weights(aln: &AnnotatedAlignment) -> WeightMatrix {
        WeightMatrix::filled(WeightTag::Default, aln.n_sequences(), aln.length(), 1.0)
    }

    #[test]
    fn gapless_columns_are_all_match() {
        let aln = parse_alignment(">a\nACDE\n>b\nACDE\n").unwrap();
        let cols = select_match_columns(&aln, &uniform_weights(&aln)).unwrap();
        assert_eq!(cols, vec![0, 1, 2, 3]);
    }

    #[test]
    fn sparse_column_becomes_insert_and_half_is_match() {
        // Column 1: one residue of four rows (occupancy 1/4) -> insert.
        // Column 2: two of four (occupancy exactly 1/2) -> match.
        let aln = parse_alignment(">a\nAAA\n>b\nA-A\n>c\nA--\n>d\nA--\n").unwrap();
        let cols = select_match_columns(&aln, &uniform_weights(&aln)).unwrap();
        assert_eq!(cols, vec![0, 2]);
    }

    #[test]
    fn weights_can_flip_column_selection() {
        // Same occupancy pattern; the heavier row decides the call.
        let aln = parse_alignment(">a\nAA\n>b\nA-\n").unwrap();
        let heavy = matrix(&[&[1.0, 9.0], &[1.0, 1.0]]);
        assert_eq!(select_match_columns(&aln, &heavy).unwrap(), vec![0, 1]);
        let light = matrix(&[&[1.0, 1.0], &[1.0, 9.0]]);
        assert_eq!(select_match_columns(&aln, &light).unwrap(), vec![0]);
    }

    #[test]
    fn emission_counts_sum_cell_weights_per_column() {
        // Rows: ACDE / AC-E / CCDX with weight grid 1..12.
        let aln = parse_alignment(">a\nACDE\n>b\nAC-E\n>c\nCCDX\n").unwrap();
        let w = matrix(&[
            &[1.0, 2.0, 3.0, 4.0],
            &[5.0, 6.0, 7.0, 8.0],
            &[9.0, 10.0, 11.0, 12.0],
        ]);
        let cols: Vec<usize> = (0..4).collect();
        let counts = weighted_emission_counts(&aln, &w, &cols).unwrap();
        let idx = |c: char| AminoAcid::from_char(c).unwrap().index().unwrap();
        assert_eq!(counts[0][idx('A')], 6.0); // 1 + 5
        assert_eq!(counts[0][idx('C')], 9.0);
        assert_eq!(counts[1][idx('C')], 18.0); // 2 + 6 + 10
        assert_eq!(counts[2][idx('D')], 14.0); // 3 + 11; gap adds nothing
        assert_eq!(counts[3][idx('E')], 12.0); // 4 + 8; X adds nothing
        let total: f64 = counts[3].iter().sum();
        assert_eq!(total, 12.0);
    }

    #[test]
    fn transition_counts_match_the_hand_traced_table() {
        // Match columns 0,1,3,4; column 2 is an insert (occupancy 3/6.5
        // by weight). Sequence a passes M1 M2 I2 M3 M4; sequence b
        // passes M1 D2 M3 M4 with nothing at the insert column.
        let aln = parse_alignment(">a\nACGEF\n>b\nA--EF\n").unwrap();
        let w = matrix(&[
            &[1.0, 2.0, 3.0, 4.0, 5.0],
            &[1.5, 0.5, 3.5, 4.5, 5.5],
        ]);
        let cols = select_match_columns(&aln, &w).unwrap();
        assert_eq!(cols, vec![0, 1, 3, 4]);
        let c = weighted_transition_counts(&aln, &w, &cols).unwrap();
        assert_eq!(c.begin, [2.5, 0.0, 0.0]); // B->M1: 1.0 + 1.5
        assert_eq!(c.transitions[0][TRANS_MM], 1.5); // (1+2)/2
        assert_eq!(c.transitions[0][TRANS_MD], 1.5); // b: weight of M1
        assert_eq!(c.transitions[1][TRANS_MI], 2.5); // (2+3)/2
        assert_eq!(c.transitions[1][TRANS_IM], 3.5); // (3+4)/2
        assert_eq!(c.transitions[1][TRANS_DM], 4.5); // b: weight of M3
        assert_eq!(c.transitions[1][TRANS_MM], 0.0);
        assert_eq!(c.transitions[2][TRANS_MM], 9.5); // (4+5)/2 + (4.5+5.5)/2
        assert_eq!(c.transitions[3][TRANS_MM], 10.5); // M4->E: 5.0 + 5.5
        let idx = |ch: char| AminoAcid::from_char(ch).unwrap().index().unwrap();
        assert_eq!(c.insert_emission[1][idx('G')], 3.0);
    }

    #[test]
    fn deletion_spanning_two_columns_counts_one_dd() {
        let aln = parse_alignment(">a\nACDE\n>b\nA--E\n").unwrap();
        let w = uniform_weights(&aln);
        let cols: Vec<usize> = (0..4).collect();
        let c = weighted_transition_counts(&aln, &w, &cols).unwrap();
        assert_eq!(c.transitions[1][TRANS_DD], 1.0);
        assert_eq!(c.transitions[0][TRANS_MD], 1.0);
        assert_eq!(c.transitions[2][TRANS_DM], 1.0);
    }

    #[test]
    fn single_sequence_walks_matches_end_to_end() {
        let aln = parse_alignment(">a\nACD\n").unwrap();
        let w = uniform_weights(&aln);
        let c = weighted_transition_counts(&aln, &w, &[0, 1, 2]).unwrap();
        assert_eq!(c.begin, [1.0, 0.0, 0.0]);
        assert_eq!(c.transitions[0][TRANS_MM], 1.0);
        assert_eq!(c.transitions[1][TRANS_MM], 1.0);
        assert_eq!(c.transitions[2][TRANS_MM], 1.0); // M3 -> E
    }

    #[test]
    fn insert_before_deletion_promotes_into_the_deleted_node() {
        // Match columns 0,2,3. Sequence b holds a residue in insert
        // column 1 but deletes node 2: the insert residue is promoted to
        // the match state of node 2 with its own column weight.
        let aln = parse_alignment(">a\nA-DE\n>b\nAC-E\n>c\nA-DE\n").unwrap();
        let w = matrix(&[
            &[1.0, 1.0, 1.0, 1.0],
            &[1.0, 0.5, 1.0, 4.0],
            &[1.0, 1.0, 1.0, 1.0],
        ]);
        let cols = select_match_columns(&aln, &w).unwrap();
        assert_eq!(cols, vec![0, 2, 3]);
        let path = training_path(&aln, &w, &cols, 1);
        assert_eq!(
            path,
            vec![
                PathStep::Begin,
                PathStep::Match(1, 1.0),
                PathStep::Match(2, 0.5), // promoted insert residue
                PathStep::Match(3, 4.0),
                PathStep::End,
            ]
        );
        // Sequence c has no insert-column residue and walks matches only.
        let path_c = training_path(&aln, &w, &cols, 2);
        assert_eq!(
            path_c,
            vec![
                PathStep::Begin,
                PathStep::Match(1, 1.0),
                PathStep::Match(2, 1.0),
                PathStep::Match(3, 1.0),
                PathStep::End,
            ]
        );
    }

    #[test]
    fn deletion_before_insert_also_promotes() {
        // Match columns 0,1,3; insert column 2. Sequence b deletes node
        // 2 and carries an insert residue after it: the residue fills
        // node 2's match state instead of creating D->I.
        let aln = parse_alignment(">a\nAC-E\n>b\nA-CE\n>c\nAC-E\n").unwrap();
        let w = uniform_weights(&aln);
        let cols = select_match_columns(&aln, &w).unwrap();
        assert_eq!(cols, vec![0, 1, 3]);
        let path = training_path(&aln, &w, &cols, 1);
        assert_eq!(
            path,
            vec![
                PathStep::Begin,
                PathStep::Match(1, 1.0),
                PathStep::Match(2, 1.0),
                PathStep::Match(3, 1.0),
                PathStep::End,
            ]
        );
    }

    #[test]
    fn surplus_inserts_stay_at_the_segment_left_node() {
        // Two insert residues, one deleted node: one residue is
        // promoted, the other stays an insert at the left boundary.
        let aln = parse_alignment(">a\nAC--E\n>b\nACDF-\n>c\nAC--E\n").unwrap();
        // Columns: 0,1 match; 2,3 inserts of node 2; column 4 match.
        let w = uniform_weights(&aln);
        let cols = select_match_columns(&aln, &w).unwrap();
        assert_eq!(cols, vec![0, 1, 4]);
        let path = training_path(&aln, &w, &cols, 1);
        assert_eq!(
            path,
            vec![
                PathStep::Begin,
                PathStep::Match(1, 1.0),
                PathStep::Match(2, 1.0),
                PathStep::Insert(2, 1.0),
                PathStep::Match(3, 1.0),
                PathStep::End,
            ]
        );
    }

    #[test]
    fn leading_and_trailing_inserts_use_the_boundary_states() {
        // Column 0 is an insert column (1/3 occupancy): sequence a
        // enters through the node-0 insert state. Sequence b ends in a
        // deletion.
        let aln = parse_alignment(">a\nFAC\n>b\n-A-\n>c\n-AC\n").unwrap();
        let w = uniform_weights(&aln);
        let cols = select_match_columns(&aln, &w).unwrap();
        assert_eq!(cols, vec![1, 2]);
        let c = weighted_transition_counts(&aln, &w, &cols).unwrap();
        assert_eq!(c.begin, [2.0, 1.0, 0.0]); // b,c straight to M1; a via I0
        assert_eq!(c.begin_insert, [1.0, 0.0]); // I0 -> M1 once
        let idx = |ch: char| AminoAcid::from_char(ch).unwrap().index().unwrap();
        assert_eq!(c.begin_insert_emission[idx('F')], 1.0);
        // b: M1 -> D2 -> E contributes via the delete chain.
        assert_eq!(c.transitions[0][TRANS_MD], 1.0);
        assert_eq!(c.transitions[1][TRANS_DM], 1.0); // D2 -> E, silent pair = 1
        assert_eq!(c.transitions[1][TRANS_MM], 2.0); // a and c: M2 -> E
    }

    #[test]
    fn prior_only_estimation_returns_the_prior() {
        let cfg = PseudocountConfig::with_uniform_background(20.0, 1.0);
        let e = estimate_emissions(&[0.0; 20], &cfg);
        for v in e {
            assert!((v - 0.05).abs() < 1e-15);
        }
        let t = estimate_transitions(&[0.0, 0.0, 0.0], 1.0);
        for v in t {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn laplace_style_estimate_matches_closed_form() {
        // Count 2 for one residue, uniform unit pseudocounts:
        // (2 + 1) / (2 + 20) = 3/22.
        let cfg = PseudocountConfig::with_uniform_background(20.0, 1.0);
        let mut counts = [0.0; 20];
        counts[0] = 2.0;
        let e = estimate_emissions(&counts, &cfg);
        assert!((e[0] - 3.0 / 22.0).abs() < 1e-15);
        assert!((e[1] - 1.0 / 22.0).abs() < 1e-15);
        let sum: f64 = e.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transition_estimate_matches_closed_form() {
        // Counts (3, 0, 1) with alpha 1: (4/7, 1/7, 2/7).
        let t = estimate_transitions(&[3.0, 0.0, 1.0], 1.0);
        assert!((t[0] - 4.0 / 7.0).abs() < 1e-15);
        assert!((t[1] - 1.0 / 7.0).abs() < 1e-15);
        assert!((t[2] - 2.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn adding_counts_strictly_raises_the_estimate() {
        let cfg = PseudocountConfig::default();
        let mut counts = [0.0; 20];
        let mut last = estimate_emissions(&counts, &cfg)[3];
        for step in 1..20 {
            counts[3] += 0.375;
            let e = estimate_emissions(&counts, &cfg)[3];
            assert!(e > last, "estimate should grow at step {step}");
            last = e;
        }
    }

    fn toy_alignment() -> AnnotatedAlignment {
        parse_alignment(">a\nACDE\n>b\nAC-E\n>c\nACDF\n").unwrap()
    }

    #[test]
    fn build_produces_a_valid_model() {
        let aln = toy_alignment();
        let w = uniform_weights(&aln);
        let cfg = PseudocountConfig::default();
        let model = build_model(&aln, &w, &cfg, "toy", BTreeMap::new()).unwrap();
        assert_eq!(model.k(), 4);
        assert_eq!(model.match_columns, vec![0, 1, 2, 3]);
        model.validate().unwrap();
        // Null length term follows the alignment length.
        assert!((model.null.p1 - 4.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn all_ones_structural_matrix_changes_nothing() {
        let aln = toy_alignment();
        let w = broadcast(&crate::seqweights::gsc_weights(
            &crate::seqweights::upgma(&crate::seqweights::pairwise_distances(&aln)).unwrap(),
        ), &aln)
        .unwrap();
        let ones = WeightMatrix::filled(WeightTag::Structural, 3, 4, 1.0);
        let combined = combine(&w, &ones).unwrap();
        let cfg = PseudocountConfig::default();
        let base = build_model(&aln, &w, &cfg, "m", BTreeMap::new()).unwrap();
        let same = build_model(&aln, &combined, &cfg, "m", BTreeMap::new()).unwrap();
        assert_eq!(base, same);
        assert_eq!(model_to_string(&base), model_to_string(&same));
    }

    #[test]
    fn power_of_two_rescaling_with_scaled_priors_is_exact() {
        let aln = toy_alignment();
        let w = uniform_weights(&aln);
        let row = [4.0f64; 4];
        let scaled = matrix(&[&row, &row, &row]);
        let cfg = PseudocountConfig::default();
        let cfg_scaled = PseudocountConfig {
            emission_strength: cfg.emission_strength * 4.0,
            transition_alpha: cfg.transition_alpha * 4.0,
            ..cfg.clone()
        };
        let base = build_model(&aln, &w, &cfg, "m", BTreeMap::new()).unwrap();
        let rescaled = build_model(&aln, &scaled, &cfg_scaled, "m", BTreeMap::new()).unwrap();
        assert_eq!(base, rescaled);
    }

    #[test]
    fn uniform_contact_counts_reduce_to_the_baseline() {
        use crate::seqdata::ResidueAnnotation;
        // Every residue annotated with the same contact count 4: the
        // contact weights multiply all counts by 4, which cancels when
        // the pseudocounts scale along.
        let mut aln = toy_alignment();
        for i in 0..aln.n_sequences() {
            for j in 0..aln.length() {
                if aln.cell(i, j).is_residue() {
                    aln.set_annotation(
                        i,
                        j,
                        ResidueAnnotation {
                            ooi: Some(4),
                            ..Default::default()
                        },
                    )
                    .unwrap();
                }
            }
        }
        let cfg = PseudocountConfig::default();
        let cfg4 = PseudocountConfig {
            emission_strength: cfg.emission_strength * 4.0,
            transition_alpha: cfg.transition_alpha * 4.0,
            ..cfg.clone()
        };
        let baseline =
            build_scheme_model(&aln, WeightScheme::Baseline, &cfg, HcsParams::default(), "m", BTreeMap::new())
                .unwrap();
        let contact = build_scheme_model(
            &aln,
            WeightScheme::ContactDensity,
            &cfg4,
            HcsParams::default(),
            "m",
            BTreeMap::new(),
        )
        .unwrap();
        // Metadata records the scheme; compare the numeric content.
        for (a, b) in baseline.nodes.iter().zip(&contact.nodes) {
            assert_eq!(a, b);
        }
        assert_eq!(baseline.begin, contact.begin);
        // With unscaled pseudocounts the distributions shift, but the
        // per-column favorite residue cannot change.
        let contact_plain = build_scheme_model(
            &aln,
            WeightScheme::ContactDensity,
            &cfg,
            HcsParams::default(),
            "m",
            BTreeMap::new(),
        )
        .unwrap();
        for (a, b) in baseline.nodes.iter().zip(&contact_plain.nodes) {
            let argmax = |e: &[f64; 20]| {
                e.iter()
                    .enumerate()
                    .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
                    .unwrap()
                    .0
            };
            assert_eq!(argmax(&a.match_emission), argmax(&b.match_emission));
        }
    }

    #[test]
    fn sequence_order_does_not_change_the_model() {
        let fwd = parse_alignment(">a\nACDE\n>b\nAC-E\n>c\nGCDF\n").unwrap();
        let rev = parse_alignment(">c\nGCDF\n>b\nAC-E\n>a\nACDE\n").unwrap();
        let cfg = PseudocountConfig::default();
        let m1 = build_scheme_model(&fwd, WeightScheme::Baseline, &cfg, HcsParams::default(), "m", BTreeMap::new())
            .unwrap();
        let m2 = build_scheme_model(&rev, WeightScheme::Baseline, &cfg, HcsParams::default(), "m", BTreeMap::new())
            .unwrap();
        for (a, b) in m1.nodes.iter().zip(&m2.nodes) {
            for s in 0..20 {
                assert!((a.match_emission[s] - b.match_emission[s]).abs() < 1e-12);
            }
            for t in 0..7 {
                assert!((a.transitions[t] - b.transitions[t]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn no_match_columns_is_an_error() {
        let aln = parse_alignment(">a\nA--\n>b\n-C-\n>c\n--D\n").unwrap();
        let w = uniform_weights(&aln);
        let cfg = PseudocountConfig::default();
        assert_eq!(
            build_model(&aln, &w, &cfg, "m", BTreeMap::new()).unwrap_err(),
            BuildError::NoMatchColumns
        );
    }

    #[test]
    fn model_text_round_trips_exactly() {
        let aln = toy_alignment();
        let cfg = PseudocountConfig::default();
        let mut metadata = BTreeMap::new();
        metadata.insert("seed".to_string(), "42".to_string());
        let mut model =
            build_scheme_model(&aln, WeightScheme::Baseline, &cfg, HcsParams::default(), "toy", metadata)
                .unwrap();
        model.calibration = Some(GumbelParams {
            mu: -3.25,
            lambda: 0.693,
            n_samples: 500,
        });
        let text = model_to_string(&model);
        let back = model_from_str(&text).unwrap();
        assert_eq!(model, back);
        assert_eq!(model_to_string(&back), text);
    }

    #[test]
    fn model_io_detects_corruption() {
        let aln = toy_alignment();
        let cfg = PseudocountConfig::default();
        let model =
            build_model(&aln, &uniform_weights(&aln), &cfg, "toy", BTreeMap::new()).unwrap();
        let text = model_to_string(&model);

        let flipped = text.replacen("begin", "begin ", 1);
        assert!(matches!(
            model_from_str(&flipped),
            Err(ModelIoError::ChecksumMismatch)
        ));

        let wrong_version = text.replacen("PHMMW 1", "PHMMW 9", 1);
        // Redo the checksum so the version check itself is exercised.
        let body_end = wrong_version.rfind("CHECKSUM ").unwrap();
        let body = &wrong_version[..body_end];
        let rehashed = format!(
            "{body}CHECKSUM {}\n",
            hex_digest(&Sha256::digest(body.as_bytes()))
        );
        assert!(matches!(
            model_from_str(&rehashed),
            Err(ModelIoError::UnsupportedVersion { .. })
        ));

        let truncated: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            model_from_str(&truncated),
            Err(ModelIoError::MalformedModel { .. })
        ));
    }

    #[test]
    fn save_and_load_through_the_filesystem() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.phmmw");
        let aln = toy_alignment();
        let cfg = PseudocountConfig::default();
        let model =
            build_model(&aln, &uniform_weights(&aln), &cfg, "toy", BTreeMap::new()).unwrap();
        save_model(&model, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);
    }

    #[test]
    fn scheme_tags_round_trip() {
        for scheme in WeightScheme::ALL {
            assert_eq!(WeightScheme::from_tag(scheme.tag()), Some(scheme));
        }
        assert_eq!(WeightScheme::from_tag("zz"), None);
    }

    #[test]
    fn transition_counts_require_at_least_one_match_column() {
        let aln = parse_alignment(">a\nAC\n>b\nAC\n").unwrap();
        let weights = WeightMatrix::filled(WeightTag::Combined, 2, 2, 1.0);
        assert_eq!(
            weighted_transition_counts(&aln, &weights, &[]),
            Err(BuildError::NoMatchColumns)
        );
    }
}

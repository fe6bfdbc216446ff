//! Benchmark protocol: leave-one-family-out cross-validation over
//! superfamily datasets.
//!
//! Each superfamily contributes one split per family: a model is
//! trained on the remaining families, the held-out family's sequences
//! are the positives, and unrelated sequences pooled from the other
//! superfamilies are the negatives. Every weighting scheme is evaluated
//! on the same splits, E-values are swept over a fixed threshold
//! ladder, and ROC/PR curves, AUCs, and paired t-tests against the
//! baseline scheme land in three deterministic CSV reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::plan7::{build_scheme_model, BuildError, PseudocountConfig, WeightScheme};
use crate::scorer::{calibrate, evalue, ScoreError, Scorer};
use crate::seqdata::{
    parse_alignment, parse_annotations, AlignedSequence, AminoAcid, AnnotatedAlignment,
    SeqDataError,
};
use crate::stats::student_t_two_tailed;
use crate::structweights::HcsParams;

/// Errors raised by the benchmark harness.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error("ineligible-dataset: superfamily `{superfamily}` {reason}")]
    IneligibleDataset { superfamily: String, reason: String },
    #[error(
        "column-mismatch: superfamily `{superfamily}` family `{family}` has {got} columns, expected {expected}"
    )]
    ColumnMismatch {
        superfamily: String,
        family: String,
        expected: usize,
        got: usize,
    },
    #[error("empty-experiment: no datasets to evaluate")]
    EmptyExperiment,
    #[error("mismatched-pairs: {left} values against {right}")]
    MismatchedPairs { left: usize, right: usize },
    #[error("too-few-pairs: got {got}, need at least 2")]
    TooFewPairs { got: usize },
    #[error("zero-variance: differences have no spread, the test statistic is undefined")]
    ZeroVariance,
    #[error(transparent)]
    Data(#[from] SeqDataError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("io-error: {0}")]
    Io(#[from] std::io::Error),
}

/// One aligned, annotated family.
#[derive(Clone, PartialEq, Debug)]
pub struct FamilyData {
    pub id: String,
    pub alignment: AnnotatedAlignment,
}

/// A superfamily: its member families plus the pool of unrelated
/// sequences scored as negatives.
#[derive(Clone, PartialEq, Debug)]
pub struct SuperfamilyDataset {
    pub id: String,
    pub families: Vec<FamilyData>,
    pub negatives: Vec<(String, Vec<AminoAcid>)>,
}

impl SuperfamilyDataset {
    /// Total member sequences across families.
    pub fn n_sequences(&self) -> usize {
        self.families.iter().map(|f| f.alignment.n_sequences()).sum()
    }

    /// A dataset qualifies for cross-validation with at least three
    /// families and twenty member sequences.
    pub fn check_eligibility(&self) -> Result<(), EvalError> {
        if self.families.len() < 3 {
            return Err(EvalError::IneligibleDataset {
                superfamily: self.id.clone(),
                reason: format!("has {} families, needs 3", self.families.len()),
            });
        }
        let n = self.n_sequences();
        if n < 20 {
            return Err(EvalError::IneligibleDataset {
                superfamily: self.id.clone(),
                reason: format!("has {n} sequences, needs 20"),
            });
        }
        Ok(())
    }

    /// All families must share one column space so their rows can be
    /// pooled into one training alignment.
    pub fn check_columns(&self) -> Result<(), EvalError> {
        let Some(first) = self.families.first() else {
            return Ok(());
        };
        let expected = first.alignment.length();
        for fam in &self.families {
            let got = fam.alignment.length();
            if got != expected {
                return Err(EvalError::ColumnMismatch {
                    superfamily: self.id.clone(),
                    family: fam.id.clone(),
                    expected,
                    got,
                });
            }
        }
        Ok(())
    }
}

/// One cross-validation split: train on the kept families, test on the
/// held-out one.
#[derive(Clone, Debug)]
pub struct LofoSplit {
    pub superfamily: String,
    pub held_out_family: String,
    pub train: AnnotatedAlignment,
    pub positives: Vec<(String, Vec<AminoAcid>)>,
}

/// Pools family rows (with their annotations) into one alignment; row
/// ids are prefixed with the family id.
fn pool_families(parts: &[&FamilyData]) -> Result<AnnotatedAlignment, EvalError> {
    let mut rows = Vec::new();
    for fam in parts {
        for seq in fam.alignment.sequences() {
            rows.push(AlignedSequence {
                id: format!("{}:{}", fam.id, seq.id),
                cells: seq.cells.clone(),
            });
        }
    }
    let mut pooled = AnnotatedAlignment::new(rows)?;
    let mut row = 0usize;
    for fam in parts {
        for i in 0..fam.alignment.n_sequences() {
            for j in 0..fam.alignment.length() {
                let ann = fam.alignment.annotation(i, j);
                if !ann.is_empty() {
                    pooled.set_annotation(row, j, ann.clone())?;
                }
            }
            row += 1;
        }
    }
    Ok(pooled)
}

/// Builds every leave-one-family-out split of a dataset.
pub fn split_lofo(dataset: &SuperfamilyDataset) -> Result<Vec<LofoSplit>, EvalError> {
    dataset.check_columns()?;
    let mut splits = Vec::with_capacity(dataset.families.len());
    for (held, fam) in dataset.families.iter().enumerate() {
        let kept: Vec<&FamilyData> = dataset
            .families
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != held)
            .map(|(_, f)| f)
            .collect();
        let train = pool_families(&kept)?;
        let positives = fam
            .alignment
            .sequences()
            .iter()
            .map(|s| (format!("{}:{}", fam.id, s.id), s.ungapped()))
            .collect();
        splits.push(LofoSplit {
            superfamily: dataset.id.clone(),
            held_out_family: fam.id.clone(),
            train,
            positives,
        });
    }
    Ok(splits)
}

/// The 52 E-value acceptance thresholds, `1e-50` up to `1e+1`.
pub fn threshold_ladder() -> Vec<f64> {
    // Parsed rather than computed: powers of ten land exactly on the
    // decimal literals the reports print.
    (0..52)
        .map(|i| format!("1e{}", i - 50).parse().expect("decimal power of ten"))
        .collect()
}

/// Prediction outcome counts at one threshold.
#[derive(Clone, Copy, PartialEq, Debug, Default)]
pub struct ConfusionTable {
    pub tp: usize,
    pub fp: usize,
    pub fneg: usize,
    pub tneg: usize,
}

impl ConfusionTable {
    pub fn add(&mut self, other: &ConfusionTable) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fneg += other.fneg;
        self.tneg += other.tneg;
    }

    /// False positive rate; a split with no negatives contributes zero.
    pub fn fpr(&self) -> f64 {
        let denom = self.fp + self.tneg;
        if denom == 0 {
            0.0
        } else {
            self.fp as f64 / denom as f64
        }
    }

    /// True positive rate (recall); zero when there are no positives.
    pub fn tpr(&self) -> f64 {
        let denom = self.tp + self.fneg;
        if denom == 0 {
            0.0
        } else {
            self.tp as f64 / denom as f64
        }
    }

    /// Precision; an empty prediction set counts as perfectly precise.
    pub fn precision(&self) -> f64 {
        let denom = self.tp + self.fp;
        if denom == 0 {
            1.0
        } else {
            self.tp as f64 / denom as f64
        }
    }
}

/// Sweeps the threshold ladder over positive and negative E-values;
/// a sequence is called positive when its E-value is at or below the
/// threshold.
pub fn sweep(positives: &[f64], negatives: &[f64]) -> Vec<ConfusionTable> {
    threshold_ladder()
        .iter()
        .map(|&tau| {
            let tp = positives.iter().filter(|e| **e <= tau).count();
            let fp = negatives.iter().filter(|e| **e <= tau).count();
            ConfusionTable {
                tp,
                fp,
                fneg: positives.len() - tp,
                tneg: negatives.len() - fp,
            }
        })
        .collect()
}

/// Area under a curve given as (x, y) points: the points are anchored
/// at (0,0) and (1,1), sorted, deduplicated, and integrated by
/// trapezoids.
pub fn auc(points: &[(f64, f64)]) -> f64 {
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(points.len() + 2);
    pts.push((0.0, 0.0));
    pts.extend_from_slice(points);
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.partial_cmp(b).expect("curve points must be finite"));
    pts.dedup();
    let mut area = 0.0;
    for pair in pts.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        area += (x1 - x0) * (y0 + y1) / 2.0;
    }
    area
}

/// ROC points (false positive rate, true positive rate) along the
/// threshold ladder.
pub fn roc_points(tables: &[ConfusionTable]) -> Vec<(f64, f64)> {
    tables.iter().map(|t| (t.fpr(), t.tpr())).collect()
}

/// PR points (recall, precision) along the threshold ladder.
pub fn pr_points(tables: &[ConfusionTable]) -> Vec<(f64, f64)> {
    tables.iter().map(|t| (t.tpr(), t.precision())).collect()
}

/// ROC area for one set of confusion tables.
pub fn roc_auc(tables: &[ConfusionTable]) -> f64 {
    auc(&roc_points(tables))
}

/// Paired t-test result.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct PairedTTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t: f64,
    pub p: f64,
}

/// Two-tailed paired t-test of `a` against `b`.
///
/// Identical inputs (every difference exactly zero) report t = 0 and
/// p = 1; nonzero but constant differences have no defined statistic
/// and are an error.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::MismatchedPairs {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(EvalError::TooFewPairs { got: n });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().all(|d| *d == 0.0) {
        return Ok(PairedTTest {
            n,
            mean_diff: 0.0,
            t: 0.0,
            p: 1.0,
        });
    }
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let ss: f64 = diffs.iter().map(|d| (d - mean) * (d - mean)).sum();
    let sd = (ss / (nf - 1.0)).sqrt();
    if sd == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    let t = mean / (sd / nf.sqrt());
    let p = student_t_two_tailed(t, nf - 1.0);
    Ok(PairedTTest {
        n,
        mean_diff: mean,
        t,
        p,
    })
}

/// Experiment settings.
#[derive(Clone, Debug)]
pub struct EvalConfig {
    /// Master seed; every calibration derives its own stream from it.
    pub seed: u64,
    /// Null scores drawn per model calibration.
    pub calib_samples: usize,
    /// Database size for E-values; defaults to each split's test-set
    /// size.
    pub db_size: Option<f64>,
    pub pseudocounts: PseudocountConfig,
    pub hcs: HcsParams,
    /// Members that must pass before the library accepts: the library
    /// scheme ranks by the quorum-th smallest member E-value, so 1
    /// reproduces best-member ranking. Clamped to the member count.
    pub lib_quorum: usize,
    /// Worker threads across splits.
    pub jobs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            seed: 0,
            calib_samples: 500,
            db_size: None,
            pseudocounts: PseudocountConfig::default(),
            hcs: HcsParams::default(),
            lib_quorum: 1,
            jobs: 1,
        }
    }
}

impl EvalConfig {
    /// Digest over every setting that shapes the results; stamped into
    /// report headers.
    pub fn digest(&self) -> String {
        let mut text = String::new();
        let _ = write!(
            text,
            "seed={};calib={};db={:?};em={};alpha={};radius={};gap={};quorum={};jobs-independent",
            self.seed,
            self.calib_samples,
            self.db_size,
            self.pseudocounts.emission_strength,
            self.pseudocounts.transition_alpha,
            self.hcs.contact_radius,
            self.hcs.gap_weight,
            self.lib_quorum,
        );
        for b in &self.pseudocounts.background {
            let _ = write!(text, ",{b}");
        }
        let digest = Sha256::digest(text.as_bytes());
        let mut out = String::with_capacity(16);
        for b in digest.iter().take(8) {
            let _ = write!(out, "{b:02x}");
        }
        out
    }
}

/// Deterministic per-task seed: mixes the master seed with string
/// labels so results do not depend on scheduling order.
pub fn derive_seed(master: u64, labels: &[&str]) -> u64 {
    let mut h = master ^ 0x9e37_79b9_7f4a_7c15;
    for label in labels {
        for &b in label.as_bytes() {
            h = (h ^ b as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            h ^= h >> 27;
        }
        h = h.wrapping_add(0x94d0_49bb_1331_11eb);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Scheme labels in report order: the five model schemes plus the
/// combined library.
pub const SCHEME_LABELS: [&str; 6] = ["1d", "2d", "acc", "ooi", "3d", "lib"];

/// E-value a library presents for ranking: the quorum-th smallest
/// member E-value, so a sequence outranks another exactly when its
/// quorum-th best member does. Quorum is clamped to `1..=members`.
pub fn quorum_evalue(member_evalues: &[f64], quorum: usize) -> f64 {
    let mut sorted = member_evalues.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("e-values are finite"));
    sorted[quorum.clamp(1, sorted.len()) - 1]
}

struct SplitOutcome {
    /// Confusions per scheme label, in `SCHEME_LABELS` order.
    confusions: Vec<Vec<ConfusionTable>>,
    aucs: Vec<f64>,
}

fn evaluate_split(
    split: &LofoSplit,
    negatives: &[(String, Vec<AminoAcid>)],
    cfg: &EvalConfig,
) -> Result<SplitOutcome, EvalError> {
    let mut models = Vec::with_capacity(WeightScheme::ALL.len());
    for scheme in WeightScheme::ALL {
        let name = format!(
            "{}:{}:{}",
            split.superfamily,
            split.held_out_family,
            scheme.tag()
        );
        let mut model = build_scheme_model(
            &split.train,
            scheme,
            &cfg.pseudocounts,
            cfg.hcs,
            &name,
            BTreeMap::new(),
        )?;
        let seed = derive_seed(
            cfg.seed,
            &[&split.superfamily, &split.held_out_family, scheme.tag()],
        );
        calibrate(&mut model, cfg.calib_samples, seed)?;
        models.push(model);
    }
    let db = cfg
        .db_size
        .unwrap_or((split.positives.len() + negatives.len()) as f64);

    let score_set = |set: &[(String, Vec<AminoAcid>)]| -> Result<Vec<Vec<f64>>, EvalError> {
        let mut per_model = Vec::with_capacity(models.len());
        for model in &models {
            let params = model.calibration.expect("model calibrated above");
            let scorer = Scorer::new(model);
            let mut evalues = Vec::with_capacity(set.len());
            for (_, seq) in set {
                let bits = scorer.viterbi_bits(seq)?;
                evalues.push(evalue(&params, bits, db));
            }
            per_model.push(evalues);
        }
        Ok(per_model)
    };
    let pos = score_set(&split.positives)?;
    let neg = score_set(negatives)?;

    let library_rank = |per_model: &[Vec<f64>], idx: usize| -> f64 {
        let member: Vec<f64> = per_model.iter().map(|v| v[idx]).collect();
        quorum_evalue(&member, cfg.lib_quorum)
    };
    let lib_pos: Vec<f64> = (0..split.positives.len()).map(|i| library_rank(&pos, i)).collect();
    let lib_neg: Vec<f64> = (0..negatives.len()).map(|i| library_rank(&neg, i)).collect();

    let mut confusions = Vec::with_capacity(SCHEME_LABELS.len());
    let mut aucs = Vec::with_capacity(SCHEME_LABELS.len());
    for m in 0..models.len() {
        let tables = sweep(&pos[m], &neg[m]);
        aucs.push(roc_auc(&tables));
        confusions.push(tables);
    }
    let tables = sweep(&lib_pos, &lib_neg);
    aucs.push(roc_auc(&tables));
    confusions.push(tables);
    Ok(SplitOutcome { confusions, aucs })
}

/// Runs a fixed list of independent tasks on `jobs` workers, preserving
/// input order in the results.
fn run_tasks<T, R, F>(tasks: &[T], jobs: usize, work: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    if jobs <= 1 || tasks.len() <= 1 {
        return tasks.iter().map(&work).collect();
    }
    let slots: Vec<Mutex<Option<R>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(tasks.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= tasks.len() {
                    break;
                }
                let result = work(&tasks[i]);
                *slots[i].lock().expect("result slot poisoned") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("result slot poisoned").expect("task ran"))
        .collect()
}

/// Per-scheme results of a whole experiment.
#[derive(Clone, PartialEq, Debug)]
pub struct SchemeSummary {
    pub scheme: String,
    /// (superfamily, held-out family, AUC) per split, in split order.
    pub split_aucs: Vec<(String, String, f64)>,
    /// Mean AUC per superfamily, in superfamily order.
    pub superfamily_aucs: Vec<(String, f64)>,
    /// Mean over all splits.
    pub macro_auc: f64,
    /// AUC of the ROC built from summed confusion tables.
    pub pooled_auc: f64,
    pub pooled_roc: Vec<(f64, f64)>,
    pub pooled_pr: Vec<(f64, f64)>,
}

/// One scheme-versus-baseline significance row.
#[derive(Clone, PartialEq, Debug)]
pub struct TTestRow {
    pub scheme: String,
    pub baseline: String,
    pub test: PairedTTest,
}

/// Everything the report files are written from.
#[derive(Clone, PartialEq, Debug)]
pub struct EvalReport {
    pub version: String,
    pub config_digest: String,
    pub seed: u64,
    pub schemes: Vec<SchemeSummary>,
    pub ttests: Vec<TTestRow>,
}

/// Runs the full cross-validated comparison over every dataset.
pub fn run_experiment(
    datasets: &[SuperfamilyDataset],
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    if datasets.is_empty() {
        return Err(EvalError::EmptyExperiment);
    }
    let mut order: Vec<usize> = (0..datasets.len()).collect();
    order.sort_by(|&a, &b| datasets[a].id.cmp(&datasets[b].id));
    let mut splits: Vec<(usize, LofoSplit)> = Vec::new();
    for &ds_index in &order {
        let ds = &datasets[ds_index];
        ds.check_eligibility()?;
        for split in split_lofo(ds)? {
            splits.push((ds_index, split));
        }
    }

    let outcomes = run_tasks(&splits, cfg.jobs, |(ds_index, split)| {
        evaluate_split(split, &datasets[*ds_index].negatives, cfg)
    });
    let mut results: Vec<SplitOutcome> = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        results.push(outcome?);
    }

    let superfamilies: Vec<String> = order.iter().map(|&i| datasets[i].id.clone()).collect();
    let mut schemes = Vec::with_capacity(SCHEME_LABELS.len());
    for (s, label) in SCHEME_LABELS.iter().enumerate() {
        let split_aucs: Vec<(String, String, f64)> = splits
            .iter()
            .zip(&results)
            .map(|((_, split), outcome)| {
                (
                    split.superfamily.clone(),
                    split.held_out_family.clone(),
                    outcome.aucs[s],
                )
            })
            .collect();
        let superfamily_aucs: Vec<(String, f64)> = superfamilies
            .iter()
            .map(|sf| {
                let values: Vec<f64> = split_aucs
                    .iter()
                    .filter(|(id, _, _)| id == sf)
                    .map(|(_, _, a)| *a)
                    .collect();
                (sf.clone(), values.iter().sum::<f64>() / values.len() as f64)
            })
            .collect();
        let macro_auc =
            split_aucs.iter().map(|(_, _, a)| *a).sum::<f64>() / split_aucs.len() as f64;
        let mut pooled = vec![ConfusionTable::default(); threshold_ladder().len()];
        for outcome in &results {
            for (slot, table) in pooled.iter_mut().zip(&outcome.confusions[s]) {
                slot.add(table);
            }
        }
        schemes.push(SchemeSummary {
            scheme: label.to_string(),
            split_aucs,
            superfamily_aucs,
            macro_auc,
            pooled_auc: roc_auc(&pooled),
            pooled_roc: roc_points(&pooled),
            pooled_pr: pr_points(&pooled),
        });
    }

    let baseline: Vec<f64> = schemes[0].superfamily_aucs.iter().map(|(_, a)| *a).collect();
    let mut ttests = Vec::new();
    for summary in schemes.iter().skip(1) {
        let values: Vec<f64> = summary.superfamily_aucs.iter().map(|(_, a)| *a).collect();
        let test = match paired_t_test(&values, &baseline) {
            Ok(test) => test,
            // Constant nonzero differences: report the limit of a
            // vanishing spread rather than aborting the experiment.
            Err(EvalError::ZeroVariance) => {
                let mean = values
                    .iter()
                    .zip(&baseline)
                    .map(|(x, y)| x - y)
                    .sum::<f64>()
                    / values.len() as f64;
                PairedTTest {
                    n: values.len(),
                    mean_diff: mean,
                    t: if mean > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY },
                    p: 0.0,
                }
            }
            Err(e) => return Err(e),
        };
        ttests.push(TTestRow {
            scheme: summary.scheme.clone(),
            baseline: SCHEME_LABELS[0].to_string(),
            test,
        });
    }

    Ok(EvalReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_digest: cfg.digest(),
        seed: cfg.seed,
        schemes,
        ttests,
    })
}

fn header(report: &EvalReport) -> String {
    format!(
        "# phmmw {}\n# config {}\n# seed {}\n",
        report.version, report.config_digest, report.seed
    )
}

/// Renders the pooled curve file: one row per scheme, curve kind, and
/// threshold.
pub fn curves_csv(report: &EvalReport) -> String {
    let ladder = threshold_ladder();
    let mut out = header(report);
    out.push_str("curve,scheme,threshold,x,y\n");
    for summary in &report.schemes {
        for (tau, (x, y)) in ladder.iter().zip(&summary.pooled_roc) {
            let _ = writeln!(out, "roc,{},{tau:e},{x},{y}", summary.scheme);
        }
        for (tau, (x, y)) in ladder.iter().zip(&summary.pooled_pr) {
            let _ = writeln!(out, "pr,{},{tau:e},{x},{y}", summary.scheme);
        }
    }
    out
}

/// Renders the AUC file: per-split, per-superfamily, macro, and pooled
/// rows per scheme.
pub fn auc_csv(report: &EvalReport) -> String {
    let mut out = header(report);
    out.push_str("scheme,level,superfamily,family,auc\n");
    for summary in &report.schemes {
        for (sf, fam, value) in &summary.split_aucs {
            let _ = writeln!(out, "{},split,{sf},{fam},{value}", summary.scheme);
        }
        for (sf, value) in &summary.superfamily_aucs {
            let _ = writeln!(out, "{},superfamily,{sf},-,{value}", summary.scheme);
        }
        let _ = writeln!(out, "{},macro,-,-,{}", summary.scheme, summary.macro_auc);
        let _ = writeln!(out, "{},pooled,-,-,{}", summary.scheme, summary.pooled_auc);
    }
    out
}

/// Renders the significance file: one row per scheme compared against
/// the baseline.
pub fn ttest_csv(report: &EvalReport) -> String {
    let mut out = header(report);
    out.push_str("scheme,baseline,n,mean_diff,t,p\n");
    for row in &report.ttests {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.scheme, row.baseline, row.test.n, row.test.mean_diff, row.test.t, row.test.p
        );
    }
    out
}

/// Writes `curves.csv`, `auc.csv`, and `ttest.csv` into `dir`.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<(), EvalError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("curves.csv"), curves_csv(report))?;
    std::fs::write(dir.join("auc.csv"), auc_csv(report))?;
    std::fs::write(dir.join("ttest.csv"), ttest_csv(report))?;
    Ok(())
}

/// Loads a dataset directory: one subdirectory per superfamily, one
/// per family inside it, holding `aln.fasta` and optionally `ann.tsv`.
/// Negatives are cross-filled from the other superfamilies' members.
pub fn load_dataset_dir(dir: &Path) -> Result<Vec<SuperfamilyDataset>, EvalError> {
    let sorted_subdirs = |path: &Path| -> Result<Vec<std::path::PathBuf>, EvalError> {
        let mut subdirs = Vec::new();
        for entry in std::fs::read_dir(path)? {
            let entry = entry?;
            if entry.file_type()?.is_dir() {
                subdirs.push(entry.path());
            }
        }
        subdirs.sort();
        Ok(subdirs)
    };
    let mut loaded: Vec<(String, Vec<FamilyData>)> = Vec::new();
    for sf_dir in sorted_subdirs(dir)? {
        let sf_id = sf_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut families = Vec::new();
        for fam_dir in sorted_subdirs(&sf_dir)? {
            let fam_id = fam_dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let fasta = std::fs::read_to_string(fam_dir.join("aln.fasta"))?;
            let mut alignment = parse_alignment(&fasta)?;
            let ann_path = fam_dir.join("ann.tsv");
            if ann_path.exists() {
                let tsv = std::fs::read_to_string(ann_path)?;
                alignment = parse_annotations(alignment, &tsv)?;
            }
            families.push(FamilyData {
                id: fam_id,
                alignment,
            });
        }
        loaded.push((sf_id, families));
    }
    let mut datasets = Vec::with_capacity(loaded.len());
    for (i, (id, families)) in loaded.iter().enumerate() {
        let mut negatives = Vec::new();
        for (j, (other_id, other_families)) in loaded.iter().enumerate() {
            if i == j {
                continue;
            }
            for fam in other_families {
                for seq in fam.alignment.sequences() {
                    negatives.push((
                        format!("{other_id}/{}/{}", fam.id, seq.id),
                        seq.ungapped(),
                    ));
                }
            }
        }
        let ds = SuperfamilyDataset {
            id: id.clone(),
            families: families.clone(),
            negatives,
        };
        ds.check_columns()?;
        datasets.push(ds);
    }
    Ok(datasets)
}

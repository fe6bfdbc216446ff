//! Scoring sequences against a model.
//!
//! Viterbi and Forward run the global Plan7 recurrence in natural-log
//! space and report log-odds against the model's null in bits. Score
//! distributions under the null are summarized by a maximum-likelihood
//! Gumbel fit, which turns bit scores into E-values; a model library
//! combines per-model E-values under a best-hit or voting policy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::plan7::{
    Plan7Model, TRANS_DD, TRANS_DM, TRANS_II, TRANS_IM, TRANS_MD, TRANS_MI, TRANS_MM,
};
use crate::seqdata::AminoAcid;

/// Errors raised while scoring or calibrating.
#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("empty-sequence: nothing to score")]
    EmptySequence,
    #[error("not-calibrated: model `{model}` has no extreme-value parameters")]
    NotCalibrated { model: String },
    #[error("non-convergence: {context}")]
    NonConvergence { context: String },
    #[error("too-few-samples: got {got}, need at least {min}")]
    TooFewSamples { got: usize, min: usize },
    #[error("empty-library: no models to score against")]
    EmptyLibrary,
}

/// Gumbel (extreme-value) parameters fitted to null scores.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct GumbelParams {
    pub mu: f64,
    pub lambda: f64,
    pub n_samples: usize,
}

/// One state of a global alignment path. `Insert(0)` is the entry
/// block's insert state.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AlignState {
    Begin,
    Match(usize),
    Insert(usize),
    Delete(usize),
    End,
}

const LN2: f64 = std::f64::consts::LN_2;
const NEG_INF: f64 = f64::NEG_INFINITY;

/// Natural logs of a model's parameters, shaped for the recurrence.
struct LogModel {
    k: usize,
    begin_match: f64,
    begin_insert: f64,
    begin_delete: f64,
    i0_match: f64,
    i0_loop: f64,
    i0_emit: [f64; 20],
    match_emit: Vec<[f64; 20]>,
    insert_emit: Vec<[f64; 20]>,
    trans: Vec<[f64; 7]>,
}

fn ln_table(p: &[f64; 20]) -> [f64; 20] {
    let mut out = [0.0; 20];
    for s in 0..20 {
        out[s] = p[s].ln();
    }
    out
}

impl LogModel {
    fn new(model: &Plan7Model) -> LogModel {
        LogModel {
            k: model.k(),
            begin_match: model.begin.to_match.ln(),
            begin_insert: model.begin.to_insert.ln(),
            begin_delete: model.begin.to_delete.ln(),
            i0_match: model.begin.insert_to_match.ln(),
            i0_loop: model.begin.insert_loop.ln(),
            i0_emit: ln_table(&model.begin.insert_emission),
            match_emit: model.nodes.iter().map(|n| ln_table(&n.match_emission)).collect(),
            insert_emit: model.nodes.iter().map(|n| ln_table(&n.insert_emission)).collect(),
            trans: model
                .nodes
                .iter()
                .map(|n| {
                    let mut t = [0.0; 7];
                    for s in 0..7 {
                        t[s] = n.transitions[s].ln();
                    }
                    t
                })
                .collect(),
        }
    }

    /// Log emission; unknown residues contribute nothing (the null does
    /// the same, so the log-odds term cancels).
    fn emit(table: &[f64; 20], aa: AminoAcid) -> f64 {
        match aa.index() {
            Some(s) => table[s],
            None => 0.0,
        }
    }
}

/// First-wins maximum: ties keep the earlier candidate, which encodes
/// the match-over-delete-over-insert preference wherever candidates are
/// listed in that order.
fn best(cands: &[f64]) -> f64 {
    let mut out = cands[0];
    for &c in &cands[1..] {
        if c > out {
            out = c;
        }
    }
    out
}

fn logsumexp(cands: &[f64]) -> f64 {
    let m = best(cands);
    if m == NEG_INF {
        return NEG_INF;
    }
    let sum: f64 = cands.iter().map(|c| (c - m).exp()).sum();
    m + sum.ln()
}

/// Full DP tables, kept for traceback.
struct Tables {
    /// match[t][k], k in 1..=K (index 0 unused).
    m: Vec<Vec<f64>>,
    /// insert[t][k], k in 0..=K.
    i: Vec<Vec<f64>>,
    /// delete[t][k], k in 1..=K (index 0 unused).
    d: Vec<Vec<f64>>,
    /// Log-probability of the complete best (or summed) alignment.
    total: f64,
}

fn run_dp(log: &LogModel, seq: &[AminoAcid], reduce: fn(&[f64]) -> f64) -> Tables {
    let k_total = log.k;
    let n = seq.len();
    let mut m = vec![vec![NEG_INF; k_total + 1]; n + 1];
    let mut i = vec![vec![NEG_INF; k_total + 1]; n + 1];
    let mut d = vec![vec![NEG_INF; k_total + 1]; n + 1];

    // t = 0: only B and the delete chain are reachable.
    d[0][1] = log.begin_delete;
    for k in 2..=k_total {
        d[0][k] = d[0][k - 1] + log.trans[k - 2][TRANS_DD];
    }

    for t in 1..=n {
        let x = seq[t - 1];
        let at_start = t == 1;
        i[t][0] = LogModel::emit(&log.i0_emit, x)
            + reduce(&[
                if at_start { log.begin_insert } else { NEG_INF },
                i[t - 1][0] + log.i0_loop,
            ]);
        for k in 1..=k_total {
            let entry = if k == 1 {
                reduce(&[
                    if at_start { log.begin_match } else { NEG_INF },
                    i[t - 1][0] + log.i0_match,
                ])
            } else {
                reduce(&[
                    m[t - 1][k - 1] + log.trans[k - 2][TRANS_MM],
                    d[t - 1][k - 1] + log.trans[k - 2][TRANS_DM],
                    i[t - 1][k - 1] + log.trans[k - 2][TRANS_IM],
                ])
            };
            m[t][k] = LogModel::emit(&log.match_emit[k - 1], x) + entry;
            i[t][k] = LogModel::emit(&log.insert_emit[k - 1], x)
                + reduce(&[
                    m[t - 1][k] + log.trans[k - 1][TRANS_MI],
                    i[t - 1][k] + log.trans[k - 1][TRANS_II],
                ]);
        }
        for k in 2..=k_total {
            d[t][k] = reduce(&[
                m[t][k - 1] + log.trans[k - 2][TRANS_MD],
                d[t][k - 1] + log.trans[k - 2][TRANS_DD],
            ]);
        }
    }

    let total = reduce(&[
        m[n][k_total] + log.trans[k_total - 1][TRANS_MM],
        d[n][k_total] + log.trans[k_total - 1][TRANS_DM],
        i[n][k_total] + log.trans[k_total - 1][TRANS_IM],
    ]);
    Tables { m, i, d, total }
}

/// A model prepared for repeated scoring.
pub struct Scorer<'m> {
    model: &'m Plan7Model,
    log: LogModel,
}

impl<'m> Scorer<'m> {
    pub fn new(model: &'m Plan7Model) -> Scorer<'m> {
        Scorer {
            model,
            log: LogModel::new(model),
        }
    }

    fn check(&self, seq: &[AminoAcid]) -> Result<(), ScoreError> {
        if seq.is_empty() {
            return Err(ScoreError::EmptySequence);
        }
        Ok(())
    }

    fn to_bits(&self, ln_score: f64, seq: &[AminoAcid]) -> f64 {
        (ln_score - self.model.null.ln_prob(seq)) / LN2
    }

    /// Best global alignment log-odds score, in bits.
    pub fn viterbi_bits(&self, seq: &[AminoAcid]) -> Result<f64, ScoreError> {
        self.check(seq)?;
        let tables = run_dp(&self.log, seq, best);
        Ok(self.to_bits(tables.total, seq))
    }

    /// Total (summed over alignments) log-odds score, in bits.
    pub fn forward_bits(&self, seq: &[AminoAcid]) -> Result<f64, ScoreError> {
        self.check(seq)?;
        let tables = run_dp(&self.log, seq, logsumexp);
        Ok(self.to_bits(tables.total, seq))
    }

    /// Best alignment and its score. Ties prefer match over delete over
    /// insert, making the path reproducible.
    pub fn viterbi_alignment(
        &self,
        seq: &[AminoAcid],
    ) -> Result<(f64, Vec<AlignState>), ScoreError> {
        self.check(seq)?;
        let tables = run_dp(&self.log, seq, best);
        let path = self.traceback(&tables, seq);
        Ok((self.to_bits(tables.total, seq), path))
    }

    fn traceback(&self, tables: &Tables, seq: &[AminoAcid]) -> Vec<AlignState> {
        let log = &self.log;
        let k_total = log.k;
        let n = seq.len();
        let pick = |cands: &[(AlignState, f64)]| -> AlignState {
            let mut out = cands[0];
            for &c in &cands[1..] {
                if c.1 > out.1 {
                    out = c;
                }
            }
            out.0
        };
        let mut state = pick(&[
            (AlignState::Match(k_total), tables.m[n][k_total] + log.trans[k_total - 1][TRANS_MM]),
            (AlignState::Delete(k_total), tables.d[n][k_total] + log.trans[k_total - 1][TRANS_DM]),
            (AlignState::Insert(k_total), tables.i[n][k_total] + log.trans[k_total - 1][TRANS_IM]),
        ]);
        let mut t = n;
        let mut rev = vec![AlignState::End];
        loop {
            rev.push(state);
            state = match state {
                AlignState::Match(k) => {
                    let t_prev = t - 1;
                    t = t_prev;
                    if k == 1 {
                        pick(&[
                            (
                                AlignState::Begin,
                                if t_prev == 0 { log.begin_match } else { NEG_INF },
                            ),
                            (AlignState::Insert(0), tables.i[t_prev][0] + log.i0_match),
                        ])
                    } else {
                        pick(&[
                            (
                                AlignState::Match(k - 1),
                                tables.m[t_prev][k - 1] + log.trans[k - 2][TRANS_MM],
                            ),
                            (
                                AlignState::Delete(k - 1),
                                tables.d[t_prev][k - 1] + log.trans[k - 2][TRANS_DM],
                            ),
                            (
                                AlignState::Insert(k - 1),
                                tables.i[t_prev][k - 1] + log.trans[k - 2][TRANS_IM],
                            ),
                        ])
                    }
                }
                AlignState::Insert(0) => {
                    let t_prev = t - 1;
                    t = t_prev;
                    pick(&[
                        (
                            AlignState::Begin,
                            if t_prev == 0 { log.begin_insert } else { NEG_INF },
                        ),
                        (AlignState::Insert(0), tables.i[t_prev][0] + log.i0_loop),
                    ])
                }
                AlignState::Insert(k) => {
                    let t_prev = t - 1;
                    t = t_prev;
                    pick(&[
                        (
                            AlignState::Match(k),
                            tables.m[t_prev][k] + log.trans[k - 1][TRANS_MI],
                        ),
                        (
                            AlignState::Insert(k),
                            tables.i[t_prev][k] + log.trans[k - 1][TRANS_II],
                        ),
                    ])
                }
                AlignState::Delete(k) => {
                    if k == 1 {
                        AlignState::Begin
                    } else {
                        pick(&[
                            (
                                AlignState::Match(k - 1),
                                tables.m[t][k - 1] + log.trans[k - 2][TRANS_MD],
                            ),
                            (
                                AlignState::Delete(k - 1),
                                tables.d[t][k - 1] + log.trans[k - 2][TRANS_DD],
                            ),
                        ])
                    }
                }
                AlignState::Begin | AlignState::End => unreachable!("traceback past begin"),
            };
            if state == AlignState::Begin {
                rev.push(AlignState::Begin);
                break;
            }
        }
        rev.reverse();
        rev
    }
}

/// Best global alignment score in bits.
pub fn viterbi(model: &Plan7Model, seq: &[AminoAcid]) -> Result<f64, ScoreError> {
    Scorer::new(model).viterbi_bits(seq)
}

/// Summed global alignment score in bits.
pub fn forward(model: &Plan7Model, seq: &[AminoAcid]) -> Result<f64, ScoreError> {
    Scorer::new(model).forward_bits(seq)
}

/// Maximum-likelihood Gumbel fit.
///
/// Newton iteration on the scale parameter starting from the
/// moment-matched value `pi / sqrt(6 var)`; converged when the step
/// drops below 1e-9. Location follows in closed form. Exponentials are
/// anchored at the sample minimum so large scores cannot overflow.
pub fn fit_gumbel(samples: &[f64]) -> Result<GumbelParams, ScoreError> {
    let n = samples.len();
    if n < 2 {
        return Err(ScoreError::TooFewSamples { got: n, min: 2 });
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / nf;
    if !(var.is_finite() && var > 1e-30) {
        return Err(ScoreError::NonConvergence {
            context: "score variance is zero".to_string(),
        });
    }
    let anchor = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let mut lambda = std::f64::consts::PI / (6.0 * var).sqrt();
    let mut converged = false;
    for _ in 0..200 {
        let mut esum = 0.0;
        let mut xesum = 0.0;
        let mut xxesum = 0.0;
        for &x in samples {
            let e = (-lambda * (x - anchor)).exp();
            esum += e;
            xesum += x * e;
            xxesum += x * x * e;
        }
        let ratio = xesum / esum;
        let f = 1.0 / lambda - mean + ratio;
        let df = ratio * ratio - xxesum / esum - 1.0 / (lambda * lambda);
        let mut next = lambda - f / df;
        if !(next.is_finite() && next > 0.0) {
            next = lambda / 2.0;
        }
        let step = (next - lambda).abs();
        lambda = next;
        if step < 1e-9 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(ScoreError::NonConvergence {
            context: "scale parameter did not settle in 200 steps".to_string(),
        });
    }
    let esum: f64 = samples.iter().map(|x| (-lambda * (x - anchor)).exp()).sum();
    let mu = anchor - (esum / nf).ln() / lambda;
    Ok(GumbelParams {
        mu,
        lambda,
        n_samples: n,
    })
}

/// Draws scores of null-sampled sequences against the model. Lengths
/// are uniform over roughly 0.8 to 1.2 times the model length; residues
/// follow the null background.
pub fn sample_null_scores(
    model: &Plan7Model,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>, ScoreError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = model.k() as f64;
    let lo = ((0.8 * k).floor() as usize).max(1);
    let hi = ((1.2 * k).ceil() as usize).max(lo);
    let mut cumulative = [0.0f64; 20];
    let mut acc = 0.0;
    for s in 0..20 {
        acc += model.null.background[s];
        cumulative[s] = acc;
    }
    let scorer = Scorer::new(model);
    let mut scores = Vec::with_capacity(n);
    let mut seq = Vec::new();
    for _ in 0..n {
        let len = rng.random_range(lo..=hi);
        seq.clear();
        for _ in 0..len {
            let r: f64 = rng.random();
            let s = cumulative.iter().position(|&c| r < c).unwrap_or(19);
            seq.push(AminoAcid::canonical(s));
        }
        scores.push(scorer.viterbi_bits(&seq)?);
    }
    Ok(scores)
}

/// Calibrates a model in place: fits a Gumbel to `n` null scores and
/// stores the parameters on the model.
pub fn calibrate(model: &mut Plan7Model, n: usize, seed: u64) -> Result<GumbelParams, ScoreError> {
    if n < 100 {
        return Err(ScoreError::TooFewSamples { got: n, min: 100 });
    }
    let scores = sample_null_scores(model, n, seed)?;
    let params = fit_gumbel(&scores)?;
    model.calibration = Some(params);
    Ok(params)
}

/// Expected count of null sequences scoring at least `bits` in a
/// database of `db_size` sequences.
pub fn evalue(params: &GumbelParams, bits: f64, db_size: f64) -> f64 {
    let x = params.lambda * (bits - params.mu);
    let tail = -(-(-x).exp()).exp_m1();
    db_size * tail
}

/// One model's score against one sequence.
#[derive(Clone, PartialEq, Debug)]
pub struct Hit {
    pub seq_id: String,
    pub model: String,
    pub bits: f64,
    pub evalue: f64,
}

/// How a library turns member E-values into one verdict.
#[derive(Clone, Copy, PartialEq, Debug)]
pub enum LibraryPolicy {
    /// Accept when the best member E-value passes the threshold.
    BestEvalue { threshold: f64 },
    /// Accept when at least `quorum` members pass the threshold.
    Vote { threshold: f64, quorum: usize },
}

/// A set of calibrated models scored together.
#[derive(Clone, PartialEq, Debug)]
pub struct ModelLibrary {
    pub members: Vec<Plan7Model>,
    pub policy: LibraryPolicy,
}

/// Library outcome for one sequence.
#[derive(Clone, PartialEq, Debug)]
pub struct LibraryVerdict {
    pub hits: Vec<Hit>,
    /// Smallest member E-value.
    pub combined_evalue: f64,
    /// Members passing the policy threshold.
    pub votes: usize,
    pub accepted: bool,
}

/// Combines member E-values under a policy; returns the smallest
/// E-value, the passing-member count, and the verdict.
pub fn combine_evalues(policy: LibraryPolicy, evalues: &[f64]) -> (f64, usize, bool) {
    let combined = evalues.iter().copied().fold(f64::INFINITY, f64::min);
    match policy {
        LibraryPolicy::BestEvalue { threshold } => {
            let votes = evalues.iter().filter(|e| **e <= threshold).count();
            (combined, votes, combined <= threshold)
        }
        LibraryPolicy::Vote { threshold, quorum } => {
            let votes = evalues.iter().filter(|e| **e <= threshold).count();
            (combined, votes, votes >= quorum)
        }
    }
}

/// Scores a sequence against every member and applies the policy.
pub fn score_library(
    library: &ModelLibrary,
    seq_id: &str,
    seq: &[AminoAcid],
    db_size: f64,
) -> Result<LibraryVerdict, ScoreError> {
    if library.members.is_empty() {
        return Err(ScoreError::EmptyLibrary);
    }
    let mut hits = Vec::with_capacity(library.members.len());
    for model in &library.members {
        let params = model.calibration.as_ref().ok_or_else(|| ScoreError::NotCalibrated {
            model: model.name.clone(),
        })?;
        let bits = viterbi(model, seq)?;
        hits.push(Hit {
            seq_id: seq_id.to_string(),
            model: model.name.clone(),
            bits,
            evalue: evalue(params, bits, db_size),
        });
    }
    let evalues: Vec<f64> = hits.iter().map(|h| h.evalue).collect();
    let (combined_evalue, votes, accepted) = combine_evalues(library.policy, &evalues);
    Ok(LibraryVerdict {
        hits,
        combined_evalue,
        votes,
        accepted,
    })
}

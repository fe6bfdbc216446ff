//! Structural weight matrices.
//!
//! Four schemes translate per-residue structural annotations into
//! multiplicative training weights:
//!
//! * secondary structure: loop 1, helix 2, sheet 4;
//! * solvent accessibility: inaccessible (buried) 3, accessible 1;
//! * contact density: the residue's neighbor count within a radius,
//!   floored at 1;
//! * core-structure proximity: residues whose column stays spatially
//!   tight across homologs are pushed toward the sequence's maximal
//!   contact count, dispersed columns fall off inversely with distance.
//!
//! Gap cells always carry the neutral gap weight so combined matrices
//! stay strictly positive.

use thiserror::Error;

use crate::seqdata::{AnnotatedAlignment, SecondaryStructure};
use crate::seqweights::{WeightError, WeightMatrix, WeightTag};

pub const SS_LOOP_WEIGHT: f64 = 1.0;
pub const SS_HELIX_WEIGHT: f64 = 2.0;
pub const SS_SHEET_WEIGHT: f64 = 4.0;
pub const INACCESSIBLE_WEIGHT: f64 = 3.0;
pub const ACCESSIBLE_WEIGHT: f64 = 1.0;
/// Contact radius in angstroms; neighbors at exactly this distance count.
pub const DEFAULT_CONTACT_RADIUS: f64 = 14.0;

/// Errors raised while deriving structural weights.
#[derive(Debug, Error, PartialEq)]
pub enum StructWeightError {
    #[error("missing-annotation: sequence `{id}`, column {column}: no {field}")]
    MissingAnnotation {
        id: String,
        column: usize,
        field: &'static str,
    },
    #[error("dimension-mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("degenerate-alignment: no column holds two residues with coordinates")]
    DegenerateAlignment,
    #[error("tag-mismatch: cannot combine {left:?} with {right:?}")]
    TagMismatch { left: WeightTag, right: WeightTag },
    #[error("invalid-params: {context}")]
    InvalidParams { context: String },
    #[error(transparent)]
    Weight(#[from] WeightError),
}

/// Parameters of the coordinate-driven schemes.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct HcsParams {
    /// Neighbor radius for contact counts, angstroms; must be positive.
    pub contact_radius: f64,
    /// Weight stored on gap cells and on residues alone in their column.
    pub gap_weight: f64,
}

impl Default for HcsParams {
    fn default() -> Self {
        HcsParams {
            contact_radius: DEFAULT_CONTACT_RADIUS,
            gap_weight: WeightMatrix::GAP_WEIGHT,
        }
    }
}

impl HcsParams {
    fn validate(&self) -> Result<(), StructWeightError> {
        if !(self.contact_radius.is_finite() && self.contact_radius > 0.0) {
            return Err(StructWeightError::InvalidParams {
                context: format!("contact radius {} must be positive", self.contact_radius),
            });
        }
        if !(self.gap_weight.is_finite() && self.gap_weight > 0.0) {
            return Err(StructWeightError::InvalidParams {
                context: format!("gap weight {} must be positive", self.gap_weight),
            });
        }
        Ok(())
    }
}

/// Euclidean distance between two C-alpha positions.
pub fn euclid(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn missing(
    aln: &AnnotatedAlignment,
    seq: usize,
    column: usize,
    field: &'static str,
) -> StructWeightError {
    StructWeightError::MissingAnnotation {
        id: aln.sequences()[seq].id.clone(),
        column,
        field,
    }
}

/// Secondary-structure weights: loop 1, helix 2, sheet 4.
pub fn ss_weights(
    aln: &AnnotatedAlignment,
    gap_weight: f64,
) -> Result<WeightMatrix, StructWeightError> {
    let (n, l) = (aln.n_sequences(), aln.length());
    let mut values = Vec::with_capacity(n * l);
    for i in 0..n {
        for j in 0..l {
            if aln.cell(i, j).is_residue() {
                let ss = aln
                    .annotation(i, j)
                    .ss
                    .ok_or_else(|| missing(aln, i, j, "secondary structure"))?;
                values.push(match ss {
                    SecondaryStructure::Loop => SS_LOOP_WEIGHT,
                    SecondaryStructure::Helix => SS_HELIX_WEIGHT,
                    SecondaryStructure::Sheet => SS_SHEET_WEIGHT,
                });
            } else {
                values.push(gap_weight);
            }
        }
    }
    Ok(WeightMatrix::new(WeightTag::Structural, n, l, values)?)
}

/// Accessibility weights: inaccessible 3, accessible 1.
pub fn acc_weights(
    aln: &AnnotatedAlignment,
    gap_weight: f64,
) -> Result<WeightMatrix, StructWeightError> {
    let (n, l) = (aln.n_sequences(), aln.length());
    let mut values = Vec::with_capacity(n * l);
    for i in 0..n {
        for j in 0..l {
            if aln.cell(i, j).is_residue() {
                let accessible = aln
                    .annotation(i, j)
                    .accessible
                    .ok_or_else(|| missing(aln, i, j, "accessibility"))?;
                values.push(if accessible {
                    ACCESSIBLE_WEIGHT
                } else {
                    INACCESSIBLE_WEIGHT
                });
            } else {
                values.push(gap_weight);
            }
        }
    }
    Ok(WeightMatrix::new(WeightTag::Structural, n, l, values)?)
}

/// Contact counts from coordinates: for every residue, the number of
/// other residues of the same sequence within `radius` (inclusive).
/// Gap cells are `None`. Every residue must carry coordinates.
pub fn compute_ooi(
    aln: &AnnotatedAlignment,
    radius: f64,
) -> Result<Vec<Vec<Option<u32>>>, StructWeightError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(StructWeightError::InvalidParams {
            context: format!("contact radius {radius} must be positive"),
        });
    }
    let r2 = radius * radius;
    let mut out = Vec::with_capacity(aln.n_sequences());
    for i in 0..aln.n_sequences() {
        let mut coords: Vec<(usize, [f64; 3])> = Vec::new();
        for j in 0..aln.length() {
            if aln.cell(i, j).is_residue() {
                let p = aln
                    .annotation(i, j)
                    .calpha
                    .ok_or_else(|| missing(aln, i, j, "coordinates"))?;
                coords.push((j, p));
            }
        }
        let mut row = vec![None; aln.length()];
        for (a, &(j, p)) in coords.iter().enumerate() {
            let mut count = 0u32;
            for (b, &(_, q)) in coords.iter().enumerate() {
                if a == b {
                    continue;
                }
                let dx = p[0] - q[0];
                let dy = p[1] - q[1];
                let dz = p[2] - q[2];
                if dx * dx + dy * dy + dz * dz <= r2 {
                    count += 1;
                }
            }
            row[j] = Some(count);
        }
        out.push(row);
    }
    Ok(out)
}

/// Contact counts for one sequence: annotated values when the whole row
/// has them, otherwise computed from the row's coordinates.
fn sequence_contacts(
    aln: &AnnotatedAlignment,
    seq: usize,
    radius: f64,
) -> Result<Vec<Option<u32>>, StructWeightError> {
    let l = aln.length();
    let mut annotated = Vec::with_capacity(l);
    let mut all_annotated = true;
    for j in 0..l {
        if aln.cell(seq, j).is_residue() {
            match aln.annotation(seq, j).ooi {
                Some(v) => annotated.push(Some(v)),
                None => {
                    all_annotated = false;
                    annotated.push(None);
                }
            }
        } else {
            annotated.push(None);
        }
    }
    if all_annotated {
        return Ok(annotated);
    }
    // Fall back to coordinates; counts depend on the whole row, so a
    // partial annotation cannot be patched cell by cell.
    let mut coords: Vec<(usize, [f64; 3])> = Vec::new();
    for j in 0..l {
        if aln.cell(seq, j).is_residue() {
            let p = aln
                .annotation(seq, j)
                .calpha
                .ok_or_else(|| missing(aln, seq, j, "contact count or coordinates"))?;
            coords.push((j, p));
        }
    }
    let r2 = radius * radius;
    let mut row = vec![None; l];
    for (a, &(j, p)) in coords.iter().enumerate() {
        let mut count = 0u32;
        for (b, &(_, q)) in coords.iter().enumerate() {
            let dx = p[0] - q[0];
            let dy = p[1] - q[1];
            let dz = p[2] - q[2];
            if a != b && dx * dx + dy * dy + dz * dz <= r2 {
                count += 1;
            }
        }
        row[j] = Some(count);
    }
    Ok(row)
}

/// Contact-density weights: the residue's contact count floored at 1.
pub fn ooi_weights(
    aln: &AnnotatedAlignment,
    params: HcsParams,
) -> Result<WeightMatrix, StructWeightError> {
    params.validate()?;
    let (n, l) = (aln.n_sequences(), aln.length());
    let mut values = Vec::with_capacity(n * l);
    for i in 0..n {
        let contacts = sequence_contacts(aln, i, params.contact_radius)?;
        for j in 0..l {
            if aln.cell(i, j).is_residue() {
                let c = contacts[j].expect("residue cell has a contact count");
                values.push(f64::from(c.max(1)));
            } else {
                values.push(params.gap_weight);
            }
        }
    }
    Ok(WeightMatrix::new(WeightTag::Structural, n, l, values)?)
}

/// Core-structure proximity weights.
///
/// For residue `(i, j)`, `d` is the mean distance from its C-alpha to
/// the other residues in column `j`. With `d_min` the smallest positive
/// such mean in the alignment and `O_i` the sequence's maximal contact
/// count (floored at 1), the weight is `d_min * O_i / d`, capped at
/// `O_i` when the column is fully coincident (`d = 0`). Residues alone
/// in their column and gap cells carry the gap weight.
pub fn hcs_weights(
    aln: &AnnotatedAlignment,
    params: HcsParams,
) -> Result<WeightMatrix, StructWeightError> {
    params.validate()?;
    let (n, l) = (aln.n_sequences(), aln.length());

    // Mean column distance per residue cell; None for gaps and
    // single-residue columns.
    let mut mean_dist = vec![vec![None::<f64>; l]; n];
    let mut any_shared_column = false;
    for j in 0..l {
        let mut members: Vec<(usize, [f64; 3])> = Vec::new();
        for i in 0..n {
            if aln.cell(i, j).is_residue() {
                let p = aln
                    .annotation(i, j)
                    .calpha
                    .ok_or_else(|| missing(aln, i, j, "coordinates"))?;
                members.push((i, p));
            }
        }
        if members.len() < 2 {
            continue;
        }
        any_shared_column = true;
        for &(i, p) in &members {
            let sum: f64 = members
                .iter()
                .filter(|&&(k, _)| k != i)
                .map(|&(_, q)| euclid(p, q))
                .sum();
            mean_dist[i][j] = Some(sum / (members.len() - 1) as f64);
        }
    }
    if !any_shared_column {
        return Err(StructWeightError::DegenerateAlignment);
    }

    let d_min = mean_dist
        .iter()
        .flatten()
        .filter_map(|d| *d)
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);

    let mut values = Vec::with_capacity(n * l);
    for i in 0..n {
        let contacts = sequence_contacts(aln, i, params.contact_radius)?;
        let o_max = contacts
            .iter()
            .filter_map(|c| *c)
            .max()
            .unwrap_or(0)
            .max(1) as f64;
        for j in 0..l {
            if !aln.cell(i, j).is_residue() {
                values.push(params.gap_weight);
                continue;
            }
            match mean_dist[i][j] {
                None => values.push(params.gap_weight),
                Some(d) if d == 0.0 => values.push(o_max),
                Some(d) => values.push(d_min * o_max / d),
            }
        }
    }
    Ok(WeightMatrix::new(WeightTag::Structural, n, l, values)?)
}

/// Element-wise product of a broadcast (or already combined) weight
/// matrix with a structural one.
pub fn combine(
    w: &WeightMatrix,
    m: &WeightMatrix,
) -> Result<WeightMatrix, StructWeightError> {
    if m.tag() != WeightTag::Structural
        || !matches!(w.tag(), WeightTag::Default | WeightTag::Combined)
    {
        return Err(StructWeightError::TagMismatch {
            left: w.tag(),
            right: m.tag(),
        });
    }
    if w.n_rows() != m.n_rows() || w.n_cols() != m.n_cols() {
        return Err(StructWeightError::DimensionMismatch {
            context: format!(
                "{}x{} vs {}x{}",
                w.n_rows(),
                w.n_cols(),
                m.n_rows(),
                m.n_cols()
            ),
        });
    }
    let mut out = w.clone().with_tag(WeightTag::Combined);
    for i in 0..w.n_rows() {
        for j in 0..w.n_cols() {
            out.set(i, j, w.get(i, j) * m.get(i, j));
        }
    }
    Ok(out)
}

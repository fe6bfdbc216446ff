//! Aligned sequence data with per-residue structural annotations.
//!
//! The central type is [`AnnotatedAlignment`]: a rectangular block of
//! residue/gap cells plus one [`ResidueAnnotation`] per cell. Alignments
//! are read from aligned FASTA (`-` or `.` gaps, case-insensitive,
//! `X` for unknown residues) and annotations from a tab-separated sidecar
//! keyed by sequence id and 0-based column index.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Canonical residue alphabet, in the fixed index order used everywhere
/// downstream (emission vectors, background tables).
pub const ALPHABET: [char; 20] = [
    'A', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'K', 'L', 'M', 'N', 'P', 'Q', 'R', 'S', 'T', 'V',
    'W', 'Y',
];

/// Errors raised while parsing or indexing sequence data.
#[derive(Debug, Error, PartialEq)]
pub enum SeqDataError {
    #[error("empty-input: no sequence data")]
    EmptyInput,
    #[error("ragged-alignment: sequence `{id}` has length {got}, expected {expected}")]
    RaggedAlignment {
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("illegal-character: `{ch}` in sequence `{id}`")]
    IllegalCharacter { id: String, ch: char },
    #[error("unknown-sequence-id: `{id}`")]
    UnknownSequenceId { id: String },
    #[error("annotation-on-gap: sequence `{id}`, column {column}")]
    AnnotationOnGap { id: String, column: usize },
    #[error("index-out-of-range: {what} {got} not below {limit}")]
    IndexOutOfRange {
        what: &'static str,
        got: usize,
        limit: usize,
    },
    #[error("malformed-row: line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
}

/// One of the 20 canonical residues, or the unknown code `X`.
///
/// Stored as a compact index: `0..20` are the canonical residues in
/// [`ALPHABET`] order, `20` is `X`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct AminoAcid(u8);

impl AminoAcid {
    /// Number of canonical residues (excludes `X`).
    pub const COUNT: usize = 20;

    /// The unknown residue code.
    pub const X: AminoAcid = AminoAcid(20);

    /// Canonical residue from its alphabet index. Panics above 19.
    pub fn canonical(index: usize) -> AminoAcid {
        assert!(index < Self::COUNT, "canonical residue index out of range");
        AminoAcid(index as u8)
    }

    /// Parses one residue letter (case-insensitive; `X`/`x` allowed).
    pub fn from_char(c: char) -> Option<AminoAcid> {
        let up = c.to_ascii_uppercase();
        if up == 'X' {
            return Some(AminoAcid::X);
        }
        ALPHABET
            .iter()
            .position(|&a| a == up)
            .map(|i| AminoAcid(i as u8))
    }

    pub fn to_char(self) -> char {
        if self.is_unknown() {
            'X'
        } else {
            ALPHABET[self.0 as usize]
        }
    }

    /// Alphabet index for canonical residues, `None` for `X`.
    pub fn index(self) -> Option<usize> {
        if self.is_unknown() {
            None
        } else {
            Some(self.0 as usize)
        }
    }

    pub fn is_unknown(self) -> bool {
        self.0 as usize == Self::COUNT
    }
}

impl fmt::Debug for AminoAcid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

/// One alignment cell: a residue or a gap.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Cell {
    Residue(AminoAcid),
    Gap,
}

impl Cell {
    pub fn is_residue(self) -> bool {
        matches!(self, Cell::Residue(_))
    }

    pub fn residue(self) -> Option<AminoAcid> {
        match self {
            Cell::Residue(aa) => Some(aa),
            Cell::Gap => None,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Cell::Residue(aa) => aa.to_char(),
            Cell::Gap => '-',
        }
    }
}

/// Secondary-structure class of a residue.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SecondaryStructure {
    Loop,
    Helix,
    Sheet,
}

impl SecondaryStructure {
    /// Single-letter code: `L` loop, `H` helix, `C` sheet.
    pub fn from_char(c: char) -> Option<SecondaryStructure> {
        match c {
            'L' => Some(SecondaryStructure::Loop),
            'H' => Some(SecondaryStructure::Helix),
            'C' => Some(SecondaryStructure::Sheet),
            _ => None,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            SecondaryStructure::Loop => 'L',
            SecondaryStructure::Helix => 'H',
            SecondaryStructure::Sheet => 'C',
        }
    }
}

/// Structural annotation of one residue cell. Every field is optional;
/// downstream weight schemes state which fields they require.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct ResidueAnnotation {
    pub ss: Option<SecondaryStructure>,
    /// Solvent accessibility: `true` accessible, `false` inaccessible.
    pub accessible: Option<bool>,
    /// Contact count (number of nearby residues); non-negative.
    pub ooi: Option<u32>,
    /// C-alpha coordinates in angstroms.
    pub calpha: Option<[f64; 3]>,
}

impl ResidueAnnotation {
    pub fn is_empty(&self) -> bool {
        self.ss.is_none() && self.accessible.is_none() && self.ooi.is_none() && self.calpha.is_none()
    }
}

/// One row of an alignment.
#[derive(Clone, PartialEq, Debug)]
pub struct AlignedSequence {
    pub id: String,
    pub cells: Vec<Cell>,
}

impl AlignedSequence {
    /// Residues in row order with gaps dropped.
    pub fn ungapped(&self) -> Vec<AminoAcid> {
        self.cells.iter().filter_map(|c| c.residue()).collect()
    }
}

/// A rectangular multiple sequence alignment plus per-cell annotations.
///
/// Invariants: at least one sequence, at least one column, all rows the
/// same length, the annotation matrix congruent to the cell matrix, and
/// annotations only on residue cells.
#[derive(Clone, PartialEq, Debug)]
pub struct AnnotatedAlignment {
    sequences: Vec<AlignedSequence>,
    annotations: Vec<Vec<ResidueAnnotation>>,
}

impl AnnotatedAlignment {
    /// Wraps parsed rows into an alignment with empty annotations.
    pub fn new(sequences: Vec<AlignedSequence>) -> Result<AnnotatedAlignment, SeqDataError> {
        let first_len = match sequences.first() {
            Some(s) => s.cells.len(),
            None => return Err(SeqDataError::EmptyInput),
        };
        if first_len == 0 {
            return Err(SeqDataError::EmptyInput);
        }
        for s in &sequences {
            if s.cells.len() != first_len {
                return Err(SeqDataError::RaggedAlignment {
                    id: s.id.clone(),
                    expected: first_len,
                    got: s.cells.len(),
                });
            }
        }
        let annotations = vec![vec![ResidueAnnotation::default(); first_len]; sequences.len()];
        Ok(AnnotatedAlignment {
            sequences,
            annotations,
        })
    }

    pub fn n_sequences(&self) -> usize {
        self.sequences.len()
    }

    /// Number of alignment columns.
    pub fn length(&self) -> usize {
        self.sequences[0].cells.len()
    }

    pub fn sequences(&self) -> &[AlignedSequence] {
        &self.sequences
    }

    pub fn cell(&self, seq: usize, column: usize) -> Cell {
        self.sequences[seq].cells[column]
    }

    pub fn annotation(&self, seq: usize, column: usize) -> &ResidueAnnotation {
        &self.annotations[seq][column]
    }

    /// Row index of a sequence id (first match).
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.sequences.iter().position(|s| s.id == id)
    }

    /// Column view: cell and annotation of every row at column `j`.
    pub fn column(
        &self,
        j: usize,
    ) -> Result<Vec<(Cell, &ResidueAnnotation)>, SeqDataError> {
        if j >= self.length() {
            return Err(SeqDataError::IndexOutOfRange {
                what: "column",
                got: j,
                limit: self.length(),
            });
        }
        Ok((0..self.n_sequences())
            .map(|i| (self.cell(i, j), self.annotation(i, j)))
            .collect())
    }

    /// Sets the annotation of one residue cell; gap cells are rejected.
    pub fn set_annotation(
        &mut self,
        seq: usize,
        column: usize,
        ann: ResidueAnnotation,
    ) -> Result<(), SeqDataError> {
        if seq >= self.n_sequences() {
            return Err(SeqDataError::IndexOutOfRange {
                what: "sequence",
                got: seq,
                limit: self.n_sequences(),
            });
        }
        if column >= self.length() {
            return Err(SeqDataError::IndexOutOfRange {
                what: "column",
                got: column,
                limit: self.length(),
            });
        }
        if !self.cell(seq, column).is_residue() {
            return Err(SeqDataError::AnnotationOnGap {
                id: self.sequences[seq].id.clone(),
                column,
            });
        }
        self.annotations[seq][column] = ann;
        Ok(())
    }

    /// Serializes the cells as aligned FASTA (uppercase, `-` gaps,
    /// 60-column wrap). Annotations are not included; see
    /// [`annotations_to_tsv`].
    pub fn to_fasta(&self) -> String {
        let mut out = String::new();
        for s in &self.sequences {
            out.push('>');
            out.push_str(&s.id);
            out.push('\n');
            for chunk in s.cells.chunks(60) {
                for c in chunk {
                    out.push(c.to_char());
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Parses an aligned FASTA block into an alignment with empty annotations.
///
/// Headers take the first whitespace-separated token as the sequence id.
/// Gap characters are `-` and `.`; residue letters are case-insensitive
/// and may include `X`.
pub fn parse_alignment(text: &str) -> Result<AnnotatedAlignment, SeqDataError> {
    let mut sequences: Vec<AlignedSequence> = Vec::new();
    let mut current: Option<AlignedSequence> = None;
    for line in text.lines() {
        let line = line.trim_end();
        if let Some(header) = line.strip_prefix('>') {
            if let Some(seq) = current.take() {
                sequences.push(seq);
            }
            let id = header.split_whitespace().next().unwrap_or("").to_string();
            current = Some(AlignedSequence {
                id,
                cells: Vec::new(),
            });
        } else if let Some(seq) = current.as_mut() {
            for ch in line.chars() {
                if ch.is_whitespace() {
                    continue;
                }
                let cell = match ch {
                    '-' | '.' => Cell::Gap,
                    other => match AminoAcid::from_char(other) {
                        Some(aa) => Cell::Residue(aa),
                        None => {
                            return Err(SeqDataError::IllegalCharacter {
                                id: seq.id.clone(),
                                ch: other,
                            })
                        }
                    },
                };
                seq.cells.push(cell);
            }
        }
        // Text before the first header is ignored, as in common FASTA readers.
    }
    if let Some(seq) = current.take() {
        sequences.push(seq);
    }
    AnnotatedAlignment::new(sequences)
}

/// Parses a plain (not necessarily aligned) FASTA block into ungapped
/// residue strings, for scoring targets. Gap characters are stripped.
pub fn parse_sequences(text: &str) -> Result<Vec<(String, Vec<AminoAcid>)>, SeqDataError> {
    let mut out: Vec<(String, Vec<AminoAcid>)> = Vec::new();
    let mut current: Option<(String, Vec<AminoAcid>)> = None;
    for line in text.lines() {
        let line = line.trim_end();
        if let Some(header) = line.strip_prefix('>') {
            if let Some(seq) = current.take() {
                out.push(seq);
            }
            let id = header.split_whitespace().next().unwrap_or("").to_string();
            current = Some((id, Vec::new()));
        } else if let Some((id, residues)) = current.as_mut() {
            for ch in line.chars() {
                if ch.is_whitespace() || ch == '-' || ch == '.' {
                    continue;
                }
                match AminoAcid::from_char(ch) {
                    Some(aa) => residues.push(aa),
                    None => {
                        return Err(SeqDataError::IllegalCharacter {
                            id: id.clone(),
                            ch,
                        })
                    }
                }
            }
        }
    }
    if let Some(seq) = current.take() {
        out.push(seq);
    }
    if out.is_empty() {
        return Err(SeqDataError::EmptyInput);
    }
    Ok(out)
}

/// Field layout of one annotation row:
/// `seq_id  column_index  ss  acc  ooi  x  y  z`.
const ANNOTATION_FIELDS: usize = 8;

/// Parses a tab-separated annotation block and attaches it to `aln`.
///
/// `#`-prefixed lines and blank lines are skipped. `-` marks an absent
/// field; coordinates must be present as a full `x y z` triple or absent
/// as one. Rows must reference residue cells of known sequences.
pub fn parse_annotations(
    mut aln: AnnotatedAlignment,
    tsv: &str,
) -> Result<AnnotatedAlignment, SeqDataError> {
    let index_by_id: HashMap<String, usize> = aln
        .sequences
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.clone(), i))
        .collect();
    for (lineno, raw) in tsv.lines().enumerate() {
        let line = raw.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != ANNOTATION_FIELDS {
            return Err(SeqDataError::MalformedRow {
                line: lineno + 1,
                reason: format!("expected {ANNOTATION_FIELDS} fields, found {}", fields.len()),
            });
        }
        let seq = *index_by_id
            .get(fields[0])
            .ok_or_else(|| SeqDataError::UnknownSequenceId {
                id: fields[0].to_string(),
            })?;
        let column: usize = fields[1].parse().map_err(|_| SeqDataError::MalformedRow {
            line: lineno + 1,
            reason: format!("bad column index `{}`", fields[1]),
        })?;
        if column >= aln.length() {
            return Err(SeqDataError::IndexOutOfRange {
                what: "column",
                got: column,
                limit: aln.length(),
            });
        }

        let mut ann = ResidueAnnotation::default();
        if fields[2] != "-" {
            let mut chars = fields[2].chars();
            let (c, rest) = (chars.next(), chars.next());
            ann.ss = match (c, rest) {
                (Some(c), None) => SecondaryStructure::from_char(c),
                _ => None,
            };
            if ann.ss.is_none() {
                return Err(SeqDataError::MalformedRow {
                    line: lineno + 1,
                    reason: format!("bad secondary-structure code `{}`", fields[2]),
                });
            }
        }
        if fields[3] != "-" {
            ann.accessible = match fields[3] {
                "0" => Some(false),
                "1" => Some(true),
                other => {
                    return Err(SeqDataError::MalformedRow {
                        line: lineno + 1,
                        reason: format!("bad accessibility flag `{other}`"),
                    })
                }
            };
        }
        if fields[4] != "-" {
            let ooi: u32 = fields[4].parse().map_err(|_| SeqDataError::MalformedRow {
                line: lineno + 1,
                reason: format!("bad contact count `{}`", fields[4]),
            })?;
            ann.ooi = Some(ooi);
        }
        let coord_fields = &fields[5..8];
        let absent = coord_fields.iter().filter(|f| **f == "-").count();
        match absent {
            3 => {}
            0 => {
                let mut xyz = [0.0f64; 3];
                for (k, f) in coord_fields.iter().enumerate() {
                    let v: f64 = f.parse().map_err(|_| SeqDataError::MalformedRow {
                        line: lineno + 1,
                        reason: format!("bad coordinate `{f}`"),
                    })?;
                    if !v.is_finite() {
                        return Err(SeqDataError::MalformedRow {
                            line: lineno + 1,
                            reason: format!("non-finite coordinate `{f}`"),
                        });
                    }
                    xyz[k] = v;
                }
                ann.calpha = Some(xyz);
            }
            _ => {
                return Err(SeqDataError::MalformedRow {
                    line: lineno + 1,
                    reason: "coordinates must be a full x/y/z triple or all `-`".to_string(),
                })
            }
        }

        aln.set_annotation(seq, column, ann)?;
    }
    Ok(aln)
}

/// Serializes all non-empty annotations as TSV rows in (row, column)
/// order; the inverse of [`parse_annotations`].
pub fn annotations_to_tsv(aln: &AnnotatedAlignment) -> String {
    let mut out = String::from("# seq_id\tcolumn\tss\tacc\tooi\tx\ty\tz\n");
    for (i, s) in aln.sequences.iter().enumerate() {
        for j in 0..aln.length() {
            let ann = aln.annotation(i, j);
            if ann.is_empty() {
                continue;
            }
            let ss = ann.ss.map(|v| v.to_char().to_string());
            let acc = ann.accessible.map(|v| if v { "1" } else { "0" }.to_string());
            let ooi = ann.ooi.map(|v| v.to_string());
            let (x, y, z) = match ann.calpha {
                Some([x, y, z]) => (Some(x.to_string()), Some(y.to_string()), Some(z.to_string())),
                None => (None, None, None),
            };
            let dash = || "-".to_string();
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                s.id,
                j,
                ss.unwrap_or_else(dash),
                acc.unwrap_or_else(dash),
                ooi.unwrap_or_else(dash),
                x.unwrap_or_else(dash),
                y.unwrap_or_else(dash),
                z.unwrap_or_else(dash),
            ));
        }
    }
    out
}

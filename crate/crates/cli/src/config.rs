//! Run configuration: pseudocount settings from key=value text, the
//! background frequency table, and the settings digests stamped into
//! provenance headers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use phmmw_core::plan7::PseudocountConfig;
use phmmw_core::seqdata::{AminoAcid, ALPHABET};
use phmmw_core::structweights::HcsParams;

use crate::CliError;

/// Environment variable naming a background table that overrides both
/// the built-in one and any `background` entry in the config file.
pub const BG_ENV: &str = "PHMMW_BG";

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads pseudocount settings: built-in defaults, then the key=value
/// file, then the `PHMMW_BG` background override.
pub fn load_pseudocounts(path: Option<&Path>) -> Result<PseudocountConfig, CliError> {
    let mut cfg = PseudocountConfig::default();
    let mut bg_path: Option<PathBuf> = None;
    if let Some(path) = path {
        let text = read_text(path)?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "line {}: expected key=value, got `{line}`",
                    lineno + 1
                ))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "emission_strength" => cfg.emission_strength = positive(key, value)?,
                "transition_alpha" => cfg.transition_alpha = positive(key, value)?,
                "background" => bg_path = Some(PathBuf::from(value)),
                other => {
                    return Err(CliError::Config(format!("unknown key `{other}`")));
                }
            }
        }
    }
    if let Ok(env_path) = std::env::var(BG_ENV) {
        if !env_path.is_empty() {
            bg_path = Some(PathBuf::from(env_path));
        }
    }
    if let Some(bg) = bg_path {
        cfg.background = load_background(&bg)?;
    }
    Ok(cfg)
}

fn positive(key: &str, value: &str) -> Result<f64, CliError> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(CliError::Config(format!(
            "`{key}` needs a positive number, got `{value}`"
        ))),
    }
}

/// Reads a background table: one `<residue> <frequency>` pair per
/// line, every canonical residue exactly once. Frequencies are
/// normalized to sum 1.
pub fn load_background(path: &Path) -> Result<[f64; 20], CliError> {
    let text = read_text(path)?;
    let bad = |detail: String| CliError::Config(format!("background `{}`: {detail}", path.display()));
    let mut bg = [0.0f64; 20];
    let mut seen = [false; 20];
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (residue, freq) = match (fields.next(), fields.next(), fields.next()) {
            (Some(r), Some(f), None) => (r, f),
            _ => {
                return Err(bad(format!(
                    "line {}: expected `<residue> <frequency>`",
                    lineno + 1
                )))
            }
        };
        let mut chars = residue.chars();
        let idx = match (chars.next().and_then(AminoAcid::from_char), chars.next()) {
            (Some(aa), None) => aa.index().ok_or_else(|| {
                bad(format!("line {}: `{residue}` has no background slot", lineno + 1))
            })?,
            _ => return Err(bad(format!("line {}: bad residue `{residue}`", lineno + 1))),
        };
        if seen[idx] {
            return Err(bad(format!("residue `{residue}` listed twice")));
        }
        seen[idx] = true;
        bg[idx] = match freq.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => v,
            _ => return Err(bad(format!("line {}: bad frequency `{freq}`", lineno + 1))),
        };
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(bad(format!("residue `{}` missing", ALPHABET[missing])));
    }
    let sum: f64 = bg.iter().sum();
    for v in &mut bg {
        *v /= sum;
    }
    Ok(bg)
}

/// First eight bytes of a SHA-256 over a canonical settings string;
/// the `# config` line of every provenance header.
pub fn settings_digest(settings: &str) -> String {
    let digest = Sha256::digest(settings.as_bytes());
    let mut out = String::with_capacity(16);
    for b in digest.iter().take(8) {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Canonical settings string for anything built from pseudocounts and
/// structural parameters.
pub fn pseudocount_settings(cfg: &PseudocountConfig, hcs: HcsParams) -> String {
    let mut text = format!(
        "em={};alpha={};radius={};gap={}",
        cfg.emission_strength, cfg.transition_alpha, hcs.contact_radius, hcs.gap_weight
    );
    for b in &cfg.background {
        let _ = write!(text, ",{b}");
    }
    text
}

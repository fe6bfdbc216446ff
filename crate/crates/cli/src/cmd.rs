//! Subcommand implementations. Each one reads its inputs, runs the
//! library, and writes provenance-stamped, byte-reproducible output.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use phmmw_core::evalharness::{
    load_dataset_dir, run_experiment, write_report, EvalConfig, SCHEME_LABELS,
};
use phmmw_core::plan7::{
    build_scheme_model, model_from_str, model_to_string, Plan7Model, PseudocountConfig,
    WeightScheme,
};
use phmmw_core::scorer::{
    calibrate, evalue, score_library, LibraryPolicy, ModelLibrary, ScoreError, Scorer,
};
use phmmw_core::seqdata::{parse_alignment, parse_annotations, parse_sequences, AnnotatedAlignment};
use phmmw_core::seqweights::{gsc_weight_matrix, WeightMatrix, WeightTag};
use phmmw_core::structweights::{acc_weights, hcs_weights, ooi_weights, ss_weights, HcsParams};
use phmmw_core::synthgen::{generate, parse_spec, write_dataset_dir};

use crate::config::{self, read_text};
use crate::{
    BuildArgs, CalibrateArgs, Cli, CliError, Command, EvalArgs, PolicyArg, ScoreArgs, SynthArgs,
    WeightKind, WeightsArgs,
};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    // Resolved once so a broken config file fails every subcommand,
    // not only the ones that read pseudocounts.
    let pseudocounts = config::load_pseudocounts(cli.config.as_deref())?;
    match &cli.command {
        Command::Weights(args) => weights(args),
        Command::Build(args) => build(args, &pseudocounts),
        Command::Calibrate(args) => calibrate_model(args),
        Command::Score(args) => score(args),
        Command::Eval(args) => eval(args, &pseudocounts),
        Command::Synth(args) => synth(args),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn provenance(digest: &str, seed: u64) -> String {
    format!(
        "# phmmw {}\n# config {digest}\n# seed {seed}\n",
        env!("CARGO_PKG_VERSION")
    )
}

fn load_alignment(aln: &Path, ann: Option<&Path>) -> Result<AnnotatedAlignment, CliError> {
    let alignment = parse_alignment(&read_text(aln)?)?;
    match ann {
        Some(path) => Ok(parse_annotations(alignment, &read_text(path)?)?),
        None => Ok(alignment),
    }
}

fn weights(args: &WeightsArgs) -> Result<(), CliError> {
    let aln = load_alignment(&args.aln, args.ann.as_deref())?;
    let params = HcsParams {
        contact_radius: args.ooi_radius,
        gap_weight: args.gap_weight,
    };
    let matrix = match args.scheme {
        WeightKind::Gsc => gsc_weight_matrix(&aln)?,
        WeightKind::Uniform => {
            WeightMatrix::filled(WeightTag::Default, aln.n_sequences(), aln.length(), 1.0)
        }
        WeightKind::Ss => ss_weights(&aln, args.gap_weight)?,
        WeightKind::Acc => acc_weights(&aln, args.gap_weight)?,
        WeightKind::Ooi => ooi_weights(&aln, params)?,
        WeightKind::Hcs => hcs_weights(&aln, params)?,
    };
    let settings = format!(
        "scheme={};radius={};gap={}",
        args.scheme.tag(),
        args.ooi_radius,
        args.gap_weight
    );
    let mut out = provenance(&config::settings_digest(&settings), 0);
    let _ = writeln!(out, "# scheme {}", args.scheme.tag());
    for (row, seq) in matrix.rows().zip(aln.sequences()) {
        out.push_str(&seq.id);
        for value in row {
            let _ = write!(out, "\t{value}");
        }
        out.push('\n');
    }
    emit(args.out.as_deref(), &out)
}

/// Model names recorded in metadata, one per scheme.
fn class_name(scheme: WeightScheme) -> &'static str {
    match scheme {
        WeightScheme::Baseline => "pHMM1D",
        WeightScheme::SecondaryStructure => "pHMM2D",
        WeightScheme::Accessibility => "pHMMAcc",
        WeightScheme::ContactDensity => "pHMMOi",
        WeightScheme::CoreProximity => "pHMM3D",
    }
}

fn build_one(
    aln: &AnnotatedAlignment,
    scheme: WeightScheme,
    pseudocounts: &PseudocountConfig,
    params: HcsParams,
    name: &str,
    digest: &str,
) -> Result<Plan7Model, CliError> {
    let mut metadata = BTreeMap::new();
    metadata.insert("class".to_string(), class_name(scheme).to_string());
    metadata.insert("config".to_string(), digest.to_string());
    metadata.insert("seed".to_string(), "0".to_string());
    metadata.insert("version".to_string(), env!("CARGO_PKG_VERSION").to_string());
    Ok(build_scheme_model(
        aln,
        scheme,
        pseudocounts,
        params,
        name,
        metadata,
    )?)
}

fn build(args: &BuildArgs, pseudocounts: &PseudocountConfig) -> Result<(), CliError> {
    let aln = load_alignment(&args.aln, args.ann.as_deref())?;
    let params = HcsParams {
        contact_radius: args.ooi_radius,
        gap_weight: args.gap_weight,
    };
    let name = match &args.name {
        Some(name) => name.clone(),
        None => args
            .aln
            .file_stem()
            .map(|stem| stem.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".to_string()),
    };
    let digest = config::settings_digest(&config::pseudocount_settings(pseudocounts, params));
    match args.scheme.single() {
        Some(scheme) => {
            let model = build_one(&aln, scheme, pseudocounts, params, &name, &digest)?;
            write_file(&args.out, &model_to_string(&model))
        }
        None => {
            std::fs::create_dir_all(&args.out).map_err(|source| CliError::Write {
                path: args.out.clone(),
                source,
            })?;
            let mut manifest = provenance(&digest, 0);
            for scheme in WeightScheme::ALL {
                let member_name = format!("{name}:{}", scheme.tag());
                let model =
                    build_one(&aln, scheme, pseudocounts, params, &member_name, &digest)?;
                let file = format!("{}.phmmw", scheme.tag());
                write_file(&args.out.join(&file), &model_to_string(&model))?;
                manifest.push_str(&file);
                manifest.push('\n');
            }
            write_file(&args.out.join("library.txt"), &manifest)
        }
    }
}

fn calibrate_model(args: &CalibrateArgs) -> Result<(), CliError> {
    let mut model = model_from_str(&read_text(&args.model)?)?;
    calibrate(&mut model, args.samples, args.seed)?;
    let settings = format!("samples={};seed={}", args.samples, args.seed);
    model.metadata.insert("calib-samples".to_string(), args.samples.to_string());
    model.metadata.insert("config".to_string(), config::settings_digest(&settings));
    model.metadata.insert("seed".to_string(), args.seed.to_string());
    model.metadata.insert("version".to_string(), env!("CARGO_PKG_VERSION").to_string());
    write_file(&args.out, &model_to_string(&model))
}

/// Loads library members: the `library.txt` manifest order when one
/// exists, otherwise every `*.phmmw` file sorted by name.
fn load_library(dir: &Path) -> Result<Vec<Plan7Model>, CliError> {
    let manifest = dir.join("library.txt");
    let files: Vec<PathBuf> = if manifest.is_file() {
        read_text(&manifest)?
            .lines()
            .map(str::trim)
            .filter(|line| !line.is_empty() && !line.starts_with('#'))
            .map(|line| dir.join(line))
            .collect()
    } else {
        let entries = std::fs::read_dir(dir).map_err(|source| CliError::Read {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut found = Vec::new();
        for entry in entries {
            let path = entry
                .map_err(|source| CliError::Read {
                    path: dir.to_path_buf(),
                    source,
                })?
                .path();
            if path.extension().is_some_and(|ext| ext == "phmmw") {
                found.push(path);
            }
        }
        found.sort();
        found
    };
    if files.is_empty() {
        return Err(CliError::Config(format!(
            "no models under `{}`",
            dir.display()
        )));
    }
    files
        .iter()
        .map(|path| Ok(model_from_str(&read_text(path)?)?))
        .collect()
}

fn score(args: &ScoreArgs) -> Result<(), CliError> {
    let seqs = parse_sequences(&read_text(&args.seqs)?)?;
    let db = args.db_size.unwrap_or(seqs.len() as f64);
    if !(db > 0.0) {
        return Err(CliError::Config(format!(
            "db-size must be positive, got {db}"
        )));
    }
    let settings = format!(
        "policy={};threshold={};quorum={};db={}",
        args.policy.tag(),
        args.threshold,
        args.quorum,
        db
    );
    let mut out = provenance(&config::settings_digest(&settings), 0);
    out.push_str("# seq_id\tmodel\tbits\tevalue\tverdict\n");
    if let Some(path) = &args.model {
        let model = model_from_str(&read_text(path)?)?;
        let params = model.calibration.ok_or_else(|| ScoreError::NotCalibrated {
            model: model.name.clone(),
        })?;
        let scorer = Scorer::new(&model);
        for (id, seq) in &seqs {
            let bits = scorer.viterbi_bits(seq)?;
            let e = evalue(&params, bits, db);
            let verdict = if e <= args.threshold { "accept" } else { "reject" };
            let _ = writeln!(out, "{id}\t{}\t{bits}\t{e:e}\t{verdict}", model.name);
        }
    } else {
        let dir = args.library.as_deref().expect("one scoring target is required");
        let policy = match args.policy {
            PolicyArg::Best => LibraryPolicy::BestEvalue {
                threshold: args.threshold,
            },
            PolicyArg::Vote => LibraryPolicy::Vote {
                threshold: args.threshold,
                quorum: args.quorum,
            },
        };
        let library = ModelLibrary {
            members: load_library(dir)?,
            policy,
        };
        for (id, seq) in &seqs {
            let verdict = score_library(&library, id, seq, db)?;
            let mut best_bits = f64::NEG_INFINITY;
            for hit in &verdict.hits {
                best_bits = best_bits.max(hit.bits);
                let _ = writeln!(out, "{id}\t{}\t{}\t{:e}\t-", hit.model, hit.bits, hit.evalue);
            }
            let _ = writeln!(
                out,
                "{id}\tlibrary\t{best_bits}\t{:e}\t{}",
                verdict.combined_evalue,
                if verdict.accepted { "accept" } else { "reject" }
            );
        }
    }
    emit(args.out.as_deref(), &out)
}

/// Validates the `--schemes` list; the result keeps report order.
fn parse_schemes(list: &str) -> Result<BTreeSet<String>, CliError> {
    let mut selected = BTreeSet::new();
    for token in list.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        if !SCHEME_LABELS.contains(&token) {
            return Err(CliError::Config(format!(
                "unknown scheme `{token}`; valid: {}",
                SCHEME_LABELS.join(",")
            )));
        }
        selected.insert(token.to_string());
    }
    if selected.is_empty() {
        return Err(CliError::Config("no schemes selected".to_string()));
    }
    Ok(selected)
}

fn eval(args: &EvalArgs, pseudocounts: &PseudocountConfig) -> Result<(), CliError> {
    let selected = parse_schemes(&args.schemes)?;
    let datasets = load_dataset_dir(&args.data)?;
    let cfg = EvalConfig {
        seed: args.seed,
        calib_samples: args.calib_samples,
        db_size: args.db_size,
        pseudocounts: pseudocounts.clone(),
        hcs: HcsParams {
            contact_radius: args.ooi_radius,
            gap_weight: args.gap_weight,
        },
        lib_quorum: match args.policy {
            PolicyArg::Best => 1,
            PolicyArg::Vote => args.quorum,
        },
        jobs: args.jobs.max(1),
    };
    let mut report = run_experiment(&datasets, &cfg)?;
    report.schemes.retain(|s| selected.contains(s.scheme.as_str()));
    report
        .ttests
        .retain(|t| selected.contains(t.scheme.as_str()) && selected.contains(t.baseline.as_str()));
    std::fs::create_dir_all(&args.out).map_err(|source| CliError::Write {
        path: args.out.clone(),
        source,
    })?;
    write_report(&report, &args.out)?;
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let spec = parse_spec(&read_text(&args.spec)?)?;
    let datasets = generate(&spec)?;
    std::fs::create_dir_all(&args.out).map_err(|source| CliError::Write {
        path: args.out.clone(),
        source,
    })?;
    write_dataset_dir(&datasets, &args.out)?;
    let settings = format!(
        "sf={};fam={};seqs={};len={};corefrac={};corerate={};noise={};retention={}",
        spec.superfamilies,
        spec.families,
        spec.seqs_per_family,
        spec.length,
        spec.core_fraction,
        spec.core_rate,
        spec.noise_rate,
        spec.family_core_retention
    );
    let mut inventory = provenance(&config::settings_digest(&settings), spec.seed);
    for ds in &datasets {
        let _ = writeln!(
            inventory,
            "{}\t{} families\t{} sequences",
            ds.id,
            ds.families.len(),
            ds.n_sequences()
        );
    }
    write_file(&args.out.join("synth.txt"), &inventory)
}

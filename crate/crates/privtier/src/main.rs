use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use privtier::evalkit::{
    bundle, load_predictions, parse_face_flags, parse_quality_table, parse_report, ConfigLabel, EvalContext,
    ReportBundle, ACCURACY_PLOT_FILE, ORIGINAL_TIER, PRIVACY_UTILITY_PLOT_FILE,
};
use privtier::keys::{resolve_key, KEY_ENV};
use privtier::splits::{assignments, parse_split, render_split, split_file_name};
use privtier::{
    emit_report, evaluate, parse_annotations, run_pipeline, verify_run, PipelineConfig,
};
use privtier_core::corpus::DEFAULT_CLASSES;
use privtier_core::transform::CANONICAL_BLOCK_SIZES;
use privtier_core::{Generator, Split, TierSpec};

/// Exit status when the command ran but found problems (failed clips, verification findings).
const EXIT_FINDINGS: u8 = 3;

#[derive(Parser)]
#[command(name = "privtier", version, about = "Tiered privacy transforms and evaluation for action-recognition clips")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate every tier for a corpus directory.
    Transform(TransformArgs),
    /// Write train_split.txt and test_split.txt from an annotations file.
    Split {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        classes: ClassArgs,
    },
    /// Hash every file under a directory into <root>/manifest.json.
    Manifest {
        root: PathBuf,
    },
    /// Check an output tree against its manifest and expected layout.
    Verify {
        output: PathBuf,
    },
    /// Score prediction files and write report.json plus plot tables.
    Eval(EvalArgs),
    /// Regenerate plot tables from an existing report.json.
    Plot {
        report: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct ClassArgs {
    /// File with one class name per line; defaults to the built-in 15 classes.
    #[arg(long)]
    classes_file: Option<PathBuf>,
}

impl ClassArgs {
    fn load(&self) -> anyhow::Result<Vec<String>> {
        let Some(path) = &self.classes_file else {
            return Ok(DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let classes: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect();
        if classes.is_empty() {
            bail!("{}: no classes listed", path.display());
        }
        Ok(classes)
    }
}

#[derive(Args)]
struct TransformArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// 128-bit key as 32 hex characters.
    #[arg(long, env = KEY_ENV, hide_env_values = true)]
    key_hex: Option<String>,
    /// File holding the key as hex or 16 raw bytes.
    #[arg(long, conflicts_with = "key_hex")]
    key_file: Option<PathBuf>,
    /// Comma-separated tier names. Defaults to all tiers for the selected block sizes.
    #[arg(long, value_delimiter = ',')]
    tiers: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = CANONICAL_BLOCK_SIZES)]
    block_sizes: Vec<u32>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Use the hash-chain generator instead of AES-CTR. Outputs are marked non-canonical.
    #[arg(long)]
    fallback_csprng: bool,
    /// Keep existing output files whose content is already correct.
    #[arg(long)]
    resume: bool,
    #[command(flatten)]
    classes: ClassArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    annotations: PathBuf,
    /// Evaluation split file; defaults to test_split.txt next to the annotations.
    #[arg(long)]
    split_file: Option<PathBuf>,
    /// Directory of `<Tier>.csv` files (config A), optionally with A/, B/, C/ subdirectories.
    #[arg(long)]
    predictions: PathBuf,
    /// ROI metric summary; defaults to roi_metrics.json next to the annotations.
    #[arg(long)]
    roi_metrics: Option<PathBuf>,
    /// CSV `tier,sample_id,orig_detected,post_detected`.
    #[arg(long)]
    face_flags: Option<PathBuf>,
    /// Original-tier Top-1 in percent, when no Original.csv is supplied.
    #[arg(long)]
    original_acc: Option<f64>,
    #[arg(long)]
    allow_train_eval: bool,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    classes: ClassArgs,
}

fn tier_list(names: &[String], block_sizes: &[u32]) -> anyhow::Result<Vec<TierSpec>> {
    if names.is_empty() {
        let mut tiers = vec![TierSpec::Original, TierSpec::blur(), TierSpec::edge()];
        tiers.extend(block_sizes.iter().map(|&b| TierSpec::scramble(b, false)));
        tiers.extend(block_sizes.iter().map(|&b| TierSpec::scramble(b, true)));
        return Ok(tiers);
    }
    names
        .iter()
        .map(|n| TierSpec::from_name(n.trim()).with_context(|| format!("unknown tier {n:?}")))
        .collect()
}

fn transform(args: TransformArgs) -> anyhow::Result<ExitCode> {
    let key = resolve_key(args.key_hex.as_deref(), args.key_file.as_deref(), None)?;
    let cfg = PipelineConfig {
        input_root: args.input,
        output_root: args.output,
        key,
        generator: if args.fallback_csprng {
            Generator::CsprngFallback
        } else {
            Generator::AesCtr
        },
        tiers: tier_list(&args.tiers, &args.block_sizes)?,
        classes: args.classes.load()?,
        workers: args.workers,
        resume: args.resume,
    };
    let report = run_pipeline(&cfg)?;
    println!(
        "{} clips, {} failed, {} files written, {} unchanged, {} manifest entries",
        report.clips_ok,
        report.failures.len(),
        report.files_written,
        report.files_unchanged,
        report.manifest_entries
    );
    for (id, why) in &report.failures {
        eprintln!("failed: {id}: {why}");
    }
    Ok(if report.succeeded() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FINDINGS)
    })
}

fn write(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_bundle(out: &Path, b: &ReportBundle, with_json: bool) -> anyhow::Result<()> {
    if with_json {
        write(&out.join("report.json"), &b.json)?;
    }
    write(&out.join(ACCURACY_PLOT_FILE), b.accuracy_csv.as_bytes())?;
    write(&out.join(PRIVACY_UTILITY_PLOT_FILE), b.privacy_utility_csv.as_bytes())
}

fn prediction_files(root: &Path) -> anyhow::Result<Vec<(ConfigLabel, String, PathBuf)>> {
    let mut out = Vec::new();
    let mut scan = |dir: &Path, config: ConfigLabel| -> anyhow::Result<()> {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
            .collect();
        paths.sort();
        for p in paths {
            let tier = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            out.push((config, tier, p));
        }
        Ok(())
    };
    scan(root, ConfigLabel::A)?;
    for (sub, config) in [("A", ConfigLabel::A), ("B", ConfigLabel::B), ("C", ConfigLabel::C)] {
        let dir = root.join(sub);
        if dir.is_dir() {
            scan(&dir, config)?;
        }
    }
    if out.is_empty() {
        bail!("{}: no prediction files", root.display());
    }
    Ok(out)
}

fn eval(args: EvalArgs) -> anyhow::Result<ExitCode> {
    let classes = args.classes.load()?;
    let base = args.annotations.parent().unwrap_or(Path::new("."));
    let corpus = parse_annotations(
        &fs::read(&args.annotations).with_context(|| format!("reading {}", args.annotations.display()))?,
        &classes,
    )?;
    let split_path = args
        .split_file
        .clone()
        .unwrap_or_else(|| base.join(split_file_name(Split::Test)));
    let split_text = fs::read_to_string(&split_path).with_context(|| format!("reading {}", split_path.display()))?;
    let split_name = if split_path.file_name().is_some_and(|n| n == split_file_name(Split::Train)) {
        Split::Train
    } else {
        Split::Test
    };
    let split = parse_split(&split_text, split_name)?;
    let ctx = EvalContext {
        corpus: &corpus,
        split: &split,
        classes: &classes,
        allow_train_eval: args.allow_train_eval,
    };

    let metrics_path = args.roi_metrics.clone().unwrap_or_else(|| base.join("roi_metrics.json"));
    let quality = if metrics_path.is_file() {
        parse_quality_table(&fs::read(&metrics_path)?)?
    } else {
        log::warn!("{}: not found, ROI-SSIM and PU are omitted", metrics_path.display());
        BTreeMap::new()
    };
    let faces = match &args.face_flags {
        Some(p) => parse_face_flags(&fs::read(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => BTreeMap::new(),
    };

    let mut sets = Vec::new();
    for (config, tier, path) in prediction_files(&args.predictions)? {
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let set = load_predictions(&bytes, &tier, config, &classes).with_context(|| path.display().to_string())?;
        sets.push(set);
    }
    let mut original_acc = args.original_acc;
    if let Some(o) = sets
        .iter()
        .find(|s| s.tier_name == ORIGINAL_TIER && s.config_label == ConfigLabel::A)
    {
        let r = evaluate(o, &ctx, None, None, None)?;
        original_acc = Some(r.top1.percent());
    }
    let mut reports = Vec::new();
    for set in &sets {
        let r = evaluate(
            set,
            &ctx,
            quality.get(&set.tier_name),
            faces.get(&set.tier_name),
            original_acc,
        )?;
        if !r.missing_predictions.is_empty() {
            log::warn!(
                "{} ({}): {} clips without a prediction counted as wrong",
                set.tier_name,
                set.config_label,
                r.missing_predictions.len()
            );
        }
        reports.push(r);
    }
    let b = emit_report(&reports)?;
    write_bundle(&args.output, &b, true)?;
    for row in &b.document.tiers {
        println!("{} {}: top-1 {:.1}%", row.config, row.tier, row.top1_percent);
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Transform(args) => transform(args),
        Command::Split {
            annotations,
            output,
            classes,
        } => {
            let classes = classes.load()?;
            let records = parse_annotations(
                &fs::read(&annotations).with_context(|| format!("reading {}", annotations.display()))?,
                &classes,
            )?;
            let (train, test) = assignments(&records)?;
            for a in [&train, &test] {
                write(&output.join(split_file_name(a.split_name)), render_split(a).as_bytes())?;
            }
            println!("train {} / test {}", train.video_ids.len(), test.video_ids.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Manifest { root } => {
            let m = privtier::manifest::build_manifest_excluding(&root, &[privtier::manifest::MANIFEST_FILE])?;
            write(&root.join(privtier::manifest::MANIFEST_FILE), &m.to_json())?;
            println!("{} entries", m.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { output } => {
            let v = verify_run(&output)?;
            let m = &v.manifest;
            println!(
                "{} matched, {} mismatched, {} missing, {} extra, {} unreadable, {} layout issues",
                m.matched.len(),
                m.mismatched.len(),
                m.missing.len(),
                m.extra.len(),
                m.errors.len(),
                v.structure.len()
            );
            for p in &m.mismatched {
                println!("mismatch: {p}");
            }
            for p in &m.missing {
                println!("missing: {p}");
            }
            for p in &m.extra {
                println!("extra: {p}");
            }
            for (p, e) in &m.errors {
                println!("unreadable: {p}: {e}");
            }
            for s in &v.structure {
                println!("layout: {s}");
            }
            Ok(if v.is_clean() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FINDINGS)
            })
        }
        Command::Eval(args) => eval(args),
        Command::Plot { report, output } => {
            let doc = parse_report(&fs::read(&report).with_context(|| format!("reading {}", report.display()))?)?;
            write_bundle(&output, &bundle(doc)?, false)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

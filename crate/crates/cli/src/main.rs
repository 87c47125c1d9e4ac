//! Command-line entry point wiring the harmonization pipeline together:
//! phantom dataset generation, multipath training, volume harmonization,
//! emphysema scoring, and before/after covariate analysis.

mod config;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use config::{resolve_dataset_path, RunConfig};
use kernel_harmony::harmonizer;
use kernel_harmony::phantom;
use kernel_harmony::quantify;
use kernel_harmony::stats;
use kernel_harmony::trainer;

#[derive(Parser)]
#[command(
    name = "kernel-harmony",
    version,
    about = "Unpaired CT reconstruction-kernel harmonization with emphysema evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// JSON run configuration; missing fields take the study defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed override for this run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Compute device; this build is CPU-only.
    #[arg(long, global = true, default_value = "cpu")]
    device: String,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic four-domain phantom dataset.
    Phantom {
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory for images, masks and the manifest.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train the multipath model from a dataset manifest.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory for checkpoints, logs and metadata.
        #[arg(long)]
        out_dir: PathBuf,
        /// Training manifest CSV (overrides the config's dataset.manifest).
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Resume from a checkpoint written by a previous run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Harmonize volumes listed in a manifest using a trained checkpoint.
    Harmonize {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// CSV with columns volume_path,source_domain,target_domain.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Axial slices per generator batch.
        #[arg(long, default_value_t = harmonizer::DEFAULT_SLICE_BATCH)]
        batch_slices: usize,
    },
    /// Score emphysema (percent lung voxels below -950 HU) for a cohort.
    Emphysema {
        #[command(flatten)]
        common: CommonArgs,
        /// Cohort manifest CSV (volume, optional mask, covariates).
        #[arg(long)]
        manifest: PathBuf,
        /// Output scores CSV.
        #[arg(long)]
        out: PathBuf,
        /// Permit the threshold-based surrogate segmentation where no
        /// external mask is supplied (testing/demo only).
        #[arg(long)]
        allow_surrogate_mask: bool,
    },
    /// Fit the covariate linear model and run the per-covariate F tests on
    /// two score sets (before/after harmonization).
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        /// Scores CSV before harmonization.
        scores_before: PathBuf,
        /// Scores CSV after harmonization.
        scores_after: PathBuf,
        /// Output report JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a checkpoint.
    Info {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        // Machine-readable error channel: one JSON object on stderr.
        let kind = err
            .downcast_ref::<kernel_harmony::Error>()
            .map(error_kind)
            .unwrap_or("cli");
        let payload = serde_json::json!({
            "error": format!("{err:#}"),
            "kind": kind,
        });
        eprintln!("{payload}");
        std::process::exit(1);
    }
}

fn error_kind(err: &kernel_harmony::Error) -> &'static str {
    use kernel_harmony::Error::*;
    match err {
        Config(_) => "config",
        UnknownDomain(_) => "unknown-domain",
        Ingest { .. } => "ingest",
        Shape(_) => "shape",
        Checkpoint(_) => "checkpoint",
        NonFinite { .. } => "non-finite",
        Scoring(_) => "scoring",
        Collinear(_) => "collinear",
        Stats(_) => "stats",
        Io(_) => "io",
        Csv(_) => "csv",
        Json(_) => "json",
    }
}

fn check_device(common: &CommonArgs) -> Result<()> {
    if common.device != "cpu" {
        bail!(
            "device `{}` is not available in this build; only `cpu` is supported",
            common.device
        );
    }
    Ok(())
}

/// Every run records enough metadata to reproduce it.
fn write_run_meta(dir: &std::path::Path, command: &str, config: &RunConfig, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let meta = serde_json::json!({
        "command": command,
        "config_sha256": config.sha256()?,
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
    });
    std::fs::write(dir.join("run_meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Phantom { common, out_dir } => {
            check_device(&common)?;
            let mut config = RunConfig::load(common.config.as_deref())?;
            if let Some(seed) = common.seed {
                config.phantom.seed = seed;
            }
            println!("{}", config.echo()?);
            let registry = config.registry()?;
            let dataset = phantom::build_phantom_dataset(
                &config.phantom,
                &registry,
                &config.styles(),
                &out_dir,
            )?;
            write_run_meta(&out_dir, "phantom", &config, config.phantom.seed)?;
            println!(
                "wrote {} slices across {} domains; manifest at {}",
                dataset.entries.len(),
                registry.len(),
                dataset.manifest_path.display()
            );
            Ok(())
        }
        Command::Train { common, out_dir, manifest, resume } => {
            check_device(&common)?;
            let mut config = RunConfig::load(common.config.as_deref())?;
            if let Some(seed) = common.seed {
                config.train.seed = seed;
            }
            let manifest_path = manifest
                .or(config.dataset.manifest.clone())
                .context("no training manifest: pass --manifest or set dataset.manifest in the config")?;
            let manifest_path = resolve_dataset_path(&manifest_path);

            // Echo the effective configuration (defaults filled in).
            println!("{}", config.echo()?);

            let rows = trainer::read_training_manifest(&manifest_path)?;
            let plan = trainer::run_plan(rows.iter().map(|(d, _)| d.as_str()));
            println!(
                "run plan: {} training volumes across {} domains {:?}",
                plan.total_volumes,
                plan.per_domain.len(),
                plan.per_domain
            );

            let registry = config.registry()?;
            let datasets = harmonizer::load_domain_slices(&rows, &config.normalization, config.arch.input_size)?;
            let manifest_sha = file_sha256(&manifest_path)?;
            let mut opts = trainer::TrainOptions::new(
                config.arch,
                config.train,
                config.loss,
                registry,
            );
            opts.norm = config.normalization;
            opts.resume = resume;
            opts.manifest_sha256 = Some(manifest_sha);

            write_run_meta(&out_dir, "train", &config, config.train.seed)?;
            std::fs::write(out_dir.join("config_echo.json"), config.echo()?)?;
            let report = trainer::train(&opts, &datasets, &out_dir)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Harmonize { common, checkpoint, manifest, out_dir, batch_slices } => {
            check_device(&common)?;
            let config = RunConfig::load(common.config.as_deref())?;
            if !checkpoint.exists() {
                bail!("checkpoint `{}` does not exist", checkpoint.display());
            }
            let entries = harmonizer::read_harmonize_manifest(&manifest)?;
            let report = harmonizer::batch_harmonize(
                &checkpoint,
                &entries,
                &config.normalization,
                &out_dir,
                batch_slices,
            )?;
            write_run_meta(&out_dir, "harmonize", &config, 0)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.failures.is_empty() {
                eprintln!(
                    "{}",
                    serde_json::json!({
                        "warning": format!("{} of {} volumes failed; see harmonize_report.json", report.failures.len(), entries.len()),
                    })
                );
            }
            Ok(())
        }
        Command::Emphysema { common, manifest, out, allow_surrogate_mask } => {
            check_device(&common)?;
            let config = RunConfig::load(common.config.as_deref())?;
            let entries = quantify::read_cohort_manifest(&manifest)?;
            let (records, failures) =
                quantify::score_cohort(&entries, &config.normalization, allow_surrogate_mask);
            if let Some(parent) = out.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            quantify::write_records_csv(&records, &out)?;
            let meta = serde_json::json!({
                "command": "emphysema",
                "config_sha256": config.sha256()?,
                "manifest": manifest,
                "scored": records.len(),
                "failed": failures.len(),
                "failures": failures,
                "allow_surrogate_mask": allow_surrogate_mask,
                "version": env!("CARGO_PKG_VERSION"),
            });
            std::fs::write(
                out.with_extension("meta.json"),
                serde_json::to_string_pretty(&meta)?,
            )?;
            println!("scored {} subjects ({} failures) -> {}", records.len(), failures.len(), out.display());
            if !failures.is_empty() {
                eprintln!("{}", serde_json::json!({ "warning": "some entries failed", "failures": failures }));
            }
            Ok(())
        }
        Command::Analyze { common, scores_before, scores_after, out } => {
            check_device(&common)?;
            let config = RunConfig::load(common.config.as_deref())?;
            let before = quantify::read_records_csv(&scores_before)?;
            let after = quantify::read_records_csv(&scores_after)?;
            let fit_before = stats::fit_linear_model(&before)?;
            let fit_after = stats::fit_linear_model(&after)?;
            let comparison = stats::compare_conditions(&fit_before, &fit_after);
            print!("{}", stats::render_comparison(&comparison));
            let report = serde_json::json!({
                "before": fit_summary(&fit_before),
                "after": fit_summary(&fit_after),
                "comparison": comparison,
                "significance_level": stats::SIGNIFICANCE_LEVEL,
                "config_sha256": config.sha256()?,
                "version": env!("CARGO_PKG_VERSION"),
            });
            if let Some(out) = out {
                if let Some(parent) = out.parent() {
                    if !parent.as_os_str().is_empty() {
                        std::fs::create_dir_all(parent)?;
                    }
                }
                std::fs::write(&out, serde_json::to_string_pretty(&report)?)?;
                println!("report written to {}", out.display());
            } else {
                println!("{}", serde_json::to_string_pretty(&report)?);
            }
            Ok(())
        }
        Command::Info { common, checkpoint } => {
            check_device(&common)?;
            let summary = harmonizer::inspect_checkpoint(&checkpoint)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
    }
}

fn fit_summary(fit: &stats::RegressionResult) -> serde_json::Value {
    serde_json::json!({
        "beta": fit.beta,
        "std_errors": fit.std_errors,
        "n": fit.n,
        "rss": fit.rss,
        "anova": fit.anova,
    })
}

fn file_sha256(path: &std::path::Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

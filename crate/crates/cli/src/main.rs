//! Command-line pipeline: generate → calibrate → train → evaluate → predict
//! → report. Every command is driven by one JSON run configuration; flags
//! override file values, and all randomness flows from the three named seeds.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use micropump_core::bench;
use micropump_core::calibrate::{calibrate_corrections, Dispenser};
use micropump_core::config::RunConfig;
use micropump_core::dataset::{Dataset, Split};
use micropump_core::pipeline::{train_pipeline, ClusterModel, ModeSelection};
use micropump_core::plant::SWEEP_HI;
use micropump_core::pump::overlap_time;
use micropump_core::rbf::RbfModel;
use micropump_core::report::evaluate;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "micropump",
    version,
    about = "Overlap-angle optimization for a constant-flow parallel micropump"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides all three named seeds (plant, data, train).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "run")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Weights,
    Centers,
    Both,
}

impl From<ModeArg> for ModeSelection {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::Weights => ModeSelection::Weights,
            ModeArg::Centers => ModeSelection::Centers,
            ModeArg::Both => ModeSelection::Both,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the labeled dataset and its manifest.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Recover the flow and pressure correction constants from the
    /// simulated dispenser and compare them to the configured table.
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
        /// Relative measurement noise of one dispenser run (0 disables it).
        #[arg(long, default_value_t = 5e-4)]
        noise_rel: f64,
    },
    /// Cluster the training split and run the supervised phase.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Dataset CSV produced by `generate`.
        #[arg(long)]
        data: PathBuf,
        /// Which supervised mode(s) to run.
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        /// Number of hidden nodes (cluster count).
        #[arg(long)]
        k: Option<usize>,
    },
    /// Compare the two benchmarks and the two trained models per cluster.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Dataset CSV with the test split.
        #[arg(long)]
        data: PathBuf,
        /// Directory holding model_weights.json, model_centers.json, and
        /// clusters.json (defaults to --out).
        #[arg(long)]
        models: Option<PathBuf>,
        /// Fixed benchmark overlap angle in degrees.
        #[arg(long)]
        fixed_angle: Option<f64>,
    },
    /// Predict overlap angles from feature values or a CSV of feature rows.
    Predict {
        /// Model file.
        #[arg(long)]
        model: PathBuf,
        /// One feature vector "mu,back_pressure,omega,valve_flow".
        #[arg(long, conflicts_with = "input")]
        features: Option<String>,
        /// CSV of feature rows (same four columns, optional header).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Reciprocating period in seconds; adds the overlap-time column.
        #[arg(long)]
        period: Option<f64>,
    },
    /// Full pipeline: generate, train both modes, evaluate, write all
    /// artifacts.
    Report {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of hidden nodes (cluster count).
        #[arg(long)]
        k: Option<usize>,
    },
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.override_seed(seed);
    }
    Ok(config)
}

fn cmd_generate(common: &CommonArgs) -> Result<()> {
    let config = load_config(common)?;
    config.validate()?;
    let plant = config.seeded_plant();
    let dataset = micropump_core::dataset::generate_dataset(
        &plant,
        &config.grid,
        &config.pump,
        &config.corrections,
        config.lambda_f_sign,
        config.seeds.data,
    )?;
    bench::write_dataset_artifacts(&config, &dataset, &common.out)?;
    let (train, val, test) = dataset.split_counts();
    println!(
        "wrote {} ({train}/{val}/{test} train/val/test) and manifest.json",
        common.out.join("dataset.csv").display()
    );
    Ok(())
}

fn cmd_calibrate(common: &CommonArgs, noise_rel: f64) -> Result<()> {
    let config = load_config(common)?;
    config.validate()?;
    let dispenser = Dispenser {
        noise_rel_sd: noise_rel,
        seed: config.seeds.plant,
        lambda_f_sign: config.lambda_f_sign,
        ..Dispenser::new(config.pump.clone(), config.corrections.clone())
    };
    let report = calibrate_corrections(&dispenser, &config.corrections)?;

    std::fs::create_dir_all(&common.out)?;
    let mut csv = String::from("band_lo_MPa,band_hi_MPa,f_ref,f_recovered,f_delta,z_ref,z_recovered,z_delta,z_raw\n");
    for band in &report.bands {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            band.lo,
            band.hi,
            band.f_ref,
            band.f_recovered,
            band.f_recovered - band.f_ref,
            band.z_ref,
            band.z_recovered,
            band.z_recovered - band.z_ref,
            band.z_raw,
        ));
    }
    std::fs::write(common.out.join("calibration.csv"), csv)?;
    let table = report.recovered_table();
    let mut text = serde_json::to_string_pretty(&table)?;
    text.push('\n');
    std::fs::write(common.out.join("corrections.json"), text)?;

    println!("{:>10}  {:>6}  {:>6}  {:>6}  {:>6}", "band (MPa)", "F ref", "F rec", "Z ref", "Z rec");
    for band in &report.bands {
        println!(
            "{:>4} - {:>3}  {:>6.0}  {:>6.0}  {:>6.0}  {:>6.0}",
            band.lo, band.hi, band.f_ref, band.f_recovered, band.z_ref, band.z_recovered
        );
    }
    let max_delta = report.max_z_delta();
    println!("max |ΔZ| = {max_delta:.4}");
    if max_delta > 1.0 {
        bail!("calibration drifted by more than one unit (max |ΔZ| = {max_delta:.4})");
    }
    Ok(())
}

fn cmd_train(common: &CommonArgs, data: &Path, mode: ModeArg, k: Option<usize>) -> Result<()> {
    let mut config = load_config(common)?;
    if let Some(k) = k {
        config.clustering.k = k;
    }
    config.validate()?;
    let dataset = Dataset::read_csv(data)?;
    let outcome = train_pipeline(
        &dataset,
        &config.clustering,
        &config.train_weights,
        &config.train_centers,
        mode.into(),
        config.seeds.train,
    )?;
    bench::write_training_artifacts(&outcome, &dataset, &common.out)?;
    println!(
        "clustering: k = {}, {} iterations, quantization error {:.4}",
        config.clustering.k,
        outcome.cluster_model.result.iterations,
        outcome.cluster_model.result.quantization_error
    );
    for (name, report) in [
        ("weights_bias", &outcome.weights_report),
        ("centers", &outcome.centers_report),
    ] {
        if let Some(report) = report {
            println!(
                "{name}: best epoch {} of {}, train loss {:.4}, val loss {:.4}{}",
                report.best_epoch,
                report.train_loss.len() - 1,
                report.train_loss[report.best_epoch],
                report.val_loss[report.best_epoch],
                if report.converged { "" } else { " (epoch budget exhausted)" },
            );
        }
    }
    println!("artifacts in {}", common.out.display());
    Ok(())
}

fn cmd_evaluate(
    common: &CommonArgs,
    data: &Path,
    models: Option<&Path>,
    fixed_angle: Option<f64>,
) -> Result<()> {
    let config = load_config(common)?;
    config.validate()?;
    let models = models.unwrap_or(&common.out);
    let dataset = Dataset::read_csv(data)?;
    let model_w = RbfModel::load(&models.join("model_weights.json"))?;
    let model_c = RbfModel::load(&models.join("model_centers.json"))?;
    let clusters = ClusterModel::load(&models.join("clusters.json"))?;
    let plant = config.seeded_plant();
    let report = evaluate(
        &model_w,
        &model_c,
        &dataset.of_split(Split::Test),
        &plant,
        &clusters,
        fixed_angle.unwrap_or(config.eval.fixed_angle),
    )?;
    bench::write_evaluation_artifacts(&report, &common.out)?;
    print!("{}", report.drops_table());
    println!();
    print!("{}", report.angles_table());
    println!("artifacts in {}", common.out.display());
    Ok(())
}

fn parse_feature_row(line: &str, origin: &str, lineno: usize) -> Result<[f64; 4]> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 4 {
        bail!("{origin}:{lineno}: expected 4 features (mu, back_pressure, omega, valve_flow), got {}", fields.len());
    }
    let mut row = [0.0; 4];
    for (i, field) in fields.iter().enumerate() {
        row[i] = field
            .trim()
            .parse::<f64>()
            .with_context(|| format!("{origin}:{lineno}: field {}: {:?}", i + 1, field))?;
    }
    Ok(row)
}

fn cmd_predict(model: &Path, features: Option<&str>, input: Option<&Path>, period: Option<f64>) -> Result<()> {
    let model = RbfModel::load(model)?;
    let mut rows: Vec<[f64; 4]> = Vec::new();
    match (features, input) {
        (Some(text), None) => rows.push(parse_feature_row(text, "--features", 1)?),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            let origin = path.display().to_string();
            for (i, line) in text.lines().enumerate() {
                if line.is_empty() {
                    continue;
                }
                // skip a header row
                if i == 0 && line.split(',').any(|f| f.trim().parse::<f64>().is_err()) {
                    continue;
                }
                rows.push(parse_feature_row(line, &origin, i + 1)?);
            }
            if rows.is_empty() {
                bail!("{origin}: no feature rows");
            }
        }
        _ => bail!("provide exactly one of --features or --input"),
    }

    match period {
        Some(period) => {
            println!("angle_deg,overlap_time_s");
            for row in &rows {
                let angle = model.forward(row)?.clamp(0.0, SWEEP_HI);
                println!("{:.4},{:.4}", angle, overlap_time(period, angle)?);
            }
        }
        None => {
            println!("angle_deg");
            for row in &rows {
                println!("{:.4}", model.forward(row)?.clamp(0.0, SWEEP_HI));
            }
        }
    }
    Ok(())
}

fn cmd_report(common: &CommonArgs, k: Option<usize>) -> Result<()> {
    let mut config = load_config(common)?;
    if let Some(k) = k {
        config.clustering.k = k;
    }
    config.validate()?;
    let run = bench::run_and_write(&config, &common.out)?;
    let (train, val, test) = run.dataset.split_counts();
    println!("dataset: {train}/{val}/{test} train/val/test");
    println!();
    print!("{}", run.report.drops_table());
    println!();
    print!("{}", run.report.angles_table());
    println!("artifacts in {}", common.out.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Generate { common } => cmd_generate(common),
        Command::Calibrate { common, noise_rel } => cmd_calibrate(common, *noise_rel),
        Command::Train { common, data, mode, k } => cmd_train(common, data, *mode, *k),
        Command::Evaluate { common, data, models, fixed_angle } => {
            cmd_evaluate(common, data, models.as_deref(), *fixed_angle)
        }
        Command::Predict { model, features, input, period } => {
            cmd_predict(model, features.as_deref(), input.as_deref(), *period)
        }
        Command::Report { common, k } => cmd_report(common, *k),
    }
}

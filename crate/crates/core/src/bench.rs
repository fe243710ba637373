//! One-call benchmark run: generate the dataset, train both modes from one
//! clustering, evaluate the four strategies, and write every artifact to a
//! run directory. Identical seeds reproduce every file byte for byte.

use crate::config::{Manifest, RunConfig};
use crate::dataset::{generate_dataset, Dataset, Split};
use crate::error::Result;
use crate::pipeline::{train_pipeline, ModeSelection, TrainOutcome};
use crate::plant::PlantModel;
use crate::rbf::TrainMode;
use crate::report::{center_table, evaluate, ClusterReport};
use std::path::Path;

/// Everything a full benchmark run produces in memory.
pub struct BenchmarkRun {
    pub plant: PlantModel,
    pub dataset: Dataset,
    pub outcome: TrainOutcome,
    pub report: ClusterReport,
}

/// Runs generate → train (both modes) → evaluate from one configuration.
pub fn run_benchmark(config: &RunConfig) -> Result<BenchmarkRun> {
    config.validate()?;
    let plant = config.seeded_plant();
    let dataset = generate_dataset(
        &plant,
        &config.grid,
        &config.pump,
        &config.corrections,
        config.lambda_f_sign,
        config.seeds.data,
    )?;
    let outcome = train_pipeline(
        &dataset,
        &config.clustering,
        &config.train_weights,
        &config.train_centers,
        ModeSelection::Both,
        config.seeds.train,
    )?;
    let report = evaluate(
        outcome.model(TrainMode::WeightsBias).expect("weights mode ran"),
        outcome.model(TrainMode::Centers).expect("centers mode ran"),
        &dataset.of_split(Split::Test),
        &plant,
        &outcome.cluster_model,
        config.eval.fixed_angle,
    )?;
    Ok(BenchmarkRun {
        plant,
        dataset,
        outcome,
        report,
    })
}

/// Writes the dataset artifacts: `dataset.csv` and `manifest.json`.
pub fn write_dataset_artifacts(config: &RunConfig, dataset: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    dataset.write_csv(&dir.join("dataset.csv"))?;
    Manifest::of(config).save(&dir.join("manifest.json"))?;
    Ok(())
}

/// Writes the training artifacts: model files, the clustering, loss
/// histories, and the raw-unit center table.
pub fn write_training_artifacts(outcome: &TrainOutcome, dataset: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    outcome.cluster_model.save(&dir.join("clusters.json"))?;
    outcome.init.save(&dir.join("model_init.json"))?;

    let mut trained = Vec::new();
    if let Some(report) = &outcome.weights_report {
        report.model.save(&dir.join("model_weights.json"))?;
        std::fs::write(dir.join("train_report_weights.csv"), report.losses_csv())?;
        let mut text = serde_json::to_string_pretty(report)?;
        text.push('\n');
        std::fs::write(dir.join("train_report_weights.json"), text)?;
        trained.push(("supervised weights and bias", &report.model));
    }
    if let Some(report) = &outcome.centers_report {
        report.model.save(&dir.join("model_centers.json"))?;
        std::fs::write(dir.join("train_report_centers.csv"), report.losses_csv())?;
        let mut text = serde_json::to_string_pretty(report)?;
        text.push('\n');
        std::fs::write(dir.join("train_report_centers.json"), text)?;
        trained.push(("supervised center locations", &report.model));
    }

    let table = center_table(&outcome.cluster_model, &trained, &dataset.features(Split::Train))?;
    std::fs::write(dir.join("centers.txt"), table)?;
    Ok(())
}

/// Writes the evaluation artifacts: the human-readable report plus the
/// full-precision drop and angle tables.
pub fn write_evaluation_artifacts(report: &ClusterReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut text = String::new();
    text.push_str("Averaged pressure drop at the shifting point per cluster (MPa)\n\n");
    text.push_str(&report.drops_table());
    text.push_str("\nAveraged predicted overlap angle per cluster (degrees)\n\n");
    text.push_str(&report.angles_table());
    std::fs::write(dir.join("report.txt"), text)?;
    std::fs::write(dir.join("drops.csv"), report.drops_csv())?;
    std::fs::write(dir.join("angles.csv"), report.angles_csv())?;
    Ok(())
}

/// Full pipeline with artifacts: the `report` command and the acceptance
/// suite call this.
pub fn run_and_write(config: &RunConfig, dir: &Path) -> Result<BenchmarkRun> {
    let run = run_benchmark(config)?;
    write_dataset_artifacts(config, &run.dataset, dir)?;
    write_training_artifacts(&run.outcome, &run.dataset, dir)?;
    write_evaluation_artifacts(&run.report, dir)?;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::GridConfig;

    fn quick_config() -> RunConfig {
        let mut config = RunConfig::default();
        config.grid = GridConfig {
            n_points: 120,
            split: (90, 15, 15),
            ..GridConfig::default()
        };
        config.train_weights.epochs = 15;
        config.train_centers.epochs = 15;
        config
    }

    #[test]
    fn full_run_writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let run = run_and_write(&quick_config(), dir.path()).unwrap();
        for name in [
            "dataset.csv",
            "manifest.json",
            "clusters.json",
            "model_init.json",
            "model_weights.json",
            "model_centers.json",
            "train_report_weights.csv",
            "train_report_weights.json",
            "train_report_centers.csv",
            "train_report_centers.json",
            "centers.txt",
            "report.txt",
            "drops.csv",
            "angles.csv",
        ] {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
        assert_eq!(run.dataset.split_counts(), (90, 15, 15));
    }

    #[test]
    fn identical_seeds_reproduce_identical_bytes() {
        let config = quick_config();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_and_write(&config, a.path()).unwrap();
        run_and_write(&config, b.path()).unwrap();
        for name in ["dataset.csv", "model_weights.json", "model_centers.json", "drops.csv"] {
            let x = std::fs::read(a.path().join(name)).unwrap();
            let y = std::fs::read(b.path().join(name)).unwrap();
            assert_eq!(x, y, "{name} differs");
        }
    }
}

//! Benchmark evaluation: per-cluster averaged pressure drops for the two
//! benchmarks (no overlap, fixed angle) and the two trained models, plus the
//! averaged-angle table and the raw-unit center table.

use crate::error::{Error, Result};
use crate::pipeline::ClusterModel;
use crate::plant::{LabeledPoint, PlantModel, SWEEP_HI};
use crate::rbf::{RbfModel, FEATURE_NAMES};
use serde::{Deserialize, Serialize};

/// Default benchmark overlap angle, degrees.
pub const DEFAULT_FIXED_ANGLE: f64 = 30.0;

/// Mean measured pulse per strategy within one cluster, MPa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyDrops {
    pub none: f64,
    pub fixed: f64,
    pub weights: f64,
    pub centers: f64,
}

/// One cluster's row of the comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub cluster: usize,
    pub count: usize,
    /// `None` marks a cluster with no test points.
    pub drops: Option<StrategyDrops>,
    pub mean_angle_weights: Option<f64>,
    pub mean_angle_centers: Option<f64>,
}

/// The full per-cluster comparison of benchmarks and trained models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub fixed_angle: f64,
    pub rows: Vec<ClusterRow>,
}

fn clamp_angle(angle: f64) -> f64 {
    angle.clamp(0.0, SWEEP_HI)
}

/// Buckets the test points by the trained clustering and measures the plant's
/// pulse under each strategy: no overlap, the fixed benchmark angle, and the
/// two models' predicted angles (clamped into the plant's admissible range).
pub fn evaluate(
    model_weights: &RbfModel,
    model_centers: &RbfModel,
    test: &[&LabeledPoint],
    plant: &PlantModel,
    clusters: &ClusterModel,
    fixed_angle: f64,
) -> Result<ClusterReport> {
    if test.is_empty() {
        return Err(Error::domain("evaluate", "test split is empty"));
    }
    if !(0.0..=SWEEP_HI).contains(&fixed_angle) {
        return Err(Error::domain(
            "evaluate",
            format!("fixed benchmark angle {fixed_angle}° outside [0, {SWEEP_HI}]"),
        ));
    }
    if model_weights.scaler != clusters.scaler || model_centers.scaler != clusters.scaler {
        return Err(Error::domain(
            "evaluate",
            "models and clustering were fitted with different scalers",
        ));
    }

    let k = clusters.result.centers.len();
    let mut sums = vec![[0.0; 4]; k];
    let mut angle_sums = vec![[0.0; 2]; k];
    let mut counts = vec![0usize; k];

    for lp in test {
        let features = lp.point.features();
        let cluster = clusters.assign(&features, lp.optimal_angle)?;
        let angle_w = clamp_angle(model_weights.forward(&features)?);
        let angle_c = clamp_angle(model_centers.forward(&features)?);
        let pulses = [
            plant.simulate_pulse(&lp.point, 0.0)?,
            plant.simulate_pulse(&lp.point, fixed_angle)?,
            plant.simulate_pulse(&lp.point, angle_w)?,
            plant.simulate_pulse(&lp.point, angle_c)?,
        ];
        for (s, p) in sums[cluster].iter_mut().zip(pulses) {
            *s += p;
        }
        angle_sums[cluster][0] += angle_w;
        angle_sums[cluster][1] += angle_c;
        counts[cluster] += 1;
    }

    let rows = (0..k)
        .map(|j| {
            let n = counts[j];
            if n == 0 {
                ClusterRow {
                    cluster: j,
                    count: 0,
                    drops: None,
                    mean_angle_weights: None,
                    mean_angle_centers: None,
                }
            } else {
                let nf = n as f64;
                ClusterRow {
                    cluster: j,
                    count: n,
                    drops: Some(StrategyDrops {
                        none: sums[j][0] / nf,
                        fixed: sums[j][1] / nf,
                        weights: sums[j][2] / nf,
                        centers: sums[j][3] / nf,
                    }),
                    mean_angle_weights: Some(angle_sums[j][0] / nf),
                    mean_angle_centers: Some(angle_sums[j][1] / nf),
                }
            }
        })
        .collect();

    Ok(ClusterReport { fixed_angle, rows })
}

fn fmt_cell(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.4}"),
        None => "n/a".into(),
    }
}

impl ClusterReport {
    /// Aligned text table of the four strategies, strategy columns in
    /// benchmark-then-trained order.
    pub fn drops_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>7}  {:>5}  {:>12}  {:>12}  {:>12}  {:>12}\n",
            "cluster", "n", "none", format!("fixed-{:.0}", self.fixed_angle), "weights", "centers"
        ));
        for row in &self.rows {
            let d = row.drops;
            out.push_str(&format!(
                "{:>7}  {:>5}  {:>12}  {:>12}  {:>12}  {:>12}\n",
                row.cluster + 1,
                row.count,
                fmt_cell(d.map(|d| d.none)),
                fmt_cell(d.map(|d| d.fixed)),
                fmt_cell(d.map(|d| d.weights)),
                fmt_cell(d.map(|d| d.centers)),
            ));
        }
        out
    }

    /// Aligned text table of per-cluster mean predicted angles.
    pub fn angles_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>7}  {:>16}  {:>16}\n",
            "cluster", "angle_weights", "angle_centers"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:>7}  {:>16}  {:>16}\n",
                row.cluster + 1,
                fmt_cell(row.mean_angle_weights),
                fmt_cell(row.mean_angle_centers),
            ));
        }
        out
    }

    /// Full-precision CSV of the drop comparison (the plottable output:
    /// cluster index against the four strategies).
    pub fn drops_csv(&self) -> String {
        let mut out = String::from("cluster,count,drop_none_MPa,drop_fixed_MPa,drop_weights_MPa,drop_centers_MPa\n");
        for row in &self.rows {
            match row.drops {
                Some(d) => out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    row.cluster + 1,
                    row.count,
                    d.none,
                    d.fixed,
                    d.weights,
                    d.centers
                )),
                None => out.push_str(&format!("{},0,,,,\n", row.cluster + 1)),
            }
        }
        out
    }

    /// Full-precision CSV of the averaged predicted angles.
    pub fn angles_csv(&self) -> String {
        let mut out = String::from("cluster,count,mean_angle_weights_deg,mean_angle_centers_deg\n");
        for row in &self.rows {
            match (row.mean_angle_weights, row.mean_angle_centers) {
                (Some(w), Some(c)) => {
                    out.push_str(&format!("{},{},{},{}\n", row.cluster + 1, row.count, w, c))
                }
                _ => out.push_str(&format!("{},0,,\n", row.cluster + 1)),
            }
        }
        out
    }
}

/// Raw-unit center table: one row per center, four features plus the angle
/// coordinate.
///
/// For the unsupervised block the angle coordinate is the joint center's
/// fifth component. For a centers-trained model the forward pass gives the
/// angle coordinate no gradient path, so it is re-reported as the mean model
/// prediction over the training points assigned to each trained center.
pub fn center_table(
    clusters: &ClusterModel,
    trained: &[(&str, &RbfModel)],
    train_features: &[Vec<f64>],
) -> Result<String> {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>6}  {:>12}  {:>18}  {:>14}  {:>18}  {:>10}\n",
        "center", FEATURE_NAMES[0], FEATURE_NAMES[1], FEATURE_NAMES[2], FEATURE_NAMES[3], "angle_deg"
    ));
    out.push_str("k-means clustering:\n");
    for (j, row) in clusters.centers_raw().iter().enumerate() {
        out.push_str(&format!(
            "{:>6}  {:>12.4}  {:>18.4}  {:>14.4}  {:>18.4}  {:>10.4}\n",
            j + 1,
            row[0],
            row[1],
            row[2],
            row[3],
            row[4]
        ));
    }

    for (label, model) in trained {
        out.push_str(&format!("{label}:\n"));
        let raw = model.centers_raw();
        // bucket training points by nearest trained center in input space
        let zs: Vec<Vec<f64>> = train_features
            .iter()
            .map(|x| model.scaler.transform(x))
            .collect::<Result<_>>()?;
        let assignments = crate::cluster::assign_all(&zs, &model.centers);
        let mut sums = vec![0.0; model.k];
        let mut counts = vec![0usize; model.k];
        for (x, &a) in train_features.iter().zip(&assignments) {
            sums[a] += model.forward(x)?;
            counts[a] += 1;
        }
        for (j, row) in raw.iter().enumerate() {
            let angle = if counts[j] > 0 {
                format!("{:>10.4}", sums[j] / counts[j] as f64)
            } else {
                format!("{:>10}", "n/a")
            };
            out.push_str(&format!(
                "{:>6}  {:>12.4}  {:>18.4}  {:>14.4}  {:>18.4}  {angle}\n",
                j + 1,
                row[0],
                row[1],
                row[2],
                row[3]
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_dataset, Dataset, GridConfig, Split};
    use crate::pipeline::{train_pipeline, ClusterOptions, ModeSelection};
    use crate::plant::PlantModel;
    use crate::pump::{CorrectionTable, PumpParameters};
    use crate::rbf::TrainMode;
    use crate::train::TrainConfig;

    fn setup() -> (Dataset, PlantModel, crate::pipeline::TrainOutcome) {
        let plant = PlantModel { seed: 4, ..PlantModel::default() };
        let grid = GridConfig {
            n_points: 150,
            split: (110, 20, 20),
            ..GridConfig::default()
        };
        let dataset = generate_dataset(
            &plant,
            &grid,
            &PumpParameters::default(),
            &CorrectionTable::default(),
            1,
            4,
        )
        .unwrap();
        let outcome = train_pipeline(
            &dataset,
            &ClusterOptions::default(),
            &TrainConfig { epochs: 30, ..TrainConfig::default() },
            &TrainConfig { epochs: 30, ..TrainConfig::default() },
            ModeSelection::Both,
            4,
        )
        .unwrap();
        (dataset, plant, outcome)
    }

    #[test]
    fn no_overlap_column_matches_direct_recomputation() {
        let (dataset, plant, outcome) = setup();
        let test = dataset.of_split(Split::Test);
        let report = evaluate(
            outcome.model(TrainMode::WeightsBias).unwrap(),
            outcome.model(TrainMode::Centers).unwrap(),
            &test,
            &plant,
            &outcome.cluster_model,
            DEFAULT_FIXED_ANGLE,
        )
        .unwrap();

        // independent re-summation of the "none" strategy
        let k = outcome.cluster_model.result.centers.len();
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for lp in &test {
            let j = outcome
                .cluster_model
                .assign(&lp.point.features(), lp.optimal_angle)
                .unwrap();
            sums[j] += plant.simulate_pulse(&lp.point, 0.0).unwrap();
            counts[j] += 1;
        }
        for row in &report.rows {
            match row.drops {
                Some(d) => {
                    let expected = sums[row.cluster] / counts[row.cluster] as f64;
                    assert!((d.none - expected).abs() < 1e-12);
                }
                None => assert_eq!(counts[row.cluster], 0),
            }
        }
    }

    #[test]
    fn perfect_predictions_land_on_the_residual_floor() {
        let (dataset, plant, outcome) = setup();
        let test = dataset.of_split(Split::Test);
        // oracle strategy: feed the latent optimum itself
        let mut worst = 0.0_f64;
        for lp in &test {
            let theta = plant.latent_optimal_angle(&lp.point).unwrap();
            let pulse = plant.simulate_pulse(&lp.point, theta).unwrap();
            worst = worst.max(pulse);
        }
        // floor band plus decay tail plus noise
        assert!(worst < 0.25 + 0.1 + 0.5, "worst oracle pulse {worst}");
        let _ = outcome;
    }

    #[test]
    fn empty_cluster_renders_as_no_data() {
        let (dataset, plant, outcome) = setup();
        // evaluating a single test point leaves most clusters empty
        let test = dataset.of_split(Split::Test);
        let one = vec![test[0]];
        let report = evaluate(
            outcome.model(TrainMode::WeightsBias).unwrap(),
            outcome.model(TrainMode::Centers).unwrap(),
            &one,
            &plant,
            &outcome.cluster_model,
            DEFAULT_FIXED_ANGLE,
        )
        .unwrap();
        assert!(report.rows.iter().any(|r| r.drops.is_none()));
        assert!(report.drops_table().contains("n/a"));
        assert!(report.drops_csv().contains(",0,,,,\n"));
    }

    #[test]
    fn column_order_is_benchmarks_then_trained() {
        let (dataset, plant, outcome) = setup();
        let test = dataset.of_split(Split::Test);
        let report = evaluate(
            outcome.model(TrainMode::WeightsBias).unwrap(),
            outcome.model(TrainMode::Centers).unwrap(),
            &test,
            &plant,
            &outcome.cluster_model,
            DEFAULT_FIXED_ANGLE,
        )
        .unwrap();
        let header = report.drops_csv().lines().next().unwrap().to_string();
        assert_eq!(
            header,
            "cluster,count,drop_none_MPa,drop_fixed_MPa,drop_weights_MPa,drop_centers_MPa"
        );
        let table = report.drops_table();
        assert!(table.contains("fixed-30"));
    }

    #[test]
    fn center_table_has_five_raw_columns_per_row() {
        let (dataset, _, outcome) = setup();
        let table = center_table(
            &outcome.cluster_model,
            &[
                ("supervised weights and bias", outcome.model(TrainMode::WeightsBias).unwrap()),
                ("supervised center locations", outcome.model(TrainMode::Centers).unwrap()),
            ],
            &dataset.features(Split::Train),
        )
        .unwrap();
        // header + 3 section labels + 3 × 5 rows
        assert_eq!(table.lines().count(), 1 + 3 + 15);
    }
}

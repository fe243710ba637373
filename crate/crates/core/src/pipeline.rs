//! Orchestration of the hybrid pipeline: feature scaling, joint-space
//! clustering of the training split, model initialization, and the two
//! supervised modes, with a persistable clustering artifact so evaluation can
//! bucket test points the same way.

use crate::cluster::{kmeans, ClusterResult};
use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::rbf::{FeatureScaler, RbfModel, TrainMode};
use crate::train::{initialize_model, train, TrainConfig, TrainReport};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Clustering options of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterOptions {
    pub k: usize,
    pub restarts: usize,
    pub max_iter: usize,
    /// Relative leverage of the five standardized joint coordinates
    /// [μ, P, ω, Q, angle] in the clustering metric. Equal weights slice the
    /// partition along the pressure/angle axis, which the strongly
    /// pressure-coupled latent law turns into badly unbalanced working
    /// pressures per cluster; the defaults damp that axis enough to keep the
    /// clusters pressure-balanced while the angle stays informative.
    pub space_weights: [f64; 5],
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            k: 5,
            restarts: 10,
            max_iter: 200,
            space_weights: [1.0, 1.0, 1.0, 1.0, 1.0],
        }
    }
}

pub const CLUSTER_FORMAT_VERSION: u32 = 1;

/// The persisted unsupervised phase: the fitted scaler, the joint-space
/// convention, and the winning clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterModel {
    pub format_version: u32,
    pub scaler: FeatureScaler,
    /// (mean, sd) of the angle coordinate in the joint space.
    pub angle_scaling: (f64, f64),
    /// Coordinate weights of the clustering metric.
    pub space_weights: [f64; 5],
    pub result: ClusterResult,
}

impl ClusterModel {
    /// Maps a labeled point into the joint clustering space.
    pub fn joint_vector(&self, features: &[f64], angle: f64) -> Result<Vec<f64>> {
        let mut v = self.scaler.transform(features)?;
        for (z, w) in v.iter_mut().zip(&self.space_weights) {
            *z *= w;
        }
        let (mean, sd) = self.angle_scaling;
        v.push((angle - mean) / sd * self.space_weights[4]);
        Ok(v)
    }

    /// The joint centers' input-subspace coordinates in plain standardized
    /// units (clustering weights removed); these seed the network centers.
    pub fn centers_standardized(&self) -> Vec<Vec<f64>> {
        let dim = self.scaler.dim();
        self.result
            .centers
            .iter()
            .map(|c| {
                c[..dim]
                    .iter()
                    .zip(&self.space_weights)
                    .map(|(v, w)| v / w)
                    .collect()
            })
            .collect()
    }

    /// Cluster index of a labeled point (nearest joint center).
    pub fn assign(&self, features: &[f64], angle: f64) -> Result<usize> {
        let v = self.joint_vector(features, angle)?;
        Ok(crate::cluster::assign_all(std::slice::from_ref(&v), &self.result.centers)[0])
    }

    /// Joint centers mapped back to raw units: four raw features plus the
    /// angle coordinate in degrees.
    pub fn centers_raw(&self) -> Vec<Vec<f64>> {
        let dim = self.scaler.dim();
        let (mean, sd) = self.angle_scaling;
        self.result
            .centers
            .iter()
            .zip(self.centers_standardized())
            .map(|(joint, std)| {
                let mut row = self.scaler.inverse_transform(&std).expect("center dims match scaler");
                row.push(joint[dim] / self.space_weights[4] * sd + mean);
                row
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let model: ClusterModel = serde_json::from_str(&text)
            .map_err(|e| Error::ModelFile(format!("{}: {e}", path.display())))?;
        if model.format_version != CLUSTER_FORMAT_VERSION {
            return Err(Error::ModelFile(format!(
                "{}: unsupported cluster format version {} (expected {})",
                path.display(),
                model.format_version,
                CLUSTER_FORMAT_VERSION
            )));
        }
        Ok(model)
    }
}

/// Fits the scaler on the training split and clusters the joint
/// (features, angle) points.
pub fn cluster_training_split(
    dataset: &Dataset,
    options: &ClusterOptions,
    seed: u64,
) -> Result<(ClusterModel, Vec<Vec<f64>>)> {
    let features = dataset.features(Split::Train);
    let angles = dataset.angles(Split::Train);
    if features.len() < options.k {
        return Err(Error::domain(
            "clustering",
            format!("training split has {} points, need at least k = {}", features.len(), options.k),
        ));
    }
    let scaler = FeatureScaler::fit(&features)?;
    if options.space_weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Config(format!(
            "clustering space weights must all be > 0 (the clustering is joint over inputs and angle), got {:?}",
            options.space_weights
        )));
    }
    let angle_scaling = {
        let n = angles.len() as f64;
        let mean = angles.iter().sum::<f64>() / n;
        let var = angles.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        if !(sd > 0.0) {
            return Err(Error::Calibration("label angles are constant over the training split".into()));
        }
        (mean, sd)
    };

    let partial = ClusterModel {
        format_version: CLUSTER_FORMAT_VERSION,
        scaler,
        angle_scaling,
        space_weights: options.space_weights,
        result: ClusterResult {
            centers: Vec::new(),
            assignments: Vec::new(),
            iterations: 0,
            quantization_error: 0.0,
            within_ss: 0.0,
            converged: false,
            restart: 0,
        },
    };
    let joint: Vec<Vec<f64>> = features
        .iter()
        .zip(&angles)
        .map(|(f, &a)| partial.joint_vector(f, a))
        .collect::<Result<_>>()?;

    let result = kmeans(&joint, options.k, seed, options.restarts, options.max_iter)?;
    let model = ClusterModel { result, ..partial };
    Ok((model, joint))
}

/// Everything produced by one training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub cluster_model: ClusterModel,
    /// The least-squares-initialized model shared by both modes.
    pub init: RbfModel,
    pub weights_report: Option<TrainReport>,
    pub centers_report: Option<TrainReport>,
}

impl TrainOutcome {
    pub fn model(&self, mode: TrainMode) -> Option<&RbfModel> {
        match mode {
            TrainMode::WeightsBias => self.weights_report.as_ref().map(|r| &r.model),
            TrainMode::Centers => self.centers_report.as_ref().map(|r| &r.model),
        }
    }
}

/// Which supervised modes to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSelection {
    Weights,
    Centers,
    Both,
}

impl ModeSelection {
    pub fn runs_weights(self) -> bool {
        matches!(self, ModeSelection::Weights | ModeSelection::Both)
    }

    pub fn runs_centers(self) -> bool {
        matches!(self, ModeSelection::Centers | ModeSelection::Both)
    }
}

/// Runs the unsupervised phase once and the selected supervised modes from
/// the shared initialization.
pub fn train_pipeline(
    dataset: &Dataset,
    cluster_options: &ClusterOptions,
    weights_config: &TrainConfig,
    centers_config: &TrainConfig,
    selection: ModeSelection,
    seed: u64,
) -> Result<TrainOutcome> {
    let (cluster_model, _joint) = cluster_training_split(dataset, cluster_options, seed)?;
    if !cluster_model.result.converged {
        return Err(Error::Calibration(format!(
            "k-means did not converge within {} iterations",
            cluster_options.max_iter
        )));
    }

    let train_x = dataset.features(Split::Train);
    let train_y = dataset.angles(Split::Train);
    let val_x = dataset.features(Split::Val);
    let val_y = dataset.angles(Split::Val);

    let zs: Vec<Vec<f64>> = train_x
        .iter()
        .map(|x| cluster_model.scaler.transform(x))
        .collect::<Result<_>>()?;
    let centers = cluster_model.centers_standardized();
    let widths = crate::cluster::widths(&zs, &cluster_model.result.assignments, &centers, centers[0].len())?;
    let init = initialize_model(cluster_model.scaler.clone(), centers, widths, &zs, &train_y, seed)?;

    let weights_report = if selection.runs_weights() {
        let config = TrainConfig {
            mode: TrainMode::WeightsBias,
            seed,
            ..weights_config.clone()
        };
        Some(train(&init, &train_x, &train_y, &val_x, &val_y, &config)?)
    } else {
        None
    };
    let centers_report = if selection.runs_centers() {
        let config = TrainConfig { mode: TrainMode::Centers, seed, ..centers_config.clone() };
        Some(train(&init, &train_x, &train_y, &val_x, &val_y, &config)?)
    } else {
        None
    };

    Ok(TrainOutcome {
        cluster_model,
        init,
        weights_report,
        centers_report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_dataset, GridConfig};
    use crate::plant::PlantModel;
    use crate::pump::{CorrectionTable, PumpParameters};

    fn small_dataset(seed: u64) -> Dataset {
        let grid = GridConfig {
            n_points: 120,
            split: (90, 15, 15),
            ..GridConfig::default()
        };
        generate_dataset(
            &PlantModel { seed, ..PlantModel::default() },
            &grid,
            &PumpParameters::default(),
            &CorrectionTable::default(),
            1,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn pipeline_produces_two_models_from_one_clustering() {
        let dataset = small_dataset(5);
        let outcome = train_pipeline(
            &dataset,
            &ClusterOptions::default(),
            &TrainConfig { epochs: 20, ..TrainConfig::default() },
            &TrainConfig { epochs: 20, ..TrainConfig::default() },
            ModeSelection::Both,
            77,
        )
        .unwrap();
        let w = outcome.model(TrainMode::WeightsBias).unwrap();
        let c = outcome.model(TrainMode::Centers).unwrap();
        assert_eq!(w.scaler, c.scaler);
        assert_eq!(w.metadata.mode, Some(TrainMode::WeightsBias));
        assert_eq!(c.metadata.mode, Some(TrainMode::Centers));
        assert_eq!(outcome.cluster_model.result.centers.len(), 5);
        // both share the clustering-derived geometry at initialization
        assert_eq!(outcome.init.k, 5);
    }

    #[test]
    fn pipeline_is_deterministic() {
        let dataset = small_dataset(6);
        let run = || {
            train_pipeline(
                &dataset,
                &ClusterOptions::default(),
                &TrainConfig { epochs: 10, ..TrainConfig::default() },
                &TrainConfig { epochs: 10, ..TrainConfig::default() },
                ModeSelection::Both,
                3,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.cluster_model, b.cluster_model);
        assert_eq!(a.model(TrainMode::Centers), b.model(TrainMode::Centers));
    }

    #[test]
    fn cluster_model_round_trips() {
        let dataset = small_dataset(7);
        let (model, _) = cluster_training_split(&dataset, &ClusterOptions::default(), 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clusters.json");
        model.save(&path).unwrap();
        let back = ClusterModel::load(&path).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn raw_centers_hold_five_components() {
        let dataset = small_dataset(8);
        let (model, _) = cluster_training_split(&dataset, &ClusterOptions::default(), 2).unwrap();
        let raw = model.centers_raw();
        assert_eq!(raw.len(), 5);
        for row in &raw {
            assert_eq!(row.len(), 5);
            // angle coordinate lands inside the sweep window
            assert!(row[4] > 5.0 && row[4] < 45.0, "angle {}", row[4]);
            // pressure coordinate lands inside the grid
            assert!(row[1] > 0.0 && row[1] < 41.0, "pressure {}", row[1]);
        }
    }
}

//! Gaussian RBF regression network: kernel, forward pass, design matrix, and
//! feature standardization.
//!
//! The network has a single scalar output (the overlap angle in degrees).
//! Centers and widths live in standardized feature space; the target is kept
//! in raw degrees so the bias stays interpretable.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Feature names in input order, used in error messages and reports.
pub const FEATURE_NAMES: [&str; 4] = ["mu_cP", "back_pressure_MPa", "omega_rev_min", "valve_flow_mL_min"];

/// Z-score standardization fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl FeatureScaler {
    /// Fits per-feature mean and (population) standard deviation.
    ///
    /// A constant column cannot be standardized and is reported by name.
    pub fn fit(data: &[Vec<f64>]) -> Result<Self> {
        let n = data.len();
        if n < 2 {
            return Err(Error::Calibration(format!(
                "need at least 2 samples to fit a scaler, got {n}"
            )));
        }
        let dim = data[0].len();
        let mut means = vec![0.0; dim];
        for row in data {
            if row.len() != dim {
                return Err(Error::domain("scaler", "ragged feature rows"));
            }
            for (m, &v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n as f64;
        }
        let mut sds = vec![0.0; dim];
        for row in data {
            for (s, (&v, &m)) in sds.iter_mut().zip(row.iter().zip(&means)) {
                *s += (v - m) * (v - m);
            }
        }
        for (j, s) in sds.iter_mut().enumerate() {
            *s = (*s / n as f64).sqrt();
            if !(*s > 0.0) {
                let name = FEATURE_NAMES.get(j).copied().unwrap_or("feature");
                return Err(Error::Calibration(format!(
                    "feature {j} ({name}) is constant over the training split"
                )));
            }
        }
        Ok(FeatureScaler { means, sds })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::domain(
                "scaler",
                format!("expected {} features, got {}", self.dim(), x.len()),
            ));
        }
        Ok(x.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect())
    }

    pub fn inverse_transform(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(Error::domain(
                "scaler",
                format!("expected {} features, got {}", self.dim(), z.len()),
            ));
        }
        Ok(z.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(&v, (&m, &s))| v * s + m)
            .collect())
    }

    fn validate(&self) -> Result<()> {
        if self.means.len() != self.sds.len() {
            return Err(Error::domain("scaler", "means/sds length mismatch"));
        }
        if self.sds.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::domain("scaler", "standard deviations must be finite and > 0"));
        }
        Ok(())
    }
}

/// The supervised phase that produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Gradient training of output weights and bias; centers and widths frozen.
    WeightsBias,
    /// Gradient training of center locations; widths refreshed each epoch,
    /// weights re-solved by least squares.
    Centers,
}

impl TrainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::WeightsBias => "weights_bias",
            TrainMode::Centers => "centers",
        }
    }
}

impl std::fmt::Display for TrainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Provenance recorded alongside a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub mode: Option<TrainMode>,
    pub seed: u64,
    pub epochs: usize,
    pub final_loss: Option<f64>,
}

impl Default for ModelMetadata {
    fn default() -> Self {
        ModelMetadata { mode: None, seed: 0, epochs: 0, final_loss: None }
    }
}

/// A Gaussian RBF network with one scalar output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfModel {
    pub input_dim: usize,
    pub k: usize,
    pub scaler: FeatureScaler,
    /// K centers in standardized feature space, each of length `input_dim`.
    pub centers: Vec<Vec<f64>>,
    /// K positive kernel widths.
    pub widths: Vec<f64>,
    /// K output weights.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub metadata: ModelMetadata,
}

/// Gaussian kernel value `exp(−d²/(2σ²))` for a distance `d ≥ 0` and width `σ > 0`.
pub fn kernel(distance: f64, width: f64) -> Result<f64> {
    if !(width > 0.0) {
        return Err(Error::domain("kernel", format!("width must be > 0, got {width}")));
    }
    if !(distance >= 0.0) {
        return Err(Error::domain("kernel", format!("distance must be ≥ 0, got {distance}")));
    }
    Ok((-distance * distance / (2.0 * width * width)).exp())
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl RbfModel {
    pub fn validate(&self) -> Result<()> {
        self.scaler.validate()?;
        if self.k == 0 {
            return Err(Error::domain("model", "hidden layer is empty (k = 0)"));
        }
        if self.scaler.dim() != self.input_dim {
            return Err(Error::domain("model", "scaler dimension does not match input_dim"));
        }
        if self.centers.len() != self.k || self.widths.len() != self.k || self.weights.len() != self.k {
            return Err(Error::domain("model", "centers/widths/weights must all have length k"));
        }
        if self.centers.iter().any(|c| c.len() != self.input_dim) {
            return Err(Error::domain("model", "center dimension does not match input_dim"));
        }
        if self.widths.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::domain("model", "widths must be finite and > 0"));
        }
        let finite = self.weights.iter().all(|w| w.is_finite())
            && self.bias.is_finite()
            && self.centers.iter().flatten().all(|c| c.is_finite());
        if !finite {
            return Err(Error::domain("model", "non-finite parameter"));
        }
        Ok(())
    }

    /// Kernel activations of a standardized input against every center.
    pub(crate) fn activations_standardized(&self, z: &[f64]) -> Vec<f64> {
        self.centers
            .iter()
            .zip(&self.widths)
            .map(|(c, &w)| kernel(euclidean(z, c), w).expect("validated widths"))
            .collect()
    }

    /// Network output for a raw feature vector: standardize, then
    /// `Σ_j w_j·φ(‖ẑ − c_j‖, σ_j) + β`.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim {
            return Err(Error::domain(
                "forward",
                format!("expected {} features, got {}", self.input_dim, x.len()),
            ));
        }
        let z = self.scaler.transform(x)?;
        Ok(self
            .activations_standardized(&z)
            .iter()
            .zip(&self.weights)
            .map(|(phi, w)| phi * w)
            .sum::<f64>()
            + self.bias)
    }

    /// N×(K+1) design matrix: kernel activations per row, plus a trailing
    /// all-ones bias column, so that `forward(x_u) = (V·[w; β])_u`.
    pub fn design_matrix(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut rows = Vec::with_capacity(xs.len());
        for x in xs {
            if x.len() != self.input_dim {
                return Err(Error::domain(
                    "design_matrix",
                    format!("expected {} features, got {}", self.input_dim, x.len()),
                ));
            }
            let z = self.scaler.transform(x)?;
            let mut row = self.activations_standardized(&z);
            row.push(1.0);
            rows.push(row);
        }
        Ok(rows)
    }

    /// Same as [`design_matrix`](Self::design_matrix) for already-standardized
    /// inputs; used by the training loop, which standardizes once up front.
    pub fn design_matrix_standardized(&self, zs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        zs.iter()
            .map(|z| {
                let mut row = self.activations_standardized(z);
                row.push(1.0);
                row
            })
            .collect()
    }

    /// Centers mapped back to raw feature units for reporting.
    pub fn centers_raw(&self) -> Vec<Vec<f64>> {
        self.centers
            .iter()
            .map(|c| self.scaler.inverse_transform(c).expect("center dims match scaler"))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            input_dim: self.input_dim,
            k: self.k,
            scaler: self.scaler.clone(),
            centers: self.centers.clone(),
            widths: self.widths.clone(),
            weights: self.weights.clone(),
            bias: self.bias,
            metadata: self.metadata.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text)
            .map_err(|e| Error::ModelFile(format!("{}: {e}", path.display())))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFile(format!(
                "{}: unsupported format version {} (expected {})",
                path.display(),
                file.format_version,
                MODEL_FORMAT_VERSION
            )));
        }
        let model = RbfModel {
            input_dim: file.input_dim,
            k: file.k,
            scaler: file.scaler,
            centers: file.centers,
            widths: file.widths,
            weights: file.weights,
            bias: file.bias,
            metadata: file.metadata,
        };
        model
            .validate()
            .map_err(|e| Error::ModelFile(format!("{}: {e}", path.display())))?;
        Ok(model)
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    input_dim: usize,
    k: usize,
    scaler: FeatureScaler,
    centers: Vec<Vec<f64>>,
    widths: Vec<f64>,
    weights: Vec<f64>,
    bias: f64,
    metadata: ModelMetadata,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_model(rng: &mut ChaCha8Rng, dim: usize, k: usize) -> RbfModel {
        let scaler = FeatureScaler {
            means: (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
            sds: (0..dim).map(|_| rng.random_range(0.5..3.0)).collect(),
        };
        RbfModel {
            input_dim: dim,
            k,
            scaler,
            centers: (0..k)
                .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect(),
            widths: (0..k).map(|_| rng.random_range(0.3..2.5)).collect(),
            weights: (0..k).map(|_| rng.random_range(-3.0..3.0)).collect(),
            bias: rng.random_range(-3.0..3.0),
            metadata: ModelMetadata::default(),
        }
    }

    #[test]
    fn kernel_closed_forms() {
        assert_eq!(kernel(0.0, 1.7).unwrap(), 1.0);
        assert!((kernel(0.9, 0.9).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        // only d/σ matters
        assert_eq!(kernel(2.0 * 0.7, 2.0 * 1.3).unwrap(), kernel(0.7, 1.3).unwrap());
        assert!(kernel(1.0, 0.0).is_err());
        assert!(kernel(-1.0, 1.0).is_err());
    }

    #[test]
    fn bias_only_network() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut model = random_model(&mut rng, 4, 3);
        model.weights = vec![0.0; 3];
        model.bias = 4.25;
        for _ in 0..10 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            assert_eq!(model.forward(&x).unwrap(), 4.25);
        }
    }

    #[test]
    fn unit_weight_at_center() {
        let scaler = FeatureScaler { means: vec![0.0; 2], sds: vec![1.0; 2] };
        let model = RbfModel {
            input_dim: 2,
            k: 1,
            scaler,
            centers: vec![vec![0.3, -1.1]],
            widths: vec![0.8],
            weights: vec![1.0],
            bias: 0.0,
            metadata: ModelMetadata::default(),
        };
        assert!((model.forward(&[0.3, -1.1]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn forward_matches_term_by_term_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let k = rng.random_range(1..=6);
            let model = random_model(&mut rng, 4, k);
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            // independent re-evaluation of the output sum
            let z: Vec<f64> = x
                .iter()
                .zip(model.scaler.means.iter().zip(&model.scaler.sds))
                .map(|(&v, (&m, &s))| (v - m) / s)
                .collect();
            let mut expected = model.bias;
            for j in 0..k {
                let mut d2 = 0.0;
                for i in 0..4 {
                    d2 += (z[i] - model.centers[j][i]).powi(2);
                }
                expected += model.weights[j] * (-d2 / (2.0 * model.widths[j].powi(2))).exp();
            }
            assert!((model.forward(&x).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_invariant_under_node_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let model = random_model(&mut rng, 4, 5);
        let mut permuted = model.clone();
        let perm = [3usize, 0, 4, 1, 2];
        permuted.centers = perm.iter().map(|&j| model.centers[j].clone()).collect();
        permuted.widths = perm.iter().map(|&j| model.widths[j]).collect();
        permuted.weights = perm.iter().map(|&j| model.weights[j]).collect();
        let x = [0.4, -2.0, 1.1, 0.0];
        assert!((model.forward(&x).unwrap() - permuted.forward(&x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn far_inputs_approach_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut model = random_model(&mut rng, 4, 4);
        model.scaler = FeatureScaler { means: vec![0.0; 4], sds: vec![1.0; 4] };
        // push every width to the top of the random range so "far" is ≥ 20 σ
        model.widths = vec![1.0; 4];
        let x = [50.0, 50.0, 50.0, 50.0];
        assert!((model.forward(&x).unwrap() - model.bias).abs() < 1e-10);
    }

    #[test]
    fn design_matrix_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let model = random_model(&mut rng, 4, 5);
        let xs: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..4).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let v = model.design_matrix(&xs).unwrap();
        assert_eq!(v.len(), 12);
        for (row, x) in v.iter().zip(&xs) {
            assert_eq!(row.len(), 6);
            assert_eq!(*row.last().unwrap(), 1.0);
            let via_matrix: f64 = row[..5]
                .iter()
                .zip(&model.weights)
                .map(|(phi, w)| phi * w)
                .sum::<f64>()
                + row[5] * model.bias;
            assert!((via_matrix - model.forward(x).unwrap()).abs() < 1e-12);
        }
        let empty = model.design_matrix(&[]).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn scaler_two_point_case() {
        let scaler = FeatureScaler::fit(&[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(scaler.means, vec![1.0, 1.0]);
        assert_eq!(scaler.sds, vec![1.0, 1.0]);
        assert_eq!(scaler.transform(&[2.0, 2.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn scaler_rejects_constant_column() {
        let err = FeatureScaler::fit(&[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]]).unwrap_err();
        assert!(err.to_string().contains("feature 1"), "{err}");
    }

    #[test]
    fn scaler_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let data: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..4).map(|_| rng.random_range(-50.0..200.0)).collect())
            .collect();
        let scaler = FeatureScaler::fit(&data).unwrap();
        for row in &data {
            let back = scaler.inverse_transform(&scaler.transform(row).unwrap()).unwrap();
            for (a, b) in back.iter().zip(row) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut model = random_model(&mut rng, 4, 5);
        model.metadata = ModelMetadata {
            mode: Some(TrainMode::Centers),
            seed: 42,
            epochs: 137,
            final_loss: Some(0.123456789012345678),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let loaded = RbfModel::load(&path).unwrap();
        assert_eq!(model.bias.to_bits(), loaded.bias.to_bits());
        for (a, b) in model.weights.iter().zip(&loaded.weights) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in model.centers.iter().flatten().zip(loaded.centers.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in model.widths.iter().zip(&loaded.widths) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(model.metadata, loaded.metadata);
    }

    #[test]
    fn load_rejects_zero_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut model = random_model(&mut rng, 4, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        let w = format!("{}", model.widths[0]);
        text = text.replacen(&w, "0.0", 1);
        std::fs::write(&path, text).unwrap();
        assert!(matches!(RbfModel::load(&path), Err(Error::ModelFile(_))));
        // and a wrong version tag is a version error
        model.widths[0] = 1.0;
        model.save(&path).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 99");
        std::fs::write(&path, text).unwrap();
        let err = RbfModel::load(&path).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }
}

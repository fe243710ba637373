//! Supervised phase: sum-of-squares loss, analytic gradients, least-squares
//! weight solves, and the Adam training loop for the two supervised modes.
//!
//! Exactly one parameter group is gradient-trained per run: either the output
//! weights and bias (centers and widths frozen) or the center locations
//! (widths refreshed from the current partition each epoch, weights re-solved
//! by least squares after every center step). Widths are never
//! gradient-trained.

use crate::cluster;
use crate::error::{Error, Result};
use crate::rbf::{euclidean, ModelMetadata, RbfModel, TrainMode};
use serde::{Deserialize, Serialize};

/// Hyperparameters of one supervised run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub mode: TrainMode,
    /// Adam step size η.
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    /// Stop after this many epochs without validation improvement.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::WeightsBias,
            step_size: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 500,
            patience: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::Config(format!("step size must be > 0, got {}", self.step_size)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be ≥ 1".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn with_mode(mut self, mode: TrainMode) -> Self {
        self.mode = mode;
        self
    }
}

/// Per-epoch losses and the selected model of one run.
#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub mode: TrainMode,
    /// Training loss after each epoch's update (index 0 is the initialization).
    pub train_loss: Vec<f64>,
    /// Validation loss on the same schedule.
    pub val_loss: Vec<f64>,
    /// Epoch whose model was kept (lowest validation loss).
    pub best_epoch: usize,
    /// True when early stopping fired before the epoch budget ran out.
    pub converged: bool,
    #[serde(skip)]
    pub model: RbfModel,
}

impl TrainReport {
    /// Two-column CSV of the loss history for plotting; the row index is the
    /// epoch (row 0 is the initialization).
    pub fn losses_csv(&self) -> String {
        let mut out = String::from("train_loss,val_loss\n");
        for (t, v) in self.train_loss.iter().zip(&self.val_loss) {
            out.push_str(&format!("{t},{v}\n"));
        }
        out
    }
}

/// Sum of squared prediction errors `Σ (ŷ − y)²`.
pub fn sse_loss(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() || predictions.is_empty() {
        return Err(Error::domain(
            "sse_loss",
            format!("need equal non-empty lengths, got {} and {}", predictions.len(), truths.len()),
        ));
    }
    Ok(predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| (p - t) * (p - t))
        .sum())
}

fn predictions_standardized(model: &RbfModel, zs: &[Vec<f64>]) -> Vec<f64> {
    zs.iter()
        .map(|z| {
            model
                .activations_standardized(z)
                .iter()
                .zip(&model.weights)
                .map(|(phi, w)| phi * w)
                .sum::<f64>()
                + model.bias
        })
        .collect()
}

/// Gradient of the sum-of-squares loss with respect to the K weights and the
/// bias: `∂E/∂w_j = Σ_u 2(ŷᵘ − yᵘ)·φ_j(ẑᵘ)` and `∂E/∂β = Σ_u 2(ŷᵘ − yᵘ)`.
///
/// Inputs are standardized feature vectors.
pub fn grad_weights(model: &RbfModel, zs: &[Vec<f64>], ys: &[f64]) -> Result<Vec<f64>> {
    if zs.len() != ys.len() {
        return Err(Error::domain("grad_weights", "inputs and targets must pair up"));
    }
    let mut grad = vec![0.0; model.k + 1];
    for (z, &y) in zs.iter().zip(ys) {
        let phis = model.activations_standardized(z);
        let pred: f64 = phis.iter().zip(&model.weights).map(|(p, w)| p * w).sum::<f64>() + model.bias;
        let r2 = 2.0 * (pred - y);
        for (g, phi) in grad[..model.k].iter_mut().zip(&phis) {
            *g += r2 * phi;
        }
        grad[model.k] += r2;
    }
    Ok(grad)
}

/// Gradient of the loss with respect to each center:
/// `∂E/∂c_j = Σ_u 2(ŷᵘ − yᵘ)·w_j·φ_j(ẑᵘ)·(ẑᵘ − c_j)/σ_j²`.
pub fn grad_centers(model: &RbfModel, zs: &[Vec<f64>], ys: &[f64]) -> Result<Vec<Vec<f64>>> {
    if zs.len() != ys.len() {
        return Err(Error::domain("grad_centers", "inputs and targets must pair up"));
    }
    let mut grad = vec![vec![0.0; model.input_dim]; model.k];
    for (z, &y) in zs.iter().zip(ys) {
        let phis = model.activations_standardized(z);
        let pred: f64 = phis.iter().zip(&model.weights).map(|(p, w)| p * w).sum::<f64>() + model.bias;
        let r2 = 2.0 * (pred - y);
        for j in 0..model.k {
            let scale = r2 * model.weights[j] * phis[j] / (model.widths[j] * model.widths[j]);
            for (g, (zi, ci)) in grad[j].iter_mut().zip(z.iter().zip(&model.centers[j])) {
                *g += scale * (zi - ci);
            }
        }
    }
    Ok(grad)
}

/// Least-squares solve of `V·W ≈ y` by Householder QR.
///
/// Rank-deficient systems fall back to a tiny ridge (λ = 1e−10) applied
/// through an augmented QR, which keeps the solution bounded and the
/// normal-equation residual small without forming `VᵀV`.
pub fn solve_least_squares(v: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() || v.len() != y.len() {
        return Err(Error::domain(
            "least_squares",
            format!("need one target per row, got {} rows and {} targets", v.len(), y.len()),
        ));
    }
    let cols = v[0].len();
    if v.iter().any(|row| row.len() != cols) {
        return Err(Error::domain("least_squares", "ragged design matrix"));
    }
    if v.iter().flatten().any(|x| !x.is_finite()) || y.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("least_squares", "non-finite entries"));
    }

    if let Some(solution) = qr_solve(v, y, None) {
        return Ok(solution);
    }
    // rank-deficient: augment with sqrt(λ)·I rows
    qr_solve(v, y, Some(1e-10)).ok_or_else(|| Error::domain("least_squares", "ridge solve failed"))
}

/// Householder QR least squares. Returns `None` when a diagonal of R falls
/// below the rank tolerance (and no ridge was requested).
fn qr_solve(v: &[Vec<f64>], y: &[f64], ridge: Option<f64>) -> Option<Vec<f64>> {
    let cols = v[0].len();
    let mut rows = v.len();
    let mut a: Vec<Vec<f64>> = v.to_vec();
    let mut b: Vec<f64> = y.to_vec();
    if let Some(lambda) = ridge {
        let s = lambda.sqrt();
        for j in 0..cols {
            let mut row = vec![0.0; cols];
            row[j] = s;
            a.push(row);
            b.push(0.0);
        }
        rows += cols;
    }
    if rows < cols && ridge.is_none() {
        return None;
    }

    let scale: f64 = a
        .iter()
        .flatten()
        .fold(0.0_f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale * rows.max(cols) as f64;

    for j in 0..cols {
        // Householder reflection clearing column j below the diagonal
        let mut norm = 0.0;
        for row in a.iter().take(rows).skip(j) {
            norm += row[j] * row[j];
        }
        let norm = norm.sqrt();
        if ridge.is_none() && norm <= tol {
            return None;
        }
        let alpha = if a[j][j] >= 0.0 { -norm } else { norm };
        let mut u: Vec<f64> = (j..rows).map(|i| a[i][j]).collect();
        u[0] -= alpha;
        let unorm2: f64 = u.iter().map(|x| x * x).sum();
        if unorm2 > 0.0 {
            for col in j..cols {
                let dot: f64 = (j..rows).map(|i| u[i - j] * a[i][col]).sum();
                let f = 2.0 * dot / unorm2;
                for i in j..rows {
                    a[i][col] -= f * u[i - j];
                }
            }
            let dot: f64 = (j..rows).map(|i| u[i - j] * b[i]).sum();
            let f = 2.0 * dot / unorm2;
            for i in j..rows {
                b[i] -= f * u[i - j];
            }
        }
        a[j][j] = alpha;
        if ridge.is_none() && a[j][j].abs() <= tol {
            return None;
        }
    }

    // back substitution on R
    let mut x = vec![0.0; cols];
    for j in (0..cols).rev() {
        let mut s = b[j];
        for (l, xl) in x.iter().enumerate().skip(j + 1) {
            s -= a[j][l] * xl;
        }
        if a[j][j] == 0.0 {
            return None;
        }
        x[j] = s / a[j][j];
    }
    Some(x)
}

/// Builds the initial model from the unsupervised phase: centers and widths
/// come from the clustering, weights and bias from a least-squares solve.
pub fn initialize_model(
    scaler: crate::rbf::FeatureScaler,
    centers: Vec<Vec<f64>>,
    widths: Vec<f64>,
    zs: &[Vec<f64>],
    ys: &[f64],
    seed: u64,
) -> Result<RbfModel> {
    let input_dim = scaler.dim();
    let k = centers.len();
    let mut model = RbfModel {
        input_dim,
        k,
        scaler,
        centers,
        widths,
        weights: vec![0.0; k],
        bias: 0.0,
        metadata: ModelMetadata { mode: None, seed, epochs: 0, final_loss: None },
    };
    let v = model.design_matrix_standardized(zs);
    let w = solve_least_squares(&v, ys)?;
    model.bias = w[k];
    model.weights = w[..k].to_vec();
    let preds = predictions_standardized(&model, zs);
    model.metadata.final_loss = Some(sse_loss(&preds, ys)?);
    model.validate()?;
    Ok(model)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: usize,
    step_size: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    fn new(n: usize, config: &TrainConfig) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            step_size: config.step_size,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
        }
    }

    /// One update; returns the additive deltas for the parameters.
    fn deltas(&mut self, grad: &[f64]) -> Vec<f64> {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        grad.iter()
            .enumerate()
            .map(|(i, &g)| {
                self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = self.m[i] / bc1;
                let v_hat = self.v[i] / bc2;
                -self.step_size * m_hat / (v_hat.sqrt() + self.epsilon)
            })
            .collect()
    }
}

/// Refreshes widths from the nearest-center partition of the training inputs
/// and re-solves weights and bias by least squares. Used after every center
/// update in centers mode.
fn refresh_widths_and_weights(model: &mut RbfModel, zs: &[Vec<f64>], ys: &[f64]) -> Result<()> {
    let assignments = cluster::assign_all(zs, &model.centers);
    let mut sums = vec![0.0; model.k];
    let mut counts = vec![0usize; model.k];
    for (z, &a) in zs.iter().zip(&assignments) {
        sums[a] += euclidean(z, &model.centers[a]);
        counts[a] += 1;
    }
    for j in 0..model.k {
        // clusters emptied by a center drifting away keep their previous width
        if counts[j] > 0 {
            model.widths[j] = (sums[j] / counts[j] as f64).max(cluster::WIDTH_FLOOR);
        }
    }
    let v = model.design_matrix_standardized(zs);
    let w = solve_least_squares(&v, ys)?;
    model.bias = w[model.k];
    model.weights = w[..model.k].to_vec();
    Ok(())
}

/// Runs one supervised phase over a least-squares-initialized model and
/// returns the epoch snapshot with the lowest validation loss.
///
/// Inputs are raw feature rows; standardization happens once up front through
/// the model's scaler.
pub fn train(
    model: &RbfModel,
    train_x: &[Vec<f64>],
    train_y: &[f64],
    val_x: &[Vec<f64>],
    val_y: &[f64],
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    model.validate()?;
    if train_x.len() != train_y.len() || train_x.is_empty() {
        return Err(Error::domain("train", "training inputs and targets must pair up"));
    }
    if val_x.len() != val_y.len() || val_x.is_empty() {
        return Err(Error::domain("train", "validation inputs and targets must pair up"));
    }

    let train_z: Vec<Vec<f64>> = train_x
        .iter()
        .map(|x| model.scaler.transform(x))
        .collect::<Result<_>>()?;
    let val_z: Vec<Vec<f64>> = val_x
        .iter()
        .map(|x| model.scaler.transform(x))
        .collect::<Result<_>>()?;

    let mut current = model.clone();
    current.metadata.mode = Some(config.mode);
    current.metadata.seed = config.seed;

    let mut train_loss = vec![sse_loss(&predictions_standardized(&current, &train_z), train_y)?];
    let mut val_loss = vec![sse_loss(&predictions_standardized(&current, &val_z), val_y)?];

    let mut best = current.clone();
    let mut best_val = val_loss[0];
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut converged = false;

    let n_params = match config.mode {
        TrainMode::WeightsBias => current.k + 1,
        TrainMode::Centers => current.k * current.input_dim,
    };
    let mut adam = Adam::new(n_params, config);

    for epoch in 1..=config.epochs {
        match config.mode {
            TrainMode::WeightsBias => {
                let grad = grad_weights(&current, &train_z, train_y)?;
                let deltas = adam.deltas(&grad);
                for (w, d) in current.weights.iter_mut().zip(&deltas[..current.k]) {
                    *w += d;
                }
                current.bias += deltas[current.k];
            }
            TrainMode::Centers => {
                let grad = grad_centers(&current, &train_z, train_y)?;
                let flat: Vec<f64> = grad.into_iter().flatten().collect();
                let deltas = adam.deltas(&flat);
                for (j, center) in current.centers.iter_mut().enumerate() {
                    for (i, c) in center.iter_mut().enumerate() {
                        *c += deltas[j * current.input_dim + i];
                    }
                }
                refresh_widths_and_weights(&mut current, &train_z, train_y)?;
            }
        }

        let tl = sse_loss(&predictions_standardized(&current, &train_z), train_y)?;
        let vl = sse_loss(&predictions_standardized(&current, &val_z), val_y)?;
        if !tl.is_finite() || !vl.is_finite() {
            return Err(Error::Diverged {
                epoch,
                message: format!("training loss {tl}, validation loss {vl}"),
            });
        }
        train_loss.push(tl);
        val_loss.push(vl);

        if vl < best_val {
            best_val = vl;
            best = current.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                converged = true;
                break;
            }
        }
    }

    best.metadata.epochs = best_epoch;
    best.metadata.final_loss = Some(train_loss[best_epoch]);

    Ok(TrainReport {
        mode: config.mode,
        train_loss,
        val_loss,
        best_epoch,
        converged,
        model: best,
    })
}

/// Max-norm residual of the normal equations, `‖Vᵀ(V·W − y)‖∞`; small values
/// certify a least-squares minimizer.
pub fn normal_equation_residual(v: &[Vec<f64>], w: &[f64], y: &[f64]) -> f64 {
    let cols = w.len();
    let mut residuals: Vec<f64> = v
        .iter()
        .zip(y)
        .map(|(row, &t)| row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() - t)
        .collect();
    let mut out = 0.0_f64;
    for j in 0..cols {
        let mut s = 0.0;
        for (row, r) in v.iter().zip(&mut residuals) {
            s += row[j] * *r;
        }
        out = out.max(s.abs());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rbf::FeatureScaler;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_model(rng: &mut ChaCha8Rng, dim: usize, k: usize) -> RbfModel {
        RbfModel {
            input_dim: dim,
            k,
            scaler: FeatureScaler { means: vec![0.0; dim], sds: vec![1.0; dim] },
            centers: (0..k)
                .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect(),
            widths: (0..k).map(|_| rng.random_range(0.4..2.0)).collect(),
            weights: (0..k).map(|_| rng.random_range(-3.0..3.0)).collect(),
            bias: rng.random_range(-3.0..3.0),
            metadata: ModelMetadata::default(),
        }
    }

    fn random_data(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let zs = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.5..2.5)).collect())
            .collect();
        let ys = (0..n).map(|_| rng.random_range(5.0..45.0)).collect();
        (zs, ys)
    }

    fn loss_of(model: &RbfModel, zs: &[Vec<f64>], ys: &[f64]) -> f64 {
        sse_loss(&predictions_standardized(model, zs), ys).unwrap()
    }

    #[test]
    fn sse_basics() {
        assert_eq!(sse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(sse_loss(&[3.0], &[1.0]).unwrap(), 4.0);
        assert!(sse_loss(&[1.0], &[1.0, 2.0]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..50).map(|_| rng.random_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..50).map(|_| rng.random_range(-10.0..10.0)).collect();
        let mut expected = 0.0;
        for i in 0..50 {
            expected += (a[i] - b[i]) * (a[i] - b[i]);
        }
        assert!((sse_loss(&a, &b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn weight_gradient_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = random_model(&mut rng, 4, 3);
        let (zs, _) = random_data(&mut rng, 20, 4);
        // targets equal to predictions give a zero gradient
        let preds = predictions_standardized(&model, &zs);
        let grad = grad_weights(&model, &zs, &preds).unwrap();
        assert!(grad.iter().all(|g| g.abs() < 1e-9));
        // bias gradient is twice the residual sum
        let ys: Vec<f64> = preds.iter().map(|p| p - 1.5).collect();
        let grad = grad_weights(&model, &zs, &ys).unwrap();
        assert!((grad[3] - 2.0 * 1.5 * 20.0).abs() < 1e-9);
    }

    #[test]
    fn center_gradient_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut model = random_model(&mut rng, 4, 3);
        model.weights[1] = 0.0;
        let (zs, ys) = random_data(&mut rng, 15, 4);
        let grad = grad_centers(&model, &zs, &ys).unwrap();
        assert!(grad[1].iter().all(|g| *g == 0.0), "dead unit has no gradient");

        // all inputs at the center: (ẑ − c) = 0
        let center = model.centers[0].clone();
        let zs_at = vec![center; 6];
        let ys_at = vec![10.0; 6];
        let grad = grad_centers(&model, &zs_at, &ys_at).unwrap();
        assert!(grad[0].iter().all(|g| *g == 0.0));
    }

    fn finite_difference_check(seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(1..=8);
        let n = rng.random_range(5..=50);
        let model = random_model(&mut rng, 4, k);
        let (zs, ys) = random_data(&mut rng, n, 4);
        let h = 1e-6;

        let analytic_w = grad_weights(&model, &zs, &ys).unwrap();
        let mut worst_w = 0.0_f64;
        for p in 0..=k {
            let mut plus = model.clone();
            let mut minus = model.clone();
            if p < k {
                plus.weights[p] += h;
                minus.weights[p] -= h;
            } else {
                plus.bias += h;
                minus.bias -= h;
            }
            let fd = (loss_of(&plus, &zs, &ys) - loss_of(&minus, &zs, &ys)) / (2.0 * h);
            let err = (analytic_w[p] - fd).abs() / fd.abs().max(1.0);
            worst_w = worst_w.max(err);
        }

        let analytic_c = grad_centers(&model, &zs, &ys).unwrap();
        let mut worst_c = 0.0_f64;
        for j in 0..k {
            for i in 0..4 {
                let mut plus = model.clone();
                let mut minus = model.clone();
                plus.centers[j][i] += h;
                minus.centers[j][i] -= h;
                let fd = (loss_of(&plus, &zs, &ys) - loss_of(&minus, &zs, &ys)) / (2.0 * h);
                let err = (analytic_c[j][i] - fd).abs() / fd.abs().max(1.0);
                worst_c = worst_c.max(err);
            }
        }
        (worst_w, worst_c)
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..20 {
            let (w, c) = finite_difference_check(seed);
            assert!(w < 1e-5, "weight gradient off by {w} at seed {seed}");
            assert!(c < 1e-5, "center gradient off by {c} at seed {seed}");
        }
    }

    #[test]
    fn least_squares_identity_and_averaging() {
        let v = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let w = solve_least_squares(&v, &[3.0, 5.0]).unwrap();
        assert!((w[0] - 3.0).abs() < 1e-12 && (w[1] - 5.0).abs() < 1e-12);

        let v = vec![vec![1.0], vec![1.0]];
        let w = solve_least_squares(&v, &[2.0, 4.0]).unwrap();
        assert!((w[0] - 3.0).abs() < 1e-12);

        assert!(solve_least_squares(&[vec![f64::NAN]], &[1.0]).is_err());
    }

    /// Independent oracle: pseudo-inverse through the normal equations with
    /// Gauss-Jordan elimination. Only valid for well-conditioned systems.
    fn normal_equation_oracle(v: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let cols = v[0].len();
        let mut g = vec![vec![0.0; cols + 1]; cols];
        for r in 0..cols {
            for c in 0..cols {
                g[r][c] = v.iter().map(|row| row[r] * row[c]).sum();
            }
            g[r][cols] = v.iter().zip(y).map(|(row, &t)| row[r] * t).sum();
        }
        for p in 0..cols {
            let pivot = (p..cols)
                .max_by(|&a, &b| g[a][p].abs().partial_cmp(&g[b][p].abs()).unwrap())
                .unwrap();
            g.swap(p, pivot);
            let d = g[p][p];
            for c in p..=cols {
                g[p][c] /= d;
            }
            for r in 0..cols {
                if r != p {
                    let f = g[r][p];
                    for c in p..=cols {
                        g[r][c] -= f * g[p][c];
                    }
                }
            }
        }
        (0..cols).map(|r| g[r][cols]).collect()
    }

    #[test]
    fn least_squares_matches_normal_equation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let n = rng.random_range(8..40);
            let cols = rng.random_range(1..=6);
            let v: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..cols).map(|_| rng.random_range(-3.0..3.0)).collect())
                .collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let ours = solve_least_squares(&v, &y).unwrap();
            let oracle = normal_equation_oracle(&v, &y);
            for (a, b) in ours.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn least_squares_rank_deficient_residual_bound() {
        // duplicated column
        let v: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let x = i as f64;
                vec![x, x, 1.0]
            })
            .collect();
        let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64 + 1.0).collect();
        let w = solve_least_squares(&v, &y).unwrap();
        let vty_max = {
            let mut m = 0.0_f64;
            for j in 0..3 {
                let s: f64 = v.iter().zip(&y).map(|(row, &t)| row[j] * t).sum();
                m = m.max(s.abs());
            }
            m
        };
        let res = normal_equation_residual(&v, &w, &y);
        assert!(res < 1e-8 * (1.0 + vty_max), "residual {res}");
        // ridge splits the duplicated weight evenly
        assert!((w[0] - w[1]).abs() < 1e-6, "{} vs {}", w[0], w[1]);

        // underdetermined: more columns than rows
        let v = vec![vec![1.0, 2.0, 3.0]];
        let y = vec![6.0];
        let w = solve_least_squares(&v, &y).unwrap();
        let pred: f64 = v[0].iter().zip(&w).map(|(a, b)| a * b).sum();
        assert!((pred - 6.0).abs() < 1e-6);
    }

    fn noiseless_setup(seed: u64) -> (RbfModel, Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = random_model(&mut rng, 4, 5);
        let (zs, _) = random_data(&mut rng, 80, 4);
        let ys = predictions_standardized(&truth, &zs);
        let (vzs, _) = random_data(&mut rng, 20, 4);
        let vys = predictions_standardized(&truth, &vzs);
        (truth, zs, ys, vzs, vys)
    }

    #[test]
    fn weights_mode_recovers_noiseless_network() {
        let (truth, zs, ys, vzs, vys) = noiseless_setup(8);
        // same centers and widths, weights found by the training path
        let mut init = truth.clone();
        init.weights = vec![0.0; 5];
        init.bias = 0.0;
        let v = init.design_matrix_standardized(&zs);
        let w = solve_least_squares(&v, &ys).unwrap();
        init.weights = w[..5].to_vec();
        init.bias = w[5];
        let config = TrainConfig::default();
        let report = train(&init, &zs, &ys, &vzs, &vys, &config).unwrap();
        let final_train = loss_of(&report.model, &zs, &ys);
        assert!(final_train < 1e-6, "training loss {final_train}");
        // never worse than the least-squares initialization
        assert!(final_train <= loss_of(&init, &zs, &ys) + 1e-9);
    }

    #[test]
    fn centers_mode_resolves_weights_each_epoch() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = random_model(&mut rng, 4, 4);
        let (zs, ys) = random_data(&mut rng, 60, 4);
        let (vzs, vys) = random_data(&mut rng, 15, 4);
        let mut init = model.clone();
        let v = init.design_matrix_standardized(&zs);
        let w = solve_least_squares(&v, &ys).unwrap();
        init.weights = w[..4].to_vec();
        init.bias = w[4];
        let config = TrainConfig { epochs: 40, ..TrainConfig::default() }.with_mode(TrainMode::Centers);
        let report = train(&init, &zs, &ys, &vzs, &vys, &config).unwrap();
        // after every weight re-solve the normal-equation residual is tiny
        let zts: Vec<Vec<f64>> = zs.clone();
        let v = report.model.design_matrix_standardized(&zts);
        let mut stacked = report.model.weights.clone();
        stacked.push(report.model.bias);
        let vty_max = {
            let mut m = 0.0_f64;
            for j in 0..stacked.len() {
                let s: f64 = v.iter().zip(&ys).map(|(row, &t)| row[j] * t).sum();
                m = m.max(s.abs());
            }
            m
        };
        let res = normal_equation_residual(&v, &stacked, &ys);
        assert!(res < 1e-8 * (1.0 + vty_max), "residual {res}");
        // the kept epoch is the validation minimum
        let min_val = report.val_loss.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(report.val_loss[report.best_epoch], min_val);
        assert!(min_val <= report.val_loss[0]);
    }

    #[test]
    fn training_is_deterministic() {
        let (_, zs, ys, vzs, vys) = noiseless_setup(10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut init = random_model(&mut rng, 4, 5);
        let v = init.design_matrix_standardized(&zs);
        let w = solve_least_squares(&v, &ys).unwrap();
        init.weights = w[..5].to_vec();
        init.bias = w[5];
        let config = TrainConfig { epochs: 30, ..TrainConfig::default() }.with_mode(TrainMode::Centers);
        let a = train(&init, &zs, &ys, &vzs, &vys, &config).unwrap();
        let b = train(&init, &zs, &ys, &vzs, &vys, &config).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.train_loss, b.train_loss);
    }

    #[test]
    fn divergence_is_reported() {
        let (_, zs, ys, vzs, vys) = noiseless_setup(12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let init = random_model(&mut rng, 4, 5);
        let config = TrainConfig { step_size: 1e200, ..TrainConfig::default() };
        match train(&init, &zs, &ys, &vzs, &vys, &config) {
            Err(Error::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}

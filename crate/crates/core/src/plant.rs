//! Synthetic plant standing in for the physical pump rig.
//!
//! The plant defines a latent optimal overlap angle per operating point and a
//! closed-form pressure pulse around it, plus seeded measurement noise, so
//! that dataset generation and the benchmark comparison are reproducible
//! without hardware. The pulse law keeps the qualitative behaviour of the
//! rig: the pulse grows with working pressure and collapses once the overlap
//! angle approaches the latent optimum.
//!
//! All randomness is derived from the plant seed and the operating point's
//! bit pattern, so results are independent of evaluation order.

use crate::error::{Error, Result};
use crate::pump::{plunger_speed, OperatingPoint, PumpParameters};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Overlap-angle sweep window, degrees.
pub const SWEEP_LO: f64 = 5.0;
pub const SWEEP_HI: f64 = 45.0;
pub const SWEEP_STEP: f64 = 1.0;

/// Ground-truth pulse law with a latent optimal angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantModel {
    /// Residual pulse floor range [lo, hi], MPa; each point draws its floor
    /// deterministically from this band.
    pub residual_lo: f64,
    pub residual_hi: f64,
    /// No-overlap severity κ: pulse fraction of working pressure at angle 0.
    pub severity: f64,
    /// Overlap decay constant τ, degrees.
    pub decay: f64,
    /// Mistuning curvature γ for operating off the latent optimum.
    pub curvature: f64,
    /// Latent-angle intercept, degrees.
    pub base_angle: f64,
    /// Latent-angle coefficients on normalized pressure, plunger speed, valve
    /// flow, and viscosity.
    pub pressure_gain: f64,
    pub speed_gain: f64,
    pub flow_gain: f64,
    pub viscosity_gain: f64,
    /// Normalization references for the latent-angle terms.
    pub pressure_ref: f64,
    pub speed_ref: f64,
    pub flow_ref: f64,
    pub viscosity_ref: f64,
    /// Measurement noise standard deviation, MPa.
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for PlantModel {
    fn default() -> Self {
        let params = PumpParameters::default();
        PlantModel {
            residual_lo: 0.15,
            residual_hi: 0.25,
            severity: 0.9,
            decay: 3.0,
            curvature: 0.5,
            base_angle: 15.0,
            pressure_gain: 6.0,
            speed_gain: 16.0,
            flow_gain: 3.0,
            viscosity_gain: 2.0,
            pressure_ref: params.p_max,
            speed_ref: plunger_speed(5.0, &params).expect("defaults are valid"),
            flow_ref: 5.0,
            viscosity_ref: 1.002,
            noise_sd: 0.1,
            seed: 0,
        }
    }
}

/// An operating point labeled with the sweep's optimal angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub point: OperatingPoint,
    /// Optimal overlap angle found by the sweep, degrees.
    pub optimal_angle: f64,
    /// Pulse measured at that angle, MPa.
    pub min_pulse: f64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(parts: &[u64]) -> u64 {
    let mut acc = 0x243F_6A88_85A3_08D3; // arbitrary non-zero start
    for &p in parts {
        acc = splitmix64(acc ^ p);
    }
    acc
}

/// A stable key derived from the point's bit pattern, so per-point draws do
/// not depend on generation order.
fn point_key(point: &OperatingPoint) -> u64 {
    mix(&[
        point.fluid.mu.to_bits(),
        point.back_pressure.to_bits(),
        point.period.to_bits(),
        point.set_flow.to_bits(),
        point.omega.to_bits(),
        point.valve_flow.to_bits(),
    ])
}

impl PlantModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_lo > 0.0 && self.residual_hi >= self.residual_lo) {
            return Err(Error::Config(format!(
                "residual floor range [{}, {}] must be positive and ordered",
                self.residual_lo, self.residual_hi
            )));
        }
        for (name, v) in [
            ("severity", self.severity),
            ("decay", self.decay),
            ("curvature", self.curvature),
            ("pressure_ref", self.pressure_ref),
            ("speed_ref", self.speed_ref),
            ("flow_ref", self.flow_ref),
            ("viscosity_ref", self.viscosity_ref),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("plant {name} must be > 0, got {v}")));
            }
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::Config(format!("noise sd must be ≥ 0, got {}", self.noise_sd)));
        }
        Ok(())
    }

    /// Latent optimal overlap angle for an operating point, degrees.
    ///
    /// Affine in the normalized features; a result outside the sweep window
    /// means the plant coefficients do not fit the configured grid.
    pub fn latent_optimal_angle(&self, point: &OperatingPoint) -> Result<f64> {
        let angle = self.base_angle
            + self.pressure_gain * point.back_pressure / self.pressure_ref
            + self.speed_gain * point.omega / self.speed_ref
            + self.flow_gain * point.valve_flow / self.flow_ref
            + self.viscosity_gain * point.fluid.mu / self.viscosity_ref;
        if !(SWEEP_LO..=SWEEP_HI).contains(&angle) {
            return Err(Error::Config(format!(
                "latent optimal angle {angle:.2}° escapes the sweep window [{SWEEP_LO}, {SWEEP_HI}] \
                 at P = {} MPa, ω = {:.1}, Q = {:.2}, μ = {}",
                point.back_pressure, point.omega, point.valve_flow, point.fluid.mu
            )));
        }
        Ok(angle)
    }

    /// Per-point residual pulse floor, drawn deterministically from the
    /// configured band.
    pub fn residual_floor(&self, point: &OperatingPoint) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(&[self.seed, point_key(point), 0x52_46]));
        self.residual_lo + rng.random::<f64>() * (self.residual_hi - self.residual_lo)
    }

    /// Noise-free pulse at an overlap angle, MPa.
    ///
    /// The regurgitation term `κ·P·e^(−θ/τ)` carries the full pulse when no
    /// overlap is used; the mistuning term `γ·P·((θ − θ*)/45)²` describes an
    /// engaged but badly tuned overlap, so it fades in with the same decay
    /// constant and vanishes at θ = 0 where there is nothing to mistune.
    pub fn pulse_mean(&self, point: &OperatingPoint, angle: f64) -> Result<f64> {
        if !(0.0..=SWEEP_HI).contains(&angle) {
            return Err(Error::domain(
                "simulate_pulse",
                format!("angle {angle}° outside [0, {SWEEP_HI}]"),
            ));
        }
        let theta_star = self.latent_optimal_angle(point)?;
        let p = point.back_pressure;
        let engaged = 1.0 - (-angle / self.decay).exp();
        let mistune = (angle - theta_star) / SWEEP_HI;
        Ok(self.residual_floor(point)
            + self.severity * p * (-angle / self.decay).exp()
            + self.curvature * p * mistune * mistune * engaged)
    }

    /// Measured pulse: the noise-free pulse plus zero-mean noise seeded per
    /// (point, angle).
    pub fn simulate_pulse(&self, point: &OperatingPoint, angle: f64) -> Result<f64> {
        let mean = self.pulse_mean(point, angle)?;
        if self.noise_sd == 0.0 {
            return Ok(mean);
        }
        let mut rng =
            ChaCha8Rng::seed_from_u64(mix(&[self.seed, point_key(point), angle.to_bits(), 0x4E_5A]));
        let normal = Normal::new(0.0, self.noise_sd).expect("validated sd");
        Ok(mean + normal.sample(&mut rng))
    }

    /// Sweeps the overlap angle over a grid and labels the point with the
    /// angle of minimal measured pulse. Ties break toward the smaller angle.
    pub fn sweep_angle(&self, point: &OperatingPoint, lo: f64, hi: f64, step: f64) -> Result<LabeledPoint> {
        if !(lo < hi) || !(step > 0.0) {
            return Err(Error::domain(
                "sweep_angle",
                format!("need lo < hi and step > 0, got [{lo}, {hi}] step {step}"),
            ));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        let mut best_angle = lo;
        let mut best_pulse = f64::INFINITY;
        for i in 0..count {
            let angle = lo + step * i as f64;
            let pulse = self.simulate_pulse(point, angle)?;
            if pulse < best_pulse {
                best_pulse = pulse;
                best_angle = angle;
            }
        }
        Ok(LabeledPoint {
            point: point.clone(),
            optimal_angle: best_angle,
            min_pulse: best_pulse,
        })
    }
}

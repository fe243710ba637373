//! Replay of the correction-constant calibration against a simulated
//! dispenser.
//!
//! The procedure mirrors the bench protocol: the pump runs for ten minutes at
//! a configured back pressure, the dispensed volume is averaged over time,
//! and the flow and pressure corrections are recovered by inverting the
//! check-valve flow model. F is determined first in the low band (where Z is
//! zero by convention), then Z per band from the high-pressure runs.

use crate::error::{Error, Result};
use crate::pump::{check_valve_flow, flow_correction, pressure_correction, CorrectionTable, PumpParameters};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Simulated dispenser: a pump with known correction constants whose
/// dispensed volume can be measured over a timed run.
#[derive(Debug, Clone)]
pub struct Dispenser {
    pub params: PumpParameters,
    pub table: CorrectionTable,
    pub lambda_f_sign: i8,
    /// Reciprocating period of the calibration runs, s.
    pub period: f64,
    /// Relative standard deviation of one volume measurement.
    pub noise_rel_sd: f64,
    pub seed: u64,
}

impl Dispenser {
    pub fn new(params: PumpParameters, table: CorrectionTable) -> Self {
        Dispenser {
            params,
            table,
            lambda_f_sign: 1,
            period: 10.0,
            noise_rel_sd: 5e-4,
            seed: 0,
        }
    }

    pub fn noiseless(mut self) -> Self {
        self.noise_rel_sd = 0.0;
        self
    }

    /// Volume collected over a run of `minutes` at the given back pressure,
    /// averaged over time (mL·min⁻¹).
    pub fn measured_flow(&self, back_pressure: f64, minutes: f64) -> Result<f64> {
        if !(minutes > 0.0) {
            return Err(Error::domain("dispenser", format!("run length must be > 0, got {minutes}")));
        }
        let (f, z) = self.table.lookup(back_pressure)?;
        let lambda_z = pressure_correction(z, back_pressure, self.params.p_max)?;
        let lambda_f = flow_correction(f, self.lambda_f_sign)?;
        let flow = check_valve_flow(lambda_z, lambda_f, self.params.pump_volume, self.period)?;
        if self.noise_rel_sd == 0.0 {
            return Ok(flow);
        }
        let key = back_pressure.to_bits() ^ minutes.to_bits().rotate_left(17) ^ self.seed;
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let noise = Normal::new(0.0, self.noise_rel_sd).expect("non-negative sd");
        let measured = flow * minutes * (1.0 + noise.sample(&mut rng));
        if !(measured > 0.0) {
            return Err(Error::Calibration(format!(
                "dispenser read a non-positive volume at {back_pressure} MPa"
            )));
        }
        Ok(measured / minutes)
    }
}

/// Length of one calibration run, minutes.
pub const RUN_MINUTES: f64 = 10.0;
/// Back pressure of the flow-constant run, MPa (inside the low band).
pub const F_RUN_PRESSURE: f64 = 2.0;

/// Recovers F from a low-band run: `λ_f = Q·T/(2V)` with `λ_z = 1`.
pub fn recover_flow_constant(dispenser: &Dispenser, back_pressure: f64) -> Result<f64> {
    let flow = dispenser.measured_flow(back_pressure, RUN_MINUTES)?;
    let lambda_f = flow / 60.0 * 1000.0 * dispenser.period / (2.0 * dispenser.params.pump_volume);
    Ok((lambda_f - 1.0) * 100.0)
}

/// Recovers Z from a run at `back_pressure`, given an already-recovered F.
pub fn recover_pressure_constant(dispenser: &Dispenser, back_pressure: f64, f: f64) -> Result<f64> {
    let flow = dispenser.measured_flow(back_pressure, RUN_MINUTES)?;
    let lambda_f = flow_correction(f, dispenser.lambda_f_sign)?;
    let lambda_z =
        flow / 60.0 * 1000.0 * dispenser.period / (2.0 * dispenser.params.pump_volume * lambda_f);
    Ok((lambda_z - 1.0) * 100.0 * dispenser.params.p_max / back_pressure)
}

/// One band of the calibration report: reference vs recovered constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationBand {
    pub lo: f64,
    pub hi: f64,
    pub f_ref: f64,
    pub f_recovered: f64,
    pub z_ref: f64,
    pub z_recovered: f64,
    /// Raw recovered Z before rounding, for delta reporting.
    pub z_raw: f64,
}

/// Full calibration replay output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub bands: Vec<CalibrationBand>,
    /// Raw recovered F before rounding.
    pub f_raw: f64,
}

impl CalibrationReport {
    /// The recovered constants as a usable correction table.
    pub fn recovered_table(&self) -> CorrectionTable {
        CorrectionTable {
            bands: self
                .bands
                .iter()
                .map(|b| crate::pump::CorrectionBand {
                    lo: b.lo,
                    hi: b.hi,
                    f: b.f_recovered,
                    z: b.z_recovered,
                })
                .collect(),
        }
    }

    pub fn max_z_delta(&self) -> f64 {
        self.bands
            .iter()
            .map(|b| (b.z_recovered - b.z_ref).abs())
            .fold(0.0, f64::max)
    }
}

/// Replays the full calibration: one low-band run pins F, then one run per
/// band above the low band recovers its Z at the band midpoint. Recovered
/// constants are rounded to the nearest integer, the resolution of the
/// calibration sheet.
pub fn calibrate_corrections(dispenser: &Dispenser, reference: &CorrectionTable) -> Result<CalibrationReport> {
    reference.validate(dispenser.params.p_max)?;
    let f_raw = recover_flow_constant(dispenser, F_RUN_PRESSURE)?;
    let f_recovered = f_raw.round();

    let mut bands = Vec::with_capacity(reference.bands.len());
    for (i, band) in reference.bands.iter().enumerate() {
        let (z_raw, z_recovered) = if i == 0 {
            // below the low-band edge the pressure correction is taken as zero
            (0.0, 0.0)
        } else {
            let probe = 0.5 * (band.lo + band.hi);
            let raw = recover_pressure_constant(dispenser, probe, f_recovered)?;
            (raw, raw.round())
        };
        bands.push(CalibrationBand {
            lo: band.lo,
            hi: band.hi,
            f_ref: band.f,
            f_recovered,
            z_ref: band.z,
            z_recovered,
            z_raw,
        });
    }
    Ok(CalibrationReport { bands, f_raw })
}

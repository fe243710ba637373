//! Deterministic pump model: overlap time, plunger speed, check-valve flow,
//! and the empirical correction constants.
//!
//! Internal unit convention: mm, mm², mm³ (= μL), s, MPa, degrees. Flow rates
//! cross operation boundaries in mL·min⁻¹ and are converted here, so callers
//! never juggle μL/mL factors themselves.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A transmitting fluid and its dynamic viscosity at 20 °C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidSpec {
    pub name: String,
    /// Dynamic viscosity in cP.
    pub mu: f64,
}

impl FluidSpec {
    pub fn new(name: impl Into<String>, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::domain("fluid", format!("viscosity must be > 0, got {mu}")));
        }
        Ok(FluidSpec { name: name.into(), mu })
    }

    pub fn water() -> Self {
        FluidSpec { name: "water".into(), mu: 1.002 }
    }

    pub fn methanol() -> Self {
        FluidSpec { name: "methanol".into(), mu: 0.594 }
    }

    pub fn acetonitrile() -> Self {
        FluidSpec { name: "acetonitrile".into(), mu: 0.389 }
    }

    /// The three standard testing fluids.
    pub fn builtin() -> Vec<FluidSpec> {
        vec![Self::water(), Self::methanol(), Self::acetonitrile()]
    }

    /// Look up a built-in fluid by name.
    pub fn by_name(name: &str) -> Option<FluidSpec> {
        Self::builtin().into_iter().find(|f| f.name == name)
    }
}

/// Factory constants of the 125-μL pump configuration.
///
/// `pump_volume` stores the volume moved per half-cycle (the product of pump
/// cross-section, step displacement, and steps per cycle); only the product is
/// calibrated at the factory, so it is the authoritative constant and
/// `step_displacement`/`steps_per_cycle` are kept for documentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PumpParameters {
    /// Volume displaced per half-cycle, μL (≡ mm³).
    pub pump_volume: f64,
    /// Cross-sectional area of the plunger, mm².
    pub plunger_area: f64,
    /// Stepping motor displacement per step, mm.
    pub step_displacement: f64,
    /// Stepping motor displacement per revolution, mm.
    pub rev_displacement: f64,
    /// Motor steps in one cycle of reciprocating motion.
    pub steps_per_cycle: u32,
    /// Maximum working pressure, MPa.
    pub p_max: f64,
    /// Maximum stepping-motor speed, step·s⁻¹.
    pub motor_speed_max: f64,
}

impl Default for PumpParameters {
    fn default() -> Self {
        PumpParameters {
            pump_volume: 125.0,
            plunger_area: 7.917,
            step_displacement: 0.01,
            rev_displacement: 2.0,
            steps_per_cycle: 1580,
            p_max: 40.0,
            motor_speed_max: 2000.0,
        }
    }
}

impl PumpParameters {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("pump_volume", self.pump_volume),
            ("plunger_area", self.plunger_area),
            ("step_displacement", self.step_displacement),
            ("rev_displacement", self.rev_displacement),
            ("steps_per_cycle", f64::from(self.steps_per_cycle)),
            ("p_max", self.p_max),
            ("motor_speed_max", self.motor_speed_max),
        ];
        for (name, v) in fields {
            if !(v > 0.0) {
                return Err(Error::domain(
                    "pump parameters",
                    format!("{name} must be strictly positive, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// One back-pressure band of the correction table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectionBand {
    /// Band lower edge, MPa (inclusive).
    pub lo: f64,
    /// Band upper edge, MPa (exclusive, except for the topmost band).
    pub hi: f64,
    /// Flow correction constant F.
    pub f: f64,
    /// Pressure correction constant Z.
    pub z: f64,
}

/// Empirically calibrated flow (F) and pressure (Z) correction constants,
/// banded by back pressure.
///
/// The calibration sheet quotes F and Z in mL·min⁻¹, but both enter the flow
/// model as percentage-like dimensionless constants, so they are treated as
/// dimensionless here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectionTable {
    pub bands: Vec<CorrectionBand>,
}

impl Default for CorrectionTable {
    /// The factory calibration: F = 13 everywhere, Z stepping up in 5-MPa bands.
    fn default() -> Self {
        let z = [0.0, 6.0, 7.0, 15.0, 18.0, 25.0, 31.0, 42.0];
        let bands = z
            .iter()
            .enumerate()
            .map(|(i, &z)| CorrectionBand {
                lo: 5.0 * i as f64,
                hi: 5.0 * (i + 1) as f64,
                f: 13.0,
                z,
            })
            .collect();
        CorrectionTable { bands }
    }
}

impl CorrectionTable {
    /// Checks that the bands partition [0, p_max] without gaps or overlap.
    pub fn validate(&self, p_max: f64) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::domain("correction table", "no bands"));
        }
        let mut edge = 0.0;
        for band in &self.bands {
            if band.lo != edge {
                return Err(Error::domain(
                    "correction table",
                    format!("band starts at {} MPa, expected {} MPa", band.lo, edge),
                ));
            }
            if !(band.hi > band.lo) {
                return Err(Error::domain(
                    "correction table",
                    format!("band [{}, {}] is empty or inverted", band.lo, band.hi),
                ));
            }
            edge = band.hi;
        }
        if edge != p_max {
            return Err(Error::domain(
                "correction table",
                format!("bands end at {edge} MPa, expected {p_max} MPa"),
            ));
        }
        Ok(())
    }

    /// Returns the (F, Z) pair of the band containing `back_pressure`.
    ///
    /// Band boundaries belong to the upper band; the top edge belongs to the
    /// last band so the lookup is total on [0, p_max].
    pub fn lookup(&self, back_pressure: f64) -> Result<(f64, f64)> {
        let top = self.bands.last().expect("validated non-empty").hi;
        if !(0.0..=top).contains(&back_pressure) {
            return Err(Error::domain(
                "correction lookup",
                format!("back pressure {back_pressure} MPa outside [0, {top}]"),
            ));
        }
        for band in &self.bands {
            if back_pressure >= band.lo && back_pressure < band.hi {
                return Ok((band.f, band.z));
            }
        }
        let last = self.bands.last().unwrap();
        Ok((last.f, last.z))
    }
}

/// One pump setting together with the derived network inputs.
///
/// `omega` and `valve_flow` are always computed from the stored raw settings,
/// so identical settings yield bit-identical feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub fluid: FluidSpec,
    /// Back pressure P, MPa.
    pub back_pressure: f64,
    /// Reciprocating period T, s.
    pub period: f64,
    /// Set flow rate, mL·min⁻¹.
    pub set_flow: f64,
    /// Plunger rotational speed ω, rev·min⁻¹ (derived).
    pub omega: f64,
    /// Flow rate through the check valve Q, mL·min⁻¹ (derived).
    pub valve_flow: f64,
}

impl OperatingPoint {
    /// Network input vector in the fixed order [μ, P, ω, Q].
    pub fn features(&self) -> [f64; 4] {
        [self.fluid.mu, self.back_pressure, self.omega, self.valve_flow]
    }
}

/// Overlap time in seconds for a period `period` (s) and overlap angle in
/// degrees: `period · angle / 360`.
pub fn overlap_time(period: f64, overlap_angle: f64) -> Result<f64> {
    if !(period > 0.0) {
        return Err(Error::domain("overlap_time", format!("period must be > 0, got {period}")));
    }
    if !(0.0..=360.0).contains(&overlap_angle) {
        return Err(Error::domain(
            "overlap_time",
            format!("angle {overlap_angle}° outside [0, 360]"),
        ));
    }
    Ok(period * overlap_angle / 360.0)
}

/// Plunger rotational speed in rev·min⁻¹ for a set flow in mL·min⁻¹.
///
/// The plunger area times the per-revolution displacement is the volume moved
/// per revolution, so `ω = set_flow / (A·D)` after converting mL to mm³.
pub fn plunger_speed(set_flow: f64, params: &PumpParameters) -> Result<f64> {
    if !(set_flow > 0.0) {
        return Err(Error::domain(
            "plunger_speed",
            format!("set flow must be > 0, got {set_flow}"),
        ));
    }
    let volume_per_rev = params.plunger_area * params.rev_displacement; // mm³
    Ok(set_flow * 1000.0 / volume_per_rev)
}

/// Pressure correction factor `λ_z = 1 + (Z/100)·(P/P_max)`.
pub fn pressure_correction(z: f64, back_pressure: f64, p_max: f64) -> Result<f64> {
    if !(p_max > 0.0) {
        return Err(Error::domain("pressure_correction", format!("p_max must be > 0, got {p_max}")));
    }
    if !(0.0..=p_max).contains(&back_pressure) {
        return Err(Error::domain(
            "pressure_correction",
            format!("pressure {back_pressure} MPa outside [0, {p_max}]"),
        ));
    }
    Ok(1.0 + z / 100.0 * back_pressure / p_max)
}

/// Flow correction factor `λ_f = 1 ± F/100`.
///
/// The sign selects the branch; the calibration sheet leaves it unspecified,
/// so pipelines default to +1.
pub fn flow_correction(f: f64, sign: i8) -> Result<f64> {
    if !(f >= 0.0) {
        return Err(Error::domain("flow_correction", format!("F must be ≥ 0, got {f}")));
    }
    if sign != 1 && sign != -1 {
        return Err(Error::domain("flow_correction", format!("sign must be ±1, got {sign}")));
    }
    let lambda = 1.0 + f64::from(sign) * f / 100.0;
    if !(lambda > 0.0) {
        return Err(Error::domain(
            "flow_correction",
            format!("correction 1 {} {}/100 is not positive", if sign > 0 { "+" } else { "−" }, f),
        ));
    }
    Ok(lambda)
}

/// Flow rate through the check valve in mL·min⁻¹:
/// `Q = 2·λ_z·λ_f·V/T` with the pump volume in μL and the period in seconds.
pub fn check_valve_flow(lambda_z: f64, lambda_f: f64, pump_volume: f64, period: f64) -> Result<f64> {
    for (name, v) in [("λ_z", lambda_z), ("λ_f", lambda_f), ("pump volume", pump_volume)] {
        if !(v > 0.0) {
            return Err(Error::domain(
                "check_valve_flow",
                format!("{name} must be > 0, got {v}"),
            ));
        }
    }
    if !(period > 0.0) {
        return Err(Error::domain(
            "check_valve_flow",
            format!("period must be > 0, got {period}"),
        ));
    }
    let microliters_per_second = 2.0 * lambda_z * lambda_f * pump_volume / period;
    Ok(microliters_per_second * 60.0 / 1000.0)
}

/// Experiment ranges accepted when constructing operating points.
pub const SET_FLOW_RANGE: (f64, f64) = (0.1, 10.0);
pub const PERIOD_RANGE: (f64, f64) = (3.0, 15.0);

/// Builds an [`OperatingPoint`] from raw settings, deriving ω and Q.
///
/// λ_f uses the +1 branch by default; pass `lambda_f_sign` to flip it.
pub fn make_operating_point(
    fluid: FluidSpec,
    back_pressure: f64,
    period: f64,
    set_flow: f64,
    params: &PumpParameters,
    table: &CorrectionTable,
    lambda_f_sign: i8,
) -> Result<OperatingPoint> {
    if !(back_pressure > 0.0 && back_pressure <= params.p_max) {
        return Err(Error::domain(
            "operating point",
            format!("back pressure {back_pressure} MPa outside (0, {}]", params.p_max),
        ));
    }
    if !(set_flow >= SET_FLOW_RANGE.0 && set_flow <= SET_FLOW_RANGE.1) {
        return Err(Error::domain(
            "operating point",
            format!("set flow {set_flow} mL·min⁻¹ outside [{}, {}]", SET_FLOW_RANGE.0, SET_FLOW_RANGE.1),
        ));
    }
    if !(period >= PERIOD_RANGE.0 && period <= PERIOD_RANGE.1) {
        return Err(Error::domain(
            "operating point",
            format!("period {period} s outside [{}, {}]", PERIOD_RANGE.0, PERIOD_RANGE.1),
        ));
    }
    let omega = plunger_speed(set_flow, params)?;
    let (f, z) = table.lookup(back_pressure)?;
    let lambda_z = pressure_correction(z, back_pressure, params.p_max)?;
    let lambda_f = flow_correction(f, lambda_f_sign)?;
    let valve_flow = check_valve_flow(lambda_z, lambda_f, params.pump_volume, period)?;
    Ok(OperatingPoint {
        fluid,
        back_pressure,
        period,
        set_flow,
        omega,
        valve_flow,
    })
}

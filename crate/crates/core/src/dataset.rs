//! Labeled dataset generation, the train/validation/test partition, and the
//! CSV on-disk format.

use crate::error::{Error, Result};
use crate::plant::{LabeledPoint, PlantModel, SWEEP_HI, SWEEP_LO, SWEEP_STEP};
use crate::pump::{make_operating_point, CorrectionTable, FluidSpec, PumpParameters};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Partition membership of one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Sampling ranges and partition sizes for dataset generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_points: usize,
    /// Set flow range, mL·min⁻¹.
    pub flow_range: (f64, f64),
    /// Back pressure range, MPa.
    pub pressure_range: (f64, f64),
    /// Reciprocating period range, s.
    pub period_range: (f64, f64),
    pub fluids: Vec<FluidSpec>,
    /// (train, validation, test) sizes; must sum to `n_points`.
    pub split: (usize, usize, usize),
    pub sweep_lo: f64,
    pub sweep_hi: f64,
    pub sweep_step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_points: 500,
            flow_range: (0.1, 5.0),
            pressure_range: (1.0, 40.0),
            period_range: (3.0, 15.0),
            fluids: FluidSpec::builtin(),
            split: (400, 50, 50),
            sweep_lo: SWEEP_LO,
            sweep_hi: SWEEP_HI,
            sweep_step: SWEEP_STEP,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = self.split;
        if a + b + c != self.n_points || self.n_points == 0 {
            return Err(Error::Config(format!(
                "split {a}/{b}/{c} does not partition {} points",
                self.n_points
            )));
        }
        for (name, (lo, hi)) in [
            ("flow_range", self.flow_range),
            ("pressure_range", self.pressure_range),
            ("period_range", self.period_range),
        ] {
            if !(lo < hi) {
                return Err(Error::Config(format!("{name} [{lo}, {hi}] is empty")));
            }
        }
        if self.fluids.is_empty() {
            return Err(Error::Config("no fluids configured".into()));
        }
        if !(self.sweep_lo < self.sweep_hi) || !(self.sweep_step > 0.0) {
            return Err(Error::Config("invalid sweep grid".into()));
        }
        Ok(())
    }
}

/// A labeled record with its partition tag.
#[derive(Debug, Clone, PartialEq)]
pub struct DataRecord {
    pub labeled: LabeledPoint,
    pub split: Split,
}

/// The full labeled dataset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<DataRecord>,
}

impl Dataset {
    pub fn split_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for r in &self.records {
            match r.split {
                Split::Train => counts.0 += 1,
                Split::Val => counts.1 += 1,
                Split::Test => counts.2 += 1,
            }
        }
        counts
    }

    pub fn of_split(&self, split: Split) -> Vec<&LabeledPoint> {
        self.records
            .iter()
            .filter(|r| r.split == split)
            .map(|r| &r.labeled)
            .collect()
    }

    /// Raw feature rows [μ, P, ω, Q] of one split.
    pub fn features(&self, split: Split) -> Vec<Vec<f64>> {
        self.of_split(split)
            .iter()
            .map(|lp| lp.point.features().to_vec())
            .collect()
    }

    /// Label angles of one split, degrees.
    pub fn angles(&self, split: Split) -> Vec<f64> {
        self.of_split(split).iter().map(|lp| lp.optimal_angle).collect()
    }

    pub const CSV_HEADER: &'static str = "fluid,mu_cP,back_pressure_MPa,period_s,set_flow_mL_min,omega_rev_min,valve_flow_mL_min,optimal_angle_deg,min_pulse_MPa,split";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let p = &r.labeled.point;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                p.fluid.name,
                p.fluid.mu,
                p.back_pressure,
                p.period,
                p.set_flow,
                p.omega,
                p.valve_flow,
                r.labeled.optimal_angle,
                r.labeled.min_pulse,
                r.split.as_str(),
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(&text, &path.display().to_string())
    }

    pub fn parse_csv(text: &str, origin: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::CsvParse {
            path: origin.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header == Self::CSV_HEADER => {}
            Some((_, header)) => {
                return Err(err(1, format!("unexpected header {header:?}")));
            }
            None => return Err(err(1, "empty file".into())),
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 10 {
                return Err(err(lineno, format!("expected 10 fields, got {}", fields.len())));
            }
            let num = |idx: usize| -> Result<f64> {
                fields[idx]
                    .parse::<f64>()
                    .map_err(|e| err(lineno, format!("field {}: {e}", idx + 1)))
            };
            let split = Split::parse(fields[9])
                .ok_or_else(|| err(lineno, format!("unknown split {:?}", fields[9])))?;
            let point = crate::pump::OperatingPoint {
                fluid: FluidSpec { name: fields[0].to_string(), mu: num(1)? },
                back_pressure: num(2)?,
                period: num(3)?,
                set_flow: num(4)?,
                omega: num(5)?,
                valve_flow: num(6)?,
            };
            records.push(DataRecord {
                labeled: LabeledPoint {
                    point,
                    optimal_angle: num(7)?,
                    min_pulse: num(8)?,
                },
                split,
            });
        }
        if records.is_empty() {
            return Err(err(1, "no data rows".into()));
        }
        Ok(Dataset { records })
    }
}

/// Samples `grid.n_points` operating points by Latin hypercube over the
/// continuous ranges (fluids uniform), labels each point through the plant's
/// angle sweep, and partitions the result by a seeded shuffle.
pub fn generate_dataset(
    plant: &PlantModel,
    grid: &GridConfig,
    params: &PumpParameters,
    table: &CorrectionTable,
    lambda_f_sign: i8,
    seed: u64,
) -> Result<Dataset> {
    grid.validate()?;
    plant.validate()?;
    params.validate()?;
    table.validate(params.p_max)?;

    let n = grid.n_points;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // one stratified coordinate per continuous dimension
    let stratified = |range: (f64, f64), rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        strata
            .into_iter()
            .map(|s| {
                let u = (s as f64 + rng.random::<f64>()) / n as f64;
                range.0 + u * (range.1 - range.0)
            })
            .collect()
    };
    let pressures = stratified(grid.pressure_range, &mut rng);
    let periods = stratified(grid.period_range, &mut rng);
    let flows = stratified(grid.flow_range, &mut rng);
    let fluid_idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..grid.fluids.len())).collect();

    let mut labeled = Vec::with_capacity(n);
    for i in 0..n {
        let point = make_operating_point(
            grid.fluids[fluid_idx[i]].clone(),
            pressures[i],
            periods[i],
            flows[i],
            params,
            table,
            lambda_f_sign,
        )?;
        labeled.push(plant.sweep_angle(&point, grid.sweep_lo, grid.sweep_hi, grid.sweep_step)?);
    }

    // seeded shuffle decides the partition
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut splits = vec![Split::Train; n];
    let (n_train, n_val, _) = grid.split;
    for (rank, &idx) in order.iter().enumerate() {
        splits[idx] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }

    Ok(Dataset {
        records: labeled
            .into_iter()
            .zip(splits)
            .map(|(labeled, split)| DataRecord { labeled, split })
            .collect(),
    })
}

//! Parameter scans over either engine.
//!
//! Points of a tau grid are independent and run on the rayon pool; results
//! are always returned in grid order.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    peak_location, plateau_height, two_point_derivative, PeakEstimate, PlateauConfig,
    PlateauEstimate, TauCurve,
};
use crate::entanglement::{
    entropy, BipartitionSpec, EntanglementRecord, EntanglementTracker, SplitSet,
};
use crate::freefermion::{survival_large_l, FreeFermionOptions, DEFAULT_STEP_CAP};
use crate::model::ModelParams;
use crate::propagator::DEFAULT_TOLERANCE;
use crate::protocol::{run_protocol_opts, run_protocol_with, ProtocolOptions, DEFAULT_STATEVECTOR_CAP};
use crate::summation::PrecisionMode;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    StateVector,
    FreeFermion,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::StateVector => "statevector",
            Engine::FreeFermion => "freefermion",
        })
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "statevector" | "sv" => Ok(Engine::StateVector),
            "freefermion" | "ff" => Ok(Engine::FreeFermion),
            other => Err(Error::InvalidParams(format!(
                "unknown engine '{other}', expected statevector or freefermion"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineOptions {
    pub engine: Engine,
    pub precision: PrecisionMode,
    pub plan_tolerance: f64,
    pub statevector_cap: usize,
    pub step_cap: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            engine: Engine::FreeFermion,
            precision: PrecisionMode::default(),
            plan_tolerance: DEFAULT_TOLERANCE,
            statevector_cap: DEFAULT_STATEVECTOR_CAP,
            step_cap: DEFAULT_STEP_CAP,
        }
    }
}

impl EngineOptions {
    pub fn with_engine(engine: Engine) -> Self {
        Self {
            engine,
            ..Self::default()
        }
    }

    fn protocol(&self) -> ProtocolOptions {
        ProtocolOptions {
            plan_tolerance: self.plan_tolerance,
            cap: self.statevector_cap,
            ..ProtocolOptions::default()
        }
    }

    fn free_fermion(&self) -> FreeFermionOptions {
        FreeFermionOptions {
            precision: self.precision,
            step_cap: self.step_cap,
            ..FreeFermionOptions::default()
        }
    }
}

/// Evenly spaced `start, start + step, ... <= stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauGrid {
    values: Vec<f64>,
}

impl TauGrid {
    pub fn range(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
            return Err(Error::InvalidParams("tau grid bounds must be finite".into()));
        }
        if start < 0.0 {
            return Err(Error::InvalidParams(format!("tau grid starts below zero at {start}")));
        }
        if !(step > 0.0) {
            return Err(Error::InvalidParams(format!("tau grid step must be positive, got {step}")));
        }
        if stop < start {
            return Err(Error::InvalidParams(format!(
                "tau grid is empty: stop {stop} is below start {start}"
            )));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // Multiplying rather than accumulating keeps grid points free of drift.
        let values = (0..count).map(|i| start + i as f64 * step).collect();
        Ok(Self { values })
    }

    /// Explicit, strictly increasing, non-negative values.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParams("tau grid is empty".into()));
        }
        if values.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidParams("tau values must be finite and non-negative".into()));
        }
        if values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams("tau grid must be strictly increasing".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl FromStr for TauGrid {
    type Err = Error;

    /// `start:stop:step`, or a single value.
    fn from_str(s: &str) -> Result<Self> {
        let parse = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParams(format!("cannot parse '{p}' in tau grid '{s}'")))
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [one] => Self::from_values(vec![parse(one)?]),
            [a, b, c] => Self::range(parse(a)?, parse(b)?, parse(c)?),
            _ => Err(Error::InvalidParams(format!(
                "tau grid '{s}' must look like start:stop:step"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalSeries {
    pub engine: Engine,
    pub params: ModelParams,
    /// `R_1 .. R_n`.
    pub survival: Vec<f64>,
    /// `p_1 .. p_n`.
    pub first_detection: Vec<f64>,
}

pub fn survival_series(
    params: &ModelParams,
    n_steps: usize,
    opts: &EngineOptions,
) -> Result<SurvivalSeries> {
    let (survival, first_detection) = match opts.engine {
        Engine::StateVector => {
            let run = run_protocol_opts(params, n_steps, &opts.protocol())?;
            (run.survival, run.first_detection)
        }
        Engine::FreeFermion => {
            let run = survival_large_l(params, n_steps, &opts.free_fermion())?;
            (run.survival, run.first_detection)
        }
    };
    Ok(SurvivalSeries {
        engine: opts.engine,
        params: *params,
        survival,
        first_detection,
    })
}

/// Survival series for every tau of a grid, in grid order.
pub fn survival_sweep(
    l: usize,
    h: f64,
    taus: &TauGrid,
    n_steps: usize,
    opts: &EngineOptions,
) -> Result<Vec<SurvivalSeries>> {
    taus.values()
        .par_iter()
        .map(|&tau| survival_series(&ModelParams::new(l, h, tau)?, n_steps, opts))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauPoint {
    pub tau: f64,
    pub plateau: PlateauEstimate,
}

/// Plateau height `H(tau)` over a grid.
pub fn plateau_curve(
    l: usize,
    h: f64,
    taus: &TauGrid,
    n_steps: usize,
    opts: &EngineOptions,
    plateau: &PlateauConfig,
) -> Result<Vec<PlateauPoint>> {
    plateau.validate()?;
    taus.values()
        .par_iter()
        .map(|&tau| {
            let series = survival_series(&ModelParams::new(l, h, tau)?, n_steps, opts)?;
            Ok(PlateauPoint {
                tau,
                plateau: plateau_height(&series.survival, plateau)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionScan {
    pub l: usize,
    pub h: f64,
    pub points: Vec<PlateauPoint>,
    /// Midpoints of consecutive taus.
    pub midpoints: Vec<f64>,
    /// `dH/dtau` at the midpoints.
    pub slopes: Vec<f64>,
    pub peak: PeakEstimate,
}

impl TransitionScan {
    pub fn curve(&self) -> Result<TauCurve> {
        TauCurve::new(
            self.l,
            self.points.iter().map(|p| p.tau).collect(),
            self.points.iter().map(|p| p.plateau.height).collect(),
        )
    }

    /// `tau_c`, the midpoint with the steepest growth of `H`.
    pub fn tau_c(&self) -> f64 {
        self.peak.x
    }
}

/// `H(tau)`, its two-point derivative and the location of the peak.
pub fn transition_scan(
    l: usize,
    h: f64,
    taus: &TauGrid,
    n_steps: usize,
    opts: &EngineOptions,
    plateau: &PlateauConfig,
) -> Result<TransitionScan> {
    if taus.len() < 4 {
        return Err(Error::InvalidParams(
            "a transition scan needs at least four tau values".into(),
        ));
    }
    let points = plateau_curve(l, h, taus, n_steps, opts, plateau)?;
    let heights: Vec<f64> = points.iter().map(|p| p.plateau.height).collect();
    let (midpoints, slopes) = two_point_derivative(taus.values(), &heights)?;
    let peak = peak_location(&midpoints, &slopes)?;
    Ok(TransitionScan {
        l,
        h,
        points,
        midpoints,
        slopes,
        peak,
    })
}

/// Entanglement records for `n_steps` state-vector steps, streamed so only
/// the current state is held in memory.
pub fn entanglement_series(
    params: &ModelParams,
    n_steps: usize,
    blocks: &[usize],
    splits: SplitSet,
    opts: &EngineOptions,
) -> Result<Vec<EntanglementRecord>> {
    let mut tracker = EntanglementTracker::new(blocks.to_vec(), splits);
    run_protocol_with(params, n_steps, &opts.protocol(), |n, psi, r| {
        tracker.observe(n, psi, r).map(|_| ())
    })?;
    Ok(tracker.into_records())
}

/// Entropy of a `block`-site prefix after `snapshot` steps, per tau.
/// Fully detected states report zero entropy.
pub fn entropy_curve(
    l: usize,
    h: f64,
    taus: &TauGrid,
    snapshot: usize,
    block: usize,
    opts: &EngineOptions,
) -> Result<TauCurve> {
    let values = taus
        .values()
        .par_iter()
        .map(|&tau| {
            let params = ModelParams::new(l, h, tau)?;
            let spec = BipartitionSpec::new(l, block)?;
            let mut value = 0.0;
            run_protocol_with(&params, snapshot, &opts.protocol(), |n, psi, r| {
                if n == snapshot && r > 0.0 {
                    value = entropy(psi, &spec)?;
                }
                Ok(())
            })?;
            Ok(value)
        })
        .collect::<Result<Vec<f64>>>()?;
    TauCurve::new(l, taus.values().to_vec(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_grid_parsing() {
        let g: TauGrid = "0.025:0.6:0.025".parse().unwrap();
        assert_eq!(g.len(), 24);
        assert_eq!(g.values()[23], 0.025 + 23.0 * 0.025);
        let g: TauGrid = "0.1".parse().unwrap();
        assert_eq!(g.values(), &[0.1]);
        assert!("0.5:0.1:0.1".parse::<TauGrid>().is_err());
        assert!("0:1:0".parse::<TauGrid>().is_err());
        assert!("0:1".parse::<TauGrid>().is_err());
        assert!("a:1:0.1".parse::<TauGrid>().is_err());
        assert!(TauGrid::from_values(vec![]).is_err());
        assert!(TauGrid::from_values(vec![0.2, 0.1]).is_err());
    }

    #[test]
    fn engine_names() {
        for e in [Engine::StateVector, Engine::FreeFermion] {
            assert_eq!(e.to_string().parse::<Engine>().unwrap(), e);
        }
        assert!("dense".parse::<Engine>().is_err());
    }

    #[test]
    fn engines_agree() {
        let p = ModelParams::new(8, 0.5, 0.3).unwrap();
        let a = survival_series(&p, 30, &EngineOptions::with_engine(Engine::StateVector)).unwrap();
        let b = survival_series(&p, 30, &EngineOptions::with_engine(Engine::FreeFermion)).unwrap();
        for (x, y) in a.survival.iter().zip(&b.survival) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn sweep_keeps_grid_order() {
        let g = TauGrid::range(0.1, 0.5, 0.1).unwrap();
        let out = survival_sweep(10, 1.5, &g, 10, &EngineOptions::default()).unwrap();
        for (s, &tau) in out.iter().zip(g.values()) {
            assert_eq!(s.params.tau(), tau);
        }
    }

    #[test]
    fn transition_scan_small() {
        let g = TauGrid::range(0.05, 0.6, 0.05).unwrap();
        let scan = transition_scan(
            12,
            0.5,
            &g,
            20,
            &EngineOptions::default(),
            &PlateauConfig::default(),
        )
        .unwrap();
        assert_eq!(scan.midpoints.len(), g.len() - 1);
        assert!(scan.tau_c() > 0.05 && scan.tau_c() < 0.6);
        assert_eq!(scan.curve().unwrap().taus, g.values());
    }

    #[test]
    fn entanglement_streams() {
        let p = ModelParams::new(8, 0.5, 0.2).unwrap();
        let recs = entanglement_series(
            &p,
            10,
            &[2],
            SplitSet::ContiguousPrefixes,
            &EngineOptions::with_engine(Engine::StateVector),
        )
        .unwrap();
        assert_eq!(recs.len(), 10);
        let g = TauGrid::from_values(vec![0.2]).unwrap();
        let curve = entropy_curve(8, 0.5, &g, 10, 2, &EngineOptions::default()).unwrap();
        assert!((curve.values[0] - recs[9].entropies[0].1).abs() < 1e-12);
    }
}

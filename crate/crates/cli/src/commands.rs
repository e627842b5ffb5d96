use mipt_core::analysis::{
    entanglement_collapse, scan_entanglement_collapse, sigma_collapse, CollapseConfig,
    CollapseDataset, TauCurve,
};
use mipt_core::entanglement::SplitSet;
use mipt_core::sweep::{
    entanglement_series, entropy_curve, plateau_curve, survival_sweep, transition_scan, Engine,
    TauGrid,
};
use mipt_core::validate::{run_validation, ValidationConfig};
use mipt_core::ModelParams;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{CollapseMode, Common, Defaults, EngineChoice, Grid, RunConfig, Splits};
use crate::output::Table;
use crate::CliError;

pub enum Output {
    Survival(Table<SurvivalRow>),
    Entanglement(Table<EntanglementRow>),
    Transition(Table<TransitionRow>),
    Collapse(Table<CollapseRow>),
    Validate(Table<CheckRow>),
}

#[derive(Debug, Serialize)]
pub struct SurvivalRow {
    engine: String,
    #[serde(rename = "L")]
    l: usize,
    h: f64,
    tau: f64,
    n: usize,
    #[serde(rename = "R")]
    r: f64,
    p: f64,
}

pub fn survival(c: &Common) -> Result<(RunConfig, Output), CliError> {
    let cfg = RunConfig::resolve(
        c,
        &Defaults {
            command: "survival",
            l: &[8],
            tau_grid: Some("0.05:1:0.05"),
            steps: 100,
            engine: EngineChoice::Freefermion,
        },
    )?;
    let mut rows = Vec::new();
    for engine in cfg.engine.engines() {
        let opts = cfg.engine_options(engine);
        for &l in &cfg.l {
            for series in survival_sweep(l, cfg.h, cfg.taus(), cfg.steps, &opts)? {
                let tau = series.params.tau();
                for (i, (&r, &p)) in series.survival.iter().zip(&series.first_detection).enumerate() {
                    rows.push(SurvivalRow {
                        engine: engine.to_string(),
                        l,
                        h: cfg.h,
                        tau,
                        n: i + 1,
                        r,
                        p,
                    });
                }
            }
        }
    }
    let table = Table {
        columns: &["engine", "L", "h", "tau", "n", "R", "p"],
        rows,
    };
    Ok((cfg, Output::Survival(table)))
}

#[derive(Debug, Serialize)]
pub struct EntanglementRow {
    #[serde(rename = "L")]
    l: usize,
    h: f64,
    tau: f64,
    n: usize,
    block: usize,
    #[serde(rename = "S")]
    s: f64,
    #[serde(rename = "G")]
    g: f64,
    #[serde(rename = "S_G")]
    sag: f64,
    cumulative_sag: f64,
    #[serde(rename = "R")]
    r: f64,
}

fn blocks_for(c: &Common, l: usize) -> Vec<usize> {
    c.blocks.clone().unwrap_or_else(|| vec![(l / 4).max(1)])
}

pub fn entanglement(c: &Common) -> Result<(RunConfig, Output), CliError> {
    let mut cfg = RunConfig::resolve(
        c,
        &Defaults {
            command: "entanglement",
            l: &[12],
            tau_grid: Some("0.05:0.8:0.05"),
            steps: 10,
            engine: EngineChoice::Statevector,
        },
    )?;
    if cfg.single_engine()? != Engine::StateVector {
        return Err(CliError::Config("entanglement needs --engine statevector".into()));
    }
    if let Some(k) = c.snapshot {
        if k == 0 {
            return Err(CliError::Config("--snapshot must be positive".into()));
        }
        cfg.steps = cfg.steps.max(k);
    }
    let splits = c.splits.unwrap_or(Splits::Prefixes);
    cfg.blocks = c.blocks.clone();
    cfg.snapshot = c.snapshot;
    cfg.splits = Some(splits);
    let opts = cfg.engine_options(Engine::StateVector);
    let mut rows = Vec::new();
    for &l in &cfg.l {
        let blocks = blocks_for(c, l);
        let per_tau = cfg
            .taus()
            .values()
            .par_iter()
            .map(|&tau| {
                let p = ModelParams::new(l, cfg.h, tau)?;
                entanglement_series(&p, cfg.steps, &blocks, SplitSet::from(splits), &opts)
            })
            .collect::<mipt_core::Result<Vec<_>>>()?;
        for (&tau, records) in cfg.taus().values().iter().zip(per_tau) {
            for rec in records {
                if c.snapshot.is_some_and(|k| k != rec.n) {
                    continue;
                }
                for &(block, s) in &rec.entropies {
                    rows.push(EntanglementRow {
                        l,
                        h: cfg.h,
                        tau,
                        n: rec.n,
                        block,
                        s,
                        g: rec.ggm,
                        sag: rec.sag,
                        cumulative_sag: rec.cumulative_sag,
                        r: rec.survival,
                    });
                }
            }
        }
    }
    let table = Table {
        columns: &["L", "h", "tau", "n", "block", "S", "G", "S_G", "cumulative_sag", "R"],
        rows,
    };
    Ok((cfg, Output::Entanglement(table)))
}

#[derive(Debug, Serialize)]
pub struct TransitionRow {
    row: &'static str,
    #[serde(rename = "L")]
    l: usize,
    h: f64,
    tau: f64,
    value: f64,
    sigma: Option<f64>,
    value_sigma: Option<f64>,
    flag: bool,
}

pub fn transition(c: &Common) -> Result<(RunConfig, Output), CliError> {
    let mut cfg = RunConfig::resolve(
        c,
        &Defaults {
            command: "transition",
            l: &[16],
            tau_grid: Some("0.025:0.6:0.025"),
            steps: 20,
            engine: EngineChoice::Freefermion,
        },
    )?;
    let engine = cfg.single_engine()?;
    let plateau = RunConfig::plateau_from(c)?;
    let with_sigma = c.sigma.unwrap_or(false);
    cfg.plateau = Some(plateau);
    cfg.sigma = Some(with_sigma);
    let opts = cfg.engine_options(engine);
    let mut rows = Vec::new();
    for &l in &cfg.l {
        let scan = transition_scan(l, cfg.h, cfg.taus(), cfg.steps, &opts, &plateau)?;
        let root = (l as f64).sqrt();
        let row = |row, tau: f64, value: f64, flag| TransitionRow {
            row,
            l,
            h: cfg.h,
            tau,
            value,
            sigma: with_sigma.then_some(tau * root),
            value_sigma: with_sigma.then_some(value / root),
            flag,
        };
        for p in &scan.points {
            let mut r = row("plateau", p.tau, p.plateau.height, p.plateau.fallback);
            r.value_sigma = None;
            rows.push(r);
        }
        for (&tau, &slope) in scan.midpoints.iter().zip(&scan.slopes) {
            rows.push(row("slope", tau, slope, false));
        }
        rows.push(row("peak", scan.tau_c(), scan.peak.value, scan.peak.boundary));
    }
    let table = Table {
        columns: &["row", "L", "h", "tau", "value", "sigma", "value_sigma", "flag"],
        rows,
    };
    Ok((cfg, Output::Transition(table)))
}

#[derive(Debug, Default, Serialize)]
pub struct CollapseRow {
    row: &'static str,
    #[serde(rename = "L")]
    l: Option<usize>,
    x: Option<f64>,
    y: Option<f64>,
    tau_c: Option<f64>,
    mu: Option<f64>,
    quality: Option<f64>,
    flag: Option<bool>,
}

fn curve_rows(ds: &CollapseDataset, rows: &mut Vec<CollapseRow>, tau_c: Option<f64>, mu: Option<f64>) {
    for curve in &ds.curves {
        for (&x, &y) in curve.x.iter().zip(&curve.y) {
            rows.push(CollapseRow {
                row: "point",
                l: Some(curve.l),
                x: Some(x),
                y: Some(y),
                tau_c,
                mu,
                ..Default::default()
            });
        }
    }
}

pub fn collapse(c: &Common) -> Result<(RunConfig, Output), CliError> {
    let kind = c.kind.unwrap_or(CollapseMode::Sigma);
    let grid_points = c.grid_points.unwrap_or(CollapseConfig::default().grid_points);
    let (mut cfg, rows) = match kind {
        CollapseMode::Sigma => sigma_rows(c, grid_points)?,
        CollapseMode::Entanglement => entanglement_rows(c, grid_points)?,
    };
    cfg.kind = Some(kind);
    cfg.grid_points = Some(grid_points);
    let table = Table {
        columns: &["row", "L", "x", "y", "tau_c", "mu", "quality", "flag"],
        rows,
    };
    Ok((cfg, Output::Collapse(table)))
}

fn sigma_rows(c: &Common, grid_points: usize) -> Result<(RunConfig, Vec<CollapseRow>), CliError> {
    let mut cfg = RunConfig::resolve(
        c,
        &Defaults {
            command: "collapse",
            l: &[100, 200, 500],
            tau_grid: None,
            steps: 20,
            engine: EngineChoice::Freefermion,
        },
    )?;
    if c.tau_grid.is_some() {
        return Err(CliError::Config(
            "the sigma collapse sweeps --sigma-grid; --tau-grid is not used".into(),
        ));
    }
    let engine = cfg.single_engine()?;
    let plateau = RunConfig::plateau_from(c)?;
    let sigma_grid: Grid = match &c.sigma_grid {
        Some(g) => g.clone(),
        None => "0.3:2.5:0.05".parse().map_err(CliError::Config)?,
    };
    let sigmas = sigma_grid.values();
    let window = CollapseConfig {
        sigma_min: sigmas[0],
        sigma_max: sigmas[sigmas.len() - 1],
        grid_points,
    };
    let opts = cfg.engine_options(engine);
    let mut curves = Vec::new();
    for &l in &cfg.l {
        let root = (l as f64).sqrt();
        let taus = TauGrid::from_values(sigmas.iter().map(|s| s / root).collect())?;
        let points = plateau_curve(l, cfg.h, &taus, cfg.steps, &opts, &plateau)?;
        curves.push(TauCurve::new(
            l,
            taus.values().to_vec(),
            points.iter().map(|p| p.plateau.height).collect(),
        )?);
    }
    let ds = sigma_collapse(&curves, &window)?;
    let mut rows = Vec::new();
    curve_rows(&ds, &mut rows, None, None);
    for (l, peak) in &ds.peaks {
        rows.push(CollapseRow {
            row: "peak",
            l: Some(*l),
            x: Some(peak.x),
            y: Some(peak.value),
            flag: Some(peak.boundary),
            ..Default::default()
        });
    }
    rows.push(CollapseRow {
        row: "summary",
        y: Some(ds.peak_spread),
        quality: Some(ds.quality),
        ..Default::default()
    });
    cfg.plateau = Some(plateau);
    cfg.sigma_grid = Some(sigma_grid);
    Ok((cfg, rows))
}

fn entanglement_rows(c: &Common, grid_points: usize) -> Result<(RunConfig, Vec<CollapseRow>), CliError> {
    let mut cfg = RunConfig::resolve(
        c,
        &Defaults {
            command: "collapse",
            l: &[8, 12, 16],
            tau_grid: Some("0.05:0.8:0.05"),
            steps: 10,
            engine: EngineChoice::Statevector,
        },
    )?;
    if cfg.single_engine()? != Engine::StateVector {
        return Err(CliError::Config("the entanglement collapse needs --engine statevector".into()));
    }
    let snapshot = c.snapshot.unwrap_or(cfg.steps);
    let tau_cs: Grid = match &c.tau_c {
        Some(g) => g.clone(),
        None => "0.1:0.5:0.02".parse().map_err(CliError::Config)?,
    };
    let mus: Grid = match &c.mu {
        Some(g) => g.clone(),
        None => "0:1:0.05".parse().map_err(CliError::Config)?,
    };
    let opts = cfg.engine_options(Engine::StateVector);
    let mut curves = Vec::new();
    for &l in &cfg.l {
        let block = blocks_for(c, l);
        if block.len() != 1 {
            return Err(CliError::Config("the entanglement collapse takes a single --blocks value".into()));
        }
        curves.push(entropy_curve(l, cfg.h, cfg.taus(), snapshot, block[0], &opts)?);
    }
    let scan = scan_entanglement_collapse(&curves, tau_cs.values(), mus.values(), grid_points)?;
    let mut rows: Vec<CollapseRow> = scan
        .table
        .iter()
        .map(|&(tc, mu, q)| CollapseRow {
            row: "scan",
            tau_c: Some(tc),
            mu: Some(mu),
            quality: Some(q),
            ..Default::default()
        })
        .collect();
    let (tc, mu, _) = scan.best;
    let ds = entanglement_collapse(&curves, tc, mu, grid_points)?;
    curve_rows(&ds, &mut rows, Some(tc), Some(mu));
    let interpolated = match ds.kind {
        mipt_core::analysis::CollapseKind::Entanglement { interpolated, .. } => interpolated,
        mipt_core::analysis::CollapseKind::Sigma => false,
    };
    rows.push(CollapseRow {
        row: "summary",
        tau_c: Some(tc),
        mu: Some(mu),
        quality: Some(ds.quality),
        flag: Some(interpolated),
        ..Default::default()
    });
    cfg.snapshot = Some(snapshot);
    cfg.blocks = c.blocks.clone();
    cfg.tau_c = Some(tau_cs);
    cfg.mu = Some(mus);
    Ok((cfg, rows))
}

#[derive(Debug, Serialize)]
pub struct CheckRow {
    check: String,
    passed: bool,
    observed: f64,
    tolerance: f64,
    detail: String,
}

/// Runs the self-check suite. Returns the number of failed checks as well.
pub fn validate(c: &Common) -> Result<(RunConfig, Output, usize), CliError> {
    let mut cfg = RunConfig::resolve(
        c,
        &Defaults {
            command: "validate",
            l: &[4, 6, 8, 10],
            tau_grid: None,
            steps: 100,
            engine: EngineChoice::Both,
        },
    )?;
    let seed = c.seed.unwrap_or(ValidationConfig::default().seed);
    cfg.seed = Some(seed);
    let report = run_validation(&ValidationConfig {
        seed,
        steps: cfg.steps,
        precision: cfg.precision,
    })?;
    let failed = report.failures().count();
    let rows = report
        .checks
        .into_iter()
        .map(|ch| CheckRow {
            check: ch.name,
            passed: ch.passed,
            observed: ch.observed,
            tolerance: ch.tolerance,
            detail: ch.detail,
        })
        .collect();
    let table = Table {
        columns: &["check", "passed", "observed", "tolerance", "detail"],
        rows,
    };
    Ok((cfg, Output::Validate(table), failed))
}

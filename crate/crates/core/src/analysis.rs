//! Observables derived from raw series: plateau heights, finite
//! differences, peak locations, scaling collapses and logarithmic fits.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Knobs for locating the first plateau of a survival curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauConfig {
    /// Earliest step that may start a plateau window.
    pub n_min: usize,
    /// Number of consecutive steps in a window.
    pub window: usize,
    /// Largest per-step change `|R_n - R_{n-1}|` allowed inside a window.
    pub delta: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        Self {
            n_min: 2,
            window: 5,
            delta: 1e-3,
        }
    }
}

impl PlateauConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_min < 1 {
            return Err(Error::InvalidParams("plateau n_min must be at least 1".into()));
        }
        if self.window < 2 {
            return Err(Error::InvalidParams("plateau window must be at least 2".into()));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidParams("plateau delta must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauEstimate {
    pub height: f64,
    /// First step of the accepted window, if one was found.
    pub window_start: Option<usize>,
    /// Last step at which the per-step change was still shrinking.
    pub cutoff: usize,
    /// True when no window qualified and `height` is `R` at `cutoff`.
    pub fallback: bool,
}

/// Height of the first plateau of `R_1 .. R_N` (index 0 of `survival` is `R_1`).
///
/// With `d_n = |R_n - R_{n-1}|` and `R_0 = 1`, the search is confined to the
/// initial stretch where `d_n` keeps shrinking: `cutoff` is the first
/// `n >= n_min` with `d_{n+1} > d_n` (or `N`). The first window
/// `R_s .. R_{s+w-1}` with `n_min <= s <= cutoff` whose internal changes are
/// all within `delta` gives the height as its mean. Without such a window the
/// height is `R_cutoff` and the estimate is flagged.
pub fn plateau_height(survival: &[f64], cfg: &PlateauConfig) -> Result<PlateauEstimate> {
    cfg.validate()?;
    let n = survival.len();
    if n < cfg.n_min + cfg.window {
        return Err(Error::InvalidInput(format!(
            "series of length {n} is shorter than n_min + window = {}",
            cfg.n_min + cfg.window
        )));
    }
    let r = |k: usize| if k == 0 { 1.0 } else { survival[k - 1] };
    let d = |k: usize| (r(k) - r(k - 1)).abs();
    // Absorbs representation error in thresholds such as 0.300 - 0.299.
    let limit = cfg.delta * (1.0 + 1e-9);

    // Growth is judged with a relative margin so rounding noise on a
    // steady decline does not end the search.
    let cutoff = (cfg.n_min..n)
        .find(|&k| d(k + 1) > d(k) * (1.0 + 1e-9) + f64::EPSILON)
        .unwrap_or(n);
    for s in cfg.n_min..=cutoff {
        let end = s + cfg.window - 1;
        if end > n {
            break;
        }
        if (s + 1..=end).all(|k| d(k) <= limit) {
            let mean = (s..=end).map(r).sum::<f64>() / cfg.window as f64;
            return Ok(PlateauEstimate {
                height: mean,
                window_start: Some(s),
                cutoff,
                fallback: false,
            });
        }
    }
    Ok(PlateauEstimate {
        height: r(cutoff),
        window_start: None,
        cutoff,
        fallback: true,
    })
}

fn check_increasing(xs: &[f64]) -> Result<()> {
    for w in xs.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidInput(format!(
                "abscissae must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Forward differences `(y_{i+1} - y_i) / (x_{i+1} - x_i)` placed at the
/// midpoints `(x_i + x_{i+1}) / 2`.
pub fn two_point_derivative(xs: &[f64], ys: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InvalidInput("derivative needs at least two points".into()));
    }
    check_increasing(xs)?;
    Ok(xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (0.5 * (x[0] + x[1]), (y[1] - y[0]) / (x[1] - x[0])))
        .unzip())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakEstimate {
    pub x: f64,
    pub value: f64,
    pub index: usize,
    /// The maximum sits on the first or last point.
    pub boundary: bool,
    /// Vertex of the parabola through the peak and its neighbours, for
    /// interior peaks.
    pub refined: Option<(f64, f64)>,
}

/// Location of the largest value; the smallest `x` wins ties.
pub fn peak_location(xs: &[f64], values: &[f64]) -> Result<PeakEstimate> {
    if xs.len() != values.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            got: values.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::InvalidInput("peak location needs at least three points".into()));
    }
    let mut index = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[index] {
            index = i;
        }
    }
    let boundary = index == 0 || index == xs.len() - 1;
    let refined = if boundary {
        None
    } else {
        parabola_vertex(
            (xs[index - 1], values[index - 1]),
            (xs[index], values[index]),
            (xs[index + 1], values[index + 1]),
        )
    };
    Ok(PeakEstimate {
        x: xs[index],
        value: values[index],
        index,
        boundary,
        refined,
    })
}

fn parabola_vertex(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> Option<(f64, f64)> {
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    // Newton form: y = y0 + a (x - x0) + c (x - x0)(x - x1).
    let a = (y1 - y0) / (x1 - x0);
    let b = (y2 - y1) / (x2 - x1);
    let c = (b - a) / (x2 - x0);
    if !(c < 0.0) {
        return None;
    }
    let xv = 0.5 * (x0 + x1) - a / (2.0 * c);
    let yv = y0 + a * (xv - x0) + c * (xv - x0) * (xv - x1);
    Some((xv, yv))
}

/// Linear interpolation on strictly increasing `xs`; `None` outside the range.
pub fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    if xs.is_empty() || xs.len() != ys.len() || x < xs[0] || x > xs[xs.len() - 1] {
        return None;
    }
    let i = xs.partition_point(|&v| v < x);
    if xs[i] == x {
        return Some(ys[i]);
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    let t = (x - x0) / (x1 - x0);
    Some(ys[i - 1] + t * (ys[i] - ys[i - 1]))
}

/// One input curve `y(tau)` for chain length `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauCurve {
    pub l: usize,
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
}

impl TauCurve {
    pub fn new(l: usize, taus: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if taus.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: taus.len(),
                got: values.len(),
            });
        }
        check_increasing(&taus)?;
        Ok(Self { l, taus, values })
    }
}

/// One rescaled curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseCurve {
    pub l: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CollapseKind {
    /// `dH/dsigma` against `sigma = tau sqrt(L)`.
    Sigma,
    /// `S(tau) - S(tau_c)` against `(tau - tau_c) L^mu`.
    Entanglement {
        tau_c: f64,
        mu: f64,
        /// `S(tau_c)` was interpolated for at least one curve.
        interpolated: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseDataset {
    pub kind: CollapseKind,
    pub curves: Vec<CollapseCurve>,
    /// Discrete peak of each curve (sigma collapses only).
    pub peaks: Vec<(usize, PeakEstimate)>,
    /// Largest pairwise `|x_a - x_b| / min(x_a, x_b)` among peak positions.
    pub peak_spread: f64,
    /// Mean over curve pairs of the mean squared difference on a common grid.
    pub quality: f64,
}

/// Window and grid used for collapse comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub grid_points: usize,
}

impl Default for CollapseConfig {
    fn default() -> Self {
        Self {
            sigma_min: 0.2,
            sigma_max: 3.0,
            grid_points: 64,
        }
    }
}

/// Mean pairwise squared distance after resampling every curve to
/// `points` equally spaced abscissae on the common overlap.
pub fn collapse_quality(curves: &[CollapseCurve], points: usize) -> Result<f64> {
    if curves.len() < 2 {
        return Ok(0.0);
    }
    let lo = curves
        .iter()
        .map(|c| c.x.first().copied().unwrap_or(f64::INFINITY))
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = curves
        .iter()
        .map(|c| c.x.last().copied().unwrap_or(f64::NEG_INFINITY))
        .fold(f64::INFINITY, f64::min);
    if !(hi > lo) || points < 2 {
        return Err(Error::InvalidInput(
            "collapse curves share no abscissa range".into(),
        ));
    }
    let grid: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    let resampled: Vec<Vec<f64>> = curves
        .iter()
        .map(|c| {
            grid.iter()
                .map(|&x| interpolate(&c.x, &c.y, x.clamp(c.x[0], c.x[c.x.len() - 1])).unwrap())
                .collect()
        })
        .collect();
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..resampled.len() {
        for j in i + 1..resampled.len() {
            let msd: f64 = resampled[i]
                .iter()
                .zip(&resampled[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / points as f64;
            total += msd;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

fn peak_spread(xs: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, &a) in xs.iter().enumerate() {
        for &b in &xs[i + 1..] {
            worst = worst.max((a - b).abs() / a.min(b));
        }
    }
    worst
}

/// `dH/dsigma` curves for plateau heights `H(tau)` of several chains.
///
/// Each curve must reach across `[sigma_min, sigma_max]` (1e-9 slack).
pub fn sigma_collapse(curves: &[TauCurve], cfg: &CollapseConfig) -> Result<CollapseDataset> {
    if curves.is_empty() {
        return Err(Error::InvalidInput("no curves to collapse".into()));
    }
    let mut out = Vec::with_capacity(curves.len());
    let mut peaks = Vec::with_capacity(curves.len());
    for c in curves {
        let scale = (c.l as f64).sqrt();
        let sigmas: Vec<f64> = c.taus.iter().map(|t| t * scale).collect();
        let (first, last) = (sigmas[0], sigmas[sigmas.len() - 1]);
        if first > cfg.sigma_min + 1e-9 || last < cfg.sigma_max - 1e-9 {
            return Err(Error::InvalidInput(format!(
                "L = {} covers sigma in [{first:.4}, {last:.4}], need [{}, {}]",
                c.l, cfg.sigma_min, cfg.sigma_max
            )));
        }
        let (x, y) = two_point_derivative(&sigmas, &c.values)?;
        peaks.push((c.l, peak_location(&x, &y)?));
        out.push(CollapseCurve { l: c.l, x, y });
    }
    let quality = collapse_quality(&out, cfg.grid_points)?;
    let xs: Vec<f64> = peaks.iter().map(|(_, p)| p.x).collect();
    Ok(CollapseDataset {
        kind: CollapseKind::Sigma,
        curves: out,
        peak_spread: peak_spread(&xs),
        peaks,
        quality,
    })
}

/// `S(tau) - S(tau_c)` against `(tau - tau_c) L^mu` for each chain.
pub fn entanglement_collapse(
    curves: &[TauCurve],
    tau_c: f64,
    mu: f64,
    grid_points: usize,
) -> Result<CollapseDataset> {
    if curves.is_empty() {
        return Err(Error::InvalidInput("no curves to collapse".into()));
    }
    let mut interpolated = false;
    let mut out = Vec::with_capacity(curves.len());
    for c in curves {
        let s_c = interpolate(&c.taus, &c.values, tau_c).ok_or_else(|| {
            Error::InvalidInput(format!(
                "tau_c = {tau_c} lies outside the swept grid for L = {}",
                c.l
            ))
        })?;
        interpolated |= !c.taus.contains(&tau_c);
        let scale = (c.l as f64).powf(mu);
        out.push(CollapseCurve {
            l: c.l,
            x: c.taus.iter().map(|t| (t - tau_c) * scale).collect(),
            y: c.values.iter().map(|s| s - s_c).collect(),
        });
    }
    let quality = collapse_quality(&out, grid_points)?;
    Ok(CollapseDataset {
        kind: CollapseKind::Entanglement {
            tau_c,
            mu,
            interpolated,
        },
        curves: out,
        peaks: Vec::new(),
        peak_spread: 0.0,
        quality,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseScan {
    /// `(tau_c, mu, quality)` for every grid point, `tau_c` major.
    pub table: Vec<(f64, f64, f64)>,
    pub best: (f64, f64, f64),
}

/// Collapse quality over a `(tau_c, mu)` grid; the lowest value wins, with
/// ties going to the earlier grid point.
pub fn scan_entanglement_collapse(
    curves: &[TauCurve],
    tau_cs: &[f64],
    mus: &[f64],
    grid_points: usize,
) -> Result<CollapseScan> {
    let mut table = Vec::with_capacity(tau_cs.len() * mus.len());
    for &tc in tau_cs {
        for &mu in mus {
            let q = entanglement_collapse(curves, tc, mu, grid_points)?.quality;
            table.push((tc, mu, q));
        }
    }
    let best = table
        .iter()
        .copied()
        .reduce(|a, b| if b.2 < a.2 { b } else { a })
        .ok_or_else(|| Error::InvalidInput("empty scan grid".into()))?;
    Ok(CollapseScan { table, best })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
}

/// Least-squares fit `R_n ~ a - b ln n` over `n_lo ..= n_hi`, where
/// `survival[0]` is `R_1`.
pub fn log_decay_fit(survival: &[f64], n_lo: usize, n_hi: usize) -> Result<LogFit> {
    if n_lo < 1 || n_hi > survival.len() || n_hi <= n_lo {
        return Err(Error::InvalidInput(format!(
            "fit range [{n_lo}, {n_hi}] is invalid for a series of length {}",
            survival.len()
        )));
    }
    let pts: Vec<(f64, f64)> = (n_lo..=n_hi)
        .map(|n| ((n as f64).ln(), survival[n - 1]))
        .collect();
    if let Some(&(x, y)) = pts.iter().find(|p| !(p.1 > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "R must be positive on the fit range, got {y} at n = {}",
            x.exp().round()
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let a = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - a - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LogFit {
        a,
        b: -slope,
        r_squared,
    })
}

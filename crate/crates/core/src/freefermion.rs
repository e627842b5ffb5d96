//! Free-fermion engine.
//!
//! After a Jordan-Wigner transformation the chain splits into independent
//! `(k, -k)` mode pairs with `k = (2m+1) pi / L`, `m = 0 .. L/2-1`. The
//! all-up state has every mode occupied, so its return amplitude factorizes:
//!
//! ```text
//! f_n = <I| exp(-i H tau n) |I> = prod_k [cos(lambda_k n tau) + i sin(lambda_k n tau) cos 2theta_k]
//! ```
//!
//! Writing `|psi_n> = sum_m c_{n-m} exp(-i H tau m)|I>`, the projection step
//! turns into the convolution `c_{n+1} = -sum_{m=0}^{n} c_{n-m} f_{m+1}` with
//! `c_0 = 1`, and the survival probability is the Gram form
//! `R_n = sum_{j,l <= n} conj(c_j) c_l f_{j-l}` with `f_{-j} = conj(f_j)`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::ModelParams;
use crate::summation::{ComplexSum, NeumaierSum, PrecisionMode, RealSum};
use crate::{Error, Result};

/// Default ceiling on the number of recursion steps.
pub const DEFAULT_STEP_CAP: usize = 10_000;

/// Slack allowed on `R_n` before the run is declared numerically broken.
pub const PRECISION_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FermionMode {
    pub k: f64,
    /// Quasiparticle energy `2 sqrt(h^2 + 1 + 2h cos k)`.
    pub lambda: f64,
    /// `2 (h + cos k) / lambda`.
    pub cos_2theta: f64,
    /// `-2 sin k / lambda`, so that `exp(2i theta) = 2 (h + exp(-ik)) / lambda`.
    pub sin_2theta: f64,
}

impl FermionMode {
    /// Single-mode return amplitude after evolving for time `t`.
    #[inline]
    pub fn factor(&self, t: f64) -> Complex64 {
        let (s, c) = (self.lambda * t).sin_cos();
        Complex64::new(c, s * self.cos_2theta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FermionModeSet {
    params: ModelParams,
    modes: Vec<FermionMode>,
}

impl FermionModeSet {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn modes(&self) -> &[FermionMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

pub fn build_modes(params: &ModelParams) -> FermionModeSet {
    let l = params.l();
    let h = params.h();
    let modes = (0..l / 2)
        .map(|m| {
            let k = (2 * m + 1) as f64 * PI / l as f64;
            let (sin_k, cos_k) = k.sin_cos();
            // |h + e^{ik}| avoids the cancellation in h^2 + 1 + 2h cos k near h = 1.
            let lambda = 2.0 * (h + cos_k).hypot(sin_k);
            FermionMode {
                k,
                lambda,
                cos_2theta: 2.0 * (h + cos_k) / lambda,
                sin_2theta: -2.0 * sin_k / lambda,
            }
        })
        .collect();
    FermionModeSet {
        params: *params,
        modes,
    }
}

/// Pairwise product; the fixed tree makes results independent of how the
/// caller batches modes.
fn tree_product(mut v: Vec<Complex64>) -> Complex64 {
    if v.is_empty() {
        return Complex64::new(1.0, 0.0);
    }
    while v.len() > 1 {
        let next: Vec<Complex64> = v
            .chunks(2)
            .map(|p| if p.len() == 2 { p[0] * p[1] } else { p[0] })
            .collect();
        v = next;
    }
    v[0]
}

/// `f_n` for the given step duration. `f_0` is exactly 1.
pub fn overlap_f(modes: &FermionModeSet, tau: f64, n: usize) -> Complex64 {
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let t = tau * n as f64;
    tree_product(modes.modes.iter().map(|m| m.factor(t)).collect())
}

/// `f_0 .. f_{n_max}` with Hermitian extension to negative indices.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapSeries {
    pub tau: f64,
    values: Vec<Complex64>,
}

impl OverlapSeries {
    pub fn compute(modes: &FermionModeSet, tau: f64, n_max: usize) -> Self {
        Self {
            tau,
            values: (0..=n_max).map(|n| overlap_f(modes, tau, n)).collect(),
        }
    }

    /// Wraps precomputed values; `values[0]` must be 1.
    pub fn from_values(tau: f64, values: Vec<Complex64>) -> Result<Self> {
        if values.first() != Some(&Complex64::new(1.0, 0.0)) {
            return Err(Error::InvalidInput("overlap series must start with f_0 = 1".into()));
        }
        Ok(Self { tau, values })
    }

    /// Largest index stored.
    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `f_j` for any `|j| <= n_max`, using `f_{-j} = conj(f_j)`.
    #[inline]
    pub fn get(&self, j: i64) -> Complex64 {
        if j >= 0 {
            self.values[j as usize]
        } else {
            self.values[(-j) as usize].conj()
        }
    }
}

/// `c_0 .. c_{n_max}` from `c_{n+1} = -sum_{m=0}^{n} c_{n-m} f_{m+1}`.
pub fn recursion_coefficients(
    f: &OverlapSeries,
    n_max: usize,
    precision: PrecisionMode,
) -> Result<Vec<Complex64>> {
    if n_max > f.n_max() {
        return Err(Error::InvalidInput(format!(
            "overlap series holds {} terms, recursion needs {}",
            f.n_max(),
            n_max
        )));
    }
    let mut c = Vec::with_capacity(n_max + 1);
    c.push(Complex64::new(1.0, 0.0));
    for n in 1..=n_max {
        let s = convolution(&c, f, n, precision);
        let cn = -s;
        if !(cn.re.is_finite() && cn.im.is_finite()) {
            return Err(Error::Precision {
                step: n,
                reason: "non-finite recursion coefficient".into(),
            });
        }
        c.push(cn);
    }
    Ok(c)
}

/// `sum_{l=0}^{n-1} c_l f_{n-l}`, which equals `-c_n`.
#[inline]
fn convolution(c: &[Complex64], f: &OverlapSeries, n: usize, precision: PrecisionMode) -> Complex64 {
    let fv = f.values();
    match precision {
        PrecisionMode::Standard => c[..n]
            .iter()
            .enumerate()
            .map(|(l, cl)| cl * fv[n - l])
            .sum(),
        _ => {
            let mut acc = ComplexSum::new(precision);
            for (l, cl) in c[..n].iter().enumerate() {
                acc.add_product(*cl, fv[n - l]);
            }
            acc.value()
        }
    }
}

/// Direct evaluation of `sum_{j,l=0}^{n} conj(c_j) c_l f_{j-l}`; returns the
/// full complex value so the imaginary residue can be inspected. O(n^2).
pub fn survival_direct(
    c: &[Complex64],
    f: &OverlapSeries,
    n: usize,
    precision: PrecisionMode,
) -> Result<Complex64> {
    if n >= c.len() || n > f.n_max() {
        return Err(Error::InvalidInput(format!(
            "need coefficients and overlaps through index {n}"
        )));
    }
    let mut total = ComplexSum::new(precision);
    for j in 0..=n {
        let mut row = ComplexSum::new(precision);
        for (l, &cl) in c.iter().enumerate().take(n + 1) {
            row.add_product(cl, f.get(j as i64 - l as i64));
        }
        total.add_product(c[j].conj(), row.value());
    }
    Ok(total.value())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeFermionOptions {
    pub precision: PrecisionMode,
    pub step_cap: usize,
    /// Cross-check the incremental `R_n` against [`survival_direct`] at
    /// `n = 1, 2, 4, 8, ...` and at the last step.
    pub direct_checkpoints: bool,
}

impl Default for FreeFermionOptions {
    fn default() -> Self {
        Self {
            precision: PrecisionMode::Compensated,
            step_cap: DEFAULT_STEP_CAP,
            direct_checkpoints: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeFermionRun {
    pub params: ModelParams,
    /// `R_1 .. R_n`.
    pub survival: Vec<f64>,
    /// `p_1 .. p_n`.
    pub first_detection: Vec<f64>,
    /// `c_0 .. c_n`.
    pub coefficients: Vec<Complex64>,
}

/// Survival series for chains of any even length.
///
/// `R_n` is accumulated incrementally: going from `n-1` to `n` adds the
/// Gram terms that involve `c_n`, namely
/// `|c_n|^2 + 2 Re(conj(c_n) sum_{l<n} c_l f_{n-l})`, and the inner sum is
/// the one the recursion already computed.
pub fn survival_large_l(
    params: &ModelParams,
    n_steps: usize,
    opts: &FreeFermionOptions,
) -> Result<FreeFermionRun> {
    if n_steps == 0 {
        return Err(Error::InvalidParams("n_steps must be at least 1".into()));
    }
    if n_steps > opts.step_cap {
        return Err(Error::InvalidParams(format!(
            "n_steps = {n_steps} exceeds the configured cap of {}",
            opts.step_cap
        )));
    }
    let modes = build_modes(params);
    let f = OverlapSeries::compute(&modes, params.tau(), n_steps);
    let out = survival_from_overlaps(&f, n_steps, opts)?;
    Ok(FreeFermionRun {
        params: *params,
        survival: out.survival,
        first_detection: out.first_detection,
        coefficients: out.coefficients,
    })
}

/// Output of [`survival_from_overlaps`].
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapSurvival {
    pub survival: Vec<f64>,
    pub first_detection: Vec<f64>,
    pub coefficients: Vec<Complex64>,
}

/// The survival recursion driven by an arbitrary overlap series, with the
/// same sentinels as [`survival_large_l`].
pub fn survival_from_overlaps(
    f: &OverlapSeries,
    n_steps: usize,
    opts: &FreeFermionOptions,
) -> Result<OverlapSurvival> {
    if n_steps == 0 || n_steps > f.n_max() {
        return Err(Error::InvalidParams(format!(
            "n_steps must lie in [1, {}], got {n_steps}",
            f.n_max()
        )));
    }
    let mut c = Vec::with_capacity(n_steps + 1);
    c.push(Complex64::new(1.0, 0.0));
    let mut gram = RealSum::with_value(opts.precision, 1.0);
    let mut survival = Vec::with_capacity(n_steps);
    let mut next_check = 1;

    for n in 1..=n_steps {
        let s = convolution(&c, f, n, opts.precision);
        let cn = -s;
        if !(cn.re.is_finite() && cn.im.is_finite()) {
            return Err(Error::Precision {
                step: n,
                reason: "non-finite recursion coefficient".into(),
            });
        }
        c.push(cn);
        gram.add_product(cn.re, cn.re);
        gram.add_product(cn.im, cn.im);
        gram.add_product(2.0 * cn.re, s.re);
        gram.add_product(2.0 * cn.im, s.im);
        let r = gram.value();
        check_range(r, n)?;

        if opts.direct_checkpoints && (n == next_check || n == n_steps) {
            let direct = survival_direct(&c, f, n, opts.precision)?;
            if direct.im.abs() > PRECISION_EPSILON {
                return Err(Error::Precision {
                    step: n,
                    reason: format!("imaginary residue {:e} in R_n", direct.im),
                });
            }
            if (direct.re - r).abs() > PRECISION_EPSILON {
                return Err(Error::Precision {
                    step: n,
                    reason: format!(
                        "incremental R_n = {r} disagrees with direct evaluation {}",
                        direct.re
                    ),
                });
            }
            if n == next_check {
                next_check *= 2;
            }
        }
        survival.push(r.clamp(0.0, 1.0));
    }
    let first_detection = crate::protocol::first_detection_from_survival(&survival);
    Ok(OverlapSurvival {
        survival,
        first_detection,
        coefficients: c,
    })
}

fn check_range(r: f64, step: usize) -> Result<()> {
    if !(-PRECISION_EPSILON..=1.0 + PRECISION_EPSILON).contains(&r) {
        return Err(Error::Precision {
            step,
            reason: format!("R_n = {r} outside [0, 1]"),
        });
    }
    Ok(())
}

/// Modulus and continuous phase of `f_n`: `f_n = rho_n exp(i Phi_n)` with
///
/// ```text
/// rho_n = exp[ 1/2 sum_k ln(1 - (2 sin k sin(lambda_k n tau) / lambda_k)^2) ]
/// Phi_n = sum_k atan[ cos 2theta_k tan(lambda_k n tau) ]
/// ```
///
/// Each arctangent is continued across the poles of `tan`, so `Phi_n` is a
/// smooth function of `n tau` rather than a principal value.
pub fn rho_phi(modes: &FermionModeSet, tau: f64, n: usize) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let t = tau * n as f64;
    let mut log_rho = NeumaierSum::new();
    let mut phi = NeumaierSum::new();
    for m in &modes.modes {
        let x = m.lambda * t;
        let s = 2.0 * m.k.sin() * x.sin() / m.lambda;
        log_rho.add((-s * s).ln_1p());
        phi.add(continuous_phase(x, m.cos_2theta));
    }
    ((0.5 * log_rho.value()).exp(), phi.value())
}

/// Continuous argument of `cos x + i c sin x` for `x >= 0`.
fn continuous_phase(x: f64, c: f64) -> f64 {
    let sign = if c < 0.0 { -1.0 } else { 1.0 };
    let cos_x = x.cos();
    if cos_x.abs() > 1e-12 {
        let branch = ((x + FRAC_PI_2) / PI).floor();
        (c * x.tan()).atan() + sign * PI * branch
    } else {
        // At a pole of tan: take the principal argument of the factor itself
        // and shift it onto the branch that passes through sign(c)(pi/2 + k pi).
        let principal = (c * x.sin()).atan2(cos_x);
        let k = ((x - FRAC_PI_2) / PI).round();
        let target = sign * (FRAC_PI_2 + k * PI);
        principal + 2.0 * PI * ((target - principal) / (2.0 * PI)).round()
    }
}

/// Decay constant of the first-detection probability for the complementary
/// question "is M_z != 1":
/// `alpha = -(1 / (L tau^2)) sum_k ln[1 - (2 sin k sin(lambda_k tau) / lambda_k)^2]`.
///
/// The sum runs over the same momenta as [`build_modes`]. At `tau = 0` the
/// limit `sum_k (2 sin k)^2 / L` is returned.
pub fn alpha(params: &ModelParams) -> f64 {
    let modes = build_modes(params);
    let l = params.l() as f64;
    let tau = params.tau();
    let mut acc = NeumaierSum::new();
    if tau == 0.0 {
        for m in modes.modes() {
            acc.add((2.0 * m.k.sin()).powi(2));
        }
        return acc.value() / l;
    }
    for m in modes.modes() {
        let s = 2.0 * m.k.sin() * (m.lambda * tau).sin() / m.lambda;
        acc.add((-s * s).ln_1p());
    }
    -acc.value() / (l * tau * tau)
}

/// Largest chain accepted by [`even_sector_spectrum`].
pub const SPECTRUM_MAX_SITES: usize = 16;

/// Many-body spectrum of `H` in the sector with an even number of down
/// spins, assembled from the modes, sorted ascending.
///
/// Each `(k, -k)` pair contributes `-lambda_k` or `+lambda_k` when it is
/// empty or doubly excited, and `0` in either singly occupied state. The
/// sector keeps configurations with an even number of singly occupied pairs.
pub fn even_sector_spectrum(modes: &FermionModeSet) -> Result<Vec<f64>> {
    let l = modes.params.l();
    if l > SPECTRUM_MAX_SITES {
        return Err(Error::CapExceeded {
            l,
            cap: SPECTRUM_MAX_SITES,
        });
    }
    let mut levels = vec![(0.0, 0u32)];
    for m in &modes.modes {
        let mut next = Vec::with_capacity(levels.len() * 4);
        for &(e, singles) in &levels {
            next.push((e - m.lambda, singles));
            next.push((e + m.lambda, singles));
            next.push((e, singles + 1));
            next.push((e, singles + 1));
        }
        levels = next;
    }
    let mut out: Vec<f64> = levels
        .into_iter()
        .filter(|&(_, singles)| singles % 2 == 0)
        .map(|(e, _)| e)
        .collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

//! Matrix-free application of `H` and Chebyshev propagation of `exp(-i H tau)`.
//!
//! The Hamiltonian is never stored. Its diagonal is `-h (L - 2 popcount(i))`
//! and each bond contributes `-1` times the amplitude with both bond spins
//! flipped, found by XOR with a precomputed mask.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::model::{bond_masks, diagonal_energy, ModelParams, PureState};
use crate::{Error, Result};

/// Truncation tolerance used when none is given.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Below this dimension the kernels run on the calling thread.
const PARALLEL_MIN_DIM: usize = 1 << 14;
const CHUNK: usize = 1 << 12;

/// How the spectral interval of `H` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SpectralBounds {
    /// `[-L(1+h), L(1+h)]`, always valid.
    #[default]
    Crude,
    /// Extreme Ritz values of a short Krylov run from a seeded random vector,
    /// padded by 1% of the spectral radius plus the Ritz residual, and never
    /// wider than [`SpectralBounds::Crude`].
    Estimated { iterations: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevPlan {
    pub params: ModelParams,
    pub e_min: f64,
    pub e_max: f64,
    pub tolerance: f64,
    /// `(2 - delta_{k0}) J_k(b tau)` for `k = 0..=order`, with `b` the
    /// half-width of the spectral interval.
    pub coefficients: Vec<f64>,
}

impl ChebyshevPlan {
    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.e_max - self.e_min)
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.e_max + self.e_min)
    }
}

/// `H v` for a state of the chain described by `params`.
pub fn apply_hamiltonian(params: &ModelParams, v: &PureState) -> Result<PureState> {
    check_len(params, v)?;
    let mut out = PureState::zeros(params.l())?;
    apply_hamiltonian_into(params.l(), params.h(), v.amplitudes(), out.amplitudes_mut());
    Ok(out)
}

/// Writes `H input` into `out`. Both slices have length `2^l`.
pub fn apply_hamiltonian_into(l: usize, h: f64, input: &[Complex64], out: &mut [Complex64]) {
    assert_eq!(input.len(), 1 << l);
    assert_eq!(out.len(), input.len());
    let masks = bond_masks(l);
    let kernel = |offset: usize, chunk: &mut [Complex64]| {
        for (k, o) in chunk.iter_mut().enumerate() {
            let i = offset + k;
            let mut acc = input[i] * diagonal_energy(l, h, i);
            for &m in &masks {
                acc -= input[i ^ m];
            }
            *o = acc;
        }
    };
    if out.len() >= PARALLEL_MIN_DIM {
        out.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| kernel(c * CHUNK, chunk));
    } else {
        kernel(0, out);
    }
}

/// `J_0(x) .. J_n(x)` by Miller's downward recurrence, normalized with
/// `J_0 + 2 sum_k J_{2k} = 1`.
pub fn bessel_j_sequence(x: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    if ax < 1e-8 {
        // Two terms of the power series are exact to double precision here.
        let half = 0.5 * x;
        let mut lead = 1.0;
        for (k, v) in out.iter_mut().enumerate() {
            if k > 0 {
                lead *= half / k as f64;
            }
            *v = lead * (1.0 - half * half / (k as f64 + 1.0));
        }
        return out;
    }
    let top = n.max(ax.ceil() as usize) + 1;
    let mut start = top + (160.0 * top as f64).sqrt() as usize + 10;
    start += start % 2;

    let mut next = 0.0;
    let mut cur = 1e-300;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let prev = (2.0 * k as f64 / ax) * cur - next;
        next = cur;
        cur = prev;
        // `cur` now holds J_{k-1} up to scale.
        if k - 1 <= n {
            out[k - 1] = cur;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    norm += cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
    if x < 0.0 {
        for (k, v) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// Plan with the crude spectral bounds.
pub fn make_plan(params: &ModelParams, tolerance: f64) -> Result<ChebyshevPlan> {
    make_plan_with(params, tolerance, SpectralBounds::Crude)
}

pub fn make_plan_with(
    params: &ModelParams,
    tolerance: f64,
    bounds: SpectralBounds,
) -> Result<ChebyshevPlan> {
    if !(tolerance > 0.0 && tolerance <= 1e-6) {
        return Err(Error::InvalidParams(format!(
            "Chebyshev tolerance must lie in (0, 1e-6], got {tolerance}"
        )));
    }
    let crude = params.l() as f64 * (1.0 + params.h());
    let (e_min, e_max) = match bounds {
        SpectralBounds::Crude => (-crude, crude),
        SpectralBounds::Estimated { iterations, seed } => {
            let (lo, hi) = krylov_extremes(params, iterations.max(2), seed)?;
            (lo.max(-crude), hi.min(crude))
        }
    };
    let b = 0.5 * (e_max - e_min);
    let x = b * params.tau();

    let mut len = (1.3 * x).ceil() as usize + 40;
    let js = loop {
        let js = bessel_j_sequence(x, len);
        if 2.0 * js[len].abs() < 0.1 * tolerance && len as f64 > x {
            break js;
        }
        len *= 2;
    };
    // Last index whose coefficient still matters; past the argument the
    // Bessel tail decays monotonically.
    let mut order = 0;
    for (k, j) in js.iter().enumerate() {
        let c = if k == 0 { j.abs() } else { 2.0 * j.abs() };
        if c >= tolerance {
            order = k;
        }
    }
    let coefficients = js[..=order]
        .iter()
        .enumerate()
        .map(|(k, j)| if k == 0 { *j } else { 2.0 * j })
        .collect();
    Ok(ChebyshevPlan {
        params: *params,
        e_min,
        e_max,
        tolerance,
        coefficients,
    })
}

/// `exp(-i H tau) v` by the three-term Chebyshev recurrence on the rescaled
/// Hamiltonian `(H - center) / half_width`.
pub fn evolve(plan: &ChebyshevPlan, v: &PureState) -> Result<PureState> {
    check_len(&plan.params, v)?;
    let l = plan.params.l();
    let h = plan.params.h();
    let b = plan.half_width();
    let c = plan.center();
    let coeffs = &plan.coefficients;

    let mut result: Vec<Complex64> = v.amplitudes().iter().map(|a| a * coeffs[0]).collect();
    if plan.order() >= 1 {
        let mut prev = v.amplitudes().to_vec();
        let mut cur = vec![Complex64::new(0.0, 0.0); prev.len()];
        // T_1 v = (H - c) v / b
        apply_hamiltonian_into(l, h, &prev, &mut cur);
        let phase1 = minus_i_pow(1) * coeffs[1];
        for ((t, x), r) in cur.iter_mut().zip(&prev).zip(result.iter_mut()) {
            *t = (*t - x * c) / b;
            *r += *t * phase1;
        }
        for (k, &coef) in coeffs.iter().enumerate().skip(2) {
            chebyshev_step(l, h, b, c, &cur, &mut prev, &mut result, minus_i_pow(k) * coef);
            std::mem::swap(&mut prev, &mut cur);
        }
    }
    let global = Complex64::from_polar(1.0, -c * plan.params.tau());
    if c != 0.0 {
        for r in result.iter_mut() {
            *r *= global;
        }
    }
    PureState::from_amplitudes(l, result)
}

/// `prev <- 2 (H - c) cur / b - prev` and `result += weight * prev`, in one pass.
#[allow(clippy::too_many_arguments)]
fn chebyshev_step(
    l: usize,
    h: f64,
    b: f64,
    c: f64,
    cur: &[Complex64],
    prev: &mut [Complex64],
    result: &mut [Complex64],
    weight: Complex64,
) {
    let masks = bond_masks(l);
    let two_over_b = 2.0 / b;
    let kernel = |offset: usize, p: &mut [Complex64], r: &mut [Complex64]| {
        for k in 0..p.len() {
            let i = offset + k;
            let mut acc = cur[i] * (diagonal_energy(l, h, i) - c);
            for &m in &masks {
                acc -= cur[i ^ m];
            }
            let t = acc * two_over_b - p[k];
            p[k] = t;
            r[k] += t * weight;
        }
    };
    if prev.len() >= PARALLEL_MIN_DIM {
        prev.par_chunks_mut(CHUNK)
            .zip(result.par_chunks_mut(CHUNK))
            .enumerate()
            .for_each(|(n, (p, r))| kernel(n * CHUNK, p, r));
    } else {
        kernel(0, prev, result);
    }
}

fn minus_i_pow(k: usize) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

fn check_len(params: &ModelParams, v: &PureState) -> Result<()> {
    if v.dim() != params.dim() {
        return Err(Error::LengthMismatch {
            expected: params.dim(),
            got: v.dim(),
        });
    }
    Ok(())
}

/// Lanczos estimate of the extreme eigenvalues, padded outward.
fn krylov_extremes(params: &ModelParams, iterations: usize, seed: u64) -> Result<(f64, f64)> {
    let dim = params.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let n0 = norm(&v);
    v.iter_mut().for_each(|a| *a /= n0);
    let mut v_prev = vec![Complex64::new(0.0, 0.0); dim];
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    for _ in 0..iterations.min(dim) {
        apply_hamiltonian_into(params.l(), params.h(), &v, &mut w);
        let beta_prev = betas.last().copied().unwrap_or(0.0);
        let alpha: f64 = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
        for i in 0..dim {
            w[i] -= v[i] * alpha + v_prev[i] * beta_prev;
        }
        alphas.push(alpha);
        let beta = norm(&w);
        if beta < 1e-12 {
            break;
        }
        betas.push(beta);
        std::mem::swap(&mut v_prev, &mut v);
        for i in 0..dim {
            v[i] = w[i] / beta;
        }
    }
    let m = alphas.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = crate::linalg::symmetric_eigen(&t);
    let last_beta = betas.get(m - 1).copied().unwrap_or(0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut res_lo, mut res_hi) = (0.0, 0.0);
    for (j, &theta) in eig.eigenvalues.iter().enumerate() {
        let residual = (last_beta * eig.eigenvectors[(m - 1, j)]).abs();
        if theta < lo {
            lo = theta;
            res_lo = residual;
        }
        if theta > hi {
            hi = theta;
            res_hi = residual;
        }
    }
    let pad = 0.01 * lo.abs().max(hi.abs());
    Ok((lo - pad - res_lo, hi + pad + res_hi))
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{apply_dense, build_dense_hamiltonian, dense_evolution_operator};

    fn random_state(l: usize, seed: u64) -> PureState {
        PureState::random(l, seed).unwrap()
    }

    fn max_diff(a: &PureState, b: &PureState) -> f64 {
        a.amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    /// Power series, valid for moderate arguments.
    fn bessel_series(k: usize, x: f64) -> f64 {
        let mut term = (x / 2.0).powi(k as i32) / (1..=k).map(|i| i as f64).product::<f64>();
        let mut sum = term;
        for m in 1..80 {
            term *= -(x * x / 4.0) / (m as f64 * (m + k) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn bessel_matches_series_and_tables() {
        let js = bessel_j_sequence(1.0, 6);
        assert!((js[0] - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((js[1] - 0.440_050_585_744_933_5).abs() < 1e-15);
        for x in [0.3, 2.5, 7.0] {
            let js = bessel_j_sequence(x, 30);
            for (k, j) in js.iter().enumerate() {
                assert!((j - bessel_series(k, x)).abs() < 1e-12, "k={k} x={x}");
            }
        }
        let js = bessel_j_sequence(10.0, 12);
        assert!((js[5] + 0.234_061_528_186_793_6).abs() < 1e-13);
        let neg = bessel_j_sequence(-2.0, 5);
        let pos = bessel_j_sequence(2.0, 5);
        assert_eq!(neg[1], -pos[1]);
        assert_eq!(neg[2], pos[2]);
    }

    #[test]
    fn hamiltonian_on_all_up() {
        let p = ModelParams::new(4, 0.5, 0.1).unwrap();
        let hv = apply_hamiltonian(&p, &PureState::all_up(4).unwrap()).unwrap();
        let a = hv.amplitudes();
        assert_eq!(a[0], Complex64::new(-2.0, 0.0));
        for mask in bond_masks(4) {
            assert_eq!(a[mask], Complex64::new(-1.0, 0.0));
        }
        let nonzero = a.iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 5);
    }

    #[test]
    fn hamiltonian_matches_dense_and_is_hermitian() {
        let p = ModelParams::new(8, 0.5, 0.1).unwrap();
        let v = random_state(8, 3);
        let hv = apply_hamiltonian(&p, &v).unwrap();
        let dense = build_dense_hamiltonian(&p).unwrap().map(|x| Complex64::new(x, 0.0));
        let want = apply_dense(&dense, &v).unwrap();
        assert!(max_diff(&hv, &want) < 1e-12);
        assert!(v.inner(&hv).unwrap().im.abs() < 1e-12);
    }

    #[test]
    fn rejects_length_mismatch() {
        let p = ModelParams::new(6, 0.5, 0.1).unwrap();
        let v = PureState::all_up(4).unwrap();
        assert!(matches!(
            apply_hamiltonian(&p, &v),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn plan_order_tracks_argument() {
        let p = ModelParams::new(10, 0.5, 1.0).unwrap();
        let plan = make_plan(&p, 1e-14).unwrap();
        assert!(plan.order() as f64 >= plan.half_width() * p.tau());

        let p = ModelParams::new(10, 0.5, 1e-6).unwrap();
        assert!(make_plan(&p, 1e-14).unwrap().order() <= 5);

        let p = ModelParams::new(10, 0.5, 0.0).unwrap();
        assert_eq!(make_plan(&p, 1e-14).unwrap().order(), 0);

        assert!(make_plan(&p, 1e-3).is_err());
        assert!(make_plan(&p, 0.0).is_err());
    }

    #[test]
    fn tail_coefficient_below_tolerance() {
        let p = ModelParams::new(8, 1.5, 0.7).unwrap();
        let plan = make_plan(&p, 1e-12).unwrap();
        let js = bessel_j_sequence(plan.half_width() * p.tau(), plan.order() + 10);
        for j in &js[plan.order() + 1..] {
            assert!(2.0 * j.abs() < 1e-12);
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let p = ModelParams::new(6, 0.5, 0.0).unwrap();
        let v = random_state(6, 1);
        let out = evolve(&make_plan(&p, 1e-12).unwrap(), &v).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn matches_dense_exponential() {
        let p = ModelParams::new(8, 0.5, 0.2).unwrap();
        let v = random_state(8, 7);
        let plan = make_plan(&p, 1e-14).unwrap();
        let got = evolve(&plan, &v).unwrap();
        let want = apply_dense(&dense_evolution_operator(&p, 0.2).unwrap(), &v).unwrap();
        assert!(max_diff(&got, &want) < 1e-10);
        assert!((got.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn estimated_bounds_are_tighter_and_still_exact() {
        let p = ModelParams::new(8, 0.5, 0.9).unwrap();
        let est = make_plan_with(
            &p,
            1e-12,
            SpectralBounds::Estimated {
                iterations: 40,
                seed: 11,
            },
        )
        .unwrap();
        let crude = make_plan(&p, 1e-12).unwrap();
        assert!(est.half_width() <= crude.half_width());
        let eig = crate::model::dense_eigen(&p).unwrap();
        assert!(eig.eigenvalues.iter().all(|&e| e >= est.e_min && e <= est.e_max));
        let v = random_state(8, 2);
        let want = apply_dense(&dense_evolution_operator(&p, 0.9).unwrap(), &v).unwrap();
        assert!(max_diff(&evolve(&est, &v).unwrap(), &want) < 1e-10);
    }
}

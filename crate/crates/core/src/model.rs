//! Physical configuration, basis states and the dense reference Hamiltonian.
//!
//! Conventions used throughout the crate:
//!
//! * `s^x` and `s^z` are Pauli operators with eigenvalues ±1 (see
//!   [`SpinConvention`]).
//! * The chain is periodic: bond `(L-1, 0)` is present.
//! * Bit `j` of a basis index is the z-state of site `j`, with `0` meaning
//!   spin up. Index 0 is therefore the all-up state `|I>`.
//!
//! The Hamiltonian is `H = -sum_j s^x_j s^x_{j+1} - h sum_j s^z_j` with the
//! coupling fixed to 1.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{symmetric_eigen, DenseEigen};
use crate::{Error, Result};

/// Largest chain accepted by the dense oracle routines.
pub const DENSE_MAX_SITES: usize = 12;

/// Largest chain for which a full amplitude vector may be allocated.
pub const STATE_MAX_SITES: usize = 30;

/// Records the spin normalization. The fermion mode energies
/// `lambda_k = 2 sqrt(h^2 + 1 + 2h cos k)` only come out right when the spin
/// operators have eigenvalues ±1, which is what every routine here assumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinConvention;

impl SpinConvention {
    /// Eigenvalue magnitude of `s^x` and `s^z`.
    pub const EIGENVALUE: f64 = 1.0;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    l: usize,
    h: f64,
    tau: f64,
}

impl ModelParams {
    /// `l` must be even and at least 4, `h` finite and non-negative, `tau`
    /// finite and non-negative (zero is accepted for trivial checks).
    pub fn new(l: usize, h: f64, tau: f64) -> Result<Self> {
        if l < 4 || !l.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!(
                "chain length must be even and at least 4, got {l}"
            )));
        }
        if !h.is_finite() || h < 0.0 {
            return Err(Error::InvalidParams(format!(
                "field h must be finite and non-negative, got {h}"
            )));
        }
        if !tau.is_finite() || tau < 0.0 {
            return Err(Error::InvalidParams(format!(
                "step duration tau must be finite and non-negative, got {tau}"
            )));
        }
        Ok(Self { l, h, tau })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.l, self.h, tau)
    }

    /// Hilbert space dimension `2^L`.
    pub fn dim(&self) -> usize {
        1usize << self.l
    }

    /// `tau * sqrt(L)`.
    pub fn sigma(&self) -> f64 {
        self.tau * (self.l as f64).sqrt()
    }
}

/// Amplitude vector over the `2^L` computational basis states.
///
/// Protocol states are kept unnormalized: their squared norm is the
/// survival probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    l: usize,
    amps: Vec<Complex64>,
}

impl PureState {
    pub fn zeros(l: usize) -> Result<Self> {
        check_state_sites(l)?;
        Ok(Self {
            l,
            amps: vec![Complex64::new(0.0, 0.0); 1 << l],
        })
    }

    /// The all-up state `|I>`.
    pub fn all_up(l: usize) -> Result<Self> {
        let mut s = Self::zeros(l)?;
        s.amps[0] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn from_amplitudes(l: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_state_sites(l)?;
        if amps.len() != 1 << l {
            return Err(Error::LengthMismatch {
                expected: 1 << l,
                got: amps.len(),
            });
        }
        Ok(Self { l, amps })
    }

    /// Infers `L` from the vector length, which must be a power of two.
    pub fn from_vec(amps: Vec<Complex64>) -> Result<Self> {
        let n = amps.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "amplitude vector length {n} is not a power of two"
            )));
        }
        Self::from_amplitudes(n.trailing_zeros() as usize, amps)
    }

    pub fn num_sites(&self) -> usize {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.amps.len() != other.amps.len() {
            return Err(Error::LengthMismatch {
                expected: self.amps.len(),
                got: other.amps.len(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Normalized state with amplitudes uniform in the unit square around 0,
    /// drawn from a seeded ChaCha stream.
    pub fn random(l: usize, seed: u64) -> Result<Self> {
        check_state_sites(l)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..1usize << l)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        PureState { l, amps }.normalized()
    }

    /// Copy scaled to unit norm.
    pub fn normalized(&self) -> Result<PureState> {
        let n = self.norm_sqr();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let s = 1.0 / n.sqrt();
        Ok(PureState {
            l: self.l,
            amps: self.amps.iter().map(|a| a * s).collect(),
        })
    }

    /// Expectation of `M_z = (1/L) sum_j s^z_j`, normalized by `<psi|psi>`.
    pub fn magnetization_z(&self) -> Result<f64> {
        let norm = self.norm_sqr();
        if !(norm > 0.0) {
            return Err(Error::ZeroNorm);
        }
        let l = self.l as f64;
        let m: f64 = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| a.norm_sqr() * (l - 2.0 * i.count_ones() as f64))
            .sum();
        Ok(m / (l * norm))
    }
}

fn check_state_sites(l: usize) -> Result<()> {
    if l == 0 || l > STATE_MAX_SITES {
        return Err(Error::CapExceeded {
            l,
            cap: STATE_MAX_SITES,
        });
    }
    Ok(())
}

/// `|I>` for the given chain.
pub fn initial_state(params: &ModelParams) -> Result<PureState> {
    PureState::all_up(params.l())
}

/// Diagonal element `<i|H|i> = -h (L - 2 popcount(i))`.
#[inline]
pub fn diagonal_energy(l: usize, h: f64, index: usize) -> f64 {
    -h * (l as f64 - 2.0 * index.count_ones() as f64)
}

/// Bit masks of the `L` periodic bonds; flipping both spins of bond `j` is
/// `index ^ masks[j]`.
pub fn bond_masks(l: usize) -> Vec<usize> {
    (0..l).map(|j| (1usize << j) | (1usize << ((j + 1) % l))).collect()
}

/// Rotates site `j` to site `j + 1 (mod L)`.
pub fn cyclic_shift(index: usize, l: usize) -> usize {
    let mask = (1usize << l) - 1;
    ((index << 1) | (index >> (l - 1))) & mask
}

/// Dense `2^L x 2^L` Hamiltonian. All entries are real, so it is returned as
/// a real symmetric matrix. Oracle use only.
pub fn build_dense_hamiltonian(params: &ModelParams) -> Result<DMatrix<f64>> {
    let l = params.l();
    if l > DENSE_MAX_SITES {
        return Err(Error::CapExceeded {
            l,
            cap: DENSE_MAX_SITES,
        });
    }
    let dim = params.dim();
    let masks = bond_masks(l);
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        m[(i, i)] = diagonal_energy(l, params.h(), i);
        for &mask in &masks {
            m[(i ^ mask, i)] -= 1.0;
        }
    }
    Ok(m)
}

/// Exact spectrum and eigenvectors of the dense Hamiltonian.
pub fn dense_eigen(params: &ModelParams) -> Result<DenseEigen> {
    Ok(symmetric_eigen(&build_dense_hamiltonian(params)?))
}

/// `exp(-i H t)` built from the dense eigendecomposition. Oracle use only.
pub fn dense_evolution_operator(params: &ModelParams, t: f64) -> Result<DMatrix<Complex64>> {
    let eig = dense_eigen(params)?;
    Ok(evolution_from_eigen(&eig, t))
}

pub fn evolution_from_eigen(eig: &DenseEigen, t: f64) -> DMatrix<Complex64> {
    let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let phases = nalgebra::DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|e| Complex64::from_polar(1.0, -e * t)),
    );
    &v * DMatrix::from_diagonal(&phases) * v.transpose()
}

/// Applies a dense operator to a state.
pub fn apply_dense(op: &DMatrix<Complex64>, psi: &PureState) -> Result<PureState> {
    if op.ncols() != psi.dim() {
        return Err(Error::LengthMismatch {
            expected: op.ncols(),
            got: psi.dim(),
        });
    }
    let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
    let out = op * v;
    PureState::from_amplitudes(psi.num_sites(), out.as_slice().to_vec())
}

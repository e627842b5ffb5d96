//! Bipartite entanglement of protocol states: Schmidt spectra, von Neumann
//! entropy, the generalized geometric measure (GGM) and its survival-weighted
//! version (SAG).
//!
//! Blocks are contiguous prefixes `{0 .. l-1}` of the chain. Since both `H`
//! and `|I>` are translation invariant, any other contiguous block of the
//! same size gives the same answer.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::hermitian_eigenvalues;
use crate::model::PureState;
use crate::protocol::ProtocolRun;
use crate::{Error, Result};

/// Squared Schmidt coefficients below this are dropped from entropy sums.
pub const SPECTRUM_FLOOR: f64 = 1e-14;

/// Largest chain for which [`SplitSet::AllBipartitions`] is accepted.
pub const ALL_BIPARTITIONS_MAX_SITES: usize = 16;

/// Block `A = {0 .. block-1}` of an `sites`-site chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartitionSpec {
    sites: usize,
    block: usize,
}

impl BipartitionSpec {
    pub fn new(sites: usize, block: usize) -> Result<Self> {
        if block == 0 || block >= sites {
            return Err(Error::InvalidParams(format!(
                "block size must lie in [1, {}], got {block}",
                sites.saturating_sub(1)
            )));
        }
        Ok(Self { sites, block })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn block(&self) -> usize {
        self.block
    }

    /// Prefix of the complementary size. For translation-invariant states,
    /// such as every protocol state, its spectrum equals that of `self`.
    pub fn complement(&self) -> Self {
        Self {
            sites: self.sites,
            block: self.sites - self.block,
        }
    }
}

/// Which bipartitions the GGM maximizes over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitSet {
    /// Prefixes `{0 .. l-1}` for `l = 1 ..= L/2`.
    #[default]
    ContiguousPrefixes,
    /// Every unordered bipartition into two nonempty sets.
    AllBipartitions,
}

fn check_sites(psi: &PureState, spec: &BipartitionSpec) -> Result<()> {
    if psi.num_sites() != spec.sites {
        return Err(Error::InvalidInput(format!(
            "state has {} sites, bipartition expects {}",
            psi.num_sites(),
            spec.sites
        )));
    }
    Ok(())
}

/// Eigenvalues of the reduced density matrix on the smaller side of the
/// split where block A occupies the low `block` bits of `amps`.
fn spectrum_low_bits(amps: &[Complex64], sites: usize, block: usize) -> Vec<f64> {
    let da = 1usize << block;
    let db = 1usize << (sites - block);
    // Column b holds the amplitudes a + b * 2^block, which is contiguous.
    let m = DMatrix::from_column_slice(da, db, amps);
    let gram = if da <= db {
        &m * m.adjoint()
    } else {
        m.adjoint() * &m
    };
    let trace: f64 = gram.diagonal().iter().map(|z| z.re).sum();
    // Dividing by the trace absorbs the rounding left over from normalization.
    let mut ev: Vec<f64> = hermitian_eigenvalues(&gram)
        .into_iter()
        .map(|x| x.max(0.0) / trace)
        .collect();
    ev.reverse();
    ev
}

/// Squared Schmidt coefficients in descending order. The state is
/// normalized first; its length is `min(2^l, 2^(L-l))`.
pub fn schmidt_spectrum(psi: &PureState, spec: &BipartitionSpec) -> Result<Vec<f64>> {
    check_sites(psi, spec)?;
    let unit = psi.normalized()?;
    Ok(spectrum_low_bits(unit.amplitudes(), spec.sites, spec.block))
}

/// Squared Schmidt coefficients for an arbitrary subset `A` given as a bit
/// mask over sites.
pub fn schmidt_spectrum_mask(psi: &PureState, mask: usize) -> Result<Vec<f64>> {
    let l = psi.num_sites();
    let full = (1usize << l) - 1;
    if mask == 0 || mask & full == full || mask & !full != 0 {
        return Err(Error::InvalidParams(format!(
            "mask {mask:#b} is not a proper nonempty subset of {l} sites"
        )));
    }
    let unit = psi.normalized()?;
    let block = mask.count_ones() as usize;
    let permuted = gather_subset(unit.amplitudes(), l, mask);
    Ok(spectrum_low_bits(&permuted, l, block))
}

/// Reorders amplitudes so that the sites in `mask` become the low bits,
/// keeping the relative order within each side.
fn gather_subset(amps: &[Complex64], l: usize, mask: usize) -> Vec<Complex64> {
    let a_sites: Vec<usize> = (0..l).filter(|j| mask >> j & 1 == 1).collect();
    let b_sites: Vec<usize> = (0..l).filter(|j| mask >> j & 1 == 0).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
    for (idx, &amp) in amps.iter().enumerate() {
        let mut target = 0usize;
        for (pos, &j) in a_sites.iter().chain(&b_sites).enumerate() {
            target |= (idx >> j & 1) << pos;
        }
        out[target] = amp;
    }
    out
}

/// `-sum p ln p` over entries above [`SPECTRUM_FLOOR`].
pub fn entropy_from_spectrum(spectrum: &[f64]) -> f64 {
    let s: f64 = spectrum
        .iter()
        .filter(|&&p| p > SPECTRUM_FLOOR)
        .map(|&p| -p * p.ln())
        .sum();
    s.max(0.0)
}

/// Von Neumann entropy of block A, in nats.
pub fn entropy(psi: &PureState, spec: &BipartitionSpec) -> Result<f64> {
    Ok(entropy_from_spectrum(&schmidt_spectrum(psi, spec)?))
}

/// GGM over contiguous prefixes.
pub fn ggm(psi: &PureState) -> Result<f64> {
    ggm_with(psi, SplitSet::ContiguousPrefixes)
}

/// `1 - max` over the chosen splits of the largest squared Schmidt coefficient.
pub fn ggm_with(psi: &PureState, splits: SplitSet) -> Result<f64> {
    let l = psi.num_sites();
    if l < 2 {
        return Err(Error::InvalidInput("GGM needs at least two sites".into()));
    }
    let unit = psi.normalized()?;
    let mut best: f64 = 0.0;
    match splits {
        SplitSet::ContiguousPrefixes => {
            for block in 1..=l / 2 {
                let top = spectrum_low_bits(unit.amplitudes(), l, block)[0];
                best = best.max(top);
            }
        }
        SplitSet::AllBipartitions => {
            if l > ALL_BIPARTITIONS_MAX_SITES {
                return Err(Error::InvalidParams(format!(
                    "all-bipartition GGM is limited to {ALL_BIPARTITIONS_MAX_SITES} sites"
                )));
            }
            // Subsets avoiding the last site list each bipartition once.
            for mask in 1..(1usize << (l - 1)) {
                let block = mask.count_ones() as usize;
                let permuted = gather_subset(unit.amplitudes(), l, mask);
                let top = spectrum_low_bits(&permuted, l, block)[0];
                best = best.max(top);
            }
        }
    }
    Ok((1.0 - best).max(0.0))
}

/// Entanglement observables of one protocol step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglementRecord {
    pub n: usize,
    pub survival: f64,
    /// `(block size, entropy in nats)` for each requested block.
    pub entropies: Vec<(usize, f64)>,
    pub ggm: f64,
    /// `R_n * G(n)`.
    pub sag: f64,
    /// Running mean of `sag` over steps `1 ..= n`.
    pub cumulative_sag: f64,
}

/// Accumulates [`EntanglementRecord`]s from a stream of unnormalized
/// protocol states, so long runs need not keep every state in memory.
#[derive(Debug, Clone)]
pub struct EntanglementTracker {
    blocks: Vec<usize>,
    splits: SplitSet,
    sag_total: f64,
    finished: bool,
    records: Vec<EntanglementRecord>,
}

impl EntanglementTracker {
    pub fn new(blocks: Vec<usize>, splits: SplitSet) -> Self {
        Self {
            blocks,
            splits,
            sag_total: 0.0,
            finished: false,
            records: Vec::new(),
        }
    }

    /// Feeds `|psi_n>` with norm squared `r`. Returns `Ok(false)` once the
    /// state has been fully detected; later calls are ignored.
    pub fn observe(&mut self, n: usize, psi: &PureState, r: f64) -> Result<bool> {
        if self.finished {
            return Ok(false);
        }
        if !(r > 0.0) {
            self.finished = true;
            return Ok(false);
        }
        let unit = psi.normalized()?;
        let l = unit.num_sites();
        let entropies = self
            .blocks
            .iter()
            .map(|&b| {
                BipartitionSpec::new(l, b)?;
                let spectrum = spectrum_low_bits(unit.amplitudes(), l, b);
                Ok((b, entropy_from_spectrum(&spectrum)))
            })
            .collect::<Result<Vec<_>>>()?;
        let g = ggm_with(&unit, self.splits)?;
        let sag = r * g;
        self.sag_total += sag;
        let count = self.records.len() + 1;
        self.records.push(EntanglementRecord {
            n,
            survival: r,
            entropies,
            ggm: g,
            sag,
            cumulative_sag: self.sag_total / count as f64,
        });
        Ok(true)
    }

    pub fn records(&self) -> &[EntanglementRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<EntanglementRecord> {
        self.records
    }
}

/// SAG series over a run that kept its states, with no entropy blocks.
pub fn sag_series(run: &ProtocolRun) -> Result<Vec<EntanglementRecord>> {
    sag_series_with(run, &[], SplitSet::ContiguousPrefixes)
}

pub fn sag_series_with(
    run: &ProtocolRun,
    blocks: &[usize],
    splits: SplitSet,
) -> Result<Vec<EntanglementRecord>> {
    let states = run.states.as_ref().ok_or_else(|| {
        Error::InvalidInput("protocol run did not keep its states".into())
    })?;
    let mut tracker = EntanglementTracker::new(blocks.to_vec(), splits);
    for (k, (psi, &r)) in states.iter().zip(&run.survival).enumerate() {
        if !tracker.observe(k + 1, psi, r)? {
            break;
        }
    }
    Ok(tracker.into_records())
}

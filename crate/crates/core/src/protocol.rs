//! State-vector engine for the measurement protocol.
//!
//! One step evolves for `tau` and then projects out `|I>`:
//! `|psi'> = U|psi> - <I|U|psi> |I>`. States stay unnormalized, so
//! `<psi_n|psi_n>` is the survival probability `R_n`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::{initial_state, ModelParams, PureState};
use crate::propagator::{evolve, make_plan, ChebyshevPlan, DEFAULT_TOLERANCE};
use crate::{Error, Result};

/// Default largest chain the state-vector engine will run (64 MiB of amplitudes).
pub const DEFAULT_STATEVECTOR_CAP: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StatePolicy {
    #[default]
    NormsOnly,
    /// Keep every unnormalized `|psi_n>`.
    KeepStates,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolOptions {
    pub plan_tolerance: f64,
    pub cap: usize,
    pub policy: StatePolicy,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self {
            plan_tolerance: DEFAULT_TOLERANCE,
            cap: DEFAULT_STATEVECTOR_CAP,
            policy: StatePolicy::NormsOnly,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub params: ModelParams,
    pub n_steps: usize,
    /// `R_1 .. R_n`.
    pub survival: Vec<f64>,
    /// `p_1 .. p_n` with `p_k = R_{k-1} - R_k` and `R_0 = 1`.
    pub first_detection: Vec<f64>,
    /// `|psi_1> .. |psi_n>`, unnormalized, when requested.
    pub states: Option<Vec<PureState>>,
}

/// One evolve-then-measure step. The amplitude of `|I>` is exactly zero
/// afterwards.
pub fn measurement_step(plan: &ChebyshevPlan, psi: &PureState) -> Result<PureState> {
    let mut out = evolve(plan, psi)?;
    // Subtracting <I|U psi> |I> only touches index 0.
    out.amplitudes_mut()[0] = Complex64::new(0.0, 0.0);
    Ok(out)
}

/// Runs `n_steps` rounds from `|I>` with the default options.
pub fn run_protocol(params: &ModelParams, n_steps: usize, plan_tol: f64) -> Result<ProtocolRun> {
    run_protocol_opts(
        params,
        n_steps,
        &ProtocolOptions {
            plan_tolerance: plan_tol,
            ..ProtocolOptions::default()
        },
    )
}

pub fn run_protocol_opts(
    params: &ModelParams,
    n_steps: usize,
    opts: &ProtocolOptions,
) -> Result<ProtocolRun> {
    let mut states = match opts.policy {
        StatePolicy::KeepStates => Some(Vec::with_capacity(n_steps)),
        StatePolicy::NormsOnly => None,
    };
    let mut survival = Vec::with_capacity(n_steps);
    run_protocol_with(params, n_steps, opts, |_, psi, r| {
        survival.push(r);
        if let Some(s) = states.as_mut() {
            s.push(psi.clone());
        }
        Ok(())
    })?;
    let first_detection = first_detection_from_survival(&survival);
    Ok(ProtocolRun {
        params: *params,
        n_steps,
        survival,
        first_detection,
        states,
    })
}

/// Runs the protocol and hands `(n, |psi_n>, R_n)` to `observer` after each
/// step, without retaining states.
pub fn run_protocol_with<F>(
    params: &ModelParams,
    n_steps: usize,
    opts: &ProtocolOptions,
    mut observer: F,
) -> Result<()>
where
    F: FnMut(usize, &PureState, f64) -> Result<()>,
{
    if params.l() > opts.cap {
        return Err(Error::CapExceeded {
            l: params.l(),
            cap: opts.cap,
        });
    }
    if n_steps == 0 {
        return Err(Error::InvalidParams("n_steps must be at least 1".into()));
    }
    let plan = make_plan(params, opts.plan_tolerance)?;
    let mut psi = initial_state(params)?;
    for n in 1..=n_steps {
        psi = measurement_step(&plan, &psi)?;
        let r = psi.norm_sqr();
        if !r.is_finite() {
            return Err(Error::NonFinite { step: n });
        }
        observer(n, &psi, r)?;
    }
    Ok(())
}

pub fn first_detection_from_survival(survival: &[f64]) -> Vec<f64> {
    let mut prev = 1.0;
    survival
        .iter()
        .map(|&r| {
            let p = prev - r;
            prev = r;
            p
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{apply_dense, dense_evolution_operator};

    #[test]
    fn zero_time_detects_everything() {
        let p = ModelParams::new(4, 0.5, 0.0).unwrap();
        let plan = make_plan(&p, 1e-12).unwrap();
        let out = measurement_step(&plan, &initial_state(&p).unwrap()).unwrap();
        assert_eq!(out.norm_sqr(), 0.0);
        let run = run_protocol(&p, 5, 1e-12).unwrap();
        assert!(run.survival.iter().all(|&r| r == 0.0));
        assert_eq!(run.first_detection[0], 1.0);
    }

    #[test]
    fn first_step_is_pythagoras() {
        let p = ModelParams::new(8, 0.5, 0.37).unwrap();
        let plan = make_plan(&p, 1e-14).unwrap();
        let psi0 = initial_state(&p).unwrap();
        let f1 = evolve(&plan, &psi0).unwrap().amplitudes()[0];
        let psi1 = measurement_step(&plan, &psi0).unwrap();
        assert!((psi1.norm_sqr() - (1.0 - f1.norm_sqr())).abs() < 1e-13);
        assert_eq!(psi1.amplitudes()[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn zero_field_closed_form() {
        // At h = 0, L = 4: f_1 = 1 - sin^2(2 tau)/2.
        let tau = 0.3;
        let p = ModelParams::new(4, 0.0, tau).unwrap();
        let run = run_protocol(&p, 1, 1e-14).unwrap();
        let f1 = 1.0 - (2.0 * tau).sin().powi(2) / 2.0;
        assert!((run.survival[0] - (1.0 - f1 * f1)).abs() < 1e-12);

        let u = dense_evolution_operator(&p, tau).unwrap();
        let mut psi = apply_dense(&u, &initial_state(&p).unwrap()).unwrap();
        psi.amplitudes_mut()[0] = Complex64::new(0.0, 0.0);
        assert!((run.survival[0] - psi.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn invariants_hold() {
        let p = ModelParams::new(8, 1.5, 0.2).unwrap();
        let run = run_protocol_opts(
            &p,
            40,
            &ProtocolOptions {
                policy: StatePolicy::KeepStates,
                ..Default::default()
            },
        )
        .unwrap();
        let mut prev = 1.0;
        let mut total = 0.0;
        for (k, (&r, &pk)) in run.survival.iter().zip(&run.first_detection).enumerate() {
            assert!((0.0..=1.0).contains(&r));
            assert!(r <= prev + 1e-12);
            assert!(pk >= -1e-12);
            total += pk;
            assert!((1.0 - r - total).abs() < 1e-12);
            assert_eq!(run.states.as_ref().unwrap()[k].amplitudes()[0].norm(), 0.0);
            prev = r;
        }
    }

    #[test]
    fn cap_and_step_validation() {
        let p = ModelParams::new(24, 0.5, 0.1).unwrap();
        assert!(matches!(
            run_protocol(&p, 3, 1e-12),
            Err(Error::CapExceeded { l: 24, cap: 22 })
        ));
        let p = ModelParams::new(4, 0.5, 0.1).unwrap();
        assert!(run_protocol(&p, 0, 1e-12).is_err());
    }
}

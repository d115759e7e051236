//! Generalized Stern-Gerlach apparatus.
//!
//! The apparatus is described only through its spin Hamiltonian
//! `H(r) = sum_nu Phi_nu(r) T_nu`, where the coefficient field `Phi` is tuned so
//! that both `Phi_nu(0)` and `d Phi_nu / d r1 (0)` equal the target multipole
//! coefficients `a_nu`. A particle in an eigenstate of `H(0)` with eigenvalue
//! `A_n` then feels the force `-A_n` along `r1` at the centre.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{CVector, HermitianMatrix};
use crate::multipole::{combine, MultipoleBasis, SpinObservable};

pub type Position = [f64; 3];

/// Finite-difference step used when callers do not choose one.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Tuning tolerance applied by [`force_on_eigenstate`], relative to
/// `max(1, max |a_nu|)`.
pub const FORCE_TUNING_TOL: f64 = 1e-8;

type CustomRule = Arc<dyn Fn(&[f64], Position) -> Vec<f64> + Send + Sync>;

/// How the coefficient field varies in space, given the target coefficients.
#[derive(Clone)]
pub enum ProfileRule {
    /// `a (1 + r1)`
    Linear,
    /// `a`, which cannot separate beams.
    Constant,
    /// `a exp(r1)`
    Exponential,
    Custom(CustomRule),
}

impl fmt::Debug for ProfileRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileRule::Linear => f.write_str("Linear"),
            ProfileRule::Constant => f.write_str("Constant"),
            ProfileRule::Exponential => f.write_str("Exponential"),
            ProfileRule::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FieldProfile {
    pub target: Vec<f64>,
    pub rule: ProfileRule,
}

impl FieldProfile {
    pub fn new(target: Vec<f64>, rule: ProfileRule) -> Self {
        Self { target, rule }
    }

    /// Linear profile aimed at an observable's multipole coefficients.
    pub fn targeting(obs: &SpinObservable) -> Self {
        Self::new(obs.coefficients.clone(), ProfileRule::Linear)
    }

    /// `Phi_nu(r)` for every `nu`.
    pub fn evaluate(&self, r: Position) -> Vec<f64> {
        let a = &self.target;
        match &self.rule {
            ProfileRule::Linear => a.iter().map(|x| x * (1.0 + r[0])).collect(),
            ProfileRule::Constant => a.clone(),
            ProfileRule::Exponential => {
                let f = r[0].exp();
                a.iter().map(|x| x * f).collect()
            }
            ProfileRule::Custom(rule) => rule(a, r),
        }
    }

    /// Central difference of `Phi` along `r1` at the origin.
    pub fn derivative_at_origin(&self, h: f64) -> Vec<f64> {
        let plus = self.evaluate([h, 0.0, 0.0]);
        let minus = self.evaluate([-h, 0.0, 0.0]);
        plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * h)).collect()
    }
}

pub fn hamiltonian_at(p: &FieldProfile, r: Position, basis: &MultipoleBasis) -> Result<HermitianMatrix> {
    combine(&p.evaluate(r), basis)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TuningReport {
    pub tuned: bool,
    /// Coefficient with the largest deviation, if there are any coefficients.
    pub worst_index: Option<usize>,
    pub max_value_deviation: f64,
    pub max_derivative_deviation: f64,
}

impl TuningReport {
    pub fn max_deviation(&self) -> f64 {
        self.max_value_deviation.max(self.max_derivative_deviation)
    }
}

/// Check `Phi_nu(0) = a_nu` and `d Phi_nu / d r1 (0) = a_nu` within `tol`.
pub fn check_tuning(p: &FieldProfile, h: f64, tol: f64) -> TuningReport {
    let at_origin = p.evaluate([0.0; 3]);
    let slope = p.derivative_at_origin(h);
    let mut report = TuningReport {
        tuned: true,
        worst_index: None,
        max_value_deviation: 0.0,
        max_derivative_deviation: 0.0,
    };
    let mut worst = -1.0;
    for (nu, &a) in p.target.iter().enumerate() {
        let dv = (at_origin.get(nu).copied().unwrap_or(f64::NAN) - a).abs();
        let dd = (slope.get(nu).copied().unwrap_or(f64::NAN) - a).abs();
        report.max_value_deviation = report.max_value_deviation.max(dv);
        report.max_derivative_deviation = report.max_derivative_deviation.max(dd);
        let local = dv.max(dd);
        if !(local <= tol) {
            report.tuned = false;
        }
        if local > worst || local.is_nan() {
            worst = if local.is_nan() { f64::INFINITY } else { local };
            report.worst_index = Some(nu);
        }
    }
    report
}

/// `F1 = -d <psi|H(r)|psi> / d r1` at the origin, by central difference.
pub fn force_on_eigenstate(
    p: &FieldProfile,
    state: &CVector,
    basis: &MultipoleBasis,
    h: f64,
) -> Result<f64> {
    if p.target.len() != basis.len() {
        return Err(Error::DimensionMismatch { expected: basis.len(), got: p.target.len() });
    }
    if state.len() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: state.len() });
    }
    let scale = p.target.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let report = check_tuning(p, h, FORCE_TUNING_TOL * scale);
    if !report.tuned {
        return Err(Error::NotTuned {
            index: report.worst_index.unwrap_or(0),
            deviation: report.max_deviation(),
        });
    }
    let energy = |r: Position| hamiltonian_at(p, r, basis).map(|hm| hm.expectation(state));
    let plus = energy([h, 0.0, 0.0])?;
    let minus = energy([-h, 0.0, 0.0])?;
    Ok(-(plus - minus) / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, spectral_oracle};
    use crate::multipole::{build_multipole_basis, decompose};
    use crate::rng::{random_hermitian, SimRng};
    use crate::spin::{build_spin_operators, SpinSystem};

    fn setup(n: usize, seed: u64) -> (HermitianMatrix, MultipoleBasis, FieldProfile) {
        let sys = SpinSystem::from_dim(n).unwrap();
        let basis = build_multipole_basis(&build_spin_operators(sys)).unwrap();
        let a = random_hermitian(n, &mut SimRng::new(seed));
        let profile = FieldProfile::targeting(&decompose(&a, &basis).unwrap());
        (a, basis, profile)
    }

    #[test]
    fn origin_hamiltonian_is_target() {
        let (a, basis, profile) = setup(3, 1);
        let h0 = hamiltonian_at(&profile, [0.0; 3], &basis).unwrap();
        assert!((h0.as_matrix() - a.as_matrix()).norm() <= 1e-10 * a.frobenius_norm());
        let h1 = hamiltonian_at(&profile, [1.0, 0.0, 0.0], &basis).unwrap();
        assert!((h1.as_matrix() - a.as_matrix().scale(2.0)).norm() <= 1e-10 * a.frobenius_norm());
        // Transverse displacement does nothing under the default rule.
        let side = hamiltonian_at(&profile, [0.0, 3.0, -2.0], &basis).unwrap();
        assert_eq!(side, h0);
    }

    #[test]
    fn zero_profile_is_zero_everywhere() {
        let (_, basis, _) = setup(2, 0);
        let p = FieldProfile::new(vec![0.0; 4], ProfileRule::Linear);
        for r in [[0.0; 3], [1.0, 2.0, 3.0], [-5.0, 0.0, 1.0]] {
            assert_eq!(hamiltonian_at(&p, r, &basis).unwrap(), HermitianMatrix::zeros(2));
        }
        let psi = CVector::from_vec(vec![c(0.6), c(0.8)]);
        assert_eq!(force_on_eigenstate(&p, &psi, &basis, DEFAULT_STEP).unwrap(), 0.0);
    }

    #[test]
    fn tuning_rules() {
        let target = vec![1.0, -0.5, 2.0, 0.25];
        let linear = FieldProfile::new(target.clone(), ProfileRule::Linear);
        assert!(check_tuning(&linear, 1e-5, 1e-10).tuned);

        let constant = FieldProfile::new(target.clone(), ProfileRule::Constant);
        let report = check_tuning(&constant, 1e-5, 1e-10);
        assert!(!report.tuned);
        assert_eq!(report.worst_index, Some(2));
        assert_eq!(report.max_derivative_deviation, 2.0);
        assert_eq!(report.max_value_deviation, 0.0);

        let exponential = FieldProfile::new(target, ProfileRule::Exponential);
        let report = check_tuning(&exponential, 1e-5, 1e-8);
        assert!(report.tuned, "{report:?}");
        assert!(report.max_derivative_deviation > 0.0);
    }

    #[test]
    fn custom_rule_with_offset_fails() {
        let rule: CustomRule = Arc::new(|a: &[f64], r: Position| a.iter().map(|x| x * (1.0 + r[0]) + 0.1).collect());
        let p = FieldProfile::new(vec![1.0], ProfileRule::Custom(rule));
        let report = check_tuning(&p, 1e-5, 1e-8);
        assert!(!report.tuned);
        assert!((report.max_value_deviation - 0.1).abs() < 1e-12);
    }

    #[test]
    fn spin_half_up_in_sz() {
        let sys = SpinSystem::from_twice_spin(1);
        let ops = build_spin_operators(sys);
        let basis = build_multipole_basis(&ops).unwrap();
        let profile = FieldProfile::targeting(&decompose(&ops.sz, &basis).unwrap());
        let up = CVector::from_vec(vec![c(1.0), c(0.0)]);
        let f = force_on_eigenstate(&profile, &up, &basis, DEFAULT_STEP).unwrap();
        assert!((f + 0.5).abs() < 1e-10, "{f}");
    }

    #[test]
    fn forces_on_oracle_eigenvectors() {
        let (a, basis, profile) = setup(3, 21);
        let spec = spectral_oracle(&a).unwrap();
        for k in 0..3 {
            let f = force_on_eigenstate(&profile, &spec.eigenvector(k), &basis, DEFAULT_STEP).unwrap();
            assert!((f + spec.eigenvalues[k]).abs() < 1e-10, "k={k} f={f}");
        }
    }

    #[test]
    fn constant_profile_is_rejected() {
        let (_, basis, mut profile) = setup(2, 4);
        profile.rule = ProfileRule::Constant;
        let psi = CVector::from_vec(vec![c(1.0), c(0.0)]);
        assert!(matches!(
            force_on_eigenstate(&profile, &psi, &basis, DEFAULT_STEP),
            Err(Error::NotTuned { .. })
        ));
    }
}

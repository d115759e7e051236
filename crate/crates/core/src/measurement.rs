//! Projective measurement simulator.
//!
//! An [`ObservableHandle`] owns a Hermitian matrix together with its spectral
//! projectors. Callers only ever see eigenvalues as measurement outcomes:
//! measuring a state `rho` picks branch `n` with probability `Tr[rho P_n]` and
//! leaves the system in `P_n rho P_n / p_n`.

use crate::error::{Error, Result};
use crate::linalg::{c, max_abs, spectral_oracle, CMatrix, CVector, HermitianMatrix};
use crate::rng::SimRng;

/// Eigenvalues closer than this (relative to the largest magnitude) share one
/// measurement branch.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Branches less likely than this are never sampled.
pub const MIN_BRANCH_PROBABILITY: f64 = 1e-15;

const STATE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validate Hermiticity, unit trace and positivity.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        let dev = max_abs(&(&m - m.adjoint()));
        if dev > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {dev:e})")));
        }
        let h = HermitianMatrix::symmetrize(&m);
        let tr = h.as_matrix().trace().re;
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min_eig = spectral_oracle(&h)?.eigenvalues[0];
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(Self(h.into_matrix()))
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    /// `|v><v|` for a normalized copy of `v`.
    pub fn pure(v: &CVector) -> Self {
        let v = v / c(v.norm());
        Self(HermitianMatrix::symmetrize(&(&v * v.adjoint())).into_matrix())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// `Tr[rho^2]`
    pub fn purity(&self) -> f64 {
        self.0.dotc(&self.0).re
    }

    /// `Tr[rho X]` for Hermitian `X`.
    pub fn expectation(&self, x: &CMatrix) -> f64 {
        x.dotc(&self.0).re
    }

    pub fn frobenius_distance(&self, other: &CMatrix) -> f64 {
        (&self.0 - other).norm()
    }
}

/// The maximally mixed state `E / N`.
pub fn prepare_mixed_state(n: usize) -> Result<DensityMatrix> {
    if n == 0 {
        return Err(Error::InvalidConfig("state dimension must be positive".into()));
    }
    Ok(DensityMatrix(CMatrix::identity(n, n) / c(n as f64)))
}

#[derive(Clone, Debug)]
struct Branch {
    value: f64,
    projector: CMatrix,
}

/// An observable that can be measured but not inspected.
#[derive(Clone, Debug)]
pub struct ObservableHandle {
    dim: usize,
    branches: Vec<Branch>,
}

pub fn make_observable(a: &HermitianMatrix) -> Result<ObservableHandle> {
    let spec = spectral_oracle(a)?;
    let scale = spec.eigenvalues.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let n = a.dim();

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (k, &lambda) in spec.eigenvalues.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if lambda - spec.eigenvalues[*g.last().unwrap()] <= DEGENERACY_TOL * scale => {
                g.push(k)
            }
            _ => groups.push(vec![k]),
        }
    }

    let branches = groups
        .into_iter()
        .map(|g| {
            let value = if g.len() == 1 {
                spec.eigenvalues[g[0]]
            } else {
                g.iter().map(|&k| spec.eigenvalues[k]).sum::<f64>() / g.len() as f64
            };
            let mut projector = CMatrix::zeros(n, n);
            for &k in &g {
                let v = spec.eigenvectors.column(k);
                projector += v * v.adjoint();
            }
            Branch { value, projector }
        })
        .collect();
    Ok(ObservableHandle { dim: n, branches })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementOutcome {
    pub value: f64,
    /// Branch id, ascending in eigenvalue. Bookkeeping only.
    pub outcome_index: usize,
    pub post_state: DensityMatrix,
}

impl ObservableHandle {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[cfg(test)]
    fn branch_count(&self) -> usize {
        self.branches.len()
    }

    fn check_dim(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: rho.dim() });
        }
        Ok(())
    }

    /// Born-rule probabilities of every branch, ascending in value.
    pub fn outcome_probabilities(&self, rho: &DensityMatrix) -> Result<Vec<(f64, f64)>> {
        self.check_dim(rho)?;
        Ok(self
            .branches
            .iter()
            .map(|b| (b.value, rho.expectation(&b.projector).max(0.0)))
            .collect())
    }

    /// Precompute branch probabilities and post-measurement states for
    /// repeated measurements of identically prepared copies of `rho`.
    pub fn prepare(&self, rho: &DensityMatrix) -> Result<PreparedMeasurement> {
        self.check_dim(rho)?;
        let mut entries = Vec::with_capacity(self.branches.len());
        let mut total = 0.0;
        for (index, b) in self.branches.iter().enumerate() {
            let p = rho.expectation(&b.projector);
            if p < MIN_BRANCH_PROBABILITY {
                continue;
            }
            let projected = &b.projector * rho.as_matrix() * &b.projector / c(p);
            let post = HermitianMatrix::symmetrize(&projected).into_matrix();
            total += p;
            entries.push(PreparedBranch {
                index,
                value: b.value,
                cumulative: total,
                post_state: DensityMatrix::from_matrix_unchecked(post),
            });
        }
        if entries.is_empty() {
            return Err(Error::InvalidState("no branch has positive probability".into()));
        }
        Ok(PreparedMeasurement { entries, total })
    }

    /// One projective measurement. Consumes exactly one uniform variate.
    pub fn measure(&self, rho: &DensityMatrix, rng: &mut SimRng) -> Result<MeasurementOutcome> {
        Ok(self.prepare(rho)?.measure(rng))
    }
}

#[derive(Clone, Debug)]
struct PreparedBranch {
    index: usize,
    value: f64,
    cumulative: f64,
    post_state: DensityMatrix,
}

/// Branch distribution of one observable on one fixed input state.
#[derive(Clone, Debug)]
pub struct PreparedMeasurement {
    entries: Vec<PreparedBranch>,
    total: f64,
}

impl PreparedMeasurement {
    /// Inverse-CDF sample over branches in ascending-value order.
    pub fn measure(&self, rng: &mut SimRng) -> MeasurementOutcome {
        let e = self.sample(rng);
        MeasurementOutcome {
            value: e.value,
            outcome_index: e.index,
            post_state: e.post_state.clone(),
        }
    }

    /// Like [`measure`](Self::measure) but without cloning the post-state.
    pub fn measure_value(&self, rng: &mut SimRng) -> (f64, usize) {
        let e = self.sample(rng);
        (e.value, e.index)
    }

    /// Post-measurement state of branch `index`, if that branch can occur.
    pub fn post_state(&self, index: usize) -> Option<&DensityMatrix> {
        self.entries.iter().find(|e| e.index == index).map(|e| &e.post_state)
    }

    fn sample(&self, rng: &mut SimRng) -> &PreparedBranch {
        let u = rng.uniform() * self.total;
        self.entries
            .iter()
            .find(|e| u < e.cumulative)
            .unwrap_or_else(|| self.entries.last().unwrap())
    }
}

/// Additive Gaussian noise on reported values. The post-measurement state is
/// never affected.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReadoutNoise {
    pub sigma: f64,
}

impl ReadoutNoise {
    pub fn apply(&self, value: f64, rng: &mut SimRng) -> f64 {
        if self.sigma == 0.0 {
            value
        } else {
            value + self.sigma * rng.normal()
        }
    }
}

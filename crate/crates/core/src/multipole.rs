//! Orthonormal multipole operators for a spin `s` and the expansion of
//! Hermitian matrices in them.
//!
//! Rank `a` operators are obtained from symmetrized products of `a` spin
//! components, orthogonalized against everything of lower rank with the inner
//! product `(1/N) Tr[X^H Y]` and normalized so that `(1/N) Tr[T_u T_v] = delta_uv`.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, HermitianMatrix};
use crate::spin::{SpinOperators, SpinSystem};

/// Residual-to-original norm ratio below which a candidate is dependent.
const INDEPENDENCE_CUTOFF: f64 = 1e-8;

/// Class tag of a multipole: its rank and the spin-component indices of the
/// symmetrized product it was grown from (`0, 1, 2` for `x, y, z`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultipoleLabel {
    pub rank: usize,
    pub components: Vec<u8>,
}

impl fmt::Display for MultipoleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};", self.rank)?;
        for &j in &self.components {
            write!(f, "{}", ["x", "y", "z"][j as usize])?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MultipoleBasis {
    sys: SpinSystem,
    operators: Vec<HermitianMatrix>,
    labels: Vec<MultipoleLabel>,
}

impl MultipoleBasis {
    pub fn sys(&self) -> SpinSystem {
        self.sys
    }

    pub fn dim(&self) -> usize {
        self.sys.dim()
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn operators(&self) -> &[HermitianMatrix] {
        &self.operators
    }

    pub fn operator(&self, nu: usize) -> &HermitianMatrix {
        &self.operators[nu]
    }

    pub fn labels(&self) -> &[MultipoleLabel] {
        &self.labels
    }

    /// `G[u][v] = (1/N) Tr[T_u T_v]`
    pub fn gram(&self) -> Vec<Vec<f64>> {
        self.operators
            .iter()
            .map(|a| self.operators.iter().map(|b| inner(a.as_matrix(), b.as_matrix())).collect())
            .collect()
    }
}

/// Real coefficients `a_nu` of a Hermitian matrix in a multipole basis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinObservable {
    pub sys: SpinSystem,
    pub coefficients: Vec<f64>,
}

/// `(1/N) Tr[X^H Y]`, real part.
fn inner(x: &CMatrix, y: &CMatrix) -> f64 {
    x.dotc(y).re / x.nrows() as f64
}

/// Non-decreasing index tuples of length `rank` over `{0, 1, 2}`, in
/// lexicographic order.
fn component_tuples(rank: usize) -> Vec<Vec<u8>> {
    fn grow(prefix: &mut Vec<u8>, rank: usize, out: &mut Vec<Vec<u8>>) {
        if prefix.len() == rank {
            out.push(prefix.clone());
            return;
        }
        let start = prefix.last().copied().unwrap_or(0);
        for j in start..3 {
            prefix.push(j);
            grow(prefix, rank, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::with_capacity(rank), rank, &mut out);
    out
}

/// Distinct orderings of a multiset given as a sorted slice.
fn distinct_permutations(sorted: &[u8]) -> Vec<Vec<u8>> {
    fn walk(counts: &mut [usize; 3], current: &mut Vec<u8>, len: usize, out: &mut Vec<Vec<u8>>) {
        if current.len() == len {
            out.push(current.clone());
            return;
        }
        for j in 0..3 {
            if counts[j] > 0 {
                counts[j] -= 1;
                current.push(j as u8);
                walk(counts, current, len, out);
                current.pop();
                counts[j] += 1;
            }
        }
    }
    let mut counts = [0usize; 3];
    for &j in sorted {
        counts[j as usize] += 1;
    }
    let mut out = Vec::new();
    walk(&mut counts, &mut Vec::with_capacity(sorted.len()), sorted.len(), &mut out);
    out
}

/// Average of `S_{j_1} ... S_{j_a}` over all distinct orderings of the indices.
fn symmetrized_product(ops: &SpinOperators, components: &[u8]) -> CMatrix {
    let n = ops.sys.dim();
    let perms = distinct_permutations(components);
    let mut sum = CMatrix::zeros(n, n);
    for p in &perms {
        let mut prod = CMatrix::identity(n, n);
        for &j in p {
            prod = prod * ops.component(j as usize).as_matrix();
        }
        sum += prod;
    }
    sum / c(perms.len() as f64)
}

pub fn build_multipole_basis(ops: &SpinOperators) -> Result<MultipoleBasis> {
    let sys = ops.sys;
    let n = sys.dim();
    let mut operators = vec![HermitianMatrix::identity(n)];
    let mut labels = vec![MultipoleLabel { rank: 0, components: Vec::new() }];

    for rank in 1..=sys.twice_spin() as usize {
        let expected = 2 * rank + 1;
        let mut found = 0;
        for components in component_tuples(rank) {
            if found == expected {
                break;
            }
            let candidate = symmetrized_product(ops, &components);
            let original = inner(&candidate, &candidate).sqrt();
            let mut residual = candidate;
            // Two passes of modified Gram-Schmidt keep the Gram matrix at
            // roundoff even for high ranks.
            for _ in 0..2 {
                for t in &operators {
                    let t = t.as_matrix();
                    let overlap = inner(t, &residual);
                    residual -= t.scale(overlap);
                }
            }
            let norm = inner(&residual, &residual).sqrt();
            if norm < INDEPENDENCE_CUTOFF * original {
                continue;
            }
            let normalized = residual / c(norm);
            operators.push(HermitianMatrix::symmetrize(&normalized));
            labels.push(MultipoleLabel { rank, components });
            found += 1;
        }
        if found < expected {
            return Err(Error::RankDeficient { rank, found, expected });
        }
    }
    Ok(MultipoleBasis { sys, operators, labels })
}

/// `a_nu = (1/N) Tr[A T_nu]`
pub fn decompose(a: &HermitianMatrix, basis: &MultipoleBasis) -> Result<SpinObservable> {
    if a.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: a.dim() });
    }
    let coefficients = basis
        .operators
        .iter()
        .map(|t| inner(t.as_matrix(), a.as_matrix()))
        .collect();
    Ok(SpinObservable { sys: basis.sys, coefficients })
}

/// `sum_nu a_nu T_nu`
pub fn reconstruct(obs: &SpinObservable, basis: &MultipoleBasis) -> Result<HermitianMatrix> {
    combine(&obs.coefficients, basis)
}

pub(crate) fn combine(coefficients: &[f64], basis: &MultipoleBasis) -> Result<HermitianMatrix> {
    if coefficients.len() != basis.len() {
        return Err(Error::DimensionMismatch { expected: basis.len(), got: coefficients.len() });
    }
    let n = basis.dim();
    let mut m = CMatrix::zeros(n, n);
    for (a, t) in coefficients.iter().zip(&basis.operators) {
        if *a != 0.0 {
            m += t.as_matrix().scale(*a);
        }
    }
    Ok(HermitianMatrix::symmetrize(&m))
}

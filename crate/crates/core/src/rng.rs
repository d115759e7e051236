//! Seeded random streams and random test-object generators.
//!
//! Every stochastic operation in the crate draws from a [`SimRng`]. A stream is
//! identified by a `(seed, stream)` pair, so independent runs can be derived
//! from one user seed without sharing state.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{CMatrix, CVector, HermitianMatrix};

#[derive(Clone, Debug)]
pub struct SimRng {
    inner: ChaCha12Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self::derived(seed, 0)
    }

    /// Independent stream `stream` under `seed`.
    pub fn derived(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Split off a child stream. Consumes one `u64` from `self`.
    pub fn split(&mut self) -> Self {
        let seed = self.inner.random::<u64>();
        Self::derived(seed, 0)
    }

    /// Uniform variate in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn complex_normal(&mut self) -> Complex64 {
        Complex64::new(self.normal(), self.normal())
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

/// Hermitian matrix with independent Gaussian entries, `(G + G^H) / 2`.
pub fn random_hermitian(n: usize, rng: &mut SimRng) -> HermitianMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| rng.complex_normal());
    HermitianMatrix::from_matrix_unchecked((&g + g.adjoint()).scale(0.5))
}

/// Haar-distributed unitary via QR of a Ginibre matrix with phase correction.
pub fn random_unitary(n: usize, rng: &mut SimRng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| rng.complex_normal());
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `U diag(spectrum) U^H` for a Haar-random `U`.
pub fn hermitian_with_spectrum(spectrum: &[f64], rng: &mut SimRng) -> HermitianMatrix {
    let n = spectrum.len();
    let u = random_unitary(n, rng);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        spectrum.iter().map(|&x| Complex64::new(x, 0.0)),
    ));
    let m = &u * d * u.adjoint();
    HermitianMatrix::from_matrix_unchecked((&m + m.adjoint()).scale(0.5))
}

pub fn random_pure_state(n: usize, rng: &mut SimRng) -> CVector {
    let v = CVector::from_fn(n, |_, _| rng.complex_normal());
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

/// Random full-rank density matrix `G G^H / Tr[G G^H]`.
pub fn random_mixed_matrix(n: usize, rng: &mut SimRng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| rng.complex_normal());
    let m = &g * g.adjoint();
    let tr = m.trace();
    let m = m / tr;
    (&m + m.adjoint()).scale(0.5)
}

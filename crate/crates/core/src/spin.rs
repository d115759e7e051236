//! Spin-s angular momentum matrices and coherent spin states.
//!
//! Basis order is `|s, m>` with `m = s, s-1, ..., -s`; index 0 is the highest
//! weight state.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector, HermitianMatrix};

/// A single spin with quantum number `s = twice_s / 2` (`hbar = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpinSystem {
    twice_s: u32,
}

impl SpinSystem {
    pub fn from_twice_spin(twice_s: u32) -> Self {
        Self { twice_s }
    }

    /// The spin whose Hilbert space has dimension `n = 2s + 1`.
    pub fn from_dim(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("Hilbert space dimension must be positive".into()));
        }
        Ok(Self { twice_s: (n - 1) as u32 })
    }

    pub fn twice_spin(&self) -> u32 {
        self.twice_s
    }

    pub fn spin(&self) -> f64 {
        self.twice_s as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.twice_s as usize + 1
    }

    /// Magnetic quantum number of basis index `k`.
    pub fn m(&self, k: usize) -> f64 {
        self.spin() - k as f64
    }
}

#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub sys: SpinSystem,
    pub sx: HermitianMatrix,
    pub sy: HermitianMatrix,
    pub sz: HermitianMatrix,
}

impl SpinOperators {
    /// Components indexed 0, 1, 2 for x, y, z.
    pub fn component(&self, j: usize) -> &HermitianMatrix {
        match j {
            0 => &self.sx,
            1 => &self.sy,
            2 => &self.sz,
            _ => panic!("spin component index {j} out of range"),
        }
    }

    /// `n . S` for a (not necessarily unit) direction `n`.
    pub fn along(&self, n: [f64; 3]) -> HermitianMatrix {
        let m = self.sx.as_matrix().scale(n[0])
            + self.sy.as_matrix().scale(n[1])
            + self.sz.as_matrix().scale(n[2]);
        HermitianMatrix::symmetrize(&m)
    }
}

pub fn build_spin_operators(sys: SpinSystem) -> SpinOperators {
    let n = sys.dim();
    let s = sys.spin();
    let mut s_plus = CMatrix::zeros(n, n);
    let mut sz = CMatrix::zeros(n, n);
    for k in 0..n {
        let m = sys.m(k);
        sz[(k, k)] = c(m);
        // <m+1| S+ |m>: basis index k-1 holds m+1.
        if k > 0 {
            s_plus[(k - 1, k)] = c((s * (s + 1.0) - m * (m + 1.0)).sqrt());
        }
    }
    let s_minus = s_plus.adjoint();
    let sx = (&s_plus + &s_minus).scale(0.5);
    let sy = (&s_plus - &s_minus) / Complex64::new(0.0, 2.0);
    SpinOperators {
        sys,
        sx: HermitianMatrix::from_matrix_unchecked(sx),
        sy: HermitianMatrix::from_matrix_unchecked(sy),
        sz: HermitianMatrix::from_matrix_unchecked(sz),
    }
}

/// Unit vector `(sin t cos p, sin t sin p, cos t)`.
pub fn direction(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// `exp(-i phi Sz) exp(-i theta Sy) |s, s>`.
pub fn coherent_state(ops: &SpinOperators, theta: f64, phi: f64) -> CVector {
    let n = ops.sys.dim();
    let rot_y = rotation(&ops.sy, theta);
    let mut v: CVector = rot_y.column(0).into_owned();
    for k in 0..n {
        v[k] *= Complex64::from_polar(1.0, -phi * ops.sys.m(k));
    }
    v
}

/// `exp(-i angle J)` by scaling and squaring.
pub fn rotation(generator: &HermitianMatrix, angle: f64) -> CMatrix {
    (generator.as_matrix() * Complex64::new(0.0, -angle)).exp()
}

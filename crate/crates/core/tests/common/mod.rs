#![allow(dead_code)]

use num_complex::Complex64;
use qdiag::linalg::HermitianMatrix;

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(mut m: Vec<Vec<Complex64>>) -> Complex64 {
    let n = m.len();
    let mut d = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].norm().total_cmp(&m[b][col].norm()))
            .unwrap();
        if m[pivot][col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            m.swap(pivot, col);
            d = -d;
        }
        d *= m[col][col];
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                let sub = f * m[col][k];
                m[row][k] -= sub;
            }
        }
    }
    d
}

/// det(A - lambda E), real for Hermitian A.
pub fn char_poly(a: &HermitianMatrix, lambda: f64) -> f64 {
    let n = a.dim();
    let m = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let z = a.as_matrix()[(i, j)];
                    if i == j { z - lambda } else { z }
                })
                .collect()
        })
        .collect();
    det(m).re
}

/// Roots of the characteristic polynomial by grid scan and sign-change
/// bisection over the Gershgorin interval.
pub fn char_poly_roots(a: &HermitianMatrix, grid: usize) -> Vec<f64> {
    let (lo, hi) = a.gershgorin_interval();
    let (lo, hi) = (lo - 1e-6, hi + 1e-6);
    let step = (hi - lo) / grid as f64;
    let mut roots = Vec::new();
    let mut x0 = lo;
    let mut f0 = char_poly(a, x0);
    for k in 1..=grid {
        let x1 = lo + k as f64 * step;
        let f1 = char_poly(a, x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0.signum() != f1.signum() && f1 != 0.0 {
            let (mut l, mut r, mut fl) = (x0, x1, f0);
            for _ in 0..200 {
                let mid = 0.5 * (l + r);
                if mid == l || mid == r {
                    break;
                }
                let fm = char_poly(a, mid);
                if fm == 0.0 {
                    l = mid;
                    r = mid;
                    break;
                }
                if fm.signum() == fl.signum() {
                    l = mid;
                    fl = fm;
                } else {
                    r = mid;
                }
            }
            roots.push(0.5 * (l + r));
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

/// Binomial standard deviation of a frequency estimate.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

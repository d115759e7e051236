//! State reconstruction from coherent-state probabilities.
//!
//! A frame of `N^2` coherent states `|n_mu>` gives projectors `P_mu`. When they
//! span the Hermitian operators, the dual operators
//! `Q^mu = N sum_nu (G^-1)_{mu nu} P_nu` with `G_{mu nu} = Tr[P_mu P_nu]` satisfy
//! `rho = (1/N) sum_mu Tr[rho P_mu] Q^mu` for every state `rho`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{c, spectral_oracle, CMatrix, CVector, HermitianMatrix};
use crate::measurement::DensityMatrix;
use crate::rng::SimRng;
use crate::spin::{build_spin_operators, coherent_state, direction, SpinSystem};

/// Frames with a Gram condition number above this are rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

const FALLBACK_SEED: u64 = 0x5eed_f4a3;
const FALLBACK_ATTEMPTS: u64 = 16;
const POSITIVITY_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct CoherentFrame {
    pub sys: SpinSystem,
    /// `(theta, phi)` in radians.
    pub directions: Vec<(f64, f64)>,
    pub states: Vec<CVector>,
    pub projectors: Vec<CMatrix>,
    pub duals: Vec<HermitianMatrix>,
    pub gram_condition: f64,
}

impl CoherentFrame {
    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    /// `Tr[rho P_mu]` for every frame element.
    pub fn exact_probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        if rho.dim() != self.sys.dim() {
            return Err(Error::DimensionMismatch { expected: self.sys.dim(), got: rho.dim() });
        }
        Ok(self.projectors.iter().map(|p| rho.expectation(p)).collect())
    }
}

/// `count` points on the unit sphere along a generalized spiral running from
/// the south to the north pole.
pub fn spiral_directions(count: usize) -> Vec<(f64, f64)> {
    if count == 1 {
        return vec![(0.0, 0.0)];
    }
    let mut out = Vec::with_capacity(count);
    let mut phi = 0.0_f64;
    for k in 0..count {
        let z = -1.0 + 2.0 * k as f64 / (count - 1) as f64;
        let theta = z.clamp(-1.0, 1.0).acos();
        if k == 0 || k == count - 1 {
            phi = 0.0;
        } else {
            phi = (phi + 3.6 / ((count as f64) * (1.0 - z * z)).sqrt()) % std::f64::consts::TAU;
        }
        out.push((theta, phi));
    }
    out
}

fn random_directions(count: usize, rng: &mut SimRng) -> Vec<(f64, f64)> {
    (0..count)
        .map(|_| {
            let z: f64 = 2.0 * rng.uniform() - 1.0;
            (z.acos(), std::f64::consts::TAU * rng.uniform())
        })
        .collect()
}

/// Build a frame from explicit directions, or from the default spiral (falling
/// back to seeded random directions if the spiral happens to be singular).
pub fn build_frame(sys: SpinSystem, directions: Option<Vec<(f64, f64)>>) -> Result<CoherentFrame> {
    let count = sys.dim() * sys.dim();
    match directions {
        Some(dirs) => {
            if dirs.len() != count {
                return Err(Error::DimensionMismatch { expected: count, got: dirs.len() });
            }
            check_distinct(&dirs)?;
            frame_from_directions(sys, dirs)
        }
        None => {
            let mut result = frame_from_directions(sys, spiral_directions(count));
            let mut attempt = 0;
            while matches!(result, Err(Error::SingularFrame { .. })) && attempt < FALLBACK_ATTEMPTS {
                let mut rng = SimRng::derived(FALLBACK_SEED, attempt);
                result = frame_from_directions(sys, random_directions(count, &mut rng));
                attempt += 1;
            }
            result
        }
    }
}

fn check_distinct(dirs: &[(f64, f64)]) -> Result<()> {
    let vecs: Vec<[f64; 3]> = dirs.iter().map(|&(t, p)| direction(t, p)).collect();
    for i in 0..vecs.len() {
        for j in 0..i {
            let d: f64 = (0..3).map(|k| (vecs[i][k] - vecs[j][k]).powi(2)).sum();
            if d.sqrt() < 1e-12 {
                return Err(Error::InvalidConfig(format!("frame directions {j} and {i} coincide")));
            }
        }
    }
    Ok(())
}

fn frame_from_directions(sys: SpinSystem, directions: Vec<(f64, f64)>) -> Result<CoherentFrame> {
    let ops = build_spin_operators(sys);
    let n = sys.dim();
    let states: Vec<CVector> = directions.iter().map(|&(t, p)| coherent_state(&ops, t, p)).collect();
    let projectors: Vec<CMatrix> = states
        .iter()
        .map(|v| HermitianMatrix::symmetrize(&(v * v.adjoint())).into_matrix())
        .collect();
    let m = projectors.len();
    let gram = DMatrix::<f64>::from_fn(m, m, |a, b| states[a].dotc(&states[b]).norm_sqr());

    let eig = SymmetricEigen::new(gram.clone());
    let largest = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let smallest = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let gram_condition = if smallest > 0.0 { largest / smallest } else { f64::INFINITY };
    if !(gram_condition <= MAX_GRAM_CONDITION) {
        return Err(Error::SingularFrame { condition: gram_condition });
    }

    // G^-1 = V diag(1/lambda) V^T
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x));
    let gram_inv = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
    let duals = (0..m)
        .map(|mu| {
            let mut q = CMatrix::zeros(n, n);
            for (nu, p) in projectors.iter().enumerate() {
                q += p.scale(gram_inv[(mu, nu)]);
            }
            HermitianMatrix::symmetrize(&q.scale(n as f64))
        })
        .collect();

    Ok(CoherentFrame { sys, directions, states, projectors, duals, gram_condition })
}

/// Number of copies measured per frame direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shots {
    /// Infinite-ensemble limit: the exact probabilities.
    Exact,
    PerDirection(u64),
}

/// Estimate `Tr[rho P_mu]` for each direction by repeating the binary
/// measurement `{P_mu, E - P_mu}` on fresh copies of `rho`.
pub fn sample_frame_probabilities(
    rho: &DensityMatrix,
    frame: &CoherentFrame,
    shots: Shots,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    let exact = frame.exact_probabilities(rho)?;
    let shots = match shots {
        Shots::Exact => return Ok(exact),
        Shots::PerDirection(0) => {
            return Err(Error::InvalidConfig("shots per direction must be at least 1".into()))
        }
        Shots::PerDirection(k) => k,
    };
    Ok(exact
        .into_iter()
        .map(|p| {
            let mut stream = rng.split();
            let p = p.clamp(0.0, 1.0);
            let hits = (0..shots).filter(|_| stream.uniform() < p).count();
            hits as f64 / shots as f64
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    /// Valid density matrix: the raw estimate, or its projection onto the
    /// positive trace-one cone when needed.
    pub state: DensityMatrix,
    /// Linear-inversion estimate, Hermitized but otherwise untouched.
    pub raw: HermitianMatrix,
    pub trace_deviation: f64,
    pub min_eigenvalue: f64,
    pub projected: bool,
}

pub fn reconstruct_state(probabilities: &[f64], frame: &CoherentFrame) -> Result<Reconstruction> {
    if probabilities.len() != frame.len() {
        return Err(Error::DimensionMismatch { expected: frame.len(), got: probabilities.len() });
    }
    let n = frame.sys.dim();
    let mut acc = CMatrix::zeros(n, n);
    for (p, q) in probabilities.iter().zip(&frame.duals) {
        acc += q.as_matrix().scale(*p);
    }
    let raw = HermitianMatrix::symmetrize(&(acc / c(n as f64)));
    let trace = raw.as_matrix().trace().re;
    let spec = spectral_oracle(&raw)?;
    let min_eigenvalue = spec.eigenvalues[0];

    let (matrix, projected) = if min_eigenvalue < -POSITIVITY_TOL {
        let clipped: Vec<f64> = spec.eigenvalues.iter().map(|&x| x.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let m = if total > 0.0 {
            let mut m = CMatrix::zeros(n, n);
            for (k, &x) in clipped.iter().enumerate() {
                let v = spec.eigenvectors.column(k);
                m += (v * v.adjoint()).scale(x / total);
            }
            m
        } else {
            CMatrix::identity(n, n) / c(n as f64)
        };
        (m, true)
    } else if (trace - 1.0).abs() > TRACE_TOL {
        (raw.as_matrix() / c(trace), true)
    } else {
        (raw.as_matrix().clone(), false)
    };
    let state = DensityMatrix::from_matrix_unchecked(HermitianMatrix::symmetrize(&matrix).into_matrix());
    Ok(Reconstruction { state, raw, trace_deviation: trace - 1.0, min_eigenvalue, projected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::prepare_mixed_state;
    use crate::rng::{random_mixed_matrix, random_pure_state};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn tetrahedron() -> Vec<(f64, f64)> {
        let t = (-1.0_f64 / 3.0).acos();
        vec![(0.0, 0.0), (t, 0.0), (t, 2.0 * PI / 3.0), (t, 4.0 * PI / 3.0)]
    }

    #[test]
    fn tetrahedral_spin_half_frame() {
        let frame = build_frame(SpinSystem::from_twice_spin(1), Some(tetrahedron())).unwrap();
        // G = 2/3 E + 1/3 J has eigenvalues 2 and 2/3.
        assert!((frame.gram_condition - 3.0).abs() < 1e-12, "{}", frame.gram_condition);
        let mut rng = SimRng::new(5);
        for _ in 0..5 {
            let rho = DensityMatrix::new(random_mixed_matrix(2, &mut rng)).unwrap();
            let probs = frame.exact_probabilities(&rho).unwrap();
            let rec = reconstruct_state(&probs, &frame).unwrap();
            assert!((rec.raw.as_matrix() - rho.as_matrix()).norm() < 1e-12);
            assert!(!rec.projected);
        }
    }

    #[test]
    fn equatorial_frame_is_singular() {
        let dirs = (0..4).map(|k| (FRAC_PI_2, k as f64 * FRAC_PI_2)).collect();
        assert!(matches!(
            build_frame(SpinSystem::from_twice_spin(1), Some(dirs)),
            Err(Error::SingularFrame { .. })
        ));
    }

    #[test]
    fn rejects_wrong_count_and_duplicates() {
        let sys = SpinSystem::from_twice_spin(1);
        assert!(matches!(
            build_frame(sys, Some(vec![(0.0, 0.0); 3])),
            Err(Error::DimensionMismatch { expected: 4, got: 3 })
        ));
        let mut dirs = tetrahedron();
        dirs[3] = dirs[2];
        assert!(matches!(build_frame(sys, Some(dirs)), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn default_frames_resolve_identity() {
        for twice in 0..=4 {
            let sys = SpinSystem::from_twice_spin(twice);
            let frame = build_frame(sys, None).unwrap();
            assert_eq!(frame.len(), sys.dim() * sys.dim());
            let mut rng = SimRng::new(twice as u64);
            for _ in 0..10 {
                let rho = DensityMatrix::new(random_mixed_matrix(sys.dim(), &mut rng)).unwrap();
                let rec = reconstruct_state(&frame.exact_probabilities(&rho).unwrap(), &frame).unwrap();
                let err = rec.state.frobenius_distance(rho.as_matrix());
                assert!(err < 1e-10, "s={} err={err}", sys.spin());
            }
        }
    }

    #[test]
    fn exact_mode_values() {
        let sys = SpinSystem::from_twice_spin(2);
        let frame = build_frame(sys, None).unwrap();
        let first = DensityMatrix::pure(&frame.states[0]);
        let p = sample_frame_probabilities(&first, &frame, Shots::Exact, &mut SimRng::new(0)).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-14);

        let mixed = prepare_mixed_state(3).unwrap();
        let p = sample_frame_probabilities(&mixed, &frame, Shots::Exact, &mut SimRng::new(0)).unwrap();
        assert!(p.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-14));
        let rec = reconstruct_state(&p, &frame).unwrap();
        assert!(rec.state.frobenius_distance(mixed.as_matrix()) < 1e-10);
    }

    #[test]
    fn zero_shots_rejected() {
        let frame = build_frame(SpinSystem::from_twice_spin(1), None).unwrap();
        let rho = prepare_mixed_state(2).unwrap();
        assert!(sample_frame_probabilities(&rho, &frame, Shots::PerDirection(0), &mut SimRng::new(0)).is_err());
        let wrong = prepare_mixed_state(3).unwrap();
        assert!(matches!(
            sample_frame_probabilities(&wrong, &frame, Shots::Exact, &mut SimRng::new(0)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(reconstruct_state(&[0.5; 3], &frame), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn sampled_probabilities_within_bernoulli_bounds() {
        let sys = SpinSystem::from_twice_spin(2);
        let frame = build_frame(sys, None).unwrap();
        let mut rng = SimRng::new(31);
        let rho = DensityMatrix::pure(&random_pure_state(3, &mut rng));
        let shots = 10_000;
        let exact = frame.exact_probabilities(&rho).unwrap();
        let sampled = sample_frame_probabilities(&rho, &frame, Shots::PerDirection(shots), &mut rng).unwrap();
        for (p, q) in exact.iter().zip(&sampled) {
            let sigma = (p * (1.0 - p) / shots as f64).sqrt().max(1.0 / shots as f64);
            assert!((p - q).abs() <= 4.0 * sigma, "p={p} q={q}");
        }
    }

    #[test]
    fn noisy_estimate_is_projected_to_valid_state() {
        let sys = SpinSystem::from_twice_spin(2);
        let frame = build_frame(sys, None).unwrap();
        let mut rng = SimRng::new(3);
        let rho = DensityMatrix::pure(&random_pure_state(3, &mut rng));
        let sampled = sample_frame_probabilities(&rho, &frame, Shots::PerDirection(20), &mut rng).unwrap();
        let rec = reconstruct_state(&sampled, &frame).unwrap();
        assert!((rec.state.trace() - 1.0).abs() < 1e-12);
        assert!(DensityMatrix::new(rec.state.as_matrix().clone()).is_ok());
        if rec.min_eigenvalue < -1e-10 {
            assert!(rec.projected);
        }
    }

    #[test]
    fn spiral_endpoints() {
        let d = spiral_directions(9);
        assert_eq!(d.len(), 9);
        assert!((d[0].0 - PI).abs() < 1e-15);
        assert_eq!(d[8].0, 0.0);
        assert_eq!(spiral_directions(1), vec![(0.0, 0.0)]);
    }
}

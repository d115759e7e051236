//! The diagonalization protocol.
//!
//! 1. expand `A` in the multipole basis of spin `s = (N - 1) / 2`;
//! 2. treat the expansion as a spin observable and tune an apparatus for it;
//! 3. measure it repeatedly on the maximally mixed state, collecting outcomes
//!    until the stop rule fires;
//! 4. recover eigenvectors from the null spaces of `A - A_n E`, and optionally
//!    reconstruct post-measurement states by coherent-state tomography.
//!
//! The discovery path sees `A` only through an [`ObservableHandle`]. The
//! classical eigendecomposition is consulted solely for the optional
//! verification section of the report.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::apparatus::{check_tuning, FieldProfile, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::linalg::{
    null_space, serialize_cvector, serialize_cvectors, spectral_oracle, ComplexMatrix, CVector,
    HermitianMatrix, DEFAULT_NULL_TOL,
};
use crate::measurement::{
    make_observable, prepare_mixed_state, DensityMatrix, ObservableHandle, PreparedMeasurement,
    ReadoutNoise, DEGENERACY_TOL,
};
use crate::multipole::{build_multipole_basis, decompose, reconstruct};
use crate::rng::SimRng;
use crate::spin::{build_spin_operators, SpinSystem};
use crate::tomography::{build_frame, reconstruct_state, sample_frame_probabilities, Shots};

const MEASUREMENT_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const TOMOGRAPHY_STREAM: u64 = 2;

/// Slack on the Gershgorin check, relative to the interval scale.
const RANGE_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Spend exactly `max_shots` measurements.
    FixedShots,
    /// Stop once this many distinct values have been seen.
    AllDistinct(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pub seed: u64,
    pub max_shots: u64,
    pub stop_rule: StopRule,
    /// Relative single-linkage threshold for merging sampled values.
    pub value_merge_tol: f64,
    pub readout_noise_sigma: f64,
    pub recover_vectors: bool,
    pub run_tomography: bool,
    pub tomography_shots_per_direction: u64,
    /// Attach a comparison against the classical eigendecomposition.
    pub oracle_check: bool,
}

impl ProtocolConfig {
    /// Defaults for an `n`-dimensional input: stop after all `n` values.
    pub fn for_dim(n: usize) -> Self {
        Self {
            seed: 0,
            max_shots: 10_000,
            stop_rule: StopRule::AllDistinct(n),
            value_merge_tol: 1e-9,
            readout_noise_sigma: 0.0,
            recover_vectors: false,
            run_tomography: false,
            tomography_shots_per_direction: 1_000,
            oracle_check: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_shots == 0 {
            return Err(Error::InvalidConfig("max_shots must be at least 1".into()));
        }
        if !(self.value_merge_tol > 0.0 && self.value_merge_tol.is_finite()) {
            return Err(Error::InvalidConfig("value_merge_tol must be positive".into()));
        }
        if !(self.readout_noise_sigma >= 0.0 && self.readout_noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig("readout_noise_sigma must be non-negative".into()));
        }
        if let StopRule::AllDistinct(0) = self.stop_rule {
            return Err(Error::InvalidConfig("target distinct count must be at least 1".into()));
        }
        if self.run_tomography && self.tomography_shots_per_direction == 0 {
            return Err(Error::InvalidConfig("tomography needs at least one shot per direction".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    FixedShotsCompleted,
    AllDistinctFound,
    ShotBudgetExhausted,
}

/// A group of sampled values merged into one eigenvalue estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueCluster {
    pub value: f64,
    pub hits: u64,
}

/// Single-linkage clustering of sorted `(value, count)` pairs. Neighbours closer
/// than `merge_tol * max(1, max |value|)` share a cluster, represented by the
/// hit-weighted mean.
pub fn cluster_values(sorted: &[(f64, u64)], merge_tol: f64) -> Vec<ValueCluster> {
    cluster_ranges(sorted, merge_tol)
        .into_iter()
        .map(|range| {
            let members = &sorted[range];
            let base = members[0].0;
            let hits: u64 = members.iter().map(|m| m.1).sum();
            // Offsets from the first member keep a single-valued cluster exact.
            let offset: f64 = members.iter().map(|&(v, c)| (v - base) * c as f64).sum();
            ValueCluster { value: base + offset / hits as f64, hits }
        })
        .collect()
}

fn cluster_ranges(sorted: &[(f64, u64)], merge_tol: f64) -> Vec<std::ops::Range<usize>> {
    if sorted.is_empty() {
        return Vec::new();
    }
    let scale = sorted.iter().fold(1.0_f64, |m, &(v, _)| m.max(v.abs()));
    let threshold = merge_tol * scale;
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..sorted.len() {
        if sorted[k].0 - sorted[k - 1].0 > threshold {
            out.push(start..k);
            start = k;
        }
    }
    out.push(start..sorted.len());
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Outcome of the repeated-measurement stage.
#[derive(Clone, Debug)]
pub struct Discovery {
    pub clusters: Vec<ValueCluster>,
    pub shots_used: u64,
    pub stopped_because: StopReason,
    /// Most frequent branch id behind each cluster, for picking a post-state.
    pub representative_branch: Vec<usize>,
}

#[derive(Default)]
struct Tally {
    counts: BTreeMap<Key, (u64, BTreeMap<usize, u64>)>,
}

impl Tally {
    fn add(&mut self, value: f64, branch: usize) -> bool {
        let entry = self.counts.entry(Key(value)).or_default();
        entry.0 += 1;
        *entry.1.entry(branch).or_default() += 1;
        entry.0 == 1
    }

    fn sorted(&self) -> Vec<(f64, u64)> {
        self.counts.iter().map(|(k, v)| (k.0, v.0)).collect()
    }

    fn cluster_count(&self, merge_tol: f64) -> usize {
        cluster_ranges(&self.sorted(), merge_tol).len()
    }

    fn finish(&self, merge_tol: f64) -> (Vec<ValueCluster>, Vec<usize>) {
        let sorted = self.sorted();
        let branches: Vec<&BTreeMap<usize, u64>> = self.counts.values().map(|v| &v.1).collect();
        let reps = cluster_ranges(&sorted, merge_tol)
            .into_iter()
            .map(|range| {
                let mut merged: BTreeMap<usize, u64> = BTreeMap::new();
                for b in &branches[range] {
                    for (&id, &c) in b.iter() {
                        *merged.entry(id).or_default() += c;
                    }
                }
                merged.into_iter().max_by_key(|&(id, c)| (c, std::cmp::Reverse(id))).map(|p| p.0).unwrap_or(0)
            })
            .collect();
        (cluster_values(&sorted, merge_tol), reps)
    }
}

/// Repeatedly measure identically prepared copies until the stop rule fires.
pub fn discover_spectrum(
    prepared: &PreparedMeasurement,
    cfg: &ProtocolConfig,
    rng: &mut SimRng,
    noise_rng: &mut SimRng,
) -> Discovery {
    let noise = ReadoutNoise { sigma: cfg.readout_noise_sigma };
    let mut tally = Tally::default();
    let mut shots = 0;
    let mut stopped_because = match cfg.stop_rule {
        StopRule::FixedShots => StopReason::FixedShotsCompleted,
        StopRule::AllDistinct(_) => StopReason::ShotBudgetExhausted,
    };
    while shots < cfg.max_shots {
        let (value, branch) = prepared.measure_value(rng);
        let value = noise.apply(value, noise_rng);
        shots += 1;
        let fresh = tally.add(value, branch);
        if let StopRule::AllDistinct(target) = cfg.stop_rule {
            if fresh && tally.cluster_count(cfg.value_merge_tol) >= target {
                stopped_because = StopReason::AllDistinctFound;
                break;
            }
        }
    }
    let (clusters, representative_branch) = tally.finish(cfg.value_merge_tol);
    Discovery { clusters, shots_used: shots, stopped_because, representative_branch }
}

/// Shots needed to see `target` distinct values in each of `trials`
/// independent runs (`None` where the budget ran out). Runs execute in
/// parallel on streams derived from `seed`; results are in trial order.
pub fn shots_to_complete(
    handle: &ObservableHandle,
    target: usize,
    max_shots: u64,
    trials: u64,
    seed: u64,
) -> Result<Vec<Option<u64>>> {
    let rho = prepare_mixed_state(handle.dim())?;
    let prepared = handle.prepare(&rho)?;
    let mut cfg = ProtocolConfig::for_dim(handle.dim());
    cfg.stop_rule = StopRule::AllDistinct(target);
    cfg.max_shots = max_shots;
    cfg.validate()?;
    Ok((0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = SimRng::derived(seed, trial);
            let mut unused = SimRng::derived(seed, u64::MAX);
            let d = discover_spectrum(&prepared, &cfg, &mut rng, &mut unused);
            (d.stopped_because == StopReason::AllDistinctFound).then_some(d.shots_used)
        })
        .collect())
}

/// Probability that one particular outcome out of `n` equiprobable ones has not
/// appeared after `shots` measurements: `(1 - 1/n)^shots`.
pub fn missing_value_probability(n: usize, shots: u64) -> f64 {
    assert!(n >= 1, "need at least one outcome");
    let q = 1.0 - 1.0 / n as f64;
    if shots > i32::MAX as u64 {
        return if q == 1.0 { 1.0 } else { 0.0 };
    }
    q.powi(shots as i32)
}

#[derive(Clone, Debug, Serialize)]
pub struct RecoveredEigenvector {
    pub value: f64,
    #[serde(serialize_with = "serialize_cvectors")]
    pub vectors: Vec<CVector>,
    /// `||(A - value E) v|| / ||A||_F` per vector.
    pub residuals: Vec<f64>,
}

impl RecoveredEigenvector {
    pub fn multiplicity(&self) -> usize {
        self.vectors.len()
    }
}

/// Solve `(A - value E) v = 0` for each value.
pub fn recover_eigenvectors(a: &HermitianMatrix, values: &[f64], tol: f64) -> Result<Vec<RecoveredEigenvector>> {
    let (lo, hi) = a.gershgorin_interval();
    let slack = RANGE_SLACK * lo.abs().max(hi.abs()).max(1.0);
    let norm = a.frobenius_norm();
    values
        .iter()
        .map(|&value| {
            if !(value >= lo - slack && value <= hi + slack) {
                return Err(Error::OutsideNumericalRange { value, lower: lo, upper: hi });
            }
            let shifted = a.shifted(value);
            let vectors = null_space(&ComplexMatrix::new(shifted.clone())?, tol)?;
            if vectors.is_empty() {
                return Err(Error::EmptyNullSpace { value, tol });
            }
            let residuals = vectors
                .iter()
                .map(|v| {
                    let r = (&shifted * v).norm();
                    if norm > 0.0 { r / norm } else { r }
                })
                .collect();
            Ok(RecoveredEigenvector { value, vectors, residuals })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleComparison {
    pub oracle_eigenvalues: Vec<f64>,
    /// Largest distance between a discovered value and the nearest oracle
    /// eigenvalue, or vice versa.
    pub max_eigenvalue_deviation: f64,
    /// Distinct oracle eigenvalues (after merging degeneracies).
    pub oracle_distinct_count: usize,
    /// `1 - ||P v||` maximized over recovered vectors, with `P` the oracle
    /// eigenprojector nearest in value.
    pub max_overlap_deficit: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TomographyEntry {
    pub value: f64,
    pub shots_per_direction: u64,
    pub purity: f64,
    pub min_raw_eigenvalue: f64,
    pub projected: bool,
    /// Dominant eigenvector of the reconstructed state.
    #[serde(serialize_with = "serialize_cvector")]
    pub leading_eigenvector: CVector,
    /// `<v|rho_est|v>` against the algebraically recovered vector, when one
    /// exists and is non-degenerate.
    pub fidelity_with_recovered: Option<f64>,
    /// Frobenius distance to the simulated post-measurement state. Only filled
    /// in when the oracle check is enabled.
    pub state_error: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProtocolReport {
    pub dim: usize,
    pub spin: f64,
    pub coefficients: Vec<f64>,
    pub coefficient_labels: Vec<String>,
    /// Relative Frobenius error of the multipole expansion.
    pub expansion_error: f64,
    pub apparatus_tuned: bool,
    pub distinct_values: Vec<ValueCluster>,
    pub shots_used: u64,
    pub stopped_because: StopReason,
    pub eigenvectors: Option<Vec<RecoveredEigenvector>>,
    pub tomography: Option<Vec<TomographyEntry>>,
    pub oracle_comparison: Option<OracleComparison>,
}

pub fn run_protocol(a: &HermitianMatrix, cfg: &ProtocolConfig) -> Result<ProtocolReport> {
    cfg.validate()?;
    let n = a.dim();
    let sys = SpinSystem::from_dim(n)?;

    // Step 1: multipole expansion.
    let basis = build_multipole_basis(&build_spin_operators(sys))?;
    let obs = decompose(a, &basis)?;
    let expanded = reconstruct(&obs, &basis)?;
    let norm = a.frobenius_norm();
    let diff = (expanded.as_matrix() - a.as_matrix()).norm();
    let expansion_error = if norm > 0.0 { diff / norm } else { diff };

    // Steps 2-3: the observable and its apparatus.
    let profile = FieldProfile::targeting(&obs);
    let scale = obs.coefficients.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let apparatus_tuned = check_tuning(&profile, DEFAULT_STEP, 1e-8 * scale).tuned;
    let handle = make_observable(a)?;

    // Step 4: repeated measurement of the homogeneous mixture.
    let rho = prepare_mixed_state(n)?;
    let prepared = handle.prepare(&rho)?;
    let mut rng = SimRng::derived(cfg.seed, MEASUREMENT_STREAM);
    let mut noise_rng = SimRng::derived(cfg.seed, NOISE_STREAM);
    let discovery = discover_spectrum(&prepared, cfg, &mut rng, &mut noise_rng);
    let values: Vec<f64> = discovery.clusters.iter().map(|c| c.value).collect();

    // Step 5: eigenvectors.
    let eigenvectors = if cfg.recover_vectors {
        let tol = DEFAULT_NULL_TOL.max(cfg.value_merge_tol);
        Some(recover_eigenvectors(a, &values, tol)?)
    } else {
        None
    };

    let tomography = if cfg.run_tomography {
        Some(run_tomography(&prepared, &discovery, eigenvectors.as_deref(), sys, cfg)?)
    } else {
        None
    };

    let oracle_comparison = if cfg.oracle_check {
        Some(compare_with_oracle(a, &values, eigenvectors.as_deref())?)
    } else {
        None
    };

    Ok(ProtocolReport {
        dim: n,
        spin: sys.spin(),
        coefficients: obs.coefficients,
        coefficient_labels: basis.labels().iter().map(|l| l.to_string()).collect(),
        expansion_error,
        apparatus_tuned,
        distinct_values: discovery.clusters,
        shots_used: discovery.shots_used,
        stopped_because: discovery.stopped_because,
        eigenvectors,
        tomography,
        oracle_comparison,
    })
}

fn run_tomography(
    prepared: &PreparedMeasurement,
    discovery: &Discovery,
    recovered: Option<&[RecoveredEigenvector]>,
    sys: SpinSystem,
    cfg: &ProtocolConfig,
) -> Result<Vec<TomographyEntry>> {
    let frame = build_frame(sys, None)?;
    let mut rng = SimRng::derived(cfg.seed, TOMOGRAPHY_STREAM);
    let shots = cfg.tomography_shots_per_direction;
    discovery
        .clusters
        .iter()
        .zip(&discovery.representative_branch)
        .enumerate()
        .map(|(k, (cluster, &branch))| {
            let post: &DensityMatrix = prepared
                .post_state(branch)
                .ok_or_else(|| Error::InvalidState(format!("branch {branch} was never populated")))?;
            let probs = sample_frame_probabilities(post, &frame, Shots::PerDirection(shots), &mut rng)?;
            let rec = reconstruct_state(&probs, &frame)?;
            let est = HermitianMatrix::symmetrize(rec.state.as_matrix());
            let spec = spectral_oracle(&est)?;
            let leading_eigenvector = spec.eigenvector(spec.dim() - 1);
            let fidelity_with_recovered = recovered
                .and_then(|r| r.get(k))
                .filter(|r| r.multiplicity() == 1)
                .map(|r| est.expectation(&r.vectors[0]));
            let state_error = cfg
                .oracle_check
                .then(|| rec.state.frobenius_distance(post.as_matrix()));
            Ok(TomographyEntry {
                value: cluster.value,
                shots_per_direction: shots,
                purity: rec.state.purity(),
                min_raw_eigenvalue: rec.min_eigenvalue,
                projected: rec.projected,
                leading_eigenvector,
                fidelity_with_recovered,
                state_error,
            })
        })
        .collect()
}

/// Verification only: compare discovered values and vectors with the
/// classical eigendecomposition of `a`.
pub fn compare_with_oracle(
    a: &HermitianMatrix,
    values: &[f64],
    recovered: Option<&[RecoveredEigenvector]>,
) -> Result<OracleComparison> {
    let spec = spectral_oracle(a)?;
    let eig = &spec.eigenvalues;
    let nearest = |x: f64, set: &[f64]| set.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min);
    let mut max_dev = 0.0_f64;
    for &v in values {
        max_dev = max_dev.max(nearest(v, eig));
    }
    for &e in eig {
        max_dev = max_dev.max(nearest(e, values));
    }

    let scale = eig.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let distinct = 1 + eig.windows(2).filter(|w| w[1] - w[0] > DEGENERACY_TOL * scale).count();

    let max_overlap_deficit = recovered.map(|rec| {
        let mut worst = 0.0_f64;
        for r in rec {
            let gap = nearest(r.value, eig);
            let members: Vec<usize> = (0..eig.len())
                .filter(|&k| (eig[k] - r.value).abs() <= gap + DEGENERACY_TOL * scale.max(1.0))
                .collect();
            for v in &r.vectors {
                let weight: f64 = members.iter().map(|&k| spec.eigenvector(k).dotc(v).norm_sqr()).sum();
                worst = worst.max(1.0 - weight.sqrt());
            }
        }
        worst
    });

    Ok(OracleComparison {
        oracle_eigenvalues: eig.clone(),
        max_eigenvalue_deviation: max_dev,
        oracle_distinct_count: distinct,
        max_overlap_deficit,
    })
}

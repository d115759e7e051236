//! Batch front end: read an HMAT matrix, run one mode, and emit a JSON report.

use std::io;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::apparatus::{check_tuning, force_on_eigenstate, FieldProfile, ProfileRule, TuningReport, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::hmat::{parse_matrix_file, write_hmat};
use crate::linalg::{serialize_cvectors, spectral_oracle, CVector, HermitianMatrix};
use crate::measurement::{make_observable, prepare_mixed_state};
use crate::multipole::{build_multipole_basis, decompose};
use crate::protocol::{run_protocol, ProtocolConfig, ProtocolReport, StopRule};
use crate::rng::{random_hermitian, SimRng};
use crate::spin::{build_spin_operators, SpinSystem};
use crate::tomography::{build_frame, reconstruct_state, sample_frame_probabilities, Shots};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Tuning tolerance used by the apparatus check.
const TUNING_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Mode {
    Protocol,
    Classical,
    Compare,
    ApparatusCheck,
    TomographyDemo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StopArg {
    Fixed,
    Distinct,
}

#[derive(Debug, Parser)]
#[command(name = "qdiag", version, about = "Diagonalize Hermitian matrices by simulated spin measurements")]
pub struct Args {
    #[arg(long, value_enum, default_value = "protocol")]
    pub mode: Mode,
    /// HMAT v1 input file.
    #[arg(long, required_unless_present = "demo")]
    pub input: Option<PathBuf>,
    /// Report destination (default: standard output).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub max_shots: u64,
    #[arg(long, value_enum, default_value = "distinct")]
    pub stop: StopArg,
    #[arg(long, default_value_t = 1e-9)]
    pub merge_tol: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long)]
    pub recover_vectors: bool,
    #[arg(long)]
    pub tomography: bool,
    #[arg(long)]
    pub shots_per_direction: Option<u64>,
    /// Omit the timestamp so reports are byte-reproducible.
    #[arg(long)]
    pub no_timestamp: bool,
    /// Write a seeded random Hermitian matrix of this dimension as HMAT and exit.
    #[arg(long, value_name = "N")]
    pub demo: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct RunRequest {
    pub mode: Mode,
    pub input_path: PathBuf,
    pub config: ProtocolConfig,
    pub stop: StopArg,
    pub shots_per_direction: Option<u64>,
    pub output_path: Option<PathBuf>,
    pub timestamp: bool,
}

impl RunRequest {
    pub fn from_args(args: &Args) -> Self {
        let mut config = ProtocolConfig::for_dim(1);
        config.seed = args.seed;
        config.max_shots = args.max_shots;
        config.value_merge_tol = args.merge_tol;
        config.readout_noise_sigma = args.noise_sigma;
        config.recover_vectors = args.recover_vectors;
        config.run_tomography = args.tomography;
        if let Some(k) = args.shots_per_direction {
            config.tomography_shots_per_direction = k;
        }
        Self {
            mode: args.mode,
            input_path: args.input.clone().unwrap_or_default(),
            config,
            stop: args.stop,
            shots_per_direction: args.shots_per_direction,
            output_path: args.output.clone(),
            timestamp: !args.no_timestamp,
        }
    }

    /// Fill in dimension-dependent settings and check mode requirements.
    fn resolve(&self, n: usize) -> Result<ProtocolConfig> {
        let mut cfg = self.config.clone();
        cfg.stop_rule = match self.stop {
            StopArg::Fixed => StopRule::FixedShots,
            StopArg::Distinct => StopRule::AllDistinct(n),
        };
        if self.mode == Mode::TomographyDemo && self.shots_per_direction.is_none() {
            return Err(Error::InvalidConfig("tomography_demo requires --shots-per-direction".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorInfo {
    pub kind: &'static str,
    pub message: String,
}

impl From<&Error> for ErrorInfo {
    fn from(e: &Error) -> Self {
        let kind = match e {
            Error::NotSquare { .. } => "not_square",
            Error::NonFinite { .. } => "non_finite",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::HermiticityViolation { .. } => "hermiticity_violation",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ConvergenceFailure => "convergence_failure",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::InvalidState(_) => "invalid_state",
            Error::OutsideNumericalRange { .. } => "outside_numerical_range",
            Error::EmptyNullSpace { .. } => "empty_null_space",
            Error::SingularFrame { .. } => "singular_frame",
            Error::NotTuned { .. } => "not_tuned",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Parse { .. } => "parse_error",
            Error::Io { .. } => "io_error",
        };
        Self { kind, message: e.to_string() }
    }
}

#[derive(Debug, Default, Serialize)]
pub struct Diagnostics {
    pub dim: Option<usize>,
    pub spin: Option<f64>,
    pub input_frobenius_norm: Option<f64>,
    pub exit_code: i32,
}

#[derive(Debug, Serialize)]
pub struct ClassicalResults {
    pub eigenvalues: Vec<f64>,
    #[serde(serialize_with = "serialize_cvectors")]
    pub eigenvectors: Vec<CVector>,
}

#[derive(Debug, Serialize)]
pub struct CompareResults {
    pub max_eigenvalue_deviation: f64,
    pub max_overlap_deficit: Option<f64>,
    pub distinct_count_matches: bool,
    pub oracle_eigenvalues: Vec<f64>,
    pub protocol: ProtocolReport,
}

#[derive(Debug, Serialize)]
pub struct ForceEntry {
    pub eigenvalue: f64,
    pub force: f64,
    pub deviation: f64,
}

#[derive(Debug, Serialize)]
pub struct ApparatusResults {
    pub coefficients: Vec<f64>,
    pub step: f64,
    pub tuning_tol: f64,
    pub default_profile: TuningReport,
    pub constant_profile: TuningReport,
    pub forces: Vec<ForceEntry>,
    pub max_force_deviation: f64,
}

#[derive(Debug, Serialize)]
pub struct TomographyRow {
    /// `None` for the exact-probability limit.
    pub shots_per_direction: Option<u64>,
    pub raw_error: f64,
    pub state_error: f64,
    pub min_raw_eigenvalue: f64,
    pub projected: bool,
}

#[derive(Debug, Serialize)]
pub struct TomographyResults {
    pub measured_value: f64,
    pub frame_size: usize,
    pub gram_condition: f64,
    pub rows: Vec<TomographyRow>,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum Results {
    Protocol(Box<ProtocolReport>),
    Classical(ClassicalResults),
    Compare(Box<CompareResults>),
    Apparatus(ApparatusResults),
    Tomography(TomographyResults),
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub mode: Mode,
    pub input: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub results: Option<Results>,
    pub diagnostics: Diagnostics,
    pub error: Option<ErrorInfo>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut buf = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDigits::default());
        self.serialize(&mut ser).expect("report serialization cannot fail");
        buf.push(b'\n');
        String::from_utf8(buf).expect("JSON is UTF-8")
    }
}

/// Pretty JSON with every float printed to 17 significant digits.
#[derive(Default)]
struct FixedDigits(PrettyFormatter<'static>);

impl Formatter for FixedDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn exit_code_for(e: &Error) -> i32 {
    if e.is_input_error() {
        EXIT_INPUT
    } else {
        EXIT_NUMERICAL
    }
}

/// Execute a request. Never fails: errors land in the report and exit code.
pub fn run(req: &RunRequest) -> (i32, Report) {
    let mut report = Report {
        mode: req.mode,
        input: req.input_path.display().to_string(),
        seed: req.config.seed,
        timestamp: req.timestamp.then(|| {
            SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
        }),
        results: None,
        diagnostics: Diagnostics::default(),
        error: None,
    };
    let outcome = parse_matrix_file(&req.input_path).and_then(|a| {
        report.diagnostics.dim = Some(a.dim());
        report.diagnostics.spin = Some(SpinSystem::from_dim(a.dim())?.spin());
        report.diagnostics.input_frobenius_norm = Some(a.frobenius_norm());
        let cfg = req.resolve(a.dim())?;
        execute(req, &a, cfg)
    });
    let code = match outcome {
        Ok(results) => {
            report.results = Some(results);
            EXIT_OK
        }
        Err(e) => {
            report.error = Some(ErrorInfo::from(&e));
            exit_code_for(&e)
        }
    };
    report.diagnostics.exit_code = code;
    (code, report)
}

fn execute(req: &RunRequest, a: &HermitianMatrix, cfg: ProtocolConfig) -> Result<Results> {
    match req.mode {
        Mode::Protocol => Ok(Results::Protocol(Box::new(run_protocol(a, &cfg)?))),
        Mode::Classical => {
            let spec = spectral_oracle(a)?;
            let eigenvectors = (0..spec.dim()).map(|k| spec.eigenvector(k)).collect();
            Ok(Results::Classical(ClassicalResults { eigenvalues: spec.eigenvalues, eigenvectors }))
        }
        Mode::Compare => {
            let mut cfg = cfg;
            cfg.oracle_check = true;
            let protocol = run_protocol(a, &cfg)?;
            let cmp = protocol.oracle_comparison.clone().expect("oracle check requested");
            Ok(Results::Compare(Box::new(CompareResults {
                max_eigenvalue_deviation: cmp.max_eigenvalue_deviation,
                max_overlap_deficit: cmp.max_overlap_deficit,
                distinct_count_matches: cmp.oracle_distinct_count == protocol.distinct_values.len(),
                oracle_eigenvalues: cmp.oracle_eigenvalues,
                protocol,
            })))
        }
        Mode::ApparatusCheck => apparatus_check(a).map(Results::Apparatus),
        Mode::TomographyDemo => {
            let shots = req.shots_per_direction.expect("checked in resolve");
            tomography_demo(a, cfg.seed, shots).map(Results::Tomography)
        }
    }
}

fn apparatus_check(a: &HermitianMatrix) -> Result<ApparatusResults> {
    let sys = SpinSystem::from_dim(a.dim())?;
    let basis = build_multipole_basis(&build_spin_operators(sys))?;
    let obs = decompose(a, &basis)?;
    let profile = FieldProfile::targeting(&obs);
    let scale = obs.coefficients.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let tuning_tol = TUNING_TOL * scale;
    let default_profile = check_tuning(&profile, DEFAULT_STEP, tuning_tol);
    let constant_profile = check_tuning(
        &FieldProfile::new(obs.coefficients.clone(), ProfileRule::Constant),
        DEFAULT_STEP,
        tuning_tol,
    );
    // Eigenstates are supplied by the classical engine here; this mode checks
    // the apparatus, not the discovery path.
    let spec = spectral_oracle(a)?;
    let mut forces = Vec::with_capacity(spec.dim());
    for k in 0..spec.dim() {
        let force = force_on_eigenstate(&profile, &spec.eigenvector(k), &basis, DEFAULT_STEP)?;
        let eigenvalue = spec.eigenvalues[k];
        forces.push(ForceEntry { eigenvalue, force, deviation: (force + eigenvalue).abs() });
    }
    let max_force_deviation = forces.iter().fold(0.0_f64, |m, f| m.max(f.deviation));
    Ok(ApparatusResults {
        coefficients: obs.coefficients,
        step: DEFAULT_STEP,
        tuning_tol,
        default_profile,
        constant_profile,
        forces,
        max_force_deviation,
    })
}

/// Shot counts 10, 100, ... below `max`, then `max` itself.
fn shot_ladder(max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut k = 10;
    while k < max {
        out.push(k);
        k *= 10;
    }
    out.push(max);
    out
}

fn tomography_demo(a: &HermitianMatrix, seed: u64, shots: u64) -> Result<TomographyResults> {
    if shots == 0 {
        return Err(Error::InvalidConfig("shots per direction must be at least 1".into()));
    }
    let sys = SpinSystem::from_dim(a.dim())?;
    let handle = make_observable(a)?;
    let mut rng = SimRng::derived(seed, 0);
    let outcome = handle.measure(&prepare_mixed_state(a.dim())?, &mut rng)?;
    let frame = build_frame(sys, None)?;
    let truth = outcome.post_state.as_matrix();

    let mut plan: Vec<Shots> = shot_ladder(shots).into_iter().map(Shots::PerDirection).collect();
    plan.push(Shots::Exact);
    let mut rng = SimRng::derived(seed, 2);
    let rows = plan
        .into_iter()
        .map(|s| {
            let probs = sample_frame_probabilities(&outcome.post_state, &frame, s, &mut rng)?;
            let rec = reconstruct_state(&probs, &frame)?;
            Ok(TomographyRow {
                shots_per_direction: match s {
                    Shots::Exact => None,
                    Shots::PerDirection(k) => Some(k),
                },
                raw_error: (rec.raw.as_matrix() - truth).norm(),
                state_error: rec.state.frobenius_distance(truth),
                min_raw_eigenvalue: rec.min_eigenvalue,
                projected: rec.projected,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TomographyResults {
        measured_value: outcome.value,
        frame_size: frame.len(),
        gram_condition: frame.gram_condition,
        rows,
    })
}

/// Seeded random Hermitian matrix in HMAT form.
pub fn demo_matrix(n: usize, seed: u64) -> Result<String> {
    if n == 0 {
        return Err(Error::InvalidConfig("--demo dimension must be positive".into()));
    }
    Ok(write_hmat(&random_hermitian(n, &mut SimRng::new(seed))))
}

/// Entry point shared by the binary: returns the process exit code.
pub fn main_with_args(args: Args) -> i32 {
    if let Some(n) = args.demo {
        return match demo_matrix(n, args.seed) {
            Ok(text) => emit(args.output.as_ref(), &text),
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_INPUT
            }
        };
    }
    let req = RunRequest::from_args(&args);
    let (code, report) = run(&req);
    let written = emit(req.output_path.as_ref(), &report.to_json());
    if written != EXIT_OK {
        return written;
    }
    code
}

fn emit(path: Option<&PathBuf>, text: &str) -> i32 {
    match path {
        Some(p) => match std::fs::write(p, text) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("error: cannot write {}: {e}", p.display());
                EXIT_INPUT
            }
        },
        None => {
            print!("{text}");
            EXIT_OK
        }
    }
}

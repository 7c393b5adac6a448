//! Command-line surface: state files, `detect` and `verify`.
//!
//! State files are JSON:
//!
//! ```json
//! {"n_qubits": 2, "kind": "pure", "data": [[0,0],[0.7071067811865476,0],[0.7071067811865476,0],[0,0]]}
//! ```
//!
//! `kind` is `pure` (amplitude list), `density` (row-major matrix) or `dicke`
//! (matrix in the Dicke basis). Complex numbers are `[re, im]` pairs.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::criteria::{
    moments_of, xi_squared_from_moments, CriterionId, CriterionParams, CriterionReport, Family, Verdict,
};
use crate::error::{param, Error, Result};
use crate::oracle::{
    equivalence_suite, generate_symmetric, proportionality_suite, reduced_ppt_verdict, sample_seed, OracleVerdict,
    RandomKind, RandomStateSpec,
};
use crate::prepfn::{p_expand_dicke, p_reconstruct_dicke, separability_certificate_escalating, Certificate};
use crate::qcore::{
    CMatrix, CVector, DensityMatrix, DickeCoefficients, PureState, SubsystemSelection, C64, DEFAULT_MAX_QUBITS,
};
use crate::search::{optimize_direction_moments, optimize_frame_moments, optimize_lorentz_moments, SearchConfig};
use crate::spinops::{moments_dicke, pair_identity_residual, triple_identity_residual, MomentTensors};

pub const TOOL_NAME: &str = "ssq";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable overriding the qubit cap.
pub const MAX_QUBITS_ENV: &str = "SSQ_MAX_QUBITS";
/// Largest register for which the PPT cross-check runs.
pub const ORACLE_MAX_QUBITS: usize = 6;
const IDENTITY_TOL: f64 = 1e-11;
const ROUNDTRIP_TOL: f64 = 1e-8;

pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const SUITE_FAILURE: i32 = 1;
    pub const INPUT_ERROR: i32 = 2;
    pub const RESOURCE: i32 = 3;
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Resource(_) => exit::RESOURCE,
        _ => exit::INPUT_ERROR,
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum StateBody {
    Pure(Vec<C64>),
    Density(Vec<Vec<C64>>),
    Dicke(Vec<Vec<C64>>),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct StateFile {
    pub n_qubits: usize,
    #[serde(flatten)]
    pub body: StateBody,
}

/// A parsed state with its symmetric-subspace form when it has one.
#[derive(Debug, Clone)]
pub struct LoadedState {
    pub density: DensityMatrix,
    pub dicke: Option<DickeCoefficients>,
    pub digest: String,
}

impl LoadedState {
    pub fn n_qubits(&self) -> usize {
        self.density.n_qubits()
    }

    /// Moments through the Dicke basis when the state is symmetric.
    pub fn moments(&self) -> Result<MomentTensors> {
        match &self.dicke {
            Some(d) => moments_dicke(d),
            None => moments_of(&self.density),
        }
    }
}

/// Qubit cap from `SSQ_MAX_QUBITS`, defaulting to 12.
pub fn max_qubits_from_env() -> Result<usize> {
    match std::env::var(MAX_QUBITS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Parameter(format!("{MAX_QUBITS_ENV}={v:?} is not a positive integer"))),
        Err(_) => Ok(DEFAULT_MAX_QUBITS),
    }
}

fn square(rows: &[Vec<C64>], dim: usize) -> Result<CMatrix> {
    if rows.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            found: rows.len(),
        });
    }
    if let Some(r) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            found: r.len(),
        });
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

/// Parses a state file body. `max_qubits` is checked before any allocation.
pub fn parse_state(bytes: &[u8], max_qubits: usize) -> Result<LoadedState> {
    let file: StateFile = serde_json::from_slice(bytes)?;
    let n = file.n_qubits;
    if n == 0 {
        return param("n_qubits must be positive");
    }
    if n > max_qubits {
        return Err(Error::Resource(format!(
            "{n} qubits exceeds the cap of {max_qubits} ({MAX_QUBITS_ENV})"
        )));
    }
    let (density, dicke) = match file.body {
        StateBody::Pure(amps) => {
            let dim = 1usize << n;
            if amps.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: amps.len(),
                });
            }
            let rho = PureState::new(n, CVector::from_vec(amps))?.density();
            (rho, None)
        }
        StateBody::Density(rows) => (DensityMatrix::new(n, square(&rows, 1 << n)?)?, None),
        StateBody::Dicke(rows) => {
            let d = DickeCoefficients::new(n, square(&rows, n + 1)?)?;
            (d.to_density(), Some(d))
        }
    };
    let dicke = match dicke {
        Some(d) => Some(d),
        None => DickeCoefficients::from_density(&density).ok(),
    };
    Ok(LoadedState {
        density,
        dicke,
        digest: hex::encode(Sha256::digest(bytes)),
    })
}

pub fn load_state(path: &Path, max_qubits: usize) -> Result<LoadedState> {
    parse_state(&std::fs::read(path)?, max_qubits)
}

/// A `--criteria` entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Requested {
    Criterion(CriterionId),
    PrepCertificate,
}

impl FromStr for Requested {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "prep-certificate" {
            Ok(Requested::PrepCertificate)
        } else {
            s.parse().map(Requested::Criterion)
        }
    }
}

impl fmt::Display for Requested {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Requested::Criterion(c) => c.fmt(f),
            Requested::PrepCertificate => f.write_str("prep-certificate"),
        }
    }
}

pub const ALL_REQUESTS: [Requested; 10] = [
    Requested::Criterion(CriterionId::Xi2),
    Requested::Criterion(CriterionId::Bipartite),
    Requested::Criterion(CriterionId::TripartiteGhz),
    Requested::Criterion(CriterionId::TripartiteW),
    Requested::Criterion(CriterionId::Ss1),
    Requested::Criterion(CriterionId::Ss2),
    Requested::Criterion(CriterionId::Ss3),
    Requested::Criterion(CriterionId::Ss1p),
    Requested::Criterion(CriterionId::Ss2p),
    Requested::PrepCertificate,
];

/// Parses a comma-separated list, keeping first occurrences in order.
pub fn parse_criteria(list: &str) -> Result<Vec<Requested>> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let r: Requested = if item == "all" {
            for r in ALL_REQUESTS {
                if !out.contains(&r) {
                    out.push(r);
                }
            }
            continue;
        } else {
            item.parse()?
        };
        if !out.contains(&r) {
            out.push(r);
        }
    }
    if out.is_empty() {
        return param("criteria list is empty");
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DetectRequest {
    pub state: PathBuf,
    pub criteria: Vec<Requested>,
    pub config: SearchConfig,
    pub out: Option<PathBuf>,
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub criterion: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub pairs: Vec<OracleVerdict>,
    pub triples: Vec<OracleVerdict>,
    /// Criteria whose detections no partial transpose of the matching size confirms.
    pub inconsistencies: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub input_digest: String,
    pub n_qubits: usize,
    pub symmetric: bool,
    pub config: SearchConfig,
    pub criteria: Vec<CriterionReport>,
    pub skipped: Vec<Skipped>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

fn evaluate(
    id: CriterionId,
    state: &LoadedState,
    m: &MomentTensors,
    cfg: &SearchConfig,
) -> Result<std::result::Result<CriterionReport, String>> {
    let n = state.n_qubits();
    if n < id.party_count() {
        return Ok(Err(format!("needs at least {} qubits", id.party_count())));
    }
    let tol = cfg.tolerance;
    let search = match id {
        CriterionId::Xi2 => {
            return Ok(match xi_squared_from_moments(m) {
                Ok((xi2, dir)) => Ok(CriterionReport::squeezing(xi2, dir, tol)),
                Err(Error::UndefinedMeanSpin(len)) => Err(format!("mean spin vanishes (|<J>| = {len:e})")),
                Err(e) => return Err(e),
            });
        }
        CriterionId::Bipartite => optimize_direction_moments(m, cfg),
        CriterionId::TripartiteGhz => optimize_lorentz_moments(m, Family::Ghz, cfg),
        CriterionId::TripartiteW => optimize_lorentz_moments(m, Family::W, cfg),
        _ => optimize_frame_moments(m, id.ss_kind().expect("remaining ids are ss kinds"), cfg),
    };
    match search {
        Ok(r) => Ok(Ok(CriterionReport::new(id, r.best_margin, Some(r.best_params), tol))),
        Err(Error::NoAdmissibleFrame(msg)) => Ok(Err(format!("no admissible frame found: {msg}"))),
        Err(e) => Err(e),
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out.sort();
    out
}

fn oracle_check(state: &LoadedState, reports: &[CriterionReport]) -> Result<OracleCheck> {
    let n = state.n_qubits();
    let verdicts = |k: usize| -> Result<Vec<OracleVerdict>> {
        subsets(n, k)
            .into_iter()
            .map(|kept| reduced_ppt_verdict(&state.density, &SubsystemSelection::new(kept, n)?))
            .collect()
    };
    let pairs = if n >= 2 { verdicts(2)? } else { vec![] };
    let triples = if n >= 3 { verdicts(3)? } else { vec![] };
    let mut inconsistencies = Vec::new();
    for r in reports.iter().filter(|r| r.verdict == Verdict::Entangled) {
        // two-qubit PPT is exact; three-qubit PPT is exact for symmetric states only
        let confirmed = match r.criterion.party_count() {
            2 => pairs.iter().any(|v| v.entangled),
            _ => state.dicke.is_none() || triples.iter().any(|v| v.entangled),
        };
        if !confirmed {
            inconsistencies.push(format!(
                "{} reports entanglement (margin {:e}) but every reduction of that size has a positive partial transpose",
                r.criterion, r.margin
            ));
        }
    }
    Ok(OracleCheck {
        pairs,
        triples,
        inconsistencies,
    })
}

pub fn run_detect_on(state: &LoadedState, criteria: &[Requested], cfg: &SearchConfig) -> Result<Report> {
    cfg.validate()?;
    let m = state.moments()?;
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    let mut certificate = None;
    for &req in criteria {
        match req {
            Requested::Criterion(id) => match evaluate(id, state, &m, cfg)? {
                Ok(r) => reports.push(r),
                Err(reason) => skipped.push(Skipped {
                    criterion: id.to_string(),
                    reason,
                }),
            },
            Requested::PrepCertificate => match &state.dicke {
                Some(d) => certificate = Some(separability_certificate_escalating(d)?),
                None => skipped.push(Skipped {
                    criterion: req.to_string(),
                    reason: "state is not supported on the symmetric subspace".into(),
                }),
            },
        }
    }
    let oracle = if state.n_qubits() <= ORACLE_MAX_QUBITS && state.n_qubits() >= 2 {
        Some(oracle_check(state, &reports)?)
    } else {
        None
    };
    Ok(Report {
        tool: TOOL_NAME.into(),
        version: VERSION.into(),
        input_digest: state.digest.clone(),
        n_qubits: state.n_qubits(),
        symmetric: state.dicke.is_some(),
        config: cfg.clone(),
        criteria: reports,
        skipped,
        certificate,
        oracle,
        wall_time_ms: None,
    })
}

pub fn run_detect(req: &DetectRequest) -> Result<Report> {
    let start = Instant::now();
    let state = load_state(&req.state, max_qubits_from_env()?)?;
    let mut report = run_detect_on(&state, &req.criteria, &req.config)?;
    if req.timing {
        report.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(report)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Identities,
    EquivalenceN2,
    EquivalenceN3,
    Proportionality,
    PrepRoundtrip,
}

impl Suite {
    pub fn default_samples(&self) -> usize {
        match self {
            Suite::Identities => 0,
            Suite::EquivalenceN2 => 500,
            Suite::EquivalenceN3 => 200,
            Suite::Proportionality => 100,
            Suite::PrepRoundtrip => 50,
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| Error::Parameter(format!("unknown suite {s:?}")))
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        f.write_str(v.as_str().unwrap_or_default())
    }
}

/// One thresholded number in a suite summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Statistic {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub tool: String,
    pub version: String,
    pub suite: Suite,
    pub samples: usize,
    pub seed: u64,
    pub passed: bool,
    pub statistics: Vec<Statistic>,
    pub detail: serde_json::Value,
}

impl VerifyReport {
    pub fn failing(&self) -> Option<&Statistic> {
        self.statistics.iter().find(|s| !s.passed)
    }

    pub fn summary_lines(&self) -> Vec<String> {
        self.statistics
            .iter()
            .map(|s| {
                format!(
                    "{} {} = {:e} (limit {:e})",
                    if s.passed { "PASS" } else { "FAIL" },
                    s.name,
                    s.value,
                    s.threshold
                )
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for s in &self.statistics {
            w.serialize(s).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e)))
    }
}

fn prep_roundtrip(samples: usize, seed: u64) -> Result<(Vec<Statistic>, serde_json::Value)> {
    let mut worst: f64 = 0.0;
    for i in 0..samples {
        let n = 1 + i % 6;
        let spec = RandomStateSpec {
            kind: RandomKind::MixedSymmetric { rank: 1 + i % (n + 1) },
            n_qubits: n,
            seed: sample_seed(seed, i),
        };
        let d = generate_symmetric(&spec)?;
        let back = p_reconstruct_dicke(&p_expand_dicke(&d)?);
        worst = worst.max((back - d.matrix()).camax());
    }
    let zero = p_expand_dicke(&DickeCoefficients::basis_state(1, 0)?)?;
    let closed_form = (0..=32)
        .map(|k| {
            let theta = std::f64::consts::PI * k as f64 / 32.0;
            (zero.value(theta, 0.3 * k as f64) - (1.0 + 3.0 * theta.cos()) / (4.0 * std::f64::consts::PI)).abs()
        })
        .fold(0.0, f64::max);
    let stats = vec![
        Statistic::at_most("max_roundtrip_error", worst, ROUNDTRIP_TOL),
        Statistic::at_most("single_qubit_closed_form_error", closed_form, 1e-10),
    ];
    Ok((
        stats,
        serde_json::json!({ "max_roundtrip_error": worst, "closed_form_error": closed_form }),
    ))
}

pub fn run_verify(suite: Suite, samples: Option<usize>, seed: u64, cfg: &SearchConfig) -> Result<VerifyReport> {
    let samples = samples.unwrap_or(suite.default_samples());
    let cfg = SearchConfig { seed, ..cfg.clone() };
    let (statistics, detail) = match suite {
        Suite::Identities => {
            let mut stats = Vec::new();
            for n in 2..=6 {
                stats.push(Statistic::at_most(
                    format!("pair_identity_residual_n{n}"),
                    pair_identity_residual(n)?,
                    IDENTITY_TOL,
                ));
                stats.push(Statistic::at_most(
                    format!("triple_identity_residual_n{n}"),
                    triple_identity_residual(n)?,
                    IDENTITY_TOL,
                ));
            }
            (stats, serde_json::Value::Null)
        }
        Suite::EquivalenceN2 | Suite::EquivalenceN3 => {
            let n = if suite == Suite::EquivalenceN2 { 2 } else { 3 };
            let s = equivalence_suite(n, samples, &cfg)?;
            let mut stats = vec![
                Statistic::at_most("false_positives", s.false_positives as f64, 0.0),
                Statistic::at_most("false_negatives_outside_band", s.false_negatives as f64, 0.0),
            ];
            if n == 2 {
                let frac = if samples == 0 {
                    0.0
                } else {
                    s.band_cases as f64 / samples as f64
                };
                stats.push(Statistic::at_most(
                    "band_fraction",
                    frac,
                    crate::oracle::MAX_BAND_FRACTION,
                ));
            }
            (stats, serde_json::to_value(&s)?)
        }
        Suite::Proportionality => {
            let mut stats = Vec::new();
            let mut runs = Vec::new();
            for n in 3..=5 {
                let s = proportionality_suite(n, samples, seed)?;
                for f in &s.fits {
                    stats.push(Statistic::at_most(
                        format!("{}_n{n}_max_rel_err", f.quantity),
                        f.max_rel_err,
                        crate::oracle::PROPORTIONALITY_TOL,
                    ));
                }
                runs.push(s);
            }
            (stats, serde_json::to_value(&runs)?)
        }
        Suite::PrepRoundtrip => prep_roundtrip(samples, seed)?,
    };
    let passed = statistics.iter().all(|s| s.passed);
    Ok(VerifyReport {
        tool: TOOL_NAME.into(),
        version: VERSION.into(),
        suite,
        samples,
        seed,
        passed,
        statistics,
        detail,
    })
}

/// Parameters of a report entry, for display.
pub fn describe_params(p: &Option<CriterionParams>) -> String {
    match p {
        Some(CriterionParams::Direction(d)) => format!("n = ({:.4}, {:.4}, {:.4})", d.n[0], d.n[1], d.n[2]),
        Some(CriterionParams::Frame(f)) => format!("n = ({:.4}, {:.4}, {:.4})", f.n[0], f.n[1], f.n[2]),
        Some(CriterionParams::Lorentz { .. }) => "Lorentz pair".into(),
        None => String::new(),
    }
}

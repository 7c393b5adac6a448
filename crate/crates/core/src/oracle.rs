//! Ground truth for the criteria: partial-transpose negativity, seeded random
//! states, and the suites that compare search results and moment-space values
//! against direct matrix computations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{
    family_operator, moments_of, ss_value_from_moments, tripartite_margin_from_moments, witness_matrix, Family, Frame,
    KTensor, SL2CElement, SsKind, TripartiteMode,
};
use crate::error::{param, Error, Result};
use crate::qcore::{
    coherent_dicke, hermitian_eigen, partial_trace, partial_transpose, trace_product, validate_qubit_count, CMatrix,
    CVector, DensityMatrix, DickeCoefficients, PureState, SubsystemSelection, C64, DEFAULT_MAX_QUBITS,
};
use crate::search::{optimize_direction_moments, optimize_lorentz_moments, SearchConfig};
use crate::spinops::{moments_dicke, MomentTensors};

/// Partial-transpose eigenvalues below this count as entanglement.
pub const PPT_TOL: f64 = 1e-10;
/// Search margins with `|margin|` at most this are treated as inconclusive.
pub const BOUNDARY_BAND: f64 = 1e-7;
/// Fraction of band cases tolerated by the two-qubit equivalence run.
pub const MAX_BAND_FRACTION: f64 = 0.02;
/// Relative error allowed between moment-space values and direct traces.
pub const PROPORTIONALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleVerdict {
    pub pair_or_triple: SubsystemSelection,
    pub transposed_qubit: usize,
    pub min_pt_eigenvalue: f64,
    pub entangled: bool,
    /// Eigenvector of the most negative partial-transpose eigenvalue, when negative.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negative_eigenvector: Option<Vec<C64>>,
}

/// Minimum eigenvalue of `rho^{T_q}` for a 2- or 3-qubit state.
pub fn ppt_verdict(rho: &DensityMatrix, transposed_qubit: usize) -> Result<OracleVerdict> {
    let n = rho.n_qubits();
    if !(2..=3).contains(&n) {
        return param(format!("PPT oracle takes 2 or 3 qubits, got {n}"));
    }
    if transposed_qubit >= n {
        return param(format!("qubit {transposed_qubit} out of range"));
    }
    let eig = hermitian_eigen(&partial_transpose(rho, transposed_qubit)?);
    let min = eig.min_value();
    let entangled = min < -PPT_TOL;
    Ok(OracleVerdict {
        pair_or_triple: SubsystemSelection::new((0..n).collect(), n)?,
        transposed_qubit,
        min_pt_eigenvalue: min,
        entangled,
        negative_eigenvector: entangled.then(|| eig.vectors.column(0).iter().copied().collect()),
    })
}

/// [`ppt_verdict`] on the reduction of `rho` to `kept`, transposing its first qubit.
pub fn reduced_ppt_verdict(rho: &DensityMatrix, kept: &SubsystemSelection) -> Result<OracleVerdict> {
    let reduced = partial_trace(rho, kept)?;
    let mut v = ppt_verdict(&reduced, 0)?;
    v.pair_or_triple = kept.clone();
    v.transposed_qubit = kept.kept()[0];
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RandomKind {
    PureSymmetric,
    MixedSymmetric {
        rank: usize,
    },
    Product,
    SeparableMixture {
        terms: usize,
    },
    /// Mixture of coherent products `|θ,φ><θ,φ|^{⊗N}`: symmetric and fully separable.
    SymmetricSeparable {
        terms: usize,
    },
    HaarPure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomStateSpec {
    pub kind: RandomKind,
    pub n_qubits: usize,
    pub seed: u64,
}

impl RandomStateSpec {
    pub fn validate(&self) -> Result<()> {
        validate_qubit_count(self.n_qubits)?;
        if self.n_qubits > DEFAULT_MAX_QUBITS {
            return Err(Error::Resource(format!(
                "{} qubits exceeds the generator cap",
                self.n_qubits
            )));
        }
        match self.kind {
            RandomKind::MixedSymmetric { rank } if rank == 0 || rank > self.n_qubits + 1 => {
                param(format!("rank {rank} outside 1..={}", self.n_qubits + 1))
            }
            RandomKind::SeparableMixture { terms } | RandomKind::SymmetricSeparable { terms } if terms == 0 => {
                param("a mixture needs at least one term")
            }
            _ => Ok(()),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(
            self.kind,
            RandomKind::PureSymmetric | RandomKind::MixedSymmetric { .. } | RandomKind::SymmetricSeparable { .. }
        )
    }
}

fn complex_normal(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn random_qubit(rng: &mut ChaCha8Rng) -> [C64; 2] {
    let (a, b) = (complex_normal(rng), complex_normal(rng));
    let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
    [a / norm, b / norm]
}

fn random_weights(rng: &mut ChaCha8Rng, terms: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..terms).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn dicke_from_columns(n: usize, cols: &[(f64, CVector)]) -> Result<DickeCoefficients> {
    let mut d = CMatrix::zeros(n + 1, n + 1);
    for (w, v) in cols {
        d += (v * v.adjoint()).scale(*w);
    }
    let tr = d.trace().re;
    DickeCoefficients::new(n, d.unscale(tr))
}

/// Symmetric kinds in the Dicke basis.
pub fn generate_symmetric(spec: &RandomStateSpec) -> Result<DickeCoefficients> {
    spec.validate()?;
    let n = spec.n_qubits;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gaussian = |rng: &mut ChaCha8Rng| CVector::from_fn(n + 1, |_, _| complex_normal(rng));
    match spec.kind {
        RandomKind::PureSymmetric => dicke_from_columns(n, &[(1.0, gaussian(&mut rng))]),
        RandomKind::MixedSymmetric { rank } => {
            let cols: Vec<_> = (0..rank).map(|_| (1.0, gaussian(&mut rng))).collect();
            dicke_from_columns(n, &cols)
        }
        RandomKind::SymmetricSeparable { terms } => {
            let weights = random_weights(&mut rng, terms);
            let cols: Vec<_> = weights
                .into_iter()
                .map(|w| {
                    let theta = (1.0 - 2.0 * rng.random::<f64>()).acos();
                    let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
                    (w, coherent_dicke(n, theta, phi))
                })
                .collect();
            dicke_from_columns(n, &cols)
        }
        _ => param("not a symmetric kind"),
    }
}

pub fn generate(spec: &RandomStateSpec) -> Result<DensityMatrix> {
    if spec.is_symmetric() {
        return Ok(generate_symmetric(spec)?.to_density());
    }
    spec.validate()?;
    let n = spec.n_qubits;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.kind {
        RandomKind::Product => {
            let factors: Vec<_> = (0..n).map(|_| random_qubit(&mut rng)).collect();
            Ok(PureState::product(&factors)?.density())
        }
        RandomKind::SeparableMixture { terms } => {
            let weights = random_weights(&mut rng, terms);
            let parts = weights
                .into_iter()
                .map(|w| {
                    let factors: Vec<_> = (0..n).map(|_| random_qubit(&mut rng)).collect();
                    Ok((w, PureState::product(&factors)?.density()))
                })
                .collect::<Result<Vec<_>>>()?;
            DensityMatrix::mixture(&parts)
        }
        RandomKind::HaarPure => {
            let amps = CVector::from_fn(1 << n, |_, _| complex_normal(&mut rng));
            Ok(PureState::normalized(n, amps)?.density())
        }
        _ => unreachable!("symmetric kinds handled above"),
    }
}

/// Per-sample seed, decorrelated from neighbouring indices.
pub fn sample_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceRow {
    pub index: usize,
    pub rank: usize,
    pub min_pt_eigenvalue: f64,
    pub best_margin: f64,
    pub detected: bool,
    pub ppt_entangled: bool,
    pub in_band: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceSummary {
    pub n_qubits: usize,
    pub samples: usize,
    pub seed: u64,
    pub agreements: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub band_cases: usize,
    pub band_disagreements: usize,
    pub passed: bool,
    pub rows: Vec<EquivalenceRow>,
}

impl EquivalenceSummary {
    pub fn disagreements_outside_band(&self) -> usize {
        self.false_positives + self.false_negatives
    }
}

/// `p·d + (1-p)·1/(N+1)` on the symmetric subspace.
fn with_white_noise(d: &DickeCoefficients, p: f64) -> Result<DickeCoefficients> {
    let n = d.n_qubits();
    let white = CMatrix::identity(n + 1, n + 1).unscale((n + 1) as f64);
    DickeCoefficients::new(n, d.matrix().scale(p) + white.scale(1.0 - p))
}

fn unit_interval(seed: u64) -> f64 {
    ChaCha8Rng::seed_from_u64(seed).random::<f64>()
}

/// Search-based detection against the PPT oracle on random symmetric states.
/// Ranks cycle through `1..=N+1`; every second sample is mixed with white noise
/// of random weight so separable and near-boundary states occur.
pub fn equivalence_suite(n_qubits: usize, samples: usize, cfg: &SearchConfig) -> Result<EquivalenceSummary> {
    if !(2..=3).contains(&n_qubits) {
        return param("equivalence suite covers 2 and 3 qubits");
    }
    cfg.validate()?;
    let rows = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<EquivalenceRow> {
            let rank = 1 + i % (n_qubits + 1);
            let spec = RandomStateSpec {
                kind: RandomKind::MixedSymmetric { rank },
                n_qubits,
                seed: sample_seed(cfg.seed, i),
            };
            let mut d = generate_symmetric(&spec)?;
            if i % 2 == 1 {
                d = with_white_noise(&d, unit_interval(sample_seed(!cfg.seed, i)))?;
            }
            let m = moments_dicke(&d)?;
            let best_margin = if n_qubits == 2 {
                optimize_direction_moments(&m, cfg)?.best_margin
            } else {
                let g = optimize_lorentz_moments(&m, Family::Ghz, cfg)?.best_margin;
                let w = optimize_lorentz_moments(&m, Family::W, cfg)?.best_margin;
                g.min(w)
            };
            let oracle = ppt_verdict(&d.to_density(), 0)?;
            Ok(EquivalenceRow {
                index: i,
                rank,
                min_pt_eigenvalue: oracle.min_pt_eigenvalue,
                best_margin,
                detected: best_margin < -cfg.tolerance,
                ppt_entangled: oracle.entangled,
                in_band: best_margin.abs() <= BOUNDARY_BAND,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut s = EquivalenceSummary {
        n_qubits,
        samples,
        seed: cfg.seed,
        agreements: 0,
        false_positives: 0,
        false_negatives: 0,
        band_cases: 0,
        band_disagreements: 0,
        passed: false,
        rows,
    };
    for r in &s.rows {
        if r.in_band {
            s.band_cases += 1;
        }
        match (r.detected == r.ppt_entangled, r.in_band, r.detected) {
            (true, _, _) => s.agreements += 1,
            (false, true, _) => s.band_disagreements += 1,
            (false, false, true) => s.false_positives += 1,
            (false, false, false) => s.false_negatives += 1,
        }
    }
    let band_ok = n_qubits != 2 || (s.band_cases as f64) <= MAX_BAND_FRACTION * samples as f64;
    s.passed = s.disagreements_outside_band() == 0 && band_ok;
    Ok(s)
}

/// Permutes the qubits of a 3-qubit operator: qubit `q` moves to position `perm[q]`.
fn permute_three(m: &CMatrix, perm: [usize; 3]) -> CMatrix {
    let map = |i: usize| (0..3).fold(0, |acc, q| acc | (((i >> (2 - q)) & 1) << (2 - perm[q])));
    let mut out = CMatrix::zeros(8, 8);
    for i in 0..8 {
        for j in 0..8 {
            out[(map(i), map(j))] = m[(i, j)];
        }
    }
    out
}

/// Average of a 3-qubit operator over all qubit permutations.
pub fn symmetrize_three(m: &CMatrix) -> CMatrix {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    PERMS
        .iter()
        .map(|&p| permute_three(m, p))
        .fold(CMatrix::zeros(8, 8), |acc, x| acc + x)
        .unscale(6.0)
}

/// `sum_{a<b<c} tr(rho_abc · op)`.
pub fn triple_sum(rho: &DensityMatrix, op: &CMatrix) -> Result<f64> {
    let n = rho.n_qubits();
    let mut acc = 0.0;
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let r = partial_trace(rho, &SubsystemSelection::new(vec![a, b, c], n)?)?;
                acc += trace_product(r.entries(), op).re;
            }
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantFit {
    pub quantity: String,
    pub samples: usize,
    pub fitted: f64,
    /// `(numerator, denominator)` when the fit rounds to a small rational.
    pub rational: Option<(i64, i64)>,
    pub max_rel_err: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionalitySummary {
    pub n_qubits: usize,
    pub seed: u64,
    pub fits: Vec<ConstantFit>,
    pub passed: bool,
}

/// Small rational within `tol` (relative) of `x`, denominators up to 48.
pub fn rationalize(x: f64, tol: f64) -> Option<(i64, i64)> {
    (1..=48i64).find_map(|den| {
        let num = (x * den as f64).round();
        ((num / den as f64 - x).abs() <= tol * x.abs().max(1.0)).then_some((num as i64, den))
    })
}

/// Least-squares constant through the origin, frozen to a rational when possible.
pub fn fit_constant(quantity: &str, pairs: &[(f64, f64)]) -> ConstantFit {
    let num: f64 = pairs.iter().map(|(v, d)| v * d).sum();
    let den: f64 = pairs.iter().map(|(_, d)| d * d).sum();
    let fitted = if den > 0.0 { num / den } else { f64::NAN };
    let rational = rationalize(fitted, 1e-9);
    let c = rational.map_or(fitted, |(p, q)| p as f64 / q as f64);
    let max_rel_err = pairs
        .iter()
        .map(|(v, d)| (v - c * d).abs() / (c * d).abs())
        .fold(0.0, f64::max);
    ConstantFit {
        quantity: quantity.to_owned(),
        samples: pairs.len(),
        fitted,
        rational,
        max_rel_err,
        passed: c > 0.0 && max_rel_err <= PROPORTIONALITY_TOL,
    }
}

fn sample_state(n: usize, seed: u64, i: usize) -> Result<DensityMatrix> {
    let kinds = [
        RandomKind::PureSymmetric,
        RandomKind::MixedSymmetric { rank: 2 },
        RandomKind::HaarPure,
        RandomKind::SeparableMixture { terms: 3 },
    ];
    generate(&RandomStateSpec {
        kind: kinds[i % kinds.len()],
        n_qubits: n,
        seed: sample_seed(seed, i),
    })
}

fn random_sl2c(rng: &mut ChaCha8Rng, max_rapidity: f64) -> SL2CElement {
    let mut quat = || {
        let v: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(v[0], v[1], v[2], v[3]))
    };
    let (a, b) = (quat(), quat());
    SL2CElement::from_decomposition(&a, rng.random_range(0.0..=max_rapidity), &b)
}

/// One `(moment value, direct triple sum)` pair per sample and quantity.
fn proportionality_pairs(n: usize, samples: usize, seed: u64) -> Result<Vec<[(f64, f64); 5]>> {
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let rho = sample_state(n, seed, i)?;
            let m: MomentTensors = moments_of(&rho)?;
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed ^ 0x5eed, i));
            let a = random_sl2c(&mut rng, 1.5);
            let b = random_sl2c(&mut rng, 1.5);
            let u = random_sl2c(&mut rng, 0.0);
            let tri = |family: Family, second: &SL2CElement| -> Result<(f64, f64)> {
                let k = KTensor::from_sl2c(family, &a, second)?;
                let v = tripartite_margin_from_moments(&m, &k, TripartiteMode::Symmetric)?;
                let op = symmetrize_three(&family_operator(family, &a, second));
                Ok((v, triple_sum(&rho, &op)?))
            };
            let frame = Frame::from_euler_zyz(
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::PI),
                rng.random_range(0.0..std::f64::consts::TAU),
            );
            let ss = |kind: SsKind| -> Result<(f64, f64)> {
                let (w, _) = kind.witness().expect("unprimed kinds have witnesses");
                let v = ss_value_from_moments(&m, kind, &frame)?;
                Ok((v, triple_sum(&rho, &witness_matrix(w, &frame))?))
            };
            Ok([
                tri(Family::Ghz, &b)?,
                tri(Family::W, &u)?,
                ss(SsKind::Ss1)?,
                ss(SsKind::Ss2)?,
                ss(SsKind::Ss3)?,
            ])
        })
        .collect()
}

/// Fits the constants tying moment-space values to direct per-triple traces.
pub fn proportionality_suite(n_qubits: usize, samples: usize, seed: u64) -> Result<ProportionalitySummary> {
    if !(3..=5).contains(&n_qubits) {
        return param("proportionality suite covers 3 to 5 qubits");
    }
    let pairs = proportionality_pairs(n_qubits, samples, seed)?;
    let names = ["tripartite-ghz", "tripartite-w", "ss1", "ss2", "ss3"];
    let fits: Vec<ConstantFit> = names
        .iter()
        .enumerate()
        .map(|(q, name)| fit_constant(name, &pairs.iter().map(|p| p[q]).collect::<Vec<_>>()))
        .collect();
    let passed = samples > 0 && fits.iter().all(|f| f.passed);
    Ok(ProportionalitySummary {
        n_qubits,
        seed,
        fits,
        passed,
    })
}

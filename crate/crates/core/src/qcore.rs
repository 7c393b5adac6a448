//! Dense state algebra for small collections of qubits.
//!
//! Basis convention: a computational basis index is read as a bitstring with
//! qubit 0 in the most significant position, so for three qubits index `0b100`
//! is `|100>` (qubit 0 excited). `|0>` is the `+1` eigenvector of `sigma^z`.
//!
//! Symmetric states can be held compactly as [`DickeCoefficients`], a matrix
//! over the Dicke basis `|D_m>` where `m` counts excited qubits.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{param, Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Normalization / Hermiticity / trace tolerance for validated states.
pub const NORM_TOL: f64 = 1e-12;
/// Smallest eigenvalue still accepted as positive semidefinite.
pub const PSD_TOL: f64 = -1e-10;
/// Largest off-symmetric-subspace residual accepted when projecting to the Dicke basis.
pub const SYMMETRIC_TOL: f64 = 1e-10;
/// Default cap on the number of qubits handled by the dense representation.
pub const DEFAULT_MAX_QUBITS: usize = 12;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Pauli matrix `sigma^mu` with `sigma^0` the identity.
pub fn pauli(mu: usize) -> Matrix2<C64> {
    match mu {
        0 => Matrix2::new(ONE, ZERO, ZERO, ONE),
        1 => Matrix2::new(ZERO, ONE, ONE, ZERO),
        2 => Matrix2::new(ZERO, -I, I, ZERO),
        3 => Matrix2::new(ONE, ZERO, ZERO, -ONE),
        _ => panic!("pauli index {mu} out of range"),
    }
}

/// Value (0 or 1) of `qubit` inside basis index `index` of an `n`-qubit register.
#[inline]
pub fn bit_of(index: usize, qubit: usize, n: usize) -> usize {
    (index >> (n - 1 - qubit)) & 1
}

pub(crate) fn dim_of(n: usize) -> usize {
    1usize << n
}

pub(crate) fn validate_qubit_count(n: usize) -> Result<()> {
    if n == 0 {
        return param("number of qubits must be positive");
    }
    if n > 24 {
        return Err(Error::Resource(format!("{n} qubits exceeds dense addressing")));
    }
    Ok(())
}

/// Kronecker product of two dense complex matrices.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `u^{⊗n}` for a single-qubit matrix `u`.
pub fn tensor_power(u: &Matrix2<C64>, n: usize) -> CMatrix {
    let single = CMatrix::from_iterator(2, 2, u.iter().cloned());
    let mut out = CMatrix::from_element(1, 1, ONE);
    for _ in 0..n {
        out = out.kronecker(&single);
    }
    out
}

/// Largest absolute entry of `m - m^dagger`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..m.nrows() {
        for c in r..m.ncols() {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues (ascending) and matching column eigenvectors of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn min_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::NAN)
    }
}

/// Full eigendecomposition of a Hermitian matrix, eigenvalues sorted ascending.
pub fn hermitian_eigen(m: &CMatrix) -> HermitianEigen {
    // symmetrize first; the solver reads only one triangle
    let h = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(m.nrows(), m.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermitianEigen { values, vectors }
}

/// A normalized pure state of `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n_qubits: usize,
    amplitudes: CVector,
}

impl PureState {
    pub fn new(n_qubits: usize, amplitudes: CVector) -> Result<Self> {
        validate_qubit_count(n_qubits)?;
        if amplitudes.len() != dim_of(n_qubits) {
            return Err(Error::Dimension {
                expected: dim_of(n_qubits),
                found: amplitudes.len(),
            });
        }
        let norm2 = amplitudes.norm_squared();
        if (norm2 - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("squared norm {norm2} differs from 1")));
        }
        Ok(Self { n_qubits, amplitudes })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(n_qubits: usize, amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Self::new(n_qubits, amplitudes.unscale(norm))
    }

    /// Product state `v_0 ⊗ v_1 ⊗ ...` of (normalized) single-qubit vectors.
    pub fn product(factors: &[[C64; 2]]) -> Result<Self> {
        let mut amps = CVector::from_element(1, ONE);
        for f in factors {
            let v = CVector::from_row_slice(f);
            amps = amps.kronecker(&v);
        }
        Self::normalized(factors.len(), amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_unchecked(self.n_qubits, &self.amplitudes * self.amplitudes.adjoint())
    }

    /// Applies the same single-qubit unitary to every qubit.
    pub fn rotate_all(&self, u: &Matrix2<C64>) -> PureState {
        let amps = apply_local_all(&self.amplitudes, u, self.n_qubits);
        PureState {
            n_qubits: self.n_qubits,
            amplitudes: amps,
        }
    }

    /// Applies an arbitrary `2^n x 2^n` unitary and renormalizes.
    pub fn evolve(&self, u: &CMatrix) -> Result<PureState> {
        if u.nrows() != self.amplitudes.len() || u.ncols() != self.amplitudes.len() {
            return Err(Error::Dimension {
                expected: self.amplitudes.len(),
                found: u.nrows(),
            });
        }
        PureState::normalized(self.n_qubits, u * &self.amplitudes)
    }
}

fn apply_local_all(v: &CVector, u: &Matrix2<C64>, n: usize) -> CVector {
    let mut cur = v.clone();
    for q in 0..n {
        let stride = 1usize << (n - 1 - q);
        let mut next = cur.clone();
        for idx in 0..cur.len() {
            if idx & stride == 0 {
                let (a, b) = (cur[idx], cur[idx | stride]);
                next[idx] = u[(0, 0)] * a + u[(0, 1)] * b;
                next[idx | stride] = u[(1, 0)] * a + u[(1, 1)] * b;
            }
        }
        cur = next;
    }
    cur
}

/// The named families used throughout the criteria.
#[derive(Debug, Clone, PartialEq)]
pub enum NamedState {
    Ghz,
    W,
    /// `|theta, phi>^{⊗n}` with `|theta,phi> = cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`.
    Coherent {
        theta: f64,
        phi: f64,
    },
    Computational(String),
    /// `sin(alpha/2)|00> + cos(alpha/2)|11>`; two qubits only.
    Psi0 {
        alpha: f64,
    },
}

/// Single-qubit spin coherent state `cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`.
pub fn coherent_qubit(theta: f64, phi: f64) -> [C64; 2] {
    [
        C64::new((theta / 2.0).cos(), 0.0),
        C64::from_polar((theta / 2.0).sin(), phi),
    ]
}

/// Dicke amplitudes of `|θ,φ>^{⊗N}`.
pub fn coherent_dicke(n_qubits: usize, theta: f64, phi: f64) -> CVector {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mut binom = 1.0f64;
    CVector::from_iterator(
        n_qubits + 1,
        (0..=n_qubits).map(|m| {
            if m > 0 {
                binom = binom * (n_qubits + 1 - m) as f64 / m as f64;
            }
            C64::from_polar(
                binom.sqrt() * c.powi((n_qubits - m) as i32) * s.powi(m as i32),
                phi * m as f64,
            )
        }),
    )
}

pub fn build_named_state(family: &NamedState, n_qubits: usize) -> Result<PureState> {
    validate_qubit_count(n_qubits)?;
    let d = dim_of(n_qubits);
    let mut amps = CVector::zeros(d);
    match family {
        NamedState::Ghz => {
            if n_qubits < 2 {
                return param("GHZ requires at least 2 qubits");
            }
            let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            amps[0] = h;
            amps[d - 1] = h;
        }
        NamedState::W => {
            if n_qubits < 2 {
                return param("W requires at least 2 qubits");
            }
            let a = C64::new(1.0 / (n_qubits as f64).sqrt(), 0.0);
            for q in 0..n_qubits {
                amps[1usize << q] = a;
            }
        }
        NamedState::Coherent { theta, phi } => {
            if !theta.is_finite() || !phi.is_finite() {
                return param("coherent angles must be finite");
            }
            let q = coherent_qubit(*theta, *phi);
            return PureState::product(&vec![q; n_qubits]);
        }
        NamedState::Computational(bits) => {
            if bits.len() != n_qubits || !bits.chars().all(|c| c == '0' || c == '1') {
                return param(format!("bitstring {bits:?} does not describe {n_qubits} qubits"));
            }
            let idx = usize::from_str_radix(bits, 2).map_err(|e| Error::Parameter(e.to_string()))?;
            amps[idx] = ONE;
        }
        NamedState::Psi0 { alpha } => {
            if n_qubits != 2 {
                return param("psi0 is a two-qubit state");
            }
            if !(-std::f64::consts::PI..=std::f64::consts::PI).contains(alpha) {
                return param("psi0 angle must lie in [-pi, pi]");
            }
            amps[0] = C64::new((alpha / 2.0).sin(), 0.0);
            amps[3] = C64::new((alpha / 2.0).cos(), 0.0);
        }
    }
    PureState::new(n_qubits, amps)
}

/// Hermitian, trace-one, positive semidefinite matrix over `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    entries: CMatrix,
}

impl DensityMatrix {
    pub fn new(n_qubits: usize, entries: CMatrix) -> Result<Self> {
        validate_qubit_count(n_qubits)?;
        let d = dim_of(n_qubits);
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::Dimension {
                expected: d,
                found: entries.nrows(),
            });
        }
        let herm = hermiticity_defect(&entries);
        if herm > NORM_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = entries.trace();
        if (tr - ONE).norm() > NORM_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = hermitian_eigen(&entries).min_value();
        if min < PSD_TOL {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (min eigenvalue {min:e})"
            )));
        }
        Ok(Self { n_qubits, entries })
    }

    pub(crate) fn from_unchecked(n_qubits: usize, entries: CMatrix) -> Self {
        Self { n_qubits, entries }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        validate_qubit_count(n_qubits)?;
        let d = dim_of(n_qubits);
        Ok(Self::from_unchecked(
            n_qubits,
            CMatrix::identity(d, d).unscale(d as f64),
        ))
    }

    /// Convex combination of states of equal size.
    pub fn mixture(parts: &[(f64, DensityMatrix)]) -> Result<Self> {
        let Some((_, first)) = parts.first() else {
            return param("empty mixture");
        };
        let n = first.n_qubits;
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        if parts.iter().any(|(w, _)| *w < 0.0) || total <= 0.0 {
            return param("mixture weights must be nonnegative with positive sum");
        }
        let mut acc = CMatrix::zeros(first.dim(), first.dim());
        for (w, rho) in parts {
            if rho.n_qubits != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: rho.n_qubits,
                });
            }
            acc += rho.entries.scale(*w / total);
        }
        Ok(Self::from_unchecked(n, acc))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        Self::from_unchecked(self.n_qubits + other.n_qubits, kron(&self.entries, &other.entries))
    }

    /// `u rho u^dagger` for a unitary `u` on the full space.
    pub fn conjugate(&self, u: &CMatrix) -> Result<DensityMatrix> {
        if u.nrows() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: u.nrows(),
            });
        }
        Ok(Self::from_unchecked(self.n_qubits, u * &self.entries * u.adjoint()))
    }

    /// Applies the same single-qubit unitary to every qubit.
    pub fn rotate_all(&self, u: &Matrix2<C64>) -> DensityMatrix {
        let full = tensor_power(u, self.n_qubits);
        Self::from_unchecked(self.n_qubits, &full * &self.entries * full.adjoint())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.entries).min_value()
    }
}

/// Sorted, duplicate-free list of qubit indices kept by a reduction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(transparent)]
pub struct SubsystemSelection {
    kept: Vec<usize>,
}

impl SubsystemSelection {
    pub fn new(kept: Vec<usize>, n_qubits: usize) -> Result<Self> {
        if kept.is_empty() {
            return param("subsystem selection is empty");
        }
        if kept.windows(2).any(|w| w[0] >= w[1]) {
            return param(format!("subsystem selection {kept:?} is not strictly increasing"));
        }
        if let Some(&q) = kept.iter().find(|&&q| q >= n_qubits) {
            return param(format!("qubit {q} out of range for {n_qubits} qubits"));
        }
        Ok(Self { kept })
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }
}

/// Full-register index for (kept-register index, traced-register index).
fn index_maps(n: usize, kept: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let traced: Vec<usize> = (0..n).filter(|q| !kept.contains(q)).collect();
    let spread = |qubits: &[usize]| -> Vec<usize> {
        let k = qubits.len();
        (0..1usize << k)
            .map(|local| {
                qubits.iter().enumerate().fold(0usize, |acc, (pos, &q)| {
                    acc | (((local >> (k - 1 - pos)) & 1) << (n - 1 - q))
                })
            })
            .collect()
    };
    (spread(kept), spread(&traced))
}

pub fn partial_trace(rho: &DensityMatrix, keep: &SubsystemSelection) -> Result<DensityMatrix> {
    let n = rho.n_qubits;
    if keep.kept.iter().any(|&q| q >= n) {
        return param("selection out of range");
    }
    let (kept_map, traced_map) = index_maps(n, &keep.kept);
    let dk = kept_map.len();
    let m = &rho.entries;
    let out = CMatrix::from_fn(dk, dk, |i, j| {
        traced_map.iter().map(|&t| m[(kept_map[i] | t, kept_map[j] | t)]).sum()
    });
    Ok(DensityMatrix::from_unchecked(keep.len(), out))
}

/// Reduced state of a pure state, without forming the full projector.
pub fn partial_trace_pure(psi: &PureState, keep: &SubsystemSelection) -> Result<DensityMatrix> {
    let n = psi.n_qubits;
    if keep.kept.iter().any(|&q| q >= n) {
        return param("selection out of range");
    }
    let (kept_map, traced_map) = index_maps(n, &keep.kept);
    let a = &psi.amplitudes;
    let dk = kept_map.len();
    let out = CMatrix::from_fn(dk, dk, |i, j| {
        traced_map
            .iter()
            .map(|&t| a[kept_map[i] | t] * a[kept_map[j] | t].conj())
            .sum()
    });
    Ok(DensityMatrix::from_unchecked(keep.len(), out))
}

/// Transpose of one tensor factor (w.r.t. the computational basis) of an `n`-qubit matrix.
pub fn partial_transpose_matrix(m: &CMatrix, n: usize, subsystem: usize) -> Result<CMatrix> {
    if subsystem >= n {
        return param(format!("qubit {subsystem} out of range for {n} qubits"));
    }
    if m.nrows() != dim_of(n) || m.ncols() != dim_of(n) {
        return Err(Error::Dimension {
            expected: dim_of(n),
            found: m.nrows(),
        });
    }
    let mask = 1usize << (n - 1 - subsystem);
    Ok(CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| {
        let (r2, c2) = ((r & !mask) | (c & mask), (c & !mask) | (r & mask));
        m[(r2, c2)]
    }))
}

pub fn partial_transpose(rho: &DensityMatrix, subsystem: usize) -> Result<CMatrix> {
    partial_transpose_matrix(&rho.entries, rho.n_qubits, subsystem)
}

/// `tr(rho · op)`.
pub fn expectation(rho: &DensityMatrix, op: &CMatrix) -> Result<C64> {
    let d = rho.dim();
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::Dimension {
            expected: d,
            found: op.nrows(),
        });
    }
    Ok(trace_product(&rho.entries, op))
}

/// `tr(a · b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = ZERO;
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            acc += a[(r, c)] * b[(c, r)];
        }
    }
    acc
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Columns are the Dicke states `|D_0> .. |D_n>` embedded in the full register.
pub fn dicke_isometry(n: usize) -> CMatrix {
    let d = dim_of(n);
    let mut v = CMatrix::zeros(d, n + 1);
    for idx in 0..d {
        let m = idx.count_ones() as usize;
        v[(idx, m)] = C64::new(1.0 / binomial(n, m).sqrt(), 0.0);
    }
    v
}

/// Symmetric state stored over the Dicke basis (index `m` = number of excited qubits).
#[derive(Debug, Clone, PartialEq)]
pub struct DickeCoefficients {
    n_qubits: usize,
    matrix: CMatrix,
}

impl DickeCoefficients {
    pub fn new(n_qubits: usize, matrix: CMatrix) -> Result<Self> {
        validate_qubit_count(n_qubits)?;
        let d = n_qubits + 1;
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::Dimension {
                expected: d,
                found: matrix.nrows(),
            });
        }
        let herm = hermiticity_defect(&matrix);
        if herm > NORM_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > NORM_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = hermitian_eigen(&matrix).min_value();
        if min < PSD_TOL {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (min eigenvalue {min:e})"
            )));
        }
        Ok(Self { n_qubits, matrix })
    }

    pub(crate) fn from_unchecked(n_qubits: usize, matrix: CMatrix) -> Self {
        Self { n_qubits, matrix }
    }

    /// Projector onto the Dicke state with `m` excitations.
    pub fn basis_state(n_qubits: usize, m: usize) -> Result<Self> {
        validate_qubit_count(n_qubits)?;
        if m > n_qubits {
            return param(format!("Dicke index {m} exceeds {n_qubits}"));
        }
        let mut mat = CMatrix::zeros(n_qubits + 1, n_qubits + 1);
        mat[(m, m)] = ONE;
        Ok(Self::from_unchecked(n_qubits, mat))
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        validate_qubit_count(n_qubits)?;
        let d = n_qubits + 1;
        Ok(Self::from_unchecked(
            n_qubits,
            CMatrix::identity(d, d).unscale(d as f64),
        ))
    }

    /// Projector onto a normalized vector of Dicke amplitudes.
    pub fn from_pure(n_qubits: usize, amplitudes: &CVector) -> Result<Self> {
        if amplitudes.len() != n_qubits + 1 {
            return Err(Error::Dimension {
                expected: n_qubits + 1,
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let v = amplitudes.unscale(norm);
        Ok(Self::from_unchecked(n_qubits, &v * v.adjoint()))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Embeds into the full `2^n` register.
    pub fn to_density(&self) -> DensityMatrix {
        let v = dicke_isometry(self.n_qubits);
        DensityMatrix::from_unchecked(self.n_qubits, &v * &self.matrix * v.adjoint())
    }

    /// Projects a full-register state onto the Dicke basis; fails if `rho`
    /// has weight outside the symmetric subspace.
    pub fn from_density(rho: &DensityMatrix) -> Result<Self> {
        let n = rho.n_qubits;
        let v = dicke_isometry(n);
        let d = v.adjoint() * rho.entries() * &v;
        let back = &v * &d * v.adjoint();
        let residual = (rho.entries() - back).norm();
        if residual > SYMMETRIC_TOL {
            return Err(Error::Representation(format!(
                "state is not supported on the symmetric subspace (residual {residual:e})"
            )));
        }
        Ok(Self::from_unchecked(n, d))
    }
}

/// Frobenius norm of the component of `rho` outside the symmetric subspace.
pub fn symmetric_residual(rho: &DensityMatrix) -> f64 {
    let v = dicke_isometry(rho.n_qubits);
    let d = v.adjoint() * rho.entries() * &v;
    (rho.entries() - &v * d * v.adjoint()).norm()
}

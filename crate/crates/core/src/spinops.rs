//! Collective spin operators `J^mu` and their moment tensors.
//!
//! `J^i = sum_a sigma^i_a / 2` for `i = 1, 2, 3`, with the bookkeeping
//! component `J^0 = (N/2)·1`. Greek indices run over `0..=3`.
//!
//! Operators are stored sparsely so moments of 12-qubit pure states stay
//! cheap; `to_dense` is available for identity checks at small `N`.

use nalgebra::{DVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{param, Error, Result};
use crate::qcore::{
    dim_of, CMatrix, CVector, DensityMatrix, DickeCoefficients, PureState, C64, DEFAULT_MAX_QUBITS, I, ONE, ZERO,
};

/// Row-compressed complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    dim: usize,
    rows: Vec<Vec<(usize, C64)>>,
}

impl SparseOp {
    fn from_rows(dim: usize, rows: Vec<Vec<(usize, C64)>>) -> Self {
        Self { dim, rows }
    }

    pub fn identity(dim: usize, scale: f64) -> Self {
        Self::from_rows(dim, (0..dim).map(|r| vec![(r, C64::new(scale, 0.0))]).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                m[(r, c)] += v;
            }
        }
        m
    }

    /// `self · m`.
    pub fn mul_dense(&self, m: &CMatrix) -> CMatrix {
        assert_eq!(m.nrows(), self.dim, "sparse/dense dimension mismatch");
        let mut out = CMatrix::zeros(self.dim, m.ncols());
        for col in 0..m.ncols() {
            let src = m.column(col);
            for (r, row) in self.rows.iter().enumerate() {
                let mut acc = ZERO;
                for &(c, v) in row {
                    acc += v * src[c];
                }
                out[(r, col)] = acc;
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &CVector) -> CVector {
        DVector::from_iterator(
            self.dim,
            self.rows
                .iter()
                .map(|row| row.iter().map(|&(c, x)| x * v[c]).sum::<C64>()),
        )
    }

    /// `tr(self · m)`.
    pub fn trace_with(&self, m: &CMatrix) -> C64 {
        let mut acc = ZERO;
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                acc += v * m[(c, r)];
            }
        }
        acc
    }

    /// `sum_k w_k · op_k` for operators of equal dimension.
    pub fn combine(terms: &[(C64, &SparseOp)]) -> SparseOp {
        let dim = terms[0].1.dim;
        let rows = (0..dim)
            .map(|r| {
                let mut row: Vec<(usize, C64)> = Vec::new();
                for (w, op) in terms {
                    for &(c, v) in &op.rows[r] {
                        match row.iter_mut().find(|(cc, _)| *cc == c) {
                            Some(slot) => slot.1 += w * v,
                            None => row.push((c, w * v)),
                        }
                    }
                }
                row.retain(|(_, v)| v.norm() != 0.0);
                row.sort_by_key(|(c, _)| *c);
                row
            })
            .collect();
        SparseOp::from_rows(dim, rows)
    }
}

/// Which basis the operators act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinBasis {
    /// The computational basis of `2^N` states.
    Full,
    /// The `N+1` Dicke states of the symmetric subspace.
    Dicke,
}

/// The four collective operators `J^0..J^3` for `N` qubits.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    n_qubits: usize,
    basis: SpinBasis,
    j: [SparseOp; 4],
}

impl SpinOperators {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn basis(&self) -> SpinBasis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.j[0].dim
    }

    pub fn component(&self, mu: usize) -> &SparseOp {
        &self.j[mu]
    }

    /// Restriction to the symmetric subspace, in the Dicke basis.
    pub fn dicke(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return param("number of qubits must be positive");
        }
        let d = n_qubits + 1;
        let half = n_qubits as f64 / 2.0;
        let ladder = |m: usize| ((m * (n_qubits + 1 - m)) as f64).sqrt() / 2.0;
        let mut jx = vec![Vec::new(); d];
        let mut jy = vec![Vec::new(); d];
        let mut jz = vec![Vec::new(); d];
        for m in 0..d {
            if m > 0 {
                // <m-1| J |m> and its mirror
                jx[m - 1].push((m, C64::new(ladder(m), 0.0)));
                jx[m].push((m - 1, C64::new(ladder(m), 0.0)));
                jy[m - 1].push((m, C64::new(0.0, -ladder(m))));
                jy[m].push((m - 1, C64::new(0.0, ladder(m))));
            }
            jz[m].push((m, C64::new(half - m as f64, 0.0)));
        }
        for rows in [&mut jx, &mut jy] {
            for row in rows.iter_mut() {
                row.sort_by_key(|(c, _)| *c);
            }
        }
        Ok(Self {
            n_qubits,
            basis: SpinBasis::Dicke,
            j: [
                SparseOp::identity(d, half),
                SparseOp::from_rows(d, jx),
                SparseOp::from_rows(d, jy),
                SparseOp::from_rows(d, jz),
            ],
        })
    }
}

/// Collective spin operators on the full register, capped at [`DEFAULT_MAX_QUBITS`].
pub fn collective_spin(n_qubits: usize) -> Result<SpinOperators> {
    collective_spin_capped(n_qubits, DEFAULT_MAX_QUBITS)
}

pub fn collective_spin_capped(n_qubits: usize, cap: usize) -> Result<SpinOperators> {
    if n_qubits == 0 {
        return param("number of qubits must be positive");
    }
    if n_qubits > cap {
        return Err(Error::Resource(format!("{n_qubits} qubits exceeds the cap of {cap}")));
    }
    let d = dim_of(n_qubits);
    let half = n_qubits as f64 / 2.0;
    let mut jx = Vec::with_capacity(d);
    let mut jy = Vec::with_capacity(d);
    let mut jz = Vec::with_capacity(d);
    for r in 0..d {
        let mut rx = Vec::with_capacity(n_qubits);
        let mut ry = Vec::with_capacity(n_qubits);
        for q in 0..n_qubits {
            let mask = 1usize << (n_qubits - 1 - q);
            rx.push((r ^ mask, C64::new(0.5, 0.0)));
            // sigma^y_{out,in}: <1|y|0> = i, <0|y|1> = -i
            let v = if r & mask != 0 {
                C64::new(0.0, 0.5)
            } else {
                C64::new(0.0, -0.5)
            };
            ry.push((r ^ mask, v));
        }
        rx.sort_by_key(|(c, _)| *c);
        ry.sort_by_key(|(c, _)| *c);
        jx.push(rx);
        jy.push(ry);
        jz.push(vec![(r, C64::new(half - r.count_ones() as f64, 0.0))]);
    }
    Ok(SpinOperators {
        n_qubits,
        basis: SpinBasis::Full,
        j: [
            SparseOp::identity(d, half),
            SparseOp::from_rows(d, jx),
            SparseOp::from_rows(d, jy),
            SparseOp::from_rows(d, jz),
        ],
    })
}

/// `J_n = n_x J^1 + n_y J^2 + n_z J^3` for a unit vector `n`.
pub fn rotated_component(s: &SpinOperators, n: &Vector3<f64>) -> Result<SparseOp> {
    if (n.norm() - 1.0).abs() > 1e-10 {
        return param(format!("direction has norm {} (expected 1)", n.norm()));
    }
    Ok(SparseOp::combine(&[
        (C64::new(n.x, 0.0), &s.j[1]),
        (C64::new(n.y, 0.0), &s.j[2]),
        (C64::new(n.z, 0.0), &s.j[3]),
    ]))
}

/// First, second and third moments of the collective spin, operator-ordered:
/// `m2[a][b] = <J^a J^b>`, `m3[a][b][c] = <J^a J^b J^c>`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTensors {
    pub n_qubits: usize,
    pub m1: [f64; 4],
    pub m2: [[C64; 4]; 4],
    pub m3: [[[C64; 4]; 4]; 4],
}

impl MomentTensors {
    fn assemble(n_qubits: usize, spatial1: [C64; 3], spatial2: [[C64; 3]; 3], spatial3: [[[C64; 3]; 3]; 3]) -> Self {
        let h = C64::new(n_qubits as f64 / 2.0, 0.0);
        let mut m1c = [h, ZERO, ZERO, ZERO];
        m1c[1..].copy_from_slice(&spatial1);
        let mut m2 = [[ZERO; 4]; 4];
        let mut m3 = [[[ZERO; 4]; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                m2[a][b] = match (a, b) {
                    (0, _) => h * m1c[b],
                    (_, 0) => h * m1c[a],
                    _ => spatial2[a - 1][b - 1],
                };
            }
        }
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    m3[a][b][c] = match (a, b, c) {
                        (0, _, _) => h * m2[b][c],
                        (_, 0, _) => h * m2[a][c],
                        (_, _, 0) => h * m2[a][b],
                        _ => spatial3[a - 1][b - 1][c - 1],
                    };
                }
            }
        }
        Self {
            n_qubits,
            m1: m1c.map(|z| z.re),
            m2,
            m3,
        }
    }

    /// `<J_a>` for a 3-vector `a`.
    pub fn first(&self, a: &Vector3<f64>) -> f64 {
        (0..3).map(|i| a[i] * self.m1[i + 1]).sum()
    }

    /// `<J_a J_b>`.
    pub fn second(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> C64 {
        let mut acc = ZERO;
        for i in 0..3 {
            for j in 0..3 {
                acc += self.m2[i + 1][j + 1] * (a[i] * b[j]);
            }
        }
        acc
    }

    /// `<J_a J_b J_c>`.
    pub fn third(&self, a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> C64 {
        let mut acc = ZERO;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    acc += self.m3[i + 1][j + 1][k + 1] * (a[i] * b[j] * c[k]);
                }
            }
        }
        acc
    }

    /// Mean spin vector `(<J^1>, <J^2>, <J^3>)`.
    pub fn mean_spin(&self) -> Vector3<f64> {
        Vector3::new(self.m1[1], self.m1[2], self.m1[3])
    }

    /// Symmetrized covariance `Re<J_i J_j> - <J_i><J_j>` over spatial indices.
    pub fn covariance(&self) -> nalgebra::Matrix3<f64> {
        nalgebra::Matrix3::from_fn(|i, j| {
            0.5 * (self.m2[i + 1][j + 1] + self.m2[j + 1][i + 1]).re - self.m1[i + 1] * self.m1[j + 1]
        })
    }
}

fn moments_from_dense(ops: &SpinOperators, rho: &CMatrix) -> MomentTensors {
    let y: Vec<CMatrix> = (1..4).map(|k| ops.j[k].mul_dense(rho)).collect();
    let mut s1 = [ZERO; 3];
    let mut s2 = [[ZERO; 3]; 3];
    let mut s3 = [[[ZERO; 3]; 3]; 3];
    for k in 0..3 {
        s1[k] = y[k].trace();
        for i in 0..3 {
            s2[i][k] = ops.j[i + 1].trace_with(&y[k]);
        }
    }
    for j in 0..3 {
        for k in 0..3 {
            let z = ops.j[j + 1].mul_dense(&y[k]);
            for i in 0..3 {
                s3[i][j][k] = ops.j[i + 1].trace_with(&z);
            }
        }
    }
    MomentTensors::assemble(ops.n_qubits, s1, s2, s3)
}

/// Moments `tr(rho J^a ...)` of a full-register density matrix.
pub fn moments(rho: &DensityMatrix, s: &SpinOperators) -> Result<MomentTensors> {
    if s.basis != SpinBasis::Full || s.dim() != rho.dim() {
        return Err(Error::Dimension {
            expected: s.dim(),
            found: rho.dim(),
        });
    }
    Ok(moments_from_dense(s, rho.entries()))
}

/// Moments of a symmetric state held in the Dicke basis.
pub fn moments_dicke(d: &DickeCoefficients) -> Result<MomentTensors> {
    let s = SpinOperators::dicke(d.n_qubits())?;
    Ok(moments_from_dense(&s, d.matrix()))
}

/// Moments of a pure state, computed from operator actions on the vector.
pub fn moments_pure(psi: &PureState, s: &SpinOperators) -> Result<MomentTensors> {
    if s.basis != SpinBasis::Full || s.dim() != psi.amplitudes().len() {
        return Err(Error::Dimension {
            expected: s.dim(),
            found: psi.amplitudes().len(),
        });
    }
    let v = psi.amplitudes();
    let jv: Vec<CVector> = (1..4).map(|k| s.j[k].mul_vec(v)).collect();
    let mut s1 = [ZERO; 3];
    let mut s2 = [[ZERO; 3]; 3];
    let mut s3 = [[[ZERO; 3]; 3]; 3];
    for k in 0..3 {
        s1[k] = v.dotc(&jv[k]);
        for i in 0..3 {
            s2[i][k] = jv[i].dotc(&jv[k]);
        }
    }
    for j in 0..3 {
        for k in 0..3 {
            let w = s.j[j + 1].mul_vec(&jv[k]);
            for i in 0..3 {
                s3[i][j][k] = jv[i].dotc(&w);
            }
        }
    }
    Ok(MomentTensors::assemble(s.n_qubits, s1, s2, s3))
}

/// Multiplication table of the Pauli algebra: `sigma^a sigma^b = f[a][b][mu] sigma^mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    pub f: [[[C64; 4]; 4]; 4],
}

impl Default for StructureConstants {
    fn default() -> Self {
        Self::new()
    }
}

impl StructureConstants {
    pub fn new() -> Self {
        let mut f = [[[ZERO; 4]; 4]; 4];
        for a in 0..4 {
            f[0][a][a] = ONE;
            f[a][0][a] = ONE;
        }
        for i in 1..4 {
            for j in 1..4 {
                for l in 1..4 {
                    f[i][j][l] = I * levi_civita(i, j, l);
                }
                if i == j {
                    f[i][j][0] = ONE;
                }
            }
        }
        Self { f }
    }

    /// Largest entry deviation of `sigma^a sigma^b - f^{ab}_mu sigma^mu` over all `a, b`.
    pub fn pauli_product_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let lhs = crate::qcore::pauli(a) * crate::qcore::pauli(b);
                let mut rhs = nalgebra::Matrix2::<C64>::zeros();
                for mu in 0..4 {
                    rhs += crate::qcore::pauli(mu) * self.f[a][b][mu];
                }
                worst = worst.max((lhs - rhs).camax());
            }
        }
        worst
    }
}

pub(crate) fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (1, 2, 3) | (2, 3, 1) | (3, 1, 2) => 1.0,
        (3, 2, 1) | (1, 3, 2) | (2, 1, 3) => -1.0,
        _ => 0.0,
    }
}

/// Applies `sigma^{mu_1}_{q_1} ... sigma^{mu_k}_{q_k}` (distinct qubits) to every column of `m`.
fn apply_pauli_string(factors: &[(usize, usize)], n: usize, m: &CMatrix) -> CMatrix {
    let d = m.nrows();
    let mut out = CMatrix::zeros(d, m.ncols());
    for src in 0..d {
        let mut dst = src;
        let mut phase = ONE;
        for &(q, mu) in factors {
            let mask = 1usize << (n - 1 - q);
            let b = src & mask != 0;
            match mu {
                0 => {}
                1 => dst ^= mask,
                2 => {
                    dst ^= mask;
                    phase *= if b { C64::new(0.0, -1.0) } else { I };
                }
                3 => {
                    if b {
                        phase = -phase;
                    }
                }
                _ => unreachable!(),
            }
        }
        for c in 0..m.ncols() {
            out[(dst, c)] += phase * m[(src, c)];
        }
    }
    out
}

/// Largest register size for which identities are checked against the full identity matrix.
pub const DENSE_IDENTITY_MAX: usize = 6;

/// Probe vectors: the identity for small `N`, otherwise a few seeded random unit vectors.
fn probe_columns(n: usize) -> CMatrix {
    let d = dim_of(n);
    if n <= DENSE_IDENTITY_MAX {
        return CMatrix::identity(d, d);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x1d_e771);
    let mut m = CMatrix::from_fn(d, 4, |_, _| {
        C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
    });
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        col.unscale_mut(norm);
    }
    m
}

/// Residual of `sum_{a<b} sigma^i_a sigma^i_b = 2 (J^i)^2 - N/2`, maximized over `i`.
///
/// Reported as a Frobenius norm over the probe columns, which bounds the
/// operator norm from above when the probes are the identity (`N <= 6`).
pub fn pair_identity_residual(n_qubits: usize) -> Result<f64> {
    if n_qubits < 2 {
        return param("pair identity needs at least 2 qubits");
    }
    let s = collective_spin(n_qubits)?;
    let v = probe_columns(n_qubits);
    let mut worst: f64 = 0.0;
    for i in 1..4 {
        let mut lhs = CMatrix::zeros(v.nrows(), v.ncols());
        for a in 0..n_qubits {
            for b in a + 1..n_qubits {
                lhs += apply_pauli_string(&[(a, i), (b, i)], n_qubits, &v);
            }
        }
        let jv = s.j[i].mul_dense(&v);
        let rhs = s.j[i].mul_dense(&jv).scale(2.0) - v.scale(n_qubits as f64 / 2.0);
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

/// Residual of the three-body identity
/// `3 sum_{a<b<c} sigma^(a sigma^b sigma^c) = 4 J^(a J^b J^c) - 6 f^(ab_mu J^c J^mu) + 2 f^(ab_mu f^c mu)_nu J^nu`,
/// maximized over all index triples. Brackets average over index permutations; the
/// two-operator and `f·f` terms use the `(c mu)`-symmetrized forms that enter the
/// tripartite criterion.
pub fn triple_identity_residual(n_qubits: usize) -> Result<f64> {
    if n_qubits < 2 {
        return param("triple identity needs at least 2 qubits");
    }
    let s = collective_spin(n_qubits)?;
    let f = StructureConstants::new().f;
    let v = probe_columns(n_qubits);
    let jv: Vec<CMatrix> = (0..4).map(|c| s.j[c].mul_dense(&v)).collect();
    let jjv: Vec<Vec<CMatrix>> = (0..4)
        .map(|b| (0..4).map(|c| s.j[b].mul_dense(&jv[c])).collect())
        .collect();
    let jjjv = |a: usize, b: usize, c: usize| s.j[a].mul_dense(&jjv[b][c]);
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut worst: f64 = 0.0;
    for alpha in 0..4 {
        for beta in 0..4 {
            for gamma in 0..4 {
                let idx = [alpha, beta, gamma];
                let mut lhs = CMatrix::zeros(v.nrows(), v.ncols());
                let mut rhs = CMatrix::zeros(v.nrows(), v.ncols());
                for p in perms {
                    let (x, y, z) = (idx[p[0]], idx[p[1]], idx[p[2]]);
                    for a in 0..n_qubits {
                        for b in a + 1..n_qubits {
                            for c in b + 1..n_qubits {
                                lhs += apply_pauli_string(&[(a, x), (b, y), (c, z)], n_qubits, &v);
                            }
                        }
                    }
                    rhs += jjjv(x, y, z).scale(4.0);
                    for mu in 0..4 {
                        let fxy = f[x][y][mu];
                        if fxy.norm() == 0.0 {
                            continue;
                        }
                        rhs -= (&jjv[z][mu] + &jjv[mu][z]) * (fxy * 3.0);
                        for nu in 0..4 {
                            let ff = fxy * (f[z][mu][nu] + f[mu][z][nu]);
                            if ff.norm() != 0.0 {
                                rhs += &jv[nu] * ff;
                            }
                        }
                    }
                }
                // lhs carries 3/6, rhs 1/6 from the permutation averages
                let diff = lhs * C64::new(0.5, 0.0) - rhs.unscale(6.0);
                worst = worst.max(diff.norm());
            }
        }
    }
    Ok(worst)
}

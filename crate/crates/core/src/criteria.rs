//! Entanglement inequalities evaluated from collective-spin moments.
//!
//! Every criterion is reported as a *margin*: the left-hand side of an
//! inequality of the form `value < 0`. A margin below `-DETECTION_TOL`
//! flags entanglement; `|margin| <= DETECTION_TOL` is reported as a boundary case.
//!
//! * ξ² (spin squeezing parameter, `J = N/2` convention)
//! * the bipartite criterion, in closed (α-minimized) and α-explicit form
//! * the tripartite criterion built from a real 4×4×4 tensor `K` obtained from
//!   two restricted Lorentz transformations (GHZ family) or a Lorentz
//!   transformation and a rotation (W family)
//! * the witness-based inequalities `ss1`, `ss2`, `ss3`, `ss1p`, `ss2p`.

use std::fmt;

use nalgebra::{Matrix2, Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::qcore::{
    build_named_state, kron, partial_transpose_matrix, pauli, tensor_power, CMatrix, DensityMatrix, NamedState, C64,
    ONE, ZERO,
};
use crate::spinops::{collective_spin, moments, MomentTensors, StructureConstants};

/// Margins below `-DETECTION_TOL` count as detection.
pub const DETECTION_TOL: f64 = 1e-9;
/// Tolerance on the zero-mean / variance-floor side conditions of `ss1p` and `ss2p`.
pub const PRECONDITION_TOL: f64 = 1e-9;
const UNIT_TOL: f64 = 1e-10;

/// Unit 3-vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub n: [f64; 3],
}

impl Direction {
    pub fn new(v: Vector3<f64>) -> Result<Self> {
        if (v.norm() - 1.0).abs() > UNIT_TOL {
            return param(format!("direction norm {} differs from 1", v.norm()));
        }
        Ok(Self { n: [v.x, v.y, v.z] })
    }

    /// Polar angle from `+z`, azimuth from `+x`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Self {
            n: [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()],
        }
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::from(self.n)
    }
}

/// Right-handed orthonormal frame `(k, l, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub k: [f64; 3],
    pub l: [f64; 3],
    pub n: [f64; 3],
}

impl Frame {
    pub fn new(k: Vector3<f64>, l: Vector3<f64>, n: Vector3<f64>) -> Result<Self> {
        for (name, v) in [("k", &k), ("l", &l), ("n", &n)] {
            if (v.norm() - 1.0).abs() > UNIT_TOL {
                return param(format!("frame axis {name} is not a unit vector"));
            }
        }
        if k.dot(&l).abs() > UNIT_TOL || k.dot(&n).abs() > UNIT_TOL || l.dot(&n).abs() > UNIT_TOL {
            return param("frame axes are not orthogonal");
        }
        let det = Matrix3::from_columns(&[k, l, n]).determinant();
        if (det - 1.0).abs() > UNIT_TOL {
            return param(format!("frame is not right-handed (det {det})"));
        }
        Ok(Self {
            k: k.into(),
            l: l.into(),
            n: n.into(),
        })
    }

    pub fn canonical() -> Self {
        Self {
            k: [1.0, 0.0, 0.0],
            l: [0.0, 1.0, 0.0],
            n: [0.0, 0.0, 1.0],
        }
    }

    /// Frame given by the columns of a rotation matrix.
    pub fn from_rotation(r: &Matrix3<f64>) -> Self {
        let c = |i: usize| [r[(0, i)], r[(1, i)], r[(2, i)]];
        Self {
            k: c(0),
            l: c(1),
            n: c(2),
        }
    }

    /// `R = Rz(a) Ry(b) Rz(c)`.
    pub fn from_euler_zyz(a: f64, b: f64, c: f64) -> Self {
        let r = Rotation3::from_axis_angle(&Vector3::z_axis(), a)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), b)
            * Rotation3::from_axis_angle(&Vector3::z_axis(), c);
        Self::from_rotation(r.matrix())
    }

    pub fn axes(&self) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        (Vector3::from(self.k), Vector3::from(self.l), Vector3::from(self.n))
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        let (k, l, n) = self.axes();
        Matrix3::from_columns(&[k, l, n])
    }

    /// SU(2) element `V` with `V sigma_x V^† = k·sigma`, `V sigma_y V^† = l·sigma`, `V sigma_z V^† = n·sigma`.
    pub fn su2(&self) -> Matrix2<C64> {
        su2_from_rotation(&self.rotation())
    }

    /// Applies a rotation to all three axes.
    pub fn rotated(&self, r: &Matrix3<f64>) -> Frame {
        Frame::from_rotation(&(r * self.rotation()))
    }
}

/// `q = (w, x, y, z)  ->  w·1 - i (x sigma_x + y sigma_y + z sigma_z)`.
pub fn su2_from_quaternion(q: &UnitQuaternion<f64>) -> Matrix2<C64> {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    Matrix2::new(C64::new(w, -z), C64::new(-y, -x), C64::new(y, -x), C64::new(w, z))
}

/// SU(2) lift of a rotation: `V (a·sigma) V^† = (R a)·sigma`.
pub fn su2_from_rotation(r: &Matrix3<f64>) -> Matrix2<C64> {
    let rot = Rotation3::from_matrix_unchecked(*r);
    su2_from_quaternion(&UnitQuaternion::from_rotation_matrix(&rot))
}

/// Unit-determinant complex 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SL2CElement {
    pub a: [[C64; 2]; 2],
}

impl SL2CElement {
    pub fn new(m: Matrix2<C64>) -> Result<Self> {
        let det = m.determinant();
        if (det - ONE).norm() > 1e-10 {
            return param(format!("det = {det}, expected 1"));
        }
        Ok(Self::from_matrix_unchecked(m))
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix2<C64>) -> Self {
        Self {
            a: [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]],
        }
    }

    pub fn identity() -> Self {
        Self::from_matrix_unchecked(Matrix2::identity())
    }

    /// `U_1 · diag(e^{r/2}, e^{-r/2}) · U_2` for unit quaternions `U_1, U_2`.
    pub fn from_decomposition(left: &UnitQuaternion<f64>, rapidity: f64, right: &UnitQuaternion<f64>) -> Self {
        let boost = Matrix2::new(
            C64::new((rapidity / 2.0).exp(), 0.0),
            ZERO,
            ZERO,
            C64::new((-rapidity / 2.0).exp(), 0.0),
        );
        Self::from_matrix_unchecked(su2_from_quaternion(left) * boost * su2_from_quaternion(right))
    }

    pub fn from_su2(q: &UnitQuaternion<f64>) -> Self {
        Self::from_matrix_unchecked(su2_from_quaternion(q))
    }

    pub fn matrix(&self) -> Matrix2<C64> {
        Matrix2::new(self.a[0][0], self.a[0][1], self.a[1][0], self.a[1][1])
    }
}

/// Which conjugation realizes the Lorentz map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conjugation {
    /// `A^* sigma^mu A^T` (the transposed qubit).
    Star,
    /// `B sigma^mu B^†`.
    Dagger,
}

/// Proper orthochronous Lorentz matrix; `m[mu][nu] = Λ^mu_nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzMatrix {
    pub m: [[f64; 4]; 4],
}

const MINKOWSKI: [f64; 4] = [1.0, -1.0, -1.0, -1.0];

impl LorentzMatrix {
    pub fn new(m: [[f64; 4]; 4]) -> Result<Self> {
        let mat = Matrix4::from_fn(|r, c| m[r][c]);
        let scale = mat.abs().max().max(1.0);
        let eta = Matrix4::from_diagonal(&MINKOWSKI.into());
        let defect = (mat * eta * mat.transpose() - eta).abs().max();
        if defect > 1e-9 * scale * scale {
            return param(format!(
                "matrix does not preserve the Minkowski form (defect {defect:e})"
            ));
        }
        if m[0][0] < 1.0 - 1e-9 {
            return param("matrix is not orthochronous");
        }
        let det = mat.determinant();
        if (det - 1.0).abs() > 1e-9 * scale.powi(4) {
            return param(format!("determinant {det} differs from 1"));
        }
        Ok(Self { m })
    }

    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self { m }
    }

    /// True when the time row and column are `(1, 0, 0, 0)` within `tol`.
    pub fn is_rotation(&self, tol: f64) -> bool {
        (self.m[0][0] - 1.0).abs() <= tol && (1..4).all(|i| self.m[0][i].abs() <= tol && self.m[i][0].abs() <= tol)
    }
}

/// Lorentz matrix induced by an SL(2,C) element acting on the Pauli basis.
pub fn lorentz_from_sl2c(a: &SL2CElement, convention: Conjugation) -> Result<LorentzMatrix> {
    let am = a.matrix();
    if (am.determinant() - ONE).norm() > 1e-10 {
        return param("SL(2,C) element does not have unit determinant");
    }
    let paulis: Vec<Matrix2<C64>> = (0..4).map(pauli).collect();
    let mut m = [[0.0; 4]; 4];
    for mu in 0..4 {
        let conj = match convention {
            Conjugation::Star => am.conjugate() * paulis[mu] * am.transpose(),
            Conjugation::Dagger => am * paulis[mu] * am.adjoint(),
        };
        for nu in 0..4 {
            m[mu][nu] = 0.5 * (paulis[nu] * conj).trace().re;
        }
    }
    LorentzMatrix::new(m)
}

/// Family of 3-qubit vectors whose partially transposed projector forms the witness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Ghz,
    W,
}

/// How a `KTensor` was assembled from its Lorentz arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KSymmetrization {
    /// `K(Λ, L, L)` as written.
    Single,
    /// `[K(Λ,L,L) + K(L,Λ,L) + K(L,L,Λ)] / 3`, for states that are not permutation symmetric.
    CyclicAverage,
}

/// Coefficients `c_{mu nu rho}` with `K_{abc}(X,Y,Z) = c_{mu nu rho} X^mu_a Y^nu_b Z^rho_c`.
/// Round brackets in the source expressions are expanded as the average over
/// both orderings, so `2 X^3 Y^0_(b Y^3_c)` contributes `(3,0,3)` and `(3,3,0)` with weight 1.
fn family_coefficients(family: Family) -> &'static [(usize, usize, usize, f64)] {
    const GHZ: [(usize, usize, usize, f64); 8] = [
        (0, 0, 0, 1.0),
        (0, 3, 3, 1.0),
        (1, 1, 1, 1.0),
        (3, 0, 3, 1.0),
        (3, 3, 0, 1.0),
        (1, 2, 2, -1.0),
        (2, 1, 2, 1.0),
        (2, 2, 1, 1.0),
    ];
    const T: f64 = 1.0 / 3.0;
    const W: [(usize, usize, usize, f64); 20] = [
        (0, 0, 0, 3.0 * T),
        (3, 3, 3, -3.0 * T),
        (0, 0, 3, T),
        (0, 3, 0, T),
        (3, 0, 0, T),
        (0, 3, 3, -T),
        (3, 0, 3, -T),
        (3, 3, 0, -T),
        (1, 0, 1, 2.0 * T),
        (1, 1, 0, 2.0 * T),
        (1, 1, 3, 2.0 * T),
        (1, 3, 1, 2.0 * T),
        (2, 0, 2, -2.0 * T),
        (2, 2, 0, -2.0 * T),
        (2, 2, 3, -2.0 * T),
        (2, 3, 2, -2.0 * T),
        // the x x / y y pairings on the last two slots
        (0, 1, 1, 2.0 * T),
        (0, 2, 2, 2.0 * T),
        (3, 1, 1, 2.0 * T),
        (3, 2, 2, 2.0 * T),
    ];
    match family {
        Family::Ghz => &GHZ,
        Family::W => &W,
    }
}

/// Real 4×4×4 tensor entering the tripartite criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KTensor {
    pub k: [[[f64; 4]; 4]; 4],
    pub family: Family,
    pub symmetrization: KSymmetrization,
}

fn contract(family: Family, x: &LorentzMatrix, y: &LorentzMatrix, z: &LorentzMatrix) -> [[[f64; 4]; 4]; 4] {
    let mut k = [[[0.0; 4]; 4]; 4];
    for &(mu, nu, rho, c) in family_coefficients(family) {
        let (xr, yr, zr) = (&x.m[mu], &y.m[nu], &z.m[rho]);
        for a in 0..4 {
            let ca = c * xr[a];
            if ca == 0.0 {
                continue;
            }
            for b in 0..4 {
                let cab = ca * yr[b];
                for g in 0..4 {
                    k[a][b][g] += cab * zr[g];
                }
            }
        }
    }
    k
}

fn check_second(family: Family, second: &LorentzMatrix) -> Result<()> {
    if family == Family::W && !second.is_rotation(1e-9) {
        return param("the W family requires a pure rotation as second argument");
    }
    Ok(())
}

/// `K(Λ, L, L)` for the GHZ family or `K(Λ, R, R)` for the W family.
pub fn k_tensor(family: Family, first: &LorentzMatrix, second: &LorentzMatrix) -> Result<KTensor> {
    check_second(family, second)?;
    Ok(KTensor {
        k: contract(family, first, second, second),
        family,
        symmetrization: KSymmetrization::Single,
    })
}

/// `[K(Λ,L,L) + K(L,Λ,L) + K(L,L,Λ)] / 3`.
pub fn k_tensor_cyclic_average(family: Family, first: &LorentzMatrix, second: &LorentzMatrix) -> Result<KTensor> {
    check_second(family, second)?;
    let parts = [
        contract(family, first, second, second),
        contract(family, second, first, second),
        contract(family, second, second, first),
    ];
    let mut k = [[[0.0; 4]; 4]; 4];
    for p in &parts {
        for a in 0..4 {
            for b in 0..4 {
                for g in 0..4 {
                    k[a][b][g] += p[a][b][g] / 3.0;
                }
            }
        }
    }
    Ok(KTensor {
        k,
        family,
        symmetrization: KSymmetrization::CyclicAverage,
    })
}

impl KTensor {
    /// Convenience: `Λ` from `first` (star convention), `L`/`R` from `second` (dagger convention).
    pub fn from_sl2c(family: Family, first: &SL2CElement, second: &SL2CElement) -> Result<KTensor> {
        let lam = lorentz_from_sl2c(first, Conjugation::Star)?;
        let l = lorentz_from_sl2c(second, Conjugation::Dagger)?;
        k_tensor(family, &lam, &l)
    }

    /// `(1/8) K_{abc} sigma^a ⊗ sigma^b ⊗ sigma^c` as an 8×8 matrix.
    pub fn pauli_operator(&self) -> CMatrix {
        let p: Vec<CMatrix> = (0..4)
            .map(|mu| CMatrix::from_iterator(2, 2, pauli(mu).iter().cloned()))
            .collect();
        let mut out = CMatrix::zeros(8, 8);
        for a in 0..4 {
            for b in 0..4 {
                for g in 0..4 {
                    let c = self.k[a][b][g];
                    if c != 0.0 {
                        out += kron(&kron(&p[a], &p[b]), &p[g]).scale(c / 8.0);
                    }
                }
            }
        }
        out
    }

    /// `K_000`, the trace of the associated operator (the squared norm of the generating vector).
    pub fn trace_weight(&self) -> f64 {
        self.k[0][0][0]
    }
}

/// Partially transposed projector `(|psi><psi|)^{T_1}` with `psi = A⊗B⊗B|GHZ>` or `A⊗U⊗U|W>`.
/// Built directly from 8×8 matrices, independent of the `K` contraction.
pub fn family_operator(family: Family, first: &SL2CElement, second: &SL2CElement) -> CMatrix {
    let base = match family {
        Family::Ghz => build_named_state(&NamedState::Ghz, 3),
        Family::W => build_named_state(&NamedState::W, 3),
    }
    .expect("3-qubit family states are valid");
    let to_dense = |m: Matrix2<C64>| CMatrix::from_iterator(2, 2, m.iter().cloned());
    let a = to_dense(first.matrix());
    let b = to_dense(second.matrix());
    let op = kron(&kron(&a, &b), &b);
    let psi = op * base.amplitudes();
    let proj = &psi * psi.adjoint();
    partial_transpose_matrix(&proj, 3, 0).expect("3-qubit projector")
}

/// Whether the caller supplied a plain or cyclically averaged `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripartiteMode {
    Symmetric,
    General,
}

/// Fully symmetrized moment form
/// `Q^{abc} = Sym_{abc} { 2<J^a J^b J^c> - 3 f^{ab}_mu <J^(c J^mu)> + f^{ab}_mu f^{(c mu)}_nu <J^nu> }`,
/// so the tripartite margin is `K_{abc} Q^{abc}`.
pub fn tripartite_form(m: &MomentTensors) -> [[[f64; 4]; 4]; 4] {
    let f = StructureConstants::new().f;
    let mut raw = [[[ZERO; 4]; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                let mut v = m.m3[a][b][c] * 2.0;
                for mu in 0..4 {
                    let fab = f[a][b][mu];
                    if fab == ZERO {
                        continue;
                    }
                    v -= fab * (m.m2[c][mu] + m.m2[mu][c]) * 1.5;
                    for nu in 0..4 {
                        v += fab * (f[c][mu][nu] + f[mu][c][nu]) * (0.5 * m.m1[nu]);
                    }
                }
                raw[a][b][c] = v;
            }
        }
    }
    let mut q = [[[0.0; 4]; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                let s = raw[a][b][c] + raw[a][c][b] + raw[b][a][c] + raw[b][c][a] + raw[c][a][b] + raw[c][b][a];
                q[a][b][c] = s.re / 6.0;
            }
        }
    }
    q
}

fn contract_form(k: &KTensor, q: &[[[f64; 4]; 4]; 4]) -> f64 {
    let mut acc = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                acc += k.k[a][b][c] * q[a][b][c];
            }
        }
    }
    acc
}

fn check_mode(k: &KTensor, mode: TripartiteMode) -> Result<()> {
    if mode == TripartiteMode::General && k.symmetrization != KSymmetrization::CyclicAverage {
        return param("general mode expects the cyclically averaged K tensor");
    }
    Ok(())
}

pub fn tripartite_margin_from_moments(m: &MomentTensors, k: &KTensor, mode: TripartiteMode) -> Result<f64> {
    check_mode(k, mode)?;
    Ok(contract_form(k, &tripartite_form(m)))
}

/// Tripartite margin `K_(abc){...}`; for `N = 3` symmetric states it equals
/// `12 · tr(rho · (1/8) K sigma sigma sigma)`.
pub fn tripartite_margin(rho: &DensityMatrix, k: &KTensor, mode: TripartiteMode) -> Result<f64> {
    let m = moments_of(rho)?;
    tripartite_margin_from_moments(&m, k, mode)
}

/// Tripartite margin divided by `K_000`: the same sign, but invariant under
/// rescaling the generating vector, which keeps boosted parameters comparable.
pub fn tripartite_normalized_margin(m: &MomentTensors, k: &KTensor, mode: TripartiteMode) -> Result<f64> {
    check_mode(k, mode)?;
    tripartite_normalized_from_form(&tripartite_form(m), k)
}

/// Normalized margin from a precomputed [`tripartite_form`].
pub fn tripartite_normalized_from_form(q: &[[[f64; 4]; 4]; 4], k: &KTensor) -> Result<f64> {
    let w = k.trace_weight();
    if w <= 0.0 {
        return Err(Error::Numerical(format!("K_000 = {w} is not positive")));
    }
    Ok(contract_form(k, q) / w)
}

pub(crate) fn moments_of(rho: &DensityMatrix) -> Result<MomentTensors> {
    let s = collective_spin(rho.n_qubits())?;
    moments(rho, &s)
}

/// Spin squeezing parameter `ξ² = 4 min_{n ⊥ <J>} Var(J_n) / N` and its minimizing direction.
pub fn xi_squared_from_moments(m: &MomentTensors) -> Result<(f64, Direction)> {
    let mean = m.mean_spin();
    let len = mean.norm();
    if len < 1e-9 {
        return Err(Error::UndefinedMeanSpin(len));
    }
    let u = mean / len;
    let helper = if u.x.abs() <= u.y.abs() && u.x.abs() <= u.z.abs() {
        Vector3::x()
    } else if u.y.abs() <= u.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let e1 = u.cross(&helper).normalize();
    let e2 = u.cross(&e1);
    let cov = m.covariance();
    let q = |a: &Vector3<f64>, b: &Vector3<f64>| (a.transpose() * cov * b)[0];
    let (p, r, s) = (q(&e1, &e1), q(&e1, &e2), q(&e2, &e2));
    // smallest eigenpair of [[p, r], [r, s]]
    let mid = 0.5 * (p + s);
    let rad = (0.25 * (p - s) * (p - s) + r * r).sqrt();
    let lambda = mid - rad;
    let angle = 0.5 * (2.0 * r).atan2(p - s) + std::f64::consts::FRAC_PI_2;
    let n = (e1 * angle.cos() + e2 * angle.sin()).normalize();
    let nf = m.n_qubits as f64;
    Ok((4.0 * lambda / nf, Direction::new(n)?))
}

pub fn xi_squared(rho: &DensityMatrix) -> Result<(f64, Direction)> {
    xi_squared_from_moments(&moments_of(rho)?)
}

/// `<J_n>` and `<J_n^2>`.
fn projected(m: &MomentTensors, n: &Direction) -> (f64, f64) {
    let v = n.vector();
    (m.first(&v), m.second(&v, &v).re)
}

/// `<J_n^2> + N(N-2)/4 - sqrt((N^2/4 - <J_n^2>)^2 + (N-1)^2 <J_n>^2)`.
pub fn bipartite_margin_from_moments(m: &MomentTensors, n: &Direction) -> f64 {
    let nf = m.n_qubits as f64;
    let (j1, j2) = projected(m, n);
    let a = nf * nf / 4.0 - j2;
    let b = (nf - 1.0) * j1;
    j2 + nf * (nf - 2.0) / 4.0 - (a * a + b * b).sqrt()
}

pub fn bipartite_margin(rho: &DensityMatrix, n: &Direction) -> Result<f64> {
    Ok(bipartite_margin_from_moments(&moments_of(rho)?, n))
}

/// `sin α (N^2/4 - <J_n^2>) - (N-1) cos α <J_n> + <J_n^2> + N(N-2)/4`.
pub fn bipartite_raw_from_moments(m: &MomentTensors, n: &Direction, alpha: f64) -> Result<f64> {
    if !(-std::f64::consts::PI..=std::f64::consts::PI).contains(&alpha) {
        return param("alpha must lie in [-pi, pi]");
    }
    let nf = m.n_qubits as f64;
    let (j1, j2) = projected(m, n);
    Ok(alpha.sin() * (nf * nf / 4.0 - j2) - (nf - 1.0) * alpha.cos() * j1 + j2 + nf * (nf - 2.0) / 4.0)
}

pub fn bipartite_raw(rho: &DensityMatrix, n: &Direction, alpha: f64) -> Result<f64> {
    bipartite_raw_from_moments(&moments_of(rho)?, n, alpha)
}

/// Minimizer of [`bipartite_raw_from_moments`] over `α ∈ [-π, π]`.
pub fn bipartite_alpha_star(m: &MomentTensors, n: &Direction) -> f64 {
    let nf = m.n_qubits as f64;
    let (j1, j2) = projected(m, n);
    let sin_coeff = nf * nf / 4.0 - j2;
    let cos_coeff = -(nf - 1.0) * j1;
    if sin_coeff == 0.0 && cos_coeff == 0.0 {
        return 0.0;
    }
    (-sin_coeff).atan2(-cos_coeff)
}

/// Both sides of `4 Var(J_n)/N < 1 - 4 <J_n>^2 / N^2`.
pub fn bipartite_normalized(m: &MomentTensors, n: &Direction) -> (f64, f64) {
    let nf = m.n_qubits as f64;
    let (j1, j2) = projected(m, n);
    (4.0 * (j2 - j1 * j1) / nf, 1.0 - 4.0 * j1 * j1 / (nf * nf))
}

/// The three printed 3-qubit witnesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// `3/4 - |GHZ><GHZ|`
    Ghz,
    /// `2/3 - |W><W|`
    W1,
    /// `1/2 - |GHZ><GHZ|`
    W2,
}

/// Witness with its GHZ / W vector expressed in the frame `(k, l, n)`.
pub fn witness_matrix(kind: WitnessKind, frame: &Frame) -> CMatrix {
    let (shift, family) = match kind {
        WitnessKind::Ghz => (0.75, NamedState::Ghz),
        WitnessKind::W1 => (2.0 / 3.0, NamedState::W),
        WitnessKind::W2 => (0.5, NamedState::Ghz),
    };
    let v = build_named_state(&family, 3).expect("3-qubit named state");
    let u = tensor_power(&frame.su2(), 3);
    let psi = u * v.amplitudes();
    CMatrix::identity(8, 8).scale(shift) - &psi * psi.adjoint()
}

/// Witness-based inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SsKind {
    Ss1,
    Ss2,
    Ss3,
    Ss1p,
    Ss2p,
}

impl SsKind {
    pub const ALL: [SsKind; 5] = [SsKind::Ss1, SsKind::Ss2, SsKind::Ss3, SsKind::Ss1p, SsKind::Ss2p];

    /// Witness whose summed per-triple average the inequality reproduces, with
    /// the positive constant `c` such that `ss_value = c · sum_{a<b<c} tr(rho_abc W)`.
    pub fn witness(&self) -> Option<(WitnessKind, f64)> {
        match self {
            SsKind::Ss1 => Some((WitnessKind::Ghz, 2.0)),
            SsKind::Ss2 => Some((WitnessKind::W1, 6.0)),
            SsKind::Ss3 => Some((WitnessKind::W2, 2.0)),
            SsKind::Ss1p | SsKind::Ss2p => None,
        }
    }
}

/// Exact rational constant terms, `(numerator, denominator)`.
pub fn ss_constant(kind: SsKind, n_qubits: usize) -> (i64, i64) {
    let n = n_qubits as i64;
    match kind {
        SsKind::Ss1 => (n * (n - 2) * (5 * n - 2), 24),
        SsKind::Ss2 => (n * (n - 2) * (13 * n - 4), 24),
        SsKind::Ss3 => (n * n * (n - 2), 8),
        SsKind::Ss1p => (5 * n * (n - 1) * (n - 2), 24),
        SsKind::Ss2p => (n * (n - 1) * (n - 2), 8),
    }
}

fn rational((num, den): (i64, i64)) -> f64 {
    num as f64 / den as f64
}

/// Checks the zero-mean and variance-floor side conditions of `ss1p` / `ss2p`.
pub fn ss_primed_admissible(m: &MomentTensors, frame: &Frame) -> Result<()> {
    let nf = m.n_qubits as f64;
    let (k, _, n) = frame.axes();
    let (jk, jn) = (m.first(&k), m.first(&n));
    if jk.abs() > PRECONDITION_TOL || jn.abs() > PRECONDITION_TOL {
        return Err(Error::Precondition(format!(
            "<J_k> = {jk:e}, <J_n> = {jn:e}; both must vanish"
        )));
    }
    let (vk, vn) = (m.second(&k, &k).re, m.second(&n, &n).re);
    if vk < nf / 4.0 - PRECONDITION_TOL || vn < nf / 4.0 - PRECONDITION_TOL {
        return Err(Error::Precondition(format!(
            "<J_k^2> = {vk}, <J_n^2> = {vn}; both must be at least N/4 = {}",
            nf / 4.0
        )));
    }
    Ok(())
}

pub fn ss_value_from_moments(m: &MomentTensors, kind: SsKind, frame: &Frame) -> Result<f64> {
    let nq = m.n_qubits;
    if nq < 3 {
        return param("witness inequalities need at least 3 qubits");
    }
    let nf = nq as f64;
    let (k, l, n) = frame.axes();
    let cubic_k = -m.third(&k, &k, &k).re / 3.0 + m.third(&l, &k, &l).re;
    let value = match kind {
        SsKind::Ss1 | SsKind::Ss3 => {
            cubic_k - (nf - 2.0) / 2.0 * m.second(&n, &n).re + m.first(&k) / 3.0 + rational(ss_constant(kind, nq))
        }
        SsKind::Ss2 => {
            let (jk2, jl2, jn2) = (m.second(&k, &k).re, m.second(&l, &l).re, m.second(&n, &n).re);
            m.third(&n, &n, &n).re
                - 2.0 * m.third(&l, &n, &l).re
                - 2.0 * m.third(&k, &n, &k).re
                - (nf - 2.0) / 2.0 * (2.0 * jk2 + 2.0 * jl2 - jn2)
                - rational((n_sq_minus(nq), 4)) * m.first(&n)
                + rational(ss_constant(kind, nq))
        }
        SsKind::Ss1p | SsKind::Ss2p => {
            ss_primed_admissible(m, frame)?;
            cubic_k + rational(ss_constant(kind, nq))
        }
    };
    Ok(value)
}

/// `N^2 - 4N + 8`.
fn n_sq_minus(n: usize) -> i64 {
    let n = n as i64;
    n * n - 4 * n + 8
}

pub fn ss_value(rho: &DensityMatrix, kind: SsKind, frame: &Frame) -> Result<f64> {
    ss_value_from_moments(&moments_of(rho)?, kind, frame)
}

/// Criterion identifiers as used on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionId {
    Xi2,
    Bipartite,
    TripartiteGhz,
    TripartiteW,
    Ss1,
    Ss2,
    Ss3,
    Ss1p,
    Ss2p,
}

impl CriterionId {
    pub fn ss_kind(&self) -> Option<SsKind> {
        match self {
            CriterionId::Ss1 => Some(SsKind::Ss1),
            CriterionId::Ss2 => Some(SsKind::Ss2),
            CriterionId::Ss3 => Some(SsKind::Ss3),
            CriterionId::Ss1p => Some(SsKind::Ss1p),
            CriterionId::Ss2p => Some(SsKind::Ss2p),
            _ => None,
        }
    }

    pub fn family(&self) -> Option<Family> {
        match self {
            CriterionId::TripartiteGhz => Some(Family::Ghz),
            CriterionId::TripartiteW => Some(Family::W),
            _ => None,
        }
    }

    /// Size of the reductions whose entanglement the criterion certifies.
    pub fn party_count(&self) -> usize {
        match self {
            CriterionId::Xi2 | CriterionId::Bipartite => 2,
            _ => 3,
        }
    }
}

impl fmt::Display for CriterionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        f.write_str(&s)
    }
}

impl std::str::FromStr for CriterionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| Error::Parameter(format!("unknown criterion {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Entangled,
    NotDetected,
    Boundary,
}

impl Verdict {
    pub fn from_margin(margin: f64, tolerance: f64) -> Self {
        if margin < -tolerance {
            Verdict::Entangled
        } else if margin.abs() <= tolerance {
            Verdict::Boundary
        } else {
            Verdict::NotDetected
        }
    }
}

/// Parameters at which a criterion attained its reported margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum CriterionParams {
    Direction(Direction),
    Frame(Frame),
    Lorentz { first: SL2CElement, second: SL2CElement },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: CriterionId,
    pub margin: f64,
    pub params: Option<CriterionParams>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub xi_squared: Option<f64>,
}

impl CriterionReport {
    pub fn new(criterion: CriterionId, margin: f64, params: Option<CriterionParams>, tolerance: f64) -> Self {
        Self {
            criterion,
            margin,
            params,
            verdict: Verdict::from_margin(margin, tolerance),
            xi_squared: None,
        }
    }

    /// ξ² reported as the margin `ξ² - 1`.
    pub fn squeezing(xi2: f64, n: Direction, tolerance: f64) -> Self {
        let mut r = Self::new(
            CriterionId::Xi2,
            xi2 - 1.0,
            Some(CriterionParams::Direction(n)),
            tolerance,
        );
        r.xi_squared = Some(xi2);
        r
    }
}

/// `exp(-i chi (J^3)^2)` applied to `|pi/2, 0>^{⊗N}`, the one-axis-twisted state.
pub fn one_axis_twisted(n_qubits: usize, chi: f64) -> Result<crate::qcore::PureState> {
    let start = build_named_state(
        &NamedState::Coherent {
            theta: std::f64::consts::FRAC_PI_2,
            phi: 0.0,
        },
        n_qubits,
    )?;
    let half = n_qubits as f64 / 2.0;
    let amps = start
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(idx, a)| {
            let jz = half - idx.count_ones() as f64;
            a * C64::from_polar(1.0, -chi * jz * jz)
        })
        .collect::<Vec<_>>();
    crate::qcore::PureState::normalized(n_qubits, crate::qcore::CVector::from_vec(amps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{expectation, trace_product, DickeCoefficients};
    use crate::spinops::{moments_dicke, moments_pure};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn ghz3() -> DensityMatrix {
        build_named_state(&NamedState::Ghz, 3).unwrap().density()
    }

    fn w3() -> DensityMatrix {
        build_named_state(&NamedState::W, 3).unwrap().density()
    }

    fn bell() -> DensityMatrix {
        DickeCoefficients::basis_state(2, 1).unwrap().to_density()
    }

    #[test]
    fn xi_squared_of_coherent_state_is_one() {
        let psi = build_named_state(&NamedState::Coherent { theta: 1.3, phi: 2.0 }, 5).unwrap();
        let (xi2, n) = xi_squared(&psi.density()).unwrap();
        assert!((xi2 - 1.0).abs() < 1e-12);
        let bloch = Direction::from_angles(1.3, 2.0).vector();
        assert!(n.vector().dot(&bloch).abs() < 1e-10);
    }

    #[test]
    fn xi_squared_of_twisted_state_below_one() {
        let psi = one_axis_twisted(4, 0.2).unwrap();
        let (xi2, _) = xi_squared(&psi.density()).unwrap();
        assert!(xi2 < 1.0, "xi2 = {xi2}");
    }

    #[test]
    fn twisting_the_north_pole_does_nothing() {
        // |0000> is a J_z eigenstate, so exp(-i chi J_z^2) leaves it coherent
        let start = build_named_state(&NamedState::Coherent { theta: 0.0, phi: 0.0 }, 4).unwrap();
        let (xi2, _) = xi_squared(&start.density()).unwrap();
        assert!((xi2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn xi_squared_needs_mean_spin() {
        let mm = DensityMatrix::maximally_mixed(3).unwrap();
        assert!(matches!(xi_squared(&mm), Err(Error::UndefinedMeanSpin(_))));
    }

    #[test]
    fn bipartite_examples() {
        let z = Direction::new(Vector3::z()).unwrap();
        assert!((bipartite_margin(&bell(), &z).unwrap() + 1.0).abs() < 1e-12);
        assert!((bipartite_margin(&ghz3(), &z).unwrap() - 3.0).abs() < 1e-12);
        let zero = build_named_state(&NamedState::Computational("00".into()), 2)
            .unwrap()
            .density();
        for i in 0..20 {
            let n = Direction::from_angles(0.17 * i as f64, 0.31 * i as f64);
            assert!(bipartite_margin(&zero, &n).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn bipartite_raw_examples() {
        let z = Direction::new(Vector3::z()).unwrap();
        assert!((bipartite_raw(&bell(), &z, FRAC_PI_2).unwrap() - 1.0).abs() < 1e-12);
        let zero = build_named_state(&NamedState::Computational("00".into()), 2)
            .unwrap()
            .density();
        assert!(bipartite_raw(&zero, &z, 0.0).unwrap().abs() < 1e-12);
        assert!(bipartite_raw(&zero, &z, 3.5).is_err());
    }

    #[test]
    fn alpha_star_attains_the_closed_form() {
        let psi = one_axis_twisted(5, 0.3).unwrap();
        let m = moments_pure(&psi, &collective_spin(5).unwrap()).unwrap();
        for i in 0..10 {
            let n = Direction::from_angles(0.3 * i as f64, 1.1 * i as f64);
            let a = bipartite_alpha_star(&m, &n);
            let raw = bipartite_raw_from_moments(&m, &n, a).unwrap();
            assert!((raw - bipartite_margin_from_moments(&m, &n)).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_form_agrees_in_sign() {
        let psi = one_axis_twisted(4, 0.2).unwrap();
        let m = moments_pure(&psi, &collective_spin(4).unwrap()).unwrap();
        for i in 0..30 {
            let n = Direction::from_angles(0.1 * i as f64, 0.7 * i as f64);
            let (lhs, rhs) = bipartite_normalized(&m, &n);
            let margin = bipartite_margin_from_moments(&m, &n);
            if margin.abs() > 1e-9 {
                assert_eq!(margin < 0.0, lhs < rhs, "i={i}");
            }
        }
    }

    #[test]
    fn lorentz_examples() {
        let id = lorentz_from_sl2c(&SL2CElement::identity(), Conjugation::Star).unwrap();
        assert_eq!(id, LorentzMatrix::identity());
        let r: f64 = 0.8;
        let boost = SL2CElement::new(Matrix2::new(
            C64::new((r / 2.0).exp(), 0.0),
            ZERO,
            ZERO,
            C64::new((-r / 2.0).exp(), 0.0),
        ))
        .unwrap();
        let l = lorentz_from_sl2c(&boost, Conjugation::Dagger).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(l.m[0][0], r.cosh()) && close(l.m[3][3], r.cosh()));
        assert!(close(l.m[0][3], r.sinh()) && close(l.m[3][0], r.sinh()));
        assert!(close(l.m[1][1], 1.0) && close(l.m[2][2], 1.0));
        let theta: f64 = 0.7;
        let u = SL2CElement::new(Matrix2::new(
            C64::from_polar(1.0, -theta / 2.0),
            ZERO,
            ZERO,
            C64::from_polar(1.0, theta / 2.0),
        ))
        .unwrap();
        let rot = lorentz_from_sl2c(&u, Conjugation::Dagger).unwrap();
        assert!(rot.is_rotation(1e-12));
        // U sigma^1 U^† = cos θ sigma^1 + sin θ sigma^2
        assert!(close(rot.m[1][1], theta.cos()) && close(rot.m[1][2], theta.sin()));
        assert!(close(rot.m[2][1], -theta.sin()) && close(rot.m[3][3], 1.0));
        let bad = SL2CElement {
            a: [[C64::new(2.0, 0.0), ZERO], [ZERO, ONE]],
        };
        assert!(lorentz_from_sl2c(&bad, Conjugation::Star).is_err());
        assert!(SL2CElement::new(bad.matrix()).is_err());
    }

    #[test]
    fn ghz_k_tensor_at_identity() {
        let id = LorentzMatrix::identity();
        let k = k_tensor(Family::Ghz, &id, &id).unwrap();
        let want = [
            ((0, 0, 0), 1.0),
            ((0, 3, 3), 1.0),
            ((1, 1, 1), 1.0),
            ((1, 2, 2), -1.0),
            ((2, 1, 2), 1.0),
            ((2, 2, 1), 1.0),
            ((3, 0, 3), 1.0),
            ((3, 3, 0), 1.0),
        ];
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    let expected = want.iter().find(|(idx, _)| *idx == (a, b, c)).map_or(0.0, |(_, v)| *v);
                    assert_eq!(k.k[a][b][c], expected, "({a},{b},{c})");
                }
            }
        }
        let direct = family_operator(Family::Ghz, &SL2CElement::identity(), &SL2CElement::identity());
        assert!((k.pauli_operator() - direct).norm() < 1e-12);
    }

    #[test]
    fn w_k_tensor_at_identity_matches_transposed_projector() {
        let id = LorentzMatrix::identity();
        let k = k_tensor(Family::W, &id, &id).unwrap();
        let pt = partial_transpose_matrix(w3().entries(), 3, 0).unwrap();
        assert!((k.pauli_operator() - pt).camax() < 1e-12);
    }

    #[test]
    fn w_family_rejects_boosted_second_argument() {
        let boost = SL2CElement::from_decomposition(&UnitQuaternion::identity(), 0.5, &UnitQuaternion::identity());
        let l = lorentz_from_sl2c(&boost, Conjugation::Dagger).unwrap();
        assert!(k_tensor(Family::W, &LorentzMatrix::identity(), &l).is_err());
        assert!(k_tensor(Family::Ghz, &LorentzMatrix::identity(), &l).is_ok());
    }

    #[test]
    fn boosted_k_tensors_match_direct_operators() {
        let q = |w: f64, x: f64, y: f64, z: f64| UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z));
        let a = SL2CElement::from_decomposition(&q(0.3, -0.5, 0.8, 0.1), 1.3, &q(-0.2, 0.4, 0.4, 0.7));
        let b = SL2CElement::from_decomposition(&q(0.9, 0.1, -0.3, 0.2), 0.6, &q(0.1, 0.2, 0.3, 0.4));
        let u = SL2CElement::from_su2(&q(0.5, 0.5, -0.1, 0.3));
        let k = KTensor::from_sl2c(Family::Ghz, &a, &b).unwrap();
        assert!((k.pauli_operator() - family_operator(Family::Ghz, &a, &b)).camax() < 1e-11);
        let k = KTensor::from_sl2c(Family::W, &a, &u).unwrap();
        assert!((k.pauli_operator() - family_operator(Family::W, &a, &u)).camax() < 1e-11);
        assert!((k.trace_weight() - family_operator(Family::W, &a, &u).trace().re).abs() < 1e-11);
    }

    #[test]
    fn identity_parameters_do_not_witness_their_own_state() {
        // tr(P P^{T1}) is the purity of the one-qubit reduction for real states
        let id = LorentzMatrix::identity();
        let kg = k_tensor(Family::Ghz, &id, &id).unwrap();
        let kw = k_tensor(Family::W, &id, &id).unwrap();
        let g = tripartite_margin(&ghz3(), &kg, TripartiteMode::Symmetric).unwrap();
        let w = tripartite_margin(&w3(), &kw, TripartiteMode::Symmetric).unwrap();
        assert!((g - 12.0 * 0.5).abs() < 1e-12);
        assert!((w - 12.0 * 5.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn negative_eigenvector_parameters_detect_ghz() {
        // (|100> - |011>)/sqrt2 = (-i sigma_y ⊗ 1 ⊗ 1)|GHZ>
        let a = SL2CElement::new(Matrix2::new(ZERO, -ONE, ONE, ZERO)).unwrap();
        let k = KTensor::from_sl2c(Family::Ghz, &a, &SL2CElement::identity()).unwrap();
        let margin = tripartite_margin(&ghz3(), &k, TripartiteMode::Symmetric).unwrap();
        assert!((margin + 12.0 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn tripartite_margin_is_twelve_times_direct_trace() {
        let q = |w: f64, x: f64, y: f64, z: f64| UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z));
        let a = SL2CElement::from_decomposition(&q(0.1, 0.9, -0.3, 0.2), 0.9, &q(0.6, -0.2, 0.1, 0.5));
        let b = SL2CElement::from_decomposition(&q(0.3, 0.3, 0.3, -0.8), 0.4, &q(1.0, 0.0, 0.2, 0.0));
        let mut amps = crate::qcore::CVector::zeros(4);
        for (i, x) in amps.iter_mut().enumerate() {
            *x = C64::new(0.2 + i as f64 * 0.3, (i as f64).cos());
        }
        let rho = DickeCoefficients::from_pure(3, &amps).unwrap().to_density();
        for family in [Family::Ghz, Family::W] {
            let second = if family == Family::W {
                SL2CElement::from_su2(&q(0.2, 0.7, 0.1, -0.3))
            } else {
                b
            };
            let k = KTensor::from_sl2c(family, &a, &second).unwrap();
            let margin = tripartite_margin(&rho, &k, TripartiteMode::Symmetric).unwrap();
            let direct = trace_product(rho.entries(), &family_operator(family, &a, &second)).re;
            assert!((margin - 12.0 * direct).abs() <= 1e-9 * margin.abs(), "{family:?}");
        }
    }

    #[test]
    fn general_mode_requires_cyclic_average() {
        let id = LorentzMatrix::identity();
        let single = k_tensor(Family::Ghz, &id, &id).unwrap();
        assert!(tripartite_margin(&ghz3(), &single, TripartiteMode::General).is_err());
        let avg = k_tensor_cyclic_average(Family::Ghz, &id, &id).unwrap();
        assert_eq!(avg.symmetrization, KSymmetrization::CyclicAverage);
        let general = tripartite_margin(&ghz3(), &avg, TripartiteMode::General).unwrap();
        let sym = tripartite_margin(&ghz3(), &single, TripartiteMode::Symmetric).unwrap();
        // identical arguments: the average is the tensor itself
        assert!((general - sym).abs() < 1e-12);
    }

    #[test]
    fn cyclic_average_is_sound_on_non_symmetric_products() {
        let q = |w: f64, x: f64, y: f64, z: f64| UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z));
        let a = SL2CElement::from_decomposition(&q(0.4, 0.1, -0.7, 0.2), 1.1, &q(0.3, 0.3, 0.1, 0.9));
        let b = SL2CElement::from_decomposition(&q(0.8, -0.4, 0.2, 0.1), 0.7, &q(0.2, 0.6, 0.6, 0.1));
        let lam = lorentz_from_sl2c(&a, Conjugation::Star).unwrap();
        let l = lorentz_from_sl2c(&b, Conjugation::Dagger).unwrap();
        let single = k_tensor(Family::Ghz, &lam, &l).unwrap();
        let avg = k_tensor_cyclic_average(Family::Ghz, &lam, &l).unwrap();
        assert!(single.k != avg.k);
        for bits in ["011", "101", "110"] {
            let rho = build_named_state(&NamedState::Computational(bits.into()), 3)
                .unwrap()
                .density();
            assert!(tripartite_margin(&rho, &single, TripartiteMode::Symmetric).unwrap() >= -1e-9);
            assert!(tripartite_margin(&rho, &avg, TripartiteMode::General).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn witness_values_on_their_states() {
        let c = Frame::canonical();
        let g = ghz3();
        let w = w3();
        let v = |rho: &DensityMatrix, k| expectation(rho, &witness_matrix(k, &c)).unwrap().re;
        assert!((v(&g, WitnessKind::Ghz) + 0.25).abs() < 1e-12);
        assert!((v(&w, WitnessKind::W1) + 1.0 / 3.0).abs() < 1e-12);
        assert!((v(&g, WitnessKind::W2) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn frame_su2_maps_axes() {
        let f = Frame::from_euler_zyz(0.4, 1.2, -2.1);
        let v = f.su2();
        let (k, l, n) = f.axes();
        for (i, axis) in [(1, k), (2, l), (3, n)] {
            let lhs = v * pauli(i) * v.adjoint();
            let rhs =
                pauli(1) * C64::new(axis.x, 0.0) + pauli(2) * C64::new(axis.y, 0.0) + pauli(3) * C64::new(axis.z, 0.0);
            assert!((lhs - rhs).camax() < 1e-12);
        }
    }

    #[test]
    fn frame_validation() {
        assert!(Frame::new(Vector3::x(), Vector3::y(), Vector3::z()).is_ok());
        assert!(Frame::new(Vector3::y(), Vector3::x(), Vector3::z()).is_err());
        assert!(Frame::new(Vector3::x(), Vector3::x(), Vector3::z()).is_err());
        assert!(Direction::new(Vector3::new(0.0, 2.0, 0.0)).is_err());
    }

    #[test]
    fn ss_examples() {
        let c = Frame::canonical();
        let g = ghz3();
        // ss1 = 2 tr(rho W_GHZ) = -1/2 in the canonical frame
        assert!((ss_value(&g, SsKind::Ss1, &c).unwrap() + 0.5).abs() < 1e-12);
        let zero = build_named_state(&NamedState::Computational("000".into()), 3)
            .unwrap()
            .density();
        for i in 0..50 {
            let f = Frame::from_euler_zyz(0.37 * i as f64, 0.11 * i as f64, 0.53 * i as f64);
            assert!(ss_value(&zero, SsKind::Ss1, &f).unwrap() >= -1e-12);
        }
        let mm = DensityMatrix::maximally_mixed(3).unwrap();
        // odd moments vanish, <J_n^2> = 3/4: 39/24 - 3/8 = 5/4
        assert!((ss_value(&mm, SsKind::Ss1, &c).unwrap() - 1.25).abs() < 1e-12);
        assert!(ss_value(&mm, SsKind::Ss2, &c).unwrap() > 0.0);
        assert!(ss_value(&mm, SsKind::Ss3, &c).unwrap() > 0.0);
        assert!(ss_value(&bell(), SsKind::Ss1, &c).is_err());
    }

    #[test]
    fn ss_constants_are_exact() {
        assert_eq!(ss_constant(SsKind::Ss1, 3), (39, 24));
        assert_eq!(ss_constant(SsKind::Ss2, 3), (105, 24));
        assert_eq!(ss_constant(SsKind::Ss3, 4), (32, 8));
        assert_eq!(ss_constant(SsKind::Ss2p, 5), (60, 8));
        // the primed constants drop (N-2)/2 · N/4 from ss1 and ss3
        for n in 3..10 {
            let d = |k| rational(ss_constant(k, n));
            let nf = n as f64;
            assert!((d(SsKind::Ss1) - d(SsKind::Ss1p) - nf * (nf - 2.0) / 8.0).abs() < 1e-12);
            assert!((d(SsKind::Ss3) - d(SsKind::Ss2p) - nf * (nf - 2.0) / 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ss_primed_preconditions() {
        let c = Frame::canonical();
        let zero = build_named_state(&NamedState::Computational("000".into()), 3)
            .unwrap()
            .density();
        assert!(matches!(ss_value(&zero, SsKind::Ss1p, &c), Err(Error::Precondition(_))));
        let g = ghz3();
        // GHZ: zero mean spin, <J_x^2> = <J_z^2>... J_z^2 = 9/4, J_x^2 = 3/4
        let v = ss_value(&g, SsKind::Ss1p, &c).unwrap();
        let m = moments_of(&g).unwrap();
        let expected = -m.third(&Vector3::x(), &Vector3::x(), &Vector3::x()).re / 3.0
            + m.third(&Vector3::y(), &Vector3::x(), &Vector3::y()).re
            + 5.0 * 3.0 * 2.0 / 24.0;
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn ss_matches_summed_witness_trace_for_three_qubits() {
        let f = Frame::from_euler_zyz(0.3, 2.0, 1.0);
        let mut amps = crate::qcore::CVector::zeros(8);
        for (i, x) in amps.iter_mut().enumerate() {
            *x = C64::new((i as f64 * 1.3).sin(), (i as f64 * 0.4).cos());
        }
        let rho = crate::qcore::PureState::normalized(3, amps).unwrap().density();
        for kind in [SsKind::Ss1, SsKind::Ss2, SsKind::Ss3] {
            let (w, c) = kind.witness().unwrap();
            let direct = expectation(&rho, &witness_matrix(w, &f)).unwrap().re;
            let v = ss_value(&rho, kind, &f).unwrap();
            assert!((v - c * direct).abs() < 1e-12, "{kind:?}");
        }
    }

    #[test]
    fn criteria_are_frame_covariant() {
        let r0 = Frame::from_euler_zyz(1.0, 0.5, -0.4).rotation();
        let u0 = su2_from_rotation(&r0);
        let psi = one_axis_twisted(4, 0.25).unwrap();
        let rho = psi.density();
        let rotated = psi.rotate_all(&u0).density();
        let f = Frame::from_euler_zyz(0.2, 0.9, 2.5);
        for kind in [SsKind::Ss1, SsKind::Ss2, SsKind::Ss3] {
            let a = ss_value(&rho, kind, &f).unwrap();
            let b = ss_value(&rotated, kind, &f.rotated(&r0)).unwrap();
            assert!((a - b).abs() < 1e-10, "{kind:?}");
        }
        let n = Direction::from_angles(0.8, 0.3);
        let rn = Direction::new(r0 * n.vector()).unwrap();
        let a = bipartite_margin(&rho, &n).unwrap();
        let b = bipartite_margin(&rotated, &rn).unwrap();
        assert!((a - b).abs() < 1e-10);
        let (x1, _) = xi_squared(&rho).unwrap();
        let (x2, _) = xi_squared(&rotated).unwrap();
        assert!((x1 - x2).abs() < 1e-10);
    }

    #[test]
    fn criterion_ids_round_trip_through_strings() {
        for id in [CriterionId::Xi2, CriterionId::TripartiteGhz, CriterionId::Ss2p] {
            let s = id.to_string();
            assert_eq!(s.parse::<CriterionId>().unwrap(), id);
        }
        assert_eq!(CriterionId::TripartiteW.to_string(), "tripartite-w");
        assert!("bogus".parse::<CriterionId>().is_err());
    }

    #[test]
    fn verdict_thresholds() {
        assert_eq!(Verdict::from_margin(-1e-3, DETECTION_TOL), Verdict::Entangled);
        assert_eq!(Verdict::from_margin(5e-10, DETECTION_TOL), Verdict::Boundary);
        assert_eq!(Verdict::from_margin(1e-3, DETECTION_TOL), Verdict::NotDetected);
    }

    #[test]
    fn dicke_and_full_moments_agree_for_criteria() {
        let d = DickeCoefficients::basis_state(4, 2).unwrap();
        let a = moments_dicke(&d).unwrap();
        let b = moments_of(&d.to_density()).unwrap();
        let f = Frame::from_euler_zyz(0.1, 0.2, 0.3);
        let x = ss_value_from_moments(&a, SsKind::Ss2, &f).unwrap();
        let y = ss_value_from_moments(&b, SsKind::Ss2, &f).unwrap();
        assert!((x - y).abs() < 1e-12);
        let _ = PI;
    }
}

//! P-representation of symmetric states.
//!
//! A symmetric `N`-qubit state is written as `∫ dΩ P(θ,φ) |θ,φ><θ,φ|^{⊗N}` with
//! `P = Σ_{l≤N} c_lm Y_lm`. Spherical harmonics are orthonormal with the
//! Condon-Shortley phase. Coefficients are stored in the order `l² + l + m`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::qcore::{
    coherent_dicke, coherent_qubit, CMatrix, CVector, DensityMatrix, DickeCoefficients, PureState, C64,
};

/// Residual below which a grid measure counts as reproducing the state.
pub const CERTIFICATE_TOL: f64 = 1e-8;
/// Fibonacci grid sizes tried by [`separability_certificate_escalating`].
pub const CERTIFICATE_RESOLUTIONS: [usize; 3] = [64, 256, 1024];

fn harmonic_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// `Y_lm(θ, φ)` for `0 ≤ l ≤ l_max`, all `m`, in `l² + l + m` order.
pub fn spherical_harmonics(l_max: usize, theta: f64, phi: f64) -> Vec<C64> {
    let x = theta.cos();
    let s = theta.sin();
    let mut out = vec![C64::new(0.0, 0.0); (l_max + 1) * (l_max + 1)];
    // P_m^m = (-1)^m (2m-1)!! s^m, then upward in l
    let mut pmm = 1.0;
    for m in 0..=l_max {
        if m > 0 {
            pmm *= -((2 * m - 1) as f64) * s;
        }
        let mut prev = 0.0;
        let mut cur = pmm;
        for l in m..=l_max {
            if l == m + 1 {
                prev = cur;
                cur = x * (2 * m + 1) as f64 * pmm;
            } else if l > m + 1 {
                let next = ((2 * l - 1) as f64 * x * cur - (l + m - 1) as f64 * prev) / (l - m) as f64;
                prev = cur;
                cur = next;
            }
            let ratio: f64 = ((l - m + 1)..=(l + m)).map(|k| k as f64).product();
            let norm = ((2 * l + 1) as f64 / (4.0 * PI) / ratio).sqrt();
            let y = C64::from_polar(norm * cur, m as f64 * phi);
            out[harmonic_index(l, m as i64)] = y;
            if m > 0 {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                out[harmonic_index(l, -(m as i64))] = y.conj() * sign;
            }
        }
    }
    out
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if n == 0 { 1.0 } else { p1 };
                let pn1 = if n == 0 { 0.0 } else { p0 };
                dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
                let dx = pn / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Product rule `(θ, φ, weight)` exact for harmonic content up to degree `2N`.
pub fn sphere_quadrature(n_qubits: usize) -> Vec<(f64, f64, f64)> {
    let nphi = 2 * n_qubits + 2;
    let dphi = 2.0 * PI / nphi as f64;
    gauss_legendre(n_qubits + 1)
        .into_iter()
        .flat_map(|(x, w)| (0..nphi).map(move |j| (x.acos(), j as f64 * dphi, w * dphi)))
        .collect()
}

/// Coefficients `c_lm`, `0 ≤ l ≤ N`, of the minimal-degree P function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicCoefficients {
    pub n_qubits: usize,
    pub c: Vec<C64>,
}

impl HarmonicCoefficients {
    pub fn new(n_qubits: usize, c: Vec<C64>) -> Result<Self> {
        let len = (n_qubits + 1) * (n_qubits + 1);
        if c.len() != len {
            return Err(Error::Dimension {
                expected: len,
                found: c.len(),
            });
        }
        for l in 0..=n_qubits {
            for m in 1..=l as i64 {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let defect = (c[harmonic_index(l, -m)] - c[harmonic_index(l, m)].conj() * sign).norm();
                if defect > 1e-10 {
                    return param(format!("c_({l},{m}) violates the real-function condition"));
                }
            }
        }
        let c00 = 1.0 / (4.0 * PI).sqrt();
        if (c[0] - C64::new(c00, 0.0)).norm() > 1e-10 {
            return param("c_00 must equal 1/sqrt(4 pi)");
        }
        Ok(Self { n_qubits, c })
    }

    pub fn get(&self, l: usize, m: i64) -> C64 {
        self.c[harmonic_index(l, m)]
    }

    /// `P(θ, φ)`.
    pub fn value(&self, theta: f64, phi: f64) -> f64 {
        spherical_harmonics(self.n_qubits, theta, phi)
            .iter()
            .zip(&self.c)
            .map(|(y, c)| (y * c).re)
            .sum()
    }
}

fn projector(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

/// Expands a symmetric state; fails with a representation error off the symmetric subspace.
pub fn p_expand(rho: &DensityMatrix) -> Result<HarmonicCoefficients> {
    p_expand_dicke(&DickeCoefficients::from_density(rho)?)
}

pub fn p_expand_dicke(d: &DickeCoefficients) -> Result<HarmonicCoefficients> {
    let n = d.n_qubits();
    let dim = n + 1;
    let unknowns = dim * dim;
    // column lm holds vec(∫ Y_lm |Ω><Ω|^{⊗N} dΩ)
    let mut system = DMatrix::<C64>::zeros(unknowns, unknowns);
    for (theta, phi, w) in sphere_quadrature(n) {
        let y = spherical_harmonics(n, theta, phi);
        let proj = projector(&coherent_dicke(n, theta, phi));
        for (col, ylm) in y.iter().enumerate() {
            let f = ylm * w;
            for (row, p) in proj.iter().enumerate() {
                system[(row, col)] += p * f;
            }
        }
    }
    let rhs = DVector::from_iterator(unknowns, d.matrix().iter().copied());
    let c = system
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("harmonic moment system is singular".into()))?;
    let residual = (&system * &c - &rhs).camax();
    if residual > 1e-9 {
        return Err(Error::Numerical(format!("harmonic solve residual {residual:e}")));
    }
    let mut c: Vec<C64> = c.iter().copied().collect();
    // enforce the real-function condition exactly
    for l in 0..=n {
        c[harmonic_index(l, 0)].im = 0.0;
        for m in 1..=l as i64 {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let avg = (c[harmonic_index(l, m)] + c[harmonic_index(l, -m)].conj() * sign) * 0.5;
            c[harmonic_index(l, m)] = avg;
            c[harmonic_index(l, -m)] = avg.conj() * sign;
        }
    }
    HarmonicCoefficients::new(n, c)
}

/// `∫ dΩ P(Ω) |Ω><Ω|^{⊗N}` in the Dicke basis.
pub fn p_reconstruct_dicke(c: &HarmonicCoefficients) -> CMatrix {
    let n = c.n_qubits;
    let nodes = sphere_quadrature(n);
    let parts: Vec<CMatrix> = nodes
        .par_iter()
        .map(|&(theta, phi, w)| projector(&coherent_dicke(n, theta, phi)).scale(w * c.value(theta, phi)))
        .collect();
    let sum = parts.into_iter().fold(CMatrix::zeros(n + 1, n + 1), |acc, x| acc + x);
    (&sum + sum.adjoint()).scale(0.5)
}

/// Reconstruction as a full density matrix; fails if the coefficients do not describe a state.
pub fn p_reconstruct(c: &HarmonicCoefficients) -> Result<DensityMatrix> {
    Ok(DickeCoefficients::new(c.n_qubits, p_reconstruct_dicke(c))?.to_density())
}

fn qubits_of(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::Dimension {
            expected: dim.next_power_of_two().max(2),
            found: dim,
        });
    }
    Ok(dim.trailing_zeros() as usize)
}

/// `w(θ,φ) = <θ,φ|^{⊗N} W |θ,φ>^{⊗N}` at each grid point.
pub fn witness_polynomial(w: &CMatrix, grid: &[(f64, f64)]) -> Result<Vec<f64>> {
    if w.nrows() != w.ncols() {
        return Err(Error::Dimension {
            expected: w.nrows(),
            found: w.ncols(),
        });
    }
    let n = qubits_of(w.nrows())?;
    grid.par_iter()
        .map(|&(theta, phi)| {
            let psi = PureState::product(&vec![coherent_qubit(theta, phi); n])?;
            let v = psi.amplitudes();
            Ok((v.adjoint() * w * v)[0].re)
        })
        .collect()
}

/// `∫ dΩ P(Ω) w(Ω)` by the exact product rule.
pub fn integrate_witness(c: &HarmonicCoefficients, w: &CMatrix) -> Result<f64> {
    let nodes = sphere_quadrature(c.n_qubits);
    let grid: Vec<(f64, f64)> = nodes.iter().map(|&(t, p, _)| (t, p)).collect();
    if qubits_of(w.nrows())? != c.n_qubits {
        return Err(Error::Dimension {
            expected: 1 << c.n_qubits,
            found: w.nrows(),
        });
    }
    let values = witness_polynomial(w, &grid)?;
    Ok(nodes
        .iter()
        .zip(values)
        .map(|(&(t, p, wt), v)| wt * c.value(t, p) * v)
        .sum())
}

/// `n` nearly uniform points on the sphere, including both poles when `n ≥ 2`.
pub fn fibonacci_grid(n: usize) -> Vec<(f64, f64)> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let span = n.saturating_sub(1).max(1) as f64;
    (0..n)
        .map(|i| {
            let z = (1.0 - 2.0 * i as f64 / span).clamp(-1.0, 1.0);
            (z.acos(), (i as f64 * golden).rem_euclid(2.0 * PI))
        })
        .collect()
}

/// Nonnegative atomic measure on the sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    pub nodes: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl GridMeasure {
    pub fn new(nodes: Vec<(f64, f64)>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::Dimension {
                expected: nodes.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|&w| w < 0.0) {
            return param("measure weights must be nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return param(format!("measure weights sum to {total}"));
        }
        Ok(Self { nodes, weights })
    }

    /// `Σ_k p_k |Ω_k><Ω_k|^{⊗N}` in the Dicke basis.
    pub fn dicke_state(&self, n_qubits: usize) -> CMatrix {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(CMatrix::zeros(n_qubits + 1, n_qubits + 1), |acc, (&(t, p), &w)| {
                acc + projector(&coherent_dicke(n_qubits, t, p)).scale(w)
            })
    }

    pub fn reconstruct(&self, n_qubits: usize) -> Result<DensityMatrix> {
        Ok(DickeCoefficients::new(n_qubits, self.dicke_state(n_qubits))?.to_density())
    }
}

/// Outcome of the grid feasibility search. `NotCertified` is inconclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Certificate {
    CertifiedSeparable {
        resolution: usize,
        measure: GridMeasure,
        residual: f64,
    },
    NotCertified {
        resolution: usize,
        residual: f64,
    },
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        matches!(self, Certificate::CertifiedSeparable { .. })
    }
}

/// Lawson-Hanson nonnegative least squares: `min |A x - b|` subject to `x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (m, n) = a.shape();
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-13 * a.amax().max(1.0) * b.amax().max(1.0) * (m.max(n) as f64);
    let solve_passive = |passive: &[bool]| -> (Vec<usize>, DVector<f64>) {
        let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = DMatrix::from_fn(m, cols.len(), |r, c| a[(r, cols[c])]);
        let z = sub.svd(true, true).solve(b, 1e-14).expect("svd with both factors");
        (cols, z)
    };
    for _ in 0..3 * n {
        let grad = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| grad[i].total_cmp(&grad[j]).then(j.cmp(&i)));
        match candidate {
            Some(j) if grad[j] > tol => passive[j] = true,
            _ => break,
        }
        loop {
            let (cols, z) = solve_passive(&passive);
            if z.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &j) in cols.iter().enumerate() {
                    x[j] = z[k];
                }
                break;
            }
            // step back toward the feasible region until a passive entry hits zero
            let mut alpha = f64::INFINITY;
            for (k, &j) in cols.iter().enumerate() {
                if z[k] <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - z[k]));
                }
            }
            for (k, &j) in cols.iter().enumerate() {
                x[j] += alpha * (z[k] - x[j]);
                if x[j] <= 1e-15 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

/// Real coordinates of a Hermitian Dicke matrix: diagonal, then real and imaginary upper entries.
fn hermitian_coordinates(m: &CMatrix) -> Vec<f64> {
    let d = m.nrows();
    let mut out: Vec<f64> = (0..d).map(|i| m[(i, i)].re).collect();
    for i in 0..d {
        for j in i + 1..d {
            out.push(m[(i, j)].re);
            out.push(m[(i, j)].im);
        }
    }
    out
}

/// Looks for nonnegative weights on `grid_resolution` Fibonacci nodes reproducing `rho`.
pub fn separability_certificate(rho: &DensityMatrix, grid_resolution: usize) -> Result<Certificate> {
    separability_certificate_dicke(&DickeCoefficients::from_density(rho)?, grid_resolution)
}

pub fn separability_certificate_dicke(d: &DickeCoefficients, grid_resolution: usize) -> Result<Certificate> {
    if grid_resolution < 8 {
        return param("grid resolution must be at least 8");
    }
    let n = d.n_qubits();
    let grid = fibonacci_grid(grid_resolution);
    let columns: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&(t, p)| hermitian_coordinates(&projector(&coherent_dicke(n, t, p))))
        .collect();
    let rows = columns[0].len();
    let a = DMatrix::from_fn(rows, grid.len(), |r, c| columns[c][r]);
    let b = DVector::from_vec(hermitian_coordinates(d.matrix()));
    let x = nnls(&a, &b);
    let residual = (&a * &x - &b).amax();
    if residual > CERTIFICATE_TOL {
        return Ok(Certificate::NotCertified {
            resolution: grid_resolution,
            residual,
        });
    }
    let total: f64 = x.iter().sum();
    let (nodes, weights): (Vec<_>, Vec<_>) = grid
        .into_iter()
        .zip(x.iter().map(|w| w / total))
        .filter(|&(_, w)| w > 0.0)
        .unzip();
    Ok(Certificate::CertifiedSeparable {
        resolution: grid_resolution,
        measure: GridMeasure::new(nodes, weights)?,
        residual,
    })
}

/// Tries each of [`CERTIFICATE_RESOLUTIONS`] until one certifies.
pub fn separability_certificate_escalating(d: &DickeCoefficients) -> Result<Certificate> {
    let mut last = None;
    for r in CERTIFICATE_RESOLUTIONS {
        let c = separability_certificate_dicke(d, r)?;
        if c.is_certified() {
            return Ok(c);
        }
        last = Some(c);
    }
    Ok(last.expect("at least one resolution"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::{witness_matrix, Frame, WitnessKind};
    use crate::oracle::{generate_symmetric, RandomKind, RandomStateSpec};
    use crate::qcore::{build_named_state, expectation, NamedState};

    fn random_symmetric(n: usize, seed: u64) -> DickeCoefficients {
        generate_symmetric(&RandomStateSpec {
            kind: RandomKind::MixedSymmetric { rank: 2 },
            n_qubits: n,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn harmonics_are_orthonormal_under_the_quadrature() {
        let l_max = 4;
        let nodes = sphere_quadrature(l_max);
        let k = (l_max + 1) * (l_max + 1);
        let mut gram = vec![vec![C64::new(0.0, 0.0); k]; k];
        for &(t, p, w) in &nodes {
            let y = spherical_harmonics(l_max, t, p);
            for i in 0..k {
                for j in 0..k {
                    gram[i][j] += y[i].conj() * y[j] * w;
                }
            }
        }
        for i in 0..k {
            for j in 0..k {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i][j] - C64::new(want, 0.0)).norm() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn harmonic_closed_forms() {
        let (t, p) = (0.8, 1.3);
        let y = spherical_harmonics(2, t, p);
        let y10 = (3.0 / (4.0 * PI)).sqrt() * t.cos();
        let y11 = C64::from_polar(-(3.0 / (8.0 * PI)).sqrt() * t.sin(), p);
        assert!((y[harmonic_index(1, 0)].re - y10).abs() < 1e-14);
        assert!((y[harmonic_index(1, 1)] - y11).norm() < 1e-14);
        assert!((y[harmonic_index(1, -1)] + y11.conj()).norm() < 1e-14);
        let y20 = (5.0 / (16.0 * PI)).sqrt() * (3.0 * t.cos().powi(2) - 1.0);
        assert!((y[harmonic_index(2, 0)].re - y20).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_weights() {
        for n in 1..8 {
            let nodes = gauss_legendre(n);
            assert!((nodes.iter().map(|(_, w)| w).sum::<f64>() - 2.0).abs() < 1e-13);
            // exact for x^(2n-1) and x^(2n-2)
            let even: f64 = nodes.iter().map(|(x, w)| w * x.powi(2 * n as i32 - 2)).sum();
            assert!((even - 2.0 / (2 * n - 1) as f64).abs() < 1e-13);
        }
    }

    #[test]
    fn single_qubit_examples() {
        let mm = DickeCoefficients::maximally_mixed(1).unwrap();
        let c = p_expand_dicke(&mm).unwrap();
        assert!(c.c[1..].iter().all(|x| x.norm() < 1e-12));
        let zero = DickeCoefficients::basis_state(1, 0).unwrap();
        let c = p_expand_dicke(&zero).unwrap();
        for (t, p) in [(0.0, 0.0), (0.7, 2.0), (2.5, -1.0), (PI, 0.3)] {
            let want = (1.0 + 3.0 * f64::cos(t)) / (4.0 * PI);
            assert!((c.value(t, p) - want).abs() < 1e-10);
        }
        let back = p_reconstruct_dicke(&c);
        assert!((back - zero.matrix()).camax() < 1e-12);
    }

    #[test]
    fn two_qubit_mixed_state_has_only_even_harmonics() {
        let d = DickeCoefficients::maximally_mixed(2).unwrap();
        let c = p_expand_dicke(&d).unwrap();
        for m in -1..=1 {
            assert!(c.get(1, m).norm() < 1e-12);
        }
        assert!((p_reconstruct_dicke(&c) - d.matrix()).camax() < 1e-10);
    }

    #[test]
    fn isotropic_coefficients_reconstruct_the_mixed_state() {
        let n = 3;
        let mut c = vec![C64::new(0.0, 0.0); 16];
        c[0] = C64::new(1.0 / (4.0 * PI).sqrt(), 0.0);
        let rho = p_reconstruct(&HarmonicCoefficients::new(n, c).unwrap()).unwrap();
        let want = DickeCoefficients::maximally_mixed(n).unwrap().to_density();
        assert!((rho.entries() - want.entries()).camax() < 1e-12);
    }

    #[test]
    fn round_trip_for_random_states() {
        for n in 1..=6 {
            for seed in 0..3 {
                let d = random_symmetric(n, seed);
                let c = p_expand_dicke(&d).unwrap();
                assert!((p_reconstruct_dicke(&c) - d.matrix()).camax() < 1e-8, "n={n}");
            }
        }
    }

    #[test]
    fn non_symmetric_input_is_rejected() {
        let rho = build_named_state(&NamedState::Computational("01".into()), 2)
            .unwrap()
            .density();
        assert!(matches!(p_expand(&rho), Err(Error::Representation(_))));
    }

    #[test]
    fn coefficient_validation() {
        assert!(HarmonicCoefficients::new(1, vec![C64::new(1.0, 0.0); 3]).is_err());
        let mut c = vec![C64::new(0.0, 0.0); 4];
        c[0] = C64::new(1.0 / (4.0 * PI).sqrt(), 0.0);
        c[harmonic_index(1, 1)] = C64::new(0.1, 0.0);
        assert!(HarmonicCoefficients::new(1, c.clone()).is_err());
        c[harmonic_index(1, -1)] = C64::new(-0.1, 0.0);
        assert!(HarmonicCoefficients::new(1, c).is_ok());
    }

    #[test]
    fn witness_polynomial_examples() {
        let c = Frame::canonical();
        let w = witness_matrix(WitnessKind::Ghz, &c);
        assert!((witness_polynomial(&w, &[(0.0, 0.0)]).unwrap()[0] - 0.25).abs() < 1e-14);
        let w1 = witness_matrix(WitnessKind::W1, &c);
        assert!((witness_polynomial(&w1, &[(0.0, 0.0)]).unwrap()[0] - 2.0 / 3.0).abs() < 1e-14);
        let id = CMatrix::identity(8, 8);
        assert!(witness_polynomial(&id, &fibonacci_grid(20))
            .unwrap()
            .iter()
            .all(|v| (v - 1.0).abs() < 1e-14));
        assert!(witness_polynomial(&CMatrix::identity(6, 6), &[(0.0, 0.0)]).is_err());
    }

    #[test]
    fn printed_witnesses_are_nonnegative_on_coherent_products() {
        let grid = fibonacci_grid(2000);
        for kind in [WitnessKind::Ghz, WitnessKind::W1, WitnessKind::W2] {
            let v = witness_polynomial(&witness_matrix(kind, &Frame::canonical()), &grid).unwrap();
            assert!(v.iter().all(|&x| x >= -1e-10), "{kind:?}");
        }
    }

    #[test]
    fn witness_expectation_equals_p_integral() {
        let f = Frame::from_euler_zyz(0.2, 1.0, -0.5);
        for seed in 0..4 {
            let d = random_symmetric(3, seed);
            let c = p_expand_dicke(&d).unwrap();
            for kind in [WitnessKind::Ghz, WitnessKind::W1, WitnessKind::W2] {
                let w = witness_matrix(kind, &f);
                let direct = expectation(&d.to_density(), &w).unwrap().re;
                assert!((integrate_witness(&c, &w).unwrap() - direct).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn certificate_for_a_single_coherent_product() {
        let grid = fibonacci_grid(64);
        let (t, p) = grid[17];
        let d = DickeCoefficients::from_pure(3, &coherent_dicke(3, t, p)).unwrap();
        let Certificate::CertifiedSeparable { measure, .. } = separability_certificate_dicke(&d, 64).unwrap() else {
            panic!("expected a certificate");
        };
        assert_eq!(measure.nodes.len(), 1);
        assert!((measure.weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poles_are_grid_nodes_and_certify() {
        for res in CERTIFICATE_RESOLUTIONS {
            let grid = fibonacci_grid(res);
            assert_eq!(grid[0].0, 0.0);
            assert_eq!(grid[res - 1].0, PI);
        }
        for m in [0, 4] {
            let d = DickeCoefficients::basis_state(4, m).unwrap();
            assert!(separability_certificate_dicke(&d, 64).unwrap().is_certified());
        }
    }

    #[test]
    fn certificate_recovers_four_atoms() {
        let n = 4;
        let grid = fibonacci_grid(64);
        let picks = [3, 20, 41, 58];
        let mut m = CMatrix::zeros(n + 1, n + 1);
        for &i in &picks {
            m += projector(&coherent_dicke(n, grid[i].0, grid[i].1)).scale(0.25);
        }
        let d = DickeCoefficients::new(n, m).unwrap();
        let Certificate::CertifiedSeparable { measure, residual, .. } = separability_certificate_dicke(&d, 64).unwrap()
        else {
            panic!("expected a certificate");
        };
        assert!(residual <= CERTIFICATE_TOL);
        for &i in &picks {
            let k = measure.nodes.iter().position(|&x| x == grid[i]).expect("atom present");
            assert!((measure.weights[k] - 0.25).abs() < 1e-6);
        }
        let back = measure.reconstruct(n).unwrap();
        assert!((back.entries() - d.to_density().entries()).camax() < 1e-7);
    }

    #[test]
    fn ghz_is_never_certified() {
        let ghz = build_named_state(&NamedState::Ghz, 3).unwrap().density();
        let d = DickeCoefficients::from_density(&ghz).unwrap();
        assert!(!separability_certificate_escalating(&d).unwrap().is_certified());
        assert!(separability_certificate_dicke(&d, 4).is_err());
    }

    #[test]
    fn certificates_serialize() {
        let d = DickeCoefficients::maximally_mixed(2).unwrap();
        let c = separability_certificate_escalating(&d).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        let back: Certificate = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn nnls_small_problem() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, -1.0, 0.0]);
        let x = nnls(&a, &b);
        assert!(x[1].abs() < 1e-14 && (x[0] - 0.5).abs() < 1e-12);
    }
}

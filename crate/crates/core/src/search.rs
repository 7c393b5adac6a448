//! Parameter searches for the criteria: directions on the sphere, orthonormal
//! frames, and pairs of SL(2,C) elements with a rapidity cap.
//!
//! Every search is a coarse deterministic scan followed by compass refinement.
//! Restarts run on the rayon pool and are reduced in index order, so results
//! do not depend on scheduling.

use nalgebra::{Matrix2, Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{
    bipartite_margin_from_moments, moments_of, ss_value_from_moments, tripartite_form, tripartite_normalized_from_form,
    CriterionParams, Direction, Family, Frame, KTensor, SL2CElement, SsKind,
};
use crate::error::{param, Error, Result};
use crate::qcore::{DensityMatrix, C64};
use crate::spinops::MomentTensors;

/// Largest accepted rapidity cap.
pub const MAX_RAPIDITY_CAP: f64 = 20.0;
/// Number of best coarse-grid points that get refined.
const REFINE_SEEDS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub seed: u64,
    pub coarse_grid: usize,
    pub restarts: usize,
    pub rapidity_cap: f64,
    pub refine_iters: usize,
    pub tolerance: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            coarse_grid: 24,
            restarts: 32,
            rapidity_cap: 5.0,
            refine_iters: 200,
            tolerance: 1e-9,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.coarse_grid == 0 || self.restarts == 0 || self.refine_iters == 0 {
            return param("coarse_grid, restarts and refine_iters must be positive");
        }
        if !(self.rapidity_cap > 0.0 && self.rapidity_cap <= MAX_RAPIDITY_CAP) {
            return param(format!("rapidity_cap must lie in (0, {MAX_RAPIDITY_CAP}]"));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return param("tolerance must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_margin: f64,
    pub best_params: CriterionParams,
    pub evaluations: u64,
    pub converged: bool,
}

struct Refined<S> {
    point: S,
    value: f64,
    evaluations: u64,
    converged: bool,
}

/// Compass search with step halving. `step` proposes a move along coordinate
/// `axis` by `delta` and returns the new point with its value, or `None` when
/// the move leaves the admissible region.
fn compass<S: Clone>(
    start: S,
    value: f64,
    dims: usize,
    initial_step: f64,
    min_step: f64,
    max_sweeps: usize,
    mut step: impl FnMut(&S, usize, f64) -> Option<(S, f64)>,
) -> Refined<S> {
    let (mut point, mut best) = (start, value);
    let mut h = initial_step;
    let mut evaluations = 0;
    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut improved = false;
        for axis in 0..dims {
            for sign in [1.0, -1.0] {
                // keep walking while the move pays off
                let mut walked = false;
                for _ in 0..8 {
                    evaluations += 1;
                    match step(&point, axis, sign * h) {
                        Some((p, v)) if v < best => {
                            point = p;
                            best = v;
                            walked = true;
                        }
                        _ => break,
                    }
                }
                if walked {
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            h *= 0.5;
            if h < min_step {
                converged = true;
                break;
            }
        }
    }
    Refined {
        point,
        value: best,
        evaluations,
        converged,
    }
}

/// Indices of the `count` smallest values, ties broken by position.
fn best_indices(values: &[f64], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx.truncate(count);
    idx
}

/// First minimum in index order.
fn pick_best<S>(candidates: Vec<Refined<S>>) -> Option<(Refined<S>, u64)> {
    let total: u64 = candidates.iter().map(|c| c.evaluations).sum();
    let mut best: Option<Refined<S>> = None;
    for c in candidates {
        if best.as_ref().is_none_or(|b| c.value < b.value) {
            best = Some(c);
        }
    }
    best.map(|b| (b, total))
}

/// Minimizes the bipartite margin over the unit sphere.
pub fn optimize_direction(rho: &DensityMatrix, cfg: &SearchConfig) -> Result<OptimizationResult> {
    optimize_direction_moments(&moments_of(rho)?, cfg)
}

pub fn optimize_direction_moments(m: &MomentTensors, cfg: &SearchConfig) -> Result<OptimizationResult> {
    cfg.validate()?;
    let g = cfg.coarse_grid;
    let pi = std::f64::consts::PI;
    let eval = |p: &[f64; 2]| bipartite_margin_from_moments(m, &Direction::from_angles(p[0], p[1]));
    let grid: Vec<[f64; 2]> = (0..g)
        .flat_map(|i| (0..g).map(move |j| [pi * (i as f64 + 0.5) / g as f64, 2.0 * pi * j as f64 / g as f64]))
        .collect();
    let values: Vec<f64> = grid.par_iter().map(eval).collect();
    let refined: Vec<Refined<[f64; 2]>> = best_indices(&values, REFINE_SEEDS)
        .into_par_iter()
        .map(|i| {
            compass(
                grid[i],
                values[i],
                2,
                pi / g as f64,
                cfg.tolerance,
                cfg.refine_iters,
                |p, axis, d| {
                    let mut q = *p;
                    q[axis] += d;
                    Some((q, eval(&q)))
                },
            )
        })
        .collect();
    let (best, evals) = pick_best(refined).expect("grid is non-empty");
    Ok(OptimizationResult {
        best_margin: best.value,
        best_params: CriterionParams::Direction(Direction::from_angles(best.point[0], best.point[1])),
        evaluations: evals + grid.len() as u64,
        converged: best.converged,
    })
}

/// Minimizes an ss criterion over orthonormal frames.
pub fn optimize_frame(rho: &DensityMatrix, kind: SsKind, cfg: &SearchConfig) -> Result<OptimizationResult> {
    if rho.n_qubits() < 3 {
        return param("frame search needs at least 3 qubits");
    }
    optimize_frame_moments(&moments_of(rho)?, kind, cfg)
}

fn euler_frame(p: &[f64; 3]) -> Frame {
    Frame::from_euler_zyz(p[0], p[1], p[2])
}

pub fn optimize_frame_moments(m: &MomentTensors, kind: SsKind, cfg: &SearchConfig) -> Result<OptimizationResult> {
    cfg.validate()?;
    if m.n_qubits < 3 {
        return param("frame search needs at least 3 qubits");
    }
    let primed = matches!(kind, SsKind::Ss1p | SsKind::Ss2p);
    let mean = m.mean_spin();
    if primed && mean.norm() >= 1e-9 {
        return optimize_primed_in_plane(m, kind, cfg, mean);
    }
    let g = cfg.coarse_grid;
    let pi = std::f64::consts::PI;
    let eval = |p: &[f64; 3]| match ss_value_from_moments(m, kind, &euler_frame(p)) {
        Ok(v) => Some(v),
        Err(Error::Precondition(_)) => None,
        Err(e) => panic!("ss evaluation failed on a valid frame: {e}"),
    };
    let step = 2.0 * pi / g as f64;
    let grid: Vec<[f64; 3]> = (0..g)
        .flat_map(|i| {
            (0..g).flat_map(move |j| {
                (0..g).map(move |k| [step * i as f64, pi * (j as f64 + 0.5) / g as f64, step * k as f64])
            })
        })
        .collect();
    let values: Vec<f64> = grid.par_iter().map(|p| eval(p).unwrap_or(f64::INFINITY)).collect();
    let seeds: Vec<usize> = best_indices(&values, REFINE_SEEDS)
        .into_iter()
        .filter(|&i| values[i].is_finite())
        .collect();
    if seeds.is_empty() {
        return Err(Error::NoAdmissibleFrame(format!(
            "{kind:?}: zero-mean and variance-floor conditions fail on every grid frame"
        )));
    }
    let refined: Vec<Refined<[f64; 3]>> = seeds
        .into_par_iter()
        .map(|i| {
            compass(
                grid[i],
                values[i],
                3,
                step / 2.0,
                cfg.tolerance,
                cfg.refine_iters,
                |p, axis, d| {
                    let mut q = *p;
                    q[axis] += d;
                    eval(&q).map(|v| (q, v))
                },
            )
        })
        .collect();
    let (best, evals) = pick_best(refined).expect("at least one seed");
    Ok(OptimizationResult {
        best_margin: best.value,
        best_params: CriterionParams::Frame(euler_frame(&best.point)),
        evaluations: evals + grid.len() as u64,
        converged: best.converged,
    })
}

/// With a nonzero mean spin the primed conditions force `k, n ⊥ <J>`, so
/// `l = ±<J>/|<J>|` and only the angle of `k` in the orthogonal plane is free.
fn optimize_primed_in_plane(
    m: &MomentTensors,
    kind: SsKind,
    cfg: &SearchConfig,
    mean: Vector3<f64>,
) -> Result<OptimizationResult> {
    let u = mean.normalize();
    let helper = if u.x.abs() < 0.6 { Vector3::x() } else { Vector3::y() };
    let e1 = u.cross(&helper).normalize();
    let e2 = u.cross(&e1);
    let frame = |p: &[f64; 2]| {
        let l = u * p[1];
        let k = e1 * p[0].cos() + e2 * p[0].sin();
        Frame::new(k, l, k.cross(&l)).expect("orthonormal by construction")
    };
    let eval = |p: &[f64; 2]| ss_value_from_moments(m, kind, &frame(p)).ok();
    let count = cfg.coarse_grid * cfg.coarse_grid;
    let pi = std::f64::consts::PI;
    let grid: Vec<[f64; 2]> = [1.0, -1.0]
        .into_iter()
        .flat_map(|s| (0..count).map(move |i| [2.0 * pi * i as f64 / count as f64, s]))
        .collect();
    let values: Vec<f64> = grid.par_iter().map(|p| eval(p).unwrap_or(f64::INFINITY)).collect();
    let seeds: Vec<usize> = best_indices(&values, REFINE_SEEDS)
        .into_iter()
        .filter(|&i| values[i].is_finite())
        .collect();
    if seeds.is_empty() {
        return Err(Error::NoAdmissibleFrame(format!(
            "{kind:?}: variance floors fail for every frame orthogonal to the mean spin"
        )));
    }
    let refined: Vec<Refined<[f64; 2]>> = seeds
        .into_par_iter()
        .map(|i| {
            compass(
                grid[i],
                values[i],
                1,
                pi / count as f64,
                cfg.tolerance,
                cfg.refine_iters,
                |p, _, d| {
                    let q = [p[0] + d, p[1]];
                    eval(&q).map(|v| (q, v))
                },
            )
        })
        .collect();
    let (best, evals) = pick_best(refined).expect("at least one seed");
    Ok(OptimizationResult {
        best_margin: best.value,
        best_params: CriterionParams::Frame(frame(&best.point)),
        evaluations: evals + grid.len() as u64,
        converged: best.converged,
    })
}

/// Haar-random unit quaternion from four normal deviates.
fn random_quaternion(rng: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let q = Quaternion::new(v[0], v[1], v[2], v[3]);
        if q.norm() > 1e-6 {
            return UnitQuaternion::from_quaternion(q);
        }
    }
}

/// Rapidity `r` of an SL(2,C) element, from `|A|_F^2 = 2 cosh r`.
pub fn rapidity(a: &Matrix2<C64>) -> f64 {
    (a.norm_squared() / 2.0).max(1.0).acosh()
}

/// `exp(G delta)` for the generators `-i sigma_k / 2` (`axis < 3`) and `sigma_k / 2`.
fn generator_step(axis: usize, delta: f64) -> Matrix2<C64> {
    let k = axis % 3 + 1;
    let sigma = crate::qcore::pauli(k);
    let id = Matrix2::<C64>::identity();
    if axis < 3 {
        id * C64::new((delta / 2.0).cos(), 0.0) - sigma * C64::new(0.0, (delta / 2.0).sin())
    } else {
        id * C64::new((delta / 2.0).cosh(), 0.0) + sigma * C64::new((delta / 2.0).sinh(), 0.0)
    }
}

fn unit_det(a: Matrix2<C64>) -> Matrix2<C64> {
    a / a.determinant().sqrt()
}

/// Minimizes the normalized tripartite margin over the Lorentz parameters of `family`.
pub fn optimize_lorentz(rho: &DensityMatrix, family: Family, cfg: &SearchConfig) -> Result<OptimizationResult> {
    if rho.n_qubits() < 3 {
        return param("tripartite search needs at least 3 qubits");
    }
    optimize_lorentz_moments(&moments_of(rho)?, family, cfg)
}

pub fn optimize_lorentz_moments(m: &MomentTensors, family: Family, cfg: &SearchConfig) -> Result<OptimizationResult> {
    cfg.validate()?;
    if m.n_qubits < 3 {
        return param("tripartite search needs at least 3 qubits");
    }
    let q = tripartite_form(m);
    let cap = cfg.rapidity_cap;
    let eval = |a: &Matrix2<C64>, b: &Matrix2<C64>| -> Option<f64> {
        let k = KTensor::from_sl2c(
            family,
            &SL2CElement::from_matrix_unchecked(*a),
            &SL2CElement::from_matrix_unchecked(*b),
        )
        .ok()?;
        tripartite_normalized_from_form(&q, &k).ok()
    };
    let second_dims = if family == Family::W { 3 } else { 6 };
    let restart = |r: usize| -> Refined<(Matrix2<C64>, Matrix2<C64>)> {
        let (a, b) = if r == 0 {
            (Matrix2::identity(), Matrix2::identity())
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            let a = SL2CElement::from_decomposition(
                &random_quaternion(&mut rng),
                rng.random_range(0.0..=cap),
                &random_quaternion(&mut rng),
            );
            let b = match family {
                Family::Ghz => SL2CElement::from_decomposition(
                    &random_quaternion(&mut rng),
                    rng.random_range(0.0..=cap),
                    &random_quaternion(&mut rng),
                ),
                Family::W => SL2CElement::from_su2(&random_quaternion(&mut rng)),
            };
            (a.matrix(), b.matrix())
        };
        let start = eval(&a, &b).unwrap_or(f64::INFINITY);
        compass(
            (a, b),
            start,
            6 + second_dims,
            0.5,
            cfg.tolerance,
            cfg.refine_iters,
            |(a, b), axis, d| {
                let (na, nb) = if axis < 6 {
                    (unit_det(a * generator_step(axis, d)), *b)
                } else {
                    (*a, unit_det(b * generator_step(axis - 6, d)))
                };
                if rapidity(&na) > cap || rapidity(&nb) > cap {
                    return None;
                }
                eval(&na, &nb).map(|v| ((na, nb), v))
            },
        )
    };
    let runs: Vec<_> = (0..cfg.restarts).into_par_iter().map(restart).collect();
    let (best, evals) = pick_best(runs).expect("at least one restart");
    let (a, b) = best.point;
    Ok(OptimizationResult {
        best_margin: best.value,
        best_params: CriterionParams::Lorentz {
            first: SL2CElement::from_matrix_unchecked(a),
            second: SL2CElement::from_matrix_unchecked(b),
        },
        evaluations: evals + cfg.restarts as u64,
        converged: best.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::{bipartite_margin, one_axis_twisted, ss_value, tripartite_normalized_margin, TripartiteMode};
    use crate::qcore::{build_named_state, CVector, DickeCoefficients, NamedState, PureState, ONE};

    fn fast() -> SearchConfig {
        SearchConfig {
            coarse_grid: 12,
            restarts: 8,
            ..SearchConfig::default()
        }
    }

    fn named(s: NamedState, n: usize) -> DensityMatrix {
        build_named_state(&s, n).unwrap().density()
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::default().validate().is_ok());
        assert!(SearchConfig {
            rapidity_cap: 25.0,
            ..SearchConfig::default()
        }
        .validate()
        .is_err());
        assert!(SearchConfig {
            restarts: 0,
            ..SearchConfig::default()
        }
        .validate()
        .is_err());
        let cfg: SearchConfig = serde_json::from_str(r#"{"seed": 7, "restarts": 4}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.coarse_grid, 24);
        assert!(serde_json::from_str::<SearchConfig>(r#"{"sead": 7}"#).is_err());
    }

    #[test]
    fn direction_search_examples() {
        let bell = DickeCoefficients::basis_state(2, 1).unwrap().to_density();
        let r = optimize_direction(&bell, &fast()).unwrap();
        assert!(r.best_margin <= -1.0 + 1e-9, "{}", r.best_margin);
        let CriterionParams::Direction(n) = r.best_params else {
            panic!()
        };
        assert_eq!(bipartite_margin(&bell, &n).unwrap(), r.best_margin);

        let zero = named(NamedState::Computational("000".into()), 3);
        // coherent states saturate the bound at n = z
        let r = optimize_direction(&zero, &fast()).unwrap();
        assert!(r.best_margin >= -1e-12 && r.best_margin <= 1e-12);

        let oat = one_axis_twisted(4, 0.2).unwrap().density();
        assert!(optimize_direction(&oat, &fast()).unwrap().best_margin < 0.0);
    }

    #[test]
    fn direction_refinement_beats_the_grid() {
        let oat = one_axis_twisted(4, 0.3).unwrap().density();
        let cfg = fast();
        let r = optimize_direction(&oat, &cfg).unwrap();
        let g = cfg.coarse_grid;
        let pi = std::f64::consts::PI;
        for i in 0..g {
            for j in 0..g {
                let n = Direction::from_angles(pi * (i as f64 + 0.5) / g as f64, 2.0 * pi * j as f64 / g as f64);
                assert!(r.best_margin <= bipartite_margin(&oat, &n).unwrap());
            }
        }
    }

    #[test]
    fn frame_search_examples() {
        let cfg = SearchConfig {
            coarse_grid: 8,
            ..fast()
        };
        let ghz = named(NamedState::Ghz, 3);
        let r = optimize_frame(&ghz, SsKind::Ss1, &cfg).unwrap();
        assert!(r.best_margin < 0.0);
        let CriterionParams::Frame(f) = r.best_params else {
            panic!()
        };
        assert_eq!(ss_value(&ghz, SsKind::Ss1, &f).unwrap(), r.best_margin);
        let zero = named(NamedState::Computational("000".into()), 3);
        assert!(optimize_frame(&zero, SsKind::Ss1, &cfg).unwrap().best_margin >= -1e-12);
        let w = named(NamedState::W, 3);
        assert!(optimize_frame(&w, SsKind::Ss3, &cfg).unwrap().best_margin < 0.0);
        assert!(optimize_frame(
            &DickeCoefficients::basis_state(2, 1).unwrap().to_density(),
            SsKind::Ss1,
            &cfg
        )
        .is_err());
    }

    #[test]
    fn primed_frame_search() {
        let cfg = SearchConfig {
            coarse_grid: 8,
            ..fast()
        };
        // mean spin along z: k and n are confined to the x-y plane
        let zero = named(NamedState::Computational("000".into()), 3);
        let r = optimize_frame(&zero, SsKind::Ss1p, &cfg).unwrap();
        let CriterionParams::Frame(f) = r.best_params else {
            panic!()
        };
        assert_eq!(ss_value(&zero, SsKind::Ss1p, &f).unwrap(), r.best_margin);
        assert!(r.best_margin >= -1e-12);
        assert!(f.l[2].abs() > 1.0 - 1e-12);
        // zero mean spin: full frame search under the variance floors
        let ghz = named(NamedState::Ghz, 3);
        let r = optimize_frame(&ghz, SsKind::Ss2p, &cfg).unwrap();
        let CriterionParams::Frame(f) = r.best_params else {
            panic!()
        };
        assert_eq!(ss_value(&ghz, SsKind::Ss2p, &f).unwrap(), r.best_margin);
    }

    #[test]
    fn primed_search_reports_inadmissible_states() {
        // singlet on qubits 0,1 times |0>: <J_z> = 1/2, <J_x^2> = <J_y^2> = 1/4 < N/4
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = CVector::zeros(8);
        amps[2] = C64::new(h, 0.0);
        amps[4] = C64::new(-h, 0.0);
        let rho = PureState::new(3, amps).unwrap().density();
        let cfg = SearchConfig {
            coarse_grid: 8,
            ..fast()
        };
        for kind in [SsKind::Ss1p, SsKind::Ss2p] {
            assert!(matches!(
                optimize_frame(&rho, kind, &cfg),
                Err(Error::NoAdmissibleFrame(_))
            ));
        }
    }

    #[test]
    fn lorentz_search_detects_the_family_states() {
        let cfg = fast();
        for (state, family) in [(NamedState::Ghz, Family::Ghz), (NamedState::W, Family::W)] {
            let rho = named(state, 3);
            let r = optimize_lorentz(&rho, family, &cfg).unwrap();
            assert!(r.best_margin < -1.0, "{family:?}: {}", r.best_margin);
            let CriterionParams::Lorentz { first, second } = &r.best_params else {
                panic!()
            };
            assert!(rapidity(&first.matrix()) <= cfg.rapidity_cap);
            let k = KTensor::from_sl2c(family, first, second).unwrap();
            let again =
                tripartite_normalized_margin(&moments_of(&rho).unwrap(), &k, TripartiteMode::Symmetric).unwrap();
            assert_eq!(again, r.best_margin);
        }
    }

    #[test]
    fn lorentz_search_is_sound_on_coherent_states() {
        let rho = named(NamedState::Coherent { theta: 0.9, phi: 0.4 }, 3);
        for family in [Family::Ghz, Family::W] {
            assert!(optimize_lorentz(&rho, family, &fast()).unwrap().best_margin >= -1e-9);
        }
    }

    #[test]
    fn searches_are_deterministic() {
        let rho = one_axis_twisted(3, 0.4).unwrap().density();
        let cfg = SearchConfig { seed: 11, ..fast() };
        let a = optimize_lorentz(&rho, Family::Ghz, &cfg).unwrap();
        let b = optimize_lorentz(&rho, Family::Ghz, &cfg).unwrap();
        assert_eq!(a, b);
        let a = optimize_frame(
            &rho,
            SsKind::Ss2,
            &SearchConfig {
                coarse_grid: 6,
                ..cfg.clone()
            },
        )
        .unwrap();
        let b = optimize_frame(&rho, SsKind::Ss2, &SearchConfig { coarse_grid: 6, ..cfg }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generator_steps_stay_in_sl2c() {
        for axis in 0..6 {
            let g = generator_step(axis, 0.37);
            assert!((g.determinant() - ONE).norm() < 1e-14);
        }
        let boost = SL2CElement::from_decomposition(&UnitQuaternion::identity(), 2.5, &UnitQuaternion::identity());
        assert!((rapidity(&boost.matrix()) - 2.5).abs() < 1e-12);
    }
}

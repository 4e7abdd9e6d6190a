use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;

use super::*;
use crate::measure1d::Potential1D;
use crate::spin::nearest_neighbor;

fn gauss() -> Measure1D {
    Measure1D::auto(Potential1D::standard_gaussian()).unwrap()
}

fn expo() -> Measure1D {
    Measure1D::auto(Potential1D::two_sided_exp()).unwrap()
}

fn quartic() -> Measure1D {
    let p = Potential1D::new("x^4/4 + x^2/2", |x| 0.25 * x.powi(4) + 0.5 * x * x)
        .with_dv(|x| x.powi(3) + x)
        .with_d2v(|x| 3.0 * x * x + 1.0)
        .with_hessian_bounds(1.0, f64::INFINITY);
    Measure1D::auto(p).unwrap()
}

fn pair(a12: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, a12, a12, 0.0])
}

#[test]
fn barycenter_map_examples() {
    let p = TiltProblem::new(gauss(), DMatrix::zeros(2, 2), vec![0.0; 2], 0.0).unwrap();
    for z in [-1.5, 0.0, 0.7] {
        assert_abs_diff_eq!(barycenter_map(&p, z).unwrap(), z, epsilon = 1e-10);
        assert_abs_diff_eq!(barycenter_map_cached(&p, z).unwrap(), z, epsilon = 1e-8);
    }
    let e = TiltProblem::with_m2_bar(expo(), DMatrix::zeros(2, 2), vec![0.0; 2], 0.0, 1.0).unwrap();
    assert_abs_diff_eq!(barycenter_map(&e, 0.5).unwrap(), 4.0 / 3.0, epsilon = 1e-10);
    assert_abs_diff_eq!(barycenter_map_cached(&e, 0.5).unwrap(), 4.0 / 3.0, epsilon = 1e-7);
    assert_abs_diff_eq!(barycenter_map(&e, 0.0).unwrap(), 0.0, epsilon = 1e-12);
    assert!(matches!(barycenter_map(&e, 1.5), Err(Error::TiltDiverges(_))));
}

#[test]
fn m2_bar_estimates() {
    assert_abs_diff_eq!(estimate_m2_bar(&gauss(), Execution::Parallel).unwrap(), 1.05, epsilon = 1e-8);
    // the quartic tilt only narrows, so the sup is at a = 0
    let q = quartic();
    assert_abs_diff_eq!(estimate_m2_bar(&q, Execution::Parallel).unwrap(), 1.05 * q.variance(), epsilon = 1e-8);
}

#[test]
fn solve_u0_examples() {
    let p = TiltProblem::new(expo(), DMatrix::zeros(3, 3), vec![0.0; 3], 0.8).unwrap();
    let u0 = solve_u0(&p, &[5.0, -1.0, 2.0]).unwrap();
    assert_abs_diff_eq!(u0, expo().invert_tilt(0.8).unwrap(), epsilon = 1e-10);
    // Gaussian: u0 = s - (2/n) 1^T A t
    let a = nearest_neighbor(3, 0.1);
    let p = TiltProblem::new(gauss(), a, vec![0.0; 3], 0.5).unwrap();
    let t = [1.0, 2.0, -1.0];
    let at: f64 = (0..3).map(|i| (0..3).map(|j| p.a[(i, j)] * t[j]).sum::<f64>()).sum();
    assert_abs_diff_eq!(solve_u0(&p, &t).unwrap(), 0.5 - 2.0 / 3.0 * at, epsilon = 1e-10);
    let p = TiltProblem::new(gauss(), pair(0.25), vec![0.0; 2], 1.0).unwrap();
    assert_abs_diff_eq!(solve_u0(&p, &[1.0, 1.0]).unwrap(), 0.5, epsilon = 1e-11);
    let bounded = Measure1D::auto(Potential1D::uniform(-1.0, 1.0)).unwrap();
    let p = TiltProblem::with_m2_bar(bounded, DMatrix::zeros(2, 2), vec![0.0; 2], 1.5, 1.0).unwrap();
    assert!(matches!(solve_u0(&p, &[1.5, 1.5]), Err(Error::Unreachable(_))));
}

#[test]
fn fixed_point_examples() {
    let e = expo();
    let p = TiltProblem::new(e.clone(), DMatrix::zeros(3, 3), vec![0.0; 3], 0.6).unwrap();
    let sol = fixed_point_solve(&p, 1e-12, 100).unwrap();
    assert!(sol.t.iter().all(|t| (t - 0.6).abs() < 1e-10));
    assert_abs_diff_eq!(sol.u0, e.invert_tilt(0.6).unwrap(), epsilon = 1e-10);
    let p = TiltProblem::new(gauss(), pair(0.25), vec![0.0; 2], 1.0).unwrap();
    let sol = fixed_point_solve(&p, 1e-12, 100).unwrap();
    assert_abs_diff_eq!(sol.t[0], 1.0, epsilon = 1e-10);
    assert_abs_diff_eq!(sol.t[1], 1.0, epsilon = 1e-10);
    assert_abs_diff_eq!(sol.u0, 0.5, epsilon = 1e-10);
    assert!(matches!(
        TiltProblem::with_m2_bar(gauss(), pair(0.25), vec![0.0; 2], 1.0, 2.0),
        Err(Error::InteractionTooStrong(_))
    ));
}

#[test]
fn interacting_solution_invariants() {
    let q = quartic();
    let n = 5;
    let a = nearest_neighbor(n, 0.15);
    let b = vec![0.3, -0.2, 0.0, 0.5, -0.1];
    let p = TiltProblem::new(q, a, b, 0.4).unwrap();
    let sol = fixed_point_solve(&p, 1e-12, 500).unwrap();
    assert!(sol.residual <= 1e-10, "{sol:?}");
    assert!((sol.t.iter().sum::<f64>() - 0.4 * n as f64).abs() <= 1e-10);
    let lambda = 2.0 * p.m2_bar * op_norm(&p.a);
    assert!(sol.contraction_observed <= lambda + 0.05, "{} vs {lambda}", sol.contraction_observed);
    // defining equations
    let z = p.tilts(sol.u0, &sol.t);
    for (zi, ti) in z.iter().zip(&sol.t) {
        assert_abs_diff_eq!(barycenter_map(&p, *zi).unwrap(), *ti, epsilon = 1e-10);
    }
    // uniqueness from other starting points on E_s
    for t0 in [vec![2.0, -1.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 2.0, 0.0, 0.0]] {
        let other = fixed_point_solve_from(&p, t0, 1e-12, 500).unwrap();
        assert!(dist(&other.t, &sol.t) <= 1e-11);
    }
}

#[test]
fn jacobian_examples() {
    let p = TiltProblem::new(gauss(), DMatrix::zeros(3, 3), vec![0.0; 3], 0.0).unwrap();
    let j = jacobian(&p, &[0.0; 3]).unwrap();
    assert!(j.matrix.iter().all(|v| *v == 0.0));
    let p = TiltProblem::new(gauss(), pair(0.25), vec![0.0; 2], 1.0).unwrap();
    let j = jacobian(&p, &[1.0, 1.0]).unwrap();
    assert_abs_diff_eq!(j.op_norm, 0.5, epsilon = 1e-9);
}

#[test]
fn jacobian_matches_finite_differences() {
    let q = quartic();
    let n = 4;
    let a = DMatrix::from_row_slice(n, n, &[0.0, 0.1, -0.05, 0.02, 0.1, 0.0, 0.08, 0.0, -0.05, 0.08, 0.0, 0.1, 0.02, 0.0, 0.1, 0.0]);
    let p = TiltProblem::new(q, a, vec![0.2, 0.0, -0.3, 0.1], 0.3).unwrap();
    let t = vec![0.5, 0.1, 0.4, 0.2];
    let j = jacobian(&p, &t).unwrap();
    let h = 1e-5;
    for k in 0..n {
        let mut tp = t.clone();
        let mut tm = t.clone();
        tp[k] += h;
        tm[k] -= h;
        let gp = g_map(&p, &tp).unwrap().1;
        let gm = g_map(&p, &tm).unwrap().1;
        for i in 0..n {
            let fd = (gp[i] - gm[i]) / (2.0 * h);
            assert!((fd - j.matrix[(i, k)]).abs() < 1e-6, "({i},{k}) {fd} vs {}", j.matrix[(i, k)]);
        }
    }
    assert!(j.op_norm <= j.bound + 1e-12);
    let eig = j.middle.clone().symmetric_eigen().eigenvalues;
    assert!(eig.iter().all(|l| *l >= -p.m2_bar - 1e-12 && *l <= p.m2_bar + 1e-12));
}

#[test]
fn reduction_examples() {
    let e = expo();
    let p = TiltProblem::new(e.clone(), DMatrix::zeros(3, 3), vec![0.0; 3], 0.5).unwrap();
    let r = reduce_to_zero_spin(&p).unwrap();
    let a = e.invert_tilt(0.5).unwrap();
    assert!(r.u.iter().all(|u| (u - a).abs() < 1e-10));
    let p = TiltProblem::new(gauss(), pair(0.25), vec![0.0; 2], 1.0).unwrap();
    let r = reduce_to_zero_spin(&p).unwrap();
    assert_abs_diff_eq!(r.u[0], 1.0, epsilon = 1e-10);
    assert_abs_diff_eq!(r.u[1], 1.0, epsilon = 1e-10);
}

#[test]
fn reduction_density_match_n2() {
    for (site, a12, b, s) in [(expo(), 0.0, [0.3, -0.1], 0.7), (quartic(), 0.2, [0.4, -0.3], 0.5), (gauss(), 0.25, [0.0, 0.0], 1.0)] {
        let p = TiltProblem::new(site, pair(a12), b.to_vec(), s).unwrap();
        let r = reduce_to_zero_spin(&p).unwrap();
        let d = verify_reduction_n2(&p, &r).unwrap();
        assert!(d < 1e-8, "{d}");
    }
}

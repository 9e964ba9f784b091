use proptest::prelude::*;
use ruij_core::inequalities::*;

fn abs_sum(a: &[f64], b: &[f64]) -> f64 {
    a.iter().flat_map(|x| b.iter().map(move |y| (x - y).abs())).sum()
}

#[test]
fn s_three_written_out() {
    // S₃ = Σ_{i≠j}|x_i−x_j| − Σ|x_i−z_j| + Σ_{i≠j}|z_i−z_j| − Σ|z_i−y|
    let y = vec![0.4];
    let z = vec![-1.0, 2.5];
    let x = vec![0.1, -3.0, 1.7];
    let direct = abs_sum(&x, &x) - abs_sum(&x, &z) + abs_sum(&z, &z) - abs_sum(&z, &y);
    let v = eval_s(&[y, z, x]).unwrap();
    assert!((v - direct).abs() < 1e-13, "{v} vs {direct}");
}

#[test]
fn degenerate_cases() {
    let same = vec![vec![1.5], vec![1.5, 1.5], vec![1.5, 1.5, 1.5]];
    assert_eq!(eval_s(&same).unwrap(), 0.0);
    let zero = vec![vec![0.0], vec![0.0, 0.0]];
    assert_eq!(eval_s(&zero).unwrap(), 0.0);
    assert_eq!(s_bound(&zero, 1.0).unwrap(), 0.0);
    assert_eq!(eval_l(&[2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
    let y = [0.3, -1.0, 4.0];
    assert_eq!(eval_r(&y, &y).unwrap(), 0.0);
    assert_eq!(r_bound(&y, &y, 0.5).unwrap(), 0.0);
}

#[test]
fn l_one_is_the_triangle_inequality() {
    let (x1, x2, y) = (1.3, -0.4, 5.0);
    let v = eval_l(&[y], &[x1, x2]).unwrap();
    let direct: f64 = (x1 - x2 as f64).abs() - (x1 - y as f64).abs() - (x2 - y as f64).abs();
    assert!((v - direct).abs() < 1e-14);
    assert!(v <= 0.0);
}

#[test]
fn s_bound_at_zero_eps_is_half_pair_sum() {
    let levels = vec![vec![0.2], vec![1.0, -2.0]];
    assert!((s_bound(&levels, 0.0).unwrap() - 3.0).abs() < 1e-15);
}

#[test]
fn no_violations_in_randomized_runs() {
    let started = std::time::Instant::now();
    for n in 2..=4 {
        for rep in run_all(n, 100_000, 7).unwrap() {
            assert!(rep.pass, "{rep:?}");
        }
    }
    assert!(started.elapsed().as_secs() < 60);
}

#[test]
fn runs_are_deterministic() {
    let a = run_all(3, 2000, 99).unwrap();
    let b = run_all(3, 2000, 99).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.metadata["worst_relative_margin"], y.metadata["worst_relative_margin"]);
    }
}

proptest! {
    #[test]
    fn l_and_r_are_permutation_invariant(
        y in prop::collection::vec(-50.0f64..50.0, 3),
        x in prop::collection::vec(-50.0f64..50.0, 4),
    ) {
        let l = eval_l(&y, &x).unwrap();
        let (mut yr, mut xr) = (y.clone(), x.clone());
        yr.reverse();
        xr.rotate_left(1);
        prop_assert!((l - eval_l(&yr, &xr).unwrap()).abs() < 1e-10);
        let r = eval_r(&y, &x[..3]).unwrap();
        prop_assert!((r - eval_r(&yr, &x[..3].iter().rev().copied().collect::<Vec<_>>()).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn l_is_scale_covariant(
        y in prop::collection::vec(-50.0f64..50.0, 2),
        x in prop::collection::vec(-50.0f64..50.0, 3),
        c in 0.01f64..100.0,
    ) {
        let l = eval_l(&y, &x).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
        let xs: Vec<f64> = x.iter().map(|v| v * c).collect();
        prop_assert!((eval_l(&ys, &xs).unwrap() - c * l).abs() < 1e-9 * (1.0 + c * l.abs()));
    }

    #[test]
    fn l_nonpositive_property(
        y in prop::collection::vec(-1e4f64..1e4, 4),
        x in prop::collection::vec(-1e4f64..1e4, 5),
    ) {
        prop_assert!(eval_l(&y, &x).unwrap() <= 1e-9);
    }
}

use evscore::stats::{
    correlation_matrix, kolmogorov_q, ks_normality_slice, pearson_slices, significance_grid,
    two_tailed_p, z_test_slices, ScoreVector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    let v: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

#[test]
fn kolmogorov_critical_values() {
    assert!((kolmogorov_q(1.3581) - 0.05).abs() < 1e-3);
    assert!((kolmogorov_q(1.6276) - 0.01).abs() < 1e-3);
    assert_eq!(kolmogorov_q(0.0), 1.0);
    assert!(kolmogorov_q(5.0) < 1e-15);
}

#[test]
fn two_tailed_p_reference_points() {
    assert!((two_tailed_p(1.959964) - 0.05).abs() < 1e-6);
    assert!((two_tailed_p(-2.575829) - 0.01).abs() < 1e-6);
    assert_eq!(two_tailed_p(0.0), 1.0);
}

#[test]
fn ks_accepts_normal_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let accepted = (0..50)
        .filter(|_| {
            let x: Vec<f64> = (0..200).map(|_| 0.7 + 0.1 * normal(&mut rng)).collect();
            ks_normality_slice(&x).unwrap().p > 0.05
        })
        .count();
    assert!(accepted >= 45, "{accepted} of 50");
}

#[test]
fn ks_separates_uniform_from_normal() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let wins = (0..40)
        .filter(|_| {
            let u: Vec<f64> = (0..500).map(|_| rng.random_range(0.0..1.0)).collect();
            let n: Vec<f64> = (0..500).map(|_| normal(&mut rng)).collect();
            ks_normality_slice(&u).unwrap().d > ks_normality_slice(&n).unwrap().d
        })
        .count();
    assert!(wins >= 38, "{wins} of 40");
}

#[test]
fn correlation_edge_cases() {
    let x = [1.0, 2.0, 3.0];
    let c = pearson_slices(&x, &[2.0, 4.0, 6.0]).unwrap();
    assert_eq!((c.r, c.p), (1.0, 0.0));
    let c = pearson_slices(&x, &[1.0, 3.0, 2.0]).unwrap();
    assert_eq!(c.p, 1.0);
    assert!(pearson_slices(&x, &[1.0, 1.0, 1.0]).is_err());
    assert!(pearson_slices(&[1.0, 2.0], &[1.0, 2.0]).is_err());
}

#[test]
fn undefined_entries_are_skipped_pairwise() {
    let a = ScoreVector::from_values([
        ("a", Some(0.1)),
        ("b", Some(0.4)),
        ("c", None),
        ("d", Some(0.9)),
        ("e", Some(0.5)),
    ]);
    let b = ScoreVector::from_values([
        ("a", Some(0.2)),
        ("b", None),
        ("c", Some(0.3)),
        ("d", Some(0.8)),
        ("e", Some(0.4)),
    ]);
    let m = correlation_matrix(&[("a".into(), a.clone()), ("b".into(), b.clone())]);
    let r = m.cells[0][1].unwrap();
    assert_eq!(r.n, 3);
    let expect = pearson_slices(&[0.1, 0.9, 0.5], &[0.2, 0.8, 0.4]).unwrap();
    assert_eq!(r.r, expect.r);
    let g = significance_grid(&[("a".into(), a), ("b".into(), b)], 0.05);
    assert_eq!(g.cells[0][1].unwrap().n_a, 4);
}

#[test]
fn z_test_detects_a_real_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let a: Vec<f64> = (0..100).map(|_| 0.8 + 0.05 * normal(&mut rng)).collect();
    let b: Vec<f64> = (0..100).map(|_| 0.6 + 0.05 * normal(&mut rng)).collect();
    let t = z_test_slices(&a, &b, 0.05).unwrap();
    assert!(t.significant && t.z > 10.0);
    assert!(z_test_slices(&[0.5, 0.5], &[0.5, 0.5], 0.05).is_err());
    assert_eq!(
        z_test_slices(&[0.5, 0.5], &[0.4, 0.4], 0.05).unwrap().z,
        f64::INFINITY
    );
}

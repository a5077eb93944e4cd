use proptest::prelude::*;
use surfdyn::domination::{certify_cones, CertifyOptions};
use surfdyn::forge::{edit_cocycle, ChartBump, EditMode};
use surfdyn::linalg::{angle, Rect};
use surfdyn::maps::CatMap;
use surfdyn::periodic::{scan_periodic, ScanOptions};
use surfdyn::pliss::{hyperbolic_times, pliss_times};
use surfdyn::{Direction, Exec, Mat2, Vec2};

fn brute_force_times(a: &[f64], g2: f64) -> Vec<usize> {
    (0..a.len())
        .filter(|&r| {
            let mut prod = 1.0;
            (r..a.len()).all(|j| {
                prod *= a[j];
                prod <= g2.powi((j - r) as i32) * (1.0 + 1e-12)
            })
        })
        .collect()
}

fn mat() -> impl Strategy<Value = Mat2> {
    prop::array::uniform4(-3.0f64..3.0).prop_map(|[a, b, c, d]| Mat2::new(a, b, c, d))
}

proptest! {
    #[test]
    fn svd_product_is_abs_det(m in mat()) {
        let s = m.svd();
        prop_assert!(s.s_max >= s.s_min);
        prop_assert!((s.s_max * s.s_min - m.det().abs()).abs() <= 1e-9 * (1.0 + m.max_abs_entry().powi(2)));
    }

    #[test]
    fn angle_is_symmetric(t1 in 0.0f64..3.1, t2 in 0.0f64..3.1) {
        prop_assume!((t1 - t2).abs() > 1e-3);
        let (e, f) = (Direction::from_angle(t1), Direction::from_angle(t2));
        let ab = angle(e, f).unwrap();
        let ba = angle(f, e).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-9 * (1.0 + ab));
    }

    #[test]
    fn hyperbolic_times_match_brute_force(a in prop::collection::vec(prop::sample::select(vec![0.25, 0.5, 1.0, 2.0]), 1..24)) {
        prop_assert_eq!(hyperbolic_times(&a, 0.8).unwrap(), brute_force_times(&a, 0.8));
    }

    #[test]
    fn pliss_count_is_bounded_by_length(a in prop::collection::vec(0.1f64..3.0, 1..50)) {
        let r = pliss_times(&a, 0.5, 0.8).unwrap();
        prop_assert!(r.count() <= a.len());
        prop_assert!(r.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn chart_bump_round_trips(x in -1.0f64..1.0, y in -1.0f64..1.0, eps in 0.01f64..0.99) {
        let b = ChartBump::new(0.1, 0.3, eps);
        let p = Vec2::new(x, y);
        prop_assert!(b.invert(b.apply(p)).dist(p) < 1e-14);
        prop_assert!(b.derivative(p).det() >= 1.0 - eps - 1e-12);
    }

    #[test]
    fn inflation_is_independent_of_the_base_point(shift in 0usize..4, delta in 0.0f64..0.05, theta in 0.0f64..3.0) {
        let r = Mat2::rotation(theta);
        let steps = vec![
            Mat2::diag(0.7, 1.2),
            r * Mat2::diag(0.9, 1.1) * r.inverse(),
            Mat2::new(1.0, 0.3, 0.0, 1.0),
            Mat2::diag(0.8, 1.3),
        ];
        let mut rotated = steps.clone();
        rotated.rotate_left(shift);
        let budget = 10.0;
        let a = edit_cocycle(&steps, EditMode::Inflate { delta }, budget).unwrap();
        let b = edit_cocycle(&rotated, EditMode::Inflate { delta }, budget).unwrap();
        let ea = a.monodromy.eigenvalues();
        let eb = b.monodromy.eigenvalues();
        for (x, y) in ea.iter().zip(&eb) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }
}

#[test]
fn chart_bump_determinant_on_a_dense_grid() {
    let eps = 0.1;
    let b = ChartBump::new(0.0, 1.0, eps);
    let n = 1000;
    let mut worst = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            let p = Vec2::new(-2.0 + 4.0 * i as f64 / (n - 1) as f64, -2.0 + 4.0 * j as f64 / (n - 1) as f64);
            worst = worst.min(b.derivative(p).det());
        }
    }
    assert!(worst >= 1.0 - eps);
}

#[test]
fn parallel_and_sequential_runs_agree() {
    let cat = CatMap::new(0.01).unwrap();
    let mut opts = ScanOptions::new(Rect::unit(), 2);
    opts.grid = (12, 12);
    opts.exec = Exec::Sequential;
    let seq = scan_periodic(&cat, &opts);
    opts.exec = Exec::Parallel;
    let par = scan_periodic(&cat, &opts);
    assert_eq!(seq, par);

    let mut c = CertifyOptions::new(Rect::unit(), (32, 32));
    c.exec = Exec::Sequential;
    let a = certify_cones(&cat, &c).unwrap();
    c.exec = Exec::Parallel;
    let b = certify_cones(&cat, &c).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

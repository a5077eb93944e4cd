use surfdyn::manifolds::{grow, intersections, local_seed, stable_decay_check, EventKind, GrowOptions, ManifoldKind, DEFAULT_TANGENCY_TOL};
use surfdyn::periodic::find_periodic;
use surfdyn::{maps::CatMap, maps::Henon, Exec, SurfaceMap, Vec2};

fn torus_dist(a: Vec2, b: Vec2) -> f64 {
    let d = |t: f64| (t - t.round()).abs();
    d(a.x - b.x).hypot(d(a.y - b.y))
}

#[test]
fn cat_map_has_transversal_homoclinic_points() {
    let cat = CatMap::linear();
    let o = find_periodic(&cat, Vec2::new(0.001, 0.001), 1).unwrap();
    let opts = GrowOptions::new(3.0);
    let wu = grow(&cat, &local_seed(&cat, &o, ManifoldKind::Unstable, 0.05).unwrap(), &opts).unwrap();
    let ws = grow(&cat, &local_seed(&cat, &o, ManifoldKind::Stable, 0.05).unwrap(), &opts).unwrap();
    assert!((wu.length() - 3.0).abs() < 1e-9 && (ws.length() - 3.0).abs() < 1e-9);

    let found = intersections(&wu, &ws, DEFAULT_TANGENCY_TOL, Exec::Sequential);
    assert!(!found.overlap);
    let transversal: Vec<_> = found.events.iter().filter(|e| e.kind == EventKind::Transversal).collect();
    assert!(!transversal.is_empty());
    for e in transversal {
        let (mut fwd, mut bwd) = (e.point, e.point);
        let (mut best_f, mut best_b) = (f64::INFINITY, f64::INFINITY);
        for _ in 0..30 {
            fwd = cat.forward(fwd);
            bwd = cat.backward(bwd);
            best_f = best_f.min(torus_dist(fwd, o.points[0]));
            best_b = best_b.min(torus_dist(bwd, o.points[0]));
        }
        assert!(best_f < 1e-6 && best_b < 1e-6, "{best_f} {best_b}");
    }
}

#[test]
fn henon_unstable_manifold_is_invariant() {
    let h = Henon::new(1.4, 0.3).unwrap();
    let o = find_periodic(&h, Vec2::new(0.6, 0.2), 1).unwrap();
    let wu = grow(&h, &local_seed(&h, &o, ManifoldKind::Unstable, 0.05).unwrap(), &GrowOptions::new(4.0)).unwrap();
    // Images of the inner part must lie near the curve.
    let inner = wu.slice(0.5 * wu.length() - 0.5, 0.5 * wu.length() + 0.5);
    for p in inner.points.iter().step_by(7) {
        let q = h.forward(*p);
        let d = wu.points.windows(2).map(|s| seg_dist(q, s[0], s[1])).fold(f64::INFINITY, f64::min);
        assert!(d < 1e-5, "{d}");
    }
}

fn seg_dist(q: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let t = ((q - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
    q.dist(a + ab * t)
}

#[test]
fn henon_stable_segment_shrinks_at_the_stable_rate() {
    let h = Henon::new(1.4, 0.3).unwrap();
    let o = find_periodic(&h, Vec2::new(0.6, 0.2), 1).unwrap();
    let d = stable_decay_check(&h, &o, 1e-3, 8).unwrap();
    assert!(d.rate > 0.14 && d.rate < 0.17, "{}", d.rate);
    assert!(d.within_bound, "{d:?}");
}

//! One function per subcommand. Each returns the status, the JSON payload and
//! the CSV tables to write.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use surfdyn::domination::{certify_cones, contracting_line_norms, hyperbolicity_verdict, CertifyOptions, HyperbolicityVerdict, SplittingSource, Verdict};
use surfdyn::forge::{forge_tangency, ForgeOptions};
use surfdyn::linalg::Rect;
use surfdyn::manifolds::{distortion_check, grow, intersections, local_seed, stable_decay_check, GrowOptions, ManifoldKind, Polyline};
use surfdyn::maps::orbit;
use surfdyn::periodic::{domination_scan, find_periodic, scan_periodic, PeriodicOrbit, ScanOptions};
use surfdyn::pliss::{pliss_times, pliss_times_with_bound, PlissReport};
use surfdyn::{Exec, Point, SurfaceMap};

use crate::config::{point, region, ExperimentConfig, OrbitSample};
use crate::error::CliError;
use crate::report::{num, Status, Table};

pub struct Outcome {
    pub status: Status,
    pub result: Value,
    pub tables: Vec<Table>,
}

type Run = Result<Outcome, CliError>;

fn ok(result: Value, tables: Vec<Table>) -> Run {
    Ok(Outcome {
        status: Status::Ok,
        result,
        tables,
    })
}

fn default_region(map: &dyn SurfaceMap) -> Rect {
    if map.phase_space().is_torus() {
        Rect::unit()
    } else {
        Rect::new(-2.0, 2.0, -2.0, 2.0).expect("static region")
    }
}

/// `count` consecutive orbit points after `transient` steps, reduced.
fn orbit_sample(map: &dyn SurfaceMap, s: &OrbitSample) -> Result<Vec<Point>, CliError> {
    let pts = orbit(map, point(s.start), (s.transient + s.count) as i64)?;
    let space = map.phase_space();
    Ok(pts[s.transient..s.transient + s.count].iter().map(|p| space.reduce(*p)).collect())
}

fn orbit_table(orbits: &[PeriodicOrbit]) -> Table {
    let mut t = Table::new(
        "orbits.csv",
        &["orbit", "period", "index", "x", "y", "classification", "mu1_re", "mu1_im", "mu2_re", "mu2_im"],
    );
    for (k, o) in orbits.iter().enumerate() {
        let class = serde_json::to_value(o.classification).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        for (i, p) in o.points.iter().enumerate() {
            let [m1, m2] = o.multipliers;
            t.push(vec![
                k.to_string(),
                o.period.to_string(),
                i.to_string(),
                num(p.x),
                num(p.y),
                class.clone(),
                num(m1.re),
                num(m1.im),
                num(m2.re),
                num(m2.im),
            ]);
        }
    }
    t
}

pub fn periodic_scan(map: &dyn SurfaceMap, cfg: &ExperimentConfig, exec: Exec) -> Run {
    let c = cfg.periodic_scan.clone().unwrap_or_default();
    let rect = match c.region {
        Some(r) => region("periodic_scan.region", r)?,
        None => default_region(map),
    };
    let mut opts = ScanOptions::new(rect, c.max_period);
    opts.grid = (c.grid[0], c.grid[1]);
    opts.exec = exec;
    let orbits = scan_periodic(map, &opts);
    let saddles: Vec<PeriodicOrbit> = orbits.iter().filter(|o| o.is_saddle()).cloned().collect();
    let scans = domination_scan(map, &saddles, c.m1)?;
    let result = json!({
        "orbit_count": orbits.len(),
        "saddle_count": saddles.len(),
        "orbits": orbits,
        "saddle_domination": scans,
    });
    ok(result, vec![orbit_table(&orbits)])
}

pub fn domination_certify(map: &dyn SurfaceMap, cfg: &ExperimentConfig, exec: Exec) -> Run {
    let c = cfg.domination_certify.clone().unwrap_or_default();
    let rect = match c.region {
        Some(r) => region("domination_certify.region", r)?,
        None => default_region(map),
    };
    let mut opts = CertifyOptions::new(rect, (c.grid[0], c.grid[1]));
    opts.horizon = c.horizon;
    opts.half_width = c.half_width;
    opts.samples_per_box = c.samples_per_box;
    opts.exec = exec;
    opts.restrict_to = match (&c.restrict_to, &c.attractor) {
        (Some(pts), _) => Some(pts.iter().map(|p| point(*p)).collect()),
        (None, Some(s)) => Some(orbit_sample(map, s)?),
        (None, None) => None,
    };
    let cert = certify_cones(map, &opts)?;
    let mut boxes = Table::new(
        "boxes.csv",
        &["id", "x0", "x1", "y0", "y1", "lambda_cu", "lambda_cs", "padding", "passed"],
    );
    for b in &cert.boxes {
        boxes.push(vec![
            b.id.to_string(),
            num(b.rect.x0),
            num(b.rect.x1),
            num(b.rect.y0),
            num(b.rect.y1),
            num(b.lambda_cu),
            num(b.lambda_cs),
            num(b.padding),
            b.passed.to_string(),
        ]);
    }
    let failing: Vec<_> = cert.boxes.iter().filter(|b| !b.passed).collect();
    let mut result = serde_json::to_value(&cert)?;
    result["boxes"] = serde_json::to_value(&failing)?;
    result["box_count"] = json!(cert.boxes.len());
    let status = match cert.verdict {
        Verdict::Pass => Status::Ok,
        Verdict::Fail { .. } => Status::Fail,
    };
    Ok(Outcome {
        status,
        result,
        tables: vec![boxes],
    })
}

fn times_table(norms: &[f64], report: &PlissReport) -> Table {
    let mut t = Table::new("times.csv", &["index", "norm", "cumulative_product", "is_pliss_time"]);
    let mut log = 0.0;
    for (i, a) in norms.iter().enumerate() {
        log += a.ln();
        t.push(vec![
            i.to_string(),
            num(*a),
            num(log.exp()),
            report.times.binary_search(&i).is_ok().to_string(),
        ]);
    }
    t
}

pub fn pliss(map: &dyn SurfaceMap, cfg: &ExperimentConfig) -> Run {
    let c = cfg.pliss.clone().unwrap_or_default();
    let ladder = cfg.thresholds.resolve()?;
    let (g1, g2) = (ladder.gamma1, ladder.gamma2);
    let (norms, source) = match &c.norms {
        Some(n) => (n.clone(), "explicit"),
        None => {
            let start = orbit_sample(map, &OrbitSample { count: 1, ..c.orbit })?[0];
            let src = SplittingSource::FiniteTime {
                horizon: c.splitting_horizon,
            };
            (contracting_line_norms(map, start, &src, c.orbit.count as i64)?.1, "orbit")
        }
    };
    let run = |a: &[f64]| match c.a_bound {
        Some(b) => pliss_times_with_bound(a, g1, g2, b),
        None => pliss_times(a, g1, g2),
    };
    let report = run(&norms)?;

    let random = match &c.random {
        None => Value::Null,
        Some(r) => {
            if r.alphabet.is_empty() || r.length == 0 {
                return Err(CliError::config("pliss.random", "alphabet and length must be non-empty"));
            }
            let weights = r.weights.clone().unwrap_or_else(|| vec![1.0; r.alphabet.len()]);
            let dist = WeightedIndex::new(&weights).map_err(|e| CliError::config("pliss.random.weights", e.to_string()))?;
            let bound = c.a_bound.unwrap_or_else(|| r.alphabet.iter().copied().fold(g2, f64::max));
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let (mut kept, mut attempts, mut failures) = (0usize, 0usize, 0usize);
            let mut min_margin = f64::INFINITY;
            while kept < r.count && attempts < 100 * r.count.max(1) {
                attempts += 1;
                let seq: Vec<f64> = (0..r.length).map(|_| r.alphabet[dist.sample(&mut rng)]).collect();
                let rep = pliss_times_with_bound(&seq, g1, g2, bound)?;
                if !rep.hypothesis_holds {
                    continue;
                }
                kept += 1;
                if let Some(holds) = rep.density_holds {
                    failures += usize::from(!holds);
                    min_margin = min_margin.min(rep.count() as f64 - rep.c * rep.n as f64);
                }
            }
            json!({ "kept": kept, "attempts": attempts, "density_failures": failures, "min_margin": min_margin, "a_bound": bound })
        }
    };
    let table = times_table(&norms, &report);
    ok(json!({ "source": source, "report": report, "random": random }), vec![table])
}

fn find_orbit(map: &dyn SurfaceMap, seed: [f64; 2], period: usize) -> Result<PeriodicOrbit, CliError> {
    Ok(find_periodic(map, point(seed), period)?)
}

fn polyline_table(name: &str, p: &Polyline) -> Table {
    let mut t = Table::new(name, &["x", "y", "arclength", "tangent_x", "tangent_y"]);
    for ((q, s), tg) in p.points.iter().zip(&p.arclength).zip(&p.tangents) {
        t.push(vec![num(q.x), num(q.y), num(*s), num(tg.x), num(tg.y)]);
    }
    t
}

pub fn manifolds(map: &dyn SurfaceMap, cfg: &ExperimentConfig, exec: Exec) -> Run {
    let c = cfg.manifolds.clone().unwrap_or_default();
    let o = find_orbit(map, c.orbit_seed, c.period)?;
    let opts = GrowOptions {
        target_arclength: c.arclength,
        h_max: c.h_max,
        alpha_max: c.alpha_max,
        max_points: c.max_points,
    };
    let wu = grow(map, &local_seed(map, &o, ManifoldKind::Unstable, c.seed_radius)?, &opts)?;
    let ws = grow(map, &local_seed(map, &o, ManifoldKind::Stable, c.seed_radius)?, &opts)?;
    let found = intersections(&wu, &ws, c.tangency_tol, exec);
    let mut events = Table::new("events.csv", &["s_u", "s_s", "x", "y", "angle", "tangency_residual", "kind"]);
    for e in &found.events {
        let kind = serde_json::to_value(e.kind)?.as_str().unwrap_or_default().to_string();
        events.push(vec![num(e.s_u), num(e.s_s), num(e.point.x), num(e.point.y), num(e.angle), num(e.tangency_residual), kind]);
    }
    let count = |k: surfdyn::manifolds::EventKind| found.events.iter().filter(|e| e.kind == k).count();
    let result = json!({
        "orbit": o,
        "unstable": { "length": wu.length(), "points": wu.len() },
        "stable": { "length": ws.length(), "points": ws.len() },
        "overlap": found.overlap,
        "transversal": count(surfdyn::manifolds::EventKind::Transversal),
        "tangency_candidates": count(surfdyn::manifolds::EventKind::TangencyCandidate),
        "events": found.events,
    });
    ok(result, vec![polyline_table("wu.csv", &wu), polyline_table("ws.csv", &ws), events])
}

pub fn forge(map: Arc<dyn SurfaceMap>, cfg: &ExperimentConfig, exec: Exec) -> Run {
    let c = cfg.forge_tangency.clone().unwrap_or_default();
    let o = find_orbit(map.as_ref(), c.orbit_seed, c.period)?;
    let opts = ForgeOptions {
        epsilon: c.epsilon,
        x1: c.x1,
        c1_samples: c.c1_samples,
        exec,
    };
    let r = forge_tangency(map, &o, &opts)?;
    let mut curve = Table::new("forge_curve.csv", &["x", "y"]);
    for p in r.perturbed_curve(c.curve_samples) {
        curve.push(vec![num(p.x), num(p.y)]);
    }
    ok(serde_json::to_value(&r)?, vec![curve])
}

pub fn distortion(map: &dyn SurfaceMap, cfg: &ExperimentConfig) -> Run {
    let c = cfg.distortion.clone().unwrap_or_default();
    let o = find_orbit(map, c.orbit_seed, c.period)?;
    let wu = grow(map, &local_seed(map, &o, ManifoldKind::Unstable, c.seed_radius)?, &GrowOptions::new(c.arclength))?;
    let mid = 0.5 * wu.length();
    if !(c.segment[0] < c.segment[1] && c.segment[1] <= mid) {
        return Err(CliError::config("distortion.segment", format!("must satisfy s0 < s1 <= {mid}")));
    }
    let j = wu.slice(mid + c.segment[0], mid + c.segment[1]);
    let d = distortion_check(map, &j, c.n)?;
    let s = stable_decay_check(map, &o, c.stable_seed_length, c.stable_steps)?;

    let mut per_point = Table::new("distortion.csv", &["index", "arclength", "x", "y", "backward_norm"]);
    for (i, ((p, a), b)) in j.points.iter().zip(&j.arclength).zip(&d.backward_norms).enumerate() {
        per_point.push(vec![i.to_string(), num(*a), num(p.x), num(p.y), num(*b)]);
    }
    let mut lengths = Table::new("lengths.csv", &["series", "k", "length"]);
    for (k, l) in d.lengths.iter().enumerate() {
        lengths.push(vec!["unstable_backward".into(), k.to_string(), num(*l)]);
    }
    for (k, l) in s.lengths.iter().enumerate() {
        lengths.push(vec!["stable_forward".into(), k.to_string(), num(*l)]);
    }
    let holds = d.ratio_holds && d.length_bound_holds && s.within_bound;
    Ok(Outcome {
        status: if holds { Status::Ok } else { Status::Fail },
        result: json!({ "orbit": o, "distortion": d, "stable_decay": s }),
        tables: vec![per_point, lengths],
    })
}

pub fn verdict(map: &dyn SurfaceMap, cfg: &ExperimentConfig, exec: Exec) -> Run {
    let c = cfg.verdict.clone().unwrap_or_default();
    let ladder = cfg.thresholds.resolve()?;
    let points = match &c.points {
        Some(p) => p.iter().map(|q| point(*q)).collect(),
        None => orbit_sample(map, &c.orbit)?,
    };
    let source = SplittingSource::FiniteTime {
        horizon: c.splitting_horizon,
    };
    let v = hyperbolicity_verdict(map, &points, &source, c.horizon, ladder.gamma1, ladder.gamma2, exec)?;
    let mut t = Table::new("verdict.csv", &["index", "x", "y", "verdict", "e_pliss_times", "e_rate", "f_rate"]);
    for (i, d) in v.points.iter().enumerate() {
        let name = serde_json::to_value(d.verdict)?.as_str().unwrap_or_default().to_string();
        let rate = |e: &Option<surfdyn::domination::Envelope>| e.map_or(String::new(), |e| num(e.rate));
        t.push(vec![i.to_string(), num(d.point.x), num(d.point.y), name, d.e_pliss_times.to_string(), rate(&d.e_envelope), rate(&d.f_envelope)]);
    }
    let status = match v.verdict {
        HyperbolicityVerdict::Contradicted => Status::Contradicted,
        _ => Status::Ok,
    };
    Ok(Outcome {
        status,
        result: json!({ "ladder": ladder, "report": v }),
        tables: vec![t],
    })
}

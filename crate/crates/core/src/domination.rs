//! Dominated splittings: finite-time candidates, orbitwise ratios, the cone
//! certificate and a sample-based hyperbolicity verdict.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Exec};
use crate::linalg::{cone_ray_images, Cone, ConeFlavor, Direction, Mat2, Point, Rect, Splitting, Vec2};
use crate::maps::{cocycle, SurfaceMap};
use crate::pliss::pliss_times;

pub const DEFAULT_HORIZON: usize = 20;
const DEGENERATE_GAP: f64 = 1e-12;

/// `E`: most contracted direction of `Df^T_x`; `F`: most contracted direction
/// of `Df^{-T}_x`, i.e. the direction expanded most by the past.
pub fn finite_time_splitting(map: &dyn SurfaceMap, x: Point, t: usize) -> Result<Splitting> {
    if t == 0 {
        return Err(Error::InvalidParameter("splitting horizon must be positive".into()));
    }
    let fwd = cocycle(map, x, t as i64)?;
    let bwd = cocycle(map, x, -(t as i64))?;
    let sf = fwd.product.svd_with_det(fwd.det);
    let sb = bwd.product.svd_with_det(bwd.det);
    if sf.relative_gap() < DEGENERATE_GAP || sb.relative_gap() < DEGENERATE_GAP {
        return Err(Error::DegenerateSingularValues);
    }
    Splitting::new(Direction::new(sf.v_min)?, Direction::new(sb.v_min)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplittingSource {
    FiniteTime { horizon: usize },
    /// The same splitting at every base point (e.g. eigenlines of a linear map).
    Exact { splitting: Splitting },
}

impl Default for SplittingSource {
    fn default() -> Self {
        SplittingSource::FiniteTime {
            horizon: DEFAULT_HORIZON,
        }
    }
}

impl SplittingSource {
    pub fn at(&self, map: &dyn SurfaceMap, x: Point) -> Result<Splitting> {
        match *self {
            SplittingSource::FiniteTime { horizon } => finite_time_splitting(map, x, horizon),
            SplittingSource::Exact { splitting } => Ok(splitting),
        }
    }
}

/// Envelope `s_k ≤ C·rate^k` of a sequence with `s_0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub c: f64,
    pub rate: f64,
    /// `rate < 1`.
    pub decays: bool,
    /// The envelope also holds with `C = 1`.
    pub c_equals_one: bool,
}

/// `rate = max_{k ≥ 5} s_k^{1/k}` (all `k ≥ 1` for short sequences) and
/// `C = max_k s_k/rate^k`, so the envelope dominates every sample.
pub fn fit_envelope(seq: &[f64]) -> Envelope {
    let n = seq.len().saturating_sub(1);
    let k0 = if n >= 5 { 5 } else { 1 };
    let rate = (k0..=n)
        .map(|k| (seq[k].ln() / k as f64).exp())
        .fold(0.0, f64::max);
    let rate = if n == 0 { 1.0 } else { rate };
    let c = seq
        .iter()
        .enumerate()
        .map(|(k, s)| (s.ln() - k as f64 * rate.ln()).exp())
        .fold(0.0, f64::max);
    Envelope {
        c,
        rate,
        decays: rate < 1.0,
        c_equals_one: c <= 1.0 + 1e-12,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationEstimate {
    pub base_point: Point,
    pub horizon: usize,
    pub splitting: Splitting,
    /// `r_k = ‖Df^k|E(x)‖·‖Df^{-k}|F(f^k x)‖`, `k = 0..=horizon`.
    pub ratios: Vec<f64>,
    pub envelope: Envelope,
    pub dominated: bool,
}

/// Per-step norms of the cocycle along the line that contracts in the
/// direction of travel (`E` for `n > 0`, `F` for `n < 0`).
///
/// Pushing a contracted line along the orbit amplifies its error by the
/// domination ratio at each step, so the line is taken from `source` at the
/// far end of the segment and pulled back instead. An exact source is pushed
/// forward from `x` as given. Returns the line at `x`.
pub fn contracting_line_norms(
    map: &dyn SurfaceMap,
    x: Point,
    source: &SplittingSource,
    n: i64,
) -> Result<(Direction, Vec<f64>)> {
    let seg = cocycle(map, x, n)?;
    if let SplittingSource::Exact { splitting } = source {
        let line = if n >= 0 { splitting.e } else { splitting.f };
        return Ok((line, seg.pushed_norms(line.vector())));
    }
    let end = source.at(map, seg.end_point())?;
    let mut v = if n >= 0 { end.e } else { end.f }.vector();
    let mut norms = vec![0.0; seg.steps.len()];
    for (i, m) in seg.steps.iter().enumerate().rev() {
        let w = m.inverse().apply(v);
        let u = w.normalized().ok_or(Error::ZeroVector)?;
        norms[i] = m.apply(u).norm();
        v = u;
    }
    Ok((Direction::new(v)?, norms))
}

fn cumulative(steps: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps.len() + 1);
    out.push(1.0);
    let mut log = 0.0;
    for s in steps {
        log += s.ln();
        out.push(log.exp());
    }
    out
}

/// Cumulative `‖Df^k|_E‖`, `‖Df^k|_F‖` for `k = 0..=n`, with the splitting
/// actually used at `x`.
fn cumulative_norms(
    map: &dyn SurfaceMap,
    x: Point,
    source: &SplittingSource,
    n: usize,
) -> Result<(Splitting, Vec<f64>, Vec<f64>)> {
    let at_x = source.at(map, x)?;
    let (e, e_steps) = contracting_line_norms(map, x, source, n as i64)?;
    let f_steps = cocycle(map, x, n as i64)?.pushed_norms(at_x.f.vector());
    let sp = Splitting::new(e, at_x.f)?;
    Ok((sp, cumulative(&e_steps), cumulative(&f_steps)))
}

/// Ratios along the orbit of `x`, with `F(f^k x)` taken as the image of `F(x)`.
pub fn orbit_domination(
    map: &dyn SurfaceMap,
    x: Point,
    source: &SplittingSource,
    n: usize,
) -> Result<DominationEstimate> {
    let (splitting, e, f) = cumulative_norms(map, x, source, n)?;
    let ratios: Vec<f64> = e.iter().zip(&f).map(|(a, b)| a / b).collect();
    let envelope = fit_envelope(&ratios);
    Ok(DominationEstimate {
        base_point: x,
        horizon: n,
        splitting,
        ratios,
        dominated: envelope.decays,
        envelope,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoDomination {
    /// `‖Df^k|E‖·‖Df^{-k}|F‖²`
    pub sequence1: Vec<f64>,
    /// `‖Df^k|E‖²·‖Df^{-k}|F‖`
    pub sequence2: Vec<f64>,
    pub envelope1: Envelope,
    pub envelope2: Envelope,
}

pub fn two_domination_check(
    map: &dyn SurfaceMap,
    x: Point,
    source: &SplittingSource,
    n: usize,
) -> Result<TwoDomination> {
    let (_, e, f) = cumulative_norms(map, x, source, n)?;
    let sequence1: Vec<f64> = e.iter().zip(&f).map(|(a, b)| a / (b * b)).collect();
    let sequence2: Vec<f64> = e.iter().zip(&f).map(|(a, b)| a * a / b).collect();
    Ok(TwoDomination {
        envelope1: fit_envelope(&sequence1),
        envelope2: fit_envelope(&sequence2),
        sequence1,
        sequence2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub region: Rect,
    pub grid: (usize, usize),
    /// Horizon of the per-box finite-time splitting.
    pub horizon: usize,
    pub half_width: f64,
    /// Each box is sampled on a `k × k` lattice.
    pub samples_per_box: usize,
    /// Only boxes containing one of these points are checked, and the first
    /// such point anchors the box splitting.
    pub restrict_to: Option<Vec<Point>>,
    pub exec: Exec,
}

impl CertifyOptions {
    pub fn new(region: Rect, grid: (usize, usize)) -> Self {
        CertifyOptions {
            region,
            grid,
            horizon: DEFAULT_HORIZON,
            half_width: 0.5,
            samples_per_box: 2,
            restrict_to: None,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    /// Lowest failing box id; the witness is a cone boundary ray whose image
    /// leaves the target cone, absent when the box has no splitting.
    Fail { box_id: usize, witness: Option<Vec2> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxReport {
    pub id: usize,
    pub rect: Rect,
    pub splitting: Option<Splitting>,
    /// Worst padded contraction of the unstable cone under `Df`.
    pub lambda_cu: f64,
    /// Worst padded contraction of the stable cone under `Df⁻¹`.
    pub lambda_cs: f64,
    /// Jacobian variation allowance `δ` added to every sampled check.
    pub padding: f64,
    pub passed: bool,
    pub witness: Option<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeCertificate {
    pub half_width: f64,
    pub horizon: usize,
    pub grid: (usize, usize),
    pub boxes: Vec<BoxReport>,
    /// Number of sampled cone images checked (both flavors).
    pub steps_checked: usize,
    /// Samples whose image or preimage left the covering (not checked).
    pub out_of_cover: usize,
    pub lambda_worst: f64,
    pub verdict: Verdict,
    /// What kind of evidence this is.
    pub note: String,
}

struct Grid<'a> {
    opts: &'a CertifyOptions,
    torus: bool,
    active: Vec<bool>,
}

impl Grid<'_> {
    fn rect(&self, id: usize) -> Rect {
        let (nx, ny) = self.opts.grid;
        let r = self.opts.region;
        let (i, j) = (id % nx, id / nx);
        let (w, h) = (r.width() / nx as f64, r.height() / ny as f64);
        Rect {
            x0: r.x0 + i as f64 * w,
            x1: r.x0 + (i + 1) as f64 * w,
            y0: r.y0 + j as f64 * h,
            y1: r.y0 + (j + 1) as f64 * h,
        }
    }

    /// Active box containing `p`, if any.
    fn locate(&self, p: Point) -> Option<usize> {
        self.cell(p).filter(|id| self.active[*id])
    }

    fn cell(&self, p: Point) -> Option<usize> {
        let r = self.opts.region;
        let (nx, ny) = self.opts.grid;
        let p = if self.torus {
            Vec2::new(p.x - p.x.floor(), p.y - p.y.floor())
        } else {
            p
        };
        if !r.contains(p) {
            return None;
        }
        let i = (((p.x - r.x0) / r.width() * nx as f64) as usize).min(nx - 1);
        let j = (((p.y - r.y0) / r.height() * ny as f64) as usize).min(ny - 1);
        Some(j * nx + i)
    }
}

/// Checks the cone conditions box by box. This is a numerical certificate:
/// the Jacobian is sampled and padded by a Lipschitz estimate, with no
/// directed rounding.
pub fn certify_cones(map: &dyn SurfaceMap, opts: &CertifyOptions) -> Result<ConeCertificate> {
    let (nx, ny) = opts.grid;
    if nx == 0 || ny == 0 || opts.samples_per_box == 0 {
        return Err(Error::InvalidParameter("grid and sample counts must be positive".into()));
    }
    if !(opts.half_width > 0.0 && opts.half_width <= 1.0) {
        return Err(Error::InvalidHalfWidth(opts.half_width));
    }
    let torus = map.phase_space().is_torus();
    let nboxes = nx * ny;
    let mut grid = Grid {
        opts,
        torus,
        active: vec![true; nboxes],
    };
    let mut anchors: Vec<Option<Point>> = (0..nboxes).map(|id| Some(grid.rect(id).center())).collect();
    if let Some(points) = &opts.restrict_to {
        grid.active = vec![false; nboxes];
        anchors = vec![None; nboxes];
        for p in points {
            if let Some(id) = grid.cell(*p) {
                grid.active[id] = true;
                anchors[id].get_or_insert(map.phase_space().reduce(*p));
            }
        }
    }

    let splittings: Vec<Option<Splitting>> = map_indexed(opts.exec, nboxes, |id| {
        anchors[id].and_then(|x| finite_time_splitting(map, x, opts.horizon).ok())
    });

    let active_ids: Vec<usize> = (0..nboxes).filter(|&id| grid.active[id]).collect();
    let reports: Vec<(BoxReport, usize, usize)> = map_indexed(opts.exec, active_ids.len(), |k| {
        check_box(map, opts, &grid, &splittings, active_ids[k])
    });

    let mut boxes = Vec::with_capacity(reports.len());
    let mut steps_checked = 0;
    let mut out_of_cover = 0;
    let mut lambda_worst: f64 = 0.0;
    let mut verdict = Verdict::Pass;
    for (b, checked, skipped) in reports {
        steps_checked += checked;
        out_of_cover += skipped;
        lambda_worst = lambda_worst.max(b.lambda_cu).max(b.lambda_cs);
        if !b.passed && verdict == Verdict::Pass {
            verdict = Verdict::Fail {
                box_id: b.id,
                witness: b.witness,
            };
        }
        boxes.push(b);
    }
    if boxes.is_empty() {
        lambda_worst = f64::INFINITY;
        verdict = Verdict::Fail {
            box_id: 0,
            witness: None,
        };
    }
    Ok(ConeCertificate {
        half_width: opts.half_width,
        horizon: opts.horizon,
        grid: opts.grid,
        boxes,
        steps_checked,
        out_of_cover,
        lambda_worst,
        verdict,
        note: "numerical certificate: sampled Jacobians padded by a sampled Lipschitz bound; not a computer-assisted proof".into(),
    })
}

fn sample_lattice(rect: &Rect, k: usize) -> Vec<Point> {
    let mut pts = Vec::with_capacity(k * k);
    for j in 0..k {
        for i in 0..k {
            pts.push(rect.at((i as f64 + 0.5) / k as f64, (j as f64 + 0.5) / k as f64));
        }
    }
    pts
}

/// Sampled Lipschitz constant of `Df` over the box (corners and lattice).
fn jacobian_lipschitz(map: &dyn SurfaceMap, rect: &Rect, lattice: &[Point]) -> f64 {
    let mut pts = lattice.to_vec();
    pts.extend([
        Vec2::new(rect.x0, rect.y0),
        Vec2::new(rect.x1, rect.y0),
        Vec2::new(rect.x0, rect.y1),
        Vec2::new(rect.x1, rect.y1),
    ]);
    let jac: Vec<Mat2> = pts.iter().map(|p| map.jacobian(*p)).collect();
    let mut lip: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = pts[i].dist(pts[j]);
            if d > 0.0 {
                lip = lip.max((jac[i] - jac[j]).op_norm() / d);
            }
        }
    }
    lip
}

/// Worst padded ratio over the two boundary rays, and the offending ray.
fn padded_ratio(m: &Mat2, cone: &Cone, image: &Splitting, delta: f64) -> (f64, Vec2) {
    let Ok(rays) = cone_ray_images(m, cone, image) else {
        return (f64::INFINITY, cone.boundary_rays()[0]);
    };
    let inv_norm = image.basis().inverse().op_norm();
    let mut worst = (0.0, rays[0].ray);
    for r in rays {
        let eta = inv_norm * delta * r.ray.norm();
        let denom = r.axial.abs() - eta;
        let ratio = if denom <= 0.0 {
            f64::INFINITY
        } else {
            (r.transverse.abs() + eta) / denom
        };
        if ratio > worst.0 {
            worst = (ratio, r.ray);
        }
    }
    worst
}

fn check_box(
    map: &dyn SurfaceMap,
    opts: &CertifyOptions,
    grid: &Grid,
    splittings: &[Option<Splitting>],
    id: usize,
) -> (BoxReport, usize, usize) {
    let rect = grid.rect(id);
    let a = opts.half_width;
    let mut report = BoxReport {
        id,
        rect,
        splitting: splittings[id],
        lambda_cu: f64::INFINITY,
        lambda_cs: f64::INFINITY,
        padding: 0.0,
        passed: false,
        witness: None,
    };
    let Some(sp) = splittings[id] else {
        return (report, 0, 0);
    };
    let lattice = sample_lattice(&rect, opts.samples_per_box);
    let delta = jacobian_lipschitz(map, &rect, &lattice) * rect.diameter();
    report.padding = delta;
    let cu = Cone::new(sp, a, ConeFlavor::Cu).expect("validated half-width");
    let cs = Cone::new(sp, a, ConeFlavor::Cs).expect("validated half-width");

    let (mut lcu, mut lcs) = (0.0f64, 0.0f64);
    let (mut checked, mut skipped) = (0, 0);
    let mut witness = None;
    for x in lattice {
        for flavor in [ConeFlavor::Cu, ConeFlavor::Cs] {
            let (target, m, cone) = match flavor {
                ConeFlavor::Cu => (map.forward(x), map.jacobian(x), &cu),
                ConeFlavor::Cs => (map.backward(x), map.inverse_jacobian(x), &cs),
            };
            let Some(target_id) = grid.locate(target) else {
                skipped += 1;
                continue;
            };
            let Some(target_sp) = splittings[target_id] else {
                // Image box without a splitting cannot receive the cone.
                lcu = f64::INFINITY;
                continue;
            };
            checked += 1;
            let (ratio, ray) = padded_ratio(&m, cone, &target_sp, delta);
            let lambda = ratio / a;
            if lambda >= 1.0 && witness.is_none() {
                witness = Some(ray);
            }
            match flavor {
                ConeFlavor::Cu => lcu = lcu.max(lambda),
                ConeFlavor::Cs => lcs = lcs.max(lambda),
            }
        }
    }
    report.lambda_cu = lcu;
    report.lambda_cs = lcs;
    report.passed = lcu < 1.0 && lcs < 1.0;
    report.witness = if report.passed { None } else { witness };
    (report, checked, skipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperbolicityVerdict {
    HyperbolicEvidence,
    Inconclusive,
    Contradicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDiagnostics {
    pub point: Point,
    pub splitting: Option<Splitting>,
    /// Envelope of `‖Df^k|E‖`.
    pub e_envelope: Option<Envelope>,
    /// Envelope of `‖Df^{-k}|F‖`.
    pub f_envelope: Option<Envelope>,
    /// Pliss hypothesis and density on the per-step `E` norms.
    pub e_pliss_hypothesis: bool,
    pub f_pliss_hypothesis: bool,
    pub e_pliss_times: usize,
    pub verdict: HyperbolicityVerdict,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub points: Vec<PointDiagnostics>,
    pub verdict: HyperbolicityVerdict,
}

fn diagnose(
    map: &dyn SurfaceMap,
    x: Point,
    source: &SplittingSource,
    n: usize,
    gamma1: f64,
    gamma2: f64,
) -> PointDiagnostics {
    let mut d = PointDiagnostics {
        point: x,
        splitting: None,
        e_envelope: None,
        f_envelope: None,
        e_pliss_hypothesis: false,
        f_pliss_hypothesis: false,
        e_pliss_times: 0,
        verdict: HyperbolicityVerdict::Contradicted,
        reason: None,
    };
    // An orbit leaving the domain gives no evidence either way.
    let give_up = |d: &mut PointDiagnostics, e: &Error| {
        if matches!(e, Error::OrbitEscape { .. }) {
            d.verdict = HyperbolicityVerdict::Inconclusive;
        }
    };
    let sp = match source.at(map, x) {
        Ok(sp) => sp,
        Err(e) => {
            give_up(&mut d, &e);
            d.reason = Some(format!("no splitting: {e}"));
            return d;
        }
    };
    d.splitting = Some(sp);
    let (e_steps, f_steps) = match (
        contracting_line_norms(map, x, source, n as i64),
        contracting_line_norms(map, x, source, -(n as i64)),
    ) {
        (Ok((_, e)), Ok((_, f))) => (e, f),
        (Err(e), _) | (_, Err(e)) => {
            give_up(&mut d, &e);
            d.reason = Some(e.to_string());
            return d;
        }
    };
    let e_env = fit_envelope(&cumulative(&e_steps));
    let f_env = fit_envelope(&cumulative(&f_steps));
    d.e_envelope = Some(e_env);
    d.f_envelope = Some(f_env);
    let e_pliss = pliss_times(&e_steps, gamma1, gamma2);
    let f_pliss = pliss_times(&f_steps, gamma1, gamma2);
    if let (Ok(ep), Ok(fp)) = (&e_pliss, &f_pliss) {
        d.e_pliss_hypothesis = ep.hypothesis_holds;
        d.f_pliss_hypothesis = fp.hypothesis_holds;
        d.e_pliss_times = ep.count();
    }
    d.verdict = if !e_env.decays {
        d.reason = Some("no decay along E".into());
        HyperbolicityVerdict::Contradicted
    } else if !f_env.decays {
        d.reason = Some("no decay along F under the inverse".into());
        HyperbolicityVerdict::Contradicted
    } else if d.e_pliss_hypothesis && d.f_pliss_hypothesis {
        HyperbolicityVerdict::HyperbolicEvidence
    } else {
        d.reason = Some("decay slower than gamma1 over the horizon".into());
        HyperbolicityVerdict::Inconclusive
    };
    d
}

/// Per-sample evidence that `‖Df^n|E‖ → 0` and `‖Df^{-n}|F‖ → 0`.
pub fn hyperbolicity_verdict(
    map: &dyn SurfaceMap,
    points: &[Point],
    source: &SplittingSource,
    horizon: usize,
    gamma1: f64,
    gamma2: f64,
    exec: Exec,
) -> Result<VerdictReport> {
    if !(gamma1 > 0.0 && gamma1 < gamma2 && gamma2 < 1.0) {
        return Err(Error::InvalidThresholds { gamma1, gamma2 });
    }
    let diags = map_indexed(exec, points.len(), |i| {
        diagnose(map, points[i], source, horizon, gamma1, gamma2)
    });
    let verdict = if diags.iter().any(|d| d.verdict == HyperbolicityVerdict::Contradicted) {
        HyperbolicityVerdict::Contradicted
    } else if !diags.is_empty()
        && diags
            .iter()
            .all(|d| d.verdict == HyperbolicityVerdict::HyperbolicEvidence)
    {
        HyperbolicityVerdict::HyperbolicEvidence
    } else {
        HyperbolicityVerdict::Inconclusive
    };
    Ok(VerdictReport {
        points: diags,
        verdict,
    })
}

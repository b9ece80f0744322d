//! Reverse-shooting search for minimal broken geodesics.
//!
//! For every candidate penultimate y the reverse geodesic z(y) is grown
//! backwards from (G, y) and spliced onto the zero-cost path v from H by a
//! single jump v_n → z_k. The broken geodesic is v_0..v_n, z_k, …, z_0.

use std::cmp::Ordering;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{penultimate_seed, reverse_raw, ReverseStop, Trajectory};
use crate::cost::{h_norm_raw, step_cost_raw, CostMode, GradNorm};
use crate::error::{Error, Result};
use crate::model::{sup_dist, zeta_raw, Histogram, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenStrategy {
    FullGrid,
    QuantilePruned,
    SeededBall,
}

impl FromStr for PenStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_grid" => Ok(PenStrategy::FullGrid),
            "quantile_pruned" => Ok(PenStrategy::QuantilePruned),
            "seeded_ball" => Ok(PenStrategy::SeededBall),
            _ => Err(Error::Config(format!(
                "unknown strategy '{s}' (full_grid | quantile_pruned | seeded_ball)"
            ))),
        }
    }
}

/// How (ν, κ) is chosen when no reverse point enters the starting zone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpliceRule {
    /// argmin over (n, k) of the jump cost C(v_n, z_k).
    Jump,
    /// argmin over (n, k) of the broken-geodesic cost C(v_n, z_k) + λ(z_k..z_0).
    Total,
}

impl FromStr for SpliceRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jump" => Ok(SpliceRule::Jump),
            "total" => Ok(SpliceRule::Total),
            _ => Err(Error::Config(format!("unknown splice rule '{s}' (jump | total)"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Mesh of the penultimate grid.
    pub epsilon: f64,
    /// Jump-cost budget defining the starting zone.
    pub eta: f64,
    /// Boundary threshold for reverse iterates and grid points.
    pub delta: f64,
    pub max_reverse_len: usize,
    pub quantile: f64,
    pub pen_strategy: PenStrategy,
    pub ball_radius: f64,
    pub stages_max: usize,
    pub splice: SpliceRule,
    pub mode: CostMode,
    pub norm: GradNorm,
    pub mean_tol: f64,
    pub mean_max_steps: usize,
    pub runners_up: usize,
}

impl SearchConfig {
    pub fn for_model(p: &ModelParams) -> Self {
        Self {
            epsilon: 1e-4,
            eta: 1e-6,
            delta: p.delta,
            max_reverse_len: 200,
            quantile: 0.05,
            pen_strategy: PenStrategy::SeededBall,
            ball_radius: 4e-3,
            stages_max: 2,
            splice: SpliceRule::Jump,
            mode: CostMode::FirstOrder,
            norm: GradNorm::Sup,
            mean_tol: 1e-10,
            mean_max_steps: 500,
            runners_up: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        pos("epsilon", self.epsilon)?;
        pos("eta", self.eta)?;
        pos("delta", self.delta)?;
        pos("quantile", self.quantile)?;
        pos("ball_radius", self.ball_radius)?;
        pos("mean_tol", self.mean_tol)?;
        if self.quantile > 1.0 {
            return Err(Error::Config(format!("quantile must be ≤ 1, got {}", self.quantile)));
        }
        if self.epsilon > 0.5 {
            return Err(Error::Config("epsilon must be at most 0.5".into()));
        }
        if self.max_reverse_len < 1 || self.stages_max < 1 || self.mean_max_steps < 1 {
            return Err(Error::Config("max_reverse_len, stages_max and mean_max_steps must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// The reverse geodesic entered the starting zone (jump cost ≤ η).
    Complete,
    Incomplete,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub penultimate: Vec<f64>,
    pub cost: f64,
    pub nu: usize,
    pub kappa: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeodesicResult {
    pub path: Trajectory,
    pub penultimate: Histogram,
    /// Number of zero-cost points v_0..v_n kept before the jump.
    pub nu: usize,
    /// Number of terminal-segment points z_k..z_0 (ends at G).
    pub kappa: usize,
    pub status: Status,
    pub stage: usize,
    /// Cost of the preliminary test path through the seed y*.
    pub lambda0: f64,
    pub pen_size: usize,
    /// Size of PEN₂: incomplete, unpruned candidates whose terminal segment
    /// costs less than the first-stage optimum.
    pub stage2_candidates: usize,
    pub stage2_best: Option<f64>,
    pub runners_up: Vec<RankedCandidate>,
}

/// First-stage output plus the PEN₂ candidates needed by a second stage.
#[derive(Clone, Debug)]
pub struct FirstStage {
    pub result: GeodesicResult,
    pub pen2: Vec<Stage2Candidate>,
}

#[derive(Clone, Debug)]
pub struct Stage2Candidate {
    pub y: Vec<f64>,
    /// z_0..z_κ; the last point is the stage-2 target G^y.
    pub points: Vec<Vec<f64>>,
    /// λ of the terminal segment z_κ → … → z_0.
    pub tail_cost: f64,
}

#[derive(Clone, Debug)]
struct Eval {
    y: Vec<f64>,
    cost: f64,
    n: usize,
    k: usize,
    complete: bool,
    stop: ReverseStop,
    tail_k: f64,
}

fn cmp_eval(a: &Eval, b: &Eval) -> Ordering {
    a.cost
        .total_cmp(&b.cost)
        .then((a.n + a.k).cmp(&(b.n + b.k)))
        .then_with(|| {
            for (x, y) in a.y.iter().zip(&b.y) {
                match x.total_cmp(y) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            Ordering::Equal
        })
}

/// v_0 = H, v_{n+1} = ζ(v_n), stopping when the change drops below
/// `mean_tol`, after `mean_max_steps`, or before leaving the δ-interior.
fn mean_points(h: &[f64], cfg: &SearchConfig, p: &ModelParams) -> Vec<Vec<f64>> {
    let mut pts = vec![h.to_vec()];
    let mut next = vec![0.0; p.g()];
    for _ in 0..cfg.mean_max_steps {
        zeta_raw(p, pts.last().unwrap(), &mut next);
        if sup_dist(&next, pts.last().unwrap()) < cfg.mean_tol || next.iter().any(|&v| v < cfg.delta) {
            break;
        }
        pts.push(next.clone());
    }
    pts
}

fn evaluate(p: &ModelParams, cfg: &SearchConfig, g: &[f64], y: &[f64], mean: &[Vec<f64>], cap: f64) -> (Eval, Vec<Vec<f64>>) {
    let (pts, tails, stop) = reverse_raw(p, g, y, cfg.delta, cfg.max_reverse_len, cap, cfg.mode);
    let mut ev = Eval {
        y: y.to_vec(),
        cost: f64::INFINITY,
        n: 0,
        k: 0,
        complete: false,
        stop,
        tail_k: 0.0,
    };
    let mut best_key = f64::INFINITY;
    for k in 1..pts.len() {
        let (mut jbest, mut nbest) = (f64::INFINITY, 0);
        for (n, v) in mean.iter().enumerate() {
            let j = step_cost_raw(p, v, &pts[k], cfg.mode);
            if j < jbest {
                jbest = j;
                nbest = n;
            }
        }
        if jbest <= cfg.eta {
            ev.cost = jbest + tails[k];
            ev.n = nbest;
            ev.k = k;
            ev.tail_k = tails[k];
            ev.complete = true;
            return (ev, pts);
        }
        let key = match cfg.splice {
            SpliceRule::Jump => jbest,
            SpliceRule::Total => jbest + tails[k],
        };
        if key < best_key {
            best_key = key;
            ev.cost = jbest + tails[k];
            ev.n = nbest;
            ev.k = k;
            ev.tail_k = tails[k];
        }
    }
    (ev, pts)
}

fn grid_n(eps: f64) -> i64 {
    (1.0 / eps).round().max(1.0) as i64
}

/// Visit every integer vector i with Σ i = n and lo ≤ i ≤ hi.
fn enumerate_grid(n: i64, lo: &[i64], hi: &[i64], visit: &mut dyn FnMut(&[i64])) {
    fn rec(d: usize, rem: i64, lo: &[i64], hi: &[i64], min_rest: &[i64], max_rest: &[i64], cur: &mut Vec<i64>, visit: &mut dyn FnMut(&[i64])) {
        let g = lo.len();
        if d == g - 1 {
            if rem >= lo[d] && rem <= hi[d] {
                cur[d] = rem;
                visit(cur);
            }
            return;
        }
        let a = lo[d].max(rem - max_rest[d + 1]);
        let b = hi[d].min(rem - min_rest[d + 1]);
        for i in a..=b {
            cur[d] = i;
            rec(d + 1, rem - i, lo, hi, min_rest, max_rest, cur, visit);
        }
    }
    let g = lo.len();
    let mut min_rest = vec![0; g + 1];
    let mut max_rest = vec![0; g + 1];
    for d in (0..g).rev() {
        min_rest[d] = min_rest[d + 1] + lo[d];
        max_rest[d] = max_rest[d + 1] + hi[d];
    }
    let mut cur = vec![0; g];
    rec(0, n, lo, hi, &min_rest, &max_rest, &mut cur, visit);
}

/// Grid points split by first coordinate so the work parallelises.
fn grid_points_par<T: Send>(n: i64, lo: &[i64], hi: &[i64], f: impl Fn(&[f64]) -> Option<T> + Sync) -> Vec<T> {
    let nf = n as f64;
    (lo[0]..=hi[0])
        .into_par_iter()
        .flat_map_iter(|i0| {
            let mut out = Vec::new();
            let mut lo1 = lo.to_vec();
            let mut hi1 = hi.to_vec();
            lo1[0] = i0;
            hi1[0] = i0;
            let mut y = vec![0.0; lo.len()];
            enumerate_grid(n, &lo1, &hi1, &mut |ix| {
                for (a, &b) in y.iter_mut().zip(ix) {
                    *a = b as f64 / nf;
                }
                if let Some(t) = f(&y) {
                    out.push(t);
                }
            });
            out
        })
        .collect()
}

fn interior_bounds(n: i64, g: usize, delta: f64) -> (Vec<i64>, Vec<i64>) {
    let lo = ((delta * n as f64) - 1e-9).ceil().max(0.0) as i64;
    (vec![lo; g], vec![n; g])
}

/// Lower q-quantile of `vals` (the value below which a fraction q lies).
fn lower_quantile(vals: &mut [f64], q: f64) -> f64 {
    let idx = ((q * vals.len() as f64).ceil() as usize).clamp(1, vals.len()) - 1;
    let (_, v, _) = vals.select_nth_unstable_by(idx, |a, b| a.total_cmp(b));
    *v
}

fn build_pen_raw(g: &Histogram, cfg: &SearchConfig, p: &ModelParams) -> Result<Vec<Vec<f64>>> {
    let dim = p.g();
    let n = grid_n(cfg.epsilon);
    let (mut lo, mut hi) = interior_bounds(n, dim, cfg.delta);
    let gs = g.as_slice();
    let pen = match cfg.pen_strategy {
        PenStrategy::FullGrid => grid_points_par(n, &lo, &hi, |y| Some(y.to_vec())),
        PenStrategy::SeededBall => {
            let c = penultimate_seed(g, p)?;
            for j in 0..dim {
                lo[j] = lo[j].max(((c[j] - cfg.ball_radius) * n as f64 - 1e-9).ceil() as i64);
                hi[j] = hi[j].min(((c[j] + cfg.ball_radius) * n as f64 + 1e-9).floor() as i64);
            }
            if lo.iter().zip(&hi).any(|(a, b)| a > b) {
                return Err(Error::EmptyPen);
            }
            grid_points_par(n, &lo, &hi, |y| Some(y.to_vec()))
        }
        PenStrategy::QuantilePruned => {
            let norm = cfg.norm;
            let mut hs: Vec<f64> = grid_points_par(n, &lo, &hi, |y| {
                let mut s = vec![0.0; y.len()];
                Some(h_norm_raw(p, y, gs, norm, &mut s))
            });
            if hs.is_empty() {
                return Err(Error::EmptyPen);
            }
            let thr = lower_quantile(&mut hs, cfg.quantile);
            drop(hs);
            grid_points_par(n, &lo, &hi, |y| {
                let mut s = vec![0.0; y.len()];
                (h_norm_raw(p, y, gs, norm, &mut s) <= thr).then(|| y.to_vec())
            })
        }
    };
    if pen.is_empty() {
        return Err(Error::EmptyPen);
    }
    Ok(pen)
}

/// Candidate penultimate points for target G.
pub fn build_pen_set(g: &Histogram, cfg: &SearchConfig, p: &ModelParams) -> Result<Vec<Histogram>> {
    cfg.validate()?;
    Ok(build_pen_raw(g, cfg, p)?.into_iter().map(Histogram::from_raw).collect())
}

struct Acc {
    best: Option<Eval>,
    top: Vec<Eval>,
    incomplete: Vec<Eval>,
}

fn push_top(top: &mut Vec<Eval>, e: Eval, keep: usize) {
    if keep == 0 || !e.cost.is_finite() {
        return;
    }
    let pos = top.partition_point(|t| cmp_eval(t, &e) == Ordering::Less);
    if pos < keep {
        top.insert(pos, e);
        top.truncate(keep);
    }
}

fn merge(mut a: Acc, b: Acc, keep: usize) -> Acc {
    a.best = match (a.best, b.best) {
        (Some(x), Some(y)) => Some(if cmp_eval(&y, &x) == Ordering::Less { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    };
    for e in b.top {
        push_top(&mut a.top, e, keep);
    }
    a.incomplete.extend(b.incomplete);
    a
}

/// One reverse-shooting pass from H to G over the configured PEN.
pub fn first_stage_search(h: &Histogram, g: &Histogram, cfg: &SearchConfig, p: &ModelParams) -> Result<FirstStage> {
    first_stage_capped(h, g, cfg, p, f64::INFINITY)
}

/// As [`first_stage_search`], with reverse geodesics also pruned once their
/// terminal cost exceeds `extra_cap`.
fn first_stage_capped(h: &Histogram, g: &Histogram, cfg: &SearchConfig, p: &ModelParams, extra_cap: f64) -> Result<FirstStage> {
    cfg.validate()?;
    if h.len() != p.g() || g.len() != p.g() {
        return Err(Error::InvalidHistogram("dimension mismatch".into()));
    }
    if !h.is_interior(cfg.delta) || !g.is_interior(cfg.delta) {
        return Err(Error::Boundary(format!("H and G need every coordinate ≥ δ = {:e}", cfg.delta)));
    }
    let gs = g.as_slice();
    let mean = mean_points(h.as_slice(), cfg, p);

    // preliminary test path through the seed bounds every later terminal segment
    let seed = penultimate_seed(g, p).ok().filter(|y| y.is_interior(cfg.delta));
    let seed_eval = seed.as_ref().map(|y| evaluate(p, cfg, gs, y.as_slice(), &mean, f64::INFINITY).0);
    let lambda0 = seed_eval.as_ref().map_or(f64::INFINITY, |e| e.cost);
    let cap = lambda0.min(extra_cap);

    let pen = build_pen_raw(g, cfg, p)?;
    let keep = cfg.runners_up;
    let acc = pen
        .par_iter()
        .fold(
            || Acc { best: None, top: Vec::new(), incomplete: Vec::new() },
            |mut acc, y| {
                let (ev, _) = evaluate(p, cfg, gs, y, &mean, cap);
                if !ev.complete && ev.stop != ReverseStop::Pruned && ev.cost.is_finite() {
                    acc.incomplete.push(ev.clone());
                }
                push_top(&mut acc.top, ev.clone(), keep + 1);
                if ev.cost.is_finite() && acc.best.as_ref().is_none_or(|b| cmp_eval(&ev, b) == Ordering::Less) {
                    acc.best = Some(ev);
                }
                acc
            },
        )
        .reduce(|| Acc { best: None, top: Vec::new(), incomplete: Vec::new() }, |a, b| merge(a, b, keep + 1));

    let mut best = acc.best;
    if let Some(se) = seed_eval {
        if se.cost.is_finite() && best.as_ref().is_none_or(|b| cmp_eval(&se, b) == Ordering::Less) {
            best = Some(se);
        }
    }
    let best = best.ok_or_else(|| Error::NoSplice(format!("none of {} penultimate points produced a finite splice", pen.len())))?;
    let lambda1 = best.cost;

    // the prefix z_0..z_k does not depend on the cap
    let (pts, _, _) = reverse_raw(p, gs, &best.y, cfg.delta, cfg.max_reverse_len, f64::INFINITY, cfg.mode);
    let mut points: Vec<Histogram> = mean[..=best.n].iter().cloned().map(Histogram::from_raw).collect();
    points.extend(pts[..=best.k].iter().rev().cloned().map(Histogram::from_raw));
    let path = Trajectory::evaluate(points, p, cfg.mode);

    let mut pen2: Vec<Stage2Candidate> = acc
        .incomplete
        .into_iter()
        .filter(|e| e.tail_k < lambda1)
        .map(|e| {
            let (mut pts, _, _) = reverse_raw(p, gs, &e.y, cfg.delta, e.k, f64::INFINITY, cfg.mode);
            pts.truncate(e.k + 1);
            Stage2Candidate { y: e.y, points: pts, tail_cost: e.tail_k }
        })
        .collect();
    pen2.sort_by(|a, b| a.tail_cost.total_cmp(&b.tail_cost).then_with(|| lex(&a.y, &b.y)));

    let runners_up = acc
        .top
        .iter()
        .filter(|e| e.y != best.y)
        .take(keep)
        .map(|e| RankedCandidate { penultimate: e.y.clone(), cost: e.cost, nu: e.n + 1, kappa: e.k + 1 })
        .collect();

    let result = GeodesicResult {
        penultimate: Histogram::from_raw(best.y.clone()),
        nu: best.n + 1,
        kappa: best.k + 1,
        status: if best.complete { Status::Complete } else { Status::Incomplete },
        stage: 1,
        lambda0,
        pen_size: pen.len(),
        stage2_candidates: pen2.len(),
        stage2_best: None,
        runners_up,
        path,
    };
    Ok(FirstStage { result, pen2 })
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// First stage, then (if `stages_max ≥ 2` and PEN₂ is non-empty) a second
/// stage: each G^y = z_κ(y) becomes a target for a first-stage search from H,
/// and the result is joined to the terminal segment z_κ → … → G. Stages
/// beyond the second are not attempted.
pub fn multi_stage_search(h: &Histogram, g: &Histogram, cfg: &SearchConfig, p: &ModelParams) -> Result<GeodesicResult> {
    let FirstStage { mut result, pen2 } = first_stage_search(h, g, cfg, p)?;
    if cfg.stages_max < 2 || pen2.is_empty() {
        return Ok(result);
    }
    let mut sub = cfg.clone();
    sub.stages_max = 1;
    sub.runners_up = 0;
    // a quantile PEN scans the whole grid; once per candidate is far too slow
    if sub.pen_strategy == PenStrategy::QuantilePruned {
        sub.pen_strategy = PenStrategy::SeededBall;
    }
    let lambda1 = result.path.total_cost;
    let mut best: Option<(f64, Trajectory, usize, Vec<f64>)> = None;
    for cand in &pen2 {
        let gy = Histogram::from_raw(cand.points.last().unwrap().clone());
        // a head costing more than λ1 − λ(TG) cannot improve on stage one
        let Ok(first) = first_stage_capped(h, &gy, &sub, p, lambda1 - cand.tail_cost) else { continue };
        let head = first.result.path;
        let mut points = head.points;
        points.extend(cand.points[..cand.points.len() - 1].iter().rev().cloned().map(Histogram::from_raw));
        let traj = Trajectory::evaluate(points, p, cfg.mode);
        let cost = traj.total_cost;
        let better = match &best {
            None => true,
            Some((c, t, _, y)) => cost.total_cmp(c).then(traj.len().cmp(&t.len())).then_with(|| lex(&cand.y, y)) == Ordering::Less,
        };
        if better {
            best = Some((cost, traj, first.result.nu, cand.y.clone()));
        }
    }
    if let Some((cost, traj, nu, y)) = best {
        result.stage2_best = Some(cost);
        if cost < lambda1 {
            result.kappa = traj.len() - nu;
            result.nu = nu;
            result.path = traj;
            result.penultimate = Histogram::from_raw(y);
            result.stage = 2;
            result.status = Status::Incomplete;
        }
    }
    Ok(result)
}

#[derive(Clone, Debug, Serialize)]
pub struct QuantileConstant {
    pub quantile: f64,
    /// Largest h among the lowest `quantile` fraction of grid points.
    pub threshold: f64,
    /// h(y*, G) / threshold.
    pub c: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Landscape {
    pub epsilon: f64,
    pub seed: Histogram,
    pub h_seed: f64,
    pub points: Vec<(Vec<f64>, f64)>,
    pub constants: Vec<QuantileConstant>,
}

/// h(y,G) over every δ-interior grid point of mesh ε, with the quantile
/// constants c = h(y*,G) / h_q.
pub fn pen_landscape(g: &Histogram, eps: f64, quantiles: &[f64], norm: GradNorm, delta: f64, p: &ModelParams) -> Result<Landscape> {
    let n = grid_n(eps);
    let (lo, hi) = interior_bounds(n, p.g(), delta);
    let gs = g.as_slice();
    let points: Vec<(Vec<f64>, f64)> = grid_points_par(n, &lo, &hi, |y| {
        let mut s = vec![0.0; y.len()];
        Some((y.to_vec(), h_norm_raw(p, y, gs, norm, &mut s)))
    });
    if points.is_empty() {
        return Err(Error::EmptyPen);
    }
    let seed = penultimate_seed(g, p)?;
    let mut s = vec![0.0; p.g()];
    let h_seed = h_norm_raw(p, seed.as_slice(), gs, norm, &mut s);
    let mut hs: Vec<f64> = points.iter().map(|(_, h)| *h).collect();
    let constants = quantiles
        .iter()
        .map(|&q| {
            let threshold = lower_quantile(&mut hs, q);
            QuantileConstant { quantile: q, threshold, c: h_seed / threshold }
        })
        .collect();
    Ok(Landscape { epsilon: eps, seed, h_seed, points, constants })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub w: f64,
    pub h: Histogram,
    pub g: Histogram,
    pub total_cost: f64,
    pub length: usize,
    pub penultimate: Histogram,
    pub nu: usize,
    pub kappa: usize,
    pub min_ess: f64,
    pub status: Status,
    pub stage: usize,
    pub path: Trajectory,
}

fn sweep_values(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as i64;
    (0..=n.max(0)).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()
}

fn sweep_row(w: f64, h: Histogram, g: Histogram, cfg: &SearchConfig, p: &ModelParams) -> Result<SweepRow> {
    let r = multi_stage_search(&h, &g, cfg, p)?;
    Ok(SweepRow {
        w,
        total_cost: r.path.total_cost,
        length: r.path.len(),
        penultimate: r.penultimate,
        nu: r.nu,
        kappa: r.kappa,
        min_ess: r.path.min_ess(),
        status: r.status,
        stage: r.stage,
        path: r.path,
        h,
        g,
    })
}

/// Targets G = (G_1, w, 1 − G_1 − w) for w = start, start + step, …, stop (g = 3).
pub fn sweep_targets(h: &Histogram, g1: f64, range: (f64, f64, f64), cfg: &SearchConfig, p: &ModelParams) -> Result<Vec<SweepRow>> {
    if p.g() != 3 {
        return Err(Error::Config("target sweeps are defined for three genotypes".into()));
    }
    sweep_values(range.0, range.1, range.2)
        .into_iter()
        .map(|w| {
            let g = Histogram::new(vec![g1, w, 1.0 - g1 - w])?;
            sweep_row(w, h.clone(), g, cfg, p)
        })
        .collect()
}

/// Initial histograms H = (w, (1 − w)/2, (1 − w)/2) for w over the range (g = 3).
pub fn sweep_initials(g: &Histogram, range: (f64, f64, f64), cfg: &SearchConfig, p: &ModelParams) -> Result<Vec<SweepRow>> {
    if p.g() != 3 {
        return Err(Error::Config("initial-histogram sweeps are defined for three genotypes".into()));
    }
    sweep_values(range.0, range.1, range.2)
        .into_iter()
        .map(|w| {
            let h = Histogram::new(vec![w, (1.0 - w) / 2.0, (1.0 - w) / 2.0])?;
            sweep_row(w, h, g.clone(), cfg, p)
        })
        .collect()
}

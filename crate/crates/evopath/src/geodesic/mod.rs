//! Zero-cost flow, the reverse recurrence x = χ(y, z) and reverse shooting.

mod search;

pub use search::{
    build_pen_set, first_stage_search, multi_stage_search, pen_landscape, sweep_initials, sweep_targets,
    FirstStage, GeodesicResult, Landscape, PenStrategy, QuantileConstant, RankedCandidate,
    SearchConfig, SpliceRule, Stage2Candidate, Status, SweepRow,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cost::{step_cost_raw, CostMode};
use crate::error::{Error, Result};
use crate::model::{ess_min, sup_dist, zeta_raw, Histogram, ModelParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<Histogram>,
    pub step_costs: Vec<f64>,
    pub total_cost: f64,
}

impl Trajectory {
    pub fn new(points: Vec<Histogram>, step_costs: Vec<f64>) -> Result<Self> {
        if points.len() != step_costs.len() + 1 && !(points.is_empty() && step_costs.is_empty()) {
            return Err(Error::InvalidHistogram(format!(
                "{} points need {} step costs, got {}",
                points.len(),
                points.len().saturating_sub(1),
                step_costs.len()
            )));
        }
        let total_cost = step_costs.iter().fold(0.0, |a, c| a + c);
        Ok(Self { points, step_costs, total_cost })
    }

    pub fn empty() -> Self {
        Self { points: Vec::new(), step_costs: Vec::new(), total_cost: 0.0 }
    }

    /// Evaluate step costs along `points` (first order falls back to exact
    /// where the expansion is unreliable).
    pub fn evaluate(points: Vec<Histogram>, p: &ModelParams, mode: CostMode) -> Self {
        let step_costs = points.windows(2).map(|w| step_cost_raw(p, w[0].as_slice(), w[1].as_slice(), mode)).collect();
        Self::new(points, step_costs).expect("lengths agree")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min_ess(&self) -> f64 {
        self.points.iter().map(|h| h.ess_min()).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MeanPath {
    pub trajectory: Trajectory,
    pub converged: bool,
}

/// Iterates h ← ζ(h) from `h1` until the sup-norm change drops below `tol`
/// or `max_steps` steps were taken. The point that fails to move by `tol` is
/// not appended, so a fixed point yields a single-point path.
pub fn mean_trajectory(h1: &Histogram, p: &ModelParams, tol: f64, max_steps: usize) -> Result<MeanPath> {
    if h1.len() != p.g() {
        return Err(Error::InvalidHistogram("dimension mismatch".into()));
    }
    let mut points = vec![h1.clone()];
    let mut next = vec![0.0; p.g()];
    let mut converged = false;
    for _ in 0..max_steps {
        zeta_raw(p, points.last().unwrap().as_slice(), &mut next);
        if sup_dist(&next, points.last().unwrap().as_slice()) < tol {
            converged = true;
            break;
        }
        points.push(Histogram::from_raw(next.clone()));
    }
    let n = points.len();
    Ok(MeanPath { trajectory: Trajectory::new(points, vec![0.0; n - 1])?, converged })
}

/// Limit of the zero-cost flow from `h1`, iterated to machine precision.
pub fn terminal_fixed_point(h1: &Histogram, p: &ModelParams) -> Result<Histogram> {
    if h1.len() != p.g() {
        return Err(Error::InvalidHistogram("dimension mismatch".into()));
    }
    let mut cur = h1.as_slice().to_vec();
    let mut next = vec![0.0; p.g()];
    // stop once the change is at rounding level and no longer shrinking
    let mut last_change = f64::INFINITY;
    for _ in 0..1_000_000 {
        zeta_raw(p, &cur, &mut next);
        let change = sup_dist(&next, &cur);
        std::mem::swap(&mut cur, &mut next);
        if change == 0.0 || (change < 1e-15 && change >= last_change) {
            break;
        }
        last_change = change;
    }
    Ok(Histogram::normalized(cur))
}

/// First-order expansion of the terminal fixed point: with s the fittest
/// genotype reachable from spt(h1),
/// h(i) ≈ m Q_si F_s / (F_s − F_i) for reachable i ≠ s, h(s) ≈ 1 − Σ.
pub fn fixed_point_expansion(h1: &Histogram, p: &ModelParams) -> Histogram {
    let reach = p.reachable_from(&h1.support());
    let s = (0..p.g()).rev().find(|&j| reach[j]).expect("support is nonempty");
    let mut v = vec![0.0; p.g()];
    for i in 0..p.g() {
        if i != s && reach[i] {
            v[i] = p.m * p.q[s][i] * p.f[s] / (p.f[s] - p.f[i]);
        }
    }
    v[s] = 1.0 - v.iter().sum::<f64>();
    Histogram::from_raw(v)
}

/// Predecessor x of the pair (y, z) on an interior geodesic, to first order in m.
pub fn reverse_step(y: &Histogram, z: &Histogram, p: &ModelParams) -> Result<Histogram> {
    if y.len() != p.g() || z.len() != p.g() {
        return Err(Error::InvalidHistogram("dimension mismatch".into()));
    }
    if !y.is_positive() || !z.is_positive() {
        return Err(Error::Boundary("reverse step needs interior y and z".into()));
    }
    let mut out = vec![0.0; p.g()];
    if !chi_raw(p, y.as_slice(), z.as_slice(), &mut out) {
        return Err(Error::NonFinite("reverse step".into()));
    }
    Ok(Histogram::from_raw(out))
}

/// x = x̂ (1 + m w) with x̂ ∝ (y/F) exp(F/⟨F,y⟩ − z/y) and w = α + β − ⟨x̂, α + β⟩,
/// where α and β are the m-corrections of ∂_y C(x̂, y) and ∂_y C(y, z).
/// Clamped and renormalised; false on non-finite intermediate values.
pub(crate) fn chi_raw(p: &ModelParams, y: &[f64], z: &[f64], out: &mut [f64]) -> bool {
    let g = p.g();
    let s = p.dot_f(y);
    let mut big_x = [0.0f64; 16];
    let mut big_x_heap;
    let xx: &mut [f64] = if g <= 16 {
        &mut big_x[..g]
    } else {
        big_x_heap = vec![0.0; g];
        &mut big_x_heap
    };
    let mut tot = 0.0;
    for j in 0..g {
        xx[j] = y[j] / p.f[j] * (p.f[j] / s - z[j] / y[j]).exp();
        tot += xx[j];
    }
    if !(tot.is_finite() && tot > 0.0) {
        return false;
    }
    for j in 0..g {
        out[j] = xx[j] / tot;
    }
    if p.m != 0.0 {
        let mut w = vec![0.0; g];
        for &(j, k, q) in p.pairs() {
            // α: correction of ∂_y C(x̂, y)
            let ea = (-y[j] / (p.f[j] * out[j]) + y[k] / (p.f[k] * out[k])).exp();
            w[j] += q * ea;
            w[k] -= (p.f[j] * xx[j]) / (p.f[k] * xx[k]) * q * ea;
            // β: correction of ∂_y C(y, z)
            let eb = (-z[j] / (p.f[j] * y[j]) + z[k] / (p.f[k] * y[k])).exp();
            w[j] += q * (p.f[j] - (p.f[j] + z[j] / y[j]) * eb);
            w[k] += z[k] / (p.f[k] * y[k] * y[k]) * p.f[j] * y[j] * q * eb;
        }
        let mean: f64 = (0..g).map(|j| out[j] * w[j]).sum();
        let mut tot = 0.0;
        for j in 0..g {
            out[j] = (out[j] * (1.0 + p.m * (w[j] - mean))).max(0.0);
            tot += out[j];
        }
        if !(tot.is_finite() && tot > 0.0) {
            return false;
        }
        for v in out.iter_mut() {
            *v /= tot;
        }
    }
    out.iter().all(|v| v.is_finite())
}

/// Approximate minimiser y* of h(·, G): solves Φ(y) = G written as the
/// linear system Σ_j F_j y_j − F_i y_i / G_i = 0 (i < g), Σ_j y_j = 1.
pub fn penultimate_seed(g_target: &Histogram, p: &ModelParams) -> Result<Histogram> {
    let g = p.g();
    if g_target.len() != g {
        return Err(Error::InvalidHistogram("dimension mismatch".into()));
    }
    if !g_target.is_positive() {
        return Err(Error::Boundary("target must be interior".into()));
    }
    let mut a = DMatrix::<f64>::zeros(g, g);
    for i in 0..g - 1 {
        for j in 0..g {
            a[(i, j)] = p.f[j];
        }
        a[(i, i)] = (1.0 - 1.0 / g_target[i]) * p.f[i];
    }
    for j in 0..g {
        a[(g - 1, j)] = 1.0;
    }
    let sv = a.clone().singular_values();
    let cond = sv.max() / sv.min();
    if !cond.is_finite() || cond > 1e14 {
        return Err(Error::Singular { cond });
    }
    let mut rhs = DVector::<f64>::zeros(g);
    rhs[g - 1] = 1.0;
    let y = a.lu().solve(&rhs).ok_or(Error::Singular { cond })?;
    let v: Vec<f64> = y.iter().copied().collect();
    if v.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidHistogram(format!("seed {v:?} leaves the simplex interior")));
    }
    crate::model::validate_histogram(&v, 1e-9)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReverseStop {
    /// The next iterate would have essential minimum below δ.
    Boundary,
    MaxLen,
    /// Terminal-segment cost exceeded the supplied cap.
    Pruned,
    NonFinite,
}

/// z_0 = G, z_1 = y, z_{k+1} = χ(z_k, z_{k−1}), truncated as described by `stop`.
#[derive(Clone, Debug, Serialize)]
pub struct ReverseGeodesic {
    pub points: Vec<Histogram>,
    /// tail_costs[k] = Σ_{i=1..k} C(z_i, z_{i−1}); tail_costs[0] = 0.
    pub tail_costs: Vec<f64>,
    pub stop: ReverseStop,
}

impl ReverseGeodesic {
    /// Index of the last kept point when the iteration ran into the boundary.
    pub fn k_ter(&self) -> Option<usize> {
        (self.stop == ReverseStop::Boundary).then(|| self.points.len() - 1)
    }
}

/// Raw reverse iteration shared by the public wrapper and the search.
pub(crate) fn reverse_raw(
    p: &ModelParams,
    g: &[f64],
    y: &[f64],
    delta: f64,
    max_len: usize,
    cap: f64,
    mode: CostMode,
) -> (Vec<Vec<f64>>, Vec<f64>, ReverseStop) {
    let mut pts = vec![g.to_vec(), y.to_vec()];
    let c1 = step_cost_raw(p, y, g, mode);
    let mut tails = vec![0.0, c1];
    if !(c1 <= cap) {
        pts.pop();
        tails.pop();
        return (pts, tails, ReverseStop::Pruned);
    }
    loop {
        if pts.len() - 1 >= max_len {
            return (pts, tails, ReverseStop::MaxLen);
        }
        let k = pts.len() - 1;
        let mut next = vec![0.0; p.g()];
        if !chi_raw(p, &pts[k], &pts[k - 1], &mut next) {
            return (pts, tails, ReverseStop::NonFinite);
        }
        if ess_min(&next) < delta || next.iter().any(|&v| v < delta) {
            return (pts, tails, ReverseStop::Boundary);
        }
        let t = tails[k] + step_cost_raw(p, &next, &pts[k], mode);
        if !(t <= cap) {
            return (pts, tails, ReverseStop::Pruned);
        }
        pts.push(next);
        tails.push(t);
    }
}

/// Truncated reverse geodesic from (G, y). `cap` bounds the terminal-segment
/// cost (use +∞ for none).
pub fn reverse_geodesic(
    g_target: &Histogram,
    y: &Histogram,
    cfg: &SearchConfig,
    p: &ModelParams,
    cap: f64,
) -> Result<ReverseGeodesic> {
    if !g_target.is_interior(cfg.delta) || !y.is_interior(cfg.delta) {
        return Err(Error::Boundary(format!("G and y must have every coordinate ≥ δ = {:e}", cfg.delta)));
    }
    let (pts, tails, stop) = reverse_raw(p, g_target.as_slice(), y.as_slice(), cfg.delta, cfg.max_reverse_len, cap, cfg.mode);
    Ok(ReverseGeodesic { points: pts.into_iter().map(Histogram::from_raw).collect(), tail_costs: tails, stop })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mean_step;

    fn hist(v: &[f64]) -> Histogram {
        Histogram::new(v.to_vec()).unwrap()
    }

    #[test]
    fn mean_path_from_fixed_point_is_single_point() {
        let p = ModelParams::reference();
        let e3 = Histogram::vertex(3, 2);
        let mp = mean_trajectory(&e3, &p, 1e-12, 100).unwrap();
        assert_eq!(mp.trajectory.len(), 1);
        assert!(mp.converged);
    }

    #[test]
    fn mean_path_reference_fixates_genotype_three() {
        let p = ModelParams::reference();
        let h = hist(&[0.99, 0.005, 0.005]);
        let mp = mean_trajectory(&h, &p, 1e-10, 5000).unwrap();
        assert!(mp.converged);
        let last = mp.trajectory.points.last().unwrap();
        assert!(last[2] > 1.0 - 1e-6);
        assert_eq!(mp.trajectory.total_cost, 0.0);
        // genotype 2 stays below 0.1 along the mean path
        assert!(mp.trajectory.points.iter().all(|h| h[1] < 0.1));
    }

    #[test]
    fn fixed_point_matches_expansion() {
        let q = vec![vec![0.0, 0.3, 0.2], vec![0.4, 0.0, 0.5], vec![0.25, 0.5, 0.0]];
        let f = vec![2.0, 3.0, 5.0];
        let h1 = hist(&[0.5, 0.3, 0.2]);
        let mut errs = Vec::new();
        for m in [1e-6, 5e-7] {
            let p = ModelParams::new(f.clone(), q.clone(), m, 1000).unwrap();
            let it = terminal_fixed_point(&h1, &p).unwrap();
            let z = mean_step(&it, &p).unwrap();
            assert!(z.sup_dist(&it) < 1e-14);
            let ex = fixed_point_expansion(&h1, &p);
            errs.push(it.sup_dist(&ex));
            assert!(it.sup_dist(&ex) < 100.0 * m * m, "m={m}: {}", it.sup_dist(&ex));
        }
        assert!(errs[1] < errs[0] / 3.0);
    }

    #[test]
    fn reverse_step_inverts_mean_flow() {
        let p = ModelParams::reference();
        for x0 in [[0.5, 0.3, 0.2], [0.2, 0.3, 0.5], [0.7, 0.2, 0.1]] {
            let x0 = hist(&x0);
            let y = mean_step(&x0, &p).unwrap();
            let z = mean_step(&y, &p).unwrap();
            let x = reverse_step(&y, &z, &p).unwrap();
            assert!(x.sup_dist(&x0) < 1e-10, "{}", x.sup_dist(&x0));
        }
    }

    #[test]
    fn reverse_step_without_mutation_is_closed_form() {
        let p = ModelParams::reference().with_m(0.0).unwrap();
        let y = hist(&[0.45, 0.3, 0.25]);
        let z = hist(&[0.35, 0.35, 0.3]);
        let x = reverse_step(&y, &z, &p).unwrap();
        let s = p.dot_f(y.as_slice());
        let raw: Vec<f64> = (0..3).map(|j| y[j] / p.f[j] * (p.f[j] / s - z[j] / y[j]).exp()).collect();
        let t: f64 = raw.iter().sum();
        for j in 0..3 {
            assert!((x[j] - raw[j] / t).abs() < 1e-15);
        }
    }

    #[test]
    fn seed_reference_target() {
        let p = ModelParams::reference();
        let y = penultimate_seed(&hist(&[0.35, 0.35, 0.3]), &p).unwrap();
        for (a, b) in y.as_slice().iter().zip([0.47430, 0.31043, 0.21527]) {
            assert!((a - b).abs() < 1e-4);
        }
        assert!((y.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        // Φ(y*) = G
        let phi = crate::model::growth_map(&y, &p).unwrap();
        assert!(phi.sup_dist(&hist(&[0.35, 0.35, 0.3])) < 1e-12);
    }

    #[test]
    fn reverse_geodesic_rejects_boundary_penultimate() {
        let p = ModelParams::reference();
        let cfg = SearchConfig::for_model(&p);
        let g = hist(&[0.35, 0.35, 0.3]);
        let y = hist(&[0.5, 0.5 - 1e-6, 1e-6]);
        assert!(reverse_geodesic(&g, &y, &cfg, &p, f64::INFINITY).is_err());
    }

    #[test]
    fn reverse_geodesic_retraces_mean_path() {
        let p = ModelParams::reference();
        let cfg = SearchConfig::for_model(&p);
        let mut pts = vec![hist(&[0.6, 0.25, 0.15])];
        for _ in 0..5 {
            let n = mean_step(pts.last().unwrap(), &p).unwrap();
            pts.push(n);
        }
        let g = pts[5].clone();
        let rg = reverse_geodesic(&g, &pts[4], &cfg, &p, f64::INFINITY).unwrap();
        for k in 0..=5 {
            assert!(rg.points[k].sup_dist(&pts[5 - k]) < 1e-9, "k={k}");
            assert!(rg.tail_costs[k] < 1e-12);
        }
    }
}

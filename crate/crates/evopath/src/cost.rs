//! Rate functions and the one-step cost C(H,G) = min_{r ∈ K(H)} τ(H,r,G).
//!
//! Two evaluation modes share one entry point:
//! * `Exact` solves the stationarity system of τ in the scaled variables
//!   x_jk = r_jk / (m f_jk), f_jk = Q_jk F_j H(j), by a damped fixed point;
//! * `FirstOrder` evaluates the closed-form expansion
//!   KL(G,Φ(H)) + m Σ F_j H(j) Q_jk (1 − U_k/U_j), U_j = exp(G_j / (F_j H(j))).
//!   Its remainder is O(m²).

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{feasibility, psi_raw, Feasibility, Histogram, ModelParams, MutationMatrix, K_SLACK};

pub const EXACT_DAMPING: f64 = 0.5;
pub const EXACT_TOL: f64 = 1e-12;
pub const EXACT_MAX_ITER: usize = 500;

/// Largest fraction m Q_jk U_k/U_j of a colony the first-order minimiser may
/// mutate away before the expansion is considered unreliable.
pub const FIRST_ORDER_GUARD: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    Exact,
    FirstOrder,
}

impl FromStr for CostMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(CostMode::Exact),
            "first_order" | "first-order" => Ok(CostMode::FirstOrder),
            _ => Err(Error::Config(format!("unknown cost mode '{s}' (exact | first_order)"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CostBreakdown {
    pub mode: CostMode,
    pub mut_part: f64,
    pub kl_part: f64,
    /// In exact mode `mut_part + kl_part`; in first-order mode the expansion
    /// itself, which matches the sum only up to O(m²).
    pub total: f64,
    pub minimizer_r: MutationMatrix,
    /// Exact mode: the fixed point reached tolerance without leaving K(H).
    /// First-order mode: the implied minimiser lies inside K(H).
    pub converged: bool,
    pub iterations: usize,
    pub constraint_violation: bool,
}

/// KL(G,J) = Σ_{spt G} G log(G/J); +∞ when spt(G) ⊄ spt(J).
pub fn kl_divergence(g: &Histogram, j: &Histogram) -> f64 {
    kl_raw(g.as_slice(), j.as_slice())
}

pub(crate) fn kl_raw(g: &[f64], j: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&a, &b) in g.iter().zip(j) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            s += a * (a / b).ln();
        }
    }
    s.max(0.0)
}

/// (∂KL/∂G, ∂KL/∂J) = (1 + log G − log J, −G/J), coordinatewise.
pub fn kl_partials(g: &Histogram, j: &Histogram) -> (Vec<f64>, Vec<f64>) {
    let dg = g
        .as_slice()
        .iter()
        .zip(j.as_slice())
        .map(|(&a, &b)| if a > 0.0 { 1.0 + a.ln() - b.ln() } else { f64::NEG_INFINITY })
        .collect();
    let dj = g.as_slice().iter().zip(j.as_slice()).map(|(&a, &b)| -a / b).collect();
    (dg, dj)
}

/// Poisson rate of the mutation counts:
/// Σ over {M_jk H(j) > 0} of μ_jk + r_jk log(r_jk / (e μ_jk)), μ_jk = m Q_jk F_j H(j).
pub fn mut_rate(r: &MutationMatrix, h: &Histogram, p: &ModelParams) -> Result<f64> {
    r.check_in_k(h, p)?;
    Ok(mut_raw(p, h.as_slice(), r.rows()))
}

fn mut_raw(p: &ModelParams, h: &[f64], r: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for &(j, k, q) in p.pairs() {
        let mu = p.m * q * p.f[j] * h[j];
        if mu > 0.0 {
            let x = r[j][k];
            s += if x > 0.0 { mu - x + x * (x / mu).ln() } else { mu };
        }
    }
    s.max(0.0)
}

/// τ(H,r,G) = mut(r,H) + KL(G, Ψ(H,r)).
pub fn tau(h: &Histogram, r: &MutationMatrix, g: &Histogram, p: &ModelParams) -> Result<f64> {
    r.check_in_k(h, p)?;
    Ok(tau_raw(p, h.as_slice(), r.rows(), g.as_slice()))
}

fn tau_raw(p: &ModelParams, h: &[f64], r: &[Vec<f64>], g: &[f64]) -> f64 {
    mut_raw(p, h, r) + kl_raw(g, &psi_raw(p, h, r))
}

fn require_positive(what: &str, h: &Histogram, p: &ModelParams) -> Result<()> {
    if h.len() != p.g() {
        return Err(Error::InvalidHistogram(format!("{what} has {} coordinates, expected {}", h.len(), p.g())));
    }
    if !h.is_positive() {
        return Err(Error::Boundary(format!("{what} has a zero coordinate")));
    }
    Ok(())
}

/// One-step cost C(H,G) for interior H and G.
pub fn one_step_cost(h: &Histogram, g: &Histogram, p: &ModelParams, mode: CostMode) -> Result<CostBreakdown> {
    require_positive("H", h, p)?;
    require_positive("G", g, p)?;
    match mode {
        CostMode::Exact => Ok(exact(p, h.as_slice(), g.as_slice())),
        CostMode::FirstOrder => Ok(first_order(p, h.as_slice(), g.as_slice())),
    }
}

fn first_order(p: &ModelParams, h: &[f64], g: &[f64]) -> CostBreakdown {
    let dim = p.g();
    let (total, _) = first_order_raw(p, h, g);
    let a: Vec<f64> = (0..dim).map(|j| g[j] / (p.f[j] * h[j])).collect();
    let mut r = MutationMatrix::zeros(dim);
    for &(j, k, q) in p.pairs() {
        r.set(j, k, p.m * q * p.f[j] * h[j] * (a[k] - a[j]).exp());
    }
    let hist = Histogram::from_raw(h.to_vec());
    let inside = r.check_in_k(&hist, p).is_ok();
    let (mut_part, kl_part) = if inside {
        (mut_raw(p, h, r.rows()), kl_raw(g, &psi_raw(p, h, r.rows())))
    } else {
        (f64::NAN, f64::NAN)
    };
    CostBreakdown {
        mode: CostMode::FirstOrder,
        mut_part,
        kl_part,
        total,
        minimizer_r: r,
        converged: inside && total.is_finite(),
        iterations: 0,
        constraint_violation: !inside,
    }
}

/// First-order cost without allocation. Returns (value, reliable) where
/// `reliable` means every m Q_jk U_k/U_j stays below [`FIRST_ORDER_GUARD`].
pub(crate) fn first_order_raw(p: &ModelParams, h: &[f64], g: &[f64]) -> (f64, bool) {
    let s = p.dot_f(h);
    let mut kl = 0.0;
    for j in 0..h.len() {
        let gj = g[j];
        if gj > 0.0 {
            kl += gj * (gj * s / (p.f[j] * h[j])).ln();
        }
    }
    let mut corr = 0.0;
    let mut reliable = true;
    for &(j, k, q) in p.pairs() {
        let fhj = p.f[j] * h[j];
        let ratio = (g[k] / (p.f[k] * h[k]) - g[j] / fhj).exp();
        corr += fhj * q * (1.0 - ratio);
        if p.m * q * ratio > FIRST_ORDER_GUARD {
            reliable = false;
        }
    }
    let total = kl + p.m * corr;
    (total, reliable && total.is_finite())
}

struct ExactSolution {
    r: Vec<Vec<f64>>,
    converged: bool,
    iterations: usize,
    violation: bool,
}

fn solve_exact(p: &ModelParams, h: &[f64], g: &[f64]) -> ExactSolution {
    let dim = p.g();
    let pairs = p.pairs();
    let fh: Vec<f64> = (0..dim).map(|j| p.f[j] * h[j]).collect();
    let f: Vec<f64> = pairs.iter().map(|&(j, _, q)| q * fh[j]).collect();
    let mut x: Vec<f64> = pairs.iter().map(|&(j, k, _)| (g[k] / fh[k] - g[j] / fh[j]).exp()).collect();
    let mut a = vec![0.0; dim];
    let mut converged = false;
    let mut violation = false;
    let mut iterations = 0;
    for it in 1..=EXACT_MAX_ITER {
        iterations = it;
        a.copy_from_slice(&fh);
        for (i, &(j, k, _)) in pairs.iter().enumerate() {
            let t = p.m * f[i] * x[i];
            a[j] -= t;
            a[k] += t;
        }
        if a.iter().any(|&v| !(v > 0.0)) {
            violation = true;
            break;
        }
        let mut diff: f64 = 0.0;
        let mut finite = true;
        for (i, &(j, k, _)) in pairs.iter().enumerate() {
            let xn = (g[k] / a[k] - g[j] / a[j]).exp();
            if !xn.is_finite() {
                finite = false;
                break;
            }
            let upd = (1.0 - EXACT_DAMPING) * x[i] + EXACT_DAMPING * xn;
            diff = diff.max((upd - x[i]).abs() / x[i].abs().max(1.0));
            x[i] = upd;
        }
        if !finite {
            violation = true;
            break;
        }
        if diff < EXACT_TOL {
            converged = true;
            break;
        }
    }
    let mut r = vec![vec![0.0; dim]; dim];
    for (i, &(j, k, _)) in pairs.iter().enumerate() {
        r[j][k] = p.m * f[i] * x[i];
    }
    for j in 0..dim {
        if fh[j] - r[j].iter().sum::<f64>() < K_SLACK {
            violation = true;
        }
    }
    ExactSolution { r, converged: converged && !violation, iterations, violation }
}

fn exact(p: &ModelParams, h: &[f64], g: &[f64]) -> CostBreakdown {
    let sol = solve_exact(p, h, g);
    let (mut_part, kl_part) = if sol.violation {
        (f64::NAN, f64::NAN)
    } else {
        (mut_raw(p, h, &sol.r), kl_raw(g, &psi_raw(p, h, &sol.r)))
    };
    CostBreakdown {
        mode: CostMode::Exact,
        mut_part,
        kl_part,
        total: mut_part + kl_part,
        minimizer_r: MutationMatrix::from_rows(sol.r).expect("square"),
        converged: sol.converged,
        iterations: sol.iterations,
        constraint_violation: sol.violation,
    }
}

/// Cost used along search paths: first order when requested and reliable,
/// otherwise the exact solve; +∞ when the exact solve fails.
pub(crate) fn step_cost_raw(p: &ModelParams, h: &[f64], g: &[f64], mode: CostMode) -> f64 {
    if mode == CostMode::FirstOrder {
        let (v, ok) = first_order_raw(p, h, g);
        if ok {
            return v;
        }
    }
    let c = exact(p, h, g);
    if c.converged {
        c.total
    } else {
        f64::INFINITY
    }
}

/// λ(w) = Σ C(w_n, w_{n+1}); +∞ as soon as one transition is infeasible.
pub fn path_cost(points: &[Histogram], p: &ModelParams, mode: CostMode) -> Result<f64> {
    let mut total = 0.0;
    for w in points.windows(2) {
        if feasibility(&w[0], &w[1], p)? != Feasibility::FeasibleOneStep {
            return Ok(f64::INFINITY);
        }
        let c = one_step_cost(&w[0], &w[1], p, mode)?;
        if !c.converged {
            return Err(Error::NonFinite("one-step cost solve did not converge".into()));
        }
        total += c.total;
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradNorm {
    Sup,
    Euclidean,
}

impl FromStr for GradNorm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sup" | "inf" => Ok(GradNorm::Sup),
            "euclidean" | "l2" => Ok(GradNorm::Euclidean),
            _ => Err(Error::Config(format!("unknown norm '{s}' (sup | euclidean)"))),
        }
    }
}

impl GradNorm {
    pub fn apply(self, v: &[f64]) -> f64 {
        match self {
            GradNorm::Sup => v.iter().fold(0.0, |a, &b| a.max(b.abs())),
            GradNorm::Euclidean => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }
}

/// Raw R^g gradients of the first-order cost with respect to the shared
/// middle point y.
#[derive(Clone, Debug, Serialize)]
pub struct CostGradient {
    /// ∂_y C(x, y), present when x is supplied.
    pub wrt_y_prev: Option<Vec<f64>>,
    /// ∂_y C(y, z), present when z is supplied.
    pub wrt_y_next: Option<Vec<f64>>,
    /// h(y,z): sup-norm of `wrt_y_next`.
    pub norm_h: Option<f64>,
}

pub fn cost_gradient(
    x: Option<&Histogram>,
    y: &Histogram,
    z: Option<&Histogram>,
    p: &ModelParams,
) -> Result<CostGradient> {
    require_positive("y", y, p)?;
    let prev = match x {
        Some(x) => {
            require_positive("x", x, p)?;
            Some(grad_prev_raw(p, x.as_slice(), y.as_slice()))
        }
        None => None,
    };
    let next = match z {
        Some(z) => {
            require_positive("z", z, p)?;
            let mut out = vec![0.0; p.g()];
            grad_next_raw(p, y.as_slice(), z.as_slice(), &mut out);
            Some(out)
        }
        None => None,
    };
    let norm_h = next.as_ref().map(|v| GradNorm::Sup.apply(v));
    Ok(CostGradient { wrt_y_prev: prev, wrt_y_next: next, norm_h })
}

/// ∂_y C(x,y): 1 + log y_s − log Φ_s(x) + m Σ_k (Q_sk E_sk − (F_k x_k)/(F_s x_s) Q_ks E_ks),
/// E_sk = exp(−y_s/(F_s x_s) + y_k/(F_k x_k)).
pub(crate) fn grad_prev_raw(p: &ModelParams, x: &[f64], y: &[f64]) -> Vec<f64> {
    let dim = p.g();
    let s = p.dot_f(x);
    let a: Vec<f64> = (0..dim).map(|j| -y[j] / (p.f[j] * x[j])).collect();
    let mut out: Vec<f64> = (0..dim).map(|j| 1.0 + y[j].ln() - (p.f[j] * x[j] / s).ln()).collect();
    for &(j, k, q) in p.pairs() {
        // pair (j,k) enters row j with +Q_jk E_jk and row k with −(F_j x_j)/(F_k x_k) Q_jk E_jk
        let e = (a[j] - a[k]).exp();
        out[j] += p.m * q * e;
        out[k] -= p.m * (p.f[j] * x[j]) / (p.f[k] * x[k]) * q * e;
    }
    out
}

/// ∂_y C(y,z): F_s/⟨F,y⟩ − z_s/y_s
///   + m [F_s Σ_k Q_sk − (F_s + z_s/y_s) Σ_k Q_sk E_sk + z_s/(F_s y_s²) Σ_k F_k y_k Q_ks E_ks],
/// E_sk = exp(−z_s/(F_s y_s) + z_k/(F_k y_k)).
pub(crate) fn grad_next_raw(p: &ModelParams, y: &[f64], z: &[f64], out: &mut [f64]) {
    let dim = p.g();
    let s = p.dot_f(y);
    for j in 0..dim {
        out[j] = p.f[j] / s - z[j] / y[j];
    }
    if p.m == 0.0 {
        return;
    }
    for &(j, k, q) in p.pairs() {
        let e = (z[k] / (p.f[k] * y[k]) - z[j] / (p.f[j] * y[j])).exp();
        out[j] += p.m * q * (p.f[j] - (p.f[j] + z[j] / y[j]) * e);
        out[k] += p.m * z[k] / (p.f[k] * y[k] * y[k]) * p.f[j] * y[j] * q * e;
    }
}

/// h(y,G) under the chosen norm, no validation.
pub(crate) fn h_norm_raw(p: &ModelParams, y: &[f64], g: &[f64], norm: GradNorm, scratch: &mut [f64]) -> f64 {
    grad_next_raw(p, y, g, scratch);
    norm.apply(scratch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{mean_step, validate_histogram};

    fn hist(v: &[f64]) -> Histogram {
        Histogram::new(v.to_vec()).unwrap()
    }

    fn two(m: f64) -> ModelParams {
        ModelParams::new_unrestricted(vec![2.0, 4.0], vec![vec![0.0, 1.0], vec![0.0, 0.0]], m, 1000).unwrap()
    }

    #[test]
    fn kl_examples() {
        let g = hist(&[0.5, 0.5]);
        assert_eq!(kl_divergence(&g, &g), 0.0);
        let j = hist(&[0.25, 0.75]);
        let want = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl_divergence(&g, &j) - want).abs() < 1e-15);
        assert!((kl_divergence(&g, &j) - 0.143841).abs() < 1e-6);
        assert_eq!(kl_divergence(&hist(&[1.0, 0.0]), &hist(&[0.0, 1.0])), f64::INFINITY);
    }

    #[test]
    fn kl_partials_match_differences() {
        let g = hist(&[0.2, 0.5, 0.3]);
        let j = hist(&[0.3, 0.3, 0.4]);
        let (dg, dj) = kl_partials(&g, &j);
        let h = 1e-6;
        for s in 0..3 {
            let mut gp = g.as_slice().to_vec();
            let mut gm = gp.clone();
            gp[s] += h;
            gm[s] -= h;
            let fd = (kl_plain(&gp, j.as_slice()) - kl_plain(&gm, j.as_slice())) / (2.0 * h);
            assert!((fd - dg[s]).abs() < 1e-7);
            let mut jp = j.as_slice().to_vec();
            let mut jm = jp.clone();
            jp[s] += h;
            jm[s] -= h;
            let fd = (kl_plain(g.as_slice(), &jp) - kl_plain(g.as_slice(), &jm)) / (2.0 * h);
            assert!((fd - dj[s]).abs() < 1e-7);
        }
    }

    fn kl_plain(g: &[f64], j: &[f64]) -> f64 {
        g.iter().zip(j).map(|(a, b)| a * (a / b).ln()).sum()
    }

    #[test]
    fn mut_rate_zero_at_mean_and_positive_at_zero() {
        let p = ModelParams::reference();
        let h = hist(&[0.6, 0.3, 0.1]);
        let mean = p.mean_mutations(&h);
        assert!(mut_rate(&mean, &h, &p).unwrap().abs() < 1e-20);
        let zero = MutationMatrix::zeros(3);
        let want: f64 = p.pairs().iter().map(|&(j, _, q)| p.m * q * p.f[j] * h[j]).sum();
        assert!((mut_rate(&zero, &h, &p).unwrap() - want).abs() < 1e-18);
        assert!(want > 0.0);
    }

    #[test]
    fn tau_vanishes_at_mean() {
        let p = ModelParams::reference();
        let h = hist(&[0.6, 0.3, 0.1]);
        let z = mean_step(&h, &p).unwrap();
        assert!(tau(&h, &p.mean_mutations(&h), &z, &p).unwrap() < 1e-15);
    }

    #[test]
    fn tau_infinite_without_source() {
        let p = ModelParams::reference();
        let h = hist(&[0.0, 0.5, 0.5]);
        let g = hist(&[0.1, 0.45, 0.45]);
        assert_eq!(tau(&h, &MutationMatrix::zeros(3), &g, &p).unwrap(), f64::INFINITY);
    }

    #[test]
    fn zero_cost_at_mean_step_both_modes() {
        let p = ModelParams::reference();
        let h = hist(&[0.99, 0.005, 0.005]);
        let z = mean_step(&h, &p).unwrap();
        for mode in [CostMode::Exact, CostMode::FirstOrder] {
            let c = one_step_cost(&h, &z, &p, mode).unwrap();
            assert!(c.converged);
            // first order drops an O(m²F²) term, visible at ~3e-11 here
            let tol = if mode == CostMode::Exact { 1e-12 } else { 1e-10 };
            assert!(c.total.abs() < tol, "{mode:?}: {}", c.total);
        }
    }

    #[test]
    fn exact_total_is_tau_of_minimizer() {
        let p = ModelParams::reference();
        let h = hist(&[0.99, 0.005, 0.005]);
        let g = validate_histogram(&[0.9858695, 0.009477103, 0.004653446], 1e-6).unwrap();
        let c = one_step_cost(&h, &g, &p, CostMode::Exact).unwrap();
        assert!(c.converged);
        let t = tau(&h, &c.minimizer_r, &g, &p).unwrap();
        assert!((t - c.total).abs() < 1e-15);
        assert!((c.mut_part + c.kl_part - c.total).abs() < 1e-18);
    }

    #[test]
    fn exact_matches_grid_minimum_two_genotypes() {
        // one free variable r12 in (0, F1 H1); brute force over a fine grid,
        // then refine around the best cell
        let p = two(1e-6);
        let h = hist(&[0.5, 0.5]);
        let g = hist(&[0.3, 0.7]);
        let c = one_step_cost(&h, &g, &p, CostMode::Exact).unwrap();
        let cap = p.f[0] * h[0];
        let eval = |x: f64| {
            let r = MutationMatrix::from_rows(vec![vec![0.0, x], vec![0.0, 0.0]]).unwrap();
            tau(&h, &r, &g, &p).unwrap()
        };
        // the optimum sits near m F1 H1 e^{...}; search log-spaced over (0, cap)
        let (mut best_x, mut best) = (0.0, f64::INFINITY);
        for i in 0..400 {
            let x = cap * 10f64.powf(-12.0 + 12.0 * i as f64 / 399.0) * 0.999;
            let v = eval(x);
            if v < best {
                best = v;
                best_x = x;
            }
        }
        let (mut lo, mut hi) = (best_x / 1.2, best_x * 1.2);
        for _ in 0..200 {
            let a = lo + (hi - lo) / 3.0;
            let b = hi - (hi - lo) / 3.0;
            if eval(a) < eval(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let best = eval(0.5 * (lo + hi)).min(best);
        assert!(((c.total - best) / best).abs() < 1e-6, "{} vs {}", c.total, best);
        assert!(c.total <= best + 1e-15);
    }

    #[test]
    fn first_order_close_to_exact() {
        let p = ModelParams::reference();
        let h = hist(&[0.6, 0.25, 0.15]);
        let g = hist(&[0.5, 0.3, 0.2]);
        let e = one_step_cost(&h, &g, &p, CostMode::Exact).unwrap();
        let f = one_step_cost(&h, &g, &p, CostMode::FirstOrder).unwrap();
        assert!((e.total - f.total).abs() < 1e-10);
    }

    #[test]
    fn table_first_step() {
        let p = ModelParams::reference();
        let h = hist(&[0.99, 0.005, 0.005]);
        // printed to 7 digits, so the row sums to 1 only within 5e-8
        let g = validate_histogram(&[9.858695e-01, 9.477103e-03, 4.653446e-03], 1e-6).unwrap();
        let c = one_step_cost(&h, &g, &p, CostMode::Exact).unwrap();
        // the tabulated value is 1.686764e-03; the true minimum sits slightly lower
        assert!(((c.total - 1.686764e-3) / 1.686764e-3).abs() < 2e-3, "{}", c.total);
    }

    #[test]
    fn boundary_inputs_rejected() {
        let p = ModelParams::reference();
        let h = hist(&[1.0, 0.0, 0.0]);
        let g = hist(&[0.5, 0.25, 0.25]);
        assert!(one_step_cost(&h, &g, &p, CostMode::Exact).is_err());
        assert!(cost_gradient(None, &h, Some(&g), &p).is_err());
    }

    #[test]
    fn path_cost_infinite_when_infeasible() {
        let p = ModelParams::reference();
        let pts = vec![Histogram::vertex(3, 2), hist(&[0.1, 0.1, 0.8])];
        assert_eq!(path_cost(&pts, &p, CostMode::Exact).unwrap(), f64::INFINITY);
    }

    fn fo_value(p: &ModelParams, y: &[f64], z: &[f64]) -> f64 {
        first_order_raw(p, y, z).0
    }

    #[test]
    fn gradients_match_finite_differences_large_m() {
        // a large m exercises the correction terms; both gradients are exact
        // derivatives of the first-order formula
        let p = ModelParams::new_unrestricted(
            vec![200.0, 200f64.powf(1.08), 200f64.powf(1.12)],
            vec![vec![0.0, 0.5, 0.5], vec![0.2, 0.0, 1.0], vec![0.3, 0.1, 0.0]],
            0.1,
            1000,
        )
        .unwrap();
        let x = [0.3, 0.5, 0.2];
        let y = [0.25, 0.35, 0.4];
        let z = [0.4, 0.35, 0.25];
        let mut next = vec![0.0; 3];
        grad_next_raw(&p, &y, &z, &mut next);
        let prev = grad_prev_raw(&p, &x, &y);
        let h = 1e-6;
        for s in 0..3 {
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[s] += h;
            ym[s] -= h;
            let fd_next = (fo_value(&p, &yp, &z) - fo_value(&p, &ym, &z)) / (2.0 * h);
            let fd_prev = (fo_value(&p, &x, &yp) - fo_value(&p, &x, &ym)) / (2.0 * h);
            assert!((fd_next - next[s]).abs() < 1e-6 * next[s].abs().max(1.0), "next {s}");
            assert!((fd_prev - prev[s]).abs() < 1e-6 * prev[s].abs().max(1.0), "prev {s}");
        }
    }

    #[test]
    fn gradient_without_mutation() {
        let p = ModelParams::reference().with_m(0.0).unwrap();
        let y = hist(&[0.3, 0.3, 0.4]);
        let z = hist(&[0.35, 0.35, 0.3]);
        let gr = cost_gradient(None, &y, Some(&z), &p).unwrap();
        let s = p.dot_f(y.as_slice());
        for (k, v) in gr.wrt_y_next.unwrap().iter().enumerate() {
            assert!((v - (p.f[k] / s - z[k] / y[k])).abs() < 1e-15);
        }
    }
}

//! Checks that the rate functions govern the simulator, plus the elementary
//! inequalities (Stirling, Poisson Cramér bounds) they are built on.

use serde::Serialize;
use statrs::distribution::{Discrete, DiscreteCDF, Poisson};
use statrs::function::factorial::ln_factorial;

use crate::cost::{kl_divergence, one_step_cost, CostMode};
use crate::error::{Error, Result};
use crate::model::{Histogram, ModelParams};
use crate::simulate::estimate_transition_logprob;

/// Largest fitted constant c allowed in |gap| ≤ c · log N / N.
pub const ENVELOPE_LIMIT: f64 = 10.0;

#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub cases: usize,
    /// Largest LHS / RHS over the cases with a positive RHS.
    pub worst_ratio: f64,
    pub violations: Vec<String>,
}

impl BoundCheck {
    fn new(name: &str) -> Self {
        Self { name: name.into(), cases: 0, worst_ratio: 0.0, violations: Vec::new() }
    }

    fn record(&mut self, lhs: f64, rhs: f64, what: impl FnOnce() -> String) {
        self.cases += 1;
        if rhs > 0.0 {
            self.worst_ratio = self.worst_ratio.max(lhs / rhs);
        }
        if lhs > rhs * (1.0 + 1e-12) + 1e-300 {
            self.violations.push(what());
        }
    }

    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ElementaryReport {
    /// |log N! − N log(N/e)| ≤ 2 log N for 2 ≤ N ≤ n_max.
    pub stirling: BoundCheck,
    /// N = 1 is left out: the left side is 1 while 2 log 1 = 0.
    pub stirling_n1_lhs: f64,
    pub poisson_upper_tail: BoundCheck,
    pub poisson_lower_tail: BoundCheck,
    pub poisson_point: BoundCheck,
    pub pass: bool,
}

/// Cramér transform of Poisson(u): u + v log(v/u) − v.
pub fn poisson_rate(u: f64, v: f64) -> f64 {
    if v == 0.0 {
        u
    } else {
        u + v * (v / u).ln() - v
    }
}

fn stirling_gap(n: u64) -> f64 {
    let nf = n as f64;
    (ln_factorial(n) - nf * (nf / std::f64::consts::E).ln()).abs()
}

/// Stirling and Poisson large-deviation bounds against exact values.
pub fn elementary_bounds_check(n_max: u64) -> Result<ElementaryReport> {
    if n_max < 1 {
        return Err(Error::Config("n_max must be ≥ 1".into()));
    }
    let mut stirling = BoundCheck::new("stirling");
    for n in 2..=n_max {
        stirling.record(stirling_gap(n), 2.0 * (n as f64).ln(), || format!("N = {n}"));
    }

    let us = [0.1, 0.5, 1.0, 2.0, 5.0];
    let ns: Vec<u64> = [1u64, 2, 3, 5, 10, 20, 50, 100, 200, 500, 1000].into_iter().filter(|&n| n <= n_max).collect();
    let mut upper = BoundCheck::new("poisson_upper_tail");
    let mut lower = BoundCheck::new("poisson_lower_tail");
    let mut point = BoundCheck::new("poisson_point");
    for &u in &us {
        for &n in &ns {
            let nf = n as f64;
            let x = Poisson::new(nf * u).map_err(|e| Error::InvalidParams(e.to_string()))?;
            for s in [1.1, 1.5, 2.0, 3.0] {
                let v = s * u;
                // P(X ≥ Nv) = P(X > ⌈Nv⌉ − 1)
                let k = (nf * v).ceil() as u64;
                let p = if k == 0 { 1.0 } else { x.sf(k - 1) };
                upper.record(p, (-nf * poisson_rate(u, v)).exp(), || format!("u={u} v={v} N={n}: P={p:e}"));
            }
            for s in [0.1, 0.5, 0.9] {
                let w = s * u;
                let p = x.cdf((nf * w).floor() as u64);
                lower.record(p, (-nf * poisson_rate(u, w)).exp(), || format!("u={u} w={w} N={n}: P={p:e}"));
            }
            if n >= 5 {
                for k in [0, n / 2, n, 2 * n, 3 * n] {
                    let v = k as f64 / nf;
                    let lhs = (x.ln_pmf(k) / nf + poisson_rate(u, v)).abs();
                    point.record(lhs, 2.0 * nf.ln() / nf, || format!("u={u} v={v} N={n}: gap {lhs:e}"));
                }
            }
        }
    }
    let pass = stirling.pass() && upper.pass() && lower.pass() && point.pass();
    Ok(ElementaryReport {
        stirling,
        stirling_n1_lhs: stirling_gap(1),
        poisson_upper_tail: upper,
        poisson_lower_tail: lower,
        poisson_point: point,
        pass,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LdPoint {
    pub n: u64,
    pub empirical: Option<f64>,
    pub gap: Option<f64>,
    /// The bound the gap is held to at this N.
    pub bound: f64,
    pub hits: Option<u64>,
    pub trials: Option<u64>,
    pub rejection_rate: Option<f64>,
    pub rejection_bound: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LdCheckReport {
    /// −C(H,G) (or −KL for the multinomial check).
    pub theory_value: f64,
    /// Empirical (1/N)·log-probability at the largest N.
    pub empirical_value: f64,
    pub n_values: Vec<u64>,
    pub gaps: Vec<f64>,
    /// Least-squares fit gap ≈ intercept + slope · log N / N.
    pub regression_slope: f64,
    pub regression_intercept: f64,
    /// max_N gap · N / log N.
    pub envelope_constant: f64,
    pub points: Vec<LdPoint>,
    pub pass: bool,
}

fn fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn log_n_over_n(n: u64) -> f64 {
    (n as f64).ln() / n as f64
}

/// Exact multinomial log-probability of N·G under J against −N·KL(G, J).
/// Passes iff every gap is within 2(g+1) log N / N.
pub fn multinomial_ld_check(j: &Histogram, g: &Histogram, n_values: &[u64]) -> Result<LdCheckReport> {
    if j.len() != g.len() {
        return Err(Error::InvalidHistogram("J and G differ in length".into()));
    }
    if g.support().iter().any(|&k| j[k] == 0.0) {
        return Err(Error::InvalidHistogram("spt(G) must lie inside spt(J)".into()));
    }
    if n_values.is_empty() {
        return Err(Error::Config("need at least one N".into()));
    }
    let kl = kl_divergence(g, j);
    let dim = g.len() as f64;
    let mut points = Vec::new();
    let mut gaps = Vec::new();
    let mut last = f64::NAN;
    for &n in n_values {
        let nf = n as f64;
        let mut logmu = ln_factorial(n);
        for (k, &x) in g.as_slice().iter().enumerate() {
            let v = x * nf;
            if (v - v.round()).abs() > 1e-9 {
                return Err(Error::InvalidHistogram(format!("G({k}) = {x} is not a multiple of 1/{n}")));
            }
            let v = v.round() as u64;
            logmu -= ln_factorial(v);
            if v > 0 {
                logmu += v as f64 * j[k].ln();
            }
        }
        let emp = logmu / nf;
        let gap = (emp + kl).abs();
        last = emp;
        gaps.push(gap);
        points.push(LdPoint {
            n,
            empirical: Some(emp),
            gap: Some(gap),
            bound: 2.0 * (dim + 1.0) * log_n_over_n(n),
            hits: None,
            trials: None,
            rejection_rate: None,
            rejection_bound: None,
        });
    }
    let xs: Vec<f64> = n_values.iter().map(|&n| log_n_over_n(n)).collect();
    let (slope, intercept) = fit(&xs, &gaps);
    let envelope = gaps.iter().zip(&xs).map(|(g, x)| g / x).fold(0.0, f64::max);
    let pass = points.iter().all(|p| p.gap.unwrap() <= p.bound);
    Ok(LdCheckReport {
        theory_value: -kl,
        empirical_value: last,
        n_values: n_values.to_vec(),
        gaps,
        regression_slope: slope,
        regression_intercept: intercept,
        envelope_constant: envelope,
        points,
        pass,
    })
}

/// d(H) = exp(−(log(1/m) − 1) F_1 b(H)).
pub fn decay_coefficient(h: &Histogram, p: &ModelParams) -> f64 {
    (-((1.0 / p.m).ln() - 1.0) * p.f[0] * h.ess_min()).exp()
}

/// Simulated one-day log-probabilities of landing exactly on G against
/// −C(H,G). N = n_values[i] runs `trials · N / min(n_values)` trials so that
/// the expected hit count does not collapse at large N.
///
/// Passes iff every estimate exists, gaps shrink strictly with N, and
/// max gap · N / log N < [`ENVELOPE_LIMIT`].
pub fn kernel_ld_check(h: &Histogram, g: &Histogram, p: &ModelParams, n_values: &[u64], trials: u64, seed: u64) -> Result<LdCheckReport> {
    if n_values.is_empty() || trials == 0 {
        return Err(Error::Config("need at least one N and one trial".into()));
    }
    let c = one_step_cost(h, g, p, CostMode::Exact)?;
    if !c.converged {
        return Err(Error::NonFinite("exact cost solve did not converge".into()));
    }
    let theory = -c.total;
    let n_min = *n_values.iter().min().unwrap();
    let mut points = Vec::new();
    for &n in n_values {
        let pn = p.clone().with_n(n)?;
        let t = trials * (n / n_min).max(1);
        let est = estimate_transition_logprob(h, g, 0.0, &pn, t, seed ^ n)?;
        let gap = est.log_prob.map(|e| (e - theory).abs());
        let rej_bound = if p.m > 0.0 {
            Some(2.0 * p.g() as f64 * decay_coefficient(h, p).powf(n as f64 / 2.0))
        } else {
            None
        };
        points.push(LdPoint {
            n,
            empirical: est.log_prob,
            gap,
            bound: ENVELOPE_LIMIT * log_n_over_n(n),
            hits: Some(est.hits),
            trials: Some(t),
            rejection_rate: Some(est.rejections as f64 / (t + est.rejections) as f64),
            rejection_bound: rej_bound,
        });
    }
    let defined = points.iter().all(|p| p.gap.is_some());
    let gaps: Vec<f64> = points.iter().map(|p| p.gap.unwrap_or(f64::NAN)).collect();
    let xs: Vec<f64> = n_values.iter().map(|&n| log_n_over_n(n)).collect();
    let (slope, intercept) = fit(&xs, &gaps);
    let envelope = gaps.iter().zip(&xs).map(|(g, x)| g / x).fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..n_values.len()).collect();
    order.sort_by_key(|&i| n_values[i]);
    let shrinking = order.windows(2).all(|w| gaps[w[1]] < gaps[w[0]]);
    let pass = defined && shrinking && envelope < ENVELOPE_LIMIT;
    let empirical_value = points[*order.last().unwrap()].empirical.unwrap_or(f64::NAN);
    Ok(LdCheckReport {
        theory_value: theory,
        empirical_value,
        n_values: n_values.to_vec(),
        gaps,
        regression_slope: slope,
        regression_intercept: intercept,
        envelope_constant: envelope,
        points,
        pass,
    })
}

//! Histograms, model parameters and the deterministic daily maps.
//!
//! A histogram is a point of the probability simplex in R^g. The three smooth
//! maps below (growth Φ, post-mutation Ψ, mean step ζ) are the large-N limits
//! of the integer bookkeeping done by the simulator.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance used by [`Histogram::new`].
pub const DEFAULT_TOL: f64 = 1e-9;

/// Minimal slack required by the open constraint Σ_k r_jk < F_j H(j).
pub const K_SLACK: f64 = 1e-15;

/// Largest admissible m · (row sum of Q).
pub const MAX_MUTATION_RATE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Histogram {
    freq: Vec<f64>,
}

impl Histogram {
    /// Validates with the default tolerance; see [`validate_histogram`].
    pub fn new(v: Vec<f64>) -> Result<Self> {
        validate_histogram(&v, DEFAULT_TOL)
    }

    pub fn vertex(g: usize, j: usize) -> Self {
        let mut freq = vec![0.0; g];
        freq[j] = 1.0;
        Self { freq }
    }

    pub fn uniform(g: usize) -> Self {
        Self { freq: vec![1.0 / g as f64; g] }
    }

    /// Clamp negatives and renormalise without any tolerance check.
    /// Used for outputs of maps that are on the simplex up to rounding.
    pub(crate) fn normalized(mut v: Vec<f64>) -> Self {
        for x in v.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let s: f64 = v.iter().sum();
        for x in v.iter_mut() {
            *x /= s;
        }
        Self { freq: v }
    }

    /// Wrap a vector already known to lie on the simplex.
    pub(crate) fn from_raw(v: Vec<f64>) -> Self {
        Self { freq: v }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.freq
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.freq
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.freq[j] > 0.0).collect()
    }

    /// Essential minimum b(H): smallest positive coordinate.
    pub fn ess_min(&self) -> f64 {
        ess_min(&self.freq)
    }

    /// Interior in the numerical sense: every coordinate at least `delta`.
    pub fn is_interior(&self, delta: f64) -> bool {
        self.freq.iter().all(|&x| x >= delta)
    }

    /// Every coordinate strictly positive.
    pub fn is_positive(&self) -> bool {
        self.freq.iter().all(|&x| x > 0.0)
    }

    pub fn sup_dist(&self, other: &Histogram) -> f64 {
        sup_dist(&self.freq, &other.freq)
    }
}

impl std::ops::Index<usize> for Histogram {
    type Output = f64;
    fn index(&self, j: usize) -> &f64 {
        &self.freq[j]
    }
}

pub(crate) fn ess_min(v: &[f64]) -> f64 {
    v.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min)
}

pub(crate) fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Accepts `v` when every coordinate is ≥ −tol and |Σv − 1| ≤ tol; negatives
/// are clamped to zero and the result renormalised.
pub fn validate_histogram(v: &[f64], tol: f64) -> Result<Histogram> {
    if v.is_empty() {
        return Err(Error::InvalidHistogram("empty vector".into()));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidHistogram(format!("non-finite coordinate {x}")));
    }
    if let Some((j, x)) = v.iter().enumerate().find(|(_, &x)| x < -tol) {
        return Err(Error::InvalidHistogram(format!("coordinate {j} is negative ({x:e})")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > tol {
        return Err(Error::InvalidHistogram(format!("coordinates sum to {s}, not 1")));
    }
    Ok(Histogram::normalized(v.to_vec()))
}

/// Parameter set: growth factors F (ascending), transfer matrix Q, mutation
/// scale m, population size N and the interior threshold δ.
#[derive(Clone, Debug, Serialize)]
pub struct ModelParams {
    pub f: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub m: f64,
    pub n: u64,
    pub delta: f64,
    #[serde(skip)]
    pairs: Vec<(usize, usize, f64)>,
}

impl ModelParams {
    /// Checked constructor; δ defaults to 50/N and the mutation regime
    /// m · Σ_k Q_jk ≤ 1e-6 is enforced.
    pub fn new(f: Vec<f64>, q: Vec<Vec<f64>>, m: f64, n: u64) -> Result<Self> {
        let p = Self::new_unrestricted(f, q, m, n)?;
        p.check_regime()?;
        Ok(p)
    }

    /// Same structural checks as [`ModelParams::new`] but any m ≥ 0 is
    /// accepted. Useful for probing the maps outside the small-m regime.
    pub fn new_unrestricted(f: Vec<f64>, q: Vec<Vec<f64>>, m: f64, n: u64) -> Result<Self> {
        let delta = 50.0 / n.max(1) as f64;
        let mut p = Self { f, q, m, n, delta, pairs: Vec::new() };
        p.check_structure()?;
        p.pairs = build_pairs(&p.q);
        Ok(p)
    }

    /// F = (200, 200^1.08, 200^1.12), Q upper triangular, m = 1e-6, N = 1e6.
    pub fn reference() -> Self {
        Self::new(
            vec![200.0, 200f64.powf(1.08), 200f64.powf(1.12)],
            vec![vec![0.0, 0.5, 0.5], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]],
            1e-6,
            1_000_000,
        )
        .expect("reference parameters are valid")
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParams(format!("delta must be positive, got {delta}")));
        }
        self.delta = delta;
        Ok(self)
    }

    pub fn with_m(mut self, m: f64) -> Result<Self> {
        self.m = m;
        self.check_structure()?;
        Ok(self)
    }

    /// New population size; δ is reset to 50/N.
    pub fn with_n(mut self, n: u64) -> Result<Self> {
        self.n = n;
        self.check_structure()?;
        self.delta = 50.0 / n as f64;
        Ok(self)
    }

    pub fn g(&self) -> usize {
        self.f.len()
    }

    /// Off-diagonal entries with Q_jk > 0 as (j, k, Q_jk).
    pub fn pairs(&self) -> &[(usize, usize, f64)] {
        &self.pairs
    }

    pub fn dot_f(&self, h: &[f64]) -> f64 {
        self.f.iter().zip(h).map(|(a, b)| a * b).sum()
    }

    fn check_structure(&self) -> Result<()> {
        let g = self.f.len();
        let bad = |s: String| Err(Error::InvalidParams(s));
        if g < 2 {
            return bad(format!("need at least 2 genotypes, got {g}"));
        }
        if let Some(x) = self.f.iter().find(|&&x| !(x > 1.0 && x.is_finite())) {
            return bad(format!("growth factors must be finite and > 1, got {x}"));
        }
        if self.f.windows(2).any(|w| w[0] >= w[1]) {
            return bad("growth factors must be strictly increasing".into());
        }
        if self.q.len() != g || self.q.iter().any(|r| r.len() != g) {
            return bad(format!("Q must be {g}x{g}"));
        }
        for (j, row) in self.q.iter().enumerate() {
            for (k, &x) in row.iter().enumerate() {
                if !(x >= 0.0 && x.is_finite()) {
                    return bad(format!("Q[{j}][{k}] = {x} is not a finite nonnegative number"));
                }
                if j == k && x != 0.0 {
                    return bad(format!("Q[{j}][{j}] must be zero"));
                }
            }
        }
        if !(self.m >= 0.0 && self.m.is_finite()) {
            return bad(format!("m must be finite and nonnegative, got {}", self.m));
        }
        if self.n == 0 {
            return bad("N must be at least 1".into());
        }
        Ok(())
    }

    /// m > 0 and m · Σ_k Q_jk ≤ 1e-6 for every row.
    pub fn check_regime(&self) -> Result<()> {
        if !(self.m > 0.0) {
            return Err(Error::InvalidParams(format!("m must be positive, got {}", self.m)));
        }
        for (j, row) in self.q.iter().enumerate() {
            let rate = self.m * row.iter().sum::<f64>();
            if rate > MAX_MUTATION_RATE * (1.0 + 1e-12) {
                return Err(Error::InvalidParams(format!(
                    "mutation rate of genotype {j} is {rate:e}, above {MAX_MUTATION_RATE:e}"
                )));
            }
        }
        Ok(())
    }

    fn check_len(&self, h: &Histogram) -> Result<()> {
        self.check_dim(h.len())
    }

    pub(crate) fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.g() {
            return Err(Error::InvalidHistogram(format!(
                "histogram has {len} coordinates, model has {} genotypes",
                self.g()
            )));
        }
        Ok(())
    }

    /// Mean per-capita mutations r_jk = m Q_jk F_j H(j).
    pub fn mean_mutations(&self, h: &Histogram) -> MutationMatrix {
        let mut r = MutationMatrix::zeros(self.g());
        for &(j, k, q) in &self.pairs {
            r.r[j][k] = self.m * q * self.f[j] * h[j];
        }
        r
    }

    /// Genotypes reachable from `from` through chains of positive Q entries.
    pub fn reachable_from(&self, from: &[usize]) -> Vec<bool> {
        let g = self.g();
        let mut seen = vec![false; g];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &j in from {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
        while let Some(j) = queue.pop_front() {
            for k in 0..g {
                if self.q[j][k] > 0.0 && !seen[k] {
                    seen[k] = true;
                    queue.push_back(k);
                }
            }
        }
        seen
    }
}

fn build_pairs(q: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for (j, row) in q.iter().enumerate() {
        for (k, &x) in row.iter().enumerate() {
            if j != k && x > 0.0 {
                out.push((j, k, x));
            }
        }
    }
    out
}

/// Per-capita mutation counts r (g×g, zero diagonal).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MutationMatrix {
    r: Vec<Vec<f64>>,
}

impl MutationMatrix {
    pub fn zeros(g: usize) -> Self {
        Self { r: vec![vec![0.0; g]; g] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let g = rows.len();
        if rows.iter().any(|r| r.len() != g) {
            return Err(Error::OutsideK("mutation matrix must be square".into()));
        }
        Ok(Self { r: rows })
    }

    pub fn g(&self) -> usize {
        self.r.len()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.r[j][k]
    }

    pub fn set(&mut self, j: usize, k: usize, v: f64) {
        self.r[j][k] = v;
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.r
    }

    pub fn row_sum(&self, j: usize) -> f64 {
        self.r[j].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> f64 {
        self.r.iter().map(|row| row[j]).sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.r.iter().flatten().fold(0.0, |a, &b| a.max(b.abs()))
    }

    /// Membership in K(H): r ≥ 0, zero diagonal, r_jk = 0 where Q_jk = 0 or
    /// H(j) = 0, and Σ_k r_jk < F_j H(j) with slack at least [`K_SLACK`].
    pub fn check_in_k(&self, h: &Histogram, p: &ModelParams) -> Result<()> {
        let g = p.g();
        if self.g() != g {
            return Err(Error::OutsideK(format!("matrix is {}x{}, model has {g} genotypes", self.g(), self.g())));
        }
        for j in 0..g {
            for k in 0..g {
                let x = self.r[j][k];
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(Error::OutsideK(format!("r[{j}][{k}] = {x} is not finite and nonnegative")));
                }
                if x > 0.0 && (j == k || p.q[j][k] == 0.0 || h[j] == 0.0) {
                    return Err(Error::OutsideK(format!("r[{j}][{k}] = {x:e} must vanish")));
                }
            }
            if h[j] > 0.0 {
                let slack = p.f[j] * h[j] - self.row_sum(j);
                if slack < K_SLACK {
                    return Err(Error::OutsideK(format!(
                        "outflow of genotype {j} exceeds its grown colony (slack {slack:e})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Φ_j = F_j H(j) / ⟨F,H⟩.
pub fn growth_map(h: &Histogram, p: &ModelParams) -> Result<Histogram> {
    p.check_len(h)?;
    let s = p.dot_f(h.as_slice());
    Ok(Histogram::from_raw(h.as_slice().iter().zip(&p.f).map(|(x, f)| f * x / s).collect()))
}

/// Ψ_j = (F_j H(j) − Σ_k r_jk + Σ_k r_kj) / ⟨F,H⟩ for r ∈ K(H).
pub fn post_mutation_map(h: &Histogram, r: &MutationMatrix, p: &ModelParams) -> Result<Histogram> {
    p.check_len(h)?;
    r.check_in_k(h, p)?;
    Ok(Histogram::normalized(psi_raw(p, h.as_slice(), r.rows())))
}

pub(crate) fn psi_raw(p: &ModelParams, h: &[f64], r: &[Vec<f64>]) -> Vec<f64> {
    let g = p.g();
    let s = p.dot_f(h);
    (0..g)
        .map(|j| {
            let out: f64 = r[j].iter().sum();
            let inc: f64 = r.iter().map(|row| row[j]).sum();
            (p.f[j] * h[j] - out + inc) / s
        })
        .collect()
}

/// Mean step ζ(H): growth followed by the mean mutations m Q_jk F_j H(j).
pub fn mean_step(h: &Histogram, p: &ModelParams) -> Result<Histogram> {
    p.check_len(h)?;
    let mut out = vec![0.0; p.g()];
    zeta_raw(p, h.as_slice(), &mut out);
    Ok(Histogram::from_raw(out))
}

pub(crate) fn zeta_raw(p: &ModelParams, h: &[f64], out: &mut [f64]) {
    let s = p.dot_f(h);
    for j in 0..h.len() {
        out[j] = p.f[j] * h[j];
    }
    if p.m != 0.0 {
        for &(j, k, q) in &p.pairs {
            let t = p.m * q * p.f[j] * h[j];
            out[j] -= t;
            out[k] += t;
        }
    }
    for x in out.iter_mut() {
        *x /= s;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility {
    /// G can follow H in one day.
    FeasibleOneStep,
    /// Not in one step, but spt(G) lies in the mutational closure of spt(H).
    Reachable,
    Neither,
}

impl Feasibility {
    pub fn is_reachable(self) -> bool {
        self != Feasibility::Neither
    }
}

pub fn feasibility(h: &Histogram, g: &Histogram, p: &ModelParams) -> Result<Feasibility> {
    p.check_len(h)?;
    p.check_len(g)?;
    let dim = p.g();
    let one_step = (0..dim).all(|j| {
        !(g[j] > 0.0 && h[j] == 0.0) || (0..dim).any(|k| h[k] > 0.0 && p.m * p.q[k][j] > 0.0)
    });
    if one_step {
        return Ok(Feasibility::FeasibleOneStep);
    }
    let closure = p.reachable_from(&h.support());
    if g.support().into_iter().all(|j| closure[j]) {
        Ok(Feasibility::Reachable)
    } else {
        Ok(Feasibility::Neither)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two() -> ModelParams {
        ModelParams::new(vec![2.0, 4.0], vec![vec![0.0, 1.0], vec![0.0, 0.0]], 1e-6, 10).unwrap()
    }

    #[test]
    fn validates_reference_start() {
        let h = Histogram::new(vec![0.99, 0.005, 0.005]).unwrap();
        assert_eq!(h.support(), vec![0, 1, 2]);
        assert!((h.ess_min() - 0.005).abs() < 1e-15);
    }

    #[test]
    fn vertex_is_valid() {
        let h = Histogram::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(h.support(), vec![0]);
        assert_eq!(h.ess_min(), 1.0);
    }

    #[test]
    fn rejects_bad_sum_and_negative() {
        assert!(Histogram::new(vec![0.5, 0.6, 0.1]).is_err());
        assert!(Histogram::new(vec![1.1, -0.1]).is_err());
        assert!(Histogram::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn clamps_tiny_negatives() {
        let h = validate_histogram(&[0.5 + 1e-10, 0.5, -1e-10], 1e-9).unwrap();
        assert_eq!(h[2], 0.0);
        assert!((h.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn growth_map_small_case() {
        let p = two();
        let h = Histogram::new(vec![0.5, 0.5]).unwrap();
        let phi = growth_map(&h, &p).unwrap();
        assert!((phi[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((phi[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn growth_map_reference() {
        let p = ModelParams::reference();
        let h = Histogram::new(vec![0.99, 0.005, 0.005]).unwrap();
        let phi = growth_map(&h, &p).unwrap();
        // independent evaluation of <F,H>
        let dot = 0.99 * 200.0 + 0.005 * 200f64.powf(1.08) + 0.005 * 200f64.powf(1.12);
        assert!((phi[0] - 198.0 / dot).abs() < 1e-14);
        assert!((phi[0] - 0.98304).abs() < 1e-5);
    }

    #[test]
    fn vertex_is_fixed_by_growth() {
        let p = ModelParams::reference();
        let h = Histogram::vertex(3, 1);
        assert_eq!(growth_map(&h, &p).unwrap(), h);
    }

    #[test]
    fn psi_small_case() {
        let p = two();
        let h = Histogram::new(vec![0.5, 0.5]).unwrap();
        let r = MutationMatrix::from_rows(vec![vec![0.0, 0.1], vec![0.0, 0.0]]).unwrap();
        let psi = post_mutation_map(&h, &r, &p).unwrap();
        assert!((psi[0] - 0.3).abs() < 1e-14);
        assert!((psi[1] - 0.7).abs() < 1e-14);
    }

    #[test]
    fn psi_reduces_to_phi_and_zeta() {
        let p = ModelParams::reference();
        let h = Histogram::new(vec![0.6, 0.3, 0.1]).unwrap();
        let psi0 = post_mutation_map(&h, &MutationMatrix::zeros(3), &p).unwrap();
        assert!(psi0.sup_dist(&growth_map(&h, &p).unwrap()) < 1e-15);
        let psim = post_mutation_map(&h, &p.mean_mutations(&h), &p).unwrap();
        assert!(psim.sup_dist(&mean_step(&h, &p).unwrap()) < 1e-15);
    }

    #[test]
    fn psi_rejects_outside_k() {
        let p = two();
        let h = Histogram::new(vec![0.5, 0.5]).unwrap();
        let too_big = MutationMatrix::from_rows(vec![vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(post_mutation_map(&h, &too_big, &p).is_err());
        let wrong_dir = MutationMatrix::from_rows(vec![vec![0.0, 0.0], vec![0.1, 0.0]]).unwrap();
        assert!(post_mutation_map(&h, &wrong_dir, &p).is_err());
        let from_empty = Histogram::new(vec![0.0, 1.0]).unwrap();
        let r = MutationMatrix::from_rows(vec![vec![0.0, 0.01], vec![0.0, 0.0]]).unwrap();
        assert!(post_mutation_map(&from_empty, &r, &p).is_err());
    }

    #[test]
    fn zeta_without_mutation_is_phi() {
        let p = ModelParams::new_unrestricted(
            vec![200.0, 200f64.powf(1.08), 200f64.powf(1.12)],
            vec![vec![0.0, 0.5, 0.5], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]],
            0.0,
            1_000_000,
        )
        .unwrap();
        let h = Histogram::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(mean_step(&h, &p).unwrap(), growth_map(&h, &p).unwrap());
    }

    #[test]
    fn feasibility_cases() {
        let p = ModelParams::reference();
        let a = Histogram::new(vec![0.5, 0.3, 0.2]).unwrap();
        let b = Histogram::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(feasibility(&a, &b, &p).unwrap(), Feasibility::FeasibleOneStep);
        let e3 = Histogram::vertex(3, 2);
        assert_eq!(feasibility(&e3, &b, &p).unwrap(), Feasibility::Neither);
        let e1 = Histogram::vertex(3, 0);
        assert!(feasibility(&e1, &b, &p).unwrap().is_reachable());
        assert_eq!(p.reachable_from(&[0]), vec![true, true, true]);
        assert_eq!(p.reachable_from(&[2]), vec![false, false, true]);
        // two mutational hops: 1 -> 2 -> 3 with no direct 1 -> 3
        let chain = ModelParams::new(
            vec![2.0, 3.0, 4.0],
            vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]],
            1e-6,
            100,
        )
        .unwrap();
        assert_eq!(feasibility(&e1, &b, &chain).unwrap(), Feasibility::Reachable);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(vec![2.0, 1.5], vec![vec![0.0; 2]; 2], 1e-6, 10).is_err());
        assert!(ModelParams::new(vec![2.0, 3.0], vec![vec![1.0, 0.0], vec![0.0, 0.0]], 1e-6, 10).is_err());
        assert!(ModelParams::new(vec![2.0, 3.0], vec![vec![0.0, 2.0], vec![0.0, 0.0]], 1e-6, 10).is_err());
        assert!(ModelParams::new(vec![0.5, 3.0], vec![vec![0.0; 2]; 2], 1e-6, 10).is_err());
        let p = ModelParams::reference();
        assert!((p.delta - 5e-5).abs() < 1e-20);
    }
}

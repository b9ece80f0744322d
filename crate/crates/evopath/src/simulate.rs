//! Monte-Carlo engine for the daily cycle: deterministic growth with integer
//! ceilings, Poisson mutations conditioned on K_N(H), multinomial selection
//! back to N cells.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodesic::Trajectory;
use crate::model::{Histogram, ModelParams, MutationMatrix};

/// Attempts before `sample_mutations` gives up on finding a draw in K_N(H).
pub const REJECTION_CAP: usize = 10_000;

const CHUNK: u64 = 1 << 16;

/// Reproducible random stream: identical (seed, stream) gives identical draws.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChainState {
    /// Cells per genotype; sums to N at the start of every day.
    pub counts: Vec<u64>,
    pub day: u64,
}

impl ChainState {
    /// Requires N·H(j) to be an integer for every j.
    pub fn from_histogram(h: &Histogram, n: u64) -> Result<Self> {
        let counts = n_rational_counts(h, n)?;
        Ok(Self { counts, day: 1 })
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn histogram(&self) -> Histogram {
        let n = self.n() as f64;
        Histogram::from_raw(self.counts.iter().map(|&c| c as f64 / n).collect())
    }
}

fn n_rational_counts(h: &Histogram, n: u64) -> Result<Vec<u64>> {
    let nf = n as f64;
    let mut counts = Vec::with_capacity(h.len());
    for (j, &x) in h.as_slice().iter().enumerate() {
        let c = (x * nf).round();
        if (x * nf - c).abs() > 1e-6 {
            return Err(Error::InvalidHistogram(format!("H({j}) = {x} is not a multiple of 1/{n}")));
        }
        counts.push(c as u64);
    }
    if counts.iter().sum::<u64>() != n {
        return Err(Error::InvalidHistogram(format!("counts do not sum to N = {n}")));
    }
    Ok(counts)
}

/// ⌈x⌉ for a product that should be an integer up to rounding noise.
fn ceil_count(x: f64) -> u64 {
    (x - 1e-9 * x.max(1.0)).ceil().max(0.0) as u64
}

/// Everything about one day that depends only on the morning counts.
struct DayKernel {
    n: u64,
    /// ⌈N F_j H(j)⌉
    cells: Vec<u64>,
    /// N F_j H(j), the strict bound on outgoing mutants per row
    colony: Vec<f64>,
    /// (j, k, Poisson(m Q_jk N F_j H(j))) over pairs with positive mean
    poisson: Vec<(usize, usize, Poisson<f64>)>,
}

impl DayKernel {
    fn new(counts: &[u64], p: &ModelParams) -> Result<Self> {
        p.check_dim(counts.len())?;
        let n: u64 = counts.iter().sum();
        let colony: Vec<f64> = counts.iter().zip(&p.f).map(|(&c, &f)| f * c as f64).collect();
        let cells = colony.iter().map(|&x| ceil_count(x)).collect();
        let mut poisson = Vec::new();
        for &(j, k, q) in p.pairs() {
            let mean = p.m * q * colony[j];
            if mean > 0.0 {
                let d = Poisson::new(mean).map_err(|e| Error::InvalidParams(format!("Poisson mean {mean}: {e}")))?;
                poisson.push((j, k, d));
            }
        }
        Ok(Self { n, cells, colony, poisson })
    }

    /// Integer mutation counts with R/N ∈ K_N(H), plus the number of rejected draws.
    fn mutations(&self, rng: &mut ChaCha8Rng) -> Result<(Vec<Vec<u64>>, usize)> {
        let g = self.cells.len();
        let mut r = vec![vec![0u64; g]; g];
        for attempt in 0..REJECTION_CAP {
            let mut out = vec![0u64; g];
            for &(j, k, ref d) in &self.poisson {
                let z = d.sample(rng) as u64;
                r[j][k] = z;
                out[j] += z;
            }
            if (0..g).all(|j| out[j] == 0 || (out[j] as f64) < self.colony[j]) {
                return Ok((r, attempt));
            }
        }
        Err(Error::RejectionCap(REJECTION_CAP))
    }

    /// Post-mutation cell counts per genotype.
    fn after_mutation(&self, r: &[Vec<u64>]) -> Vec<u64> {
        let g = self.cells.len();
        (0..g)
            .map(|j| {
                let out: u64 = r[j].iter().sum();
                let inc: u64 = (0..g).map(|k| r[k][j]).sum();
                self.cells[j] - out + inc
            })
            .collect()
    }
}

/// Multinomial(n, w / Σw) by a chain of conditional binomials.
fn multinomial(n: u64, weights: &[u64], rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut left_n = n;
    let mut left_w: u64 = weights.iter().sum();
    let mut out = vec![0u64; weights.len()];
    for (j, &w) in weights.iter().enumerate() {
        if left_n == 0 || left_w == 0 {
            break;
        }
        if w == left_w {
            out[j] = left_n;
            break;
        }
        let prob = w as f64 / left_w as f64;
        let x = if w == 0 { 0 } else { Binomial::new(left_n, prob).expect("probability in [0,1]").sample(rng) };
        out[j] = x;
        left_n -= x;
        left_w -= w;
    }
    out
}

/// Poisson mutation counts conditioned on R/N ∈ K_N(H).
pub fn sample_mutations(h: &Histogram, p: &ModelParams, rng: &mut RngStream) -> Result<MutationMatrix> {
    Ok(sample_mutations_counted(h, p, rng)?.0)
}

/// As [`sample_mutations`], also returning how many draws were rejected.
pub fn sample_mutations_counted(h: &Histogram, p: &ModelParams, rng: &mut RngStream) -> Result<(MutationMatrix, usize)> {
    let counts = n_rational_counts(h, p.n)?;
    let kernel = DayKernel::new(&counts, p)?;
    let (r, rejected) = kernel.mutations(&mut rng.rng)?;
    let rows = r.into_iter().map(|row| row.into_iter().map(|x| x as f64).collect()).collect();
    Ok((MutationMatrix::from_rows(rows)?, rejected))
}

/// J after growth and mutation, from integer mutation counts R.
///
/// J(j) = (⌈N F_j H(j)⌉ − Σ_k R_jk + Σ_k R_kj) / Σ_i ⌈N F_i H(i)⌉. The
/// denominator is the actual number of cells, which can exceed ⌈N⟨F,H⟩⌉ by
/// up to g − 1.
pub fn post_mutation_counts(h: &Histogram, r: &MutationMatrix, p: &ModelParams) -> Result<Histogram> {
    let counts = n_rational_counts(h, p.n)?;
    let kernel = DayKernel::new(&counts, p)?;
    let g = p.g();
    if r.g() != g {
        return Err(Error::InvalidParams(format!("mutation matrix is {}×{}, expected {g}×{g}", r.g(), r.g())));
    }
    let mut ri = vec![vec![0u64; g]; g];
    for j in 0..g {
        let mut out = 0.0;
        for k in 0..g {
            let x = r.get(j, k);
            if x < 0.0 || x.fract() != 0.0 {
                return Err(Error::OutsideK(format!("R[{j}][{k}] = {x} is not a nonnegative integer")));
            }
            if x > 0.0 && (j == k || p.q[j][k] == 0.0) {
                return Err(Error::OutsideK(format!("R[{j}][{k}] = {x} on a forbidden transfer")));
            }
            ri[j][k] = x as u64;
            out += x;
        }
        if out > 0.0 && out >= kernel.colony[j] {
            return Err(Error::OutsideK(format!("row {j} loses {out} cells from a colony of {}", kernel.colony[j])));
        }
    }
    let after = kernel.after_mutation(&ri);
    let total: u64 = after.iter().sum();
    Ok(Histogram::from_raw(after.iter().map(|&c| c as f64 / total as f64).collect()))
}

/// V/N with V ~ Multinomial(N, J).
pub fn sample_selection(j: &Histogram, n: u64, rng: &mut RngStream) -> Histogram {
    // scale to integer weights exactly when J comes from counts, else to 2^52
    let scale = (1u64 << 52) as f64;
    let weights: Vec<u64> = j.as_slice().iter().map(|&x| (x * scale).round() as u64).collect();
    let v = multinomial(n, &weights, &mut rng.rng);
    Histogram::from_raw(v.iter().map(|&c| c as f64 / n as f64).collect())
}

/// One full day in place; returns the number of rejected mutation draws.
pub fn step_day(state: &mut ChainState, p: &ModelParams, rng: &mut RngStream) -> Result<usize> {
    let kernel = DayKernel::new(&state.counts, p)?;
    let (r, rejected) = kernel.mutations(&mut rng.rng)?;
    let after = kernel.after_mutation(&r);
    state.counts = multinomial(kernel.n, &after, &mut rng.rng);
    state.day += 1;
    Ok(rejected)
}

/// T simulated days from H1 (T + 1 points). Step costs are first-order
/// costs where both ends are strictly positive and NaN otherwise.
pub fn run_chain(h1: &Histogram, t: usize, p: &ModelParams, rng: &mut RngStream) -> Result<Trajectory> {
    let mut state = ChainState::from_histogram(h1, p.n)?;
    let mut points = vec![state.histogram()];
    for _ in 0..t {
        step_day(&mut state, p, rng)?;
        points.push(state.histogram());
    }
    let costs = points
        .windows(2)
        .map(|w| {
            if w[0].is_positive() && w[1].is_positive() {
                crate::cost::step_cost_raw(p, w[0].as_slice(), w[1].as_slice(), crate::cost::CostMode::FirstOrder)
            } else {
                f64::NAN
            }
        })
        .collect();
    Trajectory::new(points, costs)
}

#[derive(Clone, Debug, Serialize)]
pub struct TransitionEstimate {
    pub n: u64,
    pub trials: u64,
    pub hits: u64,
    /// Rejected mutation draws summed over all trials.
    pub rejections: u64,
    /// (1/N)·log(hits/trials); None when nothing hit the ball.
    pub log_prob: Option<f64>,
}

/// Monte-Carlo estimate of (1/N)·log P(H_{n+1} ∈ ball | H_n = H), the ball
/// being {x : ‖x − center‖∞ ≤ radius}. Trials run in chunks with one RNG
/// stream per chunk, so the result depends only on (seed, trials).
pub fn estimate_transition_logprob(
    h: &Histogram,
    center: &Histogram,
    radius: f64,
    p: &ModelParams,
    trials: u64,
    seed: u64,
) -> Result<TransitionEstimate> {
    if trials == 0 {
        return Err(Error::Config("trials must be ≥ 1".into()));
    }
    let counts = n_rational_counts(h, p.n)?;
    let kernel = DayKernel::new(&counts, p)?;
    p.check_dim(center.len())?;
    let nf = p.n as f64;
    let lo: Vec<f64> = center.as_slice().iter().map(|&c| (c - radius) * nf - 1e-9).collect();
    let hi: Vec<f64> = center.as_slice().iter().map(|&c| (c + radius) * nf + 1e-9).collect();
    let chunks = trials.div_ceil(CHUNK);
    let (hits, rejections) = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<(u64, u64)> {
            let mut rng = RngStream::new(seed, c);
            let len = CHUNK.min(trials - c * CHUNK);
            let (mut hits, mut rej) = (0u64, 0u64);
            for _ in 0..len {
                let (r, rejected) = kernel.mutations(&mut rng.rng)?;
                rej += rejected as u64;
                let v = multinomial(kernel.n, &kernel.after_mutation(&r), &mut rng.rng);
                if v.iter().enumerate().all(|(j, &x)| (x as f64) >= lo[j] && (x as f64) <= hi[j]) {
                    hits += 1;
                }
            }
            Ok((hits, rej))
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let log_prob = (hits > 0).then(|| (hits as f64 / trials as f64).ln() / nf);
    Ok(TransitionEstimate { n: p.n, trials, hits, rejections, log_prob })
}

/// Fraction of Poisson companion draws rejected for leaving K_N(H).
pub fn rejection_rate(h: &Histogram, p: &ModelParams, draws: u64, seed: u64) -> Result<f64> {
    let counts = n_rational_counts(h, p.n)?;
    let kernel = DayKernel::new(&counts, p)?;
    let mut rng = RngStream::new(seed, 0);
    let mut rejected = 0u64;
    for _ in 0..draws {
        rejected += kernel.mutations(&mut rng.rng)?.1 as u64;
    }
    Ok(rejected as f64 / (draws + rejected) as f64)
}

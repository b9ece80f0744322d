//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments run to end of line
//! F = [200, 200^1.08, 200^1.12]
//! Q = [[0, 0.5, 0.5], [0, 0, 1], [0, 0, 0]]
//! m = 1e-6
//! pen_strategy = seeded_ball
//! ```
//!
//! Numbers may be written `a^b`. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use crate::cost::{CostMode, GradNorm};
use crate::error::{Error, Result};
use crate::geodesic::{PenStrategy, SearchConfig, SpliceRule};
use crate::model::{validate_histogram, Histogram, ModelParams};

#[derive(Clone, Debug, PartialEq)]
enum Value {
    Num(f64),
    Word(String),
    List(Vec<Value>),
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn value(&mut self) -> std::result::Result<Value, String> {
        self.skip_ws();
        match self.s.get(self.i) {
            None => Err("missing value".into()),
            Some(b'[') => {
                self.i += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    if self.s.get(self.i) == Some(&b']') {
                        self.i += 1;
                        return Ok(Value::List(items));
                    }
                    items.push(self.value()?);
                    self.skip_ws();
                    match self.s.get(self.i) {
                        Some(b',') => self.i += 1,
                        Some(b']') => {}
                        _ => return Err("expected ',' or ']'".into()),
                    }
                }
            }
            Some(_) => {
                let start = self.i;
                while self.i < self.s.len() && !matches!(self.s[self.i], b',' | b']' | b'[') {
                    self.i += 1;
                }
                let tok = std::str::from_utf8(&self.s[start..self.i]).unwrap().trim();
                Ok(atom(tok))
            }
        }
    }
}

fn atom(tok: &str) -> Value {
    if let Some((a, b)) = tok.split_once('^') {
        if let (Ok(a), Ok(b)) = (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            return Value::Num(a.powf(b));
        }
    }
    match tok.parse::<f64>() {
        Ok(x) => Value::Num(x),
        Err(_) => Value::Word(tok.to_string()),
    }
}

fn parse_value(text: &str) -> std::result::Result<Value, String> {
    let mut p = Parser { s: text.as_bytes(), i: 0 };
    let v = p.value()?;
    p.skip_ws();
    if p.i != p.s.len() {
        return Err(format!("trailing input '{}'", &text[p.i..]));
    }
    Ok(v)
}

/// Raw key/value pairs with their line numbers.
#[derive(Debug, Default)]
struct Entries {
    map: BTreeMap<String, (usize, Value)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", ln + 1)))?;
            let k = k.trim().to_string();
            let v = parse_value(v).map_err(|e| Error::Config(format!("line {}: {k}: {e}", ln + 1)))?;
            if map.insert(k.clone(), (ln + 1, v)).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{k}'", ln + 1)));
            }
        }
        Ok(Self { map })
    }

    fn take(&mut self, key: &str) -> Option<(usize, Value)> {
        self.map.remove(key)
    }

    fn num(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some((_, Value::Num(x))) => Ok(Some(x)),
            Some((ln, v)) => Err(Error::Config(format!("line {ln}: {key} must be a number, got {v:?}"))),
        }
    }

    fn int(&mut self, key: &str) -> Result<Option<u64>> {
        match self.num(key)? {
            None => Ok(None),
            Some(x) if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 => Ok(Some(x as u64)),
            Some(x) => Err(Error::Config(format!("{key} must be a nonnegative integer, got {x}"))),
        }
    }

    fn word(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some((_, Value::Word(w))) => Ok(Some(w)),
            Some((ln, v)) => Err(Error::Config(format!("line {ln}: {key} must be a word, got {v:?}"))),
        }
    }

    fn vec(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.take(key) {
            None => Ok(None),
            Some((ln, Value::List(items))) => items
                .into_iter()
                .map(|v| match v {
                    Value::Num(x) => Ok(x),
                    other => Err(Error::Config(format!("line {ln}: {key} entries must be numbers, got {other:?}"))),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some((ln, v)) => Err(Error::Config(format!("line {ln}: {key} must be a list, got {v:?}"))),
        }
    }

    fn matrix(&mut self, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        match self.take(key) {
            None => Ok(None),
            Some((ln, Value::List(rows))) => rows
                .into_iter()
                .map(|row| match row {
                    Value::List(items) => items
                        .into_iter()
                        .map(|v| match v {
                            Value::Num(x) => Ok(x),
                            other => Err(Error::Config(format!("line {ln}: {key} entries must be numbers, got {other:?}"))),
                        })
                        .collect(),
                    other => Err(Error::Config(format!("line {ln}: {key} rows must be lists, got {other:?}"))),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some((ln, v)) => Err(Error::Config(format!("line {ln}: {key} must be a list of lists, got {v:?}"))),
        }
    }

    fn range(&mut self, key: &str) -> Result<Option<(f64, f64, f64)>> {
        match self.vec(key)? {
            None => Ok(None),
            Some(v) if v.len() == 3 && v[2] > 0.0 && v[1] >= v[0] => Ok(Some((v[0], v[1], v[2]))),
            Some(v) => Err(Error::Config(format!("{key} must be [start, stop, step] with step > 0, got {v:?}"))),
        }
    }

    fn histogram(&mut self, key: &str) -> Result<Option<Histogram>> {
        match self.vec(key)? {
            None => Ok(None),
            Some(v) => validate_histogram(&v, INPUT_TOL).map(Some).map_err(|e| Error::Config(format!("{key}: {e}"))),
        }
    }
}

/// Settings for the large-deviation validation suite (a small g = 2 model by default).
#[derive(Clone, Debug)]
pub struct LdConfig {
    pub model: ModelParams,
    pub h: Histogram,
    pub g: Histogram,
    pub n_values: Vec<u64>,
    pub trials: u64,
    pub multinomial_j: Histogram,
    pub multinomial_g: Histogram,
    pub multinomial_n: Vec<u64>,
    pub stirling_n_max: u64,
}

impl Default for LdConfig {
    fn default() -> Self {
        Self {
            model: ModelParams::new(vec![2.0, 4.0], vec![vec![0.0, 1.0], vec![0.0, 0.0]], 1e-6, 100).expect("valid"),
            h: Histogram::new(vec![0.5, 0.5]).expect("valid"),
            g: Histogram::new(vec![0.4, 0.6]).expect("valid"),
            n_values: vec![100, 200, 400, 800],
            trials: 1_000_000,
            multinomial_j: Histogram::new(vec![0.5, 0.5]).expect("valid"),
            multinomial_g: Histogram::new(vec![0.6, 0.4]).expect("valid"),
            multinomial_n: vec![50, 100, 200, 400],
            stirling_n_max: 10_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: ModelParams,
    pub search: SearchConfig,
    pub h: Option<Histogram>,
    pub g: Option<Histogram>,
    pub seed: u64,
    pub trials: u64,
    /// Days simulated by `simulate`.
    pub days: usize,
    /// G_1 held fixed by `sweep-targets`.
    pub sweep_g1: f64,
    pub sweep_targets: (f64, f64, f64),
    pub sweep_initials: (f64, f64, f64),
    pub landscape_epsilon: f64,
    pub landscape_quantiles: Vec<f64>,
    pub ld: LdConfig,
}

pub const DEFAULT_SEED: u64 = 42;

/// Histograms typed by hand (or copied from 7-digit tables) are renormalised
/// when their sum is off by at most this much.
pub const INPUT_TOL: f64 = 1e-6;

impl RunConfig {
    /// Reference parameters with every run setting at its default.
    pub fn reference() -> Self {
        let model = ModelParams::reference();
        let search = SearchConfig::for_model(&model);
        Self {
            model,
            search,
            h: Some(Histogram::new(vec![0.99, 0.005, 0.005]).expect("valid")),
            g: Some(Histogram::new(vec![0.35, 0.35, 0.3]).expect("valid")),
            seed: DEFAULT_SEED,
            trials: 1_000_000,
            days: 50,
            sweep_g1: 0.35,
            sweep_targets: (0.20, 0.50, 0.01),
            sweep_initials: (0.99, 0.999, 0.001),
            landscape_epsilon: 2e-3,
            landscape_quantiles: vec![0.05, 0.10],
            ld: LdConfig::default(),
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    /// Parse config text; keys not given keep their reference defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut e = Entries::parse(text)?;
        let mut cfg = Self::reference();

        let base = &cfg.model;
        let f = e.vec("F")?.unwrap_or_else(|| base.f.clone());
        let q = e.matrix("Q")?.unwrap_or_else(|| base.q.clone());
        let m = e.num("m")?.unwrap_or(base.m);
        let n = e.int("N")?.unwrap_or(base.n);
        let mut model = ModelParams::new(f, q, m, n).map_err(|err| Error::Config(err.to_string()))?;
        if let Some(d) = e.num("delta")? {
            model = model.with_delta(d).map_err(|err| Error::Config(err.to_string()))?;
        }

        let mut s = SearchConfig::for_model(&model);
        if let Some(x) = e.num("epsilon")? {
            s.epsilon = x;
        }
        if let Some(x) = e.num("eta")? {
            s.eta = x;
        }
        if let Some(x) = e.int("max_reverse_len")? {
            s.max_reverse_len = x as usize;
        }
        if let Some(x) = e.num("quantile")? {
            s.quantile = x;
        }
        if let Some(w) = e.word("pen_strategy")? {
            s.pen_strategy = w.parse::<PenStrategy>()?;
        }
        if let Some(x) = e.num("ball_radius")? {
            s.ball_radius = x;
        }
        if let Some(x) = e.int("stages_max")? {
            s.stages_max = x as usize;
        }
        if let Some(w) = e.word("splice")? {
            s.splice = w.parse::<SpliceRule>()?;
        }
        if let Some(w) = e.word("norm")? {
            s.norm = w.parse::<GradNorm>()?;
        }
        if let Some(w) = e.word("mode")? {
            s.mode = w.parse::<CostMode>()?;
        }
        if let Some(x) = e.num("mean_tol")? {
            s.mean_tol = x;
        }
        if let Some(x) = e.int("mean_max_steps")? {
            s.mean_max_steps = x as usize;
        }
        if let Some(x) = e.int("runners_up")? {
            s.runners_up = x as usize;
        }
        s.validate()?;

        if let Some(h) = e.histogram("H")? {
            cfg.h = Some(h);
        }
        if let Some(g) = e.histogram("G")? {
            cfg.g = Some(g);
        }
        for (name, hist) in [("H", &cfg.h), ("G", &cfg.g)] {
            if let Some(x) = hist {
                if x.len() != model.g() {
                    return Err(Error::Config(format!("{name} has {} entries but F has {}", x.len(), model.g())));
                }
            }
        }
        if let Some(x) = e.int("seed")? {
            cfg.seed = x;
        }
        if let Some(x) = e.int("trials")? {
            cfg.trials = x;
        }
        if let Some(x) = e.int("T")? {
            cfg.days = x as usize;
        }
        if let Some(x) = e.num("sweep_g1")? {
            cfg.sweep_g1 = x;
        }
        if let Some(r) = e.range("sweep_targets")? {
            cfg.sweep_targets = r;
        }
        if let Some(r) = e.range("sweep_initials")? {
            cfg.sweep_initials = r;
        }
        if let Some(x) = e.num("landscape_epsilon")? {
            cfg.landscape_epsilon = x;
        }
        if let Some(v) = e.vec("landscape_quantiles")? {
            cfg.landscape_quantiles = v;
        }

        let ld = &mut cfg.ld;
        let ld_f = e.vec("ld_F")?;
        let ld_q = e.matrix("ld_Q")?;
        let ld_m = e.num("ld_m")?;
        if ld_f.is_some() || ld_q.is_some() || ld_m.is_some() {
            ld.model = ModelParams::new(
                ld_f.unwrap_or_else(|| ld.model.f.clone()),
                ld_q.unwrap_or_else(|| ld.model.q.clone()),
                ld_m.unwrap_or(ld.model.m),
                100,
            )
            .map_err(|err| Error::Config(format!("ld model: {err}")))?;
        }
        if let Some(h) = e.histogram("ld_H")? {
            ld.h = h;
        }
        if let Some(g) = e.histogram("ld_G")? {
            ld.g = g;
        }
        if let Some(v) = e.vec("ld_N")? {
            ld.n_values = to_ints("ld_N", &v)?;
        }
        if let Some(x) = e.int("ld_trials")? {
            ld.trials = x;
        }
        if let Some(h) = e.histogram("multinomial_J")? {
            ld.multinomial_j = h;
        }
        if let Some(g) = e.histogram("multinomial_G")? {
            ld.multinomial_g = g;
        }
        if let Some(v) = e.vec("multinomial_N")? {
            ld.multinomial_n = to_ints("multinomial_N", &v)?;
        }
        if let Some(x) = e.int("stirling_n_max")? {
            ld.stirling_n_max = x;
        }

        if let Some((k, (ln, _))) = e.map.into_iter().next() {
            return Err(Error::Config(format!("line {ln}: unknown key '{k}'")));
        }
        cfg.model = model;
        cfg.search = s;
        Ok(cfg)
    }
}

fn to_ints(key: &str, v: &[f64]) -> Result<Vec<u64>> {
    v.iter()
        .map(|&x| {
            if x >= 1.0 && x.fract() == 0.0 {
                Ok(x as u64)
            } else {
                Err(Error::Config(format!("{key}: {x} is not a positive integer")))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_power_notation_and_matrix() {
        let cfg = RunConfig::parse(
            "F = [200, 200^1.08, 200^1.12]  # growth\nQ = [[0,0.5,0.5],[0,0,1],[0,0,0]]\nm = 1e-6\nN = 1000000\n",
        )
        .unwrap();
        assert_eq!(cfg.model.f[1], 200f64.powf(1.08));
        assert_eq!(cfg.model.q[1][2], 1.0);
        assert_eq!(cfg.model.delta, 5e-5);
        assert_eq!(cfg.seed, DEFAULT_SEED);
    }

    #[test]
    fn search_and_run_keys() {
        let cfg = RunConfig::parse(
            "pen_strategy = full_grid\nepsilon = 2e-3\nsplice = total\nnorm = euclidean\nmode = exact\nH = [0.999, 0.0005, 0.0005]\nseed = 7\nsweep_targets = [0.2, 0.3, 0.05]\n",
        )
        .unwrap();
        assert_eq!(cfg.search.pen_strategy, PenStrategy::FullGrid);
        assert_eq!(cfg.search.splice, SpliceRule::Total);
        assert_eq!(cfg.search.norm, GradNorm::Euclidean);
        assert_eq!(cfg.search.mode, CostMode::Exact);
        assert!((cfg.h.unwrap()[0] - 0.999).abs() < 1e-15);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.sweep_targets, (0.2, 0.3, 0.05));
    }

    #[test]
    fn field_level_errors() {
        let err = |t: &str| RunConfig::parse(t).unwrap_err().to_string();
        assert!(err("bogus = 1").contains("unknown key 'bogus'"));
        assert!(err("m = abc").contains("m must be a number"));
        assert!(err("F = [3, 2]").contains("increasing"));
        assert!(err("m = 1e-3").contains("above"));
        assert!(err("H = [0.5, 0.6, 0.1]").contains("H"));
        assert!(err("epsilon = -1").contains("epsilon"));
        assert!(err("pen_strategy = spiral").contains("unknown strategy"));
        assert!(err("F = [1.5, 2\n").contains("line 1"));
        assert!(err("m = 1\nm = 2").contains("duplicate"));
    }

    #[test]
    fn shipped_config_is_reference() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/reference.conf");
        let cfg = RunConfig::from_file(path).unwrap();
        let r = ModelParams::reference();
        assert_eq!(cfg.model.f, r.f);
        assert_eq!(cfg.model.q, r.q);
        assert_eq!(cfg.model.m, r.m);
        assert_eq!(cfg.model.n, r.n);
        assert_eq!(cfg.search.epsilon, 1e-4);
    }
}

//! Python bindings: `import pyevopath`.

use evopath::cost::{one_step_cost, CostMode};
use evopath::geodesic::{self, PenStrategy, SearchConfig, Trajectory};
use evopath::simulate::{run_chain, RngStream};
use evopath::{Histogram, ModelParams};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: evopath::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn hist(v: Vec<f64>) -> PyResult<Histogram> {
    Histogram::new(v).map_err(err)
}

fn mode(s: &str) -> PyResult<CostMode> {
    s.parse().map_err(err)
}

/// Model parameters: growth factors F, mutation matrix Q, rate m, population N.
#[pyclass(name = "Model", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: ModelParams,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (f, q, m, n, delta=None))]
    fn new(f: Vec<f64>, q: Vec<Vec<f64>>, m: f64, n: u64, delta: Option<f64>) -> PyResult<Self> {
        let mut p = ModelParams::new(f, q, m, n).map_err(err)?;
        if let Some(d) = delta {
            p = p.with_delta(d).map_err(err)?;
        }
        Ok(Self { inner: p })
    }

    /// F = (200, 200^1.08, 200^1.12), Q = [[0,.5,.5],[0,0,1],[0,0,0]], m = 1e-6, N = 1e6.
    #[staticmethod]
    fn reference() -> Self {
        Self { inner: ModelParams::reference() }
    }

    #[getter]
    fn f(&self) -> Vec<f64> {
        self.inner.f.clone()
    }

    #[getter]
    fn q(&self) -> Vec<Vec<f64>> {
        self.inner.q.clone()
    }

    #[getter]
    fn m(&self) -> f64 {
        self.inner.m
    }

    #[getter]
    fn n(&self) -> u64 {
        self.inner.n
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    /// Zero-cost successor ζ(H).
    fn mean_step(&self, h: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(evopath::model::mean_step(&hist(h)?, &self.inner).map_err(err)?.as_slice().to_vec())
    }

    /// One-step cost C(H, G).
    #[pyo3(signature = (h, g, mode="first_order"))]
    fn cost(&self, h: Vec<f64>, g: Vec<f64>, mode: &str) -> PyResult<f64> {
        Ok(one_step_cost(&hist(h)?, &hist(g)?, &self.inner, self::mode(mode)?).map_err(err)?.total)
    }

    /// Seed y* for the penultimate point of paths ending at G.
    fn penultimate_seed(&self, g: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(geodesic::penultimate_seed(&hist(g)?, &self.inner).map_err(err)?.as_slice().to_vec())
    }

    /// Most-probable path from H to G; returns a dict.
    #[pyo3(signature = (h, g, strategy="seeded_ball", epsilon=1e-4, ball_radius=4e-3, stages=2, mode="first_order"))]
    #[allow(clippy::too_many_arguments)]
    fn geodesic<'py>(
        &self,
        py: Python<'py>,
        h: Vec<f64>,
        g: Vec<f64>,
        strategy: &str,
        epsilon: f64,
        ball_radius: f64,
        stages: usize,
        mode: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let (h, g) = (hist(h)?, hist(g)?);
        let mut cfg = SearchConfig::for_model(&self.inner);
        cfg.pen_strategy = strategy.parse::<PenStrategy>().map_err(err)?;
        cfg.epsilon = epsilon;
        cfg.ball_radius = ball_radius;
        cfg.stages_max = stages;
        cfg.mode = self::mode(mode)?;
        let p = &self.inner;
        let r = py.detach(|| geodesic::multi_stage_search(&h, &g, &cfg, p)).map_err(err)?;
        let d = trajectory_dict(py, &r.path)?;
        d.set_item("penultimate", r.penultimate.as_slice().to_vec())?;
        d.set_item("nu", r.nu)?;
        d.set_item("kappa", r.kappa)?;
        d.set_item("status", format!("{:?}", r.status).to_lowercase())?;
        d.set_item("stage", r.stage)?;
        d.set_item("lambda0", r.lambda0)?;
        d.set_item("pen_size", r.pen_size)?;
        d.set_item("stage2_candidates", r.stage2_candidates)?;
        Ok(d)
    }

    /// Stochastic trajectory of `days` days from H; returns a dict.
    #[pyo3(signature = (h, days, seed=42))]
    fn simulate<'py>(&self, py: Python<'py>, h: Vec<f64>, days: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let h = hist(h)?;
        let mut rng = RngStream::new(seed, 0);
        let t = run_chain(&h, days, &self.inner, &mut rng).map_err(err)?;
        trajectory_dict(py, &t)
    }

    fn __repr__(&self) -> String {
        format!("Model(f={:?}, m={:e}, n={})", self.inner.f, self.inner.m, self.inner.n)
    }
}

fn trajectory_dict<'py>(py: Python<'py>, t: &Trajectory) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("points", t.points.iter().map(|h| h.as_slice().to_vec()).collect::<Vec<_>>())?;
    d.set_item("step_costs", t.step_costs.clone())?;
    d.set_item("total_cost", t.total_cost)?;
    Ok(d)
}

/// KL(G, J) with the convention 0 log 0 = 0.
#[pyfunction]
fn kl_divergence(g: Vec<f64>, j: Vec<f64>) -> PyResult<f64> {
    Ok(evopath::cost::kl_divergence(&hist(g)?, &hist(j)?))
}

#[pymodule]
fn pyevopath(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    Ok(())
}

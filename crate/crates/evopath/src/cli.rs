//! Command-line front end. Every subcommand writes its artefacts under `--out`
//! plus a `timing.json`; the other JSON outputs are deterministic for a fixed
//! config and seed.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::cost::{one_step_cost, CostMode};
use crate::error::{Error, Result};
use crate::geodesic::{
    fixed_point_expansion, mean_trajectory, multi_stage_search, pen_landscape, sweep_initials, sweep_targets,
    terminal_fixed_point, PenStrategy,
};
use crate::io;
use crate::config::INPUT_TOL;
use crate::model::{validate_histogram, Histogram};
use crate::simulate::{run_chain, RngStream};
use crate::validate::{elementary_bounds_check, kernel_ld_check, multinomial_ld_check};

#[derive(Parser, Debug)]
#[command(name = "evopath", version, about = "Most-probable paths of rare evolutionary transitions")]
pub struct Cli {
    /// Run configuration (`key = value` lines); defaults to the reference model.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// PEN strategy: full_grid | quantile_pruned | seeded_ball.
    #[arg(long, global = true)]
    pub strategy: Option<PenStrategy>,
    /// Cost evaluation: exact | first_order.
    #[arg(long, global = true)]
    pub mode: Option<CostMode>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Zero-cost trajectory from H and its terminal fixed point.
    MeanPath {
        #[arg(long, value_parser = parse_hist)]
        h: Option<Histogram>,
    },
    /// One-step cost C(H, G) with its minimising mutation matrix.
    Cost {
        #[arg(long, value_parser = parse_hist)]
        h: Option<Histogram>,
        #[arg(long, value_parser = parse_hist)]
        g: Option<Histogram>,
    },
    /// Most-probable path from H to G.
    Geodesic {
        #[arg(long, value_parser = parse_hist)]
        h: Option<Histogram>,
        #[arg(long, value_parser = parse_hist)]
        g: Option<Histogram>,
        /// Cap on search stages (1 disables the second stage).
        #[arg(long)]
        stages: Option<usize>,
    },
    /// Geodesics to G = (G_1, w, 1 − G_1 − w) over a range of w.
    SweepTargets {
        #[arg(long, value_parser = parse_hist)]
        h: Option<Histogram>,
        #[arg(long)]
        stages: Option<usize>,
    },
    /// Geodesics from H = (w, (1 − w)/2, (1 − w)/2) over a range of w.
    SweepInitials {
        #[arg(long, value_parser = parse_hist)]
        g: Option<Histogram>,
        #[arg(long)]
        stages: Option<usize>,
    },
    /// Stochastic population trajectory.
    Simulate {
        #[arg(long, value_parser = parse_hist)]
        h: Option<Histogram>,
        /// Days to simulate.
        #[arg(long)]
        days: Option<usize>,
    },
    /// Elementary bounds and large-deviation checks.
    Validate {
        /// Skip the Monte-Carlo kernel check.
        #[arg(long)]
        skip_kernel: bool,
    },
    /// h(y, G) over the full penultimate grid.
    PenLandscape {
        #[arg(long, value_parser = parse_hist)]
        g: Option<Histogram>,
    },
}

fn parse_hist(s: &str) -> std::result::Result<Histogram, String> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    validate_histogram(&v, INPUT_TOL).map_err(|e| e.to_string())
}

/// Short machine-readable class of an error, printed as `error[kind]`.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidHistogram(_) => "invalid_histogram",
        Error::InvalidParams(_) => "invalid_params",
        Error::OutsideK(_) => "outside_k",
        Error::Boundary(_) => "boundary",
        Error::Singular { .. } => "singular",
        Error::RejectionCap(_) => "rejection_cap",
        Error::NonFinite(_) => "non_finite",
        Error::EmptyPen => "empty_pen",
        Error::NoSplice(_) => "no_splice",
        Error::Config(_) => "config",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

fn need(h: Option<Histogram>, fallback: &Option<Histogram>, name: &str) -> Result<Histogram> {
    h.or_else(|| fallback.clone())
        .ok_or_else(|| Error::Config(format!("no {name} given (set it in the config or pass --{})", name.to_lowercase())))
}

fn checked_dim(h: Histogram, cfg: &RunConfig, name: &str) -> Result<Histogram> {
    if h.len() != cfg.model.g() {
        return Err(Error::Config(format!("{name} has {} entries, model has {} genotypes", h.len(), cfg.model.g())));
    }
    Ok(h)
}

#[derive(Serialize)]
struct Timing<'a> {
    command: &'a str,
    wall_seconds: f64,
    threads: usize,
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error[{}]: {e}", error_kind(&e));
            2
        }
    }
}

/// Ok(false) means the command ran but a check it performs failed.
pub fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be ≥ 1".into()));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::reference(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(s) = cli.strategy {
        cfg.search.pen_strategy = s;
    }
    if let Some(m) = cli.mode {
        cfg.search.mode = m;
    }
    let out = cli.out.as_path();
    std::fs::create_dir_all(out)?;
    let started = Instant::now();
    let (name, ok) = dispatch(cli.command, &mut cfg, out)?;
    io::write_json(
        &out.join("timing.json"),
        &Timing { command: name, wall_seconds: started.elapsed().as_secs_f64(), threads: rayon::current_num_threads() },
    )?;
    Ok(ok)
}

fn set_stages(cfg: &mut RunConfig, stages: Option<usize>) -> Result<()> {
    if let Some(s) = stages {
        cfg.search.stages_max = s;
        cfg.search.validate()?;
    }
    Ok(())
}

fn dispatch(cmd: Command, cfg: &mut RunConfig, out: &Path) -> Result<(&'static str, bool)> {
    let p = cfg.model.clone();
    let g = p.g();
    match cmd {
        Command::MeanPath { h } => {
            let h = checked_dim(need(h, &cfg.h, "H")?, cfg, "H")?;
            let mp = mean_trajectory(&h, &p, cfg.search.mean_tol, cfg.search.mean_max_steps)?;
            let fixed = terminal_fixed_point(&h, &p)?;
            let approx = fixed_point_expansion(&h, &p);
            io::write_trajectory(out, "mean_path", &mp.trajectory, g)?;
            io::write_json(
                &out.join("mean_path_summary.json"),
                &json!({
                    "H": h,
                    "steps": mp.trajectory.len(),
                    "converged": mp.converged,
                    "fixed_point": fixed,
                    "fixed_point_expansion": approx,
                }),
            )?;
            println!("mean path: {} points, converged = {}", mp.trajectory.len(), mp.converged);
            println!("fixed point: {:?}", fixed.as_slice());
            Ok(("mean-path", true))
        }
        Command::Cost { h, g: target } => {
            let h = checked_dim(need(h, &cfg.h, "H")?, cfg, "H")?;
            let target = checked_dim(need(target, &cfg.g, "G")?, cfg, "G")?;
            let exact = one_step_cost(&h, &target, &p, CostMode::Exact)?;
            let fo = one_step_cost(&h, &target, &p, CostMode::FirstOrder)?;
            println!("C(H,G) exact        = {:.9e}  (mutation {:.3e}, KL {:.9e})", exact.total, exact.mut_part, exact.kl_part);
            println!("C(H,G) first order  = {:.9e}", fo.total);
            io::write_json(&out.join("cost.json"), &json!({ "H": h, "G": target, "exact": exact, "first_order": fo }))?;
            Ok(("cost", true))
        }
        Command::Geodesic { h, g: target, stages } => {
            set_stages(cfg, stages)?;
            let h = checked_dim(need(h, &cfg.h, "H")?, cfg, "H")?;
            let target = checked_dim(need(target, &cfg.g, "G")?, cfg, "G")?;
            let r = multi_stage_search(&h, &target, &cfg.search, &p)?;
            io::write_trajectory(out, "geodesic", &r.path, g)?;
            io::write_json(
                &out.join("geodesic_summary.json"),
                &json!({
                    "H": h,
                    "G": target,
                    "search": cfg.search,
                    "total_cost": r.path.total_cost,
                    "length": r.path.len(),
                    "penultimate": r.penultimate,
                    "nu": r.nu,
                    "kappa": r.kappa,
                    "status": r.status,
                    "stage": r.stage,
                    "lambda0": r.lambda0,
                    "pen_size": r.pen_size,
                    "stage2_candidates": r.stage2_candidates,
                    "stage2_best": r.stage2_best,
                    "min_ess": r.path.min_ess(),
                    "runners_up": r.runners_up,
                }),
            )?;
            println!(
                "λ = {:.6e} over {} points ({:?}, stage {}), penultimate {:?}",
                r.path.total_cost,
                r.path.len(),
                r.status,
                r.stage,
                r.penultimate.as_slice()
            );
            print!("{}", io::trajectory_csv(&r.path, g));
            Ok(("geodesic", true))
        }
        Command::SweepTargets { h, stages } => {
            set_stages(cfg, stages)?;
            let h = checked_dim(need(h, &cfg.h, "H")?, cfg, "H")?;
            let rows = sweep_targets(&h, cfg.sweep_g1, cfg.sweep_targets, &cfg.search, &p)?;
            std::fs::write(out.join("sweep_targets.csv"), io::sweep_csv(&rows))?;
            io::write_json(&out.join("sweep_targets.json"), &rows)?;
            print!("{}", io::sweep_csv(&rows));
            Ok(("sweep-targets", true))
        }
        Command::SweepInitials { g: target, stages } => {
            set_stages(cfg, stages)?;
            let target = checked_dim(need(target, &cfg.g, "G")?, cfg, "G")?;
            let rows = sweep_initials(&target, cfg.sweep_initials, &cfg.search, &p)?;
            std::fs::write(out.join("sweep_initials.csv"), io::sweep_csv(&rows))?;
            io::write_json(&out.join("sweep_initials.json"), &rows)?;
            print!("{}", io::sweep_csv(&rows));
            Ok(("sweep-initials", true))
        }
        Command::Simulate { h, days } => {
            let h = checked_dim(need(h, &cfg.h, "H")?, cfg, "H")?;
            let days = days.unwrap_or(cfg.days);
            let mut rng = RngStream::new(cfg.seed, 0);
            let t = run_chain(&h, days, &p, &mut rng)?;
            io::write_trajectory(out, "simulation", &t, g)?;
            println!("simulated {days} days (seed {}); final histogram {:?}", cfg.seed, t.points.last().map(|x| x.as_slice()));
            Ok(("simulate", true))
        }
        Command::Validate { skip_kernel } => {
            let ld = &cfg.ld;
            let elementary = elementary_bounds_check(ld.stirling_n_max)?;
            let multinomial = multinomial_ld_check(&ld.multinomial_j, &ld.multinomial_g, &ld.multinomial_n)?;
            let kernel = if skip_kernel {
                None
            } else {
                Some(kernel_ld_check(&ld.h, &ld.g, &ld.model, &ld.n_values, ld.trials, cfg.seed)?)
            };
            let ok = elementary.pass && multinomial.pass && kernel.as_ref().is_none_or(|k| k.pass);
            println!("elementary bounds: {}", verdict(elementary.pass));
            println!(
                "multinomial LD:    {}  (gaps {:?})",
                verdict(multinomial.pass),
                multinomial.gaps.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>()
            );
            if let Some(k) = &kernel {
                println!(
                    "kernel LD:         {}  (theory {:.6e}, slope {:.3}, envelope {:.3})",
                    verdict(k.pass),
                    k.theory_value,
                    k.regression_slope,
                    k.envelope_constant
                );
            }
            io::write_json(
                &out.join("validate.json"),
                &json!({ "elementary": elementary, "multinomial": multinomial, "kernel": kernel, "pass": ok }),
            )?;
            Ok(("validate", ok))
        }
        Command::PenLandscape { g: target } => {
            let target = checked_dim(need(target, &cfg.g, "G")?, cfg, "G")?;
            let l = pen_landscape(&target, cfg.landscape_epsilon, &cfg.landscape_quantiles, cfg.search.norm, p.delta, &p)?;
            std::fs::write(out.join("pen_landscape.csv"), io::landscape_csv(&l))?;
            io::write_json(
                &out.join("pen_landscape_summary.json"),
                &json!({
                    "G": target,
                    "epsilon": l.epsilon,
                    "points": l.points.len(),
                    "seed": l.seed,
                    "h_seed": l.h_seed,
                    "constants": l.constants,
                }),
            )?;
            println!("{} grid points; h(y*, G) = {:.4e}", l.points.len(), l.h_seed);
            for c in &l.constants {
                println!("  q = {:.2}: h_q = {:.4e}, c = {:.4}", c.quantile, c.threshold, c.c);
            }
            Ok(("pen-landscape", true))
        }
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

//! CSV and JSON output.
//!
//! Trajectory CSVs carry one row per point: `step,gen1,…,genG,step_cost`, where
//! `step_cost` is the cost of moving to the next row (empty on the last row).
//! Numbers are 6 significant digits in scientific notation; the JSON sidecar
//! keeps full precision and reloads bit-for-bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{Landscape, SweepRow, Trajectory};
use crate::model::Histogram;

/// `x` with 6 significant digits and a signed two-digit exponent, e.g. `9.85870e-01`.
pub fn fmt_sci(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.5e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    format!("{mant}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

fn header(out: &mut String, genotypes: usize) {
    out.push_str("step");
    for j in 1..=genotypes {
        let _ = write!(out, ",gen{j}");
    }
    out.push_str(",step_cost\n");
}

pub fn trajectory_csv(t: &Trajectory, genotypes: usize) -> String {
    let mut out = String::new();
    header(&mut out, genotypes);
    for (i, h) in t.points.iter().enumerate() {
        let _ = write!(out, "{}", i + 1);
        for &x in h.as_slice() {
            let _ = write!(out, ",{}", fmt_sci(x));
        }
        out.push(',');
        if let Some(&c) = t.step_costs.get(i) {
            out.push_str(&fmt_sci(c));
        }
        out.push('\n');
    }
    out
}

/// A float that survives JSON even when non-finite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Num {
    Finite(f64),
    Special(Special),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
enum Special {
    #[serde(rename = "nan")]
    Nan,
    #[serde(rename = "inf")]
    Inf,
    #[serde(rename = "-inf")]
    NegInf,
}

impl From<f64> for Num {
    fn from(x: f64) -> Self {
        if x.is_finite() {
            Num::Finite(x)
        } else if x.is_nan() {
            Num::Special(Special::Nan)
        } else if x > 0.0 {
            Num::Special(Special::Inf)
        } else {
            Num::Special(Special::NegInf)
        }
    }
}

impl From<Num> for f64 {
    fn from(n: Num) -> f64 {
        match n {
            Num::Finite(x) => x,
            Num::Special(Special::Nan) => f64::NAN,
            Num::Special(Special::Inf) => f64::INFINITY,
            Num::Special(Special::NegInf) => f64::NEG_INFINITY,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TrajectoryFile {
    genotypes: usize,
    points: Vec<Vec<f64>>,
    step_costs: Vec<Num>,
    total_cost: Num,
}

pub fn trajectory_json(t: &Trajectory, genotypes: usize) -> Result<String> {
    let file = TrajectoryFile {
        genotypes,
        points: t.points.iter().map(|h| h.as_slice().to_vec()).collect(),
        step_costs: t.step_costs.iter().map(|&c| c.into()).collect(),
        total_cost: t.total_cost.into(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Reload a sidecar written by [`trajectory_json`]; values are not renormalised.
pub fn parse_trajectory_json(text: &str) -> Result<Trajectory> {
    let file: TrajectoryFile = serde_json::from_str(text)?;
    if !file.points.is_empty() && file.points.len() != file.step_costs.len() + 1 {
        return Err(Error::InvalidHistogram(format!(
            "{} points but {} step costs",
            file.points.len(),
            file.step_costs.len()
        )));
    }
    let mut points = Vec::with_capacity(file.points.len());
    for v in file.points {
        if v.len() != file.genotypes {
            return Err(Error::InvalidHistogram(format!("point has {} coordinates, expected {}", v.len(), file.genotypes)));
        }
        if v.iter().any(|&x| !(x >= 0.0)) || (v.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidHistogram(format!("{v:?} is not a histogram")));
        }
        points.push(serde_json::from_value::<Histogram>(serde_json::Value::from(v))?);
    }
    Ok(Trajectory {
        points,
        step_costs: file.step_costs.into_iter().map(f64::from).collect(),
        total_cost: file.total_cost.into(),
    })
}

pub fn write_trajectory(dir: &Path, stem: &str, t: &Trajectory, genotypes: usize) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{stem}.csv")), trajectory_csv(t, genotypes))?;
    fs::write(dir.join(format!("{stem}.json")), trajectory_json(t, genotypes)?)?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    parse_trajectory_json(&fs::read_to_string(path)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn landscape_csv(l: &Landscape) -> String {
    let g = l.seed.len();
    let mut out = String::new();
    for j in 1..=g {
        let _ = write!(out, "y{j},");
    }
    out.push_str("h\n");
    for (y, h) in &l.points {
        for &x in y {
            let _ = write!(out, "{},", fmt_sci(x));
        }
        let _ = writeln!(out, "{}", fmt_sci(*h));
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let g = rows.first().map_or(3, |r| r.h.len());
    let mut out = String::from("w,total_cost,length,nu,kappa,min_ess,status,stage");
    for j in 1..=g {
        let _ = write!(out, ",pen{j}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.w,
            fmt_sci(r.total_cost),
            r.length,
            r.nu,
            r.kappa,
            fmt_sci(r.min_ess),
            match r.status {
                crate::geodesic::Status::Complete => "complete",
                crate::geodesic::Status::Incomplete => "incomplete",
            },
            r.stage
        );
        for &x in r.penultimate.as_slice() {
            let _ = write!(out, ",{}", fmt_sci(x));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(v: &[f64]) -> Histogram {
        Histogram::new(v.to_vec()).unwrap()
    }

    #[test]
    fn scientific_format() {
        assert_eq!(fmt_sci(0.985870123), "9.85870e-01");
        assert_eq!(fmt_sci(1.686764e-3), "1.68676e-03");
        assert_eq!(fmt_sci(0.0), "0.00000e+00");
        assert_eq!(fmt_sci(123456.7), "1.23457e+05");
        assert_eq!(fmt_sci(-2.5e-120), "-2.50000e-120");
        assert_eq!(fmt_sci(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_layout() {
        let t = Trajectory::new(vec![hist(&[0.99, 0.005, 0.005]), hist(&[0.5, 0.25, 0.25])], vec![1.5e-3]).unwrap();
        let csv = trajectory_csv(&t, 3);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "step,gen1,gen2,gen3,step_cost");
        assert_eq!(lines[1], "1,9.90000e-01,5.00000e-03,5.00000e-03,1.50000e-03");
        assert_eq!(lines[2], "2,5.00000e-01,2.50000e-01,2.50000e-01,");
        assert_eq!(lines.len(), 3);
        assert_eq!(trajectory_csv(&Trajectory::empty(), 2), "step,gen1,gen2,step_cost\n");
    }

    #[test]
    fn sidecar_round_trip_is_bit_exact() {
        let a = hist(&[0.7, 0.2999999999999, 1e-13]);
        let third = hist(&[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        let t = Trajectory::new(vec![a.clone(), third, a], vec![1.0 / 7.0, f64::INFINITY]).unwrap();
        let back = parse_trajectory_json(&trajectory_json(&t, 3).unwrap()).unwrap();
        for (x, y) in t.points.iter().zip(&back.points) {
            for (a, b) in x.as_slice().iter().zip(y.as_slice()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        assert_eq!(back.step_costs[0].to_bits(), t.step_costs[0].to_bits());
        assert_eq!(back.step_costs[1], f64::INFINITY);
        assert_eq!(back.total_cost, f64::INFINITY);

        let nan = Trajectory { points: vec![], step_costs: vec![], total_cost: f64::NAN };
        assert!(parse_trajectory_json(&trajectory_json(&nan, 3).unwrap()).unwrap().total_cost.is_nan());
    }

    #[test]
    fn sidecar_rejects_malformed() {
        assert!(parse_trajectory_json(r#"{"genotypes":2,"points":[[0.5,0.6]],"step_costs":[],"total_cost":0}"#).is_err());
        assert!(parse_trajectory_json(r#"{"genotypes":2,"points":[[0.5,0.5]],"step_costs":[1],"total_cost":0}"#).is_err());
        assert!(parse_trajectory_json(r#"{"genotypes":3,"points":[[0.5,0.5]],"step_costs":[],"total_cost":0}"#).is_err());
    }
}

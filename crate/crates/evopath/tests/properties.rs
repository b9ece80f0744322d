use evopath::cost::{one_step_cost, CostMode};
use evopath::geodesic::Trajectory;
use evopath::io::{fmt_sci, parse_trajectory_json, trajectory_csv, trajectory_json};
use evopath::model::{mean_step, validate_histogram};
use evopath::simulate::{step_day, ChainState, RngStream};
use evopath::{Histogram, ModelParams};
use proptest::prelude::*;

/// Interior histograms on three genotypes, every coordinate ≥ 0.01.
fn interior3() -> impl Strategy<Value = Histogram> {
    (0.05f64..1.0, 0.05f64..1.0, 0.05f64..1.0)
        .prop_map(|(a, b, c)| {
            let s = a + b + c;
            vec![a / s, b / s, c / s]
        })
        .prop_filter("interior", |v| v.iter().all(|&x| x >= 0.01))
        .prop_map(|v| Histogram::new(v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mean_step_stays_on_simplex(h in interior3()) {
        let z = mean_step(&h, &ModelParams::reference()).unwrap();
        prop_assert!((z.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(z.as_slice().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn exact_cost_is_nonnegative(h in interior3(), g in interior3()) {
        let c = one_step_cost(&h, &g, &ModelParams::reference(), CostMode::Exact).unwrap();
        prop_assert!(c.converged);
        prop_assert!(c.total >= -1e-14, "C = {}", c.total);
    }

    #[test]
    fn modes_agree_to_order_m_squared(h in interior3(), g in interior3()) {
        let p = ModelParams::reference();
        let ex = one_step_cost(&h, &g, &p, CostMode::Exact).unwrap().total;
        let fo = one_step_cost(&h, &g, &p, CostMode::FirstOrder).unwrap().total;
        prop_assert!((ex - fo).abs() < 1e-6 * ex.abs().max(1e-3), "{ex} vs {fo}");
    }

    #[test]
    fn cost_vanishes_only_on_the_mean_step(h in interior3(), g in interior3()) {
        let p = ModelParams::reference();
        let z = mean_step(&h, &p).unwrap();
        prop_assert!(one_step_cost(&h, &z, &p, CostMode::Exact).unwrap().total.abs() <= 1e-12);
        if g.sup_dist(&z) > 1e-3 {
            prop_assert!(one_step_cost(&h, &g, &p, CostMode::Exact).unwrap().total > 0.0);
        }
    }

    #[test]
    fn sci_format_keeps_six_digits(x in prop_oneof![1e-300f64..1e-200, 1e-12f64..1.0, 1.0f64..1e12]) {
        let s = fmt_sci(x);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-6 * x, "{x} -> {s}");
        let (mant, exp) = s.split_once('e').unwrap();
        prop_assert_eq!(mant.len(), 7);
        prop_assert!(exp.starts_with('-') || exp.starts_with('+'));
        prop_assert!(exp.len() >= 3);
    }

    #[test]
    fn sidecar_round_trip(pts in prop::collection::vec(interior3(), 1..8)) {
        let t = Trajectory::evaluate(pts, &ModelParams::reference(), CostMode::FirstOrder);
        let back = parse_trajectory_json(&trajectory_json(&t, 3).unwrap()).unwrap();
        prop_assert_eq!(back.total_cost.to_bits(), t.total_cost.to_bits());
        prop_assert_eq!(&back, &t);
        let csv = trajectory_csv(&t, 3);
        prop_assert_eq!(csv.lines().count(), t.len() + 1);
        prop_assert!(csv.lines().last().unwrap().ends_with(','));
    }

    #[test]
    fn simulated_days_conserve_population(seed in any::<u64>(), k in 1u64..999) {
        let n = 1000;
        let rest = n - k;
        let h = validate_histogram(&[k as f64 / n as f64, (rest / 2) as f64 / n as f64, (rest - rest / 2) as f64 / n as f64], 1e-12).unwrap();
        let p = ModelParams::reference().with_n(n).unwrap();
        let mut a = ChainState::from_histogram(&h, n).unwrap();
        let mut b = a.clone();
        let (mut ra, mut rb) = (RngStream::new(seed, 0), RngStream::new(seed, 0));
        for _ in 0..3 {
            step_day(&mut a, &p, &mut ra).unwrap();
            step_day(&mut b, &p, &mut rb).unwrap();
            prop_assert_eq!(a.n(), n);
        }
        prop_assert_eq!(a, b);
    }
}

use ltrc::data::Span;
use ltrc::estimators::{logrank_scores, peto_scores, CumulativeHazard, SurvivalCurve};
use ltrc::ltrcart::{poisson_node_deviance, NodeStats};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Textbook right-censored product-limit estimate: walk the sorted times, removing
/// everyone who exits at each time after applying the event factor.
fn km_oracle(times: &[f64], events: &[bool], at: f64) -> f64 {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut remaining = times.len();
    let mut s = 1.0;
    let mut k = 0;
    while k < order.len() && times[order[k]] <= at {
        let t = times[order[k]];
        let mut deaths = 0;
        let mut leaving = 0;
        while k < order.len() && times[order[k]] == t {
            deaths += usize::from(events[order[k]]);
            leaving += 1;
            k += 1;
        }
        s *= 1.0 - deaths as f64 / remaining as f64;
        remaining -= leaving;
    }
    s
}

fn sample(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<bool>) {
    let coarse = rng.random_bool(0.5);
    (0..n)
        .map(|_| {
            let t: f64 = rng.random_range(0.01..5.0);
            (if coarse { t.ceil() } else { t }, rng.random_bool(0.6))
        })
        .unzip()
}

#[test]
fn km_matches_textbook_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=30);
        let (times, events) = sample(&mut rng, n);
        let spans: Vec<Span<f64>> = times.iter().zip(&events).map(|(&t, &e)| Span::new(0.0, t, e)).collect();
        let km = SurvivalCurve::product_limit(&spans);
        let mut probes = times.clone();
        probes.extend(times.iter().map(|t| t - 1e-9));
        probes.extend([0.0, 6.0]);
        for p in probes {
            worst = worst.max((km.eval(p) - km_oracle(&times, &events, p)).abs());
        }
    }
    assert!(worst < 1e-12, "max difference {worst}");
}

#[test]
fn peto_scores_sum_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let n = rng.random_range(2..=50);
        let (times, mut events) = sample(&mut rng, n);
        // keep the largest time an event so no censored score sits at S = 0
        let last = (0..n).max_by(|&a, &b| times[a].total_cmp(&times[b])).unwrap();
        events[last] = true;
        let spans: Vec<Span<f64>> = times.iter().zip(&events).map(|(&t, &e)| Span::new(0.0, t, e)).collect();
        let sum: f64 = peto_scores(&spans).unwrap().iter().sum();
        assert!(sum.abs() < 1e-10, "sum {sum}");
    }
}

/// Per-observation deviance residual `2[δ ln(δ / (Λ θ)) - (δ - Λ θ)]`, with `0 ln 0 = 0`.
fn deviance_residual(delta: f64, cum_hazard: f64, theta: f64) -> f64 {
    let fitted = cum_hazard * theta;
    let log_part = if delta == 0.0 { 0.0 } else { delta * (delta / fitted).ln() };
    2.0 * (log_part - (delta - fitted))
}

#[test]
fn poisson_node_deviance_equals_residual_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let n = rng.random_range(1..=40);
        let events: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let e: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..3.0)).collect();
        let stats = NodeStats::compute(&events, &e);
        let counts: Vec<f64> = events.iter().map(|&d| f64::from(u8::from(d))).collect();
        let oracle: f64 = counts.iter().zip(&e).map(|(&c, &t)| deviance_residual(c, t, stats.theta)).sum();
        assert_eq!(poisson_node_deviance(&counts, &e, stats.theta), oracle);
        assert_eq!(stats.deviance, oracle);
    }
}

fn ltrc_spans() -> impl Strategy<Value = Vec<Span<f64>>> {
    prop::collection::vec((0.0f64..3.0, 0.01f64..5.0, any::<bool>()), 1..40)
        .prop_map(|v| v.into_iter().map(|(l, w, e)| Span::new(l, l + w, e)).collect())
}

proptest! {
    #[test]
    fn survival_non_increasing_and_hazard_non_decreasing(spans in ltrc_spans()) {
        let s = SurvivalCurve::product_limit(&spans);
        let h = CumulativeHazard::nelson_aalen(&spans);
        prop_assert!(s.values().windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(h.values().windows(2).all(|w| w[1] >= w[0]));
        // both only move at event times
        for k in s.knots() {
            prop_assert!(spans.iter().any(|sp| sp.event && sp.right == *k));
        }
        for k in h.knots() {
            prop_assert!(spans.iter().any(|sp| sp.event && sp.right == *k));
        }
    }

    #[test]
    fn delayed_entry_scores_reduce_to_peto(times in prop::collection::vec((0.01f64..5.0, any::<bool>()), 2..40)) {
        let spans: Vec<Span<f64>> = times.iter().map(|&(t, e)| Span::new(0.0, t, e)).collect();
        if let (Ok(a), Ok(b)) = (peto_scores(&spans), logrank_scores(&spans)) {
            prop_assert_eq!(a, b);
        }
    }
}

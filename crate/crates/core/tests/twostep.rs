mod common;

use std::time::Instant;

use refprice::estimator::ParamLayout;
use refprice::likelihood::Likelihood;
use refprice::twostep::{fit_conditional, grid_from_step, grid_search, split_panel, TwoStepConfig};
use refprice::{presets, CarryoverWeight, EstimatorOptions};

fn opts(segments: usize, starts: usize) -> EstimatorOptions {
    EstimatorOptions::default().with_segments(segments).with_starts(starts)
}

fn config(grid: Vec<f64>) -> TwoStepConfig {
    TwoStepConfig {
        grid,
        init_fraction: 0.3,
    }
}

#[test]
fn grid_recovers_homogeneous_pi() {
    let panel = common::simulate(&common::spec(common::one_segment_truth(), 300, 100, 31, true));
    let r = grid_search(&panel, &config(grid_from_step(0.05).unwrap()), &opts(1, 1)).unwrap();
    assert!([0.35, 0.40, 0.45].iter().any(|p| (r.pi_hat - p).abs() < 1e-12), "pi_hat = {}", r.pi_hat);
    assert_eq!(r.profile.len(), 21);
    let best = r.profile.iter().filter_map(|p| p.loglik).fold(f64::NEG_INFINITY, f64::max);
    let winner = r.profile.iter().find(|p| p.pi == r.pi_hat).unwrap();
    assert_eq!(winner.loglik, Some(best));
    assert_eq!(r.fit.loglik, best);
    assert_eq!(r.fit.pinned_pi, Some(r.pi_hat));

    let again = grid_search(&panel, &config(grid_from_step(0.05).unwrap()), &opts(1, 1)).unwrap();
    assert_eq!(again.profile, r.profile);
}

#[test]
fn single_point_grid() {
    let panel = common::simulate(&common::spec(common::one_segment_truth(), 40, 20, 2, true));
    let r = grid_search(&panel, &config(vec![0.5]), &opts(1, 1)).unwrap();
    assert_eq!(r.pi_hat, 0.5);
    assert_eq!(r.profile.len(), 1);
}

#[test]
fn conditional_fit_at_true_pi_recovers_coefficients() {
    let truth = common::one_segment_truth();
    let panel = common::simulate(&common::spec(truth.clone(), 300, 100, 8, true));
    let split = split_panel(&panel, 0.3).unwrap();
    let f = fit_conditional(&split, CarryoverWeight::new(0.4).unwrap(), &opts(1, 1)).unwrap();
    assert!(f.converged);
    let est = &f.parameters.segments()[0];
    let t = &truth.segments()[0];
    let se = &f.std_errors[0];
    let within = |e: f64, truth: f64, se: Option<f64>| (e - truth).abs() <= 3.0 * se.unwrap();
    assert!(within(est.alpha0, t.alpha0, se.alpha0));
    assert!(within(est.alpha1, t.alpha1, se.alpha1));
    assert!(within(est.beta_gain, t.beta_gain, se.beta_gain));
    assert!(within(est.beta_loss, t.beta_loss, se.beta_loss));
    assert!(within(est.beta_price, t.beta_price, se.beta_price));
    for j in 0..3 {
        assert!(within(est.intercepts[j], t.intercepts[j], se.intercepts[j]));
    }
    assert_eq!(se.pi, None);
}

#[test]
fn pinned_values_at_the_edges_and_from_the_preset() {
    let panel = common::simulate(&common::spec(common::two_segment_truth(), 60, 30, 4, true));
    let split = split_panel(&panel, 0.3).unwrap();
    let at = |pi: f64| fit_conditional(&split, CarryoverWeight::new(pi).unwrap(), &opts(2, 1)).unwrap();
    let (zero, one) = (at(0.0), at(1.0));
    assert!(zero.loglik.is_finite() && one.loglik.is_finite());
    assert_ne!(zero.loglik, one.loglik);

    let pooled = presets::twostep().unwrap().truth.unwrap().segments()[0].pi;
    assert_eq!(pooled.value(), 0.8315);
    let f = at(pooled.value());
    assert_eq!(f.pinned_pi, Some(0.8315));
    assert!(f.parameters.segments().iter().all(|s| s.pi == pooled));
}

#[test]
fn pinned_layout_drops_one_slot_per_segment() {
    for s in 1..4 {
        let free = ParamLayout::new(s, 4).unwrap();
        let pinned = free.with_pinned_pi(CarryoverWeight::new(0.3).unwrap());
        assert_eq!(free.len() - pinned.len(), s);
    }
}

#[test]
fn split_errors_list_households() {
    let panel = common::simulate(&common::spec(common::one_segment_truth(), 3, 4, 1, true));
    let err = split_panel(&panel, 0.9).unwrap_err().to_string();
    assert!(err.contains("1, 2, 3"), "{err}");
    assert_eq!(split_panel(&panel, 0.5).unwrap().init_periods(), &[2, 2, 2]);
}

#[test]
fn calibration_scores_only_later_periods() {
    let panel = common::simulate(&common::spec(common::one_segment_truth(), 20, 10, 6, true));
    let split = split_panel(&panel, 0.3).unwrap();
    let opts = opts(1, 1);
    let full = Likelihood::new(&panel).loglik(&common::one_segment_truth()).unwrap();
    let cal = split.calibration_likelihood(&opts).loglik(&common::one_segment_truth()).unwrap();
    assert!(cal.total > full.total);
}

#[test]
fn cost_grows_linearly_with_grid_size() {
    let panel = common::simulate(&common::spec(common::one_segment_truth(), 200, 60, 12, false));
    let time = |n: usize| {
        let grid: Vec<f64> = (0..n).map(|i| 0.40 + 0.002 * i as f64).collect();
        (0..2)
            .map(|_| {
                let t = Instant::now();
                let mut o = opts(1, 1);
                o.skip_standard_errors = true;
                grid_search(&panel, &config(grid.clone()), &o).unwrap();
                t.elapsed().as_secs_f64()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let (small, large) = (time(4), time(8));
    let ratio = large / small;
    assert!((ratio / 2.0 - 1.0).abs() <= 0.3, "8-point / 4-point time ratio {ratio}");
}

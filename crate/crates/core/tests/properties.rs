use std::sync::Arc;

use duplex_core::data::{resample, split, MarketData, MarketFrame};
use duplex_core::env::{
    pnl_reward, project_action, transition, AccountingMode, Env, EnvConfig, WeightVector, WEIGHT_TOLERANCE,
};
use duplex_core::metrics::{max_drawdown, report_from_values, MetricsOptions};
use duplex_core::preprocess::build_state_at;
use duplex_core::sppo::{select_weights, FrontierPoint, SppoConfig};
use duplex_core::synth;
use proptest::prelude::*;

fn weights(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, m + 1)
}

fn scaled(frame: &MarketFrame, asset: usize, k: f64) -> MarketFrame {
    let mut f = frame.clone();
    for c in &mut f.candles[asset] {
        c.open *= k;
        c.high *= k;
        c.low *= k;
        c.close *= k;
    }
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn strict_value_change_is_pnl_plus_interest_minus_costs(
        raw in weights(3),
        prev in prop::collection::vec(-800.0f64..800.0, 3),
        returns in prop::collection::vec(-0.2f64..0.2, 3),
        value in 10.0f64..1e5,
        fee in 0.0f64..0.01,
    ) {
        let action = project_action(&raw);
        let cfg = EnvConfig { fee, ..Default::default() };
        let (d, grown, _) = transition(value, &prev, &action, &returns, &cfg).unwrap();
        let expected = d.asset_pnl() + d.interest - d.cost_total();
        prop_assert!((d.value_after - value - expected).abs() <= 1e-9 * value.max(1.0));
        for ((g, x), r) in grown.iter().zip(&d.rebalanced).zip(&returns) {
            prop_assert_eq!(*g, x * (1.0 + r));
        }
    }

    #[test]
    fn paper_mode_leaves_costs_out_of_the_value(
        raw in weights(2),
        returns in prop::collection::vec(-0.1f64..0.1, 2),
        fee in 0.0f64..0.01,
    ) {
        let action = project_action(&raw);
        let strict = EnvConfig { fee, ..Default::default() };
        let paper = EnvConfig { accounting_mode: AccountingMode::Paper, ..strict.clone() };
        let (s, _, _) = transition(1000.0, &[0.0, 0.0], &action, &returns, &strict).unwrap();
        let (p, _, _) = transition(1000.0, &[0.0, 0.0], &action, &returns, &paper).unwrap();
        prop_assert_eq!(p.rebalanced, s.rebalanced.clone());
        prop_assert!((p.value_after - s.value_after - s.cost_total()).abs() < 1e-9);
    }

    #[test]
    fn fees_never_flip_a_position(raw in weights(2), prev in prop::collection::vec(-2000.0f64..2000.0, 2)) {
        let action = project_action(&raw);
        let cfg = EnvConfig { fee: 0.5, ..Default::default() };
        let (d, _, _) = transition(1000.0, &prev, &action, &[0.0, 0.0], &cfg).unwrap();
        let capital = d.capital;
        for (x, w) in d.rebalanced.iter().zip(&action.asset_weights) {
            prop_assert!(x * (capital * w) >= 0.0);
            prop_assert!(x.abs() <= (capital * w).abs());
        }
    }

    #[test]
    fn projection_is_feasible(raw in prop::collection::vec(-1e6f64..1e6, 2..7)) {
        let w = project_action(&raw);
        prop_assert!(w.validate().is_ok());
        let gross: f64 = w.asset_weights.iter().map(|v| v.abs()).sum();
        prop_assert!((gross - 1.0).abs() <= WEIGHT_TOLERANCE);
    }

    #[test]
    fn projection_fixes_feasible_points(raw in weights(3), loan in -1.0f64..1.0) {
        let mut w = project_action(&raw);
        w.loan_weight = loan;
        let again = project_action(&w.to_raw());
        for (a, b) in again.asset_weights.iter().zip(&w.asset_weights) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert_eq!(again.loan_weight, loan);
    }

    #[test]
    fn reward_rises_with_profit_and_falls_with_loss_and_cost(
        p in 0.0f64..100.0, l in 0.0f64..100.0, c in 0.0f64..100.0, d in 1e-3f64..10.0,
    ) {
        let cfg = EnvConfig::default();
        let r = |p: f64, l: f64, c: f64| pnl_reward(&[p], &[l], &[c], 0.0, 1000.0, &cfg).unwrap();
        let base = r(p, l, c);
        prop_assert!(r(p + d, l, c) > base);
        prop_assert!(r(p, l + d, c) < base);
        prop_assert!(r(p, l, c + d) < base);
    }

    #[test]
    fn state_rows_start_at_zero_and_ignore_price_scale(seed in 0u64..1000, k in 1e-3f64..1e3) {
        let frame = synth::random_walk(&["A", "B"], 40, 1, seed);
        let s = build_state_at(&frame, 39, 20).unwrap();
        for a in 0..2 {
            for f in 0..4 {
                prop_assert_eq!(s.get(a, f, 0), 0.0);
            }
        }
        let t = build_state_at(&scaled(&frame, 1, k), 39, 20).unwrap();
        for f in 0..4 {
            for (x, y) in s.row(1, f).iter().zip(t.row(1, f)) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
            prop_assert_eq!(s.row(0, f), t.row(0, f));
        }
    }

    #[test]
    fn drawdown_is_a_fraction(values in prop::collection::vec(1.0f64..1e4, 2..60)) {
        let dd = max_drawdown(&values);
        prop_assert!((0.0..=1.0).contains(&dd));
        let r = report_from_values(&values, &MetricsOptions::default()).unwrap();
        prop_assert!((0.0..=100.0).contains(&r.max_drawdown));
        prop_assert!((0.0..=100.0).contains(&r.win_rate));
    }

    #[test]
    fn sortino_over_sharpe_is_std_over_downside(values in prop::collection::vec(900.0f64..1100.0, 3..60)) {
        let r = report_from_values(&values, &MetricsOptions::default()).unwrap();
        if let (Some(sh), Some(so), Some(sd)) = (r.sharpe, r.sortino, r.standard_deviation) {
            if r.average_return > 0.0 {
                let lhs = so / sh;
                let rhs = sd / r.downside_deviation;
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
            }
        }
    }

    #[test]
    fn selection_ignores_point_order(
        pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, -0.01f64..0.02, 0.0f64..0.003), 1..10),
        shift in 0usize..10,
    ) {
        let frontier: Vec<FrontierPoint> = pts
            .iter()
            .map(|&(a, b, ret, risk)| FrontierPoint { weights: vec![a * 0.5, b * 0.5], expected_return: ret, risk })
            .collect();
        let mut rotated = frontier.clone();
        rotated.rotate_left(shift % frontier.len());
        let cfg = SppoConfig::default();
        let a = select_weights(&frontier, &cfg, 1e-5).unwrap();
        let b = select_weights(&rotated, &cfg, 1e-5).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn selection_is_shift_consistent(
        pts in prop::collection::vec((0.1f64..1.0, -0.01f64..0.02, 0.0f64..0.003), 1..10),
        cash in -0.01f64..0.01,
        k in -0.01f64..0.01,
    ) {
        let build = |shift: f64| -> Vec<FrontierPoint> {
            pts.iter()
                .map(|&(w, ret, risk)| FrontierPoint { weights: vec![w * 0.5, 0.5], expected_return: ret + shift, risk })
                .collect()
        };
        let cfg = SppoConfig::default();
        let a = select_weights(&build(0.0), &cfg, cash).unwrap();
        let b = select_weights(&build(k), &cfg, cash + k).unwrap();
        // ties within rounding may flip the cash comparison
        let best = build(0.0).iter().map(|p| p.utility(cfg.risk_aversion)).fold(f64::NEG_INFINITY, f64::max);
        prop_assume!((best - cash).abs() > 1e-12);
        prop_assert_eq!(a.loan_weight == 1.0, b.loan_weight == 1.0);
    }

    #[test]
    fn split_slices_tile_the_frame(train in 1usize..50, test in 1usize..50, warmup in 0usize..10, extra in 0usize..5) {
        let frame = synth::random_walk(&["A"], warmup + train + test + extra, 1, 3);
        let s = split(&frame, train, test, warmup).unwrap();
        prop_assert_eq!(s.train.len(), warmup + train);
        prop_assert_eq!(s.test.len(), warmup + test);
        prop_assert_eq!(s.train_rows.end, s.test_rows.start);
        prop_assert_eq!(&s.train.timestamps[..], &frame.timestamps[..warmup + train]);
        prop_assert_eq!(&s.test.timestamps[warmup..], &frame.timestamps[s.test_rows.clone()]);
    }

    #[test]
    fn resampling_composes(rows in 8usize..80, seed in 0u64..100) {
        let frame = synth::random_walk(&["A"], rows, 1, seed);
        let s = frame.series(0);
        prop_assert_eq!(resample(&s, 1).unwrap(), s.clone());
        if rows >= 4 {
            let direct = resample(&s, 4).unwrap();
            let staged = resample(&resample(&s, 2).unwrap(), 4).unwrap();
            prop_assert_eq!(direct, staged);
        }
    }
}

#[test]
fn episodes_compound_step_values() {
    let frame = synth::random_walk(&["A", "B", "C"], 120, 4, 5);
    let data = Arc::new(MarketData::single(frame));
    let cfg = EnvConfig { history: 10, ..Default::default() };
    let (mut env, _) = Env::reset_range(cfg, data, 9, 100).unwrap();
    let action = WeightVector::new(vec![0.5, -0.25, 0.25], 0.2).unwrap();
    let mut value = env.state().value;
    while !env.is_done() {
        let step = env.step(&action).unwrap();
        assert_eq!(step.diagnostics.value_before, value);
        value = step.diagnostics.value_after;
        assert_eq!(env.state().value, value);
    }
    assert_eq!(env.state().step, 91);
}

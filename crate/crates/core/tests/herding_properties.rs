mod common;

use chrono::NaiveDate;
use common::{gaussian, planted_panel, rel_close, rng, series, std_normal};
use comove::herding::{
    analyze_window, csad_series, cssd_series, extreme_dummies, fit_csad_asymmetric, fit_csad_directional, fit_cssd,
    DeviationBasis, DispersionKind, DispersionSeries, EventWindow, HerdingSettings, Horizon, MarketDirection, Side,
    Verdict,
};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dispersion_nonnegative_and_norm_bounded(seed in any::<u64>(), n_assets in 2usize..12, n in 1usize..60) {
        let mut r = rng(seed);
        let assets: Vec<Vec<f64>> = (0..n_assets).map(|_| gaussian(&mut r, n, 0.0, 0.02)).collect();
        let p = common::panel(assets, gaussian(&mut r, n, 0.0, 0.01));
        for basis in [DeviationBasis::Market, DeviationBasis::CrossSectionalMean] {
            let cssd = cssd_series(&p, basis).unwrap();
            let csad = csad_series(&p, basis).unwrap();
            let k = n_assets as f64;
            for t in 0..n {
                prop_assert!(cssd.values[t] >= 0.0 && csad.values[t] >= 0.0);
                // mean |d| <= sqrt(mean d²) = CSSD · sqrt((N-1)/N)
                let bound = cssd.values[t] * ((k - 1.0) / k).sqrt();
                prop_assert!(csad.values[t] <= bound + 1e-12, "{} > {}", csad.values[t], bound);
            }
        }
    }

    #[test]
    fn scaling_returns_keeps_t_stats_and_verdicts(seed in 0u64..10_000, c in 0.01f64..100.0) {
        let p = planted_panel(seed, 300, 5, 0.01, (0.005, 0.3, -3.0));
        let q = p.scaled(c);
        let settings = HerdingSettings::default();
        let window = EventWindow::new(p.dates()[150], Side::Before, Horizon::Full);
        let a = analyze_window(&p, window, &settings).unwrap();
        let b = analyze_window(&q, window, &settings).unwrap();
        for (fa, fb) in [(&a.cssd, &b.cssd), (&a.csad, &b.csad)] {
            for (ta, tb) in fa.fit.t_stat.iter().zip(&fb.fit.t_stat) {
                prop_assert!(rel_close(*ta, *tb, 1e-9) || (ta - tb).abs() < 1e-9, "{ta} vs {tb}");
            }
            prop_assert_eq!(fa.verdict, fb.verdict);
        }
        let (cp, cq) = (cssd_series(&p, DeviationBasis::Market).unwrap(), cssd_series(&q, DeviationBasis::Market).unwrap());
        for (x, y) in cp.values.iter().zip(&cq.values) {
            prop_assert!(rel_close(x * c, *y, 1e-12));
        }
    }

    #[test]
    fn dummies_never_overlap(seed in any::<u64>(), n in 20usize..400, tail in 0.005f64..0.25) {
        let mut r = rng(seed);
        let values: Vec<f64> = (0..n).map(|_| (r.random_range(-50i32..50) as f64) / 1000.0).collect();
        if let Ok(d) = extreme_dummies(&series("SPX", values), tail) {
            prop_assert!(d.d_lower.iter().zip(&d.d_upper).all(|(a, b)| a * b == 0.0));
            let k = ((tail * n as f64 + 1e-9).floor() as usize).max(1);
            prop_assert!(d.lower_count() >= k && d.upper_count() >= k);
        }
    }

    #[test]
    fn before_and_after_partition_the_axis(offset in 0usize..400, months in 1u32..4) {
        let p = planted_panel(1, 400, 2, 0.01, (0.005, 0.0, 0.0));
        let dates = p.dates();
        let anchor = dates[offset];
        let before = EventWindow::new(anchor, Side::Before, Horizon::Full).resolve(dates).unwrap();
        let after = EventWindow::new(anchor, Side::After, Horizon::Full).resolve(dates).unwrap();
        prop_assert_eq!(before.start, 0);
        prop_assert_eq!(before.end, after.start);
        prop_assert_eq!(after.end, dates.len());
        if let Ok(b) = EventWindow::new(anchor, Side::Before, Horizon::Months(months)).resolve(dates) {
            prop_assert_eq!(b.end, before.end);
        }
        if let Ok(a) = EventWindow::new(anchor, Side::After, Horizon::Months(months)).resolve(dates) {
            prop_assert_eq!(a.start, after.start);
        }
    }
}

#[test]
fn symmetric_dummy_counts_match() {
    let values: Vec<f64> = (0..200).map(|i| (i as f64 - 99.5) / 100.0).collect();
    let d = extreme_dummies(&series("SPX", values), 0.05).unwrap();
    assert_eq!(d.lower_count(), 10);
    assert_eq!(d.upper_count(), 10);
}

#[test]
fn planted_cssd_dummy_coefficients_recovered() {
    let mut r = rng(11);
    let n = 500;
    let market = gaussian(&mut r, n, 0.0, 0.01);
    let m = series("SPX", market);
    let d = extreme_dummies(&m, 0.05).unwrap();
    let values: Vec<f64> = (0..n)
        .map(|t| 1.0 + 0.0 * d.d_lower[t] + 2.0 * d.d_upper[t] + 1e-3 * std_normal(&mut r))
        .collect();
    let disp = DispersionSeries {
        dates: m.dates.clone(),
        values,
        kind: DispersionKind::Cssd,
        n_assets: 2,
        basis: DeviationBasis::Market,
    };
    let fit = fit_cssd(&disp, &d, &HerdingSettings::default(), "planted").unwrap();
    for (name, truth) in [("const", 1.0), ("d_lower", 0.0), ("d_upper", 2.0)] {
        let (b, _, _) = fit.coefficient(name).unwrap();
        let se = fit.fit.se[fit.fit.index_of(name).unwrap()];
        assert!((b - truth).abs() <= 3.0 * se, "{name}: {b} vs {truth} (se {se})");
    }
}

fn planted_csad(seed: u64, n: usize, g1: f64, g2: f64, g3: f64) -> (DispersionSeries, comove::ReturnSeries) {
    let mut r = rng(seed);
    let market = gaussian(&mut r, n, 0.0, 0.02);
    let values: Vec<f64> = market
        .iter()
        .map(|m| 0.01 + g1 * m + g2 * m.abs() + g3 * m * m + 0.002 * std_normal(&mut r))
        .collect();
    let m = series("SPX", market);
    let disp = DispersionSeries {
        dates: m.dates.clone(),
        values,
        kind: DispersionKind::Csad,
        n_assets: 5,
        basis: DeviationBasis::Market,
    };
    (disp, m)
}

#[test]
fn planted_gamma3_recovered() {
    let (disp, m) = planted_csad(21, 2000, 0.0, 0.4, -0.5);
    let fit = fit_csad_asymmetric(&disp, &m, &HerdingSettings::default(), "planted").unwrap();
    let i = fit.fit.index_of("rm_sq").unwrap();
    assert!(
        (fit.fit.coef[i] + 0.5).abs() <= 3.0 * fit.fit.se[i],
        "{} (se {})",
        fit.fit.coef[i],
        fit.fit.se[i]
    );
}

#[test]
fn symmetric_model_leaves_gamma1_insignificant() {
    let mut insignificant = 0;
    for seed in 0..200 {
        let (disp, m) = planted_csad(1000 + seed, 500, 0.0, 0.4, -2.0);
        let fit = fit_csad_asymmetric(&disp, &m, &HerdingSettings::default(), "sym").unwrap();
        if fit.fit.p_value[fit.fit.index_of("rm").unwrap()] > 0.05 {
            insignificant += 1;
        }
    }
    assert!(insignificant >= 180, "{insignificant}/200");
}

#[test]
fn symmetric_data_gives_matching_up_and_down_curvature() {
    // Joint bound: |gamma_up - gamma_down| within 3 combined standard errors in most seeds.
    let mut within = 0;
    for seed in 0..100 {
        let (disp, m) = planted_csad(5000 + seed, 1000, 0.0, 0.4, -2.0);
        let s = HerdingSettings::default();
        let up = fit_csad_directional(&disp, &m, MarketDirection::Up, &s, "up").unwrap();
        let down = fit_csad_directional(&disp, &m, MarketDirection::Down, &s, "down").unwrap();
        let (iu, id) = (up.fit.index_of("rm_sq").unwrap(), down.fit.index_of("rm_sq").unwrap());
        let diff = up.fit.coef[iu] - down.fit.coef[id];
        let se = (up.fit.se[iu].powi(2) + down.fit.se[id].powi(2)).sqrt();
        if diff.abs() <= 3.0 * se {
            within += 1;
        }
    }
    assert!(within >= 95, "{within}/100");
}

#[test]
fn planted_regimes_flip_the_verdict() {
    let herd = planted_panel(3, 600, 8, 0.015, (0.006, 0.4, -6.0));
    let anti = planted_panel(4, 600, 8, 0.015, (0.006, 0.1, 8.0));
    let s = HerdingSettings::default();
    let whole = |p: &comove::ReturnPanel| {
        let csad = csad_series(p, s.basis).unwrap();
        fit_csad_asymmetric(&csad, p.market(), &s, "w").unwrap().verdict
    };
    assert_eq!(whole(&herd), Verdict::Herding);
    assert_eq!(whole(&anti), Verdict::AntiHerding);
}

#[test]
fn anchor_on_weekend_starts_after_window_next_trading_day() {
    let dates = comove::synthetic::business_days(NaiveDate::from_ymd_opt(2022, 1, 3).unwrap(), 200);
    let sat = NaiveDate::from_ymd_opt(2022, 2, 19).unwrap();
    let after = EventWindow::new(sat, Side::After, Horizon::Full)
        .resolve(&dates)
        .unwrap();
    assert_eq!(dates[after.start], NaiveDate::from_ymd_opt(2022, 2, 21).unwrap());
}

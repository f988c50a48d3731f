mod common;

use common::{gaussian, rel_close, rng};
use comove::dependence::{
    binned_entropy, concordance_counts, concordance_counts_bruteforce, dependence_matrix, kendall_tau,
    mutual_information, DependenceMethod,
};
use comove::regression::{ols, ols_hac, DesignMatrix};
use comove::stats::{adf, arch_lm, jarque_bera, LagSelection};
use proptest::prelude::*;
use rand::Rng;

fn sample(min: usize, max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, min..max)
}

fn nonzero_scale() -> impl Strategy<Value = f64> {
    prop_oneof![0.01f64..100.0, -100.0f64..-0.01]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jb_affine_invariant(x in sample(8, 200), a in nonzero_scale(), b in -50.0f64..50.0) {
        let Ok(base) = jarque_bera(&x) else { return Ok(()) };
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let moved = jarque_bera(&y).unwrap();
        prop_assert!(rel_close(base.statistic, moved.statistic, 1e-9), "{} vs {}", base.statistic, moved.statistic);
        prop_assert!((0.0..=1.0).contains(&base.p_value));
    }

    #[test]
    fn arch_scale_invariant(x in sample(60, 200), a in nonzero_scale()) {
        let Ok(base) = arch_lm(&x, 3) else { return Ok(()) };
        let y: Vec<f64> = x.iter().map(|v| a * v).collect();
        let scaled = arch_lm(&y, 3).unwrap();
        prop_assert!(rel_close(base.statistic, scaled.statistic, 1e-9), "{} vs {}", base.statistic, scaled.statistic);
        prop_assert!((0.0..=1.0).contains(&base.p_value));
    }

    #[test]
    fn adf_location_invariant(x in sample(40, 200), c in -100.0f64..100.0) {
        let Ok(base) = adf(&x, Some(2), LagSelection::Fixed) else { return Ok(()) };
        let y: Vec<f64> = x.iter().map(|v| v + c).collect();
        let moved = adf(&y, Some(2), LagSelection::Fixed).unwrap();
        prop_assert!((base.statistic - moved.statistic).abs() <= 1e-9 * base.statistic.abs().max(1.0));
        prop_assert!((0.0..=1.0).contains(&base.p_value));
    }

    #[test]
    fn mi_symmetric_nonnegative(seed in any::<u64>(), n in 20usize..400, bins in 2usize..6) {
        let mut r = rng(seed);
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-3i32..3) as f64 + r.random::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 0.5 + r.random::<f64>()).round()).collect();
        let (Ok(a), Ok(b)) = (mutual_information(&x, &y, bins), mutual_information(&y, &x, bins)) else {
            return Ok(());
        };
        prop_assert_eq!(a.to_bits(), b.to_bits());
        prop_assert!(a >= 0.0);
        let self_mi = mutual_information(&x, &x, bins).unwrap();
        prop_assert!((self_mi - binned_entropy(&x, bins).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn tau_invariant_under_increasing_maps(seed in any::<u64>(), n in 10usize..150) {
        let mut r = rng(seed);
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + r.random_range(-1.0..1.0)).collect();
        let Ok(base) = kendall_tau(&x, &y) else { return Ok(()) };
        let fx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let gy: Vec<f64> = y.iter().map(|v| v * v * v + 3.0 * v).collect();
        let moved = kendall_tau(&fx, &gy).unwrap();
        prop_assert_eq!(base.tau, moved.tau);
        prop_assert_eq!(base.p_value, moved.p_value);
    }

    #[test]
    fn ols_residuals_orthogonal_and_order_free(seed in any::<u64>(), n in 12usize..200) {
        let mut r = rng(seed);
        let x1 = gaussian(&mut r, n, 0.0, 1.0);
        let x2 = gaussian(&mut r, n, 2.0, 3.0);
        let y: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * x1[i] - 2.0 * x2[i] + r.random_range(-1.0..1.0)).collect();
        let dm = DesignMatrix::new(n).with_intercept().with_column("a", x1.clone()).with_column("b", x2.clone());
        let fit = ols(&dm, &y).unwrap();
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..dm.cols() {
            let dot: f64 = dm.column(j).iter().zip(&fit.residuals).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() < 1e-8 * ynorm, "column {j}: {dot}");
        }
        let swapped = DesignMatrix::new(n).with_column("b", x2.clone()).with_intercept().with_column("a", x1.clone());
        let f2 = ols(&swapped, &y).unwrap();
        for name in ["const", "a", "b"] {
            let (i, k) = (fit.index_of(name).unwrap(), f2.index_of(name).unwrap());
            prop_assert!(rel_close(fit.coef[i], f2.coef[k], 1e-9));
            prop_assert!(rel_close(fit.t_stat[i], f2.t_stat[k], 1e-9));
        }

        let c = 37.5;
        let scaled = DesignMatrix::new(n).with_intercept().with_column("a", x1.iter().map(|v| v * c).collect()).with_column("b", x2);
        let f3 = ols(&scaled, &y).unwrap();
        prop_assert!(rel_close(f3.coef[1] * c, fit.coef[1], 1e-9));
        for j in 0..3 {
            prop_assert!(rel_close(f3.t_stat[j], fit.t_stat[j], 1e-9));
        }
        let hac = ols_hac(&dm, &y, 4).unwrap();
        prop_assert_eq!(&hac.coef, &fit.coef);
    }
}

/// Normal equations solved by Gauss-Jordan elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn normal_equations(cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = cols.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = cols[i].iter().zip(&cols[j]).map(|(p, q)| p * q).sum();
        }
        a[i][k] = cols[i].iter().zip(y).map(|(p, q)| p * q).sum();
    }
    for c in 0..k {
        let piv = (c..k).max_by(|&p, &q| a[p][c].abs().total_cmp(&a[q][c].abs())).unwrap();
        a.swap(c, piv);
        for r in 0..k {
            if r != c {
                let f = a[r][c] / a[c][c];
                for j in c..=k {
                    a[r][j] -= f * a[c][j];
                }
            }
        }
    }
    (0..k).map(|i| a[i][k] / a[i][i]).collect()
}

#[test]
fn ols_matches_normal_equations_oracle() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let n = 50;
        let cols: Vec<Vec<f64>> = std::iter::once(vec![1.0; n])
            .chain((0..3).map(|_| gaussian(&mut r, n, 0.0, 1.0)))
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 2.0 - cols[1][i] + 0.3 * cols[2][i] + 4.0 * cols[3][i] + r.random_range(-0.5..0.5))
            .collect();
        let mut dm = DesignMatrix::new(n);
        for (j, c) in cols.iter().enumerate() {
            dm = dm.with_column(format!("x{j}"), c.clone());
        }
        let fit = ols(&dm, &y).unwrap();
        let oracle = normal_equations(&cols, &y);
        for (a, b) in fit.coef.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn fast_tau_equals_bruteforce_with_ties() {
    for seed in 0..200 {
        let mut r = rng(seed);
        let n = r.random_range(2..=100);
        let levels = r.random_range(2..12);
        let x: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64).collect();
        assert_eq!(
            concordance_counts(&x, &y),
            concordance_counts_bruteforce(&x, &y),
            "seed {seed}"
        );
    }
}

#[test]
fn jb_and_arch_p_values_decrease_with_statistic() {
    let mut pts = Vec::new();
    for seed in 0..40 {
        let mut r = rng(seed);
        let x: Vec<f64> = gaussian(&mut r, 300, 0.0, 1.0)
            .iter()
            .map(|v| v * v.abs().powf(seed as f64 / 40.0))
            .collect();
        let jb = jarque_bera(&x).unwrap();
        let arch = arch_lm(&x, 5).unwrap();
        pts.push((jb.statistic, jb.p_value, arch.statistic, arch.p_value));
    }
    let mut by_jb = pts.clone();
    by_jb.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert!(by_jb.windows(2).all(|w| w[1].1 <= w[0].1));
    let mut by_arch = pts;
    by_arch.sort_by(|a, b| a.2.total_cmp(&b.2));
    assert!(by_arch.windows(2).all(|w| w[1].3 <= w[0].3));
}

#[test]
fn six_ticker_matrix_evaluates_fifteen_pairs() {
    let p = common::planted_panel(3, 300, 6, 0.01, (0.005, 0.0, 0.0));
    let m = dependence_matrix(&p, DependenceMethod::KendallTau).unwrap();
    assert_eq!(m.pair_evaluations, 15);
    for i in 0..6 {
        for j in 0..6 {
            assert_eq!(m.values[i][j], m.values[j][i]);
        }
    }
}

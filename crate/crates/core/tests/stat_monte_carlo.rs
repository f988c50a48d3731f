//! Size and power checks against simulated processes with known properties.

mod common;

use common::{gaussian, rng, std_normal};
use comove::dependence::mutual_information;
use comove::regression::{ols, ols_hac, DesignMatrix};
use comove::stats::{adf, arch_lm, LagSelection, DEFAULT_ARCH_LAGS};
use rand::Rng;

fn arch1(seed: u64, n: usize, alpha: f64) -> Vec<f64> {
    let mut r = rng(seed);
    let mut x = vec![0.0; n];
    let mut prev: f64 = 0.0;
    for v in x.iter_mut() {
        let h = 1.0 - alpha + alpha * prev * prev;
        *v = h.sqrt() * std_normal(&mut r);
        prev = *v;
    }
    x
}

#[test]
fn arch_lm_detects_arch1() {
    let seeds = 200;
    let rejected = (0..seeds)
        .filter(|&s| arch_lm(&arch1(s, 5000, 0.5), DEFAULT_ARCH_LAGS).unwrap().p_value < 0.01)
        .count();
    assert!(rejected * 100 >= 99 * seeds as usize, "{rejected}/{seeds}");
}

#[test]
fn arch_lm_size_on_iid_noise() {
    let seeds = 500u64;
    let rejected = (0..seeds)
        .filter(|&s| {
            let x = gaussian(&mut rng(10_000 + s), 5000, 0.0, 1.0);
            arch_lm(&x, DEFAULT_ARCH_LAGS).unwrap().p_value < 0.05
        })
        .count();
    let rate = rejected as f64 / seeds as f64;
    assert!((0.03..=0.07).contains(&rate), "rejection rate {rate}");
}

#[test]
fn adf_size_on_random_walk_and_power_on_noise() {
    let seeds = 500u64;
    let mut walk_rejections = 0;
    let mut noise_rejections = 0;
    for s in 0..seeds {
        let e = gaussian(&mut rng(20_000 + s), 2000, 0.0, 1.0);
        let walk: Vec<f64> = e
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect();
        if adf(&walk, None, LagSelection::Aic).unwrap().p_value < 0.05 {
            walk_rejections += 1;
        }
        if adf(&e, None, LagSelection::Aic).unwrap().p_value < 0.05 {
            noise_rejections += 1;
        }
    }
    let size = walk_rejections as f64 / seeds as f64;
    assert!((0.03..=0.07).contains(&size), "random-walk rejection rate {size}");
    assert!(
        noise_rejections * 100 >= 99 * seeds as usize,
        "{noise_rejections}/{seeds}"
    );
}

#[test]
fn hac_close_to_classical_under_iid_errors() {
    let mut ratios = Vec::new();
    for s in 0..200 {
        let mut r = rng(30_000 + s);
        let n = 2000;
        let x = gaussian(&mut r, n, 0.0, 1.0);
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 2.0 * v + std_normal(&mut r)).collect();
        let dm = DesignMatrix::new(n).with_intercept().with_column("x", x);
        let classical = ols(&dm, &y).unwrap();
        let hac = ols_hac(&dm, &y, 8).unwrap();
        assert_eq!(hac.coef, classical.coef);
        ratios.push(hac.se[1] / classical.se[1]);
    }
    ratios.sort_by(f64::total_cmp);
    let median = (ratios[99] + ratios[100]) / 2.0;
    assert!((0.85..=1.15).contains(&median), "median ratio {median}");
}

#[test]
fn planted_line_recovered() {
    let mut r = rng(5);
    let n = 1000;
    let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| 3.0 + 2.0 * v + 0.01 * std_normal(&mut r)).collect();
    let fit = ols(&DesignMatrix::new(n).with_intercept().with_column("x", x), &y).unwrap();
    assert!((fit.coef[0] - 3.0).abs() < 0.01);
    assert!((fit.coef[1] - 2.0).abs() < 0.01);
}

#[test]
fn mi_of_independent_uniforms_is_small() {
    let mut r = rng(40_000);
    let x: Vec<f64> = (0..10_000).map(|_| r.random()).collect();
    let y: Vec<f64> = (0..10_000).map(|_| r.random()).collect();
    let mi = mutual_information(&x, &y, 10).unwrap();
    assert!(mi < 0.02, "{mi}");
}

#![allow(dead_code)]

use chrono::{Days, NaiveDate};
use comove::data::{ReturnConvention, ReturnPanel, ReturnSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, n: usize, mean: f64, sd: f64) -> Vec<f64> {
    let d = Normal::new(mean, sd).unwrap();
    (0..n).map(|_| d.sample(rng)).collect()
}

pub fn std_normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn day(i: usize) -> NaiveDate {
    NaiveDate::from_ymd_opt(2010, 1, 1).unwrap() + Days::new(i as u64)
}

pub fn series(ticker: &str, values: Vec<f64>) -> ReturnSeries {
    ReturnSeries {
        ticker: ticker.to_owned(),
        dates: (0..values.len()).map(day).collect(),
        values,
        convention: ReturnConvention::Log,
    }
}

pub fn panel(assets: Vec<Vec<f64>>, market: Vec<f64>) -> ReturnPanel {
    let assets = assets
        .into_iter()
        .enumerate()
        .map(|(i, v)| series(&format!("A{i}"), v))
        .collect();
    ReturnPanel::new(assets, series("SPX", market)).unwrap()
}

/// Market ~ N(0, sd_m); asset_i = R_m + (s0 + s1·|R_m| + s2·R_m²)·e_i.
pub fn planted_panel(seed: u64, n: usize, n_assets: usize, sd_m: f64, s: (f64, f64, f64)) -> ReturnPanel {
    let mut r = rng(seed);
    let market = gaussian(&mut r, n, 0.0, sd_m);
    let mut assets = vec![Vec::with_capacity(n); n_assets];
    for &m in &market {
        let scale = (s.0 + s.1 * m.abs() + s.2 * m * m).max(1e-6);
        for a in assets.iter_mut() {
            a.push(m + scale * std_normal(&mut r));
        }
    }
    panel(assets, market)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

//! Straight-line reference simulator for deterministic (η = 0) cascades.
//!
//! Deliberately shares no code with the engine: balances are valued from the
//! original holdings times the running price of each asset, instead of
//! carrying per-bank holdings forward.

#![allow(dead_code)]

pub struct Outcome {
    /// `None` = survived, `Some(k)` = failed in round k (0 = before the shock).
    pub fates: Vec<Option<usize>>,
    pub prices: Vec<f64>,
    pub market_values: Vec<f64>,
}

pub fn brute_force(holdings: &[Vec<f64>], liabilities: &[f64], shocks: &[(usize, f64)], alpha: f64) -> Outcome {
    let n = holdings.len();
    let m = if n == 0 { 0 } else { holdings[0].len() };
    let mut price = vec![1.0f64; m];
    let mut market: Vec<f64> = (0..m).map(|a| (0..n).map(|i| holdings[i][a]).sum()).collect();
    let mut fates: Vec<Option<usize>> = vec![None; n];

    let value = |i: usize, price: &[f64]| -> f64 {
        let mut total = 0.0;
        for a in 0..m {
            total += holdings[i][a] * price[a];
        }
        total
    };

    for i in 0..n {
        if value(i, &price) < liabilities[i] {
            fates[i] = Some(0);
        }
    }

    // Shocking an asset nobody holds changes nothing.
    for &(a, p) in shocks {
        if market[a] == 0.0 {
            continue;
        }
        price[a] *= p;
        market[a] *= p;
    }

    let mut round = 1;
    loop {
        let failing: Vec<usize> = (0..n)
            .filter(|&i| fates[i].is_none() && value(i, &price) < liabilities[i])
            .collect();
        if failing.is_empty() {
            break;
        }
        for &i in &failing {
            fates[i] = Some(round);
        }
        for a in 0..m {
            let sold: f64 = failing.iter().map(|&i| alpha * holdings[i][a] * price[a]).sum();
            if market[a] > 0.0 {
                let factor = ((market[a] - sold) / market[a]).max(0.0);
                market[a] = (market[a] - sold).max(0.0);
                price[a] *= factor;
            }
        }
        round += 1;
        assert!(round <= n + 2, "reference cascade failed to terminate");
    }

    Outcome {
        fates,
        prices: price,
        market_values: market,
    }
}

pub fn relative_close(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= tol * scale.max(f64::MIN_POSITIVE) || (a - b).abs() < 1e-300
}

use cascadefin::network::{asset_categories, BalanceSheet, BankAssetNetwork};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random sparse network: each holding is zero with probability 0.3,
/// leverage `L / B` uniform on `[lev_lo, lev_hi]`.
pub fn random_network(seed: u64, banks: usize, assets: usize, lev_lo: f64, lev_hi: f64) -> BankAssetNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sheets = (0..banks)
        .map(|i| {
            let mut holdings: Vec<f64> = (0..assets)
                .map(|_| {
                    if rng.random::<f64>() < 0.3 {
                        0.0
                    } else {
                        rng.random_range(1.0..100.0)
                    }
                })
                .collect();
            if holdings.iter().all(|&h| h == 0.0) {
                holdings[rng.random_range(0..assets)] = rng.random_range(1.0..100.0);
            }
            let total: f64 = holdings.iter().sum();
            let lev = rng.random_range(lev_lo..=lev_hi);
            BalanceSheet::from_holdings(format!("r{i}"), holdings, total * lev)
        })
        .collect();
    BankAssetNetwork::new(asset_categories(assets), sheets).unwrap()
}

pub fn holdings_rows(network: &BankAssetNetwork) -> (Vec<Vec<f64>>, Vec<f64>) {
    let rows = network.banks().iter().map(|b| b.holdings.clone()).collect();
    let liabilities = network.banks().iter().map(|b| b.total_liabilities).collect();
    (rows, liabilities)
}

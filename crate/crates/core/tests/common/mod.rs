//! Independent reference implementations used by the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

/// (id, price, quantity)
pub type RawOrder = (u64, f64, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct OracleClearing {
    pub price: f64,
    pub quantity: f64,
    pub buy_fills: BTreeMap<u64, f64>,
    pub sell_fills: BTreeMap<u64, f64>,
}

fn demand_at(buys: &[RawOrder], p: f64, strict: bool) -> f64 {
    buys.iter()
        .filter(|o| if strict { o.1 > p } else { o.1 >= p })
        .map(|o| o.2)
        .sum()
}

fn supply_at(sells: &[RawOrder], p: f64, strict: bool) -> f64 {
    sells
        .iter()
        .filter(|o| if strict { o.1 < p } else { o.1 <= p })
        .map(|o| o.2)
        .sum()
}

fn ration(
    orders: &[RawOrder],
    price: f64,
    quantity: f64,
    in_money: impl Fn(f64) -> bool,
) -> BTreeMap<u64, f64> {
    let mut fills = BTreeMap::new();
    let mut left = quantity;
    for o in orders.iter().filter(|o| in_money(o.1)) {
        fills.insert(o.0, o.2);
        left -= o.2;
    }
    let mut marginal: Vec<&RawOrder> = orders.iter().filter(|o| o.1 == price).collect();
    marginal.sort_by_key(|o| o.0);
    for o in marginal {
        if left <= 0.0 {
            break;
        }
        let take = o.2.min(left);
        fills.insert(o.0, take);
        left -= take;
    }
    fills
}

/// Scan every candidate price on the step grid.
///
/// Quantity is the largest `min(D(p), S(p))`. The price is the midpoint of
/// the set of candidate prices at which that quantity is a competitive
/// equilibrium (strict demand <= Q <= weak demand, same for supply).
pub fn clear_oracle(buys: &[RawOrder], sells: &[RawOrder], floor: f64, cap: f64) -> OracleClearing {
    let mut candidates: Vec<f64> = buys.iter().chain(sells).map(|o| o.1).collect();
    candidates.push(floor);
    candidates.push(cap);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let q = candidates
        .iter()
        .map(|&p| demand_at(buys, p, false).min(supply_at(sells, p, false)))
        .fold(0.0, f64::max);

    if q == 0.0 {
        let best_bid = buys
            .iter()
            .map(|o| o.1)
            .fold(None, |m: Option<f64>, p| Some(m.map_or(p, |m| m.max(p))));
        let best_ask = sells
            .iter()
            .map(|o| o.1)
            .fold(None, |m: Option<f64>, p| Some(m.map_or(p, |m| m.min(p))));
        let price = match (best_bid, best_ask) {
            (Some(b), Some(a)) => 0.5 * (a + b),
            _ => floor,
        };
        return OracleClearing {
            price,
            quantity: 0.0,
            buy_fills: BTreeMap::new(),
            sell_fills: BTreeMap::new(),
        };
    }

    let feasible: Vec<f64> = candidates
        .iter()
        .copied()
        .filter(|&p| {
            demand_at(buys, p, true) <= q
                && q <= demand_at(buys, p, false)
                && supply_at(sells, p, true) <= q
                && q <= supply_at(sells, p, false)
        })
        .collect();
    let lo = feasible.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = feasible.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let price = 0.5 * (lo + hi);
    OracleClearing {
        price,
        quantity: q,
        buy_fills: ration(buys, price, q, |p| p > price),
        sell_fills: ration(sells, price, q, |p| p < price),
    }
}

/// Textbook O(n·m) discrete convolution.
pub fn convolve_naive(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

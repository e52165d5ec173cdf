//! Step-curve double auctions for feeder retail markets and area aggregation.
//!
//! Demand curves are sorted by price descending and supply curves ascending.
//! The cleared quantity is the largest `q` with `demand_price(q) >=
//! supply_price(q)`. The price is read where the curves meet: on whichever
//! curve is flat at the crossing, or the midpoint of the gap when both curves
//! are vertical there. Orders strictly in the money fill completely; orders
//! at the clearing price are rationed in ascending id order.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bidding::{Bid, Side};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuctionError {
    #[error("order {id} price {price} outside [{floor}, {cap}]")]
    PriceOutOfRange {
        id: DeviceId,
        price: f64,
        floor: f64,
        cap: f64,
    },
    #[error("order {id} has non-positive or non-finite quantity {quantity}")]
    BadQuantity { id: DeviceId, quantity: f64 },
    #[error("order {id} is a {found:?} order on a {expected:?} curve")]
    WrongSide {
        id: DeviceId,
        expected: Side,
        found: Side,
    },
    #[error("cannot combine a {0:?} curve with a {1:?} curve")]
    MixedSides(Side, Side),
    #[error("invalid price limits: floor {floor}, cap {cap}")]
    BadLimits { floor: f64, cap: f64 },
}

/// Identifier of anything that can hold an order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(pub u64);

impl DeviceId {
    /// Ids at or above this value belong to feeder grid supply, not devices.
    pub const GRID_BASE: u64 = 1 << 62;

    pub fn grid(step: usize) -> DeviceId {
        DeviceId(Self::GRID_BASE + step as u64)
    }

    pub fn is_grid(self) -> bool {
        self.0 >= Self::GRID_BASE
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_grid() {
            write!(f, "grid-{}", self.0 - Self::GRID_BASE)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceLimits {
    pub floor: f64,
    pub cap: f64,
}

impl Default for PriceLimits {
    fn default() -> Self {
        PriceLimits {
            floor: 0.0,
            cap: 1000.0,
        }
    }
}

impl PriceLimits {
    pub fn new(floor: f64, cap: f64) -> Result<Self, AuctionError> {
        if !(floor.is_finite() && cap.is_finite() && floor < cap) {
            return Err(AuctionError::BadLimits { floor, cap });
        }
        Ok(PriceLimits { floor, cap })
    }

    pub fn clamp(&self, price: f64) -> f64 {
        price.clamp(self.floor, self.cap)
    }

    pub fn contains(&self, price: f64) -> bool {
        price >= self.floor && price <= self.cap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub id: DeviceId,
    pub price: f64,
    pub quantity: f64,
}

/// One price level; orders keep their identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub price: f64,
    pub orders: Vec<Order>,
}

impl Step {
    pub fn quantity(&self) -> f64 {
        self.orders
            .iter()
            .map(|o| o.quantity)
            .fold(0.0, |acc, q| acc + q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCurve {
    pub side: Side,
    pub steps: Vec<Step>,
}

impl Default for StepCurve {
    fn default() -> Self {
        StepCurve::empty(Side::Buy)
    }
}

impl StepCurve {
    pub fn empty(side: Side) -> Self {
        StepCurve {
            side,
            steps: Vec::new(),
        }
    }

    /// Build a curve from raw orders. Zero-quantity entries are dropped.
    pub fn from_orders(
        side: Side,
        orders: impl IntoIterator<Item = Order>,
        limits: PriceLimits,
    ) -> Result<Self, AuctionError> {
        let mut all = Vec::new();
        for o in orders {
            if o.quantity == 0.0 {
                continue;
            }
            if !(o.quantity > 0.0 && o.quantity.is_finite()) {
                return Err(AuctionError::BadQuantity {
                    id: o.id,
                    quantity: o.quantity,
                });
            }
            if !o.price.is_finite() || !limits.contains(o.price) {
                return Err(AuctionError::PriceOutOfRange {
                    id: o.id,
                    price: o.price,
                    floor: limits.floor,
                    cap: limits.cap,
                });
            }
            all.push(o);
        }
        all.sort_by(|a, b| {
            let by_price = match side {
                Side::Buy => b.price.total_cmp(&a.price),
                Side::Sell => a.price.total_cmp(&b.price),
            };
            by_price.then(a.id.cmp(&b.id))
        });
        let mut steps: Vec<Step> = Vec::new();
        for o in all {
            match steps.last_mut() {
                Some(s) if s.price == o.price => s.orders.push(o),
                _ => steps.push(Step {
                    price: o.price,
                    orders: vec![o],
                }),
            }
        }
        Ok(StepCurve { side, steps })
    }

    pub fn orders(&self) -> impl Iterator<Item = &Order> {
        self.steps.iter().flat_map(|s| s.orders.iter())
    }

    pub fn order_count(&self) -> usize {
        self.steps.iter().map(|s| s.orders.len()).sum()
    }

    pub fn total_quantity(&self) -> f64 {
        self.steps
            .iter()
            .map(Step::quantity)
            .fold(0.0, |acc, q| acc + q)
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Quantity willing to trade at `price`: demand with bid >= price, or
    /// supply with offer <= price.
    pub fn quantity_at(&self, price: f64) -> f64 {
        self.steps
            .iter()
            .filter(|s| match self.side {
                Side::Buy => s.price >= price,
                Side::Sell => s.price <= price,
            })
            .map(Step::quantity)
            .sum()
    }

    /// Best price on the curve (highest bid or lowest offer).
    pub fn best_price(&self) -> Option<f64> {
        self.steps.first().map(|s| s.price)
    }

    /// Scale every order's quantity; used for averaging curves.
    pub fn scaled(&self, factor: f64) -> StepCurve {
        StepCurve {
            side: self.side,
            steps: self
                .steps
                .iter()
                .map(|s| Step {
                    price: s.price,
                    orders: s
                        .orders
                        .iter()
                        .map(|o| Order {
                            quantity: o.quantity * factor,
                            ..*o
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Rows of `side,price,quantity,cumulative` for plotting.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "side,price,quantity,cumulative")?;
        let side = match self.side {
            Side::Buy => "demand",
            Side::Sell => "supply",
        };
        let mut cum = 0.0;
        for s in &self.steps {
            let q = s.quantity();
            cum += q;
            writeln!(out, "{side},{},{},{}", s.price, q, cum)?;
        }
        Ok(())
    }
}

fn orders_from_bids(
    bids: &[Bid],
    side: Side,
    limits: PriceLimits,
) -> Result<Vec<Order>, AuctionError> {
    bids.iter()
        .map(|b| {
            if b.side != side {
                return Err(AuctionError::WrongSide {
                    id: b.device_id,
                    expected: side,
                    found: b.side,
                });
            }
            let price = if !b.flexible && side == Side::Buy {
                limits.cap
            } else {
                b.price
            };
            Ok(Order {
                id: b.device_id,
                price,
                quantity: b.quantity,
            })
        })
        .collect()
}

/// Demand curve from buy bids; must-run bids go to the price cap.
pub fn build_demand_curve(bids: &[Bid], limits: PriceLimits) -> Result<StepCurve, AuctionError> {
    StepCurve::from_orders(
        Side::Buy,
        orders_from_bids(bids, Side::Buy, limits)?,
        limits,
    )
}

/// Supply curve from sell bids.
pub fn build_supply_curve(bids: &[Bid], limits: PriceLimits) -> Result<StepCurve, AuctionError> {
    StepCurve::from_orders(
        Side::Sell,
        orders_from_bids(bids, Side::Sell, limits)?,
        limits,
    )
}

/// Grid supply into one feeder: import at the wholesale price up to the
/// normal rating, then increasingly expensive emergency headroom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederSupplySpec {
    /// $/MWh
    pub wholesale_price: f64,
    /// kW
    pub capacity_normal: f64,
    /// (price $/MWh, extra kW), strictly increasing prices above wholesale.
    pub scarcity_steps: Vec<(f64, f64)>,
    pub price_cap: f64,
}

impl FeederSupplySpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.capacity_normal >= 0.0 && self.capacity_normal.is_finite()) {
            return Err(format!(
                "capacity_normal must be >= 0, got {}",
                self.capacity_normal
            ));
        }
        let mut last = self.wholesale_price;
        for &(p, q) in &self.scarcity_steps {
            if !(p > last) {
                return Err(format!("scarcity step price {p} must exceed {last}"));
            }
            if !(q >= 0.0 && q.is_finite()) {
                return Err(format!("scarcity step quantity {q} must be >= 0"));
            }
            last = p;
        }
        if self.price_cap < last {
            return Err(format!(
                "price cap {} below highest supply price {last}",
                self.price_cap
            ));
        }
        Ok(())
    }

    /// Total grid import the feeder can carry, kW.
    pub fn total_capacity(&self) -> f64 {
        self.capacity_normal + self.scarcity_steps.iter().map(|s| s.1).sum::<f64>()
    }

    pub fn grid_orders(&self) -> Vec<Order> {
        std::iter::once((self.wholesale_price, self.capacity_normal))
            .chain(self.scarcity_steps.iter().copied())
            .enumerate()
            .map(|(i, (price, quantity))| Order {
                id: DeviceId::grid(i),
                price,
                quantity,
            })
            .collect()
    }
}

/// Feeder supply curve: grid import steps merged with local sellers. The
/// curve ends at its total quantity; past that it is vertical up to the cap.
pub fn build_feeder_supply(
    spec: &FeederSupplySpec,
    sell_bids: &[Bid],
    limits: PriceLimits,
) -> Result<StepCurve, AuctionError> {
    let mut orders = spec.grid_orders();
    orders.extend(orders_from_bids(sell_bids, Side::Sell, limits)?);
    StepCurve::from_orders(Side::Sell, orders, limits)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fill {
    pub id: DeviceId,
    pub quantity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearingResult {
    pub price: f64,
    pub quantity: f64,
    pub accepted_buys: Vec<Fill>,
    pub accepted_sells: Vec<Fill>,
    /// At-price order left partially filled, if any.
    pub marginal_order: Option<DeviceId>,
    pub n_buys: usize,
    pub n_sells: usize,
}

impl ClearingResult {
    pub fn buy_fill(&self, id: DeviceId) -> f64 {
        self.accepted_buys
            .iter()
            .filter(|f| f.id == id)
            .map(|f| f.quantity)
            .sum()
    }

    pub fn sell_fill(&self, id: DeviceId) -> f64 {
        self.accepted_sells
            .iter()
            .filter(|f| f.id == id)
            .map(|f| f.quantity)
            .sum()
    }
}

// Walk both curves along the quantity axis while demand price >= supply price.
fn crossing(demand: &StepCurve, supply: &StepCurve, limits: PriceLimits) -> (f64, f64) {
    let d_ends: Vec<f64> = cumulative(&demand.steps);
    let s_ends: Vec<f64> = cumulative(&supply.steps);
    let (mut i, mut j) = (0, 0);
    let mut q = 0.0;
    let mut d_at = None;
    let mut s_at = None;
    while i < d_ends.len() && j < s_ends.len() && demand.steps[i].price >= supply.steps[j].price {
        d_at = Some(demand.steps[i].price);
        s_at = Some(supply.steps[j].price);
        let (de, se) = (d_ends[i], s_ends[j]);
        q = de.min(se);
        if de <= se {
            i += 1;
        }
        if se <= de {
            j += 1;
        }
    }
    let (Some(d_at), Some(s_at)) = (d_at, s_at) else {
        let price = match (demand.best_price(), supply.best_price()) {
            (Some(bid), Some(ask)) => 0.5 * (bid + ask),
            _ => limits.floor,
        };
        return (price, 0.0);
    };
    let d_next = demand.steps.get(i).map_or(limits.floor, |s| s.price);
    let s_next = supply.steps.get(j).map_or(limits.cap, |s| s.price);
    let lo = s_at.max(d_next);
    let hi = d_at.min(s_next);
    (0.5 * (lo + hi), q)
}

fn cumulative(steps: &[Step]) -> Vec<f64> {
    steps
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s.quantity();
            Some(*acc)
        })
        .collect()
}

/// Fills for a given clearing point.
///
/// Orders strictly in the money fill completely; at-price orders share the
/// remainder in ascending id order, so at most one per side is partial.
pub fn allocate(
    price: f64,
    quantity: f64,
    demand: &StepCurve,
    supply: &StepCurve,
) -> (Vec<Fill>, Vec<Fill>, Option<DeviceId>) {
    let (buys, buy_marginal) = allocate_side(price, quantity, demand);
    let (sells, sell_marginal) = allocate_side(price, quantity, supply);
    (buys, sells, buy_marginal.or(sell_marginal))
}

fn allocate_side(price: f64, quantity: f64, curve: &StepCurve) -> (Vec<Fill>, Option<DeviceId>) {
    let in_money = |p: f64| match curve.side {
        Side::Buy => p > price,
        Side::Sell => p < price,
    };
    let mut fills = Vec::new();
    let mut filled = 0.0;
    for o in curve.orders().filter(|o| in_money(o.price)) {
        fills.push(Fill {
            id: o.id,
            quantity: o.quantity,
        });
        filled += o.quantity;
    }
    let mut at_price: Vec<&Order> = curve.orders().filter(|o| o.price == price).collect();
    at_price.sort_by_key(|o| o.id);
    let mut remaining = (quantity - filled).max(0.0);
    let mut marginal = None;
    for o in at_price {
        if remaining <= 0.0 {
            break;
        }
        let take = o.quantity.min(remaining);
        if take < o.quantity {
            marginal = Some(o.id);
        }
        fills.push(Fill {
            id: o.id,
            quantity: take,
        });
        remaining -= take;
    }
    (fills, marginal)
}

/// Clear a demand curve against a supply curve.
///
/// With no overlap the result is a null trade priced at the midpoint of best
/// bid and best ask, or at the floor when either side is empty.
pub fn clear(demand: &StepCurve, supply: &StepCurve, limits: PriceLimits) -> ClearingResult {
    let (price, quantity) = crossing(demand, supply, limits);
    let (accepted_buys, accepted_sells, marginal_order) = if quantity > 0.0 {
        allocate(price, quantity, demand, supply)
    } else {
        (Vec::new(), Vec::new(), None)
    };
    ClearingResult {
        price,
        quantity,
        accepted_buys,
        accepted_sells,
        marginal_order,
        n_buys: demand.order_count(),
        n_sells: supply.order_count(),
    }
}

/// Horizontal sum of curves on the same side.
pub fn aggregate_demand(
    curves: &[StepCurve],
    limits: PriceLimits,
) -> Result<StepCurve, AuctionError> {
    let side = curves.first().map_or(Side::Buy, |c| c.side);
    if let Some(c) = curves.iter().find(|c| c.side != side) {
        return Err(AuctionError::MixedSides(side, c.side));
    }
    StepCurve::from_orders(
        side,
        curves.iter().flat_map(|c| c.orders().copied()),
        limits,
    )
}

/// Area supply: local renewables then bulk generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaSupply {
    pub renewables_price: f64,
    pub renewables_kw: f64,
    pub bulk_price: f64,
    pub bulk_kw: f64,
}

impl AreaSupply {
    pub const RENEWABLES: DeviceId = DeviceId(DeviceId::GRID_BASE + 1_000_000);
    pub const BULK: DeviceId = DeviceId(DeviceId::GRID_BASE + 1_000_001);

    pub fn curve(&self, limits: PriceLimits) -> Result<StepCurve, AuctionError> {
        StepCurve::from_orders(
            Side::Sell,
            [
                Order {
                    id: Self::RENEWABLES,
                    price: self.renewables_price,
                    quantity: self.renewables_kw,
                },
                Order {
                    id: Self::BULK,
                    price: self.bulk_price,
                    quantity: self.bulk_kw,
                },
            ],
            limits,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaClearing {
    pub result: ClearingResult,
    /// Each feeder's demand evaluated at the area price, in input order.
    pub participation: Vec<f64>,
}

/// Clear combined feeder demand against the area's two-step supply.
pub fn clear_area(
    feeder_curves: &[StepCurve],
    supply: AreaSupply,
    limits: PriceLimits,
) -> Result<AreaClearing, AuctionError> {
    let demand = aggregate_demand(feeder_curves, limits)?;
    let result = clear(&demand, &supply.curve(limits)?, limits);
    let participation = feeder_curves
        .iter()
        .map(|c| c.quantity_at(result.price))
        .collect();
    Ok(AreaClearing {
        result,
        participation,
    })
}

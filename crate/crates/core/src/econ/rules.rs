//! Firm- and household-level update rules.
//!
//! Each function is a pure map over values; [`super::step`] wires them into a
//! monthly update.

use crate::error::{Error, Result};

/// Lower clamp of the consumption propensity.
pub const MIN_PROPENSITY: f64 = 0.01;
/// Upper clamp of the consumption propensity.
pub const MAX_PROPENSITY: f64 = 0.99;

/// The `[[x]]` bracket: 0 below 0, 1 above 1, identity in between.
pub fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Consumption propensity out of wealth and income. Consumption rises when the
/// expected real deposit rate falls.
pub fn consumption_propensity(c0: f64, alpha_c: f64, expected: f64, deposit_rate: f64) -> f64 {
    (c0 * (1.0 + alpha_c * (expected - deposit_rate))).clamp(MIN_PROPENSITY, MAX_PROPENSITY)
}

/// Nominal resources the household brings to market in one month.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BudgetInputs {
    pub savings: f64,
    pub wage_income: f64,
    pub energy_payout: f64,
    pub deposit_rate: f64,
}

impl BudgetInputs {
    /// Savings plus this month's income: wages, energy payout and deposit interest.
    pub fn wealth(&self) -> f64 {
        self.savings + self.wage_income + self.energy_payout + self.deposit_rate * self.savings
    }
}

/// Consumption budget `c * (S + W + payout + rho_d * S)`, never negative.
pub fn consumption_budget(propensity: f64, inputs: &BudgetInputs) -> f64 {
    (propensity * inputs.wealth()).max(0.0)
}

/// Split the budget over firms with an intensity-of-choice (softmax) rule.
///
/// Returns quantities `D_i` with `sum_i p_i D_i == budget`. The softmax is
/// shifted by the minimum price so the exponentials never overflow.
pub fn allocate_demand(budget: f64, prices: &[f64], beta: f64) -> Result<Vec<f64>> {
    if prices.is_empty() {
        return Err(Error::NoActiveFirms);
    }
    let p_min = prices.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = prices.iter().map(|&p| (-beta * (p - p_min)).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(prices
        .iter()
        .zip(&weights)
        .map(|(&p, &w)| budget * w / (total * p))
        .collect())
}

/// Debt-to-sales ratio normalized by the bankruptcy threshold. Firms with no
/// debt have zero fragility; indebted firms with no sales are infinitely fragile.
pub fn fragility(debt: f64, price: f64, demand: f64, production: f64, threshold: f64) -> f64 {
    if debt <= 0.0 {
        return 0.0;
    }
    let sales = (price * demand).min(price * production);
    if sales <= 0.0 {
        f64::INFINITY
    } else {
        debt / (threshold * sales)
    }
}

/// Debt-to-sales ratio without the threshold normalization.
pub fn debt_to_sales(debt: f64, price: f64, demand: f64, production: f64) -> f64 {
    fragility(debt, price, demand, production, 1.0)
}

/// Strength of the fragility feedback on hiring and firing.
pub fn gamma_coupling(loan_rate: f64, expected: f64, alpha_gamma: f64, gamma0: f64) -> f64 {
    (alpha_gamma * (loan_rate - expected)).max(gamma0)
}

/// Hiring and firing rates `(eta_plus, eta_minus)` of a firm with fragility `phi`.
pub fn hire_fire_rates(gamma: f64, phi: f64, eta0_plus: f64, eta0_minus: f64) -> (f64, f64) {
    let load = gamma * phi;
    // 0 * inf arises for a healthy coupling and a zero-sales debtor; treat as no load.
    let load = if load.is_nan() { 0.0 } else { load };
    (
        clamp01(eta0_plus * (1.0 - load)),
        clamp01(eta0_minus * (1.0 + load)),
    )
}

/// Last month's state of one firm as seen by its decision rules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FirmView {
    pub price: f64,
    pub wage: f64,
    pub production: f64,
    pub demand: f64,
    pub profit: f64,
}

/// New production target.
///
/// Under-producing firms expand by `eta_plus` of the gap, but never by more
/// than `zeta * hire_cap` (the workers available to them). Over-producing
/// firms shrink by `eta_minus` of the gap.
pub fn production_update(
    firm: &FirmView,
    eta_plus: f64,
    eta_minus: f64,
    hire_cap: f64,
    zeta: f64,
) -> f64 {
    let (y, d) = (firm.production, firm.demand);
    let target = if d > y {
        y + (eta_plus * (d - y)).min(zeta * hire_cap)
    } else if d < y {
        y - eta_minus * (y - d)
    } else {
        y
    };
    target.max(0.0)
}

/// Bounds on the demand/output imbalance and on monthly relative changes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateGuards {
    pub max_imbalance: f64,
    pub min_change: f64,
}

impl Default for UpdateGuards {
    fn default() -> Self {
        UpdateGuards {
            max_imbalance: 10.0,
            min_change: -0.9,
        }
    }
}

/// Coefficients of the price rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriceRule {
    pub gamma: f64,
    pub g_p: f64,
    pub g_e: f64,
    pub guards: UpdateGuards,
}

impl PriceRule {
    /// Relative price change for one firm. `xi` is a uniform draw on `[0, 1]`.
    pub fn change(&self, firm: &FirmView, cpi: f64, expected: f64, energy_change: f64, xi: f64) -> f64 {
        let (y, d, p) = (firm.production, firm.demand, firm.price);
        let drift = self.g_p * expected + self.g_e * energy_change;
        let cap = self.guards.max_imbalance;
        let adjust = if d > y && p < cpi {
            let ratio = if y > 0.0 { (d / y).min(cap) } else { cap };
            self.gamma * xi * ratio
        } else if d < y && p > cpi {
            let ratio = if d > 0.0 { (y / d).min(cap) } else { cap };
            -self.gamma * xi * ratio
        } else {
            0.0
        };
        (adjust + drift).max(self.guards.min_change)
    }
}

/// New price of one firm.
pub fn price_update(
    rule: &PriceRule,
    firm: &FirmView,
    cpi: f64,
    expected: f64,
    energy_change: f64,
    xi: f64,
) -> f64 {
    firm.price * (1.0 + rule.change(firm, cpi, expected, energy_change, xi))
}

/// Coefficients of the wage rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WageRule {
    pub gamma: f64,
    pub g_w: f64,
    pub guards: UpdateGuards,
}

impl WageRule {
    /// Relative wage change for one firm, before the revenue-per-worker cap.
    pub fn change(
        &self,
        firm: &FirmView,
        unemployment: f64,
        gamma_coupling: f64,
        phi: f64,
        expected: f64,
        xi: f64,
    ) -> f64 {
        let load = gamma_coupling * phi;
        let load = if load.is_nan() { 0.0 } else { load };
        let drift = self.g_w * expected;
        let adjust = if firm.demand > firm.production && firm.profit > 0.0 {
            self.gamma * (1.0 - unemployment) * (1.0 - load) * xi
        } else if firm.demand < firm.production && firm.profit < 0.0 {
            -self.gamma * unemployment * (1.0 + load) * xi
        } else {
            0.0
        };
        let change = adjust + drift;
        if change.is_nan() {
            self.guards.min_change
        } else {
            change.max(self.guards.min_change)
        }
    }
}

/// New wage. A raise never lifts the wage above revenue per worker
/// `zeta * new_price`; the cap does not by itself cut an existing wage.
#[allow(clippy::too_many_arguments)]
pub fn wage_update(
    rule: &WageRule,
    firm: &FirmView,
    unemployment: f64,
    gamma_coupling: f64,
    phi: f64,
    expected: f64,
    xi: f64,
    zeta: f64,
    new_price: f64,
) -> f64 {
    let w = firm.wage * (1.0 + rule.change(firm, unemployment, gamma_coupling, phi, expected, xi));
    if w > firm.wage {
        w.min((zeta * new_price).max(firm.wage))
    } else {
        w
    }
}

/// Consumption-weighted price index. `None` when nothing was traded.
pub fn cpi(prices: &[f64], realized: &[f64]) -> Option<f64> {
    let volume: f64 = realized.iter().sum();
    if volume <= 0.0 {
        return None;
    }
    let value: f64 = prices.iter().zip(realized).map(|(p, c)| p * c).sum();
    Some(value / volume)
}

/// Inputs to one firm's monthly profit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfitInputs {
    pub price: f64,
    pub wage: f64,
    pub production: f64,
    pub demand: f64,
    /// Signed cash balance at the start of the month.
    pub cash: f64,
    pub zeta: f64,
}

/// Sales minus wage bill, plus deposit interest, minus loan interest and energy cost.
pub fn firm_profit(
    firm: &ProfitInputs,
    deposit_rate: f64,
    loan_rate: f64,
    g_e: f64,
    energy_price: f64,
) -> f64 {
    let sales = firm.price * firm.production.min(firm.demand);
    let wage_bill = if firm.zeta > 0.0 {
        firm.wage * firm.production / firm.zeta
    } else {
        0.0
    };
    let deposits = firm.cash.max(0.0);
    let debt = (-firm.cash).max(0.0);
    sales - wage_bill + deposit_rate * deposits - loan_rate * debt - g_e * energy_price * firm.production
}

/// One month of the energy sector's cash balance: returns `(new_balance, payout)`.
pub fn energy_step(balance: f64, price: f64, total_output: f64, g_e: f64, payout_rate: f64) -> (f64, f64) {
    let payout = payout_rate * balance;
    (balance + g_e * price * total_output - payout, payout)
}

/// Realized monthly inflation and its exponential moving average.
pub fn inflation_measures(cpi_new: f64, cpi_old: f64, ema_old: f64, memory: f64) -> (f64, f64) {
    let realized = (cpi_new - cpi_old) / cpi_old;
    (realized, (1.0 - memory) * ema_old + memory * realized)
}

/// Expected inflation: a trust-weighted mix of perceived inflation and the target.
pub fn expectation(ema: f64, target: f64, trust: f64) -> f64 {
    (1.0 - trust) * ema + trust * target
}

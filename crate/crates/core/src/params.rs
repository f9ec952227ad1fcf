//! Structural parameters of the economy. Defaults are the inactive-central-bank
//! calibration; every rate is monthly.

use serde::{Deserialize, Serialize};

use crate::econ::rules::{PriceRule, UpdateGuards, WageRule};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Number of firms; the labor force equals `n_firms` workers.
    pub n_firms: usize,
    /// Ratio of hiring to firing propensity, `eta0_plus / eta0_minus`.
    pub hire_fire_ratio: f64,
    /// Firing propensity `eta0_minus`.
    pub firing_rate: f64,
    /// Bankruptcy threshold on the debt-to-sales ratio before any easy-credit policy.
    pub theta0: f64,
    /// Floor of the fragility coupling.
    pub gamma0: f64,
    /// Sensitivity of the fragility coupling to the real loan rate.
    pub alpha_gamma: f64,
    /// Sensitivity of consumption to the real deposit rate.
    pub alpha_c: f64,
    /// Baseline consumption propensity.
    pub c0: f64,
    /// Size of price and wage adjustments to imbalances.
    pub gamma: f64,
    /// Indexation of wages to expected inflation.
    pub g_w: f64,
    /// Indexation of prices to expected inflation.
    pub g_p: f64,
    /// Energy cost share passed through to prices.
    pub g_e: f64,
    /// Initial production per firm.
    pub y0: f64,
    /// Dividend rate on positive firm cash.
    pub dividend_rate: f64,
    /// Fraction of the energy sector's balance paid to households each month.
    pub energy_payout: f64,
    /// Monthly revival probability of a bankrupt firm.
    pub revival_prob: f64,
    /// Memory of the inflation moving average and the default-loss average.
    pub omega: f64,
    /// Price sensitivity of household demand, applied to prices relative to the CPI.
    pub beta: f64,
    /// Baseline labor productivity.
    pub zeta0: f64,
    /// Cap on the demand/output imbalance ratio in the price rule.
    pub max_imbalance: f64,
    /// Floor on monthly relative price and wage changes.
    pub min_change: f64,
    /// Width of the uniform spread of initial prices around 1. Without it
    /// every firm starts exactly at the index and no price rule ever fires.
    pub price_dispersion: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            n_firms: 5000,
            hire_fire_ratio: 2.0,
            firing_rate: 0.2,
            theta0: 4.0,
            gamma0: 0.0,
            alpha_gamma: 450.0,
            alpha_c: 12.0,
            c0: 0.5,
            gamma: 0.01,
            g_w: 0.8,
            g_p: 0.8,
            g_e: 0.0325,
            y0: 0.5,
            dividend_rate: 0.02,
            energy_payout: 0.04,
            revival_prob: 0.1,
            omega: 0.2,
            beta: 2.0,
            zeta0: 1.0,
            max_imbalance: 10.0,
            min_change: -0.9,
            price_dispersion: 0.1,
        }
    }
}

impl ModelParams {
    pub fn hiring_rate(&self) -> f64 {
        self.hire_fire_ratio * self.firing_rate
    }

    pub fn guards(&self) -> UpdateGuards {
        UpdateGuards {
            max_imbalance: self.max_imbalance,
            min_change: self.min_change,
        }
    }

    pub fn price_rule(&self) -> PriceRule {
        PriceRule {
            gamma: self.gamma,
            g_p: self.g_p,
            g_e: self.g_e,
            guards: self.guards(),
        }
    }

    pub fn wage_rule(&self) -> WageRule {
        WageRule {
            gamma: self.gamma,
            g_w: self.g_w,
            guards: self.guards(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let key = |k: &str| format!("parameters.{k}");
        if self.n_firms == 0 {
            return Err(Error::config(key("n_firms"), "must be at least 1"));
        }
        let positive = [
            ("theta0", self.theta0),
            ("zeta0", self.zeta0),
            ("firing_rate", self.firing_rate),
            ("hire_fire_ratio", self.hire_fire_ratio),
            ("max_imbalance", self.max_imbalance),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key(name), format!("must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("gamma0", self.gamma0),
            ("alpha_gamma", self.alpha_gamma),
            ("alpha_c", self.alpha_c),
            ("gamma", self.gamma),
            ("g_w", self.g_w),
            ("g_p", self.g_p),
            ("g_e", self.g_e),
            ("beta", self.beta),
            ("y0", self.y0),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key(name), format!("must be >= 0, got {v}")));
            }
        }
        let unit = [
            ("dividend_rate", self.dividend_rate),
            ("energy_payout", self.energy_payout),
            ("revival_prob", self.revival_prob),
            ("y0", self.y0),
            ("price_dispersion", self.price_dispersion),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(key(name), format!("must lie in [0, 1], got {v}")));
            }
        }
        if !(self.c0 > 0.0 && self.c0 < 1.0) {
            return Err(Error::config(key("c0"), format!("must lie in (0, 1), got {}", self.c0)));
        }
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(Error::config(key("omega"), format!("must lie in (0, 1], got {}", self.omega)));
        }
        if self.hiring_rate() > 1.0 {
            return Err(Error::config(
                key("hire_fire_ratio"),
                "hiring rate hire_fire_ratio * firing_rate exceeds 1",
            ));
        }
        if !(self.min_change > -1.0 && self.min_change <= 0.0) {
            return Err(Error::config(key("min_change"), "must lie in (-1, 0]"));
        }
        Ok(())
    }
}

//! State of one simulated economy and its monthly update.

pub mod rules;
mod step;

use serde::{Deserialize, Serialize};

use crate::calendar::Month;
use crate::params::ModelParams;
use crate::policy::CentralBankConfig;
use rules::FirmView;

pub use step::{annualize, Drivers, Event, EventKind, MonthDraws, MonthRecord, StepContext, StepResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Firm {
    pub price: f64,
    pub wage: f64,
    pub production: f64,
    pub workforce: f64,
    /// Signed cash balance; a negative balance is debt.
    pub cash: f64,
    /// Demand received last month.
    pub demand: f64,
    /// Profit made last month.
    pub profit: f64,
    pub alive: bool,
}

impl Firm {
    pub fn debt(&self) -> f64 {
        (-self.cash).max(0.0)
    }

    pub fn deposits(&self) -> f64 {
        self.cash.max(0.0)
    }

    /// Realized sales volume `min(D, Y)`.
    pub fn realized(&self) -> f64 {
        self.demand.min(self.production)
    }

    pub fn view(&self) -> FirmView {
        FirmView {
            price: self.price,
            wage: self.wage,
            production: self.production,
            demand: self.demand,
            profit: self.profit,
        }
    }

    fn bankrupt(&mut self) {
        self.alive = false;
        self.cash = 0.0;
        self.workforce = 0.0;
        self.production = 0.0;
        self.demand = 0.0;
        self.profit = 0.0;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Household {
    pub savings: f64,
    pub wage_income: f64,
    pub budget: f64,
    pub propensity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySector {
    pub balance: f64,
    pub price: f64,
    pub payout_rate: f64,
    /// Relative change of the energy price index this month.
    pub price_change: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expectations {
    pub realized: f64,
    pub ema: f64,
    pub expected: f64,
    pub trust: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bank {
    pub base_rate: f64,
    pub loan_rate: f64,
    pub deposit_rate: f64,
    /// Moving average of monthly default losses per unit of outstanding debt.
    pub loss_rate: f64,
    /// Bankruptcy threshold on the debt-to-sales ratio.
    pub threshold: f64,
    /// Interest collected but not yet paid out, or default losses not yet
    /// recovered (negative).
    pub equity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Economy {
    /// Calendar month of the next update.
    pub month: Month,
    pub firms: Vec<Firm>,
    pub household: Household,
    pub energy: EnergySector,
    pub expectations: Expectations,
    pub bank: Bank,
    pub productivity: f64,
    pub labor_force: f64,
    pub cpi: f64,
    /// Employment-weighted average wage.
    pub avg_wage: f64,
    pub unemployment: f64,
    pub bankruptcies: usize,
}

impl Economy {
    /// Fresh economy: every firm at half capacity, unit prices and wages, one
    /// unit of savings per firm, no cash or debt.
    pub fn new(params: &ModelParams, central_bank: &CentralBankConfig, start: Month) -> Self {
        let n = params.n_firms;
        let zeta = params.zeta0;
        let y0 = params.y0;
        let firm = Firm {
            price: 1.0,
            wage: 1.0,
            production: y0,
            workforce: y0 / zeta,
            cash: 0.0,
            demand: y0,
            profit: 0.0,
            alive: true,
        };
        let labor_force = n as f64;
        let trust = central_bank.initial_trust();
        let base_rate = central_bank.policy_rate(0.0);
        Economy {
            month: start,
            firms: vec![firm; n],
            household: Household {
                savings: labor_force,
                wage_income: 0.0,
                budget: 0.0,
                propensity: params.c0,
            },
            energy: EnergySector {
                balance: 0.0,
                price: 1.0,
                payout_rate: params.energy_payout,
                price_change: 0.0,
            },
            expectations: Expectations {
                realized: 0.0,
                ema: 0.0,
                expected: rules::expectation(0.0, central_bank.target, trust),
                trust,
            },
            bank: Bank {
                base_rate,
                loan_rate: base_rate,
                deposit_rate: 0.0,
                loss_rate: 0.0,
                threshold: params.theta0,
                equity: 0.0,
            },
            productivity: zeta,
            labor_force,
            cpi: 1.0,
            avg_wage: 1.0,
            unemployment: 1.0 - y0 / zeta,
            bankruptcies: 0,
        }
    }

    /// Fresh economy with initial prices spread uniformly over
    /// `1 ± price_dispersion / 2`; the CPI starts at their mean.
    pub fn seeded<R: rand::Rng + ?Sized>(
        params: &ModelParams,
        central_bank: &CentralBankConfig,
        start: Month,
        rng: &mut R,
    ) -> Self {
        let mut economy = Economy::new(params, central_bank, start);
        for f in &mut economy.firms {
            f.price = 1.0 + params.price_dispersion * (rng.random::<f64>() - 0.5);
        }
        let n = economy.firms.len() as f64;
        economy.cpi = economy.firms.iter().map(|f| f.price).sum::<f64>() / n;
        economy.energy.price = economy.cpi;
        economy
    }

    pub fn employment(&self) -> f64 {
        self.firms.iter().filter(|f| f.alive).map(|f| f.workforce).sum()
    }

    pub fn alive(&self) -> usize {
        self.firms.iter().filter(|f| f.alive).count()
    }

    /// Total money: household savings, firm cash net of debt, the energy
    /// sector's balance and the bank's equity. Only helicopter drops change it.
    pub fn money(&self) -> f64 {
        let firms: f64 = self.firms.iter().map(|f| f.cash).sum();
        self.household.savings + firms + self.energy.balance + self.bank.equity
    }

    /// Multiply every nominal quantity by `factor`. The dynamics are
    /// homogeneous of degree one in nominal units, so this only changes the
    /// numeraire.
    pub fn rescale(&mut self, factor: f64) {
        for f in &mut self.firms {
            f.price *= factor;
            f.wage *= factor;
            f.cash *= factor;
            f.profit *= factor;
        }
        let h = &mut self.household;
        h.savings *= factor;
        h.wage_income *= factor;
        h.budget *= factor;
        self.energy.balance *= factor;
        self.energy.price *= factor;
        self.bank.equity *= factor;
        self.cpi *= factor;
        self.avg_wage *= factor;
    }
}

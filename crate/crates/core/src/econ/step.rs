use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rules::{
    allocate_demand, consumption_budget, consumption_propensity, cpi, debt_to_sales, energy_step,
    expectation, firm_profit, fragility, gamma_coupling, hire_fire_rates, inflation_measures,
    price_update, production_update, wage_update, BudgetInputs, ProfitInputs,
};
use super::Economy;
use crate::calendar::Month;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::policy::{apply_helicopter, CentralBankConfig, PolicyHooks};

/// Exogenous inputs for one month.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Drivers {
    /// Multiplier on the baseline consumption propensity.
    pub consumption_scale: f64,
    /// Labor productivity in force this month.
    pub productivity: f64,
    /// Energy price relative to last month's CPI.
    pub energy_index: f64,
    /// Relative change of the energy price index since last month.
    pub energy_change: f64,
}

impl Drivers {
    pub fn calm(productivity: f64) -> Self {
        Drivers {
            consumption_scale: 1.0,
            productivity,
            energy_index: 1.0,
            energy_change: 0.0,
        }
    }
}

/// Uniform draws consumed by one month: a price draw, a wage draw and a
/// revival draw per firm. All three are drawn for every firm whatever its
/// state, so two runs with the same seed see the same numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct MonthDraws {
    pub price: Vec<f64>,
    pub wage: Vec<f64>,
    pub revival: Vec<f64>,
}

impl MonthDraws {
    pub fn sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut draws = MonthDraws {
            price: Vec::with_capacity(n),
            wage: Vec::with_capacity(n),
            revival: Vec::with_capacity(n),
        };
        for _ in 0..n {
            draws.price.push(rng.random::<f64>());
            draws.wage.push(rng.random::<f64>());
            draws.revival.push(rng.random::<f64>());
        }
        draws
    }
}

/// Everything the update needs besides the state and the month's inputs.
pub struct StepContext<'a> {
    pub params: &'a ModelParams,
    pub central_bank: &'a CentralBankConfig,
    pub hooks: &'a dyn PolicyHooks,
}

/// Observables of one simulated month.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonthRecord {
    pub month: Month,
    pub unemployment: f64,
    /// Realized monthly inflation.
    pub inflation: f64,
    /// Realized inflation compounded to a yearly rate.
    pub inflation_annual: f64,
    pub inflation_ema: f64,
    pub expected_inflation: f64,
    pub trust: f64,
    pub real_wage: f64,
    pub cpi: f64,
    pub base_rate: f64,
    pub loan_rate: f64,
    pub deposit_rate: f64,
    pub bankruptcy_rate: f64,
    pub demand_output: f64,
    pub savings: f64,
    pub energy_balance: f64,
    pub energy_price: f64,
    pub output: f64,
    pub threshold: f64,
    pub propensity: f64,
    pub productivity: f64,
    pub money: f64,
    pub injection: f64,
}

impl MonthRecord {
    /// Names of the numeric series, in column order.
    pub const SERIES: [&'static str; 22] = [
        "unemployment",
        "inflation",
        "inflation_annual",
        "inflation_ema",
        "expected_inflation",
        "trust",
        "real_wage",
        "cpi",
        "base_rate",
        "loan_rate",
        "deposit_rate",
        "bankruptcy_rate",
        "demand_output",
        "savings",
        "energy_balance",
        "energy_price",
        "output",
        "threshold",
        "propensity",
        "productivity",
        "money",
        "injection",
    ];

    /// Inverse of [`MonthRecord::values`].
    pub fn from_values(month: Month, v: [f64; 22]) -> Self {
        MonthRecord {
            month,
            unemployment: v[0],
            inflation: v[1],
            inflation_annual: v[2],
            inflation_ema: v[3],
            expected_inflation: v[4],
            trust: v[5],
            real_wage: v[6],
            cpi: v[7],
            base_rate: v[8],
            loan_rate: v[9],
            deposit_rate: v[10],
            bankruptcy_rate: v[11],
            demand_output: v[12],
            savings: v[13],
            energy_balance: v[14],
            energy_price: v[15],
            output: v[16],
            threshold: v[17],
            propensity: v[18],
            productivity: v[19],
            money: v[20],
            injection: v[21],
        }
    }

    /// Values in the order of [`MonthRecord::SERIES`].
    pub fn values(&self) -> [f64; 22] {
        [
            self.unemployment,
            self.inflation,
            self.inflation_annual,
            self.inflation_ema,
            self.expected_inflation,
            self.trust,
            self.real_wage,
            self.cpi,
            self.base_rate,
            self.loan_rate,
            self.deposit_rate,
            self.bankruptcy_rate,
            self.demand_output,
            self.savings,
            self.energy_balance,
            self.energy_price,
            self.output,
            self.threshold,
            self.propensity,
            self.productivity,
            self.money,
            self.injection,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// Nothing was traded; the CPI was carried forward.
    ZeroTrade,
    /// The policy rate hit (or left) the zero lower bound.
    ZeroLowerBound { binding: bool },
    /// The adaptive bankruptcy threshold rose above (or returned to) its floor.
    EasyCredit { binding: bool, threshold: f64 },
    HelicopterDrop { amount: f64 },
    /// Nominal quantities were rescaled to keep them representable.
    Rescaled { factor: f64 },
    /// A named window (shock or intervention) opens or closes.
    WindowStart { name: String },
    WindowEnd { name: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub month: Month,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub record: MonthRecord,
    pub events: Vec<Event>,
}

/// Yearly rate compounded from a monthly one.
pub fn annualize(monthly: f64) -> f64 {
    (1.0 + monthly).powi(12) - 1.0
}

impl Economy {
    /// Advance one month, drawing this month's random numbers from `rng`.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        ctx: &StepContext<'_>,
        drivers: &Drivers,
        rng: &mut R,
    ) -> Result<StepResult> {
        let draws = MonthDraws::sample(self.firms.len(), rng);
        self.step_with_draws(ctx, drivers, &draws)
    }

    /// Advance one month with the given draws.
    ///
    /// Order: decisions (prices, wages, production targets), hiring from the
    /// unemployed pool, household budget and demand, trade and settlement of
    /// all flows, defaults, revivals, inflation and rates, then policy hooks.
    pub fn step_with_draws(
        &mut self,
        ctx: &StepContext<'_>,
        drivers: &Drivers,
        draws: &MonthDraws,
    ) -> Result<StepResult> {
        let p = ctx.params;
        let cb = ctx.central_bank;
        let n = self.firms.len();
        assert!(
            draws.price.len() >= n && draws.wage.len() >= n && draws.revival.len() >= n,
            "one draw of each kind per firm"
        );
        let month = self.month;
        let mut events = Vec::new();

        let zeta = drivers.productivity;
        let expected = self.expectations.expected;
        let cpi_prev = self.cpi;
        let loan_rate = self.bank.loan_rate;
        let deposit_rate = self.bank.deposit_rate;
        let threshold = self.bank.threshold;
        let energy_price = cpi_prev * drivers.energy_index;
        let price_rule = p.price_rule();
        let wage_rule = p.wage_rule();
        let gamma = gamma_coupling(loan_rate, expected, p.alpha_gamma, p.gamma0);

        // Opening balances, on which interest accrues.
        let savings_open = self.household.savings;
        let mut debt_open = 0.0;
        let mut deposits_open = 0.0;
        let mut employed_open = 0.0;
        for f in self.firms.iter().filter(|f| f.alive) {
            debt_open += f.debt();
            deposits_open += f.deposits();
            employed_open += f.workforce;
        }
        let pool = (self.labor_force - employed_open).max(0.0);

        // Decisions on last month's information.
        let mut eta = vec![(0.0, 0.0); n];
        let mut new_price = vec![0.0; n];
        let mut new_wage = vec![0.0; n];
        for (i, f) in self.firms.iter().enumerate().filter(|(_, f)| f.alive) {
            let view = f.view();
            let phi = fragility(f.debt(), f.price, f.demand, f.production, threshold);
            eta[i] = hire_fire_rates(gamma, phi, p.hiring_rate(), p.firing_rate);
            new_price[i] = price_update(
                &price_rule,
                &view,
                cpi_prev,
                expected,
                drivers.energy_change,
                draws.price[i],
            );
            new_wage[i] = wage_update(
                &wage_rule,
                &view,
                self.unemployment,
                gamma,
                phi,
                expected,
                draws.wage[i],
                zeta,
                new_price[i],
            );
        }

        // Unemployed workers go preferentially to firms paying above the average wage.
        let mut weighted_wage = 0.0;
        let mut wage_weight = 0.0;
        for (i, f) in self.firms.iter().enumerate().filter(|(_, f)| f.alive) {
            weighted_wage += new_wage[i] * f.workforce;
            wage_weight += f.workforce;
        }
        let ref_wage = if wage_weight > 0.0 {
            weighted_wage / wage_weight
        } else {
            self.avg_wage
        };
        let hiring: Vec<usize> = (0..n)
            .filter(|&i| self.firms[i].alive && self.firms[i].demand > self.firms[i].production)
            .collect();
        let mut cap = vec![0.0; n];
        if !hiring.is_empty() && pool > 0.0 {
            let scores: Vec<f64> = hiring
                .iter()
                .map(|&i| p.beta * (new_wage[i] - ref_wage) / ref_wage)
                .collect();
            let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
            let total: f64 = weights.iter().sum();
            for (&i, w) in hiring.iter().zip(&weights) {
                cap[i] = pool * w / total;
            }
        }

        let mut wage_bill = 0.0;
        for (i, f) in self.firms.iter_mut().enumerate().filter(|(_, f)| f.alive) {
            let (eta_plus, eta_minus) = eta[i];
            let target = production_update(&f.view(), eta_plus, eta_minus, cap[i], zeta);
            // The output gap is closed with workers at today's productivity;
            // a productivity change alone moves output, not the workforce.
            let wanted = (f.workforce + (target - f.production) / zeta).max(0.0);
            let workforce = if wanted > f.workforce {
                wanted.min(f.workforce + cap[i])
            } else {
                wanted
            };
            f.price = new_price[i];
            f.wage = new_wage[i];
            f.workforce = workforce;
            f.production = zeta * workforce;
            wage_bill += f.wage * f.workforce;
        }

        // Household budget and demand.
        let payout_rate = ctx.hooks.energy_payout(month, p.energy_payout);
        let payout = payout_rate * self.energy.balance;
        let propensity = consumption_propensity(
            drivers.consumption_scale * p.c0,
            p.alpha_c,
            expected,
            deposit_rate,
        );
        let budget = consumption_budget(
            propensity,
            &BudgetInputs {
                savings: savings_open,
                wage_income: wage_bill,
                energy_payout: payout,
                deposit_rate,
            },
        );
        let alive_idx: Vec<usize> = (0..n).filter(|&i| self.firms[i].alive).collect();
        let prices: Vec<f64> = alive_idx.iter().map(|&i| self.firms[i].price).collect();
        // Choice acts on prices relative to the CPI, so it is unit-free.
        let demand = if alive_idx.is_empty() {
            Vec::new()
        } else {
            allocate_demand(budget, &prices, p.beta / cpi_prev)?
        };

        // Trade and settlement.
        let mut sales = 0.0;
        let mut dividends = 0.0;
        let mut output = 0.0;
        let mut total_demand = 0.0;
        let mut realized = vec![0.0; n];
        for (k, &i) in alive_idx.iter().enumerate() {
            let f = &mut self.firms[i];
            f.demand = demand[k];
            realized[i] = f.realized();
            sales += f.price * realized[i];
            output += f.production;
            total_demand += f.demand;
            let profit = firm_profit(
                &ProfitInputs {
                    price: f.price,
                    wage: f.wage,
                    production: f.production,
                    demand: f.demand,
                    cash: f.cash,
                    zeta,
                },
                deposit_rate,
                loan_rate,
                p.g_e,
                energy_price,
            );
            f.profit = profit;
            f.cash += profit;
            if f.cash > 0.0 && profit > 0.0 {
                let paid = p.dividend_rate * f.cash;
                f.cash -= paid;
                dividends += paid;
            }
        }
        let (balance, paid_out) =
            energy_step(self.energy.balance, energy_price, output, p.g_e, payout_rate);
        self.energy = super::EnergySector {
            balance,
            price: energy_price,
            payout_rate,
            price_change: drivers.energy_change,
        };
        self.bank.equity += loan_rate * debt_open - deposit_rate * (savings_open + deposits_open);
        let mut savings =
            savings_open * (1.0 + deposit_rate) + wage_bill + paid_out + dividends - sales;
        self.household.wage_income = wage_bill;
        self.household.budget = budget;
        self.household.propensity = propensity;

        // Defaults: the written-off debt is taken from savings; what savings
        // cannot cover stays on the bank's books.
        let mut debt_before = 0.0;
        let mut losses = 0.0;
        let mut defaults = 0;
        let mut defaulted = vec![false; n];
        for (i, f) in self.firms.iter_mut().enumerate().filter(|(_, f)| f.alive) {
            let debt = f.debt();
            debt_before += debt;
            if fragility(debt, f.price, f.demand, f.production, threshold) >= 1.0 {
                losses += debt;
                defaults += 1;
                defaulted[i] = true;
                f.bankrupt();
            }
        }
        let covered = losses.min(savings);
        savings -= covered;
        self.bank.equity -= losses - covered;
        let loss_ratio = if debt_before > 0.0 {
            losses / debt_before
        } else {
            0.0
        };
        self.bank.loss_rate = (1.0 - p.omega) * self.bank.loss_rate + p.omega * loss_ratio;
        self.bankruptcies = defaults;

        let all_prices: Vec<f64> = self.firms.iter().map(|f| f.price).collect();
        let cpi_now = match cpi(&all_prices, &realized) {
            Some(c) => c,
            None => {
                events.push(Event {
                    month,
                    kind: EventKind::ZeroTrade,
                });
                cpi_prev
            }
        };

        // Revivals of firms that were already closed at the start of the month.
        let mut employed = 0.0;
        let mut wage_sum = 0.0;
        for f in self.firms.iter().filter(|f| f.alive) {
            employed += f.workforce;
            wage_sum += f.wage * f.workforce;
        }
        if employed > 0.0 {
            self.avg_wage = wage_sum / employed;
        }
        let dormant: Vec<usize> = (0..n)
            .filter(|&i| !self.firms[i].alive && !defaulted[i])
            .collect();
        if !dormant.is_empty() && p.revival_prob > 0.0 {
            let unemployed = (self.labor_force - employed).max(0.0);
            let staff = p.y0 * unemployed / dormant.len() as f64;
            for &i in &dormant {
                if draws.revival[i] < p.revival_prob {
                    let f = &mut self.firms[i];
                    f.alive = true;
                    f.price = cpi_now;
                    f.wage = self.avg_wage;
                    f.cash = 0.0;
                    f.workforce = staff;
                    f.production = zeta * staff;
                    f.demand = f.production;
                    f.profit = 0.0;
                    employed += staff;
                }
            }
        }

        // Inflation, expectations and rates.
        let (realized_inflation, ema) =
            inflation_measures(cpi_now, cpi_prev, self.expectations.ema, p.omega);
        let trust = cb.next_trust(self.expectations.trust, realized_inflation);
        let expected_next = expectation(ema, cb.target, trust);
        let raw_rate = cb.natural_rate + cb.taylor_strength * (ema - cb.target);
        let base_rate = cb.policy_rate(ema);
        let was_bound = self.bank.base_rate == 0.0 && cb.taylor_strength > 0.0;
        let bound = raw_rate < 0.0;
        if bound != was_bound && cb.taylor_strength > 0.0 {
            events.push(Event {
                month,
                kind: EventKind::ZeroLowerBound { binding: bound },
            });
        }
        self.expectations = super::Expectations {
            realized: realized_inflation,
            ema,
            expected: expected_next,
            trust,
        };
        self.bank.base_rate = base_rate;
        self.bank.loan_rate = base_rate + self.bank.loss_rate;
        self.cpi = cpi_now;
        self.productivity = zeta;
        self.unemployment = (1.0 - employed / self.labor_force).clamp(0.0, 1.0);

        // Policy hooks.
        let mut ratio_sum = 0.0;
        let mut ratio_count = 0usize;
        for f in self.firms.iter().filter(|f| f.alive) {
            let r = debt_to_sales(f.debt(), f.price, f.demand, f.production);
            if r.is_finite() {
                ratio_sum += r;
                ratio_count += 1;
            }
        }
        let avg_ratio = if ratio_count > 0 {
            ratio_sum / ratio_count as f64
        } else {
            0.0
        };
        let next_threshold = ctx.hooks.bankruptcy_threshold(month, avg_ratio, p.theta0);
        if (next_threshold > p.theta0) != (threshold > p.theta0) {
            events.push(Event {
                month,
                kind: EventKind::EasyCredit {
                    binding: next_threshold > p.theta0,
                    threshold: next_threshold,
                },
            });
        }
        self.bank.threshold = next_threshold;
        let mut injection = 0.0;
        let kappa_h = ctx.hooks.helicopter_fraction(month);
        if kappa_h > 0.0 {
            let (boosted, amount) = apply_helicopter(savings, kappa_h);
            savings = boosted;
            injection = amount;
            events.push(Event {
                month,
                kind: EventKind::HelicopterDrop { amount },
            });
        }
        self.household.savings = savings;

        // Deposit rate for next month: the bank passes on what it expects to
        // collect, net of any losses it still carries.
        let mut debt_close = 0.0;
        let mut deposits_close = 0.0;
        for f in self.firms.iter().filter(|f| f.alive) {
            debt_close += f.debt();
            deposits_close += f.deposits();
        }
        let base = savings + deposits_close;
        self.bank.deposit_rate = if base > 0.0 {
            ((self.bank.loan_rate * debt_close + self.bank.equity) / base).max(0.0)
        } else {
            0.0
        };

        self.check_finite(month)?;
        self.month = month.offset(1);

        let record = MonthRecord {
            month,
            unemployment: self.unemployment,
            inflation: realized_inflation,
            inflation_annual: annualize(realized_inflation),
            inflation_ema: ema,
            expected_inflation: expected_next,
            trust,
            real_wage: self.avg_wage / cpi_now,
            cpi: cpi_now,
            base_rate,
            loan_rate: self.bank.loan_rate,
            deposit_rate: self.bank.deposit_rate,
            bankruptcy_rate: defaults as f64 / n.max(1) as f64,
            demand_output: if output > 0.0 {
                total_demand / output
            } else {
                0.0
            },
            savings,
            energy_balance: self.energy.balance,
            energy_price,
            output,
            threshold: next_threshold,
            propensity,
            productivity: zeta,
            money: self.money(),
            injection,
        };
        Ok(StepResult { record, events })
    }

    fn check_finite(&self, month: Month) -> Result<()> {
        let bad = |field: String| Err(Error::NonFinite { month, field });
        let scalars = [
            ("cpi", self.cpi),
            ("household.savings", self.household.savings),
            ("household.budget", self.household.budget),
            ("energy.balance", self.energy.balance),
            ("energy.price", self.energy.price),
            ("expectations.ema", self.expectations.ema),
            ("expectations.expected", self.expectations.expected),
            ("expectations.trust", self.expectations.trust),
            ("bank.loan_rate", self.bank.loan_rate),
            ("bank.deposit_rate", self.bank.deposit_rate),
            ("bank.threshold", self.bank.threshold),
            ("bank.equity", self.bank.equity),
            ("avg_wage", self.avg_wage),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                return bad(name.to_string());
            }
        }
        for (i, f) in self.firms.iter().enumerate() {
            let fields = [
                ("price", f.price),
                ("wage", f.wage),
                ("production", f.production),
                ("cash", f.cash),
                ("demand", f.demand),
            ];
            for (name, v) in fields {
                if !v.is_finite() {
                    return bad(format!("firms[{i}].{name}"));
                }
            }
        }
        Ok(())
    }
}

#![allow(dead_code)]

use mark0_core::econ::{Bank, EnergySector, Expectations, Household, MonthDraws};
use mark0_core::{CentralBankConfig, Drivers, Economy, Firm, ModelParams, Month, NoPolicy, StepContext};

/// Two firms: A is indebted and under-producing below the index, B holds
/// cash and over-produces above it.
pub fn two_firm_economy() -> (Economy, ModelParams, CentralBankConfig) {
    let params = ModelParams {
        n_firms: 2,
        ..ModelParams::default()
    };
    let cb = CentralBankConfig::inactive();
    let firm = |price, wage, production: f64, cash, demand, profit| Firm {
        price,
        wage,
        production,
        workforce: production,
        cash,
        demand,
        profit,
        alive: true,
    };
    let economy = Economy {
        month: Month::new(2020, 1),
        firms: vec![
            firm(1.0, 0.9, 0.5, -0.3, 0.6, 0.05),
            firm(1.1, 1.0, 0.6, 0.2, 0.4, -0.02),
        ],
        household: Household {
            savings: 1.5,
            wage_income: 1.0,
            budget: 1.0,
            propensity: 0.5,
        },
        energy: EnergySector {
            balance: 0.4,
            price: 1.0,
            payout_rate: 0.04,
            price_change: 0.0,
        },
        expectations: Expectations {
            realized: 0.002,
            ema: 0.002,
            expected: 0.002,
            trust: 0.0,
        },
        bank: Bank {
            base_rate: 0.001,
            loan_rate: 0.003,
            deposit_rate: 0.0008,
            loss_rate: 0.0005,
            threshold: 4.0,
            equity: 0.01,
        },
        productivity: 1.0,
        labor_force: 2.0,
        cpi: 1.05,
        avg_wage: 0.95,
        unemployment: 0.45,
        bankruptcies: 0,
    };
    (economy, params, cb)
}

pub fn two_firm_draws() -> MonthDraws {
    MonthDraws {
        price: vec![0.3, 0.6],
        wage: vec![0.5, 0.8],
        revival: vec![0.9, 0.9],
    }
}

/// `(name, simulated, hand-computed)` for every balance after one month.
pub fn two_firm_comparison() -> Vec<(&'static str, f64, f64)> {
    let (mut e, p, cb) = two_firm_economy();
    let before = e.money();
    let ctx = StepContext {
        params: &p,
        central_bank: &cb,
        hooks: &NoPolicy,
    };
    let step = e
        .step_with_draws(&ctx, &Drivers::calm(1.0), &two_firm_draws())
        .expect("finite step");
    let h = hand_ledger();
    let r = &step.record;
    let (a, b) = (&e.firms[0], &e.firms[1]);
    vec![
        ("price A", a.price, h.price_a),
        ("price B", b.price, h.price_b),
        ("wage A", a.wage, h.wage_a),
        ("wage B", b.wage, h.wage_b),
        ("workforce A", a.workforce, h.work_a),
        ("workforce B", b.workforce, h.work_b),
        ("demand A", a.demand, h.demand_a),
        ("demand B", b.demand, h.demand_b),
        ("profit A", a.profit, h.profit_a),
        ("profit B", b.profit, h.profit_b),
        ("cash A", a.cash, h.cash_a),
        ("cash B", b.cash, h.cash_b),
        ("budget", e.household.budget, h.budget),
        ("propensity", e.household.propensity, h.propensity),
        ("savings", e.household.savings, h.savings),
        ("energy balance", e.energy.balance, h.energy),
        ("bank equity", e.bank.equity, h.equity),
        ("loss rate", e.bank.loss_rate, h.loss_rate),
        ("loan rate", e.bank.loan_rate, h.loan_rate),
        ("deposit rate", e.bank.deposit_rate, h.deposit_rate),
        ("cpi", e.cpi, h.cpi),
        ("inflation", r.inflation, h.inflation),
        ("ema", e.expectations.ema, h.ema),
        ("expected", e.expectations.expected, h.ema),
        ("unemployment", e.unemployment, h.unemployment),
        ("avg wage", e.avg_wage, h.avg_wage),
        ("money", e.money(), before),
    ]
}

pub struct Ledger {
    pub price_a: f64,
    pub price_b: f64,
    pub wage_a: f64,
    pub wage_b: f64,
    pub work_a: f64,
    pub work_b: f64,
    pub demand_a: f64,
    pub demand_b: f64,
    pub profit_a: f64,
    pub profit_b: f64,
    pub cash_a: f64,
    pub cash_b: f64,
    pub budget: f64,
    pub propensity: f64,
    pub savings: f64,
    pub energy: f64,
    pub equity: f64,
    pub loss_rate: f64,
    pub loan_rate: f64,
    pub deposit_rate: f64,
    pub cpi: f64,
    pub inflation: f64,
    pub ema: f64,
    pub unemployment: f64,
    pub avg_wage: f64,
}

/// The month of [`two_firm_economy`] worked through by hand, one line per
/// ledger entry. Table values: gamma 0.01, g_p = g_w = 0.8, eta0- = 0.2,
/// R = 2, alpha_Gamma = 450, alpha_c = 12, c0 = 0.5, g_e = 0.0325,
/// delta = 0.02, delta_e = 0.04, omega = 0.2, beta = 2, rho* = 0.001.
pub fn hand_ledger() -> Ledger {
    let cpi0: f64 = 1.05;
    let expected: f64 = 0.002;
    let u0: f64 = 0.45;
    let (rho_l, rho_d): (f64, f64) = (0.003, 0.0008);

    // Gamma = 450 * (0.003 - 0.002)
    let gamma_c: f64 = 450.0 * 0.001;

    // A: debt 0.3 over sales min(0.6, 0.5) = 0.5, threshold 4.
    let phi_a = 0.3 / (4.0 * 0.5);
    let eta_plus_a = 0.4 * (1.0 - gamma_c * phi_a);
    // D > Y and p < cpi: price up by gamma * xi * D/Y plus g_p * expected.
    let price_a = 1.0 * (1.0 + 0.01 * 0.3 * (0.6 / 0.5) + 0.8 * expected);
    // D > Y and a profit: raise gamma * (1 - u) * (1 - Gamma phi) * xi' plus g_w * expected.
    let wage_a = 0.9 * (1.0 + 0.01 * (1.0 - u0) * (1.0 - gamma_c * phi_a) * 0.5 + 0.8 * expected);
    assert!(wage_a < price_a);

    // B: no debt, so phi = 0 and the base rates apply.
    // D < Y and p > cpi: price down by gamma * xi * Y/D.
    let price_b = 1.1 * (1.0 - 0.01 * 0.6 * (0.6 / 0.4) + 0.8 * expected);
    // D < Y and a loss: cut gamma * u * xi'.
    let wage_b = 1.0 * (1.0 - 0.01 * u0 * 0.8 + 0.8 * expected);

    // Only A hires, so the whole pool 2 - 1.1 = 0.9 is open to it.
    let work_a = 0.5 + (eta_plus_a * (0.6 - 0.5)).min(0.9);
    let work_b = 0.6 - 0.2 * (0.6 - 0.4);
    let (y_a, y_b) = (work_a, work_b);
    let wage_bill = wage_a * work_a + wage_b * work_b;

    // Household: c = c0 (1 + alpha_c (pi_hat - rho_d)), payout delta_e E_e.
    let propensity = 0.5 * (1.0 + 12.0 * (expected - rho_d));
    let payout = 0.04 * 0.4;
    let budget = propensity * (1.5 + wage_bill + payout + rho_d * 1.5);

    // Softmax on new prices with beta / last CPI.
    let beta = 2.0 / cpi0;
    let w_a = (-beta * price_a).exp();
    let w_b = (-beta * price_b).exp();
    let demand_a = budget * w_a / ((w_a + w_b) * price_a);
    let demand_b = budget * w_b / ((w_a + w_b) * price_b);

    let sold_a = demand_a.min(y_a);
    let sold_b = demand_b.min(y_b);
    let energy_price = cpi0;
    let profit_a = price_a * sold_a - wage_a * work_a - rho_l * 0.3 - 0.0325 * energy_price * y_a;
    let profit_b = price_b * sold_b - wage_b * work_b + rho_d * 0.2 - 0.0325 * energy_price * y_b;
    let mut cash_a = -0.3 + profit_a;
    let mut cash_b = 0.2 + profit_b;
    let mut dividends = 0.0;
    if cash_a > 0.0 && profit_a > 0.0 {
        dividends += 0.02 * cash_a;
        cash_a *= 0.98;
    }
    if cash_b > 0.0 && profit_b > 0.0 {
        dividends += 0.02 * cash_b;
        cash_b *= 0.98;
    }
    let energy = 0.4 + 0.0325 * energy_price * (y_a + y_b) - payout;
    let equity = 0.01 + rho_l * 0.3 - rho_d * (1.5 + 0.2);
    let sales = price_a * sold_a + price_b * sold_b;
    let savings = 1.5 * (1.0 + rho_d) + wage_bill + payout + dividends - sales;

    // No defaults: the loss average decays.
    let loss_rate = 0.8 * 0.0005;
    let cpi = (price_a * sold_a + price_b * sold_b) / (sold_a + sold_b);
    let inflation = cpi / cpi0 - 1.0;
    let ema = 0.8 * 0.002 + 0.2 * inflation;
    // Inactive bank: the policy rate is the natural rate.
    let loan_rate = 0.001 + loss_rate;
    let debt_close = (-cash_a).max(0.0) + (-cash_b).max(0.0);
    let deposits_close = cash_a.max(0.0) + cash_b.max(0.0);
    let deposit_rate = ((loan_rate * debt_close + equity) / (savings + deposits_close)).max(0.0);
    let employed = work_a + work_b;

    Ledger {
        price_a,
        price_b,
        wage_a,
        wage_b,
        work_a,
        work_b,
        demand_a,
        demand_b,
        profit_a,
        profit_b,
        cash_a,
        cash_b,
        budget,
        propensity,
        savings,
        energy,
        equity,
        loss_rate,
        loan_rate,
        deposit_rate,
        cpi,
        inflation,
        ema,
        unemployment: 1.0 - employed / 2.0,
        avg_wage: wage_bill / employed,
    }
}

/// Largest relative mismatch between the step and the hand ledger.
pub fn two_firm_worst() -> (&'static str, f64) {
    two_firm_comparison()
        .into_iter()
        .map(|(name, got, want)| (name, (got - want).abs() / want.abs().max(1.0)))
        .fold(("", 0.0), |acc, x| if x.1 > acc.1 { x } else { acc })
}

/// Brute-force softmax allocation: direct sums, no shift.
pub fn softmax_oracle(budget: f64, prices: &[f64], beta: f64) -> Vec<f64> {
    let mut total = 0.0;
    for &p in prices {
        total += (-beta * p).exp();
    }
    prices
        .iter()
        .map(|&p| budget * (-beta * p).exp() / total / p)
        .collect()
}

/// Small economy settings for fast integration tests.
pub fn small(mut config: mark0_core::ScenarioConfig, firms: usize) -> mark0_core::ScenarioConfig {
    config.parameters.n_firms = firms;
    config
}

mod common;

use mark0_core::econ::rules::{allocate_demand, consumption_propensity, price_update, wage_update, FirmView};
use mark0_core::econ::StepResult;
use mark0_core::{
    run_seed, CentralBankConfig, Drivers, Economy, EventKind, Firm, ModelParams, Month, MonthDraws, NoPolicy,
    ScenarioConfig, ShockSchedule, StepContext,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn one_month_matches_hand_ledger() {
    for (name, got, want) in common::two_firm_comparison() {
        let err = (got - want).abs() / want.abs().max(1.0);
        assert!(err < 1e-12, "{name}: simulated {got}, by hand {want}");
    }
}

#[test]
fn softmax_matches_brute_force() {
    let prices = [1.0, 1.1, 0.9];
    let got = allocate_demand(1.0, &prices, 2.0).unwrap();
    let want = common::softmax_oracle(1.0, &prices, 2.0);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-14, "{g} vs {w}");
    }
    let spent: f64 = got.iter().zip(&prices).map(|(d, p)| d * p).sum();
    assert!((spent - 1.0).abs() < 1e-14);
    // cheapest firm gets the most
    assert!(got[2] > got[0] && got[0] > got[1]);
}

/// Step `config` by hand for `months`, calling `check` after every month.
fn drive(config: &ScenarioConfig, seed: u64, months: u32, mut check: impl FnMut(&Economy, &Economy, &StepResult)) {
    let p = &config.parameters;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = config.run.start.offset(-(config.run.equilibration_months as i32));
    let mut economy = Economy::seeded(p, &config.central_bank, first, &mut rng);
    let ctx = StepContext {
        params: p,
        central_bank: &config.central_bank,
        hooks: &config.interventions,
    };
    for _ in 0..months {
        let before = economy.clone();
        let drivers = config.shocks.drivers(economy.month, p.zeta0);
        let step = economy.step(&ctx, &drivers, &mut rng).expect("finite");
        check(&before, &economy, &step);
    }
}

fn scale(e: &Economy) -> f64 {
    e.household.savings
        + e.firms.iter().map(|f| f.cash.abs()).sum::<f64>()
        + e.energy.balance.abs()
        + e.bank.equity.abs()
}

fn check_invariants(before: &Economy, after: &Economy, step: &StepResult) {
    let r = &step.record;
    let drift = after.money() - before.money() - r.injection;
    assert!(
        drift.abs() <= 1e-9 * scale(before).max(1.0),
        "{}: money moved by {drift}",
        r.month
    );
    assert!(after.employment() <= after.labor_force * (1.0 + 1e-12), "{}: over-employment", r.month);
    assert!(after.household.savings >= 0.0);
    assert!(r.propensity > 0.0 && r.propensity < 1.0);
    assert!((0.0..=1.0).contains(&r.trust));
    assert!((0.0..=1.0).contains(&r.unemployment));
    for f in after.firms.iter().filter(|f| f.alive) {
        assert!(f.price > 0.0 && f.wage > 0.0, "{}: non-positive price or wage", r.month);
        assert!(f.workforce >= 0.0 && f.production >= 0.0);
    }
    // every unit of budget is spent at the posted prices; a defaulted firm
    // forgets its demand, so this is only visible in months without defaults
    if after.bankruptcies > 0 {
        return;
    }
    let spent: f64 = after.firms.iter().filter(|f| f.alive).map(|f| f.price * f.demand).sum();
    let revived_demand: f64 = after
        .firms
        .iter()
        .zip(&before.firms)
        .filter(|(a, b)| a.alive && !b.alive)
        .map(|(a, _)| a.price * a.demand)
        .sum();
    let budget = after.household.budget;
    assert!(
        (spent - revived_demand - budget).abs() <= 1e-9 * budget.max(1.0),
        "{}: spent {spent} of budget {budget}",
        r.month
    );
}

fn short(mut config: ScenarioConfig, firms: usize) -> ScenarioConfig {
    config = common::small(config, firms);
    config.run.equilibration_months = 120;
    config
}

#[test]
fn invariants_hold_through_all_shocks() {
    let config = short(ScenarioConfig::preset("floating").unwrap(), 300);
    drive(&config, 3, 120 + 144, check_invariants);
}

#[test]
fn invariants_hold_through_bankruptcies() {
    let mut config = short(ScenarioConfig::preset("inactive").unwrap(), 300);
    config.parameters.theta0 = 2.0;
    let mut defaults = 0;
    drive(&config, 5, 120 + 144, |b, a, s| {
        defaults += a.bankruptcies;
        check_invariants(b, a, s);
    });
    assert!(defaults > 0, "this setting is meant to exercise defaults");
}

#[test]
fn helicopter_drop_is_the_only_money_creation() {
    let mut config = short(ScenarioConfig::preset("anchored").unwrap(), 200);
    let heli = &mut config.interventions.helicopter;
    heli.enabled = true;
    heli.month = Month::new(2020, 6);
    heli.kappa_h = 0.4;
    let mut injected = Vec::new();
    drive(&config, 2, 120 + 40, |b, a, s| {
        check_invariants(b, a, s);
        if s.record.injection > 0.0 {
            injected.push(s.record.month);
            let created = a.money() - b.money();
            assert!((created - s.record.injection).abs() < 1e-9 * scale(b));
            assert!(s.events.iter().any(|e| matches!(e.kind, EventKind::HelicopterDrop { .. })));
        }
    });
    assert_eq!(injected, vec![Month::new(2020, 6)]);
}

#[test]
fn same_seed_same_run() {
    let config = short(ScenarioConfig::preset("floating").unwrap(), 200);
    let a = run_seed(&config, 11, None).unwrap();
    let b = run_seed(&config, 11, None).unwrap();
    assert_eq!(a, b);
    let c = run_seed(&config, 12, None).unwrap();
    assert_ne!(a.records, c.records);
}

#[test]
fn wage_growth_tracks_employment() {
    let mut config = ScenarioConfig::preset("inactive").unwrap();
    config.shocks = ShockSchedule::none();
    config.parameters.n_firms = 500;
    config.run.equilibration_months = 300;
    config.run.horizon_months = 600;
    let out = run_seed(&config, 4, None).unwrap();
    let recs = &out.records;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for w in recs.windows(2) {
        let wage = |r: &mark0_core::MonthRecord| r.real_wage * r.cpi;
        xs.push(1.0 - w[1].unemployment);
        ys.push(wage(&w[1]) / wage(&w[0]) - 1.0);
    }
    let corr = correlation(&xs, &ys);
    assert!(corr > 0.0, "wage growth vs employment correlation {corr}");
}

fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

#[test]
fn all_dead_economy_stays_dead() {
    let params = ModelParams {
        n_firms: 4,
        revival_prob: 0.0,
        ..ModelParams::default()
    };
    let cb = CentralBankConfig::inactive();
    let mut e = Economy::new(&params, &cb, Month::new(2020, 1));
    for f in &mut e.firms {
        f.alive = false;
        f.workforce = 0.0;
        f.production = 0.0;
    }
    let ctx = StepContext {
        params: &params,
        central_bank: &cb,
        hooks: &NoPolicy,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let money = e.money();
    for _ in 0..24 {
        let step = e.step(&ctx, &Drivers::calm(1.0), &mut rng).unwrap();
        assert_eq!(e.alive(), 0);
        assert_eq!(step.record.unemployment, 1.0);
        assert_eq!(step.record.output, 0.0);
        assert!(step.events.iter().any(|ev| ev.kind == EventKind::ZeroTrade));
    }
    assert!((e.money() - money).abs() < 1e-9 * money);
}

#[test]
fn zero_trade_carries_the_index_forward() {
    let (mut e, p, cb) = common::two_firm_economy();
    let ctx = StepContext {
        params: &p,
        central_bank: &cb,
        hooks: &NoPolicy,
    };
    e.household.savings = 0.0;
    let cpi = e.cpi;
    // no savings and nobody employed: nothing to spend
    for f in &mut e.firms {
        f.workforce = 0.0;
        f.production = 0.0;
        f.demand = 0.0;
    }
    e.energy.balance = 0.0;
    let step = e.step_with_draws(&ctx, &Drivers::calm(1.0), &common::two_firm_draws()).unwrap();
    assert_eq!(e.cpi, cpi);
    assert_eq!(step.record.inflation, 0.0);
}

fn arb_firm() -> impl Strategy<Value = Firm> {
    (0.5f64..2.0, 0.3f64..1.5, 0.05f64..1.0, -1.0f64..1.0, 0.0f64..1.5, -0.1f64..0.1).prop_map(
        |(price, wage, production, cash, demand, profit)| Firm {
            price,
            wage,
            production,
            workforce: production,
            cash,
            demand,
            profit,
            alive: true,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_month_conserves_money_and_labor(
        firms in prop::collection::vec(arb_firm(), 2..8),
        savings in 0.0f64..5.0,
        seed in any::<u64>(),
        scale_c in 0.5f64..1.5,
        energy_index in 0.3f64..2.0,
    ) {
        let (mut e, mut p, cb) = common::two_firm_economy();
        p.n_firms = firms.len();
        let employed: f64 = firms.iter().map(|f| f.workforce).sum();
        e.labor_force = employed * 1.5;
        e.firms = firms;
        e.household.savings = savings;
        let ctx = StepContext { params: &p, central_bank: &cb, hooks: &NoPolicy };
        let drivers = Drivers { consumption_scale: scale_c, energy_index, ..Drivers::calm(1.0) };
        let before = e.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = MonthDraws::sample(e.firms.len(), &mut rng);
        let step = e.step_with_draws(&ctx, &drivers, &draws).unwrap();
        let drift = e.money() - before.money();
        prop_assert!(drift.abs() <= 1e-9 * scale(&before).max(1.0), "drift {}", drift);
        prop_assert!(e.employment() <= e.labor_force * (1.0 + 1e-12));
        prop_assert!(e.household.savings >= 0.0);
        prop_assert!(step.record.propensity > 0.0 && step.record.propensity < 1.0);
    }

    #[test]
    fn demand_spends_exactly_the_budget(
        prices in prop::collection::vec(0.01f64..100.0, 1..50),
        budget in 0.0f64..1e6,
        beta in 0.0f64..50.0,
    ) {
        let d = allocate_demand(budget, &prices, beta).unwrap();
        let spent: f64 = d.iter().zip(&prices).map(|(q, p)| q * p).sum();
        prop_assert!((spent - budget).abs() <= 1e-9 * budget.max(1.0));
        prop_assert!(d.iter().all(|q| *q >= 0.0 && q.is_finite()));
    }

    #[test]
    fn propensity_stays_inside_unit_interval(
        c0 in 0.0f64..2.0, expected in -1.0f64..1.0, rate in -1.0f64..1.0,
    ) {
        let c = consumption_propensity(c0, 12.0, expected, rate);
        prop_assert!(c > 0.0 && c < 1.0);
    }

    #[test]
    fn prices_and_wages_stay_positive(
        price in 1e-3f64..1e3, wage in 1e-3f64..1e3, production in 0.0f64..10.0,
        demand in 0.0f64..10.0, profit in -5.0f64..5.0, xi in 0.0f64..1.0,
        expected in -0.5f64..0.5, u in 0.0f64..1.0, phi in 0.0f64..10.0, gamma_c in 0.0f64..1.0,
    ) {
        let p = ModelParams::default();
        let view = FirmView { price, wage, production, demand, profit };
        let new_price = price_update(&p.price_rule(), &view, 1.0, expected, 0.0, xi);
        prop_assert!(new_price > 0.0);
        let new_wage = wage_update(&p.wage_rule(), &view, u, gamma_c, phi, expected, xi, 1.0, new_price);
        prop_assert!(new_wage > 0.0);
    }
}

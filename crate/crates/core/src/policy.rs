//! Central-bank behavior and the fiscal and regulatory interventions.

use serde::{Deserialize, Serialize};

use crate::calendar::Month;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// No inflation target, no reaction, no anchoring.
    InactiveCb,
    /// Taylor rule with a constant anchoring weight.
    AnchoredTrust,
    /// Taylor rule with anchoring that erodes when inflation misses the target.
    FloatingTrust,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::InactiveCb => "inactive_cb",
            Regime::AnchoredTrust => "anchored_trust",
            Regime::FloatingTrust => "floating_trust",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CentralBankConfig {
    pub regime: Regime,
    /// Inflation target, per month.
    pub target: f64,
    /// Taylor-rule reaction strength.
    pub taylor_strength: f64,
    /// Natural (baseline) rate, per month.
    pub natural_rate: f64,
    /// Anchoring weight: constant under anchored trust, initial value under floating trust.
    pub anchor: f64,
    /// Trust sensitivity to off-target inflation.
    pub trust_sensitivity: f64,
    /// Memory of the trust moving average.
    pub trust_memory: f64,
}

impl Default for CentralBankConfig {
    fn default() -> Self {
        CentralBankConfig::inactive()
    }
}

impl CentralBankConfig {
    pub fn inactive() -> Self {
        CentralBankConfig {
            regime: Regime::InactiveCb,
            target: 0.0,
            taylor_strength: 0.0,
            natural_rate: 0.001,
            anchor: 0.0,
            trust_sensitivity: 0.4,
            trust_memory: 0.2,
        }
    }

    /// Reactive bank, 2.4% p.a. target, unit Taylor strength, anchoring fixed at 0.95.
    pub fn anchored() -> Self {
        CentralBankConfig {
            regime: Regime::AnchoredTrust,
            target: 0.024 / 12.0,
            taylor_strength: 1.0,
            anchor: 0.95,
            ..CentralBankConfig::inactive()
        }
    }

    pub fn floating() -> Self {
        CentralBankConfig {
            regime: Regime::FloatingTrust,
            ..CentralBankConfig::anchored()
        }
    }

    /// Trust level at the start of a run.
    pub fn initial_trust(&self) -> f64 {
        match self.regime {
            Regime::InactiveCb => 0.0,
            Regime::AnchoredTrust | Regime::FloatingTrust => self.anchor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.natural_rate.is_finite() && self.natural_rate >= 0.0) {
            return Err(Error::config("central_bank.natural_rate", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.anchor) {
            return Err(Error::config("central_bank.anchor", "must lie in [0, 1]"));
        }
        if !(self.trust_sensitivity.is_finite() && self.trust_sensitivity >= 0.0) {
            return Err(Error::config("central_bank.trust_sensitivity", "must be >= 0"));
        }
        if !(self.trust_memory > 0.0 && self.trust_memory <= 1.0) {
            return Err(Error::config("central_bank.trust_memory", "must lie in (0, 1]"));
        }
        if !(self.taylor_strength.is_finite() && self.taylor_strength >= 0.0) {
            return Err(Error::config("central_bank.taylor_strength", "must be >= 0"));
        }
        match self.regime {
            Regime::InactiveCb => {
                if self.taylor_strength != 0.0 {
                    return Err(Error::regime(
                        "central_bank.taylor_strength",
                        "an inactive central bank requires taylor_strength = 0",
                    ));
                }
                if self.target != 0.0 {
                    return Err(Error::regime(
                        "central_bank.target",
                        "an inactive central bank requires target = 0",
                    ));
                }
            }
            Regime::AnchoredTrust => {}
            Regime::FloatingTrust => {
                if self.target <= 0.0 {
                    return Err(Error::regime(
                        "central_bank.target",
                        "floating trust requires a positive inflation target",
                    ));
                }
                if self.taylor_strength <= 0.0 {
                    return Err(Error::regime(
                        "central_bank.taylor_strength",
                        "floating trust requires taylor_strength > 0",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn policy_rate(&self, ema: f64) -> f64 {
        taylor_rate(ema, self.target, self.taylor_strength, self.natural_rate)
    }

    /// Next month's trust given this month's realized inflation.
    pub fn next_trust(&self, trust: f64, realized: f64) -> f64 {
        match self.regime {
            Regime::InactiveCb => 0.0,
            Regime::AnchoredTrust => trust,
            Regime::FloatingTrust => trust_update(
                trust,
                realized,
                self.target,
                self.taylor_strength,
                self.trust_sensitivity,
                self.trust_memory,
            ),
        }
    }
}

/// Taylor rule on perceived inflation with a zero lower bound.
pub fn taylor_rate(ema: f64, target: f64, strength: f64, natural_rate: f64) -> f64 {
    (natural_rate + strength * (ema - target)).max(0.0)
}

/// Moving-average update of the anchoring weight towards
/// `exp(-alpha_i |pi - pi*| / (pi* phi_pi))`.
pub fn trust_update(
    trust: f64,
    realized: f64,
    target: f64,
    strength: f64,
    sensitivity: f64,
    memory: f64,
) -> f64 {
    let gap = (realized - target).abs() / (target * strength);
    let attractor = if gap.is_nan() { 1.0 } else { (-sensitivity * gap).exp() };
    ((1.0 - memory) * trust + memory * attractor).clamp(0.0, 1.0)
}

/// Adaptive bankruptcy threshold: `max(mu <phi>, theta0)`.
pub fn easy_credit_threshold(avg_debt_to_sales: f64, multiplier: f64, theta0: f64) -> f64 {
    let scaled = multiplier * avg_debt_to_sales;
    if scaled.is_finite() {
        scaled.max(theta0)
    } else {
        theta0
    }
}

/// One-off boost of household savings: returns `(new_savings, injection)`.
pub fn apply_helicopter(savings: f64, kappa_h: f64) -> (f64, f64) {
    let injection = kappa_h * savings;
    (savings + injection, injection)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EasyCredit {
    pub enabled: bool,
    pub multiplier: f64,
}

impl Default for EasyCredit {
    fn default() -> Self {
        EasyCredit {
            enabled: false,
            multiplier: 1.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Helicopter {
    pub enabled: bool,
    pub month: Month,
    pub kappa_h: f64,
}

impl Default for Helicopter {
    fn default() -> Self {
        Helicopter {
            enabled: false,
            month: Month::new(2023, 7),
            kappa_h: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Windfall {
    pub enabled: bool,
    pub start: Month,
    pub duration_months: u32,
    pub surcharge: f64,
}

impl Default for Windfall {
    fn default() -> Self {
        Windfall {
            enabled: false,
            start: Month::new(2021, 10),
            duration_months: 24,
            surcharge: 0.04,
        }
    }
}

impl Windfall {
    pub fn is_active(&self, month: Month) -> bool {
        self.enabled
            && self.surcharge > 0.0
            && month >= self.start
            && self.start.months_until(month) < self.duration_months as i32
    }

    /// Last month of the window.
    pub fn end(&self) -> Month {
        self.start.offset(self.duration_months as i32 - 1)
    }
}

/// Effective energy payout rate in `month`.
pub fn apply_windfall(base_rate: f64, windfall: &Windfall, month: Month) -> f64 {
    if windfall.is_active(month) {
        base_rate + windfall.surcharge
    } else {
        base_rate
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterventionSchedule {
    pub easy_credit: EasyCredit,
    pub helicopter: Helicopter,
    pub windfall: Windfall,
}

impl InterventionSchedule {
    pub fn validate(&self, base_payout: f64) -> Result<()> {
        if !(self.easy_credit.multiplier >= 1.0) {
            return Err(Error::config("interventions.easy_credit.multiplier", "must be >= 1"));
        }
        if !(self.helicopter.kappa_h.is_finite() && self.helicopter.kappa_h >= 0.0) {
            return Err(Error::config("interventions.helicopter.kappa_h", "must be >= 0"));
        }
        let w = &self.windfall;
        if !(w.surcharge.is_finite() && w.surcharge >= 0.0) {
            return Err(Error::config("interventions.windfall.surcharge", "must be >= 0"));
        }
        if w.enabled && w.duration_months == 0 {
            return Err(Error::config("interventions.windfall.duration_months", "must be > 0"));
        }
        if w.enabled && base_payout + w.surcharge > 1.0 {
            return Err(Error::config(
                "interventions.windfall.surcharge",
                format!("payout rate {base_payout} + surcharge {} exceeds 1", w.surcharge),
            ));
        }
        Ok(())
    }
}

/// Policy decisions injected into the monthly update.
pub trait PolicyHooks {
    /// Bankruptcy threshold for the next month.
    fn bankruptcy_threshold(&self, _month: Month, _avg_debt_to_sales: f64, theta0: f64) -> f64 {
        theta0
    }

    /// Energy payout rate in force during `month`.
    fn energy_payout(&self, _month: Month, base_rate: f64) -> f64 {
        base_rate
    }

    /// Fraction of household savings dropped at the end of `month`.
    fn helicopter_fraction(&self, _month: Month) -> f64 {
        0.0
    }
}

/// No interventions at all.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoPolicy;

impl PolicyHooks for NoPolicy {}

impl PolicyHooks for InterventionSchedule {
    fn bankruptcy_threshold(&self, _month: Month, avg_debt_to_sales: f64, theta0: f64) -> f64 {
        if self.easy_credit.enabled {
            easy_credit_threshold(avg_debt_to_sales, self.easy_credit.multiplier, theta0)
        } else {
            theta0
        }
    }

    fn energy_payout(&self, month: Month, base_rate: f64) -> f64 {
        apply_windfall(base_rate, &self.windfall, month)
    }

    fn helicopter_fraction(&self, month: Month) -> f64 {
        if self.helicopter.enabled && month == self.helicopter.month {
            self.helicopter.kappa_h
        } else {
            0.0
        }
    }
}

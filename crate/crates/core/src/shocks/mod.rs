//! Calibrated shock paths: consumption, productivity and energy price.

mod series;

use serde::{Deserialize, Serialize};

use crate::calendar::Month;
use crate::econ::Drivers;
use crate::error::{Error, Result};

pub use series::{calibrate_template, ingest_csv, parse_csv, Calibration, IndexedSeries, RampFit};

/// Artificial energy price path, relative to the pre-shock level, one value
/// per month from the shock onset. Knots at the onset, the spring-2020 trough,
/// the return to par in early 2021, the mid-2022 peak and the end of the window.
const ENERGY_KNOTS: [(u32, f64); 6] = [(0, 0.65), (2, 0.30), (12, 1.0), (20, 1.3), (28, 2.0), (32, 1.0)];

/// Built-in energy price index, 33 months from the onset month.
pub fn default_energy_path() -> Vec<f64> {
    let last = ENERGY_KNOTS[ENERGY_KNOTS.len() - 1].0;
    (0..=last)
        .map(|k| {
            let j = ENERGY_KNOTS.iter().position(|&(m, _)| m >= k).unwrap();
            let (m1, v1) = ENERGY_KNOTS[j];
            if m1 == k || j == 0 {
                return v1;
            }
            let (m0, v0) = ENERGY_KNOTS[j - 1];
            v0 + (v1 - v0) * f64::from(k - m0) / f64::from(m1 - m0)
        })
        .collect()
}

/// Drop to `1 - scale * magnitude` (floored) at step 0, then linear return to 1
/// over `months` steps.
fn drop_recovery(k: i32, magnitude: f64, months: u32, scale: f64, floor: f64) -> f64 {
    if k < 0 || k >= months as i32 {
        return 1.0;
    }
    let trough = (1.0 - scale * magnitude).max(floor);
    trough + (1.0 - trough) * f64::from(k) / f64::from(months)
}

macro_rules! drop_shock {
    ($(#[$doc:meta])* $name:ident, $months:expr) => {
        $(#[$doc])*
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields, default)]
        pub struct $name {
            pub enabled: bool,
            pub magnitude: f64,
            pub recovery_months: u32,
        }

        impl Default for $name {
            fn default() -> Self {
                $name {
                    enabled: true,
                    magnitude: 0.15,
                    recovery_months: $months,
                }
            }
        }
    };
}

drop_shock!(
    /// Fall of the consumption propensity with a linear recovery.
    CovidShock,
    5
);
drop_shock!(
    /// Fall of labor productivity with a linear recovery.
    SupplyShock,
    15
);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyShock {
    pub enabled: bool,
    /// Price index relative to the pre-shock level, one value per month from
    /// the onset. Empty selects the built-in path.
    pub path: Vec<f64>,
    /// Weight of last month's effective price in an exponential smoothing of
    /// the spot path; 0 passes the spot price straight through.
    pub smoothing: f64,
}

impl Default for EnergyShock {
    fn default() -> Self {
        EnergyShock {
            enabled: true,
            path: Vec::new(),
            smoothing: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShockSchedule {
    /// Month in which all three shocks start.
    pub onset: Month,
    /// Amplification of the consumption shock only.
    pub kappa: f64,
    pub covid: CovidShock,
    pub supply: SupplyShock,
    pub energy: EnergyShock,
}

impl Default for ShockSchedule {
    fn default() -> Self {
        ShockSchedule {
            onset: Month::new(2020, 2),
            kappa: 1.0,
            covid: CovidShock::default(),
            supply: SupplyShock::default(),
            energy: EnergyShock::default(),
        }
    }
}

/// Floor on the consumption multiplier.
pub const MIN_CONSUMPTION_SCALE: f64 = 0.01;

impl ShockSchedule {
    /// No shock at all.
    pub fn none() -> Self {
        let mut s = ShockSchedule::default();
        s.covid.enabled = false;
        s.supply.enabled = false;
        s.energy.enabled = false;
        s
    }

    /// The three nested cases: COVID only, plus supply chains, plus energy.
    pub fn cascade(case: u8) -> Self {
        let mut s = ShockSchedule::default();
        s.supply.enabled = case >= 2;
        s.energy.enabled = case >= 3;
        s
    }

    pub fn any_enabled(&self) -> bool {
        self.covid.enabled || self.supply.enabled || self.energy.enabled
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::config("shocks.kappa", "must be >= 0"));
        }
        let ramps = [
            ("covid", self.covid.enabled, self.covid.magnitude, self.covid.recovery_months),
            ("supply", self.supply.enabled, self.supply.magnitude, self.supply.recovery_months),
        ];
        for (name, enabled, magnitude, months) in ramps {
            if !(0.0..1.0).contains(&magnitude) {
                return Err(Error::config(format!("shocks.{name}.magnitude"), "must lie in [0, 1)"));
            }
            if enabled && months == 0 {
                return Err(Error::config(format!("shocks.{name}.recovery_months"), "must be > 0"));
            }
        }
        if let Some(v) = self.energy.path.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::config("shocks.energy.path", format!("values must be > 0, got {v}")));
        }
        if !(0.0..1.0).contains(&self.energy.smoothing) {
            return Err(Error::config("shocks.energy.smoothing", "must lie in [0, 1)"));
        }
        Ok(())
    }

    fn k(&self, month: Month) -> i32 {
        self.onset.months_until(month)
    }

    /// Multiplier on the consumption propensity.
    pub fn consumption_scale(&self, month: Month) -> f64 {
        let c = &self.covid;
        if !c.enabled {
            return 1.0;
        }
        drop_recovery(self.k(month), c.magnitude, c.recovery_months, self.kappa, MIN_CONSUMPTION_SCALE)
    }

    /// Productivity relative to its baseline.
    pub fn productivity_factor(&self, month: Month) -> f64 {
        let s = &self.supply;
        if !s.enabled {
            return 1.0;
        }
        drop_recovery(self.k(month), s.magnitude, s.recovery_months, 1.0, 0.0)
    }

    fn spot(&self, k: i32) -> f64 {
        if !self.energy.enabled || k < 0 {
            return 1.0;
        }
        let k = k as usize;
        if self.energy.path.is_empty() {
            default_energy_path().get(k).copied().unwrap_or(1.0)
        } else {
            self.energy.path.get(k).copied().unwrap_or(1.0)
        }
    }

    /// Effective energy price index in `month`.
    pub fn energy_index(&self, month: Month) -> f64 {
        let k = self.k(month);
        let s = self.energy.smoothing;
        if s == 0.0 || k < 0 {
            return self.spot(k);
        }
        let mut level = 1.0;
        for j in 0..=k {
            level = s * level + (1.0 - s) * self.spot(j);
        }
        level
    }

    /// Relative change of the energy index from the previous month.
    pub fn energy_change(&self, month: Month) -> f64 {
        self.energy_index(month) / self.energy_index(month.offset(-1)) - 1.0
    }

    /// Last month of the energy window.
    pub fn energy_end(&self) -> Month {
        let len = if self.energy.path.is_empty() {
            default_energy_path().len()
        } else {
            self.energy.path.len()
        };
        self.onset.offset(len as i32 - 1)
    }

    /// Exogenous inputs for `month` given baseline productivity `zeta0`.
    pub fn drivers(&self, month: Month, zeta0: f64) -> Drivers {
        Drivers {
            consumption_scale: self.consumption_scale(month),
            productivity: zeta0 * self.productivity_factor(month),
            energy_index: self.energy_index(month),
            energy_change: self.energy_change(month),
        }
    }

    /// Named windows `(name, first month, last month)` of the enabled shocks.
    pub fn windows(&self) -> Vec<(String, Month, Month)> {
        let mut out = Vec::new();
        if self.covid.enabled {
            out.push((
                "covid".to_string(),
                self.onset,
                self.onset.offset(self.covid.recovery_months as i32 - 1),
            ));
        }
        if self.supply.enabled {
            out.push((
                "supply".to_string(),
                self.onset,
                self.onset.offset(self.supply.recovery_months as i32 - 1),
            ));
        }
        if self.energy.enabled {
            out.push(("energy".to_string(), self.onset, self.energy_end()));
        }
        out
    }
}

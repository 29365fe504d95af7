//! NPV-maximizing rooftop PV sizing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomicParams {
    pub capex_per_kw: f64,
    /// Currency per kWh of compensated energy.
    pub tariff: f64,
    pub discount_rate: f64,
    /// Years.
    pub lifetime: f64,
    /// Per-unit PV output, one value per hour of each represented day.
    pub capacity_factor_profile: Vec<f64>,
    pub hours_per_day: usize,
}

/// Site limits of one potential project.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteLimits {
    pub roof_limit_kw: f64,
    pub self_consumption_cap_kwh: f64,
}

impl EconomicParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("capex_per_kw", self.capex_per_kw),
            ("tariff", self.tariff),
            ("lifetime", self.lifetime),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0")));
            }
        }
        if !(self.discount_rate >= 0.0 && self.discount_rate.is_finite()) {
            return Err(Error::InvalidParameter("discount_rate must be >= 0".into()));
        }
        if self.hours_per_day == 0
            || self.capacity_factor_profile.is_empty()
            || self.capacity_factor_profile.len() % self.hours_per_day != 0
        {
            return Err(Error::InvalidParameter(
                "profile must cover whole days".into(),
            ));
        }
        if self
            .capacity_factor_profile
            .iter()
            .any(|v| !(0.0..=1.0).contains(v))
        {
            return Err(Error::InvalidParameter("profile values must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Present value of one currency unit per year over the lifetime.
    pub fn annuity(&self) -> f64 {
        let r = self.discount_rate;
        if r == 0.0 {
            self.lifetime
        } else {
            (1.0 - (1.0 + r).powf(-self.lifetime)) / r
        }
    }

    /// Annual energy per installed kW, kWh.
    pub fn energy_per_kw(&self) -> f64 {
        let days = (self.capacity_factor_profile.len() / self.hours_per_day) as f64;
        self.capacity_factor_profile.iter().sum::<f64>() * 365.0 / days
    }

    pub fn npv(&self, site: &SiteLimits, capacity_kw: f64) -> f64 {
        let energy = capacity_kw * self.energy_per_kw();
        self.annuity() * self.tariff * energy.min(site.self_consumption_cap_kwh)
            - self.capex_per_kw * capacity_kw
    }
}

/// Capacity maximizing NPV on a 1 kW grid over (0, roof limit]; 0 when no
/// size is profitable. Ties go to the smaller size.
pub fn size_project(site: &SiteLimits, econ: &EconomicParams) -> f64 {
    let top = site.roof_limit_kw.floor().max(0.0) as u64;
    let mut best = (0.0, 0.0);
    for c in 1..=top {
        let c = c as f64;
        let v = econ.npv(site, c);
        if v > best.1 {
            best = (c, v);
        }
    }
    best.0
}

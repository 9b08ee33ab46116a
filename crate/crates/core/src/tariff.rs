//! Prices, amortized capital costs, the daily peak/off-peak split and the
//! PV panel conversion.
//!
//! Everything here is a plain value type validated at construction. Prices
//! are dollars per kWh; amortized costs are dollars per unit of capacity per
//! day.

use chrono::{NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack used when comparing price margins, so that decimal inputs
/// such as `0.30 - 0.22` against `0.08` land on the intended side.
pub const PRICE_EPS: f64 = 1e-12;

/// Two-period time-of-use buy/sell prices in $/kWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TariffSchedule {
    lambda_h: f64,
    mu_h: f64,
    lambda_l: f64,
    mu_l: f64,
}

impl TariffSchedule {
    /// Builds a schedule from peak buy, peak sell, off-peak buy and off-peak
    /// sell prices. All must be positive and satisfy
    /// `lambda_h >= mu_h >= lambda_l >= mu_l`.
    pub fn new(lambda_h: f64, mu_h: f64, lambda_l: f64, mu_l: f64) -> Result<Self> {
        let prices = [
            ("lambda_h", lambda_h),
            ("mu_h", mu_h),
            ("lambda_l", lambda_l),
            ("mu_l", mu_l),
        ];
        for (name, v) in prices {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidTariff(format!("{name} must be positive, got {v}")));
            }
        }
        for pair in prices.windows(2) {
            let ((hi_name, hi), (lo_name, lo)) = (pair[0], pair[1]);
            if hi < lo {
                return Err(Error::InvalidTariff(format!(
                    "price chain broken: {hi_name} = {hi} < {lo_name} = {lo}"
                )));
            }
        }
        Ok(Self {
            lambda_h,
            mu_h,
            lambda_l,
            mu_l,
        })
    }

    /// Same price in both directions for both periods (`lambda = mu`).
    pub fn parity(peak: f64, offpeak: f64) -> Result<Self> {
        Self::new(peak, peak, offpeak, offpeak)
    }

    pub fn lambda_h(&self) -> f64 {
        self.lambda_h
    }
    pub fn mu_h(&self) -> f64 {
        self.mu_h
    }
    pub fn lambda_l(&self) -> f64 {
        self.lambda_l
    }
    pub fn mu_l(&self) -> f64 {
        self.mu_l
    }

    /// `lambda_h > mu_h > lambda_l > mu_l`.
    pub fn is_strict(&self) -> bool {
        self.lambda_h > self.mu_h && self.mu_h > self.lambda_l && self.lambda_l > self.mu_l
    }

    /// `lambda_h = mu_h` and `lambda_l = mu_l`.
    pub fn is_parity(&self) -> bool {
        self.lambda_h == self.mu_h && self.lambda_l == self.mu_l
    }
}

/// Daily amortized capital costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmortizedCosts {
    lambda_b: f64,
    lambda_a: f64,
}

impl AmortizedCosts {
    /// `lambda_b` in $/kWh of storage capacity per day, `lambda_a` in $/m² of
    /// panel area per day.
    pub fn new(lambda_b: f64, lambda_a: f64) -> Result<Self> {
        for (name, v) in [("lambda_b", lambda_b), ("lambda_a", lambda_a)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidCosts(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(Self { lambda_b, lambda_a })
    }

    pub fn lambda_b(&self) -> f64 {
        self.lambda_b
    }
    pub fn lambda_a(&self) -> f64 {
        self.lambda_a
    }

    /// Daily capital charge for `b` kWh of storage and `a` m² of panels.
    pub fn daily_capital(&self, b: f64, a: f64) -> f64 {
        self.lambda_b * b + self.lambda_a * a
    }
}

/// The peak block `[peak_start, peak_end)` in whole hours; the rest of the
/// calendar day is off-peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodPartition {
    peak_start_hour: u32,
    peak_end_hour: u32,
}

impl PeriodPartition {
    pub fn new(peak_start_hour: u32, peak_end_hour: u32) -> Result<Self> {
        if peak_start_hour >= peak_end_hour || peak_end_hour > 24 {
            return Err(Error::InvalidPartition(format!(
                "need 0 <= peak_start < peak_end <= 24, got {peak_start_hour}..{peak_end_hour}"
            )));
        }
        Ok(Self {
            peak_start_hour,
            peak_end_hour,
        })
    }

    pub fn peak_start_hour(&self) -> u32 {
        self.peak_start_hour
    }
    pub fn peak_end_hour(&self) -> u32 {
        self.peak_end_hour
    }

    pub fn peak_hours(&self) -> f64 {
        f64::from(self.peak_end_hour - self.peak_start_hour)
    }

    pub fn offpeak_hours(&self) -> f64 {
        24.0 - self.peak_hours()
    }

    /// Whether a sample stamped at `time` belongs to the peak block.
    pub fn is_peak(&self, time: NaiveTime) -> bool {
        let minute = time.hour() * 60 + time.minute();
        minute >= self.peak_start_hour * 60 && minute < self.peak_end_hour * 60
    }
}

/// Panel output model: `rated_output` W/m² at `reference_irradiance` W/m²,
/// derated by `system_efficiency`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelModel {
    rated_output: f64,
    reference_irradiance: f64,
    system_efficiency: f64,
}

impl PanelModel {
    pub fn new(rated_output: f64, reference_irradiance: f64, system_efficiency: f64) -> Result<Self> {
        if !rated_output.is_finite() || rated_output <= 0.0 {
            return Err(Error::InvalidPanel(format!(
                "rated output must be > 0, got {rated_output}"
            )));
        }
        if !reference_irradiance.is_finite() || reference_irradiance <= 0.0 {
            return Err(Error::InvalidPanel(format!(
                "reference irradiance must be > 0, got {reference_irradiance}"
            )));
        }
        if !(system_efficiency > 0.0 && system_efficiency <= 1.0) {
            return Err(Error::InvalidPanel(format!(
                "system efficiency must lie in (0, 1], got {system_efficiency}"
            )));
        }
        Ok(Self {
            rated_output,
            reference_irradiance,
            system_efficiency,
        })
    }

    pub fn rated_output(&self) -> f64 {
        self.rated_output
    }
    pub fn reference_irradiance(&self) -> f64 {
        self.reference_irradiance
    }
    pub fn system_efficiency(&self) -> f64 {
        self.system_efficiency
    }

    /// Delivered power per unit irradiance per m² (dimensionless W/W).
    pub fn effective_yield(&self) -> f64 {
        self.rated_output * self.system_efficiency / self.reference_irradiance
    }
}

/// Everything the cost model needs besides the load data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub tariff: TariffSchedule,
    pub costs: AmortizedCosts,
    pub partition: PeriodPartition,
    pub panel: PanelModel,
}

/// Critical fractile `(lambda_h - lambda_l - lambda_b) / (lambda_h - mu_h)`.
///
/// Not clamped: values `<= 0` mean storage never pays, values `>= 1` mean the
/// expected cost keeps falling with capacity.
pub fn fractile(tariff: &TariffSchedule, costs: &AmortizedCosts) -> Result<f64> {
    let spread = tariff.lambda_h - tariff.mu_h;
    if spread <= 0.0 {
        return Err(Error::DegenerateTariff);
    }
    Ok(fractile_numerator(tariff, costs) / spread)
}

pub(crate) fn fractile_numerator(tariff: &TariffSchedule, costs: &AmortizedCosts) -> f64 {
    tariff.lambda_h - tariff.lambda_l - costs.lambda_b
}

/// `mu_h - lambda_l >= lambda_b`: charging off-peak and selling at the peak
/// covers the storage capital cost. Equivalent to `fractile >= 1`.
pub fn arbitrage_viable(tariff: &TariffSchedule, costs: &AmortizedCosts) -> bool {
    (tariff.mu_h - tariff.lambda_l) - costs.lambda_b >= -PRICE_EPS
}

/// Energy in kWh produced by `area` m² of panels under a period-mean
/// irradiance over `duration` hours.
pub fn pv_energy(irradiance_mean: f64, duration: f64, area: f64, panel: &PanelModel) -> Result<f64> {
    if irradiance_mean < 0.0 {
        return Err(Error::NegativeIrradiance(irradiance_mean));
    }
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "duration must be >= 0 h, got {duration}"
        )));
    }
    if !(area >= 0.0 && area.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "panel area must be >= 0 m2, got {area}"
        )));
    }
    Ok(area * irradiance_mean * panel.effective_yield() * duration / 1000.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn austin() -> TariffSchedule {
        TariffSchedule::new(0.54, 0.30, 0.22, 0.13).unwrap()
    }

    fn panel() -> PanelModel {
        PanelModel::new(183.0, 1000.0, 0.93).unwrap()
    }

    #[test]
    fn tariff_rejects_broken_chain() {
        assert!(TariffSchedule::new(0.54, 0.60, 0.22, 0.13).is_err());
        assert!(TariffSchedule::new(0.54, 0.30, 0.22, 0.0).is_err());
        assert!(TariffSchedule::new(0.54, 0.30, 0.31, 0.13).is_err());
        assert!(TariffSchedule::new(f64::NAN, 0.30, 0.22, 0.13).is_err());
    }

    #[test]
    fn strict_and_parity_predicates() {
        assert!(austin().is_strict());
        assert!(!austin().is_parity());
        let flat = TariffSchedule::parity(0.54, 0.22).unwrap();
        assert!(flat.is_parity());
        assert!(!flat.is_strict());
        let weak = TariffSchedule::new(0.54, 0.30, 0.30, 0.13).unwrap();
        assert!(!weak.is_strict() && !weak.is_parity());
    }

    #[test]
    fn fractile_austin_prices() {
        let c = AmortizedCosts::new(0.0884, 0.0558).unwrap();
        assert_abs_diff_eq!(fractile(&austin(), &c).unwrap(), 0.965, epsilon = 1e-12);
    }

    #[test]
    fn fractile_zero_when_capital_eats_spread() {
        let t = austin();
        let c = AmortizedCosts::new(t.lambda_h() - t.lambda_l(), 0.0).unwrap();
        assert_abs_diff_eq!(fractile(&t, &c).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn fractile_above_one() {
        let c = AmortizedCosts::new(0.05, 0.0).unwrap();
        assert_abs_diff_eq!(fractile(&austin(), &c).unwrap(), 1.125, epsilon = 1e-12);
    }

    #[test]
    fn fractile_degenerate_tariff() {
        let t = TariffSchedule::parity(0.54, 0.22).unwrap();
        let c = AmortizedCosts::new(0.0884, 0.0).unwrap();
        assert!(matches!(fractile(&t, &c), Err(Error::DegenerateTariff)));
    }

    #[test]
    fn arbitrage_cases() {
        let t = austin();
        let cost = |b| AmortizedCosts::new(b, 0.0).unwrap();
        assert!(!arbitrage_viable(&t, &cost(0.0884)));
        assert!(arbitrage_viable(&t, &cost(0.08)));
        assert!(arbitrage_viable(&t, &cost(0.01)));
    }

    #[test]
    fn pv_energy_examples() {
        let p = panel();
        assert_abs_diff_eq!(pv_energy(1000.0, 1.0, 1.0, &p).unwrap(), 0.170, epsilon = 2e-4);
        assert_eq!(pv_energy(0.0, 14.0, 30.0, &p).unwrap(), 0.0);
        // 170 W nominal (the rounded derated figure) reproduces 0.7729 kWh;
        // the unrounded 183 W x 0.93 gives 0.77375.
        let rounded = PanelModel::new(170.0, 1000.0, 1.0).unwrap();
        assert_abs_diff_eq!(pv_energy(324.74, 14.0, 1.0, &rounded).unwrap(), 0.7729, epsilon = 1e-4);
        assert_abs_diff_eq!(pv_energy(324.74, 14.0, 1.0, &p).unwrap(), 0.773745, epsilon = 1e-6);
        assert!(matches!(
            pv_energy(-0.2, 1.0, 1.0, &p),
            Err(Error::NegativeIrradiance(_))
        ));
    }

    #[test]
    fn partition_membership() {
        let p = PeriodPartition::new(8, 22).unwrap();
        assert_eq!(p.peak_hours(), 14.0);
        assert_eq!(p.offpeak_hours(), 10.0);
        assert!(!p.is_peak(NaiveTime::from_hms_opt(7, 59, 0).unwrap()));
        assert!(p.is_peak(NaiveTime::from_hms_opt(8, 0, 0).unwrap()));
        assert!(p.is_peak(NaiveTime::from_hms_opt(21, 45, 0).unwrap()));
        assert!(!p.is_peak(NaiveTime::from_hms_opt(22, 0, 0).unwrap()));
        assert!(PeriodPartition::new(22, 8).is_err());
        assert!(PeriodPartition::new(0, 25).is_err());
        assert!(PeriodPartition::new(0, 24).is_ok());
    }

    fn strict_tariff() -> impl Strategy<Value = (f64, f64, f64, f64)> {
        // Build the chain from positive gaps so it is strict by construction.
        (0.01f64..0.2, 0.01f64..0.2, 0.01f64..0.2, 0.01f64..0.2)
            .prop_map(|(ml, g1, g2, g3)| (ml + g1 + g2 + g3, ml + g1 + g2, ml + g1, ml))
    }

    proptest! {
        #[test]
        fn fractile_monotone((lh, mh, ll, ml) in strict_tariff(), lb in 0.0f64..0.3, d in 1e-4f64..0.01) {
            let t = TariffSchedule::new(lh, mh, ll, ml).unwrap();
            let base = fractile(&t, &AmortizedCosts::new(lb, 0.0).unwrap()).unwrap();
            let more_b = fractile(&t, &AmortizedCosts::new(lb + d, 0.0).unwrap()).unwrap();
            prop_assert!(more_b < base);
            let c = AmortizedCosts::new(lb, 0.0).unwrap();
            if ll + d < mh {
                let t2 = TariffSchedule::new(lh, mh, ll + d, ml).unwrap();
                prop_assert!(fractile(&t2, &c).unwrap() < base);
            }
            // raising mu_h shrinks the denominator, which raises the ratio
            // only while the numerator is positive
            if mh + d < lh && lh - ll - lb > 0.0 {
                let t3 = TariffSchedule::new(lh, mh + d, ll, ml).unwrap();
                prop_assert!(fractile(&t3, &c).unwrap() > base);
            }
        }

        #[test]
        fn viability_iff_fractile_at_least_one((lh, mh, ll, ml) in strict_tariff(), lb in 0.0f64..0.3) {
            let t = TariffSchedule::new(lh, mh, ll, ml).unwrap();
            let c = AmortizedCosts::new(lb, 0.0).unwrap();
            let margin = mh - ll - lb;
            prop_assume!(margin.abs() > 1e-9);
            prop_assert_eq!(arbitrage_viable(&t, &c), fractile(&t, &c).unwrap() >= 1.0);
        }

        #[test]
        fn pv_energy_linear(s in 0.0f64..1200.0, area in 0.0f64..50.0, k in 0.0f64..5.0) {
            let p = panel();
            let e = pv_energy(s, 14.0, area, &p).unwrap();
            let scaled_area = pv_energy(s, 14.0, area * k, &p).unwrap();
            let scaled_irr = pv_energy(s * k, 14.0, area, &p).unwrap();
            prop_assert!((scaled_area - k * e).abs() <= 1e-12 * (1.0 + k * e));
            prop_assert!((scaled_irr - k * e).abs() <= 1e-12 * (1.0 + k * e));
        }
    }
}

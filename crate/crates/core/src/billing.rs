//! Realized daily costs and monthly/annual reports.
//!
//! Settlement is per day and per period: each period's net import is bought
//! at that period's buy price and any net export sold at its sell price.

use std::fmt::Write as _;
use std::io::Write;

use chrono::{Datelike, Month, NaiveDate};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{DailyRecord, Dataset};
use crate::tariff::{pv_energy, ModelParams, TariffSchedule};

pub const LABEL_TOTAL: &str = "Total cost for one year";
pub const LABEL_CAPITAL: &str = "Capital cost for one year";
pub const LABEL_OPERATIONAL: &str = "Total cost for one year without capital cost";
pub const LABEL_SAVINGS_EXCL: &str = "Cost savings for one year excluding capital cost";
pub const LABEL_SAVINGS_INCL: &str = "Cost savings for one year including capital cost";

/// One day's bill in dollars. Sales are reported as positive amounts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DailyCost {
    pub date: NaiveDate,
    pub peak_purchase: f64,
    pub peak_sale: f64,
    pub offpeak_purchase: f64,
    pub offpeak_sale: f64,
    pub capital: f64,
    pub total: f64,
}

impl DailyCost {
    /// Purchases minus sales, without capital.
    pub fn operational(&self) -> f64 {
        self.peak_purchase - self.peak_sale + self.offpeak_purchase - self.offpeak_sale
    }
}

fn check_sizes(b: f64, a: f64) -> Result<()> {
    if !(b.is_finite() && b >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "storage capacity must be >= 0 kWh, got {b}"
        )));
    }
    if !(a.is_finite() && a >= 0.0) {
        return Err(Error::InvalidArgument(format!("panel area must be >= 0 m2, got {a}")));
    }
    Ok(())
}

/// Net grid energy of the peak and off-peak periods (positive = import).
///
/// The battery discharges its full capacity `b` during the peak block and is
/// recharged during the off-peak block.
fn period_net(record: &DailyRecord, b: f64, a: f64, params: &ModelParams) -> Result<(f64, f64)> {
    let p = &params.partition;
    let solar_peak = pv_energy(record.s_peak, p.peak_hours(), a, &params.panel)?;
    let solar_off = pv_energy(record.s_offpeak, p.offpeak_hours(), a, &params.panel)?;
    Ok((record.h_peak - solar_peak - b, record.h_offpeak + b - solar_off))
}

pub fn daily_cost(record: &DailyRecord, b: f64, a: f64, params: &ModelParams) -> Result<DailyCost> {
    check_sizes(b, a)?;
    let t = &params.tariff;
    let (net_peak, net_off) = period_net(record, b, a, params)?;
    let peak_purchase = t.lambda_h() * net_peak.max(0.0);
    let peak_sale = t.mu_h() * (-net_peak).max(0.0);
    let offpeak_purchase = t.lambda_l() * net_off.max(0.0);
    let offpeak_sale = t.mu_l() * (-net_off).max(0.0);
    let capital = params.costs.daily_capital(b, a);
    Ok(DailyCost {
        date: record.date,
        peak_purchase,
        peak_sale,
        offpeak_purchase,
        offpeak_sale,
        capital,
        total: peak_purchase - peak_sale + offpeak_purchase - offpeak_sale + capital,
    })
}

/// Sum of daily all-in totals over the dataset.
pub fn total_cost(dataset: &Dataset, b: f64, a: f64, params: &ModelParams) -> Result<f64> {
    check_sizes(b, a)?;
    dataset
        .records()
        .iter()
        .map(|r| daily_cost(r, b, a, params).map(|c| c.total))
        .sum()
}

/// Cost with neither storage nor panels: `lambda_h Hh + lambda_l Hl` summed
/// over the records.
pub fn baseline_cost(dataset: &Dataset, tariff: &TariffSchedule) -> f64 {
    dataset.records().iter().map(|r| baseline_day(r, tariff)).sum()
}

fn baseline_day(r: &DailyRecord, tariff: &TariffSchedule) -> f64 {
    tariff.lambda_h() * r.h_peak + tariff.lambda_l() * r.h_offpeak
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonthRow {
    pub year: i32,
    pub month: u32,
    pub days: usize,
    pub baseline: f64,
    pub operational: f64,
    pub capital: f64,
    pub total: f64,
}

impl MonthRow {
    pub fn label(&self) -> String {
        let name = u8::try_from(self.month)
            .ok()
            .and_then(|m| Month::try_from(m).ok())
            .map_or("?", |m| m.name());
        format!("{name} {}", self.year)
    }
}

/// Monthly and whole-dataset costs for one (b, a) sizing against the
/// no-storage, no-panel baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub b: f64,
    pub a: f64,
    pub days: usize,
    pub months: Vec<MonthRow>,
    pub baseline_total: f64,
    pub operational_total: f64,
    pub capital_total: f64,
    pub total: f64,
    pub savings_excl_capital: f64,
    pub savings_incl_capital: f64,
    /// `savings_incl_capital` as a percentage of the baseline.
    pub savings_incl_capital_pct: f64,
}

pub fn simulate(dataset: &Dataset, b: f64, a: f64, params: &ModelParams) -> Result<CostReport> {
    check_sizes(b, a)?;
    let mut months: Vec<MonthRow> = Vec::new();
    for r in dataset.records() {
        let c = daily_cost(r, b, a, params)?;
        let (year, month) = (r.date.year(), r.date.month());
        let row = match months.last_mut() {
            Some(row) if row.year == year && row.month == month => row,
            _ => {
                months.push(MonthRow {
                    year,
                    month,
                    days: 0,
                    baseline: 0.0,
                    operational: 0.0,
                    capital: 0.0,
                    total: 0.0,
                });
                months.last_mut().expect("just pushed")
            }
        };
        row.days += 1;
        row.baseline += baseline_day(r, &params.tariff);
        row.operational += c.operational();
        row.capital += c.capital;
        row.total += c.total;
    }
    let sum = |f: fn(&MonthRow) -> f64| months.iter().map(f).sum::<f64>();
    let baseline_total = sum(|m| m.baseline);
    let operational_total = sum(|m| m.operational);
    let capital_total = sum(|m| m.capital);
    let total = sum(|m| m.total);
    let savings_excl_capital = baseline_total - operational_total;
    let savings_incl_capital = baseline_total - total;
    Ok(CostReport {
        b,
        a,
        days: dataset.len(),
        months,
        baseline_total,
        operational_total,
        capital_total,
        total,
        savings_excl_capital,
        savings_incl_capital,
        savings_incl_capital_pct: if baseline_total != 0.0 {
            100.0 * savings_incl_capital / baseline_total
        } else {
            0.0
        },
    })
}

impl CostReport {
    /// `(label, baseline column, scenario column)` summary rows.
    pub fn summary_rows(&self) -> [(&'static str, f64, f64); 5] {
        [
            (LABEL_TOTAL, self.baseline_total, self.total),
            (LABEL_CAPITAL, 0.0, self.capital_total),
            (LABEL_OPERATIONAL, self.baseline_total, self.operational_total),
            (LABEL_SAVINGS_EXCL, 0.0, self.savings_excl_capital),
            (LABEL_SAVINGS_INCL, 0.0, self.savings_incl_capital),
        ]
    }

    /// Aligned table: months then summary rows, two decimals.
    pub fn render_text(&self) -> String {
        let scenario = format!("B={:.2} kWh, a={:.2} m2", self.b, self.a);
        let mut rows: Vec<(String, f64, f64)> = self.months.iter().map(|m| (m.label(), m.baseline, m.total)).collect();
        rows.extend(self.summary_rows().iter().map(|&(l, x, y)| (l.to_string(), x, y)));
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(8);
        let col = scenario.len().max(16);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>col$}  {:>col$}",
            "Cost ($)", "No B & No PV", scenario
        );
        for (label, base, value) in rows {
            let _ = writeln!(out, "{label:<width$}  {base:>col$.2}  {value:>col$.2}");
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>col$}  {:>col$.2}%",
            "Savings incl. capital (share of baseline)", "", self.savings_incl_capital_pct
        );
        out
    }

    /// CSV with columns `row,baseline,scenario`; one row per month followed
    /// by the summary rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "baseline", "scenario"])?;
        for m in &self.months {
            w.write_record([m.label(), format!("{:.2}", m.baseline), format!("{:.2}", m.total)])?;
        }
        for (label, base, value) in self.summary_rows() {
            w.write_record([label.to_string(), format!("{base:.2}"), format!("{value:.2}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Totals under end-of-billing-period netting: each month's net import per
/// period is settled once, instead of day by day.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NettingComparison {
    pub per_day_total: f64,
    pub per_month_total: f64,
    pub months: Vec<(i32, u32, f64)>,
}

pub fn netting_comparison(dataset: &Dataset, b: f64, a: f64, params: &ModelParams) -> Result<NettingComparison> {
    check_sizes(b, a)?;
    let t = &params.tariff;
    let settle = |net: f64, buy: f64, sell: f64| buy * net.max(0.0) - sell * (-net).max(0.0);
    // (year, month, net peak kWh, net off-peak kWh, capital $)
    let mut buckets: Vec<(i32, u32, f64, f64, f64)> = Vec::new();
    for r in dataset.records() {
        let (np, no) = period_net(r, b, a, params)?;
        let key = (r.date.year(), r.date.month());
        match buckets.last_mut() {
            Some(bk) if (bk.0, bk.1) == key => {
                bk.2 += np;
                bk.3 += no;
                bk.4 += params.costs.daily_capital(b, a);
            }
            _ => buckets.push((key.0, key.1, np, no, params.costs.daily_capital(b, a))),
        }
    }
    let months: Vec<(i32, u32, f64)> = buckets
        .iter()
        .map(|&(y, m, np, no, cap)| {
            (
                y,
                m,
                settle(np, t.lambda_h(), t.mu_h()) + settle(no, t.lambda_l(), t.mu_l()) + cap,
            )
        })
        .collect();
    Ok(NettingComparison {
        per_day_total: total_cost(dataset, b, a, params)?,
        per_month_total: months.iter().map(|m| m.2).sum(),
        months,
    })
}

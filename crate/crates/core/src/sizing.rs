//! Investment sizing.
//!
//! Storage follows a critical-fractile rule: the optimal capacity is the
//! quantile of daily peak consumption at
//! `(lambda_h - lambda_l - lambda_b) / (lambda_h - mu_h)`. Panel area under
//! parity prices is bang-bang, either nothing or the maximum area. Grid scans
//! evaluate the same cost functionals by brute force, both as an oracle for
//! the closed forms and for the non-parity panel case where no closed form
//! exists.

use std::io::Write;

use serde::Serialize;

use crate::billing::total_cost;
use crate::dist::{DistMode, Distribution, EmpiricalDistribution, Side};
use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::tariff::{
    arbitrage_viable, fractile, fractile_numerator, AmortizedCosts, ModelParams, TariffSchedule, PRICE_EPS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `0 < fractile < 1`: finite optimum at the fractile quantile.
    Interior,
    /// `fractile <= 0`: storage never pays.
    ZeroStorage,
    /// `fractile >= 1`: cost keeps falling with capacity; capped at `b_max`.
    Unbounded,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Interior => "interior",
            Regime::ZeroStorage => "zero-storage",
            Regime::Unbounded => "unbounded",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StorageSizing {
    /// Chosen capacity, kWh.
    pub b_opt: f64,
    pub fractile: f64,
    pub regime: Regime,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolarSizing {
    /// Chosen area, m²: either 0 or `a_max`.
    pub a_opt: f64,
    /// `lambda_h E[Sh] + lambda_l E[Sl]` with per-m² daily energies, $/m²/day.
    pub condition_lhs: f64,
    /// `lambda_a`, $/m²/day.
    pub condition_rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizingResult {
    pub storage: StorageSizing,
    pub solar: Option<SolarSizing>,
}

/// Storage capacity from the critical fractile of `dist_hh`.
///
/// The tariff must satisfy the strict price chain. In the interior regime a
/// quantile beyond `b_max` is capped at `b_max` with a warning.
pub fn optimal_storage<D: Distribution>(
    dist_hh: &D,
    tariff: &TariffSchedule,
    costs: &AmortizedCosts,
    b_max: f64,
) -> Result<StorageSizing> {
    let p = fractile(tariff, costs)?;
    if !tariff.is_strict() {
        return Err(Error::StrictTariffRequired);
    }
    if !(b_max.is_finite() && b_max > 0.0) {
        return Err(Error::InvalidArgument(format!("b_max must be > 0 kWh, got {b_max}")));
    }
    if arbitrage_viable(tariff, costs) {
        return Ok(StorageSizing {
            b_opt: b_max,
            fractile: p,
            regime: Regime::Unbounded,
            warning: Some(format!(
                "fractile {p:.4} >= 1 (mu_h - lambda_l >= lambda_b): expected cost decreases without bound in capacity; reporting b_max = {b_max}"
            )),
        });
    }
    if fractile_numerator(tariff, costs) <= PRICE_EPS {
        return Ok(StorageSizing {
            b_opt: 0.0,
            fractile: p,
            regime: Regime::ZeroStorage,
            warning: None,
        });
    }
    let q = dist_hh.quantile(p)?.max(0.0);
    let (b_opt, warning) = if q > b_max {
        (
            b_max,
            Some(format!("fractile quantile {q:.3} kWh exceeds b_max = {b_max}; capped")),
        )
    } else {
        (q, None)
    };
    Ok(StorageSizing {
        b_opt,
        fractile: p,
        regime: Regime::Interior,
        warning,
    })
}

/// Expected daily cost with `b` kWh of storage and no panels:
/// `lambda_b b + lambda_h E[(Hh - b)+] - mu_h E[(b - Hh)+] + lambda_l (E[Hl] + b)`.
pub fn expected_cost_storage<D: Distribution>(
    dist_hh: &D,
    mean_hl: f64,
    tariff: &TariffSchedule,
    costs: &AmortizedCosts,
    b: f64,
) -> Result<f64> {
    if !(b.is_finite() && b >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "storage capacity must be >= 0 kWh, got {b}"
        )));
    }
    Ok(
        costs.lambda_b() * b + tariff.lambda_h() * dist_hh.upper_hinge(b) - tariff.mu_h() * dist_hh.lower_hinge(b)
            + tariff.lambda_l() * (mean_hl + b),
    )
}

/// The optimal daily cost evaluated two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostIdentity {
    /// `lambda_h E[Hh 1{Hh > b}] + mu_h E[Hh 1{Hh <= b}] + lambda_l E[Hl]`.
    pub partial_expectation_form: f64,
    /// The expected cost at `b` computed directly.
    pub direct: f64,
}

impl CostIdentity {
    pub fn relative_gap(&self) -> f64 {
        (self.partial_expectation_form - self.direct).abs() / self.direct.abs().max(f64::MIN_POSITIVE)
    }
}

/// Evaluates the closed-form optimal cost, written with partial
/// expectations, next to the direct expected cost at `b_opt`. The two agree
/// exactly when `cdf(b_opt)` equals the fractile; in general they differ by
/// `b_opt (lambda_h - mu_h) (cdf(b_opt) - fractile)`.
pub fn optimal_cost_identity<D: Distribution>(
    dist_hh: &D,
    mean_hl: f64,
    tariff: &TariffSchedule,
    costs: &AmortizedCosts,
    b_opt: f64,
) -> Result<CostIdentity> {
    let direct = expected_cost_storage(dist_hh, mean_hl, tariff, costs, b_opt)?;
    let partial_expectation_form = tariff.lambda_h() * dist_hh.partial_expectation(b_opt, Side::Above)
        + tariff.mu_h() * dist_hh.partial_expectation(b_opt, Side::Below)
        + tariff.lambda_l() * mean_hl;
    Ok(CostIdentity {
        partial_expectation_form,
        direct,
    })
}

/// Bang-bang panel area under parity prices. Inputs are mean daily PV
/// energies per m² of panel for each period.
pub fn optimal_solar(
    mean_sh_energy: f64,
    mean_sl_energy: f64,
    tariff: &TariffSchedule,
    costs: &AmortizedCosts,
    a_max: f64,
) -> Result<SolarSizing> {
    if !tariff.is_parity() {
        return Err(Error::ParityRequired);
    }
    if !(a_max.is_finite() && a_max > 0.0) {
        return Err(Error::InvalidArgument(format!("a_max must be > 0 m2, got {a_max}")));
    }
    if !(mean_sh_energy >= 0.0 && mean_sl_energy >= 0.0) {
        return Err(Error::InvalidArgument("mean PV energies must be >= 0".into()));
    }
    let lhs = tariff.lambda_h() * mean_sh_energy + tariff.lambda_l() * mean_sl_energy;
    let rhs = costs.lambda_a();
    Ok(SolarSizing {
        a_opt: if lhs >= rhs { a_max } else { 0.0 },
        condition_lhs: lhs,
        condition_rhs: rhs,
    })
}

/// Costs over a `b x a` grid, row-major in `b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostSurface {
    pub b_grid: Vec<f64>,
    pub a_grid: Vec<f64>,
    pub costs: Vec<f64>,
    /// Days the costs are summed over (1 for per-day expectations).
    pub horizon_days: usize,
    pub argmin: (f64, f64),
    pub min_cost: f64,
}

impl CostSurface {
    fn from_fn(
        b_grid: Vec<f64>,
        a_grid: Vec<f64>,
        horizon_days: usize,
        mut f: impl FnMut(f64, f64) -> Result<f64>,
    ) -> Result<Self> {
        check_grid("b", &b_grid)?;
        check_grid("a", &a_grid)?;
        let mut costs = Vec::with_capacity(b_grid.len() * a_grid.len());
        let mut best: Option<(f64, f64, f64)> = None;
        for &b in &b_grid {
            for &a in &a_grid {
                let c = f(b, a)?;
                if !c.is_finite() {
                    return Err(Error::InvalidArgument(format!("non-finite cost at b={b}, a={a}")));
                }
                costs.push(c);
                // strict comparison keeps the lexicographically smallest tie
                if best.is_none_or(|(_, _, m)| c < m) {
                    best = Some((b, a, c));
                }
            }
        }
        let (b, a, min_cost) = best.expect("grids are nonempty");
        Ok(Self {
            b_grid,
            a_grid,
            costs,
            horizon_days,
            argmin: (b, a),
            min_cost,
        })
    }

    pub fn cost(&self, bi: usize, ai: usize) -> f64 {
        self.costs[bi * self.a_grid.len() + ai]
    }

    /// Costs along the `b` axis at the `ai`-th area.
    pub fn b_slice(&self, ai: usize) -> Vec<f64> {
        (0..self.b_grid.len()).map(|bi| self.cost(bi, ai)).collect()
    }

    /// Costs along the `a` axis at the `bi`-th capacity.
    pub fn a_slice(&self, bi: usize) -> Vec<f64> {
        (0..self.a_grid.len()).map(|ai| self.cost(bi, ai)).collect()
    }

    /// `b,a,cost` rows for contour plotting.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["b", "a", "cost"])?;
        for (bi, b) in self.b_grid.iter().enumerate() {
            for (ai, a) in self.a_grid.iter().enumerate() {
                w.write_record([
                    format!("{b:.4}"),
                    format!("{a:.4}"),
                    format!("{:.6}", self.cost(bi, ai)),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "{name} grid values must be finite and >= 0"
        )));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument(format!("{name} grid must be nondecreasing")));
    }
    Ok(())
}

/// Inclusive grid `start, start + step, ...` up to `stop` (within a
/// millionth of a step).
pub fn grid_by_step(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite() && step > 0.0 && stop >= start) {
        return Err(Error::InvalidArgument(format!("bad grid {start}:{stop}:{step}")));
    }
    let n = ((stop - start) / step + 1e-6).floor() as usize;
    if n > 1_000_000 {
        return Err(Error::InvalidArgument(format!(
            "grid {start}:{stop}:{step} is too large"
        )));
    }
    let grid: Vec<f64> = (0..=n).map(|i| start + step * i as f64).collect();
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!(
            "grid {start}:{stop}:{step} step is below float resolution"
        )));
    }
    Ok(grid)
}

/// Parses a `start:stop:step` grid spec.
pub fn parse_grid_spec(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        return Err(Error::InvalidArgument(format!(
            "expected start:stop:step, got `{spec}`"
        )));
    };
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|e| Error::InvalidArgument(format!("grid value `{v}`: {e}")))
    };
    grid_by_step(num(start)?, num(stop)?, num(step)?)
}

/// Default capacity grid: 0 to 1.5 x the 99.9% quantile in 0.5 kWh steps.
pub fn default_b_grid<D: Distribution>(dist_hh: &D) -> Result<Vec<f64>> {
    grid_by_step(0.0, 1.5 * dist_hh.quantile(0.999)?.max(0.5), 0.5)
}

/// Default area grid: 0 to `a_max` in 0.5 m² steps.
pub fn default_a_grid(a_max: f64) -> Result<Vec<f64>> {
    grid_by_step(0.0, a_max, 0.5)
}

/// Expected daily cost over `b_grid` for any distribution of peak load.
pub fn expected_cost_scan<D: Distribution>(
    dist_hh: &D,
    mean_hl: f64,
    tariff: &TariffSchedule,
    costs: &AmortizedCosts,
    b_grid: Vec<f64>,
) -> Result<CostSurface> {
    CostSurface::from_fn(b_grid, vec![0.0], 1, |b, _| {
        expected_cost_storage(dist_hh, mean_hl, tariff, costs, b)
    })
}

/// Storage-only scan against the dataset's ECDF. Costs are totals over the
/// dataset's days, so they line up with [`joint_scan`] at `a = 0`.
pub fn storage_scan(
    dataset: &Dataset,
    tariff: &TariffSchedule,
    costs: &AmortizedCosts,
    b_grid: Vec<f64>,
) -> Result<CostSurface> {
    let dist = EmpiricalDistribution::ecdf(dataset.h_peak())?;
    let mean_hl = dataset.mean_h_offpeak();
    let days = dataset.len();
    CostSurface::from_fn(b_grid, vec![0.0], days, |b, _| {
        Ok(days as f64 * expected_cost_storage(&dist, mean_hl, tariff, costs, b)?)
    })
}

/// The storage-then-panels decision evaluated on the realized dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequentialPoint {
    pub storage: StorageSizing,
    pub solar: Option<SolarSizing>,
    pub b: f64,
    pub a: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointScan {
    pub surface: CostSurface,
    /// `None` when the tariff admits no storage fractile (not strict).
    pub sequential: Option<SequentialPoint>,
    /// The sequential point with the capacity rounded to a whole kWh.
    pub sequential_rounded: Option<SequentialPoint>,
}

/// Brute-force search of total dataset cost over both sizes.
///
/// The sequential decision (fractile capacity from `mode`, then the best
/// area given that capacity) is also computed; its capacity and area are
/// merged into the grids so the joint minimum is always taken over a
/// superset containing it. Under parity prices the area comes from the
/// bang-bang rule with `a_max` = the largest grid area, otherwise from a scan
/// of `a_grid` at the fixed capacity.
pub fn joint_scan(
    dataset: &Dataset,
    params: &ModelParams,
    b_grid: Vec<f64>,
    a_grid: Vec<f64>,
    mode: DistMode,
) -> Result<JointScan> {
    check_grid("b", &b_grid)?;
    check_grid("a", &a_grid)?;
    let cost = |b: f64, a: f64| total_cost(dataset, b, a, params);

    let (sequential, sequential_rounded) = if params.tariff.is_strict() {
        let dist = EmpiricalDistribution::with_mode(dataset.h_peak(), mode)?;
        let b_max = *b_grid.last().expect("checked nonempty");
        let storage = optimal_storage(&dist, &params.tariff, &params.costs, b_max.max(f64::MIN_POSITIVE))?;
        let exact = sequential_at(dataset, params, storage.clone(), storage.b_opt, &a_grid, &cost)?;
        let rounded_b = storage.b_opt.round();
        let rounded = sequential_at(dataset, params, storage, rounded_b, &a_grid, &cost)?;
        (Some(exact), Some(rounded))
    } else {
        (None, None)
    };

    let mut b_grid = b_grid;
    let mut a_grid = a_grid;
    for s in sequential.iter().chain(sequential_rounded.iter()) {
        merge_sorted(&mut b_grid, s.b);
        merge_sorted(&mut a_grid, s.a);
    }
    let surface = CostSurface::from_fn(b_grid, a_grid, dataset.len(), cost)?;
    Ok(JointScan {
        surface,
        sequential,
        sequential_rounded,
    })
}

fn sequential_at(
    dataset: &Dataset,
    params: &ModelParams,
    storage: StorageSizing,
    b: f64,
    a_grid: &[f64],
    cost: &impl Fn(f64, f64) -> Result<f64>,
) -> Result<SequentialPoint> {
    let a_max = *a_grid.last().expect("checked nonempty");
    let (a, solar) = if params.tariff.is_parity() && a_max > 0.0 {
        let (sh, sl) = dataset.mean_pv_energy_per_m2(&params.panel)?;
        let s = optimal_solar(sh, sl, &params.tariff, &params.costs, a_max)?;
        (s.a_opt, Some(s))
    } else {
        let mut best = (a_grid[0], cost(b, a_grid[0])?);
        for &a in &a_grid[1..] {
            let c = cost(b, a)?;
            if c < best.1 {
                best = (a, c);
            }
        }
        (best.0, None)
    };
    Ok(SequentialPoint {
        storage,
        solar,
        b,
        a,
        cost: cost(b, a)?,
    })
}

fn merge_sorted(grid: &mut Vec<f64>, v: f64) {
    let i = grid.partition_point(|&g| g < v);
    if grid.get(i) != Some(&v) {
        grid.insert(i, v);
    }
}

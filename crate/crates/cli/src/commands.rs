use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use prosumer_core::billing::{netting_comparison, simulate as simulate_costs, CostReport, NettingComparison};
use prosumer_core::config::ModelConfig;
use prosumer_core::dist::{DistMode, Distribution, EmpiricalDistribution, Side, Summary};
use prosumer_core::ingest::{
    aggregate_daily, read_dataset_file, read_interval_csv, synth_dataset, ColumnMapping, Dataset, SynthParams,
};
use prosumer_core::sizing::{
    default_a_grid, default_b_grid, joint_scan, optimal_cost_identity, optimal_solar, optimal_storage, CostIdentity,
    SequentialPoint, SolarSizing, StorageSizing,
};
use prosumer_core::{Error, Result};
use serde::Serialize;

use crate::{DumpCdfArgs, Format, IngestArgs, SimulateArgs, SizeArgs, SweepArgs, SynthArgs};

fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    f(&mut out)?;
    out.flush()?;
    Ok(())
}

fn write_out(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => write_file(p, f),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize") + "\n"
}

fn unsupported(format: Format, command: &str) -> Error {
    let name = match format {
        Format::Text => "text",
        Format::Json => "json",
        Format::Csv => "csv",
    };
    Error::InvalidArgument(format!("--format {name} is not supported by `{command}`"))
}

fn load(config: &Path, data: &Path) -> Result<(ModelConfig, Dataset)> {
    let cfg = ModelConfig::load(config)?;
    let ds = read_dataset_file(data, cfg.params.partition)?;
    Ok((cfg, ds))
}

#[derive(Serialize)]
struct VariableSummary {
    variable: &'static str,
    unit: &'static str,
    #[serde(flatten)]
    stats: Summary,
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    source: &'a str,
    days: usize,
    first: String,
    last: String,
    clamped_irradiance_rows: usize,
    gaps: &'a [prosumer_core::ingest::DayGap],
    variables: Vec<VariableSummary>,
}

fn dataset_summary(ds: &Dataset, clamped: usize) -> Result<IngestSummary<'_>> {
    let first = ds.records().first().ok_or(Error::EmptyInput)?.date;
    let last = ds.records().last().ok_or(Error::EmptyInput)?.date;
    let variables = [
        ("Hh", "kWh", ds.h_peak()),
        ("Hl", "kWh", ds.h_offpeak()),
        ("Sh", "W/m2", ds.s_peak()),
        ("Sl", "W/m2", ds.s_offpeak()),
    ]
    .into_iter()
    .map(|(variable, unit, v)| Summary::of(&v).map(|stats| VariableSummary { variable, unit, stats }))
    .collect::<Result<Vec<_>>>()?;
    Ok(IngestSummary {
        source: ds.source(),
        days: ds.len(),
        first: first.to_string(),
        last: last.to_string(),
        clamped_irradiance_rows: clamped,
        gaps: ds.gaps(),
        variables,
    })
}

fn render_summary(s: &IngestSummary<'_>, format: Format) -> String {
    match format {
        Format::Json => to_json(s),
        Format::Csv => {
            let mut out = String::from("variable,unit,count,mean,std,min,q25,q50,q75,max\n");
            for v in &s.variables {
                let st = &v.stats;
                let _ = writeln!(
                    out,
                    "{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
                    v.variable, v.unit, st.count, st.mean, st.std, st.min, st.q25, st.q50, st.q75, st.max
                );
            }
            out
        }
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "{}: {} days, {} to {}", s.source, s.days, s.first, s.last);
            let _ = writeln!(
                out,
                "{:<12}{:>9}{:>9}{:>9}{:>9}{:>9}{:>9}{:>9}",
                "", "mean", "std", "min", "25%", "50%", "75%", "max"
            );
            for v in &s.variables {
                let st = &v.stats;
                let label = format!("{} ({})", v.variable, v.unit);
                let _ = writeln!(
                    out,
                    "{label:<12}{:>9.2}{:>9.2}{:>9.2}{:>9.2}{:>9.2}{:>9.2}{:>9.2}",
                    st.mean, st.std, st.min, st.q25, st.q50, st.q75, st.max
                );
            }
            if s.clamped_irradiance_rows > 0 {
                let _ = writeln!(
                    out,
                    "negative irradiance clamped to 0 in {} rows",
                    s.clamped_irradiance_rows
                );
            }
            if !s.gaps.is_empty() {
                let _ = writeln!(out, "{} dates excluded:", s.gaps.len());
                for g in s.gaps {
                    let why = match g.reason {
                        prosumer_core::ingest::GapReason::Empty => "no samples".to_string(),
                        prosumer_core::ingest::GapReason::Incomplete { present, expected } => {
                            format!("{present} of {expected} intervals")
                        }
                    };
                    let _ = writeln!(out, "  {} ({why})", g.date);
                }
            }
            out
        }
    }
}

pub fn ingest(args: IngestArgs) -> Result<()> {
    let cfg = ModelConfig::load(&args.common.config)?;
    let base = cfg.columns.clone();
    let pick = |flag: &Option<String>, from_cfg: Option<&String>, name: &str| -> Result<String> {
        flag.clone().or_else(|| from_cfg.cloned()).ok_or_else(|| {
            Error::Config(format!(
                "no {name} column: pass --{name}-column or set {name}_column in the config"
            ))
        })
    };
    let mapping = ColumnMapping::new(
        pick(&args.timestamp_column, base.as_ref().map(|m| &m.timestamp), "timestamp")?,
        pick(&args.load_column, base.as_ref().map(|m| &m.load), "load")?,
        pick(
            &args.irradiance_column,
            base.as_ref().map(|m| &m.irradiance),
            "irradiance",
        )?,
    );
    let parsed = read_interval_csv(&args.data, &mapping)?;
    let ds = aggregate_daily(&parsed.samples, cfg.params.partition, args.data.display().to_string())?;
    write_file(&args.out, |w| ds.write_csv(w))?;
    print!(
        "{}",
        render_summary(&dataset_summary(&ds, parsed.clamped_irradiance)?, args.common.format)
    );
    Ok(())
}

#[derive(Serialize)]
struct IdentityReport {
    #[serde(flatten)]
    identity: CostIdentity,
    relative_gap: f64,
    /// Same expression with conditional instead of partial expectations.
    conditional_reading: f64,
}

#[derive(Serialize)]
struct SizeReport {
    source: String,
    days: usize,
    mode: DistMode,
    bandwidth: Option<f64>,
    storage: Option<StorageSizing>,
    storage_error: Option<String>,
    b_rounded: Option<f64>,
    identity: Option<IdentityReport>,
    solar: Option<SolarSizing>,
    solar_error: Option<String>,
}

pub fn size(args: SizeArgs) -> Result<()> {
    if args.common.format == Format::Csv {
        return Err(unsupported(args.common.format, "size"));
    }
    let (cfg, ds) = load(&args.common.config, &args.data)?;
    let p = &cfg.params;
    let mode: DistMode = args.mode.into();
    let dist = EmpiricalDistribution::with_mode(ds.h_peak(), mode)?;
    let mean_hl = ds.mean_h_offpeak();

    let (storage, storage_err) = split(optimal_storage(&dist, &p.tariff, &p.costs, args.b_max))?;
    let identity = match &storage {
        Some(s) => {
            let identity = optimal_cost_identity(&dist, mean_hl, &p.tariff, &p.costs, s.b_opt)?;
            let cond = |side: Side| {
                let mass = match side {
                    Side::Below => dist.cdf(s.b_opt),
                    Side::Above => 1.0 - dist.cdf(s.b_opt),
                };
                if mass > 0.0 {
                    dist.partial_expectation(s.b_opt, side) / mass
                } else {
                    0.0
                }
            };
            Some(IdentityReport {
                relative_gap: identity.relative_gap(),
                identity,
                conditional_reading: p.tariff.lambda_h() * cond(Side::Above)
                    + p.tariff.mu_h() * cond(Side::Below)
                    + p.tariff.lambda_l() * mean_hl,
            })
        }
        None => None,
    };
    let (sh, sl) = ds.mean_pv_energy_per_m2(&p.panel)?;
    let (solar, solar_err) = split(optimal_solar(sh, sl, &p.tariff, &p.costs, args.a_max))?;
    if storage.is_none() && solar.is_none() {
        // neither rule applies to this tariff
        return Err(optimal_storage(&dist, &p.tariff, &p.costs, args.b_max).unwrap_err());
    }

    let report = SizeReport {
        source: ds.source().to_string(),
        days: ds.len(),
        mode,
        bandwidth: dist.bandwidth(),
        b_rounded: storage.as_ref().map(|s| s.b_opt.round()),
        storage,
        storage_error: storage_err,
        identity,
        solar,
        solar_error: solar_err,
    };
    if let Some(path) = &args.out {
        let (lo, hi) = dist.plot_range();
        write_file(path, |w| dist.write_cdf_csv(w, lo, hi, args.cdf_points))?;
    }
    match args.common.format {
        Format::Json => print!("{}", to_json(&report)),
        _ => print!("{}", render_size(&report)),
    }
    Ok(())
}

/// Model-precondition failures become a message; anything else propagates.
fn split<T>(r: Result<T>) -> Result<(Option<T>, Option<String>)> {
    match r {
        Ok(v) => Ok((Some(v), None)),
        Err(e) if e.kind() == prosumer_core::ErrorKind::Model => Ok((None, Some(e.to_string()))),
        Err(e) => Err(e),
    }
}

fn render_size(r: &SizeReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "data        {} ({} days)", r.source, r.days);
    match r.bandwidth {
        Some(h) => {
            let _ = writeln!(out, "mode        kde, bandwidth {h:.4} kWh");
        }
        None => {
            let _ = writeln!(out, "mode        ecdf");
        }
    }
    match &r.storage {
        Some(s) => {
            let _ = writeln!(out, "fractile    {:.6}", s.fractile);
            let _ = writeln!(out, "regime      {}", s.regime);
            let _ = writeln!(out, "B0          {:.4} kWh (rounded {:.0})", s.b_opt, s.b_opt.round());
            if let Some(w) = &s.warning {
                let _ = writeln!(out, "warning     {w}");
            }
        }
        None => {
            let _ = writeln!(
                out,
                "storage     not sized: {}",
                r.storage_error.as_deref().unwrap_or("")
            );
        }
    }
    if let Some(id) = &r.identity {
        let _ = writeln!(out, "cost at B0  {:.6} $/day direct", id.identity.direct);
        let _ = writeln!(
            out,
            "            {:.6} $/day from partial expectations (relative gap {:.3e})",
            id.identity.partial_expectation_form, id.relative_gap
        );
        let _ = writeln!(
            out,
            "            {:.6} $/day from conditional expectations",
            id.conditional_reading
        );
    }
    match &r.solar {
        Some(s) => {
            let verdict = if s.a_opt > 0.0 { ">=" } else { "<" };
            let _ = writeln!(
                out,
                "solar       {:.6} {verdict} {:.6} $/m2/day, a0 = {} m2",
                s.condition_lhs, s.condition_rhs, s.a_opt
            );
        }
        None => {
            let _ = writeln!(out, "solar       not sized: {}", r.solar_error.as_deref().unwrap_or(""));
        }
    }
    out
}

#[derive(Serialize)]
struct SimulateJson<'a> {
    #[serde(flatten)]
    report: &'a CostReport,
    netting: Option<&'a NettingComparison>,
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let (cfg, ds) = load(&args.common.config, &args.data)?;
    let report = simulate_costs(&ds, args.b, args.a, &cfg.params)?;
    let netting = if args.netting_diagnostics {
        Some(netting_comparison(&ds, args.b, args.a, &cfg.params)?)
    } else {
        None
    };
    let render = |w: &mut dyn Write, format: Format| -> Result<()> {
        match format {
            Format::Text => {
                w.write_all(report.render_text().as_bytes())?;
                if let Some(n) = &netting {
                    w.write_all(render_netting(n).as_bytes())?;
                }
            }
            Format::Json => w.write_all(
                to_json(&SimulateJson {
                    report: &report,
                    netting: netting.as_ref(),
                })
                .as_bytes(),
            )?,
            Format::Csv => report.write_csv(w)?,
        }
        Ok(())
    };
    match &args.out {
        Some(path) => {
            write_file(path, |w| render(w, args.common.format))?;
            write_out(None, |w| render(w, Format::Text))
        }
        None => write_out(None, |w| render(w, args.common.format)),
    }
}

fn render_netting(n: &NettingComparison) -> String {
    let mut out = String::from("\nnetting diagnostics\n");
    let _ = writeln!(out, "  settled per day      {:>12.2}", n.per_day_total);
    let _ = writeln!(out, "  settled per month    {:>12.2}", n.per_month_total);
    for (y, m, total) in &n.months {
        let _ = writeln!(out, "    {y}-{m:02}          {total:>12.2}");
    }
    out
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    b_points: usize,
    a_points: usize,
    argmin_b: f64,
    argmin_a: f64,
    min_cost: f64,
    sequential: Option<&'a SequentialPoint>,
    sequential_rounded: Option<&'a SequentialPoint>,
    improvement_over_sequential: Option<f64>,
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    if args.common.format == Format::Csv {
        return Err(unsupported(args.common.format, "sweep"));
    }
    let (cfg, ds) = load(&args.common.config, &args.data)?;
    let b_grid = match args.grid_b {
        Some(g) => g.0,
        None => default_b_grid(&EmpiricalDistribution::ecdf(ds.h_peak())?)?,
    };
    let a_grid = match args.grid_a {
        Some(g) => g.0,
        None => default_a_grid(args.a_max)?,
    };
    let scan = joint_scan(&ds, &cfg.params, b_grid, a_grid, args.mode.into())?;
    if let Some(path) = &args.out {
        write_file(path, |w| scan.surface.write_csv(w))?;
    }
    let s = &scan.surface;
    let summary = SweepSummary {
        b_points: s.b_grid.len(),
        a_points: s.a_grid.len(),
        argmin_b: s.argmin.0,
        argmin_a: s.argmin.1,
        min_cost: s.min_cost,
        sequential: scan.sequential.as_ref(),
        sequential_rounded: scan.sequential_rounded.as_ref(),
        improvement_over_sequential: scan.sequential.as_ref().map(|q| q.cost - s.min_cost),
    };
    match args.common.format {
        Format::Json => print!("{}", to_json(&summary)),
        _ => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "grid        {} x {} over {} days",
                summary.b_points, summary.a_points, s.horizon_days
            );
            let _ = writeln!(
                out,
                "joint       B = {:.2} kWh, a = {:.2} m2, total {:.2}",
                s.argmin.0, s.argmin.1, s.min_cost
            );
            for (label, q) in [("sequential", &scan.sequential), ("rounded", &scan.sequential_rounded)] {
                if let Some(q) = q {
                    let _ = writeln!(
                        out,
                        "{label:<12}B = {:.2} kWh, a = {:.2} m2, total {:.2}",
                        q.b, q.a, q.cost
                    );
                }
            }
            match summary.improvement_over_sequential {
                Some(d) => {
                    let _ = writeln!(out, "joint saves {d:.2} over the sequential point");
                }
                None => {
                    let _ = writeln!(out, "no sequential point: the tariff has no storage fractile");
                }
            }
            print!("{out}");
        }
    }
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let cfg = ModelConfig::load(&args.common.config)?;
    let ds = synth_dataset(&SynthParams::household_year(args.days), cfg.params.partition, args.seed)?;
    write_out(args.out.as_deref(), |w| ds.write_csv(w))?;
    if args.out.is_some() {
        print!("{}", render_summary(&dataset_summary(&ds, 0)?, args.common.format));
    }
    Ok(())
}

pub fn dump_cdf(args: DumpCdfArgs) -> Result<()> {
    if args.common.format != Format::Csv && args.common.format != Format::Text {
        return Err(unsupported(args.common.format, "dump-cdf"));
    }
    let (_, ds) = load(&args.common.config, &args.data)?;
    let dist = EmpiricalDistribution::with_mode(ds.h_peak(), args.mode.into())?;
    let (lo, hi) = dist.plot_range();
    let (lo, hi) = (args.lo.unwrap_or(lo), args.hi.unwrap_or(hi));
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) || args.points < 2 {
        return Err(Error::InvalidArgument(format!(
            "need lo < hi and at least 2 points, got [{lo}, {hi}] with {}",
            args.points
        )));
    }
    write_out(args.out.as_deref(), |w| dist.write_cdf_csv(w, lo, hi, args.points))
}

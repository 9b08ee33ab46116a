//! Interval meter data: parsing, daily peak/off-peak aggregation, the daily
//! dataset file format, and a seeded synthetic generator.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, LogNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tariff::{pv_energy, PanelModel, PeriodPartition};

/// Days with fewer than this share of the expected interval count are dropped.
pub const MIN_DAY_COVERAGE: f64 = 0.95;

const DATASET_HEADER: [&str; 5] = ["date", "h_peak", "h_offpeak", "s_peak", "s_offpeak"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeterSample {
    pub timestamp: NaiveDateTime,
    /// kWh consumed over the interval.
    pub load: f64,
    /// W/m², already clamped to be nonnegative.
    pub irradiance: f64,
}

/// Header names of the three columns read from an interval file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMapping {
    pub timestamp: String,
    pub load: String,
    pub irradiance: String,
}

impl ColumnMapping {
    pub fn new(timestamp: impl Into<String>, load: impl Into<String>, irradiance: impl Into<String>) -> Self {
        Self {
            timestamp: timestamp.into(),
            load: load.into(),
            irradiance: irradiance.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSeries {
    pub samples: Vec<MeterSample>,
    /// Rows whose irradiance was negative and got clamped to 0.
    pub clamped_irradiance: usize,
}

pub fn read_interval_csv(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<ParsedSeries> {
    parse_interval_csv(File::open(path)?, mapping)
}

/// Parses an interval CSV with a header row. Timestamps must be strictly
/// increasing; loads must be finite and nonnegative.
pub fn parse_interval_csv<R: Read>(reader: R, mapping: &ColumnMapping) -> Result<ParsedSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (ts_col, load_col, irr_col) = (
        column(&mapping.timestamp)?,
        column(&mapping.load)?,
        column(&mapping.irradiance)?,
    );

    let mut samples: Vec<MeterSample> = Vec::new();
    let mut clamped = 0;
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| malformed_from_csv(&e))?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        let field = |idx: usize, name: &str| {
            record.get(idx).ok_or_else(|| Error::MalformedRow {
                line,
                reason: format!("missing field `{name}`"),
            })
        };
        let raw_ts = field(ts_col, &mapping.timestamp)?;
        let timestamp = parse_timestamp(raw_ts).ok_or_else(|| Error::MalformedRow {
            line,
            reason: format!("unparseable timestamp `{raw_ts}`"),
        })?;
        let load = parse_number(field(load_col, &mapping.load)?, line, "load")?;
        if load < 0.0 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("negative load {load}"),
            });
        }
        let mut irradiance = parse_number(field(irr_col, &mapping.irradiance)?, line, "irradiance")?;
        if irradiance < 0.0 {
            irradiance = 0.0;
            clamped += 1;
        }
        if let Some(prev) = samples.last() {
            if timestamp <= prev.timestamp {
                return Err(Error::NonMonotonicTimestamp {
                    line,
                    timestamp: raw_ts.to_string(),
                });
            }
        }
        samples.push(MeterSample {
            timestamp,
            load,
            irradiance,
        });
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(ParsedSeries {
        samples,
        clamped_irradiance: clamped,
    })
}

fn malformed_from_csv(e: &csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::MalformedRow {
            line: pos.line(),
            reason: e.to_string(),
        },
        None => Error::MalformedRow {
            line: 0,
            reason: e.to_string(),
        },
    }
}

fn parse_number(raw: &str, line: u64, what: &str) -> Result<f64> {
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::MalformedRow {
            line,
            reason: format!("{what} `{raw}` is not a finite number"),
        }),
    }
}

/// ISO-8601 local timestamps, `T` or space separated, with optional seconds,
/// fractional seconds and a trailing UTC offset (dropped, the wall-clock time
/// is kept as is).
pub fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    const NAIVE: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    const ZONED: [&str; 2] = ["%Y-%m-%dT%H:%M:%S%.f%#z", "%Y-%m-%d %H:%M:%S%.f%#z"];
    NAIVE
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
        .or_else(|| {
            ZONED
                .iter()
                .find_map(|f| DateTime::parse_from_str(raw, f).ok())
                .map(|dt| dt.naive_local())
        })
}

/// One day of aggregated consumption and irradiance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DailyRecord {
    pub date: NaiveDate,
    /// Total peak-period consumption, kWh.
    pub h_peak: f64,
    /// Total off-peak consumption, kWh.
    pub h_offpeak: f64,
    /// Mean peak-period irradiance, W/m².
    pub s_peak: f64,
    /// Mean off-peak irradiance, W/m².
    pub s_offpeak: f64,
}

impl DailyRecord {
    pub fn new(date: NaiveDate, h_peak: f64, h_offpeak: f64, s_peak: f64, s_offpeak: f64) -> Result<Self> {
        for (name, v) in [
            ("h_peak", h_peak),
            ("h_offpeak", h_offpeak),
            ("s_peak", s_peak),
            ("s_offpeak", s_offpeak),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{date}: {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(Self {
            date,
            h_peak,
            h_offpeak,
            s_peak,
            s_offpeak,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum GapReason {
    /// No samples at all for the date.
    Empty,
    /// Below [`MIN_DAY_COVERAGE`] of the expected interval count.
    Incomplete { present: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DayGap {
    pub date: NaiveDate,
    #[serde(flatten)]
    pub reason: GapReason,
}

/// Ordered daily records, one per date, with the dates that had to be left
/// out.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<DailyRecord>,
    partition: PeriodPartition,
    source: String,
    gaps: Vec<DayGap>,
}

impl Dataset {
    /// Dates must be strictly increasing. Missing dates between records are
    /// recorded as [`GapReason::Empty`].
    pub fn new(records: Vec<DailyRecord>, partition: PeriodPartition, source: impl Into<String>) -> Result<Self> {
        Self::with_gaps(records, partition, source.into(), Vec::new())
    }

    fn with_gaps(
        records: Vec<DailyRecord>,
        partition: PeriodPartition,
        source: String,
        mut gaps: Vec<DayGap>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput);
        }
        let known: HashSet<NaiveDate> = gaps.iter().map(|g| g.date).collect();
        for w in records.windows(2) {
            if w[1].date <= w[0].date {
                return Err(Error::InvalidArgument(format!(
                    "dataset dates must be strictly increasing: {} then {}",
                    w[0].date, w[1].date
                )));
            }
            let mut d = w[0].date.succ_opt();
            while let Some(day) = d.filter(|day| *day < w[1].date) {
                if !known.contains(&day) {
                    gaps.push(DayGap {
                        date: day,
                        reason: GapReason::Empty,
                    });
                }
                d = day.succ_opt();
            }
        }
        gaps.sort_by_key(|g| g.date);
        Ok(Self {
            records,
            partition,
            source,
            gaps,
        })
    }

    pub fn records(&self) -> &[DailyRecord] {
        &self.records
    }
    pub fn partition(&self) -> PeriodPartition {
        self.partition
    }
    pub fn source(&self) -> &str {
        &self.source
    }
    pub fn gaps(&self) -> &[DayGap] {
        &self.gaps
    }
    pub fn len(&self) -> usize {
        self.records.len()
    }
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn h_peak(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.h_peak).collect()
    }
    pub fn h_offpeak(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.h_offpeak).collect()
    }
    pub fn s_peak(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.s_peak).collect()
    }
    pub fn s_offpeak(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.s_offpeak).collect()
    }

    pub fn mean_h_offpeak(&self) -> f64 {
        self.records.iter().map(|r| r.h_offpeak).sum::<f64>() / self.len() as f64
    }

    /// Mean daily PV energy per m² of panel in the peak and off-peak blocks,
    /// kWh/m²/day.
    pub fn mean_pv_energy_per_m2(&self, panel: &PanelModel) -> Result<(f64, f64)> {
        let (mut peak, mut off) = (0.0, 0.0);
        for r in &self.records {
            peak += pv_energy(r.s_peak, self.partition.peak_hours(), 1.0, panel)?;
            off += pv_energy(r.s_offpeak, self.partition.offpeak_hours(), 1.0, panel)?;
        }
        let n = self.len() as f64;
        Ok((peak / n, off / n))
    }

    /// Writes `date,h_peak,h_offpeak,s_peak,s_offpeak` rows. Values use the
    /// shortest representation that reads back to the same `f64`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(DATASET_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.date.to_string(),
                r.h_peak.to_string(),
                r.h_offpeak.to_string(),
                r.s_peak.to_string(),
                r.s_offpeak.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(File::create(path)?)
    }
}

pub fn read_dataset_file(path: impl AsRef<Path>, partition: PeriodPartition) -> Result<Dataset> {
    let path = path.as_ref();
    read_dataset_csv(File::open(path)?, partition, path.display().to_string())
}

/// Reads the daily dataset format written by [`Dataset::write_csv`].
pub fn read_dataset_csv<R: Read>(reader: R, partition: PeriodPartition, source: impl Into<String>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(DATASET_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }
    let mut records: Vec<DailyRecord> = Vec::new();
    let mut row = csv::StringRecord::new();
    while rdr.read_record(&mut row).map_err(|e| malformed_from_csv(&e))? {
        let line = row.position().map_or(0, |p| p.line());
        let get = |i: usize| {
            row.get(idx[i]).ok_or_else(|| Error::MalformedRow {
                line,
                reason: format!("missing field `{}`", DATASET_HEADER[i]),
            })
        };
        let raw_date = get(0)?;
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| Error::MalformedRow {
            line,
            reason: format!("unparseable date `{raw_date}`"),
        })?;
        let mut vals = [0.0; 4];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = parse_number(get(k + 1)?, line, DATASET_HEADER[k + 1])?;
        }
        let rec = DailyRecord::new(date, vals[0], vals[1], vals[2], vals[3]).map_err(|e| Error::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        if let Some(prev) = records.last() {
            if rec.date <= prev.date {
                return Err(Error::NonMonotonicTimestamp {
                    line,
                    timestamp: raw_date.to_string(),
                });
            }
        }
        records.push(rec);
    }
    Dataset::new(records, partition, source)
}

/// Sums load and averages irradiance per calendar day and period.
///
/// Off-peak for a date is `[00:00, peak_start) U [peak_end, 24:00)` of that
/// same date. The sampling interval is taken as the median spacing of the
/// series; days below [`MIN_DAY_COVERAGE`] of the implied count are dropped
/// and listed in [`Dataset::gaps`], as are dates with no samples.
pub fn aggregate_daily(
    samples: &[MeterSample],
    partition: PeriodPartition,
    source: impl Into<String>,
) -> Result<Dataset> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if samples.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
        return Err(Error::InvalidArgument(
            "samples must be in strictly increasing time order".into(),
        ));
    }
    let expected = expected_samples_per_day(samples);

    let mut by_day: BTreeMap<NaiveDate, Vec<&MeterSample>> = BTreeMap::new();
    for s in samples {
        by_day.entry(s.timestamp.date()).or_default().push(s);
    }

    let mut records = Vec::with_capacity(by_day.len());
    let mut gaps = Vec::new();
    for (date, day) in &by_day {
        if let Some(expected) = expected {
            if (day.len() as f64) < MIN_DAY_COVERAGE * expected as f64 {
                gaps.push(DayGap {
                    date: *date,
                    reason: GapReason::Incomplete {
                        present: day.len(),
                        expected,
                    },
                });
                continue;
            }
        }
        records.push(aggregate_day(*date, day, partition)?);
    }
    if records.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no day reached {:.0}% sample coverage",
            MIN_DAY_COVERAGE * 100.0
        )));
    }
    Dataset::with_gaps(records, partition, source.into(), gaps)
}

fn aggregate_day(date: NaiveDate, day: &[&MeterSample], partition: PeriodPartition) -> Result<DailyRecord> {
    let (mut h_peak, mut h_off) = (0.0, 0.0);
    let (mut s_peak, mut s_off) = (0.0, 0.0);
    let (mut n_peak, mut n_off) = (0usize, 0usize);
    for s in day {
        if partition.is_peak(s.timestamp.time()) {
            h_peak += s.load;
            s_peak += s.irradiance;
            n_peak += 1;
        } else {
            h_off += s.load;
            s_off += s.irradiance;
            n_off += 1;
        }
    }
    let mean = |sum: f64, n: usize| if n == 0 { 0.0 } else { sum / n as f64 };
    DailyRecord::new(date, h_peak, h_off, mean(s_peak, n_peak), mean(s_off, n_off))
}

fn expected_samples_per_day(samples: &[MeterSample]) -> Option<usize> {
    let mut steps: Vec<i64> = samples
        .windows(2)
        .map(|w| (w[1].timestamp - w[0].timestamp).num_seconds())
        .filter(|&s| s > 0)
        .collect();
    if steps.is_empty() {
        return None;
    }
    steps.sort_unstable();
    let step = steps[steps.len() / 2];
    Some(((86_400.0 / step as f64).round() as usize).max(1))
}

/// Lognormal law given by its mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadLaw {
    pub mean: f64,
    pub sd: f64,
}

impl LoadLaw {
    fn distribution(&self, name: &str) -> Result<LogNormal<f64>> {
        if !(self.mean.is_finite() && self.mean > 0.0 && self.sd.is_finite() && self.sd > 0.0) {
            return Err(Error::InvalidLawParameters(format!(
                "{name}: lognormal needs mean > 0 and sd > 0, got mean {} sd {}",
                self.mean, self.sd
            )));
        }
        let (mu, sigma) = lognormal_params(self.mean, self.sd);
        LogNormal::new(mu, sigma).map_err(|e| Error::InvalidLawParameters(format!("{name}: {e}")))
    }
}

/// `(mu, sigma)` of the underlying normal for a lognormal with the given
/// mean and standard deviation.
fn lognormal_params(mean: f64, sd: f64) -> (f64, f64) {
    let sigma2 = (1.0 + (sd / mean).powi(2)).ln();
    (mean.ln() - 0.5 * sigma2, sigma2.sqrt())
}

/// Daily mean irradiance: a yearly cosine around `mean` (peaking at the June
/// solstice) times a unit-mean lognormal weather factor. The factor's spread
/// is chosen so the overall standard deviation is `sd`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrradianceLaw {
    pub mean: f64,
    pub sd: f64,
    /// Relative amplitude of the seasonal cosine, in `[0, 1)`.
    pub seasonal_amplitude: f64,
}

impl IrradianceLaw {
    fn weather_factor(&self, name: &str) -> Result<LogNormal<f64>> {
        let amp = self.seasonal_amplitude;
        if !(self.mean.is_finite()
            && self.mean > 0.0
            && self.sd.is_finite()
            && self.sd >= 0.0
            && (0.0..1.0).contains(&amp))
        {
            return Err(Error::InvalidLawParameters(format!(
                "{name}: need mean > 0, sd >= 0, 0 <= amplitude < 1, got {self:?}"
            )));
        }
        // Var(S) / mean^2 = (1 + amp^2 / 2)(1 + cv^2) - 1
        let cv2 = (1.0 + (self.sd / self.mean).powi(2)) / (1.0 + 0.5 * amp * amp) - 1.0;
        if cv2 <= 0.0 {
            return Err(Error::InvalidLawParameters(format!(
                "{name}: sd {} is too small for seasonal amplitude {amp}",
                self.sd
            )));
        }
        let (mu, sigma) = lognormal_params(1.0, cv2.sqrt());
        LogNormal::new(mu, sigma).map_err(|e| Error::InvalidLawParameters(format!("{name}: {e}")))
    }

    fn seasonal_mean(&self, date: NaiveDate) -> f64 {
        let phase = 2.0 * PI * (f64::from(date.ordinal()) - 172.0) / 365.25;
        self.mean * (1.0 + self.seasonal_amplitude * phase.cos())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub n_days: usize,
    pub start: NaiveDate,
    pub h_peak: LoadLaw,
    pub h_offpeak: LoadLaw,
    pub s_peak: IrradianceLaw,
    pub s_offpeak: IrradianceLaw,
}

impl SynthParams {
    /// Moments of a year of single-household data on an 08:00-22:00 peak
    /// block: peak load 19.61 +- 8.40 kWh, off-peak 12.56 +- 6.32 kWh, peak
    /// irradiance 324.74 +- 122.21 W/m², off-peak 2.32 +- 2.02 W/m².
    pub fn household_year(n_days: usize) -> Self {
        Self {
            n_days,
            start: NaiveDate::from_ymd_opt(2016, 1, 1).expect("valid date"),
            h_peak: LoadLaw { mean: 19.61, sd: 8.40 },
            h_offpeak: LoadLaw { mean: 12.56, sd: 6.32 },
            s_peak: IrradianceLaw {
                mean: 324.74,
                sd: 122.21,
                seasonal_amplitude: 0.25,
            },
            s_offpeak: IrradianceLaw {
                mean: 2.32,
                sd: 2.02,
                seasonal_amplitude: 0.3,
            },
        }
    }
}

/// Draws `n_days` consecutive independent days. Deterministic for a seed.
pub fn synth_dataset(params: &SynthParams, partition: PeriodPartition, seed: u64) -> Result<Dataset> {
    if params.n_days == 0 {
        return Err(Error::InvalidLawParameters("n_days must be >= 1".into()));
    }
    let hh = params.h_peak.distribution("h_peak")?;
    let hl = params.h_offpeak.distribution("h_offpeak")?;
    let sh = params.s_peak.weather_factor("s_peak")?;
    let sl = params.s_offpeak.weather_factor("s_offpeak")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(params.n_days);
    let mut date = params.start;
    for i in 0..params.n_days {
        let rec = DailyRecord::new(
            date,
            hh.sample(&mut rng),
            hl.sample(&mut rng),
            params.s_peak.seasonal_mean(date) * sh.sample(&mut rng),
            params.s_offpeak.seasonal_mean(date) * sl.sample(&mut rng),
        )?;
        records.push(rec);
        if i + 1 < params.n_days {
            date = date
                .succ_opt()
                .ok_or_else(|| Error::InvalidLawParameters("date range overflows the calendar".into()))?;
        }
    }
    Dataset::new(
        records,
        partition,
        format!("synthetic(seed={seed}, days={})", params.n_days),
    )
}

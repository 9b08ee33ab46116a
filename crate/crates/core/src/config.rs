//! Model configuration file.
//!
//! A flat TOML document of documented keys. Every price and cost must be
//! given explicitly; there are no built-in defaults.
//!
//! ```toml
//! lambda_h = 0.54
//! mu_h = 0.30
//! lambda_l = 0.22
//! mu_l = 0.13
//! lambda_b = 0.0884
//! lambda_a = 0.0558
//! peak_start = 8
//! peak_end = 22
//! panel_rated_w = 183
//! panel_ref_irradiance = 1000
//! panel_efficiency = 0.93
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ingest::ColumnMapping;
use crate::tariff::{AmortizedCosts, ModelParams, PanelModel, PeriodPartition, TariffSchedule};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    lambda_h: f64,
    mu_h: f64,
    lambda_l: f64,
    mu_l: f64,
    lambda_b: f64,
    lambda_a: f64,
    peak_start: u32,
    peak_end: u32,
    panel_rated_w: f64,
    panel_ref_irradiance: f64,
    panel_efficiency: f64,
    timestamp_column: Option<String>,
    load_column: Option<String>,
    irradiance_column: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub params: ModelParams,
    /// Interval CSV column names, when the config names all three.
    pub columns: Option<ColumnMapping>,
}

impl ModelConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let params = ModelParams {
            tariff: TariffSchedule::new(raw.lambda_h, raw.mu_h, raw.lambda_l, raw.mu_l)?,
            costs: AmortizedCosts::new(raw.lambda_b, raw.lambda_a)?,
            partition: PeriodPartition::new(raw.peak_start, raw.peak_end)?,
            panel: PanelModel::new(raw.panel_rated_w, raw.panel_ref_irradiance, raw.panel_efficiency)?,
        };
        let columns = match (raw.timestamp_column, raw.load_column, raw.irradiance_column) {
            (Some(t), Some(l), Some(i)) => Some(ColumnMapping::new(t, l, i)),
            (None, None, None) => None,
            _ => {
                return Err(Error::Config(
                    "timestamp_column, load_column and irradiance_column must be given together".into(),
                ))
            }
        };
        Ok(Self { params, columns })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "
lambda_h = 0.54
mu_h = 0.30
lambda_l = 0.22
mu_l = 0.13
lambda_b = 0.0884
lambda_a = 0.0558
peak_start = 8
peak_end = 22
panel_rated_w = 183
panel_ref_irradiance = 1000
panel_efficiency = 0.93
";

    #[test]
    fn parses_example() {
        let c = ModelConfig::parse(EXAMPLE).unwrap();
        assert_eq!(c.params.tariff.lambda_h(), 0.54);
        assert_eq!(c.params.costs.lambda_b(), 0.0884);
        assert_eq!(c.params.partition.peak_hours(), 14.0);
        assert_eq!(c.params.panel.rated_output(), 183.0);
        assert!(c.columns.is_none());
    }

    #[test]
    fn missing_price_is_rejected() {
        let text = EXAMPLE.replace("mu_l = 0.13\n", "");
        let err = ModelConfig::parse(&text).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("mu_l")), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = ModelConfig::parse(&format!("{EXAMPLE}lambda_x = 1.0\n")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn invariants_come_from_owning_types() {
        let text = EXAMPLE.replace("mu_h = 0.30", "mu_h = 0.60");
        assert!(matches!(ModelConfig::parse(&text), Err(Error::InvalidTariff(_))));
        let text = EXAMPLE.replace("peak_end = 22", "peak_end = 25");
        assert!(matches!(ModelConfig::parse(&text), Err(Error::InvalidPartition(_))));
    }

    #[test]
    fn columns_all_or_nothing() {
        let full = format!("{EXAMPLE}timestamp_column = \"ts\"\nload_column = \"kw\"\nirradiance_column = \"ghi\"\n");
        let c = ModelConfig::parse(&full).unwrap();
        assert_eq!(c.columns.unwrap(), ColumnMapping::new("ts", "kw", "ghi"));
        let partial = format!("{EXAMPLE}load_column = \"kw\"\n");
        assert!(ModelConfig::parse(&partial).is_err());
    }
}

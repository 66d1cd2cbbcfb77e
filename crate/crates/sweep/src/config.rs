//! Sweep configuration: flat `key = value` text, one setting per line.
//!
//! ```text
//! # defaults
//! delta_db_min = 5
//! delta_db_max = 14
//! delta_db_points = 19
//! lambda_policy = optimized        # optimized | zero | fixed:<value>
//! fixed_lambdas = 0.02, 0.05, 0.1, 0.15
//! rounds = 1, 3, 5
//! purity_targets = 1.0, 0.9, 0.7, 0.5   # or: sigmas = 0, 0.05, 0.1
//! purity_reference_db = 10
//! kappa_policy = inverse_delta     # inverse_delta | scaled:<c> | fixed:<value>
//! cutoff = auto                    # auto | <N>
//! cutoff_start = 150
//! cutoff_max = 1200
//! allow_wide_range = false
//! format = csv                     # csv | json
//! output = fig1a.csv               # omitted or "-" for stdout
//! ```

use std::collections::HashSet;
use std::path::PathBuf;
use std::str::FromStr;

use gkp_core::readout::MAX_ROUNDS;
use serde::Serialize;
use thiserror::Error;

/// Default guard on the squeezing range in dB.
pub const DB_GUARD: (f64, f64) = (4.0, 16.0);

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{}{}{message}", line.map_or(String::new(), |l| format!("line {l}: ")), field.as_ref().map_or(String::new(), |f| format!("`{f}`: ")))]
pub struct ConfigError {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn field(field: &str, message: impl Into<String>) -> Self {
        Self {
            line: None,
            field: Some(field.to_string()),
            message: message.into(),
        }
    }

    fn at_line(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum LambdaPolicy {
    Optimized,
    Zero,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum KappaPolicy {
    /// `κ = 1/Δ`.
    InverseDelta,
    /// `κ = c/Δ`.
    Scaled(f64),
    Fixed(f64),
}

impl KappaPolicy {
    pub fn kappa(self, delta: f64) -> f64 {
        match self {
            KappaPolicy::InverseDelta => 1.0 / delta,
            KappaPolicy::Scaled(c) => c / delta,
            KappaPolicy::Fixed(k) => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum CutoffPolicy {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "values")]
pub enum SigmaSpec {
    Values(Vec<f64>),
    /// Purities to hit at [`SweepConfig::purity_reference_db`] of `Δ_eff`.
    PurityTargets(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(ConfigError::field("format", format!("expected csv or json, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    /// `(min, max, points)` in dB.
    pub delta_db_range: (f64, f64, usize),
    pub lambda_policy: LambdaPolicy,
    pub fixed_lambdas: Vec<f64>,
    pub rounds_list: Vec<usize>,
    pub sigmas: SigmaSpec,
    pub purity_reference_db: f64,
    pub kappa_policy: KappaPolicy,
    pub cutoff_policy: CutoffPolicy,
    pub cutoff_start: usize,
    pub cutoff_max: usize,
    pub allow_wide_range: bool,
    pub output_path: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            delta_db_range: (5.0, 14.0, 19),
            lambda_policy: LambdaPolicy::Optimized,
            fixed_lambdas: vec![0.02, 0.05, 0.1, 0.15],
            rounds_list: vec![1, 3, 5],
            sigmas: SigmaSpec::PurityTargets(vec![1.0, 0.9, 0.7, 0.5]),
            purity_reference_db: 10.0,
            kappa_policy: KappaPolicy::InverseDelta,
            cutoff_policy: CutoffPolicy::Auto,
            cutoff_start: 150,
            cutoff_max: 1200,
            allow_wide_range: false,
            output_path: None,
            format: OutputFormat::Csv,
        }
    }
}

fn number<T: FromStr>(field: &str, text: &str) -> Result<T, ConfigError> {
    text.trim()
        .parse()
        .map_err(|_| ConfigError::field(field, format!("cannot parse `{}`", text.trim())))
}

fn list<T: FromStr>(field: &str, text: &str) -> Result<Vec<T>, ConfigError> {
    let items: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(ConfigError::field(field, "empty list"));
    }
    items.into_iter().map(|s| number(field, s)).collect()
}

fn boolean(field: &str, text: &str) -> Result<bool, ConfigError> {
    match text {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::field(field, format!("expected true or false, got `{text}`"))),
    }
}

impl SweepConfig {
    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "delta_db_min" => self.delta_db_range.0 = number(key, v)?,
            "delta_db_max" => self.delta_db_range.1 = number(key, v)?,
            "delta_db_points" => self.delta_db_range.2 = number(key, v)?,
            "lambda_policy" => {
                self.lambda_policy = match v {
                    "optimized" => LambdaPolicy::Optimized,
                    "zero" => LambdaPolicy::Zero,
                    _ => match v.split_once(':') {
                        Some(("fixed", x)) => LambdaPolicy::Fixed(number(key, x)?),
                        _ => return Err(ConfigError::field(key, format!("expected optimized, zero or fixed:<value>, got `{v}`"))),
                    },
                }
            }
            "fixed_lambdas" => self.fixed_lambdas = list(key, v)?,
            "rounds" => self.rounds_list = list(key, v)?,
            "sigmas" => self.sigmas = SigmaSpec::Values(list(key, v)?),
            "purity_targets" => self.sigmas = SigmaSpec::PurityTargets(list(key, v)?),
            "purity_reference_db" => self.purity_reference_db = number(key, v)?,
            "kappa_policy" => {
                self.kappa_policy = match v.split_once(':') {
                    None if v == "inverse_delta" => KappaPolicy::InverseDelta,
                    Some(("scaled", c)) => KappaPolicy::Scaled(number(key, c)?),
                    Some(("fixed", k)) => KappaPolicy::Fixed(number(key, k)?),
                    _ => return Err(ConfigError::field(key, format!("expected inverse_delta, scaled:<c> or fixed:<value>, got `{v}`"))),
                }
            }
            "cutoff" => {
                self.cutoff_policy = if v == "auto" {
                    CutoffPolicy::Auto
                } else {
                    CutoffPolicy::Fixed(number(key, v)?)
                }
            }
            "cutoff_start" => self.cutoff_start = number(key, v)?,
            "cutoff_max" => self.cutoff_max = number(key, v)?,
            "allow_wide_range" => self.allow_wide_range = boolean(key, v)?,
            "format" => self.format = v.parse()?,
            "output" => self.output_path = if v.is_empty() || v == "-" { None } else { Some(PathBuf::from(v)) },
            _ => return Err(ConfigError::field(key, "unknown setting")),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen = HashSet::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(ConfigError {
                    line: Some(line),
                    field: None,
                    message: format!("expected `key = value`, got `{body}`"),
                });
            };
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::field(key, "set more than once").at_line(line));
            }
            self.set(key, value).map_err(|e| e.at_line(line))?;
        }
        Ok(())
    }

    /// Defaults overridden by `text`, then validated.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let (lo, hi, points) = self.delta_db_range;
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(ConfigError::field("delta_db_min", format!("need delta_db_min < delta_db_max, got {lo} and {hi}")));
        }
        if points < 2 {
            return Err(ConfigError::field("delta_db_points", format!("need at least 2 points, got {points}")));
        }
        if lo <= 0.0 {
            return Err(ConfigError::field("delta_db_min", "squeezing must be positive (delta < 1)"));
        }
        if !self.allow_wide_range && (lo < DB_GUARD.0 || hi > DB_GUARD.1) {
            return Err(ConfigError::field(
                "delta_db_min",
                format!(
                    "range [{lo}, {hi}] dB leaves [{}, {}] dB; set allow_wide_range = true to proceed",
                    DB_GUARD.0, DB_GUARD.1
                ),
            ));
        }
        let lambda_ok = |l: f64| l.is_finite() && l.abs() < 1.0;
        if let LambdaPolicy::Fixed(l) = self.lambda_policy {
            if !lambda_ok(l) {
                return Err(ConfigError::field("lambda_policy", format!("need |lambda| < 1, got {l}")));
            }
        }
        if let Some(l) = self.fixed_lambdas.iter().find(|&&l| !lambda_ok(l)) {
            return Err(ConfigError::field("fixed_lambdas", format!("need |lambda| < 1, got {l}")));
        }
        if let Some(r) = self.rounds_list.iter().find(|&&r| r % 2 == 0 || r > MAX_ROUNDS) {
            return Err(ConfigError::field("rounds", format!("rounds must be odd and at most {MAX_ROUNDS}, got {r}")));
        }
        match &self.sigmas {
            SigmaSpec::Values(s) => {
                if let Some(x) = s.iter().find(|&&x| !(x.is_finite() && x >= 0.0)) {
                    return Err(ConfigError::field("sigmas", format!("need sigma >= 0, got {x}")));
                }
            }
            SigmaSpec::PurityTargets(p) => {
                if let Some(x) = p.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
                    return Err(ConfigError::field("purity_targets", format!("need 0 < purity <= 1, got {x}")));
                }
            }
        }
        if self.purity_reference_db <= 0.0 {
            return Err(ConfigError::field("purity_reference_db", "must be positive"));
        }
        match self.kappa_policy {
            KappaPolicy::Scaled(c) if !(c.is_finite() && c > 0.0) => {
                return Err(ConfigError::field("kappa_policy", format!("scale must be positive, got {c}")))
            }
            KappaPolicy::Fixed(k) if !(k.is_finite() && k >= 1.0) => {
                return Err(ConfigError::field("kappa_policy", format!("need kappa >= 1, got {k}")))
            }
            _ => {}
        }
        if let CutoffPolicy::Fixed(n) = self.cutoff_policy {
            if n < 10 {
                return Err(ConfigError::field("cutoff", format!("cutoff {n} is too small")));
            }
        }
        if self.cutoff_start < 10 || self.cutoff_start > self.cutoff_max {
            return Err(ConfigError::field("cutoff_start", "need 10 <= cutoff_start <= cutoff_max"));
        }
        Ok(())
    }

    /// Evenly spaced squeezing values in dB, endpoints included.
    pub fn delta_db_grid(&self) -> Vec<f64> {
        let (lo, hi, points) = self.delta_db_range;
        (0..points)
            .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = SweepConfig::default();
        cfg.validate().unwrap();
        let grid = cfg.delta_db_grid();
        assert_eq!(grid.len(), 19);
        assert_eq!((grid[0], grid[18]), (5.0, 14.0));
        assert!((grid[10] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn parses_every_key() {
        let text = "
            # comment
            delta_db_min = 8   # trailing comment
            delta_db_max = 12
            delta_db_points = 3
            lambda_policy = fixed:0.05
            fixed_lambdas = 0, 0.1
            rounds = 1, 3
            sigmas = 0, 0.1
            purity_reference_db = 11
            kappa_policy = scaled:2
            cutoff = 300
            cutoff_start = 100
            cutoff_max = 400
            allow_wide_range = false
            format = json
            output = out.json
        ";
        let cfg = SweepConfig::parse(text).unwrap();
        assert_eq!(cfg.delta_db_range, (8.0, 12.0, 3));
        assert_eq!(cfg.lambda_policy, LambdaPolicy::Fixed(0.05));
        assert_eq!(cfg.fixed_lambdas, vec![0.0, 0.1]);
        assert_eq!(cfg.rounds_list, vec![1, 3]);
        assert_eq!(cfg.sigmas, SigmaSpec::Values(vec![0.0, 0.1]));
        assert_eq!(cfg.kappa_policy, KappaPolicy::Scaled(2.0));
        assert_eq!(cfg.kappa_policy.kappa(0.25), 8.0);
        assert_eq!(cfg.cutoff_policy, CutoffPolicy::Fixed(300));
        assert_eq!(cfg.format, OutputFormat::Json);
        assert_eq!(cfg.output_path, Some(PathBuf::from("out.json")));
    }

    #[test]
    fn errors_report_line_and_field() {
        let err = SweepConfig::parse("delta_db_min = 6\n\nrounds = 1, two\n").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert_eq!(err.field.as_deref(), Some("rounds"));
        assert_eq!(err.to_string(), "line 3: `rounds`: cannot parse `two`");

        let err = SweepConfig::parse("colour = red").unwrap_err();
        assert_eq!((err.line, err.field.as_deref()), (Some(1), Some("colour")));

        let err = SweepConfig::parse("just text").unwrap_err();
        assert_eq!((err.line, err.field), (Some(1), None));

        let err = SweepConfig::parse("format = csv\nformat = json").unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn validation_rules() {
        for (text, field) in [
            ("delta_db_points = 1", "delta_db_points"),
            ("delta_db_min = 12\ndelta_db_max = 8", "delta_db_min"),
            ("delta_db_max = 20", "delta_db_min"),
            ("rounds = 2", "rounds"),
            ("rounds = 11", "rounds"),
            ("fixed_lambdas = 0.1, 1.5", "fixed_lambdas"),
            ("purity_targets = 0.5, 1.2", "purity_targets"),
            ("sigmas = -0.1", "sigmas"),
            ("kappa_policy = fixed:0.5", "kappa_policy"),
            ("cutoff = 4", "cutoff"),
        ] {
            let err = SweepConfig::parse(text).unwrap_err();
            assert_eq!(err.field.as_deref(), Some(field), "{text}");
            assert_eq!(err.line, None);
        }
        SweepConfig::parse("delta_db_max = 20\nallow_wide_range = true").unwrap();
    }

    #[test]
    fn error_serialises_without_missing_parts() {
        let err = ConfigError::field("rounds", "bad");
        assert_eq!(serde_json::to_string(&err).unwrap(), r#"{"field":"rounds","message":"bad"}"#);
    }
}

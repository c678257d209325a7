//! Run configuration: strict TOML parsing, defaults and command-line
//! overrides.
//!
//! Every key is optional; an empty file yields the default sweep. Unknown
//! keys, type mismatches and out-of-range values are rejected with the key
//! name and the line it appears on.

use std::collections::HashMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::experiments::{CorrelationConfig, Method, MonteCarloConfig};
use crate::{Error, Result};

/// SNR used by the correlation study when none is given.
pub const DEFAULT_CORRELATION_SNR_DB: f64 = -5.0;
pub const DEFAULT_N_DRAWS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    NmseSweep,
    Correlation,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    #[serde(flatten)]
    pub monte_carlo: MonteCarloConfig,
    pub n_draws: usize,
    /// `None` writes to standard output.
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::default(),
            monte_carlo: MonteCarloConfig::default(),
            n_draws: DEFAULT_N_DRAWS,
            output_path: None,
            output_format: OutputFormat::default(),
        }
    }
}

/// Command-line values that replace file values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    /// Experiment selected by the caller; a file naming another one is
    /// rejected.
    pub experiment: Option<ExperimentKind>,
    pub snr_db_list: Option<Vec<f64>>,
    pub n_trials: Option<usize>,
    pub n_draws: Option<usize>,
    pub base_seed: Option<u64>,
    pub output_path: Option<PathBuf>,
    pub output_format: Option<OutputFormat>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<Spanned<ExperimentKind>>,
    n_transmit: Option<Spanned<i64>>,
    n_receive: Option<Spanned<i64>>,
    spacing_ratio: Option<Spanned<f64>>,
    snr_db_list: Option<Spanned<Vec<f64>>>,
    angular_halfwidth_deg: Option<Spanned<f64>>,
    n_trials: Option<Spanned<i64>>,
    base_seed: Option<Spanned<i64>>,
    methods: Option<Spanned<Vec<String>>>,
    repetitions: Option<Spanned<i64>>,
    gain_magnitude: Option<Spanned<f64>>,
    noiseless: Option<Spanned<bool>>,
    grid_points: Option<Spanned<i64>>,
    n_draws: Option<Spanned<i64>>,
    output_path: Option<Spanned<PathBuf>>,
    output_format: Option<Spanned<OutputFormat>>,
}

/// Maps key names to the source line they were read from.
struct Lines<'a> {
    text: &'a str,
    spans: HashMap<&'static str, Range<usize>>,
}

impl<'a> Lines<'a> {
    fn line_of(&self, span: &Range<usize>) -> usize {
        self.text[..span.start.min(self.text.len())]
            .matches('\n')
            .count()
            + 1
    }

    fn error(&self, key: &str, msg: impl std::fmt::Display) -> Error {
        match self.spans.get(key) {
            Some(span) => Error::Config(format!("{key} (line {}): {msg}", self.line_of(span))),
            None => Error::Config(format!("{key}: {msg}")),
        }
    }

    fn take<T>(&mut self, key: &'static str, value: Option<Spanned<T>>) -> Option<T> {
        value.map(|v| {
            self.spans.insert(key, v.span());
            v.into_inner()
        })
    }

    fn count(&mut self, key: &'static str, value: Option<Spanned<i64>>) -> Result<Option<usize>> {
        match self.take(key, value) {
            None => Ok(None),
            Some(v) => usize::try_from(v)
                .map(Some)
                .map_err(|_| self.error(key, format!("must be a non-negative integer, got {v}"))),
        }
    }
}

/// Parses TOML text into a resolved configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &Overrides::default())
}

/// Parses TOML text, applies `overrides`, and validates the result.
pub fn parse_config_with(text: &str, overrides: &Overrides) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut lines = Lines {
        text,
        spans: HashMap::new(),
    };
    let mut config = RunConfig::default();
    let mc = &mut config.monte_carlo;

    if let Some(v) = lines.take("experiment", raw.experiment) {
        config.experiment = v;
    }
    if let Some(wanted) = overrides.experiment {
        if lines.spans.contains_key("experiment") && config.experiment != wanted {
            return Err(lines.error(
                "experiment",
                format!(
                    "file selects {:?} but {:?} was requested",
                    config.experiment, wanted
                ),
            ));
        }
        config.experiment = wanted;
    }
    if let Some(v) = lines.count("n_transmit", raw.n_transmit)? {
        mc.n_transmit = v;
    }
    if let Some(v) = lines.count("n_receive", raw.n_receive)? {
        mc.n_receive = v;
    }
    if let Some(v) = lines.take("spacing_ratio", raw.spacing_ratio) {
        mc.spacing_ratio = v;
    }
    let snr_given = raw.snr_db_list.is_some();
    if let Some(v) = lines.take("snr_db_list", raw.snr_db_list) {
        mc.snr_db_list = v;
    }
    if let Some(v) = lines.take("angular_halfwidth_deg", raw.angular_halfwidth_deg) {
        mc.angular_halfwidth_deg = v;
    }
    if let Some(v) = lines.count("n_trials", raw.n_trials)? {
        mc.n_trials = v;
    }
    if let Some(v) = lines.take("base_seed", raw.base_seed) {
        mc.base_seed = u64::try_from(v)
            .map_err(|_| lines.error("base_seed", format!("must be non-negative, got {v}")))?;
    }
    if let Some(names) = lines.take("methods", raw.methods) {
        let mut methods = Vec::with_capacity(names.len());
        for name in &names {
            let m: Method = name.parse().map_err(|e: Error| lines.error("methods", e))?;
            if methods.contains(&m) {
                return Err(lines.error("methods", format!("duplicate method {m}")));
            }
            methods.push(m);
        }
        mc.methods = methods;
    }
    if let Some(v) = lines.count("repetitions", raw.repetitions)? {
        mc.repetitions = v;
    }
    if let Some(v) = lines.take("gain_magnitude", raw.gain_magnitude) {
        mc.gain_magnitude = v;
    }
    if let Some(v) = lines.take("noiseless", raw.noiseless) {
        mc.noiseless = v;
    }
    if let Some(v) = lines.count("grid_points", raw.grid_points)? {
        mc.grid_points = v;
    }
    if let Some(v) = lines.count("n_draws", raw.n_draws)? {
        config.n_draws = v;
    }
    config.output_path = lines.take("output_path", raw.output_path);
    if let Some(v) = lines.take("output_format", raw.output_format) {
        config.output_format = v;
    }

    if config.experiment == ExperimentKind::Correlation && !snr_given {
        config.monte_carlo.snr_db_list = vec![DEFAULT_CORRELATION_SNR_DB];
    }
    apply_overrides(&mut config, overrides);

    if let Some((key, msg)) = config.monte_carlo.violation() {
        return Err(lines.error(key, msg));
    }
    if config.experiment == ExperimentKind::Correlation {
        if config.monte_carlo.snr_db_list.len() != 1 {
            return Err(lines.error(
                "snr_db_list",
                format!(
                    "the correlation experiment takes exactly one SNR, got {}",
                    config.monte_carlo.snr_db_list.len()
                ),
            ));
        }
        if config.n_draws < 100 {
            return Err(lines.error("n_draws", format!("must be >= 100, got {}", config.n_draws)));
        }
    }
    Ok(config)
}

fn apply_overrides(config: &mut RunConfig, o: &Overrides) {
    if let Some(v) = &o.snr_db_list {
        config.monte_carlo.snr_db_list = v.clone();
    }
    if let Some(v) = o.n_trials {
        config.monte_carlo.n_trials = v;
    }
    if let Some(v) = o.n_draws {
        config.n_draws = v;
    }
    if let Some(v) = o.base_seed {
        config.monte_carlo.base_seed = v;
    }
    if let Some(v) = &o.output_path {
        config.output_path = Some(v.clone());
    }
    if let Some(v) = o.output_format {
        config.output_format = v;
    }
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_with(&text, overrides)
}

impl RunConfig {
    /// Parameters of the correlation study; the SNR is the single entry of
    /// `snr_db_list`.
    pub fn correlation(&self) -> CorrelationConfig {
        let mc = &self.monte_carlo;
        CorrelationConfig {
            n_transmit: mc.n_transmit,
            n_receive: mc.n_receive,
            spacing_ratio: mc.spacing_ratio,
            snr_db: mc
                .snr_db_list
                .first()
                .copied()
                .unwrap_or(DEFAULT_CORRELATION_SNR_DB),
            n_draws: self.n_draws,
            seed: mc.base_seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> String {
        parse_config(text).unwrap_err().to_string()
    }

    #[test]
    fn empty_config_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.monte_carlo.n_transmit, 8);
        assert_eq!(c.monte_carlo.n_receive, 128);
        assert_eq!(c.monte_carlo.spacing_ratio, 0.125);
        assert_eq!(c.monte_carlo.n_trials, 200);
    }

    #[test]
    fn correlation_defaults_to_minus_five_db() {
        let c = parse_config("experiment = \"correlation\"").unwrap();
        assert_eq!(c.monte_carlo.snr_db_list, vec![-5.0]);
        assert_eq!(c.correlation().snr_db, -5.0);
        assert_eq!(c.correlation().n_draws, 2000);

        let c = parse_config("experiment = \"correlation\"\nsnr_db_list = [-5.0]").unwrap();
        assert_eq!(c.correlation().snr_db, -5.0);
        assert!(
            err("experiment = \"correlation\"\nsnr_db_list = [0.0, 5.0]")
                .contains("snr_db_list (line 2)")
        );
        assert!(err("experiment = \"correlation\"\nn_draws = 50").contains("n_draws"));
    }

    #[test]
    fn range_errors_name_key_and_line() {
        let e = err("n_trials = 10\nn_receive = 0\n");
        assert!(e.contains("n_receive (line 2)"), "{e}");
        let e = err("\n\nn_trials = -3");
        assert!(e.contains("n_trials (line 3)"), "{e}");
        let e = err("angular_halfwidth_deg = 90.0");
        assert!(e.contains("angular_halfwidth_deg (line 1)"), "{e}");
        let e = err("methods = [\"SD\", \"AR\"]");
        assert!(e.contains("methods (line 1)"), "{e}");
        let e = err("methods = [\"UQ\", \"uq\"]");
        assert!(e.contains("duplicate"), "{e}");
    }

    #[test]
    fn unknown_and_malformed_are_rejected() {
        let e = err("n_trails = 10");
        assert!(e.contains("n_trails") && e.contains("line 1"), "{e}");
        let e = err("n_trials = \"many\"");
        assert!(e.contains("n_trials"), "{e}");
        assert!(parse_config("n_trials = ").is_err());
        assert!(err("output_format = \"xml\"").contains("output_format"));
    }

    #[test]
    fn overrides_take_precedence() {
        let text = "n_trials = 10\nbase_seed = 4\nsnr_db_list = [0.0]\noutput_format = \"json\"";
        let o = Overrides {
            snr_db_list: Some(vec![1.0, 2.0]),
            n_trials: Some(3),
            base_seed: Some(u64::MAX),
            output_path: Some("x.csv".into()),
            output_format: Some(OutputFormat::Csv),
            ..Overrides::default()
        };
        let c = parse_config_with(text, &o).unwrap();
        assert_eq!(c.monte_carlo.n_trials, 3);
        assert_eq!(c.monte_carlo.base_seed, u64::MAX);
        assert_eq!(c.monte_carlo.snr_db_list, vec![1.0, 2.0]);
        assert_eq!(c.output_path, Some(PathBuf::from("x.csv")));
        assert_eq!(c.output_format, OutputFormat::Csv);

        let bad = Overrides {
            n_trials: Some(0),
            ..Overrides::default()
        };
        let e = parse_config_with(text, &bad).unwrap_err().to_string();
        assert!(e.contains("n_trials"), "{e}");
    }

    #[test]
    fn requested_experiment_must_agree_with_file() {
        let o = Overrides {
            experiment: Some(ExperimentKind::Correlation),
            ..Overrides::default()
        };
        let c = parse_config_with("", &o).unwrap();
        assert_eq!(c.experiment, ExperimentKind::Correlation);
        assert_eq!(c.monte_carlo.snr_db_list, vec![-5.0]);
        let e = parse_config_with("n_trials = 3\nexperiment = \"nmse_sweep\"", &o)
            .unwrap_err()
            .to_string();
        assert!(e.contains("experiment (line 2)"), "{e}");
    }

    #[test]
    fn full_file_round_trip() {
        let text = r#"
experiment = "nmse_sweep"
n_transmit = 4
n_receive = 64
spacing_ratio = 0.25
snr_db_list = [-5.0, 5.0]
angular_halfwidth_deg = 10.0
n_trials = 20
base_seed = 99
methods = ["UQ", "ONEBIT"]
repetitions = 2
gain_magnitude = 0.5
noiseless = true
grid_points = 1024
n_draws = 500
output_path = "out.json"
output_format = "json"
"#;
        let c = parse_config(text).unwrap();
        let mc = &c.monte_carlo;
        assert_eq!((mc.n_transmit, mc.n_receive, mc.n_trials), (4, 64, 20));
        assert_eq!(mc.methods, vec![Method::Uq, Method::OneBit]);
        assert_eq!((mc.repetitions, mc.grid_points, c.n_draws), (2, 1024, 500));
        assert!(mc.noiseless);
        assert_eq!(c.output_format, OutputFormat::Json);
        assert!(err(&text.replace("[\"UQ\", \"ONEBIT\"]", "[\"SD\"]"))
            .contains("gain_magnitude (line 12)"));
    }
}

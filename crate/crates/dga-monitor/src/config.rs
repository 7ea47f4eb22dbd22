//! Application configuration file: thresholds, analysis/ingest timing and
//! notification sinks, as one UTF-8 TOML document.
//!
//! Every section has defaults, so an empty file (or no file at all) runs
//! the fleet-default thresholds with a stdout sink. The canonical example
//! lives at `config/dga.toml` in the repository root.

use std::path::{Path, PathBuf};
use std::time::Duration as StdDuration;

use chrono::Duration;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::DEFAULT_STALENESS_SECS;
use crate::engine::EngineConfig;
use crate::ingest::DEFAULT_REORDER_TOLERANCE_SECS;
use crate::model::{validate_config, ConfigViolation, ThresholdConfig};
use crate::notify::{RetryPolicy, Sink, Template};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisSettings {
    /// Snapshot entries older than this no longer count as fresh, seconds.
    pub staleness_secs: u64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            staleness_secs: DEFAULT_STALENESS_SECS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestSettings {
    /// Follow-mode reorder buffer span, seconds.
    pub reorder_tolerance_secs: u64,
}

impl Default for IngestSettings {
    fn default() -> Self {
        IngestSettings {
            reorder_tolerance_secs: DEFAULT_REORDER_TOLERANCE_SECS,
        }
    }
}

fn default_webhook_timeout_secs() -> u64 {
    10
}

/// One notification destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SinkConfig {
    Stdout,
    File {
        path: PathBuf,
    },
    Webhook {
        url: String,
        #[serde(default = "default_webhook_timeout_secs")]
        timeout_secs: u64,
    },
}

impl SinkConfig {
    pub fn to_sink(&self) -> Sink {
        match self {
            SinkConfig::Stdout => Sink::Stdout,
            SinkConfig::File { path } => Sink::File(path.clone()),
            SinkConfig::Webhook { url, timeout_secs } => Sink::Webhook {
                url: url.clone(),
                timeout: StdDuration::from_secs(*timeout_secs),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NotifySettings {
    /// Subject pattern; see [`Template`] for the placeholder set.
    pub subject: String,
    pub report_url: Option<String>,
    /// Waits between delivery attempts; attempts = retries + 1.
    pub retry_backoff_secs: Vec<u64>,
    pub sinks: Vec<SinkConfig>,
}

impl Default for NotifySettings {
    fn default() -> Self {
        let template = Template::default();
        NotifySettings {
            subject: template.subject,
            report_url: None,
            retry_backoff_secs: vec![1, 2, 4],
            sinks: vec![SinkConfig::Stdout],
        }
    }
}

/// The whole application configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub thresholds: ThresholdConfig,
    pub analysis: AnalysisSettings,
    pub ingest: IngestSettings,
    pub notify: NotifySettings,
}

impl AppConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(source),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn staleness(&self) -> Duration {
        Duration::seconds(self.analysis.staleness_secs as i64)
    }

    pub fn reorder_tolerance(&self) -> Duration {
        Duration::seconds(self.ingest.reorder_tolerance_secs as i64)
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            rearm_period: self.thresholds.rearm_period(),
            reorder_tolerance: self.reorder_tolerance(),
        }
    }

    pub fn template(&self) -> Template {
        Template {
            subject: self.notify.subject.clone(),
            report_url: self.notify.report_url.clone(),
        }
    }

    pub fn sinks(&self) -> Vec<Sink> {
        self.notify.sinks.iter().map(SinkConfig::to_sink).collect()
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            backoff: self
                .notify
                .retry_backoff_secs
                .iter()
                .map(|s| StdDuration::from_secs(*s))
                .collect(),
        }
    }

    /// All violations across the document: threshold invariants, template
    /// syntax and sink sanity.
    pub fn validate(&self) -> Vec<ConfigViolation> {
        let mut violations = validate_config(&self.thresholds);
        if let Err(err) = self.template().validate() {
            violations.push(ConfigViolation {
                location: "notify.subject".into(),
                message: err.to_string(),
            });
        }
        for (idx, sink) in self.notify.sinks.iter().enumerate() {
            match sink {
                SinkConfig::Webhook { url, timeout_secs } => {
                    if !url.starts_with("http://") && !url.starts_with("https://") {
                        violations.push(ConfigViolation {
                            location: format!("notify.sinks[{idx}].url"),
                            message: format!("{url:?} is not an http(s) URL"),
                        });
                    }
                    if *timeout_secs == 0 {
                        violations.push(ConfigViolation {
                            location: format!("notify.sinks[{idx}].timeout_secs"),
                            message: "must be positive".into(),
                        });
                    }
                }
                SinkConfig::File { path } => {
                    if path.as_os_str().is_empty() {
                        violations.push(ConfigViolation {
                            location: format!("notify.sinks[{idx}].path"),
                            message: "must be non-empty".into(),
                        });
                    }
                }
                SinkConfig::Stdout => {}
            }
        }
        if self.analysis.staleness_secs == 0 {
            violations.push(ConfigViolation {
                location: "analysis.staleness_secs".into(),
                message: "must be positive".into(),
            });
        }
        violations
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_thresholds;

    #[test]
    fn defaults_round_trip_bit_exactly() {
        let cfg = AppConfig::default();
        let text = cfg.to_toml();
        let parsed: AppConfig = toml::from_str(&text).unwrap();
        assert_eq!(parsed, cfg);
        // Value-for-value stability as decimal strings.
        assert_eq!(parsed.to_toml(), text);
    }

    #[test]
    fn default_thresholds_survive_serialization() {
        let cfg = AppConfig::default();
        let parsed: AppConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(parsed.thresholds, default_thresholds());
        let text = cfg.to_toml();
        assert!(text.contains("333.3"));
        assert!(text.contains("16.66"));
        assert!(text.contains("\"typical\""));
    }

    #[test]
    fn empty_document_yields_defaults() {
        let parsed: AppConfig = toml::from_str("").unwrap();
        assert_eq!(parsed, AppConfig::default());
    }

    #[test]
    fn partial_document_overrides_only_named_fields() {
        let parsed: AppConfig = toml::from_str(
            "[analysis]\nstaleness_secs = 3600\n\n[[notify.sinks]]\nkind = \"file\"\npath = \"n.log\"\n",
        )
        .unwrap();
        assert_eq!(parsed.analysis.staleness_secs, 3600);
        assert_eq!(parsed.thresholds, default_thresholds());
        assert_eq!(
            parsed.notify.sinks,
            vec![SinkConfig::File {
                path: PathBuf::from("n.log")
            }]
        );
    }

    #[test]
    fn shipped_example_matches_defaults() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/dga.toml");
        let cfg = AppConfig::load(&path).unwrap();
        assert_eq!(cfg, AppConfig::default());
    }

    #[test]
    fn validate_flags_bad_webhook_and_template() {
        let mut cfg = AppConfig::default();
        cfg.notify.subject = "{nope}".into();
        cfg.notify.sinks.push(SinkConfig::Webhook {
            url: "ftp://example".into(),
            timeout_secs: 0,
        });
        let violations = cfg.validate();
        assert!(violations.iter().any(|v| v.location == "notify.subject"));
        assert!(violations.iter().any(|v| v.location.ends_with(".url")));
        assert!(violations
            .iter()
            .any(|v| v.location.ends_with(".timeout_secs")));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            AppConfig::load("/nonexistent/dga.toml"),
            Err(ConfigError::Io { .. })
        ));
    }
}

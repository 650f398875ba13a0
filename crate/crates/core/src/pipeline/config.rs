//! TOML pipeline configuration with environment overrides.

use std::fmt;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::Deserialize;

use super::PipelineError;
use crate::alert::{AlertConfig, RetryPolicy, WebhookUrl};

pub const ENV_WEBHOOK_URL: &str = "ACTIVENET_WEBHOOK_URL";
pub const ENV_MODEL: &str = "ACTIVENET_MODEL";
pub const ENV_INPUT: &str = "ACTIVENET_INPUT";
pub const ENV_LOG: &str = "ACTIVENET_LOG";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputSource {
    Stdin,
    Tcp(SocketAddr),
    File(PathBuf),
}

impl FromStr for InputSource {
    type Err = PipelineError;

    /// `stdin` / `-`, `tcp:<port>` (loopback), `tcp:<host>:<port>`, or a path.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "" => Err(PipelineError::Usage("empty input source".into())),
            "stdin" | "-" => Ok(InputSource::Stdin),
            _ => match s.strip_prefix("tcp:") {
                Some(rest) => {
                    let spec = if rest.contains(':') {
                        rest.to_string()
                    } else {
                        format!("127.0.0.1:{rest}")
                    };
                    spec.to_socket_addrs()
                        .ok()
                        .and_then(|mut a| a.next())
                        .map(InputSource::Tcp)
                        .ok_or_else(|| PipelineError::Usage(format!("bad tcp input {s:?}")))
                }
                None => Ok(InputSource::File(PathBuf::from(s))),
            },
        }
    }
}

impl fmt::Display for InputSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputSource::Stdin => f.write_str("stdin"),
            InputSource::Tcp(a) => write!(f, "tcp:{a}"),
            InputSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeliverySettings {
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub queue_capacity: usize,
}

impl Default for DeliverySettings {
    fn default() -> Self {
        let p = RetryPolicy::default();
        DeliverySettings {
            timeout_ms: p.timeout.as_millis() as u64,
            max_retries: p.max_retries,
            base_delay_ms: p.base_delay.as_millis() as u64,
            queue_capacity: crate::alert::queue::DEFAULT_CAPACITY,
        }
    }
}

impl DeliverySettings {
    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            base_delay: Duration::from_millis(self.base_delay_ms),
            timeout: Duration::from_millis(self.timeout_ms),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<String>,
    pub model: Option<PathBuf>,
    /// Per-frame result records; standard output when unset.
    pub output: Option<PathBuf>,
    pub log_level: Option<String>,
    /// Where the run summary JSON is written at shutdown.
    pub metrics_output: Option<PathBuf>,
    pub dry_run: bool,
    /// With TCP input, stop after the first connection closes.
    pub tcp_once: bool,
    pub alert: AlertConfig,
    pub delivery: DeliverySettings,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Usage(format!("config {}: {e}", path.display())))?;
        PipelineConfig::from_toml(&text)
    }

    /// Applies `ACTIVENET_*` overrides from `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(url) = lookup(ENV_WEBHOOK_URL).filter(|u| !u.is_empty()) {
            self.alert.webhook_url = Some(WebhookUrl::new(url));
        }
        if let Some(m) = lookup(ENV_MODEL) {
            self.model = Some(PathBuf::from(m));
        }
        if let Some(i) = lookup(ENV_INPUT) {
            self.input = Some(i);
        }
        if let Some(l) = lookup(ENV_LOG) {
            self.log_level = Some(l);
        }
    }

    pub fn input_source(&self) -> Result<InputSource, PipelineError> {
        self.input.as_deref().unwrap_or("stdin").parse()
    }

    pub fn model_path(&self) -> Result<&Path, PipelineError> {
        self.model
            .as_deref()
            .ok_or_else(|| PipelineError::Usage("no model path given (--model or config `model`)".into()))
    }
}

//! Debounced lethargy alerts.
//!
//! Each person stream counts contiguous frames classified in the lowest
//! activeness level. Reaching `k` completes a streak: the counter resets and
//! an event fires unless the previous event for that person is younger than
//! the cooldown.

pub mod queue;
pub mod webhook;

use std::collections::HashMap;
use std::fmt;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::level::Level;

pub use queue::{DeliveryQueue, DeliveryStats, DeliveryWorker};
pub use webhook::{send_webhook, RetryPolicy, WebhookError};

pub const DEFAULT_TEMPLATE: &str =
    "Lethargy alert: person {person_id} stayed in the lowest activeness level for {k} consecutive frames ({ts})";

/// Webhook URLs are credentials; `Debug` never prints them.
#[derive(Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct WebhookUrl(String);

impl WebhookUrl {
    pub fn new(url: impl Into<String>) -> Self {
        WebhookUrl(url.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for WebhookUrl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("WebhookUrl(<redacted>)")
    }
}

impl<'de> Deserialize<'de> for WebhookUrl {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d).map(WebhookUrl)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("webhook_url must be set when sending is enabled")]
    MissingWebhook,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlertConfig {
    pub k: u32,
    pub lowest_class: Level,
    pub cooldown_ms: u64,
    pub webhook_url: Option<WebhookUrl>,
    pub message_template: String,
}

impl Default for AlertConfig {
    fn default() -> Self {
        AlertConfig {
            k: 30,
            lowest_class: Level::LOWEST,
            cooldown_ms: 60_000,
            webhook_url: None,
            message_template: DEFAULT_TEMPLATE.to_string(),
        }
    }
}

impl AlertConfig {
    pub fn with_k(k: u32) -> Self {
        AlertConfig {
            k,
            ..AlertConfig::default()
        }
    }

    pub fn validate(&self, sending: bool) -> Result<(), ConfigError> {
        if self.k == 0 {
            return Err(ConfigError::ZeroK);
        }
        if sending && self.webhook_url.as_ref().is_none_or(|u| u.expose().is_empty()) {
            return Err(ConfigError::MissingWebhook);
        }
        Ok(())
    }

    pub fn render(&self, person_id: u32, ts_ms: u64) -> String {
        self.message_template
            .replace("{person_id}", &person_id.to_string())
            .replace("{ts}", &format_timestamp(ts_ms))
            .replace("{k}", &self.k.to_string())
    }
}

/// RFC 3339 UTC with millisecond precision.
pub fn format_timestamp(ts_ms: u64) -> String {
    i64::try_from(ts_ms)
        .ok()
        .and_then(DateTime::<Utc>::from_timestamp_millis)
        .map(|t| t.to_rfc3339_opts(SecondsFormat::Millis, true))
        .unwrap_or_else(|| ts_ms.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlertEvent {
    pub person_id: u32,
    pub timestamp_ms: u64,
    pub message: String,
    pub streak_len: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AlertState {
    pub person_id: u32,
    pub consecutive: u32,
    pub last_fired_ts: Option<u64>,
    pub last_ts: Option<u64>,
}

impl AlertState {
    pub fn new(person_id: u32) -> Self {
        AlertState {
            person_id,
            ..AlertState::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub state: AlertState,
    pub event: Option<AlertEvent>,
    /// The timestamp went backwards; the frame was still processed.
    pub non_monotonic: bool,
}

/// Pure transition for one classified frame.
pub fn update(state: AlertState, label: Level, ts_ms: u64, cfg: &AlertConfig) -> Transition {
    let non_monotonic = state.last_ts.is_some_and(|last| ts_ms < last);
    let mut next = AlertState {
        last_ts: Some(state.last_ts.map_or(ts_ms, |l| l.max(ts_ms))),
        ..state
    };
    let mut event = None;
    if label == cfg.lowest_class {
        next.consecutive += 1;
        if next.consecutive >= cfg.k {
            next.consecutive = 0;
            let cooled = state
                .last_fired_ts
                .is_none_or(|fired| ts_ms.checked_sub(fired).is_some_and(|dt| dt >= cfg.cooldown_ms));
            if cooled {
                next.last_fired_ts = Some(ts_ms);
                event = Some(AlertEvent {
                    person_id: state.person_id,
                    timestamp_ms: ts_ms,
                    message: cfg.render(state.person_id, ts_ms),
                    streak_len: cfg.k,
                });
            }
        }
    } else {
        next.consecutive = 0;
    }
    Transition {
        state: next,
        event,
        non_monotonic,
    }
}

/// Independent per-person alert states.
#[derive(Debug, Clone)]
pub struct AlertTracker {
    cfg: AlertConfig,
    states: HashMap<u32, AlertState>,
    pub non_monotonic: u64,
    pub fired: u64,
}

impl AlertTracker {
    pub fn new(cfg: AlertConfig) -> Self {
        AlertTracker {
            cfg,
            states: HashMap::new(),
            non_monotonic: 0,
            fired: 0,
        }
    }

    pub fn config(&self) -> &AlertConfig {
        &self.cfg
    }

    pub fn state(&self, person_id: u32) -> Option<&AlertState> {
        self.states.get(&person_id)
    }

    pub fn observe(&mut self, person_id: u32, label: Level, ts_ms: u64) -> Option<AlertEvent> {
        let state = self.states.entry(person_id).or_insert_with(|| AlertState::new(person_id));
        let t = update(*state, label, ts_ms, &self.cfg);
        *state = t.state;
        if t.non_monotonic {
            self.non_monotonic += 1;
            log::warn!("person {person_id}: timestamp {ts_ms} went backwards");
        }
        if t.event.is_some() {
            self.fired += 1;
        }
        t.event
    }
}

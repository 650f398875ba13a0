//! Incoming-webhook delivery: JSON `{"text": ...}` POST with bounded
//! exponential backoff on timeouts, transport failures and 5xx responses.

use std::thread;
use std::time::Duration;

use serde_json::json;
use thiserror::Error;
use url::Url;

use super::{AlertEvent, WebhookUrl};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WebhookError {
    #[error("webhook URL is not a valid http(s) URL")]
    InvalidUrl,
    #[error("delivery failed after {attempts} attempt(s): {reason}")]
    DeliveryFailed { attempts: u32, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    /// Delay before the first retry; doubled for each later one.
    pub base_delay: Duration,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            timeout: Duration::from_secs(5),
        }
    }
}

impl RetryPolicy {
    pub fn delay_before_retry(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivered {
    pub attempts: u32,
    pub status: u16,
}

enum Attempt {
    Done(u16),
    Retryable(String),
    Fatal(String),
}

/// Blocking webhook client. One instance is reused for every delivery.
pub struct WebhookClient {
    agent: ureq::Agent,
    url: Url,
    policy: RetryPolicy,
}

impl WebhookClient {
    pub fn new(url: &WebhookUrl, policy: RetryPolicy) -> Result<Self, WebhookError> {
        let url = Url::parse(url.expose()).map_err(|_| WebhookError::InvalidUrl)?;
        if !matches!(url.scheme(), "http" | "https") || url.host_str().is_none() {
            return Err(WebhookError::InvalidUrl);
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(policy.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(WebhookClient { agent, url, policy })
    }

    fn attempt(&self, body: &str) -> Attempt {
        let result = self
            .agent
            .post(self.url.as_str())
            .content_type("application/json")
            .send(body);
        match result {
            Ok(resp) => {
                let status = resp.status().as_u16();
                match status {
                    200..=299 => Attempt::Done(status),
                    500..=599 => Attempt::Retryable(format!("HTTP {status}")),
                    _ => Attempt::Fatal(format!("HTTP {status}")),
                }
            }
            Err(ureq::Error::Timeout(_)) => Attempt::Retryable("timeout".into()),
            // Only the error kind is reported; messages may echo the URL.
            Err(e) => Attempt::Retryable(transport_kind(&e).into()),
        }
    }

    pub fn send(&self, event: &AlertEvent) -> Result<Delivered, WebhookError> {
        let body = json!({ "text": event.message }).to_string();
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Attempt::Done(status) => return Ok(Delivered { attempts, status }),
                Attempt::Fatal(reason) => return Err(WebhookError::DeliveryFailed { attempts, reason }),
                Attempt::Retryable(reason) => {
                    if attempts > self.policy.max_retries {
                        return Err(WebhookError::DeliveryFailed { attempts, reason });
                    }
                    log::debug!("webhook attempt {attempts} failed ({reason}), retrying");
                    thread::sleep(self.policy.delay_before_retry(attempts - 1));
                }
            }
        }
    }
}

fn transport_kind(e: &ureq::Error) -> &'static str {
    match e {
        ureq::Error::Io(_) => "io error",
        ureq::Error::HostNotFound => "host not found",
        ureq::Error::ConnectionFailed => "connection failed",
        ureq::Error::Protocol(_) => "protocol error",
        ureq::Error::BodyStalled => "body stalled",
        _ => "transport error",
    }
}

/// One-shot delivery with a fresh client.
pub fn send_webhook(event: &AlertEvent, url: &WebhookUrl, policy: RetryPolicy) -> Result<Delivered, WebhookError> {
    WebhookClient::new(url, policy)?.send(event)
}

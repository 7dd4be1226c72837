//! Token-bucket rate limiting shared by every stage of the probe funnel.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use tokio::time::Instant;

/// Timestamps of every granted probe token, for rate-ceiling measurements.
#[derive(Debug, Clone, Default)]
pub struct ProbeLog {
    inner: Arc<Mutex<Vec<DateTime<Utc>>>>,
}

impl ProbeLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> Vec<DateTime<Utc>> {
        self.inner.lock().expect("probe log poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("probe log poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn record(&self) {
        self.inner.lock().expect("probe log poisoned").push(Utc::now());
    }
}

/// Token bucket with capacity equal to the per-second rate.
///
/// The bucket starts empty, so under continuous demand grants are paced by
/// refill alone and any one-second window carries at most `rate` tokens; the
/// capacity only lets a briefly idle scan catch up by one second's budget.
#[derive(Debug, Clone)]
pub struct RateLimiter {
    inner: Arc<Inner>,
}

#[derive(Debug)]
struct Inner {
    rate: f64,
    capacity: f64,
    bucket: Mutex<Bucket>,
    log: Option<ProbeLog>,
}

#[derive(Debug)]
struct Bucket {
    tokens: f64,
    refilled_at: Instant,
}

impl RateLimiter {
    pub fn new(per_second: u32) -> Self {
        Self::build(per_second, None)
    }

    pub fn with_log(per_second: u32, log: ProbeLog) -> Self {
        Self::build(per_second, Some(log))
    }

    fn build(per_second: u32, log: Option<ProbeLog>) -> Self {
        assert!(per_second > 0, "rate limit must be positive");
        RateLimiter {
            inner: Arc::new(Inner {
                rate: f64::from(per_second),
                capacity: f64::from(per_second),
                bucket: Mutex::new(Bucket {
                    tokens: 0.0,
                    refilled_at: Instant::now(),
                }),
                log,
            }),
        }
    }

    /// Wait until one probe token is available and consume it.
    pub async fn acquire(&self) {
        loop {
            let wait = {
                let mut bucket = self.inner.bucket.lock().expect("rate bucket poisoned");
                let now = Instant::now();
                let elapsed = now.duration_since(bucket.refilled_at).as_secs_f64();
                bucket.tokens = (bucket.tokens + elapsed * self.inner.rate).min(self.inner.capacity);
                bucket.refilled_at = now;
                if bucket.tokens >= 1.0 {
                    bucket.tokens -= 1.0;
                    if let Some(log) = &self.inner.log {
                        log.record();
                    }
                    return;
                }
                Duration::from_secs_f64((1.0 - bucket.tokens) / self.inner.rate)
            };
            tokio::time::sleep(wait).await;
        }
    }
}

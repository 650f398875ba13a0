//! Bounded hand-off between the classification thread and alert delivery.
//!
//! Pushing never blocks: when the queue is full the oldest pending event is
//! discarded. A single worker thread drains the queue.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::Serialize;

use super::webhook::{Delivered, WebhookError};
use super::AlertEvent;

pub const DEFAULT_CAPACITY: usize = 256;

struct Inner<T> {
    items: VecDeque<T>,
    closed: bool,
}

pub struct DeliveryQueue<T> {
    inner: Mutex<Inner<T>>,
    ready: Condvar,
    capacity: usize,
    dropped: AtomicU64,
}

impl<T> DeliveryQueue<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        DeliveryQueue {
            inner: Mutex::new(Inner {
                items: VecDeque::with_capacity(capacity),
                closed: false,
            }),
            ready: Condvar::new(),
            capacity,
            dropped: AtomicU64::new(0),
        }
    }

    /// Enqueues `item`, evicting the oldest entry when full. Returns the
    /// evicted entry, if any.
    pub fn push(&self, item: T) -> Option<T> {
        let mut g = self.inner.lock().unwrap();
        let evicted = if g.items.len() >= self.capacity {
            self.dropped.fetch_add(1, Ordering::Relaxed);
            g.items.pop_front()
        } else {
            None
        };
        g.items.push_back(item);
        drop(g);
        self.ready.notify_one();
        evicted
    }

    /// Blocks until an item is available; `None` once closed and drained.
    pub fn pop(&self) -> Option<T> {
        let mut g = self.inner.lock().unwrap();
        loop {
            if let Some(item) = g.items.pop_front() {
                return Some(item);
            }
            if g.closed {
                return None;
            }
            g = self.ready.wait(g).unwrap();
        }
    }

    pub fn close(&self) {
        self.inner.lock().unwrap().closed = true;
        self.ready.notify_all();
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Default)]
struct Counters {
    delivered: AtomicU64,
    failed: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct DeliveryStats {
    pub delivered: u64,
    pub failed: u64,
    pub dropped: u64,
    pub pending: u64,
}

/// Background consumer that hands events to a delivery function.
pub struct DeliveryWorker {
    queue: Arc<DeliveryQueue<AlertEvent>>,
    counters: Arc<Counters>,
    handle: Option<JoinHandle<()>>,
}

impl DeliveryWorker {
    pub fn spawn<F>(capacity: usize, mut deliver: F) -> Self
    where
        F: FnMut(&AlertEvent) -> Result<Delivered, WebhookError> + Send + 'static,
    {
        let queue = Arc::new(DeliveryQueue::new(capacity));
        let counters = Arc::new(Counters::default());
        let (q, c) = (Arc::clone(&queue), Arc::clone(&counters));
        let handle = thread::Builder::new()
            .name("alert-delivery".into())
            .spawn(move || {
                while let Some(event) = q.pop() {
                    match deliver(&event) {
                        Ok(d) => {
                            c.delivered.fetch_add(1, Ordering::Relaxed);
                            log::info!(
                                "alert for person {} delivered (HTTP {}, {} attempt(s))",
                                event.person_id,
                                d.status,
                                d.attempts
                            );
                        }
                        Err(e) => {
                            c.failed.fetch_add(1, Ordering::Relaxed);
                            log::error!("alert for person {} not delivered: {e}", event.person_id);
                        }
                    }
                }
            })
            .expect("spawn delivery thread");
        DeliveryWorker {
            queue,
            counters,
            handle: Some(handle),
        }
    }

    /// Non-blocking enqueue.
    pub fn submit(&self, event: AlertEvent) {
        if let Some(old) = self.queue.push(event) {
            log::warn!("alert queue full; dropped pending alert for person {}", old.person_id);
        }
    }

    pub fn stats(&self) -> DeliveryStats {
        DeliveryStats {
            delivered: self.counters.delivered.load(Ordering::Relaxed),
            failed: self.counters.failed.load(Ordering::Relaxed),
            dropped: self.queue.dropped(),
            pending: self.queue.len() as u64,
        }
    }

    /// Closes the queue and waits up to `grace` for pending deliveries.
    /// A worker still busy after that is left detached.
    pub fn shutdown(mut self, grace: Duration) -> DeliveryStats {
        self.queue.close();
        let deadline = Instant::now() + grace;
        if let Some(h) = self.handle.take() {
            while !h.is_finished() && Instant::now() < deadline {
                thread::sleep(Duration::from_millis(5));
            }
            if h.is_finished() {
                let _ = h.join();
            } else {
                log::warn!("alert delivery still in progress at shutdown");
            }
        }
        self.stats()
    }
}

impl Drop for DeliveryWorker {
    fn drop(&mut self) {
        self.queue.close();
    }
}

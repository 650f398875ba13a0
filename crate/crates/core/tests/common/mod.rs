//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use activenet::alert::{update, AlertConfig, AlertState};
use activenet::level::{Level, NUM_CLASSES};
use activenet::skeleton::{Joint, KeypointFrame};

// ---- geometry ----

pub fn translate(f: &KeypointFrame, dx: f64, dy: f64) -> KeypointFrame {
    f.map_points(|x, y| (x + dx, y + dy))
}

pub fn rotate(f: &KeypointFrame, theta_rad: f64, cx: f64, cy: f64) -> KeypointFrame {
    let (s, c) = theta_rad.sin_cos();
    f.map_points(|x, y| {
        let (u, v) = (x - cx, y - cy);
        (cx + c * u - s * v, cy + s * u + c * v)
    })
}

pub fn scale(f: &KeypointFrame, k: f64) -> KeypointFrame {
    f.map_points(|x, y| (k * x, k * y))
}

/// Reflects x and swaps every left joint with its right counterpart.
pub fn mirror(f: &KeypointFrame) -> KeypointFrame {
    let mut out = f.clone();
    for j in Joint::ALL {
        out.set(j, f.get(j.mirrored()).map(|x, y| (-x, y)));
    }
    out
}

// ---- alert oracle ----

/// Firing positions by rescanning: at each frame count the run of lowest-class
/// labels ending there. The counter reaches `k` exactly when that run is a
/// positive multiple of `k`; a fire happens then if the cooldown since the
/// previous fire has elapsed.
pub fn oracle_fires(labels: &[Level], ts: &[u64], cfg: &AlertConfig) -> Vec<usize> {
    let mut fires: Vec<usize> = Vec::new();
    for i in 0..labels.len() {
        let mut run = 0usize;
        let mut j = i as isize;
        while j >= 0 && labels[j as usize] == cfg.lowest_class {
            run += 1;
            j -= 1;
        }
        if run == 0 || !run.is_multiple_of(cfg.k as usize) {
            continue;
        }
        let ok = match fires.last() {
            None => true,
            Some(&p) => ts[i] >= ts[p] && ts[i] - ts[p] >= cfg.cooldown_ms,
        };
        if ok {
            fires.push(i);
        }
    }
    fires
}

pub fn update_fires(labels: &[Level], ts: &[u64], cfg: &AlertConfig) -> Vec<usize> {
    let mut s = AlertState::new(0);
    let mut out = Vec::new();
    for (i, (&l, &t)) in labels.iter().zip(ts).enumerate() {
        let tr = update(s, l, t, cfg);
        if tr.event.is_some() {
            out.push(i);
        }
        s = tr.state;
    }
    out
}

// ---- metrics oracle ----

pub struct OracleMetrics {
    pub accuracy: f64,
    pub precision: [f64; NUM_CLASSES],
    pub recall: [f64; NUM_CLASSES],
    pub f1: [f64; NUM_CLASSES],
}

/// Per-class scores by direct counting over the pairs.
pub fn oracle_metrics(truth: &[Level], pred: &[Level]) -> OracleMetrics {
    let n = truth.len() as f64;
    let correct = truth.iter().zip(pred).filter(|(t, p)| t == p).count() as f64;
    let mut precision = [0.0; NUM_CLASSES];
    let mut recall = [0.0; NUM_CLASSES];
    let mut f1 = [0.0; NUM_CLASSES];
    for c in Level::ALL {
        let i = c.index();
        let tp = truth.iter().zip(pred).filter(|&(&t, &p)| t == c && p == c).count() as f64;
        let predicted = pred.iter().filter(|&&p| p == c).count() as f64;
        let actual = truth.iter().filter(|&&t| t == c).count() as f64;
        precision[i] = if predicted > 0.0 { tp / predicted } else { 0.0 };
        recall[i] = if actual > 0.0 { tp / actual } else { 0.0 };
        let s = precision[i] + recall[i];
        f1[i] = if s > 0.0 { 2.0 * precision[i] * recall[i] / s } else { 0.0 };
    }
    OracleMetrics {
        accuracy: correct / n,
        precision,
        recall,
        f1,
    }
}

// ---- webhook stub ----

#[derive(Debug, Clone, Copy)]
pub enum Reply {
    Status(u16),
    /// Reads the request, then holds the connection open without answering.
    Stall(Duration),
}

/// Minimal HTTP/1.1 server answering request `n` with `script[n]` (the last
/// entry repeats).
pub struct StubServer {
    pub url: String,
    hits: Arc<AtomicUsize>,
    bodies: Arc<Mutex<Vec<String>>>,
}

fn read_request(stream: &mut TcpStream) -> Option<String> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut len = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).ok()?;
    String::from_utf8(body).ok()
}

fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        204 => "No Content",
        404 => "Not Found",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    }
}

impl StubServer {
    pub fn start(script: Vec<Reply>) -> StubServer {
        assert!(!script.is_empty());
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/hook", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let (h, b) = (hits.clone(), bodies.clone());
        thread::spawn(move || {
            for conn in listener.incoming() {
                let Ok(mut stream) = conn else { return };
                let (h, b, script) = (h.clone(), b.clone(), script.clone());
                thread::spawn(move || {
                    let Some(body) = read_request(&mut stream) else { return };
                    let n = h.fetch_add(1, Ordering::SeqCst);
                    b.lock().unwrap().push(body);
                    match script[n.min(script.len() - 1)] {
                        Reply::Status(code) => {
                            let _ = write!(
                                stream,
                                "HTTP/1.1 {code} {}\r\nContent-Length: 0\r\nConnection: close\r\n\r\n",
                                reason(code)
                            );
                            let _ = stream.flush();
                        }
                        Reply::Stall(d) => thread::sleep(d),
                    }
                });
            }
        });
        StubServer { url, hits, bodies }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn bodies(&self) -> Vec<String> {
        self.bodies.lock().unwrap().clone()
    }
}

pub fn percentile(samples: &mut [f64], q: f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ((samples.len() as f64 - 1.0) * q).round() as usize;
    samples[idx]
}

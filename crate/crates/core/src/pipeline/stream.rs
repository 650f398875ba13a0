//! Streaming runtime: frames in, per-frame classifications and alerts out.
//!
//! An ingest thread reads lines from the configured source into a bounded
//! channel; the calling thread classifies them in arrival order. Webhook
//! delivery happens on its own worker behind a drop-oldest queue, so network
//! stalls never hold up classification.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::mpsc::{self, Receiver, SyncSender, TryRecvError};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::config::{InputSource, PipelineConfig};
use super::model_file::TrainedModel;
use super::PipelineError;
use crate::alert::queue::DeliveryStats;
use crate::alert::webhook::WebhookClient;
use crate::alert::{AlertConfig, AlertEvent, AlertTracker, DeliveryWorker};
use crate::encoder::encode;
use crate::level::{Level, NUM_CLASSES};
use crate::skeleton::{parse_frame, KeypointFrame};

const CHANNEL_CAPACITY: usize = 4096;
const SHUTDOWN_GRACE: Duration = Duration::from_secs(5);

/// Where fired alerts go.
pub enum AlertSink {
    /// Alerts only show up in the per-frame records.
    Discard,
    /// Alerts are written inline to the output stream.
    DryRun,
    Deliver(DeliveryWorker),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameResult {
    pub frame_id: u64,
    pub person_id: u32,
    pub label: Level,
    pub probs: [f64; NUM_CLASSES],
    pub alert: bool,
}

#[derive(Serialize)]
struct DryRunEvent<'a> {
    event: &'static str,
    person_id: u32,
    ts_ms: u64,
    timestamp: String,
    streak_len: u32,
    message: &'a str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub frames: u64,
    pub parse_errors: u64,
    pub per_class: [u64; NUM_CLASSES],
    pub alerts_fired: u64,
    pub non_monotonic: u64,
    pub elapsed_s: f64,
    pub frames_per_sec: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delivery: Option<DeliveryStats>,
}

impl RunSummary {
    pub fn render(&self) -> String {
        let classes: Vec<String> = Level::ALL
            .iter()
            .map(|l| format!("{}={}", l.tag(), self.per_class[l.index()]))
            .collect();
        let mut s = format!(
            "frames: {}  parse errors: {}  classes: {}  alerts fired: {}  mean fps: {:.1}",
            self.frames,
            self.parse_errors,
            classes.join(" "),
            self.alerts_fired,
            self.frames_per_sec
        );
        if let Some(d) = &self.delivery {
            s.push_str(&format!(
                "  delivered: {} failed: {} dropped: {}",
                d.delivered, d.failed, d.dropped
            ));
        }
        s
    }
}

pub struct StreamEngine {
    model: TrainedModel,
    tracker: AlertTracker,
    sink: AlertSink,
    frames: u64,
    parse_errors: u64,
    per_class: [u64; NUM_CLASSES],
    started: Instant,
}

impl StreamEngine {
    pub fn new(model: TrainedModel, alert: AlertConfig, sink: AlertSink) -> Self {
        StreamEngine {
            model,
            tracker: AlertTracker::new(alert),
            sink,
            frames: 0,
            parse_errors: 0,
            per_class: [0; NUM_CLASSES],
            started: Instant::now(),
        }
    }

    /// Classifies one frame and advances its person's alert state. Fired
    /// alerts are handed to the delivery worker, if any.
    pub fn process_frame(&mut self, frame: &KeypointFrame) -> (FrameResult, Option<AlertEvent>) {
        let enc = encode(frame);
        let pred = self
            .model
            .predict(&enc)
            .expect("loaded models are validated and transform yields finite features");
        self.frames += 1;
        self.per_class[pred.label.index()] += 1;
        let event = self.tracker.observe(frame.person_id, pred.label, frame.timestamp_ms);
        if let (Some(e), AlertSink::Deliver(worker)) = (&event, &self.sink) {
            worker.submit(e.clone());
        }
        let result = FrameResult {
            frame_id: frame.frame_id,
            person_id: frame.person_id,
            label: pred.label,
            probs: pred.probs,
            alert: event.is_some(),
        };
        (result, event)
    }

    /// Handles one wire line. Malformed lines are logged and counted.
    pub fn process_line(&mut self, line: &str, out: &mut impl Write) -> io::Result<()> {
        if line.trim().is_empty() {
            return Ok(());
        }
        let frame = match parse_frame(line) {
            Ok(f) => f,
            Err(e) => {
                self.parse_errors += 1;
                log::warn!("skipping malformed frame: {e}");
                return Ok(());
            }
        };
        let (result, event) = self.process_frame(&frame);
        serde_json::to_writer(&mut *out, &result)?;
        out.write_all(b"\n")?;
        if let (Some(e), AlertSink::DryRun) = (event, &self.sink) {
            let rec = DryRunEvent {
                event: "alert",
                person_id: e.person_id,
                ts_ms: e.timestamp_ms,
                timestamp: crate::alert::format_timestamp(e.timestamp_ms),
                streak_len: e.streak_len,
                message: &e.message,
            };
            serde_json::to_writer(&mut *out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn tracker(&self) -> &AlertTracker {
        &self.tracker
    }

    pub fn finish(self) -> RunSummary {
        let elapsed_s = self.started.elapsed().as_secs_f64();
        let delivery = match self.sink {
            AlertSink::Deliver(w) => Some(w.shutdown(SHUTDOWN_GRACE)),
            _ => None,
        };
        RunSummary {
            frames: self.frames,
            parse_errors: self.parse_errors,
            per_class: self.per_class,
            alerts_fired: self.tracker.fired,
            non_monotonic: self.tracker.non_monotonic,
            elapsed_s,
            frames_per_sec: if elapsed_s > 0.0 { self.frames as f64 / elapsed_s } else { 0.0 },
            delivery,
        }
    }
}

enum Msg {
    Line(String),
    Eof,
    Stop,
    Failed(String),
}

fn pump(reader: impl BufRead, tx: &SyncSender<Msg>) -> bool {
    for line in reader.lines() {
        match line {
            Ok(l) => {
                if tx.send(Msg::Line(l)).is_err() {
                    return false;
                }
            }
            Err(e) => {
                log::warn!("input read error: {e}");
                break;
            }
        }
    }
    true
}

fn spawn_ingest(source: &InputSource, tcp_once: bool, tx: SyncSender<Msg>) -> Result<(), PipelineError> {
    match source {
        InputSource::Stdin => {
            thread::spawn(move || {
                pump(io::stdin().lock(), &tx);
                let _ = tx.send(Msg::Eof);
            });
        }
        InputSource::File(path) => {
            let f = File::open(path)
                .map_err(|e| PipelineError::InputUnavailable(format!("{}: {e}", path.display())))?;
            thread::spawn(move || {
                pump(BufReader::new(f), &tx);
                let _ = tx.send(Msg::Eof);
            });
        }
        InputSource::Tcp(addr) => {
            let listener =
                TcpListener::bind(addr).map_err(|e| PipelineError::InputUnavailable(format!("tcp {addr}: {e}")))?;
            log::info!("listening for frames on {addr}");
            thread::spawn(move || {
                for conn in listener.incoming() {
                    match conn {
                        Ok(stream) => {
                            if let Ok(peer) = stream.peer_addr() {
                                log::info!("frame source connected from {peer}");
                            }
                            if !pump(BufReader::new(stream), &tx) {
                                return;
                            }
                            if tcp_once {
                                let _ = tx.send(Msg::Eof);
                                return;
                            }
                        }
                        Err(e) => {
                            let _ = tx.send(Msg::Failed(e.to_string()));
                            return;
                        }
                    }
                }
            });
        }
    }
    Ok(())
}

fn install_signal_stop(tx: SyncSender<Msg>) {
    use signal_hook::consts::{SIGINT, SIGTERM};
    match signal_hook::iterator::Signals::new([SIGINT, SIGTERM]) {
        Ok(mut signals) => {
            thread::spawn(move || {
                if signals.forever().next().is_some() {
                    let _ = tx.send(Msg::Stop);
                }
            });
        }
        Err(e) => log::warn!("signal handlers not installed: {e}"),
    }
}

fn drive(engine: &mut StreamEngine, rx: &Receiver<Msg>, out: &mut impl Write) -> Result<(), PipelineError> {
    let io_err = |e: io::Error| PipelineError::Io(e.to_string());
    loop {
        let msg = match rx.try_recv() {
            Ok(m) => m,
            Err(TryRecvError::Empty) => {
                out.flush().map_err(io_err)?;
                match rx.recv() {
                    Ok(m) => m,
                    Err(_) => break,
                }
            }
            Err(TryRecvError::Disconnected) => break,
        };
        match msg {
            Msg::Line(l) => engine.process_line(&l, out).map_err(io_err)?,
            Msg::Eof | Msg::Stop => break,
            Msg::Failed(e) => return Err(PipelineError::InputUnavailable(e)),
        }
    }
    out.flush().map_err(io_err)
}

fn build_sink(cfg: &PipelineConfig) -> Result<AlertSink, PipelineError> {
    if cfg.dry_run {
        return Ok(AlertSink::DryRun);
    }
    match &cfg.alert.webhook_url {
        Some(url) if !url.expose().is_empty() => {
            let client = WebhookClient::new(url, cfg.delivery.retry_policy())
                .map_err(|e| PipelineError::Usage(e.to_string()))?;
            Ok(AlertSink::Deliver(DeliveryWorker::spawn(
                cfg.delivery.queue_capacity.max(1),
                move |e| client.send(e),
            )))
        }
        _ => {
            log::warn!("no webhook configured; alerts are only flagged in the output records");
            Ok(AlertSink::Discard)
        }
    }
}

/// Runs the full pipeline until the input ends or a stop signal arrives.
pub fn run_stream(cfg: &PipelineConfig, handle_signals: bool) -> Result<RunSummary, PipelineError> {
    cfg.alert.validate(false)?;
    let model = TrainedModel::load(cfg.model_path()?)?;
    let source = cfg.input_source()?;

    let (tx, rx) = mpsc::sync_channel(CHANNEL_CAPACITY);
    if handle_signals {
        install_signal_stop(tx.clone());
    }
    spawn_ingest(&source, cfg.tcp_once, tx)?;

    let sink = build_sink(cfg)?;
    let mut engine = StreamEngine::new(model, cfg.alert.clone(), sink);
    match &cfg.output {
        Some(path) => {
            let f = File::create(path).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
            drive(&mut engine, &rx, &mut BufWriter::new(f))?;
        }
        None => drive(&mut engine, &rx, &mut BufWriter::new(io::stdout().lock()))?,
    }
    let summary = engine.finish();
    if let Some(path) = &cfg.metrics_output {
        write_summary(path, &summary)?;
    }
    Ok(summary)
}

fn write_summary(path: &Path, summary: &RunSummary) -> Result<(), PipelineError> {
    let json = serde_json::to_string_pretty(summary).expect("summary serializes");
    std::fs::write(path, json + "\n").map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
}

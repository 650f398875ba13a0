//! Acceptance criteria of the primary component. Each criterion prints one
//! PASS/FAIL line; the process fails if any criterion fails.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use activenet::alert::webhook::WebhookClient;
use activenet::alert::{send_webhook, AlertConfig, DeliveryWorker, RetryPolicy, WebhookError, WebhookUrl};
use activenet::encoder::{angle_at, encode, mirror_permutation, PoseEncoding, NUM_FEATURES};
use activenet::forest::{
    default_grid, evaluate, f1_score, grid_search, kfold_cv, train_forest, train_tree, Classifier, Hyperparams,
    Learner, LogisticModel, LogisticParams,
};
use activenet::level::Level;
use activenet::pipeline::data::write_frame;
use activenet::pipeline::stream::{AlertSink, StreamEngine};
use activenet::pipeline::synth::{synthesize, SyntheticPoseParams};
use activenet::pipeline::{cmd_synth, cmd_train, run_stream, PipelineConfig, TrainOptions, TrainedModel};
use activenet::preprocess::{filter_rows, fit, transform, transform_all, FeatureRow, LabeledDataset, LabeledRow};
use activenet::skeleton::{Joint, Keypoint, KeypointFrame};
use common::{Reply, StubServer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn labeled(params: &SyntheticPoseParams, n_per_class: usize) -> LabeledDataset {
    LabeledDataset::new(
        synthesize(params, n_per_class)
            .into_iter()
            .map(|s| LabeledRow {
                encoding: encode(&s.frame),
                label: s.label,
            })
            .collect(),
    )
}

fn encodings_close(a: &PoseEncoding, b: &PoseEncoding, tol: f64) -> Result<(), String> {
    if a.mask() != b.mask() {
        return Err("validity mask changed".into());
    }
    for i in 0..NUM_FEATURES {
        if let (Some(x), Some(y)) = (a.get(i), b.get(i)) {
            if (x - y).abs() > tol {
                return Err(format!("feature {} moved {:.3e}", i + 1, (x - y).abs()));
            }
        }
    }
    Ok(())
}

fn encoding_invariance() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let samples = synthesize(&SyntheticPoseParams { seed: 7, ..Default::default() }, 250);
    let perm = mirror_permutation();
    for (n, s) in samples.iter().enumerate() {
        let f = &s.frame;
        let base = encode(f);
        let dx = rng.random_range(-1500.0..1500.0);
        let dy = rng.random_range(-1500.0..1500.0);
        let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let k = rng.random_range(0.1..10.0);
        for (what, g) in [
            ("translation", common::translate(f, dx, dy)),
            ("rotation", common::rotate(f, theta, rng.random_range(0.0..1280.0), rng.random_range(0.0..720.0))),
            ("scale", common::scale(f, k)),
        ] {
            encodings_close(&base, &encode(&g), 1e-6).map_err(|e| format!("frame {n} {what}: {e}"))?;
        }
        ensure!(
            encode(&common::mirror(f)) == base.permuted(&perm),
            "frame {n}: mirror did not permute the paired features"
        );
    }
    let elapsed = t0.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("{} frames x 4 transforms in {:.2?}", samples.len(), elapsed))
}

fn encoding_arity_nan() -> Outcome {
    let samples = synthesize(&SyntheticPoseParams { occlusion_prob: 0.3, ..Default::default() }, 50);
    for s in &samples {
        ensure!(encode(&s.frame).values().len() == 15, "arity");
    }
    ensure!(encode(&KeypointFrame::absent(0, 0, 0)).invalid_count() == 15, "all-absent frame must be all invalid");

    let p = Keypoint::new(100.0, 100.0);
    ensure!(angle_at(p, p, Keypoint::new(5.0, 5.0)).is_none(), "coincident a/vertex must be invalid");
    ensure!(angle_at(Keypoint::new(5.0, 5.0), p, p).is_none(), "coincident c/vertex must be invalid");
    ensure!(angle_at(p, Keypoint::ABSENT, Keypoint::new(5.0, 5.0)).is_none(), "sentinel must be invalid");

    let mut f = samples[0].frame.clone();
    for j in Joint::ALL {
        f.set(j, Keypoint::new(10.0 * j.index() as f64, 3.0 * j.index() as f64));
    }
    f.set(Joint::REye, f.get(Joint::Nose));
    let e = encode(&f);
    ensure!(!e.is_valid(0), "Nose-REye-REar with REye on Nose must be invalid");
    f.set(Joint::REar, Keypoint::ABSENT);
    ensure!(!encode(&f).is_valid(2), "Neck-Nose-REar with absent REar must be invalid");

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 1_000_000;
    let mut valid = 0usize;
    for _ in 0..n {
        let b = (rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3));
        let (dx, dy) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let t1: f64 = rng.random_range(-500.0..500.0);
        let t2: f64 = rng.random_range(-500.0..500.0);
        let eps = 1e-9 * rng.random_range(-1.0..1.0);
        let a = Keypoint::new(b.0 + t1 * dx + eps, b.1 + t1 * dy);
        let c = Keypoint::new(b.0 + t2 * dx, b.1 + t2 * dy - eps);
        if let Some(v) = angle_at(a, Keypoint::new(b.0, b.1), c) {
            ensure!(v.is_finite() && (0.0..=180.0).contains(&v), "angle {v} out of range");
            valid += 1;
        }
    }
    Ok(format!("{n} near-collinear triples, {valid} valid, none NaN"))
}

fn preprocess_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<LabeledRow> = (0..600)
        .map(|i| {
            let mut vals: [f64; 15] = std::array::from_fn(|j| rng.random_range(0.0..180.0) * (1.0 + j as f64 / 10.0));
            let holes = if i % 10 == 0 { 8 + i % 5 } else { i % 8 };
            for _ in 0..holes.min(15) {
                vals[rng.random_range(0..15)] = f64::NAN;
            }
            LabeledRow {
                encoding: PoseEncoding::from_raw(vals),
                label: Level::from_index(i % 4),
            }
        })
        .collect();
    let ds = LabeledDataset::new(rows);
    let kept = filter_rows(&ds);
    for r in &ds.rows {
        let keep = r.encoding.invalid_count() < 8;
        ensure!(kept.rows.contains(r) == keep, "row with {} invalid kept={}", r.encoding.invalid_count(), !keep);
    }
    ensure!(kept.dropped == ds.len() - kept.len(), "drop count");
    let stats = fit(&kept).map_err(|e| e.to_string())?;
    let mut worst_mean = 0.0f64;
    let mut worst_std = 0.0f64;
    for j in 0..15 {
        let vals: Vec<f64> = kept
            .rows
            .iter()
            .filter(|r| r.encoding.is_valid(j))
            .map(|r| transform(&r.encoding, &stats)[j])
            .collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        worst_mean = worst_mean.max(mean.abs());
        worst_std = worst_std.max((std - 1.0).abs());
    }
    ensure!(worst_mean <= 1e-9, "mean off by {worst_mean:e}");
    ensure!(worst_std <= 1e-9, "std off by {worst_std:e}");
    for r in &kept.rows {
        let t = transform(&r.encoding, &stats);
        for (j, v) in t.iter().enumerate() {
            ensure!(r.encoding.is_valid(j) || *v == 0.0, "imputed entry scaled to {v}");
        }
    }
    Ok(format!(
        "{} rows kept, {} dropped; |mean| <= {worst_mean:.1e}, |std-1| <= {worst_std:.1e}",
        kept.len(),
        kept.dropped
    ))
}

fn classifier_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let rows = |rng: &mut ChaCha8Rng, n: usize| -> Vec<FeatureRow> {
        (0..n).map(|_| std::array::from_fn(|_| rng.random_range(-3.0..3.0))).collect()
    };
    let rule = |x: &FeatureRow| Level::from_index(((x[1] - x[4] * x[9] + 6.0).max(0.0) as usize / 3).min(3));

    let x = rows(&mut rng, 300);
    let y: Vec<Level> = x.iter().map(rule).collect();
    let params = Hyperparams {
        n_trees: 1,
        bootstrap: false,
        max_features: 15,
        ..Hyperparams::default()
    };
    let tree = train_tree(&x, &y, &params).map_err(|e| e.to_string())?;
    let forest = train_forest(&x, &y, &params).map_err(|e| e.to_string())?;
    for q in rows(&mut rng, 100) {
        ensure!(
            tree.predict_label(&q).unwrap() == forest.predict(&q).unwrap().label,
            "forest of one disagrees with tree"
        );
    }
    let acc = evaluate(&Classifier::Tree(tree), &x, &y).map_err(|e| e.to_string())?.accuracy;
    ensure!(acc == 1.0, "unlimited tree training accuracy {acc}");

    let lx = rows(&mut rng, 50);
    let ly: Vec<Level> = (0..50).map(|i| Level::from_index(i % 4)).collect();
    let w: Vec<Vec<f64>> = (0..4).map(|_| (0..16).map(|_| rng.random_range(-0.3..0.3)).collect()).collect();
    let l2 = LogisticParams::default().l2;
    let g = LogisticModel::from_rows(&w).unwrap().gradient(&lx, &ly, l2).to_rows();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for c in 0..4 {
        for j in 0..16 {
            let (mut p, mut m) = (w.clone(), w.clone());
            p[c][j] += h;
            m[c][j] -= h;
            let fd = (LogisticModel::from_rows(&p).unwrap().loss(&lx, &ly, l2)
                - LogisticModel::from_rows(&m).unwrap().loss(&lx, &ly, l2))
                / (2.0 * h);
            worst = worst.max((g[c][j] - fd).abs() / g[c][j].abs().max(fd.abs()).max(1e-4));
        }
    }
    ensure!(worst < 1e-5, "logistic gradient relative error {worst:e}");

    let f_a = f1_score(0.989, 0.820);
    let f_b = f1_score(1.000, 0.745);
    ensure!((f_a - 0.896).abs() <= 0.001, "F1(0.989, 0.820) = {f_a}");
    ensure!((f_b - 0.853).abs() <= 0.001, "F1(1.000, 0.745) = {f_b}");
    Ok(format!("gradient rel err {worst:.1e}; F1 {f_a:.4} and {f_b:.4}"))
}

fn headline_benchmark() -> Outcome {
    let t0 = Instant::now();
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 0..10u64 {
        let ds = filter_rows(&labeled(&SyntheticPoseParams { seed, ..Default::default() }, 100));
        let grid: Vec<Learner> = default_grid(seed).into_iter().map(Learner::Forest).collect();
        let forest = grid_search(&ds, &grid, 5, seed).map_err(|e| e.to_string())?.best().cv.mean_accuracy;
        let logistic = kfold_cv(&ds, 5, &Learner::Logistic(LogisticParams::default()), seed)
            .map_err(|e| e.to_string())?
            .mean_accuracy;
        let ok = forest >= 0.90 && forest >= logistic;
        wins += usize::from(ok);
        lines.push(format!("seed {seed}: forest {forest:.3} logistic {logistic:.3}"));
    }
    let elapsed = t0.elapsed();
    for l in &lines {
        println!("    {l}");
    }
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    ensure!(wins >= 8, "only {wins}/10 seeds met forest >= 0.90 and >= logistic");
    Ok(format!(
        "{wins}/10 seeds, {:.1?}; substitute for the unreproducible 76.67% figure (dataset not published)",
        elapsed
    ))
}

fn alert_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut fires = 0usize;
    for n in 0..10_000 {
        let len = rng.random_range(0..=200);
        let labels: Vec<Level> = (0..len)
            .map(|_| if rng.random_bool(0.7) { Level::L1 } else { Level::from_index(rng.random_range(1..4)) })
            .collect();
        let mut t = rng.random_range(0..1_000_000u64);
        let ts: Vec<u64> = (0..len)
            .map(|_| {
                t += rng.random_range(0..60);
                t
            })
            .collect();
        let cfg = AlertConfig {
            cooldown_ms: if rng.random_bool(0.3) { 0 } else { rng.random_range(1..500) },
            ..AlertConfig::with_k(rng.random_range(1..10))
        };
        let got = common::update_fires(&labels, &ts, &cfg);
        let want = common::oracle_fires(&labels, &ts, &cfg);
        ensure!(got == want, "sequence {n}: update fired at {got:?}, oracle {want:?}");
        fires += got.len();
    }
    let labels: Vec<Level> = [1u8, 1, 2, 1, 1, 1].iter().map(|&l| Level::try_from(l).unwrap()).collect();
    let ts: Vec<u64> = (0..6).map(|i| i * 33).collect();
    let got = common::update_fires(&labels, &ts, &AlertConfig::with_k(3));
    ensure!(got == vec![5], "[1,1,2,1,1,1] k=3 fired at {got:?}");
    Ok(format!("10000 sequences agree ({fires} fires); [1,1,2,1,1,1] fires once at position 6"))
}

fn webhook_contract() -> Outcome {
    let event = activenet::alert::AlertEvent {
        person_id: 1,
        timestamp_ms: 0,
        message: "test".into(),
        streak_len: 5,
    };
    let quick = RetryPolicy {
        max_retries: 3,
        base_delay: Duration::from_millis(20),
        timeout: Duration::from_millis(300),
    };
    let ok = StubServer::start(vec![Reply::Status(204)]);
    let d = send_webhook(&event, &WebhookUrl::new(&ok.url), quick).map_err(|e| e.to_string())?;
    ensure!(d.attempts == 1, "2xx took {} attempts", d.attempts);

    let nf = StubServer::start(vec![Reply::Status(404)]);
    let r = send_webhook(&event, &WebhookUrl::new(&nf.url), quick);
    ensure!(
        matches!(r, Err(WebhookError::DeliveryFailed { attempts: 1, .. })) && nf.hits() == 1,
        "404: {r:?}, {} requests",
        nf.hits()
    );

    let stall = Reply::Stall(Duration::from_secs(2));
    let flaky = StubServer::start(vec![stall, stall, Reply::Status(200)]);
    let d = send_webhook(&event, &WebhookUrl::new(&flaky.url), quick).map_err(|e| e.to_string())?;
    ensure!(d.attempts == 3, "timeout x2 then 200 took {} attempts", d.attempts);

    // Frame latency with a webhook that never answers within its timeout.
    let model = bench_model();
    let frames: Vec<KeypointFrame> = synthesize(&SyntheticPoseParams { seed: 3, ..Default::default() }, 2_500)
        .into_iter()
        .map(|s| s.frame)
        .collect();
    let cfg = AlertConfig {
        cooldown_ms: 0,
        ..AlertConfig::with_k(1)
    };
    let lat = |sink: AlertSink| -> Vec<f64> {
        let mut engine = StreamEngine::new(model.clone(), cfg.clone(), sink);
        let mut out = Vec::with_capacity(frames.len());
        for f in &frames {
            let t = Instant::now();
            let _ = std::hint::black_box(engine.process_frame(f));
            out.push(t.elapsed().as_secs_f64() * 1e3);
        }
        out
    };
    let mut base = lat(AlertSink::Discard);
    let stalled = StubServer::start(vec![Reply::Stall(Duration::from_secs(5))]);
    let client = WebhookClient::new(&WebhookUrl::new(&stalled.url), RetryPolicy::default()).map_err(|e| e.to_string())?;
    let worker = DeliveryWorker::spawn(256, move |e| client.send(e));
    let mut with_stall = lat(AlertSink::Deliver(worker));
    let deadline = Instant::now() + Duration::from_secs(2);
    while stalled.hits() == 0 && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(10));
    }
    ensure!(stalled.hits() >= 1, "stalled stub never received a delivery");
    let p_base = common::percentile(&mut base, 0.99);
    let p_stall = common::percentile(&mut with_stall, 0.99);
    let added = p_stall - p_base;
    ensure!(added < 1.0, "p99 added latency {added:.3} ms");
    Ok(format!(
        "2xx ok, 404 single attempt, 3rd attempt succeeds; p99 {p_base:.4} ms -> {p_stall:.4} ms with 5 s stall"
    ))
}

fn bench_model() -> TrainedModel {
    let ds = filter_rows(&labeled(&SyntheticPoseParams { seed: 42, ..Default::default() }, 100));
    let stats = fit(&ds).unwrap();
    let (x, y) = transform_all(&ds, &stats);
    let forest = train_forest(&x, &y, &Hyperparams { seed: 42, ..Hyperparams::default() }).unwrap();
    TrainedModel {
        classifier: Classifier::Forest(forest),
        stats,
        seed: 42,
        logistic_params: None,
    }
}

fn throughput() -> Outcome {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let model_path = dir.path().join("model.json");
    bench_model().save(&model_path).map_err(|e| e.to_string())?;
    let input = dir.path().join("frames.ndjson");
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(&input).map_err(|e| e.to_string())?);
        for s in synthesize(&SyntheticPoseParams { seed: 8, ..Default::default() }, 25_000) {
            write_frame(&mut w, &s.frame, None).map_err(|e| e.to_string())?;
        }
    }
    let cfg = PipelineConfig {
        model: Some(model_path),
        input: Some(input.display().to_string()),
        output: Some(dir.path().join("out.ndjson")),
        ..PipelineConfig::default()
    };
    let t0 = Instant::now();
    let summary = run_stream(&cfg, false).map_err(|e| e.to_string())?;
    let wall = t0.elapsed().as_secs_f64();
    let fps = summary.frames as f64 / wall;
    ensure!(summary.frames == 100_000, "processed {} frames", summary.frames);
    ensure!(fps >= 10_000.0, "{fps:.0} frames/sec");
    Ok(format!(
        "100000 frames in {wall:.2} s = {fps:.0} frames/sec ({} cores available)",
        std::thread::available_parallelism().map_or(1, |n| n.get())
    ))
}

fn determinism() -> Outcome {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let data = dir.path().join("synth.ndjson");
    let mut f = std::fs::File::create(&data).map_err(|e| e.to_string())?;
    cmd_synth(&SyntheticPoseParams { seed: 5, ..Default::default() }, 100, &mut f).map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        cmd_train(&TrainOptions {
            seed: 5,
            ..TrainOptions::new(&data, out)
        })
        .map_err(|e| e.to_string())?;
    }
    let (ma, mb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    ensure!(ma == mb, "model files differ");

    let (oa, ob) = (dir.path().join("oa.ndjson"), dir.path().join("ob.ndjson"));
    for out in [&oa, &ob] {
        let cfg = PipelineConfig {
            model: Some(a.clone()),
            input: Some(data.display().to_string()),
            output: Some(out.clone()),
            dry_run: true,
            alert: AlertConfig {
                cooldown_ms: 0,
                ..AlertConfig::with_k(3)
            },
            ..PipelineConfig::default()
        };
        run_stream(&cfg, false).map_err(|e| e.to_string())?;
    }
    let (ra, rb) = (std::fs::read(&oa).unwrap(), std::fs::read(&ob).unwrap());
    ensure!(ra == rb, "stream outputs differ");
    Ok(format!(
        "model files identical ({} bytes); stream outputs identical ({} lines)",
        ma.len(),
        ra.iter().filter(|&&c| c == b'\n').count()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("encoding invariance", encoding_invariance),
        ("encoding arity/NaN", encoding_arity_nan),
        ("preprocess", preprocess_suite),
        ("classifier correctness", classifier_correctness),
        ("headline benchmark", headline_benchmark),
        ("alert oracle", alert_oracle),
        ("webhook contract", webhook_contract),
        ("throughput", throughput),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, run) in criteria {
        let result = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match result {
            Ok(detail) => println!("acceptance: PASS {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("acceptance: FAIL {name}: {reason}");
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

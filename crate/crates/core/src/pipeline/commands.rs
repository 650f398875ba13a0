//! Batch commands: synth, encode, train and evaluate.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::data::{csv_header, csv_row, encoding_json, load_labeled, read_text, write_frame, LineError};
use super::model_file::TrainedModel;
use super::synth::{synthesize, SyntheticPoseParams};
use super::PipelineError;
use crate::encoder::encode;
use crate::forest::{
    default_grid, evaluate, grid_search, kfold_cv, stratified_split, CvReport, ForestError, GridReport,
    Hyperparams, Learner, LogisticParams, Metrics,
};
use crate::level::Level;
use crate::preprocess::{filter_rows, fit, transform, transform_all, LabeledDataset};
use crate::skeleton::parse_record;

pub const SYNTH_NOTE: &str = "note: class bands of `activenet synth` data are invented slump-angle ranges, \
not labels observed on real footage";

fn io_err(e: std::io::Error) -> PipelineError {
    PipelineError::Io(e.to_string())
}

/// Writes `4 * n_per_class` labeled frames as NDJSON.
pub fn cmd_synth(params: &SyntheticPoseParams, n_per_class: usize, out: &mut impl Write) -> Result<usize, PipelineError> {
    if n_per_class == 0 {
        return Err(PipelineError::Usage("need at least one frame per class".into()));
    }
    if !(0.0..=1.0).contains(&params.occlusion_prob) || !(params.noise_sigma >= 0.0 && params.noise_sigma.is_finite()) {
        return Err(PipelineError::Usage("noise must be >= 0 and occlusion within [0, 1]".into()));
    }
    let samples = synthesize(params, n_per_class);
    for s in &samples {
        write_frame(out, &s.frame, Some(s.label)).map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;
    Ok(samples.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodeFormat {
    Csv,
    Ndjson,
}

impl FromStr for EncodeFormat {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(EncodeFormat::Csv),
            "ndjson" | "json" => Ok(EncodeFormat::Ndjson),
            _ => Err(PipelineError::Usage(format!("unknown encoding format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodeSummary {
    pub rows: usize,
    pub errors: Vec<LineError>,
}

/// Encodes every parseable frame. Labels are carried over when every
/// parsed record has one.
pub fn cmd_encode(input: &Path, out: &mut impl Write, format: EncodeFormat) -> Result<EncodeSummary, PipelineError> {
    let text = read_text(input)?;
    let mut frames = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = parse_record(line).and_then(|rec| {
            let label = rec.label;
            rec.into_frame().map(|f| (f, label))
        });
        match parsed {
            Ok(v) => frames.push(v),
            Err(e) => errors.push(LineError {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    let labels: Option<Vec<Level>> = if frames.is_empty() {
        None
    } else {
        frames
            .iter()
            .map(|(_, l)| l.and_then(|raw| Level::try_from(raw).ok()))
            .collect()
    };
    if format == EncodeFormat::Csv {
        writeln!(out, "{}", csv_header(labels.is_some())).map_err(io_err)?;
    }
    for (i, (frame, _)) in frames.iter().enumerate() {
        let enc = encode(frame);
        let label = labels.as_ref().map(|l| l[i]);
        let line = match format {
            EncodeFormat::Csv => csv_row(&enc, label),
            EncodeFormat::Ndjson => encoding_json(frame, &enc, label),
        };
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;
    Ok(EncodeSummary {
        rows: frames.len(),
        errors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Forest,
    Tree,
    Logistic,
}

impl FromStr for ModelKind {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forest" => Ok(ModelKind::Forest),
            "tree" => Ok(ModelKind::Tree),
            "logistic" => Ok(ModelKind::Logistic),
            _ => Err(PipelineError::Usage(format!("unknown model kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub data: PathBuf,
    pub out: PathBuf,
    pub kind: ModelKind,
    /// Grid-search the forest; otherwise `forest_params` is used as given.
    pub search: bool,
    pub grid: Option<Vec<Hyperparams>>,
    pub forest_params: Hyperparams,
    pub logistic_params: LogisticParams,
    pub folds: usize,
    pub seed: u64,
    /// Share of each class held out for the final evaluation; 0 trains on
    /// everything.
    pub test_fraction: f64,
    /// Also cross-validate the tree and logistic baselines.
    pub baselines: bool,
}

impl TrainOptions {
    pub fn new(data: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        TrainOptions {
            data: data.into(),
            out: out.into(),
            kind: ModelKind::Forest,
            search: true,
            grid: None,
            forest_params: Hyperparams::default(),
            logistic_params: LogisticParams::default(),
            folds: 5,
            seed: 0,
            test_fraction: 0.2,
            baselines: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifierRow {
    pub learner: Learner,
    pub cv: Option<CvReport>,
    pub holdout_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub rows_loaded: usize,
    pub rows_dropped: usize,
    pub bad_lines: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub chosen: Learner,
    pub grid: Option<GridReport>,
    pub classifiers: Vec<ClassifierRow>,
    pub holdout: Option<Metrics>,
}

fn opt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |a| format!("{:.2}%", a * 100.0))
}

impl TrainReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "rows: {} loaded, {} dropped (>= 8 invalid angles), {} bad lines; train {} / test {}",
            self.rows_loaded, self.rows_dropped, self.bad_lines, self.train_rows, self.test_rows
        );
        if let Some(g) = &self.grid {
            let _ = writeln!(s, "grid search: {} points, best {}", g.rows.len(), g.best().learner.describe());
        }
        let _ = writeln!(s, "\nClassifier-wise results");
        let _ = writeln!(s, "{:<12}{:>14}{:>14}", "Classifier", "CV accuracy", "Test accuracy");
        for row in &self.classifiers {
            let _ = writeln!(
                s,
                "{:<12}{:>14}{:>14}",
                row.learner.kind(),
                opt_pct(row.cv.as_ref().map(|c| c.mean_accuracy)),
                opt_pct(row.holdout_accuracy)
            );
        }
        if let Some(m) = &self.holdout {
            let _ = writeln!(s, "\nClass-wise results ({})", self.chosen.kind());
            s.push_str(&m.render_table());
        }
        let _ = writeln!(s, "\n{SYNTH_NOTE}");
        s
    }
}

fn cv_if_possible(ds: &LabeledDataset, folds: usize, learner: &Learner, seed: u64) -> Result<Option<CvReport>, ForestError> {
    match kfold_cv(ds, folds, learner, seed) {
        Ok(r) => Ok(Some(r)),
        Err(ForestError::TooFewRows { rows, k }) => {
            log::warn!("skipping {k}-fold CV of {}: only {rows} rows", learner.kind());
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn fit_and_score(
    learner: &Learner,
    train: &LabeledDataset,
    test: &LabeledDataset,
) -> Result<(TrainedModel, Option<Metrics>), PipelineError> {
    let stats = fit(train)?;
    let (x, y) = transform_all(train, &stats);
    let classifier = learner.fit(&x, &y)?;
    let holdout = if test.is_empty() {
        None
    } else {
        let (tx, ty) = transform_all(test, &stats);
        Some(evaluate(&classifier, &tx, &ty)?)
    };
    let model = TrainedModel {
        classifier,
        stats,
        seed: 0,
        logistic_params: match learner {
            Learner::Logistic(p) => Some(*p),
            _ => None,
        },
    };
    Ok((model, holdout))
}

/// Full training flow: load, filter, split, select, fit, evaluate, save.
pub fn cmd_train(opts: &TrainOptions) -> Result<TrainReport, PipelineError> {
    if !(0.0..1.0).contains(&opts.test_fraction) {
        return Err(PipelineError::Usage("test fraction must be within [0, 1)".into()));
    }
    if opts.folds < 2 {
        return Err(PipelineError::Usage("need at least 2 folds".into()));
    }
    let (raw, errors) = load_labeled(&opts.data)?;
    for e in &errors {
        log::warn!("{}: {e}", opts.data.display());
    }
    let ds = filter_rows(&raw);
    if ds.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let (train, test) = stratified_split(&ds, opts.test_fraction, opts.seed);

    let mut grid_report = None;
    let chosen = match opts.kind {
        ModelKind::Tree => Learner::Tree(Hyperparams {
            seed: opts.seed,
            ..Hyperparams::single_tree()
        }),
        ModelKind::Logistic => Learner::Logistic(opts.logistic_params),
        ModelKind::Forest if opts.search => {
            let grid: Vec<Learner> = opts
                .grid
                .clone()
                .unwrap_or_else(|| default_grid(opts.seed))
                .into_iter()
                .map(Learner::Forest)
                .collect();
            match grid_search(&train, &grid, opts.folds, opts.seed) {
                Ok(g) => {
                    let best = g.best().learner.clone();
                    grid_report = Some(g);
                    best
                }
                Err(ForestError::TooFewRows { rows, k }) => {
                    log::warn!("skipping grid search: {rows} rows cannot fill {k} folds");
                    Learner::Forest(Hyperparams {
                        seed: opts.seed,
                        ..opts.forest_params.clone()
                    })
                }
                Err(e) => return Err(e.into()),
            }
        }
        ModelKind::Forest => Learner::Forest(Hyperparams {
            seed: opts.seed,
            ..opts.forest_params.clone()
        }),
    };

    let mut learners = vec![chosen.clone()];
    if opts.baselines {
        for b in [
            Learner::Tree(Hyperparams {
                seed: opts.seed,
                ..Hyperparams::single_tree()
            }),
            Learner::Logistic(opts.logistic_params),
        ] {
            if b.kind() != chosen.kind() {
                learners.push(b);
            }
        }
    }

    let mut classifiers = Vec::new();
    let mut model = None;
    let mut holdout = None;
    for (i, learner) in learners.iter().enumerate() {
        let cv = match (&grid_report, i) {
            (Some(g), 0) => Some(g.best().cv.clone()),
            _ => cv_if_possible(&train, opts.folds, learner, opts.seed)?,
        };
        let (m, h) = fit_and_score(learner, &train, &test)?;
        classifiers.push(ClassifierRow {
            learner: learner.clone(),
            cv,
            holdout_accuracy: h.as_ref().map(|h| h.accuracy),
        });
        if i == 0 {
            model = Some(m);
            holdout = h;
        }
    }
    let mut model = model.expect("chosen learner is trained first");
    model.seed = opts.seed;
    model.save(&opts.out)?;

    Ok(TrainReport {
        rows_loaded: raw.len(),
        rows_dropped: ds.dropped,
        bad_lines: errors.len(),
        train_rows: train.len(),
        test_rows: test.len(),
        chosen,
        grid: grid_report,
        classifiers,
        holdout,
    })
}

/// Evaluates a saved model on a labeled file. With `dump`, writes one
/// `true,predicted` CSV row per evaluated row.
pub fn cmd_evaluate(model_path: &Path, data: &Path, dump: Option<&Path>) -> Result<Metrics, PipelineError> {
    let model = TrainedModel::load(model_path)?;
    let (raw, errors) = load_labeled(data)?;
    for e in &errors {
        log::warn!("{}: {e}", data.display());
    }
    let ds = filter_rows(&raw);
    if ds.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let truth = ds.labels();
    let predicted = ds
        .rows
        .iter()
        .map(|r| model.classifier.predict_label(&transform(&r.encoding, &model.stats)))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(path) = dump {
        let mut s = String::from("true,predicted\n");
        for (t, p) in truth.iter().zip(&predicted) {
            let _ = writeln!(s, "{},{}", t.number(), p.number());
        }
        std::fs::write(path, s).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(Metrics::from_pairs(&truth, &predicted)?)
}


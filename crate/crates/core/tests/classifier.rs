mod common;

use activenet::forest::{
    evaluate, f1_score, train_forest, train_logistic, train_tree, Classifier, Hyperparams, LogisticModel,
    LogisticParams, Metrics,
};
use activenet::level::Level;
use activenet::preprocess::FeatureRow;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<FeatureRow> {
    (0..n).map(|_| std::array::from_fn(|_| rng.random_range(-3.0..3.0))).collect()
}

/// Labels from a fixed nonlinear rule, so equal rows always share a label.
fn rule(x: &FeatureRow) -> Level {
    let s = x[0] + 0.5 * x[3] - x[7] * x[10].signum();
    Level::from_index(((s + 6.0) as usize / 3).min(3))
}

#[test]
fn forest_of_one_matches_tree() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random_rows(&mut rng, 300);
    let y: Vec<Level> = x.iter().map(rule).collect();
    let params = Hyperparams {
        n_trees: 1,
        bootstrap: false,
        max_features: 15,
        max_depth: Some(6),
        ..Hyperparams::default()
    };
    let tree = train_tree(&x, &y, &params).unwrap();
    let forest = train_forest(&x, &y, &params).unwrap();
    for q in random_rows(&mut rng, 100) {
        let a = tree.predict(&q).unwrap();
        let b = forest.predict(&q).unwrap();
        assert_eq!(a.label, b.label);
    }
}

#[test]
fn unlimited_tree_memorizes_consistent_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_rows(&mut rng, 400);
    let y: Vec<Level> = x.iter().map(rule).collect();
    let tree = train_tree(&x, &y, &Hyperparams::single_tree()).unwrap();
    let m = evaluate(&Classifier::Tree(tree), &x, &y).unwrap();
    assert_eq!(m.accuracy, 1.0);
}

fn loss_at(m: &LogisticModel, x: &[FeatureRow], y: &[Level], l2: f64) -> f64 {
    m.loss(x, y, l2)
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x = random_rows(&mut rng, 60);
    let y: Vec<Level> = (0..60).map(|_| Level::from_index(rng.random_range(0..4))).collect();
    let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..16).map(|_| rng.random_range(-0.5..0.5)).collect()).collect();
    let model = LogisticModel::from_rows(&rows).unwrap();
    let l2 = 1e-3;
    let grad = model.gradient(&x, &y, l2).to_rows();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for c in 0..4 {
        for j in 0..16 {
            let mut plus = rows.clone();
            let mut minus = rows.clone();
            plus[c][j] += h;
            minus[c][j] -= h;
            let fd = (loss_at(&LogisticModel::from_rows(&plus).unwrap(), &x, &y, l2)
                - loss_at(&LogisticModel::from_rows(&minus).unwrap(), &x, &y, l2))
                / (2.0 * h);
            let g = grad[c][j];
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-4);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-5, "worst relative error {worst}");
}

#[test]
fn logistic_descent_reduces_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_rows(&mut rng, 200);
    let y: Vec<Level> = x.iter().map(rule).collect();
    let p = LogisticParams::default();
    let start = LogisticModel::zeros().loss(&x, &y, p.l2);
    let m = train_logistic(&x, &y, &p).unwrap();
    assert!(m.loss(&x, &y, p.l2) < start * 0.7);
}

#[test]
fn metrics_match_counting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let n = rng.random_range(1..80);
        let truth: Vec<Level> = (0..n).map(|_| Level::from_index(rng.random_range(0..4))).collect();
        let pred: Vec<Level> = truth
            .iter()
            .map(|&t| if rng.random_bool(0.6) { t } else { Level::from_index(rng.random_range(0..4)) })
            .collect();
        let m = Metrics::from_pairs(&truth, &pred).unwrap();
        let o = common::oracle_metrics(&truth, &pred);
        assert!((m.accuracy - o.accuracy).abs() < 1e-12);
        for c in 0..4 {
            assert!((m.per_class[c].precision - o.precision[c]).abs() < 1e-12);
            assert!((m.per_class[c].recall - o.recall[c]).abs() < 1e-12);
            assert!((m.per_class[c].f1 - o.f1[c]).abs() < 1e-12);
        }
    }
}

#[test]
fn f1_of_published_rows() {
    assert!((f1_score(0.989, 0.820) - 0.896).abs() <= 0.001);
    assert!((f1_score(1.000, 0.745) - 0.853).abs() <= 0.001);
    assert_eq!(f1_score(0.0, 0.0), 0.0);
}

#[test]
fn probabilities_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_rows(&mut rng, 120);
    let y: Vec<Level> = x.iter().map(rule).collect();
    let models = [
        Classifier::Tree(train_tree(&x, &y, &Hyperparams::single_tree()).unwrap()),
        Classifier::Forest(train_forest(&x, &y, &Hyperparams { n_trees: 15, seed: 1, ..Hyperparams::default() }).unwrap()),
        Classifier::Logistic(train_logistic(&x, &y, &LogisticParams::default()).unwrap()),
    ];
    for m in &models {
        for q in random_rows(&mut rng, 50) {
            let p = m.predict(&q).unwrap();
            assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9, "{}", m.kind());
            assert!(p.probs.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

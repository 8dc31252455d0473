//! Multi-label node classification on top of an embedding.
//!
//! The protocol: sample a fraction of the labeled nodes for training, fit one
//! L2-regularized logistic regression per class, give each test node as many
//! top-scoring classes as it has true labels, and score with Micro- and
//! Macro-F1. Every (ratio, repeat) cell uses its own derived seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::{Fingerprint, Hasher};

/// Class assignments for the labeled subset of an embedding's rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    class_names: Vec<String>,
    /// `(embedding row, sorted distinct classes)`, ordered by row.
    nodes: Vec<(usize, Vec<usize>)>,
}

impl LabelSet {
    /// Nodes with an empty class list are left out.
    pub fn new(class_names: Vec<String>, nodes: Vec<(usize, Vec<usize>)>) -> Result<Self> {
        let c = class_names.len();
        let mut kept = Vec::with_capacity(nodes.len());
        for (row, mut classes) in nodes {
            if let Some(&bad) = classes.iter().find(|&&k| k >= c) {
                return Err(Error::Data(format!(
                    "node row {row} has class index {bad} but only {c} classes exist"
                )));
            }
            classes.sort_unstable();
            classes.dedup();
            if !classes.is_empty() {
                kept.push((row, classes));
            }
        }
        kept.sort_by_key(|(row, _)| *row);
        if kept.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Data("a node row is listed twice".into()));
        }
        Ok(LabelSet {
            class_names,
            nodes: kept,
        })
    }

    /// Single-label convenience constructor: `labels[row] = Some(class)`.
    pub fn single(num_classes: usize, labels: &[Option<usize>]) -> Result<Self> {
        let names = (0..num_classes).map(|k| k.to_string()).collect();
        let nodes = labels
            .iter()
            .enumerate()
            .filter_map(|(row, l)| l.map(|k| (row, vec![k])))
            .collect();
        LabelSet::new(names, nodes)
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Number of labeled nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn row(&self, node: usize) -> usize {
        self.nodes[node].0
    }

    pub fn classes(&self, node: usize) -> &[usize] {
        &self.nodes[node].1
    }

    pub fn max_row(&self) -> Option<usize> {
        self.nodes.last().map(|(r, _)| *r)
    }
}

/// How scores become predicted label sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// Predict as many top-scored classes as the node has true labels.
    #[default]
    TopL,
    /// Predict every class scoring at least the threshold.
    Threshold(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub train_ratios: Vec<f64>,
    pub repeats: usize,
    pub seed: u64,
    /// L2 penalty `λ` on the weights (the intercept is not penalized).
    pub lambda: f64,
    pub iterations: usize,
    pub rule: DecisionRule,
    /// Split each primary-label stratum separately instead of the whole set.
    #[serde(default)]
    pub stratified: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            train_ratios: (1..=9).map(|k| k as f64 / 10.0).collect(),
            repeats: 10,
            seed: 0,
            lambda: 1.0,
            iterations: 300,
            rule: DecisionRule::TopL,
            stratified: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.train_ratios.is_empty() {
            return Err(Error::Parameter("at least one training ratio is required".into()));
        }
        for &r in &self.train_ratios {
            check_ratio(r)?;
        }
        if self.repeats == 0 {
            return Err(Error::Parameter("repeats must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Parameter("lambda must be finite and nonnegative".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Parameter("optimizer iterations must be positive".into()));
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> Fingerprint {
        let mut h = Hasher::new();
        h.str("eval");
        for &r in &self.train_ratios {
            h.f64(r);
        }
        h.usize(self.repeats)
            .usize(self.seed as usize)
            .f64(self.lambda)
            .usize(self.iterations);
        match self.rule {
            DecisionRule::TopL => h.str("top-l"),
            DecisionRule::Threshold(t) => h.str("threshold").f64(t),
        };
        if self.stratified {
            h.str("stratified");
        }
        h.finish()
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if ratio > 0.0 && ratio < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("training ratio {ratio} is not in (0, 1)")))
    }
}

/// Positions into a [`LabelSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Uniform random partition of the labeled nodes with
/// `⌈ratio · n_labeled⌉` training nodes.
pub fn split(labels: &LabelSet, ratio: f64, seed: u64) -> Result<Split> {
    check_ratio(ratio)?;
    let n = labels.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = order.split_off(train_count(ratio, n));
    Ok(Split { train: order, test })
}

/// Like [`split`], but applied within each group of nodes sharing the same
/// lowest class index, so every such class keeps roughly `ratio` of its
/// nodes for training.
pub fn stratified_split(labels: &LabelSet, ratio: f64, seed: u64) -> Result<Split> {
    check_ratio(ratio)?;
    let mut strata: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for node in 0..labels.len() {
        let key = labels.classes(node).iter().copied().min().unwrap_or(usize::MAX);
        strata.entry(key).or_default().push(node);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut members in strata.into_values() {
        members.shuffle(&mut rng);
        let rest = members.split_off(train_count(ratio, members.len()));
        train.extend(members);
        test.extend(rest);
    }
    Ok(Split { train, test })
}

fn train_count(ratio: f64, n: usize) -> usize {
    // absorb representation error such as 0.3 * 10 = 3.0000000000000004
    (((ratio * n as f64) - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// One logistic regression per class, sharing the feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OvrModel {
    /// `d × c`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl OvrModel {
    /// `σ(x·w_k + b_k)` for every row and class, `rows × c`.
    pub fn scores(&self, rows: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = rows.dot(&self.weights);
        z += &self.bias;
        z.mapv_inplace(sigmoid);
        z
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Largest eigenvalue of `XᵀX`, estimated by power iteration and padded.
fn gram_spectral_bound(x: ArrayView2<'_, f64>) -> f64 {
    let d = x.ncols();
    let frob: f64 = x.iter().map(|v| v * v).sum();
    if frob == 0.0 {
        return 0.0;
    }
    let mut v = Array1::from_elem(d, 1.0 / (d as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..50 {
        let w = x.t().dot(&x.dot(&v));
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            break;
        }
        estimate = v.dot(&w);
        v = w / norm;
    }
    (1.1 * estimate).min(frob).max(frob / d as f64)
}

/// Fits `c` independent L2-regularized logistic regressions on the training
/// rows by accelerated full-batch gradient descent with a fixed step.
///
/// Per class it minimizes `(1/N) [Σ_i log(1 + exp(−y_i (x_i·w + b))) + (λ/2)‖w‖²]`.
pub fn train_ovr(
    embedding: ArrayView2<'_, f64>,
    labels: &LabelSet,
    train: &[usize],
    lambda: f64,
    iterations: usize,
) -> Result<OvrModel> {
    if embedding.ncols() == 0 {
        return Err(Error::Parameter("embedding has no columns".into()));
    }
    if train.is_empty() {
        return Err(Error::Parameter("no training nodes".into()));
    }
    if let Some(row) = labels.max_row() {
        if row >= embedding.nrows() {
            return Err(Error::Shape(format!(
                "label row {row} outside an embedding with {} rows",
                embedding.nrows()
            )));
        }
    }
    if embedding.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("embedding contains NaN or infinity".into()));
    }

    let c = labels.num_classes();
    let d = embedding.ncols();
    let n = train.len() as f64;
    let rows: Vec<usize> = train.iter().map(|&t| labels.row(t)).collect();
    let x = embedding.select(Axis(0), &rows);
    let mut targets = Array2::<f64>::zeros((train.len(), c));
    for (i, &t) in train.iter().enumerate() {
        for &k in labels.classes(t) {
            targets[[i, k]] = 1.0;
        }
    }

    // Block Lipschitz constants; halving each step keeps the joint update
    // stable across the weight and intercept blocks.
    let lip_w = (0.25 * gram_spectral_bound(x.view()) + lambda) / n;
    let step_w = if lip_w > 0.0 { 0.5 / lip_w } else { 0.0 };
    let step_b = 0.5 / 0.25;

    let grad = |w: &Array2<f64>, b: &Array1<f64>| {
        let mut err = x.dot(w);
        err += b;
        err.mapv_inplace(sigmoid);
        err -= &targets;
        let mut gw = x.t().dot(&err);
        gw.scaled_add(lambda, w);
        gw /= n;
        let gb = err.sum_axis(Axis(0)) / n;
        (gw, gb)
    };

    let mut w = Array2::<f64>::zeros((d, c));
    let mut b = Array1::<f64>::zeros(c);
    let mut w_look = w.clone();
    let mut b_look = b.clone();
    let mut momentum = 1.0f64;
    for _ in 0..iterations {
        let (gw, gb) = grad(&w_look, &b_look);
        let w_next = &w_look - &(gw * step_w);
        let b_next = &b_look - &(gb * step_b);
        let momentum_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / momentum_next;
        w_look = &w_next + &((&w_next - &w) * beta);
        b_look = &b_next + &((&b_next - &b) * beta);
        w = w_next;
        b = b_next;
        momentum = momentum_next;
    }
    if w.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Internal("logistic regression diverged".into()));
    }
    Ok(OvrModel { weights: w, bias: b })
}

/// Picks the `counts[i]` highest-scoring classes for row `i`, ties going to
/// the lower class index.
pub fn predict_top(scores: ArrayView2<'_, f64>, counts: &[usize]) -> Result<Vec<Vec<usize>>> {
    let c = scores.ncols();
    if counts.len() != scores.nrows() {
        return Err(Error::Shape(format!(
            "{} label counts for {} score rows",
            counts.len(),
            scores.nrows()
        )));
    }
    scores
        .rows()
        .into_iter()
        .zip(counts)
        .map(|(row, &l)| {
            if l == 0 || l > c {
                return Err(Error::Parameter(format!(
                    "cannot pick {l} labels out of {c} classes"
                )));
            }
            let mut order: Vec<usize> = (0..c).collect();
            order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            let mut picked = order[..l].to_vec();
            picked.sort_unstable();
            Ok(picked)
        })
        .collect()
}

/// Every class whose score reaches `threshold`.
pub fn predict_threshold(scores: ArrayView2<'_, f64>, threshold: f64) -> Vec<Vec<usize>> {
    scores
        .rows()
        .into_iter()
        .map(|row| (0..row.len()).filter(|&k| row[k] >= threshold).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub micro: f64,
    #[serde(rename = "macro")]
    pub macro_: f64,
}

/// Micro- and Macro-F1 from per-class TP/FP/FN counts. A class with
/// `2TP + FP + FN = 0` has F1 0 and still counts in the macro mean.
pub fn micro_macro_f1(predicted: &[Vec<usize>], truth: &[Vec<usize>], c: usize) -> Result<F1Scores> {
    if truth.is_empty() {
        return Err(Error::Data("cannot score an empty test set".into()));
    }
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} test nodes",
            predicted.len(),
            truth.len()
        )));
    }
    if c == 0 {
        return Err(Error::Parameter("no classes".into()));
    }
    let mut tp = vec![0u64; c];
    let mut fp = vec![0u64; c];
    let mut fn_ = vec![0u64; c];
    let mut flags = vec![0u8; c];
    for (pred, true_set) in predicted.iter().zip(truth) {
        for &k in pred.iter().chain(true_set) {
            if k >= c {
                return Err(Error::Parameter(format!("class {k} >= {c}")));
            }
        }
        for &k in pred {
            flags[k] |= 1;
        }
        for &k in true_set {
            flags[k] |= 2;
        }
        for k in pred.iter().chain(true_set) {
            match std::mem::take(&mut flags[*k]) {
                3 => tp[*k] += 1,
                1 => fp[*k] += 1,
                2 => fn_[*k] += 1,
                _ => {}
            }
        }
    }
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let (num, den) = (0..c).fold((0, 0), |(n, d), k| {
        (n + 2 * tp[k], d + 2 * tp[k] + fp[k] + fn_[k])
    });
    let macro_ = (0..c)
        .map(|k| ratio(2 * tp[k], 2 * tp[k] + fp[k] + fn_[k]))
        .sum::<f64>()
        / c as f64;
    Ok(F1Scores {
        micro: ratio(num, den),
        macro_,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    pub ratio: f64,
    pub repeat: usize,
    pub seed: u64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    /// Classes without a single training example in this split.
    pub absent_classes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub ratio: f64,
    pub micro_mean: f64,
    pub macro_mean: f64,
    pub micro_std: f64,
    pub macro_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub config_fingerprint: Fingerprint,
    pub embedding_fingerprint: Fingerprint,
    pub cells: Vec<EvalCell>,
    pub summaries: Vec<RatioSummary>,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn summary(&self, ratio: f64) -> Option<&RatioSummary> {
        self.summaries.iter().find(|s| (s.ratio - ratio).abs() < 1e-12)
    }

    /// Ratios as columns, one row per metric.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<16}", "Training Ratio");
        for s in &self.summaries {
            let _ = write!(out, "{:>9}", format!("{}%", (s.ratio * 100.0).round()));
        }
        out.push('\n');
        for (name, pick) in [
            ("Micro-F1", (|s: &RatioSummary| s.micro_mean) as fn(&RatioSummary) -> f64),
            ("Macro-F1", |s: &RatioSummary| s.macro_mean),
        ] {
            let _ = write!(out, "{name:<16}");
            for s in &self.summaries {
                let _ = write!(out, "{:>9.4}", pick(s));
            }
            out.push('\n');
        }
        out
    }
}

/// Content hash of a dense matrix.
pub fn matrix_fingerprint(m: ArrayView2<'_, f64>) -> Fingerprint {
    let mut h = Hasher::new();
    h.str("matrix").usize(m.nrows()).usize(m.ncols());
    for &v in m.iter() {
        h.f64(v);
    }
    h.finish()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Scores one split.
pub fn evaluate_split(
    embedding: ArrayView2<'_, f64>,
    labels: &LabelSet,
    split: &Split,
    cfg: &EvalConfig,
) -> Result<F1Scores> {
    let model = train_ovr(embedding, labels, &split.train, cfg.lambda, cfg.iterations)?;
    let rows: Vec<usize> = split.test.iter().map(|&t| labels.row(t)).collect();
    let scores = model.scores(embedding.select(Axis(0), &rows).view());
    let truth: Vec<Vec<usize>> = split.test.iter().map(|&t| labels.classes(t).to_vec()).collect();
    let predicted = match cfg.rule {
        DecisionRule::TopL => {
            let counts: Vec<usize> = truth.iter().map(Vec::len).collect();
            predict_top(scores.view(), &counts)?
        }
        DecisionRule::Threshold(t) => predict_threshold(scores.view(), t),
    };
    micro_macro_f1(&predicted, &truth, labels.num_classes())
}

/// Runs every (ratio, repeat) cell and aggregates per-ratio means.
pub fn evaluate(embedding: ArrayView2<'_, f64>, labels: &LabelSet, cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    if labels.len() < 2 {
        return Err(Error::Data("need at least two labeled nodes".into()));
    }
    let jobs: Vec<(usize, f64, usize)> = cfg
        .train_ratios
        .iter()
        .enumerate()
        .flat_map(|(ri, &r)| (0..cfg.repeats).map(move |rep| (ri, r, rep)))
        .collect();
    let cells: Vec<EvalCell> = jobs
        .par_iter()
        .map(|&(ri, ratio, repeat)| {
            let seed = cfg.seed.wrapping_add((ri * cfg.repeats + repeat) as u64);
            let sp = if cfg.stratified {
                stratified_split(labels, ratio, seed)?
            } else {
                split(labels, ratio, seed)?
            };
            if sp.test.is_empty() {
                return Err(Error::Data(format!("ratio {ratio} leaves no test nodes")));
            }
            let mut seen = vec![false; labels.num_classes()];
            for &t in &sp.train {
                for &k in labels.classes(t) {
                    seen[k] = true;
                }
            }
            let absent_classes = (0..seen.len()).filter(|&k| !seen[k]).collect();
            let f1 = evaluate_split(embedding, labels, &sp, cfg)?;
            Ok(EvalCell {
                ratio,
                repeat,
                seed,
                micro_f1: f1.micro,
                macro_f1: f1.macro_,
                absent_classes,
            })
        })
        .collect::<Result<_>>()?;

    let summaries = cfg
        .train_ratios
        .iter()
        .enumerate()
        .map(|(ri, &ratio)| {
            let block = &cells[ri * cfg.repeats..(ri + 1) * cfg.repeats];
            let (micro_mean, micro_std) = mean_std(&block.iter().map(|c| c.micro_f1).collect::<Vec<_>>());
            let (macro_mean, macro_std) = mean_std(&block.iter().map(|c| c.macro_f1).collect::<Vec<_>>());
            RatioSummary {
                ratio,
                micro_mean,
                macro_mean,
                micro_std,
                macro_std,
            }
        })
        .collect();
    let warnings = cells
        .iter()
        .filter(|c| !c.absent_classes.is_empty())
        .map(|c| {
            format!(
                "ratio {} repeat {}: classes {:?} have no training nodes and are never predicted positive",
                c.ratio, c.repeat, c.absent_classes
            )
        })
        .collect();
    Ok(EvalReport {
        config: cfg.clone(),
        config_fingerprint: cfg.fingerprint(),
        embedding_fingerprint: matrix_fingerprint(embedding),
        cells,
        summaries,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn split_sizes_and_determinism() {
        let labels = LabelSet::single(2, &[Some(0); 10]).unwrap();
        let s = split(&labels, 0.5, 7).unwrap();
        assert_eq!(s.train.len(), 5);
        assert_eq!(s.test.len(), 5);
        let mut all: Vec<_> = s.train.iter().chain(&s.test).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(s, split(&labels, 0.5, 7).unwrap());
        assert_eq!(split(&labels, 0.3, 1).unwrap().train.len(), 3);
        for bad in [0.0, 1.0, -0.1, 1.5] {
            assert!(split(&labels, bad, 0).is_err());
        }
    }

    #[test]
    fn stratified_split_keeps_class_proportions() {
        let classes: Vec<Option<usize>> = (0..30).map(|i| Some(usize::from(i >= 20))).collect();
        let labels = LabelSet::single(2, &classes).unwrap();
        let s = stratified_split(&labels, 0.5, 3).unwrap();
        assert_eq!(s.train.iter().filter(|&&t| t < 20).count(), 10);
        assert_eq!(s.train.iter().filter(|&&t| t >= 20).count(), 5);
        let mut all: Vec<_> = s.train.iter().chain(&s.test).copied().collect();
        all.sort();
        assert_eq!(all, (0..30).collect::<Vec<_>>());
        assert_eq!(s, stratified_split(&labels, 0.5, 3).unwrap());
    }

    #[test]
    fn split_ceiling_on_cora_size() {
        let labels = LabelSet::single(7, &vec![Some(0); 2708]).unwrap();
        assert_eq!(split(&labels, 0.1, 0).unwrap().train.len(), 271);
    }

    #[test]
    fn top_l_prediction() {
        let s = array![[0.9, 0.1, 0.5]];
        assert_eq!(predict_top(s.view(), &[1]).unwrap(), vec![vec![0]]);
        assert_eq!(predict_top(s.view(), &[2]).unwrap(), vec![vec![0, 2]]);
        let tie = array![[0.5, 0.5]];
        assert_eq!(predict_top(tie.view(), &[1]).unwrap(), vec![vec![0]]);
        assert!(predict_top(s.view(), &[4]).is_err());
        assert!(predict_top(s.view(), &[0]).is_err());
        assert_eq!(predict_threshold(s.view(), 0.5), vec![vec![0, 2]]);
    }

    #[test]
    fn f1_hand_example() {
        // c=2, TP=[1,2], FP=[0,1], FN=[1,0]
        let truth = vec![vec![0], vec![0], vec![1], vec![1]];
        let pred = vec![vec![0], vec![1], vec![1], vec![1]];
        let f = micro_macro_f1(&pred, &truth, 2).unwrap();
        assert!((f.micro - 0.75).abs() < 1e-15);
        assert!((f.macro_ - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-15);
        let perfect = micro_macro_f1(&truth, &truth, 2).unwrap();
        assert_eq!((perfect.micro, perfect.macro_), (1.0, 1.0));
        let wrong: Vec<Vec<usize>> = truth.iter().map(|t| vec![1 - t[0]]).collect();
        let zero = micro_macro_f1(&wrong, &truth, 2).unwrap();
        assert_eq!((zero.micro, zero.macro_), (0.0, 0.0));
        assert!(micro_macro_f1(&[], &[], 2).is_err());
    }

    #[test]
    fn unused_class_counts_as_zero_in_macro() {
        let truth = vec![vec![0], vec![1]];
        let f = micro_macro_f1(&truth, &truth, 3).unwrap();
        assert_eq!(f.micro, 1.0);
        assert!((f.macro_ - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn separable_toy_is_fit_exactly() {
        let x = array![[0.0, 1.0], [0.1, 0.9], [0.0, 1.2], [1.0, 0.0], [0.9, 0.1], [1.1, 0.0]];
        let labels = LabelSet::single(2, &[Some(0), Some(0), Some(0), Some(1), Some(1), Some(1)]).unwrap();
        let train: Vec<usize> = (0..6).collect();
        let model = train_ovr(x.view(), &labels, &train, 1.0, 300).unwrap();
        let pred = predict_top(model.scores(x.view()).view(), &[1; 6]).unwrap();
        let truth: Vec<Vec<usize>> = (0..6).map(|i| labels.classes(i).to_vec()).collect();
        assert_eq!(pred, truth);
    }

    #[test]
    fn all_positive_class_scores_high() {
        let x = array![[0.3, 1.0], [0.5, 0.2], [1.0, 0.7]];
        let labels = LabelSet::single(1, &[Some(0); 3]).unwrap();
        let model = train_ovr(x.view(), &labels, &[0, 1, 2], 1.0, 300).unwrap();
        assert!(model.scores(x.view()).iter().all(|&s| s > 0.5));
    }

    #[test]
    fn heavy_penalty_collapses_to_intercept() {
        let x = array![[0.0, 1.0], [0.2, 0.8], [1.0, 0.0], [0.9, 0.3], [0.5, 0.5]];
        let labels = LabelSet::single(2, &[Some(0), Some(0), Some(1), Some(1), Some(1)]).unwrap();
        let model = train_ovr(x.view(), &labels, &[0, 1, 2, 3, 4], 1e6, 300).unwrap();
        assert!(model.weights.iter().all(|w| w.abs() < 1e-4));
        // the unpenalized intercept tends to the class log-odds
        let prior = [0.4, 0.6];
        for (k, &p) in prior.iter().enumerate() {
            assert!((sigmoid(model.bias[k]) - p).abs() < 1e-3, "{}", sigmoid(model.bias[k]));
            for s in model.scores(x.view()).column(k) {
                assert!((s - sigmoid(model.bias[k])).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn non_finite_embedding_rejected() {
        let x = array![[f64::NAN, 1.0], [0.0, 1.0]];
        let labels = LabelSet::single(2, &[Some(0), Some(1)]).unwrap();
        assert!(matches!(
            train_ovr(x.view(), &labels, &[0, 1], 1.0, 10),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn single_cell_report_and_table() {
        let x = array![[0.0, 1.0], [0.1, 0.9], [0.0, 1.2], [1.0, 0.0], [0.9, 0.1], [1.1, 0.0]];
        let labels = LabelSet::single(2, &[Some(0), Some(0), Some(0), Some(1), Some(1), Some(1)]).unwrap();
        let cfg = EvalConfig {
            train_ratios: vec![0.5],
            repeats: 1,
            ..Default::default()
        };
        let report = evaluate(x.view(), &labels, &cfg).unwrap();
        assert_eq!(report.cells.len(), 1);
        assert_eq!(report, evaluate(x.view(), &labels, &cfg).unwrap());
        let table = report.to_table();
        assert!(table.starts_with("Training Ratio"));
        assert!(table.contains("50%"));
        assert!(table.contains("Micro-F1"));
    }

    #[test]
    fn label_set_validation() {
        assert!(LabelSet::new(vec!["a".into()], vec![(0, vec![1])]).is_err());
        assert!(LabelSet::new(vec!["a".into()], vec![(0, vec![0]), (0, vec![0])]).is_err());
        let l = LabelSet::new(vec!["a".into(), "b".into()], vec![(3, vec![1, 0, 1]), (1, vec![])]).unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(l.classes(0), &[0, 1]);
    }
}

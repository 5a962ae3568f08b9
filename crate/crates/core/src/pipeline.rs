//! The end-to-end experiment: datasets at every level, a chronological
//! train/test cut, an event-aware validation fold, the single models and
//! the voting ensembles, scored on the held-out period.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{align_scores, EnsembleConfig, EnsembleError, Mechanism, VoteMode};
use crate::eval::{baseline_all_anomalous, compute_metrics, EvalError, MetricsReport};
use crate::features::{build_dataset, FeatureDataset, FeatureError, Level, RowKey, Standardizer, WindowConfig};
use crate::graph::DynamicKnowledgeGraph;
use crate::labels::{chronological_cut, event_aware_split, expand_labels, AnomalyEvent, LabelError};
use crate::models::neural::{
    train_network_monitored, EpochRecord, Activation, CausalConvNet, DenseNet, Network, NeuralTrainConfig, SelfAttentionNet,
};
use crate::models::{
    hard_labels, train_boosted_stumps, train_isolation_forest, train_linear_svm, AnyModel, ModelError, ModelKind,
    Scorer, TrainConfig,
};
use crate::synth::ScenarioConfig;
use crate::ttl::Category;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Config(String),
}

/// Hyperparameters of every model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub svm: TrainConfig,
    pub xgb: TrainConfig,
    pub neural: NeuralTrainConfig,
    pub forest_trees: usize,
    pub forest_sample: usize,
    pub mlp_hidden: Vec<usize>,
    pub tcn_hidden: usize,
    pub tcn_kernel: usize,
    pub tcn_dilations: Vec<usize>,
    pub sa_d_model: usize,
    pub sa_d_ff: usize,
    pub sa_stacks: usize,
    /// Normal training rows kept for the neural models (all anomalous rows
    /// are kept); `0` keeps everything.
    pub neural_normal_rows: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            svm: TrainConfig {
                epochs: 10,
                learning_rate: 0.05,
                regularization: 1e-3,
                ..Default::default()
            },
            xgb: TrainConfig {
                epochs: 60,
                learning_rate: 0.3,
                regularization: 1.0,
                ..Default::default()
            },
            neural: NeuralTrainConfig {
                epochs: 12,
                ..Default::default()
            },
            forest_trees: 100,
            forest_sample: 256,
            mlp_hidden: vec![32, 16],
            tcn_hidden: 12,
            tcn_kernel: 2,
            tcn_dilations: vec![1, 2, 4],
            sa_d_model: 16,
            sa_d_ff: 32,
            sa_stacks: 2,
            neural_normal_rows: 3000,
        }
    }
}

/// Everything that determines a benchmark run besides the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub scenario: ScenarioConfig,
    pub window: WindowConfig,
    /// Leading fraction of snapshots used for training and validation.
    pub train_fraction: f64,
    pub threshold: f64,
    pub models: ModelSettings,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            window: WindowConfig::default(),
            train_fraction: 0.6,
            threshold: 0.5,
            models: ModelSettings::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.scenario
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("benchmark config serializes")
    }
}

/// One level's rows split into folds. Every fold is standardized with
/// statistics of the training fold.
#[derive(Debug, Clone)]
pub struct Folds {
    pub train: FeatureDataset<f64>,
    pub validation: FeatureDataset<f64>,
    pub test: FeatureDataset<f64>,
    pub standardizer: Standardizer<f64>,
    /// First timestamp of the held-out period.
    pub held_out_from: i64,
    pub split_warnings: Vec<String>,
}

/// Builds the dataset of `level`, labels it, cuts it chronologically and
/// splits the training period with [`event_aware_split`].
pub fn prepare_level(
    graph: &DynamicKnowledgeGraph<f64>,
    events: &[AnomalyEvent],
    level: Level,
    window: &WindowConfig,
    train_fraction: f64,
    target: Category,
    split_seed: u64,
) -> Result<Folds, PipelineError> {
    let ds = build_dataset(graph, level, window, target)?;
    prepare_dataset(ds, graph.timestamps(), events, window.normalize, train_fraction, split_seed)
}

/// Labels an already built dataset and derives its folds. `timestamps` are
/// the snapshot times the chronological cut is taken over.
pub fn prepare_dataset(
    mut ds: FeatureDataset<f64>,
    timestamps: &[i64],
    events: &[AnomalyEvent],
    normalize: bool,
    train_fraction: f64,
    split_seed: u64,
) -> Result<Folds, PipelineError> {
    ds.labels = Some(expand_labels(events, &ds.row_index)?);
    let cut = chronological_cut(timestamps, train_fraction);
    if cut == 0 || cut == timestamps.len() {
        return Err(PipelineError::Config(format!(
            "train fraction {train_fraction} leaves an empty period"
        )));
    }
    let t_cut = timestamps[cut];
    let early: Vec<usize> = (0..ds.len()).filter(|&i| ds.row_index[i].t < t_cut).collect();
    let late: Vec<usize> = (0..ds.len()).filter(|&i| ds.row_index[i].t >= t_cut).collect();
    let early_keys: Vec<RowKey> = early.iter().map(|&i| ds.row_index[i].clone()).collect();
    let plan = event_aware_split(&early_keys, events, &[], split_seed)?;
    let train: Vec<usize> = plan.train.iter().map(|&i| early[i]).collect();
    let validation: Vec<usize> = plan.validation.iter().map(|&i| early[i]).collect();
    let standardizer = if normalize {
        let s = Standardizer::fit(&ds.rows, &train)?;
        s.apply(&mut ds.rows);
        s
    } else {
        Standardizer {
            mean: vec![0.0; ds.width()],
            scale: vec![1.0; ds.width()],
        }
    };
    Ok(Folds {
        train: ds.subset(&train),
        validation: ds.subset(&validation),
        test: ds.subset(&late),
        standardizer,
        held_out_from: t_cut,
        split_warnings: plan.warnings,
    })
}

/// Distinct row timestamps in ascending order.
pub fn row_timestamps(ds: &FeatureDataset<f64>) -> Vec<i64> {
    let mut ts: Vec<i64> = ds.row_index.iter().map(|k| k.t).collect();
    ts.sort_unstable();
    ts.dedup();
    ts
}

fn labels_of(ds: &FeatureDataset<f64>) -> &[u8] {
    ds.labels.as_deref().unwrap_or(&[])
}

/// Keeps every anomalous row and at most `max_normal` normal rows.
fn subsample_normals(ds: &FeatureDataset<f64>, max_normal: usize, seed: u64) -> FeatureDataset<f64> {
    let labels = labels_of(ds);
    let mut normal: Vec<usize> = (0..ds.len()).filter(|&i| labels[i] == 0).collect();
    if max_normal == 0 || normal.len() <= max_normal {
        return ds.clone();
    }
    normal.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    normal.truncate(max_normal);
    let mut keep: Vec<usize> = (0..ds.len()).filter(|&i| labels[i] != 0).collect();
    keep.extend(normal);
    keep.sort_unstable();
    ds.subset(&keep)
}

fn validation_f1<N: Scorer<f64> + ?Sized>(net: &N, val: &FeatureDataset<f64>, threshold: f64) -> f64 {
    let labels = labels_of(val);
    if val.is_empty() || labels.iter().all(|&l| l == 0) {
        return 0.0;
    }
    let scores = net.predict_proba(&val.rows).unwrap_or_default();
    compute_metrics(&hard_labels(&scores, threshold), labels).map_or(0.0, |m| m.f1)
}

/// Trains the network and keeps the parameters of the epoch with the best
/// validation F1 (the latest such epoch on ties). Appends one record per
/// epoch to `curve`.
fn fit_network<N>(
    mut net: N,
    train: &FeatureDataset<f64>,
    val: Option<&FeatureDataset<f64>>,
    cfg: &NeuralTrainConfig,
    curve: &mut Vec<EpochRecord>,
) -> Result<N, ModelError>
where
    N: Network<f64> + Scorer<f64> + Clone,
{
    let mut best: Option<(f64, Vec<f64>)> = None;
    train_network_monitored(&mut net, &train.rows, labels_of(train), cfg, &mut |epoch, n: &N, loss| {
        let f1 = val.map(|v| validation_f1(n, v, cfg.threshold));
        if let Some(f1) = f1 {
            if best.as_ref().is_none_or(|(b, _)| f1 >= *b) {
                best = Some((f1, n.params().to_vec()));
            }
        }
        curve.push(EpochRecord {
            epoch,
            loss,
            validation_f1: f1,
        });
    })?;
    if let Some((_, p)) = best {
        net.params_mut().copy_from_slice(&p);
    }
    Ok(net)
}

/// Trains one model family on a prepared training fold. The validation
/// fold, when given, selects the epoch of neural models.
pub fn train_model(
    kind: ModelKind,
    train: &FeatureDataset<f64>,
    validation: Option<&FeatureDataset<f64>>,
    settings: &ModelSettings,
    seed: u64,
) -> Result<AnyModel<f64>, PipelineError> {
    train_model_logged(kind, train, validation, settings, seed).map(|(m, _)| m)
}

/// [`train_model`] that also returns the training curve of neural models
/// (empty for the classical ones).
pub fn train_model_logged(
    kind: ModelKind,
    train: &FeatureDataset<f64>,
    validation: Option<&FeatureDataset<f64>>,
    settings: &ModelSettings,
    seed: u64,
) -> Result<(AnyModel<f64>, Vec<EpochRecord>), PipelineError> {
    let mut curve = Vec::new();
    let labels = labels_of(train);
    let width = train.width();
    let neural = NeuralTrainConfig {
        seed,
        ..settings.neural
    };
    let nn_rows = || subsample_normals(train, settings.neural_normal_rows, seed ^ 0x9e37_79b9_7f4a_7c15);
    let model = match kind {
        ModelKind::If => AnyModel::If(train_isolation_forest(
            &train.rows,
            settings.forest_trees,
            settings.forest_sample.min(train.len()).max(2),
            seed,
        )?),
        ModelKind::Svm => AnyModel::Svm(train_linear_svm(&train.rows, labels, &TrainConfig { seed, ..settings.svm })?),
        ModelKind::Xgb => AnyModel::Xgb(train_boosted_stumps(
            &train.rows,
            labels,
            &TrainConfig { seed, ..settings.xgb },
        )?),
        ModelKind::Mlp => {
            let net = DenseNet::new(width, &settings.mlp_hidden, Activation::Relu, seed);
            AnyModel::Mlp(fit_network(net, &nn_rows(), validation, &neural, &mut curve)?)
        }
        ModelKind::Tcn => {
            let net = CausalConvNet::new(
                train.seq,
                width,
                settings.tcn_hidden,
                settings.tcn_kernel,
                &settings.tcn_dilations,
                seed,
            );
            AnyModel::Tcn(fit_network(net, &nn_rows(), validation, &neural, &mut curve)?)
        }
        ModelKind::Sa => {
            let net = SelfAttentionNet::new(
                train.seq,
                width,
                settings.sa_d_model,
                settings.sa_d_ff,
                settings.sa_stacks,
                seed,
            );
            AnyModel::Sa(fit_network(net, &nn_rows(), validation, &neural, &mut curve)?)
        }
    };
    Ok((model, curve))
}

/// A scored row set: one single model or one ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRun {
    pub name: String,
    /// `None` for single models.
    pub voting: Option<EnsembleConfig>,
    pub level: String,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
    pub metrics: MetricsReport,
}

impl ScoredRun {
    /// File-name friendly identifier, e.g. `sa_d3` or `xgb_svm_sa_soft_d2_d3`.
    pub fn slug(&self) -> String {
        let mut s = self.name.to_lowercase().replace(" + ", "_");
        if let Some(v) = &self.voting {
            s.push('_');
            s.push_str(&voting_label(v).replace(',', "_"));
        }
        s.push('_');
        s.push_str(&self.level.to_lowercase().replace('+', "_"));
        s
    }
}

pub fn voting_label(v: &EnsembleConfig) -> String {
    match (v.mode, v.mechanism) {
        (VoteMode::Soft, _) => "soft".into(),
        (VoteMode::Hard, Some(m)) => format!("hard,{m}"),
        (VoteMode::Hard, None) => "hard".into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutcome {
    pub seed: u64,
    /// Held-out entity rows every run is scored on.
    pub keys: Vec<RowKey>,
    pub actual: Vec<u8>,
    pub baseline: MetricsReport,
    pub singles: Vec<ScoredRun>,
    pub ensembles: Vec<ScoredRun>,
    /// Validation-fold F1 of each single model, in `singles` order.
    pub validation_f1: Vec<f64>,
    pub warnings: Vec<String>,
}

impl BenchmarkOutcome {
    pub fn single(&self, name: &str, level: &str) -> Option<&ScoredRun> {
        self.singles.iter().find(|r| r.name == name && r.level == level)
    }

    pub fn ensemble(&self, name: &str, voting: &str) -> Option<&ScoredRun> {
        self.ensembles
            .iter()
            .find(|r| r.name == name && r.voting.as_ref().map(voting_label).as_deref() == Some(voting))
    }
}

/// Single models of the report, in table order: (kind, level).
pub const SINGLE_MODELS: [(ModelKind, Level); 8] = [
    (ModelKind::Mlp, Level::D1),
    (ModelKind::Xgb, Level::D2),
    (ModelKind::Svm, Level::D2),
    (ModelKind::Tcn, Level::D1),
    (ModelKind::Tcn, Level::D2),
    (ModelKind::Sa, Level::D1),
    (ModelKind::Sa, Level::D2),
    (ModelKind::Sa, Level::D3),
];

/// Ensembles of the report: members as (kind, level), voting rule.
pub fn ensemble_plan(threshold: f64) -> Vec<(Vec<(ModelKind, Level)>, EnsembleConfig)> {
    use Level::*;
    use ModelKind::*;
    let soft = EnsembleConfig::soft(threshold);
    let unanimous = EnsembleConfig::hard(Mechanism::Unanimous, threshold);
    let majority = EnsembleConfig::hard(Mechanism::Majority, threshold);
    vec![
        (vec![(Xgb, D2), (If, D2)], soft),
        (vec![(Svm, D2), (If, D2)], unanimous),
        (vec![(Xgb, D2), (Svm, D2), (If, D2)], soft),
        (vec![(Xgb, D2), (Svm, D2), (Sa, D3), (If, D2)], unanimous),
        (vec![(Xgb, D2), (Svm, D2), (Sa, D3)], soft),
        (vec![(Xgb, D2), (Svm, D2), (Sa, D3)], majority),
    ]
}

/// Draws the per-stage seeds from one generator seeded by the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub split: u64,
    pub models: u64,
}

impl StageSeeds {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            split: rng.next_u64(),
            models: rng.next_u64(),
        }
    }

    /// Seed of one (model, level) pair, stable under reordering of the plan.
    pub fn model(&self, kind: ModelKind, level: Level) -> u64 {
        let tag = (kind as u64) << 8 | level as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.models ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        rng.next_u64()
    }
}

/// Runs every model and ensemble on one scenario's graph and labels.
pub fn run_benchmark(
    graph: &DynamicKnowledgeGraph<f64>,
    events: &[AnomalyEvent],
    cfg: &BenchmarkConfig,
    seed: u64,
) -> Result<BenchmarkOutcome, PipelineError> {
    let seeds = StageSeeds::new(seed);
    let target = cfg.scenario.target();
    let mut folds = Vec::new();
    let mut warnings = Vec::new();
    for level in [Level::D1, Level::D2, Level::D3] {
        let f = prepare_level(
            graph,
            events,
            level,
            &cfg.window,
            cfg.train_fraction,
            target,
            seeds.split,
        )?;
        warnings.extend(f.split_warnings.iter().map(|w| format!("{level}: {w}")));
        folds.push(f);
    }
    let fold = |l: Level| &folds[l as usize];
    let keys = fold(Level::D2).test.row_index.clone();
    if fold(Level::D1).test.row_index != keys {
        return Err(PipelineError::Config("D1 and D2 rows differ".into()));
    }
    let actual = labels_of(&fold(Level::D2).test).to_vec();
    let baseline = baseline_all_anomalous(&actual)?;

    let mut needed: Vec<(ModelKind, Level)> = SINGLE_MODELS.to_vec();
    for (members, _) in ensemble_plan(cfg.threshold) {
        for m in members {
            if !needed.contains(&m) {
                needed.push(m);
            }
        }
    }
    let mut test_scores: Vec<((ModelKind, Level), Vec<f64>)> = Vec::new();
    let mut val_f1 = Vec::new();
    for &(kind, level) in &needed {
        let f = fold(level);
        let model = train_model(kind, &f.train, Some(&f.validation), &cfg.models, seeds.model(kind, level))?;
        log::info!("trained {} on {level}", kind.label());
        let raw = model.predict_proba(&f.test.rows)?;
        let scores = align_scores(&f.test.row_index, &raw, &keys)?;
        if SINGLE_MODELS.contains(&(kind, level)) {
            val_f1.push(validation_f1(model.scorer(), &f.validation, cfg.threshold));
        }
        test_scores.push(((kind, level), scores));
    }
    let scores_of = |m: (ModelKind, Level)| -> &Vec<f64> {
        &test_scores.iter().find(|(k, _)| *k == m).expect("trained above").1
    };

    let mut singles = Vec::new();
    for &(kind, level) in &SINGLE_MODELS {
        let scores = scores_of((kind, level)).clone();
        let labels = hard_labels(&scores, cfg.threshold);
        singles.push(ScoredRun {
            name: kind.label().to_string(),
            voting: None,
            level: level.to_string(),
            metrics: compute_metrics(&labels, &actual)?,
            scores,
            labels,
        });
    }
    let mut ensembles = Vec::new();
    for (members, voting) in ensemble_plan(cfg.threshold) {
        let member_scores: Vec<Vec<f64>> = members.iter().map(|&m| scores_of(m).clone()).collect();
        let (scores, labels) = voting.combine(&member_scores)?;
        let mut levels: Vec<Level> = members.iter().map(|m| m.1).collect();
        levels.sort_unstable();
        levels.dedup();
        ensembles.push(ScoredRun {
            name: members.iter().map(|m| m.0.label()).collect::<Vec<_>>().join(" + "),
            voting: Some(voting),
            level: levels.iter().map(Level::to_string).collect::<Vec<_>>().join("+"),
            metrics: compute_metrics(&labels, &actual)?,
            scores,
            labels,
        });
    }
    Ok(BenchmarkOutcome {
        seed,
        keys,
        actual,
        baseline,
        singles,
        ensembles,
        validation_f1: val_f1,
        warnings,
    })
}

/// `entity,t,score,label` with six-decimal scores; snapshot rows use `*`.
pub fn write_predictions<W: Write>(keys: &[RowKey], scores: &[f64], labels: &[u8], mut w: W) -> std::io::Result<()> {
    writeln!(w, "entity,t,score,label")?;
    for ((k, s), l) in keys.iter().zip(scores).zip(labels) {
        let entity = k.entity.as_deref().unwrap_or(crate::features::SNAPSHOT_ENTITY);
        writeln!(w, "{entity},{},{s:.6},{l}", k.t)?;
    }
    Ok(())
}

/// Rows of a prediction CSV written by [`write_predictions`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Predictions {
    pub keys: Vec<RowKey>,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

/// Reads `entity,t,score,label`; entity `*` marks a snapshot row.
pub fn read_predictions<R: std::io::Read>(r: R) -> Result<Predictions, PipelineError> {
    let bad = |m: String| PipelineError::Config(format!("predictions csv: {m}"));
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
    if header != ["entity", "t", "score", "label"] {
        return Err(bad(format!("header {header:?}, expected entity,t,score,label")));
    }
    let mut out = Predictions::default();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let row = line + 2;
        let t = field(1).parse().map_err(|_| bad(format!("line {row}: bad timestamp '{}'", field(1))))?;
        let score: f64 = field(2).parse().map_err(|_| bad(format!("line {row}: bad score '{}'", field(2))))?;
        let label = match field(3) {
            "0" => 0,
            "1" => 1,
            other => return Err(bad(format!("line {row}: label '{other}' is not 0 or 1"))),
        };
        out.keys.push(match field(0) {
            crate::features::SNAPSHOT_ENTITY => RowKey::snapshot(t),
            e => RowKey::entity(e, t),
        });
        out.scores.push(score);
        out.labels.push(label);
    }
    Ok(out)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => values[n / 2],
        _ => 0.5 * (values[n / 2 - 1] + values[n / 2]),
    }
}

fn metric_cells(m: &MetricsReport) -> String {
    format!("{:>8.5} {:>9.5} {:>8.5}", m.f1, m.precision, m.recall)
}

/// Two tables in the layout of the single-model and ensemble results:
/// model, (voting,) dataset, F1, precision, recall.
pub fn render_report(outcome: &BenchmarkOutcome) -> String {
    let mut out = String::new();
    let rule = "-".repeat(64);
    out.push_str(&format!("seed {}  held-out rows {}  anomalous {}\n\n", outcome.seed, outcome.actual.len(), outcome.baseline.tp));
    out.push_str(&format!("{:<22} {:<8} {:>8} {:>9} {:>8}\n{rule}\n", "Model", "Dataset", "F1", "Precision", "Recall"));
    out.push_str(&format!("{:<22} {:<8} {}\n", "Baseline", "-", metric_cells(&outcome.baseline)));
    for r in &outcome.singles {
        out.push_str(&format!("{:<22} {:<8} {}\n", r.name, r.level, metric_cells(&r.metrics)));
    }
    out.push_str(&format!(
        "\n{:<22} {:<16} {:<8} {:>8} {:>9} {:>8}\n{rule}{}\n",
        "Ensemble", "Voting", "Dataset", "F1", "Precision", "Recall", "-".repeat(17)
    ));
    out.push_str(&format!("{:<22} {:<16} {:<8} {}\n", "Baseline", "-", "-", metric_cells(&outcome.baseline)));
    for r in &outcome.ensembles {
        let v = r.voting.as_ref().map(voting_label).unwrap_or_default();
        out.push_str(&format!("{:<22} {:<16} {:<8} {}\n", r.name, v, r.level, metric_cells(&r.metrics)));
    }
    out
}

/// Flat `key=value` lines, e.g. `single.sa_d3.f1=0.412345`.
pub fn render_metrics_kv(outcome: &BenchmarkOutcome) -> String {
    let mut out = String::new();
    let mut push = |prefix: &str, m: &MetricsReport| {
        for (k, v) in [("f1", m.f1), ("precision", m.precision), ("recall", m.recall)] {
            out.push_str(&format!("{prefix}.{k}={v:.6}\n"));
        }
        for (k, v) in [("tp", m.tp), ("fp", m.fp), ("fn", m.fn_), ("tn", m.tn)] {
            out.push_str(&format!("{prefix}.{k}={v}\n"));
        }
    };
    push("baseline", &outcome.baseline);
    for r in &outcome.singles {
        push(&format!("single.{}", r.slug()), &r.metrics);
    }
    for r in &outcome.ensembles {
        push(&format!("ensemble.{}", r.slug()), &r.metrics);
    }
    out
}

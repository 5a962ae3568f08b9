//! The pipeline stages as commands. Every stage reads its inputs from disk
//! and writes its outputs to disk, so each can be run and checked alone.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use dkgad::ensemble::{align_scores, EnsembleConfig, EnsembleManifest, Mechanism, VoteMode};
use dkgad::eval::{baseline_all_anomalous, compute_metrics, MetricsReport};
use dkgad::features::{build_dataset, read_csv, write_csv, Level, RowKey};
use dkgad::graph::{build_graph, read_cache, write_cache};
use dkgad::labels::{expand_labels, read_events, AnomalyEvent};
use dkgad::models::neural::write_loss_curve;
use dkgad::models::{hard_labels, load_model, save_model, Checkpoint, ModelKind};
use dkgad::pipeline::{
    median, prepare_dataset, read_predictions, render_metrics_kv, render_report, run_benchmark, train_model_logged,
    write_predictions, BenchmarkConfig, BenchmarkOutcome, StageSeeds,
};
use dkgad::synth::{generate, write_scenario, ScenarioConfig, LABELS_FILE};
use dkgad::ttl::{parse_snapshots, scan_snapshot_dir, validate_quads, OntologySchema, Quad};
use dkgad::{Dataset, Graph};

use crate::error::{CliError, CliResult, ErrorKind};
use crate::manifest::{RunManifest, RunRecord};

pub const GRAPH_FILE: &str = "graph.dkgc";
pub const MODELS_DIR: &str = "models";
pub const PREDICTIONS_DIR: &str = "predictions";
pub const REPORT_FILE: &str = "report.txt";
pub const METRICS_FILE: &str = "metrics.kv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const SUMMARY_KV_FILE: &str = "summary.kv";

pub fn features_file(level: Level) -> String {
    format!("features_{}.csv", level.to_string().to_lowercase())
}

pub fn model_stem(kind: ModelKind, level: Level) -> String {
    format!("{}_{}", kind.id(), level.to_string().to_lowercase())
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

fn open(path: &Path, what: &str) -> CliResult<BufReader<File>> {
    if !path.exists() {
        return Err(CliError::missing(path, what));
    }
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

/// Directory that holds `path`, used as the manifest location.
fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub fn load_config(path: Option<&Path>) -> CliResult<BenchmarkConfig> {
    match path {
        None => Ok(BenchmarkConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            Ok(BenchmarkConfig::from_toml(&text)?)
        }
    }
}

fn config_value(cfg: &BenchmarkConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn load_events(path: &Path) -> CliResult<Vec<AnomalyEvent>> {
    Ok(read_events(open(path, "labels file")?)?)
}

fn load_graph(path: &Path) -> CliResult<Graph> {
    let r = open(path, "graph cache (run `ingest` first)")?;
    Ok(read_cache(r)?)
}

fn load_features(path: &Path, level: Level) -> CliResult<Dataset> {
    let r = open(path, "feature file (run `featurize` first)")?;
    Ok(read_csv(level, r)?)
}

fn load_checkpoint(path: &Path) -> CliResult<Checkpoint<f64>> {
    Ok(load_model(open(path, "model checkpoint (run `train` first)")?)?)
}

/// Parses and validates every snapshot in `dir`. With `lenient`, quads
/// that violate the schema are dropped instead of failing the stage.
pub fn read_snapshot_dir(dir: &Path, lenient: bool) -> CliResult<(Vec<Quad>, usize, String)> {
    if !dir.is_dir() {
        return Err(CliError::missing(dir, "snapshot directory"));
    }
    let scan = scan_snapshot_dir(dir)?;
    if scan.files.is_empty() {
        return Err(CliError::new(
            ErrorKind::MissingInput,
            format!("no snapshot_<t>.ttl files in {}", dir.display()),
        ));
    }
    let quads = parse_snapshots(&scan.files)?;
    let report = validate_quads(&quads, &OntologySchema::kubernetes());
    let summary = report.to_string();
    if !report.is_clean() && !lenient {
        return Err(CliError::new(ErrorKind::Schema, format!("schema violations:\n{summary}")));
    }
    let accepted: Vec<Quad> = report.accepted_quads(&quads).cloned().collect();
    Ok((accepted, scan.files.len(), summary))
}

pub fn generate_cmd(config: Option<&Path>, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let cfg = load_config(config)?;
    let scenario = ScenarioConfig {
        seed: seed.unwrap_or(cfg.scenario.seed),
        ..cfg.scenario.clone()
    };
    let mut rec = RunRecord::new("generate", serde_json::to_value(&scenario).expect("scenario serializes"));
    rec.seed("scenario", scenario.seed);
    if let Some(c) = config {
        rec.input(c);
    }
    let truth = rec.timed("generate", || generate(&scenario))?;
    let written = rec.timed("write", || write_scenario(&truth, out))?;
    println!(
        "wrote {} snapshots and {} events to {} (anomaly rate {:.4})",
        truth.timestamps.len(),
        truth.events.len(),
        out.display(),
        truth.anomaly_rate()
    );
    rec.outputs.extend(written);
    RunManifest::append(out, rec)?;
    Ok(())
}

pub fn ingest_cmd(input: &Path, out: Option<&Path>, lenient: bool) -> CliResult<()> {
    let out = out.map_or_else(|| input.join(GRAPH_FILE), Path::to_path_buf);
    let mut rec = RunRecord::new("ingest", serde_json::json!({ "lenient": lenient }));
    rec.input(input);
    let (quads, n_files, summary) = rec.timed("parse", || read_snapshot_dir(input, lenient))?;
    eprint!("{summary}");
    let graph: Graph = rec.timed("build", || build_graph(&quads, &OntologySchema::kubernetes()))?;
    let mut w = create(&out)?;
    rec.timed("write", || write_cache(&graph, &mut w))?;
    w.flush().map_err(io_err(&out))?;
    println!(
        "ingested {n_files} snapshots ({} quads) into {}",
        quads.len(),
        out.display()
    );
    rec.output(&out);
    RunManifest::append(input, rec)?;
    Ok(())
}

pub fn featurize_cmd(input: &Path, level: Level, config: Option<&Path>, out: Option<&Path>) -> CliResult<()> {
    let cfg = load_config(config)?;
    let out = out.map_or_else(|| input.join(features_file(level)), Path::to_path_buf);
    let mut rec = RunRecord::new("featurize", config_value(&cfg));
    let graph_path = input.join(GRAPH_FILE);
    let graph = load_graph(&graph_path)?;
    rec.input(&graph_path);
    let mut ds = rec.timed("features", || build_dataset(&graph, level, &cfg.window, cfg.scenario.target()))?;
    let labels_path = input.join(LABELS_FILE);
    if labels_path.exists() {
        let events = load_events(&labels_path)?;
        ds.labels = Some(expand_labels(&events, &ds.row_index)?);
        rec.input(&labels_path);
    }
    let mut w = create(&out)?;
    rec.timed("write", || write_csv(&ds, &mut w))?;
    w.flush().map_err(io_err(&out))?;
    println!("wrote {} {level} rows of width {} to {}", ds.len(), ds.width(), out.display());
    rec.output(&out);
    RunManifest::append(input, rec)?;
    Ok(())
}

pub struct TrainArgs<'a> {
    pub input: &'a Path,
    pub level: Level,
    pub model: ModelKind,
    pub config: Option<&'a Path>,
    pub seed: Option<u64>,
    pub out: Option<&'a Path>,
}

pub fn train_cmd(a: TrainArgs<'_>) -> CliResult<()> {
    let cfg = load_config(a.config)?;
    let seed = a.seed.unwrap_or(cfg.scenario.seed);
    let stem = model_stem(a.model, a.level);
    let out = a
        .out
        .map_or_else(|| a.input.join(MODELS_DIR).join(format!("{stem}.json")), Path::to_path_buf);
    let mut rec = RunRecord::new("train", config_value(&cfg));
    let seeds = StageSeeds::new(seed);
    rec.seed("run", seed);
    rec.seed("split", seeds.split);
    rec.seed("model", seeds.model(a.model, a.level));

    let graph_path = a.input.join(GRAPH_FILE);
    let features_path = a.input.join(features_file(a.level));
    let labels_path = a.input.join(LABELS_FILE);
    let graph = load_graph(&graph_path)?;
    let ds = load_features(&features_path, a.level)?;
    let events = load_events(&labels_path)?;
    rec.inputs.extend([graph_path, features_path, labels_path]);

    let folds = prepare_dataset(
        ds,
        graph.timestamps(),
        &events,
        cfg.window.normalize,
        cfg.train_fraction,
        seeds.split,
    )?;
    let (model, curve) = rec.timed("train", || {
        train_model_logged(
            a.model,
            &folds.train,
            Some(&folds.validation),
            &cfg.models,
            seeds.model(a.model, a.level),
        )
    })?;
    let val_scores = model.predict_proba(&folds.validation.rows)?;
    let val = compute_metrics(
        &hard_labels(&val_scores, cfg.threshold),
        folds.validation.labels.as_deref().unwrap_or(&[]),
    )?;
    let mut ckpt = Checkpoint::new(model, a.level, cfg.threshold);
    ckpt.standardizer = Some(folds.standardizer);
    ckpt.held_out_from = Some(folds.held_out_from);
    let mut w = create(&out)?;
    save_model(&ckpt, &mut w)?;
    w.flush().map_err(io_err(&out))?;
    rec.output(&out);
    if !curve.is_empty() {
        let curve_path = out.with_extension("loss.csv");
        let mut w = create(&curve_path)?;
        write_loss_curve(&curve, &mut w)
            .and_then(|_| w.flush())
            .map_err(io_err(&curve_path))?;
        rec.output(curve_path);
    }
    println!(
        "trained {} on {} ({} training rows); validation F1 {:.5}; checkpoint {}",
        a.model.label(),
        a.level,
        folds.train.len(),
        val.f1,
        out.display()
    );
    RunManifest::append(a.input, rec)?;
    Ok(())
}

/// Held-out rows of `ds` for a checkpoint, or every row with `all_rows`.
fn select_rows(ds: &Dataset, ckpt: &Checkpoint<f64>, all_rows: bool) -> Dataset {
    match ckpt.held_out_from {
        Some(t0) if !all_rows => {
            let keep: Vec<usize> = (0..ds.len()).filter(|&i| ds.row_index[i].t >= t0).collect();
            ds.subset(&keep)
        }
        _ => ds.clone(),
    }
}

pub struct PredictArgs<'a> {
    pub input: &'a Path,
    pub checkpoint: Option<&'a Path>,
    pub model: Option<ModelKind>,
    pub level: Option<Level>,
    pub out: Option<&'a Path>,
    pub all_rows: bool,
}

fn checkpoint_path(input: &Path, explicit: Option<&Path>, model: Option<ModelKind>, level: Option<Level>) -> CliResult<PathBuf> {
    match (explicit, model, level) {
        (Some(p), _, _) => Ok(p.to_path_buf()),
        (None, Some(m), Some(l)) => Ok(input.join(MODELS_DIR).join(format!("{}.json", model_stem(m, l)))),
        _ => Err(CliError::new(
            ErrorKind::Schema,
            "give --checkpoint, or --model and --level to use the default checkpoint path",
        )),
    }
}

pub fn predict_cmd(a: PredictArgs<'_>) -> CliResult<()> {
    let ckpt_path = checkpoint_path(a.input, a.checkpoint, a.model, a.level)?;
    let ckpt = load_checkpoint(&ckpt_path)?;
    if let Some(l) = a.level.filter(|&l| l != ckpt.level) {
        return Err(CliError::new(
            ErrorKind::Mismatch,
            format!("checkpoint was trained on {}, not {l}", ckpt.level),
        ));
    }
    let kind = ckpt.model.kind();
    let out = a.out.map_or_else(
        || a.input.join(PREDICTIONS_DIR).join(format!("{}.csv", model_stem(kind, ckpt.level))),
        Path::to_path_buf,
    );
    let mut rec = RunRecord::new("predict", serde_json::json!({ "all_rows": a.all_rows, "threshold": ckpt.threshold }));
    let features_path = a.input.join(features_file(ckpt.level));
    let ds = load_features(&features_path, ckpt.level)?;
    rec.inputs.extend([ckpt_path, features_path]);
    let rows = select_rows(&ds, &ckpt, a.all_rows);
    let scores = rec.timed("score", || ckpt.score_raw(&rows.rows))?;
    let labels = hard_labels(&scores, ckpt.threshold);
    let mut w = create(&out)?;
    write_predictions(&rows.row_index, &scores, &labels, &mut w)
        .and_then(|_| w.flush())
        .map_err(io_err(&out))?;
    println!(
        "scored {} rows with {} on {}; {} flagged; predictions {}",
        rows.len(),
        kind.label(),
        ckpt.level,
        labels.iter().filter(|&&l| l == 1).count(),
        out.display()
    );
    rec.output(&out);
    RunManifest::append(a.input, rec)?;
    Ok(())
}

pub struct EnsembleArgs<'a> {
    pub input: &'a Path,
    pub manifest: &'a Path,
    pub mode: Option<VoteMode>,
    pub mechanism: Option<Mechanism>,
    pub out: Option<&'a Path>,
    pub all_rows: bool,
}

/// The manifest's voting rule with command-line overrides applied.
pub fn effective_voting(m: &EnsembleManifest, mode: Option<VoteMode>, mechanism: Option<Mechanism>) -> CliResult<EnsembleConfig> {
    let mode = mode.unwrap_or(m.mode);
    let cfg = match mode {
        VoteMode::Soft => EnsembleConfig::soft(m.threshold),
        VoteMode::Hard => {
            let mech = mechanism.or(m.mechanism).ok_or_else(|| {
                CliError::new(ErrorKind::Schema, "hard voting needs --mechanism or a mechanism in the manifest")
            })?;
            EnsembleConfig::hard(mech, m.threshold)
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn ensemble_cmd(a: EnsembleArgs<'_>) -> CliResult<()> {
    let text = fs::read_to_string(a.manifest).map_err(io_err(a.manifest))?;
    let manifest = EnsembleManifest::from_toml(&text)?;
    let voting = effective_voting(&manifest, a.mode, a.mechanism)?;
    let base = parent_dir(a.manifest);
    let mut rec = RunRecord::new("ensemble", serde_json::to_value(voting).expect("voting serializes"));
    rec.input(a.manifest);

    let mut datasets: BTreeMap<Level, Dataset> = BTreeMap::new();
    let mut members: Vec<(Vec<RowKey>, Vec<f64>, Level, String)> = Vec::new();
    for member in &manifest.members {
        let path = if member.is_absolute() { member.clone() } else { base.join(member) };
        let ckpt = load_checkpoint(&path)?;
        rec.input(&path);
        if !datasets.contains_key(&ckpt.level) {
            let fp = a.input.join(features_file(ckpt.level));
            datasets.insert(ckpt.level, load_features(&fp, ckpt.level)?);
            rec.input(fp);
        }
        let rows = select_rows(&datasets[&ckpt.level], &ckpt, a.all_rows);
        let scores = ckpt.score_raw(&rows.rows)?;
        let name = model_stem(ckpt.model.kind(), ckpt.level);
        members.push((rows.row_index, scores, ckpt.level, name));
    }
    // entity-level rows are the reference; snapshot-level scores broadcast onto them
    let reference = members
        .iter()
        .find(|m| m.2 != Level::D3)
        .unwrap_or(&members[0])
        .0
        .clone();
    let aligned = members
        .iter()
        .map(|(keys, scores, _, _)| align_scores(keys, scores, &reference))
        .collect::<Result<Vec<_>, _>>()?;
    let (scores, labels) = voting.combine(&aligned)?;
    let names: Vec<&str> = members.iter().map(|m| m.3.as_str()).collect();
    let out = a.out.map_or_else(
        || {
            let mode = match voting.mechanism {
                None => "soft".to_string(),
                Some(m) => format!("hard_{m}"),
            };
            a.input.join(PREDICTIONS_DIR).join(format!("ensemble_{}_{mode}.csv", names.join("_")))
        },
        Path::to_path_buf,
    );
    let mut w = create(&out)?;
    write_predictions(&reference, &scores, &labels, &mut w)
        .and_then(|_| w.flush())
        .map_err(io_err(&out))?;
    println!(
        "combined {} ({}) over {} rows; {} flagged; predictions {}",
        names.join(" + "),
        dkgad::pipeline::voting_label(&voting),
        reference.len(),
        labels.iter().filter(|&&l| l == 1).count(),
        out.display()
    );
    rec.output(&out);
    RunManifest::append(a.input, rec)?;
    Ok(())
}

/// Ground truth for prediction rows: an events file is expanded onto the
/// prediction keys, a per-row `entity,t,label` file is taken as is.
fn truth_for(labels_path: &Path, keys: &[RowKey]) -> CliResult<Vec<u8>> {
    let text = fs::read_to_string(labels_path).map_err(io_err(labels_path))?;
    let header = text.lines().next().unwrap_or_default().trim();
    if header.starts_with("entity,t_start,t_end") {
        let events = read_events(text.as_bytes())?;
        return Ok(expand_labels(&events, keys)?);
    }
    if header != "entity,t,label" {
        return Err(CliError::new(
            ErrorKind::Schema,
            format!(
                "{}: expected an events file (entity,t_start,t_end,class) or row labels (entity,t,label)",
                labels_path.display()
            ),
        ));
    }
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.trim().split(',').collect();
        let bad = || CliError::new(ErrorKind::Schema, format!("{}:{}: malformed row '{line}'", labels_path.display(), i + 1));
        let [entity, t, label] = fields[..] else {
            return Err(bad());
        };
        let t: i64 = t.parse().map_err(|_| bad())?;
        let label: u8 = match label {
            "0" => 0,
            "1" => 1,
            _ => return Err(bad()),
        };
        let row = labels.len();
        if let Some(k) = keys.get(row) {
            let same_entity = k.entity.as_deref().unwrap_or(dkgad::features::SNAPSHOT_ENTITY) == entity;
            if !same_entity || k.t != t {
                return Err(CliError::new(
                    ErrorKind::Mismatch,
                    format!("row {}: prediction is for ({}, {}), label for ({entity}, {t})", row + 1, k.entity.as_deref().unwrap_or("*"), k.t),
                ));
            }
        }
        labels.push(label);
    }
    Ok(labels)
}

pub fn evaluate_cmd(predictions: &Path, labels: &Path, out: Option<&Path>) -> CliResult<MetricsReport> {
    let mut rec = RunRecord::new("evaluate", serde_json::Value::Null);
    let preds = read_predictions(open(predictions, "predictions file")?)?;
    if !labels.exists() {
        return Err(CliError::missing(labels, "labels file"));
    }
    let actual = truth_for(labels, &preds.keys)?;
    rec.inputs.extend([predictions.to_path_buf(), labels.to_path_buf()]);
    let m = compute_metrics(&preds.labels, &actual)?;
    let baseline = baseline_all_anomalous(&actual)?;
    println!("rows {}  anomalous {}\n{m}\nbaseline F1 {:.5}", actual.len(), m.tp + m.fn_, baseline.f1);
    if let Some(out) = out {
        let mut w = create(out)?;
        m.write_kv(&mut w).and_then(|_| w.flush()).map_err(io_err(out))?;
        rec.output(out);
        RunManifest::append(&parent_dir(out), rec)?;
    }
    Ok(m)
}

/// Runs one seed end to end through files on disk under `dir`.
pub fn benchmark_seed(cfg: &BenchmarkConfig, seed: u64, dir: &Path, rec: &mut RunRecord) -> CliResult<BenchmarkOutcome> {
    let scenario = ScenarioConfig {
        seed,
        ..cfg.scenario.clone()
    };
    let data = dir.join("data");
    let step = |s: &str| format!("seed {seed}: {s}");
    let truth = rec.timed(&step("generate"), || generate(&scenario))?;
    rec.timed(&step("write"), || write_scenario(&truth, &data))?;
    drop(truth);
    let (quads, _, _) = rec.timed(&step("parse"), || read_snapshot_dir(&data, false))?;
    let graph: Graph = build_graph(&quads, &OntologySchema::kubernetes())?;
    drop(quads);
    let cache = data.join(GRAPH_FILE);
    let mut w = create(&cache)?;
    write_cache(&graph, &mut w)?;
    w.flush().map_err(io_err(&cache))?;
    let events = load_events(&data.join(LABELS_FILE))?;
    let outcome = rec.timed(&step("models"), || run_benchmark(&graph, &events, cfg, seed))?;

    let preds = dir.join(PREDICTIONS_DIR);
    for r in outcome.singles.iter().chain(&outcome.ensembles) {
        let path = preds.join(format!("{}.csv", r.slug()));
        let mut w = create(&path)?;
        write_predictions(&outcome.keys, &r.scores, &r.labels, &mut w)
            .and_then(|_| w.flush())
            .map_err(io_err(&path))?;
        rec.output(path);
    }
    let truth_path = dir.join("truth.csv");
    let mut truth_csv = String::from("entity,t,label\n");
    for (k, a) in outcome.keys.iter().zip(&outcome.actual) {
        truth_csv.push_str(&format!("{},{},{a}\n", k.entity.as_deref().unwrap_or("*"), k.t));
    }
    write_text(&truth_path, &truth_csv)?;
    write_text(&dir.join(REPORT_FILE), &render_report(&outcome))?;
    write_text(&dir.join(METRICS_FILE), &render_metrics_kv(&outcome))?;
    rec.outputs.extend([data, truth_path, dir.join(REPORT_FILE), dir.join(METRICS_FILE)]);
    Ok(outcome)
}

/// Medians over seeds of every reported row, keyed like the metrics file.
pub fn summarize(outcomes: &[BenchmarkOutcome]) -> BTreeMap<String, f64> {
    let mut cols: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for o in outcomes {
        cols.entry("baseline".into()).or_default().push(o.baseline.f1);
        for r in &o.singles {
            cols.entry(format!("single.{}", r.slug())).or_default().push(r.metrics.f1);
        }
        for r in &o.ensembles {
            cols.entry(format!("ensemble.{}", r.slug())).or_default().push(r.metrics.f1);
        }
    }
    cols.into_iter().map(|(k, mut v)| (k, median(&mut v))).collect()
}

pub fn benchmark_cmd(config: Option<&Path>, seeds: &[u64], out: &Path) -> CliResult<Vec<BenchmarkOutcome>> {
    let cfg = load_config(config)?;
    let seeds: Vec<u64> = if seeds.is_empty() { vec![cfg.scenario.seed] } else { seeds.to_vec() };
    let mut rec = RunRecord::new("benchmark", config_value(&cfg));
    if let Some(c) = config {
        rec.input(c);
    }
    let mut outcomes = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let s = StageSeeds::new(seed);
        rec.seed(&format!("seed {seed}: scenario"), seed);
        rec.seed(&format!("seed {seed}: split"), s.split);
        rec.seed(&format!("seed {seed}: models"), s.models);
        let dir = seed_dir(out, seed);
        let outcome = benchmark_seed(&cfg, seed, &dir, &mut rec)?;
        println!("{}", render_report(&outcome));
        outcomes.push(outcome);
    }
    let medians = summarize(&outcomes);
    let seed_list = seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
    let mut text = format!("median F1 over seeds {seed_list}\n\n");
    let mut kv = String::new();
    for (k, v) in &medians {
        text.push_str(&format!("{k:<48} {v:.5}\n"));
        kv.push_str(&format!("median.{k}.f1={v:.6}\n"));
    }
    write_text(&out.join(SUMMARY_FILE), &text)?;
    write_text(&out.join(SUMMARY_KV_FILE), &kv)?;
    rec.outputs.extend([out.join(SUMMARY_FILE), out.join(SUMMARY_KV_FILE)]);
    if seeds.len() > 1 {
        print!("{text}");
    }
    RunManifest::append(out, rec)?;
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_names() {
        assert_eq!(features_file(Level::D3), "features_d3.csv");
        assert_eq!(model_stem(ModelKind::Sa, Level::D2), "sa_d2");
        assert_eq!(seed_dir(Path::new("out"), 7), Path::new("out/seed_7"));
    }

    #[test]
    fn voting_overrides() {
        let m = EnsembleManifest {
            mode: VoteMode::Soft,
            mechanism: None,
            threshold: 0.5,
            members: vec!["a".into(), "b".into()],
        };
        assert_eq!(effective_voting(&m, None, None).unwrap(), EnsembleConfig::soft(0.5));
        assert_eq!(
            effective_voting(&m, Some(VoteMode::Hard), Some(Mechanism::Majority)).unwrap(),
            EnsembleConfig::hard(Mechanism::Majority, 0.5)
        );
        assert_eq!(effective_voting(&m, Some(VoteMode::Hard), None).unwrap_err().kind, ErrorKind::Schema);
    }

    #[test]
    fn row_truth_must_match_prediction_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("truth.csv");
        fs::write(&p, "entity,t,label\nsvc0,0,1\nsvc0,15,0\n").unwrap();
        let keys = vec![RowKey::entity("svc0", 0), RowKey::entity("svc0", 15)];
        assert_eq!(truth_for(&p, &keys).unwrap(), vec![1, 0]);
        let wrong = vec![RowKey::entity("svc1", 0), RowKey::entity("svc0", 15)];
        assert_eq!(truth_for(&p, &wrong).unwrap_err().kind, ErrorKind::Mismatch);
        fs::write(&p, "a,b\n").unwrap();
        assert_eq!(truth_for(&p, &keys).unwrap_err().kind, ErrorKind::Schema);
    }

    #[test]
    fn missing_config_is_a_missing_input() {
        let e = load_config(Some(Path::new("/definitely/not/here.toml"))).unwrap_err();
        assert_eq!(e.kind, ErrorKind::MissingInput);
    }

}

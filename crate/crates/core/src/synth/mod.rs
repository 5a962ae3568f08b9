//! Synthetic Kubernetes-style telemetry: a small cluster topology whose
//! attributes follow AR(1) noise around a daily load cycle, with injected
//! anomalies and ground-truth labels.
//!
//! Anomalies act mostly on the target's neighborhood (pods, connections,
//! nodes) and only weakly on the target's own attributes, so structural
//! features carry more signal than the target's own series.

mod config;
mod emit;

use std::f64::consts::TAU;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub use config::{AnomalyClass, AnomalySpec, MaintenanceSpec, ScenarioConfig, Topology};
pub use emit::{emit_snapshot, PREFIX};

use crate::labels::{write_events, AnomalyEvent, LabelError};
use crate::ttl::{snapshot_file_name, Category, Literal, OntologySchema, Quad, RelationKind, Term, RDF_TYPE};

pub const LABELS_FILE: &str = "labels.csv";

/// Restarts are reported over this many trailing snapshots.
const RESTART_WINDOW: usize = 20;
const DECIMALS: usize = 4;
const PLACEMENT_ATTEMPTS: usize = 500;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("infeasible anomaly rate: {0}")]
    Infeasible(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Labels(#[from] LabelError),
}

/// One hierarchy edge, by IRI.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub relation: RelationKind,
    pub subject: String,
    pub object: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub namespace: String,
    pub target: Category,
    pub timestamps: Vec<i64>,
    /// Quads of each snapshot, in emission order.
    pub quads: Vec<Vec<Quad>>,
    /// Sorted hierarchy edges of each snapshot.
    pub adjacency: Vec<Vec<Edge>>,
    pub events: Vec<AnomalyEvent>,
    /// Unlabeled platform-wide load windows, as inclusive timestamp ranges.
    pub maintenance: Vec<(i64, i64)>,
    /// Number of entities of the target category.
    pub n_targets: usize,
}

impl GroundTruth {
    /// Fraction of (target entity, snapshot) rows covered by an event.
    pub fn anomaly_rate(&self) -> f64 {
        let step = self.timestamps.get(1).map_or(1, |&t| t - self.timestamps[0]).max(1);
        let rows: i64 = self.events.iter().map(|e| (e.t_end - e.t_start) / step + 1).sum();
        rows as f64 / (self.n_targets * self.timestamps.len()) as f64
    }

    pub fn all_quads(&self) -> Vec<Quad> {
        self.quads.iter().flatten().cloned().collect()
    }
}

#[derive(Debug, Clone)]
struct Injection {
    class: AnomalyClass,
    entity: usize,
    start: usize,
    end: usize,
    magnitude: f64,
}

/// Static wiring plus the evolving pod placement.
struct Topo {
    node_cluster: Vec<usize>,
    pod_node: Vec<usize>,
    conn: Vec<(usize, usize)>,
    /// Pods whose CPU a spike on each service raises.
    service_pods: Vec<Vec<usize>>,
    conn_per_service: Vec<usize>,
}

impl Topo {
    fn build(t: &Topology, rng: &mut ChaCha8Rng) -> Self {
        let node_cluster = (0..t.nodes).map(|n| n % t.clusters).collect();
        let pod_node = (0..t.pods).map(|p| p % t.nodes).collect();
        let primary = t.pods.max(t.services);
        let conn: Vec<(usize, usize)> = (0..t.connections)
            .map(|j| {
                let pod = if j < primary { j % t.pods } else { rng.random_range(0..t.pods) };
                (pod, j % t.services)
            })
            .collect();
        let service_pods = (0..t.services)
            .map(|s| {
                let owned: Vec<usize> = (0..t.pods).filter(|p| p % t.services == s).collect();
                if owned.is_empty() {
                    let mut v: Vec<usize> = conn.iter().filter(|c| c.1 == s).map(|c| c.0).collect();
                    v.sort_unstable();
                    v.dedup();
                    if v.is_empty() {
                        // fewer pods and connections than services
                        v.push(s % t.pods);
                    }
                    v
                } else {
                    owned
                }
            })
            .collect();
        let mut conn_per_service = vec![0; t.services];
        for c in &conn {
            conn_per_service[c.1] += 1;
        }
        Self {
            node_cluster,
            pod_node,
            conn,
            service_pods,
            conn_per_service,
        }
    }
}

/// Stationary AR(1) deviation with relative standard deviation `sd`.
#[derive(Debug, Clone, Copy)]
struct Ar {
    z: f64,
}

impl Ar {
    fn new(rng: &mut ChaCha8Rng, sd: f64) -> Self {
        Self {
            z: sd * rng.sample::<f64, _>(StandardNormal),
        }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng, phi: f64, sd: f64) -> f64 {
        let innov = sd * (1.0 - phi * phi).sqrt();
        self.z = phi * self.z + innov * rng.sample::<f64, _>(StandardNormal);
        1.0 + self.z
    }
}

fn draw_len(rng: &mut ChaCha8Rng, [lo, hi]: [usize; 2]) -> usize {
    rng.random_range(lo..=hi)
}

/// Chooses anomaly intervals until the labeled row count reaches the
/// target rate. Intervals on one entity never overlap or touch.
fn plan_events(cfg: &ScenarioConfig, n_targets: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Injection>, SynthError> {
    if cfg.anomalies.is_empty() {
        return Ok(Vec::new());
    }
    let n_t = cfg.duration;
    let required = (cfg.target_rate * (n_targets * n_t) as f64).round() as usize;
    let mut remaining: Vec<usize> = cfg.anomalies.iter().map(|a| a.count).collect();
    let mut busy = vec![vec![false; n_t]; n_targets];
    let mut plan = Vec::new();
    let mut covered = 0;
    while covered < required {
        let open: Vec<usize> = (0..remaining.len()).filter(|&i| remaining[i] > 0).collect();
        if open.is_empty() {
            return Err(SynthError::Infeasible(format!(
                "event counts cover {covered} of {required} required rows"
            )));
        }
        let k = open[rng.random_range(0..open.len())];
        remaining[k] -= 1;
        let spec = &cfg.anomalies[k];
        let need = required - covered;
        let mut len = draw_len(rng, spec.duration);
        if len > need {
            len = need.max(spec.duration[0]);
        }
        if len > n_t {
            return Err(SynthError::Infeasible(format!(
                "{}-snapshot event does not fit in {n_t} snapshots",
                len
            )));
        }
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let e = rng.random_range(0..n_targets);
            let start = rng.random_range(0..=n_t - len);
            let lo = start.saturating_sub(1);
            let hi = (start + len + 1).min(n_t);
            if busy[e][lo..hi].iter().any(|&b| b) {
                continue;
            }
            busy[e][start..start + len].iter_mut().for_each(|b| *b = true);
            plan.push(Injection {
                class: spec.class,
                entity: e,
                start,
                end: start + len - 1,
                magnitude: spec.magnitude,
            });
            placed = true;
            break;
        }
        if !placed {
            return Err(SynthError::Infeasible(format!(
                "no free slot for a {len}-snapshot event after {covered} labeled rows"
            )));
        }
        covered += len;
    }
    plan.sort_by_key(|i| (i.start, i.entity));
    Ok(plan)
}

fn plan_maintenance(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let m = &cfg.maintenance;
    let mut out: Vec<(usize, usize)> = Vec::new();
    for _ in 0..m.count {
        let len = draw_len(rng, m.duration).min(cfg.duration);
        for _ in 0..PLACEMENT_ATTEMPTS {
            let start = rng.random_range(0..=cfg.duration - len);
            let end = start + len - 1;
            if out.iter().all(|&(a, b)| end + 1 < a || b + 1 < start) {
                out.push((start, end));
                break;
            }
        }
    }
    out.sort_unstable();
    out
}

struct Emitter<'a> {
    ns: &'a str,
    t: i64,
    quads: Vec<Quad>,
    edges: Vec<Edge>,
}

impl Emitter<'_> {
    fn iri(&self, local: &str) -> String {
        format!("{}{local}", self.ns)
    }

    fn typed(&mut self, s: &str, c: Category) {
        let q = Quad::new(self.iri(s), RDF_TYPE, Term::Iri(self.iri(c.name())), self.t);
        self.quads.push(q);
    }

    fn lit(&mut self, s: &str, p: &str, l: Literal) {
        let q = Quad::new(self.iri(s), self.iri(p), Term::Literal(l), self.t);
        self.quads.push(q);
    }

    fn dec(&mut self, s: &str, p: &str, v: f64) {
        debug_assert!(v.is_finite(), "{s} {p} = {v}");
        self.lit(s, p, Literal::decimal(v, DECIMALS));
    }

    fn rel(&mut self, s: &str, kind: RelationKind, p: &str, o: &str) {
        let (subject, object) = (self.iri(s), self.iri(o));
        self.quads
            .push(Quad::new(subject.clone(), self.iri(p), Term::Iri(object.clone()), self.t));
        self.edges.push(Edge {
            relation: kind,
            subject,
            object,
        });
    }
}

fn cluster_name(i: usize) -> String {
    format!("cluster{i}")
}
fn node_name(i: usize) -> String {
    format!("node{i}")
}
fn pod_name(i: usize) -> String {
    format!("pod{i}")
}
fn service_name(i: usize) -> String {
    format!("svc{i}")
}
fn conn_name(i: usize) -> String {
    format!("conn{i}")
}
fn ephemeral_name(target: &str, k: usize) -> String {
    format!("{target}_eph{k}")
}

/// Runs the scenario. Deterministic for a given configuration.
pub fn generate(cfg: &ScenarioConfig) -> Result<GroundTruth, SynthError> {
    cfg.validate()?;
    let schema = OntologySchema::kubernetes();
    let ns = schema.namespace().to_string();
    let tp = &cfg.topology;
    let target = cfg.target();
    let n_targets = match target {
        Category::Pod => tp.pods,
        _ => tp.services,
    };
    let target_name = |e: usize| match target {
        Category::Pod => pod_name(e),
        _ => service_name(e),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut topo = Topo::build(tp, &mut rng);
    let plan = plan_events(cfg, n_targets, &mut rng)?;
    let maint = plan_maintenance(cfg, &mut rng);

    let n_t = cfg.duration;
    let mut active: Vec<Vec<Option<usize>>> = vec![vec![None; n_t]; n_targets];
    for (k, inj) in plan.iter().enumerate() {
        active[inj.entity][inj.start..=inj.end].iter_mut().for_each(|a| *a = Some(k));
    }
    let mut in_maint = vec![false; n_t];
    for &(a, b) in &maint {
        in_maint[a..=b].iter_mut().for_each(|m| *m = true);
    }

    // the pod each crash loop takes down
    let crash_pod: Vec<usize> = plan
        .iter()
        .map(|inj| match target {
            Category::Pod => inj.entity,
            _ => {
                let pods = &topo.service_pods[inj.entity];
                pods[rng.random_range(0..pods.len())]
            }
        })
        .collect();
    // ephemeral connection slots per target, each with a fixed peer
    let slots = cfg.ephemeral_slots;
    let eph_peer: Vec<Vec<usize>> = (0..n_targets)
        .map(|_| {
            let n = match target {
                Category::Pod => tp.services,
                _ => tp.pods,
            };
            (0..slots).map(|_| rng.random_range(0..n)).collect()
        })
        .collect();

    let sd = cfg.noise;
    let phi = cfg.persistence;
    let phase0 = rng.random_range(0.0..TAU);
    let mut base = |lo: f64, hi: f64, n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(lo..hi)).collect() };
    let svc_rate = base(50.0, 200.0, tp.services);
    let svc_lat = base(20.0, 80.0, tp.services);
    let svc_err = base(0.005, 0.02, tp.services);
    let pod_cpu = base(0.2, 1.0, tp.pods);
    let pod_mem = base(200.0, 800.0, tp.pods);
    let conn_rtt = base(1.0, 5.0, tp.connections);
    let svc_phase = base(-0.3, 0.3, tp.services);
    let pod_phase = base(-0.3, 0.3, tp.pods);

    let mut svc_ar: Vec<[Ar; 3]> = (0..tp.services)
        .map(|_| [Ar::new(&mut rng, sd), Ar::new(&mut rng, sd), Ar::new(&mut rng, sd)])
        .collect();
    let mut pod_ar: Vec<[Ar; 2]> = (0..tp.pods)
        .map(|_| [Ar::new(&mut rng, sd), Ar::new(&mut rng, sd)])
        .collect();
    let mut conn_ar: Vec<[Ar; 2]> = (0..tp.connections)
        .map(|_| [Ar::new(&mut rng, sd), Ar::new(&mut rng, sd)])
        .collect();
    let mut eph_ar: Vec<Ar> = (0..n_targets * slots).map(|_| Ar::new(&mut rng, sd)).collect();
    let mut node_ar: Vec<[Ar; 2]> = (0..tp.nodes)
        .map(|_| [Ar::new(&mut rng, sd), Ar::new(&mut rng, sd)])
        .collect();
    let mut restart_log: Vec<Vec<usize>> = vec![Vec::new(); tp.pods];

    let day = cfg.day_length();
    let own = cfg.own_signal;
    let mm = cfg.maintenance.magnitude;
    let mut out = GroundTruth {
        namespace: ns.clone(),
        target,
        timestamps: (0..n_t).map(|t| t as i64 * cfg.cadence).collect(),
        quads: Vec::with_capacity(n_t),
        adjacency: Vec::with_capacity(n_t),
        events: Vec::with_capacity(plan.len()),
        maintenance: maint
            .iter()
            .map(|&(a, b)| (a as i64 * cfg.cadence, b as i64 * cfg.cadence))
            .collect(),
        n_targets,
    };

    for t in 0..n_t {
        let ts = t as i64 * cfg.cadence;
        if tp.nodes > 1 && rng.random::<f64>() < cfg.reschedule_rate {
            // the scheduler places the pod on the least loaded other node
            let p = rng.random_range(0..tp.pods);
            let from = topo.pod_node[p];
            let mut load = vec![0usize; tp.nodes];
            topo.pod_node.iter().for_each(|&n| load[n] += 1);
            let least = (0..tp.nodes).filter(|&n| n != from).map(|n| load[n]).min().unwrap_or(0);
            let candidates: Vec<usize> = (0..tp.nodes).filter(|&n| n != from && load[n] == least).collect();
            topo.pod_node[p] = candidates[rng.random_range(0..candidates.len())];
        }
        let cycle = |jitter: f64| 1.0 + cfg.daily_amplitude * (TAU * t as f64 / day + phase0 + jitter).sin();
        let event_at = |e: usize| active[e][t].map(|k| (k, &plan[k]));

        // effects of the active events on pods and services
        let mut pod_spike = vec![if in_maint[t] { mm } else { 1.0 }; tp.pods];
        let mut pod_crash: Vec<Option<f64>> = vec![None; tp.pods];
        let mut svc_shift = vec![[1.0f64; 3]; tp.services];
        if in_maint[t] {
            for s in svc_shift.iter_mut() {
                s[1] *= 1.0 + own;
            }
        }
        let mut eph_rate = vec![cfg.ephemeral_rate; n_targets];
        for e in 0..n_targets {
            let Some((k, inj)) = event_at(e) else { continue };
            let services: Vec<usize> = match target {
                Category::Pod => topo.conn.iter().filter(|c| c.0 == e).map(|c| c.1).collect(),
                _ => vec![e],
            };
            match inj.class {
                AnomalyClass::CpuSpike => {
                    let pods: &[usize] = match target {
                        Category::Pod => std::slice::from_ref(&inj.entity),
                        _ => &topo.service_pods[e],
                    };
                    for &p in pods {
                        pod_spike[p] *= inj.magnitude;
                    }
                    for &s in &services {
                        svc_shift[s][1] *= 1.0 + own;
                    }
                }
                AnomalyClass::CrashLoop => {
                    pod_crash[crash_pod[k]] = Some(inj.magnitude);
                    for &s in &services {
                        svc_shift[s][2] *= 1.0 + own;
                    }
                }
                AnomalyClass::ConnStorm => {
                    eph_rate[e] = (cfg.ephemeral_rate * inj.magnitude).min(1.0);
                    for &s in &services {
                        svc_shift[s][0] *= 1.0 + own;
                    }
                }
            }
        }

        let mut em = Emitter {
            ns: &ns,
            t: ts,
            quads: Vec::new(),
            edges: Vec::new(),
        };

        // services
        let mut svc_rate_now = vec![0.0; tp.services];
        let mut svc_vals = Vec::with_capacity(tp.services);
        for s in 0..tp.services {
            let d = cycle(svc_phase[s]);
            let [a0, a1, a2] = &mut svc_ar[s];
            let rate = svc_rate[s] * d * a0.step(&mut rng, phi, sd) * svc_shift[s][0];
            let lat = svc_lat[s] * (1.0 + 0.5 * (d - 1.0)) * a1.step(&mut rng, phi, sd) * svc_shift[s][1];
            let err = svc_err[s] * a2.step(&mut rng, phi, sd) * svc_shift[s][2];
            svc_rate_now[s] = rate;
            svc_vals.push((rate, lat, err));
        }

        // pods
        let mut pod_vals = Vec::with_capacity(tp.pods);
        let mut pod_down = vec![false; tp.pods];
        for p in 0..tp.pods {
            let d = cycle(pod_phase[p]);
            let [a0, a1] = &mut pod_ar[p];
            let mut cpu = pod_cpu[p] * d * a0.step(&mut rng, phi, sd) * pod_spike[p];
            let mut mem = pod_mem[p] * (1.0 + 0.3 * (d - 1.0)) * a1.step(&mut rng, phi, sd);
            let log = &mut restart_log[p];
            // a crash-looping pod is down (zeroed, not ready) on restart snapshots
            let restarted = match pod_crash[p] {
                Some(m) => {
                    let every = (60.0 / (cfg.cadence as f64 * m)).round().max(1.0) as usize;
                    t % every == 0
                }
                None => rng.random::<f64>() < cfg.restart_rate,
            };
            let down = restarted && pod_crash[p].is_some();
            if down {
                cpu = 0.0;
                mem = 0.0;
            }
            pod_down[p] = down;
            if restarted {
                log.push(t);
            }
            log.retain(|&r| r + RESTART_WINDOW > t);
            pod_vals.push((cpu, mem, log.len() as i64, !down));
        }

        // clusters and nodes
        for c in 0..tp.clusters {
            let name = cluster_name(c);
            em.typed(&name, Category::Cluster);
            let nodes: Vec<usize> = (0..tp.nodes).filter(|&n| topo.node_cluster[n] == c).collect();
            em.lit(&name, "nodeCount", Literal::integer(nodes.len() as i64));
            for n in nodes {
                em.rel(&name, RelationKind::Contains, "contains", &node_name(n));
            }
        }
        for n in 0..tp.nodes {
            let name = node_name(n);
            let hosted: Vec<usize> = (0..tp.pods).filter(|&p| topo.pod_node[p] == n).collect();
            let cpu: f64 = hosted.iter().map(|&p| pod_vals[p].0).sum();
            let mem: f64 = hosted.iter().map(|&p| pod_vals[p].1).sum();
            let [a0, a1] = &mut node_ar[n];
            let cpu_util = ((0.1 + 0.1 * cpu) * a0.step(&mut rng, phi, sd)).clamp(0.0, 1.0);
            let mem_util = ((0.1 + mem / 5000.0) * a1.step(&mut rng, phi, sd)).clamp(0.0, 1.0);
            em.typed(&name, Category::Node);
            em.dec(&name, "cpuUtil", cpu_util);
            em.dec(&name, "memUtil", mem_util);
            for p in hosted {
                em.rel(&name, RelationKind::Hosts, "hosts", &pod_name(p));
            }
        }
        for (p, &(cpu, mem, restarts, ready)) in pod_vals.iter().enumerate() {
            let name = pod_name(p);
            em.typed(&name, Category::Pod);
            em.dec(&name, "cpu", cpu);
            em.dec(&name, "memory", mem);
            em.lit(&name, "restarts", Literal::integer(restarts));
            em.lit(&name, "ready", Literal::boolean(ready));
        }
        for (s, &(rate, lat, err)) in svc_vals.iter().enumerate() {
            let name = service_name(s);
            em.typed(&name, Category::Service);
            em.dec(&name, "requestRate", rate);
            em.dec(&name, "latency", lat);
            em.dec(&name, "errorRate", err);
        }
        for (j, &(p, s)) in topo.conn.iter().enumerate() {
            let name = conn_name(j);
            let [a0, a1] = &mut conn_ar[j];
            let share = svc_rate_now[s] / topo.conn_per_service[s] as f64;
            let mut thr = share * a0.step(&mut rng, phi, sd);
            if pod_down[p] {
                thr = 0.0;
            }
            let rtt = conn_rtt[j] * a1.step(&mut rng, phi, sd) * (1.0 + 0.5 * (pod_spike[p] - 1.0));
            em.typed(&name, Category::Connection);
            em.rel(&name, RelationKind::ConnectsPod, "fromPod", &pod_name(p));
            em.rel(&name, RelationKind::ConnectsService, "toService", &service_name(s));
            em.dec(&name, "throughput", thr);
            em.dec(&name, "rtt", rtt);
        }
        for e in 0..n_targets {
            for (b, &peer) in eph_peer[e].iter().enumerate() {
                // every slot draws, so the stream does not depend on activity
                let on = rng.random::<f64>() < eph_rate[e];
                let noise = eph_ar[e * slots + b].step(&mut rng, phi, sd);
                if !on {
                    continue;
                }
                let name = ephemeral_name(&target_name(e), b);
                let (p, s) = match target {
                    Category::Pod => (e, peer),
                    _ => (peer, e),
                };
                let share = svc_rate_now[s] / topo.conn_per_service[s].max(1) as f64;
                em.typed(&name, Category::Connection);
                em.rel(&name, RelationKind::ConnectsPod, "fromPod", &pod_name(p));
                em.rel(&name, RelationKind::ConnectsService, "toService", &service_name(s));
                em.dec(&name, "throughput", 0.5 * share * noise);
                em.dec(&name, "rtt", conn_rtt[b % tp.connections] * noise);
            }
        }

        let Emitter { quads, mut edges, .. } = em;
        edges.sort_unstable();
        edges.dedup();
        out.quads.push(quads);
        out.adjacency.push(edges);
    }

    for inj in &plan {
        out.events.push(AnomalyEvent::new(
            format!("{ns}{}", target_name(inj.entity)),
            inj.start as i64 * cfg.cadence,
            inj.end as i64 * cfg.cadence,
            inj.class.tag(),
        )?);
    }
    Ok(out)
}

/// Writes `snapshot_<t>.ttl` per snapshot and the labels CSV into `dir`.
pub fn write_scenario(truth: &GroundTruth, dir: &Path) -> Result<Vec<PathBuf>, SynthError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SynthError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::with_capacity(truth.quads.len() + 1);
    for (&t, quads) in truth.timestamps.iter().zip(&truth.quads) {
        let path = dir.join(snapshot_file_name(t));
        fs::write(&path, emit_snapshot(quads, &truth.namespace)).map_err(io_err(&path))?;
        written.push(path);
    }
    let path = dir.join(LABELS_FILE);
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    write_events(&truth.events, io::BufWriter::new(file))?;
    written.push(path);
    Ok(written)
}

//! Interval anomaly labels, their expansion to per-row targets, and the
//! event-preserving train/validation split.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::RowKey;

/// Class tag used when labels carry no class information.
pub const DEFAULT_CLASS: &str = "anomaly";

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("event references unknown entity {0}")]
    UnknownEntity(String),
    #[error("event on {entity} has t_start {t_start} > t_end {t_end}")]
    InvalidInterval { entity: String, t_start: i64, t_end: i64 },
    #[error("no anomalous events of class '{0}' among the rows to split")]
    NoEvents(String),
    #[error("labels csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AnomalyEvent {
    pub entity: String,
    /// Inclusive.
    pub t_start: i64,
    /// Inclusive.
    pub t_end: i64,
    pub class: String,
}

impl AnomalyEvent {
    pub fn new(
        entity: impl Into<String>,
        t_start: i64,
        t_end: i64,
        class: impl Into<String>,
    ) -> Result<Self, LabelError> {
        let entity = entity.into();
        if t_start > t_end {
            return Err(LabelError::InvalidInterval {
                entity,
                t_start,
                t_end,
            });
        }
        Ok(Self {
            entity,
            t_start,
            t_end,
            class: class.into(),
        })
    }

    pub fn contains(&self, t: i64) -> bool {
        (self.t_start..=self.t_end).contains(&t)
    }

    /// Whether the event covers a row: same entity, or any entity for a
    /// per-snapshot row.
    pub fn covers(&self, key: &RowKey) -> bool {
        self.contains(key.t) && key.entity.as_ref().is_none_or(|e| *e == self.entity)
    }
}

/// Binary target per row. Entity rows are positive inside an event of the
/// same entity; per-snapshot rows are positive when any event covers `t`.
/// When the rows carry entities, every event entity must be among them.
pub fn expand_labels(events: &[AnomalyEvent], row_index: &[RowKey]) -> Result<Vec<u8>, LabelError> {
    let mut by_entity: HashMap<&str, Vec<(i64, i64)>> = HashMap::new();
    let mut all = Vec::with_capacity(events.len());
    for ev in events {
        if ev.t_start > ev.t_end {
            return Err(LabelError::InvalidInterval {
                entity: ev.entity.clone(),
                t_start: ev.t_start,
                t_end: ev.t_end,
            });
        }
        by_entity.entry(&ev.entity).or_default().push((ev.t_start, ev.t_end));
        all.push((ev.t_start, ev.t_end));
    }
    let entities: HashSet<&str> = row_index.iter().filter_map(|k| k.entity.as_deref()).collect();
    if !entities.is_empty() {
        if let Some(ev) = events.iter().find(|ev| !entities.contains(ev.entity.as_str())) {
            return Err(LabelError::UnknownEntity(ev.entity.clone()));
        }
    }
    let inside = |iv: &[(i64, i64)], t: i64| iv.iter().any(|&(a, b)| a <= t && t <= b);
    Ok(row_index
        .iter()
        .map(|k| {
            let hit = match &k.entity {
                Some(e) => by_entity.get(e.as_str()).is_some_and(|iv| inside(iv, k.t)),
                None => inside(&all, k.t),
            };
            u8::from(hit)
        })
        .collect())
}

/// Maximal runs of positive rows that are adjacent in row order and share
/// an entity. Rows must be sorted by (entity, t).
pub fn extract_events(labels: &[u8], row_index: &[RowKey], class: &str) -> Vec<AnomalyEvent> {
    let mut events: Vec<AnomalyEvent> = Vec::new();
    let mut open = false;
    for (i, (&l, key)) in labels.iter().zip(row_index).enumerate() {
        let entity = key.entity.as_deref().unwrap_or(crate::features::SNAPSHOT_ENTITY);
        let continues = open && i > 0 && row_index[i - 1].entity == key.entity;
        if l == 0 {
            open = false;
        } else if continues {
            events.last_mut().expect("open run").t_end = key.t;
        } else {
            events.push(AnomalyEvent {
                entity: entity.to_string(),
                t_start: key.t,
                t_end: key.t,
                class: class.to_string(),
            });
            open = true;
        }
    }
    events
}

/// Index of the first timestamp of the held-out test period: the first
/// `floor(train_fraction * T)` snapshots form the training period.
pub fn chronological_cut(timestamps: &[i64], train_fraction: f64) -> usize {
    ((timestamps.len() as f64 * train_fraction).floor() as usize).min(timestamps.len())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl SplitPlan {
    /// `row_id,fold` with folds `train` and `validation`, in row order.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), LabelError> {
        let mut rows: Vec<(usize, &str)> = self
            .train
            .iter()
            .map(|&i| (i, "train"))
            .chain(self.validation.iter().map(|&i| (i, "validation")))
            .collect();
        rows.sort_unstable();
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| LabelError::Csv(e.to_string());
        out.write_record(["row_id", "fold"]).map_err(err)?;
        for (i, fold) in rows {
            out.write_record([i.to_string().as_str(), fold]).map_err(err)?;
        }
        out.flush().map_err(|e| LabelError::Csv(e.to_string()))
    }
}

/// Splits rows into training and validation folds.
///
/// Rows covered by events are grouped into connected components (events
/// sharing a row belong together). For each class, one event is drawn at
/// random and its whole component goes to validation; all other event
/// rows go to training. Uncovered rows are shuffled and the first
/// `floor(0.8 n)` go to training. A class with a single event yields a
/// warning, since training then sees none of it.
///
/// `classes` lists the classes that must be represented; empty means every
/// class present among the events, of which there must be at least one.
pub fn event_aware_split(
    row_index: &[RowKey],
    events: &[AnomalyEvent],
    classes: &[&str],
    seed: u64,
) -> Result<SplitPlan, LabelError> {
    const TRAIN_FRACTION: f64 = 0.8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // rows covered by each event, events without rows dropped
    let mut covered: Vec<(usize, Vec<usize>)> = Vec::new();
    for (j, ev) in events.iter().enumerate() {
        let rows: Vec<usize> = (0..row_index.len()).filter(|&i| ev.covers(&row_index[i])).collect();
        if !rows.is_empty() {
            covered.push((j, rows));
        }
    }

    // union-find over events sharing rows
    let mut parent: Vec<usize> = (0..covered.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut owner: HashMap<usize, usize> = HashMap::new();
    for (k, (_, rows)) in covered.iter().enumerate() {
        for &r in rows {
            if let Some(&o) = owner.get(&r) {
                let (a, b) = (find(&mut parent, k), find(&mut parent, o));
                parent[a] = b;
            } else {
                owner.insert(r, k);
            }
        }
    }

    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (k, (j, _)) in covered.iter().enumerate() {
        by_class.entry(events[*j].class.as_str()).or_default().push(k);
    }
    let required: Vec<&str> = if classes.is_empty() {
        if by_class.is_empty() {
            return Err(LabelError::NoEvents(DEFAULT_CLASS.into()));
        }
        by_class.keys().copied().collect()
    } else {
        classes.to_vec()
    };
    let mut warnings = Vec::new();
    let mut val_components = HashSet::new();
    for class in required {
        let members = by_class
            .get(class)
            .ok_or_else(|| LabelError::NoEvents(class.to_string()))?;
        if members.len() == 1 {
            warnings.push(format!(
                "class '{class}' has a single event; it goes to validation and training sees none"
            ));
        }
        let pick = members[rng.random_range(0..members.len())];
        val_components.insert(find(&mut parent, pick));
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let mut train = Vec::new();
    let mut validation = Vec::new();
    let mut normal = Vec::new();
    for i in 0..row_index.len() {
        match owner.get(&i) {
            Some(&k) if val_components.contains(&find(&mut parent, k)) => validation.push(i),
            Some(_) => train.push(i),
            None => normal.push(i),
        }
    }
    normal.shuffle(&mut rng);
    let n_train = (normal.len() as f64 * TRAIN_FRACTION).floor() as usize;
    train.extend_from_slice(&normal[..n_train]);
    validation.extend_from_slice(&normal[n_train..]);
    train.sort_unstable();
    validation.sort_unstable();
    Ok(SplitPlan {
        train,
        validation,
        seed,
        warnings,
    })
}

pub fn write_events<W: Write>(events: &[AnomalyEvent], w: W) -> Result<(), LabelError> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| LabelError::Csv(e.to_string());
    out.write_record(["entity", "t_start", "t_end", "class"]).map_err(err)?;
    for ev in events {
        out.write_record([
            ev.entity.as_str(),
            &ev.t_start.to_string(),
            &ev.t_end.to_string(),
            ev.class.as_str(),
        ])
        .map_err(err)?;
    }
    out.flush().map_err(|e| LabelError::Csv(e.to_string()))
}

/// Reads `entity,t_start,t_end,class`; a missing or empty class becomes
/// [`DEFAULT_CLASS`].
pub fn read_events<R: Read>(r: R) -> Result<Vec<AnomalyEvent>, LabelError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(r);
    let header = rdr.headers().map_err(|e| LabelError::Csv(e.to_string()))?.clone();
    if header.len() < 3 || &header[0] != "entity" || &header[1] != "t_start" || &header[2] != "t_end" {
        return Err(LabelError::Csv("header must be entity,t_start,t_end,class".into()));
    }
    let mut events = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| LabelError::Csv(e.to_string()))?;
        let int = |k: usize| -> Result<i64, LabelError> {
            rec.get(k)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| LabelError::Csv(format!("row {}: bad integer in column {}", line + 1, k + 1)))
        };
        let class = rec.get(3).filter(|c| !c.is_empty()).unwrap_or(DEFAULT_CLASS);
        events.push(AnomalyEvent::new(&rec[0], int(1)?, int(2)?, class)?);
    }
    Ok(events)
}

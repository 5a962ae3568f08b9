//! Dataset CSV: `entity,t,<feature names...>[,label]`. Per-snapshot rows
//! (no entity) are written with entity `*`.

use std::io::{Read, Write};

use super::{FeatureDataset, FeatureError, Level, RowKey, SeqLayout};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub const SNAPSHOT_ENTITY: &str = "*";

fn csv_err(e: impl std::fmt::Display) -> FeatureError {
    FeatureError::Csv(e.to_string())
}

/// Writes the dataset. Values use Rust's shortest round-trip formatting,
/// so reading back is lossless.
pub fn write_csv<T: Scalar, W: Write>(ds: &FeatureDataset<T>, w: W) -> Result<(), FeatureError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["entity".to_string(), "t".to_string()];
    header.extend(ds.feature_names.iter().cloned());
    if ds.labels.is_some() {
        header.push("label".into());
    }
    out.write_record(&header).map_err(csv_err)?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for (i, key) in ds.row_index.iter().enumerate() {
        rec.clear();
        rec.push(key.entity.clone().unwrap_or_else(|| SNAPSHOT_ENTITY.into()));
        rec.push(key.t.to_string());
        rec.extend(ds.rows.row(i).iter().map(|v| v.to_string()));
        if let Some(l) = &ds.labels {
            rec.push(l[i].to_string());
        }
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush().map_err(csv_err)?;
    Ok(())
}

/// Reads a dataset written by [`write_csv`]. The sequence layout is
/// recovered from the `lag{j}.{channel}` column names.
pub fn read_csv<T: Scalar, R: Read>(level: Level, r: R) -> Result<FeatureDataset<T>, FeatureError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header.len() < 2 || header[0] != "entity" || header[1] != "t" {
        return Err(FeatureError::Csv("header must start with entity,t".into()));
    }
    let has_label = header.last().is_some_and(|h| h == "label");
    let end = header.len() - usize::from(has_label);
    let feature_names = header[2..end].to_vec();
    let width = feature_names.len();
    let mut data = Vec::new();
    let mut row_index = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != header.len() {
            return Err(FeatureError::Csv(format!(
                "row {}: {} fields, expected {}",
                line + 1,
                rec.len(),
                header.len()
            )));
        }
        let entity = match &rec[0] {
            SNAPSHOT_ENTITY => None,
            e => Some(e.to_string()),
        };
        let t = rec[1]
            .parse()
            .map_err(|e| FeatureError::Csv(format!("row {}: t: {e}", line + 1)))?;
        row_index.push(RowKey { entity, t });
        for f in rec.iter().take(end).skip(2) {
            let v: f64 = f
                .parse()
                .map_err(|e| FeatureError::Csv(format!("row {}: '{f}': {e}", line + 1)))?;
            if !v.is_finite() {
                return Err(FeatureError::Csv(format!("row {}: non-finite value", line + 1)));
            }
            data.push(T::lit(v));
        }
        if has_label {
            labels.push(match &rec[end] {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(FeatureError::Csv(format!("row {}: label '{other}'", line + 1)))
                }
            });
        }
    }
    Ok(FeatureDataset {
        level,
        rows: Matrix::from_vec(row_index.len(), width, data),
        row_index,
        labels: has_label.then_some(labels),
        seq: infer_layout(&feature_names),
        feature_names,
    })
}

/// Counts the leading `lag*` columns and the distinct lags among them.
pub fn infer_layout(names: &[String]) -> SeqLayout {
    let lagged: Vec<&str> = names
        .iter()
        .take_while(|n| n.starts_with("lag"))
        .map(|n| n.split('.').next().unwrap_or(""))
        .collect();
    let mut steps = 0;
    let mut prev = None;
    for l in &lagged {
        if prev != Some(*l) {
            steps += 1;
            prev = Some(*l);
        }
    }
    SeqLayout {
        steps,
        channels: if steps == 0 { 0 } else { lagged.len() / steps },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_dataset, WindowConfig};
    use crate::graph::build_graph;
    use crate::ttl::{parse_ttl, Category, OntologySchema};

    #[test]
    fn round_trip_all_levels() {
        let mut quads = Vec::new();
        for t in 0..5i64 {
            let text = format!(
                "@prefix k: <http://example.org/k8s#> .
                 k:s a k:Service ; k:latency {} . k:c a k:Connection ; k:toService k:s ; k:fromPod k:p .
                 k:p a k:Pod ; k:cpu {} .",
                0.1 * t as f64,
                1.0 / (t as f64 + 3.0)
            );
            quads.extend(parse_ttl(&text, 15 * t).unwrap());
        }
        let g = build_graph::<f64>(&quads, &OntologySchema::kubernetes()).unwrap();
        for level in [Level::D1, Level::D2, Level::D3] {
            let mut ds = build_dataset(&g, level, &WindowConfig::default().with_tau(2), Category::Service)
                .unwrap();
            ds.labels = Some((0..ds.len()).map(|i| (i % 2) as u8).collect());
            let mut buf = Vec::new();
            write_csv(&ds, &mut buf).unwrap();
            let back: FeatureDataset<f64> = read_csv(level, buf.as_slice()).unwrap();
            assert_eq!(back, ds);
        }
    }

    #[test]
    fn rejects_bad_header() {
        let r = read_csv::<f64, _>(Level::D1, "x,y\n".as_bytes());
        assert!(matches!(r, Err(FeatureError::Csv(_))));
    }
}

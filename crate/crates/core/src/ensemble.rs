//! Soft and hard voting over member scores.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::RowKey;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnsembleError {
    #[error("member {member} has {got} rows, expected {expected}")]
    Misaligned {
        member: usize,
        got: usize,
        expected: usize,
    },
    #[error("non-binary vote {value} from member {member}")]
    NonBinary { member: usize, value: u8 },
    #[error("an ensemble needs at least two members, got {0}")]
    TooFewMembers(usize),
    #[error("{0}")]
    Config(String),
    #[error("no score for row ({entity}, {t})")]
    MissingRow { entity: String, t: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteMode {
    Soft,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Unanimous,
    Majority,
}

impl FromStr for VoteMode {
    type Err = EnsembleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "soft" => Ok(VoteMode::Soft),
            "hard" => Ok(VoteMode::Hard),
            _ => Err(EnsembleError::Config(format!("unknown voting mode '{s}'"))),
        }
    }
}

impl FromStr for Mechanism {
    type Err = EnsembleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unanimous" => Ok(Mechanism::Unanimous),
            "majority" => Ok(Mechanism::Majority),
            _ => Err(EnsembleError::Config(format!("unknown voting mechanism '{s}'"))),
        }
    }
}

impl fmt::Display for VoteMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VoteMode::Soft => "soft",
            VoteMode::Hard => "hard",
        })
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mechanism::Unanimous => "unanimous",
            Mechanism::Majority => "majority",
        })
    }
}

/// Voting rule. The mechanism is present exactly when the mode is hard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub mode: VoteMode,
    pub mechanism: Option<Mechanism>,
    pub threshold: f64,
}

impl EnsembleConfig {
    pub fn soft(threshold: f64) -> Self {
        Self {
            mode: VoteMode::Soft,
            mechanism: None,
            threshold,
        }
    }

    pub fn hard(mechanism: Mechanism, threshold: f64) -> Self {
        Self {
            mode: VoteMode::Hard,
            mechanism: Some(mechanism),
            threshold,
        }
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(EnsembleError::Config(format!(
                "threshold {} outside (0, 1)",
                self.threshold
            )));
        }
        match (self.mode, self.mechanism) {
            (VoteMode::Soft, None) | (VoteMode::Hard, Some(_)) => Ok(()),
            (VoteMode::Soft, Some(_)) => Err(EnsembleError::Config(
                "soft voting takes no mechanism".into(),
            )),
            (VoteMode::Hard, None) => Err(EnsembleError::Config(
                "hard voting needs a mechanism".into(),
            )),
        }
    }

    /// Combines member scores (one vector per member) into per-row scores
    /// and labels. Hard voting thresholds each member first and reports the
    /// fraction of positive votes as the score.
    pub fn combine(&self, scores: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<u8>), EnsembleError> {
        self.validate()?;
        if scores.len() < 2 {
            return Err(EnsembleError::TooFewMembers(scores.len()));
        }
        match self.mechanism {
            None => vote_soft(scores, self.threshold),
            Some(m) => {
                let votes: Vec<Vec<u8>> = scores
                    .iter()
                    .map(|s| s.iter().map(|&v| u8::from(v >= self.threshold)).collect())
                    .collect();
                let labels = vote_hard(&votes, m)?;
                let k = votes.len() as f64;
                let frac = (0..labels.len())
                    .map(|i| votes.iter().map(|v| f64::from(v[i])).sum::<f64>() / k)
                    .collect();
                Ok((frac, labels))
            }
        }
    }
}

fn check_aligned<V>(rows: &[Vec<V>]) -> Result<usize, EnsembleError> {
    let n = rows.first().map_or(0, Vec::len);
    for (member, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(EnsembleError::Misaligned {
                member,
                got: r.len(),
                expected: n,
            });
        }
    }
    Ok(n)
}

/// Average member score per row; label 1 iff the average reaches `threshold`.
pub fn vote_soft(scores: &[Vec<f64>], threshold: f64) -> Result<(Vec<f64>, Vec<u8>), EnsembleError> {
    let n = check_aligned(scores)?;
    let k = scores.len() as f64;
    // rows where all members agree return that score unchanged
    let avg: Vec<f64> = (0..n)
        .map(|i| {
            let first = scores[0][i];
            if scores.iter().all(|s| s[i] == first) {
                first
            } else {
                scores.iter().map(|s| s[i]).sum::<f64>() / k
            }
        })
        .collect();
    let labels = avg.iter().map(|&a| u8::from(a >= threshold)).collect();
    Ok((avg, labels))
}

/// Unanimous: every member votes 1. Majority: strictly more than half vote
/// 1, so an even split is 0.
pub fn vote_hard(votes: &[Vec<u8>], mechanism: Mechanism) -> Result<Vec<u8>, EnsembleError> {
    let n = check_aligned(votes)?;
    for (member, v) in votes.iter().enumerate() {
        if let Some(&value) = v.iter().find(|&&x| x > 1) {
            return Err(EnsembleError::NonBinary { member, value });
        }
    }
    let k = votes.len();
    Ok((0..n)
        .map(|i| {
            let yes = votes.iter().filter(|v| v[i] == 1).count();
            u8::from(match mechanism {
                Mechanism::Unanimous => k > 0 && yes == k,
                Mechanism::Majority => 2 * yes > k,
            })
        })
        .collect())
}

/// Re-indexes member scores onto `target` rows. Scores keyed by snapshot
/// (no entity) are broadcast to every entity row at that timestamp.
pub fn align_scores(
    source: &[RowKey],
    scores: &[f64],
    target: &[RowKey],
) -> Result<Vec<f64>, EnsembleError> {
    if source.len() != scores.len() {
        return Err(EnsembleError::Misaligned {
            member: 0,
            got: scores.len(),
            expected: source.len(),
        });
    }
    let lookup: HashMap<&RowKey, f64> = source.iter().zip(scores.iter().copied()).collect();
    let by_t: HashMap<i64, f64> = source
        .iter()
        .zip(scores)
        .filter(|(k, _)| k.entity.is_none())
        .map(|(k, &s)| (k.t, s))
        .collect();
    target
        .iter()
        .map(|k| {
            lookup
                .get(k)
                .or_else(|| by_t.get(&k.t))
                .copied()
                .ok_or_else(|| EnsembleError::MissingRow {
                    entity: k.entity.clone().unwrap_or_default(),
                    t: k.t,
                })
        })
        .collect()
}

/// Ensemble description on disk: member checkpoints plus the voting rule.
/// Relative member paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleManifest {
    pub mode: VoteMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<Mechanism>,
    pub threshold: f64,
    pub members: Vec<PathBuf>,
}

impl EnsembleManifest {
    pub fn config(&self) -> EnsembleConfig {
        EnsembleConfig {
            mode: self.mode,
            mechanism: self.mechanism,
            threshold: self.threshold,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, EnsembleError> {
        let m: Self = toml::from_str(text).map_err(|e| EnsembleError::Config(e.to_string()))?;
        m.config().validate()?;
        if m.members.len() < 2 {
            return Err(EnsembleError::TooFewMembers(m.members.len()));
        }
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("ensemble manifest serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_average() {
        let (avg, lab) = vote_soft(&[vec![0.9], vec![0.2], vec![0.7]], 0.5).unwrap();
        assert!((avg[0] - 0.6).abs() < 1e-15);
        assert_eq!(lab, vec![1]);
    }

    #[test]
    fn identical_members_are_idempotent() {
        let s = vec![0.1, 0.5, 0.7, 0.3333];
        let (avg, lab) = vote_soft(&[s.clone(), s.clone(), s.clone()], 0.5).unwrap();
        assert_eq!(avg, s);
        assert_eq!(lab, vec![0, 1, 1, 0]);
    }

    #[test]
    fn hard_rules() {
        let v = [vec![1], vec![1], vec![0]];
        assert_eq!(vote_hard(&v, Mechanism::Unanimous).unwrap(), vec![0]);
        assert_eq!(vote_hard(&v, Mechanism::Majority).unwrap(), vec![1]);
        assert_eq!(vote_hard(&[vec![1], vec![1]], Mechanism::Majority).unwrap(), vec![1]);
        assert_eq!(vote_hard(&[vec![1], vec![0]], Mechanism::Majority).unwrap(), vec![0]);
    }

    #[test]
    fn input_errors() {
        assert!(matches!(
            vote_soft(&[vec![0.1, 0.2], vec![0.3]], 0.5),
            Err(EnsembleError::Misaligned { member: 1, .. })
        ));
        assert!(matches!(
            vote_hard(&[vec![2]], Mechanism::Majority),
            Err(EnsembleError::NonBinary { value: 2, .. })
        ));
        assert!(EnsembleConfig::soft(0.5).combine(&[vec![0.1]]).is_err());
        let bad = EnsembleConfig {
            mode: VoteMode::Soft,
            mechanism: Some(Mechanism::Majority),
            threshold: 0.5,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn hard_combine_thresholds_members() {
        let cfg = EnsembleConfig::hard(Mechanism::Unanimous, 0.5);
        let (frac, lab) = cfg.combine(&[vec![0.6, 0.6], vec![0.5, 0.4]]).unwrap();
        assert_eq!(lab, vec![1, 0]);
        assert_eq!(frac, vec![1.0, 0.5]);
    }

    #[test]
    fn snapshot_scores_broadcast() {
        let src = vec![RowKey::snapshot(0), RowKey::snapshot(15)];
        let tgt = vec![RowKey::entity("a", 0), RowKey::entity("a", 15), RowKey::entity("b", 15)];
        assert_eq!(align_scores(&src, &[0.1, 0.9], &tgt).unwrap(), vec![0.1, 0.9, 0.9]);
        assert!(align_scores(&src, &[0.1, 0.9], &[RowKey::entity("a", 30)]).is_err());
    }

    #[test]
    fn manifest_round_trips_and_validates() {
        let m = EnsembleManifest {
            mode: VoteMode::Hard,
            mechanism: Some(Mechanism::Unanimous),
            threshold: 0.5,
            members: vec!["xgb_d2.json".into(), "sa_d3.json".into()],
        };
        assert_eq!(EnsembleManifest::from_toml(&m.to_toml()).unwrap(), m);
        let soft = "mode = \"soft\"\nthreshold = 0.5\nmembers = [\"a\", \"b\"]\n";
        assert_eq!(EnsembleManifest::from_toml(soft).unwrap().config(), EnsembleConfig::soft(0.5));
        assert!(EnsembleManifest::from_toml("mode = \"hard\"\nthreshold = 0.5\nmembers = [\"a\", \"b\"]").is_err());
        assert!(EnsembleManifest::from_toml("mode = \"soft\"\nthreshold = 0.5\nmembers = [\"a\"]").is_err());
    }
}

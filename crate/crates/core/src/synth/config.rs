//! Scenario description, loaded from TOML.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::ttl::Category;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyClass {
    /// CPU of the target's pods multiplied by the magnitude.
    CpuSpike,
    /// One pod zeroed and not ready, restarting repeatedly.
    CrashLoop,
    /// A burst of short-lived connections.
    ConnStorm,
}

impl AnomalyClass {
    pub const ALL: [AnomalyClass; 3] = [AnomalyClass::CpuSpike, AnomalyClass::CrashLoop, AnomalyClass::ConnStorm];

    pub fn tag(self) -> &'static str {
        match self {
            AnomalyClass::CpuSpike => "cpu_spike",
            AnomalyClass::CrashLoop => "crash_loop",
            AnomalyClass::ConnStorm => "conn_storm",
        }
    }
}

impl fmt::Display for AnomalyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for AnomalyClass {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AnomalyClass::ALL
            .into_iter()
            .find(|c| c.tag() == s)
            .ok_or_else(|| SynthError::Config(format!("unknown anomaly class '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Topology {
    pub clusters: usize,
    pub nodes: usize,
    pub pods: usize,
    pub services: usize,
    pub connections: usize,
}

impl Default for Topology {
    fn default() -> Self {
        Self {
            clusters: 1,
            nodes: 3,
            pods: 8,
            services: 4,
            connections: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalySpec {
    pub class: AnomalyClass,
    #[serde(default = "default_target")]
    pub target: Category,
    /// Upper bound on the number of injected events of this kind.
    pub count: usize,
    /// Inclusive event length range, in snapshots.
    pub duration: [usize; 2],
    /// CPU multiplier for spikes, restarts per minute for crash loops,
    /// ephemeral connection rate multiplier for storms.
    pub magnitude: f64,
}

fn default_target() -> Category {
    Category::Service
}

/// Platform-wide load windows that are labeled normal. Locally they look
/// like a CPU spike on every service at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaintenanceSpec {
    pub count: usize,
    pub duration: [usize; 2],
    pub magnitude: f64,
}

impl Default for MaintenanceSpec {
    fn default() -> Self {
        Self {
            count: 0,
            duration: [20, 60],
            magnitude: 1.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Number of snapshots.
    pub duration: usize,
    /// Seconds between snapshots; also the timestamp step.
    pub cadence: i64,
    pub topology: Topology,
    pub anomalies: Vec<AnomalySpec>,
    /// Fraction of target rows to label anomalous.
    pub target_rate: f64,
    /// Stationary relative standard deviation of attribute noise.
    pub noise: f64,
    /// Lag-one autocorrelation of attribute noise.
    pub persistence: f64,
    /// Relative amplitude of the daily load cycle.
    pub daily_amplitude: f64,
    /// Relative shift of the target's own attributes during an anomaly.
    pub own_signal: f64,
    /// Per-snapshot probability that some pod moves to the least loaded
    /// other node.
    pub reschedule_rate: f64,
    /// Per-snapshot probability of a spontaneous pod restart.
    pub restart_rate: f64,
    /// Short-lived connection slots per target entity.
    pub ephemeral_slots: usize,
    /// Probability that an ephemeral slot is open in a normal snapshot.
    pub ephemeral_rate: f64,
    pub maintenance: MaintenanceSpec,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let spec = |class, magnitude| AnomalySpec {
            class,
            target: Category::Service,
            count: 16,
            duration: [20, 60],
            magnitude,
        };
        Self {
            seed: 7,
            duration: 5760,
            cadence: 15,
            topology: Topology::default(),
            anomalies: vec![
                spec(AnomalyClass::CpuSpike, 1.6),
                spec(AnomalyClass::CrashLoop, 1.0),
                spec(AnomalyClass::ConnStorm, 4.0),
            ],
            target_rate: 0.04,
            noise: 0.05,
            persistence: 0.9,
            daily_amplitude: 0.05,
            own_signal: 0.1,
            reschedule_rate: 1.0 / 720.0,
            restart_rate: 1.0 / 500.0,
            ephemeral_slots: 6,
            ephemeral_rate: 0.2,
            maintenance: MaintenanceSpec::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let cfg: Self = toml::from_str(text).map_err(|e| SynthError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let t = &self.topology;
        let bad = |m: &str| Err(SynthError::Config(m.to_string()));
        if [t.clusters, t.nodes, t.pods, t.services, t.connections].contains(&0) {
            return bad("topology sizes must be at least 1");
        }
        if self.duration == 0 || self.cadence <= 0 {
            return bad("duration and cadence must be positive");
        }
        if !(self.target_rate > 0.0 && self.target_rate < 0.5) {
            return bad("target rate must lie in (0, 0.5)");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite())
            || !(0.0..1.0).contains(&self.persistence)
            || !(0.0..1.0).contains(&self.daily_amplitude)
            || !(self.own_signal >= 0.0 && self.own_signal.is_finite())
            || !(0.0..=1.0).contains(&self.reschedule_rate)
            || !(0.0..=1.0).contains(&self.restart_rate)
            || !(0.0..=1.0).contains(&self.ephemeral_rate)
        {
            return bad("noise parameters out of range");
        }
        let target = self.anomalies.first().map(|a| a.target);
        for a in &self.anomalies {
            let [lo, hi] = a.duration;
            if lo == 0 || lo > hi {
                return bad(&format!("{}: duration range must be positive and ordered", a.class));
            }
            if !(a.magnitude > 0.0 && a.magnitude.is_finite()) {
                return bad(&format!("{}: magnitude must be positive", a.class));
            }
            if !matches!(a.target, Category::Service | Category::Pod) {
                return bad(&format!("{}: anomalies target services or pods", a.class));
            }
            if Some(a.target) != target {
                return bad("all anomaly specs must share one target category");
            }
        }
        let m = &self.maintenance;
        if m.count > 0 && (m.duration[0] == 0 || m.duration[0] > m.duration[1] || !(m.magnitude > 0.0)) {
            return bad("maintenance windows need a positive duration range and magnitude");
        }
        Ok(())
    }

    /// Category whose rows carry the labels.
    pub fn target(&self) -> Category {
        self.anomalies.first().map_or(Category::Service, |a| a.target)
    }

    /// Snapshots per simulated day at this cadence.
    pub fn day_length(&self) -> f64 {
        86_400.0 / self.cadence as f64
    }
}

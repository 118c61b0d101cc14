//! Simulation settings and their `key=value` text form.

use std::fmt;
use std::str::FromStr;

use crate::agents::AgentConfig;
use crate::error::{Error, Result};
use crate::forecast::SmoothingParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ResponseMode {
    /// Innate sensors block but never signal.
    Innate,
    /// Innate sensors also activate neighboring adaptive sensors.
    Adaptive,
}

impl ResponseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ResponseMode::Innate => "innate",
            ResponseMode::Adaptive => "adaptive",
        }
    }
}

impl fmt::Display for ResponseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ResponseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "innate" => Ok(ResponseMode::Innate),
            "adaptive" => Ok(ResponseMode::Adaptive),
            _ => Err(Error::config(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub nodes: usize,
    /// Maximum children per node in the spanning tree.
    pub branching: usize,
    /// Extra edges per node.
    pub cyclic: f64,
    /// Packets per step per edge.
    pub capacity: u32,
    /// Legitimate load as a fraction of edge capacity.
    pub legit_volume: f64,
    pub flows_per_node: usize,
    /// Flood rate as a fraction of the source's outgoing capacity.
    pub attack_power: f64,
    pub attack_source: Option<u32>,
    pub attack_target: Option<u32>,
    pub attack_port: u16,
    pub spoofed_sources: usize,
    pub attack_start: usize,
    pub attack_steps: usize,
    /// Horizon in steps.
    pub steps: usize,
    pub packets_per_obs: usize,
    /// Minimum attack share for a window to count as an attack window.
    pub attack_share_threshold: f64,
    /// Delivered share of injected attack below which the attack is blocked.
    pub blocked_threshold: f64,
    /// End the run once the flood has drained and every sensor still holding
    /// an activation against it has already been counted as a violation.
    pub stop_when_quiet: bool,
    pub mode: ResponseMode,
    pub agent: AgentConfig,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            nodes: 20,
            branching: 3,
            cyclic: 0.3,
            capacity: 200,
            legit_volume: 0.3,
            flows_per_node: 4,
            attack_power: 0.35,
            attack_source: None,
            attack_target: None,
            attack_port: 80,
            spoofed_sources: 10,
            attack_start: 400,
            attack_steps: 60,
            steps: 800,
            packets_per_obs: 100,
            attack_share_threshold: 0.1,
            blocked_threshold: 0.1,
            stop_when_quiet: false,
            mode: ResponseMode::Adaptive,
            agent: AgentConfig::default(),
            seed: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn parse_node(key: &str, value: &str) -> Result<Option<u32>> {
    if value.is_empty() || value == "auto" {
        return Ok(None);
    }
    let digits = value.strip_prefix('n').unwrap_or(value);
    parse::<u32>(key, digits).map(Some)
}

fn fmt_node(v: Option<u32>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| x.to_string())
}

impl SimConfig {
    /// Keys accepted by [`set`](Self::set), in canonical output order.
    pub const KEYS: &'static [&'static str] = &[
        "nodes",
        "branching",
        "cyclic",
        "capacity",
        "legit_volume",
        "flows_per_node",
        "attack_power",
        "attack_source",
        "attack_target",
        "attack_port",
        "spoofed_sources",
        "attack_start",
        "attack_steps",
        "steps",
        "packets_per_obs",
        "attack_share_threshold",
        "blocked_threshold",
        "stop_when_quiet",
        "mode",
        "seed",
        "renyi_alpha",
        "window_n",
        "hw_season",
        "hw_params",
        "error_window",
        "confidence",
        "quarantine_q",
        "memory_capacity",
        "jaccard_min",
        "k_floor",
        "r_cap",
        "k_max",
        "elbow_threshold",
    ];

    /// Sets one field by name. Dashes and underscores are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let k = key.as_str();
        match k {
            "nodes" => self.nodes = parse(k, value)?,
            "branching" => self.branching = parse(k, value)?,
            "cyclic" => self.cyclic = parse(k, value)?,
            "capacity" => self.capacity = parse(k, value)?,
            "legit_volume" => self.legit_volume = parse(k, value)?,
            "flows_per_node" => self.flows_per_node = parse(k, value)?,
            "attack_power" => self.attack_power = parse(k, value)?,
            "attack_source" => self.attack_source = parse_node(k, value)?,
            "attack_target" => self.attack_target = parse_node(k, value)?,
            "attack_port" => self.attack_port = parse(k, value)?,
            "spoofed_sources" => self.spoofed_sources = parse(k, value)?,
            "attack_start" => self.attack_start = parse(k, value)?,
            "attack_steps" => self.attack_steps = parse(k, value)?,
            "steps" => self.steps = parse(k, value)?,
            "packets_per_obs" => self.packets_per_obs = parse(k, value)?,
            "attack_share_threshold" => self.attack_share_threshold = parse(k, value)?,
            "blocked_threshold" => self.blocked_threshold = parse(k, value)?,
            "stop_when_quiet" => self.stop_when_quiet = parse_bool(k, value)?,
            "mode" => self.mode = value.parse()?,
            "seed" => self.seed = parse(k, value)?,
            "renyi_alpha" => self.agent.renyi_alpha = parse(k, value)?,
            "window_n" => self.agent.detector.window_n = parse(k, value)?,
            "hw_season" => self.agent.detector.season_len = parse(k, value)?,
            "hw_params" => {
                self.agent.detector.params = if value == "fit" {
                    None
                } else {
                    let parts: Vec<f64> = value
                        .split(':')
                        .map(|p| parse(k, p))
                        .collect::<Result<_>>()?;
                    if parts.len() != 3 {
                        return Err(Error::config("hw_params: expected fit or a:b:g"));
                    }
                    Some(SmoothingParams::new(parts[0], parts[1], parts[2])?)
                }
            }
            "error_window" => self.agent.detector.error_window = parse(k, value)?,
            "confidence" => self.agent.detector.confidence = parse(k, value)?,
            "quarantine_q" => self.agent.quarantine_q = parse(k, value)?,
            "memory_capacity" => self.agent.memory_capacity = parse(k, value)?,
            "jaccard_min" => self.agent.jaccard_min = parse(k, value)?,
            "k_floor" => self.agent.k_floor = parse(k, value)?,
            "r_cap" => self.agent.r_cap = parse(k, value)?,
            "k_max" => self.agent.identify.k_max = parse(k, value)?,
            "elbow_threshold" => self.agent.identify.elbow_threshold = parse(k, value)?,
            _ => return Err(Error::config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let a = &self.agent;
        Some(match key {
            "nodes" => self.nodes.to_string(),
            "branching" => self.branching.to_string(),
            "cyclic" => self.cyclic.to_string(),
            "capacity" => self.capacity.to_string(),
            "legit_volume" => self.legit_volume.to_string(),
            "flows_per_node" => self.flows_per_node.to_string(),
            "attack_power" => self.attack_power.to_string(),
            "attack_source" => fmt_node(self.attack_source),
            "attack_target" => fmt_node(self.attack_target),
            "attack_port" => self.attack_port.to_string(),
            "spoofed_sources" => self.spoofed_sources.to_string(),
            "attack_start" => self.attack_start.to_string(),
            "attack_steps" => self.attack_steps.to_string(),
            "steps" => self.steps.to_string(),
            "packets_per_obs" => self.packets_per_obs.to_string(),
            "attack_share_threshold" => self.attack_share_threshold.to_string(),
            "blocked_threshold" => self.blocked_threshold.to_string(),
            "stop_when_quiet" => self.stop_when_quiet.to_string(),
            "mode" => self.mode.to_string(),
            "seed" => self.seed.to_string(),
            "renyi_alpha" => a.renyi_alpha.to_string(),
            "window_n" => a.detector.window_n.to_string(),
            "hw_season" => a.detector.season_len.to_string(),
            "hw_params" => match a.detector.params {
                None => "fit".to_string(),
                Some(p) => format!("{}:{}:{}", p.alpha, p.beta, p.gamma),
            },
            "error_window" => a.detector.error_window.to_string(),
            "confidence" => a.detector.confidence.to_string(),
            "quarantine_q" => a.quarantine_q.to_string(),
            "memory_capacity" => a.memory_capacity.to_string(),
            "jaccard_min" => a.jaccard_min.to_string(),
            "k_floor" => a.k_floor.to_string(),
            "r_cap" => a.r_cap.to_string(),
            "k_max" => a.identify.k_max.to_string(),
            "elbow_threshold" => a.identify.elbow_threshold.to_string(),
            _ => return None,
        })
    }

    /// Applies `key=value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected key=value".into(),
            })?;
            self.set(k, v).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Every setting as `key=value`, in [`KEYS`](Self::KEYS) order.
    pub fn to_lines(&self) -> Vec<String> {
        Self::KEYS
            .iter()
            .map(|k| format!("{k}={}", self.get(k).expect("known key")))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let frac = |name: &str, v: f64| -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        frac("legit_volume", self.legit_volume)?;
        frac("attack_power", self.attack_power)?;
        frac("attack_share_threshold", self.attack_share_threshold)?;
        frac("blocked_threshold", self.blocked_threshold)?;
        if self.nodes < 3 {
            return Err(Error::config("nodes must be at least 3"));
        }
        if self.branching == 0 || self.branching >= self.nodes {
            return Err(Error::config(format!(
                "branching must lie in 1..{}, got {}",
                self.nodes, self.branching
            )));
        }
        if self.packets_per_obs == 0 {
            return Err(Error::config("packets_per_obs must be at least 1"));
        }
        if self.capacity == 0 {
            return Err(Error::config("capacity must be positive"));
        }
        if self.attack_power > 0.0 && self.spoofed_sources == 0 {
            return Err(Error::config("spoofed_sources must be at least 1"));
        }
        for (name, v) in [("attack_source", self.attack_source), ("attack_target", self.attack_target)] {
            if let Some(v) = v {
                if v as usize >= self.nodes {
                    return Err(Error::config(format!("{name} {v} is not a node")));
                }
            }
        }
        if let (Some(s), Some(t)) = (self.attack_source, self.attack_target) {
            if s == t {
                return Err(Error::config("attack source and target must differ"));
            }
        }
        self.agent
            .validate()
            .map_err(|e| Error::config(e.to_string()))?;
        Ok(())
    }
}

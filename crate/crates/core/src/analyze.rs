//! Offline trace analysis: windowing, entropy, detection and source
//! identification over one recorded packet trace.

use std::fmt::Write as _;

use crate::detector::{DetectorConfig, DetectorVerdict, StreamDetector};
use crate::entropy::{flow_probabilities, histogram_entropy, EntropyPoint};
use crate::error::{Error, Result};
use crate::identify::{blockable, identify_sources, IdentifyConfig, SuspectSet};
use crate::traffic::{flow_histogram, window_packets, FlowKey, PacketRecord};

pub const ALERT_HEADER: &str =
    "t,observed,forecast,lower,upper,direction,centroid_p,cluster_share,degenerate,suspects";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyzeConfig {
    pub packets_per_obs: usize,
    pub renyi_alpha: f64,
    pub detector: DetectorConfig,
    pub identify: IdentifyConfig,
}

impl AnalyzeConfig {
    pub fn new(packets_per_obs: usize) -> Self {
        AnalyzeConfig {
            packets_per_obs,
            renyi_alpha: 1.0,
            detector: DetectorConfig::default(),
            identify: IdentifyConfig::default(),
        }
    }
}

/// An anomalous verdict with the flows identified as its sources.
#[derive(Clone, Debug, PartialEq)]
pub struct Alert {
    pub verdict: DetectorVerdict,
    pub suspects: SuspectSet<FlowKey>,
    /// Suspects after the broad-cluster guard; empty when inconclusive.
    pub blockable: Vec<FlowKey>,
}

impl Alert {
    /// Suspects are `|`-joined `src>dst:port` keys.
    pub fn to_record(&self) -> String {
        let v = &self.verdict;
        let suspects: Vec<String> = self.blockable.iter().map(ToString::to_string).collect();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            v.t,
            v.observed,
            v.forecast,
            v.interval.lower,
            v.interval.upper,
            v.direction,
            self.suspects.centroid_p,
            self.suspects.cluster_share,
            u8::from(self.suspects.is_degenerate()),
            suspects.join("|")
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Analysis {
    pub packets: usize,
    /// Trailing packets that did not fill an observation.
    pub discarded: usize,
    pub entropy: Vec<EntropyPoint>,
    pub verdicts: Vec<DetectorVerdict>,
    pub alerts: Vec<Alert>,
    pub warnings: Vec<String>,
}

impl Analysis {
    pub fn verdicts_csv(&self) -> String {
        let mut s = String::from(crate::detector::VERDICT_HEADER);
        s.push('\n');
        for v in &self.verdicts {
            let _ = writeln!(s, "{}", v.to_record());
        }
        s
    }

    pub fn alerts_csv(&self) -> String {
        let mut s = String::from(ALERT_HEADER);
        s.push('\n');
        for a in &self.alerts {
            let _ = writeln!(s, "{}", a.to_record());
        }
        s
    }
}

/// Runs the full pipeline. A trace too short to finish warm-up yields no
/// verdicts and a warning rather than an error.
pub fn analyze_records(records: &[PacketRecord], cfg: &AnalyzeConfig) -> Result<Analysis> {
    let observations = window_packets(records, cfg.packets_per_obs)?;
    let mut detector = StreamDetector::new(cfg.detector)?;
    let mut out = Analysis {
        packets: records.len(),
        discarded: records.len() % cfg.packets_per_obs,
        ..Default::default()
    };
    for obs in &observations {
        let wrap = |e: Error| Error::AtObservation {
            index: obs.index,
            source: Box::new(e),
        };
        let hist = flow_histogram(obs).map_err(wrap)?;
        let value = histogram_entropy(&hist, cfg.renyi_alpha).map_err(wrap)?;
        out.entropy.push(EntropyPoint {
            t: obs.index,
            value,
            alpha: cfg.renyi_alpha,
        });
        let Some(verdict) = detector.observe(value).map_err(wrap)? else {
            continue;
        };
        if verdict.anomalous {
            let dist = flow_probabilities(&hist).map_err(wrap)?;
            let suspects = identify_sources(dist.as_slice(), verdict.t, &cfg.identify).map_err(wrap)?;
            let flows = blockable(&suspects, dist.as_slice());
            out.alerts.push(Alert {
                verdict,
                suspects,
                blockable: flows,
            });
        }
        out.verdicts.push(verdict);
    }
    let needed = cfg.detector.window_n;
    if observations.len() <= needed {
        out.warnings.push(format!(
            "trace yields {} observations of {} packets; warm-up needs {} before the first verdict",
            observations.len(),
            cfg.packets_per_obs,
            needed
        ));
    }
    if out.discarded > 0 {
        out.warnings.push(format!("{} trailing packets discarded", out.discarded));
    }
    Ok(out)
}

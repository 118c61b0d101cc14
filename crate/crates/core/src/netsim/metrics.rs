//! Per-run counters and the metrics table.

use std::fmt::Write as _;

use super::config::ResponseMode;

/// Equal-width bins over the agent location fraction `[0, 1]`.
pub const LOCATION_BINS: usize = 5;

/// Location bin of `x` in `[0, 1]`; the last bin is closed.
pub fn location_bin(x: f64) -> usize {
    ((x * LOCATION_BINS as f64).floor() as usize).min(LOCATION_BINS - 1)
}

/// Packet conservation counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub injected: u64,
    pub delivered: u64,
    pub dropped_block: u64,
    pub dropped_nopath: u64,
    pub in_flight: u64,
}

impl Counts {
    pub fn is_conserved(&self) -> bool {
        self.injected == self.delivered + self.dropped_block + self.dropped_nopath + self.in_flight
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub mode: ResponseMode,
    pub nodes: usize,
    pub source: u32,
    pub target: u32,
    pub attack_power: f64,
    /// Unblocked hop distance from source to target.
    pub path_hops: u32,
    pub steps_run: usize,
    pub legit: Counts,
    pub attack: Counts,
    pub attack_windows: u64,
    pub attack_alerts: u64,
    pub clean_windows: u64,
    pub clean_alerts: u64,
    /// Windows with some attack packets but below the share threshold.
    pub marginal_windows: u64,
    pub location_windows: [u64; LOCATION_BINS],
    pub location_alerts: [u64; LOCATION_BINS],
    /// Distinct legitimate flows that entered any block table.
    pub legit_flows_blocked: u64,
    pub blocked_threshold: f64,
    /// End of the step after which no attack packet remained anywhere.
    pub quiet_step: Option<usize>,
    /// Adaptive sensors still holding a flood activation after `Q` further
    /// windows.
    pub quiescence_violations: u64,
    /// Adaptive sensors holding a flood activation at the end of the run
    /// that had not yet processed `Q` windows since the quiet point.
    pub unresolved: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

impl MetricsReport {
    pub fn tpr(&self) -> Option<f64> {
        ratio(self.attack_alerts, self.attack_windows)
    }

    pub fn fpr(&self) -> Option<f64> {
        ratio(self.clean_alerts, self.clean_windows)
    }

    pub fn location_tpr(&self, bin: usize) -> Option<f64> {
        ratio(self.location_alerts[bin], self.location_windows[bin])
    }

    /// `None` when no flood packet was injected; otherwise whether the
    /// delivered share stayed below the threshold.
    pub fn blocked(&self) -> Option<bool> {
        (self.attack.injected > 0).then(|| {
            (self.attack.delivered as f64) < self.blocked_threshold * self.attack.injected as f64
        })
    }

    pub fn header() -> String {
        let mut h = String::from(
            "mode,nodes,source,target,attack_power,path_hops,steps_run,\
             attack_windows,attack_alerts,tpr,clean_windows,clean_alerts,fpr,marginal_windows",
        );
        for b in 0..LOCATION_BINS {
            let _ = write!(h, ",loc{b}_windows,loc{b}_alerts,loc{b}_tpr");
        }
        for p in ["attack", "legit"] {
            let _ = write!(
                h,
                ",{p}_injected,{p}_delivered,{p}_dropped_block,{p}_dropped_nopath,{p}_in_flight"
            );
        }
        h.push_str(
            ",blocked,degenerate,legit_flows_blocked,quiet_step,quiescence_violations,unresolved",
        );
        h
    }

    pub fn row(&self) -> String {
        let mut r = format!(
            "{},{},{},{},{:.6},{},{},{},{},{},{},{},{},{}",
            self.mode,
            self.nodes,
            self.source,
            self.target,
            self.attack_power,
            self.path_hops,
            self.steps_run,
            self.attack_windows,
            self.attack_alerts,
            opt(self.tpr()),
            self.clean_windows,
            self.clean_alerts,
            opt(self.fpr()),
            self.marginal_windows,
        );
        for b in 0..LOCATION_BINS {
            let _ = write!(
                r,
                ",{},{},{}",
                self.location_windows[b],
                self.location_alerts[b],
                opt(self.location_tpr(b))
            );
        }
        for c in [&self.attack, &self.legit] {
            let _ = write!(
                r,
                ",{},{},{},{},{}",
                c.injected, c.delivered, c.dropped_block, c.dropped_nopath, c.in_flight
            );
        }
        let blocked = self.blocked();
        let _ = write!(
            r,
            ",{},{},{},{},{},{}",
            // no flood: mitigation trivially holds and is flagged degenerate
            u8::from(blocked.unwrap_or(true)),
            u8::from(blocked.is_none()),
            self.legit_flows_blocked,
            self.quiet_step.map_or_else(String::new, |s| s.to_string()),
            self.quiescence_violations,
            self.unresolved
        );
        r
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", Self::header(), self.row())
    }
}

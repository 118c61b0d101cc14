//! Prediction intervals around the forecast, anomaly verdicts, and the
//! restriction parameter `K` that scales interval width.

use std::collections::VecDeque;
use std::fmt;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::forecast::{fit_parameters, init_state, HoltWintersState, SmoothingParams};

pub const DEFAULT_CONFIDENCE: f64 = 0.95;
pub const DEFAULT_ERROR_WINDOW: usize = 24;
pub const DEFAULT_WINDOW_N: usize = 48;
pub const VARIANCE_FLOOR: f64 = 1e-12;
pub const DEFAULT_K_FLOOR: f64 = 0.5;
pub const DEFAULT_R_CAP: f64 = 0.95;

/// Two-sided standard-normal quantile for `confidence`, e.g. 1.959964 at 0.95.
pub fn z_quantile(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::param(format!(
            "confidence must lie strictly between 0 and 1, got {confidence}"
        )));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(1.0 - (1.0 - confidence) / 2.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictionInterval {
    pub t: usize,
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
    pub k_used: f64,
}

/// Rolling sample variance of the last `capacity` prediction errors.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorTracker {
    capacity: usize,
    floor: f64,
    errors: VecDeque<f64>,
}

impl ErrorTracker {
    pub fn new(capacity: usize) -> Result<Self> {
        Self::with_floor(capacity, VARIANCE_FLOOR)
    }

    pub fn with_floor(capacity: usize, floor: f64) -> Result<Self> {
        if capacity < 2 {
            return Err(Error::param("error window must hold at least 2 errors"));
        }
        if !(floor > 0.0 && floor.is_finite()) {
            return Err(Error::param("variance floor must be positive"));
        }
        Ok(ErrorTracker {
            capacity,
            floor,
            errors: VecDeque::with_capacity(capacity),
        })
    }

    pub fn record(&mut self, observed: f64, forecast: f64) {
        if self.errors.len() == self.capacity {
            self.errors.pop_front();
        }
        self.errors.push_back(observed - forecast);
    }

    /// Sample variance (divisor `n - 1`), never below the floor. Fewer than
    /// two errors yields the floor.
    pub fn variance(&self) -> f64 {
        let n = self.errors.len();
        if n < 2 {
            return self.floor;
        }
        let mean = self.errors.iter().sum::<f64>() / n as f64;
        let ss: f64 = self.errors.iter().map(|e| (e - mean) * (e - mean)).sum();
        (ss / (n - 1) as f64).max(self.floor)
    }

    pub fn errors(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.errors.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

/// Pure form of [`ErrorTracker::record`].
#[must_use]
pub fn record_error(tracker: &ErrorTracker, observed: f64, forecast: f64) -> ErrorTracker {
    let mut next = tracker.clone();
    next.record(observed, forecast);
    next
}

fn check_k(k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::param(format!("restriction parameter must be positive, got {k}")));
    }
    Ok(())
}

/// `forecast ± k·σ` with `σ` from the error tracker.
pub fn prediction_interval(
    t: usize,
    forecast: f64,
    tracker: &ErrorTracker,
    k: f64,
) -> Result<PredictionInterval> {
    check_k(k)?;
    Ok(interval_with_sigma(t, forecast, tracker.variance().sqrt(), k))
}

fn interval_with_sigma(t: usize, center: f64, sigma: f64, k: f64) -> PredictionInterval {
    let half = k * sigma;
    PredictionInterval {
        t,
        center,
        lower: center - half,
        upper: center + half,
        k_used: k,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Above,
    Below,
    None,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Above => "above",
            Direction::Below => "below",
            Direction::None => "none",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorVerdict {
    pub t: usize,
    pub observed: f64,
    pub forecast: f64,
    pub interval: PredictionInterval,
    pub anomalous: bool,
    pub direction: Direction,
}

impl DetectorVerdict {
    /// `t,observed,forecast,lower,upper,anomalous,direction`
    pub fn to_record(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.t,
            self.observed,
            self.forecast,
            self.interval.lower,
            self.interval.upper,
            self.anomalous,
            self.direction
        )
    }
}

pub const VERDICT_HEADER: &str = "t,observed,forecast,lower,upper,anomalous,direction";

/// Closed-interval test: values on a bound are normal.
pub fn classify(observed: f64, interval: &PredictionInterval) -> DetectorVerdict {
    let direction = if observed > interval.upper {
        Direction::Above
    } else if observed < interval.lower {
        Direction::Below
    } else {
        Direction::None
    };
    DetectorVerdict {
        t: interval.t,
        observed,
        forecast: interval.center,
        interval: *interval,
        anomalous: direction != Direction::None,
        direction,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RestrictionState {
    pub k_default: f64,
    pub k_current: f64,
    pub k_floor: f64,
    pub r_cap: f64,
}

impl RestrictionState {
    pub fn new(k_default: f64, k_floor: f64) -> Result<Self> {
        Self::with_cap(k_default, k_floor, DEFAULT_R_CAP)
    }

    pub fn with_cap(k_default: f64, k_floor: f64, r_cap: f64) -> Result<Self> {
        check_k(k_default)?;
        check_k(k_floor)?;
        if k_floor > k_default {
            return Err(Error::param(format!(
                "k floor {k_floor} exceeds default {k_default}"
            )));
        }
        if !(0.0..1.0).contains(&r_cap) {
            return Err(Error::param(format!("r_cap must lie in [0, 1), got {r_cap}")));
        }
        Ok(RestrictionState {
            k_default,
            k_current: k_default,
            k_floor,
            r_cap,
        })
    }

    pub fn is_default(&self) -> bool {
        self.k_current == self.k_default
    }
}

/// Tightens `K` in proportion to attack volume relative to legitimate volume.
pub fn adapt_restriction(
    state: &RestrictionState,
    vol_atk: f64,
    vol_leg: f64,
) -> Result<RestrictionState> {
    if !(vol_leg > 0.0 && vol_leg.is_finite()) {
        return Err(Error::input("legitimate volume must be positive"));
    }
    if !(vol_atk >= 0.0 && vol_atk.is_finite()) {
        return Err(Error::input("attack volume must be non-negative"));
    }
    let r = (vol_atk / vol_leg).min(state.r_cap);
    let k = (state.k_current * (1.0 - r)).max(state.k_floor);
    Ok(RestrictionState {
        k_current: k,
        ..*state
    })
}

#[must_use]
pub fn reset_restriction(state: &RestrictionState) -> RestrictionState {
    RestrictionState {
        k_current: state.k_default,
        ..*state
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorConfig {
    pub season_len: usize,
    /// Observations collected before parameters are fitted and verdicts start.
    pub window_n: usize,
    pub error_window: usize,
    pub confidence: f64,
    pub var_floor: f64,
    /// Fixed parameters skip the grid fit.
    pub params: Option<SmoothingParams>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            season_len: crate::forecast::DEFAULT_SEASON_LEN,
            window_n: DEFAULT_WINDOW_N,
            error_window: DEFAULT_ERROR_WINDOW,
            confidence: DEFAULT_CONFIDENCE,
            var_floor: VARIANCE_FLOOR,
            params: None,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.season_len == 0 {
            return Err(Error::param("season length must be at least 1"));
        }
        if self.window_n < 3 * self.season_len {
            return Err(Error::param(format!(
                "window-n {} must be at least three seasons ({})",
                self.window_n,
                3 * self.season_len
            )));
        }
        z_quantile(self.confidence)?;
        ErrorTracker::with_floor(self.error_window, self.var_floor)?;
        Ok(())
    }

    pub fn k_default(&self) -> Result<f64> {
        z_quantile(self.confidence)
    }
}

/// Forecast and error spread for the next observation, before it is seen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Assessment {
    pub t: usize,
    pub forecast: f64,
    pub sigma: f64,
}

impl Assessment {
    pub fn interval(&self, k: f64) -> PredictionInterval {
        interval_with_sigma(self.t, self.forecast, self.sigma, k)
    }

    pub fn verdict(&self, observed: f64, k: f64) -> DetectorVerdict {
        classify(observed, &self.interval(k))
    }
}

#[derive(Clone, Debug)]
enum Phase {
    Warmup(Vec<f64>),
    Running {
        model: HoltWintersState,
        tracker: ErrorTracker,
    },
}

/// Online detector over one entropy stream.
///
/// The first `window_n` values fit the smoothing parameters and prime the
/// error tracker; no verdicts are produced for them. Afterwards each value is
/// first assessed and then committed: a committed value updates the model
/// and the tracker only when accepted, so anomalous values are never learned.
#[derive(Clone, Debug)]
pub struct StreamDetector {
    cfg: DetectorConfig,
    k_default: f64,
    seen: usize,
    phase: Phase,
}

impl StreamDetector {
    pub fn new(cfg: DetectorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(StreamDetector {
            k_default: cfg.k_default()?,
            cfg,
            seen: 0,
            phase: Phase::Warmup(Vec::with_capacity(cfg.window_n)),
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn k_default(&self) -> f64 {
        self.k_default
    }

    pub fn is_warm(&self) -> bool {
        matches!(self.phase, Phase::Running { .. })
    }

    /// Number of values committed so far.
    pub fn seen(&self) -> usize {
        self.seen
    }

    pub fn params(&self) -> Option<SmoothingParams> {
        match &self.phase {
            Phase::Running { model, .. } => Some(model.params),
            Phase::Warmup(_) => None,
        }
    }

    pub fn model(&self) -> Option<&HoltWintersState> {
        match &self.phase {
            Phase::Running { model, .. } => Some(model),
            Phase::Warmup(_) => None,
        }
    }

    pub fn tracker(&self) -> Option<&ErrorTracker> {
        match &self.phase {
            Phase::Running { tracker, .. } => Some(tracker),
            Phase::Warmup(_) => None,
        }
    }

    /// `None` while warming up.
    pub fn assess(&self) -> Option<Assessment> {
        match &self.phase {
            Phase::Warmup(_) => None,
            Phase::Running { model, tracker } => Some(Assessment {
                t: self.seen,
                forecast: model.forecast_next().value,
                sigma: tracker.variance().sqrt(),
            }),
        }
    }

    /// Feeds `observed`. During warm-up `accept` is ignored.
    pub fn commit(&mut self, observed: f64, accept: bool) -> Result<()> {
        self.seen += 1;
        match &mut self.phase {
            Phase::Warmup(buf) => {
                buf.push(observed);
                if buf.len() == self.cfg.window_n {
                    let history = std::mem::take(buf);
                    self.phase = self.prime(&history)?;
                }
            }
            Phase::Running { model, tracker } => {
                if accept {
                    tracker.record(observed, model.forecast_next().value);
                    model.update_in_place(observed);
                }
            }
        }
        Ok(())
    }

    fn prime(&self, history: &[f64]) -> Result<Phase> {
        let l = self.cfg.season_len;
        let params = match self.cfg.params {
            Some(p) => p,
            None => fit_parameters(history, l)?.params,
        };
        let mut model = init_state(history, params, l)?;
        let mut tracker = ErrorTracker::with_floor(self.cfg.error_window, self.cfg.var_floor)?;
        for &h in &history[2 * l..] {
            tracker.record(h, model.forecast_next().value);
            model.update_in_place(h);
        }
        Ok(Phase::Running { model, tracker })
    }

    /// Assess at the default `K`, then commit unless anomalous.
    pub fn observe(&mut self, observed: f64) -> Result<Option<DetectorVerdict>> {
        let verdict = self.assess().map(|a| a.verdict(observed, self.k_default));
        let accept = verdict.is_none_or(|v| !v.anomalous);
        self.commit(observed, accept)?;
        Ok(verdict)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_k_is_normal_quantile() {
        assert!((z_quantile(0.95).unwrap() - 1.959964).abs() < 1e-6);
        assert!(z_quantile(1.0).is_err());
        assert!(z_quantile(0.0).is_err());
    }

    #[test]
    fn interval_on_floored_variance() {
        let tr = ErrorTracker::new(24).unwrap();
        let iv = prediction_interval(0, 3.0, &tr, 1.96).unwrap();
        assert!((iv.lower - (3.0 - 1.96e-6)).abs() < 1e-15);
        assert!((iv.upper - (3.0 + 1.96e-6)).abs() < 1e-15);
    }

    #[test]
    fn interval_hand_values() {
        let mut tr = ErrorTracker::new(24).unwrap();
        // errors -0.2, 0.2 → sample variance 0.08; use forecast offsets
        tr.record(-0.2, 0.0);
        tr.record(0.2, 0.0);
        assert!((tr.variance() - 0.08).abs() < 1e-15);

        let mut tr = ErrorTracker::new(2).unwrap();
        let s = 0.04f64.sqrt() / 2f64.sqrt();
        tr.record(s, 0.0);
        tr.record(-s, 0.0);
        let iv = prediction_interval(0, 2.0, &tr, 2.0).unwrap();
        assert!((iv.lower - 1.6).abs() < 1e-12 && (iv.upper - 2.4).abs() < 1e-12);

        let wide = prediction_interval(0, 2.0, &tr, 4.0).unwrap();
        assert!(((wide.upper - 2.0) - 2.0 * (iv.upper - 2.0)).abs() < 1e-15);
        assert!(prediction_interval(0, 2.0, &tr, 0.0).is_err());
        assert!(prediction_interval(0, 2.0, &tr, -1.0).is_err());
    }

    #[test]
    fn tracker_variance_cases() {
        let mut tr = ErrorTracker::new(24).unwrap();
        for _ in 0..30 {
            tr.record(1.0, 1.0);
        }
        assert_eq!(tr.variance(), VARIANCE_FLOOR);

        let mut tr = ErrorTracker::new(24).unwrap();
        tr.record(-1.0, 0.0);
        tr.record(1.0, 0.0);
        assert_eq!(tr.variance(), 2.0);

        let mut tr = ErrorTracker::new(3).unwrap();
        for e in [1.0, 2.0, 3.0, 4.0] {
            tr.record(e, 0.0);
        }
        assert_eq!(tr.errors().collect::<Vec<_>>(), vec![2.0, 3.0, 4.0]);
    }

    fn iv(lower: f64, upper: f64) -> PredictionInterval {
        PredictionInterval {
            t: 0,
            center: (lower + upper) / 2.0,
            lower,
            upper,
            k_used: 1.0,
        }
    }

    #[test]
    fn classification() {
        assert!(!classify(2.0, &iv(1.6, 2.4)).anomalous);
        let v = classify(1.5, &iv(1.6, 2.4));
        assert!(v.anomalous);
        assert_eq!(v.direction, Direction::Below);
        assert_eq!(classify(2.5, &iv(1.6, 2.4)).direction, Direction::Above);
        assert!(!classify(2.4, &iv(1.6, 2.4)).anomalous);
        assert!(!classify(1.6, &iv(1.6, 2.4)).anomalous);
    }

    #[test]
    fn restriction_updates() {
        let s = RestrictionState::new(2.0, 0.5).unwrap();
        assert_eq!(adapt_restriction(&s, 0.0, 1000.0).unwrap().k_current, 2.0);
        assert_eq!(adapt_restriction(&s, 500.0, 1000.0).unwrap().k_current, 1.0);
        assert_eq!(adapt_restriction(&s, 10_000.0, 1000.0).unwrap().k_current, 0.5);
        assert!(matches!(
            adapt_restriction(&s, 1.0, 0.0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn reset_semantics() {
        let s = RestrictionState::new(1.96, 0.5).unwrap();
        let tight = adapt_restriction(&s, 300.0, 1000.0).unwrap();
        assert_eq!(reset_restriction(&tight).k_current, 1.96);
        let r = reset_restriction(&tight);
        assert_eq!(adapt_restriction(&r, 0.0, 10.0).unwrap().k_current, 1.96);
        let once = adapt_restriction(&s, 300.0, 1000.0).unwrap();
        let again = adapt_restriction(&reset_restriction(&once), 300.0, 1000.0).unwrap();
        assert_eq!(once, again);
    }

    #[test]
    fn restriction_rejects_inverted_bounds() {
        assert!(RestrictionState::new(0.4, 0.5).is_err());
        assert!(RestrictionState::with_cap(2.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn verdict_record_format() {
        let v = classify(1.5, &iv(1.6, 2.4));
        assert_eq!(v.to_record(), "0,1.5,2,1.6,2.4,true,below");
    }

    #[test]
    fn window_n_must_cover_three_seasons() {
        let cfg = DetectorConfig {
            window_n: 35,
            ..Default::default()
        };
        assert!(StreamDetector::new(cfg).is_err());
    }

    fn seasonal(i: usize) -> f64 {
        3.0 + 0.2 * ((i % 12) as f64 * std::f64::consts::PI / 6.0).sin()
            + 0.01 * ((i * 7919) % 13) as f64
    }

    #[test]
    fn no_verdicts_during_warmup() {
        let mut d = StreamDetector::new(DetectorConfig::default()).unwrap();
        for i in 0..48 {
            assert!(d.observe(seasonal(i)).unwrap().is_none());
        }
        assert!(d.is_warm());
        let v = d.observe(seasonal(48)).unwrap().unwrap();
        assert_eq!(v.t, 48);
        assert_eq!(d.tracker().unwrap().len(), 24);
    }

    #[test]
    fn step_change_is_flagged_and_not_learned() {
        let mut d = StreamDetector::new(DetectorConfig::default()).unwrap();
        for i in 0..60 {
            d.observe(seasonal(i)).unwrap();
        }
        let model_before = d.model().unwrap().clone();
        let v = d.observe(0.5).unwrap().unwrap();
        assert!(v.anomalous);
        assert_eq!(v.direction, Direction::Below);
        assert_eq!(d.model().unwrap(), &model_before);
    }

    proptest! {
        #[test]
        fn interval_is_symmetric(center in -10.0f64..10.0, k in 0.01f64..5.0,
                                 errs in prop::collection::vec(-3.0f64..3.0, 0..30)) {
            let mut tr = ErrorTracker::new(24).unwrap();
            for e in errs { tr.record(e, 0.0); }
            let iv = prediction_interval(0, center, &tr, k).unwrap();
            // symmetric up to the rounding of the two additions
            let tol = 4.0 * f64::EPSILON * (center.abs() + iv.upper - center);
            prop_assert!(((iv.upper - center) - (center - iv.lower)).abs() <= tol);
            prop_assert!(iv.lower <= iv.upper);
            prop_assert!(tr.variance() >= VARIANCE_FLOOR);
        }

        #[test]
        fn restriction_stays_in_bounds(steps in prop::collection::vec((0.0f64..5000.0, 1.0f64..5000.0), 1..20)) {
            let mut s = RestrictionState::new(1.96, 0.5).unwrap();
            for (a, l) in steps {
                let next = adapt_restriction(&s, a, l).unwrap();
                prop_assert!(next.k_current <= s.k_current);
                prop_assert!(next.k_current >= next.k_floor && next.k_current <= next.k_default);
                s = next;
            }
        }

        #[test]
        fn restriction_monotone_in_attack(a in 0.0f64..5000.0, b in 0.0f64..5000.0, l in 1.0f64..5000.0) {
            let s = RestrictionState::new(1.96, 0.5).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(adapt_restriction(&s, hi, l).unwrap().k_current
                <= adapt_restriction(&s, lo, l).unwrap().k_current);
        }

        #[test]
        fn tighter_k_flags_superset(noise in prop::collection::vec(-0.3f64..0.3, 120),
                                    k1 in 0.3f64..3.0, k2 in 0.3f64..3.0) {
            let (lo, hi) = if k1 < k2 { (k1, k2) } else { (k2, k1) };
            let mut d = StreamDetector::new(DetectorConfig::default()).unwrap();
            for (i, n) in noise.iter().enumerate() {
                let h = seasonal(i) + n;
                if let Some(a) = d.assess() {
                    let tight = a.verdict(h, lo).anomalous;
                    let loose = a.verdict(h, hi).anomalous;
                    prop_assert!(!loose || tight);
                }
                d.observe(h).unwrap();
            }
        }

        #[test]
        fn frozen_model_ignores_anomalies(noise in prop::collection::vec(-0.05f64..0.05, 80),
                                          spikes in prop::collection::btree_set(50usize..75, 1..6)) {
            // reference stream never sees the spike values
            let clean: Vec<f64> = (0..80).map(|i| seasonal(i) + noise[i]).collect();
            let mut with = StreamDetector::new(DetectorConfig::default()).unwrap();
            let mut without = StreamDetector::new(DetectorConfig::default()).unwrap();
            for (i, &h) in clean.iter().enumerate() {
                if spikes.contains(&i) {
                    let v = with.observe(40.0).unwrap().unwrap();
                    prop_assert!(v.anomalous);
                }
                let a = with.assess().map(|a| (a.forecast, a.sigma));
                let b = without.assess().map(|a| (a.forecast, a.sigma));
                prop_assert_eq!(a, b);
                let va = with.observe(h).unwrap().map(|v| v.anomalous);
                let vb = without.observe(h).unwrap().map(|v| v.anomalous);
                prop_assert_eq!(va, vb);
            }
        }
    }
}

//! Additive Holt-Winters smoothing of the entropy series.
//!
//! Seasonal estimates are stored by slot `t mod L`, so the estimate for the
//! slot being forecast is always the one written one season earlier.

use crate::error::{Error, Result};

pub const DEFAULT_SEASON_LEN: usize = 12;

/// Step of the parameter search grid.
pub const GRID_STEP: f64 = 0.05;

/// `{0.05, 0.10, ..., 0.95}`
pub fn grid_values() -> impl Iterator<Item = f64> + Clone {
    (1..=19).map(|i| i as f64 / 20.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl SmoothingParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::param(format!(
                    "smoothing {name} must lie strictly between 0 and 1, got {v}"
                )));
            }
        }
        Ok(SmoothingParams { alpha, beta, gamma })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HoltWintersState {
    pub base: f64,
    pub trend: f64,
    /// `seasonals[i]` is the estimate for every `t` with `t mod L == i`.
    pub seasonals: Vec<f64>,
    pub season_len: usize,
    /// Index of the last point absorbed.
    pub t: usize,
    pub params: SmoothingParams,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Forecast {
    pub t_next: usize,
    pub value: f64,
}

fn check_season(season_len: usize) -> Result<()> {
    if season_len == 0 {
        return Err(Error::param("season length must be at least 1"));
    }
    Ok(())
}

/// Initializes from the first `2L` points of `history`: base is the mean of
/// the first season, trend is the per-step change between the two season
/// means, and each seasonal slot is the first-season deviation from the base.
/// The state is positioned at `t = 2L - 1`.
pub fn init_state(
    history: &[f64],
    params: SmoothingParams,
    season_len: usize,
) -> Result<HoltWintersState> {
    check_season(season_len)?;
    let l = season_len;
    if history.len() < 2 * l {
        return Err(Error::InsufficientHistory {
            needed: 2 * l,
            got: history.len(),
        });
    }
    let m1 = history[..l].iter().sum::<f64>() / l as f64;
    let m2 = history[l..2 * l].iter().sum::<f64>() / l as f64;
    Ok(HoltWintersState {
        base: m1,
        trend: (m2 - m1) / l as f64,
        seasonals: history[..l].iter().map(|h| h - m1).collect(),
        season_len: l,
        t: 2 * l - 1,
        params,
    })
}

impl HoltWintersState {
    /// Forecast for `t + 1`.
    pub fn forecast_next(&self) -> Forecast {
        let t_next = self.t + 1;
        Forecast {
            t_next,
            value: self.base + self.trend + self.seasonals[t_next % self.season_len],
        }
    }

    /// Absorbs the observation for `t + 1`.
    pub fn update_in_place(&mut self, observed: f64) {
        let SmoothingParams { alpha, beta, gamma } = self.params;
        let t = self.t + 1;
        let slot = t % self.season_len;
        let s_prev = self.seasonals[slot];
        let base = alpha * (observed - s_prev) + (1.0 - alpha) * (self.base + self.trend);
        let trend = beta * (base - self.base) + (1.0 - beta) * self.trend;
        self.seasonals[slot] = gamma * (observed - base) + (1.0 - gamma) * s_prev;
        self.base = base;
        self.trend = trend;
        self.t = t;
    }

    /// Pure counterpart of [`update_in_place`](Self::update_in_place).
    #[must_use]
    pub fn update(&self, observed: f64) -> HoltWintersState {
        let mut next = self.clone();
        next.update_in_place(observed);
        next
    }
}

pub fn forecast_next(state: &HoltWintersState) -> Forecast {
    state.forecast_next()
}

fn min_fit_len(season_len: usize) -> usize {
    3 * season_len
}

/// Sum of squared one-step errors over `t = 2L .. history.len()`.
pub fn one_step_sse(history: &[f64], params: SmoothingParams, season_len: usize) -> Result<f64> {
    let mut state = init_state(history, params, season_len)?;
    let mut sse = 0.0;
    for &h in &history[2 * season_len..] {
        let e = h - state.forecast_next().value;
        sse += e * e;
        state.update_in_place(h);
    }
    Ok(sse)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    pub params: SmoothingParams,
    pub sse: f64,
}

/// Exhaustive search of the grid for the smallest one-step SSE. Ties keep
/// the lexicographically smallest `(alpha, beta, gamma)`.
pub fn fit_parameters(history: &[f64], season_len: usize) -> Result<FitResult> {
    check_season(season_len)?;
    let needed = min_fit_len(season_len);
    if history.len() < needed {
        return Err(Error::InsufficientHistory {
            needed,
            got: history.len(),
        });
    }
    let mut best: Option<FitResult> = None;
    for alpha in grid_values() {
        for beta in grid_values() {
            for gamma in grid_values() {
                let params = SmoothingParams { alpha, beta, gamma };
                let sse = one_step_sse(history, params, season_len)?;
                if best.is_none_or(|b| sse < b.sse) {
                    best = Some(FitResult { params, sse });
                }
            }
        }
    }
    Ok(best.expect("grid is non-empty"))
}

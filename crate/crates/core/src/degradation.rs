//! Online cycle-based battery degradation.
//!
//! The state of charge is tracked through a discretized 4-point rainflow
//! buffer of switching points. Each step is charged the increment of an
//! exponential cycle-depth function measured from the most recent switching
//! point, so that summing the per-step costs over a trajectory approximates
//! an offline rainflow count (see [`oracle`]).

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

pub mod oracle;

/// Parameters of the exponential cycle cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DegradationParams {
    /// Degradation rate.
    pub alpha_d: f64,
    /// Sensitivity to the SoC excursion (per SoC fraction).
    pub beta: f64,
    /// Discretization window for switching points, as a SoC fraction.
    pub window: f64,
}

impl Default for DegradationParams {
    fn default() -> Self {
        Self {
            alpha_d: 5.0,
            beta: 1.0,
            window: 0.01,
        }
    }
}

impl DegradationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_d > 0.0 && self.alpha_d.is_finite()) {
            return Err(Error::Config(format!("alpha_d must be > 0, got {}", self.alpha_d)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.window > 0.0 && self.window < 1.0) {
            return Err(Error::Config(format!(
                "discretization window must lie in (0, 1), got {}",
                self.window
            )));
        }
        Ok(())
    }

    /// Upper bound on the number of switching points kept in the buffer.
    pub fn buffer_capacity(&self) -> usize {
        (1.0 / self.window).ceil() as usize + 2
    }
}

/// Which per-step degradation model the battery charges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegradationModel {
    #[default]
    Cycle,
    Linear,
}

/// Index of the discretization level nearest to `x`, halves rounded away
/// from zero. `x / w` is snapped to 1e-6 first so that decimal inputs such as
/// 0.125 / 0.01 = 12.499999999999998 land on the half they denote.
fn level(x: f64, w: f64) -> i64 {
    let q = x / w;
    let snapped = (q * 1e6).round() / 1e6;
    snapped.round() as i64
}

/// Rounds `x` to the nearest multiple of `w` (half away from zero).
pub fn discretize(x: f64, w: f64) -> f64 {
    level(x, w) as f64 * w
}

/// 4-point rainflow condition on the last four entries of `points`: the
/// inner pair is enclosed by the outer pair, i.e. it forms a closed cycle.
pub fn rainflow_4p(points: &[f64]) -> Result<bool> {
    let n = points.len();
    if n < 4 {
        return Err(contract(format!(
            "rainflow_4p needs at least 4 points, got {n}"
        )));
    }
    let (a, b, c, d) = (points[n - 4], points[n - 3], points[n - 2], points[n - 1]);
    Ok(a.min(d) <= b.min(c) && b.max(c) <= a.max(d))
}

/// Three-point hysteresis window `[F0, F1, F2]`.
pub type HysteresisWindow = [f64; 3];

/// Applies the hysteresis filter to a fully populated window. Returns the
/// updated window and whether `F0` (after shifting) is a confirmed turning
/// point.
pub fn hysteresis_filter(mut f: HysteresisWindow) -> (HysteresisWindow, bool) {
    let mut found = false;
    if f[2] < f[1] {
        if f[0] >= f[1] {
            f[1] = f[2];
        } else {
            found = true;
            f[0] = f[1];
            f[1] = f[2];
        }
    } else if f[2] > f[1] {
        if f[0] <= f[1] {
            f[1] = f[2];
        } else {
            found = true;
            f[0] = f[1];
            f[1] = f[2];
        }
    } else if f[0] > f[1] {
        f[1] = f[1].min(f[2]);
    } else {
        f[1] = f[1].max(f[2]);
    }
    (f, found)
}

/// Feeds one SoC sample `x` through the hysteresis window and the rainflow
/// buffer. On return `points` holds only confirmed switching points; the
/// provisional sample is removed again at the end.
pub fn update_switching_points(
    x: f64,
    window: &mut HysteresisWindow,
    points: &mut Vec<f64>,
    w: f64,
) {
    window[2] = discretize(x, w);
    let (filtered, found) = hysteresis_filter(*window);
    *window = filtered;
    if found {
        points.push(discretize(window[0], w));
    }
    points.push(discretize(x, w));
    while points.len() >= 4 && rainflow_4p(points).unwrap_or(false) {
        let n = points.len();
        points[n - 3] = points[n - 1];
        points.truncate(n - 2);
    }
    points.pop();
}

/// Rainflow state owned by one battery: the switching-point buffer `R` and
/// the hysteresis window `F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingBuffer {
    points: Vec<f64>,
    window: HysteresisWindow,
    w: f64,
}

impl SwitchingBuffer {
    /// Buffer seeded with the discretized initial SoC, so the most recent
    /// switching point is always defined.
    pub fn new(initial_soc: f64, w: f64) -> Self {
        let s0 = discretize(initial_soc, w);
        Self {
            points: vec![s0],
            window: [s0; 3],
            w,
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn window(&self) -> HysteresisWindow {
        self.window
    }

    pub fn discretization(&self) -> f64 {
        self.w
    }

    /// Most recent confirmed switching point.
    pub fn last(&self) -> f64 {
        // Seeded non-empty and update_switching_points never pops the seed:
        // the while-loop keeps at least one point below the splice and the
        // final pop only removes the sample it just pushed.
        *self.points.last().expect("switching buffer is seeded")
    }

    pub fn update(&mut self, soc: f64) {
        update_switching_points(soc, &mut self.window, &mut self.points, self.w);
    }
}

/// Per-step cycle cost of moving from `soc` by `delta` (fractions), measured
/// from the most recent switching point `last_switch`. Negative values, an
/// artifact of discretization near switching points, are replaced by a cost
/// proportional to `|delta|` at the slope of one discretization window.
pub fn cycle_step_cost(soc: f64, delta: f64, last_switch: f64, params: &DegradationParams) -> f64 {
    let DegradationParams { alpha_d, beta, window } = *params;
    let raw = alpha_d * (beta * (soc + delta - last_switch).abs()).exp()
        - alpha_d * (beta * (soc - last_switch).abs()).exp();
    if raw < 0.0 {
        delta.abs() * alpha_d * ((beta * window.abs()).exp() - 1.0) / window
    } else {
        raw
    }
}

/// Linear degradation model: cost proportional to the SoC change.
pub fn linear_step_cost(delta: f64, alpha_d: f64) -> f64 {
    alpha_d * delta.abs()
}

/// Online degradation of a whole trace: seeds a buffer with `trace[0]` and
/// charges every subsequent transition. Returns the per-step costs.
pub fn online_costs(trace: &[f64], params: &DegradationParams) -> Vec<f64> {
    let Some(&first) = trace.first() else {
        return Vec::new();
    };
    let mut buffer = SwitchingBuffer::new(first, params.window);
    trace
        .windows(2)
        .map(|pair| {
            buffer.update(pair[1]);
            cycle_step_cost(pair[0], pair[1] - pair[0], buffer.last(), params)
        })
        .collect()
}

//! Offline rainflow count used to check the online per-step costs.
//!
//! This is the classic three-point stack algorithm over the reversals of the
//! discretized trace, with leftover ranges counted as half cycles. It shares
//! nothing with the online four-point buffer except `discretize`.

use super::{discretize, DegradationParams};
use crate::error::{contract, Result};

/// One extracted cycle: its range (SoC fraction) and weight (1.0 full, 0.5 half).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cycle {
    pub range: f64,
    pub weight: f64,
}

/// Turning points of `trace`: first and last samples plus every direction
/// change, with plateaus collapsed.
pub fn reversals(trace: &[f64]) -> Vec<f64> {
    let mut dedup: Vec<f64> = Vec::with_capacity(trace.len());
    for &x in trace {
        if dedup.last() != Some(&x) {
            dedup.push(x);
        }
    }
    if dedup.len() <= 2 {
        return dedup;
    }
    let mut out = vec![dedup[0]];
    for i in 1..dedup.len() - 1 {
        let (prev, cur, next) = (dedup[i - 1], dedup[i], dedup[i + 1]);
        if (cur - prev) * (next - cur) < 0.0 {
            out.push(cur);
        }
    }
    out.push(dedup[dedup.len() - 1]);
    out
}

/// Three-point rainflow cycle extraction.
pub fn count_cycles(trace: &[f64]) -> Vec<Cycle> {
    let mut cycles = Vec::new();
    let mut stack: Vec<f64> = Vec::new();
    for p in reversals(trace) {
        stack.push(p);
        while stack.len() >= 3 {
            let n = stack.len();
            let x = (stack[n - 1] - stack[n - 2]).abs();
            let y = (stack[n - 2] - stack[n - 3]).abs();
            if x < y {
                break;
            }
            if n == 3 {
                cycles.push(Cycle { range: y, weight: 0.5 });
                stack.remove(0);
            } else {
                cycles.push(Cycle { range: y, weight: 1.0 });
                let last = stack[n - 1];
                stack.truncate(n - 3);
                stack.push(last);
            }
        }
    }
    for pair in stack.windows(2) {
        cycles.push(Cycle {
            range: (pair[1] - pair[0]).abs(),
            weight: 0.5,
        });
    }
    cycles
}

/// Damage of one full cycle of the given range. A full cycle is two
/// traversals of its range, each costing `alpha_d (exp(beta range) - 1)` in
/// the online model.
pub fn full_cycle_damage(range: f64, params: &DegradationParams) -> f64 {
    2.0 * params.alpha_d * ((params.beta * range).exp() - 1.0)
}

/// Total rainflow degradation of the discretized `trace`.
pub fn offline_rainflow_oracle(trace: &[f64], params: &DegradationParams) -> Result<f64> {
    if trace.len() < 2 {
        return Err(contract(format!(
            "rainflow oracle needs at least 2 samples, got {}",
            trace.len()
        )));
    }
    let discretized: Vec<f64> = trace.iter().map(|&x| discretize(x, params.window)).collect();
    Ok(count_cycles(&discretized)
        .iter()
        .map(|c| c.weight * full_cycle_damage(c.range, params))
        .fold(0.0, |acc, d| acc + d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_trace_is_one_half_cycle() {
        let p = DegradationParams::default();
        let trace: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let cycles = count_cycles(&trace);
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].weight, 0.5);
        let total = offline_rainflow_oracle(&trace, &p).unwrap();
        assert!((total - 5.0 * (0.8f64.exp() - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn constant_trace_is_free() {
        let p = DegradationParams::default();
        assert_eq!(offline_rainflow_oracle(&[0.4; 20], &p).unwrap(), 0.0);
    }

    #[test]
    fn textbook_sequence() {
        // ASTM E1049 example: -2 1 -3 5 -1 3 -4 4 -2
        let s = [-2.0, 1.0, -3.0, 5.0, -1.0, 3.0, -4.0, 4.0, -2.0];
        let mut got: Vec<(f64, f64)> = count_cycles(&s).iter().map(|c| (c.range, c.weight)).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = vec![
            (3.0, 0.5),
            (4.0, 0.5),
            (4.0, 1.0),
            (6.0, 0.5),
            (8.0, 0.5),
            (9.0, 0.5),
            (8.0, 0.5),
        ];
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);
    }

    #[test]
    fn short_trace_rejected() {
        assert!(offline_rainflow_oracle(&[0.5], &DegradationParams::default()).is_err());
    }
}

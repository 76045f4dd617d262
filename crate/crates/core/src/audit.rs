//! Row-by-row constraint audit of a trajectory.
//!
//! Deliberately self-contained: the limits below are restated here and the
//! checks share no code with the shields or device models, so a bug in the
//! simulator shows up as a violation instead of being reproduced.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::metrics::{InterventionFlags, TrajectoryRow};

/// Physical and operational limits checked by the audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditLimits {
    pub tolerance: f64,
    pub wind_rated_kw: f64,
    pub battery_power_kw: f64,
    pub battery_capacity_kwh: f64,
    pub battery_efficiency: f64,
    pub soc_low: f64,
    pub soc_reserve: f64,
    pub soc_high: f64,
    pub genset_min_kw: f64,
    pub genset_nominal_kw: f64,
    pub genset_overload_kw: f64,
    pub warmup_minutes: u32,
    pub warmup_kw: f64,
    pub cooldown_minutes: u32,
    pub min_runtime_minutes: u32,
    pub average_cap_kw: f64,
    pub average_window: usize,
    pub fuel_l_per_kwh: f64,
    pub idle_l_per_h: f64,
}

impl Default for AuditLimits {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            wind_rated_kw: 400.0,
            battery_power_kw: 600.0,
            battery_capacity_kwh: 672.0,
            battery_efficiency: 0.95,
            soc_low: 0.10,
            soc_reserve: 0.05,
            soc_high: 0.90,
            genset_min_kw: 120.0,
            genset_nominal_kw: 400.0,
            genset_overload_kw: 440.0,
            warmup_minutes: 3,
            warmup_kw: 100.0,
            cooldown_minutes: 5,
            min_runtime_minutes: 30,
            average_cap_kw: 280.0,
            average_window: 2880,
            fuel_l_per_kwh: 0.25,
            idle_l_per_h: 10.0,
        }
    }
}

/// Checked constraints, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Format,
    MinuteSequence,
    NegativeBalance,
    PositiveBalance,
    BalanceColumn,
    WindBounds,
    BatteryPower,
    SocBounds,
    BatteryDynamics,
    GensetRoutine,
    GensetMinRuntime,
    GensetMinPower,
    GensetCap,
    Genset48hAverage,
    PriorityOrder,
    EqualFraction,
    Fuel,
    Degradation,
}

impl Constraint {
    pub const ALL: [Constraint; 18] = [
        Constraint::Format,
        Constraint::MinuteSequence,
        Constraint::NegativeBalance,
        Constraint::PositiveBalance,
        Constraint::BalanceColumn,
        Constraint::WindBounds,
        Constraint::BatteryPower,
        Constraint::SocBounds,
        Constraint::BatteryDynamics,
        Constraint::GensetRoutine,
        Constraint::GensetMinRuntime,
        Constraint::GensetMinPower,
        Constraint::GensetCap,
        Constraint::Genset48hAverage,
        Constraint::PriorityOrder,
        Constraint::EqualFraction,
        Constraint::Fuel,
        Constraint::Degradation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Constraint::Format => "format",
            Constraint::MinuteSequence => "minute_sequence",
            Constraint::NegativeBalance => "negative_balance",
            Constraint::PositiveBalance => "positive_balance",
            Constraint::BalanceColumn => "balance_column",
            Constraint::WindBounds => "wind_bounds",
            Constraint::BatteryPower => "battery_power",
            Constraint::SocBounds => "soc_bounds",
            Constraint::BatteryDynamics => "battery_dynamics",
            Constraint::GensetRoutine => "genset_routine",
            Constraint::GensetMinRuntime => "genset_min_runtime",
            Constraint::GensetMinPower => "genset_min_power",
            Constraint::GensetCap => "genset_cap",
            Constraint::Genset48hAverage => "genset_48h_average",
            Constraint::PriorityOrder => "priority_order",
            Constraint::EqualFraction => "equal_fraction",
            Constraint::Fuel => "fuel",
            Constraint::Degradation => "degradation",
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCount {
    pub constraint: Constraint,
    pub violations: u64,
    /// Row index (0-based, data rows only) of the first violation.
    pub first_row: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub rows: usize,
    pub counts: Vec<ConstraintCount>,
}

impl AuditReport {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|c| c.violations).sum()
    }

    pub fn is_clean(&self) -> bool {
        self.total() == 0
    }

    pub fn count(&self, c: Constraint) -> u64 {
        self.counts.iter().find(|x| x.constraint == c).map_or(0, |x| x.violations)
    }

    fn flag(&mut self, c: Constraint, row: usize) {
        let entry = &mut self.counts[c as usize];
        entry.violations += 1;
        entry.first_row.get_or_insert(row);
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rows: {}", self.rows)?;
        for c in &self.counts {
            match c.first_row {
                Some(r) => writeln!(f, "{:<20} {:>8}  (first at row {r})", c.constraint.name(), c.violations)?,
                None => writeln!(f, "{:<20} {:>8}", c.constraint.name(), c.violations)?,
            }
        }
        write!(f, "total violations: {}", self.total())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Off,
    WarmUp(u32),
    On(u32),
    CoolDown(u32),
}

impl Phase {
    fn parse(s: &str) -> Option<Phase> {
        if s == "Off" {
            return Some(Phase::Off);
        }
        let (kind, k) = s.split_once(':')?;
        let k: u32 = k.parse().ok().filter(|k| *k >= 1)?;
        match kind {
            "WarmUp" => Some(Phase::WarmUp(k)),
            "On" => Some(Phase::On(k)),
            "CoolDown" => Some(Phase::CoolDown(k)),
            _ => None,
        }
    }

    fn committed(self) -> bool {
        matches!(self, Phase::WarmUp(_) | Phase::On(_))
    }
}

/// Per-genset audit memory.
struct GensetTrack {
    prev: Option<Phase>,
    window: VecDeque<f64>,
    window_sum: f64,
}

impl GensetTrack {
    fn new() -> Self {
        Self { prev: None, window: VecDeque::new(), window_sum: 0.0 }
    }
}

/// Audits a trajectory against `limits`.
pub fn audit(rows: &[TrajectoryRow], limits: &AuditLimits) -> AuditReport {
    let mut report = AuditReport {
        rows: rows.len(),
        counts: Constraint::ALL
            .iter()
            .map(|&constraint| ConstraintCount { constraint, violations: 0, first_row: None })
            .collect(),
    };
    let l = limits;
    let tol = l.tolerance;
    let mut gensets = [GensetTrack::new(), GensetTrack::new()];
    let mut prev_row: Option<&TrajectoryRow> = None;

    for (i, row) in rows.iter().enumerate() {
        use Constraint as C;
        let flags = InterventionFlags::decode(&row.intervention);
        let phases = [Phase::parse(&row.status1), Phase::parse(&row.status2)];
        let numbers = [
            row.demand, row.wind_avail, row.p_wind, row.p_batt, row.soc, row.p_gen1, row.p_gen2, row.fuel_l, row.deg,
            row.reward, row.balance,
        ];
        if flags.is_none() || phases.iter().any(Option::is_none) || numbers.iter().any(|x| !x.is_finite()) {
            report.flag(C::Format, i);
            prev_row = Some(row);
            continue;
        }
        let flags = flags.unwrap_or_default();
        let phases = phases.map(|p| p.unwrap_or(Phase::Off));
        let powers = [row.p_gen1, row.p_gen2];

        if let Some(prev) = prev_row {
            if row.minute != prev.minute + 1 {
                report.flag(C::MinuteSequence, i);
            }
        }

        let balance = row.p_wind + row.p_batt + row.p_gen1 + row.p_gen2 - row.demand;
        if balance < -tol {
            report.flag(C::NegativeBalance, i);
        }
        if balance > tol {
            report.flag(C::PositiveBalance, i);
        }
        if (balance - row.balance).abs() > tol {
            report.flag(C::BalanceColumn, i);
        }

        if row.p_wind < -tol || row.p_wind > row.wind_avail.min(l.wind_rated_kw) + tol {
            report.flag(C::WindBounds, i);
        }

        if row.p_batt.abs() > l.battery_power_kw + tol {
            report.flag(C::BatteryPower, i);
        }
        let soc_ok = if row.soc > l.soc_high + tol || row.soc < l.soc_reserve - tol {
            false
        } else if row.soc < l.soc_low - tol {
            // inside the reserve band: either authorized this minute or recovering
            flags.reserve || prev_row.is_some_and(|p| row.soc >= p.soc - tol)
        } else {
            true
        };
        if !soc_ok {
            report.flag(C::SocBounds, i);
        }
        if let Some(prev) = prev_row {
            let energy = row.p_batt / 60.0;
            let drawn = if row.p_batt > 0.0 { energy / l.battery_efficiency } else { energy * l.battery_efficiency };
            let expected = prev.soc - drawn / l.battery_capacity_kwh;
            if (expected - row.soc).abs() > tol {
                report.flag(C::BatteryDynamics, i);
            }
        }

        let mut fuel = 0.0;
        for (g, (&phase, &p)) in phases.iter().zip(&powers).enumerate() {
            let track = &mut gensets[g];
            let routine_ok = match phase {
                Phase::Off | Phase::CoolDown(_) => p.abs() <= tol,
                Phase::WarmUp(_) => (p - l.warmup_kw).abs() <= tol,
                Phase::On(_) => true,
            };
            let counter_ok = match phase {
                Phase::WarmUp(k) => k <= l.warmup_minutes,
                Phase::CoolDown(k) => k <= l.cooldown_minutes,
                _ => true,
            };
            let transition_ok = match (track.prev, phase) {
                (None, _) => true,
                (Some(Phase::Off), next) => matches!(next, Phase::Off | Phase::WarmUp(1)),
                (Some(Phase::WarmUp(k)), next) if k < l.warmup_minutes => next == Phase::WarmUp(k + 1),
                (Some(Phase::WarmUp(_)), next) => next == Phase::On(1),
                (Some(Phase::On(k)), next) => matches!(next, Phase::CoolDown(1)) || next == Phase::On(k + 1),
                (Some(Phase::CoolDown(k)), next) if k < l.cooldown_minutes => next == Phase::CoolDown(k + 1),
                (Some(Phase::CoolDown(_)), next) => matches!(next, Phase::Off | Phase::WarmUp(1)),
            };
            if !(routine_ok && counter_ok && transition_ok) {
                report.flag(C::GensetRoutine, i);
            }
            if let (Some(Phase::On(k)), Phase::CoolDown(1)) = (track.prev, phase) {
                if k < l.min_runtime_minutes {
                    report.flag(C::GensetMinRuntime, i);
                }
            }
            if let Phase::On(_) = phase {
                if p < l.genset_min_kw - tol {
                    report.flag(C::GensetMinPower, i);
                }
                let cap = if flags.overload { l.genset_overload_kw } else { l.genset_nominal_kw };
                if p > cap + tol {
                    report.flag(C::GensetCap, i);
                }
            }
            if phase != Phase::Off {
                if track.window.len() == l.average_window {
                    if let Some(old) = track.window.pop_front() {
                        track.window_sum -= old;
                    }
                }
                track.window.push_back(p);
                track.window_sum += p;
                if track.window_sum / track.window.len() as f64 > l.average_cap_kw + tol {
                    report.flag(C::Genset48hAverage, i);
                }
                fuel += l.idle_l_per_h / 60.0;
            }
            fuel += p * l.fuel_l_per_kwh / 60.0;
            track.prev = Some(phase);
        }

        if phases[1].committed() && !phases[0].committed() {
            report.flag(C::PriorityOrder, i);
        }
        if let [Phase::On(_), Phase::On(_)] = phases {
            if ((row.p_gen1 - row.p_gen2) / l.genset_nominal_kw).abs() > tol {
                report.flag(C::EqualFraction, i);
            }
        }
        if (fuel - row.fuel_l).abs() > tol {
            report.flag(C::Fuel, i);
        }
        if row.deg < 0.0 {
            report.flag(C::Degradation, i);
        }
        prev_row = Some(row);
    }
    report
}

use scu_core::devices::GensetStatus;
use scu_core::scu::{Exogenous, MicrogridAction, ScuNode, StatusCommand};
use scu_core::systems::{
    build_microgrid, candidates, plan, recovery_shield, rollout_shortage, rollout_surplus, InitialState,
    MicrogridParams, MicrogridShieldConfig, MicrogridView, RecoveryScenario, Scenario, ShieldSettings,
};

fn microgrid(soc: f64, gensets: Vec<GensetStatus>) -> ScuNode {
    build_microgrid(
        &MicrogridParams::default(),
        &InitialState { soc, gensets },
        ShieldSettings::default(),
        RecoveryScenario::default(),
    )
    .unwrap()
}

fn shield_config() -> MicrogridShieldConfig {
    MicrogridShieldConfig { recovery: Some(RecoveryScenario::default()), reserves_allowed: true }
}

fn action(delta_orch: StatusCommand, p_batt_setpoint: f64) -> MicrogridAction {
    MicrogridAction { delta_orch, p_batt_setpoint }
}

#[test]
fn genset_floor_surplus_goes_to_the_battery_or_wind() {
    let tree = microgrid(0.5, vec![GensetStatus::On(40), GensetStatus::Off]);
    let view = MicrogridView::new(tree.controller.twin_children().unwrap()).unwrap();
    let exo = Exogenous { demand: 320.0, wind_avail: 272.0 };
    let p = plan(&view, action(StatusCommand::DoNothing, 0.0), &exo, false);
    assert_eq!(p.p_orch, 120.0);
    assert!(p.balance.abs() < 1e-9, "{p:?}");
    assert!((p.p_batt + 72.0).abs() < 1e-9 || (p.p_wind - 200.0).abs() < 1e-9, "{p:?}");
    assert!((p.p_wind + p.p_orch + p.p_batt - 320.0).abs() < 1e-9);
}

#[test]
fn battery_alone_covers_light_load_near_the_floor() {
    let tree = microgrid(0.11, vec![GensetStatus::Off, GensetStatus::Off]);
    let view = MicrogridView::new(tree.controller.twin_children().unwrap()).unwrap();
    let exo = Exogenous { demand: 320.0, wind_avail: 0.0 };
    let p = plan(&view, action(StatusCommand::DoNothing, 600.0), &exo, false);
    assert!((p.p_batt - 320.0).abs() < 1e-9, "{p:?}");
    assert_eq!(p.p_orch, 0.0);
    assert!(p.balance.abs() < 1e-9);
}

#[test]
fn candidate_order() {
    use StatusCommand::*;
    assert_eq!(candidates(Stop), vec![Stop, DoNothing, Start]);
    assert_eq!(candidates(DoNothing), vec![DoNothing, Start, Stop]);
    assert_eq!(candidates(Start), vec![Start, DoNothing, Stop]);
}

#[test]
fn stop_near_capacity_is_replaced_by_do_nothing() {
    // stopping genset 1 blocks genset 2 until the cool-down ends and genset 1
    // warms up again; the battery near its floor cannot bridge that gap
    let tree = microgrid(0.12, vec![GensetStatus::On(45), GensetStatus::Off]);
    let exo = Exogenous { demand: 380.0, wind_avail: 0.0 };
    let scenario = RecoveryScenario::default();
    let config = shield_config();
    let stop = action(StatusCommand::Stop, 0.0);
    let short = rollout_shortage(&scenario, &config, &tree.controller, stop, &exo, Scenario::WorstCase, false).unwrap();
    assert!(short > 0.0);
    let out = recovery_shield(&scenario, &config, &tree.controller, stop, &exo).unwrap();
    assert_eq!(out.delta, StatusCommand::DoNothing);
    assert_eq!(out.failed_scenario, Some(1));
    assert!(!out.exhausted);
}

#[test]
fn ample_margin_passes_both_scenarios() {
    let tree = microgrid(0.6, vec![GensetStatus::On(45), GensetStatus::On(40)]);
    let exo = Exogenous { demand: 250.0, wind_avail: 0.0 };
    let scenario = RecoveryScenario::default();
    let config = shield_config();
    let keep = action(StatusCommand::DoNothing, 0.0);
    for which in [Scenario::WorstCase, Scenario::Steady] {
        let short = rollout_shortage(&scenario, &config, &tree.controller, keep, &exo, which, false).unwrap();
        assert_eq!(short, 0.0, "{which:?}");
    }
}

#[test]
fn do_nothing_kept_when_no_genset_may_stop() {
    let tree = microgrid(0.6, vec![GensetStatus::On(10), GensetStatus::On(5)]);
    let exo = Exogenous { demand: 250.0, wind_avail: 0.0 };
    let out = recovery_shield(&RecoveryScenario::default(), &shield_config(), &tree.controller, action(StatusCommand::DoNothing, 0.0), &exo)
        .unwrap();
    assert_eq!(out.delta, StatusCommand::DoNothing);
    assert_eq!(out.failed_scenario, None);
}

#[test]
fn surplus_preference_stops_an_idle_second_genset() {
    // both floors exceed the falling demand once the battery is full
    let tree = microgrid(0.85, vec![GensetStatus::On(45), GensetStatus::On(40)]);
    let exo = Exogenous { demand: 250.0, wind_avail: 0.0 };
    let scenario = RecoveryScenario::default();
    let keep = rollout_surplus(&scenario, &tree.controller, StatusCommand::DoNothing, &exo).unwrap();
    assert!(keep > 0.0);
    let stop = rollout_surplus(&scenario, &tree.controller, StatusCommand::Stop, &exo).unwrap();
    assert_eq!(stop, 0.0);
    let out = recovery_shield(&scenario, &shield_config(), &tree.controller, action(StatusCommand::DoNothing, 0.0), &exo).unwrap();
    assert_eq!(out.delta, StatusCommand::Stop);
    let off = RecoveryScenario { surplus_horizon: 0, ..scenario };
    let out = recovery_shield(&off, &shield_config(), &tree.controller, action(StatusCommand::DoNothing, 0.0), &exo).unwrap();
    assert_eq!(out.delta, StatusCommand::DoNothing);
}

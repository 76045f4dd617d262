use std::sync::Arc;

use scu_core::devices::GensetStatus;
use scu_core::env::{run_episode, EnvConfig, EnvObservation, MicrogridEnv};
use scu_core::exogenous::{synth_series, ExogenousSeries};
use scu_core::policies::{Policy, PolicyKind};
use scu_core::scu::{MicrogridAction, StatusCommand};
use scu_core::systems::InitialState;
use scu_core::Error;

fn series_of(demand: Vec<f64>, wind: Vec<f64>) -> Arc<ExogenousSeries> {
    Arc::new(ExogenousSeries { demand, wind_avail: wind })
}

fn env_with(series: &Arc<ExogenousSeries>, init: Option<InitialState>, minutes: usize) -> MicrogridEnv {
    let config = EnvConfig {
        episode_minutes: minutes,
        start_minute: Some(0),
        init,
        scenario: Some(series.recovery_scenario(9)),
        ..EnvConfig::default()
    };
    MicrogridEnv::new(config, Arc::clone(series)).unwrap()
}

fn keep(p_batt: f64) -> MicrogridAction {
    MicrogridAction { delta_orch: StatusCommand::DoNothing, p_batt_setpoint: p_batt }
}

#[test]
fn reward_of_one_genset_at_300_kw() {
    let mut demand = vec![200.0; 10];
    demand.extend([300.0; 10]);
    let series = series_of(demand, vec![0.0; 20]);
    let init = InitialState { soc: 0.5, gensets: vec![GensetStatus::On(45), GensetStatus::Off] };
    let mut env = env_with(&series, Some(init), 20);
    env.reset().unwrap();
    for _ in 0..10 {
        env.step(keep(0.0)).unwrap();
    }
    let r = env.step(keep(0.0)).unwrap();
    assert_eq!(r.row.p_gen1, 300.0);
    assert_eq!(r.row.p_batt, 0.0);
    assert_eq!(r.metrics.degradation, 0.0);
    assert!((r.reward + 1.416_666_666_666_666_7).abs() < 1e-12, "{}", r.reward);
}

#[test]
fn idle_grid_without_demand_costs_nothing() {
    let series = series_of(vec![0.0; 5], vec![0.0; 5]);
    let init = InitialState { soc: 0.5, gensets: vec![GensetStatus::Off, GensetStatus::Off] };
    let mut env = env_with(&series, Some(init), 5);
    env.reset().unwrap();
    let r = env.step(keep(0.0)).unwrap();
    assert_eq!(r.reward, 0.0);
    assert_eq!(r.row.balance, 0.0);
}

#[test]
fn initial_soc_above_the_ceiling_is_rejected() {
    let series = series_of(vec![200.0; 10], vec![0.0; 10]);
    let init = InitialState { soc: 0.95, gensets: vec![GensetStatus::Off, GensetStatus::Off] };
    let mut env = env_with(&series, Some(init), 10);
    assert!(matches!(env.reset(), Err(Error::InitialState(_))));
}

#[test]
fn fixed_initial_state_gives_identical_observations() {
    let series = Arc::new(synth_series(3, 1));
    let init = InitialState { soc: 0.5, gensets: vec![GensetStatus::On(0), GensetStatus::Off] };
    let mut a = env_with(&series, Some(init.clone()), 30);
    let mut b = env_with(&series, Some(init), 30);
    assert_eq!(a.reset().unwrap(), b.reset().unwrap());
    assert_eq!(a.reset().unwrap(), b.reset().unwrap());
}

#[test]
fn episode_ends_after_a_day_and_refuses_more_steps() {
    let series = Arc::new(synth_series(4, 1));
    let mut env = env_with(&series, None, 1440);
    env.reset().unwrap();
    let mut steps = 0;
    loop {
        steps += 1;
        if env.step(keep(0.0)).unwrap().done {
            break;
        }
    }
    assert_eq!(steps, 1440);
    assert!(matches!(env.step(keep(0.0)), Err(Error::ContractViolation(_))));
}

#[test]
fn stepping_before_reset_or_after_close_is_refused() {
    let series = Arc::new(synth_series(4, 1));
    let mut env = env_with(&series, None, 10);
    assert!(matches!(env.step(keep(0.0)), Err(Error::ContractViolation(_))));
    env.reset().unwrap();
    env.close();
    assert!(matches!(env.step(keep(0.0)), Err(Error::ContractViolation(_))));
    assert!(env.reset().is_ok());
}

#[test]
fn non_finite_setpoint_is_refused() {
    let series = Arc::new(synth_series(4, 1));
    let mut env = env_with(&series, None, 10);
    env.reset().unwrap();
    assert!(matches!(env.step(keep(f64::NAN)), Err(Error::ContractViolation(_))));
}

#[test]
fn rewards_sum_to_fuel_plus_weighted_degradation() {
    let series = Arc::new(synth_series(5, 1));
    for alpha in [0.0, 1.0, 3.0] {
        let config = EnvConfig { alpha, start_minute: Some(0), seed: 5, ..EnvConfig::default() };
        let mut env = MicrogridEnv::new(config, Arc::clone(&series)).unwrap();
        let mut policy = Policy::new(PolicyKind::Random, 5, Default::default());
        let out = run_episode(&mut env, &mut policy).unwrap();
        let m = out.metrics;
        let expected = -(m.fuel_l + alpha * m.degradation);
        assert!((m.reward - expected).abs() <= 1e-9 * expected.abs().max(1.0), "alpha {alpha}");
        assert!(m.degradation > 0.0);
    }
}

#[test]
fn observation_vector_matches_its_layout() {
    let series = Arc::new(synth_series(6, 1));
    let mut env = env_with(&series, None, 10);
    let obs = env.reset().unwrap();
    let names = EnvObservation::layout(obs.gensets.len(), obs.rainflow_capacity);
    assert_eq!(obs.to_vec().len(), names.len());
    assert_eq!(names[3], "soc");
    assert_eq!(obs.to_vec()[3], obs.soc);
}

#[test]
fn same_seed_same_episode() {
    let series = Arc::new(synth_series(8, 1));
    let run = || {
        let config = EnvConfig { seed: 8, ..EnvConfig::default() };
        let mut env = MicrogridEnv::new(config, Arc::clone(&series)).unwrap();
        let mut policy = Policy::new(PolicyKind::Random, 8, Default::default());
        run_episode(&mut env, &mut policy).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.metrics, b.metrics);
}

#[test]
fn three_gensets_are_refused_by_the_environment() {
    let series = Arc::new(synth_series(1, 1));
    let mut config = EnvConfig::default();
    config.params.gensets = 3;
    assert!(matches!(MicrogridEnv::new(config, series), Err(Error::Config(_))));
}

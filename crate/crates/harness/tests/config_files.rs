//! TOML configuration parsing.

use apbm_harness::config::{ConfigError, Scenario};
use apbm_harness::{Experiment, ExperimentConfig, Method, Preset};

fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    ExperimentConfig::from_toml_str(text, "test.toml")
}

#[test]
fn minimal_file_gives_defaults() {
    let cfg = parse("experiment = \"tracking\"").unwrap();
    assert_eq!(
        cfg,
        ExperimentConfig::defaults(Experiment::Tracking, Preset::Paper).unwrap()
    );
    let cfg = parse("experiment = \"lorenz\"").unwrap();
    assert_eq!(cfg.preset, Preset::Classical);
    assert_eq!(cfg.steps(), 4000);
}

#[test]
fn overrides_are_applied() {
    let cfg = parse(
        r#"
experiment = "tracking"
n_runs = 7
steps = 40
base_seed = 11
lambda_grid = [0.5]
methods = ["apbm"]

[filter]
process_var = 0.2
theta0_var = 0.0

[tracking]
omega0 = 0.0
meas_var = [2.0, 0.2]
"#,
    )
    .unwrap();
    assert_eq!((cfg.n_runs, cfg.steps(), cfg.base_seed), (7, 40, 11));
    assert_eq!(cfg.lambda_grid, vec![0.5]);
    assert_eq!(cfg.methods, vec![Method::Apbm]);
    assert_eq!(cfg.filter.process_var, 0.2);
    assert_eq!(cfg.filter.theta0_var, 0.0);
    let Scenario::Tracking(t) = &cfg.scenario else {
        panic!("tracking scenario")
    };
    assert_eq!(t.omega0, 0.0);
    assert_eq!(t.meas_noise_cov[(0, 0)], 2.0);
}

#[test]
fn unknown_keys_are_rejected_at_every_level() {
    for text in [
        "experiment = \"tracking\"\nrunz = 3",
        "experiment = \"tracking\"\n[filter]\nq = 1.0",
        "experiment = \"tracking\"\n[tracking]\nspeed = 1.0",
        "experiment = \"lorenz\"\n[lorenz]\nsigma = 10.0",
        "experiment = \"tracking\"\n[extra]\na = 1",
    ] {
        assert!(
            matches!(parse(text), Err(ConfigError::Parse { .. })),
            "{text}"
        );
    }
}

#[test]
fn invalid_values_are_rejected() {
    for text in [
        "experiment = \"tracking\"\nlambda_grid = [-1.0]",
        "experiment = \"tracking\"\nn_runs = 0",
        "experiment = \"tracking\"\nmethods = [\"true_model\"]",
        "experiment = \"tracking\"\npreset = \"classical\"",
        "experiment = \"lorenz\"\nlambda_grid = [0.1]",
        "experiment = \"lorenz\"\n[tracking]\nomega0 = 0.1",
    ] {
        assert!(parse(text).is_err(), "{text}");
    }
}

#[test]
fn fully_specified_tracking_file_parses() {
    let cfg = parse(
        r#"
experiment = "tracking"
preset = "paper"
n_runs = 100
steps = 500
base_seed = 0
lambda_grid = [0.0, 0.01, 0.1, 10.0, 1e6]
methods = ["cv", "apbm"]
trajectory_runs = [0]

[filter]
process_var = 0.1
init_var = [0.1, 0.1, 0.01, 0.01]
theta_process_var = 1e-4
theta0_var = 1e-2
hidden_units = 5

[tracking]
x0 = [100.0, 0.0, 100.0, 0.0]
omega0 = 0.05
u_var = 0.1
v_var = 0.1
meas_var = [1.0, 0.1]
turn_model = "coordinated_turn"
"#,
    )
    .unwrap();
    assert_eq!(
        cfg,
        ExperimentConfig::defaults(Experiment::Tracking, Preset::Paper).unwrap()
    );
}

use bloch_mca::model::ModelParams;
use bloch_mca::scenarios::{self, Scenario};
use bloch_mca::solver::{BaselineKind, ControlSet, SolverSettings};

fn value_at_zero(scenario: &Scenario, settings: &SolverSettings) -> f64 {
    let sol = scenarios::solve_kind(
        scenario,
        BaselineKind::Dynamic,
        &ControlSet::vertices(&scenario.params),
        settings,
    )
    .unwrap();
    assert!(sol.report.converged);
    let grid = scenario.grid().unwrap();
    grid.interpolate(&sol.values.values, 0.0)
}

#[test]
fn dynamic_cost_settles_under_refinement() {
    let base = Scenario::eigenstate(ModelParams::default());
    let v: Vec<f64> = [315, 629, 1257, 2513]
        .iter()
        .map(|&n| value_at_zero(&base.clone().with_nodes(n), &SolverSettings::default()))
        .collect();
    let steps: Vec<f64> = v.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(steps.windows(2).all(|s| s[1] < s[0]), "{v:?}");
    assert!(steps[2] < 1e-3, "{v:?}");
}

#[test]
fn acceleration_does_not_move_the_fixed_point() {
    let scenario =
        Scenario::non_eigenstate(ModelParams::new(5.0, 1.0, 2.0).unwrap()).with_nodes(41);
    let fast = value_at_zero(&scenario, &SolverSettings::default());
    let plain = value_at_zero(&scenario, &SolverSettings::plain(1e-12, 2_000_000));
    assert!((fast - plain).abs() < 1e-8, "{fast} vs {plain}");
}

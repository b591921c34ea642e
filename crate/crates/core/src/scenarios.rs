//! The two benchmark transfers and the three-strategy comparison.
//!
//! * eigenstate: `+z → −z`, domain `(−π, π)`, targets `{−π, π}`;
//! * non-eigenstate: `+x → −x`, domain `(−π/2, 3π/2)`, targets `{−π/2, 3π/2}`.
//!
//! Both are solved under dynamic measurement, fixed measurement and pure
//! rotation on one shared grid, giving one [`ComparisonRow`] per node.

use std::f64::consts::{FRAC_PI_2, PI};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chain::Grid;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::solver::{
    self, BaselineKind, ControlSet, Policy, SolveReport, SolverSettings, ValueFunction,
};

pub const EIGENSTATE_NODES: usize = 1257;
pub const NON_EIGENSTATE_NODES: usize = 1601;

/// Slack on `dynamic ≤ min(fixed, rotation)` that absorbs stopping error.
pub const DOMINANCE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Eigenstate,
    NonEigenstate,
    Custom,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Eigenstate => "eigenstate",
            ScenarioKind::NonEigenstate => "non_eigenstate",
            ScenarioKind::Custom => "custom",
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eigenstate" => Ok(ScenarioKind::Eigenstate),
            "non_eigenstate" | "non-eigenstate" => Ok(ScenarioKind::NonEigenstate),
            "custom" => Ok(ScenarioKind::Custom),
            other => Err(Error::Config {
                key: "scenario".into(),
                reason: format!("expected eigenstate, non_eigenstate or custom, got `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub lo: f64,
    pub hi: f64,
    pub params: ModelParams,
    pub nodes: usize,
}

impl Scenario {
    pub fn eigenstate(params: ModelParams) -> Self {
        Self {
            kind: ScenarioKind::Eigenstate,
            lo: -PI,
            hi: PI,
            params,
            nodes: EIGENSTATE_NODES,
        }
    }

    pub fn non_eigenstate(params: ModelParams) -> Self {
        Self {
            kind: ScenarioKind::NonEigenstate,
            lo: -FRAC_PI_2,
            hi: 1.5 * PI,
            params,
            nodes: NON_EIGENSTATE_NODES,
        }
    }

    pub fn custom(lo: f64, hi: f64, params: ModelParams, nodes: usize) -> Self {
        Self {
            kind: ScenarioKind::Custom,
            lo,
            hi,
            params,
            nodes,
        }
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        match self.kind {
            ScenarioKind::Eigenstate if (self.lo, self.hi) != (-PI, PI) => Err(Error::Config {
                key: "scenario".into(),
                reason: "eigenstate domain is fixed to (-pi, pi)".into(),
            }),
            ScenarioKind::NonEigenstate if (self.lo, self.hi) != (-FRAC_PI_2, 1.5 * PI) => {
                Err(Error::Config {
                    key: "scenario".into(),
                    reason: "non_eigenstate domain is fixed to (-pi/2, 3pi/2)".into(),
                })
            }
            _ => self.grid().map(|_| ()),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.lo, self.hi, self.nodes)
    }

    /// Interior start points used for Monte Carlo cross-checks.
    pub fn probe_points(&self) -> Vec<f64> {
        match self.kind {
            ScenarioKind::Eigenstate => vec![
                -FRAC_PI_2 - 0.1,
                -FRAC_PI_2 + 0.1,
                -PI / 4.0,
                0.0,
                PI / 4.0,
                FRAC_PI_2 - 0.1,
                FRAC_PI_2 + 0.1,
            ],
            ScenarioKind::NonEigenstate => {
                vec![-PI / 4.0, 0.1, FRAC_PI_2, PI - 0.1, 1.25 * PI]
            }
            ScenarioKind::Custom => {
                let w = self.hi - self.lo;
                [0.25, 0.4, 0.5, 0.6, 0.75]
                    .iter()
                    .map(|f| self.lo + f * w)
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub theta: f64,
    pub cost_dynamic: f64,
    pub cost_fixed: f64,
    pub cost_rotation: f64,
    /// Optimal dynamic-strategy controls; `(0, 0)` on target rows.
    pub alpha_opt: f64,
    pub gamma_opt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub const HEADER: [&'static str; 6] = [
        "theta",
        "cost_dynamic",
        "cost_fixed",
        "cost_rotation",
        "alpha_opt",
        "gamma_opt",
    ];

    /// Nodes where `dynamic ≤ min(fixed, rotation) + tol` fails.
    pub fn dominance_violations(&self, tol: f64) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.cost_dynamic > r.cost_fixed.min(r.cost_rotation) + tol)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Everything produced by one scenario comparison.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub grid: Grid,
    pub table: ComparisonTable,
    pub dynamic: Solution,
    pub fixed: Solution,
    pub rotation: Solution,
}

impl ScenarioRun {
    pub fn all_converged(&self) -> bool {
        self.dynamic.report.converged
            && self.fixed.report.converged
            && self.rotation.report.converged
    }

    pub fn solution(&self, kind: BaselineKind) -> &Solution {
        match kind {
            BaselineKind::Dynamic => &self.dynamic,
            BaselineKind::FixedMeasurement => &self.fixed,
            BaselineKind::PureRotation => &self.rotation,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub kind: BaselineKind,
    pub values: ValueFunction,
    pub policy: Policy,
    pub report: SolveReport,
}

/// Solves one strategy of a scenario.
pub fn solve_kind(
    scenario: &Scenario,
    kind: BaselineKind,
    controls: &ControlSet,
    settings: &SolverSettings,
) -> Result<Solution> {
    scenario.validate()?;
    let grid = scenario.grid()?;
    let (values, policy, report) =
        solver::evaluate_baseline(kind, &grid, &scenario.params, controls, settings)?;
    Ok(Solution {
        kind,
        values,
        policy,
        report,
    })
}

/// Solves all three strategies on the scenario grid and tabulates them.
///
/// Non-convergence is not an error; check [`ScenarioRun::all_converged`].
pub fn run_scenario(
    scenario: &Scenario,
    controls: &ControlSet,
    settings: &SolverSettings,
) -> Result<ScenarioRun> {
    scenario.validate()?;
    let grid = scenario.grid()?;
    let mut solved = settings
        .execution
        .map(BaselineKind::ALL.len(), |k| {
            solve_kind(scenario, BaselineKind::ALL[k], controls, settings)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let rotation = solved.pop().expect("three strategies");
    let fixed = solved.pop().expect("three strategies");
    let dynamic = solved.pop().expect("three strategies");

    let rows = (0..grid.len())
        .map(|i| {
            let (alpha_opt, gamma_opt) = if grid.is_target(i) {
                (0.0, 0.0)
            } else {
                let a = dynamic.policy.at_node(i);
                (a.alpha, a.gamma)
            };
            ComparisonRow {
                theta: grid.node(i),
                cost_dynamic: dynamic.values.values[i],
                cost_fixed: fixed.values.values[i],
                cost_rotation: rotation.values.values[i],
                alpha_opt,
                gamma_opt,
            }
        })
        .collect();
    Ok(ScenarioRun {
        scenario: scenario.clone(),
        grid,
        table: ComparisonTable { rows },
        dynamic,
        fixed,
        rotation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCrossing {
    /// e.g. `"fixed-rotation"`: the sign of `fixed − rotation` flips here.
    pub pair: String,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossings {
    /// Midpoints between adjacent interior nodes where `γ*` changes.
    pub gamma_switches: Vec<f64>,
    pub cost_crossings: Vec<CostCrossing>,
    /// Maximal runs where rotation exceeds dynamic by more than `gap_tolerance`.
    pub dynamic_beats_rotation: Vec<(f64, f64)>,
    pub gamma_off: Vec<(f64, f64)>,
    pub gamma_full: Vec<(f64, f64)>,
    /// Every reported point is within this distance of the true switch.
    pub localization: f64,
    pub gap_tolerance: f64,
}

/// Differences at or below this are treated as ties when locating crossings.
pub const CROSSING_TOLERANCE: f64 = 1e-6;
/// Gap that counts as a real improvement over rotation.
pub const GAP_TOLERANCE: f64 = 1e-4;

/// Policy switches and cost-curve crossings of a comparison table.
pub fn crossings(table: &ComparisonTable, params: &ModelParams) -> Crossings {
    let rows = &table.rows;
    let interior = if rows.len() > 2 {
        &rows[1..rows.len() - 1]
    } else {
        &rows[..0]
    };
    let h = if rows.len() > 1 {
        rows[1].theta - rows[0].theta
    } else {
        0.0
    };

    let gamma_switches = interior
        .windows(2)
        .filter(|w| w[0].gamma_opt != w[1].gamma_opt)
        .map(|w| 0.5 * (w[0].theta + w[1].theta))
        .collect();

    let mut cost_crossings = Vec::new();
    let pairs: [(&str, Cost, Cost); 3] = [
        ("fixed-rotation", |r| r.cost_fixed, |r| r.cost_rotation),
        ("dynamic-rotation", |r| r.cost_dynamic, |r| r.cost_rotation),
        ("dynamic-fixed", |r| r.cost_dynamic, |r| r.cost_fixed),
    ];
    for (name, f, g) in pairs {
        for theta in sign_changes(interior, |r| f(r) - g(r), CROSSING_TOLERANCE) {
            cost_crossings.push(CostCrossing {
                pair: name.to_string(),
                theta,
            });
        }
    }

    let dynamic_beats_rotation = runs(interior, |r| {
        r.cost_rotation - r.cost_dynamic > GAP_TOLERANCE
    });

    let (gamma_off, gamma_full) = gamma_runs(interior, params);
    Crossings {
        gamma_switches,
        cost_crossings,
        dynamic_beats_rotation,
        gamma_off,
        gamma_full,
        localization: 2.0 * h,
        gap_tolerance: GAP_TOLERANCE,
    }
}

type Cost = fn(&ComparisonRow) -> f64;
type Intervals = Vec<(f64, f64)>;

fn gamma_runs(rows: &[ComparisonRow], params: &ModelParams) -> (Intervals, Intervals) {
    let off = runs(rows, |r| r.gamma_opt == 0.0);
    let full = if params.gamma_max > 0.0 {
        runs(rows, |r| r.gamma_opt == params.gamma_max)
    } else {
        Vec::new()
    };
    (off, full)
}

/// Maximal runs of consecutive rows satisfying `pred`, as `[first θ, last θ]`.
fn runs(rows: &[ComparisonRow], pred: impl Fn(&ComparisonRow) -> bool) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start: Option<f64> = None;
    let mut last = 0.0;
    for r in rows {
        if pred(r) {
            start.get_or_insert(r.theta);
            last = r.theta;
        } else if let Some(s) = start.take() {
            out.push((s, last));
        }
    }
    if let Some(s) = start {
        out.push((s, last));
    }
    out
}

/// θ where `diff` changes sign, ignoring values within `tol` of zero.
fn sign_changes(
    rows: &[ComparisonRow],
    diff: impl Fn(&ComparisonRow) -> f64,
    tol: f64,
) -> Vec<f64> {
    let mut out = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for r in rows {
        let d = diff(r);
        if d.abs() <= tol {
            continue;
        }
        if let Some((theta0, d0)) = last {
            if d0.signum() != d.signum() {
                let w = d0 / (d0 - d);
                out.push(theta0 + w * (r.theta - theta0));
            }
        }
        last = Some((r.theta, d));
    }
    out
}

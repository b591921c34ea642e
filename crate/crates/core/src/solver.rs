//! Value iteration for the discretized dynamic-programming equation
//!
//! ```text
//! φ(x) = min_η [ p(x,x+h|η)φ(x+h) + p(x,x−h|η)φ(x−h) + p(x,x|η)φ(x) + Δt ] / (1 + βΔt)
//! ```
//!
//! with `φ = 0` on the two target nodes. `1/(1 + βΔt)` stands in for the
//! discount `e^{−βΔt}` over one chain step.
//!
//! The operator is compiled once per (grid, params, control set): every
//! candidate's transition probabilities are tabulated per node, so a sweep
//! is a handful of multiply-adds per candidate. Sweeps are Jacobi updates
//! (each node reads only the previous iterate) and therefore give the same
//! bits regardless of node order or worker count.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::chain::{self, Grid};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{ControlAction, ModelParams};

pub const DEFAULT_THRESHOLD: f64 = 1e-9;
pub const DEFAULT_MAX_ITERS: usize = 200_000;

/// Nodes handed to one worker at a time during a sweep.
const SWEEP_CHUNK: usize = 128;

/// Finite candidate controls searched at every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSet {
    pub alphas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Also try `α = 2γ sin 2x`, which zeroes the drift, whenever it is admissible.
    pub include_kink: bool,
}

impl ControlSet {
    /// `α ∈ {−Ω, 0, Ω}`, `γ ∈ {0, Γ}` plus the drift-nulling candidate.
    ///
    /// The per-node objective is piecewise affine in `(α, γ)` with a single
    /// kink where the drift changes sign, so this set attains the minimum over
    /// the full box `[−Ω, Ω] × [0, Γ]`.
    pub fn vertices(params: &ModelParams) -> Self {
        Self {
            alphas: vec![-params.omega, 0.0, params.omega],
            gammas: dedup_sorted(vec![0.0, params.gamma_max]),
            include_kink: true,
        }
    }

    /// Uniform `n_alpha × n_gamma` lattice over the admissible box.
    pub fn dense(params: &ModelParams, n_alpha: usize, n_gamma: usize) -> Result<Self> {
        if n_alpha < 2 || n_gamma < 1 {
            return Err(Error::InvalidControlSet(format!(
                "dense lattice needs n_alpha >= 2 and n_gamma >= 1 (got {n_alpha}x{n_gamma})"
            )));
        }
        let alphas = (0..n_alpha)
            .map(|i| -params.omega + 2.0 * params.omega * i as f64 / (n_alpha - 1) as f64)
            .collect();
        let gammas = if n_gamma == 1 {
            vec![params.gamma_max]
        } else {
            (0..n_gamma)
                .map(|j| params.gamma_max * j as f64 / (n_gamma - 1) as f64)
                .collect()
        };
        Ok(Self {
            alphas,
            gammas: dedup_sorted(gammas),
            include_kink: false,
        })
    }

    /// No measurement, full-speed rotation either way.
    pub fn pure_rotation(params: &ModelParams) -> Self {
        Self {
            alphas: vec![-params.omega, params.omega],
            gammas: vec![0.0],
            include_kink: false,
        }
    }

    /// Measurement pinned at `Γ`; rotation candidates taken from `base`.
    pub fn fixed_measurement(params: &ModelParams, base: &ControlSet) -> Self {
        Self {
            alphas: base.alphas.clone(),
            gammas: vec![params.gamma_max],
            include_kink: base.include_kink,
        }
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if self.alphas.is_empty() || self.gammas.is_empty() {
            return Err(Error::InvalidControlSet(
                "alphas and gammas must both be nonempty".into(),
            ));
        }
        for &a in &self.alphas {
            if !a.is_finite() || a.abs() > params.omega {
                return Err(Error::InvalidControlSet(format!(
                    "alpha {a} outside [-{0}, {0}]",
                    params.omega
                )));
            }
        }
        for &g in &self.gammas {
            if !g.is_finite() || !(0.0..=params.gamma_max).contains(&g) {
                return Err(Error::InvalidControlSet(format!(
                    "gamma {g} outside [0, {}]",
                    params.gamma_max
                )));
            }
        }
        Ok(())
    }

    /// Candidates at node `x`, deduplicated and in tie-break order.
    pub fn candidates_at(&self, x: f64, params: &ModelParams) -> Vec<ControlAction> {
        let mut out = Vec::with_capacity(self.alphas.len() * self.gammas.len() + self.gammas.len());
        for &gamma in &self.gammas {
            for &alpha in &self.alphas {
                out.push(ControlAction::new(alpha, gamma));
            }
            if self.include_kink {
                let alpha = 2.0 * gamma * (2.0 * x).sin();
                if alpha.abs() <= params.omega {
                    out.push(ControlAction::new(alpha, gamma));
                }
            }
        }
        out.sort_by(tie_break_order);
        out.dedup();
        out
    }
}

fn dedup_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Preference among equal-cost actions: smaller |α|, then smaller α, then smaller γ.
pub fn tie_break_order(a: &ControlAction, b: &ControlAction) -> Ordering {
    a.alpha
        .abs()
        .total_cmp(&b.alpha.abs())
        .then(a.alpha.total_cmp(&b.alpha))
        .then(a.gamma.total_cmp(&b.gamma))
}

/// Cost-to-go per grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction {
    pub values: Vec<f64>,
}

impl ValueFunction {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        sup_distance(&self.values, &other.values)
    }
}

/// Greedy action at every interior node (index `i` ↔ grid node `i + 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub actions: Vec<ControlAction>,
}

impl Policy {
    /// Action at grid node `i`; targets take their interior neighbour's action.
    pub fn at_node(&self, i: usize) -> ControlAction {
        let k = i.saturating_sub(1).min(self.actions.len() - 1);
        self.actions[k]
    }

    /// Nearest-node lookup, the piecewise-constant reading of a chain policy.
    pub fn lookup(&self, grid: &Grid, theta: f64) -> ControlAction {
        self.at_node(grid.nearest(theta))
    }
}

/// What happens between two Jacobi sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acceleration {
    /// Plain value iteration: the next iterate is the sweep output.
    None,
    /// Replace the iterate by the exact cost of the sweep's greedy policy
    /// (a tridiagonal solve). Same fixed point and stopping test, but
    /// converges in a few dozen sweeps where plain iteration needs ~10⁶ once
    /// `βΔt` is tiny.
    #[default]
    PolicyEvaluation,
}

impl std::str::FromStr for Acceleration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Acceleration::None),
            "policy_evaluation" => Ok(Acceleration::PolicyEvaluation),
            other => Err(Error::Config {
                key: "acceleration".into(),
                reason: format!("expected `none` or `policy_evaluation`, got `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub threshold: f64,
    pub max_iters: usize,
    pub execution: Execution,
    pub acceleration: Acceleration,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            max_iters: DEFAULT_MAX_ITERS,
            execution: Execution::default(),
            acceleration: Acceleration::default(),
        }
    }
}

impl SolverSettings {
    /// Plain Jacobi value iteration with the given stopping rule.
    pub fn plain(threshold: f64, max_iters: usize) -> Self {
        Self {
            threshold,
            max_iters,
            acceleration: Acceleration::None,
            ..Self::default()
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() || self.threshold <= 0.0 {
            return Err(Error::InvalidParam {
                field: "threshold",
                reason: format!("must be finite and > 0, got {}", self.threshold),
            });
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParam {
                field: "max_iters",
                reason: "must be >= 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Applications of ξ.
    pub iterations: usize,
    /// Exact policy solves interleaved with the sweeps.
    pub policy_evaluations: usize,
    /// Sup-norm change on the last sweep.
    pub final_residual: f64,
    pub converged: bool,
    pub threshold: f64,
    /// `κ = max_x 1/(1 + βΔt(x))`.
    pub contraction_modulus: f64,
    /// `κ/(1 − κ) · residual`, a bound on the distance to the fixed point.
    pub error_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    p_plus: f64,
    p_minus: f64,
    p_stay: f64,
}

/// The operator ξ tabulated for one (grid, params, control set).
#[derive(Debug, Clone)]
pub struct BellmanOperator {
    grid: Grid,
    params: ModelParams,
    /// `offsets[i]..offsets[i+1]` indexes node `i`'s candidates.
    offsets: Vec<usize>,
    candidates: Vec<Candidate>,
    actions: Vec<ControlAction>,
    dt: Vec<f64>,
    discount: Vec<f64>,
}

impl BellmanOperator {
    pub fn new(grid: &Grid, params: &ModelParams, controls: &ControlSet) -> Result<Self> {
        params.validate()?;
        controls.validate(params)?;
        let n = grid.len();
        let h = grid.h();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut candidates = Vec::new();
        let mut actions = Vec::new();
        let mut dt = vec![0.0; n];
        let mut discount = vec![1.0; n];
        offsets.push(0);
        for i in 0..n {
            if !grid.is_target(i) {
                let x = grid.node(i);
                for action in controls.candidates_at(x, params) {
                    let t = chain::local_transitions(x, action, params, h)?;
                    dt[i] = t.dt;
                    candidates.push(Candidate {
                        p_plus: t.p_plus,
                        p_minus: t.p_minus,
                        p_stay: t.p_stay,
                    });
                    actions.push(action);
                }
                discount[i] = 1.0 / (1.0 + params.beta * dt[i]);
            }
            offsets.push(candidates.len());
        }
        Ok(Self {
            grid: grid.clone(),
            params: *params,
            offsets,
            candidates,
            actions,
            dt,
            discount,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Interpolation interval at every node (0 on targets).
    pub fn intervals(&self) -> &[f64] {
        &self.dt
    }

    /// `κ = max over interior nodes of 1/(1 + βΔt)`.
    pub fn contraction_modulus(&self) -> f64 {
        self.grid
            .interior()
            .map(|i| self.discount[i])
            .fold(0.0, f64::max)
    }

    pub fn candidate_count(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Min and argmin of the node-`i` objective under `phi`.
    #[inline]
    fn node_min(&self, phi: &[f64], i: usize) -> (f64, usize) {
        let (up, down, here) = (phi[i + 1], phi[i - 1], phi[i]);
        let dt = self.dt[i];
        let disc = self.discount[i];
        let range = self.offsets[i]..self.offsets[i + 1];
        let mut best = f64::INFINITY;
        let mut arg = range.start;
        for k in range {
            let c = &self.candidates[k];
            let v = (c.p_plus * up + c.p_minus * down + c.p_stay * here + dt) * disc;
            // strict comparison keeps the earliest candidate in tie-break order
            if v < best {
                best = v;
                arg = k;
            }
        }
        (best, arg)
    }

    /// One Jacobi sweep `out = ξ(phi)`.
    pub fn apply_into(&self, phi: &[f64], out: &mut [f64], exec: Execution) {
        assert_eq!(phi.len(), self.grid.len());
        assert_eq!(out.len(), self.grid.len());
        let n = self.grid.len();
        exec.fill(out, SWEEP_CHUNK, |i| {
            if i == 0 || i + 1 == n {
                0.0
            } else {
                self.node_min(phi, i).0
            }
        });
    }

    /// `ξ(phi)` together with its argmin policy.
    pub fn apply(&self, phi: &ValueFunction, exec: Execution) -> (ValueFunction, Policy) {
        let mut out = vec![0.0; self.grid.len()];
        self.apply_into(&phi.values, &mut out, exec);
        (ValueFunction { values: out }, self.greedy_policy(phi, exec))
    }

    /// Argmin actions of `ξ(phi)`.
    pub fn greedy_policy(&self, phi: &ValueFunction, exec: Execution) -> Policy {
        let interior = self.grid.interior();
        let actions = exec.map(interior.len(), |k| {
            let (_, arg) = self.node_min(&phi.values, k + 1);
            self.actions[arg]
        });
        Policy { actions }
    }

    /// Iterates ξ from `φ₀ ≡ 0` until the sup-norm change is at most the threshold.
    pub fn iterate(
        &self,
        settings: &SolverSettings,
    ) -> Result<(ValueFunction, Policy, SolveReport)> {
        self.iterate_observed(settings, |_, _| {})
    }

    /// As [`Self::iterate`], calling `observe(k, residual)` after every sweep.
    pub fn iterate_observed(
        &self,
        settings: &SolverSettings,
        mut observe: impl FnMut(usize, f64),
    ) -> Result<(ValueFunction, Policy, SolveReport)> {
        settings.validate()?;
        let n = self.grid.len();
        let exec = settings.execution;
        let mut prev = vec![0.0; n];
        let mut next = vec![(0.0, 0); n];
        let mut residual;
        let mut iterations = 0;
        let mut evaluations = 0;
        loop {
            self.sweep_into(&prev, &mut next, exec);
            residual = next
                .iter()
                .zip(&prev)
                .fold(0.0, |m, ((v, _), p)| f64::max(m, (v - p).abs()));
            iterations += 1;
            observe(iterations, residual);
            if residual <= settings.threshold || iterations >= settings.max_iters {
                break;
            }
            match settings.acceleration {
                Acceleration::None => {
                    for (p, (v, _)) in prev.iter_mut().zip(&next) {
                        *p = *v;
                    }
                }
                Acceleration::PolicyEvaluation => {
                    self.evaluate_choice(&next, &mut prev);
                    evaluations += 1;
                }
            }
        }
        // `next` holds ξ(prev) and its argmin.
        let policy = Policy {
            actions: self
                .grid
                .interior()
                .map(|i| self.actions[next[i].1])
                .collect(),
        };
        let values = next.iter().map(|(v, _)| *v).collect();
        let kappa = self.contraction_modulus();
        let report = SolveReport {
            iterations,
            policy_evaluations: evaluations,
            final_residual: residual,
            converged: residual <= settings.threshold,
            threshold: settings.threshold,
            contraction_modulus: kappa,
            error_bound: kappa / (1.0 - kappa) * residual,
        };
        Ok((ValueFunction { values }, policy, report))
    }

    /// `out[i] = (ξ(phi)(i), argmin candidate index)`; targets get `(0, 0)`.
    fn sweep_into(&self, phi: &[f64], out: &mut [(f64, usize)], exec: Execution) {
        let n = self.grid.len();
        exec.fill(out, SWEEP_CHUNK, |i| {
            if i == 0 || i + 1 == n {
                (0.0, 0)
            } else {
                self.node_min(phi, i)
            }
        });
    }

    /// Exact discounted cost of the stationary policy whose candidate index at
    /// node `i` is `choice[i].1`, written into `out`.
    ///
    /// The chain is birth–death, so `φ = T_π φ` is the tridiagonal system
    ///
    /// ```text
    /// (p⁺ + p⁻ + βΔt) φ_i − p⁺ φ_{i+1} − p⁻ φ_{i−1} = Δt
    /// ```
    ///
    /// which is strictly diagonally dominant, so the Thomas sweep is stable.
    /// The diagonal is formed from `p⁺ + p⁻` rather than `1 − p_stay` to avoid
    /// cancellation on lazy nodes.
    fn evaluate_choice(&self, choice: &[(f64, usize)], out: &mut [f64]) {
        let n = self.grid.len();
        let m = n - 2;
        let mut upper = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        // forward elimination
        let mut prev_upper = 0.0;
        let mut prev_rhs = 0.0;
        for k in 0..m {
            let i = k + 1;
            let c = &self.candidates[choice[i].1];
            let dt = self.dt[i];
            let diag = c.p_plus + c.p_minus + self.params.beta * dt;
            let lower = if k == 0 { 0.0 } else { -c.p_minus };
            let up = if k + 1 == m { 0.0 } else { -c.p_plus };
            let denom = diag - lower * prev_upper;
            prev_upper = up / denom;
            prev_rhs = (dt - lower * prev_rhs) / denom;
            upper[k] = prev_upper;
            rhs[k] = prev_rhs;
        }
        out[0] = 0.0;
        out[n - 1] = 0.0;
        let mut after = 0.0;
        for k in (0..m).rev() {
            let v = rhs[k] - upper[k] * after;
            out[k + 1] = v;
            after = v;
        }
    }
}

/// Largest absolute componentwise difference, reduced in index order.
pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

/// One application of ξ; convenience over [`BellmanOperator`].
pub fn bellman_apply(
    phi: &ValueFunction,
    grid: &Grid,
    params: &ModelParams,
    controls: &ControlSet,
) -> Result<(ValueFunction, Policy)> {
    let op = BellmanOperator::new(grid, params, controls)?;
    Ok(op.apply(phi, Execution::default()))
}

pub fn value_iterate(
    grid: &Grid,
    params: &ModelParams,
    controls: &ControlSet,
    settings: &SolverSettings,
) -> Result<(ValueFunction, Policy, SolveReport)> {
    BellmanOperator::new(grid, params, controls)?.iterate(settings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    PureRotation,
    FixedMeasurement,
    Dynamic,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [
        BaselineKind::Dynamic,
        BaselineKind::FixedMeasurement,
        BaselineKind::PureRotation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::PureRotation => "pure_rotation",
            BaselineKind::FixedMeasurement => "fixed_measurement",
            BaselineKind::Dynamic => "dynamic",
        }
    }

    /// Restricts the full control set `base` to this strategy.
    pub fn control_set(self, params: &ModelParams, base: &ControlSet) -> ControlSet {
        match self {
            BaselineKind::PureRotation => ControlSet::pure_rotation(params),
            BaselineKind::FixedMeasurement => ControlSet::fixed_measurement(params, base),
            BaselineKind::Dynamic => base.clone(),
        }
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pure_rotation" | "rotation" => Ok(BaselineKind::PureRotation),
            "fixed_measurement" | "fixed" => Ok(BaselineKind::FixedMeasurement),
            "dynamic" => Ok(BaselineKind::Dynamic),
            other => Err(Error::Config {
                key: "policy".into(),
                reason: format!("unknown strategy `{other}`"),
            }),
        }
    }
}

/// Solves under the control set of one comparison strategy.
pub fn evaluate_baseline(
    kind: BaselineKind,
    grid: &Grid,
    params: &ModelParams,
    base: &ControlSet,
    settings: &SolverSettings,
) -> Result<(ValueFunction, Policy, SolveReport)> {
    value_iterate(grid, params, &kind.control_set(params, base), settings)
}

/// Discounted cost of full-speed rotation straight to the nearer endpoint:
/// `(1 − e^{−βd/Ω})/β` with `d` the distance to that endpoint.
pub fn rotation_cost_closed_form(theta0: f64, lo: f64, hi: f64, params: &ModelParams) -> f64 {
    let d = (theta0 - lo).min(hi - theta0).max(0.0);
    -(-params.beta * d / params.omega).exp_m1() / params.beta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFeature {
    pub theta: f64,
    /// −1, 0 or +1.
    pub alpha_sign: i8,
    /// `|α*|/Ω`.
    pub alpha_frac: f64,
    /// `γ*/Γ` (0 when Γ = 0).
    pub gamma_frac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFeatures {
    pub nodes: Vec<NodeFeature>,
    /// Maximal runs of interior nodes with `γ* = 0`, as `[first θ, last θ]`.
    pub gamma_off: Vec<(f64, f64)>,
    /// Maximal runs of interior nodes with `γ* = Γ`.
    pub gamma_full: Vec<(f64, f64)>,
}

pub fn extract_policy_features(
    policy: &Policy,
    grid: &Grid,
    params: &ModelParams,
) -> PolicyFeatures {
    let nodes: Vec<NodeFeature> = grid
        .interior()
        .map(|i| {
            let a = policy.at_node(i);
            NodeFeature {
                theta: grid.node(i),
                alpha_sign: if a.alpha > 0.0 {
                    1
                } else if a.alpha < 0.0 {
                    -1
                } else {
                    0
                },
                alpha_frac: a.alpha.abs() / params.omega,
                gamma_frac: if params.gamma_max > 0.0 {
                    a.gamma / params.gamma_max
                } else {
                    0.0
                },
            }
        })
        .collect();
    let gamma_off = runs(&nodes, |f| f.gamma_frac == 0.0);
    let gamma_full = if params.gamma_max > 0.0 {
        runs(&nodes, |f| f.gamma_frac == 1.0)
    } else {
        Vec::new()
    };
    PolicyFeatures {
        nodes,
        gamma_off,
        gamma_full,
    }
}

fn runs(nodes: &[NodeFeature], pred: impl Fn(&NodeFeature) -> bool) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start: Option<f64> = None;
    let mut last = 0.0;
    for f in nodes {
        if pred(f) {
            start.get_or_insert(f.theta);
            last = f.theta;
        } else if let Some(s) = start.take() {
            out.push((s, last));
        }
    }
    if let Some(s) = start {
        out.push((s, last));
    }
    out
}

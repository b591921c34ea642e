//! Spatial grid and the locally consistent birth–death chain that stands in
//! for the controlled diffusion.
//!
//! At an interior node `x` with control `η` the chain moves to `x ± h` or
//! stays, and each transition is charged an interpolation interval `Δt`:
//!
//! ```text
//! D       = σ*²(x) + h·B*(x)
//! p(x+h)  = (σ²/2 + h·b⁺) / D
//! p(x−h)  = (σ²/2 + h·b⁻) / D
//! p(x)    = ((σ*² − σ²) + h·B* − h·|b|) / D
//! Δt      = h² / D
//! ```
//!
//! `σ*²` and `B*` are control-uniform envelopes of `σ²` and `|b|`, which keeps
//! every probability nonnegative and makes `Δt` independent of the action.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, ControlAction, ModelParams};

/// Rounding tolerance when checking that `(hi − lo)/h` is integral.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// Uniform mesh on `[lo, hi]` whose two endpoints are absorbing targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    lo: f64,
    hi: f64,
    h: f64,
    nodes: Vec<f64>,
}

impl Grid {
    /// Builds `n` equally spaced nodes with `x_0 = lo` and `x_{n−1} = hi`.
    ///
    /// Nodes in the upper half are measured back from `hi`, so a domain that is
    /// symmetric about zero yields nodes that are exact negatives of each other.
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "endpoints must be finite (lo={lo}, hi={hi})"
            )));
        }
        if hi <= lo {
            return Err(Error::InvalidGrid(format!(
                "need hi > lo (lo={lo}, hi={hi})"
            )));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes (one interior), got {n}"
            )));
        }
        let last = n - 1;
        let h = (hi - lo) / last as f64;
        let nodes = (0..n)
            .map(|i| {
                if 2 * i <= last {
                    lo + i as f64 * h
                } else {
                    hi - (last - i) as f64 * h
                }
            })
            .collect();
        Ok(Self { lo, hi, h, nodes })
    }

    /// Builds a grid from a step size; `(hi − lo)/h` must be an integer.
    pub fn with_step(lo: f64, hi: f64, h: f64) -> Result<Self> {
        if !h.is_finite() || h <= 0.0 {
            return Err(Error::InvalidGrid(format!("step must be > 0, got {h}")));
        }
        let cells = (hi - lo) / h;
        let rounded = cells.round();
        if (cells - rounded).abs() > GRID_TOLERANCE * rounded.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "(hi - lo)/h = {cells} is not an integer"
            )));
        }
        Self::new(lo, hi, rounded as usize + 1)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn is_target(&self, i: usize) -> bool {
        i == 0 || i + 1 == self.nodes.len()
    }

    pub fn interior(&self) -> std::ops::Range<usize> {
        1..self.nodes.len() - 1
    }

    /// Index of the node closest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let r = ((x - self.lo) / self.h).round();
        if r <= 0.0 {
            0
        } else {
            (r as usize).min(self.nodes.len() - 1)
        }
    }

    /// Piecewise-linear interpolation of nodal `values` at `x`.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let s = ((x - self.lo) / self.h).clamp(0.0, (self.len() - 1) as f64);
        let i = (s.floor() as usize).min(self.len() - 2);
        let w = s - i as f64;
        values[i] * (1.0 - w) + values[i + 1] * w
    }
}

/// Convenience wrapper matching `build_grid(lo, hi, n)`.
pub fn build_grid(lo: f64, hi: f64, n: usize) -> Result<Grid> {
    Grid::new(lo, hi, n)
}

/// `B*(x) = Ω + 2Γ|sin 2x|`, an upper bound on `|b(x, η)|` over all controls.
#[inline]
pub fn b_star(x: f64, params: &ModelParams) -> f64 {
    params.omega + 2.0 * params.gamma_max * (2.0 * x).sin().abs()
}

/// `σ*²(x) = 8Γ sin²x`, the supremum of `σ²(x, γ)` over `γ ∈ [0, Γ]`.
#[inline]
pub fn sigma_star_sq(x: f64, params: &ModelParams) -> f64 {
    let s = x.sin();
    8.0 * params.gamma_max * s * s
}

/// One-step law of the chain at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTransitions {
    pub p_plus: f64,
    pub p_minus: f64,
    pub p_stay: f64,
    pub dt: f64,
}

/// Transition law of the chain at `x` under `action`.
///
/// The action is assumed admissible; only a vanishing denominator is
/// reported, which `Ω > 0` rules out.
pub fn local_transitions(
    x: f64,
    action: ControlAction,
    params: &ModelParams,
    h: f64,
) -> Result<LocalTransitions> {
    let sig_star = sigma_star_sq(x, params);
    let bound = b_star(x, params);
    let denom = sig_star + h * bound;
    if denom.is_nan() || denom <= 0.0 {
        return Err(Error::DegenerateNode { x });
    }
    let b = model::drift(x, action);
    let sig = model::diffusion_sq(x, action);
    let half = 0.5 * sig;
    let p_plus = (half + h * b.max(0.0)) / denom;
    let p_minus = (half + h * (-b).max(0.0)) / denom;
    // Clamp guards the last-ulp case where |b| exceeds B* by rounding.
    let p_stay = (((sig_star - sig) + h * bound - h * b.abs()) / denom).max(0.0);
    Ok(LocalTransitions {
        p_plus,
        p_minus,
        p_stay,
        dt: h * h / denom,
    })
}

/// Interpolation interval `Δt^h(x) = h²/(σ*² + hB*)`; it does not depend on η.
#[inline]
pub fn interval(x: f64, params: &ModelParams, h: f64) -> f64 {
    h * h / (sigma_star_sq(x, params) + h * b_star(x, params))
}

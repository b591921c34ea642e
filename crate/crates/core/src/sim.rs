//! Euler–Maruyama Monte Carlo of the controlled angle SDE under a feedback
//! law, used to cross-check the dynamic-programming cost.
//!
//! Each path draws its Gaussian increments from its own ChaCha8 stream,
//! keyed by `(seed, path_index)`. Paths never share generator state, so the
//! estimate does not depend on how paths are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::chain::Grid;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{self, ControlAction, ModelParams};
use crate::solver::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub t_max: f64,
    pub execution: Execution,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            n_paths: 10_000,
            seed: 42,
            t_max: 100.0,
            execution: Execution::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(Error::InvalidParam {
                field: "dt",
                reason: format!("must be finite and > 0, got {}", self.dt),
            });
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidParam {
                field: "n_paths",
                reason: "must be >= 1".into(),
            });
        }
        if !self.t_max.is_finite() || self.t_max < self.dt {
            return Err(Error::InvalidParam {
                field: "t_max",
                reason: format!("must be finite and >= dt, got {}", self.t_max),
            });
        }
        Ok(())
    }

    fn max_steps(&self) -> u64 {
        (self.t_max / self.dt).ceil() as u64
    }
}

/// State feedback `θ ↦ η`.
pub trait FeedbackLaw: Sync {
    fn action(&self, theta: f64) -> ControlAction;
}

impl<F> FeedbackLaw for F
where
    F: Fn(f64) -> ControlAction + Sync,
{
    fn action(&self, theta: f64) -> ControlAction {
        self(theta)
    }
}

/// A solved policy read off at the nearest grid node.
#[derive(Debug, Clone, Copy)]
pub struct GridPolicy<'a> {
    pub grid: &'a Grid,
    pub policy: &'a Policy,
}

impl FeedbackLaw for GridPolicy<'_> {
    fn action(&self, theta: f64) -> ControlAction {
        self.policy.lookup(self.grid, theta)
    }
}

/// Absorbing endpoints of the simulated interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub lo: f64,
    pub hi: f64,
}

impl Targets {
    pub fn of(grid: &Grid) -> Self {
        Self {
            lo: grid.lo(),
            hi: grid.hi(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub hit: bool,
    /// Hitting time when `hit`, otherwise the truncation horizon.
    pub tau: f64,
    pub discounted_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_truncated: usize,
    pub n_paths: usize,
}

impl McEstimate {
    pub fn truncated_fraction(&self) -> f64 {
        self.n_truncated as f64 / self.n_paths as f64
    }
}

/// One Euler–Maruyama step `θ + b·dt + σ·dW`.
#[inline]
pub fn step(theta: f64, action: ControlAction, dt: f64, dw: f64) -> f64 {
    theta + model::drift(theta, action) * dt + model::diffusion(theta, action) * dw
}

/// `∫₀^t e^{−βs} ds`.
#[inline]
pub fn discounted_time(t: f64, beta: f64) -> f64 {
    -(-beta * t).exp_m1() / beta
}

/// Simulates one path until it leaves `(lo, hi)` or the horizon runs out.
///
/// A crossing inside a step is located by linear interpolation of `θ`
/// across that step.
pub fn run_path(
    theta0: f64,
    law: &impl FeedbackLaw,
    targets: Targets,
    params: &ModelParams,
    config: &SimConfig,
    path_index: u64,
) -> PathResult {
    let beta = params.beta;
    let hit_at = |tau: f64| PathResult {
        hit: true,
        tau,
        discounted_cost: discounted_time(tau, beta),
    };
    if theta0 <= targets.lo || theta0 >= targets.hi {
        return hit_at(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(path_index);
    let sqrt_dt = config.dt.sqrt();
    let mut theta = theta0;
    for k in 0..config.max_steps() {
        let z: f64 = StandardNormal.sample(&mut rng);
        let next = step(theta, law.action(theta), config.dt, sqrt_dt * z);
        let boundary = if next <= targets.lo {
            Some(targets.lo)
        } else if next >= targets.hi {
            Some(targets.hi)
        } else {
            None
        };
        if let Some(edge) = boundary {
            let frac = ((edge - theta) / (next - theta)).clamp(0.0, 1.0);
            let tau = (k as f64 + frac) * config.dt;
            if tau <= config.t_max {
                return hit_at(tau);
            }
            break;
        }
        theta = next;
    }
    PathResult {
        hit: false,
        tau: config.t_max,
        discounted_cost: discounted_time(config.t_max, beta),
    }
}

/// Mean discounted cost over `n_paths` independent paths from `theta0`.
pub fn estimate_cost(
    theta0: f64,
    law: &impl FeedbackLaw,
    targets: Targets,
    params: &ModelParams,
    config: &SimConfig,
) -> Result<McEstimate> {
    config.validate()?;
    params.validate()?;
    let paths = config.execution.map(config.n_paths, |i| {
        run_path(theta0, law, targets, params, config, i as u64)
    });
    Ok(aggregate(&paths))
}

/// Statistics in path-index order.
///
/// Moments are taken about the first sample, so identical samples give a
/// mean equal to that sample and a standard error of exactly zero.
pub fn aggregate(paths: &[PathResult]) -> McEstimate {
    let n = paths.len();
    assert!(n > 0, "no paths to aggregate");
    let shift = paths[0].discounted_cost;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut n_truncated = 0;
    for p in paths {
        let d = p.discounted_cost - shift;
        sum += d;
        sum_sq += d * d;
        if !p.hit {
            n_truncated += 1;
        }
    }
    let nf = n as f64;
    let mean_shift = sum / nf;
    let std_error = if n > 1 {
        let var = ((sum_sq - sum * mean_shift) / (nf - 1.0)).max(0.0);
        (var / nf).sqrt()
    } else {
        0.0
    };
    McEstimate {
        mean: shift + mean_shift,
        std_error,
        n_truncated,
        n_paths: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    const EIGEN: Targets = Targets { lo: -PI, hi: PI };

    #[test]
    fn step_examples() {
        assert_eq!(step(0.0, ControlAction::new(5.0, 0.0), 0.01, 123.0), 0.05);
        let s = step(FRAC_PI_2, ControlAction::new(0.0, 1.0), 0.01, 0.1);
        assert!((s - (FRAC_PI_2 + 2.0 * 2f64.sqrt() * 0.1)).abs() < 1e-12);
        assert!((s - 1.853639).abs() < 1e-6);
        let s = step(PI, ControlAction::new(3.0, 0.8), 0.01, 0.7);
        assert!((s - (PI + 0.03)).abs() < 1e-14);
    }

    #[test]
    fn deterministic_rotation_path() {
        let p = ModelParams::default();
        let cfg = SimConfig::default();
        let law = |_: f64| ControlAction::new(5.0, 0.0);
        let r = run_path(0.0, &law, EIGEN, &p, &cfg, 0);
        assert!(r.hit);
        assert!((r.tau - PI / 5.0).abs() <= cfg.dt);
        let exact = (1.0 - (-0.02 * PI).exp()) / 0.1;
        assert!((r.discounted_cost - exact).abs() <= cfg.dt);
        for (seed, idx) in [(1, 5), (99, 1234)] {
            let other = SimConfig { seed, ..cfg };
            assert_eq!(run_path(0.0, &law, EIGEN, &p, &other, idx), r);
        }
    }

    #[test]
    fn start_next_to_target() {
        let p = ModelParams::default();
        let cfg = SimConfig::default();
        let law = |_: f64| ControlAction::new(5.0, 1.0);
        let r = run_path(PI - 1e-4, &law, EIGEN, &p, &cfg, 3);
        assert!(r.hit);
        assert!(r.tau <= 5.0 * cfg.dt, "tau = {}", r.tau);
    }

    #[test]
    fn frozen_state_truncates() {
        let p = ModelParams::default();
        let cfg = SimConfig {
            t_max: 1.0,
            dt: 1e-3,
            ..Default::default()
        };
        let law = |_: f64| ControlAction::new(0.0, 0.0);
        let r = run_path(0.0, &law, EIGEN, &p, &cfg, 0);
        assert!(!r.hit);
        assert_eq!(r.tau, 1.0);
        assert!((r.discounted_cost - (1.0 - (-0.1f64).exp()) / 0.1).abs() < 1e-15);
        assert!((r.discounted_cost - 0.951626).abs() < 1e-6);
    }

    #[test]
    fn start_on_target() {
        let p = ModelParams::default();
        let law = |_: f64| ControlAction::new(0.0, 0.0);
        let r = run_path(PI, &law, EIGEN, &p, &SimConfig::default(), 0);
        assert!(r.hit);
        assert_eq!(r.discounted_cost, 0.0);
    }

    #[test]
    fn zero_variance_estimate() {
        let p = ModelParams::default();
        let cfg = SimConfig {
            n_paths: 100,
            ..Default::default()
        };
        let law = |_: f64| ControlAction::new(5.0, 0.0);
        let est = estimate_cost(0.0, &law, EIGEN, &p, &cfg).unwrap();
        let single = run_path(0.0, &law, EIGEN, &p, &cfg, 0);
        assert_eq!(est.std_error, 0.0);
        assert_eq!(est.mean, single.discounted_cost);
        assert_eq!(est.n_truncated, 0);
    }

    #[test]
    fn truncation_bias_bound() {
        // a truncated path under-counts by at most e^{-β t_max}/β
        let bound = (-0.1f64 * 100.0).exp() / 0.1;
        assert!((bound - 4.54e-4).abs() < 1e-6);
        assert!(1.0 / 0.1 - discounted_time(100.0, 0.1) <= bound * (1.0 + 1e-9));
    }

    #[test]
    fn reproducible_across_workers() {
        let p = ModelParams::default();
        let law = |x: f64| {
            if x > 0.0 {
                ControlAction::new(5.0, 1.0)
            } else {
                ControlAction::new(-5.0, 1.0)
            }
        };
        let base = SimConfig {
            n_paths: 200,
            dt: 1e-3,
            ..Default::default()
        };
        let seq = SimConfig {
            execution: Execution::Sequential,
            ..base
        };
        let a = estimate_cost(0.7, &law, EIGEN, &p, &base).unwrap();
        let b = estimate_cost(0.7, &law, EIGEN, &p, &seq).unwrap();
        assert_eq!(a, b);
        assert!(a.std_error > 0.0);
        let c = estimate_cost(0.7, &law, EIGEN, &p, &SimConfig { seed: 7, ..base }).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        assert!(SimConfig {
            dt: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            n_paths: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            t_max: 1e-5,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn aggregate_statistics() {
        let mk = |c: f64| PathResult {
            hit: true,
            tau: 0.0,
            discounted_cost: c,
        };
        let est = aggregate(&[mk(1.0), mk(2.0), mk(3.0), mk(4.0)]);
        assert!((est.mean - 2.5).abs() < 1e-15);
        // sample sd = sqrt(5/3), se = sd / 2
        assert!((est.std_error - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn costs_bounded_and_monotone(theta0 in -3.0f64..3.0, alpha in -5.0f64..5.0,
                                          gamma in 0.0f64..1.0, idx in 0u64..1000) {
                let p = ModelParams::default();
                let cfg = SimConfig { dt: 1e-3, t_max: 5.0, ..Default::default() };
                let law = move |_: f64| ControlAction::new(alpha, gamma);
                let r = run_path(theta0, &law, EIGEN, &p, &cfg, idx);
                prop_assert!(r.discounted_cost >= 0.0 && r.discounted_cost <= 1.0 / p.beta);
                prop_assert!(r.tau <= cfg.t_max);
                prop_assert_eq!(r.discounted_cost, discounted_time(r.tau, p.beta));
            }

            #[test]
            fn measurement_free_paths_ignore_seed(theta0 in -3.0f64..3.0, alpha in -5.0f64..5.0,
                                                  seed in 0u64..1000) {
                let p = ModelParams::default();
                let cfg = SimConfig { dt: 1e-3, t_max: 5.0, ..Default::default() };
                let law = move |_: f64| ControlAction::new(alpha, 0.0);
                let a = run_path(theta0, &law, EIGEN, &p, &cfg, 0);
                let b = run_path(theta0, &law, EIGEN, &p, &SimConfig { seed, ..cfg }, seed);
                prop_assert_eq!(a, b);
            }
        }
    }
}

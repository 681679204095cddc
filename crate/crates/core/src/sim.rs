//! Explicit time integration of the membrane under the boundary-integral
//! velocity, with adaptive step control and a diagnostics timeline.

use crate::bie::{QuadratureScheme, VelocityEvaluator};
use crate::error::CoreError;
use crate::membrane::{self, DiagnosticsRecord, MembraneState, SphereGrid};
use crate::tension::TensionLaw;
use crate::Result;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Initial membrane shape.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialShape {
    Sphere {
        radius: f64,
    },
    /// `X = radius (1 + sum amplitude Y_lm) x` (real harmonics).
    PerturbedSphere {
        radius: f64,
        perturbations: Vec<Perturbation>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub l: usize,
    pub m: usize,
    pub amplitude: f64,
}

/// Step-size control.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Stepping {
    Fixed { dt: f64 },
    Adaptive { cfl: f64 },
}

/// Validated simulation configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub initial: InitialShape,
    pub law: TensionLaw,
    /// Spherical-harmonic band limit of the grid.
    pub degree: usize,
    pub scheme: QuadratureScheme,
    pub stepping: Stepping,
    pub t_end: f64,
    /// Snapshot cadence in steps (0 = initial and final only).
    pub snapshot_every: usize,
}

impl SimConfig {
    /// Collect every constraint violation (empty = valid).
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.t_end > 0.0) {
            v.push(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.degree < 4 {
            v.push(format!("degree must be at least 4, got {}", self.degree));
        }
        if let Stepping::Adaptive { cfl } = self.stepping {
            if !(cfl > 0.0 && cfl <= 1.0) {
                v.push(format!("cfl_coefficient must lie in (0, 1], got {cfl}"));
            }
        }
        if let Stepping::Fixed { dt } = self.stepping {
            if !(dt > 0.0) {
                v.push(format!("dt must be positive, got {dt}"));
            }
        }
        if let QuadratureScheme::PolarRotated { resolution } = self.scheme {
            if resolution == 0 {
                v.push("rotated resolution must be positive".into());
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CoreError::InvalidConfig {
                detail: v.join("; "),
            })
        }
    }

    pub fn build_initial_state(&self) -> MembraneState {
        let grid = SphereGrid::new(self.degree);
        match &self.initial {
            InitialShape::Sphere { radius } => MembraneState::sphere(grid, *radius),
            InitialShape::PerturbedSphere {
                radius,
                perturbations,
            } => {
                let p: Vec<(usize, usize, f64)> = perturbations
                    .iter()
                    .map(|p| (p.l, p.m, p.amplitude))
                    .collect();
                MembraneState::perturbed_sphere(grid, *radius, &p)
            }
        }
    }
}

fn add_scaled(state: &MembraneState, v: &[Vector3<f64>], factor: f64, time: f64) -> MembraneState {
    let n = state.grid.n_nodes();
    let values = [
        (0..n)
            .map(|i| state.values[0][i] + factor * v[i].x)
            .collect(),
        (0..n)
            .map(|i| state.values[1][i] + factor * v[i].y)
            .collect(),
        (0..n)
            .map(|i| state.values[2][i] + factor * v[i].z)
            .collect(),
    ];
    MembraneState::from_values(state.grid.clone(), values, time)
}

fn rk4_combine(
    state: &MembraneState,
    k: &[Vec<Vector3<f64>>; 4],
    dt: f64,
) -> MembraneState {
    let n = state.grid.n_nodes();
    let mut values = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    for i in 0..n {
        let incr = (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]) * (dt / 6.0);
        values[0].push(state.values[0][i] + incr.x);
        values[1].push(state.values[1][i] + incr.y);
        values[2].push(state.values[2][i] + incr.z);
    }
    MembraneState::from_values(state.grid.clone(), values, state.time + dt)
}

/// One classical four-stage explicit Runge-Kutta step of all node values
/// with the boundary-integral velocity; each stage state is re-projected
/// onto the band limit (stage-wise dealiasing).
pub fn step(
    state: &MembraneState,
    law: &TensionLaw,
    dt: f64,
    evaluator: &VelocityEvaluator,
) -> Result<MembraneState> {
    assert!(dt >= 0.0);
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let k1 = evaluator.velocity_field(state, law)?;
    let s2 = add_scaled(state, &k1, 0.5 * dt, state.time + 0.5 * dt);
    let k2 = evaluator.velocity_field(&s2, law)?;
    let s3 = add_scaled(state, &k2, 0.5 * dt, state.time + 0.5 * dt);
    let k3 = evaluator.velocity_field(&s3, law)?;
    let s4 = add_scaled(state, &k3, dt, state.time + dt);
    let k4 = evaluator.velocity_field(&s4, law)?;
    Ok(rk4_combine(state, &[k1, k2, k3, k4], dt))
}

/// Forward Euler step (first order), used as an order-of-accuracy reference.
pub fn euler_step(
    state: &MembraneState,
    law: &TensionLaw,
    dt: f64,
    evaluator: &VelocityEvaluator,
) -> Result<MembraneState> {
    let k1 = evaluator.velocity_field(state, law)?;
    Ok(add_scaled(state, &k1, dt, state.time + dt))
}

/// Stability-oriented step size
/// `dt = cfl h_min / (max_speed + c_stiff)` with `h_min` the minimal
/// inter-node image distance and `c_stiff = z_M^(0) (L+1) / arc_chord_min`
/// estimating the fastest linear mode (`z_M^(0)` taken over the stretch
/// range realized by the state).
pub fn adaptive_dt(state: &MembraneState, law: &TensionLaw, cfl: f64, max_speed: f64) -> f64 {
    let n = state.grid.n_nodes();
    let mut h_min = f64::INFINITY;
    for i in 0..n {
        let xi = state.position(i);
        for j in (i + 1)..n {
            let d = (state.position(j) - xi).norm();
            if d > 1e-14 && d < h_min {
                h_min = d;
            }
        }
    }
    let lambda = membrane::stretch_factor(state);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for &l in &lambda {
        lo = lo.min(l);
        hi = hi.max(l);
    }
    let z_max = law.z_max_symbol_range(lo.max(law.lambda_lo), hi.min(law.lambda_hi));
    let arc = membrane::arc_chord(state).max(1e-12);
    let c_stiff = z_max * (state.grid.l_max + 1) as f64 / arc;
    cfl * h_min / (max_speed + c_stiff)
}

/// Run termination status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    HaltedDegenerate,
    HaltedStretch,
}

/// Output of a completed (or halted) run.
pub struct RunResult {
    pub status: RunStatus,
    /// (step index, state) pairs on the snapshot schedule plus initial and
    /// final states.
    pub snapshots: Vec<(usize, MembraneState)>,
    /// One record per step boundary (step count + 1 records).
    pub diagnostics: Vec<DiagnosticsRecord>,
    /// Steps where the energy increased beyond the per-step tolerance,
    /// with the relative increase.
    pub energy_violations: Vec<(usize, f64)>,
    /// Reason string for halted runs.
    pub halt_reason: Option<String>,
}

/// Relative per-step energy increase tolerated before the run self-check
/// reports a violation.
pub const ENERGY_TOLERANCE: f64 = 1e-6;

/// Integrate to `t_end` (or until degeneration), emitting diagnostics every
/// step and snapshots on the configured cadence.
pub fn run(config: &SimConfig) -> Result<RunResult> {
    config.validate()?;
    let mut state = config.build_initial_state();
    let evaluator = VelocityEvaluator::new(state.grid.clone(), config.scheme);
    let arc0 = membrane::arc_chord(&state);
    let mut snapshots = vec![(0usize, state.clone())];
    let mut diagnostics = Vec::new();
    let mut energy_violations = Vec::new();
    let mut step_idx = 0usize;
    let mut status = RunStatus::Completed;
    let mut halt_reason = None;
    let mut prev_energy: Option<f64> = None;
    loop {
        // velocity for diagnostics and adaptive stepping
        let vel = match evaluator.velocity_field(&state, &config.law) {
            Ok(v) => v,
            Err(CoreError::DegenerateState { arc_chord, .. }) => {
                status = RunStatus::HaltedDegenerate;
                halt_reason = Some(format!("arc-chord collapsed to {arc_chord:e}"));
                break;
            }
            Err(CoreError::StretchOutOfRange { lambda, lo, hi }) => {
                status = RunStatus::HaltedStretch;
                halt_reason = Some(format!("stretch {lambda} left [{lo}, {hi}]"));
                break;
            }
            Err(e) => return Err(e),
        };
        let max_speed = vel.iter().map(|v| v.norm()).fold(0.0_f64, f64::max);
        let record = match membrane::diagnostics(&state, &config.law, max_speed) {
            Ok(r) => r,
            Err(CoreError::StretchOutOfRange { lambda, lo, hi }) => {
                status = RunStatus::HaltedStretch;
                halt_reason = Some(format!("stretch {lambda} left [{lo}, {hi}]"));
                break;
            }
            Err(e) => return Err(e),
        };
        if record.arc_chord_min < 1e-6 * arc0 {
            diagnostics.push(record);
            status = RunStatus::HaltedDegenerate;
            halt_reason = Some("arc-chord fell below 1e-6 of its initial value".into());
            break;
        }
        if let Some(prev) = prev_energy {
            let rel = (record.energy - prev) / prev.abs().max(1e-300);
            if rel > ENERGY_TOLERANCE {
                energy_violations.push((step_idx, rel));
            }
        }
        prev_energy = Some(record.energy);
        diagnostics.push(record);
        if state.time >= config.t_end - 1e-14 {
            break;
        }
        let mut dt = match config.stepping {
            Stepping::Fixed { dt } => dt,
            Stepping::Adaptive { cfl } => adaptive_dt(&state, &config.law, cfl, max_speed),
        };
        dt = dt.min(config.t_end - state.time);
        state = match step(&state, &config.law, dt, &evaluator) {
            Ok(s) => s,
            Err(CoreError::DegenerateState { arc_chord, .. }) => {
                status = RunStatus::HaltedDegenerate;
                halt_reason = Some(format!("arc-chord collapsed to {arc_chord:e} mid-step"));
                break;
            }
            Err(CoreError::StretchOutOfRange { lambda, lo, hi }) => {
                status = RunStatus::HaltedStretch;
                halt_reason = Some(format!("stretch {lambda} left [{lo}, {hi}] mid-step"));
                break;
            }
            Err(e) => return Err(e),
        };
        step_idx += 1;
        if config.snapshot_every > 0 && step_idx % config.snapshot_every == 0 {
            snapshots.push((step_idx, state.clone()));
        }
    }
    if snapshots.last().map(|(s, _)| *s) != Some(step_idx) {
        snapshots.push((step_idx, state.clone()));
    }
    Ok(RunResult {
        status,
        snapshots,
        diagnostics,
        energy_violations,
        halt_reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tension::LawKind;

    fn quick_config(degree: usize, t_end: f64) -> SimConfig {
        SimConfig {
            initial: InitialShape::PerturbedSphere {
                radius: 1.0,
                perturbations: vec![Perturbation {
                    l: 2,
                    m: 0,
                    amplitude: 0.05,
                }],
            },
            law: TensionLaw::hookean(1.0),
            degree,
            scheme: QuadratureScheme::PolarRotated {
                resolution: degree + 3,
            },
            stepping: Stepping::Fixed { dt: 2e-3 },
            t_end,
            snapshot_every: 2,
        }
    }

    #[test]
    fn config_validation() {
        let mut c = quick_config(8, 0.01);
        assert!(c.validate().is_ok());
        c.t_end = -1.0;
        assert!(!c.violations().is_empty());
        c.t_end = 0.1;
        c.degree = 2;
        assert!(!c.violations().is_empty());
        c.degree = 8;
        c.stepping = Stepping::Adaptive { cfl: 1.5 };
        assert!(!c.violations().is_empty());
    }

    #[test]
    fn zero_dt_is_identity() {
        let grid = SphereGrid::new(8);
        let state = MembraneState::sphere(grid.clone(), 1.0);
        let law = TensionLaw::hookean(1.0);
        let ev = VelocityEvaluator::new(grid, QuadratureScheme::PolarRotated { resolution: 11 });
        let next = step(&state, &law, 0.0, &ev).unwrap();
        assert_eq!(next.values[0], state.values[0]);
    }

    #[test]
    fn equilibrium_sphere_barely_moves() {
        let grid = SphereGrid::new(12);
        let state = MembraneState::sphere(grid.clone(), 1.0);
        let law = TensionLaw::hookean(1.0);
        let ev = VelocityEvaluator::new(
            grid.clone(),
            QuadratureScheme::PolarRotated { resolution: 16 },
        );
        let dt = 1e-3;
        let next = step(&state, &law, dt, &ev).unwrap();
        let mut max_move: f64 = 0.0;
        for k in 0..3 {
            for (a, b) in next.values[k].iter().zip(&state.values[k]) {
                max_move = max_move.max((a - b).abs());
            }
        }
        assert!(max_move <= 1e-3 * dt, "moved {max_move:e} in dt {dt:e}");
    }

    #[test]
    fn euler_vs_rk4_second_order_difference() {
        let grid = SphereGrid::new(8);
        let state = MembraneState::perturbed_sphere(grid.clone(), 1.0, &[(2, 0, 0.05)]);
        let law = TensionLaw::hookean(1.0);
        let ev = VelocityEvaluator::new(
            grid.clone(),
            QuadratureScheme::PolarRotated { resolution: 11 },
        );
        let mut logs = Vec::new();
        for k in 0..4 {
            let dt = 0.02 / 2f64.powi(k);
            let a = step(&state, &law, dt, &ev).unwrap();
            let b = euler_step(&state, &law, dt, &ev).unwrap();
            let mut diff: f64 = 0.0;
            for c in 0..3 {
                for (x, y) in a.values[c].iter().zip(&b.values[c]) {
                    diff = diff.max((x - y).abs());
                }
            }
            logs.push((dt.ln(), diff.ln()));
        }
        let n = logs.len() as f64;
        let sx: f64 = logs.iter().map(|p| p.0).sum();
        let sy: f64 = logs.iter().map(|p| p.1).sum();
        let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(
            (slope - 2.0).abs() < 0.3,
            "Euler/RK4 difference slope {slope}"
        );
    }

    #[test]
    fn adaptive_dt_behaviour() {
        let law = TensionLaw::hookean(1.0);
        let grid8 = SphereGrid::new(8);
        let state8 = MembraneState::sphere(grid8, 1.0);
        let dt8 = adaptive_dt(&state8, &law, 0.9, 0.0);
        assert!(dt8.is_finite() && dt8 > 0.0);
        // doubling the degree roughly halves dt (order-1 operator)
        let grid16 = SphereGrid::new(16);
        let state16 = MembraneState::sphere(grid16, 1.0);
        let dt16 = adaptive_dt(&state16, &law, 0.9, 0.0);
        let ratio = dt8 / dt16;
        assert!(
            ratio > 2.0 && ratio < 8.0,
            "dt ratio {ratio} out of the order-1 window"
        );
        // stiffer law reduces dt
        let stiff = TensionLaw::new(
            LawKind::Hookean { k0: 2.0 },
            1e-3,
            1e3,
            false,
        )
        .unwrap();
        let dt_stiff = adaptive_dt(&state8, &stiff, 0.9, 0.0);
        let grid8b = SphereGrid::new(8);
        let state8b = MembraneState::sphere(grid8b, 1.0);
        let dt_soft = adaptive_dt(&state8b, &law, 0.9, 0.0);
        assert!(dt_stiff < dt_soft);
    }

    #[test]
    fn short_run_conserves_volume_and_dissipates() {
        let config = quick_config(8, 0.02);
        let result = run(&config).unwrap();
        assert_eq!(result.status, RunStatus::Completed);
        assert!(result.energy_violations.is_empty());
        let v0 = result.diagnostics[0].volume;
        for d in &result.diagnostics {
            assert!((d.volume - v0).abs() / v0 < 1e-3);
        }
        let e_first = result.diagnostics.first().unwrap().energy;
        let e_last = result.diagnostics.last().unwrap().energy;
        assert!(e_last <= e_first + 1e-9);
        // diagnostics rows = steps + 1
        let steps = result.snapshots.last().unwrap().0;
        assert_eq!(result.diagnostics.len(), steps + 1);
    }

    #[test]
    fn collapsing_experimental_law_halts() {
        // negative-k0 law (experimental) blows stretch out of a narrow range
        let law = TensionLaw::new(
            LawKind::Affine {
                k0: -2.0,
                lambda0: 0.0,
                c: 4.0,
            },
            1.30,
            1.55,
            true,
        )
        .unwrap();
        let config = SimConfig {
            initial: InitialShape::PerturbedSphere {
                radius: 1.0,
                perturbations: vec![Perturbation {
                    l: 2,
                    m: 0,
                    amplitude: 0.04,
                }],
            },
            law,
            degree: 8,
            scheme: QuadratureScheme::PolarRotated { resolution: 10 },
            stepping: Stepping::Fixed { dt: 5e-3 },
            t_end: 5.0,
            snapshot_every: 0,
        };
        let result = run(&config).unwrap();
        assert!(
            matches!(
                result.status,
                RunStatus::HaltedStretch | RunStatus::HaltedDegenerate
            ),
            "status {:?}",
            result.status
        );
        assert!(result.halt_reason.is_some());
    }
}

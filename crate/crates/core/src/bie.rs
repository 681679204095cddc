//! Quadrature of the boundary-integral velocity: single-layer evaluation of
//! the elastic force, the weak-form (grad G) evaluator, and scalar
//! single-layer operators used for eigenvalue validation.
//!
//! The primary scheme rotates the quadrature grid so the target sits at the
//! pole: in rotated colatitude s the measure sin(s) cancels the
//! `1/|x - y| ~ 1/(2 sin(s/2))` singularity and the integrand stays bounded.
//! Fields are evaluated at the rotated nodes by spherical-harmonic synthesis
//! (coefficient rotation followed by a tensor-product synthesis, which is
//! the same sum reordered).

use crate::error::CoreError;
use crate::harmonics::{packed_idx, packed_len, plm_table, CoeffSet, WignerTable};
use crate::kernels;
use crate::membrane::{elastic_force_density, MembraneState, SphereGrid};
use crate::tension::{LawKind, TensionLaw};
use crate::Result;
use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;

/// Arc-chord threshold below which velocity evaluation refuses to run.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

/// Quadrature scheme for the layer-potential evaluation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuadratureScheme {
    /// Polar-rotated singular quadrature; `resolution` is the number of
    /// rotated colatitude nodes (>= source grid colatitude count).
    PolarRotated { resolution: usize },
    /// Source-grid sum that skips the node nearest the target. First-order;
    /// used for cross-checks and smoke runs only.
    Punctured,
}

impl QuadratureScheme {
    /// Default rotated scheme for a grid: a few nodes above the source
    /// colatitude count.
    pub fn default_for(grid: &SphereGrid) -> Self {
        QuadratureScheme::PolarRotated {
            resolution: grid.n_colat + 4,
        }
    }
}

/// Precomputed tables for the polar-rotated quadrature on a fixed grid.
pub struct RotatedQuadrature {
    pub grid: Arc<SphereGrid>,
    pub n_s: usize,
    pub n_psi: usize,
    /// Rotated colatitude nodes in (0, pi), Gauss-Legendre in s.
    s_nodes: Vec<f64>,
    /// Quadrature weight including sin(s) and the longitude step.
    node_weight: Vec<f64>,
    /// (pi/2) w_i dpsi cos(s_i/2): ring weight for the 1/|x-y| kernel.
    single_layer_weight: Vec<f64>,
    /// Legendre tables at the rotated colatitudes.
    plm_s: Vec<Vec<f64>>,
    /// cos(m psi_j) / sin(m psi_j), laid out m * n_psi + j.
    cos_m_psi: Vec<f64>,
    sin_m_psi: Vec<f64>,
    /// Wigner tables per source colatitude ring.
    wigner: Vec<WignerTable>,
}

impl RotatedQuadrature {
    pub fn new(grid: Arc<SphereGrid>, n_s: usize) -> Self {
        let l_max = grid.l_max;
        let n_psi = 2 * n_s;
        let (x, w) = crate::harmonics::gauss_legendre(n_s);
        let half_pi = std::f64::consts::FRAC_PI_2;
        let s_nodes: Vec<f64> = x.iter().map(|t| half_pi * (t + 1.0)).collect();
        let dpsi = std::f64::consts::TAU / n_psi as f64;
        let node_weight: Vec<f64> = w
            .iter()
            .zip(&s_nodes)
            .map(|(wi, s)| half_pi * wi * s.sin() * dpsi)
            .collect();
        let single_layer_weight: Vec<f64> = w
            .iter()
            .zip(&s_nodes)
            .map(|(wi, s)| half_pi * wi * (0.5 * s).cos() * dpsi)
            .collect();
        let mut plm_s = Vec::with_capacity(n_s);
        for s in &s_nodes {
            let mut t = vec![0.0; packed_len(l_max)];
            plm_table(l_max, s.cos(), &mut t);
            plm_s.push(t);
        }
        let mut cos_m_psi = vec![0.0; (l_max + 1) * n_psi];
        let mut sin_m_psi = vec![0.0; (l_max + 1) * n_psi];
        for m in 0..=l_max {
            for j in 0..n_psi {
                let a = m as f64 * dpsi * j as f64;
                cos_m_psi[m * n_psi + j] = a.cos();
                sin_m_psi[m * n_psi + j] = a.sin();
            }
        }
        let wigner: Vec<WignerTable> = grid
            .cos_colat
            .iter()
            .map(|&u| WignerTable::new(l_max, u.acos()))
            .collect();
        RotatedQuadrature {
            grid,
            n_s,
            n_psi,
            s_nodes,
            node_weight,
            single_layer_weight,
            plm_s,
            cos_m_psi,
            sin_m_psi,
            wigner,
        }
    }

    /// Synthesize several fields at all rotated nodes of a target with
    /// colatitude table `wig` and longitude `alpha`; `out[f]` has layout
    /// `s * n_psi + j`.
    fn synth_rotated(
        &self,
        coeffs: &[&CoeffSet],
        wig: &WignerTable,
        alpha: f64,
        out: &mut [Vec<f64>],
    ) {
        let l_max = self.grid.l_max;
        // phases e^{+i m alpha}
        let mut phase = vec![Complex64::new(1.0, 0.0); 2 * l_max + 1];
        for m in -(l_max as i64)..=(l_max as i64) {
            phase[(m + l_max as i64) as usize] = Complex64::from_polar(1.0, m as f64 * alpha);
        }
        let mut rotated = CoeffSet::zeros(l_max);
        let mut tmp = vec![Complex64::new(0.0, 0.0); 2 * l_max + 1];
        let mut h = vec![Complex64::new(0.0, 0.0); l_max + 1];
        for (f, c) in coeffs.iter().enumerate() {
            // rotate coefficients into the target-centered frame
            for l in 0..=l_max {
                for m in -(l as i64)..=(l as i64) {
                    tmp[(m + l as i64) as usize] =
                        c.get_signed(l, m) * phase[(m + l_max as i64) as usize];
                }
                for mp in 0..=l {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (mi, t) in tmp.iter().enumerate().take(2 * l + 1) {
                        acc += t * wig.d(l, mi as i64 - l as i64, mp);
                    }
                    rotated.set(l, mp, acc);
                }
            }
            // tensor-product synthesis on the (s, psi) grid
            let buf = &mut out[f];
            buf.iter_mut().for_each(|v| *v = 0.0);
            for (si, table) in self.plm_s.iter().enumerate() {
                for m in 0..=l_max {
                    let mut hr = 0.0;
                    let mut hi = 0.0;
                    for l in m..=l_max {
                        let idx = packed_idx(l_max, l, m);
                        let a = rotated.data[idx];
                        hr += a.re * table[idx];
                        hi += a.im * table[idx];
                    }
                    h[m] = Complex64::new(hr, hi);
                }
                let row = &mut buf[si * self.n_psi..(si + 1) * self.n_psi];
                for v in row.iter_mut() {
                    *v = h[0].re;
                }
                for m in 1..=l_max {
                    let cm = &self.cos_m_psi[m * self.n_psi..(m + 1) * self.n_psi];
                    let sm = &self.sin_m_psi[m * self.n_psi..(m + 1) * self.n_psi];
                    let (hr, hi) = (h[m].re, h[m].im);
                    for j in 0..self.n_psi {
                        row[j] += 2.0 * (hr * cm[j] - hi * sm[j]);
                    }
                }
            }
        }
    }

    /// Single-layer of a scalar density at grid node `target`:
    /// `(1/4pi) int density(y) / |x - y| dS(y)`.
    ///
    /// In rotated coordinates the integrand becomes `density cos(s/2)`.
    pub fn single_layer_scalar(&self, density: &CoeffSet, target: usize) -> f64 {
        let ring = target / self.grid.n_lon;
        let alpha = self.grid.lon[target % self.grid.n_lon];
        let mut vals = vec![vec![0.0; self.n_s * self.n_psi]];
        self.synth_rotated(&[density], &self.wigner[ring], alpha, &mut vals);
        let mut acc = 0.0;
        for si in 0..self.n_s {
            let mut ring_sum = 0.0;
            for j in 0..self.n_psi {
                ring_sum += vals[0][si * self.n_psi + j];
            }
            acc += 0.5 * self.single_layer_weight[si] * ring_sum;
        }
        acc / (4.0 * std::f64::consts::PI) * 2.0
    }

    /// Single-layer of a scalar density at every grid node.
    pub fn single_layer_scalar_field(&self, density: &CoeffSet) -> Vec<f64> {
        (0..self.grid.n_nodes())
            .into_par_iter()
            .map(|t| self.single_layer_scalar(density, t))
            .collect()
    }

    /// `(1/8pi) int lap_{S^2} f(y) / |x - y| dS(y)` at every grid node.
    pub fn s00_apply(&self, field: &[f64]) -> Vec<f64> {
        let lap = self.grid.analyze(field).laplace_beltrami();
        self.single_layer_scalar_field(&lap)
            .iter()
            .map(|v| 0.5 * v)
            .collect()
    }
}

/// Velocity evaluator owning the scheme tables for a fixed grid.
pub struct VelocityEvaluator {
    pub grid: Arc<SphereGrid>,
    pub scheme: QuadratureScheme,
    rotated: Option<RotatedQuadrature>,
}

impl VelocityEvaluator {
    pub fn new(grid: Arc<SphereGrid>, scheme: QuadratureScheme) -> Self {
        let rotated = match scheme {
            QuadratureScheme::PolarRotated { resolution } => {
                let n_s = resolution.max(grid.n_colat);
                Some(RotatedQuadrature::new(grid.clone(), n_s))
            }
            QuadratureScheme::Punctured => None,
        };
        VelocityEvaluator {
            grid,
            scheme,
            rotated,
        }
    }

    pub fn rotated(&self) -> Option<&RotatedQuadrature> {
        self.rotated.as_ref()
    }

    fn check_state(&self, state: &MembraneState) -> Result<f64> {
        let ac = crate::membrane::arc_chord(state);
        if ac < DEGENERACY_THRESHOLD {
            return Err(CoreError::DegenerateState {
                arc_chord: ac,
                threshold: DEGENERACY_THRESHOLD,
            });
        }
        Ok(ac)
    }

    /// Single-layer velocity at one grid node from force coefficients.
    fn velocity_at_node_inner(
        &self,
        state: &MembraneState,
        force_coeffs: &[CoeffSet; 3],
        target: usize,
    ) -> Vector3<f64> {
        match &self.rotated {
            Some(rq) => {
                let ring = target / self.grid.n_lon;
                let alpha = self.grid.lon[target % self.grid.n_lon];
                let x_t = state.position(target);
                let coeffs = [
                    &state.coeffs[0],
                    &state.coeffs[1],
                    &state.coeffs[2],
                    &force_coeffs[0],
                    &force_coeffs[1],
                    &force_coeffs[2],
                ];
                let mut vals = vec![vec![0.0; rq.n_s * rq.n_psi]; 6];
                rq.synth_rotated(&coeffs, &rq.wigner[ring], alpha, &mut vals);
                accumulate_velocity(rq, &vals, x_t)
            }
            None => {
                let force = [
                    self.grid.synthesize(&force_coeffs[0]),
                    self.grid.synthesize(&force_coeffs[1]),
                    self.grid.synthesize(&force_coeffs[2]),
                ];
                let x_t = state.position(target);
                let mut u = Vector3::zeros();
                for n in 0..self.grid.n_nodes() {
                    if n == target {
                        continue;
                    }
                    let y = state.position(n);
                    let f = Vector3::new(force[0][n], force[1][n], force[2][n]);
                    let d = x_t - y;
                    let r = d.norm();
                    let df = d.dot(&f);
                    u += self.grid.weights[n]
                        * kernels::INV_8PI
                        * (f / r + d * (df / (r * r * r)));
                }
                u
            }
        }
    }

    /// Velocity at an arbitrary unit target point from nodal force values.
    pub fn velocity_at(
        &self,
        state: &MembraneState,
        force: &[Vector3<f64>],
        target: Vector3<f64>,
    ) -> Result<Vector3<f64>> {
        self.check_state(state)?;
        let fc = force_coeffs_from_values(&self.grid, force);
        let ct = target.z.clamp(-1.0, 1.0);
        let phi = target.y.atan2(target.x);
        let x_t = Vector3::new(
            state.coeffs[0].eval(ct, phi),
            state.coeffs[1].eval(ct, phi),
            state.coeffs[2].eval(ct, phi),
        );
        match &self.rotated {
            Some(rq) => {
                let wig = WignerTable::new(self.grid.l_max, ct.acos());
                let coeffs = [
                    &state.coeffs[0],
                    &state.coeffs[1],
                    &state.coeffs[2],
                    &fc[0],
                    &fc[1],
                    &fc[2],
                ];
                let mut vals = vec![vec![0.0; rq.n_s * rq.n_psi]; 6];
                rq.synth_rotated(&coeffs, &wig, phi, &mut vals);
                Ok(accumulate_velocity(rq, &vals, x_t))
            }
            None => {
                // puncture the node nearest the target
                let mut skip = 0;
                let mut best = f64::INFINITY;
                for (n, p) in self.grid.nodes.iter().enumerate() {
                    let d = (p - target).norm();
                    if d < best {
                        best = d;
                        skip = n;
                    }
                }
                let mut u = Vector3::zeros();
                for n in 0..self.grid.n_nodes() {
                    if n == skip {
                        continue;
                    }
                    let y = state.position(n);
                    let f = force[n];
                    let d = x_t - y;
                    let r = d.norm();
                    let df = d.dot(&f);
                    u += self.grid.weights[n]
                        * kernels::INV_8PI
                        * (f / r + d * (df / (r * r * r)));
                }
                Ok(u)
            }
        }
    }

    /// Full velocity field: elastic force density composed with the
    /// single-layer evaluation at every grid node. Cost is O(N^2 L^2) per
    /// call for the rotated scheme at matched resolutions.
    pub fn velocity_field(
        &self,
        state: &MembraneState,
        law: &TensionLaw,
    ) -> Result<Vec<Vector3<f64>>> {
        self.check_state(state)?;
        let force = elastic_force_density(state, law)?;
        let mut fc = force_coeffs_from_values(&self.grid, &force);
        if !matches!(law.kind, LawKind::Hookean { .. }) {
            // 2/3 dealiasing of the nonlinear force
            let keep = 2 * self.grid.l_max / 3;
            for c in fc.iter_mut() {
                c.truncate(keep);
            }
        }
        self.velocity_field_from_coeffs(state, &fc)
    }

    /// Velocity from explicit force coefficients (used by the time stepper
    /// and by tests that control the force directly).
    pub fn velocity_field_from_coeffs(
        &self,
        state: &MembraneState,
        force_coeffs: &[CoeffSet; 3],
    ) -> Result<Vec<Vector3<f64>>> {
        self.check_state(state)?;
        Ok((0..self.grid.n_nodes())
            .into_par_iter()
            .map(|t| self.velocity_at_node_inner(state, force_coeffs, t))
            .collect())
    }
}

#[inline]
fn accumulate_velocity(rq: &RotatedQuadrature, vals: &[Vec<f64>], x_t: Vector3<f64>) -> Vector3<f64> {
    let mut u = Vector3::zeros();
    for si in 0..rq.n_s {
        let w = rq.node_weight[si];
        let mut us = Vector3::zeros();
        for j in 0..rq.n_psi {
            let k = si * rq.n_psi + j;
            let y = Vector3::new(vals[0][k], vals[1][k], vals[2][k]);
            let f = Vector3::new(vals[3][k], vals[4][k], vals[5][k]);
            let d = x_t - y;
            let r = d.norm();
            if r < 1e-14 {
                continue;
            }
            let df = d.dot(&f);
            us += f / r + d * (df / (r * r * r));
        }
        u += w * kernels::INV_8PI * us;
    }
    u
}

pub(crate) fn force_coeffs_from_values(
    grid: &SphereGrid,
    force: &[Vector3<f64>],
) -> [CoeffSet; 3] {
    let n = grid.n_nodes();
    let mut comp = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (i, f) in force.iter().enumerate() {
        comp[0][i] = f.x;
        comp[1][i] = f.y;
        comp[2][i] = f.z;
    }
    [
        grid.analyze(&comp[0]),
        grid.analyze(&comp[1]),
        grid.analyze(&comp[2]),
    ]
}

/// Weak-form velocity at grid node `target`:
/// `-int grad_{S^2,y} G . (T grad X(y) - T grad X(x_t)) dS(y)` by punctured
/// quadrature, the subtraction constant frozen at the target.
/// First-order accurate; an independent cross-check of the rotated scheme.
///
/// On a closed surface the subtracted constant is not free: the surface
/// gradient of a scalar g integrates to `2 int g y dS` on the unit sphere
/// (mean curvature 1), so the compensation term
/// `-2 sum_l C_l . int G_{kl}(X(x_t)-X(y)) y dS(y)` is added back. The
/// compensation kernel is only 1/r singular and the punctured sum handles it.
pub fn velocity_weak_form(
    state: &MembraneState,
    law: &TensionLaw,
    target: usize,
) -> Result<Vector3<f64>> {
    let grid = &state.grid;
    let ac = crate::membrane::arc_chord(state);
    if ac < DEGENERACY_THRESHOLD {
        return Err(CoreError::DegenerateState {
            arc_chord: ac,
            threshold: DEGENERACY_THRESHOLD,
        });
    }
    let grads = crate::membrane::surface_gradient(state);
    let lambda: Vec<f64> = grads.iter().map(|g| g.norm()).collect();
    for &l in &lambda {
        law.require_in_range(l)?;
    }
    let tv: Vec<f64> = lambda.iter().map(|&l| law.t_over_lambda(l)).collect();
    let x_t = state.position(target);
    let z_t = grads[target] * tv[target];
    let mut u = Vector3::zeros();
    let mut curv = [[Vector3::zeros(); 3]; 3];
    for n in 0..grid.n_nodes() {
        if n == target {
            continue;
        }
        let d = x_t - state.position(n);
        let r = d.norm();
        if r < 1e-14 {
            continue;
        }
        let dg = kernels::stokeslet_grad(&d)?;
        let g = kernels::stokeslet(&d)?;
        let z_n = grads[n] * tv[n];
        let y = grid.nodes[n];
        // q_{kl} = grad_{S^2,y} G_{kl} = -dG_{kl}/dx_i grad_{S^2} X_i(y)
        for k in 0..3 {
            let mut acc = 0.0;
            for l in 0..3 {
                let zl = z_n.row(l) - z_t.row(l);
                for i in 0..3 {
                    acc -= dg[i][(k, l)] * grads[n].row(i).dot(&zl);
                }
                curv[k][l] += grid.weights[n] * g[(k, l)] * y;
            }
            u[k] -= grid.weights[n] * acc;
        }
    }
    for k in 0..3 {
        for l in 0..3 {
            u[k] -= 2.0 * curv[k][l].dot(&z_t.row(l).transpose());
        }
    }
    Ok(u)
}

//! Closed-form Stokeslet kernels, their splits and derivatives, the
//! frozen-coefficient kernels, the remainder kernels and the divergence
//! theorem check for the principal value.
//!
//! Chart-coordinate kernels act on maps `R^2 -> R^3`; the membrane layer
//! supplies concrete maps, tests use analytic ones.

use crate::error::CoreError;
use crate::Result;
use nalgebra::{Matrix3, Matrix3x2, Vector2, Vector3};

pub(crate) const INV_8PI: f64 = 1.0 / (8.0 * std::f64::consts::PI);

/// Free-space Stokeslet `G(x) = (1/8pi)(I/|x| + x ox x / |x|^3)`.
pub fn stokeslet(x: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let (g1, g2) = stokeslet_parts(x)?;
    Ok(g1 + g2)
}

/// The two Stokeslet parts `G^1 = (1/8pi) I/|x|`, `G^2 = (1/8pi) x ox x/|x|^3`.
pub fn stokeslet_parts(x: &Vector3<f64>) -> Result<(Matrix3<f64>, Matrix3<f64>)> {
    let r = x.norm();
    if r < 1e-300 {
        return Err(CoreError::OriginSingular { norm: r });
    }
    let g1 = Matrix3::identity() * (INV_8PI / r);
    let g2 = (x * x.transpose()) * (INV_8PI / (r * r * r));
    Ok((g1, g2))
}

/// Gradient split: `out.0[i]` is the 3x3 matrix `d G^1_{kl} / d x_i`,
/// `out.1[i]` likewise for `G^2`.
pub fn stokeslet_grad_parts(x: &Vector3<f64>) -> Result<([Matrix3<f64>; 3], [Matrix3<f64>; 3])> {
    let r = x.norm();
    if r < 1e-300 {
        return Err(CoreError::OriginSingular { norm: r });
    }
    let r3 = r * r * r;
    let r5 = r3 * r * r;
    let mut g1 = [Matrix3::zeros(); 3];
    let mut g2 = [Matrix3::zeros(); 3];
    for i in 0..3 {
        for k in 0..3 {
            for l in 0..3 {
                if k == l {
                    g1[i][(k, l)] = -INV_8PI * x[i] / r3;
                }
                let mut v = 0.0;
                if k == i {
                    v += x[l];
                }
                if l == i {
                    v += x[k];
                }
                g2[i][(k, l)] = INV_8PI * v / r3 - 3.0 * INV_8PI * x[k] * x[l] * x[i] / r5;
            }
        }
    }
    Ok((g1, g2))
}

/// Full gradient `d G_{kl} / d x_i`.
pub fn stokeslet_grad(x: &Vector3<f64>) -> Result<[Matrix3<f64>; 3]> {
    let (g1, g2) = stokeslet_grad_parts(x)?;
    Ok([g1[0] + g2[0], g1[1] + g2[1], g1[2] + g2[2]])
}

/// A chart-coordinate parameterization of (a piece of) the membrane.
pub trait ChartMap {
    fn eval(&self, theta: Vector2<f64>) -> Vector3<f64>;
    /// Columns are `dX/d eta_1`, `dX/d eta_2`.
    fn grad(&self, theta: Vector2<f64>) -> Matrix3x2<f64>;
}

/// Affine test map `X = A theta + b`.
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub a: Matrix3x2<f64>,
    pub b: Vector3<f64>,
}

impl ChartMap for AffineMap {
    fn eval(&self, theta: Vector2<f64>) -> Vector3<f64> {
        self.a * theta + self.b
    }
    fn grad(&self, _theta: Vector2<f64>) -> Matrix3x2<f64> {
        self.a
    }
}

/// Kernel pair indexed by the chart-derivative direction i = 1, 2; entry
/// `[i]` is a 3x3 matrix over (k, l).
pub type ChartKernel = [Matrix3<f64>; 2];

/// Split chart kernels `q^j_{i,k,l} = d/d eta_i G^j_{kl}(X(theta) - X(eta))`.
pub fn q_kernel_parts(
    map: &dyn ChartMap,
    theta: Vector2<f64>,
    eta: Vector2<f64>,
) -> Result<(ChartKernel, ChartKernel)> {
    let diff = map.eval(theta) - map.eval(eta);
    let r = diff.norm();
    if r < 1e-14 * (map.eval(theta).norm() + map.eval(eta).norm()).max(1.0) {
        return Err(CoreError::DegenerateDirection { norm: r });
    }
    let (dg1, dg2) = stokeslet_grad_parts(&diff)?;
    let dx = map.grad(eta);
    let mut q1 = [Matrix3::zeros(); 2];
    let mut q2 = [Matrix3::zeros(); 2];
    for i in 0..2 {
        for m in 0..3 {
            // d/d eta_i of (X(theta) - X(eta))_m is -dX_m/d eta_i
            q1[i] -= dg1[m] * dx[(m, i)];
            q2[i] -= dg2[m] * dx[(m, i)];
        }
    }
    Ok((q1, q2))
}

/// Full chart kernel `q = q^1 + q^2`.
pub fn q_kernel(
    map: &dyn ChartMap,
    theta: Vector2<f64>,
    eta: Vector2<f64>,
) -> Result<ChartKernel> {
    let (q1, q2) = q_kernel_parts(map, theta, eta)?;
    Ok([q1[0] + q2[0], q1[1] + q2[1]])
}

/// Frozen-coefficient kernels
/// `m_{i,k,l} = -d_{x_j} G_{kl}(A (theta - eta)) dX_j/d eta_i`.
///
/// `a` is the frozen matrix, `dx` the chart derivative at eta (columns i).
pub fn frozen_kernel_m(
    a: &Matrix3x2<f64>,
    dx: &Matrix3x2<f64>,
    theta: Vector2<f64>,
    eta: Vector2<f64>,
) -> Result<(ChartKernel, ChartKernel)> {
    let arg = a * (theta - eta);
    let r = arg.norm();
    if r < 1e-14 * (theta - eta).norm().max(1e-300) {
        return Err(CoreError::DegenerateDirection { norm: r });
    }
    let (dg1, dg2) = stokeslet_grad_parts(&arg)?;
    let mut m1 = [Matrix3::zeros(); 2];
    let mut m2 = [Matrix3::zeros(); 2];
    for i in 0..2 {
        for j in 0..3 {
            m1[i] -= dg1[j] * dx[(j, i)];
            m2[i] -= dg2[j] * dx[(j, i)];
        }
    }
    Ok((m1, m2))
}

/// Normalized finite-difference remainder
/// `E^eta X(theta) = unit(theta-eta) . grad X(eta) - (X(theta)-X(eta))/|theta-eta|`.
pub fn finite_diff_remainder(
    map: &dyn ChartMap,
    theta: Vector2<f64>,
    eta: Vector2<f64>,
) -> Result<Vector3<f64>> {
    let sep = theta - eta;
    let r = sep.norm();
    if r == 0.0 {
        return Err(CoreError::CoincidentPoints);
    }
    let unit = sep / r;
    let slope = map.grad(eta) * unit;
    Ok(slope - (map.eval(theta) - map.eval(eta)) / r)
}

/// Remainder kernels `K = -q + m` with the frozen matrix `A = grad X(eta)`;
/// returns the pair-split `(K^1, K^2)`.
pub fn remainder_kernel(
    map: &dyn ChartMap,
    theta: Vector2<f64>,
    eta: Vector2<f64>,
) -> Result<(ChartKernel, ChartKernel)> {
    let (q1, q2) = q_kernel_parts(map, theta, eta)?;
    let dx = map.grad(eta);
    let (m1, m2) = frozen_kernel_m(&dx, &dx, theta, eta)?;
    Ok((
        [m1[0] - q1[0], m1[1] - q1[1]],
        [m2[0] - q2[0], m2[1] - q2[1]],
    ))
}

/// Factored difference of inverse odd powers,
/// `1/|u|^k - 1/|v|^k` for odd k, written so the leading cancellation
/// `(v - u) . (u + v)` is explicit.
pub fn odd_power_difference(u: &Vector3<f64>, v: &Vector3<f64>, k: u32) -> f64 {
    debug_assert!(k % 2 == 1);
    let nu = u.norm();
    let nv = v.norm();
    let nuk = nu.powi(k as i32);
    let nvk = nv.powi(k as i32);
    let lead = (v - u).dot(&(u + v)) / (nuk + nvk);
    let mut series = 0.0;
    for i in 1..=k {
        series += nu.powi(2 * (i as i32 - 1)) * nv.powi(2 * (k as i32 - i as i32));
    }
    lead * series / (nuk * nvk)
}

/// Remainder kernels assembled from the expanded cancellation formulas
/// (test path; must agree with [`remainder_kernel`] to roundoff).
pub fn remainder_kernel_expanded(
    map: &dyn ChartMap,
    theta: Vector2<f64>,
    eta: Vector2<f64>,
) -> Result<(ChartKernel, ChartKernel)> {
    let sep = theta - eta;
    let r = sep.norm();
    if r == 0.0 {
        return Err(CoreError::CoincidentPoints);
    }
    let r2 = r * r;
    let dx = map.grad(eta);
    // u = normalized chord, v = frozen direction along the unit separation
    let u = (map.eval(theta) - map.eval(eta)) / r;
    let v = dx * (sep / r);
    let nu = u.norm();
    let nv = v.norm();
    if nu < 1e-14 || nv < 1e-14 {
        return Err(CoreError::DegenerateDirection { norm: nu.min(nv) });
    }
    let e = v - u; // E^eta X(theta)
    let inv_u3 = 1.0 / (nu * nu * nu);
    let inv_u5 = inv_u3 / (nu * nu);
    let d3 = odd_power_difference(&u, &v, 3); // 1/|u|^3 - 1/|v|^3
    let d5 = odd_power_difference(&u, &v, 5);
    let mut k1 = [Matrix3::zeros(); 2];
    let mut k21 = [Matrix3::zeros(); 2];
    let mut k22 = [Matrix3::zeros(); 2];
    for i in 0..2 {
        let dxi = Vector3::new(dx[(0, i)], dx[(1, i)], dx[(2, i)]);
        // K^1: delta_{kl} (dX_i . (E/|u|^3 - v d3)) / (8 pi r^2)
        let scal = dxi.dot(&(e * inv_u3 - v * d3));
        k1[i] = Matrix3::identity() * (INV_8PI / r2 * scal);
        for k in 0..3 {
            for l in 0..3 {
                // K^{2,1}
                let t21 = -dxi[k] * e[l] * inv_u3 + dxi[k] * v[l] * d3 - dxi[l] * e[k] * inv_u3
                    + dxi[l] * v[k] * d3;
                k21[i][(k, l)] = INV_8PI / r2 * t21;
                // K^{2,2}
                let dv = dxi.dot(&v);
                let t22 = u[k] * u[l] * inv_u5 * dxi.dot(&e)
                    + dv * inv_u5 * u[k] * e[l]
                    + dv * inv_u5 * e[k] * v[l]
                    - dv * v[l] * v[k] * d5;
                k22[i][(k, l)] = 3.0 * INV_8PI / r2 * t22;
            }
        }
    }
    Ok((k1, [k21[0] + k22[0], k21[1] + k22[1]]))
}

/// Result of the annulus divergence-theorem check. All entries are kernel
/// integrals indexed by the chart direction i.
#[derive(Debug, Clone)]
pub struct PvReport {
    /// `int_{eps < |eta| < l_out} d/d eta_i G(A eta) d eta`
    pub annulus: ChartKernel,
    /// `oint_{|eta| = eps} G(A eta) n_i dl`
    pub inner: ChartKernel,
    /// `oint_{|eta| = l_out} G(A eta) n_i dl`
    pub outer: ChartKernel,
}

impl PvReport {
    /// Residual of `annulus = outer - inner`.
    pub fn divergence_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for i in 0..2 {
            r = r.max((self.annulus[i] - (self.outer[i] - self.inner[i])).norm());
        }
        r
    }

    /// Magnitude of the annulus integral itself (the truncated p.v.).
    pub fn combined_pv_magnitude(&self) -> f64 {
        self.annulus[0].norm().max(self.annulus[1].norm())
    }
}

/// Numerically integrate `grad_eta G(A eta)` over the annulus
/// `eps < |eta| < l_out` (log-radial Gauss-Legendre x uniform angle) and the
/// two circle boundary terms.
pub fn pv_annulus_check(
    a: &Matrix3x2<f64>,
    eps: f64,
    l_out: f64,
    n_rad: usize,
    n_ang: usize,
) -> Result<PvReport> {
    assert!(eps > 0.0 && l_out > eps);
    let (s_nodes, s_weights) = crate::harmonics::gauss_legendre(n_rad);
    let (ln_a, ln_b) = (eps.ln(), l_out.ln());
    let dang = std::f64::consts::TAU / n_ang as f64;
    let mut annulus = [Matrix3::zeros(); 2];
    for (sn, sw) in s_nodes.iter().zip(&s_weights) {
        let s = 0.5 * (ln_a + ln_b) + 0.5 * (ln_b - ln_a) * sn;
        let r = s.exp();
        let jac = 0.5 * (ln_b - ln_a) * sw * r * r; // ds substitution in r dr
        for j in 0..n_ang {
            let ang = dang * j as f64;
            let eta = Vector2::new(r * ang.cos(), r * ang.sin());
            let arg = a * eta;
            let dg = stokeslet_grad(&arg)?;
            for i in 0..2 {
                // d/d eta_i G(A eta) = sum_m dG/dx_m A_{m,i}
                let mut gi = Matrix3::zeros();
                for m in 0..3 {
                    gi += dg[m] * a[(m, i)];
                }
                annulus[i] += gi * (jac * dang);
            }
        }
    }
    let circle = |radius: f64| -> Result<ChartKernel> {
        let mut out = [Matrix3::zeros(); 2];
        for j in 0..n_ang {
            let ang = dang * j as f64;
            let n = Vector2::new(ang.cos(), ang.sin());
            let eta = radius * n;
            let g = stokeslet(&(a * eta))?;
            for i in 0..2 {
                out[i] += g * (n[i] * radius * dang);
            }
        }
        Ok(out)
    };
    let inner = circle(eps)?;
    let outer = circle(l_out)?;
    Ok(PvReport {
        annulus,
        inner,
        outer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;

    /// Smooth polynomial test map with analytic gradient.
    pub(crate) struct PolyMap;
    impl ChartMap for PolyMap {
        fn eval(&self, t: Vector2<f64>) -> Vector3<f64> {
            Vector3::new(
                t.x + 0.2 * t.x * t.x - 0.1 * t.y * t.y,
                t.y + 0.15 * t.x * t.y,
                0.3 * t.x - 0.25 * t.y + 0.1 * t.x * t.y,
            )
        }
        fn grad(&self, t: Vector2<f64>) -> Matrix3x2<f64> {
            Matrix3x2::new(
                1.0 + 0.4 * t.x,
                -0.2 * t.y,
                0.15 * t.y,
                1.0 + 0.15 * t.x,
                0.3 + 0.1 * t.y,
                -0.25 + 0.1 * t.x,
            )
        }
    }

    fn rand_vec3(rng: &mut impl Rng, scale: f64) -> Vector3<f64> {
        Vector3::new(
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
        )
    }

    #[test]
    fn stokeslet_values_and_symmetry() {
        let g = stokeslet(&Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let expect = Matrix3::from_diagonal(&Vector3::new(2.0, 1.0, 1.0)) * INV_8PI;
        assert!((g - expect).norm() < 1e-15);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = rand_vec3(&mut rng, 2.0);
            if x.norm() < 0.1 {
                continue;
            }
            let g = stokeslet(&x).unwrap();
            assert!((g - g.transpose()).norm() < 1e-15);
            // homogeneity of degree -1
            let c = rng.random_range(0.5..3.0);
            let gc = stokeslet(&(c * x)).unwrap();
            assert!((gc - g / c).norm() < 1e-13);
            // positive semidefinite off the origin
            let eig = nalgebra::SymmetricEigen::new(g);
            assert!(eig.eigenvalues.min() > -1e-15);
        }
    }

    #[test]
    fn stokeslet_frame_covariance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x = rand_vec3(&mut rng, 2.0);
            if x.norm() < 0.1 {
                continue;
            }
            let rot = nalgebra::Rotation3::from_euler_angles(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let r = rot.matrix();
            let lhs = stokeslet(&(r * x)).unwrap();
            let rhs = r * stokeslet(&x).unwrap() * r.transpose();
            assert!((lhs - rhs).norm() < 1e-13);
        }
    }

    #[test]
    fn stokeslet_parts_identities() {
        let x = Vector3::new(0.0, 1.0, 0.0);
        let (g1, g2) = stokeslet_parts(&x).unwrap();
        assert!((g1 - Matrix3::identity() * INV_8PI).norm() < 1e-16);
        let mut e22 = Matrix3::zeros();
        e22[(1, 1)] = INV_8PI;
        assert!((g2 - e22).norm() < 1e-16);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = rand_vec3(&mut rng, 3.0);
            if x.norm() < 0.1 {
                continue;
            }
            let (g1, g2) = stokeslet_parts(&x).unwrap();
            let g = stokeslet(&x).unwrap();
            assert!((g1 + g2 - g).norm() == 0.0);
            assert_relative_eq!(g2.trace(), INV_8PI / x.norm(), epsilon = 1e-14);
        }
        assert!(matches!(
            stokeslet(&Vector3::zeros()),
            Err(CoreError::OriginSingular { .. })
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x0 = Vector3::new(1.0, 0.0, 0.0);
        let (dg1, _) = stokeslet_grad_parts(&x0).unwrap();
        assert_relative_eq!(dg1[0][(0, 0)], -INV_8PI, epsilon = 1e-15);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let h = 1e-6;
        for _ in 0..20 {
            let x = rand_vec3(&mut rng, 2.0);
            if x.norm() < 0.3 {
                continue;
            }
            let dg = stokeslet_grad(&x).unwrap();
            for i in 0..3 {
                let mut dxp = x;
                let mut dxm = x;
                dxp[i] += h;
                dxm[i] -= h;
                let fd = (stokeslet(&dxp).unwrap() - stokeslet(&dxm).unwrap()) / (2.0 * h);
                assert!(
                    (dg[i] - fd).norm() < 1e-8 * dg[i].norm().max(1.0),
                    "direction {i}"
                );
            }
            // odd symmetry and degree -2 homogeneity
            let dgm = stokeslet_grad(&(-x)).unwrap();
            let dg2 = stokeslet_grad(&(2.0 * x)).unwrap();
            for i in 0..3 {
                assert!((dgm[i] + dg[i]).norm() < 1e-14);
                assert!((dg2[i] - dg[i] / 4.0).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn frozen_kernel_identity_embedding() {
        // A = identity embed, dX = A columns, theta - eta = (1, 0):
        // m^1_1 = (1/8pi) I, m^1_2 = 0
        let a = Matrix3x2::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        let (m1, _m2) =
            frozen_kernel_m(&a, &a, Vector2::new(1.0, 0.0), Vector2::new(0.0, 0.0)).unwrap();
        assert!((m1[0] - Matrix3::identity() * INV_8PI).norm() < 1e-15);
        assert!(m1[1].norm() < 1e-16);
    }

    #[test]
    fn frozen_kernel_homogeneity_and_definition() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let map = PolyMap;
        for _ in 0..30 {
            let eta = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let d = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if d.norm() < 0.1 {
                continue;
            }
            let theta = eta + d;
            let dx = map.grad(eta);
            let (m1, m2) = frozen_kernel_m(&dx, &dx, theta, eta).unwrap();
            // degree -2 homogeneity in the separation
            let c = 1.7;
            let (m1c, m2c) = frozen_kernel_m(&dx, &dx, eta + c * d, eta).unwrap();
            for i in 0..2 {
                assert!((m1c[i] - m1[i] / (c * c)).norm() < 1e-12 * m1[i].norm().max(1.0));
                assert!((m2c[i] - m2[i] / (c * c)).norm() < 1e-12 * m2[i].norm().max(1.0));
            }
            // definition: m = -dG(grad X(eta) (theta-eta)) grad X(eta)
            let arg = dx * d;
            let dg = stokeslet_grad(&arg).unwrap();
            for i in 0..2 {
                let mut expect = Matrix3::zeros();
                for j in 0..3 {
                    expect -= dg[j] * dx[(j, i)];
                }
                assert!((m1[i] + m2[i] - expect).norm() < 1e-13 * expect.norm().max(1.0));
            }
        }
    }

    #[test]
    fn finite_diff_remainder_cases() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        // affine maps: identically zero
        let aff = AffineMap {
            a: Matrix3x2::new(1.0, 0.3, -0.4, 1.1, 0.2, -0.7),
            b: Vector3::new(0.5, -1.0, 2.0),
        };
        for _ in 0..20 {
            let t = Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let e = Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            if (t - e).norm() < 1e-12 {
                continue;
            }
            assert!(finite_diff_remainder(&aff, t, e).unwrap().norm() < 1e-14);
        }
        // quadratic X = (t1^2, 0, 0): first component of E is -u1^2 r
        struct Quad;
        impl ChartMap for Quad {
            fn eval(&self, t: Vector2<f64>) -> Vector3<f64> {
                Vector3::new(t.x * t.x, 0.0, 0.0)
            }
            fn grad(&self, t: Vector2<f64>) -> Matrix3x2<f64> {
                Matrix3x2::new(2.0 * t.x, 0.0, 0.0, 0.0, 0.0, 0.0)
            }
        }
        for _ in 0..20 {
            let t = Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let e = Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let r = (t - e).norm();
            if r < 1e-6 {
                continue;
            }
            let u1 = (t.x - e.x) / r;
            let got = finite_diff_remainder(&Quad, t, e).unwrap();
            assert_relative_eq!(got.x, -u1 * u1 * r, epsilon = 1e-12, max_relative = 1e-12);
            assert_eq!(got.y, 0.0);
        }
        assert!(matches!(
            finite_diff_remainder(&aff, Vector2::new(1.0, 1.0), Vector2::new(1.0, 1.0)),
            Err(CoreError::CoincidentPoints)
        ));
    }

    #[test]
    fn remainder_vanishes_for_affine_maps() {
        let aff = AffineMap {
            a: Matrix3x2::new(1.0, 0.3, -0.4, 1.1, 0.2, -0.7),
            b: Vector3::new(0.5, -1.0, 2.0),
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let t = Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let e = Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            if (t - e).norm() < 0.05 {
                continue;
            }
            let (k1, k2) = remainder_kernel(&aff, t, e).unwrap();
            for i in 0..2 {
                assert!(k1[i].norm() < 1e-14);
                assert!(k2[i].norm() < 1e-14);
            }
        }
    }

    #[test]
    fn remainder_two_paths_agree() {
        let map = PolyMap;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut tested = 0;
        while tested < 1000 {
            let t = Vector2::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            let e = Vector2::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            if (t - e).norm() < 1e-3 {
                continue;
            }
            tested += 1;
            let (k1a, k2a) = remainder_kernel(&map, t, e).unwrap();
            let (k1b, k2b) = remainder_kernel_expanded(&map, t, e).unwrap();
            for i in 0..2 {
                let scale = k1a[i].norm().max(k2a[i].norm()).max(1.0);
                assert!(
                    (k1a[i] - k1b[i]).norm() <= 1e-10 * scale,
                    "K1 mismatch at t={t:?} e={e:?}"
                );
                assert!(
                    (k2a[i] - k2b[i]).norm() <= 1e-10 * scale,
                    "K2 mismatch at t={t:?} e={e:?}"
                );
            }
        }
    }

    #[test]
    fn remainder_cancellation_scaling() {
        // |K| |theta-eta|^{2-gamma} bounded as the separation shrinks: the
        // log-log slope of max|K| is about -1 for this C^infty map
        let map = PolyMap;
        let eta = Vector2::new(0.3, -0.2);
        let dir = Vector2::new(0.8, 0.6);
        let mut seps = Vec::new();
        let mut norms = Vec::new();
        for k in 0..10 {
            let r = 0.5 * 0.5_f64.powi(k);
            let (k1, k2) = remainder_kernel(&map, eta + r * dir, eta).unwrap();
            let n = k1[0]
                .norm()
                .max(k1[1].norm())
                .max(k2[0].norm())
                .max(k2[1].norm());
            seps.push(r.ln());
            norms.push(n.ln());
        }
        let n = seps.len() as f64;
        let sx: f64 = seps.iter().sum();
        let sy: f64 = norms.iter().sum();
        let sxx: f64 = seps.iter().map(|x| x * x).sum();
        let sxy: f64 = seps.iter().zip(&norms).map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(
            slope > -1.2 && slope < 0.1,
            "remainder decay slope {slope} outside expected window"
        );
    }

    #[test]
    fn odd_power_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let u = rand_vec3(&mut rng, 2.0);
            let v = rand_vec3(&mut rng, 2.0);
            if u.norm() < 0.05 || v.norm() < 0.05 {
                continue;
            }
            for k in [1u32, 3, 5] {
                let direct = 1.0 / u.norm().powi(k as i32) - 1.0 / v.norm().powi(k as i32);
                let fact = odd_power_difference(&u, &v, k);
                assert_relative_eq!(direct, fact, epsilon = 1e-12, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn q_kernel_bound() {
        // |q^j| <= (5/8pi) |grad X(eta)| / (|chord slope|^2 |theta-eta|^2)
        let map = PolyMap;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let t = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let e = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let r = (t - e).norm();
            if r < 1e-3 {
                continue;
            }
            let (q1, q2) = q_kernel_parts(&map, t, e).unwrap();
            let slope = (map.eval(t) - map.eval(e)).norm() / r;
            let bound = 5.0 * INV_8PI * map.grad(e).norm() / (slope * slope * r * r);
            for i in 0..2 {
                assert!(q1[i].norm() <= bound + 1e-13);
                assert!(q2[i].norm() <= bound + 1e-13);
            }
        }
    }

    #[test]
    fn pv_divergence_theorem() {
        // isotropic and sigma1/sigma2 = 3 anisotropic frozen matrices
        let iso = Matrix3x2::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        let aniso = Matrix3x2::new(3.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        for a in [iso, aniso] {
            let rep = pv_annulus_check(&a, 0.1, 50.0, 48, 64).unwrap();
            assert!(
                rep.divergence_residual() < 1e-6,
                "divergence residual {}",
                rep.divergence_residual()
            );
            let rep2 = pv_annulus_check(&a, 0.01, 200.0, 64, 64).unwrap();
            assert!(
                rep2.combined_pv_magnitude() < 1e-4,
                "pv magnitude {}",
                rep2.combined_pv_magnitude()
            );
        }
    }
}

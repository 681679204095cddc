//! Scalar elastic tension laws `T(lambda)` with derivatives, admissibility
//! checks and the derived bounds used by the frozen-coefficient estimates.

use crate::error::CoreError;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Functional form of the tension law.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawKind {
    /// `T(lambda) = k0 * lambda`
    Hookean { k0: f64 },
    /// `T(lambda) = k0 * (lambda - lambda0) + c`
    Affine { k0: f64, lambda0: f64, c: f64 },
    /// Tabulated samples `(lambda_i, T_i)`, cubic Hermite interpolation.
    Tabulated { points: Vec<(f64, f64)> },
}

/// A tension law with admissible stretch range.
///
/// Admissibility (`T > 0`, `dT/dlambda >= 0` sampled over the range) is
/// verified at construction unless the law is flagged experimental.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TensionLaw {
    pub kind: LawKind,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    #[serde(default)]
    pub experimental: bool,
}

impl TensionLaw {
    pub fn hookean(k0: f64) -> Self {
        TensionLaw::new(LawKind::Hookean { k0 }, 1e-3, 1e3, false)
            .expect("hookean law with positive k0 is admissible")
    }

    pub fn new(kind: LawKind, lambda_lo: f64, lambda_hi: f64, experimental: bool) -> Result<Self> {
        if !(lambda_lo > 0.0 && lambda_hi > lambda_lo) {
            return Err(CoreError::InvalidConfig {
                detail: format!("bad stretch range [{lambda_lo}, {lambda_hi}]"),
            });
        }
        if let LawKind::Tabulated { points } = &kind {
            if points.len() < 2 {
                return Err(CoreError::InadmissibleLaw {
                    detail: "tabulated law needs at least 2 points".into(),
                });
            }
            if !points.windows(2).all(|w| w[1].0 > w[0].0) {
                return Err(CoreError::InadmissibleLaw {
                    detail: "tabulated abscissae must be strictly increasing".into(),
                });
            }
        }
        let law = TensionLaw {
            kind,
            lambda_lo,
            lambda_hi,
            experimental,
        };
        if !experimental {
            law.check_admissible(1000)?;
        }
        Ok(law)
    }

    /// Sampled admissibility check: `T > 0` and `T' >= 0` over the range.
    pub fn check_admissible(&self, samples: usize) -> Result<()> {
        for i in 0..=samples {
            let l =
                self.lambda_lo + (self.lambda_hi - self.lambda_lo) * i as f64 / samples as f64;
            let t = self.eval(l);
            let dt = self.deriv(l);
            if t <= 0.0 {
                return Err(CoreError::InadmissibleLaw {
                    detail: format!("T({l}) = {t} <= 0"),
                });
            }
            if dt < -1e-12 {
                return Err(CoreError::InadmissibleLaw {
                    detail: format!("dT/dlambda({l}) = {dt} < 0"),
                });
            }
        }
        Ok(())
    }

    /// Tension at stretch lambda.
    pub fn eval(&self, lambda: f64) -> f64 {
        match &self.kind {
            LawKind::Hookean { k0 } => k0 * lambda,
            LawKind::Affine { k0, lambda0, c } => k0 * (lambda - lambda0) + c,
            LawKind::Tabulated { points } => hermite_eval(points, lambda).0,
        }
    }

    /// Derivative dT/dlambda.
    pub fn deriv(&self, lambda: f64) -> f64 {
        match &self.kind {
            LawKind::Hookean { k0 } => *k0,
            LawKind::Affine { k0, .. } => *k0,
            LawKind::Tabulated { points } => hermite_eval(points, lambda).1,
        }
    }

    /// `T(lambda) / lambda`, the coefficient in the divergence form.
    pub fn t_over_lambda(&self, lambda: f64) -> f64 {
        self.eval(lambda) / lambda
    }

    /// Bail out unless lambda lies in the admissible range.
    pub fn require_in_range(&self, lambda: f64) -> Result<()> {
        if lambda < self.lambda_lo || lambda > self.lambda_hi {
            return Err(CoreError::StretchOutOfRange {
                lambda,
                lo: self.lambda_lo,
                hi: self.lambda_hi,
            });
        }
        Ok(())
    }

    /// Elastic energy density `A_E(lambda)` with `A_E' = T` and
    /// `A_E(lambda_lo) = 0` for laws without a closed form.
    ///
    /// Hookean and affine laws use the exact antiderivative; tabulated laws
    /// use adaptive Simpson quadrature from `lambda_lo` (abs tol 1e-10).
    pub fn energy_density(&self, lambda: f64) -> f64 {
        match &self.kind {
            LawKind::Hookean { k0 } => 0.5 * k0 * lambda * lambda,
            LawKind::Affine { k0, lambda0, c } => {
                // antiderivative of k0 (l - lambda0) + c vanishing at 0
                0.5 * k0 * lambda * lambda + (c - k0 * lambda0) * lambda
            }
            LawKind::Tabulated { .. } => {
                adaptive_simpson(&|l| self.eval(l), self.lambda_lo, lambda, 1e-10, 30)
            }
        }
    }

    /// `z_m` of the frozen-coefficient estimates: minimum over
    /// `lambda in [sigma1, sqrt(2) sigma1]` of
    /// `min(T/lambda, (T/lambda + T') sigma2^2 / lambda^2)`.
    pub fn z_min(&self, sigma1: f64, sigma2: f64) -> f64 {
        let lo = sigma1;
        let hi = 2.0_f64.sqrt() * sigma1;
        let mut zm = f64::INFINITY;
        let n = 512;
        for i in 0..=n {
            let l = lo + (hi - lo) * i as f64 / n as f64;
            let tl = self.t_over_lambda(l);
            let other = (tl + self.deriv(l)) * sigma2 * sigma2 / (l * l);
            zm = zm.min(tl.min(other));
        }
        zm
    }

    /// `z_M^(0)` of the symbol estimates: maximum of `T/lambda + T'` over
    /// `lambda in [sigma1, sqrt(2) sigma1]`.
    pub fn z_max_symbol(&self, sigma1: f64) -> f64 {
        let lo = sigma1;
        let hi = 2.0_f64.sqrt() * sigma1;
        let mut zm: f64 = 0.0;
        let n = 512;
        for i in 0..=n {
            let l = lo + (hi - lo) * i as f64 / n as f64;
            zm = zm.max(self.t_over_lambda(l) + self.deriv(l));
        }
        zm
    }

    /// `z_M^(0)` of the tension-tensor estimates: maximum of `|f1| + |f2|`
    /// with `f1 = T/lambda`, `f2 = T/lambda - T'`, over a stretch interval.
    pub fn z_max_tension(&self, lo: f64, hi: f64) -> f64 {
        let mut zm: f64 = 0.0;
        let n = 512;
        for i in 0..=n {
            let l = lo + (hi - lo) * i as f64 / n as f64;
            let f1 = self.t_over_lambda(l);
            let f2 = f1 - self.deriv(l);
            zm = zm.max(f1.abs() + f2.abs());
        }
        zm
    }

    /// `z_M^(1)`: maximum of `|f1'| + |f2'|` over a stretch interval
    /// (derivatives by central differences).
    pub fn z_max_tension_deriv(&self, lo: f64, hi: f64) -> f64 {
        let h = 1e-6 * (hi - lo).max(1.0);
        let f1 = |l: f64| self.t_over_lambda(l);
        let f2 = |l: f64| self.t_over_lambda(l) - self.deriv(l);
        let mut zm: f64 = 0.0;
        let n = 512;
        for i in 0..=n {
            let l = lo + (hi - lo) * i as f64 / n as f64;
            let d1 = (f1(l + h) - f1(l - h)) / (2.0 * h);
            let d2 = (f2(l + h) - f2(l - h)) / (2.0 * h);
            zm = zm.max(d1.abs() + d2.abs());
        }
        zm
    }

    /// Default bounds over the law's own admissible range (stored on the
    /// type for diagnostics): `(z_m, z_M0, z_M1)` with the symbol-side
    /// `z_m`/`z_M0` computed at `sigma1 = sigma2 = lambda_lo`.
    pub fn derived_bounds(&self) -> (f64, f64, f64) {
        (
            self.z_min(self.lambda_lo, self.lambda_lo),
            self.z_max_symbol_range(self.lambda_lo, self.lambda_hi),
            self.z_max_tension_deriv(self.lambda_lo, self.lambda_hi),
        )
    }

    /// Max of `T/lambda + T'` over an explicit interval.
    pub fn z_max_symbol_range(&self, lo: f64, hi: f64) -> f64 {
        let mut zm: f64 = 0.0;
        let n = 512;
        for i in 0..=n {
            let l = lo + (hi - lo) * i as f64 / n as f64;
            zm = zm.max(self.t_over_lambda(l) + self.deriv(l));
        }
        zm
    }
}

/// Cubic Hermite interpolation with centered-difference slopes; returns
/// (value, derivative). Extrapolates linearly outside the table.
fn hermite_eval(points: &[(f64, f64)], x: f64) -> (f64, f64) {
    let n = points.len();
    let slope = |i: usize| -> f64 {
        if i == 0 {
            (points[1].1 - points[0].1) / (points[1].0 - points[0].0)
        } else if i == n - 1 {
            (points[n - 1].1 - points[n - 2].1) / (points[n - 1].0 - points[n - 2].0)
        } else {
            (points[i + 1].1 - points[i - 1].1) / (points[i + 1].0 - points[i - 1].0)
        }
    };
    if x <= points[0].0 {
        let m = slope(0);
        return (points[0].1 + m * (x - points[0].0), m);
    }
    if x >= points[n - 1].0 {
        let m = slope(n - 1);
        return (points[n - 1].1 + m * (x - points[n - 1].0), m);
    }
    let mut i = 0;
    while points[i + 1].0 < x {
        i += 1;
    }
    let (x0, y0) = points[i];
    let (x1, y1) = points[i + 1];
    let h = x1 - x0;
    let t = (x - x0) / h;
    let m0 = slope(i) * h;
    let m1 = slope(i + 1) * h;
    let h00 = 2.0 * t * t * t - 3.0 * t * t + 1.0;
    let h10 = t * t * t - 2.0 * t * t + t;
    let h01 = -2.0 * t * t * t + 3.0 * t * t;
    let h11 = t * t * t - t * t;
    let val = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
    let dh00 = 6.0 * t * t - 6.0 * t;
    let dh10 = 3.0 * t * t - 4.0 * t + 1.0;
    let dh01 = -6.0 * t * t + 6.0 * t;
    let dh11 = 3.0 * t * t - 2.0 * t;
    let dv = (dh00 * y0 + dh10 * m0 + dh01 * y1 + dh11 * m1) / h;
    (val, dv)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, left, tol / 2.0, depth - 1) + rec(f, m, b, right, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let sign = if b < a { -1.0 } else { 1.0 };
    let (a, b) = if b < a { (b, a) } else { (a, b) };
    sign * rec(f, a, b, simpson(f, a, b), tol, depth)
}

//! Spherical-harmonic machinery: Gauss-Legendre nodes, fully normalized
//! associated Legendre functions, complex coefficient sets for real scalar
//! fields, pointwise synthesis and Wigner rotations of coefficients.
//!
//! Conventions: orthonormal complex harmonics
//! `Y_lm(theta, phi) = Pbar_lm(cos theta) e^{i m phi}` with the
//! Condon-Shortley phase folded into `Pbar`. A real field stores only the
//! coefficients with `m >= 0`; the rest follow from
//! `a_{l,-m} = (-1)^m conj(a_{l,m})`.

use num_complex::Complex64;

/// Gauss-Legendre nodes and weights on [-1, 1], ascending nodes.
///
/// Newton iteration on the Legendre recurrence; accurate to ~1e-15 for the
/// sizes used here (n <= a few hundred).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Tricomi-style initial guess for the i-th root (descending order).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // p_n(x) and its derivative via the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = (n as f64) * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Number of (l, m) pairs with 0 <= m <= l <= l_max.
pub fn packed_len(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 2) / 2
}

/// Index of (l, m) in the packed m-major layout: blocks of fixed m, l = m..=l_max.
///
/// Block m starts at `sum_{k<m} (l_max + 1 - k) = m(l_max + 1) - m(m-1)/2`.
#[inline]
pub fn packed_idx(l_max: usize, l: usize, m: usize) -> usize {
    debug_assert!(m <= l && l <= l_max);
    m * (l_max + 1) - m * (m.saturating_sub(1)) / 2 + (l - m)
}

/// Fully normalized associated Legendre values `Pbar_lm(x)` for all
/// 0 <= m <= l <= l_max, packed m-major (see [`packed_idx`]).
pub fn plm_table(l_max: usize, x: f64, out: &mut [f64]) {
    debug_assert_eq!(out.len(), packed_len(l_max));
    let sq = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm_val = (0.25 / std::f64::consts::PI).sqrt(); // Pbar_00
    for m in 0..=l_max {
        if m > 0 {
            // Pbar_mm = -sqrt((2m+1)/(2m)) * sin(theta) * Pbar_{m-1,m-1}
            let f = ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
            pmm_val = -f * sq * pmm_val;
        }
        let base = packed_idx(l_max, m, m);
        out[base] = pmm_val;
        if m < l_max {
            // Pbar_{m+1,m} = sqrt(2m+3) x Pbar_mm
            let mut p_prev = pmm_val;
            let mut p_cur = ((2 * m + 3) as f64).sqrt() * x * pmm_val;
            out[base + 1] = p_cur;
            for l in (m + 2)..=l_max {
                let lf = l as f64;
                let mf = m as f64;
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = (((2.0 * lf + 1.0) * (lf - 1.0 + mf) * (lf - 1.0 - mf))
                    / ((2.0 * lf - 3.0) * (lf * lf - mf * mf)))
                    .sqrt();
                let p_next = a * x * p_cur - b * p_prev;
                p_prev = p_cur;
                p_cur = p_next;
                out[base + (l - m)] = p_cur;
            }
        }
    }
}

/// Theta-derivatives `d Pbar_lm(cos theta) / d theta` from a value table.
///
/// Requires sin(theta) > 0 (never evaluated at the poles).
pub fn dplm_dtheta_table(l_max: usize, x: f64, plm: &[f64], out: &mut [f64]) {
    debug_assert_eq!(out.len(), packed_len(l_max));
    let sin_t = (1.0 - x * x).max(0.0).sqrt();
    assert!(sin_t > 0.0, "theta derivative undefined at the poles");
    for m in 0..=l_max {
        for l in m..=l_max {
            let idx = packed_idx(l_max, l, m);
            let lf = l as f64;
            let mut v = lf * x * plm[idx];
            if l > m {
                let e = (((2 * l + 1) as f64 / (2 * l - 1) as f64)
                    * ((l * l - m * m) as f64))
                    .sqrt();
                v -= e * plm[packed_idx(l_max, l - 1, m)];
            }
            out[idx] = v / sin_t;
        }
    }
}

/// Spherical-harmonic coefficients of a real scalar field, band limit `l_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffSet {
    pub l_max: usize,
    /// Packed m-major complex coefficients for m >= 0.
    pub data: Vec<Complex64>,
}

impl CoeffSet {
    pub fn zeros(l_max: usize) -> Self {
        CoeffSet {
            l_max,
            data: vec![Complex64::new(0.0, 0.0); packed_len(l_max)],
        }
    }

    #[inline]
    pub fn get(&self, l: usize, m: usize) -> Complex64 {
        self.data[packed_idx(self.l_max, l, m)]
    }

    #[inline]
    pub fn set(&mut self, l: usize, m: usize, v: Complex64) {
        self.data[packed_idx(self.l_max, l, m)] = v;
    }

    /// Coefficient for any m in [-l, l] using the real-field symmetry.
    #[inline]
    pub fn get_signed(&self, l: usize, m: i64) -> Complex64 {
        if m >= 0 {
            self.get(l, m as usize)
        } else {
            let c = self.get(l, (-m) as usize).conj();
            if (-m) % 2 == 0 {
                c
            } else {
                -c
            }
        }
    }

    /// Zero all coefficients with l > deg.
    pub fn truncate(&mut self, deg: usize) {
        for m in 0..=self.l_max {
            for l in m..=self.l_max {
                if l > deg {
                    self.data[packed_idx(self.l_max, l, m)] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    /// Multiply each coefficient by -l(l+1) (spectral Laplace-Beltrami).
    pub fn laplace_beltrami(&self) -> CoeffSet {
        let mut out = self.clone();
        for m in 0..=self.l_max {
            for l in m..=self.l_max {
                let idx = packed_idx(self.l_max, l, m);
                out.data[idx] *= -((l * (l + 1)) as f64);
            }
        }
        out
    }

    /// Synthesize the field value at an arbitrary point (cos theta, phi).
    pub fn eval(&self, cos_theta: f64, phi: f64) -> f64 {
        let mut plm = vec![0.0; packed_len(self.l_max)];
        plm_table(self.l_max, cos_theta, &mut plm);
        self.eval_with_table(&plm, phi)
    }

    /// Synthesis with a precomputed Legendre table at the target colatitude.
    pub fn eval_with_table(&self, plm: &[f64], phi: f64) -> f64 {
        let mut acc = 0.0;
        // m = 0 block
        for l in 0..=self.l_max {
            acc += self.data[packed_idx(self.l_max, l, 0)].re * plm[packed_idx(self.l_max, l, 0)];
        }
        let (s1, c1) = phi.sin_cos();
        let mut cm = c1;
        let mut sm = s1;
        for m in 1..=self.l_max {
            let mut hr = 0.0;
            let mut hi = 0.0;
            for l in m..=self.l_max {
                let idx = packed_idx(self.l_max, l, m);
                hr += self.data[idx].re * plm[idx];
                hi += self.data[idx].im * plm[idx];
            }
            acc += 2.0 * (hr * cm - hi * sm);
            // advance e^{i m phi}
            let cn = cm * c1 - sm * s1;
            let sn = sm * c1 + cm * s1;
            cm = cn;
            sm = sn;
        }
        acc
    }

    /// l2 energy per degree: `sum_m |a_lm|^2` counting both signs of m.
    pub fn degree_energy(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.l_max + 1];
        for m in 0..=self.l_max {
            for l in m..=self.l_max {
                let c = self.data[packed_idx(self.l_max, l, m)];
                let w = if m == 0 { 1.0 } else { 2.0 };
                e[l] += w * c.norm_sqr();
            }
        }
        e
    }
}

/// Wigner small-d matrices `d^l_{m,mp}(beta)` for all l <= l_max,
/// m in [-l, l], mp in [0, l] (the mp >= 0 half suffices for real fields).
#[derive(Debug, Clone)]
pub struct WignerTable {
    pub l_max: usize,
    pub beta: f64,
    /// Per-l blocks, block l holds (2l+1) * (l+1) entries indexed
    /// `(m + l) * (l + 1) + mp`.
    blocks: Vec<Vec<f64>>,
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut lf = vec![0.0; n + 1];
    for k in 1..=n {
        lf[k] = lf[k - 1] + (k as f64).ln();
    }
    lf
}

impl WignerTable {
    pub fn new(l_max: usize, beta: f64) -> Self {
        let lf = ln_factorials(2 * l_max + 1);
        let cb = (0.5 * beta).cos();
        let sb = (0.5 * beta).sin();
        // Guard logs of 0 for beta = 0 or pi by special-casing the powers.
        let ln_cb = if cb > 0.0 { cb.ln() } else { f64::NEG_INFINITY };
        let ln_sb = if sb > 0.0 { sb.ln() } else { f64::NEG_INFINITY };
        let mut blocks = Vec::with_capacity(l_max + 1);
        for l in 0..=l_max {
            let li = l as i64;
            let mut block = vec![0.0; (2 * l + 1) * (l + 1)];
            // Standard explicit sum for d^l_{m,mp}(beta): the first index m
            // plays the "row" (m') role of the usual convention.
            for m in -li..=li {
                for mp in 0..=li {
                    let pref = 0.5
                        * (lf[(li + mp) as usize]
                            + lf[(li - mp) as usize]
                            + lf[(li + m) as usize]
                            + lf[(li - m) as usize]);
                    let s_min = 0.max(mp - m);
                    let s_max = (li + mp).min(li - m);
                    let mut val = 0.0;
                    for s in s_min..=s_max {
                        let pc = 2 * li + mp - m - 2 * s; // power of cos(beta/2)
                        let ps = m - mp + 2 * s; // power of sin(beta/2)
                        let lc = if pc == 0 { 0.0 } else { pc as f64 * ln_cb };
                        let ls = if ps == 0 { 0.0 } else { ps as f64 * ln_sb };
                        let ln_pow = lc + ls;
                        if ln_pow == f64::NEG_INFINITY {
                            continue;
                        }
                        let ln_den = lf[(li + mp - s) as usize]
                            + lf[s as usize]
                            + lf[(m - mp + s) as usize]
                            + lf[(li - m - s) as usize];
                        let sign = if (m - mp + s) % 2 == 0 { 1.0 } else { -1.0 };
                        val += sign * (pref - ln_den + ln_pow).exp();
                    }
                    block[((m + li) as usize) * (l + 1) + mp as usize] = val;
                }
            }
            blocks.push(block);
        }
        WignerTable {
            l_max,
            beta,
            blocks,
        }
    }

    #[inline]
    pub fn d(&self, l: usize, m: i64, mp: usize) -> f64 {
        self.blocks[l][((m + l as i64) as usize) * (l + 1) + mp]
    }
}

/// Rotate the coefficients of a real field: the output coefficients `b`
/// satisfy `synth(b, n) = synth(a, Rz(alpha) Ry(beta) n)` for every unit
/// vector n. `table` must hold the Wigner matrices at `beta`.
pub fn rotate_coeffs(a: &CoeffSet, alpha: f64, table: &WignerTable) -> CoeffSet {
    assert_eq!(a.l_max, table.l_max);
    let l_max = a.l_max;
    let mut b = CoeffSet::zeros(l_max);
    // phases e^{+i m alpha} for m in [-l_max, l_max]
    let mut phase = vec![Complex64::new(0.0, 0.0); 2 * l_max + 1];
    for m in -(l_max as i64)..=(l_max as i64) {
        phase[(m + l_max as i64) as usize] = Complex64::from_polar(1.0, (m as f64) * alpha);
    }
    for l in 0..=l_max {
        for mp in 0..=l {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in -(l as i64)..=(l as i64) {
                let am = a.get_signed(l, m);
                let ph = phase[(m + l_max as i64) as usize];
                acc += am * ph * table.d(l, m, mp);
            }
            b.set(l, mp, acc);
        }
    }
    b
}

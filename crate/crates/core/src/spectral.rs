//! Frozen-coefficient symbol computations: matrix factors, linear and
//! nonlinear Fourier multipliers, tension tensors, resolvent bounds, FFT
//! semigroup kernels, homogeneity checks and the Gateaux-derivative tension.

use crate::error::CoreError;
use crate::membrane::MembraneState;
use crate::tension::TensionLaw;
use crate::Result;
use nalgebra::{Matrix2, Matrix3, Matrix3x2, Vector2, Vector3};
use num_complex::Complex64;
use rustfft::FftPlanner;

/// A 3x2 frozen-coefficient matrix with certified singular-value bounds
/// `sigma2 |xi| <= |A xi| <= sigma1 |xi|`.
#[derive(Debug, Clone)]
pub struct FrozenMatrix {
    pub a: Matrix3x2<f64>,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl FrozenMatrix {
    pub fn new(a: Matrix3x2<f64>) -> Result<Self> {
        let ata = a.transpose() * a;
        let eig = nalgebra::SymmetricEigen::new(ata);
        let e0 = eig.eigenvalues[0].max(0.0);
        let e1 = eig.eigenvalues[1].max(0.0);
        let (lo, hi) = if e0 < e1 { (e0, e1) } else { (e1, e0) };
        let sigma2 = lo.sqrt();
        let sigma1 = hi.sqrt();
        if sigma2 < 1e-12 * sigma1.max(1e-300) {
            return Err(CoreError::RankDeficient { sigma2 });
        }
        Ok(FrozenMatrix { a, sigma1, sigma2 })
    }
}

/// Static symbol factors of a frozen matrix.
#[derive(Debug, Clone)]
pub struct SymbolReport {
    pub frozen: FrozenMatrix,
    /// `B = sqrt(A^T A)`, 2x2 symmetric positive definite.
    pub b: Matrix2<f64>,
    pub b_inv: Matrix2<f64>,
    /// Isometry `Q = A B^{-1}` (Q^T Q = I).
    pub q: Matrix3x2<f64>,
    /// `U = A (A^T A)^{-1}`.
    pub u: Matrix3x2<f64>,
    /// Column-span projector `P = A (A^T A)^{-1} A^T`.
    pub p: Matrix3<f64>,
    pub det_b: f64,
    /// Frobenius norm of A (the frozen stretch).
    pub lambda_f: f64,
}

/// Compute the static symbol factors of a frozen matrix.
pub fn matrix_factors(a: Matrix3x2<f64>) -> Result<SymbolReport> {
    let frozen = FrozenMatrix::new(a)?;
    let ata = a.transpose() * a;
    let eig = nalgebra::SymmetricEigen::new(ata);
    // 2x2 symmetric square root with an eigenvalue floor guard
    let mut b = Matrix2::zeros();
    let mut b_inv = Matrix2::zeros();
    for k in 0..2 {
        let lam = eig.eigenvalues[k].max(1e-300);
        let v = eig.eigenvectors.column(k);
        let s = lam.sqrt();
        b += s * v * v.transpose();
        b_inv += (1.0 / s) * v * v.transpose();
    }
    let q = a * b_inv;
    let ata_inv = b_inv * b_inv;
    let u = a * ata_inv;
    let p = a * ata_inv * a.transpose();
    let det_b = b[(0, 0)] * b[(1, 1)] - b[(0, 1)] * b[(1, 0)];
    Ok(SymbolReport {
        frozen,
        b,
        b_inv,
        q,
        u,
        p,
        det_b,
        lambda_f: a.norm(),
    })
}

/// Quarter-turn in the plane.
fn rot_quarter() -> Matrix2<f64> {
    Matrix2::new(0.0, -1.0, 1.0, 0.0)
}

impl SymbolReport {
    /// Unit vector `v(xi) = Q R_{pi/2} B^{-1} xi / |B^{-1} xi|`.
    pub fn v_of(&self, xi: Vector2<f64>) -> Result<Vector3<f64>> {
        if xi.norm() == 0.0 {
            return Err(CoreError::ZeroFrequency);
        }
        let w = self.b_inv * xi;
        Ok(self.q * (rot_quarter() * (w / w.norm())))
    }

    /// `mu = 1 / (det B |B^{-1} xi|)`.
    pub fn mu_of(&self, xi: Vector2<f64>) -> Result<f64> {
        if xi.norm() == 0.0 {
            return Err(CoreError::ZeroFrequency);
        }
        Ok(1.0 / (self.det_b * (self.b_inv * xi).norm()))
    }

    /// Fourier transform of `G(A theta)` at xi:
    /// `(1/(4 det B |B^{-1} xi|)) (I + v v^T)`.
    pub fn fourier_g(&self, xi: Vector2<f64>) -> Result<Matrix3<f64>> {
        let v = self.v_of(xi)?;
        let mu = self.mu_of(xi)?;
        Ok(0.25 * mu * (Matrix3::identity() + v * v.transpose()))
    }
}

/// The linear-tension multiplier with its closed-form eigenstructure.
#[derive(Debug, Clone)]
pub struct LinearSymbol {
    pub matrix: Matrix3<f64>,
    /// Double eigenvalue `mu |xi|^2 / 4`.
    pub eig_small: f64,
    /// Simple eigenvalue `mu |xi|^2 / 2` with eigenvector `v`.
    pub eig_large: f64,
    pub v: Vector3<f64>,
}

/// `L_A^L(xi) = |xi|^2 / (4 det B |B^{-1} xi|) (I + v v^T)`.
pub fn linear_symbol(report: &SymbolReport, xi: Vector2<f64>) -> Result<LinearSymbol> {
    let v = report.v_of(xi)?;
    let mu = report.mu_of(xi)?;
    let n2 = xi.norm_squared();
    let matrix = 0.25 * mu * n2 * (Matrix3::identity() + v * v.transpose());
    Ok(LinearSymbol {
        matrix,
        eig_small: 0.25 * mu * n2,
        eig_large: 0.5 * mu * n2,
        v,
    })
}

/// Frozen tension tensor `T_F(A)` acting on 3x2 gradient matrices:
/// `T_F W = (T/l) W - (T/l - T') (A : W) A / l^2` with `l = |A|_F`.
#[derive(Debug, Clone)]
pub struct TensionTensor {
    pub a: Matrix3x2<f64>,
    pub lambda_f: f64,
    /// `f1 = T(l)/l`
    pub f1: f64,
    /// `f2 = T(l)/l - T'(l)`
    pub f2: f64,
}

impl TensionTensor {
    pub fn apply(&self, w: &Matrix3x2<f64>) -> Matrix3x2<f64> {
        let inner = self.a.dot(w); // A : W
        self.f1 * w - self.f2 * inner / (self.lambda_f * self.lambda_f) * self.a
    }

    /// Entry `(T_F)_{ij,kl}` in the index convention
    /// `(T_F W)_{ij} = (T_F)_{ij,kl} W_{kl}`.
    pub fn entry(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let mut v = 0.0;
        if i == k && j == l {
            v += self.f1;
        }
        v -= self.f2 * self.a[(i, j)] * self.a[(k, l)] / (self.lambda_f * self.lambda_f);
        v
    }
}

/// Build `T_F(A)` for a law; the frozen stretch `|A|_F` must be admissible.
pub fn tension_tensor(a: &Matrix3x2<f64>, law: &TensionLaw) -> Result<TensionTensor> {
    let lambda_f = a.norm();
    law.require_in_range(lambda_f)?;
    let f1 = law.t_over_lambda(lambda_f);
    let f2 = f1 - law.deriv(lambda_f);
    Ok(TensionTensor {
        a: *a,
        lambda_f,
        f1,
        f2,
    })
}

/// Force symbol `M_A(xi)` with its closed-form eigenstructure: eigenvalue
/// `(T/l)(|xi|^2 - |A xi|^2/l^2) + T' |A xi|^2/l^2` on `A xi`, double
/// eigenvalue `(T/l)|xi|^2` on the complement.
pub fn force_symbol(
    a: &Matrix3x2<f64>,
    law: &TensionLaw,
    xi: Vector2<f64>,
) -> Result<Matrix3<f64>> {
    if xi.norm() == 0.0 {
        return Err(CoreError::ZeroFrequency);
    }
    let lambda_f = a.norm();
    law.require_in_range(lambda_f)?;
    let t_over = law.t_over_lambda(lambda_f);
    let dt = law.deriv(lambda_f);
    let axi = a * xi;
    let l2 = lambda_f * lambda_f;
    Ok(t_over * (xi.norm_squared() * Matrix3::identity() - axi * axi.transpose() / l2)
        + dt * axi * axi.transpose() / l2)
}

/// Eigenvalues of `M_A(xi)` from the closed forms: (on `A xi`, double).
pub fn force_symbol_eigs(
    a: &Matrix3x2<f64>,
    law: &TensionLaw,
    xi: Vector2<f64>,
) -> Result<(f64, f64)> {
    if xi.norm() == 0.0 {
        return Err(CoreError::ZeroFrequency);
    }
    let lambda_f = a.norm();
    let t_over = law.t_over_lambda(lambda_f);
    let dt = law.deriv(lambda_f);
    let axi2 = (a * xi).norm_squared();
    let l2 = lambda_f * lambda_f;
    let on_axi = t_over * (xi.norm_squared() - axi2 / l2) + dt * axi2 / l2;
    let double = t_over * xi.norm_squared();
    Ok((on_axi, double))
}

/// Full multiplier `L_A(xi) = (F G_A)(xi) M_A(xi)`.
pub fn full_symbol(
    report: &SymbolReport,
    law: &TensionLaw,
    xi: Vector2<f64>,
) -> Result<Matrix3<f64>> {
    let g = report.fourier_g(xi)?;
    let m = force_symbol(&report.frozen.a, law, xi)?;
    Ok(g * m)
}

/// Real positive eigenvalues of `L_A(xi)` via the symmetric similarity
/// `P^{1/2} M P^{1/2}` with `P = (F G_A)(xi)`.
pub fn full_symbol_eigs(
    report: &SymbolReport,
    law: &TensionLaw,
    xi: Vector2<f64>,
) -> Result<Vector3<f64>> {
    let v = report.v_of(xi)?;
    let mu = report.mu_of(xi)?;
    let c = 0.25 * mu;
    let sqrt2 = std::f64::consts::SQRT_2;
    let p_half = c.sqrt() * (Matrix3::identity() + (sqrt2 - 1.0) * v * v.transpose());
    let m = force_symbol(&report.frozen.a, law, xi)?;
    let s = p_half * m * p_half;
    let eig = nalgebra::SymmetricEigen::new(s);
    Ok(eig.eigenvalues)
}

/// `exp(-t L_A(xi))` through the same symmetric similarity.
pub fn exp_neg_symbol(
    report: &SymbolReport,
    law: &TensionLaw,
    xi: Vector2<f64>,
    t: f64,
) -> Result<Matrix3<f64>> {
    if xi.norm() == 0.0 {
        return Ok(Matrix3::identity());
    }
    let v = report.v_of(xi)?;
    let mu = report.mu_of(xi)?;
    let c = 0.25 * mu;
    let sqrt2 = std::f64::consts::SQRT_2;
    let p_half = c.sqrt() * (Matrix3::identity() + (sqrt2 - 1.0) * v * v.transpose());
    let p_half_inv =
        (1.0 / c.sqrt()) * (Matrix3::identity() + (1.0 / sqrt2 - 1.0) * v * v.transpose());
    let m = force_symbol(&report.frozen.a, law, xi)?;
    let s = p_half * m * p_half;
    let eig = nalgebra::SymmetricEigen::new(s);
    let mut e = Matrix3::zeros();
    for k in 0..3 {
        let w = eig.eigenvectors.column(k);
        e += (-t * eig.eigenvalues[k]).exp() * w * w.transpose();
    }
    Ok(p_half * e * p_half_inv)
}

/// Complex sector `S_{omega,delta} = { z : |arg(z - omega)| <= pi - delta }`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SectorSpec {
    pub omega: f64,
    pub delta: f64,
    pub samples: usize,
}

impl Default for SectorSpec {
    fn default() -> Self {
        SectorSpec {
            omega: 1.0,
            delta: std::f64::consts::FRAC_PI_4,
            samples: 200,
        }
    }
}

impl SectorSpec {
    pub fn contains(&self, z: Complex64) -> bool {
        let w = z - Complex64::new(self.omega, 0.0);
        w.arg().abs() <= std::f64::consts::PI - self.delta + 1e-12
    }

    /// Points on the sector boundary rays, radii log-spaced in
    /// `[1e-2, 1e3]`, both half-rays.
    pub fn boundary_samples(&self) -> Vec<Complex64> {
        let half = self.samples / 2;
        let mut out = Vec::with_capacity(2 * half);
        let ang = std::f64::consts::PI - self.delta;
        for k in 0..half {
            let r = 10f64.powf(-2.0 + 5.0 * k as f64 / (half.max(2) - 1) as f64);
            out.push(Complex64::new(self.omega, 0.0) + Complex64::from_polar(r, ang));
            out.push(Complex64::new(self.omega, 0.0) + Complex64::from_polar(r, -ang));
        }
        out
    }
}

/// One resolvent evaluation with the bracketing bounds.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ResolventSample {
    pub z_re: f64,
    pub z_im: f64,
    pub norm: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ResolventSample {
    pub fn within_bounds(&self) -> bool {
        self.norm >= self.lower * (1.0 - 1e-10) && self.norm <= self.upper * (1.0 + 1e-10)
    }
}

/// Operator norm of `(z + L_A(xi))^{-1}` with the sector bracket
/// `1/(|z| + s1 zM |xi| / (2 s2^2)) <= norm <=
///  2 / sqrt((1 - cos d)((s2 zm |xi| / (4 s1^2))^2 + |z|^2))`.
pub fn resolvent_norm(
    report: &SymbolReport,
    law: &TensionLaw,
    z: Complex64,
    xi: Vector2<f64>,
    sector: &SectorSpec,
) -> Result<ResolventSample> {
    if xi.norm() == 0.0 {
        return Err(CoreError::ZeroFrequency);
    }
    assert!(
        sector.contains(z),
        "resolvent sampled outside the sector: {z}"
    );
    let l = full_symbol(report, law, xi)?;
    let mut zl = Matrix3::<Complex64>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            zl[(i, j)] = Complex64::new(l[(i, j)], 0.0);
        }
        zl[(i, i)] += z;
    }
    let sv = zl.svd(false, false).singular_values;
    let smin = sv.min();
    let smax = sv.max();
    if smin < 1e-14 * smax {
        return Err(CoreError::SingularResolvent { re: z.re, im: z.im });
    }
    let norm = 1.0 / smin;
    let s1 = report.frozen.sigma1;
    let s2 = report.frozen.sigma2;
    let zm = law.z_min(s1, s2);
    let zmax = law.z_max_symbol(s1);
    let lower = 1.0 / (z.norm() + s1 * zmax * xi.norm() / (2.0 * s2 * s2));
    let lam_min = s2 * zm * xi.norm() / (4.0 * s1 * s1);
    let upper = 2.0
        / ((1.0 - sector.delta.cos()) * (lam_min * lam_min + z.norm_sqr()))
            .sqrt();
    Ok(ResolventSample {
        z_re: z.re,
        z_im: z.im,
        norm,
        lower,
        upper,
    })
}

/// Square FFT grid in frequency space: n x n samples of `[-xi_max, xi_max)`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct FftGrid {
    pub n: usize,
    pub xi_max: f64,
}

impl FftGrid {
    pub fn dxi(&self) -> f64 {
        2.0 * self.xi_max / self.n as f64
    }
    pub fn dtheta(&self) -> f64 {
        std::f64::consts::TAU / (self.n as f64 * self.dxi())
    }
    pub fn theta_max(&self) -> f64 {
        std::f64::consts::PI / self.dxi()
    }
    /// Wrapped frequency of index k.
    pub fn freq(&self, k: usize) -> f64 {
        let k = k as i64;
        let n = self.n as i64;
        let w = if k < n / 2 { k } else { k - n };
        w as f64 * self.dxi()
    }
    /// Wrapped spatial coordinate of index j.
    pub fn coord(&self, j: usize) -> f64 {
        let j = j as i64;
        let n = self.n as i64;
        let w = if j < n / 2 { j } else { j - n };
        w as f64 * self.dtheta()
    }
}

/// Real-space matrix kernel sampled on the dual grid of an [`FftGrid`].
pub struct KernelGrid {
    pub grid: FftGrid,
    pub t: f64,
    /// Nine row-major component planes, each n*n, index `i * n + j`.
    pub entries: Vec<Vec<f64>>,
}

impl KernelGrid {
    pub fn matrix_at(&self, i: usize, j: usize) -> Matrix3<f64> {
        let n = self.grid.n;
        let idx = i * n + j;
        Matrix3::from_fn(|r, c| self.entries[3 * r + c][idx])
    }

    /// Discrete mass `sum K dtheta^2` (equals the symbol at xi = 0).
    pub fn mass(&self) -> Matrix3<f64> {
        let dth2 = self.grid.dtheta() * self.grid.dtheta();
        Matrix3::from_fn(|r, c| self.entries[3 * r + c].iter().sum::<f64>() * dth2)
    }

    pub fn unit_mass_error(&self) -> f64 {
        (self.mass() - Matrix3::identity()).norm()
    }

    /// Frobenius norm of the kernel matrix at a node.
    pub fn norm_at(&self, i: usize, j: usize) -> f64 {
        let n = self.grid.n;
        let idx = i * n + j;
        (0..9).map(|e| self.entries[e][idx].powi(2)).sum::<f64>().sqrt()
    }

    /// Peak Frobenius norm over the grid.
    pub fn peak(&self) -> f64 {
        let n = self.grid.n;
        let mut p: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                p = p.max(self.norm_at(i, j));
            }
        }
        p
    }

    /// Log-log least squares fit of the radial decay exponent of `|K|`
    /// over `r_lo <= |theta| <= r_hi`; returns the positive exponent p in
    /// `|K| ~ r^{-p}`.
    pub fn decay_exponent(&self, r_lo: f64, r_hi: f64) -> f64 {
        let n = self.grid.n;
        let bins = 24usize;
        let mut sums = vec![0.0; bins];
        let mut counts = vec![0usize; bins];
        let log_lo = r_lo.ln();
        let log_hi = r_hi.ln();
        for i in 0..n {
            let x = self.grid.coord(i);
            for j in 0..n {
                let y = self.grid.coord(j);
                let r = (x * x + y * y).sqrt();
                if r < r_lo || r > r_hi {
                    continue;
                }
                let b = (((r.ln() - log_lo) / (log_hi - log_lo)) * bins as f64) as usize;
                let b = b.min(bins - 1);
                sums[b] += self.norm_at(i, j);
                counts[b] += 1;
            }
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for b in 0..bins {
            if counts[b] == 0 {
                continue;
            }
            let r_mid = (log_lo + (b as f64 + 0.5) / bins as f64 * (log_hi - log_lo)).exp();
            xs.push(r_mid.ln());
            ys.push((sums[b] / counts[b] as f64).ln());
        }
        let m = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|v| v * v).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
        -((m * sxy - sx * sy) / (m * sxx - sx * sx))
    }
}

/// 2D inverse FFT (unnormalized synthesis) of an n*n complex buffer, rows
/// then columns.
fn ifft2_inplace(buf: &mut [Complex64], n: usize) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(n);
    // rows
    for r in 0..n {
        fft.process(&mut buf[r * n..(r + 1) * n]);
    }
    // columns via transpose, process, transpose back
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = buf[r * n + c];
        }
        fft.process(&mut col);
        for r in 0..n {
            buf[r * n + c] = col[r];
        }
    }
}

enum KernelSymbol {
    Plain,
    /// Multiply the symbol by `i xi_axis` (gradient kernel).
    Gradient(usize),
}

fn kernel_from_symbol(
    report: &SymbolReport,
    law: &TensionLaw,
    t: f64,
    grid: FftGrid,
    which: KernelSymbol,
) -> Result<KernelGrid> {
    let n = grid.n;
    // symbol samples: nine real planes (or imaginary for the gradient)
    let mut planes: Vec<Vec<Complex64>> =
        vec![vec![Complex64::new(0.0, 0.0); n * n]; 9];
    for ki in 0..n {
        let x1 = grid.freq(ki);
        for kj in 0..n {
            let x2 = grid.freq(kj);
            let xi = Vector2::new(x1, x2);
            let e = exp_neg_symbol(report, law, xi, t)?;
            let factor = match which {
                KernelSymbol::Plain => Complex64::new(1.0, 0.0),
                KernelSymbol::Gradient(axis) => {
                    Complex64::new(0.0, if axis == 0 { x1 } else { x2 })
                }
            };
            let idx = ki * n + kj;
            for r in 0..3 {
                for c in 0..3 {
                    planes[3 * r + c][idx] = factor * e[(r, c)];
                }
            }
        }
    }
    let scale = (grid.dxi() / std::f64::consts::TAU).powi(2);
    let mut entries = Vec::with_capacity(9);
    for plane in planes.iter_mut() {
        ifft2_inplace(plane, n);
        entries.push(plane.iter().map(|z| z.re * scale).collect::<Vec<f64>>());
    }
    Ok(KernelGrid { grid, t, entries })
}

/// Real-space semigroup kernel `K_A(t, theta) = F^{-1}[exp(-t L_A)]`.
///
/// Fails with `GridTooCoarse` when the symbol has not decayed at the
/// frequency boundary (relative magnitude above 1e-8), which would alias.
pub fn semigroup_kernel(
    report: &SymbolReport,
    law: &TensionLaw,
    t: f64,
    grid: FftGrid,
) -> Result<KernelGrid> {
    // symbol decay check at the corner of the frequency box
    let corner = Vector2::new(grid.xi_max * (1.0 - 1.0 / grid.n as f64), 0.0);
    let e = exp_neg_symbol(report, law, corner, t)?;
    if e.norm() > 1e-8 {
        return Err(CoreError::GridTooCoarse {
            detail: format!(
                "symbol magnitude {:.3e} at the frequency boundary |xi| = {}",
                e.norm(),
                corner.norm()
            ),
        });
    }
    kernel_from_symbol(report, law, t, grid, KernelSymbol::Plain)
}

/// Gradient kernel `F^{-1}[i xi_axis exp(-t L_A)]`.
pub fn semigroup_gradient_kernel(
    report: &SymbolReport,
    law: &TensionLaw,
    t: f64,
    grid: FftGrid,
    axis: usize,
) -> Result<KernelGrid> {
    kernel_from_symbol(report, law, t, grid, KernelSymbol::Gradient(axis))
}

/// Max relative (to the peak of `k_t`) deviation of the self-similarity
/// `K(t, theta) = t^{-2} K(1, theta / t)`, compared at matching nodes.
///
/// Requires `k_one.grid.xi_max = t * k_t.grid.xi_max` and equal n, so both
/// kernels sample the same spatial points after rescaling.
pub fn self_similarity_error(k_t: &KernelGrid, k_one: &KernelGrid) -> f64 {
    assert_eq!(k_t.grid.n, k_one.grid.n);
    let t = k_t.t;
    assert!(
        ((k_one.grid.xi_max - t * k_t.grid.xi_max) / k_one.grid.xi_max).abs() < 1e-12,
        "grids not paired for self-similarity"
    );
    let n = k_t.grid.n;
    let peak = k_t.peak();
    let inv_t2 = 1.0 / (t * t);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let a = k_t.matrix_at(i, j);
            let b = k_one.matrix_at(i, j) * inv_t2;
            worst = worst.max((a - b).norm());
        }
    }
    worst / peak
}

/// Relative deviation of `d^beta L_A` from degree `1 - |beta|` homogeneity,
/// estimated by nested central differences with step `1e-4 |xi|`.
pub fn symbol_homogeneity_check(
    report: &SymbolReport,
    law: &TensionLaw,
    beta: [usize; 2],
    xi: Vector2<f64>,
) -> Result<f64> {
    let order = beta[0] + beta[1];
    assert!(order <= 3, "only multi-indices up to order 3");
    fn derivative(
        report: &SymbolReport,
        law: &TensionLaw,
        beta: [usize; 2],
        xi: Vector2<f64>,
        h: f64,
    ) -> Result<Matrix3<f64>> {
        if beta == [0, 0] {
            return full_symbol(report, law, xi);
        }
        let (axis, next) = if beta[0] > 0 {
            (0usize, [beta[0] - 1, beta[1]])
        } else {
            (1usize, [beta[0], beta[1] - 1])
        };
        let mut dp = xi;
        let mut dm = xi;
        dp[axis] += h;
        dm[axis] -= h;
        let fp = derivative(report, law, next, dp, h)?;
        let fm = derivative(report, law, next, dm, h)?;
        Ok((fp - fm) / (2.0 * h))
    }
    let h = 1e-4 * xi.norm();
    let d1 = derivative(report, law, beta, xi, h)?;
    let d2 = derivative(report, law, beta, 2.0 * xi, h)?;
    let factor = 2f64.powi(1 - order as i32);
    Ok((d2 - factor * d1).norm() / d1.norm())
}

/// Windowed planar transforms of `1/|B theta|` and
/// `B theta ox B theta / |B theta|^3` on one lattice; returns four planes
/// (inv, t00, t01, t11) scaled to approximate the continuum transforms.
#[doc(hidden)]
pub fn debug_windowed_planes(b: &Matrix2<f64>, n: usize, theta_max: f64) -> Vec<Vec<f64>> {
    windowed_planes(b, n, theta_max)
}

fn windowed_planes(b: &Matrix2<f64>, n: usize, theta_max: f64) -> Vec<Vec<f64>> {
    let dtheta = 2.0 * theta_max / n as f64;
    let r1 = 0.5 * theta_max;
    let r2 = 0.92 * theta_max;
    let window = |r: f64| -> f64 {
        if r <= r1 {
            1.0
        } else if r >= r2 {
            0.0
        } else {
            let s = (r - r1) / (r2 - r1);
            1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
        }
    };
    // Cell averages near the origin: point sampling of 1/r-type functions
    // leaves an O(dtheta) constant offset in the transform.
    let near = 6i64;
    let cell_avg = |c1: f64, c2: f64, sub: usize| -> (f64, Matrix2<f64>) {
        let mut avg_inv = 0.0;
        let mut avg_tensor = Matrix2::zeros();
        for a in 0..sub {
            for c in 0..sub {
                let t = Vector2::new(
                    c1 + (-0.5 + (a as f64 + 0.5) / sub as f64) * dtheta,
                    c2 + (-0.5 + (c as f64 + 0.5) / sub as f64) * dtheta,
                );
                let bt = b * t;
                let r = bt.norm().max(1e-300);
                avg_inv += 1.0 / r;
                avg_tensor += bt * bt.transpose() / (r * r * r);
            }
        }
        (
            avg_inv / (sub * sub) as f64,
            avg_tensor / (sub * sub) as f64,
        )
    };
    let mut planes: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n * n]; 4];
    for i in 0..n {
        let wi = {
            let k = i as i64;
            if k < n as i64 / 2 { k } else { k - n as i64 }
        };
        let t1 = wi as f64 * dtheta;
        for j in 0..n {
            let wj = {
                let k = j as i64;
                if k < n as i64 / 2 { k } else { k - n as i64 }
            };
            let t2 = wj as f64 * dtheta;
            let t = Vector2::new(t1, t2);
            let idx = i * n + j;
            if wi.abs() <= near && wj.abs() <= near {
                let sub = if wi == 0 && wj == 0 { 64 } else { 16 };
                let (ai, at) = cell_avg(t1, t2, sub);
                planes[0][idx] = Complex64::new(ai, 0.0);
                planes[1][idx] = Complex64::new(at[(0, 0)], 0.0);
                planes[2][idx] = Complex64::new(at[(0, 1)], 0.0);
                planes[3][idx] = Complex64::new(at[(1, 1)], 0.0);
                continue;
            }
            let w = window(t.norm());
            let bt = b * t;
            let r = bt.norm();
            planes[0][idx] = Complex64::new(w / r, 0.0);
            let ten = bt * bt.transpose() / (r * r * r);
            planes[1][idx] = Complex64::new(w * ten[(0, 0)], 0.0);
            planes[2][idx] = Complex64::new(w * ten[(0, 1)], 0.0);
            planes[3][idx] = Complex64::new(w * ten[(1, 1)], 0.0);
        }
    }
    // the integrands are even, so the inverse transform equals the forward
    let scale = dtheta * dtheta;
    planes
        .into_iter()
        .map(|mut p| {
            ifft2_inplace(&mut p, n);
            p.iter().map(|z| z.re * scale).collect()
        })
        .collect()
}

/// Residual pair of the planar Fourier identities for `1/|B theta|` and
/// `B theta ox B theta / |B theta|^3`: windowed lattice transforms on the
/// grid and its dtheta/2 refinement, Richardson-combined (the lattice bias
/// is quadratic in dtheta) and compared against the closed forms on
/// mid-band frequencies. `grid.xi_max` is read as the half box size in
/// theta; `grid.n` as the coarse lattice size.
pub fn fourier_identity_check(b: &Matrix2<f64>, grid: FftGrid) -> Result<(f64, f64)> {
    let n = grid.n;
    let theta_max = grid.xi_max;
    if b.determinant().abs() < 1e-12 {
        return Err(CoreError::GridTooCoarse {
            detail: "B not invertible".into(),
        });
    }
    let b_inv = b.try_inverse().unwrap();
    let det_b = b.determinant();
    let coarse = windowed_planes(b, n, theta_max);
    let fine = windowed_planes(b, 2 * n, theta_max);
    let dtheta = 2.0 * theta_max / n as f64;
    let dxi_out = std::f64::consts::TAU / (n as f64 * dtheta);
    let xi_lo = 12.0 * dxi_out;
    let xi_hi = 0.15 * (std::f64::consts::PI / dtheta);
    let mut worst_inv: f64 = 0.0;
    let mut worst_tensor: f64 = 0.0;
    let pick = |plane_c: &Vec<f64>, plane_f: &Vec<f64>, i: usize, j: usize| -> f64 {
        // shared frequencies: same index on both lattices (equal dxi)
        (4.0 * plane_f[i * 2 * n + j] - plane_c[i * n + j]) / 3.0
    };
    for i in 0..n / 2 {
        let x1 = i as f64 * dxi_out;
        for j in 0..n / 2 {
            let x2 = j as f64 * dxi_out;
            let xi = Vector2::new(x1, x2);
            let r = xi.norm();
            if r < xi_lo || r > xi_hi {
                continue;
            }
            let got_inv = pick(&coarse[0], &fine[0], i, j);
            let want_inv = std::f64::consts::TAU / (det_b * (b_inv * xi).norm());
            worst_inv = worst_inv.max((got_inv - want_inv).abs() / want_inv);
            let bxi = b_inv * xi;
            let nb = bxi.norm();
            let want = std::f64::consts::TAU / det_b
                * (Matrix2::identity() / nb - bxi * bxi.transpose() / (nb * nb * nb));
            let got = Matrix2::new(
                pick(&coarse[1], &fine[1], i, j),
                pick(&coarse[2], &fine[2], i, j),
                pick(&coarse[2], &fine[2], i, j),
                pick(&coarse[3], &fine[3], i, j),
            );
            worst_tensor = worst_tensor.max((got - want).norm() / want.norm());
        }
    }
    Ok((worst_inv, worst_tensor))
}

/// Pointwise linearized tension tensor `T_S(grad X)` at a node: acts on
/// ambient 3x3 gradient matrices.
#[derive(Debug, Clone)]
pub struct TensionLinearization {
    pub grad: Matrix3<f64>,
    pub lambda: f64,
    /// `T(lambda)/lambda`
    pub f1: f64,
    /// `T'(lambda) - T(lambda)/lambda`
    pub coeff: f64,
}

impl TensionLinearization {
    pub fn apply(&self, w: &Matrix3<f64>) -> Matrix3<f64> {
        let inner = self.grad.dot(w);
        self.f1 * w + self.coeff * inner / (self.lambda * self.lambda) * self.grad
    }

    pub fn entry(&self, l: usize, i: usize, q: usize, m: usize) -> f64 {
        let mut v = 0.0;
        if l == q && i == m {
            v += self.f1;
        }
        v += self.coeff * self.grad[(l, i)] * self.grad[(q, m)] / (self.lambda * self.lambda);
        v
    }
}

/// Build `T_S` at a node of a membrane state.
pub fn linearized_tension(
    state: &MembraneState,
    law: &TensionLaw,
    node: usize,
) -> Result<TensionLinearization> {
    let grads = crate::membrane::surface_gradient(state);
    let grad = grads[node];
    let lambda = grad.norm();
    law.require_in_range(lambda)?;
    Ok(TensionLinearization {
        grad,
        lambda,
        f1: law.t_over_lambda(lambda),
        coeff: law.deriv(lambda) - law.t_over_lambda(lambda),
    })
}

/// Max-node relative difference between the Gateaux derivative
/// `T_S(grad X) grad Y` and the central finite difference of
/// `T(|grad X + e grad Y|)(grad X + e grad Y)` at `e = +-1e-6`.
pub fn gateaux_check(
    state: &MembraneState,
    law: &TensionLaw,
    perturbation: &MembraneState,
) -> Result<f64> {
    let gx = crate::membrane::surface_gradient(state);
    let gy = crate::membrane::surface_gradient(perturbation);
    let eps = 1e-6;
    let mut scale: f64 = 0.0;
    let mut worst: f64 = 0.0;
    for n in 0..state.grid.n_nodes() {
        let lambda = gx[n].norm();
        law.require_in_range(lambda)?;
        let ts = TensionLinearization {
            grad: gx[n],
            lambda,
            f1: law.t_over_lambda(lambda),
            coeff: law.deriv(lambda) - law.t_over_lambda(lambda),
        };
        let lhs = ts.apply(&gy[n]);
        let gp = gx[n] + eps * gy[n];
        let gm = gx[n] - eps * gy[n];
        let tp = law.t_over_lambda(gp.norm());
        let tm = law.t_over_lambda(gm.norm());
        let fd = (tp * gp - tm * gm) / (2.0 * eps);
        worst = worst.max((lhs - fd).norm());
        scale = scale.max(fd.norm());
    }
    Ok(worst / scale.max(1e-300))
}

//! Self-contained validation suites over the closed-form quantities, plus
//! the JSON symbol report consumed by the command-line interface.

use crate::atlas;
use crate::bie::RotatedQuadrature;
use crate::harmonics::CoeffSet;
use crate::kernels;
use crate::membrane::SphereGrid;
use crate::spectral::{self, FftGrid, SectorSpec};
use crate::tension::{LawKind, TensionLaw};
use crate::Result;
use nalgebra::{Matrix3x2, Vector2, Vector3};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One named check with its outcome.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckResult {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

fn rand_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Chart geometry suite: metric inequalities, isothermal property,
/// coordinate-ball image and partition of unity.
pub fn suite_charts(samples: usize) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut out = Vec::new();
    // chord upper bound on the whole plane
    let mut violations = 0usize;
    for _ in 0..samples {
        let t = Vector2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let e = Vector2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let chord = (atlas::stereo_to_sphere(t) - atlas::stereo_to_sphere(e)).norm();
        if chord > 2.0 * (t - e).norm() + 1e-14 {
            violations += 1;
        }
    }
    out.push(CheckResult::new(
        "chord upper bound |X(t)-X(e)| <= 2|t-e|",
        violations == 0,
        format!("{violations} violations in {samples} samples"),
    ));
    // chord lower bound inside V_R, R = sqrt(2)
    let vr = atlas::coordinate_ball_radius(std::f64::consts::SQRT_2);
    let mut violations = 0usize;
    let draw = |rng: &mut ChaCha8Rng| loop {
        let p = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if p.norm() < vr {
            return p;
        }
    };
    for _ in 0..samples {
        let t = draw(&mut rng);
        let e = draw(&mut rng);
        let chord = (atlas::stereo_to_sphere(t) - atlas::stereo_to_sphere(e)).norm();
        if chord < 2.0 / std::f64::consts::PI * (t - e).norm() - 1e-14 {
            violations += 1;
        }
    }
    out.push(CheckResult::new(
        "chord lower bound (2/pi)|t-e| inside V_R",
        violations == 0,
        format!("{violations} violations in {samples} samples"),
    ));
    // isothermal tangents by finite differences
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let t = Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let d1 = (atlas::stereo_to_sphere(t + Vector2::new(h, 0.0))
            - atlas::stereo_to_sphere(t - Vector2::new(h, 0.0)))
            / (2.0 * h);
        let d2 = (atlas::stereo_to_sphere(t + Vector2::new(0.0, h))
            - atlas::stereo_to_sphere(t - Vector2::new(0.0, h)))
            / (2.0 * h);
        worst = worst.max(d1.dot(&d2).abs());
        worst = worst.max((d1.norm() - d2.norm()).abs());
        worst = worst.max((d1.norm() - atlas::metric_factor(t)).abs());
    }
    out.push(CheckResult::new(
        "isothermal coordinate tangents",
        worst < 1e-7,
        format!("worst deviation {worst:.3e}"),
    ));
    // partition of unity on random sphere points
    let chart_atlas = atlas::ChartAtlas::icosahedral();
    let mut worst: f64 = 0.0;
    let mut support_violations = 0usize;
    for _ in 0..samples.min(5000) {
        let x = rand_unit(&mut rng);
        match chart_atlas.partition_weights(x) {
            Ok(w) => {
                let sum: f64 = w.iter().sum();
                worst = worst.max((sum - 1.0).abs());
                for (n, wi) in w.iter().enumerate() {
                    if (x - chart_atlas.centers[n]).norm() >= 2.0 * chart_atlas.radius
                        && *wi != 0.0
                    {
                        support_violations += 1;
                    }
                }
            }
            Err(_) => support_violations += 1,
        }
    }
    out.push(CheckResult::new(
        "partition of unity sums to one with compact bumps",
        worst < 1e-14 && support_violations == 0,
        format!("worst sum deviation {worst:.3e}, {support_violations} support violations"),
    ));
    out
}

/// Single-layer spherical-harmonic eigenvalue suite at band limit `l_max`,
/// with a convergence comparison against half resolution.
pub fn suite_layer(l_max: usize) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let rel_err = |l_max: usize, l: usize, m: usize| -> f64 {
        let grid = SphereGrid::new(l_max);
        let rq = RotatedQuadrature::new(grid.clone(), grid.n_colat + 4);
        let mut c = CoeffSet::zeros(grid.l_max);
        c.set(l, m, Complex64::new(1.0, 0.0));
        let vals = grid.synthesize(&c);
        let got = rq.single_layer_scalar_field(&c);
        let factor = 1.0 / (2 * l + 1) as f64;
        let mut num = 0.0_f64;
        let mut den = 0.0_f64;
        for (g, v) in got.iter().zip(&vals) {
            num = num.max((g - factor * v).abs());
            den = den.max(v.abs());
        }
        num / den
    };
    for (l, m) in [(0usize, 0usize), (1, 0), (1, 1), (2, 0), (2, 1)] {
        let err = rel_err(l_max, l, m);
        out.push(CheckResult::new(
            &format!("single layer eigenvalue 1/(2l+1) at l={l} m={m}"),
            err < 1e-3,
            format!("rel error {err:.3e} at L={l_max}"),
        ));
    }
    // s00 eigenvalues with monotone convergence over L/2 -> L
    let s00_err = |l_max: usize, l: usize| -> f64 {
        let grid = SphereGrid::new(l_max);
        let rq = RotatedQuadrature::new(grid.clone(), grid.n_colat + 4);
        let mut c = CoeffSet::zeros(grid.l_max);
        c.set(l, 0, Complex64::new(1.0, 0.0));
        let vals = grid.synthesize(&c);
        let got = rq.s00_apply(&vals);
        let lf = l as f64;
        let eig = -lf * (lf + 1.0) / (2.0 * (2.0 * lf + 1.0));
        let mut num = 0.0_f64;
        let mut den = 0.0_f64;
        for (g, v) in got.iter().zip(&vals) {
            num = num.max((g - eig * v).abs());
            den = den.max((eig * v).abs());
        }
        num / den
    };
    for l in [1usize, 2] {
        let coarse = s00_err(l_max / 2, l);
        let fine = s00_err(l_max, l);
        let floor = 1e-10;
        out.push(CheckResult::new(
            &format!("s00 eigenvalue -l(l+1)/(2(2l+1)) at l={l}"),
            fine < 1e-3 && fine.max(floor) <= coarse.max(floor),
            format!("rel error {fine:.3e} at L={l_max}, {coarse:.3e} at L={}", l_max / 2),
        ));
    }
    out
}

/// Smooth polynomial chart map used by the kernel suite.
struct PolyMap;
impl kernels::ChartMap for PolyMap {
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

/// Kernel algebra suite: remainder identity across both code paths, affine
/// degeneration, odd-power identities and the p.v. divergence identity.
pub fn suite_kernels() -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut out = Vec::new();
    let map = PolyMap;
    let mut worst: f64 = 0.0;
    let mut tested = 0;
    while tested < 1000 {
        let t = Vector2::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
        let e = Vector2::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
        if (t - e).norm() < 1e-3 {
            continue;
        }
        tested += 1;
        let (k1a, k2a) = kernels::remainder_kernel(&map, t, e).unwrap();
        let (k1b, k2b) = kernels::remainder_kernel_expanded(&map, t, e).unwrap();
        for i in 0..2 {
            let scale = k1a[i].norm().max(k2a[i].norm()).max(1.0);
            worst = worst.max((k1a[i] - k1b[i]).norm() / scale);
            worst = worst.max((k2a[i] - k2b[i]).norm() / scale);
        }
    }
    out.push(CheckResult::new(
        "remainder kernels agree across both code paths",
        worst < 1e-10,
        format!("worst relative mismatch {worst:.3e} over 1000 samples"),
    ));
    // affine maps: E and K vanish identically
    let aff = kernels::AffineMap {
        a: Matrix3x2::new(1.0, 0.3, -0.4, 1.1, 0.2, -0.7),
        b: Vector3::new(0.5, -1.0, 2.0),
    };
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let t = Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let e = Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        if (t - e).norm() < 0.05 {
            continue;
        }
        worst = worst.max(kernels::finite_diff_remainder(&aff, t, e).unwrap().norm());
        let (k1, k2) = kernels::remainder_kernel(&aff, t, e).unwrap();
        for i in 0..2 {
            worst = worst.max(k1[i].norm()).max(k2[i].norm());
        }
    }
    out.push(CheckResult::new(
        "finite-difference remainder vanishes for affine maps",
        worst < 1e-13,
        format!("worst magnitude {worst:.3e}"),
    ));
    // odd power identity
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let u: Vector3<f64> = Vector3::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        let v: Vector3<f64> = Vector3::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        if u.norm() < 0.05 || v.norm() < 0.05 {
            continue;
        }
        for k in [1u32, 3, 5] {
            let direct = 1.0 / u.norm().powi(k as i32) - 1.0 / v.norm().powi(k as i32);
            let fact = kernels::odd_power_difference(&u, &v, k);
            worst = worst.max((direct - fact).abs() / direct.abs().max(1e-12));
        }
    }
    out.push(CheckResult::new(
        "odd inverse-power difference identity (k = 1, 3, 5)",
        worst < 1e-12,
        format!("worst relative mismatch {worst:.3e}"),
    ));
    // p.v. divergence identity
    let iso = Matrix3x2::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0);
    let aniso = Matrix3x2::new(3.0, 0.0, 0.0, 1.0, 0.0, 0.0);
    for (name, a) in [("isotropic", iso), ("anisotropic 3:1", aniso)] {
        let rep = kernels::pv_annulus_check(&a, 0.1, 50.0, 48, 64).unwrap();
        let res = rep.divergence_residual();
        out.push(CheckResult::new(
            &format!("divergence theorem on the annulus, {name} A"),
            res < 1e-6,
            format!("residual {res:.3e}"),
        ));
        let rep2 = kernels::pv_annulus_check(&a, 0.01, 200.0, 64, 64).unwrap();
        let mag = rep2.combined_pv_magnitude();
        out.push(CheckResult::new(
            &format!("principal value vanishes, {name} A"),
            mag < 1e-4,
            format!("magnitude {mag:.3e} at (0.01, 200)"),
        ));
    }
    out
}

fn random_admissible(
    rng: &mut ChaCha8Rng,
) -> (spectral::SymbolReport, TensionLaw) {
    let rep = loop {
        let a = Matrix3x2::from_fn(|_, _| rng.random_range(-2.0..2.0));
        if let Ok(rep) = spectral::matrix_factors(a) {
            if rep.frozen.sigma2 > 0.2 && rep.frozen.sigma1 < 3.0 {
                break rep;
            }
        }
    };
    let law = if rng.random_range(0..2) == 0 {
        TensionLaw::hookean(rng.random_range(0.3..3.0))
    } else {
        TensionLaw::new(
            LawKind::Affine {
                k0: rng.random_range(0.2..2.0),
                lambda0: 0.0,
                c: rng.random_range(0.1..1.0),
            },
            1e-3,
            1e3,
            false,
        )
        .unwrap()
    };
    (rep, law)
}

/// Frozen-symbol suite: exact spectrum, eigenvalue sandwich, coercivity,
/// mu bounds and resolvent brackets, all with zero tolerated violations.
pub fn suite_symbol(samples: usize) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut out = Vec::new();
    // exact spectrum at the isometric embedding
    let rep = spectral::matrix_factors(Matrix3x2::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0)).unwrap();
    let eigs =
        spectral::full_symbol_eigs(&rep, &TensionLaw::hookean(1.0), Vector2::new(1.0, 0.0))
            .unwrap();
    let mut ev: Vec<f64> = eigs.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let exact = (ev[0] - 0.25).abs().max((ev[1] - 0.25).abs()).max((ev[2] - 0.5).abs());
    out.push(CheckResult::new(
        "isometric identity-law spectrum {1/4, 1/4, 1/2}",
        exact < 1e-12,
        format!("max deviation {exact:.3e}"),
    ));
    // sandwich + positivity + mu bounds
    let mut violations = 0usize;
    let mut count = 0usize;
    while count < samples {
        let (rep, law) = random_admissible(&mut rng);
        let xi = Vector2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        if xi.norm() < 0.05 {
            continue;
        }
        count += 1;
        let s1 = rep.frozen.sigma1;
        let s2 = rep.frozen.sigma2;
        let mu = rep.mu_of(xi).unwrap();
        if mu < s2 / (s1 * s1) / xi.norm() - 1e-12 || mu > s1 / (s2 * s2) / xi.norm() + 1e-12 {
            violations += 1;
        }
        let zm = law.z_min(s1, s2);
        let zmax = law.z_max_symbol(s1);
        let l = spectral::full_symbol(&rep, &law, xi).unwrap();
        let norm = l.svd(false, false).singular_values.max();
        if norm < s2 * zm / (4.0 * s1 * s1) * xi.norm() - 1e-10
            || norm > s1 * zmax / (2.0 * s2 * s2) * xi.norm() + 1e-10
        {
            violations += 1;
        }
        for _ in 0..10 {
            let w = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if w.norm() < 1e-3 {
                continue;
            }
            if w.dot(&(l * w)) <= 0.0 {
                violations += 1;
            }
        }
    }
    out.push(CheckResult::new(
        "multiplier sandwich, coercivity and mu bounds",
        violations == 0,
        format!("{violations} violations in {samples} samples"),
    ));
    // resolvent brackets in the default sector
    let sector = SectorSpec::default();
    let mut violations = 0usize;
    let mut count = 0usize;
    while count < samples {
        let (rep, law) = random_admissible(&mut rng);
        let xi = Vector2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        if xi.norm() < 0.05 {
            continue;
        }
        let rad = 10f64.powf(rng.random_range(-2.0..2.5));
        let ang = rng.random_range(-0.75..0.75) * std::f64::consts::PI;
        let z = Complex64::new(sector.omega, 0.0) + Complex64::from_polar(rad, ang);
        if !sector.contains(z) {
            continue;
        }
        count += 1;
        match spectral::resolvent_norm(&rep, &law, z, xi, &sector) {
            Ok(s) => {
                if !s.within_bounds() {
                    violations += 1;
                }
            }
            Err(_) => violations += 1,
        }
    }
    out.push(CheckResult::new(
        "resolvent norm brackets in the sector",
        violations == 0,
        format!("{violations} violations in {samples} samples"),
    ));
    out
}

/// Semigroup kernel suite: unit mass, self-similarity, decay-exponent fits.
pub fn suite_semigroup(n: usize) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let rep = spectral::matrix_factors(Matrix3x2::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0)).unwrap();
    let law = TensionLaw::hookean(1.0);
    let k1 = spectral::semigroup_kernel(&rep, &law, 1.0, FftGrid { n, xi_max: 80.0 }).unwrap();
    let k2 = spectral::semigroup_kernel(&rep, &law, 2.0, FftGrid { n, xi_max: 40.0 }).unwrap();
    let mass = k1.unit_mass_error();
    out.push(CheckResult::new(
        "kernel mass equals the identity",
        mass < 1e-6,
        format!("deviation {mass:.3e}"),
    ));
    let ss = spectral::self_similarity_error(&k2, &k1);
    out.push(CheckResult::new(
        "kernel self-similarity K(2,x) = K(1,x/2)/4",
        ss < 1e-6,
        format!("relative deviation {ss:.3e}"),
    ));
    let g4 = FftGrid { n, xi_max: 20.0 };
    let k4 = spectral::semigroup_kernel(&rep, &law, 4.0, g4).unwrap();
    let p = k4.decay_exponent(8.0, 0.5 * g4.theta_max());
    out.push(CheckResult::new(
        "kernel decay exponent 3 +- 0.3",
        (p - 3.0).abs() < 0.3,
        format!("fitted exponent {p:.3}"),
    ));
    let gk = spectral::semigroup_gradient_kernel(&rep, &law, 4.0, g4, 0).unwrap();
    let pg = gk.decay_exponent(8.0, 0.5 * g4.theta_max());
    out.push(CheckResult::new(
        "gradient kernel decay exponent 4 +- 0.3",
        (pg - 4.0).abs() < 0.3,
        format!("fitted exponent {pg:.3}"),
    ));
    out
}

/// Named suite selector for the CLI.
pub fn run_suite(name: &str, l_max: usize) -> Option<Vec<CheckResult>> {
    match name {
        "charts" => Some(suite_charts(10_000)),
        "layer" => Some(suite_layer(l_max)),
        "kernels" => Some(suite_kernels()),
        "symbol" => Some(suite_symbol(1000)),
        "semigroup" => Some(suite_semigroup(512)),
        "all" => {
            let mut all = suite_charts(10_000);
            all.extend(suite_layer(l_max));
            all.extend(suite_kernels());
            all.extend(suite_symbol(1000));
            all.extend(suite_semigroup(512));
            Some(all)
        }
        _ => None,
    }
}

/// One sampled frequency entry of the symbol report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub xi: [f64; 2],
    pub eigenvalues: [f64; 3],
    pub operator_norm: f64,
}

/// JSON report for one frozen matrix and law.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymbolJson {
    pub a: [[f64; 2]; 3],
    pub sigma1: f64,
    pub sigma2: f64,
    pub det_b: f64,
    pub lambda_f: f64,
    pub law: TensionLaw,
    pub sector: SectorSpec,
    pub spectra: Vec<SpectrumSample>,
    pub resolvent_boundary_norms: Vec<[f64; 3]>,
    pub violations: Vec<String>,
    pub unit_mass_error: f64,
    pub self_similarity_error: f64,
    pub decay_exponent_kernel: f64,
    pub decay_exponent_gradient: f64,
}

/// Assemble the full symbol report: factors, sampled spectra, resolvent
/// sweep on the sector boundary, semigroup kernel diagnostics and the
/// bound-violation list (empty on success).
pub fn build_symbol_report(
    a: Matrix3x2<f64>,
    law: &TensionLaw,
    sector: &SectorSpec,
    fft_n: usize,
) -> Result<SymbolJson> {
    let rep = spectral::matrix_factors(a)?;
    let mut violations = Vec::new();
    let s1 = rep.frozen.sigma1;
    let s2 = rep.frozen.sigma2;
    let zm = law.z_min(s1, s2);
    let zmax = law.z_max_symbol(s1);
    let mut spectra = Vec::new();
    for k in 0..24 {
        let ang = std::f64::consts::TAU * k as f64 / 24.0;
        let r = 10f64.powf(-1.0 + 0.5 * (k % 5) as f64);
        let xi = Vector2::new(r * ang.cos(), r * ang.sin());
        let l = spectral::full_symbol(&rep, law, xi)?;
        let eigs = spectral::full_symbol_eigs(&rep, law, xi)?;
        let norm = l.svd(false, false).singular_values.max();
        if norm < s2 * zm / (4.0 * s1 * s1) * xi.norm() - 1e-10
            || norm > s1 * zmax / (2.0 * s2 * s2) * xi.norm() + 1e-10
        {
            violations.push(format!("multiplier norm sandwich violated at xi = {xi:?}"));
        }
        let mu = rep.mu_of(xi)?;
        for ev in eigs.iter() {
            if *ev < 0.25 * mu * zm * xi.norm_squared() - 1e-9
                || *ev > 0.5 * mu * zmax * xi.norm_squared() + 1e-9
            {
                violations.push(format!("eigenvalue sandwich violated at xi = {xi:?}"));
            }
        }
        spectra.push(SpectrumSample {
            xi: [xi.x, xi.y],
            eigenvalues: [eigs[0], eigs[1], eigs[2]],
            operator_norm: norm,
        });
    }
    let mut resolvent_boundary_norms = Vec::new();
    for z in sector.boundary_samples() {
        let s = spectral::resolvent_norm(&rep, law, z, Vector2::new(1.0, 0.3), sector)?;
        if !s.within_bounds() {
            violations.push(format!("resolvent bracket violated at z = {z}"));
        }
        resolvent_boundary_norms.push([s.z_re, s.z_im, s.norm]);
    }
    let k1 = spectral::semigroup_kernel(&rep, law, 1.0, FftGrid { n: fft_n, xi_max: 80.0 })?;
    let k2 = spectral::semigroup_kernel(&rep, law, 2.0, FftGrid { n: fft_n, xi_max: 40.0 })?;
    let unit_mass_error = k1.unit_mass_error();
    let self_similarity_error = spectral::self_similarity_error(&k2, &k1);
    if unit_mass_error > 1e-6 {
        violations.push(format!("kernel mass deviates by {unit_mass_error:.3e}"));
    }
    if self_similarity_error > 1e-6 {
        violations.push(format!(
            "kernel self-similarity deviates by {self_similarity_error:.3e}"
        ));
    }
    let g4 = FftGrid { n: fft_n, xi_max: 20.0 };
    let k4 = spectral::semigroup_kernel(&rep, law, 4.0, g4)?;
    let decay_exponent_kernel = k4.decay_exponent(8.0, 0.5 * g4.theta_max());
    let gk = spectral::semigroup_gradient_kernel(&rep, law, 4.0, g4, 0)?;
    let decay_exponent_gradient = gk.decay_exponent(8.0, 0.5 * g4.theta_max());
    if (decay_exponent_kernel - 3.0).abs() > 0.3 {
        violations.push(format!(
            "kernel decay exponent {decay_exponent_kernel:.3} outside 3 +- 0.3"
        ));
    }
    if (decay_exponent_gradient - 4.0).abs() > 0.3 {
        violations.push(format!(
            "gradient kernel decay exponent {decay_exponent_gradient:.3} outside 4 +- 0.3"
        ));
    }
    Ok(SymbolJson {
        a: [
            [a[(0, 0)], a[(0, 1)]],
            [a[(1, 0)], a[(1, 1)]],
            [a[(2, 0)], a[(2, 1)]],
        ],
        sigma1: s1,
        sigma2: s2,
        det_b: rep.det_b,
        lambda_f: rep.lambda_f,
        law: law.clone(),
        sector: sector.clone(),
        spectra,
        resolvent_boundary_norms,
        violations,
        unit_mass_error,
        self_similarity_error,
        decay_exponent_kernel,
        decay_exponent_gradient,
    })
}

//! Stereographic-projection chart system on the unit sphere.
//!
//! Charts are rotated copies of the standard stereographic projection from
//! the point (0,0,1), so each chart maps the plane onto the sphere with the
//! chart center at the image of the origin. A smooth partition of unity
//! subordinate to the chart balls localizes surface quantities.

use crate::error::CoreError;
use crate::Result;
use nalgebra::{Matrix3, Vector2, Vector3};

/// Image of the plane point under the standard stereographic projection
/// (projection point (0,0,1), origin maps to the south pole).
pub fn stereo_to_sphere(theta: Vector2<f64>) -> Vector3<f64> {
    let r2 = theta.norm_squared();
    let d = 1.0 + r2;
    Vector3::new(2.0 * theta.x / d, 2.0 * theta.y / d, (-1.0 + r2) / d)
}

/// Either a finite chart point or the point at infinity (the projection point).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChartPoint {
    Finite(Vector2<f64>),
    Infinity,
}

/// Inverse of [`stereo_to_sphere`]; fails within `1e-12` of the projection point.
pub fn sphere_to_stereo(x: Vector3<f64>) -> Result<Vector2<f64>> {
    let gap = 1.0 - x.z;
    if gap < 1e-12 {
        return Err(CoreError::PoleSingular { gap });
    }
    Ok(Vector2::new(x.x / gap, x.y / gap))
}

/// Inverse projection with the projection point mapped to an explicit flag.
pub fn sphere_to_chart_point(x: Vector3<f64>) -> ChartPoint {
    match sphere_to_stereo(x) {
        Ok(theta) => ChartPoint::Finite(theta),
        Err(_) => ChartPoint::Infinity,
    }
}

/// Conformal factor of the standard stereographic chart: the common length
/// of both coordinate tangent vectors, `2 / (1 + |theta|^2)`.
pub fn metric_factor(theta: Vector2<f64>) -> f64 {
    2.0 / (1.0 + theta.norm_squared())
}

/// Radius of the coordinate ball `V_R` mapped onto the spherical cap of
/// chord radius R around the chart center.
pub fn coordinate_ball_radius(r: f64) -> f64 {
    r / (4.0 - r * r).sqrt()
}

/// Rotated stereographic chart system with a subordinate partition of unity.
#[derive(Debug, Clone)]
pub struct ChartAtlas {
    /// Chart centers on the sphere.
    pub centers: Vec<Vector3<f64>>,
    /// Rotations with `rotations[n] * (0,0,-1) = centers[n]`.
    pub rotations: Vec<Matrix3<f64>>,
    /// Chord radius of the covering balls, 0 < R < sqrt(2).
    pub radius: f64,
    /// Sharpness of the partition bump (exponent scale).
    pub bump_sharpness: f64,
}

/// Rotation taking the south pole (0,0,-1) to the given unit vector.
fn rotation_to(center: &Vector3<f64>) -> Matrix3<f64> {
    let from = Vector3::new(0.0, 0.0, -1.0);
    let c = from.dot(center);
    if c > 1.0 - 1e-14 {
        return Matrix3::identity();
    }
    if c < -1.0 + 1e-14 {
        // antipodal: rotate by pi around the x axis
        return Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
    }
    let axis = from.cross(center).normalize();
    let angle = c.clamp(-1.0, 1.0).acos();
    nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle)
        .matrix()
        .to_owned()
}

/// Vertices of the regular icosahedron scaled to the unit sphere.
fn icosahedron_vertices() -> Vec<Vector3<f64>> {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let raw = [
        (0.0, 1.0, phi),
        (0.0, -1.0, phi),
        (0.0, 1.0, -phi),
        (0.0, -1.0, -phi),
        (1.0, phi, 0.0),
        (-1.0, phi, 0.0),
        (1.0, -phi, 0.0),
        (-1.0, -phi, 0.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, 1.0),
        (phi, 0.0, -1.0),
        (-phi, 0.0, -1.0),
    ];
    raw.iter()
        .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
        .collect()
}

impl ChartAtlas {
    /// Default atlas: 12 icosahedral charts, radius 1.2x the covering radius.
    pub fn icosahedral() -> Self {
        let centers = icosahedron_vertices();
        let covering = covering_radius(&centers, 80);
        Self::from_centers(centers, 1.2 * covering).expect("icosahedral atlas is valid")
    }

    /// Build an atlas from given unit centers and chord radius.
    pub fn from_centers(centers: Vec<Vector3<f64>>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius < std::f64::consts::SQRT_2) {
            return Err(CoreError::InvalidConfig {
                detail: format!("atlas radius {radius} not in (0, sqrt(2))"),
            });
        }
        let rotations = centers.iter().map(rotation_to).collect();
        let atlas = ChartAtlas {
            centers,
            rotations,
            radius,
            bump_sharpness: 1.0,
        };
        if !atlas.covers(80) {
            return Err(CoreError::InvalidConfig {
                detail: "atlas balls do not cover the sphere".into(),
            });
        }
        Ok(atlas)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Chart map of chart n: rotated stereographic projection.
    pub fn chart_map(&self, n: usize, theta: Vector2<f64>) -> Result<Vector3<f64>> {
        if n >= self.len() {
            return Err(CoreError::IndexOutOfRange {
                index: n,
                len: self.len(),
            });
        }
        Ok(self.rotations[n] * stereo_to_sphere(theta))
    }

    /// Inverse chart map of chart n.
    pub fn chart_inverse(&self, n: usize, x: Vector3<f64>) -> Result<Vector2<f64>> {
        if n >= self.len() {
            return Err(CoreError::IndexOutOfRange {
                index: n,
                len: self.len(),
            });
        }
        sphere_to_stereo(self.rotations[n].transpose() * x)
    }

    /// Raw (unnormalized) bump of chart n at a sphere point: compactly
    /// supported in the chord ball of radius 2R around the center.
    fn raw_bump(&self, n: usize, x: &Vector3<f64>) -> f64 {
        let d = (x - self.centers[n]).norm() / (2.0 * self.radius);
        if d >= 1.0 {
            0.0
        } else {
            (-self.bump_sharpness / (1.0 - d * d)).exp()
        }
    }

    /// Normalized partition weights at a sphere point; they sum to one.
    pub fn partition_weights(&self, x: Vector3<f64>) -> Result<Vec<f64>> {
        let raw: Vec<f64> = (0..self.len()).map(|n| self.raw_bump(n, &x)).collect();
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(CoreError::UncoveredPoint);
        }
        Ok(raw.iter().map(|b| b / total).collect())
    }

    /// Check the covering property on a dense sample grid.
    pub fn covers(&self, resolution: usize) -> bool {
        for i in 0..resolution {
            let ct = -1.0 + 2.0 * (i as f64 + 0.5) / resolution as f64;
            let st = (1.0 - ct * ct).sqrt();
            for j in 0..(2 * resolution) {
                let phi = std::f64::consts::TAU * j as f64 / (2 * resolution) as f64;
                let x = Vector3::new(st * phi.cos(), st * phi.sin(), ct);
                let covered = self.centers.iter().any(|c| (x - c).norm() < self.radius);
                if !covered {
                    return false;
                }
            }
        }
        true
    }
}

/// Covering radius (max over the sphere of the chord distance to the nearest
/// center), estimated on a dense sample grid.
pub fn covering_radius(centers: &[Vector3<f64>], resolution: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..resolution {
        let ct = -1.0 + 2.0 * (i as f64 + 0.5) / resolution as f64;
        let st = (1.0 - ct * ct).sqrt();
        for j in 0..(2 * resolution) {
            let phi = std::f64::consts::TAU * j as f64 / (2 * resolution) as f64;
            let x = Vector3::new(st * phi.cos(), st * phi.sin(), ct);
            let nearest = centers
                .iter()
                .map(|c| (x - c).norm())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(nearest);
        }
    }
    worst
}

//! Geometry of the cube `C^d` and the boundary variety `∂X = {Q = 0} ∩ C^d`.

mod chart;
mod components;
mod estimates;

pub use chart::{project_to_variety, tangent_frame, Chart, FaceQuadric, TangentFrame};
pub use components::{component_geometry, Component, ComponentReport, DIAMETER_SAFETY};
pub use estimates::{
    check_slab, check_two_point, estimate_c_m, estimate_c_pi, max_pi_distortion, miss_ray_constant, miss_ray_infimum,
    pi_distortion, sample_surface_point, taylor_radius, taylor_radius_min, PiEstimate, SlabReport, TwoPointReport,
    C_PI_SAFETY, MISS_RAY_SAFETY,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::QuadraticForm;

/// Half-width of the thickening of a face: `F' = {x ∈ ∂C : sign·x_axis >= 1/2}`.
pub const THICKENING: f64 = 0.5;

/// Relative tolerance for a point to count as lying on `∂X`.
pub const TAU_SURFACE: f64 = 1e-12;

/// The face `{x : x_axis = sign, ||x|| = 1}` of the cube.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Face {
    pub axis: usize,
    pub sign: i8,
}

impl Face {
    pub fn new(axis: usize, sign: i8) -> Self {
        Face { axis, sign: if sign < 0 { -1 } else { 1 } }
    }

    /// A face containing `x/||x||`; the lowest coordinate index wins ties.
    pub fn containing(x: &[f64]) -> Face {
        let mut axis = 0;
        for (i, v) in x.iter().enumerate() {
            if v.abs() > x[axis].abs() {
                axis = i;
            }
        }
        Face::new(axis, if x[axis] < 0.0 { -1 } else { 1 })
    }

    pub fn all(dim: usize) -> Vec<Face> {
        (0..dim).flat_map(|a| [Face::new(a, 1), Face::new(a, -1)]).collect()
    }

    fn s(&self) -> f64 {
        f64::from(self.sign)
    }

    /// `π`: radial projection of a point of the thickened face onto the hyperplane `E`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        let sup = sup_norm(x);
        let t = self.s() * x[self.axis];
        if (sup - 1.0).abs() > 1e-9 || t < THICKENING - 1e-12 {
            return Err(Error::Domain(format!("{x:?} is not in the thickened face {:?}", self)));
        }
        let mut y: Vec<f64> = x.iter().map(|v| v / t).collect();
        y[self.axis] = self.s();
        Ok(y)
    }

    /// `π^{-1}`: back from `E` to the cube surface.
    pub fn unproject(&self, y: &[f64]) -> Result<Vec<f64>> {
        if (y[self.axis] - self.s()).abs() > 1e-9 {
            return Err(Error::Domain(format!("{y:?} is not on the hyperplane of {:?}", self)));
        }
        let sup = sup_norm(y);
        if sup > 1.0 / THICKENING + 1e-12 {
            return Err(Error::Domain(format!("{y:?} lies outside the image of the thickened face")));
        }
        let mut x: Vec<f64> = y.iter().map(|v| v / sup).collect();
        if sup == 1.0 {
            x[self.axis] = self.s();
        }
        Ok(x)
    }

    /// Coordinates of a point of `E` with the face axis dropped.
    pub fn to_local(&self, y: &[f64]) -> Vec<f64> {
        y.iter().enumerate().filter(|(i, _)| *i != self.axis).map(|(_, v)| *v).collect()
    }

    pub fn from_local(&self, local: &[f64]) -> Vec<f64> {
        let mut y = Vec::with_capacity(local.len() + 1);
        y.extend_from_slice(&local[..self.axis]);
        y.push(self.s());
        y.extend_from_slice(&local[self.axis..]);
        y
    }
}

/// A point of `∂X` with `||coords|| = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SurfacePoint {
    pub coords: Vec<f64>,
}

impl SurfacePoint {
    /// Checks both residuals against [`TAU_SURFACE`].
    pub fn new(form: &QuadraticForm, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != form.dim() {
            return Err(Error::DimensionMismatch { expected: form.dim(), got: coords.len() });
        }
        let p = SurfacePoint { coords };
        let (q, s) = p.residuals(form);
        if !(q <= TAU_SURFACE && s <= TAU_SURFACE) {
            return Err(Error::Domain(format!(
                "{:?} is off the variety (|Q| residual {q:e}, sup residual {s:e})",
                p.coords
            )));
        }
        Ok(p)
    }

    /// `(|Q(x)| / max|a_i|, | ||x|| - 1 |)`.
    pub fn residuals(&self, form: &QuadraticForm) -> (f64, f64) {
        let scale = form.signed_coeffs_f64().iter().fold(0.0f64, |m, c| m.max(c.abs()));
        (form.evaluate_f64(&self.coords).abs() / scale, (sup_norm(&self.coords) - 1.0).abs())
    }

    pub fn face(&self) -> Face {
        Face::containing(&self.coords)
    }
}

pub fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `x / ||x||`.
pub fn radial(x: &[f64]) -> Result<Vec<f64>> {
    let s = sup_norm(x);
    if s == 0.0 || !s.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(x.iter().map(|v| v / s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn pi_examples() {
        let top = Face::new(2, 1);
        let y = top.project(&[1.0, 0.5, 0.8]).unwrap();
        assert!(close(&y, &[1.25, 0.625, 1.0], 1e-15));
        assert_eq!(top.project(&[0.3, -0.2, 1.0]).unwrap(), vec![0.3, -0.2, 1.0]);
        assert!(matches!(top.project(&[1.0, 0.5, 0.4]), Err(Error::Domain(_))));
        assert!(top.project(&[0.5, 0.5, 0.5]).is_err());
    }

    #[test]
    fn pi_round_trip() {
        let f = Face::new(0, -1);
        for x in [[-1.0, 0.3, 0.9], [-0.7, 1.0, 0.2], [-0.5, -1.0, 1.0]] {
            let back = f.unproject(&f.project(&x).unwrap()).unwrap();
            assert!(close(&back, &x, 1e-12), "{x:?} -> {back:?}");
        }
        assert!(f.unproject(&[-1.0, 2.5, 0.0]).is_err());
        assert!(f.unproject(&[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn local_coordinates() {
        let f = Face::new(1, -1);
        assert_eq!(f.to_local(&[0.2, -1.0, 0.7]), vec![0.2, 0.7]);
        assert_eq!(f.from_local(&[0.2, 0.7]), vec![0.2, -1.0, 0.7]);
        assert_eq!(Face::containing(&[0.6, -0.8, 1.0]), Face::new(2, 1));
        assert_eq!(Face::containing(&[1.0, -1.0, 0.0]), Face::new(0, 1));
    }
}

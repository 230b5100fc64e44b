use serde::{Deserialize, Serialize};

use super::{dot, norm2, radial, sup_norm, Face, SurfacePoint};
use crate::error::{Error, Result};
use crate::forms::QuadraticForm;

/// The variety seen inside the hyperplane of a face: `sum_{i != axis} c_i y_i^2 = m_face`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceQuadric {
    pub face: Face,
    /// Coefficients in local coordinates (face axis removed).
    pub coeffs: Vec<f64>,
    pub m_face: f64,
}

impl FaceQuadric {
    pub fn new(form: &QuadraticForm, face: Face) -> Self {
        let c = form.signed_coeffs_f64();
        FaceQuadric { face, coeffs: face.to_local(c), m_face: -c[face.axis] }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.coeffs.iter().zip(y).map(|(c, v)| c * v * v).sum::<f64>() - self.m_face
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        self.coeffs.iter().zip(y).map(|(c, v)| 2.0 * c * v).collect()
    }

    /// Whether the quadric meets the closed face square `[-1, 1]^d`.
    pub fn meets_face(&self) -> bool {
        let lo: f64 = self.coeffs.iter().filter(|c| **c < 0.0).sum();
        let hi: f64 = self.coeffs.iter().filter(|c| **c > 0.0).sum();
        lo <= self.m_face && self.m_face <= hi
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

/// Orthonormal tangent basis and unit normal of the face quadric at a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentFrame {
    pub tangent: Vec<Vec<f64>>,
    pub normal: Vec<f64>,
}

pub fn tangent_frame(quadric: &FaceQuadric, p_local: &[f64]) -> Result<TangentFrame> {
    let g = quadric.gradient(p_local);
    let gn = norm2(&g);
    assert!(gn > 1e-12, "singular point of a face quadric at {p_local:?}: m_face is nonzero so this cannot happen");
    let normal: Vec<f64> = g.iter().map(|v| v / gn).collect();
    let dim = p_local.len();
    // standard basis vectors, least parallel to the normal first
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| normal[a].abs().total_cmp(&normal[b].abs()));
    let mut tangent: Vec<Vec<f64>> = Vec::with_capacity(dim - 1);
    for &j in &order {
        if tangent.len() == dim - 1 {
            break;
        }
        let mut v = vec![0.0; dim];
        v[j] = 1.0;
        for b in std::iter::once(&normal).chain(tangent.iter()) {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let n = norm2(&v);
        if n > 1e-6 {
            tangent.push(v.iter().map(|x| x / n).collect());
        }
    }
    if tangent.len() != dim - 1 {
        return Err(Error::NoConvergence("Gram-Schmidt lost rank".into()));
    }
    Ok(TangentFrame { tangent, normal })
}

/// Local coordinates on `∂X` near a base point: tangential components in the face hyperplane.
#[derive(Clone, Debug)]
pub struct Chart {
    pub base: SurfacePoint,
    pub quadric: FaceQuadric,
    pub base_local: Vec<f64>,
    pub frame: TangentFrame,
}

impl Chart {
    pub fn at(form: &QuadraticForm, p: &SurfacePoint) -> Result<Self> {
        Self::on_face(form, p, p.face())
    }

    pub fn on_face(form: &QuadraticForm, p: &SurfacePoint, face: Face) -> Result<Self> {
        let quadric = FaceQuadric::new(form, face);
        let base_local = face.to_local(&face.project(&p.coords)?);
        let frame = tangent_frame(&quadric, &base_local)?;
        Ok(Chart { base: p.clone(), quadric, base_local, frame })
    }

    pub fn face(&self) -> Face {
        self.quadric.face
    }

    /// Point of the face hyperplane in local coordinates (`π` applied).
    pub fn local(&self, x: &[f64]) -> Result<Vec<f64>> {
        let face = self.face();
        Ok(face.to_local(&face.project(x)?))
    }

    /// `φ(x)`: tangential components of `π(x) - π(p)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let y = self.local(x)?;
        let diff: Vec<f64> = y.iter().zip(&self.base_local).map(|(a, b)| a - b).collect();
        Ok(self.frame.tangent.iter().map(|t| dot(&diff, t)).collect())
    }

    /// Local point of the face quadric over `p + sum t_j T_j`, solved along the normal.
    pub fn inverse_local(&self, t: &[f64]) -> Result<Vec<f64>> {
        let mut base = self.base_local.clone();
        for (tj, v) in t.iter().zip(&self.frame.tangent) {
            base.iter_mut().zip(v).for_each(|(b, x)| *b += tj * x);
        }
        let n = &self.frame.normal;
        let c = &self.quadric.coeffs;
        let qa: f64 = c.iter().zip(n).map(|(ci, ni)| ci * ni * ni).sum();
        let qb: f64 = 2.0 * c.iter().zip(n).zip(&base).map(|((ci, ni), bi)| ci * ni * bi).sum::<f64>();
        let qc = self.quadric.value(&base);
        let s = if qa.abs() < 1e-14 * qb.abs().max(1.0) {
            if qb == 0.0 {
                return Err(Error::Domain("chart coordinate has no point on the quadric".into()));
            }
            -qc / qb
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc < 0.0 {
                return Err(Error::Domain(format!("chart coordinate {t:?} leaves the chart")));
            }
            // numerically stable roots, smallest magnitude kept
            let sq = disc.sqrt();
            let qq = -0.5 * (qb + qb.signum() * sq);
            let r1 = if qq != 0.0 { qc / qq } else { 0.0 };
            let r2 = qq / qa;
            if r1.abs() <= r2.abs() {
                r1
            } else {
                r2
            }
        };
        base.iter_mut().zip(n).for_each(|(b, ni)| *b += s * ni);
        Ok(base)
    }

    /// `φ^{-1}(t)` on the cube.
    pub fn inverse(&self, t: &[f64]) -> Result<Vec<f64>> {
        let local = self.inverse_local(t)?;
        self.face().unproject(&self.face().from_local(&local))
    }

    /// Ambient tangent direction corresponding to a local tangent vector, at the base point.
    pub fn local_vector(&self, coeffs: &[f64]) -> Vec<f64> {
        let dim = self.base_local.len();
        let mut v = vec![0.0; dim];
        for (c, t) in coeffs.iter().zip(&self.frame.tangent) {
            v.iter_mut().zip(t).for_each(|(a, b)| *a += c * b);
        }
        v
    }
}

/// Newton projection of an approximate point onto `∂X` along the face-quadric gradient.
pub fn project_to_variety(form: &QuadraticForm, v: &[f64]) -> Result<SurfacePoint> {
    if v.len() != form.dim() {
        return Err(Error::DimensionMismatch { expected: form.dim(), got: v.len() });
    }
    if !v.iter().all(|x| x.is_finite()) || (sup_norm(v) - 1.0).abs() > 0.1 {
        return Err(Error::Domain(format!("{v:?} is outside the basin of the projection")));
    }
    let x = radial(v)?;
    let face = Face::containing(&x);
    let quadric = FaceQuadric::new(form, face);
    let mut y = face.to_local(&x);
    let start = y.clone();
    let scale = quadric.max_abs_coeff().max(quadric.m_face.abs());
    let mut converged = false;
    for _ in 0..50 {
        let f = quadric.value(&y);
        if f.abs() <= 1e-15 * scale {
            converged = true;
            break;
        }
        let g = quadric.gradient(&y);
        let gg = dot(&g, &g);
        if gg == 0.0 {
            break;
        }
        y.iter_mut().zip(&g).for_each(|(yi, gi)| *yi -= f * gi / gg);
    }
    if !converged && quadric.value(&y).abs() > 1e-13 * scale {
        return Err(Error::NoConvergence(format!("projection of {v:?} did not converge in 50 steps")));
    }
    let moved = y.iter().zip(&start).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if moved > 0.5 {
        return Err(Error::Domain(format!("{v:?} is too far from the variety")));
    }
    let coords = face.unproject(&face.from_local(&y))?;
    SurfacePoint::new(form, coords)
}

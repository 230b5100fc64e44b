//! Sampled estimates of the compactness constants, each in its safe direction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dist2, dot, norm2, radial, Chart, Face, FaceQuadric, SurfacePoint};
use crate::error::Result;
use crate::forms::{mat_to_f64, PositiveForm, QuadraticForm};

pub const C_PI_SAFETY: f64 = 1.25;
pub const MISS_RAY_SAFETY: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiEstimate {
    pub c_pi: f64,
    /// Largest sampled distortion before the safety factor.
    pub max_ratio: f64,
    pub samples: usize,
    pub safety: f64,
}

/// Point of the thickened top face `F'` of `C^d` (axis `d`, sign `+`).
fn sample_thickened(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let axis = dim - 1;
    let mut x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    if rng.gen_bool(0.5) {
        x[axis] = 1.0;
    } else {
        let j = rng.gen_range(0..axis);
        x[j] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        // bias toward the lower rim, where the stretching is worst
        let t: f64 = rng.gen();
        x[axis] = 0.5 + 0.5 * t * t;
    }
    x
}

/// Distortion ratios `(|π(x)-π(y)| / |x-y|, inverse)` for one pair in `F'`.
pub fn pi_distortion(face: Face, x: &[f64], y: &[f64]) -> Result<f64> {
    let (px, py) = (face.project(x)?, face.project(y)?);
    let (a, b) = (dist2(&px, &py), dist2(x, y));
    if a == 0.0 || b == 0.0 {
        return Ok(1.0);
    }
    Ok((a / b).max(b / a))
}

fn pi_pair(rng: &mut ChaCha8Rng, face: Face, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let x = sample_thickened(rng, dim);
    if rng.gen_bool(0.5) {
        return (x.clone(), sample_thickened(rng, dim));
    }
    // close pair: perturb inside E and pull back
    let px = face.project(&x).expect("sampled in F'");
    let scale = 10f64.powf(rng.gen_range(-6.0..-1.0));
    let mut py = px;
    for (i, v) in py.iter_mut().enumerate() {
        if i != face.axis {
            *v += scale * rng.gen_range(-1.0..=1.0);
        }
    }
    match face.unproject(&py) {
        Ok(y) if face.project(&y).is_ok() => (x, y),
        // the perturbation left F': use an independent point instead
        _ => {
            let y = sample_thickened(rng, dim);
            (x, y)
        }
    }
}

/// Upper estimate of the bilipschitz constant of `π` on `F'` for `C^d`, `d >= 2`.
pub fn estimate_c_pi(d: usize, samples: usize, seed: u64) -> PiEstimate {
    let dim = d + 1;
    let face = Face::new(d, 1);
    let chunks = 64usize;
    let per = samples.div_ceil(chunks);
    let max_ratio = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut worst = 1.0f64;
            for _ in 0..per {
                let (x, y) = pi_pair(&mut rng, face, dim);
                if let Ok(r) = pi_distortion(face, &x, &y) {
                    worst = worst.max(r);
                }
            }
            worst
        })
        .reduce(|| 1.0, f64::max);
    PiEstimate { c_pi: max_ratio * C_PI_SAFETY, max_ratio, samples: per * chunks, safety: C_PI_SAFETY }
}

/// Largest distortion on `samples` fresh pairs; used to validate an estimate.
pub fn max_pi_distortion(d: usize, samples: usize, seed: u64) -> f64 {
    estimate_c_pi(d, samples, seed).max_ratio
}

fn ray_ratio(q: &PositiveForm, w: &[f64], v: &[f64]) -> f64 {
    let a = q.coeffs_f64();
    let ip: f64 = a.iter().zip(w).zip(v).map(|((c, x), y)| c * x * y).sum();
    let vv = q.eval_f64(v);
    let gamma = (ip / vv).max(0.0);
    let diff_ray: Vec<f64> = w.iter().zip(v).map(|(x, y)| x - gamma * y).collect();
    let diff: Vec<f64> = w.iter().zip(v).map(|(x, y)| x - y).collect();
    q.norm(&diff_ray) / q.norm(&diff)
}

/// Grid minimum of `||w - γv||_q / ||w - v||_q` over inequivalent pairs on the unit `q`-sphere.
///
/// For `k = 2` the grid is `n x n` angles; for `k >= 3` random pairs plus near-antipodal ones.
pub fn miss_ray_infimum(q: &PositiveForm, n: usize, seed: u64) -> f64 {
    let k = q.dim();
    if k == 1 {
        return 1.0;
    }
    let a = q.coeffs_f64();
    if k == 2 {
        let point = |t: f64| [t.cos() / a[0].sqrt(), t.sin() / a[1].sqrt()];
        return (0..n)
            .into_par_iter()
            .map(|i| {
                let w = point(std::f64::consts::TAU * i as f64 / n as f64);
                let mut best = f64::INFINITY;
                for j in 0..n {
                    // offset grid so that exact antipodes (w ~ v) never occur
                    let v = point(std::f64::consts::TAU * (j as f64 + 0.5) / n as f64);
                    best = best.min(ray_ratio(q, &w, &v));
                }
                best
            })
            .reduce(|| f64::INFINITY, f64::min);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sphere = |rng: &mut ChaCha8Rng| {
        let v: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let r = q.norm(&v);
        v.into_iter().map(|x| x / r).collect::<Vec<f64>>()
    };
    let mut best = f64::INFINITY;
    for i in 0..n * n {
        let w = sphere(&mut rng);
        let v = if i % 2 == 0 {
            sphere(&mut rng)
        } else {
            let eps = 10f64.powf(rng.gen_range(-4.0..-1.0));
            let mut v: Vec<f64> = w.iter().map(|x| -x + eps * rng.gen_range(-1.0..=1.0)).collect();
            let r = q.norm(&v);
            v.iter_mut().for_each(|x| *x /= r);
            v
        };
        if norm2(&w.iter().zip(&v).map(|(x, y)| x + y).collect::<Vec<_>>()) < 1e-12 {
            continue;
        }
        best = best.min(ray_ratio(q, &w, &v));
    }
    best
}

/// Lower estimate `c_q` of the miss-a-ray constant: grid infimum times [`MISS_RAY_SAFETY`].
pub fn miss_ray_constant(q: &PositiveForm) -> f64 {
    if q.dim() == 1 {
        return 1.0;
    }
    MISS_RAY_SAFETY * miss_ray_infimum(q, 1000, 5)
}

/// `R(ε) = ε / C` for one face, where `C` bounds the second-order term over the curvature
/// scale `2|m_face| / (sqrt d + 1)` of the gradient on `π(F')`.
pub fn taylor_radius(form: &QuadraticForm, face: Face, eps: f64) -> f64 {
    let fq = FaceQuadric::new(form, face);
    let d = form.d() as f64;
    let c = fq.max_abs_coeff() * (d.sqrt() + 1.0) / (2.0 * fq.m_face.abs());
    eps / c
}

/// Least `R(ε)` over the faces that meet `∂X`.
pub fn taylor_radius_min(form: &QuadraticForm, eps: f64) -> f64 {
    Face::all(form.dim())
        .into_iter()
        .filter(|f| FaceQuadric::new(form, *f).meets_face())
        .map(|f| taylor_radius(form, f, eps))
        .fold(f64::INFINITY, f64::min)
}

/// Random point of `∂X` on a face that meets it.
/// A uniformly seeded point of `∂X`: random face, random local point, Newton projection.
pub fn sample_surface_point(form: &QuadraticForm, rng: &mut ChaCha8Rng) -> SurfacePoint {
    let faces: Vec<Face> =
        Face::all(form.dim()).into_iter().filter(|f| FaceQuadric::new(form, *f).meets_face()).collect();
    loop {
        let face = faces[rng.gen_range(0..faces.len())];
        let local: Vec<f64> = (0..form.d()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let x = face.from_local(&local);
        if let Ok(p) = super::project_to_variety(form, &x) {
            return p;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlabReport {
    pub samples: usize,
    /// Largest `dist(y, T_p) / (ε r)`; at most 1 when the slab property holds.
    pub worst_ratio: f64,
    pub passed: bool,
}

/// Samples `(p, r <= R(ε))` and surface points `y ∈ B(p, r)`; checks `dist(y, T_p) <= ε r`.
pub fn check_slab(form: &QuadraticForm, eps: f64, samples: usize, seed: u64) -> Result<SlabReport> {
    let r_max = taylor_radius_min(form, eps);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < samples {
        let p = sample_surface_point(form, &mut rng);
        let Ok(chart) = Chart::at(form, &p) else { continue };
        let r = r_max * rng.gen_range(1e-3..=1.0);
        let dir: Vec<f64> = (0..form.d() - 1).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let len = norm2(&dir);
        if len == 0.0 {
            continue;
        }
        let t: Vec<f64> = dir.iter().map(|v| v / len * r * rng.gen_range(0.0..=1.0)).collect();
        let Ok(y) = chart.inverse_local(&t) else { continue };
        let diff: Vec<f64> = y.iter().zip(&chart.base_local).map(|(a, b)| a - b).collect();
        if norm2(&diff) > r {
            continue;
        }
        let off = dot(&diff, &chart.frame.normal).abs();
        worst = worst.max(off / (eps * r));
        done += 1;
    }
    Ok(SlabReport { samples, worst_ratio: worst, passed: worst <= 1.0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPointReport {
    pub samples: usize,
    pub failures: usize,
}

/// For sampled `p`, `r <= R(ε)` and planes `P` through the normal line at `p`, the circle
/// `∂B(p, r) ∩ P` meets the face quadric exactly twice, once in each half-plane.
pub fn check_two_point(form: &QuadraticForm, eps: f64, samples: usize, seed: u64) -> Result<TwoPointReport> {
    let r_max = taylor_radius_min(form, eps);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let steps = 2000;
    for _ in 0..samples {
        let p = sample_surface_point(form, &mut rng);
        let chart = Chart::at(form, &p)?;
        let r = r_max * rng.gen_range(1e-2..=1.0);
        let coeffs: Vec<f64> = (0..form.d() - 1).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let mut t = chart.local_vector(&coeffs);
        let tn = norm2(&t);
        if tn == 0.0 {
            continue;
        }
        t.iter_mut().for_each(|v| *v /= tn);
        let n = &chart.frame.normal;
        let at = |theta: f64| {
            let y: Vec<f64> = chart
                .base_local
                .iter()
                .zip(n)
                .zip(&t)
                .map(|((b, ni), ti)| b + r * (theta.cos() * ni + theta.sin() * ti))
                .collect();
            chart.quadric.value(&y)
        };
        let (mut pos, mut neg) = (0, 0);
        let mut prev = at(0.0);
        for s in 1..=steps {
            let theta = std::f64::consts::TAU * s as f64 / steps as f64;
            let cur = at(theta);
            if (prev < 0.0) != (cur < 0.0) {
                if theta <= std::f64::consts::PI {
                    pos += 1;
                } else {
                    neg += 1;
                }
            }
            prev = cur;
        }
        if pos != 1 || neg != 1 {
            failures += 1;
        }
    }
    Ok(TwoPointReport { samples, failures })
}

/// Upper estimate of the bilipschitz constant `c_M` of `x ↦ 𝔭(Mx)` on the cube surface.
pub fn estimate_c_m(form: &QuadraticForm, samples: usize, seed: u64) -> f64 {
    let Some(m) = form.transform() else {
        return 1.0;
    };
    let m = mat_to_f64(m);
    let dim = form.dim();
    let apply = |x: &[f64]| -> Vec<f64> {
        let y: Vec<f64> = m.iter().map(|row| dot(row, x)).collect();
        radial(&y).expect("M is invertible")
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cube_point = |rng: &mut ChaCha8Rng| {
        let mut x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let j = rng.gen_range(0..dim);
        x[j] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        x
    };
    let mut worst = 1.0f64;
    for i in 0..samples {
        let x = cube_point(&mut rng);
        let y = if i % 2 == 0 {
            cube_point(&mut rng)
        } else {
            let s = 10f64.powf(rng.gen_range(-6.0..-1.0));
            let z: Vec<f64> = x.iter().map(|v| v + s * rng.gen_range(-1.0..=1.0)).collect();
            radial(&z).expect("nonzero")
        };
        let (a, b) = (dist2(&apply(&x), &apply(&y)), dist2(&x, &y));
        if a > 0.0 && b > 0.0 {
            worst = worst.max(a / b).max(b / a);
        }
    }
    worst * C_PI_SAFETY
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_is_identity_on_the_face() {
        let face = Face::new(2, 1);
        let r = pi_distortion(face, &[0.1, 0.2, 1.0], &[-0.5, 0.9, 1.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn c_pi_for_d2() {
        let est = estimate_c_pi(2, 200_000, 1);
        assert!(est.c_pi >= 1.0);
        // the local stretch of 1/t at the rim t = 1/2 along a corner is already 4 sqrt 2
        assert!(est.max_ratio > 4.0 * 2f64.sqrt() * 0.99 && est.max_ratio < 8.0, "{est:?}");
        assert!(max_pi_distortion(2, 100_000, 99) <= est.c_pi);
    }

    #[test]
    fn miss_ray_circle() {
        let q = QuadraticForm::parse("1,1,-1").unwrap();
        let inf = miss_ray_infimum(q.q1(), 2000, 0);
        assert!((inf - 0.5).abs() < 1e-4, "{inf}");
        assert!((miss_ray_constant(q.q1()) - 0.45).abs() < 1e-3);
        assert_eq!(miss_ray_constant(q.q2()), 1.0);
        let e = QuadraticForm::parse("1,4,-1").unwrap();
        let c = miss_ray_constant(e.q1());
        assert!(c > 0.0 && c <= 0.5);
    }

    #[test]
    fn taylor_radius_scales() {
        let q = QuadraticForm::parse("1,1,-1").unwrap();
        let top = Face::new(2, 1);
        let r1 = taylor_radius(&q, top, 0.1);
        let r2 = taylor_radius(&q, top, 0.2);
        assert!((r2 / r1 - 2.0).abs() < 1e-12);
        let steep = QuadraticForm::parse("4,4,-1").unwrap();
        assert!(taylor_radius(&steep, top, 0.1) < r1);
    }

    #[test]
    fn slab_on_circle() {
        let q = QuadraticForm::parse("1,1,-1").unwrap();
        let rep = check_slab(&q, 0.1, 1000, 3).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn two_point_on_circle() {
        let q = QuadraticForm::parse("1,1,-1").unwrap();
        let rep = check_two_point(&q, 1e-3, 200, 4).unwrap();
        assert_eq!(rep.failures, 0);
    }

    #[test]
    fn c_m_identity_for_diagonal() {
        let q = QuadraticForm::parse("1,1,-1").unwrap();
        assert_eq!(estimate_c_m(&q, 100, 0), 1.0);
        let g = QuadraticForm::parse("[[1,0,0],[0,0,1],[0,1,0]]").unwrap();
        assert!(estimate_c_m(&g, 20_000, 0) > 1.0);
    }
}

//! Empirical badness: margins of points of `∂X` against lattice points, and the
//! auxiliary statements for `d = 1`, `s > 2` and the full lattice.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{QuadraticForm, SplitVector};
use crate::geometry::{sample_surface_point, sup_norm, SurfacePoint};
use crate::lattice::{cloud_if_cached, enumerate_box, normalize_f64};
use crate::rational::{exact_sqrt_rational, fmt_rational, pq, to_f64, Rational};

pub const CURVE_NS: [u64; 3] = [100, 1_000, 10_000];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginPoint {
    pub n: u64,
    /// `None` when no lattice point has sup norm at most `n`.
    pub margin: Option<f64>,
    pub argmin: Option<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadnessCertificate {
    pub v: Vec<f64>,
    pub s_exp: f64,
    pub n: u64,
    pub margin: Option<f64>,
    pub argmin: Option<Vec<i64>>,
    pub margin_curve: Vec<MarginPoint>,
}

impl BadnessCertificate {
    pub const CSV_HEADER: &'static str = "N,margin";

    pub fn curve_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.margin_curve {
            out.push_str(&format!("{},{}\n", p.n, p.margin.map_or("inf".into(), |m| m.to_string())));
        }
        out
    }

    pub fn curve_non_increasing(&self) -> bool {
        let vals: Vec<f64> = self.margin_curve.iter().map(|p| p.margin.unwrap_or(f64::INFINITY)).collect();
        vals.windows(2).all(|w| w[1] <= w[0])
    }
}

/// `(x, sup)` for every point of `X_m(Z)` with `0 < ||x|| <= n`, sorted by sup norm.
fn points_up_to(form: &QuadraticForm, m: &Rational, n: u64) -> Result<Vec<(Vec<i64>, i64)>> {
    let n_i = i64::try_from(n).map_err(|_| Error::Overflow(format!("N = {n}")))?;
    let b_sum: f64 = form.q2().coeffs_f64().iter().sum();
    let mut pts: Vec<(Vec<i64>, i64)> = match cloud_if_cached(form, m, n as f64 * b_sum.sqrt()) {
        Some(cloud) => cloud.points.iter().filter(|p| p.sup <= n_i).map(|p| (p.x.clone(), p.sup)).collect(),
        None => enumerate_box(form, m, n_i)?.into_iter().map(|p| (p.x, p.sup)).collect(),
    };
    pts.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    Ok(pts)
}

fn check_on_variety(form: &QuadraticForm, v: &[f64]) -> Result<()> {
    SurfacePoint::new(form, v.to_vec()).map(|_| ())
}

/// `min ||𝔭(x) - v|| ||x||^s` over `x ∈ X_m(Z)` with `||x|| <= n`, sup norm throughout.
pub fn badness_margin(form: &QuadraticForm, m: &Rational, v: &[f64], s_exp: f64, n: u64) -> Result<BadnessCertificate> {
    margin_curve(form, m, v, s_exp, &[n])
}

/// Margins at every bound in `ns` from one scan; the certificate reports the largest.
pub fn margin_curve(
    form: &QuadraticForm,
    m: &Rational,
    v: &[f64],
    s_exp: f64,
    ns: &[u64],
) -> Result<BadnessCertificate> {
    check_on_variety(form, v)?;
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::Precondition("search bounds must be >= 1".into()));
    }
    if !(s_exp > 0.0) {
        return Err(Error::Precondition(format!("exponent {s_exp} must be positive")));
    }
    let mut sorted = ns.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let n_max = *sorted.last().expect("nonempty");
    let pts = points_up_to(form, m, n_max)?;
    let mut curve = Vec::with_capacity(sorted.len());
    let mut best: Option<(f64, &Vec<i64>)> = None;
    let mut idx = 0;
    for &n in &sorted {
        while idx < pts.len() && pts[idx].1 as u64 <= n {
            let (x, sup) = &pts[idx];
            let p = normalize_f64(x)?;
            let d = p.iter().zip(v).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
            let val = d * (*sup as f64).powf(s_exp);
            if best.is_none_or(|b| val < b.0) {
                best = Some((val, x));
            }
            idx += 1;
        }
        curve.push(MarginPoint { n, margin: best.map(|b| b.0), argmin: best.map(|b| b.1.clone()) });
    }
    let last = curve.last().expect("nonempty").clone();
    Ok(BadnessCertificate {
        v: v.to_vec(),
        s_exp,
        n: n_max,
        margin: last.margin,
        argmin: last.argmin,
        margin_curve: curve,
    })
}

/// Requires `Q = q - y^2`: exactly one negative coefficient, equal to `-1`.
fn d1_lift_form(form: &QuadraticForm) -> Result<()> {
    if form.ell() != 1 || !form.q2().coeffs()[0].is_one() {
        return Err(Error::Precondition("the lift needs Q = q - y^2".into()));
    }
    Ok(())
}

/// `<v/||v||, 1>` on `∂X` for `v` with `q(v/||v||) = 1`, or `<v, 1>` when `q(v) = 1` and `||v|| <= 1`.
pub fn lift_d1_vector(form: &QuadraticForm, v: &[f64]) -> Result<SurfacePoint> {
    d1_lift_form(form)?;
    if v.len() != form.k() {
        return Err(Error::DimensionMismatch { expected: form.k(), got: v.len() });
    }
    let n = sup_norm(v);
    if n == 0.0 {
        return Err(Error::ZeroVector);
    }
    // with ||v|| <= 1 the normalization may be dropped
    let on_vq = |x: &[f64]| (form.q1().eval_f64(x) - 1.0).abs() <= 1e-12;
    let unit: Vec<f64> = if n <= 1.0 && on_vq(v) { v.to_vec() } else { v.iter().map(|x| x / n).collect() };
    if !on_vq(&unit) {
        return Err(Error::Precondition(format!("q(v/||v||) = {}, not 1", form.q1().eval_f64(&unit))));
    }
    SurfacePoint::new(form, form.join(&SplitVector { w: unit, u: vec![1.0] }))
}

/// `min ||v/||v|| - x/y|| |y|^s` over `<x, y> ∈ X_m(Z)`, `y != 0`, `||<x,y>|| <= n`.
pub fn lift_margin(form: &QuadraticForm, m: &Rational, v: &[f64], s_exp: f64, n: u64) -> Result<Option<f64>> {
    let p = lift_d1_vector(form, v)?;
    let sv = form.split_vector(&p.coords);
    let mut best: Option<f64> = None;
    for (x, _) in points_up_to(form, m, n)? {
        let xs = form.split_vector(&x);
        let y = xs.u[0];
        if y == 0 {
            continue;
        }
        let d = xs.w.iter().zip(&sv.w).fold(0.0f64, |acc, (a, b)| acc.max((*a as f64 / y as f64 - b).abs()));
        let val = d * (y.unsigned_abs() as f64).powf(s_exp);
        best = Some(best.map_or(val, |b: f64| b.min(val)));
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum D1Kind {
    /// `BA = ∂X`.
    Full,
    /// `BA = ∅`.
    Empty,
    /// `BA = ∂X` whenever `|m| < k sqrt(α)`.
    Threshold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct D1Classification {
    pub kind: D1Kind,
    /// Canonical `α >= 1` with `Q ~ αx^2 - y^2`.
    #[serde(with = "pq")]
    pub alpha: Rational,
    /// `m` after the same normalization.
    #[serde(with = "pq")]
    pub m_canonical: Rational,
    /// Whether the two variables were exchanged to make `α >= 1`.
    pub swapped: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sqrt_alpha: Option<String>,
    /// A point of `X_0(Z)` projecting onto `∂X` (`m = 0`, rational case).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<i64>>,
    /// `min |z|` over `(1/p)Z \ {0}` (rational case, `m != 0`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<String>,
    /// Continued fraction of `1/sqrt(α)`: pre-period and one period.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub continued_fraction: Vec<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Whether `|m_canonical| < k sqrt(α)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub below_threshold: Option<bool>,
    /// The four points of `∂X`.
    pub surface: Vec<Vec<f64>>,
}

pub const CF_DEPTH: usize = 50;

/// Continued fraction of `(p + sqrt(d)) / q`, `d` not a square, `q | d - p^2`.
/// Returns the partial quotients (up to `depth`) and `(start, length)` of the period if it closed.
pub fn quadratic_cf(p: i128, q: i128, d: i128, depth: usize) -> (Vec<i64>, Option<(usize, usize)>) {
    let (mut p, mut q) = (p, q);
    let mut seen: HashMap<(i128, i128), usize> = HashMap::new();
    let mut out = Vec::new();
    // floor((p + sqrt d)/q) = largest a with a q - p <= sqrt d (q > 0), reversed for q < 0
    let floor_of = |p: i128, q: i128| -> i128 {
        let le = |a: i128| {
            let t = a * q - p;
            if q > 0 {
                t <= 0 || t * t <= d
            } else {
                t >= 0 && t * t >= d
            }
        };
        let mut a = ((p as f64 + (d as f64).sqrt()) / q as f64).floor() as i128;
        while !le(a) {
            a -= 1;
        }
        while le(a + 1) {
            a += 1;
        }
        a
    };
    while out.len() < depth {
        if let Some(&start) = seen.get(&(p, q)) {
            return (out, Some((start, seen.len() - start)));
        }
        seen.insert((p, q), out.len());
        let a = floor_of(p, q);
        out.push(a as i64);
        p = a * q - p;
        q = (d - p * p) / q;
    }
    (out, None)
}

fn canonical_d1(form: &QuadraticForm, m: &Rational) -> Result<(Rational, Rational, bool)> {
    if form.d() != 1 {
        return Err(Error::Precondition(format!("classify_d1 needs d = 1, got d = {}", form.d())));
    }
    let a = form.q1().coeffs()[0].clone();
    let b = form.q2().coeffs()[0].clone();
    let alpha = &a / &b;
    if alpha >= Rational::one() {
        Ok((alpha, m / &b, false))
    } else {
        Ok((&b / &a, -(m / &a), true))
    }
}

/// The four points `(±1/sqrt(α), ±1)` of `∂X` in the form's coordinates.
fn d1_surface(form: &QuadraticForm) -> Vec<Vec<f64>> {
    let a = form.q1().coeffs_f64()[0];
    let b = form.q2().coeffs_f64()[0];
    // a w^2 = b u^2 on the cube
    let (w, u) = if a >= b { ((b / a).sqrt(), 1.0) } else { (1.0, (a / b).sqrt()) };
    let mut out = Vec::new();
    for sw in [1.0, -1.0] {
        for su in [1.0, -1.0] {
            out.push(form.join(&SplitVector { w: vec![sw * w], u: vec![su * u] }));
        }
    }
    out
}

pub fn classify_d1(form: &QuadraticForm, m: &Rational) -> Result<D1Classification> {
    let (alpha, m_c, swapped) = canonical_d1(form, m)?;
    let mut out = D1Classification {
        kind: D1Kind::Threshold,
        alpha: alpha.clone(),
        m_canonical: m_c.clone(),
        swapped,
        sqrt_alpha: None,
        witness: None,
        epsilon: None,
        continued_fraction: Vec::new(),
        period: None,
        k: None,
        threshold: None,
        below_threshold: None,
        surface: d1_surface(form),
    };
    if let Some(r) = exact_sqrt_rational(&alpha) {
        // sqrt(α) = p/p'
        let (p, p_prime) = (r.numer().clone(), r.denom().clone());
        out.sqrt_alpha = Some(fmt_rational(&r));
        if m.is_zero() {
            out.kind = D1Kind::Empty;
            let (cx, cy) = (
                p_prime.to_i64().ok_or_else(|| Error::Overflow("witness".into()))?,
                p.to_i64().ok_or_else(|| Error::Overflow("witness".into()))?,
            );
            // canonical (x, y) = (p', p); undo the exchange of variables
            let (w, u) = if swapped { (cy, cx) } else { (cx, cy) };
            out.witness = Some(form.join(&SplitVector { w: vec![w], u: vec![u] }));
        } else {
            out.kind = D1Kind::Full;
            out.epsilon = Some(fmt_rational(&Rational::new(BigInt::one(), p)));
        }
        return Ok(out);
    }
    // 1/sqrt(α) = sqrt(ab)/a for α = a/b in lowest terms
    let (a, b) = (alpha.numer().clone(), alpha.denom().clone());
    let d = (&a * &b).to_i128().ok_or_else(|| Error::Overflow("alpha too large".into()))?;
    let a_i = a.to_i128().ok_or_else(|| Error::Overflow("alpha too large".into()))?;
    if d > (1i128 << 100) {
        return Err(Error::Overflow("alpha too large for the continued fraction".into()));
    }
    let (cf, period) = quadratic_cf(0, a_i, d, CF_DEPTH);
    let a_max = cf.iter().skip(1).copied().max().unwrap_or(1).max(1);
    let k = 1.0 / (a_max as f64 + 2.0);
    let threshold = k * to_f64(&alpha).sqrt();
    out.continued_fraction = cf;
    out.period = period;
    out.k = Some(k);
    out.threshold = Some(threshold);
    out.below_threshold = Some(to_f64(&m_c.abs()) < threshold);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SGt2Sample {
    pub v: Vec<f64>,
    pub margin: Option<f64>,
    /// `|y|` beyond which the approximation inequality forces `|Q| < |m|`.
    pub y_threshold: f64,
    /// Solutions of `||y v - x|| < |y|^{1-s}` found in the search.
    pub solutions: usize,
    /// Solutions with `|y|` above the threshold; the mechanism says none exist.
    pub beyond_threshold: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SGt2Report {
    pub s_exp: f64,
    pub n: u64,
    pub samples: Vec<SGt2Sample>,
    pub min_margin: Option<f64>,
    pub passed: bool,
}

/// For `m != 0`, `s > 2`: every sampled point has positive margin, and solutions of the
/// approximation inequality stop past an explicit `|y|`.
pub fn check_s_gt_2(
    form: &QuadraticForm,
    m: &Rational,
    s_exp: f64,
    samples: &[Vec<f64>],
    n: u64,
) -> Result<SGt2Report> {
    if m.is_zero() {
        return Err(Error::Precondition("the s > 2 statement needs m != 0".into()));
    }
    if !(s_exp > 2.0) {
        return Err(Error::Precondition(format!("s = {s_exp} must exceed 2")));
    }
    let pts = points_up_to(form, m, n)?;
    let coeffs = form.signed_coeffs_f64();
    let abs_m = to_f64(&m.abs());
    let mut out = Vec::with_capacity(samples.len());
    for v in samples {
        let cert = badness_margin(form, m, v, s_exp, n)?;
        // y is a coordinate where |v| = 1; Q / (-c_y) = q - y^2
        let j = (0..v.len()).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).expect("nonempty");
        let cy = coeffs[j];
        let ks: f64 = (0..v.len()).filter(|&i| i != j).map(|i| (coeffs[i] / cy).abs()).sum();
        let m_scaled = abs_m / cy.abs();
        let y_threshold = (3.0 * ks / m_scaled).powf(1.0 / (s_exp - 2.0));
        let vv: Vec<f64> = v.iter().map(|x| x / v[j]).collect();
        let mut solutions = 0;
        let mut beyond = 0;
        for (x, _) in &pts {
            let y = x[j];
            if y == 0 {
                continue;
            }
            let yf = y as f64;
            let dev = (0..v.len()).filter(|&i| i != j).fold(0.0f64, |acc, i| acc.max((yf * vv[i] - x[i] as f64).abs()));
            if dev < yf.abs().powf(1.0 - s_exp) {
                solutions += 1;
                if yf.abs() > y_threshold {
                    beyond += 1;
                }
            }
        }
        out.push(SGt2Sample { v: v.clone(), margin: cert.margin, y_threshold, solutions, beyond_threshold: beyond });
    }
    let min_margin = out.iter().filter_map(|s| s.margin).reduce(f64::min);
    let passed = out.iter().all(|s| s.margin.is_none_or(|m| m > 0.0) && s.beyond_threshold == 0);
    Ok(SGt2Report { s_exp, n, samples: out, min_margin, passed })
}

/// Seeded sample of points of `∂X`.
pub fn sample_surface(form: &QuadraticForm, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_surface_point(form, &mut rng).coords).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeReport {
    pub eps: f64,
    pub n_max: u64,
    /// First `n` with `||n v||_Z < eps`; `None` means "increase N", not a counterexample.
    pub n: Option<u64>,
    pub x: Option<Vec<i64>>,
    pub dist: Option<f64>,
    /// Exact distance as `p/q` (rational input only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist_exact: Option<String>,
}

fn check_escape_pre(len: usize, sup: f64, eps: f64) -> Result<()> {
    if len == 0 {
        return Err(Error::ZeroVector);
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Precondition(format!("eps = {eps} must lie in (0, 1]")));
    }
    if (sup - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition(format!("v has sup norm {sup}, not 1")));
    }
    Ok(())
}

/// Searches `n = 1..=n_max` for `||n v - x|| < eps` with `x` the nearest integer vector.
pub fn full_lattice_escape(v: &[f64], eps: f64, n_max: u64) -> Result<EscapeReport> {
    check_escape_pre(v.len(), sup_norm(v), eps)?;
    for n in 1..=n_max {
        let nf = n as f64;
        let mut dist = 0.0f64;
        for c in v {
            let t = nf * c;
            dist = dist.max((t - t.round()).abs());
        }
        if dist < eps {
            let x = v.iter().map(|c| (nf * c).round() as i64).collect();
            return Ok(EscapeReport { eps, n_max, n: Some(n), x: Some(x), dist: Some(dist), dist_exact: None });
        }
    }
    Ok(EscapeReport { eps, n_max, n: None, x: None, dist: None, dist_exact: None })
}

/// Exact version for rational `v`.
pub fn full_lattice_escape_exact(v: &[Rational], eps: f64, n_max: u64) -> Result<EscapeReport> {
    let sup = v.iter().map(|c| c.abs()).max().unwrap_or_else(Rational::zero);
    check_escape_pre(v.len(), to_f64(&sup), eps)?;
    if !sup.is_one() {
        return Err(Error::Precondition("v must have sup norm exactly 1".into()));
    }
    let eps_r = crate::rational::from_f64(eps)?;
    let den = v.iter().fold(BigInt::one(), |l, c| l.lcm(c.denom()));
    for n in 1..=n_max {
        let nr = Rational::from_integer(n.into());
        let mut dist = Rational::zero();
        let mut x = Vec::with_capacity(v.len());
        for c in v {
            let t = &nr * c;
            let r = t.round();
            dist = dist.max((&t - &r).abs());
            x.push(r.to_integer());
        }
        if dist < eps_r {
            let x =
                x.iter().map(|b| b.to_i64().ok_or_else(|| Error::Overflow("witness".into()))).collect::<Result<_>>()?;
            return Ok(EscapeReport {
                eps,
                n_max,
                n: Some(n),
                x: Some(x),
                dist: Some(to_f64(&dist)),
                dist_exact: Some(fmt_rational(&dist)),
            });
        }
        // past the common denominator the distances repeat
        if BigInt::from(n) >= den {
            break;
        }
    }
    Ok(EscapeReport { eps, n_max, n: None, x: None, dist: None, dist_exact: None })
}

//! Integer points of `X_m(Z) = {Q = m} ∩ Z^{d+1}`: shell enumeration, windows,
//! radial normalization and the equivalence relations between lattice points.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::QuadraticForm;
use crate::rational::{exact_sqrt_u128, fmt_rational, from_f64, isqrt_u128, parse_rational, Rational};
use crate::Variant;

/// Default cap on inner-loop steps for a single enumeration.
pub const DEFAULT_BUDGET: u64 = 20_000_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticePoint {
    pub x: Vec<i64>,
    pub q1_sq: Rational,
    pub q2_sq: Rational,
    pub sup: i64,
}

impl LatticePoint {
    pub fn new(form: &QuadraticForm, x: Vec<i64>) -> Result<Self> {
        if x.len() != form.dim() {
            return Err(Error::DimensionMismatch { expected: form.dim(), got: x.len() });
        }
        let sv = form.split_vector(&x);
        let q1_sq = form.q1().eval_int(&sv.w);
        let q2_sq = form.q2().eval_int(&sv.u);
        let sup = sup_norm(&x);
        Ok(LatticePoint { x, q1_sq, q2_sq, sup })
    }

    pub fn m(&self) -> Rational {
        &self.q1_sq - &self.q2_sq
    }

    /// `x / ||x||` with exact rational components.
    pub fn normalize(&self) -> Result<Vec<Rational>> {
        normalize(&self.x)
    }

    pub fn normalize_f64(&self) -> Result<Vec<f64>> {
        normalize_f64(&self.x)
    }

    /// One JSON-lines record: `{"x":[...],"q1_sq":"p/q","q2_sq":"p/q","sup":n}`.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&PointRecord::from(self)).expect("point record serializes")
    }

    /// Parses a record and checks it against `form`: the norms and sup are recomputed.
    pub fn from_json_line(form: &QuadraticForm, line: &str) -> Result<Self> {
        let rec: PointRecord = serde_json::from_str(line).map_err(|e| Error::Parse(format!("point record: {e}")))?;
        let p = LatticePoint::new(form, rec.x)?;
        if parse_rational(&rec.q1_sq)? != p.q1_sq || parse_rational(&rec.q2_sq)? != p.q2_sq || rec.sup != p.sup {
            return Err(Error::Parse("point record fields disagree with its coordinates".into()));
        }
        Ok(p)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointRecord {
    pub x: Vec<i64>,
    pub q1_sq: String,
    pub q2_sq: String,
    pub sup: i64,
}

impl From<&LatticePoint> for PointRecord {
    fn from(p: &LatticePoint) -> Self {
        PointRecord { x: p.x.clone(), q1_sq: fmt_rational(&p.q1_sq), q2_sq: fmt_rational(&p.q2_sq), sup: p.sup }
    }
}

pub fn sup_norm(x: &[i64]) -> i64 {
    x.iter().map(|v| v.abs()).max().unwrap_or(0)
}

pub fn normalize(x: &[i64]) -> Result<Vec<Rational>> {
    let sup = sup_norm(x);
    if sup == 0 {
        return Err(Error::ZeroVector);
    }
    Ok(x.iter().map(|&v| Rational::new(BigInt::from(v), BigInt::from(sup))).collect())
}

pub fn normalize_f64(x: &[i64]) -> Result<Vec<f64>> {
    let sup = sup_norm(x);
    if sup == 0 {
        return Err(Error::ZeroVector);
    }
    Ok(x.iter().map(|&v| v as f64 / sup as f64).collect())
}

/// One end of a shell window, stored as the exact square of the `||u||_{q2}` bound.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShellBound {
    #[serde(with = "crate::rational::pq")]
    pub sq: Rational,
    pub strict: bool,
}

impl ShellBound {
    pub fn inclusive(sq: Rational) -> Self {
        ShellBound { sq, strict: false }
    }

    pub fn strict(sq: Rational) -> Self {
        ShellBound { sq, strict: true }
    }

    /// Bound from a real value, squared exactly.
    pub fn from_f64(value: f64, strict: bool) -> Result<Self> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::Domain(format!("window bound {value}")));
        }
        let r = from_f64(value)?;
        Ok(ShellBound { sq: &r * &r, strict })
    }

    pub fn value(&self) -> f64 {
        crate::rational::to_f64(&self.sq).sqrt()
    }
}

/// Range of `||u||_{q2}` values; `index` is 0 for `P_0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub lo: ShellBound,
    pub hi: ShellBound,
    pub index: usize,
}

impl Window {
    /// Closed window `lo <= ||u||_{q2} <= hi`.
    pub fn closed(lo: f64, hi: f64) -> Result<Self> {
        if lo > hi {
            return Err(Error::Precondition(format!("window lo {lo} > hi {hi}")));
        }
        Ok(Window { lo: ShellBound::from_f64(lo, false)?, hi: ShellBound::from_f64(hi, false)?, index: 0 })
    }

    pub fn from_squares(lo_sq: Rational, hi_sq: Rational) -> Self {
        Window { lo: ShellBound::inclusive(lo_sq), hi: ShellBound::inclusive(hi_sq), index: 0 }
    }

    pub fn contains_sq(&self, q2_sq: &Rational) -> bool {
        let above = if self.lo.strict { q2_sq > &self.lo.sq } else { q2_sq >= &self.lo.sq };
        let below = if self.hi.strict { q2_sq < &self.hi.sq } else { q2_sq <= &self.hi.sq };
        above && below
    }
}

/// The relations `~`, `≈`, `~1`, `~2` between lattice points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Sim,
    Approx,
    Sim1,
    Sim2,
}

/// Canonical class data; equal keys iff the points are related.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EquivKey {
    Sim(Vec<i64>),
    Approx(Vec<i64>, Vec<i64>),
    /// Signed primitive direction of the free component and the exact squared ratio.
    Ratio(Relation, Vec<i64>, Rational),
    /// The finite class whose denominator component vanishes.
    Degenerate(Relation),
}

fn gcd_all(v: &[i64]) -> i64 {
    v.iter().fold(0i64, |g, &x| g.gcd(&x))
}

/// Divides by the gcd; keeps signs. The zero vector maps to itself.
pub fn primitive(v: &[i64]) -> Vec<i64> {
    let g = gcd_all(v);
    if g == 0 {
        return v.to_vec();
    }
    v.iter().map(|x| x / g).collect()
}

/// Primitive direction with the first nonzero component positive.
pub fn sign_canonical(v: &[i64]) -> Vec<i64> {
    let mut p = primitive(v);
    if p.iter().find(|&&x| x != 0).is_some_and(|&x| x < 0) {
        p.iter_mut().for_each(|x| *x = -*x);
    }
    p
}

pub fn equiv_key(form: &QuadraticForm, p: &LatticePoint, relation: Relation) -> EquivKey {
    let sv = form.split_vector(&p.x);
    match relation {
        Relation::Sim => EquivKey::Sim(sign_canonical(&p.x)),
        Relation::Approx => EquivKey::Approx(sign_canonical(&sv.w), sign_canonical(&sv.u)),
        Relation::Sim1 => {
            if p.q2_sq.is_zero() {
                EquivKey::Degenerate(relation)
            } else {
                EquivKey::Ratio(relation, primitive(&sv.w), &p.q1_sq / &p.q2_sq)
            }
        }
        Relation::Sim2 => {
            if p.q1_sq.is_zero() {
                EquivKey::Degenerate(relation)
            } else {
                EquivKey::Ratio(relation, primitive(&sv.u), &p.q2_sq / &p.q1_sq)
            }
        }
    }
}

/// Scaled integer data: `sum A_i w_i^2 - sum B_j u_j^2 = L m` with `L = s_lcm`.
struct Scaled {
    a: Vec<i128>,
    b: Vec<i128>,
    lm: i128,
}

fn scaled(form: &QuadraticForm, m: &Rational) -> Result<Option<Scaled>> {
    let to_i128 = |n: &BigInt| n.to_i128().ok_or_else(|| Error::Overflow(format!("coefficient {n} exceeds i128")));
    let k = form.k();
    let nums = form.numerators();
    let a = nums[..k].iter().map(to_i128).collect::<Result<Vec<_>>>()?;
    let b = nums[k..].iter().map(to_i128).collect::<Result<Vec<_>>>()?;
    let lm = m * Rational::from_integer(form.s_lcm().clone());
    if !lm.is_integer() {
        // the left side is an integer, so no point can exist
        return Ok(None);
    }
    Ok(Some(Scaled { a, b, lm: to_i128(lm.numer())? }))
}

fn rational_floor_i128(r: &Rational) -> Result<i128> {
    r.floor()
        .to_integer()
        .to_i128()
        .filter(|v| v.abs() < (1i128 << 100))
        .ok_or_else(|| Error::Overflow(format!("shell bound {r} too large")))
}

/// Enumeration options: coordinate cap (for sup-norm boxes) and work budget.
#[derive(Clone, Copy, Debug)]
pub struct EnumOptions {
    pub coord_cap: Option<i64>,
    pub budget: u64,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions { coord_cap: None, budget: DEFAULT_BUDGET }
    }
}

/// All nonzero integer points with `Q = m` inside `window`, lexicographically sorted.
pub fn enumerate_window(form: &QuadraticForm, m: &Rational, window: &Window) -> Result<Vec<LatticePoint>> {
    enumerate_with(form, m, window, EnumOptions::default())
}

/// All nonzero integer points with `Q = m` and `||x|| <= n`.
pub fn enumerate_box(form: &QuadraticForm, m: &Rational, n: i64) -> Result<Vec<LatticePoint>> {
    if n < 0 {
        return Err(Error::Precondition("box bound must be nonnegative".into()));
    }
    // ||u||_{q2}^2 <= sum b_j n^2 bounds the u-ring
    let hi_sq = form.q2().coeffs().iter().fold(Rational::zero(), |acc, b| acc + b)
        * Rational::from_integer(BigInt::from(n) * BigInt::from(n));
    let window = Window::from_squares(Rational::zero(), hi_sq);
    enumerate_with(form, m, &window, EnumOptions { coord_cap: Some(n), ..Default::default() })
}

pub fn enumerate_with(
    form: &QuadraticForm,
    m: &Rational,
    window: &Window,
    opts: EnumOptions,
) -> Result<Vec<LatticePoint>> {
    let raw = enumerate_raw(form, m, window, opts)?;
    raw.into_iter().map(|x| LatticePoint::new(form, x)).collect()
}

/// Coordinates only; avoids building exact norms for large clouds.
pub fn enumerate_raw(form: &QuadraticForm, m: &Rational, window: &Window, opts: EnumOptions) -> Result<Vec<Vec<i64>>> {
    if window.lo.sq > window.hi.sq {
        return Err(Error::Precondition("window lo > hi".into()));
    }
    let Some(sc) = scaled(form, m)? else {
        return Ok(Vec::new());
    };
    let l = Rational::from_integer(form.s_lcm().clone());
    let lo_scaled = &window.lo.sq * &l;
    let hi_scaled = &window.hi.sq * &l;
    let lb =
        if window.lo.strict { rational_floor_i128(&lo_scaled)? + 1 } else { rational_floor_i128(&lo_scaled.ceil())? };
    let ub =
        if window.hi.strict { rational_floor_i128(&hi_scaled.ceil())? - 1 } else { rational_floor_i128(&hi_scaled)? };
    if ub < lb.max(0) {
        return Ok(Vec::new());
    }
    let cap = opts.coord_cap.map(|c| c as i128);
    let work = AtomicU64::new(0);
    let b0 = sc.b[0];
    let first_max = clamp_cap(isqrt_i128(ub / b0), cap);
    let chunks: Vec<Result<Vec<Vec<i64>>>> = (-first_max..=first_max)
        .into_par_iter()
        .map(|u0| {
            let mut out = Vec::new();
            let mut u = vec![0i128; sc.b.len()];
            u[0] = u0;
            let s0 = b0.checked_mul(u0 * u0).ok_or_else(|| Error::Overflow("u-shell sum".into()))?;
            let mut ctx = Ctx { sc: &sc, lb, ub, cap, work: &work, budget: opts.budget, out: &mut out };
            ctx.u_rec(&mut u, 1, s0)?;
            Ok(out)
        })
        .collect();
    let mut pts = Vec::new();
    for c in chunks {
        pts.extend(c?);
    }
    let pts: Vec<Vec<i64>> = pts
        .into_iter()
        .map(|canon| {
            // canonical (w, u) order back to ambient order
            let mut x = vec![0i64; canon.len()];
            for (c, &i) in form.perm().iter().enumerate() {
                x[i] = canon[c];
            }
            x
        })
        .collect();
    let mut pts = pts;
    pts.sort_unstable();
    Ok(pts)
}

fn clamp_cap(v: i128, cap: Option<i128>) -> i128 {
    cap.map_or(v, |c| v.min(c))
}

fn isqrt_i128(n: i128) -> i128 {
    if n <= 0 {
        0
    } else {
        isqrt_u128(n as u128) as i128
    }
}

struct Ctx<'a> {
    sc: &'a Scaled,
    lb: i128,
    ub: i128,
    cap: Option<i128>,
    work: &'a AtomicU64,
    budget: u64,
    out: &'a mut Vec<Vec<i64>>,
}

impl Ctx<'_> {
    fn u_rec(&mut self, u: &mut Vec<i128>, j: usize, s: i128) -> Result<()> {
        if j == u.len() {
            if s < self.lb {
                return Ok(());
            }
            let target = self.sc.lm.checked_add(s).ok_or_else(|| Error::Overflow("q1 target".into()))?;
            if target < 0 {
                return Ok(());
            }
            let mut w = vec![0i128; self.sc.a.len()];
            let mut steps = 0u64;
            self.w_rec(&mut w, 0, target, u, &mut steps)?;
            let total = self.work.fetch_add(steps + 1, Ordering::Relaxed) + steps + 1;
            if total > self.budget {
                return Err(Error::Budget(format!("more than {} enumeration steps", self.budget)));
            }
            return Ok(());
        }
        let bj = self.sc.b[j];
        let max = clamp_cap(isqrt_i128((self.ub - s) / bj), self.cap);
        for v in -max..=max {
            u[j] = v;
            self.u_rec(u, j + 1, s + bj * v * v)?;
        }
        u[j] = 0;
        Ok(())
    }

    fn w_rec(&mut self, w: &mut Vec<i128>, i: usize, rem: i128, u: &[i128], steps: &mut u64) -> Result<()> {
        let ai = self.sc.a[i];
        if i + 1 == w.len() {
            *steps += 1;
            if rem % ai != 0 {
                return Ok(());
            }
            let Some(r) = exact_sqrt_u128((rem / ai) as u128) else {
                return Ok(());
            };
            let r = r as i128;
            if self.cap.is_some_and(|c| r > c) {
                return Ok(());
            }
            for v in if r == 0 { vec![0] } else { vec![-r, r] } {
                w[i] = v;
                if w.iter().all(|x| *x == 0) && u.iter().all(|x| *x == 0) {
                    continue;
                }
                let mut canon: Vec<i64> = Vec::with_capacity(w.len() + u.len());
                for &c in w.iter().chain(u) {
                    canon.push(i64::try_from(c).map_err(|_| Error::Overflow("coordinate exceeds i64".into()))?);
                }
                self.out.push(canon);
            }
            return Ok(());
        }
        let max = clamp_cap(isqrt_i128(rem / ai), self.cap);
        for v in -max..=max {
            w[i] = v;
            self.w_rec(w, i + 1, rem - ai * v * v, u, steps)?;
        }
        w[i] = 0;
        Ok(())
    }
}

/// The finite set `P_0` and the least positive sup-distance `d0` among its normalized points.
#[derive(Clone, Debug)]
pub struct P0Set {
    pub points: Vec<LatticePoint>,
    /// `+inf` when fewer than two distinct normalized points exist.
    pub d0: f64,
}

/// `P_0`: `||u||_{q2} < 3 sqrt|m|` on level surfaces, `||u||_{q2} < 1` on the light cone.
pub fn p0_set(form: &QuadraticForm, m: &Rational, variant: Variant) -> Result<P0Set> {
    if Variant::for_m(m) != variant {
        return Err(Error::Precondition(format!("variant {variant:?} does not match m = {m}")));
    }
    let hi_sq = match variant {
        Variant::Level => m.abs() * Rational::from_integer(9.into()),
        Variant::Lightcone => Rational::one(),
    };
    let window = Window { lo: ShellBound::inclusive(Rational::zero()), hi: ShellBound::strict(hi_sq), index: 0 };
    let points = enumerate_window(form, m, &window)?;
    let normalized: Vec<Vec<f64>> = points.iter().map(|p| p.normalize_f64()).collect::<Result<_>>()?;
    let mut d0 = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if normalize(&points[i].x)? == normalize(&points[j].x)? {
                continue;
            }
            let d = sup_dist(&normalized[i], &normalized[j]);
            d0 = d0.min(d);
        }
    }
    Ok(P0Set { points, d0 })
}

pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Exact squared l2 distance between `x/||x||` and `y/||y||`.
pub fn normalized_dist_sq(x: &[i64], y: &[i64]) -> Result<Rational> {
    let (a, b) = (sup_norm(x) as i128, sup_norm(y) as i128);
    if a == 0 || b == 0 {
        return Err(Error::ZeroVector);
    }
    let mut num: i128 = 0;
    for (&xi, &yi) in x.iter().zip(y) {
        let t = (xi as i128)
            .checked_mul(b)
            .and_then(|p| p.checked_sub((yi as i128).checked_mul(a)?))
            .ok_or_else(|| Error::Overflow("normalized distance".into()))?;
        num = t
            .checked_mul(t)
            .and_then(|t2| num.checked_add(t2))
            .ok_or_else(|| Error::Overflow("normalized distance".into()))?;
    }
    let den = BigInt::from(a * a) * BigInt::from(b * b);
    Ok(Rational::new(BigInt::from(num), den))
}

/// A cached point cloud: every point with `||u||_{q2} <= cap`, sorted by `||u||_{q2}^2`.
#[derive(Debug)]
pub struct PointCloud {
    pub cap: f64,
    pub points: Vec<CloudPoint>,
}

#[derive(Clone, Debug)]
pub struct CloudPoint {
    pub x: Vec<i64>,
    pub q2_sq: Rational,
    pub q2: f64,
    pub sup: i64,
    pub normalized: Vec<f64>,
}

impl PointCloud {
    pub fn build(form: &QuadraticForm, m: &Rational, cap: f64) -> Result<Self> {
        let window = Window::closed(0.0, cap)?;
        let raw = enumerate_raw(form, m, &window, EnumOptions::default())?;
        let mut points: Vec<CloudPoint> = raw
            .into_par_iter()
            .map(|x| {
                let sv = form.split_vector(&x);
                let q2_sq = form.q2().eval_int(&sv.u);
                let q2 = crate::rational::to_f64(&q2_sq).sqrt();
                let sup = sup_norm(&x);
                let normalized = normalize_f64(&x).expect("zero vector excluded");
                CloudPoint { x, q2_sq, q2, sup, normalized }
            })
            .collect();
        points.sort_by(|a, b| a.q2_sq.cmp(&b.q2_sq).then_with(|| a.x.cmp(&b.x)));
        Ok(PointCloud { cap, points })
    }

    /// Points in `window`, located by binary search on the exact shell value.
    pub fn window(&self, window: &Window) -> &[CloudPoint] {
        let start = self.points.partition_point(|p| {
            if window.lo.strict {
                p.q2_sq <= window.lo.sq
            } else {
                p.q2_sq < window.lo.sq
            }
        });
        let end = self.points.partition_point(|p| {
            if window.hi.strict {
                p.q2_sq < window.hi.sq
            } else {
                p.q2_sq <= window.hi.sq
            }
        });
        if start >= end {
            &[]
        } else {
            &self.points[start..end]
        }
    }

    /// Whether the window extends beyond what the cloud covers.
    pub fn truncates(&self, window: &Window) -> bool {
        window.hi.value() > self.cap
    }
}

type CloudKey = (String, String, u64);

fn cloud_cache() -> &'static Mutex<HashMap<CloudKey, Arc<PointCloud>>> {
    static CACHE: OnceLock<Mutex<HashMap<CloudKey, Arc<PointCloud>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// A cached cloud with cap at least `cap`, if one was built already.
pub fn cloud_if_cached(form: &QuadraticForm, m: &Rational, cap: f64) -> Option<Arc<PointCloud>> {
    let (f, mm) = (form.to_string(), m.to_string());
    cloud_cache()
        .lock()
        .expect("cloud cache poisoned")
        .iter()
        .filter(|((kf, km, _), c)| *kf == f && *km == mm && c.cap >= cap)
        .map(|(_, c)| c.clone())
        .next()
}

/// Shared cache of point clouds keyed by (form, m, cap).
pub fn cached_cloud(form: &QuadraticForm, m: &Rational, cap: f64) -> Result<Arc<PointCloud>> {
    let key = (form.to_string(), m.to_string(), cap.to_bits());
    let cache = cloud_cache();
    if let Some(c) = cache.lock().expect("cloud cache poisoned").get(&key) {
        return Ok(c.clone());
    }
    let cloud = Arc::new(PointCloud::build(form, m, cap)?);
    cache.lock().expect("cloud cache poisoned").entry(key).or_insert(cloud.clone());
    Ok(cloud)
}

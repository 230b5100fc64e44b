//! Exact diagonal rational quadratic forms and their natural splitting `Q = q1 - q2`.
//!
//! A [`QuadraticForm`] is always diagonal. General symmetric forms are reduced by
//! rational congruence once, at construction, and keep the change of basis `M`
//! with `Q(v) = Q_general(M v)`.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{fmt_rational, lcm_denominators, parse_rational, to_f64, Rational};

/// Square matrix of exact rationals, row-major.
pub type RatMatrix = Vec<Vec<Rational>>;

/// Positive-definite diagonal form `sum a_i y_i^2` with all `a_i > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PositiveForm {
    coeffs: Vec<Rational>,
    coeffs_f64: Vec<f64>,
}

impl PositiveForm {
    fn new(coeffs: Vec<Rational>) -> Self {
        debug_assert!(coeffs.iter().all(|c| c.is_positive()));
        let coeffs_f64 = coeffs.iter().map(to_f64).collect();
        PositiveForm { coeffs, coeffs_f64 }
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn coeffs_f64(&self) -> &[f64] {
        &self.coeffs_f64
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, v: &[Rational]) -> Rational {
        self.coeffs.iter().zip(v).fold(Rational::zero(), |acc, (a, x)| acc + a * x * x)
    }

    pub fn eval_int(&self, v: &[i64]) -> Rational {
        self.coeffs.iter().zip(v).fold(Rational::zero(), |acc, (a, &x)| {
            let x = BigInt::from(x);
            acc + a * Rational::from_integer(&x * &x)
        })
    }

    pub fn eval_f64(&self, v: &[f64]) -> f64 {
        self.coeffs_f64.iter().zip(v).map(|(a, x)| a * x * x).sum()
    }

    /// `||v||_q = sqrt(q(v))`.
    pub fn norm(&self, v: &[f64]) -> f64 {
        self.eval_f64(v).sqrt()
    }

    /// Smallest `c >= 1` with `c^-1 ||.||_2 <= ||.||_q <= c ||.||_2`.
    pub fn c_2q(&self) -> f64 {
        let max = self.coeffs_f64.iter().cloned().fold(0.0, f64::max).sqrt();
        let min = self.coeffs_f64.iter().cloned().fold(f64::INFINITY, f64::min).sqrt();
        max.max(1.0 / min)
    }
}

/// Vector split along the natural splitting: `w` is the q1-part, `u` the q2-part.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitVector<T> {
    pub w: Vec<T>,
    pub u: Vec<T>,
}

/// Norm-equivalence constants of the splitting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormConstants {
    /// Provable closed form for the sum-norm / sup-norm equivalence.
    pub c_s: f64,
    pub c_2q1: f64,
    pub c_2q2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    /// Signed diagonal coefficients in ambient coordinate order.
    signed: Vec<Rational>,
    signed_f64: Vec<f64>,
    /// Canonical index -> ambient index, positive coefficients first.
    perm: Vec<usize>,
    k: usize,
    q1: PositiveForm,
    q2: PositiveForm,
    s_lcm: BigInt,
    /// `s_lcm * |a_i|` in canonical order.
    numerators: Vec<BigInt>,
    /// `M` with `Q(v) = Q_general(M v)`; `None` means the identity.
    transform: Option<RatMatrix>,
    general: Option<RatMatrix>,
}

impl QuadraticForm {
    /// Builds a form from its diagonal coefficients in ambient order.
    pub fn from_diagonal(coeffs: Vec<Rational>) -> Result<Self> {
        Self::build(coeffs, None, None)
    }

    fn build(signed: Vec<Rational>, transform: Option<RatMatrix>, general: Option<RatMatrix>) -> Result<Self> {
        if signed.len() < 2 {
            return Err(Error::Precondition(format!("form needs at least 2 variables, got {}", signed.len())));
        }
        if signed.iter().any(|c| c.is_zero()) {
            return Err(Error::Degenerate);
        }
        let mut perm: Vec<usize> = (0..signed.len()).filter(|&i| signed[i].is_positive()).collect();
        let k = perm.len();
        perm.extend((0..signed.len()).filter(|&i| signed[i].is_negative()));
        if k == 0 || k == signed.len() {
            return Err(Error::Definite);
        }
        let q1 = PositiveForm::new(perm[..k].iter().map(|&i| signed[i].clone()).collect());
        let q2 = PositiveForm::new(perm[k..].iter().map(|&i| -signed[i].clone()).collect());
        let s_lcm = lcm_denominators(&signed);
        let numerators = perm
            .iter()
            .map(|&i| {
                let scaled = signed[i].abs() * Rational::from_integer(s_lcm.clone());
                debug_assert!(scaled.is_integer());
                scaled.to_integer()
            })
            .collect();
        let signed_f64 = signed.iter().map(to_f64).collect();
        Ok(QuadraticForm { signed, signed_f64, perm, k, q1, q2, s_lcm, numerators, transform, general })
    }

    /// Parses `"1,1,-1"`-style diagonal coefficients or a row-major JSON symmetric matrix.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.starts_with("[[") || (t.starts_with('[') && t[1..].trim_start().starts_with('[')) {
            let raw: Vec<Vec<serde_json::Value>> =
                serde_json::from_str(t).map_err(|e| Error::Parse(format!("form matrix: {e}")))?;
            let matrix = raw
                .into_iter()
                .map(|row| row.into_iter().map(json_rational).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            return Self::diagonalize(&matrix);
        }
        let coeffs = t
            .trim_start_matches('[')
            .trim_end_matches(']')
            .split(',')
            .map(|c| parse_rational(c.trim().trim_matches('"')))
            .collect::<Result<Vec<_>>>()?;
        Self::from_diagonal(coeffs)
    }

    /// Rational congruence reduction of a symmetric matrix `A` (with `Q(x) = x^T A x`).
    ///
    /// Zero pivots are handled with a diagonal swap when possible, otherwise with the
    /// hyperbolic substitution `e_i -> e_i + e_j`, `e_j -> e_i - e_j`.
    pub fn diagonalize(matrix: &RatMatrix) -> Result<Self> {
        let n = matrix.len();
        if n < 2 {
            return Err(Error::Precondition("matrix must be at least 2x2".into()));
        }
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            for j in 0..i {
                if row[j] != matrix[j][i] {
                    return Err(Error::Precondition(format!("matrix not symmetric at ({i},{j})")));
                }
            }
        }
        // columns of `basis` are the new basis vectors
        let mut basis = identity(n);
        let mut i = 0;
        while i < n {
            let a = congruent(matrix, &basis);
            if !a[i][i].is_zero() {
                let pivot = a[i][i].clone();
                for j in i + 1..n {
                    if a[i][j].is_zero() {
                        continue;
                    }
                    let f = &a[i][j] / &pivot;
                    for row in basis.iter_mut() {
                        let delta = &f * &row[i];
                        row[j] -= delta;
                    }
                }
                i += 1;
                continue;
            }
            if let Some(j) = (i + 1..n).find(|&j| !a[j][j].is_zero()) {
                swap_columns(&mut basis, i, j);
                continue;
            }
            let Some(j) = (i + 1..n).find(|&j| !a[i][j].is_zero()) else {
                return Err(Error::Degenerate);
            };
            if j != i + 1 {
                swap_columns(&mut basis, i + 1, j);
            }
            for row in basis.iter_mut() {
                let (x, y) = (row[i].clone(), row[i + 1].clone());
                row[i] = &x + &y;
                row[i + 1] = x - y;
            }
        }
        let d = congruent(matrix, &basis);
        let diag: Vec<Rational> = (0..n).map(|i| d[i][i].clone()).collect();
        let transform = (basis != identity(n)).then_some(basis);
        Self::build(diag, transform, Some(matrix.clone()))
    }

    pub fn dim(&self) -> usize {
        self.signed.len()
    }

    /// `d`, with the form living on `R^{d+1}`.
    pub fn d(&self) -> usize {
        self.signed.len() - 1
    }

    /// Number of positive coefficients.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ell(&self) -> usize {
        self.signed.len() - self.k
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn signed_coeffs(&self) -> &[Rational] {
        &self.signed
    }

    pub fn signed_coeffs_f64(&self) -> &[f64] {
        &self.signed_f64
    }

    pub fn s_lcm(&self) -> &BigInt {
        &self.s_lcm
    }

    pub fn numerators(&self) -> &[BigInt] {
        &self.numerators
    }

    pub fn transform(&self) -> Option<&RatMatrix> {
        self.transform.as_ref()
    }

    pub fn general_matrix(&self) -> Option<&RatMatrix> {
        self.general.as_ref()
    }

    pub fn split(&self) -> (&PositiveForm, &PositiveForm) {
        (&self.q1, &self.q2)
    }

    pub fn q1(&self) -> &PositiveForm {
        &self.q1
    }

    pub fn q2(&self) -> &PositiveForm {
        &self.q2
    }

    /// Exact `sum a_i v_i^2`.
    pub fn evaluate(&self, v: &[Rational]) -> Result<Rational> {
        self.check_len(v.len())?;
        Ok(self.signed.iter().zip(v).fold(Rational::zero(), |acc, (a, x)| acc + a * x * x))
    }

    pub fn evaluate_int(&self, v: &[i64]) -> Result<Rational> {
        self.check_len(v.len())?;
        let v: Vec<Rational> = v.iter().map(|&x| Rational::from_integer(x.into())).collect();
        self.evaluate(&v)
    }

    pub fn evaluate_f64(&self, v: &[f64]) -> f64 {
        self.signed_f64.iter().zip(v).map(|(a, x)| a * x * x).sum()
    }

    /// Evaluates the original general form `x^T A x`, when the form came from a matrix.
    pub fn evaluate_general(&self, x: &[Rational]) -> Result<Rational> {
        let Some(a) = &self.general else {
            return self.evaluate(x);
        };
        self.check_len(x.len())?;
        let mut acc = Rational::zero();
        for (i, row) in a.iter().enumerate() {
            for (j, aij) in row.iter().enumerate() {
                acc += aij * &x[i] * &x[j];
            }
        }
        Ok(acc)
    }

    /// `M v`, or `v` itself when there is no transform.
    pub fn apply_transform(&self, v: &[Rational]) -> Vec<Rational> {
        match &self.transform {
            None => v.to_vec(),
            Some(m) => mat_vec(m, v),
        }
    }

    pub fn split_vector<T: Clone>(&self, x: &[T]) -> SplitVector<T> {
        SplitVector {
            w: self.perm[..self.k].iter().map(|&i| x[i].clone()).collect(),
            u: self.perm[self.k..].iter().map(|&i| x[i].clone()).collect(),
        }
    }

    pub fn join<T: Clone + Default>(&self, v: &SplitVector<T>) -> Vec<T> {
        let mut out = vec![T::default(); self.dim()];
        for (c, &i) in self.perm.iter().enumerate() {
            out[i] = if c < self.k { v.w[c].clone() } else { v.u[c - self.k].clone() };
        }
        out
    }

    /// Closed-form norm constants. `c_2q = max(max sqrt(a_i), 1/min sqrt(a_i))` per block;
    /// `c_s` follows from `c_2q`, the block sizes and the sup/Euclidean comparison.
    pub fn norm_constants(&self) -> NormConstants {
        let c_2q1 = self.q1.c_2q();
        let c_2q2 = self.q2.c_2q();
        let k = self.k as f64;
        let ell = self.ell() as f64;
        // ||w||_q1 + ||u||_q2 <= (c_2q1 sqrt k + c_2q2 sqrt l) ||x||_inf
        // ||x||_inf <= max(c_2q1, c_2q2) (||w||_q1 + ||u||_q2)
        let c_s = (c_2q1 * k.sqrt() + c_2q2 * ell.sqrt()).max(c_2q1.max(c_2q2)).max(1.0);
        NormConstants { c_s, c_2q1, c_2q2 }
    }

    /// Sampled estimate of the tightest `c_s`; never larger than the closed form.
    pub fn sample_c_s(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 1.0;
        let mut x = vec![0.0; self.dim()];
        for n in 0..samples {
            for (i, xi) in x.iter_mut().enumerate() {
                // every third sample is sparse so coordinate-aligned extremes are hit
                *xi = if n % 3 == 0 && rng.gen_bool(0.5) && i > 0 { 0.0 } else { rng.gen_range(-1.0..1.0) };
            }
            let sup = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if sup == 0.0 {
                continue;
            }
            let sv = self.split_vector(&x);
            let sum = self.q1.norm(&sv.w) + self.q2.norm(&sv.u);
            worst = worst.max(sum / sup).max(sup / sum);
        }
        worst
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got });
        }
        Ok(())
    }

    /// Largest denominator among the entries of the transform, 1 for diagonal input.
    pub fn transform_max_denominator(&self) -> BigInt {
        self.transform.iter().flatten().flatten().map(|e| e.denom().abs()).max().unwrap_or_else(BigInt::one)
    }
}

impl fmt::Display for QuadraticForm {
    /// Diagonal coefficients in ambient order, e.g. `1,1,-1` or `1/2,-3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.signed.iter().map(|c| if c.is_integer() { c.numer().to_string() } else { c.to_string() }).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Serialized form: diagonal coefficients and, for general input, the original matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FormSpec {
    pub coeffs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<String>>>,
}

impl From<&QuadraticForm> for FormSpec {
    fn from(q: &QuadraticForm) -> Self {
        FormSpec {
            coeffs: q.signed.iter().map(fmt_rational).collect(),
            matrix: q.general.as_ref().map(|m| m.iter().map(|r| r.iter().map(fmt_rational).collect()).collect()),
        }
    }
}

impl TryFrom<FormSpec> for QuadraticForm {
    type Error = Error;

    fn try_from(spec: FormSpec) -> Result<Self> {
        if let Some(m) = spec.matrix {
            let m = m
                .iter()
                .map(|r| r.iter().map(|e| parse_rational(e)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            let q = Self::diagonalize(&m)?;
            return Ok(q);
        }
        let coeffs = spec.coeffs.iter().map(|c| parse_rational(c)).collect::<Result<Vec<_>>>()?;
        Self::from_diagonal(coeffs)
    }
}

impl Serialize for QuadraticForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FormSpec::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for QuadraticForm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = FormSpec::deserialize(d)?;
        QuadraticForm::try_from(spec).map_err(serde::de::Error::custom)
    }
}

fn json_rational(v: serde_json::Value) -> Result<Rational> {
    match v {
        serde_json::Value::String(s) => parse_rational(&s),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(Rational::from_integer(i.into()))
            } else {
                parse_rational(&n.to_string())
            }
        }
        other => Err(Error::Parse(format!("matrix entry {other} is not a number"))),
    }
}

fn identity(n: usize) -> RatMatrix {
    (0..n).map(|i| (0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }).collect()).collect()
}

fn swap_columns(m: &mut RatMatrix, i: usize, j: usize) {
    for row in m.iter_mut() {
        row.swap(i, j);
    }
}

/// `P^T A P`.
fn congruent(a: &RatMatrix, p: &RatMatrix) -> RatMatrix {
    let n = a.len();
    let mut ap = vec![vec![Rational::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                if !a[i][l].is_zero() && !p[l][j].is_zero() {
                    ap[i][j] += &a[i][l] * &p[l][j];
                }
            }
        }
    }
    let mut out = vec![vec![Rational::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                if !p[l][i].is_zero() && !ap[l][j].is_zero() {
                    out[i][j] += &p[l][i] * &ap[l][j];
                }
            }
        }
    }
    out
}

pub fn mat_vec(m: &RatMatrix, v: &[Rational]) -> Vec<Rational> {
    m.iter().map(|row| row.iter().zip(v).fold(Rational::zero(), |acc, (a, x)| acc + a * x)).collect()
}

pub fn mat_to_f64(m: &RatMatrix) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.iter().map(|e| e.to_f64().unwrap_or(f64::NAN)).collect()).collect()
}

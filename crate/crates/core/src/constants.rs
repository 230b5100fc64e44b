//! Every derived constant the strategy needs, computed once per (form, m) and cached.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, OnceLock};

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::QuadraticForm;
use crate::geometry::{
    component_geometry, estimate_c_m, estimate_c_pi, taylor_radius_min, PiEstimate, C_PI_SAFETY, DIAMETER_SAFETY,
    MISS_RAY_SAFETY,
};
use crate::lattice::p0_set;
use crate::rational::{to_f64, Rational};
use crate::separation::{kappa0, KappaInputs};
use crate::Variant;

pub const DEFAULT_EPS: f64 = 1e-3;
pub const DEFAULT_MESH: f64 = 1e-3;
/// Coarsest mesh used automatically for `d >= 3`.
pub const MESH_D3: f64 = 0.02;
pub const PI_SAMPLES: usize = 1_000_000;
pub const C_M_SAMPLES: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstOptions {
    pub eps: f64,
    pub mesh: f64,
    pub seed: u64,
}

impl Default for ConstOptions {
    fn default() -> Self {
        ConstOptions { eps: DEFAULT_EPS, mesh: DEFAULT_MESH, seed: 0x5eed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeomConstants {
    pub variant: Variant,
    pub d: usize,
    pub c_s: f64,
    pub c_s_sampled: f64,
    pub c_2q1: f64,
    pub c_2q2: f64,
    pub c_q1: f64,
    pub c_q2: f64,
    pub c_pi: f64,
    pub c_pi_raw: f64,
    pub c_m: f64,
    pub c_2s: f64,
    pub c_2s_prime: f64,
    pub kappa0: f64,
    pub alpha: f64,
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    pub eps: f64,
    pub mesh: f64,
    pub r_eps: f64,
    pub r0: f64,
    /// Name of the term attaining the minimum in `R0`.
    pub r0_binding: String,
    pub r0_terms: Vec<(String, f64)>,
}

fn pi_estimate(d: usize) -> PiEstimate {
    static CACHE: OnceLock<Mutex<HashMap<usize, PiEstimate>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(e) = cache.lock().expect("c_pi cache").get(&d) {
        return *e;
    }
    let e = estimate_c_pi(d, PI_SAMPLES, 0xC0FFEE + d as u64);
    cache.lock().expect("c_pi cache").insert(d, e);
    e
}

impl GeomConstants {
    /// Cached by (form, m, options).
    pub fn get(form: &QuadraticForm, m: &Rational, opts: ConstOptions) -> Result<GeomConstants> {
        type Key = (String, String, u64, u64, u64);
        static CACHE: OnceLock<Mutex<HashMap<Key, GeomConstants>>> = OnceLock::new();
        let key = (form.to_string(), m.to_string(), opts.eps.to_bits(), opts.mesh.to_bits(), opts.seed);
        let cache = CACHE.get_or_init(Default::default);
        if let Some(c) = cache.lock().expect("constants cache").get(&key) {
            return Ok(c.clone());
        }
        let c = Self::compute(form, m, opts)?;
        cache.lock().expect("constants cache").insert(key, c.clone());
        Ok(c)
    }

    pub fn compute(form: &QuadraticForm, m: &Rational, opts: ConstOptions) -> Result<GeomConstants> {
        let d = form.d();
        if d < 2 {
            return Err(Error::Precondition("the game and its constants need d >= 2".into()));
        }
        if !(opts.eps > 0.0 && opts.eps < 1.0) {
            return Err(Error::Precondition(format!("eps = {} must lie in (0, 1)", opts.eps)));
        }
        let variant = Variant::for_m(m);
        let k = KappaInputs::for_form(form);
        let kappa0 = kappa0(form, &k);
        let pi = pi_estimate(d);
        let c_m = estimate_c_m(form, C_M_SAMPLES, opts.seed);
        let alpha = 1.0 / (8.0 * c_m * c_m * pi.c_pi * pi.c_pi);
        let mesh = if d >= 3 { opts.mesh.max(MESH_D3) } else { opts.mesh };
        let comps = component_geometry(form, mesh)?;
        let p0 = p0_set(form, m, variant)?;
        let r_eps = taylor_radius_min(form, opts.eps);
        let abs_m = to_f64(&m.abs());
        let (kappa_name, kappa_term) = match variant {
            Variant::Level => ("1/(6 kappa0 sqrt|m|)", 1.0 / (6.0 * kappa0 * abs_m.sqrt())),
            Variant::Lightcone => ("1/(2 kappa0)", 1.0 / (2.0 * kappa0)),
        };
        let terms = vec![
            (kappa_name.to_string(), kappa_term),
            ("d0/2".to_string(), p0.d0 / 2.0),
            ("d1/2".to_string(), comps.d1 / 2.0),
            ("d2/2".to_string(), comps.d2 / 2.0),
            ("1/2".to_string(), 0.5),
            ("c_pi/sqrt(d)".to_string(), pi.c_pi / (d as f64).sqrt()),
            ("R(eps)".to_string(), r_eps),
        ];
        let (binding, min) =
            terms
                .iter()
                .fold((String::new(), f64::INFINITY), |acc, (n, v)| if *v < acc.1 { (n.clone(), *v) } else { acc });
        let (c_2s, c_2s_prime) = (
            match variant {
                // ||w|| >= sqrt(8/9) ||u|| once ||u|| >= 3 sqrt|m|
                Variant::Level => (1.0 + (8.0f64 / 9.0).sqrt()) / k.c_s,
                Variant::Lightcone => 2.0 / k.c_s,
            },
            1.0 / ((d + 1) as f64).sqrt(),
        );
        let out = GeomConstants {
            variant,
            d,
            c_s: k.c_s,
            c_s_sampled: form.sample_c_s(100_000, opts.seed),
            c_2q1: k.c_2q1,
            c_2q2: k.c_2q2,
            c_q1: k.c_q1,
            c_q2: k.c_q2,
            c_pi: pi.c_pi,
            c_pi_raw: pi.max_ratio,
            c_m,
            c_2s,
            c_2s_prime,
            kappa0,
            alpha,
            d0: p0.d0,
            d1: comps.d1,
            d2: comps.d2,
            eps: opts.eps,
            mesh,
            r_eps,
            r0: min / 3.0,
            r0_binding: binding,
            r0_terms: terms,
        };
        out.check_positive()?;
        Ok(out)
    }

    fn check_positive(&self) -> Result<()> {
        let named = [
            ("c_s", self.c_s),
            ("c_q1", self.c_q1),
            ("c_q2", self.c_q2),
            ("c_pi", self.c_pi),
            ("kappa0", self.kappa0),
            ("alpha", self.alpha),
            ("d0", self.d0),
            ("d1", self.d1),
            ("d2", self.d2),
            ("R(eps)", self.r_eps),
            ("R0", self.r0),
        ];
        for (n, v) in named {
            if !(v > 0.0) {
                return Err(Error::Invariant(format!("constant {n} = {v} is not positive")));
            }
        }
        Ok(())
    }

    /// `{name: {"value", "method", "samples", "safety"}}`; `R0` also names its binding term.
    pub fn report(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Entry {
            value: f64,
            method: &'static str,
            #[serde(skip_serializing_if = "Option::is_none")]
            samples: Option<usize>,
            #[serde(skip_serializing_if = "Option::is_none")]
            safety: Option<f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            binding: Option<String>,
        }
        let closed = |value| Entry { value, method: "closed-form", samples: None, safety: None, binding: None };
        let sampled = |value, samples, safety| Entry {
            value,
            method: "sampled",
            samples: Some(samples),
            safety: Some(safety),
            binding: None,
        };
        let mut map: BTreeMap<&str, Entry> = BTreeMap::new();
        map.insert("c_s", closed(self.c_s));
        map.insert("c_s_sampled", sampled(self.c_s_sampled, 100_000, 1.0));
        map.insert("c_2q1", closed(self.c_2q1));
        map.insert("c_2q2", closed(self.c_2q2));
        map.insert("c_q1", sampled(self.c_q1, 1_000_000, MISS_RAY_SAFETY));
        map.insert("c_q2", sampled(self.c_q2, 1_000_000, MISS_RAY_SAFETY));
        map.insert("c_pi", sampled(self.c_pi, PI_SAMPLES, C_PI_SAFETY));
        map.insert("c_M", sampled(self.c_m, C_M_SAMPLES, C_PI_SAFETY));
        map.insert("c_2s", closed(self.c_2s));
        map.insert("c_2s_prime", closed(self.c_2s_prime));
        map.insert("kappa0", closed(self.kappa0));
        map.insert("alpha", closed(self.alpha));
        map.insert("d0", closed(self.d0));
        map.insert("d1", sampled(self.d1, 0, DIAMETER_SAFETY));
        map.insert("d2", sampled(self.d2, 0, 1.0));
        map.insert("eps", closed(self.eps));
        map.insert("R_eps", closed(self.r_eps));
        map.insert(
            "R0",
            Entry {
                value: self.r0,
                method: "closed-form",
                samples: None,
                safety: None,
                binding: Some(self.r0_binding.clone()),
            },
        );
        let mut v = serde_json::to_value(map).expect("report serializes");
        // infinite sentinels are not JSON numbers
        if let Some(obj) = v.as_object_mut() {
            for (name, val) in [("d0", self.d0), ("d2", self.d2)] {
                if val.is_infinite() {
                    obj[name]["value"] = serde_json::Value::String("inf".into());
                }
            }
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    #[test]
    fn cone_constants() {
        let q = QuadraticForm::parse("1,1,-1").unwrap();
        let c = GeomConstants::get(&q, &int(0), ConstOptions::default()).unwrap();
        assert_eq!(c.variant, Variant::Lightcone);
        assert!((c.c_s - (1.0 + 2f64.sqrt())).abs() < 1e-12);
        assert!(c.kappa0 > 200.0 && c.kappa0 < 230.0, "{}", c.kappa0);
        assert_eq!(c.d0, f64::INFINITY);
        assert!(c.alpha > 0.0 && c.alpha < 1.0 / 8.0);
        assert!((c.r0 - c.r0_terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min) / 3.0).abs() < 1e-18);
        assert_eq!(c.r0_binding, "R(eps)");
        let rep = c.report();
        assert_eq!(rep["R0"]["binding"], "R(eps)");
        assert_eq!(rep["d0"]["value"], "inf");
        assert_eq!(rep["c_pi"]["method"], "sampled");
    }

    #[test]
    fn level_constants() {
        let q = QuadraticForm::parse("1,1,-1").unwrap();
        let c = GeomConstants::get(&q, &int(1), ConstOptions::default()).unwrap();
        assert_eq!(c.variant, Variant::Level);
        assert!(c.d0.is_finite() && c.d0 > 0.0);
        assert!(c.c_2s > 0.0);
    }

    #[test]
    fn d1_forms_are_rejected() {
        let q = QuadraticForm::parse("1,-1").unwrap();
        assert!(GeomConstants::compute(&q, &int(3), ConstOptions::default()).is_err());
    }
}

//! The repulsion constant `κ0` and finite checks that inequivalent normalized lattice
//! points stay `8/(Kκ0)` apart.

use std::collections::{HashMap, HashSet};
use std::sync::{Mutex, OnceLock};

use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::QuadraticForm;
use crate::geometry::miss_ray_constant;
use crate::lattice::{
    enumerate_window, equiv_key, normalized_dist_sq, sign_canonical, EquivKey, LatticePoint, Relation, ShellBound,
    Window,
};
use crate::rational::{from_f64, to_f64, Rational};
use crate::Variant;

/// Above this many candidate pairs the scan switches from all pairs to exact bucketing.
pub const PAIR_CAP: usize = 100_000;

/// Constants entering `κ0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaInputs {
    pub s: f64,
    pub c_s: f64,
    pub c_2q1: f64,
    pub c_2q2: f64,
    pub c_q1: f64,
    pub c_q2: f64,
    /// Square of the largest denominator among the entries of `M` (1 for diagonal input).
    pub transform_factor: f64,
}

impl KappaInputs {
    pub fn for_form(form: &QuadraticForm) -> Self {
        static CACHE: OnceLock<Mutex<HashMap<String, (f64, f64)>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let key = form.to_string();
        let cached = cache.lock().expect("miss-ray cache").get(&key).copied();
        let (c_q1, c_q2) = cached.unwrap_or_else(|| {
            let v = (miss_ray_constant(form.q1()), miss_ray_constant(form.q2()));
            cache.lock().expect("miss-ray cache").insert(key, v);
            v
        });
        let nc = form.norm_constants();
        let den = form.transform_max_denominator().to_f64().unwrap_or(f64::INFINITY);
        KappaInputs {
            s: form.s_lcm().to_f64().unwrap_or(f64::INFINITY),
            c_s: nc.c_s,
            c_2q1: nc.c_2q1,
            c_2q2: nc.c_2q2,
            c_q1,
            c_q2,
            transform_factor: den * den,
        }
    }
}

/// `κ0 = 8 sqrt(10 s) c_s (1 + 1/sqrt 3) max(c_2q1, c_2q2) / min(c_q1, c_q2)`.
pub fn kappa0(_form: &QuadraticForm, k: &KappaInputs) -> f64 {
    8.0 * (10.0 * k.s).sqrt() * k.c_s * (1.0 + 1.0 / 3f64.sqrt()) * k.c_2q1.max(k.c_2q2) / k.c_q1.min(k.c_q2)
        * k.transform_factor
}

pub fn kappa0_for(form: &QuadraticForm) -> f64 {
    kappa0(form, &KappaInputs::for_form(form))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub k: f64,
    pub m: String,
    pub variant: Variant,
    /// Lattice points in the window.
    pub count: usize,
    /// Distinct classes compared.
    pub classes: usize,
    /// `None` when fewer than two inequivalent points exist.
    pub min_dist: Option<f64>,
    /// Exact squared minimum as `p/q`.
    pub min_dist_sq: Option<String>,
    pub bound: f64,
    pub ratio: Option<f64>,
    pub kappa0: f64,
    /// `8 / (K min_dist)`: the largest `κ0` the data would allow.
    pub empirical_kappa: Option<f64>,
    pub witnesses: Option<(Vec<i64>, Vec<i64>)>,
    pub bucketed: bool,
}

impl SeparationReport {
    pub fn holds(&self) -> bool {
        self.ratio.is_none_or(|r| r >= 1.0)
    }

    pub const CSV_HEADER: &'static str = "K,count,min_dist,bound,ratio";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("inf".to_string(), |x| x.to_string());
        format!("{},{},{},{},{}", self.k, self.count, opt(self.min_dist), self.bound, opt(self.ratio))
    }
}

fn lower_shell(m: &Rational, variant: Variant, factor: i64) -> Rational {
    match variant {
        Variant::Level => m.abs() * Rational::from_integer((factor * factor).into()),
        Variant::Lightcone => Rational::from_integer(1.into()),
    }
}

fn check_pre(m: &Rational, k: f64, variant: Variant, factor: i64) -> Result<Rational> {
    if Variant::for_m(m) != variant {
        return Err(Error::Precondition(format!("variant {variant:?} does not match m = {m}")));
    }
    let lo_sq = lower_shell(m, variant, factor);
    let k_rat = from_f64(k)?;
    if !(k.is_finite()) || &k_rat * &k_rat < lo_sq {
        return Err(Error::Precondition(format!("K = {k} is below the lower shell")));
    }
    Ok(lo_sq)
}

/// One signed normalized representative of a class.
struct Rep {
    x: Vec<i64>,
    class: usize,
    f: Vec<f64>,
}

/// Minimum of the exact distance over pairs of representatives in different classes.
fn min_pair(reps: &[Rep]) -> Result<Option<(Rational, Vec<i64>, Vec<i64>, bool)>> {
    let n = reps.len();
    let pairs = n * n.saturating_sub(1) / 2;
    let candidates: Vec<(usize, usize)> = if pairs <= PAIR_CAP {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| reps[i].class != reps[j].class).collect()
    } else {
        bucket_candidates(reps)
    };
    let mut best: Option<(Rational, (Vec<i64>, Vec<i64>))> = None;
    for (i, j) in candidates {
        let d = normalized_dist_sq(&reps[i].x, &reps[j].x)?;
        let pair = oriented(&reps[i].x, &reps[j].x);
        let better = match &best {
            None => true,
            Some((bd, bp)) => d < *bd || (d == *bd && pair > *bp),
        };
        if better {
            best = Some((d, pair));
        }
    }
    Ok(best.map(|(d, (a, b))| (d, a, b, pairs > PAIR_CAP)))
}

/// The pair flipped so the first vector is sign-canonical, then sorted.
fn oriented(a: &[i64], b: &[i64]) -> (Vec<i64>, Vec<i64>) {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    if sign_canonical(&a) != crate::lattice::primitive(&a) {
        a.iter_mut().for_each(|v| *v = -*v);
        b.iter_mut().for_each(|v| *v = -*v);
    }
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Exact candidate set for the closest pair: a neighbor scan gives an upper bound `u`,
/// and every pair within `u` lies in adjacent cells of a grid of side `u`.
fn bucket_candidates(reps: &[Rep]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..reps.len()).collect();
    order.sort_by(|&a, &b| reps[a].f.partial_cmp(&reps[b].f).expect("finite"));
    let mut upper = f64::INFINITY;
    for w in 0..order.len() {
        for v in w + 1..(w + 32).min(order.len()) {
            let (a, b) = (&reps[order[w]], &reps[order[v]]);
            if a.class != b.class {
                upper = upper.min(crate::geometry::dist2(&a.f, &b.f));
            }
        }
    }
    if !upper.is_finite() {
        return (0..reps.len())
            .flat_map(|i| (i + 1..reps.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| reps[i].class != reps[j].class)
            .collect();
    }
    let cell = upper * (1.0 + 1e-9) + 1e-15;
    let key = |f: &[f64]| f.iter().map(|v| (v / cell).floor() as i64).collect::<Vec<i64>>();
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, r) in reps.iter().enumerate() {
        grid.entry(key(&r.f)).or_default().push(i);
    }
    let mut out = Vec::new();
    for (i, r) in reps.iter().enumerate() {
        let base = key(&r.f);
        let mut cells = vec![base.clone()];
        for j in 0..base.len() {
            cells = cells
                .into_iter()
                .flat_map(|c| {
                    [-1, 0, 1].into_iter().map(move |dlt| {
                        let mut c2 = c.clone();
                        c2[j] += dlt;
                        c2
                    })
                })
                .collect();
        }
        for c in cells {
            if let Some(b) = grid.get(&c) {
                for &j in b {
                    if j > i && reps[j].class != r.class && crate::geometry::dist2(&r.f, &reps[j].f) <= cell {
                        out.push((i, j));
                    }
                }
            }
        }
    }
    out
}

fn window_for(lo_sq: Rational, k: f64) -> Result<Window> {
    Ok(Window { lo: ShellBound::inclusive(lo_sq), hi: ShellBound::from_f64(k, false)?, index: 0 })
}

/// Checks `||𝔭(x) - 𝔭(x')||_2 >= 8/(Kκ0)` over inequivalent pairs (`≈` on level surfaces,
/// `~` on the light cone) in the window `[3 sqrt|m|, K]` or `[1, K]`.
pub fn check_separation(form: &QuadraticForm, m: &Rational, k: f64, variant: Variant) -> Result<SeparationReport> {
    check_separation_with(form, m, k, variant, kappa0_for(form))
}

pub fn check_separation_with(
    form: &QuadraticForm,
    m: &Rational,
    k: f64,
    variant: Variant,
    kappa0: f64,
) -> Result<SeparationReport> {
    let lo_sq = check_pre(m, k, variant, 3)?;
    let points = enumerate_window(form, m, &window_for(lo_sq, k)?)?;
    let relation = match variant {
        Variant::Level => Relation::Approx,
        Variant::Lightcone => Relation::Sim,
    };
    // one ~-representative per class, in both signs; classes follow the relation
    let mut class_ids: HashMap<EquivKey, usize> = HashMap::new();
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut reps = Vec::new();
    for p in &points {
        let canon = sign_canonical(&p.x);
        if !seen.insert(canon.clone()) {
            continue;
        }
        let next = class_ids.len();
        let class = *class_ids.entry(equiv_key(form, p, relation)).or_insert(next);
        for x in [canon.clone(), canon.iter().map(|v| -v).collect()] {
            let f = crate::lattice::normalize_f64(&x)?;
            reps.push(Rep { x, class, f });
        }
    }
    let bound = 8.0 / (k * kappa0);
    let best = min_pair(&reps)?;
    let (min_dist, min_sq, witnesses, bucketed) = match best {
        None => (None, None, None, false),
        Some((sq, a, b, bucketed)) => {
            (Some(to_f64(&sq).sqrt()), Some(crate::rational::fmt_rational(&sq)), Some((a, b)), bucketed)
        }
    };
    Ok(SeparationReport {
        k,
        m: m.to_string(),
        variant,
        count: points.len(),
        classes: class_ids.len(),
        min_dist,
        min_dist_sq: min_sq,
        bound,
        ratio: min_dist.map(|d| d / bound),
        kappa0,
        empirical_kappa: min_dist.map(|d| 8.0 / (k * d)),
        witnesses,
        bucketed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSeparationReport {
    pub k: f64,
    pub count: usize,
    pub min_dist: Option<f64>,
    pub bound: f64,
    pub ratio: Option<f64>,
    pub witnesses: Option<(Vec<i64>, Vec<i64>)>,
}

impl ComponentSeparationReport {
    pub fn holds(&self) -> bool {
        self.ratio.is_none_or(|r| r >= 1.0)
    }
}

/// Separation of the q1 components: `||w/||x|| - w'/||x'|| ||_2 >= 16/(Kκ0)` for `w ≁ w'`
/// (level surfaces, window from `2 sqrt|m|`) or `x ≁_1 x'` (light cone, window from 1).
pub fn check_component_separation(
    form: &QuadraticForm,
    m: &Rational,
    k: f64,
    variant: Variant,
) -> Result<ComponentSeparationReport> {
    let lo_sq = check_pre(m, k, variant, 2)?;
    let points = enumerate_window(form, m, &window_for(lo_sq, k)?)?;
    let kappa0 = kappa0_for(form);
    let key = |p: &LatticePoint| match variant {
        Variant::Level => EquivKey::Sim(sign_canonical(&form.split_vector(&p.x).w)),
        Variant::Lightcone => equiv_key(form, p, Relation::Sim1),
    };
    let data: Vec<(EquivKey, Vec<f64>, &LatticePoint)> = points
        .iter()
        .map(|p| {
            let w = form.split_vector(&p.x).w;
            (key(p), w.iter().map(|v| *v as f64 / p.sup as f64).collect(), p)
        })
        .collect();
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..data.len() {
        for j in i + 1..data.len() {
            if data[i].0 == data[j].0 {
                continue;
            }
            let d = crate::geometry::dist2(&data[i].1, &data[j].1);
            if best.is_none_or(|b| d < b.0) {
                best = Some((d, i, j));
            }
        }
    }
    let bound = 16.0 / (k * kappa0);
    Ok(ComponentSeparationReport {
        k,
        count: points.len(),
        min_dist: best.map(|b| b.0),
        bound,
        ratio: best.map(|b| b.0 / bound),
        witnesses: best.map(|(_, i, j)| (data[i].2.x.clone(), data[j].2.x.clone())),
    })
}

/// Whether the level-surface window lower bound is `3 sqrt|m|` as an exact square.
pub fn level_lower_shell_sq(m: &Rational) -> Rational {
    if m.is_zero() {
        Rational::from_integer(1.into())
    } else {
        lower_shell(m, Variant::Level, 3)
    }
}

//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::BTreeSet;
use std::time::Instant;

use quadba::badness::{
    badness_margin, check_s_gt_2, classify_d1, full_lattice_escape, full_lattice_escape_exact, margin_curve,
    sample_surface, D1Kind, CURVE_NS,
};
use quadba::constants::{ConstOptions, GeomConstants};
use quadba::game::{run_game, GameConfig, Owner, PlayerB, Rules, Transcript, N_COVER};
use quadba::geometry::{check_slab, miss_ray_infimum};
use quadba::lattice::{cached_cloud, enumerate_window, Window};
use quadba::rational::{int, parse_rational_vector};
use quadba::separation::check_separation;
use quadba::{QuadraticForm, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn form(s: &str) -> QuadraticForm {
    QuadraticForm::parse(s).unwrap()
}

fn timed(name: &'static str, limit_s: f64, f: impl FnOnce() -> Result<String, String>) -> Outcome {
    let t = Instant::now();
    let r = f();
    let secs = t.elapsed().as_secs_f64();
    let (pass, detail) = match r {
        Ok(d) if secs < limit_s => (true, format!("{d}; {secs:.1}s < {limit_s:.0}s")),
        Ok(d) => (false, format!("{d}; too slow: {secs:.1}s >= {limit_s:.0}s")),
        Err(e) => (false, format!("{e}; {secs:.1}s")),
    };
    Outcome { name, pass, detail }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn separation_suite() -> Result<String, String> {
    let q = form("1,1,-1");
    let mut worst = f64::INFINITY;
    for (m, ks) in [(0i64, vec![5.0, 10.0, 25.0]), (1, vec![5.0, 10.0])] {
        let variant = Variant::for_m(&int(m));
        for k in ks {
            let r = check_separation(&q, &int(m), k, variant).map_err(|e| e.to_string())?;
            let ratio = r.ratio.unwrap_or(f64::INFINITY);
            ensure(ratio >= 1.0, || format!("m={m} K={k}: ratio {ratio}"))?;
            worst = worst.min(ratio);
            if m == 0 && k == 5.0 {
                let d = r.min_dist.ok_or("K=5 has no pair")?;
                ensure((d - 0.08f64.sqrt()).abs() <= 1e-9, || format!("K=5 min distance {d}"))?;
                let w = r.witnesses.clone().ok_or("no witness")?;
                let set: BTreeSet<Vec<i64>> = [w.0, w.1].into_iter().collect();
                let want: BTreeSet<Vec<i64>> = [vec![3, 4, 5], vec![4, 3, 5]].into_iter().collect();
                ensure(set == want, || format!("witness {set:?}"))?;
            }
        }
    }
    Ok(format!("5 windows, least ratio {worst:.3e}, K=5 minimum sqrt(0.08) at (3,4,5)/(4,3,5)"))
}

/// Integer coefficients of a diagonal form given as a comma list.
fn int_coeffs(s: &str) -> Vec<i64> {
    s.split(',').map(|c| c.trim().parse().unwrap()).collect()
}

/// Every nonzero `x` in a box with `Q(x) = m` and `lo <= ||u||_{q2} <= hi`, bounds given doubled.
fn brute(coeffs: &[i64], m: i64, lo2: i64, hi2: i64) -> Vec<Vec<i64>> {
    let dim = coeffs.len();
    let hi = (hi2 + 1) / 2;
    let min_c = coeffs.iter().map(|c| c.abs()).min().unwrap();
    let bound = (((m.abs() + hi * hi) as f64 / min_c as f64).sqrt().ceil() as i64) + 1;
    let mut out = Vec::new();
    let mut x = vec![-bound; dim];
    loop {
        let q: i64 = coeffs.iter().zip(&x).map(|(c, v)| c * v * v).sum();
        let u2: i64 = coeffs.iter().zip(&x).filter(|(c, _)| **c < 0).map(|(c, v)| -c * v * v).sum();
        if q == m && x.iter().any(|v| *v != 0) && lo2 * lo2 <= 4 * u2 && 4 * u2 <= hi2 * hi2 {
            out.push(x.clone());
        }
        let mut i = dim;
        loop {
            if i == 0 {
                out.sort();
                return out;
            }
            i -= 1;
            if x[i] < bound {
                x[i] += 1;
                break;
            }
            x[i] = -bound;
        }
    }
}

fn enumeration_oracle() -> Result<String, String> {
    let mut windows = Vec::new();
    for hi2 in [0i64, 1, 2, 5, 7, 10, 17, 26, 34, 45, 60] {
        for lo2 in [0, hi2 / 3, hi2 / 2 + 1, hi2] {
            if lo2 <= hi2 && !windows.contains(&(lo2, hi2)) {
                windows.push((lo2, hi2));
            }
        }
    }
    let mut cases = 0;
    let mut points = 0;
    for f in ["1,1,-1", "1,-1", "2,-3,-1"] {
        let q = form(f);
        let c = int_coeffs(f);
        for m in [0i64, 1, -1, 3] {
            for &(lo2, hi2) in &windows {
                let w = Window::closed(lo2 as f64 / 2.0, hi2 as f64 / 2.0).map_err(|e| e.to_string())?;
                let mut got: Vec<Vec<i64>> =
                    enumerate_window(&q, &int(m), &w).map_err(|e| e.to_string())?.into_iter().map(|p| p.x).collect();
                got.sort();
                let want = brute(&c, m, lo2, hi2);
                ensure(got == want, || {
                    format!(
                        "{f} m={m} [{}, {}]: {} vs {} points",
                        lo2 as f64 / 2.0,
                        hi2 as f64 / 2.0,
                        got.len(),
                        want.len()
                    )
                })?;
                cases += 1;
                points += want.len();
            }
        }
    }
    Ok(format!("{cases} windows, {points} points, all equal to brute force"))
}

struct GameRun {
    m: i64,
    transcript: Transcript,
}

fn game_config(seed: u64, rules: Rules) -> (GameConfig, PlayerB, i64) {
    let m = if seed % 4 < 2 { 0 } else { 1 };
    let player = if seed % 2 == 0 { PlayerB::adversarial(seed) } else { PlayerB::random(seed) };
    (GameConfig::new(form("1,1,-1"), int(m), rules, 0.5, seed, 30), player, m)
}

fn c_prime(lightcone: bool, alpha: f64, beta: f64, kappa0: f64, rho: f64, abs_m: f64) -> f64 {
    let ab = alpha * beta;
    let lin = if lightcone { ab * rho } else { 3.0 * ab * rho * abs_m.sqrt() };
    (ab * ab / (4.0 * kappa0)).min(ab * ab / 4.0).min(lin / (4.0 * kappa0)).min(lin / 4.0)
}

/// Rechecks rules, surface residuals and the miss predicate of a finished game.
fn verify_game(t: &Transcript, m: i64) -> Result<usize, String> {
    let q = &t.config.form;
    let coeffs = q.signed_coeffs_f64();
    let alpha = t.constants.alpha;
    let beta = t.config.beta;
    for (i, b) in t.moves.iter().enumerate() {
        let c = &b.center.coords;
        let val: f64 = q.evaluate_f64(c);
        let sup = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        ensure(val.abs() <= 1e-12 && (sup - 1.0).abs() <= 1e-12, || format!("move {i} off the variety"))?;
        if i == 0 {
            ensure(b.radius < t.constants.r0, || "B1 radius above R0".into())?;
            continue;
        }
        let prev = &t.moves[i - 1];
        let off = c.iter().zip(&prev.center.coords).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        ensure(off + b.radius <= prev.radius * (1.0 + 1e-9), || format!("move {i} not nested"))?;
        let factor = if b.owner == Owner::A { alpha } else { beta };
        let law = match t.config.variant {
            Rules::Classic => (b.radius - factor * prev.radius).abs() <= 1e-9 * factor * prev.radius,
            Rules::Strong => b.radius >= factor * prev.radius * (1.0 - 1e-9),
        };
        ensure(law, || format!("move {i} breaks the radius law"))?;
        if b.owner == Owner::A {
            ensure((b.radius - alpha * prev.radius).abs() <= 1e-12 * b.radius, || format!("A radius at move {i}"))?;
        }
    }
    let lightcone = m == 0;
    let cp = c_prime(lightcone, alpha, beta, t.constants.kappa0, t.moves[2].radius, (m as f64).abs());
    let snap = t.constants.c_prime.ok_or("no c'")?;
    ensure((cp - snap).abs() <= 1e-12 * cp, || format!("c' {snap} vs {cp}"))?;
    let b_sum: f64 = coeffs.iter().filter(|c| **c < 0.0).map(|c| -c).sum();
    let cloud = cached_cloud(q, &int(m), N_COVER * b_sum.sqrt()).map_err(|e| e.to_string())?;
    let wins: Vec<(usize, f64, f64)> = t.evidence.iter().map(|e| (e.window.index, e.window.lo, e.window.hi)).collect();
    let mut checked = 0;
    for p in &cloud.points {
        // the window holding p, by its q2 norm
        let Some(&(idx, _, _)) = wins.iter().find(|(i, lo, hi)| match i {
            0 => p.q2 < *hi,
            1 => p.q2 >= *lo && p.q2 <= *hi,
            _ => p.q2 > *lo && p.q2 <= *hi,
        }) else {
            continue;
        };
        let a = &t.moves[2 * idx + 1];
        let r = if idx == 0 { 0.0 } else { cp * t.constants.c_2s / (2.0 * p.sup as f64) };
        let sup = p.x.iter().map(|v| v.abs()).max().unwrap() as f64;
        let np: Vec<f64> = p.x.iter().map(|v| *v as f64 / sup).collect();
        let d = np.iter().zip(&a.center.coords).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        ensure(d >= 3.0 * a.radius + r, || format!("{:?} inside the tripled A ball of round {}", p.x, idx + 1))?;
        checked += 1;
    }
    Ok(checked)
}

fn play_all() -> Result<Vec<GameRun>, String> {
    let jobs: Vec<(u64, Rules)> = (1..=50).flat_map(|s| [(s, Rules::Classic), (s, Rules::Strong)]).collect();
    jobs.par_iter()
        .map(|&(seed, rules)| {
            let (cfg, mut player, m) = game_config(seed, rules);
            let t = run_game(cfg, &mut player).map_err(|e| format!("seed {seed} {rules:?}: {e}"))?;
            Ok(GameRun { m, transcript: t })
        })
        .collect()
}

fn game_invariant(runs: &Result<Vec<GameRun>, String>) -> Result<String, String> {
    let runs = runs.as_ref().map_err(|e| e.clone())?;
    ensure(runs.len() == 100, || format!("{} games", runs.len()))?;
    let checks: Vec<usize> = runs
        .par_iter()
        .map(|g| {
            ensure(g.transcript.moves.len() == 60, || "game ended early".into())?;
            ensure(g.transcript.evidence.iter().all(|e| e.min_slack.is_none_or(|s| s >= 0.0)), || {
                "negative slack recorded".into()
            })?;
            verify_game(&g.transcript, g.m)
        })
        .collect::<Result<_, String>>()?;
    let moved = runs.iter().flat_map(|g| &g.transcript.evidence).filter(|e| e.danger > 0).count();
    Ok(format!(
        "100 games x 30 rounds, {} point clearances rechecked, {moved} rounds where A had to move",
        checks.iter().sum::<usize>()
    ))
}

fn certificate_vs_margin(runs: &Result<Vec<GameRun>, String>) -> Result<String, String> {
    let runs = runs.as_ref().map_err(|e| e.clone())?;
    let picked: Vec<&GameRun> =
        runs.iter().filter(|g| g.m == 0).take(5).chain(runs.iter().filter(|g| g.m == 1).take(5)).collect();
    ensure(picked.len() == 10, || "not enough games".into())?;
    let mut least = f64::INFINITY;
    for g in picked {
        let cert = g.transcript.certificate.as_ref().ok_or("no certificate")?;
        ensure(cert.sup_bound >= 10_000.0, || format!("certificate only covers sup <= {}", cert.sup_bound))?;
        let q = &g.transcript.config.form;
        let curve = margin_curve(q, &int(g.m), &cert.v, 1.0, &CURVE_NS).map_err(|e| e.to_string())?;
        ensure(curve.curve_non_increasing(), || "margin curve increases".into())?;
        for p in &curve.margin_curve {
            let mg = p.margin.unwrap_or(f64::INFINITY);
            ensure(mg >= cert.c, || format!("margin {mg} < c = {} at N = {}", cert.c, p.n))?;
            least = least.min(mg / cert.c);
        }
    }
    Ok(format!("10 certificates, least margin/c = {least:.3e}"))
}

fn d1_classification() -> Result<String, String> {
    let h = form("1,-1");
    let c0 = classify_d1(&h, &int(0)).map_err(|e| e.to_string())?;
    ensure(c0.kind == D1Kind::Empty && c0.witness == Some(vec![1, 1]), || format!("m=0: {c0:?}"))?;
    let c3 = classify_d1(&h, &int(3)).map_err(|e| e.to_string())?;
    ensure(c3.kind == D1Kind::Full, || format!("m=3: {c3:?}"))?;
    let mg = badness_margin(&h, &int(3), &[1.0, 1.0], 1.0, 10_000).map_err(|e| e.to_string())?;
    ensure(mg.margin == Some(1.0), || format!("margin at (1,1) is {:?}", mg.margin))?;
    let q2 = form("2,-1");
    let c = classify_d1(&q2, &int(1)).map_err(|e| e.to_string())?;
    let thr = c.threshold.ok_or("no threshold")?;
    ensure(c.kind == D1Kind::Threshold && thr > 0.0, || format!("2x^2-y^2: {c:?}"))?;
    let v = [0.5f64.sqrt(), 1.0];
    let mg2 = badness_margin(&q2, &int(1), &v, 1.0, 10_000).map_err(|e| e.to_string())?;
    let m2 = mg2.margin.ok_or("no points")?;
    ensure(m2 > 0.0, || "zero margin for 2x^2-y^2".into())?;
    Ok(format!("x^2-y^2 empty/full with margin 1; 2x^2-y^2 threshold k sqrt2 = {thr:.4}, margin {m2:.3e} at N=1e4"))
}

fn s_gt_2() -> Result<String, String> {
    let q = form("1,1,-1");
    let samples = sample_surface(&q, 20, 2024);
    let r = check_s_gt_2(&q, &int(1), 3.0, &samples, 1000).map_err(|e| e.to_string())?;
    ensure(r.samples.iter().all(|s| s.margin.is_some_and(|m| m > 0.0)), || "a margin is not positive".into())?;
    ensure(r.samples.iter().all(|s| s.beyond_threshold == 0), || "solution past the |y| threshold".into())?;
    let ymax = r.samples.iter().map(|s| s.y_threshold).fold(0.0, f64::max);
    Ok(format!("20 points, least margin {:.3e}, largest |y| threshold {ymax:.2}", r.min_margin.unwrap()))
}

fn full_lattice() -> Result<String, String> {
    let q = form("1,1,-1");
    let exact = full_lattice_escape_exact(&parse_rational_vector("3/5,4/5,1").unwrap(), 0.01, 1_000_000)
        .map_err(|e| e.to_string())?;
    ensure(exact.n == Some(5) && exact.dist_exact.as_deref() == Some("0/1"), || format!("{exact:?}"))?;
    // 10 normalized lattice points and 10 random points
    let pts = enumerate_window(&q, &int(0), &Window::closed(5.0, 30.0).unwrap()).map_err(|e| e.to_string())?;
    let mut vs: Vec<Vec<f64>> =
        pts.iter().step_by(pts.len() / 10).take(10).map(|p| p.normalize_f64().unwrap()).collect();
    vs.extend(sample_surface(&q, 10, 99));
    let mut worst_n = 0;
    for v in &vs {
        let r = full_lattice_escape(v, 0.01, 1_000_000).map_err(|e| e.to_string())?;
        let n = r.n.ok_or_else(|| format!("no witness for {v:?} up to 1e6"))?;
        worst_n = worst_n.max(n);
    }
    Ok(format!("(3/5,4/5,1) exact at n=5; 20 points escape below 1e-2, largest n = {worst_n}"))
}

/// Independent sampler for the distortion of `x ↦ x / x_d` on the top thickened face.
fn pi_ratios(samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 3;
    let point = |rng: &mut ChaCha8Rng| loop {
        let mut x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let j = rng.gen_range(0..dim);
        x[j] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        if x[dim - 1] >= 0.5 {
            return x;
        }
    };
    let proj = |x: &[f64]| -> Vec<f64> { x.iter().map(|v| v / x[dim - 1]).collect() };
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..samples {
        let x = point(&mut rng);
        let y = if i % 2 == 0 {
            point(&mut rng)
        } else {
            let eps = 10f64.powf(rng.gen_range(-6.0..-1.0));
            let mut y: Vec<f64> = x.iter().map(|v| v + eps * rng.gen_range(-1.0..=1.0)).collect();
            let s = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            y.iter_mut().for_each(|v| *v /= s);
            if y[dim - 1] < 0.5 {
                continue;
            }
            y
        };
        let (a, b) = (d(&proj(&x), &proj(&y)), d(&x, &y));
        if a > 0.0 && b > 0.0 {
            lo = lo.min(a / b);
            hi = hi.max(a / b);
        }
    }
    (lo, hi)
}

fn geometry_constants() -> Result<String, String> {
    let cone = form("1,1,-1");
    let k = GeomConstants::get(&cone, &int(0), ConstOptions::default()).map_err(|e| e.to_string())?;
    let (lo, hi) = pi_ratios(1_000_000, 77);
    ensure(lo >= 1.0 / k.c_pi && hi <= k.c_pi, || format!("ratios [{lo}, {hi}] vs c_pi {}", k.c_pi))?;
    let inf = miss_ray_infimum(form("1,1,-1").q1(), 1000, 5);
    ensure((inf - 0.5).abs() <= 0.005, || format!("miss-ray infimum {inf}"))?;
    let slab = check_slab(&cone, k.eps, 1000, 31).map_err(|e| e.to_string())?;
    ensure(slab.passed, || format!("slab worst ratio {}", slab.worst_ratio))?;
    let mut bindings = Vec::new();
    for (f, m) in [("1,1,-1", 0), ("1,1,-1", 1), ("1,1,-1", -1), ("2,-3,-1", 1), ("1,1,-1,-1", 0)] {
        let c = GeomConstants::get(&form(f), &int(m), ConstOptions::default()).map_err(|e| e.to_string())?;
        let rep = c.report();
        let b = rep["R0"]["binding"].as_str().unwrap_or("");
        ensure(!b.is_empty() && c.r0_terms.iter().any(|(n, _)| n == b), || format!("{f} m={m}: no binding term"))?;
        bindings.push(format!("{f}|{m}:{b}"));
    }
    Ok(format!(
        "pi ratios in [{lo:.3}, {hi:.3}] within c_pi = {:.3}; miss-ray inf {inf:.4}; slab worst {:.3}; R0 binds {}",
        k.c_pi,
        slab.worst_ratio,
        bindings.join(" ")
    ))
}

fn determinism() -> Result<String, String> {
    let run = || {
        let cfg = GameConfig::new(form("1,1,-1"), int(0), Rules::Classic, 0.5, 7, 30);
        run_game(cfg, &mut PlayerB::adversarial(7)).map(|t| t.to_json()).map_err(|e| e.to_string())
    };
    let (a, b) = (run()?, run()?);
    ensure(a == b, || "transcripts differ".into())?;
    let fresh = GeomConstants::compute(&form("1,1,-1"), &int(0), ConstOptions::default()).map_err(|e| e.to_string())?;
    let cached = GeomConstants::get(&form("1,1,-1"), &int(0), ConstOptions::default()).map_err(|e| e.to_string())?;
    ensure(fresh == cached, || "constants are not reproducible".into())?;
    Ok(format!("two runs byte-identical ({} bytes); constants recomputed identically", a.len()))
}

fn main() {
    let mut outcomes =
        vec![timed("separation suite", 30.0, separation_suite), timed("enumeration oracle", 60.0, enumeration_oracle)];
    let t = Instant::now();
    let runs = play_all();
    let play_secs = t.elapsed().as_secs_f64();
    outcomes.push(timed("game round-invariant", 300.0 - play_secs, || game_invariant(&runs)));
    outcomes.push(timed("certificate vs margin", 120.0, || certificate_vs_margin(&runs)));
    outcomes.push(timed("d=1 classification", 60.0, d1_classification));
    outcomes.push(timed("s>2 margins", 60.0, s_gt_2));
    outcomes.push(timed("full-lattice emptiness", 60.0, full_lattice));
    outcomes.push(timed("geometry constants", 120.0, geometry_constants));
    outcomes.push(timed("determinism", 60.0, determinism));
    let mut failed = 0;
    for o in &outcomes {
        println!("{} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("games played in {play_secs:.1}s");
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

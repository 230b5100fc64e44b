//! Player A: keep the tripled ball away from every normalized window point.

use super::{Active, Ball, GameSession, MoveKind, Owner, RoundEvidence, WindowInfo};
use crate::error::{Error, Result};
use crate::forms::SplitVector;
use crate::geometry::{dist2, dot, norm2, project_to_variety, Chart, SurfacePoint};
use crate::lattice::{primitive, CloudPoint, ShellBound, Window};
use crate::rational::to_f64;
use crate::Variant;

/// A's center moves this many `α c_π ρ(B)` along the chart.
pub const MOVE_FACTOR: f64 = 6.0;

/// `c'` from `ρ` of the first induction ball.
pub fn c_prime(variant: Variant, alpha: f64, beta: f64, kappa0: f64, rho: f64, abs_m: f64) -> f64 {
    let ab = alpha * beta;
    let lin = match variant {
        Variant::Level => 3.0 * ab * rho * abs_m.sqrt(),
        Variant::Lightcone => ab * rho,
    };
    [ab * ab / (4.0 * kappa0), ab * ab / 4.0, lin / (4.0 * kappa0), lin / 4.0].into_iter().fold(f64::INFINITY, f64::min)
}

fn slack(active: &[Active], center: &[f64], rho_a: f64) -> Option<f64> {
    active.iter().map(|p| dist2(&p.normalized, center) - 3.0 * rho_a - p.r).reduce(f64::min)
}

fn unit(v: Vec<f64>) -> Option<Vec<f64>> {
    let n = norm2(&v);
    (n > 1e-300 && n.is_finite()).then(|| v.into_iter().map(|x| x / n).collect())
}

fn basis(dim: usize, j: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[j] = 1.0;
    e
}

/// Direction away from the line through the normalized points of the `≈`-class of `x`.
fn line_direction(s: &GameSession, chart: &Chart, x: &[i64], q_t: &[f64]) -> Option<Vec<f64>> {
    let form = &s.config.form;
    let sv = form.split_vector(x);
    let w: Vec<f64> = sv.w.iter().map(|v| *v as f64).collect();
    let u: Vec<f64> = sv.u.iter().map(|v| *v as f64).collect();
    let p1 = form.join(&SplitVector { w: w.clone(), u: vec![0.0; u.len()] });
    let p2 = form.join(&SplitVector { w: vec![0.0; w.len()], u });
    let axis = chart.face().axis;
    let dir: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| p2[axis] * a - p1[axis] * b).collect();
    let d_local = chart.face().to_local(&dir);
    let d_t = unit(chart.frame.tangent.iter().map(|t| dot(&d_local, t)).collect())?;
    let along = dot(q_t, &d_t);
    let perp: Vec<f64> = q_t.iter().zip(&d_t).map(|(q, d)| -(q - along * d)).collect();
    unit(perp).or_else(|| {
        (0..d_t.len()).find_map(|j| {
            let e = basis(d_t.len(), j);
            let c = dot(&e, &d_t);
            unit(e.iter().zip(&d_t).map(|(a, b)| a - c * b).collect())
        })
    })
}

fn open_window(s: &mut GameSession, b: &Ball) -> Result<(WindowInfo, Vec<Active>)> {
    let cloud = s.cloud.clone();
    if b.round == 1 {
        let w = Window {
            lo: ShellBound::inclusive(num_traits::Zero::zero()),
            hi: ShellBound::strict(s.first_lo_sq()),
            index: 0,
        };
        let pts = cloud.window(&w);
        s.p0_min_sup = pts.iter().map(|p| p.sup).min();
        let info = WindowInfo {
            index: 0,
            lo: 0.0,
            hi: to_f64(&w.hi.sq).sqrt(),
            m_i: None,
            points: pts.len(),
            truncated: false,
        };
        return Ok((info, pts.iter().map(|p| active(p, 0.0)).collect()));
    }
    let i = b.round - 1;
    if i == 1 {
        let abs_m = to_f64(&num_traits::Signed::abs(&s.config.m));
        s.c_prime = Some(c_prime(s.variant(), s.alpha(), s.config.beta, s.consts.kappa0, b.radius, abs_m));
    }
    let c = s.c_prime.expect("set in the first induction round") * s.consts.c_2s;
    let (w, m_i) = s.window_for(i, b.radius)?;
    let pts: &[CloudPoint] = if w.lo.sq > w.hi.sq { &[] } else { cloud.window(&w) };
    let info = WindowInfo {
        index: i,
        lo: w.lo.value(),
        hi: m_i / s.consts.kappa0,
        m_i: Some(m_i),
        points: pts.len(),
        truncated: m_i / s.consts.kappa0 > cloud.cap,
    };
    s.last_hi = Some(w.hi);
    Ok((info, pts.iter().map(|p| active(p, c / (2.0 * p.sup as f64))).collect()))
}

fn active(p: &CloudPoint, r: f64) -> Active {
    Active { x: p.x.clone(), normalized: p.normalized.clone(), r }
}

/// A's answer to the B ball on top of `s.moves`.
pub(super) fn respond(s: &mut GameSession) -> Result<(Ball, RoundEvidence)> {
    let b = s.moves.last().expect("B moved").clone();
    let rho_a = s.alpha() * b.radius;
    let (window, fresh) = open_window(s, &b)?;
    let reach = |p: &Active| dist2(&p.normalized, &b.center.coords) < b.radius + 3.0 * rho_a + p.r + 1e-12;
    s.active.retain(reach);
    s.active.extend(fresh.into_iter().filter(reach));

    let failing: Vec<&Active> =
        s.active.iter().filter(|p| dist2(&p.normalized, &b.center.coords) < 3.0 * rho_a + p.r).collect();
    let mut classes: Vec<Vec<i64>> = failing.iter().map(|p| primitive(&p.x)).collect();
    classes.sort();
    classes.dedup();
    let danger = classes.len();

    let (center, kind) = if failing.is_empty() {
        (b.center.clone(), MoveKind::Concentric)
    } else {
        if s.variant() == Variant::Lightcone && danger > 1 {
            return Err(Error::Invariant(format!(
                "round {}: {danger} inequivalent normalized points near B's ball on the light cone",
                b.round
            )));
        }
        let nearest = failing
            .iter()
            .min_by(|a, c| dist2(&a.normalized, &b.center.coords).total_cmp(&dist2(&c.normalized, &b.center.coords)))
            .expect("nonempty");
        let chart = Chart::at(&s.config.form, &b.center)?;
        let tdim = chart.frame.tangent.len();
        let q_t = chart.forward(&nearest.normalized).unwrap_or_else(|_| vec![0.0; tdim]);
        let line = s.variant() == Variant::Level && s.config.form.d() >= 3 && danger > 1;
        let primary = if line { line_direction(s, &chart, &nearest.x, &q_t) } else { None };
        let kind = if primary.is_some() { MoveKind::LineMiss } else { MoveKind::PointMiss };
        let primary = primary.or_else(|| unit(q_t.iter().map(|v| -v).collect())).unwrap_or_else(|| basis(tdim, 0));
        let mut candidates = vec![primary.clone(), primary.iter().map(|v| -v).collect()];
        for j in 0..tdim {
            candidates.push(basis(tdim, j));
            candidates.push(basis(tdim, j).iter().map(|v| -v).collect());
        }
        let t = MOVE_FACTOR * s.alpha() * s.consts.c_pi * b.radius;
        let found = candidates.iter().find_map(|v| {
            let coords = chart.inverse(&v.iter().map(|x| x * t).collect::<Vec<_>>()).ok()?;
            let p = SurfacePoint::new(&s.config.form, coords.clone())
                .or_else(|_| project_to_variety(&s.config.form, &coords))
                .ok()?;
            let nested = dist2(&p.coords, &b.center.coords) + rho_a <= b.radius;
            let clear = slack(&s.active, &p.coords, rho_a).is_none_or(|m| m >= 0.0);
            (nested && clear).then_some(p)
        });
        let Some(p) = found else {
            return Err(Error::Invariant(format!(
                "round {}: no tangent direction misses the {danger} danger point(s)",
                b.round
            )));
        };
        (p, kind)
    };
    let min_slack = slack(&s.active, &center.coords, rho_a);
    if min_slack.is_some_and(|m| !(m >= 0.0)) {
        return Err(Error::Invariant(format!("round {}: miss predicate fails (slack {min_slack:?})", b.round)));
    }
    let ev = RoundEvidence { round: b.round, window, active: s.active.len(), danger, kind, min_slack };
    Ok((Ball { owner: Owner::A, round: b.round, center, radius: rho_a }, ev))
}

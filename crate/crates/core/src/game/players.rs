//! Opponents for Player A.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BallSpec, GameSession, Owner, Rules};
use crate::error::{Error, Result};
use crate::geometry::{dist2, norm2, project_to_variety, sample_surface_point, Chart, SurfacePoint};
use crate::lattice::{ShellBound, Window};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BKind {
    Random,
    Adversarial,
    Scripted,
}

impl std::str::FromStr for BKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(BKind::Random),
            "adversarial" => Ok(BKind::Adversarial),
            "scripted" => Ok(BKind::Scripted),
            _ => Err(Error::Parse(format!("unknown adversary {s:?} (random|adversarial|scripted)"))),
        }
    }
}

#[derive(Clone, Debug)]
pub enum PlayerB {
    Random(ChaCha8Rng),
    Adversarial(ChaCha8Rng),
    Scripted { moves: Vec<BallSpec>, next: usize },
}

const HALVINGS: usize = 40;

impl PlayerB {
    pub fn random(seed: u64) -> Self {
        PlayerB::Random(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn adversarial(seed: u64) -> Self {
        PlayerB::Adversarial(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn scripted(moves: Vec<BallSpec>) -> Self {
        PlayerB::Scripted { moves, next: 0 }
    }

    /// Random or adversarial player seeded from the config.
    pub fn new(kind: BKind, seed: u64) -> Result<Self> {
        match kind {
            BKind::Random => Ok(Self::random(seed)),
            BKind::Adversarial => Ok(Self::adversarial(seed)),
            BKind::Scripted => Err(Error::Precondition("a scripted player needs its move list".into())),
        }
    }

    pub fn propose(&mut self, s: &GameSession) -> Result<BallSpec> {
        match self {
            PlayerB::Scripted { moves, next } => {
                let m = moves
                    .get(*next)
                    .cloned()
                    .ok_or_else(|| Error::Precondition(format!("script ends after {} moves", moves.len())))?;
                *next += 1;
                Ok(m)
            }
            PlayerB::Random(rng) => match s.last_ball() {
                None => {
                    let p = sample_surface_point(&s.config().form, rng);
                    Ok(first(p.coords, s.r0() * rng.gen_range(0.5..0.9)))
                }
                Some(_) => {
                    let radius = next_radius(s, rng);
                    let chart = Chart::at(&s.config().form, &s.last_ball().expect("A moved").center)?;
                    let tdim = chart.frame.tangent.len();
                    let dir: Vec<f64> = (0..tdim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let n = norm2(&dir).max(1e-12);
                    let len = rng.gen_range(0.0..0.5);
                    let goal: Vec<f64> = dir.iter().map(|v| v / n * len).collect();
                    Ok(toward(s, &chart, &goal, radius))
                }
            },
            PlayerB::Adversarial(rng) => match s.last_ball() {
                None => {
                    let lo = ShellBound::inclusive(s.first_lo_sq());
                    let w = Window { lo, hi: ShellBound::from_f64(s.cloud().cap, false)?, index: 1 };
                    let pts = s.cloud().window(&w);
                    let radius = 0.9 * s.r0();
                    if pts.is_empty() {
                        let p = sample_surface_point(&s.config().form, rng);
                        return Ok(first(p.coords, radius));
                    }
                    let pick = &pts[rng.gen_range(0..pts.len().min(64))];
                    let c = project_to_variety(&s.config().form, &pick.normalized)?;
                    Ok(first(c.coords, radius))
                }
                Some(a) => {
                    let radius = next_radius(s, rng);
                    let chart = Chart::at(&s.config().form, &a.center)?;
                    let target = s
                        .upcoming_points()?
                        .iter()
                        .map(|p| (dist2(&p.normalized, &a.center.coords), p))
                        .filter(|(d, _)| *d <= 4.0 * a.radius)
                        .min_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.x.cmp(&y.1.x)));
                    let goal = target
                        .and_then(|(_, p)| chart.forward(&p.normalized).ok())
                        .map(|t| {
                            let n = norm2(&t);
                            let room = a.radius - radius;
                            if n <= room || n == 0.0 {
                                t.iter().map(|v| v / room.max(1e-300)).collect()
                            } else {
                                t.iter().map(|v| v / n).collect()
                            }
                        })
                        .unwrap_or_else(|| vec![0.0; chart.frame.tangent.len()]);
                    Ok(toward(s, &chart, &goal, radius))
                }
            },
        }
    }
}

fn first(center: Vec<f64>, radius: f64) -> BallSpec {
    BallSpec { center, radius, round: Some(1) }
}

fn next_radius(s: &GameSession, rng: &mut ChaCha8Rng) -> f64 {
    let a = s.last_ball().expect("A moved");
    debug_assert_eq!(a.owner, Owner::A);
    let beta = s.config().beta;
    match s.config().variant {
        Rules::Classic => beta * a.radius,
        Rules::Strong => a.radius * rng.gen_range(beta..=(1.0 + beta) / 2.0),
    }
}

/// A legal ball whose center sits at `goal · (ρ(A) - radius)` in the chart, pulled back
/// toward A's center until nesting holds.
fn toward(s: &GameSession, chart: &Chart, goal: &[f64], radius: f64) -> BallSpec {
    let a = s.last_ball().expect("A moved");
    let room = a.radius - radius;
    let form = &s.config().form;
    let mut scale = room;
    for _ in 0..HALVINGS {
        let t: Vec<f64> = goal.iter().map(|v| v * scale).collect();
        if let Ok(c) = chart.inverse(&t) {
            let p = SurfacePoint::new(form, c.clone()).or_else(|_| project_to_variety(form, &c));
            if let Ok(p) = p {
                if dist2(&p.coords, &a.center.coords) + radius <= a.radius {
                    return BallSpec { center: p.coords, radius, round: Some(s.rounds() + 1) };
                }
            }
        }
        scale /= 2.0;
    }
    BallSpec { center: a.center.coords.clone(), radius, round: Some(s.rounds() + 1) }
}

//! The (α, β) Schmidt game on `∂X`: rules, Player A's winning strategy, opponents and
//! transcripts.
//!
//! Global round 1 is the setup round: A's first ball avoids the normalized points of `P0`.
//! From global round 2 on, round `n` is induction step `i = n - 1`, which opens window `P_i`.

mod players;
mod rules;
mod strategy;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constants::{ConstOptions, GeomConstants};
use crate::error::{Error, Result};
use crate::forms::QuadraticForm;
use crate::geometry::{dist2, Chart, SurfacePoint};
use crate::lattice::{cached_cloud, CloudPoint, PointCloud, ShellBound, Window};
use crate::rational::{pq, Rational};
use crate::Variant;

pub use players::{BKind, PlayerB};
pub use rules::{validate_move, LegalBounds, Rule, RuleViolation};

/// Sup-norm bound below which the point cloud is complete.
pub const N_COVER: f64 = 10_000.0;
pub const MAX_ROUNDS: usize = 100;
/// Relative nesting tolerance.
pub const TAU_NEST: f64 = 1e-9;
/// Relative tolerance of the classic radius law.
pub const TAU_RADIUS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rules {
    /// `ρ(A_n) = α ρ(B_n)`, `ρ(B_{n+1}) = β ρ(A_n)`.
    Classic,
    /// `ρ(A_n) >= α ρ(B_n)`, `ρ(B_{n+1}) >= β ρ(A_n)`.
    Strong,
}

impl std::str::FromStr for Rules {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classic" => Ok(Rules::Classic),
            "strong" => Ok(Rules::Strong),
            _ => Err(Error::Parse(format!("unknown game variant {s:?} (classic|strong)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub form: QuadraticForm,
    #[serde(with = "pq")]
    pub m: Rational,
    pub variant: Rules,
    pub beta: f64,
    pub seed: u64,
    pub max_rounds: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    crate::constants::DEFAULT_EPS
}

impl GameConfig {
    pub fn new(form: QuadraticForm, m: Rational, variant: Rules, beta: f64, seed: u64, max_rounds: usize) -> Self {
        GameConfig { form, m, variant, beta, seed, max_rounds, eps: default_eps() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.form.d() < 2 {
            return Err(Error::Precondition("the game needs d >= 2".into()));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Precondition(format!("beta = {} must lie in (0, 1)", self.beta)));
        }
        if self.max_rounds == 0 || self.max_rounds > MAX_ROUNDS {
            return Err(Error::Precondition(format!("rounds must lie in 1..={MAX_ROUNDS}")));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Precondition(format!("eps = {} must lie in (0, 1)", self.eps)));
        }
        Ok(())
    }

    pub fn const_options(&self) -> ConstOptions {
        ConstOptions { eps: self.eps, ..ConstOptions::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Owner {
    A,
    B,
}

/// A closed ball with designated center and radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub owner: Owner,
    pub round: usize,
    pub center: SurfacePoint,
    pub radius: f64,
}

/// A move as submitted, before validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Expected round number; a mismatch is rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<usize>,
}

impl From<&Ball> for BallSpec {
    fn from(b: &Ball) -> Self {
        BallSpec { center: b.center.coords.clone(), radius: b.radius, round: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoveKind {
    Concentric,
    PointMiss,
    LineMiss,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowInfo {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    /// `M_i = ceil(1/ρ(B_i))`; absent for `P0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_i: Option<f64>,
    pub points: usize,
    /// The window reaches past the point cloud.
    pub truncated: bool,
}

/// What A checked in one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundEvidence {
    pub round: usize,
    pub window: WindowInfo,
    /// Points near enough to B's ball to constrain A; every other opened point is clear.
    pub active: usize,
    /// Distinct normalized points A had to move away from.
    pub danger: usize,
    pub kind: MoveKind,
    /// `min(dist(𝔭x, c_A) - 3ρ(A) - r_x)` over the active points.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_slack: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub v: Vec<f64>,
    pub c: f64,
    pub rounds: usize,
    /// `c' c_2s c'_2s / 2`.
    pub window_term: f64,
    /// `2 ρ(A_1) c'_2s min ||q||` over `P0`; absent when `P0` is empty.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0_term: Option<f64>,
    /// Every lattice point with sup norm at most this was handled by some window.
    pub sup_bound: f64,
}

/// Constants the session plays with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub alpha: f64,
    pub kappa0: f64,
    pub r0: f64,
    pub c_pi: f64,
    pub c_2s: f64,
    pub c_2s_prime: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_prime: Option<f64>,
    pub cloud_cap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub config: GameConfig,
    pub constants: Snapshot,
    pub moves: Vec<Ball>,
    pub evidence: Vec<RoundEvidence>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
}

impl Transcript {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: Transcript = serde_json::from_str(s).map_err(|e| Error::Parse(format!("transcript: {e}")))?;
        t.config.validate()?;
        for (i, b) in t.moves.iter().enumerate() {
            let owner = if i % 2 == 0 { Owner::B } else { Owner::A };
            if b.owner != owner || b.round != i / 2 + 1 {
                return Err(Error::Parse(format!("move {i} is out of order")));
            }
        }
        Ok(t)
    }

    pub fn b_moves(&self) -> Vec<BallSpec> {
        self.moves.iter().filter(|b| b.owner == Owner::B).map(BallSpec::from).collect()
    }
}

/// A lattice point A still has to keep away from.
#[derive(Clone, Debug)]
pub(crate) struct Active {
    pub x: Vec<i64>,
    pub normalized: Vec<f64>,
    /// Forbidden radius `r_x` (0 for `P0`).
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DangerPoint {
    pub x: Vec<i64>,
    pub normalized: Vec<f64>,
    pub forbidden_radius: f64,
    /// Chart coordinates around the current ball's center, when the point is in the chart.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chart: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartFrame {
    pub face_axis: usize,
    pub face_sign: i8,
    pub base: Vec<f64>,
    /// Tangent basis in face-local coordinates (face axis dropped).
    pub tangent: Vec<Vec<f64>>,
}

/// One game in progress.
#[derive(Clone, Debug)]
pub struct GameSession {
    config: GameConfig,
    consts: GeomConstants,
    cloud: Arc<PointCloud>,
    moves: Vec<Ball>,
    evidence: Vec<RoundEvidence>,
    c_prime: Option<f64>,
    /// Upper bound of the last opened window.
    last_hi: Option<ShellBound>,
    active: Vec<Active>,
    p0_min_sup: Option<i64>,
}

impl GameSession {
    pub fn new(config: GameConfig) -> Result<Self> {
        config.validate()?;
        let consts = GeomConstants::get(&config.form, &config.m, config.const_options())?;
        let b_sum: f64 = config.form.q2().coeffs_f64().iter().sum();
        let cloud = cached_cloud(&config.form, &config.m, N_COVER * b_sum.sqrt())?;
        Ok(GameSession {
            config,
            consts,
            cloud,
            moves: Vec::new(),
            evidence: Vec::new(),
            c_prime: None,
            last_hi: None,
            active: Vec::new(),
            p0_min_sup: None,
        })
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn constants(&self) -> &GeomConstants {
        &self.consts
    }

    pub fn alpha(&self) -> f64 {
        self.consts.alpha
    }

    pub fn r0(&self) -> f64 {
        self.consts.r0
    }

    pub fn variant(&self) -> Variant {
        self.consts.variant
    }

    pub fn moves(&self) -> &[Ball] {
        &self.moves
    }

    pub fn evidence(&self) -> &[RoundEvidence] {
        &self.evidence
    }

    /// Completed rounds.
    pub fn rounds(&self) -> usize {
        self.moves.len() / 2
    }

    pub fn is_finished(&self) -> bool {
        self.rounds() >= self.config.max_rounds
    }

    pub fn last_ball(&self) -> Option<&Ball> {
        self.moves.last()
    }

    pub fn c_prime(&self) -> Option<f64> {
        self.c_prime
    }

    pub(crate) fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            alpha: self.consts.alpha,
            kappa0: self.consts.kappa0,
            r0: self.consts.r0,
            c_pi: self.consts.c_pi,
            c_2s: self.consts.c_2s,
            c_2s_prime: self.consts.c_2s_prime,
            c_prime: self.c_prime,
            cloud_cap: self.cloud.cap,
        }
    }

    /// Squared lower bound of window 1: `9|m|` or `1`.
    pub(crate) fn first_lo_sq(&self) -> Rational {
        use num_traits::Signed;
        match self.variant() {
            Variant::Level => self.config.m.abs() * Rational::from_integer(9.into()),
            Variant::Lightcone => Rational::from_integer(1.into()),
        }
    }

    /// The window step `i` would open if B's ball had radius `rho_b`.
    pub(crate) fn window_for(&self, i: usize, rho_b: f64) -> Result<(Window, f64)> {
        let m_i = (1.0 / rho_b).ceil();
        if !m_i.is_finite() {
            return Err(Error::Precondition(format!("radius {rho_b} underflows the window bookkeeping")));
        }
        let lo = match &self.last_hi {
            Some(h) if i > 1 => ShellBound { sq: h.sq.clone(), strict: true },
            _ => ShellBound::inclusive(self.first_lo_sq()),
        };
        // bounds past the cloud are clamped; nothing lies there
        let hi_val = (m_i / self.consts.kappa0).min(2.0 * self.cloud.cap);
        let hi = ShellBound::from_f64(hi_val, false)?;
        Ok((Window { lo, hi, index: i }, m_i))
    }

    /// Points of the window B's next ball would open, assuming the classic radius law.
    pub fn upcoming_points(&self) -> Result<&[CloudPoint]> {
        let Some(a) = self.moves.last().filter(|b| b.owner == Owner::A) else {
            return Ok(&[]);
        };
        let i = self.rounds();
        let (w, _) = self.window_for(i, self.config.beta * a.radius)?;
        if w.lo.sq > w.hi.sq {
            return Ok(&[]);
        }
        Ok(self.cloud.window(&w))
    }

    /// Validates B's move, answers with A's move and records the round.
    pub fn play_b(&mut self, spec: &BallSpec) -> Result<&Ball> {
        if self.is_finished() {
            return Err(RuleViolation::new(Rule::Finished, "the game is over", LegalBounds::default()).into());
        }
        let round = self.rounds() + 1;
        if let Some(r) = spec.round {
            if r != round {
                return Err(RuleViolation::new(
                    Rule::Turn,
                    format!("move is for round {r}, the game is at round {round}"),
                    LegalBounds::default(),
                )
                .into());
            }
        }
        let b = rules::check_b(self, spec)?;
        let mut next = self.clone();
        next.moves.push(b);
        let (a, ev) = strategy::respond(&mut next)?;
        validate_move(&next, &a).map_err(|v| Error::Invariant(format!("strategy A broke a rule: {v}")))?;
        next.moves.push(a);
        next.evidence.push(ev);
        *self = next;
        Ok(self.moves.last().expect("A just moved"))
    }

    /// The certificate for the current A center, once the induction has started.
    pub fn certificate(&self) -> Option<Certificate> {
        let c_prime = self.c_prime?;
        let last_a = self.moves.iter().rev().find(|b| b.owner == Owner::A)?;
        let a1 = &self.moves[1];
        let window_term = c_prime * self.consts.c_2s * self.consts.c_2s_prime / 2.0;
        let p0_term = self.p0_min_sup.map(|s| 2.0 * a1.radius * self.consts.c_2s_prime * s as f64);
        let c = p0_term.map_or(window_term, |p| p.min(window_term));
        let covered = self.last_hi.as_ref().map_or(0.0, |h| h.value()).min(self.cloud.cap);
        let b_sum: f64 = self.config.form.q2().coeffs_f64().iter().sum();
        Some(Certificate {
            v: last_a.center.coords.clone(),
            c,
            rounds: self.rounds(),
            window_term,
            p0_term,
            sup_bound: (covered / b_sum.sqrt()).floor(),
        })
    }

    pub fn transcript(&self) -> Transcript {
        Transcript {
            config: self.config.clone(),
            constants: self.snapshot(),
            moves: self.moves.clone(),
            evidence: self.evidence.clone(),
            certificate: self.certificate(),
        }
    }

    /// Chart around the current ball's center.
    pub fn chart(&self) -> Result<Option<Chart>> {
        self.moves.last().map(|b| Chart::at(&self.config.form, &b.center)).transpose()
    }

    pub fn chart_frame(&self) -> Result<Option<ChartFrame>> {
        Ok(self.chart()?.map(|c| ChartFrame {
            face_axis: c.face().axis,
            face_sign: c.face().sign,
            base: c.base.coords.clone(),
            tangent: c.frame.tangent.clone(),
        }))
    }

    /// Opened lattice points near the current ball, with their forbidden radii.
    pub fn danger_points(&self) -> Result<Vec<DangerPoint>> {
        let Some(last) = self.moves.last() else { return Ok(Vec::new()) };
        let chart = self.chart()?;
        Ok(self
            .active
            .iter()
            .filter(|p| dist2(&p.normalized, &last.center.coords) <= 2.0 * last.radius + p.r)
            .map(|p| DangerPoint {
                x: p.x.clone(),
                normalized: p.normalized.clone(),
                forbidden_radius: p.r,
                chart: chart.as_ref().and_then(|c| c.forward(&p.normalized).ok()),
            })
            .collect())
    }
}

/// B moves from a transcript, a JSON array of balls, or one ball per line.
pub fn parse_script(s: &str) -> Result<Vec<BallSpec>> {
    let t = s.trim_start();
    if t.starts_with('{') && t.contains("\"moves\"") {
        if let Ok(tr) = Transcript::from_json(t) {
            return Ok(tr.b_moves());
        }
    }
    if t.starts_with('[') {
        return serde_json::from_str(t).map_err(|e| Error::Parse(format!("move list: {e}")));
    }
    t.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse(format!("move on line {}: {e}", i + 1))))
        .collect()
}

/// Plays `config.max_rounds` rounds of A against `player`.
pub fn run_game(config: GameConfig, player: &mut PlayerB) -> Result<Transcript> {
    let mut session = GameSession::new(config)?;
    while !session.is_finished() {
        let spec = player.propose(&session)?;
        session.play_b(&spec)?;
    }
    Ok(session.transcript())
}

/// Replays the B moves of a transcript through a fresh session.
pub fn replay(transcript: &Transcript) -> Result<Transcript> {
    let mut player = PlayerB::scripted(transcript.b_moves());
    run_game(transcript.config.clone(), &mut player)
}

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Ball, BallSpec, GameSession, Owner, Rules, TAU_NEST, TAU_RADIUS};
use crate::error::Result;
use crate::geometry::{dist2, SurfacePoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "nesting")]
    Nesting,
    #[serde(rename = "radius-law")]
    RadiusLaw,
    #[serde(rename = "R0")]
    R0,
    #[serde(rename = "center-off-variety")]
    CenterOffVariety,
    #[serde(rename = "turn")]
    Turn,
    #[serde(rename = "finished")]
    Finished,
}

impl Rule {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::Nesting => "nesting",
            Rule::RadiusLaw => "radius-law",
            Rule::R0 => "R0",
            Rule::CenterOffVariety => "center-off-variety",
            Rule::Turn => "turn",
            Rule::Finished => "finished",
        }
    }
}

/// What a legal move would have looked like.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LegalBounds {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    /// Largest legal distance from `center`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_offset: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius_max: Option<f64>,
    /// Whether `radius_max` itself is excluded.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub radius_max_strict: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleViolation {
    pub rule: Rule,
    pub detail: String,
    pub legal_bounds: LegalBounds,
}

impl RuleViolation {
    pub fn new(rule: Rule, detail: impl Into<String>, legal_bounds: LegalBounds) -> Self {
        RuleViolation { rule, detail: detail.into(), legal_bounds }
    }
}

impl fmt::Display for RuleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule.name(), self.detail)
    }
}

impl std::error::Error for RuleViolation {}

fn radius_bounds(rules: Rules, factor: f64, prev: f64) -> (f64, f64) {
    match rules {
        Rules::Classic => (factor * prev, factor * prev),
        Rules::Strong => (factor * prev, prev),
    }
}

/// Checks turn order, radius law, nesting and the first-ball conditions.
pub fn validate_move(state: &GameSession, ball: &Ball) -> std::result::Result<(), RuleViolation> {
    let moves = state.moves();
    let owner = if moves.len().is_multiple_of(2) { Owner::B } else { Owner::A };
    let round = moves.len() / 2 + 1;
    if ball.owner != owner || ball.round != round {
        return Err(RuleViolation::new(
            Rule::Turn,
            format!("expected {owner:?} in round {round}, got {:?} in round {}", ball.owner, ball.round),
            LegalBounds::default(),
        ));
    }
    let form = &state.config().form;
    let (q, s) = ball.center.residuals(form);
    if !(q <= crate::geometry::TAU_SURFACE && s <= crate::geometry::TAU_SURFACE) {
        return Err(RuleViolation::new(
            Rule::CenterOffVariety,
            format!("center residuals |Q| {q:e}, sup {s:e}"),
            LegalBounds { center: moves.last().map(|b| b.center.coords.clone()), ..Default::default() },
        ));
    }
    if !(ball.radius > 0.0 && ball.radius.is_finite()) {
        return Err(RuleViolation::new(
            Rule::RadiusLaw,
            format!("radius {} is not a positive real", ball.radius),
            LegalBounds::default(),
        ));
    }
    let Some(prev) = moves.last() else {
        let r0 = state.r0();
        if ball.radius >= r0 {
            return Err(RuleViolation::new(
                Rule::R0,
                format!("first radius {} must be below R0 = {r0}", ball.radius),
                LegalBounds { radius_max: Some(r0), radius_max_strict: true, ..Default::default() },
            ));
        }
        return Ok(());
    };
    let factor = match owner {
        Owner::A => state.alpha(),
        Owner::B => state.config().beta,
    };
    let (lo, hi) = radius_bounds(state.config().variant, factor, prev.radius);
    let ok = match state.config().variant {
        Rules::Classic => (ball.radius - lo).abs() <= TAU_RADIUS * lo,
        Rules::Strong => ball.radius >= lo * (1.0 - TAU_RADIUS) && ball.radius <= hi * (1.0 + TAU_RADIUS),
    };
    if !ok {
        return Err(RuleViolation::new(
            Rule::RadiusLaw,
            format!("radius {} outside [{lo}, {hi}]", ball.radius),
            LegalBounds { radius_min: Some(lo), radius_max: Some(hi), ..Default::default() },
        ));
    }
    let offset = dist2(&ball.center.coords, &prev.center.coords);
    if offset + ball.radius > prev.radius * (1.0 + TAU_NEST) {
        return Err(RuleViolation::new(
            Rule::Nesting,
            format!("center offset {offset} + radius {} exceeds enclosing radius {}", ball.radius, prev.radius),
            LegalBounds {
                center: Some(prev.center.coords.clone()),
                max_offset: Some((prev.radius - ball.radius).max(0.0)),
                radius_min: Some(lo),
                radius_max: Some(hi),
                ..Default::default()
            },
        ));
    }
    Ok(())
}

/// Turns a submitted move into a validated B ball.
pub(crate) fn check_b(state: &GameSession, spec: &BallSpec) -> Result<Ball> {
    let form = &state.config().form;
    let center = SurfacePoint::new(form, spec.center.clone()).map_err(|e| {
        RuleViolation::new(
            Rule::CenterOffVariety,
            e.to_string(),
            LegalBounds { center: state.last_ball().map(|b| b.center.coords.clone()), ..Default::default() },
        )
    })?;
    let ball = Ball { owner: Owner::B, round: state.rounds() + 1, center, radius: spec.radius };
    validate_move(state, &ball)?;
    Ok(ball)
}

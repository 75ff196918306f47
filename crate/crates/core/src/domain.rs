//! Priors, prior polyhedra, perception functions, affine utilities, acts and profiles.
//!
//! Perception functions are polyhedral: `c(p) = max_k (g_k·p + h_k)` on a
//! polyhedral effective domain intersected with the simplex, `+∞` elsewhere,
//! and `c ≡ 0` on the domain when there are no pieces (the Bewley case).
//! Every constructor checks its invariants; the minimum-zero condition on a
//! perception function is certified with one linear program.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::lp::{dot, LinearProgram, LpError, LpOutcome};
use crate::EPS_FEAS;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("non-finite number in {0}")]
    NonFinite(String),
    #[error("polyhedron does not meet the probability simplex")]
    EmptyPolyhedron,
    #[error("gradient ≠ 0 violated")]
    ConstantUtility,
    #[error("min c = 0 violated (LP minimum {})", tidy(*.minimum))]
    NonzeroMinimum { minimum: f64 },
    #[error("a profile needs at least two agents, found {0}")]
    TooFewAgents(usize),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Rounds to nine decimals for reporting, so `0.9999999999` prints as `1.0`.
pub(crate) fn tidy(x: f64) -> f64 {
    if x.is_finite() {
        let r = (x * 1e9).round() / 1e9;
        if r == 0.0 {
            0.0
        } else {
            r
        }
    } else {
        x
    }
}

pub(crate) fn pad(v: &[f64], width: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    out.resize(width, 0.0);
    out
}

/// A program over `(p, extra…)` with `Σ p = 1` and `p >= 0` already imposed.
pub(crate) fn simplex_program(states: usize, objective: Vec<f64>) -> LinearProgram {
    let width = objective.len();
    let mut lp = LinearProgram::minimize(objective);
    let mut row = vec![0.0; width];
    row[..states].fill(1.0);
    lp.add_eq(row, 1.0);
    lp
}

fn check_finite(values: &[f64], what: &str) -> Result<(), DomainError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(DomainError::NonFinite(what.to_string()))
    }
}

/// A point of the probability simplex over the states.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Prior(Vec<f64>);

impl Prior {
    /// Weights above `-EPS_FEAS` are clamped to zero; the sum must be within
    /// `EPS_FEAS` of one.
    pub fn new(weights: Vec<f64>) -> Result<Self, DomainError> {
        if weights.is_empty() {
            return Err(DomainError::InvalidPrior("no states".into()));
        }
        check_finite(&weights, "prior")?;
        if let Some(w) = weights.iter().find(|w| **w < -EPS_FEAS) {
            return Err(DomainError::InvalidPrior(format!("negative weight {w}")));
        }
        let weights: Vec<f64> = weights.into_iter().map(|w| w.max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > EPS_FEAS {
            return Err(DomainError::InvalidPrior(format!("weights sum to {total}")));
        }
        Ok(Self(weights))
    }

    /// Clamps and renormalises a simplex point returned by the LP solver.
    pub(crate) fn from_solver(raw: &[f64]) -> Self {
        let clamped: Vec<f64> = raw.iter().map(|w| w.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        Self(clamped.into_iter().map(|w| w / total).collect())
    }

    pub fn vertex(states: usize, k: usize) -> Self {
        let mut w = vec![0.0; states];
        w[k] = 1.0;
        Self(w)
    }

    pub fn uniform(states: usize) -> Self {
        Self(vec![1.0 / states as f64; states])
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `Σ_s p(s) v(s)`.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        dot(&self.0, values)
    }
}

/// `normal · p <= bound`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub bound: f64,
}

impl HalfSpace {
    pub fn new(normal: Vec<f64>, bound: f64) -> Self {
        Self { normal, bound }
    }

    pub fn slack(&self, p: &[f64]) -> f64 {
        dot(&self.normal, p) - self.bound
    }
}

/// A set of priors `{p ∈ Δ(S) : a_r·p <= b_r for every row r}`, known to be nonempty.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Polyhedron {
    states: usize,
    rows: Vec<HalfSpace>,
}

impl Polyhedron {
    pub fn new(states: usize, rows: Vec<HalfSpace>) -> Result<Self, DomainError> {
        if states == 0 {
            return Err(DomainError::DimensionMismatch("zero states".into()));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.normal.len() != states {
                return Err(DomainError::DimensionMismatch(format!(
                    "row {r} has {} coefficients for {states} states",
                    row.normal.len()
                )));
            }
            check_finite(&row.normal, "polyhedron row")?;
            check_finite(&[row.bound], "polyhedron bound")?;
        }
        let poly = Self { states, rows };
        if poly.feasible_point()?.is_none() {
            return Err(DomainError::EmptyPolyhedron);
        }
        Ok(poly)
    }

    pub fn simplex(states: usize) -> Self {
        Self {
            states,
            rows: Vec::new(),
        }
    }

    /// The singleton `{p}`: with `Σ p = 1`, the rows `p_s <= p̂_s` force equality.
    pub fn singleton(p: &Prior) -> Self {
        let states = p.len();
        let rows = (0..states)
            .map(|s| HalfSpace::new(Prior::vertex(states, s).0, p.0[s]))
            .collect();
        Self { states, rows }
    }

    pub(crate) fn from_rows_unchecked(states: usize, rows: Vec<HalfSpace>) -> Self {
        Self { states, rows }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn rows(&self) -> &[HalfSpace] {
        &self.rows
    }

    pub fn is_full_simplex(&self) -> bool {
        self.rows.is_empty()
    }

    /// The row with the largest slack at `p`, if that slack exceeds `tol`.
    pub fn worst_violation(&self, p: &[f64], tol: f64) -> Option<(usize, f64)> {
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| (r, row.slack(p)))
            .filter(|(_, s)| *s > tol)
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn contains(&self, p: &Prior) -> bool {
        self.worst_violation(p.weights(), EPS_FEAS).is_none()
    }

    /// Intersection of the row lists; `None` when the result misses the simplex.
    pub fn intersect(&self, other: &Polyhedron) -> Result<Option<Polyhedron>, DomainError> {
        if self.states != other.states {
            return Err(DomainError::DimensionMismatch(
                "intersecting polyhedra over different state spaces".into(),
            ));
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        let poly = Self {
            states: self.states,
            rows,
        };
        Ok(poly.feasible_point()?.map(|_| poly))
    }

    /// Some point of the polyhedron, or `None` if it misses the simplex.
    pub fn feasible_point(&self) -> Result<Option<Prior>, LpError> {
        let mut lp = simplex_program(self.states, vec![0.0; self.states]);
        self.constrain(&mut lp);
        Ok(match lp.solve()? {
            LpOutcome::Optimal(opt) => Some(Prior::from_solver(&opt.primal[..self.states])),
            _ => None,
        })
    }

    /// Adds the rows to a program whose first `states` variables are the prior.
    pub(crate) fn constrain(&self, lp: &mut LinearProgram) {
        let width = lp.num_vars();
        for row in &self.rows {
            lp.add_le(pad(&row.normal, width), row.bound);
        }
    }
}

/// One affine minorant `g·p + h` of a perception function.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AffinePiece {
    pub gradient: Vec<f64>,
    pub offset: f64,
}

impl AffinePiece {
    pub fn new(gradient: Vec<f64>, offset: f64) -> Self {
        Self { gradient, offset }
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        dot(&self.gradient, p) + self.offset
    }
}

/// A polyhedral perception function with minimum zero over the simplex.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerceptionFunction {
    pieces: Vec<AffinePiece>,
    domain: Polyhedron,
}

impl PerceptionFunction {
    pub fn new(pieces: Vec<AffinePiece>, domain: Polyhedron) -> Result<Self, DomainError> {
        let states = domain.states();
        for (k, piece) in pieces.iter().enumerate() {
            if piece.gradient.len() != states {
                return Err(DomainError::DimensionMismatch(format!(
                    "piece {k} has {} coefficients for {states} states",
                    piece.gradient.len()
                )));
            }
            check_finite(&piece.gradient, "perception piece")?;
            check_finite(&[piece.offset], "perception offset")?;
        }
        let c = Self { pieces, domain };
        let (minimum, _) = c.minimum()?;
        if minimum.abs() > EPS_FEAS {
            return Err(DomainError::NonzeroMinimum { minimum });
        }
        Ok(c)
    }

    /// Shifts every offset by the same constant so the minimum becomes zero.
    pub fn normalized(pieces: Vec<AffinePiece>, domain: Polyhedron) -> Result<Self, DomainError> {
        let raw = Self { pieces, domain };
        let (minimum, _) = raw.minimum()?;
        let pieces = raw
            .pieces
            .into_iter()
            .map(|p| AffinePiece::new(p.gradient, p.offset - minimum))
            .collect();
        Self::new(pieces, raw.domain)
    }

    /// The indicator of `domain`: zero on it, `+∞` off it.
    pub fn indicator(domain: Polyhedron) -> Self {
        Self {
            pieces: Vec::new(),
            domain,
        }
    }

    /// `c ≡ 0` on the whole simplex (subjective expected utility with full ambiguity
    /// neutrality, i.e. unanimity over all priors).
    pub fn zero(states: usize) -> Self {
        Self::indicator(Polyhedron::simplex(states))
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    pub fn domain(&self) -> &Polyhedron {
        &self.domain
    }

    pub fn states(&self) -> usize {
        self.domain.states()
    }

    /// No pieces: the function is the indicator of its domain.
    pub fn is_bewley(&self) -> bool {
        self.pieces.is_empty()
    }

    /// `c(p)`, or `+∞` when `p` leaves the effective domain by more than `EPS_FEAS`.
    pub fn evaluate(&self, p: &Prior) -> f64 {
        self.evaluate_weights(p.weights())
    }

    pub(crate) fn evaluate_weights(&self, p: &[f64]) -> f64 {
        if self.domain.worst_violation(p, EPS_FEAS).is_some() {
            return f64::INFINITY;
        }
        self.pieces
            .iter()
            .map(|piece| piece.value(p))
            .fold(0.0, f64::max)
    }

    /// Minimum of `c` over the simplex and a minimiser, from one LP.
    pub fn minimum(&self) -> Result<(f64, Prior), DomainError> {
        let states = self.states();
        if self.pieces.is_empty() {
            let p = self
                .domain
                .feasible_point()?
                .ok_or(DomainError::EmptyPolyhedron)?;
            return Ok((0.0, p));
        }
        let mut objective = vec![0.0; states + 1];
        objective[states] = 1.0;
        let mut lp = simplex_program(states, objective);
        lp.set_free(states);
        self.constrain_epigraph(&mut lp, states);
        match lp.solve()? {
            LpOutcome::Optimal(opt) => Ok((opt.value, Prior::from_solver(&opt.primal[..states]))),
            _ => Err(DomainError::EmptyPolyhedron),
        }
    }

    /// `c⁻¹(0)`: the domain cut by `g_k·p + h_k <= 0` for every piece.
    ///
    /// Piece rows are relaxed by `EPS_FEAS` so a minimum certified to that
    /// tolerance keeps the set nonempty.
    pub fn zero_set(&self) -> Polyhedron {
        let mut rows = self.domain.rows().to_vec();
        rows.extend(
            self.pieces
                .iter()
                .map(|piece| HalfSpace::new(piece.gradient.clone(), EPS_FEAS - piece.offset)),
        );
        Polyhedron::from_rows_unchecked(self.states(), rows)
    }

    /// A copy with one more piece, re-validated.
    pub fn with_piece(&self, piece: AffinePiece) -> Result<Self, DomainError> {
        let mut pieces = self.pieces.clone();
        pieces.push(piece);
        Self::new(pieces, self.domain.clone())
    }

    /// Adds `t >= g_k·p + h_k` for each piece and the domain rows, where `t` is variable `epi`.
    pub(crate) fn constrain_epigraph(&self, lp: &mut LinearProgram, epi: usize) {
        let width = lp.num_vars();
        for piece in &self.pieces {
            let mut row = pad(&piece.gradient, width);
            row[epi] = -1.0;
            lp.add_le(row, -piece.offset);
        }
        self.domain.constrain(lp);
    }
}

/// `u(x) = gradient·x + intercept` with a nonzero gradient.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AffineUtility {
    gradient: Vec<f64>,
    intercept: f64,
}

impl AffineUtility {
    pub fn new(gradient: Vec<f64>, intercept: f64) -> Result<Self, DomainError> {
        check_finite(&gradient, "utility gradient")?;
        check_finite(&[intercept], "utility intercept")?;
        if gradient.iter().all(|g| g.abs() <= EPS_FEAS) {
            return Err(DomainError::ConstantUtility);
        }
        Ok(Self {
            gradient,
            intercept,
        })
    }

    pub fn gradient(&self) -> &[f64] {
        &self.gradient
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        dot(&self.gradient, x) + self.intercept
    }
}

/// One outcome vector per state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Act {
    outcomes: Vec<Vec<f64>>,
}

impl Act {
    pub fn new(outcomes: Vec<Vec<f64>>) -> Result<Self, DomainError> {
        let Some(first) = outcomes.first() else {
            return Err(DomainError::DimensionMismatch("act has no states".into()));
        };
        let m = first.len();
        for (s, x) in outcomes.iter().enumerate() {
            if x.len() != m {
                return Err(DomainError::DimensionMismatch(format!(
                    "outcome for state {s} has dimension {}, expected {m}",
                    x.len()
                )));
            }
            check_finite(x, "act outcome")?;
        }
        Ok(Self { outcomes })
    }

    /// The constant act yielding `x` in every state.
    pub fn constant(x: Vec<f64>, states: usize) -> Self {
        Self {
            outcomes: vec![x; states],
        }
    }

    pub fn outcomes(&self) -> &[Vec<f64>] {
        &self.outcomes
    }

    pub fn states(&self) -> usize {
        self.outcomes.len()
    }

    pub fn outcome_dim(&self) -> usize {
        self.outcomes[0].len()
    }

    pub fn is_constant(&self) -> bool {
        self.outcomes.windows(2).all(|w| w[0] == w[1])
    }

    /// State-by-state utilities `u(f(s))`.
    pub fn utilities(&self, u: &AffineUtility) -> Vec<f64> {
        self.outcomes.iter().map(|x| u.value(x)).collect()
    }
}

/// A variational Bewley preference `(u, c)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Preference {
    pub utility: AffineUtility,
    pub perception: PerceptionFunction,
}

impl Preference {
    pub fn new(utility: AffineUtility, perception: PerceptionFunction) -> Self {
        Self {
            utility,
            perception,
        }
    }
}

/// Index of a profile member: `0` is the social planner, `1..=n` the individuals.
pub type MemberId = usize;

pub const SOCIAL: MemberId = 0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Profile {
    states: Vec<String>,
    outcome_dim: usize,
    agents: Vec<Preference>,
    social: Preference,
}

/// One violated profile invariant, attributed to a member when it concerns one.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationError {
    pub member: Option<MemberId>,
    pub error: DomainError,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.member, &self.error) {
            (Some(k), DomainError::ConstantUtility) => {
                write!(f, "gradient ≠ 0 violated for agent {k}")
            }
            (Some(k), DomainError::NonzeroMinimum { minimum }) => write!(
                f,
                "min c = 0 violated (agent {k}, LP minimum {:?})",
                tidy(*minimum)
            ),
            (Some(k), e) => write!(f, "agent {k}: {e}"),
            (None, e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ValidationError {}

impl Profile {
    /// Checks the cross-member invariants: at least two agents, shared state
    /// space and outcome dimension.
    pub fn new(
        states: Vec<String>,
        outcome_dim: usize,
        agents: Vec<Preference>,
        social: Preference,
    ) -> Result<Self, Vec<ValidationError>> {
        let mut errors = Vec::new();
        if agents.len() < 2 {
            errors.push(ValidationError {
                member: None,
                error: DomainError::TooFewAgents(agents.len()),
            });
        }
        let members = std::iter::once(&social).chain(agents.iter());
        for (k, pref) in members.enumerate() {
            if pref.utility.dim() != outcome_dim {
                errors.push(ValidationError {
                    member: Some(k),
                    error: DomainError::DimensionMismatch(format!(
                        "utility has dimension {}, profile outcome_dim is {outcome_dim}",
                        pref.utility.dim()
                    )),
                });
            }
            if pref.perception.states() != states.len() {
                errors.push(ValidationError {
                    member: Some(k),
                    error: DomainError::DimensionMismatch(format!(
                        "perception is over {} states, profile has {}",
                        pref.perception.states(),
                        states.len()
                    )),
                });
            }
        }
        if errors.is_empty() {
            Ok(Self {
                states,
                outcome_dim,
                agents,
                social,
            })
        } else {
            Err(errors)
        }
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn outcome_dim(&self) -> usize {
        self.outcome_dim
    }

    /// Number of individuals `n`.
    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> &[Preference] {
        &self.agents
    }

    pub fn social(&self) -> &Preference {
        &self.social
    }

    /// Individual `i`, counted from zero.
    pub fn agent(&self, i: usize) -> &Preference {
        &self.agents[i]
    }

    /// Member `k`: `0` is social, `k >= 1` is individual `k - 1`.
    pub fn member(&self, k: MemberId) -> Option<&Preference> {
        match k {
            SOCIAL => Some(&self.social),
            k => self.agents.get(k - 1),
        }
    }

    /// Checks that an act fits this profile's states and outcome space.
    pub fn check_act(&self, f: &Act) -> Result<(), DomainError> {
        if f.states() != self.state_count() || f.outcome_dim() != self.outcome_dim {
            return Err(DomainError::DimensionMismatch(format!(
                "act is {}×{}, profile expects {}×{}",
                f.states(),
                f.outcome_dim(),
                self.state_count(),
                self.outcome_dim
            )));
        }
        Ok(())
    }

    /// A copy with the social preference replaced.
    pub fn with_social(&self, social: Preference) -> Result<Self, Vec<ValidationError>> {
        Self::new(
            self.states.clone(),
            self.outcome_dim,
            self.agents.clone(),
            social,
        )
    }
}

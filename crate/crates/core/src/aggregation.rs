//! Aggregation audits for a profile of variational Bewley preferences.
//!
//! Under Standard Pareto and Preference Diversity, social utility must be a
//! nonnegative combination `u₀ = Σ αᵢ uᵢ + β` and the social perception
//! function must dominate every weighted individual one, `c₀ ≥ αᵢ cᵢ`. The
//! bound is checked exactly: `cᵢ` is a maximum of finitely many affine pieces
//! on a polyhedral domain, so `c₀ ≥ αᵢ cᵢ` fails iff one piece LP or one
//! facet LP has a positive optimum.
//!
//! Weights at or below `EPS_FEAS` count as zero, and a zero-weight agent is
//! exempt from every bound (`0·(+∞) = 0`).

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::domain::{simplex_program, DomainError, HalfSpace, Polyhedron, Prior, Profile};
use crate::lp::{LinearProgram, LpError, LpOutcome};
use crate::{Tolerances, EPS_FEAS};

/// Singular values at or below this (relative to the largest) count as zero.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuditError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("the social preference is not a Bewley preference (its perception has affine pieces)")]
    NotBewleySocial,
    #[error("individual {0} is not a Bewley preference (its perception has affine pieces)")]
    NotBewleyAgents(usize),
    #[error("decomposition residual {0:e} exceeds tolerance")]
    ResidualTooLarge(f64),
    #[error("violation does not reproduce: {0}")]
    InvalidViolation(String),
}

/// `u₀ = Σ αᵢ uᵢ + β`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UtilitarianDecomposition {
    pub weights: Vec<f64>,
    pub shift: f64,
    /// Euclidean norm of `∇u₀ - Σ αᵢ ∇uᵢ`.
    pub residual: f64,
    /// False when the gradients are dependent and `weights` is one of several solutions.
    pub unique: bool,
}

impl UtilitarianDecomposition {
    /// Whether individual `i` carries positive weight.
    pub fn is_active(&self, i: usize) -> bool {
        self.weights[i] > EPS_FEAS
    }

    pub fn active_agents(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.weights.len()).filter(|&i| self.is_active(i))
    }

    /// `Σ αᵢ uᵢ(x) + β`.
    pub fn social_value(&self, profile: &Profile, x: &[f64]) -> f64 {
        profile
            .agents()
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| w * a.utility.value(x))
            .sum::<f64>()
            + self.shift
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum NoDecomposition {
    /// `∇u₀` is not in the span of the individual gradients.
    InconsistentSystem { residual: f64 },
    /// The only solutions put negative weight on someone: unanimity over
    /// constant acts already fails. `agent` is set when the solution is unique.
    NegativeWeight { agent: Option<usize>, weight: f64 },
}

impl std::fmt::Display for NoDecomposition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoDecomposition::InconsistentSystem { residual } => {
                write!(f, "inconsistent system (residual {residual:e})")
            }
            NoDecomposition::NegativeWeight {
                agent: Some(i),
                weight,
            } => write!(f, "negative weight α_{} = {weight}", i + 1),
            NoDecomposition::NegativeWeight { agent: None, .. } => {
                write!(f, "negative weight: no nonnegative solution exists")
            }
        }
    }
}

fn gradient_matrix(profile: &Profile) -> DMatrix<f64> {
    let n = profile.agent_count();
    let m = profile.outcome_dim();
    DMatrix::from_fn(n, m, |i, j| profile.agent(i).utility.gradient()[j])
}

fn numeric_rank(matrix: &DMatrix<f64>) -> (usize, Vec<f64>) {
    let singular: Vec<f64> = matrix
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    let largest = singular.iter().copied().fold(0.0, f64::max);
    let cutoff = RANK_TOL * largest.max(1.0);
    let rank = singular.iter().filter(|s| **s > cutoff).count();
    (rank, singular)
}

fn decomposition_residual(profile: &Profile, weights: &[f64]) -> f64 {
    let g0 = profile.social().utility.gradient();
    (0..profile.outcome_dim())
        .map(|j| {
            let combined: f64 = profile
                .agents()
                .iter()
                .zip(weights)
                .map(|(a, w)| w * a.utility.gradient()[j])
                .sum();
            (g0[j] - combined).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

fn finish(profile: &Profile, weights: Vec<f64>, unique: bool) -> UtilitarianDecomposition {
    let shift = profile.social().utility.intercept()
        - profile
            .agents()
            .iter()
            .zip(&weights)
            .map(|(a, w)| w * a.utility.intercept())
            .sum::<f64>();
    let residual = decomposition_residual(profile, &weights);
    UtilitarianDecomposition {
        weights,
        shift,
        residual,
        unique,
    }
}

/// Solves `∇u₀ = Σ αᵢ ∇uᵢ` with `α >= 0`; the intercepts fix `β`.
///
/// With independent gradients the solution is unique. With dependent ones
/// the smallest-total-weight nonnegative solution is returned and flagged
/// non-unique.
pub fn decompose_utility(profile: &Profile) -> Result<UtilitarianDecomposition, NoDecomposition> {
    let g = gradient_matrix(profile);
    let n = profile.agent_count();
    let g0 = profile.social().utility.gradient();
    let scale = 1.0 + g.amax().max(g0.iter().fold(0.0_f64, |a, b| a.max(b.abs())));
    let tol = EPS_FEAS * scale;

    let gt = g.transpose();
    let rhs = nalgebra::DVector::from_column_slice(g0);
    let svd = gt.clone().svd(true, true);
    let least_squares: Vec<f64> = svd
        .solve(&rhs, RANK_TOL)
        .expect("SVD computed with both factors")
        .iter()
        .copied()
        .collect();
    let residual = decomposition_residual(profile, &least_squares);
    if residual > tol {
        return Err(NoDecomposition::InconsistentSystem { residual });
    }

    let (rank, _) = numeric_rank(&g);
    if rank == n {
        if let Some((i, &w)) = least_squares
            .iter()
            .enumerate()
            .filter(|(_, w)| **w < -tol)
            .min_by(|a, b| a.1.total_cmp(b.1))
        {
            return Err(NoDecomposition::NegativeWeight {
                agent: Some(i),
                weight: w,
            });
        }
        let weights = least_squares.into_iter().map(|w| w.max(0.0)).collect();
        return Ok(finish(profile, weights, true));
    }

    // Dependent gradients: minimise Σ α subject to the gradient identity.
    let mut lp = LinearProgram::minimize(vec![1.0; n]);
    for j in 0..profile.outcome_dim() {
        lp.add_eq((0..n).map(|i| g[(i, j)]).collect(), g0[j]);
    }
    match lp.solve() {
        Ok(LpOutcome::Optimal(opt)) => {
            let weights = opt.primal.into_iter().map(|w| w.max(0.0)).collect();
            Ok(finish(profile, weights, false))
        }
        _ => Err(NoDecomposition::NegativeWeight {
            agent: None,
            weight: least_squares.iter().copied().fold(f64::INFINITY, f64::min),
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiversityReport {
    pub agents: usize,
    pub rank: usize,
    pub independent: bool,
    pub singular_values: Vec<f64>,
}

/// Preference Diversity holds iff the individual utility gradients are linearly independent.
pub fn diversity_check(profile: &Profile) -> DiversityReport {
    let (rank, singular_values) = numeric_rank(&gradient_matrix(profile));
    let agents = profile.agent_count();
    DiversityReport {
        agents,
        rank,
        independent: rank == agents,
        singular_values,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    /// `αᵢ cᵢ(p*) - c₀(p*) = gap > 0`, witnessed by affine piece `piece` of `cᵢ`.
    FiniteGap { gap: f64, piece: usize },
    /// `c₀(p*) < ∞ = cᵢ(p*)`: `p*` leaves `dom cᵢ` through `facet` by `slack`.
    InfiniteGap {
        facet: usize,
        row: HalfSpace,
        slack: f64,
    },
}

/// A prior where `c₀(p*) < αᵢ cᵢ(p*)` for individual `agent` (zero-based).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionViolation {
    pub prior: Prior,
    pub agent: usize,
    pub social_cost: f64,
    pub kind: ViolationKind,
}

impl ConditionViolation {
    /// `αᵢ cᵢ(p*) - c₀(p*)`, infinite for domain exclusions.
    pub fn gap(&self) -> f64 {
        match self.kind {
            ViolationKind::FiniteGap { gap, .. } => gap,
            ViolationKind::InfiniteGap { .. } => f64::INFINITY,
        }
    }

    /// Re-evaluates both perception functions at `p*` and checks the recorded gap.
    pub fn verify(
        &self,
        profile: &Profile,
        decomp: &UtilitarianDecomposition,
        tol: &Tolerances,
    ) -> Result<(), AuditError> {
        let c0 = profile.social().perception.evaluate(&self.prior);
        if !c0.is_finite() {
            return Err(AuditError::InvalidViolation(
                "social perception is infinite at the violating prior".into(),
            ));
        }
        let alpha = decomp.weights[self.agent];
        if alpha <= EPS_FEAS {
            return Err(AuditError::InvalidViolation(
                "agent carries zero weight".into(),
            ));
        }
        let ci = &profile.agent(self.agent).perception;
        match &self.kind {
            ViolationKind::FiniteGap { gap, piece } => {
                let evaluated = alpha * ci.evaluate(&self.prior) - c0;
                let via_piece = alpha * ci.pieces()[*piece].value(self.prior.weights()) - c0;
                if (evaluated - gap).abs() > tol.feasibility.max(1e-9 * gap.abs())
                    || (via_piece - gap).abs() > tol.feasibility.max(1e-9 * gap.abs())
                    || *gap <= tol.decision
                {
                    return Err(AuditError::InvalidViolation(format!(
                        "recorded gap {gap}, re-evaluated {evaluated}, via piece {via_piece}"
                    )));
                }
            }
            ViolationKind::InfiniteGap { row, slack, .. } => {
                let s = row.slack(self.prior.weights());
                if (s - slack).abs() > tol.feasibility || *slack <= tol.decision {
                    return Err(AuditError::InvalidViolation(format!(
                        "recorded facet slack {slack}, re-evaluated {s}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepSource {
    Piece { index: usize },
    Facet { index: usize },
}

/// One LP of the sweep: its optimum is `max (αᵢ piece - c₀)` or `max facet slack`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepEntry {
    pub agent: usize,
    pub source: SweepSource,
    /// `None` when the feasible region of that LP is empty.
    pub optimum: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub sweep: Vec<SweepEntry>,
    pub violations: Vec<ConditionViolation>,
}

impl BoundReport {
    pub fn satisfied(&self) -> bool {
        self.violations.is_empty()
    }

    /// The first violation in sweep order (agents ascending, pieces before facets).
    pub fn primary(&self) -> Option<&ConditionViolation> {
        self.violations.first()
    }
}

/// Checks `c₀(p) ≥ max_i αᵢ cᵢ(p)` for every prior, one LP per piece and facet
/// of each positively weighted `cᵢ`.
pub fn check_perception_bound(
    profile: &Profile,
    decomp: &UtilitarianDecomposition,
    tol: &Tolerances,
) -> Result<BoundReport, AuditError> {
    if decomp.residual > EPS_FEAS * 10.0 {
        return Err(AuditError::ResidualTooLarge(decomp.residual));
    }
    let states = profile.state_count();
    let social = &profile.social().perception;
    let mut sweep = Vec::new();
    let mut violations = Vec::new();

    for i in decomp.active_agents() {
        let alpha = decomp.weights[i];
        let ci = &profile.agent(i).perception;

        for (k, piece) in ci.pieces().iter().enumerate() {
            // maximise α(g·p + h) - t  ⇔  minimise -α g·p + t, over dom cᵢ ∩ dom c₀, t ≥ c₀(p).
            let mut objective: Vec<f64> = piece.gradient.iter().map(|g| -alpha * g).collect();
            objective.push(1.0);
            let mut lp = simplex_program(states, objective);
            social.constrain_epigraph(&mut lp, states);
            ci.domain().constrain(&mut lp);
            let optimum = match lp.solve()? {
                LpOutcome::Optimal(opt) => Some((alpha * piece.offset - opt.value, opt.primal)),
                _ => None,
            };
            sweep.push(SweepEntry {
                agent: i,
                source: SweepSource::Piece { index: k },
                optimum: optimum.as_ref().map(|o| o.0),
            });
            if let Some((value, primal)) = optimum {
                if value > tol.decision {
                    let prior = Prior::from_solver(&primal[..states]);
                    let social_cost = social.evaluate(&prior);
                    let (best_piece, best_value) = ci
                        .pieces()
                        .iter()
                        .enumerate()
                        .map(|(k, p)| (k, p.value(prior.weights())))
                        .max_by(|a, b| a.1.total_cmp(&b.1))
                        .expect("at least one piece");
                    let gap = alpha * best_value.max(0.0) - social_cost;
                    violations.push(ConditionViolation {
                        prior,
                        agent: i,
                        social_cost,
                        kind: ViolationKind::FiniteGap {
                            gap,
                            piece: best_piece,
                        },
                    });
                }
            }
        }

        for (r, row) in ci.domain().rows().iter().enumerate() {
            // maximise a·p - b over dom c₀.
            let objective = row.normal.iter().map(|a| -a).collect();
            let mut lp = simplex_program(states, objective);
            social.domain().constrain(&mut lp);
            let optimum = match lp.solve()? {
                LpOutcome::Optimal(opt) => Some((-opt.value - row.bound, opt.primal)),
                _ => None,
            };
            sweep.push(SweepEntry {
                agent: i,
                source: SweepSource::Facet { index: r },
                optimum: optimum.as_ref().map(|o| o.0),
            });
            if let Some((slack, primal)) = optimum {
                if slack > tol.decision {
                    let prior = Prior::from_solver(&primal[..states]);
                    violations.push(ConditionViolation {
                        social_cost: social.evaluate(&prior),
                        agent: i,
                        kind: ViolationKind::InfiniteGap {
                            facet: r,
                            row: row.clone(),
                            slack: row.slack(prior.weights()),
                        },
                        prior,
                    });
                }
            }
        }
    }
    for v in &violations {
        v.verify(profile, decomp, tol)?;
    }
    Ok(BoundReport { sweep, violations })
}

/// A prior of `P` outside row `row` of `Q`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContainmentWitness {
    pub prior: Prior,
    pub row: usize,
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Containment {
    pub contained: bool,
    pub witness: Option<ContainmentWitness>,
}

/// `P ⊆ Q` (both within the simplex), one LP per row of `Q`: `max a·p over P <= b + ε_dec`.
/// An empty `P` is contained in anything.
pub fn polytope_contained(
    inner: &Polyhedron,
    outer: &Polyhedron,
    tol: &Tolerances,
) -> Result<Containment, AuditError> {
    if inner.states() != outer.states() {
        return Err(DomainError::DimensionMismatch(
            "containment between different state spaces".into(),
        )
        .into());
    }
    let states = inner.states();
    for (r, row) in outer.rows().iter().enumerate() {
        let objective = row.normal.iter().map(|a| -a).collect();
        let mut lp = simplex_program(states, objective);
        inner.constrain(&mut lp);
        match lp.solve()? {
            LpOutcome::Optimal(opt) => {
                let excess = -opt.value - row.bound;
                if excess > tol.decision {
                    return Ok(Containment {
                        contained: false,
                        witness: Some(ContainmentWitness {
                            prior: Prior::from_solver(&opt.primal),
                            row: r,
                            excess,
                        }),
                    });
                }
            }
            _ => break,
        }
    }
    Ok(Containment {
        contained: true,
        witness: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgentContainment {
    pub agent: usize,
    pub weight: f64,
    pub active: bool,
    pub containment: Containment,
}

/// Per-agent containments; `holds` looks only at positively weighted agents.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContainmentAudit {
    pub holds: bool,
    pub agents: Vec<AgentContainment>,
}

fn audit_containments(
    decomp: &UtilitarianDecomposition,
    tol: &Tolerances,
    mut sets: impl FnMut(usize) -> (Polyhedron, Polyhedron),
    agents: usize,
) -> Result<ContainmentAudit, AuditError> {
    let mut rows = Vec::with_capacity(agents);
    for i in 0..agents {
        let (inner, outer) = sets(i);
        rows.push(AgentContainment {
            agent: i,
            weight: decomp.weights[i],
            active: decomp.is_active(i),
            containment: polytope_contained(&inner, &outer, tol)?,
        });
    }
    let holds = rows.iter().all(|a| !a.active || a.containment.contained);
    Ok(ContainmentAudit {
        holds,
        agents: rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroSetReport {
    /// `c₀⁻¹(0) ⊆ cᵢ⁻¹(0)` for every positively weighted `i`.
    pub holds: bool,
    pub agents: Vec<AgentContainment>,
    /// `⋂ᵢ cᵢ⁻¹(0) = ∅`: then some individual must get zero weight under Standard Pareto.
    pub common_zero_set_empty: bool,
    /// Individuals (any weight) whose zero set misses part of `c₀⁻¹(0)`;
    /// Standard Pareto leaves them weight zero.
    pub excluded_agents: Vec<usize>,
}

/// Zero-set containment `c₀⁻¹(0) ⊆ ⋂_{αᵢ>0} cᵢ⁻¹(0)`.
pub fn check_zero_set_containment(
    profile: &Profile,
    decomp: &UtilitarianDecomposition,
    tol: &Tolerances,
) -> Result<ZeroSetReport, AuditError> {
    let social_zero = profile.social().perception.zero_set();
    let audit = audit_containments(
        decomp,
        tol,
        |i| (social_zero.clone(), profile.agent(i).perception.zero_set()),
        profile.agent_count(),
    )?;
    let mut common = Polyhedron::simplex(profile.state_count());
    let mut common_zero_set_empty = false;
    for agent in profile.agents() {
        match common.intersect(&agent.perception.zero_set())? {
            Some(next) => common = next,
            None => {
                common_zero_set_empty = true;
                break;
            }
        }
    }
    let excluded_agents = audit
        .agents
        .iter()
        .filter(|a| !a.containment.contained)
        .map(|a| a.agent)
        .collect();
    Ok(ZeroSetReport {
        holds: audit.holds,
        agents: audit.agents,
        common_zero_set_empty,
        excluded_agents,
    })
}

/// For a Bewley planner with prior set `P₀`: Standard Pareto holds iff
/// `P₀ ⊆ ⋂_{αᵢ>0} cᵢ⁻¹(0)`.
pub fn check_bewley_social(
    profile: &Profile,
    decomp: &UtilitarianDecomposition,
    tol: &Tolerances,
) -> Result<ContainmentAudit, AuditError> {
    let social = &profile.social().perception;
    if !social.is_bewley() {
        return Err(AuditError::NotBewleySocial);
    }
    audit_containments(
        decomp,
        tol,
        |i| {
            (
                social.domain().clone(),
                profile.agent(i).perception.zero_set(),
            )
        },
        profile.agent_count(),
    )
}

/// For Bewley individuals with prior sets `Pᵢ`: Standard Pareto holds iff
/// `dom c₀ ⊆ ⋂_{αᵢ>0} Pᵢ`.
pub fn check_bewley_agents(
    profile: &Profile,
    decomp: &UtilitarianDecomposition,
    tol: &Tolerances,
) -> Result<ContainmentAudit, AuditError> {
    if let Some(i) = profile
        .agents()
        .iter()
        .position(|a| !a.perception.is_bewley())
    {
        return Err(AuditError::NotBewleyAgents(i + 1));
    }
    let dom0 = profile.social().perception.domain();
    audit_containments(
        decomp,
        tol,
        |i| (dom0.clone(), profile.agent(i).perception.domain().clone()),
        profile.agent_count(),
    )
}

/// Liberalism (deference to each individual on acts only they care about)
/// holds iff the perception bound holds.
pub fn check_liberalism(
    profile: &Profile,
    decomp: &UtilitarianDecomposition,
    tol: &Tolerances,
) -> Result<bool, AuditError> {
    Ok(check_perception_bound(profile, decomp, tol)?.satisfied())
}

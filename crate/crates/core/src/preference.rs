//! Deciding `f ≿ g` for a single variational Bewley preference.
//!
//! Acts enter only through their state-wise utility differences
//! `d(s) = u(f(s)) - u(g(s))`; the dominance margin is
//! `min_{p ∈ dom c ∩ Δ} p·d + c(p)`, solved as an LP over `(p, t)` with `t`
//! above every affine piece.

use serde::Serialize;
use thiserror::Error;

use crate::domain::{
    pad, simplex_program, Act, AffineUtility, DomainError, PerceptionFunction, Prior,
};
use crate::lp::{LpError, LpOutcome};
use crate::EPS_DEC;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreferenceError {
    #[error(transparent)]
    DimensionMismatch(#[from] DomainError),
    #[error("mixture weight {0} is outside (0, 1)")]
    MixtureWeight(f64),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominanceCertificate {
    /// `min_p Σ p(s)·(u(f(s)) - u(g(s))) + c(p)`.
    pub margin: f64,
    /// A prior attaining the margin.
    pub argmin: Prior,
    /// `margin >= -ε_dec`.
    pub holds: bool,
}

impl DominanceCertificate {
    /// Re-reads the verdict at another decision threshold.
    pub fn holds_at(&self, eps_dec: f64) -> bool {
        self.margin >= -eps_dec
    }
}

/// `p·d + c(p)`: the quantity minimised by [`dominance`].
pub fn dominance_objective(c: &PerceptionFunction, diff: &[f64], p: &Prior) -> f64 {
    p.expectation(diff) + c.evaluate(p)
}

/// Minimises `p·diff + c(p)` over the effective domain of `c`.
pub fn margin_for_differences(
    c: &PerceptionFunction,
    diff: &[f64],
) -> Result<(f64, Prior), PreferenceError> {
    let states = c.states();
    if diff.len() != states {
        return Err(DomainError::DimensionMismatch(format!(
            "{} utility differences for {states} states",
            diff.len()
        ))
        .into());
    }
    let mut objective = pad(diff, states + 1);
    objective[states] = 1.0;
    let mut lp = simplex_program(states, objective);
    c.constrain_epigraph(&mut lp, states);
    match lp.solve()? {
        LpOutcome::Optimal(opt) => Ok((opt.value, Prior::from_solver(&opt.primal[..states]))),
        LpOutcome::Infeasible(_) => Err(DomainError::EmptyPolyhedron.into()),
        LpOutcome::Unbounded(_) => Err(LpError::NumericalFailure(
            "dominance program cannot be unbounded over the simplex".into(),
        )
        .into()),
    }
}

fn differences(u: &AffineUtility, f: &Act, g: &Act) -> Result<Vec<f64>, PreferenceError> {
    for act in [f, g] {
        if act.outcome_dim() != u.dim() {
            return Err(DomainError::DimensionMismatch(format!(
                "act outcomes have dimension {}, utility expects {}",
                act.outcome_dim(),
                u.dim()
            ))
            .into());
        }
    }
    if f.states() != g.states() {
        return Err(
            DomainError::DimensionMismatch("acts over different state counts".into()).into(),
        );
    }
    Ok(f.utilities(u)
        .into_iter()
        .zip(g.utilities(u))
        .map(|(a, b)| a - b)
        .collect())
}

/// Decides `f ≿ g` for the preference `(u, c)` at the default threshold.
pub fn dominance(
    u: &AffineUtility,
    c: &PerceptionFunction,
    f: &Act,
    g: &Act,
) -> Result<DominanceCertificate, PreferenceError> {
    dominance_with_tolerance(u, c, f, g, EPS_DEC)
}

pub fn dominance_with_tolerance(
    u: &AffineUtility,
    c: &PerceptionFunction,
    f: &Act,
    g: &Act,
    eps_dec: f64,
) -> Result<DominanceCertificate, PreferenceError> {
    let diff = differences(u, f, g)?;
    let (margin, argmin) = margin_for_differences(c, &diff)?;
    Ok(DominanceCertificate {
        margin,
        argmin,
        holds: margin >= -eps_dec,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Comparison {
    /// `f ≻ g`
    StrictlyPrefers,
    /// `g ≻ f`
    StrictlyDispreferred,
    Indifferent,
    Incomparable,
}

impl Comparison {
    pub fn from_verdicts(forward: bool, backward: bool) -> Self {
        match (forward, backward) {
            (true, true) => Comparison::Indifferent,
            (true, false) => Comparison::StrictlyPrefers,
            (false, true) => Comparison::StrictlyDispreferred,
            (false, false) => Comparison::Incomparable,
        }
    }
}

/// Both dominance certificates and the relation they induce.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelationReport {
    pub comparison: Comparison,
    /// Certificate for `f ≿ g`.
    pub forward: DominanceCertificate,
    /// Certificate for `g ≿ f`.
    pub backward: DominanceCertificate,
}

/// Strict preference is `f ≿ g` and not `g ≿ f`.
pub fn relation(
    u: &AffineUtility,
    c: &PerceptionFunction,
    f: &Act,
    g: &Act,
) -> Result<RelationReport, PreferenceError> {
    relation_with_tolerance(u, c, f, g, EPS_DEC)
}

pub fn relation_with_tolerance(
    u: &AffineUtility,
    c: &PerceptionFunction,
    f: &Act,
    g: &Act,
    eps_dec: f64,
) -> Result<RelationReport, PreferenceError> {
    let forward = dominance_with_tolerance(u, c, f, g, eps_dec)?;
    let backward = dominance_with_tolerance(u, c, g, f, eps_dec)?;
    Ok(RelationReport {
        comparison: Comparison::from_verdicts(forward.holds, backward.holds),
        forward,
        backward,
    })
}

/// The state-wise mixture `λ f + (1 - λ) g`.
pub fn mixture(f: &Act, g: &Act, weight: f64) -> Result<Act, PreferenceError> {
    if !(weight > 0.0 && weight < 1.0) {
        return Err(PreferenceError::MixtureWeight(weight));
    }
    if f.states() != g.states() || f.outcome_dim() != g.outcome_dim() {
        return Err(
            DomainError::DimensionMismatch("mixing acts of different shapes".into()).into(),
        );
    }
    let outcomes = f
        .outcomes()
        .iter()
        .zip(g.outcomes())
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .map(|(a, b)| weight * a + (1.0 - weight) * b)
                .collect()
        })
        .collect();
    Ok(Act::new(outcomes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AffinePiece, Polyhedron};
    use approx::assert_abs_diff_eq;

    /// Acts whose outcome is a single coordinate equal to the utility value.
    fn scalar_act(values: &[f64]) -> Act {
        Act::new(values.iter().map(|v| vec![*v]).collect()).unwrap()
    }

    fn identity() -> AffineUtility {
        AffineUtility::new(vec![1.0], 0.0).unwrap()
    }

    fn linear(slope: f64) -> PerceptionFunction {
        PerceptionFunction::new(
            vec![AffinePiece::new(vec![0.0, slope], 0.0)],
            Polyhedron::simplex(2),
        )
        .unwrap()
    }

    #[test]
    fn individual_indifference_in_the_two_state_example() {
        let (f, g) = (scalar_act(&[0.0, 2.0]), scalar_act(&[0.0, 4.0]));
        let report = relation(&identity(), &linear(2.0), &f, &g).unwrap();
        assert_abs_diff_eq!(report.forward.margin, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(report.backward.margin, 0.0, epsilon = 1e-9);
        assert_eq!(report.comparison, Comparison::Indifferent);
    }

    #[test]
    fn social_strict_preference_in_the_two_state_example() {
        let (f, g) = (scalar_act(&[0.0, 2.0]), scalar_act(&[0.0, 4.0]));
        let report = relation(&identity(), &linear(1.0), &f, &g).unwrap();
        assert_abs_diff_eq!(report.forward.margin, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(report.forward.argmin.weights()[1], 1.0, epsilon = 1e-9);
        assert!(!report.forward.holds);
        assert_eq!(report.comparison, Comparison::StrictlyDispreferred);
        // The failing certificate reproduces its margin at its own argmin.
        let diff = [0.0, -2.0];
        assert_abs_diff_eq!(
            dominance_objective(&linear(1.0), &diff, &report.forward.argmin),
            report.forward.margin,
            epsilon = 1e-9
        );
    }

    #[test]
    fn reflexive() {
        let f = scalar_act(&[3.0, -1.0]);
        let cert = dominance(&identity(), &linear(2.0), &f, &f).unwrap();
        assert!(cert.holds);
        assert_abs_diff_eq!(cert.margin, 0.0, epsilon = 1e-9);
        let report = relation(&identity(), &linear(2.0), &f, &f).unwrap();
        assert_eq!(report.comparison, Comparison::Indifferent);
    }

    #[test]
    fn crossing_acts_are_incomparable_without_ambiguity_cost() {
        let (f, g) = (scalar_act(&[1.0, -1.0]), scalar_act(&[0.0, 0.0]));
        let report = relation(&identity(), &PerceptionFunction::zero(2), &f, &g).unwrap();
        assert_abs_diff_eq!(report.forward.margin, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(report.backward.margin, -1.0, epsilon = 1e-9);
        assert_eq!(report.comparison, Comparison::Incomparable);
    }

    #[test]
    fn mixture_is_statewise() {
        let f = Act::new(vec![vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let h = Act::new(vec![vec![4.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(mixture(&f, &f, 0.5).unwrap(), f);
        let u = AffineUtility::new(vec![1.0, 0.0], 0.0).unwrap();
        assert_eq!(mixture(&f, &h, 0.5).unwrap().utilities(&u), vec![2.0, 1.0]);
    }

    #[test]
    fn mixture_weight_is_open_interval() {
        let f = scalar_act(&[0.0, 1.0]);
        for w in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(matches!(
                mixture(&f, &f, w),
                Err(PreferenceError::MixtureWeight(_))
            ));
        }
    }

    #[test]
    fn dimension_mismatch() {
        let f = Act::new(vec![vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            dominance(&identity(), &linear(2.0), &f, &f),
            Err(PreferenceError::DimensionMismatch(_))
        ));
        let three = scalar_act(&[0.0, 1.0, 2.0]);
        assert!(dominance(&identity(), &linear(2.0), &three, &three).is_err());
    }

    #[test]
    fn points_outside_the_domain_are_vacuous() {
        // Bewley with P = {p1 <= 1/2}: f loses only where p1 > 1/2.
        let domain =
            Polyhedron::new(2, vec![crate::domain::HalfSpace::new(vec![0.0, 1.0], 0.5)]).unwrap();
        let c = PerceptionFunction::indicator(domain);
        let (f, g) = (scalar_act(&[1.0, -1.0]), scalar_act(&[0.0, 0.0]));
        let cert = dominance(&identity(), &c, &f, &g).unwrap();
        assert_abs_diff_eq!(cert.margin, 0.0, epsilon = 1e-9);
        assert!(cert.holds);
    }
}

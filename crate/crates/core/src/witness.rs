//! Constructive Pareto-violation witnesses.
//!
//! Given a prior `p*` where `c₀(p*) < αᵢ cᵢ(p*)`, an affine functional
//! `(v, λ)` separates `(p*, c₀(p*))` from the epigraph of `αᵢ cᵢ` with unit
//! weight on the cost coordinate:
//!
//! ```text
//! p·v + αᵢ cᵢ(p) >= λ  for all p in dom cᵢ,    λ > p*·v + c₀(p*)
//! ```
//!
//! For polyhedral `cᵢ` the functional comes straight from the violated
//! object. A violated piece `g·p + h` gives `v = -αᵢ g`, `λ = αᵢ h`. A
//! violated domain facet `d·p <= e` with slack `σ` at `p*` gives
//! `v = -M d`, `λ = -M e` with `M = (c₀(p*) + 1)/σ`.
//!
//! Individual `i` then receives the act `f` with `αᵢ uᵢ(f(s)) = v_s` and the
//! constant act `x` with `αᵢ uᵢ(x) = λ`, both on `i`'s private outcome line,
//! so every other individual is indifferent between them. Individual `i`
//! weakly prefers `f`, while society strictly prefers `x` at `p*`.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::aggregation::{
    diversity_check, AuditError, ConditionViolation, UtilitarianDecomposition, ViolationKind,
};
use crate::domain::{Act, Prior, Profile};
use crate::lp::dot;
use crate::preference::{
    dominance_objective, dominance_with_tolerance, DominanceCertificate, PreferenceError,
};
use crate::{Tolerances, EPS_FEAS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WitnessError {
    #[error("preference diversity fails: gradient rank {rank} < {agents} individuals")]
    DiversityFails { rank: usize, agents: usize },
    #[error("outcome dimension {outcome_dim} is smaller than the {agents} individuals")]
    TooFewDimensions { outcome_dim: usize, agents: usize },
    #[error("invalid violation: {0}")]
    InvalidViolation(String),
    #[error("individual {0} carries zero weight; no witness can target them")]
    ZeroWeight(usize),
    #[error("witness verification failed: {0}")]
    VerificationFailed(String),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Preference(#[from] PreferenceError),
}

/// Outcomes `low`, `high = low + direction` with `uᵢ(high) - uᵢ(low) = 1`
/// and `uⱼ(high) = uⱼ(low)` for every other individual `j`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrivateLine {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
    pub direction: Vec<f64>,
}

impl PrivateLine {
    /// The outcome `low + t·direction`.
    pub fn point(&self, t: f64) -> Vec<f64> {
        self.low
            .iter()
            .zip(&self.direction)
            .map(|(l, d)| l + t * d)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiversityWitness {
    pub lines: Vec<PrivateLine>,
}

impl DiversityWitness {
    pub fn line(&self, agent: usize) -> &PrivateLine {
        &self.lines[agent]
    }

    /// The outcome on `agent`'s line where that individual's utility equals `target`.
    pub fn outcome_with_utility(&self, profile: &Profile, agent: usize, target: f64) -> Vec<f64> {
        let line = &self.lines[agent];
        let base = profile.agent(agent).utility.value(&line.low);
        line.point(target - base)
    }
}

/// Least-norm private directions: column `i` of the pseudo-inverse of the
/// gradient matrix solves `∇uⱼ·δ = [j = i]`.
pub fn diversity_witnesses(profile: &Profile) -> Result<DiversityWitness, WitnessError> {
    let n = profile.agent_count();
    let m = profile.outcome_dim();
    if m < n {
        return Err(WitnessError::TooFewDimensions {
            outcome_dim: m,
            agents: n,
        });
    }
    let report = diversity_check(profile);
    if !report.independent {
        return Err(WitnessError::DiversityFails {
            rank: report.rank,
            agents: n,
        });
    }
    let g = DMatrix::from_fn(n, m, |i, j| profile.agent(i).utility.gradient()[j]);
    let pinv = g
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| WitnessError::VerificationFailed(e.to_string()))?;
    let mut lines = Vec::with_capacity(n);
    for i in 0..n {
        let direction: Vec<f64> = pinv.column(i).iter().copied().collect();
        for j in 0..n {
            let expected = if i == j { 1.0 } else { 0.0 };
            let got = dot(profile.agent(j).utility.gradient(), &direction);
            if (got - expected).abs() > 1e-9 {
                return Err(WitnessError::VerificationFailed(format!(
                    "private direction {i} moves individual {j} by {got}"
                )));
            }
        }
        let low = vec![0.0; m];
        let high = direction.clone();
        lines.push(PrivateLine {
            low,
            high,
            direction,
        });
    }
    Ok(DiversityWitness { lines })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    FinitePiece { piece: usize },
    DomainFacet { facet: usize, scale: f64 },
}

/// `(v, λ)` with `p·v + αᵢ cᵢ(p) >= λ` on `dom cᵢ` and `λ > p*·v + c₀(p*)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationCertificate {
    pub agent: usize,
    /// `v`, in utility units, indexed by state.
    pub normal: Vec<f64>,
    /// `λ`.
    pub level: f64,
    pub provenance: Provenance,
    pub prior: Prior,
    /// `λ - (p*·v + c₀(p*))`.
    pub strict_margin: f64,
}

impl SeparationCertificate {
    /// `p·v + αᵢ cᵢ(p) - λ`; nonnegative on `dom cᵢ`, `+∞` off it.
    pub fn slack_at(&self, profile: &Profile, decomp: &UtilitarianDecomposition, p: &Prior) -> f64 {
        let alpha = decomp.weights[self.agent];
        let ci = profile.agent(self.agent).perception.evaluate(p);
        if ci.is_infinite() {
            return f64::INFINITY;
        }
        p.expectation(&self.normal) + alpha * ci - self.level
    }

    /// Multiplies `(v, λ)` by `factor > 0`; the cost weight is rescaled
    /// accordingly, so the result separates the scaled epigraph.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            normal: self.normal.iter().map(|v| v * factor).collect(),
            level: self.level * factor,
            strict_margin: self.strict_margin * factor,
            ..self.clone()
        }
    }
}

/// Builds the separating functional for a verified violation.
pub fn build_separation(
    profile: &Profile,
    decomp: &UtilitarianDecomposition,
    violation: &ConditionViolation,
    tol: &Tolerances,
) -> Result<SeparationCertificate, WitnessError> {
    violation
        .verify(profile, decomp, tol)
        .map_err(|e| WitnessError::InvalidViolation(e.to_string()))?;
    let i = violation.agent;
    let alpha = decomp.weights[i];
    let p_star = &violation.prior;
    let c0 = profile.social().perception.evaluate(p_star);

    let (normal, level, provenance): (Vec<f64>, f64, Provenance) = match &violation.kind {
        ViolationKind::FiniteGap { piece, .. } => {
            let piece_data = &profile.agent(i).perception.pieces()[*piece];
            let normal = piece_data.gradient.iter().map(|g| -alpha * g).collect();
            (
                normal,
                alpha * piece_data.offset,
                Provenance::FinitePiece { piece: *piece },
            )
        }
        ViolationKind::InfiniteGap { facet, row, .. } => {
            let slack = row.slack(p_star.weights());
            let scale = (c0 + 1.0) / slack;
            let normal = row.normal.iter().map(|d| -scale * d).collect();
            (
                normal,
                -scale * row.bound,
                Provenance::DomainFacet {
                    facet: *facet,
                    scale,
                },
            )
        }
    };
    let strict_margin = level - (p_star.expectation(&normal) + c0);
    if strict_margin <= tol.decision {
        return Err(WitnessError::InvalidViolation(format!(
            "separation is not strict at the violating prior (margin {strict_margin})"
        )));
    }
    Ok(SeparationCertificate {
        agent: i,
        normal,
        level,
        provenance,
        prior: p_star.clone(),
        strict_margin,
    })
}

/// Acts every individual weakly ranks `f ≿ x` while society ranks `x` strictly above `f`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParetoWitness {
    pub agent: usize,
    pub f: Act,
    pub x: Act,
    /// `f ≿ᵢ x` for each individual, re-solved by the preference engine.
    pub individual: Vec<DominanceCertificate>,
    /// `f ≿₀ x`, which must fail.
    pub social: DominanceCertificate,
    pub social_prior: Prior,
    /// `p*·(u₀(f) - u₀(x)) + c₀(p*)`.
    pub social_margin_at_prior: f64,
}

/// Places `f` and `x` on individual `i*`'s private line and re-verifies every verdict.
pub fn construct_witness(
    profile: &Profile,
    decomp: &UtilitarianDecomposition,
    sep: &SeparationCertificate,
    lines: &DiversityWitness,
    tol: &Tolerances,
) -> Result<ParetoWitness, WitnessError> {
    let i = sep.agent;
    let alpha = decomp.weights[i];
    if alpha <= EPS_FEAS {
        return Err(WitnessError::ZeroWeight(i + 1));
    }
    let states = profile.state_count();
    let x_outcome = lines.outcome_with_utility(profile, i, sep.level / alpha);
    let x = Act::constant(x_outcome, states);
    let f = Act::new(
        sep.normal
            .iter()
            .map(|v| lines.outcome_with_utility(profile, i, v / alpha))
            .collect(),
    )
    .map_err(|e| WitnessError::VerificationFailed(e.to_string()))?;

    let mut individual = Vec::with_capacity(profile.agent_count());
    for (j, agent) in profile.agents().iter().enumerate() {
        let cert =
            dominance_with_tolerance(&agent.utility, &agent.perception, &f, &x, tol.decision)?;
        if !cert.holds {
            return Err(WitnessError::VerificationFailed(format!(
                "individual {} does not weakly prefer f (margin {})",
                j + 1,
                cert.margin
            )));
        }
        individual.push(cert);
    }

    let social_pref = profile.social();
    let social = dominance_with_tolerance(
        &social_pref.utility,
        &social_pref.perception,
        &f,
        &x,
        tol.decision,
    )?;
    let diff: Vec<f64> = f
        .utilities(&social_pref.utility)
        .iter()
        .zip(x.utilities(&social_pref.utility))
        .map(|(a, b)| a - b)
        .collect();
    let social_margin_at_prior = dominance_objective(&social_pref.perception, &diff, &sep.prior);
    let expected = -sep.strict_margin;
    let agreement = tol.feasibility.max(1e-9) * (1.0 + expected.abs()) * 10.0;
    if (social_margin_at_prior - expected).abs() > agreement {
        return Err(WitnessError::VerificationFailed(format!(
            "social margin at p* is {social_margin_at_prior}, separation predicts {expected}"
        )));
    }
    if social.margin >= -tol.strict() || social.margin > social_margin_at_prior + tol.feasibility {
        return Err(WitnessError::VerificationFailed(format!(
            "society does not strictly reject f (margin {})",
            social.margin
        )));
    }
    Ok(ParetoWitness {
        agent: i,
        f,
        x,
        individual,
        social,
        social_prior: sep.prior.clone(),
        social_margin_at_prior,
    })
}

/// Separation, private lines and construction in one call.
pub fn forge(
    profile: &Profile,
    decomp: &UtilitarianDecomposition,
    violation: &ConditionViolation,
    tol: &Tolerances,
) -> Result<(SeparationCertificate, ParetoWitness), WitnessError> {
    let sep = build_separation(profile, decomp, violation, tol)?;
    let lines = diversity_witnesses(profile)?;
    let witness = construct_witness(profile, decomp, &sep, &lines, tol)?;
    Ok((sep, witness))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::{check_perception_bound, decompose_utility};
    use crate::domain::{HalfSpace, PerceptionFunction, Polyhedron, Preference};
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    fn primary(profile: &Profile) -> (UtilitarianDecomposition, ConditionViolation) {
        let d = decompose_utility(profile).unwrap();
        let v = check_perception_bound(profile, &d, &Tolerances::default())
            .unwrap()
            .primary()
            .unwrap()
            .clone();
        (d, v)
    }

    #[test]
    fn private_direction_of_the_first_individual() {
        let profile = fixtures::profile(fixtures::EXAMPLE1);
        let lines = diversity_witnesses(&profile).unwrap();
        let delta = &lines.line(0).direction;
        for (got, want) in delta.iter().zip([2.0 / 3.0, -1.0 / 3.0, 1.0 / 3.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        assert_eq!(lines.line(0).low, vec![0.0; 3]);
    }

    #[test]
    fn piece_separation_for_the_flat_planner() {
        let profile = fixtures::profile(fixtures::FLATZERO);
        let (d, v) = primary(&profile);
        let sep = build_separation(&profile, &d, &v, &Tolerances::default()).unwrap();
        assert_eq!(sep.provenance, Provenance::FinitePiece { piece: 0 });
        assert_abs_diff_eq!(sep.normal[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sep.normal[1], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sep.level, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sep.strict_margin, 1.0, epsilon = 1e-9);
        // The functional supports the scaled epigraph everywhere on the simplex.
        for k in 0..=10 {
            let p = Prior::new(vec![1.0 - k as f64 / 10.0, k as f64 / 10.0]).unwrap();
            assert!(sep.slack_at(&profile, &d, &p) >= -1e-12);
        }
    }

    #[test]
    fn flat_planner_witness_margins() {
        let profile = fixtures::profile(fixtures::FLATZERO);
        let (d, v) = primary(&profile);
        let (_, w) = forge(&profile, &d, &v, &Tolerances::default()).unwrap();
        assert_eq!(w.agent, 0);
        assert_abs_diff_eq!(w.individual[0].margin, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(w.individual[1].margin, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(w.social.margin, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(w.social_margin_at_prior, -1.0, epsilon = 1e-9);
        assert!(w.x.is_constant());
    }

    #[test]
    fn facet_separation_scales_with_the_social_cost() {
        // Agent 1 restricted to p1 <= 1/2; the planner keeps c₀ = p₁ on the simplex.
        let base = fixtures::profile(fixtures::EXAMPLE1);
        let restricted = Preference::new(
            base.agent(0).utility.clone(),
            PerceptionFunction::indicator(
                Polyhedron::new(2, vec![HalfSpace::new(vec![0.0, 1.0], 0.5)]).unwrap(),
            ),
        );
        let profile = Profile::new(
            base.states().to_vec(),
            3,
            vec![restricted, base.agent(1).clone()],
            base.social().clone(),
        )
        .unwrap();
        let (d, v) = primary(&profile);
        let tol = Tolerances::default();
        let sep = build_separation(&profile, &d, &v, &tol).unwrap();
        // p* = (0, 1): slack ½, c₀ = 1, so M = 4.
        match sep.provenance {
            Provenance::DomainFacet { facet, scale } => {
                assert_eq!(facet, 0);
                assert_abs_diff_eq!(scale, 4.0, epsilon = 1e-9);
            }
            ref other => panic!("unexpected {other:?}"),
        }
        assert_abs_diff_eq!(sep.normal[1], -4.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sep.level, -2.0, epsilon = 1e-9);
        let (_, w) = forge(&profile, &d, &v, &tol).unwrap();
        assert!(w.individual.iter().all(|c| c.holds));
        assert!(w.social.margin < -tol.strict());
    }

    #[test]
    fn facet_separation_on_the_flat_planner_uses_scale_two() {
        // c₀ ≡ 0 and agent 1 restricted to p1 <= 1/2: M = (0 + 1)/(1/2) = 2.
        let base = fixtures::profile(fixtures::FLATZERO);
        let restricted = Preference::new(
            base.agent(0).utility.clone(),
            PerceptionFunction::indicator(
                Polyhedron::new(2, vec![HalfSpace::new(vec![0.0, 1.0], 0.5)]).unwrap(),
            ),
        );
        let profile = Profile::new(
            base.states().to_vec(),
            3,
            vec![restricted, base.agent(1).clone()],
            base.social().clone(),
        )
        .unwrap();
        let (d, v) = primary(&profile);
        let sep = build_separation(&profile, &d, &v, &Tolerances::default()).unwrap();
        assert_abs_diff_eq!(sep.normal[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sep.normal[1], -2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sep.level, -1.0, epsilon = 1e-9);
    }

    #[test]
    fn tampered_violation_is_rejected() {
        let profile = fixtures::profile(fixtures::FLATZERO);
        let (d, mut v) = primary(&profile);
        v.prior = Prior::vertex(2, 0);
        assert!(matches!(
            build_separation(&profile, &d, &v, &Tolerances::default()),
            Err(WitnessError::InvalidViolation(_))
        ));
    }

    #[test]
    fn dependent_gradients_have_no_private_lines() {
        let base = fixtures::profile(fixtures::DICTATOR);
        let a = base.agent(0).clone();
        let profile =
            Profile::new(base.states().to_vec(), 3, vec![a.clone(), a.clone()], a).unwrap();
        assert!(matches!(
            diversity_witnesses(&profile),
            Err(WitnessError::DiversityFails { rank: 1, agents: 2 })
        ));
    }
}

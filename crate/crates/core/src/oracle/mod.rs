//! Brute-force ground truth that never touches the simplex solver on its
//! search path: grid minimisation over the simplex lattice, seeded act
//! sampling for Pareto and Liberalism audits, and randomized searches for
//! counterexamples to transitivity.
//!
//! Every hit reported by a sampled search is re-verified with the exact LP
//! engine before it is returned, so a reported violation is never a grid
//! artefact. Misses are not proofs.

mod families;
mod grid;
mod sampling;

use thiserror::Error;

use crate::lp::LpError;
use crate::preference::PreferenceError;

pub use families::{
    bewley_agents_profile, bewley_social_profile, liberal_profile, random_perception,
    random_polyhedral_profile, random_prior, FamilyOptions,
};
pub use grid::{grid_dominance, grid_priors, lattice_size, GridMargin, PriorGrid, MAX_GRID_POINTS};
pub use sampling::{
    constant_act_search, dominating_direction, find_intransitivity, rng, sampled_liberalism_audit,
    sampled_pareto_audit, ActSampler, AuditSettings, ConstantViolation, InjectedPair,
    IntransitiveTriple, OracleViolation, PairSource, SampledAudit, UTILITY_BOX,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("prior lattice with {states} states at resolution {resolution} is too large")]
    GridTooLarge { states: usize, resolution: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Preference(#[from] PreferenceError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::decompose_utility;
    use crate::domain::{Act, AffinePiece, PerceptionFunction, Polyhedron};
    use crate::fixtures;
    use crate::witness::diversity_witnesses;
    use approx::assert_abs_diff_eq;

    fn example_acts() -> Vec<InjectedPair> {
        let f = Act::new(vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 2.0]]).unwrap();
        let g = Act::new(vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 4.0]]).unwrap();
        vec![InjectedPair {
            label: "f vs g".into(),
            f,
            g,
        }]
    }

    #[test]
    fn grid_margins_in_the_two_state_example() {
        let profile = fixtures::profile(fixtures::EXAMPLE1);
        let pair = &example_acts()[0];
        let agent = profile.agent(0);
        let m = grid_dominance(&agent.utility, &agent.perception, &pair.f, &pair.g, 100).unwrap();
        assert_abs_diff_eq!(m.value, 0.0, epsilon = 1e-12);
        let social = profile.social();
        let m = grid_dominance(&social.utility, &social.perception, &pair.f, &pair.g, 100).unwrap();
        assert_abs_diff_eq!(m.value, -1.0, epsilon = 1e-12);
        assert_eq!(m.argmin.unwrap().weights(), &[0.0, 1.0]);
        let same =
            grid_dominance(&agent.utility, &agent.perception, &pair.f, &pair.f, 100).unwrap();
        assert_abs_diff_eq!(same.value, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn domain_between_lattice_points_is_flagged() {
        let domain = Polyhedron::new(
            2,
            vec![
                crate::domain::HalfSpace::new(vec![0.0, 1.0], 0.3),
                crate::domain::HalfSpace::new(vec![0.0, -1.0], -0.3),
            ],
        )
        .unwrap();
        let c = PerceptionFunction::indicator(domain);
        let u = crate::domain::AffineUtility::new(vec![1.0], 0.0).unwrap();
        let f = Act::new(vec![vec![0.0], vec![1.0]]).unwrap();
        let m = grid_dominance(&u, &c, &f, &f, 2).unwrap();
        assert!(m.empty_domain_on_grid);
        assert!(m.value.is_infinite());
        assert!(
            !grid_dominance(&u, &c, &f, &f, 10)
                .unwrap()
                .empty_domain_on_grid
        );
    }

    #[test]
    fn injected_example_pair_is_a_verified_violation() {
        let profile = fixtures::profile(fixtures::EXAMPLE1);
        let settings = AuditSettings {
            samples: 200,
            ..AuditSettings::default()
        };
        let audit = sampled_pareto_audit(&profile, &example_acts(), &settings).unwrap();
        let first = &audit.violations[0];
        assert_eq!(
            first.source,
            PairSource::Injected {
                label: "f vs g".into()
            }
        );
        assert_abs_diff_eq!(first.social.margin, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(first.social_lhs, 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(first.social_rhs, 4.0, epsilon = 1e-9);
        assert_eq!(audit.seed, 7);
    }

    #[test]
    fn dictator_audit_is_clean() {
        let profile = fixtures::profile(fixtures::DICTATOR);
        let audit = sampled_pareto_audit(&profile, &[], &AuditSettings::default()).unwrap();
        assert!(audit.clean(), "{:?}", audit.violations.first());
        assert!(audit.unanimous_pairs > 100);
    }

    #[test]
    fn audits_are_deterministic_per_seed() {
        let profile = fixtures::profile(fixtures::EXAMPLE1);
        let settings = AuditSettings {
            samples: 300,
            seed: 11,
            ..AuditSettings::default()
        };
        let a = sampled_pareto_audit(&profile, &[], &settings).unwrap();
        let b = sampled_pareto_audit(&profile, &[], &settings).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn liberalism_holds_for_the_example_and_fails_for_the_flat_planner() {
        let settings = AuditSettings {
            samples: 500,
            ..AuditSettings::default()
        };
        let example = fixtures::profile(fixtures::EXAMPLE1);
        let lines = diversity_witnesses(&example).unwrap();
        assert!(sampled_liberalism_audit(&example, &lines, &settings)
            .unwrap()
            .clean());
        let flat = fixtures::profile(fixtures::FLATZERO);
        let lines = diversity_witnesses(&flat).unwrap();
        assert!(!sampled_liberalism_audit(&flat, &lines, &settings)
            .unwrap()
            .clean());
    }

    #[test]
    fn constant_acts_expose_negative_weights() {
        let base = fixtures::profile(fixtures::EXAMPLE1);
        let social = crate::domain::Preference::new(
            crate::domain::AffineUtility::new(vec![1.0, -1.0, 0.0], 0.0).unwrap(),
            base.social().perception.clone(),
        );
        let profile = base.with_social(social).unwrap();
        assert!(decompose_utility(&profile).is_err());
        let hit = constant_act_search(&profile, 1000, 3, &Default::default())
            .unwrap()
            .expect("a constant-act violation");
        assert!(hit.individual.iter().all(|c| c.holds));
        assert!(hit.social_gain < 0.0);
        assert_abs_diff_eq!(hit.social.margin, hit.social_gain, epsilon = 1e-9);
        let clean = fixtures::profile(fixtures::DICTATOR);
        assert!(constant_act_search(&clean, 1000, 3, &Default::default())
            .unwrap()
            .is_none());
    }

    #[test]
    fn linear_cost_is_intransitive_and_bewley_is_not() {
        let u = crate::domain::AffineUtility::new(vec![1.0], 0.0).unwrap();
        let c = PerceptionFunction::new(
            vec![AffinePiece::new(vec![0.0, 2.0], 0.0)],
            Polyhedron::simplex(2),
        )
        .unwrap();
        let t = find_intransitivity(&u, &c, 100_000, 1)
            .unwrap()
            .expect("a triple");
        assert!(t.fg.holds && t.gh.holds && !t.fh.holds);
        let bewley = PerceptionFunction::zero(2);
        assert!(find_intransitivity(&u, &bewley, 20_000, 1)
            .unwrap()
            .is_none());
    }

    #[test]
    fn families_meet_their_conditions() {
        use crate::aggregation::{check_bewley_agents, check_bewley_social, check_liberalism};
        let tol = crate::Tolerances::default();
        let mut rng = rng(5, 9);
        for states in 2..=4 {
            for agents in 2..=3 {
                let opts = FamilyOptions {
                    states,
                    agents,
                    ..FamilyOptions::default()
                };
                for _ in 0..5 {
                    let p = bewley_social_profile(&mut rng, &opts);
                    let d = decompose_utility(&p).unwrap();
                    assert!(check_bewley_social(&p, &d, &tol).unwrap().holds);
                    let p = bewley_agents_profile(&mut rng, &opts);
                    let d = decompose_utility(&p).unwrap();
                    assert!(check_bewley_agents(&p, &d, &tol).unwrap().holds);
                    let p = liberal_profile(&mut rng, &opts);
                    let d = decompose_utility(&p).unwrap();
                    assert!(check_liberalism(&p, &d, &tol).unwrap());
                    let p = random_polyhedral_profile(&mut rng, &opts);
                    assert_eq!(p.outcome_dim(), agents + 1);
                }
            }
        }
    }
}

use bewley::aggregation::{
    check_bewley_agents, check_bewley_social, check_perception_bound, check_zero_set_containment,
    decompose_utility, NoDecomposition,
};
use bewley::oracle::{
    bewley_agents_profile, bewley_social_profile, grid_priors, random_polyhedral_profile, rng,
    FamilyOptions,
};
use bewley::witness::forge;
use bewley::{Prior, Profile, Tolerances};
use proptest::prelude::*;

fn options(states: usize, agents: usize) -> FamilyOptions {
    FamilyOptions {
        states,
        agents,
        max_pieces: 3,
        negative_weight_rate: 0.0,
    }
}

fn shape() -> impl Strategy<Value = (u64, usize, usize)> {
    (any::<u64>(), 2..4usize, 2..4usize)
}

fn social_cost_excess(profile: &Profile, weights: &[f64], p: &Prior) -> f64 {
    let aggregated: f64 = profile
        .agents()
        .iter()
        .zip(weights)
        .map(|(a, w)| w * a.perception.evaluate(p))
        .sum();
    aggregated - profile.social().perception.evaluate(p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decomposition_reproduces_the_planner((seed, states, agents) in shape()) {
        let profile = random_polyhedral_profile(&mut rng(seed, 0), &options(states, agents));
        let d = decompose_utility(&profile).unwrap();
        prop_assert!(d.weights.iter().all(|w| *w >= -1e-9));
        prop_assert!(d.residual <= 1e-8);
        let x: Vec<f64> = (0..profile.outcome_dim()).map(|k| (k as f64 * 0.7).sin()).collect();
        let direct = profile.social().utility.value(&x);
        prop_assert!((d.social_value(&profile, &x) - direct).abs() <= 1e-7);
    }

    #[test]
    fn a_satisfied_bound_holds_on_the_lattice((seed, states, agents) in shape()) {
        let tol = Tolerances::default();
        let profile = random_polyhedral_profile(&mut rng(seed, 1), &options(states, agents));
        let d = decompose_utility(&profile).unwrap();
        let bound = check_perception_bound(&profile, &d, &tol).unwrap();
        if bound.satisfied() {
            let social = &profile.social().perception;
            for p in grid_priors(states, 12).unwrap().into_iter().filter(|p| social.domain().contains(p)) {
                prop_assert!(social_cost_excess(&profile, &d.weights, &p) <= 1e-6);
            }
        }
        for v in &bound.violations {
            prop_assert!(forge(&profile, &d, v, &tol).is_ok());
        }
    }

    #[test]
    fn containment_families_pass_their_checks((seed, states, agents) in shape()) {
        let tol = Tolerances::default();
        let social = bewley_social_profile(&mut rng(seed, 2), &options(states, agents));
        let d = decompose_utility(&social).unwrap();
        prop_assert!(check_zero_set_containment(&social, &d, &tol).unwrap().holds);
        prop_assert!(check_bewley_social(&social, &d, &tol).unwrap().holds);

        let agents_profile = bewley_agents_profile(&mut rng(seed, 3), &options(states, agents));
        let d = decompose_utility(&agents_profile).unwrap();
        prop_assert!(check_bewley_agents(&agents_profile, &d, &tol).unwrap().holds);
    }
}

#[test]
fn forced_negative_weight_is_reported() {
    let opts = FamilyOptions {
        negative_weight_rate: 1.0,
        ..options(2, 2)
    };
    let found = (0..20).any(|k| {
        let profile = random_polyhedral_profile(&mut rng(99, k), &opts);
        matches!(
            decompose_utility(&profile),
            Err(NoDecomposition::NegativeWeight { .. })
        )
    });
    assert!(found);
}

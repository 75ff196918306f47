use bewley::oracle::{grid_dominance, random_perception, rng};
use bewley::preference::{dominance, margin_for_differences, relation, Comparison};
use bewley::{Act, AffinePiece, AffineUtility, PerceptionFunction, Polyhedron};
use proptest::prelude::*;

fn scalar_act(values: &[f64]) -> Act {
    Act::new(values.iter().map(|v| vec![*v]).collect()).unwrap()
}

fn identity() -> AffineUtility {
    AffineUtility::new(vec![1.0], 0.0).unwrap()
}

fn perception(states: usize) -> impl Strategy<Value = PerceptionFunction> {
    (any::<u64>(), 1..4usize)
        .prop_map(move |(seed, pieces)| random_perception(&mut rng(seed, 0), states, pieces, None))
}

fn differences(states: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-6.0..6.0f64, states)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_margin_is_a_lower_bound_on_the_grid(
        (c, d) in (2..4usize).prop_flat_map(|s| (perception(s), differences(s)))
    ) {
        let (lp, argmin) = margin_for_differences(&c, &d).unwrap();
        prop_assert!(c.domain().contains(&argmin));
        let attained = argmin.expectation(&d) + c.evaluate(&argmin);
        prop_assert!((attained - lp).abs() <= 1e-7);
        let zero = vec![0.0; d.len()];
        let grid = grid_dominance(&identity(), &c, &scalar_act(&d), &scalar_act(&zero), 40).unwrap();
        if !grid.empty_domain_on_grid {
            prop_assert!(lp <= grid.value + 1e-9, "LP {lp} grid {}", grid.value);
        }
    }

    #[test]
    fn raising_every_payoff_preserves_dominance(
        (c, d, bump) in (2..5usize).prop_flat_map(|s| (perception(s), differences(s), differences(s)))
    ) {
        let raised: Vec<f64> = d.iter().zip(&bump).map(|(a, b)| a + b.abs()).collect();
        let (before, _) = margin_for_differences(&c, &d).unwrap();
        let (after, _) = margin_for_differences(&c, &raised).unwrap();
        prop_assert!(after >= before - 1e-9);
    }

    #[test]
    fn shifting_both_acts_leaves_the_relation_unchanged(
        (c, f, g, shift) in (2..4usize).prop_flat_map(|s| (perception(s), differences(s), differences(s), -5.0..5.0f64))
    ) {
        let u = identity();
        let before = relation(&u, &c, &scalar_act(&f), &scalar_act(&g)).unwrap();
        let f2: Vec<f64> = f.iter().map(|v| v + shift).collect();
        let g2: Vec<f64> = g.iter().map(|v| v + shift).collect();
        let after = relation(&u, &c, &scalar_act(&f2), &scalar_act(&g2)).unwrap();
        prop_assert!((before.forward.margin - after.forward.margin).abs() <= 1e-7);
    }
}

#[test]
fn perception_costs_break_incomparability() {
    // A bet that pays 1 in s0 and loses 1 in s1 against nothing.
    let u = identity();
    let (bet, nothing) = (scalar_act(&[1.0, -1.0]), scalar_act(&[0.0, 0.0]));
    let bewley = PerceptionFunction::zero(2);
    assert_eq!(
        relation(&u, &bewley, &bet, &nothing).unwrap().comparison,
        Comparison::Incomparable
    );

    let steep = PerceptionFunction::new(
        vec![AffinePiece::new(vec![0.0, 3.0], 0.0)],
        Polyhedron::simplex(2),
    )
    .unwrap();
    let cert = dominance(&u, &steep, &bet, &nothing).unwrap();
    assert!(cert.holds);
    assert!((cert.margin - 1.0).abs() < 1e-9);
}

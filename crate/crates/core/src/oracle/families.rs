//! Seeded random profiles, optionally satisfying an aggregation condition by
//! construction.
//!
//! All families use `m = n + 1` outcome dimensions and individual gradients
//! whose smallest singular value is at least `0.1`, and build the social
//! utility as `Σ αᵢ uᵢ + β`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::domain::{
    AffinePiece, AffineUtility, HalfSpace, PerceptionFunction, Polyhedron, Preference, Prior,
    Profile,
};
use crate::lp::dot;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FamilyOptions {
    pub states: usize,
    pub agents: usize,
    pub max_pieces: usize,
    /// Probability that one individual receives a negative social weight.
    pub negative_weight_rate: f64,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        Self {
            states: 3,
            agents: 2,
            max_pieces: 4,
            negative_weight_rate: 0.0,
        }
    }
}

/// A flat-Dirichlet prior, bounded away from the faces of the simplex.
pub fn random_prior(rng: &mut impl Rng, states: usize) -> Prior {
    let raw: Vec<f64> = (0..states)
        .map(|_| -(1.0 - rng.random::<f64>()).ln() + 0.05)
        .collect();
    let total: f64 = raw.iter().sum();
    Prior::new(raw.into_iter().map(|w| w / total).collect()).expect("normalised")
}

fn random_vec(rng: &mut impl Rng, len: usize, half_width: f64) -> Vec<f64> {
    (0..len)
        .map(|_| rng.random_range(-half_width..=half_width))
        .collect()
}

/// Up to two rows `a·p <= b` with `p̂` strictly inside.
fn rows_around(rng: &mut impl Rng, anchor: &Prior) -> Vec<HalfSpace> {
    let count = match rng.random_range(0..10) {
        0..=4 => 0,
        5..=7 => 1,
        _ => 2,
    };
    (0..count)
        .map(|_| {
            let a = random_vec(rng, anchor.len(), 1.0);
            let b = dot(&a, anchor.weights()) + rng.random_range(0.05..0.4);
            HalfSpace::new(a, b)
        })
        .collect()
}

/// A random polyhedral perception function with at most `max_pieces` pieces.
///
/// With an `anchor`, the pieces are `g·(p - p̂) - s` with `s >= 0` plus the
/// zero piece, and the domain contains `p̂`, so `p̂` lies in the zero set.
/// Without one, pieces are arbitrary and shifted to have minimum zero.
pub fn random_perception(
    rng: &mut impl Rng,
    states: usize,
    max_pieces: usize,
    anchor: Option<&Prior>,
) -> PerceptionFunction {
    let centre = anchor.cloned().unwrap_or_else(|| random_prior(rng, states));
    let domain = Polyhedron::new(states, rows_around(rng, &centre)).expect("contains its centre");
    let count = if rng.random_bool(0.2) {
        0
    } else {
        rng.random_range(1..=max_pieces.max(1))
    };
    if count == 0 {
        return PerceptionFunction::indicator(domain);
    }
    let mut pieces: Vec<AffinePiece> = (0..count)
        .map(|_| {
            let g = random_vec(rng, states, 3.0);
            let h = match anchor {
                Some(p) => {
                    let slack = if rng.random_bool(0.3) {
                        0.0
                    } else {
                        rng.random_range(0.0..0.5)
                    };
                    -dot(&g, p.weights()) - slack
                }
                None => rng.random_range(-1.0..1.0),
            };
            AffinePiece::new(g, h)
        })
        .collect();
    if anchor.is_some() {
        pieces.push(AffinePiece::new(vec![0.0; states], 0.0));
        PerceptionFunction::new(pieces, domain)
            .expect("zero piece attains the minimum at the anchor")
    } else {
        PerceptionFunction::normalized(pieces, domain).expect("shifted to minimum zero")
    }
}

fn independent_utilities(rng: &mut impl Rng, n: usize, m: usize) -> Vec<AffineUtility> {
    loop {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| random_vec(rng, m, 2.0)).collect();
        let g = DMatrix::from_fn(n, m, |i, j| rows[i][j]);
        let smallest = g
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if smallest >= 0.1 {
            return rows
                .into_iter()
                .map(|r| AffineUtility::new(r, rng.random_range(-1.0..1.0)).expect("nonzero"))
                .collect();
        }
    }
}

/// Nonnegative weights with at least one positive entry; some are zero.
fn random_weights(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(0.15) {
                    0.0
                } else {
                    rng.random_range(0.2..2.0)
                }
            })
            .collect();
        if w.iter().any(|x| *x > 0.0) {
            return w;
        }
    }
}

fn social_utility(rng: &mut impl Rng, agents: &[AffineUtility], weights: &[f64]) -> AffineUtility {
    let m = agents[0].dim();
    let gradient = (0..m)
        .map(|j| {
            agents
                .iter()
                .zip(weights)
                .map(|(u, w)| w * u.gradient()[j])
                .sum()
        })
        .collect();
    let intercept = agents
        .iter()
        .zip(weights)
        .map(|(u, w)| w * u.intercept())
        .sum::<f64>()
        + rng.random_range(-1.0..1.0);
    AffineUtility::new(gradient, intercept).expect("independent gradients with nonzero weights")
}

fn assemble(
    states: usize,
    utilities: Vec<AffineUtility>,
    perceptions: Vec<PerceptionFunction>,
    social: Preference,
) -> Profile {
    let m = social.utility.dim();
    let agents = utilities
        .into_iter()
        .zip(perceptions)
        .map(|(u, c)| Preference::new(u, c))
        .collect();
    let labels = (0..states).map(|s| format!("s{s}")).collect();
    Profile::new(labels, m, agents, social).expect("generated profiles are consistent")
}

/// Arbitrary perception functions; the aggregation condition may or may not hold.
pub fn random_polyhedral_profile(rng: &mut impl Rng, opts: &FamilyOptions) -> Profile {
    let (s, n) = (opts.states, opts.agents);
    let utilities = independent_utilities(rng, n, n + 1);
    let perceptions = (0..n)
        .map(|_| random_perception(rng, s, opts.max_pieces, None))
        .collect();
    let mut weights = random_weights(rng, n);
    if rng.random_bool(opts.negative_weight_rate) {
        let i = rng.random_range(0..n);
        weights[i] = -rng.random_range(0.2..1.0);
        if weights.iter().all(|w| *w <= 0.0) {
            weights[(i + 1) % n] = 1.0;
        }
    }
    let social = Preference::new(
        social_utility(rng, &utilities, &weights),
        random_perception(rng, s, opts.max_pieces, None),
    );
    assemble(s, utilities, perceptions, social)
}

/// A Bewley planner whose prior set lies inside every positively weighted
/// individual's zero set.
pub fn bewley_social_profile(rng: &mut impl Rng, opts: &FamilyOptions) -> Profile {
    let (s, n) = (opts.states, opts.agents);
    let anchor = random_prior(rng, s);
    let utilities = independent_utilities(rng, n, n + 1);
    let perceptions: Vec<PerceptionFunction> = (0..n)
        .map(|_| random_perception(rng, s, opts.max_pieces, Some(&anchor)))
        .collect();
    let weights = random_weights(rng, n);
    let domain = if rng.random_bool(0.3) {
        Polyhedron::singleton(&anchor)
    } else {
        let mut rows: Vec<HalfSpace> = weights
            .iter()
            .zip(&perceptions)
            .filter(|(w, _)| **w > 0.0)
            .flat_map(|(_, c)| c.zero_set().rows().to_vec())
            .collect();
        rows.extend(rows_around(rng, &anchor));
        Polyhedron::new(s, rows).expect("contains the anchor")
    };
    let social = Preference::new(
        social_utility(rng, &utilities, &weights),
        PerceptionFunction::indicator(domain),
    );
    assemble(s, utilities, perceptions, social)
}

/// Bewley individuals and a planner whose effective domain lies inside every
/// positively weighted individual's prior set.
pub fn bewley_agents_profile(rng: &mut impl Rng, opts: &FamilyOptions) -> Profile {
    let (s, n) = (opts.states, opts.agents);
    let anchor = random_prior(rng, s);
    let utilities = independent_utilities(rng, n, n + 1);
    let perceptions: Vec<PerceptionFunction> = (0..n)
        .map(|_| {
            PerceptionFunction::indicator(
                Polyhedron::new(s, rows_around(rng, &anchor)).expect("contains the anchor"),
            )
        })
        .collect();
    let weights = random_weights(rng, n);
    let mut rows: Vec<HalfSpace> = weights
        .iter()
        .zip(&perceptions)
        .filter(|(w, _)| **w > 0.0)
        .flat_map(|(_, c)| c.domain().rows().to_vec())
        .collect();
    rows.extend(rows_around(rng, &anchor));
    let domain = Polyhedron::new(s, rows).expect("contains the anchor");
    let count = rng.random_range(0..=opts.max_pieces);
    let pieces = (0..count)
        .map(|_| AffinePiece::new(random_vec(rng, s, 3.0), rng.random_range(-1.0..1.0)))
        .collect();
    let social_c = PerceptionFunction::normalized(pieces, domain).expect("shifted to minimum zero");
    let social = Preference::new(social_utility(rng, &utilities, &weights), social_c);
    assemble(s, utilities, perceptions, social)
}

/// A planner with `c₀ >= αᵢ cᵢ` for every individual: its pieces include
/// every scaled individual piece and its domain lies inside every
/// positively weighted individual's domain.
pub fn liberal_profile(rng: &mut impl Rng, opts: &FamilyOptions) -> Profile {
    let (s, n) = (opts.states, opts.agents);
    let anchor = random_prior(rng, s);
    let utilities = independent_utilities(rng, n, n + 1);
    let perceptions: Vec<PerceptionFunction> = (0..n)
        .map(|_| random_perception(rng, s, opts.max_pieces, Some(&anchor)))
        .collect();
    let weights = random_weights(rng, n);
    let mut rows = Vec::new();
    let mut pieces = vec![AffinePiece::new(vec![0.0; s], 0.0)];
    for (w, c) in weights.iter().zip(&perceptions) {
        if *w <= 0.0 {
            continue;
        }
        rows.extend(c.domain().rows().iter().cloned());
        pieces.extend(
            c.pieces().iter().map(|p| {
                AffinePiece::new(p.gradient.iter().map(|g| w * g).collect(), w * p.offset)
            }),
        );
    }
    rows.extend(rows_around(rng, &anchor));
    if rng.random_bool(0.5) {
        let extra = random_perception(rng, s, 2, Some(&anchor));
        pieces.extend(extra.pieces().iter().cloned());
    }
    let domain = Polyhedron::new(s, rows).expect("contains the anchor");
    let social_c = PerceptionFunction::new(pieces, domain).expect("zero at the anchor");
    let social = Preference::new(social_utility(rng, &utilities, &weights), social_c);
    assemble(s, utilities, perceptions, social)
}

//! The simplex lattice `{p : r·p ∈ ℕ^S, Σ p = 1}` and grid minimisation.

use serde::Serialize;

use crate::domain::{Act, AffineUtility, PerceptionFunction, Prior};

use super::OracleError;

/// Lattices above this many points are refused.
pub const MAX_GRID_POINTS: usize = 5_000_000;

/// `C(r + S - 1, S - 1)`, or `None` on overflow.
pub fn lattice_size(states: usize, resolution: usize) -> Option<usize> {
    let k = states.checked_sub(1)?;
    let mut count: u128 = 1;
    for i in 1..=k as u128 {
        count = count * (resolution as u128 + i) / i;
        if count > usize::MAX as u128 {
            return None;
        }
    }
    Some(count as usize)
}

/// All priors with denominator `resolution`, flattened state-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorGrid {
    states: usize,
    resolution: usize,
    weights: Vec<f64>,
}

impl PriorGrid {
    pub fn new(states: usize, resolution: usize) -> Result<Self, OracleError> {
        if states == 0 || resolution == 0 {
            return Err(OracleError::GridTooLarge { states, resolution });
        }
        let count = lattice_size(states, resolution)
            .filter(|c| *c <= MAX_GRID_POINTS)
            .ok_or(OracleError::GridTooLarge { states, resolution })?;
        let mut weights = Vec::with_capacity(count * states);
        let mut counts = vec![0usize; states];
        fill(&mut counts, 0, resolution, resolution, &mut weights);
        debug_assert_eq!(weights.len(), count * states);
        Ok(Self {
            states,
            resolution,
            weights,
        })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.weights.len() / self.states
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.weights[k * self.states..(k + 1) * self.states]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks_exact(self.states)
    }

    pub fn prior(&self, k: usize) -> Prior {
        Prior::new(self.point(k).to_vec()).expect("lattice points are priors")
    }

    /// `c` at every lattice point (`+∞` off the domain).
    pub fn costs(&self, c: &PerceptionFunction) -> Vec<f64> {
        self.points().map(|p| c.evaluate_weights(p)).collect()
    }

    /// `min_k p_k·diff + cost_k` and its index; `None` when every cost is infinite.
    pub fn minimise(&self, diff: &[f64], costs: &[f64]) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for (k, (p, cost)) in self.points().zip(costs).enumerate() {
            if cost.is_infinite() {
                continue;
            }
            let value = p.iter().zip(diff).map(|(a, b)| a * b).sum::<f64>() + cost;
            if best.is_none_or(|(b, _)| value < b) {
                best = Some((value, k));
            }
        }
        best
    }
}

fn fill(counts: &mut [usize], pos: usize, left: usize, resolution: usize, out: &mut Vec<f64>) {
    if pos + 1 == counts.len() {
        counts[pos] = left;
        out.extend(counts.iter().map(|c| *c as f64 / resolution as f64));
        return;
    }
    for c in (0..=left).rev() {
        counts[pos] = c;
        fill(counts, pos + 1, left - c, resolution, out);
    }
}

/// The lattice as a list of priors.
pub fn grid_priors(states: usize, resolution: usize) -> Result<Vec<Prior>, OracleError> {
    let grid = PriorGrid::new(states, resolution)?;
    Ok((0..grid.len()).map(|k| grid.prior(k)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridMargin {
    /// `+∞` when no lattice point lies in the domain.
    pub value: f64,
    pub argmin: Option<Prior>,
    /// Set when no lattice point lies in `dom c`; refine the resolution.
    pub empty_domain_on_grid: bool,
}

/// Grid approximation of the dominance margin of `f` over `g`.
pub fn grid_dominance(
    u: &AffineUtility,
    c: &PerceptionFunction,
    f: &Act,
    g: &Act,
    resolution: usize,
) -> Result<GridMargin, OracleError> {
    let grid = PriorGrid::new(c.states(), resolution)?;
    let diff: Vec<f64> = f
        .utilities(u)
        .iter()
        .zip(g.utilities(u))
        .map(|(a, b)| a - b)
        .collect();
    if diff.len() != grid.states() {
        return Err(OracleError::Dimension(format!(
            "acts over {} states, perception over {}",
            diff.len(),
            grid.states()
        )));
    }
    let costs = grid.costs(c);
    Ok(match grid.minimise(&diff, &costs) {
        Some((value, k)) => GridMargin {
            value,
            argmin: Some(grid.prior(k)),
            empty_domain_on_grid: false,
        },
        None => GridMargin {
            value: f64::INFINITY,
            argmin: None,
            empty_domain_on_grid: true,
        },
    })
}

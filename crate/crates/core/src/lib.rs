//! Variational Bewley preferences over a finite state space.
//!
//! A variational Bewley preference ranks acts `f ≿ g` when, for every prior
//! `p`, the expected utility of `f` plus an ambiguity-perception cost `c(p)`
//! is at least the expected utility of `g`. This crate decides such
//! comparisons exactly with linear programming, audits whether a social
//! preference can respect Pareto unanimity over a profile of individual
//! preferences, and when it cannot, builds and re-verifies a concrete pair of
//! acts that every individual weakly accepts but society rejects.
//!
//! Modules, bottom up:
//!
//! * [`lp`]: dense two-phase simplex with checked optimality, Farkas and ray certificates.
//! * [`domain`]: priors, prior polyhedra, perception functions, utilities, acts, profiles.
//! * [`document`]: the JSON profile and acts formats.
//! * [`preference`]: dominance margins and the derived relation.
//! * [`aggregation`]: utilitarian weights, the perception bound and the containment audits.
//! * [`witness`]: separating functionals and Pareto-violation witnesses.
//! * [`oracle`]: grid and sampling ground truth, independent of the LP path.
//! * [`fixtures`]: the shipped example profiles.
//! * [`audit`]: the end-to-end pipeline and its JSON report.

pub mod aggregation;
pub mod audit;
pub mod document;
pub mod domain;
pub mod fixtures;
pub mod lp;
pub mod oracle;
pub mod preference;
pub mod witness;

use serde::Serialize;

/// Feasibility tolerance for priors, domains and minimum-zero validation.
pub const EPS_FEAS: f64 = 1e-9;
/// Decision threshold between "holds" and "fails" for margins and gaps.
pub const EPS_DEC: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub feasibility: f64,
    pub decision: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feasibility: EPS_FEAS,
            decision: EPS_DEC,
        }
    }
}

impl Tolerances {
    /// A strict violation must clear ten decision thresholds.
    pub fn strict(&self) -> f64 {
        10.0 * self.decision
    }
}

pub use document::{validate_profile, ActsDocument, ProfileDocument};
pub use domain::{
    Act, AffinePiece, AffineUtility, DomainError, HalfSpace, MemberId, PerceptionFunction,
    Polyhedron, Preference, Prior, Profile, ValidationError, SOCIAL,
};

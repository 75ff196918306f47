//! The profiles shipped in the repository's `fixtures/` directory, embedded
//! at compile time.

use crate::document::{validate_profile, ProfileDocument};
use crate::domain::Profile;

/// Two individuals with `c = 2p₁` and a planner with `c₀ = p₁`; bundles the acts `f`, `g`.
pub const EXAMPLE1: &str = include_str!("../../../fixtures/example1.json");
/// Same individuals with opposite-state costs and a planner with `c₀ ≡ 0`.
pub const FLATZERO: &str = include_str!("../../../fixtures/flatzero.json");
/// A planner copying individual 1.
pub const DICTATOR: &str = include_str!("../../../fixtures/dictator.json");
/// Bewley individuals with disjoint prior sets.
pub const BEWLEY_DISJOINT: &str = include_str!("../../../fixtures/bewley_disjoint.json");
/// The acts `f` and `g` of the two-state example.
pub const EXAMPLE1_ACTS: &str = include_str!("../../../fixtures/example1_acts.json");

/// `(file name, contents)` for every shipped profile.
pub const PROFILES: [(&str, &str); 4] = [
    ("example1.json", EXAMPLE1),
    ("flatzero.json", FLATZERO),
    ("dictator.json", DICTATOR),
    ("bewley_disjoint.json", BEWLEY_DISJOINT),
];

/// Parses and validates an embedded profile.
///
/// # Panics
///
/// If the embedded document is invalid, which the test suite rules out.
pub fn profile(text: &str) -> Profile {
    let doc = ProfileDocument::from_json(text).expect("embedded fixture parses");
    validate_profile(&doc).expect("embedded fixture validates")
}

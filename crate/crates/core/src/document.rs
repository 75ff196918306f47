//! JSON documents for profiles and acts, and validation into domain types.

use serde::{Deserialize, Serialize};

use crate::domain::{
    Act, AffinePiece, AffineUtility, DomainError, HalfSpace, MemberId, PerceptionFunction,
    Polyhedron, Preference, Profile, ValidationError,
};

pub const FORMAT_VERSION: u32 = 1;

fn format_version() -> u32 {
    FORMAT_VERSION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityDoc {
    pub gradient: Vec<f64>,
    #[serde(default)]
    pub intercept: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceDoc {
    pub g: Vec<f64>,
    #[serde(default)]
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowDoc {
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionDoc {
    #[serde(default)]
    pub pieces: Vec<PieceDoc>,
    #[serde(default)]
    pub domain: Vec<RowDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub utility: UtilityDoc,
    #[serde(default)]
    pub perception: PerceptionDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedAct {
    pub name: String,
    pub outcomes: Vec<Vec<f64>>,
}

impl NamedAct {
    pub fn to_act(&self) -> Result<Act, DomainError> {
        Act::new(self.outcomes.clone())
    }
}

/// A profile file. `acts` optionally bundles named acts (e.g. a known
/// counterexample pair) that audits add to their samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDocument {
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub states: Vec<String>,
    pub outcome_dim: usize,
    pub agents: Vec<PreferenceDoc>,
    pub social: PreferenceDoc,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub acts: Vec<NamedAct>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActsDocument {
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub acts: Vec<NamedAct>,
}

#[derive(Debug, thiserror::Error)]
pub enum DocumentError {
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported format_version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
}

impl ProfileDocument {
    pub fn from_json(text: &str) -> Result<Self, DocumentError> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.format_version != FORMAT_VERSION {
            return Err(DocumentError::Version(doc.format_version));
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile documents always serialize")
    }

    pub fn from_profile(profile: &Profile) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            states: profile.states().to_vec(),
            outcome_dim: profile.outcome_dim(),
            agents: profile.agents().iter().map(preference_doc).collect(),
            social: preference_doc(profile.social()),
            acts: Vec::new(),
        }
    }
}

impl ActsDocument {
    pub fn from_json(text: &str) -> Result<Self, DocumentError> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.format_version != FORMAT_VERSION {
            return Err(DocumentError::Version(doc.format_version));
        }
        Ok(doc)
    }
}

fn preference_doc(pref: &Preference) -> PreferenceDoc {
    let c = &pref.perception;
    PreferenceDoc {
        name: None,
        utility: UtilityDoc {
            gradient: pref.utility.gradient().to_vec(),
            intercept: pref.utility.intercept(),
        },
        perception: PerceptionDoc {
            pieces: c
                .pieces()
                .iter()
                .map(|p| PieceDoc {
                    g: p.gradient.clone(),
                    h: p.offset,
                })
                .collect(),
            domain: c
                .domain()
                .rows()
                .iter()
                .map(|r| RowDoc {
                    a: r.normal.clone(),
                    b: r.bound,
                })
                .collect(),
        },
    }
}

fn build_preference(
    doc: &PreferenceDoc,
    states: usize,
    member: MemberId,
    errors: &mut Vec<ValidationError>,
) -> Option<Preference> {
    let mut fail = |error| {
        errors.push(ValidationError {
            member: Some(member),
            error,
        })
    };
    let utility = AffineUtility::new(doc.utility.gradient.clone(), doc.utility.intercept)
        .map_err(&mut fail)
        .ok();
    let rows = doc
        .perception
        .domain
        .iter()
        .map(|r| HalfSpace::new(r.a.clone(), r.b))
        .collect();
    let perception = Polyhedron::new(states, rows)
        .map_err(&mut fail)
        .ok()
        .and_then(|domain| {
            let pieces = doc
                .perception
                .pieces
                .iter()
                .map(|p| AffinePiece::new(p.g.clone(), p.h))
                .collect();
            PerceptionFunction::new(pieces, domain)
                .map_err(&mut fail)
                .ok()
        });
    Some(Preference::new(utility?, perception?))
}

/// Builds a [`Profile`], reporting every violated invariant rather than the first.
pub fn validate_profile(doc: &ProfileDocument) -> Result<Profile, Vec<ValidationError>> {
    let states = doc.states.len();
    let mut errors = Vec::new();
    if states == 0 {
        errors.push(ValidationError {
            member: None,
            error: DomainError::DimensionMismatch("profile has no states".into()),
        });
        return Err(errors);
    }
    let social = build_preference(&doc.social, states, 0, &mut errors);
    let agents: Vec<Option<Preference>> = doc
        .agents
        .iter()
        .enumerate()
        .map(|(i, a)| build_preference(a, states, i + 1, &mut errors))
        .collect();
    for (k, pref) in std::iter::once(&social).chain(agents.iter()).enumerate() {
        if let Some(pref) = pref {
            if pref.utility.dim() != doc.outcome_dim {
                errors.push(ValidationError {
                    member: Some(k),
                    error: DomainError::DimensionMismatch(format!(
                        "utility has dimension {}, outcome_dim is {}",
                        pref.utility.dim(),
                        doc.outcome_dim
                    )),
                });
            }
        }
    }
    if doc.agents.len() < 2 {
        errors.push(ValidationError {
            member: None,
            error: DomainError::TooFewAgents(doc.agents.len()),
        });
    }
    for act in &doc.acts {
        let bad =
            act.outcomes.len() != states || act.outcomes.iter().any(|x| x.len() != doc.outcome_dim);
        if bad {
            errors.push(ValidationError {
                member: None,
                error: DomainError::DimensionMismatch(format!(
                    "bundled act '{}' does not match the profile dimensions",
                    act.name
                )),
            });
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    let social = social.expect("no errors implies social preference built");
    let agents = agents.into_iter().map(|a| a.expect("built")).collect();
    Profile::new(doc.states.clone(), doc.outcome_dim, agents, social)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "states": ["s0", "s1"],
        "outcome_dim": 2,
        "agents": [
            {"utility": {"gradient": [1, 0]}},
            {"utility": {"gradient": [0, 1]}}
        ],
        "social": {"utility": {"gradient": [1, 1]}}
    }"#;

    #[test]
    fn defaults_fill_missing_fields() {
        let doc = ProfileDocument::from_json(MINIMAL).unwrap();
        assert_eq!(doc.format_version, 1);
        let profile = validate_profile(&doc).unwrap();
        assert!(profile.social().perception.is_bewley());
        assert!(profile.social().perception.domain().is_full_simplex());
    }

    #[test]
    fn every_violation_is_reported() {
        let mut doc = ProfileDocument::from_json(MINIMAL).unwrap();
        doc.social.utility.gradient = vec![0.0, 0.0];
        doc.agents[0].perception.pieces = vec![
            PieceDoc {
                g: vec![0.0, 2.0],
                h: 0.0,
            },
            PieceDoc {
                g: vec![0.0, -2.0],
                h: 2.0,
            },
        ];
        let errors = validate_profile(&doc).unwrap_err();
        let messages: Vec<String> = errors.iter().map(|e| e.to_string()).collect();
        assert_eq!(messages.len(), 2, "{messages:?}");
        assert_eq!(messages[0], "gradient ≠ 0 violated for agent 0");
        assert_eq!(messages[1], "min c = 0 violated (agent 1, LP minimum 1.0)");
    }

    #[test]
    fn single_agent_is_rejected() {
        let mut doc = ProfileDocument::from_json(MINIMAL).unwrap();
        doc.agents.pop();
        let errors = validate_profile(&doc).unwrap_err();
        assert!(matches!(errors[0].error, DomainError::TooFewAgents(1)));
    }

    #[test]
    fn wrong_version_and_unknown_fields_are_rejected() {
        let versioned = MINIMAL.replacen('{', r#"{"format_version": 2,"#, 1);
        assert!(matches!(
            ProfileDocument::from_json(&versioned),
            Err(DocumentError::Version(2))
        ));
        let extra = MINIMAL.replacen('{', r#"{"colour": 2,"#, 1);
        assert!(matches!(
            ProfileDocument::from_json(&extra),
            Err(DocumentError::Parse(_))
        ));
    }

    #[test]
    fn dimension_mismatch_is_attributed() {
        let mut doc = ProfileDocument::from_json(MINIMAL).unwrap();
        doc.agents[1].utility.gradient = vec![0.0, 1.0, 2.0];
        let errors = validate_profile(&doc).unwrap_err();
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].member, Some(2));
    }
}

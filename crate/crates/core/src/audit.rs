//! The end-to-end audit of a profile and its JSON report.
//!
//! Steps: utilitarian decomposition, preference diversity, the perception
//! bound sweep, the containment checks that apply to the profile's subclass,
//! a verified witness for every bound violation, and a seeded oracle audit
//! over sampled (plus bundled) act pairs. The report is a pure function of
//! the profile, bundled acts and options, so reruns are byte-identical.

use serde::Serialize;

use crate::aggregation::{
    check_bewley_agents, check_bewley_social, check_perception_bound, check_zero_set_containment,
    decompose_utility, diversity_check, AuditError, BoundReport, ContainmentAudit, DiversityReport,
    NoDecomposition, UtilitarianDecomposition, ZeroSetReport,
};
use crate::document::{NamedAct, FORMAT_VERSION};
use crate::domain::{tidy, Act, DomainError, Prior, Profile};
use crate::oracle::{
    constant_act_search, sampled_pareto_audit, AuditSettings, ConstantViolation, InjectedPair,
    OracleError, OracleViolation, PairSource, SampledAudit,
};
use crate::preference::{relation_with_tolerance, PreferenceError, RelationReport};
use crate::witness::{forge, ParetoWitness, SeparationCertificate, WitnessError};
use crate::Tolerances;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditOptions {
    pub seed: u64,
    /// Oracle lattice resolution; `None` picks one from the state count.
    pub grid: Option<usize>,
    pub samples: usize,
    pub tolerances: Tolerances,
}

impl Default for AuditOptions {
    fn default() -> Self {
        let s = AuditSettings::default();
        Self {
            seed: s.seed,
            grid: s.resolution,
            samples: s.samples,
            tolerances: s.tolerances,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Preference(#[from] PreferenceError),
    #[error("bundled act '{name}': {error}")]
    BundledAct { name: String, error: DomainError },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Clean,
    /// A necessary condition for Standard Pareto fails; a witness is attached when one exists.
    ConditionViolation,
    /// The condition holds but the oracle found a Pareto violation anyway.
    ConverseFailure,
    /// A certificate or witness failed its own re-verification.
    VerificationFailure,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Clean => 0,
            Outcome::ConditionViolation => 3,
            Outcome::ConverseFailure => 4,
            Outcome::VerificationFailure => 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileShape {
    pub states: Vec<String>,
    pub agents: usize,
    pub outcome_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Settings {
    pub seed: u64,
    pub grid_resolution: usize,
    pub samples: usize,
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DecompositionSection {
    Found(UtilitarianDecomposition),
    None {
        #[serde(flatten)]
        reason: NoDecomposition,
        /// Constant acts every individual weakly accepts and society rejects.
        constant_act_witness: Option<ConstantViolation>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubclassChecks {
    pub zero_set: ZeroSetReport,
    /// Present when the planner is a Bewley preference.
    pub bewley_social: Option<ContainmentAudit>,
    /// Present when every individual is a Bewley preference.
    pub bewley_agents: Option<ContainmentAudit>,
    /// Deference on private acts; equivalent to the perception bound.
    pub liberalism: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessSection {
    /// Index into `condition.violations`.
    pub violation: usize,
    pub separation: SeparationCertificate,
    pub witness: ParetoWitness,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessFailure {
    pub violation: usize,
    pub error: String,
    /// False when the failure is expected (e.g. diversity fails), true when a certificate broke.
    pub internal: bool,
}

/// Relations between two bundled acts for every member, planner first.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BundledComparison {
    pub f: String,
    pub g: String,
    pub members: Vec<RelationReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub format_version: u32,
    pub profile: ProfileShape,
    pub settings: Settings,
    pub decomposition: DecompositionSection,
    pub diversity: DiversityReport,
    /// The perception bound; absent without a decomposition.
    pub condition: Option<BoundReport>,
    pub subclass: Option<SubclassChecks>,
    pub witnesses: Vec<WitnessSection>,
    pub witness_failures: Vec<WitnessFailure>,
    pub bundled: Vec<BundledComparison>,
    pub oracle: SampledAudit,
    /// The bound holds, yet the oracle found a verified Pareto violation.
    pub converse_failure: bool,
    pub outcome: Outcome,
    pub summary: String,
}

impl AuditReport {
    pub fn exit_code(&self) -> i32 {
        self.outcome.exit_code()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

/// Every ordered pair of distinct bundled acts.
pub fn injected_pairs(acts: &[NamedAct]) -> Result<Vec<InjectedPair>, PipelineError> {
    let parsed = parse_acts(acts)?;
    let mut pairs = Vec::new();
    for (a, (fname, f)) in parsed.iter().enumerate() {
        for (b, (gname, g)) in parsed.iter().enumerate() {
            if a != b {
                pairs.push(InjectedPair {
                    label: format!("{fname} vs {gname}"),
                    f: f.clone(),
                    g: g.clone(),
                });
            }
        }
    }
    Ok(pairs)
}

fn parse_acts(acts: &[NamedAct]) -> Result<Vec<(String, Act)>, PipelineError> {
    acts.iter()
        .map(|a| {
            a.to_act()
                .map(|act| (a.name.clone(), act))
                .map_err(|error| PipelineError::BundledAct {
                    name: a.name.clone(),
                    error,
                })
        })
        .collect()
}

fn compare_bundled(
    profile: &Profile,
    acts: &[NamedAct],
    tol: &Tolerances,
) -> Result<Vec<BundledComparison>, PipelineError> {
    let parsed = parse_acts(acts)?;
    let mut out = Vec::new();
    for (a, (fname, f)) in parsed.iter().enumerate() {
        for (gname, g) in parsed.iter().skip(a + 1) {
            let members = std::iter::once(profile.social())
                .chain(profile.agents())
                .map(|m| relation_with_tolerance(&m.utility, &m.perception, f, g, tol.decision))
                .collect::<Result<_, _>>()?;
            out.push(BundledComparison {
                f: fname.clone(),
                g: gname.clone(),
                members,
            });
        }
    }
    Ok(out)
}

/// Runs the full pipeline. `acts` are the profile's bundled acts, audited
/// as extra pairs and compared member by member.
pub fn run_audit(
    profile: &Profile,
    acts: &[NamedAct],
    options: &AuditOptions,
) -> Result<AuditReport, PipelineError> {
    let tol = options.tolerances;
    let settings = AuditSettings {
        samples: options.samples,
        seed: options.seed,
        resolution: options.grid,
        tolerances: tol,
    };
    for (name, act) in parse_acts(acts)? {
        profile
            .check_act(&act)
            .map_err(|error| PipelineError::BundledAct { name, error })?;
    }

    let diversity = diversity_check(profile);
    let mut condition = None;
    let mut subclass = None;
    let mut witnesses = Vec::new();
    let mut witness_failures = Vec::new();
    let decomposition = match decompose_utility(profile) {
        Ok(decomp) => {
            let bound = check_perception_bound(profile, &decomp, &tol)?;
            let social_bewley = profile.social().perception.is_bewley();
            let agents_bewley = profile.agents().iter().all(|a| a.perception.is_bewley());
            subclass = Some(SubclassChecks {
                zero_set: check_zero_set_containment(profile, &decomp, &tol)?,
                bewley_social: social_bewley
                    .then(|| check_bewley_social(profile, &decomp, &tol))
                    .transpose()?,
                bewley_agents: agents_bewley
                    .then(|| check_bewley_agents(profile, &decomp, &tol))
                    .transpose()?,
                liberalism: bound.satisfied(),
            });
            for (k, violation) in bound.violations.iter().enumerate() {
                match forge(profile, &decomp, violation, &tol) {
                    Ok((separation, witness)) => witnesses.push(WitnessSection {
                        violation: k,
                        separation,
                        witness,
                    }),
                    Err(e) => witness_failures.push(WitnessFailure {
                        violation: k,
                        internal: !matches!(
                            e,
                            WitnessError::DiversityFails { .. }
                                | WitnessError::TooFewDimensions { .. }
                        ),
                        error: e.to_string(),
                    }),
                }
            }
            condition = Some(bound);
            DecompositionSection::Found(decomp)
        }
        Err(reason) => DecompositionSection::None {
            reason,
            constant_act_witness: constant_act_search(
                profile,
                options.samples,
                options.seed,
                &tol,
            )?,
        },
    };

    let bundled = compare_bundled(profile, acts, &tol)?;
    let oracle = sampled_pareto_audit(profile, &injected_pairs(acts)?, &settings)?;

    let condition_holds = condition.as_ref().is_some_and(BoundReport::satisfied);
    let converse_failure = condition_holds && !oracle.clean();
    let outcome = if witness_failures.iter().any(|w| w.internal) {
        Outcome::VerificationFailure
    } else if !condition_holds {
        Outcome::ConditionViolation
    } else if converse_failure {
        Outcome::ConverseFailure
    } else {
        Outcome::Clean
    };

    let mut report = AuditReport {
        format_version: FORMAT_VERSION,
        profile: ProfileShape {
            states: profile.states().to_vec(),
            agents: profile.agent_count(),
            outcome_dim: profile.outcome_dim(),
        },
        settings: Settings {
            seed: options.seed,
            grid_resolution: oracle.resolution,
            samples: options.samples,
            tolerances: tol,
        },
        decomposition,
        diversity,
        condition,
        subclass,
        witnesses,
        witness_failures,
        bundled,
        oracle,
        converse_failure,
        outcome,
        summary: String::new(),
    };
    report.summary = summarize(&report);
    Ok(report)
}

/// Numbers rounded to nine decimals and printed without trailing zeros.
pub(crate) fn num(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "∞".into() } else { "-∞".into() };
    }
    format!("{}", tidy(x))
}

fn vector(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| num(*x)).collect();
    format!("({})", parts.join(", "))
}

/// `(0, 1)`.
fn prior_text(p: &Prior) -> String {
    vector(p.weights())
}

fn vertex_of(p: &Prior) -> Option<usize> {
    let w = p.weights();
    w.iter().position(|x| (x - 1.0).abs() < 1e-9)
}

fn restate(v: &OracleViolation, states: &[String]) -> String {
    let (lhs, rhs) = (num(v.social_lhs), num(v.social_rhs));
    match vertex_of(&v.social.argmin) {
        Some(k) => {
            let s = &states[k];
            format!("u₀(f({s})) + c₀(p({s}) = 1) = {lhs} < {rhs} = u₀(g({s}))")
        }
        None => format!(
            "Σ p(s)·u₀(f(s)) + c₀(p) = {lhs} < {rhs} = Σ p(s)·u₀(g(s)) at p = {}",
            prior_text(&v.social.argmin)
        ),
    }
}

fn summarize(r: &AuditReport) -> String {
    let mut lines = Vec::new();
    lines.push(format!(
        "profile: {} states, {} individuals, outcome dimension {}",
        r.profile.states.len(),
        r.profile.agents,
        r.profile.outcome_dim
    ));
    match &r.decomposition {
        DecompositionSection::Found(d) => lines.push(format!(
            "utilitarian weights: α = {}, β = {}, residual {:.1e}{}",
            vector(&d.weights),
            num(d.shift),
            d.residual,
            if d.unique { "" } else { " (not unique)" }
        )),
        DecompositionSection::None {
            reason,
            constant_act_witness,
        } => {
            lines.push(format!("no utilitarian decomposition: {reason}"));
            match constant_act_witness {
                Some(w) => lines.push(format!(
                    "  constant acts: every individual weakly prefers x to y, society loses {} (x = {}, y = {})",
                    num(-w.social_gain),
                    vector(&w.x),
                    vector(&w.y)
                )),
                None => lines.push("  no constant-act violation found in the sample".into()),
            }
        }
    }
    lines.push(format!(
        "preference diversity: gradient rank {} of {}{}",
        r.diversity.rank,
        r.diversity.agents,
        if r.diversity.independent {
            ""
        } else {
            " (fails)"
        }
    ));
    if let Some(bound) = &r.condition {
        let max = bound
            .sweep
            .iter()
            .filter_map(|e| e.optimum)
            .fold(f64::NEG_INFINITY, f64::max);
        if bound.satisfied() {
            lines.push(format!(
                "perception bound c₀ ≥ αᵢcᵢ: satisfied ({} sweep LPs, largest optimum {})",
                bound.sweep.len(),
                if bound.sweep.is_empty() {
                    "none".into()
                } else {
                    num(max)
                }
            ));
            lines.push("  no constructive witness available; converse may still fail".into());
        } else {
            lines.push(format!(
                "perception bound c₀ ≥ αᵢcᵢ: violated ({} violation(s))",
                bound.violations.len()
            ));
            for v in &bound.violations {
                lines.push(format!(
                    "  individual {} at p* = {}: gap {}",
                    v.agent + 1,
                    prior_text(&v.prior),
                    num(v.gap())
                ));
            }
        }
    }
    if let Some(sub) = &r.subclass {
        lines.push(format!(
            "zero-set containment: {}",
            if sub.zero_set.holds { "holds" } else { "fails" }
        ));
        if let Some(b) = &sub.bewley_social {
            lines.push(format!(
                "Bewley planner containment: {}",
                if b.holds { "holds" } else { "fails" }
            ));
        }
        if let Some(b) = &sub.bewley_agents {
            lines.push(format!(
                "Bewley individuals containment: {}",
                if b.holds { "holds" } else { "fails" }
            ));
        }
    }
    for w in &r.witnesses {
        let margins: Vec<f64> = w
            .witness
            .individual
            .iter()
            .map(|c| c.margin)
            .chain(std::iter::once(w.witness.social.margin))
            .collect();
        lines.push(format!(
            "witness for violation {}: individual {} on a private line, margins {} (individuals, then society)",
            w.violation,
            w.witness.agent + 1,
            vector(&margins)
        ));
    }
    for f in &r.witness_failures {
        lines.push(format!(
            "no witness for violation {}: {}",
            f.violation, f.error
        ));
    }
    for b in &r.bundled {
        let verdicts: Vec<String> = b
            .members
            .iter()
            .enumerate()
            .map(|(k, rel)| {
                format!(
                    "{}: {:?} (margins {} / {})",
                    if k == 0 {
                        "society".to_string()
                    } else {
                        format!("individual {k}")
                    },
                    rel.comparison,
                    num(rel.forward.margin),
                    num(rel.backward.margin)
                )
            })
            .collect();
        lines.push(format!("{} vs {}: {}", b.f, b.g, verdicts.join("; ")));
    }
    let o = &r.oracle;
    lines.push(format!(
        "sampled Pareto audit (seed {}, grid {}, {} pairs): {} unanimous, {} verified violation(s)",
        o.seed, o.resolution, o.pairs_checked, o.unanimous_pairs, o.violation_count
    ));
    if let Some(v) = o.violations.first() {
        let label = match &v.source {
            PairSource::Injected { label } => label.clone(),
            PairSource::Sampled { index } => format!("sampled pair {index}"),
            PairSource::Private { agent, index } => {
                format!("private pair {index} of individual {}", agent + 1)
            }
        };
        lines.push(format!(
            "  {label}: every individual weakly prefers f, society strictly prefers g: {}",
            restate(v, &r.profile.states)
        ));
    }
    if r.converse_failure {
        lines.push("converse failure: condition holds yet Pareto fails".into());
    }
    lines.push(format!(
        "outcome: {:?} (exit {})",
        r.outcome,
        r.outcome.exit_code()
    ));
    lines.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::ProfileDocument;
    use crate::fixtures;

    fn audit(text: &str) -> AuditReport {
        let doc = ProfileDocument::from_json(text).unwrap();
        let profile = crate::validate_profile(&doc).unwrap();
        let options = AuditOptions {
            samples: 500,
            ..AuditOptions::default()
        };
        run_audit(&profile, &doc.acts, &options).unwrap()
    }

    #[test]
    fn example_is_a_converse_failure() {
        let r = audit(fixtures::EXAMPLE1);
        assert_eq!(r.outcome, Outcome::ConverseFailure);
        assert!(r.converse_failure);
        assert!(
            r.summary
                .contains("u₀(f(s1)) + c₀(p(s1) = 1) = 3 < 4 = u₀(g(s1))"),
            "{}",
            r.summary
        );
        assert!(r
            .summary
            .contains("converse failure: condition holds yet Pareto fails"));
    }

    #[test]
    fn flat_planner_gets_a_witness() {
        let r = audit(fixtures::FLATZERO);
        assert_eq!(r.outcome, Outcome::ConditionViolation);
        assert_eq!(r.exit_code(), 3);
        assert_eq!(r.witnesses.len(), 2);
        assert!(r.witness_failures.is_empty());
    }

    #[test]
    fn dictator_is_clean() {
        let r = audit(fixtures::DICTATOR);
        assert_eq!(r.outcome, Outcome::Clean, "{}", r.summary);
        assert!(r.subclass.unwrap().zero_set.holds);
    }

    #[test]
    fn disjoint_bewley_individuals_fail_containment() {
        let r = audit(fixtures::BEWLEY_DISJOINT);
        assert_eq!(r.outcome, Outcome::ConditionViolation);
        assert!(!r.subclass.unwrap().bewley_agents.unwrap().holds);
    }

    #[test]
    fn reports_are_byte_identical() {
        assert_eq!(
            audit(fixtures::EXAMPLE1).to_json(),
            audit(fixtures::EXAMPLE1).to_json()
        );
    }
}

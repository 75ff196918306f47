//! Seeded act sampling for Pareto, Liberalism and transitivity searches.
//!
//! Acts are drawn in utility space (one value per state and individual) and
//! mapped to outcomes through the pseudo-inverse of the gradient matrix, so
//! with independent gradients every individual sees exactly the sampled
//! utilities. An optional jitter along the common null space moves only
//! utilities outside the individuals' span.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::domain::{Act, AffineUtility, PerceptionFunction, Prior, Profile};
use crate::lp::dot;
use crate::preference::{dominance_with_tolerance, DominanceCertificate};
use crate::witness::DiversityWitness;
use crate::Tolerances;

use super::grid::{lattice_size, PriorGrid};
use super::OracleError;

/// Half-width of the sampling box for state utilities.
pub const UTILITY_BOX: f64 = 8.0;
/// Violations kept in full per report; the rest are only counted.
const STORED_VIOLATIONS: usize = 8;

/// Stream `stream` of the generator seeded with `seed`.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn uniform_vec(rng: &mut impl Rng, len: usize, half_width: f64) -> Vec<f64> {
    (0..len)
        .map(|_| rng.random_range(-half_width..=half_width))
        .collect()
}

/// Maps individual utility values to outcomes.
#[derive(Clone, Debug)]
pub struct ActSampler {
    gradients: DMatrix<f64>,
    right_inverse: DMatrix<f64>,
    intercepts: Vec<f64>,
}

impl ActSampler {
    pub fn new(profile: &Profile) -> Self {
        let n = profile.agent_count();
        let m = profile.outcome_dim();
        let gradients = DMatrix::from_fn(n, m, |i, j| profile.agent(i).utility.gradient()[j]);
        let right_inverse = gradients
            .clone()
            .pseudo_inverse(1e-12)
            .expect("tolerance is nonnegative");
        let intercepts = profile
            .agents()
            .iter()
            .map(|a| a.utility.intercept())
            .collect();
        Self {
            gradients,
            right_inverse,
            intercepts,
        }
    }

    /// An outcome whose individual utilities are `values` (exactly, when the
    /// gradients are independent), shifted by the part of `jitter` that no
    /// individual can see.
    pub fn outcome(&self, values: &[f64], jitter: Option<&[f64]>) -> Vec<f64> {
        let target = DVector::from_iterator(
            values.len(),
            values.iter().zip(&self.intercepts).map(|(v, b)| v - b),
        );
        let mut x = &self.right_inverse * target;
        if let Some(z) = jitter {
            let z = DVector::from_column_slice(z);
            x += &z - &self.right_inverse * (&self.gradients * &z);
        }
        x.iter().copied().collect()
    }

    /// `utilities[s][i]` is individual `i`'s utility in state `s`.
    pub fn act(&self, utilities: &[Vec<f64>], jitter: Option<&[Vec<f64>]>) -> Act {
        let outcomes = utilities
            .iter()
            .enumerate()
            .map(|(s, values)| self.outcome(values, jitter.map(|j| j[s].as_slice())))
            .collect();
        Act::new(outcomes).expect("sampled outcomes are finite and rectangular")
    }
}

/// A utility difference `d` with `min_p p·d + c(p) >= 0` by construction:
/// a sub-convex combination of `-(g_k + h_k)` over the pieces, nonnegative
/// multiples of `-(a_r - b_r)` over the domain rows, and a nonnegative bump.
pub fn dominating_direction(c: &PerceptionFunction, rng: &mut impl Rng) -> Vec<f64> {
    let states = c.states();
    let mut d = vec![0.0; states];
    let pieces = c.pieces();
    if !pieces.is_empty() {
        let raw: Vec<f64> = pieces.iter().map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let budget = if rng.random_bool(0.3) {
            1.0
        } else {
            rng.random::<f64>()
        };
        for (piece, w) in pieces.iter().zip(&raw) {
            let gamma = if total > 0.0 { budget * w / total } else { 0.0 };
            for (ds, g) in d.iter_mut().zip(&piece.gradient) {
                *ds -= gamma * (g + piece.offset);
            }
        }
    }
    for row in c.domain().rows() {
        if rng.random_bool(0.5) {
            let scale = rng.random_range(0.0..2.0);
            for (ds, a) in d.iter_mut().zip(&row.normal) {
                *ds -= scale * (a - row.bound);
            }
        }
    }
    if rng.random_bool(0.5) {
        let s = rng.random_range(0..states);
        d[s] += rng.random::<f64>();
    }
    d
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditSettings {
    pub samples: usize,
    pub seed: u64,
    /// Lattice resolution; `None` picks the finest lattice of at most 5000 priors (capped at 100).
    pub resolution: Option<usize>,
    pub tolerances: Tolerances,
}

impl Default for AuditSettings {
    fn default() -> Self {
        Self {
            samples: 4096,
            seed: 7,
            resolution: None,
            tolerances: Tolerances::default(),
        }
    }
}

impl AuditSettings {
    pub fn resolution_for(&self, states: usize) -> usize {
        self.resolution
            .unwrap_or_else(|| finest_resolution(states, 100, 5000))
    }
}

fn finest_resolution(states: usize, cap: usize, budget: usize) -> usize {
    (1..=cap)
        .rev()
        .find(|&r| lattice_size(states, r).is_some_and(|n| n <= budget))
        .unwrap_or(1)
}

/// A pair of acts to audit in addition to the sampled ones.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InjectedPair {
    pub label: String,
    pub f: Act,
    pub g: Act,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairSource {
    Injected { label: String },
    Sampled { index: usize },
    Private { agent: usize, index: usize },
}

/// Every listed individual weakly prefers `f` to `g`; society does not.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleViolation {
    pub source: PairSource,
    pub f: Act,
    pub g: Act,
    pub social_grid_margin: f64,
    pub social_grid_prior: Prior,
    /// LP certificates `f ≿ᵢ g` for the individuals the audit ranges over.
    pub individual: Vec<DominanceCertificate>,
    /// LP certificate for `f ≿₀ g`, which fails.
    pub social: DominanceCertificate,
    /// `Σ p(s)·u₀(f(s)) + c₀(p)` at the social minimiser `p`.
    pub social_lhs: f64,
    /// `Σ p(s)·u₀(g(s))` at the same prior.
    pub social_rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampledAudit {
    pub seed: u64,
    pub samples: usize,
    pub resolution: usize,
    pub pairs_checked: usize,
    /// Pairs every relevant individual weakly accepts on the grid.
    pub unanimous_pairs: usize,
    /// Grid hits that failed LP re-verification and were dropped.
    pub rejected_by_lp: usize,
    pub violation_count: usize,
    /// The first few verified violations, injected pairs first.
    pub violations: Vec<OracleViolation>,
}

impl SampledAudit {
    pub fn clean(&self) -> bool {
        self.violation_count == 0
    }
}

struct GridTables {
    grid: PriorGrid,
    agent_costs: Vec<Vec<f64>>,
    social_costs: Vec<f64>,
}

impl GridTables {
    fn new(profile: &Profile, resolution: usize) -> Result<Self, OracleError> {
        let grid = PriorGrid::new(profile.state_count(), resolution)?;
        let agent_costs = profile
            .agents()
            .iter()
            .map(|a| grid.costs(&a.perception))
            .collect();
        let social_costs = grid.costs(&profile.social().perception);
        Ok(Self {
            grid,
            agent_costs,
            social_costs,
        })
    }
}

fn differences(u: &AffineUtility, f: &Act, g: &Act) -> Vec<f64> {
    f.utilities(u)
        .iter()
        .zip(g.utilities(u))
        .map(|(a, b)| a - b)
        .collect()
}

struct Auditor<'a> {
    profile: &'a Profile,
    tables: GridTables,
    tol: Tolerances,
    report: SampledAudit,
}

impl<'a> Auditor<'a> {
    fn new(profile: &'a Profile, settings: &AuditSettings) -> Result<Self, OracleError> {
        let resolution = settings.resolution_for(profile.state_count());
        Ok(Self {
            profile,
            tables: GridTables::new(profile, resolution)?,
            tol: settings.tolerances,
            report: SampledAudit {
                seed: settings.seed,
                samples: settings.samples,
                resolution,
                pairs_checked: 0,
                unanimous_pairs: 0,
                rejected_by_lp: 0,
                violation_count: 0,
                violations: Vec::new(),
            },
        })
    }

    /// Grid screen over `agents`, then LP re-verification of any social failure.
    fn check(
        &mut self,
        source: impl FnOnce() -> PairSource,
        f: &Act,
        g: &Act,
        agents: &[usize],
    ) -> Result<(), OracleError> {
        self.report.pairs_checked += 1;
        let t = &self.tables;
        for &i in agents {
            let diff = differences(&self.profile.agent(i).utility, f, g);
            if let Some((margin, _)) = t.grid.minimise(&diff, &t.agent_costs[i]) {
                if margin < -self.tol.decision {
                    return Ok(());
                }
            }
        }
        self.report.unanimous_pairs += 1;
        let social = self.profile.social();
        let diff = differences(&social.utility, f, g);
        let Some((grid_margin, k)) = t.grid.minimise(&diff, &t.social_costs) else {
            return Ok(());
        };
        if grid_margin >= -self.tol.strict() {
            return Ok(());
        }
        let social_grid_prior = t.grid.prior(k);

        let mut individual = Vec::with_capacity(agents.len());
        for &i in agents {
            let a = self.profile.agent(i);
            let cert =
                dominance_with_tolerance(&a.utility, &a.perception, f, g, self.tol.decision)?;
            if !cert.holds {
                self.report.rejected_by_lp += 1;
                return Ok(());
            }
            individual.push(cert);
        }
        let cert =
            dominance_with_tolerance(&social.utility, &social.perception, f, g, self.tol.decision)?;
        if cert.margin >= -self.tol.strict() {
            self.report.rejected_by_lp += 1;
            return Ok(());
        }
        self.report.violation_count += 1;
        if self.report.violations.len() < STORED_VIOLATIONS {
            let p = &cert.argmin;
            let social_lhs =
                p.expectation(&f.utilities(&social.utility)) + social.perception.evaluate(p);
            let social_rhs = p.expectation(&g.utilities(&social.utility));
            self.report.violations.push(OracleViolation {
                source: source(),
                f: f.clone(),
                g: g.clone(),
                social_grid_margin: grid_margin,
                social_grid_prior,
                individual,
                social: cert,
                social_lhs,
                social_rhs,
            });
        }
        Ok(())
    }
}

/// Utility vectors for a pair of acts; `f` weakly beats `g` for most
/// individuals by construction in seven of ten draws.
fn sample_utilities(profile: &Profile, rng: &mut impl Rng) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let states = profile.state_count();
    let n = profile.agent_count();
    let g: Vec<Vec<f64>> = (0..states)
        .map(|_| uniform_vec(rng, n, UTILITY_BOX))
        .collect();
    let f = if rng.random_bool(0.7) {
        let mut f = g.clone();
        for i in 0..n {
            if rng.random_bool(0.25) {
                continue;
            }
            let d = dominating_direction(&profile.agent(i).perception, rng);
            for (fs, ds) in f.iter_mut().zip(d) {
                fs[i] += ds;
            }
        }
        f
    } else {
        (0..states)
            .map(|_| uniform_vec(rng, n, UTILITY_BOX))
            .collect()
    };
    (f, g)
}

fn sample_jitter(profile: &Profile, rng: &mut impl Rng) -> Option<Vec<Vec<f64>>> {
    rng.random_bool(0.5).then(|| {
        (0..profile.state_count())
            .map(|_| uniform_vec(rng, profile.outcome_dim(), UTILITY_BOX))
            .collect()
    })
}

/// Searches for pairs every individual weakly accepts but society rejects.
///
/// Injected pairs are audited first, then `settings.samples` seeded draws.
/// A pair is a candidate when every individual's grid margin is at least
/// `-ε_dec` and the social grid margin is below `-10·ε_dec`; candidates are
/// kept only if the LP certificates agree.
pub fn sampled_pareto_audit(
    profile: &Profile,
    injected: &[InjectedPair],
    settings: &AuditSettings,
) -> Result<SampledAudit, OracleError> {
    let mut auditor = Auditor::new(profile, settings)?;
    let everyone: Vec<usize> = (0..profile.agent_count()).collect();
    for pair in injected {
        profile
            .check_act(&pair.f)
            .and_then(|_| profile.check_act(&pair.g))
            .map_err(|e| OracleError::Dimension(e.to_string()))?;
        let label = pair.label.clone();
        auditor.check(
            || PairSource::Injected { label },
            &pair.f,
            &pair.g,
            &everyone,
        )?;
    }
    let sampler = ActSampler::new(profile);
    let mut rng = rng(settings.seed, 0);
    for index in 0..settings.samples {
        let (fu, gu) = sample_utilities(profile, &mut rng);
        let fj = sample_jitter(profile, &mut rng);
        let gj = sample_jitter(profile, &mut rng);
        let f = sampler.act(&fu, fj.as_deref());
        let g = sampler.act(&gu, gj.as_deref());
        auditor.check(|| PairSource::Sampled { index }, &f, &g, &everyone)?;
    }
    Ok(auditor.report)
}

/// Liberalism audit: pairs of acts on one individual's private line, which
/// only that individual can tell apart. A violation is `f ≿ᵢ g` with
/// society strictly preferring `g`.
pub fn sampled_liberalism_audit(
    profile: &Profile,
    lines: &DiversityWitness,
    settings: &AuditSettings,
) -> Result<SampledAudit, OracleError> {
    let mut auditor = Auditor::new(profile, settings)?;
    let states = profile.state_count();
    let n = profile.agent_count();
    let mut rng = rng(settings.seed, 1);
    for index in 0..settings.samples {
        let agent = index % n;
        let g = uniform_vec(&mut rng, states, UTILITY_BOX);
        let f: Vec<f64> = if rng.random_bool(0.7) {
            let d = dominating_direction(&profile.agent(agent).perception, &mut rng);
            g.iter().zip(d).map(|(a, b)| a + b).collect()
        } else {
            uniform_vec(&mut rng, states, UTILITY_BOX)
        };
        let to_act = |values: &[f64]| {
            Act::new(
                values
                    .iter()
                    .map(|v| lines.outcome_with_utility(profile, agent, *v))
                    .collect(),
            )
            .expect("private-line outcomes are finite")
        };
        let (f, g) = (to_act(&f), to_act(&g));
        auditor.check(|| PairSource::Private { agent, index }, &f, &g, &[agent])?;
    }
    Ok(auditor.report)
}

/// Constant acts `x`, `y` that every individual weakly ranks `x ≿ y` while
/// society strictly prefers `y`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantViolation {
    pub seed: u64,
    pub sample: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `uᵢ(x) - uᵢ(y)` per individual.
    pub individual_gains: Vec<f64>,
    /// `u₀(x) - u₀(y)`.
    pub social_gain: f64,
    pub individual: Vec<DominanceCertificate>,
    pub social: DominanceCertificate,
}

/// Random search over constant acts; for constant acts every perception
/// function drops out and `x ≿ y` reduces to `u(x) >= u(y)`.
pub fn constant_act_search(
    profile: &Profile,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<Option<ConstantViolation>, OracleError> {
    let sampler = ActSampler::new(profile);
    let states = profile.state_count();
    let n = profile.agent_count();
    let social = profile.social();
    let mut rng = rng(seed, 2);
    for sample in 0..samples {
        let y_values = uniform_vec(&mut rng, n, UTILITY_BOX);
        let x_values: Vec<f64> = y_values
            .iter()
            .map(|v| {
                if rng.random_bool(0.5) {
                    *v
                } else {
                    v + rng.random_range(0.0..UTILITY_BOX)
                }
            })
            .collect();
        let jitter = rng
            .random_bool(0.5)
            .then(|| uniform_vec(&mut rng, profile.outcome_dim(), UTILITY_BOX));
        let x = sampler.outcome(&x_values, jitter.as_deref());
        let y = sampler.outcome(&y_values, None);
        let individual_gains: Vec<f64> = profile
            .agents()
            .iter()
            .map(|a| a.utility.value(&x) - a.utility.value(&y))
            .collect();
        let social_gain = social.utility.value(&x) - social.utility.value(&y);
        if individual_gains.iter().any(|g| *g < -tol.decision) || social_gain >= -tol.strict() {
            continue;
        }
        let (fx, fy) = (
            Act::constant(x.clone(), states),
            Act::constant(y.clone(), states),
        );
        let mut individual = Vec::with_capacity(n);
        for a in profile.agents() {
            individual.push(dominance_with_tolerance(
                &a.utility,
                &a.perception,
                &fx,
                &fy,
                tol.decision,
            )?);
        }
        let social_cert =
            dominance_with_tolerance(&social.utility, &social.perception, &fx, &fy, tol.decision)?;
        if individual.iter().all(|c| c.holds) && social_cert.margin < -tol.strict() {
            return Ok(Some(ConstantViolation {
                seed,
                sample,
                x,
                y,
                individual_gains,
                social_gain,
                individual,
                social: social_cert,
            }));
        }
    }
    Ok(None)
}

/// `f ≿ g`, `g ≿ h` and `f ⋡ h`, with LP certificates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntransitiveTriple {
    pub seed: u64,
    pub sample: usize,
    /// State utilities of `f`, `g`, `h`.
    pub utilities: [Vec<f64>; 3],
    pub acts: [Act; 3],
    pub fg: DominanceCertificate,
    pub gh: DominanceCertificate,
    pub fh: DominanceCertificate,
}

/// Samples utility triples in `[-4, 4]^S` and returns the first verified
/// failure of transitivity. `None` only means none was found.
pub fn find_intransitivity(
    u: &AffineUtility,
    c: &PerceptionFunction,
    samples: usize,
    seed: u64,
) -> Result<Option<IntransitiveTriple>, OracleError> {
    const HALF_WIDTH: f64 = 4.0;
    let tol = Tolerances::default();
    let states = c.states();
    let grid = PriorGrid::new(states, finest_resolution(states, 200, 20_000))?;
    let costs = grid.costs(c);
    let norm2 = dot(u.gradient(), u.gradient());
    let to_act = |values: &[f64]| {
        Act::new(
            values
                .iter()
                .map(|v| {
                    let t = (v - u.intercept()) / norm2;
                    u.gradient().iter().map(|g| g * t).collect()
                })
                .collect(),
        )
        .expect("finite outcomes")
    };
    let margin = |a: &[f64], b: &[f64]| {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        grid.minimise(&diff, &costs).map_or(f64::INFINITY, |m| m.0)
    };
    let mut rng = rng(seed, 3);
    for sample in 0..samples {
        let [f, g, h]: [Vec<f64>; 3] =
            std::array::from_fn(|_| uniform_vec(&mut rng, states, HALF_WIDTH));
        if f == g || g == h || f == h {
            continue;
        }
        if margin(&f, &g) < -tol.decision
            || margin(&g, &h) < -tol.decision
            || margin(&f, &h) >= -tol.strict()
        {
            continue;
        }
        let acts = [to_act(&f), to_act(&g), to_act(&h)];
        let fg = dominance_with_tolerance(u, c, &acts[0], &acts[1], tol.decision)?;
        let gh = dominance_with_tolerance(u, c, &acts[1], &acts[2], tol.decision)?;
        let fh = dominance_with_tolerance(u, c, &acts[0], &acts[2], tol.decision)?;
        if fg.holds && gh.holds && fh.margin < -tol.strict() {
            return Ok(Some(IntransitiveTriple {
                seed,
                sample,
                utilities: [f, g, h],
                acts,
                fg,
                gh,
                fh,
            }));
        }
    }
    Ok(None)
}

//! Exact single-step outcome distributions on small states.
//!
//! Everything here is computed in exact rational arithmetic: the parameters
//! are taken as the exact rationals represented by their `f64` values, so the
//! participation identity
//!
//! ```text
//! P(vertex of weight w takes part in step n) = alpha w / n + beta p / V
//! ```
//!
//! holds with zero error, not merely within floating-point tolerance.
//! Enumeration is limited to small states (`V <= 12`, `n <= 64`);
//! the state space of outcomes is quadratic-to-cubic in `V`.

use std::io;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::engine::{apply_interaction, InteractionChoice};
use crate::graph::{GraphState, VertexId};
use crate::theory::Params;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("state too large for exact enumeration: V = {v} (max 12), n = {n} (max 64)")]
    StateTooLarge { v: usize, n: u64 },
    #[error("unknown vertex label {0}")]
    UnknownVertex(VertexId),
}

const MAX_VERTICES: usize = 12;
const MAX_STEPS: u64 = 64;

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("parameters are finite")
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `(alpha, beta)` as exact rationals derived from the exact rational values
/// of the `f64` parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalCoefficients {
    pub alpha: BigRational,
    pub beta: BigRational,
}

pub fn rational_coefficients(params: &Params) -> RationalCoefficients {
    let p = rational(params.p());
    let r = rational(params.r());
    let q = rational(params.q());
    let one = BigRational::one();
    let alpha = ratio(2, 3) * &p * &r + (&one - &p) * &q;
    let beta = (ratio(2, 1) * &p * (&one - &r) + ratio(3, 1) * (&one - &p) * (&one - &q)) / &p;
    RationalCoefficients { alpha, beta }
}

/// A complete single-step outcome distribution: every possible
/// [`InteractionChoice`] with its exact probability. Outcomes are sorted,
/// strictly positive, and sum to exactly 1.
#[derive(Debug, Clone)]
pub struct ExactStepDistribution {
    outcomes: Vec<(InteractionChoice, BigRational)>,
    fingerprint: String,
}

impl ExactStepDistribution {
    pub fn outcomes(&self) -> &[(InteractionChoice, BigRational)] {
        &self.outcomes
    }

    pub fn probability_of(&self, choice: &InteractionChoice) -> BigRational {
        self.outcomes
            .binary_search_by(|(c, _)| c.cmp(choice))
            .map(|i| self.outcomes[i].1.clone())
            .unwrap_or_else(|_| BigRational::zero())
    }

    pub fn total(&self) -> BigRational {
        self.outcomes.iter().map(|(_, p)| p).sum()
    }

    /// The state summary this distribution was computed for.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn probabilities_f64(&self) -> Vec<(InteractionChoice, f64)> {
        self.outcomes
            .iter()
            .map(|(c, p)| (*c, p.to_f64().expect("probability fits in f64")))
            .collect()
    }

    /// Audit dump: `branch,participants,numerator,denominator`.
    pub fn write_csv<W: io::Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "branch,participants,numerator,denominator")?;
        for (choice, prob) in &self.outcomes {
            let participants: Vec<String> = choice
                .participants()
                .iter()
                .map(|v| v.to_string())
                .collect();
            writeln!(
                out,
                "{},{},{},{}",
                choice.branch_name(),
                participants.join(" "),
                prob.numer(),
                prob.denom()
            )?;
        }
        Ok(())
    }
}

fn fnv1a64(data: &[u64]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &value in data {
        for byte in value.to_le_bytes() {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    hash
}

fn state_fingerprint(state: &GraphState) -> String {
    let mut stream: Vec<u64> = vec![state.steps(), state.vertex_count() as u64];
    for ((a, b), w) in state.edges_sorted() {
        stream.extend([u64::from(a), u64::from(b), w]);
    }
    for ((a, b, c), w) in state.triangles_sorted() {
        stream.extend([u64::from(a), u64::from(b), u64::from(c), w]);
    }
    format!(
        "n={};V={};E={};T={};h={:016x}",
        state.steps(),
        state.vertex_count(),
        state.total_edge_weight(),
        state.total_triangle_weight(),
        fnv1a64(&stream)
    )
}

fn check_tractable(state: &GraphState) -> Result<(), OracleError> {
    if state.vertex_count() > MAX_VERTICES || state.steps() > MAX_STEPS {
        return Err(OracleError::StateTooLarge {
            v: state.vertex_count(),
            n: state.steps(),
        });
    }
    Ok(())
}

/// Enumerates the exact distribution of the upcoming step: every edge with
/// probability `p r w/(3n)`, every unordered pair with `p(1-r)/C(V,2)`,
/// every stored triangle with `(1-p) q w/n`, every unordered triple with
/// `(1-p)(1-q)/C(V,3)`. Zero-probability branches contribute no outcomes.
pub fn enumerate_step(
    state: &GraphState,
    params: &Params,
) -> Result<ExactStepDistribution, OracleError> {
    check_tractable(state)?;
    let p = rational(params.p());
    let r = rational(params.r());
    let q = rational(params.q());
    let one = BigRational::one();

    let new_pref = &p * &r;
    let new_uniform = &p * (&one - &r);
    let old_pref = (&one - &p) * &q;
    let old_uniform = (&one - &p) * (&one - &q);

    let n = state.steps() + 1; // the upcoming step number
    let v = state.vertex_count() as u64;
    let edge_total = 3 * n;
    let triangle_total = n;

    let mut outcomes: Vec<(InteractionChoice, BigRational)> = Vec::new();

    if new_pref.is_positive() {
        for (pair, w) in state.edges() {
            outcomes.push((
                InteractionChoice::NewVertexPreferential { pair },
                &new_pref * ratio(w, edge_total),
            ));
        }
    }
    if new_uniform.is_positive() {
        let pairs = v * (v - 1) / 2;
        for a in 0..v as VertexId {
            for b in (a + 1)..v as VertexId {
                outcomes.push((
                    InteractionChoice::NewVertexUniform { pair: (a, b) },
                    &new_uniform * ratio(1, pairs),
                ));
            }
        }
    }
    if old_pref.is_positive() {
        for (triple, w) in state.triangles() {
            outcomes.push((
                InteractionChoice::OldPreferential { triple },
                &old_pref * ratio(w, triangle_total),
            ));
        }
    }
    if old_uniform.is_positive() {
        let triples = v * (v - 1) * (v - 2) / 6;
        for a in 0..v as VertexId {
            for b in (a + 1)..v as VertexId {
                for c in (b + 1)..v as VertexId {
                    outcomes.push((
                        InteractionChoice::OldUniform { triple: (a, b, c) },
                        &old_uniform * ratio(1, triples),
                    ));
                }
            }
        }
    }

    outcomes.sort_by(|(a, _), (b, _)| a.cmp(b));
    let distribution = ExactStepDistribution {
        outcomes,
        fingerprint: state_fingerprint(state),
    };
    assert!(
        distribution.total().is_one(),
        "outcome probabilities must sum to exactly 1"
    );
    assert!(distribution.outcomes.iter().all(|(_, p)| p.is_positive()));
    Ok(distribution)
}

/// Exact probability that `vertex` takes part in the upcoming step, by
/// summing the enumerated outcomes containing it.
pub fn participation_probability(
    state: &GraphState,
    params: &Params,
    vertex: VertexId,
) -> Result<BigRational, OracleError> {
    if (vertex as usize) >= state.vertex_count() {
        return Err(OracleError::UnknownVertex(vertex));
    }
    let distribution = enumerate_step(state, params)?;
    Ok(distribution
        .outcomes
        .iter()
        .filter(|(choice, _)| choice.contains(vertex))
        .map(|(_, p)| p)
        .sum())
}

/// The participation formula `alpha w / n + beta p / V_{n-1}` as an exact
/// rational; [`participation_probability`] must equal this identically.
pub fn participation_formula(
    state: &GraphState,
    params: &Params,
    vertex: VertexId,
) -> Result<BigRational, OracleError> {
    let w = state
        .vertex_weight(vertex)
        .ok_or(OracleError::UnknownVertex(vertex))?;
    let coeffs = rational_coefficients(params);
    let n = state.steps() + 1;
    let v = state.vertex_count() as u64;
    Ok(coeffs.alpha * ratio(w, n) + coeffs.beta * rational(params.p()) / ratio(v, 1))
}

/// A deterministic battery of small states: the initial triangle plus five
/// states reached by 1-5 applied interactions, exercising every branch kind.
pub fn reference_states() -> Vec<GraphState> {
    let mut states = vec![GraphState::new()];
    let script = [
        InteractionChoice::NewVertexUniform { pair: (0, 1) },
        InteractionChoice::OldUniform { triple: (1, 2, 3) },
        InteractionChoice::NewVertexPreferential { pair: (0, 1) },
        InteractionChoice::OldPreferential { triple: (0, 1, 2) },
        InteractionChoice::NewVertexUniform { pair: (2, 4) },
    ];
    let mut state = GraphState::new();
    for choice in script {
        apply_interaction(&mut state, &choice).expect("reference script is valid");
        states.push(state.clone());
    }
    states
}

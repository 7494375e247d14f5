//! Hinge penalties for the ten rule kinds.
//!
//! Each penalty is `Σ max(0, v − ξ)` where `v` measures how far a grounding
//! is from satisfying the rule, so a penalty is zero exactly when every
//! grounding satisfies its condition within the slack `ξ`. Probabilistic
//! forms apply the logistic σ to raw scores.

use crate::error::{Error, Result};
use crate::kg::{RelationId, RuleKind, Triple};
use crate::model::{sigmoid, Activation, Gradients, ModelParameters};

use super::Grounding;

fn expected_premises(kind: RuleKind) -> usize {
    match kind {
        RuleKind::Reflexive | RuleKind::Irreflexive => 0,
        RuleKind::Transitive | RuleKind::Composition => 2,
        _ => 1,
    }
}

#[inline]
fn dsigmoid(s: f64) -> f64 {
    s * (1.0 - s)
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Violation `v − ξ` of one grounding given the scores of its premises and
/// conclusion, plus `∂(v − ξ)/∂f` for each of those scores.
fn violation(kind: RuleKind, premise: &[f64], conclusion: f64, slack: f64) -> (f64, [f64; 3]) {
    let fc = conclusion;
    match kind {
        RuleKind::Symmetric | RuleKind::Inverse | RuleKind::Equivalence => {
            let diff = premise[0] - fc;
            let s = sign(diff);
            (diff.abs() - slack, [s, -s, 0.0])
        }
        RuleKind::Implication => (premise[0] - fc - slack, [1.0, -1.0, 0.0]),
        RuleKind::Antisymmetric => {
            let (sa, sc) = (sigmoid(premise[0]), sigmoid(fc));
            (sa * sc - slack, [dsigmoid(sa) * sc, sa * dsigmoid(sc), 0.0])
        }
        RuleKind::Negation => {
            let (sa, sc) = (sigmoid(premise[0]), sigmoid(fc));
            let u = sa + sc - 1.0;
            let s = sign(u);
            (u.abs() - slack, [s * dsigmoid(sa), s * dsigmoid(sc), 0.0])
        }
        RuleKind::Transitive | RuleKind::Composition => {
            let (s1, s2, s3) = (sigmoid(premise[0]), sigmoid(premise[1]), sigmoid(fc));
            (
                s1 * s2 - s3 - slack,
                [dsigmoid(s1) * s2, s1 * dsigmoid(s2), -dsigmoid(s3)],
            )
        }
        RuleKind::Reflexive => {
            let sc = sigmoid(fc);
            (1.0 - sc - slack, [-dsigmoid(sc), 0.0, 0.0])
        }
        RuleKind::Irreflexive => {
            let sc = sigmoid(fc);
            (sc - slack, [dsigmoid(sc), 0.0, 0.0])
        }
    }
}

fn check_groundings(kind: RuleKind, groundings: &[Grounding], slack: f64) -> Result<()> {
    if !(slack >= 0.0) {
        return Err(Error::Argument(format!("slack {slack} must be nonnegative")));
    }
    for g in groundings {
        if g.kind != kind || g.premises.len() != expected_premises(kind) {
            return Err(Error::Internal(format!(
                "{} grounding with {} premises passed to {kind} penalty",
                g.kind,
                g.premises.len()
            )));
        }
    }
    Ok(())
}

fn scores_of(params: &ModelParameters, groundings: &[Grounding]) -> Vec<f64> {
    let triples: Vec<Triple> = groundings
        .iter()
        .flat_map(|g| g.premises.iter().copied().chain(std::iter::once(g.conclusion)))
        .collect();
    params.score_batch(&triples)
}

/// Per-grounding hinge arguments `v − ξ` (the penalty is the sum of their positive parts).
pub fn hinge_arguments(kind: RuleKind, params: &ModelParameters, groundings: &[Grounding], slack: f64) -> Result<Vec<f64>> {
    check_groundings(kind, groundings, slack)?;
    let scores = scores_of(params, groundings);
    let n = expected_premises(kind) + 1;
    Ok(scores
        .chunks(n)
        .map(|s| violation(kind, &s[..n - 1], s[n - 1], slack).0)
        .collect())
}

/// Grounded penalty value and its gradient.
pub fn penalty(kind: RuleKind, params: &ModelParameters, groundings: &[Grounding], slack: f64) -> Result<(f64, Gradients)> {
    let mut grads = params.zero_gradients();
    let value = penalty_into(kind, params, groundings, slack, 1.0, &mut grads)?;
    Ok((value, grads))
}

/// Adds `scale ×` the penalty gradient into `grads` and returns the unscaled penalty.
pub fn penalty_into(
    kind: RuleKind,
    params: &ModelParameters,
    groundings: &[Grounding],
    slack: f64,
    scale: f64,
    grads: &mut Gradients,
) -> Result<f64> {
    check_groundings(kind, groundings, slack)?;
    for g in groundings {
        for t in g.premises.iter().chain(std::iter::once(&g.conclusion)) {
            if t.head.0 >= params.num_entities || t.tail.0 >= params.num_entities || t.relation.0 >= params.num_relations {
                return Err(Error::Argument(format!("grounding triple {t} out of model range")));
            }
        }
    }
    let scores = scores_of(params, groundings);
    let n = expected_premises(kind) + 1;
    let mut value = 0.0;
    let mut coeffs = Vec::new();
    for (g, s) in groundings.iter().zip(scores.chunks(n)) {
        let (v, d) = violation(kind, &s[..n - 1], s[n - 1], slack);
        if v > 0.0 {
            value += v;
            for (t, &dv) in g.premises.iter().chain(std::iter::once(&g.conclusion)).zip(&d) {
                if dv != 0.0 {
                    coeffs.push((*t, scale * dv));
                }
            }
        }
    }
    params.accumulate_score_gradients(&coeffs, grads)?;
    Ok(value)
}

fn check_grounding_free(kind: RuleKind, params: &ModelParameters, r1: RelationId, r2: RelationId, slack: f64) -> Result<()> {
    if !kind.supports_grounding_free() {
        return Err(Error::Argument(format!("{kind} has no grounding-free form")));
    }
    if params.final_activation() != Some(Activation::Relu) {
        return Err(Error::Config(
            "grounding-free penalties need nonnegative final features; the last hidden layer must be ReLU".into(),
        ));
    }
    if r1.0 >= params.num_relations || r2.0 >= params.num_relations {
        return Err(Error::Argument(format!(
            "relation pair ({}, {}) out of range ({} relations)",
            r1.0, r2.0, params.num_relations
        )));
    }
    if !(slack >= 0.0) {
        return Err(Error::Argument(format!("slack {slack} must be nonnegative")));
    }
    Ok(())
}

/// Penalty on the relation vectors alone: `Σ_i max(0, β1_i − β2_i − ξ)` for
/// implication and `Σ_i max(0, |β1_i − β2_i| − ξ)` for equivalence. With
/// nonnegative features a zero value bounds the score difference on every
/// entity pair at once.
pub fn penalty_grounding_free(
    kind: RuleKind,
    params: &ModelParameters,
    r1: RelationId,
    r2: RelationId,
    slack: f64,
) -> Result<(f64, Gradients)> {
    let mut grads = params.zero_gradients();
    let value = penalty_grounding_free_into(kind, params, r1, r2, slack, 1.0, &mut grads)?;
    Ok((value, grads))
}

pub fn penalty_grounding_free_into(
    kind: RuleKind,
    params: &ModelParameters,
    r1: RelationId,
    r2: RelationId,
    slack: f64,
    scale: f64,
    grads: &mut Gradients,
) -> Result<f64> {
    check_grounding_free(kind, params, r1, r2, slack)?;
    if grads.relation_outputs.len() != params.relation_outputs.len() {
        return Err(Error::Internal("gradient buffers do not match parameter shapes".into()));
    }
    let l = params.feature_width();
    let (b1, b2) = (params.relation(r1), params.relation(r2));
    let mut value = 0.0;
    for i in 0..l {
        let diff = b1[i] - b2[i];
        let (v, d) = match kind {
            RuleKind::Implication => (diff - slack, 1.0),
            _ => (diff.abs() - slack, sign(diff)),
        };
        if v > 0.0 {
            value += v;
            grads.relation_outputs[r1.0 * l + i] += scale * d;
            grads.relation_outputs[r2.0 * l + i] -= scale * d;
        }
    }
    Ok(value)
}

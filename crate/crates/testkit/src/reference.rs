use logicenn::kg::{RuleKind, Triple};
use logicenn::model::{Activation, LabeledSample, ModelParameters};
use logicenn::rules::Grounding;
use rug::Float;

use crate::forward::{fl, logistic, ExactModel, PRECISION};

/// Points closer than this to a ReLU or hinge corner are skipped by
/// finite-difference checks.
pub const KINK_MARGIN: f64 = 1e-3;

fn score(model: &ExactModel, t: &Triple) -> Float {
    model.score(t.head.0, t.relation.0, t.tail.0)
}

fn positive_part(x: Float) -> Float {
    if x > 0.0 {
        x
    } else {
        fl(0.0)
    }
}

/// `Σ weight · ln(1 + e^{−label·f})`.
pub fn exact_data_loss(model: &ExactModel, batch: &[LabeledSample]) -> Float {
    let mut total = fl(0.0);
    for s in batch {
        let m = score(model, &s.triple) * -s.label;
        total += m.exp().ln_1p() * s.weight;
    }
    total
}

pub fn reference_data_loss(params: &ModelParameters, batch: &[LabeledSample]) -> f64 {
    exact_data_loss(&ExactModel::new(params), batch).to_f64()
}

/// Hinge argument `v − ξ` of one grounding and the inner quantity whose
/// absolute value is taken, if any.
fn terms(kind: RuleKind, model: &ExactModel, g: &Grounding, slack: f64) -> (Float, Option<Float>) {
    let fc = score(model, &g.conclusion);
    let fp: Vec<Float> = g.premises.iter().map(|t| score(model, t)).collect();
    let one = || fl(1.0);
    match kind {
        RuleKind::Symmetric | RuleKind::Inverse | RuleKind::Equivalence => {
            let diff = Float::with_val(PRECISION, &fp[0] - &fc);
            (diff.clone().abs() - slack, Some(diff))
        }
        RuleKind::Implication => (Float::with_val(PRECISION, &fp[0] - &fc) - slack, None),
        RuleKind::Antisymmetric => (logistic(&fp[0]) * logistic(&fc) - slack, None),
        RuleKind::Negation => {
            let u = logistic(&fp[0]) + logistic(&fc) - one();
            (u.clone().abs() - slack, Some(u))
        }
        RuleKind::Transitive | RuleKind::Composition => {
            (logistic(&fp[0]) * logistic(&fp[1]) - logistic(&fc) - slack, None)
        }
        RuleKind::Reflexive => (one() - logistic(&fc) - slack, None),
        RuleKind::Irreflexive => (logistic(&fc) - slack, None),
    }
}

/// `Σ_groundings max(0, v − ξ)`.
pub fn exact_penalty(kind: RuleKind, model: &ExactModel, groundings: &[Grounding], slack: f64) -> Float {
    let mut total = fl(0.0);
    for g in groundings {
        total += positive_part(terms(kind, model, g, slack).0);
    }
    total
}

pub fn reference_penalty(kind: RuleKind, params: &ModelParameters, groundings: &[Grounding], slack: f64) -> f64 {
    exact_penalty(kind, &ExactModel::new(params), groundings, slack).to_f64()
}

/// `Σ_i max(0, Δ_i − ξ)` (implication) or `Σ_i max(0, |Δ_i| − ξ)`
/// (equivalence) with `Δ = β_r1 − β_r2`.
pub fn exact_grounding_free_penalty(kind: RuleKind, model: &ExactModel, r1: usize, r2: usize, slack: f64) -> Float {
    let mut total = fl(0.0);
    for i in 0..model.feature_width() {
        let delta = Float::with_val(PRECISION, model.relation_value(r1, i) - model.relation_value(r2, i));
        let v = if kind == RuleKind::Implication { delta } else { delta.abs() };
        total += positive_part(v - slack);
    }
    total
}

pub fn reference_grounding_free_penalty(kind: RuleKind, params: &ModelParameters, r1: usize, r2: usize, slack: f64) -> f64 {
    exact_grounding_free_penalty(kind, &ExactModel::new(params), r1, r2, slack).to_f64()
}

fn relu_near_kink(model: &ExactModel, relu: &[bool], t: &Triple) -> bool {
    let pre = model.preactivations(t.head.0, t.tail.0);
    pre.iter()
        .zip(relu)
        .any(|(z, &is_relu)| is_relu && z.iter().any(|v| v.to_f64().abs() < KINK_MARGIN))
}

/// True when a ReLU pre-activation of any triple involved, or a hinge or
/// absolute-value argument of any grounding, lies within [`KINK_MARGIN`]
/// of zero. With `rule = None` only the triples' ReLU units are checked.
pub fn near_kink(params: &ModelParameters, triples: &[Triple], rule: Option<(RuleKind, &[Grounding], f64)>) -> bool {
    let model = ExactModel::new(params);
    let relu: Vec<bool> = params.activations.iter().map(|a| *a == Activation::Relu).collect();
    if triples.iter().any(|t| relu_near_kink(&model, &relu, t)) {
        return true;
    }
    if let Some((kind, groundings, slack)) = rule {
        for g in groundings {
            if g.premises.iter().chain(std::iter::once(&g.conclusion)).any(|t| relu_near_kink(&model, &relu, t)) {
                return true;
            }
            let (arg, inner) = terms(kind, &model, g, slack);
            if arg.to_f64().abs() < KINK_MARGIN || inner.is_some_and(|u| u.to_f64().abs() < KINK_MARGIN) {
                return true;
            }
        }
    }
    false
}

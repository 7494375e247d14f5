use logicenn::kg::{RelationId, RuleKind, Triple};
use logicenn::model::{ActivationPlan, LabeledSample, ModelParameters};
use logicenn::rules::{penalty, penalty_grounding_free, Grounding};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rug::Float;

use crate::fd::{exact_gradient, flatten_grads, max_relative_error};
use crate::forward::ExactModel;
use crate::graphs::{random_graph, random_params, random_rule};
use crate::groundings::brute_force_groundings;
use crate::reference::{exact_data_loss, exact_grounding_free_penalty, exact_penalty, near_kink, reference_penalty, KINK_MARGIN};

/// Step used for central differences.
pub const FD_EPSILON: f64 = 1e-5;

/// Outcome of one seeded comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientSample {
    /// Max relative error between analytic and numeric gradients.
    pub gradient_error: f64,
    /// |production value − reference value|.
    pub value_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradientSummary {
    pub accepted: usize,
    /// Seeds skipped near a kink or with nothing to penalise.
    pub rejected: usize,
    pub max_gradient_error: f64,
    pub max_value_error: f64,
}

fn small_model(rng: &mut ChaCha8Rng, plan: ActivationPlan, ne: usize, nr: usize) -> ModelParameters {
    random_params(rng, plan, ne, nr, 3, &[5, 4])
}

fn compare(params: &ModelParameters, analytic: &[f64], value: f64, reference: impl Fn(&ExactModel) -> Float) -> GradientSample {
    let numeric = exact_gradient(params, FD_EPSILON, &reference);
    GradientSample {
        gradient_error: max_relative_error(analytic, &numeric),
        value_error: (value - reference(&ExactModel::new(params)).to_f64()).abs(),
    }
}

/// Data loss on a random weighted batch; `None` if the point is near a kink.
pub fn check_data_loss(plan: ActivationPlan, seed: u64) -> Option<GradientSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ne, nr) = (5, 2);
    let params = small_model(&mut rng, plan, ne, nr);
    let batch: Vec<LabeledSample> = (0..8)
        .map(|i| {
            let t = Triple::new(rng.gen_range(0..ne), rng.gen_range(0..nr), rng.gen_range(0..ne));
            if i % 3 == 0 {
                LabeledSample::positive(t)
            } else {
                LabeledSample::negative(t, rng.gen_range(0.1..1.0))
            }
        })
        .collect();
    let triples: Vec<Triple> = batch.iter().map(|s| s.triple).collect();
    if near_kink(&params, &triples, None) {
        return None;
    }
    let (value, grads) = params.backward(&batch, None).unwrap();
    Some(compare(&params, &flatten_grads(&grads), value, |m| exact_data_loss(m, &batch)))
}

/// Grounded penalty of `kind` on a random graph; `None` when the graph has
/// no groundings, the penalty is inactive, or the point is near a kink.
pub fn check_penalty(kind: RuleKind, plan: ActivationPlan, seed: u64) -> Option<GradientSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ne, nr) = (5, 2);
    let graph = random_graph(&mut rng, ne, nr, 14, 0);
    let rule = random_rule(&mut rng, kind, nr);
    let groundings: Vec<Grounding> = brute_force_groundings(&rule, &graph).into_iter().take(6).collect();
    if groundings.is_empty() {
        return None;
    }
    let slack = [0.0, 0.05, 0.2][(seed % 3) as usize];
    // wider score spread so sigmoid-based hinges are active; a few redraws
    // per seed before giving up
    let params = (0..10).find_map(|_| {
        let mut p = small_model(&mut rng, plan, ne, nr);
        p.relation_outputs.iter_mut().for_each(|b| *b *= 4.0);
        let usable = !near_kink(&p, &[], Some((kind, &groundings, slack)))
            && reference_penalty(kind, &p, &groundings, slack) > 0.0;
        usable.then_some(p)
    })?;
    let (value, grads) = penalty(kind, &params, &groundings, slack).unwrap();
    Some(compare(&params, &flatten_grads(&grads), value, |m| exact_penalty(kind, m, &groundings, slack)))
}

/// Grounding-free implication/equivalence penalty on the relation rows.
pub fn check_grounding_free(kind: RuleKind, seed: u64) -> Option<GradientSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = small_model(&mut rng, ActivationPlan::ReluAll, 3, 2);
    let slack = [0.0, 0.1, 0.3][(seed % 3) as usize];
    let l = params.relation_outputs.len() / 2;
    let kinked = (0..l).any(|i| {
        let d = params.relation_outputs[i] - params.relation_outputs[l + i];
        (d - slack).abs() < KINK_MARGIN || (kind == RuleKind::Equivalence && (d.abs() - slack).abs() < KINK_MARGIN)
    });
    if kinked {
        return None;
    }
    let (value, grads) = penalty_grounding_free(kind, &params, RelationId(0), RelationId(1), slack).unwrap();
    Some(compare(&params, &flatten_grads(&grads), value, |m| {
        exact_grounding_free_penalty(kind, m, 0, 1, slack)
    }))
}

/// Runs `check` on seeds `0, 1, ...` until `needed` points are accepted
/// (giving up after `20 × needed` attempts).
pub fn gradient_summary(needed: usize, check: impl Fn(u64) -> Option<GradientSample>) -> GradientSummary {
    let mut s = GradientSummary::default();
    let mut seed = 0;
    while s.accepted < needed && seed < 20 * needed as u64 {
        match check(seed) {
            Some(g) => {
                s.accepted += 1;
                s.max_gradient_error = s.max_gradient_error.max(g.gradient_error);
                s.max_value_error = s.max_value_error.max(g.value_error);
            }
            None => s.rejected += 1,
        }
        seed += 1;
    }
    s
}

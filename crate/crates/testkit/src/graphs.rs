use logicenn::kg::{DuplicatePolicy, KnowledgeGraph, RelationId, Rule, RuleKind, Split, Triple};
use logicenn::model::{Activation, ActivationPlan, Dense, ModelParameters};
use rand::Rng;

/// Graph over entities `e0..` and relations `r0..` (ids equal indices) with
/// `train` random triples, duplicates dropped, plus `held_out` random triples
/// split between valid and test.
pub fn random_graph<R: Rng>(rng: &mut R, num_entities: usize, num_relations: usize, train: usize, held_out: usize) -> KnowledgeGraph {
    let mut kg = KnowledgeGraph::new();
    for e in 0..num_entities {
        kg.intern_entity(&format!("e{e}"));
    }
    for r in 0..num_relations {
        kg.intern_relation(&format!("r{r}"));
    }
    let draw = |rng: &mut R| {
        Triple::new(
            rng.gen_range(0..num_entities),
            rng.gen_range(0..num_relations),
            rng.gen_range(0..num_entities),
        )
    };
    for _ in 0..train {
        let t = draw(rng);
        kg.add_triple(Split::Train, t, DuplicatePolicy::Deduplicate).unwrap();
    }
    for i in 0..held_out {
        let t = draw(rng);
        let split = if i % 2 == 0 { Split::Valid } else { Split::Test };
        kg.add_triple(split, t, DuplicatePolicy::Deduplicate).unwrap();
    }
    kg
}

/// A rule of `kind` over randomly chosen relations (repeats allowed).
pub fn random_rule<R: Rng>(rng: &mut R, kind: RuleKind, num_relations: usize) -> Rule {
    let arity = match kind {
        RuleKind::Symmetric | RuleKind::Antisymmetric | RuleKind::Transitive | RuleKind::Reflexive | RuleKind::Irreflexive => 1,
        RuleKind::Composition => 3,
        _ => 2,
    };
    let rels = (0..arity).map(|_| RelationId(rng.gen_range(0..num_relations))).collect();
    Rule::new(kind, rels, 1.0).unwrap()
}

/// Parameters with every value (biases included) drawn from `U(−1, 1)` and
/// unit-norm entity rows.
pub fn random_params<R: Rng>(
    rng: &mut R,
    plan: ActivationPlan,
    num_entities: usize,
    num_relations: usize,
    dim: usize,
    hidden: &[usize],
) -> ModelParameters {
    let mut u = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let mut entity_embeddings = u(num_entities * dim);
    for row in entity_embeddings.chunks_mut(dim) {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        row.iter_mut().for_each(|x| *x /= norm);
    }
    let mut layers = Vec::new();
    let mut width = 2 * dim;
    for &out in hidden {
        layers.push(Dense {
            inputs: width,
            outputs: out,
            weights: u(width * out),
            bias: u(out),
        });
        width = out;
    }
    let n = hidden.len();
    let activations = (0..n)
        .map(|k| match plan {
            ActivationPlan::ReluAll => Activation::Relu,
            ActivationPlan::SigmoidFinalRelu if k + 1 == n => Activation::Relu,
            ActivationPlan::SigmoidFinalRelu => Activation::Sigmoid,
        })
        .collect();
    ModelParameters {
        dim,
        num_entities,
        num_relations,
        entity_embeddings,
        layers,
        activations,
        relation_outputs: u(num_relations * width),
    }
}

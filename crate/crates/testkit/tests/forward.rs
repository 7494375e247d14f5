use logicenn::kg::{EntityId, RelationId};
use logicenn::model::{Activation, ActivationPlan, Dense, ModelParameters};
use logicenn_testkit::{random_params, reference_forward};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn matches_production_score_on_1000_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let plan = if case % 2 == 0 { ActivationPlan::ReluAll } else { ActivationPlan::SigmoidFinalRelu };
        let depth = rng.gen_range(1..4);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..9)).collect();
        let (ne, nr, d) = (rng.gen_range(1..6), rng.gen_range(1..4), rng.gen_range(1..6));
        let p = random_params(&mut rng, plan, ne, nr, d, &hidden);
        let (h, r, t) = (rng.gen_range(0..ne), rng.gen_range(0..nr), rng.gen_range(0..ne));
        let prod = p.score(EntityId(h), RelationId(r), EntityId(t)).unwrap();
        let oracle = reference_forward(&p, h, r, t);
        worst = worst.max((prod - oracle).abs() / oracle.abs().max(1.0));
    }
    assert!(worst <= 1e-12, "worst deviation {worst}");
}

#[test]
fn zero_beta_scores_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut p = random_params(&mut rng, ActivationPlan::ReluAll, 3, 2, 4, &[6, 5]);
    p.relation_outputs.iter_mut().for_each(|b| *b = 0.0);
    assert_eq!(reference_forward(&p, 0, 1, 2), 0.0);
}

#[test]
fn constant_feature() {
    let p = ModelParameters {
        dim: 1,
        num_entities: 1,
        num_relations: 1,
        entity_embeddings: vec![1.0],
        layers: vec![Dense { inputs: 2, outputs: 1, weights: vec![0.0, 0.0], bias: vec![1.0] }],
        activations: vec![Activation::Relu],
        relation_outputs: vec![2.0],
    };
    assert_eq!(reference_forward(&p, 0, 0, 0), 2.0);
}

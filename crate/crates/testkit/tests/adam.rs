use logicenn::model::{ActivationPlan, Architecture, ModelParameters};
use logicenn::trainer::{adam_step, AdamHyper, AdamState};
use logicenn_testkit::{flatten_grads, flatten_params, ReferenceAdam};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn matches_reference_over_100_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let arch = Architecture { embedding_dim: 3, hidden: vec![4, 3], activation: ActivationPlan::ReluAll };
    let mut params = ModelParameters::init(&arch, 4, 2, &mut rng).unwrap();
    let hyper = AdamHyper { learning_rate: 0.01, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 };
    let mut state = AdamState::new(&params);
    let mut flat = flatten_params(&params);
    let mut reference = ReferenceAdam::new(flat.len(), 0.01, 0.9, 0.999, 1e-8);
    for _ in 0..100 {
        let mut g = params.zero_gradients();
        g.entity_embeddings.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        for l in &mut g.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|x| *x = rng.gen_range(-2.0..2.0));
        }
        g.relation_outputs.iter_mut().for_each(|x| *x = rng.gen_range(-0.1..0.1));
        adam_step(&mut params, &g, &mut state, &hyper).unwrap();
        reference.step(&mut flat, &flatten_grads(&g));
    }
    let got = flatten_params(&params);
    let worst = got.iter().zip(&flat).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-10, "{worst}");
    assert_eq!(state.step, 100);
}

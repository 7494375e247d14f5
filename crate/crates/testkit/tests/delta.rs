use logicenn::kg::{RelationId, RuleKind};
use logicenn::model::ActivationPlan;
use logicenn::rules::delta_statistics;
use logicenn_testkit::{random_params, two_pass_mean_variance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn delta_statistics_match_two_pass() {
    for seed in 0..30 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_params(&mut rng, ActivationPlan::ReluAll, 2, 4, 3, &[5, 7]);
        let pairs = [
            (RuleKind::Implication, RelationId(0), RelationId(1)),
            (RuleKind::Equivalence, RelationId(2), RelationId(3)),
            (RuleKind::Implication, RelationId(3), RelationId(3)),
        ];
        let stats = delta_statistics(&p, &pairs).unwrap();
        for (s, &(_, r1, r2)) in stats.iter().zip(&pairs) {
            let delta: Vec<f64> = p.relation(r1).iter().zip(p.relation(r2)).map(|(a, b)| a - b).collect();
            let (mean, var) = two_pass_mean_variance(&delta);
            assert!((s.mean - mean).abs() <= 1e-12);
            assert!((s.variance - var).abs() <= 1e-12);
        }
        assert_eq!((stats[2].mean, stats[2].variance), (0.0, 0.0));
    }
}

//! Negative sampling by corruption and self-adversarial weights.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, Triple};

pub const DEFAULT_MAX_RETRIES: usize = 10;

/// Counters kept across calls so the collision policy can be audited.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SamplerStats {
    pub drawn: usize,
    pub resampled: usize,
    /// Corruptions that still hit a train triple after all retries and were kept.
    pub kept_collisions: usize,
    pub head_corruptions: usize,
}

fn corrupt<R: Rng + ?Sized>(triple: &Triple, num_entities: usize, rng: &mut R) -> (Triple, bool) {
    let replace_head = rng.gen_bool(0.5);
    let original = if replace_head { triple.head } else { triple.tail };
    let replacement = if num_entities <= 1 {
        original
    } else {
        let e = rng.gen_range(0..num_entities - 1);
        EntityId(if e >= original.0 { e + 1 } else { e })
    };
    let mut out = *triple;
    if replace_head {
        out.head = replacement;
    } else {
        out.tail = replacement;
    }
    (out, replace_head)
}

/// `k` corruptions of `triple`, each replacing the head or the tail (fair
/// coin) with a uniformly drawn different entity.
pub fn sample_negatives<R: Rng + ?Sized>(triple: &Triple, graph: &KnowledgeGraph, k: usize, rng: &mut R) -> Vec<Triple> {
    let mut stats = SamplerStats::default();
    sample_negatives_with(triple, graph, k, DEFAULT_MAX_RETRIES, rng, &mut stats)
}

/// As [`sample_negatives`]; a corruption that is a train triple is redrawn up
/// to `max_retries` times and then kept.
pub fn sample_negatives_with<R: Rng + ?Sized>(
    triple: &Triple,
    graph: &KnowledgeGraph,
    k: usize,
    max_retries: usize,
    rng: &mut R,
    stats: &mut SamplerStats,
) -> Vec<Triple> {
    let n = graph.num_entities();
    (0..k)
        .map(|_| {
            let (mut candidate, mut head) = corrupt(triple, n, rng);
            let mut tries = 0;
            while graph.in_train(&candidate) && tries < max_retries {
                (candidate, head) = corrupt(triple, n, rng);
                tries += 1;
                stats.resampled += 1;
            }
            if graph.in_train(&candidate) {
                stats.kept_collisions += 1;
            }
            stats.drawn += 1;
            stats.head_corruptions += usize::from(head);
            candidate
        })
        .collect()
}

/// Softmax of `temperature · score` over the negatives of one positive.
/// The weights are constants for the gradient.
pub fn adversarial_weights(scores: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Argument("adversarial weights of an empty score vector".into()));
    }
    if !(temperature >= 0.0) {
        return Err(Error::Argument(format!("temperature {temperature} must be ≥ 0")));
    }
    let max = scores.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(temperature * s));
    let exps: Vec<f64> = scores.iter().map(|&s| (temperature * s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::Split;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair_graph() -> KnowledgeGraph {
        let mut kg = KnowledgeGraph::new();
        kg.add_named(Split::Train, "a", "r", "b").unwrap();
        kg
    }

    #[test]
    fn two_entity_corruptions() {
        let kg = pair_graph();
        let pos = kg.train()[0];
        let allowed = [Triple::new(1, 0, 1), Triple::new(0, 0, 0)];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            for neg in sample_negatives(&pos, &kg, 3, &mut rng) {
                assert!(allowed.contains(&neg), "{neg}");
            }
        }
    }

    #[test]
    fn returns_exactly_k() {
        let (kg, _) = crate::kg::generate_family_kg(3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(sample_negatives(&kg.train()[0], &kg, 5, &mut rng).len(), 5);
    }

    #[test]
    fn collisions_resampled_then_kept() {
        // every corruption of (a, r, b) in this graph is a train triple
        let mut kg = KnowledgeGraph::new();
        for (h, t) in [("a", "b"), ("b", "b"), ("a", "a")] {
            kg.add_named(Split::Train, h, "r", t).unwrap();
        }
        let mut stats = SamplerStats::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let negs = sample_negatives_with(&kg.train()[0], &kg, 4, 2, &mut rng, &mut stats);
        assert_eq!(negs.len(), 4);
        assert_eq!(stats.kept_collisions, 4);
        assert_eq!(stats.resampled, 8);
    }

    #[test]
    fn weight_examples() {
        assert_eq!(adversarial_weights(&[3.0, 3.0], 1.0).unwrap(), vec![0.5, 0.5]);
        let w = adversarial_weights(&[1.0, -4.0, 9.0, 0.0], 0.0).unwrap();
        assert!(w.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let w = adversarial_weights(&[10.0, 0.0], 1.0).unwrap();
        assert!((w[0] - 0.999_954_602_131_297_6).abs() < 1e-15);
        assert!((w[1] - 4.539_786_870_243_439e-5).abs() < 1e-17);
        assert!(adversarial_weights(&[], 1.0).is_err());
        // no overflow at large temperature·score
        let w = adversarial_weights(&[1e4, 1e4 - 1.0], 1.0).unwrap();
        assert!(w.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn head_tail_ratio() {
        let (kg, _) = crate::kg::generate_family_kg(5, 0).unwrap();
        let mut stats = SamplerStats::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for t in kg.train().iter().cycle().take(2000) {
            sample_negatives_with(t, &kg, 5, DEFAULT_MAX_RETRIES, &mut rng, &mut stats);
        }
        assert_eq!(stats.drawn, 10_000);
        let ratio = stats.head_corruptions as f64 / stats.drawn as f64;
        assert!((0.48..=0.52).contains(&ratio), "{ratio}");
    }

    proptest! {
        #[test]
        fn weights_sum_to_one_and_permute(scores in prop::collection::vec(-50.0f64..50.0, 1..12), tau in 0.0f64..5.0, rot in 0usize..12) {
            let w = adversarial_weights(&scores, tau).unwrap();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let k = rot % scores.len();
            let mut rotated = scores.clone();
            rotated.rotate_left(k);
            let mut w_rot = adversarial_weights(&rotated, tau).unwrap();
            w_rot.rotate_right(k);
            for (a, b) in w.iter().zip(&w_rot) {
                prop_assert!((a - b).abs() < 1e-15);
            }
        }
    }
}

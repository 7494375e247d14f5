use std::collections::BTreeSet;

use logicenn::kg::{EntityId, KnowledgeGraph, RelationId, Rule, RuleKind, Triple};
use logicenn::rules::Grounding;

fn tr(h: usize, r: RelationId, t: usize) -> Triple {
    Triple {
        head: EntityId(h),
        relation: r,
        tail: EntityId(t),
    }
}

/// Every grounding of `rule` found by looping over all entity tuples: the
/// premises must be train triples and the conclusion must not be.
pub fn brute_force_groundings(rule: &Rule, graph: &KnowledgeGraph) -> BTreeSet<Grounding> {
    let n = graph.num_entities();
    let kind = rule.kind();
    let rel = rule.relations();
    let train = |t: &Triple| graph.train().contains(t);
    let mut out = BTreeSet::new();
    let mut push = |bindings: Vec<usize>, premises: Vec<Triple>, conclusion: Triple| {
        if premises.iter().all(train) && !train(&conclusion) {
            out.insert(Grounding {
                kind,
                bindings: bindings.into_iter().map(EntityId).collect(),
                premises,
                conclusion,
            });
        }
    };
    match kind {
        RuleKind::Symmetric | RuleKind::Antisymmetric => {
            for h in 0..n {
                for t in 0..n {
                    push(vec![h, t], vec![tr(h, rel[0], t)], tr(t, rel[0], h));
                }
            }
        }
        RuleKind::Inverse => {
            for h in 0..n {
                for t in 0..n {
                    push(vec![h, t], vec![tr(h, rel[0], t)], tr(t, rel[1], h));
                    push(vec![h, t], vec![tr(h, rel[1], t)], tr(t, rel[0], h));
                }
            }
        }
        RuleKind::Implication => {
            for h in 0..n {
                for t in 0..n {
                    push(vec![h, t], vec![tr(h, rel[0], t)], tr(h, rel[1], t));
                }
            }
        }
        RuleKind::Equivalence | RuleKind::Negation => {
            for h in 0..n {
                for t in 0..n {
                    push(vec![h, t], vec![tr(h, rel[0], t)], tr(h, rel[1], t));
                    push(vec![h, t], vec![tr(h, rel[1], t)], tr(h, rel[0], t));
                }
            }
        }
        RuleKind::Transitive | RuleKind::Composition => {
            let (r1, r2, r3) = if kind == RuleKind::Transitive {
                (rel[0], rel[0], rel[0])
            } else {
                (rel[0], rel[1], rel[2])
            };
            for x in 0..n {
                for y in 0..n {
                    for z in 0..n {
                        push(vec![x, y, z], vec![tr(x, r1, y), tr(y, r2, z)], tr(x, r3, z));
                    }
                }
            }
        }
        RuleKind::Reflexive | RuleKind::Irreflexive => {
            let r = rel[0];
            for e in 0..n {
                let mut touches = false;
                for o in 0..n {
                    touches |= train(&tr(e, r, o)) || train(&tr(o, r, e));
                }
                if touches {
                    push(vec![e, e], Vec::new(), tr(e, r, e));
                }
            }
        }
    }
    out
}

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, RelationId, Rule, RuleKind, Triple};

/// One instantiation of a rule: premises observed in train, conclusion not.
///
/// For the negative kinds (antisymmetric, negation, irreflexive) the
/// conclusion is the triple the rule says should be false.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Grounding {
    pub kind: RuleKind,
    /// `(h, t)` or `(h, t, s)`; reflexive kinds bind `(e, e)`.
    pub bindings: Vec<EntityId>,
    pub premises: Vec<Triple>,
    pub conclusion: Triple,
}

fn triple(h: EntityId, r: RelationId, t: EntityId) -> Triple {
    Triple {
        head: h,
        relation: r,
        tail: t,
    }
}

/// Enumerates the groundings of `rule` over the train split of `graph`.
///
/// Implication and equivalence yield nothing when `grounding_free` is set,
/// since their penalty is then a function of the relation vectors alone.
pub fn ground_rule(rule: &Rule, graph: &KnowledgeGraph, grounding_free: bool) -> Result<Vec<Grounding>> {
    for &r in rule.relations() {
        if r.0 >= graph.num_relations() {
            return Err(Error::Argument(format!(
                "rule {} mentions relation {} but the graph has {}",
                rule.kind(),
                r.0,
                graph.num_relations()
            )));
        }
    }
    let kind = rule.kind();
    if grounding_free && kind.supports_grounding_free() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut emit = |bindings: Vec<EntityId>, premises: Vec<Triple>, conclusion: Triple| {
        if !graph.in_train(&conclusion) {
            out.push(Grounding {
                kind,
                bindings,
                premises,
                conclusion,
            });
        }
    };
    let rel = rule.relations();
    match kind {
        RuleKind::Symmetric | RuleKind::Antisymmetric => {
            let r = rel[0];
            for &(h, t) in graph.adjacency(r) {
                emit(vec![h, t], vec![triple(h, r, t)], triple(t, r, h));
            }
        }
        RuleKind::Inverse => {
            for (from, to) in [(rel[0], rel[1]), (rel[1], rel[0])] {
                for &(h, t) in graph.adjacency(from) {
                    emit(vec![h, t], vec![triple(h, from, t)], triple(t, to, h));
                }
            }
        }
        RuleKind::Implication => {
            for &(h, t) in graph.adjacency(rel[0]) {
                emit(vec![h, t], vec![triple(h, rel[0], t)], triple(h, rel[1], t));
            }
        }
        RuleKind::Equivalence | RuleKind::Negation => {
            for (from, to) in [(rel[0], rel[1]), (rel[1], rel[0])] {
                for &(h, t) in graph.adjacency(from) {
                    emit(vec![h, t], vec![triple(h, from, t)], triple(h, to, t));
                }
            }
        }
        RuleKind::Transitive | RuleKind::Composition => {
            let (r1, r2, r3) = if kind == RuleKind::Transitive {
                (rel[0], rel[0], rel[0])
            } else {
                (rel[0], rel[1], rel[2])
            };
            for &(h, t) in graph.adjacency(r1) {
                for &s in graph.tails(t, r2) {
                    emit(
                        vec![h, t, s],
                        vec![triple(h, r1, t), triple(t, r2, s)],
                        triple(h, r3, s),
                    );
                }
            }
        }
        RuleKind::Reflexive | RuleKind::Irreflexive => {
            let r = rel[0];
            let mut seen = HashSet::new();
            for &(h, t) in graph.adjacency(r) {
                for e in [h, t] {
                    if seen.insert(e) {
                        emit(vec![e, e], Vec::new(), triple(e, r, e));
                    }
                }
            }
        }
    }
    // inverse/equivalence/negation over a single relation visit each pair twice
    let mut seen = HashSet::new();
    out.retain(|g| seen.insert(g.clone()));
    Ok(out)
}

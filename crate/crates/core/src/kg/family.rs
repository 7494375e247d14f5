//! Seeded synthetic family-tree graph with known ground-truth rules.
//!
//! Base facts are one spouse edge per couple, `parentOf` from both parents to
//! each child, and one `siblingOf` edge per sibling pair. Children of earlier
//! families marry into later ones so `grandparentOf` has support. The
//! closure of the base facts under the emitted rules is split so that a
//! fraction of the derived (non-base) triples is held out into valid/test;
//! every held-out triple stays derivable from train by the rules.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DuplicatePolicy, KnowledgeGraph, RelationId, Rule, RuleKind, Split, Triple};
use crate::error::{Error, Result};

pub const SPOUSE: &str = "spouse";
pub const PARENT_OF: &str = "parentOf";
pub const CHILD_OF: &str = "childOf";
pub const GRANDPARENT_OF: &str = "grandparentOf";
pub const SIBLING_OF: &str = "siblingOf";
pub const MARRIED_TO: &str = "marriedTo";
pub const RELATIVE_OF: &str = "relativeOf";

const CHILDREN_PER_FAMILY: usize = 2;

#[derive(Debug, Clone)]
pub struct FamilyConfig {
    pub num_families: usize,
    pub seed: u64,
    /// Fraction of derived triples moved out of train, split evenly into valid and test.
    pub holdout_fraction: f64,
}

impl FamilyConfig {
    pub fn new(num_families: usize, seed: u64) -> Self {
        FamilyConfig {
            num_families,
            seed,
            holdout_fraction: 0.5,
        }
    }
}

pub fn generate_family_kg(num_families: usize, seed: u64) -> Result<(KnowledgeGraph, Vec<Rule>)> {
    generate_family_kg_with(&FamilyConfig::new(num_families, seed))
}

pub fn generate_family_kg_with(config: &FamilyConfig) -> Result<(KnowledgeGraph, Vec<Rule>)> {
    if config.num_families == 0 {
        return Err(Error::Argument("num_families must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&config.holdout_fraction) {
        return Err(Error::Argument(format!(
            "holdout_fraction {} outside [0, 1]",
            config.holdout_fraction
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut kg = KnowledgeGraph::new();
    let rel = |kg: &mut KnowledgeGraph, name| kg.intern_relation(name);
    let spouse = rel(&mut kg, SPOUSE);
    let parent_of = rel(&mut kg, PARENT_OF);
    let child_of = rel(&mut kg, CHILD_OF);
    let grandparent_of = rel(&mut kg, GRANDPARENT_OF);
    let sibling_of = rel(&mut kg, SIBLING_OF);
    let married_to = rel(&mut kg, MARRIED_TO);
    let relative_of = rel(&mut kg, RELATIVE_OF);

    let rules = vec![
        Rule::new(RuleKind::Symmetric, vec![spouse], 1.0)?,
        Rule::new(RuleKind::Symmetric, vec![sibling_of], 1.0)?,
        Rule::new(RuleKind::Inverse, vec![parent_of, child_of], 1.0)?,
        Rule::new(RuleKind::Composition, vec![parent_of, parent_of, grandparent_of], 1.0)?,
        Rule::new(RuleKind::Irreflexive, vec![parent_of], 1.0)?,
        Rule::new(RuleKind::Equivalence, vec![spouse, married_to], 1.0)?,
        Rule::new(RuleKind::Implication, vec![sibling_of, relative_of], 1.0)?,
        Rule::new(RuleKind::Implication, vec![spouse, relative_of], 1.0)?,
    ];

    let mut people = 0usize;
    let mut fresh = |kg: &mut KnowledgeGraph| {
        let id = kg.intern_entity(&format!("person{people}"));
        people += 1;
        id
    };
    let mut unmarried = Vec::new();
    let mut base = Vec::new();
    for family in 0..config.num_families {
        let first = if family > 0 && !unmarried.is_empty() {
            let pick = rng.gen_range(0..unmarried.len());
            unmarried.swap_remove(pick)
        } else {
            fresh(&mut kg)
        };
        let second = fresh(&mut kg);
        base.push(Triple { head: first, relation: spouse, tail: second });
        let children: Vec<_> = (0..CHILDREN_PER_FAMILY).map(|_| fresh(&mut kg)).collect();
        for &parent in &[first, second] {
            for &child in &children {
                base.push(Triple { head: parent, relation: parent_of, tail: child });
            }
        }
        for (i, &a) in children.iter().enumerate() {
            for &b in &children[i + 1..] {
                base.push(Triple { head: a, relation: sibling_of, tail: b });
            }
        }
        unmarried.extend(children);
    }

    let closure = forward_chain(&base, &rules);
    let base_set: BTreeSet<Triple> = base.iter().copied().collect();
    let mut derived: Vec<Triple> = closure.difference(&base_set).copied().collect();
    derived.sort();
    derived.shuffle(&mut rng);
    let held = (config.holdout_fraction * derived.len() as f64).round() as usize;
    let (held_out, kept) = derived.split_at(held);
    let (valid, test) = held_out.split_at(held / 2);
    let mut kept = kept.to_vec();
    kept.sort();

    for &t in base.iter().chain(&kept) {
        kg.add_triple(Split::Train, t, DuplicatePolicy::Reject)?;
    }
    for &t in valid {
        kg.add_triple(Split::Valid, t, DuplicatePolicy::Reject)?;
    }
    for &t in test {
        kg.add_triple(Split::Test, t, DuplicatePolicy::Reject)?;
    }
    Ok((kg, rules))
}

/// Least fixpoint of `facts` under the positive rules. Rules with a negative
/// conclusion (antisymmetric, negation, irreflexive) derive nothing.
pub(crate) fn forward_chain(facts: &[Triple], rules: &[Rule]) -> BTreeSet<Triple> {
    let mut known: BTreeSet<Triple> = facts.iter().copied().collect();
    loop {
        let mut new = Vec::new();
        for rule in rules {
            derive(rule, &known, &mut new);
        }
        let before = known.len();
        known.extend(new);
        if known.len() == before {
            return known;
        }
    }
}

fn derive(rule: &Rule, known: &BTreeSet<Triple>, out: &mut Vec<Triple>) {
    let of = |r: RelationId| known.iter().filter(move |t| t.relation == r);
    let rel = rule.relations();
    let mk = |h, r, t| Triple { head: h, relation: r, tail: t };
    match rule.kind() {
        RuleKind::Symmetric => out.extend(of(rel[0]).map(|t| mk(t.tail, rel[0], t.head))),
        RuleKind::Implication => out.extend(of(rel[0]).map(|t| mk(t.head, rel[1], t.tail))),
        RuleKind::Equivalence => {
            out.extend(of(rel[0]).map(|t| mk(t.head, rel[1], t.tail)));
            out.extend(of(rel[1]).map(|t| mk(t.head, rel[0], t.tail)));
        }
        RuleKind::Inverse => {
            out.extend(of(rel[0]).map(|t| mk(t.tail, rel[1], t.head)));
            out.extend(of(rel[1]).map(|t| mk(t.tail, rel[0], t.head)));
        }
        RuleKind::Transitive | RuleKind::Composition => {
            let (r1, r2, r3) = if rule.kind() == RuleKind::Transitive {
                (rel[0], rel[0], rel[0])
            } else {
                (rel[0], rel[1], rel[2])
            };
            for a in of(r1) {
                for b in of(r2).filter(|b| b.head == a.tail) {
                    out.push(mk(a.head, r3, b.tail));
                }
            }
        }
        RuleKind::Reflexive => {
            for t in of(rel[0]) {
                out.push(mk(t.head, rel[0], t.head));
                out.push(mk(t.tail, rel[0], t.tail));
            }
        }
        RuleKind::Antisymmetric | RuleKind::Negation | RuleKind::Irreflexive => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_triples(kg: &KnowledgeGraph) -> Vec<Triple> {
        Split::ALL.iter().flat_map(|&s| kg.triples(s).to_vec()).collect()
    }

    #[test]
    fn single_family_has_four_people() {
        let (kg, rules) = generate_family_kg(1, 7).unwrap();
        assert_eq!(kg.num_entities(), 4);
        assert_eq!(rules.len(), 8);
        let spouse = kg.relation_id(SPOUSE).unwrap();
        let all = all_triples(&kg);
        let couple: Vec<_> = all.iter().filter(|t| t.relation == spouse).collect();
        assert_eq!(couple.len(), 2);
        assert!(couple.iter().any(|a| couple.iter().any(|b| a.head == b.tail && a.tail == b.head)));
    }

    #[test]
    fn same_seed_same_output() {
        let (a, _) = generate_family_kg(6, 3).unwrap();
        let (b, _) = generate_family_kg(6, 3).unwrap();
        for s in Split::ALL {
            assert_eq!(a.triples(s), b.triples(s));
        }
        let (c, _) = generate_family_kg(6, 4).unwrap();
        assert_ne!(a.train(), c.train());
    }

    #[test]
    fn zero_families_rejected() {
        assert!(matches!(generate_family_kg(0, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn held_out_triples_follow_from_train() {
        let (kg, rules) = generate_family_kg(10, 11).unwrap();
        assert!(!kg.test().is_empty());
        let closure = forward_chain(kg.train(), &rules);
        for t in kg.valid().iter().chain(kg.test()) {
            assert!(closure.contains(t), "{t} not derivable");
            assert!(!kg.in_train(t));
        }
    }

    #[test]
    fn later_families_produce_grandparents() {
        let (kg, _) = generate_family_kg(8, 5).unwrap();
        let gp = kg.relation_id(GRANDPARENT_OF).unwrap();
        assert!(all_triples(&kg).iter().any(|t| t.relation == gp));
    }
}

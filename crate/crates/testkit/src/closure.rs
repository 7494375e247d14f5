use std::collections::BTreeSet;

use logicenn::kg::{Rule, RuleKind, Triple};

/// Fixpoint of the positive rule kinds applied to `facts`, by repeated full
/// passes over the fact list. Negative kinds (antisymmetric, negation,
/// irreflexive) derive nothing.
pub fn naive_closure(facts: &[Triple], rules: &[Rule]) -> BTreeSet<(usize, usize, usize)> {
    let mut all: Vec<(usize, usize, usize)> = facts.iter().map(|t| (t.head.0, t.relation.0, t.tail.0)).collect();
    all.sort();
    all.dedup();
    loop {
        let mut new = Vec::new();
        for rule in rules {
            let r: Vec<usize> = rule.relations().iter().map(|x| x.0).collect();
            for &(h, rel, t) in &all {
                match rule.kind() {
                    RuleKind::Symmetric if rel == r[0] => new.push((t, rel, h)),
                    RuleKind::Inverse if rel == r[0] => new.push((t, r[1], h)),
                    RuleKind::Inverse if rel == r[1] => new.push((t, r[0], h)),
                    RuleKind::Implication if rel == r[0] => new.push((h, r[1], t)),
                    RuleKind::Equivalence if rel == r[0] => new.push((h, r[1], t)),
                    RuleKind::Equivalence if rel == r[1] => new.push((h, r[0], t)),
                    RuleKind::Reflexive if rel == r[0] => {
                        new.push((h, rel, h));
                        new.push((t, rel, t));
                    }
                    RuleKind::Transitive | RuleKind::Composition => {
                        let (r1, r2, r3) = if rule.kind() == RuleKind::Transitive { (r[0], r[0], r[0]) } else { (r[0], r[1], r[2]) };
                        if rel == r1 {
                            for &(h2, rel2, t2) in &all {
                                if rel2 == r2 && h2 == t {
                                    new.push((h, r3, t2));
                                }
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
        let before = all.len();
        all.extend(new);
        all.sort();
        all.dedup();
        if all.len() == before {
            return all.into_iter().collect();
        }
    }
}

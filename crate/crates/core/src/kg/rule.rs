use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use super::{KnowledgeGraph, RelationId};
use crate::error::{Error, Result};

/// The ten rule shapes the engine can inject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleKind {
    Equivalence,
    Implication,
    Symmetric,
    Antisymmetric,
    Inverse,
    Transitive,
    Composition,
    Negation,
    Reflexive,
    Irreflexive,
}

impl RuleKind {
    pub const ALL: [RuleKind; 10] = [
        RuleKind::Equivalence,
        RuleKind::Implication,
        RuleKind::Symmetric,
        RuleKind::Antisymmetric,
        RuleKind::Inverse,
        RuleKind::Transitive,
        RuleKind::Composition,
        RuleKind::Negation,
        RuleKind::Reflexive,
        RuleKind::Irreflexive,
    ];

    /// Number of relations the rule mentions.
    pub fn arity(self) -> usize {
        match self {
            RuleKind::Symmetric
            | RuleKind::Antisymmetric
            | RuleKind::Transitive
            | RuleKind::Reflexive
            | RuleKind::Irreflexive => 1,
            RuleKind::Equivalence | RuleKind::Implication | RuleKind::Inverse | RuleKind::Negation => 2,
            RuleKind::Composition => 3,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            RuleKind::Equivalence => "equivalence",
            RuleKind::Implication => "implication",
            RuleKind::Symmetric => "symmetric",
            RuleKind::Antisymmetric => "antisymmetric",
            RuleKind::Inverse => "inverse",
            RuleKind::Transitive => "transitive",
            RuleKind::Composition => "composition",
            RuleKind::Negation => "negation",
            RuleKind::Reflexive => "reflexive",
            RuleKind::Irreflexive => "irreflexive",
        }
    }

    /// Position in [`RuleKind::ALL`], used to index per-kind tables.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Kinds whose constraint reduces to the relation vectors alone when the
    /// final hidden features are nonnegative.
    pub fn supports_grounding_free(self) -> bool {
        matches!(self, RuleKind::Implication | RuleKind::Equivalence)
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for RuleKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        RuleKind::ALL
            .iter()
            .copied()
            .find(|k| k.token().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown rule kind `{s}`"))
    }
}

/// A rule over relation ids. For composition the reading is
/// `(h, r1, t) ∧ (t, r2, s) ⇒ (h, r3, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    kind: RuleKind,
    relations: Vec<RelationId>,
    confidence: f64,
}

impl Rule {
    pub fn new(kind: RuleKind, relations: Vec<RelationId>, confidence: f64) -> Result<Self> {
        if relations.len() != kind.arity() {
            return Err(Error::Argument(format!(
                "{kind} takes {} relations, got {}",
                kind.arity(),
                relations.len()
            )));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Argument(format!("confidence {confidence} outside [0, 1]")));
        }
        Ok(Rule {
            kind,
            relations,
            confidence,
        })
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn relations(&self) -> &[RelationId] {
        &self.relations
    }

    pub fn relation(&self, i: usize) -> RelationId {
        self.relations[i]
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }
}

/// Rules parsed from a rule file together with what was dropped.
#[derive(Debug, Clone, Default)]
pub struct RuleLoad {
    pub rules: Vec<Rule>,
    pub below_threshold: usize,
    pub unknown_relation: usize,
}

/// Parses `kind\trel1[\trel2[\trel3]]\tconfidence` lines, keeping rules with
/// confidence ≥ `min_confidence` whose relations are known to `graph`.
pub fn load_rules(path: impl AsRef<Path>, graph: &KnowledgeGraph, min_confidence: f64) -> Result<RuleLoad> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut load = RuleLoad::default();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let kind: RuleKind = fields[0]
            .parse()
            .map_err(|msg: String| Error::parse(path, line_no, msg))?;
        if fields.len() != kind.arity() + 2 {
            return Err(Error::parse(
                path,
                line_no,
                format!(
                    "{kind} expects {} relations and a confidence, found {} fields",
                    kind.arity(),
                    fields.len()
                ),
            ));
        }
        let confidence: f64 = fields[fields.len() - 1].parse().map_err(|_| {
            Error::parse(path, line_no, format!("bad confidence `{}`", fields[fields.len() - 1]))
        })?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::parse(path, line_no, format!("confidence {confidence} outside [0, 1]")));
        }
        let names = &fields[1..fields.len() - 1];
        let ids: Option<Vec<RelationId>> = names.iter().map(|n| graph.relation_id(n)).collect();
        let Some(relations) = ids else {
            log::warn!("{}:{line_no}: skipping rule with unknown relation", path.display());
            load.unknown_relation += 1;
            continue;
        };
        if confidence < min_confidence {
            load.below_threshold += 1;
            continue;
        }
        load.rules.push(Rule::new(kind, relations, confidence)?);
    }
    Ok(load)
}

pub fn write_rules(path: impl AsRef<Path>, rules: &[Rule], graph: &KnowledgeGraph) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for rule in rules {
        let mut line = rule.kind.token().to_owned();
        for &r in &rule.relations {
            line.push('\t');
            line.push_str(graph.relation_name(r));
        }
        writeln!(out, "{line}\t{}", rule.confidence).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

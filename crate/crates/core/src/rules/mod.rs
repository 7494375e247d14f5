//! Rule injection: grounding rules against the training graph, hinge
//! penalties for each rule kind (grounded and grounding-free), per-kind
//! slack variables and the relation-difference diagnostics.

mod grounding;
mod penalty;

pub use grounding::{ground_rule, Grounding};
pub use penalty::{
    hinge_arguments, penalty, penalty_grounding_free, penalty_grounding_free_into, penalty_into,
};

use std::fmt;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, RelationId, Rule, RuleKind};
use crate::model::ModelParameters;

/// One nonnegative slack per rule kind, shared by all rules of that kind.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlackConfig {
    values: [f64; 10],
}

impl SlackConfig {
    pub fn get(&self, kind: RuleKind) -> f64 {
        self.values[kind.index()]
    }

    pub fn set(&mut self, kind: RuleKind, value: f64) -> Result<()> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::Config(format!("slack for {kind} must be a finite value ≥ 0, got {value}")));
        }
        self.values[kind.index()] = value;
        Ok(())
    }

    pub fn with(mut self, kind: RuleKind, value: f64) -> Result<Self> {
        self.set(kind, value)?;
        Ok(self)
    }

    /// Short key used in config files (`slack_eq`, `slack_im`, ...).
    pub fn key(kind: RuleKind) -> &'static str {
        match kind {
            RuleKind::Equivalence => "slack_eq",
            RuleKind::Implication => "slack_im",
            RuleKind::Symmetric => "slack_sy",
            RuleKind::Antisymmetric => "slack_as",
            RuleKind::Inverse => "slack_in",
            RuleKind::Transitive => "slack_tr",
            RuleKind::Composition => "slack_co",
            RuleKind::Negation => "slack_ne",
            RuleKind::Reflexive => "slack_re",
            RuleKind::Irreflexive => "slack_ir",
        }
    }
}

/// A rule with its groundings materialised once before training.
#[derive(Debug, Clone)]
pub struct PreparedRule {
    pub rule: Rule,
    pub groundings: Vec<Grounding>,
    /// Penalised through the relation vectors only.
    pub grounding_free: bool,
}

pub fn prepare_rules(rules: &[Rule], graph: &KnowledgeGraph, grounding_free: bool) -> Result<Vec<PreparedRule>> {
    rules
        .iter()
        .map(|rule| {
            let free = grounding_free && rule.kind().supports_grounding_free();
            Ok(PreparedRule {
                rule: rule.clone(),
                groundings: ground_rule(rule, graph, grounding_free)?,
                grounding_free: free,
            })
        })
        .collect()
}

/// Mean and variance of the elements of `β_r1 − β_r2` for one rule pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaStat {
    pub pair_id: usize,
    pub kind: RuleKind,
    pub r1: RelationId,
    pub r2: RelationId,
    pub mean: f64,
    pub variance: f64,
}

/// Elementwise statistics of `β_r1 − β_r2` for implication/equivalence pairs.
/// The variance is the population variance over the `L` elements.
pub fn delta_statistics(params: &ModelParameters, pairs: &[(RuleKind, RelationId, RelationId)]) -> Result<Vec<DeltaStat>> {
    pairs
        .iter()
        .enumerate()
        .map(|(pair_id, &(kind, r1, r2))| {
            if !kind.supports_grounding_free() {
                return Err(Error::Argument(format!("Δ statistics are defined for implication/equivalence, not {kind}")));
            }
            if r1.0 >= params.num_relations || r2.0 >= params.num_relations {
                return Err(Error::Argument(format!("relation pair ({}, {}) out of range", r1.0, r2.0)));
            }
            let delta: Vec<f64> = params
                .relation(r1)
                .iter()
                .zip(params.relation(r2))
                .map(|(a, b)| a - b)
                .collect();
            let n = delta.len() as f64;
            let mean = delta.iter().sum::<f64>() / n;
            let variance = delta.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            Ok(DeltaStat {
                pair_id,
                kind,
                r1,
                r2,
                mean,
                variance,
            })
        })
        .collect()
}

/// Implication/equivalence pairs of a rule list, in rule order.
pub fn delta_pairs(rules: &[Rule]) -> Vec<(RuleKind, RelationId, RelationId)> {
    rules
        .iter()
        .filter(|r| r.kind().supports_grounding_free())
        .map(|r| (r.kind(), r.relation(0), r.relation(1)))
        .collect()
}

/// `pair_id\tkind\tmean\tvariance` with a header line.
pub fn write_delta_table<W: Write>(out: &mut W, stats: &[DeltaStat]) -> io::Result<()> {
    writeln!(out, "pair_id\tkind\tmean\tvariance")?;
    for s in stats {
        writeln!(out, "{}\t{}\t{}\t{}", s.pair_id, s.kind, s.mean, s.variance)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KindPenalty {
    pub rules: usize,
    pub groundings: usize,
    /// Penalty with every slack at zero.
    pub raw: f64,
    /// Penalty under the configured slack for the kind.
    pub with_slack: f64,
}

/// Rule satisfaction summary: per-kind penalty sums, grounding counts and Δ statistics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PenaltyReport {
    pub kinds: [KindPenalty; 10],
    pub deltas: Vec<DeltaStat>,
    /// Set when groundings were subsampled: the cap applied per rule.
    pub sample_cap: Option<usize>,
}

impl PenaltyReport {
    pub fn kind(&self, kind: RuleKind) -> &KindPenalty {
        &self.kinds[kind.index()]
    }

    pub fn total_raw(&self) -> f64 {
        self.kinds.iter().map(|k| k.raw).sum()
    }

    /// `kind\trules\tgroundings\traw_penalty\tslack_penalty` rows, then the Δ table.
    pub fn write_tsv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "kind\trules\tgroundings\traw_penalty\tslack_penalty")?;
        for kind in RuleKind::ALL {
            let k = self.kind(kind);
            writeln!(out, "{kind}\t{}\t{}\t{}\t{}", k.rules, k.groundings, k.raw, k.with_slack)?;
        }
        writeln!(out)?;
        write_delta_table(out, &self.deltas)
    }
}

impl fmt::Display for PenaltyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).map_err(|_| fmt::Error)?;
        f.write_str(&String::from_utf8_lossy(&buf))
    }
}

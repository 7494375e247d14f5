//! Link-prediction ranking (raw and filtered), MR/MRR/Hits@k aggregation
//! and rule-satisfaction diagnostics.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, Rule, Triple};
use crate::model::ModelParameters;
use crate::rules::{delta_pairs, delta_statistics, ground_rule, hinge_arguments, PenaltyReport, SlackConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Head,
    Tail,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Head => "head",
            Side::Tail => "tail",
        }
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "head" => Ok(Side::Head),
            "tail" => Ok(Side::Tail),
            other => Err(Error::Argument(format!("side must be `head` or `tail`, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Raw,
    /// Candidates forming other train/valid/test triples are skipped.
    Filtered,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Raw => "raw",
            Protocol::Filtered => "filtered",
        }
    }
}

/// How candidates scoring exactly like the true entity are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieMode {
    /// `higher + (ties + 1) / 2`, ties counting the true entity.
    #[default]
    Average,
    /// `higher + ties`: the true entity ranks behind every tie.
    Pessimistic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryRank {
    pub triple: Triple,
    pub side: Side,
    pub raw: f64,
    pub filtered: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub mr: f64,
    pub mrr: f64,
    /// `(k, fraction of ranks ≤ k)` in the order requested.
    pub hits: Vec<(usize, f64)>,
}

impl Metrics {
    pub fn hits_at(&self, k: usize) -> Option<f64> {
        self.hits.iter().find(|(kk, _)| *kk == k).map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub queries: Vec<QueryRank>,
    pub raw: Metrics,
    pub filtered: Metrics,
}

fn candidate_triple(triple: &Triple, side: Side, e: EntityId) -> Triple {
    let mut t = *triple;
    match side {
        Side::Head => t.head = e,
        Side::Tail => t.tail = e,
    }
    t
}

fn rank_in(scores: &[f64], true_idx: usize, keep: impl Fn(usize) -> bool, ties: TieMode) -> f64 {
    let target = scores[true_idx];
    let mut higher = 0usize;
    let mut equal = 0usize;
    for (e, &s) in scores.iter().enumerate() {
        if e == true_idx {
            equal += 1;
        } else if keep(e) {
            if s > target {
                higher += 1;
            } else if s == target {
                equal += 1;
            }
        }
    }
    match ties {
        TieMode::Average => higher as f64 + (equal as f64 + 1.0) / 2.0,
        TieMode::Pessimistic => (higher + equal) as f64,
    }
}

fn side_scores(params: &ModelParameters, triple: &Triple, side: Side) -> Result<(Vec<f64>, usize)> {
    match side {
        Side::Head => Ok((params.score_all_heads(triple.relation, triple.tail)?, triple.head.0)),
        Side::Tail => Ok((params.score_all_tails(triple.head, triple.relation)?, triple.tail.0)),
    }
}

/// Rank of the true entity when `side` of `triple` is replaced by every entity.
pub fn rank_triple(
    params: &ModelParameters,
    graph: &KnowledgeGraph,
    triple: &Triple,
    side: Side,
    protocol: Protocol,
    ties: TieMode,
) -> Result<f64> {
    let q = rank_query(params, graph, triple, side, ties)?;
    Ok(match protocol {
        Protocol::Raw => q.raw,
        Protocol::Filtered => q.filtered,
    })
}

/// Raw and filtered rank from a single scoring pass.
pub fn rank_query(params: &ModelParameters, graph: &KnowledgeGraph, triple: &Triple, side: Side, ties: TieMode) -> Result<QueryRank> {
    let (scores, true_idx) = side_scores(params, triple, side)?;
    let raw = rank_in(&scores, true_idx, |_| true, ties);
    let filtered = rank_in(
        &scores,
        true_idx,
        |e| !graph.is_known(&candidate_triple(triple, side, EntityId(e))),
        ties,
    );
    Ok(QueryRank {
        triple: *triple,
        side,
        raw,
        filtered,
    })
}

/// MR, MRR and Hits@k over pooled ranks.
pub fn aggregate(ranks: &[f64], ks: &[usize]) -> Result<Metrics> {
    if ranks.is_empty() {
        return Err(Error::Argument("cannot aggregate an empty rank list".into()));
    }
    let n = ranks.len() as f64;
    let mr = ranks.iter().sum::<f64>() / n;
    let mrr = ranks.iter().map(|r| 1.0 / r).sum::<f64>() / n;
    let hits = ks
        .iter()
        .map(|&k| (k, ranks.iter().filter(|&&r| r <= k as f64).count() as f64 / n))
        .collect();
    Ok(Metrics { mr, mrr, hits })
}

/// Ranks head and tail of every triple and aggregates both protocols.
/// Queries are independent; the result does not depend on the thread count.
pub fn evaluate(params: &ModelParameters, graph: &KnowledgeGraph, triples: &[Triple], ks: &[usize], ties: TieMode) -> Result<RankingReport> {
    let queries: Vec<(Triple, Side)> = triples
        .iter()
        .flat_map(|&t| [(t, Side::Head), (t, Side::Tail)])
        .collect();
    let queries = queries
        .par_iter()
        .map(|(t, side)| rank_query(params, graph, t, *side, ties))
        .collect::<Result<Vec<_>>>()?;
    let raw: Vec<f64> = queries.iter().map(|q| q.raw).collect();
    let filtered: Vec<f64> = queries.iter().map(|q| q.filtered).collect();
    Ok(RankingReport {
        raw: aggregate(&raw, ks)?,
        filtered: aggregate(&filtered, ks)?,
        queries,
    })
}

impl RankingReport {
    pub fn metrics(&self, protocol: Protocol) -> &Metrics {
        match protocol {
            Protocol::Raw => &self.raw,
            Protocol::Filtered => &self.filtered,
        }
    }

    /// `metric\tprotocol\tvalue` lines.
    pub fn write_metrics<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for protocol in [Protocol::Raw, Protocol::Filtered] {
            let m = self.metrics(protocol);
            writeln!(out, "MR\t{}\t{}", protocol.name(), m.mr)?;
            writeln!(out, "MRR\t{}\t{}", protocol.name(), m.mrr)?;
            for (k, v) in &m.hits {
                writeln!(out, "Hits@{k}\t{}\t{v}", protocol.name())?;
            }
        }
        Ok(())
    }

    /// `head\trel\ttail\tside\traw\tfiltered` per query, names resolved through `graph`.
    pub fn write_ranks<W: Write>(&self, out: &mut W, graph: &KnowledgeGraph) -> io::Result<()> {
        for q in &self.queries {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                graph.entity_name(q.triple.head),
                graph.relation_name(q.triple.relation),
                graph.entity_name(q.triple.tail),
                q.side.name(),
                q.raw,
                q.filtered
            )?;
        }
        Ok(())
    }
}

impl fmt::Display for RankingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut buf = Vec::new();
        self.write_metrics(&mut buf).map_err(|_| fmt::Error)?;
        f.write_str(&String::from_utf8_lossy(&buf))
    }
}

/// Per-kind rule violations of `params` on `graph`, every rule grounded
/// (implication and equivalence included), plus Δ statistics.
///
/// `raw` is the penalty with zero slack; `with_slack` uses `slack`. With
/// `sample = Some((cap, seed))` each rule keeps at most `cap` groundings,
/// drawn uniformly with the given seed.
pub fn rule_satisfaction_report(
    params: &ModelParameters,
    graph: &KnowledgeGraph,
    rules: &[Rule],
    slack: &SlackConfig,
    sample_cap: Option<(usize, u64)>,
) -> Result<PenaltyReport> {
    let mut report = PenaltyReport {
        sample_cap: sample_cap.map(|(cap, _)| cap),
        ..PenaltyReport::default()
    };
    let mut rng = sample_cap.map(|(_, seed)| ChaCha8Rng::seed_from_u64(seed));
    for rule in rules {
        let mut groundings = ground_rule(rule, graph, false)?;
        if let (Some((cap, _)), Some(rng)) = (sample_cap, rng.as_mut()) {
            if groundings.len() > cap {
                let mut picked = sample(rng, groundings.len(), cap).into_vec();
                picked.sort_unstable();
                groundings = picked.into_iter().map(|i| groundings[i].clone()).collect();
                log::info!("{} rule: sampled {cap} groundings", rule.kind());
            }
        }
        let kind = rule.kind();
        let positive = |v: Vec<f64>| v.into_iter().filter(|&x| x > 0.0).sum::<f64>();
        let raw = positive(hinge_arguments(kind, params, &groundings, 0.0)?);
        let with_slack = positive(hinge_arguments(kind, params, &groundings, slack.get(kind))?);
        let entry = &mut report.kinds[kind.index()];
        entry.rules += 1;
        entry.groundings += groundings.len();
        entry.raw += raw;
        entry.with_slack += with_slack;
    }
    report.deltas = delta_statistics(params, &delta_pairs(rules))?;
    Ok(report)
}

//! Mini-batch training with self-adversarial negative sampling, rule
//! penalties, Adam and early stopping on validation MRR.

mod config;
mod optim;
mod sampling;

pub use config::{TrainingConfig, PRESETS};
pub use optim::{adam_step, adam_update, AdamHyper, AdamState};
pub use sampling::{adversarial_weights, sample_negatives, sample_negatives_with, SamplerStats, DEFAULT_MAX_RETRIES};

use std::io::{self, Write};
use std::time::Instant;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{evaluate, TieMode};
use crate::kg::{KnowledgeGraph, Rule, RuleKind};
use crate::model::{Activation, LabeledSample, ModelParameters};
use crate::rules::{penalty_grounding_free_into, penalty_into, prepare_rules, Grounding, PreparedRule};

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Sum over batches of the per-batch mean data loss.
    pub data_loss: f64,
    /// Sum over batches of `confidence · penalty / N_i`, per rule kind.
    pub penalties: [f64; 10],
    /// `data_loss + λ · Σ penalties`.
    pub total: f64,
    pub validation_mrr: Option<f64>,
    pub seconds: f64,
}

impl EpochRecord {
    pub fn penalty_sum(&self) -> f64 {
        self.penalties.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingTrace {
    pub lambda: f64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned (None without a validation set).
    pub best_epoch: Option<usize>,
    pub best_validation_mrr: Option<f64>,
    pub stopped_early: bool,
    /// Zero entity rows replaced during projection.
    pub projection_warnings: usize,
    pub sampler: SamplerStats,
}

impl TrainingTrace {
    pub fn validation_history(&self) -> Vec<(usize, f64)> {
        self.epochs
            .iter()
            .filter_map(|e| e.validation_mrr.map(|m| (e.epoch, m)))
            .collect()
    }

    /// Tab-separated epoch log with a header line.
    pub fn write_tsv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write!(out, "epoch\tdata_loss")?;
        for kind in RuleKind::ALL {
            write!(out, "\tpenalty_{}", kind.token())?;
        }
        writeln!(out, "\ttotal\tvalid_mrr\tseconds")?;
        for e in &self.epochs {
            write!(out, "{}\t{}", e.epoch, e.data_loss)?;
            for p in e.penalties {
                write!(out, "\t{p}")?;
            }
            let mrr = e.validation_mrr.map_or_else(|| "-".to_string(), |m| m.to_string());
            writeln!(out, "\t{}\t{mrr}\t{:.6}", e.total, e.seconds)?;
        }
        Ok(())
    }
}

fn divergence(epoch: usize, batch: usize, message: impl Into<String>) -> Error {
    Error::Divergence {
        epoch,
        batch,
        message: message.into(),
    }
}

/// Trains a fresh model on the train split of `graph`.
pub fn train(graph: &KnowledgeGraph, rules: &[Rule], config: &TrainingConfig) -> Result<(ModelParameters, TrainingTrace)> {
    config.validate()?;
    if graph.train().is_empty() {
        return Err(Error::Argument("training split is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = ModelParameters::init(&config.architecture, graph.num_entities(), graph.num_relations(), &mut rng)?;
    train_from(params, graph, rules, config, &mut rng)
}

/// Continues training `params`; all randomness comes from `rng`.
pub fn train_from(
    mut params: ModelParameters,
    graph: &KnowledgeGraph,
    rules: &[Rule],
    config: &TrainingConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(ModelParameters, TrainingTrace)> {
    config.validate()?;
    params.validate()?;
    if params.num_entities < graph.num_entities() || params.num_relations < graph.num_relations() {
        return Err(Error::Argument("model is smaller than the graph vocabulary".into()));
    }
    for rule in rules {
        if let Some(r) = rule.relations().iter().find(|r| r.0 >= graph.num_relations()) {
            return Err(Error::Argument(format!("rule {} references unknown relation id {}", rule.kind(), r.0)));
        }
    }

    // with λ = 0 the rule structures are never built
    let prepared = if config.lambda > 0.0 {
        prepare_rules(rules, graph, config.grounding_free)?
    } else {
        Vec::new()
    };
    if prepared.iter().any(|p| p.grounding_free) && params.final_activation() != Some(Activation::Relu) {
        return Err(Error::Config(
            "grounding-free rule penalties need a ReLU last hidden layer".into(),
        ));
    }
    for p in &prepared {
        if !p.grounding_free {
            log::debug!("{} rule: {} groundings", p.rule.kind(), p.groundings.len());
        }
    }

    let adam = config.adam();
    let mut state = AdamState::new(&params);
    let mut trace = TrainingTrace {
        lambda: config.lambda,
        ..TrainingTrace::default()
    };
    let mut order: Vec<usize> = (0..graph.train().len()).collect();
    let num_batches = config.batches.min(order.len());
    let mut best: Option<(f64, usize, ModelParameters)> = None;
    let mut stale = 0usize;

    for epoch in 1..=config.max_epochs {
        let started = Instant::now();
        order.shuffle(rng);
        let rule_batches = distribute_groundings(&prepared, num_batches, config.grounding_cap, rng);
        let mut record = EpochRecord {
            epoch,
            data_loss: 0.0,
            penalties: [0.0; 10],
            total: 0.0,
            validation_mrr: None,
            seconds: 0.0,
        };

        for b in 0..num_batches {
            let lo = b * order.len() / num_batches;
            let hi = (b + 1) * order.len() / num_batches;
            let positives: Vec<_> = order[lo..hi].iter().map(|&i| graph.train()[i]).collect();

            let mut samples = Vec::with_capacity(positives.len() * (config.negatives + 1));
            let mut negatives = Vec::with_capacity(positives.len() * config.negatives);
            for pos in &positives {
                negatives.extend(sample_negatives_with(
                    pos,
                    graph,
                    config.negatives,
                    config.negative_retries,
                    rng,
                    &mut trace.sampler,
                ));
            }
            let neg_scores = params.score_batch(&negatives);
            if neg_scores.iter().any(|s| !s.is_finite()) {
                return Err(divergence(epoch, b, "negative scores are not finite"));
            }
            for (i, pos) in positives.iter().enumerate() {
                samples.push(LabeledSample::positive(*pos));
                let range = i * config.negatives..(i + 1) * config.negatives;
                let weights = adversarial_weights(&neg_scores[range.clone()], config.temperature)
                    .map_err(|e| divergence(epoch, b, e.to_string()))?;
                for (t, w) in negatives[range].iter().zip(weights) {
                    samples.push(LabeledSample::negative(*t, w));
                }
            }

            let mut grads = params.zero_gradients();
            let scale = 1.0 / positives.len() as f64;
            let data = params.data_loss_into(&samples, scale, &mut grads)? * scale;

            let mut penalties = [0.0; 10];
            for (p, subsets) in prepared.iter().zip(&rule_batches) {
                let kind = p.rule.kind();
                let conf = p.rule.confidence();
                let slack = config.slack.get(kind);
                let term = if p.grounding_free {
                    let l = params.feature_width() as f64;
                    let (r1, r2) = (p.rule.relation(0), p.rule.relation(1));
                    let weight = config.lambda * conf / l;
                    conf * penalty_grounding_free_into(kind, &params, r1, r2, slack, weight, &mut grads)? / l
                } else {
                    let subset = &subsets[b];
                    if subset.is_empty() {
                        continue;
                    }
                    let n = subset.len() as f64;
                    conf * penalty_into(kind, &params, subset, slack, config.lambda * conf / n, &mut grads)? / n
                };
                penalties[kind.index()] += term;
            }

            let total = data + config.lambda * penalties.iter().sum::<f64>();
            if !total.is_finite() {
                return Err(divergence(epoch, b, format!("loss is {total}")));
            }
            if !grads.is_finite() {
                return Err(divergence(epoch, b, "gradient is not finite"));
            }
            adam_step(&mut params, &grads, &mut state, &adam).map_err(|e| divergence(epoch, b, e.to_string()))?;
            trace.projection_warnings += params.project_entities();

            record.data_loss += data;
            for (acc, p) in record.penalties.iter_mut().zip(penalties) {
                *acc += p;
            }
        }
        record.total = record.data_loss + config.lambda * record.penalty_sum();

        let validate_now = epoch % config.validation_period == 0 || epoch == config.max_epochs;
        if validate_now && !graph.valid().is_empty() {
            let mrr = evaluate(&params, graph, graph.valid(), &[], TieMode::Average)?.filtered.mrr;
            record.validation_mrr = Some(mrr);
            log::info!("epoch {epoch}: loss {:.6}, valid MRR {mrr:.4}", record.total);
            if best.as_ref().map_or(true, |(m, _, _)| mrr > *m) {
                best = Some((mrr, epoch, params.clone()));
                stale = 0;
            } else {
                stale += 1;
            }
        }
        record.seconds = started.elapsed().as_secs_f64();
        trace.epochs.push(record);
        if stale >= config.patience {
            trace.stopped_early = true;
            log::info!("early stop at epoch {epoch}");
            break;
        }
    }

    if trace.sampler.kept_collisions > 0 {
        log::info!(
            "{} negatives still collided with train triples after {} retries and were kept",
            trace.sampler.kept_collisions,
            config.negative_retries
        );
    }
    if trace.projection_warnings > 0 {
        log::warn!("{} zero entity rows were reset during projection", trace.projection_warnings);
    }
    if let Some((mrr, epoch, best_params)) = best {
        trace.best_epoch = Some(epoch);
        trace.best_validation_mrr = Some(mrr);
        params = best_params;
    }
    Ok((params, trace))
}

/// Per rule, per batch: the groundings penalised in that batch this epoch.
/// At most `cap` groundings per rule are drawn, dealt round-robin.
fn distribute_groundings(prepared: &[PreparedRule], batches: usize, cap: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Vec<Grounding>>> {
    prepared
        .iter()
        .map(|p| {
            let mut out = vec![Vec::new(); batches];
            if p.grounding_free {
                return out;
            }
            let picked: Vec<usize> = if p.groundings.len() > cap {
                let mut idx = sample(rng, p.groundings.len(), cap).into_vec();
                idx.sort_unstable();
                idx
            } else {
                (0..p.groundings.len()).collect()
            };
            for (i, g) in picked.into_iter().enumerate() {
                out[i % batches].push(p.groundings[g].clone());
            }
            out
        })
        .collect()
}

//! The scoring network and its hand-derived gradients.
//!
//! A triple `(h, r, t)` is scored by feeding the concatenation `[h; t]` of
//! the two entity embeddings through a stack of dense layers shared by all
//! relations, giving a feature vector `Φ(h, t)`. The relation's output row
//! `β_r` then reads off the score `f_r(h, t) = Φ(h, t) · β_r`. The final
//! layer is linear, so relations live entirely in `β`.

mod checkpoint;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, MAGIC, VERSION};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kg::{EntityId, RelationId, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative given the pre-activation `z` and the output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

/// Logistic function, evaluated without overflow for large |z|.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// How activations are assigned to the hidden layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActivationPlan {
    /// ReLU on every hidden layer.
    #[default]
    ReluAll,
    /// Sigmoid between layers, ReLU on the last hidden layer.
    SigmoidFinalRelu,
}

impl ActivationPlan {
    pub fn tags(self, layers: usize) -> Vec<Activation> {
        (0..layers)
            .map(|i| match self {
                ActivationPlan::ReluAll => Activation::Relu,
                ActivationPlan::SigmoidFinalRelu if i + 1 == layers => Activation::Relu,
                ActivationPlan::SigmoidFinalRelu => Activation::Sigmoid,
            })
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationPlan::ReluAll => "relu",
            ActivationPlan::SigmoidFinalRelu => "sigmoid",
        }
    }
}

impl fmt::Display for ActivationPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationPlan {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "relu" | "relu-all" => Ok(ActivationPlan::ReluAll),
            "sigmoid" | "sigmoid-final-relu" => Ok(ActivationPlan::SigmoidFinalRelu),
            other => Err(format!("unknown activation plan `{other}` (expected relu or sigmoid)")),
        }
    }
}

/// Network shape: embedding width and hidden layer widths.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub embedding_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: ActivationPlan,
}

impl Architecture {
    /// Small default that trains in seconds on synthetic graphs.
    pub fn desk() -> Self {
        Architecture {
            embedding_dim: 32,
            hidden: vec![64, 128, 32],
            activation: ActivationPlan::ReluAll,
        }
    }

    /// Three hidden layers of 1000, 2000 and 200 units over 200-d embeddings.
    pub fn full_scale(activation: ActivationPlan) -> Self {
        Architecture {
            embedding_dim: 200,
            hidden: vec![1000, 2000, 200],
            activation,
        }
    }
}

/// Dense layer, weights stored row-major as `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.inputs..(i + 1) * self.inputs]
    }

    fn same_shape(&self, other: &Dense) -> bool {
        self.inputs == other.inputs
            && self.outputs == other.outputs
            && self.weights.len() == other.weights.len()
            && self.bias.len() == other.bias.len()
    }
}

/// All trainable state: entity embeddings, shared hidden layers and the
/// per-relation output rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub dim: usize,
    pub num_entities: usize,
    pub num_relations: usize,
    /// `num_entities × dim`, row-major.
    pub entity_embeddings: Vec<f64>,
    pub layers: Vec<Dense>,
    pub activations: Vec<Activation>,
    /// `num_relations × L`, row-major, `L` the last hidden width.
    pub relation_outputs: Vec<f64>,
}

/// Gradient buffers laid out exactly like [`ModelParameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub entity_embeddings: Vec<f64>,
    pub layers: Vec<Dense>,
    pub relation_outputs: Vec<f64>,
}

/// One term of the data loss: `weight · log(1 + exp(−label · f))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample {
    pub triple: Triple,
    pub label: f64,
    pub weight: f64,
}

impl LabeledSample {
    pub fn positive(triple: Triple) -> Self {
        LabeledSample {
            triple,
            label: 1.0,
            weight: 1.0,
        }
    }

    pub fn negative(triple: Triple, weight: f64) -> Self {
        LabeledSample {
            triple,
            label: -1.0,
            weight,
        }
    }
}

/// Activations of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Forward {
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl Forward {
    /// The final hidden features Φ.
    pub fn features(&self) -> &[f64] {
        self.post.last().map(Vec::as_slice).unwrap_or(&self.input)
    }
}

const REDUCTION_CHUNKS: usize = 8;
const MIN_PARALLEL_ITEMS: usize = 64;

impl ModelParameters {
    /// Randomly initialised parameters with unit-norm entity rows. Every
    /// matrix is drawn from `U(−√(6/(fan_in+fan_out)), +√(6/(fan_in+fan_out)))`,
    /// biases start at zero.
    pub fn init<R: Rng + ?Sized>(arch: &Architecture, num_entities: usize, num_relations: usize, rng: &mut R) -> Result<Self> {
        if arch.embedding_dim == 0 || arch.hidden.is_empty() || arch.hidden.contains(&0) {
            return Err(Error::Argument(format!("degenerate architecture {arch:?}")));
        }
        let d = arch.embedding_dim;
        let mut uniform = |n: usize, fan_in: usize, fan_out: usize| -> Vec<f64> {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
        };
        let entity_embeddings = uniform(num_entities * d, num_entities, d);
        let mut layers = Vec::with_capacity(arch.hidden.len());
        let mut width = 2 * d;
        for &out in &arch.hidden {
            layers.push(Dense {
                inputs: width,
                outputs: out,
                weights: uniform(width * out, width, out),
                bias: vec![0.0; out],
            });
            width = out;
        }
        let relation_outputs = uniform(num_relations * width, num_relations, width);
        let mut params = ModelParameters {
            dim: d,
            num_entities,
            num_relations,
            entity_embeddings,
            layers,
            activations: arch.activation.tags(arch.hidden.len()),
            relation_outputs,
        };
        params.project_entities();
        Ok(params)
    }

    /// Width `L` of the feature vector Φ.
    pub fn feature_width(&self) -> usize {
        self.layers.last().map_or(2 * self.dim, |l| l.outputs)
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.outputs).collect()
    }

    /// Checks that every tensor has the size its declared shape implies.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Internal(msg));
        if self.entity_embeddings.len() != self.num_entities * self.dim {
            return bad(format!(
                "entity matrix has {} values, expected {}×{}",
                self.entity_embeddings.len(),
                self.num_entities,
                self.dim
            ));
        }
        if self.activations.len() != self.layers.len() {
            return bad("one activation per hidden layer required".into());
        }
        let mut width = 2 * self.dim;
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.inputs != width
                || layer.weights.len() != layer.inputs * layer.outputs
                || layer.bias.len() != layer.outputs
            {
                return bad(format!("hidden layer {k} does not chain from width {width}"));
            }
            width = layer.outputs;
        }
        if self.relation_outputs.len() != self.num_relations * width {
            return bad(format!(
                "relation matrix has {} values, expected {}×{width}",
                self.relation_outputs.len(),
                self.num_relations
            ));
        }
        Ok(())
    }

    /// `N_e·d + Σ_k (in_k·out_k + out_k) + N_r·L`.
    pub fn parameter_count(&self) -> usize {
        self.entity_embeddings.len()
            + self
                .layers
                .iter()
                .map(|l| l.weights.len() + l.bias.len())
                .sum::<usize>()
            + self.relation_outputs.len()
    }

    pub fn final_activation(&self) -> Option<Activation> {
        self.activations.last().copied()
    }

    pub fn entity(&self, e: EntityId) -> &[f64] {
        &self.entity_embeddings[e.0 * self.dim..(e.0 + 1) * self.dim]
    }

    pub fn relation(&self, r: RelationId) -> &[f64] {
        let l = self.feature_width();
        &self.relation_outputs[r.0 * l..(r.0 + 1) * l]
    }

    pub fn relation_mut(&mut self, r: RelationId) -> &mut [f64] {
        let l = self.feature_width();
        &mut self.relation_outputs[r.0 * l..(r.0 + 1) * l]
    }

    fn check_entity(&self, e: EntityId) -> Result<()> {
        if e.0 < self.num_entities {
            Ok(())
        } else {
            Err(Error::Argument(format!(
                "entity id {} out of range ({} entities)",
                e.0, self.num_entities
            )))
        }
    }

    fn check_relation(&self, r: RelationId) -> Result<()> {
        if r.0 < self.num_relations {
            Ok(())
        } else {
            Err(Error::Argument(format!(
                "relation id {} out of range ({} relations)",
                r.0, self.num_relations
            )))
        }
    }

    fn check_triple(&self, t: &Triple) -> Result<()> {
        self.check_entity(t.head)?;
        self.check_relation(t.relation)?;
        self.check_entity(t.tail)
    }

    fn run_layers(&self, input: Vec<f64>, first_pre: Option<Vec<f64>>) -> Forward {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (k, (layer, act)) in self.layers.iter().zip(&self.activations).enumerate() {
            let z = match (k, &first_pre) {
                (0, Some(z)) => z.clone(),
                _ => {
                    let x = if k == 0 { &input } else { &post[k - 1] };
                    (0..layer.outputs)
                        .map(|i| dot(layer.row(i), x) + layer.bias[i])
                        .collect::<Vec<f64>>()
                }
            };
            let a = z.iter().map(|&v| act.apply(v)).collect();
            pre.push(z);
            post.push(a);
        }
        Forward { input, pre, post }
    }

    /// Forward pass for the entity pair `(h, t)`; ids must be in range.
    pub fn forward_pair(&self, h: EntityId, t: EntityId) -> Forward {
        let mut input = Vec::with_capacity(2 * self.dim);
        input.extend_from_slice(self.entity(h));
        input.extend_from_slice(self.entity(t));
        self.run_layers(input, None)
    }

    /// Feature vector Φ(h, t).
    pub fn features(&self, h: EntityId, t: EntityId) -> Result<Vec<f64>> {
        self.check_entity(h)?;
        self.check_entity(t)?;
        Ok(self.forward_pair(h, t).features().to_vec())
    }

    pub fn score(&self, h: EntityId, r: RelationId, t: EntityId) -> Result<f64> {
        self.score_triple(&Triple { head: h, relation: r, tail: t })
    }

    pub fn score_triple(&self, triple: &Triple) -> Result<f64> {
        self.check_triple(triple)?;
        let fwd = self.forward_pair(triple.head, triple.tail);
        Ok(dot(fwd.features(), self.relation(triple.relation)))
    }

    /// Scores of `(h, r, e)` for every entity `e`.
    pub fn score_all_tails(&self, h: EntityId, r: RelationId) -> Result<Vec<f64>> {
        self.check_entity(h)?;
        self.check_relation(r)?;
        Ok(self.score_all(h, r, true))
    }

    /// Scores of `(e, r, t)` for every entity `e`.
    pub fn score_all_heads(&self, r: RelationId, t: EntityId) -> Result<Vec<f64>> {
        self.check_entity(t)?;
        self.check_relation(r)?;
        Ok(self.score_all(t, r, false))
    }

    // The fixed entity's half of the first layer is computed once.
    fn score_all(&self, fixed: EntityId, r: RelationId, fixed_is_head: bool) -> Vec<f64> {
        let d = self.dim;
        let first = &self.layers[0];
        let (fixed_cols, free_cols) = if fixed_is_head { (0..d, d..2 * d) } else { (d..2 * d, 0..d) };
        let fixed_vec = self.entity(fixed);
        let partial: Vec<f64> = (0..first.outputs)
            .map(|i| dot(&first.row(i)[fixed_cols.clone()], fixed_vec) + first.bias[i])
            .collect();
        let beta = self.relation(r);
        (0..self.num_entities)
            .map(|e| {
                let free = self.entity(EntityId(e));
                let z: Vec<f64> = (0..first.outputs)
                    .map(|i| partial[i] + dot(&first.row(i)[free_cols.clone()], free))
                    .collect();
                let fwd = self.run_layers(Vec::new(), Some(z));
                dot(fwd.features(), beta)
            })
            .collect()
    }

    /// Gradient buffers of matching shape, all zero.
    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            entity_embeddings: vec![0.0; self.entity_embeddings.len()],
            layers: self.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect(),
            relation_outputs: vec![0.0; self.relation_outputs.len()],
        }
    }

    /// Data loss `Σ weight·log(1 + exp(−label·f))` over `batch` and its
    /// gradient, plus `extra` (accumulated rule-penalty gradients) if given.
    pub fn backward(&self, batch: &[LabeledSample], extra: Option<&Gradients>) -> Result<(f64, Gradients)> {
        let mut grads = self.zero_gradients();
        if let Some(extra) = extra {
            grads.add_scaled(extra, 1.0)?;
        }
        let loss = self.data_loss_into(batch, 1.0, &mut grads)?;
        Ok((loss, grads))
    }

    /// Adds `scale ×` the data-loss gradient into `grads`; returns the unscaled loss.
    pub fn data_loss_into(&self, batch: &[LabeledSample], scale: f64, grads: &mut Gradients) -> Result<f64> {
        for s in batch {
            if s.label != 1.0 && s.label != -1.0 {
                return Err(Error::Argument(format!("label {} not in {{+1, -1}}", s.label)));
            }
            if !(s.weight >= 0.0) {
                return Err(Error::Argument(format!("sample weight {} is negative", s.weight)));
            }
            self.check_triple(&s.triple)?;
        }
        let scores = self.score_batch(batch.iter().map(|s| s.triple).collect::<Vec<_>>().as_slice());
        let mut loss = 0.0;
        let mut coeffs = Vec::with_capacity(batch.len());
        for (s, &f) in batch.iter().zip(&scores) {
            loss += s.weight * softplus(-s.label * f);
            // d/df log(1 + exp(−y f)) = −y σ(−y f)
            coeffs.push((s.triple, scale * s.weight * (-s.label) * sigmoid(-s.label * f)));
        }
        self.accumulate_score_gradients(&coeffs, grads)?;
        Ok(loss)
    }

    /// Scores for a list of triples (ids assumed valid), in input order.
    pub fn score_batch(&self, triples: &[Triple]) -> Vec<f64> {
        triples
            .par_iter()
            .map(|t| dot(self.forward_pair(t.head, t.tail).features(), self.relation(t.relation)))
            .collect()
    }

    /// Adds `Σ coeff · ∂f(triple)/∂θ` into `grads`. Work is split into a fixed
    /// number of contiguous chunks reduced in order, so the result does not
    /// depend on the thread count.
    pub fn accumulate_score_gradients(&self, items: &[(Triple, f64)], grads: &mut Gradients) -> Result<()> {
        self.check_gradient_shape(grads)?;
        for (t, _) in items {
            self.check_triple(t)?;
        }
        if items.is_empty() {
            return Ok(());
        }
        let chunk = if items.len() < MIN_PARALLEL_ITEMS {
            items.len()
        } else {
            items.len().div_ceil(REDUCTION_CHUNKS)
        };
        let partials: Vec<(Vec<Dense>, Vec<f64>, Vec<f64>)> = items
            .par_chunks(chunk)
            .map(|part| {
                let mut layers: Vec<Dense> = self.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect();
                let mut rel = vec![0.0; self.relation_outputs.len()];
                let mut inputs = vec![0.0; part.len() * 2 * self.dim];
                for ((triple, coeff), input_grad) in part.iter().zip(inputs.chunks_mut(2 * self.dim)) {
                    if *coeff == 0.0 {
                        continue;
                    }
                    let fwd = self.forward_pair(triple.head, triple.tail);
                    self.backprop(&fwd, triple.relation, *coeff, &mut layers, &mut rel, input_grad);
                }
                (layers, rel, inputs)
            })
            .collect();

        let d = self.dim;
        for ((layers, rel, inputs), part) in partials.iter().zip(items.chunks(chunk)) {
            for (acc, g) in grads.layers.iter_mut().zip(layers) {
                add_into(&mut acc.weights, &g.weights);
                add_into(&mut acc.bias, &g.bias);
            }
            add_into(&mut grads.relation_outputs, rel);
            for ((triple, _), input_grad) in part.iter().zip(inputs.chunks(2 * d)) {
                let h = triple.head.0 * d;
                let t = triple.tail.0 * d;
                add_into(&mut grads.entity_embeddings[h..h + d], &input_grad[..d]);
                add_into(&mut grads.entity_embeddings[t..t + d], &input_grad[d..]);
            }
        }
        Ok(())
    }

    fn backprop(
        &self,
        fwd: &Forward,
        relation: RelationId,
        coeff: f64,
        layers: &mut [Dense],
        rel: &mut [f64],
        input_grad: &mut [f64],
    ) {
        let l = self.feature_width();
        let beta = self.relation(relation);
        let phi = fwd.features();
        let rel_row = &mut rel[relation.0 * l..(relation.0 + 1) * l];
        for i in 0..l {
            rel_row[i] += coeff * phi[i];
        }
        let mut upstream: Vec<f64> = beta.iter().map(|b| coeff * b).collect();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let act = self.activations[k];
            let dz: Vec<f64> = upstream
                .iter()
                .zip(fwd.pre[k].iter().zip(&fwd.post[k]))
                .map(|(&g, (&z, &a))| g * act.derivative(z, a))
                .collect();
            let x = if k == 0 { &fwd.input } else { &fwd.post[k - 1] };
            let g = &mut layers[k];
            for i in 0..layer.outputs {
                if dz[i] == 0.0 {
                    continue;
                }
                g.bias[i] += dz[i];
                let row = &mut g.weights[i * layer.inputs..(i + 1) * layer.inputs];
                for (w, &xj) in row.iter_mut().zip(x) {
                    *w += dz[i] * xj;
                }
            }
            let mut below = vec![0.0; layer.inputs];
            for i in 0..layer.outputs {
                if dz[i] == 0.0 {
                    continue;
                }
                for (b, &w) in below.iter_mut().zip(layer.row(i)) {
                    *b += dz[i] * w;
                }
            }
            upstream = below;
        }
        add_into(input_grad, &upstream);
    }

    fn check_gradient_shape(&self, grads: &Gradients) -> Result<()> {
        let ok = grads.entity_embeddings.len() == self.entity_embeddings.len()
            && grads.relation_outputs.len() == self.relation_outputs.len()
            && grads.layers.len() == self.layers.len()
            && grads.layers.iter().zip(&self.layers).all(|(g, l)| g.same_shape(l));
        if ok {
            Ok(())
        } else {
            Err(Error::Internal("gradient buffers do not match parameter shapes".into()))
        }
    }

    /// Rescales every entity row to unit Euclidean norm. Zero rows become the
    /// first basis vector; returns how many such rows were replaced.
    pub fn project_entities(&mut self) -> usize {
        let d = self.dim;
        let mut degenerate = 0;
        for row in self.entity_embeddings.chunks_mut(d) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 && norm.is_finite() {
                row.iter_mut().for_each(|v| *v /= norm);
            } else {
                row.iter_mut().for_each(|v| *v = 0.0);
                if let Some(first) = row.first_mut() {
                    *first = 1.0;
                }
                degenerate += 1;
            }
        }
        if degenerate > 0 {
            log::warn!("{degenerate} entity rows had zero norm and were reset to e_1");
        }
        degenerate
    }

    /// Tensors in canonical order: entities, then (weights, bias) per layer, then relations.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.entity_embeddings];
        for l in &self.layers {
            out.push(&l.weights);
            out.push(&l.bias);
        }
        out.push(&self.relation_outputs);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.entity_embeddings];
        for l in &mut self.layers {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
        }
        out.push(&mut self.relation_outputs);
        out
    }

    /// Appends rows for entities interned after training, drawn uniformly and projected.
    pub fn grow_entities<R: Rng + ?Sized>(&mut self, num_entities: usize, rng: &mut R) {
        if num_entities <= self.num_entities {
            return;
        }
        let bound = (6.0 / (num_entities + self.dim) as f64).sqrt();
        let start = self.entity_embeddings.len();
        for _ in start..num_entities * self.dim {
            self.entity_embeddings.push(rng.gen_range(-bound..=bound));
        }
        self.num_entities = num_entities;
        let d = self.dim;
        for row in self.entity_embeddings[start..].chunks_mut(d) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
}

impl Gradients {
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.entity_embeddings];
        for l in &self.layers {
            out.push(&l.weights);
            out.push(&l.bias);
        }
        out.push(&self.relation_outputs);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.entity_embeddings];
        for l in &mut self.layers {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
        }
        out.push(&mut self.relation_outputs);
        out
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) -> Result<()> {
        let mine = self.tensors_mut();
        let theirs = other.tensors();
        if mine.len() != theirs.len() || mine.iter().zip(&theirs).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::Internal("gradient shapes differ".into()));
        }
        for (a, b) in mine.into_iter().zip(theirs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn add_into(acc: &mut [f64], src: &[f64]) {
    for (a, s) in acc.iter_mut().zip(src) {
        *a += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny(seed: u64, plan: ActivationPlan) -> ModelParameters {
        let arch = Architecture {
            embedding_dim: 3,
            hidden: vec![5, 4],
            activation: plan,
        };
        ModelParameters::init(&arch, 3, 2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn zero_relation_outputs_score_zero() {
        let mut p = tiny(1, ActivationPlan::ReluAll);
        p.relation_outputs.iter_mut().for_each(|v| *v = 0.0);
        for h in 0..3 {
            for t in 0..3 {
                assert_eq!(p.score(EntityId(h), RelationId(1), EntityId(t)).unwrap(), 0.0);
            }
        }
        assert!(p.score_all_tails(EntityId(0), RelationId(0)).unwrap().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn constant_feature_network() {
        let p = ModelParameters {
            dim: 2,
            num_entities: 3,
            num_relations: 1,
            entity_embeddings: vec![1.0, 0.0, 0.0, 1.0, 0.6, 0.8],
            layers: vec![Dense {
                inputs: 4,
                outputs: 1,
                weights: vec![0.0; 4],
                bias: vec![1.0],
            }],
            activations: vec![Activation::Relu],
            relation_outputs: vec![2.0],
        };
        p.validate().unwrap();
        for h in 0..3 {
            for t in 0..3 {
                assert_eq!(p.score(EntityId(h), RelationId(0), EntityId(t)).unwrap(), 2.0);
            }
        }
    }

    #[test]
    fn out_of_range_ids_rejected() {
        let p = tiny(2, ActivationPlan::ReluAll);
        assert!(matches!(p.score(EntityId(3), RelationId(0), EntityId(0)), Err(Error::Argument(_))));
        assert!(matches!(p.score(EntityId(0), RelationId(2), EntityId(0)), Err(Error::Argument(_))));
        assert!(p.score_all_heads(RelationId(0), EntityId(9)).is_err());
    }

    #[test]
    fn single_entity_batched_scores() {
        let arch = Architecture { embedding_dim: 2, hidden: vec![3], activation: ActivationPlan::ReluAll };
        let p = ModelParameters::init(&arch, 1, 1, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let all = p.score_all_tails(EntityId(0), RelationId(0)).unwrap();
        assert_eq!(all.len(), 1);
        assert!((all[0] - p.score(EntityId(0), RelationId(0), EntityId(0)).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn positive_at_zero_score_loss_and_slope() {
        let mut p = tiny(4, ActivationPlan::ReluAll);
        p.relation_outputs.iter_mut().for_each(|v| *v = 0.0);
        let triple = Triple::new(0, 0, 1);
        let (loss, grads) = p.backward(&[LabeledSample::positive(triple)], None).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        // with β = 0 the only nonzero gradient is dβ = dL/df · Φ = −0.5 Φ
        let phi = p.features(EntityId(0), EntityId(1)).unwrap();
        let l = p.feature_width();
        for i in 0..l {
            assert!((grads.relation_outputs[i] + 0.5 * phi[i]).abs() < 1e-12);
        }
        assert!(grads.entity_embeddings.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn empty_batch_gives_zero_gradients() {
        let p = tiny(5, ActivationPlan::SigmoidFinalRelu);
        let (loss, grads) = p.backward(&[], None).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grads.max_abs(), 0.0);
    }

    #[test]
    fn bad_labels_and_weights_rejected() {
        let p = tiny(6, ActivationPlan::ReluAll);
        let t = Triple::new(0, 0, 1);
        let bad_label = LabeledSample { triple: t, label: 0.5, weight: 1.0 };
        assert!(p.backward(&[bad_label], None).is_err());
        let bad_weight = LabeledSample { triple: t, label: 1.0, weight: -1.0 };
        assert!(p.backward(&[bad_weight], None).is_err());
    }

    #[test]
    fn mismatched_gradient_buffers_are_internal_error() {
        let p = tiny(7, ActivationPlan::ReluAll);
        let mut g = tiny(7, ActivationPlan::ReluAll).zero_gradients();
        g.relation_outputs.pop();
        let err = p.accumulate_score_gradients(&[(Triple::new(0, 0, 1), 1.0)], &mut g).unwrap_err();
        assert!(matches!(err, Error::Internal(_)));
    }

    #[test]
    fn projection_cases() {
        let mut p = ModelParameters {
            dim: 2,
            num_entities: 3,
            num_relations: 0,
            entity_embeddings: vec![3.0, 4.0, 0.6, 0.8, 0.0, 0.0],
            layers: vec![Dense::zeros(4, 1)],
            activations: vec![Activation::Relu],
            relation_outputs: vec![],
        };
        let warnings = p.project_entities();
        assert_eq!(warnings, 1);
        assert!((p.entity_embeddings[0] - 0.6).abs() < 1e-15);
        assert!((p.entity_embeddings[1] - 0.8).abs() < 1e-15);
        assert!((p.entity_embeddings[2] - 0.6).abs() < 1e-12);
        assert!((p.entity_embeddings[3] - 0.8).abs() < 1e-12);
        assert_eq!(&p.entity_embeddings[4..], &[1.0, 0.0]);
    }

    #[test]
    fn parameter_count_formula() {
        let p = tiny(8, ActivationPlan::ReluAll);
        // 3·3 + (6·5 + 5) + (5·4 + 4) + 2·4
        assert_eq!(p.parameter_count(), 9 + 35 + 24 + 8);
    }

    #[test]
    fn plan_tags() {
        use Activation::*;
        assert_eq!(ActivationPlan::ReluAll.tags(3), vec![Relu, Relu, Relu]);
        assert_eq!(ActivationPlan::SigmoidFinalRelu.tags(3), vec![Sigmoid, Sigmoid, Relu]);
    }

    proptest! {
        #[test]
        fn score_is_linear_in_beta(seed in 0u64..500, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let mut p = tiny(seed, ActivationPlan::SigmoidFinalRelu);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbeef);
            let l = p.feature_width();
            let u: Vec<f64> = (0..l).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..l).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = RelationId(0);
            let (h, t) = (EntityId(1), EntityId(2));
            p.relation_mut(r).copy_from_slice(&u);
            let su = p.score(h, r, t).unwrap();
            p.relation_mut(r).copy_from_slice(&v);
            let sv = p.score(h, r, t).unwrap();
            let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
            p.relation_mut(r).copy_from_slice(&mix);
            let sm = p.score(h, r, t).unwrap();
            prop_assert!((sm - (a * su + b * sv)).abs() < 1e-10);
        }

        #[test]
        fn relu_final_features_nonnegative(seed in 0u64..500, h in 0usize..3, t in 0usize..3) {
            for plan in [ActivationPlan::ReluAll, ActivationPlan::SigmoidFinalRelu] {
                let p = tiny(seed, plan);
                let phi = p.features(EntityId(h), EntityId(t)).unwrap();
                prop_assert!(phi.iter().all(|&v| v >= 0.0));
            }
        }

        #[test]
        fn init_rows_are_unit_norm(seed in 0u64..200) {
            let p = tiny(seed, ActivationPlan::ReluAll);
            for row in p.entity_embeddings.chunks(p.dim) {
                let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!((n - 1.0).abs() < 1e-9);
            }
        }
    }
}

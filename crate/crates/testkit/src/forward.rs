use logicenn::model::{Activation, ModelParameters};
use rug::Float;

/// Bits of mantissa used by the exact reference.
pub const PRECISION: u32 = 256;

pub(crate) fn fl(x: f64) -> Float {
    Float::with_val(PRECISION, x)
}

pub(crate) fn logistic(z: &Float) -> Float {
    let e = Float::with_val(PRECISION, -z).exp();
    Float::with_val(PRECISION, 1.0) / (e + 1.0)
}

#[derive(Debug, Clone)]
struct ExactLayer {
    inputs: usize,
    outputs: usize,
    weights: Vec<Float>,
    bias: Vec<Float>,
    relu: bool,
}

/// A copy of the model parameters in 256-bit floating point. The values
/// are converted exactly; every operation afterwards rounds at 256 bits.
#[derive(Debug, Clone)]
pub struct ExactModel {
    dim: usize,
    entities: Vec<Float>,
    layers: Vec<ExactLayer>,
    relations: Vec<Float>,
    width: usize,
}

impl ExactModel {
    pub fn new(params: &ModelParameters) -> Self {
        let flat: Vec<Float> = crate::fd::flatten_params(params).into_iter().map(fl).collect();
        Self::from_flat(params, &flat)
    }

    /// Shapes from `template`, values from `flat` (layout of `flatten_params`).
    pub fn from_flat(template: &ModelParameters, flat: &[Float]) -> Self {
        let mut pos = 0;
        let mut take = |n: usize| {
            let v = flat[pos..pos + n].to_vec();
            pos += n;
            v
        };
        let entities = take(template.entity_embeddings.len());
        let mut layers = Vec::new();
        for (l, act) in template.layers.iter().zip(&template.activations) {
            layers.push(ExactLayer {
                inputs: l.inputs,
                outputs: l.outputs,
                weights: take(l.weights.len()),
                bias: take(l.bias.len()),
                relu: *act == Activation::Relu,
            });
        }
        let relations = take(template.relation_outputs.len());
        ExactModel {
            dim: template.dim,
            entities,
            layers,
            relations,
            width: template.layers.last().map_or(2 * template.dim, |l| l.outputs),
        }
    }

    pub fn preactivations(&self, h: usize, t: usize) -> Vec<Vec<Float>> {
        let d = self.dim;
        let mut x: Vec<Float> = Vec::new();
        for j in 0..d {
            x.push(self.entities[h * d + j].clone());
        }
        for j in 0..d {
            x.push(self.entities[t * d + j].clone());
        }
        let mut all = Vec::new();
        for layer in &self.layers {
            let mut z = Vec::with_capacity(layer.outputs);
            for o in 0..layer.outputs {
                let mut acc = layer.bias[o].clone();
                for i in 0..layer.inputs {
                    acc += Float::with_val(PRECISION, &layer.weights[o * layer.inputs + i] * &x[i]);
                }
                z.push(acc);
            }
            x = z
                .iter()
                .map(|v| {
                    if layer.relu {
                        if *v > 0.0 {
                            v.clone()
                        } else {
                            fl(0.0)
                        }
                    } else {
                        logistic(v)
                    }
                })
                .collect();
            all.push(z);
        }
        all
    }

    pub fn features(&self, h: usize, t: usize) -> Vec<Float> {
        let pre = self.preactivations(h, t);
        let relu = self.layers.last().map_or(true, |l| l.relu);
        pre.last()
            .unwrap()
            .iter()
            .map(|v| {
                if !relu {
                    logistic(v)
                } else if *v > 0.0 {
                    v.clone()
                } else {
                    fl(0.0)
                }
            })
            .collect()
    }

    pub fn score(&self, h: usize, r: usize, t: usize) -> Float {
        let phi = self.features(h, t);
        let mut s = fl(0.0);
        for (i, p) in phi.iter().enumerate() {
            s += Float::with_val(PRECISION, p * &self.relations[r * self.width + i]);
        }
        s
    }

    pub fn relation_value(&self, r: usize, i: usize) -> &Float {
        &self.relations[r * self.width + i]
    }

    pub fn feature_width(&self) -> usize {
        self.width
    }
}

/// Pre-activations of every hidden layer for `(h, t)`, rounded to f64.
pub fn reference_preactivations(params: &ModelParameters, h: usize, t: usize) -> Vec<Vec<f64>> {
    ExactModel::new(params)
        .preactivations(h, t)
        .iter()
        .map(|z| z.iter().map(Float::to_f64).collect())
        .collect()
}

/// Final hidden features for `(h, t)`, rounded to f64.
pub fn reference_features(params: &ModelParameters, h: usize, t: usize) -> Vec<f64> {
    ExactModel::new(params).features(h, t).iter().map(Float::to_f64).collect()
}

/// Score of `(h, r, t)` evaluated in 256-bit arithmetic, rounded to f64.
pub fn reference_forward(params: &ModelParameters, h: usize, r: usize, t: usize) -> f64 {
    ExactModel::new(params).score(h, r, t).to_f64()
}

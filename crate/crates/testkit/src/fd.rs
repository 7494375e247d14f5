use logicenn::model::{Gradients, ModelParameters};
use rug::Float;

use crate::forward::{fl, ExactModel, PRECISION};

/// Central-difference gradient of `f` at `x`.
pub fn central_difference<F: FnMut(&[f64]) -> f64>(x: &[f64], eps: f64, mut f: F) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let up = f(&probe);
        probe[i] = orig - eps;
        let down = f(&probe);
        probe[i] = orig;
        out.push((up - down) / (2.0 * eps));
    }
    out
}

/// Central differences of `f` over every parameter of `params`, with the
/// perturbed values and both evaluations kept in 256-bit precision so the
/// estimate carries no f64 cancellation noise.
pub fn exact_gradient<F: Fn(&ExactModel) -> Float>(params: &ModelParameters, eps: f64, f: F) -> Vec<f64> {
    let mut flat: Vec<Float> = flatten_params(params).into_iter().map(fl).collect();
    let mut out = Vec::with_capacity(flat.len());
    for i in 0..flat.len() {
        let orig = flat[i].clone();
        flat[i] = Float::with_val(PRECISION, &orig + eps);
        let up = f(&ExactModel::from_flat(params, &flat));
        flat[i] = Float::with_val(PRECISION, &orig - eps);
        let down = f(&ExactModel::from_flat(params, &flat));
        flat[i] = orig;
        out.push(((up - down) / (2.0 * eps)).to_f64());
    }
    out
}

/// `|a − b| / max(1e−8, |a| + |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &b)| relative_error(a, b))
        .fold(0.0, f64::max)
}

/// Entities, then weights and bias per layer, then relation rows.
pub fn flatten_params(p: &ModelParameters) -> Vec<f64> {
    let mut v = p.entity_embeddings.clone();
    for l in &p.layers {
        v.extend_from_slice(&l.weights);
        v.extend_from_slice(&l.bias);
    }
    v.extend_from_slice(&p.relation_outputs);
    v
}

pub fn unflatten_params(template: &ModelParameters, flat: &[f64]) -> ModelParameters {
    let mut p = template.clone();
    let mut pos = 0;
    let mut take = |dst: &mut Vec<f64>| {
        let n = dst.len();
        dst.copy_from_slice(&flat[pos..pos + n]);
        pos += n;
    };
    take(&mut p.entity_embeddings);
    for l in &mut p.layers {
        take(&mut l.weights);
        take(&mut l.bias);
    }
    take(&mut p.relation_outputs);
    p
}

pub fn flatten_grads(g: &Gradients) -> Vec<f64> {
    let mut v = g.entity_embeddings.clone();
    for l in &g.layers {
        v.extend_from_slice(&l.weights);
        v.extend_from_slice(&l.bias);
    }
    v.extend_from_slice(&g.relation_outputs);
    v
}

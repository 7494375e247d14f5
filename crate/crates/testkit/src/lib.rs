//! Brute-force oracles and property harnesses for `logicenn`.
//!
//! Nothing here calls into the production scoring, grounding, ranking or
//! optimizer code paths; oracles read parameter tensors through their public
//! fields and recompute everything with plain loops. Scores, losses and
//! penalties are evaluated in 256-bit MPFR arithmetic so finite differences
//! are free of f64 cancellation noise. The memorization harness is the
//! exception: it drives the production model on purpose.

mod adam;
mod closure;
mod fd;
mod forward;
mod gradcheck;
mod graphs;
mod groundings;
mod memorize;
mod ranking;
mod reference;
mod stats;

pub use adam::ReferenceAdam;
pub use closure::naive_closure;
pub use fd::{central_difference, exact_gradient, flatten_grads, flatten_params, max_relative_error, relative_error, unflatten_params};
pub use forward::{ExactModel, PRECISION, reference_features, reference_forward, reference_preactivations};
pub use gradcheck::{
    check_data_loss, check_grounding_free, check_penalty, gradient_summary, GradientSample, GradientSummary, FD_EPSILON,
};
pub use graphs::{random_graph, random_params, random_rule};
pub use groundings::brute_force_groundings;
pub use memorize::{memorization_test, GroundTruthTable, MemorizationConfig, MemorizationReport};
pub use ranking::{aggregate_oracle, brute_force_rank, OracleMetrics};
pub use reference::{
    exact_data_loss, exact_grounding_free_penalty, exact_penalty, near_kink, reference_data_loss,
    reference_grounding_free_penalty, reference_penalty, KINK_MARGIN,
};
pub use stats::two_pass_mean_variance;

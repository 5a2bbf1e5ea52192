use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{compute_loss, Batch, LayerNorms, Model, ModelConfig, Variant};
use crate::data::random_dual_graph;
use crate::error::Result;
use crate::nn::{gradient_check, GradCheckOptions, GradCheckReport};
use crate::sampler::{compute_coefficients, estimate_probabilities, random_walk_sample, SamplerConfig};

/// Finite-difference check of the joint training loss of `model` on `batch`.
/// Meaningful for variants without detached fusion.
pub fn check_gradients(model: &mut Model<f64>, batch: &Batch<f64>, variant: Variant, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let layout = model.layout;
    gradient_check(
        &mut model.params,
        |params| {
            for p in params.iter_mut() {
                p.zero_grad();
            }
            Ok(compute_loss(&layout, params, batch, variant, true)?.total)
        },
        opts,
    )
}

/// Gradient check on a [`random_dual_graph`]: a sampled dual subgraph with
/// estimated `alpha`/`lambda`, every news node labeled and trainable, and a
/// freshly initialized 64-bit model of width `dim` and depth `layers`.
pub fn gradcheck_random(
    n_news: usize,
    n_users: usize,
    dim: usize,
    layers: usize,
    variant: Variant,
    seed: u64,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let graph = random_dual_graph(n_news, n_users, dim, seed)?;
    let sampler = SamplerConfig {
        roots: (n_news / 2).max(1),
        depth: 2,
        subgraphs_per_epoch: None,
        presample_rounds: 2000,
        seed,
    };
    let coefficients = compute_coefficients(&estimate_probabilities(&graph, &sampler)?, &graph)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sub = random_walk_sample(&graph, &sampler, &mut rng)?;
    let norms = LayerNorms::new(&graph);
    let trainable = vec![true; n_news];
    let batch = Batch::<f64>::from_subgraph(&graph, &norms, &sub, Some(&coefficients), &trainable, variant.uses_users())?;
    let config = ModelConfig {
        dim,
        layers,
        ..ModelConfig::default()
    };
    let mut model = Model::<f64>::new(dim, dim, &config, &mut rng)?;
    check_gradients(&mut model, &batch, variant, opts)
}

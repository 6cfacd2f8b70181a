use rand::Rng;

use super::Tensor;

/// Half-width of the Glorot-uniform interval for a `fan_in x fan_out` weight.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Weight drawn uniformly from `[-b, b]` with `b = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let bound = glorot_bound(fan_in, fan_out);
    Tensor::from_fn(fan_in, fan_out, |_, _| rng.random_range(-bound..=bound))
}

use crate::geometry::FEASIBILITY_TOL;
use crate::par::{self, Execution};
use crate::rng::substream;
use crate::uncertainty::{Sampler, UncertainConstraintSet, UniformSampler};

/// Samples per independent substream in [`posterior_violation`].
pub const POSTERIOR_CHUNK: usize = 1000;

/// Fraction of `samples` joint realizations (one draw from every set) under
/// which `x` violates at least one realized row.
///
/// Samples are split into chunks of [`POSTERIOR_CHUNK`], each drawn from its
/// own substream of `seed`, so the result is independent of `exec`.
pub fn posterior_violation(
    x: &[f64],
    sets: &[UncertainConstraintSet],
    samples: usize,
    seed: u64,
    exec: Execution,
) -> f64 {
    if samples == 0 {
        return 0.0;
    }
    let chunks = samples.div_ceil(POSTERIOR_CHUNK);
    let counts = par::map_range(exec, chunks, |c| {
        let mut rng = substream(seed, &[c as u64]);
        let len = POSTERIOR_CHUNK.min(samples - c * POSTERIOR_CHUNK);
        let mut violated = 0usize;
        for _ in 0..len {
            let mut any = false;
            for set in sets {
                let draw = UniformSampler.draw(set, &mut rng);
                any |= set.is_violated(&draw, x, FEASIBILITY_TOL);
            }
            violated += any as usize;
        }
        violated
    });
    counts.iter().sum::<usize>() as f64 / samples as f64
}

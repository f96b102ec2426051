//! Synthetic problems shared by the benchmarks.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use mtfl_core::multitask::TaskSpec;
use mtfl_core::rng::stream;

/// Gaussian design with five active rows whose task profiles are constant
/// within each block of `group_size` tasks, plus noise at a tenth of the
/// signal spread.
pub fn planted(n: usize, d: usize, k: usize, group_size: usize, seed: u64) -> TaskSpec {
    let mut rng = stream(seed, 0);
    let x = Array2::from_shape_simple_fn((n, d), || rng.sample::<f64, _>(StandardNormal));
    let mut w = Array2::zeros((d, k));
    for row in 0..d.min(5) {
        for g in 0..k / group_size {
            let level: f64 = rng.random_range(-1.5..1.5);
            w.row_mut(row)
                .slice_mut(ndarray::s![g * group_size..(g + 1) * group_size])
                .fill(level);
        }
    }
    let signal = x.dot(&w);
    let sd = signal.std(0.0);
    let noise = Array2::from_shape_simple_fn((n, k), || 0.1 * sd * rng.sample::<f64, _>(StandardNormal));
    TaskSpec::new(x, signal + noise, group_size).expect("consistent shapes")
}

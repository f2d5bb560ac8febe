use rand::Rng as _;

use crate::matrix::Matrix;
use crate::rng::{seeded, Rng, Stream};

/// Uniform in `[−a, a)` with `a = sqrt(6 / (rows + cols))`, drawn from `rng`.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    assert!(
        rows > 0 && cols > 0,
        "glorot init needs positive dimensions"
    );
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| bound * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

/// [`glorot_uniform`] from the init stream of `seed`.
pub fn glorot_init(rows: usize, cols: usize, seed: u64) -> Matrix {
    glorot_uniform(rows, cols, &mut seeded(seed, Stream::Init))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_hold() {
        let w = glorot_init(100, 100, 3);
        let bound = (6.0f64 / 200.0).sqrt();
        assert!(w.data().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(glorot_init(4, 7, 9), glorot_init(4, 7, 9));
        assert_ne!(glorot_init(4, 7, 9), glorot_init(4, 7, 10));
    }

    #[test]
    fn mean_is_near_zero() {
        let w = glorot_init(100, 100, 5);
        let bound = (6.0f64 / 200.0).sqrt();
        // uniform on [-a, a]: variance a²/3 per draw
        let sd_of_mean = bound / 3f64.sqrt() / 100.0;
        let mean = w.data().iter().sum::<f64>() / 1e4;
        assert!(mean.abs() <= 4.0 * sd_of_mean, "mean {mean}");
    }
}

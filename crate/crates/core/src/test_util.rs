use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{CooTensor, TensorShape};

/// The 4x8x2 six-nonzero tensor used as the running example.
pub(crate) fn example() -> CooTensor<f64> {
    CooTensor::from_entries(
        TensorShape::new(vec![4, 8, 2]).unwrap(),
        [
            ([0, 3, 0], 1.0),
            ([1, 0, 0], 2.0),
            ([1, 6, 1], 3.0),
            ([2, 2, 1], 4.0),
            ([3, 1, 1], 5.0),
            ([3, 4, 0], 6.0),
        ],
    )
    .unwrap()
}

/// Random canonical tensor with values in [0.5, 2).
pub(crate) fn random_coo(dims: &[usize], nnz: usize, seed: u64) -> CooTensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = TensorShape::new(dims.to_vec()).unwrap();
    let entries: Vec<(Vec<usize>, f64)> = (0..nnz)
        .map(|_| {
            let c: Vec<usize> = dims.iter().map(|&d| rng.random_range(0..d)).collect();
            (c, rng.random_range(0.5..2.0))
        })
        .collect();
    CooTensor::from_entries(shape, entries).unwrap().canonicalize()
}

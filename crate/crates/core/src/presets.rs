//! Standard instances and seeded random instance generators.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{beta_mixture_matrix, uniform_row, zipf_row, Instance};

/// Catalog size of the Zipf/uniform two-user presets.
pub const PRESET_ITEMS: usize = 20;

/// Two users, two items: one user nearly always wants item 1, the other is
/// indifferent. Unit buffers, two chunks per item.
pub fn motivating_example() -> Instance {
    Instance::single_request(vec![vec![0.99, 0.01], vec![0.5, 0.5]], vec![1.0, 1.0], 2)
        .expect("fixed instance is valid")
}

/// Row layouts of the 20-item two-user presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoUserPreset {
    /// Both users follow Zipf with exponent 1.
    BothZipf,
    /// User 1 uniform, user 2 Zipf.
    UniformZipf,
    /// Both users uniform.
    BothUniform,
}

impl TwoUserPreset {
    pub const ALL: [TwoUserPreset; 3] = [Self::BothZipf, Self::UniformZipf, Self::BothUniform];

    pub fn name(self) -> &'static str {
        match self {
            Self::BothZipf => "p1",
            Self::UniformZipf => "p2",
            Self::BothUniform => "p3",
        }
    }

    pub fn rows(self) -> Vec<Vec<f64>> {
        let zipf = zipf_row(PRESET_ITEMS, 1.0);
        let unif = uniform_row(PRESET_ITEMS);
        match self {
            Self::BothZipf => vec![zipf.clone(), zipf],
            Self::UniformZipf => vec![unif, zipf],
            Self::BothUniform => vec![unif.clone(), unif],
        }
    }

    /// The preset with the same buffer size for both users.
    pub fn instance(self, buffer: f64) -> Result<Instance> {
        Instance::single_request(self.rows(), vec![buffer; 2], 1)
    }
}

/// Two users on four items; user 1 moves from uniform (`beta = 0`) to
/// always requesting item 1 (`beta = 1`), user 2 stays uniform.
pub fn beta_instance(beta: f64, buffer: f64) -> Result<Instance> {
    let p = beta_mixture_matrix(beta)?;
    Instance::single_request(p.rows().to_vec(), vec![buffer; 2], 1)
}

/// Three users on four items with decreasingly concentrated preferences.
pub fn three_user_rows() -> Vec<Vec<f64>> {
    vec![
        vec![0.7, 0.2, 0.1, 0.0],
        vec![0.4, 0.3, 0.2, 0.1],
        vec![0.25, 0.25, 0.25, 0.25],
    ]
}

pub fn three_user_instance(buffer: f64, chunks_per_item: usize) -> Result<Instance> {
    Instance::single_request(three_user_rows(), vec![buffer; 3], chunks_per_item)
}

/// A point drawn uniformly from the probability simplex.
pub fn random_row(rng: &mut impl Rng, num_items: usize) -> Vec<f64> {
    let mut row: Vec<f64> = (0..num_items)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln())
        .collect();
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= total);
    row
}

/// Two users, `2 ..= max_items` items, random rows and a shared buffer size
/// drawn from the half-integers strictly between 0 and `N`.
pub fn random_two_user(rng: &mut impl Rng, max_items: usize) -> Result<Instance> {
    if max_items < 2 {
        return Err(Error::InvalidInstance(
            "random two-user instances need N >= 2".into(),
        ));
    }
    let n = rng.gen_range(2..=max_items);
    let rows = vec![random_row(rng, n), random_row(rng, n)];
    let buffer = rng.gen_range(1..2 * n) as f64 / 2.0;
    Instance::single_request(rows, vec![buffer; 2], 1)
}

/// Random single-request instance with `1 ..= max_users` users,
/// `1 ..= max_items` items and `1 ..= max_chunks` chunks per item. Buffer
/// sizes are per user and land on multiples of one chunk.
pub fn random_multiuser(
    rng: &mut impl Rng,
    max_users: usize,
    max_items: usize,
    max_chunks: usize,
) -> Result<Instance> {
    if max_users == 0 || max_items == 0 || max_chunks == 0 {
        return Err(Error::InvalidInstance(
            "random instance bounds must be positive".into(),
        ));
    }
    let k = rng.gen_range(1..=max_users);
    let n = rng.gen_range(1..=max_items);
    let g = rng.gen_range(1..=max_chunks);
    let rows = (0..k).map(|_| random_row(rng, n)).collect();
    let buffers = (0..k)
        .map(|_| rng.gen_range(0..=n * g) as f64 / g as f64)
        .collect();
    Instance::single_request(rows, buffers, g)
}

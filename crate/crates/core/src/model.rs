//! Problem instances: catalog, user buffers, preferences and demand laws.
//!
//! Items and users are zero-based everywhere in the library. The JSON formats
//! handled by [`InstanceFile`] use one-based item ids.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest demand support that is ever materialized.
pub const MAX_SUPPORT: usize = 1_000_000;

const ROW_SUM_TOL: f64 = 1e-9;
const PROB_SUM_TOL: f64 = 1e-12;
const MARGINAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogSpec {
    pub num_items: usize,
    /// Number of equal chunks each item is cut into by the multiuser engine.
    pub chunks_per_item: usize,
}

impl CatalogSpec {
    pub fn new(num_items: usize, chunks_per_item: usize) -> Result<Self> {
        if num_items == 0 {
            return Err(Error::InvalidInstance(
                "catalog must hold at least one item".into(),
            ));
        }
        if chunks_per_item == 0 {
            return Err(Error::InvalidInstance(
                "chunks_per_item must be positive".into(),
            ));
        }
        Ok(Self {
            num_items,
            chunks_per_item,
        })
    }
}

/// Buffer sizes in units of whole items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferSpec {
    capacities: Vec<f64>,
}

impl BufferSpec {
    /// Capacities above `num_items` are clamped; a larger buffer is useless.
    pub fn new(capacities: Vec<f64>, num_items: usize) -> Result<Self> {
        if capacities.is_empty() {
            return Err(Error::InvalidInstance(
                "at least one user is required".into(),
            ));
        }
        let capacities = capacities
            .into_iter()
            .enumerate()
            .map(|(k, b)| {
                if !b.is_finite() || b < 0.0 {
                    Err(Error::InvalidInstance(format!("buffer of user {k} is {b}")))
                } else {
                    Ok(b.min(num_items as f64))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { capacities })
    }

    pub fn num_users(&self) -> usize {
        self.capacities.len()
    }

    pub fn capacity(&self, user: usize) -> f64 {
        self.capacities[user]
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }
}

/// `p[k][n]` is the probability that user `k` requests item `n`. Rows need
/// not sum to one when users may ask for several items at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceMatrix {
    rows: Vec<Vec<f64>>,
}

impl PreferenceMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || width == 0 {
            return Err(Error::InvalidInstance("preference matrix is empty".into()));
        }
        for (k, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::InvalidInstance(format!(
                    "preference row {k} has {} entries, expected {width}",
                    row.len()
                )));
            }
            if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::InvalidInstance(format!(
                    "preference {p} in row {k} is not a probability"
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn num_users(&self) -> usize {
        self.rows.len()
    }

    pub fn num_items(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, user: usize) -> &[f64] {
        &self.rows[user]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, user: usize, item: usize) -> f64 {
        self.rows[user][item]
    }

    /// Expected number of items requested by `user`.
    pub fn row_mass(&self, user: usize) -> f64 {
        self.rows[user].iter().sum()
    }
}

/// One realization of the demand matrix: the set of items each user asks for.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DemandOutcome {
    requested: Vec<BTreeSet<usize>>,
}

impl DemandOutcome {
    pub fn new(requested: Vec<BTreeSet<usize>>) -> Self {
        Self { requested }
    }

    /// Every user asks for exactly one item.
    pub fn singles(items: &[usize]) -> Self {
        Self {
            requested: items.iter().map(|&n| BTreeSet::from([n])).collect(),
        }
    }

    pub fn num_users(&self) -> usize {
        self.requested.len()
    }

    pub fn requested(&self, user: usize) -> &BTreeSet<usize> {
        &self.requested[user]
    }

    pub fn all(&self) -> &[BTreeSet<usize>] {
        &self.requested
    }

    pub fn requests(&self, user: usize, item: usize) -> bool {
        self.requested[user].contains(&item)
    }
}

/// A finitely supported probability measure over demand outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandDistribution {
    support: Vec<(DemandOutcome, f64)>,
}

impl DemandDistribution {
    pub fn new(support: Vec<(DemandOutcome, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidInstance("demand support is empty".into()));
        }
        let users = support[0].0.num_users();
        let mut seen = HashSet::with_capacity(support.len());
        let mut total = 0.0;
        for (outcome, prob) in &support {
            if outcome.num_users() != users {
                return Err(Error::InvalidInstance(
                    "demand outcomes disagree on the number of users".into(),
                ));
            }
            if !prob.is_finite() || *prob < 0.0 {
                return Err(Error::InvalidInstance(format!(
                    "outcome probability {prob}"
                )));
            }
            if !seen.insert(outcome) {
                return Err(Error::InvalidInstance(format!(
                    "duplicate demand outcome {:?}",
                    outcome.all()
                )));
            }
            total += prob;
        }
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidInstance(format!(
                "outcome probabilities sum to {total}"
            )));
        }
        Ok(Self { support })
    }

    pub fn support(&self) -> &[(DemandOutcome, f64)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn num_users(&self) -> usize {
        self.support[0].0.num_users()
    }

    /// `P(item n is requested by user k)` for every `(k, n)`.
    pub fn marginals(&self, num_items: usize) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; num_items]; self.num_users()];
        for (outcome, prob) in &self.support {
            for (k, set) in outcome.all().iter().enumerate() {
                for &n in set {
                    if n < num_items {
                        m[k][n] += prob;
                    }
                }
            }
        }
        m
    }
}

/// Each user independently asks for one item drawn from its preference row.
/// Zero-probability outcomes are left out of the support.
pub fn independent_single_demand(p: &PreferenceMatrix) -> Result<DemandDistribution> {
    for k in 0..p.num_users() {
        let sum = p.row_mass(k);
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::RowNotStochastic { row: k, sum });
        }
    }
    let choices: Vec<Vec<(usize, f64)>> = p
        .rows()
        .iter()
        .map(|row| {
            row.iter()
                .copied()
                .enumerate()
                .filter(|&(_, q)| q > 0.0)
                .collect()
        })
        .collect();
    let size = choices
        .iter()
        .try_fold(1u128, |acc, c| acc.checked_mul(c.len() as u128))
        .unwrap_or(u128::MAX);
    if size > MAX_SUPPORT as u128 {
        return Err(Error::SupportTooLarge {
            size,
            limit: MAX_SUPPORT,
        });
    }

    // Odometer over one choice per user; user 0 is the most significant digit.
    let mut support = Vec::with_capacity(size as usize);
    let mut digits = vec![0usize; choices.len()];
    loop {
        let items: Vec<usize> = digits.iter().zip(&choices).map(|(&d, c)| c[d].0).collect();
        let prob: f64 = digits.iter().zip(&choices).map(|(&d, c)| c[d].1).product();
        support.push((DemandOutcome::singles(&items), prob));

        let mut pos = choices.len();
        loop {
            if pos == 0 {
                return DemandDistribution::new(renormalize(support));
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < choices[pos].len() {
                break;
            }
            digits[pos] = 0;
        }
    }
}

// Rows that sum to 1 within 1e-9 give products summing to 1 within the same
// slack; rescale so the distribution meets its own 1e-12 invariant.
fn renormalize(mut support: Vec<(DemandOutcome, f64)>) -> Vec<(DemandOutcome, f64)> {
    let total: f64 = support.iter().map(|(_, p)| p).sum();
    if (total - 1.0).abs() > PROB_SUM_TOL {
        for (_, p) in &mut support {
            *p /= total;
        }
    }
    support
}

/// Zipf popularity `n^-s / sum_i i^-s` over `n_items` items.
pub fn zipf_row(n_items: usize, exponent: f64) -> Vec<f64> {
    let weights: Vec<f64> = (1..=n_items).map(|i| (i as f64).powf(-exponent)).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

pub fn uniform_row(n_items: usize) -> Vec<f64> {
    vec![1.0 / n_items as f64; n_items]
}

/// Two users over four items; user 1 interpolates from uniform (`beta = 0`)
/// to always requesting the first item (`beta = 1`), user 2 stays uniform.
pub fn beta_mixture_matrix(beta: f64) -> Result<PreferenceMatrix> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::BetaOutOfRange(beta));
    }
    let rest = 0.25 * (1.0 - beta);
    PreferenceMatrix::new(vec![
        vec![0.25 + 0.75 * beta, rest, rest, rest],
        uniform_row(4),
    ])
}

/// Item indices ordered by decreasing probability, ties by lower index.
pub fn popularity_order(row: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    order
}

/// Throughput of a user that caches its `floor(capacity)` most likely items
/// plus the matching fraction of the next one, with no multicast help.
pub fn pure_caching_throughput(row: &[f64], capacity: f64) -> Result<f64> {
    let n = row.len();
    if !(0.0..=n as f64).contains(&capacity) {
        return Err(Error::CapacityOutOfRange {
            capacity,
            num_items: n,
        });
    }
    let whole = capacity.floor() as usize;
    if whole == n {
        return Ok(row.iter().sum());
    }
    let order = popularity_order(row);
    let mut total: f64 = order[..whole].iter().fold(0.0, |acc, &i| acc + row[i]);
    let frac = capacity - whole as f64;
    if frac > 0.0 {
        total += frac * row[order[whole]];
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub catalog: CatalogSpec,
    pub buffers: BufferSpec,
    pub preferences: PreferenceMatrix,
    pub demands: DemandDistribution,
}

impl Instance {
    pub fn new(
        catalog: CatalogSpec,
        buffers: BufferSpec,
        preferences: PreferenceMatrix,
        demands: DemandDistribution,
    ) -> Result<Self> {
        let k = preferences.num_users();
        let n = catalog.num_items;
        if preferences.num_items() != n {
            return Err(Error::InvalidInstance(format!(
                "preferences cover {} items, catalog has {n}",
                preferences.num_items()
            )));
        }
        if buffers.num_users() != k || demands.num_users() != k {
            return Err(Error::InvalidInstance(format!(
                "user count mismatch: {} buffers, {k} preference rows, {} demand users",
                buffers.num_users(),
                demands.num_users()
            )));
        }
        for (outcome, _) in demands.support() {
            if let Some(bad) = outcome.all().iter().flatten().find(|&&i| i >= n) {
                return Err(Error::InvalidInstance(format!(
                    "item {bad} outside catalog"
                )));
            }
        }
        let marginals = demands.marginals(n);
        for (user, (m_row, p_row)) in marginals.iter().zip(preferences.rows()).enumerate() {
            for (item, (m, p)) in m_row.iter().zip(p_row).enumerate() {
                if (m - p).abs() > MARGINAL_TOL {
                    return Err(Error::InvalidInstance(format!(
                        "demand marginal {m} differs from preference {p} at user {user}, item {item}"
                    )));
                }
            }
        }
        Ok(Self {
            catalog,
            buffers,
            preferences,
            demands,
        })
    }

    /// Instance under the independent single-request demand model.
    pub fn single_request(
        rows: Vec<Vec<f64>>,
        buffers: Vec<f64>,
        chunks_per_item: usize,
    ) -> Result<Self> {
        let preferences = PreferenceMatrix::new(rows)?;
        let catalog = CatalogSpec::new(preferences.num_items(), chunks_per_item)?;
        let buffers = BufferSpec::new(buffers, catalog.num_items)?;
        let demands = independent_single_demand(&preferences)?;
        Self::new(catalog, buffers, preferences, demands)
    }

    pub fn num_users(&self) -> usize {
        self.preferences.num_users()
    }

    pub fn num_items(&self) -> usize {
        self.catalog.num_items
    }

    pub fn capacity(&self, user: usize) -> f64 {
        self.buffers.capacity(user)
    }

    /// Pure-caching throughput of every user.
    pub fn pure_caching(&self) -> Vec<f64> {
        (0..self.num_users())
            .map(|k| {
                pure_caching_throughput(self.preferences.row(k), self.capacity(k))
                    .expect("buffers are clamped to the catalog size")
            })
            .collect()
    }

    pub fn require_two_users(&self) -> Result<()> {
        if self.num_users() == 2 {
            Ok(())
        } else {
            Err(Error::InvalidInstance(format!(
                "operation needs exactly 2 users, instance has {}",
                self.num_users()
            )))
        }
    }
}

/// On-disk instance description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub num_items: usize,
    pub chunks_per_item: usize,
    pub buffers: Vec<f64>,
    pub preferences: Vec<Vec<f64>>,
    pub demand_model: DemandModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandModel {
    IndependentSingle,
    Explicit(Vec<ExplicitOutcome>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitOutcome {
    /// One-based item ids requested by each user.
    pub sets: Vec<Vec<usize>>,
    pub prob: f64,
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInstance(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance files always serialize")
    }

    pub fn into_instance(self) -> Result<Instance> {
        let preferences = PreferenceMatrix::new(self.preferences)?;
        let catalog = CatalogSpec::new(self.num_items, self.chunks_per_item)?;
        let buffers = BufferSpec::new(self.buffers, self.num_items)?;
        let demands = match self.demand_model {
            DemandModel::IndependentSingle => independent_single_demand(&preferences)?,
            DemandModel::Explicit(outcomes) => {
                let support = outcomes
                    .into_iter()
                    .map(|o| {
                        let sets = o
                            .sets
                            .into_iter()
                            .map(|ids| {
                                let set: BTreeSet<usize> = ids
                                    .iter()
                                    .map(|&id| {
                                        if id == 0 {
                                            Err(Error::InvalidInstance(
                                                "item ids are one-based".into(),
                                            ))
                                        } else {
                                            Ok(id - 1)
                                        }
                                    })
                                    .collect::<Result<_>>()?;
                                if set.len() != ids.len() {
                                    return Err(Error::InvalidInstance(
                                        "a demand set lists an item twice".into(),
                                    ));
                                }
                                Ok(set)
                            })
                            .collect::<Result<Vec<_>>>()?;
                        Ok((DemandOutcome::new(sets), o.prob))
                    })
                    .collect::<Result<Vec<_>>>()?;
                DemandDistribution::new(support)?
            }
        };
        Instance::new(catalog, buffers, preferences, demands)
    }
}

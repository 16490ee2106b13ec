//! Brute-force cross-checks for the solver and the two-user cost algebra.
//!
//! Everything here is exponential and guarded by size limits. The routines
//! share no code with the paths they check beyond the data types.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpSolution, LpStatus};
use crate::model::{DemandOutcome, Instance};
use crate::multiuser::{
    check_decoding, CacheProfile, ChunkId, CodedChunk, DeliverySchedule, UserSet,
};
use crate::twouser::{expected_throughput, TwoUserPlacement};

pub const MAX_ENUM_VARS: usize = 8;
pub const MAX_ENUM_ROWS: usize = 12;
pub const MAX_GRID_POINTS: u128 = 10_000_000;

const ENUM_TOL: f64 = 1e-9;
const ALIGN_TOL: f64 = 1e-9;

/// Placement fractions restricted to multiples of `1 / resolution`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    resolution: usize,
}

impl GridSpec {
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidInstance(
                "grid resolution must be positive".into(),
            ));
        }
        Ok(Self { resolution })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }
}

/// Solves the square system `m x = rhs` by Gaussian elimination with partial
/// pivoting; `None` if singular.
fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        let pivot_row = m[col].clone();
        for r in 0..n {
            if r != col {
                let f = m[r][col] / pivot_row[col];
                if f != 0.0 {
                    for (x, p) in m[r][col..].iter_mut().zip(&pivot_row[col..]) {
                        *x -= f * p;
                    }
                    rhs[r] -= f * rhs[col];
                }
            }
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

/// Calls `visit` with every `k`-subset of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return;
    }
    loop {
        visit(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Best vertex of `{x >= 0, rows·x <= rhs}` for `objective`, with the active
/// constraint labels of the winner (`j < n` is `x_j >= 0`, `n + i` is row `i`).
fn best_vertex(
    objective: &[f64],
    rows: &[Vec<f64>],
    rhs: &[f64],
) -> Option<(Vec<f64>, f64, Vec<usize>)> {
    let n = objective.len();
    let m = rows.len();
    let mut best: Option<(Vec<f64>, f64, Vec<usize>)> = None;
    for_each_subset(n + m, n, |active| {
        let (mat, b): (Vec<Vec<f64>>, Vec<f64>) = active
            .iter()
            .map(|&c| {
                if c < n {
                    let mut e = vec![0.0; n];
                    e[c] = 1.0;
                    (e, 0.0)
                } else {
                    (rows[c - n].clone(), rhs[c - n])
                }
            })
            .unzip();
        let Some(x) = solve_square(mat, b) else {
            return;
        };
        let feasible = x.iter().all(|&v| v >= -ENUM_TOL)
            && rows
                .iter()
                .zip(rhs)
                .all(|(r, &h)| r.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() <= h + ENUM_TOL);
        if !feasible {
            return;
        }
        let value: f64 = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        if best
            .as_ref()
            .is_none_or(|(_, bv, _)| value > *bv + ENUM_TOL)
        {
            best = Some((x, value, active.to_vec()));
        }
    });
    best
}

/// Maximizes by enumerating every basic solution.
///
/// Unboundedness is detected on the ray polytope
/// `{A d <= 0, d >= 0, sum d <= 1}`: a positive objective there means an
/// improving direction exists.
pub fn lp_vertex_enumerate(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.n_vars();
    let m = lp.n_rows();
    if n > MAX_ENUM_VARS || m > MAX_ENUM_ROWS {
        return Err(Error::TooLarge(format!(
            "{n} variables and {m} rows, limits are {MAX_ENUM_VARS} and {MAX_ENUM_ROWS}"
        )));
    }
    let empty = |status, value| LpSolution {
        status,
        x: Vec::new(),
        value,
        duals: Vec::new(),
        basis: Vec::new(),
        pivots: 0,
    };

    let Some((x, value, active)) = best_vertex(lp.objective(), lp.rows(), lp.rhs()) else {
        return Ok(empty(LpStatus::Infeasible, f64::NEG_INFINITY));
    };

    let mut ray_rows = lp.rows().to_vec();
    ray_rows.push(vec![1.0; n]);
    let mut ray_rhs = vec![0.0; m];
    ray_rhs.push(1.0);
    if let Some((_, gain, _)) = best_vertex(lp.objective(), &ray_rows, &ray_rhs) {
        if gain > ENUM_TOL {
            return Ok(empty(LpStatus::Unbounded, f64::INFINITY));
        }
    }

    let basis = (0..n + m).filter(|c| !active.contains(c)).collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x: x.into_iter().map(|v| v.max(0.0)).collect(),
        value,
        duals: Vec::new(),
        basis,
        pivots: 0,
    })
}

/// Grid points `(a, b, c)` of one item: `u = a/R`, `v = b/R`, `w = c/R`
/// with `max(0, a + b - R) <= c <= min(a, b)`.
fn item_triples(r: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for a in 0..=r {
        for b in 0..=r {
            for c in (a + b).saturating_sub(r)..=a.min(b) {
                out.push((a, b, c));
            }
        }
    }
    out
}

/// Largest `R1 + R2` over all placements on the grid.
pub fn grid_best_sum(inst: &Instance, grid: GridSpec) -> Result<f64> {
    inst.require_two_users()?;
    let r = grid.resolution;
    let n = inst.num_items();
    let triples = item_triples(r);
    let size = (triples.len() as u128).checked_pow(n as u32);
    if size.is_none_or(|s| s > MAX_GRID_POINTS) {
        return Err(Error::TooLarge(format!(
            "{} grid points per item over {n} items exceeds {MAX_GRID_POINTS}",
            triples.len()
        )));
    }
    let cap =
        [inst.capacity(0), inst.capacity(1)].map(|b| (b * r as f64 + ALIGN_TOL).floor() as usize);
    let scale = r as f64;
    let mut pl = TwoUserPlacement::empty(n);
    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0usize; n];
    loop {
        let used_u: usize = idx.iter().map(|&i| triples[i].0).sum();
        let used_v: usize = idx.iter().map(|&i| triples[i].1).sum();
        if used_u <= cap[0] && used_v <= cap[1] {
            for (item, &i) in idx.iter().enumerate() {
                let (a, b, c) = triples[i];
                pl.u[item] = a as f64 / scale;
                pl.v[item] = b as f64 / scale;
                pl.w[item] = c as f64 / scale;
            }
            best = best.max(expected_throughput(inst, &pl)?.sum());
        }
        let Some(pos) = (0..n).find(|&p| idx[p] + 1 < triples.len()) else {
            return Ok(best);
        };
        idx[pos] += 1;
        idx[..pos].iter_mut().for_each(|i| *i = 0);
    }
}

fn chunk_count(fraction: f64, chunks: usize) -> Result<usize> {
    let scaled = fraction * chunks as f64;
    let rounded = scaled.round();
    if (scaled - rounded).abs() > ALIGN_TOL || rounded < 0.0 {
        return Err(Error::MisalignedPlacement(chunks));
    }
    Ok(rounded as usize)
}

/// Two-user delivery costs rebuilt chunk by chunk.
///
/// User 1 holds the first `u·G` chunks of each item; user 2 holds the first
/// `w·G` and the `(v - w)·G` chunks that follow user 1's. Missing chunks held
/// by the other user are XOR-paired as far as possible, the rest go out
/// uncoded, shared when both users want them. Decodability is checked before
/// the split costs are returned.
pub fn bit_level_two_user_cost(
    pl: &TwoUserPlacement,
    outcome: &DemandOutcome,
    chunks_per_item: usize,
) -> Result<(f64, f64)> {
    pl.check_structure()?;
    if chunks_per_item == 0 || outcome.num_users() != 2 {
        return Err(Error::InvalidInstance(
            "need two users and at least one chunk".into(),
        ));
    }
    let g = chunks_per_item;
    let n = pl.num_items();
    if outcome.all().iter().flatten().any(|&i| i >= n) {
        return Err(Error::InvalidInstance(
            "outcome requests an unknown item".into(),
        ));
    }

    let mut caches = [BTreeSet::new(), BTreeSet::new()];
    for item in 0..n {
        let a = chunk_count(pl.u[item], g)?;
        let b = chunk_count(pl.v[item], g)?;
        let c = chunk_count(pl.w[item], g)?;
        caches[0].extend((0..a).map(|k| ChunkId::new(item, k)));
        caches[1].extend((0..c).chain(a..a + b - c).map(|k| ChunkId::new(item, k)));
    }
    let [c1, c2] = caches;

    let lacking = |user: usize, own: &BTreeSet<ChunkId>| -> Vec<ChunkId> {
        outcome
            .requested(user)
            .iter()
            .flat_map(|&i| (0..g).map(move |k| ChunkId::new(i, k)))
            .filter(|c| !own.contains(c))
            .collect()
    };
    let l1 = lacking(0, &c1);
    let l2 = lacking(1, &c2);
    let held_by_2: Vec<ChunkId> = l1.iter().copied().filter(|c| c2.contains(c)).collect();
    let held_by_1: Vec<ChunkId> = l2.iter().copied().filter(|c| c1.contains(c)).collect();

    let both = UserSet::from_bits(0b11);
    let only = [UserSet::singleton(0), UserSet::singleton(1)];
    let mut messages: BTreeMap<UserSet, Vec<CodedChunk>> = BTreeMap::new();
    let mut send = |audience: UserSet, terms: Vec<ChunkId>| {
        messages
            .entry(audience)
            .or_default()
            .push(CodedChunk { terms })
    };

    let pairs = held_by_2.len().min(held_by_1.len());
    for (x, y) in held_by_2.iter().zip(&held_by_1) {
        send(both, vec![*x, *y]);
    }
    for &x in &held_by_2[pairs..] {
        send(only[0], vec![x]);
    }
    for &y in &held_by_1[pairs..] {
        send(only[1], vec![y]);
    }
    // chunks nobody holds: shared if both want them
    let l2_set: BTreeSet<ChunkId> = l2.iter().copied().collect();
    for &x in l1.iter().filter(|c| !c2.contains(c)) {
        send(if l2_set.contains(&x) { both } else { only[0] }, vec![x]);
    }
    let l1_set: BTreeSet<ChunkId> = l1.iter().copied().collect();
    for &y in l2.iter().filter(|c| !c1.contains(c) && !l1_set.contains(c)) {
        send(only[1], vec![y]);
    }

    let mut cost = [0.0; 2];
    for (audience, chunks) in &messages {
        for k in audience.members() {
            cost[k] += chunks.len() as f64 / (audience.len() * g) as f64;
        }
    }
    let profile = CacheProfile::new(n, g, vec![c1, c2])?;
    let schedule = DeliverySchedule {
        chunks_per_item: g,
        messages,
        per_user_cost: cost.to_vec(),
        rounds: Vec::new(),
    };
    check_decoding(&profile, &schedule, outcome)?;
    Ok((cost[0], cost[1]))
}

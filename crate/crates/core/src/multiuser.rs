//! Popularity placement and grouped XOR delivery for any number of users.
//!
//! Items are split into `G` chunks. Every user caches its most popular items
//! chunk by chunk. Once demands are revealed, each still-missing chunk is
//! filed under `Y[U, V]`, where `U` is the set of users that want it and lack
//! it and `V` the set of users that hold it. Audiences `U` are then visited
//! from largest to smallest; users of `U` with identical demands form a group
//! and one chunk per group is XOR-ed together whenever every other group
//! already holds it. Whatever is left goes out uncoded.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{popularity_order, DemandOutcome, Instance};

/// Upper bound on the number of users; audiences are `u32` bitmasks and
/// every subset is visited per outcome.
pub const MAX_USERS: usize = 16;

const BUDGET_TOL: f64 = 1e-9;

/// Chunk `chunk` of item `item`, both zero-based. Displayed one-based as
/// `item:chunk`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChunkId {
    pub item: usize,
    pub chunk: usize,
}

impl ChunkId {
    pub fn new(item: usize, chunk: usize) -> Self {
        Self { item, chunk }
    }
}

impl fmt::Display for ChunkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.item + 1, self.chunk + 1)
    }
}

/// A set of users as a bitmask over zero-based indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct UserSet(u32);

impl UserSet {
    pub const EMPTY: UserSet = UserSet(0);

    pub fn from_bits(bits: u32) -> Self {
        Self(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn singleton(user: usize) -> Self {
        Self(1 << user)
    }

    pub fn with(self, user: usize) -> Self {
        Self(self.0 | 1 << user)
    }

    pub fn contains(self, user: usize) -> bool {
        self.0 >> user & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: UserSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersects(self, other: UserSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn minus(self, other: UserSet) -> Self {
        Self(self.0 & !other.0)
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&k| self.contains(k))
    }

    /// One-based user ids.
    pub fn ids(self) -> Vec<usize> {
        self.members().map(|k| k + 1).collect()
    }
}

impl FromIterator<usize> for UserSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        iter.into_iter().fold(UserSet::EMPTY, UserSet::with)
    }
}

/// Chunk-level cache contents of every user.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheProfile {
    num_items: usize,
    chunks_per_item: usize,
    caches: Vec<BTreeSet<ChunkId>>,
}

impl CacheProfile {
    pub fn new(
        num_items: usize,
        chunks_per_item: usize,
        caches: Vec<BTreeSet<ChunkId>>,
    ) -> Result<Self> {
        if caches.is_empty() || caches.len() > MAX_USERS {
            return Err(Error::TooLarge(format!(
                "{} users, supported range is 1..={MAX_USERS}",
                caches.len()
            )));
        }
        if chunks_per_item == 0 {
            return Err(Error::InvalidPlacement(
                "chunks per item must be positive".into(),
            ));
        }
        for cache in &caches {
            if let Some(c) = cache
                .iter()
                .find(|c| c.item >= num_items || c.chunk >= chunks_per_item)
            {
                return Err(Error::InvalidPlacement(format!(
                    "chunk {c} is out of range"
                )));
            }
        }
        Ok(Self {
            num_items,
            chunks_per_item,
            caches,
        })
    }

    pub fn num_users(&self) -> usize {
        self.caches.len()
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn chunks_per_item(&self) -> usize {
        self.chunks_per_item
    }

    pub fn cache(&self, user: usize) -> &BTreeSet<ChunkId> {
        &self.caches[user]
    }

    pub fn holds(&self, user: usize, chunk: ChunkId) -> bool {
        self.caches[user].contains(&chunk)
    }

    /// Users holding `chunk`.
    pub fn holders(&self, chunk: ChunkId) -> UserSet {
        (0..self.num_users())
            .filter(|&k| self.holds(k, chunk))
            .collect()
    }

    /// Chunks `user` asks for in `outcome` and does not hold.
    pub fn missing(&self, outcome: &DemandOutcome, user: usize) -> BTreeSet<ChunkId> {
        outcome
            .requested(user)
            .iter()
            .flat_map(|&n| (0..self.chunks_per_item).map(move |c| ChunkId::new(n, c)))
            .filter(|c| !self.holds(user, *c))
            .collect()
    }

    fn check_outcome(&self, outcome: &DemandOutcome) -> Result<()> {
        if outcome.num_users() != self.num_users() {
            return Err(Error::InvalidInstance(format!(
                "outcome has {} users, caches have {}",
                outcome.num_users(),
                self.num_users()
            )));
        }
        if outcome.all().iter().flatten().any(|&n| n >= self.num_items) {
            return Err(Error::InvalidInstance(
                "outcome requests an unknown item".into(),
            ));
        }
        Ok(())
    }
}

/// Each user caches whole chunks of its items in popularity order (ties by
/// lower index) until its buffer of `b_k * G` chunks is full.
pub fn popular_placement(inst: &Instance) -> Result<CacheProfile> {
    let g = inst.catalog.chunks_per_item;
    let caches = (0..inst.num_users())
        .map(|k| {
            let budget = inst.capacity(k) * g as f64;
            let chunks = budget.round();
            if (budget - chunks).abs() > BUDGET_TOL {
                return Err(Error::NonIntegralChunkBudget {
                    user: k + 1,
                    capacity: inst.capacity(k),
                    chunks: g,
                });
            }
            Ok(popularity_order(inst.preferences.row(k))
                .into_iter()
                .flat_map(|n| (0..g).map(move |c| ChunkId::new(n, c)))
                .take(chunks as usize)
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    CacheProfile::new(inst.num_items(), g, caches)
}

/// Missing chunks keyed by (requesters lacking the chunk, holders).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SetSystem {
    y: BTreeMap<(UserSet, UserSet), BTreeSet<ChunkId>>,
}

impl SetSystem {
    pub fn y(&self, requesters: UserSet, holders: UserSet) -> Option<&BTreeSet<ChunkId>> {
        self.y.get(&(requesters, holders))
    }

    pub fn entries(&self) -> impl Iterator<Item = (UserSet, UserSet, &BTreeSet<ChunkId>)> {
        self.y.iter().map(|(&(u, v), set)| (u, v, set))
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Chunks of `Z[u, v]` in the order they are consumed: more holders
    /// first, then by chunk id. Each chunk comes with its holder set.
    fn ordered_z(&self, u: UserSet, v: UserSet) -> Vec<(UserSet, ChunkId)> {
        let mut out: Vec<(UserSet, ChunkId)> = self
            .y
            .range((u, UserSet::EMPTY)..=(u, UserSet(u32::MAX)))
            .filter(|((_, s), _)| v.is_subset(*s))
            .flat_map(|((_, s), set)| set.iter().map(move |&c| (*s, c)))
            .collect();
        out.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.1.cmp(&b.1)));
        out
    }

    fn has_requesters(&self, u: UserSet) -> bool {
        self.y
            .range((u, UserSet::EMPTY)..=(u, UserSet(u32::MAX)))
            .next()
            .is_some()
    }

    fn remove(&mut self, u: UserSet, s: UserSet, chunk: ChunkId) {
        if let Some(set) = self.y.get_mut(&(u, s)) {
            set.remove(&chunk);
            if set.is_empty() {
                self.y.remove(&(u, s));
            }
        }
    }
}

pub fn build_set_system(profile: &CacheProfile, outcome: &DemandOutcome) -> Result<SetSystem> {
    profile.check_outcome(outcome)?;
    let wanted: BTreeSet<usize> = outcome.all().iter().flatten().copied().collect();
    let mut sys = SetSystem::default();
    for n in wanted {
        for c in 0..profile.chunks_per_item {
            let chunk = ChunkId::new(n, c);
            let holders = profile.holders(chunk);
            let requesters: UserSet = (0..profile.num_users())
                .filter(|&k| outcome.requests(k, n) && !holders.contains(k))
                .collect();
            if !requesters.is_empty() {
                sys.y
                    .entry((requesters, holders))
                    .or_default()
                    .insert(chunk);
            }
        }
    }
    Ok(sys)
}

/// Union of `Y[u, s]` over every holder set `s` containing `v`.
pub fn z_set(sys: &SetSystem, u: UserSet, v: UserSet) -> BTreeSet<ChunkId> {
    sys.ordered_z(u, v).into_iter().map(|(_, c)| c).collect()
}

/// XOR of the listed chunks; a single term is an uncoded chunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedChunk {
    pub terms: Vec<ChunkId>,
}

/// One audience that received coded chunks, with its demand groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundTrace {
    pub audience: UserSet,
    pub groups: Vec<UserSet>,
    pub coded: usize,
}

impl RoundTrace {
    /// Each group paired with the rest of the audience, the set that must
    /// hold the group's chunks.
    pub fn pairs(&self) -> Vec<(UserSet, UserSet)> {
        self.groups
            .iter()
            .map(|&g| (g, self.audience.minus(g)))
            .collect()
    }
}

/// Whether group `i` lies inside the holder set of every other group and is
/// disjoint from its own. This is what makes the per-group chunk pools
/// disjoint and the XOR decodable.
pub fn pairs_are_disjoint(pairs: &[(UserSet, UserSet)]) -> bool {
    pairs.iter().enumerate().all(|(j, &(_, vj))| {
        pairs.iter().enumerate().all(|(i, &(ui, _))| {
            if i == j {
                !ui.intersects(vj)
            } else {
                ui.is_subset(vj)
            }
        })
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeliverySchedule {
    pub chunks_per_item: usize,
    pub messages: BTreeMap<UserSet, Vec<CodedChunk>>,
    /// Items' worth of transmission charged to each user.
    pub per_user_cost: Vec<f64>,
    pub rounds: Vec<RoundTrace>,
}

impl DeliverySchedule {
    pub fn transmissions(&self) -> usize {
        self.messages.values().map(Vec::len).sum()
    }
}

#[derive(Serialize)]
struct MessageDump {
    audience: Vec<usize>,
    chunks: Vec<Vec<String>>,
}

#[derive(Serialize)]
struct ScheduleDump<'a> {
    messages: Vec<MessageDump>,
    per_user_cost: &'a [f64],
}

impl Serialize for DeliverySchedule {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let messages = self
            .messages
            .iter()
            .map(|(audience, chunks)| MessageDump {
                audience: audience.ids(),
                chunks: chunks
                    .iter()
                    .map(|cc| cc.terms.iter().map(ToString::to_string).collect())
                    .collect(),
            })
            .collect();
        ScheduleDump {
            messages,
            per_user_cost: &self.per_user_cost,
        }
        .serialize(serializer)
    }
}

/// Users of `audience` grouped by identical demand sets, groups ordered by
/// their lowest member.
fn demand_groups(audience: UserSet, outcome: &DemandOutcome) -> Vec<UserSet> {
    let mut groups: Vec<(usize, UserSet)> = Vec::new();
    for k in audience.members() {
        match groups
            .iter_mut()
            .find(|(rep, _)| outcome.requested(*rep) == outcome.requested(k))
        {
            Some((_, g)) => *g = g.with(k),
            None => groups.push((k, UserSet::singleton(k))),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

fn audiences_by_size(num_users: usize) -> Vec<UserSet> {
    let mut all: Vec<UserSet> = (1..1u32 << num_users).map(UserSet).collect();
    // stable sort keeps increasing bitmask order within each size
    all.sort_by_key(|u| std::cmp::Reverse(u.len()));
    all
}

pub fn deliver(profile: &CacheProfile, outcome: &DemandOutcome) -> Result<DeliverySchedule> {
    let mut sys = build_set_system(profile, outcome)?;
    let k_users = profile.num_users();
    let mut messages: BTreeMap<UserSet, Vec<CodedChunk>> = BTreeMap::new();
    let mut rounds = Vec::new();

    for audience in audiences_by_size(k_users) {
        if sys.is_empty() {
            break;
        }
        let groups = demand_groups(audience, outcome);
        if !groups.iter().all(|&g| sys.has_requesters(g)) {
            continue;
        }
        let pools: Vec<Vec<(UserSet, ChunkId)>> = groups
            .iter()
            .map(|&g| sys.ordered_z(g, audience.minus(g)))
            .collect();
        let t = pools.iter().map(Vec::len).min().unwrap_or(0);
        if t == 0 {
            continue;
        }
        let out = messages.entry(audience).or_default();
        for step in 0..t {
            out.push(CodedChunk {
                terms: pools.iter().map(|pool| pool[step].1).collect(),
            });
        }
        for (&g, pool) in groups.iter().zip(&pools) {
            for &(s, chunk) in &pool[..t] {
                sys.remove(g, s, chunk);
            }
        }
        rounds.push(RoundTrace {
            audience,
            groups,
            coded: t,
        });
    }

    let leftovers: BTreeSet<UserSet> = sys.entries().map(|(u, _, _)| u).collect();
    for u in leftovers {
        let out = messages.entry(u).or_default();
        out.extend(
            sys.ordered_z(u, UserSet::EMPTY)
                .into_iter()
                .map(|(_, c)| CodedChunk { terms: vec![c] }),
        );
    }

    let g = profile.chunks_per_item as f64;
    let mut per_user_cost = vec![0.0; k_users];
    for (audience, chunks) in &messages {
        let share = chunks.len() as f64 / (audience.len() as f64 * g);
        for k in audience.members() {
            per_user_cost[k] += share;
        }
    }
    Ok(DeliverySchedule {
        chunks_per_item: profile.chunks_per_item,
        messages,
        per_user_cost,
        rounds,
    })
}

/// Replays the messages addressed to `user`: a coded chunk yields its last
/// unknown term once every other term is cached or already decoded. Returns
/// the requested chunks recovered this way.
pub fn decode(
    profile: &CacheProfile,
    schedule: &DeliverySchedule,
    outcome: &DemandOutcome,
    user: usize,
) -> Result<BTreeSet<ChunkId>> {
    profile.check_outcome(outcome)?;
    let heard: Vec<&CodedChunk> = schedule
        .messages
        .iter()
        .filter(|(audience, _)| audience.contains(user))
        .flat_map(|(_, chunks)| chunks)
        .collect();
    let mut known = profile.cache(user).clone();
    let mut decoded = BTreeSet::new();
    loop {
        let mut progress = false;
        for cc in &heard {
            let mut unknown = cc.terms.iter().filter(|c| !known.contains(c));
            if let (Some(&c), None) = (unknown.next(), unknown.next()) {
                known.insert(c);
                decoded.insert(c);
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    let needed = profile.missing(outcome, user);
    let missing = needed.difference(&decoded).count();
    if missing > 0 {
        return Err(Error::DecodingFailure {
            user: user + 1,
            missing,
        });
    }
    Ok(needed)
}

/// Runs [`decode`] for every user.
pub fn check_decoding(
    profile: &CacheProfile,
    schedule: &DeliverySchedule,
    outcome: &DemandOutcome,
) -> Result<()> {
    (0..profile.num_users()).try_for_each(|k| decode(profile, schedule, outcome, k).map(|_| ()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectationMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiuserThroughput {
    pub throughput: Vec<f64>,
    /// Standard error of each estimate; `None` for exact expectations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<Vec<f64>>,
    pub outcomes: usize,
}

/// Expected effective throughput under [`popular_placement`] and
/// [`deliver`]: each user's request mass minus its expected delivery cost.
pub fn expected_throughput_multiuser(
    inst: &Instance,
    mode: ExpectationMode,
) -> Result<MultiuserThroughput> {
    let profile = popular_placement(inst)?;
    let k_users = inst.num_users();
    let mass: Vec<f64> = (0..k_users).map(|k| inst.preferences.row_mass(k)).collect();
    let support = inst.demands.support();

    match mode {
        ExpectationMode::Exact => {
            let mut cost = vec![0.0; k_users];
            for (outcome, prob) in support {
                let schedule = deliver(&profile, outcome)?;
                for (acc, c) in cost.iter_mut().zip(&schedule.per_user_cost) {
                    *acc += prob * c;
                }
            }
            Ok(MultiuserThroughput {
                throughput: mass.iter().zip(&cost).map(|(m, c)| m - c).collect(),
                std_error: None,
                outcomes: support.len(),
            })
        }
        ExpectationMode::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::InvalidInstance(
                    "Monte Carlo needs at least two samples".into(),
                ));
            }
            let weights = WeightedIndex::new(support.iter().map(|(_, p)| *p))
                .map_err(|e| Error::InvalidInstance(format!("demand weights: {e}")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sum = vec![0.0; k_users];
            let mut sum_sq = vec![0.0; k_users];
            for _ in 0..samples {
                let outcome = &support[weights.sample(&mut rng)].0;
                let schedule = deliver(&profile, outcome)?;
                for (k, c) in schedule.per_user_cost.iter().enumerate() {
                    sum[k] += c;
                    sum_sq[k] += c * c;
                }
            }
            let n = samples as f64;
            let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
            let std_error = mean
                .iter()
                .zip(&sum_sq)
                .map(|(m, sq)| ((sq - n * m * m).max(0.0) / (n - 1.0) / n).sqrt())
                .collect();
            Ok(MultiuserThroughput {
                throughput: mass.iter().zip(&mean).map(|(m, c)| m - c).collect(),
                std_error: Some(std_error),
                outcomes: samples,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::three_user_instance;

    fn set(chunks: &[(usize, usize)]) -> BTreeSet<ChunkId> {
        chunks.iter().map(|&(n, c)| ChunkId::new(n, c)).collect()
    }

    fn split_profile() -> CacheProfile {
        CacheProfile::new(2, 2, vec![set(&[(0, 0), (1, 0)]), set(&[(0, 1), (1, 1)])]).unwrap()
    }

    fn one_row(row: Vec<f64>, buffer: f64, chunks: usize) -> Instance {
        Instance::single_request(vec![row], vec![buffer], chunks).unwrap()
    }

    #[test]
    fn placement_takes_top_items() {
        let p = popular_placement(&one_row(vec![0.7, 0.2, 0.1, 0.0], 1.0, 2)).unwrap();
        assert_eq!(p.cache(0), &set(&[(0, 0), (0, 1)]));
        let p = popular_placement(&one_row(vec![0.25; 4], 2.0, 1)).unwrap();
        assert_eq!(p.cache(0), &set(&[(0, 0), (1, 0)]));
        let p = popular_placement(&one_row(vec![0.5, 0.3, 0.2], 1.5, 2)).unwrap();
        assert_eq!(p.cache(0), &set(&[(0, 0), (0, 1), (1, 0)]));
    }

    #[test]
    fn placement_rejects_fractional_chunks() {
        let err = popular_placement(&one_row(vec![0.5, 0.5], 0.5, 1)).unwrap_err();
        assert!(matches!(err, Error::NonIntegralChunkBudget { user: 1, .. }));
    }

    #[test]
    fn split_cache_set_system() {
        let sys = build_set_system(&split_profile(), &DemandOutcome::singles(&[0, 1])).unwrap();
        let u1 = UserSet::singleton(0);
        let u2 = UserSet::singleton(1);
        assert_eq!(sys.y(u1, u2), Some(&set(&[(0, 1)])));
        assert_eq!(sys.y(u2, u1), Some(&set(&[(1, 0)])));
        assert_eq!(sys.entries().count(), 2);
        assert_eq!(z_set(&sys, u1, u2), set(&[(0, 1)]));
        assert_eq!(z_set(&sys, u1, UserSet::EMPTY), set(&[(0, 1)]));
        assert!(z_set(&sys, u1, u1).is_empty());
    }

    #[test]
    fn cached_demands_leave_nothing() {
        let profile = CacheProfile::new(1, 2, vec![set(&[(0, 0), (0, 1)]); 2]).unwrap();
        let outcome = DemandOutcome::singles(&[0, 0]);
        assert!(build_set_system(&profile, &outcome).unwrap().is_empty());
        let schedule = deliver(&profile, &outcome).unwrap();
        assert!(schedule.messages.is_empty());
        assert_eq!(schedule.per_user_cost, vec![0.0, 0.0]);
        assert!(decode(&profile, &schedule, &outcome, 0).unwrap().is_empty());
    }

    #[test]
    fn split_cache_delivery() {
        let profile = split_profile();
        let outcome = DemandOutcome::singles(&[0, 1]);
        let schedule = deliver(&profile, &outcome).unwrap();
        let both = UserSet::from_bits(0b11);
        assert_eq!(schedule.messages.len(), 1);
        assert_eq!(
            schedule.messages[&both],
            vec![CodedChunk {
                terms: vec![ChunkId::new(0, 1), ChunkId::new(1, 0)]
            }]
        );
        assert_eq!(schedule.per_user_cost, vec![0.25, 0.25]);
        assert_eq!(
            decode(&profile, &schedule, &outcome, 0).unwrap(),
            set(&[(0, 1)])
        );
        assert_eq!(
            decode(&profile, &schedule, &outcome, 1).unwrap(),
            set(&[(1, 0)])
        );

        let json = serde_json::to_string(&schedule).unwrap();
        assert_eq!(
            json,
            r#"{"messages":[{"audience":[1,2],"chunks":[["1:2","2:1"]]}],"per_user_cost":[0.25,0.25]}"#
        );
    }

    #[test]
    fn single_user_unicast() {
        let profile = CacheProfile::new(3, 4, vec![BTreeSet::new()]).unwrap();
        let outcome = DemandOutcome::singles(&[2]);
        let schedule = deliver(&profile, &outcome).unwrap();
        let chunks = &schedule.messages[&UserSet::singleton(0)];
        assert_eq!(chunks.len(), 4);
        assert!(chunks
            .iter()
            .all(|c| c.terms.len() == 1 && c.terms[0].item == 2));
        assert_eq!(schedule.per_user_cost, vec![1.0]);
    }

    #[test]
    fn common_demand_is_multicast() {
        let profile = CacheProfile::new(2, 1, vec![BTreeSet::new(); 3]).unwrap();
        let outcome = DemandOutcome::singles(&[1, 1, 1]);
        let schedule = deliver(&profile, &outcome).unwrap();
        assert_eq!(schedule.transmissions(), 1);
        for c in &schedule.per_user_cost {
            assert!((c - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn broken_schedule_fails_to_decode() {
        let profile = split_profile();
        let outcome = DemandOutcome::singles(&[0, 1]);
        let mut schedule = deliver(&profile, &outcome).unwrap();
        schedule.messages.clear();
        assert_eq!(
            decode(&profile, &schedule, &outcome, 0),
            Err(Error::DecodingFailure {
                user: 1,
                missing: 1
            })
        );
    }

    #[test]
    fn disjointness_condition() {
        let g1 = UserSet::singleton(0);
        let g2 = UserSet::from_bits(0b110);
        let all = UserSet::from_bits(0b111);
        assert!(pairs_are_disjoint(&[
            (g1, all.minus(g1)),
            (g2, all.minus(g2))
        ]));
        assert!(!pairs_are_disjoint(&[(g1, g2), (g2, UserSet::EMPTY)]));
    }

    #[test]
    fn everything_cached_gives_full_mass() {
        let inst = three_user_instance(4.0, 1).unwrap();
        let r = expected_throughput_multiuser(&inst, ExpectationMode::Exact).unwrap();
        for (k, x) in r.throughput.iter().enumerate() {
            assert!((x - inst.preferences.row_mass(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn monte_carlo_tracks_exact() {
        let inst = three_user_instance(1.0, 2).unwrap();
        let exact = expected_throughput_multiuser(&inst, ExpectationMode::Exact).unwrap();
        let mc = expected_throughput_multiuser(
            &inst,
            ExpectationMode::MonteCarlo {
                samples: 4000,
                seed: 5,
            },
        )
        .unwrap();
        let se = mc.std_error.as_ref().unwrap();
        for ((e, m), s) in exact.throughput.iter().zip(&mc.throughput).zip(se) {
            assert!((e - m).abs() < 5.0 * s + 1e-9);
        }
        let again = expected_throughput_multiuser(
            &inst,
            ExpectationMode::MonteCarlo {
                samples: 4000,
                seed: 5,
            },
        )
        .unwrap();
        assert_eq!(mc, again);
    }
}

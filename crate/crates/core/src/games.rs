//! Caching games between two selfish users.
//!
//! In the noncooperative game each user picks how much of every item to
//! cache (`u` for user 1, `v` for user 2) and, when granted the move, also
//! the overlap `w` and the XOR pairing that maximize its own throughput. A
//! pure equilibrium is searched for by alternating best responses.
//!
//! In the cooperative game the users jointly maximize `R1 + R2` and split the
//! surplus over a baseline equally: the equilibrium payoffs when the search
//! converged, pure caching otherwise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, PivotRule, SimplexConfig};
use crate::model::Instance;
use crate::twouser::{
    build_scalarized_lp, expected_throughput, ThroughputPoint, TwoUserPlacement, TwoUserProgram,
    PLACEMENT_TOL,
};

/// Which user's cache vector is held fixed; the other user responds.
#[derive(Debug, Clone, PartialEq)]
pub enum FixedSide {
    /// `u` is fixed, user 2 picks `v`, `w` and the pairing.
    User1(Vec<f64>),
    /// `v` is fixed, user 1 picks `u`, `w` and the pairing.
    User2(Vec<f64>),
}

impl FixedSide {
    fn user(&self) -> usize {
        match self {
            FixedSide::User1(_) => 0,
            FixedSide::User2(_) => 1,
        }
    }

    fn vector(&self) -> &[f64] {
        match self {
            FixedSide::User1(x) | FixedSide::User2(x) => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub placement: TwoUserPlacement,
    /// Optimal throughput of the responding user.
    pub payoff: f64,
}

/// The two-user program prepared once and queried with different fixings.
#[derive(Debug, Clone)]
pub struct PlacementGame<'a> {
    inst: &'a Instance,
    program: TwoUserProgram,
    user_programs: [LinearProgram; 2],
}

impl<'a> PlacementGame<'a> {
    pub fn new(inst: &'a Instance) -> Result<Self> {
        let program = TwoUserProgram::new(inst)?;
        let user_programs = [
            program.program(program.throughput_form(0)),
            program.program(program.throughput_form(1)),
        ];
        Ok(Self {
            inst,
            program,
            user_programs,
        })
    }

    pub fn instance(&self) -> &Instance {
        self.inst
    }

    fn check_cache_vector(&self, user: usize, x: &[f64]) -> Result<()> {
        let n = self.inst.num_items();
        if x.len() != n {
            return Err(Error::InvalidPlacement(format!(
                "cache vector has {} entries, expected {n}",
                x.len()
            )));
        }
        let box_ok = x
            .iter()
            .all(|v| v.is_finite() && (-PLACEMENT_TOL..=1.0 + PLACEMENT_TOL).contains(v));
        let used: f64 = x.iter().sum();
        if !box_ok || used > self.inst.capacity(user) + PLACEMENT_TOL {
            return Err(Error::InvalidPlacement(format!(
                "cache vector of user {} violates its box or buffer",
                user + 1
            )));
        }
        Ok(())
    }

    /// Maximizes `maximizer`'s throughput with the `Some` blocks held fixed.
    fn optimize(
        &self,
        maximizer: usize,
        u: Option<&[f64]>,
        v: Option<&[f64]>,
    ) -> Result<(TwoUserPlacement, f64)> {
        let layout = self.program.layout;
        let mut fixed = vec![None; layout.n_vars()];
        for (block, values) in [(0, u), (1, v)] {
            if let Some(values) = values {
                for (i, &x) in values.iter().enumerate() {
                    let j = if block == 0 { layout.u(i) } else { layout.v(i) };
                    fixed[j] = Some(x);
                }
            }
        }
        let restricted = self.user_programs[maximizer].fix_variables(&fixed)?;
        let sol = lp::solve(&restricted.program)?;
        if !sol.is_optimal() {
            return Err(Error::SolverFailure(format!(
                "best-response program of user {} is {:?}",
                maximizer + 1,
                sol.status
            )));
        }
        let x = restricted.expand(&fixed, &sol.x);
        let payoff =
            sol.value + restricted.constant + self.program.throughput_form(maximizer).constant;
        Ok((layout.placement(&x), payoff))
    }

    pub fn best_response(&self, fixed: &FixedSide) -> Result<BestResponse> {
        let fixed_user = fixed.user();
        self.check_cache_vector(fixed_user, fixed.vector())?;
        let (placement, payoff) = match fixed {
            FixedSide::User1(u) => self.optimize(1, Some(u), None)?,
            FixedSide::User2(v) => self.optimize(0, None, Some(v))?,
        };
        Ok(BestResponse { placement, payoff })
    }

    /// Best throughput `user` reaches by choosing only the overlap and the
    /// pairing while both cache vectors stay put.
    pub fn overlap_value(&self, user: usize, u: &[f64], v: &[f64]) -> Result<f64> {
        self.check_cache_vector(0, u)?;
        self.check_cache_vector(1, v)?;
        Ok(self.optimize(user, Some(u), Some(v))?.1)
    }
}

pub fn best_response(inst: &Instance, fixed: &FixedSide) -> Result<BestResponse> {
    PlacementGame::new(inst)?.best_response(fixed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashResult {
    pub placement: TwoUserPlacement,
    pub payoffs: ThroughputPoint,
    pub converged: bool,
    pub iterations: usize,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Uniform point of the unit box, scaled down onto the buffer if it overflows.
pub fn random_cache_vector(rng: &mut impl Rng, num_items: usize, capacity: f64) -> Vec<f64> {
    let mut x: Vec<f64> = (0..num_items).map(|_| rng.gen::<f64>()).collect();
    let used: f64 = x.iter().sum();
    if used > capacity {
        let scale = capacity / used;
        x.iter_mut().for_each(|v| *v *= scale);
    }
    x
}

/// Alternating best responses from a random start for user 1.
///
/// Each round user 2 answers the current `u`, then user 1 answers that `v`.
/// The search stops once user 1's answer and the overlap both move by at most
/// `eps` (Euclidean norms, summed). Running out of rounds is reported through
/// `converged = false`, not as an error.
pub fn find_psne(inst: &Instance, max_iters: usize, eps: f64, seed: u64) -> Result<NashResult> {
    if max_iters == 0 || eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidInstance(
            "need at least one iteration and a positive tolerance".into(),
        ));
    }
    let game = PlacementGame::new(inst)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = random_cache_vector(&mut rng, inst.num_items(), inst.capacity(0));

    let mut last = None;
    for t in 1..=max_iters {
        let answer2 = game.best_response(&FixedSide::User1(u.clone()))?.placement;
        let answer1 = game
            .best_response(&FixedSide::User2(answer2.v.clone()))?
            .placement;
        let moved = distance(&u, &answer1.u) + distance(&answer2.w, &answer1.w);
        if moved <= eps {
            let placement = TwoUserPlacement {
                u,
                v: answer2.v,
                w: answer2.w,
            };
            let payoffs = expected_throughput(inst, &placement)?;
            return Ok(NashResult {
                placement,
                payoffs,
                converged: true,
                iterations: t,
            });
        }
        u = answer1.u.clone();
        last = Some(answer1);
    }

    let placement = last.expect("at least one round ran");
    let payoffs = expected_throughput(inst, &placement)?;
    Ok(NashResult {
        placement,
        payoffs,
        converged: false,
        iterations: max_iters,
    })
}

/// Checks that neither user gains more than `tol` by deviating, and that the
/// overlap in `pl` is optimal for both users at the same time.
pub fn verify_psne(inst: &Instance, pl: &TwoUserPlacement, tol: f64) -> bool {
    let check = || -> Result<bool> {
        let current = expected_throughput(inst, pl)?;
        let game = PlacementGame::new(inst)?;
        let dev1 = game.best_response(&FixedSide::User2(pl.v.clone()))?.payoff;
        let dev2 = game.best_response(&FixedSide::User1(pl.u.clone()))?.payoff;
        let g1 = game.overlap_value(0, &pl.u, &pl.v)?;
        let g2 = game.overlap_value(1, &pl.u, &pl.v)?;
        Ok(dev1 <= current.r1 + tol
            && dev2 <= current.r2 + tol
            && current.r1 >= g1 - tol
            && current.r2 >= g2 - tol)
    };
    check().unwrap_or(false)
}

/// Largest total throughput `R1 + R2` over all two-user placements.
pub fn cooperative_total(inst: &Instance) -> Result<f64> {
    let s = build_scalarized_lp(inst, 0.5)?;
    // only the value is used, so the faster steepest-edge rule is safe here
    let config = SimplexConfig {
        rule: PivotRule::Dantzig,
        ..SimplexConfig::default()
    };
    let sol = lp::solve_with(&s.program, config)?;
    if !sol.is_optimal() {
        return Err(Error::SolverFailure(format!(
            "cooperative program is {:?}",
            sol.status
        )));
    }
    Ok(2.0 * (sol.value + s.constant))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AllocationBasis {
    NashBased,
    PureCachingBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Allocation {
    pub r1c: f64,
    pub r2c: f64,
    pub basis: AllocationBasis,
    pub total: f64,
}

impl Allocation {
    /// Baseline plus half of the surplus `total - baseline.sum()` each.
    pub fn split(total: f64, baseline: ThroughputPoint, basis: AllocationBasis) -> Self {
        let half = (total - baseline.sum()) / 2.0;
        Self {
            r1c: baseline.r1 + half,
            r2c: baseline.r2 + half,
            basis,
            total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationOutcome {
    pub nash: NashResult,
    pub pure_caching: ThroughputPoint,
    pub allocation: Allocation,
}

impl AllocationOutcome {
    pub fn baseline(&self) -> ThroughputPoint {
        match self.allocation.basis {
            AllocationBasis::NashBased => self.nash.payoffs,
            AllocationBasis::PureCachingBased => self.pure_caching,
        }
    }
}

pub fn allocate(
    inst: &Instance,
    max_iters: usize,
    eps: f64,
    seed: u64,
) -> Result<AllocationOutcome> {
    let total = cooperative_total(inst)?;
    let nash = find_psne(inst, max_iters, eps, seed)?;
    let pure = inst.pure_caching();
    let pure_caching = ThroughputPoint::new(pure[0], pure[1]);
    let allocation = if nash.converged {
        Allocation::split(total, nash.payoffs, AllocationBasis::NashBased)
    } else {
        Allocation::split(total, pure_caching, AllocationBasis::PureCachingBased)
    };
    Ok(AllocationOutcome {
        nash,
        pure_caching,
        allocation,
    })
}

//! Two-user uncoded placement with pairwise XOR delivery.
//!
//! A placement is described per item by the fraction cached by user 1 (`u`),
//! by user 2 (`v`) and by both (`w`). For a demand outcome the base station
//! sends what each user lacks, multicasts bits both users lack and request,
//! and pairs bits held only by one user with bits held only by the other in
//! XOR packets. Every message is charged equally to its audience.
//!
//! Expected throughputs are affine in `(u, v, w)` once one auxiliary variable
//! per demand outcome stands in for the XOR pairing size, so every weighted
//! sum `alpha*R1 + (1-alpha)*R2` is a linear program over a fixed polytope.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, Simplex, SimplexConfig};
use crate::model::{DemandOutcome, Instance};

/// Slack allowed on placement invariants.
pub const PLACEMENT_TOL: f64 = 1e-9;
/// Sweep points closer than this are merged.
pub const DEDUP_TOL: f64 = 1e-7;
// Twice the signed area below which three sweep points count as collinear.
const HULL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoUserPlacement {
    /// Fraction of each item cached by user 1.
    pub u: Vec<f64>,
    /// Fraction of each item cached by user 2.
    pub v: Vec<f64>,
    /// Fraction of each item cached by both users.
    pub w: Vec<f64>,
}

impl TwoUserPlacement {
    pub fn new(u: Vec<f64>, v: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let pl = Self { u, v, w };
        pl.check_structure()?;
        Ok(pl)
    }

    pub fn empty(num_items: usize) -> Self {
        Self {
            u: vec![0.0; num_items],
            v: vec![0.0; num_items],
            w: vec![0.0; num_items],
        }
    }

    pub fn num_items(&self) -> usize {
        self.u.len()
    }

    /// Per-item invariants that do not depend on buffer sizes.
    pub fn check_structure(&self) -> Result<()> {
        let n = self.u.len();
        if self.v.len() != n || self.w.len() != n {
            return Err(Error::InvalidPlacement(
                "u, v and w differ in length".into(),
            ));
        }
        let t = PLACEMENT_TOL;
        for i in 0..n {
            let (u, v, w) = (self.u[i], self.v[i], self.w[i]);
            let ok = [u, v, w].iter().all(|x| x.is_finite())
                && (-t..=1.0 + t).contains(&u)
                && (-t..=1.0 + t).contains(&v)
                && w >= -t
                && w <= u.min(v) + t
                && u + v - w <= 1.0 + t;
            if !ok {
                return Err(Error::InvalidPlacement(format!(
                    "item {i}: u={u}, v={v}, w={w}"
                )));
            }
        }
        Ok(())
    }

    /// Structure plus buffer limits of `inst`.
    pub fn validate(&self, inst: &Instance) -> Result<()> {
        inst.require_two_users()?;
        if self.num_items() != inst.num_items() {
            return Err(Error::InvalidPlacement(format!(
                "placement covers {} items, instance has {}",
                self.num_items(),
                inst.num_items()
            )));
        }
        self.check_structure()?;
        for (k, x) in [&self.u, &self.v].into_iter().enumerate() {
            let used: f64 = x.iter().sum();
            if used > inst.capacity(k) + PLACEMENT_TOL {
                return Err(Error::InvalidPlacement(format!(
                    "user {} stores {used} items in a buffer of {}",
                    k + 1,
                    inst.capacity(k)
                )));
            }
        }
        Ok(())
    }

    /// The same caches with the users' roles exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            u: self.v.clone(),
            v: self.u.clone(),
            w: self.w.clone(),
        }
    }
}

/// Per-item fractions held by exactly user 1, exactly user 2, both, neither.
#[derive(Debug, Clone, PartialEq)]
pub struct ExclusiveFractions {
    pub only1: Vec<f64>,
    pub only2: Vec<f64>,
    pub both: Vec<f64>,
    pub none: Vec<f64>,
}

pub fn exclusive_fractions(pl: &TwoUserPlacement) -> Result<ExclusiveFractions> {
    pl.check_structure()?;
    let n = pl.num_items();
    let mut fr = ExclusiveFractions {
        only1: Vec::with_capacity(n),
        only2: Vec::with_capacity(n),
        both: pl.w.clone(),
        none: Vec::with_capacity(n),
    };
    for i in 0..n {
        fr.only1.push(pl.u[i] - pl.w[i]);
        fr.only2.push(pl.v[i] - pl.w[i]);
        fr.none.push(1.0 - pl.u[i] - pl.v[i] + pl.w[i]);
    }
    Ok(fr)
}

fn costs_from_fractions(fr: &ExclusiveFractions, outcome: &DemandOutcome) -> (f64, f64) {
    let (d1, d2) = (outcome.requested(0), outcome.requested(1));
    let lacked_by_1: f64 = d1.iter().map(|&n| fr.only2[n]).sum();
    let lacked_by_2: f64 = d2.iter().map(|&n| fr.only1[n]).sum();
    let pairs = lacked_by_1.min(lacked_by_2);
    let mut c1 = lacked_by_1 - 0.5 * pairs;
    let mut c2 = lacked_by_2 - 0.5 * pairs;
    for &n in d1 {
        if d2.contains(&n) {
            c1 += 0.5 * fr.none[n];
            c2 += 0.5 * fr.none[n];
        } else {
            c1 += fr.none[n];
        }
    }
    for &n in d2.difference(d1) {
        c2 += fr.none[n];
    }
    (c1, c2)
}

/// Delivery cost charged to each user for one demand outcome, in items.
pub fn outcome_cost(pl: &TwoUserPlacement, outcome: &DemandOutcome) -> Result<(f64, f64)> {
    if outcome.num_users() != 2 {
        return Err(Error::InvalidPlacement(format!(
            "outcome has {} users, expected 2",
            outcome.num_users()
        )));
    }
    let fr = exclusive_fractions(pl)?;
    if let Some(&bad) = outcome
        .all()
        .iter()
        .flatten()
        .find(|&&n| n >= pl.num_items())
    {
        return Err(Error::InvalidPlacement(format!(
            "requested item {bad} is not placed"
        )));
    }
    Ok(costs_from_fractions(&fr, outcome))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThroughputPoint {
    pub r1: f64,
    pub r2: f64,
}

impl ThroughputPoint {
    pub fn new(r1: f64, r2: f64) -> Self {
        Self { r1, r2 }
    }

    pub fn sum(&self) -> f64 {
        self.r1 + self.r2
    }

    pub fn swapped(&self) -> Self {
        Self::new(self.r2, self.r1)
    }

    fn distance(&self, other: &Self) -> f64 {
        (self.r1 - other.r1).abs().max((self.r2 - other.r2).abs())
    }
}

pub fn expected_throughput(inst: &Instance, pl: &TwoUserPlacement) -> Result<ThroughputPoint> {
    pl.validate(inst)?;
    let fr = exclusive_fractions(pl)?;
    let (mut e1, mut e2) = (0.0, 0.0);
    for (outcome, prob) in inst.demands.support() {
        let (c1, c2) = costs_from_fractions(&fr, outcome);
        e1 += prob * c1;
        e2 += prob * c2;
    }
    Ok(ThroughputPoint::new(
        inst.preferences.row_mass(0) - e1,
        inst.preferences.row_mass(1) - e2,
    ))
}

/// Positions of the decision variables in the two-user programs:
/// `u`, then `v`, then `w` (one block of `N` each), then one pairing
/// variable per demand outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    pub num_items: usize,
    pub num_outcomes: usize,
}

impl VarLayout {
    pub fn u(&self, n: usize) -> usize {
        n
    }

    pub fn v(&self, n: usize) -> usize {
        self.num_items + n
    }

    pub fn w(&self, n: usize) -> usize {
        2 * self.num_items + n
    }

    pub fn z(&self, s: usize) -> usize {
        3 * self.num_items + s
    }

    pub fn n_vars(&self) -> usize {
        3 * self.num_items + self.num_outcomes
    }

    /// Reads the cache fractions out of an LP vector, clipping round-off.
    pub fn placement(&self, x: &[f64]) -> TwoUserPlacement {
        let n = self.num_items;
        let clip = |s: &[f64]| s.iter().map(|v| v.clamp(0.0, 1.0)).collect::<Vec<_>>();
        let u = clip(&x[..n]);
        let v = clip(&x[n..2 * n]);
        let w = x[2 * n..3 * n]
            .iter()
            .enumerate()
            .map(|(i, w)| w.clamp(0.0, u[i].min(v[i])))
            .collect();
        TwoUserPlacement { u, v, w }
    }

    /// LP vector for a placement, with each pairing variable at its maximum.
    pub fn encode(&self, inst: &Instance, pl: &TwoUserPlacement) -> Vec<f64> {
        let n = self.num_items;
        let mut x = Vec::with_capacity(self.n_vars());
        x.extend_from_slice(&pl.u);
        x.extend_from_slice(&pl.v);
        x.extend_from_slice(&pl.w);
        for (outcome, _) in inst.demands.support() {
            let to_2: f64 = outcome
                .requested(1)
                .iter()
                .map(|&i| pl.u[i] - pl.w[i])
                .sum();
            let to_1: f64 = outcome
                .requested(0)
                .iter()
                .map(|&i| pl.v[i] - pl.w[i])
                .sum();
            x.push(to_1.min(to_2).max(0.0));
        }
        debug_assert_eq!(x.len(), 3 * n + self.num_outcomes);
        x
    }
}

type VarIndex = fn(&VarLayout, usize) -> usize;

/// `coefs · x + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineForm {
    pub coefs: Vec<f64>,
    pub constant: f64,
}

impl AffineForm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        lp::dot(&self.coefs, x) + self.constant
    }

    fn blend(a: &Self, wa: f64, b: &Self, wb: f64) -> Self {
        Self {
            coefs: a
                .coefs
                .iter()
                .zip(&b.coefs)
                .map(|(x, y)| wa * x + wb * y)
                .collect(),
            constant: wa * a.constant + wb * b.constant,
        }
    }
}

/// Constraint polytope shared by every two-user program, with each user's
/// expected throughput as an affine function over it.
#[derive(Debug, Clone)]
pub struct TwoUserProgram {
    pub layout: VarLayout,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    throughput: [AffineForm; 2],
}

impl TwoUserProgram {
    pub fn new(inst: &Instance) -> Result<Self> {
        inst.require_two_users()?;
        let n = inst.num_items();
        let layout = VarLayout {
            num_items: n,
            num_outcomes: inst.demands.len(),
        };
        let nv = layout.n_vars();
        let mut rows = Vec::with_capacity(3 * n + 2 + 2 * layout.num_outcomes);
        let mut rhs = Vec::with_capacity(rows.capacity());
        let mut push = |terms: &[(usize, f64)], h: f64| {
            let mut row = vec![0.0; nv];
            for &(j, a) in terms {
                row[j] += a;
            }
            rows.push(row);
            rhs.push(h);
        };

        for i in 0..n {
            let (u, v, w) = (layout.u(i), layout.v(i), layout.w(i));
            push(&[(w, 1.0), (u, -1.0)], 0.0);
            push(&[(w, 1.0), (v, -1.0)], 0.0);
            push(&[(u, 1.0), (v, 1.0), (w, -1.0)], 1.0);
        }
        let u_all: Vec<_> = (0..n).map(|i| (layout.u(i), 1.0)).collect();
        let v_all: Vec<_> = (0..n).map(|i| (layout.v(i), 1.0)).collect();
        push(&u_all, inst.capacity(0));
        push(&v_all, inst.capacity(1));

        let mut r1 = AffineForm {
            coefs: vec![0.0; nv],
            constant: inst.preferences.row_mass(0),
        };
        let mut r2 = AffineForm {
            coefs: vec![0.0; nv],
            constant: inst.preferences.row_mass(1),
        };

        for (s, (outcome, prob)) in inst.demands.support().iter().enumerate() {
            let (d1, d2) = (outcome.requested(0), outcome.requested(1));
            let z = layout.z(s);

            // z <= sum over D2 of (u - w): bits only user 1 holds that user 2 wants
            let mut t = vec![(z, 1.0)];
            for &i in d2 {
                t.push((layout.u(i), -1.0));
                t.push((layout.w(i), 1.0));
            }
            push(&t, 0.0);
            let mut t = vec![(z, 1.0)];
            for &i in d1 {
                t.push((layout.v(i), -1.0));
                t.push((layout.w(i), 1.0));
            }
            push(&t, 0.0);

            // Throughput = row mass - E[cost]; accumulate -prob * cost terms.
            let p = *prob;
            let sides: [(&mut AffineForm, _, _, VarIndex, VarIndex); 2] = [
                (&mut r1, d1, d2, VarLayout::u, VarLayout::v),
                (&mut r2, d2, d1, VarLayout::v, VarLayout::u),
            ];
            for (form, mine, theirs, own, other) in sides {
                for &i in mine {
                    // bits held only by the other user
                    form.coefs[other(&layout, i)] -= p;
                    form.coefs[layout.w(i)] += p;
                    // bits held by neither: alone, or shared with the other user
                    let share = if theirs.contains(&i) { 0.5 * p } else { p };
                    form.constant -= share;
                    form.coefs[own(&layout, i)] += share;
                    form.coefs[other(&layout, i)] += share;
                    form.coefs[layout.w(i)] -= share;
                }
                form.coefs[z] += 0.5 * p;
            }
        }

        Ok(Self {
            layout,
            rows,
            rhs,
            throughput: [r1, r2],
        })
    }

    /// Expected throughput of `user` (0 or 1) as an affine form.
    pub fn throughput_form(&self, user: usize) -> &AffineForm {
        &self.throughput[user]
    }

    pub fn scalarized_form(&self, alpha: f64) -> AffineForm {
        AffineForm::blend(&self.throughput[0], alpha, &self.throughput[1], 1.0 - alpha)
    }

    pub fn program(&self, objective: &AffineForm) -> LinearProgram {
        LinearProgram::new(objective.coefs.clone(), self.rows.clone(), self.rhs.clone())
            .expect("two-user programs are well shaped")
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn evaluate(&self, x: &[f64]) -> ThroughputPoint {
        ThroughputPoint::new(self.throughput[0].eval(x), self.throughput[1].eval(x))
    }
}

/// Weighted-sum program: maximize `alpha*R1 + (1-alpha)*R2`. The optimum of
/// `program` plus `constant` is the weighted throughput.
#[derive(Debug, Clone)]
pub struct ScalarizedLp {
    pub program: LinearProgram,
    pub constant: f64,
    pub layout: VarLayout,
}

pub fn build_scalarized_lp(inst: &Instance, alpha: f64) -> Result<ScalarizedLp> {
    check_alpha(alpha)?;
    let base = TwoUserProgram::new(inst)?;
    let form = base.scalarized_form(alpha);
    Ok(ScalarizedLp {
        program: base.program(&form),
        constant: form.constant,
        layout: base.layout,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidInstance(format!(
            "alpha {alpha} outside [0, 1]"
        )))
    }
}

/// `points` evenly spaced weights from 0 to 1 inclusive.
pub fn uniform_alpha_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..points)
            .map(|i| i as f64 / (points - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSample {
    pub alpha: f64,
    pub point: ThroughputPoint,
    pub placement: TwoUserPlacement,
}

/// Extreme points of the achievable polygon's upper-right boundary, sorted
/// by decreasing `r1`. Each vertex keeps a placement that attains it.
#[derive(Debug, Clone, Serialize)]
pub struct ThroughputBoundary {
    pub vertices: Vec<SweepSample>,
}

impl ThroughputBoundary {
    /// Deduplicates, drops dominated points and keeps the concave hull.
    pub fn from_samples(samples: &[SweepSample]) -> Self {
        let mut pts: Vec<&SweepSample> = samples.iter().collect();
        pts.sort_by(|a, b| {
            b.point
                .r1
                .total_cmp(&a.point.r1)
                .then(b.point.r2.total_cmp(&a.point.r2))
                .then(a.alpha.total_cmp(&b.alpha))
        });

        let mut front: Vec<&SweepSample> = Vec::new();
        for s in pts {
            if let Some(last) = front.last() {
                if last.point.distance(&s.point) <= DEDUP_TOL
                    || s.point.r2 <= last.point.r2 + DEDUP_TOL
                {
                    continue;
                }
            }
            front.push(s);
        }

        // front: r1 strictly decreasing, r2 strictly increasing. Keep only
        // points strictly above the chord of their neighbours.
        let mut hull: Vec<&SweepSample> = Vec::new();
        for s in front {
            while hull.len() >= 2 {
                let a = hull[hull.len() - 2].point;
                let b = hull[hull.len() - 1].point;
                let c = s.point;
                let cross = (b.r1 - a.r1) * (c.r2 - a.r2) - (b.r2 - a.r2) * (c.r1 - a.r1);
                if cross <= HULL_TOL {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(s);
        }
        Self {
            vertices: hull.into_iter().cloned().collect(),
        }
    }

    pub fn points(&self) -> Vec<ThroughputPoint> {
        self.vertices.iter().map(|v| v.point).collect()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundarySweep {
    /// One sample per weight, in increasing `alpha`.
    pub samples: Vec<SweepSample>,
    pub boundary: ThroughputBoundary,
}

/// Solves the weighted-sum program for every weight in `alphas`. Weights are
/// visited in increasing order and each solve restarts from the previous
/// optimal basis, since only the objective changes.
pub fn boundary_sweep(inst: &Instance, alphas: &[f64]) -> Result<BoundarySweep> {
    if alphas.is_empty() {
        return Err(Error::InvalidInstance("alpha grid is empty".into()));
    }
    for &a in alphas {
        check_alpha(a)?;
    }
    let base = TwoUserProgram::new(inst)?;
    let mut order: Vec<f64> = alphas.to_vec();
    order.sort_by(f64::total_cmp);

    let mut simplex = Simplex::new(
        &base.program(&base.scalarized_form(0.5)),
        SimplexConfig::default(),
    )?;
    let mut samples = Vec::with_capacity(order.len());
    for alpha in order {
        let form = base.scalarized_form(alpha);
        let sol = simplex.maximize(&form.coefs)?;
        if !sol.is_optimal() {
            return Err(Error::SolverFailure(format!(
                "weighted program at alpha={alpha} is {:?}",
                sol.status
            )));
        }
        let placement = base.layout.placement(&sol.x);
        let point = expected_throughput(inst, &placement)?;
        samples.push(SweepSample {
            alpha,
            point,
            placement,
        });
    }
    let boundary = ThroughputBoundary::from_samples(&samples);
    Ok(BoundarySweep { samples, boundary })
}

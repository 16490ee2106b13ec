//! Dense primal simplex for `max c·x  s.t.  A x <= h, x >= 0`.
//!
//! The tableau is kept in condensed (dictionary) form: one row per constraint
//! plus an objective row, one column per nonbasic variable. Every optimum
//! reported is a basic feasible solution. Infeasible right-hand sides are
//! handled with a single auxiliary variable in a first phase.
//!
//! A [`Simplex`] keeps its final basis, so a sequence of objectives over the
//! same feasible region (such as a scalarization sweep) can be re-optimized
//! from the previous vertex instead of from scratch.

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        let n = objective.len();
        if rows.len() != rhs.len() {
            return Err(Error::SolverFailure(format!(
                "{} constraint rows but {} right-hand sides",
                rows.len(),
                rhs.len()
            )));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::SolverFailure(format!(
                "row {i} has {} coefficients, expected {n}",
                r.len()
            )));
        }
        let finite = objective
            .iter()
            .chain(rows.iter().flatten())
            .chain(&rhs)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::SolverFailure("non-finite LP coefficient".into()));
        }
        Ok(Self {
            objective,
            rows,
            rhs,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn with_objective(&self, objective: Vec<f64>) -> Result<Self> {
        Self::new(objective, self.rows.clone(), self.rhs.clone())
    }

    /// Largest violation of `A x <= h` and `x >= 0`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, h)| dot(row, x) - h);
        let bounds = x.iter().map(|v| -v);
        rows.chain(bounds).fold(0.0, f64::max)
    }

    /// Substitutes the `Some` entries of `values` as constants. The returned
    /// program ranges over the remaining variables, listed in `free` in their
    /// original order; `constant` is the objective contribution of the fixed
    /// part.
    pub fn fix_variables(&self, values: &[Option<f64>]) -> Result<RestrictedProgram> {
        if values.len() != self.n_vars() {
            return Err(Error::SolverFailure(
                "fixed-value vector has the wrong length".into(),
            ));
        }
        let free: Vec<usize> = (0..self.n_vars())
            .filter(|&j| values[j].is_none())
            .collect();
        let fixed_part = |coefs: &[f64]| -> f64 {
            values
                .iter()
                .zip(coefs)
                .filter_map(|(v, c)| v.map(|v| v * c))
                .sum()
        };
        let rows = self
            .rows
            .iter()
            .map(|row| free.iter().map(|&j| row[j]).collect())
            .collect();
        let rhs = self
            .rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, h)| h - fixed_part(row))
            .collect();
        let objective = free.iter().map(|&j| self.objective[j]).collect();
        Ok(RestrictedProgram {
            program: LinearProgram::new(objective, rows, rhs)?,
            constant: fixed_part(&self.objective),
            free,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RestrictedProgram {
    pub program: LinearProgram,
    pub constant: f64,
    pub free: Vec<usize>,
}

impl RestrictedProgram {
    /// Scatters a solution of the restricted program back to full length.
    pub fn expand(&self, values: &[Option<f64>], x_free: &[f64]) -> Vec<f64> {
        let mut full: Vec<f64> = values.iter().map(|v| v.unwrap_or(0.0)).collect();
        for (&j, &x) in self.free.iter().zip(x_free) {
            full[j] = x;
        }
        full
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal vertex; empty unless optimal.
    pub x: Vec<f64>,
    pub value: f64,
    /// Shadow prices `y >= 0` with `A^T y >= c` and `h·y = value`; empty
    /// unless optimal.
    pub duals: Vec<f64>,
    /// Sorted labels of the basic variables; `n_vars + i` is the slack of row `i`.
    pub basis: Vec<usize>,
    pub pivots: usize,
}

impl LpSolution {
    fn without_point(status: LpStatus, pivots: usize) -> Self {
        let value = match status {
            LpStatus::Unbounded => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        };
        Self {
            status,
            x: Vec::new(),
            value,
            duals: Vec::new(),
            basis: Vec::new(),
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotRule {
    /// Lowest-index improving column and lowest-index leaving row. Never cycles.
    #[default]
    Bland,
    /// Steepest reduced cost; falls back to Bland after a run of degenerate
    /// pivots so it still terminates.
    Dantzig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexConfig {
    pub tol: f64,
    pub rule: PivotRule,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            rule: PivotRule::Bland,
        }
    }
}

/// Solves `lp` from the all-slack basis with the default configuration.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    solve_with(lp, SimplexConfig::default())
}

pub fn solve_with(lp: &LinearProgram, config: SimplexConfig) -> Result<LpSolution> {
    Simplex::new(lp, config)?.maximize(lp.objective())
}

const DEGENERATE_STREAK: usize = 50;

/// A feasible basis for a fixed constraint set, reusable across objectives.
#[derive(Debug, Clone)]
pub struct Simplex {
    m: usize,
    n: usize,
    width: usize,
    // (m + 1) x width, row-major; row m is the objective row.
    tab: Vec<f64>,
    rhs: Vec<f64>,
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    config: SimplexConfig,
    feasible: bool,
    pivot_cap: usize,
    pivots: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Simplex {
    /// Builds the tableau and drives it to a feasible basis. An infeasible
    /// constraint set is not an error; every later `maximize` reports it.
    pub fn new(lp: &LinearProgram, config: SimplexConfig) -> Result<Self> {
        let m = lp.n_rows();
        let n = lp.n_vars();
        let mut s = Self {
            m,
            n,
            width: n,
            tab: vec![0.0; (m + 1) * n],
            rhs: lp.rhs.clone(),
            basic: (n..n + m).collect(),
            nonbasic: (0..n).collect(),
            config,
            feasible: true,
            pivot_cap: 10 * (m + n).pow(2).max(1),
            pivots: 0,
        };
        for (i, row) in lp.rows.iter().enumerate() {
            s.tab[i * n..(i + 1) * n].copy_from_slice(row);
        }
        s.rhs.push(0.0);
        s.phase_one()?;
        Ok(s)
    }

    pub fn is_feasible(&self) -> bool {
        self.feasible
    }

    /// Maximizes `objective` starting from the current basis.
    pub fn maximize(&mut self, objective: &[f64]) -> Result<LpSolution> {
        assert_eq!(objective.len(), self.n, "objective length");
        self.pivots = 0;
        if !self.feasible {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, 0));
        }
        self.load_objective(objective);
        match self.optimize()? {
            Outcome::Unbounded => Ok(LpSolution::without_point(LpStatus::Unbounded, self.pivots)),
            Outcome::Optimal => Ok(self.extract(objective)),
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.tab[i * self.width + j]
    }

    fn phase_one(&mut self) -> Result<()> {
        let tol = self.config.tol;
        let (worst, &min_rhs) = self.rhs[..self.m]
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
            .unwrap_or((0, &0.0));
        if self.m == 0 || min_rhs >= -tol {
            for v in &mut self.rhs[..self.m] {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            return Ok(());
        }

        // Auxiliary column: x_B = rhs - T x_N + x_aux; maximize -x_aux.
        let aux_label = self.n + self.m;
        let old_w = self.width;
        let new_w = old_w + 1;
        let mut tab = vec![0.0; (self.m + 1) * new_w];
        for i in 0..=self.m {
            tab[i * new_w..i * new_w + old_w]
                .copy_from_slice(&self.tab[i * old_w..(i + 1) * old_w]);
            tab[i * new_w + old_w] = if i < self.m { -1.0 } else { 1.0 };
        }
        self.tab = tab;
        self.width = new_w;
        self.nonbasic.push(aux_label);
        for j in 0..old_w {
            self.tab[self.m * new_w + j] = 0.0;
        }
        self.rhs[self.m] = 0.0;

        self.pivot(worst, old_w);
        match self.optimize()? {
            Outcome::Unbounded => {
                return Err(Error::SolverFailure("auxiliary problem unbounded".into()))
            }
            Outcome::Optimal => {}
        }
        if self.rhs[self.m] < -tol {
            self.feasible = false;
            return Ok(());
        }

        if let Some(r) = self.basic.iter().position(|&b| b == aux_label) {
            // Degenerate: the auxiliary variable sits in the basis at zero.
            let s = (0..self.width)
                .filter(|&j| self.at(r, j).abs() > tol)
                .min_by_key(|&j| self.nonbasic[j])
                .ok_or_else(|| Error::SolverFailure("cannot remove auxiliary variable".into()))?;
            self.pivot(r, s);
        }
        let col = self
            .nonbasic
            .iter()
            .position(|&l| l == aux_label)
            .expect("auxiliary variable is nonbasic");
        self.drop_column(col);
        for v in &mut self.rhs[..self.m] {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(())
    }

    fn drop_column(&mut self, col: usize) {
        let old_w = self.width;
        let mut tab = Vec::with_capacity((self.m + 1) * (old_w - 1));
        for i in 0..=self.m {
            let row = &self.tab[i * old_w..(i + 1) * old_w];
            tab.extend_from_slice(&row[..col]);
            tab.extend_from_slice(&row[col + 1..]);
        }
        self.tab = tab;
        self.width = old_w - 1;
        self.nonbasic.remove(col);
    }

    fn load_objective(&mut self, c: &[f64]) {
        let w = self.width;
        let m = self.m;
        let mut obj = vec![0.0; w];
        for (j, &label) in self.nonbasic.iter().enumerate() {
            if label < self.n {
                obj[j] = -c[label];
            }
        }
        let mut z0 = 0.0;
        for i in 0..m {
            let label = self.basic[i];
            if label < self.n && c[label] != 0.0 {
                let cb = c[label];
                z0 += cb * self.rhs[i];
                let row = &self.tab[i * w..(i + 1) * w];
                for (o, t) in obj.iter_mut().zip(row) {
                    *o += cb * t;
                }
            }
        }
        self.tab[m * w..(m + 1) * w].copy_from_slice(&obj);
        self.rhs[m] = z0;
    }

    fn choose_entering(&self, bland: bool) -> Option<usize> {
        let tol = self.config.tol;
        let obj = &self.tab[self.m * self.width..(self.m + 1) * self.width];
        let improving = obj.iter().enumerate().filter(|(_, &d)| d < -tol);
        if bland {
            improving
                .min_by_key(|(j, _)| self.nonbasic[*j])
                .map(|(j, _)| j)
        } else {
            improving
                .min_by(|a, b| {
                    a.1.total_cmp(b.1)
                        .then(self.nonbasic[a.0].cmp(&self.nonbasic[b.0]))
                })
                .map(|(j, _)| j)
        }
    }

    fn choose_leaving(&self, s: usize) -> Option<usize> {
        let tol = self.config.tol;
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m {
            let a = self.at(i, s);
            if a <= tol {
                continue;
            }
            let ratio = self.rhs[i] / a;
            best = match best {
                None => Some((i, ratio)),
                Some((bi, br)) => {
                    let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                    if ratio < br && !tie || tie && self.basic[i] < self.basic[bi] {
                        Some((i, ratio))
                    } else {
                        Some((bi, br))
                    }
                }
            };
        }
        best.map(|(i, _)| i)
    }

    fn optimize(&mut self) -> Result<Outcome> {
        let mut degenerate_run = 0usize;
        loop {
            let bland = match self.config.rule {
                PivotRule::Bland => true,
                PivotRule::Dantzig => degenerate_run >= DEGENERATE_STREAK,
            };
            let Some(s) = self.choose_entering(bland) else {
                return Ok(Outcome::Optimal);
            };
            let Some(r) = self.choose_leaving(s) else {
                return Ok(Outcome::Unbounded);
            };
            if self.pivots >= self.pivot_cap {
                return Err(Error::NumericalFailure(self.pivot_cap));
            }
            let step = self.rhs[r] / self.at(r, s);
            if step > self.config.tol {
                degenerate_run = 0;
            } else {
                degenerate_run += 1;
            }
            self.pivot(r, s);
        }
    }

    fn pivot(&mut self, r: usize, s: usize) {
        self.pivots += 1;
        let w = self.width;
        let p = self.tab[r * w + s];
        let inv = 1.0 / p;

        let (before, rest) = self.tab.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for v in prow.iter_mut() {
            *v *= inv;
        }
        prow[s] = inv;
        self.rhs[r] *= inv;
        let prhs = self.rhs[r];
        let nz: Vec<usize> = (0..w).filter(|&j| j != s && prow[j] != 0.0).collect();

        let update = |row: &mut [f64], rhs: &mut f64| {
            let f = row[s];
            if f == 0.0 {
                return;
            }
            for &j in &nz {
                row[j] -= f * prow[j];
            }
            row[s] = -f * inv;
            *rhs -= f * prhs;
        };
        for (i, row) in before.chunks_exact_mut(w).enumerate() {
            update(row, &mut self.rhs[i]);
        }
        for (k, row) in after.chunks_exact_mut(w).enumerate() {
            update(row, &mut self.rhs[r + 1 + k]);
        }
        for v in &mut self.rhs[..self.m] {
            if *v < 0.0 && *v > -1e-12 {
                *v = 0.0;
            }
        }

        std::mem::swap(&mut self.basic[r], &mut self.nonbasic[s]);
    }

    fn extract(&self, objective: &[f64]) -> LpSolution {
        let mut x = vec![0.0; self.n];
        for (i, &label) in self.basic.iter().enumerate() {
            if label < self.n {
                x[label] = self.rhs[i].max(0.0);
            }
        }
        let mut duals = vec![0.0; self.m];
        for (j, &label) in self.nonbasic.iter().enumerate() {
            if label >= self.n {
                duals[label - self.n] = self.at(self.m, j).max(0.0);
            }
        }
        let mut basis = self.basic.clone();
        basis.sort_unstable();
        LpSolution {
            status: LpStatus::Optimal,
            value: dot(objective, &x),
            x,
            duals,
            basis,
            pivots: self.pivots,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

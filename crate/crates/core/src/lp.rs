//! Dense bounded-variable revised simplex.
//!
//! Solves `min c^T z  s.t.  E z = f,  l <= z <= u` where bounds may be infinite.
//! Entering and leaving variables follow Bland's lowest-index rule, so the
//! pivot sequence is deterministic and cannot cycle. Rows are scaled by their
//! largest absolute entry before solving; duals are reported for the original
//! rows.

use nalgebra::DMatrix;
use thiserror::Error;

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-12;
const REFACTOR_EVERY: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("variable {0} has lower bound above upper bound")]
    InvalidBounds(usize),
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit {0} exceeded")]
    IterationLimit(usize),
    #[error("basis matrix became singular")]
    SingularBasis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    eq_matrix: DMatrix<f64>,
    eq_rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new(
        objective: Vec<f64>,
        eq_matrix: DMatrix<f64>,
        eq_rhs: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self, LpError> {
        let n = objective.len();
        let m = eq_rhs.len();
        if eq_matrix.ncols() != n && !(m == 0 && eq_matrix.nrows() == 0) {
            return Err(LpError::DimensionMismatch { what: "constraint columns", expected: n, got: eq_matrix.ncols() });
        }
        if eq_matrix.nrows() != m {
            return Err(LpError::DimensionMismatch { what: "constraint rows", expected: m, got: eq_matrix.nrows() });
        }
        for (what, v) in [("lower bounds", &lower), ("upper bounds", &upper)] {
            if v.len() != n {
                return Err(LpError::DimensionMismatch { what, expected: n, got: v.len() });
            }
        }
        if objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        if eq_matrix.iter().chain(eq_rhs.iter()).any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite("constraints"));
        }
        for j in 0..n {
            if lower[j].is_nan() || upper[j].is_nan() || lower[j] > upper[j] || lower[j] == f64::INFINITY || upper[j] == f64::NEG_INFINITY {
                return Err(LpError::InvalidBounds(j));
            }
        }
        let eq_matrix = if m == 0 { DMatrix::zeros(0, n) } else { eq_matrix };
        Ok(Self { objective, eq_matrix, eq_rhs, lower, upper })
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn eq_matrix(&self) -> &DMatrix<f64> {
        &self.eq_matrix
    }

    pub fn eq_rhs(&self) -> &[f64] {
        &self.eq_rhs
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Largest absolute residual `|E z - f|_i`, each row divided by its largest
    /// absolute coefficient.
    pub fn scaled_residual(&self, z: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.num_constraints() {
            let row = self.eq_matrix.row(i);
            let scale = row.amax().max(f64::MIN_POSITIVE);
            let lhs: f64 = row.iter().zip(z).map(|(a, x)| a * x).sum();
            worst = worst.max((lhs - self.eq_rhs[i]).abs() / scale);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Final primal point (meaningful when `Optimal`).
    pub point: Vec<f64>,
    pub objective_value: f64,
    /// Row multipliers `y` with `c - E^T y` equal to `reduced_costs`.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    /// Converts `Infeasible` and `Unbounded` into errors.
    pub fn into_optimal(self) -> Result<Self, LpError> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            LpStatus::Infeasible => Err(LpError::Infeasible),
            LpStatus::Unbounded => Err(LpError::Unbounded),
        }
    }

    /// Lower bound on the optimum certified by `duals`:
    /// `f^T y + sum_j min_{l_j <= z_j <= u_j} d_j z_j`.
    pub fn dual_bound(&self, lp: &LinearProgram) -> f64 {
        let mut bound: f64 = lp.eq_rhs.iter().zip(&self.duals).map(|(f, y)| f * y).sum();
        for (j, &d) in self.reduced_costs.iter().enumerate() {
            let term = if d > 0.0 {
                d * lp.lower[j]
            } else if d < 0.0 {
                d * lp.upper[j]
            } else {
                0.0
            };
            bound += term;
        }
        bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

enum Step {
    Optimal,
    Unbounded,
    Continue,
}

struct Simplex<'a> {
    m: usize,
    n: usize,
    a: &'a DMatrix<f64>,
    b: Vec<f64>,
    art_sign: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    since_refactor: usize,
    iterations: usize,
    limit: usize,
    allow_artificial_entry: bool,
}

impl Simplex<'_> {
    fn total(&self) -> usize {
        self.n + self.m
    }

    fn column_dot(&self, j: usize, v: &[f64]) -> f64 {
        if j < self.n {
            self.a.column(j).iter().zip(v).map(|(a, y)| a * y).sum()
        } else {
            self.art_sign[j - self.n] * v[j - self.n]
        }
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        if j < self.n {
            (&self.binv * self.a.column(j)).as_slice().to_vec()
        } else {
            let r = j - self.n;
            self.binv.column(r).iter().map(|v| v * self.art_sign[r]).collect()
        }
    }

    fn prices(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        for (r, &bv) in self.basis.iter().enumerate() {
            let c = self.cost[bv];
            if c != 0.0 {
                for (yi, bij) in y.iter_mut().zip(self.binv.row(r).iter()) {
                    *yi += c * bij;
                }
            }
        }
        y
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lower[j] == self.upper[j]
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        self.since_refactor = 0;
        if self.m == 0 {
            return Ok(());
        }
        let mut bmat = DMatrix::zeros(self.m, self.m);
        for (r, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                bmat.set_column(r, &self.a.column(j));
            } else {
                bmat[(j - self.n, r)] = self.art_sign[j - self.n];
            }
        }
        self.binv = bmat.try_inverse().ok_or(LpError::SingularBasis)?;
        let mut rhs = self.b.clone();
        for j in 0..self.total() {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                if j < self.n {
                    for (ri, aij) in rhs.iter_mut().zip(self.a.column(j).iter()) {
                        *ri -= aij * self.x[j];
                    }
                } else {
                    rhs[j - self.n] -= self.art_sign[j - self.n] * self.x[j];
                }
            }
        }
        let xb = &self.binv * nalgebra::DVector::from_vec(rhs);
        for (r, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[r];
        }
        Ok(())
    }

    fn pivot(&mut self, row: usize, w: &[f64]) {
        let piv = w[row];
        for c in 0..self.m {
            self.binv[(row, c)] /= piv;
        }
        for r in 0..self.m {
            if r != row && w[r] != 0.0 {
                let f = w[r];
                for c in 0..self.m {
                    let v = self.binv[(row, c)];
                    self.binv[(r, c)] -= f * v;
                }
            }
        }
    }

    /// One Bland iteration.
    fn step(&mut self) -> Result<Step, LpError> {
        if self.iterations >= self.limit {
            return Err(LpError::IterationLimit(self.limit));
        }
        let y = self.prices();
        let mut entering = None;
        for j in 0..self.total() {
            if self.state[j] == VarState::Basic || self.is_fixed(j) {
                continue;
            }
            if j >= self.n && !self.allow_artificial_entry {
                continue;
            }
            let d = self.cost[j] - self.column_dot(j, &y);
            let dir = match self.state[j] {
                VarState::AtLower if d < -OPT_TOL => 1.0,
                VarState::AtUpper if d > OPT_TOL => -1.0,
                VarState::Free if d < -OPT_TOL => 1.0,
                VarState::Free if d > OPT_TOL => -1.0,
                _ => continue,
            };
            entering = Some((j, dir));
            break;
        }
        let Some((j, dir)) = entering else {
            return Ok(Step::Optimal);
        };

        let w = self.ftran(j);
        let mut theta = self.upper[j] - self.lower[j];
        let mut leaving: Option<(usize, VarState)> = None;
        for r in 0..self.m {
            let alpha = dir * w[r];
            let bv = self.basis[r];
            let (ratio, target) = if alpha > PIVOT_TOL && self.lower[bv].is_finite() {
                ((self.x[bv] - self.lower[bv]) / alpha, VarState::AtLower)
            } else if alpha < -PIVOT_TOL && self.upper[bv].is_finite() {
                ((self.upper[bv] - self.x[bv]) / -alpha, VarState::AtUpper)
            } else {
                continue;
            };
            let ratio = ratio.max(0.0);
            let better = match leaving {
                _ if ratio < theta - TIE_TOL => true,
                Some((lr, _)) => (ratio - theta).abs() <= TIE_TOL && bv < self.basis[lr],
                None => false,
            };
            if better {
                theta = ratio;
                leaving = Some((r, target));
            }
        }
        if !theta.is_finite() {
            return Ok(Step::Unbounded);
        }

        self.x[j] += dir * theta;
        for r in 0..self.m {
            let bv = self.basis[r];
            self.x[bv] -= dir * theta * w[r];
        }
        match leaving {
            None => {
                // bound flip, basis unchanged
                if dir > 0.0 {
                    self.x[j] = self.upper[j];
                    self.state[j] = VarState::AtUpper;
                } else {
                    self.x[j] = self.lower[j];
                    self.state[j] = VarState::AtLower;
                }
            }
            Some((r, target)) => {
                let bv = self.basis[r];
                self.x[bv] = if target == VarState::AtLower { self.lower[bv] } else { self.upper[bv] };
                self.state[bv] = target;
                self.pivot(r, &w);
                self.basis[r] = j;
                self.state[j] = VarState::Basic;
                self.since_refactor += 1;
                if self.since_refactor >= REFACTOR_EVERY {
                    self.refactor()?;
                }
            }
        }
        self.iterations += 1;
        Ok(Step::Continue)
    }

    fn run(&mut self) -> Result<bool, LpError> {
        loop {
            match self.step()? {
                Step::Optimal => return Ok(true),
                Step::Unbounded => return Ok(false),
                Step::Continue => {}
            }
        }
    }

    /// Pivots zero-valued artificials out of the basis where a structural
    /// column can replace them; rows where none can are redundant.
    fn drive_out_artificials(&mut self) {
        for r in 0..self.m {
            if self.basis[r] < self.n {
                continue;
            }
            let row: Vec<f64> = self.binv.row(r).iter().cloned().collect();
            let candidate = (0..self.n).find(|&j| {
                self.state[j] != VarState::Basic && self.column_dot(j, &row).abs() > PIVOT_TOL
            });
            if let Some(j) = candidate {
                let w = self.ftran(j);
                let old = self.basis[r];
                self.x[old] = 0.0;
                self.state[old] = VarState::AtLower;
                self.pivot(r, &w);
                self.basis[r] = j;
                self.state[j] = VarState::Basic;
                self.since_refactor += 1;
            }
        }
    }
}

/// Solves `lp`. `Infeasible` and `Unbounded` are reported through
/// [`LpSolution::status`]; only the iteration cap and malformed input are errors.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let m = lp.num_constraints();
    let n = lp.num_vars();

    let mut row_scale = vec![1.0; m];
    let mut a = lp.eq_matrix.clone();
    let mut b = lp.eq_rhs.clone();
    for i in 0..m {
        let s = a.row(i).amax();
        if s > 0.0 {
            row_scale[i] = s;
            for j in 0..n {
                a[(i, j)] /= s;
            }
            b[i] /= s;
        }
    }

    let total = n + m;
    let mut lower = lp.lower.clone();
    let mut upper = lp.upper.clone();
    lower.extend(std::iter::repeat_n(0.0, m));
    upper.extend(std::iter::repeat_n(0.0, m));
    let mut x = vec![0.0; total];
    let mut state = vec![VarState::AtLower; total];
    for j in 0..n {
        (x[j], state[j]) = if lower[j].is_finite() {
            (lower[j], VarState::AtLower)
        } else if upper[j].is_finite() {
            (upper[j], VarState::AtUpper)
        } else {
            (0.0, VarState::Free)
        };
    }

    let mut resid = b.clone();
    for j in 0..n {
        if x[j] != 0.0 {
            for i in 0..m {
                resid[i] -= a[(i, j)] * x[j];
            }
        }
    }

    // Crash: a singleton column whose adjusted value stays within bounds can
    // start basic in its row; every other row gets an artificial.
    let nnz: Vec<usize> = (0..n).map(|j| a.column(j).iter().filter(|v| **v != 0.0).count()).collect();
    let mut basis = vec![usize::MAX; m];
    let mut binv = DMatrix::zeros(m, m);
    let mut art_sign = vec![1.0; m];
    let mut used = vec![false; n];
    let mut needs_phase_one = false;
    for i in 0..m {
        let crash = (0..n).find(|&j| {
            if used[j] || nnz[j] != 1 || a[(i, j)].abs() < PIVOT_TOL {
                return false;
            }
            let v = x[j] + resid[i] / a[(i, j)];
            v >= lower[j] - 1e-12 && v <= upper[j] + 1e-12
        });
        match crash {
            Some(j) => {
                used[j] = true;
                x[j] = (x[j] + resid[i] / a[(i, j)]).clamp(lower[j], upper[j]);
                state[j] = VarState::Basic;
                basis[i] = j;
                binv[(i, i)] = 1.0 / a[(i, j)];
            }
            None => {
                let art = n + i;
                art_sign[i] = if resid[i] >= 0.0 { 1.0 } else { -1.0 };
                x[art] = resid[i].abs();
                upper[art] = f64::INFINITY;
                state[art] = VarState::Basic;
                basis[i] = art;
                binv[(i, i)] = art_sign[i];
                needs_phase_one = true;
            }
        }
    }

    let mut cost = vec![0.0; total];
    for i in 0..m {
        if basis[i] >= n {
            cost[n + i] = 1.0;
        }
    }

    let mut sx = Simplex {
        m,
        n,
        a: &a,
        b,
        art_sign,
        lower,
        upper,
        cost,
        x,
        state,
        basis,
        binv,
        since_refactor: 0,
        iterations: 0,
        limit: 50 * (m + n).max(1),
        allow_artificial_entry: true,
    };

    if needs_phase_one {
        sx.run()?;
        sx.refactor()?;
        let infeasibility: f64 = (n..total).map(|j| sx.x[j].abs()).sum();
        let scale = 1.0 + sx.b.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if infeasibility > 1e-9 * scale {
            return Ok(finish(lp, &sx, &row_scale, LpStatus::Infeasible));
        }
        for j in n..total {
            sx.upper[j] = 0.0;
            sx.lower[j] = 0.0;
            if sx.state[j] != VarState::Basic {
                sx.x[j] = 0.0;
                sx.state[j] = VarState::AtLower;
            }
        }
        sx.drive_out_artificials();
        sx.refactor()?;
    }

    sx.allow_artificial_entry = false;
    sx.cost = lp.objective.clone();
    sx.cost.extend(std::iter::repeat_n(0.0, m));
    let bounded = sx.run()?;
    sx.refactor()?;
    let status = if bounded { LpStatus::Optimal } else { LpStatus::Unbounded };
    Ok(finish(lp, &sx, &row_scale, status))
}

fn finish(lp: &LinearProgram, sx: &Simplex<'_>, row_scale: &[f64], status: LpStatus) -> LpSolution {
    let n = sx.n;
    let point: Vec<f64> = (0..n)
        .map(|j| match sx.state[j] {
            // snap nonbasic values exactly onto their bounds
            VarState::AtLower => sx.lower[j],
            VarState::AtUpper => sx.upper[j],
            _ => sx.x[j],
        })
        .collect();
    let y_scaled = sx.prices();
    let duals: Vec<f64> = y_scaled.iter().zip(row_scale).map(|(y, s)| y / s).collect();
    let reduced_costs: Vec<f64> = (0..n)
        .map(|j| lp.objective[j] - lp.eq_matrix.column(j).iter().zip(&duals).map(|(a, y)| a * y).sum::<f64>())
        .collect();
    let objective_value = match status {
        LpStatus::Optimal => lp.objective.iter().zip(&point).map(|(c, x)| c * x).sum(),
        LpStatus::Unbounded => f64::NEG_INFINITY,
        LpStatus::Infeasible => f64::INFINITY,
    };
    LpSolution { status, point, objective_value, duals, reduced_costs, iterations: sx.iterations }
}

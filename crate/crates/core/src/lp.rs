//! Dense two-phase simplex solver with self-checked certificates.
//!
//! Every decision procedure in this crate compiles to a small linear program
//! (a handful of states plus one epigraph variable), so the solver favours
//! reproducibility over speed: a dense tableau, Bland's lowest-index rule for
//! both the entering and the leaving variable, and a certificate check on
//! every return path. An `Optimal` outcome carries a dual vector whose
//! feasibility and duality gap were verified against the original program;
//! an `Infeasible` outcome carries a verified Farkas vector; an `Unbounded`
//! outcome carries a verified improving ray.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Absolute primal/dual feasibility tolerance, scaled by the program's data magnitude.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Duality-gap tolerance, scaled like [`FEASIBILITY_TOL`].
pub const GAP_TOL: f64 = 1e-7;

const PIVOT_TOL: f64 = 1e-11;
const REDUCED_COST_TOL: f64 = 1e-11;
const TIE_TOL: f64 = 1e-12;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed program: {0}")]
    MalformedProgram(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    /// `coeffs · x <= rhs`
    Le,
    /// `coeffs · x == rhs`
    Eq,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bound {
    Lower(f64),
    Free,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `minimize objective · x` subject to the constraint rows and per-variable bounds.
///
/// Variables default to `x >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    bounds: Vec<Bound>,
}

impl LinearProgram {
    pub fn minimize(objective: Vec<f64>) -> Self {
        let bounds = vec![Bound::Lower(0.0); objective.len()];
        Self {
            objective,
            constraints: Vec::new(),
            bounds,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn bounds(&self) -> &[Bound] {
        &self.bounds
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn add_le(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.constrain(coeffs, Relation::Le, rhs)
    }

    /// Stored as the negated `<=` row.
    pub fn add_ge(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        let negated = coeffs.into_iter().map(|a| -a).collect();
        self.constrain(negated, Relation::Le, -rhs)
    }

    pub fn add_eq(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.constrain(coeffs, Relation::Eq, rhs)
    }

    /// # Panics
    /// If `var` is not a variable of the program.
    pub fn set_free(&mut self, var: usize) -> &mut Self {
        self.bounds[var] = Bound::Free;
        self
    }

    /// # Panics
    /// If `var` is not a variable of the program.
    pub fn set_lower_bound(&mut self, var: usize, lower: f64) -> &mut Self {
        self.bounds[var] = Bound::Lower(lower);
        self
    }

    pub fn solve(&self) -> Result<LpOutcome, LpError> {
        solve(self)
    }

    fn validate(&self) -> Result<(), LpError> {
        let width = self.objective.len();
        if width == 0 {
            return Err(LpError::MalformedProgram("program has no variables".into()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::MalformedProgram(
                "objective has a non-finite coefficient".into(),
            ));
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if row.coeffs.len() != width {
                return Err(LpError::MalformedProgram(format!(
                    "row {i} has {} coefficients, objective has {width}",
                    row.coeffs.len()
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(LpError::MalformedProgram(format!(
                    "row {i} has a non-finite entry"
                )));
            }
        }
        if self.bounds.len() != width {
            return Err(LpError::MalformedProgram(
                "bound vector width mismatch".into(),
            ));
        }
        if self
            .bounds
            .iter()
            .any(|b| matches!(b, Bound::Lower(l) if !l.is_finite()))
        {
            return Err(LpError::MalformedProgram(
                "lower bounds must be finite (use Bound::Free)".into(),
            ));
        }
        Ok(())
    }

    /// Largest absolute entry of the data, plus one. Tolerances scale with it.
    fn scale(&self) -> f64 {
        let mut scale: f64 = 0.0;
        for c in &self.objective {
            scale = scale.max(c.abs());
        }
        for row in &self.constraints {
            scale = scale.max(row.rhs.abs());
            for a in &row.coeffs {
                scale = scale.max(a.abs());
            }
        }
        for b in &self.bounds {
            if let Bound::Lower(l) = b {
                scale = scale.max(l.abs());
            }
        }
        1.0 + scale
    }

    fn row_activity(&self, row: &Constraint, x: &[f64]) -> f64 {
        dot(&row.coeffs, x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal(Optimum),
    Infeasible(FarkasCertificate),
    Unbounded(UnboundedRay),
}

impl LpOutcome {
    pub fn status(&self) -> LpStatus {
        match self {
            LpOutcome::Optimal(_) => LpStatus::Optimal,
            LpOutcome::Infeasible(_) => LpStatus::Infeasible,
            LpOutcome::Unbounded(_) => LpStatus::Unbounded,
        }
    }

    pub fn optimum(&self) -> Option<&Optimum> {
        match self {
            LpOutcome::Optimal(opt) => Some(opt),
            _ => None,
        }
    }

    pub fn into_optimum(self) -> Option<Optimum> {
        match self {
            LpOutcome::Optimal(opt) => Some(opt),
            _ => None,
        }
    }
}

/// Verified primal/dual pair.
///
/// Dual sign convention (minimization): `dual[i] <= 0` on `<=` rows, free on
/// `=` rows, and the reduced costs `c - Aᵀy` are `>= 0` on bounded variables
/// and zero on free ones.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimum {
    pub value: f64,
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
    pub residuals: Residuals,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Multipliers `y` (nonnegative on `<=` rows) with `w = Aᵀy` vanishing on free
/// variables, nonnegative on bounded ones, and `y·b - w·lower < 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct FarkasCertificate {
    pub multipliers: Vec<f64>,
}

impl FarkasCertificate {
    /// Returns the certified infeasibility margin `w·lower - y·b` (positive)
    /// or `None` when the certificate does not prove infeasibility of `lp`.
    pub fn verify(&self, lp: &LinearProgram) -> Option<f64> {
        let tol = FEASIBILITY_TOL * lp.scale();
        let y = &self.multipliers;
        if y.len() != lp.constraints.len() {
            return None;
        }
        let mut yb = 0.0;
        for (row, &yi) in lp.constraints.iter().zip(y) {
            if row.relation == Relation::Le && yi < -tol {
                return None;
            }
            yb += yi * row.rhs;
        }
        let y_norm = 1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let mut w_lower = 0.0;
        for j in 0..lp.num_vars() {
            let w: f64 = lp
                .constraints
                .iter()
                .zip(y)
                .map(|(row, yi)| row.coeffs[j] * yi)
                .sum();
            match lp.bounds[j] {
                Bound::Free if w.abs() > tol * y_norm => return None,
                Bound::Lower(_) if w < -tol * y_norm => return None,
                Bound::Lower(l) => w_lower += w * l,
                Bound::Free => {}
            }
        }
        let margin = w_lower - yb;
        (margin > tol * y_norm).then_some(margin)
    }
}

/// A feasible point and a direction along which the objective decreases without bound.
#[derive(Clone, Debug, PartialEq)]
pub struct UnboundedRay {
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
}

impl UnboundedRay {
    pub fn verify(&self, lp: &LinearProgram) -> bool {
        let tol = FEASIBILITY_TOL * lp.scale();
        if primal_residual(lp, &self.point) > tol {
            return false;
        }
        let d = &self.direction;
        let d_norm = 1.0 + d.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for row in &lp.constraints {
            let ad = dot(&row.coeffs, d);
            let bad = match row.relation {
                Relation::Le => ad > tol * d_norm,
                Relation::Eq => ad.abs() > tol * d_norm,
            };
            if bad {
                return false;
            }
        }
        for (j, b) in lp.bounds.iter().enumerate() {
            if matches!(b, Bound::Lower(_)) && d[j] < -tol * d_norm {
                return false;
            }
        }
        dot(&lp.objective, d) < -tol * d_norm
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    lp.validate()?;
    let std = StandardForm::build(lp);
    let mut tab = Tableau::new(&std);

    // Phase one: minimise the sum of artificials.
    let phase_one_cost: Vec<f64> = (0..std.ncols)
        .map(|j| if std.is_artificial(j) { 1.0 } else { 0.0 })
        .collect();
    tab.load_objective(&phase_one_cost);
    match tab.iterate(|_| false)? {
        Termination::Optimal => {}
        Termination::Unbounded(_) => {
            return Err(LpError::NumericalFailure(
                "phase one reported an unbounded direction".into(),
            ))
        }
    }
    let infeasibility: f64 = tab
        .basis
        .iter()
        .enumerate()
        .filter(|(_, &j)| std.is_artificial(j))
        .map(|(r, _)| tab.rhs(r))
        .sum();
    if infeasibility > FEASIBILITY_TOL * std.scale {
        let y1 = tab.basis_duals(&std, &phase_one_cost)?;
        let multipliers: Vec<f64> = y1.iter().zip(&std.row_sign).map(|(y, s)| -s * y).collect();
        let cert = FarkasCertificate { multipliers };
        if cert.verify(lp).is_none() {
            return Err(LpError::NumericalFailure(
                "Farkas certificate failed verification".into(),
            ));
        }
        return Ok(LpOutcome::Infeasible(cert));
    }
    tab.drive_out_artificials(&std);

    // Phase two on the original costs, artificial columns barred from entering.
    tab.load_objective(&std.cost);
    match tab.iterate(|j| std.is_artificial(j))? {
        Termination::Optimal => {}
        Termination::Unbounded(col) => {
            let point = std.recover(&tab.basic_solution(std.ncols));
            let mut dir_std = vec![0.0; std.ncols];
            dir_std[col] = 1.0;
            for (r, &b) in tab.basis.iter().enumerate() {
                dir_std[b] = -tab.rows[r][col];
            }
            let direction = std.recover_direction(&dir_std);
            let ray = UnboundedRay { point, direction };
            if !ray.verify(lp) {
                return Err(LpError::NumericalFailure(
                    "unbounded ray failed verification".into(),
                ));
            }
            return Ok(LpOutcome::Unbounded(ray));
        }
    }

    let primal = std.recover(&tab.basic_solution(std.ncols));
    let y_std = tab.basis_duals(&std, &std.cost)?;
    let dual: Vec<f64> = y_std
        .iter()
        .zip(&std.row_sign)
        .map(|(y, s)| s * y)
        .collect();
    let value = dot(&lp.objective, &primal);
    let residuals = optimality_residuals(lp, &primal, &dual);
    let tol = std.scale;
    if residuals.primal > FEASIBILITY_TOL * tol
        || residuals.dual > FEASIBILITY_TOL * tol
        || residuals.gap > GAP_TOL * tol
    {
        return Err(LpError::NumericalFailure(format!(
            "optimality certificate rejected: primal {:.3e}, dual {:.3e}, gap {:.3e}",
            residuals.primal, residuals.dual, residuals.gap
        )));
    }
    Ok(LpOutcome::Optimal(Optimum {
        value,
        primal,
        dual,
        residuals,
    }))
}

/// Largest violation of any row or bound by `x`.
pub fn primal_residual(lp: &LinearProgram, x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for row in &lp.constraints {
        let ax = lp.row_activity(row, x);
        let v = match row.relation {
            Relation::Le => ax - row.rhs,
            Relation::Eq => (ax - row.rhs).abs(),
        };
        worst = worst.max(v);
    }
    for (j, b) in lp.bounds.iter().enumerate() {
        if let Bound::Lower(l) = b {
            worst = worst.max(l - x[j]);
        }
    }
    worst
}

/// Primal infeasibility, dual infeasibility and absolute duality gap of `(x, y)`.
pub fn optimality_residuals(lp: &LinearProgram, x: &[f64], y: &[f64]) -> Residuals {
    let primal = primal_residual(lp, x);
    let mut dual: f64 = 0.0;
    let mut dual_value = 0.0;
    for (row, &yi) in lp.constraints.iter().zip(y) {
        if row.relation == Relation::Le {
            dual = dual.max(yi);
        }
        dual_value += yi * row.rhs;
    }
    for j in 0..lp.num_vars() {
        let aty: f64 = lp
            .constraints
            .iter()
            .zip(y)
            .map(|(row, yi)| row.coeffs[j] * yi)
            .sum();
        let reduced = lp.objective[j] - aty;
        match lp.bounds[j] {
            Bound::Lower(l) => {
                dual = dual.max(-reduced);
                dual_value += l * reduced;
            }
            Bound::Free => dual = dual.max(reduced.abs()),
        }
    }
    let gap = (dot(&lp.objective, x) - dual_value).abs();
    Residuals { primal, dual, gap }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug)]
enum Column {
    Shifted(usize),
    Positive(usize),
    Negative(usize),
    Slack,
    Artificial,
}

/// `A' x' = b'`, `x' >= 0`, `b' >= 0`, with one slack or artificial per row
/// forming the starting basis.
struct StandardForm {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    cost: Vec<f64>,
    columns: Vec<Column>,
    row_sign: Vec<f64>,
    initial_basis: Vec<usize>,
    ncols: usize,
    nvars: usize,
    lower: Vec<f64>,
    scale: f64,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> Self {
        let nvars = lp.num_vars();
        let m = lp.constraints.len();
        let lower: Vec<f64> = lp
            .bounds
            .iter()
            .map(|b| match b {
                Bound::Lower(l) => *l,
                Bound::Free => 0.0,
            })
            .collect();

        let mut columns = Vec::new();
        for (j, b) in lp.bounds.iter().enumerate() {
            match b {
                Bound::Lower(_) => columns.push(Column::Shifted(j)),
                Bound::Free => {
                    columns.push(Column::Positive(j));
                    columns.push(Column::Negative(j));
                }
            }
        }
        let structural = columns.len();

        let mut row_sign = Vec::with_capacity(m);
        let mut b = Vec::with_capacity(m);
        for row in &lp.constraints {
            let shifted = row.rhs - dot(&row.coeffs, &lower);
            let sign = if shifted < 0.0 { -1.0 } else { 1.0 };
            row_sign.push(sign);
            b.push(sign * shifted);
        }

        // Slack columns for `<=` rows; a slack can start basic only if its row kept its sign.
        let mut slack_of_row = vec![None; m];
        for (i, row) in lp.constraints.iter().enumerate() {
            if row.relation == Relation::Le {
                slack_of_row[i] = Some(columns.len());
                columns.push(Column::Slack);
            }
        }
        let mut initial_basis = vec![0; m];
        for i in 0..m {
            match slack_of_row[i] {
                Some(s) if row_sign[i] > 0.0 => initial_basis[i] = s,
                _ => {
                    initial_basis[i] = columns.len();
                    columns.push(Column::Artificial);
                }
            }
        }
        let ncols = columns.len();

        let mut a = vec![vec![0.0; ncols]; m];
        for (i, row) in lp.constraints.iter().enumerate() {
            let sign = row_sign[i];
            for (k, col) in columns[..structural].iter().enumerate() {
                a[i][k] = match *col {
                    Column::Shifted(j) | Column::Positive(j) => sign * row.coeffs[j],
                    Column::Negative(j) => -sign * row.coeffs[j],
                    _ => unreachable!(),
                };
            }
            if let Some(s) = slack_of_row[i] {
                a[i][s] = sign;
            }
            let basic = initial_basis[i];
            if matches!(columns[basic], Column::Artificial) {
                a[i][basic] = 1.0;
            }
        }

        let cost = columns
            .iter()
            .map(|col| match *col {
                Column::Shifted(j) | Column::Positive(j) => lp.objective[j],
                Column::Negative(j) => -lp.objective[j],
                Column::Slack | Column::Artificial => 0.0,
            })
            .collect();

        Self {
            a,
            b,
            cost,
            columns,
            row_sign,
            initial_basis,
            ncols,
            nvars,
            lower,
            scale: lp.scale(),
        }
    }

    fn is_artificial(&self, col: usize) -> bool {
        matches!(self.columns[col], Column::Artificial)
    }

    fn recover(&self, x_std: &[f64]) -> Vec<f64> {
        let mut x = self.lower.clone();
        for (k, col) in self.columns.iter().enumerate() {
            match *col {
                Column::Shifted(j) | Column::Positive(j) => x[j] += x_std[k],
                Column::Negative(j) => x[j] -= x_std[k],
                _ => {}
            }
        }
        x
    }

    fn recover_direction(&self, d_std: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.nvars];
        for (k, col) in self.columns.iter().enumerate() {
            match *col {
                Column::Shifted(j) | Column::Positive(j) => d[j] += d_std[k],
                Column::Negative(j) => d[j] -= d_std[k],
                _ => {}
            }
        }
        d
    }
}

enum Termination {
    Optimal,
    Unbounded(usize),
}

struct Tableau {
    /// Each row holds `ncols` coefficients followed by the right-hand side.
    rows: Vec<Vec<f64>>,
    /// Reduced costs followed by minus the objective value.
    objective: Vec<f64>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn new(std: &StandardForm) -> Self {
        let rows = std
            .a
            .iter()
            .zip(&std.b)
            .map(|(row, &rhs)| {
                let mut r = row.clone();
                r.push(rhs);
                r
            })
            .collect();
        Self {
            rows,
            objective: vec![0.0; std.ncols + 1],
            basis: std.initial_basis.clone(),
            ncols: std.ncols,
        }
    }

    fn rhs(&self, r: usize) -> f64 {
        self.rows[r][self.ncols]
    }

    fn load_objective(&mut self, cost: &[f64]) {
        let mut obj = cost.to_vec();
        obj.push(0.0);
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (o, t) in obj.iter_mut().zip(&self.rows[r]) {
                    *o -= cb * t;
                }
            }
        }
        self.objective = obj;
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rows[r][c] = 1.0;
        let pivot_row = self.rows[r].clone();
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let factor = row[c];
            if factor != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                row[c] = 0.0;
            }
        }
        let factor = self.objective[c];
        if factor != 0.0 {
            for (v, pv) in self.objective.iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
            }
            self.objective[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Bland's rule: lowest-index improving column, lowest-index basic variable on ratio ties.
    fn iterate(&mut self, barred: impl Fn(usize) -> bool) -> Result<Termination, LpError> {
        for _ in 0..MAX_PIVOTS {
            let entering =
                (0..self.ncols).find(|&j| !barred(j) && self.objective[j] < -REDUCED_COST_TOL);
            let Some(col) = entering else {
                return Ok(Termination::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][col];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((best_r, best)) => {
                        if ratio < best - TIE_TOL
                            || (ratio <= best + TIE_TOL && self.basis[r] < self.basis[best_r])
                        {
                            Some((r, ratio))
                        } else {
                            Some((best_r, best))
                        }
                    }
                };
            }
            match leave {
                None => return Ok(Termination::Unbounded(col)),
                Some((r, _)) => self.pivot(r, col),
            }
        }
        Err(LpError::NumericalFailure(format!(
            "no convergence within {MAX_PIVOTS} pivots"
        )))
    }

    /// Pivots zero-level artificials out of the basis wherever a structural entry allows it.
    fn drive_out_artificials(&mut self, std: &StandardForm) {
        for r in 0..self.rows.len() {
            if !std.is_artificial(self.basis[r]) {
                continue;
            }
            let col =
                (0..self.ncols).find(|&j| !std.is_artificial(j) && self.rows[r][j].abs() > 1e-9);
            if let Some(c) = col {
                self.pivot(r, c);
            }
        }
    }

    fn basic_solution(&self, ncols: usize) -> Vec<f64> {
        let mut x = vec![0.0; ncols];
        for (r, &b) in self.basis.iter().enumerate() {
            x[b] = self.rhs(r).max(0.0);
        }
        x
    }

    /// Solves `Bᵀ y = c_B` against the original standard-form columns.
    fn basis_duals(&self, std: &StandardForm, cost: &[f64]) -> Result<Vec<f64>, LpError> {
        let m = self.rows.len();
        if m == 0 {
            return Ok(Vec::new());
        }
        let bt = DMatrix::from_fn(m, m, |r, c| std.a[c][self.basis[r]]);
        let cb = DVector::from_iterator(m, self.basis.iter().map(|&j| cost[j]));
        bt.lu()
            .solve(&cb)
            .map(|y| y.iter().copied().collect())
            .ok_or_else(|| LpError::NumericalFailure("singular basis".into()))
    }
}

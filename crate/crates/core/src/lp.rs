//! Linear programming support for the baseline allocators: a small model
//! builder, an embedded two-phase dense simplex (Bland's rule, deterministic,
//! intended for desk-scale instances and test oracles) and a HiGHS-backed
//! solve path for the larger models the simulations produce.

use crate::scalar::Scalar;
use std::fmt::Write as _;
use thiserror::Error;

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct VarDef<F> {
    name: String,
    obj: F,
    /// Upper bound; lower bound is always zero. None means unbounded above.
    upper: Option<F>,
}

#[derive(Debug, Clone)]
pub struct Constraint<F> {
    pub coeffs: Vec<(VarId, F)>,
    pub rel: Relation,
    pub rhs: F,
}

/// A linear program over named non-negative variables.
#[derive(Debug, Clone)]
pub struct LpModel<F> {
    sense: Sense,
    vars: Vec<VarDef<F>>,
    constraints: Vec<Constraint<F>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution<F> {
    pub status: LpStatus,
    /// Per-variable values; empty unless status is Optimal.
    pub values: Vec<F>,
    pub objective: F,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("pivot limit of {limit} exceeded")]
    IterationLimit { limit: usize },
    #[error("malformed model: {0}")]
    BadModel(String),
    #[error("solver backend failed: {0}")]
    Backend(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpBackend {
    /// The embedded dense two-phase simplex.
    Embedded,
    /// HiGHS (single-threaded, deterministic); used for simulation-scale
    /// models where a dense tableau would be too slow.
    Highs,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub backend: LpBackend,
    /// Pivot cap for the embedded simplex.
    pub max_pivots: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { backend: LpBackend::Embedded, max_pivots: 1_000_000 }
    }
}

impl<F: Scalar> Default for LpModel<F> {
    fn default() -> Self {
        Self::new(Sense::Minimize)
    }
}

impl<F: Scalar> LpModel<F> {
    pub fn new(sense: Sense) -> Self {
        LpModel { sense, vars: Vec::new(), constraints: Vec::new() }
    }

    pub fn add_var(&mut self, name: impl Into<String>, obj: F) -> VarId {
        self.vars.push(VarDef { name: name.into(), obj, upper: None });
        self.vars.len() - 1
    }

    pub fn add_bounded_var(&mut self, name: impl Into<String>, obj: F, upper: F) -> VarId {
        self.vars.push(VarDef { name: name.into(), obj, upper: Some(upper) });
        self.vars.len() - 1
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(VarId, F)>, rel: Relation, rhs: F) {
        self.constraints.push(Constraint { coeffs, rel, rhs });
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.vars[v].name
    }

    fn validate(&self) -> Result<(), LpError> {
        for (i, c) in self.constraints.iter().enumerate() {
            for &(v, coef) in &c.coeffs {
                if v >= self.vars.len() {
                    return Err(LpError::BadModel(format!("constraint {i} references unknown variable {v}")));
                }
                if !coef.is_finite() {
                    return Err(LpError::BadModel(format!("constraint {i} has non-finite coefficient")));
                }
            }
            if !c.rhs.is_finite() {
                return Err(LpError::BadModel(format!("constraint {i} has non-finite rhs")));
            }
        }
        Ok(())
    }

    /// Objective value of an assignment, independent of any solver.
    pub fn objective_of(&self, values: &[F]) -> F {
        self.vars.iter().zip(values).map(|(v, &x)| v.obj * x).fold(F::zero(), |a, b| a + b)
    }

    /// Largest absolute constraint violation of an assignment.
    pub fn max_violation(&self, values: &[F]) -> F {
        let mut worst = F::zero();
        for c in &self.constraints {
            let lhs = c.coeffs.iter().map(|&(v, k)| k * values[v]).fold(F::zero(), |a, b| a + b);
            let viol = match c.rel {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        for (i, v) in self.vars.iter().enumerate() {
            worst = worst.max(-values[i]);
            if let Some(u) = v.upper {
                worst = worst.max(values[i] - u);
            }
        }
        worst
    }

    /// Human-readable dump in the common LP interchange text format, for
    /// debugging models against external solvers.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", if self.sense == Sense::Minimize { "Minimize" } else { "Maximize" });
        let mut obj = String::from(" obj:");
        for (i, v) in self.vars.iter().enumerate() {
            if v.obj != F::zero() {
                let _ = write!(obj, " {} {} {}", if v.obj < F::zero() { "-" } else { "+" }, v.obj.abs(), self.vars[i].name);
            }
        }
        let _ = writeln!(out, "{obj}");
        let _ = writeln!(out, "Subject To");
        for (i, c) in self.constraints.iter().enumerate() {
            let mut row = format!(" c{i}:");
            for &(v, k) in &c.coeffs {
                let _ = write!(row, " {} {} {}", if k < F::zero() { "-" } else { "+" }, k.abs(), self.vars[v].name);
            }
            let rel = match c.rel {
                Relation::Le => "<=",
                Relation::Ge => ">=",
                Relation::Eq => "=",
            };
            let _ = writeln!(out, "{row} {rel} {}", c.rhs);
        }
        let _ = writeln!(out, "Bounds");
        for v in &self.vars {
            match v.upper {
                Some(u) => {
                    let _ = writeln!(out, " 0 <= {} <= {}", v.name, u);
                }
                None => {
                    let _ = writeln!(out, " 0 <= {}", v.name);
                }
            }
        }
        let _ = writeln!(out, "End");
        out
    }
}

/// Solves with the embedded simplex and default options.
pub fn solve_lp<F: Scalar>(model: &LpModel<F>) -> Result<LpSolution<F>, LpError> {
    solve_with(model, SolveOptions::default())
}

pub fn solve_with<F: Scalar>(model: &LpModel<F>, opts: SolveOptions) -> Result<LpSolution<F>, LpError> {
    model.validate()?;
    match opts.backend {
        LpBackend::Embedded => simplex_solve(model, opts.max_pivots),
        LpBackend::Highs => highs_solve(model),
    }
}

// ---------------------------------------------------------------------------
// Embedded two-phase dense simplex.
//
// Standard form: minimize c'x subject to Ax (rel) b, 0 <= x (<= u). Upper
// bounds become explicit rows. Rows are normalized to b >= 0; <= rows get a
// slack, >= rows a surplus plus an artificial, = rows an artificial. Phase 1
// minimizes the artificial sum; phase 2 the real objective. Bland's rule
// (smallest eligible index) prevents cycling and fixes the pivot order.
// ---------------------------------------------------------------------------

struct Tableau<F> {
    /// rows x cols; last column is the rhs, last row the objective.
    a: Vec<Vec<F>>,
    basis: Vec<usize>,
    n_rows: usize,
    n_cols: usize,
}

impl<F: Scalar> Tableau<F> {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.a[row][col];
        for j in 0..=self.n_cols {
            self.a[row][j] = self.a[row][j] / piv;
        }
        for i in 0..=self.n_rows {
            if i == row {
                continue;
            }
            let factor = self.a[i][col];
            if factor != F::zero() {
                for j in 0..=self.n_cols {
                    self.a[i][j] = self.a[i][j] - factor * self.a[row][j];
                }
            }
        }
        self.basis[row] = col;
    }

    /// One simplex phase on the current objective row. Returns Ok(true) if
    /// optimal, Ok(false) if unbounded.
    fn run(&mut self, pivots: &mut usize, max_pivots: usize) -> Result<bool, LpError> {
        let eps = F::LP_EPS;
        loop {
            // Bland: entering variable = smallest index with negative reduced cost
            let mut entering = None;
            for j in 0..self.n_cols {
                if self.a[self.n_rows][j] < -eps {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else { return Ok(true) };
            // leaving: min ratio, ties by smallest basis index
            let mut leaving: Option<(usize, F)> = None;
            for i in 0..self.n_rows {
                if self.a[i][col] > eps {
                    let ratio = self.a[i][self.n_cols] / self.a[i][col];
                    match leaving {
                        None => leaving = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - eps || (ratio < lr + eps && self.basis[i] < self.basis[li]) {
                                leaving = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, _)) = leaving else { return Ok(false) };
            self.pivot(row, col);
            *pivots += 1;
            if *pivots > max_pivots {
                return Err(LpError::IterationLimit { limit: max_pivots });
            }
        }
    }
}

fn simplex_solve<F: Scalar>(model: &LpModel<F>, max_pivots: usize) -> Result<LpSolution<F>, LpError> {
    let eps = F::LP_EPS;
    let n = model.vars.len();

    // materialize rows, including upper bounds
    let mut rows: Vec<(Vec<F>, Relation, F)> = Vec::new();
    for c in &model.constraints {
        let mut dense = vec![F::zero(); n];
        for &(v, k) in &c.coeffs {
            dense[v] = dense[v] + k;
        }
        rows.push((dense, c.rel, c.rhs));
    }
    for (i, v) in model.vars.iter().enumerate() {
        if let Some(u) = v.upper {
            let mut dense = vec![F::zero(); n];
            dense[i] = F::one();
            rows.push((dense, Relation::Le, u));
        }
    }
    // normalize to non-negative rhs
    for (dense, rel, rhs) in rows.iter_mut() {
        if *rhs < F::zero() {
            for x in dense.iter_mut() {
                *x = -*x;
            }
            *rhs = -*rhs;
            *rel = match *rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let n_cols = n + n_slack + n_art;

    // a has m constraint rows + 1 objective row; the phase-1 objective is
    // rebuilt in place after phase 1 completes.
    let mut a = vec![vec![F::zero(); n_cols + 1]; m + 1];
    let mut basis = vec![0usize; m];
    let mut slack_at = n;
    let mut art_at = n + n_slack;
    let mut artificial_cols = Vec::new();

    for (i, (dense, rel, rhs)) in rows.iter().enumerate() {
        a[i][..n].copy_from_slice(dense);
        a[i][n_cols] = *rhs;
        match rel {
            Relation::Le => {
                a[i][slack_at] = F::one();
                basis[i] = slack_at;
                slack_at += 1;
            }
            Relation::Ge => {
                a[i][slack_at] = -F::one();
                slack_at += 1;
                a[i][art_at] = F::one();
                basis[i] = art_at;
                artificial_cols.push(art_at);
                art_at += 1;
            }
            Relation::Eq => {
                a[i][art_at] = F::one();
                basis[i] = art_at;
                artificial_cols.push(art_at);
                art_at += 1;
            }
        }
    }

    let mut tab = Tableau { a, basis, n_rows: m, n_cols };
    let mut pivots = 0usize;

    if !artificial_cols.is_empty() {
        // phase-1 objective: minimize sum of artificials = sum of their rows
        for j in 0..=n_cols {
            let mut s = F::zero();
            for i in 0..m {
                if artificial_cols.contains(&tab.basis[i]) {
                    s = s + tab.a[i][j];
                }
            }
            tab.a[m][j] = -s;
        }
        for &c in &artificial_cols {
            tab.a[m][c] = F::zero();
        }
        let optimal = tab.run(&mut pivots, max_pivots)?;
        debug_assert!(optimal, "phase 1 is always bounded");
        let phase1 = -tab.a[m][n_cols];
        if phase1.abs() > eps {
            return Ok(LpSolution { status: LpStatus::Infeasible, values: Vec::new(), objective: F::zero() });
        }
        // drive lingering zero-level artificials out of the basis
        for i in 0..m {
            if artificial_cols.contains(&tab.basis[i]) {
                let col = (0..n + n_slack).find(|&j| tab.a[i][j].abs() > eps);
                if let Some(j) = col {
                    tab.pivot(i, j);
                    pivots += 1;
                }
            }
        }
    }

    // phase-2 objective (minimization; maximize negates)
    for j in 0..=n_cols {
        tab.a[m][j] = F::zero();
    }
    for (i, v) in model.vars.iter().enumerate() {
        tab.a[m][i] = if model.sense == Sense::Minimize { v.obj } else { -v.obj };
    }
    for &c in &artificial_cols {
        // artificials must never re-enter
        tab.a[m][c] = F::from_f64_lossy(1e30);
    }
    // price out the basic columns
    for i in 0..m {
        let b = tab.basis[i];
        let coef = tab.a[m][b];
        if coef != F::zero() {
            for j in 0..=n_cols {
                tab.a[m][j] = tab.a[m][j] - coef * tab.a[i][j];
            }
        }
    }

    let optimal = tab.run(&mut pivots, max_pivots)?;
    if !optimal {
        return Ok(LpSolution { status: LpStatus::Unbounded, values: Vec::new(), objective: F::zero() });
    }

    let mut values = vec![F::zero(); n];
    for i in 0..m {
        if tab.basis[i] < n {
            values[tab.basis[i]] = tab.a[i][n_cols].max(F::zero());
        }
    }
    let objective = model.objective_of(&values);
    Ok(LpSolution { status: LpStatus::Optimal, values, objective })
}

// ---------------------------------------------------------------------------
// HiGHS backend
// ---------------------------------------------------------------------------

fn highs_solve<F: Scalar>(model: &LpModel<F>) -> Result<LpSolution<F>, LpError> {
    use highs::{HighsModelStatus, RowProblem, Sense as HSense};

    let build = || {
        let mut pb = RowProblem::default();
        let cols: Vec<highs::Col> = model
            .vars
            .iter()
            .map(|v| {
                let upper = v.upper.map(|u| u.to_f64_lossy()).unwrap_or(f64::INFINITY);
                pb.add_column(v.obj.to_f64_lossy(), 0.0..upper)
            })
            .collect();
        for c in &model.constraints {
            let rhs = c.rhs.to_f64_lossy();
            let row: Vec<(highs::Col, f64)> =
                c.coeffs.iter().map(|&(v, k)| (cols[v], k.to_f64_lossy())).collect();
            match c.rel {
                Relation::Le => pb.add_row(f64::NEG_INFINITY..=rhs, row),
                Relation::Ge => pb.add_row(rhs..=f64::INFINITY, row),
                Relation::Eq => pb.add_row(rhs..=rhs, row),
            };
        }
        pb
    };

    // presolve pays off on the column-heavy models (multipath, global
    // multicommodity) but costs more than the whole solve on the small
    // fixed-path ones, where devex pricing without scaling measures fastest
    let small = model.num_vars() < 800;

    let solve_once = |presolve: &str| {
        let t0 = std::time::Instant::now();
        let sense = if model.sense == Sense::Minimize { HSense::Minimise } else { HSense::Maximise };
        let pb = build();
        let t1 = std::time::Instant::now();
        let mut m = pb.optimise(sense);
        m.set_option("output_flag", false);
        m.set_option("threads", 1);
        m.set_option("presolve", presolve);
        m.set_option("primal_feasibility_tolerance", 1e-9);
        m.set_option("dual_feasibility_tolerance", 1e-9);
        if small {
            m.set_option("simplex_dual_edge_weight_strategy", 1); // devex
            m.set_option("simplex_scale_strategy", 0);
        }
        if let Some(v) = std::env::var_os("DCROUTE_LP_EDGE") {
            m.set_option("simplex_dual_edge_weight_strategy", v.to_string_lossy().parse::<i32>().unwrap());
        }
        if let Some(v) = std::env::var_os("DCROUTE_LP_SCALE") {
            m.set_option("simplex_scale_strategy", v.to_string_lossy().parse::<i32>().unwrap());
        }
        let t2 = std::time::Instant::now();
        let s = m.solve();
        if std::env::var_os("DCROUTE_LP_PROFILE").is_some() {
            eprintln!(
                "lp profile: build {:.3} ms, convert {:.3} ms, solve {:.3} ms",
                (t1 - t0).as_secs_f64() * 1e3,
                (t2 - t1).as_secs_f64() * 1e3,
                t2.elapsed().as_secs_f64() * 1e3
            );
        }
        s
    };

    let default_presolve = if small { "off" } else { "on" };
    let mut solved = solve_once(default_presolve);
    if solved.status() == HighsModelStatus::UnboundedOrInfeasible {
        solved = solve_once("off");
    }
    match solved.status() {
        HighsModelStatus::Optimal => {
            let values: Vec<F> =
                solved.get_solution().columns().iter().map(|&x| F::from_f64_lossy(x.max(0.0))).collect();
            let objective = model.objective_of(&values);
            Ok(LpSolution { status: LpStatus::Optimal, values, objective })
        }
        HighsModelStatus::Infeasible => {
            Ok(LpSolution { status: LpStatus::Infeasible, values: Vec::new(), objective: F::zero() })
        }
        HighsModelStatus::Unbounded => {
            Ok(LpSolution { status: LpStatus::Unbounded, values: Vec::new(), objective: F::zero() })
        }
        other => Err(LpError::Backend(format!("unexpected status {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn maximize_single_bounded_var() {
        let mut m: LpModel<f64> = LpModel::new(Sense::Maximize);
        let x = m.add_var("x", 1.0);
        m.add_constraint(vec![(x, 1.0)], Relation::Le, 1.0);
        let sol = solve_lp(&m).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.values[x] - 1.0).abs() < 1e-9);
        assert!((sol.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        let mut m: LpModel<f64> = LpModel::new(Sense::Minimize);
        let x = m.add_var("x", 0.0);
        m.add_constraint(vec![(x, 1.0)], Relation::Ge, 2.0);
        m.add_constraint(vec![(x, 1.0)], Relation::Le, 1.0);
        assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut m: LpModel<f64> = LpModel::new(Sense::Maximize);
        m.add_var("x", 1.0);
        assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_degenerate_rows() {
        let mut m: LpModel<f64> = LpModel::new(Sense::Minimize);
        let x = m.add_var("x", 1.0);
        let y = m.add_var("y", 2.0);
        m.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Eq, 3.0);
        m.add_constraint(vec![(x, 1.0)], Relation::Le, 2.0);
        let sol = solve_lp(&m).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        // cheapest way to reach 3.0 is x at its cap, remainder on y
        assert!((sol.values[x] - 2.0).abs() < 1e-7);
        assert!((sol.values[y] - 1.0).abs() < 1e-7);
        assert!((sol.objective - 4.0).abs() < 1e-7);
    }

    #[test]
    fn iteration_cap_is_a_distinct_error() {
        let mut m: LpModel<f64> = LpModel::new(Sense::Minimize);
        let x = m.add_var("x", 1.0);
        let y = m.add_var("y", 1.0);
        m.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Ge, 1.0);
        let err = solve_with(&m, SolveOptions { backend: LpBackend::Embedded, max_pivots: 0 }).unwrap_err();
        assert!(matches!(err, LpError::IterationLimit { .. }));
    }

    // -----------------------------------------------------------------
    // Vertex-enumeration oracle: a feasible LP in non-negative variables
    // has a vertex; enumerate every choice of n active constraints (rows
    // at equality plus coordinate planes plus upper-bound planes), solve
    // the linear system and keep the feasible points.
    // -----------------------------------------------------------------

    fn solve_system(mat: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
        let n = mat.len();
        let mut a: Vec<Vec<f64>> = mat.iter().cloned().collect();
        let mut b = rhs.to_vec();
        for col in 0..n {
            let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
            if a[pivot][col].abs() < 1e-10 {
                return None;
            }
            a.swap(col, pivot);
            b.swap(col, pivot);
            let p = a[col][col];
            for j in 0..n {
                a[col][j] /= p;
            }
            b[col] /= p;
            for i in 0..n {
                if i != col && a[i][col].abs() > 0.0 {
                    let f = a[i][col];
                    for j in 0..n {
                        a[i][j] -= f * a[col][j];
                    }
                    b[i] -= f * b[col];
                }
            }
        }
        Some(b)
    }

    fn oracle_vertices(model: &LpModel<f64>) -> Vec<Vec<f64>> {
        let n = model.num_vars();
        // candidate hyperplanes: every constraint at equality, every x_i = 0
        let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
        for c in &model.constraints {
            let mut dense = vec![0.0; n];
            for &(v, k) in &c.coeffs {
                dense[v] += k;
            }
            planes.push((dense, c.rhs));
        }
        for i in 0..n {
            let mut dense = vec![0.0; n];
            dense[i] = 1.0;
            planes.push((dense.clone(), 0.0));
            if let Some(u) = model.vars[i].upper {
                planes.push((dense, u));
            }
        }
        let mut verts = Vec::new();
        let idx: Vec<usize> = (0..planes.len()).collect();
        fn combos(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
            if k == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for (i, &x) in pool.iter().enumerate() {
                for mut rest in combos(&pool[i + 1..], k - 1) {
                    rest.insert(0, x);
                    out.push(rest);
                }
            }
            out
        }
        for combo in combos(&idx, n) {
            let mat: Vec<Vec<f64>> = combo.iter().map(|&i| planes[i].0.clone()).collect();
            let rhs: Vec<f64> = combo.iter().map(|&i| planes[i].1).collect();
            if let Some(x) = solve_system(&mat, &rhs) {
                if model.max_violation(&x) <= 1e-7 {
                    verts.push(x);
                }
            }
        }
        verts
    }

    fn random_model(rng: &mut ChaCha8Rng) -> LpModel<f64> {
        let n = rng.gen_range(2..=4);
        let m = rng.gen_range(1..=4);
        let mut model = LpModel::new(if rng.gen_bool(0.5) { Sense::Minimize } else { Sense::Maximize });
        for i in 0..n {
            model.add_bounded_var(format!("x{i}"), rng.gen_range(-3..=3) as f64, rng.gen_range(1..=4) as f64);
        }
        for _ in 0..m {
            let coeffs: Vec<(VarId, f64)> =
                (0..n).map(|v| (v, rng.gen_range(-2..=3) as f64)).filter(|&(_, k)| k != 0.0).collect();
            if coeffs.is_empty() {
                continue;
            }
            let rel = match rng.gen_range(0..3) {
                0 => Relation::Le,
                1 => Relation::Ge,
                _ => Relation::Eq,
            };
            model.add_constraint(coeffs, rel, rng.gen_range(-2..=6) as f64);
        }
        model
    }

    #[test]
    fn random_models_match_vertex_enumeration_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut optimal = 0;
        let mut infeasible = 0;
        for trial in 0..100 {
            let model = random_model(&mut rng);
            let sol = solve_lp(&model).unwrap();
            let verts = oracle_vertices(&model);
            match sol.status {
                LpStatus::Optimal => {
                    optimal += 1;
                    assert!(!verts.is_empty(), "trial {trial}: solver optimal but oracle finds no vertex");
                    assert!(model.max_violation(&sol.values) <= 1e-7, "trial {trial}: solution violates model");
                    // bounded vars: optimum must match the best vertex
                    let best = verts
                        .iter()
                        .map(|v| model.objective_of(v))
                        .fold(f64::NAN, |acc, x| {
                            if acc.is_nan() {
                                x
                            } else if model.sense == Sense::Minimize {
                                acc.min(x)
                            } else {
                                acc.max(x)
                            }
                        });
                    assert!(
                        (best - sol.objective).abs() <= 1e-6 * (1.0 + best.abs()),
                        "trial {trial}: solver {} vs oracle {best}",
                        sol.objective
                    );
                }
                LpStatus::Infeasible => {
                    infeasible += 1;
                    assert!(verts.is_empty(), "trial {trial}: solver infeasible but oracle found a vertex");
                }
                LpStatus::Unbounded => unreachable!("all variables bounded"),
            }
        }
        assert!(optimal > 10 && infeasible > 10, "mix of outcomes exercised ({optimal}/{infeasible})");
    }

    #[test]
    fn highs_agrees_with_embedded_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..60 {
            let model = random_model(&mut rng);
            let a = solve_lp(&model).unwrap();
            let b = solve_with(&model, SolveOptions { backend: LpBackend::Highs, ..Default::default() }).unwrap();
            assert_eq!(a.status, b.status, "trial {trial}");
            if a.status == LpStatus::Optimal {
                assert!(
                    (a.objective - b.objective).abs() <= 1e-6 * (1.0 + a.objective.abs()),
                    "trial {trial}: {} vs {}",
                    a.objective,
                    b.objective
                );
                assert!(model.max_violation(&b.values) <= 1e-6);
            }
        }
    }

    #[test]
    fn lp_format_dump_mentions_every_section() {
        let mut m: LpModel<f64> = LpModel::new(Sense::Minimize);
        let x = m.add_bounded_var("flow", 1.0, 2.5);
        m.add_constraint(vec![(x, 1.0)], Relation::Ge, 0.5);
        let dump = m.to_lp_format();
        for section in ["Minimize", "Subject To", "Bounds", "End", "flow"] {
            assert!(dump.contains(section), "missing {section} in:\n{dump}");
        }
    }
}

//! Solver-agnostic MILP modeling layer.
//!
//! Problems are assembled as a [`ProblemSpec`] of named variables, linear
//! constraints and a linear objective, then handed to a [`SolverBackend`].
//! Names are unique so solutions can be read back by name and the problem
//! exported to LP format for external solvers.

mod highs_backend;
mod lp_format;

use std::collections::{HashMap, HashSet};
use std::fmt;

pub use highs_backend::HighsBackend;
pub use lp_format::write_lp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Handle to a variable registered in a [`ProblemSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarRef(usize);

impl VarRef {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    NonNegative,
    Free,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

/// Sparse linear expression plus a constant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarRef, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(v: VarRef, coef: f64) -> Self {
        LinExpr {
            terms: vec![(v, coef)],
            constant: 0.0,
        }
    }

    /// Builder-style `self + coef * v`.
    pub fn plus(mut self, v: VarRef, coef: f64) -> Self {
        self.add(v, coef);
        self
    }

    pub fn add(&mut self, v: VarRef, coef: f64) {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) {
        for &(v, c) in &other.terms {
            self.add(v, c * scale);
        }
        self.constant += other.constant * scale;
    }

    /// Merge repeated variables and drop zero coefficients, sorted by index.
    pub fn normalized(&self) -> Vec<(VarRef, f64)> {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|t| t.0);
        let mut out: Vec<(VarRef, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        out
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|&(v, c)| c * values[v.0])
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub expr: LinExpr,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    /// Right-hand side once the expression constant is moved across.
    pub fn effective_rhs(&self) -> f64 {
        self.rhs - self.expr.constant
    }

    /// Amount by which `values` violate the constraint (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.expr.evaluate(values);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// A fully assembled MILP.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub vars: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: LinExpr,
    pub sense: Sense,
    var_names: HashMap<String, VarRef>,
    con_names: HashSet<String>,
}

impl ProblemSpec {
    pub fn new(name: impl Into<String>) -> Self {
        ProblemSpec {
            name: name.into(),
            vars: Vec::new(),
            constraints: Vec::new(),
            objective: LinExpr::new(),
            sense: Sense::Minimize,
            var_names: HashMap::new(),
            con_names: HashSet::new(),
        }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: f64,
        upper: f64,
    ) -> Result<VarRef> {
        let name = name.into();
        if self.var_names.contains_key(&name) {
            return Err(Error::Problem(format!("duplicate variable name {name}")));
        }
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            VarKind::NonNegative => (lower.max(0.0), upper),
            VarKind::Free => (lower, upper),
        };
        if lower > upper || lower.is_nan() || upper.is_nan() {
            return Err(Error::Problem(format!(
                "variable {name} has empty bounds [{lower}, {upper}]"
            )));
        }
        let v = VarRef(self.vars.len());
        self.var_names.insert(name.clone(), v);
        self.vars.push(Variable {
            name,
            kind,
            lower,
            upper,
        });
        Ok(v)
    }

    pub fn nonneg(&mut self, name: impl Into<String>) -> Result<VarRef> {
        self.add_var(name, VarKind::NonNegative, 0.0, f64::INFINITY)
    }

    pub fn free(&mut self, name: impl Into<String>) -> Result<VarRef> {
        self.add_var(name, VarKind::Free, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> Result<VarRef> {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        expr: LinExpr,
        relation: Relation,
        rhs: f64,
    ) -> Result<usize> {
        let name = name.into();
        if !self.con_names.insert(name.clone()) {
            return Err(Error::Problem(format!("duplicate constraint name {name}")));
        }
        self.constraints.push(Constraint {
            name,
            expr,
            relation,
            rhs,
        });
        Ok(self.constraints.len() - 1)
    }

    pub fn set_objective(&mut self, objective: LinExpr, sense: Sense) {
        self.objective = objective;
        self.sense = sense;
    }

    pub fn var(&self, name: &str) -> Option<VarRef> {
        self.var_names.get(name).copied()
    }

    pub fn variable(&self, v: VarRef) -> &Variable {
        &self.vars[v.0]
    }

    /// Pin a variable to a value by collapsing its bounds.
    pub fn fix(&mut self, v: VarRef, value: f64) {
        let var = &mut self.vars[v.0];
        var.lower = value;
        var.upper = value;
    }

    pub fn set_bounds(&mut self, v: VarRef, lower: f64, upper: f64) {
        let var = &mut self.vars[v.0];
        var.lower = lower;
        var.upper = upper;
    }

    pub fn binaries(&self) -> Vec<VarRef> {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| VarRef(i))
            .collect()
    }

    /// Copy with every binary turned continuous on its current bounds.
    pub fn relaxed(&self) -> ProblemSpec {
        let mut out = self.clone();
        for v in &mut out.vars {
            if v.kind == VarKind::Binary {
                v.kind = VarKind::Free;
            }
        }
        out
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Structural checks performed before any solve.
    pub fn check(&self) -> Result<()> {
        let n = self.vars.len();
        let bad_ref = |e: &LinExpr| e.terms.iter().any(|(v, c)| v.0 >= n || !c.is_finite());
        if bad_ref(&self.objective) || !self.objective.constant.is_finite() {
            return Err(Error::Problem("objective references unknown variable".into()));
        }
        for c in &self.constraints {
            if bad_ref(&c.expr) || !c.rhs.is_finite() || !c.expr.constant.is_finite() {
                return Err(Error::Problem(format!(
                    "constraint {} has unknown variables or non-finite data",
                    c.name
                )));
            }
        }
        Ok(())
    }

    /// Largest constraint or bound violation of a candidate point.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(values))
            .fold(0.0, f64::max);
        let bounds = self
            .vars
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Stopped with an incumbent whose gap exceeds the requested tolerance.
    FeasibleGap,
    Infeasible,
    Unbounded,
    /// Stopped without any incumbent.
    Timeout,
    Error,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleGap)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleGap => "feasible-gap",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::Timeout => "timeout",
            SolveStatus::Error => "error",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    /// One value per variable, empty when no solution is available.
    pub values: Vec<f64>,
    pub mip_gap: Option<f64>,
    pub message: String,
}

impl Solution {
    pub fn failed(status: SolveStatus, message: impl Into<String>) -> Self {
        Solution {
            status,
            objective: None,
            values: Vec::new(),
            mip_gap: None,
            message: message.into(),
        }
    }

    pub fn value(&self, v: VarRef) -> f64 {
        self.values[v.0]
    }

    pub fn value_by_name(&self, spec: &ProblemSpec, name: &str) -> Option<f64> {
        spec.var(name).and_then(|v| self.values.get(v.0).copied())
    }

    /// Turn a non-solution into an error with some context.
    pub fn require(self, context: &str) -> Result<Solution> {
        if self.status.has_solution() {
            Ok(self)
        } else {
            Err(Error::Solve {
                status: self.status.to_string(),
                context: format!("{context}: {}", self.message),
            })
        }
    }
}

/// Method for the first LP relaxation of a MIP. Node LPs always use the
/// dual simplex, warm-started.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RootLp {
    Simplex,
    /// Interior point with crossover; much faster on the large planning
    /// models, whose relaxation is usually integral already.
    #[default]
    Ipm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub mip_gap: f64,
    pub time_limit: Option<f64>,
    pub threads: u32,
    pub seed: u64,
    pub root_lp: RootLp,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            mip_gap: 1e-4,
            time_limit: None,
            threads: 1,
            seed: 0,
            root_lp: RootLp::default(),
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub binary_vars: bool,
    pub free_vars: bool,
}

/// A MILP solver. Instances are cheap to clone; concurrent solves each use
/// their own clone.
pub trait SolverBackend: Send + Sync {
    fn name(&self) -> &str;
    fn capabilities(&self) -> Capabilities;
    fn settings(&self) -> &SolverSettings;
    fn solve_spec(&self, spec: &ProblemSpec) -> Solution;
}

/// Solve a problem, turning structural problems and backend failures into
/// an explicit status rather than a panic.
pub fn solve(spec: &ProblemSpec, backend: &dyn SolverBackend) -> Solution {
    if let Err(e) = spec.check() {
        return Solution::failed(SolveStatus::Error, e.to_string());
    }
    let caps = backend.capabilities();
    if !caps.binary_vars && spec.vars.iter().any(|v| v.kind == VarKind::Binary) {
        return Solution::failed(
            SolveStatus::Error,
            format!("backend {} cannot handle binaries", backend.name()),
        );
    }
    if !caps.free_vars && spec.vars.iter().any(|v| v.lower == f64::NEG_INFINITY) {
        return Solution::failed(
            SolveStatus::Error,
            format!("backend {} cannot handle free variables", backend.name()),
        );
    }
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| backend.solve_spec(spec))) {
        Ok(sol) => sol,
        Err(_) => Solution::failed(SolveStatus::Error, "backend panicked"),
    }
}

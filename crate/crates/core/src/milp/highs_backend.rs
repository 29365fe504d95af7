use highs::{HighsModelStatus, HighsSolutionStatus, RowProblem};

use super::{
    Capabilities, ProblemSpec, Relation, RootLp, Sense, Solution, SolveStatus, SolverBackend,
    SolverSettings, VarKind,
};

/// MILP backend on the HiGHS solver.
#[derive(Debug, Clone, Default)]
pub struct HighsBackend {
    settings: SolverSettings,
}

impl HighsBackend {
    pub fn new(settings: SolverSettings) -> Self {
        HighsBackend { settings }
    }
}

impl SolverBackend for HighsBackend {
    fn name(&self) -> &str {
        "highs"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            binary_vars: true,
            free_vars: true,
        }
    }

    fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    fn solve_spec(&self, spec: &ProblemSpec) -> Solution {
        if spec.vars.is_empty() {
            if spec.constraints.iter().any(|c| c.violation(&[]) > 1e-9) {
                return Solution::failed(SolveStatus::Infeasible, "constant constraint violated");
            }
            return Solution {
                status: SolveStatus::Optimal,
                objective: Some(spec.objective.constant),
                values: Vec::new(),
                mip_gap: Some(0.0),
                message: String::new(),
            };
        }

        let mut costs = vec![0.0; spec.vars.len()];
        for (v, c) in spec.objective.normalized() {
            costs[v.index()] = c;
        }
        let mut pb = RowProblem::default();
        let cols: Vec<_> = spec
            .vars
            .iter()
            .zip(&costs)
            .map(|(v, &cost)| match v.kind {
                VarKind::Binary => pb.add_integer_column(cost, v.lower..=v.upper),
                _ => pb.add_column(cost, v.lower..=v.upper),
            })
            .collect();
        for c in &spec.constraints {
            let rhs = c.effective_rhs();
            let row: Vec<_> = c
                .expr
                .normalized()
                .into_iter()
                .map(|(v, coef)| (cols[v.index()], coef))
                .collect();
            match c.relation {
                Relation::Le => pb.add_row(f64::NEG_INFINITY..=rhs, row),
                Relation::Ge => pb.add_row(rhs..=f64::INFINITY, row),
                Relation::Eq => pb.add_row(rhs..=rhs, row),
            }
        }

        let sense = match spec.sense {
            Sense::Minimize => highs::Sense::Minimise,
            Sense::Maximize => highs::Sense::Maximise,
        };
        let mut model = match pb.try_optimise(sense) {
            Ok(m) => m,
            Err(e) => return Solution::failed(SolveStatus::Error, format!("{e:?}")),
        };
        if self.settings.verbose {
            model.set_option("output_flag", true);
            model.set_option("log_to_console", true);
        } else {
            model.make_quiet();
        }
        model.set_option("mip_rel_gap", self.settings.mip_gap);
        model.set_option("mip_abs_gap", self.settings.mip_gap.min(1e-6));
        model.set_option("random_seed", (self.settings.seed % i32::MAX as u64) as i32);
        model.set_option("threads", self.settings.threads.max(1) as i32);
        let root = match self.settings.root_lp {
            RootLp::Simplex => "simplex",
            RootLp::Ipm => "ipx",
        };
        model.set_option("mip_lp_solver", root);
        if let Some(limit) = self.settings.time_limit {
            model.set_option("time_limit", limit);
        }
        let solved = match model.try_solve() {
            Ok(s) => s,
            Err(e) => return Solution::failed(SolveStatus::Error, format!("{e:?}")),
        };

        let status = solved.status();
        let has_primal = solved.primal_solution_status() == HighsSolutionStatus::Feasible;
        let is_mip = spec.vars.iter().any(|v| v.kind == VarKind::Binary);
        let mapped = match status {
            HighsModelStatus::Optimal => SolveStatus::Optimal,
            HighsModelStatus::ModelEmpty => SolveStatus::Optimal,
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            HighsModelStatus::UnboundedOrInfeasible => SolveStatus::Infeasible,
            HighsModelStatus::Unbounded => SolveStatus::Unbounded,
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedSolutionLimit
            | HighsModelStatus::ReachedInterrupt
            | HighsModelStatus::ReachedMemoryLimit => {
                if has_primal {
                    SolveStatus::FeasibleGap
                } else {
                    SolveStatus::Timeout
                }
            }
            _ => SolveStatus::Error,
        };
        if !mapped.has_solution() {
            return Solution::failed(mapped, format!("highs status {status:?}"));
        }
        let values = solved.get_solution().columns().to_vec();
        let mip_gap = if is_mip { Some(solved.mip_gap()) } else { Some(0.0) };
        Solution {
            status: mapped,
            objective: Some(solved.objective_value() + spec.objective.constant),
            values,
            mip_gap,
            message: format!("highs status {status:?}"),
        }
    }
}

//! Small linear programs on top of `minilp`.

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

/// `minimize c·z` subject to `rows` and per-variable bounds.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
    pub rows: Vec<(Vec<(usize, f64)>, Cmp, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { z: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    pub fn add_var(&mut self, cost: f64, bounds: (f64, f64)) -> usize {
        self.cost.push(cost);
        self.bounds.push(bounds);
        self.cost.len() - 1
    }

    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) {
        self.rows.push((terms, cmp, rhs));
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        let mut p = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = self.cost.iter().zip(&self.bounds).map(|(c, b)| p.add_var(*c, *b)).collect();
        for (terms, cmp, rhs) in &self.rows {
            let expr: Vec<_> = terms.iter().filter(|(_, a)| *a != 0.0).map(|(i, a)| (vars[*i], *a)).collect();
            if expr.is_empty() {
                let ok = match cmp {
                    Cmp::Le => 0.0 <= *rhs,
                    Cmp::Ge => 0.0 >= *rhs,
                    Cmp::Eq => *rhs == 0.0,
                };
                if !ok {
                    return Ok(LpOutcome::Infeasible);
                }
                continue;
            }
            let op = match cmp {
                Cmp::Le => ComparisonOp::Le,
                Cmp::Ge => ComparisonOp::Ge,
                Cmp::Eq => ComparisonOp::Eq,
            };
            p.add_constraint(expr.as_slice(), op, *rhs);
        }
        match p.solve() {
            Ok(sol) => Ok(LpOutcome::Optimal { z: vars.iter().map(|v| sol[*v]).collect(), value: sol.objective() }),
            Err(minilp::Error::Infeasible) => Ok(LpOutcome::Infeasible),
            Err(minilp::Error::Unbounded) => Ok(LpOutcome::Unbounded),
        }
    }

    pub fn solve_optimal(&self) -> Result<(Vec<f64>, f64)> {
        match self.solve()? {
            LpOutcome::Optimal { z, value } => Ok((z, value)),
            other => Err(Error::Internal(format!("linear program not optimal: {other:?}"))),
        }
    }
}

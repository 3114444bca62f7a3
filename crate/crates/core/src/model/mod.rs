//! Solver-agnostic MILP representation and the formulation builders.

mod exact;
mod frp;
mod lp;

use std::collections::HashMap;

pub use exact::{build_exact_milp, build_resource_allocation_milp, ExactOptions};
pub use frp::{build_rerouting_milp, build_rescheduling_milp};
pub use lp::export_lp;
pub(crate) use lp::lp_names;

use crate::error::{Error, Result};

pub type VarId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// What a variable means in the routing problem. Arc and node ids refer to
/// the expanded graph the model was built on; `r` indexes sub-routes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tag {
    Dispatch { vehicle: usize },
    RouteArc { vehicle: usize, arc: usize },
    Serve { vehicle: usize, node: usize },
    Timestamp { vehicle: usize, node: usize },
    ControllerUse { vehicle: usize, interval: usize },
    /// Overlap indicator: exit side (`after`) or entry side (`before`).
    Overlap { after: bool, index: usize },
    ControllerAssign { controller: usize, index: usize },
    Departure { vehicle: usize },
    SubRouteStart { r: usize },
    SubRouteEnd { r: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
    pub tag: Option<Tag>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// Constraint family, used for statistics.
    pub family: &'static str,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MilpModel {
    pub name: String,
    pub vars: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Minimised.
    pub objective: Vec<(VarId, f64)>,
    pub objective_constant: f64,
    index: HashMap<String, VarId>,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        MilpModel {
            name: name.into(),
            ..Default::default()
        }
    }

    /// Panics on a duplicate name; builders generate unique names.
    pub fn add_var(&mut self, name: String, kind: VarKind, lb: f64, ub: f64, tag: Option<Tag>) -> VarId {
        let id = self.vars.len();
        let prev = self.index.insert(name.clone(), id);
        assert!(prev.is_none(), "duplicate variable {name}");
        self.vars.push(Variable { name, kind, lb, ub, tag });
        id
    }

    pub fn binary(&mut self, name: String, tag: Option<Tag>) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0, tag)
    }

    pub fn continuous(&mut self, name: String, lb: f64, ub: f64, tag: Option<Tag>) -> VarId {
        self.add_var(name, VarKind::Continuous, lb, ub, tag)
    }

    /// Adds a row; repeated variables are merged and zero terms dropped.
    pub fn add_row(
        &mut self,
        name: String,
        family: &'static str,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        let terms = merge_terms(terms);
        self.constraints.push(Constraint {
            name,
            family,
            terms,
            sense,
            rhs,
        });
    }

    pub fn set_objective(&mut self, terms: impl IntoIterator<Item = (VarId, f64)>, constant: f64) {
        self.objective = merge_terms(terms);
        self.objective_constant = constant;
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().map(|&(j, c)| c * values[j]).sum::<f64>()
    }

    /// Largest violation of any row or bound by `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lb - x).max(x - v.ub);
            if v.kind == VarKind::Binary {
                worst = worst.max((x - x.round()).abs());
            }
        }
        for c in &self.constraints {
            let act: f64 = c.terms.iter().map(|&(j, a)| a * values[j]).sum();
            let d = match c.sense {
                Sense::Le => act - c.rhs,
                Sense::Ge => c.rhs - act,
                Sense::Eq => (act - c.rhs).abs(),
            };
            worst = worst.max(d);
        }
        worst
    }

    /// Structural checks every builder output must pass.
    pub fn lint(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(m));
        if self.index.len() != self.vars.len() {
            return bad("variable index out of sync".into());
        }
        let mut used = vec![false; self.vars.len()];
        for &(j, c) in &self.objective {
            if j >= self.vars.len() || !c.is_finite() {
                return bad("objective references an undeclared variable or bad coefficient".into());
            }
            used[j] = true;
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return bad(format!("row {} has a non-finite right-hand side", c.name));
            }
            for &(j, a) in &c.terms {
                if j >= self.vars.len() || !a.is_finite() {
                    return bad(format!("row {} references an undeclared variable", c.name));
                }
                used[j] = true;
            }
        }
        for (j, v) in self.vars.iter().enumerate() {
            if v.lb.is_nan() || v.ub.is_nan() || v.lb > v.ub {
                return bad(format!("variable {} has inconsistent bounds", v.name));
            }
            if v.kind == VarKind::Binary {
                if v.lb < 0.0 || v.ub > 1.0 {
                    return bad(format!("binary {} has bounds outside [0, 1]", v.name));
                }
                if !used[j] {
                    return bad(format!("binary {} appears nowhere", v.name));
                }
            }
            if matches!(v.tag, Some(Tag::Timestamp { .. })) && (v.lb < 0.0 || !v.ub.is_finite()) {
                return bad(format!("timestamp {} is not bounded", v.name));
            }
        }
        Ok(())
    }

    /// Variable and row counts per family as CSV.
    pub fn stats_csv(&self) -> String {
        let mut rows: Vec<(String, &str, usize)> = Vec::new();
        let mut bump = |fam: String, what: &'static str| {
            if let Some(r) = rows.iter_mut().find(|r| r.0 == fam && r.1 == what) {
                r.2 += 1;
            } else {
                rows.push((fam, what, 1));
            }
        };
        for v in &self.vars {
            let fam = v.name.split('_').next().unwrap_or("").to_string();
            bump(fam, "variable");
        }
        for c in &self.constraints {
            bump(c.family.to_string(), "constraint");
        }
        let mut s = String::from("kind,family,count\n");
        for (fam, what, n) in rows {
            s.push_str(&format!("{what},{fam},{n}\n"));
        }
        s
    }
}

fn merge_terms(terms: impl IntoIterator<Item = (VarId, f64)>) -> Vec<(VarId, f64)> {
    let mut out: Vec<(VarId, f64)> = Vec::new();
    for (j, a) in terms {
        match out.iter_mut().find(|t| t.0 == j) {
            Some(t) => t.1 += a,
            None => out.push((j, a)),
        }
    }
    out.retain(|t| t.1 != 0.0);
    out
}

/// Partition of `[0, T]` into consecutive intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    bounds: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, count: usize) -> Self {
        assert!(count > 0 && horizon > 0.0);
        let mut bounds: Vec<f64> = (0..=count).map(|q| horizon * q as f64 / count as f64).collect();
        bounds[count] = horizon;
        TimeGrid { bounds }
    }

    /// Breakpoints must start at 0 and increase strictly.
    pub fn from_bounds(bounds: Vec<f64>) -> Result<Self> {
        if bounds.len() < 2 || bounds[0] != 0.0 || bounds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidModel("time grid must start at 0 and increase".into()));
        }
        Ok(TimeGrid { bounds })
    }

    pub fn len(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn horizon(&self) -> f64 {
        *self.bounds.last().expect("nonempty grid")
    }

    pub fn interval(&self, q: usize) -> (f64, f64) {
        (self.bounds[q], self.bounds[q + 1])
    }

    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.bounds.windows(2).map(|w| (w[0], w[1]))
    }
}

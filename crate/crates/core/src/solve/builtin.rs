//! Depth-first branch-and-bound over the binaries.
//!
//! Each node propagates bounds over all rows (rows are kept in `<=` form, the
//! objective becomes a cutoff row once an incumbent exists). Branching prefers
//! a pure-binary row that cannot be satisfied with its free binaries at zero.
//! Zero-cost binaries whose live rows only constrain one continuous form, and
//! admit a value for every point of its range, are left free and set at the
//! leaf. At a leaf every remaining row must be a bound or a difference row over
//! continuous variables; feasibility is the least solution of that system.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::model::{MilpModel, Sense, VarKind};

use super::{SolveResult, SolveStatus};

pub const DEFAULT_MAX_BINARIES: usize = 20_000;
const TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuiltinOptions {
    pub max_binaries: usize,
    pub node_limit: Option<u64>,
}

impl Default for BuiltinOptions {
    fn default() -> Self {
        BuiltinOptions {
            max_binaries: DEFAULT_MAX_BINARIES,
            node_limit: None,
        }
    }
}

struct Row {
    /// Sorted by variable id.
    terms: Vec<(usize, f64)>,
    rhs: f64,
    constraint: usize,
    pure_binary: bool,
}

struct Deferral {
    var: usize,
    form: Vec<(usize, f64)>,
    zero: (f64, f64),
}

enum Pick {
    Leaf(Vec<Deferral>),
    Branch(usize, f64),
}

struct Frame {
    var: usize,
    second: f64,
    tried: bool,
    mark: usize,
}

enum Step {
    Bounds { var: usize, lb: f64, ub: f64 },
    /// A pure-binary row gained `delta` activity from a fixed binary.
    Act { row: usize, delta: f64 },
}

struct Search<'a> {
    model: &'a MilpModel,
    rows: Vec<Row>,
    rows_of: Vec<Vec<usize>>,
    is_bin: Vec<bool>,
    cost: Vec<f64>,
    cutoff: usize,
    lb: Vec<f64>,
    ub: Vec<f64>,
    trail: Vec<Step>,
    act0: Vec<f64>,
    nfree: Vec<usize>,
    needy: BTreeSet<usize>,
    in_queue: Vec<bool>,
    cont_budget: usize,
    best: Option<(f64, Vec<f64>)>,
    nodes: u64,
    started: Instant,
    time_limit: Duration,
    node_limit: Option<u64>,
    stopped: bool,
    contract: Option<String>,
}

pub fn builtin_solve(model: &MilpModel, opts: BuiltinOptions, time_limit: Duration) -> Result<SolveResult> {
    let started = Instant::now();
    let nb = model.num_binaries();
    if nb > opts.max_binaries {
        return Err(Error::ModelTooLarge {
            binaries: nb,
            limit: opts.max_binaries,
        });
    }
    let n = model.vars.len();
    let is_bin: Vec<bool> = model.vars.iter().map(|v| v.kind == VarKind::Binary).collect();
    let mut cost = vec![0.0; n];
    for &(j, c) in &model.objective {
        if !is_bin[j] {
            return Err(Error::InvalidModel(format!(
                "objective touches continuous variable {}",
                model.vars[j].name
            )));
        }
        cost[j] += c;
    }

    let mut rows = Vec::new();
    for (ci, c) in model.constraints.iter().enumerate() {
        let mut terms = c.terms.clone();
        terms.sort_by_key(|t| t.0);
        let pure = terms.iter().all(|t| is_bin[t.0]);
        let neg: Vec<(usize, f64)> = terms.iter().map(|&(j, a)| (j, -a)).collect();
        match c.sense {
            Sense::Le => rows.push(Row { terms, rhs: c.rhs, constraint: ci, pure_binary: pure }),
            Sense::Ge => rows.push(Row { terms: neg, rhs: -c.rhs, constraint: ci, pure_binary: pure }),
            Sense::Eq => {
                rows.push(Row { terms, rhs: c.rhs, constraint: ci, pure_binary: pure });
                rows.push(Row { terms: neg, rhs: -c.rhs, constraint: ci, pure_binary: pure });
            }
        }
    }
    let mut obj_terms = model.objective.clone();
    obj_terms.sort_by_key(|t| t.0);
    let cutoff = rows.len();
    rows.push(Row {
        terms: obj_terms,
        rhs: f64::INFINITY,
        constraint: usize::MAX,
        pure_binary: false,
    });

    let mut rows_of = vec![Vec::new(); n];
    for (r, row) in rows.iter().enumerate() {
        for &(j, _) in &row.terms {
            rows_of[j].push(r);
        }
    }
    let n_cont = n - nb;
    let mut s = Search {
        model,
        act0: vec![0.0; rows.len()],
        nfree: rows.iter().map(|r| r.terms.len()).collect(),
        needy: BTreeSet::new(),
        in_queue: vec![false; rows.len()],
        rows,
        rows_of,
        is_bin,
        cost,
        cutoff,
        lb: model.vars.iter().map(|v| v.lb).collect(),
        ub: model.vars.iter().map(|v| v.ub).collect(),
        trail: Vec::new(),
        cont_budget: 8 * n_cont + 200,
        best: None,
        nodes: 0,
        started,
        time_limit,
        node_limit: opts.node_limit,
        stopped: false,
        contract: None,
    };
    s.init_activity();
    s.run();
    if let Some(msg) = s.contract {
        return Err(Error::InvalidModel(msg));
    }

    let status = match (&s.best, s.stopped) {
        (Some(_), false) => SolveStatus::Optimal,
        (None, false) => SolveStatus::Infeasible,
        (Some(_), true) => SolveStatus::Feasible,
        (None, true) => SolveStatus::TimeLimit,
    };
    let (objective, values) = match s.best {
        Some((obj, vals)) => (Some(obj), vals),
        None => (None, Vec::new()),
    };
    Ok(SolveResult {
        status,
        objective,
        values,
        wall_time: started.elapsed(),
        nodes: s.nodes,
    })
}

impl Search<'_> {
    fn fixed(&self, j: usize) -> bool {
        self.lb[j] == self.ub[j]
    }

    fn init_activity(&mut self) {
        for r in 0..self.rows.len() {
            if !self.rows[r].pure_binary {
                continue;
            }
            let mut act = 0.0;
            let mut free = 0;
            for &(j, a) in &self.rows[r].terms {
                if self.fixed(j) {
                    act += a * self.lb[j];
                } else {
                    free += 1;
                }
            }
            self.act0[r] = act;
            self.nfree[r] = free;
            self.refresh_needy(r);
        }
    }

    fn refresh_needy(&mut self, r: usize) {
        if self.act0[r] > self.rows[r].rhs + TOL && self.nfree[r] > 0 {
            self.needy.insert(r);
        } else {
            self.needy.remove(&r);
        }
    }

    /// Record a bound change; returns false on an empty domain.
    fn set_bounds(&mut self, j: usize, lb: f64, ub: f64) -> bool {
        let was_fixed = self.fixed(j);
        self.trail.push(Step::Bounds { var: j, lb: self.lb[j], ub: self.ub[j] });
        self.lb[j] = lb;
        self.ub[j] = ub;
        if self.is_bin[j] && !was_fixed && lb == ub {
            for k in 0..self.rows_of[j].len() {
                let r = self.rows_of[j][k];
                if !self.rows[r].pure_binary {
                    continue;
                }
                let a = self.coef(r, j);
                self.act0[r] += a * lb;
                self.nfree[r] -= 1;
                self.trail.push(Step::Act { row: r, delta: a * lb });
                self.refresh_needy(r);
            }
        }
        lb <= ub + TOL
    }

    fn coef(&self, r: usize, j: usize) -> f64 {
        let terms = &self.rows[r].terms;
        let k = terms.binary_search_by_key(&j, |t| t.0).expect("variable in row");
        terms[k].1
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            match self.trail.pop().expect("trail entry") {
                Step::Bounds { var, lb, ub } => {
                    self.lb[var] = lb;
                    self.ub[var] = ub;
                }
                Step::Act { row, delta } => {
                    self.act0[row] -= delta;
                    self.nfree[row] += 1;
                    self.refresh_needy(row);
                }
            }
        }
    }

    fn min_contrib(&self, j: usize, a: f64) -> f64 {
        if a > 0.0 {
            a * self.lb[j]
        } else {
            a * self.ub[j]
        }
    }

    fn max_contrib(&self, j: usize, a: f64) -> f64 {
        if a > 0.0 {
            a * self.ub[j]
        } else {
            a * self.lb[j]
        }
    }

    /// Bound propagation from the queued rows. Returns false on conflict.
    fn propagate(&mut self, mut queue: Vec<usize>) -> bool {
        let mut cont_moves = 0;
        for &r in &queue {
            self.in_queue[r] = true;
        }
        let mut head = 0;
        let mut ok = true;
        while head < queue.len() {
            let r = queue[head];
            head += 1;
            self.in_queue[r] = false;
            if !ok {
                continue;
            }
            let rhs = self.rows[r].rhs;
            if rhs == f64::INFINITY {
                continue;
            }
            let mut minact = 0.0;
            let mut n_inf = 0;
            for &(j, a) in &self.rows[r].terms {
                let c = self.min_contrib(j, a);
                if c.is_finite() {
                    minact += c;
                } else {
                    n_inf += 1;
                }
            }
            let slack = if r == self.cutoff { 0.0 } else { TOL * (1.0 + rhs.abs()) };
            if n_inf == 0 && minact > rhs + slack {
                ok = false;
                continue;
            }
            if n_inf > 1 {
                continue;
            }
            for k in 0..self.rows[r].terms.len() {
                let (j, a) = self.rows[r].terms[k];
                if self.fixed(j) {
                    continue;
                }
                let own = self.min_contrib(j, a);
                let rest = if own.is_finite() {
                    if n_inf > 0 {
                        continue;
                    }
                    minact - own
                } else {
                    minact
                };
                let limit = (rhs - rest) / a;
                let (mut lb, mut ub) = (self.lb[j], self.ub[j]);
                if self.is_bin[j] {
                    if a > 0.0 && limit < 1.0 - TOL {
                        ub = 0.0;
                    } else if a < 0.0 && limit > TOL {
                        lb = 1.0;
                    } else {
                        continue;
                    }
                    if lb == self.lb[j] && ub == self.ub[j] {
                        continue;
                    }
                } else {
                    if cont_moves >= self.cont_budget {
                        continue;
                    }
                    let slack = 1e-9 * (1.0 + limit.abs());
                    if a > 0.0 && limit < ub - slack {
                        ub = limit;
                    } else if a < 0.0 && limit > lb + slack {
                        lb = limit;
                    } else {
                        continue;
                    }
                    cont_moves += 1;
                }
                if !self.set_bounds(j, lb, ub) {
                    ok = false;
                    break;
                }
                for q in 0..self.rows_of[j].len() {
                    let r2 = self.rows_of[j][q];
                    if !self.in_queue[r2] {
                        self.in_queue[r2] = true;
                        queue.push(r2);
                    }
                }
            }
        }
        for &r in &queue[head..] {
            self.in_queue[r] = false;
        }
        ok
    }

    fn branch_on(&mut self, j: usize, v: f64) -> bool {
        if !self.set_bounds(j, v, v) {
            return false;
        }
        let queue = self.rows_of[j].clone();
        self.propagate(queue)
    }

    fn limits_hit(&mut self) -> bool {
        if let Some(limit) = self.node_limit {
            if self.nodes >= limit {
                self.stopped = true;
            }
        }
        if self.nodes % 128 == 0 && self.started.elapsed() >= self.time_limit {
            self.stopped = true;
        }
        self.stopped
    }

    fn run(&mut self) {
        let all: Vec<usize> = (0..self.rows.len()).collect();
        let mut ok = self.propagate(all);
        let mut frames: Vec<Frame> = Vec::new();
        loop {
            if ok {
                self.nodes += 1;
                if self.limits_hit() {
                    return;
                }
                match self.pick() {
                    Pick::Leaf(deferred) => self.leaf(&deferred),
                    Pick::Branch(j, first) => {
                        frames.push(Frame { var: j, second: 1.0 - first, tried: false, mark: self.trail.len() });
                        ok = self.branch_on(j, first);
                        continue;
                    }
                }
            }
            loop {
                let Some(f) = frames.last_mut() else { return };
                let (mark, var, second, tried) = (f.mark, f.var, f.second, f.tried);
                f.tried = true;
                self.undo_to(mark);
                if !tried {
                    // the cutoff may have tightened since this frame was opened
                    let cut = self.cutoff;
                    ok = self.propagate(vec![cut]) && self.branch_on(var, second);
                    break;
                }
                frames.pop();
            }
        }
    }

    fn pick(&self) -> Pick {
        let mut needy_best: Option<(usize, usize)> = None;
        for &r in &self.needy {
            let nf = self.nfree[r];
            if needy_best.map_or(true, |(b, _)| nf < b) {
                needy_best = Some((nf, r));
            }
        }
        if let Some((_, r)) = needy_best {
            let j = self.rows[r]
                .terms
                .iter()
                .find(|&&(j, a)| a < 0.0 && !self.fixed(j))
                .or_else(|| self.rows[r].terms.iter().find(|&&(j, _)| !self.fixed(j)))
                .expect("needy row has a free binary")
                .0;
            return Pick::Branch(j, 1.0);
        }
        let mut deferred = Vec::new();
        for j in 0..self.lb.len() {
            if !self.is_bin[j] || self.fixed(j) {
                continue;
            }
            match self.deferral(j) {
                Some(d) => deferred.push(d),
                None => {
                    let first = if self.cost[j] < 0.0 { 1.0 } else { 0.0 };
                    return Pick::Branch(j, first);
                }
            }
        }
        Pick::Leaf(deferred)
    }

    /// Can binary `j` be decided after the continuous values are known?
    fn deferral(&self, j: usize) -> Option<Deferral> {
        if self.cost[j] != 0.0 {
            return None;
        }
        let mut form: Option<Vec<(usize, f64)>> = None;
        let mut zero = (f64::NEG_INFINITY, f64::INFINITY);
        let mut one = (f64::NEG_INFINITY, f64::INFINITY);
        for &r in &self.rows_of[j] {
            let row = &self.rows[r];
            let maxact: f64 = row.terms.iter().map(|&(v, a)| self.max_contrib(v, a)).sum();
            if maxact <= row.rhs + TOL {
                continue;
            }
            let mut fixed_part = 0.0;
            let mut cont = Vec::new();
            let mut aj = 0.0;
            for &(v, a) in &row.terms {
                if v == j {
                    aj = a;
                } else if self.is_bin[v] {
                    if !self.fixed(v) {
                        return None;
                    }
                    fixed_part += a * self.lb[v];
                } else {
                    cont.push((v, a));
                }
            }
            if cont.is_empty() {
                return None;
            }
            let lead = cont[0].1;
            let scaled: Vec<(usize, f64)> = cont.iter().map(|&(v, a)| (v, a / lead)).collect();
            match &form {
                None => form = Some(scaled),
                Some(f) => {
                    let same = f.len() == scaled.len()
                        && f.iter().zip(&scaled).all(|(p, q)| p.0 == q.0 && (p.1 - q.1).abs() <= 1e-12);
                    if !same {
                        return None;
                    }
                }
            }
            for (b, iv) in [(0.0, &mut zero), (1.0, &mut one)] {
                let bound = (row.rhs - fixed_part - aj * b) / lead;
                if lead > 0.0 {
                    iv.1 = iv.1.min(bound);
                } else {
                    iv.0 = iv.0.max(bound);
                }
            }
        }
        let Some(form) = form else {
            return Some(Deferral { var: j, form: Vec::new(), zero });
        };
        let lo: f64 = form.iter().map(|&(v, c)| self.min_contrib(v, c)).sum();
        let hi: f64 = form.iter().map(|&(v, c)| self.max_contrib(v, c)).sum();
        let covers = |iv: (f64, f64)| iv.0 <= lo + TOL && iv.1 >= hi - TOL;
        let joint = {
            let (first, second) = if zero.0 <= one.0 { (zero, one) } else { (one, zero) };
            first.0 <= first.1
                && second.0 <= second.1
                && first.0 <= lo + TOL
                && first.1 >= second.0 - TOL
                && first.1.max(second.1) >= hi - TOL
        };
        if covers(zero) || covers(one) || joint {
            Some(Deferral { var: j, form, zero })
        } else {
            None
        }
    }

    /// Continuous feasibility with all binaries decided; records an incumbent.
    fn leaf(&mut self, deferred: &[Deferral]) {
        let n = self.lb.len();
        let mut skip = vec![false; n];
        for d in deferred {
            skip[d.var] = true;
        }
        let mut low = self.lb.clone();
        let mut high = self.ub.clone();
        // (from, to, w): value[to] >= value[from] + w
        let mut arcs: Vec<(usize, usize, f64)> = Vec::new();
        for r in 0..self.rows.len() {
            let row = &self.rows[r];
            if row.rhs == f64::INFINITY {
                continue;
            }
            if row.terms.iter().any(|t| skip[t.0]) {
                continue;
            }
            let mut rest = row.rhs;
            let mut cont: Vec<(usize, f64)> = Vec::with_capacity(2);
            for &(v, a) in &row.terms {
                if self.is_bin[v] {
                    rest -= a * self.lb[v];
                } else {
                    cont.push((v, a));
                }
            }
            let maxact: f64 = cont.iter().map(|&(v, a)| self.max_contrib(v, a)).sum();
            if maxact <= rest + TOL {
                continue;
            }
            match cont.as_slice() {
                [] => {
                    if rest < -TOL {
                        return;
                    }
                }
                [(v, a)] => {
                    let b = rest / a;
                    if *a > 0.0 {
                        high[*v] = high[*v].min(b);
                    } else {
                        low[*v] = low[*v].max(b);
                    }
                }
                [(p, a), (q, c)] if (a + c).abs() <= 1e-12 * a.abs().max(1.0) => {
                    // a x_p - a x_q <= rest
                    if *a > 0.0 {
                        arcs.push((*p, *q, -rest / a));
                    } else {
                        arcs.push((*q, *p, rest / a));
                    }
                }
                _ => {
                    let name = &self.model.constraints[row.constraint].name;
                    self.contract = Some(format!("row {name} is neither a bound nor a difference row at a leaf"));
                    self.stopped = true;
                    return;
                }
            }
        }
        let mut value = low.clone();
        let rounds = n + 2;
        let mut settled = false;
        for _ in 0..rounds {
            let mut changed = false;
            for &(p, q, w) in &arcs {
                let cand = value[p] + w;
                if cand > value[q] + 1e-9 * (1.0 + cand.abs()) {
                    value[q] = cand;
                    changed = true;
                }
            }
            if !changed {
                settled = true;
                break;
            }
        }
        if !settled {
            return;
        }
        for j in 0..n {
            if !self.is_bin[j] && value[j] > high[j] + TOL * (1.0 + high[j].abs()) {
                return;
            }
        }
        for j in 0..n {
            if !self.is_bin[j] {
                value[j] = value[j].min(self.ub[j]).max(self.lb[j]);
            } else {
                value[j] = self.lb[j];
            }
        }
        for d in deferred {
            let l: f64 = d.form.iter().map(|&(v, c)| c * value[v]).sum();
            let tol = 1e-7 * (1.0 + l.abs());
            value[d.var] = if l >= d.zero.0 - tol && l <= d.zero.1 + tol { 0.0 } else { 1.0 };
        }
        let viol = self.model.max_violation(&value);
        if viol > 1e-6 {
            log::warn!("leaf rejected: violation {viol:e}");
            return;
        }
        let obj = self.model.objective_value(&value);
        self.rows[self.cutoff].rhs = obj - self.model.objective_constant - 1e-9 * (1.0 + obj.abs());
        self.best = Some((obj, value));
    }
}

//! Depth-first branch-and-bound over `z`, then over `x` one component at a time.
//!
//! Once every station decision is taken the `x` columns fall apart into
//! independent components (one per period for the built models). Each component
//! is solved by its own search and cached under the station values it sees.
//! Because opening a station only ever loosens rows, the component optimum with
//! every undecided station open bounds the whole `z` subtree; when that
//! optimistic configuration also meets the station budget it is attained and the
//! subtree closes at once.

use std::collections::HashMap;
use std::time::Instant;

use super::compiled::{Compiled, Kind, Row};
use super::{finish, SolveParams, Solution, Status};
use crate::error::{Error, Result};
use crate::formulation::{ModelSpec, Relation, VarId};
use crate::rational::Rational;

/// Node seen by a tracing observer: the decided variables and the bound the
/// search used for the subtree below.
#[derive(Clone, Debug)]
pub struct NodeRecord {
    pub fixed: Vec<(VarId, bool)>,
    pub bound: Rational,
}

struct Component {
    xs: Vec<usize>,
    rows: Vec<usize>,
    groups: Vec<usize>,
    zs: Vec<usize>,
}

#[derive(Clone)]
struct CompResult {
    value: Option<i128>,
    values: Vec<bool>,
    bound: i128,
    complete: bool,
}

struct Clock {
    start: Instant,
    limit: Option<std::time::Duration>,
    aborted: bool,
    ticks: u32,
}

impl Clock {
    fn expired(&mut self) -> bool {
        if self.aborted {
            return true;
        }
        self.ticks += 1;
        if self.ticks % 256 == 0 {
            if let Some(limit) = self.limit {
                self.aborted = self.start.elapsed() >= limit;
            }
        }
        self.aborted
    }
}

fn find(parent: &mut [usize], mut v: usize) -> usize {
    while parent[v] != v {
        parent[v] = parent[parent[v]];
        v = parent[v];
    }
    v
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

fn feasible(row_rel: Relation, act: i128, pos_free: i128, neg_free: i128, rhs: i128) -> bool {
    match row_rel {
        Relation::Le => act + neg_free <= rhs,
        Relation::Ge => act + pos_free >= rhs,
        Relation::Eq => act + neg_free <= rhs && act + pos_free >= rhs,
    }
}

/// Running activity of a row under a partial assignment.
#[derive(Clone, Copy, Default)]
struct Activity {
    act: i128,
    pos_free: i128,
    neg_free: i128,
}

impl Activity {
    fn of(terms: impl Iterator<Item = i128>) -> Self {
        let mut a = Activity::default();
        for c in terms {
            if c > 0 {
                a.pos_free += c;
            } else {
                a.neg_free += c;
            }
        }
        a
    }

    fn assign(&mut self, coef: i128, value: bool) {
        if coef > 0 {
            self.pos_free -= coef;
        } else {
            self.neg_free -= coef;
        }
        if value {
            self.act += coef;
        }
    }

    fn unassign(&mut self, coef: i128, value: bool) {
        if coef > 0 {
            self.pos_free += coef;
        } else {
            self.neg_free += coef;
        }
        if value {
            self.act -= coef;
        }
    }
}

/// Search over the `x` columns of one component with the stations fixed.
struct CompSearch<'a> {
    c: &'a Compiled,
    order: Vec<usize>,
    domain: Vec<Option<bool>>,
    rows: Vec<(Vec<(usize, i128)>, Relation, i128)>,
    activity: Vec<Activity>,
    var_rows: Vec<Vec<(usize, i128)>>,
    groups: Vec<usize>,
    var_groups: Vec<Vec<usize>>,
    ones: Vec<usize>,
    free: Vec<usize>,
    card_rows: Vec<Vec<usize>>,
    values: Vec<bool>,
    best: Option<i128>,
    best_values: Vec<bool>,
    nodes: u64,
    trace: Option<Vec<(Vec<(usize, bool)>, i128)>>,
    path: Vec<(usize, bool)>,
}

impl<'a> CompSearch<'a> {
    fn new(c: &'a Compiled, comp: &Component, z: &[bool], trace: bool) -> Self {
        let local: HashMap<usize, usize> = comp.xs.iter().enumerate().map(|(l, &v)| (v, l)).collect();
        let n = comp.xs.len();
        let mut var_rows = vec![Vec::new(); n];
        let mut rows = Vec::with_capacity(comp.rows.len());
        for &r in &comp.rows {
            let row: &Row = &c.rows[r];
            let mut rhs = row.rhs;
            let mut terms = Vec::new();
            for &(v, a) in &row.terms {
                match c.kinds[v] {
                    Kind::Z => {
                        if z[v] {
                            rhs -= a;
                        }
                    }
                    _ => {
                        let l = local[&v];
                        var_rows[l].push((rows.len(), a));
                        terms.push((l, a));
                    }
                }
            }
            rows.push((terms, row.relation, rhs));
        }
        let activity = rows.iter().map(|(t, _, _)| Activity::of(t.iter().map(|(_, a)| *a))).collect();
        let group_local: HashMap<usize, usize> = comp.groups.iter().enumerate().map(|(l, &g)| (g, l)).collect();
        let var_groups: Vec<Vec<usize>> =
            comp.xs.iter().map(|&v| c.var_groups[v].iter().map(|g| group_local[g]).collect()).collect();
        let free: Vec<usize> = comp.groups.iter().map(|&g| c.groups[g].cover.len()).collect();
        let card_rows = comp
            .groups
            .iter()
            .map(|&g| {
                let cover = &c.groups[g].cover;
                let Some(first) = cover.first() else { return Vec::new() };
                var_rows[local[first]]
                    .iter()
                    .map(|&(r, _)| r)
                    .filter(|&r| {
                        let (terms, rel, _) = &rows[r];
                        *rel == Relation::Le
                            && terms.iter().all(|(_, a)| *a == 1)
                            && cover.iter().all(|v| terms.iter().any(|(l, _)| *l == local[v]))
                    })
                    .collect()
            })
            .collect();
        // Column order: most valuable first, lowest index on ties.
        let mut order: Vec<usize> = (0..n).collect();
        let potential: Vec<i128> =
            comp.xs.iter().map(|&v| c.var_groups[v].iter().map(|&g| c.groups[g].max_value()).sum()).collect();
        order.sort_by(|&a, &b| potential[b].cmp(&potential[a]).then(a.cmp(&b)));
        // Columns at closed stations are pinned to 0 by their rows anyway; the
        // search sees that through the activity checks.
        let domain = comp.xs.iter().map(|&v| c.fixed[v]).collect();
        CompSearch {
            c,
            order,
            domain,
            rows,
            activity,
            var_rows,
            groups: comp.groups.clone(),
            var_groups,
            ones: vec![0; comp.groups.len()],
            free,
            card_rows,
            values: vec![false; n],
            best: None,
            best_values: vec![false; n],
            nodes: 0,
            trace: trace.then(Vec::new),
            path: Vec::new(),
        }
    }

    fn bound(&self) -> i128 {
        let mut total = 0;
        for (l, &g) in self.groups.iter().enumerate() {
            let mut extra = self.free[l];
            for &r in &self.card_rows[l] {
                let (_, _, rhs) = self.rows[r];
                extra = extra.min((rhs - self.activity[r].act).max(0) as usize);
            }
            total += self.c.groups[g].value(self.ones[l] + extra);
        }
        total
    }

    fn rows_ok(&self) -> bool {
        self.rows
            .iter()
            .zip(&self.activity)
            .all(|((_, rel, rhs), a)| feasible(*rel, a.act, a.pos_free, a.neg_free, *rhs))
    }

    fn set(&mut self, l: usize, value: bool) -> bool {
        self.values[l] = value;
        let mut ok = true;
        for &(r, a) in &self.var_rows[l] {
            let act = &mut self.activity[r];
            act.assign(a, value);
            let (_, rel, rhs) = self.rows[r];
            ok &= feasible(rel, act.act, act.pos_free, act.neg_free, rhs);
        }
        for &g in &self.var_groups[l] {
            self.free[g] -= 1;
            if value {
                self.ones[g] += 1;
            }
        }
        ok
    }

    fn unset(&mut self, l: usize, value: bool) {
        for &(r, a) in &self.var_rows[l] {
            self.activity[r].unassign(a, value);
        }
        for &g in &self.var_groups[l] {
            self.free[g] += 1;
            if value {
                self.ones[g] -= 1;
            }
        }
        self.values[l] = false;
    }

    fn dfs(&mut self, depth: usize, clock: &mut Clock) {
        if clock.expired() {
            return;
        }
        self.nodes += 1;
        let bound = self.bound();
        if let Some(trace) = &mut self.trace {
            trace.push((self.path.clone(), bound));
        }
        if self.best.is_some_and(|b| bound <= b) {
            return;
        }
        if depth == self.order.len() {
            self.best = Some(bound);
            self.best_values.clone_from(&self.values);
            return;
        }
        let l = self.order[depth];
        let choices: &[bool] = match self.domain[l] {
            Some(true) => &[true],
            Some(false) => &[false],
            None => &[true, false],
        };
        for &value in choices {
            if self.set(l, value) {
                self.path.push((l, value));
                self.dfs(depth + 1, clock);
                self.path.pop();
            }
            self.unset(l, value);
            if clock.aborted {
                return;
            }
        }
    }

    fn run(mut self, clock: &mut Clock) -> (CompResult, u64, Option<Vec<(Vec<(usize, bool)>, i128)>>) {
        let root = self.bound();
        if self.rows_ok() {
            self.dfs(0, clock);
        }
        let complete = !clock.aborted;
        let bound = if complete { self.best.unwrap_or(i128::MIN) } else { root.max(self.best.unwrap_or(root)) };
        let result = CompResult { value: self.best, values: self.best_values, bound, complete };
        (result, self.nodes, self.trace)
    }
}

type Observer<'o> = &'o mut dyn FnMut(&NodeRecord);

struct Search<'a, 'o> {
    c: &'a Compiled,
    comps: Vec<Component>,
    z_order: Vec<usize>,
    z_rows: Vec<usize>,
    z_activity: Vec<Activity>,
    z_var_rows: HashMap<usize, Vec<(usize, i128)>>,
    z: Vec<bool>,
    decided: Vec<bool>,
    cache: Vec<HashMap<Vec<bool>, CompResult>>,
    incumbent: Option<(i128, Vec<bool>)>,
    pending: Option<i128>,
    nodes: u64,
    clock: Clock,
    observer: Option<Observer<'o>>,
}

impl<'a, 'o> Search<'a, 'o> {
    fn new(c: &'a Compiled, params: &SolveParams, observer: Option<Observer<'o>>) -> Result<Self> {
        let n = c.vars.len();
        let mut parent: Vec<usize> = (0..n).collect();
        let mut z_rows = Vec::new();
        let mut x_rows = Vec::new();
        for (r, row) in c.rows.iter().enumerate() {
            let xs: Vec<usize> = row.terms.iter().map(|t| t.0).filter(|&v| c.kinds[v] == Kind::X).collect();
            if xs.is_empty() {
                z_rows.push(r);
                continue;
            }
            for &(v, a) in &row.terms {
                if c.kinds[v] == Kind::Z {
                    let loosens = match row.relation {
                        Relation::Le => a <= 0,
                        Relation::Ge => a >= 0,
                        Relation::Eq => false,
                    };
                    if !loosens {
                        return Err(Error::UnsupportedModel(format!(
                            "{} row tightens when {} opens",
                            row.tag, c.vars[v]
                        )));
                    }
                }
            }
            for w in xs.windows(2) {
                union(&mut parent, w[0], w[1]);
            }
            x_rows.push(r);
        }
        for g in &c.groups {
            for w in g.cover.windows(2) {
                union(&mut parent, w[0], w[1]);
            }
        }
        let mut comp_of: HashMap<usize, usize> = HashMap::new();
        let mut comps: Vec<Component> = Vec::new();
        for v in 0..n {
            if c.kinds[v] != Kind::X {
                continue;
            }
            let root = find(&mut parent, v);
            let id = *comp_of.entry(root).or_insert_with(|| {
                comps.push(Component { xs: Vec::new(), rows: Vec::new(), groups: Vec::new(), zs: Vec::new() });
                comps.len() - 1
            });
            comps[id].xs.push(v);
        }
        let comp_of_var = |v: usize, parent: &mut Vec<usize>| comp_of[&find(parent, v)];
        for &r in &x_rows {
            let row = &c.rows[r];
            let x = row.terms.iter().find(|t| c.kinds[t.0] == Kind::X).unwrap().0;
            let id = comp_of_var(x, &mut parent);
            comps[id].rows.push(r);
            for &(v, _) in &row.terms {
                if c.kinds[v] == Kind::Z {
                    comps[id].zs.push(v);
                }
            }
        }
        for (g, group) in c.groups.iter().enumerate() {
            if let Some(&x) = group.cover.first() {
                let id = comp_of_var(x, &mut parent);
                comps[id].groups.push(g);
            }
        }
        for comp in &mut comps {
            comp.zs.sort_unstable();
            comp.zs.dedup();
        }

        let mut z_vars: Vec<usize> = (0..n).filter(|&v| c.kinds[v] == Kind::Z).collect();
        let mut potential: HashMap<usize, i128> = HashMap::new();
        for &z in &z_vars {
            let mut seen = std::collections::HashSet::new();
            let mut total = 0;
            for (v, site) in c.site_of.iter().enumerate() {
                if *site == Some(z) {
                    for &g in &c.var_groups[v] {
                        if seen.insert(g) {
                            total += c.groups[g].max_value();
                        }
                    }
                }
            }
            potential.insert(z, total);
        }
        z_vars.sort_by(|a, b| potential[b].cmp(&potential[a]).then(a.cmp(b)));

        let mut z_var_rows: HashMap<usize, Vec<(usize, i128)>> = HashMap::new();
        let z_activity = z_rows
            .iter()
            .enumerate()
            .map(|(k, &r)| {
                for &(v, a) in &c.rows[r].terms {
                    z_var_rows.entry(v).or_default().push((k, a));
                }
                Activity::of(c.rows[r].terms.iter().map(|t| t.1))
            })
            .collect();
        let n_comps = comps.len();
        Ok(Search {
            c,
            comps,
            z_order: z_vars,
            z_rows,
            z_activity,
            z_var_rows,
            z: vec![false; n],
            decided: vec![false; n],
            cache: vec![HashMap::new(); n_comps],
            incumbent: None,
            pending: None,
            nodes: 0,
            clock: Clock { start: Instant::now(), limit: params.time_limit, aborted: false, ticks: 0 },
            observer,
        })
    }

    fn z_rows_ok(&self) -> bool {
        self.z_rows
            .iter()
            .zip(&self.z_activity)
            .all(|(&r, a)| feasible(self.c.rows[r].relation, a.act, a.pos_free, a.neg_free, self.c.rows[r].rhs))
    }

    /// Station rows hold with every undecided station open.
    fn optimistic_z_feasible(&self) -> bool {
        self.z_rows
            .iter()
            .zip(&self.z_activity)
            .all(|(&r, a)| self.c.rows[r].satisfied(a.act + a.pos_free + a.neg_free))
    }

    fn set_z(&mut self, z: usize, value: bool) -> bool {
        self.z[z] = value;
        self.decided[z] = true;
        let mut ok = true;
        if let Some(rows) = self.z_var_rows.get(&z) {
            for &(k, a) in rows {
                self.z_activity[k].assign(a, value);
                let row = &self.c.rows[self.z_rows[k]];
                let act = self.z_activity[k];
                ok &= feasible(row.relation, act.act, act.pos_free, act.neg_free, row.rhs);
            }
        }
        ok
    }

    fn unset_z(&mut self, z: usize, value: bool) {
        if let Some(rows) = self.z_var_rows.get(&z) {
            for &(k, a) in rows {
                self.z_activity[k].unassign(a, value);
            }
        }
        self.z[z] = false;
        self.decided[z] = false;
    }

    fn relaxed_z(&self) -> Vec<bool> {
        (0..self.c.vars.len())
            .map(|v| if self.decided[v] { self.z[v] } else { self.c.kinds[v] == Kind::Z && self.c.fixed[v] != Some(false) })
            .collect()
    }

    fn z_fixed_list(&self, relaxed: Option<&[bool]>) -> Vec<(VarId, bool)> {
        self.z_order
            .iter()
            .filter(|&&z| relaxed.is_some() || self.decided[z])
            .map(|&z| (self.c.vars[z], relaxed.map_or(self.z[z], |r| r[z])))
            .collect()
    }

    /// Component results with undecided stations open.
    fn components(&mut self) -> Vec<CompResult> {
        let relaxed = self.relaxed_z();
        let mut out = Vec::with_capacity(self.comps.len());
        let mut traces = Vec::new();
        for id in 0..self.comps.len() {
            let key: Vec<bool> = self.comps[id].zs.iter().map(|&z| relaxed[z]).collect();
            if let Some(hit) = self.cache[id].get(&key) {
                out.push(hit.clone());
                continue;
            }
            let search = CompSearch::new(self.c, &self.comps[id], &relaxed, self.observer.is_some());
            let (result, nodes, trace) = search.run(&mut self.clock);
            self.nodes += nodes;
            if let Some(trace) = trace {
                traces.push((id, trace));
            }
            if result.complete {
                self.cache[id].insert(key, result.clone());
            }
            out.push(result);
        }
        if self.observer.is_some() {
            let total: i128 = out.iter().map(|r| r.bound).sum();
            let base = self.z_fixed_list(Some(&relaxed));
            let observer = self.observer.as_mut().unwrap();
            for (id, trace) in traces {
                let others = total - out[id].bound;
                for (path, bound) in trace {
                    let mut fixed = base.clone();
                    fixed.extend(path.iter().map(|&(l, b)| (self.c.vars[self.comps[id].xs[l]], b)));
                    observer(&NodeRecord { fixed, bound: self.c.to_rational(bound + others) });
                }
            }
        }
        out
    }

    fn assemble(&self, relaxed: &[bool], results: &[CompResult]) -> Vec<bool> {
        let mut values: Vec<bool> = relaxed.to_vec();
        for (comp, r) in self.comps.iter().zip(results) {
            for (l, &v) in comp.xs.iter().enumerate() {
                values[v] = r.values[l];
            }
        }
        values
    }

    fn offer(&mut self, value: i128, values: Vec<bool>) {
        if self.incumbent.as_ref().map_or(true, |(best, _)| value > *best) {
            self.incumbent = Some((value, values));
        }
    }

    fn dfs(&mut self, depth: usize) {
        if self.clock.expired() {
            return;
        }
        self.nodes += 1;
        let results = self.components();
        let infeasible = results.iter().any(|r| r.complete && r.value.is_none());
        let bound: i128 = if infeasible { i128::MIN } else { results.iter().map(|r| r.bound).sum() };
        if let Some(observer) = self.observer.as_mut() {
            if !infeasible {
                let fixed = self.z_order.iter().filter(|&&z| self.decided[z]).map(|&z| (self.c.vars[z], self.z[z])).collect();
                observer(&NodeRecord { fixed, bound: self.c.to_rational(bound) });
            }
        }
        if infeasible {
            return;
        }
        let all_known = results.iter().all(|r| r.value.is_some());
        if all_known && self.optimistic_z_feasible() {
            let value: i128 = results.iter().map(|r| r.value.unwrap()).sum();
            let values = self.assemble(&self.relaxed_z(), &results);
            self.offer(value, values);
            if results.iter().all(|r| r.complete) {
                return;
            }
        }
        if self.clock.aborted {
            self.pending = Some(self.pending.map_or(bound, |p| p.max(bound)));
            return;
        }
        if self.incumbent.as_ref().is_some_and(|(best, _)| bound <= *best) {
            return;
        }
        let Some(&z) = self.z_order[depth..].first() else { return };
        let choices: &[bool] = match self.c.fixed[z] {
            Some(true) => &[true],
            Some(false) => &[false],
            None => &[true, false],
        };
        for &value in choices {
            if self.set_z(z, value) {
                self.dfs(depth + 1);
            }
            self.unset_z(z, value);
            if self.clock.aborted {
                self.pending = Some(self.pending.map_or(bound, |p| p.max(bound)));
                return;
            }
        }
    }
}

fn trivial(c: &Compiled) -> Option<Vec<bool>> {
    let mut values: Vec<bool> = c.fixed.iter().map(|f| f.unwrap_or(false)).collect();
    c.decode_y(&mut values);
    c.violation(&values).is_none().then_some(values)
}

fn run(model: &ModelSpec, params: &SolveParams, observer: Option<Observer>) -> Result<Solution> {
    let c = Compiled::new(model)?;
    let mut search = Search::new(&c, params, observer)?;
    if let Some(values) = trivial(&c) {
        let value = c.decode_y(&mut values.clone());
        search.offer(value, values);
    }
    if search.z_rows_ok() {
        search.dfs(0);
    }
    let elapsed = search.clock.start.elapsed();
    let aborted = search.clock.aborted;
    let nodes = search.nodes;
    let pending = search.pending;
    match search.incumbent.take() {
        None => {
            let status = if aborted { Status::TimeLimit } else { Status::Infeasible };
            Ok(Solution::empty(status, nodes, elapsed))
        }
        Some((value, mut values)) => {
            c.close_empty_sites(&mut values);
            let check = c.decode_y(&mut values);
            debug_assert_eq!(check, value);
            let (status, bound) = if aborted {
                (Status::TimeLimit, pending.map_or(value, |p| p.max(value)))
            } else {
                (Status::Optimal, value)
            };
            finish(model, &c, &values, status, Some(c.to_rational(bound)), nodes, elapsed)
        }
    }
}

pub fn solve_exact(model: &ModelSpec, params: &SolveParams) -> Result<Solution> {
    run(model, params, None)
}

/// As [`solve_exact`], reporting every node to `observer`.
pub fn solve_exact_traced(
    model: &ModelSpec,
    params: &SolveParams,
    observer: &mut dyn FnMut(&NodeRecord),
) -> Result<Solution> {
    run(model, params, Some(observer))
}

//! Greedy construction followed by first-improvement local search.
//!
//! Greedy keeps, for every (type, period) bucket, the best single vehicle
//! placement; only the bucket that changed is rescanned unless a station was
//! opened. Local search tries, in seeded random order, relocating a vehicle,
//! swapping two vehicles of different types between their stations and moving
//! everything from one station to a closed one. A station left empty is closed
//! straight away so the budget can be reused.

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::compiled::{Compiled, Kind};
use super::{finish, SolveParams, Solution, Status};
use crate::error::Result;
use crate::formulation::{ModelSpec, VarId};

const CLOSED_SAMPLES: usize = 8;
const SWAP_SAMPLES: usize = 16;

struct State<'a> {
    c: &'a Compiled,
    values: Vec<bool>,
    act: Vec<i128>,
    ones: Vec<usize>,
    value: i128,
}

impl<'a> State<'a> {
    fn new(c: &'a Compiled) -> Self {
        State {
            c,
            values: vec![false; c.vars.len()],
            act: vec![0; c.rows.len()],
            ones: vec![0; c.groups.len()],
            value: c.groups.iter().map(|g| g.value(0)).sum(),
        }
    }

    fn flip(&mut self, v: usize, new: bool) {
        if self.values[v] == new {
            return;
        }
        self.values[v] = new;
        for &(r, a) in &self.c.var_rows[v] {
            self.act[r] += if new { a } else { -a };
        }
        for &g in &self.c.var_groups[v] {
            let group = &self.c.groups[g];
            let before = group.value(self.ones[g]);
            if new {
                self.ones[g] += 1;
            } else {
                self.ones[g] -= 1;
            }
            self.value += group.value(self.ones[g]) - before;
        }
    }

    fn rows_ok(&self, v: usize) -> bool {
        self.c.var_rows[v].iter().all(|&(r, _)| self.c.rows[r].satisfied(self.act[r]))
    }

    fn can_set(&self, v: usize, new: bool) -> bool {
        if self.values[v] == new {
            return true;
        }
        self.c.var_rows[v].iter().all(|&(r, a)| self.c.rows[r].satisfied(self.act[r] + if new { a } else { -a }))
    }

    fn gain(&self, v: usize) -> i128 {
        self.c
            .var_groups[v]
            .iter()
            .map(|&g| {
                let group = &self.c.groups[g];
                group.value(self.ones[g] + 1) - group.value(self.ones[g])
            })
            .sum()
    }

    /// Applies `changes`; keeps them only if rows hold and the objective rises
    /// (or `accept_equal` and it does not fall). Returns whether they were kept.
    fn attempt(&mut self, changes: &[(usize, bool)], accept_equal: bool) -> bool {
        if changes.iter().any(|&(v, new)| self.c.fixed[v].is_some_and(|f| f != new)) {
            return false;
        }
        let before = self.value;
        let old: Vec<bool> = changes.iter().map(|&(v, _)| self.values[v]).collect();
        for &(v, new) in changes {
            self.flip(v, new);
        }
        let ok = changes.iter().all(|&(v, _)| self.rows_ok(v));
        let better = self.value > before || (accept_equal && self.value == before);
        if ok && better {
            return true;
        }
        for (&(v, _), &was) in changes.iter().zip(&old).rev() {
            self.flip(v, was);
        }
        false
    }
}

struct Layout {
    index: HashMap<VarId, usize>,
    buckets: Vec<Vec<usize>>,
    site_xs: HashMap<usize, Vec<usize>>,
    zs: Vec<usize>,
    /// Coefficient of the station column in each row of an `x` column,
    /// aligned with `var_rows`.
    site_coef: Vec<Vec<i128>>,
}

impl Layout {
    fn new(c: &Compiled) -> Self {
        let index: HashMap<VarId, usize> = c.vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let mut bucket_ids: HashMap<(u16, u16), usize> = HashMap::new();
        let mut buckets: Vec<Vec<usize>> = Vec::new();
        let mut site_xs: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut site_coef = vec![Vec::new(); c.vars.len()];
        for (v, var) in c.vars.iter().enumerate() {
            if let VarId::X { ty, period, .. } = *var {
                let b = *bucket_ids.entry((period, ty)).or_insert_with(|| {
                    buckets.push(Vec::new());
                    buckets.len() - 1
                });
                buckets[b].push(v);
                if let Some(z) = c.site_of[v] {
                    site_xs.entry(z).or_default().push(v);
                    site_coef[v] = c.var_rows[v]
                        .iter()
                        .map(|&(r, _)| c.rows[r].terms.iter().find(|t| t.0 == z).map_or(0, |t| t.1))
                        .collect();
                } else {
                    site_coef[v] = vec![0; c.var_rows[v].len()];
                }
            }
        }
        let zs = (0..c.vars.len()).filter(|&v| c.kinds[v] == Kind::Z).collect();
        Layout { index, buckets, site_xs, zs, site_coef }
    }

    fn x_at(&self, c: &Compiled, z: usize, like: usize) -> Option<usize> {
        let (VarId::Z { site }, VarId::X { ty, period, .. }) = (c.vars[z], c.vars[like]) else { return None };
        self.index.get(&VarId::X { site, ty, period }).copied()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Candidate {
    gain: i128,
    no_open: bool,
    rev_index: std::cmp::Reverse<usize>,
}

struct Greedy<'s, 'a> {
    st: &'s mut State<'a>,
    layout: &'s Layout,
    openable: Vec<bool>,
}

impl Greedy<'_, '_> {
    fn refresh_openable(&mut self) {
        for &z in &self.layout.zs {
            self.openable[z] = !self.st.values[z] && self.st.c.fixed[z].is_none() && self.st.can_set(z, true);
        }
    }

    fn evaluate(&self, v: usize) -> Option<Candidate> {
        let st = &*self.st;
        if st.values[v] || st.c.fixed[v].is_some() {
            return None;
        }
        let gain = st.gain(v);
        if gain <= 0 {
            return None;
        }
        let no_open = match st.c.site_of[v] {
            Some(z) if !st.values[z] => {
                if !self.openable[z] {
                    return None;
                }
                let ok = st.c.var_rows[v]
                    .iter()
                    .zip(&self.layout.site_coef[v])
                    .all(|(&(r, a), zc)| st.c.rows[r].satisfied(st.act[r] + a + zc));
                if !ok {
                    return None;
                }
                false
            }
            _ => {
                if !st.can_set(v, true) {
                    return None;
                }
                true
            }
        };
        Some(Candidate { gain, no_open, rev_index: std::cmp::Reverse(v) })
    }

    fn best_in(&self, b: usize) -> Option<Candidate> {
        self.layout.buckets[b].iter().filter_map(|&v| self.evaluate(v)).max()
    }

    fn run(&mut self, clock: &Instant, limit: Option<std::time::Duration>) {
        self.refresh_openable();
        let mut best: Vec<Option<Candidate>> = (0..self.layout.buckets.len()).map(|b| self.best_in(b)).collect();
        loop {
            if limit.is_some_and(|l| clock.elapsed() >= l) {
                return;
            }
            let Some((b, cand)) = best.iter().enumerate().filter_map(|(b, c)| c.map(|c| (b, c))).max_by_key(|(_, c)| *c)
            else {
                return;
            };
            let v = cand.rev_index.0;
            if self.evaluate(v) != Some(cand) {
                best[b] = self.best_in(b);
                continue;
            }
            let opened = !cand.no_open;
            if opened {
                let z = self.st.c.site_of[v].unwrap();
                self.st.flip(z, true);
            }
            self.st.flip(v, true);
            debug_assert!(self.st.rows_ok(v));
            if opened {
                self.refresh_openable();
                best = (0..self.layout.buckets.len()).map(|b| self.best_in(b)).collect();
            } else {
                best[b] = self.best_in(b);
            }
        }
    }
}

struct Search<'s, 'a> {
    st: &'s mut State<'a>,
    layout: &'s Layout,
    rng: ChaCha8Rng,
    evaluations: u64,
    budget: u64,
    start: Instant,
    limit: Option<std::time::Duration>,
}

impl Search<'_, '_> {
    fn spent(&mut self) -> bool {
        self.evaluations += 1;
        if self.evaluations >= self.budget {
            return true;
        }
        self.evaluations % 1024 == 0 && self.limit.is_some_and(|l| self.start.elapsed() >= l)
    }

    fn exhausted(&self) -> bool {
        self.evaluations >= self.budget || self.limit.is_some_and(|l| self.start.elapsed() >= l)
    }

    fn close_if_empty(&mut self, z: Option<usize>) {
        let Some(z) = z else { return };
        if !self.st.values[z] || self.st.c.fixed[z].is_some() {
            return;
        }
        let empty = self.layout.site_xs.get(&z).map_or(true, |xs| xs.iter().all(|&x| !self.st.values[x]));
        if empty && self.st.can_set(z, false) {
            self.st.flip(z, false);
        }
    }

    fn open_sites(&self) -> Vec<usize> {
        self.layout.zs.iter().copied().filter(|&z| self.st.values[z]).collect()
    }

    fn closed_sample(&mut self) -> Vec<usize> {
        let closed: Vec<usize> = self
            .layout
            .zs
            .iter()
            .copied()
            .filter(|&z| !self.st.values[z] && self.st.c.fixed[z].is_none())
            .collect();
        closed.choose_multiple(&mut self.rng, CLOSED_SAMPLES).copied().collect()
    }

    fn relocate(&mut self, v: usize) -> bool {
        let c = self.st.c;
        let from = c.site_of[v];
        let mut targets: Vec<usize> = self.open_sites();
        targets.extend(self.closed_sample());
        targets.shuffle(&mut self.rng);
        for z in targets {
            if Some(z) == from {
                continue;
            }
            let Some(w) = self.layout.x_at(c, z, v) else { continue };
            if self.st.values[w] {
                continue;
            }
            if self.spent() {
                return false;
            }
            let mut changes = vec![(v, false)];
            if !self.st.values[z] {
                changes.push((z, true));
            }
            changes.push((w, true));
            if self.st.attempt(&changes, false) {
                self.close_if_empty(from);
                return true;
            }
        }
        false
    }

    fn swap(&mut self, v: usize) -> bool {
        let c = self.st.c;
        let VarId::X { ty, period, .. } = c.vars[v] else { return false };
        let mut partners: Vec<usize> = self
            .st
            .values
            .iter()
            .enumerate()
            .filter(|&(w, &on)| {
                on && matches!(c.vars[w], VarId::X { ty: t2, period: p2, .. } if t2 != ty && p2 == period)
                    && c.site_of[w] != c.site_of[v]
            })
            .map(|(w, _)| w)
            .collect();
        partners.shuffle(&mut self.rng);
        partners.truncate(SWAP_SAMPLES);
        for w in partners {
            let (Some(zv), Some(zw)) = (c.site_of[v], c.site_of[w]) else { continue };
            let (Some(v2), Some(w2)) = (self.layout.x_at(c, zv, w), self.layout.x_at(c, zw, v)) else { continue };
            if self.st.values[v2] || self.st.values[w2] {
                continue;
            }
            if self.spent() {
                return false;
            }
            if self.st.attempt(&[(v, false), (w, false), (v2, true), (w2, true)], false) {
                return true;
            }
        }
        false
    }

    fn move_station(&mut self, z: usize) -> bool {
        let c = self.st.c;
        if c.fixed[z].is_some() {
            return false;
        }
        let held: Vec<usize> = self
            .layout
            .site_xs
            .get(&z)
            .map(|xs| xs.iter().copied().filter(|&x| self.st.values[x]).collect())
            .unwrap_or_default();
        if held.iter().any(|&x| c.fixed[x].is_some()) {
            return false;
        }
        for target in self.closed_sample() {
            if self.spent() {
                return false;
            }
            let mut changes: Vec<(usize, bool)> = held.iter().map(|&x| (x, false)).collect();
            changes.push((z, false));
            changes.push((target, true));
            let mut ok = true;
            for &x in &held {
                match self.layout.x_at(c, target, x) {
                    Some(w) => changes.push((w, true)),
                    None => ok = false,
                }
            }
            if ok && self.st.attempt(&changes, false) {
                self.close_if_empty(Some(target));
                return true;
            }
        }
        false
    }

    fn run(&mut self) {
        loop {
            let mut improved = false;
            let mut placed: Vec<usize> = (0..self.st.values.len())
                .filter(|&v| self.st.c.kinds[v] == Kind::X && self.st.values[v] && self.st.c.fixed[v].is_none())
                .collect();
            placed.shuffle(&mut self.rng);
            for v in placed {
                if self.exhausted() {
                    return;
                }
                if !self.st.values[v] {
                    continue;
                }
                if self.relocate(v) || self.swap(v) {
                    improved = true;
                }
            }
            let mut sites = self.open_sites();
            sites.shuffle(&mut self.rng);
            for z in sites {
                if self.exhausted() {
                    return;
                }
                if self.st.values[z] && self.move_station(z) {
                    improved = true;
                }
            }
            if !improved {
                return;
            }
        }
    }
}

fn apply_hint(st: &mut State, hint: &crate::instance::Plan, layout: &Layout) {
    let c = st.c;
    let mut by_site: Vec<(usize, Vec<usize>)> = Vec::new();
    for &site in &hint.opened_sites {
        let Some(&z) = layout.index.get(&VarId::z(site)) else { continue };
        let xs: Vec<usize> = hint
            .allocations
            .iter()
            .filter(|a| a.site == site && a.count > 0)
            .filter_map(|a| layout.index.get(&VarId::x(a.site, a.ambulance_type, a.period)).copied())
            .collect();
        by_site.push((z, xs));
    }
    by_site.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
    for (z, xs) in by_site {
        if !st.values[z] {
            if c.fixed[z] == Some(false) || !st.attempt(&[(z, true)], true) {
                continue;
            }
        }
        for x in xs {
            st.attempt(&[(x, true)], true);
        }
    }
}

pub fn solve_heuristic(model: &ModelSpec, params: &SolveParams) -> Result<Solution> {
    let start = Instant::now();
    let c = Compiled::new(model)?;
    let layout = Layout::new(&c);
    let mut st = State::new(&c);
    for v in 0..c.vars.len() {
        if c.fixed[v] == Some(true) {
            st.flip(v, true);
            if let Some(z) = c.site_of[v] {
                if c.fixed[z].is_none() {
                    st.flip(z, true);
                }
            }
        }
    }
    let mut values = st.values.clone();
    c.decode_y(&mut values);
    if c.violation(&values).is_some() {
        return Ok(Solution::empty(Status::Infeasible, 0, start.elapsed()));
    }
    if let Some(hint) = &params.hint {
        apply_hint(&mut st, hint, &layout);
    }
    Greedy { openable: vec![false; c.vars.len()], st: &mut st, layout: &layout }.run(&start, params.time_limit);
    let mut search = Search {
        st: &mut st,
        layout: &layout,
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        evaluations: 0,
        budget: params.budget,
        start,
        limit: params.time_limit,
    };
    search.run();
    let evaluations = search.evaluations;
    let mut values = st.values.clone();
    c.drop_idle(&mut values);
    c.close_empty_sites(&mut values);
    c.decode_y(&mut values);
    finish(model, &c, &values, Status::Feasible, None, evaluations, start.elapsed())
}

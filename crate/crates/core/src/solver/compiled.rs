//! Index-based view of a [`ModelSpec`] used by both solvers.
//!
//! Rows are scaled to integers. Rows holding `y` variables are folded into
//! [`Group`]s: one per linking row, listing the `x` columns that count towards
//! it and the `y` options it can pay for. Everything else stays a plain row
//! over `z` and `x`.

use std::collections::HashMap;

use num_integer::Integer;
use num_traits::{CheckedMul, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::formulation::{ConstraintTag, LinearConstraint, ModelSpec, Relation, VarId};
use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Kind {
    Z,
    X,
    Y,
}

#[derive(Clone, Debug)]
pub(crate) struct Row {
    pub terms: Vec<(usize, i128)>,
    pub relation: Relation,
    pub rhs: i128,
    pub tag: ConstraintTag,
}

impl Row {
    pub fn satisfied(&self, activity: i128) -> bool {
        match self.relation {
            Relation::Le => activity <= self.rhs,
            Relation::Ge => activity >= self.rhs,
            Relation::Eq => activity == self.rhs,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct YOption {
    pub var: usize,
    /// Number of counted vehicles the option needs.
    pub weight: usize,
    pub coef: i128,
}

#[derive(Clone, Debug)]
pub(crate) struct Group {
    pub cover: Vec<usize>,
    pub options: Vec<YOption>,
    /// `best[n]`: best objective reachable with `n` counted vehicles.
    pub best: Vec<i128>,
    /// Option achieving `best[n]`, lowest weight on ties.
    pub best_option: Vec<Option<usize>>,
}

impl Group {
    pub fn value(&self, n: usize) -> i128 {
        self.best[n.min(self.best.len() - 1)]
    }

    pub fn choice(&self, n: usize) -> Option<usize> {
        self.best_option[n.min(self.best_option.len() - 1)]
    }

    pub fn max_value(&self) -> i128 {
        *self.best.last().unwrap()
    }
}

pub(crate) struct Compiled {
    pub vars: Vec<VarId>,
    pub kinds: Vec<Kind>,
    /// `Some(v)` when a single-variable row pins the variable.
    pub fixed: Vec<Option<bool>>,
    pub scale: i128,
    pub rows: Vec<Row>,
    /// Rows (over `z`/`x`) each variable appears in.
    pub var_rows: Vec<Vec<(usize, i128)>>,
    pub groups: Vec<Group>,
    /// Groups whose cover contains the `x` variable.
    pub var_groups: Vec<Vec<usize>>,
    /// For each `x`, the index of its site's `z` column, if declared.
    pub site_of: Vec<Option<usize>>,
}

fn denominators_lcm<'a>(mut values: impl Iterator<Item = &'a Rational>) -> Result<i128> {
    values.try_fold(1i128, |acc, v| {
        let d = *v.denom();
        let g = acc.gcd(&d);
        (acc / g).checked_mul(d).ok_or(Error::CoefficientOverflow)
    })
}

fn scaled(v: &Rational, scale: i128) -> Result<i128> {
    v.checked_mul(&Rational::from_integer(scale)).map(|r| r.to_integer()).ok_or(Error::CoefficientOverflow)
}

fn scale_row(c: &LinearConstraint, index: &HashMap<VarId, usize>) -> Result<Row> {
    let lcm = denominators_lcm(c.terms.iter().map(|(_, v)| v).chain(std::iter::once(&c.rhs)))?;
    let mul = |v: &Rational| -> Result<i128> {
        let r = v.checked_mul(&Rational::from_integer(lcm)).ok_or(Error::CoefficientOverflow)?;
        Ok(r.to_integer())
    };
    let terms = c
        .terms
        .iter()
        .filter(|(_, v)| !v.is_zero())
        .map(|(var, v)| Ok((index[var], mul(v)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Row { terms, relation: c.relation, rhs: mul(&c.rhs)?, tag: c.tag })
}

fn unsupported(message: impl Into<String>) -> Error {
    Error::UnsupportedModel(message.into())
}

impl Compiled {
    pub fn new(model: &ModelSpec) -> Result<Compiled> {
        model.validate()?;
        let vars = model.variables.clone();
        let index = model.var_index();
        let n = vars.len();
        let kinds: Vec<Kind> = vars
            .iter()
            .map(|v| match v {
                VarId::Z { .. } => Kind::Z,
                VarId::X { .. } => Kind::X,
                _ => Kind::Y,
            })
            .collect();

        let scale = denominators_lcm(model.objective.iter().map(|(_, c)| c))?;
        let mut obj = vec![0i128; n];
        for (v, c) in &model.objective {
            let i = index[v];
            obj[i] = obj[i].checked_add(scaled(c, scale)?).ok_or(Error::CoefficientOverflow)?;
            if kinds[i] != Kind::Y && obj[i] != 0 {
                return Err(unsupported(format!("objective weight on {v}; only coverage variables may carry one")));
            }
            if obj[i] < 0 {
                return Err(unsupported(format!("negative objective weight on {v}")));
            }
        }

        let mut fixed: Vec<Option<bool>> = vec![None; n];
        let mut rows = Vec::new();
        let mut link_rows = Vec::new();
        let mut one_k_rows = Vec::new();
        let mut infeasible = None;
        for c in &model.constraints {
            let row = scale_row(c, &index)?;
            let has_y = row.terms.iter().any(|(v, _)| kinds[*v] == Kind::Y);
            let link_shaped = has_y && row.relation == Relation::Ge && row.rhs == 0;
            if row.terms.len() == 1 && !link_shaped {
                let (v, a) = row.terms[0];
                let allowed: Vec<bool> = [false, true].into_iter().filter(|&b| row.satisfied(if b { a } else { 0 })).collect();
                let domain = match (allowed.as_slice(), fixed[v]) {
                    ([], _) => None,
                    ([b], Some(prev)) if *b != prev => None,
                    ([b], _) => Some(Some(*b)),
                    (_, prev) => Some(prev),
                };
                match domain {
                    Some(d) => fixed[v] = d,
                    None => {
                        infeasible.get_or_insert_with(|| format!("{} row on {} cannot be met", row.tag, vars[v]));
                    }
                }
                continue;
            }
            if row.terms.is_empty() {
                if !row.satisfied(0) {
                    infeasible.get_or_insert_with(|| format!("empty {} row cannot be met", row.tag));
                }
                continue;
            }
            if has_y {
                let only_y = row.terms.iter().all(|(v, _)| kinds[*v] == Kind::Y);
                if only_y && !link_shaped {
                    one_k_rows.push(row);
                } else {
                    link_rows.push(row);
                }
            } else {
                rows.push(row);
            }
        }
        if let Some(message) = infeasible {
            return Err(Error::Audit { tag: "fixed".into(), message });
        }

        // Linking rows: sum_x x - sum_k w_k y_k >= 0.
        let mut y_group: Vec<Option<usize>> = vec![None; n];
        let mut groups = Vec::with_capacity(link_rows.len());
        for row in &link_rows {
            if row.relation != Relation::Ge || row.rhs != 0 {
                return Err(unsupported(format!("{} row with coverage variables must read `... >= 0`", row.tag)));
            }
            let mut cover = Vec::new();
            let mut options = Vec::new();
            for &(v, a) in &row.terms {
                match kinds[v] {
                    Kind::X if a == 1 => cover.push(v),
                    Kind::Y if a < 0 => {
                        if y_group[v].is_some() {
                            return Err(unsupported(format!("{} appears in two linking rows", vars[v])));
                        }
                        y_group[v] = Some(groups.len());
                        let weight = (-a).to_usize().ok_or(Error::CoefficientOverflow)?;
                        options.push(YOption { var: v, weight, coef: obj[v] });
                    }
                    _ => return Err(unsupported(format!("unexpected term {} in {} row", vars[v], row.tag))),
                }
            }
            groups.push(Group { cover, options, best: Vec::new(), best_option: Vec::new() });
        }
        for (v, kind) in kinds.iter().enumerate() {
            if *kind == Kind::Y && y_group[v].is_none() {
                return Err(unsupported(format!("{} is not tied to any vehicle count", vars[v])));
            }
        }
        let mut exclusive = vec![false; groups.len()];
        for row in &one_k_rows {
            let g = y_group[row.terms[0].0].unwrap();
            let ok = row.relation == Relation::Le
                && row.rhs == 1
                && row.terms.iter().all(|&(v, a)| a == 1 && y_group[v] == Some(g))
                && row.terms.len() == groups[g].options.len();
            if !ok {
                return Err(unsupported(format!("{} row must read `sum_k y <= 1` over one point", row.tag)));
            }
            exclusive[g] = true;
        }
        for (g, group) in groups.iter_mut().enumerate() {
            if group.options.len() > 1 && !exclusive[g] {
                return Err(unsupported("several coverage levels without a one-level row"));
            }
            // Options pinned to 0 drop out; pinned to 1 is not supported.
            group.options.retain(|o| fixed[o.var] != Some(false));
            if group.options.iter().any(|o| fixed[o.var] == Some(true)) {
                return Err(unsupported("coverage variables cannot be fixed to 1"));
            }
            let max_w = group.options.iter().map(|o| o.weight).max().unwrap_or(0);
            let mut best = vec![0i128; max_w + 1];
            let mut best_option = vec![None; max_w + 1];
            for cap in 0..=max_w {
                for (k, o) in group.options.iter().enumerate() {
                    let better = match best_option[cap] {
                        None => true,
                        Some(b) => {
                            let cur: &YOption = &group.options[b];
                            o.coef > cur.coef || (o.coef == cur.coef && o.weight < cur.weight)
                        }
                    };
                    if o.weight <= cap && better {
                        best[cap] = o.coef;
                        best_option[cap] = Some(k);
                    }
                }
            }
            group.best = best;
            group.best_option = best_option;
        }

        let mut var_rows = vec![Vec::new(); n];
        for (r, row) in rows.iter().enumerate() {
            for &(v, a) in &row.terms {
                var_rows[v].push((r, a));
            }
        }
        let mut var_groups = vec![Vec::new(); n];
        for (g, group) in groups.iter().enumerate() {
            for &v in &group.cover {
                var_groups[v].push(g);
            }
        }
        let site_of = vars
            .iter()
            .map(|v| match *v {
                VarId::X { site, .. } => index.get(&VarId::Z { site }).copied(),
                _ => None,
            })
            .collect();

        Ok(Compiled { vars, kinds, fixed, scale, rows, var_rows, groups, var_groups, site_of })
    }

    pub fn to_rational(&self, scaled: i128) -> Rational {
        Rational::new(scaled, self.scale)
    }

    /// Completes a `z`/`x` assignment with the best `y` per group and returns
    /// the scaled objective.
    pub fn decode_y(&self, values: &mut [bool]) -> i128 {
        let mut total = 0;
        for group in &self.groups {
            for o in &group.options {
                values[o.var] = false;
            }
            let n = group.cover.iter().filter(|&&v| values[v]).count();
            if let Some(k) = group.choice(n) {
                values[group.options[k].var] = true;
                total += group.options[k].coef;
            }
        }
        total
    }

    /// Checks domains and every `z`/`x` row.
    pub fn violation(&self, values: &[bool]) -> Option<(ConstraintTag, String)> {
        for (v, f) in self.fixed.iter().enumerate() {
            if let Some(b) = f {
                if values[v] != *b {
                    return Some((ConstraintTag::Fixed, format!("{} must be {}", self.vars[v], *b as u8)));
                }
            }
        }
        for row in &self.rows {
            let activity: i128 = row.terms.iter().filter(|(v, _)| values[*v]).map(|(_, a)| a).sum();
            if !row.satisfied(activity) {
                return Some((row.tag, format!("activity {activity} {} {}", row.relation, row.rhs)));
            }
        }
        None
    }

    pub fn assignment(&self, values: &[bool]) -> std::collections::BTreeMap<VarId, bool> {
        self.vars.iter().copied().zip(values.iter().copied()).collect()
    }

    /// Clears vehicles that earn nothing, when no row objects.
    pub fn drop_idle(&self, values: &mut [bool]) {
        let mut ones: Vec<usize> =
            self.groups.iter().map(|g| g.cover.iter().filter(|&&v| values[v]).count()).collect();
        for v in 0..self.vars.len() {
            if self.kinds[v] != Kind::X || !values[v] || self.fixed[v].is_some() {
                continue;
            }
            let loss: i128 = self.var_groups[v]
                .iter()
                .map(|&g| self.groups[g].value(ones[g]) - self.groups[g].value(ones[g] - 1))
                .sum();
            if loss != 0 {
                continue;
            }
            values[v] = false;
            if self.rows_hold(v, values) {
                self.var_groups[v].iter().for_each(|&g| ones[g] -= 1);
            } else {
                values[v] = true;
            }
        }
    }

    fn rows_hold(&self, v: usize, values: &[bool]) -> bool {
        self.var_rows[v].iter().all(|&(r, _)| {
            let row = &self.rows[r];
            row.satisfied(row.terms.iter().filter(|(w, _)| values[*w]).map(|(_, a)| a).sum())
        })
    }

    /// Closes open sites that hold nothing, when no row objects.
    pub fn close_empty_sites(&self, values: &mut [bool]) {
        let mut used = vec![false; self.vars.len()];
        for (v, site) in self.site_of.iter().enumerate() {
            if let Some(z) = site {
                if values[v] {
                    used[*z] = true;
                }
            }
        }
        for z in 0..self.vars.len() {
            if self.kinds[z] != Kind::Z || !values[z] || used[z] || self.fixed[z] == Some(true) {
                continue;
            }
            values[z] = false;
            if !self.rows_hold(z, values) {
                values[z] = true;
            }
        }
    }
}

/// Exact objective of an assignment, straight from the model's rational data.
pub(crate) fn objective_of(model: &ModelSpec, value: impl Fn(&VarId) -> bool) -> Rational {
    model.objective.iter().filter(|(v, _)| value(v)).fold(Rational::zero(), |a, (_, c)| a + c)
}

/// Every constraint of `model` holds for `value`; otherwise the first failing tag.
pub(crate) fn check_rows(model: &ModelSpec, value: impl Fn(&VarId) -> bool) -> Result<()> {
    for c in &model.constraints {
        let lhs = c.lhs(&value);
        if !c.relation.holds(&lhs, &c.rhs) {
            let names: Vec<String> = c.terms.iter().take(6).map(|(v, _)| v.to_string()).collect();
            return Err(Error::Audit {
                tag: c.tag.to_string(),
                message: format!(
                    "row over {}{} has activity {} but needs {} {}",
                    names.join(", "),
                    if c.terms.len() > 6 { ", ..." } else { "" },
                    crate::rational::display(&lhs),
                    c.relation,
                    crate::rational::display(&c.rhs)
                ),
            });
        }
    }
    Ok(())
}

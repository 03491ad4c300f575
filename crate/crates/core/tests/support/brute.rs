//! Exhaustive search over every 0-1 assignment of a small model.

use std::collections::BTreeMap;

use ambloc::formulation::{ModelSpec, Relation, VarId};
use ambloc::rational::Rational;
use num_traits::Zero;

pub fn feasible(model: &ModelSpec, value: &dyn Fn(&VarId) -> bool) -> bool {
    model.constraints.iter().all(|c| {
        let lhs: Rational = c.terms.iter().filter(|(v, _)| value(v)).map(|(_, a)| *a).sum();
        match c.relation {
            Relation::Le => lhs <= c.rhs,
            Relation::Ge => lhs >= c.rhs,
            Relation::Eq => lhs == c.rhs,
        }
    })
}

pub fn objective(model: &ModelSpec, value: &dyn Fn(&VarId) -> bool) -> Rational {
    model.objective.iter().filter(|(v, _)| value(v)).map(|(_, c)| *c).sum()
}

/// Maximum over all assignments of `free` with the rest taken from `base`.
pub fn best_over(model: &ModelSpec, free: &[VarId], base: &BTreeMap<VarId, bool>) -> Option<Rational> {
    assert!(free.len() <= 24, "{} variables is too many to enumerate", free.len());
    let mut best: Option<Rational> = None;
    let mut assignment = base.clone();
    for mask in 0u64..1 << free.len() {
        for (b, v) in free.iter().enumerate() {
            assignment.insert(*v, mask >> b & 1 == 1);
        }
        let value = |v: &VarId| assignment.get(v).copied().unwrap_or(false);
        if feasible(model, &value) {
            let obj = objective(model, &value);
            if best.map_or(true, |b| obj > b) {
                best = Some(obj);
            }
        }
    }
    best
}

/// Optimum of `model` by enumerating every variable.
pub fn optimum(model: &ModelSpec) -> Option<Rational> {
    best_over(model, &model.variables, &BTreeMap::new())
}

/// Keeps the objective zero-safe when nothing is feasible.
pub fn optimum_or_zero(model: &ModelSpec) -> Rational {
    optimum(model).unwrap_or_else(Rational::zero)
}

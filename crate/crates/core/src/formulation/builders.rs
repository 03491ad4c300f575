use std::collections::BTreeSet;

use num_traits::{One, Zero};

use super::{ConstraintTag, LinearConstraint, ModelKind, ModelMeta, ModelSpec, Relation, Sense, VarId};
use crate::coverage::{CoverageSets, ReliabilityTable};
use crate::error::{Error, Result};
use crate::instance::{Instance, Plan};
use crate::rational::{int, Rational};

/// Shared skeleton of all four models over `periods` model periods.
/// `coef(i, u, k, t)` gives the objective weight of the `y` variable; `k` is
/// always 1 for deterministic models.
fn assemble(
    instance: &Instance,
    sets: &CoverageSets,
    name: &str,
    kind: ModelKind,
    periods: usize,
    coef: impl Fn(usize, usize, u32, usize) -> Rational,
) -> ModelSpec {
    let (n_i, n_j, n_u) = (instance.num_points(), instance.num_sites(), instance.num_types());
    let k_max = match kind {
        ModelKind::Deterministic => 1,
        ModelKind::Probabilistic => instance.k_max,
    };
    let y_of = |i: usize, u: usize, k: u32, t: usize| match kind {
        ModelKind::Deterministic => VarId::y_det(i, u, t),
        ModelKind::Probabilistic => VarId::y_prob(i, u, k, t),
    };

    let mut variables: Vec<VarId> = (0..n_j).map(VarId::z).collect();
    for t in 0..periods {
        for u in 0..n_u {
            variables.extend((0..n_j).map(|j| VarId::x(j, u, t)));
        }
    }
    let mut objective = Vec::new();
    for t in 0..periods {
        for u in 0..n_u {
            for i in 0..n_i {
                for k in 1..=k_max {
                    let v = y_of(i, u, k, t);
                    variables.push(v);
                    objective.push((v, coef(i, u, k, t)));
                }
            }
        }
    }

    let one = Rational::one();
    let mut constraints = Vec::new();
    for t in 0..periods {
        for u in 0..n_u {
            for i in 0..n_i {
                let mut terms: Vec<(VarId, Rational)> =
                    sets.covers(i, u).iter().map(|&j| (VarId::x(j, u, t), one)).collect();
                let tag = match kind {
                    ModelKind::Deterministic => ConstraintTag::CoverageLink,
                    ModelKind::Probabilistic => ConstraintTag::ServerCount,
                };
                terms.extend((1..=k_max).map(|k| (y_of(i, u, k, t), -int(k as i64))));
                constraints.push(LinearConstraint { terms, relation: Relation::Ge, rhs: Rational::zero(), tag });
            }
        }
    }
    if kind == ModelKind::Probabilistic {
        for t in 0..periods {
            for u in 0..n_u {
                for i in 0..n_i {
                    constraints.push(LinearConstraint {
                        terms: (1..=k_max).map(|k| (y_of(i, u, k, t), one)).collect(),
                        relation: Relation::Le,
                        rhs: one,
                        tag: ConstraintTag::OneK,
                    });
                }
            }
        }
    }
    for t in 0..periods {
        for (u, ty) in instance.ambulance_types.iter().enumerate() {
            constraints.push(LinearConstraint {
                terms: (0..n_j).map(|j| (VarId::x(j, u, t), one)).collect(),
                relation: Relation::Le,
                rhs: int(ty.fleet_size as i64),
                tag: ConstraintTag::FleetLimit,
            });
        }
    }
    for t in 0..periods {
        for (j, site) in instance.sites.iter().enumerate() {
            let mut terms: Vec<(VarId, Rational)> = (0..n_u).map(|u| (VarId::x(j, u, t), one)).collect();
            terms.push((VarId::z(j), -int(site.capacity as i64)));
            constraints.push(LinearConstraint {
                terms,
                relation: Relation::Le,
                rhs: Rational::zero(),
                tag: ConstraintTag::Capacity,
            });
        }
    }
    for t in 0..periods {
        for u in 0..n_u {
            for j in 0..n_j {
                constraints.push(LinearConstraint {
                    terms: vec![(VarId::x(j, u, t), one), (VarId::z(j), -one)],
                    relation: Relation::Le,
                    rhs: Rational::zero(),
                    tag: ConstraintTag::SiteLink,
                });
            }
        }
    }

    ModelSpec {
        variables,
        objective,
        sense: Sense::Maximize,
        constraints,
        meta: ModelMeta {
            name: name.to_string(),
            kind,
            instance_fingerprint: instance.fingerprint(),
            num_periods: periods,
            epsilon: None,
        },
    }
}

/// Multi-period deterministic model: weight `d_iu^t` on `y_det(i,u,t)`.
pub fn build_fleet_ict(instance: &Instance, sets: &CoverageSets) -> ModelSpec {
    assemble(instance, sets, "fleet-ict", ModelKind::Deterministic, instance.num_periods, |i, u, _, t| {
        *instance.demand(i, u, t)
    })
}

/// Multi-period probabilistic model: weight `d_iu^t * q_iuk^t` on `y_prob(i,u,k,t)`.
pub fn build_lr_mexclp_ict(instance: &Instance, sets: &CoverageSets, table: &ReliabilityTable) -> ModelSpec {
    assemble(instance, sets, "lr-mexclp-ict", ModelKind::Probabilistic, instance.num_periods, |i, u, k, t| {
        instance.demand(i, u, t) * table.q(i, u, k, t)
    })
}

/// Single-period deterministic model over demand summed across periods.
pub fn build_fleet_static(instance: &Instance, sets: &CoverageSets) -> ModelSpec {
    assemble(instance, sets, "fleet-static", ModelKind::Deterministic, 1, |i, u, _, _| {
        (0..instance.num_periods).fold(Rational::zero(), |acc, t| acc + instance.demand(i, u, t))
    })
}

/// Single-period probabilistic model. The weight of `y_prob(i,u,k,0)` is
/// `sum_t d_iu^t q_iuk^t`, the coverage the same `k` servers would earn if kept
/// in place for every period.
pub fn build_lr_mexclp_static(instance: &Instance, sets: &CoverageSets, table: &ReliabilityTable) -> ModelSpec {
    assemble(instance, sets, "lr-mexclp-static", ModelKind::Probabilistic, 1, |i, u, k, _| {
        (0..instance.num_periods).fold(Rational::zero(), |acc, t| acc + instance.demand(i, u, t) * table.q(i, u, k, t))
    })
}

/// Sets (or replaces) the station budget `sum_j z_j <= epsilon`.
pub fn add_epsilon_constraint(mut model: ModelSpec, epsilon: u32) -> ModelSpec {
    model.constraints.retain(|c| c.tag != ConstraintTag::Epsilon);
    let terms = model
        .variables
        .iter()
        .filter(|v| matches!(v, VarId::Z { .. }))
        .map(|v| (*v, Rational::one()))
        .collect();
    model.constraints.push(LinearConstraint {
        terms,
        relation: Relation::Le,
        rhs: int(epsilon as i64),
        tag: ConstraintTag::Epsilon,
    });
    model.meta.epsilon = Some(epsilon);
    model
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixMode {
    ZOnly,
    ZAndX,
}

fn fixed(v: VarId, value: bool) -> LinearConstraint {
    LinearConstraint {
        terms: vec![(v, Rational::one())],
        relation: Relation::Eq,
        rhs: if value { Rational::one() } else { Rational::zero() },
        tag: ConstraintTag::Fixed,
    }
}

/// Pins `z` (and optionally `x`) to the values of `plan` with equality rows.
pub fn fix_variables(mut model: ModelSpec, plan: &Plan, which: FixMode) -> Result<ModelSpec> {
    let declared: BTreeSet<VarId> = model.variables.iter().copied().collect();
    for &j in &plan.opened_sites {
        if !declared.contains(&VarId::z(j)) {
            return Err(Error::PlanMismatch(format!("plan opens site {j}, which the model does not have")));
        }
    }
    if which == FixMode::ZAndX {
        for a in &plan.allocations {
            if !declared.contains(&VarId::x(a.site, a.ambulance_type, a.period)) {
                return Err(Error::PlanMismatch(format!(
                    "plan allocation (site {}, type {}, period {}) has no model variable",
                    a.site, a.ambulance_type, a.period
                )));
            }
            if a.count > 1 {
                return Err(Error::PlanMismatch(format!(
                    "plan allocates {} vehicles of one type to site {} in period {}",
                    a.count, a.site, a.period
                )));
            }
        }
    }
    let opened: BTreeSet<usize> = plan.opened_sites.iter().copied().collect();
    let rows: Vec<LinearConstraint> = model
        .variables
        .iter()
        .filter_map(|v| match *v {
            VarId::Z { site } => Some(fixed(*v, opened.contains(&(site as usize)))),
            VarId::X { site, ty, period } if which == FixMode::ZAndX => {
                Some(fixed(*v, plan.count(site as usize, ty as usize, period as usize) > 0))
            }
            _ => None,
        })
        .collect();
    model.constraints.extend(rows);
    Ok(model)
}

/// Forces the listed sites open.
pub fn require_open_sites(mut model: ModelSpec, sites: &[usize]) -> Result<ModelSpec> {
    for &j in sites {
        let v = VarId::z(j);
        if !model.variables.contains(&v) {
            return Err(Error::PlanMismatch(format!("mandatory site {j} is not in the model")));
        }
        model.constraints.push(fixed(v, true));
    }
    Ok(model)
}

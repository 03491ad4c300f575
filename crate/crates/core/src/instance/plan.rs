use std::collections::BTreeMap;
use std::path::Path;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::{parse_json, read_text, write_text, Instance};
use crate::error::{Error, Result};
use crate::rational::{self, to_f64, Rational};

/// `count` vehicles of one type stationed at a site during a period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Allocation {
    pub site: usize,
    #[serde(rename = "type")]
    pub ambulance_type: usize,
    pub period: usize,
    pub count: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeCoverage {
    pub label: String,
    #[serde(with = "rational::scalar")]
    pub covered: Rational,
    #[serde(with = "rational::scalar")]
    pub demand: Rational,
    /// Covered (or reliability-weighted covered) demand per model period.
    #[serde(with = "rational::vec")]
    pub per_period_covered: Vec<Rational>,
    pub rate_percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub by_type: Vec<TypeCoverage>,
    #[serde(with = "rational::scalar")]
    pub covered: Rational,
    #[serde(with = "rational::scalar")]
    pub demand: Rational,
    pub rate_percent: f64,
}

pub(crate) fn rate_percent(covered: &Rational, demand: &Rational) -> f64 {
    if demand.is_zero() {
        0.0
    } else {
        100.0 * to_f64(&(covered / demand))
    }
}

impl CoverageSummary {
    pub fn new(by_type: Vec<TypeCoverage>) -> Self {
        let covered = by_type.iter().fold(Rational::zero(), |a, t| a + t.covered);
        let demand = by_type.iter().fold(Rational::zero(), |a, t| a + t.demand);
        let rate_percent = rate_percent(&covered, &demand);
        CoverageSummary { by_type, covered, demand, rate_percent }
    }
}

/// Opened stations plus per-period allocations; optionally the objective and
/// coverage figures of the solve that produced it.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Plan {
    pub opened_sites: Vec<usize>,
    pub allocations: Vec<Allocation>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "rational::opt")]
    pub objective: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageSummary>,
}

impl Plan {
    pub fn empty() -> Self {
        Plan::default()
    }

    /// Sorts sites and allocations, merging repeated `(site, type, period)` entries
    /// and dropping zero counts.
    pub fn normalized(mut self) -> Self {
        self.opened_sites.sort_unstable();
        self.opened_sites.dedup();
        let mut merged: BTreeMap<(usize, usize, usize), u32> = BTreeMap::new();
        for a in &self.allocations {
            *merged.entry((a.period, a.ambulance_type, a.site)).or_default() += a.count;
        }
        self.allocations = merged
            .into_iter()
            .filter(|&(_, count)| count > 0)
            .map(|((period, ambulance_type, site), count)| Allocation { site, ambulance_type, period, count })
            .collect();
        self
    }

    pub fn count(&self, site: usize, ty: usize, period: usize) -> u32 {
        self.allocations
            .iter()
            .filter(|a| a.site == site && a.ambulance_type == ty && a.period == period)
            .map(|a| a.count)
            .sum()
    }

    /// Copies the period-0 allocations of a single-period plan into every period.
    pub fn replicate(&self, num_periods: usize) -> Plan {
        let allocations = self
            .allocations
            .iter()
            .filter(|a| a.period == 0)
            .flat_map(|a| (0..num_periods).map(move |t| Allocation { period: t, ..*a }))
            .collect();
        Plan { opened_sites: self.opened_sites.clone(), allocations, objective: None, coverage: None }
            .normalized()
    }

    /// Checks indices, station links, capacities, fleet limits and the
    /// one-vehicle-per-type-per-site rule against `instance`.
    pub fn validate(&self, instance: &Instance) -> Result<()> {
        let n_sites = instance.num_sites();
        if let Some(&j) = self.opened_sites.iter().find(|&&j| j >= n_sites) {
            return Err(Error::PlanMismatch(format!("opened site {j} out of range (|J| = {n_sites})")));
        }
        for a in &self.allocations {
            if a.site >= n_sites || a.ambulance_type >= instance.num_types() || a.period >= instance.num_periods {
                return Err(Error::PlanMismatch(format!(
                    "allocation (site {}, type {}, period {}) out of range",
                    a.site, a.ambulance_type, a.period
                )));
            }
        }
        let plan = self.clone().normalized();
        let opened: Vec<bool> = {
            let mut v = vec![false; n_sites];
            plan.opened_sites.iter().for_each(|&j| v[j] = true);
            v
        };

        let mut per_site: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        let mut per_type: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        for a in &plan.allocations {
            if !opened[a.site] {
                return Err(Error::infeasible_plan(
                    "site-link",
                    format!("vehicles allocated to unopened site {} in period {}", a.site, a.period),
                ));
            }
            *per_site.entry((a.site, a.period)).or_default() += a.count;
            *per_type.entry((a.ambulance_type, a.period)).or_default() += a.count;
        }
        for (&(j, t), &n) in &per_site {
            let cap = instance.sites[j].capacity;
            if n > cap {
                return Err(Error::infeasible_plan(
                    "capacity",
                    format!("site {j} holds {n} vehicles in period {t} but its capacity is {cap}"),
                ));
            }
        }
        for (&(u, t), &n) in &per_type {
            let fleet = instance.ambulance_types[u].fleet_size;
            if n > fleet {
                return Err(Error::infeasible_plan(
                    "fleet-limit",
                    format!(
                        "{n} vehicles of type {} used in period {t} but the fleet has {fleet}",
                        instance.ambulance_types[u].label
                    ),
                ));
            }
        }
        if let Some(a) = plan.allocations.iter().find(|a| a.count > 1) {
            return Err(Error::infeasible_plan(
                "binary",
                format!(
                    "{} vehicles of one type at site {} in period {}; at most one is allowed",
                    a.count, a.site, a.period
                ),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("plan serializes");
        text.push('\n');
        text
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_json())
    }

    /// Reads a plan file without checking it against an instance.
    pub fn load_unchecked(path: impl AsRef<Path>) -> Result<Plan> {
        let path = path.as_ref();
        Ok(parse_json::<Plan>(&read_text(path)?, path)?.normalized())
    }
}

/// Loads a fixed configuration (e.g. the stations and allocations currently in
/// operation) and checks it against the instance.
pub fn baseline_plan_load(path: impl AsRef<Path>, instance: &Instance) -> Result<Plan> {
    let plan = Plan::load_unchecked(path)?;
    plan.validate(instance)?;
    Ok(plan)
}

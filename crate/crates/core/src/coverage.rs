//! Coverage sets, neighbourhoods, busy fractions and reliabilities.
//!
//! A site `j` covers point `i` for type `u` when `travel_time[j][i] <= S_u`
//! (ties count as covered). The neighbourhood of `i` for type `u` holds every
//! point reachable from `i` within `S_u`. Busy fractions divide the
//! neighbourhood's service-time demand by the number of local servers `k`; the
//! reliability `1 - b^k` uses `b` clamped into `[0, 1]`, so an overloaded
//! neighbourhood has reliability zero rather than a negative value.

use std::fmt::Write as _;
use std::path::Path;

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::Result;
use crate::instance::{write_text, Instance};
use crate::rational::{clamp_unit, pow, to_f64, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageSets {
    /// `site_covers[i][u]`: sites within the response standard of point `i`, ascending.
    pub site_covers: Vec<Vec<Vec<usize>>>,
    /// `point_neighborhood[i][u]`: points reachable from `i` within the standard, ascending.
    pub point_neighborhood: Vec<Vec<Vec<usize>>>,
}

impl CoverageSets {
    pub fn covers(&self, point: usize, ty: usize) -> &[usize] {
        &self.site_covers[point][ty]
    }

    pub fn neighborhood(&self, point: usize, ty: usize) -> &[usize] {
        &self.point_neighborhood[point][ty]
    }
}

pub fn build_coverage_sets(instance: &Instance) -> CoverageSets {
    let n_types = instance.num_types();
    let n_sites = instance.num_sites();
    let n_points = instance.num_points();
    let site_covers = (0..n_points)
        .map(|i| {
            (0..n_types)
                .map(|u| {
                    let limit = &instance.ambulance_types[u].response_standard;
                    (0..n_sites).filter(|&j| instance.travel_time[j][i] <= *limit).collect()
                })
                .collect()
        })
        .collect();
    let point_neighborhood = (0..n_points)
        .map(|i| {
            (0..n_types)
                .map(|u| {
                    let limit = &instance.ambulance_types[u].response_standard;
                    (0..n_points).filter(|&j| instance.demand_to_demand_time[i][j] <= *limit).collect()
                })
                .collect()
        })
        .collect();
    CoverageSets { site_covers, point_neighborhood }
}

/// Raw (unclamped) busy fraction of the `k` servers around `point`.
pub fn busy_fraction(
    instance: &Instance,
    sets: &CoverageSets,
    point: usize,
    ty: usize,
    k: u32,
    period: usize,
) -> Rational {
    assert!(k >= 1, "k must be at least 1");
    let load = neighborhood_load(instance, sets, point, ty, period);
    load / Rational::from_integer(k as i128)
}

fn neighborhood_load(instance: &Instance, sets: &CoverageSets, point: usize, ty: usize, period: usize) -> Rational {
    sets.neighborhood(point, ty)
        .iter()
        .fold(Rational::zero(), |acc, &j| acc + instance.demand_points[j].service_time_demand[ty][period])
}

/// `1 - min(max(b, 0), 1)^k`.
pub fn reliability(busy: &Rational, k: u32) -> Rational {
    assert!(k >= 1, "k must be at least 1");
    Rational::one() - pow(&clamp_unit(busy), k)
}

/// Eagerly computed `b[i][u][k][t]` and `q[i][u][k][t]` for `k = 1..=k_max`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReliabilityTable {
    num_types: usize,
    k_max: u32,
    num_periods: usize,
    busy: Vec<Rational>,
    reliability: Vec<Rational>,
}

impl ReliabilityTable {
    fn index(&self, point: usize, ty: usize, k: u32, period: usize) -> usize {
        debug_assert!(k >= 1 && k <= self.k_max);
        ((point * self.num_types + ty) * self.k_max as usize + (k as usize - 1)) * self.num_periods + period
    }

    pub fn k_max(&self) -> u32 {
        self.k_max
    }

    pub fn num_points(&self) -> usize {
        self.busy.len() / (self.num_types * self.k_max as usize * self.num_periods).max(1)
    }

    pub fn num_types(&self) -> usize {
        self.num_types
    }

    pub fn num_periods(&self) -> usize {
        self.num_periods
    }

    pub fn busy(&self, point: usize, ty: usize, k: u32, period: usize) -> &Rational {
        &self.busy[self.index(point, ty, k, period)]
    }

    pub fn q(&self, point: usize, ty: usize, k: u32, period: usize) -> &Rational {
        &self.reliability[self.index(point, ty, k, period)]
    }

    /// CSV with columns `i,u,k,t,b,q` (decimal approximations).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,u,k,t,b,q\n");
        for i in 0..self.num_points() {
            for u in 0..self.num_types {
                for k in 1..=self.k_max {
                    for t in 0..self.num_periods {
                        let _ = writeln!(
                            out,
                            "{i},{u},{k},{t},{:.9},{:.9}",
                            to_f64(self.busy(i, u, k, t)),
                            to_f64(self.q(i, u, k, t))
                        );
                    }
                }
            }
        }
        out
    }

    pub fn dump_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_csv())
    }
}

pub fn build_reliability_table(instance: &Instance, sets: &CoverageSets) -> ReliabilityTable {
    let n_types = instance.num_types();
    let k_max = instance.k_max;
    let n_periods = instance.num_periods;
    let per_point: Vec<(Vec<Rational>, Vec<Rational>)> = (0..instance.num_points())
        .into_par_iter()
        .map(|i| {
            let mut busy = Vec::with_capacity(n_types * k_max as usize * n_periods);
            let mut rel = Vec::with_capacity(busy.capacity());
            for u in 0..n_types {
                let loads: Vec<Rational> = (0..n_periods).map(|t| neighborhood_load(instance, sets, i, u, t)).collect();
                for k in 1..=k_max {
                    for load in &loads {
                        let b = load / Rational::from_integer(k as i128);
                        rel.push(reliability(&b, k));
                        busy.push(b);
                    }
                }
            }
            (busy, rel)
        })
        .collect();
    let (busy, reliability): (Vec<_>, Vec<_>) = per_point.into_iter().unzip();
    ReliabilityTable {
        num_types: n_types,
        k_max,
        num_periods: n_periods,
        busy: busy.into_iter().flatten().collect(),
        reliability: reliability.into_iter().flatten().collect(),
    }
}

/// An instance together with its coverage sets and reliability table.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub instance: Instance,
    pub sets: CoverageSets,
    pub table: ReliabilityTable,
}

impl Prepared {
    pub fn new(instance: Instance) -> Self {
        let sets = build_coverage_sets(&instance);
        let table = build_reliability_table(&instance, &sets);
        Prepared { instance, sets, table }
    }
}

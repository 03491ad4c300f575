//! Test-only helpers: random small instances, an exhaustive optimum, a
//! brute-force model enumerator and a minimal MPS reader. None of these share
//! code with the solver.
#![allow(dead_code)]

pub mod brute;
pub mod mps_reader;
pub mod oracle;

use ambloc::instance::{AmbulanceType, DemandPoint, Instance, Plan, Allocation, Site};
use ambloc::rational::Rational;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random instance inside the oracle family: |I| <= 12, |J| <= 8, |U| <= 2,
/// |T| <= 3, P_u <= 3, k_max <= 3.
pub fn random_instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let n_types = r.gen_range(1..=2usize);
    let n_points = r.gen_range(1..=12usize);
    let n_sites = r.gen_range(1..=8usize);
    let n_periods = r.gen_range(1..=3usize);
    let labels = ["ALS", "BLS"];
    let ambulance_types: Vec<AmbulanceType> = (0..n_types)
        .map(|u| AmbulanceType {
            id: u,
            label: labels[u].into(),
            fleet_size: r.gen_range(1..=3),
            response_standard: Rational::from_integer(r.gen_range(5..=10)),
        })
        .collect();
    let fleet: u32 = ambulance_types.iter().map(|t| t.fleet_size).sum();
    let k_max = r.gen_range(1..=fleet.min(3));
    let demand_points = (0..n_points)
        .map(|i| DemandPoint {
            id: i,
            demand: (0..n_types)
                .map(|_| {
                    (0..n_periods)
                        .map(|_| {
                            if r.gen_bool(0.2) {
                                Rational::from_integer(0)
                            } else {
                                Rational::new(r.gen_range(1..=20), r.gen_range(1..=4))
                            }
                        })
                        .collect()
                })
                .collect(),
            service_time_demand: (0..n_types)
                .map(|_| (0..n_periods).map(|_| Rational::new(r.gen_range(0..=6), 8)).collect())
                .collect(),
            cluster: None,
        })
        .collect();
    let sites = (0..n_sites).map(|j| Site { id: j, capacity: r.gen_range(1..=2) }).collect();
    let travel_time = (0..n_sites)
        .map(|_| (0..n_points).map(|_| Rational::from_integer(r.gen_range(0..=16))).collect())
        .collect();
    let mut d2d = vec![vec![Rational::from_integer(0); n_points]; n_points];
    for i in 0..n_points {
        for k in i + 1..n_points {
            let t = Rational::from_integer(r.gen_range(1..=14));
            d2d[i][k] = t;
            d2d[k][i] = t;
        }
    }
    let inst = Instance {
        ambulance_types,
        demand_points,
        sites,
        num_periods: n_periods,
        k_max,
        travel_time,
        demand_to_demand_time: d2d,
    };
    inst.validate().expect("random instance is valid");
    inst
}

/// Random feasible plan (fleet and capacity respected) with at least the
/// sites in `must_open`.
pub fn random_baseline(instance: &Instance, must_open: &[usize], seed: u64) -> Plan {
    let mut r = rng(seed ^ 0x5eed);
    let mut opened: Vec<usize> = (0..instance.num_sites()).filter(|_| r.gen_bool(0.4)).collect();
    opened.extend_from_slice(must_open);
    opened.sort_unstable();
    opened.dedup();
    let mut allocations = Vec::new();
    for t in 0..instance.num_periods {
        let mut load = vec![0u32; instance.num_sites()];
        for (u, ty) in instance.ambulance_types.iter().enumerate() {
            let mut placed = 0;
            for &j in &opened {
                if placed < ty.fleet_size && load[j] < instance.sites[j].capacity && r.gen_bool(0.6) {
                    load[j] += 1;
                    placed += 1;
                    allocations.push(Allocation { site: j, ambulance_type: u, period: t, count: 1 });
                }
            }
        }
    }
    // every period repeats period 0 half of the time, as real baselines do
    if r.gen_bool(0.5) {
        let first: Vec<Allocation> = allocations.iter().filter(|a| a.period == 0).copied().collect();
        allocations = (0..instance.num_periods)
            .flat_map(|t| first.iter().map(move |a| Allocation { period: t, ..*a }))
            .collect();
    }
    Plan { opened_sites: opened, allocations, ..Plan::default() }.normalized()
}

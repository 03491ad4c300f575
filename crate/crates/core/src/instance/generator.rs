//! Synthetic instance generator.
//!
//! Points and sites are scattered in a square region; travel times are straight
//! line distances divided by a constant speed, rounded to a tenth of a minute.
//! Only basic IEEE arithmetic is used so the same configuration produces the same
//! bytes on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AmbulanceType, DemandPoint, Instance, Site};
use crate::error::{Error, Result};
use crate::rational::{int, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemandProfile {
    /// Every period carries the same demand.
    Uniform,
    /// Demand cluster 0 peaks in the first half of the horizon, cluster 1 in
    /// the second half.
    TwoPeakDiurnal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialModel {
    UniformSquare,
    /// Points and sites gather around cluster centres spread along the diagonal.
    Clustered,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeConfig {
    pub label: String,
    pub fleet_size: u32,
    /// Minutes.
    pub response_standard: u32,
    /// Share of the call volume belonging to this type.
    pub demand_share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub num_demand_points: usize,
    pub num_sites: usize,
    pub num_periods: usize,
    pub seed: u64,
    pub demand_profile: DemandProfile,
    pub spatial_model: SpatialModel,
    pub ambulance_types: Vec<TypeConfig>,
    pub site_capacity: u32,
    pub k_max: u32,
    /// Side of the square region in km.
    pub region_km: f64,
    pub speed_km_per_min: f64,
    /// Mean calls per demand point per period (all types) at unit profile weight.
    pub demand_scale: f64,
    pub mean_service_minutes: u32,
    /// Length of the observation window one period stands for.
    pub period_length_minutes: u32,
    pub num_clusters: usize,
    pub cluster_radius_km: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            num_demand_points: 30,
            num_sites: 20,
            num_periods: 24,
            seed: 0,
            demand_profile: DemandProfile::TwoPeakDiurnal,
            spatial_model: SpatialModel::UniformSquare,
            ambulance_types: vec![
                TypeConfig { label: "ALS".into(), fleet_size: 2, response_standard: 10, demand_share: 0.35 },
                TypeConfig { label: "BLS".into(), fleet_size: 4, response_standard: 8, demand_share: 0.65 },
            ],
            site_capacity: 2,
            k_max: 3,
            region_km: 12.0,
            speed_km_per_min: 0.5,
            demand_scale: 3.0,
            mean_service_minutes: 45,
            period_length_minutes: 480,
            num_clusters: 2,
            cluster_radius_km: 1.5,
        }
    }
}

impl GeneratorConfig {
    /// Dimensions of the full-size city case: 427 districts, 1527 candidate
    /// sites, 24 hourly periods, 7 ALS and 21 BLS vehicles, two vehicles per
    /// base, `k_max = 3`, 10/8 minute standards. Demand counts are yearly totals
    /// per hourly slot, about 26 000 calls overall.
    pub fn city_scale(seed: u64) -> Self {
        GeneratorConfig {
            num_demand_points: 427,
            num_sites: 1527,
            num_periods: 24,
            seed,
            ambulance_types: vec![
                TypeConfig { label: "ALS".into(), fleet_size: 7, response_standard: 10, demand_share: 0.35 },
                TypeConfig { label: "BLS".into(), fleet_size: 21, response_standard: 8, demand_share: 0.65 },
            ],
            region_km: 18.0,
            speed_km_per_min: 0.3,
            demand_scale: 2.5,
            period_length_minutes: 365 * 60,
            ..GeneratorConfig::default()
        }
    }

    /// Reads a JSON configuration; absent fields take their defaults.
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let config: GeneratorConfig = super::parse_json(&super::read_text(path)?, path)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.num_demand_points == 0 || self.num_sites == 0 || self.num_periods == 0 {
            return bad("num_demand_points, num_sites and num_periods must be positive");
        }
        if self.ambulance_types.is_empty() {
            return bad("at least one ambulance type is required");
        }
        if self.ambulance_types.iter().any(|t| t.fleet_size == 0 || t.response_standard == 0) {
            return bad("fleet sizes and response standards must be positive");
        }
        if self.ambulance_types.iter().any(|t| !(t.demand_share >= 0.0 && t.demand_share.is_finite())) {
            return bad("demand shares must be finite and nonnegative");
        }
        if self.site_capacity == 0 || self.k_max == 0 {
            return bad("site_capacity and k_max must be positive");
        }
        let fleet: u32 = self.ambulance_types.iter().map(|t| t.fleet_size).sum();
        if self.k_max > fleet {
            return bad("k_max exceeds the total fleet");
        }
        let positive = [self.region_km, self.speed_km_per_min, self.cluster_radius_km];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("region_km, speed_km_per_min and cluster_radius_km must be positive");
        }
        if !(self.demand_scale >= 0.0 && self.demand_scale.is_finite()) {
            return bad("demand_scale must be finite and nonnegative");
        }
        if self.period_length_minutes == 0 || self.num_clusters == 0 {
            return bad("period_length_minutes and num_clusters must be positive");
        }
        Ok(())
    }

    /// Profile weight of demand cluster `group` in `period`.
    fn weight(&self, group: usize, period: usize) -> f64 {
        match self.demand_profile {
            DemandProfile::Uniform => 1.0,
            DemandProfile::TwoPeakDiurnal => {
                let t_len = self.num_periods as f64;
                if self.num_periods == 1 {
                    return 1.0;
                }
                // Window of group 0 is the first half, group 1 the second half.
                let half = t_len / 2.0;
                let center = if group % 2 == 0 { half / 2.0 } else { half + half / 2.0 };
                let t = period as f64 + 0.5;
                let bump = 1.0 - (t - center).abs() / half;
                let in_window = if group % 2 == 0 { t < half } else { t >= half };
                if in_window {
                    0.6 + 1.4 * bump.max(0.0)
                } else {
                    0.15
                }
            }
        }
    }
}

fn travel(a: (f64, f64), b: (f64, f64), speed: f64) -> Rational {
    let (dx, dy) = (a.0 - b.0, a.1 - b.1);
    let minutes = (dx * dx + dy * dy).sqrt() / speed;
    Rational::new((minutes * 10.0).round() as i128, 10)
}

fn in_disc(rng: &mut ChaCha8Rng, center: (f64, f64), radius: f64) -> (f64, f64) {
    loop {
        let dx = rng.gen_range(-1.0..1.0);
        let dy = rng.gen_range(-1.0..1.0);
        if dx * dx + dy * dy <= 1.0 {
            return (center.0 + dx * radius, center.1 + dy * radius);
        }
    }
}

/// Builds a reproducible synthetic instance.
pub fn generate_instance(config: &GeneratorConfig) -> Result<Instance> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let side = config.region_km;
    let n_clusters = config.num_clusters;
    let centers: Vec<(f64, f64)> = (0..n_clusters)
        .map(|k| {
            let c = side * (k as f64 + 0.5) / n_clusters as f64;
            (c, c)
        })
        .collect();

    let mut points = Vec::with_capacity(config.num_demand_points);
    let mut groups = Vec::with_capacity(config.num_demand_points);
    for i in 0..config.num_demand_points {
        match config.spatial_model {
            SpatialModel::UniformSquare => {
                let p = (rng.gen_range(0.0..side), rng.gen_range(0.0..side));
                groups.push(if p.0 < side / 2.0 { 0 } else { 1 });
                points.push(p);
            }
            SpatialModel::Clustered => {
                let k = i % n_clusters;
                groups.push(k);
                points.push(in_disc(&mut rng, centers[k], config.cluster_radius_km));
            }
        }
    }
    let sites: Vec<(f64, f64)> = (0..config.num_sites)
        .map(|j| match config.spatial_model {
            SpatialModel::UniformSquare => (rng.gen_range(0.0..side), rng.gen_range(0.0..side)),
            SpatialModel::Clustered => in_disc(&mut rng, centers[j % n_clusters], 2.0 * config.cluster_radius_km),
        })
        .collect();

    let n_types = config.ambulance_types.len();
    let t_len = config.num_periods;
    let service = Rational::new(config.mean_service_minutes as i128, config.period_length_minutes as i128);
    let mut demand_points = Vec::with_capacity(points.len());
    for (i, &group) in groups.iter().enumerate() {
        let base = config.demand_scale * rng.gen_range(0.5..1.5);
        let mut demand = vec![vec![Rational::from_integer(0); t_len]; n_types];
        for (u, ty) in config.ambulance_types.iter().enumerate() {
            let mean_u = base * ty.demand_share;
            match config.demand_profile {
                DemandProfile::Uniform => {
                    let count = (mean_u + rng.gen_range(0.0..1.0)).floor() as i64;
                    demand[u].iter_mut().for_each(|d| *d = int(count));
                }
                DemandProfile::TwoPeakDiurnal => {
                    for (t, d) in demand[u].iter_mut().enumerate() {
                        let mean = mean_u * config.weight(group, t);
                        *d = int((mean + rng.gen_range(0.0..1.0)).floor() as i64);
                    }
                }
            }
        }
        let service_time_demand =
            demand.iter().map(|row| row.iter().map(|d| d * service).collect()).collect();
        demand_points.push(DemandPoint { id: i, demand, service_time_demand, cluster: Some(group) });
    }

    let speed = config.speed_km_per_min;
    let travel_time = sites.iter().map(|&s| points.iter().map(|&p| travel(s, p, speed)).collect()).collect();
    let demand_to_demand_time = points
        .iter()
        .enumerate()
        .map(|(a, &pa)| {
            points
                .iter()
                .enumerate()
                .map(|(b, &pb)| if a == b { int(0) } else { travel(pa, pb, speed) })
                .collect()
        })
        .collect();

    let instance = Instance {
        ambulance_types: config
            .ambulance_types
            .iter()
            .enumerate()
            .map(|(id, t)| AmbulanceType {
                id,
                label: t.label.clone(),
                fleet_size: t.fleet_size,
                response_standard: int(t.response_standard as i64),
            })
            .collect(),
        demand_points,
        sites: (0..config.num_sites).map(|id| Site { id, capacity: config.site_capacity }).collect(),
        num_periods: t_len,
        k_max: config.k_max,
        travel_time,
        demand_to_demand_time,
    };
    instance.validate()?;
    Ok(instance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn small(seed: u64) -> GeneratorConfig {
        GeneratorConfig { num_demand_points: 10, num_sites: 6, num_periods: 3, seed, ..Default::default() }
    }

    #[test]
    fn deterministic_in_seed() {
        let a = generate_instance(&small(7)).unwrap();
        let b = generate_instance(&small(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
        assert_ne!(a, generate_instance(&small(8)).unwrap());
    }

    #[test]
    fn two_peak_clusters_peak_in_different_periods() {
        for spatial in [SpatialModel::UniformSquare, SpatialModel::Clustered] {
            let config = GeneratorConfig {
                num_periods: 24,
                demand_profile: DemandProfile::TwoPeakDiurnal,
                spatial_model: spatial,
                ..Default::default()
            };
            let inst = generate_instance(&config).unwrap();
            let peak = |group: usize| {
                let totals: Vec<Rational> = (0..24)
                    .map(|t| {
                        inst.demand_points
                            .iter()
                            .filter(|p| p.cluster == Some(group))
                            .flat_map(|p| p.demand.iter().map(move |row| row[t]))
                            .fold(Rational::zero(), |a, d| a + d)
                    })
                    .collect();
                let max = totals.iter().max().unwrap();
                totals.iter().position(|v| v == max).unwrap()
            };
            let (p0, p1) = (peak(0), peak(1));
            assert!(p0 < 12 && p1 >= 12, "{spatial:?}: peaks at {p0} and {p1}");
        }
    }

    #[test]
    fn uniform_profile_has_equal_period_totals() {
        let config = GeneratorConfig { demand_profile: DemandProfile::Uniform, ..Default::default() };
        let inst = generate_instance(&config).unwrap();
        let total = |t: usize| {
            inst.demand_points
                .iter()
                .flat_map(|p| p.demand.iter().map(move |row| row[t]))
                .fold(Rational::zero(), |a, d| a + d)
        };
        assert!((1..inst.num_periods).all(|t| total(t) == total(0)));
    }

    #[test]
    fn service_time_follows_conversion() {
        let config = small(3);
        let inst = generate_instance(&config).unwrap();
        let factor = Rational::new(45, 480);
        for p in &inst.demand_points {
            for (d_row, s_row) in p.demand.iter().zip(&p.service_time_demand) {
                for (d, s) in d_row.iter().zip(s_row) {
                    assert_eq!(*s, d * factor);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_config() {
        let config = GeneratorConfig { num_sites: 0, ..Default::default() };
        assert!(matches!(generate_instance(&config), Err(Error::Config(_))));
        let config = GeneratorConfig { k_max: 99, ..Default::default() };
        assert!(generate_instance(&config).is_err());
    }

    #[test]
    fn clustered_sites_cover_one_cluster_only() {
        let config = GeneratorConfig {
            spatial_model: SpatialModel::Clustered,
            region_km: 20.0,
            ..Default::default()
        };
        let inst = generate_instance(&config).unwrap();
        let limit = int(10);
        for row in &inst.travel_time {
            let reach: std::collections::BTreeSet<_> = row
                .iter()
                .enumerate()
                .filter(|(_, t)| **t <= limit)
                .map(|(i, _)| inst.demand_points[i].cluster)
                .collect();
            assert!(reach.len() <= 1, "site reaches clusters {reach:?}");
        }
    }
}

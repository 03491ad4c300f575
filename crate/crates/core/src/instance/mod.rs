//! Problem instances: demand points, candidate sites, ambulance types and the
//! travel-time matrices that define coverage.
//!
//! An instance is a single JSON document. Every list carries explicit `id`
//! fields and ids must equal list positions, so matrices can be indexed by id:
//!
//! * `travel_time[j][i]` is the site-to-point time in minutes,
//! * `demand_to_demand_time[i][i2]` is the point-to-point time (from `i` to `i2`),
//! * `demand_points[i].demand[u][t]` and `service_time_demand[u][t]` are indexed
//!   by ambulance type then period.

mod generator;
pub(crate) mod plan;

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

pub use generator::{generate_instance, DemandProfile, GeneratorConfig, SpatialModel, TypeConfig};
pub use plan::{baseline_plan_load, Allocation, CoverageSummary, Plan, TypeCoverage};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmbulanceType {
    pub id: usize,
    pub label: String,
    pub fleet_size: u32,
    /// Response-time standard in minutes.
    #[serde(with = "rational::scalar")]
    pub response_standard: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandPoint {
    pub id: usize,
    /// Call counts, `[type][period]`.
    #[serde(with = "rational::grid")]
    pub demand: Vec<Vec<Rational>>,
    /// Demand measured in service time, as a fraction of a period, `[type][period]`.
    #[serde(with = "rational::grid")]
    pub service_time_demand: Vec<Vec<Rational>>,
    /// Demand cluster assigned by the generator, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub id: usize,
    pub capacity: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub ambulance_types: Vec<AmbulanceType>,
    pub demand_points: Vec<DemandPoint>,
    pub sites: Vec<Site>,
    pub num_periods: usize,
    pub k_max: u32,
    #[serde(with = "rational::grid")]
    pub travel_time: Vec<Vec<Rational>>,
    #[serde(with = "rational::grid")]
    pub demand_to_demand_time: Vec<Vec<Rational>>,
}

impl Instance {
    pub fn num_points(&self) -> usize {
        self.demand_points.len()
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn num_types(&self) -> usize {
        self.ambulance_types.len()
    }

    pub fn demand(&self, point: usize, ty: usize, period: usize) -> &Rational {
        &self.demand_points[point].demand[ty][period]
    }

    pub fn total_fleet(&self) -> u32 {
        self.ambulance_types.iter().map(|t| t.fleet_size).sum()
    }

    /// Total demand of one ambulance type over all points and periods.
    pub fn type_demand(&self, ty: usize) -> Rational {
        self.demand_points
            .iter()
            .flat_map(|p| p.demand[ty].iter())
            .fold(Rational::zero(), |acc, d| acc + d)
    }

    pub fn total_demand(&self) -> Rational {
        (0..self.num_types()).fold(Rational::zero(), |acc, u| acc + self.type_demand(u))
    }

    /// Checks every structural invariant; the error names the offending field.
    pub fn validate(&self) -> Result<()> {
        let n_types = self.num_types();
        let n_points = self.num_points();
        let n_sites = self.num_sites();
        let n_periods = self.num_periods;

        if n_types == 0 {
            return Err(Error::validation("ambulance_types", "at least one ambulance type is required"));
        }
        if n_points == 0 {
            return Err(Error::validation("demand_points", "at least one demand point is required"));
        }
        if n_sites == 0 {
            return Err(Error::validation("sites", "at least one site is required"));
        }
        if n_periods == 0 {
            return Err(Error::validation("num_periods", "must be at least 1"));
        }

        let mut labels = HashSet::new();
        for (pos, ty) in self.ambulance_types.iter().enumerate() {
            if ty.id != pos {
                return Err(Error::validation(
                    format!("ambulance_types[{pos}].id"),
                    format!("id {} does not match position {pos}", ty.id),
                ));
            }
            if ty.fleet_size == 0 {
                return Err(Error::validation(
                    format!("ambulance_types[{pos}].fleet_size"),
                    "fleet size must be at least 1",
                ));
            }
            if !ty.response_standard.is_positive() {
                return Err(Error::validation(
                    format!("ambulance_types[{pos}].response_standard"),
                    "response standard must be positive",
                ));
            }
            if !labels.insert(ty.label.as_str()) {
                return Err(Error::validation(
                    format!("ambulance_types[{pos}].label"),
                    format!("duplicate label `{}`", ty.label),
                ));
            }
        }

        for (pos, point) in self.demand_points.iter().enumerate() {
            if point.id != pos {
                return Err(Error::validation(
                    format!("demand_points[{pos}].id"),
                    format!("id {} does not match position {pos}", point.id),
                ));
            }
            for (name, tensor) in
                [("demand", &point.demand), ("service_time_demand", &point.service_time_demand)]
            {
                let field = format!("demand_points[{pos}].{name}");
                if tensor.len() != n_types || tensor.iter().any(|row| row.len() != n_periods) {
                    return Err(Error::validation(
                        field,
                        format!("expected {n_types} x {n_periods} values (types x periods)"),
                    ));
                }
                if tensor.iter().flatten().any(|v| v.is_negative()) {
                    return Err(Error::validation(field, "values must be nonnegative"));
                }
            }
        }

        for (pos, site) in self.sites.iter().enumerate() {
            if site.id != pos {
                return Err(Error::validation(
                    format!("sites[{pos}].id"),
                    format!("id {} does not match position {pos}", site.id),
                ));
            }
            if site.capacity == 0 {
                return Err(Error::validation(format!("sites[{pos}].capacity"), "capacity must be at least 1"));
            }
        }

        if self.k_max == 0 {
            return Err(Error::validation("k_max", "must be at least 1"));
        }
        if self.k_max > self.total_fleet() {
            return Err(Error::validation(
                "k_max",
                format!("{} exceeds the total fleet of {}", self.k_max, self.total_fleet()),
            ));
        }

        check_matrix("travel_time", &self.travel_time, n_sites, n_points)?;
        check_matrix("demand_to_demand_time", &self.demand_to_demand_time, n_points, n_points)?;
        for (i, row) in self.demand_to_demand_time.iter().enumerate() {
            if !row[i].is_zero() {
                return Err(Error::validation(
                    format!("demand_to_demand_time[{i}][{i}]"),
                    "diagonal entries must be zero",
                ));
            }
        }
        Ok(())
    }

    /// Short content hash of the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("instance serializes");
        let digest = Sha256::digest(&bytes);
        hex::encode(&digest[..8])
    }

    /// Canonical JSON text as written by [`save_instance`].
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string(self).expect("instance serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Instance> {
        let instance: Instance = parse_json(text, path)?;
        instance.validate()?;
        Ok(instance)
    }
}

fn check_matrix(name: &str, m: &[Vec<Rational>], rows: usize, cols: usize) -> Result<()> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(Error::validation(name, format!("expected a {rows} x {cols} matrix")));
    }
    for (r, row) in m.iter().enumerate() {
        if let Some(c) = row.iter().position(|v| v.is_negative()) {
            return Err(Error::validation(format!("{name}[{r}][{c}]"), "travel times must be nonnegative"));
        }
    }
    Ok(())
}

pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|err| {
        let field = err.path().to_string();
        let inner = err.into_inner();
        Error::Parse {
            path: path.to_path_buf(),
            line: inner.line(),
            column: inner.column(),
            field,
            message: inner.to_string(),
        }
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads and validates an instance file.
pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    Instance::from_json(&read_text(path)?, path)
}

pub fn save_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &instance.to_json())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rational::int;

    /// One point, one site, one type, one period.
    pub(crate) fn tiny() -> Instance {
        Instance {
            ambulance_types: vec![AmbulanceType {
                id: 0,
                label: "BLS".into(),
                fleet_size: 1,
                response_standard: int(8),
            }],
            demand_points: vec![DemandPoint {
                id: 0,
                demand: vec![vec![int(5)]],
                service_time_demand: vec![vec![Rational::new(1, 2)]],
                cluster: None,
            }],
            sites: vec![Site { id: 0, capacity: 2 }],
            num_periods: 1,
            k_max: 1,
            travel_time: vec![vec![int(4)]],
            demand_to_demand_time: vec![vec![int(0)]],
        }
    }

    fn expect_field(instance: &Instance, field: &str) {
        match instance.validate() {
            Err(Error::Validation { field: f, .. }) => assert!(f.starts_with(field), "{f} vs {field}"),
            other => panic!("expected validation error on {field}, got {other:?}"),
        }
    }

    #[test]
    fn smallest_instance_is_valid() {
        let inst = tiny();
        inst.validate().unwrap();
        assert_eq!((inst.num_points(), inst.num_sites(), inst.num_types(), inst.num_periods), (1, 1, 1, 1));
    }

    #[test]
    fn every_invariant_is_named() {
        let mut i = tiny();
        i.travel_time[0][0] = int(-1);
        expect_field(&i, "travel_time");

        let mut i = tiny();
        i.ambulance_types[0].fleet_size = 0;
        expect_field(&i, "ambulance_types[0].fleet_size");

        let mut i = tiny();
        i.ambulance_types[0].response_standard = int(0);
        expect_field(&i, "ambulance_types[0].response_standard");

        let mut i = tiny();
        i.ambulance_types.push(AmbulanceType { id: 1, ..i.ambulance_types[0].clone() });
        i.demand_points[0].demand.push(vec![int(0)]);
        i.demand_points[0].service_time_demand.push(vec![int(0)]);
        expect_field(&i, "ambulance_types[1].label");

        let mut i = tiny();
        i.demand_points[0].demand[0][0] = int(-2);
        expect_field(&i, "demand_points[0].demand");

        let mut i = tiny();
        i.demand_points[0].service_time_demand[0][0] = int(-2);
        expect_field(&i, "demand_points[0].service_time_demand");

        let mut i = tiny();
        i.demand_points[0].demand[0].push(int(1));
        expect_field(&i, "demand_points[0].demand");

        let mut i = tiny();
        i.sites[0].capacity = 0;
        expect_field(&i, "sites[0].capacity");

        let mut i = tiny();
        i.num_periods = 0;
        expect_field(&i, "num_periods");

        let mut i = tiny();
        i.k_max = 2;
        expect_field(&i, "k_max");

        let mut i = tiny();
        i.k_max = 0;
        expect_field(&i, "k_max");

        let mut i = tiny();
        i.demand_to_demand_time[0][0] = int(1);
        expect_field(&i, "demand_to_demand_time[0][0]");

        let mut i = tiny();
        i.travel_time.push(vec![int(1)]);
        expect_field(&i, "travel_time");

        let mut i = tiny();
        i.sites[0].id = 3;
        expect_field(&i, "sites[0].id");
    }

    #[test]
    fn load_reports_parse_context() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        let mut text = tiny().to_json();
        text = text.replace("\"k_max\":1", "\"k_max\":\"x\"");
        fs::write(&path, text).unwrap();
        match load_instance(&path) {
            Err(Error::Parse { field, line, .. }) => {
                assert_eq!(field, "k_max");
                assert_eq!(line, 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_travel_time_in_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("neg.json");
        let mut inst = tiny();
        inst.travel_time[0][0] = int(-3);
        fs::write(&path, inst.to_json()).unwrap();
        match load_instance(&path) {
            Err(Error::Validation { field, .. }) => assert!(field.starts_with("travel_time")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn save_to_unwritable_path_fails() {
        let err = save_instance(&tiny(), "/nonexistent-dir/x/instance.json").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.json");
        let inst = tiny();
        save_instance(&inst, &path).unwrap();
        assert_eq!(load_instance(&path).unwrap(), inst);
    }
}

//! Abstract 0-1 linear models.
//!
//! A [`ModelSpec`] is plain data: binary variables named by [`VarId`], tagged
//! linear constraints and a maximisation objective. Builders for the four
//! location models live in [`builders`]; the [`Formulation`] trait puts each
//! behind a name so callers can pick one at runtime.
//!
//! The two `y` families differ in meaning. `y_det(i,u,t)` says point `i` is
//! covered for type `u` in period `t` by at least one vehicle. `y_prob(i,u,k,t)`
//! says it is covered by `k` vehicles, and its objective weight is the demand
//! times the reliability of `k` local servers.

mod builders;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_traits::Zero;

use crate::coverage::Prepared;
use crate::error::{Error, Result};
use crate::rational::Rational;

pub use builders::{
    add_epsilon_constraint, build_fleet_ict, build_fleet_static, build_lr_mexclp_ict, build_lr_mexclp_static,
    fix_variables, require_open_sites, FixMode,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarId {
    Z { site: u32 },
    X { site: u32, ty: u16, period: u16 },
    YDet { point: u32, ty: u16, period: u16 },
    YProb { point: u32, ty: u16, k: u16, period: u16 },
}

impl VarId {
    pub fn z(site: usize) -> Self {
        VarId::Z { site: site as u32 }
    }

    pub fn x(site: usize, ty: usize, period: usize) -> Self {
        VarId::X { site: site as u32, ty: ty as u16, period: period as u16 }
    }

    pub fn y_det(point: usize, ty: usize, period: usize) -> Self {
        VarId::YDet { point: point as u32, ty: ty as u16, period: period as u16 }
    }

    pub fn y_prob(point: usize, ty: usize, k: u32, period: usize) -> Self {
        VarId::YProb { point: point as u32, ty: ty as u16, k: k as u16, period: period as u16 }
    }

    pub fn is_y(&self) -> bool {
        matches!(self, VarId::YDet { .. } | VarId::YProb { .. })
    }
}

/// Names used in MPS files: `z_5`, `x_3_0_12`, `y_41_1_7`, `y_41_1_2_7`.
impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match *self {
            VarId::Z { site } => write!(f, "z_{site}"),
            VarId::X { site, ty, period } => write!(f, "x_{site}_{ty}_{period}"),
            VarId::YDet { point, ty, period } => write!(f, "y_{point}_{ty}_{period}"),
            VarId::YProb { point, ty, k, period } => write!(f, "y_{point}_{ty}_{k}_{period}"),
        }
    }
}

impl FromStr for VarId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut parts = s.split('_');
        let family = parts.next().unwrap_or_default();
        let nums: Vec<u32> = parts
            .map(|p| p.parse::<u32>().map_err(|_| format!("bad index in variable name `{s}`")))
            .collect::<std::result::Result<_, _>>()?;
        let small = |v: u32| u16::try_from(v).map_err(|_| format!("index out of range in `{s}`"));
        match (family, nums.as_slice()) {
            ("z", [site]) => Ok(VarId::Z { site: *site }),
            ("x", [site, ty, period]) => Ok(VarId::X { site: *site, ty: small(*ty)?, period: small(*period)? }),
            ("y", [point, ty, period]) => Ok(VarId::YDet { point: *point, ty: small(*ty)?, period: small(*period)? }),
            ("y", [point, ty, k, period]) => Ok(VarId::YProb {
                point: *point,
                ty: small(*ty)?,
                k: small(*k)?,
                period: small(*period)?,
            }),
            _ => Err(format!("unrecognised variable name `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    pub fn holds(&self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Ge => lhs >= rhs,
            Relation::Eq => lhs == rhs,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

/// Constraint family of a row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintTag {
    /// `sum_{j in N_i^u} x_ju^t >= y_iu^t`
    CoverageLink,
    /// `sum_{j in N_i^u} x_ju^t - sum_k k y_iuk^t >= 0`
    ServerCount,
    /// `sum_k y_iuk^t <= 1`
    OneK,
    /// `sum_j x_ju^t <= P_u`
    FleetLimit,
    /// `sum_u x_ju^t <= C_j z_j`
    Capacity,
    /// `x_ju^t <= z_j`
    SiteLink,
    /// `sum_j z_j <= epsilon`
    Epsilon,
    /// `var = value`
    Fixed,
}

impl ConstraintTag {
    pub const ALL: [ConstraintTag; 8] = [
        ConstraintTag::CoverageLink,
        ConstraintTag::ServerCount,
        ConstraintTag::OneK,
        ConstraintTag::FleetLimit,
        ConstraintTag::Capacity,
        ConstraintTag::SiteLink,
        ConstraintTag::Epsilon,
        ConstraintTag::Fixed,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ConstraintTag::CoverageLink => "coverage-link",
            ConstraintTag::ServerCount => "server-count",
            ConstraintTag::OneK => "one-k",
            ConstraintTag::FleetLimit => "fleet-limit",
            ConstraintTag::Capacity => "capacity",
            ConstraintTag::SiteLink => "site-link",
            ConstraintTag::Epsilon => "epsilon",
            ConstraintTag::Fixed => "fixed",
        }
    }
}

impl fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConstraintTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ConstraintTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown constraint tag `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(VarId, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
    pub tag: ConstraintTag,
}

impl LinearConstraint {
    pub fn lhs(&self, value: impl Fn(&VarId) -> bool) -> Rational {
        self.terms
            .iter()
            .filter(|(v, _)| value(v))
            .fold(Rational::zero(), |acc, (_, c)| acc + c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Coverage by at least one vehicle.
    Deterministic,
    /// Reliability-weighted coverage with busy fractions.
    Probabilistic,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Deterministic => "deterministic",
            ModelKind::Probabilistic => "probabilistic",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic" | "det" => Ok(ModelKind::Deterministic),
            "probabilistic" | "prob" => Ok(ModelKind::Probabilistic),
            _ => Err(Error::Unknown {
                kind: "model kind",
                name: s.to_string(),
                available: "deterministic, probabilistic".into(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelMeta {
    pub name: String,
    pub kind: ModelKind,
    pub instance_fingerprint: String,
    /// Number of periods the model's `x` and `y` variables range over.
    pub num_periods: usize,
    pub epsilon: Option<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub variables: Vec<VarId>,
    pub objective: Vec<(VarId, Rational)>,
    pub sense: Sense,
    pub constraints: Vec<LinearConstraint>,
    pub meta: ModelMeta,
}

impl ModelSpec {
    pub fn var_index(&self) -> HashMap<VarId, usize> {
        self.variables.iter().enumerate().map(|(i, v)| (*v, i)).collect()
    }

    pub fn count_tag(&self, tag: ConstraintTag) -> usize {
        self.constraints.iter().filter(|c| c.tag == tag).count()
    }

    /// Every referenced variable is declared, declarations are unique and no row
    /// repeats a variable.
    pub fn validate(&self) -> Result<()> {
        let index = self.var_index();
        if index.len() != self.variables.len() {
            return Err(Error::UnsupportedModel("duplicate variable declaration".into()));
        }
        let undeclared = |v: &VarId| Error::UnsupportedModel(format!("variable {v} is not declared"));
        for (v, _) in &self.objective {
            if !index.contains_key(v) {
                return Err(undeclared(v));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.constraints {
            seen.clear();
            for (v, _) in &c.terms {
                if !index.contains_key(v) {
                    return Err(undeclared(v));
                }
                if !seen.insert(*v) {
                    return Err(Error::UnsupportedModel(format!("variable {v} repeated in a {} row", c.tag)));
                }
            }
        }
        Ok(())
    }
}

/// A named model family that can be built from a prepared instance.
pub trait Formulation: Send + Sync {
    fn name(&self) -> &'static str;
    fn kind(&self) -> ModelKind;
    /// Static models aggregate all periods into one.
    fn is_static(&self) -> bool;
    fn build(&self, prepared: &Prepared) -> ModelSpec;
}

struct FleetIct;
struct LrMexclpIct;
struct FleetStatic;
struct LrMexclpStatic;

impl Formulation for FleetIct {
    fn name(&self) -> &'static str {
        "fleet-ict"
    }
    fn kind(&self) -> ModelKind {
        ModelKind::Deterministic
    }
    fn is_static(&self) -> bool {
        false
    }
    fn build(&self, p: &Prepared) -> ModelSpec {
        build_fleet_ict(&p.instance, &p.sets)
    }
}

impl Formulation for LrMexclpIct {
    fn name(&self) -> &'static str {
        "lr-mexclp-ict"
    }
    fn kind(&self) -> ModelKind {
        ModelKind::Probabilistic
    }
    fn is_static(&self) -> bool {
        false
    }
    fn build(&self, p: &Prepared) -> ModelSpec {
        build_lr_mexclp_ict(&p.instance, &p.sets, &p.table)
    }
}

impl Formulation for FleetStatic {
    fn name(&self) -> &'static str {
        "fleet-static"
    }
    fn kind(&self) -> ModelKind {
        ModelKind::Deterministic
    }
    fn is_static(&self) -> bool {
        true
    }
    fn build(&self, p: &Prepared) -> ModelSpec {
        build_fleet_static(&p.instance, &p.sets)
    }
}

impl Formulation for LrMexclpStatic {
    fn name(&self) -> &'static str {
        "lr-mexclp-static"
    }
    fn kind(&self) -> ModelKind {
        ModelKind::Probabilistic
    }
    fn is_static(&self) -> bool {
        true
    }
    fn build(&self, p: &Prepared) -> ModelSpec {
        build_lr_mexclp_static(&p.instance, &p.sets, &p.table)
    }
}

/// Formulations registered by name.
pub struct FormulationRegistry {
    entries: Vec<Box<dyn Formulation>>,
}

impl Default for FormulationRegistry {
    fn default() -> Self {
        let mut registry = FormulationRegistry { entries: Vec::new() };
        registry.register(Box::new(FleetIct));
        registry.register(Box::new(LrMexclpIct));
        registry.register(Box::new(FleetStatic));
        registry.register(Box::new(LrMexclpStatic));
        registry
    }
}

impl FormulationRegistry {
    /// Adds a formulation, replacing any existing one with the same name.
    pub fn register(&mut self, formulation: Box<dyn Formulation>) {
        self.entries.retain(|f| f.name() != formulation.name());
        self.entries.push(formulation);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|f| f.name()).collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn Formulation> {
        self.entries.iter().find(|f| f.name() == name).map(|f| f.as_ref()).ok_or_else(|| Error::Unknown {
            kind: "model",
            name: name.to_string(),
            available: self.names().join(", "),
        })
    }

    pub fn find(&self, kind: ModelKind, is_static: bool) -> Option<&dyn Formulation> {
        self.entries.iter().find(|f| f.kind() == kind && f.is_static() == is_static).map(|f| f.as_ref())
    }
}

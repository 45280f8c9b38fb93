//! Instance files: JSON, version 1, weights in row-major order.

use std::fs;
use std::path::Path;

use bumplab_core::bumps::{EpsilonFamily, EpsilonFunction};
use bumplab_core::grid::{DyadicCube, WeightGrid};
use bumplab_core::math::conjugate_exponent;
use bumplab_core::orlicz::{YoungFamily, YoungFunction};
use bumplab_core::search::Instance;
use bumplab_core::sparse::SparseCollection;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;

/// Serialized Young function. `eta` is ignored by the power family; `table`
/// is required by the tabulated family and rejected by the others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YoungDescriptor {
    pub family: String,
    pub p: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YoungPair {
    #[serde(rename = "A")]
    pub a: YoungDescriptor,
    #[serde(rename = "B")]
    pub b: YoungDescriptor,
}

/// Serialized ε shape; the normalizing constant is recomputed on load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonDescriptor {
    pub family: EpsilonKind,
    pub parameter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsilonKind {
    Power,
    LogPower,
    TripleLog,
}

/// `p` is normalized with `p'` and pairs with `A`; `p_prime` is normalized
/// with `p` and pairs with `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonPair {
    pub p: EpsilonDescriptor,
    pub p_prime: EpsilonDescriptor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub version: u32,
    pub dimension: u32,
    pub depth: u32,
    pub p: f64,
    pub sigma: Vec<f64>,
    pub w: Vec<f64>,
    /// Cubes as `[level, index_1, ..., index_d]`.
    pub sparse: Vec<Vec<u64>>,
    pub young: YoungPair,
    pub epsilon: EpsilonPair,
    pub seed: u64,
}

fn field(name: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("field `{name}`: {msg}"))
}

impl YoungDescriptor {
    pub fn of(a: &YoungFunction) -> Self {
        YoungDescriptor {
            family: a.family().name().to_string(),
            p: a.p(),
            eta: a.eta(),
            table: a.table().map(|t| t.points().map(|(x, y)| [x, y]).collect()),
        }
    }

    /// The same family and `eta` at exponent `p`.
    pub fn with_exponent(&self, p: f64) -> Self {
        YoungDescriptor { p, ..self.clone() }
    }

    pub fn build(&self, name: &str) -> Result<YoungFunction, CliError> {
        let family = YoungFamily::from_name(&self.family).ok_or_else(|| field(name, format!("unknown family `{}`", self.family)))?;
        let built = match (family, &self.table) {
            (YoungFamily::Tabulated, Some(t)) => {
                let pts: Vec<(f64, f64)> = t.iter().map(|[x, y]| (*x, *y)).collect();
                YoungFunction::tabulated(&pts)
            }
            (YoungFamily::Tabulated, None) => return Err(field(name, "tabulated family needs `table`")),
            (_, Some(_)) => return Err(field(name, "`table` is only allowed for the tabulated family")),
            (YoungFamily::Power, None) => YoungFunction::power(self.p),
            (YoungFamily::LogBump, None) => YoungFunction::log_bump(self.p, self.eta),
            (YoungFamily::LogLogBump, None) => YoungFunction::loglog_bump(self.p, self.eta),
            (YoungFamily::Profile, None) => return Err(field(name, "the profile family cannot be stored in instance files")),
        };
        built.map_err(|e| field(name, e))
    }
}

impl EpsilonDescriptor {
    pub fn of(eps: &EpsilonFunction) -> Self {
        let family = match eps.family {
            EpsilonFamily::Power { .. } => EpsilonKind::Power,
            EpsilonFamily::LogPower { .. } => EpsilonKind::LogPower,
            EpsilonFamily::TripleLog { .. } => EpsilonKind::TripleLog,
        };
        EpsilonDescriptor { family, parameter: eps.family.parameter() }
    }

    pub fn build(&self, p_prime: f64, name: &str) -> Result<EpsilonFunction, CliError> {
        let x = self.parameter;
        let built = match self.family {
            EpsilonKind::Power => EpsilonFunction::power(x, p_prime),
            EpsilonKind::LogPower => EpsilonFunction::log_power(x, p_prime),
            EpsilonKind::TripleLog => EpsilonFunction::triple_log(x, p_prime),
        };
        built.map_err(|e| field(name, e))
    }
}

impl InstanceFile {
    pub fn from_instance(inst: &Instance) -> Self {
        let lattice = inst.lattice();
        InstanceFile {
            version: FORMAT_VERSION,
            dimension: lattice.dim,
            depth: lattice.depth,
            p: inst.p,
            sigma: inst.sigma.to_row_major(),
            w: inst.w.to_row_major(),
            sparse: inst
                .collection
                .cubes()
                .iter()
                .map(|q| {
                    let mut v = vec![q.level as u64];
                    v.extend(q.index(lattice.dim));
                    v
                })
                .collect(),
            young: YoungPair { a: YoungDescriptor::of(&inst.a), b: YoungDescriptor::of(&inst.b) },
            epsilon: EpsilonPair { p: EpsilonDescriptor::of(&inst.eps_p), p_prime: EpsilonDescriptor::of(&inst.eps_pp) },
            seed: inst.seed,
        }
    }

    /// Validates every field and builds the instance.
    pub fn to_instance(&self) -> Result<Instance, CliError> {
        if self.version != FORMAT_VERSION {
            return Err(field("version", format!("unsupported version {}, expected {FORMAT_VERSION}", self.version)));
        }
        let (d, l) = (self.dimension, self.depth);
        let sigma = WeightGrid::from_row_major(d, l, &self.sigma).map_err(|e| field("sigma", e))?;
        let w = WeightGrid::from_row_major(d, l, &self.w).map_err(|e| field("w", e))?;
        let mut cubes = Vec::with_capacity(self.sparse.len());
        for (k, entry) in self.sparse.iter().enumerate() {
            let name = format!("sparse[{k}]");
            if entry.len() != d as usize + 1 {
                return Err(field(&name, format!("expected [level, {d} indices], got {} numbers", entry.len())));
            }
            let level = u32::try_from(entry[0]).map_err(|_| field(&name, "level out of range"))?;
            let q = DyadicCube::from_index(level, &entry[1..]).map_err(|e| field(&name, e))?;
            sigma.lattice().check(&q).map_err(|e| field(&name, e))?;
            cubes.push(q);
        }
        let collection = SparseCollection::verified(sigma.lattice(), &cubes, 0.5).map_err(|e| field("sparse", e))?;
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(field("p", "must be a finite real > 1"));
        }
        let pp = conjugate_exponent(self.p);
        check_exponent("young.A.p", &self.young.a, self.p)?;
        check_exponent("young.B.p", &self.young.b, pp)?;
        let a = self.young.a.build("young.A")?;
        let b = self.young.b.build("young.B")?;
        let eps_p = self.epsilon.p.build(pp, "epsilon.p")?;
        let eps_pp = self.epsilon.p_prime.build(self.p, "epsilon.p_prime")?;
        Instance::new(sigma, w, collection, self.p, a, b, eps_p, eps_pp, self.seed).map_err(CliError::from)
    }
}

/// Tabulated functions carry their table slope as `p`, so only the
/// parametric families are checked.
fn check_exponent(name: &str, desc: &YoungDescriptor, expected: f64) -> Result<(), CliError> {
    let got = desc.p;
    if desc.family == "tabulated" || (got - expected).abs() <= 1e-12 * expected {
        Ok(())
    } else {
        Err(field(name, format!("exponent {got} does not match the instance ({expected})")))
    }
}

pub fn parse_instance(text: &str, origin: &str) -> Result<InstanceFile, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Input(format!("{origin}: {e}")))
}

pub fn read_instance(path: &Path) -> Result<InstanceFile, CliError> {
    let origin = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{origin}: {e}")))?;
    parse_instance(&text, &origin)
}

pub fn to_json(file: &InstanceFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("instance files always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use bumplab_core::search::{generate_instance, GenConfig, GenKind};

    fn sample() -> InstanceFile {
        let inst = generate_instance(GenKind::Lognormal, 1, 3, 2.0, 1, &GenConfig::default()).unwrap();
        InstanceFile::from_instance(&inst)
    }

    #[test]
    fn tabulated_bump_survives_a_round_trip() {
        let mut file = sample();
        let table: Vec<[f64; 2]> = (-12..=12)
            .map(|k| {
                let t = 2f64.powi(k);
                [t, t * t * (1.0 + t.max(1.0).ln())]
            })
            .collect();
        file.young.a = YoungDescriptor { family: "tabulated".into(), p: 2.0, eta: 0.0, table: Some(table) };
        let inst = file.to_instance().unwrap();
        let again = InstanceFile::from_instance(&inst);
        assert_eq!(again.young.a.family, "tabulated");
        let back = parse_instance(&to_json(&again), "mem").unwrap().to_instance().unwrap();
        assert_eq!(back.a.value(3.0), inst.a.value(3.0));
    }

    #[test]
    fn mismatched_exponent_is_a_field_error() {
        let mut file = sample();
        file.young.b.p = 2.5;
        let err = file.to_instance().unwrap_err();
        assert!(err.to_string().contains("young.B.p"), "{err}");
        let mut file = sample();
        file.version = 2;
        assert!(file.to_instance().unwrap_err().to_string().contains("version"));
    }
}

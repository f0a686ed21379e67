//! JSON run configuration: sites, bonds, fields and options.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spinfactory::design::ParallelField;
use spinfactory::{random_angles, seeded_rng, Angles, Bond, Mat3, SiteSpec, SystemSpec, Vec3};
use thiserror::Error;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_J_NORM: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemaError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

fn field_error(field: impl Into<String>, message: impl Into<String>) -> SchemaError {
    SchemaError::Field {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    /// Free-form provenance written by `design` and `spiral`; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
    pub sites: Vec<RawSite>,
    #[serde(default)]
    pub bonds: Vec<RawBond>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_parallel: Option<RawParallel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<RawOptions>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSite {
    pub spin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBond {
    pub i: usize,
    pub j: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<[[f64; 3]; 3]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawParallel {
    Uniform(f64),
    PerSite(Vec<f64>),
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BondSpec {
    pub i: usize,
    pub j: usize,
    /// `J^{ij}`; absent when the bond only names the graph for `design`.
    pub matrix: Option<Mat3>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Options {
    pub j_norm: f64,
    pub tolerance: f64,
    pub seed: u64,
}

/// Validated configuration. Angles are in radians.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub sites: Vec<SiteSpec>,
    pub angles: Vec<Option<Angles>>,
    pub bonds: Vec<BondSpec>,
    pub fields: Option<Vec<Vec3>>,
    pub h_parallel: Option<ParallelField>,
    pub options: Options,
    /// SHA-256 of the raw config text, hex encoded.
    pub hash: String,
}

pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn finite(field: String, x: f64) -> Result<f64, SchemaError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(field_error(field, format!("must be finite, got {x}")))
    }
}

pub fn parse_config(text: &str) -> Result<Config, SchemaError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| SchemaError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    from_raw(raw, config_hash(text))
}

pub fn from_raw(raw: RawConfig, hash: String) -> Result<Config, SchemaError> {
    let n = raw.sites.len();
    if n == 0 {
        return Err(field_error("sites", "at least one site is required"));
    }

    let mut sites = Vec::with_capacity(n);
    let mut angles = Vec::with_capacity(n);
    for (k, s) in raw.sites.iter().enumerate() {
        let site = SiteSpec::new(s.spin).map_err(|_| {
            field_error(
                format!("sites[{k}].spin"),
                format!("2S must be a positive integer, got S = {}", s.spin),
            )
        })?;
        sites.push(site);
        angles.push(match (s.theta, s.phi) {
            (Some(t), Some(p)) => Some(Angles::new(
                finite(format!("sites[{k}].theta"), t)?,
                finite(format!("sites[{k}].phi"), p)?,
            )),
            (None, None) => None,
            _ => {
                return Err(field_error(
                    format!("sites[{k}]"),
                    "give both theta and phi, or neither",
                ))
            }
        });
    }

    let mut bonds = Vec::with_capacity(raw.bonds.len());
    for (k, b) in raw.bonds.iter().enumerate() {
        let at = |f: &str| format!("bonds[{k}].{f}");
        for (name, idx) in [("i", b.i), ("j", b.j)] {
            if idx >= n {
                return Err(field_error(at(name), format!("site {idx} out of range for {n} sites")));
            }
        }
        if b.i == b.j {
            return Err(field_error(format!("bonds[{k}]"), "a bond needs two distinct sites"));
        }
        let matrix = match (b.coupling, b.matrix) {
            (Some(_), Some(_)) => {
                return Err(field_error(format!("bonds[{k}]"), "give coupling or matrix, not both"))
            }
            (Some(c), None) => {
                for x in c {
                    finite(at("coupling"), x)?;
                }
                Some(Mat3::from_diagonal(&Vec3::from(c)))
            }
            (None, Some(m)) => {
                for x in m.iter().flatten() {
                    finite(at("matrix"), *x)?;
                }
                Some(Mat3::from_fn(|r, c| m[r][c]))
            }
            (None, None) => None,
        };
        bonds.push(BondSpec { i: b.i, j: b.j, matrix });
    }

    let fields = match raw.fields {
        None => None,
        Some(f) if f.len() != n => {
            return Err(field_error("fields", format!("{} fields for {n} sites", f.len())))
        }
        Some(f) => {
            let mut out = Vec::with_capacity(n);
            for (k, h) in f.into_iter().enumerate() {
                for x in h {
                    finite(format!("fields[{k}]"), x)?;
                }
                out.push(Vec3::from(h));
            }
            Some(out)
        }
    };

    let h_parallel = match raw.h_parallel {
        None => None,
        Some(RawParallel::Uniform(h)) => Some(ParallelField::Uniform(finite("h_parallel".into(), h)?)),
        Some(RawParallel::PerSite(v)) if v.len() != n => {
            return Err(field_error("h_parallel", format!("{} values for {n} sites", v.len())))
        }
        Some(RawParallel::PerSite(v)) => {
            for (k, x) in v.iter().enumerate() {
                finite(format!("h_parallel[{k}]"), *x)?;
            }
            Some(ParallelField::PerSite(v))
        }
    };

    let o = raw.options.unwrap_or_default();
    let j_norm = o.j_norm.unwrap_or(DEFAULT_J_NORM);
    if !(j_norm.is_finite() && j_norm > 0.0) {
        return Err(field_error("options.j_norm", format!("must be positive, got {j_norm}")));
    }
    let tolerance = o.tolerance.unwrap_or(DEFAULT_TOLERANCE);
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(field_error("options.tolerance", format!("must be positive, got {tolerance}")));
    }

    Ok(Config {
        sites,
        angles,
        bonds,
        fields,
        h_parallel,
        options: Options {
            j_norm,
            tolerance,
            seed: o.seed.unwrap_or(DEFAULT_SEED),
        },
        hash,
    })
}

impl Config {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Given angles, with missing ones drawn from the seed. Every site gets a
    /// draw so a site's random direction does not depend on its neighbours.
    pub fn angles_or_random(&self) -> Vec<Angles> {
        let drawn = random_angles(&mut seeded_rng(self.options.seed), self.len());
        self.angles
            .iter()
            .zip(drawn)
            .map(|(given, d)| given.unwrap_or(d))
            .collect()
    }

    pub fn explicit_angles(&self) -> Result<Vec<Angles>, SchemaError> {
        self.angles
            .iter()
            .enumerate()
            .map(|(k, a)| a.ok_or_else(|| field_error(format!("sites[{k}]"), "theta and phi are required here")))
            .collect()
    }

    pub fn coupled_bonds(&self) -> Result<Vec<Bond>, SchemaError> {
        self.bonds
            .iter()
            .enumerate()
            .map(|(k, b)| {
                b.matrix
                    .map(|m| Bond::new(b.i, b.j, m))
                    .ok_or_else(|| field_error(format!("bonds[{k}]"), "coupling or matrix is required here"))
            })
            .collect()
    }

    /// Fields as given, plus `h_∥ n_i` when `h_parallel` is set.
    pub fn system(&self, angles: &[Angles]) -> Result<SystemSpec, SchemaError> {
        let mut sys = SystemSpec::new(self.sites.clone(), self.coupled_bonds()?);
        if let Some(f) = &self.fields {
            sys.fields = f.clone();
        }
        if let Some(hp) = &self.h_parallel {
            let n = self.len();
            let values = match hp {
                ParallelField::Uniform(h) => vec![*h; n],
                ParallelField::PerSite(v) => v.clone(),
            };
            for ((f, a), h) in sys.fields.iter_mut().zip(angles).zip(values) {
                *f += a.direction() * h;
            }
        }
        Ok(sys)
    }
}

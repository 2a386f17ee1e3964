//! JSON network descriptions.
//!
//! Matrices are arrays of rows. An entry is either a real number or a
//! `[re, im]` pair. A document either lists its subsystems explicitly or
//! names a built-in scenario, never both.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c64, CMat};
use crate::model::{MatrixFunction, ModelError, PhSubsystem};
use crate::network::{Controller, Network, PortBlock};
use crate::scenarios::{self, ScenarioError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

pub type MatrixJson = Vec<Vec<Entry>>;

pub fn matrix_to_json(m: &CMat) -> MatrixJson {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| {
                    let z = m[(i, j)];
                    if z.im == 0.0 {
                        Entry::Real(z.re)
                    } else {
                        Entry::Complex([z.re, z.im])
                    }
                })
                .collect()
        })
        .collect()
}

pub fn matrix_from_json(rows: &MatrixJson, what: &str) -> Result<CMat, IoError> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err(IoError::Schema(format!("{what}: rows have different lengths")));
    }
    Ok(CMat::from_fn(r, c, |i, j| match rows[i][j] {
        Entry::Real(x) => c64(x, 0.0),
        Entry::Complex([a, b]) => c64(a, b),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum FunctionJson {
    Constant(MatrixJson),
    Polynomial(Vec<MatrixJson>),
    Sampled(Vec<MatrixJson>),
}

impl FunctionJson {
    fn from_function(f: &MatrixFunction) -> Self {
        match f {
            MatrixFunction::Constant(m) => FunctionJson::Constant(matrix_to_json(m)),
            MatrixFunction::Polynomial(c) => FunctionJson::Polynomial(c.iter().map(matrix_to_json).collect()),
            MatrixFunction::Sampled(c) => FunctionJson::Sampled(c.iter().map(matrix_to_json).collect()),
        }
    }

    fn to_function(&self, what: &str) -> Result<MatrixFunction, IoError> {
        let list = |v: &[MatrixJson]| v.iter().map(|m| matrix_from_json(m, what)).collect::<Result<Vec<_>, _>>();
        Ok(match self {
            FunctionJson::Constant(m) => MatrixFunction::Constant(matrix_from_json(m, what)?),
            FunctionJson::Polynomial(v) => MatrixFunction::Polynomial(list(v)?),
            FunctionJson::Sampled(v) => MatrixFunction::Sampled(list(v)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemJson {
    pub order: usize,
    pub dim: usize,
    pub p_matrices: Vec<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0_profile: Option<FunctionJson>,
    pub hamiltonian: FunctionJson,
    pub w_b: MatrixJson,
    pub w_c: MatrixJson,
    #[serde(default = "unit_interval")]
    pub interval: [f64; 2],
}

fn unit_interval() -> [f64; 2] {
    [0.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerJson {
    pub a_c: MatrixJson,
    pub b_c: MatrixJson,
    pub c_c: MatrixJson,
    pub d_c: MatrixJson,
    pub state_weight: MatrixJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortBlockJson {
    pub subsystem: usize,
    pub inputs: MatrixJson,
    pub outputs: MatrixJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRef {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    #[serde(default = "schema_version")]
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subsystems: Vec<SubsystemJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub controllers: Vec<ControllerJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_mat: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coupling: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub external_ports: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub serial_blocks: Option<Vec<PortBlockJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioRef>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

impl NetworkFile {
    pub fn from_json(text: &str) -> Result<Self, IoError> {
        let f: NetworkFile = serde_json::from_str(text)?;
        if f.schema != SCHEMA_VERSION {
            return Err(IoError::Schema(format!("unsupported schema version {}", f.schema)));
        }
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network files always serialize")
    }

    pub fn from_network(net: &Network) -> Self {
        NetworkFile {
            schema: SCHEMA_VERSION,
            subsystems: net
                .subsystems
                .iter()
                .map(|s| SubsystemJson {
                    order: s.order,
                    dim: s.dim,
                    p_matrices: s.p_matrices.iter().map(matrix_to_json).collect(),
                    p0_profile: s.p0_profile.as_ref().map(FunctionJson::from_function),
                    hamiltonian: FunctionJson::from_function(&s.hamiltonian),
                    w_b: matrix_to_json(&s.w_b),
                    w_c: matrix_to_json(&s.w_c),
                    interval: [s.interval.0, s.interval.1],
                })
                .collect(),
            controllers: net
                .controllers
                .iter()
                .map(|c| ControllerJson {
                    a_c: matrix_to_json(&c.a_c),
                    b_c: matrix_to_json(&c.b_c),
                    c_c: matrix_to_json(&c.c_c),
                    d_c: matrix_to_json(&c.d_c),
                    state_weight: matrix_to_json(&c.state_weight),
                })
                .collect(),
            k_mat: Some(matrix_to_json(&net.k_mat)),
            coupling: net.coupling.clone(),
            external_ports: net.external_ports.clone(),
            serial_blocks: net.serial_blocks.as_ref().map(|bs| {
                bs.iter()
                    .map(|b| PortBlockJson { subsystem: b.subsystem, inputs: matrix_to_json(&b.inputs), outputs: matrix_to_json(&b.outputs) })
                    .collect()
            }),
            scenario: None,
        }
    }

    /// Explicit description of a built-in scenario.
    pub fn from_scenario(name: &str, params: &serde_json::Value) -> Result<Self, IoError> {
        Ok(Self::from_network(&scenarios::build(name, params)?))
    }

    pub fn to_network(&self) -> Result<Network, IoError> {
        if let Some(sc) = &self.scenario {
            let explicit = !self.subsystems.is_empty()
                || !self.controllers.is_empty()
                || self.k_mat.is_some()
                || !self.coupling.is_empty()
                || !self.external_ports.is_empty()
                || self.serial_blocks.is_some();
            if explicit {
                return Err(IoError::Schema("a document names a scenario or describes a network, not both".into()));
            }
            return Ok(scenarios::build(&sc.name, &sc.params)?);
        }
        if self.subsystems.is_empty() {
            return Err(IoError::Schema("no subsystems and no scenario".into()));
        }
        let mut subsystems = Vec::with_capacity(self.subsystems.len());
        for (j, s) in self.subsystems.iter().enumerate() {
            let what = |f: &str| format!("subsystems[{j}].{f}");
            let p = s
                .p_matrices
                .iter()
                .enumerate()
                .map(|(k, m)| matrix_from_json(m, &what(&format!("p_matrices[{k}]"))))
                .collect::<Result<Vec<_>, _>>()?;
            let mut sub = PhSubsystem::new(
                s.order,
                s.dim,
                p,
                s.hamiltonian.to_function(&what("hamiltonian"))?,
                matrix_from_json(&s.w_b, &what("w_b"))?,
                matrix_from_json(&s.w_c, &what("w_c"))?,
            )?
            .with_interval(s.interval[0], s.interval[1])?;
            if let Some(f) = &s.p0_profile {
                sub = sub.with_p0_profile(f.to_function(&what("p0_profile"))?)?;
            }
            subsystems.push(sub);
        }
        let k_mat = matrix_from_json(self.k_mat.as_ref().ok_or_else(|| IoError::Schema("k_mat is required".into()))?, "k_mat")?;
        let mut net = Network::new(subsystems, k_mat);
        if self.controllers.len() != self.coupling.len() {
            return Err(IoError::Schema(format!("{} controllers but {} coupling lists", self.controllers.len(), self.coupling.len())));
        }
        for (i, (c, ports)) in self.controllers.iter().zip(&self.coupling).enumerate() {
            let m = |x: &MatrixJson, f: &str| matrix_from_json(x, &format!("controllers[{i}].{f}"));
            let ctrl = Controller { a_c: m(&c.a_c, "a_c")?, b_c: m(&c.b_c, "b_c")?, c_c: m(&c.c_c, "c_c")?, d_c: m(&c.d_c, "d_c")?, state_weight: m(&c.state_weight, "state_weight")? };
            net = net.with_controller(ctrl, ports.clone());
        }
        net.external_ports = self.external_ports.clone();
        if let Some(bs) = &self.serial_blocks {
            let blocks = bs
                .iter()
                .map(|b| {
                    Ok(PortBlock {
                        subsystem: b.subsystem,
                        inputs: matrix_from_json(&b.inputs, "serial_blocks.inputs")?,
                        outputs: matrix_from_json(&b.outputs, "serial_blocks.outputs")?,
                    })
                })
                .collect::<Result<Vec<_>, IoError>>()?;
            net = net.with_serial_blocks(blocks);
        }
        Ok(net)
    }
}

/// Parses a network document and builds the network it describes.
pub fn parse_network(text: &str) -> Result<Network, IoError> {
    NetworkFile::from_json(text)?.to_network()
}

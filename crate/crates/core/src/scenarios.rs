//! Ready-made networks: strings, chains of strings, Euler-Bernoulli beams and
//! hybrid string-beam systems, with and without a spring-mass-damper.
//!
//! Strings use `y = H x = (velocity, stress)` with `P_1 = [[0, 1], [1, 0]]`,
//! so the power flowing in through the boundary is `v(1) s(1) - v(0) s(0)`.
//! Beams use `y = (velocity, bending moment)` with `P_2 = [[0, -1], [1, 0]]`,
//! whose boundary power is `[M v' - v M']` between the ends. All boundary
//! signs below are chosen so that damping terms remove energy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c64, real_matrix, CMat};
use crate::model::{MatrixFunction, ModelError, PhSubsystem};
use crate::network::{Controller, Network, NetworkError, PortBlock};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario '{0}'")]
    Unknown(String),
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("bad parameter document: {0}")]
    Params(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Samples used for non-constant Hamiltonian densities.
const H_SAMPLES: usize = 257;

/// Polynomial coefficients `c_0 + c_1 z + ...` in the local coordinate `z` of
/// a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coefficient(pub Vec<f64>);

impl Coefficient {
    pub fn constant(c: f64) -> Self {
        Coefficient(vec![c])
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * z + c)
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().skip(1).all(|&c| c == 0.0)
    }

    fn check_positive(&self, what: &str) -> Result<(), ScenarioError> {
        if self.0.is_empty() {
            return Err(ScenarioError::Invalid(format!("{what} has no coefficients")));
        }
        let min = (0..H_SAMPLES).map(|i| self.eval(i as f64 / (H_SAMPLES - 1) as f64)).fold(f64::INFINITY, f64::min);
        if !(min > 0.0 && min.is_finite()) {
            return Err(ScenarioError::Invalid(format!("{what} must be uniformly positive (min sample {min})")));
        }
        Ok(())
    }
}

fn one() -> Coefficient {
    Coefficient::constant(1.0)
}

/// `diag(1 / rho, stiffness)`.
fn energy_density(rho: &Coefficient, stiffness: &Coefficient) -> MatrixFunction {
    let at = |z: f64| CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c64(1.0 / rho.eval(z), 0.0), c64(stiffness.eval(z), 0.0)]));
    if rho.is_constant() && stiffness.is_constant() {
        MatrixFunction::Constant(at(0.0))
    } else {
        MatrixFunction::Sampled((0..H_SAMPLES).map(|i| at(i as f64 / (H_SAMPLES - 1) as f64)).collect())
    }
}

/// Rows over a trace of length `len`, each given by `(index, value)` pairs.
fn rows(len: usize, spec: &[&[(usize, f64)]]) -> CMat {
    let mut m = CMat::zeros(spec.len(), len);
    for (r, entries) in spec.iter().enumerate() {
        for &(c, v) in *entries {
            m[(r, c)] = c64(v, 0.0);
        }
    }
    m
}

// string trace: v(1), s(1), v(0), s(0)
const V1: usize = 0;
const S1: usize = 1;
const V0: usize = 2;
const S0: usize = 3;

fn string(rho: &Coefficient, tension: &Coefficient, w_b: CMat, w_c: CMat, interval: (f64, f64)) -> Result<PhSubsystem, ScenarioError> {
    let p1 = real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let s = PhSubsystem::new(1, 2, vec![CMat::zeros(2, 2), p1], energy_density(rho, tension), w_b, w_c)?;
    Ok(s.with_interval(interval.0, interval.1)?)
}

// beam trace: v(1), M(1), v'(1), M'(1), v(0), M(0), v'(0), M'(0)
const BV1: usize = 0;
const BM1: usize = 1;
const BDV1: usize = 2;
const BDM1: usize = 3;
const BV0: usize = 4;
const BM0: usize = 5;
const BDV0: usize = 6;
const BDM0: usize = 7;

fn beam(rho: &Coefficient, ei: &Coefficient, w_b: CMat, w_c: CMat) -> Result<PhSubsystem, ScenarioError> {
    let p2 = real_matrix(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    Ok(PhSubsystem::new(2, 2, vec![CMat::zeros(2, 2), CMat::zeros(2, 2), p2], energy_density(rho, ei), w_b, w_c)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainOfStringsSpec {
    pub m: usize,
    /// One coefficient per segment, or a single one shared by all.
    pub rho: Vec<Coefficient>,
    pub tension: Vec<Coefficient>,
    /// `kappa[0]` damps the left end, `kappa[j]` the joint after segment `j`.
    pub kappa: Vec<f64>,
    /// Flip the left-end feedback to `s(0) = -kappa_0 v(0)`, which feeds
    /// energy in and fails certification.
    pub reversed_left_sign: bool,
}

impl Default for ChainOfStringsSpec {
    fn default() -> Self {
        ChainOfStringsSpec { m: 3, rho: vec![one()], tension: vec![one()], kappa: vec![0.5, 0.0, 0.0], reversed_left_sign: false }
    }
}

fn per_segment<'a>(v: &'a [Coefficient], m: usize, what: &str) -> Result<Vec<&'a Coefficient>, ScenarioError> {
    match v.len() {
        1 => Ok(vec![&v[0]; m]),
        n if n == m => Ok(v.iter().collect()),
        n => Err(ScenarioError::Invalid(format!("{what} has {n} entries for {m} segments"))),
    }
}

/// `m` strings joined end to end, damped at the left end and optionally at
/// the joints, free at the right end.
///
/// Segment `j < m` has inputs `(-s(0), v(1))` and outputs `(v(0), s(1))`;
/// the last segment has inputs `(-s(0), s(1))` and outputs `(v(0), v(1))`.
/// The joints impose continuity of velocity and a stress jump
/// `s_{j+1}(0) = s_j(1) + kappa_j v_{j+1}(0)`.
pub fn build_chain(spec: &ChainOfStringsSpec) -> Result<Network, ScenarioError> {
    let m = spec.m;
    if m == 0 {
        return Err(ScenarioError::Invalid("a chain needs at least one segment".into()));
    }
    if spec.kappa.len() != m {
        return Err(ScenarioError::Invalid(format!("kappa has {} entries for {m} segments", spec.kappa.len())));
    }
    if !(spec.kappa[0] > 0.0) {
        return Err(ScenarioError::Invalid(format!("kappa_0 must be positive, got {}", spec.kappa[0])));
    }
    if let Some(k) = spec.kappa.iter().skip(1).find(|k| !(**k >= 0.0)) {
        return Err(ScenarioError::Invalid(format!("joint damping must be nonnegative, got {k}")));
    }
    let rho = per_segment(&spec.rho, m, "rho")?;
    let tension = per_segment(&spec.tension, m, "tension")?;
    let mut subsystems = Vec::with_capacity(m);
    for j in 0..m {
        rho[j].check_positive(&format!("rho of segment {}", j + 1))?;
        tension[j].check_positive(&format!("tension of segment {}", j + 1))?;
        let (w_b, w_c) = if j + 1 < m {
            (rows(4, &[&[(S0, -1.0)], &[(V1, 1.0)]]), rows(4, &[&[(V0, 1.0)], &[(S1, 1.0)]]))
        } else {
            (rows(4, &[&[(S0, -1.0)], &[(S1, 1.0)]]), rows(4, &[&[(V0, 1.0)], &[(V1, 1.0)]]))
        };
        subsystems.push(string(rho[j], tension[j], w_b, w_c, (j as f64, j as f64 + 1.0))?);
    }
    let p = 2 * m;
    let mut k = CMat::zeros(p, p);
    k[(0, 0)] = c64(if spec.reversed_left_sign { spec.kappa[0] } else { -spec.kappa[0] }, 0.0);
    for j in 1..m {
        k[(2 * j - 1, 2 * j)] = c64(1.0, 0.0);
        k[(2 * j, 2 * j - 1)] = c64(-1.0, 0.0);
        k[(2 * j, 2 * j)] = c64(-spec.kappa[j], 0.0);
    }
    // reformulated blocks: the damped port of the first segment, then
    // y(0) of every following segment, are the inputs
    let k0 = spec.kappa[0];
    let blocks = (0..m)
        .map(|j| {
            let (inputs, outputs) = if m == 1 {
                (rows(4, &[&[(S0, 1.0), (V0, -k0)], &[(S1, 1.0)]]), rows(4, &[&[(V0, 1.0)], &[(V1, 1.0)]]))
            } else if j == 0 {
                (rows(4, &[&[(S0, 1.0), (V0, -k0)]]), rows(4, &[&[(V0, 1.0)], &[(V1, 1.0)], &[(S1, 1.0)]]))
            } else if j + 1 < m {
                (rows(4, &[&[(V0, 1.0)], &[(S0, 1.0)]]), rows(4, &[&[(V1, 1.0)], &[(S1, 1.0)]]))
            } else {
                (rows(4, &[&[(V0, 1.0)], &[(S0, 1.0)], &[(S1, 1.0)]]), rows(4, &[&[(V1, 1.0)]]))
            };
            PortBlock { subsystem: j, inputs, outputs }
        })
        .collect();
    Ok(Network::new(subsystems, k).with_serial_blocks(blocks))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreeWaveSpec {
    pub rho: Coefficient,
    pub tension: Coefficient,
}

impl Default for FreeWaveSpec {
    fn default() -> Self {
        FreeWaveSpec { rho: one(), tension: one() }
    }
}

/// A string with stress-free ends, a conservative system.
pub fn build_free_wave(spec: &FreeWaveSpec) -> Result<Network, ScenarioError> {
    spec.rho.check_positive("rho")?;
    spec.tension.check_positive("tension")?;
    let s = string(&spec.rho, &spec.tension, rows(4, &[&[(S0, -1.0)], &[(S1, 1.0)]]), rows(4, &[&[(V0, 1.0)], &[(V1, 1.0)]]), (0.0, 1.0))?;
    Ok(Network::new(vec![s], CMat::zeros(2, 2)))
}

/// Conservative boundary conditions of a beam end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamEnd {
    /// `v = M = 0`.
    Pinned,
    /// `M = M' = 0`.
    Free,
    /// `v' = M' = 0`.
    ShearHinge,
    /// `v = v' = 0`.
    Clamped,
    /// `v = M = 0` (fixed position with zero moment).
    Bc5,
    /// `v' = M' = 0` (fixed slope with zero shear).
    Bc6,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeftEnd {
    /// `(M(0), -M'(0)) = K_0 (v'(0), v(0))`.
    Damped { k0: [[f64; 2]; 2] },
    Conservative(BeamEnd),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EulerBernoulliSpec {
    pub rho: Coefficient,
    pub ei: Coefficient,
    pub left: LeftEnd,
    pub right: BeamEnd,
}

impl Default for EulerBernoulliSpec {
    fn default() -> Self {
        EulerBernoulliSpec { rho: one(), ei: one(), left: LeftEnd::Damped { k0: [[1.0, 0.0], [0.0, 0.0]] }, right: BeamEnd::Clamped }
    }
}

/// Accepts `K_0 = diag(k, 0)` with `k > 0` or `K_0` with positive definite
/// Hermitian part.
pub fn check_k0(k0: &[[f64; 2]; 2]) -> Result<(), ScenarioError> {
    if k0[0][1] == 0.0 && k0[1][0] == 0.0 && k0[1][1] == 0.0 && k0[0][0] > 0.0 {
        return Ok(());
    }
    let off = 0.5 * (k0[0][1] + k0[1][0]);
    let (a, d) = (k0[0][0], k0[1][1]);
    if a > 0.0 && a * d - off * off > 0.0 {
        return Ok(());
    }
    Err(ScenarioError::Invalid(format!(
        "K_0 = {k0:?} must be diag(k, 0) with k > 0 or have a positive definite Hermitian part"
    )))
}

/// `(b, c)` row pairs of a conservative right end, with `b c` equal to the
/// power `M(1) v'(1) - v(1) M'(1)`.
fn right_end_rows(bc: BeamEnd) -> [((usize, f64), (usize, f64)); 2] {
    match bc {
        BeamEnd::Pinned | BeamEnd::Bc5 => [((BM1, 1.0), (BDV1, 1.0)), ((BV1, 1.0), (BDM1, -1.0))],
        BeamEnd::Free => [((BM1, 1.0), (BDV1, 1.0)), ((BDM1, -1.0), (BV1, 1.0))],
        BeamEnd::ShearHinge | BeamEnd::Bc6 => [((BDV1, 1.0), (BM1, 1.0)), ((BDM1, -1.0), (BV1, 1.0))],
        BeamEnd::Clamped => [((BDV1, 1.0), (BM1, 1.0)), ((BV1, 1.0), (BDM1, -1.0))],
    }
}

/// Same for the left end, where the power is `v(0) M'(0) - M(0) v'(0)`.
fn left_end_rows(bc: BeamEnd) -> [((usize, f64), (usize, f64)); 2] {
    match bc {
        BeamEnd::Pinned | BeamEnd::Bc5 => [((BM0, 1.0), (BDV0, -1.0)), ((BV0, 1.0), (BDM0, 1.0))],
        BeamEnd::Free => [((BM0, 1.0), (BDV0, -1.0)), ((BDM0, 1.0), (BV0, 1.0))],
        BeamEnd::ShearHinge | BeamEnd::Bc6 => [((BDV0, 1.0), (BM0, -1.0)), ((BDM0, 1.0), (BV0, 1.0))],
        BeamEnd::Clamped => [((BDV0, 1.0), (BM0, -1.0)), ((BV0, 1.0), (BDM0, 1.0))],
    }
}

/// A single Euler-Bernoulli beam on the unit interval.
pub fn build_beam(spec: &EulerBernoulliSpec) -> Result<Network, ScenarioError> {
    spec.rho.check_positive("rho")?;
    spec.ei.check_positive("ei")?;
    let mut b_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut c_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut k = CMat::zeros(4, 4);
    match &spec.left {
        LeftEnd::Damped { k0 } => {
            check_k0(k0)?;
            b_rows.push(vec![(BM0, 1.0)]);
            b_rows.push(vec![(BDM0, -1.0)]);
            c_rows.push(vec![(BDV0, -1.0)]);
            c_rows.push(vec![(BV0, -1.0)]);
            for i in 0..2 {
                for j in 0..2 {
                    k[(i, j)] = c64(-k0[i][j], 0.0);
                }
            }
        }
        LeftEnd::Conservative(bc) => {
            for (b, c) in left_end_rows(*bc) {
                b_rows.push(vec![b]);
                c_rows.push(vec![c]);
            }
        }
    }
    for (b, c) in right_end_rows(spec.right) {
        b_rows.push(vec![b]);
        c_rows.push(vec![c]);
    }
    let as_rows = |r: &[Vec<(usize, f64)>]| rows(8, &r.iter().map(|v| v.as_slice()).collect::<Vec<_>>());
    let s = beam(&spec.rho, &spec.ei, as_rows(&b_rows), as_rows(&c_rows))?;
    Ok(Network::new(vec![s], k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoupledVariant {
    DamperStringBeam,
    SpringMassDamperStringBeam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoupledSpec {
    pub variant: CoupledVariant,
    pub rho: Coefficient,
    pub tension: Coefficient,
    /// Left-end damping of the string (damper variant only).
    pub kappa: f64,
    pub beam_rho: Coefficient,
    pub beam_ei: Coefficient,
    pub mass: f64,
    pub spring: f64,
    pub damping: f64,
}

impl Default for CoupledSpec {
    fn default() -> Self {
        CoupledSpec {
            variant: CoupledVariant::DamperStringBeam,
            rho: one(),
            tension: one(),
            kappa: 1.0,
            beam_rho: one(),
            beam_ei: one(),
            mass: 1.0,
            spring: 1.0,
            damping: 1.0,
        }
    }
}

/// The spring-mass-damper as a controller on `x_c = (position, velocity)`
/// driven by the string stress, with energy `(k x_1^2 + m x_2^2) / 2`.
pub fn spring_mass_damper(mass: f64, spring: f64, damping: f64) -> Controller {
    Controller {
        a_c: real_matrix(2, 2, &[0.0, 1.0, -spring / mass, -damping / mass]),
        b_c: real_matrix(2, 1, &[0.0, 1.0 / mass]),
        c_c: real_matrix(1, 2, &[0.0, 1.0]),
        d_c: CMat::zeros(1, 1),
        state_weight: real_matrix(2, 2, &[spring, 0.0, 0.0, mass]),
    }
}

/// A string attached at its right end to a beam pinned at the far end.
///
/// The joint transmits velocity `v_beam(0) = v(1)` and shear
/// `M_beam'(0) = -s(1)` with zero moment `M_beam(0) = 0`. The left end of
/// the string is either damped, `s(0) = kappa v(0)`, or carries the
/// spring-mass-damper with `v(0) = x_c2`.
pub fn build_coupled(spec: &CoupledSpec) -> Result<Network, ScenarioError> {
    spec.rho.check_positive("rho")?;
    spec.tension.check_positive("tension")?;
    spec.beam_rho.check_positive("beam_rho")?;
    spec.beam_ei.check_positive("beam_ei")?;
    let (left_b, left_c) = match spec.variant {
        CoupledVariant::DamperStringBeam => {
            if !(spec.kappa > 0.0) {
                return Err(ScenarioError::Invalid(format!("kappa must be positive, got {}", spec.kappa)));
            }
            ((S0, -1.0), (V0, 1.0))
        }
        CoupledVariant::SpringMassDamperStringBeam => {
            for (v, what) in [(spec.mass, "mass"), (spec.spring, "spring"), (spec.damping, "damping")] {
                if !(v > 0.0) {
                    return Err(ScenarioError::Invalid(format!("{what} must be positive, got {v}")));
                }
            }
            ((V0, -1.0), (S0, 1.0))
        }
    };
    let s = string(&spec.rho, &spec.tension, rows(4, &[&[left_b], &[(V1, 1.0)]]), rows(4, &[&[left_c], &[(S1, 1.0)]]), (0.0, 1.0))?;
    let b = beam(
        &spec.beam_rho,
        &spec.beam_ei,
        rows(8, &[&[(BM0, 1.0)], &[(BDM0, 1.0)], &[(BM1, 1.0)], &[(BV1, 1.0)]]),
        rows(8, &[&[(BDV0, -1.0)], &[(BV0, 1.0)], &[(BDV1, 1.0)], &[(BDM1, -1.0)]]),
    )?;
    let mut k = CMat::zeros(6, 6);
    k[(1, 3)] = c64(1.0, 0.0);
    k[(3, 1)] = c64(-1.0, 0.0);
    let net = match spec.variant {
        CoupledVariant::DamperStringBeam => {
            k[(0, 0)] = c64(-spec.kappa, 0.0);
            Network::new(vec![s, b], k)
        }
        CoupledVariant::SpringMassDamperStringBeam => {
            Network::new(vec![s, b], k).with_controller(spring_mass_damper(spec.mass, spec.spring, spec.damping), vec![0])
        }
    };
    Ok(net)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TipMassSpec {
    pub rho: Coefficient,
    pub tension: Coefficient,
    pub mass: f64,
    pub damping: f64,
}

impl Default for TipMassSpec {
    fn default() -> Self {
        TipMassSpec { rho: one(), tension: one(), mass: 1.0, damping: 1.0 }
    }
}

/// A string fixed at the left end whose right end carries a damped point
/// mass, `m v'(1) = -r v(1) - s(1)`. High frequencies see the mass as a
/// fixed end, so damping weakens with frequency: every mode decays, but not
/// at a uniform rate.
pub fn build_tip_mass_string(spec: &TipMassSpec) -> Result<Network, ScenarioError> {
    spec.rho.check_positive("rho")?;
    spec.tension.check_positive("tension")?;
    for (v, what) in [(spec.mass, "mass"), (spec.damping, "damping")] {
        if !(v > 0.0) {
            return Err(ScenarioError::Invalid(format!("{what} must be positive, got {v}")));
        }
    }
    let s = string(&spec.rho, &spec.tension, rows(4, &[&[(V0, 1.0)], &[(V1, -1.0)]]), rows(4, &[&[(S0, -1.0)], &[(S1, -1.0)]]), (0.0, 1.0))?;
    let c = Controller {
        a_c: real_matrix(1, 1, &[-spec.damping / spec.mass]),
        b_c: real_matrix(1, 1, &[1.0 / spec.mass]),
        c_c: real_matrix(1, 1, &[1.0]),
        d_c: CMat::zeros(1, 1),
        state_weight: real_matrix(1, 1, &[spec.mass]),
    };
    Ok(Network::new(vec![s], CMat::zeros(2, 2)).with_controller(c, vec![1]))
}

/// Two stress-free strings whose right ends are joined by a gyrator,
/// `v_1(1) = s_2(1)` and `v_2(1) = -s_1(1)`. Conservative, and each string
/// drives the other, so there is no serial ordering.
pub fn build_gyrator_pair() -> Result<Network, ScenarioError> {
    let mk = || string(&one(), &one(), rows(4, &[&[(S0, -1.0)], &[(V1, 1.0)]]), rows(4, &[&[(V0, 1.0)], &[(S1, 1.0)]]), (0.0, 1.0));
    let mut k = CMat::zeros(4, 4);
    k[(1, 3)] = c64(1.0, 0.0);
    k[(3, 1)] = c64(-1.0, 0.0);
    Ok(Network::new(vec![mk()?, mk()?], k))
}

pub struct ScenarioInfo {
    pub name: &'static str,
    pub description: &'static str,
}

pub const SCENARIOS: &[ScenarioInfo] = &[
    ScenarioInfo { name: "damped_wave", description: "single string damped at the left end, free right end" },
    ScenarioInfo { name: "free_wave", description: "single string with stress-free ends (conservative)" },
    ScenarioInfo { name: "chain", description: "chain of strings, damped at the left end" },
    ScenarioInfo { name: "chain_lipschitz", description: "three-segment chain with spatially varying coefficients" },
    ScenarioInfo { name: "beam_pinned", description: "pinned-pinned Euler-Bernoulli beam (conservative)" },
    ScenarioInfo { name: "beam_damped", description: "beam with a rotational damper at the left end, clamped right end" },
    ScenarioInfo { name: "damper_string_beam", description: "damped string attached to a pinned beam" },
    ScenarioInfo { name: "spring_mass_damper_string_beam", description: "string with a spring-mass-damper at the left end, attached to a pinned beam" },
    ScenarioInfo { name: "tip_mass_string", description: "string with a damped tip mass; decays, but not uniformly" },
    ScenarioInfo { name: "gyrator_pair", description: "two strings joined by a gyrator (no serial ordering)" },
];

fn params<T: for<'de> Deserialize<'de> + Default>(p: &serde_json::Value) -> Result<T, ScenarioError> {
    if p.is_null() {
        Ok(T::default())
    } else {
        Ok(serde_json::from_value(p.clone())?)
    }
}

/// Default parameters of a named scenario, as a JSON object.
pub fn default_params(name: &str) -> Result<serde_json::Value, ScenarioError> {
    let v = match name {
        "damped_wave" => serde_json::to_value(damped_wave_spec())?,
        "free_wave" => serde_json::to_value(FreeWaveSpec::default())?,
        "chain" => serde_json::to_value(ChainOfStringsSpec::default())?,
        "chain_lipschitz" => serde_json::to_value(chain_lipschitz_spec())?,
        "beam_pinned" => serde_json::to_value(beam_pinned_spec())?,
        "beam_damped" => serde_json::to_value(EulerBernoulliSpec::default())?,
        "damper_string_beam" => serde_json::to_value(CoupledSpec::default())?,
        "spring_mass_damper_string_beam" => serde_json::to_value(spring_mass_spec())?,
        "tip_mass_string" => serde_json::to_value(TipMassSpec::default())?,
        "gyrator_pair" => serde_json::json!({}),
        other => return Err(ScenarioError::Unknown(other.into())),
    };
    Ok(v)
}

pub fn damped_wave_spec() -> ChainOfStringsSpec {
    ChainOfStringsSpec { m: 1, kappa: vec![0.5], ..Default::default() }
}

pub fn chain_lipschitz_spec() -> ChainOfStringsSpec {
    ChainOfStringsSpec {
        m: 3,
        rho: vec![Coefficient(vec![1.0, 0.2]), Coefficient(vec![1.2, -0.1]), Coefficient::constant(1.1)],
        tension: vec![Coefficient::constant(1.0), Coefficient(vec![1.0, 0.1]), Coefficient(vec![1.1, -0.1])],
        kappa: vec![0.5, 0.0, 0.0],
        reversed_left_sign: false,
    }
}

pub fn beam_pinned_spec() -> EulerBernoulliSpec {
    EulerBernoulliSpec { left: LeftEnd::Conservative(BeamEnd::Pinned), right: BeamEnd::Pinned, ..Default::default() }
}

pub fn spring_mass_spec() -> CoupledSpec {
    CoupledSpec { variant: CoupledVariant::SpringMassDamperStringBeam, ..Default::default() }
}

/// Builds a named scenario. Missing parameters take their defaults; a null
/// document means all defaults.
pub fn build(name: &str, p: &serde_json::Value) -> Result<Network, ScenarioError> {
    let merged = merge(default_params(name)?, p);
    match name {
        "damped_wave" | "chain" | "chain_lipschitz" => build_chain(&params(&merged)?),
        "free_wave" => build_free_wave(&params(&merged)?),
        "beam_pinned" | "beam_damped" => build_beam(&params(&merged)?),
        "damper_string_beam" | "spring_mass_damper_string_beam" => build_coupled(&params(&merged)?),
        "tip_mass_string" => build_tip_mass_string(&params(&merged)?),
        "gyrator_pair" => build_gyrator_pair(),
        other => Err(ScenarioError::Unknown(other.into())),
    }
}

fn merge(mut base: serde_json::Value, over: &serde_json::Value) -> serde_json::Value {
    if let (Some(b), Some(o)) = (base.as_object_mut(), over.as_object()) {
        for (k, v) in o {
            b.insert(k.clone(), v.clone());
        }
    }
    base
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{certify_network_dissipative, detect_serial_structure, SerialResult};

    #[test]
    fn every_scenario_builds_and_certifies() {
        for info in SCENARIOS {
            let net = build(info.name, &serde_json::Value::Null).unwrap();
            let cert = certify_network_dissipative(&net).unwrap();
            assert!(cert.pass, "{} not certified: margin {}", info.name, cert.margin);
        }
    }

    #[test]
    fn chain_rejects_bad_damping() {
        let spec = ChainOfStringsSpec { kappa: vec![0.0, 0.0, 0.0], ..Default::default() };
        assert!(matches!(build_chain(&spec), Err(ScenarioError::Invalid(_))));
        let spec = ChainOfStringsSpec { kappa: vec![1.0, -0.1, 0.0], ..Default::default() };
        assert!(build_chain(&spec).is_err());
    }

    #[test]
    fn reversed_left_sign_fails_certification() {
        let spec = ChainOfStringsSpec { reversed_left_sign: true, ..Default::default() };
        let cert = certify_network_dissipative(&build_chain(&spec).unwrap()).unwrap();
        assert!(!cert.pass);
    }

    #[test]
    fn chain_k_has_one_negative_direction_per_damped_port() {
        let spec = ChainOfStringsSpec { kappa: vec![1.0, 0.0, 0.0], ..Default::default() };
        let net = build_chain(&spec).unwrap();
        let eig = crate::linalg::hermitian_eig(&crate::linalg::hermitian_part(&net.k_mat));
        let negative = eig.values.iter().filter(|v| **v < -1e-12).count();
        assert_eq!(negative, 1);
        assert!(eig.max() <= 1e-12);
        assert!(certify_network_dissipative(&net).unwrap().pass);
    }

    #[test]
    fn chain_serial_identity_ordering() {
        for m in 1..=4 {
            let spec = ChainOfStringsSpec { m, kappa: std::iter::once(0.5).chain(std::iter::repeat_n(0.2, m - 1)).collect(), ..Default::default() };
            match detect_serial_structure(&build_chain(&spec).unwrap()).unwrap() {
                SerialResult::Serial(s) => {
                    assert_eq!(s.ordering, (0..m).collect::<Vec<_>>());
                    assert!(s.local_feedback.is_empty());
                    assert!(s.verify_ordering(1e-12));
                }
                other => panic!("m = {m}: {other:?}"),
            }
        }
    }

    #[test]
    fn gyrator_pair_is_not_serial() {
        match detect_serial_structure(&build_gyrator_pair().unwrap()).unwrap() {
            SerialResult::NotSerial { cycle } => assert_eq!(cycle, vec![0, 1]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn k0_classes() {
        assert!(check_k0(&[[1.0, 0.0], [0.0, 0.0]]).is_ok());
        assert!(check_k0(&[[2.0, 1.0], [-1.0, 0.5]]).is_ok());
        assert!(check_k0(&[[0.0, 0.0], [0.0, 0.0]]).is_err());
        assert!(check_k0(&[[1.0, 0.0], [0.0, -1.0]]).is_err());
        let spec = EulerBernoulliSpec { left: LeftEnd::Damped { k0: [[0.0, 1.0], [0.0, 0.0]] }, ..Default::default() };
        assert!(build_beam(&spec).is_err());
    }

    #[test]
    fn every_beam_end_is_certified() {
        let ends = [BeamEnd::Pinned, BeamEnd::Free, BeamEnd::ShearHinge, BeamEnd::Clamped, BeamEnd::Bc5, BeamEnd::Bc6];
        for right in ends {
            let damped = EulerBernoulliSpec { left: LeftEnd::Damped { k0: [[2.0, 0.0], [0.0, 1.0]] }, right, ..Default::default() };
            assert!(certify_network_dissipative(&build_beam(&damped).unwrap()).unwrap().pass, "{right:?}");
            for left in ends {
                let spec = EulerBernoulliSpec { left: LeftEnd::Conservative(left), right, ..Default::default() };
                let cert = certify_network_dissipative(&build_beam(&spec).unwrap()).unwrap();
                assert!(cert.pass && cert.margin.abs() < 1e-12, "{left:?} {right:?}");
            }
        }
    }

    #[test]
    fn spring_mass_rejections_and_eigenvalues() {
        let spec = CoupledSpec { damping: 0.0, ..spring_mass_spec() };
        assert!(build_coupled(&spec).is_err());
        let ev = spring_mass_damper(1.0, 1.0, 1.0).eigenvalues();
        let s = 3f64.sqrt() / 2.0;
        assert!((ev[0] - c64(-0.5, s)).norm() < 1e-12);
        assert!((ev[1] - c64(-0.5, -s)).norm() < 1e-12);
    }

    #[test]
    fn params_override_defaults() {
        let net = build("chain", &serde_json::json!({"m": 2, "kappa": [1.0, 0.0]})).unwrap();
        assert_eq!(net.subsystems.len(), 2);
        assert!(build("chain", &serde_json::json!({"bogus": 1})).is_err());
        assert!(matches!(build("nope", &serde_json::Value::Null), Err(ScenarioError::Unknown(_))));
    }

    #[test]
    fn lipschitz_chain_uses_sampled_density() {
        let net = build("chain_lipschitz", &serde_json::Value::Null).unwrap();
        assert_eq!(net.subsystems[0].hamiltonian.kind(), "sampled");
        assert_eq!(net.subsystems[2].hamiltonian.kind(), "sampled");
        let net = build("chain", &serde_json::Value::Null).unwrap();
        assert!(net.subsystems.iter().all(|s| s.hamiltonian.kind() == "constant"));
    }
}

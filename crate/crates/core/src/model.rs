//! Single port-Hamiltonian subsystem: data, structural validation, the
//! boundary trace and the boundary flux form.
//!
//! A subsystem of order `N` and dimension `d` on an interval `(a, b)` is
//!
//! ```text
//!   dx/dt = sum_{k=0..N} P_k d^k/dz^k (H x),    B x = W_B tau,   C x = W_C tau,
//! ```
//!
//! where `tau` stacks the values and derivatives (up to order `N - 1`) of
//! `y = H x` at `z = 1` followed by those at `z = 0`. Internally every
//! subsystem lives on the unit interval: `P_k` is rescaled by `(b - a)^-k`
//! and derivative traces are taken in the normalized coordinate. The energy
//! inner product keeps the physical length as a factor, so that energies of
//! subsystems of different length can be added.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, c64, CMat, CVec, ZERO};

/// Number of uniform points used when sampling coefficient functions.
pub const SAMPLE_POINTS: usize = 256;

const SYMMETRY_TOL: f64 = 1e-12;
const INVERTIBLE_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-12;
const COERCIVITY_MIN: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("order and dimension must be positive (got N={order}, d={dim})")]
    Degenerate { order: usize, dim: usize },
    #[error("{what}: expected {expected:?}, got {got:?}")]
    Shape { what: String, expected: (usize, usize), got: (usize, usize) },
    #[error("expected {expected} coefficient matrices P_0..P_N, got {got}")]
    CoefficientCount { expected: usize, got: usize },
    #[error("interval ({0}, {1}) must be finite with a < b")]
    Interval(f64, f64),
    #[error("invalid coefficient representation: {0}")]
    Representation(String),
    #[error("trace needs {expected} derivative values per endpoint, got {got}")]
    DerivativeCount { expected: usize, got: usize },
}

/// A matrix-valued function of the normalized coordinate `s` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixFunction {
    Constant(CMat),
    /// `F(s) = sum_p C_p s^p`.
    Polynomial(Vec<CMat>),
    /// Piecewise-linear interpolation of samples on a uniform grid of `[0, 1]`.
    Sampled(Vec<CMat>),
}

impl MatrixFunction {
    pub fn zeros(d: usize) -> Self {
        MatrixFunction::Constant(CMat::zeros(d, d))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MatrixFunction::Constant(_) => "constant",
            MatrixFunction::Polynomial(_) => "polynomial",
            MatrixFunction::Sampled(_) => "sampled",
        }
    }

    fn parts(&self) -> &[CMat] {
        match self {
            MatrixFunction::Constant(m) => std::slice::from_ref(m),
            MatrixFunction::Polynomial(c) | MatrixFunction::Sampled(c) => c,
        }
    }

    pub fn check(&self, d: usize, what: &str) -> Result<(), ModelError> {
        let parts = self.parts();
        match self {
            MatrixFunction::Polynomial(c) if c.is_empty() => {
                return Err(ModelError::Representation(format!("{what}: polynomial without coefficients")))
            }
            MatrixFunction::Sampled(c) if c.len() < 2 => {
                return Err(ModelError::Representation(format!("{what}: sampled form needs at least 2 samples")))
            }
            _ => {}
        }
        for m in parts {
            if m.shape() != (d, d) {
                return Err(ModelError::Shape { what: what.to_string(), expected: (d, d), got: m.shape() });
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(ModelError::Representation(format!("{what}: non-finite entry")));
            }
        }
        Ok(())
    }

    pub fn eval(&self, s: f64) -> CMat {
        match self {
            MatrixFunction::Constant(m) => m.clone(),
            MatrixFunction::Polynomial(c) => {
                // Horner
                let mut acc = c[c.len() - 1].clone();
                for p in (0..c.len() - 1).rev() {
                    acc = acc.scale(s) + &c[p];
                }
                acc
            }
            MatrixFunction::Sampled(v) => {
                let n = v.len();
                let x = s.clamp(0.0, 1.0) * (n - 1) as f64;
                let i = (x.floor() as usize).min(n - 2);
                let t = x - i as f64;
                v[i].scale(1.0 - t) + v[i + 1].scale(t)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, MatrixFunction::Constant(_))
    }

    /// Largest finite-difference slope `|F(s_{i+1}) - F(s_i)| / h` (Frobenius
    /// norm) between adjacent samples.
    pub fn lipschitz_surrogate(&self) -> f64 {
        let samples: Vec<CMat> = match self {
            MatrixFunction::Constant(_) => return 0.0,
            MatrixFunction::Sampled(v) => v.clone(),
            MatrixFunction::Polynomial(_) => uniform_grid(SAMPLE_POINTS).iter().map(|&s| self.eval(s)).collect(),
        };
        let h = 1.0 / (samples.len() - 1) as f64;
        samples
            .windows(2)
            .map(|w| linalg::frobenius(&(&w[1] - &w[0])) / h)
            .fold(0.0, f64::max)
    }
}

pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhSubsystem {
    pub order: usize,
    pub dim: usize,
    /// `P_0 .. P_N` on the physical interval. `P_0` is the constant part of
    /// the zeroth order coefficient.
    pub p_matrices: Vec<CMat>,
    /// Optional spatially varying addition to `P_0`.
    pub p0_profile: Option<MatrixFunction>,
    pub hamiltonian: MatrixFunction,
    pub w_b: CMat,
    pub w_c: CMat,
    pub interval: (f64, f64),
}

impl PhSubsystem {
    /// Subsystem on the unit interval without a varying `P_0`.
    pub fn new(
        order: usize,
        dim: usize,
        p_matrices: Vec<CMat>,
        hamiltonian: MatrixFunction,
        w_b: CMat,
        w_c: CMat,
    ) -> Result<Self, ModelError> {
        let s = PhSubsystem { order, dim, p_matrices, p0_profile: None, hamiltonian, w_b, w_c, interval: (0.0, 1.0) };
        s.check_structure()?;
        Ok(s)
    }

    pub fn with_interval(mut self, a: f64, b: f64) -> Result<Self, ModelError> {
        self.interval = (a, b);
        self.check_structure()?;
        Ok(self)
    }

    pub fn with_p0_profile(mut self, f: MatrixFunction) -> Result<Self, ModelError> {
        self.p0_profile = Some(f);
        self.check_structure()?;
        Ok(self)
    }

    /// Shape and representation checks. Failures here are structural errors,
    /// as opposed to invariant failures reported by [`validate_subsystem`].
    pub fn check_structure(&self) -> Result<(), ModelError> {
        let (n, d) = (self.order, self.dim);
        if n == 0 || d == 0 {
            return Err(ModelError::Degenerate { order: n, dim: d });
        }
        if self.p_matrices.len() != n + 1 {
            return Err(ModelError::CoefficientCount { expected: n + 1, got: self.p_matrices.len() });
        }
        for (k, p) in self.p_matrices.iter().enumerate() {
            if p.shape() != (d, d) {
                return Err(ModelError::Shape { what: format!("P_{k}"), expected: (d, d), got: p.shape() });
            }
        }
        self.hamiltonian.check(d, "hamiltonian")?;
        if let Some(f) = &self.p0_profile {
            f.check(d, "p0_profile")?;
        }
        for (w, name) in [(&self.w_b, "w_b"), (&self.w_c, "w_c")] {
            if w.shape() != (n * d, 2 * n * d) {
                return Err(ModelError::Shape { what: name.into(), expected: (n * d, 2 * n * d), got: w.shape() });
            }
        }
        let (a, b) = self.interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(ModelError::Interval(a, b));
        }
        Ok(())
    }

    /// Number of boundary inputs, `N d`.
    pub fn ports(&self) -> usize {
        self.order * self.dim
    }

    /// Length of the boundary trace, `2 N d`.
    pub fn trace_len(&self) -> usize {
        2 * self.order * self.dim
    }

    pub fn length(&self) -> f64 {
        self.interval.1 - self.interval.0
    }

    /// `P_k` on the unit interval, `P_k (b - a)^-k`.
    pub fn scaled_p(&self, k: usize) -> CMat {
        self.p_matrices[k].scale(self.length().powi(-(k as i32)))
    }

    pub fn p0_at(&self, s: f64) -> CMat {
        match &self.p0_profile {
            Some(f) => &self.p_matrices[0] + f.eval(s),
            None => self.p_matrices[0].clone(),
        }
    }

    pub fn h_at(&self, s: f64) -> CMat {
        self.hamiltonian.eval(s)
    }

    pub fn p0_varies(&self) -> bool {
        self.p0_profile.as_ref().is_some_and(|f| !f.is_constant())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantCheck {
    pub name: String,
    pub pass: bool,
    /// Measured quantity; compare against `threshold`.
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub checks: Vec<InvariantCheck>,
    /// Largest finite-difference slope of H, recorded only.
    pub lipschitz_surrogate: f64,
    /// Smallest eigenvalue of H over the sample grid.
    pub coercivity: f64,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&InvariantCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }
}

/// Sample points used for pointwise checks: 256 uniform points plus any
/// extra points (typically the discretization grid).
pub fn sample_points(extra: &[f64]) -> Vec<f64> {
    let mut pts = uniform_grid(SAMPLE_POINTS);
    pts.extend(extra.iter().copied().filter(|s| (0.0..=1.0).contains(s)));
    pts
}

pub fn validate_subsystem(s: &PhSubsystem) -> Result<ValidationReport, ModelError> {
    validate_on_grid(s, &[])
}

pub fn validate_on_grid(s: &PhSubsystem, extra: &[f64]) -> Result<ValidationReport, ModelError> {
    s.check_structure()?;
    let n = s.order;
    let mut checks = Vec::new();

    for k in 1..=n {
        let p = &s.p_matrices[k];
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let dev = linalg::max_abs(&(p.adjoint() - p.scale(sign)));
        let scale = linalg::max_abs(p);
        let rel = if scale > 0.0 { dev / scale } else { 0.0 };
        checks.push(InvariantCheck { name: format!("symmetry_p{k}"), pass: rel <= SYMMETRY_TOL, value: rel, threshold: SYMMETRY_TOL });
    }

    let sv = linalg::singular_values(&s.p_matrices[n]);
    let ratio = sv_ratio(&sv);
    checks.push(InvariantCheck { name: "p_n_invertible".into(), pass: ratio > INVERTIBLE_TOL, value: ratio, threshold: INVERTIBLE_TOL });

    let stacked = linalg::vstack(&[&s.w_b, &s.w_c]);
    let ratio = sv_ratio(&linalg::singular_values(&stacked));
    checks.push(InvariantCheck { name: "boundary_maps_invertible".into(), pass: ratio > INVERTIBLE_TOL, value: ratio, threshold: INVERTIBLE_TOL });

    let mut herm_dev: f64 = 0.0;
    let mut coercivity = f64::INFINITY;
    for z in sample_points(extra) {
        let h = s.h_at(z);
        let scale = linalg::max_abs(&h).max(f64::MIN_POSITIVE);
        herm_dev = herm_dev.max(linalg::max_abs(&(h.adjoint() - &h)) / scale);
        coercivity = coercivity.min(linalg::hermitian_eig(&h).min());
    }
    checks.push(InvariantCheck { name: "h_hermitian".into(), pass: herm_dev <= HERMITIAN_TOL, value: herm_dev, threshold: HERMITIAN_TOL });
    checks.push(InvariantCheck { name: "h_coercive".into(), pass: coercivity >= COERCIVITY_MIN, value: coercivity, threshold: COERCIVITY_MIN });

    Ok(ValidationReport {
        pass: checks.iter().all(|c| c.pass),
        checks,
        lipschitz_surrogate: s.hamiltonian.lipschitz_surrogate(),
        coercivity,
    })
}

fn sv_ratio(sv: &[f64]) -> f64 {
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Zero,
    One,
}

/// `tau(y)` for a single subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub order: usize,
    pub dim: usize,
    pub values: CVec,
}

impl BoundaryTrace {
    /// Position of component `comp` of `y^(deriv)` at `end` in the trace vector.
    pub fn index(order: usize, dim: usize, end: End, deriv: usize, comp: usize) -> usize {
        let block = match end {
            End::One => deriv,
            End::Zero => order + deriv,
        };
        block * dim + comp
    }

    pub fn get(&self, end: End, deriv: usize, comp: usize) -> crate::linalg::C64 {
        self.values[Self::index(self.order, self.dim, end, deriv, comp)]
    }
}

/// Values and derivatives `y, y', .., y^(N-1)` of `y = H x` at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointJets {
    pub at_zero: Vec<CVec>,
    pub at_one: Vec<CVec>,
}

pub fn trace(order: usize, dim: usize, jets: &EndpointJets) -> Result<BoundaryTrace, ModelError> {
    for side in [&jets.at_zero, &jets.at_one] {
        if side.len() != order {
            return Err(ModelError::DerivativeCount { expected: order, got: side.len() });
        }
        for v in side {
            if v.len() != dim {
                return Err(ModelError::Shape { what: "jet".into(), expected: (dim, 1), got: (v.len(), 1) });
            }
        }
    }
    let mut values = CVec::zeros(2 * order * dim);
    for a in 0..order {
        for c in 0..dim {
            values[BoundaryTrace::index(order, dim, End::One, a, c)] = jets.at_one[a][c];
            values[BoundaryTrace::index(order, dim, End::Zero, a, c)] = jets.at_zero[a][c];
        }
    }
    Ok(BoundaryTrace { order, dim, values })
}

/// Hermitian `Q` with `Re <A x, x> = 1/2 tau* Q tau + int Re <P_0 y, y>`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxForm {
    pub q: CMat,
}

impl FluxForm {
    pub fn eval(&self, tau: &CVec) -> f64 {
        0.5 * linalg::quad_form(&self.q, tau)
    }
}

/// Boundary flux form by repeated integration by parts. For each `k` the
/// identity `2 Re int y* P_k y^(k) = sum_i (-1)^i [y^(i)* P_k y^(k-1-i)]_0^1`
/// holds because `P_k* = (-1)^(k+1) P_k`.
pub fn flux_form(s: &PhSubsystem) -> FluxForm {
    let (n, d) = (s.order, s.dim);
    let len = s.length();
    let mut q = CMat::from_element(2 * n * d, 2 * n * d, ZERO);
    for k in 1..=n {
        let p = s.scaled_p(k).scale(len);
        for i in 0..k {
            let j = k - 1 - i;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let mut add = |row: usize, col: usize, f: f64| {
                let mut blk = q.view_mut((row * d, col * d), (d, d));
                blk += p.scale(f);
            };
            add(i, j, sign);
            add(n + i, n + j, -sign);
        }
    }
    FluxForm { q: linalg::hermitian_part(&q) }
}

/// Unit vector of length `len` with a one at `i`.
pub fn unit(len: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(len);
    v[i] = c64(1.0, 0.0);
    v
}

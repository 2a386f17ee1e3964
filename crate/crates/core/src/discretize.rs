//! Collocation of each subsystem on Legendre-Gauss-Lobatto points and
//! reduction of the constrained network generator to a matrix pair.
//!
//! With `n` Lobatto points the quadrature is exact for polynomials of degree
//! `2n - 3`, so the discrete integration by parts
//! `Re <L x, x>_M = 1/2 tau* Q tau + (P_0 term)` holds exactly for every
//! sample vector. A modal filter that damps only the upper half of the
//! Legendre spectrum removes unresolved, nearly undamped collocation modes
//! without touching resolved ones; its contribution to the energy balance is
//! an explicit negative semidefinite form.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::{self, c64, CMat, CVec, ONE, ZERO};
use crate::model::PhSubsystem;
use crate::network::{self, ClosedLoop, Network, NetworkError};
use crate::passivity::{self, NULL_TOL};

#[derive(Debug, Error)]
pub enum DiscretizeError {
    #[error("subsystem {index}: n = {n} is below the minimum {min} (4N + 4)")]
    TooFewPoints { index: usize, n: usize, min: usize },
    #[error("expected {expected} point counts, got {got}")]
    PointCount { expected: usize, got: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("constraint rows are rank deficient: {0}")]
    RankDeficient(String),
    #[error("the constrained space is trivial")]
    EmptyKernel,
    #[error("reduced Gram matrix is not positive definite")]
    NotPositiveDefinite,
}

/// Modal filter `F = V diag(q_k) V^-1` acting on Legendre coefficients, with
/// `q_k = ((k - m_c) / (n - 1 - m_c))^order` above the cutoff degree `m_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    /// Cutoff degree as a fraction of the top degree `n - 1`.
    pub cutoff: f64,
    pub order: i32,
    /// Strength of the filter term; `None` means `n / 8`.
    pub strength: Option<f64>,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec { cutoff: 0.5, order: 2, strength: None }
    }
}

impl FilterSpec {
    pub fn strength_for(&self, n: usize) -> f64 {
        self.strength.unwrap_or(n as f64 / 8.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizationOptions {
    pub filter: Option<FilterSpec>,
}

impl Default for DiscretizationOptions {
    fn default() -> Self {
        DiscretizationOptions { filter: Some(FilterSpec::default()) }
    }
}

impl DiscretizationOptions {
    pub fn unfiltered() -> Self {
        DiscretizationOptions { filter: None }
    }
}

/// Legendre-Gauss-Lobatto grid on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct SubsystemGrid {
    pub n: usize,
    /// Ascending nodes, `points[0] = 0`, `points[n-1] = 1`.
    pub points: Vec<f64>,
    pub diff: DMatrix<f64>,
    /// Quadrature weights, summing to one.
    pub quad: Vec<f64>,
    /// `vandermonde[(i, k)] = P_k(2 z_i - 1)`.
    pub vandermonde: DMatrix<f64>,
    /// Discrete norms `sum_i w_i P_k(2 z_i - 1)^2`.
    pub gammas: Vec<f64>,
}

fn legendre_all(x: f64, n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n.max(2)];
    p[0] = 1.0;
    p[1] = x;
    for k in 1..n.saturating_sub(1) {
        p[k + 1] = ((2 * k + 1) as f64 * x * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
    }
    p.truncate(n);
    p
}

impl SubsystemGrid {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "need at least two points");
        let deg = n - 1;
        // Newton iteration on (1 - x^2) P'_deg, started from Chebyshev points
        let mut x: Vec<f64> = (0..n).map(|i| -(std::f64::consts::PI * i as f64 / deg as f64).cos()).collect();
        for _ in 0..100 {
            let mut change: f64 = 0.0;
            for xi in x.iter_mut() {
                let p = legendre_all(*xi, n + 1);
                let (pn, pm) = (p[deg], p[deg - 1]);
                let step = (*xi * pn - pm) / (n as f64 * pn);
                *xi -= step;
                change = change.max(step.abs());
            }
            if change < 1e-16 {
                break;
            }
        }
        x[0] = -1.0;
        x[deg] = 1.0;
        let w_ref: Vec<f64> = x
            .iter()
            .map(|&xi| {
                let pn = legendre_all(xi, n)[deg];
                2.0 / (deg as f64 * n as f64 * pn * pn)
            })
            .collect();
        let points: Vec<f64> = x.iter().map(|xi| 0.5 * (xi + 1.0)).collect();
        let quad: Vec<f64> = w_ref.iter().map(|w| 0.5 * w).collect();

        // barycentric differentiation on [0, 1]
        let lam: Vec<f64> = (0..n)
            .map(|j| {
                let prod: f64 = (0..n).filter(|&k| k != j).map(|k| points[j] - points[k]).product();
                1.0 / prod
            })
            .collect();
        let mut diff = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut row_sum = 0.0;
            for j in 0..n {
                if i != j {
                    let v = (lam[j] / lam[i]) / (points[i] - points[j]);
                    diff[(i, j)] = v;
                    row_sum += v;
                }
            }
            diff[(i, i)] = -row_sum;
        }

        let vandermonde = DMatrix::from_fn(n, n, |i, k| legendre_all(x[i], n)[k]);
        let gammas = (0..n).map(|k| (0..n).map(|i| quad[i] * vandermonde[(i, k)].powi(2)).sum()).collect();
        SubsystemGrid { n, points, diff, quad, vandermonde, gammas }
    }

    /// Cutoff degree `m_c = floor(cutoff * (n - 1))`.
    pub fn cutoff_degree(&self, spec: &FilterSpec) -> usize {
        ((spec.cutoff * (self.n - 1) as f64).floor() as usize).min(self.n - 2)
    }

    /// `W F` for the modal filter: symmetric positive semidefinite.
    pub fn filter_gram(&self, spec: &FilterSpec) -> DMatrix<f64> {
        let n = self.n;
        let mc = self.cutoff_degree(spec);
        let span = (n - 1 - mc) as f64;
        let q: Vec<f64> = (0..n)
            .map(|k| if k <= mc { 0.0 } else { ((k - mc) as f64 / span).powi(spec.order) })
            .collect();
        // W V diag(q / gamma) V^T W
        let wv = DMatrix::from_fn(n, n, |i, k| self.quad[i] * self.vandermonde[(i, k)]);
        let scaled = DMatrix::from_fn(n, n, |i, k| wv[(i, k)] * q[k] / self.gammas[k]);
        let g = &scaled * wv.transpose();
        (&g + g.transpose()) * 0.5
    }

    /// `F` itself, `W^-1 (W F)`.
    pub fn filter_matrix(&self, spec: &FilterSpec) -> DMatrix<f64> {
        let g = self.filter_gram(spec);
        DMatrix::from_fn(self.n, self.n, |i, j| g[(i, j)] / self.quad[i])
    }
}

fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|v| c64(v, 0.0))
}

/// Discrete operator, Gram matrix and trace rows of one subsystem on `x`
/// samples ordered point-major (`x[i * d + c]`).
#[derive(Debug, Clone)]
pub struct SubsystemDiscretization {
    pub grid: SubsystemGrid,
    pub l: CMat,
    pub m: CMat,
    /// Rows computing `tau(H x)`.
    pub t: CMat,
    /// `H` samples as a block-diagonal matrix.
    pub hd: CMat,
    /// Hermitian form with `x* S x = length * (P_0 quadrature term - filter term)`.
    pub sym: CMat,
    /// Hermitian form with `x* G x = length * y* (W F_unit (x) I) y`, the
    /// filter energy with unit strength and the default profile when no
    /// filter is active.
    pub filter_energy: CMat,
}

pub fn discretize_subsystem(s: &PhSubsystem, n: usize) -> Result<SubsystemDiscretization, DiscretizeError> {
    discretize_subsystem_with(s, n, &DiscretizationOptions::default())
}

pub fn discretize_subsystem_with(s: &PhSubsystem, n: usize, opts: &DiscretizationOptions) -> Result<SubsystemDiscretization, DiscretizeError> {
    let min = 4 * s.order + 4;
    if n < min {
        return Err(DiscretizeError::TooFewPoints { index: 0, n, min });
    }
    let grid = SubsystemGrid::new(n);
    let d = s.dim;
    let nd = n * d;
    let len = s.length();
    let eye_d = CMat::identity(d, d);

    let mut hd = CMat::zeros(nd, nd);
    let mut p0d = CMat::zeros(nd, nd);
    let mut p0sym = CMat::zeros(nd, nd);
    for (i, &z) in grid.points.iter().enumerate() {
        hd.view_mut((i * d, i * d), (d, d)).copy_from(&s.h_at(z));
        let p0 = s.p0_at(z);
        p0sym.view_mut((i * d, i * d), (d, d)).copy_from(&linalg::hermitian_part(&p0).scale(grid.quad[i]));
        p0d.view_mut((i * d, i * d), (d, d)).copy_from(&p0);
    }
    let dpow = linalg::powers(&to_complex(&grid.diff), s.order);

    let mut op = p0d;
    for k in 1..=s.order {
        op += linalg::kron(&dpow[k], &s.scaled_p(k));
    }
    let unit_spec = opts.filter.unwrap_or_default();
    let filter_gram = linalg::kron(&to_complex(&grid.filter_gram(&unit_spec)), &eye_d);
    let mut sym_inner = p0sym;
    if let Some(spec) = &opts.filter {
        let strength = spec.strength_for(n);
        op -= linalg::kron(&to_complex(&grid.filter_matrix(spec)), &eye_d).scale(strength);
        sym_inner -= filter_gram.scale(strength);
    }
    let l = &op * &hd;

    let mut m = CMat::zeros(nd, nd);
    for (i, &z) in grid.points.iter().enumerate() {
        m.view_mut((i * d, i * d), (d, d)).copy_from(&s.h_at(z).scale(len * grid.quad[i]));
    }
    let m = linalg::hermitian_part(&m);

    let order = s.order;
    let mut t = CMat::zeros(2 * order * d, nd);
    for a in 0..order {
        for (block, row) in [(a, n - 1), (order + a, 0)] {
            let sel = CMat::from_fn(1, n, |_, j| dpow[a][(row, j)]);
            t.view_mut((block * d, 0), (d, nd)).copy_from(&(linalg::kron(&sel, &eye_d) * &hd));
        }
    }

    let sym = linalg::hermitian_part(&(hd.adjoint() * sym_inner * &hd).scale(len));
    let filter_energy = linalg::hermitian_part(&(hd.adjoint() * filter_gram * &hd).scale(len));
    Ok(SubsystemDiscretization { grid, l, m, t, hd, sym, filter_energy })
}

#[derive(Debug, Clone)]
pub struct GeneratorMeta {
    /// Start of each subsystem's samples in the full state, then the start of
    /// the controller states, then the total size.
    pub state_offsets: Vec<usize>,
    pub grids: Vec<SubsystemGrid>,
    pub orders: Vec<usize>,
    pub dims: Vec<usize>,
    /// Stacked trace rows over the full state (`2 sum N_j d_j` rows).
    pub traces: CMat,
    pub trace_offsets: Vec<usize>,
    pub closed_loop: ClosedLoop,
    pub l_full: CMat,
    pub m_full: CMat,
    pub constraint: CMat,
    /// Unit filter energy over the full state, used to tell resolved modes
    /// from unresolved ones.
    pub filter_energy: CMat,
    /// Hermitian `P_0` plus filter form over the full state.
    pub sym_full: CMat,
    pub options: DiscretizationOptions,
}

impl GeneratorMeta {
    pub fn subsystems(&self) -> usize {
        self.grids.len()
    }

    pub fn full_len(&self) -> usize {
        *self.state_offsets.last().unwrap()
    }

    pub fn state_range(&self, j: usize) -> std::ops::Range<usize> {
        self.state_offsets[j]..self.state_offsets[j + 1]
    }

    pub fn controller_range(&self) -> std::ops::Range<usize> {
        self.state_offsets[self.subsystems()]..self.full_len()
    }

    /// Trace rows of subsystem `j` over the full state.
    pub fn trace_rows(&self, j: usize) -> CMat {
        let (a, b) = (self.trace_offsets[j], self.trace_offsets[j + 1]);
        self.traces.rows(a, b - a).into_owned()
    }
}

/// Constrained network generator reduced to the constraint null space.
///
/// With `x = lift y`, the reduced dynamics are `m_red dy/dt = (m_red a_red) y`.
/// Writing `m_red = R* R` and `u = R y` gives the energy frame, where
/// `du/dt = a_sim u` and the energy is `|u|^2 / 2`.
#[derive(Debug, Clone)]
pub struct DiscreteGenerator {
    pub a_red: CMat,
    pub m_red: CMat,
    pub lift: CMat,
    pub energy_factor: CMat,
    pub a_sim: CMat,
    pub meta: GeneratorMeta,
    pub certified: bool,
    /// Largest eigenvalue of the Hermitian part of `a_sim`.
    pub dissipativity_defect: f64,
    /// Relative mismatch between the assembled Hermitian part and the
    /// exact boundary/interior energy balance it replaces.
    pub energy_identity_defect: f64,
}

pub fn assemble_generator(net: &Network, n_per_subsystem: &[usize]) -> Result<DiscreteGenerator, DiscretizeError> {
    assemble_generator_with(net, n_per_subsystem, &DiscretizationOptions::default())
}

pub fn assemble_generator_with(net: &Network, n_per_subsystem: &[usize], opts: &DiscretizationOptions) -> Result<DiscreteGenerator, DiscretizeError> {
    let cl = network::assemble(net)?;
    let m = net.subsystems.len();
    if n_per_subsystem.len() != m {
        return Err(DiscretizeError::PointCount { expected: m, got: n_per_subsystem.len() });
    }
    let mut parts = Vec::with_capacity(m);
    for (index, (s, &n)) in net.subsystems.iter().zip(n_per_subsystem).enumerate() {
        let part = discretize_subsystem_with(s, n, opts).map_err(|e| match e {
            DiscretizeError::TooFewPoints { n, min, .. } => DiscretizeError::TooFewPoints { index, n, min },
            other => other,
        })?;
        parts.push(part);
    }
    let nc = cl.controller_states();
    let mut state_offsets = vec![0];
    for p in &parts {
        state_offsets.push(state_offsets.last().unwrap() + p.l.nrows());
    }
    let nx = *state_offsets.last().unwrap();
    state_offsets.push(nx + nc);
    let nf = nx + nc;

    let traces_x = linalg::block_diag(&parts.iter().map(|p| p.t.clone()).collect::<Vec<_>>());
    let mut traces = CMat::zeros(traces_x.nrows(), nf);
    traces.view_mut((0, 0), traces_x.shape()).copy_from(&traces_x);

    let mut l_full = CMat::zeros(nf, nf);
    let mut m_full = CMat::zeros(nf, nf);
    let mut sym_full = CMat::zeros(nf, nf);
    let mut filter_energy = CMat::zeros(nf, nf);
    for (j, p) in parts.iter().enumerate() {
        let o = state_offsets[j];
        l_full.view_mut((o, o), p.l.shape()).copy_from(&p.l);
        m_full.view_mut((o, o), p.m.shape()).copy_from(&p.m);
        sym_full.view_mut((o, o), p.sym.shape()).copy_from(&p.sym);
        filter_energy.view_mut((o, o), p.filter_energy.shape()).copy_from(&p.filter_energy);
    }
    if nc > 0 {
        l_full.view_mut((nx, 0), (nc, nx)).copy_from(&(&cl.controller_input * &traces_x));
        l_full.view_mut((nx, nx), (nc, nc)).copy_from(&cl.a_c);
        m_full.view_mut((nx, nx), (nc, nc)).copy_from(&cl.state_weight);
    }

    let constraint = linalg::hstack(&[&(&cl.w_b_net * &traces_x), &cl.c_c_net]);
    let (z, rank) = linalg::null_space(&constraint, NULL_TOL);
    if rank < cl.constraint_count() {
        return Err(DiscretizeError::RankDeficient(offending_block(&constraint, &cl)));
    }
    if z.ncols() == 0 {
        return Err(DiscretizeError::EmptyKernel);
    }

    let m_red = linalg::hermitian_part(&(z.adjoint() * &m_full * &z));
    let chol = m_red.clone().cholesky().ok_or(DiscretizeError::NotPositiveDefinite)?;
    let r = chol.l().adjoint();
    let r_inv = r.clone().try_inverse().ok_or(DiscretizeError::NotPositiveDefinite)?;

    let x = z.adjoint() * &m_full * &l_full * &z;
    let x_herm = linalg::hermitian_part(&x);
    let x_skew = (&x - x.adjoint()).scale(0.5);

    // exact energy balance in (tau, x_c) coordinates
    let form = cl.dissipation_form();
    let (basis, _) = linalg::null_space(&cl.constraint(), NULL_TOL);
    let cert = passivity::certify_on_kernel(passivity::CertificateKind::Network, &form, &cl.constraint(), linalg::spectral_norm(&form), None);
    let certified = network::certify_closed_loop(net, &cl).pass;
    let mut f_n = linalg::hermitian_part(&(basis.adjoint() * &form * &basis));
    if cert.pass {
        let eig = linalg::hermitian_eig(&f_n);
        let clipped: Vec<f64> = eig.values.iter().map(|&v| if v < -cert.tolerance { v } else { 0.0 }).collect();
        f_n = &eig.vectors * linalg::diag_real(&clipped) * eig.vectors.adjoint();
    }
    let mut embed = CMat::zeros(traces_x.nrows() + nc, nf);
    embed.view_mut((0, 0), traces_x.shape()).copy_from(&traces_x);
    for i in 0..nc {
        embed[(traces_x.nrows() + i, nx + i)] = ONE;
    }
    let phi = basis.adjoint() * embed * &z;
    let sym = linalg::hermitian_part(&(phi.adjoint() * f_n * &phi + z.adjoint() * &sym_full * &z));
    let energy_identity_defect = linalg::max_abs(&(&sym - &x_herm)) / linalg::max_abs(&x).max(f64::MIN_POSITIVE);

    let c_skew = r_inv.adjoint() * &x_skew * &r_inv;
    let c_herm = r_inv.adjoint() * &sym * &r_inv;
    let a_sim = (&c_skew - c_skew.adjoint()).scale(0.5) + linalg::hermitian_part(&c_herm);
    let a_red = &r_inv * &a_sim * &r;
    let dissipativity_defect = linalg::hermitian_eig(&a_sim).max();

    Ok(DiscreteGenerator {
        a_red,
        m_red,
        lift: z,
        energy_factor: r,
        a_sim,
        meta: GeneratorMeta {
            state_offsets,
            grids: parts.iter().map(|p| p.grid.clone()).collect(),
            orders: net.subsystems.iter().map(|s| s.order).collect(),
            dims: net.subsystems.iter().map(|s| s.dim).collect(),
            traces,
            trace_offsets: cl.trace_offsets.clone(),
            closed_loop: cl,
            l_full,
            m_full,
            constraint,
            filter_energy,
            sym_full,
            options: *opts,
        },
        certified,
        dissipativity_defect,
        energy_identity_defect,
    })
}

fn offending_block(g: &CMat, cl: &ClosedLoop) -> String {
    for j in 0..cl.port_offsets.len() - 1 {
        let (a, b) = (cl.port_offsets[j], cl.port_offsets[j + 1]);
        let rows = g.rows(a, b - a).into_owned();
        let (_, rank) = linalg::null_space(&rows, NULL_TOL);
        if rank < b - a {
            return format!("rows of subsystem {j} (ports {a}..{b}) have rank {rank} < {}", b - a);
        }
    }
    "rows of different subsystems are linearly dependent".into()
}

impl DiscreteGenerator {
    pub fn dim(&self) -> usize {
        self.a_sim.nrows()
    }

    /// `R^-1`, mapping energy coordinates to reduced coordinates.
    pub fn energy_factor_inverse(&self) -> CMat {
        self.energy_factor.clone().try_inverse().expect("energy factor is invertible")
    }

    /// Full sample vector from energy coordinates.
    pub fn lift_energy(&self, u: &CVec) -> CVec {
        let y = self.energy_factor.solve_upper_triangular(u).expect("energy factor is invertible");
        &self.lift * y
    }

    /// Energy-norm projection of a full sample vector onto the constrained
    /// space. Returns the energy coordinates and the relative residual.
    pub fn project(&self, x: &CVec) -> (CVec, f64) {
        let rhs = self.lift.adjoint() * (&self.meta.m_full * x);
        let y = self.m_red.clone().cholesky().expect("m_red is positive definite").solve(&rhs);
        let back = &self.lift * &y;
        let diff = x - &back;
        let norm = linalg::quad_form(&self.meta.m_full, x).max(0.0).sqrt();
        let residual = if norm > 0.0 { linalg::quad_form(&self.meta.m_full, &diff).max(0.0).sqrt() / norm } else { 0.0 };
        (&self.energy_factor * y, residual)
    }

    /// `1/2 x* M x` of a full sample vector.
    pub fn energy_of_full(&self, x: &CVec) -> f64 {
        0.5 * linalg::quad_form(&self.meta.m_full, x)
    }

    /// Trace rows composed with the lift, acting on energy coordinates.
    pub fn trace_map(&self) -> CMat {
        &self.meta.traces * &self.lift * self.energy_factor_inverse()
    }

    /// Generator in the energy frame written as a sparse-free text matrix.
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::from("%%MatrixMarket matrix array complex general\n");
        let m = &self.a_sim;
        out.push_str(&format!("{} {}\n", m.nrows(), m.ncols()));
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                out.push_str(&format!("{:e} {:e}\n", m[(i, j)].re, m[(i, j)].im));
            }
        }
        out
    }
}

/// Samples `f(z)` on a grid, point-major.
pub fn sample_on_grid(grid: &SubsystemGrid, d: usize, f: impl Fn(f64) -> Vec<f64>) -> CVec {
    let mut v = CVec::from_element(grid.n * d, ZERO);
    for (i, &z) in grid.points.iter().enumerate() {
        let vals = f(z);
        for c in 0..d {
            v[i * d + c] = c64(vals.get(c).copied().unwrap_or(0.0), 0.0);
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, real_matrix};
    use crate::model::MatrixFunction;

    fn wave(k: f64) -> (PhSubsystem, CMat) {
        let p1 = real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let w_b = real_matrix(2, 4, &[0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0]);
        let w_c = real_matrix(2, 4, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let s = PhSubsystem::new(1, 2, vec![CMat::zeros(2, 2), p1], MatrixFunction::Constant(CMat::identity(2, 2)), w_b, w_c).unwrap();
        (s, real_matrix(2, 2, &[-k, 0.0, 0.0, 0.0]))
    }

    #[test]
    fn lgl_grid_basics() {
        for n in [8, 17, 48] {
            let g = SubsystemGrid::new(n);
            assert!((g.quad.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert_eq!(g.points[0], 0.0);
            assert_eq!(g.points[n - 1], 1.0);
            assert!(g.points.windows(2).all(|w| w[0] < w[1]));
            for p in 1..=5 {
                let f: Vec<f64> = g.points.iter().map(|z| z.powi(p)).collect();
                let df = &g.diff * DMatrix::from_column_slice(n, 1, &f);
                for (i, z) in g.points.iter().enumerate() {
                    assert!((df[i] - p as f64 * z.powi(p - 1)).abs() < 1e-10, "n={n} p={p}");
                }
            }
        }
    }

    #[test]
    fn lgl_quadrature_degree() {
        let n = 12;
        let g = SubsystemGrid::new(n);
        for p in 0..=(2 * n - 3) {
            let q: f64 = g.points.iter().zip(&g.quad).map(|(z, w)| w * z.powi(p as i32)).sum();
            assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "degree {p}");
        }
    }

    #[test]
    fn filter_keeps_low_modes() {
        let g = SubsystemGrid::new(24);
        let spec = FilterSpec::default();
        let f = g.filter_matrix(&spec);
        // a degree-10 polynomial is below the cutoff degree 11
        let v: Vec<f64> = g.points.iter().map(|z| (3.0 * z).sin() * 0.0 + z.powi(10) - 0.3 * z.powi(4)).collect();
        let out = &f * DMatrix::from_column_slice(24, 1, &v);
        assert!(out.norm() < 1e-9);
        let gram = g.filter_gram(&spec);
        assert!(gram.clone().symmetric_eigen().eigenvalues.iter().all(|&e| e > -1e-13));
    }

    #[test]
    fn single_first_order_is_derivative() {
        let s = PhSubsystem::new(
            1,
            1,
            vec![CMat::zeros(1, 1), diag_real(&[1.0])],
            MatrixFunction::Constant(diag_real(&[1.0])),
            real_matrix(1, 2, &[0.0, 1.0]),
            real_matrix(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        let d = discretize_subsystem_with(&s, 10, &DiscretizationOptions::unfiltered()).unwrap();
        assert!(linalg::max_abs(&(d.l - to_complex(&d.grid.diff))) < 1e-14);
    }

    #[test]
    fn mass_is_linear_in_h() {
        let (mut s, _) = wave(0.0);
        let m1 = discretize_subsystem(&s, 16).unwrap().m;
        s.hamiltonian = MatrixFunction::Constant(diag_real(&[2.0, 2.0]));
        let m2 = discretize_subsystem(&s, 16).unwrap().m;
        assert!(linalg::max_abs(&(m2 - m1.scale(2.0))) < 1e-15);
    }

    #[test]
    fn sine_energy() {
        let (s, _) = wave(0.0);
        let d = discretize_subsystem(&s, 32).unwrap();
        let x = sample_on_grid(&d.grid, 2, |z| vec![(std::f64::consts::PI * z).sin(), 0.0]);
        assert!((linalg::quad_form(&d.m, &x) - 0.5).abs() < 1e-8);
    }

    #[test]
    fn too_few_points() {
        let (s, _) = wave(0.0);
        assert!(matches!(discretize_subsystem(&s, 7), Err(DiscretizeError::TooFewPoints { min: 8, .. })));
    }

    #[test]
    fn discrete_energy_balance_is_exact() {
        let (s, _) = wave(0.0);
        let s = s.with_p0_profile(MatrixFunction::Polynomial(vec![diag_real(&[-0.5, 0.0]), diag_real(&[0.0, -1.0])])).unwrap();
        let s = PhSubsystem { hamiltonian: MatrixFunction::Polynomial(vec![diag_real(&[1.0, 2.0]), diag_real(&[0.5, -0.5])]), ..s };
        let q = crate::model::flux_form(&s);
        for n in [16, 32] {
            let d = discretize_subsystem_with(&s, n, &DiscretizationOptions::unfiltered()).unwrap();
            let x = CVec::from_fn(2 * n, |i, _| c64((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()));
            let lhs = d.m.clone() * (&d.l * &x);
            let lhs = x.dotc(&lhs).re;
            let rhs = q.eval(&(&d.t * &x)) + linalg::quad_form(&d.sym, &x);
            assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()), "n={n}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn reduced_generator_structure() {
        let (s, k) = wave(0.5);
        let net = Network::new(vec![s], k);
        let g = assemble_generator(&net, &[24]).unwrap();
        assert!(g.certified);
        assert!(linalg::max_abs(&(&g.meta.constraint * &g.lift)) < 1e-10 * linalg::max_abs(&g.meta.constraint));
        assert!(g.dissipativity_defect <= 1e-12);
        assert!(g.energy_identity_defect < 1e-10);
        // reduced and congruence forms are similar
        let lhs = &g.m_red * &g.a_red;
        let rhs = g.energy_factor.adjoint() * &g.a_sim * &g.energy_factor;
        assert!(linalg::max_abs(&(lhs - rhs)) < 1e-8 * linalg::max_abs(&g.a_sim));
    }

    #[test]
    fn projection_of_compatible_state() {
        let (s, k) = wave(0.5);
        let g = assemble_generator(&Network::new(vec![s], k), &[24]).unwrap();
        let x = sample_on_grid(&g.meta.grids[0], 2, |z| vec![(std::f64::consts::PI * z).sin(), 0.0]);
        let (u, res) = g.project(&x);
        assert!(res < 1e-12);
        assert!((0.5 * u.norm_squared() - g.energy_of_full(&x)).abs() < 1e-12);
        assert!((g.lift_energy(&u) - x).norm() < 1e-10);
        // an incompatible state leaves a residual
        let x = sample_on_grid(&g.meta.grids[0], 2, |_| vec![0.0, 1.0]);
        assert!(g.project(&x).1 > 1e-3);
    }
}

//! Networks of subsystems closed by a static interconnection matrix and
//! finite-dimensional linear controllers.
//!
//! Ports of all subsystems are stacked in subsystem order, giving global
//! vectors `B x` and `C x` of length `P = sum_j N_j d_j`. The closure is
//!
//! ```text
//!   B x = K C x - S^T (C_c x_c + D_c S C x),     dx_c/dt = A_c x_c + B_c S C x,
//! ```
//!
//! where `S` selects the ports each controller is attached to.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, c64, CMat, C64};
use crate::model::{self, ModelError, PhSubsystem};
use crate::passivity::{self, CertificateKind, PassivityCertificate, NULL_TOL};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("subsystem {index}: {source}")]
    Model {
        index: usize,
        #[source]
        source: ModelError,
    },
    #[error("subsystem {index} fails validation: {failures:?}")]
    InvalidSubsystem { index: usize, failures: Vec<String> },
    #[error("controller {index}: {message}")]
    Controller { index: usize, message: String },
    #[error("k_mat must be {expected}x{expected}, got {got:?}")]
    KShape { expected: usize, got: (usize, usize) },
    #[error("coupling: {0}")]
    Coupling(String),
    #[error("external port {port} out of range (network has {ports} ports)")]
    ExternalPort { port: usize, ports: usize },
    #[error("serial block partition: {0}")]
    SerialBlocks(String),
}

/// `dx/dt = A x + B u`, `y = C x + D u` with state inner product `<x, W x>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub a_c: CMat,
    pub b_c: CMat,
    pub c_c: CMat,
    pub d_c: CMat,
    pub state_weight: CMat,
}

impl Controller {
    pub fn states(&self) -> usize {
        self.a_c.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.d_c.nrows()
    }

    pub fn check(&self) -> Result<(), String> {
        let n = self.a_c.nrows();
        let m = self.d_c.nrows();
        let shapes = [
            ("a_c", self.a_c.shape(), (n, n)),
            ("b_c", self.b_c.shape(), (n, m)),
            ("c_c", self.c_c.shape(), (m, n)),
            ("d_c", self.d_c.shape(), (m, m)),
            ("state_weight", self.state_weight.shape(), (n, n)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(format!("{name} has shape {got:?}, expected {want:?}"));
            }
        }
        let w = &self.state_weight;
        let scale = linalg::max_abs(w).max(f64::MIN_POSITIVE);
        if linalg::max_abs(&(w.adjoint() - w)) > 1e-12 * scale {
            return Err("state_weight is not Hermitian".into());
        }
        if n > 0 && linalg::hermitian_eig(w).min() <= 1e-12 * scale {
            return Err("state_weight is not positive definite".into());
        }
        Ok(())
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        if self.states() == 0 {
            return Vec::new();
        }
        let mut ev: Vec<C64> = self.a_c.complex_eigenvalues_or_schur();
        ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        ev
    }

    /// Supply-rate form on `(x_c, u)`:
    /// `Re <A x + B u, x>_W - Re <C x + D u, u>`.
    pub fn supply_form(&self) -> CMat {
        let w = &self.state_weight;
        let top = linalg::hstack(&[&(w * &self.a_c), &(w * &self.b_c)]);
        let bottom = linalg::hstack(&[&(-&self.c_c), &(-&self.d_c)]);
        linalg::hermitian_part(&linalg::vstack(&[&top, &bottom]))
    }

    /// Impedance passivity of the controller.
    pub fn passivity(&self) -> PassivityCertificate {
        let f = self.supply_form();
        let scale = linalg::spectral_norm(&f);
        passivity::certify_nonpositive(CertificateKind::Controller, f, scale)
    }

    /// Orthogonal projector onto `range(D_c*)`.
    pub fn input_projector(&self) -> CMat {
        let r = linalg::range_basis(&self.d_c.adjoint(), 1e-10);
        &r * r.adjoint()
    }

    /// Largest `kappa` (capped at `1e6`) with
    /// `Re <A x + B u, x>_W - Re <y, u> <= -kappa |Pi u|^2`, or `None` when
    /// the controller is not passive.
    pub fn strict_input_margin(&self) -> Option<f64> {
        if !self.passivity().pass {
            return None;
        }
        let pi = self.input_projector();
        if linalg::max_abs(&pi) == 0.0 {
            return Some(0.0);
        }
        let n = self.states();
        let f = self.supply_form();
        let holds = |kappa: f64| {
            let mut g = f.clone();
            let mut blk = g.view_mut((n, n), pi.shape());
            blk += pi.scale(kappa);
            passivity::certify_nonpositive(CertificateKind::Controller, g, linalg::spectral_norm(&f)).pass
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        while holds(hi) {
            lo = hi;
            hi *= 2.0;
            if hi > 1e6 {
                return Some(1e6);
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if holds(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }
}

trait EigenvaluesOrSchur {
    fn complex_eigenvalues_or_schur(&self) -> Vec<C64>;
}

impl EigenvaluesOrSchur for CMat {
    fn complex_eigenvalues_or_schur(&self) -> Vec<C64> {
        let schur = nalgebra::Schur::new(self.clone());
        let (_, t) = schur.unpack();
        (0..t.nrows()).map(|i| t[(i, i)]).collect()
    }
}

/// Declared input/output split of one subsystem's trace, used for serial
/// detection: `b' = inputs * tau`, `c' = outputs * tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct PortBlock {
    pub subsystem: usize,
    pub inputs: CMat,
    pub outputs: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub subsystems: Vec<PhSubsystem>,
    pub controllers: Vec<Controller>,
    pub k_mat: CMat,
    /// For each controller, the global port index of each controller port.
    pub coupling: Vec<Vec<usize>>,
    /// Rows of the closure labelled as external inputs. They are closed with
    /// a zero input.
    pub external_ports: Vec<usize>,
    pub serial_blocks: Option<Vec<PortBlock>>,
}

impl Network {
    pub fn new(subsystems: Vec<PhSubsystem>, k_mat: CMat) -> Self {
        Network { subsystems, controllers: Vec::new(), k_mat, coupling: Vec::new(), external_ports: Vec::new(), serial_blocks: None }
    }

    pub fn with_controller(mut self, c: Controller, ports: Vec<usize>) -> Self {
        self.controllers.push(c);
        self.coupling.push(ports);
        self
    }

    pub fn with_serial_blocks(mut self, blocks: Vec<PortBlock>) -> Self {
        self.serial_blocks = Some(blocks);
        self
    }

    pub fn ports(&self) -> usize {
        self.subsystems.iter().map(|s| s.ports()).sum()
    }

    pub fn port_offsets(&self) -> Vec<usize> {
        offsets(self.subsystems.iter().map(|s| s.ports()))
    }

    pub fn trace_offsets(&self) -> Vec<usize> {
        offsets(self.subsystems.iter().map(|s| s.trace_len()))
    }

    pub fn controller_offsets(&self) -> Vec<usize> {
        offsets(self.controllers.iter().map(|c| c.states()))
    }

    pub fn controller_states(&self) -> usize {
        self.controllers.iter().map(|c| c.states()).sum()
    }

    /// Reorder subsystems: new subsystem `i` is old subsystem `perm[i]`. Ports
    /// and the interconnection are relabelled accordingly.
    pub fn permuted(&self, perm: &[usize]) -> Network {
        let old_off = self.port_offsets();
        let subsystems: Vec<PhSubsystem> = perm.iter().map(|&j| self.subsystems[j].clone()).collect();
        // new global port index for each old global port index
        let mut map = vec![0; self.ports()];
        let mut next = 0;
        for &j in perm {
            for p in old_off[j]..old_off[j + 1] {
                map[p] = next;
                next += 1;
            }
        }
        let p = self.ports();
        let mut k = CMat::zeros(p, p);
        for r in 0..p {
            for c in 0..p {
                k[(map[r], map[c])] = self.k_mat[(r, c)];
            }
        }
        let inverse: Vec<usize> = {
            let mut inv = vec![0; perm.len()];
            for (i, &j) in perm.iter().enumerate() {
                inv[j] = i;
            }
            inv
        };
        Network {
            subsystems,
            controllers: self.controllers.clone(),
            k_mat: k,
            coupling: self.coupling.iter().map(|ports| ports.iter().map(|&q| map[q]).collect()).collect(),
            external_ports: self.external_ports.iter().map(|&q| map[q]).collect(),
            serial_blocks: self.serial_blocks.as_ref().map(|bs| {
                bs.iter().map(|b| PortBlock { subsystem: inverse[b.subsystem], ..b.clone() }).collect()
            }),
        }
    }
}

fn offsets(sizes: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut out = vec![0];
    for s in sizes {
        out.push(out.last().unwrap() + s);
    }
    out
}

/// Assembled boundary constraints and controller coupling of a network.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub port_offsets: Vec<usize>,
    pub trace_offsets: Vec<usize>,
    pub controller_offsets: Vec<usize>,
    /// `blockdiag(W_B^j)` and `blockdiag(W_C^j)`.
    pub w_b: CMat,
    pub w_c: CMat,
    /// `K - S^T D_c S`.
    pub k_eff: CMat,
    /// Port selector `S` (controller inputs by global ports).
    pub selector: CMat,
    /// Constraint rows `W_B,net tau + C_c,net x_c = 0`.
    pub w_b_net: CMat,
    pub c_c_net: CMat,
    pub a_c: CMat,
    pub b_c: CMat,
    /// `B_c S W_C`, the controller input in terms of the stacked trace.
    pub controller_input: CMat,
    pub state_weight: CMat,
    /// `blockdiag(Q_j)`.
    pub flux: CMat,
    /// Physical lengths of the subsystems, the weights of their energy forms.
    pub lengths: Vec<f64>,
    pub external_ports: Vec<usize>,
}

impl ClosedLoop {
    pub fn trace_len(&self) -> usize {
        self.w_b.ncols()
    }

    pub fn controller_states(&self) -> usize {
        self.a_c.nrows()
    }

    pub fn constraint_count(&self) -> usize {
        self.w_b_net.nrows()
    }

    /// `[W_B,net, C_c,net]` acting on `(tau, x_c)`.
    pub fn constraint(&self) -> CMat {
        linalg::hstack(&[&self.w_b_net, &self.c_c_net])
    }

    /// Hermitian form on `(tau, x_c)` whose value is `Re <A x, x>` minus the
    /// `P_0` contributions.
    pub fn dissipation_form(&self) -> CMat {
        let nt = self.trace_len();
        let nc = self.controller_states();
        let mut f = CMat::zeros(nt + nc, nt + nc);
        f.view_mut((0, 0), (nt, nt)).copy_from(&self.flux.scale(0.5));
        if nc > 0 {
            let x = (&self.state_weight * &self.controller_input).scale(0.5);
            f.view_mut((nt, 0), (nc, nt)).copy_from(&x);
            f.view_mut((0, nt), (nt, nc)).copy_from(&x.adjoint());
            f.view_mut((nt, nt), (nc, nc)).copy_from(&linalg::hermitian_part(&(&self.state_weight * &self.a_c)));
        }
        f
    }

    /// Orthogonal projector onto the solution space of the constraints.
    pub fn constraint_projector(&self) -> CMat {
        let (z, _) = linalg::null_space(&self.constraint(), NULL_TOL);
        &z * z.adjoint()
    }
}

pub fn assemble(net: &Network) -> Result<ClosedLoop, NetworkError> {
    for (index, s) in net.subsystems.iter().enumerate() {
        let report = model::validate_subsystem(s).map_err(|source| NetworkError::Model { index, source })?;
        if !report.pass {
            return Err(NetworkError::InvalidSubsystem { index, failures: report.failures().into_iter().map(String::from).collect() });
        }
    }
    let p = net.ports();
    if net.k_mat.shape() != (p, p) {
        return Err(NetworkError::KShape { expected: p, got: net.k_mat.shape() });
    }
    if net.coupling.len() != net.controllers.len() {
        return Err(NetworkError::Coupling(format!("{} controllers but {} coupling lists", net.controllers.len(), net.coupling.len())));
    }
    let mut used = vec![false; p];
    for (index, (c, ports)) in net.controllers.iter().zip(&net.coupling).enumerate() {
        c.check().map_err(|message| NetworkError::Controller { index, message })?;
        if ports.len() != c.inputs() {
            return Err(NetworkError::Coupling(format!("controller {index} has {} ports but {} are mapped", c.inputs(), ports.len())));
        }
        for &q in ports {
            if q >= p {
                return Err(NetworkError::Coupling(format!("controller {index} attached to nonexistent port {q}")));
            }
            if used[q] {
                return Err(NetworkError::Coupling(format!("port {q} is attached to more than one controller port")));
            }
            used[q] = true;
        }
    }
    for &q in &net.external_ports {
        if q >= p {
            return Err(NetworkError::ExternalPort { port: q, ports: p });
        }
    }

    let w_b = linalg::block_diag(&net.subsystems.iter().map(|s| s.w_b.clone()).collect::<Vec<_>>());
    let w_c = linalg::block_diag(&net.subsystems.iter().map(|s| s.w_c.clone()).collect::<Vec<_>>());
    let flux = linalg::block_diag(&net.subsystems.iter().map(|s| model::flux_form(s).q).collect::<Vec<_>>());

    let m_u: usize = net.controllers.iter().map(|c| c.inputs()).sum();
    let mut selector = CMat::zeros(m_u, p);
    let mut row = 0;
    for ports in &net.coupling {
        for &q in ports {
            selector[(row, q)] = c64(1.0, 0.0);
            row += 1;
        }
    }
    let a_c = linalg::block_diag(&net.controllers.iter().map(|c| c.a_c.clone()).collect::<Vec<_>>());
    let b_c = linalg::block_diag(&net.controllers.iter().map(|c| c.b_c.clone()).collect::<Vec<_>>());
    let c_c = linalg::block_diag(&net.controllers.iter().map(|c| c.c_c.clone()).collect::<Vec<_>>());
    let d_c = linalg::block_diag(&net.controllers.iter().map(|c| c.d_c.clone()).collect::<Vec<_>>());
    let state_weight = linalg::block_diag(&net.controllers.iter().map(|c| c.state_weight.clone()).collect::<Vec<_>>());

    let k_eff = &net.k_mat - selector.transpose() * &d_c * &selector;
    let w_b_net = &w_b - &k_eff * &w_c;
    let c_c_net = selector.transpose() * &c_c;
    let controller_input = &b_c * &selector * &w_c;

    Ok(ClosedLoop {
        port_offsets: net.port_offsets(),
        trace_offsets: net.trace_offsets(),
        controller_offsets: net.controller_offsets(),
        w_b,
        w_c,
        k_eff,
        selector,
        w_b_net,
        c_c_net,
        a_c,
        b_c,
        controller_input,
        state_weight,
        flux,
        lengths: net.subsystems.iter().map(|s| s.length()).collect(),
        external_ports: net.external_ports.clone(),
    })
}

/// Dissipativity of the closed-loop network operator.
pub fn certify_network_dissipative(net: &Network) -> Result<PassivityCertificate, NetworkError> {
    let cl = assemble(net)?;
    Ok(certify_closed_loop(net, &cl))
}

pub fn certify_closed_loop(net: &Network, cl: &ClosedLoop) -> PassivityCertificate {
    let f = cl.dissipation_form();
    let scale = linalg::spectral_norm(&f);
    let expected = cl.trace_len() + cl.controller_states() - cl.constraint_count();
    let mut cert = passivity::certify_on_kernel(CertificateKind::Network, &f, &cl.constraint(), scale, Some(expected));
    if cert.pass {
        for (j, s) in net.subsystems.iter().enumerate() {
            let p0 = passivity::check_sym_p0(s);
            if !p0.pass {
                let mut failed = p0;
                failed.kind = CertificateKind::Network;
                failed.warnings.push(format!("Sym P_0 of subsystem {j} is not negative semidefinite"));
                return failed;
            }
        }
    }
    cert.warnings.dedup();
    cert
}

#[derive(Debug, Clone, Serialize)]
pub struct SerialStructure {
    /// Block indices in an order where every block depends only on earlier ones.
    pub ordering: Vec<usize>,
    /// `k_blocks[i][j]`: dependence of the inputs of block `i` on the outputs of block `j`.
    #[serde(skip)]
    pub k_blocks: Vec<Vec<CMat>>,
    /// Blocks whose inputs depend on their own outputs (local closures).
    pub local_feedback: Vec<usize>,
}

impl SerialStructure {
    /// Checks `K^{ij} = 0` whenever block `i` does not come after block `j`.
    pub fn verify_ordering(&self, tol: f64) -> bool {
        let mut pos = vec![0; self.ordering.len()];
        for (p, &b) in self.ordering.iter().enumerate() {
            pos[b] = p;
        }
        for i in 0..self.k_blocks.len() {
            for j in 0..self.k_blocks.len() {
                if i != j && pos[i] < pos[j] && linalg::max_abs(&self.k_blocks[i][j]) > tol {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum SerialResult {
    Serial(SerialStructure),
    NotSerial { cycle: Vec<usize> },
}

impl SerialResult {
    pub fn is_serial(&self) -> bool {
        matches!(self, SerialResult::Serial(_))
    }
}

/// Look for an ordering of port blocks in which the interconnection is
/// strictly lower block triangular.
pub fn detect_serial_structure(net: &Network) -> Result<SerialResult, NetworkError> {
    let cl = assemble(net)?;
    let blocks = match &net.serial_blocks {
        Some(b) => b.clone(),
        None => net
            .subsystems
            .iter()
            .enumerate()
            .map(|(j, s)| PortBlock { subsystem: j, inputs: s.w_b.clone(), outputs: s.w_c.clone() })
            .collect(),
    };
    let m = net.subsystems.len();
    let mut seen = vec![false; m];
    for b in &blocks {
        if b.subsystem >= m || seen[b.subsystem] {
            return Err(NetworkError::SerialBlocks(format!("subsystem {} missing or declared twice", b.subsystem)));
        }
        seen[b.subsystem] = true;
        let s = &net.subsystems[b.subsystem];
        let t = s.trace_len();
        if b.inputs.ncols() != t || b.outputs.ncols() != t || b.inputs.nrows() + b.outputs.nrows() != t {
            return Err(NetworkError::SerialBlocks(format!("block of subsystem {} does not split its {t} trace values", b.subsystem)));
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(NetworkError::SerialBlocks("every subsystem needs exactly one block".into()));
    }

    // tau = E b' + F c' per subsystem
    let nt = cl.trace_len();
    let n_in: usize = blocks.iter().map(|b| b.inputs.nrows()).sum();
    let n_out: usize = blocks.iter().map(|b| b.outputs.nrows()).sum();
    let mut e = CMat::zeros(nt, n_in);
    let mut f = CMat::zeros(nt, n_out);
    let mut in_off = vec![0];
    let mut out_off = vec![0];
    for b in &blocks {
        let t0 = cl.trace_offsets[b.subsystem];
        let t = b.inputs.ncols();
        let stacked = linalg::vstack(&[&b.inputs, &b.outputs]);
        let inv = linalg::inverse(&stacked)
            .ok_or_else(|| NetworkError::SerialBlocks(format!("block of subsystem {} is not invertible", b.subsystem)))?;
        let (ki, ko) = (b.inputs.nrows(), b.outputs.nrows());
        let (io, oo) = (*in_off.last().unwrap(), *out_off.last().unwrap());
        e.view_mut((t0, io), (t, ki)).copy_from(&inv.columns(0, ki));
        f.view_mut((t0, oo), (t, ko)).copy_from(&inv.columns(ki, ko));
        in_off.push(io + ki);
        out_off.push(oo + ko);
    }
    if n_in != cl.constraint_count() {
        return Err(NetworkError::SerialBlocks(format!("{n_in} declared inputs but {} constraints", cl.constraint_count())));
    }
    let g_b = &cl.w_b_net * &e;
    let g_c = &cl.w_b_net * &f;
    let k_prime = -linalg::solve(&g_b, &g_c)
        .ok_or_else(|| NetworkError::SerialBlocks("declared inputs cannot be solved for".into()))?;

    let nb = blocks.len();
    let tol = 1e-12 * linalg::max_abs(&k_prime).max(1.0);
    let mut k_blocks = vec![vec![CMat::zeros(0, 0); nb]; nb];
    let mut deps = vec![vec![false; nb]; nb];
    for i in 0..nb {
        for j in 0..nb {
            let blk = k_prime.view((in_off[i], out_off[j]), (in_off[i + 1] - in_off[i], out_off[j + 1] - out_off[j])).into_owned();
            deps[i][j] = linalg::max_abs(&blk) > tol;
            k_blocks[i][j] = blk;
        }
    }
    // controllers make every block they touch depend on every other one
    let block_of_subsystem: Vec<usize> = {
        let mut v = vec![0; m];
        for (i, b) in blocks.iter().enumerate() {
            v[b.subsystem] = i;
        }
        v
    };
    for ports in &net.coupling {
        let touched: Vec<usize> = ports
            .iter()
            .map(|&q| block_of_subsystem[cl.port_offsets.partition_point(|&o| o <= q) - 1])
            .collect();
        for &a in &touched {
            for &b in &touched {
                if a != b {
                    deps[a][b] = true;
                }
            }
        }
    }
    let local_feedback: Vec<usize> = (0..nb).filter(|&i| deps[i][i]).collect();

    // Kahn: edge j -> i when block i depends on block j
    let mut indeg: Vec<usize> = (0..nb).map(|i| (0..nb).filter(|&j| j != i && deps[i][j]).count()).collect();
    let mut heap: BinaryHeap<Reverse<usize>> = (0..nb).filter(|&i| indeg[i] == 0).map(Reverse).collect();
    let mut ordering = Vec::with_capacity(nb);
    let mut done = vec![false; nb];
    while let Some(Reverse(j)) = heap.pop() {
        ordering.push(j);
        done[j] = true;
        for i in 0..nb {
            if i != j && deps[i][j] && !done[i] {
                indeg[i] -= 1;
                if indeg[i] == 0 {
                    heap.push(Reverse(i));
                }
            }
        }
    }
    if ordering.len() == nb {
        return Ok(SerialResult::Serial(SerialStructure { ordering, k_blocks, local_feedback }));
    }
    Ok(SerialResult::NotSerial { cycle: find_cycle(&deps, &done) })
}

/// A dependency cycle among the blocks left over by the topological sort,
/// listed along the direction of signal flow and starting at its smallest index.
fn find_cycle(deps: &[Vec<bool>], done: &[bool]) -> Vec<usize> {
    let nb = deps.len();
    let start = (0..nb).find(|&i| !done[i]).expect("leftover block");
    let mut path = vec![start];
    let mut pos = vec![usize::MAX; nb];
    pos[start] = 0;
    let mut cur = start;
    loop {
        // every leftover block has a leftover predecessor
        let pred = (0..nb).find(|&j| j != cur && !done[j] && deps[cur][j]).expect("leftover predecessor");
        if pos[pred] != usize::MAX {
            let mut cycle: Vec<usize> = path[pos[pred]..].to_vec();
            cycle.reverse();
            let k = cycle.iter().enumerate().min_by_key(|(_, &b)| b).map(|(k, _)| k).unwrap();
            cycle.rotate_left(k);
            return cycle;
        }
        pos[pred] = path.len();
        path.push(pred);
        cur = pred;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{real_matrix, CVec};
    use crate::model::MatrixFunction;

    fn wave() -> PhSubsystem {
        let p1 = real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let w_b = real_matrix(2, 4, &[0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0]);
        let w_c = real_matrix(2, 4, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        PhSubsystem::new(1, 2, vec![CMat::zeros(2, 2), p1], MatrixFunction::Constant(CMat::identity(2, 2)), w_b, w_c).unwrap()
    }

    fn gyrator() -> Network {
        // B^1 = -C^2, B^2 = C^1
        let mut k = CMat::zeros(4, 4);
        for i in 0..2 {
            k[(i, 2 + i)] = c64(-1.0, 0.0);
            k[(2 + i, i)] = c64(1.0, 0.0);
        }
        Network::new(vec![wave(), wave()], k)
    }

    fn spring_mass(m: f64, k: f64, r: f64) -> Controller {
        Controller {
            a_c: real_matrix(2, 2, &[0.0, 1.0, -k / m, -r / m]),
            b_c: real_matrix(2, 1, &[0.0, 1.0 / m]),
            c_c: real_matrix(1, 2, &[0.0, 1.0]),
            d_c: CMat::zeros(1, 1),
            state_weight: linalg::diag_real(&[k, m]),
        }
    }

    #[test]
    fn single_subsystem_constraint_rows() {
        let k = real_matrix(2, 2, &[-0.5, 0.0, 0.0, 0.0]);
        let s = wave();
        let cl = assemble(&Network::new(vec![s.clone()], k.clone())).unwrap();
        assert_eq!(cl.w_b_net, &s.w_b - &k * &s.w_c);
        assert_eq!(cl.c_c_net.ncols(), 0);
    }

    #[test]
    fn gyrator_is_conservative() {
        let net = gyrator();
        let cert = certify_network_dissipative(&net).unwrap();
        assert!(cert.pass);
        assert!(cert.margin.abs() < 1e-12);
        let cl = assemble(&net).unwrap();
        // every constrained trace has zero total flux
        let (z, _) = linalg::null_space(&cl.constraint(), NULL_TOL);
        let f = z.adjoint() * cl.dissipation_form() * &z;
        assert!(linalg::max_abs(&f) < 1e-14);
    }

    #[test]
    fn gyrator_is_not_serial() {
        match detect_serial_structure(&gyrator()).unwrap() {
            SerialResult::NotSerial { cycle } => assert_eq!(cycle, vec![0, 1]),
            other => panic!("expected a cycle, got {other:?}"),
        }
    }

    #[test]
    fn decoupled_blocks_sort_by_index() {
        let net = Network::new(vec![wave(), wave(), wave()], CMat::zeros(6, 6));
        match detect_serial_structure(&net).unwrap() {
            SerialResult::Serial(s) => {
                assert_eq!(s.ordering, vec![0, 1, 2]);
                assert!(s.local_feedback.is_empty());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn one_way_coupling_is_serial() {
        // B^1 = 0 (row 0: damping), B^2 = C^1: block 1 depends on block 0
        let mut k = CMat::zeros(4, 4);
        k[(0, 0)] = c64(-1.0, 0.0);
        k[(2, 0)] = c64(1.0, 0.0);
        let net = Network::new(vec![wave(), wave()], k).permuted(&[1, 0]);
        match detect_serial_structure(&net).unwrap() {
            SerialResult::Serial(s) => {
                assert_eq!(s.ordering, vec![1, 0]);
                assert_eq!(s.local_feedback, vec![1]);
                assert!(s.verify_ordering(0.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_joint_damping_fails() {
        let mut net = gyrator();
        net.k_mat[(0, 0)] = c64(0.3, 0.0);
        let cert = certify_network_dissipative(&net).unwrap();
        assert!(!cert.pass);
        let w: CVec = cert.witness.clone().unwrap();
        assert!(cert.violation_at(&w) > 0.0);
        assert!((assemble(&net).unwrap().constraint() * &w).norm() < 1e-10);
    }

    #[test]
    fn spring_mass_controller() {
        let c = spring_mass(1.0, 1.0, 1.0);
        assert!(c.passivity().pass);
        let ev = c.eigenvalues();
        let s3 = 3f64.sqrt() / 2.0;
        assert!((ev[0] - c64(-0.5, s3)).norm() < 1e-12);
        assert!((ev[1] - c64(-0.5, -s3)).norm() < 1e-12);
        // no feedthrough, so no strict input passivity to measure
        assert_eq!(c.strict_input_margin(), Some(0.0));
    }

    #[test]
    fn feedthrough_gives_strict_input_margin() {
        let c = Controller {
            a_c: real_matrix(1, 1, &[-1.0]),
            b_c: real_matrix(1, 1, &[0.0]),
            c_c: real_matrix(1, 1, &[0.0]),
            d_c: real_matrix(1, 1, &[2.0]),
            state_weight: real_matrix(1, 1, &[1.0]),
        };
        assert!((c.strict_input_margin().unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn controller_network_constraints() {
        // string port 0 is -v(0): closure v(0) = x_c2
        let mut s = wave();
        s.w_b = real_matrix(2, 4, &[0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        s.w_c = real_matrix(2, 4, &[0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        let net = Network::new(vec![s], CMat::zeros(2, 2)).with_controller(spring_mass(2.0, 3.0, 0.5), vec![0]);
        let cl = assemble(&net).unwrap();
        assert_eq!(cl.constraint().shape(), (2, 6));
        assert_eq!(cl.c_c_net[(0, 1)], c64(1.0, 0.0));
        let cert = certify_closed_loop(&net, &cl);
        assert!(cert.pass, "{cert:?}");
    }

    #[test]
    fn bad_coupling_rejected() {
        let net = Network::new(vec![wave()], CMat::zeros(2, 2)).with_controller(spring_mass(1.0, 1.0, 1.0), vec![5]);
        assert!(matches!(assemble(&net), Err(NetworkError::Coupling(_))));
        let net = Network::new(vec![wave()], CMat::zeros(3, 3));
        assert!(matches!(assemble(&net), Err(NetworkError::KShape { .. })));
    }

    #[test]
    fn permutation_preserves_solution_space() {
        let mut k = CMat::zeros(4, 4);
        k[(0, 0)] = c64(-0.7, 0.0);
        k[(1, 2)] = c64(1.0, 0.0);
        k[(2, 1)] = c64(-1.0, 0.0);
        let net = Network::new(vec![wave(), wave().with_interval(0.0, 2.0).unwrap()], k);
        let perm = net.permuted(&[1, 0]);
        let p1 = assemble(&net).unwrap().constraint_projector();
        let p2 = assemble(&perm).unwrap().constraint_projector();
        // map the permuted trace ordering back
        let t = 4;
        let mut back = CMat::zeros(2 * t, 2 * t);
        for i in 0..t {
            back[(i, t + i)] = c64(1.0, 0.0);
            back[(t + i, i)] = c64(1.0, 0.0);
        }
        let p2_back = &back * p2 * back.transpose();
        assert!(linalg::max_abs(&(p1 - p2_back)) < 1e-10);
    }
}

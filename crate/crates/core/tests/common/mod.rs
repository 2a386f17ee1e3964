//! Independent oracles and random model generators shared by the
//! integration and acceptance tests.
#![allow(dead_code)]

use phnet::linalg::{self, c64, CMat, C64};
use phnet::model::{self, MatrixFunction, PhSubsystem};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Gauss-Legendre nodes and weights on `[0, 1]`, by Newton iteration on
/// the three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

pub fn rand_complex(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// `P_k` with `P_k* = (-1)^(k+1) P_k`, well conditioned for the top order.
pub fn rand_structured_p(rng: &mut ChaCha8Rng, k: usize, d: usize) -> CMat {
    loop {
        let a = rand_complex(rng, d, d);
        let p = if k % 2 == 1 { (&a + a.adjoint()).scale(0.5) } else { (&a - a.adjoint()).scale(0.5) };
        let sv = linalg::singular_values(&p);
        if sv[sv.len() - 1] > 0.2 * sv[0] {
            return p;
        }
    }
}

/// Negative semidefinite Hermitian part plus a random skew part.
pub fn rand_dissipative(rng: &mut ChaCha8Rng, d: usize, strength: f64) -> CMat {
    let g = rand_complex(rng, d, d);
    let a = rand_complex(rng, d, d);
    (&a - a.adjoint()).scale(0.5) - (&g * g.adjoint()).scale(strength / d as f64)
}

/// Coercive Hermitian density `H0 + s H1`.
pub fn rand_density(rng: &mut ChaCha8Rng, d: usize) -> MatrixFunction {
    let a = rand_complex(rng, d, d);
    let h0 = (&a * a.adjoint()).scale(0.5 / d as f64) + CMat::identity(d, d).scale(0.5);
    let b = rand_complex(rng, d, d);
    let h1 = (&b + b.adjoint()).scale(0.5);
    let h1 = h1.scale(0.3 / linalg::spectral_norm(&h1).max(1e-12));
    MatrixFunction::Polynomial(vec![h0, h1])
}

/// Random impedance passive subsystem: with `1/2 Q = |p|^2 - |m|^2` from the
/// eigen-split of the flux form, `B = S (p + m)` and
/// `C = S^-* (p - m) + D B` with `Sym D >= 0`.
pub fn rand_passive_subsystem(rng: &mut ChaCha8Rng, order: usize, dim: usize) -> PhSubsystem {
    let mut p: Vec<CMat> = vec![rand_dissipative(rng, dim, 0.5)];
    for k in 1..=order {
        p.push(rand_structured_p(rng, k, dim));
    }
    let len = rng.gen_range(0.5..2.0);
    let a = rng.gen_range(-1.0..1.0);
    let nd = order * dim;
    let probe = PhSubsystem::new(order, dim, p.clone(), MatrixFunction::Constant(CMat::identity(dim, dim)), CMat::zeros(nd, 2 * nd), CMat::zeros(nd, 2 * nd))
        .unwrap()
        .with_interval(a, a + len)
        .unwrap();
    let half_q = model::flux_form(&probe).q.scale(0.5);
    let eig = linalg::hermitian_eig(&half_q);
    assert!(eig.values[nd - 1] < 0.0 && eig.values[nd] > 0.0, "flux form has balanced inertia");
    let split = |range: std::ops::Range<usize>| {
        let mut m = CMat::zeros(nd, 2 * nd);
        for (r, k) in range.enumerate() {
            let s = eig.values[k].abs().sqrt();
            m.set_row(r, &(eig.vector(k).adjoint().scale(s)));
        }
        m
    };
    let minus = split(0..nd);
    let plus = split(nd..2 * nd);
    let s = loop {
        let s = rand_complex(rng, nd, nd) + CMat::identity(nd, nd).scale(1.5);
        let sv = linalg::singular_values(&s);
        if sv[nd - 1] > 0.1 * sv[0] {
            break s;
        }
    };
    let s_inv_adj = s.clone().try_inverse().unwrap().adjoint();
    let w_b = &s * (&plus + &minus);
    let d = -rand_dissipative(rng, nd, 0.3);
    let w_c = &s_inv_adj * (&plus - &minus) + &d * &w_b;
    PhSubsystem::new(order, dim, p, rand_density(rng, dim), w_b, w_c).unwrap().with_interval(a, a + len).unwrap()
}

/// Random `K` with negative semidefinite Hermitian part.
pub fn rand_feedback(rng: &mut ChaCha8Rng, p: usize) -> CMat {
    rand_dissipative(rng, p, 0.5)
}

pub fn nearest(eigs: &[C64], z: C64) -> f64 {
    eigs.iter().map(|l| (l - z).norm()).fold(f64::INFINITY, f64::min)
}

/// Newton iteration on a scalar analytic function with a numerical
/// derivative.
pub fn newton(f: impl Fn(C64) -> C64, mut z: C64) -> Option<C64> {
    for _ in 0..100 {
        let h = 1e-7 * (1.0 + z.norm());
        let fz = f(z);
        let df = (f(z + h) - f(z - h)) / (2.0 * h);
        if df.norm() == 0.0 {
            return None;
        }
        let step = fz / df;
        z -= step;
        if step.norm() < 1e-14 * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    None
}

/// Determinant of a small complex matrix by Gaussian elimination with
/// partial pivoting.
pub fn det(mut a: Vec<Vec<C64>>) -> C64 {
    let n = a.len();
    let mut d = c64(1.0, 0.0);
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].norm().total_cmp(&a[j][c].norm())).unwrap();
        if a[piv][c].norm() == 0.0 {
            return c64(0.0, 0.0);
        }
        if piv != c {
            a.swap(piv, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                let v = a[c][k];
                a[r][k] -= f * v;
            }
        }
    }
    d
}

/// Characteristic function of a uniform chain (`rho = T = 1`, unit
/// segments), left damping `kappa[0]`, joint damping `kappa[j]`, free right
/// end. On each segment `v = A e^(lz) - B e^(-lz)`, `s = A e^(lz) + B e^(-lz)`.
pub fn chain_characteristic(kappa: &[f64], l: C64) -> C64 {
    let m = kappa.len();
    let n = 2 * m;
    let mut rows = vec![vec![c64(0.0, 0.0); n]; n];
    let e = l.exp();
    let ei = (-l).exp();
    let one = c64(1.0, 0.0);
    // s_1(0) = kappa_0 v_1(0)
    rows[0][0] = one - kappa[0];
    rows[0][1] = one + kappa[0];
    for j in 1..m {
        let (a1, b1, a2, b2) = (2 * (j - 1), 2 * (j - 1) + 1, 2 * j, 2 * j + 1);
        // v_{j+1}(0) = v_j(1)
        rows[2 * j - 1][a2] = one;
        rows[2 * j - 1][b2] = -one;
        rows[2 * j - 1][a1] = -e;
        rows[2 * j - 1][b1] = ei;
        // s_{j+1}(0) = s_j(1) + kappa_j v_{j+1}(0)
        rows[2 * j][a2] = one - kappa[j];
        rows[2 * j][b2] = one + kappa[j];
        rows[2 * j][a1] = -e;
        rows[2 * j][b1] = -ei;
    }
    // s_m(1) = 0
    rows[n - 1][n - 2] = e;
    rows[n - 1][n - 1] = ei;
    det(rows)
}

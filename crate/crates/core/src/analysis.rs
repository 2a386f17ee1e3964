//! Spectral abscissa, imaginary-axis resolvent scans, observability of
//! undamped modes, and decay-rate fits of simulated energies.
//!
//! All quantities live in the energy frame of a [`DiscreteGenerator`], where
//! the energy norm is the Euclidean norm. A fixed-`n` matrix always has a
//! bounded resolvent, so the exponential stability verdict is a surrogate
//! built from the growth of the resolvent over the resolved frequency band.

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::discretize::DiscreteGenerator;
use crate::linalg::{self, CMat, CVec, C64};
use crate::simulate::EnergyTrace;

/// Real parts above `-STABLE_TOL` count as non-decaying.
pub const STABLE_TOL: f64 = 1e-6;
/// Growth-trend threshold of the exponential stability verdict.
pub const TREND_LIMIT: f64 = 1.5;
/// Modes whose unit filter energy exceeds this fraction count as unresolved.
pub const RESOLVED_FRACTION: f64 = 1e-6;
/// Number of dominant modes setting the default scan range.
pub const DOMINANT_MODES: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("energy trace has {0} samples, at least 32 are needed")]
    TooFewSamples(usize),
    #[error("energy at t = {t} is {value}; it must stay positive")]
    NonPositiveEnergy { t: f64, value: f64 },
}

fn serialize_complex_list<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|z| [z.re, z.im]))
}

/// Complex Schur form `a_sim = Q T Q*` with triangular eigenvectors of `T`.
#[derive(Debug, Clone)]
pub struct SchurData {
    pub q: CMat,
    pub t: CMat,
    pub tri_vectors: CMat,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    /// Sorted by descending real part.
    #[serde(serialize_with = "serialize_complex_list")]
    pub eigenvalues: Vec<C64>,
    pub abscissa: f64,
    #[serde(serialize_with = "serialize_complex_list")]
    pub zero_modes: Vec<C64>,
    pub zero_tol: f64,
    /// Unit filter energy of each normalized eigenvector.
    pub filter_fraction: Vec<f64>,
    /// Energy-frame eigenvectors, aligned with `eigenvalues`.
    #[serde(skip)]
    pub eigenvectors: CMat,
    /// Position of each listed eigenvalue on the Schur diagonal.
    #[serde(skip)]
    pub schur_index: Vec<usize>,
    #[serde(skip)]
    pub schur: SchurData,
}

impl SpectrumReport {
    pub fn is_resolved(&self, k: usize) -> bool {
        self.filter_fraction[k] < RESOLVED_FRACTION
    }

    /// Distance from `z` to the nearest eigenvalue and its index.
    pub fn nearest(&self, z: C64) -> (f64, usize) {
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(k, l)| ((l - z).norm(), k))
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
    }
}

pub fn spectrum(g: &DiscreteGenerator) -> SpectrumReport {
    let a = &g.a_sim;
    let n = a.nrows();
    let norm = linalg::frobenius(a);
    let schur = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, 0).unwrap_or_else(|| nalgebra::Schur::new(a.clone()));
    let (q, t) = schur.unpack();
    let tri_vectors = linalg::triangular_eigenvectors(&t);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| t[(j, j)].re.total_cmp(&t[(i, i)].re).then(t[(j, j)].im.total_cmp(&t[(i, i)].im)));
    let eigenvalues: Vec<C64> = order.iter().map(|&i| t[(i, i)]).collect();
    let eigenvectors = CMat::from_fn(n, n, |_, _| linalg::ZERO);
    let mut eigenvectors = eigenvectors;
    let full = &q * &tri_vectors;
    for (k, &i) in order.iter().enumerate() {
        let col = full.column(i);
        let nrm = col.norm();
        eigenvectors.set_column(k, &col.unscale(nrm));
    }
    let r_inv = g.energy_factor_inverse();
    let gf = r_inv.adjoint() * g.lift.adjoint() * &g.meta.filter_energy * &g.lift * &r_inv;
    let filter_fraction = (0..n).map(|k| linalg::quad_form(&gf, &eigenvectors.column(k).into_owned()).max(0.0)).collect();
    let zero_tol = 1e-8 * norm;
    let zero_modes = eigenvalues.iter().copied().filter(|l| l.norm() < zero_tol).collect();
    SpectrumReport {
        abscissa: eigenvalues.first().map_or(f64::NEG_INFINITY, |l| l.re),
        eigenvalues,
        zero_modes,
        zero_tol,
        filter_fraction,
        eigenvectors,
        schur_index: order,
        schur: SchurData { q, t, tri_vectors },
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventScan {
    pub betas: Vec<f64>,
    pub norms: Vec<f64>,
    pub diverged: Vec<bool>,
    pub sup_norm: f64,
    /// Sup over `[beta_max/2, beta_max]` divided by sup over `[0, beta_max/2)`.
    pub growth_trend: f64,
    pub beta_max: f64,
}

/// `(T - z) y = x` for upper-triangular `T`.
fn solve_shifted(t: &CMat, z: C64, x: &CVec) -> CVec {
    let n = t.nrows();
    let mut y = x.clone();
    for j in (0..n).rev() {
        y[j] /= t[(j, j)] - z;
        let yj = y[j];
        let col = t.column(j);
        for i in 0..j {
            y[i] -= col[i] * yj;
        }
    }
    y
}

/// `(T - z)* w = y` for upper-triangular `T`.
fn solve_shifted_adjoint(t: &CMat, z: C64, y: &CVec) -> CVec {
    let n = t.nrows();
    let mut w = y.clone();
    for i in 0..n {
        let col = t.column(i);
        let mut s = w[i];
        for j in 0..i {
            s -= col[j].conj() * w[j];
        }
        w[i] = s / (t[(i, i)] - z).conj();
    }
    w
}

/// `|(z - A)^-1|` by inverse power iteration on the Schur factor, started
/// from the eigenvector closest to `z`, so that every iterate is a lower
/// bound that only increases.
fn resolvent_norm(schur: &SchurData, z: C64, start: usize) -> f64 {
    let t = &schur.t;
    let mut x: CVec = schur.tri_vectors.column(start).into_owned();
    let nx = x.norm();
    x.unscale_mut(nx);
    let mut est = 0.0;
    for _ in 0..200 {
        let y = solve_shifted(t, z, &x);
        let ny = y.norm();
        if !ny.is_finite() {
            return f64::INFINITY;
        }
        let w = solve_shifted_adjoint(t, z, &y);
        let nw = w.norm();
        if !nw.is_finite() || nw == 0.0 {
            return ny.max(est);
        }
        x = w.unscale(nw);
        let done = (ny - est).abs() <= 1e-12 * ny;
        est = ny.max(est);
        if done {
            break;
        }
    }
    est
}

/// Resolvent norms on `samples` equispaced frequencies in `[0, beta_max]`,
/// refined near eigenvalues closer to the axis than the grid spacing.
pub fn resolvent_scan(report: &SpectrumReport, beta_max: f64, samples: usize) -> ResolventScan {
    let samples = samples.max(2);
    let h = beta_max / (samples - 1) as f64;
    let mut betas: Vec<f64> = (0..samples).map(|i| i as f64 * h).collect();
    for l in &report.eigenvalues {
        let b = l.im;
        if (0.0..=beta_max).contains(&b) && l.re.abs() < h {
            betas.push(b);
            for level in 1..=3 {
                let delta = h * 10f64.powi(-level);
                for c in [b - delta, b + delta] {
                    if (0.0..=beta_max).contains(&c) {
                        betas.push(c);
                    }
                }
            }
        }
    }
    betas.sort_by(f64::total_cmp);
    betas.dedup();

    let results: Vec<(f64, bool)> = betas
        .par_iter()
        .map(|&b| {
            let z = C64::new(0.0, b);
            let (dist, k) = report.nearest(z);
            let diverged = dist <= 1e-8 * b.abs().max(1.0);
            let start = report.schur_index[k];
            (resolvent_norm(&report.schur, z, start), diverged)
        })
        .collect();
    let norms: Vec<f64> = results.iter().map(|r| r.0).collect();
    let diverged: Vec<bool> = results.iter().map(|r| r.1).collect();
    let sup = |pred: &dyn Fn(f64) -> bool| {
        betas
            .iter()
            .zip(&norms)
            .zip(&diverged)
            .filter(|((b, _), d)| pred(**b) && !**d)
            .fold(0.0_f64, |m, ((_, n), _)| m.max(*n))
    };
    let half = 0.5 * beta_max;
    let sup_norm = sup(&|_| true);
    let low = sup(&|b| b < half);
    let high = sup(&|b| b >= half);
    ResolventScan { betas, norms, diverged, sup_norm, growth_trend: if low > 0.0 { high / low } else { f64::INFINITY }, beta_max }
}

/// Default scan range: eight times the largest frequency among the 20
/// dominant resolved modes, capped at the largest resolved frequency.
pub fn default_beta_max(report: &SpectrumReport) -> f64 {
    let resolved: Vec<usize> = (0..report.eigenvalues.len()).filter(|&k| report.is_resolved(k)).collect();
    let band = resolved.iter().map(|&k| report.eigenvalues[k].im.abs()).fold(0.0, f64::max);
    let dominant = resolved.iter().take(DOMINANT_MODES).map(|&k| report.eigenvalues[k].im.abs()).fold(0.0, f64::max);
    let b = (8.0 * dominant).min(band);
    if b > 0.0 {
        b
    } else {
        band.max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ExponentiallyStable,
    AsymptoticallyStableOnly,
    ImaginarySpectrum,
    Unstable,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::ExponentiallyStable => "exponentially stable (surrogate)",
            Verdict::AsymptoticallyStableOnly => "asymptotically stable; exponential stability NOT indicated (surrogate)",
            Verdict::ImaginarySpectrum => "not asymptotically stable (imaginary spectrum)",
            Verdict::Unstable => "unstable",
        }
    }
}

pub fn verdict(abscissa: f64, growth_trend: f64) -> Verdict {
    if abscissa > STABLE_TOL {
        Verdict::Unstable
    } else if abscissa >= -STABLE_TOL {
        Verdict::ImaginarySpectrum
    } else if growth_trend <= TREND_LIMIT {
        Verdict::ExponentiallyStable
    } else {
        Verdict::AsymptoticallyStableOnly
    }
}

/// Stability verdict with the default scan.
pub fn stability_verdict(report: &SpectrumReport) -> (Verdict, ResolventScan) {
    let scan = resolvent_scan(report, default_beta_max(report), 400);
    (verdict(report.abscissa, scan.growth_trend), scan)
}

/// Trace components `(subsystem, index into that subsystem's tau)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceSelector {
    pub entries: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AspEntry {
    #[serde(serialize_with = "serialize_complex")]
    pub lambda: C64,
    pub residual: f64,
    pub violation: bool,
}

fn serialize_complex<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

/// Residual threshold below which an undamped mode counts as unobserved.
pub const ASP_TOL: f64 = 1e-6;

/// For each eigenvalue on the imaginary axis, the norm of the selected
/// trace components of its energy-normalized eigenvector.
pub fn asp_diagnostic(g: &DiscreteGenerator, report: &SpectrumReport, selector: &TraceSelector) -> Vec<AspEntry> {
    let tol = 1e-8 * linalg::frobenius(&g.a_sim);
    let rows: Vec<usize> = selector.entries.iter().map(|&(j, i)| g.meta.trace_offsets[j] + i).collect();
    let r = CMat::from_fn(rows.len(), g.meta.full_len(), |k, c| g.meta.traces[(rows[k], c)]);
    report
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, l)| l.re.abs() < tol)
        .map(|(k, &lambda)| {
            let x = g.lift_energy(&report.eigenvectors.column(k).into_owned());
            let residual = (&r * x).norm();
            AspEntry { lambda, residual, violation: residual < ASP_TOL }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    #[serde(rename = "M")]
    pub m: f64,
    pub eta: f64,
}

/// Least-squares fit of `log H` over `[t_end/4, t_end]`; `M` is the smallest
/// constant (at least one) with `H(t) <= M e^(eta t) H(0)` on the trace.
pub fn decay_fit(trace: &EnergyTrace) -> Result<DecayFit, AnalysisError> {
    let n = trace.times.len();
    if n < 32 {
        return Err(AnalysisError::TooFewSamples(n));
    }
    for (&t, &h) in trace.times.iter().zip(&trace.energies) {
        if !(h > 0.0) {
            return Err(AnalysisError::NonPositiveEnergy { t, value: h });
        }
    }
    let t0 = trace.times[0];
    let t_end = trace.times[n - 1];
    let start = t0 + 0.25 * (t_end - t0);
    let pts: Vec<(f64, f64)> = trace.times.iter().zip(&trace.energies).filter(|(t, _)| **t >= start).map(|(t, h)| (*t, h.ln())).collect();
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let eta = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let h0 = trace.energies[0];
    let m = trace
        .times
        .iter()
        .zip(&trace.energies)
        .map(|(t, h)| h / (h0 * (eta * (t - t0)).exp()))
        .fold(1.0_f64, f64::max);
    Ok(DecayFit { m, eta })
}

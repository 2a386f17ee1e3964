//! Algebraic passivity and dissipativity certificates.
//!
//! Every test reduces to "a Hermitian form `F` is negative semidefinite",
//! possibly after restriction to a subspace. The reported `margin` is the
//! least eigenvalue of `-F` (the form that must be positive semidefinite),
//! and a failing certificate carries a witness `w` with `w* F w > 0`.

use serde::{Serialize, Serializer};

use crate::linalg::{self, CMat, CVec};
use crate::model::{self, ModelError, PhSubsystem};

/// Relative tolerance for every semidefiniteness verdict.
pub const PSD_TOL: f64 = 1e-10;
/// Relative threshold for null-space extraction.
pub const NULL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Impedance,
    Scattering,
    Closure,
    SymP0,
    Network,
    Controller,
}

#[derive(Debug, Clone, Serialize)]
pub struct PassivityCertificate {
    pub kind: CertificateKind,
    pub pass: bool,
    /// Least eigenvalue of the form that must be positive semidefinite.
    pub margin: f64,
    pub tolerance: f64,
    /// Passed only because the margin lies within the tolerance band.
    pub marginal: bool,
    #[serde(serialize_with = "serialize_witness", skip_serializing_if = "Option::is_none")]
    pub witness: Option<CVec>,
    /// The form that must be negative semidefinite, in witness coordinates.
    #[serde(skip)]
    pub violating_form: CMat,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl PassivityCertificate {
    /// `w* F w` for the stored violating form.
    pub fn violation_at(&self, w: &CVec) -> f64 {
        linalg::quad_form(&self.violating_form, w)
    }
}

fn serialize_witness<S: Serializer>(w: &Option<CVec>, s: S) -> Result<S::Ok, S::Error> {
    match w {
        Some(v) => s.collect_seq(v.iter().map(|z| [z.re, z.im])),
        None => s.serialize_none(),
    }
}

/// Certify `F <= tol` where `tol = PSD_TOL * max(scale, |F|)`.
pub fn certify_nonpositive(kind: CertificateKind, form: CMat, scale: f64) -> PassivityCertificate {
    let f = linalg::hermitian_part(&form);
    let eig = linalg::hermitian_eig(&f);
    let top = if eig.values.is_empty() { 0.0 } else { eig.max() };
    let norm = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tolerance = PSD_TOL * scale.max(norm);
    let pass = top <= tolerance;
    let witness = (!pass).then(|| eig.vector(eig.values.len() - 1));
    PassivityCertificate {
        kind,
        pass,
        margin: -top,
        tolerance,
        marginal: pass && top > 0.0,
        witness,
        violating_form: f,
        warnings: Vec::new(),
    }
}

/// Certify `F <= tol` on `ker G`. The witness is returned in the ambient
/// coordinates of `F`.
pub fn certify_on_kernel(kind: CertificateKind, form: &CMat, constraint: &CMat, scale: f64, expected_dim: Option<usize>) -> PassivityCertificate {
    let (z, _) = linalg::null_space(constraint, NULL_TOL);
    let restricted = z.adjoint() * form * &z;
    let mut cert = certify_nonpositive(kind, restricted, scale);
    cert.witness = cert.witness.map(|eta| &z * eta);
    cert.violating_form = linalg::hermitian_part(form);
    if let Some(k) = expected_dim {
        if z.ncols() != k {
            cert.warnings.push(format!("constraint kernel has dimension {} instead of {}", z.ncols(), k));
        }
    }
    cert
}

/// Pointwise `Sym P_0(z) <= 0` on the sample grid.
pub fn check_sym_p0(s: &PhSubsystem) -> PassivityCertificate {
    check_sym_p0_on(s, &[])
}

pub fn check_sym_p0_on(s: &PhSubsystem, extra: &[f64]) -> PassivityCertificate {
    let points = if s.p0_varies() { model::sample_points(extra) } else { vec![0.0] };
    let mut worst: Option<(f64, CMat)> = None;
    let mut scale: f64 = 0.0;
    for z in points {
        let sym = linalg::hermitian_part(&s.p0_at(z));
        let top = linalg::hermitian_eig(&sym).max();
        scale = scale.max(linalg::max_abs(&sym));
        if worst.as_ref().is_none_or(|(t, _)| top > *t) {
            worst = Some((top, sym));
        }
    }
    let (_, form) = worst.expect("at least one sample point");
    certify_nonpositive(CertificateKind::SymP0, form, scale)
}

fn with_p0(kind: CertificateKind, boundary: PassivityCertificate, p0: PassivityCertificate) -> PassivityCertificate {
    if boundary.pass && !p0.pass {
        let mut cert = p0;
        cert.kind = kind;
        cert.warnings.push("Sym P_0 is not negative semidefinite; witness lives in the state space".into());
        cert
    } else {
        boundary
    }
}

/// `Re <A x, x> <= Re <B x, C x>` for all smooth `x`.
pub fn check_impedance(s: &PhSubsystem) -> PassivityCertificate {
    let p0 = check_sym_p0(s);
    let q = model::flux_form(s).q;
    let m = linalg::hermitian_part(&(s.w_c.adjoint() * &s.w_b)) - q.scale(0.5);
    let scale = (linalg::spectral_norm(&s.w_b) * linalg::spectral_norm(&s.w_c)).max(linalg::spectral_norm(&q));
    let boundary = certify_nonpositive(CertificateKind::Impedance, -m, scale);
    with_p0(CertificateKind::Impedance, boundary, p0)
}

/// `Re <A x, x> <= |B x|^2 - |C x|^2` for all smooth `x`.
pub fn check_scattering(s: &PhSubsystem) -> PassivityCertificate {
    let p0 = check_sym_p0(s);
    let q = model::flux_form(s).q;
    let m = s.w_b.adjoint() * &s.w_b - s.w_c.adjoint() * &s.w_c - q.scale(0.5);
    let scale = linalg::spectral_norm(&s.w_b).powi(2).max(linalg::spectral_norm(&s.w_c).powi(2)).max(linalg::spectral_norm(&q));
    let boundary = certify_nonpositive(CertificateKind::Scattering, -m, scale);
    with_p0(CertificateKind::Scattering, boundary, p0)
}

/// Dissipativity of `A = A_op` restricted to `B x = K C x`. The witness is a
/// trace vector in `ker(W_B - K W_C)`.
pub fn check_dissipative_closure(s: &PhSubsystem, k_mat: &CMat) -> Result<PassivityCertificate, ModelError> {
    let p = s.ports();
    if k_mat.shape() != (p, p) {
        return Err(ModelError::Shape { what: "k_mat".into(), expected: (p, p), got: k_mat.shape() });
    }
    let q = model::flux_form(s).q;
    let g = &s.w_b - k_mat * &s.w_c;
    let boundary = certify_on_kernel(CertificateKind::Closure, &q.scale(0.5), &g, linalg::spectral_norm(&q), Some(p));
    Ok(with_p0(CertificateKind::Closure, boundary, check_sym_p0(s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, real_matrix};
    use crate::model::MatrixFunction;

    fn wave_with(w_b: CMat, w_c: CMat) -> PhSubsystem {
        let p1 = real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        PhSubsystem::new(1, 2, vec![CMat::zeros(2, 2), p1], MatrixFunction::Constant(CMat::identity(2, 2)), w_b, w_c).unwrap()
    }

    fn wave() -> PhSubsystem {
        wave_with(
            real_matrix(2, 4, &[0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0]),
            real_matrix(2, 4, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
        )
    }

    #[test]
    fn sym_p0_examples() {
        let mut s = wave();
        assert!(check_sym_p0(&s).pass);
        s.p_matrices[0] = diag_real(&[-1.0, -2.0]);
        assert!(check_sym_p0(&s).pass);
        s.p_matrices[0] = diag_real(&[1.0, -1.0]);
        let cert = check_sym_p0(&s);
        assert!(!cert.pass);
        let w = cert.witness.unwrap();
        assert!((w[0].norm() - 1.0).abs() < 1e-12 && w[1].norm() < 1e-12);
    }

    #[test]
    fn varying_p0_is_sampled() {
        let s = wave()
            .with_p0_profile(MatrixFunction::Polynomial(vec![diag_real(&[-1.0, -1.0]), diag_real(&[1.5, 0.0])]))
            .unwrap();
        let cert = check_sym_p0(&s);
        assert!(!cert.pass);
        assert!((cert.margin + 0.5).abs() < 1e-12);
    }

    #[test]
    fn wave_is_impedance_passive() {
        let c = check_impedance(&wave());
        assert!(c.pass);
        assert!(c.witness.is_none());
        assert!(c.margin.abs() < 1e-14);
    }

    #[test]
    fn flipped_input_sign_fails_impedance() {
        let s = wave_with(
            real_matrix(2, 4, &[0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0]),
            real_matrix(2, 4, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
        );
        let c = check_impedance(&s);
        assert!(!c.pass);
        let w = c.witness.clone().unwrap();
        assert!(c.violation_at(&w) > 0.0);
    }

    #[test]
    fn scattering_zero_output() {
        // W_C = 0 and W_B spanning the positive eigenspace of 1/2 Q
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut s = wave();
        s.w_b = real_matrix(2, 4, &[h, h, 0.0, 0.0, 0.0, 0.0, h, -h]);
        s.w_c = CMat::zeros(2, 4);
        assert!(check_scattering(&s).pass);
        s.w_b = real_matrix(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(!check_scattering(&s).pass);
    }

    #[test]
    fn closure_examples() {
        let s = wave();
        assert!(check_dissipative_closure(&s, &CMat::zeros(2, 2)).unwrap().pass);
        let k = real_matrix(2, 2, &[-0.5, 0.0, 0.0, 0.0]);
        assert!(check_dissipative_closure(&s, &k).unwrap().pass);
        let k = real_matrix(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let c = check_dissipative_closure(&s, &k).unwrap();
        assert!(!c.pass);
        let w = c.witness.clone().unwrap();
        assert!(c.violation_at(&w) > 0.0);
        // witness satisfies the closure
        let g = &s.w_b - &k * &s.w_c;
        assert!((g * w).norm() < 1e-12);
    }

    #[test]
    fn closure_shape_error() {
        assert!(check_dissipative_closure(&wave(), &CMat::zeros(3, 3)).is_err());
    }

    #[test]
    fn closure_degenerate_kernel_warns() {
        // W_B - K W_C loses rank when K picks a dependent combination
        let mut s = wave();
        s.w_c = s.w_b.clone();
        let k = CMat::identity(2, 2);
        let c = check_dissipative_closure(&s, &k).unwrap();
        assert!(!c.warnings.is_empty());
    }

    #[test]
    fn certificate_json_shape() {
        let c = check_dissipative_closure(&wave(), &real_matrix(2, 2, &[2.0, 0.0, 0.0, 0.0])).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["kind"], "closure");
        assert_eq!(v["pass"], false);
        assert!(v["witness"].is_array());
        assert!(v["margin"].as_f64().unwrap() < 0.0);
    }
}

//! The Cosserat shear–stretch energy in its absolute, relative and lifted
//! (quaternion) forms, the material-parameter reduction, the isochoric
//! projection and both forms of the Euler–Lagrange residual.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rotcore::{covering_map, ensure_rotation, frob2, skew, sym, Mat3, Quat, Vec3};

/// A nonnegative real that may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Extended::Infinite)
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => s.serialize_f64(*v),
            Extended::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Extended::Finite(v)),
            Repr::Str(s) if s == "inf" => Ok(Extended::Infinite),
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "expected number or \"inf\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `μc ≥ μ`: the polar factor is the unique minimizer.
    Classical,
    /// `μc = 0`.
    NonClassicalZero,
    /// `0 < μc < μ`.
    NonClassical,
}

#[derive(Deserialize)]
struct ParamsRepr {
    mu: f64,
    muc: f64,
}

impl TryFrom<ParamsRepr> for MaterialParams {
    type Error = Error;

    fn try_from(r: ParamsRepr) -> Result<Self> {
        MaterialParams::new(r.mu, r.muc)
    }
}

/// Weights `(μ, μc)` of the energy together with the derived scaling
/// parameter `λ = μ/(μ−μc)`, singular radius `ρ = 2μ/(μ−μc)` and
/// `ζ = ρ − 2 = 2μc/(μ−μc)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr")]
pub struct MaterialParams {
    pub mu: f64,
    pub muc: f64,
    pub regime: Regime,
    pub lambda_scale: Extended,
    pub rho: Extended,
    pub zeta: Extended,
}

impl MaterialParams {
    pub fn new(mu: f64, muc: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite() && muc >= 0.0 && muc.is_finite()) {
            return Err(Error::InvalidParams { mu, muc });
        }
        let (regime, lambda_scale, rho, zeta) = if muc >= mu {
            (
                Regime::Classical,
                Extended::Infinite,
                Extended::Infinite,
                Extended::Infinite,
            )
        } else {
            let regime = if muc == 0.0 {
                Regime::NonClassicalZero
            } else {
                Regime::NonClassical
            };
            let denom = mu - muc;
            (
                regime,
                Extended::Finite(mu / denom),
                Extended::Finite(2.0 * mu / denom),
                Extended::Finite(2.0 * muc / denom),
            )
        };
        Ok(MaterialParams {
            mu,
            muc,
            regime,
            lambda_scale,
            rho,
            zeta,
        })
    }

    /// The non-classical limit case `(μ, μc) = (1, 0)`.
    pub fn limit_case() -> Self {
        MaterialParams::new(1.0, 0.0).expect("valid parameters")
    }

    pub fn is_classical(&self) -> bool {
        self.regime == Regime::Classical
    }
}

/// `μ‖sym(M)‖² + μc‖skew(M)‖²`.
pub(crate) fn weighted_norm2(m: &Mat3, p: &MaterialParams) -> f64 {
    let mut e = p.mu * frob2(&sym(m));
    if p.muc != 0.0 {
        e += p.muc * frob2(&skew(m));
    }
    e
}

/// `W(R; F) = μ‖sym(RᵀF − 1)‖² + μc‖skew(RᵀF − 1)‖²`.
pub fn energy(r: &Mat3, f: &Mat3, p: &MaterialParams) -> Result<f64> {
    ensure_rotation(r)?;
    Ok(energy_unchecked(r, f, p))
}

/// [`energy`] without the rotation check, for hot sampling loops.
pub fn energy_unchecked(r: &Mat3, f: &Mat3, p: &MaterialParams) -> f64 {
    let mut ubar = r.transpose() * f;
    ubar[(0, 0)] -= 1.0;
    ubar[(1, 1)] -= 1.0;
    ubar[(2, 2)] -= 1.0;
    weighted_norm2(&ubar, p)
}

pub(crate) fn check_sigma(sigma: &[f64; 3]) -> Result<()> {
    if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::NonPositiveSigma(*sigma));
    }
    if !(sigma[0] >= sigma[1] && sigma[1] >= sigma[2]) {
        return Err(Error::UnorderedSigma(*sigma));
    }
    Ok(())
}

fn relative_defect(rhat: &Mat3, sigma: &[f64; 3]) -> Mat3 {
    let d = Mat3::from_diagonal(&Vec3::from(*sigma));
    rhat * d - Mat3::identity()
}

/// Energy of a relative rotation, `μ‖sym(R̂D − 1)‖² + μc‖skew(R̂D − 1)‖²`.
pub fn relative_energy(rhat: &Mat3, sigma: &[f64; 3], p: &MaterialParams) -> Result<f64> {
    ensure_rotation(rhat)?;
    check_sigma(sigma)?;
    Ok(weighted_norm2(&relative_defect(rhat, sigma), p))
}

/// Relative energy of the covering polynomial applied to any nonzero
/// quaternion; off the unit sphere this is only a formal extension.
pub fn lifted_energy(q: Quat, sigma: &[f64; 3], p: &MaterialParams) -> Result<f64> {
    if q.norm_squared() == 0.0 {
        return Err(Error::ZeroQuaternion);
    }
    Ok(weighted_norm2(&relative_defect(&covering_map(q), sigma), p))
}

/// Coefficients of the covering polynomial as quadratic forms:
/// `π(q)_ij = qᵀ P_ij q + δ_ij` in coordinates `(w, x, y, z)`.
fn covering_forms() -> [[Matrix4<f64>; 3]; 3] {
    const W: usize = 0;
    const X: usize = 1;
    const Y: usize = 2;
    const Z: usize = 3;
    let pair = |terms: &[(usize, usize, f64)]| {
        let mut m = Matrix4::zeros();
        for &(a, b, c) in terms {
            if a == b {
                m[(a, a)] += c;
            } else {
                m[(a, b)] += c;
                m[(b, a)] += c;
            }
        }
        m
    };
    [
        [
            pair(&[(Y, Y, -2.0), (Z, Z, -2.0)]),
            pair(&[(X, Y, 1.0), (W, Z, -1.0)]),
            pair(&[(X, Z, 1.0), (W, Y, 1.0)]),
        ],
        [
            pair(&[(X, Y, 1.0), (W, Z, 1.0)]),
            pair(&[(X, X, -2.0), (Z, Z, -2.0)]),
            pair(&[(Y, Z, 1.0), (W, X, -1.0)]),
        ],
        [
            pair(&[(X, Z, 1.0), (W, Y, -1.0)]),
            pair(&[(Y, Z, 1.0), (W, X, 1.0)]),
            pair(&[(X, X, -2.0), (Y, Y, -2.0)]),
        ],
    ]
}

/// Value, gradient and exact Hessian of the lifted energy in ambient
/// coordinates `(w, x, y, z)`.
///
/// Each entry of `sym(π(q)D − 1)` and `skew(π(q)D − 1)` is a quadratic form
/// plus a constant, so the quartic energy is a weighted sum of their squares.
pub fn lifted_energy_derivatives(
    q: Quat,
    sigma: &[f64; 3],
    p: &MaterialParams,
) -> (f64, Vector4<f64>, Matrix4<f64>) {
    let forms = covering_forms();
    let qv = Vector4::from(q.to_array());
    let mut value = 0.0;
    let mut grad = Vector4::zeros();
    let mut hess = Matrix4::zeros();
    let mut add = |a: Matrix4<f64>, c: f64, weight: f64| {
        if weight == 0.0 {
            return;
        }
        let g = (qv.transpose() * a * qv)[0] + c;
        let dg = a * qv * 2.0;
        value += weight * g * g;
        grad += dg * (2.0 * weight * g);
        hess += (dg * dg.transpose() + a * (2.0 * g)) * (2.0 * weight);
    };
    for i in 0..3 {
        for j in 0..3 {
            let a_ij = forms[i][j] * sigma[j];
            let a_ji = forms[j][i] * sigma[i];
            // M_ij = π_ij σ_j − δ_ij and π_ii carries the constant 1
            let c = if i == j { sigma[i] - 1.0 } else { 0.0 };
            add((a_ij + a_ji) * 0.5, c, p.mu);
            if i != j {
                add((a_ij - a_ji) * 0.5, 0.0, p.muc);
            }
        }
    }
    (value, grad, hess)
}

/// `F̃ = F / λ` with `λ = μ/(μ−μc)`.
pub fn rescale_f(f: &Mat3, p: &MaterialParams) -> Result<Mat3> {
    match p.lambda_scale {
        Extended::Finite(lambda) => Ok(f / lambda),
        Extended::Infinite => Err(Error::ClassicalRegime),
    }
}

/// `F / det(F)^{1/3}`.
pub fn isochoric_project(f: &Mat3) -> Result<Mat3> {
    let det = f.determinant();
    if !(det > crate::rotcore::EPS_DET) {
        return Err(Error::NonInvertible { det });
    }
    Ok(f / det.cbrt())
}

/// `‖skew((μ−μc)Ū² − 2μŪ)‖` with `Ū = RᵀF`; vanishes at critical rotations.
pub fn el_residual_matrix(r: &Mat3, f: &Mat3, p: &MaterialParams) -> Result<f64> {
    ensure_rotation(r)?;
    let ubar = r.transpose() * f;
    let m = ubar * ubar * (p.mu - p.muc) - ubar * (2.0 * p.mu);
    Ok(skew(&m).norm())
}

/// Left-hand sides of the quaternion Euler–Lagrange system for the limit
/// case `(1, 0)`, in the order `(∂w, ∂x, ∂y, ∂z, constraint)`.
///
/// The first four are the partial derivatives of the Lagrange function
/// divided by four.
pub fn el_residual_quat(q: Quat, lambda: f64, sigma: &[f64; 3]) -> [f64; 5] {
    let Quat { w, x, y, z } = q;
    let [s1, s2, s3] = *sigma;
    let (w2, x2, y2, z2) = (w * w, x * x, y * y, z * z);
    let (s12, s23, s31) = (s1 + s2, s2 + s3, s3 + s1);
    let (d12, d23, d31) = (s1 - s2, s2 - s3, s3 - s1);
    let (d12s, d23s, d31s) = (d12 * d12, d23 * d23, d31 * d31);
    let half = 0.5 * lambda;
    [
        w * (d23s * x2 + d31s * y2 + d12s * z2 - half),
        x * (d23s * w2
            + 4.0 * (s2 * s2 + s3 * s3) * x2
            + (4.0 * s3 * s3 + s12 * s12) * y2
            + (4.0 * s2 * s2 + s31 * s31) * z2
            - (d23s + (s23 - 2.0) * s23)
            - half),
        y * (d31s * w2
            + 4.0 * (s3 * s3 + s1 * s1) * y2
            + (4.0 * s1 * s1 + s23 * s23) * z2
            + (4.0 * s3 * s3 + s12 * s12) * x2
            - (d31s + (s31 - 2.0) * s31)
            - half),
        z * (d12s * w2
            + 4.0 * (s1 * s1 + s2 * s2) * z2
            + (4.0 * s2 * s2 + s31 * s31) * x2
            + (4.0 * s1 * s1 + s23 * s23) * y2
            - (d12s + (s12 - 2.0) * s12)
            - half),
        w2 + x2 + y2 + z2 - 1.0,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotcore::{rotation_z, svd_ordered};

    fn p(mu: f64, muc: f64) -> MaterialParams {
        MaterialParams::new(mu, muc).unwrap()
    }

    #[test]
    fn params_derived_quantities() {
        let half = p(1.0, 0.5);
        assert_eq!(half.regime, Regime::NonClassical);
        assert_eq!(half.lambda_scale, Extended::Finite(2.0));
        assert_eq!(half.rho, Extended::Finite(4.0));
        assert_eq!(half.zeta, Extended::Finite(2.0));

        let quarter = p(1.0, 0.25);
        assert!((quarter.lambda_scale.finite().unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((quarter.rho.finite().unwrap() - 8.0 / 3.0).abs() < 1e-15);

        assert_eq!(p(1.0, 0.0).regime, Regime::NonClassicalZero);
        assert_eq!(p(1.0, 0.0).lambda_scale, Extended::Finite(1.0));
        assert_eq!(p(1.0, 1.0).regime, Regime::Classical);
        assert!(p(1.0, 1.0).rho.is_infinite());
        assert!(p(1.0, 3.0).zeta.is_infinite());
        assert!(MaterialParams::new(0.0, 0.0).is_err());
        assert!(MaterialParams::new(1.0, -0.1).is_err());
    }

    #[test]
    fn energy_examples() {
        let lc = MaterialParams::limit_case();
        let id = Mat3::identity();
        assert_eq!(energy(&id, &id, &lc).unwrap(), 0.0);
        let f = Mat3::from_diagonal(&Vec3::new(4.0, 2.0, 0.5));
        assert_eq!(energy(&id, &f, &lc).unwrap(), 10.25);
        let r = Mat3::from_diagonal(&Vec3::new(-1.0, -1.0, 1.0));
        let (s1, s2, s3) = (4.0f64, 2.0f64, 0.5f64);
        let want = (s1 + 1.0).powi(2) + (s2 + 1.0).powi(2) + (s3 - 1.0).powi(2);
        assert_eq!(energy(&r, &f, &lc).unwrap(), want);
        assert!(matches!(
            energy(&(id * 2.0), &f, &lc),
            Err(Error::NotARotation { .. })
        ));
    }

    #[test]
    fn relative_energy_examples() {
        let lc = MaterialParams::limit_case();
        let sigma = [4.0, 2.0, 0.5];
        let e = relative_energy(&Mat3::identity(), &sigma, &p(2.0, 0.0)).unwrap();
        assert!((e - 2.0 * (9.0 + 1.0 + 0.25)).abs() < 1e-13);
        let b = (1.0f64 / 3.0).acos();
        let e = relative_energy(&rotation_z(b), &sigma, &lc).unwrap();
        assert!((e - 2.25).abs() < 1e-13);
        assert!(matches!(
            relative_energy(&Mat3::identity(), &[1.0, 0.0, 0.5], &lc),
            Err(Error::NonPositiveSigma(_))
        ));
    }

    #[test]
    fn relative_matches_absolute() {
        let f = Mat3::new(0.3, -1.2, 0.7, 0.9, 0.4, -0.5, -0.2, 0.8, 1.1);
        let dec = svd_ordered(&f).unwrap();
        let rhat = rotation_z(0.4) * crate::rotcore::rotation_about(&Vec3::x(), -1.1);
        let pp = p(1.0, 0.3);
        let abs = crate::rotcore::recover_absolute(&rhat, &dec);
        let lhs = energy(&abs, &f, &pp).unwrap();
        let rhs = relative_energy(&rhat, &dec.sigma, &pp).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn lifted_energy_examples() {
        let lc = MaterialParams::limit_case();
        assert_eq!(
            lifted_energy(Quat::IDENTITY, &[1.0, 1.0, 1.0], &lc).unwrap(),
            0.0
        );
        let q = Quat::new((2.0f64 / 3.0).sqrt(), 0.0, 0.0, (1.0f64 / 3.0).sqrt());
        let e = lifted_energy(q, &[4.0, 2.0, 0.5], &lc).unwrap();
        assert!((e - 2.25).abs() < 1e-13);
        let g = Quat::new(0.3, -0.7, 0.2, 1.1);
        assert_eq!(
            lifted_energy(g, &[4.0, 2.0, 0.5], &lc).unwrap(),
            lifted_energy(-g, &[4.0, 2.0, 0.5], &lc).unwrap()
        );
        assert_eq!(
            lifted_energy(Quat::new(0.0, 0.0, 0.0, 0.0), &[1.0, 1.0, 1.0], &lc),
            Err(Error::ZeroQuaternion)
        );
    }

    #[test]
    fn derivatives_match_value_and_finite_differences() {
        let pp = p(1.0, 0.3);
        let sigma = [3.0, 1.5, 0.4];
        let q = Quat::new(0.4, -0.3, 0.8, 0.2);
        let (v, g, h) = lifted_energy_derivatives(q, &sigma, &pp);
        assert!((v - lifted_energy(q, &sigma, &pp).unwrap()).abs() < 1e-12);
        let step = 1e-5;
        let base = q.to_array();
        for k in 0..4 {
            let mut a = base;
            let mut b = base;
            a[k] += step;
            b[k] -= step;
            let fa = lifted_energy(Quat::from_array(a), &sigma, &pp).unwrap();
            let fb = lifted_energy(Quat::from_array(b), &sigma, &pp).unwrap();
            assert!(((fa - fb) / (2.0 * step) - g[k]).abs() < 1e-7);
            let (_, ga, _) = lifted_energy_derivatives(Quat::from_array(a), &sigma, &pp);
            let (_, gb, _) = lifted_energy_derivatives(Quat::from_array(b), &sigma, &pp);
            for l in 0..4 {
                assert!(((ga[l] - gb[l]) / (2.0 * step) - h[(l, k)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rescale_examples() {
        let f = Mat3::from_diagonal(&Vec3::new(4.0, 2.0, 0.5));
        assert_eq!(rescale_f(&f, &p(1.0, 0.0)).unwrap(), f);
        assert_eq!(
            rescale_f(&f, &p(1.0, 0.5)).unwrap(),
            Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 0.25))
        );
        assert_eq!(rescale_f(&f, &p(1.0, 1.0)), Err(Error::ClassicalRegime));
    }

    #[test]
    fn isochoric_examples() {
        let f = Mat3::from_diagonal(&Vec3::new(8.0, 1.0, 1.0));
        let iso = isochoric_project(&f).unwrap();
        assert!((iso - Mat3::from_diagonal(&Vec3::new(4.0, 0.5, 0.5))).norm() < 1e-15);
        let unimodular = Mat3::new(2.0, 1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 1.0);
        assert!((isochoric_project(&unimodular).unwrap() - unimodular).norm() < 1e-15);
        assert!(isochoric_project(&Mat3::zeros()).is_err());
    }

    #[test]
    fn el_matrix_vanishes_at_polar() {
        let f = Mat3::new(0.3, -1.2, 0.7, 0.9, 0.4, -0.5, -0.2, 0.8, 1.1);
        let rp = crate::rotcore::polar_factor(&f).unwrap();
        for pp in [p(1.0, 0.0), p(1.0, 0.5), p(2.0, 3.0)] {
            assert!(el_residual_matrix(&rp, &f, &pp).unwrap() < 1e-12);
        }
        let r = rotation_z(0.7) * rp;
        assert!(el_residual_matrix(&r, &f, &p(1.0, 0.0)).unwrap() > 1e-6);
    }

    #[test]
    fn el_quat_examples() {
        assert_eq!(
            el_residual_quat(Quat::IDENTITY, 0.0, &[4.0, 2.0, 0.5]),
            [0.0; 5]
        );
        let sigma = [4.0, 2.0, 0.5];
        let q = Quat::new((2.0f64 / 3.0).sqrt(), 0.0, 0.0, (1.0f64 / 3.0).sqrt());
        let lambda = 4.0 * (6.0 - 2.0) / 6.0;
        let r = el_residual_quat(q, lambda, &sigma);
        assert!(r.iter().all(|c| c.abs() < 1e-12), "{r:?}");
        let r = el_residual_quat(Quat::new(0.5, 0.5, 0.5, 0.5), 0.0, &[3.0, 1.7, 0.2]);
        assert!(r.iter().take(4).any(|c| c.abs() > 1e-3));
    }

    #[test]
    fn el_quat_is_quarter_gradient_of_lagrangian() {
        // ∂L/∂q = ∇W − 2λq; the printed system equals that divided by 4.
        let lc = MaterialParams::limit_case();
        let sigma = [3.3, 1.2, 0.45];
        let q = Quat::new(0.2, 0.5, -0.4, 0.7);
        let lambda = 1.7;
        let (_, g, _) = lifted_energy_derivatives(q, &sigma, &lc);
        let r = el_residual_quat(q, lambda, &sigma);
        let qa = q.to_array();
        for k in 0..4 {
            let want = (g[k] - 2.0 * lambda * qa[k]) / 4.0;
            assert!(
                (r[k] - want).abs() < 1e-12,
                "component {k}: {} vs {want}",
                r[k]
            );
        }
    }

    #[test]
    fn extended_serde() {
        let js = serde_json::to_string(&[Extended::Finite(2.5), Extended::Infinite]).unwrap();
        assert_eq!(js, "[2.5,\"inf\"]");
        let back: Vec<Extended> = serde_json::from_str(&js).unwrap();
        assert_eq!(back, vec![Extended::Finite(2.5), Extended::Infinite]);
        let pp: MaterialParams =
            serde_json::from_str(&serde_json::to_string(&p(1.0, 0.25)).unwrap()).unwrap();
        assert_eq!(pp, p(1.0, 0.25));
    }
}

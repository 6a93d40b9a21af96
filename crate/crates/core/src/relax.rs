//! Relaxed polar factors: the energy-minimizing rotations for general weights
//! `(μ, μc)`, the classical/non-classical domain split, the reduced energy and
//! a few geometric predicates around them.

use serde::{Deserialize, Serialize};

use crate::energy::{check_sigma, el_residual_matrix, Extended, MaterialParams, Regime};
use crate::error::{Error, Result};
use crate::rotcore::{rotation_z, skew, svd_ordered, sym, Decomposition, Mat3, Vec3};

/// Relative width of the band around `s12 = ρ` reported as [`Domain::Boundary`].
pub const BOUNDARY_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Classical,
    NonClassical,
    Boundary,
}

/// The minimizer pair `rpolar±` together with its descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedRotations {
    /// `Rpᵀ r_plus` is the rotation by `+beta_hat` about `axis`.
    pub r_plus: Mat3,
    pub r_minus: Mat3,
    pub beta_hat: f64,
    /// Eigenvector `q₃` of the smallest singular value.
    pub axis: Vec3,
    pub domain: Domain,
    pub reduced_energy: f64,
    pub coincide: bool,
    /// `σ₂ − σ₃` below the gap tolerance; `axis` is then not unique.
    pub degenerate_axis: bool,
    /// Matrix Euler–Lagrange residuals at `r_plus` and `r_minus`.
    pub el_residuals: [f64; 2],
    pub decomposition: Decomposition,
}

/// `u_mmp = (σ₁ + σ₂)/2`.
pub fn mmp_stretch(f: &Mat3) -> Result<f64> {
    let dec = svd_ordered(f)?;
    Ok(0.5 * dec.s(1, 2))
}

/// `s_mmp = u_mmp − 1`.
pub fn mmp_strain(f: &Mat3) -> Result<f64> {
    Ok(mmp_stretch(f)? - 1.0)
}

/// Domain of a singular value triple; only `σ₁ + σ₂` matters.
pub fn classify_sigma(sigma: &[f64; 3], p: &MaterialParams) -> Domain {
    let s12 = sigma[0] + sigma[1];
    match p.rho {
        Extended::Infinite => Domain::Classical,
        Extended::Finite(rho) => {
            if (s12 - rho).abs() <= BOUNDARY_REL_TOL * s12.max(rho) {
                Domain::Boundary
            } else if s12 < rho {
                Domain::Classical
            } else {
                Domain::NonClassical
            }
        }
    }
}

pub fn classify_domain(f: &Mat3, p: &MaterialParams) -> Result<Domain> {
    Ok(classify_sigma(&svd_ordered(f)?.sigma, p))
}

/// `arccos(ρ/s12)` on the non-classical domain, zero otherwise.
pub fn optimal_angle_from_sigma(sigma: &[f64; 3], p: &MaterialParams) -> f64 {
    match (classify_sigma(sigma, p), p.rho) {
        (Domain::NonClassical, Extended::Finite(rho)) => (rho / (sigma[0] + sigma[1])).acos(),
        _ => 0.0,
    }
}

pub fn optimal_relative_angle(f: &Mat3, p: &MaterialParams) -> Result<f64> {
    Ok(optimal_angle_from_sigma(&svd_ordered(f)?.sigma, p))
}

/// Reduced energy `min_R W(R; F)` from ordered singular values.
pub fn reduced_energy_from_sigma(sigma: &[f64; 3], p: &MaterialParams) -> f64 {
    let [s1, s2, s3] = *sigma;
    match (classify_sigma(sigma, p), p.rho) {
        (Domain::NonClassical, Extended::Finite(rho)) => {
            let (d12, s12) = (s1 - s2, s1 + s2);
            0.5 * p.mu * d12 * d12 + p.mu * (s3 - 1.0).powi(2) + 0.5 * p.muc * s12 * s12
                - p.muc * rho
        }
        _ => p.mu * ((s1 - 1.0).powi(2) + (s2 - 1.0).powi(2) + (s3 - 1.0).powi(2)),
    }
}

/// [`reduced_energy_from_sigma`] for a triple in any order.
pub fn reduced_energy_unordered(sigma: &[f64; 3], p: &MaterialParams) -> Result<f64> {
    let mut s = *sigma;
    s.sort_by(|a, b| b.total_cmp(a));
    check_sigma(&s)?;
    Ok(reduced_energy_from_sigma(&s, p))
}

pub fn reduced_energy(f: &Mat3, p: &MaterialParams) -> Result<f64> {
    Ok(reduced_energy_from_sigma(&svd_ordered(f)?.sigma, p))
}

fn stationarity_tol(f: &Mat3, p: &MaterialParams) -> f64 {
    1e-10 * (p.mu + p.muc).max(1.0) * (1.0 + f.norm_squared())
}

/// The relaxed polar factors `rpolar±(F)`.
///
/// On the classical domain and its boundary both equal the polar factor.
/// Otherwise `rpolar± = Rp · Q · R_z(±β̂) · Qᵀ` with `β̂ = arccos(ρ/s12)`.
pub fn relaxed_polar(f: &Mat3, p: &MaterialParams) -> Result<RelaxedRotations> {
    let dec = svd_ordered(f)?;
    let domain = classify_sigma(&dec.sigma, p);
    let beta_hat = optimal_angle_from_sigma(&dec.sigma, p);
    let (r_plus, r_minus) = if domain == Domain::NonClassical {
        let frame = |b: f64| dec.rp * dec.q * rotation_z(b) * dec.q.transpose();
        (frame(beta_hat), frame(-beta_hat))
    } else {
        (dec.rp, dec.rp)
    };
    let el_residuals = [
        el_residual_matrix(&r_plus, f, p)?,
        el_residual_matrix(&r_minus, f, p)?,
    ];
    let residual = el_residuals[0].max(el_residuals[1]);
    if !(residual <= stationarity_tol(f, p)) {
        return Err(Error::NotStationary { residual });
    }
    Ok(RelaxedRotations {
        r_plus,
        r_minus,
        beta_hat,
        axis: dec.q3(),
        domain,
        reduced_energy: reduced_energy_from_sigma(&dec.sigma, p),
        coincide: domain != Domain::NonClassical,
        degenerate_axis: dec.degenerate[1],
        el_residuals,
        decomposition: dec,
    })
}

/// Minimizer `A* = skew(RᵀF)` of `‖F − R(1 + A)‖²` over skew `A` and the
/// attained squared distance `‖sym(RᵀF) − 1‖²`.
pub fn tangent_bundle_distance(f: &Mat3, r: &Mat3) -> Result<(Mat3, f64)> {
    crate::rotcore::ensure_rotation(r)?;
    let ubar = r.transpose() * f;
    let a_star = skew(&ubar);
    let dist2 = (sym(&ubar) - Mat3::identity()).norm_squared();
    Ok((a_star, dist2))
}

/// Radius `ζ²/2` of the Frobenius neighborhood of `SO(3)` (in terms of
/// `‖U − 1‖²`) that lies inside the classical domain.
pub fn classical_neighborhood_radius(p: &MaterialParams) -> Result<f64> {
    match (p.regime, p.zeta) {
        (Regime::NonClassical, Extended::Finite(zeta)) => Ok(0.5 * zeta * zeta),
        _ => Err(Error::NotStrictlyNonClassical),
    }
}

/// Whether a unimodular `F` lies outside the classical domain of `(μ, 0)`.
pub fn sl3_nonclassical_check(f: &Mat3) -> Result<bool> {
    let det = f.determinant();
    if !((det - 1.0).abs() < 1e-9) {
        return Err(Error::NotUnimodular { det });
    }
    Ok(classify_domain(f, &MaterialParams::limit_case())? != Domain::Classical)
}

/// `D_ε = diag(ρ−1+ε, 1, 1/(ρ−1+ε))`: unimodular and strictly non-classical.
pub fn d_epsilon_witness(p: &MaterialParams, eps: f64) -> Result<Mat3> {
    let rho = p.rho.finite().ok_or(Error::ClassicalRegime)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let a = rho - 1.0 + eps;
    Ok(Mat3::from_diagonal(&Vec3::new(a, 1.0, 1.0 / a)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::energy;
    use crate::rotcore::{axis_angle, polar_factor, rotation_about};

    fn p(mu: f64, muc: f64) -> MaterialParams {
        MaterialParams::new(mu, muc).unwrap()
    }

    fn diag(a: f64, b: f64, c: f64) -> Mat3 {
        Mat3::from_diagonal(&Vec3::new(a, b, c))
    }

    #[test]
    fn mmp_examples() {
        assert_eq!(mmp_stretch(&Mat3::identity()).unwrap(), 1.0);
        assert_eq!(mmp_strain(&Mat3::identity()).unwrap(), 0.0);
        assert_eq!(mmp_stretch(&diag(4.0, 2.0, 0.5)).unwrap(), 3.0);
        let r = rotation_about(&Vec3::new(1.0, 2.0, -1.0).normalize(), 0.8);
        assert!((mmp_stretch(&(r * diag(4.0, 2.0, 0.5))).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn domain_examples() {
        let lc = MaterialParams::limit_case();
        assert_eq!(
            classify_domain(&diag(0.9, 0.8, 0.7), &lc).unwrap(),
            Domain::Classical
        );
        assert_eq!(
            classify_domain(&diag(4.0, 2.0, 0.5), &p(1.0, 0.5)).unwrap(),
            Domain::NonClassical
        );
        assert_eq!(
            classify_domain(&diag(40.0, 20.0, 0.5), &p(1.0, 1.0)).unwrap(),
            Domain::Classical
        );
        assert_eq!(
            classify_domain(&Mat3::identity(), &lc).unwrap(),
            Domain::Boundary
        );
    }

    #[test]
    fn angle_examples() {
        let f = diag(4.0, 2.0, 0.5);
        let b = optimal_relative_angle(&f, &MaterialParams::limit_case()).unwrap();
        assert!((b - 1.230_959_417_340_774_6).abs() < 1e-12);
        let b = optimal_relative_angle(&f, &p(1.0, 0.5)).unwrap();
        assert!((b - (2.0f64 / 3.0).acos()).abs() < 1e-15);
        assert!((b - 0.841_068_670_567_93).abs() < 1e-12);
        assert_eq!(
            optimal_relative_angle(&diag(3.0, 1.0, 0.5), &p(1.0, 0.5)).unwrap(),
            0.0
        );
        assert_eq!(optimal_relative_angle(&f, &p(1.0, 2.0)).unwrap(), 0.0);
    }

    #[test]
    fn relaxed_polar_fig_example() {
        let f = diag(4.0, 2.0, 0.5);
        let rr = relaxed_polar(&f, &MaterialParams::limit_case()).unwrap();
        assert_eq!(rr.domain, Domain::NonClassical);
        assert!(!rr.coincide);
        let ap = axis_angle(&rr.r_plus).unwrap();
        let am = axis_angle(&rr.r_minus).unwrap();
        let b = (1.0f64 / 3.0).acos();
        assert!((ap.angle - b).abs() < 1e-12 && (am.angle + b).abs() < 1e-12);
        assert_eq!(ap.axis, [0.0, 0.0, 1.0]);
        assert!((rr.reduced_energy - 2.25).abs() < 1e-12);
        let lc = MaterialParams::limit_case();
        assert!((energy(&rr.r_plus, &f, &lc).unwrap() - 2.25).abs() < 1e-12);
        assert!((energy(&rr.r_minus, &f, &lc).unwrap() - 2.25).abs() < 1e-12);
    }

    #[test]
    fn broken_scaling_invariance() {
        let lc = MaterialParams::limit_case();
        let f = diag(4.0, 2.0, 0.5);
        let scaled = relaxed_polar(&(f * 0.25), &lc).unwrap();
        assert_eq!(scaled.domain, Domain::Classical);
        assert_eq!(scaled.r_plus, Mat3::identity());
        assert!(scaled.coincide);
        let full = relaxed_polar(&f, &lc).unwrap();
        assert!((full.r_plus - scaled.r_plus).norm() > 0.1);
    }

    #[test]
    fn reduced_energy_examples() {
        let lc = MaterialParams::limit_case();
        assert!((reduced_energy(&diag(0.9, 0.8, 0.7), &lc).unwrap() - 0.14).abs() < 1e-14);
        assert!((reduced_energy(&diag(4.0, 2.0, 0.5), &lc).unwrap() - 2.25).abs() < 1e-14);
        let f = diag(4.0, 2.0, 0.5);
        let half = p(1.0, 0.5);
        assert!((reduced_energy(&f, &half).unwrap() - 9.25).abs() < 1e-12);
        let rr = relaxed_polar(&f, &half).unwrap();
        assert!((energy(&rr.r_plus, &f, &half).unwrap() - 9.25).abs() < 1e-12);
        for s in [1.0, 2.0, 5.0] {
            assert!(reduced_energy(&diag(s, s, 1.0), &lc).unwrap() < 1e-12);
        }
    }

    #[test]
    fn reduced_energy_is_continuous_at_branch_point() {
        for pp in [p(1.0, 0.0), p(1.0, 0.25), p(2.0, 0.5), p(1.0, 0.9)] {
            let rho = pp.rho.finite().unwrap();
            let at = |s12: f64| {
                reduced_energy_from_sigma(&[0.5 * s12 + 0.1, 0.5 * s12 - 0.1, 0.05], &pp)
            };
            let lhs = at(rho * (1.0 - 1e-9));
            let rhs = at(rho * (1.0 + 1e-9));
            assert!(
                (lhs - rhs).abs() < 1e-6 * (1.0 + lhs.abs()),
                "{lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn tangent_bundle_examples() {
        let r = rotation_about(&Vec3::new(0.2, -0.4, 1.0).normalize(), 1.3);
        let a = Mat3::new(0.0, 0.3, -0.2, -0.3, 0.0, 0.7, 0.2, -0.7, 0.0);
        let f = r * (Mat3::identity() + a);
        let (a_star, d2) = tangent_bundle_distance(&f, &r).unwrap();
        assert!(d2 < 1e-28);
        assert!((a_star - a).norm() < 1e-14);
        let (_, d2) = tangent_bundle_distance(&diag(4.0, 2.0, 0.5), &Mat3::identity()).unwrap();
        assert_eq!(d2, 10.25);
        let rr = relaxed_polar(&diag(4.0, 2.0, 0.5), &MaterialParams::limit_case()).unwrap();
        let (_, d2) = tangent_bundle_distance(&diag(4.0, 2.0, 0.5), &rr.r_plus).unwrap();
        assert!((d2 - 2.25).abs() < 1e-12);
    }

    #[test]
    fn neighborhood_radius_examples() {
        assert_eq!(classical_neighborhood_radius(&p(1.0, 0.5)).unwrap(), 2.0);
        assert!((classical_neighborhood_radius(&p(1.0, 0.25)).unwrap() - 2.0 / 9.0).abs() < 1e-15);
        assert!(classical_neighborhood_radius(&p(1.0, 1e-6)).unwrap() < 1e-11);
        assert_eq!(
            classical_neighborhood_radius(&p(1.0, 0.0)),
            Err(Error::NotStrictlyNonClassical)
        );
        assert_eq!(
            classical_neighborhood_radius(&p(1.0, 1.0)),
            Err(Error::NotStrictlyNonClassical)
        );
    }

    #[test]
    fn sl3_examples() {
        assert!(sl3_nonclassical_check(&Mat3::identity()).unwrap());
        assert_eq!(
            classify_domain(&Mat3::identity(), &MaterialParams::limit_case()).unwrap(),
            Domain::Boundary
        );
        assert!(sl3_nonclassical_check(&diag(2.0, 1.0, 0.5)).unwrap());
        assert!(matches!(
            sl3_nonclassical_check(&diag(2.0, 1.0, 1.0)),
            Err(Error::NotUnimodular { .. })
        ));
    }

    #[test]
    fn witness_examples() {
        let d = d_epsilon_witness(&p(1.0, 0.5), 0.1).unwrap();
        assert!((d - diag(3.1, 1.0, 1.0 / 3.1)).norm() < 1e-15);
        let d = d_epsilon_witness(&MaterialParams::limit_case(), 0.5).unwrap();
        assert!((d - diag(1.5, 1.0, 2.0 / 3.0)).norm() < 1e-15);
        for eps in [1e-6, 1.0, 100.0] {
            let d = d_epsilon_witness(&p(1.0, 0.5), eps).unwrap();
            assert!((d.determinant() - 1.0).abs() < 1e-12);
            assert_eq!(
                classify_domain(&d, &p(1.0, 0.5)).unwrap(),
                Domain::NonClassical
            );
        }
        assert_eq!(
            d_epsilon_witness(&p(1.0, 1.0), 0.1),
            Err(Error::ClassicalRegime)
        );
    }

    #[test]
    fn classical_regime_returns_polar() {
        let f = Mat3::new(3.0, 0.4, -0.2, 0.1, 2.0, 0.3, 0.5, -0.1, 0.4);
        let rr = relaxed_polar(&f, &p(1.0, 1.0)).unwrap();
        assert_eq!(rr.domain, Domain::Classical);
        assert_eq!(rr.beta_hat, 0.0);
        assert_eq!(rr.r_plus, polar_factor(&f).unwrap());
    }

    #[test]
    fn angle_is_monotone_towards_pi() {
        let pp = p(1.0, 0.25);
        let mut last = 0.0;
        for k in 1..200 {
            let s12 = 8.0 / 3.0 + 0.05 * f64::from(k) * f64::from(k);
            let b = optimal_angle_from_sigma(&[0.5 * s12 + 0.1, 0.5 * s12 - 0.1, 0.05], &pp);
            assert!(b > last);
            last = b;
        }
        assert!(last < std::f64::consts::FRAC_PI_2 + 1e-12);
    }
}

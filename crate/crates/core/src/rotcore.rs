//! Fixed-size 3×3 linear algebra: ordered SVD and polar decomposition,
//! quaternions and the covering map onto SO(3), axis–angle conversion and
//! the Klein-four symmetry orbit of a relative rotation.
//!
//! Matrices are `nalgebra::Matrix3<f64>`; every routine here is a pure
//! function of its arguments.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat3 = Matrix3<f64>;
pub type Vec3 = Vector3<f64>;

/// Determinant threshold below which a matrix counts as singular.
pub const EPS_DET: f64 = 1e-12;
/// Frobenius defect `‖MᵀM − 1‖` tolerated for an orthogonal matrix.
pub const EPS_ORTH: f64 = 1e-9;
/// Relative singular-value gap (times σ₁) below which a gap is degenerate.
pub const EPS_GAP_REL: f64 = 1e-8;

const JACOBI_MAX_SWEEPS: usize = 30;
const JACOBI_REL_THRESHOLD: f64 = 1e-14;

pub fn sym(m: &Mat3) -> Mat3 {
    (m + m.transpose()) * 0.5
}

pub fn skew(m: &Mat3) -> Mat3 {
    (m - m.transpose()) * 0.5
}

/// Squared Frobenius norm.
pub fn frob2(m: &Mat3) -> f64 {
    m.iter().map(|v| v * v).sum()
}

pub fn orthogonality_defect(m: &Mat3) -> f64 {
    (m.transpose() * m - Mat3::identity()).norm()
}

pub fn is_invertible(m: &Mat3) -> bool {
    m.determinant().abs() > EPS_DET
}

pub fn is_proper(m: &Mat3) -> bool {
    m.determinant() > 0.0
}

pub fn is_orthogonal(m: &Mat3) -> bool {
    orthogonality_defect(m) < EPS_ORTH
}

pub fn is_rotation(m: &Mat3) -> bool {
    is_orthogonal(m) && is_proper(m)
}

pub fn is_symmetric(m: &Mat3, tol: f64) -> bool {
    skew(m).norm() <= tol
}

pub fn is_skew(m: &Mat3, tol: f64) -> bool {
    sym(m).norm() <= tol
}

/// Fails with [`Error::NotARotation`] unless `m` lies in SO(3) within [`EPS_ORTH`].
pub fn ensure_rotation(m: &Mat3) -> Result<()> {
    let defect = orthogonality_defect(m);
    let det = m.determinant();
    if defect < EPS_ORTH && det > 0.0 {
        Ok(())
    } else {
        Err(Error::NotARotation { defect, det })
    }
}

pub fn from_rows(rows: [[f64; 3]; 3]) -> Mat3 {
    Mat3::new(
        rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0],
        rows[2][1], rows[2][2],
    )
}

pub fn to_rows(m: &Mat3) -> [[f64; 3]; 3] {
    [
        [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
        [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
        [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
    ]
}

/// Builds a matrix from nine coefficients in row-major order.
pub fn from_row_major(c: &[f64; 9]) -> Mat3 {
    Mat3::from_row_slice(c)
}

pub fn to_row_major(m: &Mat3) -> [f64; 9] {
    let r = to_rows(m);
    [
        r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
    ]
}

/// A quaternion `w + ix + jy + kz`, not necessarily of unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat::new(1.0, 0.0, 0.0, 0.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    pub fn from_array(c: [f64; 4]) -> Self {
        Quat::new(c[0], c[1], c[2], c[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm_squared(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scale(self, s: f64) -> Self {
        Quat::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    /// Representative of `{q, −q}` with `w > 0`, or `w = 0` and the first
    /// nonzero of `(x, y, z)` positive.
    pub fn canonical(self) -> Self {
        let flip = if self.w != 0.0 {
            self.w < 0.0
        } else {
            [self.x, self.y, self.z]
                .into_iter()
                .find(|c| *c != 0.0)
                .is_some_and(|c| c < 0.0)
        };
        if flip {
            -self
        } else {
            self
        }
    }
}

impl std::ops::Neg for Quat {
    type Output = Quat;

    fn neg(self) -> Quat {
        Quat::new(-self.w, -self.x, -self.y, -self.z)
    }
}

/// A quaternion on the unit sphere S³.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitQuaternion(Quat);

impl UnitQuaternion {
    pub const UNIT_TOL: f64 = 1e-12;

    pub fn new_normalize(q: Quat) -> Result<Self> {
        let n = q.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroQuaternion);
        }
        Ok(UnitQuaternion(q.scale(1.0 / n)))
    }

    pub fn quat(self) -> Quat {
        self.0
    }

    pub fn canonical(self) -> Self {
        UnitQuaternion(self.0.canonical())
    }

    pub fn to_rotation(self) -> Mat3 {
        covering_map(self.0)
    }
}

/// Ordered singular value data of a proper matrix `F = Rp · Q · diag(σ) · Qᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub f: Mat3,
    /// Singular values, descending.
    pub sigma: [f64; 3],
    /// Proper orthogonal eigenframe of `U`; column `i` belongs to `sigma[i]`.
    pub q: Mat3,
    /// Polar factor.
    pub rp: Mat3,
    /// Right Biot stretch `U = Q diag(σ) Qᵀ`.
    pub u: Mat3,
    /// `(σ₁ − σ₂, σ₂ − σ₃)`.
    pub gaps: [f64; 2],
    /// Gap below `EPS_GAP_REL · σ₁`; the matching eigenvectors are not unique.
    pub degenerate: [bool; 2],
}

impl Decomposition {
    /// `s_ij = σ_i + σ_j`, 1-based indices.
    pub fn s(&self, i: usize, j: usize) -> f64 {
        self.sigma[i - 1] + self.sigma[j - 1]
    }

    /// `d_ij = σ_i − σ_j`, 1-based indices.
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.sigma[i - 1] - self.sigma[j - 1]
    }

    /// Eigenvector of the smallest singular value.
    pub fn q3(&self) -> Vec3 {
        self.q.column(2).into_owned()
    }

    pub fn diag(&self) -> Mat3 {
        Mat3::from_diagonal(&Vec3::from(self.sigma))
    }

    /// Relative rotation `Qᵀ Rᵀ Rp Q` of an absolute rotation `R`.
    pub fn relative(&self, r: &Mat3) -> Mat3 {
        self.q.transpose() * r.transpose() * self.rp * self.q
    }
}

/// Eigen-decomposition of a symmetric 3×3 matrix by cyclic Jacobi rotations.
///
/// Returns the (unsorted) eigenvalues and the orthogonal matrix whose columns
/// are the matching eigenvectors.
pub(crate) fn jacobi_eigen(a: &Mat3) -> ([f64; 3], Mat3) {
    let mut a = sym(a);
    let mut v = Mat3::identity();
    let threshold = JACOBI_REL_THRESHOLD * a.norm();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = (a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2)).sqrt();
        if off <= threshold {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = a[(p, q)];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut j = Mat3::identity();
            j[(p, p)] = c;
            j[(q, q)] = c;
            j[(p, q)] = s;
            j[(q, p)] = -s;
            a = j.transpose() * a * j;
            a[(p, q)] = 0.0;
            a[(q, p)] = 0.0;
            v *= j;
        }
    }
    ([a[(0, 0)], a[(1, 1)], a[(2, 2)]], v)
}

/// Ordered singular value decomposition `F = Rp · Q · diag(σ) · Qᵀ`.
///
/// The eigenframe comes from Jacobi iteration on `FᵀF`; columns are sorted by
/// descending singular value and the third column is negated if needed so
/// that `det Q = +1`. The result is deterministic for a fixed input.
pub fn svd_ordered(f: &Mat3) -> Result<Decomposition> {
    let det = f.determinant();
    if !det.is_finite() || f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonInvertible { det });
    }
    if det < -EPS_DET {
        return Err(Error::NegativeDeterminant { det });
    }
    if det <= EPS_DET {
        return Err(Error::NonInvertible { det });
    }

    let (evals, v) = jacobi_eigen(&(f.transpose() * f));
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| evals[j].total_cmp(&evals[i]).then(i.cmp(&j)));

    let mut q = Mat3::zeros();
    let mut sigma = [0.0; 3];
    for (k, &i) in order.iter().enumerate() {
        q.set_column(k, &v.column(i));
        sigma[k] = evals[i].max(0.0).sqrt();
    }
    if q.determinant() < 0.0 {
        let c = -q.column(2).into_owned();
        q.set_column(2, &c);
    }
    if sigma[2] <= 0.0 {
        return Err(Error::NonInvertible { det });
    }

    let d = Mat3::from_diagonal(&Vec3::from(sigma));
    // left singular vectors by Gram–Schmidt on F q₁, F q₂; the third follows
    // from orientation, which keeps Rp orthogonal when σ₃ is tiny
    let v1 = (f * q.column(0)).normalize();
    let w2 = f * q.column(1);
    let v2 = (w2 - v1 * v1.dot(&w2)).normalize();
    let v3 = v1.cross(&v2);
    let rp = Mat3::from_columns(&[v1, v2, v3]) * q.transpose();
    let u = q * d * q.transpose();
    let gaps = [sigma[0] - sigma[1], sigma[1] - sigma[2]];
    let eps_gap = EPS_GAP_REL * sigma[0];
    Ok(Decomposition {
        f: *f,
        sigma,
        q,
        rp,
        u: sym(&u),
        gaps,
        degenerate: [gaps[0] < eps_gap, gaps[1] < eps_gap],
    })
}

/// Rotation factor of the right polar decomposition `F = Rp U`.
pub fn polar_factor(f: &Mat3) -> Result<Mat3> {
    Ok(svd_ordered(f)?.rp)
}

/// The covering polynomial, evaluated for any quaternion. Only unit input
/// yields a rotation.
pub fn covering_map(q: Quat) -> Mat3 {
    let Quat { w, x, y, z } = q;
    Mat3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// [`covering_map`] with the nonzero precondition checked.
pub fn quat_to_rotation(q: Quat) -> Result<Mat3> {
    if q.norm_squared() == 0.0 {
        return Err(Error::ZeroQuaternion);
    }
    Ok(covering_map(q))
}

/// Inverse of the covering map on the canonical sheet (Shepperd's method).
pub fn rotation_to_quat(r: &Mat3) -> Result<UnitQuaternion> {
    ensure_rotation(r)?;
    let tr = r.trace();
    let (r00, r11, r22) = (r[(0, 0)], r[(1, 1)], r[(2, 2)]);
    let q = if tr >= r00 && tr >= r11 && tr >= r22 {
        let w = 0.5 * (1.0 + tr).sqrt();
        let k = 0.25 / w;
        Quat::new(
            w,
            (r[(2, 1)] - r[(1, 2)]) * k,
            (r[(0, 2)] - r[(2, 0)]) * k,
            (r[(1, 0)] - r[(0, 1)]) * k,
        )
    } else if r00 >= r11 && r00 >= r22 {
        let x = 0.5 * (1.0 + r00 - r11 - r22).sqrt();
        let k = 0.25 / x;
        Quat::new(
            (r[(2, 1)] - r[(1, 2)]) * k,
            x,
            (r[(0, 1)] + r[(1, 0)]) * k,
            (r[(0, 2)] + r[(2, 0)]) * k,
        )
    } else if r11 >= r22 {
        let y = 0.5 * (1.0 - r00 + r11 - r22).sqrt();
        let k = 0.25 / y;
        Quat::new(
            (r[(0, 2)] - r[(2, 0)]) * k,
            (r[(0, 1)] + r[(1, 0)]) * k,
            y,
            (r[(1, 2)] + r[(2, 1)]) * k,
        )
    } else {
        let z = 0.5 * (1.0 - r00 - r11 + r22).sqrt();
        let k = 0.25 / z;
        Quat::new(
            (r[(1, 0)] - r[(0, 1)]) * k,
            (r[(0, 2)] + r[(2, 0)]) * k,
            (r[(1, 2)] + r[(2, 1)]) * k,
            z,
        )
    };
    Ok(UnitQuaternion::new_normalize(q)?.canonical())
}

/// Rotation as a signed angle in `(−π, π]` about a unit axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAngle {
    pub angle: f64,
    pub axis: [f64; 3],
}

impl AxisAngle {
    pub fn to_rotation(&self) -> Mat3 {
        rotation_about(&Vec3::from(self.axis), self.angle)
    }
}

/// Rodrigues' formula for a rotation by `angle` about the unit vector `axis`.
pub fn rotation_about(axis: &Vec3, angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    let k = Mat3::new(
        0.0, -axis.z, axis.y, //
        axis.z, 0.0, -axis.x, //
        -axis.y, axis.x, 0.0,
    );
    Mat3::identity() + k * s + k * k * (1.0 - c)
}

/// Rotation by `angle` about `e₃`.
pub fn rotation_z(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Axis–angle form of a rotation.
///
/// The axis is oriented so that its first significant component is positive
/// and the angle carries the sign. The identity maps to `(0, e₃)`; half turns
/// report `+π` with the axis of the canonical quaternion.
pub fn axis_angle(r: &Mat3) -> Result<AxisAngle> {
    let q = rotation_to_quat(r)?.quat();
    let v = Vec3::new(q.x, q.y, q.z);
    let vn = v.norm();
    if vn < 1e-15 {
        return Ok(AxisAngle {
            angle: 0.0,
            axis: [0.0, 0.0, 1.0],
        });
    }
    let mut axis = v / vn;
    let mut angle = 2.0 * vn.atan2(q.w);
    let leading = axis
        .iter()
        .copied()
        .find(|c| c.abs() > 1e-12)
        .unwrap_or(1.0);
    if leading < 0.0 {
        axis = -axis;
        angle = -angle;
    }
    if angle <= -std::f64::consts::PI {
        angle = std::f64::consts::PI;
        axis = -axis;
    }
    Ok(AxisAngle {
        angle,
        axis: [axis.x, axis.y, axis.z],
    })
}

/// Geodesic distance on SO(3): the rotation angle of `aᵀb`, in `[0, π]`.
pub fn geodesic_angle(a: &Mat3, b: &Mat3) -> f64 {
    let c = 0.5 * ((a.transpose() * b).trace() - 1.0);
    c.clamp(-1.0, 1.0).acos()
}

/// The Klein four-group `{1, diag(1,−1,−1), diag(−1,1,−1), diag(−1,−1,1)}`.
pub fn klein_four() -> [Mat3; 4] {
    [
        Mat3::identity(),
        Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0)),
        Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, -1.0)),
        Mat3::from_diagonal(&Vec3::new(-1.0, -1.0, 1.0)),
    ]
}

/// Conjugates `Qᵢᵀ R̂ Qᵢ` over the Klein four-group.
pub fn symmetry_orbit(rhat: &Mat3) -> Result<[Mat3; 4]> {
    ensure_rotation(rhat)?;
    Ok(klein_four().map(|s| s.transpose() * rhat * s))
}

/// Absolute rotation `Rp · Q · R̂ᵀ · Qᵀ` from a relative rotation.
pub fn recover_absolute(rhat: &Mat3, dec: &Decomposition) -> Mat3 {
    dec.rp * dec.q * rhat.transpose() * dec.q.transpose()
}

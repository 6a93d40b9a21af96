//! Catalog of the critical points of the lifted energy in the limit case
//! `(μ, μc) = (1, 0)`: sixteen branches modulo antipodes, grouped into three
//! families, with closed-form multipliers and energies, residual checks and a
//! second-order classification.

use nalgebra::{Matrix3, Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::energy::{
    check_sigma, el_residual_quat, lifted_energy, lifted_energy_derivatives, MaterialParams,
};
use crate::error::{Error, Result};
use crate::rotcore::{jacobi_eigen, Quat, EPS_GAP_REL};

/// Eigenvalue threshold of the projected Hessian test.
pub const EPS_HESSIAN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    I,
    II,
    III,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Identity of a branch, e.g. `II.1+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BranchId {
    pub family: Family,
    /// 1..4 for family I, 1..3 otherwise.
    pub index: u8,
    pub sign: Option<Sign>,
}

impl BranchId {
    pub const I1: BranchId = BranchId::new(Family::I, 1, None);
    pub const II1_PLUS: BranchId = BranchId::new(Family::II, 1, Some(Sign::Plus));
    pub const II1_MINUS: BranchId = BranchId::new(Family::II, 1, Some(Sign::Minus));

    pub const fn new(family: Family, index: u8, sign: Option<Sign>) -> Self {
        BranchId {
            family,
            index,
            sign,
        }
    }

    /// All sixteen identities in catalog order.
    pub fn all() -> Vec<BranchId> {
        let mut ids: Vec<BranchId> = (1..=4).map(|i| BranchId::new(Family::I, i, None)).collect();
        for family in [Family::II, Family::III] {
            for i in 1..=3 {
                for sign in [Sign::Plus, Sign::Minus] {
                    ids.push(BranchId::new(family, i, Some(sign)));
                }
            }
        }
        ids
    }

    pub fn parse(s: &str) -> Result<Self> {
        BranchId::all()
            .into_iter()
            .find(|id| id.to_string() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown branch id {s:?}")))
    }
}

impl fmt::Display for BranchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let family = match self.family {
            Family::I => "I",
            Family::II => "II",
            Family::III => "III",
        };
        let sign = match self.sign {
            None => "",
            Some(Sign::Plus) => "+",
            Some(Sign::Minus) => "-",
        };
        write!(f, "{family}.{}{sign}", self.index)
    }
}

/// `c_A(t) = √(½ + 1/t)`.
pub fn c_a(t: f64) -> f64 {
    (0.5 + 1.0 / t).sqrt()
}

/// `c_B(t) = √(½ − 1/t)`, real for `t ≥ 2` only.
pub fn c_b(t: f64) -> Option<f64> {
    let v = 0.5 - 1.0 / t;
    (t > 0.0 && v >= 0.0).then(|| v.sqrt())
}

/// Argument `t` of the auxiliary coefficients for families II and III.
fn coefficient_arg(id: BranchId, sigma: &[f64; 3]) -> Option<f64> {
    let [s1, s2, s3] = *sigma;
    match (id.family, id.index) {
        (Family::II, 1) => Some(s1 + s2),
        (Family::II, 2) => Some(s2 + s3),
        (Family::II, 3) => Some(s3 + s1),
        (Family::III, 1) => Some(s1 - s2),
        (Family::III, 2) => Some(s2 - s3),
        (Family::III, 3) => Some(-(s3 - s1)),
        _ => None,
    }
}

fn domain_condition(id: BranchId) -> &'static str {
    match (id.family, id.index) {
        (Family::I, _) => "always",
        (Family::II, 1) => "s12 >= 2",
        (Family::II, 2) => "s23 >= 2",
        (Family::II, 3) => "s31 >= 2",
        (Family::III, 1) => "d12 >= 2",
        (Family::III, 2) => "d23 >= 2",
        _ => "-d31 >= 2",
    }
}

/// Quaternion of a branch, `None` where it is not real-valued.
pub fn branch_quaternion(id: BranchId, sigma: &[f64; 3]) -> Option<Quat> {
    if id.family == Family::I {
        let mut c = [0.0; 4];
        c[usize::from(id.index) - 1] = 1.0;
        return Some(Quat::from_array(c));
    }
    let t = coefficient_arg(id, sigma)?;
    let a = c_a(t);
    // adding zero turns a signed −0 on the boundary into +0
    let b = c_b(t)? * id.sign?.factor() + 0.0;
    Some(match (id.family, id.index) {
        (Family::II, 1) => Quat::new(a, 0.0, 0.0, b),
        (Family::II, 2) => Quat::new(a, b, 0.0, 0.0),
        (Family::II, 3) => Quat::new(a, 0.0, b, 0.0),
        (Family::III, 1) => Quat::new(0.0, a, b, 0.0),
        (Family::III, 2) => Quat::new(0.0, 0.0, a, b),
        _ => Quat::new(0.0, a, 0.0, b),
    })
}

fn closed_form_multiplier(id: BranchId, sigma: &[f64; 3]) -> f64 {
    let [s1, s2, s3] = *sigma;
    let (s12, s23, s31) = (s1 + s2, s2 + s3, s3 + s1);
    let (d12, d23, d31) = (s1 - s2, s2 - s3, s3 - s1);
    match (id.family, id.index) {
        (Family::I, 1) => 0.0,
        (Family::I, 2) => 4.0 * (s2 * s2 + s3 * s3) + 4.0 * s23,
        (Family::I, 3) => 4.0 * (s3 * s3 + s1 * s1) + 4.0 * s31,
        (Family::I, _) => 4.0 * (s1 * s1 + s2 * s2) + 4.0 * s12,
        (Family::II, 1) => d12 * d12 * (s12 - 2.0) / s12,
        (Family::II, 2) => d23 * d23 * (s23 - 2.0) / s23,
        (Family::II, _) => d31 * d31 * (s31 - 2.0) / s31,
        (Family::III, 1) => 4.0 * s3 * (1.0 + s3) + (s12 - 2.0) * s12,
        (Family::III, 2) => 4.0 * s1 * (1.0 + s1) + (s23 - 2.0) * s23,
        (Family::III, _) => 4.0 * s2 * (1.0 + s2) + (s31 - 2.0) * s31,
    }
}

fn closed_form_energy(id: BranchId, sigma: &[f64; 3]) -> f64 {
    let [s1, s2, s3] = *sigma;
    let sq = |v: f64| v * v;
    match (id.family, id.index) {
        (Family::I, 1) => sq(s1 - 1.0) + sq(s2 - 1.0) + sq(s3 - 1.0),
        (Family::I, 2) => sq(s1 - 1.0) + sq(s2 + 1.0) + sq(s3 + 1.0),
        (Family::I, 3) => sq(s1 + 1.0) + sq(s2 - 1.0) + sq(s3 + 1.0),
        (Family::I, _) => sq(s1 + 1.0) + sq(s2 + 1.0) + sq(s3 - 1.0),
        (Family::II, 1) => 0.5 * sq(s1 - s2) + sq(s3 - 1.0),
        (Family::II, 2) => 0.5 * sq(s2 - s3) + sq(s1 - 1.0),
        (Family::II, _) => 0.5 * sq(s3 - s1) + sq(s2 - 1.0),
        (Family::III, 1) => 0.5 * sq(s1 + s2) + sq(s3 + 1.0),
        (Family::III, 2) => 0.5 * sq(s2 + s3) + sq(s1 + 1.0),
        (Family::III, _) => 0.5 * sq(s3 + s1) + sq(s2 + 1.0),
    }
}

/// One critical point of the catalog evaluated at a fixed singular value triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalBranch {
    pub id: String,
    pub family: Family,
    pub index: u8,
    pub sign: Option<Sign>,
    /// `None` where the branch is not real-valued.
    pub quaternion: Option<Quat>,
    pub multiplier: Option<f64>,
    pub closed_form_energy: Option<f64>,
    pub defined: bool,
    pub domain_condition: String,
    /// Set when the catalog was evaluated despite repeated singular values.
    pub degenerate: bool,
}

impl CriticalBranch {
    pub fn evaluate(id: BranchId, sigma: &[f64; 3]) -> Self {
        let quaternion = branch_quaternion(id, sigma);
        let defined = quaternion.is_some();
        CriticalBranch {
            id: id.to_string(),
            family: id.family,
            index: id.index,
            sign: id.sign,
            quaternion,
            multiplier: defined.then(|| closed_form_multiplier(id, sigma)),
            closed_form_energy: defined.then(|| closed_form_energy(id, sigma)),
            defined,
            domain_condition: domain_condition(id).to_string(),
            degenerate: false,
        }
    }

    pub fn branch_id(&self) -> BranchId {
        BranchId::new(self.family, self.index, self.sign)
    }
}

fn check_distinct(sigma: &[f64; 3]) -> Result<()> {
    let eps = EPS_GAP_REL * sigma[0];
    if sigma[0] - sigma[1] < eps || sigma[1] - sigma[2] < eps {
        return Err(Error::NonDistinctSigma(*sigma));
    }
    Ok(())
}

/// All sixteen branches at strictly ordered positive singular values.
pub fn enumerate_branches(sigma: &[f64; 3]) -> Result<Vec<CriticalBranch>> {
    check_sigma(sigma)?;
    check_distinct(sigma)?;
    Ok(BranchId::all()
        .into_iter()
        .map(|id| CriticalBranch::evaluate(id, sigma))
        .collect())
}

/// Like [`enumerate_branches`] but accepts repeated singular values and marks
/// the result as degenerate.
pub fn enumerate_branches_forced(sigma: &[f64; 3]) -> Result<Vec<CriticalBranch>> {
    check_sigma(sigma)?;
    let degenerate = check_distinct(sigma).is_err();
    Ok(BranchId::all()
        .into_iter()
        .map(|id| CriticalBranch {
            degenerate,
            ..CriticalBranch::evaluate(id, sigma)
        })
        .collect())
}

fn defined_quaternion(id: BranchId, sigma: &[f64; 3]) -> Result<Quat> {
    branch_quaternion(id, sigma).ok_or_else(|| Error::UndefinedBranch(id.to_string()))
}

/// Closed-form energy level of a branch.
pub fn branch_energy(id: BranchId, sigma: &[f64; 3]) -> Result<f64> {
    defined_quaternion(id, sigma)?;
    Ok(closed_form_energy(id, sigma))
}

/// Closed-form Lagrange multiplier of a branch.
pub fn branch_multiplier(id: BranchId, sigma: &[f64; 3]) -> Result<f64> {
    defined_quaternion(id, sigma)?;
    Ok(closed_form_multiplier(id, sigma))
}

/// Max-norm of the quaternion Euler–Lagrange residual at the branch.
pub fn verify_branch(id: BranchId, sigma: &[f64; 3]) -> Result<f64> {
    let q = defined_quaternion(id, sigma)?;
    let r = el_residual_quat(q, closed_form_multiplier(id, sigma), sigma);
    Ok(r.iter().fold(0.0, |m, c| m.max(c.abs())))
}

/// Direct evaluation of the lifted energy at the branch quaternion.
pub fn branch_direct_energy(id: BranchId, sigma: &[f64; 3]) -> Result<f64> {
    let q = defined_quaternion(id, sigma)?;
    lifted_energy(q, sigma, &MaterialParams::limit_case())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    LocalMin,
    LocalMax,
    Saddle,
    Degenerate,
}

/// Orthonormal basis `q·i, q·j, q·k` of the tangent space of `S³` at a unit `q`.
fn tangent_basis(q: Quat) -> [Vector4<f64>; 3] {
    let Quat { w, x, y, z } = q;
    [
        Vector4::new(-x, w, z, -y),
        Vector4::new(-y, -z, w, x),
        Vector4::new(-z, y, -x, w),
    ]
}

/// `Bᵀ H B` for the tangent basis `B` at `q`.
pub fn project_to_tangent(h: &Matrix4<f64>, q: Quat) -> Matrix3<f64> {
    let basis = tangent_basis(q);
    Matrix3::from_fn(|i, j| (basis[i].transpose() * h * basis[j])[0])
}

/// Eigenvalues of the Hessian of the Lagrange function restricted to the
/// tangent space of the unit sphere, ascending.
pub fn projected_hessian_eigenvalues(q: Quat, lambda: f64, sigma: &[f64; 3]) -> [f64; 3] {
    let (_, _, h) = lifted_energy_derivatives(q, sigma, &MaterialParams::limit_case());
    let l = h - Matrix4::identity() * (2.0 * lambda);
    let (mut evals, _) = jacobi_eigen(&project_to_tangent(&l, q));
    evals.sort_by(f64::total_cmp);
    evals
}

pub fn classify_eigenvalues(evals: &[f64; 3]) -> Classification {
    if evals.iter().any(|e| e.abs() <= EPS_HESSIAN) {
        Classification::Degenerate
    } else if evals.iter().all(|&e| e > EPS_HESSIAN) {
        Classification::LocalMin
    } else if evals.iter().all(|&e| e < -EPS_HESSIAN) {
        Classification::LocalMax
    } else {
        Classification::Saddle
    }
}

/// Second-order type of a branch on the unit sphere.
pub fn classify_branch(id: BranchId, sigma: &[f64; 3]) -> Result<Classification> {
    let q = defined_quaternion(id, sigma)?;
    let evals = projected_hessian_eigenvalues(q, closed_form_multiplier(id, sigma), sigma);
    Ok(classify_eigenvalues(&evals))
}

/// The branches realizing the least energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalSelection {
    pub branches: Vec<CriticalBranch>,
    pub energy: f64,
}

impl MinimalSelection {
    pub fn contains(&self, id: BranchId) -> bool {
        let s = id.to_string();
        self.branches.iter().any(|b| b.id == s)
    }
}

/// Energy-minimizing branches: `I.1` for `s12 < 2`, the pair `II.1±` for
/// `s12 > 2` and all three at `s12 = 2`, where they coincide.
///
/// The selection is checked against every other defined branch.
pub fn minimal_branch(sigma: &[f64; 3]) -> Result<MinimalSelection> {
    let catalog = enumerate_branches(sigma)?;
    let s12 = sigma[0] + sigma[1];
    let mut ids = Vec::new();
    if s12 <= 2.0 {
        ids.push(BranchId::I1);
    }
    if s12 >= 2.0 {
        ids.extend([BranchId::II1_PLUS, BranchId::II1_MINUS]);
    }
    let energy = closed_form_energy(ids[0], sigma);
    let tol = 1e-12 * (1.0 + energy.abs());
    for b in catalog.iter().filter(|b| b.defined) {
        let e = b.closed_form_energy.expect("defined branch");
        if e < energy - tol {
            return Err(Error::SelectionNotMinimal {
                branch: b.id.clone(),
                energy: e,
                selected: energy,
            });
        }
    }
    let branches = catalog
        .into_iter()
        .filter(|b| ids.contains(&b.branch_id()))
        .collect();
    Ok(MinimalSelection { branches, energy })
}

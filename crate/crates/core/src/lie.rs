//! Matrix Lie groups SO(3) and SE(3).
//!
//! Algebra coordinates follow the basis ordering used by the dither construction:
//!
//! * so(3): `∂/∂g₁` has `+1` at (1,2), `∂/∂g₂` at (2,3), `∂/∂g₃` at (1,3) (1-based, antisymmetric).
//! * se(3): rotation generators at (1,2), (1,3), (2,3), then unit translations along x, y, z.
//!
//! With the inner product `½tr(XᵀY)` (plus `v·v'` on translations) each basis matrix
//! has unit norm, so coefficient vectors can be measured with the Euclidean norm.

use std::fmt;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};

/// Below this rotation angle the closed forms switch to their Taylor series.
pub const SMALL_ANGLE: f64 = 1e-6;
const POLAR_MAX_ITERS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum GroupTag {
    SO3,
    SE3,
}

impl GroupTag {
    /// Matrix size `k`.
    pub fn mat_dim(self) -> usize {
        match self {
            GroupTag::SO3 => 3,
            GroupTag::SE3 => 4,
        }
    }

    /// Algebra dimension `n`.
    pub fn algebra_dim(self) -> usize {
        match self {
            GroupTag::SO3 => 3,
            GroupTag::SE3 => 6,
        }
    }
}

impl fmt::Display for GroupTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupTag::SO3 => f.write_str("SO3"),
            GroupTag::SE3 => f.write_str("SE3"),
        }
    }
}

/// Entry positions (0-based) of the `+1` in each rotation generator.
const SO3_SLOTS: [(usize, usize); 3] = [(0, 1), (1, 2), (0, 2)];
const SE3_ROT_SLOTS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// A matrix group element.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    mat: DMatrix<f64>,
    tag: GroupTag,
}

impl GroupElement {
    pub fn identity(tag: GroupTag) -> Self {
        let k = tag.mat_dim();
        Self { mat: DMatrix::identity(k, k), tag }
    }

    /// Wraps a matrix without checking group membership; see [`check_group_membership`].
    pub fn from_matrix_unchecked(mat: DMatrix<f64>, tag: GroupTag) -> Result<Self> {
        let k = tag.mat_dim();
        if mat.nrows() != k || mat.ncols() != k {
            return Err(Error::Argument(format!(
                "{tag} element must be {k}x{k}, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { mat, tag })
    }

    /// Rotation about the z axis by `angle`.
    pub fn rz(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            mat: DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]),
            tag: GroupTag::SO3,
        }
    }

    /// SE(3) element from a rotation block and a translation.
    pub fn se3(rotation: &GroupElement, translation: [f64; 3]) -> Result<Self> {
        if rotation.tag != GroupTag::SO3 {
            return Err(Error::Argument("rotation block must be an SO3 element".into()));
        }
        let mut mat = DMatrix::identity(4, 4);
        mat.view_mut((0, 0), (3, 3)).copy_from(&rotation.mat);
        for i in 0..3 {
            mat[(i, 3)] = translation[i];
        }
        Ok(Self { mat, tag: GroupTag::SE3 })
    }

    pub fn mat(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn tag(&self) -> GroupTag {
        self.tag
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.mat[(i, j)])
    }

    /// Translation column of an SE(3) element (zero for SO(3)).
    pub fn translation(&self) -> Vector3<f64> {
        match self.tag {
            GroupTag::SO3 => Vector3::zeros(),
            GroupTag::SE3 => Vector3::new(self.mat[(0, 3)], self.mat[(1, 3)], self.mat[(2, 3)]),
        }
    }

    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        if self.tag != other.tag {
            return Err(Error::Argument(format!("cannot compose {} with {}", self.tag, other.tag)));
        }
        Ok(GroupElement { mat: &self.mat * &other.mat, tag: self.tag })
    }

    pub fn inverse(&self) -> GroupElement {
        let r = self.rotation().transpose();
        match self.tag {
            GroupTag::SO3 => GroupElement {
                mat: DMatrix::from_fn(3, 3, |i, j| r[(i, j)]),
                tag: GroupTag::SO3,
            },
            GroupTag::SE3 => {
                let p = -(r * self.translation());
                let mut mat = DMatrix::identity(4, 4);
                for i in 0..3 {
                    for j in 0..3 {
                        mat[(i, j)] = r[(i, j)];
                    }
                    mat[(i, 3)] = p[i];
                }
                GroupElement { mat, tag: GroupTag::SE3 }
            }
        }
    }

    /// Entries shown in trajectory output: all 9 for SO(3), the top three rows for SE(3).
    pub fn flatten(&self) -> Vec<f64> {
        let rows = 3;
        let cols = self.tag.mat_dim();
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                out.push(self.mat[(i, j)]);
            }
        }
        out
    }
}

/// The ordered basis `∂/∂g_i` of the Lie algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    pub mats: Vec<DMatrix<f64>>,
}

impl BasisSet {
    pub fn new(tag: GroupTag) -> Self {
        let n = tag.algebra_dim();
        let mats = (0..n)
            .map(|i| {
                let mut c = vec![0.0; n];
                c[i] = 1.0;
                algebra_from_coords(&c, tag).expect("basis coordinates have the right length")
            })
            .collect();
        Self { mats }
    }
}

/// Coefficient vector of a Lie-algebra element on [`BasisSet`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgebraVector {
    pub coeffs: Vec<f64>,
    pub tag: GroupTag,
}

impl AlgebraVector {
    pub fn new(coeffs: Vec<f64>, tag: GroupTag) -> Result<Self> {
        if coeffs.len() != tag.algebra_dim() {
            return Err(Error::Argument(format!(
                "{tag} algebra needs {} coefficients, got {}",
                tag.algebra_dim(),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Argument("algebra coefficients must be finite".into()));
        }
        Ok(Self { coeffs, tag })
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        algebra_from_coords(&self.coeffs, self.tag).expect("length checked on construction")
    }
}

/// `Σ coeffs_i ∂/∂g_i`.
pub fn algebra_from_coords(coeffs: &[f64], tag: GroupTag) -> Result<DMatrix<f64>> {
    let n = tag.algebra_dim();
    if coeffs.len() != n {
        return Err(Error::Argument(format!(
            "{tag} algebra needs {n} coefficients, got {}",
            coeffs.len()
        )));
    }
    let k = tag.mat_dim();
    let mut m = DMatrix::zeros(k, k);
    let slots = match tag {
        GroupTag::SO3 => &SO3_SLOTS,
        GroupTag::SE3 => &SE3_ROT_SLOTS,
    };
    for (c, &(i, j)) in coeffs.iter().zip(slots.iter()) {
        m[(i, j)] = *c;
        m[(j, i)] = -*c;
    }
    if tag == GroupTag::SE3 {
        for i in 0..3 {
            m[(i, 3)] = coeffs[3 + i];
        }
    }
    Ok(m)
}

/// Inverse of [`algebra_from_coords`] (reads the upper-triangular slots).
pub fn coords_from_algebra(x: &DMatrix<f64>, tag: GroupTag) -> Result<Vec<f64>> {
    let k = tag.mat_dim();
    if x.nrows() != k || x.ncols() != k {
        return Err(Error::Argument(format!("{tag} algebra element must be {k}x{k}")));
    }
    let slots = match tag {
        GroupTag::SO3 => &SO3_SLOTS,
        GroupTag::SE3 => &SE3_ROT_SLOTS,
    };
    let mut out: Vec<f64> = slots.iter().map(|&(i, j)| 0.5 * (x[(i, j)] - x[(j, i)])).collect();
    if tag == GroupTag::SE3 {
        out.extend((0..3).map(|i| x[(i, 3)]));
    }
    Ok(out)
}

/// Lie bracket `[u, v]` in algebra coordinates.
pub fn bracket(u: &[f64], v: &[f64], tag: GroupTag) -> Result<Vec<f64>> {
    let a = algebra_from_coords(u, tag)?;
    let b = algebra_from_coords(v, tag)?;
    coords_from_algebra(&(&a * &b - &b * &a), tag)
}

fn skew_angle(s: &Matrix3<f64>) -> f64 {
    (s[(0, 1)].powi(2) + s[(0, 2)].powi(2) + s[(1, 2)].powi(2)).sqrt()
}

/// `(sinθ/θ, (1−cosθ)/θ², (θ−sinθ)/θ³)` with series near zero.
fn rodrigues_coefficients(theta: f64) -> (f64, f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        let t4 = t2 * t2;
        (
            1.0 - t2 / 6.0 + t4 / 120.0,
            0.5 - t2 / 24.0 + t4 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0,
        )
    } else {
        let (s, c) = theta.sin_cos();
        (s / theta, (1.0 - c) / (theta * theta), (theta - s) / (theta * theta * theta))
    }
}

fn so3_exp_fixed(s: &Matrix3<f64>) -> Matrix3<f64> {
    let theta = skew_angle(s);
    let (a, b, _) = rodrigues_coefficients(theta);
    Matrix3::identity() + s * a + s * s * b
}

/// Rodrigues exponential of an antisymmetric 3×3 matrix.
pub fn so3_exp(s: &DMatrix<f64>) -> Result<GroupElement> {
    if s.nrows() != 3 || s.ncols() != 3 {
        return Err(Error::Argument("so(3) element must be 3x3".into()));
    }
    if (s + s.transpose()).norm() >= 1e-10 {
        return Err(Error::Argument("so(3) element must be antisymmetric".into()));
    }
    let s3 = Matrix3::from_fn(|i, j| s[(i, j)]);
    let r = so3_exp_fixed(&s3);
    Ok(GroupElement {
        mat: DMatrix::from_fn(3, 3, |i, j| r[(i, j)]),
        tag: GroupTag::SO3,
    })
}

/// Closed-form exponential of an se(3) matrix `[[S, v], [0, 0]]`.
pub fn se3_exp(xi: &DMatrix<f64>) -> Result<GroupElement> {
    if xi.nrows() != 4 || xi.ncols() != 4 {
        return Err(Error::Argument("se(3) element must be 4x4".into()));
    }
    if (0..4).any(|j| xi[(3, j)] != 0.0) {
        return Err(Error::Argument("se(3) element must have a zero bottom row".into()));
    }
    let s = Matrix3::from_fn(|i, j| xi[(i, j)]);
    if (s + s.transpose()).norm() >= 1e-10 {
        return Err(Error::Argument("se(3) rotation block must be antisymmetric".into()));
    }
    let v = Vector3::new(xi[(0, 3)], xi[(1, 3)], xi[(2, 3)]);
    let theta = skew_angle(&s);
    let r = so3_exp_fixed(&s);
    let p = if theta == 0.0 {
        v
    } else {
        let (_, b, c) = rodrigues_coefficients(theta);
        let a = Matrix3::identity() + s * b + s * s * c;
        a * v
    };
    let mut mat = DMatrix::identity(4, 4);
    for i in 0..3 {
        for j in 0..3 {
            mat[(i, j)] = r[(i, j)];
        }
        mat[(i, 3)] = p[i];
    }
    Ok(GroupElement { mat, tag: GroupTag::SE3 })
}

/// Group exponential of algebra coordinates.
pub fn exp_coords(coeffs: &[f64], tag: GroupTag) -> Result<GroupElement> {
    let x = algebra_from_coords(coeffs, tag)?;
    match tag {
        GroupTag::SO3 => so3_exp(&x),
        GroupTag::SE3 => se3_exp(&x),
    }
}

/// `g · X`: the left-invariant field with identity value `X`, evaluated at `g`.
pub fn left_translate(g: &GroupElement, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != g.mat.ncols() || x.ncols() != g.mat.ncols() {
        return Err(Error::Argument(format!(
            "cannot translate a {}x{} matrix by a {} element",
            x.nrows(),
            x.ncols(),
            g.tag
        )));
    }
    Ok(&g.mat * x)
}

/// Nearest group element: polar projection of the rotation block, bottom row reset for SE(3).
pub fn project_to_group(raw: &DMatrix<f64>, tag: GroupTag) -> Result<GroupElement> {
    let k = tag.mat_dim();
    if raw.nrows() != k || raw.ncols() != k {
        return Err(Error::Argument(format!("{tag} element must be {k}x{k}")));
    }
    let block = Matrix3::from_fn(|i, j| raw[(i, j)]);
    let r = polar_rotation(&block)?;
    let mut mat = raw.clone();
    for i in 0..3 {
        for j in 0..3 {
            mat[(i, j)] = r[(i, j)];
        }
    }
    if tag == GroupTag::SE3 {
        for j in 0..3 {
            mat[(3, j)] = 0.0;
        }
        mat[(3, 3)] = 1.0;
    }
    Ok(GroupElement { mat, tag })
}

/// Orthogonal polar factor by Newton iteration `X ← ½(X + X⁻ᵀ)`.
fn polar_rotation(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    if m.determinant() <= 0.0 {
        return Err(Error::Numerical("rotation block has nonpositive determinant".into()));
    }
    let mut x = *m;
    for _ in 0..POLAR_MAX_ITERS {
        let inv_t = x
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular matrix in polar iteration".into()))?
            .transpose();
        let next = (x + inv_t) * 0.5;
        let delta = (next - x).norm();
        x = next;
        if delta < 1e-15 {
            // one more step removes the last rounding-level defect
            let inv_t = x.try_inverse().unwrap_or(x).transpose();
            return Ok((x + inv_t) * 0.5);
        }
    }
    Err(Error::Numerical(format!(
        "polar iteration did not converge in {POLAR_MAX_ITERS} steps"
    )))
}

/// SO(3): rotation angle between `g1` and `g2`. SE(3): `sqrt(angle² + ‖Δp‖²)`, a
/// monitoring proxy only.
pub fn group_distance(g1: &GroupElement, g2: &GroupElement) -> Result<f64> {
    if g1.tag != g2.tag {
        return Err(Error::Argument(format!(
            "group tags differ: {} vs {}",
            g1.tag, g2.tag
        )));
    }
    let rel = g1.rotation().transpose() * g2.rotation();
    // atan2 form of arccos((tr − 1)/2); well conditioned near 0 and π.
    let cos_part = ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let w = Vector3::new(
        rel[(2, 1)] - rel[(1, 2)],
        rel[(0, 2)] - rel[(2, 0)],
        rel[(1, 0)] - rel[(0, 1)],
    );
    let sin_part = (0.5 * w.norm()).min(1.0);
    let angle = sin_part.atan2(cos_part);
    match g1.tag {
        GroupTag::SO3 => Ok(angle),
        GroupTag::SE3 => {
            let dp = g2.translation() - g1.translation();
            Ok((angle * angle + dp.norm_squared()).sqrt())
        }
    }
}

/// Invariant defects of a group element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MembershipDefect {
    /// `‖R Rᵀ − I‖_F` of the rotation block.
    pub orthogonality: f64,
    /// `|det R − 1|`.
    pub determinant: f64,
    /// Max deviation of the SE(3) bottom row from `(0,0,0,1)`; zero for SO(3).
    pub bottom_row: f64,
}

impl MembershipDefect {
    pub fn max(&self) -> f64 {
        self.orthogonality.max(self.determinant).max(self.bottom_row)
    }
}

pub fn check_group_membership(g: &GroupElement) -> MembershipDefect {
    let r = g.rotation();
    let orthogonality = (r * r.transpose() - Matrix3::identity()).norm();
    let determinant = (r.determinant() - 1.0).abs();
    let bottom_row = match g.tag {
        GroupTag::SO3 => 0.0,
        GroupTag::SE3 => (0..4)
            .map(|j| (g.mat[(3, j)] - if j == 3 { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max),
    };
    MembershipDefect { orthogonality, determinant, bottom_row }
}

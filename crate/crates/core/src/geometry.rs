//! Points, clouds and rigid transforms.
//!
//! Rotations are stored as 3x3 matrices. Construction from external data
//! accepts matrices that are orthonormal to within [`CONSTRUCTION_TOLERANCE`]
//! and projects them back onto SO(3) whenever the drift exceeds
//! [`ORTHONORMAL_TOLERANCE`], so every `Pose` in circulation satisfies the
//! tight bound.

use nalgebra::{Matrix3, Matrix4, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;

/// Tolerance accepted when a rotation comes from outside (files, user input).
pub const CONSTRUCTION_TOLERANCE: f64 = 1e-6;
/// Tolerance maintained internally; larger drift triggers re-orthonormalization.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

const UNIT_NORMAL_TOLERANCE: f64 = 1e-6;

/// An ordered list of finite 3D points, optionally with unit normals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
    normals: Option<Vec<Vector3<f64>>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { points, normals: None })
    }

    pub fn with_normals(points: Vec<Point3>, normals: Vec<Vector3<f64>>) -> Result<Self> {
        if normals.len() != points.len() {
            return Err(Error::NormalsLength { points: points.len(), normals: normals.len() });
        }
        for (index, n) in normals.iter().enumerate() {
            let norm = n.norm();
            if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORMAL_TOLERANCE {
                return Err(Error::NonUnitNormal { index, norm });
            }
        }
        let mut cloud = Self::new(points)?;
        cloud.normals = Some(normals);
        Ok(cloud)
    }

    pub fn from_xyz(coords: &[[f64; 3]]) -> Result<Self> {
        Self::new(coords.iter().map(|c| Point3::new(c[0], c[1], c[2])).collect())
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &Point3 {
        &self.points[i]
    }

    /// Sub-cloud made of the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| indices.iter().map(|&i| n[i]).collect()),
        }
    }

    /// Applies `pose` to every point (and rotates normals).
    pub fn transformed(&self, pose: &Pose) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| pose.apply(p)).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| n.iter().map(|v| pose.rotation() * v).collect()),
        }
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }
}

/// Rigid transform x -> R x + t with R in SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    /// Validates `rotation` against [`CONSTRUCTION_TOLERANCE`]; slightly
    /// drifted input is projected back onto SO(3).
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidRotation("non-finite entry".into()));
        }
        let det = rotation.determinant();
        let ortho = orthonormality_error(&rotation);
        if (det - 1.0).abs() > CONSTRUCTION_TOLERANCE || ortho > CONSTRUCTION_TOLERANCE {
            return Err(Error::InvalidRotation(format!(
                "det = {det}, |R^T R - I|_F = {ortho}"
            )));
        }
        let rotation = if ortho > ORTHONORMAL_TOLERANCE || (det - 1.0).abs() > ORTHONORMAL_TOLERANCE {
            project_to_so3(&rotation)
        } else {
            rotation
        };
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self { rotation: Matrix3::identity(), translation }
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let rotation = match nalgebra::Unit::try_new(*axis, 1e-12) {
            Some(axis) => *nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix(),
            None => Matrix3::identity(),
        };
        Self { rotation, translation }
    }

    /// Builds a pose from a unit quaternion `[w, x, y, z]`.
    pub fn from_quaternion(wxyz: [f64; 4], translation: Vector3<f64>) -> Result<Self> {
        let q = nalgebra::Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        if !(q.norm() - 1.0).abs().lt(&CONSTRUCTION_TOLERANCE) {
            return Err(Error::InvalidRotation(format!("quaternion norm {}", q.norm())));
        }
        let rot = UnitQuaternion::from_quaternion(q).to_rotation_matrix();
        Self::new(*rot.matrix(), translation)
    }

    /// Unit quaternion `[w, x, y, z]` of the rotation, with `w >= 0`.
    pub fn to_quaternion(&self) -> [f64; 4] {
        let rot = nalgebra::Rotation3::from_matrix_unchecked(self.rotation);
        let q = UnitQuaternion::from_rotation_matrix(&rot);
        let s = if q.w < 0.0 { -1.0 } else { 1.0 };
        [s * q.w, s * q.i, s * q.j, s * q.k]
    }

    /// Wraps a matrix already known to be a proper rotation. Drift beyond
    /// [`ORTHONORMAL_TOLERANCE`] is still projected away.
    pub(crate) fn from_rotation_matrix(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        let rotation = if orthonormality_error(&rotation) > ORTHONORMAL_TOLERANCE
            || (rotation.determinant() - 1.0).abs() > ORTHONORMAL_TOLERANCE
        {
            project_to_so3(&rotation)
        } else {
            rotation
        };
        Self { rotation, translation }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// R p + t
    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// (R^T, -R^T t)
    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation) }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Self {
        Self::from_rotation_matrix(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn to_matrix4(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Row-major homogeneous matrix.
    pub fn to_rows(&self) -> [[f64; 4]; 4] {
        let m = self.to_matrix4();
        std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]))
    }

    pub fn from_rows(rows: &[[f64; 4]; 4]) -> Result<Self> {
        let bottom = rows[3];
        if bottom[0].abs() > CONSTRUCTION_TOLERANCE
            || bottom[1].abs() > CONSTRUCTION_TOLERANCE
            || bottom[2].abs() > CONSTRUCTION_TOLERANCE
            || (bottom[3] - 1.0).abs() > CONSTRUCTION_TOLERANCE
        {
            return Err(Error::InvalidRotation(format!("bad homogeneous row {bottom:?}")));
        }
        let rotation = Matrix3::from_fn(|r, c| rows[r][c]);
        let translation = Vector3::new(rows[0][3], rows[1][3], rows[2][3]);
        Self::new(rotation, translation)
    }

    /// 16 numbers, four per line, row-major.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in self.to_rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parses 16 whitespace-separated numbers (row-major 4x4).
    pub fn from_text(text: &str) -> Result<Self> {
        let mut values = Vec::with_capacity(16);
        for (lineno, line) in text.lines().enumerate() {
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("not a number: {tok:?}"),
                })?;
                values.push(v);
            }
        }
        if values.len() != 16 {
            return Err(Error::Parse {
                line: text.lines().count().max(1),
                message: format!("expected 16 numbers, found {}", values.len()),
            });
        }
        let rows: [[f64; 4]; 4] = std::array::from_fn(|r| std::array::from_fn(|c| values[4 * r + c]));
        Self::from_rows(&rows)
    }

    pub fn to_json_value(&self) -> PoseJson {
        PoseJson {
            rotation: std::array::from_fn(|r| std::array::from_fn(|c| self.rotation[(r, c)])),
            translation: [self.translation.x, self.translation.y, self.translation.z],
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("pose serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let json: PoseJson = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        Self::try_from(json)
    }
}

/// `{"R": [[..], [..], [..]], "t": [..]}`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseJson {
    #[serde(rename = "R")]
    pub rotation: [[f64; 3]; 3],
    #[serde(rename = "t")]
    pub translation: [f64; 3],
}

impl TryFrom<PoseJson> for Pose {
    type Error = Error;

    fn try_from(json: PoseJson) -> Result<Self> {
        Pose::new(
            Matrix3::from_fn(|r, c| json.rotation[r][c]),
            Vector3::from(json.translation),
        )
    }
}

/// ‖RᵀR − I‖_F
pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm()
}

/// Nearest rotation in the Frobenius sense.
pub fn project_to_so3(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let d = (u * v_t).determinant().signum();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v_t
}

//! Shared geometry types. Thin aliases over `nalgebra` plus the handful of
//! homogeneous-transform helpers the generator needs.

use nalgebra::{Matrix4, Point3, UnitQuaternion, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat4 = Matrix4<f64>;
pub type UnitQuat = UnitQuaternion<f64>;

pub fn rot_x(angle: f64) -> Mat4 {
    let (s, c) = angle.sin_cos();
    #[rustfmt::skip]
    let m = Mat4::new(
        1.0, 0.0, 0.0, 0.0,
        0.0, c,   -s,  0.0,
        0.0, s,   c,   0.0,
        0.0, 0.0, 0.0, 1.0,
    );
    m
}

pub fn rot_z(angle: f64) -> Mat4 {
    let (s, c) = angle.sin_cos();
    #[rustfmt::skip]
    let m = Mat4::new(
        c,   -s,  0.0, 0.0,
        s,   c,   0.0, 0.0,
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
    );
    m
}

pub fn translation(t: Vec3) -> Mat4 {
    Mat4::new_translation(&t)
}

pub fn transform_point(m: &Mat4, p: &Vec3) -> Vec3 {
    m.transform_point(&Point3::from(*p)).coords
}

pub fn transform_vector(m: &Mat4, v: &Vec3) -> Vec3 {
    m.transform_vector(v)
}

/// Origin of a homogeneous frame.
pub fn origin(m: &Mat4) -> Vec3 {
    Vec3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)])
}

/// Inverse of a rigid (rotation + translation) transform.
pub fn rigid_inverse(m: &Mat4) -> Mat4 {
    let r = m.fixed_view::<3, 3>(0, 0).transpose();
    let t = -(r * Vec3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]));
    let mut out = Mat4::identity();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    out[(0, 3)] = t.x;
    out[(1, 3)] = t.y;
    out[(2, 3)] = t.z;
    out
}

/// Homogeneous matrix of a rotation followed by a translation.
pub fn from_rotation_translation(rotation: &UnitQuat, t: Vec3) -> Mat4 {
    let mut m = rotation.to_homogeneous();
    m[(0, 3)] = t.x;
    m[(1, 3)] = t.y;
    m[(2, 3)] = t.z;
    m
}

/// Shortest-arc rotation taking `+z` onto `dir`.
pub fn rotation_from_z(dir: &Vec3) -> UnitQuat {
    let d = dir.normalize();
    UnitQuat::rotation_between(&Vec3::z(), &d)
        .unwrap_or_else(|| UnitQuat::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI))
}

pub fn deg(radians: f64) -> f64 {
    radians.to_degrees()
}

pub fn rad(degrees: f64) -> f64 {
    degrees.to_radians()
}

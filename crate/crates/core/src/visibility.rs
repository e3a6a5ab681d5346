//! What the camera can see from a pose.
//!
//! An object is a candidate when its center lies inside the horizontal FOV
//! wedge and within camera range. Its visible fraction is the share of
//! lattice sample points on its box whose line of sight from the drone is not
//! cut by any occluder box. The vertical field of view is unbounded.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::geometry::{signed_angle, Aabb, Pose, Vec3};
use crate::scene::{Scene, SceneObject};

/// Samples per box axis; the default gives 4³ = 64 rays per object.
pub const DEFAULT_SAMPLES_PER_AXIS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    pub object_id: String,
    /// Unblocked share of sample rays, in `[0, 1]`.
    pub fraction: f64,
    /// Distance from the drone to the object's center.
    pub distance: f64,
}

/// Signed horizontal bearing of `point` relative to the heading, in
/// `(-π, π]`; positive is to the left.
pub fn relative_bearing(pose: &Pose, point: Vec3) -> f64 {
    let d = point - pose.position;
    if d.x.abs() < 1e-12 && d.y.abs() < 1e-12 {
        return 0.0;
    }
    signed_angle(d.y.atan2(d.x) - pose.yaw)
}

/// True when the object's center is inside the FOV wedge and in range.
pub fn in_frustum(scene: &Scene, pose: &Pose, object: &SceneObject) -> bool {
    let distance = pose.position.distance(object.center);
    distance <= scene.camera.max_range && relative_bearing(pose, object.center).abs() <= scene.camera.half_fov_rad()
}

fn lattice(b: &Aabb, n: usize) -> impl Iterator<Item = Vec3> + '_ {
    let span = b.max - b.min;
    let at = move |i: usize| (i as f64 + 0.5) / n as f64;
    (0..n).flat_map(move |i| {
        (0..n).flat_map(move |j| {
            (0..n).map(move |k| {
                Vec3::new(
                    b.min.x + span.x * at(i),
                    b.min.y + span.y * at(j),
                    b.min.z + span.z * at(k),
                )
            })
        })
    })
}

fn blocked(eye: Vec3, target: Vec3, occluders: &[&Aabb]) -> bool {
    occluders
        .iter()
        .any(|o| matches!(o.segment_interval(eye, target), Some((t0, t1)) if t1 > t0))
}

/// Total order used for visibility lists: fraction descending, then
/// distance ascending, then id.
pub fn visibility_order(a: &Visibility, b: &Visibility) -> Ordering {
    b.fraction
        .total_cmp(&a.fraction)
        .then(a.distance.total_cmp(&b.distance))
        .then_with(|| a.object_id.cmp(&b.object_id))
}

pub fn visible_objects(scene: &Scene, pose: &Pose) -> Vec<Visibility> {
    visible_objects_with(scene, pose, DEFAULT_SAMPLES_PER_AXIS)
}

/// [`visible_objects`] with a configurable sampling lattice.
pub fn visible_objects_with(scene: &Scene, pose: &Pose, samples_per_axis: usize) -> Vec<Visibility> {
    let n = samples_per_axis.max(1);
    let boxes: Vec<Aabb> = scene.objects.iter().map(SceneObject::aabb).collect();
    let mut out: Vec<Visibility> = scene
        .objects
        .iter()
        .enumerate()
        .filter(|(_, obj)| in_frustum(scene, pose, obj))
        .map(|(idx, obj)| {
            let occluders: Vec<&Aabb> = scene
                .objects
                .iter()
                .enumerate()
                .filter(|(j, o)| *j != idx && o.is_occluder)
                .map(|(j, _)| &boxes[j])
                .collect();
            let total = n * n * n;
            let clear = lattice(&boxes[idx], n)
                .filter(|p| !blocked(pose.position, *p, &occluders))
                .count();
            Visibility {
                object_id: obj.id.clone(),
                fraction: clear as f64 / total as f64,
                distance: pose.position.distance(obj.center),
            }
        })
        .collect();
    out.sort_by(visibility_order);
    out
}

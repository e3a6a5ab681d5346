mod common;

use common::{scene, Obj};
use dronedialog::geometry::{Pose, Vec3};
use dronedialog::scene::Scene;
use dronedialog::visibility::{visible_objects, visible_objects_with, DEFAULT_SAMPLES_PER_AXIS};
use proptest::prelude::*;

/// Independent segment/box test: clips the parametric segment against each
/// slab in turn and reports whether a stretch of positive length survives.
fn segment_hits_box(from: [f64; 3], to: [f64; 3], min: [f64; 3], max: [f64; 3]) -> bool {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for axis in 0..3 {
        let d = to[axis] - from[axis];
        if d.abs() < 1e-12 {
            if from[axis] < min[axis] || from[axis] > max[axis] {
                return false;
            }
            continue;
        }
        let (mut a, mut b) = ((min[axis] - from[axis]) / d, (max[axis] - from[axis]) / d);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        lo = lo.max(a);
        hi = hi.min(b);
        if lo > hi {
            return false;
        }
    }
    hi > lo
}

/// Share of an `n`³ cell-centred lattice on the object's box that has a
/// clear line of sight from `eye`.
fn oracle_fraction(scene: &Scene, eye: Vec3, id: &str, n: usize) -> f64 {
    let obj = scene.objects.iter().find(|o| o.id == id).unwrap();
    let c = obj.center;
    let e = obj.extent;
    let occluders: Vec<([f64; 3], [f64; 3])> = scene
        .objects
        .iter()
        .filter(|o| o.is_occluder && o.id != id)
        .map(|o| {
            let (c, e) = (o.center, o.extent);
            ([c.x - e.x, c.y - e.y, c.z - e.z], [c.x + e.x, c.y + e.y, c.z + e.z])
        })
        .collect();
    let mut clear = 0usize;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let at = |idx: usize, lo: f64, half: f64| lo - half + 2.0 * half * (idx as f64 + 0.5) / n as f64;
                let p = [at(i, c.x, e.x), at(j, c.y, e.y), at(k, c.z, e.z)];
                let eye = [eye.x, eye.y, eye.z];
                if !occluders.iter().any(|(lo, hi)| segment_hits_box(eye, p, *lo, *hi)) {
                    clear += 1;
                }
            }
        }
    }
    clear as f64 / (n * n * n) as f64
}

fn spawn() -> Pose {
    Pose::new(Vec3::new(0.0, 0.0, 10.0), 0.0)
}

#[test]
fn fully_hidden_object_is_zero_at_ten_times_density() {
    let s = scene(
        "hidden",
        &[
            ("target", "tree", &[], [30.0, 0.0, 5.0], [1.0, 1.0, 3.0], false, false),
            ("wall", "wall", &[], [15.0, 0.0, 10.0], [0.5, 6.0, 10.0], false, true),
        ],
    );
    let vis = visible_objects(&s, &spawn());
    let target = vis.iter().find(|v| v.object_id == "target").unwrap();
    assert_eq!(target.fraction, 0.0);
    assert_eq!(
        oracle_fraction(&s, spawn().position, "target", 10 * DEFAULT_SAMPLES_PER_AXIS),
        0.0
    );
}

#[test]
fn partly_hidden_object_matches_dense_oracle() {
    let s = scene(
        "half",
        &[
            ("target", "tree", &[], [30.0, 0.0, 5.0], [1.0, 4.0, 3.0], false, false),
            ("wall", "wall", &[], [15.0, -3.0, 10.0], [0.5, 3.0, 10.0], false, true),
        ],
    );
    let lib = visible_objects_with(&s, &spawn(), 40);
    let target = lib.iter().find(|v| v.object_id == "target").unwrap();
    let dense = oracle_fraction(&s, spawn().position, "target", 40);
    assert_eq!(target.fraction, dense);
    assert!(dense > 0.3 && dense < 0.7, "{dense}");
    let coarse = visible_objects(&s, &spawn());
    let coarse = coarse.iter().find(|v| v.object_id == "target").unwrap().fraction;
    assert!((coarse - dense).abs() <= 0.25, "coarse {coarse} vs dense {dense}");
}

fn arb_box(x: std::ops::Range<f64>) -> impl Strategy<Value = ([f64; 3], [f64; 3])> {
    (x, -30.0..30.0f64, 1.0..15.0f64, 0.3..4.0f64, 0.3..6.0f64, 0.3..6.0f64)
        .prop_map(|(cx, cy, cz, ex, ey, ez)| ([cx, cy, cz], [ex, ey, ez]))
}

fn build(target: ([f64; 3], [f64; 3]), occluders: &[([f64; 3], [f64; 3])]) -> Scene {
    let ids: Vec<String> = (0..occluders.len()).map(|i| format!("occ{i}")).collect();
    let mut objs: Vec<Obj> = vec![("target", "tree", &[], target.0, target.1, false, false)];
    for (i, (c, e)) in occluders.iter().enumerate() {
        objs.push((&ids[i], "wall", &[], *c, *e, false, true));
    }
    scene("random", &objs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn library_agrees_with_independent_oracle(
        target in arb_box(20.0..60.0),
        occluders in prop::collection::vec(arb_box(5.0..40.0), 0..4),
    ) {
        let s = build(target, &occluders);
        let eye = spawn().position;
        prop_assume!(!occluders.iter().any(|(c, e)| (0..3).all(|a| ([eye.x, eye.y, eye.z][a] - c[a]).abs() <= e[a])));
        for v in visible_objects(&s, &spawn()) {
            let expected = oracle_fraction(&s, eye, &v.object_id, DEFAULT_SAMPLES_PER_AXIS);
            prop_assert_eq!(v.fraction, expected, "{}", v.object_id);
        }
    }

    #[test]
    fn adding_an_occluder_never_increases_visibility(
        target in arb_box(20.0..60.0),
        occluders in prop::collection::vec(arb_box(5.0..40.0), 0..3),
        extra in arb_box(5.0..40.0),
    ) {
        let before = build(target, &occluders);
        let mut more = occluders.clone();
        more.push(extra);
        let after = build(target, &more);
        let frac = |s: &Scene| visible_objects(s, &spawn()).into_iter().find(|v| v.object_id == "target").map(|v| v.fraction);
        match (frac(&before), frac(&after)) {
            (Some(b), Some(a)) => prop_assert!(a <= b, "{a} > {b}"),
            (b, a) => prop_assert_eq!(b.is_some(), a.is_some(), "frustum membership must not change"),
        }
    }

    #[test]
    fn frustum_membership_follows_center_bearing_and_range(
        cx in -80.0..80.0f64, cy in -80.0..80.0f64, yaw in -3.1..3.1f64,
    ) {
        let s = scene("one", &[("o", "rock", &[], [cx, cy, 5.0], [0.5, 0.5, 0.5], false, false)]);
        let pose = Pose::new(Vec3::new(0.0, 0.0, 10.0), yaw);
        let (dx, dy, dz) = (cx, cy, -5.0);
        let bearing = (dy.atan2(dx) - yaw).to_degrees();
        let bearing = (bearing + 540.0).rem_euclid(360.0) - 180.0;
        let range = (dx * dx + dy * dy + dz * dz).sqrt();
        // stay clear of the boundary, where rounding could go either way
        prop_assume!((bearing.abs() - 45.0).abs() > 1e-6 && (range - 80.0).abs() > 1e-6);
        let expected = bearing.abs() < 45.0 && range < 80.0;
        prop_assert_eq!(!visible_objects(&s, &pose).is_empty(), expected);
    }
}

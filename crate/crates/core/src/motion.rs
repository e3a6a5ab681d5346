//! Drone kinematics: fixed-distance planar moves and Gaussian revisit noise.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::{Aabb, Pose};

pub const FORWARD_STEP_M: f64 = 10.0;
pub const BACK_STEP_M: f64 = 5.0;
pub const LATERAL_STEP_M: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MoveCommand {
    Closer,
    Back,
    Left,
    Right,
}

/// Moves along the heading (or perpendicular to it) and clamps the result
/// into `bounds`. Altitude and yaw never change. The flag reports whether
/// clamping altered the raw target.
pub fn apply_move(pose: Pose, command: MoveCommand, bounds: &Aabb) -> (Pose, bool) {
    let delta = match command {
        MoveCommand::Closer => pose.forward() * FORWARD_STEP_M,
        MoveCommand::Back => pose.forward() * -BACK_STEP_M,
        MoveCommand::Left => pose.left() * LATERAL_STEP_M,
        MoveCommand::Right => pose.left() * -LATERAL_STEP_M,
    };
    let mut target = pose.position + delta;
    target.z = pose.position.z;
    let clamped_pos = bounds.clamp(target);
    let clamped = clamped_pos != target;
    (
        Pose {
            position: clamped_pos,
            yaw: pose.yaw,
        },
        clamped,
    )
}

/// Adds independent `N(0, sigma²)` offsets to x and y, then clamps.
///
/// Always consumes exactly two normal draws from `rng`, including when
/// `sigma` is zero, so the stream position does not depend on sigma.
pub fn perturb_pose<R: Rng + ?Sized>(pose: Pose, sigma: f64, bounds: &Aabb, rng: &mut R) -> Pose {
    let dx: f64 = rng.sample(StandardNormal);
    let dy: f64 = rng.sample(StandardNormal);
    if sigma == 0.0 {
        return pose;
    }
    let mut p = pose.position;
    p.x += sigma * dx;
    p.y += sigma * dy;
    Pose {
        position: bounds.clamp(p),
        yaw: pose.yaw,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::rng;
    use proptest::prelude::*;

    fn arena() -> Aabb {
        Aabb::new(Vec3::new(-100.0, -100.0, 0.0), Vec3::new(100.0, 100.0, 50.0))
    }

    #[test]
    fn closer_moves_ten_meters_along_heading() {
        let (p, clamped) = apply_move(Pose::new(Vec3::ZERO, 0.0), MoveCommand::Closer, &arena());
        assert!(!clamped);
        assert!((p.position.x - 10.0).abs() < 1e-12);
        assert!(p.position.y.abs() < 1e-12);
    }

    #[test]
    fn closer_then_two_backs_returns_home() {
        let b = arena();
        let start = Pose::new(Vec3::ZERO, 0.0);
        let (p, _) = apply_move(start, MoveCommand::Closer, &b);
        let (p, _) = apply_move(p, MoveCommand::Back, &b);
        let (p, _) = apply_move(p, MoveCommand::Back, &b);
        assert_eq!(p, start);
    }

    #[test]
    fn clamps_at_bound() {
        let b = arena();
        let (p, clamped) = apply_move(Pose::new(Vec3::new(97.0, 0.0, 10.0), 0.0), MoveCommand::Closer, &b);
        assert!(clamped);
        assert_eq!(p.position, Vec3::new(100.0, 0.0, 10.0));
    }

    #[test]
    fn left_is_counter_clockwise_of_heading() {
        let (p, _) = apply_move(Pose::new(Vec3::ZERO, 0.0), MoveCommand::Left, &arena());
        assert!(p.position.x.abs() < 1e-12 && (p.position.y - 10.0).abs() < 1e-12);
    }

    #[test]
    fn zero_sigma_is_identity() {
        let pose = Pose::new(Vec3::new(3.0, -4.0, 12.0), 1.0);
        let mut r = rng::stream(11);
        assert_eq!(perturb_pose(pose, 0.0, &arena(), &mut r), pose);
    }

    #[test]
    fn unit_sigma_offsets_match_frozen_stream() {
        // First two StandardNormal draws of ChaCha8 seeded with 42, frozen.
        let mut r = rng::stream(42);
        let p = perturb_pose(Pose::new(Vec3::new(0.0, 0.0, 10.0), 0.0), 1.0, &arena(), &mut r);
        assert_eq!(p.position.x, GOLDEN_DX);
        assert_eq!(p.position.y, GOLDEN_DY);
        assert_eq!(p.position.z, 10.0);
    }

    const GOLDEN_DX: f64 = 0.47798123835102174;
    const GOLDEN_DY: f64 = 1.3340706102318078;

    #[test]
    fn sample_std_is_within_five_percent() {
        let b = Aabb::new(Vec3::new(-1e6, -1e6, 0.0), Vec3::new(1e6, 1e6, 50.0));
        let sigma = 2.5;
        let mut r = rng::stream(5);
        let n = 10_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| perturb_pose(Pose::new(Vec3::ZERO, 0.0), sigma, &b, &mut r).position.x)
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var.sqrt() - sigma).abs() / sigma < 0.05, "std {}", var.sqrt());
    }

    proptest! {
        #[test]
        fn moves_preserve_altitude_and_yaw(x in -90.0..90.0f64, y in -90.0..90.0f64, z in 0.0..50.0f64,
                                           yaw in 0.0..std::f64::consts::TAU, k in 0usize..4) {
            let cmd = [MoveCommand::Closer, MoveCommand::Back, MoveCommand::Left, MoveCommand::Right][k];
            let pose = Pose::new(Vec3::new(x, y, z), yaw);
            let (p, _) = apply_move(pose, cmd, &arena());
            prop_assert_eq!(p.position.z, z);
            prop_assert_eq!(p.yaw, pose.yaw);
        }

        #[test]
        fn left_right_cancel_when_unclamped(x in -80.0..80.0f64, y in -80.0..80.0f64, yaw in 0.0..std::f64::consts::TAU) {
            let b = arena();
            let pose = Pose::new(Vec3::new(x, y, 10.0), yaw);
            let (l, c1) = apply_move(pose, MoveCommand::Left, &b);
            let (back, c2) = apply_move(l, MoveCommand::Right, &b);
            prop_assume!(!c1 && !c2);
            prop_assert!((back.position.x - x).abs() < 1e-9 && (back.position.y - y).abs() < 1e-9);
            prop_assert_eq!(back.yaw, pose.yaw);
            let (r, c3) = apply_move(pose, MoveCommand::Right, &b);
            let (back, c4) = apply_move(r, MoveCommand::Left, &b);
            prop_assume!(!c3 && !c4);
            prop_assert!((back.position.x - x).abs() < 1e-9 && (back.position.y - y).abs() < 1e-9);
        }

        #[test]
        fn perturbation_is_reproducible(seed in any::<u64>(), sigma in 0.0..5.0f64) {
            let pose = Pose::new(Vec3::new(1.0, 2.0, 10.0), 0.5);
            let a = perturb_pose(pose, sigma, &arena(), &mut rng::stream(seed));
            let b = perturb_pose(pose, sigma, &arena(), &mut rng::stream(seed));
            prop_assert_eq!(a.position.x.to_bits(), b.position.x.to_bits());
            prop_assert_eq!(a.position.y.to_bits(), b.position.y.to_bits());
        }
    }
}

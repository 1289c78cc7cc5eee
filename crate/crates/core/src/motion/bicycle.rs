use super::pursuit::Pose;

/// Kinematic bicycle update; speed never goes negative.
pub fn bicycle_step(pose: Pose, v: f64, accel: f64, steer: f64, wheelbase: f64, dt: f64) -> (Pose, f64) {
    let heading = pose.2 + v / wheelbase * steer.tan() * dt;
    let x = pose.0 + v * heading.cos() * dt;
    let y = pose.1 + v * heading.sin() * dt;
    ((x, y, heading), (v + accel * dt).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_translation() {
        let ((x, y, h), v) = bicycle_step((1.0, 2.0, 0.0), 10.0, 0.0, 0.0, 2.7, 0.1);
        assert_eq!((x, y, h, v), (2.0, 2.0, 0.0, 10.0));
    }

    #[test]
    fn speed_floor() {
        let (_, v) = bicycle_step((0.0, 0.0, 0.0), 10.0, -20.0, 0.0, 2.7, 0.1);
        assert!((v - 8.0).abs() < 1e-12);
        let (_, v) = bicycle_step((0.0, 0.0, 0.0), 10.0, -200.0, 0.0, 2.7, 0.1);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn constant_steer_traces_a_circle() {
        let (l, steer, v, dt) = (2.7, 0.1f64, 10.0, 0.001);
        let radius = l / steer.tan();
        let mut pose = (0.0, 0.0, 0.0);
        // center of the turning circle is to the left of the start pose
        let center = (0.0, radius);
        let mut worst: f64 = 0.0;
        for _ in 0..20_000 {
            pose = bicycle_step(pose, v, 0.0, steer, l, dt).0;
            let r = (pose.0 - center.0).hypot(pose.1 - center.1);
            worst = worst.max((r - radius).abs() / radius);
        }
        assert!(worst < 0.01, "{worst}");
    }
}

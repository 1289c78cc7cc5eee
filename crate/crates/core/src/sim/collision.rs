use super::world::{Role, Vehicle, WorldState};

/// Oriented footprint of a vehicle.
#[derive(Debug, Clone, Copy)]
pub struct Footprint {
    pub center: (f64, f64),
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl Footprint {
    pub fn of(v: &Vehicle) -> Self {
        let (s, c) = v.heading.sin_cos();
        Self {
            center: (v.x - 0.5 * v.length * c, v.y - 0.5 * v.length * s),
            heading: v.heading,
            half_length: 0.5 * v.length,
            half_width: 0.5 * v.width,
        }
    }

    fn axes(&self) -> [(f64, f64); 2] {
        let (s, c) = self.heading.sin_cos();
        [(c, s), (-s, c)]
    }

    fn radius_along(&self, axis: (f64, f64)) -> f64 {
        let [f, n] = self.axes();
        self.half_length * (f.0 * axis.0 + f.1 * axis.1).abs() + self.half_width * (n.0 * axis.0 + n.1 * axis.1).abs()
    }

    /// Separating-axis test. Touching rectangles count as overlapping.
    pub fn overlaps(&self, other: &Footprint) -> bool {
        let d = (other.center.0 - self.center.0, other.center.1 - self.center.1);
        self.axes().into_iter().chain(other.axes()).all(|axis| {
            let dist = (d.0 * axis.0 + d.1 * axis.1).abs();
            dist <= self.radius_along(axis) + other.radius_along(axis)
        })
    }
}

/// True iff the ego footprint overlaps any other vehicle's footprint.
pub fn check_collision(w: &WorldState) -> bool {
    let Some(ego) = w.vehicles.iter().find(|v| v.role == Role::Ego) else {
        return false;
    };
    let ego_fp = Footprint::of(ego);
    w.vehicles
        .iter()
        .filter(|v| v.role != Role::Ego)
        .any(|v| ego_fp.overlaps(&Footprint::of(v)))
}

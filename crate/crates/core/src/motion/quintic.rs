use std::io::Write;

use crate::error::{Error, Result};
use crate::sim::{LaneGeometry, Vehicle};

/// Shortest planning window accepted by [`solve_quintic`].
pub const MIN_HORIZON: f64 = 0.5;

/// Position, velocity and acceleration on both axes at one end of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryState {
    pub x: f64,
    pub vx: f64,
    pub ax: f64,
    pub y: f64,
    pub vy: f64,
    pub ay: f64,
}

impl BoundaryState {
    fn x_channel(&self) -> [f64; 3] {
        [self.x, self.vx, self.ax]
    }

    fn y_channel(&self) -> [f64; 3] {
        [self.y, self.vy, self.ay]
    }
}

/// Two quintic polynomials in absolute time, coefficients ordered from t⁵ down to t⁰.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticTrajectory {
    pub ax_coeffs: [f64; 6],
    pub ay_coeffs: [f64; 6],
    pub t_i: f64,
    pub t_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub ax: f64,
    pub ay: f64,
    /// The requested time was outside `[t_i, t_t]` and was clamped.
    pub clamped: bool,
}

/// Value, first and second derivative of a degree-5 polynomial.
fn poly_eval(c: &[f64; 6], t: f64) -> (f64, f64, f64) {
    let p = ((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5];
    let d1 = (((5.0 * c[0] * t + 4.0 * c[1]) * t + 3.0 * c[2]) * t + 2.0 * c[3]) * t + c[4];
    let d2 = ((20.0 * c[0] * t + 12.0 * c[1]) * t + 6.0 * c[2]) * t + 2.0 * c[3];
    (p, d1, d2)
}

/// The 6×6 time matrix whose rows map coefficients to (p, ṗ, p̈) at `t_i` then at `t_t`.
pub fn time_matrix(t_i: f64, t_t: f64) -> [[f64; 6]; 6] {
    let rows = |t: f64| {
        [
            [t.powi(5), t.powi(4), t.powi(3), t * t, t, 1.0],
            [5.0 * t.powi(4), 4.0 * t.powi(3), 3.0 * t * t, 2.0 * t, 1.0, 0.0],
            [20.0 * t.powi(3), 12.0 * t * t, 6.0 * t, 2.0, 0.0, 0.0],
        ]
    };
    let [r0, r1, r2] = rows(t_i);
    let [r3, r4, r5] = rows(t_t);
    [r0, r1, r2, r3, r4, r5]
}

fn mat_vec(m: &[[f64; 6]; 6], v: &[f64; 6]) -> [f64; 6] {
    let mut out = [0.0; 6];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
    out
}

/// Gaussian elimination with column equilibration and partial pivoting.
fn gauss_solve(m: &[[f64; 6]; 6], rhs: &[f64; 6]) -> Option<[f64; 6]> {
    let mut scale = [0.0f64; 6];
    for j in 0..6 {
        scale[j] = (0..6).map(|i| m[i][j].abs()).fold(0.0, f64::max);
        if scale[j] == 0.0 {
            return None;
        }
    }
    let mut a = [[0.0; 7]; 6];
    for i in 0..6 {
        for j in 0..6 {
            a[i][j] = m[i][j] / scale[j];
        }
        a[i][6] = rhs[i];
    }
    for col in 0..6 {
        let pivot = (col..6).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..6 {
            let (top, bottom) = a.split_at_mut(row);
            let (pivot_row, target) = (&top[col], &mut bottom[0]);
            let f = target[col] / pivot_row[col];
            for (x, p) in target[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
        }
    }
    let mut z = [0.0; 6];
    for i in (0..6).rev() {
        let tail: f64 = (i + 1..6).map(|k| a[i][k] * z[k]).sum();
        z[i] = (a[i][6] - tail) / a[i][i];
    }
    let mut out = [0.0; 6];
    for j in 0..6 {
        out[j] = z[j] / scale[j];
    }
    Some(out)
}

fn solve_channel(m: &[[f64; 6]; 6], start: [f64; 3], end: [f64; 3]) -> Option<[f64; 6]> {
    let rhs = [start[0], start[1], start[2], end[0], end[1], end[2]];
    let mut c = gauss_solve(m, &rhs)?;
    // one round of iterative refinement
    let r = mat_vec(m, &c);
    let residual: [f64; 6] = std::array::from_fn(|i| rhs[i] - r[i]);
    let dc = gauss_solve(m, &residual)?;
    for (ci, d) in c.iter_mut().zip(dc) {
        *ci += d;
    }
    Some(c)
}

/// Fit independent quintics to the x and y boundary conditions over `[t_i, t_t]`.
pub fn solve_quintic(initial: &BoundaryState, terminal: &BoundaryState, t_i: f64, t_t: f64) -> Result<QuinticTrajectory> {
    if !(t_i.is_finite() && t_t.is_finite()) || t_t - t_i < MIN_HORIZON {
        return Err(Error::Planning(format!(
            "planning window [{t_i}, {t_t}] is shorter than {MIN_HORIZON} s"
        )));
    }
    let m = time_matrix(t_i, t_t);
    let singular = || Error::Planning(format!("time matrix is singular on [{t_i}, {t_t}]"));
    let ax_coeffs = solve_channel(&m, initial.x_channel(), terminal.x_channel()).ok_or_else(singular)?;
    let ay_coeffs = solve_channel(&m, initial.y_channel(), terminal.y_channel()).ok_or_else(singular)?;
    Ok(QuinticTrajectory {
        ax_coeffs,
        ay_coeffs,
        t_i,
        t_t,
    })
}

impl QuinticTrajectory {
    pub fn duration(&self) -> f64 {
        self.t_t - self.t_i
    }

    pub fn eval(&self, t: f64) -> TrajectorySample {
        let tc = t.clamp(self.t_i, self.t_t);
        let (x, vx, ax) = poly_eval(&self.ax_coeffs, tc);
        let (y, vy, ay) = poly_eval(&self.ay_coeffs, tc);
        TrajectorySample {
            x,
            y,
            vx,
            vy,
            ax,
            ay,
            clamped: tc != t,
        }
    }

    /// Sample times `t_i, t_i + step, …, t_t` (the last one is exactly `t_t`).
    pub fn sample_times(&self, step: f64) -> impl Iterator<Item = f64> + '_ {
        let n = (self.duration() / step - 1e-9).ceil().max(1.0) as usize;
        (0..=n).map(move |k| (self.t_i + k as f64 * step).min(self.t_t))
    }

    /// Normwise relative residual `‖T·c − b‖∞ / (‖T‖∞·‖c‖∞ + ‖b‖∞)` of each channel's system.
    pub fn relative_residuals(&self, initial: &BoundaryState, terminal: &BoundaryState) -> (f64, f64) {
        let m = time_matrix(self.t_i, self.t_t);
        let norm_t = m.iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let inf = |v: &[f64]| v.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let rel = |c: &[f64; 6], s: [f64; 3], e: [f64; 3]| {
            let b = [s[0], s[1], s[2], e[0], e[1], e[2]];
            let tc = mat_vec(&m, c);
            let r: Vec<f64> = tc.iter().zip(&b).map(|(p, q)| p - q).collect();
            let den = norm_t * inf(c) + inf(&b);
            if den == 0.0 {
                0.0
            } else {
                inf(&r) / den
            }
        };
        (
            rel(&self.ax_coeffs, initial.x_channel(), terminal.x_channel()),
            rel(&self.ay_coeffs, initial.y_channel(), terminal.y_channel()),
        )
    }

    /// CSV with header `t,x,y,vx,vy,ax,ay`, sampled every `step` seconds.
    pub fn write_csv<W: Write>(&self, mut out: W, step: f64) -> std::io::Result<()> {
        writeln!(out, "t,x,y,vx,vy,ax,ay")?;
        for t in self.sample_times(step) {
            let s = self.eval(t);
            writeln!(out, "{t},{},{},{},{},{},{}", s.x, s.y, s.vx, s.vy, s.ax, s.ay)?;
        }
        Ok(())
    }
}

/// Reference trajectory for moving the ego to the center of `target_lane` over `duration`
/// seconds. Time starts at 0 at the moment of planning.
pub fn plan_lane_change(
    ego: &Vehicle,
    target_lane: usize,
    duration: f64,
    geometry: &LaneGeometry,
) -> Result<QuinticTrajectory> {
    if !(ego.v > 0.0) {
        return Err(Error::Planning(format!("ego speed must be positive, got {}", ego.v)));
    }
    if target_lane >= geometry.lane_count || target_lane.abs_diff(ego.lane) != 1 {
        return Err(Error::Planning(format!(
            "lane {target_lane} is not adjacent to ego lane {}",
            ego.lane
        )));
    }
    let (s, c) = ego.heading.sin_cos();
    let initial = BoundaryState {
        x: ego.x,
        vx: ego.v * c,
        ax: ego.a,
        y: ego.y,
        vy: ego.v * s,
        ay: 0.0,
    };
    let terminal = BoundaryState {
        x: ego.x + ego.v * duration,
        vx: ego.v,
        ax: 0.0,
        y: geometry.lane_center(target_lane),
        vy: 0.0,
        ay: 0.0,
    };
    solve_quintic(&initial, &terminal, 0.0, duration)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Role;
    use nalgebra::{Matrix6, Vector6};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nalgebra_oracle(t_i: f64, t_t: f64, start: [f64; 3], end: [f64; 3]) -> [f64; 6] {
        let m = time_matrix(t_i, t_t);
        let mat = Matrix6::from_fn(|i, j| m[i][j]);
        let b = Vector6::new(start[0], start[1], start[2], end[0], end[1], end[2]);
        let c = mat.lu().solve(&b).expect("nonsingular");
        std::array::from_fn(|i| c[i])
    }

    fn random_boundary(rng: &mut ChaCha8Rng) -> BoundaryState {
        BoundaryState {
            x: rng.random_range(-100.0..100.0),
            vx: rng.random_range(-30.0..30.0),
            ax: rng.random_range(-5.0..5.0),
            y: rng.random_range(-10.0..10.0),
            vy: rng.random_range(-3.0..3.0),
            ay: rng.random_range(-2.0..2.0),
        }
    }

    fn max_boundary_error(traj: &QuinticTrajectory, a: &BoundaryState, b: &BoundaryState) -> f64 {
        let err = |s: TrajectorySample, e: &BoundaryState| {
            [s.x - e.x, s.vx - e.vx, s.ax - e.ax, s.y - e.y, s.vy - e.vy, s.ay - e.ay]
                .iter()
                .map(|d| d.abs())
                .fold(0.0, f64::max)
        };
        err(traj.eval(traj.t_i), a).max(err(traj.eval(traj.t_t), b))
    }

    #[test]
    fn zero_boundaries_give_zero_coefficients() {
        let z = BoundaryState::default();
        let traj = solve_quintic(&z, &z, 0.0, 1.0).unwrap();
        assert!(traj.ax_coeffs.iter().chain(&traj.ay_coeffs).all(|c| *c == 0.0));
    }

    #[test]
    fn constant_velocity_solution() {
        let a = BoundaryState { vx: 10.0, ..Default::default() };
        let b = BoundaryState { x: 50.0, vx: 10.0, ..Default::default() };
        let traj = solve_quintic(&a, &b, 0.0, 5.0).unwrap();
        let expected = [0.0, 0.0, 0.0, 0.0, 10.0, 0.0];
        for (c, e) in traj.ax_coeffs.iter().zip(expected) {
            assert!((c - e).abs() < 1e-12, "{:?}", traj.ax_coeffs);
        }
        let s = traj.eval(2.5);
        assert!((s.x - 25.0).abs() < 1e-12 && (s.vx - 10.0).abs() < 1e-12);
        assert!(s.y.abs() < 1e-15 && s.ax.abs() < 1e-12 && !s.clamped);
    }

    #[test]
    fn rest_to_rest_is_minimum_jerk() {
        let a = BoundaryState::default();
        let b = BoundaryState { x: 1.0, ..Default::default() };
        let traj = solve_quintic(&a, &b, 0.0, 1.0).unwrap();
        let oracle = nalgebra_oracle(0.0, 1.0, [0.0; 3], [1.0, 0.0, 0.0]);
        let expected = [6.0, -15.0, 10.0, 0.0, 0.0, 0.0];
        for i in 0..6 {
            assert!((oracle[i] - expected[i]).abs() < 1e-9);
            assert!((traj.ax_coeffs[i] - expected[i]).abs() < 1e-9);
        }
        let s = traj.eval(0.5);
        assert!((s.x - 0.5).abs() < 1e-12);
        assert!((s.vx - 1.875).abs() < 1e-12);
    }

    #[test]
    fn matches_lu_oracle_with_offset_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (a, b) = (random_boundary(&mut rng), random_boundary(&mut rng));
            let t_i = rng.random_range(0.0..10.0);
            let t_t = t_i + rng.random_range(0.5..8.0);
            let traj = solve_quintic(&a, &b, t_i, t_t).unwrap();
            let oracle = nalgebra_oracle(t_i, t_t, a.x_channel(), b.x_channel());
            for (c, o) in traj.ax_coeffs.iter().zip(oracle) {
                assert!((c - o).abs() <= 1e-6 * o.abs().max(1.0), "{c} vs {o}");
            }
            let (rx, ry) = traj.relative_residuals(&a, &b);
            assert!(rx < 1e-9 && ry < 1e-9, "{rx} {ry}");
            // absolute-time coefficients lose digits as the window shrinks relative to t_t
            let scale = 1.0 + a.x_channel().iter().chain(&b.x_channel()).fold(0.0f64, |m, v| m.max(v.abs()));
            let tol = 1e-13 * scale * (t_t / (t_t - t_i)).powi(5).max(1.0);
            let e = max_boundary_error(&traj, &a, &b);
            assert!(e < tol.max(1e-9), "{e} vs {tol}");
        }
    }

    #[test]
    fn short_windows_are_rejected() {
        let z = BoundaryState::default();
        assert!(matches!(solve_quintic(&z, &z, 0.0, 0.4), Err(Error::Planning(_))));
        assert!(solve_quintic(&z, &z, 1.0, 1.0).is_err());
        assert!(solve_quintic(&z, &z, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn eval_outside_window_clamps() {
        let a = BoundaryState::default();
        let b = BoundaryState { x: 1.0, ..Default::default() };
        let traj = solve_quintic(&a, &b, 0.0, 1.0).unwrap();
        let s = traj.eval(2.0);
        assert!(s.clamped);
        assert!((s.x - 1.0).abs() < 1e-12);
        assert!(traj.eval(-1.0).clamped);
    }

    #[test]
    fn velocity_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let (a, b) = (random_boundary(&mut rng), random_boundary(&mut rng));
            let traj = solve_quintic(&a, &b, 0.0, rng.random_range(1.0..6.0)).unwrap();
            let h = 1e-5;
            for k in 1..10 {
                let t = traj.t_i + traj.duration() * k as f64 / 10.0;
                let s = traj.eval(t);
                let (p, m) = (traj.eval(t + h), traj.eval(t - h));
                let fd_vx = (p.x - m.x) / (2.0 * h);
                let fd_vy = (p.y - m.y) / (2.0 * h);
                assert!((fd_vx - s.vx).abs() <= 1e-4 * s.vx.abs().max(1.0));
                assert!((fd_vy - s.vy).abs() <= 1e-4 * s.vy.abs().max(1.0));
            }
        }
    }

    fn ego_at(y: f64, lane: usize, v: f64) -> Vehicle {
        let g = LaneGeometry::default();
        let mut ego = Vehicle::on_lane(1, Role::Ego, &g, lane, 100.0, v);
        ego.y = y;
        ego
    }

    #[test]
    fn lane_change_displacement_is_one_lane() {
        let g = LaneGeometry::default();
        let traj = plan_lane_change(&ego_at(1.875, 0, 20.0), 1, 5.0, &g).unwrap();
        let dy = traj.eval(traj.t_t).y - traj.eval(traj.t_i).y;
        assert!((dy - 3.75).abs() < 1e-9);
        let end = traj.eval(traj.t_t);
        assert!((end.x - 200.0).abs() < 1e-9 && (end.vx - 20.0).abs() < 1e-9);
    }

    #[test]
    fn centered_ego_gets_constant_lateral_channel() {
        // already on the target lane center: only the constant lateral term survives
        let g = LaneGeometry { lane_count: 3, ..Default::default() };
        let ego = ego_at(g.lane_center(1), 0, 20.0);
        let traj = plan_lane_change(&ego, 1, 5.0, &g).unwrap();
        for c in &traj.ay_coeffs[..5] {
            assert!(c.abs() < 1e-12);
        }
        assert!((traj.ay_coeffs[5] - g.lane_center(1)).abs() < 1e-12);
    }

    #[test]
    fn peak_lateral_acceleration_matches_minimum_jerk_bound() {
        let g = LaneGeometry::default();
        for duration in [3.0, 5.0, 7.5] {
            let traj = plan_lane_change(&ego_at(1.875, 0, 25.0), 1, duration, &g).unwrap();
            let peak = traj
                .sample_times(1e-3)
                .map(|t| traj.eval(t).ay.abs())
                .fold(0.0, f64::max);
            let analytic = 10.0 / 3f64.sqrt() * 3.75 / (duration * duration);
            assert!((peak - analytic).abs() < 0.01 * analytic, "{peak} vs {analytic}");
        }
    }

    #[test]
    fn invalid_plans_rejected() {
        let g = LaneGeometry::default();
        assert!(plan_lane_change(&ego_at(1.875, 0, 20.0), 0, 5.0, &g).is_err());
        assert!(plan_lane_change(&ego_at(1.875, 0, 20.0), 2, 5.0, &g).is_err());
        assert!(plan_lane_change(&ego_at(1.875, 0, 0.0), 1, 5.0, &g).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let traj = plan_lane_change(&ego_at(1.875, 0, 20.0), 1, 5.0, &LaneGeometry::default()).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf, 0.1).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x,y,vx,vy,ax,ay"));
        assert_eq!(lines.count(), 51);
    }
}

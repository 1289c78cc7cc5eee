use crate::error::{Error, Result};

/// Intelligent Driver Model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmParams {
    /// Desired speed (m/s).
    pub v0: f64,
    /// Desired time headway (s).
    pub time_headway: f64,
    /// Maximum acceleration (m/s²).
    pub a_max: f64,
    /// Comfortable deceleration (m/s²).
    pub b_comf: f64,
    /// Free-road exponent.
    pub delta: f64,
    /// Jam distance (m).
    pub s0: f64,
    /// Hard-braking bound; the output is never below `-b_hard`.
    pub b_hard: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            v0: 33.33,
            time_headway: 1.5,
            a_max: 0.73,
            b_comf: 1.67,
            delta: 4.0,
            s0: 2.0,
            b_hard: 8.0,
        }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("v0", self.v0),
            ("time_headway", self.time_headway),
            ("a_max", self.a_max),
            ("b_comf", self.b_comf),
            ("s0", self.s0),
            ("b_hard", self.b_hard),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("idm.{name} must be positive, got {value}")));
            }
        }
        if !(self.delta >= 1.0) {
            return Err(Error::Config(format!("idm.delta must be >= 1, got {}", self.delta)));
        }
        Ok(())
    }

    /// Desired dynamic gap s*.
    pub fn desired_gap(&self, v: f64, v_lead: f64) -> f64 {
        let interaction = v * self.time_headway + v * (v - v_lead) / (2.0 * (self.a_max * self.b_comf).sqrt());
        self.s0 + interaction.max(0.0)
    }

    /// Steady-state bumper gap for a vehicle following a leader at the same speed `v < v0`.
    pub fn equilibrium_gap(&self, v: f64) -> f64 {
        let free = 1.0 - (v / self.v0).powf(self.delta);
        (self.s0 + v * self.time_headway) / free.sqrt()
    }
}

/// IDM acceleration for a follower at speed `v` with bumper gap `gap` behind a leader at `v_lead`.
///
/// `gap` may be `f64::INFINITY` for a free road. A non-positive gap is a collision and is
/// rejected; callers handle it before asking for an acceleration.
pub fn idm_acceleration(gap: f64, v: f64, v_lead: f64, p: &IdmParams) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(Error::Domain(format!("IDM gap must be positive, got {gap}")));
    }
    let s_star = p.desired_gap(v, v_lead);
    let interaction = if gap.is_infinite() { 0.0 } else { (s_star / gap).powi(2) };
    let free = (v / p.v0).powf(p.delta);
    let a = p.a_max * (1.0 - free - interaction);
    Ok(a.clamp(-p.b_hard, p.a_max))
}

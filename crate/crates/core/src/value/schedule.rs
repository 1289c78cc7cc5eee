use crate::error::{Error, Result};

/// Linear decay from `eps_start` to `eps_end` over `decay_steps`, constant afterwards.
/// Also drives the continuous exploration noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub eps_start: f64,
    pub eps_end: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            eps_start: 1.0,
            eps_end: 0.1,
            decay_steps: 300_000,
        }
    }
}

impl EpsilonSchedule {
    pub fn new(eps_start: f64, eps_end: f64, decay_steps: u64) -> Result<Self> {
        let s = Self {
            eps_start,
            eps_end,
            decay_steps,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.eps_end && self.eps_end <= self.eps_start && self.eps_start <= 1.0) {
            return Err(Error::Config(format!(
                "epsilon schedule needs 0 <= end <= start <= 1, got {} -> {}",
                self.eps_start, self.eps_end
            )));
        }
        Ok(())
    }

    /// Same shape, unrestricted range (noise standard deviations are not probabilities).
    pub fn noise(start: f64, end: f64, decay_steps: u64) -> Result<Self> {
        if !(0.0 <= end && end <= start && start.is_finite()) {
            return Err(Error::Config(format!("noise schedule needs 0 <= end <= start, got {start} -> {end}")));
        }
        Ok(Self {
            eps_start: start,
            eps_end: end,
            decay_steps,
        })
    }
}

pub fn epsilon_at(sched: &EpsilonSchedule, step: u64) -> f64 {
    if step >= sched.decay_steps {
        return sched.eps_end;
    }
    let frac = step as f64 / sched.decay_steps as f64;
    sched.eps_start + (sched.eps_end - sched.eps_start) * frac
}

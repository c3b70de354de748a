//! Boundary conditions for the platoon leader.

use crate::error::{Result, SimError};

/// Piecewise-constant-acceleration speed profile given as (time, speed)
/// breakpoints. Between breakpoints the acceleration is the constant slope
/// connecting them; before the first and after the last it is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    breakpoints: Vec<(f64, f64)>,
}

impl SpeedProfile {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(SimError::InvalidScenario(
                "speed profile needs at least one breakpoint".into(),
            ));
        }
        for pair in breakpoints.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(SimError::InvalidScenario(format!(
                    "speed profile breakpoints must have strictly increasing times \
                     ({} then {})",
                    pair[0].0, pair[1].0
                )));
            }
        }
        for &(t, v) in &breakpoints {
            if !(v >= 0.0 && v.is_finite() && t.is_finite()) {
                return Err(SimError::InvalidScenario(format!(
                    "speed profile breakpoint ({t}, {v}) must have finite time and \
                     non-negative speed"
                )));
            }
        }
        Ok(SpeedProfile { breakpoints })
    }

    /// Profile that holds one speed forever.
    pub fn constant(speed: f64) -> Result<Self> {
        SpeedProfile::new(vec![(0.0, speed)])
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn initial_speed(&self) -> f64 {
        self.breakpoints[0].1
    }

    /// Prescribed acceleration at time `t`; constant on each half-open
    /// segment [t_k, t_{k+1}).
    pub fn accel(&self, t: f64) -> f64 {
        let bp = &self.breakpoints;
        if t < bp[0].0 || t >= bp[bp.len() - 1].0 {
            return 0.0;
        }
        for pair in bp.windows(2) {
            let ((t0, v0), (t1, v1)) = (pair[0], pair[1]);
            if t >= t0 && t < t1 {
                return (v1 - v0) / (t1 - t0);
            }
        }
        0.0
    }

    /// Closed-form speed at time `t` (piecewise linear through the breakpoints).
    pub fn speed(&self, t: f64) -> f64 {
        let bp = &self.breakpoints;
        if t <= bp[0].0 {
            return bp[0].1;
        }
        if t >= bp[bp.len() - 1].0 {
            return bp[bp.len() - 1].1;
        }
        for pair in bp.windows(2) {
            let ((t0, v0), (t1, v1)) = (pair[0], pair[1]);
            if t >= t0 && t < t1 {
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            }
        }
        bp[bp.len() - 1].1
    }
}

/// What the platoon leader responds to.
#[derive(Debug, Clone, PartialEq)]
pub enum LeaderBoundary {
    /// Nothing ahead: the leader accelerates with the model's free term.
    FreeFlow,
    /// The leader's acceleration is prescribed by a speed profile.
    ExternalProfile(SpeedProfile),
    /// A standing zero-length virtual vehicle at a fixed position, e.g. the
    /// stop line of a red traffic light.
    VirtualStandingObstacle { position: f64 },
}

impl LeaderBoundary {
    pub fn validate(&self) -> Result<()> {
        match self {
            LeaderBoundary::FreeFlow | LeaderBoundary::ExternalProfile(_) => Ok(()),
            LeaderBoundary::VirtualStandingObstacle { position } => {
                if position.is_finite() {
                    Ok(())
                } else {
                    Err(SimError::InvalidScenario(
                        "standing obstacle position must be finite".into(),
                    ))
                }
            }
        }
    }
}

/// Kinked default profile for the externally driven leader: cruise at 14 m/s,
/// brake at 2 m/s² down to 4 m/s, hold, accelerate at 1 m/s² back to 14 m/s.
pub fn default_leader_profile() -> SpeedProfile {
    SpeedProfile::new(vec![(0.0, 14.0), (10.0, 14.0), (15.0, 4.0), (25.0, 4.0), (35.0, 14.0)])
        .expect("default profile is well-formed")
}

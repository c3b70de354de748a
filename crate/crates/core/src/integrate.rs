//! One-step advancement of a platoon with four explicit schemes.
//!
//! All schemes share the same right-hand side: dx_i = v_i and dv_i given by
//! the car-following model against the vehicle ahead (or the leader boundary).
//! Negative predictor or final speeds are replaced by an analytic stop, so a
//! completed step never leaves a vehicle moving backwards.

use crate::boundary::LeaderBoundary;
use crate::error::{Result, SimError};
use crate::model::ModelKind;
use crate::state::{Derivative, PlatoonState};

/// The four explicit fixed-step schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Euler,
    Ballistic,
    Trapezoidal,
    Rk4,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] =
        [SchemeKind::Euler, SchemeKind::Ballistic, SchemeKind::Trapezoidal, SchemeKind::Rk4];

    /// Theoretical global convergence order on smooth problems.
    pub fn nominal_order(self) -> u32 {
        match self {
            SchemeKind::Euler | SchemeKind::Ballistic => 1,
            SchemeKind::Trapezoidal => 2,
            SchemeKind::Rk4 => 4,
        }
    }

    /// Acceleration evaluations consumed per step.
    pub fn evals_per_step(self) -> u32 {
        match self {
            SchemeKind::Euler | SchemeKind::Ballistic => 1,
            SchemeKind::Trapezoidal => 2,
            SchemeKind::Rk4 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Euler => "euler",
            SchemeKind::Ballistic => "ballistic",
            SchemeKind::Trapezoidal => "trapezoidal",
            SchemeKind::Rk4 => "rk4",
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "euler" => Ok(SchemeKind::Euler),
            "ballistic" => Ok(SchemeKind::Ballistic),
            "trapezoidal" | "trapezoid" | "heun" => Ok(SchemeKind::Trapezoidal),
            "rk4" => Ok(SchemeKind::Rk4),
            other => Err(format!(
                "unknown scheme '{other}' (expected euler, ballistic, trapezoidal or rk4)"
            )),
        }
    }
}

/// Everything a right-hand-side evaluation needs besides the state itself.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub model: &'a ModelKind,
    pub boundary: &'a LeaderBoundary,
    /// Vehicle lengths (m), leader first; lengths[i-1] shortens follower i's gap.
    pub lengths: &'a [f64],
}

impl StepContext<'_> {
    /// Bumper-to-bumper gap ahead of vehicle `i`, or `None` when nothing
    /// constrains it (free flow or an external profile for the leader).
    pub fn gap_ahead(&self, state: &PlatoonState, i: usize) -> Option<f64> {
        if i == 0 {
            match self.boundary {
                LeaderBoundary::VirtualStandingObstacle { position } => {
                    Some(position - state.x[0])
                }
                _ => None,
            }
        } else {
            Some(state.x[i - 1] - state.x[i] - self.lengths[i - 1])
        }
    }

    /// First vehicle whose gap is non-positive, if any.
    pub fn first_collision(&self, state: &PlatoonState) -> Option<(usize, f64)> {
        (0..state.n()).find_map(|i| {
            self.gap_ahead(state, i).and_then(|gap| (gap <= 0.0).then_some((i, gap)))
        })
    }
}

fn rhs_into(state: &PlatoonState, t: f64, ctx: &StepContext, out: &mut Derivative) -> Result<()> {
    let n = state.n();
    debug_assert_eq!(ctx.lengths.len(), n, "one length per vehicle");
    debug_assert_eq!(out.n(), n);

    out.dx[0] = state.v[0];
    out.dv[0] = match ctx.boundary {
        LeaderBoundary::FreeFlow => ctx.model.free_accel(state.v[0]),
        LeaderBoundary::ExternalProfile(profile) => profile.accel(t),
        LeaderBoundary::VirtualStandingObstacle { position } => {
            let gap = position - state.x[0];
            if gap <= 0.0 {
                return Err(SimError::Crash { vehicle: 0, time: t, gap });
            }
            ctx.model.accel(gap, state.v[0], 0.0)
        }
    };

    for i in 1..n {
        let gap = state.x[i - 1] - state.x[i] - ctx.lengths[i - 1];
        if gap <= 0.0 {
            return Err(SimError::Crash { vehicle: i, time: t, gap });
        }
        out.dx[i] = state.v[i];
        out.dv[i] = ctx.model.accel(gap, state.v[i], state.v[i - 1]);
    }
    Ok(())
}

/// Coupled right-hand side of the platoon ODE at time `t`.
pub fn rhs(state: &PlatoonState, t: f64, ctx: &StepContext) -> Result<Derivative> {
    let mut out = Derivative::zeros(state.n());
    rhs_into(state, t, ctx, &mut out)?;
    Ok(out)
}

/// Analytic stop replacing a would-be negative speed: if v + h̃·a < 0, the
/// vehicle instead comes to rest at the constant-deceleration stopping point
/// x − v²/(2a). Returns (x, v, fired).
pub fn stop_override(x: f64, v: f64, a: f64, h_tilde: f64) -> (f64, f64, bool) {
    if v + h_tilde * a < 0.0 {
        (x - v * v / (2.0 * a), 0.0, true)
    } else {
        (x, v, false)
    }
}

/// Advances platoon states one step at a time, reusing stage buffers.
/// Counts every acceleration evaluation it performs.
pub struct Stepper {
    k1: Derivative,
    k2: Derivative,
    k3: Derivative,
    k4: Derivative,
    work: PlatoonState,
    evals: u64,
}

impl Stepper {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        Stepper {
            k1: Derivative::zeros(n),
            k2: Derivative::zeros(n),
            k3: Derivative::zeros(n),
            k4: Derivative::zeros(n),
            work: PlatoonState::new(0.0, vec![0.0; n], vec![0.0; n]),
            evals: 0,
        }
    }

    /// Right-hand-side evaluations performed so far.
    pub fn evals(&self) -> u64 {
        self.evals
    }

    pub fn step(
        &mut self,
        scheme: SchemeKind,
        state: &mut PlatoonState,
        h: f64,
        ctx: &StepContext,
    ) -> Result<()> {
        match scheme {
            SchemeKind::Euler => self.step_euler(state, h, ctx),
            SchemeKind::Ballistic => self.step_ballistic(state, h, ctx),
            SchemeKind::Trapezoidal => self.step_trapezoidal(state, h, ctx),
            SchemeKind::Rk4 => self.step_rk4(state, h, ctx),
        }
    }

    fn eval(
        state: &PlatoonState,
        t: f64,
        ctx: &StepContext,
        out: &mut Derivative,
        evals: &mut u64,
    ) -> Result<()> {
        *evals += 1;
        rhs_into(state, t, ctx, out)
    }

    /// Builds `base + ht·k` in the scratch state, replacing any negative
    /// predictor speed by the analytic stop computed from the producing
    /// acceleration k.dv.
    fn predictor(&mut self, base: &PlatoonState, which: usize, ht: f64, t_stage: f64) {
        let k = match which {
            1 => &self.k1,
            2 => &self.k2,
            3 => &self.k3,
            _ => unreachable!(),
        };
        self.work.t = t_stage;
        for i in 0..base.n() {
            let mut x = base.x[i] + ht * k.dx[i];
            let mut v = base.v[i] + ht * k.dv[i];
            if v < 0.0 {
                if k.dv[i] < 0.0 {
                    x = base.x[i] - base.v[i] * base.v[i] / (2.0 * k.dv[i]);
                }
                v = 0.0;
            }
            self.work.x[i] = x;
            self.work.v[i] = v;
        }
    }

    /// Writes the combined update into `state`, stopping any vehicle whose
    /// final speed would be negative. The stopping point uses the
    /// begin-of-step acceleration; if that is non-negative (possible only
    /// through multi-stage combination) the speed is clamped and the
    /// scheme's position kept.
    fn commit(state: &mut PlatoonState, i: usize, mut x: f64, mut v: f64, a_begin: f64) {
        if v < 0.0 {
            if a_begin < 0.0 {
                x = state.x[i] - state.v[i] * state.v[i] / (2.0 * a_begin);
            }
            v = 0.0;
        }
        state.x[i] = x;
        state.v[i] = v;
    }

    pub fn step_euler(&mut self, state: &mut PlatoonState, h: f64, ctx: &StepContext) -> Result<()> {
        let t = state.t;
        Self::eval(state, t, ctx, &mut self.k1, &mut self.evals)?;
        for i in 0..state.n() {
            let x = state.x[i] + h * self.k1.dx[i];
            let v = state.v[i] + h * self.k1.dv[i];
            Self::commit(state, i, x, v, self.k1.dv[i]);
        }
        state.t = t + h;
        Ok(())
    }

    pub fn step_ballistic(
        &mut self,
        state: &mut PlatoonState,
        h: f64,
        ctx: &StepContext,
    ) -> Result<()> {
        let t = state.t;
        Self::eval(state, t, ctx, &mut self.k1, &mut self.evals)?;
        for i in 0..state.n() {
            let a = self.k1.dv[i];
            let x = state.x[i] + h * state.v[i] + 0.5 * h * h * a;
            let v = state.v[i] + h * a;
            Self::commit(state, i, x, v, a);
        }
        state.t = t + h;
        Ok(())
    }

    pub fn step_trapezoidal(
        &mut self,
        state: &mut PlatoonState,
        h: f64,
        ctx: &StepContext,
    ) -> Result<()> {
        let t = state.t;
        Self::eval(state, t, ctx, &mut self.k1, &mut self.evals)?;
        self.predictor(state, 1, h, t + h);
        Self::eval(&self.work, t + h, ctx, &mut self.k2, &mut self.evals)?;
        for i in 0..state.n() {
            let x = state.x[i] + 0.5 * h * (self.k1.dx[i] + self.k2.dx[i]);
            let v = state.v[i] + 0.5 * h * (self.k1.dv[i] + self.k2.dv[i]);
            Self::commit(state, i, x, v, self.k1.dv[i]);
        }
        state.t = t + h;
        Ok(())
    }

    pub fn step_rk4(&mut self, state: &mut PlatoonState, h: f64, ctx: &StepContext) -> Result<()> {
        let t = state.t;
        let half = 0.5 * h;
        Self::eval(state, t, ctx, &mut self.k1, &mut self.evals)?;
        self.predictor(state, 1, half, t + half);
        Self::eval(&self.work, t + half, ctx, &mut self.k2, &mut self.evals)?;
        self.predictor(state, 2, half, t + half);
        Self::eval(&self.work, t + half, ctx, &mut self.k3, &mut self.evals)?;
        self.predictor(state, 3, h, t + h);
        Self::eval(&self.work, t + h, ctx, &mut self.k4, &mut self.evals)?;
        let w = h / 6.0;
        for i in 0..state.n() {
            let x = state.x[i]
                + w * (self.k1.dx[i] + 2.0 * self.k2.dx[i] + 2.0 * self.k3.dx[i] + self.k4.dx[i]);
            let v = state.v[i]
                + w * (self.k1.dv[i] + 2.0 * self.k2.dv[i] + 2.0 * self.k3.dv[i] + self.k4.dv[i]);
            Self::commit(state, i, x, v, self.k1.dv[i]);
        }
        state.t = t + h;
        Ok(())
    }
}

//! Scenario construction and trajectory generation.
//!
//! Three families: a standing queue released towards a distant red light, a
//! platoon following an externally prescribed leader profile, and a single
//! vehicle disturbed by cut-in events. All runs record on a common sampling
//! grid so trajectories from different step sizes can be compared directly.

use crate::boundary::{LeaderBoundary, SpeedProfile};
use crate::error::{Result, SimError};
use crate::integrate::{SchemeKind, StepContext, Stepper};
use crate::model::ModelKind;
use crate::state::PlatoonState;

/// Common sampling period (s). Every admissible step size divides it, so all
/// runs share the recording grid regardless of h.
pub const RECORD_INTERVAL: f64 = 2.4;

/// Front-to-rear length of every vehicle (m).
pub const DEFAULT_VEHICLE_LENGTH: f64 = 5.0;

/// Relative slack when checking that one duration is an integer multiple of
/// another. Generous enough for decimal steps like 0.048 that are not exact
/// binary fractions.
const DIVISIBILITY_TOL: f64 = 1e-6;

/// A merge in front of the test vehicle: the gap shrinks by `gap_factor`
/// and the (virtual) leader continues at `leader_speed_after`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutInEvent {
    pub time: f64,
    pub gap_factor: f64,
    pub leader_speed_after: f64,
}

impl CutInEvent {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_factor > 0.0 && self.gap_factor <= 1.0) {
            return Err(SimError::InvalidScenario(format!(
                "cut-in gap_factor must lie in (0, 1], got {}",
                self.gap_factor
            )));
        }
        if !(self.leader_speed_after >= 0.0 && self.leader_speed_after.is_finite()) {
            return Err(SimError::InvalidScenario(format!(
                "cut-in leader speed must be finite and non-negative, got {}",
                self.leader_speed_after
            )));
        }
        if !(self.time.is_finite() && self.time > 0.0) {
            return Err(SimError::InvalidScenario(format!(
                "cut-in time must be positive, got {}",
                self.time
            )));
        }
        Ok(())
    }
}

/// A fully specified simulation: who drives, how the front is closed, where
/// everyone starts, and how long to run.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub label: String,
    pub model: ModelKind,
    pub boundary: LeaderBoundary,
    /// One length per vehicle, leader first.
    pub lengths: Vec<f64>,
    pub initial: PlatoonState,
    pub t_max: f64,
    pub events: Vec<CutInEvent>,
    pub record_interval: f64,
    /// Platoon index whose speed trajectory defines the study error metric.
    pub error_vehicle: usize,
}

impl ScenarioSpec {
    pub fn n(&self) -> usize {
        self.initial.n()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.lengths.len() != n {
            return Err(SimError::InvalidScenario(format!(
                "{} lengths for {} vehicles",
                self.lengths.len(),
                n
            )));
        }
        if self.lengths.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(SimError::InvalidScenario("vehicle lengths must be finite and >= 0".into()));
        }
        self.model.validate()?;
        self.boundary.validate()?;
        if !(self.record_interval > 0.0 && self.record_interval.is_finite()) {
            return Err(SimError::InvalidScenario("record interval must be positive".into()));
        }
        let ratio = self.t_max / self.record_interval;
        if !(self.t_max > 0.0) || (ratio - ratio.round()).abs() > DIVISIBILITY_TOL * ratio.max(1.0)
        {
            return Err(SimError::InvalidScenario(format!(
                "t_max = {} is not a positive multiple of the {} s recording interval",
                self.t_max, self.record_interval
            )));
        }
        if self.error_vehicle >= n {
            return Err(SimError::InvalidScenario(format!(
                "error vehicle index {} out of range for {} vehicles",
                self.error_vehicle, n
            )));
        }
        if self.initial.v.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(SimError::InvalidScenario("initial speeds must be finite and >= 0".into()));
        }
        for i in 1..n {
            let gap = self.initial.x[i - 1] - self.initial.x[i] - self.lengths[i - 1];
            if !(gap > 0.0) {
                return Err(SimError::InvalidScenario(format!(
                    "initial gap ahead of vehicle {i} is {gap}, must be positive"
                )));
            }
        }
        if let LeaderBoundary::VirtualStandingObstacle { position } = self.boundary {
            if position - self.initial.x[0] <= 0.0 {
                return Err(SimError::InvalidScenario(
                    "leader starts at or beyond the standing obstacle".into(),
                ));
            }
        }
        let mut last = 0.0;
        for ev in &self.events {
            ev.validate()?;
            if ev.time <= last {
                return Err(SimError::InvalidScenario(
                    "cut-in events must be sorted by strictly increasing time".into(),
                ));
            }
            if ev.time >= self.t_max {
                return Err(SimError::InvalidScenario(format!(
                    "cut-in event at t = {} lies outside (0, {})",
                    ev.time, self.t_max
                )));
            }
            last = ev.time;
        }
        if !self.events.is_empty() && n < 2 {
            return Err(SimError::InvalidScenario(
                "cut-in events need a leader and a test vehicle".into(),
            ));
        }
        Ok(())
    }
}

/// Rounds a horizon up to the next multiple of the recording interval.
fn snap_horizon(t_max: f64) -> f64 {
    let ratio = t_max / RECORD_INTERVAL;
    let k = if (ratio - ratio.round()).abs() <= DIVISIBILITY_TOL * ratio.max(1.0) {
        ratio.round()
    } else {
        ratio.ceil()
    };
    k.max(1.0) * RECORD_INTERVAL
}

/// Standing queue waiting at a green light, with the next red light
/// `light_distance` ahead of the queue head. Vehicles start at rest with the
/// model's standing equilibrium gap between bumpers.
pub fn build_start_stop(model: ModelKind, n: usize, light_distance: f64, t_max: f64) -> ScenarioSpec {
    assert!(n >= 1, "need at least one vehicle");
    assert!(light_distance > 0.0);
    let gap = model.standing_queue_gap();
    let spacing = DEFAULT_VEHICLE_LENGTH + gap;
    let x: Vec<f64> = (0..n).map(|i| -(i as f64) * spacing).collect();
    let v = vec![0.0; n];
    ScenarioSpec {
        label: "start-stop".into(),
        model,
        boundary: LeaderBoundary::VirtualStandingObstacle { position: light_distance },
        lengths: vec![DEFAULT_VEHICLE_LENGTH; n],
        initial: PlatoonState::new(0.0, x, v),
        t_max: snap_horizon(t_max),
        events: Vec::new(),
        record_interval: RECORD_INTERVAL,
        error_vehicle: (n - 1).min(9),
    }
}

/// A platoon trailing a leader that exactly follows `profile`. Followers
/// start at the steady-state gap for the profile's initial speed, so the run
/// begins in equilibrium.
pub fn build_external_leader(
    model: ModelKind,
    n_followers: usize,
    profile: SpeedProfile,
    t_max: f64,
) -> Result<ScenarioSpec> {
    if n_followers < 10 {
        return Err(SimError::InvalidScenario(format!(
            "external-leader study measures the 10th follower; got only {n_followers}"
        )));
    }
    let v_init = profile.initial_speed();
    let gap = model.equilibrium_gap(v_init)?;
    let n = n_followers + 1;
    let spacing = DEFAULT_VEHICLE_LENGTH + gap;
    let x: Vec<f64> = (0..n).map(|i| -(i as f64) * spacing).collect();
    let v = vec![v_init; n];
    Ok(ScenarioSpec {
        label: "external-leader".into(),
        model,
        boundary: LeaderBoundary::ExternalProfile(profile),
        lengths: vec![DEFAULT_VEHICLE_LENGTH; n],
        initial: PlatoonState::new(0.0, x, v),
        t_max: snap_horizon(t_max),
        events: Vec::new(),
        record_interval: RECORD_INTERVAL,
        error_vehicle: 10,
    })
}

/// A single test vehicle in equilibrium behind a zero-length virtual leader
/// moving at constant `profile_speed`. Each event halves (or otherwise
/// rescales) the gap and resets the leader's speed, imitating a merge.
pub fn build_cutin(
    model: ModelKind,
    profile_speed: f64,
    events: Vec<CutInEvent>,
    t_max: f64,
) -> Result<ScenarioSpec> {
    let gap = model.equilibrium_gap(profile_speed)?;
    let profile = SpeedProfile::constant(profile_speed)?;
    Ok(ScenarioSpec {
        label: "cut-in".into(),
        model,
        boundary: LeaderBoundary::ExternalProfile(profile),
        // Virtual leader has zero length so the gap is a pure distance.
        lengths: vec![0.0, DEFAULT_VEHICLE_LENGTH],
        initial: PlatoonState::new(0.0, vec![gap, 0.0], vec![profile_speed, profile_speed]),
        t_max: snap_horizon(t_max),
        events,
        record_interval: RECORD_INTERVAL,
        error_vehicle: 1,
    })
}

/// Default cut-in disturbance: three merges of increasing severity.
///
/// The event times deliberately avoid every step grid in
/// [`crate::DEFAULT_H16`]: each time sits at least h/8 away from the
/// nearest step boundary for all sixteen default step sizes. A grid-aligned
/// event loses its localization error for exactly those step sizes, which
/// punches holes in an otherwise O(h) error curve and corrupts order fits.
///
/// The merges are severe (gap cut to 0.37 of equilibrium with a
/// simultaneous leader slowdown) so that the O(h) event error dominates
/// every scheme's budget in the practical step range. Each scheme then
/// pays in proportion to the step size it needs at a given evaluation
/// budget, which is what makes the high-order schemes a poor deal here.
/// Milder merges leave Euler's smooth truncation error on top instead.
pub fn default_cutin_events() -> Vec<CutInEvent> {
    vec![
        CutInEvent { time: 20.225, gap_factor: 0.37, leader_speed_after: 10.0 },
        CutInEvent { time: 49.855, gap_factor: 0.37, leader_speed_after: 8.0 },
        CutInEvent { time: 79.865, gap_factor: 0.37, leader_speed_after: 6.0 },
    ]
}

/// Where and when a run lost its gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrashInfo {
    pub vehicle: usize,
    pub time: f64,
    pub gap: f64,
}

impl CrashInfo {
    pub fn to_error(self) -> SimError {
        SimError::Crash { vehicle: self.vehicle, time: self.time, gap: self.gap }
    }
}

/// Trajectory sampled on the recording grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub scheme: SchemeKind,
    pub h: f64,
    /// Sample instants t_k = k * record_interval.
    pub sample_times: Vec<f64>,
    /// Positions per sample, one inner vector per instant.
    pub x: Vec<Vec<f64>>,
    /// Speeds per sample.
    pub v: Vec<Vec<f64>>,
    /// True when a gap closed; the record then holds only the samples taken
    /// before the collision.
    pub crashed: bool,
    pub crash: Option<CrashInfo>,
}

impl TrajectoryRecord {
    pub fn n_samples(&self) -> usize {
        self.sample_times.len()
    }

    pub fn n_vehicles(&self) -> usize {
        self.v.first().map_or(0, Vec::len)
    }
}

fn apply_event(state: &mut PlatoonState, lengths: &[f64], ev: &CutInEvent) {
    let gap = state.x[0] - state.x[1] - lengths[0];
    state.x[0] = state.x[1] + lengths[0] + ev.gap_factor * gap;
    state.v[0] = ev.leader_speed_after;
}

/// Steps `spec` from t=0 to t_max with one scheme and step size, recording
/// every `record_interval`. Event times snap to the nearest step boundary so
/// the disturbance is identical in effect for every scheme at the same h.
pub fn run(spec: &ScenarioSpec, scheme: SchemeKind, h: f64) -> Result<TrajectoryRecord> {
    spec.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(SimError::InvalidScenario(format!("step size must be positive, got {h}")));
    }
    let ratio = spec.record_interval / h;
    if (ratio - ratio.round()).abs() > DIVISIBILITY_TOL * ratio.max(1.0) || ratio.round() < 1.0 {
        return Err(SimError::StepMismatch { record_interval: spec.record_interval, h });
    }
    let steps_per_record = ratio.round() as u64;
    let n_records = (spec.t_max / spec.record_interval).round() as u64 + 1;
    let total_steps = (n_records - 1) * steps_per_record;

    // Events land on whole steps; an event that would round to t=0 moves to
    // the first step so the initial sample always shows the pristine state.
    let event_steps: Vec<u64> = spec
        .events
        .iter()
        .map(|ev| ((ev.time / h).round() as u64).clamp(1, total_steps))
        .collect();

    let n = spec.n();
    let ctx = StepContext { model: &spec.model, boundary: &spec.boundary, lengths: &spec.lengths };
    let mut state = spec.initial.clone();
    let mut stepper = Stepper::new(n);
    let mut record = TrajectoryRecord {
        scheme,
        h,
        sample_times: Vec::with_capacity(n_records as usize),
        x: Vec::with_capacity(n_records as usize),
        v: Vec::with_capacity(n_records as usize),
        crashed: false,
        crash: None,
    };

    let mut next_event = 0;
    for j in 0..=total_steps {
        // Times come from the step index, not accumulation, so that sample
        // grids are bit-identical across step sizes.
        state.t = j as f64 * h;
        while next_event < event_steps.len() && event_steps[next_event] == j {
            apply_event(&mut state, &spec.lengths, &spec.events[next_event]);
            next_event += 1;
        }
        if j % steps_per_record == 0 {
            record.sample_times.push((j / steps_per_record) as f64 * spec.record_interval);
            record.x.push(state.x.clone());
            record.v.push(state.v.clone());
        }
        if j == total_steps {
            break;
        }
        match stepper.step(scheme, &mut state, h, &ctx) {
            Ok(()) => {}
            Err(SimError::Crash { vehicle, time, gap }) => {
                record.crashed = true;
                record.crash = Some(CrashInfo { vehicle, time, gap });
                break;
            }
            Err(e) => return Err(e),
        }
        if let Some((vehicle, gap)) = ctx.first_collision(&state) {
            record.crashed = true;
            record.crash = Some(CrashInfo { vehicle, time: state.t, gap });
            break;
        }
    }
    Ok(record)
}

/// Gap ahead and model acceleration for every recorded sample. The leader's
/// entries follow its boundary: infinity/free acceleration in free flow, the
/// prescribed acceleration under an external profile, and the obstacle gap
/// when approaching a light.
pub fn gaps_and_accels(
    spec: &ScenarioSpec,
    record: &TrajectoryRecord,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = record.n_vehicles();
    let mut gaps = Vec::with_capacity(record.n_samples());
    let mut accs = Vec::with_capacity(record.n_samples());
    for (k, t) in record.sample_times.iter().enumerate() {
        let (xs, vs) = (&record.x[k], &record.v[k]);
        let mut g = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        match &spec.boundary {
            LeaderBoundary::FreeFlow => {
                g.push(f64::INFINITY);
                a.push(spec.model.free_accel(vs[0]));
            }
            LeaderBoundary::ExternalProfile(profile) => {
                g.push(f64::INFINITY);
                a.push(profile.accel(*t));
            }
            LeaderBoundary::VirtualStandingObstacle { position } => {
                let gap = position - xs[0];
                g.push(gap);
                a.push(spec.model.accel(gap, vs[0], 0.0));
            }
        }
        for i in 1..n {
            let gap = xs[i - 1] - xs[i] - spec.lengths[i - 1];
            g.push(gap);
            a.push(spec.model.accel(gap, vs[i], vs[i - 1]));
        }
        gaps.push(g);
        accs.push(a);
    }
    (gaps, accs)
}

/// Largest jump between consecutive samples. For a continuous signal sampled
/// at dt this shrinks like dt; a genuine discontinuity keeps a fixed size.
pub fn largest_step_change(samples: &[f64]) -> f64 {
    samples.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
}

/// Largest second difference between consecutive samples. For a smooth
/// signal this shrinks like dt²; a kink (derivative jump) shrinks only like
/// dt and a discontinuity not at all.
pub fn largest_curvature_change(samples: &[f64]) -> f64 {
    samples.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).abs()).fold(0.0, f64::max)
}

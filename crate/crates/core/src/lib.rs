//! Car-following simulation kernel: time-continuous acceleration models,
//! explicit fixed-step integration with an analytic stop heuristic, scenario
//! construction, and work-precision convergence studies.

pub mod boundary;
pub mod convergence;
pub mod error;
pub mod integrate;
pub mod model;
pub mod scenario;
pub mod state;

pub use boundary::{default_leader_profile, LeaderBoundary, SpeedProfile};
pub use convergence::{
    complexity, compute_reference, convergence_study, error_norm_all, error_norm_speed,
    estimate_order, ConvergenceResult, OrderFit, ReferenceSolution, StudyOutput, StudyPoint,
    DEFAULT_H16, FIT_H_MAX, FLOOR_FACTOR, H_REF,
};
pub use error::{Result, SimError};
pub use integrate::{rhs, stop_override, SchemeKind, StepContext, Stepper};
pub use model::{
    acc_fvdm, acc_idm, acc_idm_modified_free, acc_idm_plus, acc_ovm, desired_gap,
    free_acceleration_idm, optimal_velocity, FvdmParams, IdmParams, ModelKind, OvmParams,
    FREE_GAP,
};
pub use scenario::{
    build_cutin, build_external_leader, build_start_stop, default_cutin_events, gaps_and_accels,
    largest_curvature_change, largest_step_change, run, CrashInfo, CutInEvent, ScenarioSpec,
    TrajectoryRecord, DEFAULT_VEHICLE_LENGTH, RECORD_INTERVAL,
};
pub use state::{Derivative, PlatoonState};

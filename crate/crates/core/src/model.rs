//! Car-following acceleration laws.
//!
//! Every model maps (gap, own speed, leader speed) to an acceleration.
//! Gaps are bumper-to-bumper in metres, speeds in m/s, accelerations in m/s².

use crate::error::{Result, SimError};

/// Sentinel gap for a vehicle with nothing ahead. Interaction terms of the
/// form (s*/s)² evaluate to exactly 0 here, and the optimal-velocity curve
/// saturates at its desired speed, so free-flow needs no special casing.
pub const FREE_GAP: f64 = f64::INFINITY;

/// Intelligent-driver-model parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmParams {
    /// Desired speed v0 (m/s).
    pub v0: f64,
    /// Time gap T (s).
    pub t: f64,
    /// Minimum bumper-to-bumper gap s0 (m).
    pub s0: f64,
    /// Maximum acceleration a (m/s²).
    pub a: f64,
    /// Comfortable deceleration b (m/s²).
    pub b: f64,
}

impl IdmParams {
    /// City parameter set producing distinct stops behind an obstacle.
    pub fn standard() -> Self {
        IdmParams { v0: 15.0, t: 1.0, s0: 2.0, a: 1.0, b: 1.5 }
    }

    /// Parameter set producing a creeping, smooth approach to standstill.
    pub fn creep_to_stop() -> Self {
        IdmParams { v0: 15.0, t: 1.0, s0: 1.0, a: 2.0, b: 1.5 }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("v0", self.v0),
            ("t", self.t),
            ("s0", self.s0),
            ("a", self.a),
            ("b", self.b),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SimError::InvalidScenario(format!(
                    "IDM parameter {name} must be strictly positive, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Optimal-velocity-model parameters with a tanh-shaped velocity curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OvmParams {
    /// Desired speed v0 (m/s).
    pub v0: f64,
    /// Speed adaptation time τ (s).
    pub tau: f64,
    /// Transition width Δs (m).
    pub delta_s: f64,
    /// Dimensionless form factor β; the curve's inflection sits at s = β·Δs.
    pub beta: f64,
}

impl Default for OvmParams {
    fn default() -> Self {
        OvmParams { v0: 15.0, tau: 1.0, delta_s: 8.0, beta: 1.5 }
    }
}

impl OvmParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("v0", self.v0),
            ("tau", self.tau),
            ("delta_s", self.delta_s),
            ("beta", self.beta),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SimError::InvalidScenario(format!(
                    "OVM parameter {name} must be strictly positive, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Full-velocity-difference model: OVM plus a speed-difference term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FvdmParams {
    pub ovm: OvmParams,
    /// Sensitivity λ (1/s) of the speed-difference term.
    pub lambda: f64,
}

impl Default for FvdmParams {
    fn default() -> Self {
        FvdmParams { ovm: OvmParams::default(), lambda: 0.6 }
    }
}

impl FvdmParams {
    pub fn validate(&self) -> Result<()> {
        self.ovm.validate()?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(SimError::InvalidScenario(format!(
                "FVDM parameter lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Dynamic desired gap s*(v, v_l) = max(s0 + vT + v(v−v_l)/(2√(ab)), 0).
pub fn desired_gap(v: f64, v_l: f64, p: &IdmParams) -> f64 {
    let dynamic = p.s0 + v * p.t + v * (v - v_l) / (2.0 * (p.a * p.b).sqrt());
    dynamic.max(0.0)
}

/// Free-road acceleration a·[1 − (v/v0)⁴].
pub fn free_acceleration_idm(v: f64, p: &IdmParams) -> f64 {
    p.a * (1.0 - (v / p.v0).powi(4))
}

/// Original IDM: free acceleration minus the interaction term a·(s*/s)².
pub fn acc_idm(s: f64, v: f64, v_l: f64, p: &IdmParams) -> f64 {
    let z = desired_gap(v, v_l, p) / s;
    free_acceleration_idm(v, p) - p.a * z * z
}

/// IDM variant taking the more restrictive of the free and interaction terms:
/// min{ a·[1 − (v/v0)⁴], a·[1 − (s*/s)²] }.
pub fn acc_idm_plus(s: f64, v: f64, v_l: f64, p: &IdmParams) -> f64 {
    let z = desired_gap(v, v_l, p) / s;
    free_acceleration_idm(v, p).min(p.a * (1.0 - z * z))
}

/// IDM with a discontinuous free-acceleration rule: full a below v0, linear
/// fall-off a·(1 − v/v0) at and above v0.
pub fn acc_idm_modified_free(s: f64, v: f64, v_l: f64, p: &IdmParams) -> f64 {
    let free = if v < p.v0 { p.a } else { p.a * (1.0 - v / p.v0) };
    let z = desired_gap(v, v_l, p) / s;
    free - p.a * z * z
}

/// Gap-dependent optimal velocity
/// v_opt(s) = v0·[tanh(s/Δs − β) + tanh β] / (1 + tanh β), clamped at 0.
pub fn optimal_velocity(s: f64, p: &OvmParams) -> f64 {
    let tb = p.beta.tanh();
    let v = p.v0 * ((s / p.delta_s - p.beta).tanh() + tb) / (1.0 + tb);
    v.max(0.0)
}

/// Optimal-velocity model: relax towards v_opt(s) with time constant τ.
pub fn acc_ovm(s: f64, v: f64, p: &OvmParams) -> f64 {
    (optimal_velocity(s, p) - v) / p.tau
}

/// Full-velocity-difference model: OVM term plus λ·(v_l − v).
pub fn acc_fvdm(s: f64, v: f64, v_l: f64, p: &FvdmParams) -> f64 {
    acc_ovm(s, v, &p.ovm) + p.lambda * (v_l - v)
}

/// A car-following model together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    Idm(IdmParams),
    IdmPlus(IdmParams),
    IdmModifiedFree(IdmParams),
    Ovm(OvmParams),
    Fvdm(FvdmParams),
}

impl ModelKind {
    /// Acceleration for gap `s`, own speed `v`, leader speed `v_l`.
    pub fn accel(&self, s: f64, v: f64, v_l: f64) -> f64 {
        match self {
            ModelKind::Idm(p) => acc_idm(s, v, v_l, p),
            ModelKind::IdmPlus(p) => acc_idm_plus(s, v, v_l, p),
            ModelKind::IdmModifiedFree(p) => acc_idm_modified_free(s, v, v_l, p),
            ModelKind::Ovm(p) => acc_ovm(s, v, p),
            ModelKind::Fvdm(p) => acc_fvdm(s, v, v_l, p),
        }
    }

    /// Acceleration with nothing ahead.
    pub fn free_accel(&self, v: f64) -> f64 {
        self.accel(FREE_GAP, v, v)
    }

    /// Gap at which a vehicle travelling at `v` behind a leader at the same
    /// speed holds that speed (zero acceleration). Defined for 0 ≤ v < v0;
    /// the gap diverges at the desired speed.
    pub fn equilibrium_gap(&self, v: f64) -> Result<f64> {
        let fail = |msg: String| Err(SimError::InvalidScenario(msg));
        if !(v >= 0.0) {
            return fail(format!("equilibrium gap needs v >= 0, got {v}"));
        }
        match self {
            ModelKind::Idm(p) => {
                if v >= p.v0 {
                    return fail(format!(
                        "equilibrium gap diverges at the desired speed ({} >= {})",
                        v, p.v0
                    ));
                }
                Ok(desired_gap(v, v, p) / (1.0 - (v / p.v0).powi(4)).sqrt())
            }
            ModelKind::IdmPlus(p) | ModelKind::IdmModifiedFree(p) => {
                if v >= p.v0 {
                    return fail(format!(
                        "equilibrium gap diverges at the desired speed ({} >= {})",
                        v, p.v0
                    ));
                }
                Ok(desired_gap(v, v, p))
            }
            ModelKind::Ovm(p) | ModelKind::Fvdm(FvdmParams { ovm: p, .. }) => {
                // Invert v_opt: s = Δs·(artanh(w) + β) with w from the curve.
                let tb = p.beta.tanh();
                let w = v * (1.0 + tb) / p.v0 - tb;
                if w >= 1.0 {
                    return fail(format!(
                        "equilibrium gap diverges at the desired speed ({} >= {})",
                        v, p.v0
                    ));
                }
                Ok(p.delta_s * (w.atanh() + p.beta))
            }
        }
    }

    /// Bumper-to-bumper spacing used when lining up a standing queue.
    /// For the IDM family this is the exact standing equilibrium s0. The
    /// tanh optimal-velocity curve only reaches zero at zero gap, which is a
    /// crash state, so OVM and FVDM queues use a conventional 2 m instead.
    pub fn standing_queue_gap(&self) -> f64 {
        match self {
            ModelKind::Idm(p) | ModelKind::IdmPlus(p) | ModelKind::IdmModifiedFree(p) => p.s0,
            ModelKind::Ovm(_) | ModelKind::Fvdm(_) => 2.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Idm(_) => "idm",
            ModelKind::IdmPlus(_) => "idm_plus",
            ModelKind::IdmModifiedFree(_) => "idm_modified_free",
            ModelKind::Ovm(_) => "ovm",
            ModelKind::Fvdm(_) => "fvdm",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelKind::Idm(p) | ModelKind::IdmPlus(p) | ModelKind::IdmModifiedFree(p) => {
                p.validate()
            }
            ModelKind::Ovm(p) => p.validate(),
            ModelKind::Fvdm(p) => p.validate(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn std_set() -> IdmParams {
        IdmParams::standard()
    }

    #[test]
    fn desired_gap_standing() {
        assert_eq!(desired_gap(0.0, 0.0, &std_set()), 2.0);
    }

    #[test]
    fn desired_gap_steady_following() {
        // v = v_l kills the dynamic braking term: s0 + v·T.
        assert_eq!(desired_gap(15.0, 15.0, &std_set()), 17.0);
    }

    #[test]
    fn desired_gap_clamped_when_closing_term_dominates() {
        // Raw value is 12 + 10·(−5)/(2√1.5) ≈ −8.41, clamped to zero.
        assert_eq!(desired_gap(10.0, 15.0, &std_set()), 0.0);
    }

    #[test]
    fn free_acceleration_anchors() {
        let p = std_set();
        assert_eq!(free_acceleration_idm(0.0, &p), 1.0);
        assert_eq!(free_acceleration_idm(15.0, &p), 0.0);
        assert_eq!(free_acceleration_idm(7.5, &p), 0.9375);
    }

    #[test]
    fn idm_standing_equilibrium_is_exact_zero() {
        assert_eq!(acc_idm(2.0, 0.0, 0.0, &IdmParams::standard()), 0.0);
        let creep = IdmParams::creep_to_stop();
        assert_eq!(acc_idm(creep.s0, 0.0, 0.0, &creep), 0.0);
    }

    #[test]
    fn idm_free_gap_reduces_to_free_acceleration() {
        let p = std_set();
        assert_eq!(acc_idm(FREE_GAP, 10.0, 10.0, &p), free_acceleration_idm(10.0, &p));
    }

    #[test]
    fn idm_equilibrium_speed_spacing_decelerates_at_v0() {
        // a_free(15) = 0 and s* = 17 equals the gap, so the whole term is −a.
        assert_relative_eq!(acc_idm(17.0, 15.0, 15.0, &std_set()), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn idm_plus_standing_equilibrium() {
        assert_eq!(acc_idm_plus(2.0, 0.0, 0.0, &std_set()), 0.0);
    }

    #[test]
    fn idm_plus_interaction_branch() {
        // s* = 12 at 10 m/s steady following; 1 − 1.44 < a_free(10) ≈ 0.8025.
        assert_relative_eq!(acc_idm_plus(10.0, 10.0, 10.0, &std_set()), -0.44, epsilon = 1e-12);
    }

    #[test]
    fn idm_plus_free_branch() {
        assert_eq!(acc_idm_plus(FREE_GAP, 7.5, 7.5, &std_set()), 0.9375);
    }

    #[test]
    fn modified_free_acceleration_branches() {
        let p = std_set();
        assert_eq!(acc_idm_modified_free(FREE_GAP, 14.999, 14.999, &p), 1.0);
        assert_eq!(acc_idm_modified_free(FREE_GAP, 15.0, 15.0, &p), 0.0);
        assert_relative_eq!(
            acc_idm_modified_free(FREE_GAP, 16.5, 16.5, &p),
            -0.1,
            epsilon = 1e-12
        );
    }

    #[test]
    fn modified_free_jump_at_v0_is_full_a() {
        let p = std_set();
        let below = acc_idm_modified_free(FREE_GAP, p.v0 - 1e-9, p.v0 - 1e-9, &p);
        let at = acc_idm_modified_free(FREE_GAP, p.v0, p.v0, &p);
        assert_eq!(below, p.a);
        assert_eq!(at, 0.0);
    }

    #[test]
    fn optimal_velocity_limits() {
        let p = OvmParams::default();
        assert_eq!(optimal_velocity(FREE_GAP, &p), 15.0);
        assert_abs_diff_eq!(optimal_velocity(0.0, &p), 0.0, epsilon = 1e-15);
        // At the inflection point s = β·Δs the curve is v0·tanh β/(1 + tanh β).
        assert_relative_eq!(
            optimal_velocity(12.0, &p),
            7.1265969872410204,
            epsilon = 1e-12
        );
    }

    #[test]
    fn ovm_acceleration_anchors() {
        let p = OvmParams::default();
        let s = 20.0;
        assert_eq!(acc_ovm(s, optimal_velocity(s, &p), &p), 0.0);
        assert_eq!(acc_ovm(FREE_GAP, 0.0, &p), 15.0);
        assert_relative_eq!(acc_ovm(12.0, 10.0, &p), -2.8734030127589796, epsilon = 1e-12);
    }

    #[test]
    fn fvdm_reduces_to_ovm_without_difference_term() {
        let p = FvdmParams { ovm: OvmParams::default(), lambda: 0.0 };
        for s in [3.0, 12.0, 80.0] {
            assert_eq!(acc_fvdm(s, 9.0, 4.0, &p), acc_ovm(s, 9.0, &p.ovm));
        }
    }

    #[test]
    fn fvdm_equilibrium_and_example() {
        let p = FvdmParams { ovm: OvmParams::default(), lambda: 0.5 };
        let s = 25.0;
        let v = optimal_velocity(s, &p.ovm);
        assert_eq!(acc_fvdm(s, v, v, &p), 0.0);
        assert_relative_eq!(
            acc_fvdm(12.0, 10.0, 12.0, &p),
            -1.8734030127589796,
            epsilon = 1e-12
        );
    }

    #[test]
    fn interaction_vanishes_at_free_gap_for_all_speeds() {
        let p = std_set();
        for k in 0..=200 {
            let v = 2.0 * p.v0 * (k as f64) / 200.0;
            let err = (acc_idm(FREE_GAP, v, v, &p) - free_acceleration_idm(v, &p)).abs();
            assert!(err < 1e-9, "v = {v}: err = {err}");
        }
    }

    #[test]
    fn optimal_velocity_monotone_on_grid() {
        let p = OvmParams::default();
        let mut prev = optimal_velocity(0.0, &p);
        for k in 1..1000 {
            let s = 200.0 * (k as f64) / 999.0;
            let cur = optimal_velocity(s, &p);
            assert!(cur >= prev, "non-monotone at s = {s}");
            prev = cur;
        }
    }

    #[test]
    fn idm_equilibrium_gap_matches_closed_form() {
        let m = ModelKind::Idm(std_set());
        assert_relative_eq!(
            m.equilibrium_gap(14.0).unwrap(),
            32.580853262993983,
            epsilon = 1e-12
        );
        // The returned gap must actually be a root of the acceleration.
        let s = m.equilibrium_gap(14.0).unwrap();
        assert_abs_diff_eq!(m.accel(s, 14.0, 14.0), 0.0, epsilon = 1e-14);
        assert!(m.equilibrium_gap(15.0).is_err());
    }

    #[test]
    fn ovm_equilibrium_gap_inverts_the_curve() {
        let m = ModelKind::Ovm(OvmParams::default());
        let s = m.equilibrium_gap(7.5).unwrap();
        assert_relative_eq!(s, 12.379691825683844, epsilon = 1e-12);
        assert_abs_diff_eq!(m.accel(s, 7.5, 7.5), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn plus_and_modified_equilibria_are_desired_gaps() {
        let p = std_set();
        for m in [ModelKind::IdmPlus(p), ModelKind::IdmModifiedFree(p)] {
            let s = m.equilibrium_gap(10.0).unwrap();
            assert_eq!(s, desired_gap(10.0, 10.0, &p));
            assert_abs_diff_eq!(m.accel(s, 10.0, 10.0), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn parameter_validation_rejects_non_positive_values() {
        let mut p = std_set();
        p.a = 0.0;
        assert!(p.validate().is_err());
        let mut o = OvmParams::default();
        o.tau = -1.0;
        assert!(o.validate().is_err());
    }

    proptest! {
        #[test]
        fn desired_gap_never_negative(
            v in -50.0f64..50.0,
            v_l in -50.0f64..50.0,
        ) {
            prop_assert!(desired_gap(v, v_l, &std_set()) >= 0.0);
        }

        #[test]
        fn idm_plus_below_both_branches(
            s in 0.1f64..5000.0,
            v in 0.0f64..40.0,
            v_l in 0.0f64..40.0,
        ) {
            let p = std_set();
            let plus = acc_idm_plus(s, v, v_l, &p);
            let z = desired_gap(v, v_l, &p) / s;
            prop_assert!(plus <= free_acceleration_idm(v, &p));
            prop_assert!(plus <= p.a * (1.0 - z * z) + 1e-15);
        }

        #[test]
        fn optimal_velocity_monotone_pairs(
            s1 in 0.0f64..500.0,
            s2 in 0.0f64..500.0,
        ) {
            let p = OvmParams::default();
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            prop_assert!(optimal_velocity(lo, &p) <= optimal_velocity(hi, &p));
        }

        #[test]
        fn accelerations_are_pure(
            s in 0.5f64..2000.0,
            v in 0.0f64..30.0,
            v_l in 0.0f64..30.0,
        ) {
            let models = [
                ModelKind::Idm(std_set()),
                ModelKind::IdmPlus(std_set()),
                ModelKind::IdmModifiedFree(std_set()),
                ModelKind::Ovm(OvmParams::default()),
                ModelKind::Fvdm(FvdmParams::default()),
            ];
            for m in models {
                prop_assert_eq!(m.accel(s, v, v_l).to_bits(), m.accel(s, v, v_l).to_bits());
            }
        }
    }
}

//! Platoon state vector and its time derivative.

/// Positions and speeds of an n-vehicle platoon at one instant, leader first.
/// `x` holds front-bumper positions.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatoonState {
    /// Simulation time (s).
    pub t: f64,
    /// Front-bumper positions (m), strictly decreasing along the platoon.
    pub x: Vec<f64>,
    /// Speeds (m/s), non-negative after every completed step.
    pub v: Vec<f64>,
}

impl PlatoonState {
    pub fn new(t: f64, x: Vec<f64>, v: Vec<f64>) -> Self {
        assert_eq!(x.len(), v.len(), "position and speed arrays must match");
        assert!(!x.is_empty(), "a platoon has at least one vehicle");
        PlatoonState { t, x, v }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
}

/// Right-hand side of the platoon ODE: dx holds speeds, dv accelerations.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub dx: Vec<f64>,
    pub dv: Vec<f64>,
}

impl Derivative {
    pub fn zeros(n: usize) -> Self {
        Derivative { dx: vec![0.0; n], dv: vec![0.0; n] }
    }

    pub fn n(&self) -> usize {
        self.dx.len()
    }
}

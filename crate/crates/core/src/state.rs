use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Slack allowed on |P| <= 1 for integrated states.
pub const NORM_SLACK: f64 = 1e-6;

/// Dimensionless spin polarization vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PolarizationState {
    pub px: f64,
    pub py: f64,
    pub pz: f64,
}

impl PolarizationState {
    pub const fn new(px: f64, py: f64, pz: f64) -> Self {
        Self { px, py, pz }
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.px * self.px + self.py * self.py + self.pz * self.pz
    }

    /// |P_+| = sqrt(P_x^2 + P_y^2).
    pub fn transverse(&self) -> f64 {
        self.px.hypot(self.py)
    }

    pub fn is_physical(&self) -> bool {
        self.norm_sq() <= (1.0 + NORM_SLACK).powi(2)
    }

    pub fn is_finite(&self) -> bool {
        self.px.is_finite() && self.py.is_finite() && self.pz.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.px, self.py, self.pz]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl Add for PolarizationState {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.px + o.px, self.py + o.py, self.pz + o.pz)
    }
}

impl Sub for PolarizationState {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.px - o.px, self.py - o.py, self.pz - o.pz)
    }
}

impl Mul<f64> for PolarizationState {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.px * s, self.py * s, self.pz * s)
    }
}

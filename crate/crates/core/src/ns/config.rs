use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::BoundaryTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    /// Backward-facing step.
    Step,
    /// Lid-driven cavity.
    Cavity,
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Geometry::Step => "bfs",
            Geometry::Cavity => "cavity",
        })
    }
}

impl FromStr for Geometry {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bfs" | "step" => Ok(Geometry::Step),
            "cavity" => Ok(Geometry::Cavity),
            _ => Err(Error::Invalid(format!("unknown benchmark '{s}'"))),
        }
    }
}

/// Time-stepping and physical parameters of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransientConfig {
    pub geometry: Geometry,
    pub dt: f64,
    pub t_final: f64,
    pub nu: f64,
    pub ubar: f64,
    /// Use the skew-symmetric trilinear form.
    pub skew: bool,
    /// Ramp the inlet smoothly from zero over the first 0.4 s.
    pub smooth_inlet: bool,
    pub newton_tol: f64,
    pub newton_max: usize,
}

impl TransientConfig {
    pub fn step() -> Self {
        Self {
            geometry: Geometry::Step,
            dt: 0.01,
            t_final: 1.0,
            nu: 0.4,
            ubar: 4.5,
            skew: false,
            smooth_inlet: false,
            newton_tol: 1e-10,
            newton_max: 25,
        }
    }

    pub fn cavity() -> Self {
        Self {
            geometry: Geometry::Cavity,
            dt: 0.01,
            t_final: 0.4,
            nu: 1.0,
            ubar: 3.0,
            skew: false,
            smooth_inlet: false,
            newton_tol: 1e-10,
            newton_max: 25,
        }
    }

    pub fn for_geometry(g: Geometry) -> Self {
        match g {
            Geometry::Step => Self::step(),
            Geometry::Cavity => Self::cavity(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= self.t_final) {
            return Err(Error::Invalid(format!(
                "need 0 < dt <= T (dt = {}, T = {})",
                self.dt, self.t_final
            )));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Invalid(format!("viscosity must be positive, got {}", self.nu)));
        }
        let m = self.t_final / self.dt;
        if (m - m.round()).abs() > 1e-8 * m.max(1.0) {
            return Err(Error::Invalid(format!("T/dt = {m} is not an integer")));
        }
        if !(self.newton_tol > 0.0) || self.newton_max == 0 {
            return Err(Error::Invalid("Newton tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }

    /// Number of time steps `M = T/dt`.
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// Scalar multiplying the unit Dirichlet data at time `t`.
    pub fn amplitude(&self, t: f64) -> f64 {
        self.ubar * ramp(t, self.smooth_inlet)
    }
}

/// Time factor of the inlet: 1, or `½(1 − cos(2πt/0.4))` up to `t = 0.4`.
pub fn ramp(t: f64, smooth: bool) -> f64 {
    if smooth && t <= 0.4 {
        0.5 * (1.0 - (2.0 * std::f64::consts::PI * t / 0.4).cos())
    } else {
        1.0
    }
}

/// Parabolic step inlet `Ū·(4/9)(y−2)(5−y)`, zero outside `[2, 5]`.
pub fn inlet_profile(y: f64, t: f64, ubar: f64, smooth: bool) -> [f64; 2] {
    if !(2.0..=5.0).contains(&y) {
        return [0.0, 0.0];
    }
    [ubar * ramp(t, smooth) * (4.0 / 9.0) * (y - 2.0) * (5.0 - y), 0.0]
}

/// Dirichlet data for unit amplitude.
pub fn unit_dirichlet(geometry: Geometry) -> impl Fn(BoundaryTag, f64, f64) -> Option<[f64; 2]> + Copy {
    move |tag, _x, y| match (geometry, tag) {
        (_, BoundaryTag::DirichletWall) => Some([0.0, 0.0]),
        (Geometry::Step, BoundaryTag::DirichletInlet) => Some(inlet_profile(y, 1.0, 1.0, false)),
        (Geometry::Cavity, BoundaryTag::DirichletLid) => Some([1.0, 0.0]),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inlet_values() {
        assert!((inlet_profile(3.5, 0.0, 4.5, false)[0] - 4.5).abs() < 1e-14);
        assert_eq!(inlet_profile(2.0, 0.0, 4.5, false)[0], 0.0);
        assert_eq!(inlet_profile(5.0, 0.0, 4.5, false)[0], 0.0);
        assert_eq!(inlet_profile(1.0, 0.0, 4.5, false)[0], 0.0);
        assert!((inlet_profile(3.5, 0.2, 1.0, true)[0] - 1.0).abs() < 1e-15);
        assert_eq!(inlet_profile(3.5, 0.0, 1.0, true)[0], 0.0);
        assert_eq!(inlet_profile(3.5, 0.9, 1.0, true)[0], 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(TransientConfig::cavity().validate().is_ok());
        assert_eq!(TransientConfig::cavity().n_steps(), 40);
        assert_eq!(TransientConfig::step().n_steps(), 100);
        let mut c = TransientConfig::cavity();
        c.dt = 0.03;
        assert!(c.validate().is_err());
        c.dt = 0.0;
        assert!(c.validate().is_err());
        c.dt = 0.01;
        c.nu = -1.0;
        assert!(c.validate().is_err());
    }
}

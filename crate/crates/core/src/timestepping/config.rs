use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Energy-conserving implicit midpoint-type step solved by Newton.
    Poisson,
    /// Fixed number of linearized corrections towards the Poisson step.
    Picard,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianKind {
    Analytic,
    FiniteDifference,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonConfig {
    /// Absolute residual tolerance (max norm).
    pub abs_tol: f64,
    /// Tolerance relative to the residual of the initial guess.
    pub rel_tol: f64,
    pub max_iters: usize,
    pub jacobian: JacobianKind,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_iters: 20,
            jacobian: JacobianKind::Analytic,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupgConfig {
    pub enabled: bool,
    /// Stabilization time scale; defaults to the time step.
    pub tau: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub dt: f64,
    pub integrator: Integrator,
    pub newton: NewtonConfig,
    pub picard_iters: usize,
    pub supg: SupgConfig,
    /// Reference depth of the Picard operator; the initial mean depth when
    /// unset.
    pub h_ref: Option<f64>,
}

impl StepConfig {
    pub fn new(dt: f64, integrator: Integrator) -> Self {
        StepConfig {
            dt,
            integrator,
            newton: NewtonConfig::default(),
            picard_iters: 4,
            supg: SupgConfig::default(),
            h_ref: None,
        }
    }

    pub fn with_supg(mut self, tau: Option<f64>) -> Self {
        self.supg = SupgConfig { enabled: true, tau };
        self
    }

    /// The SUPG time scale in effect (zero when SUPG is off).
    pub fn tau(&self) -> f64 {
        if self.supg.enabled {
            self.supg.tau.unwrap_or(self.dt)
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.newton.abs_tol > 0.0) || !(self.newton.rel_tol > 0.0) {
            return Err(Error::Config("Newton tolerances must be positive".into()));
        }
        if self.newton.max_iters == 0 {
            return Err(Error::Config("newton.max_iters must be at least 1".into()));
        }
        if let Some(tau) = self.supg.tau {
            if !(tau >= 0.0) {
                return Err(Error::Config(format!("supg.tau must be non-negative, got {tau}")));
            }
        }
        if let Some(h) = self.h_ref {
            if !(h > 0.0) {
                return Err(Error::Config(format!("h_ref must be positive, got {h}")));
            }
        }
        if self.integrator == Integrator::Picard && self.picard_iters == 0 {
            return Err(Error::Config("picard_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_defaults_to_dt() {
        let c = StepConfig::new(0.05, Integrator::Poisson);
        assert_eq!(c.tau(), 0.0);
        assert_eq!(c.with_supg(None).tau(), 0.05);
        assert_eq!(c.with_supg(Some(0.2)).tau(), 0.2);
    }

    #[test]
    fn validation() {
        let mut c = StepConfig::new(0.1, Integrator::Picard);
        assert!(c.validate().is_ok());
        c.dt = 0.0;
        assert!(c.validate().is_err());
        c.dt = 0.1;
        c.supg.tau = Some(-1.0);
        assert!(c.validate().is_err());
    }
}

use cht_data::Rect;
use serde::{Deserialize, Serialize};

/// Fixed physical channel parameters. Defaults model a water-cooled pin-fin
/// plate: a 0.25 m by ~0.476 m channel of 5 mm height fed at 3 L/min and
/// 20 C, giving a laminar channel Reynolds number of a few hundred.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainSpec {
    /// Streamwise extent (m); flow enters at x = 0 and leaves at x = l_x.
    pub l_x: f64,
    /// Transverse extent (m).
    pub l_y: f64,
    /// Channel height / out-of-plane depth (m).
    pub height: f64,
    /// Inlet volumetric flow (L/min).
    pub inlet_flow_lpm: f64,
    /// Inlet temperature (K).
    pub t_inlet: f64,
    /// Fluid density (kg/m^3).
    pub rho: f64,
    /// Fluid dynamic viscosity (Pa s).
    pub mu: f64,
    /// Fluid specific heat (J/kg K).
    pub cp: f64,
    /// Fluid thermal conductivity (W/m K).
    pub k_fluid: f64,
    /// Solid thermal conductivity (W/m K).
    pub k_solid: f64,
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec {
            l_x: 0.25,
            l_y: 0.25 * 761.0 / 400.0,
            height: 0.005,
            inlet_flow_lpm: 3.0,
            t_inlet: 293.15,
            rho: 998.2,
            mu: 1.002e-3,
            cp: 4182.0,
            k_fluid: 0.598,
            k_solid: 167.0,
        }
    }
}

impl DomainSpec {
    pub fn validate(&self) -> crate::Result<()> {
        for (name, v) in [
            ("l_x", self.l_x),
            ("l_y", self.l_y),
            ("height", self.height),
            ("t_inlet", self.t_inlet),
            ("rho", self.rho),
            ("mu", self.mu),
            ("cp", self.cp),
            ("k_fluid", self.k_fluid),
            ("k_solid", self.k_solid),
        ] {
            if !(v > 0.0) {
                return Err(crate::SolverError::InvalidArg(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        if self.inlet_flow_lpm < 0.0 {
            return Err(crate::SolverError::InvalidArg(
                "inlet_flow_lpm must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn channel(&self) -> Rect {
        Rect::new(0.0, 0.0, self.l_x, self.l_y)
    }

    /// Volumetric flow in m^3/s.
    pub fn volumetric_flow(&self) -> f64 {
        self.inlet_flow_lpm * 1e-3 / 60.0
    }

    pub fn mass_flow(&self) -> f64 {
        self.rho * self.volumetric_flow()
    }

    /// Mean velocity through the l_y x height cross-section.
    pub fn mean_velocity(&self) -> f64 {
        self.volumetric_flow() / (self.l_y * self.height)
    }

    /// Channel Reynolds number on the thin-channel hydraulic diameter 2H.
    pub fn reynolds(&self) -> f64 {
        self.rho * self.mean_velocity() * 2.0 * self.height / self.mu
    }

    /// Fully developed plane-channel inlet profile: u(y) = 6 U y/L (1 - y/L),
    /// integrating to the mean velocity.
    pub fn inlet_profile(&self, y: f64) -> f64 {
        let eta = (y / self.l_y).clamp(0.0, 1.0);
        6.0 * self.mean_velocity() * eta * (1.0 - eta)
    }
}

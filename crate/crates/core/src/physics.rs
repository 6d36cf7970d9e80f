//! Flow laws for cracks, large openings and fans, plus the air-density helper.
//!
//! Every law is regularized below `dp_lin`: the flux becomes linear in the
//! pressure difference so that derivatives stay finite at zero flow.

use thiserror::Error;

/// Gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;

/// `rho = DENSITY_COEFF / T` (ideal gas at 101325 Pa), kg·K/m³.
pub const DENSITY_COEFF: f64 = 353.05;

/// Default pressure difference below which flow laws are linearized, Pa.
pub const DEFAULT_DP_LIN: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
#[error("temperature must be positive, got {0} K")]
pub struct NonPositiveTemperature(pub f64);

/// Air density at `temperature` kelvin.
pub fn air_density(temperature: f64) -> Result<f64, NonPositiveTemperature> {
    if temperature > 0.0 {
        Ok(DENSITY_COEFF / temperature)
    } else {
        Err(NonPositiveTemperature(temperature))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirState {
    pub temperature: f64,
    pub density: f64,
}

impl AirState {
    pub fn at(temperature: f64) -> Result<Self, NonPositiveTemperature> {
        Ok(Self {
            temperature,
            density: air_density(temperature)?,
        })
    }
}

/// Power-law crack `m = K·|ΔP|^n·sign(ΔP)`, linear for `|ΔP| < dp_lin`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub k: f64,
    pub n: f64,
}

impl PowerLaw {
    pub fn new(k: f64, n: f64) -> Self {
        Self { k, n }
    }

    /// Signed mass flow, kg/s.
    pub fn flow(&self, dp: f64, dp_lin: f64) -> f64 {
        let mag = dp.abs();
        if mag >= dp_lin {
            dp.signum() * self.k * mag.powf(self.n)
        } else {
            self.k * dp_lin.powf(self.n - 1.0) * dp
        }
    }

    /// d(flow)/d(dp). Jumps by a factor `n` across `|dp| = dp_lin`.
    pub fn derivative(&self, dp: f64, dp_lin: f64) -> f64 {
        let mag = dp.abs();
        if mag >= dp_lin {
            self.n * self.k * mag.powf(self.n - 1.0)
        } else {
            self.k * dp_lin.powf(self.n - 1.0)
        }
    }

    /// Secant conductance `G` with `G·dp == flow(dp)`.
    pub fn conductance(&self, dp: f64, dp_lin: f64) -> f64 {
        self.k * dp.abs().max(dp_lin).powf(self.n - 1.0)
    }
}

/// Directional components of the flow through a large opening.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoWayFlow {
    /// from → to, kg/s, ≥ 0.
    pub forward: f64,
    /// to → from, kg/s, ≥ 0.
    pub reverse: f64,
    /// Height of the neutral plane above the bottom edge, when inside the opening.
    pub neutral_height: Option<f64>,
}

impl TwoWayFlow {
    pub fn net(&self) -> f64 {
        self.forward - self.reverse
    }

    pub fn is_bidirectional(&self) -> bool {
        self.forward > 0.0 && self.reverse > 0.0
    }
}

/// Vertical rectangular opening with a linear pressure-difference profile.
///
/// The local pressure difference is `ΔP(z) = dp_bottom − g·(ρ_from − ρ_to)·z`
/// for `z ∈ [0, H]` above the bottom edge. Each slice obeys the orifice law
/// `dm = cd·W·√(2·ρ_up·|ΔP|)·dz` with the upwind density, integrated in
/// closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Opening {
    pub width: f64,
    pub height: f64,
    pub cd: f64,
}

/// Integrals of the regularized root `s(x)` and of `s'(x)` over each side.
#[derive(Debug, Default, Clone, Copy)]
struct OpeningIntegrals {
    flux_forward: f64,
    flux_reverse: f64,
    slope_forward: f64,
    slope_reverse: f64,
}

impl Opening {
    pub fn new(width: f64, height: f64, cd: f64) -> Self {
        Self { width, height, cd }
    }

    fn integrals(
        &self,
        rho_from: f64,
        rho_to: f64,
        dp_bottom: f64,
        dp_lin: f64,
    ) -> OpeningIntegrals {
        let h = self.height;
        let b = GRAVITY * (rho_from - rho_to);
        let dp_at = |z: f64| dp_bottom - b * z;

        let mut cuts = vec![0.0, h];
        if b != 0.0 {
            for level in [-dp_lin, 0.0, dp_lin] {
                let z = (dp_bottom - level) / b;
                if z > 0.0 && z < h {
                    cuts.push(z);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);

        let root_lin = dp_lin.sqrt();
        let mut acc = OpeningIntegrals::default();
        for w in cuts.windows(2) {
            let (z1, z2) = (w[0], w[1]);
            let len = z2 - z1;
            if len <= 0.0 {
                continue;
            }
            let mid = dp_at(0.5 * (z1 + z2));
            let (p1, p2) = (dp_at(z1).abs(), dp_at(z2).abs());
            let (flux, slope) = if mid.abs() >= dp_lin {
                let (r1, r2) = (p1.sqrt(), p2.sqrt());
                // ∫√|x| dz and ∫ 1/(2√|x|) dz for |x| linear in z, written so
                // that the uniform-pressure limit (b → 0) stays exact.
                (
                    2.0 / 3.0 * len * (p1 + r1 * r2 + p2) / (r1 + r2),
                    len / (r1 + r2),
                )
            } else {
                (0.5 * len * (p1 + p2) / root_lin, len / root_lin)
            };
            if mid >= 0.0 {
                acc.flux_forward += flux;
                acc.slope_forward += slope;
            } else {
                acc.flux_reverse += flux;
                acc.slope_reverse += slope;
            }
        }
        acc
    }

    pub fn flow(&self, rho_from: f64, rho_to: f64, dp_bottom: f64, dp_lin: f64) -> TwoWayFlow {
        let acc = self.integrals(rho_from, rho_to, dp_bottom, dp_lin);
        let scale = self.cd * self.width;
        let b = GRAVITY * (rho_from - rho_to);
        let neutral_height = if b != 0.0 {
            let z = dp_bottom / b;
            (0.0..=self.height).contains(&z).then_some(z)
        } else {
            None
        };
        TwoWayFlow {
            forward: scale * (2.0 * rho_from).sqrt() * acc.flux_forward,
            reverse: scale * (2.0 * rho_to).sqrt() * acc.flux_reverse,
            neutral_height,
        }
    }

    /// d(forward − reverse)/d(dp_bottom). Always positive.
    pub fn derivative(&self, rho_from: f64, rho_to: f64, dp_bottom: f64, dp_lin: f64) -> f64 {
        let acc = self.integrals(rho_from, rho_to, dp_bottom, dp_lin);
        self.cd
            * self.width
            * ((2.0 * rho_from).sqrt() * acc.slope_forward
                + (2.0 * rho_to).sqrt() * acc.slope_reverse)
    }

    /// Flow coefficient of the opening collapsed to a single `n = 0.5` orifice.
    pub fn equivalent_k(&self, rho: f64) -> f64 {
        self.cd * self.width * self.height * (2.0 * rho).sqrt()
    }

    /// Secant conductance of the collapsed orifice at mid-height difference `dp_mid`.
    pub fn equivalent_conductance(&self, rho: f64, dp_mid: f64, dp_lin: f64) -> f64 {
        self.equivalent_k(rho) / dp_mid.abs().max(dp_lin).sqrt()
    }
}

/// Fixed-flow device: returns `(flow, d(flow)/d(dp))`.
pub fn fan_flow(flow: f64) -> (f64, f64) {
    (flow, 0.0)
}

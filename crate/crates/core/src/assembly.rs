//! Mass-balance residual, Jacobian and Picard linear system for a network
//! under given exterior conditions.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::Matrix;
use crate::network::{ExternalNode, LinkModel, Network, NodeRef, CP_SECTORS};
use crate::physics::{air_density, fan_flow, NonPositiveTemperature, Opening, PowerLaw, GRAVITY};

/// Zone reference pressures in Pa, ordered as `Network::zones`.
pub type PressureVector = Vec<f64>;

/// Exterior conditions at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryState {
    /// m/s
    pub wind_speed: f64,
    /// Degrees clockwise from north, in [0, 360).
    pub wind_direction: f64,
    /// K
    pub outdoor_temperature: f64,
}

impl BoundaryState {
    pub fn new(wind_speed: f64, wind_direction: f64, outdoor_temperature: f64) -> Self {
        Self {
            wind_speed: wind_speed.max(0.0),
            wind_direction: wind_direction.rem_euclid(360.0),
            outdoor_temperature,
        }
    }

    /// Still air at `outdoor_temperature`.
    pub fn calm(outdoor_temperature: f64) -> Self {
        Self::new(0.0, 0.0, outdoor_temperature)
    }
}

/// Cp at `direction`, linear between the sector centres 0°, 45°, … 315°.
pub fn interpolate_cp(cp: &[f64; CP_SECTORS], direction: f64) -> f64 {
    let sector = 360.0 / CP_SECTORS as f64;
    let pos = direction.rem_euclid(360.0) / sector;
    let lo = (pos.floor() as usize) % CP_SECTORS;
    let hi = (lo + 1) % CP_SECTORS;
    let frac = pos - pos.floor();
    cp[lo] + frac * (cp[hi] - cp[lo])
}

/// Wind pressure on an exterior node, `0.5·ρ_out·Cp·v²`.
pub fn boundary_pressure(
    node: &ExternalNode,
    bc: &BoundaryState,
) -> Result<f64, NonPositiveTemperature> {
    let rho = air_density(bc.outdoor_temperature)?;
    Ok(0.5 * rho * interpolate_cp(&node.cp, bc.wind_direction) * bc.wind_speed * bc.wind_speed)
}

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("link \"{link}\" refers to unknown node \"{node}\"")]
    UnknownNode { link: String, node: String },
    #[error(transparent)]
    Temperature(#[from] NonPositiveTemperature),
}

/// A large opening carries flow in both directions, so it cannot be
/// represented by a single frozen conductance.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("large opening \"{link}\" has reciprocal flow")]
pub struct ReciprocalFlow {
    pub link: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub matrix: Matrix,
    pub rhs: Vec<f64>,
}

/// Flow through one link. For cracks and fans `forward`/`reverse` hold the
/// positive or negative part of `net`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkFlow {
    pub id: String,
    pub net: f64,
    pub forward: f64,
    pub reverse: f64,
}

#[derive(Debug, Clone, Copy)]
struct Side {
    node: NodeRef,
    density: f64,
    ref_height: f64,
}

#[derive(Debug, Clone, Copy)]
enum Law {
    Crack(PowerLaw),
    Opening(Opening),
    Fan(f64),
}

#[derive(Debug, Clone, Copy)]
struct ResolvedLink {
    from: Side,
    to: Side,
    /// Height where the pressure difference is evaluated: the midpoint for
    /// cracks and fans, the bottom edge for large openings.
    height: f64,
    law: Law,
}

/// A network bound to one set of exterior conditions.
#[derive(Debug, Clone)]
pub struct AirflowSystem<'a> {
    net: &'a Network,
    links: Vec<ResolvedLink>,
    boundary: Vec<f64>,
    dp_lin: f64,
}

impl<'a> AirflowSystem<'a> {
    pub fn new(net: &'a Network, bc: &BoundaryState, dp_lin: f64) -> Result<Self, AssemblyError> {
        let outdoor_density = air_density(bc.outdoor_temperature)?;
        let boundary = net
            .external_nodes
            .iter()
            .map(|e| boundary_pressure(e, bc))
            .collect::<Result<Vec<_>, _>>()?;
        let zone_density = net
            .zones
            .iter()
            .map(|z| air_density(z.temperature))
            .collect::<Result<Vec<_>, _>>()?;

        let side = |link: &str, id: &str| -> Result<Side, AssemblyError> {
            match net.node(id) {
                Some(NodeRef::Zone(i)) => Ok(Side {
                    node: NodeRef::Zone(i),
                    density: zone_density[i],
                    ref_height: net.zones[i].ref_height,
                }),
                Some(NodeRef::External(i)) => Ok(Side {
                    node: NodeRef::External(i),
                    density: outdoor_density,
                    ref_height: net.external_nodes[i].ref_height,
                }),
                None => Err(AssemblyError::UnknownNode {
                    link: link.to_owned(),
                    node: id.to_owned(),
                }),
            }
        };

        let links = net
            .links
            .iter()
            .map(|l| {
                let (law, height) = match l.model {
                    LinkModel::Crack { k, n } => (Law::Crack(PowerLaw::new(k, n)), l.elevation),
                    LinkModel::LargeOpening { width, height, cd } => (
                        Law::Opening(Opening::new(width, height, cd)),
                        l.elevation - 0.5 * height,
                    ),
                    LinkModel::Fan { flow } => (Law::Fan(flow), l.elevation),
                };
                Ok(ResolvedLink {
                    from: side(&l.id, &l.from)?,
                    to: side(&l.id, &l.to)?,
                    height,
                    law,
                })
            })
            .collect::<Result<Vec<_>, AssemblyError>>()?;

        Ok(Self {
            net,
            links,
            boundary,
            dp_lin,
        })
    }

    pub fn network(&self) -> &Network {
        self.net
    }

    pub fn zone_count(&self) -> usize {
        self.net.zones.len()
    }

    pub fn dp_lin(&self) -> f64 {
        self.dp_lin
    }

    /// Wind pressure on each exterior node, Pa.
    pub fn boundary_pressures(&self) -> &[f64] {
        &self.boundary
    }

    /// Reference pressure of a node: the unknown for zones, wind pressure outside.
    fn reference_pressure(&self, node: NodeRef, p: &[f64]) -> f64 {
        match node {
            NodeRef::Zone(i) => p[i],
            NodeRef::External(i) => self.boundary[i],
        }
    }

    /// Hydrostatic offset `−ρ·g·(z − z_ref)` of a side at height `z`.
    fn stack(side: &Side, z: f64) -> f64 {
        -side.density * GRAVITY * (z - side.ref_height)
    }

    fn dp_at(&self, link: &ResolvedLink, p: &[f64], z: f64) -> f64 {
        let pf = self.reference_pressure(link.from.node, p) + Self::stack(&link.from, z);
        let pt = self.reference_pressure(link.to.node, p) + Self::stack(&link.to, z);
        pf - pt
    }

    /// From-minus-to pressure difference of link `index`, Pa. For a large
    /// opening this is the difference at its bottom edge.
    pub fn link_dp(&self, index: usize, p: &[f64]) -> f64 {
        let link = &self.links[index];
        self.dp_at(link, p, link.height)
    }

    /// Net flow and its derivative with respect to the link's `dp`.
    fn flow_and_slope(&self, link: &ResolvedLink, p: &[f64], want_slope: bool) -> (f64, f64) {
        let dp = self.dp_at(link, p, link.height);
        match link.law {
            Law::Crack(c) => (
                c.flow(dp, self.dp_lin),
                if want_slope {
                    c.derivative(dp, self.dp_lin)
                } else {
                    0.0
                },
            ),
            Law::Opening(o) => {
                let (rf, rt) = (link.from.density, link.to.density);
                (
                    o.flow(rf, rt, dp, self.dp_lin).net(),
                    if want_slope {
                        o.derivative(rf, rt, dp, self.dp_lin)
                    } else {
                        0.0
                    },
                )
            }
            Law::Fan(flow) => fan_flow(flow),
        }
    }

    pub fn link_flow(&self, index: usize, p: &[f64]) -> LinkFlow {
        let link = &self.links[index];
        let id = self.net.links[index].id.clone();
        match link.law {
            Law::Opening(o) => {
                let dp = self.link_dp(index, p);
                let f = o.flow(link.from.density, link.to.density, dp, self.dp_lin);
                LinkFlow {
                    id,
                    net: f.net(),
                    forward: f.forward,
                    reverse: f.reverse,
                }
            }
            _ => {
                let (net, _) = self.flow_and_slope(link, p, false);
                LinkFlow {
                    id,
                    net,
                    forward: net.max(0.0),
                    reverse: (-net).max(0.0),
                }
            }
        }
    }

    pub fn link_flows(&self, p: &[f64]) -> Vec<LinkFlow> {
        (0..self.links.len())
            .map(|i| self.link_flow(i, p))
            .collect()
    }

    /// Net mass gain of each zone, kg/s. Zero at the solution.
    pub fn residual(&self, p: &[f64]) -> Vec<f64> {
        let mut f: Vec<f64> = self.net.zones.iter().map(|z| z.mech_flow).collect();
        for link in &self.links {
            let (m, _) = self.flow_and_slope(link, p, false);
            if let NodeRef::Zone(i) = link.from.node {
                f[i] -= m;
            }
            if let NodeRef::Zone(j) = link.to.node {
                f[j] += m;
            }
        }
        f
    }

    pub fn max_residual(&self, p: &[f64]) -> f64 {
        self.residual(p).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `J[i][j] = ∂residual_i/∂p_j`.
    pub fn jacobian(&self, p: &[f64]) -> Matrix {
        let mut jac = Matrix::zeros(self.zone_count());
        for link in &self.links {
            let (_, slope) = self.flow_and_slope(link, p, true);
            if slope == 0.0 {
                continue;
            }
            // m depends on p_from − p_to with slope `slope`.
            if let NodeRef::Zone(i) = link.from.node {
                jac[(i, i)] -= slope;
                if let NodeRef::Zone(j) = link.to.node {
                    jac[(i, j)] += slope;
                }
            }
            if let NodeRef::Zone(j) = link.to.node {
                jac[(j, j)] -= slope;
                if let NodeRef::Zone(i) = link.from.node {
                    jac[(j, i)] += slope;
                }
            }
        }
        jac
    }

    /// Picard system `A·p = B` with conductances frozen at `p`.
    ///
    /// Each link flow is written `G·(p_from − p_to + c)`, where `c` gathers
    /// exterior wind pressures and hydrostatic offsets. Pressure terms go to
    /// `A`, constants (and fans and mechanical flows) to `B`, so that
    /// `residual(p) = A(p)·p − B(p)`.
    pub fn picard_system(&self, p: &[f64]) -> Result<LinearSystem, ReciprocalFlow> {
        let n = self.zone_count();
        let mut a = Matrix::zeros(n);
        let mut b: Vec<f64> = self.net.zones.iter().map(|z| -z.mech_flow).collect();

        for (index, link) in self.links.iter().enumerate() {
            let (conductance, z) = match link.law {
                Law::Crack(c) => (
                    c.conductance(self.dp_at(link, p, link.height), self.dp_lin),
                    link.height,
                ),
                Law::Opening(o) => {
                    let dp = self.dp_at(link, p, link.height);
                    let flow = o.flow(link.from.density, link.to.density, dp, self.dp_lin);
                    if flow.is_bidirectional() {
                        return Err(ReciprocalFlow {
                            link: self.net.links[index].id.clone(),
                        });
                    }
                    let mid = link.height + 0.5 * o.height;
                    let rho = 0.5 * (link.from.density + link.to.density);
                    (
                        o.equivalent_conductance(rho, self.dp_at(link, p, mid), self.dp_lin),
                        mid,
                    )
                }
                Law::Fan(flow) => {
                    if let NodeRef::Zone(i) = link.from.node {
                        b[i] += flow;
                    }
                    if let NodeRef::Zone(j) = link.to.node {
                        b[j] -= flow;
                    }
                    continue;
                }
            };

            let mut constant = Self::stack(&link.from, z) - Self::stack(&link.to, z);
            if let NodeRef::External(e) = link.from.node {
                constant += self.boundary[e];
            }
            if let NodeRef::External(e) = link.to.node {
                constant -= self.boundary[e];
            }

            if let NodeRef::Zone(i) = link.from.node {
                a[(i, i)] -= conductance;
                if let NodeRef::Zone(j) = link.to.node {
                    a[(i, j)] += conductance;
                }
                b[i] += conductance * constant;
            }
            if let NodeRef::Zone(j) = link.to.node {
                a[(j, j)] -= conductance;
                if let NodeRef::Zone(i) = link.from.node {
                    a[(j, i)] += conductance;
                }
                b[j] -= conductance * constant;
            }
        }
        Ok(LinearSystem { matrix: a, rhs: b })
    }
}

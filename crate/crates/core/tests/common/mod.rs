//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the solver's assembly or physics code: densities,
//! wind pressures, element flows and the mass balance are recomputed from the
//! network description directly, and large openings are integrated
//! numerically.

#![allow(dead_code)]

use airnet::network::{Link, LinkModel, Network, Zone};
use airnet::BoundaryState;

pub const G: f64 = 9.81;
pub const DP_LIN: f64 = 1e-3;

pub fn density(t: f64) -> f64 {
    353.05 / t
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Regularized signed square root: `sign(x)·√|x|`, linear below `DP_LIN`.
pub fn signed_root(x: f64) -> f64 {
    if x.abs() >= DP_LIN {
        x.signum() * x.abs().sqrt()
    } else {
        x / DP_LIN.sqrt()
    }
}

/// Forward and reverse flow through a large opening by quadrature.
pub fn opening_by_quadrature(
    w: f64,
    h: f64,
    cd: f64,
    rho_from: f64,
    rho_to: f64,
    dp_bottom: f64,
) -> (f64, f64) {
    let b = G * (rho_from - rho_to);
    let fwd = |z: f64| {
        let s = signed_root(dp_bottom - b * z);
        cd * w * (2.0 * rho_from).sqrt() * s.max(0.0)
    };
    let rev = |z: f64| {
        let s = signed_root(dp_bottom - b * z);
        cd * w * (2.0 * rho_to).sqrt() * (-s).max(0.0)
    };
    // Split at the neutral plane so each piece is one-signed.
    let mut cuts = vec![0.0, h];
    if b != 0.0 {
        let zn = dp_bottom / b;
        if zn > 0.0 && zn < h {
            cuts.insert(1, zn);
        }
    }
    let mut f = 0.0;
    let mut r = 0.0;
    for pair in cuts.windows(2) {
        f += simpson(&fwd, pair[0], pair[1], 1e-14);
        r += simpson(&rev, pair[0], pair[1], 1e-14);
    }
    (f, r)
}

fn wind_cp(cp: &[f64; 8], direction: f64) -> f64 {
    let d = direction.rem_euclid(360.0) / 45.0;
    let i = d.floor() as usize % 8;
    let frac = d - d.floor();
    cp[i] * (1.0 - frac) + cp[(i + 1) % 8] * frac
}

struct NodeState {
    pressure: f64,
    density: f64,
    ref_height: f64,
    zone: Option<usize>,
}

fn node_state(net: &Network, bc: &BoundaryState, p: &[f64], id: &str) -> NodeState {
    if let Some(i) = net.zones.iter().position(|z| z.id == id) {
        let z = &net.zones[i];
        return NodeState {
            pressure: p[i],
            density: density(z.temperature),
            ref_height: z.ref_height,
            zone: Some(i),
        };
    }
    let e = net
        .external_nodes
        .iter()
        .find(|e| e.id == id)
        .expect("known node");
    let rho = density(bc.outdoor_temperature);
    NodeState {
        pressure: 0.5 * rho * wind_cp(&e.cp, bc.wind_direction) * bc.wind_speed * bc.wind_speed,
        density: rho,
        ref_height: e.ref_height,
        zone: None,
    }
}

fn pressure_at(n: &NodeState, z: f64) -> f64 {
    n.pressure - n.density * G * (z - n.ref_height)
}

/// Net from → to mass flow of one link.
pub fn link_flow(net: &Network, bc: &BoundaryState, p: &[f64], link: &Link) -> f64 {
    let from = node_state(net, bc, p, &link.from);
    let to = node_state(net, bc, p, &link.to);
    match link.model {
        LinkModel::Crack { k, n } => {
            let dp = pressure_at(&from, link.elevation) - pressure_at(&to, link.elevation);
            if dp.abs() >= DP_LIN {
                k * dp.abs().powf(n) * dp.signum()
            } else {
                k * DP_LIN.powf(n - 1.0) * dp
            }
        }
        LinkModel::LargeOpening { width, height, cd } => {
            let bottom = link.elevation - 0.5 * height;
            let dp = pressure_at(&from, bottom) - pressure_at(&to, bottom);
            let (f, r) = opening_by_quadrature(width, height, cd, from.density, to.density, dp);
            f - r
        }
        LinkModel::Fan { flow } => flow,
    }
}

/// Per-zone mass imbalance (inflow minus outflow plus mechanical supply).
pub fn residual(net: &Network, bc: &BoundaryState, p: &[f64]) -> Vec<f64> {
    let mut r: Vec<f64> = net.zones.iter().map(|z| z.mech_flow).collect();
    for link in &net.links {
        let m = link_flow(net, bc, p, link);
        let from = node_state(net, bc, p, &link.from);
        let to = node_state(net, bc, p, &link.to);
        if let Some(i) = from.zone {
            r[i] -= m;
        }
        if let Some(j) = to.zone {
            r[j] += m;
        }
    }
    r
}

pub fn max_residual(net: &Network, bc: &BoundaryState, p: &[f64]) -> f64 {
    residual(net, bc, p)
        .iter()
        .fold(0.0, |m: f64, v| m.max(v.abs()))
}

pub fn zone(id: &str, temperature: f64) -> Zone {
    Zone {
        id: id.into(),
        temperature,
        ref_height: 0.0,
        mech_flow: 0.0,
    }
}

pub fn crack(id: &str, from: &str, to: &str, k: f64, n: f64) -> Link {
    Link {
        id: id.into(),
        from: from.into(),
        to: to.into(),
        elevation: 0.0,
        model: LinkModel::Crack { k, n },
    }
}

pub fn external(id: &str, cp: f64) -> airnet::network::ExternalNode {
    airnet::network::ExternalNode {
        id: id.into(),
        ref_height: 0.0,
        cp: [cp; 8],
    }
}

/// Two zones in series between a windward and a leeward facade, everything
/// at ground level and outdoor temperature so only wind drives the flow.
pub fn two_zone_series() -> Network {
    Network {
        zones: vec![zone("A", 293.15), zone("B", 293.15)],
        external_nodes: vec![external("W", 0.6), external("L", -0.3)],
        links: vec![
            crack("wa", "W", "A", 0.02, 0.6),
            crack("ab", "A", "B", 0.015, 0.7),
            crack("bl", "B", "L", 0.01, 0.5),
            crack("al", "A", "L", 0.005, 0.65),
        ],
    }
}

//! Bundled example networks and seeded random networks for experiments.
//!
//! The building geometries are illustrative: they have the shape of the usual
//! validation cases (a stacked three-storey building, a five-room dwelling
//! with a sliding door, two rooms joined by a large opening) but the numbers
//! are our own.

use rand::Rng;

use crate::assembly::BoundaryState;
use crate::network::{parse_network, ExternalNode, Link, LinkModel, Network, Zone, CP_SECTORS};
use crate::scenario::{parse_weather, WeatherRecord};

pub const DWELLING: &str = include_str!("../data/dwelling.json");
pub const THREE_STOREY: &str = include_str!("../data/three_storey.json");
pub const TWO_ZONE_OPENING: &str = include_str!("../data/two_zone_opening.json");
pub const SYMMETRIC_TWO_CRACK: &str = include_str!("../data/symmetric_two_crack.json");
pub const LINEAR_TWO_CRACK: &str = include_str!("../data/linear_two_crack.json");

/// Ten days of half-hourly synthetic weather, `synthetic_weather(10, 30, WEATHER_SEED)`.
pub const WEATHER_10D_30MIN: &str = include_str!("../data/weather_10d_30min.csv");
pub const WEATHER_SEED: u64 = 1998;

/// Name and contents of every bundled network file.
pub const ALL: [(&str, &str); 5] = [
    ("dwelling", DWELLING),
    ("three_storey", THREE_STOREY),
    ("two_zone_opening", TWO_ZONE_OPENING),
    ("symmetric_two_crack", SYMMETRIC_TWO_CRACK),
    ("linear_two_crack", LINEAR_TWO_CRACK),
];

fn load(text: &str) -> Network {
    parse_network(text).expect("bundled network is valid")
}

/// Five-room dwelling with a sliding door between `living` and `bed2`.
pub fn dwelling() -> Network {
    load(DWELLING)
}

/// The dwelling with its sliding door replaced by an equivalent crack.
pub fn dwelling_cracks_only() -> Network {
    let mut net = dwelling();
    for link in &mut net.links {
        if let LinkModel::LargeOpening { width, height, cd } = link.model {
            // Orifice-equivalent flow coefficient at ρ = 1.2 kg/m³.
            link.model = LinkModel::Crack {
                k: cd * width * height * (2.0f64 * 1.2).sqrt(),
                n: 0.5,
            };
        }
    }
    net
}

pub fn weather() -> Vec<WeatherRecord> {
    parse_weather(WEATHER_10D_30MIN).expect("bundled weather is valid")
}

pub fn three_storey() -> Network {
    load(THREE_STOREY)
}

/// Hot and cold rooms joined by a 1 m × 1 m opening; only the hot room has
/// a crack to the outside, so the opening carries zero net flow.
pub fn two_zone_opening() -> Network {
    load(TWO_ZONE_OPENING)
}

/// [`two_zone_opening`] with the room temperatures set to `mean ± dt/2`.
pub fn two_zone_opening_with(mean: f64, dt: f64) -> Network {
    let mut net = two_zone_opening();
    net.zones[0].temperature = mean + 0.5 * dt;
    net.zones[1].temperature = mean - 0.5 * dt;
    net
}

/// One room between a windward node at 10 Pa and a leeward node at 0 Pa under
/// [`symmetric_boundary`].
pub fn symmetric_two_crack() -> Network {
    load(SYMMETRIC_TWO_CRACK)
}

/// As [`symmetric_two_crack`] with linear (`n = 1`) cracks.
pub fn linear_two_crack() -> Network {
    load(LINEAR_TWO_CRACK)
}

/// 5 m/s at 353.05 K, where ρ_out = 1 and a Cp of 0.8 gives 10 Pa.
pub fn symmetric_boundary() -> BoundaryState {
    BoundaryState::new(5.0, 0.0, 353.05)
}

/// Random crack-only network with `zones` rooms, plus matching exterior conditions.
///
/// Every room gets at least one exterior crack, so the network is always valid.
pub fn random_crack_network<R: Rng>(rng: &mut R, zones: usize) -> (Network, BoundaryState) {
    let externals = rng.random_range(2..=4);
    let external_nodes = (0..externals)
        .map(|i| {
            let mut cp = [0.0; CP_SECTORS];
            for c in &mut cp {
                *c = rng.random_range(-0.8..0.8);
            }
            ExternalNode {
                id: format!("E{i}"),
                ref_height: 0.0,
                cp,
            }
        })
        .collect();
    let zone_list: Vec<Zone> = (0..zones)
        .map(|i| Zone {
            id: format!("Z{i}"),
            temperature: rng.random_range(290.0..305.0),
            ref_height: 3.0 * rng.random_range(0..3) as f64,
            mech_flow: 0.0,
        })
        .collect();

    let mut links = Vec::new();
    let mut crack = |rng: &mut R, from: String, to: String, base: f64| {
        let id = format!("L{}", links.len());
        let (from, to) = if rng.random_bool(0.5) {
            (from, to)
        } else {
            (to, from)
        };
        links.push(Link {
            id,
            from,
            to,
            elevation: base + rng.random_range(0.2..2.8),
            model: LinkModel::Crack {
                k: rng.random_range(0.002..0.05),
                n: rng.random_range(0.5..=1.0),
            },
        });
    };
    for (i, z) in zone_list.iter().enumerate() {
        for _ in 0..rng.random_range(1..=2) {
            let e = rng.random_range(0..externals);
            crack(rng, format!("E{e}"), z.id.clone(), z.ref_height);
        }
        if i > 0 {
            let j = rng.random_range(0..i);
            crack(rng, zone_list[j].id.clone(), z.id.clone(), z.ref_height);
        }
    }

    let bc = BoundaryState::new(
        rng.random_range(0.0..8.0),
        rng.random_range(0.0..360.0),
        rng.random_range(285.0..305.0),
    );
    (
        Network {
            zones: zone_list,
            external_nodes,
            links,
        },
        bc,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::validate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bundled_networks_are_valid() {
        for (name, text) in ALL {
            let net = parse_network(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(validate(&net).is_empty(), "{name}");
        }
        assert!(validate(&dwelling_cracks_only()).is_empty());
    }

    #[test]
    fn three_storey_shape() {
        let net = three_storey();
        assert_eq!(net.zones.len(), 3);
        assert!(net.links.len() >= 8);
    }

    #[test]
    fn dwelling_shape() {
        let net = dwelling();
        assert_eq!(net.zones.len(), 5);
        let openings = net
            .links
            .iter()
            .filter(|l| matches!(l.model, LinkModel::LargeOpening { .. }))
            .count();
        assert_eq!(openings, 1);
        assert!(dwelling_cracks_only()
            .links
            .iter()
            .all(|l| matches!(l.model, LinkModel::Crack { .. })));
    }

    #[test]
    fn bundled_weather_matches_generator() {
        let w = weather();
        assert_eq!(w.len(), 480);
        assert_eq!(w, crate::scenario::synthetic_weather(10, 30, WEATHER_SEED));
    }

    #[test]
    fn random_networks_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let zones = rng.random_range(1..=6);
            let (net, _) = random_crack_network(&mut rng, zones);
            assert!(validate(&net).is_empty());
        }
    }
}

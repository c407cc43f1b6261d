//! Shared identifier and geometry types used across the ledger, token,
//! zone, and simulation layers.

use std::fmt;

/// 64-bit identifier of any participant in the network: satellites,
/// ground stations, user terminals, relays, and consortium stakeholders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Zone-scoped identity issued by a zone master when a satellite is
/// registered or admitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VirtualId(pub u64);

impl fmt::Display for VirtualId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Identifier of a virtual zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ZoneId(pub u64);

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Orbit classes used to partition zones and pick link latencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OrbitClass {
    Leo,
    Meo,
    Geo,
}

impl OrbitClass {
    pub fn name(self) -> &'static str {
        match self {
            OrbitClass::Leo => "LEO",
            OrbitClass::Meo => "MEO",
            OrbitClass::Geo => "GEO",
        }
    }

    pub fn parse(s: &str) -> Option<OrbitClass> {
        match s.to_ascii_lowercase().as_str() {
            "leo" => Some(OrbitClass::Leo),
            "meo" => Some(OrbitClass::Meo),
            "geo" => Some(OrbitClass::Geo),
            _ => None,
        }
    }
}

impl fmt::Display for OrbitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ground-track coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl LatLon {
    pub fn new(lat_deg: f64, lon_deg: f64) -> LatLon {
        LatLon { lat_deg, lon_deg }
    }

    pub fn is_finite(&self) -> bool {
        self.lat_deg.is_finite() && self.lon_deg.is_finite()
    }

    /// Great-circle central angle to `other`, in degrees.
    pub fn angular_distance_deg(&self, other: &LatLon) -> f64 {
        let lat_a = self.lat_deg.to_radians();
        let lat_b = other.lat_deg.to_radians();
        let d_lat = (other.lat_deg - self.lat_deg).to_radians();
        let d_lon = (other.lon_deg - self.lon_deg).to_radians();
        let h = (d_lat / 2.0).sin().powi(2)
            + lat_a.cos() * lat_b.cos() * (d_lon / 2.0).sin().powi(2);
        2.0 * h.sqrt().min(1.0).asin().to_degrees()
    }
}

/// Half-open interval of simulation ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickInterval {
    pub start: u64,
    pub end: u64,
}

impl TickInterval {
    pub fn new(start: u64, end: u64) -> TickInterval {
        TickInterval { start, end }
    }
}

/// Position/velocity pair in a linearized local frame. Positions are in
/// kilometres, velocities in kilometres per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    pub position_km: [f64; 3],
    pub velocity_km_s: [f64; 3],
}

impl KinematicState {
    pub fn new(position_km: [f64; 3], velocity_km_s: [f64; 3]) -> KinematicState {
        KinematicState {
            position_km,
            velocity_km_s,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position_km.iter().all(|c| c.is_finite())
            && self.velocity_km_s.iter().all(|c| c.is_finite())
    }
}

pub(crate) fn vec_sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn vec_add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn vec_scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn vec_dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn vec_norm(a: [f64; 3]) -> f64 {
    vec_dot(a, a).sqrt()
}

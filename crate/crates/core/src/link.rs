//! Link latency model between node kinds.
//!
//! Latencies are whole ticks with a plausible ordering (LEO < MEO < GEO);
//! every class can be overridden per scenario. Message drops default to
//! zero; when enabled, a sender makes up to [`MAX_TRANSMIT_ATTEMPTS`]
//! attempts, each adding one latency interval.

use std::collections::BTreeMap;

use crate::types::OrbitClass;

pub const MAX_TRANSMIT_ATTEMPTS: u32 = 3;

/// Which latency class a (sender, receiver) pair falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LinkClass {
    GroundGround,
    LeoGround,
    MeoGround,
    GeoGround,
    TdrsGround,
    IntraZone,
    CrossZone,
    SatTdrs,
}

impl LinkClass {
    pub fn key(self) -> &'static str {
        match self {
            LinkClass::GroundGround => "ground_ground",
            LinkClass::LeoGround => "leo_ground",
            LinkClass::MeoGround => "meo_ground",
            LinkClass::GeoGround => "geo_ground",
            LinkClass::TdrsGround => "tdrs_ground",
            LinkClass::IntraZone => "intra_zone",
            LinkClass::CrossZone => "cross_zone",
            LinkClass::SatTdrs => "sat_tdrs",
        }
    }

    pub fn from_key(key: &str) -> Option<LinkClass> {
        Some(match key {
            "ground_ground" => LinkClass::GroundGround,
            "leo_ground" => LinkClass::LeoGround,
            "meo_ground" => LinkClass::MeoGround,
            "geo_ground" => LinkClass::GeoGround,
            "tdrs_ground" => LinkClass::TdrsGround,
            "intra_zone" => LinkClass::IntraZone,
            "cross_zone" => LinkClass::CrossZone,
            "sat_tdrs" => LinkClass::SatTdrs,
            _ => return None,
        })
    }

    fn default_latency(self) -> u64 {
        match self {
            LinkClass::GroundGround => 1,
            LinkClass::LeoGround => 2,
            LinkClass::MeoGround => 8,
            LinkClass::GeoGround => 12,
            LinkClass::TdrsGround => 12,
            LinkClass::IntraZone => 1,
            LinkClass::CrossZone => 4,
            LinkClass::SatTdrs => 4,
        }
    }
}

/// The endpoint shape the link model cares about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Satellite(OrbitClass),
    Ground,
    Tdrs,
}

/// Per-class latencies plus the drop probability.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    overrides: BTreeMap<LinkClass, u64>,
    pub drop_probability: f64,
}

impl Default for LinkModel {
    fn default() -> LinkModel {
        LinkModel {
            overrides: BTreeMap::new(),
            drop_probability: 0.0,
        }
    }
}

impl LinkModel {
    /// Overrides one class's latency. Latencies below one tick are clamped
    /// to one.
    pub fn set_latency(&mut self, class: LinkClass, ticks: u64) {
        self.overrides.insert(class, ticks.max(1));
    }

    pub fn classify(a: Endpoint, b: Endpoint, same_zone: bool) -> LinkClass {
        use Endpoint::*;
        match (a, b) {
            (Satellite(_), Satellite(_)) => {
                if same_zone {
                    LinkClass::IntraZone
                } else {
                    LinkClass::CrossZone
                }
            }
            (Satellite(orbit), Ground) | (Ground, Satellite(orbit)) => match orbit {
                OrbitClass::Leo => LinkClass::LeoGround,
                OrbitClass::Meo => LinkClass::MeoGround,
                OrbitClass::Geo => LinkClass::GeoGround,
            },
            (Satellite(_), Tdrs) | (Tdrs, Satellite(_)) | (Tdrs, Tdrs) => LinkClass::SatTdrs,
            (Tdrs, Ground) | (Ground, Tdrs) => LinkClass::TdrsGround,
            (Ground, Ground) => LinkClass::GroundGround,
        }
    }

    pub fn latency(&self, a: Endpoint, b: Endpoint, same_zone: bool) -> u64 {
        let class = LinkModel::classify(a, b, same_zone);
        self.overrides
            .get(&class)
            .copied()
            .unwrap_or_else(|| class.default_latency())
    }
}

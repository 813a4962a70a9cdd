//! Minimum-fleet matching: chain a day's trips onto as few bikes as
//! possible. The greedy chain builder is exact for station-based systems
//! (see the break-reconnection argument exercised in tests); for dockless
//! systems it is an upper bound, audited against the exact path-cover
//! oracle.

mod greedy;
mod oracle;
mod reconnect;

pub use greedy::{build_min_fleet, greedy_successor};
pub use oracle::min_fleet_oracle;
pub use reconnect::{apply_break_reconnect, idle_slots, IdleSlot};

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{assign_place, haversine, VirtualStationSet, DEFAULT_RADIUS_M};
use crate::ingest::{Trip, TripSet};
use crate::types::PlaceRef;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Station,
    Dockless,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "station" | "sbbs" => Ok(Mode::Station),
            "dockless" | "dbs" => Ok(Mode::Dockless),
            other => Err(Error::schema(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub mode: Mode,
    /// Acceptable walking distance w, meters.
    pub walk_radius_m: f64,
    /// Minimum idle time c between successive users of one bike, seconds.
    pub usage_interval_s: i64,
}

impl MatchConfig {
    pub fn station(usage_interval_s: i64) -> Self {
        MatchConfig {
            mode: Mode::Station,
            walk_radius_m: DEFAULT_RADIUS_M,
            usage_interval_s,
        }
    }

    pub fn dockless(usage_interval_s: i64) -> Self {
        MatchConfig {
            mode: Mode::Dockless,
            walk_radius_m: DEFAULT_RADIUS_M,
            usage_interval_s,
        }
    }
}

/// The ordered trips served by one bike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BikeChain {
    pub bike_ord: u32,
    pub trip_ids: Vec<u64>,
    pub initial_place: PlaceRef,
    pub final_place: PlaceRef,
    /// End time of the last served trip.
    pub available_from: i64,
    /// Where the bike rests now; the user bridges the walking gap, the
    /// bike itself stays at the previous destination.
    pub current_pos: PlaceRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetSolution {
    pub chains: Vec<BikeChain>,
    pub trip_assignment: BTreeMap<u64, u32>,
    pub day: NaiveDate,
    pub config: MatchConfig,
}

impl FleetSolution {
    pub fn fleet_size(&self) -> usize {
        self.chains.len()
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        w.write_all(b"\n")?;
        Ok(())
    }
}

/// Per-place bike demand: how many chains start at each place.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandProfile {
    pub day: NaiveDate,
    pub demand: BTreeMap<u32, u32>,
}

impl DemandProfile {
    pub fn total(&self) -> u64 {
        self.demand.values().map(|&v| v as u64).sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["day", "place_id", "bike_demand"])?;
        for (place, count) in &self.demand {
            wtr.write_record([self.day.to_string(), place.to_string(), count.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub(crate) fn place_distance_ok(from: &PlaceRef, to: &PlaceRef, cfg: &MatchConfig) -> bool {
    match (cfg.mode, from, to) {
        (Mode::Station, PlaceRef::Station { station_id: a }, PlaceRef::Station { station_id: b }) => a == b,
        (Mode::Dockless, PlaceRef::Coordinate { point: a }, PlaceRef::Coordinate { point: b }) => {
            haversine(*a, *b) < cfg.walk_radius_m
        }
        _ => false,
    }
}

pub(crate) fn check_mode(trips: &[Trip], cfg: &MatchConfig) -> Result<()> {
    for t in trips {
        let ok = match cfg.mode {
            Mode::Station => t.origin.station_id().is_some() && t.destination.station_id().is_some(),
            Mode::Dockless => t.origin.point().is_some() && t.destination.point().is_some(),
        };
        if !ok {
            return Err(Error::precondition(format!(
                "trip {} place kind does not match {:?} mode",
                t.trip_id, cfg.mode
            )));
        }
    }
    Ok(())
}

/// Re-check every chain against the chain rule and the assignment
/// bijection. Machine-checkable validity per solution.
pub fn validate_solution(sol: &FleetSolution, trips: &TripSet, cfg: &MatchConfig) -> Result<()> {
    let by_id: BTreeMap<u64, &Trip> = trips.trips().iter().map(|t| (t.trip_id, t)).collect();
    let mut seen = BTreeMap::new();
    for chain in &sol.chains {
        let mut prev: Option<&Trip> = None;
        for &tid in &chain.trip_ids {
            let trip = by_id
                .get(&tid)
                .ok_or_else(|| Error::consistency(format!("chain references unknown trip {tid}")))?;
            if seen.insert(tid, chain.bike_ord).is_some() {
                return Err(Error::consistency(format!("trip {tid} assigned twice")));
            }
            if let Some(p) = prev {
                if trip.start_time < p.end_time + cfg.usage_interval_s {
                    return Err(Error::consistency(format!(
                        "chain {} breaks the usage interval at trip {tid}",
                        chain.bike_ord
                    )));
                }
                if !place_distance_ok(&p.destination, &trip.origin, cfg) {
                    return Err(Error::consistency(format!(
                        "chain {} breaks spatial proximity at trip {tid}",
                        chain.bike_ord
                    )));
                }
            } else if chain.initial_place != trip.origin {
                return Err(Error::consistency(format!(
                    "chain {} initial place disagrees with its first trip",
                    chain.bike_ord
                )));
            }
            prev = Some(trip);
        }
        if let Some(p) = prev {
            if chain.final_place != p.destination {
                return Err(Error::consistency(format!(
                    "chain {} final place disagrees with its last trip",
                    chain.bike_ord
                )));
            }
        }
    }
    if seen.len() != trips.len() {
        return Err(Error::consistency(format!(
            "{} trips assigned, expected {}",
            seen.len(),
            trips.len()
        )));
    }
    if sol.trip_assignment != seen {
        return Err(Error::consistency("trip_assignment map disagrees with chains"));
    }
    Ok(())
}

/// Count chain initial positions per place. Station mode uses station
/// ids directly; dockless mode resolves coordinates to virtual stations.
pub fn bike_demand_by_place(
    sol: &FleetSolution,
    places: Option<&VirtualStationSet>,
) -> Result<DemandProfile> {
    let mut demand: BTreeMap<u32, u32> = BTreeMap::new();
    for chain in &sol.chains {
        let place = match &chain.initial_place {
            PlaceRef::Station { station_id } => *station_id,
            PlaceRef::Coordinate { point } => {
                let vs = places.ok_or_else(|| {
                    Error::precondition("dockless demand profile needs a virtual station set")
                })?;
                assign_place(*point, vs).vs_id
            }
        };
        *demand.entry(place).or_insert(0) += 1;
    }
    Ok(DemandProfile {
        day: sol.day,
        demand,
    })
}

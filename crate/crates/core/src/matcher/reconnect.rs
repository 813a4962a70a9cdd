//! Break-reconnection: two bikes idle at the same place at the same time
//! can swap their remaining trips without changing the fleet size.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geo::haversine;
use crate::ingest::{Trip, TripSet};
use crate::types::PlaceRef;

use super::{validate_solution, BikeChain, FleetSolution, MatchConfig};

/// An interval during which a bike rests at one place. `suffix_start` is
/// the index of the first trip that would move with a suffix swap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdleSlot {
    pub suffix_start: usize,
    /// Earliest moment a new user may take the bike (previous end + c);
    /// None before the first trip.
    pub available_at: Option<i64>,
    /// Start of the next trip; None after the last trip.
    pub until: Option<i64>,
}

fn same_place(a: &PlaceRef, b: &PlaceRef) -> bool {
    match (a, b) {
        (PlaceRef::Station { station_id: x }, PlaceRef::Station { station_id: y }) => x == y,
        (PlaceRef::Coordinate { point: x }, PlaceRef::Coordinate { point: y }) => {
            haversine(*x, *y) < 1e-6
        }
        _ => false,
    }
}

/// Idle slots of a chain at `place`, in chain order.
pub fn idle_slots(
    chain: &BikeChain,
    trips_by_id: &BTreeMap<u64, &Trip>,
    place: &PlaceRef,
    cfg: &MatchConfig,
) -> Vec<IdleSlot> {
    let mut slots = Vec::new();
    let trips: Vec<&Trip> = chain.trip_ids.iter().map(|id| trips_by_id[id]).collect();
    if same_place(&chain.initial_place, place) {
        slots.push(IdleSlot {
            suffix_start: 0,
            available_at: None,
            until: trips.first().map(|t| t.start_time),
        });
    }
    for (i, t) in trips.iter().enumerate() {
        if same_place(&t.destination, place) {
            slots.push(IdleSlot {
                suffix_start: i + 1,
                available_at: Some(t.end_time + cfg.usage_interval_s),
                until: trips.get(i + 1).map(|n| n.start_time),
            });
        }
    }
    slots
}

fn slot_covers(slot: &IdleSlot, time: i64) -> bool {
    slot.available_at.map_or(true, |a| a <= time) && slot.until.map_or(true, |u| time <= u)
}

fn rebuild_chain(
    bike_ord: u32,
    trip_ids: Vec<u64>,
    fallback: &BikeChain,
    trips_by_id: &BTreeMap<u64, &Trip>,
) -> BikeChain {
    match trip_ids.first() {
        None => BikeChain {
            bike_ord,
            trip_ids,
            initial_place: fallback.initial_place,
            final_place: fallback.initial_place,
            available_from: i64::MIN,
            current_pos: fallback.initial_place,
        },
        Some(first) => {
            let last = trips_by_id[trip_ids.last().unwrap()];
            BikeChain {
                bike_ord,
                initial_place: trips_by_id[first].origin,
                final_place: last.destination,
                available_from: last.end_time,
                current_pos: last.destination,
                trip_ids,
            }
        }
    }
}

/// Swap the suffixes of two chains that intersect at `place` at `time`.
/// Fleet size and trip coverage are unchanged; chain validity is
/// re-checked after the swap.
pub fn apply_break_reconnect(
    sol: &FleetSolution,
    trips: &TripSet,
    bike_a: u32,
    bike_b: u32,
    place: &PlaceRef,
    time: i64,
) -> Result<FleetSolution> {
    if bike_a == bike_b {
        return Err(Error::precondition("break-reconnect needs two distinct bikes"));
    }
    let cfg = &sol.config;
    let trips_by_id: BTreeMap<u64, &Trip> = trips.trips().iter().map(|t| (t.trip_id, t)).collect();
    let find = |ord: u32| -> Result<&BikeChain> {
        sol.chains
            .iter()
            .find(|c| c.bike_ord == ord)
            .ok_or_else(|| Error::precondition(format!("no bike {ord} in solution")))
    };
    let chain_a = find(bike_a)?;
    let chain_b = find(bike_b)?;

    let slot_a = idle_slots(chain_a, &trips_by_id, place, cfg)
        .into_iter()
        .find(|s| slot_covers(s, time));
    let slot_b = idle_slots(chain_b, &trips_by_id, place, cfg)
        .into_iter()
        .find(|s| slot_covers(s, time));
    let (slot_a, slot_b) = match (slot_a, slot_b) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::precondition(format!(
                "bikes {bike_a} and {bike_b} have no spatio-temporal intersection at the given place/time"
            )))
        }
    };

    let mut new_a_ids = chain_a.trip_ids[..slot_a.suffix_start].to_vec();
    new_a_ids.extend_from_slice(&chain_b.trip_ids[slot_b.suffix_start..]);
    let mut new_b_ids = chain_b.trip_ids[..slot_b.suffix_start].to_vec();
    new_b_ids.extend_from_slice(&chain_a.trip_ids[slot_a.suffix_start..]);

    let new_a = rebuild_chain(bike_a, new_a_ids, chain_a, &trips_by_id);
    let new_b = rebuild_chain(bike_b, new_b_ids, chain_b, &trips_by_id);

    let mut chains = sol.chains.clone();
    for c in chains.iter_mut() {
        if c.bike_ord == bike_a {
            *c = new_a.clone();
        } else if c.bike_ord == bike_b {
            *c = new_b.clone();
        }
    }
    let mut assignment = sol.trip_assignment.clone();
    for c in [&new_a, &new_b] {
        for id in &c.trip_ids {
            assignment.insert(*id, c.bike_ord);
        }
    }
    let swapped = FleetSolution {
        chains,
        trip_assignment: assignment,
        day: sol.day,
        config: sol.config,
    };
    validate_solution(&swapped, trips, cfg)?;
    Ok(swapped)
}

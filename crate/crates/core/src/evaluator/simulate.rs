//! Online replay of one dockless day against an allocation plan: bikes
//! start at virtual-station centers, trips are processed in time order,
//! and a trip is served by the nearest eligible bike within walking
//! distance or counted as unmet.

use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use crate::allocator::{AllocationPlan, PlaceFlows};
use crate::error::{Error, Result};
use crate::geo::{assign_place, haversine, GridFrame, VirtualStationSet};
use crate::ingest::TripSet;
use crate::matcher::MatchConfig;
use crate::types::GeoPoint;

use super::UnmetReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub served: Vec<u64>,
    pub unmet: Vec<u64>,
    pub final_positions: Vec<GeoPoint>,
    /// Bike-based accounting: outflow at the virtual station of the
    /// bike's pickup position, inflow at the trip destination's station,
    /// so flows reconcile exactly with the final distribution.
    pub flows: PlaceFlows,
}

struct BikeState {
    pos: GeoPoint,
    /// i64::MIN until the first use: a freshly allocated bike has no
    /// previous user, so the usage interval does not apply to it.
    idle_since: i64,
    busy: bool,
}

struct BikeIndex {
    frame: GridFrame,
    cells: HashMap<(i32, i32), BTreeSet<u32>>,
}

impl BikeIndex {
    fn insert(&mut self, id: u32, pos: GeoPoint) {
        self.cells.entry(self.frame.cell_of(pos)).or_default().insert(id);
    }

    fn remove(&mut self, id: u32, pos: GeoPoint) {
        if let Some(set) = self.cells.get_mut(&self.frame.cell_of(pos)) {
            set.remove(&id);
        }
    }
}

/// Replay `day_trips` under `plan`. Deterministic: trips in
/// (start_time, trip_id) order; the chosen bike is the nearest eligible
/// one, ties to the longest-idle, then the lowest bike ordinal.
pub fn simulate_dockless_day(
    day_trips: &TripSet,
    plan: &AllocationPlan,
    vs: &VirtualStationSet,
    cfg: &MatchConfig,
) -> Result<(UnmetReport, SimResult)> {
    let mut bikes: Vec<BikeState> = Vec::with_capacity(plan.total() as usize);
    for (&vs_id, &count) in &plan.allocation {
        let station = vs
            .stations()
            .get(vs_id as usize)
            .ok_or_else(|| Error::precondition(format!("plan references unknown virtual station {vs_id}")))?;
        for _ in 0..count {
            bikes.push(BikeState {
                pos: station.center,
                idle_since: i64::MIN,
                busy: false,
            });
        }
    }
    let total_bikes = bikes.len();

    let origin = vs
        .stations()
        .first()
        .map(|s| s.center)
        .unwrap_or(GeoPoint::new(0.0, 0.0));
    let mut index = BikeIndex {
        frame: GridFrame::new(origin, cfg.walk_radius_m.max(1.0)),
        cells: HashMap::new(),
    };
    for (i, b) in bikes.iter().enumerate() {
        index.insert(i as u32, b.pos);
    }

    // bikes in transit, keyed by (end_time, bike, destination)
    let mut in_transit: BinaryHeap<Reverse<(i64, u32)>> = BinaryHeap::new();
    let mut destinations: HashMap<u32, GeoPoint> = HashMap::new();

    let mut served = Vec::new();
    let mut unmet = Vec::new();
    let mut flows = PlaceFlows::default();
    let mut idle_count = total_bikes;

    for trip in day_trips.trips() {
        let origin_pt = trip.origin.point().ok_or_else(|| {
            Error::precondition(format!("trip {} has no coordinates", trip.trip_id))
        })?;
        let dest_pt = trip.destination.point().ok_or_else(|| {
            Error::precondition(format!("trip {} has no coordinates", trip.trip_id))
        })?;

        // release bikes whose trips have ended by now
        while let Some(&Reverse((end, bike))) = in_transit.peek() {
            if end > trip.start_time {
                break;
            }
            in_transit.pop();
            let pos = destinations.remove(&bike).expect("destination recorded");
            let b = &mut bikes[bike as usize];
            b.pos = pos;
            b.idle_since = end;
            b.busy = false;
            index.insert(bike, pos);
            idle_count += 1;
        }
        if idle_count + in_transit.len() != total_bikes {
            return Err(Error::consistency(format!(
                "bike count drifted at trip {}: {} idle + {} busy != {total_bikes}",
                trip.trip_id,
                idle_count,
                in_transit.len()
            )));
        }

        // nearest eligible idle bike within the walking radius
        let ((x0, y0), (x1, y1)) = index.frame.cells_covering(origin_pt, cfg.walk_radius_m);
        let mut best: Option<(f64, i64, u32)> = None;
        for cx in x0..=x1 {
            for cy in y0..=y1 {
                let Some(cell) = index.cells.get(&(cx, cy)) else { continue };
                for &id in cell {
                    let b = &bikes[id as usize];
                    debug_assert!(!b.busy);
                    if b.idle_since != i64::MIN
                        && b.idle_since + cfg.usage_interval_s > trip.start_time
                    {
                        continue;
                    }
                    let d = haversine(origin_pt, b.pos);
                    if d >= cfg.walk_radius_m {
                        continue;
                    }
                    let key = (d, b.idle_since, id);
                    let better = match best {
                        None => true,
                        Some(b0) => {
                            key.0 < b0.0
                                || (key.0 == b0.0 && (key.1 < b0.1 || (key.1 == b0.1 && key.2 < b0.2)))
                        }
                    };
                    if better {
                        best = Some(key);
                    }
                }
            }
        }

        match best {
            Some((_, _, bike)) => {
                let pickup_pos = bikes[bike as usize].pos;
                index.remove(bike, pickup_pos);
                bikes[bike as usize].busy = true;
                idle_count -= 1;
                in_transit.push(Reverse((trip.end_time, bike)));
                destinations.insert(bike, dest_pt);
                flows.record_move(assign_place(pickup_pos, vs).vs_id, assign_place(dest_pt, vs).vs_id);
                served.push(trip.trip_id);
            }
            None => unmet.push(trip.trip_id),
        }
    }

    // flush remaining transits
    while let Some(Reverse((end, bike))) = in_transit.pop() {
        let pos = destinations.remove(&bike).expect("destination recorded");
        let b = &mut bikes[bike as usize];
        b.pos = pos;
        b.idle_since = end;
        b.busy = false;
        idle_count += 1;
    }
    if idle_count != total_bikes {
        return Err(Error::consistency("bikes lost during simulation"));
    }

    let total = day_trips.len() as u64;
    let report = UnmetReport::from_counts(
        day_trips
            .trips()
            .first()
            .map(|t| t.start_date())
            .unwrap_or(plan.for_day),
        total,
        unmet.len() as u64,
        Default::default(),
    );
    Ok((
        report,
        SimResult {
            served,
            unmet,
            final_positions: bikes.iter().map(|b| b.pos).collect(),
            flows,
        },
    ))
}

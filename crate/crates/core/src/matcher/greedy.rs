//! Greedy chain construction: while unassigned trips remain, create a
//! bike at the earliest one and keep attaching the greedy successor.

use std::collections::{BTreeSet, HashMap};

use chrono::NaiveDate;

use crate::error::Result;
use crate::geo::{haversine, GridFrame};
use crate::ingest::{Trip, TripSet};
use crate::types::PlaceRef;

use super::{check_mode, place_distance_ok, BikeChain, FleetSolution, MatchConfig, Mode};

/// Reference successor rule, defined by linear scan over the pool.
///
/// Station mode: among pool trips at the bike's current station with
/// start_time >= available_from + c, the minimum start_time wins, ties
/// to the lowest trip_id. Dockless mode: among pool trips with origin
/// within w of the current position, minimum start_time wins, ties by
/// smaller origin distance, then lowest trip_id.
///
/// `build_min_fleet` uses indexed pools that implement the same rule;
/// tests cross-check the two paths.
pub fn greedy_successor(
    current_pos: &PlaceRef,
    available_from: i64,
    pool: &[&Trip],
    cfg: &MatchConfig,
) -> Option<u64> {
    let threshold = available_from + cfg.usage_interval_s;
    let mut best: Option<(i64, f64, u64)> = None;
    for t in pool {
        if t.start_time < threshold {
            continue;
        }
        if !place_distance_ok(current_pos, &t.origin, cfg) {
            continue;
        }
        let dist = match (cfg.mode, current_pos.point(), t.origin.point()) {
            (Mode::Dockless, Some(a), Some(b)) => haversine(a, b),
            _ => 0.0,
        };
        let key = (t.start_time, dist, t.trip_id);
        let better = match best {
            None => true,
            Some(b) => key.0 < b.0 || (key.0 == b.0 && (key.1 < b.1 || (key.1 == b.1 && key.2 < b.2))),
        };
        if better {
            best = Some(key);
        }
    }
    best.map(|(_, _, id)| id)
}

/// Per-station time-sorted queues; successor lookup is a range query.
struct StationPool {
    by_station: HashMap<u32, BTreeSet<(i64, u64)>>,
    idx_of: HashMap<u64, usize>,
}

impl StationPool {
    fn new(trips: &[Trip]) -> Self {
        let mut by_station: HashMap<u32, BTreeSet<(i64, u64)>> = HashMap::new();
        let mut idx_of = HashMap::with_capacity(trips.len());
        for (i, t) in trips.iter().enumerate() {
            by_station
                .entry(t.origin.station_id().unwrap())
                .or_default()
                .insert((t.start_time, t.trip_id));
            idx_of.insert(t.trip_id, i);
        }
        StationPool { by_station, idx_of }
    }

    fn remove(&mut self, t: &Trip) {
        if let Some(set) = self.by_station.get_mut(&t.origin.station_id().unwrap()) {
            set.remove(&(t.start_time, t.trip_id));
        }
    }

    fn successor(&self, station: u32, threshold: i64) -> Option<u64> {
        self.by_station
            .get(&station)?
            .range((threshold, 0)..)
            .next()
            .map(|&(_, id)| id)
    }
}

/// Grid-bucketed origins, each cell time-sorted; successor lookup scans
/// the cells covering the walking disk.
struct DocklessPool {
    frame: GridFrame,
    cells: HashMap<(i32, i32), BTreeSet<(i64, u64)>>,
    idx_of: HashMap<u64, usize>,
}

impl DocklessPool {
    fn new(trips: &[Trip], cfg: &MatchConfig) -> Self {
        let origin = trips
            .first()
            .and_then(|t| t.origin.point())
            .unwrap_or(crate::types::GeoPoint::new(0.0, 0.0));
        let frame = GridFrame::new(origin, cfg.walk_radius_m.max(1.0));
        let mut cells: HashMap<(i32, i32), BTreeSet<(i64, u64)>> = HashMap::new();
        let mut idx_of = HashMap::with_capacity(trips.len());
        for (i, t) in trips.iter().enumerate() {
            let cell = frame.cell_of(t.origin.point().unwrap());
            cells.entry(cell).or_default().insert((t.start_time, t.trip_id));
            idx_of.insert(t.trip_id, i);
        }
        DocklessPool { frame, cells, idx_of }
    }

    fn remove(&mut self, t: &Trip) {
        let cell = self.frame.cell_of(t.origin.point().unwrap());
        if let Some(set) = self.cells.get_mut(&cell) {
            set.remove(&(t.start_time, t.trip_id));
        }
    }

    fn successor(&self, trips: &[Trip], pos: crate::types::GeoPoint, threshold: i64, w: f64) -> Option<u64> {
        let ((x0, y0), (x1, y1)) = self.frame.cells_covering(pos, w);
        // Nearest cells first: the center cell usually yields a candidate
        // right away, which lets the start-time break prune the rest.
        // Cells entirely outside the disk cannot hold a match at all.
        let mut order: Vec<(f64, i32, i32)> = Vec::new();
        for cx in x0..=x1 {
            for cy in y0..=y1 {
                let d = self.frame.cell_min_distance(pos, cx, cy);
                if d < w {
                    order.push((d, cx, cy));
                }
            }
        }
        order.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut best: Option<(i64, f64, u64)> = None;
        for &(_, cx, cy) in &order {
            {
                let Some(set) = self.cells.get(&(cx, cy)) else { continue };
                let mut cell_start: Option<i64> = None;
                for &(start, id) in set.range((threshold, 0)..) {
                    if let Some(s) = cell_start {
                        if start > s {
                            break; // later starts in this cell cannot win
                        }
                    } else if let Some((bs, _, _)) = best {
                        if start > bs {
                            break; // another cell already has an earlier start
                        }
                    }
                    let t = &trips[self.idx_of[&id]];
                    let d = haversine(pos, t.origin.point().unwrap());
                    if d >= w {
                        continue;
                    }
                    cell_start.get_or_insert(start);
                    let key = (start, d, id);
                    let better = match best {
                        None => true,
                        Some(b) => {
                            key.0 < b.0 || (key.0 == b.0 && (key.1 < b.1 || (key.1 == b.1 && key.2 < b.2)))
                        }
                    };
                    if better {
                        best = Some(key);
                    }
                }
            }
        }
        best.map(|(_, _, id)| id)
    }
}

/// Assign all trips to as few bikes as possible with the greedy chain
/// procedure. Deterministic; exact for station mode.
pub fn build_min_fleet(day_trips: &TripSet, cfg: &MatchConfig) -> Result<FleetSolution> {
    let trips = day_trips.trips();
    check_mode(trips, cfg)?;
    let day = trips
        .first()
        .map(|t| t.start_date())
        .unwrap_or(NaiveDate::from_ymd_opt(1970, 1, 1).unwrap());

    let mut assigned = vec![false; trips.len()];
    let mut chains: Vec<BikeChain> = Vec::new();
    let mut assignment = std::collections::BTreeMap::new();

    let mut station_pool = (cfg.mode == Mode::Station).then(|| StationPool::new(trips));
    let mut dockless_pool = (cfg.mode == Mode::Dockless).then(|| DocklessPool::new(trips, cfg));

    for i in 0..trips.len() {
        if assigned[i] {
            continue;
        }
        let first = &trips[i];
        let bike_ord = chains.len() as u32;
        assigned[i] = true;
        match (&mut station_pool, &mut dockless_pool) {
            (Some(p), _) => p.remove(first),
            (_, Some(p)) => p.remove(first),
            _ => unreachable!(),
        }
        let mut chain = BikeChain {
            bike_ord,
            trip_ids: vec![first.trip_id],
            initial_place: first.origin,
            final_place: first.destination,
            available_from: first.end_time,
            current_pos: first.destination,
        };
        assignment.insert(first.trip_id, bike_ord);

        loop {
            let threshold = chain.available_from + cfg.usage_interval_s;
            let next_id = match (&station_pool, &dockless_pool) {
                (Some(p), _) => p.successor(chain.current_pos.station_id().unwrap(), threshold),
                (_, Some(p)) => p.successor(
                    trips,
                    chain.current_pos.point().unwrap(),
                    threshold,
                    cfg.walk_radius_m,
                ),
                _ => unreachable!(),
            };
            let Some(next_id) = next_id else { break };
            let idx = match (&station_pool, &dockless_pool) {
                (Some(p), _) => p.idx_of[&next_id],
                (_, Some(p)) => p.idx_of[&next_id],
                _ => unreachable!(),
            };
            let next = &trips[idx];
            assigned[idx] = true;
            match (&mut station_pool, &mut dockless_pool) {
                (Some(p), _) => p.remove(next),
                (_, Some(p)) => p.remove(next),
                _ => unreachable!(),
            }
            chain.trip_ids.push(next.trip_id);
            chain.final_place = next.destination;
            chain.available_from = next.end_time;
            chain.current_pos = next.destination;
            assignment.insert(next.trip_id, bike_ord);
        }
        chains.push(chain);
    }

    Ok(FleetSolution {
        chains,
        trip_assignment: assignment,
        day,
        config: *cfg,
    })
}

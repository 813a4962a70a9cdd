//! Scoring allocation plans against a day's actual trips: unmet trip
//! ratios (station-based and dockless bike-based methods), fleet
//! reduction metrics, and descriptive series statistics.

mod pipeline;
mod simulate;
mod stats;

pub use pipeline::{
    run_pipeline, served_station_flows, EvaluationReport, EvaluationRow, PipelineOptions,
};
pub use simulate::{simulate_dockless_day, SimResult};
pub use stats::{summary_stats, SeriesStats};

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::FleetSolution;
use crate::allocator::AllocationPlan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnmetReport {
    pub day: NaiveDate,
    pub total_trips: u64,
    pub unmet_trips: u64,
    pub unmet_ratio: f64,
    pub per_place_gap: BTreeMap<u32, u32>,
    /// Set on zero-trip days, where the ratio is 0 by convention.
    pub zero_trip_day: bool,
}

impl UnmetReport {
    fn from_counts(day: NaiveDate, total: u64, unmet: u64, gaps: BTreeMap<u32, u32>) -> Self {
        UnmetReport {
            day,
            total_trips: total,
            unmet_trips: unmet,
            unmet_ratio: if total == 0 { 0.0 } else { unmet as f64 / total as f64 },
            per_place_gap: gaps,
            zero_trip_day: total == 0,
        }
    }
}

/// Station-based unmet method: where the plan falls g short of demand,
/// the g chains with the latest first-use start times go unserved, and
/// every trip on them counts as unmet. Also returns the unmet bike ords
/// so callers can replay flows with the served chains only.
pub fn station_unmet_detail(
    actual_solution: &FleetSolution,
    plan: &AllocationPlan,
) -> Result<(UnmetReport, BTreeSet<u32>)> {
    let mut chains_by_station: BTreeMap<u32, Vec<(usize, u32, usize)>> = BTreeMap::new();
    let mut total_trips = 0u64;
    // the chains vector is ordered by first-trip start time, so the
    // position in it orders first use
    for (pos, chain) in actual_solution.chains.iter().enumerate() {
        total_trips += chain.trip_ids.len() as u64;
        let station = chain.initial_place.station_id().ok_or_else(|| {
            Error::precondition("station-based unmet method needs a station-mode solution")
        })?;
        chains_by_station
            .entry(station)
            .or_default()
            .push((pos, chain.bike_ord, chain.trip_ids.len()));
    }

    if !actual_solution.chains.is_empty() && !plan.allocation.is_empty() {
        let demand_stations: BTreeSet<u32> = chains_by_station.keys().copied().collect();
        let plan_stations: BTreeSet<u32> = plan.allocation.keys().copied().collect();
        if demand_stations.is_disjoint(&plan_stations) {
            return Err(Error::precondition(
                "plan and solution place universes are disjoint",
            ));
        }
    }

    let mut unmet_trips = 0u64;
    let mut gaps = BTreeMap::new();
    let mut unmet_chains = BTreeSet::new();
    for (&station, chains) in chains_by_station.iter_mut() {
        let demand = chains.len() as u32;
        let planned = plan.get(station);
        let g = demand.saturating_sub(planned);
        gaps.insert(station, g);
        if g == 0 {
            continue;
        }
        // latest first-use start loses
        chains.sort_by_key(|&(pos, ord, _)| (pos, ord));
        for &(_, ord, len) in chains.iter().rev().take(g as usize) {
            unmet_trips += len as u64;
            unmet_chains.insert(ord);
        }
    }

    Ok((
        UnmetReport::from_counts(actual_solution.day, total_trips, unmet_trips, gaps),
        unmet_chains,
    ))
}

pub fn unmet_ratio_station(actual_solution: &FleetSolution, plan: &AllocationPlan) -> Result<UnmetReport> {
    station_unmet_detail(actual_solution, plan).map(|(r, _)| r)
}

/// Fleet reduction ratio: (active - minimum) / active.
pub fn fleet_metrics(active_fleet: u64, minimum_fleet: u64) -> Result<f64> {
    if active_fleet == 0 {
        return Err(Error::precondition("active fleet size must be positive"));
    }
    Ok((active_fleet as f64 - minimum_fleet as f64) / active_fleet as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Trip, TripSet};
    use crate::matcher::{build_min_fleet, MatchConfig};
    use crate::types::PlaceRef;

    fn station_trip(id: u64, from: u32, to: u32, start: i64, end: i64) -> Trip {
        let base = NaiveDate::from_ymd_opt(2020, 1, 12)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()
            .and_utc()
            .timestamp();
        Trip {
            trip_id: id,
            origin: PlaceRef::station(from),
            destination: PlaceRef::station(to),
            start_time: base + start,
            end_time: base + end,
            company_id: None,
            bike_id_source: None,
            user_id_source: None,
        }
    }

    fn plan_for(day: NaiveDate, alloc: &[(u32, u32)]) -> AllocationPlan {
        AllocationPlan {
            for_day: day,
            allocation: alloc.iter().copied().collect(),
            window_u: 1,
            source_days: vec![day.pred_opt().unwrap()],
        }
    }

    #[test]
    fn full_plan_means_no_unmet() {
        let trips = TripSet::new(vec![
            station_trip(0, 1, 2, 100, 200),
            station_trip(1, 1, 2, 150, 250),
            station_trip(2, 2, 1, 300, 400),
        ]);
        let sol = build_min_fleet(&trips, &MatchConfig::station(0)).unwrap();
        let demand = crate::matcher::bike_demand_by_place(&sol, None).unwrap();
        let plan = plan_for(sol.day, &demand.demand.iter().map(|(&k, &v)| (k, v)).collect::<Vec<_>>());
        let report = unmet_ratio_station(&sol, &plan).unwrap();
        assert_eq!(report.unmet_trips, 0);
        assert_eq!(report.unmet_ratio, 0.0);
    }

    #[test]
    fn last_g_chains_go_unmet() {
        // 5 chains at station 1, lengths [2,1,3,1,2] in first-use order;
        // plan 3 -> the last 2 chains (lengths 1 and 2) are unmet = 3 trips
        let lengths = [2usize, 1, 3, 1, 2];
        let mut trips = Vec::new();
        let mut id = 0u64;
        for (c, &len) in lengths.iter().enumerate() {
            // each chain starts at station 1 and bounces to a private
            // station so chains cannot merge
            let alt = 100 + c as u32;
            let offset = c as i64 * 10; // staggers first-use order
            let mut t = offset;
            for leg in 0..len {
                let (from, to) = if leg % 2 == 0 { (1, alt) } else { (alt, 1) };
                trips.push(station_trip(id, from, to, t, t + 5));
                id += 1;
                t += 1000;
            }
        }
        let set = TripSet::new(trips);
        let sol = build_min_fleet(&set, &MatchConfig::station(0)).unwrap();
        assert_eq!(sol.fleet_size(), 5);
        let plan = plan_for(sol.day, &[(1, 3)]);
        let report = unmet_ratio_station(&sol, &plan).unwrap();
        assert_eq!(report.per_place_gap[&1], 2);
        assert_eq!(report.unmet_trips, 3);
    }

    #[test]
    fn disjoint_universes_is_an_error() {
        let trips = TripSet::new(vec![station_trip(0, 1, 2, 100, 200)]);
        let sol = build_min_fleet(&trips, &MatchConfig::station(0)).unwrap();
        let plan = plan_for(sol.day, &[(9, 1)]);
        assert!(unmet_ratio_station(&sol, &plan).is_err());
    }

    #[test]
    fn fleet_metrics_formula() {
        assert_eq!(fleet_metrics(100, 100).unwrap(), 0.0);
        assert!((fleet_metrics(100, 36).unwrap() - 0.64).abs() < 1e-12);
        assert!(fleet_metrics(0, 1).is_err());
    }
}

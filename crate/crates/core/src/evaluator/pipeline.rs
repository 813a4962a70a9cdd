//! Day-by-day planning loop: plan each day from the rolling window of
//! prior demand, score the plan against the day's actual trips, and
//! size the overnight repositioning toward the next day's plan.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Days, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocator::{
    compute_final_distribution, compute_rebalancing, rolling_max_allocation, AllocationPlan,
    PlaceFlows,
};
use crate::error::{Error, Result};
use crate::geo::VirtualStationSet;
use crate::ingest::{Trip, TripSet};
use crate::matcher::{bike_demand_by_place, build_min_fleet, DemandProfile, FleetSolution, MatchConfig, Mode};

use super::{simulate_dockless_day, station_unmet_detail, UnmetReport};

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub match_cfg: MatchConfig,
    /// Rolling-window lengths to evaluate, in days.
    pub u_values: Vec<u32>,
    /// Required in dockless mode.
    pub places: Option<VirtualStationSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub date: NaiveDate,
    pub u_days: u32,
    pub recommended_fleet: u64,
    /// Bikes moved overnight to realize the next day's plan.
    pub repositioning_next_day: u64,
    pub unmet_trip_ratio: f64,
    pub per_place_gap: BTreeMap<u32, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rows: Vec<EvaluationRow>,
}

impl EvaluationReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "date",
            "u_days",
            "recommended_fleet",
            "repositioning_next_day",
            "unmet_trip_ratio",
        ])?;
        for r in &self.rows {
            wtr.write_record([
                r.date.to_string(),
                r.u_days.to_string(),
                r.recommended_fleet.to_string(),
                r.repositioning_next_day.to_string(),
                format!("{:.6}", r.unmet_trip_ratio),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        w.write_all(b"\n")?;
        Ok(())
    }
}

/// Flows of a station-mode day, counting only the served chains.
pub fn served_station_flows(
    sol: &FleetSolution,
    trips: &TripSet,
    unmet: &std::collections::BTreeSet<u32>,
) -> PlaceFlows {
    let by_id: BTreeMap<u64, &Trip> = trips.trips().iter().map(|t| (t.trip_id, t)).collect();
    let mut flows = PlaceFlows::default();
    for chain in &sol.chains {
        if unmet.contains(&chain.bike_ord) {
            continue;
        }
        for tid in &chain.trip_ids {
            let t = by_id[tid];
            flows.record_move(
                t.origin.station_id().expect("station mode"),
                t.destination.station_id().expect("station mode"),
            );
        }
    }
    flows
}

struct DayData {
    date: NaiveDate,
    solution: FleetSolution,
    profile: DemandProfile,
}

fn window<'a>(
    profiles: &'a BTreeMap<NaiveDate, &DemandProfile>,
    target: NaiveDate,
    u: u32,
) -> Result<AllocationPlan> {
    let mut hist: Vec<DemandProfile> = Vec::with_capacity(u as usize);
    for back in 1..=u as u64 {
        if let Some(p) = profiles.get(&(target - Days::new(back))) {
            hist.push((*p).clone());
        }
    }
    rolling_max_allocation(&hist, u, target)
}

/// Run the plan/evaluate/rebalance loop over every day that has a full
/// window of history, for each window length in `opts.u_values`.
pub fn run_pipeline(
    days: &BTreeMap<NaiveDate, TripSet>,
    opts: &PipelineOptions,
) -> Result<EvaluationReport> {
    if days.is_empty() {
        return Err(Error::precondition("no days to evaluate"));
    }
    if opts.u_values.is_empty() {
        return Err(Error::precondition("no window lengths given"));
    }
    if opts.match_cfg.mode == Mode::Dockless && opts.places.is_none() {
        return Err(Error::precondition("dockless pipeline needs virtual stations"));
    }

    // min-fleet solve once per day, reused by every window
    let day_data: Vec<DayData> = days
        .par_iter()
        .map(|(&date, set)| {
            let mut solution = build_min_fleet(set, &opts.match_cfg)?;
            solution.day = date;
            let mut profile = bike_demand_by_place(&solution, opts.places.as_ref())?;
            profile.day = date;
            Ok(DayData { date, solution, profile })
        })
        .collect::<Result<_>>()?;
    let profiles: BTreeMap<NaiveDate, &DemandProfile> =
        day_data.iter().map(|d| (d.date, &d.profile)).collect();
    let first_date = *days.keys().next().unwrap();
    let last_date = *days.keys().next_back().unwrap();

    let mut jobs: Vec<(u32, &DayData)> = Vec::new();
    for &u in &opts.u_values {
        if u == 0 {
            return Err(Error::precondition("window u must be at least 1 day"));
        }
        let first_evaluable = first_date + Days::new(u as u64);
        if first_evaluable > last_date {
            return Err(Error::precondition(format!(
                "not enough history for u={u}: the first evaluable day would be {first_evaluable}"
            )));
        }
        for d in &day_data {
            if d.date >= first_evaluable {
                jobs.push((u, d));
            }
        }
    }

    let mut rows: Vec<EvaluationRow> = jobs
        .into_par_iter()
        .map(|(u, d)| -> Result<EvaluationRow> {
            let plan = window(&profiles, d.date, u)?;
            let trips = &days[&d.date];
            let (report, flows): (UnmetReport, PlaceFlows) = match opts.match_cfg.mode {
                Mode::Station => {
                    let (report, unmet) = station_unmet_detail(&d.solution, &plan)?;
                    let flows = served_station_flows(&d.solution, trips, &unmet);
                    (report, flows)
                }
                Mode::Dockless => {
                    let vs = opts.places.as_ref().expect("checked above");
                    let (report, sim) = simulate_dockless_day(trips, &plan, vs, &opts.match_cfg)?;
                    (report, sim.flows)
                }
            };
            let final_today = compute_final_distribution(&plan, &flows)?;
            // the next day's window ends today, so it is always available
            let plan_next = window(&profiles, d.date + Days::new(1), u)?;
            let repositioning = compute_rebalancing(&final_today, &plan_next).total_moves;
            Ok(EvaluationRow {
                date: d.date,
                u_days: u,
                recommended_fleet: plan.total(),
                repositioning_next_day: repositioning,
                unmet_trip_ratio: report.unmet_ratio,
                per_place_gap: report.per_place_gap,
            })
        })
        .collect::<Result<_>>()?;

    rows.sort_by_key(|r| (r.u_days, r.date));
    Ok(EvaluationReport { rows })
}

//! Allocation planning under future uncertainty: the rolling-window
//! maximum of historical per-place bike demand becomes the next day's
//! initial allocation, and static rebalancing tops places up from the
//! day's final distribution to the next plan.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::DemandProfile;

/// Planned initial bike counts per place for one day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub for_day: NaiveDate,
    pub allocation: BTreeMap<u32, u32>,
    pub window_u: u32,
    pub source_days: Vec<NaiveDate>,
}

impl AllocationPlan {
    /// Recommended fleet size.
    pub fn total(&self) -> u64 {
        self.allocation.values().map(|&v| v as u64).sum()
    }

    pub fn get(&self, place: u32) -> u32 {
        self.allocation.get(&place).copied().unwrap_or(0)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["day", "place_id", "count"])?;
        for (place, count) in &self.allocation {
            wtr.write_record([self.for_day.to_string(), place.to_string(), count.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Bike counts per place at the end of a day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaceCounts {
    pub day: NaiveDate,
    pub at_end: BTreeMap<u32, u32>,
}

impl PlaceCounts {
    pub fn total(&self) -> u64 {
        self.at_end.values().map(|&v| v as u64).sum()
    }
}

/// Move-in counts per place for midnight repositioning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RebalancingPlan {
    pub for_day: NaiveDate,
    pub move_in: BTreeMap<u32, u32>,
    pub total_moves: u64,
}

impl RebalancingPlan {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["day", "place_id", "count"])?;
        for (place, count) in &self.move_in {
            wtr.write_record([self.for_day.to_string(), place.to_string(), count.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Net inflow/outflow of bikes per place over a day, from served trips.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaceFlows {
    pub inflow: BTreeMap<u32, u32>,
    pub outflow: BTreeMap<u32, u32>,
}

impl PlaceFlows {
    pub fn record_move(&mut self, from: u32, to: u32) {
        *self.outflow.entry(from).or_insert(0) += 1;
        *self.inflow.entry(to).or_insert(0) += 1;
    }
}

/// Per-place maximum of the previous `u` days' demand. `u = 1`
/// reproduces the prior-day-repeat baseline. `history` must hold
/// exactly the u days immediately preceding `target_day`.
pub fn rolling_max_allocation(
    history: &[DemandProfile],
    u: u32,
    target_day: NaiveDate,
) -> Result<AllocationPlan> {
    if u == 0 {
        return Err(Error::precondition("window u must be at least 1 day"));
    }
    let want: Vec<NaiveDate> = (1..=u as u64)
        .rev()
        .map(|back| target_day - Days::new(back))
        .collect();
    let have: BTreeSet<NaiveDate> = history.iter().map(|p| p.day).collect();
    let missing: Vec<String> = want
        .iter()
        .filter(|d| !have.contains(d))
        .map(|d| d.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::precondition(format!(
            "history gap before {target_day}: missing {}",
            missing.join(", ")
        )));
    }
    let extra = history.iter().find(|p| !want.contains(&p.day));
    if let Some(p) = extra {
        return Err(Error::precondition(format!(
            "history contains {} outside the {u}-day window before {target_day}",
            p.day
        )));
    }

    let mut allocation: BTreeMap<u32, u32> = BTreeMap::new();
    for profile in history {
        for (&place, &demand) in &profile.demand {
            let slot = allocation.entry(place).or_insert(0);
            *slot = (*slot).max(demand);
        }
    }
    Ok(AllocationPlan {
        for_day: target_day,
        allocation,
        window_u: u,
        source_days: want,
    })
}

/// End-of-day distribution: initial + inflow - outflow per place, with
/// conservation checked. A negative intermediate count means the flows
/// did not come from a simulation of this plan.
pub fn compute_final_distribution(initial: &AllocationPlan, flows: &PlaceFlows) -> Result<PlaceCounts> {
    let mut at_end: BTreeMap<u32, i64> = initial
        .allocation
        .iter()
        .map(|(&p, &c)| (p, c as i64))
        .collect();
    for (&p, &c) in &flows.inflow {
        *at_end.entry(p).or_insert(0) += c as i64;
    }
    for (&p, &c) in &flows.outflow {
        *at_end.entry(p).or_insert(0) -= c as i64;
    }
    let mut counts = BTreeMap::new();
    for (p, c) in at_end {
        if c < 0 {
            return Err(Error::consistency(format!(
                "place {p} ends the day with {c} bikes; flows disagree with the plan"
            )));
        }
        counts.insert(p, c as u32);
    }
    let result = PlaceCounts {
        day: initial.for_day,
        at_end: counts,
    };
    let in_total: u64 = flows.inflow.values().map(|&v| v as u64).sum();
    let out_total: u64 = flows.outflow.values().map(|&v| v as u64).sum();
    if in_total != out_total || result.total() != initial.total() {
        return Err(Error::consistency(format!(
            "bikes not conserved: {} at start, {} at end",
            initial.total(),
            result.total()
        )));
    }
    Ok(result)
}

/// Move-in per place: max(0, plan_tomorrow - final_today). Surplus bikes
/// stay where they are; only move-ins are counted.
pub fn compute_rebalancing(final_today: &PlaceCounts, plan_tomorrow: &AllocationPlan) -> RebalancingPlan {
    let mut move_in = BTreeMap::new();
    let mut total = 0u64;
    for (&place, &planned) in &plan_tomorrow.allocation {
        let available = final_today.at_end.get(&place).copied().unwrap_or(0);
        let gap = planned.saturating_sub(available);
        move_in.insert(place, gap);
        total += gap as u64;
    }
    RebalancingPlan {
        for_day: plan_tomorrow.for_day,
        move_in,
        total_moves: total,
    }
}

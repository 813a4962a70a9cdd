//! What-if scenarios: how the minimum fleet grows when users keep a
//! distance interval between rides, and how much a merged multi-company
//! fleet saves over per-company fleets.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{split_by_company, split_by_day, TripSet};
use crate::matcher::{build_min_fleet, MatchConfig};

/// Minimum fleet over a multi-day set: per-day solves, summed. Bikes do
/// not carry over between days here; each day is planned on its own.
pub fn fleet_over_days(trips: &TripSet, cfg: &MatchConfig) -> Result<u64> {
    let mut total = 0u64;
    for (_, day) in split_by_day(trips) {
        total += build_min_fleet(&day, cfg)?.fleet_size() as u64;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub c_seconds: i64,
    pub fleet_size: u64,
    /// Growth relative to the smallest interval in the sweep.
    pub relative_increase: f64,
}

/// Fleet size under each usage interval, smallest interval first. The
/// smallest value is the baseline for `relative_increase`.
pub fn sweep_usage_interval(
    trips: &TripSet,
    base_cfg: &MatchConfig,
    c_values: &[i64],
) -> Result<Vec<SweepRow>> {
    if c_values.is_empty() {
        return Err(Error::precondition("empty usage interval sweep"));
    }
    if c_values.iter().any(|&c| c < 0) {
        return Err(Error::precondition("usage interval must be non-negative"));
    }
    let mut cs: Vec<i64> = c_values.to_vec();
    cs.sort_unstable();
    cs.dedup();

    let mut rows = Vec::with_capacity(cs.len());
    let mut baseline = 0u64;
    for (i, &c) in cs.iter().enumerate() {
        let cfg = MatchConfig {
            usage_interval_s: c,
            ..*base_cfg
        };
        let fleet = fleet_over_days(trips, &cfg)?;
        if i == 0 {
            baseline = fleet;
        }
        let relative_increase = if baseline == 0 {
            0.0
        } else {
            (fleet as f64 - baseline as f64) / baseline as f64
        };
        rows.push(SweepRow {
            c_seconds: c,
            fleet_size: fleet,
            relative_increase,
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["c_seconds", "fleet_size", "relative_increase"])?;
    for r in rows {
        wtr.write_record([
            r.c_seconds.to_string(),
            r.fleet_size.to_string(),
            format!("{:.6}", r.relative_increase),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanyStats {
    pub fleet: u64,
    pub trips: u64,
    /// Trips per bike.
    pub turnover: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformComparison {
    pub per_company: BTreeMap<u16, CompanyStats>,
    pub sum_of_fleets: u64,
    pub merged_fleet: u64,
    /// Fraction of the per-company fleet total saved by merging.
    pub reduction_vs_sum: f64,
    /// Comparison is vacuous with one company; merged == sum then.
    pub single_company: bool,
}

impl PlatformComparison {
    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        w.write_all(b"\n")?;
        Ok(())
    }
}

/// Fleet needed per company versus one shared fleet over the same trips.
pub fn compare_platforms(trips: &TripSet, cfg: &MatchConfig) -> Result<PlatformComparison> {
    if trips.len() == 0 {
        return Err(Error::precondition("no trips to compare"));
    }
    let mut per_company = BTreeMap::new();
    let mut sum_of_fleets = 0u64;
    let by_company = split_by_company(trips)?;
    for (company, set) in &by_company {
        let fleet = fleet_over_days(set, cfg)?;
        sum_of_fleets += fleet;
        per_company.insert(
            *company,
            CompanyStats {
                fleet,
                trips: set.len() as u64,
                turnover: if fleet == 0 { 0.0 } else { set.len() as f64 / fleet as f64 },
            },
        );
    }
    let merged_fleet = fleet_over_days(trips, cfg)?;
    let reduction_vs_sum = if sum_of_fleets == 0 {
        0.0
    } else {
        (sum_of_fleets as f64 - merged_fleet as f64) / sum_of_fleets as f64
    };
    Ok(PlatformComparison {
        per_company,
        sum_of_fleets,
        merged_fleet,
        reduction_vs_sum,
        single_company: by_company.len() == 1,
    })
}

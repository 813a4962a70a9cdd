//! Subcommand implementations: thin wrappers that wire files into the
//! library calls and write deterministic CSV/JSON artifacts.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use bikefleet_core::allocator::{
    compute_final_distribution, compute_rebalancing, rolling_max_allocation,
};
use bikefleet_core::evaluator::{
    run_pipeline, served_station_flows, simulate_dockless_day, station_unmet_detail,
    PipelineOptions,
};
use bikefleet_core::geo::{identify_virtual_stations, VirtualStationSet};
use bikefleet_core::ingest::{
    clean_trips, parse_stations, parse_trips, split_by_day, write_trips_csv, CleaningReport,
    Schema, StationRegistry, TripSet,
};
use bikefleet_core::matcher::{bike_demand_by_place, build_min_fleet, DemandProfile, Mode};
use bikefleet_core::scenarios::{compare_platforms, sweep_usage_interval, write_sweep_csv};
use bikefleet_core::synth::{generate_trips, place_anchors, SynthConfig};
use bikefleet_core::{Error, Result};
use chrono::{Days, NaiveDate};
use serde::Serialize;

use crate::config::RunConfig;

pub struct Ctx {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
}

impl Ctx {
    pub fn schema(&self) -> Schema {
        match self.cfg.mode {
            Mode::Station => Schema::Sbbs,
            Mode::Dockless => Schema::Dbs,
        }
    }

    fn out(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out_dir.join(name);
        Ok(BufWriter::new(File::create(&path).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })?))
    }

    /// Provenance echo written beside every command's outputs.
    pub fn write_resolved_config(&self, command: &str, inputs: &[&Path]) -> Result<()> {
        #[derive(Serialize)]
        struct Echo<'a> {
            command: &'a str,
            inputs: Vec<String>,
            config: &'a RunConfig,
        }
        let echo = Echo {
            command,
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            config: &self.cfg,
        };
        write_json(self.out("resolved_config.json")?, &echo)
    }
}

fn write_json<W: std::io::Write, T: Serialize>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    w.write_all(b"\n")?;
    Ok(())
}

fn open(path: &Path) -> Result<File> {
    File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_registry(path: Option<&Path>) -> Result<Option<StationRegistry>> {
    path.map(|p| parse_stations(open(p)?)).transpose()
}

fn load_trips(ctx: &Ctx, input: &Path, registry: Option<&StationRegistry>) -> Result<(TripSet, CleaningReport)> {
    let raw = parse_trips(open(input)?, ctx.schema())?;
    clean_trips(&raw, &ctx.cfg.bounds, registry)
}

fn load_virtual_stations(path: &Path) -> Result<VirtualStationSet> {
    VirtualStationSet::read_json(open(path)?)
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    s.parse()
        .map_err(|_| Error::schema(format!("bad date '{s}', expected YYYY-MM-DD")))
}

pub fn cmd_clean(ctx: &Ctx, input: &Path, registry_path: Option<&Path>) -> Result<()> {
    ctx.write_resolved_config("clean", &[input])?;
    let registry = load_registry(registry_path)?;
    let (set, report) = load_trips(ctx, input, registry.as_ref())?;
    write_trips_csv(set.trips(), ctx.schema(), ctx.out("cleaned.csv")?)?;
    write_json(ctx.out("report.json")?, &report)?;
    println!(
        "kept {} of {} rows ({} dropped)",
        report.kept,
        report.total_rows,
        report.total_rows - report.kept
    );
    Ok(())
}

pub fn cmd_stations(ctx: &Ctx, input: &Path) -> Result<()> {
    ctx.write_resolved_config("stations", &[input])?;
    if ctx.cfg.mode != Mode::Dockless {
        return Err(Error::precondition("station identification needs --mode dockless"));
    }
    let (set, _) = load_trips(ctx, input, None)?;
    let days = split_by_day(&set);
    let vs = identify_virtual_stations(&days, &ctx.cfg.cluster_params(), ctx.cfg.seed)?;
    vs.write_json(ctx.out("stations.json")?)?;
    vs.write_csv(ctx.out("stations.csv")?)?;
    println!("identified {} virtual stations", vs.len());
    Ok(())
}

/// Per-day demand profiles, shared by minfleet/allocate/rebalance.
fn daily_demand(
    ctx: &Ctx,
    days: &BTreeMap<NaiveDate, TripSet>,
    vs: Option<&VirtualStationSet>,
) -> Result<BTreeMap<NaiveDate, DemandProfile>> {
    let cfg = ctx.cfg.match_config();
    let mut out = BTreeMap::new();
    for (&date, set) in days {
        let mut sol = build_min_fleet(set, &cfg)?;
        sol.day = date;
        let mut profile = bike_demand_by_place(&sol, vs)?;
        profile.day = date;
        out.insert(date, profile);
    }
    Ok(out)
}

pub fn cmd_minfleet(ctx: &Ctx, input: &Path, stations: Option<&Path>) -> Result<()> {
    ctx.write_resolved_config("minfleet", &[input])?;
    let vs = stations.map(load_virtual_stations).transpose()?;
    if ctx.cfg.mode == Mode::Dockless && vs.is_none() {
        return Err(Error::precondition("dockless minfleet needs --stations-file"));
    }
    let (set, _) = load_trips(ctx, input, None)?;
    let days = split_by_day(&set);
    let cfg = ctx.cfg.match_config();

    let mut fleet_csv = csv::Writer::from_writer(ctx.out("minfleet.csv")?);
    fleet_csv.write_record(["date", "trips", "fleet_size"])?;
    let mut demand_csv = csv::Writer::from_writer(ctx.out("demand.csv")?);
    demand_csv.write_record(["day", "place_id", "bike_demand"])?;
    for (date, day) in &days {
        let mut sol = build_min_fleet(day, &cfg)?;
        sol.day = *date;
        fleet_csv.write_record([
            date.to_string(),
            day.len().to_string(),
            sol.fleet_size().to_string(),
        ])?;
        let mut profile = bike_demand_by_place(&sol, vs.as_ref())?;
        profile.day = *date;
        for (place, count) in &profile.demand {
            demand_csv.write_record([date.to_string(), place.to_string(), count.to_string()])?;
        }
        println!("{date}: {} trips, fleet {}", day.len(), sol.fleet_size());
    }
    fleet_csv.flush()?;
    demand_csv.flush()?;
    Ok(())
}

pub fn cmd_allocate(ctx: &Ctx, input: &Path, target: &str, stations: Option<&Path>) -> Result<()> {
    ctx.write_resolved_config("allocate", &[input])?;
    let target = parse_date(target)?;
    let vs = stations.map(load_virtual_stations).transpose()?;
    if ctx.cfg.mode == Mode::Dockless && vs.is_none() {
        return Err(Error::precondition("dockless allocation needs --stations-file"));
    }
    let (set, _) = load_trips(ctx, input, None)?;
    let days = split_by_day(&set);
    let window: BTreeMap<NaiveDate, TripSet> = days
        .into_iter()
        .filter(|(d, _)| *d < target && *d >= target - Days::new(ctx.cfg.u_days as u64))
        .collect();
    let profiles = daily_demand(ctx, &window, vs.as_ref())?;
    let history: Vec<DemandProfile> = profiles.into_values().collect();
    let plan = rolling_max_allocation(&history, ctx.cfg.u_days, target)?;
    plan.write_csv(ctx.out("allocation.csv")?)?;
    println!("{target}: recommended fleet {}", plan.total());
    Ok(())
}

pub fn cmd_rebalance(ctx: &Ctx, input: &Path, date: &str, stations: Option<&Path>) -> Result<()> {
    ctx.write_resolved_config("rebalance", &[input])?;
    let date = parse_date(date)?;
    let vs = stations.map(load_virtual_stations).transpose()?;
    if ctx.cfg.mode == Mode::Dockless && vs.is_none() {
        return Err(Error::precondition("dockless rebalancing needs --stations-file"));
    }
    let (set, _) = load_trips(ctx, input, None)?;
    let days = split_by_day(&set);
    let today = days
        .get(&date)
        .ok_or_else(|| Error::precondition(format!("no trips on {date}")))?;
    let u = ctx.cfg.u_days as u64;
    let window = |target: NaiveDate| -> BTreeMap<NaiveDate, TripSet> {
        days.iter()
            .filter(|(d, _)| **d < target && **d >= target - Days::new(u))
            .map(|(d, s)| (*d, TripSet::new(s.trips().to_vec())))
            .collect()
    };

    let profiles_today = daily_demand(ctx, &window(date), vs.as_ref())?;
    let plan_today = rolling_max_allocation(
        &profiles_today.into_values().collect::<Vec<_>>(),
        ctx.cfg.u_days,
        date,
    )?;
    let cfg = ctx.cfg.match_config();
    let flows = match ctx.cfg.mode {
        Mode::Station => {
            let mut sol = build_min_fleet(today, &cfg)?;
            sol.day = date;
            let (_, unmet) = station_unmet_detail(&sol, &plan_today)?;
            served_station_flows(&sol, today, &unmet)
        }
        Mode::Dockless => {
            let vs = vs.as_ref().expect("checked above");
            simulate_dockless_day(today, &plan_today, vs, &cfg)?.1.flows
        }
    };
    let final_today = compute_final_distribution(&plan_today, &flows)?;

    let tomorrow = date + Days::new(1);
    let profiles_next = daily_demand(ctx, &window(tomorrow), vs.as_ref())?;
    let plan_next = rolling_max_allocation(
        &profiles_next.into_values().collect::<Vec<_>>(),
        ctx.cfg.u_days,
        tomorrow,
    )?;
    let reb = compute_rebalancing(&final_today, &plan_next);
    reb.write_csv(ctx.out("rebalancing.csv")?)?;
    println!("{tomorrow}: {} bikes to move in overnight", reb.total_moves);
    Ok(())
}

pub fn cmd_evaluate(ctx: &Ctx, input: &Path, u_list: &str, stations: Option<&Path>) -> Result<()> {
    ctx.write_resolved_config("evaluate", &[input])?;
    let u_values: Vec<u32> = u_list
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| Error::schema(format!("bad u value '{p}'"))))
        .collect::<Result<_>>()?;
    let vs = stations.map(load_virtual_stations).transpose()?;
    let (set, _) = load_trips(ctx, input, None)?;
    let days = split_by_day(&set);
    let report = run_pipeline(
        &days,
        &PipelineOptions {
            match_cfg: ctx.cfg.match_config(),
            u_values,
            places: vs,
        },
    )?;
    report.write_csv(ctx.out("evaluation.csv")?)?;
    report.write_json(ctx.out("evaluation.json")?)?;
    for r in &report.rows {
        println!(
            "{} u={}: fleet {}, unmet {:.2}%, reposition {}",
            r.date,
            r.u_days,
            r.recommended_fleet,
            r.unmet_trip_ratio * 100.0,
            r.repositioning_next_day
        );
    }
    Ok(())
}

pub fn cmd_scenario_distancing(ctx: &Ctx, input: &Path, c_list: &str) -> Result<()> {
    ctx.write_resolved_config("scenario-distancing", &[input])?;
    let c_values: Vec<i64> = c_list
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| Error::schema(format!("bad c value '{p}'"))))
        .collect::<Result<_>>()?;
    let (set, _) = load_trips(ctx, input, None)?;
    let rows = sweep_usage_interval(&set, &ctx.cfg.match_config(), &c_values)?;
    write_sweep_csv(&rows, ctx.out("distancing.csv")?)?;
    for r in &rows {
        println!(
            "c={}s: fleet {} (+{:.1}%)",
            r.c_seconds,
            r.fleet_size,
            r.relative_increase * 100.0
        );
    }
    Ok(())
}

pub fn cmd_scenario_platform(ctx: &Ctx, input: &Path) -> Result<()> {
    ctx.write_resolved_config("scenario-platform", &[input])?;
    let (set, _) = load_trips(ctx, input, None)?;
    let cmp = compare_platforms(&set, &ctx.cfg.match_config())?;
    cmp.write_json(ctx.out("platform.json")?)?;
    if cmp.single_company {
        eprintln!("warning: only one company in the data; merged fleet equals the sum");
    }
    println!(
        "per-company total {}, merged {} ({:.1}% saved)",
        cmp.sum_of_fleets,
        cmp.merged_fleet,
        cmp.reduction_vs_sum * 100.0
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub struct SynthArgs {
    pub n_places: usize,
    pub days: usize,
    pub start_date: String,
    pub base_daily_trips: usize,
    pub weekday_factor: f64,
    pub weekend_factor: f64,
    pub noise_cv: f64,
    pub duration_mean: f64,
    pub duration_spread: f64,
    pub od_concentration: f64,
    pub jitter: f64,
    pub n_companies: u16,
}

pub fn cmd_synth(ctx: &Ctx, args: &SynthArgs) -> Result<()> {
    ctx.write_resolved_config("synth", &[])?;
    let defaults = SynthConfig::default();
    let bbox = if ctx.cfg.bounds == bikefleet_core::types::Bounds::new(-90.0, -180.0, 90.0, 180.0) {
        defaults.bbox // a city, not the globe
    } else {
        ctx.cfg.bounds
    };
    let cfg = SynthConfig {
        n_places: args.n_places,
        bbox,
        days: args.days,
        start_date: parse_date(&args.start_date)?,
        base_daily_trips: args.base_daily_trips,
        weekday_factor: args.weekday_factor,
        weekend_factor: args.weekend_factor,
        daily_noise_cv: args.noise_cv,
        duration_mean_s: args.duration_mean,
        duration_spread: args.duration_spread,
        od_concentration: args.od_concentration,
        mode: ctx.cfg.mode,
        dockless_jitter_m: args.jitter,
        n_companies: args.n_companies,
        seed: ctx.cfg.seed,
    };
    let set = generate_trips(&cfg)?;
    write_trips_csv(set.trips(), ctx.schema(), ctx.out("trips.csv")?)?;
    if cfg.mode == Mode::Station {
        let mut wtr = csv::Writer::from_writer(ctx.out("stations.csv")?);
        wtr.write_record(["station_id", "station_name", "lat", "lon"])?;
        for (i, p) in place_anchors(&cfg)?.iter().enumerate() {
            wtr.write_record([
                i.to_string(),
                format!("P{i}"),
                format!("{:.7}", p.lat),
                format!("{:.7}", p.lon),
            ])?;
        }
        wtr.flush()?;
    }
    write_json(ctx.out("synth_config.json")?, &cfg)?;
    println!("generated {} trips over {} days", set.len(), cfg.days);
    Ok(())
}

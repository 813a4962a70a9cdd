//! Run configuration: defaults, overridden by a flat key=value config
//! file, overridden by command-line flags. The resolved result is echoed
//! as JSON beside every command's outputs.

use std::collections::BTreeMap;
use std::path::Path;

use bikefleet_core::geo::ClusterParams;
use bikefleet_core::matcher::{MatchConfig, Mode};
use bikefleet_core::types::Bounds;
use bikefleet_core::{Error, Result};
use clap::Args;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub w_meters: f64,
    pub c_seconds: i64,
    pub u_days: u32,
    pub seed: u64,
    pub bounds: Bounds,
    pub k: Option<usize>,
    pub k_grid: Option<Vec<usize>>,
    pub eps_meters: f64,
    pub min_pts: usize,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Station,
            w_meters: 250.0,
            c_seconds: 0,
            u_days: 7,
            seed: 42,
            // whole-globe default; narrow via --bounds for real datasets
            bounds: Bounds::new(-90.0, -180.0, 90.0, 180.0),
            k: None,
            k_grid: None,
            eps_meters: 250.0,
            min_pts: 5,
            jobs: None,
        }
    }
}

/// Flags shared by every subcommand; unset flags fall back to the config
/// file, then to defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// station (sbbs) or dockless (dbs)
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Walking radius w in meters
    #[arg(long, global = true)]
    pub w_meters: Option<f64>,
    /// Usage interval c in seconds
    #[arg(long, global = true)]
    pub c_seconds: Option<i64>,
    /// Allocation window u in days
    #[arg(long, global = true)]
    pub u_days: Option<u32>,
    /// Root seed for all randomness
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Study area as min_lat,min_lon,max_lat,max_lon
    #[arg(long, global = true)]
    pub bounds: Option<String>,
    /// Fixed virtual-station count
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Comma-separated k values for the elbow search
    #[arg(long, global = true)]
    pub k_grid: Option<String>,
    /// Density clustering radius in meters
    #[arg(long, global = true)]
    pub eps_meters: Option<f64>,
    /// Density clustering minimum neighborhood size
    #[arg(long, global = true)]
    pub min_pts: Option<usize>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

fn parse_key<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::schema(format!("config key {key}: bad value '{v}'"))),
    }
}

pub fn parse_bounds(s: &str) -> Result<Bounds> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::schema(format!("bounds '{s}' are not four numbers")))?;
    if parts.len() != 4 {
        return Err(Error::schema(format!(
            "bounds '{s}' must be min_lat,min_lon,max_lat,max_lon"
        )));
    }
    let b = Bounds::new(parts[0], parts[1], parts[2], parts[3]);
    if b.is_degenerate() {
        return Err(Error::precondition(format!("degenerate bounds '{s}'")));
    }
    Ok(b)
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::schema(format!("bad list entry '{p}'")))
        })
        .collect()
}

/// Flat key=value file; keys mirror the long flag names with underscores.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::schema(format!(
                "{}:{}: expected key=value, got '{line}'",
                path.display(),
                no + 1
            )));
        };
        map.insert(key.trim().replace('-', "_"), value.trim().to_string());
    }
    Ok(map)
}

pub fn resolve(args: &CommonArgs, file: &BTreeMap<String, String>) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();

    if let Some(m) = parse_key::<String>(file, "mode")? {
        cfg.mode = m.parse()?;
    }
    if let Some(v) = parse_key(file, "w_meters")? {
        cfg.w_meters = v;
    }
    if let Some(v) = parse_key(file, "c_seconds")? {
        cfg.c_seconds = v;
    }
    if let Some(v) = parse_key(file, "u_days")? {
        cfg.u_days = v;
    }
    if let Some(v) = parse_key(file, "seed")? {
        cfg.seed = v;
    }
    if let Some(v) = parse_key::<String>(file, "bounds")? {
        cfg.bounds = parse_bounds(&v)?;
    }
    cfg.k = parse_key(file, "k")?;
    if let Some(v) = parse_key::<String>(file, "k_grid")? {
        cfg.k_grid = Some(parse_usize_list(&v)?);
    }
    if let Some(v) = parse_key(file, "eps_meters")? {
        cfg.eps_meters = v;
    }
    if let Some(v) = parse_key(file, "min_pts")? {
        cfg.min_pts = v;
    }
    cfg.jobs = parse_key(file, "jobs")?.or(cfg.jobs);

    if let Some(m) = &args.mode {
        cfg.mode = m.parse()?;
    }
    if let Some(v) = args.w_meters {
        cfg.w_meters = v;
    }
    if let Some(v) = args.c_seconds {
        cfg.c_seconds = v;
    }
    if let Some(v) = args.u_days {
        cfg.u_days = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(b) = &args.bounds {
        cfg.bounds = parse_bounds(b)?;
    }
    if args.k.is_some() {
        cfg.k = args.k;
    }
    if let Some(g) = &args.k_grid {
        cfg.k_grid = Some(parse_usize_list(g)?);
    }
    if let Some(v) = args.eps_meters {
        cfg.eps_meters = v;
    }
    if let Some(v) = args.min_pts {
        cfg.min_pts = v;
    }
    if args.jobs.is_some() {
        cfg.jobs = args.jobs;
    }

    if cfg.w_meters <= 0.0 {
        return Err(Error::precondition("w_meters must be positive"));
    }
    if cfg.c_seconds < 0 {
        return Err(Error::precondition("c_seconds must be non-negative"));
    }
    if cfg.u_days == 0 {
        return Err(Error::precondition("u_days must be at least 1"));
    }
    if cfg.k.is_some() && cfg.k_grid.is_some() {
        return Err(Error::precondition("k and k_grid are mutually exclusive"));
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn match_config(&self) -> MatchConfig {
        MatchConfig {
            mode: self.mode,
            walk_radius_m: self.w_meters,
            usage_interval_s: self.c_seconds,
        }
    }

    pub fn cluster_params(&self) -> ClusterParams {
        ClusterParams {
            eps_m: self.eps_meters,
            min_pts: self.min_pts,
            k: self.k,
            // default elbow grid when nothing was requested
            k_grid: match (&self.k, &self.k_grid) {
                (None, None) => Some((1..=10).collect()),
                _ => self.k_grid.clone(),
            },
            ..ClusterParams::default()
        }
    }
}

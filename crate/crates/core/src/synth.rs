//! Seeded synthetic trip generator with weekly seasonality: a skewed set
//! of popular places, weekday/weekend volume factors, lognormal daily
//! noise, bimodal commuter start times, and optional dockless jitter.

use chrono::{Datelike, Days, NaiveDate};
use rand::prelude::*;
use rand::distributions::WeightedIndex;
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::EARTH_RADIUS_M;
use crate::ingest::{Trip, TripSet};
use crate::matcher::Mode;
use crate::types::{Bounds, GeoPoint, PlaceRef};

const METERS_PER_DEG: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_places: usize,
    pub bbox: Bounds,
    pub days: usize,
    pub start_date: NaiveDate,
    pub base_daily_trips: usize,
    pub weekday_factor: f64,
    pub weekend_factor: f64,
    /// Coefficient of variation of the lognormal daily volume noise.
    pub daily_noise_cv: f64,
    pub duration_mean_s: f64,
    /// Coefficient of variation of the lognormal trip duration.
    pub duration_spread: f64,
    /// Skew of the place popularity distribution; 0 is uniform.
    pub od_concentration: f64,
    pub mode: Mode,
    pub dockless_jitter_m: f64,
    pub n_companies: u16,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_places: 50,
            bbox: Bounds::new(31.95, 118.65, 32.10, 118.85),
            days: 14,
            start_date: NaiveDate::from_ymd_opt(2020, 1, 6).unwrap(),
            base_daily_trips: 5000,
            weekday_factor: 1.0,
            weekend_factor: 0.6,
            daily_noise_cv: 0.08,
            duration_mean_s: 900.0,
            duration_spread: 0.5,
            od_concentration: 1.0,
            mode: Mode::Station,
            dockless_jitter_m: 120.0,
            n_companies: 1,
            seed: 42,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n_places == 0 {
            return Err(Error::precondition("n_places must be positive"));
        }
        if self.days == 0 {
            return Err(Error::precondition("days must be at least 1"));
        }
        if self.bbox.is_degenerate() {
            return Err(Error::precondition("degenerate bbox"));
        }
        if self.weekday_factor <= 0.0 || self.weekend_factor <= 0.0 {
            return Err(Error::precondition("day-of-week factors must be positive"));
        }
        if self.daily_noise_cv < 0.0 || self.duration_spread < 0.0 {
            return Err(Error::precondition("noise parameters must be non-negative"));
        }
        if self.duration_mean_s <= 0.0 {
            return Err(Error::precondition("duration_mean_s must be positive"));
        }
        if self.dockless_jitter_m < 0.0 {
            return Err(Error::precondition("dockless_jitter_m must be non-negative"));
        }
        if self.n_companies == 0 {
            return Err(Error::precondition("n_companies must be at least 1"));
        }
        Ok(())
    }
}

/// Lognormal with mean `mean` and coefficient of variation `cv`.
fn lognormal(mean: f64, cv: f64) -> LogNormal<f64> {
    let sigma2 = (1.0 + cv * cv).ln();
    let mu = mean.ln() - sigma2 / 2.0;
    LogNormal::new(mu, sigma2.sqrt()).expect("finite parameters")
}

fn clamp_into(bbox: &Bounds, p: GeoPoint) -> GeoPoint {
    GeoPoint::new(
        p.lat.clamp(bbox.min_lat, bbox.max_lat),
        p.lon.clamp(bbox.min_lon, bbox.max_lon),
    )
}

fn jitter(rng: &mut ChaCha8Rng, anchor: GeoPoint, radius_m: f64, bbox: &Bounds) -> GeoPoint {
    let r = radius_m * rng.gen::<f64>().sqrt();
    let theta = rng.gen::<f64>() * std::f64::consts::TAU;
    let p = GeoPoint::new(
        anchor.lat + r * theta.sin() / METERS_PER_DEG,
        anchor.lon + r * theta.cos() / (METERS_PER_DEG * anchor.lat.to_radians().cos()),
    );
    clamp_into(bbox, p)
}

/// Expected trip count for one calendar day, before noise.
pub fn expected_daily_trips(cfg: &SynthConfig, date: NaiveDate) -> f64 {
    let factor = if date.weekday().number_from_monday() <= 5 {
        cfg.weekday_factor
    } else {
        cfg.weekend_factor
    };
    cfg.base_daily_trips as f64 * factor
}

/// Generate a deterministic trip history. Trip ids are 0.. in start-time
/// order; every trip lies inside `cfg.bbox` with start < end.
pub fn generate_trips(cfg: &SynthConfig) -> Result<TripSet> {
    cfg.validate()?;
    let mut root = ChaCha8Rng::seed_from_u64(cfg.seed);

    let anchors: Vec<GeoPoint> = (0..cfg.n_places)
        .map(|_| {
            GeoPoint::new(
                root.gen_range(cfg.bbox.min_lat..cfg.bbox.max_lat),
                root.gen_range(cfg.bbox.min_lon..cfg.bbox.max_lon),
            )
        })
        .collect();
    // place i has popularity rank i
    let weights: Vec<f64> = (0..cfg.n_places)
        .map(|i| 1.0 / ((i + 1) as f64).powf(cfg.od_concentration))
        .collect();
    let popularity = WeightedIndex::new(&weights).expect("positive weights");

    let day_seeds: Vec<u64> = (0..cfg.days).map(|_| root.gen()).collect();
    let volume_noise = lognormal(1.0, cfg.daily_noise_cv.max(1e-12));
    let duration = lognormal(cfg.duration_mean_s, cfg.duration_spread.max(1e-12));
    let morning = Normal::new(8.0 * 3600.0, 3600.0).unwrap();
    let evening = Normal::new(18.0 * 3600.0, 1.5 * 3600.0).unwrap();

    let mut trips: Vec<Trip> = Vec::new();
    for (i, &day_seed) in day_seeds.iter().enumerate() {
        let date = cfg.start_date + Days::new(i as u64);
        let midnight = date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp();
        let mut rng = ChaCha8Rng::seed_from_u64(day_seed);
        let noise = if cfg.daily_noise_cv > 0.0 { volume_noise.sample(&mut rng) } else { 1.0 };
        let count = (expected_daily_trips(cfg, date) * noise).round().max(0.0) as usize;

        for _ in 0..count {
            let o = popularity.sample(&mut rng);
            let d = popularity.sample(&mut rng);
            let peak = if rng.gen_bool(0.5) { &morning } else { &evening };
            let start_s = f64::clamp(peak.sample(&mut rng), 0.0, 86_340.0) as i64;
            let dur_s = duration.sample(&mut rng).max(60.0) as i64;
            let (origin, destination) = match cfg.mode {
                Mode::Station => (PlaceRef::station(o as u32), PlaceRef::station(d as u32)),
                Mode::Dockless => (
                    PlaceRef::Coordinate {
                        point: jitter(&mut rng, anchors[o], cfg.dockless_jitter_m, &cfg.bbox),
                    },
                    PlaceRef::Coordinate {
                        point: jitter(&mut rng, anchors[d], cfg.dockless_jitter_m, &cfg.bbox),
                    },
                ),
            };
            trips.push(Trip {
                trip_id: 0, // assigned after the global sort
                origin,
                destination,
                start_time: midnight + start_s,
                end_time: midnight + start_s + dur_s,
                company_id: Some(rng.gen_range(0..cfg.n_companies)),
                bike_id_source: None,
                user_id_source: None,
            });
        }
    }

    trips.sort_by_key(|t| (t.start_time, t.end_time));
    for (i, t) in trips.iter_mut().enumerate() {
        t.trip_id = i as u64;
    }
    Ok(TripSet::new(trips))
}

/// Anchor coordinates, for station-registry emission in station mode.
pub fn place_anchors(cfg: &SynthConfig) -> Result<Vec<GeoPoint>> {
    cfg.validate()?;
    let mut root = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok((0..cfg.n_places)
        .map(|_| {
            GeoPoint::new(
                root.gen_range(cfg.bbox.min_lat..cfg.bbox.max_lat),
                root.gen_range(cfg.bbox.min_lon..cfg.bbox.max_lon),
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::summary_stats;
    use crate::ingest::split_by_day;

    fn small_cfg() -> SynthConfig {
        SynthConfig {
            base_daily_trips: 400,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let a = generate_trips(&small_cfg()).unwrap();
        let b = generate_trips(&small_cfg()).unwrap();
        assert_eq!(a.trips(), b.trips());
        let c = generate_trips(&SynthConfig { seed: 43, ..small_cfg() }).unwrap();
        assert_ne!(a.trips(), c.trips());
    }

    #[test]
    fn weekend_factor_halves_weekend_volume() {
        let cfg = SynthConfig {
            weekend_factor: 0.5,
            daily_noise_cv: 0.02,
            days: 28,
            ..small_cfg()
        };
        let set = generate_trips(&cfg).unwrap();
        let days = split_by_day(&set);
        let mut weekday = Vec::new();
        let mut weekend = Vec::new();
        for (date, s) in &days {
            if date.weekday().number_from_monday() <= 5 {
                weekday.push(s.len() as f64);
            } else {
                weekend.push(s.len() as f64);
            }
        }
        let mw: f64 = weekday.iter().sum::<f64>() / weekday.len() as f64;
        let me: f64 = weekend.iter().sum::<f64>() / weekend.len() as f64;
        assert!((mw / me - 2.0).abs() < 0.2, "{mw} vs {me}");
    }

    #[test]
    fn realized_mean_tracks_expectation() {
        let cfg = small_cfg();
        let set = generate_trips(&cfg).unwrap();
        let days = split_by_day(&set);
        assert_eq!(days.len(), cfg.days);
        let mut expected = 0.0;
        let mut realized = 0.0;
        for (date, s) in &days {
            expected += expected_daily_trips(&cfg, *date);
            realized += s.len() as f64;
        }
        let rel_err = (realized - expected).abs() / expected;
        assert!(
            rel_err < 3.0 * cfg.daily_noise_cv / (cfg.days as f64).sqrt(),
            "relative error {rel_err}"
        );
    }

    #[test]
    fn trips_survive_cleaning_untouched() {
        for mode in [Mode::Station, Mode::Dockless] {
            let cfg = SynthConfig { mode, ..small_cfg() };
            let set = generate_trips(&cfg).unwrap();
            for t in set.trips() {
                assert!(t.start_time < t.end_time);
                if let Some(p) = t.origin.point() {
                    assert!(cfg.bbox.contains(p));
                }
                if let Some(p) = t.destination.point() {
                    assert!(cfg.bbox.contains(p));
                }
            }
        }
    }

    #[test]
    fn weekly_lag_beats_daily_lag() {
        let cfg = SynthConfig {
            days: 28,
            weekend_factor: 0.5,
            daily_noise_cv: 0.03,
            ..small_cfg()
        };
        let set = generate_trips(&cfg).unwrap();
        let counts: Vec<f64> = split_by_day(&set).values().map(|s| s.len() as f64).collect();
        let stats = summary_stats(&counts, None, &[1, 7]).unwrap();
        assert!(
            stats.rrmse_by_lag[&7] < stats.rrmse_by_lag[&1],
            "lag 7 {} vs lag 1 {}",
            stats.rrmse_by_lag[&7],
            stats.rrmse_by_lag[&1]
        );
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(generate_trips(&SynthConfig { n_places: 0, ..small_cfg() }).is_err());
        assert!(generate_trips(&SynthConfig { days: 0, ..small_cfg() }).is_err());
        assert!(generate_trips(&SynthConfig { weekend_factor: 0.0, ..small_cfg() }).is_err());
        assert!(generate_trips(&SynthConfig { dockless_jitter_m: -1.0, ..small_cfg() }).is_err());
    }
}

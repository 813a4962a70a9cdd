//! Cross-checks of the greedy fleet construction against the exact
//! matching-based minimum and against the linear-scan successor rule.

use bikefleet_core::ingest::{Trip, TripSet};
use bikefleet_core::matcher::{
    build_min_fleet, greedy_successor, min_fleet_oracle, validate_solution, MatchConfig,
};
use bikefleet_core::types::{GeoPoint, PlaceRef};
use chrono::NaiveDate;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn base_ts() -> i64 {
    NaiveDate::from_ymd_opt(2020, 1, 12)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap()
        .and_utc()
        .timestamp()
}

fn random_station_day(seed: u64, n: usize, stations: u32) -> TripSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = base_ts();
    let trips: Vec<Trip> = (0..n)
        .map(|i| {
            let start = rng.gen_range(0..80_000);
            Trip {
                trip_id: i as u64,
                origin: PlaceRef::station(rng.gen_range(0..stations)),
                destination: PlaceRef::station(rng.gen_range(0..stations)),
                start_time: base + start,
                end_time: base + start + rng.gen_range(300..3600),
                company_id: Some(rng.gen_range(0..2)),
                bike_id_source: None,
                user_id_source: None,
            }
        })
        .collect();
    TripSet::new(trips)
}

fn random_dockless_day(seed: u64, n: usize) -> TripSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = base_ts();
    let point = |rng: &mut ChaCha8Rng| {
        GeoPoint::new(rng.gen_range(32.00..32.03), rng.gen_range(118.70..118.74))
    };
    let trips: Vec<Trip> = (0..n)
        .map(|i| {
            let start = rng.gen_range(0..80_000);
            Trip {
                trip_id: i as u64,
                origin: PlaceRef::Coordinate { point: point(&mut rng) },
                destination: PlaceRef::Coordinate { point: point(&mut rng) },
                start_time: base + start,
                end_time: base + start + rng.gen_range(300..3600),
                company_id: None,
                bike_id_source: None,
                user_id_source: None,
            }
        })
        .collect();
    TripSet::new(trips)
}

#[test]
fn station_greedy_matches_exact_minimum() {
    for seed in 0..20 {
        for c in [0, 3600, 21_600] {
            let set = random_station_day(seed, 120, 5);
            let cfg = MatchConfig::station(c);
            let sol = build_min_fleet(&set, &cfg).unwrap();
            validate_solution(&sol, &set, &cfg).unwrap();
            let exact = min_fleet_oracle(&set, &cfg).unwrap();
            assert_eq!(sol.fleet_size(), exact, "seed {seed}, c {c}");
        }
    }
}

#[test]
fn dockless_greedy_bounded_by_exact_minimum() {
    for seed in 0..10 {
        let set = random_dockless_day(seed, 150);
        let cfg = MatchConfig::dockless(0);
        let sol = build_min_fleet(&set, &cfg).unwrap();
        validate_solution(&sol, &set, &cfg).unwrap();
        let exact = min_fleet_oracle(&set, &cfg).unwrap();
        assert!(sol.fleet_size() >= exact, "seed {seed}");
        assert!(sol.fleet_size() <= set.len());
        // the heuristic should stay close on city-like instances
        assert!(
            sol.fleet_size() as f64 <= exact as f64 * 1.25 + 2.0,
            "seed {seed}: greedy {} vs exact {exact}",
            sol.fleet_size()
        );
    }
}

#[test]
fn fleet_grows_with_usage_interval() {
    for seed in 0..10 {
        let set = random_station_day(seed, 120, 4);
        let mut last = 0;
        for c in [0, 1800, 3600, 21_600] {
            let fleet = build_min_fleet(&set, &MatchConfig::station(c)).unwrap().fleet_size();
            assert!(fleet >= last, "seed {seed}, c {c}");
            last = fleet;
        }
    }
}

#[test]
fn merging_two_trip_pools_never_needs_more_bikes() {
    for seed in 0..10 {
        let set = random_station_day(seed, 100, 4);
        let cfg = MatchConfig::station(0);
        let (a, b): (Vec<Trip>, Vec<Trip>) = set
            .trips()
            .iter()
            .cloned()
            .partition(|t| t.company_id == Some(0));
        let merged = build_min_fleet(&set, &cfg).unwrap().fleet_size();
        let split = build_min_fleet(&TripSet::new(a), &cfg).unwrap().fleet_size()
            + build_min_fleet(&TripSet::new(b), &cfg).unwrap().fleet_size();
        assert!(merged <= split, "seed {seed}: {merged} > {split}");
    }
}

/// Rebuild the greedy solution with the linear-scan successor rule and
/// compare chain-for-chain with the indexed implementation.
fn reference_chains(set: &TripSet, cfg: &MatchConfig) -> Vec<Vec<u64>> {
    let mut pool: Vec<&Trip> = set.trips().iter().collect();
    let mut chains = Vec::new();
    while !pool.is_empty() {
        // TripSet order is (start_time, trip_id), so index 0 is earliest
        let first = pool.remove(0);
        let mut ids = vec![first.trip_id];
        let mut pos = first.destination;
        let mut avail = first.end_time;
        while let Some(next_id) = greedy_successor(&pos, avail, &pool, cfg) {
            let idx = pool.iter().position(|t| t.trip_id == next_id).unwrap();
            let next = pool.remove(idx);
            ids.push(next.trip_id);
            pos = next.destination;
            avail = next.end_time;
        }
        chains.push(ids);
    }
    chains
}

#[test]
fn indexed_pools_agree_with_reference_rule() {
    for seed in 0..8 {
        for (set, cfg) in [
            (random_station_day(seed, 80, 4), MatchConfig::station(3600)),
            (random_dockless_day(seed, 80), MatchConfig::dockless(3600)),
        ] {
            let fast = build_min_fleet(&set, &cfg).unwrap();
            let fast_chains: Vec<Vec<u64>> =
                fast.chains.iter().map(|c| c.trip_ids.clone()).collect();
            assert_eq!(fast_chains, reference_chains(&set, &cfg), "seed {seed} {:?}", cfg.mode);
        }
    }
}

mod break_reconnect {
    use super::*;
    use bikefleet_core::matcher::apply_break_reconnect;

    fn trip(id: u64, station: u32, start: i64, end: i64) -> Trip {
        let base = base_ts();
        Trip {
            trip_id: id,
            origin: PlaceRef::station(station),
            destination: PlaceRef::station(station),
            start_time: base + start,
            end_time: base + end,
            company_id: None,
            bike_id_source: None,
            user_id_source: None,
        }
    }

    #[test]
    fn suffix_swap_keeps_fleet_size_and_validity() {
        // two overlapping round trips at station 1 force two bikes; bike 0
        // also has a late second trip that can move to bike 1
        let set = TripSet::new(vec![
            trip(0, 1, 0, 10),
            trip(1, 1, 5, 15),
            trip(2, 1, 100, 110),
        ]);
        let cfg = MatchConfig::station(0);
        let sol = build_min_fleet(&set, &cfg).unwrap();
        assert_eq!(sol.fleet_size(), 2);
        assert_eq!(sol.trip_assignment[&2], 0);

        let swapped =
            apply_break_reconnect(&sol, &set, 0, 1, &PlaceRef::station(1), base_ts() + 50).unwrap();
        assert_eq!(swapped.fleet_size(), 2);
        assert_eq!(swapped.trip_assignment[&2], 1);
        validate_solution(&swapped, &set, &cfg).unwrap();
    }

    #[test]
    fn no_shared_idle_time_is_rejected() {
        // bike 1 is still riding at the requested swap time
        let set = TripSet::new(vec![trip(0, 1, 0, 10), trip(1, 1, 5, 200)]);
        let sol = build_min_fleet(&set, &MatchConfig::station(0)).unwrap();
        assert!(
            apply_break_reconnect(&sol, &set, 0, 1, &PlaceRef::station(1), base_ts() + 50).is_err()
        );
    }

    #[test]
    fn same_bike_is_rejected() {
        let set = TripSet::new(vec![trip(0, 1, 0, 10)]);
        let sol = build_min_fleet(&set, &MatchConfig::station(0)).unwrap();
        assert!(
            apply_break_reconnect(&sol, &set, 0, 0, &PlaceRef::station(1), base_ts() + 50).is_err()
        );
    }
}

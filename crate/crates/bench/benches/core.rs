//! Benchmarks for the hot paths: chain matching in both modes, grid
//! radius queries, and k-means.

use bikefleet_core::geo::{build_grid_index, kmeans};
use bikefleet_core::ingest::{Trip, TripSet};
use bikefleet_core::matcher::{build_min_fleet, MatchConfig};
use bikefleet_core::types::{GeoPoint, PlaceRef};
use chrono::NaiveDate;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
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

fn day(n: usize, places: usize, dockless: bool, seed: u64) -> TripSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchors: Vec<GeoPoint> = (0..places)
        .map(|_| GeoPoint::new(rng.gen_range(31.95..32.15), rng.gen_range(118.60..118.90)))
        .collect();
    let base = base_ts();
    let trips = (0..n)
        .map(|i| {
            let o = rng.gen_range(0..places);
            let d = rng.gen_range(0..places);
            let start = rng.gen_range(0..85_000);
            let jig = |rng: &mut ChaCha8Rng, p: GeoPoint| {
                GeoPoint::new(
                    p.lat + rng.gen_range(-0.0005..0.0005),
                    p.lon + rng.gen_range(-0.0005..0.0005),
                )
            };
            let (origin, destination) = if dockless {
                (
                    PlaceRef::Coordinate { point: jig(&mut rng, anchors[o]) },
                    PlaceRef::Coordinate { point: jig(&mut rng, anchors[d]) },
                )
            } else {
                (PlaceRef::station(o as u32), PlaceRef::station(d as u32))
            };
            Trip {
                trip_id: i as u64,
                origin,
                destination,
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

fn random_points(n: usize, seed: u64) -> Vec<GeoPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| GeoPoint::new(rng.gen_range(31.95..32.15), rng.gen_range(118.60..118.90)))
        .collect()
}

fn bench_matching(c: &mut Criterion) {
    let mut g = c.benchmark_group("build_min_fleet");
    g.sample_size(10);
    for &n in &[10_000usize, 100_000] {
        let station = day(n, 400, false, 7);
        g.bench_with_input(BenchmarkId::new("station", n), &station, |b, set| {
            b.iter(|| build_min_fleet(set, &MatchConfig::station(0)).unwrap().fleet_size())
        });
        let dockless = day(n, 400, true, 7);
        g.bench_with_input(BenchmarkId::new("dockless", n), &dockless, |b, set| {
            b.iter(|| build_min_fleet(set, &MatchConfig::dockless(0)).unwrap().fleet_size())
        });
    }
    g.finish();
}

fn bench_grid(c: &mut Criterion) {
    let points = random_points(100_000, 8);
    let idx = build_grid_index(&points, 250.0).unwrap();
    let queries = random_points(1000, 9);
    c.bench_function("grid_query_radius_1k", |b| {
        b.iter(|| {
            queries
                .iter()
                .map(|&q| idx.query_radius(q, 250.0).len())
                .sum::<usize>()
        })
    });
}

fn bench_kmeans(c: &mut Criterion) {
    let points = random_points(20_000, 10);
    c.bench_function("kmeans_k50_20k", |b| {
        b.iter(|| kmeans(&points, 50, 11).unwrap().sse)
    });
}

criterion_group!(benches, bench_matching, bench_grid, bench_kmeans);
criterion_main!(benches);

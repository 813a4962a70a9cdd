//! Randomized invariants: cleaning always reconciles and never keeps a
//! bad row, and a plan covering demand at every place serves every trip.

use bikefleet_core::allocator::AllocationPlan;
use bikefleet_core::evaluator::unmet_ratio_station;
use bikefleet_core::ingest::{clean_trips, RawTrip, Trip, TripSet};
use bikefleet_core::matcher::{bike_demand_by_place, build_min_fleet, MatchConfig};
use bikefleet_core::types::{Bounds, PlaceRef};
use chrono::{Days, NaiveDate};
use proptest::prelude::*;

fn bounds() -> Bounds {
    Bounds::new(31.9, 118.6, 32.2, 118.9)
}

fn raw_trip_strategy() -> impl Strategy<Value = RawTrip> {
    let time = prop::option::weighted(0.9, 1_578_000_000i64..1_578_500_000i64);
    let place = prop::option::weighted(
        0.9,
        prop_oneof![
            // mostly inside the study area, some strays
            (31.9f64..32.2, 118.6f64..118.9).prop_map(|(lat, lon)| PlaceRef::coord(lat, lon)),
            (30.0f64..34.0, 117.0f64..120.0).prop_map(|(lat, lon)| PlaceRef::coord(lat, lon)),
        ],
    );
    (time.clone(), time, place.clone(), place).prop_map(|(start_time, end_time, origin, destination)| RawTrip {
        row_no: 0,
        origin,
        destination,
        start_time,
        end_time,
        company_id: None,
        bike_id_source: None,
        user_id_source: None,
    })
}

proptest! {
    #[test]
    fn cleaning_reconciles_and_keeps_only_valid_rows(
        rows in prop::collection::vec(raw_trip_strategy(), 0..200)
    ) {
        let (set, report) = clean_trips(&rows, &bounds(), None).unwrap();
        prop_assert!(report.reconciles());
        prop_assert_eq!(report.kept as usize, set.len());
        prop_assert_eq!(report.empty_result, set.len() == 0);
        let b = bounds();
        for w in set.trips().windows(2) {
            prop_assert!((w[0].start_time, w[0].trip_id) <= (w[1].start_time, w[1].trip_id));
        }
        for t in set.trips() {
            prop_assert!(t.start_time <= t.end_time);
            prop_assert!(b.contains(t.origin.point().unwrap()));
            prop_assert!(b.contains(t.destination.point().unwrap()));
        }
    }

    #[test]
    fn covering_plan_serves_every_trip(
        seed in 0u64..1000,
        n in 1usize..80,
        slack in 0u32..3,
    ) {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = NaiveDate::from_ymd_opt(2020, 1, 12)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()
            .and_utc()
            .timestamp();
        let trips: Vec<Trip> = (0..n)
            .map(|i| {
                let start = rng.gen_range(0..80_000);
                Trip {
                    trip_id: i as u64,
                    origin: PlaceRef::station(rng.gen_range(0..4)),
                    destination: PlaceRef::station(rng.gen_range(0..4)),
                    start_time: base + start,
                    end_time: base + start + rng.gen_range(300..3600),
                    company_id: None,
                    bike_id_source: None,
                    user_id_source: None,
                }
            })
            .collect();
        let set = TripSet::new(trips);
        let sol = build_min_fleet(&set, &MatchConfig::station(0)).unwrap();
        let demand = bike_demand_by_place(&sol, None).unwrap();
        let plan = AllocationPlan {
            for_day: sol.day,
            allocation: demand.demand.iter().map(|(&p, &d)| (p, d + slack)).collect(),
            window_u: 1,
            source_days: vec![sol.day - Days::new(1)],
        };
        let report = unmet_ratio_station(&sol, &plan).unwrap();
        prop_assert_eq!(report.unmet_trips, 0);
        prop_assert!(report.per_place_gap.values().all(|&g| g == 0));
    }
}

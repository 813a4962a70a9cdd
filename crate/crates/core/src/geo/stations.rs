//! Virtual stations: noise-filtered clustering of dockless trip origins
//! into discrete allocation places with a 250 m service radius.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TripSet;
use crate::types::GeoPoint;

use super::{build_grid_index, dbscan, elbow_select_k, kmeans, GridIndex, DEFAULT_RADIUS_M};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterParams {
    pub eps_m: f64,
    pub min_pts: usize,
    /// Fixed cluster count; mutually exclusive with `k_grid`.
    pub k: Option<usize>,
    /// Elbow-search grid, used when `k` is not set.
    pub k_grid: Option<Vec<usize>>,
    pub service_radius_m: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            eps_m: DEFAULT_RADIUS_M,
            min_pts: 5,
            k: None,
            k_grid: None,
            service_radius_m: DEFAULT_RADIUS_M,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VirtualStation {
    pub vs_id: u32,
    pub center: GeoPoint,
    pub service_radius_m: f64,
}

#[derive(Debug, Clone)]
pub struct VirtualStationSet {
    stations: Vec<VirtualStation>,
    index: GridIndex,
    params_used: ClusterParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaceAssignment {
    pub vs_id: u32,
    pub distance_m: f64,
    pub in_service_area: bool,
}

impl VirtualStationSet {
    /// Build from centers; vs_ids are assigned 0.. in (lat, lon) order so
    /// output is canonical regardless of clustering internals.
    pub fn from_centers(mut centers: Vec<GeoPoint>, params: ClusterParams) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::precondition("no virtual station centers"));
        }
        centers.sort_by(|a, b| {
            a.lat.partial_cmp(&b.lat).unwrap().then(a.lon.partial_cmp(&b.lon).unwrap())
        });
        centers.dedup_by(|a, b| a.lat == b.lat && a.lon == b.lon);
        let index = build_grid_index(&centers, params.service_radius_m.max(1.0))?;
        let stations = centers
            .iter()
            .enumerate()
            .map(|(i, &center)| VirtualStation {
                vs_id: i as u32,
                center,
                service_radius_m: params.service_radius_m,
            })
            .collect();
        Ok(VirtualStationSet {
            stations,
            index,
            params_used: params,
        })
    }

    pub fn stations(&self) -> &[VirtualStation] {
        &self.stations
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn params_used(&self) -> &ClusterParams {
        &self.params_used
    }

    pub fn index(&self) -> &GridIndex {
        &self.index
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Export<'a> {
            params_used: &'a ClusterParams,
            stations: Vec<StationRow>,
        }
        #[derive(Serialize)]
        struct StationRow {
            vs_id: u32,
            lat: f64,
            lon: f64,
            radius: f64,
        }
        let export = Export {
            params_used: &self.params_used,
            stations: self
                .stations
                .iter()
                .map(|s| StationRow {
                    vs_id: s.vs_id,
                    lat: s.center.lat,
                    lon: s.center.lon,
                    radius: s.service_radius_m,
                })
                .collect(),
        };
        serde_json::to_writer_pretty(&mut w, &export)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["vs_id", "lat", "lon", "radius"])?;
        for s in &self.stations {
            wtr.write_record([
                s.vs_id.to_string(),
                format!("{:.7}", s.center.lat),
                format!("{:.7}", s.center.lon),
                format!("{}", s.service_radius_m),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_json<R: std::io::Read>(r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Import {
            params_used: ClusterParams,
            stations: Vec<StationRow>,
        }
        #[derive(Deserialize)]
        struct StationRow {
            lat: f64,
            lon: f64,
        }
        let import: Import = serde_json::from_reader(r)
            .map_err(|e| Error::schema(format!("bad stations json: {e}")))?;
        let centers = import.stations.iter().map(|s| GeoPoint::new(s.lat, s.lon)).collect();
        VirtualStationSet::from_centers(centers, import.params_used)
    }
}

/// K-means-RN: take the busiest day's origins, remove DBSCAN noise, then
/// k-means the remainder; cluster centers become the virtual stations.
pub fn identify_virtual_stations(
    history: &BTreeMap<NaiveDate, TripSet>,
    params: &ClusterParams,
    seed: u64,
) -> Result<VirtualStationSet> {
    if history.is_empty() {
        return Err(Error::precondition("empty trip history"));
    }
    // busiest day, earliest date on ties
    let (_, busiest) = history
        .iter()
        .max_by_key(|(date, set)| (set.len(), std::cmp::Reverse(**date)))
        .unwrap();

    let origins: Vec<GeoPoint> = busiest
        .trips()
        .iter()
        .map(|t| {
            t.origin
                .point()
                .ok_or_else(|| Error::precondition(format!("trip {} has no origin coordinates", t.trip_id)))
        })
        .collect::<Result<_>>()?;

    let labels = dbscan(&origins, params.eps_m, params.min_pts)?;
    let dense: Vec<GeoPoint> = origins
        .iter()
        .zip(&labels)
        .filter(|(_, l)| !l.is_noise())
        .map(|(&p, _)| p)
        .collect();
    if dense.is_empty() {
        return Err(Error::precondition(
            "all origins classified as noise; no virtual stations identifiable",
        ));
    }

    let k = match (&params.k, &params.k_grid) {
        (Some(k), _) => *k,
        (None, Some(grid)) => elbow_select_k(&dense, grid, seed)?.0,
        (None, None) => {
            return Err(Error::precondition("clustering params need k or k_grid"));
        }
    };
    if k > dense.len() {
        return Err(Error::precondition(format!(
            "k={k} exceeds {} non-noise origins",
            dense.len()
        )));
    }
    let result = kmeans(&dense, k, seed)?;
    VirtualStationSet::from_centers(result.centers, params.clone())
}

/// Nearest-center assignment (the Voronoi partition), ties to the lowest
/// vs_id; flags whether the point lies inside the 250 m service area.
pub fn assign_place(p: GeoPoint, vs: &VirtualStationSet) -> PlaceAssignment {
    let (vs_id, distance_m) = vs.index.nearest(p).expect("non-empty station set");
    PlaceAssignment {
        vs_id,
        distance_m,
        in_service_area: distance_m < vs.stations[vs_id as usize].service_radius_m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Trip;
    use crate::types::PlaceRef;

    fn offset(base: GeoPoint, north_m: f64, east_m: f64) -> GeoPoint {
        let m = super::super::EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        GeoPoint::new(
            base.lat + north_m / m,
            base.lon + east_m / (m * base.lat.to_radians().cos()),
        )
    }

    fn day_of_trips(points: &[GeoPoint], date: &str) -> (NaiveDate, TripSet) {
        let date: NaiveDate = date.parse().unwrap();
        let base = date.and_hms_opt(8, 0, 0).unwrap().and_utc().timestamp();
        let trips: Vec<Trip> = points
            .iter()
            .enumerate()
            .map(|(i, &p)| Trip {
                trip_id: i as u64,
                origin: PlaceRef::Coordinate { point: p },
                destination: PlaceRef::Coordinate { point: p },
                start_time: base + i as i64,
                end_time: base + i as i64 + 300,
                company_id: None,
                bike_id_source: None,
                user_id_source: None,
            })
            .collect();
        (date, TripSet::new(trips))
    }

    fn params_k(k: usize) -> ClusterParams {
        ClusterParams {
            k: Some(k),
            ..Default::default()
        }
    }

    #[test]
    fn all_noise_is_an_error() {
        let base = GeoPoint::new(32.0, 118.7);
        let pts: Vec<GeoPoint> = (0..4).map(|i| offset(base, i as f64 * 5000.0, 0.0)).collect();
        let mut history = BTreeMap::new();
        let (d, set) = day_of_trips(&pts, "2020-01-05");
        history.insert(d, set);
        assert!(identify_virtual_stations(&history, &params_k(1), 1).is_err());
    }

    #[test]
    fn remote_singleton_does_not_shift_center() {
        let base = GeoPoint::new(32.0, 118.7);
        let mut pts: Vec<GeoPoint> = (0..10).map(|i| offset(base, (i % 3) as f64 * 5.0, 0.0)).collect();
        pts.push(offset(base, 8000.0, 0.0)); // noise
        let mut history = BTreeMap::new();
        let (d, set) = day_of_trips(&pts, "2020-01-05");
        history.insert(d, set);
        let vs = identify_virtual_stations(&history, &params_k(1), 1).unwrap();
        assert_eq!(vs.len(), 1);
        let center = vs.stations()[0].center;
        assert!(super::super::haversine(center, base) < 20.0, "center pulled away by noise");
        assert_eq!(vs.stations()[0].service_radius_m, 250.0);
    }

    #[test]
    fn busiest_day_is_selected() {
        let near = GeoPoint::new(32.0, 118.7);
        let far = GeoPoint::new(32.1, 118.9);
        let small: Vec<GeoPoint> = vec![near; 100];
        let big: Vec<GeoPoint> = vec![far; 300];
        let mut history = BTreeMap::new();
        let (d1, s1) = day_of_trips(&small, "2020-01-05");
        let (d2, s2) = day_of_trips(&big, "2020-01-06");
        history.insert(d1, s1);
        history.insert(d2, s2);
        let vs = identify_virtual_stations(&history, &params_k(1), 1).unwrap();
        assert!(super::super::haversine(vs.stations()[0].center, far) < 1.0);
    }

    #[test]
    fn assign_place_tie_breaks_to_lowest_id() {
        let base = GeoPoint::new(32.0, 118.7);
        // centers sorted by (lat, lon): symmetric east/west pair
        let centers = vec![offset(base, 0.0, -400.0), offset(base, 0.0, 400.0)];
        let vs = VirtualStationSet::from_centers(centers, ClusterParams::default()).unwrap();
        let a = assign_place(base, &vs);
        assert_eq!(a.vs_id, 0);
        assert!(!a.in_service_area); // 400 m > 250 m
        let at_center = assign_place(vs.stations()[1].center, &vs);
        assert_eq!(at_center.vs_id, 1);
        assert!(at_center.in_service_area);
        assert_eq!(at_center.distance_m, 0.0);
    }

    #[test]
    fn assign_place_matches_linear_scan() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let centers: Vec<GeoPoint> = (0..200)
            .map(|_| GeoPoint::new(rng.gen_range(31.9..32.2), rng.gen_range(118.6..118.95)))
            .collect();
        let vs = VirtualStationSet::from_centers(centers, ClusterParams::default()).unwrap();
        for _ in 0..500 {
            let p = GeoPoint::new(rng.gen_range(31.9..32.2), rng.gen_range(118.6..118.95));
            let got = assign_place(p, &vs);
            let want = vs
                .stations()
                .iter()
                .map(|s| (s.vs_id, super::super::haversine(p, s.center)))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
                .unwrap();
            assert_eq!(got.vs_id, want.0);
        }
    }

    #[test]
    fn json_roundtrip() {
        let base = GeoPoint::new(32.0, 118.7);
        let centers = vec![base, offset(base, 1000.0, 0.0)];
        let vs = VirtualStationSet::from_centers(centers, ClusterParams::default()).unwrap();
        let mut buf = Vec::new();
        vs.write_json(&mut buf).unwrap();
        let back = VirtualStationSet::read_json(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.stations()[0].center, vs.stations()[0].center);
    }
}

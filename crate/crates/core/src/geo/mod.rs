//! Geospatial primitives: haversine distance, a flat grid index for
//! radius and nearest-neighbor queries, density clustering and k-means,
//! and the virtual-station identification pipeline for dockless data.

mod dbscan;
mod kmeans;
mod stations;

pub use dbscan::{dbscan, DbscanLabel};
pub use kmeans::{elbow_select_k, kmeans, KmeansResult};
pub use stations::{
    assign_place, identify_virtual_stations, ClusterParams, PlaceAssignment, VirtualStation,
    VirtualStationSet,
};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::types::GeoPoint;

pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Default service radius / walking radius, meters.
pub const DEFAULT_RADIUS_M: f64 = 250.0;

const METERS_PER_DEG: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

/// Great-circle distance in meters.
pub fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Local equirectangular frame used only for bucketing points into grid
/// cells; membership itself is always decided by haversine distance.
#[derive(Debug, Clone)]
pub struct GridFrame {
    origin: GeoPoint,
    cell_size_m: f64,
    cos_lat: f64,
}

impl GridFrame {
    pub fn new(origin: GeoPoint, cell_size_m: f64) -> Self {
        GridFrame {
            origin,
            cell_size_m,
            cos_lat: origin.lat.to_radians().cos().max(1e-9),
        }
    }

    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }

    fn project(&self, p: GeoPoint) -> (f64, f64) {
        let x = (p.lon - self.origin.lon) * METERS_PER_DEG * self.cos_lat;
        let y = (p.lat - self.origin.lat) * METERS_PER_DEG;
        (x, y)
    }

    pub fn cell_of(&self, p: GeoPoint) -> (i32, i32) {
        let (x, y) = self.project(p);
        ((x / self.cell_size_m).floor() as i32, (y / self.cell_size_m).floor() as i32)
    }

    /// Lower bound in meters on the distance from `p` to any point in
    /// cell `(cx, cy)`, measured in the local frame. Slightly shrunk so
    /// it stays a true lower bound under projection distortion.
    pub fn cell_min_distance(&self, p: GeoPoint, cx: i32, cy: i32) -> f64 {
        let (x, y) = self.project(p);
        let (x0, y0) = (cx as f64 * self.cell_size_m, cy as f64 * self.cell_size_m);
        let dx = (x0 - x).max(x - (x0 + self.cell_size_m)).max(0.0);
        let dy = (y0 - y).max(y - (y0 + self.cell_size_m)).max(0.0);
        (dx * dx + dy * dy).sqrt() * 0.98 - 1.0
    }

    /// Cell rectangle guaranteed to cover the disk of radius `r` around
    /// `p`; one extra cell absorbs the projection error at city scale.
    pub fn cells_covering(&self, p: GeoPoint, r: f64) -> ((i32, i32), (i32, i32)) {
        let (x, y) = self.project(p);
        let pad = r * 1.01 + self.cell_size_m;
        let lo = (
            ((x - pad) / self.cell_size_m).floor() as i32,
            ((y - pad) / self.cell_size_m).floor() as i32,
        );
        let hi = (
            ((x + pad) / self.cell_size_m).floor() as i32,
            ((y + pad) / self.cell_size_m).floor() as i32,
        );
        (lo, hi)
    }
}

/// Static point index over grid cells. Radius queries return exactly the
/// haversine-filtered ids, sorted by (distance, id).
#[derive(Debug, Clone)]
pub struct GridIndex {
    frame: GridFrame,
    cells: HashMap<(i32, i32), Vec<u32>>,
    points: Vec<GeoPoint>,
}

impl GridIndex {
    pub fn points(&self) -> &[GeoPoint] {
        &self.points
    }

    pub fn frame(&self) -> &GridFrame {
        &self.frame
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Ids with haversine distance strictly below `r`, sorted by
    /// (distance, id).
    pub fn query_radius(&self, center: GeoPoint, r: f64) -> Vec<(u32, f64)> {
        let mut out = Vec::new();
        let ((x0, y0), (x1, y1)) = self.frame.cells_covering(center, r);
        for cx in x0..=x1 {
            for cy in y0..=y1 {
                if let Some(ids) = self.cells.get(&(cx, cy)) {
                    for &id in ids {
                        let d = haversine(center, self.points[id as usize]);
                        if d < r {
                            out.push((id, d));
                        }
                    }
                }
            }
        }
        out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        out
    }

    /// Nearest point by haversine; ties broken by lowest id. Searches
    /// expanding cell rings so it stays cheap on city-scale data.
    pub fn nearest(&self, p: GeoPoint) -> Option<(u32, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let (cx, cy) = self.frame.cell_of(p);
        let mut best: Option<(u32, f64)> = None;
        let mut ring = 0i32;
        loop {
            let mut scanned_any = false;
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue; // interior rings already scanned
                    }
                    if let Some(ids) = self.cells.get(&(cx + dx, cy + dy)) {
                        scanned_any = true;
                        for &id in ids {
                            let d = haversine(p, self.points[id as usize]);
                            let better = match best {
                                None => true,
                                Some((bid, bd)) => d < bd || (d == bd && id < bid),
                            };
                            if better {
                                best = Some((id, d));
                            }
                        }
                    }
                }
            }
            // Lower bound on the distance to anything in the next ring;
            // shrunk slightly to stay safe under projection distortion.
            let ring_floor = (ring as f64) * self.frame.cell_size_m * 0.99;
            if let Some((_, bd)) = best {
                if ring_floor > bd {
                    return best;
                }
            }
            ring += 1;
            if !scanned_any && ring as i64 > 2 * self.span_cells() {
                // walked past the whole populated area
                return best.or_else(|| self.nearest_linear(p));
            }
        }
    }

    fn span_cells(&self) -> i64 {
        let xs: Vec<i32> = self.cells.keys().map(|&(x, _)| x).collect();
        let ys: Vec<i32> = self.cells.keys().map(|&(_, y)| y).collect();
        let dx = xs.iter().max().unwrap_or(&0) - xs.iter().min().unwrap_or(&0);
        let dy = ys.iter().max().unwrap_or(&0) - ys.iter().min().unwrap_or(&0);
        (dx.max(dy) as i64).max(1)
    }

    fn nearest_linear(&self, p: GeoPoint) -> Option<(u32, f64)> {
        self.points
            .iter()
            .enumerate()
            .map(|(i, &q)| (i as u32, haversine(p, q)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
    }
}

pub fn build_grid_index(points: &[GeoPoint], cell_size_m: f64) -> Result<GridIndex> {
    if cell_size_m <= 0.0 {
        return Err(Error::precondition("cell_size must be positive"));
    }
    let origin = points.first().copied().unwrap_or(GeoPoint::new(0.0, 0.0));
    let frame = GridFrame::new(origin, cell_size_m);
    let mut cells: HashMap<(i32, i32), Vec<u32>> = HashMap::new();
    for (i, &p) in points.iter().enumerate() {
        cells.entry(frame.cell_of(p)).or_default().push(i as u32);
    }
    Ok(GridIndex {
        frame,
        cells,
        points: points.to_vec(),
    })
}

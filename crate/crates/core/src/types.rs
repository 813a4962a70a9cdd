use serde::{Deserialize, Serialize};

/// WGS84 point in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        GeoPoint { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

/// A trip endpoint: either a docking station or a free-floating coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlaceRef {
    Station { station_id: u32 },
    Coordinate { point: GeoPoint },
}

impl PlaceRef {
    pub fn station(id: u32) -> Self {
        PlaceRef::Station { station_id: id }
    }

    pub fn coord(lat: f64, lon: f64) -> Self {
        PlaceRef::Coordinate {
            point: GeoPoint::new(lat, lon),
        }
    }

    pub fn station_id(&self) -> Option<u32> {
        match self {
            PlaceRef::Station { station_id } => Some(*station_id),
            PlaceRef::Coordinate { .. } => None,
        }
    }

    pub fn point(&self) -> Option<GeoPoint> {
        match self {
            PlaceRef::Station { .. } => None,
            PlaceRef::Coordinate { point } => Some(*point),
        }
    }
}

/// Axis-aligned lat/lon rectangle (the study area).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl Bounds {
    pub fn new(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Self {
        Bounds {
            min_lat,
            min_lon,
            max_lat,
            max_lon,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.min_lat >= self.max_lat || self.min_lon >= self.max_lon
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.min_lat && p.lat <= self.max_lat && p.lon >= self.min_lon && p.lon <= self.max_lon
    }
}

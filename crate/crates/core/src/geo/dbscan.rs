//! DBSCAN over geographic points with haversine neighborhoods.

use std::collections::VecDeque;

use crate::error::Result;
use crate::types::GeoPoint;

use super::build_grid_index;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DbscanLabel {
    Noise,
    Cluster(u32),
}

impl DbscanLabel {
    pub fn is_noise(&self) -> bool {
        matches!(self, DbscanLabel::Noise)
    }
}

/// Standard density-reachability labeling. Neighborhoods use haversine
/// distance with strict `< eps`; a point counts in its own neighborhood.
/// Seed-free and deterministic for a given input order.
pub fn dbscan(points: &[GeoPoint], eps_m: f64, min_pts: usize) -> Result<Vec<DbscanLabel>> {
    assert!(eps_m > 0.0, "eps must be positive");
    assert!(min_pts >= 1, "min_pts must be at least 1");

    let idx = build_grid_index(points, eps_m)?;
    let neighborhood = |i: usize| -> Vec<u32> {
        idx.query_radius(points[i], eps_m).into_iter().map(|(j, _)| j).collect()
    };

    let mut labels = vec![None::<DbscanLabel>; points.len()];
    let mut next_cluster = 0u32;
    for i in 0..points.len() {
        if labels[i].is_some() {
            continue;
        }
        let neigh = neighborhood(i);
        if neigh.len() < min_pts {
            labels[i] = Some(DbscanLabel::Noise);
            continue;
        }
        let cluster = DbscanLabel::Cluster(next_cluster);
        next_cluster += 1;
        labels[i] = Some(cluster);
        let mut queue: VecDeque<u32> = neigh.into_iter().collect();
        while let Some(j) = queue.pop_front() {
            let j = j as usize;
            match labels[j] {
                Some(DbscanLabel::Noise) => labels[j] = Some(cluster), // border point
                Some(_) => continue,
                None => {
                    labels[j] = Some(cluster);
                    let jn = neighborhood(j);
                    if jn.len() >= min_pts {
                        queue.extend(jn); // core point: expand
                    }
                }
            }
        }
    }
    Ok(labels.into_iter().map(|l| l.unwrap()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn offset(base: GeoPoint, north_m: f64, east_m: f64) -> GeoPoint {
        let m = super::super::EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        GeoPoint::new(
            base.lat + north_m / m,
            base.lon + east_m / (m * base.lat.to_radians().cos()),
        )
    }

    #[test]
    fn dense_cluster_plus_far_noise() {
        let base = GeoPoint::new(32.0, 118.7);
        let mut pts: Vec<GeoPoint> = (0..5).map(|i| offset(base, i as f64 * 2.0, 0.0)).collect();
        pts.push(offset(base, 5000.0, 0.0));
        let labels = dbscan(&pts, 250.0, 5).unwrap();
        assert!(labels[..5].iter().all(|l| *l == DbscanLabel::Cluster(0)));
        assert_eq!(labels[5], DbscanLabel::Noise);
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let p = GeoPoint::new(32.0, 118.7);
        let pts = vec![p; 8];
        let labels = dbscan(&pts, 250.0, 5).unwrap();
        assert!(labels.iter().all(|l| *l == DbscanLabel::Cluster(0)));
    }

    #[test]
    fn two_blobs_become_two_clusters() {
        let base = GeoPoint::new(32.0, 118.7);
        let mut pts: Vec<GeoPoint> = (0..6).map(|i| offset(base, i as f64 * 10.0, 0.0)).collect();
        pts.extend((0..6).map(|i| offset(base, 1000.0 + i as f64 * 10.0, 0.0)));
        let labels = dbscan(&pts, 250.0, 5).unwrap();
        assert!(labels[..6].iter().all(|l| *l == DbscanLabel::Cluster(0)));
        assert!(labels[6..].iter().all(|l| *l == DbscanLabel::Cluster(1)));
    }
}

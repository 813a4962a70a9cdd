//! Seeded k-means over geographic points, plus elbow selection of k.
//!
//! Centroids are arithmetic means of lat/lon degrees, which is accurate
//! at city scale (< 50 km extent, sub-meter centroid error). Assignment
//! and SSE use haversine distance.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::GeoPoint;

use super::{build_grid_index, haversine};

const MAX_ITERS: u32 = 100;
const SHIFT_TOL_M: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct KmeansResult {
    pub centers: Vec<GeoPoint>,
    pub assignment: Vec<u32>,
    pub sse: f64,
    pub iterations: u32,
    /// SSE after each accepted iteration, non-increasing.
    pub sse_history: Vec<f64>,
}

/// Nearest center by haversine, ties to the lowest center index.
fn assign_all(points: &[GeoPoint], centers: &[GeoPoint]) -> Result<(Vec<u32>, f64)> {
    let mut assignment = vec![0u32; points.len()];
    let mut sse = 0.0;
    if centers.len() > 32 {
        let idx = build_grid_index(centers, 250.0)?;
        for (i, &p) in points.iter().enumerate() {
            let (c, d) = idx.nearest(p).expect("non-empty centers");
            assignment[i] = c;
            sse += d * d;
        }
    } else {
        for (i, &p) in points.iter().enumerate() {
            let mut best = (0u32, f64::INFINITY);
            for (c, &center) in centers.iter().enumerate() {
                let d = haversine(p, center);
                if d < best.1 {
                    best = (c as u32, d);
                }
            }
            assignment[i] = best.0;
            sse += best.1 * best.1;
        }
    }
    Ok((assignment, sse))
}

fn plus_plus_init(points: &[GeoPoint], k: usize, rng: &mut ChaCha8Rng) -> Vec<GeoPoint> {
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.gen_range(0..points.len())]);
    let mut d2: Vec<f64> = points.iter().map(|&p| haversine(p, centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // all remaining points coincide with a center; pick by index
            (0..points.len()).find(|&i| d2[i] > 0.0).unwrap_or(centers.len() % points.len())
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        let c = points[next];
        centers.push(c);
        for (i, &p) in points.iter().enumerate() {
            d2[i] = d2[i].min(haversine(p, c).powi(2));
        }
    }
    centers
}

/// Lloyd iterations from seeded k-means++ initialization. Stops when the
/// max centroid shift drops below 1 m, after 100 iterations, or before
/// any update that would raise the SSE (the lat/lon-mean centroid is an
/// approximation of the haversine minimizer, so the last state is kept).
pub fn kmeans(points: &[GeoPoint], k: usize, seed: u64) -> Result<KmeansResult> {
    if k < 1 || k > points.len() {
        return Err(Error::precondition(format!(
            "k={k} out of range for {} points",
            points.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_init(points, k, &mut rng);
    let (mut assignment, mut sse) = assign_all(points, &centers)?;
    let mut history = vec![sse];
    let mut iterations = 0u32;

    while iterations < MAX_ITERS {
        // centroid update
        let mut sums = vec![(0.0f64, 0.0f64, 0u64); k];
        for (i, &a) in assignment.iter().enumerate() {
            let s = &mut sums[a as usize];
            s.0 += points[i].lat;
            s.1 += points[i].lon;
            s.2 += 1;
        }
        let new_centers: Vec<GeoPoint> = sums
            .iter()
            .enumerate()
            .map(|(c, &(lat, lon, n))| {
                if n == 0 {
                    centers[c] // empty cluster keeps its center
                } else {
                    GeoPoint::new(lat / n as f64, lon / n as f64)
                }
            })
            .collect();
        let max_shift = centers
            .iter()
            .zip(&new_centers)
            .map(|(&a, &b)| haversine(a, b))
            .fold(0.0f64, f64::max);

        let (new_assignment, new_sse) = assign_all(points, &new_centers)?;
        if new_sse > sse {
            break; // keep the previous, lower-SSE state
        }
        centers = new_centers;
        assignment = new_assignment;
        sse = new_sse;
        iterations += 1;
        history.push(sse);
        if max_shift < SHIFT_TOL_M {
            break;
        }
    }

    Ok(KmeansResult {
        centers,
        assignment,
        sse,
        iterations,
        sse_history: history,
    })
}

/// Elbow selection: run k-means per grid value and pick the k whose
/// point on the SSE curve lies farthest from the chord joining the first
/// and last grid points (k normalized to [0,1], SSE scaled by the first
/// value). A curve flat at the 1 m convergence resolution has no elbow;
/// the smallest k wins, as it does on exact distance ties.
pub fn elbow_select_k(points: &[GeoPoint], k_grid: &[usize], seed: u64) -> Result<(usize, Vec<(usize, f64)>)> {
    if k_grid.len() < 3 {
        return Err(Error::precondition("elbow needs at least 3 grid points"));
    }
    if k_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::precondition("k_grid must be strictly ascending"));
    }
    let curve: Vec<(usize, f64)> = k_grid
        .iter()
        .map(|&k| kmeans(points, k, seed).map(|r| (k, r.sse)))
        .collect::<Result<_>>()?;

    let sse0 = curve[0].1;
    if sse0 < points.len() as f64 * SHIFT_TOL_M * SHIFT_TOL_M {
        return Ok((k_grid[0], curve));
    }

    let k0 = curve[0].0 as f64;
    let k1 = curve[curve.len() - 1].0 as f64;
    let y0 = 1.0;
    let y1 = curve[curve.len() - 1].1 / sse0;
    let chord = ((1.0f64).powi(2) + (y1 - y0).powi(2)).sqrt();
    let mut best = (curve[0].0, 0.0f64);
    for &(k, sse) in &curve {
        let x = (k as f64 - k0) / (k1 - k0);
        let y = sse / sse0;
        // perpendicular distance from (x, y) to the chord (0, y0)-(1, y1)
        let d = ((y1 - y0) * x - y + y0).abs() / chord;
        if d > best.1 + 1e-12 {
            best = (k, d);
        }
    }
    Ok((best.0, curve))
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

    fn three_blobs() -> Vec<GeoPoint> {
        let base = GeoPoint::new(32.0, 118.7);
        let mut pts = Vec::new();
        for (cx, cy) in [(0.0, 0.0), (3000.0, 0.0), (0.0, 3000.0)] {
            for i in 0..20 {
                pts.push(offset(base, cy + (i % 5) as f64 * 20.0, cx + (i / 5) as f64 * 20.0));
            }
        }
        pts
    }

    #[test]
    fn k_equals_n_gives_zero_sse() {
        let pts = three_blobs()[..7].to_vec();
        let r = kmeans(&pts, 7, 1).unwrap();
        assert_eq!(r.sse, 0.0);
    }

    #[test]
    fn k_one_center_is_coordinate_mean() {
        let pts = three_blobs();
        let r = kmeans(&pts, 1, 1).unwrap();
        let lat: f64 = pts.iter().map(|p| p.lat).sum::<f64>() / pts.len() as f64;
        let lon: f64 = pts.iter().map(|p| p.lon).sum::<f64>() / pts.len() as f64;
        assert!((r.centers[0].lat - lat).abs() < 1e-12);
        assert!((r.centers[0].lon - lon).abs() < 1e-12);
    }

    #[test]
    fn three_blobs_separate_with_k3() {
        let pts = three_blobs();
        let r = kmeans(&pts, 3, 42).unwrap();
        // brute-force check: every point sits with its nearest center
        for (i, &p) in pts.iter().enumerate() {
            let nearest = (0..3)
                .min_by(|&a, &b| {
                    haversine(p, r.centers[a])
                        .partial_cmp(&haversine(p, r.centers[b]))
                        .unwrap()
                })
                .unwrap();
            assert_eq!(r.assignment[i], nearest as u32);
        }
        // each blob of 20 maps to a single center
        for blob in 0..3 {
            let first = r.assignment[blob * 20];
            assert!(r.assignment[blob * 20..(blob + 1) * 20].iter().all(|&a| a == first));
        }
    }

    #[test]
    fn sse_history_is_non_increasing() {
        for seed in 0..10 {
            let r = kmeans(&three_blobs(), 4, seed).unwrap();
            assert!(r.sse_history.windows(2).all(|w| w[1] <= w[0]), "{:?}", r.sse_history);
        }
    }

    #[test]
    fn kmeans_is_deterministic_per_seed() {
        let pts = three_blobs();
        let a = kmeans(&pts, 3, 7).unwrap();
        let b = kmeans(&pts, 3, 7).unwrap();
        assert_eq!(a.centers, b.centers);
        assert_eq!(a.assignment, b.assignment);
    }

    #[test]
    fn k_greater_than_n_errors() {
        assert!(kmeans(&three_blobs()[..2], 5, 1).is_err());
    }

    #[test]
    fn elbow_finds_three_blobs() {
        let (k, _) = elbow_select_k(&three_blobs(), &[1, 2, 3, 4, 5, 6], 11).unwrap();
        assert_eq!(k, 3);
    }

    #[test]
    fn elbow_flat_curve_picks_smallest_k() {
        let base = GeoPoint::new(32.0, 118.7);
        // sub-meter spread: flat at convergence resolution
        let pts: Vec<GeoPoint> = (0..30).map(|i| offset(base, (i % 5) as f64 * 0.1, 0.0)).collect();
        let (k, _) = elbow_select_k(&pts, &[1, 2, 3], 5).unwrap();
        assert_eq!(k, 1);
    }

    #[test]
    fn elbow_needs_three_grid_points() {
        assert!(elbow_select_k(&three_blobs(), &[1, 2], 1).is_err());
    }
}

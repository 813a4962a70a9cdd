//! Exact minimum fleet size via minimum path cover: build the bipartite
//! trip-compatibility graph and subtract a maximum matching
//! (Hopcroft–Karp) from the trip count.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::geo::build_grid_index;
use crate::ingest::{Trip, TripSet};
use crate::types::GeoPoint;

use super::{check_mode, MatchConfig, Mode};

/// Exact matching stays tractable up to this instance size; larger runs
/// should audit sampled days instead.
pub const ORACLE_TRIP_GUARD: usize = 20_000;

/// Can trip `j` follow trip `i` on the same bike?
fn compatible(i: &Trip, j: &Trip, cfg: &MatchConfig) -> bool {
    j.start_time >= i.end_time + cfg.usage_interval_s
        && super::place_distance_ok(&i.destination, &j.origin, cfg)
}

fn build_adjacency(trips: &[Trip], cfg: &MatchConfig) -> Vec<Vec<usize>> {
    let n = trips.len();
    let mut adj = vec![Vec::new(); n];
    match cfg.mode {
        Mode::Station => {
            // per-station start-sorted lists, binary search on time
            let mut by_station: HashMap<u32, Vec<usize>> = HashMap::new();
            for (idx, t) in trips.iter().enumerate() {
                by_station.entry(t.origin.station_id().unwrap()).or_default().push(idx);
            }
            for list in by_station.values_mut() {
                list.sort_by_key(|&i| (trips[i].start_time, trips[i].trip_id));
            }
            for (i, t) in trips.iter().enumerate() {
                let Some(list) = by_station.get(&t.destination.station_id().unwrap()) else {
                    continue;
                };
                let threshold = t.end_time + cfg.usage_interval_s;
                let from = list.partition_point(|&j| trips[j].start_time < threshold);
                adj[i].extend(list[from..].iter().copied().filter(|&j| j != i));
            }
        }
        Mode::Dockless => {
            let origins: Vec<GeoPoint> = trips.iter().map(|t| t.origin.point().unwrap()).collect();
            let index = build_grid_index(&origins, cfg.walk_radius_m.max(1.0)).expect("positive cell");
            for (i, t) in trips.iter().enumerate() {
                for (j, _) in index.query_radius(t.destination.point().unwrap(), cfg.walk_radius_m) {
                    let j = j as usize;
                    if j != i && compatible(t, &trips[j], cfg) {
                        adj[i].push(j);
                    }
                }
            }
        }
    }
    adj
}

fn hopcroft_karp(adj: &[Vec<usize>], n_right: usize) -> usize {
    const NIL: usize = usize::MAX;
    let n_left = adj.len();
    let mut match_left = vec![NIL; n_left];
    let mut match_right = vec![NIL; n_right];
    let mut dist = vec![0usize; n_left];
    let mut matching = 0;

    loop {
        // BFS layering from free left vertices
        let mut queue = VecDeque::new();
        for u in 0..n_left {
            if match_left[u] == NIL {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = NIL;
            }
        }
        let mut found_augmenting = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_right[v];
                if w == NIL {
                    found_augmenting = true;
                } else if dist[w] == NIL {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found_augmenting {
            break;
        }
        // DFS along the layering
        fn try_augment(
            u: usize,
            adj: &[Vec<usize>],
            match_left: &mut [usize],
            match_right: &mut [usize],
            dist: &mut [usize],
        ) -> bool {
            for &v in &adj[u] {
                let w = match_right[v];
                if w == NIL || (dist[w] == dist[u].wrapping_add(1) && try_augment(w, adj, match_left, match_right, dist)) {
                    match_left[u] = v;
                    match_right[v] = u;
                    return true;
                }
            }
            dist[u] = NIL;
            false
        }
        for u in 0..n_left {
            if match_left[u] == NIL && try_augment(u, adj, &mut match_left, &mut match_right, &mut dist) {
                matching += 1;
            }
        }
    }
    matching
}

/// Exact minimum fleet size for one day of trips.
pub fn min_fleet_oracle(day_trips: &TripSet, cfg: &MatchConfig) -> Result<usize> {
    let trips = day_trips.trips();
    if trips.len() > ORACLE_TRIP_GUARD {
        return Err(Error::precondition(format!(
            "{} trips exceed the exact-oracle guard of {ORACLE_TRIP_GUARD}; audit a sample instead",
            trips.len()
        )));
    }
    check_mode(trips, cfg)?;
    let adj = build_adjacency(trips, cfg);
    let matching = hopcroft_karp(&adj, trips.len());
    Ok(trips.len() - matching)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hk_empty_graph() {
        assert_eq!(hopcroft_karp(&[vec![], vec![], vec![]], 3), 0);
    }

    #[test]
    fn hk_perfect_matching() {
        let adj = vec![vec![0], vec![1], vec![2]];
        assert_eq!(hopcroft_karp(&adj, 3), 3);
    }

    #[test]
    fn hk_needs_augmenting_paths() {
        // classic crossing case: greedy matching would get 1, optimum is 2
        let adj = vec![vec![0, 1], vec![0]];
        assert_eq!(hopcroft_karp(&adj, 2), 2);
    }
}

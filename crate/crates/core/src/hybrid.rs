//! The path metric of the sphere with threads attached, restricted to sphere
//! points.
//!
//! Between two thread traversals a shortest path moves along a great circle,
//! so the metric is a shortest-path problem on the complete graph over thread
//! endpoints (edge weight: geodesic distance, or the thread length when a
//! thread joins the two endpoints) plus virtual source and target nodes joined
//! to every endpoint by geodesic distance. A path never enters a thread part
//! way and turns back, since that is dominated by not entering it.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{chordal_distance, geodesic_distance, SpherePoint};
use crate::threads::ThreadSystem;

/// A segment of length `length` glued to the sphere at `a` and `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thread {
    pub a: SpherePoint,
    pub b: SpherePoint,
    pub length: f64,
}

/// Anything that measures distances between sphere points.
pub trait SphereMetric: Sync {
    fn dist(&self, x: &SpherePoint, y: &SpherePoint) -> f64;
}

/// The round (great-circle) metric.
#[derive(Debug, Clone, Copy, Default)]
pub struct Geodesic;

/// The restricted Euclidean metric.
#[derive(Debug, Clone, Copy, Default)]
pub struct Chordal;

impl SphereMetric for Geodesic {
    fn dist(&self, x: &SpherePoint, y: &SpherePoint) -> f64 {
        geodesic_distance(x, y)
    }
}

impl SphereMetric for Chordal {
    fn dist(&self, x: &SpherePoint, y: &SpherePoint) -> f64 {
        chordal_distance(x, y)
    }
}

/// Endpoint tables beyond this many nodes are computed on demand.
pub const DENSE_LIMIT: usize = 5000;

#[derive(Debug, Clone)]
pub struct HybridMetric {
    ambient: usize,
    threads: Vec<Thread>,
    // node 2t is threads[t].a, node 2t + 1 is threads[t].b
    nodes: Vec<SpherePoint>,
    sphere: Option<Vec<f64>>,
}

/// Builds the path metric for a thread system.
pub fn build_metric(system: &ThreadSystem) -> HybridMetric {
    HybridMetric::new(system.net().m() + 1, system.segments())
        .expect("thread system endpoints share the net's dimension")
}

impl HybridMetric {
    /// Metric on the sphere in E^{ambient} with the given threads attached.
    pub fn new(ambient: usize, threads: Vec<Thread>) -> Result<Self> {
        for (t, th) in threads.iter().enumerate() {
            if th.a.ambient_dim() != ambient || th.b.ambient_dim() != ambient {
                return Err(Error::Validation(format!(
                    "thread {t} does not live in E^{ambient}"
                )));
            }
            if !(th.length >= 0.0 && th.length.is_finite()) {
                return Err(Error::Validation(format!(
                    "thread {t} has length {}",
                    th.length
                )));
            }
        }
        let nodes: Vec<SpherePoint> = threads
            .iter()
            .flat_map(|t| [t.a.clone(), t.b.clone()])
            .collect();
        let e = nodes.len();
        let sphere = (e <= DENSE_LIMIT).then(|| {
            let mut table = vec![0.0; e * e];
            table
                .par_chunks_mut(e.max(1))
                .enumerate()
                .for_each(|(u, row)| {
                    for (v, w) in row.iter_mut().enumerate() {
                        *w = geodesic_distance(&nodes[u], &nodes[v]);
                    }
                });
            table
        });
        Ok(Self {
            ambient,
            threads,
            nodes,
            sphere,
        })
    }

    pub fn threads(&self) -> &[Thread] {
        &self.threads
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[SpherePoint] {
        &self.nodes
    }

    fn sphere_weight(&self, u: usize, v: usize) -> f64 {
        match &self.sphere {
            Some(t) => t[u * self.nodes.len() + v],
            None => geodesic_distance(&self.nodes[u], &self.nodes[v]),
        }
    }

    /// Edge weight between endpoint nodes.
    pub fn edge_weight(&self, u: usize, v: usize) -> f64 {
        let w = self.sphere_weight(u, v);
        if u != v && u / 2 == v / 2 {
            w.min(self.threads[u / 2].length)
        } else {
            w
        }
    }

    fn check(&self, p: &SpherePoint) -> Result<()> {
        if p.ambient_dim() != self.ambient {
            return Err(Error::Validation(format!(
                "query point in E^{} for a metric on the sphere in E^{}",
                p.ambient_dim(),
                self.ambient
            )));
        }
        Ok(())
    }

    /// Shortest distance from `x` to `y`, by one dense Dijkstra sweep.
    pub fn distance(&self, x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.sweep(x, y))
    }

    fn sweep(&self, x: &SpherePoint, y: &SpherePoint) -> f64 {
        let e = self.nodes.len();
        let mut best = geodesic_distance(x, y);
        if e == 0 || best == 0.0 {
            return best;
        }
        let mut dist: Vec<f64> = self.nodes.iter().map(|n| geodesic_distance(x, n)).collect();
        let to_y: Vec<f64> = self.nodes.iter().map(|n| geodesic_distance(n, y)).collect();
        let mut done = vec![false; e];
        loop {
            let mut u = usize::MAX;
            let mut du = f64::INFINITY;
            for (k, (&d, &f)) in dist.iter().zip(&done).enumerate() {
                if !f && d < du {
                    du = d;
                    u = k;
                }
            }
            // all remaining labels are at least du, so nothing can beat best
            if u == usize::MAX || du >= best {
                return best;
            }
            done[u] = true;
            best = best.min(du + to_y[u]);
            for v in 0..e {
                if !done[v] {
                    let cand = du + self.edge_weight(u, v);
                    if cand < dist[v] {
                        dist[v] = cand;
                    }
                }
            }
        }
    }

    /// All-pairs endpoint distances for batched queries. Falls back to
    /// per-query sweeps when the endpoint table would be too large.
    pub fn closure(&self) -> HybridClosure<'_> {
        let e = self.nodes.len();
        let table = (e <= DENSE_LIMIT).then(|| {
            let mut table = vec![0.0; e * e];
            table
                .par_chunks_mut(e.max(1))
                .enumerate()
                .for_each(|(u, row)| {
                    row.iter_mut()
                        .enumerate()
                        .for_each(|(v, d)| *d = self.edge_weight(u, v));
                });
            // Floyd-Warshall; the dense inner loop vectorizes far better than
            // repeated array Dijkstra
            let mut pivot = vec![0.0; e];
            for k in 0..e {
                pivot.copy_from_slice(&table[k * e..(k + 1) * e]);
                table.par_chunks_mut(e).for_each(|row| {
                    let dik = row[k];
                    for (d, p) in row.iter_mut().zip(&pivot) {
                        *d = d.min(dik + p);
                    }
                });
            }
            table
        });
        HybridClosure {
            metric: self,
            table,
        }
    }

    fn single_source(&self, s: usize, dist: &mut [f64]) {
        let e = self.nodes.len();
        dist.fill(f64::INFINITY);
        dist[s] = 0.0;
        let mut done = vec![false; e];
        for _ in 0..e {
            let mut u = usize::MAX;
            let mut du = f64::INFINITY;
            for (k, (&d, &f)) in dist.iter().zip(&done).enumerate() {
                if !f && d < du {
                    du = d;
                    u = k;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            for v in 0..e {
                if !done[v] {
                    let cand = du + self.edge_weight(u, v);
                    if cand < dist[v] {
                        dist[v] = cand;
                    }
                }
            }
        }
    }

    /// Writes `i,j,d_sphere,d_hybrid` for every ordered pair of endpoint
    /// nodes.
    pub fn write_pair_csv<W: Write>(&self, out: W) -> Result<()> {
        let closure = self.closure();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "d_sphere", "d_hybrid"])
            .map_err(csv_error)?;
        let e = self.nodes.len();
        for i in 0..e {
            for j in 0..e {
                w.serialize((i, j, self.sphere_weight(i, j), closure.node_distance(i, j)))
                    .map_err(csv_error)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

impl SphereMetric for HybridMetric {
    /// # Panics
    /// On a dimension mismatch; use [`HybridMetric::distance`] to get an error.
    fn dist(&self, x: &SpherePoint, y: &SpherePoint) -> f64 {
        self.distance(x, y).expect("query point dimension")
    }
}

/// Precomputed endpoint-to-endpoint distances of a [`HybridMetric`].
pub struct HybridClosure<'a> {
    metric: &'a HybridMetric,
    table: Option<Vec<f64>>,
}

impl HybridClosure<'_> {
    pub fn node_distance(&self, u: usize, v: usize) -> f64 {
        match &self.table {
            Some(t) => t[u * self.metric.nodes.len() + v],
            None => {
                let mut row = vec![0.0; self.metric.nodes.len()];
                self.metric.single_source(u, &mut row);
                row[v]
            }
        }
    }

    pub fn distance(&self, x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
        self.metric.check(x)?;
        self.metric.check(y)?;
        let Some(table) = &self.table else {
            return Ok(self.metric.sweep(x, y));
        };
        let nodes = &self.metric.nodes;
        let e = nodes.len();
        let mut best = geodesic_distance(x, y);
        if e == 0 || best == 0.0 {
            return Ok(best);
        }
        let from_x: Vec<f64> = nodes.iter().map(|n| geodesic_distance(x, n)).collect();
        let to_y: Vec<f64> = nodes.iter().map(|n| geodesic_distance(n, y)).collect();
        for (u, &a) in from_x.iter().enumerate() {
            if a >= best {
                continue;
            }
            let row = &table[u * e..(u + 1) * e];
            for (&d, &b) in row.iter().zip(&to_y) {
                let c = a + d + b;
                if c < best {
                    best = c;
                }
            }
        }
        Ok(best)
    }
}

impl SphereMetric for HybridClosure<'_> {
    fn dist(&self, x: &SpherePoint, y: &SpherePoint) -> f64 {
        self.distance(x, y).expect("query point dimension")
    }
}

/// Largest thread count [`brute_force_distance`] will enumerate.
pub const BRUTE_FORCE_LIMIT: usize = 8;

/// Exhaustive minimum over every sequence of distinct threads, each traversed
/// in either direction, with geodesic travel in between.
pub fn brute_force_distance(threads: &[Thread], x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    if threads.len() > BRUTE_FORCE_LIMIT {
        return Err(Error::Capacity(format!(
            "{} threads exceed the enumeration limit of {BRUTE_FORCE_LIMIT}",
            threads.len()
        )));
    }
    if x.ambient_dim() != y.ambient_dim()
        || threads.iter().any(|t| t.a.ambient_dim() != x.ambient_dim())
    {
        return Err(Error::Validation(
            "points and threads differ in dimension".into(),
        ));
    }
    fn walk(
        threads: &[Thread],
        used: &mut [bool],
        at: &SpherePoint,
        cost: f64,
        y: &SpherePoint,
        best: &mut f64,
    ) {
        *best = best.min(cost + geodesic_distance(at, y));
        for t in 0..threads.len() {
            if used[t] {
                continue;
            }
            used[t] = true;
            let th = &threads[t];
            for (entry, exit) in [(&th.a, &th.b), (&th.b, &th.a)] {
                walk(
                    threads,
                    used,
                    exit,
                    cost + geodesic_distance(at, entry) + th.length,
                    y,
                    best,
                );
            }
            used[t] = false;
        }
    }
    let mut best = f64::INFINITY;
    walk(
        threads,
        &mut vec![false; threads.len()],
        x,
        0.0,
        y,
        &mut best,
    );
    Ok(best)
}

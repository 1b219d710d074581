//! Epsilon-nets on S^m: centers whose eps-balls are pairwise disjoint and
//! whose 2 eps-balls cover the sphere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cap_volume, dot, geodesic_distance, norm, unit_sphere_measure, SpherePoint};
use crate::error::{Error, Result};
use crate::tolerance::STRICT_MARGIN;

pub const NET_SCHEMA: &str = "net/1";

#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    m: usize,
    eps: f64,
    seed: u64,
    centers: Vec<SpherePoint>,
}

/// Configures [`build_net`].
#[derive(Debug, Clone)]
pub struct NetBuilder {
    m: usize,
    eps: f64,
    seed: u64,
    pool_factor: f64,
}

impl NetBuilder {
    pub fn new(m: usize, eps: f64, seed: u64) -> Self {
        Self {
            m,
            eps,
            seed,
            pool_factor: 50.0,
        }
    }

    /// Candidate pool size as a multiple of `Vol(S^m) / Vol(B(eps))`.
    pub fn pool_factor(mut self, factor: f64) -> Self {
        self.pool_factor = factor;
        self
    }

    /// Greedy farthest-point insertion over a seeded candidate pool, followed
    /// by a repair pass that inserts any Voronoi vertex still farther than
    /// 2 eps from every center.
    pub fn build(&self) -> Result<Net> {
        let (m, eps) = (self.m, self.eps);
        if m < 2 {
            return Err(Error::Parameter(format!(
                "sphere dimension m = {m} must be >= 2"
            )));
        }
        if !(eps > 0.0 && eps < std::f64::consts::PI) {
            return Err(Error::Parameter(format!("eps = {eps} must lie in (0, pi)")));
        }
        if !(self.pool_factor > 0.0) {
            return Err(Error::Parameter("pool factor must be positive".into()));
        }
        let threshold = 2.0 * eps;
        let pool_size = (self.pool_factor * unit_sphere_measure(m) / cap_volume(m, eps))
            .ceil()
            .clamp(64.0, 2.0e5) as usize;

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let pool: Vec<SpherePoint> = (0..pool_size)
            .map(|_| SpherePoint::random(&mut rng, m + 1))
            .collect();

        let mut centers = vec![pool[0].clone()];
        let mut gap: Vec<f64> = pool
            .iter()
            .map(|p| geodesic_distance(p, &pool[0]))
            .collect();

        loop {
            let (idx, far) = argmax(&gap);
            if far <= threshold + STRICT_MARGIN {
                break;
            }
            let c = pool[idx].clone();
            update_gaps(&pool, &mut gap, &c);
            centers.push(c);
        }

        // Repair: the farthest points from a finite center set sit on Voronoi
        // vertices (circumcenters of m+1 centers) or at antipodes of centers.
        let neighbours = (m + 4).min(centers.len().max(1));
        loop {
            let candidates: Vec<SpherePoint> = pool
                .par_iter()
                .zip(gap.par_iter())
                .filter(|(_, &g)| g > eps)
                .flat_map_iter(|(p, _)| local_vertices(p, &centers, neighbours, m + 1))
                .chain(centers.par_iter().map(SpherePoint::antipode))
                .collect();
            let best = candidates
                .iter()
                .map(|c| (nearest_distance(c, &centers), c))
                .max_by(|a, b| a.0.total_cmp(&b.0));
            match best {
                Some((d, c)) if d > threshold + STRICT_MARGIN => {
                    let c = c.clone();
                    update_gaps(&pool, &mut gap, &c);
                    centers.push(c);
                }
                _ => break,
            }
        }

        Ok(Net {
            m,
            eps,
            seed: self.seed,
            centers,
        })
    }
}

/// Builds an eps-net on S^m with the default pool size.
pub fn build_net(m: usize, eps: f64, seed: u64) -> Result<Net> {
    NetBuilder::new(m, eps, seed).build()
}

fn argmax(values: &[f64]) -> (usize, f64) {
    values.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
    )
}

fn update_gaps(pool: &[SpherePoint], gap: &mut [f64], c: &SpherePoint) {
    gap.par_iter_mut().zip(pool.par_iter()).for_each(|(g, p)| {
        *g = g.min(geodesic_distance(p, c));
    });
}

fn nearest_distance(p: &SpherePoint, centers: &[SpherePoint]) -> f64 {
    centers
        .iter()
        .map(|c| geodesic_distance(p, c))
        .fold(f64::INFINITY, f64::min)
}

/// Circumcenters (both signs) of every `tuple`-subset of the `k` centers
/// nearest to `p`.
fn local_vertices(
    p: &SpherePoint,
    centers: &[SpherePoint],
    k: usize,
    tuple: usize,
) -> Vec<SpherePoint> {
    if centers.len() < tuple {
        return Vec::new();
    }
    let mut order: Vec<(f64, usize)> = centers
        .iter()
        .enumerate()
        .map(|(i, c)| (geodesic_distance(p, c), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let near: Vec<&SpherePoint> = order.iter().take(k).map(|&(_, i)| &centers[i]).collect();

    let mut out = Vec::new();
    for subset in combinations(near.len(), tuple) {
        let pts: Vec<&SpherePoint> = subset.iter().map(|&i| near[i]).collect();
        if let Some(c) = circumcenter(&pts) {
            out.push(c.antipode());
            out.push(c);
        }
    }
    out
}

/// Unit vector equidistant from all of `pts` (m+1 points in E^{m+1}), if the
/// points are in general position.
fn circumcenter(pts: &[&SpherePoint]) -> Option<SpherePoint> {
    let dim = pts[0].ambient_dim();
    let base = pts[0].coords();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(pts.len() - 1);
    for p in &pts[1..] {
        let mut v: Vec<f64> = p.coords().iter().zip(base).map(|(a, b)| a - b).collect();
        for r in &rows {
            let d = dot(&v, r);
            v.iter_mut().zip(r).for_each(|(vi, ri)| *vi -= d * ri);
        }
        let n = norm(&v);
        if n < 1e-10 {
            return None;
        }
        rows.push(v.into_iter().map(|x| x / n).collect());
    }
    let mut best: Option<Vec<f64>> = None;
    let mut best_norm = 0.0;
    for k in 0..dim {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        for r in &rows {
            let d = r[k];
            v.iter_mut().zip(r).for_each(|(vi, ri)| *vi -= d * ri);
        }
        let n = norm(&v);
        if n > best_norm {
            best_norm = n;
            best = Some(v.into_iter().map(|x| x / n).collect());
        }
    }
    best.filter(|_| best_norm > 1e-8)
        .map(SpherePoint::from_unit)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

impl Net {
    /// Reassembles a net from stored centers, re-checking dimensions and the
    /// packing condition.
    pub fn from_centers(m: usize, eps: f64, seed: u64, centers: Vec<SpherePoint>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::Validation("a net needs at least one center".into()));
        }
        if let Some(bad) = centers.iter().find(|c| c.sphere_dim() != m) {
            return Err(Error::Validation(format!(
                "center of dimension {} in a net on S^{m}",
                bad.sphere_dim()
            )));
        }
        if !(eps > 0.0 && eps < std::f64::consts::PI) {
            return Err(Error::Parameter(format!("eps = {eps} must lie in (0, pi)")));
        }
        let net = Self {
            m,
            eps,
            seed,
            centers,
        };
        let sep = net.min_separation();
        if sep <= 2.0 * eps {
            return Err(Error::Validation(format!(
                "centers are {sep} apart, not more than 2 eps = {}",
                2.0 * eps
            )));
        }
        Ok(net)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// N(eps).
    pub fn count(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[SpherePoint] {
        &self.centers
    }

    /// Smallest pairwise geodesic distance between centers; infinite for a
    /// single center.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.centers.iter().enumerate() {
            for b in &self.centers[i + 1..] {
                best = best.min(geodesic_distance(a, b));
            }
        }
        best
    }

    /// Index of and distance to the nearest center.
    pub fn nearest(&self, p: &SpherePoint) -> (usize, f64) {
        self.centers
            .iter()
            .enumerate()
            .map(|(i, c)| (i, geodesic_distance(p, c)))
            .fold(
                (0, f64::INFINITY),
                |acc, x| if x.1 < acc.1 { x } else { acc },
            )
    }

    /// Largest distance from a sample point to its nearest center.
    pub fn covering_radius(&self, sample: &[SpherePoint]) -> f64 {
        sample
            .par_iter()
            .map(|p| self.nearest(p).1)
            .reduce(|| 0.0, f64::max)
    }

    pub fn to_document(&self) -> NetDocument {
        NetDocument {
            schema: NET_SCHEMA.to_string(),
            m: self.m,
            eps: self.eps,
            seed: self.seed,
            centers: self.centers.clone(),
        }
    }
}

/// Serialized form of a [`Net`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetDocument {
    pub schema: String,
    pub m: usize,
    pub eps: f64,
    pub seed: u64,
    pub centers: Vec<SpherePoint>,
}

impl TryFrom<NetDocument> for Net {
    type Error = Error;

    fn try_from(doc: NetDocument) -> Result<Self> {
        if doc.schema != NET_SCHEMA {
            return Err(Error::Schema {
                expected: NET_SCHEMA.into(),
                found: doc.schema,
            });
        }
        Net::from_centers(doc.m, doc.eps, doc.seed, doc.centers)
    }
}

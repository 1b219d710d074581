//! Sampled checks that the sphere with threads approaches the sphere with the
//! restricted Euclidean distance: uniform deviation, Lipschitz ratios, the
//! small-angle condition, and an end-to-end suite over a schedule of eps.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::budget::{iterated_budget, ProfileParams};
use crate::error::{Error, Result};
use crate::hybrid::{build_metric, csv_error, SphereMetric};
use crate::sphere::{build_net, chordal_distance, geodesic_distance, SpherePoint};
use crate::threads::ThreadSystem;
use crate::tolerance::Tolerances;

pub const REPORT_SCHEMA: &str = "report/1";

/// Uniform deviation allowed per unit eps.
pub const DEVIATION_FACTOR: f64 = 12.0;
/// Bound on `d_Y / d_E` over all pairs.
pub const LAMBDA: f64 = 13.0;
/// Bound on `d_Y / d_E` for pairs closer than rho in the chordal metric.
pub const NEAR_DIAGONAL_LAMBDA: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub x: SpherePoint,
    pub y: SpherePoint,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Independent uniform pairs on S^m.
pub fn sample_pairs(m: usize, count: usize, seed: u64, stream: u64) -> Vec<PairSample> {
    let mut rng = rng_for(seed, stream);
    (0..count)
        .map(|_| PairSample {
            x: SpherePoint::random(&mut rng, m + 1),
            y: SpherePoint::random(&mut rng, m + 1),
        })
        .collect()
}

/// Pairs with chordal distance below `rho`: a uniform x and y the exponential
/// of a tangent Gaussian of scale rho/2, keeping only those closer than rho.
pub fn near_diagonal_pairs(
    m: usize,
    rho: f64,
    count: usize,
    seed: u64,
    stream: u64,
) -> Vec<PairSample> {
    let mut rng = rng_for(seed, stream);
    let mut out = Vec::with_capacity(count);
    // each draw lands inside with probability well above 1/4
    for _ in 0..count.saturating_mul(64) {
        if out.len() == count {
            break;
        }
        let x = SpherePoint::random(&mut rng, m + 1);
        let v: Vec<f64> = (0..m)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                0.5 * rho * g
            })
            .collect();
        let len = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if len == 0.0 {
            continue;
        }
        let frame = x.tangent_frame();
        let mut dir = vec![0.0; m + 1];
        for (c, e) in v.iter().zip(&frame) {
            dir.iter_mut().zip(e).for_each(|(d, ei)| *d += c / len * ei);
        }
        let y = x.exp(&dir, len);
        if chordal_distance(&x, &y) < rho {
            out.push(PairSample { x, y });
        }
    }
    out
}

/// `max (d(x, y) - d_E(x, y))` over the pairs.
pub fn uniform_deviation<M: SphereMetric + ?Sized>(metric: &M, pairs: &[PairSample]) -> f64 {
    pairs
        .par_iter()
        .map(|p| metric.dist(&p.x, &p.y) - chordal_distance(&p.x, &p.y))
        .reduce(|| f64::NEG_INFINITY, f64::max)
        .max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Coincident pairs left out of the ratios.
    pub skipped: usize,
}

/// Extremes of `d(x, y) / d_E(x, y)`, skipping coincident pairs.
pub fn lipschitz_ratios<M: SphereMetric + ?Sized>(metric: &M, pairs: &[PairSample]) -> RatioStats {
    let ratios: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|p| {
            let de = chordal_distance(&p.x, &p.y);
            (de > 0.0).then(|| metric.dist(&p.x, &p.y) / de)
        })
        .collect();
    let kept: Vec<f64> = ratios.iter().flatten().copied().collect();
    RatioStats {
        min_ratio: kept.iter().copied().fold(f64::INFINITY, f64::min),
        max_ratio: kept.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        skipped: ratios.len() - kept.len(),
    }
}

/// Whether `r^2 / 100 <= 2 - 2 cos r` on a 10^4-point grid of `[0, rho]`.
pub fn small_angle_check(rho: f64) -> bool {
    const POINTS: usize = 10_000;
    (0..POINTS).all(|k| {
        let r = rho * k as f64 / (POINTS - 1) as f64;
        // 2 - 2 cos r = 4 sin^2(r/2), exact for small r
        0.01 * r * r <= 4.0 * (0.5 * r).sin().powi(2)
    })
}

/// Half the largest disagreement between two metrics over shared pairs: the
/// distortion of the identity correspondence, an upper bound for the
/// Gromov-Hausdorff distance between the sampled spaces.
pub fn gh_sample_estimate<A, B>(a: &A, b: &B, pairs: &[PairSample]) -> f64
where
    A: SphereMetric + ?Sized,
    B: SphereMetric + ?Sized,
{
    0.5 * pairs
        .par_iter()
        .map(|p| (a.dist(&p.x, &p.y) - b.dist(&p.x, &p.y)).abs())
        .reduce(|| 0.0, f64::max)
}

/// The same estimate for two distance matrices over one index set.
pub fn gh_matrix_estimate(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() != b.len()
        || a.iter()
            .zip(b)
            .any(|(r, s)| r.len() != a.len() || s.len() != a.len())
    {
        return Err(Error::Validation(
            "distance matrices must be square and of equal size".into(),
        ));
    }
    Ok(0.5
        * a.iter()
            .zip(b)
            .flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max))
}

/// Whether every endpoint ball of radius rho is at least 2 rho from every
/// other, so a rho-ball about any point meets at most one of them.
pub fn single_ball_check(system: &ThreadSystem) -> bool {
    let pts: Vec<&SpherePoint> = system.endpoints().iter().map(|(_, _, q)| q).collect();
    let bound = 4.0 * system.rho();
    pts.par_iter().enumerate().all(|(a, p)| {
        pts[a + 1..]
            .iter()
            .all(|q| geodesic_distance(p, q) >= bound)
    })
}

/// True when `values` never increases, except for at most one step that
/// rises by no more than 10%.
pub fn trend_ok(values: &[f64]) -> bool {
    let rises: Vec<(f64, f64)> = values
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1]))
        .collect();
    match rises.as_slice() {
        [] => true,
        [(a, b)] => *b <= 1.1 * a,
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub m: usize,
    pub schedule: Vec<f64>,
    pub seeds: Vec<u64>,
    pub sample_size: usize,
    pub profile_params: ProfileParams,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordStats {
    #[serde(rename = "N")]
    pub count: usize,
    #[serde(rename = "K")]
    pub thread_count: usize,
    pub rho: f64,
    pub sup_deviation: f64,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub skipped_pairs: usize,
    pub near_diagonal_pairs: usize,
    pub near_diagonal_max_ratio: f64,
    pub gh_estimate: f64,
    pub twelve_eps_ok: bool,
    pub lambda_ok: bool,
    pub min_ratio_ok: bool,
    pub near_diagonal_ok: bool,
    pub small_angle_ok: bool,
    pub single_ball_ok: bool,
    /// Flat budget from tunnels to threads; `None` if no tunnel fits.
    #[serde(rename = "dF_budget")]
    pub df_budget: Option<f64>,
    #[serde(rename = "dGH_budget")]
    pub dgh_budget: Option<f64>,
    pub budget_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub eps: f64,
    pub seed: u64,
    pub sample_size: usize,
    pub wall_ms: f64,
    pub error: Option<String>,
    pub stats: Option<RecordStats>,
}

impl ConvergenceRecord {
    /// Whether the 12 eps bound, the lambda bound and the ratio floor hold.
    pub fn gates_ok(&self) -> bool {
        self.stats
            .as_ref()
            .is_some_and(|s| s.twelve_eps_ok && s.lambda_ok && s.min_ratio_ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub schema: String,
    pub m: usize,
    pub schedule: Vec<f64>,
    pub seeds: Vec<u64>,
    pub sample_size: usize,
    pub profile_params: ProfileParams,
    pub per_eps: Vec<ConvergenceRecord>,
    /// Per seed: sup deviations along the schedule are nonincreasing up to
    /// one rise of at most 10%.
    pub trend_ok: Vec<bool>,
}

impl ConvergenceReport {
    pub fn all_gates_ok(&self) -> bool {
        self.per_eps.iter().all(ConvergenceRecord::gates_ok)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != REPORT_SCHEMA {
            return Err(Error::Schema {
                expected: REPORT_SCHEMA.into(),
                found: self.schema.clone(),
            });
        }
        if self.per_eps.len() != self.schedule.len() * self.seeds.len() {
            return Err(Error::Validation(
                "report rows do not cover schedule x seeds".into(),
            ));
        }
        Ok(())
    }

    /// One row per (eps, seed):
    /// `eps,N,K,sup_dev,max_ratio,min_ratio,gh_est,dF_budget,dGH_budget,seed,wall_ms`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "eps",
            "N",
            "K",
            "sup_dev",
            "max_ratio",
            "min_ratio",
            "gh_est",
            "dF_budget",
            "dGH_budget",
            "seed",
            "wall_ms",
        ])
        .map_err(csv_error)?;
        for r in &self.per_eps {
            let s = r.stats.as_ref();
            let num = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
            w.write_record([
                fmt17(r.eps),
                s.map(|s| s.count.to_string()).unwrap_or_default(),
                s.map(|s| s.thread_count.to_string()).unwrap_or_default(),
                num(s.map(|s| s.sup_deviation)),
                num(s.map(|s| s.max_ratio)),
                num(s.map(|s| s.min_ratio)),
                num(s.map(|s| s.gh_estimate)),
                num(s.and_then(|s| s.df_budget)),
                num(s.and_then(|s| s.dgh_budget)),
                r.seed.to_string(),
                format!("{:.3}", r.wall_ms),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `eps,sup_dev,dF_budget` for plotting.
    pub fn write_plot_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["eps", "seed", "sup_dev", "dF_budget"])
            .map_err(csv_error)?;
        for r in &self.per_eps {
            let s = r.stats.as_ref();
            w.write_record([
                fmt17(r.eps),
                r.seed.to_string(),
                s.map(|s| fmt17(s.sup_deviation)).unwrap_or_default(),
                s.and_then(|s| s.df_budget).map(fmt17).unwrap_or_default(),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Statistics for one eps and seed.
pub fn evaluate(config: &SuiteConfig, eps: f64, seed: u64) -> Result<RecordStats> {
    let net = build_net(config.m, eps, seed)?;
    let system = ThreadSystem::from_net(&net)?;
    let metric = build_metric(&system);
    let closure = metric.closure();
    let rho = system.rho();
    let stream = eps.to_bits();

    let pairs = sample_pairs(config.m, config.sample_size, seed, stream);
    let sup_deviation = uniform_deviation(&closure, &pairs);
    let ratios = lipschitz_ratios(&closure, &pairs);
    let gh_estimate = gh_sample_estimate(&closure, &crate::hybrid::Chordal, &pairs);
    let near = near_diagonal_pairs(
        config.m,
        rho,
        config.sample_size,
        seed,
        stream ^ 0x9e37_79b9_7f4a_7c15,
    );
    let near_ratios = lipschitz_ratios(&closure, &near);

    let (df_budget, dgh_budget, budget_error) =
        match iterated_budget(&system, config.profile_params) {
            Ok(b) => (Some(b.total_df), Some(b.total_dgh), None),
            Err(e) => (None, None, Some(e.to_string())),
        };
    let min_ratio = if ratios.min_ratio.is_finite() {
        ratios.min_ratio
    } else {
        1.0
    };
    let max_ratio = if ratios.max_ratio.is_finite() {
        ratios.max_ratio
    } else {
        1.0
    };
    let near_max = if near_ratios.max_ratio.is_finite() {
        near_ratios.max_ratio
    } else {
        1.0
    };
    Ok(RecordStats {
        count: net.count(),
        thread_count: system.thread_count(),
        rho,
        sup_deviation,
        max_ratio,
        min_ratio,
        skipped_pairs: ratios.skipped,
        near_diagonal_pairs: near.len(),
        near_diagonal_max_ratio: near_max,
        gh_estimate,
        twelve_eps_ok: sup_deviation <= DEVIATION_FACTOR * eps,
        lambda_ok: max_ratio <= LAMBDA,
        min_ratio_ok: min_ratio >= 1.0 - config.tolerances.metric,
        near_diagonal_ok: near_max <= NEAR_DIAGONAL_LAMBDA,
        small_angle_ok: small_angle_check(rho),
        single_ball_ok: single_ball_check(&system),
        df_budget,
        dgh_budget,
        budget_error,
    })
}

/// Runs every (eps, seed) of the schedule; failures are recorded per row and
/// the suite carries on.
pub fn run_convergence_suite(config: &SuiteConfig) -> Result<ConvergenceReport> {
    if config.m < 2 {
        return Err(Error::Validation(format!("m = {} must be >= 2", config.m)));
    }
    if config.sample_size == 0 {
        return Err(Error::Validation("sample_size must be >= 1".into()));
    }
    if config.schedule.is_empty() || config.seeds.is_empty() {
        return Err(Error::Validation(
            "schedule and seeds must be nonempty".into(),
        ));
    }
    if config.schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Validation(
            "eps schedule must be strictly decreasing".into(),
        ));
    }
    let jobs: Vec<(f64, u64)> = config
        .schedule
        .iter()
        .flat_map(|&e| config.seeds.iter().map(move |&s| (e, s)))
        .collect();
    let per_eps: Vec<ConvergenceRecord> = jobs
        .par_iter()
        .map(|&(eps, seed)| {
            let start = Instant::now();
            let result = evaluate(config, eps, seed);
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let (stats, error) = match result {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(e.to_string())),
            };
            ConvergenceRecord {
                eps,
                seed,
                sample_size: config.sample_size,
                wall_ms,
                error,
                stats,
            }
        })
        .collect();
    let trend = config
        .seeds
        .iter()
        .map(|&seed| {
            let devs: Vec<f64> = per_eps
                .iter()
                .filter(|r| r.seed == seed)
                .filter_map(|r| r.stats.as_ref().map(|s| s.sup_deviation))
                .collect();
            trend_ok(&devs)
        })
        .collect();
    Ok(ConvergenceReport {
        schema: REPORT_SCHEMA.to_string(),
        m: config.m,
        schedule: config.schedule.clone(),
        seeds: config.seeds.clone(),
        sample_size: config.sample_size,
        profile_params: config.profile_params,
        per_eps,
        trend_ok: trend,
    })
}

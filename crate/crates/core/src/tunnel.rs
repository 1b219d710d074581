//! Rotationally symmetric tunnels: warped products `ds^2 + r(s)^2 g` over the
//! round (m-1)-sphere, and one explicit profile family joining two unit-sphere
//! caps of radius rho through a cylindrical neck.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::csv_error;
use crate::quad::{gauss_legendre, uniform_breaks};
use crate::sphere::unit_sphere_measure;

/// Radius and its first two arc-length derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialSample {
    pub r: f64,
    pub dr: f64,
    pub d2r: f64,
}

/// A warped product over the round (m-1)-sphere, parametrized by arc length
/// along the meridian.
pub trait RadialProfile: Sync {
    /// Dimension m of the warped product.
    fn dim(&self) -> usize;

    /// Arc-length interval the profile is defined on.
    fn domain(&self) -> (f64, f64);

    /// Values at `s`; callers keep `s` inside [`domain`](Self::domain).
    fn sample(&self, s: f64) -> RadialSample;

    /// Radius of the ball the profile replaces; the tube check compares
    /// against `2 pi` times this.
    fn outer_radius(&self) -> f64;

    /// Points where the profile may lose smoothness; quadrature panels never
    /// straddle them.
    fn breaks(&self) -> Vec<f64> {
        let (a, b) = self.domain();
        uniform_breaks(a, b, 64)
    }
}

/// Scalar curvature of `ds^2 + r^2 g_{S^{m-1}}`:
/// `(m-1) [ (m-2)(1 - r'^2)/r^2 - 2 r''/r ]`.
pub fn warped_scalar_curvature(m: usize, at: RadialSample) -> f64 {
    let m = m as f64;
    (m - 1.0) * ((m - 2.0) * (1.0 - at.dr * at.dr) / (at.r * at.r) - 2.0 * at.d2r / at.r)
}

fn check_domain<P: RadialProfile + ?Sized>(p: &P, s: f64) -> Result<()> {
    let (a, b) = p.domain();
    let slack = 1e-12 * (b - a).abs().max(1.0);
    if !(s >= a - slack && s <= b + slack) {
        return Err(Error::Domain(format!(
            "s = {s} outside the profile domain [{a}, {b}]"
        )));
    }
    Ok(())
}

pub fn scalar_curvature<P: RadialProfile + ?Sized>(p: &P, s: f64) -> Result<f64> {
    check_domain(p, s)?;
    let (a, b) = p.domain();
    Ok(warped_scalar_curvature(p.dim(), p.sample(s.clamp(a, b))))
}

/// `omega_{m-1} * integral of r^{m-1} ds`.
pub fn profile_volume<P: RadialProfile + ?Sized>(p: &P) -> f64 {
    let k = p.dim() as i32 - 1;
    unit_sphere_measure(p.dim() - 1)
        * gauss_legendre(|s| p.sample(s).r.powi(k), &refined(&p.breaks(), 4))
}

/// `integral of r^k ds`, used for partial volumes.
pub(crate) fn radial_moment<P: RadialProfile + ?Sized>(p: &P, k: i32) -> f64 {
    gauss_legendre(|s| p.sample(s).r.powi(k), &refined(&p.breaks(), 4))
}

/// Splits every panel into `parts` equal pieces.
fn refined(breaks: &[f64], parts: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(breaks.len() * parts);
    for w in breaks.windows(2) {
        for k in 0..parts {
            out.push(w[0] + (w[1] - w[0]) * k as f64 / parts as f64);
        }
    }
    if let Some(&last) = breaks.last() {
        out.push(last);
    }
    out
}

/// Evenly spaced samples with curvature, for export and gates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub s: f64,
    pub r: f64,
    pub r_prime: f64,
    pub r_double_prime: f64,
    pub scalar_curvature: f64,
}

pub fn sample_grid<P: RadialProfile + ?Sized>(p: &P, count: usize) -> Vec<ProfileSample> {
    let (a, b) = p.domain();
    uniform_breaks(a, b, count.max(2) - 1)
        .into_par_iter()
        .map(|s| {
            let at = p.sample(s);
            ProfileSample {
                s,
                r: at.r,
                r_prime: at.dr,
                r_double_prime: at.d2r,
                scalar_curvature: warped_scalar_curvature(p.dim(), at),
            }
        })
        .collect()
}

/// Writes `s,r,r_prime,r_double_prime,scalar_curvature` rows.
pub fn write_profile_csv<W: Write>(samples: &[ProfileSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in samples {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Resolution of the meridian-by-angle graph used for diameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceGrid {
    pub rows: usize,
    pub cols: usize,
}

impl Default for SurfaceGrid {
    fn default() -> Self {
        Self {
            rows: 201,
            cols: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiameterReport {
    pub diameter: f64,
    /// Largest graph distance from a surface point to the meridian at angle 0.
    pub tube_radius: f64,
    pub tube_ok: bool,
}

/// Diameter estimate and tubular-neighbourhood check.
///
/// Any two points of the warped product lie on a totally geodesic surface of
/// revolution through the axis, so the computation runs on that surface:
/// rows along the meridian, columns over the angle in [0, pi] (reflection
/// symmetry covers the other half), edges to the 16 nearest lattice
/// directions. By rotation invariance it suffices to start paths at angle 0.
pub fn diameter_and_tube_check<P: RadialProfile + ?Sized>(
    p: &P,
    grid: SurfaceGrid,
) -> DiameterReport {
    let rows = grid.rows.max(3);
    let cols = grid.cols.max(3);
    let (a, b) = p.domain();
    let s = uniform_breaks(a, b, rows - 1);
    let r: Vec<f64> = s.iter().map(|&x| p.sample(x).r).collect();
    let ds = (b - a) / (rows - 1) as f64;
    let dphi = std::f64::consts::PI / (cols - 1) as f64;
    let graph = SurfaceGraph {
        rows,
        cols,
        r,
        ds,
        dphi,
    };

    let diameter = (0..rows)
        .into_par_iter()
        .map(|i| graph.farthest(&[i * cols]))
        .reduce(|| 0.0, f64::max);
    let meridian: Vec<usize> = (0..rows).map(|i| i * cols).collect();
    let tube_radius = graph.farthest(&meridian);
    DiameterReport {
        diameter,
        tube_radius,
        tube_ok: tube_radius <= 2.0 * std::f64::consts::PI * p.outer_radius(),
    }
}

struct SurfaceGraph {
    rows: usize,
    cols: usize,
    r: Vec<f64>,
    ds: f64,
    dphi: f64,
}

const MOVES: [(i64, i64); 8] = [
    (0, 1),
    (1, 0),
    (1, 1),
    (1, -1),
    (1, 2),
    (2, 1),
    (1, -2),
    (2, -1),
];

#[derive(PartialEq)]
struct Label(f64, usize);

impl Eq for Label {}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl SurfaceGraph {
    fn edge(&self, i: usize, di: i64, dj: i64) -> f64 {
        let j = (i as i64 + di) as usize;
        let lo = i.min(j);
        let hi = i.max(j);
        let rm = self.r[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
        let along = di as f64 * self.ds;
        let across = rm * dj as f64 * self.dphi;
        (along * along + across * across).sqrt()
    }

    /// Largest shortest-path distance from the given sources.
    fn farthest(&self, sources: &[usize]) -> f64 {
        let n = self.rows * self.cols;
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            dist[s] = 0.0;
            heap.push(Label(0.0, s));
        }
        while let Some(Label(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            let (i, j) = ((u / self.cols) as i64, (u % self.cols) as i64);
            for &(di, dj) in &MOVES {
                for (si, sj) in [(di, dj), (-di, -dj)] {
                    let (ni, nj) = (i + si, j + sj);
                    if ni < 0 || nj < 0 || ni >= self.rows as i64 || nj >= self.cols as i64 {
                        continue;
                    }
                    let v = ni as usize * self.cols + nj as usize;
                    let nd = d + self.edge(i as usize, si, sj);
                    if nd < dist[v] {
                        dist[v] = nd;
                        heap.push(Label(nd, v));
                    }
                }
            }
        }
        dist.into_iter().fold(0.0, f64::max)
    }
}

/// Constant radius `radius` over `[-length/2, length/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub m: usize,
    pub radius: f64,
    pub length: f64,
}

impl RadialProfile for Cylinder {
    fn dim(&self) -> usize {
        self.m
    }

    fn domain(&self) -> (f64, f64) {
        (-0.5 * self.length, 0.5 * self.length)
    }

    fn sample(&self, _s: f64) -> RadialSample {
        RadialSample {
            r: self.radius,
            dr: 0.0,
            d2r: 0.0,
        }
    }

    fn outer_radius(&self) -> f64 {
        self.radius
    }
}

/// The unit round m-sphere, `r = sin s` on `[0, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundSphere {
    pub m: usize,
}

impl RadialProfile for RoundSphere {
    fn dim(&self) -> usize {
        self.m
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, std::f64::consts::PI)
    }

    fn sample(&self, s: f64) -> RadialSample {
        let (sn, cs) = s.sin_cos();
        RadialSample {
            r: sn,
            dr: cs,
            d2r: -sn,
        }
    }

    fn outer_radius(&self) -> f64 {
        1.0
    }
}

// Width of the tanh switch that lets the bend settle onto the neck.
const SETTLE_WIDTH: f64 = 0.05;
// The bend is over once the meridian is this close to axial.
const FLAT_ANGLE: f64 = 1e-13;

/// The half-tunnel from the boundary of the removed cap to the neck,
/// shared by every tunnel length with the same `(m, rho0, rho)`.
///
/// The meridian is tracked by its angle `theta` below the axis, so that
/// `r' = -sin theta` and `t' = cos theta` (t axial). Along the arc length u
/// from the cap boundary:
/// * collar, `u < w`: the unit sphere itself, `theta' = 1`;
/// * blend, `w <= u < 2w`: a smoothstep from `theta' = 1` to the bend rate;
/// * bend: `theta' = -beta cos(theta) tanh(theta/delta) / (2r)`, run until
///   the meridian is axial.
///
/// With this rate the curvature condition `(m-2) cos(theta)/r + 2 theta' > 0`
/// holds exactly when `beta < m - 2`; `beta` is chosen so that the bend ends
/// at radius `rho0`, whatever sign that forces.
#[derive(Debug, Clone)]
pub struct TunnelBend {
    m: usize,
    rho0: f64,
    rho: f64,
    beta: f64,
    collar: f64,
    // (u, theta, r, t) at every integration step from u = collar onward
    states: Vec<[f64; 4]>,
}

impl TunnelBend {
    pub fn new(m: usize, rho0: f64, rho: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::Parameter(format!(
                "tunnel dimension m = {m} must be >= 2"
            )));
        }
        if !(rho > 0.0 && rho < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Parameter(format!(
                "cap radius rho = {rho} must lie in (0, pi/2)"
            )));
        }
        if !(rho0 > 0.0 && rho0 < rho) {
            return Err(Error::Parameter(format!(
                "neck radius rho0 = {rho0} must lie in (0, rho = {rho})"
            )));
        }
        let edge = rho.sin();
        if rho0 >= edge {
            return Err(Error::Construction(format!(
                "neck radius rho0 = {rho0} is not below the cap boundary radius sin(rho) = {edge}"
            )));
        }
        let collar = rho0.min(edge - rho0) / 4.0;
        let mut bend = Self {
            m,
            rho0,
            rho,
            beta: f64::NAN,
            collar,
            states: Vec::new(),
        };

        let (mut lo, mut hi) = (1e-2f64.ln(), 1e3f64.ln());
        if bend.neck_for(lo.exp()) >= rho0 || bend.neck_for(hi.exp()) <= rho0 {
            return Err(Error::Construction(format!(
                "the bend family cannot reach neck radius {rho0} from cap radius {rho}"
            )));
        }
        while hi - lo > 1e-14 {
            let mid = 0.5 * (lo + hi);
            if bend.neck_for(mid.exp()) < rho0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        bend.beta = (0.5 * (lo + hi)).exp();
        bend.states = bend.integrate(bend.beta, None);
        Ok(bend)
    }

    /// Neck radius reached with rate parameter `beta`; stops early once the
    /// answer's side of `rho0` is known.
    fn neck_for(&self, beta: f64) -> f64 {
        let states = self.integrate(beta, Some(0.5 * self.rho0));
        states.last().map(|s| s[2]).unwrap_or(0.0)
    }

    fn theta0(&self) -> f64 {
        std::f64::consts::FRAC_PI_2 - self.rho
    }

    fn collar_state(&self, u: f64) -> [f64; 4] {
        let th0 = self.theta0();
        [
            u,
            th0 + u,
            (self.rho - u).sin(),
            (th0 + u).sin() - th0.sin(),
        ]
    }

    fn rate(&self, beta: f64, u: f64, theta: f64, r: f64) -> f64 {
        let bend = -beta * theta.cos() * (theta / SETTLE_WIDTH).tanh() / (2.0 * r);
        if u >= 2.0 * self.collar {
            bend
        } else {
            let x = ((u - self.collar) / self.collar).clamp(0.0, 1.0);
            let blend = x * x * (3.0 - 2.0 * x);
            (1.0 - blend) + blend * bend
        }
    }

    fn step(&self, beta: f64, y: [f64; 4], h: f64) -> [f64; 4] {
        let f = |y: &[f64; 4]| -> [f64; 3] {
            [self.rate(beta, y[0], y[1], y[2]), -y[1].sin(), y[1].cos()]
        };
        let add = |y: &[f64; 4], k: &[f64; 3], c: f64| {
            [y[0] + c, y[1] + c * k[0], y[2] + c * k[1], y[3] + c * k[2]]
        };
        let k1 = f(&y);
        let k2 = f(&add(&y, &k1, 0.5 * h));
        let k3 = f(&add(&y, &k2, 0.5 * h));
        let k4 = f(&add(&y, &k3, h));
        let mut out = y;
        out[0] = y[0] + h;
        for c in 0..3 {
            out[c + 1] = y[c + 1] + h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        out
    }

    fn step_size(&self, beta: f64, r: f64) -> f64 {
        // resolves both the radius scale and the stiff settling phase
        (0.02 * r).min(0.1 * r * SETTLE_WIDTH / beta).min(1e-3)
    }

    fn integrate(&self, beta: f64, floor: Option<f64>) -> Vec<[f64; 4]> {
        let mut y = self.collar_state(self.collar);
        let mut out = vec![y];
        let blend_end = 2.0 * self.collar;
        for _ in 0..20_000_000 {
            if y[1] < FLAT_ANGLE || floor.is_some_and(|f| y[2] < f) || y[2] <= 0.0 {
                break;
            }
            let mut h = self.step_size(beta, y[2]);
            if y[0] < blend_end && y[0] + h > blend_end {
                h = blend_end - y[0];
            }
            y = self.step(beta, y, h);
            out.push(y);
        }
        out
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Whether the bend rate keeps scalar curvature positive (`beta < m - 2`).
    pub fn psc_rate(&self) -> bool {
        self.beta < self.m as f64 - 2.0
    }

    pub fn neck_radius(&self) -> f64 {
        self.states.last().expect("integrated")[2]
    }

    /// Arc length from the cap boundary to the start of the neck.
    pub fn half_span(&self) -> f64 {
        self.states.last().expect("integrated")[0]
    }

    fn axial_span(&self) -> f64 {
        self.states.last().expect("integrated")[3]
    }

    /// Shortest tunnel this bend fits in (zero neck length).
    pub fn minimal_length(&self) -> f64 {
        2.0 * self.half_span()
    }

    /// `(theta, r, t, theta')` at arc length `u` from the cap boundary.
    fn at(&self, u: f64) -> [f64; 4] {
        if u <= self.collar {
            let y = self.collar_state(u.max(0.0));
            return [y[1], y[2], y[3], 1.0];
        }
        if u >= self.half_span() {
            let y = self.states.last().expect("integrated");
            return [y[1], y[2], y[3] + (u - y[0]), 0.0];
        }
        let k = self.states.partition_point(|y| y[0] <= u) - 1;
        let base = self.states[k];
        let y = if u > base[0] {
            self.step(self.beta, base, u - base[0])
        } else {
            base
        };
        [y[1], y[2], y[3], self.rate(self.beta, u, y[1], y[2])]
    }
}

/// One tunnel of the family: the bend, a straight neck, the mirrored bend.
/// Arc length `s` runs over `[-L/2, L/2]` with the neck in the middle.
#[derive(Debug, Clone)]
pub struct TunnelProfile {
    bend: Arc<TunnelBend>,
    length: f64,
}

/// Builds the tunnel with neck radius `rho0` replacing caps of radius `rho`,
/// with meridian length `length`.
///
/// Positive scalar curvature is not enforced here; see
/// [`generate_psc_profile`].
pub fn generate_profile(m: usize, rho0: f64, rho: f64, length: f64) -> Result<TunnelProfile> {
    TunnelProfile::new(Arc::new(TunnelBend::new(m, rho0, rho)?), length)
}

/// Like [`generate_profile`], but fails with the first sample where scalar
/// curvature is not positive (for m >= 3).
pub fn generate_psc_profile(
    m: usize,
    rho0: f64,
    rho: f64,
    length: f64,
    samples: usize,
) -> Result<TunnelProfile> {
    let profile = generate_profile(m, rho0, rho, length)?;
    if let Some(bad) = profile.psc_violation(samples) {
        return Err(Error::Invariant(format!(
            "scalar curvature {} <= 0 at s = {} (m = {m}, rho0 = {rho0}, rho = {rho}, beta = {})",
            bad.scalar_curvature, bad.s, profile.bend.beta
        )));
    }
    Ok(profile)
}

/// Largest neck radius any rotationally symmetric tunnel glued C^1 to a
/// unit-sphere cap of radius `rho` can reach with positive scalar curvature:
/// `sin(rho)^{m/(m-2)}` (none for m = 2).
///
/// Along a meridian with `r' = -sin(theta)`, positivity of scalar curvature
/// makes `cos(theta) * r^{(m-2)/2}` nondecreasing inward; it starts at
/// `sin(rho)^{m/2}` on the cap boundary and is at most `r^{(m-2)/2}` anywhere.
pub fn psc_neck_bound(m: usize, rho: f64) -> Option<f64> {
    (m >= 3).then(|| rho.sin().powf(m as f64 / (m as f64 - 2.0)))
}

impl TunnelProfile {
    pub fn new(bend: Arc<TunnelBend>, length: f64) -> Result<Self> {
        let min = bend.minimal_length();
        if !(length.is_finite() && length >= min) {
            return Err(Error::Construction(format!(
                "tunnel length {length} is below the minimal feasible length {min} \
                 for rho0 = {}, rho = {}",
                bend.rho0, bend.rho
            )));
        }
        Ok(Self { bend, length })
    }

    /// Same bend, different neck length.
    pub fn with_length(&self, length: f64) -> Result<Self> {
        Self::new(Arc::clone(&self.bend), length)
    }

    pub fn bend(&self) -> &TunnelBend {
        &self.bend
    }

    pub fn m(&self) -> usize {
        self.bend.m
    }

    pub fn rho0(&self) -> f64 {
        self.bend.rho0
    }

    pub fn rho(&self) -> f64 {
        self.bend.rho
    }

    /// Meridian (graph) length L.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn neck_length(&self) -> f64 {
        self.length - self.bend.minimal_length()
    }

    /// Axial extent L' of the tunnel; always below L.
    pub fn axial_length(&self) -> f64 {
        2.0 * self.bend.axial_span() + self.neck_length()
    }

    fn local(&self, s: f64) -> (f64, f64) {
        let u = 0.5 * self.length - s.abs();
        (u, if s < 0.0 { -1.0 } else { 1.0 })
    }

    /// Axial coordinate of the point at arc length `s`, centred on the neck.
    pub fn axial(&self, s: f64) -> f64 {
        let (u, side) = self.local(s);
        let half = 0.5 * self.axial_length();
        side * (half - self.bend.at(u)[2])
    }

    /// Worst value of `|r - sin(rho)| + |r' - (+-cos(rho))|` at the two ends.
    pub fn gluing_residual(&self) -> f64 {
        let (a, b) = self.domain();
        let (edge, slope) = (self.rho().sin(), self.rho().cos());
        let left = self.sample(a);
        let right = self.sample(b);
        ((left.r - edge).abs() + (left.dr + slope).abs())
            .max((right.r - edge).abs() + (right.dr - slope).abs())
    }

    /// First grid sample with nonpositive scalar curvature, for m >= 3.
    pub fn psc_violation(&self, samples: usize) -> Option<ProfileSample> {
        if self.m() < 3 {
            return None;
        }
        sample_grid(self, samples)
            .into_iter()
            .find(|p| !(p.scalar_curvature > 0.0))
    }

    /// Writes the rotated surface (m = 2) as `v x y z` / `f a b c` lines.
    pub fn write_obj<W: Write>(&self, rows: usize, cols: usize, mut out: W) -> Result<()> {
        if self.m() != 2 {
            return Err(Error::Parameter(
                "mesh export is only defined for m = 2 surfaces".into(),
            ));
        }
        let (rows, cols) = (rows.max(2), cols.max(3));
        let (a, b) = self.domain();
        for s in uniform_breaks(a, b, rows - 1) {
            let (t, r) = (self.axial(s), self.sample(s).r);
            for k in 0..cols {
                let phi = std::f64::consts::TAU * k as f64 / cols as f64;
                writeln!(
                    out,
                    "v {t:.17e} {:.17e} {:.17e}",
                    r * phi.cos(),
                    r * phi.sin()
                )?;
            }
        }
        for i in 0..rows - 1 {
            for k in 0..cols {
                let a = i * cols + k + 1;
                let b = i * cols + (k + 1) % cols + 1;
                let (c, d) = (a + cols, b + cols);
                writeln!(out, "f {a} {b} {d}")?;
                writeln!(out, "f {a} {d} {c}")?;
            }
        }
        Ok(())
    }

    pub fn to_document(&self, samples: usize) -> ProfileDocument {
        ProfileDocument {
            schema: PROFILE_SCHEMA.to_string(),
            m: self.m(),
            rho0: self.rho0(),
            rho: self.rho(),
            length: self.length,
            axial_length: self.axial_length(),
            neck_radius: self.bend.neck_radius(),
            beta: self.bend.beta,
            minimal_length: self.bend.minimal_length(),
            volume: profile_volume(self),
            samples: sample_grid(self, samples),
        }
    }
}

impl RadialProfile for TunnelProfile {
    fn dim(&self) -> usize {
        self.bend.m
    }

    fn domain(&self) -> (f64, f64) {
        (-0.5 * self.length, 0.5 * self.length)
    }

    fn sample(&self, s: f64) -> RadialSample {
        let (u, side) = self.local(s);
        let [theta, r, _, dtheta] = self.bend.at(u);
        if u >= self.bend.half_span() {
            return RadialSample {
                r,
                dr: 0.0,
                d2r: 0.0,
            };
        }
        RadialSample {
            r,
            dr: side * theta.sin(),
            d2r: -theta.cos() * dtheta,
        }
    }

    fn outer_radius(&self) -> f64 {
        self.bend.rho
    }

    fn breaks(&self) -> Vec<f64> {
        let half = 0.5 * self.length;
        let mut left: Vec<f64> = std::iter::once(0.0)
            .chain(self.bend.states.iter().step_by(8).map(|y| y[0]))
            .chain(std::iter::once(self.bend.half_span()))
            .map(|u| u - half)
            .collect();
        left.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        let mut out = left.clone();
        out.extend(
            left.iter()
                .rev()
                .map(|x| -x)
                .filter(|&x| x > *left.last().unwrap() + 1e-15),
        );
        out
    }
}

pub const PROFILE_SCHEMA: &str = "profile/1";

/// Serialized tunnel: parameters, derived lengths and a sample table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDocument {
    pub schema: String,
    pub m: usize,
    pub rho0: f64,
    pub rho: f64,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "L_prime")]
    pub axial_length: f64,
    pub neck_radius: f64,
    pub beta: f64,
    pub minimal_length: f64,
    pub volume: f64,
    pub samples: Vec<ProfileSample>,
}

impl ProfileDocument {
    /// Regenerates the profile and checks it against the recorded values.
    pub fn rebuild(&self) -> Result<TunnelProfile> {
        if self.schema != PROFILE_SCHEMA {
            return Err(Error::Schema {
                expected: PROFILE_SCHEMA.into(),
                found: self.schema.clone(),
            });
        }
        let p = generate_profile(self.m, self.rho0, self.rho, self.length)?;
        if (p.axial_length() - self.axial_length).abs() > 1e-12 || p.bend.beta != self.beta {
            return Err(Error::Validation(
                "profile document does not match the regenerated profile".into(),
            ));
        }
        Ok(p)
    }
}

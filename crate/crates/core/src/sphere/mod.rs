//! Round unit sphere S^m inside E^{m+1}.
//!
//! Points are stored as unit vectors in the ambient space. Two distances live
//! on the same point set: the intrinsic great-circle distance and the chordal
//! (restricted Euclidean) distance. The chordal space has no midpoints, see
//! [`midpoint_defect`].

mod midpoint;
mod net;

pub use midpoint::midpoint_defect;
pub use net::{build_net, Net, NetBuilder, NetDocument, NET_SCHEMA};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance::ALGEBRAIC;

/// A unit vector in E^{m+1}, m >= 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SpherePoint(Vec<f64>);

impl SpherePoint {
    /// Wraps `coords`, rejecting vectors whose norm is not 1 within 1e-12.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_ambient(coords.len())?;
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("non-finite coordinate".into()));
        }
        let norm = norm(&coords);
        if (norm - 1.0).abs() > ALGEBRAIC {
            return Err(Error::Validation(format!(
                "point is not on the unit sphere: |x| = {norm:.17e}"
            )));
        }
        Ok(Self(coords))
    }

    /// Projects a nonzero vector onto the sphere.
    pub fn normalized(coords: Vec<f64>) -> Result<Self> {
        check_ambient(coords.len())?;
        let n = norm(&coords);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Validation(
                "cannot normalize a zero or non-finite vector".into(),
            ));
        }
        Ok(Self(coords.into_iter().map(|c| c / n).collect()))
    }

    /// The standard basis vector e_k in E^{ambient}.
    pub fn axis(ambient: usize, k: usize) -> Result<Self> {
        check_ambient(ambient)?;
        if k >= ambient {
            return Err(Error::Validation(format!(
                "axis {k} out of range for E^{ambient}"
            )));
        }
        let mut v = vec![0.0; ambient];
        v[k] = 1.0;
        Ok(Self(v))
    }

    /// Uniformly distributed point: a normalized standard-normal vector.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, ambient: usize) -> Self {
        assert!(ambient >= 3, "ambient dimension must be at least 3");
        loop {
            let v: Vec<f64> = (0..ambient).map(|_| rng.sample(StandardNormal)).collect();
            let n = norm(&v);
            if n > 1e-8 {
                return Self(v.into_iter().map(|c| c / n).collect());
            }
        }
    }

    /// Internal constructor for vectors already known to be unit length.
    pub(crate) fn from_unit(coords: Vec<f64>) -> Self {
        debug_assert!((norm(&coords) - 1.0).abs() < 1e-9);
        Self(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn ambient_dim(&self) -> usize {
        self.0.len()
    }

    /// Intrinsic dimension m of the sphere the point lives on.
    pub fn sphere_dim(&self) -> usize {
        self.0.len() - 1
    }

    pub fn dot(&self, other: &SpherePoint) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn antipode(&self) -> SpherePoint {
        Self(self.0.iter().map(|c| -c).collect())
    }

    /// Moves along the great circle leaving `self` in the unit tangent
    /// direction `dir` for arc length `angle`.
    pub fn exp(&self, dir: &[f64], angle: f64) -> SpherePoint {
        let (s, c) = angle.sin_cos();
        let v: Vec<f64> = self.0.iter().zip(dir).map(|(p, d)| c * p + s * d).collect();
        // renormalize to keep accumulated rounding off the unit-norm check
        let n = norm(&v);
        Self(v.into_iter().map(|x| x / n).collect())
    }

    /// Unit tangent vector at `self` pointing along the minimizing arc to
    /// `target`, or `None` when the target coincides with `self` or its antipode.
    pub fn tangent_toward(&self, target: &SpherePoint) -> Option<Vec<f64>> {
        let d = self.dot(target);
        let v: Vec<f64> = target
            .0
            .iter()
            .zip(&self.0)
            .map(|(q, p)| q - d * p)
            .collect();
        let n = norm(&v);
        (n > 1e-12).then(|| v.into_iter().map(|x| x / n).collect())
    }

    /// Deterministic orthonormal basis of the tangent space at `self`,
    /// obtained by Gram-Schmidt on the standard basis.
    pub fn tangent_frame(&self) -> Vec<Vec<f64>> {
        let dim = self.0.len();
        let mut basis: Vec<Vec<f64>> = vec![self.0.clone()];
        let mut order: Vec<usize> = (0..dim).collect();
        // least aligned axes first keeps the orthogonalization well conditioned
        order.sort_by(|&a, &b| self.0[a].abs().total_cmp(&self.0[b].abs()));
        for k in order {
            let mut v = vec![0.0; dim];
            v[k] = 1.0;
            for b in &basis {
                let d = dot(&v, b);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= d * bi;
                }
            }
            let n = norm(&v);
            if n > 1e-6 {
                basis.push(v.into_iter().map(|x| x / n).collect());
            }
            if basis.len() == dim {
                break;
            }
        }
        basis.remove(0);
        basis
    }
}

impl TryFrom<Vec<f64>> for SpherePoint {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        SpherePoint::new(value)
    }
}

impl From<SpherePoint> for Vec<f64> {
    fn from(p: SpherePoint) -> Self {
        p.0
    }
}

fn check_ambient(ambient: usize) -> Result<()> {
    if ambient < 3 {
        return Err(Error::Validation(format!(
            "ambient dimension {ambient} < 3; the sphere must have dimension m >= 2"
        )));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn assert_same_dim(x: &SpherePoint, y: &SpherePoint) {
    assert_eq!(
        x.ambient_dim(),
        y.ambient_dim(),
        "points live on spheres of different dimension"
    );
}

/// Ambient Euclidean norm |x - y|.
pub fn ambient_distance(x: &SpherePoint, y: &SpherePoint) -> f64 {
    assert_same_dim(x, y);
    x.0.iter()
        .zip(&y.0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Great-circle distance in [0, pi].
///
/// Uses `2 atan2(|x - y|, |x + y|)`, which stays accurate for nearly equal
/// and nearly antipodal pairs where `acos(x . y)` loses half its digits.
///
/// # Panics
/// If the points have different ambient dimensions.
pub fn geodesic_distance(x: &SpherePoint, y: &SpherePoint) -> f64 {
    assert_same_dim(x, y);
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in x.0.iter().zip(&y.0) {
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

/// Chord length subtending a great-circle arc of `theta` radians,
/// `sqrt(2 - 2 cos theta)` written in its half-angle form `2 sin(theta / 2)`.
pub fn chord_of_arc(theta: f64) -> f64 {
    2.0 * (0.5 * theta).sin()
}

/// Restricted Euclidean distance via the law of cosines.
///
/// # Panics
/// If the points have different ambient dimensions.
pub fn chordal_distance(x: &SpherePoint, y: &SpherePoint) -> f64 {
    chord_of_arc(geodesic_distance(x, y))
}

/// Which of the two sphere distances to measure with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereDistance {
    Geodesic,
    Chordal,
}

impl SphereDistance {
    pub fn eval(self, x: &SpherePoint, y: &SpherePoint) -> f64 {
        match self {
            SphereDistance::Geodesic => geodesic_distance(x, y),
            SphereDistance::Chordal => chordal_distance(x, y),
        }
    }
}

/// A discretized curve on the sphere; the vertex list is the partition on
/// which the curve length is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpherePolyline {
    vertices: Vec<SpherePoint>,
}

impl SpherePolyline {
    pub fn new(vertices: Vec<SpherePoint>) -> Result<Self> {
        let first = vertices
            .first()
            .ok_or_else(|| Error::Validation("polyline needs at least one vertex".into()))?;
        if vertices
            .iter()
            .any(|v| v.ambient_dim() != first.ambient_dim())
        {
            return Err(Error::Validation(
                "polyline vertices differ in dimension".into(),
            ));
        }
        Ok(Self { vertices })
    }

    /// Samples the minimizing great-circle arc from `a` to `b` with `segments`
    /// equal pieces. Antipodal endpoints are joined through `tangent_frame()[0]`.
    pub fn great_arc(a: &SpherePoint, b: &SpherePoint, segments: usize) -> Result<Self> {
        if segments == 0 {
            return Err(Error::Parameter("an arc needs at least one segment".into()));
        }
        let theta = geodesic_distance(a, b);
        let dir = a
            .tangent_toward(b)
            .unwrap_or_else(|| a.tangent_frame().swap_remove(0));
        let vertices = (0..=segments)
            .map(|k| {
                if k == segments {
                    b.clone()
                } else {
                    a.exp(&dir, theta * k as f64 / segments as f64)
                }
            })
            .collect();
        Self::new(vertices)
    }

    pub fn vertices(&self) -> &[SpherePoint] {
        &self.vertices
    }

    /// Sum of consecutive distances. A single vertex has length 0.
    pub fn length(&self, metric: SphereDistance) -> f64 {
        self.vertices
            .windows(2)
            .map(|w| metric.eval(&w[0], &w[1]))
            .sum()
    }
}

/// Free-function form of [`SpherePolyline::length`].
pub fn polyline_length(curve: &SpherePolyline, metric: SphereDistance) -> f64 {
    curve.length(metric)
}

/// Surface measure of the unit k-sphere S^k in E^{k+1}.
pub fn unit_sphere_measure(k: usize) -> f64 {
    use std::f64::consts::PI;
    // omega_k = 2 pi / (k - 1) * omega_{k-2}
    let (mut even, mut odd) = (2.0, 2.0 * PI);
    if k == 0 {
        return even;
    }
    let mut j = 1;
    while j < k {
        j += 1;
        let next = 2.0 * PI / (j as f64 - 1.0) * even;
        even = odd;
        odd = next;
    }
    odd
}

/// Volume of a geodesic ball of radius `radius` in the unit sphere S^m.
pub fn cap_volume(m: usize, radius: f64) -> f64 {
    let radius = radius.clamp(0.0, std::f64::consts::PI);
    let omega = unit_sphere_measure(m - 1);
    match m {
        2 => omega * (1.0 - radius.cos()),
        3 => omega * 0.5 * (radius - radius.sin() * radius.cos()),
        _ => omega * crate::quad::simpson(|s| s.sin().powi(m as i32 - 1), 0.0, radius, 2048),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

    fn e(k: usize) -> SpherePoint {
        SpherePoint::axis(3, k).unwrap()
    }

    #[test]
    fn identity_antipodal_and_orthogonal_distances() {
        assert_eq!(geodesic_distance(&e(0), &e(0)), 0.0);
        assert!((geodesic_distance(&e(0), &e(0).antipode()) - PI).abs() < 1e-15);
        assert!((geodesic_distance(&e(0), &e(1)) - FRAC_PI_2).abs() < 1e-15);
        assert!((chordal_distance(&e(0), &e(0).antipode()) - 2.0).abs() < 1e-15);
        assert!((chordal_distance(&e(0), &e(1)) - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn rejects_off_sphere_and_low_dimension() {
        assert!(matches!(
            SpherePoint::new(vec![1.0, 0.1, 0.0]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            SpherePoint::new(vec![1.0, 0.0]),
            Err(Error::Validation(_))
        ));
        assert!(SpherePoint::new(vec![0.0, 0.0, 1.0 + 5e-13]).is_ok());
        let json = "[0.5, 0.0, 0.0]";
        assert!(serde_json::from_str::<SpherePoint>(json).is_err());
    }

    #[test]
    fn chord_matches_ambient_norm_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x = SpherePoint::random(&mut rng, 4);
            let y = SpherePoint::random(&mut rng, 4);
            let theta = geodesic_distance(&x, &y);
            let law = (2.0 - 2.0 * theta.cos()).sqrt();
            assert!((chordal_distance(&x, &y) - ambient_distance(&x, &y)).abs() < 1e-12);
            assert!((chordal_distance(&x, &y) - law).abs() < 1e-12);
        }
    }

    #[test]
    fn polyline_degenerate_cases() {
        let single = SpherePolyline::new(vec![e(0)]).unwrap();
        assert_eq!(single.length(SphereDistance::Geodesic), 0.0);
        let repeated = SpherePolyline::new(vec![e(1); 5]).unwrap();
        assert_eq!(repeated.length(SphereDistance::Chordal), 0.0);
        let two = SpherePolyline::new(vec![e(0), e(2)]).unwrap();
        assert!((two.length(SphereDistance::Chordal) - SQRT_2).abs() < 1e-15);
        assert!(SpherePolyline::new(vec![]).is_err());
    }

    #[test]
    fn refined_chordal_length_increases_to_arc_length() {
        let a = e(0);
        let b = SpherePoint::normalized(vec![-0.3, 0.8, 0.5]).unwrap();
        let arc = geodesic_distance(&a, &b);
        let mut prev = 0.0;
        for k in [1usize, 2, 4, 8, 16, 32, 64, 128] {
            let len = SpherePolyline::great_arc(&a, &b, k)
                .unwrap()
                .length(SphereDistance::Chordal);
            assert!(len > prev && len <= arc + 1e-12, "k={k} len={len}");
            // chord/arc defect of each piece is ~ (arc/k)^3 / 24
            assert!(arc - len <= arc.powi(3) / (24.0 * (k * k) as f64) * 1.01 + 1e-14);
            prev = len;
        }
        assert!(arc - prev < 3e-5);
    }

    #[test]
    fn tangent_frame_is_orthonormal_and_tangent() {
        let p = SpherePoint::normalized(vec![0.2, -0.4, 0.1, 0.88]).unwrap();
        let frame = p.tangent_frame();
        assert_eq!(frame.len(), 3);
        for (i, u) in frame.iter().enumerate() {
            assert!(dot(u, p.coords()).abs() < 1e-14);
            for (j, v) in frame.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot(u, v) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sphere_measures() {
        assert!((unit_sphere_measure(1) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_measure(2) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_measure(3) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((unit_sphere_measure(4) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
        // full caps recover the whole sphere
        for m in 2..=5 {
            assert!(
                (cap_volume(m, PI) - unit_sphere_measure(m)).abs() < 1e-9,
                "m={m}"
            );
        }
    }
}

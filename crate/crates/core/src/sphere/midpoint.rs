use super::{chordal_distance, dot, norm, SpherePoint};

/// How far the chordal metric is from admitting a midpoint between `x` and `y`:
///
/// `min_z max(|d_E(x,z) - d_E(x,y)/2|, |d_E(y,z) - d_E(x,y)/2|)` over z on the sphere.
///
/// The objective depends on z only through `p = z.x` and `q = z.y`, and the
/// pairs reachable on a sphere of dimension >= 2 are exactly those with
/// `p^2 + q^2 - 2cpq <= 1 - c^2`, `c = x.y`. A Fibonacci grid of `resolution`
/// points on the sphere spanned by x, y and one normal gives an upper
/// bracket; the level is then bisected, testing at each level whether the
/// box of admissible `(p, q)` meets that ellipse.
///
/// Returns 0 when `x == y`.
pub fn midpoint_defect(x: &SpherePoint, y: &SpherePoint, resolution: usize) -> f64 {
    let half = 0.5 * chordal_distance(x, y);
    if half == 0.0 {
        return 0.0;
    }
    // coordinates of y in the frame (x, u, n): y = (cos t, sin t, 0)
    let c = dot(x.coords(), y.coords()).clamp(-1.0, 1.0);
    let perp: Vec<f64> = y
        .coords()
        .iter()
        .zip(x.coords())
        .map(|(b, a)| b - c * a)
        .collect();
    let s = norm(&perp);
    let yf = [c, s, 0.0];
    let xf = [1.0, 0.0, 0.0];

    let objective = |z: &[f64; 3]| -> f64 {
        let dx = chord3(&xf, z);
        let dy = chord3(&yf, z);
        (dx - half).abs().max((dy - half).abs())
    };
    let mut hi = fibonacci_sphere(resolution.max(16))
        .map(|z| objective(&z))
        .fold(f64::INFINITY, f64::min);
    let mut lo = 0.0;
    if reachable(c, half, lo) {
        return 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if reachable(c, half, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Whether some z has both chord distances within `level` of `half`.
fn reachable(c: f64, half: f64, level: f64) -> bool {
    // |sqrt(2 - 2p) - half| <= level  <=>  p in [a, b]; the same for q
    let a = (1.0 - 0.5 * (half + level).powi(2)).max(-1.0);
    let b = (1.0 - 0.5 * (half - level).max(0.0).powi(2)).min(1.0);
    if a > b {
        return false;
    }
    let form = |p: f64, q: f64| p * p + q * q - 2.0 * c * p * q;
    // convex form: the minimum over the box is at the origin or on an edge
    let mut least = if a <= 0.0 && 0.0 <= b {
        0.0
    } else {
        f64::INFINITY
    };
    for edge in [a, b] {
        least = least.min(form(edge, (c * edge).clamp(a, b)));
    }
    least <= 1.0 - c * c
}

fn chord3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Quasi-uniform points on S^2 along a golden-angle spiral.
pub(crate) fn fibonacci_sphere(n: usize) -> impl Iterator<Item = [f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n).map(move |k| {
        let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden * k as f64;
        [r * phi.cos(), r * phi.sin(), z]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn on_equator(theta: f64) -> SpherePoint {
        SpherePoint::normalized(vec![theta.cos(), theta.sin(), 0.0]).unwrap()
    }

    #[test]
    fn coincident_points_have_zero_defect() {
        let x = on_equator(0.3);
        assert_eq!(midpoint_defect(&x, &x, 500), 0.0);
    }

    #[test]
    fn antipodal_defect_is_root_two_minus_one() {
        let x = on_equator(0.0);
        let d = midpoint_defect(&x, &x.antipode(), 2000);
        assert!((d - (2f64.sqrt() - 1.0)).abs() < 1e-6, "{d}");
    }

    #[test]
    fn works_in_higher_dimension() {
        let x = SpherePoint::normalized(vec![1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let y = SpherePoint::normalized(vec![0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let d = midpoint_defect(&x, &y, 2000);
        // quarter circle: 2 sin(pi/8) - sin(pi/4)
        let expect = 2.0 * (PI / 8.0).sin() - (PI / 4.0).sin();
        assert!((d - expect).abs() < 1e-6, "{d} vs {expect}");
    }
}

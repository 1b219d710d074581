//! Small quadrature helpers.

/// Composite Simpson rule on `[a, b]` with `panels` (rounded up to even) intervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = (panels.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    if h == 0.0 {
        return 0.0;
    }
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

// 5-point Gauss-Legendre nodes and weights on [-1, 1]
const GL5_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// Composite 5-point Gauss-Legendre rule over the consecutive intervals
/// given by `breaks` (which must be sorted).
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, breaks: &[f64]) -> f64 {
    breaks
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            half * GL5_NODES
                .iter()
                .zip(GL5_WEIGHTS)
                .map(|(x, wt)| wt * f(mid + half * x))
                .sum::<f64>()
        })
        .sum()
}

/// `n + 1` evenly spaced break points on `[a, b]`.
pub fn uniform_breaks(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n)
        .map(|k| {
            if k == n {
                b
            } else {
                a + (b - a) * k as f64 / n as f64
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_and_trig() {
        assert!((simpson(|x| x * x * x, 0.0, 2.0, 2) - 4.0).abs() < 1e-14);
        let breaks = uniform_breaks(0.0, std::f64::consts::PI, 8);
        assert!((gauss_legendre(f64::sin, &breaks) - 2.0).abs() < 1e-12);
        assert!((gauss_legendre(|x| x.powi(9), &[0.0, 1.0]) - 0.1).abs() < 1e-14);
    }
}

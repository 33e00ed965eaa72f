#![allow(dead_code)]

/// Bound-state energies of `-1/(2m) d2/dr2 + V` on `[a, b]` with
/// psi(a) = psi(b) = 0, by Numerov shooting on a uniform grid.
///
/// Levels are bracketed by node counting and refined by bisection; two
/// step sizes are combined by Richardson extrapolation of the h^4 error.
pub fn numerov_levels(v: impl Fn(f64) -> f64, mass: f64, a: f64, b: f64, steps: usize, count: usize) -> Vec<f64> {
    let coarse = levels_at(&v, mass, a, b, steps, count);
    let fine = levels_at(&v, mass, a, b, 2 * steps, count);
    coarse.iter().zip(&fine).map(|(c, f)| (16.0 * f - c) / 15.0).collect()
}

fn levels_at(v: &impl Fn(f64) -> f64, mass: f64, a: f64, b: f64, steps: usize, count: usize) -> Vec<f64> {
    let h = (b - a) / steps as f64;
    let pot: Vec<f64> = (0..=steps).map(|i| v(a + i as f64 * h)).collect();
    let lo0 = pot.iter().copied().fold(f64::INFINITY, f64::min);
    let hi0 = pot.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..count)
        .map(|k| {
            let (mut lo, mut hi) = (lo0, hi0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if nodes_below(&pot, mass, h, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Number of eigenvalues below `e`: sign changes of the outward solution,
/// counting the far boundary.
fn nodes_below(pot: &[f64], mass: f64, h: f64, e: f64) -> usize {
    let c = h * h / 12.0;
    let f = |i: usize| 2.0 * mass * (e - pot[i]);
    let (mut p0, mut p1) = (0.0f64, 1e-10f64);
    let mut nodes = 0;
    for i in 1..pot.len() - 1 {
        let p2 = (2.0 * p1 * (1.0 - 5.0 * c * f(i)) - p0 * (1.0 + c * f(i - 1))) / (1.0 + c * f(i + 1));
        if p2 == 0.0 || p2.signum() != p1.signum() {
            nodes += 1;
        }
        p0 = p1;
        p1 = p2;
        let s = p1.abs().max(p0.abs());
        if s > 1e100 {
            p0 /= s;
            p1 /= s;
        }
    }
    nodes
}

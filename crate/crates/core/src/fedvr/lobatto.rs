//! Gauss–Lobatto–Legendre quadrature on the reference interval [-1, 1].

/// Legendre polynomial P_n(x) and P_{n-1}(x) by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

/// Reference Lobatto rule with `n` points (n >= 2), ascending nodes.
#[derive(Debug, Clone)]
pub struct LobattoRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `deriv[i][j]` is the derivative of the j-th Lagrange cardinal
    /// polynomial evaluated at node i.
    pub deriv: Vec<Vec<f64>>,
}

impl LobattoRule {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "Lobatto rule needs at least two points");
        let deg = n - 1;
        let degf = deg as f64;
        // Newton iteration on (1 - x^2) P'_N(x), started from the
        // Chebyshev–Gauss–Lobatto points.
        let mut nodes: Vec<f64> = (0..n)
            .map(|i| -(std::f64::consts::PI * i as f64 / degf).cos())
            .collect();
        for x in nodes.iter_mut().take(n - 1).skip(1) {
            for _ in 0..100 {
                let (p, p_prev) = legendre_pair(deg, *x);
                // x P_N - P_{N-1} = (1-x^2) P'_N / N
                let f = *x * p - p_prev;
                let df = (degf + 1.0) * p;
                let dx = f / df;
                *x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
        }
        nodes[0] = -1.0;
        nodes[n - 1] = 1.0;
        let pn: Vec<f64> = nodes.iter().map(|&x| legendre_pair(deg, x).0).collect();
        let weights: Vec<f64> = pn
            .iter()
            .map(|p| 2.0 / (degf * (degf + 1.0) * p * p))
            .collect();

        let mut deriv = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                deriv[i][j] = if i != j {
                    pn[i] / (pn[j] * (nodes[i] - nodes[j]))
                } else if i == 0 {
                    -degf * (degf + 1.0) / 4.0
                } else if i == n - 1 {
                    degf * (degf + 1.0) / 4.0
                } else {
                    0.0
                };
            }
        }
        Self {
            nodes,
            weights,
            deriv,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

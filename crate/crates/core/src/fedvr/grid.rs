use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::lobatto::LobattoRule;
use super::sparse::CsrMatrix;
use super::spline::{Extrapolation, NaturalCubicSpline};
use crate::error::{Error, Result};

/// Treatment of the basis functions sitting on the two outer grid ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Keep the endpoint functions (natural boundary condition).
    /// Gives n_basis = n_elements * (order - 1) + 1.
    #[default]
    Free,
    /// Drop both endpoint functions so the wavefunction vanishes at
    /// r_min and r_max. Gives n_basis = n_elements * (order - 1) - 1.
    Dirichlet,
}

/// Finite-element DVR grid on [r_min, r_max] with equally sized elements.
///
/// `order` is the number of Gauss–Lobatto points per element, so element
/// interiors carry `order - 2` functions and each inner element boundary
/// carries one shared bridge function. Basis functions are weight
/// normalised: a wavefunction psi(R) has coefficients
/// `c_i = psi(R_i) * sqrt(w_i)`, and local potentials are diagonal.
#[derive(Debug, Clone)]
pub struct FedvrGrid {
    r_min: f64,
    r_max: f64,
    n_elements: usize,
    order: usize,
    boundary: Boundary,
    rule: LobattoRule,
    /// Every Lobatto node including both ends (bridges counted once).
    all_nodes: Vec<f64>,
    all_weights: Vec<f64>,
    /// Index into `all_nodes` of the first retained function.
    first: usize,
    element_boundaries: Vec<f64>,
}

impl FedvrGrid {
    /// Grid with the default [`Boundary::Free`] convention.
    ///
    /// `FedvrGrid::new(0.5, 17.0, 46, 9)` has 369 basis functions.
    pub fn new(r_min: f64, r_max: f64, n_elements: usize, order: usize) -> Result<Self> {
        Self::with_boundary(r_min, r_max, n_elements, order, Boundary::Free)
    }

    pub fn with_boundary(
        r_min: f64,
        r_max: f64,
        n_elements: usize,
        order: usize,
        boundary: Boundary,
    ) -> Result<Self> {
        if !(r_min.is_finite() && r_max.is_finite()) || r_max <= r_min {
            return Err(Error::Parameter(format!(
                "grid range must satisfy r_min < r_max (got {r_min}, {r_max})"
            )));
        }
        if n_elements < 1 {
            return Err(Error::Parameter("need at least one element".into()));
        }
        if order < 2 {
            return Err(Error::Parameter(format!(
                "order (points per element) must be >= 2, got {order}"
            )));
        }
        let n_all = n_elements * (order - 1) + 1;
        if boundary == Boundary::Dirichlet && n_all < 3 {
            return Err(Error::Parameter(
                "Dirichlet grid with a single element needs order >= 3".into(),
            ));
        }
        let rule = LobattoRule::new(order);
        let h = (r_max - r_min) / n_elements as f64;
        let element_boundaries: Vec<f64> = (0..=n_elements)
            .map(|e| {
                if e == n_elements {
                    r_max
                } else {
                    r_min + e as f64 * h
                }
            })
            .collect();

        let mut all_nodes = vec![0.0; n_all];
        let mut all_weights = vec![0.0; n_all];
        for e in 0..n_elements {
            let (a, b) = (element_boundaries[e], element_boundaries[e + 1]);
            let half = 0.5 * (b - a);
            for (k, (&x, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                let g = e * (order - 1) + k;
                // bridge nodes are written twice with the same position
                all_nodes[g] = if k == 0 {
                    a
                } else if k == order - 1 {
                    b
                } else {
                    a + (x + 1.0) * half
                };
                all_weights[g] += w * half;
            }
        }
        let first = usize::from(boundary == Boundary::Dirichlet);
        Ok(Self {
            r_min,
            r_max,
            n_elements,
            order,
            boundary,
            rule,
            all_nodes,
            all_weights,
            first,
            element_boundaries,
        })
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Number of retained basis functions.
    pub fn n_basis(&self) -> usize {
        Self::basis_count(self.n_elements, self.order, self.boundary)
    }

    /// `n_elements * (order - 1) + 1`, minus two for Dirichlet ends.
    pub fn basis_count(n_elements: usize, order: usize, boundary: Boundary) -> usize {
        let all = n_elements * (order - 1) + 1;
        match boundary {
            Boundary::Free => all,
            Boundary::Dirichlet => all - 2,
        }
    }

    /// Node positions of the retained basis functions (bohr).
    pub fn nodes(&self) -> &[f64] {
        &self.all_nodes[self.first..self.first + self.n_basis()]
    }

    /// Quadrature weights of the retained basis functions (bohr).
    pub fn weights(&self) -> &[f64] {
        &self.all_weights[self.first..self.first + self.n_basis()]
    }

    /// Full composite quadrature, endpoints included.
    pub fn quadrature(&self) -> (&[f64], &[f64]) {
        (&self.all_nodes, &self.all_weights)
    }

    pub fn element_boundaries(&self) -> &[f64] {
        &self.element_boundaries
    }

    /// Kinetic energy operator -1/(2 mass) d^2/dR^2 in the retained basis
    /// (hartree), built from the weak form so it is exactly symmetric.
    pub fn kinetic_operator(&self, mass: f64) -> Result<CsrMatrix> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Parameter(format!("mass must be positive, got {mass}")));
        }
        let n = self.order;
        let h = (self.r_max - self.r_min) / self.n_elements as f64;
        // element matrix in reference coordinates: sum_q w_q D_qj D_qk
        let mut elem = vec![vec![0.0; n]; n];
        for (j, row) in elem.iter_mut().enumerate() {
            for (k, val) in row.iter_mut().enumerate() {
                *val = (0..n)
                    .map(|q| self.rule.weights[q] * self.rule.deriv[q][j] * self.rule.deriv[q][k])
                    .sum();
            }
        }
        let scale = 1.0 / (2.0 * mass) * (2.0 / h);
        let n_basis = self.n_basis();
        let mut triplets = Vec::with_capacity(self.n_elements * n * n);
        for e in 0..self.n_elements {
            for j in 0..n {
                let gj = e * (n - 1) + j;
                let Some(bj) = self.retained_index(gj) else { continue };
                for k in 0..n {
                    let gk = e * (n - 1) + k;
                    let Some(bk) = self.retained_index(gk) else { continue };
                    let v = scale * elem[j][k]
                        / (self.all_weights[gj] * self.all_weights[gk]).sqrt();
                    triplets.push((bj, bk, v));
                }
            }
        }
        let t = CsrMatrix::from_triplets(n_basis, triplets);
        // symmetrise away summation-order rounding
        let mut sym = Vec::with_capacity(t.nnz());
        for r in 0..n_basis {
            for (c, v) in t.row(r) {
                sym.push((r, c, 0.5 * (v + t.get(c, r))));
            }
        }
        Ok(CsrMatrix::from_triplets(n_basis, sym))
    }

    fn retained_index(&self, global: usize) -> Option<usize> {
        let idx = global.checked_sub(self.first)?;
        (idx < self.n_basis()).then_some(idx)
    }

    /// Evaluate `f` at every retained node.
    pub fn sample_on_grid<F: Fn(f64) -> f64>(&self, f: F) -> Result<Vec<f64>> {
        self.nodes()
            .iter()
            .map(|&r| {
                let v = f(r);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Evaluation(format!("function is {v} at R = {r}")))
                }
            })
            .collect()
    }

    /// Natural cubic spline through `(r, value)` evaluated at the nodes.
    pub fn interpolate_table(
        &self,
        r: &[f64],
        values: &[f64],
        extrapolation: Extrapolation,
    ) -> Result<Vec<f64>> {
        let spline = NaturalCubicSpline::new(r, values)?;
        self.interpolate_spline(&spline, extrapolation)
    }

    pub fn interpolate_spline(
        &self,
        spline: &NaturalCubicSpline,
        extrapolation: Extrapolation,
    ) -> Result<Vec<f64>> {
        let (lo, hi) = spline.domain();
        let tol = 1e-12 * (self.r_max - self.r_min);
        if extrapolation == Extrapolation::Forbid {
            let (first, last) = (self.nodes()[0], *self.nodes().last().unwrap());
            if first < lo - tol || last > hi + tol {
                return Err(Error::Coverage(format!(
                    "table spans [{lo}, {hi}] but grid nodes span [{first}, {last}]"
                )));
            }
        }
        self.nodes()
            .iter()
            .map(|&x| {
                let x = if (x - lo).abs() <= tol { lo } else if (x - hi).abs() <= tol { hi } else { x };
                spline.eval_with(x, extrapolation)
            })
            .collect()
    }

    /// Project a function onto the basis: c_i = f(R_i) sqrt(w_i).
    pub fn project<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes()
            .iter()
            .zip(self.weights())
            .map(|(&r, &w)| f(r) * w.sqrt())
            .collect()
    }

    /// Short content hash of the grid layout, for run metadata.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for x in [self.r_min, self.r_max] {
            hasher.update(x.to_le_bytes());
        }
        hasher.update((self.n_elements as u64).to_le_bytes());
        hasher.update((self.order as u64).to_le_bytes());
        hasher.update([self.first as u8]);
        for (x, w) in self.nodes().iter().zip(self.weights()) {
            hasher.update(x.to_le_bytes());
            hasher.update(w.to_le_bytes());
        }
        hasher
            .finalize()
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

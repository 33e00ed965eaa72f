//! Small dense Levenberg–Marquardt solver for few-parameter curve fits.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when the relative cost decrease falls below this.
    pub ftol: f64,
    /// Stop when the relative parameter step falls below this.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            ftol: 1e-15,
            xtol: 1e-14,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub iterations: usize,
}

/// Minimise `sum r_i(p)^2`. `model(p, r, jac)` fills residuals `r` (len m)
/// and the row-major Jacobian `jac` (m x n).
pub fn levenberg_marquardt<F>(mut model: F, p0: &[f64], m: usize, opts: LmOptions) -> Result<LmResult>
where
    F: FnMut(&[f64], &mut [f64], &mut [f64]),
{
    let n = p0.len();
    if m < n {
        return Err(Error::Parameter(format!(
            "{m} data points cannot determine {n} parameters"
        )));
    }
    let mut p = p0.to_vec();
    let mut r = vec![0.0; m];
    let mut jac = vec![0.0; m * n];
    model(&p, &mut r, &mut jac);
    let mut cost = sumsq(&r);
    if !cost.is_finite() {
        return Err(Error::Evaluation("fit model is not finite at the start point".into()));
    }
    let mut lambda = 1e-3;
    let mut r_try = vec![0.0; m];
    let mut jac_try = vec![0.0; m * n];
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut jtj = vec![0.0; n * n];
        let mut jtr = vec![0.0; n];
        for i in 0..m {
            let row = &jac[i * n..(i + 1) * n];
            for a in 0..n {
                jtr[a] += row[a] * r[i];
                for b in 0..n {
                    jtj[a * n + b] += row[a] * row[b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[k * n + k] += lambda * jtj[k * n + k].max(1e-300);
            }
            let Some(step) = solve(&mut a, jtr.iter().map(|v| -v).collect(), n) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(&step).map(|(x, s)| x + s).collect();
            model(&trial, &mut r_try, &mut jac_try);
            let c = sumsq(&r_try);
            if c.is_finite() && c <= cost {
                let small_step = step
                    .iter()
                    .zip(&trial)
                    .all(|(s, x)| s.abs() <= opts.xtol * (x.abs() + opts.xtol));
                let small_gain = cost - c <= opts.ftol * cost;
                p = trial;
                std::mem::swap(&mut r, &mut r_try);
                std::mem::swap(&mut jac, &mut jac_try);
                cost = c;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if small_step || small_gain || cost == 0.0 {
                    return Ok(LmResult {
                        params: p,
                        cost,
                        iterations,
                    });
                }
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            // no downhill step at any damping: we sit at a minimum
            break;
        }
    }
    Ok(LmResult {
        params: p,
        cost,
        iterations,
    })
}

fn sumsq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn solve(a: &mut [f64], mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col].abs() < 1e-300 || !a[piv * n + col].is_finite() {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let s: f64 = (col + 1..n).map(|k| a[col * n + k] * b[k]).sum();
        b[col] = (b[col] - s) / a[col * n + col];
    }
    b.iter().all(|v| v.is_finite()).then_some(b)
}

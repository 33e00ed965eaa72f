//! Dormand–Prince 5(4) with max-norm error control on complex vectors.

use faer::c64;

use crate::error::{Error, Result};
use crate::units::au_to_fs;

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest step (a.u.).
    pub max_step: f64,
    /// Abort after this many attempted steps.
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b* (fifth minus embedded fourth order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

/// Adaptive integrator that owns its stage buffers and keeps the FSAL
/// derivative and the step-size guess between calls.
pub struct Dopri5 {
    ctl: StepControl,
    k: [Vec<c64>; 7],
    tmp: Vec<c64>,
    y_new: Vec<c64>,
    h: Option<f64>,
    fsal_valid: bool,
    pub stats: StepStats,
}

impl Dopri5 {
    pub fn new(dim: usize, ctl: StepControl) -> Self {
        let z = || vec![c64::new(0.0, 0.0); dim];
        Self {
            ctl,
            k: [z(), z(), z(), z(), z(), z(), z()],
            tmp: z(),
            y_new: z(),
            h: None,
            fsal_valid: false,
            stats: StepStats::default(),
        }
    }

    fn combine(out: &mut [c64], y: &[c64], h: f64, terms: &[(f64, &[c64])]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = c64::new(0.0, 0.0);
            for (c, k) in terms {
                acc += k[i] * *c;
            }
            *o = y[i] + acc * h;
        }
    }

    /// Advance `y` from `t` to `t_end` (a.u.).
    pub fn integrate<F>(&mut self, f: &mut F, t: &mut f64, y: &mut [c64], t_end: f64) -> Result<()>
    where
        F: FnMut(f64, &[c64], &mut [c64]),
    {
        if t_end <= *t {
            return Ok(());
        }
        if !self.fsal_valid {
            f(*t, y, &mut self.k[0]);
            self.stats.evaluations += 1;
            self.fsal_valid = true;
        }
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(f, *t, y),
        };
        let mut attempts = 0usize;
        while *t < t_end {
            attempts += 1;
            if attempts > self.ctl.max_steps {
                return Err(Error::Stiffness {
                    t_fs: au_to_fs(*t),
                    step: h,
                    detail: format!("exceeded {} steps", self.ctl.max_steps),
                });
            }
            h = h.min(self.ctl.max_step);
            let remaining = t_end - *t;
            let last = h >= remaining;
            let hs = if last { remaining } else { h };
            let err = self.try_step(f, *t, y, hs);
            if !err.is_finite() {
                h = hs * 0.1;
                self.stats.rejected += 1;
            } else if err <= 1.0 {
                *t = if last { t_end } else { *t + hs };
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                self.stats.accepted += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // a step clipped to an output time says nothing about the ideal size
                h = if last { h.max(hs * fac) } else { hs * fac };
            } else {
                self.stats.rejected += 1;
                h = hs * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
            if h < 1e-12 * t.abs().max(1.0) {
                return Err(Error::Stiffness {
                    t_fs: au_to_fs(*t),
                    step: h,
                    detail: "step size collapsed; the problem is stiff or the tolerances are too tight"
                        .into(),
                });
            }
        }
        self.h = Some(h);
        Ok(())
    }

    fn initial_step<F>(&mut self, f: &mut F, t: f64, y: &[c64]) -> f64
    where
        F: FnMut(f64, &[c64], &mut [c64]),
    {
        let scale = |v: &c64| self.ctl.abs_tol + self.ctl.rel_tol * v.norm();
        let d0 = y.iter().map(|v| v.norm() / scale(v)).fold(0.0, f64::max);
        let d1 = y
            .iter()
            .zip(&self.k[0])
            .map(|(v, k)| k.norm() / scale(v))
            .fold(0.0, f64::max);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.ctl.max_step);
        // one explicit Euler probe for the second derivative
        for (i, o) in self.tmp.iter_mut().enumerate() {
            *o = y[i] + self.k[0][i] * h0;
        }
        f(t + h0, &self.tmp, &mut self.k[1]);
        self.stats.evaluations += 1;
        let d2 = y
            .iter()
            .zip(self.k[1].iter().zip(&self.k[0]))
            .map(|(v, (a, b))| (a - b).norm() / scale(v))
            .fold(0.0, f64::max)
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.ctl.max_step)
    }

    fn try_step<F>(&mut self, f: &mut F, t: f64, y: &[c64], h: f64) -> f64
    where
        F: FnMut(f64, &[c64], &mut [c64]),
    {
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        Self::combine(&mut self.tmp, y, h, &[(A21, &k1[..])]);
        f(t + C2 * h, &self.tmp, k2);
        Self::combine(&mut self.tmp, y, h, &[(A31, &k1[..]), (A32, &k2[..])]);
        f(t + C3 * h, &self.tmp, k3);
        Self::combine(&mut self.tmp, y, h, &[(A41, &k1[..]), (A42, &k2[..]), (A43, &k3[..])]);
        f(t + C4 * h, &self.tmp, k4);
        Self::combine(&mut self.tmp, y, h, &[(A51, &k1[..]), (A52, &k2[..]), (A53, &k3[..]), (A54, &k4[..])]);
        f(t + C5 * h, &self.tmp, k5);
        Self::combine(
            &mut self.tmp,
            y,
            h,
            &[(A61, &k1[..]), (A62, &k2[..]), (A63, &k3[..]), (A64, &k4[..]), (A65, &k5[..])],
        );
        f(t + h, &self.tmp, k6);
        Self::combine(
            &mut self.y_new,
            y,
            h,
            &[(B1, &k1[..]), (B3, &k3[..]), (B4, &k4[..]), (B5, &k5[..]), (B6, &k6[..])],
        );
        f(t + h, &self.y_new, k7);
        self.stats.evaluations += 6;
        let mut err = 0.0f64;
        for i in 0..y.len() {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let sc = self.ctl.abs_tol + self.ctl.rel_tol * y[i].norm().max(self.y_new[i].norm());
            err = err.max(e.norm() / sc);
        }
        if err.is_nan() {
            f64::INFINITY
        } else {
            err
        }
    }
}

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, LmOptions};

/// `P(t) = limit * (1 - exp(-(t - t0) / tau))` fitted to a late-time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaturationFit {
    pub limit: f64,
    /// 1/tau (1/fs); zero for a constant series.
    pub rate: f64,
    /// fs; absent for a constant series.
    pub t0: Option<f64>,
    /// RMS residual over the window.
    pub residual: f64,
    pub points: usize,
    pub window_start: f64,
}

impl SaturationFit {
    pub fn tau(&self) -> f64 {
        1.0 / self.rate
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.t0 {
            Some(t0) => self.limit * (1.0 - (-(t - t0) * self.rate).exp()),
            None => self.limit,
        }
    }
}

const MIN_POINTS: usize = 10;

/// Best (limit, amplitude, cost) of `limit - amplitude exp(-k s)` for fixed k.
fn linear_part(s: &[f64], y: &[f64], k: f64) -> (f64, f64, f64) {
    let m = s.len() as f64;
    let (mut se, mut see, mut sy, mut sey) = (0.0, 0.0, 0.0, 0.0);
    for (&si, &yi) in s.iter().zip(y) {
        let e = (-k * si).exp();
        se += e;
        see += e * e;
        sy += yi;
        sey += e * yi;
    }
    // normal equations for y ~ p - c e
    let det = m * see - se * se;
    if det.abs() <= 1e-300 {
        return (f64::NAN, f64::NAN, f64::INFINITY);
    }
    let p = (see * sy - se * sey) / det;
    let c = (se * sy - m * sey) / det;
    let cost = s
        .iter()
        .zip(y)
        .map(|(&si, &yi)| {
            let r = p - c * (-k * si).exp() - yi;
            r * r
        })
        .sum();
    (p, c, cost)
}

pub fn fit_saturation(times: &[f64], values: &[f64], window_start: Option<f64>) -> Result<SaturationFit> {
    if times.len() != values.len() {
        return Err(Error::Validation("time and value columns differ in length".into()));
    }
    if times.len() < MIN_POINTS {
        return Err(Error::Validation(format!("need at least {MIN_POINTS} samples, got {}", times.len())));
    }
    if times.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::Validation("series contains non-finite values".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("times must be strictly increasing".into()));
    }
    let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if let Some(k) = values.windows(2).position(|w| w[1] < w[0] - 1e-12 * scale) {
        return Err(Error::Validation(format!(
            "series decreases at t = {} ({} -> {})",
            times[k + 1],
            values[k],
            values[k + 1]
        )));
    }
    let (t_first, t_last) = (times[0], times[times.len() - 1]);
    let start = window_start.unwrap_or(t_first + 0.5 * (t_last - t_first));
    let first = times.partition_point(|&t| t < start);
    let (tw, y) = (&times[first..], &values[first..]);
    if tw.len() < MIN_POINTS {
        return Err(Error::Validation(format!(
            "fit window from {start} fs holds {} samples, need {MIN_POINTS}",
            tw.len()
        )));
    }
    let span = y[y.len() - 1] - y[0];
    if span <= 1e-13 * scale {
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        return Ok(SaturationFit {
            limit: mean,
            rate: 0.0,
            t0: None,
            residual: (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64).sqrt(),
            points: y.len(),
            window_start: tw[0],
        });
    }

    let s: Vec<f64> = tw.iter().map(|t| t - tw[0]).collect();
    let width = s[s.len() - 1];
    // scan the rate on a log grid, then polish all three parameters
    let n_grid = 241;
    let (lo, hi) = ((1e-3 / width).ln(), (1e3 / width).ln());
    let mut best = (0usize, f64::INFINITY);
    for i in 0..n_grid {
        let k = (lo + (hi - lo) * i as f64 / (n_grid - 1) as f64).exp();
        let cost = linear_part(&s, y, k).2;
        if cost < best.1 {
            best = (i, cost);
        }
    }
    if best.0 == 0 || best.0 == n_grid - 1 {
        return Err(Error::FitQuality(
            "saturation rate is not resolved by the fit window".into(),
        ));
    }
    let k0 = (lo + (hi - lo) * best.0 as f64 / (n_grid - 1) as f64).exp();
    let (p0, c0, _) = linear_part(&s, y, k0);
    let model = |p: &[f64], r: &mut [f64], jac: &mut [f64]| {
        let k = p[2].exp();
        for (i, (&si, &yi)) in s.iter().zip(y).enumerate() {
            let e = (-k * si).exp();
            r[i] = p[0] - p[1] * e - yi;
            jac[3 * i] = 1.0;
            jac[3 * i + 1] = -e;
            jac[3 * i + 2] = p[1] * si * k * e;
        }
    };
    let fit = levenberg_marquardt(model, &[p0, c0, k0.ln()], y.len(), LmOptions::default())?;
    let (limit, amp, rate) = (fit.params[0], fit.params[1], fit.params[2].exp());
    if !(limit.is_finite() && rate.is_finite() && amp > 0.0) {
        return Err(Error::FitQuality("series does not approach a limit from below".into()));
    }
    let t0 = (amp / limit > 0.0).then(|| tw[0] + (amp / limit).ln() / rate);
    Ok(SaturationFit {
        limit,
        rate,
        t0,
        residual: (fit.cost / y.len() as f64).sqrt(),
        points: y.len(),
        window_start: tw[0],
    })
}

/// Read `(time, value)` from a CSV with a header row. `column` names the
/// value column; `pd_total` sums every `pd_*` column.
pub fn read_series(path: impl AsRef<Path>, time_column: &str, column: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_series(&text, time_column, column).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn parse_series(text: &str, time_column: &str, column: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Format("empty file".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::Format(format!("no column named {name}")))
    };
    let it = find(time_column)?;
    let cols: Vec<usize> = if column == "pd_total" {
        let c: Vec<usize> = (0..header.len()).filter(|&i| header[i].starts_with("pd_")).collect();
        if c.is_empty() {
            return Err(Error::Format("no pd_* columns to sum".into()));
        }
        c
    } else {
        vec![find(column)?]
    };
    let mut t = Vec::new();
    let mut v = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let num = |i: usize| -> Result<f64> {
            fields
                .get(i)
                .and_then(|f| f.parse::<f64>().ok())
                .ok_or_else(|| Error::Format(format!("bad number in data row {}", n + 1)))
        };
        t.push(num(it)?);
        let mut sum = 0.0;
        for &c in &cols {
            sum += num(c)?;
        }
        v.push(sum);
    }
    Ok((t, v))
}

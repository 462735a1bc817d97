//! Dormand-Prince 5(4) integrator with dense output.
//!
//! The step sequence only depends on the right-hand side and the tolerances.
//! Requested output times are filled by the fourth-order continuous
//! extension, so refining the output grid never changes values at common
//! sample times.

use crate::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Error-control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-9, atol: 1e-12 }
    }
}

/// Counters reported after a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrate `dy/dt = f(t, y)` from `t0` to `t_end` and report the state at
/// every time in `outputs` (ascending, all within `[t0, t_end]`) through
/// `observe`.
///
/// `f` writes the derivative into its last argument and may fail; `observe`
/// may fail too (used for runtime invariant checks).
pub fn integrate<F, O>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    outputs: &[f64],
    tol: Tolerances,
    mut observe: O,
) -> Result<Stats>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    O: FnMut(f64, &[f64]) -> Result<()>,
{
    let n = y0.len();
    let mut stats = Stats::default();
    if outputs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Argument("output times must be strictly increasing".into()));
    }
    let (first, last) = match (outputs.first(), outputs.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Ok(stats),
    };
    if first < t0 || last > t_end {
        return Err(Error::Argument("output times must lie within [t0, t_end]".into()));
    }

    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut dense = vec![0.0; 5 * n];
    let mut interp = vec![0.0; n];

    let mut t = t0;
    let mut next_out = 0;
    while next_out < outputs.len() && outputs[next_out] == t0 {
        observe(t0, &y)?;
        next_out += 1;
    }
    if next_out == outputs.len() {
        return Ok(stats);
    }

    f(t, &y, &mut k1)?;
    stats.evaluations += 1;
    let span = t_end - t0;
    let mut h = initial_step(&mut f, t, &y, &k1, span, tol, &mut stats)?;

    let mut err_old: f64 = 1e-4;
    while next_out < outputs.len() {
        if t + h > t_end {
            h = t_end - t;
        }
        if h <= 1e-14 * span.max(t.abs()) {
            return Err(Error::Integration {
                t,
                reason: format!("step size underflow (h = {h:e}); system too stiff for tolerances"),
            });
        }

        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, &ytmp, &mut k2)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, &ytmp, &mut k3)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, &ytmp, &mut k4)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, &ytmp, &mut k5)?;
        for i in 0..n {
            ytmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h, &ytmp, &mut k6)?;
        for i in 0..n {
            ynew[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t + h, &ynew, &mut k7)?;
        stats.evaluations += 6;

        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sk = tol.atol + tol.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sk).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            stats.rejected += 1;
            h *= 0.2;
            continue;
        }

        if err <= 1.0 {
            stats.accepted += 1;
            let t_new = t + h;
            for i in 0..n {
                let ydiff = ynew[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                dense[i] = y[i];
                dense[n + i] = ydiff;
                dense[2 * n + i] = bspl;
                dense[3 * n + i] = ydiff - h * k7[i] - bspl;
                dense[4 * n + i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                        + D7 * k7[i]);
            }
            let last_step = t_new >= t_end;
            while next_out < outputs.len() && (outputs[next_out] <= t_new || last_step) {
                let to = outputs[next_out];
                if to == t_new || last_step && to >= t_new {
                    observe(to, &ynew)?;
                } else {
                    let theta = (to - t) / h;
                    let theta1 = 1.0 - theta;
                    for i in 0..n {
                        interp[i] = dense[i]
                            + theta
                                * (dense[n + i]
                                    + theta1
                                        * (dense[2 * n + i]
                                            + theta
                                                * (dense[3 * n + i] + theta1 * dense[4 * n + i])));
                    }
                    observe(to, &interp)?;
                }
                next_out += 1;
            }
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;
            // PI controller (Hairer & Wanner, beta = 0.04).
            let fac = 0.9 * err.max(1e-10).powf(-0.17) * err_old.powf(0.04);
            h *= fac.clamp(0.2, 10.0);
            err_old = err.max(1e-4);
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
    Ok(stats)
}

fn initial_step<F>(
    f: &mut F,
    t: f64,
    y: &[f64],
    f0: &[f64],
    span: f64,
    tol: Tolerances,
    stats: &mut Stats,
) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    let sk: Vec<f64> = y.iter().map(|v| tol.atol + tol.rtol * v.abs()).collect();
    let rms = |v: &[f64]| -> f64 {
        (v.iter().zip(&sk).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let d0 = rms(y);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; n];
    f(t + h0, &y1, &mut f1)?;
    stats.evaluations += 1;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(span))
}

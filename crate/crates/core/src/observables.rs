//! Derived quantities: reduced cavity state, fidelities, the Wigner function,
//! peak envelopes of oscillating signals and exponential decay fits.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{hermitian_eigen, hermitian_eigenvalues};
use crate::operators::DensitySuperket;
use crate::semiclassical::TimeSeries;
use crate::{Error, Result, C64};

/// Reference frequency (MHz) that makes the decay rate ζ dimensionless.
pub const OMEGA0: f64 = 10.0;
/// Default relative prominence a local maximum needs to count as a peak.
pub const DEFAULT_PROMINENCE: f64 = 1e-3;
/// Allowed deviation of ‖ψ₀‖ from one.
pub const NORM_TOL: f64 = 1e-9;

/// Partial trace over all spins.
pub fn reduce_to_cavity(rho: &DensitySuperket) -> DMatrix<C64> {
    let spec = rho.basis;
    let (f, d) = (spec.fock_cutoff, spec.dim);
    let mut out = DMatrix::zeros(f, f);
    for s in 0..spec.spin_dim() {
        for n in 0..f {
            for m in 0..f {
                out[(n, m)] += rho.data[spec.index(s, n) * d + spec.index(s, m)];
            }
        }
    }
    out
}

/// `√⟨ψ₀|ρ_c|ψ₀⟩` for a normalized target; `ψ₀` may be shorter than the
/// cutoff (missing amplitudes are zero).
pub fn fidelity(rho_c: &DMatrix<C64>, psi0: &[C64]) -> Result<f64> {
    let norm = psi0.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::Argument(format!("target state is not normalized (‖ψ₀‖ = {norm})")));
    }
    if psi0.len() > rho_c.nrows() {
        return Err(Error::Argument("target state exceeds the Fock cutoff".into()));
    }
    let mut overlap = C64::new(0.0, 0.0);
    for (i, a) in psi0.iter().enumerate() {
        for (j, b) in psi0.iter().enumerate() {
            overlap += a.conj() * rho_c[(i, j)] * b;
        }
    }
    Ok(overlap.re.clamp(0.0, 1.0).sqrt())
}

/// Uhlmann root fidelity `tr √(√a b √a)` between two density matrices.
pub fn state_fidelity(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let (lam, u) = hermitian_eigen(a);
    let sqrt_diag = DVector::from_iterator(lam.len(), lam.iter().map(|x| C64::new(x.max(0.0).sqrt(), 0.0)));
    let sqrt_a = &u * DMatrix::from_diagonal(&sqrt_diag) * u.adjoint();
    let m = &sqrt_a * b * &sqrt_a;
    hermitian_eigenvalues(&m).iter().map(|x| x.max(0.0).sqrt()).sum::<f64>().min(1.0)
}

/// Undo a free rotation at `omega`: `e^{iωt n} ρ_c e^{−iωt n}`.
pub fn co_rotate(rho_c: &DMatrix<C64>, omega: f64, t: f64) -> DMatrix<C64> {
    DMatrix::from_fn(rho_c.nrows(), rho_c.ncols(), |m, n| {
        rho_c[(m, n)] * C64::from_polar(1.0, omega * t * (m as f64 - n as f64))
    })
}

/// Sampled Wigner function on a uniform `p × q` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub p_axis: Vec<f64>,
    pub q_axis: Vec<f64>,
    /// `values[(i, j)] = W(p_axis[i], q_axis[j])`.
    pub values: DMatrix<f64>,
    pub cell_area: f64,
}

impl WignerGrid {
    /// Riemann sum of W over the grid.
    pub fn normalization(&self) -> f64 {
        self.values.sum() * self.cell_area
    }

    pub fn min(&self) -> f64 {
        self.values.min()
    }

    pub fn max(&self) -> f64 {
        self.values.max()
    }
}

/// `n` evenly spaced points covering `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Generalized Laguerre polynomials `L_0^α(x) … L_n^α(x)`.
fn laguerre_all(n: usize, alpha: f64, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(1.0 + alpha - x);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * out[k] - (kf + alpha) * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// W at a single phase-space point, from the Fock-basis Laguerre expansion.
///
/// `W(p, q) = (1/π)∫ e^{2iqy} ⟨p−y|ρ|p+y⟩ dy`, with `p` the argument of the
/// position representation and `q` its conjugate.
pub fn wigner_point(rho_c: &DMatrix<C64>, p: f64, q: f64) -> f64 {
    let dim = rho_c.nrows();
    let alpha = C64::new(p, q) * std::f64::consts::FRAC_1_SQRT_2;
    let b = 4.0 * alpha.norm_sqr();
    let two_alpha = alpha * 2.0;
    let mut w = 0.0;
    for m in 0..dim {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        // diagonal
        w += sign * rho_c[(m, m)].re * laguerre_all(m, 0.0, b)[m];
        // ratio √(m!/n!) built up incrementally along with (2α)^(n−m)
        let mut factor = C64::new(1.0, 0.0);
        for n in m + 1..dim {
            factor *= two_alpha / (n as f64).sqrt();
            let lag = laguerre_all(m, (n - m) as f64, b)[m];
            w += 2.0 * sign * (rho_c[(m, n)] * factor).re * lag;
        }
    }
    w * (-0.5 * b).exp() / std::f64::consts::PI
}

/// Evaluate W on the product grid `p_axis × q_axis` (uniform axes).
pub fn wigner(rho_c: &DMatrix<C64>, p_axis: &[f64], q_axis: &[f64]) -> Result<WignerGrid> {
    if p_axis.len() < 2 || q_axis.len() < 2 {
        return Err(Error::Argument("Wigner grid needs at least two points per axis".into()));
    }
    let dp = (p_axis[p_axis.len() - 1] - p_axis[0]) / (p_axis.len() - 1) as f64;
    let dq = (q_axis[q_axis.len() - 1] - q_axis[0]) / (q_axis.len() - 1) as f64;
    let values = DMatrix::from_fn(p_axis.len(), q_axis.len(), |i, j| wigner_point(rho_c, p_axis[i], q_axis[j]));
    Ok(WignerGrid { p_axis: p_axis.to_vec(), q_axis: q_axis.to_vec(), values, cell_area: (dp * dq).abs() })
}

/// Convenience: square grid `[−extent, extent]²` with `resolution` points per axis.
pub fn wigner_square(rho_c: &DMatrix<C64>, extent: f64, resolution: usize) -> Result<WignerGrid> {
    let axis = linspace(-extent, extent, resolution);
    wigner(rho_c, &axis, &axis)
}

/// Local maxima of a sampled signal with relative prominence at least
/// `rel_prominence · max|x|`, plus the global maximum (earliest on ties).
///
/// Prominence follows the usual topographic definition: the height of a peak
/// above the higher of the two minima separating it from taller terrain (or
/// the series ends).
pub fn peak_envelope_with(series: &TimeSeries<f64>, rel_prominence: f64) -> Vec<(f64, f64)> {
    let x = &series.values;
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let threshold = rel_prominence * scale;
    let global = x.iter().enumerate().fold(0, |best, (i, &v)| if v > x[best] { i } else { best });
    let mut picked = vec![global];
    for i in 1..n.saturating_sub(1) {
        if !(x[i] > x[i - 1] && x[i] > x[i + 1]) || i == global {
            continue;
        }
        let mut left_min = x[i];
        for j in (0..i).rev() {
            if x[j] > x[i] {
                break;
            }
            left_min = left_min.min(x[j]);
        }
        let mut right_min = x[i];
        for &v in &x[i + 1..] {
            if v > x[i] {
                break;
            }
            right_min = right_min.min(v);
        }
        if x[i] - left_min.max(right_min) >= threshold {
            picked.push(i);
        }
    }
    picked.sort_unstable();
    picked.into_iter().map(|i| (series.times[i], x[i])).collect()
}

/// [`peak_envelope_with`] at the default prominence.
pub fn peak_envelope(series: &TimeSeries<f64>) -> Vec<(f64, f64)> {
    peak_envelope_with(series, DEFAULT_PROMINENCE)
}

/// Running average over windows of `k` sample intervals (trapezoid rule),
/// centred on each sample; samples closer than `k/2` to either end are
/// dropped. With `k` intervals spanning exactly one period this removes a
/// sinusoid of that period (and its harmonics below order `k`) exactly.
pub fn period_average(series: &TimeSeries<f64>, k: usize) -> Result<TimeSeries<f64>> {
    if k < 2 || k % 2 != 0 {
        return Err(Error::Argument(format!("averaging window must be an even number of intervals, got {k}")));
    }
    let x = &series.values;
    let half = k / 2;
    let mut out = TimeSeries::new(series.label.clone());
    if x.len() <= k {
        return Ok(out);
    }
    for i in half..x.len() - half {
        let window = &x[i - half..=i + half];
        let sum: f64 = window.iter().sum::<f64>() - 0.5 * (window[0] + window[k]);
        out.push(series.times[i], sum / k as f64)?;
    }
    Ok(out)
}

/// Upper envelope `sup_{t' ≥ t} x(t')`: the smallest non-increasing curve on
/// or above the series.
pub fn upper_envelope(series: &TimeSeries<f64>) -> TimeSeries<f64> {
    let mut values = series.values.clone();
    for i in (0..values.len().saturating_sub(1)).rev() {
        values[i] = values[i].max(values[i + 1]);
    }
    TimeSeries { times: series.times.clone(), values, label: series.label.clone() }
}

/// Keep entries up to (not including) the first one below `floor · max`.
pub fn above_floor(points: &[(f64, f64)], floor: f64) -> Vec<(f64, f64)> {
    let max = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    points.iter().cloned().take_while(|p| p.1 >= floor * max).collect()
}

/// Result of fitting `n(t) = n₀ e^{−ζ ω₀ t}` to peak values.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub zeta: f64,
    pub n0: f64,
    /// RMS deviation of the peak values from the fitted curve (linear scale).
    pub residual_std: f64,
    pub peaks: Vec<(f64, f64)>,
}

impl DecayFit {
    pub fn predict(&self, t: f64, omega0: f64) -> f64 {
        self.n0 * (-self.zeta * omega0 * t).exp()
    }
}

/// Least-squares line through `ln n` versus `t`; non-positive values are
/// skipped.
pub fn fit_decay_rate(peaks: &[(f64, f64)], omega0: f64) -> Result<DecayFit> {
    if !(omega0 > 0.0) {
        return Err(Error::Argument(format!("reference frequency must be positive, got {omega0}")));
    }
    let used: Vec<(f64, f64)> = peaks.iter().cloned().filter(|&(_, v)| v > 0.0 && v.is_finite()).collect();
    if used.len() < 2 {
        return Err(Error::Fit(format!("need at least two positive peaks, got {}", used.len())));
    }
    let m = used.len() as f64;
    let t_mean = used.iter().map(|p| p.0).sum::<f64>() / m;
    let y_mean = used.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let sxx: f64 = used.iter().map(|p| (p.0 - t_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all peaks share one time".into()));
    }
    let sxy: f64 = used.iter().map(|p| (p.0 - t_mean) * (p.1.ln() - y_mean)).sum();
    let slope = sxy / sxx;
    let n0 = (y_mean - slope * t_mean).exp();
    let zeta = -slope / omega0 + 0.0;
    let residual_std =
        (used.iter().map(|&(t, v)| (v - n0 * (slope * t).exp()).powi(2)).sum::<f64>() / m).sqrt();
    Ok(DecayFit { zeta, n0, residual_std, peaks: used })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::HilbertSpec;
    use std::f64::consts::PI;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn fock(n: usize, dim: usize) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(dim, dim);
        m[(n, n)] = c(1.0);
        m
    }

    fn pure(psi: &[C64]) -> DMatrix<C64> {
        let v = nalgebra::DVector::from_column_slice(psi);
        &v * v.adjoint()
    }

    #[test]
    fn partial_trace_examples() {
        let spec = HilbertSpec::new(3, 2).unwrap();
        let spins = pure(&[c(0.6), c(0.0), C64::new(0.0, 0.8), c(0.0)]);
        let cav = pure(&[c(0.0), c(0.6), c(0.8)]);
        let rho = DensitySuperket::product(&spins, &cav, spec).unwrap();
        assert!((reduce_to_cavity(&rho) - &cav).map(|x| x.norm()).max() < 1e-15);

        // ½(|↓,0⟩ + |↑,1⟩)(h.c.) on one spin
        let spec = HilbertSpec::new(2, 1).unwrap();
        let mut psi = vec![c(0.0); 4];
        psi[spec.index(0, 0)] = c(1.0);
        psi[spec.index(1, 1)] = c(1.0);
        let rho = DensitySuperket::pure(&psi, spec).unwrap();
        let red = reduce_to_cavity(&rho);
        assert!((red - DMatrix::from_diagonal_element(2, 2, c(0.5))).map(|x| x.norm()).max() < 1e-15);
    }

    #[test]
    fn fidelity_examples() {
        let s = 0.5f64.sqrt();
        let psi = [c(0.0), c(s), c(s)];
        let phi = [c(0.0), c(s), c(-s)];
        assert!((fidelity(&pure(&psi), &psi).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fidelity(&pure(&phi), &psi).unwrap(), 0.0);
        let mix = (pure(&psi) + pure(&phi)) * c(0.5);
        assert!((fidelity(&mix, &psi).unwrap() - s).abs() < 1e-15);
        assert!(matches!(fidelity(&mix, &[c(1.0), c(1.0)]), Err(Error::Argument(_))));
        let shorter = [c(1.0)];
        assert_eq!(fidelity(&fock(0, 3), &shorter).unwrap(), 1.0);
    }

    #[test]
    fn uhlmann_fidelity_reduces_to_pure_overlap() {
        let s = 0.5f64.sqrt();
        let psi = [c(0.0), c(s), c(s)];
        let mix = (pure(&psi) + fock(0, 3)) * c(0.5);
        let expected = fidelity(&mix, &psi).unwrap();
        assert!((state_fidelity(&pure(&psi), &mix) - expected).abs() < 1e-7);
        assert!((state_fidelity(&mix, &mix) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn co_rotation_phases() {
        let rho = pure(&[c(0.6), c(0.8)]);
        let r = co_rotate(&rho, 2.0, 0.25);
        assert!((r[(1, 0)] - c(0.48) * C64::from_polar(1.0, 0.5)).norm() < 1e-15);
        assert_eq!(r[(0, 0)], rho[(0, 0)]);
    }

    #[test]
    fn laguerre_values() {
        // L_2^1(x) = (x² − 6x + 6)/2
        let l = laguerre_all(2, 1.0, 0.7);
        assert!((l[2] - (0.49 - 4.2 + 6.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn wigner_fock_examples() {
        let vac = fock(0, 4);
        assert!((wigner_point(&vac, 0.0, 0.0) - 1.0 / PI).abs() < 1e-12);
        assert!((wigner_point(&vac, 0.3, -1.1) - (-(0.09 + 1.21f64)).exp() / PI).abs() < 1e-12);
        assert!((wigner_point(&fock(1, 4), 0.0, 0.0) + 1.0 / PI).abs() < 1e-12);
    }

    fn hermite_functions(n_max: usize, x: f64) -> Vec<f64> {
        let mut psi = vec![PI.powf(-0.25) * (-0.5 * x * x).exp()];
        if n_max >= 1 {
            psi.push(2f64.sqrt() * x * psi[0]);
        }
        for n in 1..n_max {
            let nf = n as f64;
            let next = (2.0 / (nf + 1.0)).sqrt() * x * psi[n] - (nf / (nf + 1.0)).sqrt() * psi[n - 1];
            psi.push(next);
        }
        psi
    }

    /// Direct quadrature of the defining integral.
    fn wigner_quadrature(rho: &DMatrix<C64>, p: f64, q: f64) -> f64 {
        let dim = rho.nrows();
        let (lo, hi, steps) = (-12.0, 12.0, 4800);
        let h = (hi - lo) / steps as f64;
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..=steps {
            let y = lo + k as f64 * h;
            let a = hermite_functions(dim - 1, p - y);
            let b = hermite_functions(dim - 1, p + y);
            let mut kernel = C64::new(0.0, 0.0);
            for m in 0..dim {
                for n in 0..dim {
                    kernel += rho[(m, n)] * a[m] * b[n];
                }
            }
            let weight = if k == 0 || k == steps { 0.5 } else { 1.0 };
            acc += C64::from_polar(weight * h, 2.0 * q * y) * kernel;
        }
        acc.re / PI
    }

    #[test]
    fn laguerre_form_matches_quadrature() {
        let psi = [c(0.3), C64::new(0.5, 0.2), c(-0.4), C64::new(0.1, -0.6)];
        let norm = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let psi: Vec<C64> = psi.iter().map(|x| x / norm).collect();
        let rho = pure(&psi) * c(0.7) + fock(2, 4) * c(0.3);
        for (p, q) in [(0.0, 0.0), (0.7, -0.4), (-1.3, 0.9), (2.0, 1.5)] {
            let a = wigner_point(&rho, p, q);
            let b = wigner_quadrature(&rho, p, q);
            assert!((a - b).abs() < 1e-10, "({p}, {q}): {a} vs {b}");
        }
    }

    #[test]
    fn grid_normalization_and_bounds() {
        let s = 0.5f64.sqrt();
        let rho = pure(&[c(0.0), c(s), c(s)]);
        let grid = wigner_square(&rho, 6.0, 121).unwrap();
        assert!((grid.normalization() - 1.0).abs() < 1e-3);
        assert!(grid.max() <= 1.0 / PI + 1e-9);
        assert!(grid.min() >= -1.0 / PI - 1e-9);
        assert!(wigner(&rho, &[0.0], &[0.0, 1.0]).is_err());
    }

    fn series(times: &[f64], f: impl Fn(f64) -> f64) -> TimeSeries<f64> {
        let mut s = TimeSeries::new("x");
        for &t in times {
            s.push(t, f(t)).unwrap();
        }
        s
    }

    #[test]
    fn peaks_of_damped_rabi() {
        let (omega, lambda) = (3.0, 0.4);
        let times = linspace(0.0, 5.0, 20001);
        let s = series(&times, |t| (omega * t).cos().powi(2) * (-lambda * t).exp());
        let peaks = peak_envelope(&s);
        assert_eq!(peaks.len(), 5);
        for (k, &(t, v)) in peaks.iter().enumerate() {
            // exact maxima sit slightly before kπ/Ω because of the damping
            let tk = if k == 0 { 0.0 } else { (k as f64 * PI - (lambda / (2.0 * omega)).atan()) / omega };
            assert!((t - tk).abs() < 5e-4, "peak {k} at {t}");
            let exact = (omega * tk).cos().powi(2) * (-lambda * tk).exp();
            assert!((v - exact).abs() < 1e-6);
            assert!((t - k as f64 * PI / omega).abs() < 0.03);
        }
    }

    #[test]
    fn peak_tie_break_and_monotone() {
        let times = linspace(0.0, 1.0, 11);
        assert_eq!(peak_envelope(&series(&times, |t| (-t).exp())), vec![(0.0, 1.0)]);
        assert_eq!(peak_envelope(&series(&times, |_| 2.0)), vec![(0.0, 2.0)]);
        // ripple below the prominence threshold is ignored
        let s = series(&linspace(0.0, 1.0, 20001), |t| 1.0 - 0.5 * t + 4e-4 * (2000.0 * t).sin());
        assert_eq!(peak_envelope(&s).len(), 1);
        assert!(peak_envelope_with(&s, 1e-7).len() > 10);
    }

    #[test]
    fn period_average_removes_ripple() {
        let period = 0.01;
        let k = 6;
        let times: Vec<f64> = (0..600).map(|i| i as f64 * period / k as f64).collect();
        let s = series(&times, |t| 2.0 + 0.3 * (2.0 * PI * t / period + 0.4).sin());
        let avg = period_average(&s, k).unwrap();
        assert_eq!(avg.len(), 600 - k);
        assert_eq!(avg.times[0], times[3]);
        assert!(avg.values.iter().all(|v| (v - 2.0).abs() < 1e-12));
        assert!(period_average(&s, 3).is_err());
        assert!(period_average(&series(&times[..4], |t| t), 6).unwrap().is_empty());
    }

    #[test]
    fn upper_envelope_is_suffix_max() {
        let s = series(&[0.0, 1.0, 2.0, 3.0, 4.0], |t| [1.0, 0.2, 0.6, 0.1, 0.3][t as usize]);
        assert_eq!(upper_envelope(&s).values, vec![1.0, 0.6, 0.6, 0.3, 0.3]);
        assert!(upper_envelope(&series(&[], |t| t)).is_empty());
    }

    #[test]
    fn floor_cuts_at_first_small_value() {
        let pts = [(0.0, 1.0), (1.0, 0.1), (2.0, 1e-4), (3.0, 0.5)];
        assert_eq!(above_floor(&pts, 1e-3), vec![(0.0, 1.0), (1.0, 0.1)]);
        assert_eq!(above_floor(&pts, 0.0).len(), 4);
    }

    #[test]
    fn decay_fit_examples() {
        let peaks: Vec<(f64, f64)> = (0..6).map(|k| (0.1 * k as f64, (-0.5 * OMEGA0 * 0.1 * k as f64).exp())).collect();
        let fit = fit_decay_rate(&peaks, OMEGA0).unwrap();
        assert!((fit.zeta - 0.5).abs() < 1e-9);
        assert!((fit.n0 - 1.0).abs() < 1e-9);
        assert!(fit.residual_std < 1e-12);

        let flat = fit_decay_rate(&[(0.0, 3.0), (1.0, 3.0), (2.0, 3.0)], OMEGA0).unwrap();
        assert_eq!(flat.zeta, 0.0);
        assert!(matches!(fit_decay_rate(&[(0.0, 1.0), (1.0, -1.0)], OMEGA0), Err(Error::Fit(_))));
        assert!(fit_decay_rate(&[(0.0, 1.0)], OMEGA0).is_err());
    }

    #[test]
    fn decay_fit_is_scale_invariant() {
        let peaks = [(0.0, 1.0), (0.3, 0.7), (0.7, 0.55), (1.1, 0.3)];
        let a = fit_decay_rate(&peaks, OMEGA0).unwrap();
        let scaled: Vec<(f64, f64)> = peaks.iter().map(|&(t, v)| (t, 42.0 * v)).collect();
        let b = fit_decay_rate(&scaled, OMEGA0).unwrap();
        assert!((a.zeta - b.zeta).abs() < 1e-12);
        assert!((b.n0 / a.n0 - 42.0).abs() < 1e-10);
        assert!((b.residual_std / a.residual_std - 42.0).abs() < 1e-8);
        assert!(a.residual_std > 0.0);
    }
}

//! Mean-field dynamics of the cavity amplitude and the per-class spin
//! expectations.
//!
//! The equations factorize `⟨σ⁻ a⟩ ≈ ⟨σ⁻⟩⟨a⟩` and are integrated in the frame
//! rotating at half the drive frequency (the `H₀` frame). The squeezed-frame
//! photon number is evaluated afterwards with [`photon_number_squeezed`].
//!
//! Loss rates enter as amplitude decay rates: `⟨a⟩` decays at κ, `⟨σ⁻⟩` at
//! γ_h + 2γ_p and `⟨σᶻ⟩ + 1` at 2γ_h. The master equation in
//! [`crate::operators`] uses `κ D[a]` etc. with the usual ½, so the same
//! numbers there mean half the amplitude decay for `a` and `σ⁻`'s radiative part.

use crate::model::{SpinClasses, SystemParams};
use crate::ode::{self, Tolerances};
use crate::{Error, Result, C64};

/// Tolerance on the Bloch bound before a state is rejected.
pub const BLOCH_TOLERANCE: f64 = 1e-6;

/// ⟨a⟩ plus ⟨σ_j⁻⟩ and ⟨σ_j^z⟩ for every spin class.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    pub a: C64,
    pub sm: Vec<C64>,
    pub sz: Vec<f64>,
}

impl MeanFieldState {
    /// Zero cavity amplitude, every spin down.
    pub fn ground(n_classes: usize) -> Self {
        MeanFieldState { a: C64::new(0.0, 0.0), sm: vec![C64::new(0.0, 0.0); n_classes], sz: vec![-1.0; n_classes] }
    }

    pub fn n_classes(&self) -> usize {
        self.sm.len()
    }

    fn check_dims(&self, classes: &SpinClasses) -> Result<()> {
        if self.sm.len() != self.sz.len() || self.sm.len() != classes.len() {
            return Err(Error::Argument(format!(
                "state has {} coherences and {} populations for {} classes",
                self.sm.len(),
                self.sz.len(),
                classes.len()
            )));
        }
        Ok(())
    }

    /// Largest violation of |σ⁻| ≤ 1 and |σ^z| ≤ 1.
    pub fn bloch_excess(&self) -> f64 {
        let sm = self.sm.iter().map(|s| s.norm() - 1.0);
        let sz = self.sz.iter().map(|z| z.abs() - 1.0);
        sm.chain(sz).fold(0.0, f64::max)
    }

    /// Excitation number |⟨a⟩|² + Σ N_j (1 + ⟨σ_j^z⟩)/2.
    pub fn excitations(&self, classes: &SpinClasses) -> f64 {
        self.a.norm_sqr()
            + classes
                .classes
                .iter()
                .zip(&self.sz)
                .map(|(c, z)| c.multiplicity as f64 * 0.5 * (1.0 + z))
                .sum::<f64>()
    }

    fn pack(&self, y: &mut Vec<f64>) {
        y.clear();
        y.push(self.a.re);
        y.push(self.a.im);
        for s in &self.sm {
            y.push(s.re);
            y.push(s.im);
        }
        y.extend_from_slice(&self.sz);
    }

    fn unpack(y: &[f64], m: usize) -> Self {
        MeanFieldState {
            a: C64::new(y[0], y[1]),
            sm: (0..m).map(|j| C64::new(y[2 + 2 * j], y[3 + 2 * j])).collect(),
            sz: y[2 + 2 * m..2 + 3 * m].to_vec(),
        }
    }
}

/// Sampled observable.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    pub times: Vec<f64>,
    pub values: Vec<T>,
    pub label: String,
}

impl<T> TimeSeries<T> {
    pub fn new(label: impl Into<String>) -> Self {
        TimeSeries { times: Vec::new(), values: Vec::new(), label: label.into() }
    }

    /// Append a sample; times must increase strictly.
    pub fn push(&mut self, t: f64, value: T) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::Argument(format!("time {t} does not follow {last}")));
            }
        }
        self.times.push(t);
        self.values.push(value);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Apply `f` to every sample.
    pub fn map<U>(&self, label: impl Into<String>, f: impl Fn(&T) -> U) -> TimeSeries<U> {
        TimeSeries { times: self.times.clone(), values: self.values.iter().map(f).collect(), label: label.into() }
    }
}

/// Time derivative of the mean-field state.
pub fn rhs(state: &MeanFieldState, params: &SystemParams, classes: &SpinClasses) -> Result<MeanFieldState> {
    state.check_dims(classes)?;
    let m = classes.len();
    let mut y = Vec::with_capacity(2 + 3 * m);
    state.pack(&mut y);
    let mut dy = vec![0.0; y.len()];
    packed_rhs(&y, &mut dy, params, classes);
    Ok(MeanFieldState::unpack(&dy, m))
}

fn packed_rhs(y: &[f64], dy: &mut [f64], params: &SystemParams, classes: &SpinClasses) {
    let m = classes.len();
    let i = C64::i();
    let a = C64::new(y[0], y[1]);
    let (sm_part, sz_part) = y[2..].split_at(2 * m);
    let (dsm_part, dsz_part) = dy[2..].split_at_mut(2 * m);
    let spin_decay = params.gamma_h + 2.0 * params.gamma_p;

    let mut drive = C64::new(0.0, 0.0);
    for (j, class) in classes.classes.iter().enumerate() {
        let sm = C64::new(sm_part[2 * j], sm_part[2 * j + 1]);
        let sz = sz_part[j];
        let g = class.coupling;
        drive += class.multiplicity as f64 * g * sm;

        let dsm = -(spin_decay + i * class.detuning) * sm + i * g * sz * a;
        dsm_part[2 * j] = dsm.re;
        dsm_part[2 * j + 1] = dsm.im;
        // 2ig(σ⁻a* − σ⁺a) = 2ig(z − z*) with z = σ⁻a*, i.e. −4g Im(z).
        let z = sm * a.conj();
        dsz_part[j] = -2.0 * params.gamma_h * (1.0 + sz) - 4.0 * g * z.im;
    }
    let da = -(params.kappa + i * params.delta_c) * a - i * drive + i * params.eta * a.conj();
    dy[0] = da.re;
    dy[1] = da.im;
}

/// Integrate the mean-field equations to `t_end`, sampling every `dt_out`.
///
/// Snapshots are at `k·dt_out` for `k = 0, 1, …` up to `t_end` (inclusive
/// when `t_end` is a multiple). Every snapshot is checked against the Bloch
/// bound with tolerance [`BLOCH_TOLERANCE`].
pub fn integrate(
    initial: &MeanFieldState,
    params: &SystemParams,
    classes: &SpinClasses,
    t_end: f64,
    dt_out: f64,
) -> Result<TimeSeries<MeanFieldState>> {
    integrate_with(initial, params, classes, t_end, dt_out, Tolerances::default())
}

/// [`integrate`] with explicit tolerances.
pub fn integrate_with(
    initial: &MeanFieldState,
    params: &SystemParams,
    classes: &SpinClasses,
    t_end: f64,
    dt_out: f64,
    tol: Tolerances,
) -> Result<TimeSeries<MeanFieldState>> {
    initial.check_dims(classes)?;
    if !(t_end > 0.0) || !(dt_out > 0.0) {
        return Err(Error::Argument(format!("need t_end > 0 and dt_out > 0, got {t_end}, {dt_out}")));
    }
    let outputs = output_grid(t_end, dt_out);
    let m = classes.len();
    let mut y0 = Vec::with_capacity(2 + 3 * m);
    initial.pack(&mut y0);

    let mut series = TimeSeries::new("mean_field");
    ode::integrate(
        |_, y, dy| {
            packed_rhs(y, dy, params, classes);
            Ok(())
        },
        0.0,
        &y0,
        t_end,
        &outputs,
        tol,
        |t, y| {
            let state = MeanFieldState::unpack(y, m);
            let excess = state.bloch_excess();
            if excess > BLOCH_TOLERANCE || !excess.is_finite() {
                return Err(Error::Integration {
                    t,
                    reason: format!("Bloch bound violated by {excess:e}"),
                });
            }
            series.push(t, state)
        },
    )?;
    Ok(series)
}

/// Sample times `k·dt_out` in `[0, t_end]`.
pub fn output_grid(t_end: f64, dt_out: f64) -> Vec<f64> {
    let n = (t_end / dt_out * (1.0 + 1e-12)).floor() as usize;
    (0..=n).map(|k| k as f64 * dt_out).collect()
}

/// Squeezed-frame photon number cosh(2r)|a|² − sinh(2r) Re(a²).
///
/// Evaluated as (Re a · e⁻ʳ)² + (Im a · eʳ)², which is the same quantity
/// without the cancellation between the two large terms; dividing by eʳ
/// makes n(eʳ, r) = 1 exactly.
pub fn photon_number_squeezed(a: C64, r: f64) -> f64 {
    let e = r.exp();
    (a.re / e).powi(2) + (a.im * e).powi(2)
}

/// Squeezed-frame amplitude b = a cosh r − a* sinh r, with |b|² the
/// squeezed-frame photon number.
pub fn squeezed_amplitude(a: C64, r: f64) -> C64 {
    a * r.cosh() - a.conj() * r.sinh()
}

/// One photon in the squeezed frame (a = eʳ, real), all spins down.
pub fn initial_state_unit_photon(classes: &SpinClasses, r: f64) -> MeanFieldState {
    let mut state = MeanFieldState::ground(classes.len());
    state.a = C64::new(r.exp(), 0.0);
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{discretize_gaussian, SpinClass, WidthKind};
    use proptest::prelude::*;

    fn lossless(delta_c: f64, omega: f64, n: u64) -> SystemParams {
        SystemParams {
            delta_c,
            omega_coll: omega,
            eta: 0.0,
            kappa: 0.0,
            gamma_h: 0.0,
            gamma_p: 0.0,
            delta_width: 0.0,
            width_kind: WidthKind::StdDev,
            n_spins: n,
            mean_spin_detuning: delta_c,
        }
    }

    fn single_class(detuning: f64, g: f64, n: u64) -> SpinClasses {
        SpinClasses { classes: vec![SpinClass { detuning, coupling: g, multiplicity: n }], total: n }
    }

    #[test]
    fn vacuum_is_fixed_point() {
        let p = lossless(100.0, 40.0, 100);
        let c = discretize_gaussian(&p, 3).unwrap();
        let d = rhs(&MeanFieldState::ground(3), &p, &c).unwrap();
        assert_eq!(d.a, C64::new(0.0, 0.0));
        assert!(d.sm.iter().all(|s| s.norm() == 0.0));
        assert!(d.sz.iter().all(|&z| z == 0.0));
    }

    #[test]
    fn radiative_decay_of_inversion() {
        let mut p = lossless(100.0, 40.0, 100);
        p.gamma_h = 0.3;
        let c = discretize_gaussian(&p, 2).unwrap();
        let mut s = MeanFieldState::ground(2);
        s.sz = vec![0.0, 0.0];
        let d = rhs(&s, &p, &c).unwrap();
        assert!(d.sz.iter().all(|&z| (z + 0.6).abs() < 1e-15));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = lossless(100.0, 40.0, 100);
        let c = discretize_gaussian(&p, 3).unwrap();
        assert!(matches!(rhs(&MeanFieldState::ground(2), &p, &c), Err(Error::Argument(_))));
        assert!(integrate(&MeanFieldState::ground(2), &p, &c, 1.0, 0.1).is_err());
        assert!(integrate(&MeanFieldState::ground(3), &p, &c, 0.0, 0.1).is_err());
        assert!(integrate(&MeanFieldState::ground(3), &p, &c, 1.0, -0.1).is_err());
    }

    /// Closed form of the resonant linearized system with σ^z frozen at −1:
    /// a(t) = e^{−iΔt} cos(Ωt) a(0).
    fn rabi_oracle(delta: f64, omega: f64, t: f64) -> C64 {
        C64::from_polar(1.0, -delta * t) * (omega * t).cos()
    }

    #[test]
    fn linearized_rabi_matches_closed_form() {
        // Low excitation: a(0) = 1 shared among N = 1e6 spins.
        let n = 1_000_000;
        let omega = 40.0;
        let delta = 250.0;
        let p = lossless(delta, omega, n);
        let c = single_class(delta, omega / (n as f64).sqrt(), n);
        let mut s0 = MeanFieldState::ground(1);
        s0.a = C64::new(1.0, 0.0);
        let series = integrate(&s0, &p, &c, 1.0, 1e-3).unwrap();
        let worst = series
            .times
            .iter()
            .zip(&series.values)
            .map(|(&t, s)| (s.a - rabi_oracle(delta, omega, t)).norm())
            .fold(0.0, f64::max);
        // Nonlinear correction is O(|a|²/N) = 1e-6 relative.
        assert!(worst < 1e-5, "max deviation {worst}");
    }

    #[test]
    fn free_cavity_decay() {
        let mut p = lossless(300.0, 0.0, 1);
        p.kappa = 2.0;
        let c = single_class(0.0, 0.0, 1);
        let mut s0 = MeanFieldState::ground(1);
        s0.a = C64::new(0.5, 0.2);
        let series = integrate(&s0, &p, &c, 1.0, 0.01).unwrap();
        for (&t, s) in series.times.iter().zip(&series.values) {
            let exact = s0.a * C64::new(-2.0 * t, -300.0 * t).exp();
            assert!((s.a - exact).norm() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn excitation_number_conserved_without_loss() {
        let mut p = lossless(500.0, 40.0, 10_000);
        p.delta_width = 30.0;
        let c = discretize_gaussian(&p, 20).unwrap();
        let s0 = initial_state_unit_photon(&c, 0.0);
        let e0 = s0.excitations(&c);
        let series = integrate(&s0, &p, &c, 0.5, 0.01).unwrap();
        for s in &series.values {
            assert!((s.excitations(&c) - e0).abs() < 1e-6);
        }
    }

    #[test]
    fn photon_number_examples() {
        let a = C64::new(0.3, -1.1);
        assert_eq!(photon_number_squeezed(a, 0.0), a.norm_sqr());
        for r in [0.0, 0.5, 1.0, 2.0, 2.4] {
            let n1 = photon_number_squeezed(C64::new(f64::exp(r), 0.0), r);
            let n2 = photon_number_squeezed(C64::new(0.0, f64::exp(-r)), r);
            assert_eq!(n1, 1.0, "r={r}");
            assert!((n2 - 1.0).abs() < 1e-12, "r={r}: {n2}");
        }
        // agrees with the hyperbolic form away from the cancellation
        for (a, r) in [(C64::new(0.7, 0.2), 0.3f64), (C64::new(-1.2, 0.9), 1.1)] {
            let direct = (2.0 * r).cosh() * a.norm_sqr() - (2.0 * r).sinh() * (a * a).re;
            assert!((photon_number_squeezed(a, r) - direct).abs() < 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn unit_photon_initial_state() {
        let p = lossless(100.0, 40.0, 10);
        let c = discretize_gaussian(&p, 5).unwrap();
        let s = initial_state_unit_photon(&c, 0.0);
        assert_eq!(s.a, C64::new(1.0, 0.0));
        let s = initial_state_unit_photon(&c, 2.0);
        assert!((s.a.re - 7.38905609893065).abs() < 1e-12);
        assert!(s.sz.iter().all(|&z| z == -1.0));
        assert!(s.sm.iter().all(|z| z.norm() == 0.0));
        assert!((photon_number_squeezed(s.a, 2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn squeezed_amplitude_matches_photon_number() {
        let a = C64::new(0.7, 0.4);
        for r in [0.0, 0.8, 2.0] {
            let b = squeezed_amplitude(a, r);
            assert!((b.norm_sqr() - photon_number_squeezed(a, r)).abs() < 1e-12);
        }
    }

    #[test]
    fn rabi_period_is_pi_over_omega() {
        let n = 100_000;
        let omega = 40.0;
        let p = lossless(1000.0, omega, n);
        let c = single_class(1000.0, omega / (n as f64).sqrt(), n);
        let s0 = initial_state_unit_photon(&c, 0.0);
        let period = std::f64::consts::PI / omega;
        let dt = period / 200.0;
        let series = integrate(&s0, &p, &c, 5.0 * period, dt).unwrap();
        for k in 1..=5 {
            let idx = 200 * k;
            let n_t = photon_number_squeezed(series.values[idx].a, 0.0);
            assert!((n_t - 1.0).abs() < 0.01, "period {k}: n = {n_t}");
        }
    }

    #[test]
    fn output_grid_independent_of_sampling() {
        let mut p = SystemParams::resonant(5_000.0, 40.0, 0.7, 60.0, 10_000).unwrap();
        p.gamma_h = 0.1;
        let c = discretize_gaussian(&p, 15).unwrap();
        let s0 = initial_state_unit_photon(&c, 0.7);
        let coarse = integrate(&s0, &p, &c, 0.2, 0.004).unwrap();
        let fine = integrate(&s0, &p, &c, 0.2, 0.002).unwrap();
        for (i, s) in coarse.values.iter().enumerate() {
            let f = &fine.values[2 * i];
            assert!((s.a - f.a).norm() <= 1e-9);
            for (x, y) in s.sz.iter().zip(&f.sz) {
                assert!((x - y).abs() <= 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn rhs_is_conjugation_equivariant(
            are in -2.0f64..2.0, aim in -2.0f64..2.0,
            s1 in -0.5f64..0.5, s2 in -0.5f64..0.5, z in -1.0f64..1.0,
            dc in -200.0f64..200.0, eta_frac in -0.9f64..0.9, det in -100.0f64..100.0,
            kappa in 0.0f64..5.0, gh in 0.0f64..2.0,
        ) {
            let mut p = lossless(dc.abs() + 1.0, 40.0, 50);
            p.eta = eta_frac * p.delta_c;
            p.kappa = kappa;
            p.gamma_h = gh;
            let c = single_class(det, 0.8, 50);
            let s = MeanFieldState { a: C64::new(are, aim), sm: vec![C64::new(s1, s2)], sz: vec![z] };
            let d = rhs(&s, &p, &c).unwrap();

            let mut pc = p;
            pc.delta_c = -p.delta_c;
            pc.eta = -p.eta;
            let cc = single_class(-det, 0.8, 50);
            // Conjugation maps σ⁻ to −σ⁻* (the coupling term is odd under it).
            let sc = MeanFieldState { a: s.a.conj(), sm: vec![-s.sm[0].conj()], sz: s.sz.clone() };
            let dc_ = rhs(&sc, &pc, &cc).unwrap();
            prop_assert!((dc_.a - d.a.conj()).norm() < 1e-12 * (1.0 + d.a.norm()));
            prop_assert!((dc_.sm[0] + d.sm[0].conj()).norm() < 1e-12 * (1.0 + d.sm[0].norm()));
            prop_assert!((dc_.sz[0] - d.sz[0]).abs() < 1e-12 * (1.0 + d.sz[0].abs()));
        }
    }
}

//! End-to-end runs that chain the building blocks: the mean-field decay of a
//! single squeezed-frame photon and the Lindblad fidelity of an encoded
//! cavity state.

use nalgebra::DMatrix;

use crate::model::{effective_detuning, ClassSampling, SpinClasses, SystemParams};
use crate::observables::{
    above_floor, co_rotate, fidelity, fit_decay_rate, peak_envelope_with, period_average, reduce_to_cavity, DecayFit,
    DEFAULT_PROMINENCE, OMEGA0,
};
use crate::ode::Tolerances;
use crate::operators::{build_liouvillian, DensitySuperket, Frame, HilbertSpec};
use crate::propagate::{evolve_with, PropagatorConfig};
use crate::semiclassical::{
    initial_state_unit_photon, integrate_with, photon_number_squeezed, TimeSeries,
};
use crate::{Error, Result, C64};

/// Inputs of a mean-field decay run.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiclassicalSetup {
    pub params: SystemParams,
    pub n_classes: usize,
    pub sampling: ClassSampling,
    pub r: f64,
    pub t_end: f64,
    pub dt_out: f64,
    pub tolerances: Tolerances,
    pub prominence: f64,
    /// Peaks (or samples) below `fit_floor · max` end the fitted window.
    pub fit_floor: f64,
    /// Average out the counter-rotating beat before fitting (see
    /// [`run_semiclassical`]).
    pub ripple_filter: bool,
}

/// Default relative floor that ends the fitted window.
pub const DEFAULT_FIT_FLOOR: f64 = 1e-3;

impl SemiclassicalSetup {
    /// Resonant setup: drive chosen for `r`, spins centred on Δ̃c, no losses.
    pub fn resonant(delta_c: f64, omega: f64, delta_width: f64, n_spins: u64, n_classes: usize, r: f64) -> Result<Self> {
        Ok(SemiclassicalSetup {
            params: SystemParams::resonant(delta_c, omega, r, delta_width, n_spins)?,
            n_classes,
            sampling: ClassSampling::Quantile,
            r,
            t_end: 0.5,
            dt_out: 5e-4,
            tolerances: Tolerances::default(),
            prominence: DEFAULT_PROMINENCE,
            fit_floor: DEFAULT_FIT_FLOOR,
            ripple_filter: true,
        })
    }
}

/// One sample of a mean-field run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonSample {
    /// Squeezed-frame photon number.
    pub n: f64,
    pub a: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemiclassicalRun {
    pub r: f64,
    pub delta_width: f64,
    pub samples: TimeSeries<PhotonSample>,
    /// The photon number the fit was made on (beat-averaged when filtered).
    pub fitted_series: TimeSeries<f64>,
    pub fit: DecayFit,
    /// True when too few peaks were found and the raw series was fitted.
    pub fitted_raw: bool,
}

impl SemiclassicalRun {
    pub fn photon_number(&self) -> TimeSeries<f64> {
        self.samples.map("n", |s| s.n)
    }
}

/// Sampling step and averaging window (in intervals) that resolve the beat
/// at twice the squeezed cavity frequency, or `None` when no beat needs
/// removing (r = 0) or it is faster than the requested sampling.
pub fn ripple_grid(delta_c_eff: f64, r: f64, dt_out: f64) -> Option<(f64, usize)> {
    if r == 0.0 || delta_c_eff == 0.0 {
        return None;
    }
    let period = std::f64::consts::PI / delta_c_eff.abs();
    if period < dt_out {
        return None;
    }
    let k = ((period / dt_out).ceil() as usize).max(4);
    let k = k + k % 2;
    Some((period / k as f64, k))
}

/// Integrate from one squeezed-frame photon with all spins down and fit the
/// decay of the Rabi-peak envelope.
///
/// For r > 0 the counter-rotating coupling superimposes a beat at 2Δ̃c on
/// n(t) whose small maxima would pollute the peak list. When that beat is
/// slower than `dt_out`, sampling is refined to divide its period evenly and
/// the fit is made on the one-period running average, which removes the beat
/// and scales the slow Rabi envelope uniformly (leaving ζ unchanged).
pub fn run_semiclassical(setup: &SemiclassicalSetup) -> Result<SemiclassicalRun> {
    setup.params.validate()?;
    let classes = setup.sampling.classes(&setup.params, setup.n_classes)?;
    let initial = initial_state_unit_photon(&classes, setup.r);
    let r = setup.r;
    let ripple = if setup.ripple_filter {
        ripple_grid(effective_detuning(setup.params.delta_c, r), r, setup.dt_out)
    } else {
        None
    };
    let dt = ripple.map_or(setup.dt_out, |(h, _)| h);
    let states = integrate_with(&initial, &setup.params, &classes, setup.t_end, dt, setup.tolerances)?;
    let samples = states.map("photon", |s| PhotonSample { n: photon_number_squeezed(s.a, r), a: s.a });
    let n = samples.map("n", |s| s.n);
    let fitted_series = match ripple {
        Some((_, k)) => period_average(&n, k)?,
        None => n,
    };
    let (fit, fitted_raw) = fit_envelope(&fitted_series, setup.prominence, setup.fit_floor)?;
    Ok(SemiclassicalRun { r, delta_width: setup.params.delta_width, samples, fitted_series, fit, fitted_raw })
}

/// Fit the peak envelope up to the first peak below `floor · max`, falling
/// back to the raw samples (same window rule) when fewer than two peaks
/// remain — an overdamped signal has no Rabi peaks to speak of.
pub fn fit_envelope(series: &TimeSeries<f64>, prominence: f64, floor: f64) -> Result<(DecayFit, bool)> {
    let peaks = above_floor(&peak_envelope_with(series, prominence), floor);
    if peaks.iter().filter(|p| p.1 > 0.0).count() >= 2 {
        return Ok((fit_decay_rate(&peaks, OMEGA0)?, false));
    }
    let raw: Vec<(f64, f64)> = series.times.iter().cloned().zip(series.values.iter().cloned()).collect();
    Ok((fit_decay_rate(&above_floor(&raw, floor), OMEGA0)?, true))
}

/// Inputs of a Lindblad fidelity run.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumSetup {
    pub params: SystemParams,
    pub fock_cutoff: usize,
    pub sampling: ClassSampling,
    pub frame: Frame,
    pub r: f64,
    /// Encoded cavity state (normalized; shorter than the cutoff is fine).
    pub psi0: Vec<C64>,
    pub t_end: f64,
    pub dt_out: f64,
    pub propagator: PropagatorConfig,
    pub prominence: f64,
    pub fit_floor: f64,
    /// Keep the reduced cavity state at every snapshot.
    pub keep_states: bool,
}

impl QuantumSetup {
    /// Simulated spins (one per class, so the multiplicity is one).
    pub fn n_spins(&self) -> usize {
        self.params.n_spins as usize
    }

    pub fn classes(&self) -> Result<SpinClasses> {
        self.sampling.classes(&self.params, self.n_spins())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumRun {
    pub r: f64,
    pub fidelity: TimeSeries<f64>,
    pub fit: Option<DecayFit>,
    /// Reduced cavity states in the frame co-rotating with the cavity.
    pub cavity_states: Vec<(f64, DMatrix<C64>)>,
    pub final_cavity: DMatrix<C64>,
    pub max_trace_error: f64,
    pub max_hermiticity_defect: f64,
}

impl QuantumRun {
    /// Largest fidelity within the final `fraction` of the run.
    pub fn late_envelope(&self, fraction: f64) -> f64 {
        let t_end = self.fidelity.times.last().copied().unwrap_or(0.0);
        let start = t_end * (1.0 - fraction);
        self.fidelity
            .times
            .iter()
            .zip(&self.fidelity.values)
            .filter(|(t, _)| **t >= start - 1e-12)
            .map(|(_, f)| *f)
            .fold(0.0, f64::max)
    }
}

/// Evolve `ψ₀ ⊗ |↓…↓⟩` and record the fidelity of the reduced cavity state.
///
/// The state is compared in the frame co-rotating with the free cavity
/// (frequency Δ̃c in the squeezed frame, Δc in the lab frame). When the
/// Hamiltonian conserves excitations the rotation is folded into the
/// generator, which removes the fast phase from the dynamics altogether;
/// otherwise the reduced state is rotated back after the fact.
pub fn run_quantum(setup: &QuantumSetup) -> Result<QuantumRun> {
    setup.params.validate()?;
    let spec = HilbertSpec::new(setup.fock_cutoff, setup.n_spins())?;
    let classes = setup.classes()?;
    let omega = match setup.frame {
        Frame::Squeezed => effective_detuning(setup.params.delta_c, setup.r),
        Frame::Lab => setup.params.delta_c,
    };
    let l = build_liouvillian(&spec, &setup.params, &classes, setup.frame, setup.r)?;
    let (l, residual_rotation) = match l.co_rotating(omega) {
        Ok(rot) => (rot, 0.0),
        Err(Error::Argument(_)) => (l, omega),
        Err(e) => return Err(e),
    };
    let rho0 = DensitySuperket::spins_down_with_cavity(&setup.psi0, spec)?;
    let mut series = TimeSeries::new("fidelity");
    let mut cavity_states = Vec::new();
    let mut final_cavity = DMatrix::zeros(spec.fock_cutoff, spec.fock_cutoff);
    let (mut trace_err, mut herm): (f64, f64) = (0.0, 0.0);
    evolve_with(&l, &rho0, setup.t_end, setup.dt_out, setup.propagator, |t, rho| {
        trace_err = trace_err.max((rho.trace() - C64::new(1.0, 0.0)).norm());
        herm = herm.max(rho.hermiticity_defect());
        let rc = co_rotate(&reduce_to_cavity(rho), residual_rotation, t);
        series.push(t, fidelity(&rc, &setup.psi0)?)?;
        if setup.keep_states {
            cavity_states.push((t, rc.clone()));
        }
        final_cavity = rc;
        Ok(())
    })?;
    let fit = fit_envelope(&series, setup.prominence, setup.fit_floor).ok().map(|(f, _)| f);
    Ok(QuantumRun {
        r: setup.r,
        fidelity: series,
        fit,
        cavity_states,
        final_cavity,
        max_trace_error: trace_err,
        max_hermiticity_defect: herm,
    })
}

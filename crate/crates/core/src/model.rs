//! Physical parameters, squeezed-frame formulas and discretization of the
//! inhomogeneous spin distribution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::{Error, Result};

/// How a distribution width is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WidthKind {
    /// Full width at half maximum, the usual meaning of a line "width".
    #[default]
    Fwhm,
    /// Standard deviation.
    StdDev,
}

impl WidthKind {
    /// FWHM of a Gaussian divided by its standard deviation, 2√(2 ln 2).
    pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

    pub fn name(&self) -> &'static str {
        match self {
            WidthKind::Fwhm => "fwhm",
            WidthKind::StdDev => "std",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "fwhm" => Some(WidthKind::Fwhm),
            "std" => Some(WidthKind::StdDev),
            _ => None,
        }
    }

    /// Standard deviation of a Gaussian whose width is `width`.
    pub fn to_std(&self, width: f64) -> f64 {
        match self {
            WidthKind::Fwhm => width / Self::FWHM_PER_SIGMA,
            WidthKind::StdDev => width,
        }
    }
}

/// All rates and detunings defining one simulation instance.
///
/// Everything is an angular frequency in MHz. Absolute frequencies are never
/// stored: the dynamics in the frame rotating at half the drive frequency
/// only depends on detunings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Cavity detuning Δc.
    pub delta_c: f64,
    /// Collective coupling Ω = √(Σ g²).
    pub omega_coll: f64,
    /// Parametric drive strength η.
    pub eta: f64,
    /// Cavity loss κ.
    pub kappa: f64,
    /// Spin radiative decay γ_h.
    pub gamma_h: f64,
    /// Spin dephasing γ_p.
    pub gamma_p: f64,
    /// Width δ of the Gaussian spin detuning distribution; see `width_kind`.
    pub delta_width: f64,
    /// Whether `delta_width` is a full width at half maximum or a standard
    /// deviation.
    pub width_kind: WidthKind,
    /// Physical spin count N.
    pub n_spins: u64,
    /// Centre of the spin detuning distribution.
    pub mean_spin_detuning: f64,
}

impl SystemParams {
    /// Parameters at squeezing `r` with the spin distribution centred on the
    /// squeezed-frame cavity frequency (Δ̃c = Δk resonance). The width is
    /// read as a FWHM; use [`SystemParams::with_width_kind`] to change that.
    pub fn resonant(
        delta_c: f64,
        omega_coll: f64,
        r: f64,
        delta_width: f64,
        n_spins: u64,
    ) -> Result<Self> {
        let params = SystemParams {
            delta_c,
            omega_coll,
            eta: drive_for_r(r, delta_c),
            kappa: 0.0,
            gamma_h: 0.0,
            gamma_p: 0.0,
            delta_width,
            width_kind: WidthKind::default(),
            n_spins,
            mean_spin_detuning: effective_detuning(delta_c, r),
        };
        params.validate()?;
        Ok(params)
    }

    /// Same parameters with the given loss rates.
    pub fn with_losses(mut self, kappa: f64, gamma_h: f64, gamma_p: f64) -> Self {
        self.kappa = kappa;
        self.gamma_h = gamma_h;
        self.gamma_p = gamma_p;
        self
    }

    pub fn with_width_kind(mut self, kind: WidthKind) -> Self {
        self.width_kind = kind;
        self
    }

    /// Standard deviation of the spin detuning distribution.
    pub fn detuning_std(&self) -> f64 {
        self.width_kind.to_std(self.delta_width)
    }

    /// Check the invariants: non-negative rates, at least one spin, and a
    /// drive below the parametric instability threshold.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("kappa", self.kappa),
            ("gamma_h", self.gamma_h),
            ("gamma_p", self.gamma_p),
            ("delta_width", self.delta_width),
        ] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::Argument(format!("{name} must be finite and >= 0, got {value}")));
            }
        }
        for (name, value) in [
            ("delta_c", self.delta_c),
            ("omega_coll", self.omega_coll),
            ("eta", self.eta),
            ("mean_spin_detuning", self.mean_spin_detuning),
        ] {
            if !value.is_finite() {
                return Err(Error::Argument(format!("{name} must be finite, got {value}")));
            }
        }
        if self.n_spins < 1 {
            return Err(Error::Argument("n_spins must be >= 1".into()));
        }
        if self.omega_coll < 0.0 {
            return Err(Error::Argument("omega_coll must be >= 0".into()));
        }
        squeezing_parameter(self.eta, self.delta_c).map(|_| ())
    }

    /// Squeezing parameter implied by η and Δc.
    pub fn squeezing(&self) -> Result<f64> {
        squeezing_parameter(self.eta, self.delta_c)
    }

    /// The squeezed frame implied by η and Δc.
    pub fn squeezed_frame(&self) -> Result<SqueezedFrame> {
        Ok(SqueezedFrame::new(self.delta_c, self.squeezing()?))
    }

    /// Single-spin coupling g = Ω/√N for identical couplings.
    pub fn single_coupling(&self) -> f64 {
        self.omega_coll / (self.n_spins as f64).sqrt()
    }
}

/// Quantities of the Bogoliubov (squeezed) frame at one value of r.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezedFrame {
    pub r: f64,
    /// Δ̃c = Δc / cosh(2r).
    pub delta_c_eff: f64,
    /// eʳ
    pub coupling_scale_plus: f64,
    /// e⁻ʳ
    pub coupling_scale_minus: f64,
}

impl SqueezedFrame {
    pub fn new(delta_c: f64, r: f64) -> Self {
        SqueezedFrame {
            r,
            delta_c_eff: effective_detuning(delta_c, r),
            coupling_scale_plus: r.exp(),
            coupling_scale_minus: (-r).exp(),
        }
    }
}

/// r = ½ atanh(η/Δc).
///
/// Fails when |η| ≥ Δc, where the cavity becomes parametrically unstable.
pub fn squeezing_parameter(eta: f64, delta_c: f64) -> Result<f64> {
    if !(delta_c > 0.0) {
        return Err(Error::Domain(format!("delta_c must be > 0, got {delta_c}")));
    }
    if !(eta.abs() < delta_c) {
        return Err(Error::Domain(format!(
            "drive exceeds parametric instability threshold (|eta| = {} >= delta_c = {delta_c})",
            eta.abs()
        )));
    }
    Ok(0.5 * (eta / delta_c).atanh())
}

/// η = Δc tanh(2r), the drive producing squeezing `r`.
pub fn drive_for_r(r: f64, delta_c: f64) -> f64 {
    delta_c * (2.0 * r).tanh()
}

/// Δ̃c = Δc / cosh(2r), equal to √(Δc² − η²).
pub fn effective_detuning(delta_c: f64, r: f64) -> f64 {
    delta_c / (2.0 * r).cosh()
}

/// g̃ = g eʳ / 2, the dominant coupling in the squeezed frame at large r.
pub fn transformed_coupling(g: f64, r: f64) -> f64 {
    0.5 * g * r.exp()
}

/// How the frequency classes are drawn from the detuning distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassSampling {
    /// Deterministic quantile midpoints ([`discretize_gaussian`]).
    #[default]
    Quantile,
    /// Seeded random draws ([`sample_gaussian`]).
    Random { seed: u64 },
}

impl ClassSampling {
    pub fn classes(&self, params: &SystemParams, n_classes: usize) -> Result<SpinClasses> {
        match *self {
            ClassSampling::Quantile => discretize_gaussian(params, n_classes),
            ClassSampling::Random { seed } => sample_gaussian(params, n_classes, seed),
        }
    }
}

/// One frequency class of the discretized ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinClass {
    /// Detuning Δ_j.
    pub detuning: f64,
    /// Single-spin coupling g_j.
    pub coupling: f64,
    /// Number of physical spins N_j in the class.
    pub multiplicity: u64,
}

/// Inhomogeneous ensemble as weighted frequency classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinClasses {
    pub classes: Vec<SpinClass>,
    pub total: u64,
}

impl SpinClasses {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Σ N_j g_j², which must equal Ω².
    pub fn collective_coupling_sq(&self) -> f64 {
        self.classes
            .iter()
            .map(|c| c.multiplicity as f64 * c.coupling * c.coupling)
            .sum()
    }

    /// Multiplicity-weighted mean detuning.
    pub fn mean_detuning(&self) -> f64 {
        let w: f64 = self.classes.iter().map(|c| c.multiplicity as f64).sum();
        self.classes.iter().map(|c| c.multiplicity as f64 * c.detuning).sum::<f64>() / w
    }

    /// Multiplicity-weighted standard deviation of the detunings.
    pub fn detuning_std(&self) -> f64 {
        let mean = self.mean_detuning();
        let w: f64 = self.classes.iter().map(|c| c.multiplicity as f64).sum();
        let var = self
            .classes
            .iter()
            .map(|c| c.multiplicity as f64 * (c.detuning - mean).powi(2))
            .sum::<f64>()
            / w;
        var.sqrt()
    }
}

fn multiplicities(n_spins: u64, n_classes: usize) -> Vec<u64> {
    let m = n_classes as u64;
    let base = n_spins / m;
    let rem = (n_spins % m) as usize;
    let mut counts = vec![base; n_classes];
    // Remainder goes to the classes closest to the centre.
    let centre = (n_classes as f64 - 1.0) / 2.0;
    let mut order: Vec<usize> = (0..n_classes).collect();
    order.sort_by(|&i, &j| {
        let di = (i as f64 - centre).abs();
        let dj = (j as f64 - centre).abs();
        di.partial_cmp(&dj).unwrap().then(i.cmp(&j))
    });
    for &i in order.iter().take(rem) {
        counts[i] += 1;
    }
    counts
}

fn check_class_count(params: &SystemParams, n_classes: usize) -> Result<()> {
    if n_classes == 0 {
        return Err(Error::Argument("n_classes must be >= 1".into()));
    }
    if n_classes as u64 > params.n_spins {
        return Err(Error::Argument(format!(
            "n_classes ({n_classes}) exceeds n_spins ({})",
            params.n_spins
        )));
    }
    Ok(())
}

fn assemble(params: &SystemParams, detunings: Vec<f64>) -> SpinClasses {
    let g = params.single_coupling();
    let counts = multiplicities(params.n_spins, detunings.len());
    SpinClasses {
        classes: detunings
            .into_iter()
            .zip(counts)
            .map(|(detuning, multiplicity)| SpinClass { detuning, coupling: g, multiplicity })
            .collect(),
        total: params.n_spins,
    }
}

/// Deterministic discretization of the Gaussian detuning distribution.
///
/// Class `j` (1-based) sits at the (j − ½)/M quantile. Every spin has the
/// same coupling Ω/√N, so Σ N_j g_j² = Ω² holds for any M.
pub fn discretize_gaussian(params: &SystemParams, n_classes: usize) -> Result<SpinClasses> {
    check_class_count(params, n_classes)?;
    let mean = params.mean_spin_detuning;
    let detunings = if params.delta_width == 0.0 || n_classes == 1 {
        vec![mean; n_classes]
    } else {
        let unit = StdNormal::new(0.0, 1.0).expect("unit normal");
        (0..n_classes)
            .map(|j| {
                let p = (j as f64 + 0.5) / n_classes as f64;
                mean + params.detuning_std() * unit.inverse_cdf(p)
            })
            .collect()
    };
    Ok(assemble(params, detunings))
}

/// Seeded random sampling of class detunings, sorted ascending.
///
/// Used to check that results do not hinge on the quantile grid.
pub fn sample_gaussian(params: &SystemParams, n_classes: usize, seed: u64) -> Result<SpinClasses> {
    check_class_count(params, n_classes)?;
    let mean = params.mean_spin_detuning;
    let mut detunings: Vec<f64> = if params.delta_width == 0.0 {
        vec![mean; n_classes]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(mean, params.detuning_std())
            .map_err(|e| Error::Argument(format!("bad distribution: {e}")))?;
        (0..n_classes).map(|_| normal.sample(&mut rng)).collect()
    };
    detunings.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(assemble(params, detunings))
}

//! Time stepping of vectorized density matrices: dense exponentials for small
//! Liouvillians, Krylov otherwise, and a symmetric Trotter sweep over the
//! per-spin pieces with optional low-rank truncation across the
//! cavity|spins cut.

use log::warn;
use nalgebra::DMatrix;

use crate::linalg::{expm, expm_multiply, KrylovOptions};
use crate::operators::{compose_index, DensitySuperket, HilbertSpec, Liouvillian, LocalTerm};
use crate::{Error, Result, C64};

/// Largest vectorized dimension (Hilbert dim²) exponentiated densely.
pub const DENSE_GUARD: usize = 1024;
/// Residual tolerance of the Krylov exponential.
pub const KRYLOV_TOL: f64 = 1e-10;
/// Allowed |tr ρ − 1| at snapshots.
pub const TRACE_TOL: f64 = 1e-9;
/// Allowed ‖ρ − ρ†‖_max at snapshots.
pub const HERMITICITY_TOL: f64 = 1e-9;
/// Most negative eigenvalue tolerated in untruncated modes.
pub const POSITIVITY_TOL: f64 = -1e-6;
/// Population in the two highest Fock levels above which a warning is logged.
pub const FOCK_EDGE_WARN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    DenseExpm,
    Trotter2,
    Trotter2Truncated,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::DenseExpm => "dense-expm",
            Method::Trotter2 => "trotter2",
            Method::Trotter2Truncated => "trotter2-truncated",
        }
    }

    pub fn from_name(s: &str) -> Option<Method> {
        match s {
            "dense-expm" => Some(Method::DenseExpm),
            "trotter2" => Some(Method::Trotter2),
            "trotter2-truncated" => Some(Method::Trotter2Truncated),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorConfig {
    pub method: Method,
    /// Internal step in µs (shrunk to divide the output spacing evenly).
    pub dt: f64,
    /// Relative singular-value cutoff for truncated stepping.
    pub svd_cutoff: f64,
    pub max_rank: usize,
}

impl PropagatorConfig {
    pub fn dense(dt: f64) -> Self {
        PropagatorConfig { method: Method::DenseExpm, dt, svd_cutoff: 0.0, max_rank: usize::MAX }
    }

    pub fn trotter2(dt: f64) -> Self {
        PropagatorConfig { method: Method::Trotter2, ..Self::dense(dt) }
    }

    pub fn truncated(dt: f64, svd_cutoff: f64, max_rank: usize) -> Self {
        PropagatorConfig { method: Method::Trotter2Truncated, dt, svd_cutoff, max_rank }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Argument(format!("time step must be positive, got {}", self.dt)));
        }
        if !(0.0..1.0).contains(&self.svd_cutoff) {
            return Err(Error::Argument(format!("svd cutoff must lie in [0, 1), got {}", self.svd_cutoff)));
        }
        if self.max_rank == 0 {
            return Err(Error::Argument("max_rank must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_basis(l: &Liouvillian, rho: &DensitySuperket) -> Result<()> {
    if l.basis != rho.basis {
        return Err(Error::Argument("state and Liouvillian live on different bases".into()));
    }
    Ok(())
}

/// `e^{L dt} ρ`: dense below [`DENSE_GUARD`], Krylov above.
pub fn expm_apply(l: &Liouvillian, rho: &DensitySuperket, dt: f64) -> Result<DensitySuperket> {
    check_basis(l, rho)?;
    if dt == 0.0 {
        return Ok(rho.clone());
    }
    let data = if l.dim() <= DENSE_GUARD {
        let u = expm(&(l.matrix.to_dense() * C64::new(dt, 0.0)));
        (u * nalgebra::DVector::from_column_slice(&rho.data)).as_slice().to_vec()
    } else {
        krylov_apply(l, &rho.data, dt)?
    };
    Ok(DensitySuperket { data, basis: rho.basis })
}

fn krylov_apply(l: &Liouvillian, v: &[C64], dt: f64) -> Result<Vec<C64>> {
    let opts = KrylovOptions { tol: KRYLOV_TOL, ..KrylovOptions::default() };
    expm_multiply(&l.matrix, v, dt, opts)
}

/// One local factor `e^{L_k τ}` and the index map that scatters it over the
/// full superket.
#[derive(Debug, Clone)]
struct LocalFactor {
    block: usize,
    /// `perm[b·block + p]` is the global index of local entry `p` in block `b`.
    perm: Vec<usize>,
    exp: DMatrix<C64>,
}

impl LocalFactor {
    fn new(term: &LocalTerm, spec: &HilbertSpec, tau: f64) -> Self {
        LocalFactor { block: term.local_dim * term.local_dim, perm: local_permutation(term, spec), exp: expm(&(&term.generator * C64::new(tau, 0.0))) }
    }

    fn apply(&self, data: &mut [C64]) {
        let nblocks = data.len() / self.block;
        let x = DMatrix::from_fn(self.block, nblocks, |p, b| data[self.perm[b * self.block + p]]);
        let y = &self.exp * x;
        for b in 0..nblocks {
            for p in 0..self.block {
                data[self.perm[b * self.block + p]] = y[(p, b)];
            }
        }
    }
}

fn local_permutation(term: &LocalTerm, spec: &HilbertSpec) -> Vec<usize> {
    let dim = spec.dim;
    let ld = term.local_dim;
    let rest = dim / ld;
    let lift = |r: usize, local: usize| match term.spin {
        None => local,
        Some(k) => compose_index(spec, k, r, local),
    };
    let mut perm = Vec::with_capacity(dim * dim);
    for ri in 0..rest {
        for rj in 0..rest {
            for p in 0..ld * ld {
                perm.push(lift(ri, p / ld) * dim + lift(rj, p % ld));
            }
        }
    }
    perm
}

/// Symmetric sweep `e^{L_N dt/2}…e^{L_2 dt/2} e^{L_1 dt} e^{L_2 dt/2}…e^{L_N dt/2}`.
///
/// Factors are exponentiated on their own support, so the cost is
/// independent of how stiff each local piece is.
pub fn strang_step(terms: &[LocalTerm], rho: &DensitySuperket, dt: f64) -> Result<DensitySuperket> {
    if terms.is_empty() {
        return Err(Error::Argument("no Liouvillian terms to step".into()));
    }
    let sweep = StrangSweep::new(terms, &rho.basis, dt);
    let mut out = rho.clone();
    sweep.apply(&mut out.data);
    Ok(out)
}

#[derive(Debug, Clone)]
struct StrangSweep {
    full: LocalFactor,
    halves: Vec<LocalFactor>,
}

impl StrangSweep {
    fn new(terms: &[LocalTerm], spec: &HilbertSpec, dt: f64) -> Self {
        StrangSweep {
            full: LocalFactor::new(&terms[0], spec, dt),
            halves: terms[1..].iter().map(|t| LocalFactor::new(t, spec, 0.5 * dt)).collect(),
        }
    }

    fn apply(&self, data: &mut [C64]) {
        for f in self.halves.iter().rev() {
            f.apply(data);
        }
        self.full.apply(data);
        for f in &self.halves {
            f.apply(data);
        }
    }
}

/// Low-rank approximation across the cavity|spins cut.
///
/// The superket is viewed as a matrix with rows `(n, n')` (cavity and its
/// dual) and columns `(s, s')` (spins and their duals). Singular values below
/// `cutoff·σ_max` or beyond `max_rank` are dropped; the result is
/// re-Hermitized and scaled back to unit trace.
pub fn truncate(rho: &DensitySuperket, cutoff: f64, max_rank: usize) -> DensitySuperket {
    let spec = rho.basis;
    let (f, s) = (spec.fock_cutoff, spec.spin_dim());
    let d = spec.dim;
    let idx = |n: usize, np: usize, a: usize, ap: usize| spec.index(a, n) * d + spec.index(ap, np);
    let m = DMatrix::from_fn(f * f, s * s, |row, col| rho.data[idx(row / f, row % f, col / s, col % s)]);
    let svd = m.svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut kept = svd.singular_values.clone();
    for (rank, &i) in order.iter().enumerate() {
        if rank >= max_rank || kept[i] < cutoff * sigma_max {
            kept[i] = 0.0;
        }
    }
    if kept == svd.singular_values {
        return rho.clone();
    }
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let sigma = DMatrix::from_diagonal(&kept.map(|x| C64::new(x, 0.0)));
    let approx = u * sigma * v_t;
    let mut data = vec![C64::new(0.0, 0.0); d * d];
    for row in 0..f * f {
        for col in 0..s * s {
            data[idx(row / f, row % f, col / s, col % s)] = approx[(row, col)];
        }
    }
    let mut out = DensitySuperket { data, basis: spec };
    let herm = out.to_density();
    let herm = (&herm + herm.adjoint()) * C64::new(0.5, 0.0);
    let tr = herm.trace();
    out = DensitySuperket::from_density(&(herm / tr), spec).expect("same basis");
    out
}

/// Reusable stepper: caches the exponentials for a fixed step.
#[derive(Debug, Clone)]
pub struct Propagator {
    config: PropagatorConfig,
    kind: StepKind,
}

#[derive(Debug, Clone)]
enum StepKind {
    Dense(DMatrix<C64>),
    Krylov(Liouvillian),
    Strang(StrangSweep),
}

impl Propagator {
    /// Prepare a stepper of size `dt` (which may differ from `config.dt`).
    pub fn new(l: &Liouvillian, config: PropagatorConfig, dt: f64) -> Result<Self> {
        config.validate()?;
        let kind = match config.method {
            Method::DenseExpm if l.dim() <= DENSE_GUARD => {
                StepKind::Dense(expm(&(l.matrix.to_dense() * C64::new(dt, 0.0))))
            }
            Method::DenseExpm => StepKind::Krylov(l.clone()),
            Method::Trotter2 | Method::Trotter2Truncated => {
                if l.terms.is_empty() {
                    return Err(Error::Argument("Liouvillian has no local terms".into()));
                }
                StepKind::Strang(StrangSweep::new(&l.terms, &l.basis, dt))
            }
        };
        Ok(Propagator { config, kind })
    }

    fn step(&self, data: &mut Vec<C64>, dt: f64) -> Result<()> {
        match &self.kind {
            StepKind::Dense(u) => {
                let v = u * nalgebra::DVector::from_column_slice(data);
                data.copy_from_slice(v.as_slice());
            }
            StepKind::Krylov(l) => *data = krylov_apply(l, data, dt)?,
            StepKind::Strang(s) => s.apply(data),
        }
        Ok(())
    }
}

/// Number of internal steps per output interval and the resulting step.
pub fn substeps(dt: f64, dt_out: f64) -> (usize, f64) {
    let k = ((dt_out / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (k, dt_out / k as f64)
}

/// Output times `0, dt_out, …` up to `t_end` (inclusive within round-off).
pub fn snapshot_times(t_end: f64, dt_out: f64) -> Result<Vec<f64>> {
    if !(dt_out > 0.0) || !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::Argument(format!("need t_end ≥ 0 and dt_out > 0, got {t_end}, {dt_out}")));
    }
    let n = (t_end / dt_out + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| i as f64 * dt_out).collect())
}

/// Checks one snapshot and returns the population of the top two Fock levels.
fn check_snapshot(rho: &DensitySuperket, t: f64, positivity: bool) -> Result<f64> {
    let tr = rho.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
        return Err(Error::Propagation { t, reason: format!("trace drifted to {tr}") });
    }
    let herm = rho.hermiticity_defect();
    if herm > HERMITICITY_TOL {
        return Err(Error::Propagation { t, reason: format!("Hermiticity defect {herm:e}") });
    }
    if positivity {
        let lam = rho.min_eigenvalue();
        if lam < POSITIVITY_TOL {
            return Err(Error::Propagation { t, reason: format!("positivity violated, min eigenvalue {lam:e}") });
        }
    }
    let f = rho.basis.fock_cutoff;
    Ok(rho.photon_population(f - 1) + rho.photon_population(f - 2))
}

/// Evolve `rho0` and hand every snapshot to `observe` (including t = 0).
///
/// The internal step divides `dt_out` evenly; truncation, when enabled, is
/// applied after each sweep. Each snapshot is checked for unit trace,
/// Hermiticity and (in untruncated modes) positivity.
pub fn evolve_with<F>(
    l: &Liouvillian,
    rho0: &DensitySuperket,
    t_end: f64,
    dt_out: f64,
    config: PropagatorConfig,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(f64, &DensitySuperket) -> Result<()>,
{
    check_basis(l, rho0)?;
    config.validate()?;
    let times = snapshot_times(t_end, dt_out)?;
    let (k, dt) = substeps(config.dt, dt_out);
    let truncating = config.method == Method::Trotter2Truncated;
    // A Krylov step is accurate for any length, so it covers a whole interval.
    let (k, dt) = if config.method == Method::DenseExpm && l.dim() > DENSE_GUARD { (1, dt_out) } else { (k, dt) };
    let prop = Propagator::new(l, config, dt)?;
    let mut rho = rho0.clone();
    let mut edge = (check_snapshot(&rho, 0.0, !truncating)?, 0.0);
    observe(0.0, &rho)?;
    for (i, &t) in times.iter().enumerate().skip(1) {
        for j in 0..k {
            prop.step(&mut rho.data, dt).map_err(|e| match e {
                Error::KrylovConvergence { residual } => Error::Propagation {
                    t: times[i - 1] + j as f64 * dt,
                    reason: format!("Krylov exponential stalled at residual {residual:e}"),
                },
                other => other,
            })?;
            if truncating {
                rho = truncate(&rho, prop.config.svd_cutoff, prop.config.max_rank);
            }
        }
        let e = check_snapshot(&rho, t, !truncating)?;
        if e > edge.0 {
            edge = (e, t);
        }
        observe(t, &rho)?;
    }
    if edge.0 > FOCK_EDGE_WARN {
        warn!("up to {:e} of the population sat in the top two Fock levels (t = {}); raise the cutoff", edge.0, edge.1);
    }
    Ok(())
}

/// Collecting variant of [`evolve_with`].
pub fn evolve(
    l: &Liouvillian,
    rho0: &DensitySuperket,
    t_end: f64,
    dt_out: f64,
    config: PropagatorConfig,
) -> Result<Vec<(f64, DensitySuperket)>> {
    let mut out = Vec::new();
    evolve_with(l, rho0, t_end, dt_out, config, |t, rho| {
        out.push((t, rho.clone()));
        Ok(())
    })?;
    Ok(out)
}

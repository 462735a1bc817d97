//! Run orchestration: one task per (δ, r) point, files written afterwards.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use hybridq::observables::{wigner_square, DEFAULT_PROMINENCE};
use hybridq::pipeline::{
    run_quantum, run_semiclassical, QuantumRun, QuantumSetup, SemiclassicalRun, SemiclassicalSetup, DEFAULT_FIT_FLOOR,
};
use hybridq::semiclassical::TimeSeries;

use crate::config::{ConfigError, Mode, RunConfig, WignerAt};
use crate::output::{file, num, write_config, write_csv, Column, Header};

/// Fraction of the horizon treated as "late" by the fidelity summaries.
pub const LATE_FRACTION: f64 = 0.2;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical error: {0}")]
    Numerical(#[from] hybridq::Error),
    #[error("I/O error at {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
        move |source| RunError::Io { path: path.to_path_buf(), source }
    }

    /// 2: configuration, 3: numerical/propagation, 4: I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(hybridq::Error::Domain(_) | hybridq::Error::Argument(_)) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io { .. } => 4,
        }
    }

    /// Machine-readable error record.
    pub fn record(&self) -> serde_json::Value {
        let kind = match self.exit_code() {
            2 => "config",
            3 => "numerical",
            _ => "io",
        };
        let mut rec = json!({ "error": kind, "exit_code": self.exit_code(), "message": self.to_string() });
        match self {
            RunError::Config(e) => {
                rec["key"] = json!(e.key);
                rec["line"] = json!(e.line);
            }
            RunError::Numerical(
                hybridq::Error::Integration { t, .. } | hybridq::Error::Propagation { t, .. },
            ) => rec["t"] = json!(t),
            RunError::Io { path, .. } => rec["path"] = json!(path.display().to_string()),
            _ => {}
        }
        rec
    }
}

/// A quantum run and the width it was made at.
#[derive(Debug, Clone)]
pub struct QuantumPoint {
    pub delta_width: f64,
    pub run: QuantumRun,
}

/// What a run produced.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub semiclassical: Vec<SemiclassicalRun>,
    pub quantum: Vec<QuantumPoint>,
}

pub fn semiclassical_setup(config: &RunConfig, delta_width: f64, r: f64) -> hybridq::Result<SemiclassicalSetup> {
    Ok(SemiclassicalSetup {
        params: config.point_params(r, delta_width)?,
        n_classes: config.n_classes,
        sampling: config.class_sampling(),
        r,
        t_end: config.t_end,
        dt_out: config.dt_out,
        tolerances: Default::default(),
        prominence: DEFAULT_PROMINENCE,
        fit_floor: DEFAULT_FIT_FLOOR,
        ripple_filter: true,
    })
}

pub fn quantum_setup(config: &RunConfig, delta_width: f64, r: f64) -> hybridq::Result<QuantumSetup> {
    Ok(QuantumSetup {
        params: config.point_params(r, delta_width)?,
        fock_cutoff: config.fock_cutoff,
        sampling: config.class_sampling(),
        frame: config.frame,
        r,
        psi0: config.initial_state.amplitudes(config.fock_cutoff),
        t_end: config.t_end,
        dt_out: config.dt_out,
        propagator: config.propagator,
        prominence: DEFAULT_PROMINENCE,
        fit_floor: DEFAULT_FIT_FLOOR,
        keep_states: config.mode == Mode::Wigner || config.rho_snapshot_every > 0,
    })
}

/// Run every point on a pool of `workers` threads (all logical CPUs when
/// `None`); results come back in point order.
fn par_points<T: Send>(
    points: &[(f64, f64)],
    workers: Option<usize>,
    f: impl Fn(f64, f64) -> hybridq::Result<T> + Sync,
) -> Result<Vec<T>, RunError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| ConfigError {
        key: None,
        line: None,
        message: format!("cannot start worker pool: {e}"),
    })?;
    let results: Vec<hybridq::Result<T>> = pool.install(|| points.par_iter().map(|&(d, r)| f(d, r)).collect());
    results.into_iter().map(|r| r.map_err(RunError::from)).collect()
}

fn suffix(config: &RunConfig, delta_width: f64, r: f64) -> String {
    let mut s = String::new();
    if config.r_values.len() > 1 {
        s.push_str(&format!("_r{r}"));
    }
    if config.delta_values.len() > 1 {
        s.push_str(&format!("_delta{delta_width}"));
    }
    s
}

const N_T_COLUMNS: &[Column] = &[
    ("t", "time [µs]"),
    ("n", "squeezed-frame photon number"),
    ("abs_a_sq", "|⟨a⟩|²"),
    ("re_a", "Re ⟨a⟩"),
    ("im_a", "Im ⟨a⟩"),
];

const FIT_COLUMNS: &[Column] = &[
    ("r", "squeezing parameter"),
    ("delta", "spin distribution width [MHz]"),
    ("zeta", "fitted decay rate ζ of n = n0 exp(−ζ ω0 t), ω0 = 10 MHz"),
    ("residual_std", "RMS misfit of the fitted envelope"),
    ("n0", "fitted envelope at t = 0"),
    ("n_points", "points in the fit"),
    ("fit_on", "peaks, or samples when the signal had no Rabi peaks"),
];

fn fit_row(run: &SemiclassicalRun, lead: &[f64]) -> Vec<String> {
    let mut row: Vec<String> = lead.iter().map(|x| num(*x)).collect();
    row.extend([
        num(run.fit.zeta),
        num(run.fit.residual_std),
        num(run.fit.n0),
        run.fit.peaks.len().to_string(),
        if run.fitted_raw { "samples" } else { "peaks" }.to_string(),
    ]);
    row
}

fn series_rows(s: &TimeSeries<f64>) -> Vec<Vec<String>> {
    s.times.iter().zip(&s.values).map(|(t, v)| vec![num(*t), num(*v)]).collect()
}

struct Writer<'a> {
    dir: &'a Path,
    header: Header,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn csv(&mut self, path: PathBuf, extra: &[String], columns: &[Column], rows: &[Vec<String>]) -> Result<(), RunError> {
        write_csv(&path, &self.header, extra, columns, rows).map_err(RunError::io(&path))?;
        self.files.push(path);
        Ok(())
    }
}

/// Execute `config`, writing its files into `config.output_dir`.
pub fn run(config: &RunConfig, workers: Option<usize>) -> Result<RunReport, RunError> {
    let dir = config.output_dir.as_path();
    std::fs::create_dir_all(dir).map_err(RunError::io(dir))?;
    let mut w = Writer { dir, header: Header::new(config), files: Vec::new() };
    let config_path = dir.join("config.toml");
    write_config(&config_path, &w.header, config).map_err(RunError::io(&config_path))?;
    w.files.push(config_path);

    let points = config.points();
    let mut report = RunReport::default();
    match config.mode {
        Mode::Semiclassical | Mode::Sweep => {
            let runs = par_points(&points, workers, |d, r| run_semiclassical(&semiclassical_setup(config, d, r)?))?;
            if config.mode == Mode::Semiclassical {
                write_semiclassical(&mut w, config, &points, &runs)?;
            } else {
                let mut cols = vec![FIT_COLUMNS[1], FIT_COLUMNS[0]];
                cols.extend_from_slice(&FIT_COLUMNS[2..]);
                let rows: Vec<Vec<String>> = points.iter().zip(&runs).map(|(&(d, r), run)| fit_row(run, &[d, r])).collect();
                w.csv(w.dir.join("sweep.csv"), &[], &cols, &rows)?;
            }
            report.semiclassical = runs;
        }
        Mode::Quantum | Mode::Wigner => {
            let runs = par_points(&points, workers, |d, r| run_quantum(&quantum_setup(config, d, r)?))?;
            let runs: Vec<QuantumPoint> =
                points.iter().zip(runs).map(|(&(d, _), run)| QuantumPoint { delta_width: d, run }).collect();
            write_quantum(&mut w, config, &runs)?;
            report.quantum = runs;
        }
    }
    report.files = w.files;
    Ok(report)
}

fn write_semiclassical(
    w: &mut Writer,
    config: &RunConfig,
    points: &[(f64, f64)],
    runs: &[SemiclassicalRun],
) -> Result<(), RunError> {
    let mut fits = Vec::new();
    for (&(d, r), run) in points.iter().zip(runs) {
        let rows: Vec<Vec<String>> = run
            .samples
            .times
            .iter()
            .zip(&run.samples.values)
            .map(|(t, s)| vec![num(*t), num(s.n), num(s.a.norm_sqr()), num(s.a.re), num(s.a.im)])
            .collect();
        let extra = [format!("r = {r}, delta = {d}")];
        w.csv(file(w.dir, "n_t", &suffix(config, d, r)), &extra, N_T_COLUMNS, &rows)?;
        fits.push(fit_row(run, &[r, d]));
    }
    w.csv(w.dir.join("decay_fit.csv"), &[], FIT_COLUMNS, &fits)
}

/// Snapshot index the Wigner function is taken at.
fn wigner_index(run: &QuantumRun, at: WignerAt) -> usize {
    let f = &run.fidelity;
    match at {
        WignerAt::Time(t) => {
            (0..f.len()).min_by(|&a, &b| (f.times[a] - t).abs().total_cmp(&(f.times[b] - t).abs())).unwrap_or(0)
        }
        WignerAt::Peak => {
            let t_end = f.times.last().copied().unwrap_or(0.0);
            let start = t_end * (1.0 - LATE_FRACTION) - 1e-12;
            (0..f.len())
                .filter(|&i| f.times[i] >= start)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if f.values[b] >= f.values[i] => Some(b),
                    _ => Some(i),
                })
                .unwrap_or(0)
        }
    }
}

fn write_quantum(w: &mut Writer, config: &RunConfig, runs: &[QuantumPoint]) -> Result<(), RunError> {
    let mut summary = Vec::new();
    for p in runs {
        let (d, run) = (p.delta_width, &p.run);
        let sfx = suffix(config, d, run.r);
        let extra = [format!("r = {}, delta = {d}", run.r)];
        w.csv(
            file(w.dir, "fidelity", &sfx),
            &extra,
            &[("t", "time [µs]"), ("F", "fidelity √⟨ψ0|ρ_c|ψ0⟩ in the frame co-rotating with the cavity")],
            &series_rows(&run.fidelity),
        )?;
        let (zeta, resid) = run.fit.as_ref().map_or((f64::NAN, f64::NAN), |f| (f.zeta, f.residual_std));
        summary.push(vec![
            num(run.r),
            num(d),
            num(zeta),
            num(resid),
            num(run.late_envelope(LATE_FRACTION)),
            num(run.max_trace_error),
            num(run.max_hermiticity_defect),
        ]);
        if config.rho_snapshot_every > 0 {
            for (k, (t, rho)) in run.cavity_states.iter().enumerate().step_by(config.rho_snapshot_every) {
                let n = rho.nrows();
                let rows: Vec<Vec<String>> = (0..n)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .map(|(i, j)| vec![i.to_string(), j.to_string(), num(rho[(i, j)].re), num(rho[(i, j)].im)])
                    .collect();
                let extra = [format!("r = {}, delta = {d}, t = {}", run.r, num(*t))];
                let cols = [("row", "Fock index"), ("col", "Fock index"), ("re", "Re ρ_c"), ("im", "Im ρ_c")];
                w.csv(file(w.dir, &format!("rho_c{sfx}_{k:05}"), ""), &extra, &cols, &rows)?;
            }
        }
        if config.mode == Mode::Wigner {
            let k = wigner_index(run, config.wigner_at);
            let (t, rho) = &run.cavity_states[k];
            let grid = wigner_square(rho, config.wigner_extent, config.wigner_resolution)?;
            let rows: Vec<Vec<String>> = grid
                .p_axis
                .iter()
                .enumerate()
                .flat_map(|(i, p)| grid.q_axis.iter().enumerate().map(move |(j, q)| (i, j, *p, *q)))
                .map(|(i, j, p, q)| vec![num(p), num(q), num(grid.values[(i, j)])])
                .collect();
            let extra = [format!(
                "r = {}, delta = {d}, t = {}, F = {}, grid normalization = {}",
                run.r,
                num(*t),
                num(run.fidelity.values[k]),
                num(grid.normalization())
            )];
            let cols = [("p", "phase-space coordinate p"), ("q", "conjugate coordinate q"), ("W", "Wigner function")];
            w.csv(file(w.dir, "wigner", &sfx), &extra, &cols, &rows)?;
        }
    }
    let cols: &[Column] = &[
        ("r", "squeezing parameter"),
        ("delta", "spin distribution width [MHz]"),
        ("zeta", "fitted decay rate of the fidelity-peak envelope (ω0 = 10 MHz units)"),
        ("residual_std", "RMS misfit of the envelope fit"),
        ("late_envelope", "largest fidelity in the final 20% of the run"),
        ("max_trace_error", "max |tr ρ − 1| over snapshots"),
        ("max_hermiticity_defect", "max ‖ρ − ρ†‖ over snapshots"),
    ];
    w.csv(w.dir.join("fidelity_fit.csv"), &[], cols, &summary)
}

//! Acceptance suite: one PASS/FAIL line per criterion, all thresholds pinned
//! below. Run with `cargo test -p hybridq-cli --test acceptance -- --nocapture`
//! to see the report.

use std::time::Instant;

use hybridq::model::{
    discretize_gaussian, drive_for_r, squeezing_parameter, SpinClass, SpinClasses, SystemParams, WidthKind,
};
use hybridq::observables::{peak_envelope, upper_envelope, wigner_point, wigner_square};
use hybridq::ode::Tolerances;
use hybridq::operators::{build_h0, build_hsq, build_liouvillian, DensitySuperket, Frame, HilbertSpec};
use hybridq::pipeline::SemiclassicalRun;
use hybridq::propagate::{evolve, PropagatorConfig};
use hybridq::semiclassical::{integrate_with, photon_number_squeezed, MeanFieldState, TimeSeries};
use hybridq::C64;
use hybridq_cli::config::Mode;
use hybridq_cli::run::LATE_FRACTION;
use hybridq_cli::{parse_config, preset, run};
use nalgebra::DMatrix;

// 1. protection monotonicity
const C1_DELTAS: [f64; 3] = [60.0, 70.0, 80.0];
const C1_RS: [f64; 3] = [0.0, 1.0, 2.0];
const C1_RUNTIME_S: f64 = 300.0;
// 2. sustained oscillations (fractions of n(0))
const C2_R0_FLOOR: f64 = 0.10;
const C2_R2_KEEP: f64 = 0.50;
// 3. desk-scale quantum protection
const C3_MARGIN: f64 = 0.05;
const C3_RUNTIME_S: f64 = 600.0;
// 4. Trotter vs dense oracle
const C4_MAX_TRACE_DISTANCE: f64 = 1e-6;
const C4_SLOPE: f64 = 2.0;
const C4_SLOPE_TOL: f64 = 0.2;
const C4_DTS: [f64; 3] = [4e-4, 2e-4, 1e-4];
// 5. analytic oracles
const C5_JC_TOL: f64 = 1e-6;
const C5_RABI_TOL: f64 = 1e-6;
const C5_FRAME_TOL: f64 = 1e-12;
// 6. conservation / normalization
const C6_TRACE_TOL: f64 = 1e-9;
const C6_HERMITICITY_TOL: f64 = 1e-9;
const C6_WIGNER_NORM_TOL: f64 = 1e-3;
const C6_WIGNER_PEAK_TOL: f64 = 1e-6;
// 7. frame identities
const C7_ROUND_TRIP_TOL: f64 = 1e-12;
const C7_BOGOLIUBOV_TOL: f64 = 1e-10;

const DELTA_C: f64 = 70000.0;
const OMEGA: f64 = 40.0;

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn record(&mut self, id: &str, title: &str, pass: bool, detail: String) {
        let line = format!("[{}] {id} {title}: {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push((pass, line));
    }
}

fn value_at(series: &TimeSeries<f64>, t: f64) -> f64 {
    let i = series.times.partition_point(|&x| x < t - 1e-12).min(series.len() - 1);
    series.values[i]
}

/// Criteria 1 and 2: the 3 × 3 mean-field sweep through the config/run path.
fn semiclassical_criteria(report: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let doc = format!(
        "mode = \"sweep\"\ndelta_c = {DELTA_C}\nomega = {OMEGA}\ndelta_values = {C1_DELTAS:?}\nr_values = {C1_RS:?}\n\
         n_spins = 10000\nn_classes = 200\nt_end = 0.3\ndt_out = 0.0005\noutput_dir = {:?}\n",
        dir.path().display().to_string()
    );
    let config = parse_config(&doc).unwrap();
    let start = Instant::now();
    let out = run(&config, None).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let runs: Vec<(f64, &SemiclassicalRun)> =
        config.points().iter().map(|p| p.0).zip(&out.semiclassical).collect();
    let zeta = |d: f64, r: f64| runs.iter().find(|(dd, run)| *dd == d && run.r == r).unwrap().1.fit.zeta;

    let mut ok = elapsed < C1_RUNTIME_S;
    let mut table = Vec::new();
    for d in C1_DELTAS {
        let z: Vec<f64> = C1_RS.iter().map(|&r| zeta(d, r)).collect();
        ok &= z.windows(2).all(|w| w[1] < w[0]);
        table.push(format!("δ={d}: {}", z.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" > ")));
    }
    for r in C1_RS {
        ok &= C1_DELTAS.windows(2).all(|w| zeta(w[1], r) > zeta(w[0], r));
    }
    report.record(
        "C1",
        "protection monotonicity (ζ falls with r, grows with δ)",
        ok,
        format!("{} [{elapsed:.0}s]", table.join("; ")),
    );

    let at = |r: f64| runs.iter().find(|(d, run)| *d == 60.0 && run.r == r).unwrap().1;
    let (r0, r2) = (at(0.0), at(2.0));
    let n0 = r0.photon_number().values[0];
    let (env0, env2) = (upper_envelope(&r0.fitted_series), upper_envelope(&r2.fitted_series));
    let peaks0 = peak_envelope(&r0.fitted_series);
    let mut compared = 0;
    let mut ok = peaks0.len() >= 2;
    for &(t, _) in peaks0.iter().skip(1) {
        compared += 1;
        ok &= value_at(&env2, t) > value_at(&env0, t);
    }
    let horizon = env0.times.iter().zip(&env0.values).find(|(_, v)| **v < C2_R0_FLOOR * n0).map(|(t, _)| *t);
    let kept = horizon.map(|t| value_at(&env2, t) / n0);
    ok &= matches!(kept, Some(k) if k > C2_R2_KEEP);
    report.record(
        "C2",
        "sustained oscillations (r=2 envelope above r=0)",
        ok,
        format!(
            "{compared} peaks compared; r=0 envelope < {C2_R0_FLOOR}·n(0) at t = {} µs, r=2 envelope there = {} (need > {C2_R2_KEEP})",
            horizon.map_or("never".into(), |t| format!("{t:.4}")),
            kept.map_or("n/a".into(), |k| format!("{k:.3}")),
        ),
    );
}

/// Criteria 3 and part of 6: desk-scale Lindblad runs from the preset.
fn quantum_criteria(report: &mut Report, max_trace: &mut f64, max_herm: &mut f64) {
    let dir = tempfile::tempdir().unwrap();
    let mut config = preset("fig3-desk").unwrap();
    assert_eq!(config.mode, Mode::Quantum);
    config.r_values = vec![0.0, 2.0];
    config.output_dir = dir.path().to_path_buf();
    let start = Instant::now();
    let out = run(&config, None).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let q0 = &out.quantum.iter().find(|p| p.run.r == 0.0).unwrap().run;
    let q2 = &out.quantum.iter().find(|p| p.run.r == 2.0).unwrap().run;
    for q in [q0, q2] {
        *max_trace = max_trace.max(q.max_trace_error);
        *max_herm = max_herm.max(q.max_hermiticity_defect);
    }
    let (z0, z2) = (q0.fit.as_ref().map(|f| f.zeta), q2.fit.as_ref().map(|f| f.zeta));
    let (l0, l2) = (q0.late_envelope(LATE_FRACTION), q2.late_envelope(LATE_FRACTION));
    let f_bounded = [q0, q2].iter().all(|q| q.fidelity.values.iter().all(|f| (0.0..=1.0).contains(f)));
    let ok = matches!((z0, z2), (Some(a), Some(b)) if b < a) && l2 - l0 >= C3_MARGIN && elapsed < C3_RUNTIME_S && f_bounded;
    report.record(
        "C3",
        "desk-scale quantum protection",
        ok,
        format!(
            "fitted envelope rate r=0 {:.4} vs r=2 {:.4}; late envelope r=0 {l0:.4} vs r=2 {l2:.4} (margin {:.4} ≥ {C3_MARGIN}); F(0) = {:.12} [{elapsed:.0}s]",
            z0.unwrap_or(f64::NAN),
            z2.unwrap_or(f64::NAN),
            l2 - l0,
            q0.fidelity.values[0],
        ),
    );
}

/// Criterion 4: second-order Trotter against the dense exponential.
fn trotter_criterion(report: &mut Report, max_trace: &mut f64, max_herm: &mut f64) {
    let kappa = 7.0;
    let params = SystemParams::resonant(DELTA_C, OMEGA, 0.0, 30.0, 2)
        .unwrap()
        .with_losses(kappa, kappa / 8.0, kappa / 16.0)
        .with_width_kind(WidthKind::StdDev);
    let classes = discretize_gaussian(&params, 2).unwrap();
    let spec = HilbertSpec::new(6, 2).unwrap();
    let l = build_liouvillian(&spec, &params, &classes, Frame::Squeezed, 0.0).unwrap().co_rotating(DELTA_C).unwrap();
    let s = 0.5f64.sqrt();
    let rho0 = DensitySuperket::spins_down_with_cavity(&[C64::new(0.0, 0.0), C64::new(s, 0.0), C64::new(s, 0.0)], spec)
        .unwrap();
    let (t_end, dt_out) = (1.0, 0.01);
    let reference = evolve(&l, &rho0, t_end, dt_out, PropagatorConfig::dense(dt_out)).unwrap();
    let mut errors = Vec::new();
    for dt in C4_DTS {
        let snaps = evolve(&l, &rho0, t_end, dt_out, PropagatorConfig::trotter2(dt)).unwrap();
        let mut worst: f64 = 0.0;
        for ((_, a), (_, b)) in snaps.iter().zip(&reference) {
            worst = worst.max(a.trace_distance(b));
            *max_trace = max_trace.max((a.trace() - C64::new(1.0, 0.0)).norm());
            *max_herm = max_herm.max(a.hermiticity_defect());
        }
        errors.push(worst);
    }
    for (_, b) in &reference {
        *max_trace = max_trace.max((b.trace() - C64::new(1.0, 0.0)).norm());
        *max_herm = max_herm.max(b.hermiticity_defect());
    }
    // least-squares slope of log error against log dt
    let xs: Vec<f64> = C4_DTS.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let finest = errors[2];
    let ok = finest <= C4_MAX_TRACE_DISTANCE && (slope - C4_SLOPE).abs() <= C4_SLOPE_TOL;
    report.record(
        "C4",
        "Trotter/dense oracle equivalence",
        ok,
        format!(
            "max trace distance {} at dt = {C4_DTS:?} µs; slope {slope:.3} (need {C4_SLOPE} ± {C4_SLOPE_TOL})",
            errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    );
}

/// Criterion 5: closed-form oracles.
fn analytic_criteria(report: &mut Report) {
    // (a) lossless resonant Jaynes-Cummings: P(n = 1) = cos²(g t) from |1, ↓⟩
    let g = 2.0;
    let spec = HilbertSpec::new(4, 1).unwrap();
    let params = SystemParams::resonant(10.0, g, 0.0, 0.0, 1).unwrap();
    let one = SpinClasses { classes: vec![SpinClass { detuning: 10.0, coupling: g, multiplicity: 1 }], total: 1 };
    let l = build_liouvillian(&spec, &params, &one, Frame::Lab, 0.0).unwrap();
    let rho = DensitySuperket::spins_down_with_cavity(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)], spec).unwrap();
    let jc = evolve(&l, &rho, 2.0, 0.01, PropagatorConfig::dense(0.01))
        .unwrap()
        .iter()
        .map(|(t, s)| (s.photon_population(1) - (g * t).cos().powi(2)).abs())
        .fold(0.0, f64::max);

    // (b) mean-field Rabi with σ^z frozen: a(t) e^{iΔt} = cos(Ω t); one
    // photon among 10⁹ spins keeps the nonlinearity below 1e-9
    let n: u64 = 1_000_000_000;
    let delta = 250.0;
    let p = SystemParams::resonant(delta, OMEGA, 0.0, 0.0, n).unwrap();
    let class = SpinClasses {
        classes: vec![SpinClass { detuning: delta, coupling: OMEGA / (n as f64).sqrt(), multiplicity: n }],
        total: n,
    };
    let mut s0 = MeanFieldState::ground(1);
    s0.a = C64::new(1.0, 0.0);
    let tight = Tolerances { rtol: 1e-12, atol: 1e-14 };
    let series = integrate_with(&s0, &p, &class, 1.0, 1e-3, tight).unwrap();
    let rabi = series
        .times
        .iter()
        .zip(&series.values)
        .map(|(&t, s)| (s.a - C64::from_polar(1.0, -delta * t) * (OMEGA * t).cos()).norm())
        .fold(0.0, f64::max);

    // (c) squeezed-frame Hamiltonian at r = 0 is the undriven lab one
    let spec = HilbertSpec::new(6, 3).unwrap();
    let params = SystemParams::resonant(DELTA_C, OMEGA, 0.0, 30.0, 3).unwrap();
    let classes = discretize_gaussian(&params, 3).unwrap();
    let hsq = build_hsq(&spec, &params, &classes, 0.0).unwrap();
    let h0 = build_h0(&spec, &params, &classes).unwrap();
    let frame = hsq.matrix.max_abs_diff(&h0.matrix);

    let ok = jc < C5_JC_TOL && rabi < C5_RABI_TOL && frame <= C5_FRAME_TOL;
    report.record(
        "C5",
        "analytic oracles",
        ok,
        format!("(a) JC cos² err {jc:.2e} (b) mean-field Rabi err {rabi:.2e} (c) H_sq(0) − H_0 = {frame:.1e}"),
    );
}

/// Criterion 6: normalization and the quantum-run invariants collected above.
fn conservation_criterion(report: &mut Report, max_trace: f64, max_herm: f64) {
    let psi = |amps: &[f64]| {
        let v: Vec<C64> = amps.iter().map(|&a| C64::new(a, 0.0)).collect();
        DMatrix::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())
    };
    let s = 0.5f64.sqrt();
    let encoded = psi(&[0.0, s, s, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let norm = wigner_square(&encoded, 6.0, 241).unwrap().normalization();
    let vacuum = wigner_point(&psi(&[1.0, 0.0]), 0.0, 0.0);
    let fock1 = wigner_point(&psi(&[0.0, 1.0]), 0.0, 0.0);
    let inv_pi = std::f64::consts::FRAC_1_PI;
    let ok = max_trace <= C6_TRACE_TOL
        && max_herm <= C6_HERMITICITY_TOL
        && (norm - 1.0).abs() <= C6_WIGNER_NORM_TOL
        && (vacuum - inv_pi).abs() <= C6_WIGNER_PEAK_TOL
        && (fock1 + inv_pi).abs() <= C6_WIGNER_PEAK_TOL;
    report.record(
        "C6",
        "conservation and normalization",
        ok,
        format!(
            "max |tr ρ − 1| {max_trace:.1e}, max Hermiticity defect {max_herm:.1e}; ∫W = {norm:.6}; W_vac(0) − 1/π = {:.1e}; W_1(0) + 1/π = {:.1e}",
            vacuum - inv_pi,
            fock1 + inv_pi
        ),
    );
}

/// Criterion 7: squeezed-frame identities.
fn frame_criterion(report: &mut Report) {
    let mut round_trip: f64 = 0.0;
    let mut bogoliubov: f64 = 0.0;
    for k in 0..=240 {
        let r = k as f64 * 0.01;
        let back = squeezing_parameter(drive_for_r(r, DELTA_C), DELTA_C).unwrap();
        round_trip = round_trip.max((back - r).abs());
        let x = 2.0 * r;
        bogoliubov = bogoliubov.max((1.0 / x.cosh().powi(2) + x.tanh().powi(2) - 1.0).abs());
    }
    let exact = [0.0, 1.0, 2.0, 2.4].iter().all(|&r: &f64| photon_number_squeezed(C64::new(r.exp(), 0.0), r) == 1.0);
    let ok = round_trip <= C7_ROUND_TRIP_TOL && bogoliubov <= C7_BOGOLIUBOV_TOL && exact;
    report.record(
        "C7",
        "frame identities",
        ok,
        format!("round trip {round_trip:.1e}; sech²+tanh²−1 {bogoliubov:.1e}; n_sq(eʳ, r) == 1 exactly: {exact}"),
    );
}

#[test]
fn acceptance() {
    let mut report = Report { lines: Vec::new() };
    let (mut max_trace, mut max_herm) = (0.0, 0.0);
    semiclassical_criteria(&mut report);
    quantum_criteria(&mut report, &mut max_trace, &mut max_herm);
    trotter_criterion(&mut report, &mut max_trace, &mut max_herm);
    analytic_criteria(&mut report);
    conservation_criterion(&mut report, max_trace, max_herm);
    frame_criterion(&mut report);
    let failed: Vec<&String> = report.lines.iter().filter(|l| !l.0).map(|l| &l.1).collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("\n"));
}

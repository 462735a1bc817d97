//! Flat key-value run configuration, written in TOML syntax.
//!
//! Every key lives at the top level; [`SCHEMA`] lists them all. Keys that do
//! not apply to the selected mode are rejected rather than ignored, so a
//! config always means exactly what it says.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use hybridq::model::{squeezing_parameter, ClassSampling, SystemParams, WidthKind};
use hybridq::operators::Frame;
use hybridq::propagate::{Method, PropagatorConfig};
use hybridq::C64;
use toml::{Spanned, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn new(message: impl Into<String>) -> Self {
        ConfigError { key: None, line: None, message: message.into() }
    }

    fn at(key: &str, line: Option<usize>, message: impl Into<String>) -> Self {
        ConfigError { key: Some(key.to_string()), line, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.key, self.line) {
            (Some(k), Some(l)) => write!(f, "`{k}` (line {l}): {}", self.message),
            (Some(k), None) => write!(f, "`{k}`: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Semiclassical,
    Quantum,
    Wigner,
    Sweep,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Semiclassical, Mode::Quantum, Mode::Wigner, Mode::Sweep];

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Semiclassical => "semiclassical",
            Mode::Quantum => "quantum",
            Mode::Wigner => "wigner",
            Mode::Sweep => "sweep",
        }
    }

    pub fn from_name(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Mean-field modes (semiclassical, sweep) versus Lindblad modes.
    pub fn is_mean_field(&self) -> bool {
        matches!(self, Mode::Semiclassical | Mode::Sweep)
    }
}

/// Which modes a key applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    All,
    MeanField,
    Lindblad,
    Wigner,
}

impl Scope {
    fn admits(&self, mode: Mode) -> bool {
        match self {
            Scope::All => true,
            Scope::MeanField => mode.is_mean_field(),
            Scope::Lindblad => !mode.is_mean_field(),
            Scope::Wigner => mode == Mode::Wigner,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Scope::All => "all",
            Scope::MeanField => "semiclassical, sweep",
            Scope::Lindblad => "quantum, wigner",
            Scope::Wigner => "wigner",
        }
    }
}

pub struct KeySpec {
    pub key: &'static str,
    pub kind: &'static str,
    pub scope: Scope,
    /// Default value, or "required".
    pub default: &'static str,
    pub doc: &'static str,
}

const fn key(key: &'static str, kind: &'static str, scope: Scope, default: &'static str, doc: &'static str) -> KeySpec {
    KeySpec { key, kind, scope, default, doc }
}

/// Every recognised key.
pub const SCHEMA: &[KeySpec] = &[
    key("mode", "string", Scope::All, "required", "semiclassical | quantum | wigner | sweep"),
    key("delta_c", "float", Scope::All, "required", "cavity detuning Δc [MHz]"),
    key("omega", "float", Scope::All, "required", "collective coupling Ω [MHz]"),
    key("delta_width", "float", Scope::All, "required*", "spin distribution width δ [MHz] (*or delta_values)"),
    key("delta_values", "float list", Scope::All, "required*", "widths to run (*or delta_width)"),
    key("width_kind", "string", Scope::All, "\"fwhm\"", "how δ is measured: fwhm | std"),
    key("r", "float", Scope::All, "required*", "squeezing parameter (*or r_values, eta)"),
    key("r_values", "float list", Scope::All, "required*", "squeezing parameters to run (*or r, eta)"),
    key("eta", "float", Scope::All, "required*", "drive strength η [MHz], |η| < Δc (*or r, r_values)"),
    key("mean_spin_detuning", "float", Scope::All, "Δc/cosh 2r", "centre of the spin distribution [MHz]"),
    key("kappa", "float", Scope::All, "0", "cavity loss κ [MHz]"),
    key("gamma_h", "float", Scope::All, "0", "spin decay γ_h [MHz]"),
    key("gamma_p", "float", Scope::All, "0", "spin dephasing γ_p [MHz]"),
    key("class_sampling", "string", Scope::All, "\"quantile\"", "quantile | random (seeded)"),
    key("t_end", "float", Scope::All, "0.3 | 0.4", "horizon [µs] (mean-field | Lindblad modes)"),
    key("dt_out", "float", Scope::All, "5e-4 | 2e-3", "output spacing [µs] (mean-field | Lindblad modes)"),
    key("output_dir", "string", Scope::All, "\"out\"", "directory for the CSV files"),
    key("seed", "integer", Scope::All, "0", "seed for random class sampling"),
    key("note", "string", Scope::All, "none", "free text copied into every output header"),
    key("n_spins", "integer", Scope::MeanField, "required", "physical spin count N"),
    key("n_classes", "integer", Scope::MeanField, "required", "frequency classes M"),
    key("n_spins_quantum", "integer", Scope::Lindblad, "required", "simulated spins N_q"),
    key("fock_cutoff", "integer", Scope::Lindblad, "required", "Fock levels kept (≥ 2)"),
    key("initial_state", "string", Scope::Lindblad, "required", "fock:n | superposition:n1,n2,… | coherent:α"),
    key("frame", "string", Scope::Lindblad, "\"squeezed\"", "lab | squeezed"),
    key("propagator", "string", Scope::Lindblad, "\"dense-expm\"", "dense-expm | trotter2 | trotter2-truncated"),
    key("dt", "float", Scope::Lindblad, "dt_out", "internal step [µs]"),
    key("svd_cutoff", "float", Scope::Lindblad, "1e-10", "relative singular-value cutoff (truncated)"),
    key("max_rank", "integer", Scope::Lindblad, "64", "maximum kept rank (truncated)"),
    key("rho_snapshot_every", "integer", Scope::Lindblad, "0", "write ρ_c every k-th snapshot (0: never)"),
    key("wigner_extent", "float", Scope::Wigner, "4", "grid covers p, q ∈ [−extent, extent]"),
    key("wigner_resolution", "integer", Scope::Wigner, "101", "points per axis"),
    key("wigner_at", "float or \"peak\"", Scope::Wigner, "\"peak\"", "snapshot time, or the late fidelity maximum"),
];

/// Keys that say the same thing in different ways; at most one per group.
const ALTERNATIVES: &[&[&str]] = &[&["delta_width", "delta_values"], &["r", "r_values", "eta"]];

fn spec(name: &str) -> Option<&'static KeySpec> {
    SCHEMA.iter().find(|k| k.key == name)
}

/// The schema as a pipe-separated table.
pub fn schema_text() -> String {
    let mut out = String::from("# key | type | modes | default | meaning\n");
    for k in SCHEMA {
        out.push_str(&format!("{} | {} | {} | {} | {}\n", k.key, k.kind, k.scope.label(), k.default, k.doc));
    }
    out
}

/// Initial cavity state (spins start down).
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Fock(usize),
    /// Equal-weight superposition of the listed Fock states.
    Superposition(Vec<usize>),
    /// Coherent state with real amplitude α, truncated and renormalized.
    Coherent(f64),
}

impl InitialState {
    pub fn parse(s: &str) -> Result<Self, String> {
        let (kind, arg) = s.split_once(':').ok_or_else(|| format!("expected kind:argument, got {s:?}"))?;
        let level = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("bad Fock level {x:?}"));
        match kind.trim() {
            "fock" => Ok(InitialState::Fock(level(arg)?)),
            "superposition" => {
                let levels = arg.split(',').map(level).collect::<Result<Vec<_>, _>>()?;
                let mut sorted = levels.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != levels.len() {
                    return Err("superposition levels must be distinct".into());
                }
                Ok(InitialState::Superposition(levels))
            }
            "coherent" => arg
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|a| a.is_finite())
                .map(InitialState::Coherent)
                .ok_or_else(|| format!("bad coherent amplitude {arg:?}")),
            other => Err(format!("unknown state kind {other:?} (fock, superposition, coherent)")),
        }
    }

    pub fn spec_string(&self) -> String {
        match self {
            InitialState::Fock(n) => format!("fock:{n}"),
            InitialState::Superposition(v) => {
                format!("superposition:{}", v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","))
            }
            InitialState::Coherent(a) => format!("coherent:{a}"),
        }
    }

    fn max_level(&self) -> Option<usize> {
        match self {
            InitialState::Fock(n) => Some(*n),
            InitialState::Superposition(v) => v.iter().copied().max(),
            InitialState::Coherent(_) => None,
        }
    }

    /// Normalized amplitudes on `cutoff` Fock levels.
    pub fn amplitudes(&self, cutoff: usize) -> Vec<C64> {
        let mut psi = vec![C64::new(0.0, 0.0); cutoff];
        match self {
            InitialState::Fock(n) => psi[*n] = C64::new(1.0, 0.0),
            InitialState::Superposition(v) => {
                let w = 1.0 / (v.len() as f64).sqrt();
                for &n in v {
                    psi[n] = C64::new(w, 0.0);
                }
            }
            InitialState::Coherent(alpha) => {
                let mut c = 1.0;
                for (n, amp) in psi.iter_mut().enumerate() {
                    if n > 0 {
                        c *= alpha / (n as f64).sqrt();
                    }
                    *amp = C64::new(c, 0.0);
                }
                let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                psi.iter_mut().for_each(|z| *z /= norm);
            }
        }
        psi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WignerAt {
    Time(f64),
    /// Snapshot of largest fidelity within the final 20 % of the run.
    Peak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    Quantile,
    Random,
}

/// A validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    /// Parameters of the first (r, δ) point; the other points differ only in
    /// drive, width and spin-distribution centre.
    pub params: SystemParams,
    pub n_classes: usize,
    pub n_spins_quantum: usize,
    pub sampling: Sampling,
    pub fock_cutoff: usize,
    pub frame: Frame,
    pub r_values: Vec<f64>,
    pub delta_values: Vec<f64>,
    /// Fixed spin-distribution centre; `None` keeps it on Δ̃c at every r.
    pub mean_spin_detuning: Option<f64>,
    pub propagator: PropagatorConfig,
    pub initial_state: InitialState,
    pub t_end: f64,
    pub dt_out: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub wigner_extent: f64,
    pub wigner_resolution: usize,
    pub wigner_at: WignerAt,
    pub rho_snapshot_every: usize,
    pub note: Option<String>,
}

impl RunConfig {
    /// Parameters at one (r, δ) point.
    pub fn point_params(&self, r: f64, delta_width: f64) -> hybridq::Result<SystemParams> {
        let p = &self.params;
        let mut out = SystemParams::resonant(p.delta_c, p.omega_coll, r, delta_width, p.n_spins)?
            .with_losses(p.kappa, p.gamma_h, p.gamma_p)
            .with_width_kind(p.width_kind);
        if let Some(mean) = self.mean_spin_detuning {
            out.mean_spin_detuning = mean;
        }
        out.validate()?;
        Ok(out)
    }

    /// The cartesian product δ × r, sorted by (δ, r).
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> =
            self.delta_values.iter().flat_map(|&d| self.r_values.iter().map(move |&r| (d, r))).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pts
    }

    pub fn class_sampling(&self) -> ClassSampling {
        match self.sampling {
            Sampling::Quantile => ClassSampling::Quantile,
            Sampling::Random => ClassSampling::Random { seed: self.seed },
        }
    }
}

/// A parsed document: values with the line they appeared on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    entries: BTreeMap<String, (Value, Option<usize>)>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl Document {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: BTreeMap<String, Spanned<Value>> = toml::from_str(text).map_err(|e| ConfigError {
            key: None,
            line: e.span().map(|s| line_of(text, s.start)),
            message: format!("malformed document: {}", e.message()),
        })?;
        let mut entries = BTreeMap::new();
        for (k, v) in table {
            let line = line_of(text, v.span().start);
            entries.insert(k, (v.into_inner(), Some(line)));
        }
        Ok(Document { entries })
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.entries.insert(key.to_string(), (value, None));
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key).map(|e| &e.0)
    }

    pub fn remove(&mut self, key: &str) {
        self.entries.remove(key);
    }

    /// Entries of `other` replace those here; a key from one of the
    /// alternative groups (`r`/`r_values`/`eta`, `delta_width`/`delta_values`)
    /// replaces its whole group.
    pub fn overlay(&mut self, other: &Document) {
        for group in ALTERNATIVES {
            if group.iter().any(|k| other.entries.contains_key(*k)) {
                for k in *group {
                    self.entries.remove(*k);
                }
            }
        }
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    /// Forget source lines (for documents that did not come from the user).
    pub fn without_lines(mut self) -> Self {
        self.entries.values_mut().for_each(|e| e.1 = None);
        self
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).and_then(|e| e.1)
    }

    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::at(key, self.line(key), message)
    }

    fn float(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) if x.is_finite() => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(self.err(key, "expected a finite number")),
        }
    }

    fn int(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(self.err(key, "expected a non-negative integer")),
        }
    }

    fn string(&self, key: &str) -> Result<Option<&str>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(self.err(key, "expected a string")),
        }
    }

    fn float_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Float(x) if x.is_finite() => Ok(*x),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(self.err(key, "expected a list of finite numbers")),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => Err(self.err(key, "expected a list of numbers")),
        }
    }

    fn choice<T>(&self, key: &str, parse: impl Fn(&str) -> Option<T>, options: &str) -> Result<Option<T>, ConfigError> {
        match self.string(key)? {
            None => Ok(None),
            Some(s) => parse(s).map(Some).ok_or_else(|| self.err(key, format!("unknown value {s:?} (expected {options})"))),
        }
    }
}

fn frame_name(frame: Frame) -> &'static str {
    match frame {
        Frame::Lab => "lab",
        Frame::Squeezed => "squeezed",
    }
}

fn frame_from_name(s: &str) -> Option<Frame> {
    match s {
        "lab" => Some(Frame::Lab),
        "squeezed" => Some(Frame::Squeezed),
        _ => None,
    }
}

/// Parse and validate a config document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    from_document(&Document::parse(text)?)
}

/// Build a config from an already merged document.
pub fn from_document(doc: &Document) -> Result<RunConfig, ConfigError> {
    // misspellings first: they often explain a "missing" key
    if let Some(k) = doc.entries.keys().find(|k| spec(k).is_none()) {
        return Err(doc.err(k, "unknown key (see `simulate presets --schema`)"));
    }
    let mode = doc.choice("mode", Mode::from_name, "semiclassical, quantum, wigner, sweep")?;

    let mut missing = Vec::new();
    let mut require = |present: bool, label: &str| {
        if !present {
            missing.push(label.to_string());
        }
    };
    let has = |k: &str| doc.get(k).is_some();
    require(mode.is_some(), "mode");
    require(has("delta_c"), "delta_c");
    require(has("omega"), "omega");
    require(has("delta_width") || has("delta_values"), "delta_width (or delta_values)");
    require(has("r") || has("r_values") || has("eta"), "r (or r_values, eta)");
    match mode {
        Some(m) if m.is_mean_field() => {
            require(has("n_spins"), "n_spins");
            require(has("n_classes"), "n_classes");
        }
        Some(_) => {
            require(has("n_spins_quantum"), "n_spins_quantum");
            require(has("fock_cutoff"), "fock_cutoff");
            require(has("initial_state"), "initial_state");
        }
        None => {}
    }
    if !missing.is_empty() {
        let mut msg = format!("missing required keys: {}", missing.join(", "));
        if mode.is_none() {
            msg.push_str(" (plus the keys required by the chosen mode)");
        }
        return Err(ConfigError::new(msg));
    }
    let mode = mode.expect("checked above");

    for k in doc.entries.keys() {
        if let Some(s) = spec(k) {
            if !s.scope.admits(mode) {
                return Err(doc.err(k, format!("does not apply to {} mode (modes: {})", mode.name(), s.scope.label())));
            }
        }
    }
    let exclusive = |keys: &[&str]| -> Result<(), ConfigError> {
        let given: Vec<&str> = keys.iter().copied().filter(|k| has(k)).collect();
        if given.len() > 1 {
            return Err(doc.err(given[1], format!("give only one of {}", keys.join(", "))));
        }
        Ok(())
    };
    for group in ALTERNATIVES {
        exclusive(group)?;
    }

    let delta_c = doc.float("delta_c")?.expect("required");
    let omega = doc.float("omega")?.expect("required");
    if !(delta_c > 0.0) {
        return Err(doc.err("delta_c", "must be > 0"));
    }
    if omega < 0.0 {
        return Err(doc.err("omega", "must be >= 0"));
    }

    let delta_values = match doc.float_list("delta_values")? {
        Some(v) => v,
        None => vec![doc.float("delta_width")?.expect("required")],
    };
    let delta_key = if has("delta_values") { "delta_values" } else { "delta_width" };
    if delta_values.is_empty() {
        return Err(doc.err(delta_key, "needs at least one width"));
    }
    if let Some(d) = delta_values.iter().find(|d| **d < 0.0) {
        return Err(doc.err(delta_key, format!("widths must be >= 0, got {d}")));
    }

    let (r_values, r_key) = if let Some(eta) = doc.float("eta")? {
        let r = squeezing_parameter(eta, delta_c).map_err(|e| doc.err("eta", e.to_string()))?;
        (vec![r], "eta")
    } else if let Some(v) = doc.float_list("r_values")? {
        (v, "r_values")
    } else {
        (vec![doc.float("r")?.expect("required")], "r")
    };
    if r_values.is_empty() {
        return Err(doc.err(r_key, "needs at least one squeezing value"));
    }

    let width_kind = doc.choice("width_kind", WidthKind::from_name, "fwhm, std")?.unwrap_or_default();
    let mean_field = mode.is_mean_field();
    let n_spins = if mean_field {
        doc.int("n_spins")?.expect("required")
    } else {
        doc.int("n_spins_quantum")?.expect("required")
    };
    let spins_key = if mean_field { "n_spins" } else { "n_spins_quantum" };
    if n_spins == 0 {
        return Err(doc.err(spins_key, "must be >= 1"));
    }

    let mut params = SystemParams::resonant(delta_c, omega, r_values[0], delta_values[0], n_spins)
        .map_err(|e| doc.err(r_key, e.to_string()))?
        .with_width_kind(width_kind);
    for k in ["kappa", "gamma_h", "gamma_p"] {
        let v = doc.float(k)?.unwrap_or(0.0);
        if v < 0.0 {
            return Err(doc.err(k, "rates must be >= 0"));
        }
        match k {
            "kappa" => params.kappa = v,
            "gamma_h" => params.gamma_h = v,
            _ => params.gamma_p = v,
        }
    }
    let mean_spin_detuning = doc.float("mean_spin_detuning")?;

    let (t_default, dt_default) = if mean_field { (0.3, 5e-4) } else { (0.4, 2e-3) };
    let t_end = doc.float("t_end")?.unwrap_or(t_default);
    let dt_out = doc.float("dt_out")?.unwrap_or(dt_default);
    if !(t_end > 0.0) {
        return Err(doc.err("t_end", "must be > 0"));
    }
    if !(dt_out > 0.0 && dt_out <= t_end) {
        return Err(doc.err("dt_out", "must lie in (0, t_end]"));
    }

    let n_classes = if mean_field {
        let m = doc.int("n_classes")?.expect("required");
        if m == 0 || m > n_spins {
            return Err(doc.err("n_classes", format!("must lie in [1, n_spins = {n_spins}]")));
        }
        m as usize
    } else {
        0
    };

    let fock_cutoff = if mean_field { 0 } else { doc.int("fock_cutoff")?.expect("required") as usize };
    if !mean_field && fock_cutoff < 2 {
        return Err(doc.err("fock_cutoff", "must be >= 2"));
    }
    let initial_state = match doc.string("initial_state")? {
        Some(s) => InitialState::parse(s).map_err(|m| doc.err("initial_state", m))?,
        None => InitialState::Fock(1),
    };
    if let Some(n) = initial_state.max_level() {
        if !mean_field && n >= fock_cutoff {
            return Err(doc.err("initial_state", format!("level {n} is outside the {fock_cutoff}-level Fock space")));
        }
    }

    let method = doc.choice("propagator", Method::from_name, "dense-expm, trotter2, trotter2-truncated")?;
    let method = method.unwrap_or(Method::DenseExpm);
    let dt = doc.float("dt")?.unwrap_or(dt_out);
    let propagator = match method {
        Method::DenseExpm => PropagatorConfig::dense(dt),
        Method::Trotter2 => PropagatorConfig::trotter2(dt),
        Method::Trotter2Truncated => PropagatorConfig::truncated(
            dt,
            doc.float("svd_cutoff")?.unwrap_or(1e-10),
            doc.int("max_rank")?.unwrap_or(64) as usize,
        ),
    };
    if method != Method::Trotter2Truncated {
        for k in ["svd_cutoff", "max_rank"] {
            if has(k) {
                return Err(doc.err(k, "only used by the trotter2-truncated propagator"));
            }
        }
    }
    propagator.validate().map_err(|e| doc.err(if has("dt") { "dt" } else { "propagator" }, e.to_string()))?;

    let wigner_at = match doc.get("wigner_at") {
        None => WignerAt::Peak,
        Some(Value::String(s)) if s == "peak" => WignerAt::Peak,
        Some(_) => match doc.float("wigner_at") {
            Ok(Some(t)) if (0.0..=t_end).contains(&t) => WignerAt::Time(t),
            _ => return Err(doc.err("wigner_at", "expected \"peak\" or a time in [0, t_end]")),
        },
    };
    let wigner_extent = doc.float("wigner_extent")?.unwrap_or(4.0);
    if !(wigner_extent > 0.0) {
        return Err(doc.err("wigner_extent", "must be > 0"));
    }
    let wigner_resolution = doc.int("wigner_resolution")?.unwrap_or(101) as usize;
    if wigner_resolution < 2 {
        return Err(doc.err("wigner_resolution", "must be >= 2"));
    }

    let config = RunConfig {
        mode,
        params,
        n_classes,
        n_spins_quantum: if mean_field { 0 } else { n_spins as usize },
        sampling: doc
            .choice(
                "class_sampling",
                |s| match s {
                    "quantile" => Some(Sampling::Quantile),
                    "random" => Some(Sampling::Random),
                    _ => None,
                },
                "quantile, random",
            )?
            .unwrap_or(Sampling::Quantile),
        fock_cutoff,
        frame: doc.choice("frame", frame_from_name, "lab, squeezed")?.unwrap_or(Frame::Squeezed),
        r_values,
        delta_values,
        mean_spin_detuning,
        propagator,
        initial_state,
        t_end,
        dt_out,
        output_dir: PathBuf::from(doc.string("output_dir")?.unwrap_or("out")),
        seed: doc.int("seed")?.unwrap_or(0),
        wigner_extent,
        wigner_resolution,
        wigner_at,
        rho_snapshot_every: doc.int("rho_snapshot_every")?.unwrap_or(0) as usize,
        note: doc.string("note")?.map(str::to_string),
    };
    for (d, r) in config.points() {
        config.point_params(r, d).map_err(|e| doc.err(r_key, e.to_string()))?;
    }
    Ok(config)
}

fn float_value(x: f64) -> Value {
    Value::Float(x)
}

fn list_value(v: &[f64]) -> Value {
    Value::Array(v.iter().copied().map(Value::Float).collect())
}

/// Canonical document for `config`; `parse_config` of it gives `config` back.
pub fn serialize(config: &RunConfig) -> String {
    let p = &config.params;
    let mut kv: Vec<(&str, Value)> = vec![
        ("mode", Value::String(config.mode.name().into())),
        ("delta_c", float_value(p.delta_c)),
        ("omega", float_value(p.omega_coll)),
        ("delta_values", list_value(&config.delta_values)),
        ("width_kind", Value::String(p.width_kind.name().into())),
        ("r_values", list_value(&config.r_values)),
    ];
    if let Some(m) = config.mean_spin_detuning {
        kv.push(("mean_spin_detuning", float_value(m)));
    }
    kv.extend([
        ("kappa", float_value(p.kappa)),
        ("gamma_h", float_value(p.gamma_h)),
        ("gamma_p", float_value(p.gamma_p)),
        (
            "class_sampling",
            Value::String(match config.sampling {
                Sampling::Quantile => "quantile".into(),
                Sampling::Random => "random".into(),
            }),
        ),
        ("t_end", float_value(config.t_end)),
        ("dt_out", float_value(config.dt_out)),
        ("output_dir", Value::String(config.output_dir.to_string_lossy().into_owned())),
        ("seed", Value::Integer(config.seed as i64)),
    ]);
    if let Some(note) = &config.note {
        kv.push(("note", Value::String(note.clone())));
    }
    if config.mode.is_mean_field() {
        kv.push(("n_spins", Value::Integer(p.n_spins as i64)));
        kv.push(("n_classes", Value::Integer(config.n_classes as i64)));
    } else {
        let prop = &config.propagator;
        kv.extend([
            ("n_spins_quantum", Value::Integer(config.n_spins_quantum as i64)),
            ("fock_cutoff", Value::Integer(config.fock_cutoff as i64)),
            ("initial_state", Value::String(config.initial_state.spec_string())),
            ("frame", Value::String(frame_name(config.frame).into())),
            ("propagator", Value::String(prop.method.name().into())),
            ("dt", float_value(prop.dt)),
        ]);
        if prop.method == Method::Trotter2Truncated {
            kv.push(("svd_cutoff", float_value(prop.svd_cutoff)));
            kv.push(("max_rank", Value::Integer(prop.max_rank as i64)));
        }
        kv.push(("rho_snapshot_every", Value::Integer(config.rho_snapshot_every as i64)));
    }
    if config.mode == Mode::Wigner {
        kv.push(("wigner_extent", float_value(config.wigner_extent)));
        kv.push(("wigner_resolution", Value::Integer(config.wigner_resolution as i64)));
        kv.push((
            "wigner_at",
            match config.wigner_at {
                WignerAt::Peak => Value::String("peak".into()),
                WignerAt::Time(t) => float_value(t),
            },
        ));
    }
    kv.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "mode = \"semiclassical\"\ndelta_c = 70000\nomega = 40\ndelta_width = 60\nr = 2\nn_spins = 10000\nn_classes = 200\n";

    #[test]
    fn minimal_semiclassical_document() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.mode, Mode::Semiclassical);
        assert_eq!(c.r_values, vec![2.0]);
        assert_eq!(c.delta_values, vec![60.0]);
        assert_eq!(c.params.n_spins, 10_000);
        assert_eq!(c.n_classes, 200);
        assert!((c.params.eta - 70000.0 * 4f64.tanh()).abs() < 1e-9);
    }

    #[test]
    fn empty_document_lists_required_keys() {
        let e = parse_config("").unwrap_err();
        for k in ["mode", "delta_c", "omega", "delta_width", "r (or r_values, eta)"] {
            assert!(e.message.contains(k), "{e}");
        }
    }

    #[test]
    fn drive_above_threshold_rejected() {
        let text = MINIMAL.replace("r = 2\n", "eta = 70000\n");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("eta"));
        assert_eq!(e.line, Some(5));
        assert!(e.message.contains("instability threshold"), "{e}");
    }

    #[test]
    fn unknown_and_misplaced_keys_carry_lines() {
        let e = parse_config(&format!("{MINIMAL}bogus = 1\n")).unwrap_err();
        assert_eq!((e.key.as_deref(), e.line), (Some("bogus"), Some(8)));
        let e = parse_config(&format!("{MINIMAL}fock_cutoff = 4\n")).unwrap_err();
        assert!(e.message.contains("does not apply"), "{e}");
        let e = parse_config(&MINIMAL.replace("omega = 40", "omega = \"x\"")).unwrap_err();
        assert_eq!((e.key.as_deref(), e.line), (Some("omega"), Some(3)));
    }

    #[test]
    fn conflicting_keys_rejected() {
        let e = parse_config(&format!("{MINIMAL}r_values = [0.0]\n")).unwrap_err();
        assert!(e.message.contains("only one of"), "{e}");
    }

    #[test]
    fn overlay_replaces_alternatives() {
        let mut base = Document::parse(MINIMAL).unwrap().without_lines();
        base.overlay(&Document::parse("r_values = [0.0, 1.0]\nn_classes = 50\n").unwrap());
        let c = from_document(&base).unwrap();
        assert_eq!((c.r_values.clone(), c.n_classes), (vec![0.0, 1.0], 50));
    }

    #[test]
    fn sweep_needs_squeezing_values() {
        let text = MINIMAL.replace("semiclassical", "sweep").replace("r = 2", "r_values = []");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("r_values"));
    }

    #[test]
    fn round_trip() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&serialize(&c)).unwrap(), c);
        let q = "mode = \"wigner\"\ndelta_c = 70000\nomega = 40\ndelta_values = [30, 31.5]\nr_values = [0, 0.2, 2.4]\n\
                 n_spins_quantum = 2\nfock_cutoff = 6\ninitial_state = \"coherent:0.7\"\npropagator = \"trotter2-truncated\"\n\
                 max_rank = 9\nwigner_at = 0.1\nkappa = 7\nnote = \"a \\\"quoted\\\" note\"\nmean_spin_detuning = 12.5\n";
        let c = parse_config(q).unwrap();
        assert_eq!(c.points().len(), 6);
        assert_eq!(parse_config(&serialize(&c)).unwrap(), c);
    }

    #[test]
    fn initial_states() {
        let s = InitialState::parse("superposition:1,2").unwrap();
        let psi = s.amplitudes(4);
        assert!((psi[1].re - 0.5f64.sqrt()).abs() < 1e-15 && (psi[2].re - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(InitialState::parse(&s.spec_string()).unwrap(), s);
        let c = InitialState::parse("coherent:0.5").unwrap().amplitudes(12);
        assert!((c.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(InitialState::parse("superposition:1,1").is_err());
        assert!(InitialState::parse("squeezed:1").is_err());
    }
}

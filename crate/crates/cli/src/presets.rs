//! Named parameter sets for the standard runs.

use crate::config::{parse_config, ConfigError, RunConfig};

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub document: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig2a",
        summary: "mean-field photon decay at δ = 60 MHz for r = 0, 1, 2",
        document: r#"mode = "semiclassical"
delta_c = 70000.0
omega = 40.0
delta_width = 60.0
r_values = [0.0, 1.0, 2.0]
n_spins = 10000
n_classes = 200
t_end = 0.3
dt_out = 0.0005
"#,
    },
    Preset {
        name: "fig2b",
        summary: "decay rate ζ over r ∈ [0, 2.4] for δ = 60, 70, 80 MHz",
        document: r#"mode = "sweep"
delta_c = 70000.0
omega = 40.0
delta_values = [60.0, 70.0, 80.0]
r_values = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4]
n_spins = 10000
n_classes = 200
t_end = 0.3
dt_out = 0.0005
"#,
    },
    Preset {
        name: "fig3-desk",
        summary: "Lindblad fidelity of (|1⟩+|2⟩)/√2 with 4 spins, r = 0, 1, 2",
        document: r#"mode = "quantum"
delta_c = 70000.0
omega = 40.0
delta_width = 30.0
width_kind = "std"
r_values = [0.0, 1.0, 2.0]
kappa = 7.0
gamma_h = 0.875
gamma_p = 0.4375
n_spins_quantum = 4
fock_cutoff = 10
initial_state = "superposition:1,2"
frame = "squeezed"
propagator = "dense-expm"
t_end = 0.4
dt_out = 0.002
note = "desk-scale substitute: 4 simulated spins stand in for a 100-spin ensemble"
"#,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn preset(name: &str) -> Result<RunConfig, ConfigError> {
    let p = find(name).ok_or_else(|| ConfigError {
        key: None,
        line: None,
        message: format!(
            "unknown preset {name:?} (known: {})",
            PRESETS.iter().map(|p| p.name).collect::<Vec<_>>().join(", ")
        ),
    })?;
    parse_config(p.document)
}

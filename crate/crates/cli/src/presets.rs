//! Named experiments reproducing the evaluation section's figures and table.
//! Every preset starts from the library defaults (λ = 5·10⁻⁵, α = 3, d₁ = 5 m,
//! d₂ = 10 m, D = 10 m, β² = 0.3, R₁ = 2, R₂ = 0.5, K = 4).

const SNR_0_60: &str = "[0, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60]";
const D_5_50: &str = "[5, 10, 15, 20, 25, 30, 35, 40, 45, 50]";

pub const NAMES: &[&str] = &[
    "fig3a", "fig3b", "fig4a", "fig4b", "fig5a", "fig5b", "fig6", "fig7", "table1",
];

/// TOML text of a preset, or `None` for an unknown name.
pub fn preset(name: &str) -> Option<String> {
    let text = match name {
        "fig3a" => format!(
            r#"name = "fig3a"
engine = "both"
metrics = ["ltat"]

[[sweep]]
param = "k_max"
values = [1, 2, 3, 4]

[[sweep]]
param = "snr_db"
values = {SNR_0_60}
"#
        ),
        "fig3b" => format!(
            r#"name = "fig3b"
engine = "both"
metrics = ["outage_o1", "outage_o2"]

[[sweep]]
param = "k_max"
values = [1, 2, 3, 4]

[[sweep]]
param = "snr_db"
values = {SNR_0_60}
"#
        ),
        "fig4a" | "fig4b" => format!(
            r#"name = "{name}"
engine = "analytic-approx"
metrics = {metrics}

[[sweep]]
param = "interference_mode"
values = ["correlated", "independent", "none"]

[[sweep]]
param = "snr_db"
values = {SNR_0_60}
"#,
            metrics = if name == "fig4a" {
                r#"["ltat"]"#
            } else {
                r#"["outage_o1", "outage_o2"]"#
            }
        ),
        "fig5a" | "fig5b" => format!(
            r#"name = "{name}"
engine = "both"
metrics = {metrics}

[base]
snr_db = 30

[[sweep]]
param = "k_max"
values = [1, 2, 3, 4]

[[sweep]]
param = "cooperative"
values = [true, false]

[[sweep]]
param = "d_inter"
values = {D_5_50}
"#,
            metrics = if name == "fig5a" {
                r#"["ltat"]"#
            } else {
                r#"["outage_o1", "outage_o2"]"#
            }
        ),
        "fig6" => r#"name = "fig6"
task = "optimize-rates"
engine = "analytic-approx"

[optimize]
eps1 = 0.01
eps2 = 0.01

[[sweep]]
param = "scheme"
values = ["noma", "oma"]

[[sweep]]
param = "k_max"
values = [1, 2, 3, 4]

[[sweep]]
param = "snr_db"
values = [0, 10, 20, 30, 40, 50, 60]
"#
        .to_string(),
        "fig7" => r#"name = "fig7"
task = "optimize-ase"
engine = "analytic-approx"

[optimize]
grid = 32

[[sweep]]
param = "eps"
values = [0.1, 0.01]

[[sweep]]
param = "k_max"
values = [1, 2, 4]

[[sweep]]
param = "snr_db"
values = [0, 10, 20, 30, 40, 50, 60]
"#
        .to_string(),
        "table1" => r#"name = "table1"
task = "optimize-joint"
engine = "analytic-approx"

[base]
k_max = 2

[optimize]
grid = 32

[[sweep]]
param = "eps"
values = [0.1, 0.01]

[[sweep]]
param = "snr_db"
values = [0, 30, 60]
"#
        .to_string(),
        _ => return None,
    };
    Some(text)
}

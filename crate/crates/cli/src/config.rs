//! TOML config: one table per subcommand, keys spelled like the flags.
//!
//! ```toml
//! [sweep]
//! ensemble = "nh32.json"
//! delta-grid = [0.3, 0.2, 0.1, 0.05]
//! epsilons = [1e-3]
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

use crate::{CalibrateArgs, CompareArgs, GenerateArgs, ReportArgs, RunKnownArgs, RunUnknownArgs, SweepArgs};

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Config {
    generate: GenerateArgs,
    run_known: RunKnownArgs,
    run_unknown: RunUnknownArgs,
    calibrate: CalibrateArgs,
    sweep: SweepArgs,
    compare: CompareArgs,
    report: ReportArgs,
}

/// Fills every unset command-line field from the config table.
macro_rules! fill {
    ($name:ident, $ty:ty, $($field:ident),+) => {
        pub fn $name(&self, mut cli: $ty) -> $ty {
            $(if cli.$field.is_none() {
                cli.$field = self.$name.$field.clone();
            })+
            cli
        }
    };
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| {
            shortcut_core::Error::Parse {
                location: path.display().to_string(),
                message: e.to_string(),
            }
            .into()
        })
    }

    fill!(generate, GenerateArgs, kind, n, kappa, band, density, count, seed, out, summary);
    fill!(run_known, RunKnownArgs, ensemble, epsilon, eta_rule, out);
    fill!(run_unknown, RunUnknownArgs, ensemble, eta, target_delta, nodes, out);
    fill!(calibrate, CalibrateArgs, ensemble, target_delta, mode, nodes, out);
    fill!(sweep, SweepArgs, ensemble, delta_grid, epsilons, mode, nodes, early_halving, double_stage1, out);
    fill!(compare, CompareArgs, sweep, baseline, double_stage1, out);
    fill!(report, ReportArgs, input, format, out);
}

//! Library side of the `kcmlab` binary.

pub mod config;
pub mod output;
pub mod tasks;

use kcmlab_core::{KcmError, Result};

pub use config::RunConfig;

pub const TASKS: &[&str] = &[
    "enumerate",
    "fragment",
    "mismatch",
    "count-zm",
    "bound-states",
    "factorizable",
    "mpo-state",
    "spectrum",
    "quench",
    "lift-scan",
    "disorder-scan",
    "entropy",
    "reproduce-table",
];

/// Runs one task and returns the files written to the output directory.
pub fn run(task: &str, cfg: &RunConfig) -> Result<Vec<String>> {
    let mut out = output::Artifacts::new(task, cfg)?;
    match task {
        "enumerate" => tasks::enumerate(cfg, &mut out)?,
        "fragment" => tasks::fragment(cfg, &mut out)?,
        "mismatch" => tasks::mismatch(cfg, &mut out)?,
        "count-zm" => tasks::count_zm(cfg, &mut out)?,
        "bound-states" => tasks::bound_states(cfg, &mut out)?,
        "factorizable" => tasks::factorizable(cfg, &mut out)?,
        "mpo-state" => tasks::mpo_state(cfg, &mut out)?,
        "spectrum" => tasks::spectrum_task(cfg, &mut out)?,
        "quench" => tasks::quench(cfg, &mut out)?,
        "lift-scan" => tasks::lift_scan(cfg, &mut out)?,
        "disorder-scan" => tasks::disorder_scan_task(cfg, &mut out)?,
        "entropy" => tasks::entropy(cfg, &mut out)?,
        "reproduce-table" => {
            let variant = cfg
                .get("variant")
                .ok_or_else(|| KcmError::Domain("reproduce-table needs east or eastwest".into()))?
                .to_string();
            tasks::reproduce_table(cfg, &variant, &mut out)?
        }
        other => {
            return Err(KcmError::Domain(format!(
                "unknown task `{other}`; expected one of {}",
                TASKS.join(", ")
            )))
        }
    }
    out.provenance(cfg)
}

/// Exit code for a failed run.
pub fn exit_code(err: &KcmError) -> i32 {
    if err.is_cross_check() {
        2
    } else {
        1
    }
}

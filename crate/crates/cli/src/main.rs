use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use kcmlab_cli::{exit_code, output::error_json, run, RunConfig};
use kcmlab_core::{KcmError, Result};

/// Exact diagonalization experiments on kinetically constrained chains and
/// rectangles. Flags override values read from `--config`.
#[derive(Debug, Parser)]
#[command(name = "kcmlab", version)]
struct Cli {
    /// enumerate, fragment, mismatch, count-zm, bound-states, factorizable,
    /// mpo-state, spectrum, quench, lift-scan, disorder-scan, entropy,
    /// reproduce-table
    task: String,
    /// Table name for reproduce-table (east | eastwest).
    variant: Option<String>,
    /// Flat `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long, alias = "r")]
    range: Option<String>,
    /// Comma-separated t_1..t_r.
    #[arg(long)]
    couplings: Option<String>,
    /// `L` for chains, `LXxLY` for rectangles.
    #[arg(long, alias = "L")]
    sites: Option<String>,
    #[arg(long, alias = "N")]
    particles: Option<String>,
    #[arg(long)]
    seed_state: Option<String>,
    /// largest | full | domain-wall
    #[arg(long)]
    sector: Option<String>,
    #[arg(long)]
    rng_seed: Option<String>,
    /// Comma-separated disorder seeds.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    tolerance_kernel: Option<String>,
    /// `t_max:dt`
    #[arg(long)]
    times: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<String>,
    #[arg(long)]
    g: Option<String>,
    /// Sites to track: `i` on chains, `x:y` on rectangles.
    #[arg(long)]
    observe: Option<String>,
    /// seed | east-bound | east-bound-core | north-east-f1 | north-east-f2 | mpo
    #[arg(long)]
    initial: Option<String>,
    #[arg(long)]
    q_max: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    max_dim: Option<String>,
    #[arg(long)]
    cut: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    /// Include the slow table rows.
    #[arg(long)]
    heavy: bool,
}

impl Cli {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::parse(&std::fs::read_to_string(p).map_err(|e| {
                KcmError::Domain(format!("cannot read {}: {e}", p.display()))
            })?)?,
            None => RunConfig::default(),
        };
        cfg.set("task", &self.task)?;
        let flags = [
            ("variant", &self.variant),
            ("model", &self.model),
            ("range", &self.range),
            ("couplings", &self.couplings),
            ("sites", &self.sites),
            ("particles", &self.particles),
            ("seed_state", &self.seed_state),
            ("sector", &self.sector),
            ("rng_seed", &self.rng_seed),
            ("seeds", &self.seeds),
            ("out", &self.out),
            ("tolerance_kernel", &self.tolerance_kernel),
            ("times", &self.times),
            ("epsilon", &self.epsilon),
            ("g", &self.g),
            ("observe", &self.observe),
            ("initial", &self.initial),
            ("q_max", &self.q_max),
            ("samples", &self.samples),
            ("max_dim", &self.max_dim),
            ("cut", &self.cut),
            ("delta", &self.delta),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        if self.heavy {
            cfg.set("heavy", "true")?;
        }
        Ok(cfg)
    }
}

fn threads() -> Result<()> {
    if let Ok(v) = std::env::var("KCMLAB_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| KcmError::Parse(format!("KCMLAB_THREADS must be a number, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| KcmError::Domain(e.to_string()))?;
    }
    Ok(())
}

fn fail(task: &str, cfg: Option<&RunConfig>, err: &KcmError) -> ExitCode {
    let record = error_json(task, err);
    eprintln!("{record}");
    if let Some(cfg) = cfg {
        let dir = cfg.out_dir();
        if std::fs::create_dir_all(&dir).is_ok() {
            let _ = std::fs::write(dir.join("error.json"), format!("{record:#}\n"));
        }
    }
    ExitCode::from(exit_code(err) as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("", None, &KcmError::Parse(e.to_string().trim().to_string())),
    };
    let cfg = match threads().and_then(|_| cli.config()) {
        Ok(c) => c,
        Err(e) => return fail(&cli.task, None, &e),
    };
    match run(&cli.task, &cfg) {
        Ok(files) => {
            let summary = serde_json::json!({
                "task": cli.task,
                "config_hash": cfg.hash(),
                "out": cfg.out_dir(),
                "files": files,
            });
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&cli.task, Some(&cfg), &e),
    }
}

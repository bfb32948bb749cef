//! `ovsr` command-line driver.
//!
//! ```text
//! ovsr train --framework govsr --blocks 4+2 --filters 56 --alpha 0.01 --out runs/govsr
//! ovsr eval --checkpoint runs/govsr/model.ckpt --out runs/govsr/eval
//! ovsr eval --baseline bicubic --out runs/bicubic
//! ovsr ablate --checkpoint runs/govsr/model.ckpt --out runs/govsr/ablate
//! ovsr sweep --axis split --blocks 3+3 --out runs/split
//! ovsr degrade --input hr_frames --out lr_frames
//! ovsr bench --width 1280 --height 720 --out runs/bench
//! ```

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ovsr::{run, Command, RunConfig};

#[derive(Parser)]
#[command(name = "ovsr", version, about = "Omniscient video super-resolution at desk scale")]
struct Cli {
    /// Worker threads for batch-parallel kernels (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Train a model and write loss.csv and model.ckpt.
    Train(Common),
    /// Score a checkpoint (or bicubic upsampling) on the evaluation set.
    Eval(Common),
    /// Remove single inputs at inference and tabulate the PSNR change.
    Ablate(Common),
    /// Train and score a model per setting of the alpha or split axis.
    Sweep(Common),
    /// Blur and decimate a frame directory.
    Degrade(Common),
    /// Report parameters, FLOPs and wall time per frame.
    Bench(Common),
}

#[derive(Args)]
struct Common {
    /// key = value configuration file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Model name such as govsr-4+2-56 or hvsr-5-64.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    framework: Option<String>,
    /// `P+S` for omniscient models, a single count for baselines.
    #[arg(long)]
    blocks: Option<String>,
    #[arg(long)]
    filters: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    refine: Option<String>,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// `bicubic` evaluates plain bicubic upsampling.
    #[arg(long)]
    baseline: Option<String>,
    /// `alpha` or `split`.
    #[arg(long)]
    axis: Option<String>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
}

impl Common {
    fn resolve(&self) -> ovsr::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let path = |p: &PathBuf| p.display().to_string();
        let flags: [(&str, Option<String>); 15] = [
            ("model", self.model.clone()),
            ("framework", self.framework.clone()),
            ("blocks", self.blocks.clone()),
            ("filters", self.filters.map(|v| v.to_string())),
            ("alpha", self.alpha.map(|v| v.to_string())),
            ("refine", self.refine.clone()),
            ("iterations", self.iterations.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("checkpoint", self.checkpoint.as_ref().map(path)),
            ("baseline", self.baseline.clone()),
            ("sweep_axis", self.axis.clone()),
            ("input", self.input.as_ref().map(path)),
            ("bench_width", self.width.map(|v| v.to_string())),
            ("bench_height", self.height.map(|v| v.to_string())),
            ("output", self.out.as_ref().map(path)),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        for pair in &self.set {
            cfg.set_pair(pair)?;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    let (command, common) = match &cli.command {
        Sub::Train(c) => (Command::Train, c),
        Sub::Eval(c) => (Command::Eval, c),
        Sub::Ablate(c) => (Command::Ablate, c),
        Sub::Sweep(c) => (Command::Sweep, c),
        Sub::Degrade(c) => (Command::Degrade, c),
        Sub::Bench(c) => (Command::Bench, c),
    };
    let outcome = common.resolve().and_then(|cfg| run(command, &cfg));
    match outcome {
        Ok(o) => {
            // A closed stdout (e.g. piped into `head`) is not a failure: the
            // artifacts are already on disk.
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", o.summary.trim_end());
            for f in &o.files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use tcgan_cli::{
    cmd_ablate, cmd_eval, cmd_gen, cmd_sample, cmd_train, AblateArgs, CliError, EvalArgs, GenArgs,
    RunConfig, SampleArgs, TrainArgs,
};

/// Transition-conditioned image-to-image translation toolkit.
#[derive(Parser)]
#[command(name = "tcgan", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen(GenCli),
    /// Train a model from a config file.
    Train(TrainCli),
    /// Evaluate a trained run.
    Eval(EvalCli),
    /// Train the full model and its three ablations, emit an ordering table.
    Ablate(AblateCli),
    /// Render an edit/interpolation grid from a trained run.
    Sample(SampleCli),
}

#[derive(Args)]
struct GenCli {
    /// attr_edit | multi_domain | inpaint
    #[arg(long)]
    task: String,
    /// Number of samples.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Domains for multi_domain.
    #[arg(long, default_value_t = 4)]
    k_domains: usize,
    /// Square mask side for inpaint.
    #[arg(long, default_value_t = 12)]
    mask_size: usize,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct TrainCli {
    /// Config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Flat overrides, e.g. --set train.lr=0.0002 --set ablation=1
    #[arg(long = "set")]
    set: Vec<String>,
    /// Shortcut for --set ablation=N
    #[arg(long)]
    ablation: Option<u8>,
    /// Shortcut for --set train.gamma=X
    #[arg(long)]
    gamma: Option<f64>,
    /// Shortcut for --set train.seed=N
    #[arg(long)]
    seed: Option<u64>,
    /// Shortcut for --set train.total_steps=N
    #[arg(long)]
    steps: Option<usize>,
    /// Resume from a checkpoint file.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct EvalCli {
    #[arg(long)]
    run_dir: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Explicit checkpoint (default: latest in the run).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct AblateCli {
    #[arg(long)]
    config: PathBuf,
    #[arg(long = "set")]
    set: Vec<String>,
    /// Samples per accuracy battery.
    #[arg(long, default_value_t = 128)]
    n_eval: usize,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct SampleCli {
    #[arg(long)]
    run_dir: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Edit spec, e.g. "color=g,-size" or "0.5*d1+0.5*d2".
    #[arg(long)]
    edit: String,
    #[arg(long, default_value_t = 5)]
    n_inputs: usize,
    /// Interpolation strengths.
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
    alphas: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen(a) => cmd_gen(&GenArgs {
            task: a.task,
            n: a.n,
            seed: a.seed,
            out: a.out,
            k_domains: a.k_domains,
            mask_size: a.mask_size,
            force: a.force,
        }),
        Command::Train(a) => {
            let mut overrides = a.set.clone();
            if let Some(ab) = a.ablation {
                overrides.push(format!("ablation={ab}"));
            }
            if let Some(g) = a.gamma {
                overrides.push(format!("train.gamma={g}"));
            }
            if let Some(s) = a.seed {
                overrides.push(format!("train.seed={s}"));
            }
            if let Some(s) = a.steps {
                overrides.push(format!("train.total_steps={s}"));
            }
            let config = RunConfig::load_with_overrides(&a.config, &overrides)?;
            cmd_train(&TrainArgs {
                config,
                resume: a.resume,
                quiet: a.quiet,
            })
            .map(|dir| println!("{}", dir.display()))
        }
        Command::Eval(a) => cmd_eval(&EvalArgs {
            run_dir: a.run_dir,
            dataset: a.dataset,
            checkpoint: a.checkpoint,
            opts: Default::default(),
        })
        .map(|_| ()),
        Command::Ablate(a) => {
            let config = RunConfig::load_with_overrides(&a.config, &a.set)?;
            let table = cmd_ablate(&AblateArgs {
                config,
                n_eval: a.n_eval,
                quiet: a.quiet,
            })?;
            for row in &table.rows {
                println!(
                    "{:<10} {:<11} avg {:>7.4}  double {:>7.4}  proxy_fid {:>9.4}",
                    row.variant, row.status, row.average, row.avg_double, row.proxy_fid
                );
            }
            println!("{}", table.out_dir.display());
            Ok(())
        }
        Command::Sample(a) => cmd_sample(&SampleArgs {
            run_dir: a.run_dir,
            dataset: a.dataset,
            edit: a.edit,
            n_inputs: a.n_inputs,
            alphas: a.alphas,
            out: a.out,
            checkpoint: a.checkpoint,
        })
        .map(|_| ()),
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

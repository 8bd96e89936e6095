//! Command implementations behind the `tcgan` binary: dataset generation,
//! training, evaluation, ablation comparison and sampling grids.

pub mod config;
mod editspec;
mod plot;

pub use config::RunConfig;
pub use editspec::{parse_edit_spec, EditSpec};

use ndarray::{Array2, Array3, Axis};
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use tcgan::error::Error as CoreError;
use tcgan::eval::{
    attr_accuracy, edit_fid, evaluate, single_edit_battery, train_embedder, EvalOptions,
};
use tcgan::networks::generate;
use tcgan::scalar::fl;
use tcgan::tasks::{
    gen_inpaint, gen_multi_domain, gen_shapes_attr, load_dataset, save_dataset, save_png, Dataset,
    TaskKind,
};
use tcgan::trainer::{fit_from, load_state, FitOptions, TrainState};
use tcgan::types::{ImageBatch, Transition};

/// Training precision used by the binary.
pub type F = f32;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration (exit code 2).
    Usage(String),
    /// Failure while running (exit code 1).
    Runtime(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(m) => CliError::Usage(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

// ---- gen ----

pub struct GenArgs {
    pub task: String,
    pub n: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub k_domains: usize,
    pub mask_size: usize,
    pub force: bool,
}

pub fn cmd_gen(args: &GenArgs) -> Result<(), CliError> {
    if args.n == 0 {
        return Err(CliError::usage("n must be at least 1"));
    }
    let kind = TaskKind::parse(&args.task)?;
    if args.out.exists() {
        let non_empty = std::fs::read_dir(&args.out)?.next().is_some();
        if non_empty && !args.force {
            return Err(CliError::usage(format!(
                "output dir {} is not empty (use --force to overwrite)",
                args.out.display()
            )));
        }
    }
    let ds: Dataset<F> = match kind {
        TaskKind::AttrEdit => gen_shapes_attr(args.n, args.seed),
        TaskKind::MultiDomain => gen_multi_domain(args.n, args.k_domains, args.seed),
        TaskKind::Inpaint => gen_inpaint(args.n, args.mask_size, args.seed),
    };
    save_dataset(&ds, &args.out)?;
    println!(
        "wrote {} samples ({}) to {}",
        ds.len(),
        kind.name(),
        args.out.display()
    );
    Ok(())
}

// ---- train ----

pub struct TrainArgs {
    pub config: RunConfig,
    pub resume: Option<PathBuf>,
    pub quiet: bool,
}

/// Run one training job into its run directory; returns the directory.
pub fn cmd_train(args: &TrainArgs) -> Result<PathBuf, CliError> {
    let cfg = &args.config;
    let kind = TaskKind::parse(&cfg.task)?;
    let train_cfg = cfg.effective_train()?;
    let specs = cfg.effective_specs();
    let ds: Dataset<F> = load_dataset(&cfg.dataset)?;
    if ds.adapter.kind != kind {
        return Err(CliError::usage(format!(
            "dataset at {} holds task {}, config says {}",
            cfg.dataset.display(),
            ds.adapter.kind.name(),
            cfg.task
        )));
    }
    if ds.adapter.d_t != train_cfg.d_t {
        return Err(CliError::usage(format!(
            "dataset d_t {} vs config d_t {}",
            ds.adapter.d_t, train_cfg.d_t
        )));
    }

    let run_dir = cfg.run_dir();
    std::fs::create_dir_all(&run_dir)?;
    std::fs::write(run_dir.join("config.toml"), cfg.to_toml())?;
    std::fs::write(
        run_dir.join("version.txt"),
        format!(
            "version {VERSION}\nseed {}\nconfig {}\n",
            train_cfg.seed,
            cfg.hash8()
        ),
    )?;

    let (state, start_step) = match &args.resume {
        Some(ckpt) => {
            let (state, stored_cfg) = load_state::<F>(ckpt, Some(&specs))?;
            if stored_cfg != train_cfg {
                eprintln!("note: resuming with a different train config than stored");
            }
            let at = state.step;
            (state, at)
        }
        None => (TrainState::<F>::init(&specs, &train_cfg)?, 0),
    };
    let remaining = (train_cfg.total_steps as u64).saturating_sub(start_step) as usize;
    let opts = FitOptions {
        metrics_path: Some(run_dir.join("metrics.csv")),
        checkpoint_dir: Some(run_dir.join("checkpoints")),
        checkpoint_every: cfg.checkpoint_every,
        sample_dir: Some(run_dir.join("samples")),
        sample_every: cfg.sample_every,
        log_every: if args.quiet { 0 } else { 200 },
    };
    let (state, _) = fit_from(state, &ds, &train_cfg, &opts, remaining)?;
    if !args.quiet {
        eprintln!(
            "finished at step {} -> {}",
            state.step,
            run_dir.display()
        );
    }
    Ok(run_dir)
}

// ---- eval ----

pub struct EvalArgs {
    pub run_dir: PathBuf,
    pub dataset: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub opts: EvalOptions,
}

pub fn latest_checkpoint(run_dir: &Path) -> Result<PathBuf, CliError> {
    let dir = run_dir.join("checkpoints");
    let mut names: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|_| {
            CliError::runtime(format!("no checkpoints under {}", dir.display()))
        })?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().map(|e| e == "ckpt").unwrap_or(false))
        .collect();
    names.sort();
    names
        .pop()
        .ok_or_else(|| CliError::runtime(format!("no checkpoints under {}", dir.display())))
}

pub fn cmd_eval(args: &EvalArgs) -> Result<PathBuf, CliError> {
    let ckpt = match &args.checkpoint {
        Some(p) => p.clone(),
        None => latest_checkpoint(&args.run_dir)?,
    };
    if !ckpt.exists() {
        return Err(CliError::runtime(format!(
            "checkpoint {} does not exist",
            ckpt.display()
        )));
    }
    let (state, _cfg) = load_state::<F>(&ckpt, None)?;
    let ds: Dataset<F> = load_dataset(&args.dataset)?;
    let report = evaluate(&state.nets, &ds, &args.opts)?;
    let out_dir = args.run_dir.join("eval");
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::runtime(format!("serialize report: {e}")))?,
    )?;
    let mut f = std::fs::File::create(out_dir.join("summary.csv"))?;
    writeln!(f, "{}", tcgan::eval::EvalReport::CSV_HEADER)?;
    writeln!(f, "{}", report.to_csv_row())?;
    tcgan::trainer::write_sample_grid(&state.nets, &ds, &out_dir.join("grid.png"))?;
    println!(
        "ssim {:.4}  psnr {:.2}  proxy_fid {:.4}  attr_avg {:.4}  interp {:.4}  lipschitz {:.4}",
        report.ssim,
        report.psnr,
        report.proxy_fid,
        report.attr_accuracy.get("average").copied().unwrap_or(f64::NAN),
        report.interp_monotonicity,
        report.lipschitz_est
    );
    Ok(out_dir)
}

// ---- ablate ----

pub struct AblateArgs {
    pub config: RunConfig,
    pub n_eval: usize,
    pub quiet: bool,
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub variant: String,
    pub status: String,
    pub per_attr: Vec<(String, f64)>,
    pub average: f64,
    pub avg_double: f64,
    pub proxy_fid: f64,
}

pub struct AblationTable {
    pub rows: Vec<AblationRow>,
    pub out_dir: PathBuf,
}

pub fn variant_name(id: u8) -> &'static str {
    match id {
        0 => "full",
        1 => "ablation1",
        2 => "ablation2",
        3 => "ablation3",
        _ => "unknown",
    }
}

/// Train the full model and the three ablation variants with a shared seed,
/// score each with the oracle batteries and the Fréchet proxy (one shared
/// frozen embedder) and emit an ordering table plus a bar plot.
pub fn cmd_ablate(args: &AblateArgs) -> Result<AblationTable, CliError> {
    let base = &args.config;
    TaskKind::parse(&base.task)?;
    if base.task != "attr_edit" {
        return Err(CliError::usage(
            "ablate compares oracle accuracy and needs the attr_edit task",
        ));
    }
    let ds: Dataset<F> = load_dataset(&base.dataset)?;
    let out_dir = base.out_root().join(format!(
        "ablate-{}-s{}-{}",
        base.task,
        base.train.seed,
        base.hash8()
    ));
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(out_dir.join("config.toml"), base.to_toml())?;
    std::fs::write(
        out_dir.join("seed.txt"),
        format!("{}\n", base.train.seed),
    )?;
    // one frozen embedder scores every variant
    let embedder = train_embedder(&ds, 0xE0BED, 300)?;

    let mut rows = Vec::new();
    for id in config::ABLATION_IDS {
        let mut vcfg = base.clone();
        vcfg.ablation = id;
        vcfg.out_root = Some(out_dir.clone());
        vcfg.run_name = Some(variant_name(id).to_string());
        let trained = cmd_train(&TrainArgs {
            config: vcfg,
            resume: None,
            quiet: args.quiet,
        });
        let row = match trained {
            Ok(run_dir) => score_variant(&run_dir, &ds, &embedder, args.n_eval, id),
            Err(e) => Err(e),
        };
        match row {
            Ok(r) => rows.push(r),
            Err(e) => {
                eprintln!("variant {} failed: {e}", variant_name(id));
                rows.push(AblationRow {
                    variant: variant_name(id).to_string(),
                    status: "incomplete".into(),
                    per_attr: Vec::new(),
                    average: f64::NAN,
                    avg_double: f64::NAN,
                    proxy_fid: f64::NAN,
                });
            }
        }
    }

    let mut f = std::fs::File::create(out_dir.join("ablation.csv"))?;
    writeln!(
        f,
        "variant,status,color,brightness,size,border,average,average_double,proxy_fid"
    )?;
    for r in &rows {
        let get = |name: &str| {
            r.per_attr
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, v)| *v)
                .unwrap_or(f64::NAN)
        };
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{}",
            r.variant,
            r.status,
            get("color"),
            get("brightness"),
            get("size"),
            get("border"),
            r.average,
            r.avg_double,
            r.proxy_fid
        )?;
    }
    plot::accuracy_bars(&rows, &out_dir.join("ablation.png"))?;
    Ok(AblationTable { rows, out_dir })
}

fn score_variant(
    run_dir: &Path,
    ds: &Dataset<F>,
    embedder: &tcgan::eval::Embedder<F>,
    n_eval: usize,
    id: u8,
) -> Result<AblationRow, CliError> {
    let ckpt = latest_checkpoint(run_dir)?;
    let (state, _) = load_state::<F>(&ckpt, None)?;
    let singles = attr_accuracy(&state.nets.generator, ds, &single_edit_battery(), n_eval)?;
    let doubles = attr_accuracy(
        &state.nets.generator,
        ds,
        &tcgan::eval::double_edit_battery(),
        n_eval,
    )?;
    let fid = edit_fid(&state.nets.generator, ds, embedder, n_eval.max(64))?;
    Ok(AblationRow {
        variant: variant_name(id).to_string(),
        status: "ok".into(),
        per_attr: singles
            .per_attr
            .iter()
            .map(|(k, v)| (k.clone(), *v))
            .collect(),
        average: singles.average,
        avg_double: doubles.average,
        proxy_fid: fid,
    })
}

// ---- sample ----

pub struct SampleArgs {
    pub run_dir: PathBuf,
    pub dataset: PathBuf,
    pub edit: String,
    pub n_inputs: usize,
    pub alphas: Vec<f64>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

/// Interpolation grid: rows are inputs, columns sweep `G(x, alpha * t_edit)`.
pub fn cmd_sample(args: &SampleArgs) -> Result<PathBuf, CliError> {
    if args.n_inputs == 0 {
        return Err(CliError::usage("need at least one input row"));
    }
    let ckpt = match &args.checkpoint {
        Some(p) => p.clone(),
        None => latest_checkpoint(&args.run_dir)?,
    };
    let (state, _) = load_state::<F>(&ckpt, None)?;
    let ds: Dataset<F> = load_dataset(&args.dataset)?;
    let spec = parse_edit_spec(&args.edit, &ds.adapter)?;
    let n = args.n_inputs.min(ds.len());
    let side = ds.side();
    let c = ds.channels();
    let cols = args.alphas.len() + 1;
    let mut grid = Array3::<F>::from_elem((c, n * side, cols * side), 1.0f32);
    for (row, s) in ds.samples[..n].iter().enumerate() {
        let t_full = spec.transition_for(&ds.adapter, s)?;
        grid.slice_mut(ndarray::s![
            ..,
            row * side..(row + 1) * side,
            0..side
        ])
        .assign(&s.x);
        for (ci, &alpha) in args.alphas.iter().enumerate() {
            let t: Vec<F> = t_full.iter().map(|&v| fl::<F>(v * alpha)).collect();
            let t = Transition::new(Array2::from_shape_vec((1, t.len()), t).map_err(|e| {
                CliError::runtime(format!("transition shape: {e}"))
            })?)?;
            let x = ImageBatch::new(
                s.x.clone()
                    .insert_axis(Axis(0))
                    .into_dimensionality()
                    .map_err(|e| CliError::runtime(format!("batch shape: {e}")))?,
            )?;
            let out = generate(&state.nets.generator, &x, &t)?;
            let tile = out.data().index_axis(Axis(0), 0);
            grid.slice_mut(ndarray::s![
                ..,
                row * side..(row + 1) * side,
                (ci + 1) * side..(ci + 2) * side
            ])
            .assign(&tile);
        }
    }
    let out_path = args
        .out
        .clone()
        .unwrap_or_else(|| args.run_dir.join("samples").join("edit_grid.png"));
    if let Some(dir) = out_path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    save_png(&grid, &out_path)?;
    println!("wrote {}", out_path.display());
    Ok(out_path)
}

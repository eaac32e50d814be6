use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use shellmmc::config::RunConfig;
use shellmmc::io;
use shellmmc::model::{build_charts, build_surface, EvalOptions, Model};
use shellmmc::optimizer::{optimize, LoopSettings, Status};
use shellmmc::sensitivity::{fd_check, write_fd_csv};

/// Explicit topology, rib and sandwich optimization of thin-walled structures.
#[derive(Parser)]
#[command(name = "shellmmc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Solver threads; 1 gives bitwise reproducible runs.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the patch charts and report their distortion.
    Parameterize(Common),
    /// Write the initial component layout and its density field.
    Layout(Common),
    /// Run the optimization.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Start from a checkpoint design instead of the initial layout.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Solve on the full mesh every iteration.
        #[arg(long)]
        no_dof_removal: bool,
    },
    /// Compare analytic sensitivities with central finite differences.
    CheckGradients {
        #[command(flatten)]
        common: Common,
        /// Design to check (initial layout by default).
        #[arg(long)]
        design: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
        /// Design variable indices (all by default).
        #[arg(long, value_delimiter = ',')]
        indices: Option<Vec<usize>>,
    },
    /// Write the density and displacement VTK of a design.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        design: PathBuf,
        /// Output file name inside the output directory.
        #[arg(long, default_value = "design.vtk")]
        name: String,
    },
}

struct RunContext {
    cfg: RunConfig,
    out: PathBuf,
}

fn setup(common: &Common) -> Result<RunContext> {
    let cfg = RunConfig::load(&common.config).with_context(|| format!("loading {}", common.config.display()))?;
    if let Some(n) = common.threads.or(cfg.threads) {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        shellmmc::set_threads(n);
    }
    let out = common.output.clone().unwrap_or_else(|| cfg.output.dir.clone());
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok(RunContext { cfg, out })
}

fn initial_design(model: &Model, cfg: &RunConfig) -> Result<Vec<f64>> {
    let grids: Vec<[usize; 2]> = cfg.patches.iter().map(|p| p.grid).collect();
    Ok(model.initial_layout(&grids, cfg.initial_thickness_factor)?.flatten())
}

fn load_design(model: &Model, path: &Path) -> Result<Vec<f64>> {
    let d = io::read_design(path)?;
    if d.len() != model.space().n_vars() {
        bail!(
            "{}: design has {} variables, the configuration needs {}",
            path.display(),
            d.len(),
            model.space().n_vars()
        );
    }
    Ok(d)
}

fn cmd_parameterize(common: &Common) -> Result<ExitCode> {
    let ctx = setup(common)?;
    let surface = build_surface(&ctx.cfg.mesh)?;
    let charts = build_charts(&surface, &ctx.cfg)?;
    let mut patches = Vec::new();
    for (k, chart) in charts.iter().enumerate() {
        let mut buf = Vec::new();
        chart.write_uv_csv(&mut buf)?;
        io::write_atomic(&ctx.out.join(format!("patch_{k}_uv.csv")), &buf)?;
        let d = &chart.diagnostics;
        println!(
            "patch {k}: {} faces, mean|mu| {:.3e} -> {:.3e}, max|mu| {:.3e} -> {:.3e}, min area {:.3e}, flipped {}",
            chart.global_faces.len(),
            d.mean_mu_h,
            d.mean_mu_f,
            d.max_mu_h,
            d.max_mu_f,
            d.min_signed_area,
            d.flipped
        );
        patches.push(json!({
            "patch": k,
            "faces": chart.global_faces.len(),
            "width": chart.width,
            "height": chart.height,
            "mean_mu_harmonic": d.mean_mu_h,
            "max_mu_harmonic": d.max_mu_h,
            "mean_mu_unrevised": d.mean_mu_unrevised,
            "max_mu_unrevised": d.max_mu_unrevised,
            "mean_mu": d.mean_mu_f,
            "max_mu": d.max_mu_f,
            "min_signed_area": d.min_signed_area,
            "flipped_faces": d.flipped,
        }));
    }
    let text = serde_json::to_string_pretty(&json!({ "patches": patches }))?;
    io::write_atomic(&ctx.out.join("diagnostics.json"), text.as_bytes())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_layout(common: &Common) -> Result<ExitCode> {
    let ctx = setup(common)?;
    let model = Model::from_config(&ctx.cfg)?;
    let d = initial_design(&model, &ctx.cfg)?;
    io::write_design(&ctx.out.join("initial_design.txt"), &d)?;
    let ev = model.evaluate_flat(&d, EvalOptions::default())?;
    io::write_vtk(
        &ctx.out.join("initial.vtk"),
        model.solid(),
        &ev.element_density,
        &ev.solution.u,
    )?;
    println!(
        "components {}  thickness factor {}  initial volume fraction {:.6}  compliance {:.6e}",
        model.space().n_vars() / shellmmc::components::N_VARS,
        ctx.cfg.initial_thickness_factor,
        ev.volume_fraction,
        ev.compliance
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_optimize(common: &Common, resume: Option<&Path>, no_dof_removal: bool) -> Result<ExitCode> {
    let ctx = setup(common)?;
    let model = Model::from_config(&ctx.cfg)?;
    let d0 = match resume {
        Some(p) => load_design(&model, p)?,
        None => initial_design(&model, &ctx.cfg)?,
    };
    let dof_removal = ctx.cfg.optimizer.dof_removal && !no_dof_removal;
    let settings = LoopSettings {
        tol: ctx.cfg.optimizer.tol,
        max_iterations: ctx.cfg.optimizer.max_iterations,
        volume_bound: ctx.cfg.volume_bound,
        mma: ctx.cfg.optimizer.mma,
    };
    let every = ctx.cfg.optimizer.checkpoint_every;
    let history_path = ctx.out.join("history.csv");
    let mut history_text = io::history_header(dof_removal) + "\n";
    let mut problem = model.problem(dof_removal);
    let out = ctx.out.clone();
    let result = optimize(&mut problem, model.space(), &d0, &settings, &mut |row, d| {
        history_text.push_str(&io::history_line(row, dof_removal));
        history_text.push('\n');
        io::write_atomic(&history_path, history_text.as_bytes())?;
        if every > 0 && row.iteration % every == 0 {
            io::write_design(&out.join("checkpoint.txt"), d)?;
        }
        Ok(())
    })?;
    io::write_design(&ctx.out.join("final_design.txt"), &result.design)?;
    if ctx.cfg.output.vtk {
        let ev = model.evaluate_flat(&result.design, EvalOptions::default())?;
        io::write_vtk(&ctx.out.join("final.vtk"), model.solid(), &ev.element_density, &ev.solution.u)?;
    }
    let last = result.history.last().expect("at least one evaluation");
    println!(
        "{} after {} iterations: compliance {:.6e}, volume fraction {:.6}",
        match result.status {
            Status::Converged => "converged",
            Status::MaxIterations => "iteration limit reached",
        },
        last.iteration,
        last.compliance,
        last.volume_fraction
    );
    Ok(match result.status {
        Status::Converged => ExitCode::SUCCESS,
        Status::MaxIterations => ExitCode::from(2),
    })
}

fn cmd_check_gradients(
    common: &Common,
    design: Option<&Path>,
    step: f64,
    indices: Option<&[usize]>,
) -> Result<ExitCode> {
    let ctx = setup(common)?;
    let model = Model::from_config(&ctx.cfg)?;
    let d = match design {
        Some(p) => load_design(&model, p)?,
        None => initial_design(&model, &ctx.cfg)?,
    };
    let idx: Vec<usize> = match indices {
        Some(i) => i.to_vec(),
        None => (0..d.len()).collect(),
    };
    let ev = model.evaluate_flat(
        &d,
        EvalOptions {
            gradient: true,
            dof_removal: false,
        },
    )?;
    let sens = ev.sensitivities.expect("gradient requested");
    let c = fd_check(
        |x| model.evaluate_flat(x, EvalOptions::default()).map(|e| e.compliance),
        &d,
        &sens.compliance,
        &idx,
        step,
    )?;
    let v = fd_check(
        |x| model.evaluate_flat(x, EvalOptions::default()).map(|e| e.volume_fraction),
        &d,
        &sens.volume,
        &idx,
        step,
    )?;
    let mut buf = Vec::new();
    write_fd_csv(&mut buf, &[("compliance", &c), ("volume", &v)])?;
    io::write_atomic(&ctx.out.join("gradient_check.csv"), &buf)?;
    let flagged = c.iter().chain(&v).filter(|e| e.flagged).count();
    let worst = c.iter().chain(&v).map(|e| e.rel_error).fold(0.0, f64::max);
    println!(
        "{} entries checked, {flagged} flagged, worst relative error {worst:.3e}",
        c.len() + v.len()
    );
    Ok(if flagged == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_export(common: &Common, design: &Path, name: &str) -> Result<ExitCode> {
    let ctx = setup(common)?;
    let model = Model::from_config(&ctx.cfg)?;
    let d = load_design(&model, design)?;
    let ev = model.evaluate_flat(&d, EvalOptions::default())?;
    io::write_vtk(&ctx.out.join(name), model.solid(), &ev.element_density, &ev.solution.u)?;
    println!(
        "compliance {:.6e}, volume fraction {:.6}",
        ev.compliance, ev.volume_fraction
    );
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Parameterize(c) => cmd_parameterize(c),
        Command::Layout(c) => cmd_layout(c),
        Command::Optimize {
            common,
            resume,
            no_dof_removal,
        } => cmd_optimize(common, resume.as_deref(), *no_dof_removal),
        Command::CheckGradients {
            common,
            design,
            step,
            indices,
        } => cmd_check_gradients(common, design.as_deref(), *step, indices.as_deref()),
        Command::Export { common, design, name } => cmd_export(common, design, name),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

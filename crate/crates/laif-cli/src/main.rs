//! `laif` command-line front end.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use laif::dsl::{self, DslError};
use laif::planning::{
    classical_select, classical_table, laif_infer_policy, original_gfe_run, LaifConfig, Policy, PolicyEvaluation,
};
use laif::render::{compress, export_dot, to_render_graph};
use laif::tmaze::{run_experiment, tmaze_pomdp, ExperimentResult, TmazeConfig, TmazeError};
use log::{debug, info};
use serde::Serialize;

const EXIT_USAGE: u8 = 2;
const EXIT_FAILURE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "laif", version, about = "Lagrangian active inference on constrained factor graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Infer T-maze control posteriors by message passing.
    Tmaze(TmazeArgs),
    /// Score or infer T-maze policies with one of the planning methods.
    Policies(PoliciesArgs),
    /// Parse, validate, compress or render a CFFG model file.
    Cffg(CffgArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Efe,
    Gfe,
    Laif,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Dot,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Reward utility.
    #[arg(long = "c", default_value_t = 2.0, allow_negative_numbers = true)]
    c_utility: f64,
    /// Reward-arm cue reliability.
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    /// Newton steps per composite-node update.
    #[arg(long, default_value_t = 20)]
    newton_steps: usize,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Debug, Args)]
struct TmazeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 2)]
    iterations: usize,
    /// δ-constrain the control marginals.
    #[arg(long)]
    delta_controls: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also play the modal plan in a simulated maze.
    #[arg(long)]
    closed_loop: bool,
}

#[derive(Debug, Args)]
struct PoliciesArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum)]
    method: Method,
    /// Message-passing iterations (default 8 for gfe, 2 for laif).
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    delta_controls: bool,
}

#[derive(Debug, Args)]
struct CffgArgs {
    file: PathBuf,
    /// Validate only and print `OK`.
    #[arg(long)]
    check: bool,
    /// Compress the rendered graph.
    #[arg(long)]
    compress: bool,
    /// Render instead of echoing the canonical model text.
    #[arg(long, value_enum)]
    out: Option<OutFormat>,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    fn failed(message: impl Into<String>) -> Self {
        Self { code: EXIT_FAILURE, message: message.into() }
    }
}

impl From<TmazeError> for Failure {
    fn from(e: TmazeError) -> Self {
        match e {
            TmazeError::InvalidConfig(_) => Failure::usage(e.to_string()),
            TmazeError::Planning(_) => Failure::failed(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("AIF_LOG")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Tmaze(args) => cmd_tmaze(&args),
        Command::Policies(args) => cmd_policies(&args),
        Command::Cffg(args) => cmd_cffg(&args),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn config(model: &ModelArgs, iterations: usize, delta_controls: bool, seed: u64, closed_loop: bool) -> TmazeConfig {
    TmazeConfig {
        c_utility: model.c_utility,
        alpha: model.alpha,
        iterations,
        newton_steps: model.newton_steps,
        delta_controls,
        seed,
        closed_loop,
    }
}

fn json(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("serialisable") + "\n"
}

fn posterior_table(out: &mut String, steps: &[Vec<f64>]) {
    let n = steps.first().map_or(0, Vec::len);
    let header: String = (1..=n).map(|u| format!("{:>6}", format!("u={u}"))).collect();
    let _ = writeln!(out, "{:<6}{header}", "step");
    for (k, q) in steps.iter().enumerate() {
        let row: String = q.iter().map(|p| format!("{p:>6.2}")).collect();
        let _ = writeln!(out, "{:<6}{row}", k + 1);
    }
}

fn tmaze_table(r: &ExperimentResult) -> String {
    let c = &r.config;
    let mut out = format!(
        "T-maze control posteriors (c = {}, alpha = {}, {} iterations{})\n",
        c.c_utility,
        c.alpha,
        c.iterations,
        if c.delta_controls { ", delta-constrained controls" } else { "" }
    );
    posterior_table(&mut out, &r.control_posteriors);
    out.push('\n');
    let _ = writeln!(out, "{:<11}{:>12}{:>12}{:>14}", "iteration", "U_x slot 1", "U_x slot 2", "free energy");
    for (i, (u, f)) in r.slot_energies.iter().zip(&r.iteration_energies).enumerate() {
        let _ = writeln!(out, "{:<11}{:>12.6}{:>12.6}{:>14.6}", i + 1, u[0], u[1], f);
    }
    if let Some(ep) = &r.episode {
        let _ = writeln!(out, "\nepisode (reward in arm {})", ep.reward_arm);
        for s in &ep.steps {
            let _ = writeln!(out, "  control {} -> position {}, observation {}", s.control, s.position, s.observation);
        }
    }
    out
}

fn cmd_tmaze(args: &TmazeArgs) -> Result<String, Failure> {
    let cfg = config(&args.model, args.iterations, args.delta_controls, args.seed, args.closed_loop);
    info!("running T-maze experiment with {cfg:?}");
    let r = run_experiment(&cfg)?;
    Ok(match args.model.format {
        Format::Json => json(&r),
        Format::Table => tmaze_table(&r),
    })
}

#[derive(Debug, Serialize)]
struct PolicyRow {
    policy: Vec<usize>,
    total: f64,
    slot_energies: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    efe_total: Option<f64>,
}

#[derive(Debug, Serialize)]
struct PolicyReport {
    method: &'static str,
    config: TmazeConfig,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    policies: Vec<PolicyRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    control_posteriors: Option<Vec<Vec<f64>>>,
    selected: Vec<usize>,
}

fn cmd_policies(args: &PoliciesArgs) -> Result<String, Failure> {
    let iterations = args.iterations.unwrap_or(if args.method == Method::Gfe { 8 } else { 2 });
    let cfg = config(&args.model, iterations, args.delta_controls, 0, false);
    let model = tmaze_pomdp(&cfg)?;
    let failed = |e: laif::planning::PlanningError| Failure::failed(e.to_string());
    let efe = classical_table(&model).map_err(failed)?;
    let report = match args.method {
        Method::Efe => {
            let selected = classical_select(&efe).map_err(failed)?;
            let rows = efe.iter().map(|ev| row(ev, None)).collect();
            PolicyReport { method: "efe", config: cfg, policies: rows, control_posteriors: None, selected: selected.labels() }
        }
        Method::Gfe => {
            let mut scored = Vec::with_capacity(efe.len());
            let mut rows = Vec::with_capacity(efe.len());
            for ev in &efe {
                let run = original_gfe_run(&model, &[], &ev.policy, iterations, cfg.newton()).map_err(failed)?;
                debug!("policy {}: GFE {} vs EFE {}", ev.policy, run.total, ev.total);
                let scored_ev =
                    PolicyEvaluation { policy: ev.policy.clone(), slot_energies: run.slot_energies, total: run.total };
                rows.push(row(&scored_ev, Some(ev.total)));
                scored.push(scored_ev);
            }
            let selected = classical_select(&scored).map_err(failed)?;
            PolicyReport { method: "gfe", config: cfg, policies: rows, control_posteriors: None, selected: selected.labels() }
        }
        Method::Laif => {
            let laif = LaifConfig { newton: cfg.newton(), delta_controls: cfg.delta_controls, seed: 0 };
            let r = laif_infer_policy(&model, iterations, &laif).map_err(failed)?;
            let post = r.posterior();
            PolicyReport {
                method: "laif",
                config: cfg,
                policies: Vec::new(),
                control_posteriors: Some(post.steps.clone()),
                selected: post.modes().labels(),
            }
        }
    };
    Ok(match args.model.format {
        Format::Json => json(&report),
        Format::Table => policies_table(&report),
    })
}

fn row(ev: &PolicyEvaluation, efe_total: Option<f64>) -> PolicyRow {
    PolicyRow { policy: ev.policy.labels(), total: ev.total, slot_energies: ev.slot_energies.clone(), efe_total }
}

fn policies_table(r: &PolicyReport) -> String {
    let selected = Policy::new(r.selected.iter().map(|c| c - 1).collect());
    let mut out = String::new();
    if let Some(post) = &r.control_posteriors {
        let _ = writeln!(out, "LAIF control posteriors ({} iterations)", r.config.iterations);
        posterior_table(&mut out, post);
    } else {
        let gfe = r.method == "gfe";
        let _ = write!(out, "{:<10}{:>12}{:>12}{:>12}", "policy", "slot 1", "slot 2", "G");
        if gfe {
            let _ = write!(out, "{:>12}{:>12}", "EFE", "G - EFE");
        }
        out.push('\n');
        for p in &r.policies {
            let label = Policy::new(p.policy.iter().map(|c| c - 1).collect()).to_string();
            let _ = write!(out, "{label:<10}{:>12.6}{:>12.6}{:>12.6}", p.slot_energies[0], p.slot_energies[1], p.total);
            if let Some(e) = p.efe_total {
                let _ = write!(out, "{e:>12.6}{:>12.2e}", p.total - e);
            }
            out.push('\n');
        }
    }
    let _ = writeln!(out, "selected {selected}");
    out
}

fn cmd_cffg(args: &CffgArgs) -> Result<String, Failure> {
    let text = std::fs::read_to_string(&args.file)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", args.file.display())))?;
    let (graph, schedule) = dsl::parse(&text).map_err(|e| {
        let shown = match &e {
            DslError::Validation(vs) => vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n"),
            other => other.to_string(),
        };
        let message = format!("{}: {shown}", args.file.display());
        if e.is_syntax() {
            Failure::usage(message)
        } else {
            Failure::failed(message)
        }
    })?;
    info!("parsed {} nodes and {} edges", graph.nodes().len(), graph.edges().len());
    if args.check {
        return Ok("OK\n".into());
    }
    Ok(match args.out {
        Some(OutFormat::Dot) => {
            let r = to_render_graph(&graph);
            export_dot(&if args.compress { compress(&r) } else { r })
        }
        None if args.compress => {
            return Err(Failure::usage("--compress needs an output format (--out dot)"));
        }
        None => dsl::print_with_schedule(&graph, schedule.as_ref()),
    })
}

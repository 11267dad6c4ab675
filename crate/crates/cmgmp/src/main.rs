//! Command-line driver: plan / validate / modes / sites.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 planner failure,
//! 3 validation failure.

use clap::{Parser, Subcommand};
use cmgmp::geometry::Pose;
use cmgmp::modes::{enumerate_cs_modes, enumerate_ss_modes, CsLabel, EnvContact, TangentBasis};
use cmgmp::planner::{Planner, PlanOutcome};
use cmgmp::task::{load_task_file, task_hash};
use cmgmp::trajectory::TrajectoryFile;
use cmgmp::validate::validate;
use cmgmp::{collision, modes};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cmgmp", about = "Contact-mode-guided quasidynamic manipulation planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a trajectory for a task file.
    Plan {
        task: PathBuf,
        /// Override the task's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the task's iteration budget.
        #[arg(long)]
        max_iters: Option<usize>,
        /// Write the trajectory here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a trajectory against its task, independently of the planner.
    Validate { task: PathBuf, trajectory: PathBuf },
    /// List contacts and contact modes at the start pose.
    Modes { task: PathBuf },
    /// Emit candidate finger sites as CSV (object frame).
    Sites {
        task: PathBuf,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Plan {
            task,
            seed,
            max_iters,
            out,
        } => cmd_plan(&task, seed, max_iters, out.as_deref()),
        Command::Validate { task, trajectory } => cmd_validate(&task, &trajectory),
        Command::Modes { task } => cmd_modes(&task),
        Command::Sites { task, count, seed } => cmd_sites(&task, count, seed),
    }
}

fn cmd_plan(
    path: &std::path::Path,
    seed: Option<u64>,
    max_iters: Option<usize>,
    out: Option<&std::path::Path>,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(path)?;
    let mut file = cmgmp::task::TaskFile::parse(&text)?;
    if let Some(s) = seed {
        file.planner.rng_seed = s;
    }
    if let Some(m) = max_iters {
        file.planner.max_iters = m;
    }
    let task = file.build()?;
    let started = std::time::Instant::now();
    let outcome = Planner::new(&task)?.plan()?;
    let elapsed = started.elapsed().as_secs_f64();
    match outcome {
        PlanOutcome::Success(plan) => {
            let traj = TrajectoryFile::from_plan(
                &plan,
                &task_hash(&text),
                task.planner.rng_seed,
                task.quasidynamic,
            );
            let body = traj.emit()?;
            match out {
                Some(p) => std::fs::write(p, &body)?,
                None => print!("{body}"),
            }
            eprintln!(
                "time_s={elapsed:.3} nodes_solution={} nodes_tree={}",
                plan.nodes_solution, plan.nodes_tree
            );
            Ok(ExitCode::from(0))
        }
        PlanOutcome::Failure {
            nodes_tree,
            best_distance,
        } => {
            eprintln!(
                "planning failed: best distance to goal {best_distance:.4} with {nodes_tree} tree nodes"
            );
            eprintln!("time_s={elapsed:.3} nodes_solution=0 nodes_tree={nodes_tree}");
            Ok(ExitCode::from(2))
        }
    }
}

fn cmd_validate(
    task_path: &std::path::Path,
    traj_path: &std::path::Path,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(task_path)?;
    let task = cmgmp::task::TaskFile::parse(&text)?.build()?;
    let traj = TrajectoryFile::parse(&std::fs::read_to_string(traj_path)?)?;
    let report = validate(&task, &text, &traj)?;
    if report.ok() {
        println!("valid: {} steps", report.steps);
        Ok(ExitCode::from(0))
    } else {
        for v in &report.violations {
            eprintln!("violation: {v}");
        }
        eprintln!("{} violation(s) over {} steps", report.violations.len(), report.steps);
        Ok(ExitCode::from(3))
    }
}

fn cmd_modes(path: &std::path::Path) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let (file, _) = load_task_file(path)?;
    let task = file.build()?;
    let basis = TangentBasis::default();
    let contacts = collision::detect_contacts(
        &task.body,
        &task.start,
        &task.env,
        task.planner.d_contact,
    )?;
    println!("contacts at start: {}", contacts.len());
    for (i, c) in contacts.iter().enumerate() {
        println!(
            "  [{i}] p=({:.4}, {:.4}, {:.4}) n=({:.3}, {:.3}, {:.3}) d={:.2e}",
            c.position.x, c.position.y, c.position.z, c.normal.x, c.normal.y, c.normal.z,
            c.signed_distance
        );
    }
    let env: Vec<EnvContact> = contacts
        .iter()
        .map(|c| EnvContact {
            point: c.clone(),
            grasp: modes::build_grasp_map(c, &start_pose(&task)),
        })
        .collect();
    let cs_list = enumerate_cs_modes(&env, modes::N_MAX_DEFAULT)?;
    println!("cs modes: {}", cs_list.len());
    let mut total = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(task.planner.rng_seed);
    for cs in &cs_list {
        let label: String = cs
            .iter()
            .map(|l| if *l == CsLabel::Maintain { 'M' } else { 'S' })
            .collect();
        let ss = enumerate_ss_modes(cs, &env, &basis, usize::MAX, &mut rng)?;
        println!("  {label}: {} ss completions", ss.len());
        total += ss.len();
    }
    println!("total full modes: {total}");
    Ok(ExitCode::from(0))
}

fn start_pose(task: &cmgmp::task::Task) -> Pose {
    task.start
}

fn cmd_sites(
    path: &std::path::Path,
    count: usize,
    seed: u64,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let (file, _) = load_task_file(path)?;
    let task = file.build()?;
    let sites = collision::sample_finger_sites(&task.body, count, seed)?;
    println!("x,y,z,nx,ny,nz");
    for s in &sites {
        println!(
            "{},{},{},{},{},{}",
            s.position.x, s.position.y, s.position.z, s.normal.x, s.normal.y, s.normal.z
        );
    }
    Ok(ExitCode::from(0))
}

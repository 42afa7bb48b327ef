//! Command-line front end.
//!
//! Exit codes: 0 success, 1 infeasible (no feasible path, unreachable goal or a
//! timed-out simulation), 2 usage or parse error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::PlanError;
use crate::flow::run_flows;
use crate::multi::{simulate, AgentSpec, SimConfig, SimStatus};
use crate::planner::{greedy_plan, sample_paths, Horizon, NullPolicy, Scenario};
use crate::render::{render_frame, render_marginal, render_world, Format};
use crate::scenario::{parse_scenario, path_to_csv, Parsed, ScenarioError, WorldSpec};

#[derive(Debug, Parser)]
#[command(name = "probflow", about = "Path planning with forward/backward probability flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Override the horizon from the scenario header.
    #[arg(long, global = true)]
    horizon: Option<usize>,

    /// Behavior when the posterior vanishes.
    #[arg(long, global = true, value_enum)]
    policy: Option<PolicyArg>,

    /// Frame format for `flows` and `simulate`.
    #[arg(long, global = true, value_enum, default_value = "ascii")]
    format: FormatArg,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Greedy path as CSV on stdout.
    Plan { file: PathBuf },
    /// Print the minimum feasible horizon.
    Mintime { file: PathBuf },
    /// Write forward, backward and posterior frames for every time slice.
    Flows {
        file: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Sampled paths as CSV on stdout.
    Sample {
        file: PathBuf,
        #[arg(long = "n", default_value_t = 10)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a multi-agent simulation and write its trace.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    Abort,
    Wait,
    Sample,
}

impl From<PolicyArg> for NullPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Abort => NullPolicy::Abort,
            PolicyArg::Wait => NullPolicy::Wait,
            PolicyArg::Sample => NullPolicy::SampleForward,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Ascii,
    Pixmap,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Ascii => Format::Ascii,
            FormatArg::Pixmap => Format::Pixmap,
        }
    }
}

enum Failure {
    Infeasible(String),
    Usage(String),
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::NoFeasiblePath { .. } => Failure::Infeasible("no feasible path".into()),
            PlanError::Unreachable { t_max } => Failure::Infeasible(format!("goal unreachable within {t_max} slices")),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Plan(p) => p.into(),
            parse => Failure::Usage(parse.to_string()),
        }
    }
}

fn io_err(path: &FsPath, e: std::io::Error) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

/// Parse `args` (program name first), run the subcommand and return the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(&cli, stdout) {
        Ok(()) => 0,
        Err(Failure::Infeasible(msg)) => {
            let _ = writeln!(stderr, "{msg}");
            1
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
    }
}

fn load(path: &FsPath) -> Result<Parsed, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_scenario(&text).map_err(|e| match e {
        ScenarioError::Parse { .. } => Failure::Usage(format!("{}: {e}", path.display())),
        other => other.into(),
    })
}

fn load_single(cli: &Cli, path: &FsPath) -> Result<Scenario, Failure> {
    match load(path)? {
        Parsed::Single(mut s) => {
            if let Some(t) = cli.horizon {
                s.horizon = Horizon::Fixed(t);
            }
            if let Some(p) = cli.policy {
                s.policy = p.into();
            }
            Ok(s)
        }
        Parsed::Multi(_) => Err(Failure::Usage(format!("{}: expected a single-agent scenario", path.display()))),
    }
}

fn write_file(path: &FsPath, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn out(stdout: &mut dyn Write, text: &str) -> Result<(), Failure> {
    stdout.write_all(text.as_bytes()).map_err(|e| Failure::Usage(e.to_string()))
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> Result<(), Failure> {
    match &cli.command {
        Command::Plan { file } => {
            let s = load_single(cli, file)?;
            let path = greedy_plan(&s)?;
            if !path.reached_goal {
                out(stdout, &path_to_csv(&path))?;
                return Err(Failure::Infeasible("no feasible path".into()));
            }
            out(stdout, &path_to_csv(&path))
        }
        Command::Mintime { file } => {
            let s = load_single(cli, file)?;
            let s = match s.horizon {
                Horizon::Fixed(_) => {
                    let t_max = 4 * s.map.n_cells() + 1;
                    s.with_horizon(Horizon::AutoMin { t_max })
                }
                Horizon::AutoMin { .. } => s,
            };
            let model = s.model()?;
            let t = s.resolve_horizon(&model)?;
            out(stdout, &format!("{t}\n"))
        }
        Command::Flows { file, out_dir } => {
            let s = load_single(cli, file)?;
            let model = s.model()?;
            let horizon = s.resolve_horizon(&model)?.max(2);
            let flows = run_flows(&model.kernel, &model.pa, s.start, &s.start_actions(&model.pa), &model.goal, horizon)?;
            fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
            let format: Format = cli.format.into();
            let ext = format.extension();
            for t in 1..horizon {
                for (kind, msg) in [("forward", flows.forward(t)), ("backward", flows.backward(t)), ("posterior", flows.posterior(t))] {
                    write_file(&out_dir.join(format!("{kind}_t{t:03}.{ext}")), &render_frame(msg, &s.map, format))?;
                }
            }
            for (kind, m) in [
                ("forward", flows.forward_final()),
                ("backward", flows.backward_final()),
                ("posterior", flows.posterior_final()),
            ] {
                write_file(&out_dir.join(format!("{kind}_t{horizon:03}.{ext}")), &render_marginal(m, &s.map, format))?;
            }
            out(stdout, &format!("wrote {} frames for T = {horizon} to {}\n", 3 * horizon, out_dir.display()))
        }
        Command::Sample { file, count, seed } => {
            let mut s = load_single(cli, file)?;
            if let Some(seed) = seed {
                s.seed = *seed;
            }
            let paths = sample_paths(&s, *count)?;
            let mut text = String::from("sample,t,row,col,action\n");
            for (k, p) in paths.iter().enumerate() {
                for line in path_to_csv(p).lines().skip(1) {
                    text.push_str(&format!("{k},{line}\n"));
                }
            }
            out(stdout, &text)
        }
        Command::Simulate { file, out_dir } => {
            let world = match load(file)? {
                Parsed::Multi(w) => w,
                Parsed::Single(s) => {
                    let mut agent = AgentSpec::new(1, s.start, s.goals[0].0);
                    agent.goals = s.goals.clone();
                    agent.sharpness = s.sharpness;
                    agent.stiffness = s.stiffness;
                    let t_max = match s.horizon {
                        Horizon::Fixed(t) => t,
                        Horizon::AutoMin { t_max } => t_max,
                    };
                    WorldSpec { map: s.map, agents: vec![agent], config: SimConfig { t_max, seed: s.seed, ..SimConfig::default() } }
                }
            };
            run_simulation(cli, world, out_dir, stdout)
        }
    }
}

fn run_simulation(cli: &Cli, mut world: WorldSpec, out_dir: &FsPath, stdout: &mut dyn Write) -> Result<(), Failure> {
    if let Some(t) = cli.horizon {
        world.config.t_max = t;
    }
    if let Some(p) = cli.policy {
        world.agents.iter_mut().for_each(|a| a.policy = p.into());
    }
    let outcome = simulate(&world.agents, &world.map, &world.config)?;
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let ids: Vec<usize> = world.agents.iter().map(|a| a.id).collect();
    let goals: Vec<Vec<_>> = world.agents.iter().map(|a| a.goals.iter().map(|g| g.0).collect()).collect();
    let format: Format = cli.format.into();
    match format {
        Format::Ascii => {
            let mut text = String::new();
            for state in &outcome.trace {
                text.push_str(&format!("t = {}\n", state.t));
                text.push_str(&String::from_utf8_lossy(&render_world(state, &ids, &goals, &world.map, format)));
                text.push('\n');
            }
            write_file(&out_dir.join("trace.txt"), text.as_bytes())?;
        }
        Format::Pixmap => {
            for state in &outcome.trace {
                let name = format!("frame_t{:03}.ppm", state.t);
                write_file(&out_dir.join(name), &render_world(state, &ids, &goals, &world.map, format))?;
            }
        }
    }
    for (spec, path) in world.agents.iter().zip(&outcome.paths) {
        write_file(&out_dir.join(format!("agent_{}.csv", spec.id)), path_to_csv(path).as_bytes())?;
    }
    let slices = outcome.trace.len();
    match outcome.status {
        SimStatus::Completed => {
            out(stdout, &format!("all {} agents arrived in {slices} slices ({} waits)\n", ids.len(), outcome.wait_count()))
        }
        SimStatus::TimedOut => {
            let active = outcome.paths.iter().filter(|p| !p.reached_goal).count();
            Err(Failure::Infeasible(format!("timed out after {slices} slices with {active} agents still active")))
        }
    }
}

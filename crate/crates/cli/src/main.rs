//! Batch front-end: plan a job from a config file, post a CL file through
//! the inverse kinematics, or profile an existing CL/NC program.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fiveaxis::job::{self, JobError, RunOptions};
use fiveaxis::report::{self, SummaryData};
use fiveaxis::simulate;
use fiveaxis::{clfile, gcode, load_config, JobConfig};

#[derive(Parser)]
#[command(name = "fiveaxis", version, about = "5-axis toolpath planner and kinematic simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: generate, optimize, and write all artifacts.
    Plan {
        /// Job config (TOML).
        config: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Skip the tilt-field optimization loop.
        #[arg(long)]
        no_optimize: bool,
    },
    /// Inverse-transform an existing CL file and emit the NC program.
    Post {
        /// CL file with GOTO records.
        clfile: PathBuf,
        /// Job config (TOML) providing the machine description.
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Profile an existing CL or NC file (report + summary only).
    Simulate {
        /// CL or NC program.
        program: PathBuf,
        /// Job config (TOML) providing the machine description.
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Output directory for artifacts.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads for data-parallel phases (default: logical cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Fail with exit 5 when residual constraint violations remain.
    #[arg(long)]
    strict: bool,
    #[arg(long, short)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Plan {
            config,
            common,
            no_optimize,
        } => plan(&config, &common, no_optimize),
        Command::Post {
            clfile,
            config,
            common,
        } => post(&clfile, &config, &common),
        Command::Simulate {
            program,
            config,
            common,
        } => profile(&program, &config, &common),
    };
    match code {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

type CmdResult = Result<(), (u8, String)>;

fn fail(code: u8, msg: impl std::fmt::Display) -> (u8, String) {
    (code, msg.to_string())
}

fn read_config(path: &PathBuf) -> Result<JobConfig, (u8, String)> {
    load_config(path).map_err(|e| fail(2, e))
}

fn workers(common: &Common) -> usize {
    common
        .workers
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .max(1)
}

fn plan(config_path: &PathBuf, common: &Common, no_optimize: bool) -> CmdResult {
    let config = read_config(config_path)?;
    let opts = RunOptions {
        out_dir: common.out_dir.clone(),
        optimize: !no_optimize,
        strict: common.strict,
        workers: workers(common),
        verbose: common.verbose,
    };
    match job::run(&config, &opts) {
        Ok(art) => {
            if common.verbose {
                print!("{}", art.summary_text);
            }
            println!(
                "wrote {} {} {} {} {}",
                art.cl_file.display(),
                art.nc_file.display(),
                art.report_csv.display(),
                art.field_csv.display(),
                art.summary.display()
            );
            Ok(())
        }
        Err(e) => Err(fail(e.exit_code() as u8, &e)),
    }
}

fn read_input(path: &PathBuf) -> Result<String, (u8, String)> {
    std::fs::read_to_string(path).map_err(|e| fail(2, format!("cannot read {}: {e}", path.display())))
}

fn write_artifact(path: &PathBuf, content: &str) -> CmdResult {
    std::fs::write(path, content)
        .map_err(|e| fail(3, format!("cannot write {}: {e}", path.display())))
}

fn post(cl_path: &PathBuf, config_path: &PathBuf, common: &Common) -> CmdResult {
    let config = read_config(config_path)?;
    let machine = config.build_machine();
    let text = read_input(cl_path)?;
    let paths = clfile::parse_cl(&text).map_err(|e| fail(2, e))?;
    let nodes = job::solve_cl_paths(&paths, &machine).map_err(|e| {
        fail(JobError::Kinematics(e).exit_code() as u8, "unreachable pose in CL file")
    })?;
    let profile = simulate::profile_from_nodes(&nodes, &machine, config.feedrate, 16);
    std::fs::create_dir_all(&common.out_dir)
        .map_err(|e| fail(3, format!("cannot create {}: {e}", common.out_dir.display())))?;
    let nc = common.out_dir.join(&config.output.nc_file);
    write_artifact(&nc, &gcode::emit_gcode(&profile))?;
    let report_path = common.out_dir.join(&config.output.report_csv);
    write_artifact(&report_path, &report::report_csv(&profile))?;
    println!("wrote {} {}", nc.display(), report_path.display());
    Ok(())
}

fn profile(program: &PathBuf, config_path: &PathBuf, common: &Common) -> CmdResult {
    let config = read_config(config_path)?;
    let machine = config.build_machine();
    let text = read_input(program)?;
    // CL files carry GOTO records; anything else is treated as ISO-6983.
    let nodes = if text.contains("GOTO/") {
        let paths = clfile::parse_cl(&text).map_err(|e| fail(2, e))?;
        job::solve_cl_paths(&paths, &machine)
            .map_err(|_| fail(4, "unreachable pose in CL file"))?
    } else {
        let prog = gcode::parse_gcode(&text).map_err(|e| fail(2, e))?;
        job::nodes_from_joints(&prog.poses(), &machine)
    };
    let profile = simulate::profile_from_nodes(&nodes, &machine, config.feedrate, 16);
    let report_data = simulate::saturation(&profile, &machine);
    let n_paths = nodes.iter().map(|n| n.path).max().map(|m| m + 1).unwrap_or(0);
    let summary = report::summary_text(&SummaryData {
        profile: &profile,
        before: &report_data,
        after: &report_data,
        n_paths,
        inserted_paths: 0,
        optimize_iterations: 0,
        max_scallop: 0.0,
        scallop_tol: config.strategy.scallop_tol,
    });
    std::fs::create_dir_all(&common.out_dir)
        .map_err(|e| fail(3, format!("cannot create {}: {e}", common.out_dir.display())))?;
    let report_path = common.out_dir.join(&config.output.report_csv);
    write_artifact(&report_path, &report::report_csv(&profile))?;
    let summary_path = common.out_dir.join(&config.output.summary);
    write_artifact(&summary_path, &summary)?;
    if common.verbose {
        print!("{summary}");
    }
    println!("wrote {} {}", report_path.display(), summary_path.display());
    if common.strict && report_data.rotary_saturated_blocks() > 0 {
        return Err(fail(5, "rotary-axis saturation present"));
    }
    Ok(())
}

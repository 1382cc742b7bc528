use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::Ordering;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rmlayer_cli::config::{Overrides, Scenario};
use rmlayer_cli::scenario::{cmd_run, RunHooks};
use rmlayer_cli::tables::cmd_tables;
use rmlayer_cli::verify::{cmd_verify, Fault};
use rmlayer_cli::{exit, CliError};
use rmlayer_core::event_bus::Emitter;
use rmlayer_core::{Mechanism, Profile};

#[derive(Parser)]
#[command(name = "rmlayer", version, about = "FFT migration and scaling controller for FPGA SoC radio units")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario: ingest events, drive the controller, stream telemetry.
    Run(RunArgs),
    /// Print the timing, power and latency tables computed from the models.
    Tables {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Board profile (TOML); default is the embedded one.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Run the self-check suite.
    Verify {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Test hook: corrupt one twiddle factor of the engine under test.
        #[arg(long, value_enum)]
        inject_fault: Option<FaultArg>,
    },
    /// Send face-count events to a running listener.
    Emit {
        #[arg(long)]
        target: String,
        /// Face counts to send in order.
        #[arg(long, required = true, num_args = 1..)]
        faces: Vec<u32>,
        /// Pause between events.
        #[arg(long, default_value_t = 0)]
        interval_ms: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML). Optional when --trace or --listen is given.
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "trace")]
    listen: Option<String>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    mechanism: Option<Mechanism>,
    #[arg(long)]
    telemetry_file: Option<PathBuf>,
    #[arg(long)]
    telemetry_socket: Option<String>,
    /// Replay traces in simulated time (the default).
    #[arg(long, conflicts_with = "wall_clock")]
    fast_forward: bool,
    /// Replay traces in real time.
    #[arg(long)]
    wall_clock: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    Twiddle,
}

fn load_profile(path: Option<PathBuf>) -> Result<Profile, CliError> {
    match path {
        Some(p) => Ok(Profile::from_path(p)?),
        None => Ok(Profile::embedded()),
    }
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let mut scenario = match &args.config {
        Some(path) => Scenario::load(path)?,
        None if args.trace.is_some() || args.listen.is_some() => Scenario::default(),
        None => return Err(CliError::Config("run needs a scenario file, --trace or --listen".into())),
    };
    scenario.apply(&Overrides {
        listen: args.listen,
        trace: args.trace,
        mechanism: args.mechanism,
        telemetry_file: args.telemetry_file,
        telemetry_socket: args.telemetry_socket,
        fast_forward: if args.wall_clock { Some(false) } else { args.fast_forward.then_some(true) },
        seed: args.seed,
    });
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        if let Ok(addr) = rx.recv() {
            eprintln!("listening on {addr}");
        }
    });
    let hooks = RunHooks { bound: Some(tx), ..RunHooks::default() };
    let stop = hooks.stop.clone();
    if let Err(e) = ctrlc::set_handler(move || stop.store(true, Ordering::SeqCst)) {
        log::warn!("no interrupt handler: {e}");
    }
    let summary = cmd_run(&scenario, hooks)?;
    match args.format {
        Format::Text => print!("{}", summary.render_text()),
        Format::Json => println!("{}", summary.render_json()),
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Tables { format, profile } => {
            let tables = cmd_tables(&load_profile(profile)?)?;
            match format {
                Format::Text => print!("{}", tables.render_text()),
                Format::Json => println!("{}", tables.render_json()),
            }
            Ok(())
        }
        Command::Verify { format, profile, inject_fault } => {
            let fault = match inject_fault {
                Some(FaultArg::Twiddle) => Fault::CorruptTwiddle,
                None => Fault::None,
            };
            let report = cmd_verify(&load_profile(profile)?, fault);
            match format {
                Format::Text => print!("{}", report.render_text()),
                Format::Json => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
            }
            match report.failed() {
                0 => Ok(()),
                failed => Err(CliError::Verification { failed }),
            }
        }
        Command::Emit { target, faces, interval_ms } => {
            let mut emitter = Emitter::connect(target.as_str()).map_err(|e| CliError::Runtime(e.to_string()))?;
            for (i, f) in faces.iter().enumerate() {
                if i > 0 && interval_ms > 0 {
                    std::thread::sleep(Duration::from_millis(interval_ms));
                }
                let event = emitter.emit(*f).map_err(|e| CliError::Runtime(e.to_string()))?;
                println!("{}", serde_json::to_string(&event).expect("event serializes"));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("rmlayer: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand};

use rudi::cli::{self, CliError, Project, Repl, ReplReply, RunOptions};
use rudi::debugsrv::{DebugServer, ServerOptions};

#[derive(Parser)]
#[command(name = "rudic", version, about = "Compile and run dialogue rule projects")]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check and lower a project, writing its artifact.
    Compile {
        project: PathBuf,
        /// Artifact path; defaults to the one named in the project.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Replay an event script on a simulated clock and print the transcript.
    Run {
        project: PathBuf,
        #[arg(long)]
        script: PathBuf,
        /// Store snapshot to start from.
        #[arg(long)]
        load: Option<PathBuf>,
        /// Where to save the store snapshot afterwards.
        #[arg(long)]
        save: Option<PathBuf>,
        /// Use a compiled artifact instead of compiling the project.
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
    /// Talk to the agent on the wall clock.
    Repl {
        project: PathBuf,
        #[arg(long)]
        debug_port: Option<u16>,
        #[arg(long)]
        load: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(args.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Compile { project, out } => {
            let p = Project::load(project)?;
            let (path, warnings) = cli::compile_to_artifact(&p, out.as_deref())?;
            for w in warnings {
                eprintln!("{w}");
            }
            println!("wrote {}", path.display());
            Ok(())
        }
        Cmd::Run {
            project,
            script,
            load,
            save,
            artifact,
        } => {
            let p = Project::load(project)?;
            let opts = RunOptions {
                load,
                save,
                artifact,
            };
            let t = cli::run_project(&p, &script, &opts)?;
            print!("{t}");
            Ok(())
        }
        Cmd::Repl {
            project,
            debug_port,
            load,
        } => repl(Project::load(project)?, debug_port, load),
    }
}

enum Input {
    Line(String),
    Eof,
}

fn repl(project: Project, debug_port: Option<u16>, load: Option<PathBuf>) -> Result<(), CliError> {
    let (program, warnings) = cli::compile_project(&project)?;
    for w in warnings {
        eprintln!("{w}");
    }
    let store = load.as_deref().map(cli::load_snapshot).transpose()?;
    let mut engine = project.engine(program.clone(), store)?;
    let mut _server = None;
    if let Some(port) = debug_port.or(project.config.debug_port) {
        let opts = ServerOptions {
            config_dir: project.dir.clone(),
            ..ServerOptions::default()
        };
        let srv = Arc::new(
            DebugServer::bind(("127.0.0.1", port), &program, opts).map_err(|source| CliError::Io {
                path: PathBuf::from(format!("127.0.0.1:{port}")),
                source,
            })?,
        );
        eprintln!("debug server on {}", srv.local_addr());
        engine.add_sink(srv.clone());
        _server = Some(srv);
    }
    let (mut repl, out) = Repl::start(engine)?;
    print_lines(&out);
    eprintln!("type :help for commands");

    // stdin is one producer, the clock below is the other
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in io::stdin().lock().lines() {
            let Ok(line) = line else { break };
            if tx.send(Input::Line(line)).is_err() {
                return;
            }
        }
        let _ = tx.send(Input::Eof);
    });
    let started = Instant::now();
    let now = || started.elapsed().as_millis() as u64;
    loop {
        match rx.recv_timeout(Duration::from_millis(50)) {
            Ok(Input::Line(l)) => match repl.handle_line(&l, now()) {
                Ok(ReplReply::Output(out)) => print_lines(&out),
                Ok(ReplReply::Quit) => break,
                Err(e) => eprintln!("error: {e}"),
            },
            Ok(Input::Eof) | Err(mpsc::RecvTimeoutError::Disconnected) => break,
            Err(mpsc::RecvTimeoutError::Timeout) => match repl.tick(now()) {
                Ok(out) => print_lines(&out),
                Err(e) => eprintln!("error: {e}"),
            },
        }
    }
    if let Some(p) = &project.config.snapshot {
        let path = project.resolve(p);
        cli::save_snapshot(repl.engine().store(), &path)?;
        eprintln!("saved {}", path.display());
    }
    Ok(())
}

fn print_lines(lines: &[String]) {
    let mut out = io::stdout().lock();
    for l in lines {
        let _ = writeln!(out, "{l}");
    }
    let _ = out.flush();
}

//! Project files, compilation, scripted runs and the interactive loop.
//!
//! A project is a YAML file next to its sources:
//!
//! ```yaml
//! ontology: ontology.nt
//! rules: Greeting.rudi
//! selection: { kind: first }
//! iteration-cap: 100
//! bare-chain-guards: strict
//! ```

mod script;

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dacts::{DialogueAct, DEFAULT_ONTOLOGY};
use crate::engine::{Emission, Engine, EngineConfig, EngineError, Event, Val};
use crate::lower::{lower_program, ArtifactError, GuardMode, Program};
use crate::select::SelectionConfig;
use crate::store::{format, load_ontology, Store, StoreError, Value};
use crate::types::{check_program, CheckContext, Diagnostic, ExtensionDecl, SourceProvider};

pub use script::{parse_script, Script, ScriptCmd, ScriptLine};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ProjectConfig {
    /// Project ontology, loaded on top of the built-in dialogue act ontology.
    #[serde(default)]
    pub ontology: Option<PathBuf>,
    /// Top-level rule file; imports are looked up next to it.
    pub rules: PathBuf,
    #[serde(default)]
    pub extensions: Vec<ExtensionDecl>,
    #[serde(default)]
    pub selection: SelectionConfig,
    /// Dotted paths passed to the selection component as features.
    #[serde(default)]
    pub features: Vec<String>,
    #[serde(default = "default_iteration_cap")]
    pub iteration_cap: u32,
    #[serde(default = "default_round_cap")]
    pub round_cap: u32,
    #[serde(default)]
    pub bare_chain_guards: GuardMode,
    #[serde(default)]
    pub debug_port: Option<u16>,
    /// Where `compile` writes the artifact; defaults to `<rules stem>.rudic`.
    #[serde(default)]
    pub artifact: Option<PathBuf>,
    /// Store snapshot written when the REPL quits.
    #[serde(default)]
    pub snapshot: Option<PathBuf>,
}

fn default_iteration_cap() -> u32 {
    100
}

fn default_round_cap() -> u32 {
    10
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },
    #[error("{}", diagnostics_text(.0))]
    Diagnostics(Vec<Diagnostic>),
    #[error("{0}")]
    Store(#[from] StoreError),
    #[error("{0}")]
    Artifact(#[from] ArtifactError),
    #[error("script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("event {index} (script line {line}): {error}")]
    Runtime {
        index: usize,
        line: usize,
        error: EngineError,
    },
    #[error("agent start: {0}")]
    Engine(#[from] EngineError),
}

fn diagnostics_text(ds: &[Diagnostic]) -> String {
    ds.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n")
}

impl CliError {
    /// 1 for anything wrong with the inputs, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime { .. } | CliError::Engine(_) => 2,
            _ => 1,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Modules are `<dir>/<Module>.rudi`.
pub struct DirSources {
    pub dir: PathBuf,
}

impl SourceProvider for DirSources {
    fn load(&self, module: &str) -> Option<(String, String)> {
        let file = format!("{module}.rudi");
        let text = fs::read_to_string(self.dir.join(&file)).ok()?;
        Some((file, text))
    }
}

#[derive(Clone, Debug)]
pub struct Project {
    pub path: PathBuf,
    pub dir: PathBuf,
    pub config: ProjectConfig,
}

impl Project {
    pub fn load(path: impl AsRef<Path>) -> Result<Project, CliError> {
        let path = path.as_ref().to_path_buf();
        let text = read(&path)?;
        let config: ProjectConfig =
            serde_yaml::from_str(&text).map_err(|e| CliError::Config {
                path: path.clone(),
                message: e.to_string(),
            })?;
        let dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let project = Project { path, dir, config };
        for f in project.config.ontology.iter().chain([&project.config.rules]) {
            let p = project.resolve(f);
            if !p.is_file() {
                return Err(CliError::Config {
                    path: project.path.clone(),
                    message: format!("{} does not exist", p.display()),
                });
            }
        }
        Ok(project)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.dir.join(p)
    }

    /// Name of the top-level module: the rule file's stem.
    pub fn root_module(&self) -> String {
        self.config
            .rules
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }

    pub fn artifact_path(&self) -> PathBuf {
        match &self.config.artifact {
            Some(p) => self.resolve(p),
            None => self.dir.join(format!("{}.rudic", self.root_module())),
        }
    }

    /// Built-in dialogue act ontology followed by the project ontology.
    pub fn ontology_text(&self) -> Result<String, CliError> {
        let mut text = DEFAULT_ONTOLOGY.to_string();
        if let Some(p) = &self.config.ontology {
            text.push('\n');
            text.push_str(&read(&self.resolve(p))?);
        }
        Ok(text)
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            iteration_cap: self.config.iteration_cap,
            round_cap: self.config.round_cap,
            features: self.config.features.clone(),
            ..EngineConfig::default()
        }
    }

    /// Builds an engine over `store`, or over a fresh store from the
    /// program's ontology.
    pub fn engine(&self, program: Program, store: Option<Store>) -> Result<Engine, CliError> {
        let selector = self.config.selection.build().map_err(|e| CliError::Config {
            path: self.path.clone(),
            message: format!("selection: {e}"),
        })?;
        let config = self.engine_config();
        Ok(match store {
            Some(s) => Engine::new(program, s, selector, config)?,
            None => Engine::from_program(program, selector, config)?,
        })
    }
}

/// Parses, checks and lowers every module reachable from the rule file.
/// Warnings are returned alongside the program.
pub fn compile_project(project: &Project) -> Result<(Program, Vec<Diagnostic>), CliError> {
    let ontology = project.ontology_text()?;
    let ctx = CheckContext {
        schema: load_ontology(&ontology)?,
        extensions: project.config.extensions.clone(),
    };
    let rules = project.resolve(&project.config.rules);
    let sources = DirSources {
        dir: rules
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    let checked = check_program(&project.root_module(), &sources, &ctx);
    if checked.has_errors() {
        return Err(CliError::Diagnostics(checked.diagnostics));
    }
    let program = lower_program(&checked, project.config.bare_chain_guards, &ontology)?;
    Ok((program, checked.diagnostics))
}

/// Compiles and writes the artifact; returns its path.
pub fn compile_to_artifact(project: &Project, out: Option<&Path>) -> Result<(PathBuf, Vec<Diagnostic>), CliError> {
    let (program, warnings) = compile_project(project)?;
    let path = out.map_or_else(|| project.artifact_path(), Path::to_path_buf);
    write(&path, &program.to_artifact())?;
    Ok((path, warnings))
}

pub fn load_artifact(path: &Path) -> Result<Program, CliError> {
    Ok(Program::from_artifact(&read(path)?)?)
}

pub fn load_snapshot(path: &Path) -> Result<Store, CliError> {
    Ok(Store::load(&read(path)?)?)
}

pub fn save_snapshot(store: &Store, path: &Path) -> Result<(), CliError> {
    write(path, &store.dump())
}

/// Acts emitted during a run, one `<ms> emit #DA(...)` line each.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Transcript {
    pub emissions: Vec<Emission>,
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.emissions {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Starts the engine and replays `script` on the simulated clock.
pub fn run_script(engine: &mut Engine, script: &Script) -> Result<Transcript, CliError> {
    let mut t = Transcript::default();
    t.emissions.extend(engine.start()?);
    for (index, line) in script.lines.iter().enumerate() {
        let at = |error| CliError::Runtime {
            index,
            line: line.line,
            error,
        };
        let out = match &line.cmd {
            ScriptCmd::At(ms) => engine.advance_clock(*ms).map_err(at)?,
            ScriptCmd::Recv(text) => {
                let da = DialogueAct::parse(text, engine.store().schema()).map_err(|message| {
                    CliError::Script {
                        line: line.line,
                        message,
                    }
                })?;
                engine.process_event(Event::Received(da)).map_err(at)?
            }
            ScriptCmd::Set {
                subject,
                predicate,
                value,
            } => {
                let ev = set_event(engine, subject, predicate, value).map_err(|message| {
                    CliError::Script {
                        line: line.line,
                        message,
                    }
                })?;
                engine.process_event(ev).map_err(at)?
            }
            ScriptCmd::NewSession => engine.process_event(Event::NewSession).map_err(at)?,
        };
        t.emissions.extend(out);
    }
    Ok(t)
}

/// Builds the store update of a `set <subject> <predicate> <value>` line.
/// `$Module.name` as subject or value refers to an object held in a
/// module global.
pub fn set_event(engine: &Engine, subject: &str, predicate: &str, value: &str) -> Result<Event, String> {
    let prefixes = engine.store().prefixes();
    let term = |text: &str| -> Result<Value, String> {
        if let Some(path) = text.strip_prefix('$') {
            let (module, name) = path
                .split_once('.')
                .ok_or_else(|| format!("expected `$Module.name`, found `{text}`"))?;
            return match engine.global(module, name) {
                Some(Val::Object(r)) => Ok(Value::Resource(r.clone())),
                Some(other) => Err(format!("{text} holds `{}`, not an object", other.render())),
                None => Err(format!("no global {text}")),
            };
        }
        format::parse_value(text, prefixes).map_err(|e| e.to_string())
    };
    let resource = |text: &str| match term(text)? {
        Value::Resource(r) => Ok(r),
        other => Err(format!("expected a resource, found {other}")),
    };
    Ok(Event::StoreUpdate {
        subject: resource(subject)?,
        predicate: resource(predicate)?,
        value: term(value)?,
    })
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub load: Option<PathBuf>,
    pub save: Option<PathBuf>,
    pub artifact: Option<PathBuf>,
}

/// `rudic run`: compile (or load the artifact), replay the script, and
/// save the store snapshot if asked.
pub fn run_project(project: &Project, script_path: &Path, opts: &RunOptions) -> Result<Transcript, CliError> {
    let script = parse_script(&read(script_path)?)?;
    let program = match &opts.artifact {
        Some(p) => load_artifact(p)?,
        None => compile_project(project)?.0,
    };
    let store = opts.load.as_deref().map(load_snapshot).transpose()?;
    let mut engine = project.engine(program, store)?;
    let transcript = run_script(&mut engine, &script)?;
    if let Some(p) = &opts.save {
        save_snapshot(engine.store(), p)?;
    }
    Ok(transcript)
}

pub enum ReplReply {
    Output(Vec<String>),
    Quit,
}

/// Line-oriented interaction with a running agent. The caller owns the
/// clock and passes the current time in milliseconds.
pub struct Repl {
    engine: Engine,
}

pub const REPL_HELP: &str = "\
#Token(Frame, k=v)      receive a dialogue act
set <subj> <pred> <v>   assert a value in the store
:newsession             start a new session
:timeouts               list active timeouts
:quit                   leave";

impl Repl {
    /// Starts the agent; returns it with its initial output.
    pub fn start(mut engine: Engine) -> Result<(Repl, Vec<String>), EngineError> {
        let out = engine.start()?;
        Ok((Repl { engine }, lines(out)))
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn engine_mut(&mut self) -> &mut Engine {
        &mut self.engine
    }

    /// Fires timeouts due at `now`.
    pub fn tick(&mut self, now: u64) -> Result<Vec<String>, String> {
        let now = now.max(self.engine.clock());
        self.engine
            .advance_clock(now)
            .map(lines)
            .map_err(|e| e.to_string())
    }

    /// Handles one input line at time `now`. Errors leave the agent usable.
    pub fn handle_line(&mut self, line: &str, now: u64) -> Result<ReplReply, String> {
        let mut out = self.tick(now)?;
        let line = line.trim();
        let ev = match line {
            "" => return Ok(ReplReply::Output(out)),
            ":quit" | ":q" => return Ok(ReplReply::Quit),
            ":help" => {
                out.extend(REPL_HELP.lines().map(str::to_string));
                return Ok(ReplReply::Output(out));
            }
            ":timeouts" => {
                out.extend(
                    self.engine
                        .active_timeouts()
                        .into_iter()
                        .map(|(n, t)| format!("{n} at {t}")),
                );
                return Ok(ReplReply::Output(out));
            }
            ":newsession" => Event::NewSession,
            l if l.starts_with('#') => {
                Event::Received(DialogueAct::parse(l, self.engine.store().schema())?)
            }
            l if l.starts_with("set ") => {
                let parts = script::split_set(&l[4..])?;
                set_event(&self.engine, &parts.0, &parts.1, &parts.2)?
            }
            other => return Err(format!("cannot understand `{other}` (try :help)")),
        };
        let emitted = self.engine.process_event(ev).map_err(|e| e.to_string())?;
        out.extend(lines(emitted));
        Ok(ReplReply::Output(out))
    }
}

fn lines(em: Vec<Emission>) -> Vec<String> {
    em.iter().map(|e| e.to_string()).collect()
}

//! Replays every script of the greeting agent and prints the transcripts.

use std::path::Path;

use rudi::cli::{run_project, Project, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus/greeting");
    let project = Project::load(dir.join("project.yaml"))?;
    for name in ["greet_back", "initiative", "two_sessions"] {
        let script = dir.join(format!("scripts/{name}.script"));
        let transcript = run_project(&project, &script, &RunOptions::default())?;
        println!("== {name}");
        print!("{transcript}");
    }
    Ok(())
}

//! Compiles a corpus project to a `.rudic` artifact and prints its rule tree.
//!
//!     cargo run --example compile_project [project.yaml]

use std::path::PathBuf;

use rudi::cli::{compile_to_artifact, load_artifact, Project};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus/assistant/project.yaml")
    });
    let project = Project::load(&path)?;
    let out = std::env::temp_dir().join(format!("{}.rudic", project.root_module()));
    let (written, warnings) = compile_to_artifact(&project, Some(&out))?;
    for w in &warnings {
        eprintln!("{w}");
    }
    println!("wrote {}", written.display());

    let program = load_artifact(&written)?;
    for m in &program.modules {
        println!("module {}", m.name);
    }
    for r in program.all_rules() {
        println!("  rule {:>3} {}", r.id, r.label);
    }
    Ok(())
}

//! Drives the line interface programmatically with a simulated clock.

use std::path::Path;

use rudi::cli::{compile_project, Project, Repl, ReplReply};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus/greeting");
    let project = Project::load(dir.join("project.yaml"))?;
    let program = compile_project(&project)?.0;
    let (mut repl, out) = Repl::start(project.engine(program, None)?)?;
    out.iter().for_each(|l| println!("{l}"));

    let input = [
        (500, ":timeouts"),
        (1000, "#Greeting(Meeting)"),
        (1200, "#NoSuchAct(Meeting)"),
        (2000, ":newsession"),
        (12000, ":timeouts"),
        (12000, ":quit"),
    ];
    for (now, line) in input {
        println!("{now:>6} > {line}");
        match repl.handle_line(line, now) {
            Ok(ReplReply::Output(out)) => out.iter().for_each(|l| println!("{l}")),
            Ok(ReplReply::Quit) => break,
            Err(e) => println!("error: {e}"),
        }
    }
    Ok(())
}

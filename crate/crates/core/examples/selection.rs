//! Built-in proposal selectors, and the assistant agent run under two of them.

use std::path::Path;

use rudi::cli::{compile_project, parse_script, run_script, Project};
use rudi::engine::Engine;
use rudi::select::{First, ProposalInfo, SeededRandom, SelectionRequest, Selector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let req = SelectionRequest {
        proposals: ["offer", "welcome", "deliver"]
            .iter()
            .enumerate()
            .map(|(i, l)| ProposalInfo { label: l.to_string(), rule: 3 - i as u32, iteration: 1 })
            .collect(),
        features: Default::default(),
    };
    println!("first picks {}", First.select(&req));
    let mut random = SeededRandom::new(7);
    let picks: Vec<String> = (0..6).map(|_| random.select(&req)).collect();
    println!("random(7) picks {picks:?}");

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus/assistant");
    let project = Project::load(dir.join("project.yaml"))?;
    let script = parse_script(&std::fs::read_to_string(dir.join("scripts/fetch.script"))?)?;
    let selectors: [(&str, Box<dyn Selector>); 2] =
        [("first", Box::new(First)), ("random(7)", Box::new(SeededRandom::new(7)))];
    for (name, selector) in selectors {
        let program = compile_project(&project)?.0;
        let mut engine = Engine::from_program(program, selector, project.engine_config())?;
        println!("== {name}");
        print!("{}", run_script(&mut engine, &script)?);
    }
    Ok(())
}

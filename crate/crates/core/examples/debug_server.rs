//! Serves rule logs of the assistant agent over TCP and reads them back
//! with a plain socket client.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use rudi::cli::{compile_project, parse_script, run_script, Project};
use rudi::debugsrv::{DebugServer, ServerOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus/assistant");
    let project = Project::load(dir.join("project.yaml"))?;
    let program = compile_project(&project)?.0;
    let server = Arc::new(DebugServer::bind("127.0.0.1:0", &program, ServerOptions::default())?);
    println!("listening on {}", server.local_addr());

    let stream = TcpStream::connect(server.local_addr())?;
    stream.set_read_timeout(Some(Duration::from_millis(500)))?;
    let mut out = stream.try_clone()?;
    let mut lines = BufReader::new(stream).lines();
    // tree and state arrive first
    for _ in 0..2 {
        let l = lines.next().unwrap()?;
        println!("<- {}", &l[..l.len().min(100)]);
    }
    writeln!(out, r#"{{"cmd":"set-state","req":1,"module":"Assistant","state":"IF_TRUE"}}"#)?;

    let mut engine = project.engine(program, None)?;
    engine.add_sink(server.clone());
    let script = parse_script(&std::fs::read_to_string(dir.join("scripts/fetch.script"))?)?;
    // give the command a moment to land before rules run
    std::thread::sleep(Duration::from_millis(100));
    print!("{}", run_script(&mut engine, &script)?);

    while let Some(Ok(l)) = lines.next() {
        println!("<- {l}");
    }
    server.shutdown();
    Ok(())
}

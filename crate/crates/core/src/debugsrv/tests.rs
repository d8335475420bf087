use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::Duration;

use super::*;
use crate::cli::{compile_project, Project};
use crate::engine::{TermLog, TermValue};

fn program(name: &str) -> Program {
    let p = Project::load(format!(
        "{}/corpus/{name}/project.yaml",
        env!("CARGO_MANIFEST_DIR")
    ))
    .unwrap();
    compile_project(&p).unwrap().0
}

fn record(rule: u32, result: bool) -> RuleLogRecord {
    RuleLogRecord {
        t: 0,
        iteration: 1,
        rule,
        label: format!("r{rule}"),
        module: "M".into(),
        result,
        terms: vec![TermLog {
            id: 0,
            text: "x".into(),
            value: if result { TermValue::True } else { TermValue::False },
        }],
    }
}

struct Conn {
    out: TcpStream,
    lines: std::io::Lines<BufReader<TcpStream>>,
}

impl Conn {
    fn open(addr: SocketAddr) -> Conn {
        let s = TcpStream::connect(addr).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
        Conn {
            out: s.try_clone().unwrap(),
            lines: BufReader::new(s).lines(),
        }
    }

    fn next(&mut self) -> ServerMsg {
        let l = self.lines.next().unwrap().unwrap();
        serde_json::from_str(&l).unwrap_or_else(|e| panic!("{e}: {l}"))
    }

    fn send(&mut self, cmd: &str) {
        writeln!(self.out, "{cmd}").unwrap();
    }
}

#[test]
fn tree_mirrors_program() {
    let p = program("assistant");
    let tree = RuleTree::from_program(&p);
    assert_eq!(tree.root, "Assistant");
    let a = tree.module("Assistant").unwrap();
    assert_eq!(a.imports, ["Workshop"]);
    let labels: Vec<&str> = a.rules.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["offer_help", "thanks"]);
    assert_eq!(a.rules[0].children[0].label, "accepted");
    let ids: Vec<u32> = p.all_rules().into_iter().map(|r| r.id).collect();
    assert_eq!(tree.all_ids().into_iter().collect::<Vec<_>>(), ids);
}

#[test]
fn subtree_write_through_and_nack() {
    let state = DebugState::new(RuleTree::from_program(&program("assistant")));
    let all = state.tree().all_ids();
    assert!(state.states().values().all(|s| *s == LoggingState::Never));
    state.set(Some(0), None, LoggingState::IfFalse, true).unwrap();
    let nested = state.tree().rule(0).unwrap().children[0].id;
    assert_eq!(state.state_of(nested), Some(LoggingState::IfFalse));
    let before = state.states();
    assert!(state.set(Some(999), None, LoggingState::Always, true).is_err());
    assert!(state.set(None, Some("Nope"), LoggingState::Always, true).is_err());
    assert_eq!(state.states(), before);
    state.set(None, Some("Assistant"), LoggingState::Always, true).unwrap();
    assert!(all.iter().all(|id| state.state_of(*id) == Some(LoggingState::Always)));
}

#[test]
fn client_sees_tree_state_and_filtered_logs() {
    let p = program("greeting");
    let srv = DebugServer::bind("127.0.0.1:0", &p, ServerOptions::default()).unwrap();
    let mut c = Conn::open(srv.local_addr());
    match c.next() {
        ServerMsg::Tree { root, modules, .. } => {
            assert_eq!(root, "Greeting");
            assert_eq!(modules.len(), 2);
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(c.next(), ServerMsg::State { .. }));
    c.send(r#"{"cmd":"set-state","req":7,"rule":1,"state":"IF_TRUE"}"#);
    assert_eq!(
        c.next(),
        ServerMsg::Ack {
            v: 1,
            req: Some(7),
            ok: true,
            error: None
        }
    );
    match c.next() {
        ServerMsg::State { states, .. } => assert_eq!(states[&1], LoggingState::IfTrue),
        other => panic!("{other:?}"),
    }
    for r in [true, false, true, true] {
        srv.publish(&record(1, r));
        srv.publish(&record(0, r));
    }
    for _ in 0..3 {
        match c.next() {
            ServerMsg::Log { record, .. } => assert!(record.result && record.rule == 1),
            other => panic!("{other:?}"),
        }
    }
    c.send(r#"{"cmd":"set-state","req":8,"rule":42,"state":"ALWAYS"}"#);
    match c.next() {
        ServerMsg::Ack { ok, req, .. } => assert!(!ok && req == Some(8)),
        other => panic!("{other:?}"),
    }
}

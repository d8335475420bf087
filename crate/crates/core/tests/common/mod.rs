//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::{Rng, RngExt};

use rudi::cli::{compile_project, parse_script, run_script, Project, Transcript};
use rudi::dacts::DEFAULT_ONTOLOGY;
use rudi::engine::{Engine, EngineConfig, EngineError};
use rudi::lower::{lower_program, GuardMode, Program};
use rudi::select::First;
use rudi::store::load_ontology;
use rudi::types::{check_program, CheckContext, MapSources};

pub const EX: &str = "http://rudi.dev/ns/example#";

pub fn corpus(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(rel)
}

pub fn project(name: &str) -> Project {
    Project::load(corpus(&format!("{name}/project.yaml"))).unwrap()
}

/// Every `(project file, script)` pair of the corpus.
pub fn corpus_scripts() -> Vec<(PathBuf, PathBuf)> {
    let mut out = Vec::new();
    let mut dirs: Vec<_> = std::fs::read_dir(corpus(""))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    dirs.sort();
    for d in dirs {
        let scripts = d.join("scripts");
        if !scripts.is_dir() {
            continue;
        }
        let mut files: Vec<_> = std::fs::read_dir(&scripts)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        for f in files {
            out.push((d.join("project.yaml"), f));
        }
    }
    out
}

/// Compiles a project and replays a script; engine errors are returned as
/// text so divergent agents can be compared too.
pub fn transcript(project_file: &Path, script: &Path) -> Result<Transcript, String> {
    let p = Project::load(project_file).map_err(|e| e.to_string())?;
    let program = compile_project(&p).map_err(|e| e.to_string())?.0;
    let mut e = p.engine(program, None).map_err(|e| e.to_string())?;
    let s = parse_script(&std::fs::read_to_string(script).unwrap()).map_err(|e| e.to_string())?;
    run_script(&mut e, &s).map_err(|e| e.to_string())
}

pub fn compile(modules: &[(&str, &str)], ontology: &str, mode: GuardMode) -> Result<Program, String> {
    let onto = format!("{DEFAULT_ONTOLOGY}\n{ontology}");
    let ctx = CheckContext {
        schema: load_ontology(&onto).map_err(|e| e.to_string())?,
        extensions: Vec::new(),
    };
    let sources = MapSources::new(modules.iter().copied());
    let checked = check_program(modules[0].0, &sources, &ctx);
    if checked.has_errors() {
        let msgs: Vec<String> = checked.diagnostics.iter().map(|d| d.to_string()).collect();
        return Err(msgs.join("\n"));
    }
    lower_program(&checked, mode, &onto).map_err(|e| e.to_string())
}

pub fn engine(program: Program, config: EngineConfig) -> Result<Engine, EngineError> {
    Engine::from_program(program, Box::new(First), config)
}

// ---------------------------------------------------------------------
// Guarded evaluation: random chain expressions over a three-node store.

pub const NODE_ONTOLOGY: &str = r#"@prefix ex: <http://rudi.dev/ns/example#> .
ex:Node rdf:type rdfs:Class .
ex:next rdfs:domain ex:Node .
ex:next rdfs:range ex:Node .
ex:next rudi:functional "true"^^xsd:boolean .
ex:val rdfs:domain ex:Node .
ex:val rdfs:range xsd:int .
ex:val rudi:functional "true"^^xsd:boolean .
ex:flag rdfs:domain ex:Node .
ex:flag rdfs:range xsd:boolean .
ex:flag rudi:functional "true"^^xsd:boolean .
ex:name rdfs:domain ex:Node .
ex:name rdfs:range xsd:string .
ex:name rudi:functional "true"^^xsd:boolean .
"#;

pub const NODES: [&str; 3] = ["a", "b", "c"];
pub const NAMES: [&str; 2] = ["x", "y"];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodeData {
    pub next: Option<usize>,
    pub val: Option<i64>,
    pub flag: Option<bool>,
    pub name: Option<&'static str>,
}

pub type Model = [NodeData; 3];

/// `root` followed by `nexts` `.next` hops.
#[derive(Clone, Copy, Debug)]
pub struct Chain {
    pub root: usize,
    pub nexts: usize,
}

#[derive(Clone, Debug)]
pub enum IntTerm {
    Val(Chain),
    Const(i64),
    Plus(Box<IntTerm>, i64),
}

#[derive(Clone, Copy, Debug)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Clone, Debug)]
pub enum Cond {
    Int(IntTerm, Cmp, IntTerm),
    Name(Chain, bool, &'static str),
    Flag(Chain),
    /// `chain == node` (true) or `!=`; the chain has at least one hop.
    Obj(Chain, bool, usize),
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

impl Chain {
    fn render(&self) -> String {
        let mut s = NODES[self.root].to_string();
        for _ in 0..self.nexts {
            s.push_str(".next");
        }
        s
    }

    /// Follows the hops; `None` as soon as a link is absent.
    pub fn resolve(&self, m: &Model) -> Option<usize> {
        let mut n = self.root;
        for _ in 0..self.nexts {
            n = m[n].next?;
        }
        Some(n)
    }
}

impl Cmp {
    fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
            Cmp::Eq => "==",
            Cmp::Ne => "!=",
        }
    }

    fn apply(self, l: i64, r: i64) -> bool {
        match self {
            Cmp::Lt => l < r,
            Cmp::Le => l <= r,
            Cmp::Gt => l > r,
            Cmp::Ge => l >= r,
            Cmp::Eq => l == r,
            Cmp::Ne => l != r,
        }
    }
}

impl IntTerm {
    fn render(&self) -> String {
        match self {
            IntTerm::Val(c) => format!("{}.val", c.render()),
            IntTerm::Const(k) if *k < 0 => format!("({k})"),
            IntTerm::Const(k) => k.to_string(),
            IntTerm::Plus(t, k) => format!("({} + {k})", t.render()),
        }
    }

    fn eval(&self, m: &Model) -> Option<i64> {
        match self {
            IntTerm::Val(c) => m[c.resolve(m)?].val,
            IntTerm::Const(k) => Some(*k),
            IntTerm::Plus(t, k) => Some(t.eval(m)? + k),
        }
    }
}

impl Cond {
    pub fn render(&self) -> String {
        match self {
            Cond::Int(l, op, r) => format!("{} {} {}", l.render(), op.symbol(), r.render()),
            Cond::Name(c, eq, s) => {
                format!("{}.name {} \"{s}\"", c.render(), if *eq { "==" } else { "!=" })
            }
            Cond::Flag(c) => format!("{}.flag", c.render()),
            Cond::Obj(c, eq, n) => format!("{} {} {}", c.render(), if *eq { "==" } else { "!=" }, NODES[*n]),
            Cond::Not(x) => format!("!({})", x.render()),
            Cond::And(a, b) => format!("({} && {})", a.render(), b.render()),
            Cond::Or(a, b) => format!("({} || {})", a.render(), b.render()),
        }
    }

    /// Reference semantics: a comparison holds only if every link it reads
    /// exists; a bare boolean chain holds if it exists and is true.
    pub fn guarded(&self, m: &Model) -> bool {
        match self {
            Cond::Int(l, op, r) => match (l.eval(m), r.eval(m)) {
                (Some(l), Some(r)) => op.apply(l, r),
                _ => false,
            },
            Cond::Name(c, eq, s) => match c.resolve(m).and_then(|n| m[n].name) {
                Some(v) => (v == *s) == *eq,
                None => false,
            },
            Cond::Flag(c) => c.resolve(m).and_then(|n| m[n].flag) == Some(true),
            Cond::Obj(c, eq, n) => match c.resolve(m) {
                Some(v) => (v == *n) == *eq,
                None => false,
            },
            Cond::Not(x) => !x.guarded(m),
            Cond::And(a, b) => a.guarded(m) && b.guarded(m),
            Cond::Or(a, b) => a.guarded(m) || b.guarded(m),
        }
    }
}

fn chain(rng: &mut impl Rng, min_hops: usize) -> Chain {
    Chain {
        root: rng.random_range(0..3),
        nexts: rng.random_range(min_hops..=3),
    }
}

fn int_term(rng: &mut impl Rng) -> IntTerm {
    match rng.random_range(0..5) {
        0 | 1 => IntTerm::Val(chain(rng, 0)),
        2 => IntTerm::Const(rng.random_range(-3..=3)),
        3 => IntTerm::Plus(Box::new(IntTerm::Val(chain(rng, 0))), rng.random_range(-2..=2)),
        _ => IntTerm::Plus(Box::new(IntTerm::Const(rng.random_range(-3..=3))), rng.random_range(-2..=2)),
    }
}

pub fn random_cond(rng: &mut impl Rng, depth: u32) -> Cond {
    let leaf = depth == 0 || rng.random_bool(0.4);
    if leaf {
        let cmps = [Cmp::Lt, Cmp::Le, Cmp::Gt, Cmp::Ge, Cmp::Eq, Cmp::Ne];
        return match rng.random_range(0..6) {
            0..=2 => {
                // at least one side reads the store
                let l = IntTerm::Val(chain(rng, 0));
                let r = int_term(rng);
                let op = cmps[rng.random_range(0..6)];
                if rng.random_bool(0.5) {
                    Cond::Int(l, op, r)
                } else {
                    Cond::Int(r, op, l)
                }
            }
            3 => Cond::Name(chain(rng, 0), rng.random_bool(0.5), NAMES[rng.random_range(0..2)]),
            4 => Cond::Flag(chain(rng, 0)),
            _ => Cond::Obj(chain(rng, 1), rng.random_bool(0.5), rng.random_range(0..3)),
        };
    }
    match rng.random_range(0..3) {
        0 => Cond::Not(Box::new(random_cond(rng, depth - 1))),
        1 => Cond::And(
            Box::new(random_cond(rng, depth - 1)),
            Box::new(random_cond(rng, depth - 1)),
        ),
        _ => Cond::Or(
            Box::new(random_cond(rng, depth - 1)),
            Box::new(random_cond(rng, depth - 1)),
        ),
    }
}

/// Each field present with probability `p_present`.
pub fn random_model(rng: &mut impl Rng, p_present: f64) -> Model {
    let mut m: Model = Default::default();
    for d in m.iter_mut() {
        if rng.random_bool(p_present) {
            d.next = Some(rng.random_range(0..3));
        }
        if rng.random_bool(p_present) {
            d.val = Some(rng.random_range(-3..=3));
        }
        if rng.random_bool(p_present) {
            d.flag = Some(rng.random_bool(0.5));
        }
        if rng.random_bool(p_present) {
            d.name = Some(NAMES[rng.random_range(0..2)]);
        }
    }
    m
}

/// A module that builds `m` and tests `cond` in rule `probe`.
pub fn probe_source(m: &Model, cond: &Cond) -> String {
    let mut s = String::new();
    for n in NODES {
        s.push_str(&format!("{n} = new Node;\n"));
    }
    for (i, d) in m.iter().enumerate() {
        let n = NODES[i];
        if let Some(x) = d.next {
            s.push_str(&format!("{n}.next = {};\n", NODES[x]));
        }
        if let Some(v) = d.val {
            s.push_str(&format!("{n}.val = {v};\n"));
        }
        if let Some(f) = d.flag {
            s.push_str(&format!("{n}.flag = {f};\n"));
        }
        if let Some(x) = d.name {
            s.push_str(&format!("{n}.name = \"{x}\";\n"));
        }
    }
    s.push_str(&format!("probe: if ({}) {{ }}\n", cond.render()));
    s
}

/// Condition result of `probe` as computed by the compiled program.
pub fn run_probe(m: &Model, cond: &Cond) -> Result<bool, String> {
    let src = probe_source(m, cond);
    let p = compile(&[("Probe", &src)], NODE_ONTOLOGY, GuardMode::Strict).map_err(|e| format!("{e}\n{src}"))?;
    let mut e = engine(p, EngineConfig::default()).map_err(|e| e.to_string())?;
    e.keep_logs(true);
    e.start().map_err(|e| format!("{e}\n{src}"))?;
    let logs = e.take_logs();
    let rec = logs
        .iter()
        .find(|r| r.label == "probe")
        .ok_or("probe was not evaluated")?;
    Ok(rec.result)
}

// ---------------------------------------------------------------------
// Class hierarchies.

/// Random DAG over `n` classes: edges go from higher to lower index.
pub fn random_dag(rng: &mut impl Rng, n: usize, max_edges: usize) -> BTreeSet<(usize, usize)> {
    let mut edges = BTreeSet::new();
    if n < 2 {
        return edges;
    }
    let target = rng.random_range(0..=max_edges.min(n * (n - 1) / 2));
    let mut tries = 0;
    while edges.len() < target && tries < 10 * max_edges {
        tries += 1;
        let a = rng.random_range(1..n);
        let b = rng.random_range(0..a);
        edges.insert((a, b));
    }
    edges
}

pub fn dag_ontology(n: usize, edges: &BTreeSet<(usize, usize)>, instances: &[(usize, usize)]) -> String {
    let mut s = String::from("@prefix ex: <http://rudi.dev/ns/example#> .\n");
    for i in 0..n {
        s.push_str(&format!("ex:C{i} rdf:type rdfs:Class .\n"));
    }
    for (a, b) in edges {
        s.push_str(&format!("ex:C{a} rdfs:subClassOf ex:C{b} .\n"));
    }
    for (x, c) in instances {
        s.push_str(&format!("ex:x{x} rdf:type ex:C{c} .\n"));
    }
    s
}

/// Everything reachable from `from` (itself included), by depth-first
/// search over raw edges.
pub fn reach_set<T: Ord + Clone>(edges: &BTreeSet<(T, T)>, from: &T) -> BTreeSet<T> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![from.clone()];
    while let Some(x) = stack.pop() {
        if !seen.insert(x.clone()) {
            continue;
        }
        stack.extend(edges.iter().filter(|(a, _)| *a == x).map(|(_, b)| b.clone()));
    }
    seen
}

pub fn reachable<T: Ord + Clone>(edges: &BTreeSet<(T, T)>, from: &T, to: &T) -> bool {
    reach_set(edges, from).contains(to)
}

/// `sub rdfs:subClassOf sup` lines of the built-in dialogue act ontology,
/// read directly from its text.
pub fn default_subclass_edges() -> BTreeSet<(String, String)> {
    DEFAULT_ONTOLOGY
        .lines()
        .filter_map(|l| {
            let parts: Vec<&str> = l.split_whitespace().collect();
            match parts.as_slice() {
                [a, "rdfs:subClassOf", b, "."] => Some((local(a), local(b))),
                _ => None,
            }
        })
        .collect()
}

fn local(prefixed: &str) -> String {
    prefixed.rsplit(':').next().unwrap().to_string()
}

pub fn descendants(edges: &BTreeSet<(String, String)>, root: &str) -> Vec<String> {
    let nodes: BTreeSet<String> = edges.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
    nodes
        .into_iter()
        .filter(|n| reachable(edges, n, &root.to_string()))
        .collect()
}

/// Brute-force act subsumption over local names.
pub fn subsumes_oracle(
    edges: &BTreeSet<(String, String)>,
    general: &ActSpec,
    specific: &ActSpec,
) -> bool {
    reachable(edges, &specific.0, &general.0)
        && match (&general.1, &specific.1) {
            (None, _) => true,
            (Some(g), Some(s)) => reachable(edges, s, g),
            (Some(_), None) => false,
        }
        && general.2.iter().all(|(k, v)| specific.2.get(k) == Some(v))
}

pub type ActSpec = (String, Option<String>, BTreeMap<String, String>);

pub fn random_act(rng: &mut impl Rng, tokens: &[String], frames: &[String]) -> ActSpec {
    let token = tokens[rng.random_range(0..tokens.len())].clone();
    let frame = rng
        .random_bool(0.7)
        .then(|| frames[rng.random_range(0..frames.len())].clone());
    let mut args = BTreeMap::new();
    for k in ["what", "to"] {
        if rng.random_bool(0.4) {
            args.insert(k.to_string(), ["tool", "box"][rng.random_range(0..2)].to_string());
        }
    }
    (token, frame, args)
}

/// A random act below `g`: narrower token and frame, possibly more
/// arguments, occasionally one argument changed.
pub fn specialize(rng: &mut impl Rng, edges: &BTreeSet<(String, String)>, g: &ActSpec) -> ActSpec {
    let pick = |rng: &mut dyn FnMut(usize) -> usize, root: &str| {
        let d = descendants(edges, root);
        d[rng(d.len())].clone()
    };
    let mut idx = |n: usize| rng.random_range(0..n);
    let token = pick(&mut idx, &g.0);
    let frame = g.1.as_ref().map(|f| pick(&mut idx, f));
    let mut args = g.2.clone();
    if rng.random_bool(0.3) {
        args.insert("extra".into(), "x".into());
    }
    if rng.random_bool(0.1) {
        if let Some(v) = args.values_mut().next() {
            *v = if v == "tool" { "box".into() } else { "tool".into() };
        }
    }
    (token, frame, args)
}

pub fn render_da(da: &ActSpec) -> String {
    let mut parts = Vec::new();
    if let Some(f) = &da.1 {
        parts.push(f.clone());
    }
    for (k, v) in &da.2 {
        parts.push(format!("{k}={v}"));
    }
    if parts.is_empty() {
        format!("#{}", da.0)
    } else {
        format!("#{}({})", da.0, parts.join(", "))
    }
}

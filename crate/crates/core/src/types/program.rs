use std::collections::BTreeMap;

use super::*;
use crate::parser::parse_module;

/// Where module sources come from.
pub trait SourceProvider {
    /// Returns `(file name for diagnostics, source text)`.
    fn load(&self, module: &str) -> Option<(String, String)>;
}

/// In-memory sources keyed by module name; file names are `<module>.rudi`.
#[derive(Clone, Debug, Default)]
pub struct MapSources(pub BTreeMap<String, String>);

impl MapSources {
    pub fn new<I, K, V>(modules: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        MapSources(
            modules
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        )
    }
}

impl SourceProvider for MapSources {
    fn load(&self, module: &str) -> Option<(String, String)> {
        self.0
            .get(module)
            .map(|text| (format!("{module}.rudi"), text.clone()))
    }
}

/// All modules reachable from the root, checked in import order.
#[derive(Clone, Debug, Default)]
pub struct CheckedProgram {
    pub root: String,
    pub modules: BTreeMap<String, TypedModule>,
    /// Module names in the order they finished checking (imports first).
    pub order: Vec<String>,
    /// Every diagnostic of every module plus loading errors, sorted.
    pub diagnostics: Vec<Diagnostic>,
    /// Source text by file name.
    pub sources: BTreeMap<String, String>,
}

impl CheckedProgram {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(Diagnostic::is_error)
    }
}

struct Loader<'a> {
    sources: &'a dyn SourceProvider,
    ctx: &'a CheckContext,
    out: CheckedProgram,
    /// Modules on the current import path, with their file names.
    stack: Vec<(String, String)>,
    failed: BTreeMap<String, ModuleEnv>,
}

/// Loads, parses and checks `root` and everything it imports. Import cycles,
/// missing modules and syntax errors are reported as diagnostics.
pub fn check_program(
    root: &str,
    sources: &dyn SourceProvider,
    ctx: &CheckContext,
) -> CheckedProgram {
    let mut loader = Loader {
        sources,
        ctx,
        out: CheckedProgram {
            root: root.to_string(),
            ..CheckedProgram::default()
        },
        stack: Vec::new(),
        failed: BTreeMap::new(),
    };
    loader.visit(root, None);
    let mut out = loader.out;
    for m in out.modules.values() {
        out.diagnostics.extend(m.diagnostics.iter().cloned());
    }
    out.diagnostics.sort();
    out.diagnostics.dedup();
    out
}

impl Loader<'_> {
    /// Returns the module's exported environment. `from` is the importing
    /// file and the import's position.
    fn visit(&mut self, name: &str, from: Option<(&str, Span)>) -> ModuleEnv {
        if let Some(m) = self.out.modules.get(name) {
            return m.env.clone();
        }
        if let Some(env) = self.failed.get(name) {
            return env.clone();
        }
        let empty = ModuleEnv {
            name: name.to_string(),
            ..ModuleEnv::default()
        };
        if let Some(pos) = self.stack.iter().position(|(m, _)| m == name) {
            let mut path: Vec<&str> = self.stack[pos..].iter().map(|(m, _)| m.as_str()).collect();
            path.push(name);
            let (file, span) = from.expect("cycle needs an importer");
            self.out.diagnostics.push(Diagnostic::error(
                file,
                span,
                format!("import cycle: {}", path.join(" -> ")),
            ));
            return empty;
        }
        let Some((file, text)) = self.sources.load(name) else {
            let (file, span) = from.unwrap_or((name, Span { line: 1, col: 1, ..Span::default() }));
            self.out.diagnostics.push(Diagnostic::error(
                file,
                span,
                format!("cannot find module `{name}`"),
            ));
            self.failed.insert(name.to_string(), empty.clone());
            return empty;
        };
        self.out.sources.insert(file.clone(), text.clone());
        let ast = match parse_module(name, &text) {
            Ok(ast) => ast,
            Err(e) => {
                self.out.diagnostics.push(Diagnostic {
                    file: file.clone(),
                    line: e.line,
                    col: e.col,
                    severity: Severity::Error,
                    message: format!("syntax error: {}", strip_position(&e)),
                });
                self.failed.insert(name.to_string(), empty.clone());
                return empty;
            }
        };
        self.stack.push((name.to_string(), file.clone()));
        let mut envs = Vec::new();
        for imp in ast.imports() {
            envs.push(self.visit(&imp.module, Some((&file, imp.span))));
        }
        self.stack.pop();
        let refs: Vec<&ModuleEnv> = envs.iter().collect();
        let typed = check_module(&ast, &file, self.ctx, &refs);
        let env = typed.env.clone();
        self.out.modules.insert(name.to_string(), typed);
        self.out.order.push(name.to_string());
        env
    }
}

fn strip_position(e: &crate::parser::ParseError) -> String {
    let full = e.to_string();
    let prefix = format!("{}:{}: ", e.line, e.col);
    full.strip_prefix(&prefix).unwrap_or(&full).to_string()
}

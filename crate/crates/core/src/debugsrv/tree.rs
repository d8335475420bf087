use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::lower::{IrItem, IrRule, Program};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleNode {
    pub id: u32,
    pub label: String,
    pub line: u32,
    pub col: u32,
    pub children: Vec<RuleNode>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleNode {
    pub name: String,
    pub file: String,
    pub imports: Vec<String>,
    pub rules: Vec<RuleNode>,
}

/// Modules with their nested rules, in the compiled program's module order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleTree {
    pub root: String,
    pub modules: Vec<ModuleNode>,
}

fn node(r: &IrRule) -> RuleNode {
    RuleNode {
        id: r.id,
        label: r.label.clone(),
        line: r.line,
        col: r.col,
        children: r.children().into_iter().map(node).collect(),
    }
}

impl RuleNode {
    /// This rule and all rules nested in it.
    pub fn subtree_ids(&self, out: &mut BTreeSet<u32>) {
        out.insert(self.id);
        for c in &self.children {
            c.subtree_ids(out);
        }
    }

    fn find(&self, id: u32) -> Option<&RuleNode> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(id))
    }
}

impl RuleTree {
    pub fn from_program(p: &Program) -> RuleTree {
        let modules = p
            .modules
            .iter()
            .map(|m| ModuleNode {
                name: m.name.clone(),
                file: m.file.clone(),
                imports: m
                    .items
                    .iter()
                    .filter_map(|i| match i {
                        IrItem::Import(n) => Some(n.clone()),
                        _ => None,
                    })
                    .collect(),
                rules: m.rules().map(node).collect(),
            })
            .collect();
        RuleTree {
            root: p.root.clone(),
            modules,
        }
    }

    pub fn module(&self, name: &str) -> Option<&ModuleNode> {
        self.modules.iter().find(|m| m.name == name)
    }

    pub fn rule(&self, id: u32) -> Option<&RuleNode> {
        self.modules
            .iter()
            .flat_map(|m| &m.rules)
            .find_map(|r| r.find(id))
    }

    pub fn all_ids(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        for r in self.modules.iter().flat_map(|m| &m.rules) {
            r.subtree_ids(&mut out);
        }
        out
    }

    /// Rules of `module`, and with `recursive` also those of every module
    /// it imports directly or indirectly.
    pub fn module_ids(&self, module: &str, recursive: bool) -> Option<BTreeSet<u32>> {
        self.module(module)?;
        let mut seen = BTreeSet::new();
        let mut stack = vec![module.to_string()];
        let mut out = BTreeSet::new();
        while let Some(name) = stack.pop() {
            if !seen.insert(name.clone()) {
                continue;
            }
            let Some(m) = self.module(&name) else {
                continue;
            };
            for r in &m.rules {
                r.subtree_ids(&mut out);
            }
            if recursive {
                stack.extend(m.imports.iter().cloned());
            }
        }
        Some(out)
    }

    /// Rule id to rule label, for display.
    pub fn labels(&self) -> BTreeMap<u32, String> {
        fn walk(r: &RuleNode, out: &mut BTreeMap<u32, String>) {
            out.insert(r.id, r.label.clone());
            r.children.iter().for_each(|c| walk(c, out));
        }
        let mut out = BTreeMap::new();
        for r in self.modules.iter().flat_map(|m| &m.rules) {
            walk(r, &mut out);
        }
        out
    }
}

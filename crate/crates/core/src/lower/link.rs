use std::collections::BTreeMap;

use super::*;
use crate::types::{CheckedProgram, Diagnostic};

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("malformed artifact: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported artifact version {0} (expected {IR_VERSION})")]
    Version(u32),
    #[error("program has errors")]
    Diagnostics(Vec<Diagnostic>),
}

/// Lowers and links a checked program. Each import is expanded where it
/// first occurs; rule ids are assigned in pre-order over the linked rules.
pub fn lower_program(
    checked: &CheckedProgram,
    mode: GuardMode,
    ontology: &str,
) -> Result<Program, ArtifactError> {
    if checked.has_errors() {
        return Err(ArtifactError::Diagnostics(
            checked
                .diagnostics
                .iter()
                .filter(|d| d.is_error())
                .cloned()
                .collect(),
        ));
    }
    let mut modules: Vec<IrModule> = checked
        .order
        .iter()
        .map(|name| lower_module(&checked.modules[name], mode))
        .collect();
    let index: BTreeMap<String, usize> = modules
        .iter()
        .enumerate()
        .map(|(i, m)| (m.name.clone(), i))
        .collect();

    let mut order = Vec::new();
    let mut visited = vec![false; modules.len()];
    link(&modules, &index, index[&checked.root], &mut visited, &mut order);

    let mut next = 0u32;
    for r in &order {
        if let IrItem::Rule(rule) = &mut modules[r.module].items[r.item] {
            number(rule, &mut next);
        }
    }

    Ok(Program {
        version: IR_VERSION,
        root: checked.root.clone(),
        guards: mode,
        ontology: ontology.to_string(),
        modules,
        order,
        sources: checked.sources.clone(),
    })
}

fn link(
    modules: &[IrModule],
    index: &BTreeMap<String, usize>,
    m: usize,
    visited: &mut [bool],
    order: &mut Vec<ItemRef>,
) {
    visited[m] = true;
    for (i, item) in modules[m].items.iter().enumerate() {
        match item {
            IrItem::Import(name) => {
                let dep = index[name];
                if !visited[dep] {
                    link(modules, index, dep, visited, order);
                }
            }
            IrItem::Init(_) | IrItem::Rule(_) => order.push(ItemRef { module: m, item: i }),
            IrItem::Function(_) => {}
        }
    }
}

fn number(rule: &mut IrRule, next: &mut u32) {
    rule.id = *next;
    *next += 1;
    for c in rule.children_mut() {
        number(c, next);
    }
}

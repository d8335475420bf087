use super::*;
use crate::parser::parse_module;
use crate::store::load_ontology;
use crate::types::{check_module, check_program, CheckContext, MapSources, TypedModule};

const DA_ONTOLOGY: &str = crate::dacts::DEFAULT_ONTOLOGY;
const AGE_ONTOLOGY: &str = include_str!("../../corpus/user_model/ontology.nt");
const USER_MODEL: &str = include_str!("../../corpus/user_model/UserModel.rudi");
const GREETING: &str = include_str!("../../corpus/greeting/Greeting.rudi");

fn ctx() -> CheckContext {
    CheckContext {
        schema: load_ontology(&format!("{DA_ONTOLOGY}\n{AGE_ONTOLOGY}")).unwrap(),
        extensions: Vec::new(),
    }
}

fn typed(src: &str) -> TypedModule {
    let m = check_module(&parse_module("m", src).unwrap(), "m.rudi", &ctx(), &[]);
    assert!(!m.has_errors(), "{:?}", m.diagnostics);
    m
}

fn rule_cond(src: &str, mode: GuardMode) -> Condition {
    let m = typed(src);
    let r = m.ast.rules().next().unwrap();
    expand_boolean(&r.cond, &m, mode)
}

fn shape(c: &Condition) -> String {
    fn go(t: &CondTree, c: &Condition) -> String {
        match t {
            CondTree::Const(b) => b.to_string(),
            CondTree::Term(i) => c.terms[*i as usize].display(),
            CondTree::Not(x) => format!("!{}", go(x, c)),
            CondTree::And(xs) => format!(
                "and({})",
                xs.iter().map(|x| go(x, c)).collect::<Vec<_>>().join(", ")
            ),
            CondTree::Or(xs) => format!(
                "or({})",
                xs.iter().map(|x| go(x, c)).collect::<Vec<_>>().join(", ")
            ),
        }
    }
    go(&c.tree, c)
}

#[test]
fn age_has_two_base_terms() {
    let c = rule_cond(USER_MODEL, GuardMode::Strict);
    assert_eq!(c.terms.len(), 2);
    assert_eq!(shape(&c), "and(exists(user.age), user.age <= 0)");
    assert_eq!((c.terms[1].line, c.terms[1].col), (4, 5));
}

#[test]
fn chain_prefixes_are_guarded() {
    let src = "a = new Animate; r: if (a.name == \"x\" && !a.age) { }";
    let c = rule_cond(src, GuardMode::Strict);
    assert_eq!(
        shape(&c),
        "and(exists(a.name), a.name == \"x\", !exists(a.age))"
    );
    let c = rule_cond("a = new Animate; r: if (a.age + a.age > 1 || true) { }", GuardMode::Strict);
    assert_eq!(shape(&c), "or(and(exists(a.age), a.age + a.age > 1), true)");
}

#[test]
fn defaulting_mode_drops_guards() {
    let c = rule_cond(USER_MODEL, GuardMode::Defaulting);
    assert_eq!(shape(&c), "user.age <= 0");
    let Operand::Binary { lhs, .. } = &c.terms[0].operand else {
        panic!("{:?}", c.terms[0].operand)
    };
    assert!(matches!(
        **lhs,
        Operand::Default {
            default: Const::Int(0),
            ..
        }
    ));
}

#[test]
fn non_boolean_conditions_are_existence_tests() {
    let c = rule_cond("x = new Animate; r: if (x) { }", GuardMode::Strict);
    assert_eq!(shape(&c), "exists(x)");
    let c = rule_cond("b = false; r: if (b) { }", GuardMode::Strict);
    assert_eq!(shape(&c), "b");
    assert_eq!(c.terms[0].kind, TermKind::Test);
}

#[test]
fn propose_captures_outer_locals() {
    let src = "r: if (true) { da = #Greeting; n = 1; propose(\"p\") { emitDA(da); m = 2; log(\"{m}\"); } }";
    let m = typed(src);
    let ir = lower_module(&m, GuardMode::Strict);
    let IrItem::Rule(rule) = &ir.items[0] else {
        panic!()
    };
    let Some(Instr::Propose { captures, .. }) = rule.then.last() else {
        panic!("{:?}", rule.then)
    };
    assert_eq!(captures, &["da"]);
}

#[test]
fn greeting_links_and_numbers_rules() {
    let sources = MapSources::new([("Greeting", GREETING), ("UserModel", USER_MODEL)]);
    let checked = check_program("Greeting", &sources, &ctx());
    assert!(!checked.has_errors(), "{:?}", checked.diagnostics);
    let p = lower_program(&checked, GuardMode::Strict, AGE_ONTOLOGY).unwrap();
    let labels: Vec<(u32, &str)> = p.all_rules().iter().map(|r| (r.id, r.label.as_str())).collect();
    assert_eq!(labels, [(0, "set_age"), (1, "greeting")]);
    // init of UserModel runs before any rule
    assert!(matches!(p.item(p.order[0]), IrItem::Init(_)));
    assert_eq!(p.sources.len(), 2);

    let text = p.to_artifact();
    assert_eq!(Program::from_artifact(&text).unwrap(), p);
    assert_eq!(text, p.clone().to_artifact());
    let bumped = text.replacen("\"version\": 1", "\"version\": 99", 1);
    assert!(matches!(
        Program::from_artifact(&bumped),
        Err(ArtifactError::Version(99))
    ));
}

#[test]
fn diamond_import_is_linked_once() {
    let sources = MapSources::new([
        ("Top", "import A; import B; top: if (true) { }"),
        ("A", "import Base; a: if (true) { }"),
        ("B", "import Base; b: if (true) { inner: if (true) { } }"),
        ("Base", "counter = 0; base: if (true) { }"),
    ]);
    let checked = check_program("Top", &sources, &ctx());
    assert!(!checked.has_errors(), "{:?}", checked.diagnostics);
    let p = lower_program(&checked, GuardMode::Strict, "").unwrap();
    let labels: Vec<&str> = p.all_rules().iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["base", "a", "b", "inner", "top"]);
    let ids: Vec<u32> = p.all_rules().iter().map(|r| r.id).collect();
    assert_eq!(ids, [0, 1, 2, 3, 4]);
}

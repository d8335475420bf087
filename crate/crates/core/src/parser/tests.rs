use super::*;

const AGE_MODEL: &str = r#"user = new Animate;
user.name = "Joe";
set_age:
if (user.age <= 0) {
  user.age = 15;
}
"#;

const GREETING: &str = r#"greeting:
if (!saidInSession(#Greeting(Meeting))) {
  timeout("wait_for_greeting", 7000) { // Wait 7 secs before taking initiative
    if (!receivedInSession(#Greeting(Meeting)))
      propose("greet") {
        da = #InitialGreeting(Meeting);
        if (user.name) da.name = user.name;
        emitDA(da);
      }
  }

  if (receivedInSession(#Greeting(Meeting)))
    propose("greet_back") { // We assume we know the name by now
      emitDA(#ReturnGreeting(Meeting, name={user.name}));
    }
}
"#;

fn count(stmt: &Stmt, f: &dyn Fn(&StmtKind) -> bool) -> usize {
    let own = usize::from(f(&stmt.kind));
    own + match &stmt.kind {
        StmtKind::Block(ss) => ss.iter().map(|s| count(s, f)).sum(),
        StmtKind::If { then, els, .. } => {
            count(then, f) + els.as_ref().map_or(0, |e| count(e, f))
        }
        StmtKind::Rule(r) => count(&r.then, f) + r.els.as_ref().map_or(0, |e| count(e, f)),
        StmtKind::Propose { body, .. } | StmtKind::Timeout { body, .. } => count(body, f),
        _ => 0,
    }
}

#[test]
fn age_module() {
    let m = parse_module("UserModel", AGE_MODEL).unwrap();
    assert_eq!(m.definitions().count(), 2);
    let rules: Vec<_> = m.rules().collect();
    assert_eq!(rules.len(), 1);
    assert_eq!(rules[0].label, "set_age");
    match &rules[0].cond.kind {
        ExprKind::Binary { op, lhs, rhs } => {
            assert_eq!(*op, BinOp::Le);
            assert!(lhs.is_field());
            assert_eq!(rhs.kind, ExprKind::Lit(Literal::Int(0)));
        }
        other => panic!("unexpected condition {other:?}"),
    }
}

#[test]
fn greeting_module() {
    let m = parse_module("Greeting", GREETING).unwrap();
    let rules: Vec<_> = m.rules().collect();
    assert_eq!(rules.len(), 1);
    let then = &rules[0].then;
    let timeouts = count(then, &|k| matches!(k, StmtKind::Timeout { .. }));
    let proposes = count(then, &|k| matches!(k, StmtKind::Propose { .. }));
    assert_eq!((timeouts, proposes), (1, 2));
    let mut found = None;
    count(then, &|k| {
        if let StmtKind::Timeout { name, delay, .. } = k {
            assert_eq!(name, "wait_for_greeting");
            assert_eq!(delay.kind, ExprKind::Lit(Literal::Int(7000)));
        }
        false
    });
    for item in &m.items {
        if let Item::Rule(r) = item {
            found = Some(r.label.clone());
        }
    }
    assert_eq!(found.as_deref(), Some("greeting"));
}

#[test]
fn da_literal_forms() {
    let e = parse_expr("#Offer(Transporting, what=tool, to=workbench)").unwrap();
    let ExprKind::Da(da) = e.kind else { panic!() };
    assert_eq!(da.token, "Offer");
    assert_eq!(da.frame.as_deref(), Some("Transporting"));
    let keys: Vec<_> = da.args.iter().map(|a| a.key.as_str()).collect();
    assert_eq!(keys, ["what", "to"]);
    assert_eq!(da.args[0].value, DaArgValue::Const("tool".into()));

    let e = parse_expr("#ReturnGreeting(Meeting, name={user.name})").unwrap();
    let ExprKind::Da(da) = e.kind else { panic!() };
    assert!(matches!(da.args[0].value, DaArgValue::Expr(_)));

    let e = parse_expr("#Goodbye").unwrap();
    assert!(matches!(e.kind, ExprKind::Da(DaLiteral { frame: None, .. })));
    assert!(parse_expr("#Offer(Transporting, tool)").is_err());
    assert!(parse_expr("#Offer(a=1, a=2)").is_err());
}

#[test]
fn missing_body_is_error_at_end() {
    let text = "r: if (x)";
    let e = parse_module("m", text).unwrap_err();
    assert_eq!((e.line, e.col), (1, 10));
    assert!(e.message.contains("end of input"), "{e}");
    assert!(e.expected.iter().any(|s| s == "statement"));
}

#[test]
fn unlabelled_top_level_if_rejected() {
    let e = parse_module("m", "x = 1;\nif (x) x = 2;").unwrap_err();
    assert_eq!((e.line, e.col), (2, 1));
    // inside a rule an unlabelled if is an ordinary statement
    assert!(parse_module("m", "r: if (true) { if (x) x = 2; }").is_ok());
}

#[test]
fn precedence() {
    let e = parse_expr("a || b && c == 1 + 2 * 3").unwrap();
    assert_eq!(pretty_expr(&e), "a || b && c == 1 + 2 * 3");
    let ExprKind::Binary { op, .. } = e.kind else { panic!() };
    assert_eq!(op, BinOp::Or);
    let e = parse_expr("(a - b) - (c - d)").unwrap();
    assert_eq!(pretty_expr(&e), "a - b - (c - d)");
    let e = parse_expr("!(a && b)").unwrap();
    assert_eq!(pretty_expr(&e), "!(a && b)");
}

#[test]
fn interpolation_ids_and_positions() {
    let text = "r: if (true) log(\"hi {user.name}!\");";
    let m = parse_module("m", text).unwrap();
    let r = m.rules().next().unwrap();
    let mut ids = Vec::new();
    let mut check = |e: &Expr| {
        ids.push(e.id);
        assert!(e.span.start <= e.span.end && e.span.end <= text.len());
    };
    r.cond.walk(&mut check);
    let StmtKind::Expr(call) = &r.then.kind else { panic!() };
    call.walk(&mut check);
    let mut sorted = ids.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), ids.len());
    let mut field = None;
    call.walk(&mut |e| {
        if e.is_field() {
            field = Some(e.span);
        }
    });
    let span = field.unwrap();
    assert_eq!(&text[span.start..span.end], "user.name");
    assert_eq!(span.col, 23);
}

#[test]
fn statements() {
    let text = r#"
import Other;
int counter = 0;
int add(int a, int b) { return a + b; }
top: if (counter < 3) {
  counter += 1;
  nested: if (counter == 2) log("two"); else log("other");
} else {
  counter -= 1;
}
"#;
    let m = parse_module("m", text).unwrap();
    assert_eq!(m.imports().count(), 1);
    assert_eq!(m.functions().count(), 1);
    let top = m.rules().next().unwrap();
    assert_eq!(top.children().len(), 1);
    assert_eq!(top.children()[0].label, "nested");
}

#[test]
fn roundtrip_fixed() {
    for text in [AGE_MODEL, GREETING] {
        let a = parse_module("m", text).unwrap();
        let printed = pretty_module(&a);
        let b = parse_module("m", &printed).unwrap();
        assert_eq!(a, b, "{printed}");
        assert_eq!(printed, pretty_module(&b));
    }
}

#[test]
fn decimal_printing() {
    let e = parse_expr("x <= 1.0").unwrap();
    assert_eq!(pretty_expr(&e), "x <= 1.0");
    let e = parse_expr("x <= 100000000000000000000000.5").unwrap();
    assert_eq!(parse_expr(&pretty_expr(&e)).unwrap(), e);
}

#[test]
fn deep_nesting_is_an_error_not_a_crash() {
    let text = format!("r: if ({}x{}) x = 1;", "(".repeat(5000), ")".repeat(5000));
    assert!(parse_module("m", &text).is_err());
}

#[test]
fn error_display() {
    let e = parse_module("m", "r: if (x) y = ;").unwrap_err();
    let s = e.to_string();
    assert!(s.starts_with("1:15: unexpected `;`"), "{s}");
}

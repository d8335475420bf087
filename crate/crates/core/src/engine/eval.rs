use std::cmp::Ordering;
use std::sync::Arc;

use super::*;
use crate::dacts::subsumes;
use crate::lower::{
    Condition, CondTree, DaArgOp, InterpOp, Operand, Place, PropRef, TermKind,
};
use crate::parser::BinOp;
use crate::types::{Builtin, CallTarget, ResolvedOp};

pub(super) enum Flow {
    Normal,
    Return(Val),
}

impl Engine {
    fn fault(&self, message: impl Into<String>) -> EngineError {
        EngineError::Runtime {
            rule: self.current_rule,
            message: message.into(),
        }
    }

    // ---- rules and conditions ----------------------------------------

    pub(super) fn eval_rule(&mut self, rule: &IrRule, env: &mut Env) -> R<()> {
        let prev = self.current_rule.replace(rule.id);
        let mut values = vec![TermValue::Skipped; rule.cond.terms.len()];
        let result = self.eval_tree(&rule.cond.tree, &rule.cond, env, &mut values)?;
        let mut rec = self.rule_of(rule);
        rec.result = result;
        rec.terms = rule
            .cond
            .terms
            .iter()
            .zip(values)
            .map(|(t, value)| TermLog {
                id: t.id,
                text: t.display(),
                value,
            })
            .collect();
        self.publish(rec);
        let branch = if result { &rule.then } else { &rule.els };
        self.exec_block(branch, env)?;
        self.current_rule = prev;
        Ok(())
    }

    fn eval_tree(
        &mut self,
        tree: &CondTree,
        cond: &Condition,
        env: &Env,
        values: &mut [TermValue],
    ) -> R<bool> {
        Ok(match tree {
            CondTree::Const(b) => *b,
            CondTree::Term(i) => {
                let term = &cond.terms[*i as usize];
                let v = self.eval(&term.operand, env)?;
                let truth = match term.kind {
                    TermKind::Exists => v.exists(),
                    TermKind::Test => v == Val::Bool(true),
                };
                values[*i as usize] = if truth {
                    TermValue::True
                } else {
                    TermValue::False
                };
                truth
            }
            CondTree::Not(x) => !self.eval_tree(x, cond, env, values)?,
            CondTree::And(xs) => {
                for x in xs {
                    if !self.eval_tree(x, cond, env, values)? {
                        return Ok(false);
                    }
                }
                true
            }
            CondTree::Or(xs) => {
                for x in xs {
                    if self.eval_tree(x, cond, env, values)? {
                        return Ok(true);
                    }
                }
                false
            }
        })
    }

    fn test(&mut self, cond: &Condition, env: &Env) -> R<bool> {
        let mut values = vec![TermValue::Skipped; cond.terms.len()];
        self.eval_tree(&cond.tree, cond, env, &mut values)
    }

    // ---- statements --------------------------------------------------

    pub(super) fn exec_block(&mut self, block: &[Instr], env: &mut Env) -> R<Flow> {
        for i in block {
            if let Flow::Return(v) = self.exec(i, env)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn exec(&mut self, instr: &Instr, env: &mut Env) -> R<Flow> {
        match instr {
            Instr::SetLocal { name, value } => {
                let v = self.eval(value, env)?;
                env.insert(name.clone(), v);
            }
            Instr::SetGlobal {
                module,
                name,
                value,
            } => {
                let v = self.eval(value, env)?;
                self.set_global(module, name, v);
            }
            Instr::StoreWrite {
                subject,
                prop,
                value,
            } => {
                let s = self.eval(subject, env)?;
                let v = self.eval(value, env)?;
                match s {
                    Val::Object(r) => self.write(r, prop, v)?,
                    Val::Absent => log::warn!(
                        "skipping write of `{}`: the subject does not exist",
                        prop.iri.local_name()
                    ),
                    other => {
                        return Err(self.fault(format!(
                            "cannot write `{}` on a {}",
                            prop.iri.local_name(),
                            other.kind()
                        )))
                    }
                }
            }
            Instr::SetDaArg { place, key, value } => {
                let v = self.eval(value, env)?;
                if !v.exists() {
                    return Ok(Flow::Normal);
                }
                let text = v.render();
                let target = match place {
                    Place::Local(n) => env.get_mut(n),
                    Place::Global { module, name } => {
                        self.state.globals.get_mut(&(module.clone(), name.clone()))
                    }
                };
                match target {
                    Some(Val::Da(d)) => {
                        if d.arg(key) != Some(text.as_str()) {
                            d.set_arg(key, &text);
                            if matches!(place, Place::Global { .. }) {
                                self.state.globals_version += 1;
                            }
                        }
                    }
                    _ => log::warn!("skipping argument `{key}`: no dialogue act to update"),
                }
            }
            Instr::Eval(op) => {
                self.eval(op, env)?;
            }
            Instr::If { cond, then, els } => {
                let branch = if self.test(cond, env)? { then } else { els };
                return self.exec_block(branch, env);
            }
            Instr::Rule(r) => self.eval_rule(r, env)?,
            Instr::Propose {
                label,
                captures,
                body,
            } => {
                if !self.pending.iter().any(|p| &p.label == label) {
                    let frozen = capture(env, captures);
                    self.pending.push(Proposal {
                        label: label.clone(),
                        rule: self.current_rule.unwrap_or(u32::MAX),
                        iteration: self.iteration,
                        t: self.state.clock,
                        env: frozen,
                        body: body.clone(),
                    });
                }
            }
            Instr::Timeout {
                name,
                delay,
                captures,
                body,
            } => {
                let delay = match self.eval(delay, env)? {
                    Val::Int(n) => n.max(0) as u64,
                    Val::Absent => 0,
                    other => return Err(self.fault(format!("timeout delay is a {}", other.kind()))),
                };
                if !self.timeout_active(name) {
                    let frozen = capture(env, captures);
                    self.register_timeout(name, delay, frozen, body.clone());
                } else {
                    self.stats.timeouts_rejected += 1;
                }
            }
            Instr::Return(v) => {
                let v = match v {
                    Some(op) => self.eval(op, env)?,
                    None => Val::Absent,
                };
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn set_global(&mut self, module: &str, name: &str, v: Val) {
        let key = (module.to_string(), name.to_string());
        if self.state.globals.get(&key) != Some(&v) {
            self.state.globals.insert(key, v);
            self.state.globals_version += 1;
        }
    }

    /// Writes are idempotent: asserting the current value adds no tuple.
    /// Writing an absent value does nothing.
    fn write(&mut self, subject: Resource, prop: &PropRef, v: Val) -> R<()> {
        let values = match v {
            Val::Absent => return Ok(()),
            Val::List(items) => items,
            other => vec![other],
        };
        for v in values {
            let Some(sv) = v.to_store() else {
                return Err(self.fault(format!(
                    "a {} cannot be stored in `{}`",
                    v.kind(),
                    prop.iri.local_name()
                )));
            };
            let rule = self.current_rule;
            self.state
                .store
                .assert_value(subject.clone(), prop.iri.clone(), sv)
                .map_err(store_err(rule))?;
        }
        Ok(())
    }

    // ---- expressions -------------------------------------------------

    pub(super) fn eval(&mut self, op: &Operand, env: &Env) -> R<Val> {
        Ok(match op {
            Operand::Absent => Val::Absent,
            Operand::Const(c) => Val::from(c),
            Operand::Local(n) => env.get(n).cloned().unwrap_or_default(),
            Operand::Global { module, name } => self
                .state
                .globals
                .get(&(module.clone(), name.clone()))
                .cloned()
                .unwrap_or_default(),
            Operand::Class(c) => Val::Class(c.clone()),
            Operand::Prop { base, prop } => match self.eval(base, env)? {
                Val::Object(r) => self.read(&r, prop),
                Val::Absent => Val::Absent,
                other => {
                    return Err(self.fault(format!(
                        "cannot read `{}` of a {}",
                        prop.iri.local_name(),
                        other.kind()
                    )))
                }
            },
            Operand::DaArg { base, key } => match self.eval(base, env)? {
                Val::Da(d) => d
                    .arg(key)
                    .map(|s| Val::Str(s.to_string()))
                    .unwrap_or_default(),
                Val::Absent => Val::Absent,
                other => {
                    return Err(self.fault(format!("cannot read `{key}` of a {}", other.kind())))
                }
            },
            Operand::Call { target, args } => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a, env)?);
                }
                self.call(target, vals)?
            }
            Operand::New(c) => {
                let rule = self.current_rule;
                Val::Object(
                    self.state
                        .store
                        .create_instance(c)
                        .map_err(store_err(rule))?,
                )
            }
            Operand::MakeDa { token, frame, args } => {
                let mut da = DialogueAct::new(token.clone());
                da.frame = frame.clone();
                for (k, a) in args {
                    match a {
                        DaArgOp::Const(s) => da.set_arg(k, s),
                        DaArgOp::Expr(e) => {
                            let v = self.eval(e, env)?;
                            if v.exists() {
                                da.set_arg(k, &v.render());
                            }
                        }
                    }
                }
                Val::Da(da)
            }
            Operand::Interp(parts) => {
                let mut s = String::new();
                for p in parts {
                    match p {
                        InterpOp::Lit(l) => s.push_str(l),
                        InterpOp::Expr(e) => s.push_str(&self.eval(e, env)?.render()),
                    }
                }
                Val::Str(s)
            }
            Operand::Neg(x) => match self.eval(x, env)? {
                Val::Int(n) => Val::Int(
                    n.checked_neg()
                        .ok_or_else(|| self.fault("integer overflow"))?,
                ),
                Val::Decimal(d) => Val::Decimal(-d),
                Val::Absent => Val::Absent,
                other => return Err(self.fault(format!("cannot negate a {}", other.kind()))),
            },
            Operand::Binary { op, bin, lhs, rhs } => {
                let l = self.eval(lhs, env)?;
                let r = self.eval(rhs, env)?;
                self.binary(*op, *bin, l, r)?
            }
            Operand::Cond(c) => Val::Bool(self.test(c, env)?),
            Operand::Default { value, default } => match self.eval(value, env)? {
                Val::Absent => Val::from(default),
                v => v,
            },
        })
    }

    fn read(&self, subject: &Resource, prop: &PropRef) -> Val {
        let store = &self.state.store;
        if prop.functional {
            store
                .latest_value(subject, &prop.iri)
                .map(Val::from_store)
                .unwrap_or_default()
        } else {
            Val::List(
                store
                    .current_values(subject, &prop.iri)
                    .into_iter()
                    .map(Val::from_store)
                    .collect(),
            )
        }
    }

    fn binary(&self, op: ResolvedOp, bin: BinOp, l: Val, r: Val) -> R<Val> {
        use Val as V;
        if op == ResolvedOp::Concat {
            return Ok(V::Str(l.render() + &r.render()));
        }
        let comparison = bin.is_comparison() || op == ResolvedOp::Logic;
        if l == V::Absent || r == V::Absent {
            return Ok(if comparison { V::Bool(false) } else { V::Absent });
        }
        let bad = || {
            self.fault(format!(
                "operator `{}` cannot combine {} and {}",
                bin.symbol(),
                l.kind(),
                r.kind()
            ))
        };
        let schema = self.state.store.schema();
        let out = match op {
            ResolvedOp::Logic => match (&l, &r) {
                (V::Bool(a), V::Bool(b)) => V::Bool(if bin == BinOp::And { *a && *b } else { *a || *b }),
                _ => return Err(bad()),
            },
            ResolvedOp::NumericCmp => {
                let ord = match (&l, &r) {
                    (V::Int(a), V::Int(b)) | (V::Time(a), V::Time(b)) => Some(a.cmp(b)),
                    (V::Int(_) | V::Decimal(_), V::Int(_) | V::Decimal(_)) => {
                        as_f64(&l).partial_cmp(&as_f64(&r))
                    }
                    _ => return Err(bad()),
                };
                V::Bool(ord.is_some_and(|o| ordering_holds(bin, o)))
            }
            ResolvedOp::ValueEq | ResolvedOp::Identity => {
                let same = match (&l, &r) {
                    (V::Object(a) | V::Class(a), V::Object(b) | V::Class(b)) => a == b,
                    _ => l == r,
                };
                V::Bool(if bin == BinOp::Ne { !same } else { same })
            }
            ResolvedOp::DaEquivalence => match (&l, &r) {
                (V::Da(a), V::Da(b)) => {
                    let same = subsumes(a, b, schema) && subsumes(b, a, schema);
                    V::Bool(if bin == BinOp::Ne { !same } else { same })
                }
                _ => return Err(bad()),
            },
            ResolvedOp::InstanceOfTest => {
                let (obj, class) = if bin == BinOp::Le { (&l, &r) } else { (&r, &l) };
                match (obj, class) {
                    (V::Object(o), V::Class(c)) => V::Bool(
                        self.state
                            .store
                            .instance_of(o, c)
                            .map_err(|e| self.fault(e.to_string()))?,
                    ),
                    _ => return Err(bad()),
                }
            }
            ResolvedOp::SubclassTest => {
                let (sub, sup) = if bin == BinOp::Le { (&l, &r) } else { (&r, &l) };
                match (sub, sup) {
                    (V::Class(a), V::Class(b)) => V::Bool(schema.subsumed_by(a, b)),
                    _ => return Err(bad()),
                }
            }
            ResolvedOp::DaSubsumption => {
                let (specific, general) = if bin == BinOp::Le { (&l, &r) } else { (&r, &l) };
                match (specific, general) {
                    (V::Da(s), V::Da(g)) => V::Bool(subsumes(g, s, schema)),
                    _ => return Err(bad()),
                }
            }
            ResolvedOp::IntArith => match (&l, &r) {
                (V::Int(a), V::Int(b)) => {
                    let (a, b) = (*a, *b);
                    let v = match bin {
                        BinOp::Add => a.checked_add(b),
                        BinOp::Sub => a.checked_sub(b),
                        BinOp::Mul => a.checked_mul(b),
                        BinOp::Div | BinOp::Rem if b == 0 => {
                            return Err(self.fault("division by zero"))
                        }
                        BinOp::Div => a.checked_div(b),
                        BinOp::Rem => a.checked_rem(b),
                        _ => return Err(bad()),
                    };
                    V::Int(v.ok_or_else(|| self.fault("integer overflow"))?)
                }
                _ => return Err(bad()),
            },
            ResolvedOp::DecimalArith => {
                if !matches!(l, V::Int(_) | V::Decimal(_)) || !matches!(r, V::Int(_) | V::Decimal(_)) {
                    return Err(bad());
                }
                let (a, b) = (as_f64(&l), as_f64(&r));
                V::Decimal(match bin {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Rem => a % b,
                    _ => return Err(bad()),
                })
            }
            ResolvedOp::TimeArith => match (&l, &r, bin) {
                (V::Time(t), V::Int(d), BinOp::Add) | (V::Int(d), V::Time(t), BinOp::Add) => {
                    V::Time(t.saturating_add(*d))
                }
                (V::Time(t), V::Int(d), BinOp::Sub) => V::Time(t.saturating_sub(*d)),
                (V::Time(a), V::Time(b), BinOp::Sub) => V::Int(a.saturating_sub(*b)),
                _ => return Err(bad()),
            },
            ResolvedOp::Concat => unreachable!("handled above"),
        };
        Ok(out)
    }

    fn call(&mut self, target: &CallTarget, args: Vec<Val>) -> R<Val> {
        match target {
            CallTarget::Builtin(b) => self.builtin(*b, args),
            CallTarget::Extension(name) => {
                let Some(f) = self.extensions.get_mut(name) else {
                    return Err(self.fault(format!("extension `{name}` is not registered")));
                };
                f(&args).map_err(|e| EngineError::Runtime {
                    rule: self.current_rule,
                    message: format!("{name}: {e}"),
                })
            }
            CallTarget::User { module, name } => {
                let Some(&(mi, ii)) = self.functions.get(&(module.clone(), name.clone())) else {
                    return Err(self.fault(format!("unknown function `{module}::{name}`")));
                };
                if self.depth >= self.config.call_depth_cap {
                    return Err(self.fault(format!(
                        "call depth limit of {} exceeded in `{name}`",
                        self.config.call_depth_cap
                    )));
                }
                let program = Arc::clone(&self.program);
                let IrItem::Function(f) = &program.modules[mi].items[ii] else {
                    unreachable!("function index")
                };
                let mut env: Env = f.params.iter().cloned().zip(args).collect();
                self.depth += 1;
                let flow = self.exec_block(&f.body, &mut env);
                self.depth -= 1;
                Ok(match flow? {
                    Flow::Return(v) => v,
                    Flow::Normal => Val::Absent,
                })
            }
        }
    }

    fn builtin(&mut self, b: Builtin, args: Vec<Val>) -> R<Val> {
        let arg = args.into_iter().next().unwrap_or_default();
        Ok(match b {
            Builtin::SaidInSession | Builtin::ReceivedInSession => match arg {
                Val::Da(d) => {
                    let schema = self.state.store.schema();
                    let h = &self.state.history;
                    Val::Bool(if b == Builtin::SaidInSession {
                        h.said_in_session(&d, schema)
                    } else {
                        h.received_in_session(&d, schema)
                    })
                }
                _ => Val::Bool(false),
            },
            Builtin::Now => Val::Time(self.state.clock as i64),
            Builtin::EmitDa => {
                match arg {
                    Val::Da(d) => self.emit(d)?,
                    Val::Absent => log::warn!("emitDA called without a dialogue act"),
                    other => return Err(self.fault(format!("emitDA got a {}", other.kind()))),
                }
                Val::Absent
            }
            Builtin::NewSession => {
                self.state.history.new_session();
                Val::Absent
            }
            Builtin::Log => {
                log::info!("{}", arg.render());
                Val::Absent
            }
        })
    }
}

fn capture(env: &Env, names: &[String]) -> Env {
    names
        .iter()
        .filter_map(|n| env.get(n).map(|v| (n.clone(), v.clone())))
        .collect()
}

fn as_f64(v: &Val) -> f64 {
    match v {
        Val::Int(n) => *n as f64,
        Val::Decimal(d) => *d,
        _ => f64::NAN,
    }
}

fn ordering_holds(bin: BinOp, o: Ordering) -> bool {
    match bin {
        BinOp::Eq => o == Ordering::Equal,
        BinOp::Ne => o != Ordering::Equal,
        BinOp::Lt => o == Ordering::Less,
        BinOp::Le => o != Ordering::Greater,
        BinOp::Gt => o == Ordering::Greater,
        BinOp::Ge => o != Ordering::Less,
        _ => false,
    }
}

//! Stable JSON encoding of terms, assertions, and signatures.
//!
//! Terms encode as `{"op":"and","args":[...]}` with `var`/`app` carrying a
//! `name`/`symbol` field; assertions as `{"kind":"member","obj":"a","term":…}`.
//! Decoding resolves symbols against a signature, so arity and declaration
//! checks apply on import.

use serde_json::{json, Map, Value};

use crate::adl::{Assertion, AssertionSet, Component, FuncInterp, RoleExpr, Signature, Term, TermKind};
use crate::{Error, Result};

pub fn term_to_json(t: &Term) -> Value {
    match t.kind() {
        TermKind::Var(n) => json!({"op": "var", "name": n}),
        TermKind::Top => json!({"op": "top"}),
        TermKind::Bot => json!({"op": "bot"}),
        TermKind::Not(a) => json!({"op": "not", "args": [term_to_json(a)]}),
        TermKind::And(a, b) => json!({"op": "and", "args": [term_to_json(a), term_to_json(b)]}),
        TermKind::Or(a, b) => json!({"op": "or", "args": [term_to_json(a), term_to_json(b)]}),
        TermKind::App(decl, args) => {
            let args: Vec<Value> = args.iter().map(term_to_json).collect();
            json!({"op": "app", "symbol": decl.name, "args": args})
        }
    }
}

pub fn term_from_json(v: &Value, sig: &Signature) -> Result<Term> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Invalid(format!("term must be an object, got {v}")))?;
    let op = obj
        .get("op")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Invalid("term missing \"op\"".into()))?;
    let args = |n: usize| -> Result<Vec<Term>> {
        let raw = obj
            .get("args")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Invalid(format!("\"{op}\" needs an args array")))?;
        if raw.len() != n {
            return Err(Error::Invalid(format!("\"{op}\" expects {n} args, got {}", raw.len())));
        }
        raw.iter().map(|a| term_from_json(a, sig)).collect()
    };
    match op {
        "var" => {
            let name = obj
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Invalid("var needs a name".into()))?;
            if name.starts_with(crate::adl::SURROGATE_PREFIX) {
                Ok(Term::var(name))
            } else {
                sig.mk_var(name)
            }
        }
        "top" => Ok(Term::top()),
        "bot" => Ok(Term::bot()),
        "not" => {
            let a = args(1)?;
            Ok(Term::not(&a[0]))
        }
        "and" => {
            let a = args(2)?;
            Ok(Term::and(&a[0], &a[1]))
        }
        "or" => {
            let a = args(2)?;
            Ok(Term::or(&a[0], &a[1]))
        }
        "app" => {
            let symbol = obj
                .get("symbol")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Invalid("app needs a symbol".into()))?;
            let raw = obj
                .get("args")
                .and_then(Value::as_array)
                .cloned()
                .unwrap_or_default();
            let parsed: Result<Vec<Term>> = raw.iter().map(|a| term_from_json(a, sig)).collect();
            sig.mk_app(symbol, &parsed?)
        }
        other => Err(Error::Invalid(format!("unknown term op \"{other}\""))),
    }
}

pub fn assertion_to_json(a: &Assertion) -> Value {
    match a {
        Assertion::Inclusion(l, r) => {
            json!({"kind": "inclusion", "lhs": term_to_json(l), "rhs": term_to_json(r)})
        }
        Assertion::Rel { rel, from, to } => {
            json!({"kind": "rel", "rel": rel.name, "from": from, "to": to})
        }
        Assertion::Member { obj, term } => {
            json!({"kind": "member", "obj": obj, "term": term_to_json(term)})
        }
    }
}

pub fn assertion_from_json(v: &Value, sig: &Signature) -> Result<Assertion> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Invalid("assertion must be an object".into()))?;
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Invalid("assertion missing \"kind\"".into()))?;
    let field = |name: &str| -> Result<&str> {
        obj.get(name)
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Invalid(format!("assertion missing \"{name}\"")))
    };
    match kind {
        "inclusion" => Ok(Assertion::Inclusion(
            term_from_json(
                obj.get("lhs").ok_or_else(|| Error::Invalid("missing lhs".into()))?,
                sig,
            )?,
            term_from_json(
                obj.get("rhs").ok_or_else(|| Error::Invalid("missing rhs".into()))?,
                sig,
            )?,
        )),
        "rel" => {
            let rel_name = field("rel")?;
            let rel = sig
                .relation(rel_name)
                .ok_or_else(|| Error::UndeclaredSymbol(rel_name.to_string()))?
                .clone();
            Ok(Assertion::Rel {
                rel,
                from: field("from")?.to_string(),
                to: field("to")?.to_string(),
            })
        }
        "member" => Ok(Assertion::Member {
            obj: field("obj")?.to_string(),
            term: term_from_json(
                obj.get("term").ok_or_else(|| Error::Invalid("missing term".into()))?,
                sig,
            )?,
        }),
        other => Err(Error::Invalid(format!("unknown assertion kind \"{other}\""))),
    }
}

pub fn assertion_set_to_json(gamma: &AssertionSet) -> Value {
    Value::Array(gamma.iter().map(assertion_to_json).collect())
}

pub fn assertion_set_from_json(v: &Value, sig: &Signature) -> Result<AssertionSet> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Invalid("assertion set must be an array".into()))?;
    let mut out = AssertionSet::new();
    for a in arr {
        out.insert(assertion_from_json(a, sig)?);
    }
    Ok(out)
}

fn role_expr_to_json(r: &RoleExpr) -> Value {
    match r {
        RoleExpr::Name(n) => json!(n),
        RoleExpr::Complement(a) => json!({"op": "not", "args": [role_expr_to_json(a)]}),
        RoleExpr::And(a, b) => json!({"op": "and", "args": [role_expr_to_json(a), role_expr_to_json(b)]}),
        RoleExpr::Or(a, b) => json!({"op": "or", "args": [role_expr_to_json(a), role_expr_to_json(b)]}),
    }
}

pub fn signature_to_json(sig: &Signature) -> Value {
    let mut m = Map::new();
    m.insert(
        "set_vars".into(),
        Value::Array(sig.set_vars().iter().map(|v| json!(v)).collect()),
    );
    m.insert(
        "obj_vars".into(),
        Value::Array(sig.obj_vars().iter().map(|v| json!(v)).collect()),
    );
    m.insert(
        "relations".into(),
        Value::Array(
            sig.relations()
                .iter()
                .map(|r| {
                    json!({
                        "name": r.name,
                        "component": r.component.label(),
                        "transitive": r.transitive,
                        "functional": r.functional,
                    })
                })
                .collect(),
        ),
    );
    m.insert(
        "functions".into(),
        Value::Array(
            sig.functions()
                .iter()
                .map(|f| {
                    let interp = match &f.interp {
                        FuncInterp::Exists(r) => json!({"kind": "exists", "role": role_expr_to_json(r)}),
                        FuncInterp::Forall(r) => json!({"kind": "forall", "role": role_expr_to_json(r)}),
                        FuncInterp::AtLeast(n, r) => {
                            json!({"kind": "atleast", "n": n, "role": role_expr_to_json(r)})
                        }
                        FuncInterp::AtMost(n, r) => {
                            json!({"kind": "atmost", "n": n, "role": role_expr_to_json(r)})
                        }
                        FuncInterp::ExistsUniversal => json!({"kind": "existsU"}),
                        FuncInterp::ForallUniversal => json!({"kind": "forallU"}),
                        FuncInterp::Uninterpreted => json!({"kind": "uninterpreted"}),
                    };
                    json!({
                        "name": f.name,
                        "arity": f.arity,
                        "component": f.component.label(),
                        "interp": interp,
                    })
                })
                .collect(),
        ),
    );
    Value::Object(m)
}

fn component_from_label(s: &str) -> Result<Component> {
    match s {
        "1" => Ok(Component::C1),
        "2" => Ok(Component::C2),
        "shared" => Ok(Component::Shared),
        other => Err(Error::Invalid(format!("unknown component tag \"{other}\""))),
    }
}

fn role_expr_from_json(v: &Value) -> Result<RoleExpr> {
    if let Some(name) = v.as_str() {
        return Ok(RoleExpr::Name(name.to_string()));
    }
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Invalid("role expression must be a string or object".into()))?;
    let op = obj
        .get("op")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Invalid("role expression missing op".into()))?;
    let args = obj
        .get("args")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Invalid("role expression missing args".into()))?;
    match (op, args.len()) {
        ("not", 1) => Ok(RoleExpr::Complement(Box::new(role_expr_from_json(&args[0])?))),
        ("and", 2) => Ok(RoleExpr::And(
            Box::new(role_expr_from_json(&args[0])?),
            Box::new(role_expr_from_json(&args[1])?),
        )),
        ("or", 2) => Ok(RoleExpr::Or(
            Box::new(role_expr_from_json(&args[0])?),
            Box::new(role_expr_from_json(&args[1])?),
        )),
        _ => Err(Error::Invalid(format!("bad role expression op \"{op}\""))),
    }
}

pub fn signature_from_json(v: &Value) -> Result<Signature> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Invalid("signature must be an object".into()))?;
    let mut b = Signature::builder();
    let strings = |key: &str| -> Vec<String> {
        obj.get(key)
            .and_then(Value::as_array)
            .map(|a| {
                a.iter()
                    .filter_map(Value::as_str)
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default()
    };
    for name in strings("set_vars") {
        b = b.set_var(&name)?;
    }
    for name in strings("obj_vars") {
        b = b.obj_var(&name)?;
    }
    for r in obj.get("relations").and_then(Value::as_array).into_iter().flatten() {
        let name = r
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Invalid("relation missing name".into()))?;
        let component = component_from_label(
            r.get("component")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Invalid("relation missing component".into()))?,
        )?;
        let transitive = r.get("transitive").and_then(Value::as_bool).unwrap_or(false);
        let functional = r.get("functional").and_then(Value::as_bool).unwrap_or(false);
        b = b.role(component, name, transitive, functional)?;
    }
    for f in obj.get("functions").and_then(Value::as_array).into_iter().flatten() {
        let name = f
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Invalid("function missing name".into()))?;
        // exists:/forall: symbols were installed by the role declarations.
        if name.starts_with("exists:") || name.starts_with("forall:") {
            continue;
        }
        let arity = f.get("arity").and_then(Value::as_u64).unwrap_or(0) as usize;
        let component = component_from_label(
            f.get("component")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Invalid("function missing component".into()))?,
        )?;
        let interp_v = f
            .get("interp")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::Invalid("function missing interp".into()))?;
        let kind = interp_v
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Invalid("interp missing kind".into()))?;
        let role = || -> Result<RoleExpr> {
            role_expr_from_json(
                interp_v
                    .get("role")
                    .ok_or_else(|| Error::Invalid("interp missing role".into()))?,
            )
        };
        let n = || interp_v.get("n").and_then(Value::as_u64).unwrap_or(0) as u32;
        let interp = match kind {
            "exists" => FuncInterp::Exists(role()?),
            "forall" => FuncInterp::Forall(role()?),
            "atleast" => FuncInterp::AtLeast(n(), role()?),
            "atmost" => FuncInterp::AtMost(n(), role()?),
            "existsU" => FuncInterp::ExistsUniversal,
            "forallU" => FuncInterp::ForallUniversal,
            "uninterpreted" => FuncInterp::Uninterpreted,
            other => return Err(Error::Invalid(format!("unknown interp kind \"{other}\""))),
        };
        b = b.function_decl(name, arity, component, interp)?;
    }
    Ok(b.build())
}

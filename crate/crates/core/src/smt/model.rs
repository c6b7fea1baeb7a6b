//! Best-effort decoding of a solver model back into a [`ProtocolState`].
//!
//! Understands the shapes cvc5 prints for the emitted declarations: constant
//! or `ite`-chain function bodies and `set.union`/`set.singleton` sets.

use std::collections::BTreeMap;

use thiserror::Error;

use super::SmtBounds;
use crate::model::{
    Block, BlockForest, BlockId, Checkpoint, FfgVote, ProtocolState, SignedVote, ValidatorId, GENESIS_LABEL,
};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("cannot decode model: {0}")]
pub struct DecodeError(String);

fn err<T>(msg: impl Into<String>) -> Result<T, DecodeError> {
    Err(DecodeError(msg.into()))
}

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn parse_all(text: &str) -> Result<Vec<Sexp>, DecodeError> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut chars = text.chars().peekable();
    while let Some(&ch) = chars.peek() {
        match ch {
            '(' => {
                chars.next();
                stack.push(Vec::new());
            }
            ')' => {
                chars.next();
                let done = stack.pop().ok_or_else(|| DecodeError("unbalanced `)`".into()))?;
                match stack.last_mut() {
                    Some(top) => top.push(Sexp::List(done)),
                    None => return err("unbalanced `)`"),
                }
            }
            ';' => while chars.next().is_some_and(|c| c != '\n') {},
            c if c.is_whitespace() => {
                chars.next();
            }
            '|' | '"' => {
                chars.next();
                let mut s = String::new();
                for c in chars.by_ref() {
                    if c == ch {
                        break;
                    }
                    s.push(c);
                }
                stack.last_mut().expect("root").push(Sexp::Atom(s));
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                stack.last_mut().expect("root").push(Sexp::Atom(s));
            }
        }
    }
    if stack.len() != 1 {
        return err("unbalanced `(`");
    }
    Ok(stack.pop().expect("root"))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Value {
    Sym(String),
    Int(i64),
    Bool(bool),
    App(String, Vec<Value>),
    Set(Vec<Value>),
}

struct Def {
    params: Vec<String>,
    body: Sexp,
}

fn eval(e: &Sexp, env: &BTreeMap<&str, Value>) -> Result<Value, DecodeError> {
    match e {
        Sexp::Atom(a) => {
            if let Some(v) = env.get(a.as_str()) {
                return Ok(v.clone());
            }
            if let Ok(n) = a.parse::<i64>() {
                return Ok(Value::Int(n));
            }
            Ok(match a.as_str() {
                "true" => Value::Bool(true),
                "false" => Value::Bool(false),
                _ => Value::Sym(a.clone()),
            })
        }
        Sexp::List(items) => {
            let head = match items.first() {
                Some(Sexp::Atom(h)) => h.as_str(),
                Some(Sexp::List(l)) if matches!(l.get(1), Some(Sexp::Atom(a)) if a == "set.empty") => {
                    return Ok(Value::Set(Vec::new()))
                }
                _ => return err("unexpected expression head"),
            };
            let args = || items[1..].iter().map(|x| eval(x, env)).collect::<Result<Vec<_>, _>>();
            match head {
                "as" if matches!(items.get(1), Some(Sexp::Atom(a)) if a == "set.empty") => Ok(Value::Set(Vec::new())),
                "ite" => {
                    if items.len() != 4 {
                        return err("malformed ite");
                    }
                    match eval(&items[1], env)? {
                        Value::Bool(true) => eval(&items[2], env),
                        Value::Bool(false) => eval(&items[3], env),
                        _ => err("non-boolean ite condition"),
                    }
                }
                "=" => {
                    let a = args()?;
                    Ok(Value::Bool(a.windows(2).all(|w| w[0] == w[1])))
                }
                "-" => match args()?.as_slice() {
                    [Value::Int(n)] => Ok(Value::Int(-n)),
                    [Value::Int(a), Value::Int(b)] => Ok(Value::Int(a - b)),
                    _ => err("malformed subtraction"),
                },
                "set.singleton" => Ok(Value::Set(args()?)),
                "set.union" | "set.insert" => {
                    let mut out = Vec::new();
                    for v in args()? {
                        match v {
                            Value::Set(s) => out.extend(s),
                            other => out.push(other),
                        }
                    }
                    out.sort();
                    out.dedup();
                    Ok(Value::Set(out))
                }
                _ => Ok(Value::App(head.to_string(), args()?)),
            }
        }
    }
}

fn definitions(model: &str) -> Result<BTreeMap<String, Def>, DecodeError> {
    let mut defs = BTreeMap::new();
    let mut pending: Vec<Sexp> = parse_all(model)?;
    while let Some(e) = pending.pop() {
        let Sexp::List(items) = e else { continue };
        match items.first() {
            Some(Sexp::Atom(h)) if h == "define-fun" && items.len() == 5 => {
                let (Sexp::Atom(name), Sexp::List(params)) = (&items[1], &items[2]) else {
                    return err("malformed define-fun");
                };
                let params = params
                    .iter()
                    .map(|p| match p {
                        Sexp::List(pair) => match pair.first() {
                            Some(Sexp::Atom(a)) => Ok(a.clone()),
                            _ => err("malformed parameter"),
                        },
                        _ => err("malformed parameter"),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                defs.insert(name.clone(), Def { params, body: items[4].clone() });
            }
            // the model itself is one list of define-funs
            _ => pending.extend(items),
        }
    }
    Ok(defs)
}

fn apply(defs: &BTreeMap<String, Def>, name: &str, arg: Option<&str>) -> Result<Value, DecodeError> {
    let def = defs.get(name).ok_or_else(|| DecodeError(format!("model lacks `{name}`")))?;
    let mut env = BTreeMap::new();
    if let (Some(p), Some(a)) = (def.params.first(), arg) {
        env.insert(p.as_str(), Value::Sym(a.to_string()));
    }
    eval(&def.body, &env)
}

fn index(sym: &Value, prefix: &str, count: usize) -> Result<usize, DecodeError> {
    match sym {
        Value::Sym(s) => match s.strip_prefix(prefix).and_then(|r| r.parse::<usize>().ok()) {
            Some(i) if (1..=count).contains(&i) => Ok(i - 1),
            _ => err(format!("unexpected `{s}`")),
        },
        other => err(format!("expected a {prefix} constant, got {other:?}")),
    }
}

fn slot_value(v: Value, what: &str) -> Result<u32, DecodeError> {
    match v {
        Value::Int(n) if n >= 0 => u32::try_from(n).or_else(|_| err(format!("{what} out of range"))),
        other => err(format!("{what}: expected a non-negative integer, got {other:?}")),
    }
}

/// Rebuilds the block tree, the checkpoints and the vote set of a `sat`
/// answer. Block `HashK` becomes block id `K - 1` labelled `hashK`.
pub fn decode_model(model: &str, bounds: &SmtBounds) -> Result<ProtocolState, DecodeError> {
    let defs = definitions(model)?;
    let h = bounds.hashes;
    let mut blocks = Vec::with_capacity(h);
    for i in 0..h {
        let name = format!("Hash{}", i + 1);
        let slot = if i == 0 { 0 } else { slot_value(apply(&defs, "slot", Some(&name))?, "slot")? };
        let parent = if i == 0 {
            None
        } else {
            Some(BlockId(index(&apply(&defs, "parent_of", Some(&name))?, "Hash", h)? as u16))
        };
        let label = if i == 0 { GENESIS_LABEL.to_string() } else { format!("hash{}", i + 1) };
        blocks.push(Block { id: BlockId(i as u16), label, slot, parent });
    }
    let forest = BlockForest::from_blocks(blocks).map_err(|e| DecodeError(e.to_string()))?;
    let mut checkpoints = Vec::with_capacity(bounds.checkpoints);
    for j in 0..bounds.checkpoints {
        let name = format!("C{}", j + 1);
        let block = BlockId(index(&apply(&defs, "checkpoint_block", Some(&name))?, "Hash", h)? as u16);
        let c = slot_value(apply(&defs, "checkpoint_slot", Some(&name))?, "checkpoint slot")?;
        checkpoints.push(Checkpoint::on(&forest, block, c).map_err(|e| DecodeError(e.to_string()))?);
    }
    let Value::Set(elems) = apply(&defs, "votes", None)? else {
        return err("`votes` is not a set");
    };
    let mut votes = Vec::with_capacity(elems.len());
    for e in elems {
        let Value::App(ctor, args) = e else { return err("vote is not a constructor term") };
        if ctor != "Vote" || args.len() != 3 {
            return err(format!("unexpected vote term `{ctor}`"));
        }
        let s = checkpoints[index(&args[0], "C", bounds.checkpoints)?];
        let t = checkpoints[index(&args[1], "C", bounds.checkpoints)?];
        let v = index(&args[2], "Node", bounds.nodes)?;
        votes.push(SignedVote { vote: FfgVote::new(s, t), validator: ValidatorId(v as u32) });
    }
    ProtocolState::new(forest, bounds.nodes as u32, votes, bounds.slot_rule).map_err(|e| DecodeError(e.to_string()))
}

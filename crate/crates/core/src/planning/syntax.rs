//! Reader and printer for the S-expression STRIPS format.
//!
//! ```text
//! (domain NAME
//!   (predicates (PRED ?v ...) ...)
//!   (action NAME
//!     :parameters (?v ...)
//!     :precondition ((PRED ?v ...) ...)
//!     :add ((PRED ?v ...) ...)
//!     :delete ((PRED ?v ...) ...)))
//!
//! (problem NAME
//!   (domain NAME)
//!   (objects OBJ ...)
//!   (init (PRED OBJ ...) ...)
//!   (goal (PRED OBJ ...) ...))
//! ```
//!
//! `;` starts a comment that runs to the end of the line.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use smallvec::SmallVec;
use thiserror::Error;

use super::{ActionSchema, Atom, AtomSet, Domain, Predicate, Problem, SchemaAtom};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: undeclared predicate `{name}`")]
    UndeclaredPredicate {
        line: usize,
        column: usize,
        name: String,
    },
    #[error("{line}:{column}: `{name}` expects {expected} arguments, found {found}")]
    ArityMismatch {
        line: usize,
        column: usize,
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("{line}:{column}: undeclared object `{name}`")]
    UndeclaredObject {
        line: usize,
        column: usize,
        name: String,
    },
    #[error("{line}:{column}: variable `{name}` is not a parameter of `{action}`")]
    UnboundVariable {
        line: usize,
        column: usize,
        name: String,
        action: String,
    },
    #[error("{line}:{column}: duplicate declaration of `{name}`")]
    Duplicate {
        line: usize,
        column: usize,
        name: String,
    },
    #[error("action `{action}` both adds and deletes {atom}")]
    ConflictingEffects { action: String, atom: String },
    #[error("problem is for domain `{found}`, expected `{expected}`")]
    DomainMismatch { expected: String, found: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

#[derive(Debug)]
enum Sexp {
    Symbol(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::Symbol(_, p) | Sexp::List(_, p) => *p,
        }
    }
}

fn syntax(pos: Pos, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line: pos.line,
        column: pos.column,
        message: message.into(),
    }
}

enum Token {
    Open(Pos),
    Close(Pos),
    Symbol(String, Pos),
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut line = 1;
    let mut column = 1;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, column };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                column = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                column += 1;
            }
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => {
                chars.next();
                column += 1;
                tokens.push(Token::Open(pos));
            }
            ')' => {
                chars.next();
                column += 1;
                tokens.push(Token::Close(pos));
            }
            _ => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    word.push(c);
                    chars.next();
                    column += 1;
                }
                tokens.push(Token::Symbol(word, pos));
            }
        }
    }
    tokens
}

fn read_sexp(text: &str) -> Result<Sexp, ParseError> {
    let tokens = tokenize(text);
    let mut stack: Vec<(Vec<Sexp>, Pos)> = Vec::new();
    let mut result = None;
    for token in tokens {
        if result.is_some() {
            let pos = match token {
                Token::Open(p) | Token::Close(p) | Token::Symbol(_, p) => p,
            };
            return Err(syntax(pos, "trailing input after top-level expression"));
        }
        match token {
            Token::Open(p) => stack.push((Vec::new(), p)),
            Token::Close(p) => {
                let (items, open) = stack.pop().ok_or_else(|| syntax(p, "unbalanced `)`"))?;
                let list = Sexp::List(items, open);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => result = Some(list),
                }
            }
            Token::Symbol(s, p) => match stack.last_mut() {
                Some((parent, _)) => parent.push(Sexp::Symbol(s, p)),
                None => return Err(syntax(p, format!("expected `(`, found `{s}`"))),
            },
        }
    }
    if let Some((_, open)) = stack.pop() {
        return Err(syntax(open, "unclosed `(`"));
    }
    result.ok_or_else(|| syntax(Pos { line: 1, column: 1 }, "empty input"))
}

fn as_list<'a>(sexp: &'a Sexp, what: &str) -> Result<&'a [Sexp], ParseError> {
    match sexp {
        Sexp::List(items, _) => Ok(items),
        Sexp::Symbol(s, p) => Err(syntax(*p, format!("expected {what}, found `{s}`"))),
    }
}

fn as_symbol<'a>(sexp: &'a Sexp, what: &str) -> Result<&'a str, ParseError> {
    match sexp {
        Sexp::Symbol(s, _) => Ok(s),
        Sexp::List(_, p) => Err(syntax(*p, format!("expected {what}, found a list"))),
    }
}

/// Splits `(keyword rest...)` and checks the keyword.
fn section<'a>(sexp: &'a Sexp, keyword: &str) -> Result<&'a [Sexp], ParseError> {
    let items = as_list(sexp, &format!("`({keyword} ...)`"))?;
    match items.split_first() {
        Some((Sexp::Symbol(head, _), rest)) if head == keyword => Ok(rest),
        _ => Err(syntax(sexp.pos(), format!("expected `({keyword} ...)`"))),
    }
}

fn section_name(sexp: &Sexp) -> Option<&str> {
    match sexp {
        Sexp::List(items, _) => match items.first() {
            Some(Sexp::Symbol(s, _)) => Some(s),
            _ => None,
        },
        Sexp::Symbol(..) => None,
    }
}

pub fn parse_domain(text: &str) -> Result<Domain, ParseError> {
    let top = read_sexp(text)?;
    let body = section(&top, "domain")?;
    let (name, rest) = body
        .split_first()
        .ok_or_else(|| syntax(top.pos(), "missing domain name"))?;
    let name = as_symbol(name, "domain name")?.to_string();

    let mut predicates: Vec<Predicate> = Vec::new();
    let mut schemas: Vec<ActionSchema> = Vec::new();
    let mut seen_predicates = false;
    let mut domain = Domain::new(name.clone(), Vec::new(), Vec::new());
    for item in rest {
        match section_name(item) {
            Some("predicates") if !seen_predicates => {
                seen_predicates = true;
                for decl in section(item, "predicates")? {
                    let parts = as_list(decl, "predicate declaration")?;
                    let (head, vars) = parts
                        .split_first()
                        .ok_or_else(|| syntax(decl.pos(), "empty predicate declaration"))?;
                    let pname = as_symbol(head, "predicate name")?;
                    for v in vars {
                        let v = as_symbol(v, "variable")?;
                        if !v.starts_with('?') {
                            return Err(syntax(decl.pos(), format!("expected variable, found `{v}`")));
                        }
                    }
                    if predicates.iter().any(|p| p.name == pname) {
                        let pos = head.pos();
                        return Err(ParseError::Duplicate {
                            line: pos.line,
                            column: pos.column,
                            name: pname.to_string(),
                        });
                    }
                    predicates.push(Predicate {
                        name: pname.to_string(),
                        arity: vars.len(),
                    });
                }
                domain = Domain::new(name.clone(), predicates.clone(), Vec::new());
            }
            Some("action") => {
                let schema = parse_schema(item, &domain)?;
                if schemas.iter().any(|s| s.name == schema.name) {
                    let pos = item.pos();
                    return Err(ParseError::Duplicate {
                        line: pos.line,
                        column: pos.column,
                        name: schema.name,
                    });
                }
                schemas.push(schema);
            }
            _ => return Err(syntax(item.pos(), "expected `(predicates ...)` or `(action ...)`")),
        }
    }
    Ok(Domain::new(name, predicates, schemas))
}

fn parse_schema(sexp: &Sexp, domain: &Domain) -> Result<ActionSchema, ParseError> {
    let body = section(sexp, "action")?;
    let (name, mut rest) = body
        .split_first()
        .ok_or_else(|| syntax(sexp.pos(), "missing action name"))?;
    let name = as_symbol(name, "action name")?.to_string();

    let mut params: Vec<String> = Vec::new();
    let mut precondition = Vec::new();
    let mut add = Vec::new();
    let mut delete = Vec::new();
    let mut seen = HashSet::new();
    while let Some((key, tail)) = rest.split_first() {
        let key_name = as_symbol(key, "keyword")?;
        let (value, tail) = tail
            .split_first()
            .ok_or_else(|| syntax(key.pos(), format!("missing value for `{key_name}`")))?;
        if !seen.insert(key_name) {
            return Err(syntax(key.pos(), format!("repeated `{key_name}`")));
        }
        match key_name {
            ":parameters" => {
                if !precondition.is_empty() || !add.is_empty() || !delete.is_empty() {
                    return Err(syntax(key.pos(), "`:parameters` must come first"));
                }
                for v in as_list(value, "parameter list")? {
                    let var = as_symbol(v, "variable")?;
                    if !var.starts_with('?') {
                        return Err(syntax(v.pos(), format!("expected variable, found `{var}`")));
                    }
                    if params.iter().any(|p| p == var) {
                        let pos = v.pos();
                        return Err(ParseError::Duplicate {
                            line: pos.line,
                            column: pos.column,
                            name: var.to_string(),
                        });
                    }
                    params.push(var.to_string());
                }
            }
            ":precondition" => precondition = parse_schema_atoms(value, domain, &params, &name)?,
            ":add" => add = parse_schema_atoms(value, domain, &params, &name)?,
            ":delete" => delete = parse_schema_atoms(value, domain, &params, &name)?,
            other => return Err(syntax(key.pos(), format!("unknown keyword `{other}`"))),
        }
        rest = tail;
    }
    if let Some(atom) = add.iter().find(|a| delete.contains(a)) {
        let text = format!(
            "({}{})",
            domain.predicate(atom.predicate).name,
            atom.args.iter().map(|&i| format!(" {}", params[i])).collect::<String>()
        );
        return Err(ParseError::ConflictingEffects { action: name, atom: text });
    }
    Ok(ActionSchema {
        name,
        params,
        precondition,
        add,
        delete,
    })
}

fn parse_schema_atoms(
    sexp: &Sexp,
    domain: &Domain,
    params: &[String],
    action: &str,
) -> Result<Vec<SchemaAtom>, ParseError> {
    let mut atoms: Vec<SchemaAtom> = Vec::new();
    for item in as_list(sexp, "atom list")? {
        let (predicate, words) = resolve_atom(item, domain)?;
        let mut args = SmallVec::new();
        for w in words {
            let var = as_symbol(w, "variable")?;
            let pos = w.pos();
            let index = params.iter().position(|p| p == var).ok_or_else(|| ParseError::UnboundVariable {
                line: pos.line,
                column: pos.column,
                name: var.to_string(),
                action: action.to_string(),
            })?;
            args.push(index);
        }
        let atom = SchemaAtom { predicate, args };
        if !atoms.contains(&atom) {
            atoms.push(atom);
        }
    }
    Ok(atoms)
}

/// Looks up the head of `(pred ...)` and checks its arity.
fn resolve_atom<'a>(
    sexp: &'a Sexp,
    domain: &Domain,
) -> Result<(super::PredicateId, &'a [Sexp]), ParseError> {
    let parts = as_list(sexp, "atom")?;
    let (head, args) = parts
        .split_first()
        .ok_or_else(|| syntax(sexp.pos(), "empty atom"))?;
    let name = as_symbol(head, "predicate name")?;
    let pos = head.pos();
    let pid = domain.predicate_id(name).ok_or_else(|| ParseError::UndeclaredPredicate {
        line: pos.line,
        column: pos.column,
        name: name.to_string(),
    })?;
    let expected = domain.predicate(pid).arity;
    if expected != args.len() {
        return Err(ParseError::ArityMismatch {
            line: pos.line,
            column: pos.column,
            name: name.to_string(),
            expected,
            found: args.len(),
        });
    }
    Ok((pid, args))
}

pub fn parse_problem(text: &str, domain: Arc<Domain>) -> Result<Problem, ParseError> {
    let top = read_sexp(text)?;
    let body = section(&top, "problem")?;
    let mut items = body.iter();
    let name = items
        .next()
        .ok_or_else(|| syntax(top.pos(), "missing problem name"))?;
    let name = as_symbol(name, "problem name")?.to_string();

    let top_pos = top.pos();
    fn next_section<'a>(
        items: &mut std::slice::Iter<'a, Sexp>,
        keyword: &str,
        pos: Pos,
    ) -> Result<&'a Sexp, ParseError> {
        items
            .next()
            .ok_or_else(|| syntax(pos, format!("missing `({keyword} ...)`")))
    }

    let domain_section = next_section(&mut items, "domain", top_pos)?;
    let domain_name = section(domain_section, "domain")?;
    match domain_name {
        [Sexp::Symbol(d, _)] if *d == domain.name => {}
        [Sexp::Symbol(d, _)] => {
            return Err(ParseError::DomainMismatch {
                expected: domain.name.clone(),
                found: d.clone(),
            })
        }
        _ => return Err(syntax(domain_section.pos(), "expected `(domain NAME)`")),
    }

    let mut objects: Vec<String> = Vec::new();
    for o in section(next_section(&mut items, "objects", top_pos)?, "objects")? {
        let obj = as_symbol(o, "object name")?;
        if objects.iter().any(|x| x == obj) {
            let pos = o.pos();
            return Err(ParseError::Duplicate {
                line: pos.line,
                column: pos.column,
                name: obj.to_string(),
            });
        }
        objects.push(obj.to_string());
    }
    let placeholder = Problem::new(
        name.clone(),
        domain.clone(),
        objects.clone(),
        AtomSet::new(),
        AtomSet::new(),
    );
    let init = parse_ground_atoms(section(next_section(&mut items, "init", top_pos)?, "init")?, &placeholder)?;
    let goal = parse_ground_atoms(section(next_section(&mut items, "goal", top_pos)?, "goal")?, &placeholder)?;
    if let Some(extra) = items.next() {
        return Err(syntax(extra.pos(), "unexpected section after `(goal ...)`"));
    }
    Ok(Problem::new(name, domain, objects, init, goal))
}

fn parse_ground_atoms(items: &[Sexp], problem: &Problem) -> Result<AtomSet, ParseError> {
    let mut atoms = Vec::with_capacity(items.len());
    for item in items {
        let (predicate, words) = resolve_atom(item, &problem.domain)?;
        let mut args = SmallVec::new();
        for w in words {
            let obj = as_symbol(w, "object name")?;
            let pos = w.pos();
            args.push(problem.object_id(obj).ok_or_else(|| ParseError::UndeclaredObject {
                line: pos.line,
                column: pos.column,
                name: obj.to_string(),
            })?);
        }
        atoms.push(Atom { predicate, args });
    }
    Ok(atoms.into_iter().collect())
}

const VAR_NAMES: &[&str] = &["?a", "?b", "?c", "?d", "?e", "?f", "?g", "?h"];

fn var_name(i: usize) -> String {
    VAR_NAMES
        .get(i)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("?v{i}"))
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(domain {}", self.name)?;
        write!(f, "  (predicates")?;
        for p in &self.predicates {
            write!(f, " ({}", p.name)?;
            for i in 0..p.arity {
                write!(f, " {}", var_name(i))?;
            }
            write!(f, ")")?;
        }
        write!(f, ")")?;
        for schema in &self.schemas {
            write!(f, "\n  (action {}\n    :parameters (", schema.name)?;
            write!(f, "{}", schema.params.join(" "))?;
            write!(f, ")")?;
            for (key, atoms) in [
                (":precondition", &schema.precondition),
                (":add", &schema.add),
                (":delete", &schema.delete),
            ] {
                write!(f, "\n    {key} (")?;
                let rendered: Vec<String> = atoms
                    .iter()
                    .map(|a| {
                        let mut s = format!("({}", self.predicate(a.predicate).name);
                        for &i in &a.args {
                            s.push(' ');
                            s.push_str(&schema.params[i]);
                        }
                        s.push(')');
                        s
                    })
                    .collect();
                write!(f, "{})", rendered.join(" "))?;
            }
            write!(f, ")")?;
        }
        writeln!(f, ")")
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(problem {}", self.name)?;
        writeln!(f, "  (domain {})", self.domain.name)?;
        writeln!(f, "  (objects {})", self.objects.join(" "))?;
        write!(f, "  (init")?;
        for atom in &self.init {
            write!(f, "\n    {}", self.display_atom(atom))?;
        }
        write!(f, ")\n  (goal")?;
        for atom in &self.goal {
            write!(f, "\n    {}", self.display_atom(atom))?;
        }
        writeln!(f, "))")
    }
}

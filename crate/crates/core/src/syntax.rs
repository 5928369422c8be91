//! Concrete syntax: a lexer and recursive-descent parser for specification
//! files, terms and processes. Printing is the `Display` of each AST type.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use crate::error::{Error, Result};
use crate::process::{check_correct, ExtendedProcess, PlainProcess};
use crate::rewrite::{EquationalTheory, RewriteRule};
use crate::term::{Kind, Signature, Symbol, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

fn err<T>(pos: Pos, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line: pos.line,
        column: pos.column,
        message: message.into(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String, u32),
    Num(String),
    Str(String),
    Path(String),
    Dot,
    Comma,
    Colon,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Slash,
    Bar,
    Bang,
    Eq,
    Arrow,
    Eof,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s, 0) => format!("`{s}`"),
        Tok::Ident(s, i) => format!("`{s}#{i}`"),
        Tok::Num(n) => format!("`{n}`"),
        Tok::Str(s) | Tok::Path(s) => format!("\"{s}\""),
        Tok::Eof => "end of input".into(),
        Tok::Dot => "`.`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Colon => "`:`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::LBrace => "`{`".into(),
        Tok::RBrace => "`}`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Bar => "`|`".into(),
        Tok::Bang => "`!`".into(),
        Tok::Eq => "`=`".into(),
        Tok::Arrow => "`->`".into(),
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, chars: &[char]| {
        if chars[*i] == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
        *i += 1;
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: col };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, &chars);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, &chars);
            }
            continue;
        }
        if c == '(' && chars.get(i + 1) == Some(&'*') {
            advance(&mut i, &mut line, &mut col, &chars);
            advance(&mut i, &mut line, &mut col, &chars);
            loop {
                if i + 1 >= chars.len() {
                    return err(pos, "unterminated comment");
                }
                if chars[i] == '*' && chars[i + 1] == ')' {
                    advance(&mut i, &mut line, &mut col, &chars);
                    advance(&mut i, &mut line, &mut col, &chars);
                    break;
                }
                advance(&mut i, &mut line, &mut col, &chars);
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                advance(&mut i, &mut line, &mut col, &chars);
            }
            let ident: String = chars[start..i].iter().collect();
            let mut index = 0;
            if i + 1 < chars.len() && chars[i] == '#' && chars[i + 1].is_ascii_digit() {
                advance(&mut i, &mut line, &mut col, &chars);
                let ds = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance(&mut i, &mut line, &mut col, &chars);
                }
                let digits: String = chars[ds..i].iter().collect();
                index = match digits.parse() {
                    Ok(n) => n,
                    Err(_) => return err(pos, format!("index {digits} is too large")),
                };
            }
            out.push((Tok::Ident(ident, index), pos));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(&mut i, &mut line, &mut col, &chars);
            }
            out.push((Tok::Num(chars[start..i].iter().collect()), pos));
            continue;
        }
        if c == '"' {
            advance(&mut i, &mut line, &mut col, &chars);
            let start = i;
            while i < chars.len() && chars[i] != '"' {
                advance(&mut i, &mut line, &mut col, &chars);
            }
            if i >= chars.len() {
                return err(pos, "unterminated string");
            }
            let s: String = chars[start..i].iter().collect();
            advance(&mut i, &mut line, &mut col, &chars);
            out.push((Tok::Str(s), pos));
            continue;
        }
        if c == '>' {
            // An output path: everything up to whitespace, minus a final `.`.
            advance(&mut i, &mut line, &mut col, &chars);
            while i < chars.len() && chars[i].is_whitespace() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, &chars);
            }
            if i < chars.len() && chars[i] == '"' {
                continue;
            }
            let ppos = Pos { line, column: col };
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() {
                advance(&mut i, &mut line, &mut col, &chars);
            }
            let mut path: String = chars[start..i].iter().collect();
            let dot = path.len() > 1 && path.ends_with('.');
            if dot {
                path.pop();
            }
            if path.is_empty() {
                return err(ppos, "expected an output path after `>`");
            }
            out.push((Tok::Path(path), ppos));
            if dot {
                out.push((Tok::Dot, Pos { line, column: col - 1 }));
            }
            continue;
        }
        let tok = match c {
            '.' => Tok::Dot,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '/' => Tok::Slash,
            '|' => Tok::Bar,
            '!' => Tok::Bang,
            '=' => Tok::Eq,
            '-' if chars.get(i + 1) == Some(&'>') => {
                advance(&mut i, &mut line, &mut col, &chars);
                Tok::Arrow
            }
            _ => return err(pos, format!("unexpected character `{c}`")),
        };
        advance(&mut i, &mut line, &mut col, &chars);
        out.push((tok, pos));
    }
    out.push((Tok::Eof, Pos { line, column: col }));
    Ok(out)
}

#[derive(Clone, Debug)]
enum RawTerm {
    Ident(String, u32, Pos),
    Num(String),
    App(String, Vec<RawTerm>, Pos),
    Pair(Box<RawTerm>, Box<RawTerm>),
}

#[derive(Clone, Debug)]
enum RawProc {
    Nil,
    Par(Box<RawProc>, Box<RawProc>),
    Repl(Box<RawProc>),
    New(Binder, Box<RawProc>),
    Nu(Binder, Box<RawProc>),
    If(RawTerm, RawTerm, Box<RawProc>, Box<RawProc>),
    In(RawTerm, Binder, Box<RawProc>),
    Out(RawTerm, RawTerm, Box<RawProc>),
    Subst(RawTerm, Binder),
    Ref(String, Pos),
}

#[derive(Clone, Debug)]
struct Binder {
    ident: String,
    index: u32,
    pos: Pos,
}

/// How each free identifier of a process resolves.
#[derive(Clone, Debug, Default)]
pub struct Declarations {
    kinds: HashMap<(String, u32), Kind>,
    signature: Signature,
}

impl Declarations {
    /// Pair and the constant `0`.
    pub fn prelude() -> Self {
        let mut d = Declarations {
            kinds: HashMap::new(),
            signature: Signature::new(),
        };
        d.declare(&Symbol::constant("0"));
        d
    }

    pub fn with_signature(mut self, signature: Signature) -> Self {
        self.signature = signature;
        self
    }

    /// Declarations covering every symbol in `syms`.
    pub fn from_symbols<'a>(syms: impl IntoIterator<Item = &'a Symbol>, signature: Signature) -> Self {
        let mut d = Declarations::prelude().with_signature(signature);
        for s in syms {
            d.declare(s);
        }
        d
    }

    pub fn declare(&mut self, s: &Symbol) {
        self.kinds.insert((s.ident().to_string(), s.index()), s.kind());
    }

    pub fn kind_of(&self, ident: &str, index: u32) -> Option<Kind> {
        self.kinds.get(&(ident.to_string(), index)).copied()
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }
}

/// One query of a specification file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Query {
    Normalize(String),
    Frame(String),
    Lts { process: String, output: Option<String> },
    Transitions(String),
    Barbs(String),
    Bisim(String, String),
    Oracle(String, String),
    Static(String, String),
    BarbEq(String, String),
    Struct(String, String),
    Probe {
        kind: ProbeKind,
        process: String,
        left: Term,
        right: Term,
    },
    Closure {
        left: String,
        right: String,
        contexts: Vec<(Vec<Symbol>, String)>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeKind {
    Test,
    Input,
    Output,
}

#[derive(Clone, Debug)]
pub struct LocatedQuery {
    pub query: Query,
    pub pos: Pos,
    pub text: String,
}

/// A loaded specification file.
#[derive(Clone, Debug)]
pub struct SpecFile {
    pub declarations: Declarations,
    pub rule_variables: BTreeSet<String>,
    pub theory: EquationalTheory,
    pub processes: BTreeMap<String, ExtendedProcess>,
    pub process_order: Vec<String>,
    pub queries: Vec<LocatedQuery>,
}

impl SpecFile {
    pub fn process(&self, name: &str) -> Result<&ExtendedProcess> {
        self.processes
            .get(name)
            .ok_or_else(|| Error::PreconditionViolated(format!("no process named {name}")))
    }
}

pub fn parse_spec(path: &Path) -> Result<SpecFile> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_spec_str(&src)
}

pub fn parse_spec_str(src: &str) -> Result<SpecFile> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        at: 0,
        src,
        decls: Declarations::prelude(),
        rule_vars: BTreeSet::new(),
        rules: Vec::new(),
        processes: BTreeMap::new(),
        order: Vec::new(),
        queries: Vec::new(),
    };
    p.file()?;
    let theory = EquationalTheory::new(p.decls.signature.clone(), p.rules.into_iter().map(|r| r.1).collect())?;
    Ok(SpecFile {
        declarations: p.decls,
        rule_variables: p.rule_vars,
        theory,
        processes: p.processes,
        process_order: p.order,
        queries: p.queries,
    })
}

/// Parses one process against `decls`; the result is checked for
/// correctness.
pub fn parse_process(src: &str, decls: &Declarations) -> Result<ExtendedProcess> {
    let mut p = Parser::standalone(src, decls)?;
    let raw = p.proc()?;
    p.expect(&Tok::Eof)?;
    let a = p.resolve_process(&raw)?;
    if let Err(v) = check_correct(&a) {
        return Err(Error::Incorrect(v));
    }
    Ok(a)
}

pub fn parse_term(src: &str, decls: &Declarations) -> Result<Term> {
    let mut p = Parser::standalone(src, decls)?;
    let raw = p.term()?;
    p.expect(&Tok::Eof)?;
    p.resolve_term(&raw, &Scope::default())
}

#[derive(Default)]
struct Scope {
    bound: Vec<((String, u32), Kind)>,
    targets: BTreeSet<(String, u32)>,
}

impl Scope {
    fn lookup(&self, ident: &str, index: u32) -> Option<Kind> {
        self.bound
            .iter()
            .rev()
            .find(|((i, n), _)| i == ident && *n == index)
            .map(|(_, k)| *k)
    }
}

struct Parser<'s> {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    src: &'s str,
    decls: Declarations,
    rule_vars: BTreeSet<String>,
    rules: Vec<(Pos, RewriteRule)>,
    processes: BTreeMap<String, ExtendedProcess>,
    order: Vec<String>,
    queries: Vec<LocatedQuery>,
}

const KEYWORDS: &[&str] = &[
    "fun", "const", "name", "var", "rulevar", "rewrite", "process", "query", "new", "nu", "if", "then", "else", "in",
    "out", "with",
];

impl<'s> Parser<'s> {
    fn standalone(src: &'s str, decls: &Declarations) -> Result<Self> {
        Ok(Parser {
            toks: lex(src)?,
            at: 0,
            src,
            decls: decls.clone(),
            rule_vars: BTreeSet::new(),
            rules: Vec::new(),
            processes: BTreeMap::new(),
            order: Vec::new(),
            queries: Vec::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s, 0) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        let yes = self.is_kw(kw);
        if yes {
            self.bump();
        }
        yes
    }

    fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            err(self.pos(), format!("expected `{kw}`, found {}", describe(self.peek())))
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        let yes = self.peek() == t;
        if yes {
            self.bump();
        }
        yes
    }

    fn expect(&mut self, t: &Tok) -> Result<()> {
        if self.eat(t) {
            Ok(())
        } else {
            err(self.pos(), format!("expected {}, found {}", describe(t), describe(self.peek())))
        }
    }

    fn ident(&mut self) -> Result<(String, u32, Pos)> {
        match self.bump() {
            (Tok::Ident(s, i), pos) if !KEYWORDS.contains(&s.as_str()) => Ok((s, i, pos)),
            (t, pos) => err(pos, format!("expected an identifier, found {}", describe(&t))),
        }
    }

    fn plain_ident(&mut self) -> Result<(String, Pos)> {
        let (s, i, pos) = self.ident()?;
        if i != 0 {
            return err(pos, "an index is not allowed here");
        }
        Ok((s, pos))
    }

    fn file(&mut self) -> Result<()> {
        while *self.peek() != Tok::Eof {
            let pos = self.pos();
            let kw = match self.peek() {
                Tok::Ident(s, 0) => s.clone(),
                t => return err(pos, format!("expected a declaration, found {}", describe(t))),
            };
            self.bump();
            match kw.as_str() {
                "fun" => loop {
                    let (f, fpos) = self.plain_ident()?;
                    self.expect(&Tok::Slash)?;
                    let arity = match self.bump() {
                        (Tok::Num(n), _) => n.parse::<usize>().unwrap_or(0),
                        (t, p) => return err(p, format!("expected an arity, found {}", describe(&t))),
                    };
                    if let Err(e) = self.decls.signature.declare(&f, arity) {
                        return err(fpos, e.to_string());
                    }
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                },
                "const" | "name" | "var" | "rulevar" => loop {
                    let (s, i, ipos) = self.ident()?;
                    if kw == "rulevar" {
                        self.rule_vars.insert(s);
                    } else {
                        let kind = match kw.as_str() {
                            "const" => Kind::Constant,
                            "name" => Kind::Name,
                            _ => Kind::Variable,
                        };
                        if let Some(k) = self.decls.kind_of(&s, i) {
                            if k != kind {
                                return err(ipos, format!("{s} is already declared with another kind"));
                            }
                        }
                        self.decls.declare(&Symbol::new(kind, &s, i));
                    }
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                },
                "rewrite" => {
                    let lhs = self.term()?;
                    self.expect(&Tok::Arrow)?;
                    let rhs = self.term()?;
                    let (l, r) = (self.resolve_rule_term(&lhs)?, self.resolve_rule_term(&rhs)?);
                    match RewriteRule::new(l, r) {
                        Ok(rule) => self.rules.push((pos, rule)),
                        Err(e) => return err(pos, e.to_string()),
                    }
                }
                "process" => {
                    let (name, npos) = self.plain_ident()?;
                    if self.processes.contains_key(&name) {
                        return err(npos, format!("process {name} is defined twice"));
                    }
                    self.expect(&Tok::Eq)?;
                    let raw = self.proc()?;
                    let a = self.resolve_process(&raw)?;
                    if let Err(v) = check_correct(&a) {
                        let msg = v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
                        return err(npos, format!("process {name} is not correct: {msg}"));
                    }
                    self.processes.insert(name.clone(), a);
                    self.order.push(name);
                }
                "query" => {
                    let start = self.at;
                    let q = self.query()?;
                    let text = self.source_between(start, self.at);
                    self.queries.push(LocatedQuery { query: q, pos, text });
                }
                _ => return err(pos, format!("unknown declaration `{kw}`")),
            }
            if !(self.eat(&Tok::Dot) || *self.peek() == Tok::Eof) {
                return err(self.pos(), format!("expected `.`, found {}", describe(self.peek())));
            }
        }
        Ok(())
    }

    fn source_between(&self, from: usize, to: usize) -> String {
        let offset = |p: Pos| -> usize {
            let mut off = 0;
            for (n, line) in self.src.split_inclusive('\n').enumerate() {
                if n + 1 == p.line {
                    return off + line.char_indices().nth(p.column - 1).map_or(line.len(), |(b, _)| b);
                }
                off += line.len();
            }
            self.src.len()
        };
        let a = offset(self.toks[from].1);
        let b = offset(self.toks[to].1);
        self.src[a..b.max(a)].trim().to_string()
    }

    fn process_ref(&mut self) -> Result<String> {
        let (name, pos) = self.plain_ident()?;
        if !self.processes.contains_key(&name) {
            return err(pos, format!("undeclared process {name}"));
        }
        Ok(name)
    }

    fn query(&mut self) -> Result<Query> {
        let (kw, pos) = match self.bump() {
            (Tok::Ident(s, 0), p) => (s, p),
            (t, p) => return err(p, format!("expected a query, found {}", describe(&t))),
        };
        Ok(match kw.as_str() {
            "normalize" => Query::Normalize(self.process_ref()?),
            "frame" => Query::Frame(self.process_ref()?),
            "transitions" => Query::Transitions(self.process_ref()?),
            "barbs" => Query::Barbs(self.process_ref()?),
            "lts" => {
                let process = self.process_ref()?;
                let output = match self.peek().clone() {
                    Tok::Path(p) | Tok::Str(p) => {
                        self.bump();
                        Some(p)
                    }
                    _ => None,
                };
                Query::Lts { process, output }
            }
            "bisim" | "oracle" | "static" | "barbeq" | "struct" => {
                let a = self.process_ref()?;
                let b = self.process_ref()?;
                match kw.as_str() {
                    "bisim" => Query::Bisim(a, b),
                    "oracle" => Query::Oracle(a, b),
                    "static" => Query::Static(a, b),
                    "barbeq" => Query::BarbEq(a, b),
                    _ => Query::Struct(a, b),
                }
            }
            "probe" => {
                let kind = if self.eat_kw("test") {
                    ProbeKind::Test
                } else if self.eat_kw("in") || self.eat_kw("input") {
                    ProbeKind::Input
                } else if self.eat_kw("out") || self.eat_kw("output") {
                    ProbeKind::Output
                } else {
                    return err(self.pos(), "expected `test`, `input` or `output`");
                };
                let process = self.process_ref()?;
                let mut scope = Scope::default();
                for x in self.processes[&process].domain() {
                    scope.bound.push(((x.ident().to_string(), x.index()), Kind::Variable));
                }
                let l = self.term()?;
                let r = self.term()?;
                Query::Probe {
                    kind,
                    process,
                    left: self.resolve_term(&l, &scope)?,
                    right: self.resolve_term(&r, &scope)?,
                }
            }
            "closure" => {
                let left = self.process_ref()?;
                let right = self.process_ref()?;
                self.expect_kw("with")?;
                let mut contexts = Vec::new();
                loop {
                    let mut us = Vec::new();
                    while self.eat_kw("nu") || self.eat_kw("new") {
                        let (s, i, p) = self.ident()?;
                        let kind = match self.decls.kind_of(&s, i) {
                            Some(k @ (Kind::Name | Kind::Variable)) => k,
                            _ => return err(p, format!("restricted {s} must be a declared name or variable")),
                        };
                        us.push(Symbol::new(kind, &s, i));
                        self.expect(&Tok::Dot)?;
                    }
                    contexts.push((us, self.process_ref()?));
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                Query::Closure { left, right, contexts }
            }
            _ => return err(pos, format!("unknown query `{kw}`")),
        })
    }

    fn term(&mut self) -> Result<RawTerm> {
        match self.bump() {
            (Tok::Num(n), _) => Ok(RawTerm::Num(n)),
            (Tok::LParen, _) => {
                let a = self.term()?;
                if self.eat(&Tok::Comma) {
                    let b = self.term()?;
                    self.expect(&Tok::RParen)?;
                    Ok(RawTerm::Pair(Box::new(a), Box::new(b)))
                } else {
                    self.expect(&Tok::RParen)?;
                    Ok(a)
                }
            }
            (Tok::Ident(s, i), pos) if !KEYWORDS.contains(&s.as_str()) => {
                if i == 0 && self.eat(&Tok::LParen) {
                    let mut args = vec![self.term()?];
                    while self.eat(&Tok::Comma) {
                        args.push(self.term()?);
                    }
                    self.expect(&Tok::RParen)?;
                    Ok(RawTerm::App(s, args, pos))
                } else {
                    Ok(RawTerm::Ident(s, i, pos))
                }
            }
            (t, pos) => err(pos, format!("expected a term, found {}", describe(&t))),
        }
    }

    fn binder(&mut self) -> Result<Binder> {
        let (ident, index, pos) = self.ident()?;
        Ok(Binder { ident, index, pos })
    }

    fn proc(&mut self) -> Result<RawProc> {
        let left = self.prefix()?;
        if self.eat(&Tok::Bar) {
            let right = self.proc()?;
            return Ok(RawProc::Par(Box::new(left), Box::new(right)));
        }
        Ok(left)
    }

    fn prefix(&mut self) -> Result<RawProc> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(n) if n == "0" => {
                self.bump();
                Ok(RawProc::Nil)
            }
            Tok::Bang => {
                self.bump();
                Ok(RawProc::Repl(Box::new(self.prefix()?)))
            }
            Tok::LParen => {
                self.bump();
                let p = self.proc()?;
                self.expect(&Tok::RParen)?;
                Ok(p)
            }
            Tok::LBrace => {
                self.bump();
                let e = self.term()?;
                self.expect(&Tok::Slash)?;
                let x = self.binder()?;
                self.expect(&Tok::RBrace)?;
                Ok(RawProc::Subst(e, x))
            }
            Tok::Ident(kw, 0) if kw == "new" || kw == "nu" => {
                self.bump();
                let b = self.binder()?;
                self.expect(&Tok::Dot)?;
                let body = Box::new(self.prefix()?);
                Ok(if kw == "new" { RawProc::New(b, body) } else { RawProc::Nu(b, body) })
            }
            Tok::Ident(kw, 0) if kw == "if" => {
                self.bump();
                let l = self.term()?;
                self.expect(&Tok::Eq)?;
                let r = self.term()?;
                self.expect_kw("then")?;
                let p = self.prefix()?;
                let q = if self.eat_kw("else") { self.prefix()? } else { RawProc::Nil };
                Ok(RawProc::If(l, r, Box::new(p), Box::new(q)))
            }
            Tok::Ident(kw, 0) if kw == "in" => {
                self.bump();
                self.expect(&Tok::LParen)?;
                let c = self.term()?;
                self.expect(&Tok::Comma)?;
                let x = self.binder()?;
                self.expect(&Tok::RParen)?;
                self.expect(&Tok::Dot)?;
                Ok(RawProc::In(c, x, Box::new(self.prefix()?)))
            }
            Tok::Ident(kw, 0) if kw == "out" => {
                self.bump();
                self.expect(&Tok::LParen)?;
                let c = self.term()?;
                self.expect(&Tok::Comma)?;
                let e = self.term()?;
                self.expect(&Tok::RParen)?;
                self.expect(&Tok::Dot)?;
                Ok(RawProc::Out(c, e, Box::new(self.prefix()?)))
            }
            Tok::Ident(name, 0) if !KEYWORDS.contains(&name.as_str()) => {
                self.bump();
                Ok(RawProc::Ref(name, pos))
            }
            t => err(pos, format!("expected a process, found {}", describe(&t))),
        }
    }

    fn resolve_atom(&self, ident: &str, index: u32, pos: Pos, scope: &Scope) -> Result<Symbol> {
        if let Some(k) = scope.lookup(ident, index) {
            return Ok(Symbol::new(k, ident, index));
        }
        if let Some(k) = self.decls.kind_of(ident, index) {
            return Ok(Symbol::new(k, ident, index));
        }
        if scope.targets.contains(&(ident.to_string(), index)) {
            return Ok(Symbol::new(Kind::Variable, ident, index));
        }
        if self.decls.signature.arity(ident).is_some() {
            return err(pos, format!("function {ident} used without arguments"));
        }
        err(pos, format!("undeclared identifier {}", Symbol::new(Kind::Name, ident, index)))
    }

    fn resolve_term(&self, t: &RawTerm, scope: &Scope) -> Result<Term> {
        self.resolve_term_with(t, &|s, i, p| self.resolve_atom(s, i, p, scope))
    }

    fn resolve_rule_term(&self, t: &RawTerm) -> Result<Term> {
        self.resolve_term_with(t, &|s, i, p| {
            if i == 0 && self.rule_vars.contains(s) {
                Ok(Symbol::var(s))
            } else {
                self.resolve_atom(s, i, p, &Scope::default())
            }
        })
    }

    fn resolve_term_with(&self, t: &RawTerm, atom: &dyn Fn(&str, u32, Pos) -> Result<Symbol>) -> Result<Term> {
        match t {
            RawTerm::Num(n) => Ok(Term::constant(n)),
            RawTerm::Ident(s, i, p) => Ok(Term::Atom(atom(s, *i, *p)?)),
            RawTerm::Pair(a, b) => Ok(Term::pair(
                self.resolve_term_with(a, atom)?,
                self.resolve_term_with(b, atom)?,
            )),
            RawTerm::App(f, args, p) => {
                let Some(arity) = self.decls.signature.arity(f) else {
                    return err(*p, format!("undeclared function {f}"));
                };
                if arity != args.len() {
                    return err(
                        *p,
                        Error::ArityMismatch {
                            symbol: f.clone(),
                            expected: arity,
                            found: args.len(),
                        }
                        .to_string(),
                    );
                }
                let args = args
                    .iter()
                    .map(|a| self.resolve_term_with(a, atom))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Term::app(f, args))
            }
        }
    }

    fn resolve_process(&self, raw: &RawProc) -> Result<ExtendedProcess> {
        let mut scope = Scope::default();
        collect_targets(raw, &mut scope.targets);
        self.resolve_ext(raw, &mut scope)
    }

    fn binder_kind(&self, b: &Binder, default: Kind) -> Kind {
        self.decls.kind_of(&b.ident, b.index).filter(|k| *k != Kind::Constant).unwrap_or(default)
    }

    fn resolve_ext(&self, raw: &RawProc, scope: &mut Scope) -> Result<ExtendedProcess> {
        match raw {
            RawProc::Par(a, b) => Ok(ExtendedProcess::par(
                self.resolve_ext(a, scope)?,
                self.resolve_ext(b, scope)?,
            )),
            RawProc::Nu(b, body) => {
                let mut inner = BTreeSet::new();
                collect_targets(body, &mut inner);
                let default = if inner.contains(&(b.ident.clone(), b.index)) {
                    Kind::Variable
                } else {
                    Kind::Name
                };
                let kind = self.binder_kind(b, default);
                let u = Symbol::new(kind, &b.ident, b.index);
                scope.bound.push(((b.ident.clone(), b.index), kind));
                let body = self.resolve_ext(body, scope);
                scope.bound.pop();
                Ok(ExtendedProcess::Res(u, Box::new(body?)))
            }
            RawProc::New(_, body) if is_plain(body) => Ok(ExtendedProcess::Plain(self.resolve_plain(raw, scope)?)),
            RawProc::New(b, body) => {
                let n = Symbol::name(&b.ident).with_index(b.index);
                scope.bound.push(((b.ident.clone(), b.index), Kind::Name));
                let body = self.resolve_ext(body, scope);
                scope.bound.pop();
                Ok(ExtendedProcess::Res(n, Box::new(body?)))
            }
            RawProc::Subst(e, x) => {
                let kind = scope
                    .lookup(&x.ident, x.index)
                    .or_else(|| self.decls.kind_of(&x.ident, x.index))
                    .unwrap_or(Kind::Variable);
                if kind != Kind::Variable {
                    return err(x.pos, format!("substitution target {} is not a variable", x.ident));
                }
                Ok(ExtendedProcess::Subst(
                    Symbol::var(&x.ident).with_index(x.index),
                    self.resolve_term(e, scope)?,
                ))
            }
            RawProc::Ref(name, pos) => match self.processes.get(name) {
                Some(a) => Ok(a.clone()),
                None => err(*pos, format!("undeclared process {name}")),
            },
            _ => Ok(ExtendedProcess::Plain(self.resolve_plain(raw, scope)?)),
        }
    }

    fn resolve_plain(&self, raw: &RawProc, scope: &mut Scope) -> Result<PlainProcess> {
        let bind = |this: &Self, b: &Binder, kind: Kind, body: &RawProc, scope: &mut Scope| {
            scope.bound.push(((b.ident.clone(), b.index), kind));
            let r = this.resolve_plain(body, scope);
            scope.bound.pop();
            r
        };
        Ok(match raw {
            RawProc::Nil => PlainProcess::Nil,
            RawProc::Par(a, b) => PlainProcess::par(self.resolve_plain(a, scope)?, self.resolve_plain(b, scope)?),
            RawProc::Repl(p) => PlainProcess::repl(self.resolve_plain(p, scope)?),
            RawProc::New(b, p) => {
                let n = Symbol::name(&b.ident).with_index(b.index);
                PlainProcess::new_name(n, bind(self, b, Kind::Name, p, scope)?)
            }
            RawProc::If(l, r, p, q) => PlainProcess::if_then_else(
                self.resolve_term(l, scope)?,
                self.resolve_term(r, scope)?,
                self.resolve_plain(p, scope)?,
                self.resolve_plain(q, scope)?,
            ),
            RawProc::In(c, b, p) => {
                let c = self.resolve_term(c, scope)?;
                let x = Symbol::var(&b.ident).with_index(b.index);
                PlainProcess::input(c, x, bind(self, b, Kind::Variable, p, scope)?)
            }
            RawProc::Out(c, e, p) => PlainProcess::output(
                self.resolve_term(c, scope)?,
                self.resolve_term(e, scope)?,
                self.resolve_plain(p, scope)?,
            ),
            RawProc::Ref(name, pos) => match self.processes.get(name).map(|a| a.as_plain()) {
                Some(Some(p)) => p.clone(),
                Some(None) => return err(*pos, format!("process {name} is not plain and cannot appear here")),
                None => return err(*pos, format!("undeclared process {name}")),
            },
            RawProc::Nu(b, _) => return err(b.pos, "`nu` cannot appear under a plain-process operator"),
            RawProc::Subst(_, x) => return err(x.pos, "an active substitution cannot appear under a plain-process operator"),
        })
    }
}

fn is_plain(raw: &RawProc) -> bool {
    match raw {
        RawProc::Nil | RawProc::If(..) | RawProc::In(..) | RawProc::Out(..) | RawProc::Repl(_) => true,
        RawProc::Par(a, b) => is_plain(a) && is_plain(b),
        RawProc::New(_, p) => is_plain(p),
        RawProc::Nu(..) | RawProc::Subst(..) => false,
        // References are resolved later; treat them as extended so the
        // extended resolver decides.
        RawProc::Ref(..) => false,
    }
}

fn collect_targets(raw: &RawProc, out: &mut BTreeSet<(String, u32)>) {
    match raw {
        RawProc::Subst(_, x) => {
            out.insert((x.ident.clone(), x.index));
        }
        RawProc::Par(a, b) => {
            collect_targets(a, out);
            collect_targets(b, out);
        }
        RawProc::Nu(_, p) | RawProc::New(_, p) => collect_targets(p, out),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file() {
        let s = parse_spec_str("process P = 0. query barbs P.").unwrap();
        assert_eq!(s.queries.len(), 1);
        assert_eq!(s.queries[0].query, Query::Barbs("P".into()));
        assert_eq!(s.queries[0].text, "barbs P");
    }

    #[test]
    fn duplicate_substitution_is_rejected() {
        let e = parse_spec_str("const c, d.\nprocess Q = {c/x} | {d/x}.").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("duplicate substitution"), "{msg}");
        assert!(msg.starts_with("2:"), "{msg}");
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_spec_str("fun f/1.\nprocess P = out(c, f(0, 0)).0.").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = parse_spec_str("process P = out(c, 0).0.").unwrap_err();
        assert!(e.to_string().contains("undeclared identifier c"), "{e}");
        let e = parse_spec_str("process P = 0 |.").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, column: 16, .. }), "{e}");
    }

    #[test]
    fn kinds_resolve() {
        let src = "name c. var y.
            process P = nu k.nu x.({k/x} | in(c, z).out(c, (z, x)).0).
            query lts P > out/p.dot.";
        let s = parse_spec_str(src).unwrap();
        let p = s.process("P").unwrap();
        match p {
            ExtendedProcess::Res(k, inner) => {
                assert!(k.is_name());
                assert!(matches!(&**inner, ExtendedProcess::Res(x, _) if x.is_var()));
            }
            other => panic!("{other}"),
        }
        assert_eq!(
            s.queries[0].query,
            Query::Lts {
                process: "P".into(),
                output: Some("out/p.dot".into())
            }
        );
    }

    #[test]
    fn rules_and_comments() {
        let src = "(* projections *)
            fun fst/1, snd/1. rulevar u, v.
            rewrite fst((u, v)) -> u. // first
            rewrite snd((u, v)) -> v.";
        let s = parse_spec_str(src).unwrap();
        assert_eq!(s.theory.rules().len(), 2);
        let d = Declarations::from_symbols(&[Symbol::constant("a"), Symbol::constant("b")], s.theory.signature().clone());
        let t = parse_term("fst((a, b))", &d).unwrap();
        assert_eq!(s.theory.normalize(&t).unwrap(), Term::constant("a"));
    }

    #[test]
    fn printing_round_trips() {
        let d = Declarations::from_symbols(&[Symbol::name("c"), Symbol::constant("k")], Signature::new().with("h", 1));
        for src in [
            "new n#2.out(c, h(n#2)).0 | !in(c, x).if x = k then out(c, x).0 else 0",
            "nu x.({h(k)/x} | out(c, x).0)",
            "nu n.({n/y} | nu x.{h(y)/x})",
            "(out(c, 0).0 | 0) | {k/z}",
        ] {
            let a = parse_process(src, &d).unwrap();
            let b = parse_process(&a.to_string(), &d).unwrap();
            assert!(a.alpha_eq(&b), "{src}: {a} vs {b}");
        }
    }

    #[test]
    fn queries() {
        let src = "name c, k. const one. var x.
            process A = {0/x}. process B = {one/x}. process C = if x = 0 then out(c, 0).0.
            query probe test A x 0.
            query closure A B with C, nu k.C.
            query bisim A B";
        let s = parse_spec_str(src).unwrap();
        assert_eq!(s.queries.len(), 3);
        match &s.queries[1].query {
            Query::Closure { contexts, .. } => {
                assert_eq!(contexts[1].0, vec![Symbol::name("k")]);
            }
            q => panic!("{q:?}"),
        }
    }
}

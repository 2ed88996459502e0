//! Lexer and recursive-descent parser for the PSF subset.
//!
//! Precedence, loosest first: `||`, `+`, `.`, `*`. The `>>` channel
//! constructor is the only infix term operator.

use std::sync::Arc;

use thiserror::Error;

use super::ast::*;
use crate::diag::Loc;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{loc}: {message}{}", expected_suffix(.expected))]
pub struct ParseError {
    pub loc: Loc,
    pub message: String,
    pub expected: Vec<String>,
}

fn expected_suffix(expected: &[String]) -> String {
    if expected.is_empty() {
        String::new()
    } else {
        format!(" (expected {})", expected.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(u64),
    Dollar(u32),
    Underscore,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBrack,
    RBrack,
    Comma,
    Colon,
    Hash,
    Arrow,
    Dot,
    Plus,
    ParBar,
    Bar,
    Eq,
    Star,
    Shift,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Int(n) => format!("'{n}'"),
            Tok::Dollar(n) => format!("'${n}'"),
            Tok::Underscore => "'_'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::LBrack => "'['".into(),
            Tok::RBrack => "']'".into(),
            Tok::Comma => "','".into(),
            Tok::Colon => "':'".into(),
            Tok::Hash => "'#'".into(),
            Tok::Arrow => "'->'".into(),
            Tok::Dot => "'.'".into(),
            Tok::Plus => "'+'".into(),
            Tok::ParBar => "'||'".into(),
            Tok::Bar => "'|'".into(),
            Tok::Eq => "'='".into(),
            Tok::Star => "'*'".into(),
            Tok::Shift => "'>>'".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub loc: Loc,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic()
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

pub(crate) fn lex(src: &str, file: Option<Arc<str>>) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let loc_at = |line: u32, col: u32| Loc::new(file.clone(), line, col);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let adv = |n: usize, i: &mut usize, col: &mut u32| {
            *i += n;
            *col += n as u32;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            adv(1, &mut i, &mut col);
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let tok = if is_ident_start(c) {
            let start = i;
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                if is_ident_char(d) {
                    i += 1;
                } else if d == '-' && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric()) {
                    i += 1;
                } else {
                    break;
                }
            }
            col += (i - start) as u32;
            toks.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                loc: loc_at(tl, tc),
            });
            continue;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            col += (i - start) as u32;
            let text: String = chars[start..i].iter().collect();
            let n = text.parse().map_err(|_| ParseError {
                loc: loc_at(tl, tc),
                message: format!("integer literal {text} out of range"),
                expected: Vec::new(),
            })?;
            toks.push(Token {
                tok: Tok::Int(n),
                loc: loc_at(tl, tc),
            });
            continue;
        } else if c == '$' {
            let start = i + 1;
            let mut j = start;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            if j == start {
                return Err(ParseError {
                    loc: loc_at(tl, tc),
                    message: "placeholder needs a number".into(),
                    expected: vec!["'$1'".into()],
                });
            }
            let n: u32 = chars[start..j].iter().collect::<String>().parse().unwrap_or(0);
            col += (j - i) as u32;
            i = j;
            toks.push(Token {
                tok: Tok::Dollar(n),
                loc: loc_at(tl, tc),
            });
            continue;
        } else if two == "->" {
            adv(2, &mut i, &mut col);
            Tok::Arrow
        } else if two == "||" {
            adv(2, &mut i, &mut col);
            Tok::ParBar
        } else if two == ">>" {
            adv(2, &mut i, &mut col);
            Tok::Shift
        } else {
            let t = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '[' => Tok::LBrack,
                ']' => Tok::RBrack,
                ',' => Tok::Comma,
                ':' => Tok::Colon,
                '#' => Tok::Hash,
                '.' => Tok::Dot,
                '+' => Tok::Plus,
                '|' => Tok::Bar,
                '=' => Tok::Eq,
                '*' => Tok::Star,
                '_' => Tok::Underscore,
                '\u{2192}' => Tok::Arrow,
                other => {
                    return Err(ParseError {
                        loc: loc_at(tl, tc),
                        message: format!("unexpected character '{other}'"),
                        expected: Vec::new(),
                    })
                }
            };
            adv(1, &mut i, &mut col);
            t
        };
        toks.push(Token {
            tok,
            loc: loc_at(tl, tc),
        });
    }
    toks.push(Token {
        tok: Tok::Eof,
        loc: loc_at(line, col),
    });
    Ok(toks)
}

const SECTION_KEYWORDS: &[&str] = &[
    "sorts",
    "literals",
    "functions",
    "atoms",
    "processes",
    "sets",
    "communications",
    "variables",
    "definitions",
    "exports",
    "imports",
    "parameters",
    "begin",
    "end",
];

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    pub(crate) fn new(src: &str, file: Option<Arc<str>>) -> PResult<Parser> {
        Ok(Parser {
            toks: lex(src, file)?,
            pos: 0,
        })
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub(crate) fn loc(&self) -> Loc {
        self.toks[self.pos].loc.clone()
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub(crate) fn error<T>(&self, message: impl Into<String>, expected: &[&str]) -> PResult<T> {
        Err(ParseError {
            loc: self.loc(),
            message: message.into(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn unexpected<T>(&self, expected: &[&str]) -> PResult<T> {
        self.error(format!("unexpected {}", self.peek().describe()), expected)
    }

    pub(crate) fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, t: Tok) -> PResult<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.unexpected(&[&t.describe()])
        }
    }

    pub(crate) fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub(crate) fn is_kw_at(&self, n: usize, kw: &str) -> bool {
        matches!(self.peek_at(n), Tok::Ident(s) if s == kw)
    }

    pub(crate) fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.unexpected(&[&format!("'{kw}'")])
        }
    }

    /// A plain identifier that is not a section keyword.
    pub(crate) fn at_name(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if !SECTION_KEYWORDS.contains(&s.as_str()))
    }

    pub(crate) fn ident(&mut self) -> PResult<Ident> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(Ident { name: s, loc })
            }
            _ => self.unexpected(&["identifier"]),
        }
    }

    pub(crate) fn parse_modules(&mut self) -> PResult<Vec<ModuleDef>> {
        let mut mods: Vec<ModuleDef> = Vec::new();
        while !self.at_eof() {
            let loc = self.loc();
            let m = self.module()?;
            if mods.iter().any(|o| o.name.name == m.name.name) {
                return Err(ParseError {
                    loc,
                    message: format!("duplicate module name {}", m.name.name),
                    expected: Vec::new(),
                });
            }
            mods.push(m);
        }
        Ok(mods)
    }

    fn module(&mut self) -> PResult<ModuleDef> {
        let kind = if self.eat_kw("data") {
            ModuleKind::Data
        } else if self.eat_kw("process") {
            ModuleKind::Process
        } else {
            return self.unexpected(&["'data module'", "'process module'"]);
        };
        self.expect_kw("module")?;
        let name = self.ident()?;
        let mut m = ModuleDef::new(kind, &name.name);
        m.name = name;
        self.expect_kw("begin")?;
        loop {
            if self.eat_kw("parameters") {
                while self.at_name() && self.is_kw_at(1, "begin") {
                    let pname = self.ident()?;
                    self.expect_kw("begin")?;
                    let mut decls = Decls::default();
                    self.decl_sections(&mut decls)?;
                    self.expect_kw("end")?;
                    let end = self.ident()?;
                    if end.name != pname.name {
                        return Err(ParseError {
                            loc: end.loc,
                            message: format!(
                                "parameter section terminator name mismatch: {} vs {}",
                                end.name, pname.name
                            ),
                            expected: vec![format!("'{}'", pname.name)],
                        });
                    }
                    m.parameters.push(ParamSection { name: pname, decls });
                }
            } else if self.eat_kw("exports") {
                self.expect_kw("begin")?;
                self.decl_sections(&mut m.exports)?;
                self.expect_kw("end")?;
            } else if self.eat_kw("imports") {
                loop {
                    m.imports.push(self.import()?);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
            } else if self.is_decl_keyword() {
                self.decl_section(&mut m.hidden)?;
            } else if self.eat_kw("sets") {
                self.expect_kw("of")?;
                self.expect_kw("atoms")?;
                while self.at_name() {
                    m.sets.push(self.set_def()?);
                }
            } else if self.eat_kw("communications") {
                while self.at_name() {
                    m.comms.push(self.comm_def()?);
                }
            } else if self.eat_kw("variables") {
                while self.at_name() {
                    let mut names = vec![self.ident()?];
                    while self.eat(&Tok::Comma) {
                        names.push(self.ident()?);
                    }
                    self.expect(Tok::Colon)?;
                    let sort = self.ident()?;
                    m.variables.push(VarDecl { names, sort });
                }
            } else if self.eat_kw("definitions") {
                while self.at_name() {
                    m.definitions.push(self.definition()?);
                }
            } else if self.is_kw("end") {
                break;
            } else {
                return self.unexpected(&[
                    "'parameters'",
                    "'exports'",
                    "'imports'",
                    "'sorts'",
                    "'functions'",
                    "'atoms'",
                    "'processes'",
                    "'sets of atoms'",
                    "'communications'",
                    "'variables'",
                    "'definitions'",
                    "'end'",
                ]);
            }
        }
        self.expect_kw("end")?;
        let end = self.ident()?;
        if end.name != m.name.name {
            return Err(ParseError {
                loc: end.loc,
                message: format!(
                    "module terminator name mismatch: 'end {}' closes module {}",
                    end.name, m.name.name
                ),
                expected: vec![format!("'{}'", m.name.name)],
            });
        }
        Ok(m)
    }

    fn is_decl_keyword(&self) -> bool {
        ["sorts", "literals", "functions", "atoms", "processes"]
            .iter()
            .any(|k| self.is_kw(k))
    }

    fn decl_sections(&mut self, d: &mut Decls) -> PResult<()> {
        while self.is_decl_keyword() {
            self.decl_section(d)?;
        }
        Ok(())
    }

    fn name_list(&mut self, out: &mut Vec<Ident>) -> PResult<()> {
        while self.at_name() {
            out.push(self.ident()?);
            self.eat(&Tok::Comma);
        }
        Ok(())
    }

    fn decl_section(&mut self, d: &mut Decls) -> PResult<()> {
        if self.eat_kw("sorts") {
            self.name_list(&mut d.sorts)
        } else if self.eat_kw("literals") {
            self.name_list(&mut d.literals)
        } else if self.eat_kw("functions") {
            while self.at_name() || *self.peek() == Tok::Shift {
                let mut names = vec![self.func_name()?];
                while self.eat(&Tok::Comma) {
                    names.push(self.func_name()?);
                }
                self.expect(Tok::Colon)?;
                let mut sorts = Vec::new();
                if *self.peek() != Tok::Arrow {
                    sorts.push(self.ident()?);
                    while self.eat(&Tok::Hash) {
                        sorts.push(self.ident()?);
                    }
                }
                let (args, result) = if self.eat(&Tok::Arrow) {
                    (sorts, self.ident()?)
                } else if sorts.len() == 1 {
                    (Vec::new(), sorts.pop().unwrap())
                } else {
                    return self.unexpected(&["'->'"]);
                };
                for name in names {
                    d.functions.push(FuncDecl {
                        name,
                        args: args.clone(),
                        result: result.clone(),
                    });
                }
            }
            Ok(())
        } else if self.eat_kw("atoms") {
            while self.at_name() {
                d.atoms.extend(self.sig_decls()?);
            }
            Ok(())
        } else if self.eat_kw("processes") {
            while self.at_name() {
                d.processes.extend(self.sig_decls()?);
            }
            Ok(())
        } else {
            self.unexpected(&["declaration section"])
        }
    }

    fn func_name(&mut self) -> PResult<Ident> {
        if *self.peek() == Tok::Shift {
            let loc = self.loc();
            self.bump();
            Ok(Ident {
                name: ">>".into(),
                loc,
            })
        } else {
            self.ident()
        }
    }

    /// `a, b : S # T` declares both names with the same signature.
    fn sig_decls(&mut self) -> PResult<Vec<SigDecl>> {
        let mut names = vec![self.ident()?];
        while self.eat(&Tok::Comma) {
            names.push(self.ident()?);
        }
        let mut args = Vec::new();
        if self.eat(&Tok::Colon) {
            args.push(self.ident()?);
            while self.eat(&Tok::Hash) {
                args.push(self.ident()?);
            }
        }
        Ok(names
            .into_iter()
            .map(|name| SigDecl {
                name,
                args: args.clone(),
            })
            .collect())
    }

    fn import(&mut self) -> PResult<ImportClause> {
        let module = self.ident()?;
        let mut clause = ImportClause {
            module,
            bindings: Vec::new(),
            renamings: Vec::new(),
        };
        if self.eat(&Tok::LBrace) {
            while self.at_name() && self.is_kw_at(1, "bound") {
                let section = self.ident()?;
                self.expect_kw("bound")?;
                self.expect_kw("by")?;
                let map = self.name_map()?;
                self.expect_kw("to")?;
                let source = self.ident()?;
                clause.bindings.push(BindingClause { section, map, source });
            }
            if self.eat_kw("renamed") {
                self.expect_kw("by")?;
                clause.renamings = self.name_map()?;
            }
            self.expect(Tok::RBrace)?;
        }
        Ok(clause)
    }

    fn name_map(&mut self) -> PResult<Vec<(Ident, Ident)>> {
        self.expect(Tok::LBrack)?;
        let mut map = Vec::new();
        if *self.peek() != Tok::RBrack {
            loop {
                let from = self.ident()?;
                self.expect(Tok::Arrow)?;
                let to = self.ident()?;
                map.push((from, to));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RBrack)?;
        Ok(map)
    }

    fn binders(&mut self) -> PResult<Vec<Binder>> {
        let mut out = Vec::new();
        loop {
            let var = self.ident()?;
            self.expect_kw("in")?;
            let sort = self.ident()?;
            out.push(Binder { var, sort });
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        Ok(out)
    }

    fn set_def(&mut self) -> PResult<RawSetDef> {
        let name = self.ident()?;
        self.expect(Tok::Eq)?;
        let (members, binders) = self.set_literal()?;
        Ok(RawSetDef {
            name,
            members,
            binders,
        })
    }

    fn set_literal(&mut self) -> PResult<(Vec<RawAtom>, Vec<Binder>)> {
        self.expect(Tok::LBrace)?;
        let mut members = Vec::new();
        let mut binders = Vec::new();
        if *self.peek() != Tok::RBrace && *self.peek() != Tok::Bar {
            loop {
                members.push(self.raw_atom()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        if self.eat(&Tok::Bar) {
            binders = self.binders()?;
        }
        self.expect(Tok::RBrace)?;
        Ok((members, binders))
    }

    fn comm_def(&mut self) -> PResult<RawCommDef> {
        let a = self.raw_atom()?;
        self.expect(Tok::Bar)?;
        let b = self.raw_atom()?;
        self.expect(Tok::Eq)?;
        let result = self.raw_atom()?;
        let binders = if self.eat_kw("for") {
            self.binders()?
        } else {
            Vec::new()
        };
        Ok(RawCommDef {
            a,
            b,
            result,
            binders,
        })
    }

    fn definition(&mut self) -> PResult<RawDef> {
        let name = self.ident()?;
        let mut params = Vec::new();
        if self.eat(&Tok::LParen) {
            loop {
                params.push(self.ident()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RParen)?;
        }
        self.expect(Tok::Eq)?;
        let body = self.proc()?;
        Ok(RawDef { name, params, body })
    }

    pub(crate) fn raw_atom(&mut self) -> PResult<RawAtom> {
        let id = self.ident()?;
        let args = self.opt_args()?;
        Ok(RawAtom {
            name: id.name,
            args,
            loc: id.loc,
        })
    }

    fn opt_args(&mut self) -> PResult<Vec<RawTerm>> {
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) {
            loop {
                args.push(self.term()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RParen)?;
        }
        Ok(args)
    }

    pub(crate) fn term(&mut self) -> PResult<RawTerm> {
        let mut lhs = self.term_primary()?;
        while *self.peek() == Tok::Shift {
            let loc = self.loc();
            self.bump();
            let rhs = self.term_primary()?;
            lhs = RawTerm::App {
                name: ">>".into(),
                args: vec![lhs, rhs],
                loc,
            };
        }
        Ok(lhs)
    }

    fn term_primary(&mut self) -> PResult<RawTerm> {
        match self.peek().clone() {
            Tok::Ident(_) => {
                let id = self.ident()?;
                let args = self.opt_args()?;
                Ok(RawTerm::App {
                    name: id.name,
                    args,
                    loc: id.loc,
                })
            }
            Tok::Int(n) => {
                self.bump();
                Ok(RawTerm::Int(n))
            }
            Tok::Dollar(n) => {
                self.bump();
                Ok(RawTerm::Placeholder(n))
            }
            Tok::Underscore => {
                self.bump();
                Ok(RawTerm::Wildcard)
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            _ => self.unexpected(&["term"]),
        }
    }

    pub(crate) fn proc(&mut self) -> PResult<RawProc> {
        let mut lhs = self.alt()?;
        while self.eat(&Tok::ParBar) {
            let rhs = self.alt()?;
            lhs = RawProc::Par(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn alt(&mut self) -> PResult<RawProc> {
        let mut lhs = self.seq()?;
        while self.eat(&Tok::Plus) {
            let rhs = self.seq()?;
            lhs = RawProc::Alt(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn seq(&mut self) -> PResult<RawProc> {
        let first = self.star()?;
        if self.eat(&Tok::Dot) {
            let rest = self.seq()?;
            Ok(RawProc::Seq(Box::new(first), Box::new(rest)))
        } else {
            Ok(first)
        }
    }

    fn star(&mut self) -> PResult<RawProc> {
        let mut lhs = self.primary()?;
        while self.eat(&Tok::Star) {
            let rhs = self.primary()?;
            lhs = RawProc::Star(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> PResult<RawProc> {
        if self.eat(&Tok::LParen) {
            let p = self.proc()?;
            self.expect(Tok::RParen)?;
            return Ok(p);
        }
        if self.eat_kw("delta") {
            return Ok(RawProc::Delta);
        }
        if self.eat_kw("skip") {
            return Ok(RawProc::Skip);
        }
        if self.is_kw("sum") && *self.peek_at(1) == Tok::LParen {
            self.bump();
            self.bump();
            let var = self.ident()?;
            self.expect_kw("in")?;
            let sort = self.ident()?;
            self.expect(Tok::Comma)?;
            let body = self.proc()?;
            self.expect(Tok::RParen)?;
            return Ok(RawProc::Sum {
                var,
                sort,
                body: Box::new(body),
            });
        }
        for kw in ["encaps", "hide"] {
            if self.is_kw(kw) && *self.peek_at(1) == Tok::LParen {
                self.bump();
                self.bump();
                let set = if *self.peek() == Tok::LBrace {
                    let (members, binders) = self.set_literal()?;
                    if !binders.is_empty() {
                        return self.error("inline atom sets cannot bind variables", &[]);
                    }
                    RawSetRef::Inline(members)
                } else {
                    RawSetRef::Named(self.ident()?)
                };
                self.expect(Tok::Comma)?;
                let body = Box::new(self.proc()?);
                self.expect(Tok::RParen)?;
                return Ok(if kw == "encaps" {
                    RawProc::Encaps(set, body)
                } else {
                    RawProc::Hide(set, body)
                });
            }
        }
        if self.is_kw("disrupt") && *self.peek_at(1) == Tok::LParen {
            self.bump();
            self.bump();
            let body = self.proc()?;
            self.expect(Tok::Comma)?;
            let disruptor = self.proc()?;
            self.expect(Tok::RParen)?;
            return Ok(RawProc::Disrupt(Box::new(body), Box::new(disruptor)));
        }
        if self.at_name() {
            return Ok(RawProc::Call(self.raw_atom()?));
        }
        self.unexpected(&["process expression"])
    }
}

/// Parses a sequence of complete modules.
pub fn parse_spec(text: &str) -> Result<Vec<ModuleDef>, ParseError> {
    parse_spec_file(text, None)
}

/// As [`parse_spec`], attributing locations to `file`.
pub fn parse_spec_file(text: &str, file: Option<&str>) -> Result<Vec<ModuleDef>, ParseError> {
    Parser::new(text, file.map(Arc::from))?.parse_modules()
}

/// Parses a standalone process expression.
pub fn parse_proc(text: &str) -> Result<RawProc, ParseError> {
    let mut p = Parser::new(text, None)?;
    let e = p.proc()?;
    if !p.at_eof() {
        return p.unexpected(&["end of input"]);
    }
    Ok(e)
}

/// Parses one action label or label pattern such as `s-call(primitive, succ(_))`.
pub fn parse_label(text: &str) -> Result<RawAtom, ParseError> {
    let mut p = Parser::new(text, None)?;
    let a = p.raw_atom()?;
    if !p.at_eof() {
        return p.unexpected(&["end of input"]);
    }
    Ok(a)
}

/// Parses a single data term such as `succ(3)`.
pub fn parse_term(text: &str) -> Result<RawTerm, ParseError> {
    let mut p = Parser::new(text, None)?;
    let t = p.term()?;
    if !p.at_eof() {
        return p.unexpected(&["end of input"]);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_yields_no_modules() {
        assert_eq!(parse_spec("").unwrap(), vec![]);
        assert_eq!(parse_spec("  -- only a comment\n").unwrap(), vec![]);
    }

    #[test]
    fn terminator_mismatch_is_reported() {
        let err = parse_spec("process module M begin end N").unwrap_err();
        assert!(err.message.contains("terminator name mismatch"), "{err}");
        assert_eq!((err.loc.line, err.loc.col), (1, 28));
    }

    #[test]
    fn duplicate_module_names_are_rejected() {
        let src = "data module A begin end A\ndata module A begin end A";
        let err = parse_spec(src).unwrap_err();
        assert!(err.message.contains("duplicate module"));
        assert_eq!(err.loc.line, 2);
    }

    #[test]
    fn syntax_error_carries_expected_tokens() {
        let err = parse_spec("process module M begin definitions P = a . end M").unwrap_err();
        assert!(!err.expected.is_empty());
        assert!(err.to_string().starts_with("<input>:1:"));
    }

    #[test]
    fn hyphenated_identifiers_and_comments() {
        let toks = lex("cs-snd-request -- trailing\nx->y", None).unwrap();
        let kinds: Vec<Tok> = toks.into_iter().map(|t| t.tok).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Ident("cs-snd-request".into()),
                Tok::Ident("x".into()),
                Tok::Arrow,
                Tok::Ident("y".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn dot_binds_tighter_than_plus() {
        let p = parse_proc("a . b + c").unwrap();
        assert!(matches!(p, RawProc::Alt(..)));
        let p = parse_proc("a + b || c").unwrap();
        assert!(matches!(p, RawProc::Par(..)));
        let p = parse_proc("(a + b) * delta").unwrap();
        assert!(matches!(p, RawProc::Star(..)));
    }

    #[test]
    fn channel_terms_parse_infix() {
        let a = parse_label("snd(c1 >> c2, message)").unwrap();
        assert_eq!(a.args.len(), 2);
        assert!(matches!(&a.args[0], RawTerm::App { name, args, .. } if name == ">>" && args.len() == 2));
    }
}

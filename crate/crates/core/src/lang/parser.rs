use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Atom, ExceptionExpr, LangError, Program, Rule, Term};

const RESERVED: &str = "exception";

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Str(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Arrow,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Var(s) => format!("variable `{s}`"),
            Tok::Str(_) => "string".to_string(),
            Tok::LParen => "`(`".to_string(),
            Tok::RParen => "`)`".to_string(),
            Tok::Comma => "`,`".to_string(),
            Tok::Dot => "`.`".to_string(),
            Tok::Arrow => "`<=`".to_string(),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    col: usize,
}

struct Lexer<'a> {
    chars: core::iter::Peekable<core::str::Chars<'a>>,
    line: usize,
    col: usize,
}

fn syntax(pos: Pos, expected: impl Into<String>) -> LangError {
    LangError::Syntax {
        line: pos.line,
        col: pos.col,
        expected: expected.into(),
    }
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '%' {
                while let Some(&c) = self.chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn word(&mut self) -> String {
        let mut s = String::new();
        while let Some(&c) = self.chars.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn next(&mut self) -> Result<(Tok, Pos), LangError> {
        self.skip_trivia();
        let pos = self.pos();
        let Some(&c) = self.chars.peek() else {
            return Ok((Tok::Eof, pos));
        };
        let tok = match c {
            '(' => {
                self.bump();
                Tok::LParen
            }
            ')' => {
                self.bump();
                Tok::RParen
            }
            ',' => {
                self.bump();
                Tok::Comma
            }
            '.' => {
                self.bump();
                Tok::Dot
            }
            '<' => {
                self.bump();
                if self.chars.peek() == Some(&'=') {
                    self.bump();
                    Tok::Arrow
                } else {
                    return Err(syntax(self.pos(), "`=` after `<`"));
                }
            }
            '"' => {
                self.bump();
                Tok::Str(self.string_body(pos)?)
            }
            c if c.is_ascii_lowercase() => Tok::Ident(self.word()),
            c if c.is_ascii_uppercase() || c == '_' => Tok::Var(self.word()),
            _ => return Err(syntax(pos, "identifier, variable, string or punctuation")),
        };
        Ok((tok, pos))
    }

    fn string_body(&mut self, start: Pos) -> Result<String, LangError> {
        let mut s = String::new();
        loop {
            let here = self.pos();
            match self.bump() {
                None => return Err(syntax(start, "closing `\"`")),
                Some('"') => break,
                Some('\\') => match self.bump() {
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some('r') => s.push('\r'),
                    _ => return Err(syntax(here, "escape sequence (\\\" \\\\ \\n \\t \\r)")),
                },
                Some(c) => s.push(c),
            }
        }
        if s.is_empty() {
            return Err(syntax(start, "non-empty string constant"));
        }
        Ok(s)
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<(Tok, Pos)>,
}

enum Clause {
    Rule(Rule),
    Exception(ExceptionExpr),
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            lexer: Lexer::new(src),
            peeked: None,
        }
    }

    fn peek(&mut self) -> Result<&(Tok, Pos), LangError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lexer.next()?);
        }
        Ok(self.peeked.as_ref().expect("filled above"))
    }

    fn advance(&mut self) -> Result<(Tok, Pos), LangError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lexer.next(),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Pos, LangError> {
        let (tok, pos) = self.advance()?;
        if tok == want {
            Ok(pos)
        } else {
            Err(syntax(pos, format!("{what}, found {}", tok.describe())))
        }
    }

    fn at_eof(&mut self) -> Result<bool, LangError> {
        Ok(matches!(self.peek()?.0, Tok::Eof))
    }

    fn atom(&mut self) -> Result<Atom, LangError> {
        let (tok, pos) = self.advance()?;
        let predicate = match tok {
            Tok::Ident(name) => name,
            other => {
                return Err(syntax(
                    pos,
                    format!("predicate name, found {}", other.describe()),
                ))
            }
        };
        check_predicate(&predicate, pos)?;
        self.atom_args(predicate)
    }

    fn atom_args(&mut self, predicate: String) -> Result<Atom, LangError> {
        let mut args = Vec::new();
        if matches!(self.peek()?.0, Tok::LParen) {
            self.advance()?;
            loop {
                args.push(self.term()?);
                let (tok, pos) = self.advance()?;
                match tok {
                    Tok::Comma => continue,
                    Tok::RParen => break,
                    other => {
                        return Err(syntax(
                            pos,
                            format!("`,` or `)`, found {}", other.describe()),
                        ))
                    }
                }
            }
        }
        Ok(Atom { predicate, args })
    }

    fn term(&mut self) -> Result<Term, LangError> {
        let (tok, pos) = self.advance()?;
        match tok {
            Tok::Ident(s) | Tok::Str(s) => Ok(Term::Const(s)),
            Tok::Var(s) => Ok(Term::Var(s)),
            other => Err(syntax(pos, format!("term, found {}", other.describe()))),
        }
    }

    fn clause(&mut self) -> Result<Clause, LangError> {
        let (tok, pos) = self.advance()?;
        let name = match tok {
            Tok::Ident(name) => name,
            other => return Err(syntax(pos, format!("clause, found {}", other.describe()))),
        };
        if name == RESERVED && matches!(self.peek()?.0, Tok::LParen) {
            self.advance()?;
            let blocked = self.atom()?;
            self.expect(Tok::Comma, "`,` between blocked atom and condition")?;
            let condition = self.atom()?;
            self.expect(Tok::RParen, "`)` closing exception")?;
            self.expect(Tok::Dot, "`.` after exception")?;
            return Ok(Clause::Exception(ExceptionExpr { blocked, condition }));
        }
        check_predicate(&name, pos)?;
        let head = self.atom_args(name)?;
        let (tok, p) = self.advance()?;
        let body = match tok {
            Tok::Dot => Vec::new(),
            Tok::Arrow => {
                let mut body = alloc::vec![self.atom()?];
                loop {
                    let (tok, p) = self.advance()?;
                    match tok {
                        Tok::Comma => body.push(self.atom()?),
                        Tok::Dot => break,
                        other => {
                            return Err(syntax(
                                p,
                                format!("`,` or `.`, found {}", other.describe()),
                            ))
                        }
                    }
                }
                body
            }
            other => {
                return Err(syntax(
                    p,
                    format!("`.` or `<=`, found {}", other.describe()),
                ))
            }
        };
        Ok(Clause::Rule(Rule { head, body }))
    }
}

fn check_predicate(name: &str, pos: Pos) -> Result<(), LangError> {
    if name == RESERVED {
        return Err(syntax(
            pos,
            "predicate name other than reserved `exception`",
        ));
    }
    if !name
        .chars()
        .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
    {
        return Err(syntax(pos, "predicate name matching [a-z][a-z0-9_]*"));
    }
    Ok(())
}

/// Renames variables to `V0, V1, ...` in order of first appearance.
fn canonical(rule: &Rule) -> Rule {
    let mut names: BTreeMap<String, String> = BTreeMap::new();
    let mut rename = |a: &Atom| Atom {
        predicate: a.predicate.clone(),
        args: a
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => {
                    let n = names.len();
                    Term::Var(
                        names
                            .entry(v.clone())
                            .or_insert_with(|| format!("V{n}"))
                            .clone(),
                    )
                }
                c => c.clone(),
            })
            .collect(),
    };
    let head = rename(&rule.head);
    let body = rule.body.iter().map(&mut rename).collect();
    Rule { head, body }
}

/// Parses a `.proleg` source into a [`Program`].
pub fn parse_program(source: &str) -> Result<Program, LangError> {
    let mut parser = Parser::new(source);
    let mut program = Program::default();
    let mut seen: BTreeMap<Rule, usize> = BTreeMap::new();
    while !parser.at_eof()? {
        match parser.clause()? {
            Clause::Exception(e) => program.exceptions.push(e),
            Clause::Rule(rule) => {
                let rule_index = program.rules.len();
                if rule.is_fact() && !rule.head.is_ground() {
                    return Err(LangError::NonGroundFact { rule_index });
                }
                if !rule.is_range_restricted() {
                    return Err(LangError::RangeRestriction { rule_index });
                }
                if let Some(&first) = seen.get(&canonical(&rule)) {
                    return Err(LangError::DuplicateRule {
                        first,
                        second: rule_index,
                    });
                }
                seen.insert(canonical(&rule), rule_index);
                program.rules.push(rule);
            }
        }
    }
    Ok(program)
}

/// Parses a single atom with an optional trailing period.
pub fn parse_atom(source: &str) -> Result<Atom, LangError> {
    let mut parser = Parser::new(source);
    let atom = parser.atom()?;
    if matches!(parser.peek()?.0, Tok::Dot) {
        parser.advance()?;
    }
    let (tok, pos) = parser.advance()?;
    if tok != Tok::Eof {
        return Err(syntax(
            pos,
            format!("end of atom, found {}", tok.describe()),
        ));
    }
    Ok(atom)
}

/// Parses exactly one rule or fact (no range-restriction check).
pub fn parse_rule(source: &str) -> Result<Rule, LangError> {
    let mut parser = Parser::new(source);
    let rule = match parser.clause()? {
        Clause::Rule(rule) => rule,
        Clause::Exception(_) => {
            return Err(LangError::Syntax {
                line: 1,
                col: 1,
                expected: "rule or fact, found exception".to_string(),
            })
        }
    };
    let (tok, pos) = parser.advance()?;
    if tok != Tok::Eof {
        return Err(syntax(
            pos,
            format!("end of rule, found {}", tok.describe()),
        ));
    }
    Ok(rule)
}

/// Parses a file that may only contain ground facts.
pub fn parse_facts(source: &str) -> Result<Vec<Atom>, LangError> {
    let program = parse_program(source)?;
    if let Some(e) = program.exceptions.first() {
        return Err(LangError::Syntax {
            line: 1,
            col: 1,
            expected: format!("facts only, found {e}"),
        });
    }
    program
        .rules
        .into_iter()
        .enumerate()
        .map(|(rule_index, r)| {
            if r.is_fact() {
                Ok(r.head)
            } else {
                Err(LangError::NotAFact { rule_index })
            }
        })
        .collect()
}

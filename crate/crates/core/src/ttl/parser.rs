//! Hand-written parser for the Turtle subset emitted by monitoring exports:
//! `@prefix` directives, prefixed names, `<...>` IRIs, the `a` keyword,
//! typed and plain literals, `;`/`,` lists, `.` terminators and `#` comments.
//! Blank nodes, collections and multi-line literals are rejected.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::term::{Literal, LiteralKind, Quad, Term, RDF_TYPE, XSD};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UndefinedPrefix(String),
    MalformedLiteral { lexical: String, kind: LiteralKind },
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            ParseErrorKind::UndefinedPrefix(p) => write!(f, "undefined prefix '{p}:'"),
            ParseErrorKind::MalformedLiteral { lexical, kind } => {
                write!(f, "malformed {kind:?} literal \"{lexical}\"")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    PrefixDirective,
    Iri(String),
    /// `prefix:local`; the prefix may be empty.
    Pname(String, String),
    A,
    Str(String),
    Number(String, LiteralKind),
    Bool(bool),
    Caret2,
    LangTag(String),
    Dot,
    Semicolon,
    Comma,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Token,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: usize,
    column: usize,
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | ':' | '%')
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.char_indices().peekable(),
            src,
            line: 1,
            column: 1,
        }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column,
            kind: ParseErrorKind::Syntax(msg.into()),
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next().map(|(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek() {
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

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> String {
        let start = self.chars.peek().map(|&(i, _)| i).unwrap_or(self.src.len());
        let mut end = start;
        while let Some(&(i, c)) = self.chars.peek() {
            if !pred(c) {
                break;
            }
            end = i + c.len_utf8();
            self.bump();
        }
        self.src[start..end].to_string()
    }

    fn tokenize(mut self) -> Result<Vec<Spanned>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            let (line, column) = (self.line, self.column);
            let Some(c) = self.peek() else {
                return Ok(out);
            };
            let tok = match c {
                '.' => {
                    self.bump();
                    Token::Dot
                }
                ';' => {
                    self.bump();
                    Token::Semicolon
                }
                ',' => {
                    self.bump();
                    Token::Comma
                }
                '^' => {
                    self.bump();
                    if self.bump() != Some('^') {
                        return Err(self.err("expected '^^'"));
                    }
                    Token::Caret2
                }
                '<' => {
                    self.bump();
                    let iri = self.take_while(|c| c != '>' && !c.is_whitespace());
                    if self.bump() != Some('>') {
                        return Err(self.err("unterminated IRI"));
                    }
                    Token::Iri(iri)
                }
                '"' | '\'' => Token::Str(self.string(c)?),
                '@' => {
                    self.bump();
                    let word = self.take_while(|c| c.is_ascii_alphanumeric() || c == '-');
                    match word.as_str() {
                        "prefix" => Token::PrefixDirective,
                        "" => return Err(self.err("empty '@' keyword")),
                        _ => Token::LangTag(word),
                    }
                }
                '_' if self.peek2() == Some(':') => {
                    return Err(self.err("blank nodes are not supported"));
                }
                '[' | '(' => {
                    return Err(self.err("blank nodes and collections are not supported"))
                }
                c if c.is_ascii_digit()
                    || ((c == '+' || c == '-')
                        && self.peek2().is_some_and(|d| d.is_ascii_digit())) =>
                {
                    self.number()?
                }
                c if is_name_char(c) => {
                    let mut word = self.take_while(is_name_char);
                    // trailing dots terminate the statement
                    let mut dots = 0;
                    while word.ends_with('.') {
                        word.pop();
                        dots += 1;
                    }
                    let tok = self.word(word, line, column)?;
                    out.push(Spanned { tok, line, column });
                    for i in 0..dots {
                        out.push(Spanned {
                            tok: Token::Dot,
                            line: self.line,
                            column: self.column - dots + i,
                        });
                    }
                    continue;
                }
                other => return Err(self.err(format!("unexpected character {other:?}"))),
            };
            out.push(Spanned { tok, line, column });
        }
    }

    fn word(&self, word: String, line: usize, column: usize) -> Result<Token, ParseError> {
        match word.as_str() {
            "a" => Ok(Token::A),
            "true" => Ok(Token::Bool(true)),
            "false" => Ok(Token::Bool(false)),
            _ => match word.split_once(':') {
                Some((p, l)) => Ok(Token::Pname(p.to_string(), l.to_string())),
                None => Err(ParseError {
                    line,
                    column,
                    kind: ParseErrorKind::Syntax(format!("unexpected bare word '{word}'")),
                }),
            },
        }
    }

    fn number(&mut self) -> Result<Token, ParseError> {
        let mut s = String::new();
        if let Some(c @ ('+' | '-')) = self.peek() {
            s.push(c);
            self.bump();
        }
        s.push_str(&self.take_while(|c| c.is_ascii_digit()));
        let mut kind = LiteralKind::Integer;
        if self.peek() == Some('.') && self.peek2().is_some_and(|d| d.is_ascii_digit()) {
            self.bump();
            s.push('.');
            s.push_str(&self.take_while(|c| c.is_ascii_digit()));
            kind = LiteralKind::Decimal;
        }
        if let Some(e @ ('e' | 'E')) = self.peek() {
            self.bump();
            s.push(e);
            if let Some(c @ ('+' | '-')) = self.peek() {
                s.push(c);
                self.bump();
            }
            let exp = self.take_while(|c| c.is_ascii_digit());
            if exp.is_empty() {
                return Err(self.err("malformed exponent"));
            }
            s.push_str(&exp);
            kind = LiteralKind::Decimal;
        }
        Ok(Token::Number(s, kind))
    }

    fn string(&mut self, quote: char) -> Result<String, ParseError> {
        self.bump();
        if self.peek() == Some(quote) && self.peek2() == Some(quote) {
            return Err(self.err("multi-line literals are not supported"));
        }
        let mut out = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(self.err("unterminated string literal")),
                Some('\\') => match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('r') => out.push('\r'),
                    Some(c @ ('"' | '\'' | '\\')) => out.push(c),
                    _ => return Err(self.err("unsupported escape sequence")),
                },
                Some(c) if c == quote => return Ok(out),
                Some(c) => out.push(c),
            }
        }
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    prefixes: HashMap<String, String>,
    timestamp: i64,
    out: Vec<Quad>,
    eof: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map(|s| (s.line, s.column)).unwrap_or(self.eof)
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        let (line, column) = self.here();
        ParseError { line, column, kind }
    }

    fn syntax(&self, msg: impl Into<String>) -> ParseError {
        self.error(ParseErrorKind::Syntax(msg.into()))
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect_dot(&mut self) -> Result<(), ParseError> {
        match self.peek().map(|s| &s.tok) {
            Some(Token::Dot) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.syntax("expected '.'")),
        }
    }

    fn resolve(&self, prefix: &str, local: &str) -> Result<String, ParseError> {
        match self.prefixes.get(prefix) {
            Some(ns) => Ok(format!("{ns}{local}")),
            None => Err(self.error(ParseErrorKind::UndefinedPrefix(prefix.to_string()))),
        }
    }

    fn iri(&mut self, what: &str) -> Result<String, ParseError> {
        let at = self.pos;
        match self.next().map(|s| s.tok) {
            Some(Token::Iri(i)) if !i.is_empty() => Ok(i),
            Some(Token::Pname(p, l)) => {
                self.pos = at;
                let iri = self.resolve(&p, &l)?;
                self.pos += 1;
                Ok(iri)
            }
            _ => {
                self.pos = at;
                Err(self.syntax(format!("expected {what} IRI")))
            }
        }
    }

    fn run(&mut self) -> Result<(), ParseError> {
        while let Some(s) = self.peek() {
            if s.tok == Token::PrefixDirective {
                self.pos += 1;
                let (p, l) = match self.next().map(|s| s.tok) {
                    Some(Token::Pname(p, l)) => (p, l),
                    _ => {
                        self.pos -= 1;
                        return Err(self.syntax("expected prefix name after @prefix"));
                    }
                };
                if !l.is_empty() {
                    self.pos -= 1;
                    return Err(self.syntax("prefix name must end with ':'"));
                }
                let ns = match self.next().map(|s| s.tok) {
                    Some(Token::Iri(i)) => i,
                    _ => {
                        self.pos -= 1;
                        return Err(self.syntax("expected namespace IRI"));
                    }
                };
                self.expect_dot()?;
                self.prefixes.insert(p, ns);
            } else {
                self.statement()?;
            }
        }
        Ok(())
    }

    fn statement(&mut self) -> Result<(), ParseError> {
        let subject = self.iri("subject")?;
        loop {
            let predicate = if self.peek().map(|s| &s.tok) == Some(&Token::A) {
                self.pos += 1;
                RDF_TYPE.to_string()
            } else {
                self.iri("predicate")?
            };
            loop {
                let object = self.object()?;
                self.out.push(Quad {
                    subject: subject.clone(),
                    predicate: predicate.clone(),
                    object,
                    timestamp: self.timestamp,
                });
                if self.peek().map(|s| &s.tok) == Some(&Token::Comma) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            match self.peek().map(|s| &s.tok) {
                Some(Token::Semicolon) => {
                    while self.peek().map(|s| &s.tok) == Some(&Token::Semicolon) {
                        self.pos += 1;
                    }
                    if self.peek().map(|s| &s.tok) == Some(&Token::Dot) {
                        break;
                    }
                }
                _ => break,
            }
        }
        self.expect_dot()
    }

    fn literal(&self, lexical: String, kind: LiteralKind) -> Result<Term, ParseError> {
        Literal::new(lexical, kind).map(Term::Literal).map_err(|e| {
            self.error(ParseErrorKind::MalformedLiteral {
                lexical: e.lexical,
                kind: e.kind,
            })
        })
    }

    fn object(&mut self) -> Result<Term, ParseError> {
        let at = self.pos;
        let Some(s) = self.next() else {
            return Err(self.syntax("expected object"));
        };
        match s.tok {
            Token::Iri(_) | Token::Pname(..) => {
                self.pos = at;
                Ok(Term::Iri(self.iri("object")?))
            }
            Token::Number(lex, kind) => {
                self.pos = at;
                let t = self.literal(lex, kind)?;
                self.pos += 1;
                Ok(t)
            }
            Token::Bool(b) => Ok(Term::Literal(Literal::boolean(b))),
            Token::Str(lex) => match self.peek().map(|s| s.tok.clone()) {
                Some(Token::Caret2) => {
                    self.pos += 1;
                    let dt_at = self.pos;
                    let dt = self.iri("datatype")?;
                    let kind = LiteralKind::from_datatype(&dt);
                    let lit_pos = self.pos;
                    self.pos = dt_at;
                    let t = self.literal(lex, kind)?;
                    self.pos = lit_pos;
                    Ok(t)
                }
                Some(Token::LangTag(_)) => {
                    self.pos += 1;
                    Ok(Term::Literal(Literal::text(lex)))
                }
                _ => Ok(Term::Literal(Literal::text(lex))),
            },
            _ => {
                self.pos = at;
                Err(self.syntax("expected object"))
            }
        }
    }
}

/// Parses one snapshot document. Every quad carries `timestamp`.
pub fn parse_ttl(text: &str, timestamp: i64) -> Result<Vec<Quad>, ParseError> {
    let lexer = Lexer::new(text);
    let toks = lexer.tokenize()?;
    let (mut line, mut column) = (1, 1);
    for c in text.chars() {
        if c == '\n' {
            line += 1;
            column = 1;
        } else {
            column += 1;
        }
    }
    let mut p = Parser {
        toks,
        pos: 0,
        prefixes: HashMap::from([("xsd".to_string(), XSD.to_string())]),
        timestamp,
        out: Vec::new(),
        eof: (line, column),
    };
    p.run()?;
    Ok(p.out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: &str = "http://ex/k#";

    #[test]
    fn single_type_statement() {
        let q = parse_ttl("@prefix k: <http://ex/k#> . k:pod1 a k:Pod .", 100).unwrap();
        assert_eq!(
            q,
            vec![Quad::new(
                format!("{K}pod1"),
                RDF_TYPE,
                Term::Iri(format!("{K}Pod")),
                100
            )]
        );
    }

    #[test]
    fn empty_document() {
        assert!(parse_ttl("", 5).unwrap().is_empty());
        assert!(parse_ttl("  # just a comment\n\n", 5).unwrap().is_empty());
    }

    #[test]
    fn literals_lists_and_full_iris() {
        let src = r#"
@prefix k: <http://ex/k#> .
@prefix xsd: <http://www.w3.org/2001/XMLSchema#> .
# pod attributes
k:p k:cpu "0.50"^^xsd:decimal ; k:restarts 3 ;
    k:ready true , false .
<http://ex/k#p> k:name "pod \"one\""@en .
k:p k:mem 1.5e3 .
k:p k:count "7"^^<http://www.w3.org/2001/XMLSchema#int> .
"#;
        let q = parse_ttl(src, 1).unwrap();
        assert_eq!(q.len(), 7);
        assert_eq!(q[0].object, Term::Literal(Literal::new("0.50", LiteralKind::Decimal).unwrap()));
        assert_eq!(q[1].object, Term::Literal(Literal::integer(3)));
        assert_eq!(q[3].object, Term::Literal(Literal::boolean(false)));
        assert_eq!(q[4].object, Term::Literal(Literal::text("pod \"one\"")));
        assert_eq!(q[5].object.as_literal().unwrap().as_f64(), Some(1500.0));
        assert_eq!(q[6].object.as_literal().unwrap().kind(), LiteralKind::Integer);
        assert!(q.iter().all(|q| q.subject == format!("{K}p") && q.timestamp == 1));
    }

    #[test]
    fn name_followed_directly_by_dot() {
        let q = parse_ttl("@prefix k: <http://ex/k#> .\nk:a k:b k:c.", 0).unwrap();
        assert_eq!(q[0].object, Term::Iri(format!("{K}c")));
    }

    #[test]
    fn undefined_prefix_reports_position() {
        let e = parse_ttl("@prefix k: <http://ex/k#> .\nk:a q:b k:c .", 0).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UndefinedPrefix("q".into()));
        assert_eq!((e.line, e.column), (2, 5));
    }

    #[test]
    fn malformed_typed_literal() {
        let e = parse_ttl("@prefix k: <http://ex/k#> .\nk:a k:b \"x1\"^^xsd:integer .", 0)
            .unwrap_err();
        assert!(matches!(
            e.kind,
            ParseErrorKind::MalformedLiteral { kind: LiteralKind::Integer, .. }
        ));
        assert_eq!(e.line, 2);
    }

    #[test]
    fn syntax_errors() {
        for bad in [
            "@prefix k: <http://ex/k#> . k:a k:b k:c",
            "@prefix k: <http://ex/k#> . k:a k:b _:x .",
            "@prefix k: <http://ex/k#> . k:a k:b ( k:c ) .",
            "@prefix k: <http://ex/k#> . k:a k:b \"open .",
            "@prefix k: <http://ex/k#> . k:a k:b \"\"\"long\"\"\" .",
            "@prefix k: <http://ex/k#> . k:a . ",
            "k:a",
        ] {
            let e = parse_ttl(bad, 0).unwrap_err();
            assert!(
                matches!(e.kind, ParseErrorKind::Syntax(_) | ParseErrorKind::UndefinedPrefix(_)),
                "{bad}: {e}"
            );
        }
    }

    #[test]
    fn deterministic() {
        let src = "@prefix k: <http://ex/k#> . k:a k:b 1, 2, 3 ; k:c k:d .";
        assert_eq!(parse_ttl(src, 9).unwrap(), parse_ttl(src, 9).unwrap());
    }
}

use super::ast::Span;
use super::{Diagnostic, DiagnosticKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum TokenKind {
    Ident(String),
    /// `$signed`, `$display`, ...
    SystemIdent(String),
    Number(String),
    Str(String),
    Op(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

// Longest operators first.
const OPERATORS: &[&str] = &[
    "<<<", ">>>", "===", "!==", "==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "~&", "~|", "~^", "^~", "**", "+:",
    "-:", "(", ")", "[", "]", "{", "}", ";", ",", ":", ".", "#", "@", "=", "+", "-", "*", "/", "%", "&", "|", "^", "~",
    "!", "<", ">", "?",
];

struct Cursor<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    column: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<u8> {
        self.bytes.get(self.pos + offset).copied()
    }

    fn bump(&mut self) {
        if let Some(c) = self.peek() {
            if c == b'\n' {
                self.line += 1;
                self.column = 1;
            } else if (c & 0xC0) != 0x80 {
                self.column += 1;
            }
            self.pos += 1;
        }
    }

    fn mark(&self) -> (usize, u32, u32) {
        (self.pos, self.line, self.column)
    }

    fn span_from(&self, mark: (usize, u32, u32)) -> Span {
        Span {
            start: mark.0,
            end: self.pos,
            line: mark.1,
            column: mark.2,
            end_line: self.line,
        }
    }
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'$'
}

fn error(kind: DiagnosticKind, line: u32, column: u32, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        kind,
        line,
        column,
        message: message.into(),
    }
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut cur = Cursor {
        src,
        bytes: src.as_bytes(),
        pos: 0,
        line: 1,
        column: 1,
    };
    let mut tokens = Vec::new();
    loop {
        skip_trivia(&mut cur)?;
        let mark = cur.mark();
        let Some(c) = cur.peek() else {
            tokens.push(Token {
                kind: TokenKind::Eof,
                span: cur.span_from(mark),
            });
            return Ok(tokens);
        };
        let kind = if is_ident_start(c) {
            while cur.peek().is_some_and(is_ident_char) {
                cur.bump();
            }
            TokenKind::Ident(cur.src[mark.0..cur.pos].to_string())
        } else if c == b'\\' {
            // escaped identifier runs to the next whitespace
            cur.bump();
            while cur.peek().is_some_and(|c| !c.is_ascii_whitespace()) {
                cur.bump();
            }
            TokenKind::Ident(cur.src[mark.0 + 1..cur.pos].to_string())
        } else if c == b'$' {
            cur.bump();
            while cur.peek().is_some_and(is_ident_char) {
                cur.bump();
            }
            TokenKind::SystemIdent(cur.src[mark.0..cur.pos].to_string())
        } else if c.is_ascii_digit() || (c == b'\'' && cur.peek_at(1).is_some_and(is_base_or_fill)) {
            lex_number(&mut cur)?;
            TokenKind::Number(cur.src[mark.0..cur.pos].to_string())
        } else if c == b'"' {
            cur.bump();
            loop {
                match cur.peek() {
                    None | Some(b'\n') => {
                        return Err(error(
                            DiagnosticKind::SyntaxError,
                            mark.1,
                            mark.2,
                            "unterminated string literal",
                        ))
                    }
                    Some(b'\\') => {
                        cur.bump();
                        cur.bump();
                    }
                    Some(b'"') => {
                        cur.bump();
                        break;
                    }
                    Some(_) => cur.bump(),
                }
            }
            TokenKind::Str(cur.src[mark.0 + 1..cur.pos - 1].to_string())
        } else if c == b'`' {
            let (line, column) = (cur.line, cur.column);
            cur.bump();
            let start = cur.pos;
            while cur.peek().is_some_and(is_ident_char) {
                cur.bump();
            }
            return Err(error(
                DiagnosticKind::UnsupportedConstruct,
                line,
                column,
                format!("macro usage `{} is not supported", &cur.src[start..cur.pos]),
            ));
        } else {
            let rest = &cur.src[cur.pos..];
            let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(**op)) else {
                let ch = rest.chars().next().unwrap_or('?');
                return Err(error(
                    DiagnosticKind::SyntaxError,
                    mark.1,
                    mark.2,
                    format!("unexpected character '{ch}'"),
                ));
            };
            for _ in 0..op.len() {
                cur.bump();
            }
            TokenKind::Op(op)
        };
        tokens.push(Token {
            kind,
            span: cur.span_from(mark),
        });
    }
}

fn is_base_or_fill(c: u8) -> bool {
    matches!(
        c,
        b'b' | b'B' | b'o' | b'O' | b'd' | b'D' | b'h' | b'H' | b's' | b'S' | b'0' | b'1' | b'x' | b'X' | b'z' | b'Z'
    )
}

fn lex_number(cur: &mut Cursor<'_>) -> Result<(), Diagnostic> {
    let (line, column) = (cur.line, cur.column);
    while cur.peek().is_some_and(|c| c.is_ascii_digit() || c == b'_') {
        cur.bump();
    }
    // real literals are outside the subset
    if cur.peek() == Some(b'.') && cur.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
        return Err(error(
            DiagnosticKind::UnsupportedConstruct,
            line,
            column,
            "real-valued literals are not supported",
        ));
    }
    if cur.peek() != Some(b'\'') {
        return Ok(());
    }
    cur.bump();
    if cur.peek().is_some_and(|c| c == b's' || c == b'S') {
        cur.bump();
    }
    match cur.peek() {
        Some(b'b' | b'B' | b'o' | b'O' | b'd' | b'D' | b'h' | b'H') => {
            cur.bump();
            while cur.peek().is_some_and(|c| c == b' ' || c == b'\t') {
                cur.bump();
            }
            let start = cur.pos;
            while cur
                .peek()
                .is_some_and(|c| c.is_ascii_hexdigit() || matches!(c, b'_' | b'x' | b'X' | b'z' | b'Z' | b'?'))
            {
                cur.bump();
            }
            if cur.pos == start {
                return Err(error(
                    DiagnosticKind::SyntaxError,
                    line,
                    column,
                    "based literal has no digits",
                ));
            }
            Ok(())
        }
        Some(b'0' | b'1' | b'x' | b'X' | b'z' | b'Z') => {
            cur.bump();
            Ok(())
        }
        _ => Err(error(DiagnosticKind::SyntaxError, line, column, "malformed literal")),
    }
}

fn skip_trivia(cur: &mut Cursor<'_>) -> Result<(), Diagnostic> {
    loop {
        match cur.peek() {
            Some(c) if c.is_ascii_whitespace() => cur.bump(),
            Some(b'/') if cur.peek_at(1) == Some(b'/') => {
                while cur.peek().is_some_and(|c| c != b'\n') {
                    cur.bump();
                }
            }
            Some(b'/') if cur.peek_at(1) == Some(b'*') => {
                let (line, column) = (cur.line, cur.column);
                cur.bump();
                cur.bump();
                loop {
                    match cur.peek() {
                        None => {
                            return Err(error(
                                DiagnosticKind::SyntaxError,
                                line,
                                column,
                                "unterminated block comment",
                            ))
                        }
                        Some(b'*') if cur.peek_at(1) == Some(b'/') => {
                            cur.bump();
                            cur.bump();
                            break;
                        }
                        Some(_) => cur.bump(),
                    }
                }
            }
            Some(b'`') if is_skipped_directive(&cur.src[cur.pos + 1..]) => {
                while cur.peek().is_some_and(|c| c != b'\n') {
                    cur.bump();
                }
            }
            _ => return Ok(()),
        }
    }
}

/// Compiler directives that do not affect the parsed structure.
fn is_skipped_directive(rest: &str) -> bool {
    const DIRECTIVES: &[&str] = &[
        "timescale",
        "default_nettype",
        "resetall",
        "celldefine",
        "endcelldefine",
    ];
    let word: String = rest
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
        .collect();
    DIRECTIVES.contains(&word.as_str())
}

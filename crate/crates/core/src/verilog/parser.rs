use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::{Diagnostic, DiagnosticKind};

type PResult<T> = Result<T, Diagnostic>;

const RESERVED: &[&str] = &[
    "module",
    "endmodule",
    "input",
    "output",
    "inout",
    "wire",
    "reg",
    "logic",
    "integer",
    "parameter",
    "localparam",
    "assign",
    "always",
    "always_ff",
    "always_comb",
    "always_latch",
    "initial",
    "begin",
    "end",
    "if",
    "else",
    "case",
    "casez",
    "casex",
    "endcase",
    "default",
    "posedge",
    "negedge",
    "or",
    "signed",
    "unsigned",
    "generate",
    "endgenerate",
    "genvar",
    "function",
    "endfunction",
    "task",
    "endtask",
    "for",
    "while",
    "repeat",
    "forever",
    "unique",
    "priority",
    "tri",
    "supply0",
    "supply1",
    "real",
    "time",
    "bit",
];

pub(crate) struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

/// Either a module item or a procedural statement; used to re-parse slices
/// of source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fragment {
    Item(Item),
    Decl(Vec<Decl>),
    Stmt(Stmt),
}

impl Fragment {
    /// Signals assigned by the fragment.
    pub fn lvalues(&self) -> std::collections::BTreeSet<String> {
        let mut out = std::collections::BTreeSet::new();
        match self {
            Fragment::Item(Item::Assign(a)) => {
                for asg in &a.assignments {
                    asg.lhs.lvalue_targets(&mut out);
                }
            }
            Fragment::Item(Item::Always(a)) => super::drivers::stmt_targets(&a.body, &mut out),
            Fragment::Decl(decls) => {
                for d in decls.iter().filter(|d| d.init.is_some()) {
                    out.insert(d.name.clone());
                }
            }
            Fragment::Stmt(s) => super::drivers::stmt_targets(s, &mut out),
        }
        out
    }
}

impl<'a> Parser<'a> {
    pub(crate) fn new(src: &'a str) -> PResult<Self> {
        Ok(Parser {
            src,
            tokens: tokenize(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_kind_at(&self, offset: usize) -> &TokenKind {
        let idx = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].kind
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        tok
    }

    fn prev_span(&self) -> Span {
        self.tokens[self.pos.saturating_sub(1)].span
    }

    fn error_at(&self, tok: &Token, kind: DiagnosticKind, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            kind,
            line: tok.span.line,
            column: tok.span.column,
            message: message.into(),
        }
    }

    fn syntax_error(&self, expected: &str) -> Diagnostic {
        let tok = self.peek();
        let found = describe(&tok.kind);
        self.error_at(
            tok,
            DiagnosticKind::SyntaxError,
            format!("expected {expected}, found {found}"),
        )
    }

    fn unsupported(&self, what: &str) -> Diagnostic {
        self.error_at(
            self.peek(),
            DiagnosticKind::UnsupportedConstruct,
            format!("{what} is not supported"),
        )
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Op(o) if *o == op)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Ident(i) if i == kw)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> PResult<Token> {
        if self.is_op(op) {
            Ok(self.advance())
        } else {
            Err(self.syntax_error(&format!("'{op}'")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Token> {
        if self.is_kw(kw) {
            Ok(self.advance())
        } else {
            Err(self.syntax_error(&format!("'{kw}'")))
        }
    }

    fn expect_ident(&mut self) -> PResult<(String, Span)> {
        match &self.peek().kind {
            TokenKind::Ident(name) if !RESERVED.contains(&name.as_str()) => {
                let name = name.clone();
                let tok = self.advance();
                Ok((name, tok.span))
            }
            _ => Err(self.syntax_error("identifier")),
        }
    }

    fn at_eof(&self) -> bool {
        self.peek().kind == TokenKind::Eof
    }

    // ---- module structure ----

    pub(crate) fn parse_module(&mut self) -> PResult<AstModule> {
        self.expect_kw("module")?;
        let (name, _) = self.expect_ident()?;
        let mut module = AstModule {
            name,
            ports: Vec::new(),
            decls: Vec::new(),
            items: Vec::new(),
            source: self.src.to_string(),
        };
        // names listed in a non-ANSI header, waiting for their direction
        let mut pending_ports: Vec<(String, Span)> = Vec::new();

        if self.eat_op("#") {
            self.expect_op("(")?;
            if !self.is_op(")") {
                loop {
                    let start = self.peek().span;
                    let kind = if self.eat_kw("localparam") {
                        DeclKind::Localparam
                    } else {
                        self.eat_kw("parameter");
                        DeclKind::Parameter
                    };
                    for d in self.parse_param_body(kind, start, false)? {
                        push_decl(&mut module, d)?;
                    }
                    if !self.eat_op(",") {
                        break;
                    }
                }
            }
            self.expect_op(")")?;
        }

        if self.eat_op("(") {
            if !self.is_op(")") {
                if self.is_direction() {
                    self.parse_ansi_ports(&mut module)?;
                } else {
                    loop {
                        let (port, span) = self.expect_ident()?;
                        pending_ports.push((port, span));
                        if !self.eat_op(",") {
                            break;
                        }
                    }
                }
            }
            self.expect_op(")")?;
        }
        self.expect_op(";")?;

        while !self.is_kw("endmodule") {
            if self.at_eof() {
                return Err(self.syntax_error("'endmodule'"));
            }
            self.parse_item(&mut module, &mut pending_ports)?;
        }
        self.advance();

        if let Some((name, span)) = pending_ports.first() {
            return Err(Diagnostic {
                kind: DiagnosticKind::SyntaxError,
                line: span.line,
                column: span.column,
                message: format!("port '{name}' has no direction declaration"),
            });
        }
        if !self.at_eof() {
            if self.is_kw("module") {
                return Err(self.unsupported("more than one module per source"));
            }
            return Err(self.syntax_error("end of input"));
        }
        Ok(module)
    }

    fn is_direction(&self) -> bool {
        self.is_kw("input") || self.is_kw("output") || self.is_kw("inout")
    }

    fn parse_direction(&mut self) -> PResult<Direction> {
        if self.eat_kw("input") {
            Ok(Direction::Input)
        } else if self.eat_kw("output") {
            Ok(Direction::Output)
        } else if self.eat_kw("inout") {
            Ok(Direction::Inout)
        } else {
            Err(self.syntax_error("port direction"))
        }
    }

    /// `[wire|reg|logic] [signed] [range]` after a direction keyword.
    fn parse_port_type(&mut self) -> PResult<(DeclKind, bool, Option<BitRange>)> {
        let mut kind = DeclKind::Wire;
        if self.eat_kw("wire") {
        } else if self.eat_kw("reg") || self.eat_kw("logic") {
            kind = DeclKind::Reg;
        } else if self.eat_kw("integer") {
            kind = DeclKind::Integer;
        }
        let signed = self.eat_kw("signed");
        self.eat_kw("unsigned");
        let range = self.parse_opt_range()?;
        Ok((kind, signed, range))
    }

    fn parse_ansi_ports(&mut self, module: &mut AstModule) -> PResult<()> {
        let mut current: Option<(Direction, DeclKind, bool, Option<BitRange>)> = None;
        loop {
            let start = self.peek().span;
            if self.is_direction() {
                let dir = self.parse_direction()?;
                let (kind, signed, range) = self.parse_port_type()?;
                current = Some((dir, kind, signed, range));
            }
            let Some((dir, kind, signed, range)) = current.clone() else {
                return Err(self.syntax_error("port direction"));
            };
            let (name, name_span) = self.expect_ident()?;
            if self.is_op("[") {
                return Err(self.unsupported("unpacked array port"));
            }
            let span = if start.start < name_span.start {
                start.to(name_span)
            } else {
                name_span
            };
            push_port(
                module,
                Port {
                    name,
                    direction: dir,
                    kind,
                    signed,
                    range,
                    span,
                },
            )?;
            if !self.eat_op(",") {
                return Ok(());
            }
        }
    }

    fn parse_opt_range(&mut self) -> PResult<Option<BitRange>> {
        if !self.eat_op("[") {
            return Ok(None);
        }
        let msb = self.parse_expr()?;
        self.expect_op(":")?;
        let lsb = self.parse_expr()?;
        self.expect_op("]")?;
        Ok(Some(BitRange { msb, lsb }))
    }

    fn parse_item(&mut self, module: &mut AstModule, pending_ports: &mut Vec<(String, Span)>) -> PResult<()> {
        let start = self.peek().span;
        let word = match &self.peek().kind {
            TokenKind::Ident(w) => w.clone(),
            TokenKind::Op(";") => {
                self.advance();
                return Ok(());
            }
            _ => return Err(self.syntax_error("module item")),
        };
        match word.as_str() {
            "input" | "output" | "inout" => {
                let dir = self.parse_direction()?;
                let (kind, signed, range) = self.parse_port_type()?;
                loop {
                    let (name, name_span) = self.expect_ident()?;
                    let Some(idx) = pending_ports.iter().position(|(p, _)| *p == name) else {
                        return Err(Diagnostic {
                            kind: DiagnosticKind::SyntaxError,
                            line: name_span.line,
                            column: name_span.column,
                            message: format!("'{name}' is not in the module port list"),
                        });
                    };
                    pending_ports.remove(idx);
                    push_port(
                        module,
                        Port {
                            name,
                            direction: dir,
                            kind,
                            signed,
                            range: range.clone(),
                            span: start.to(name_span),
                        },
                    )?;
                    if !self.eat_op(",") {
                        break;
                    }
                }
                self.expect_op(";")?;
            }
            "wire" | "reg" | "logic" | "integer" | "tri" => {
                self.advance();
                let kind = match word.as_str() {
                    "wire" | "tri" => DeclKind::Wire,
                    "integer" => DeclKind::Integer,
                    _ => DeclKind::Reg,
                };
                let signed = self.eat_kw("signed");
                self.eat_kw("unsigned");
                let range = self.parse_opt_range()?;
                let mut decls = Vec::new();
                loop {
                    let (name, name_span) = self.expect_ident()?;
                    if self.is_op("[") {
                        return Err(self.unsupported("unpacked array (memory) declaration"));
                    }
                    let init = if self.eat_op("=") {
                        Some(self.parse_expr()?)
                    } else {
                        None
                    };
                    decls.push(Decl {
                        name,
                        kind,
                        signed,
                        range: range.clone(),
                        init,
                        span: start.to(name_span),
                    });
                    if !self.eat_op(",") {
                        break;
                    }
                }
                let end = self.expect_op(";")?;
                for mut decl in decls {
                    // initialised declarations span the whole statement so they re-parse
                    if decl.init.is_some() {
                        decl.span = start.to(end.span);
                    }
                    push_decl(module, decl)?;
                }
            }
            "parameter" | "localparam" => {
                self.advance();
                let kind = if word == "parameter" {
                    DeclKind::Parameter
                } else {
                    DeclKind::Localparam
                };
                let decls = self.parse_param_body(kind, start, true)?;
                for d in decls {
                    push_decl(module, d)?;
                }
                self.expect_op(";")?;
            }
            "assign" => {
                self.advance();
                let mut assignments = Vec::new();
                loop {
                    let lhs = self.parse_lvalue()?;
                    self.expect_op("=")?;
                    let rhs = self.parse_expr()?;
                    assignments.push(Assignment { lhs, rhs });
                    if !self.eat_op(",") {
                        break;
                    }
                }
                let end = self.expect_op(";")?;
                module.items.push(Item::Assign(ContinuousAssign {
                    assignments,
                    span: start.to(end.span),
                }));
            }
            "always" | "always_ff" | "always_comb" | "always_latch" => {
                let block = self.parse_always()?;
                module.items.push(Item::Always(block));
            }
            "initial" => return Err(self.unsupported("initial block")),
            "generate" | "genvar" => return Err(self.unsupported("generate block")),
            "function" => return Err(self.unsupported("function")),
            "task" => return Err(self.unsupported("task")),
            "module" => return Err(self.unsupported("nested module declaration")),
            "real" | "time" | "realtime" => return Err(self.unsupported(&format!("'{word}' declaration"))),
            _ if !RESERVED.contains(&word.as_str())
                && (matches!(self.peek_kind_at(1), TokenKind::Ident(_))
                    || matches!(self.peek_kind_at(1), TokenKind::Op("#"))) =>
            {
                return Err(self.unsupported("module instantiation"));
            }
            _ => return Err(self.syntax_error("module item")),
        }
        Ok(())
    }

    /// Body after `parameter`/`localparam`: `[type] [range] NAME = expr {, NAME = expr}`.
    /// Inside a `#(...)` header only one assignment is consumed per call.
    fn parse_param_body(&mut self, kind: DeclKind, start: Span, allow_list: bool) -> PResult<Vec<Decl>> {
        self.eat_kw("integer");
        let signed = self.eat_kw("signed");
        self.eat_kw("unsigned");
        let range = self.parse_opt_range()?;
        let mut decls = Vec::new();
        loop {
            let (name, _) = self.expect_ident()?;
            self.expect_op("=")?;
            let value = self.parse_expr()?;
            decls.push(Decl {
                name,
                kind,
                signed,
                range: range.clone(),
                init: Some(value),
                span: start.to(self.prev_span()),
            });
            if !allow_list || !self.eat_op(",") {
                break;
            }
        }
        Ok(decls)
    }

    fn parse_always(&mut self) -> PResult<AlwaysBlock> {
        let start_tok = self.advance();
        let TokenKind::Ident(word) = &start_tok.kind else {
            unreachable!()
        };
        let kind = match word.as_str() {
            "always_ff" => AlwaysKind::AlwaysFf,
            "always_comb" => AlwaysKind::AlwaysComb,
            "always_latch" => AlwaysKind::AlwaysLatch,
            _ => AlwaysKind::Always,
        };
        let sensitivity = if matches!(kind, AlwaysKind::AlwaysComb | AlwaysKind::AlwaysLatch) {
            Sensitivity::Star
        } else if self.eat_op("@") {
            if self.eat_op("*") {
                Sensitivity::Star
            } else {
                self.expect_op("(")?;
                let sens = if self.is_op("*") {
                    self.advance();
                    Sensitivity::Star
                } else {
                    let mut events = Vec::new();
                    loop {
                        let edge = if self.eat_kw("posedge") {
                            Some(Edge::Posedge)
                        } else if self.eat_kw("negedge") {
                            Some(Edge::Negedge)
                        } else {
                            None
                        };
                        let expr = self.parse_expr()?;
                        events.push(EventExpr { edge, expr });
                        if !(self.eat_op(",") || self.eat_kw("or")) {
                            break;
                        }
                    }
                    Sensitivity::List(events)
                };
                self.expect_op(")")?;
                sens
            }
        } else if self.is_op("#") {
            return Err(self.unsupported("delay control"));
        } else {
            return Err(self.syntax_error("'@'"));
        };
        let header_span = start_tok.span.to(self.prev_span());
        let body = self.parse_stmt()?;
        Ok(AlwaysBlock {
            kind,
            sensitivity,
            span: start_tok.span.to(body.span),
            header_span,
            body,
        })
    }

    // ---- statements ----

    pub(crate) fn parse_stmt(&mut self) -> PResult<Stmt> {
        let start = self.peek().span;
        if self.eat_op(";") {
            return Ok(Stmt {
                kind: StmtKind::Null,
                span: start,
            });
        }
        if self.is_op("#") {
            return Err(self.unsupported("delay control"));
        }
        if self.is_op("@") {
            return Err(self.unsupported("event control inside a statement"));
        }
        if let TokenKind::SystemIdent(name) = &self.peek().kind {
            let name = name.clone();
            return Err(self.unsupported(&format!("system task {name}")));
        }
        if self.is_kw("unique") || self.is_kw("priority") {
            self.advance();
        }
        if self.eat_kw("begin") {
            let label = if self.eat_op(":") {
                Some(self.expect_ident()?.0)
            } else {
                None
            };
            let mut stmts = Vec::new();
            while !self.is_kw("end") {
                if self.at_eof() {
                    return Err(self.syntax_error("'end'"));
                }
                stmts.push(self.parse_stmt()?);
            }
            let end = self.advance();
            let mut span = start.to(end.span);
            if self.eat_op(":") {
                self.expect_ident()?;
                span = start.to(self.prev_span());
            }
            return Ok(Stmt {
                kind: StmtKind::Block { label, stmts },
                span,
            });
        }
        if self.eat_kw("if") {
            self.expect_op("(")?;
            let cond = self.parse_expr()?;
            let close = self.expect_op(")")?;
            let cond_span = start.to(close.span);
            let then_branch = Box::new(self.parse_stmt()?);
            let mut end = then_branch.span;
            let else_branch = if self.eat_kw("else") {
                let e = self.parse_stmt()?;
                end = e.span;
                Some(Box::new(e))
            } else {
                None
            };
            return Ok(Stmt {
                kind: StmtKind::If {
                    cond,
                    cond_span,
                    then_branch,
                    else_branch,
                },
                span: start.to(end),
            });
        }
        if self.is_kw("case") || self.is_kw("casez") || self.is_kw("casex") {
            return self.parse_case(start);
        }
        for kw in ["for", "while", "repeat", "forever"] {
            if self.is_kw(kw) {
                return Err(self.unsupported(&format!("'{kw}' loop")));
            }
        }
        if self.is_kw("assign") || self.is_kw("force") || self.is_kw("deassign") {
            return Err(self.unsupported("procedural continuous assignment"));
        }
        if self.is_kw("fork") || self.is_kw("disable") || self.is_kw("wait") {
            return Err(self.unsupported("this procedural statement"));
        }

        let lhs = self.parse_lvalue()?;
        let kind = if self.eat_op("=") {
            AssignmentKind::Blocking
        } else if self.eat_op("<=") {
            AssignmentKind::Nonblocking
        } else {
            return Err(self.syntax_error("'=' or '<='"));
        };
        if self.is_op("#") || self.is_op("@") {
            return Err(self.unsupported("intra-assignment timing control"));
        }
        let rhs = self.parse_expr()?;
        let end = self.expect_op(";")?;
        Ok(Stmt {
            kind: StmtKind::Assign { kind, lhs, rhs },
            span: start.to(end.span),
        })
    }

    fn parse_case(&mut self, start: Span) -> PResult<Stmt> {
        let kw = self.advance();
        let kind = match &kw.kind {
            TokenKind::Ident(w) if w == "casez" => CaseKind::Casez,
            TokenKind::Ident(w) if w == "casex" => CaseKind::Casex,
            _ => CaseKind::Case,
        };
        self.expect_op("(")?;
        let expr = self.parse_expr()?;
        let close = self.expect_op(")")?;
        let expr_span = start.to(close.span);
        let mut arms = Vec::new();
        let mut seen_default = false;
        while !self.is_kw("endcase") {
            if self.at_eof() {
                return Err(self.syntax_error("'endcase'"));
            }
            let label_start = self.peek().span;
            let labels = if self.eat_kw("default") {
                if seen_default {
                    return Err(Diagnostic {
                        kind: DiagnosticKind::SyntaxError,
                        line: label_start.line,
                        column: label_start.column,
                        message: "case statement has more than one default arm".into(),
                    });
                }
                seen_default = true;
                self.eat_op(":");
                Vec::new()
            } else {
                let mut labels = Vec::new();
                loop {
                    labels.push(self.parse_expr()?);
                    if !self.eat_op(",") {
                        break;
                    }
                }
                self.expect_op(":")?;
                labels
            };
            let label_span = label_start.to(self.prev_span());
            let body = self.parse_stmt()?;
            arms.push(CaseArm {
                labels,
                body,
                label_span,
            });
        }
        let end = self.advance();
        Ok(Stmt {
            kind: StmtKind::Case {
                kind,
                expr,
                expr_span,
                arms,
            },
            span: start.to(end.span),
        })
    }

    fn parse_lvalue(&mut self) -> PResult<Expr> {
        let tok = self.peek().clone();
        let expr = if self.is_op("{") {
            self.parse_primary()?
        } else {
            let (name, _) = self.expect_ident()?;
            self.parse_selects(Expr::Ident(name))?
        };
        if !expr.is_lvalue() {
            return Err(self.error_at(&tok, DiagnosticKind::SyntaxError, "invalid assignment target"));
        }
        Ok(expr)
    }

    // ---- expressions ----

    pub(crate) fn parse_expr(&mut self) -> PResult<Expr> {
        let cond = self.parse_binary(0)?;
        if self.eat_op("?") {
            let then_expr = self.parse_expr()?;
            self.expect_op(":")?;
            let else_expr = self.parse_expr()?;
            return Ok(Expr::Ternary {
                cond: Box::new(cond),
                then_expr: Box::new(then_expr),
                else_expr: Box::new(else_expr),
            });
        }
        Ok(cond)
    }

    fn binary_op(&self) -> Option<(BinaryOp, u8)> {
        let TokenKind::Op(op) = &self.peek().kind else {
            return None;
        };
        let entry = match *op {
            "||" => (BinaryOp::LogicalOr, 1),
            "&&" => (BinaryOp::LogicalAnd, 2),
            "|" => (BinaryOp::BitOr, 3),
            "^" => (BinaryOp::BitXor, 4),
            "~^" | "^~" => (BinaryOp::BitXnor, 4),
            "&" => (BinaryOp::BitAnd, 5),
            "==" => (BinaryOp::Eq, 6),
            "!=" => (BinaryOp::Ne, 6),
            "===" => (BinaryOp::CaseEq, 6),
            "!==" => (BinaryOp::CaseNe, 6),
            "<" => (BinaryOp::Lt, 7),
            "<=" => (BinaryOp::Le, 7),
            ">" => (BinaryOp::Gt, 7),
            ">=" => (BinaryOp::Ge, 7),
            "<<" => (BinaryOp::Shl, 8),
            ">>" => (BinaryOp::Shr, 8),
            "<<<" => (BinaryOp::AShl, 8),
            ">>>" => (BinaryOp::AShr, 8),
            "+" => (BinaryOp::Add, 9),
            "-" => (BinaryOp::Sub, 9),
            "*" => (BinaryOp::Mul, 10),
            "/" => (BinaryOp::Div, 10),
            "%" => (BinaryOp::Mod, 10),
            "**" => (BinaryOp::Pow, 11),
            _ => return None,
        };
        Some(entry)
    }

    fn parse_binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.parse_unary()?;
        while let Some((op, prec)) = self.binary_op() {
            if prec < min_prec {
                break;
            }
            self.advance();
            // `**` is right-associative
            let next = if op == BinaryOp::Pow { prec } else { prec + 1 };
            let rhs = self.parse_binary(next)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> PResult<Expr> {
        let op = match &self.peek().kind {
            TokenKind::Op("+") => Some(UnaryOp::Plus),
            TokenKind::Op("-") => Some(UnaryOp::Minus),
            TokenKind::Op("!") => Some(UnaryOp::LogicalNot),
            TokenKind::Op("~") => Some(UnaryOp::BitNot),
            TokenKind::Op("&") => Some(UnaryOp::ReduceAnd),
            TokenKind::Op("|") => Some(UnaryOp::ReduceOr),
            TokenKind::Op("^") => Some(UnaryOp::ReduceXor),
            TokenKind::Op("~&") => Some(UnaryOp::ReduceNand),
            TokenKind::Op("~|") => Some(UnaryOp::ReduceNor),
            TokenKind::Op("~^") | TokenKind::Op("^~") => Some(UnaryOp::ReduceXnor),
            _ => None,
        };
        if let Some(op) = op {
            self.advance();
            let operand = self.parse_unary()?;
            return Ok(Expr::Unary {
                op,
                operand: Box::new(operand),
            });
        }
        let primary = self.parse_primary()?;
        self.parse_selects(primary)
    }

    fn parse_selects(&mut self, mut base: Expr) -> PResult<Expr> {
        while self.is_op("[") {
            if !matches!(base, Expr::Ident(_) | Expr::Index { .. }) {
                break;
            }
            self.advance();
            let first = self.parse_expr()?;
            base = if self.eat_op(":") {
                let lsb = self.parse_expr()?;
                Expr::PartSelect {
                    base: Box::new(base),
                    msb: Box::new(first),
                    lsb: Box::new(lsb),
                }
            } else if self.is_op("+:") || self.is_op("-:") {
                let ascending = self.is_op("+:");
                self.advance();
                let width = self.parse_expr()?;
                Expr::IndexedPartSelect {
                    base: Box::new(base),
                    start: Box::new(first),
                    width: Box::new(width),
                    ascending,
                }
            } else {
                Expr::Index {
                    base: Box::new(base),
                    index: Box::new(first),
                }
            };
            self.expect_op("]")?;
        }
        Ok(base)
    }

    fn parse_primary(&mut self) -> PResult<Expr> {
        let tok = self.peek().clone();
        match &tok.kind {
            TokenKind::Number(text) => {
                self.advance();
                Ok(Expr::Number(text.clone()))
            }
            TokenKind::Ident(name) => {
                if RESERVED.contains(&name.as_str()) {
                    return Err(self.syntax_error("expression"));
                }
                self.advance();
                if self.is_op("(") {
                    return Err(self.error_at(
                        &tok,
                        DiagnosticKind::UnsupportedConstruct,
                        format!("function call '{name}' is not supported"),
                    ));
                }
                if self.is_op(".") {
                    return Err(self.error_at(
                        &tok,
                        DiagnosticKind::UnsupportedConstruct,
                        "hierarchical reference is not supported",
                    ));
                }
                Ok(Expr::Ident(name.clone()))
            }
            TokenKind::SystemIdent(name) => {
                if name != "$signed" && name != "$unsigned" {
                    return Err(self.error_at(
                        &tok,
                        DiagnosticKind::UnsupportedConstruct,
                        format!("system function {name} is not supported"),
                    ));
                }
                self.advance();
                self.expect_op("(")?;
                let arg = self.parse_expr()?;
                self.expect_op(")")?;
                Ok(Expr::Call {
                    name: name.clone(),
                    args: vec![arg],
                })
            }
            TokenKind::Op("(") => {
                self.advance();
                let inner = self.parse_expr()?;
                self.expect_op(")")?;
                Ok(inner)
            }
            TokenKind::Op("{") => {
                self.advance();
                let first = self.parse_expr()?;
                if self.is_op("{") {
                    // replication {n{...}}
                    self.advance();
                    let mut items = Vec::new();
                    loop {
                        items.push(self.parse_expr()?);
                        if !self.eat_op(",") {
                            break;
                        }
                    }
                    self.expect_op("}")?;
                    self.expect_op("}")?;
                    return Ok(Expr::Replicate {
                        count: Box::new(first),
                        items,
                    });
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    items.push(self.parse_expr()?);
                }
                self.expect_op("}")?;
                Ok(Expr::Concat(items))
            }
            TokenKind::Str(_) => Err(self.error_at(
                &tok,
                DiagnosticKind::UnsupportedConstruct,
                "string literal is not supported",
            )),
            _ => Err(self.syntax_error("expression")),
        }
    }

    pub(crate) fn parse_fragment(&mut self) -> PResult<Fragment> {
        let mut scratch = AstModule {
            name: String::new(),
            ports: Vec::new(),
            decls: Vec::new(),
            items: Vec::new(),
            source: String::new(),
        };
        let fragment = if self.is_kw("assign")
            || self.is_kw("always")
            || self.is_kw("always_ff")
            || self.is_kw("always_comb")
            || self.is_kw("always_latch")
        {
            self.parse_item(&mut scratch, &mut Vec::new())?;
            Fragment::Item(scratch.items.remove(0))
        } else if self.is_kw("wire") || self.is_kw("reg") || self.is_kw("logic") || self.is_kw("integer") {
            self.parse_item(&mut scratch, &mut Vec::new())?;
            Fragment::Decl(scratch.decls)
        } else {
            Fragment::Stmt(self.parse_stmt()?)
        };
        if !self.at_eof() {
            return Err(self.syntax_error("end of fragment"));
        }
        Ok(fragment)
    }
}

fn describe(kind: &TokenKind) -> String {
    match kind {
        TokenKind::Ident(s) => format!("'{s}'"),
        TokenKind::SystemIdent(s) => format!("'{s}'"),
        TokenKind::Number(s) => format!("number '{s}'"),
        TokenKind::Str(_) => "string literal".into(),
        TokenKind::Op(o) => format!("'{o}'"),
        TokenKind::Eof => "end of input".into(),
    }
}

fn push_port(module: &mut AstModule, port: Port) -> PResult<()> {
    if module.ports.iter().any(|p| p.name == port.name) {
        return Err(Diagnostic {
            kind: DiagnosticKind::DuplicateDeclaration,
            line: port.span.line,
            column: port.span.column,
            message: format!("port '{}' declared more than once", port.name),
        });
    }
    module.ports.push(port);
    Ok(())
}

fn push_decl(module: &mut AstModule, decl: Decl) -> PResult<()> {
    let duplicate = module.decls.iter().any(|d| d.name == decl.name)
        || module.ports.iter().any(|p| {
            p.name == decl.name
                // `output q; reg q;` completes a non-ANSI port; anything else is a redeclaration
                && (decl.kind.is_constant() || p.kind != DeclKind::Wire || decl.init.is_some())
        });
    if duplicate {
        return Err(Diagnostic {
            kind: DiagnosticKind::DuplicateDeclaration,
            line: decl.span.line,
            column: decl.span.column,
            message: format!("'{}' declared more than once", decl.name),
        });
    }
    // a `reg` redeclaration of a non-ANSI port upgrades the port kind
    if let Some(port) = module.ports.iter_mut().find(|p| p.name == decl.name) {
        port.kind = decl.kind;
        if port.range.is_none() {
            port.range = decl.range;
        }
        port.signed |= decl.signed;
        return Ok(());
    }
    module.decls.push(decl);
    Ok(())
}

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Byte range into the source text plus 1-based line/column of its start.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub column: u32,
    pub end_line: u32,
}

impl Span {
    pub fn slice<'a>(&self, source: &'a str) -> &'a str {
        &source[self.start..self.end]
    }

    pub(crate) fn to(self, other: Span) -> Span {
        Span {
            start: self.start,
            end: other.end,
            line: self.line,
            column: self.column,
            end_line: other.end_line,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
    Inout,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Input => "input",
            Direction::Output => "output",
            Direction::Inout => "inout",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeclKind {
    Wire,
    Reg,
    Integer,
    Parameter,
    Localparam,
}

impl DeclKind {
    pub fn is_constant(self) -> bool {
        matches!(self, DeclKind::Parameter | DeclKind::Localparam)
    }
}

/// `[msb:lsb]` packed range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitRange {
    pub msb: Expr,
    pub lsb: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub direction: Direction,
    /// `wire` unless the port is declared as a variable (`reg`/`logic`).
    pub kind: DeclKind,
    pub signed: bool,
    pub range: Option<BitRange>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decl {
    pub name: String,
    pub kind: DeclKind,
    pub signed: bool,
    pub range: Option<BitRange>,
    pub init: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Item {
    Assign(ContinuousAssign),
    Always(AlwaysBlock),
}

impl Item {
    pub fn span(&self) -> Span {
        match self {
            Item::Assign(a) => a.span,
            Item::Always(a) => a.span,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub lhs: Expr,
    pub rhs: Expr,
}

/// `assign a = x, b = y;`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContinuousAssign {
    pub assignments: Vec<Assignment>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlwaysKind {
    Always,
    AlwaysFf,
    AlwaysComb,
    AlwaysLatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Posedge,
    Negedge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventExpr {
    pub edge: Option<Edge>,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sensitivity {
    /// `@*`, `@(*)`, or the implicit list of `always_comb`.
    Star,
    List(Vec<EventExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlwaysBlock {
    pub kind: AlwaysKind,
    pub sensitivity: Sensitivity,
    pub body: Stmt,
    pub span: Span,
    /// `always @(...)` header, without the body.
    pub header_span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    Case,
    Casez,
    Casex,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseArm {
    /// Empty for the `default` arm.
    pub labels: Vec<Expr>,
    pub body: Stmt,
    pub label_span: Span,
}

impl CaseArm {
    pub fn is_default(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentKind {
    Continuous,
    Blocking,
    Nonblocking,
}

impl fmt::Display for AssignmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AssignmentKind::Continuous => "continuous",
            AssignmentKind::Blocking => "blocking",
            AssignmentKind::Nonblocking => "nonblocking",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StmtKind {
    Block {
        label: Option<String>,
        stmts: Vec<Stmt>,
    },
    If {
        cond: Expr,
        /// `if (cond)` header.
        cond_span: Span,
        then_branch: Box<Stmt>,
        else_branch: Option<Box<Stmt>>,
    },
    Case {
        kind: CaseKind,
        expr: Expr,
        /// `case (expr)` header.
        expr_span: Span,
        arms: Vec<CaseArm>,
    },
    Assign {
        kind: AssignmentKind,
        lhs: Expr,
        rhs: Expr,
    },
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnaryOp {
    Plus,
    Minus,
    LogicalNot,
    BitNot,
    ReduceAnd,
    ReduceOr,
    ReduceXor,
    ReduceNand,
    ReduceNor,
    ReduceXnor,
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Plus => "+",
            UnaryOp::Minus => "-",
            UnaryOp::LogicalNot => "!",
            UnaryOp::BitNot => "~",
            UnaryOp::ReduceAnd => "&",
            UnaryOp::ReduceOr => "|",
            UnaryOp::ReduceXor => "^",
            UnaryOp::ReduceNand => "~&",
            UnaryOp::ReduceNor => "~|",
            UnaryOp::ReduceXnor => "~^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Pow,
    Shl,
    Shr,
    AShl,
    AShr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    CaseEq,
    CaseNe,
    BitAnd,
    BitOr,
    BitXor,
    BitXnor,
    LogicalAnd,
    LogicalOr,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Mod => "%",
            BinaryOp::Pow => "**",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
            BinaryOp::AShl => "<<<",
            BinaryOp::AShr => ">>>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::CaseEq => "===",
            BinaryOp::CaseNe => "!==",
            BinaryOp::BitAnd => "&",
            BinaryOp::BitOr => "|",
            BinaryOp::BitXor => "^",
            BinaryOp::BitXnor => "~^",
            BinaryOp::LogicalAnd => "&&",
            BinaryOp::LogicalOr => "||",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Ident(String),
    /// Literal kept verbatim, e.g. `4'b0101`, `12`, `'0`.
    Number(String),
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
    },
    PartSelect {
        base: Box<Expr>,
        msb: Box<Expr>,
        lsb: Box<Expr>,
    },
    /// `base[start +: width]` or `base[start -: width]`.
    IndexedPartSelect {
        base: Box<Expr>,
        start: Box<Expr>,
        width: Box<Expr>,
        ascending: bool,
    },
    Concat(Vec<Expr>),
    Replicate {
        count: Box<Expr>,
        items: Vec<Expr>,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Ternary {
        cond: Box<Expr>,
        then_expr: Box<Expr>,
        else_expr: Box<Expr>,
    },
    /// `$signed(x)` / `$unsigned(x)`.
    Call {
        name: String,
        args: Vec<Expr>,
    },
}

impl Expr {
    pub fn ident(name: &str) -> Expr {
        Expr::Ident(name.to_string())
    }

    pub fn number(text: &str) -> Expr {
        Expr::Number(text.to_string())
    }

    /// Every identifier referenced anywhere in the expression.
    pub fn identifiers(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Ident(name) => {
                out.insert(name.clone());
            }
            Expr::Number(_) => {}
            Expr::Index { base, index } => {
                base.identifiers(out);
                index.identifiers(out);
            }
            Expr::PartSelect { base, msb, lsb } => {
                base.identifiers(out);
                msb.identifiers(out);
                lsb.identifiers(out);
            }
            Expr::IndexedPartSelect { base, start, width, .. } => {
                base.identifiers(out);
                start.identifiers(out);
                width.identifiers(out);
            }
            Expr::Concat(items) => items.iter().for_each(|e| e.identifiers(out)),
            Expr::Replicate { count, items } => {
                count.identifiers(out);
                items.iter().for_each(|e| e.identifiers(out));
            }
            Expr::Unary { operand, .. } => operand.identifiers(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.identifiers(out);
                rhs.identifiers(out);
            }
            Expr::Ternary {
                cond,
                then_expr,
                else_expr,
            } => {
                cond.identifiers(out);
                then_expr.identifiers(out);
                else_expr.identifiers(out);
            }
            Expr::Call { args, .. } => args.iter().for_each(|e| e.identifiers(out)),
        }
    }

    /// Signals written when this expression is used as an assignment target.
    pub fn lvalue_targets(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Ident(name) => {
                out.insert(name.clone());
            }
            Expr::Index { base, .. } | Expr::PartSelect { base, .. } | Expr::IndexedPartSelect { base, .. } => {
                base.lvalue_targets(out)
            }
            Expr::Concat(items) => items.iter().for_each(|e| e.lvalue_targets(out)),
            _ => {}
        }
    }

    /// Identifiers read by the select expressions of an assignment target,
    /// e.g. `sel` in `q[sel] <= d`.
    pub fn lvalue_index_reads(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Index { base, index } => {
                base.lvalue_index_reads(out);
                index.identifiers(out);
            }
            Expr::PartSelect { base, msb, lsb } => {
                base.lvalue_index_reads(out);
                msb.identifiers(out);
                lsb.identifiers(out);
            }
            Expr::IndexedPartSelect { base, start, width, .. } => {
                base.lvalue_index_reads(out);
                start.identifiers(out);
                width.identifiers(out);
            }
            Expr::Concat(items) => items.iter().for_each(|e| e.lvalue_index_reads(out)),
            _ => {}
        }
    }

    pub(crate) fn is_lvalue(&self) -> bool {
        match self {
            Expr::Ident(_) => true,
            Expr::Index { base, .. } | Expr::PartSelect { base, .. } | Expr::IndexedPartSelect { base, .. } => {
                base.is_lvalue()
            }
            Expr::Concat(items) => !items.is_empty() && items.iter().all(Expr::is_lvalue),
            _ => false,
        }
    }
}

/// What kind of object a name refers to inside a module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    Port(Direction),
    Net,
    Variable,
    Constant,
}

/// One parsed Verilog module.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstModule {
    pub name: String,
    pub ports: Vec<Port>,
    pub decls: Vec<Decl>,
    pub items: Vec<Item>,
    pub source: String,
}

impl AstModule {
    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn decl(&self, name: &str) -> Option<&Decl> {
        self.decls.iter().find(|d| d.name == name)
    }

    pub fn symbol(&self, name: &str) -> Option<SymbolKind> {
        if let Some(port) = self.port(name) {
            return Some(SymbolKind::Port(port.direction));
        }
        self.decl(name).map(|d| match d.kind {
            DeclKind::Wire => SymbolKind::Net,
            DeclKind::Reg | DeclKind::Integer => SymbolKind::Variable,
            DeclKind::Parameter | DeclKind::Localparam => SymbolKind::Constant,
        })
    }

    /// True for ports, nets and variables; false for parameters and unknown names.
    pub fn is_signal(&self, name: &str) -> bool {
        matches!(
            self.symbol(name),
            Some(SymbolKind::Port(_) | SymbolKind::Net | SymbolKind::Variable)
        )
    }

    /// All ports, nets and variables in declaration order, without duplicates.
    pub fn signal_names(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.ports
            .iter()
            .map(|p| p.name.clone())
            .chain(
                self.decls
                    .iter()
                    .filter(|d| !d.kind.is_constant())
                    .map(|d| d.name.clone()),
            )
            .filter(|n| seen.insert(n.clone()))
            .collect()
    }

    /// `(item index, span)` for every module item, in source order.
    pub fn source_map(&self) -> Vec<(usize, Span)> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, item)| (i, item.span()))
            .collect()
    }

    pub fn text(&self, span: Span) -> &str {
        span.slice(&self.source)
    }

    /// Copy of the module with every span zeroed and the source dropped, for
    /// structural comparison.
    pub fn without_spans(&self) -> AstModule {
        let mut m = self.clone();
        m.source.clear();
        for p in &mut m.ports {
            p.span = Span::default();
        }
        for d in &mut m.decls {
            d.span = Span::default();
        }
        for item in &mut m.items {
            match item {
                Item::Assign(a) => a.span = Span::default(),
                Item::Always(a) => {
                    a.span = Span::default();
                    a.header_span = Span::default();
                    erase_stmt(&mut a.body);
                }
            }
        }
        m
    }
}

fn erase_stmt(stmt: &mut Stmt) {
    stmt.span = Span::default();
    match &mut stmt.kind {
        StmtKind::Block { stmts, .. } => stmts.iter_mut().for_each(erase_stmt),
        StmtKind::If {
            cond_span,
            then_branch,
            else_branch,
            ..
        } => {
            *cond_span = Span::default();
            erase_stmt(then_branch);
            if let Some(e) = else_branch {
                erase_stmt(e);
            }
        }
        StmtKind::Case { expr_span, arms, .. } => {
            *expr_span = Span::default();
            for arm in arms {
                arm.label_span = Span::default();
                erase_stmt(&mut arm.body);
            }
        }
        StmtKind::Assign { .. } | StmtKind::Null => {}
    }
}

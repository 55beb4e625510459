use std::collections::BTreeSet;

use super::*;

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn parse(src: &str) -> AstModule {
    match parse_module(src) {
        Ok(m) => m,
        Err(diags) => panic!("parse failed:\n{}", format_diagnostics(&diags)),
    }
}

#[test]
fn minimal_module() {
    let m = parse("module m(input a, input b, output out); assign out = a & b; endmodule");
    assert_eq!(m.name, "m");
    let ports: Vec<_> = m.ports.iter().map(|p| (p.name.as_str(), p.direction)).collect();
    assert_eq!(
        ports,
        vec![
            ("a", Direction::Input),
            ("b", Direction::Input),
            ("out", Direction::Output)
        ]
    );
    assert_eq!(m.items.len(), 1);
    let Item::Assign(a) = &m.items[0] else {
        panic!("expected assign")
    };
    assert_eq!(
        a.assignments,
        vec![Assignment {
            lhs: Expr::ident("out"),
            rhs: Expr::Binary {
                op: BinaryOp::BitAnd,
                lhs: Box::new(Expr::ident("a")),
                rhs: Box::new(Expr::ident("b")),
            },
        }]
    );
    assert_eq!(m.text(a.span), "assign out = a & b;");
}

#[test]
fn malformed_header_is_a_syntax_error_on_line_1() {
    let diags = parse_module("module m(; endmodule").unwrap_err();
    assert!(!diags.is_empty());
    assert_eq!(diags[0].kind, DiagnosticKind::SyntaxError);
    assert_eq!(diags[0].line, 1);
}

#[test]
fn syntax_error_reports_the_offending_line() {
    let src = "module m(input a, output b);\n  wire t\n  assign b = a;\nendmodule\n";
    let diags = parse_module(src).unwrap_err();
    assert_eq!(diags[0].kind, DiagnosticKind::SyntaxError);
    assert_eq!(diags[0].line, 3);
}

#[test]
fn unsupported_constructs_are_named() {
    let cases = [
        ("module m(input a, output b); generate endgenerate endmodule", "generate"),
        ("module m(input a, output b); function f; endfunction endmodule", "function"),
        ("module m(input a, output b); task t; endtask endmodule", "task"),
        ("module m(input a, output b); sub u0(.x(a), .y(b)); endmodule", "instantiation"),
        (
            "module m(input clk, output reg [3:0] q); integer i; always @(posedge clk) for (i = 0; i < 4; i = i + 1) q[i] <= 1'b0; endmodule",
            "loop",
        ),
        ("module m(input a, output b); initial b = 0; endmodule", "initial"),
    ];
    for (src, word) in cases {
        let diags = parse_module(src).unwrap_err();
        assert_eq!(diags[0].kind, DiagnosticKind::UnsupportedConstruct, "{src}");
        assert!(diags[0].message.contains(word), "{} lacks {word}", diags[0].message);
    }
}

#[test]
fn undeclared_identifiers_are_reported() {
    let diags = parse_module("module m(input a, output b);\nassign b = a & c;\nendmodule").unwrap_err();
    assert_eq!(diags.len(), 1);
    assert_eq!(diags[0].kind, DiagnosticKind::UndeclaredIdentifier);
    assert_eq!(diags[0].line, 2);
    assert!(diags[0].message.contains("'c'"));
}

#[test]
fn duplicate_ports_and_decls_are_rejected() {
    let d = parse_module("module m(input a, input a, output b); endmodule").unwrap_err();
    assert_eq!(d[0].kind, DiagnosticKind::DuplicateDeclaration);
    let d = parse_module("module m(input a, output b); wire t; wire t; endmodule").unwrap_err();
    assert_eq!(d[0].kind, DiagnosticKind::DuplicateDeclaration);
}

#[test]
fn non_ansi_header_with_reg_redeclaration() {
    let src = "module m(clk, d, q);\n input clk;\n input [3:0] d;\n output [3:0] q;\n reg [3:0] q;\n always @(posedge clk) q <= d;\nendmodule";
    let m = parse(src);
    assert_eq!(m.ports.len(), 3);
    assert_eq!(m.port("q").unwrap().kind, DeclKind::Reg);
    assert!(m.decls.is_empty());
}

#[test]
fn non_ansi_port_without_direction_is_an_error() {
    let d = parse_module("module m(a, b); input a; endmodule").unwrap_err();
    assert!(d[0].message.contains("'b'"));
}

#[test]
fn parameters_in_header_and_body() {
    let src = "module m #(parameter W = 4, N = 2) (input [W-1:0] a, output [W-1:0] y);\n localparam [1:0] S0 = 2'd0, S1 = 2'd1;\n assign y = a + S1;\nendmodule";
    let m = parse(src);
    let names: Vec<_> = m.decls.iter().map(|d| (d.name.as_str(), d.kind)).collect();
    assert_eq!(
        names,
        vec![
            ("W", DeclKind::Parameter),
            ("N", DeclKind::Parameter),
            ("S0", DeclKind::Localparam),
            ("S1", DeclKind::Localparam)
        ]
    );
    assert!(!m.is_signal("W"));
    assert!(m.is_signal("a"));
}

#[test]
fn expression_precedence() {
    let m = parse("module m(input a, input b, input c, output y); assign y = a | b & c; endmodule");
    let Item::Assign(asg) = &m.items[0] else { panic!() };
    assert_eq!(
        asg.assignments[0].rhs,
        Expr::Binary {
            op: BinaryOp::BitOr,
            lhs: Box::new(Expr::ident("a")),
            rhs: Box::new(Expr::Binary {
                op: BinaryOp::BitAnd,
                lhs: Box::new(Expr::ident("b")),
                rhs: Box::new(Expr::ident("c")),
            }),
        }
    );
}

#[test]
fn selects_concat_replication_and_reductions() {
    let src = "module m(input [7:0] a, input [2:0] i, output [15:0] y, output p);\n assign y = {a[7:4], a[i], {3{a[0]}}, a[i +: 2], 6'b0};\n assign p = ^a ~^ ~|a;\nendmodule";
    let m = parse(src);
    let Item::Assign(asg) = &m.items[0] else { panic!() };
    let Expr::Concat(items) = &asg.assignments[0].rhs else {
        panic!()
    };
    assert_eq!(items.len(), 5);
    assert!(matches!(items[0], Expr::PartSelect { .. }));
    assert!(matches!(items[1], Expr::Index { .. }));
    assert!(matches!(items[2], Expr::Replicate { .. }));
    assert!(matches!(items[3], Expr::IndexedPartSelect { ascending: true, .. }));
    assert_eq!(items[4], Expr::number("6'b0"));
    let Item::Assign(p) = &m.items[1] else { panic!() };
    assert!(matches!(
        p.assignments[0].rhs,
        Expr::Binary {
            op: BinaryOp::BitXnor,
            ..
        }
    ));
}

#[test]
fn systemverilog_flavoured_input() {
    let src = "module TopModule(input logic clk, input logic d, output logic q);\n always_ff @(posedge clk) q <= d;\nendmodule";
    let m = parse(src);
    let Item::Always(a) = &m.items[0] else { panic!() };
    assert_eq!(a.kind, AlwaysKind::AlwaysFf);
}

const FSM: &str = "module fsm(input clk, input reset, input w, output z);
  parameter A = 1'b0, B = 1'b1;
  reg state, next_state;
  always @(posedge clk) begin
    if (reset) state <= A;
    else state <= next_state;
  end
  always @(*) begin
    case (state)
      A: next_state = w ? B : A;
      B: next_state = w ? B : A;
      default: next_state = A;
    endcase
  end
  assign z = (state == B);
endmodule
";

#[test]
fn moore_fsm_matches_hand_written_ast() {
    let m = parse(FSM).without_spans();
    let id = Expr::ident;
    let nb = |lhs: &str, rhs: Expr| Stmt {
        kind: StmtKind::Assign {
            kind: AssignmentKind::Nonblocking,
            lhs: id(lhs),
            rhs,
        },
        span: Span::default(),
    };
    let blk = |rhs: Expr| Stmt {
        kind: StmtKind::Assign {
            kind: AssignmentKind::Blocking,
            lhs: id("next_state"),
            rhs,
        },
        span: Span::default(),
    };
    let w_mux = || Expr::Ternary {
        cond: Box::new(id("w")),
        then_expr: Box::new(id("B")),
        else_expr: Box::new(id("A")),
    };
    let port = |name: &str, direction| Port {
        name: name.into(),
        direction,
        kind: DeclKind::Wire,
        signed: false,
        range: None,
        span: Span::default(),
    };
    let decl = |name: &str, kind, init: Option<Expr>| Decl {
        name: name.into(),
        kind,
        signed: false,
        range: None,
        init,
        span: Span::default(),
    };
    let expected = AstModule {
        name: "fsm".into(),
        ports: vec![
            port("clk", Direction::Input),
            port("reset", Direction::Input),
            port("w", Direction::Input),
            port("z", Direction::Output),
        ],
        decls: vec![
            decl("A", DeclKind::Parameter, Some(Expr::number("1'b0"))),
            decl("B", DeclKind::Parameter, Some(Expr::number("1'b1"))),
            decl("state", DeclKind::Reg, None),
            decl("next_state", DeclKind::Reg, None),
        ],
        items: vec![
            Item::Always(AlwaysBlock {
                kind: AlwaysKind::Always,
                sensitivity: Sensitivity::List(vec![EventExpr {
                    edge: Some(Edge::Posedge),
                    expr: id("clk"),
                }]),
                body: Stmt {
                    kind: StmtKind::Block {
                        label: None,
                        stmts: vec![Stmt {
                            kind: StmtKind::If {
                                cond: id("reset"),
                                cond_span: Span::default(),
                                then_branch: Box::new(nb("state", id("A"))),
                                else_branch: Some(Box::new(nb("state", id("next_state")))),
                            },
                            span: Span::default(),
                        }],
                    },
                    span: Span::default(),
                },
                span: Span::default(),
                header_span: Span::default(),
            }),
            Item::Always(AlwaysBlock {
                kind: AlwaysKind::Always,
                sensitivity: Sensitivity::Star,
                body: Stmt {
                    kind: StmtKind::Block {
                        label: None,
                        stmts: vec![Stmt {
                            kind: StmtKind::Case {
                                kind: CaseKind::Case,
                                expr: id("state"),
                                expr_span: Span::default(),
                                arms: vec![
                                    CaseArm {
                                        labels: vec![id("A")],
                                        body: blk(w_mux()),
                                        label_span: Span::default(),
                                    },
                                    CaseArm {
                                        labels: vec![id("B")],
                                        body: blk(w_mux()),
                                        label_span: Span::default(),
                                    },
                                    CaseArm {
                                        labels: vec![],
                                        body: blk(id("A")),
                                        label_span: Span::default(),
                                    },
                                ],
                            },
                            span: Span::default(),
                        }],
                    },
                    span: Span::default(),
                },
                span: Span::default(),
                header_span: Span::default(),
            }),
            Item::Assign(ContinuousAssign {
                assignments: vec![Assignment {
                    lhs: id("z"),
                    rhs: Expr::Binary {
                        op: BinaryOp::Eq,
                        lhs: Box::new(id("state")),
                        rhs: Box::new(id("B")),
                    },
                }],
                span: Span::default(),
            }),
        ],
        source: String::new(),
    };
    assert_eq!(m.ports, expected.ports);
    assert_eq!(m.decls, expected.decls);
    for (got, want) in m.items.iter().zip(&expected.items) {
        assert_eq!(got, want);
    }
    assert_eq!(m, expected);
}

#[test]
fn source_map_spans_are_in_bounds_and_slice_items() {
    let m = parse(FSM);
    let map = m.source_map();
    assert_eq!(map.len(), 3);
    for (_, span) in map {
        assert!(span.end <= FSM.len() && span.start < span.end);
        assert!(span.line >= 1);
    }
    assert!(m.text(m.items[0].span()).starts_with("always @(posedge clk) begin"));
    assert!(m.text(m.items[0].span()).ends_with("end"));
    assert_eq!(m.text(m.items[2].span()), "assign z = (state == B);");
}

// ---- drivers ----

#[test]
fn single_assign_drivers() {
    let m = parse("module m(input a, input b, output out); assign out = a & b; endmodule");
    let d = direct_drivers(&m, "out").unwrap();
    assert_eq!(d.drivers, set(&["a", "b"]));
    assert_eq!(d.sites.len(), 1);
    assert_eq!(d.sites[0].kind, AssignmentKind::Continuous);
}

#[test]
fn guarded_nonblocking_includes_guard_and_clock() {
    let m = parse(
        "module m(input clk, input en, input d, output reg q);\n always @(posedge clk) if (en) q <= d;\nendmodule",
    );
    let d = direct_drivers(&m, "q").unwrap();
    assert_eq!(d.drivers, set(&["clk", "en", "d"]));
    assert_eq!(d.sites.len(), 1);
    assert_eq!(d.sites[0].kind, AssignmentKind::Nonblocking);
    assert_eq!(m.text(d.sites[0].span), "q <= d;");
    let ctx: Vec<_> = d.sites[0].context.iter().map(|s| m.text(*s)).collect();
    assert_eq!(ctx, vec!["always @(posedge clk)", "if (en)"]);
}

#[test]
fn undriven_input_has_no_drivers() {
    let m = parse("module m(input a, input b, output out); assign out = a & b; endmodule");
    let d = direct_drivers(&m, "a").unwrap();
    assert!(d.drivers.is_empty());
    assert!(d.sites.is_empty());
}

#[test]
fn unknown_signal_is_an_error() {
    let m = parse("module m(input a, output out); assign out = a; endmodule");
    assert_eq!(
        direct_drivers(&m, "nope").unwrap_err().kind,
        DiagnosticKind::UnknownSignal
    );
    assert_eq!(
        backtrace(&m, &set(&["nope"]), 1).unwrap_err().kind,
        DiagnosticKind::UnknownSignal
    );
}

#[test]
fn parameters_and_literals_are_not_drivers() {
    let d = direct_drivers(&parse(FSM), "next_state").unwrap();
    assert_eq!(d.drivers, set(&["state", "w"]));
    assert_eq!(d.sites.len(), 3);
}

#[test]
fn lvalue_select_indices_are_drivers() {
    let m = parse("module m(input clk, input [1:0] sel, input d, output reg [3:0] q);\n always @(posedge clk) q[sel] <= d;\nendmodule");
    assert_eq!(direct_drivers(&m, "q").unwrap().drivers, set(&["clk", "sel", "d"]));
}

#[test]
fn wire_declaration_initialiser_is_a_continuous_driver() {
    let m = parse("module m(input a, input b, output y);\n wire t = a ^ b;\n assign y = t;\nendmodule");
    let d = direct_drivers(&m, "t").unwrap();
    assert_eq!(d.drivers, set(&["a", "b"]));
    assert_eq!(m.text(d.sites[0].span), "wire t = a ^ b;");
}

// ---- backtrace ----

/// Depth-truncated closure by plain fixpoint iteration over `direct_drivers`.
fn fixpoint_oracle(m: &AstModule, roots: &[&str], depth: usize) -> BTreeSet<(String, String)> {
    let mut frontier: BTreeSet<String> = roots.iter().map(|s| s.to_string()).collect();
    let mut seen = frontier.clone();
    let mut edges = BTreeSet::new();
    for _ in 0..depth {
        let mut next = BTreeSet::new();
        for s in &frontier {
            for d in direct_drivers(m, s).unwrap().drivers {
                edges.insert((s.clone(), d.clone()));
                if seen.insert(d.clone()) {
                    next.insert(d);
                }
            }
        }
        frontier = next;
    }
    edges
}

fn edge_pairs(g: &TraceGraph) -> BTreeSet<(String, String)> {
    g.edges.iter().map(|e| (e.from.clone(), e.to.clone())).collect()
}

#[test]
fn zero_hops_yields_roots_only() {
    let m = parse("module m(input x, input y, output z); assign z = x & y; endmodule");
    let g = backtrace(&m, &set(&["z"]), 0).unwrap();
    assert_eq!(g.roots, set(&["z"]));
    assert!(g.edges.is_empty());
    assert_eq!(g.signals(), set(&["z"]));
}

#[test]
fn chain_backtrace_matches_fixpoint() {
    let m = parse("module m(input a, output c); wire b; assign c = b; assign b = a; endmodule");
    let g = backtrace(&m, &set(&["c"]), 2).unwrap();
    let want: BTreeSet<_> = [("c", "b"), ("b", "a")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    assert_eq!(edge_pairs(&g), want);
    assert_eq!(edge_pairs(&g), fixpoint_oracle(&m, &["c"], 2));
    let full = backtrace(&m, &set(&["c"]), 99).unwrap();
    assert_eq!(edge_pairs(&full), fixpoint_oracle(&m, &["c"], 99));
    assert_eq!(full.level_of["a"], 2);
}

#[test]
fn fsm_backtrace_levels() {
    let m = parse(FSM);
    let g = backtrace(&m, &set(&["z"]), 2).unwrap();
    assert_eq!(g.level_of["state"], 1);
    assert_eq!(g.level_of["next_state"], 2);
    assert_eq!(g.signals(), set(&["z", "state", "clk", "reset", "next_state"]));
    // self-loop on state through `state <= next_state` is absent; next_state loops back
    let g3 = backtrace(&m, &set(&["z"]), 3).unwrap();
    assert!(g3.edges.contains(&TraceEdge {
        from: "next_state".into(),
        to: "state".into()
    }));
    assert_eq!(g3.level_of["w"], 3);
}

#[test]
fn site_spans_reparse_to_statements_assigning_the_signal() {
    let m = parse(FSM);
    for sig in m.signal_names() {
        for site in direct_drivers(&m, &sig).unwrap().sites {
            let frag = parse_fragment(m.text(site.span)).unwrap();
            assert!(frag.lvalues().contains(&sig), "{sig}: {}", m.text(site.span));
        }
    }
}

#[test]
fn parse_is_deterministic() {
    assert_eq!(parse(FSM), parse(FSM));
}

mod props {
    use super::*;
    use proptest::prelude::*;

    /// Random combinational netlist over n signals: signal i may read any
    /// signal j < i, so the graph is acyclic; the first two are inputs.
    fn netlist() -> impl Strategy<Value = String> {
        (3usize..12).prop_flat_map(|n| {
            proptest::collection::vec(proptest::collection::vec(any::<prop::sample::Index>(), 1..3), n).prop_map(
                move |deps| {
                    let mut src = String::from("module r(input s0, input s1, output y);\n");
                    for i in 2..n {
                        src.push_str(&format!("  wire s{i};\n"));
                    }
                    for (i, d) in deps.iter().enumerate().skip(2) {
                        let terms: Vec<String> = d.iter().map(|ix| format!("s{}", ix.index(i))).collect();
                        src.push_str(&format!("  assign s{i} = {};\n", terms.join(" ^ ")));
                    }
                    src.push_str(&format!("  assign y = s{};\nendmodule\n", n - 1));
                    src
                },
            )
        })
    }

    proptest! {
        #[test]
        fn backtrace_is_monotone_in_level(src in netlist(), k in 0usize..6) {
            let m = parse_module(&src).unwrap();
            let roots = set(&["y"]);
            let a = backtrace(&m, &roots, k).unwrap();
            let b = backtrace(&m, &roots, k + 1).unwrap();
            prop_assert!(a.signals().is_subset(&b.signals()));
            prop_assert!(a.edges.is_subset(&b.edges));
            for e in &a.edges {
                prop_assert!(a.level_of[&e.to] <= a.level_of[&e.from] + 1);
            }
        }

        #[test]
        fn backtrace_saturates_to_fixpoint(src in netlist()) {
            let m = parse_module(&src).unwrap();
            let n = m.signal_names().len();
            let g = backtrace(&m, &set(&["y"]), n).unwrap();
            prop_assert_eq!(edge_pairs(&g), fixpoint_oracle(&m, &["y"], n + 5));
        }
    }
}

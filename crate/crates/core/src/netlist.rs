//! SPICE-subset netlist front end.
//!
//! The grammar is deliberately small — exactly what a linearized amplifier
//! macromodel needs: `R`, `C`, `G` (VCCS), `I`, `V` element cards plus the
//! `.AC`, `.PZ`, and `.END` directives. One card per line, whitespace
//! separated, `*` starts a comment line, leaders are case-insensitive, and
//! the first line is always the title (the classic convention: a card on
//! line one is silently a title, so the shipped decks start with a real
//! description).
//!
//! Values take SI suffixes (`f p n u m k meg g`, case-insensitive, `m` is
//! milli and `meg` is mega). Node `0` is ground. Names and node labels are
//! canonicalized to upper case, so `r1`/`R1` collide and `out`/`OUT` are
//! the same node.
//!
//! Every parse error carries a 1-based line and column plus the offending
//! token; the parser never panics, whatever bytes it is fed.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::mna::{Circuit, Element, ElementKind};
use crate::si::parse_value;

/// 1-based source position of a card, kept for diagnostics. Spans are
/// metadata: AST equality ignores them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

/// One parsed netlist line.
#[derive(Clone, Debug, PartialEq)]
pub enum Card {
    Resistor {
        name: String,
        n1: String,
        n2: String,
        ohms: f64,
    },
    Capacitor {
        name: String,
        n1: String,
        n2: String,
        farads: f64,
    },
    /// `G<id> n+ n- nc+ nc- gm`: current `gm·(v(nc+) − v(nc-))` from `n+`
    /// to `n-` through the source.
    Vccs {
        name: String,
        node_pos: String,
        node_neg: String,
        ctrl_pos: String,
        ctrl_neg: String,
        gm: f64,
    },
    CurrentSource {
        name: String,
        node_pos: String,
        node_neg: String,
        amps: f64,
    },
    VoltageSource {
        name: String,
        node_pos: String,
        node_neg: String,
        volts: f64,
    },
    /// `.AC DEC ppd fstart fstop` — only decade sweeps exist here.
    AcSweep {
        points_per_decade: usize,
        f_start_hz: f64,
        f_stop_hz: f64,
    },
    /// `.PZ src n+ n-`: poles/zeros of the transfer from the named source
    /// to `v(n+) − v(n-)`.
    PoleZero {
        source: String,
        node_pos: String,
        node_neg: String,
    },
    End,
}

impl Card {
    /// The element name when this card instantiates one.
    pub fn element_name(&self) -> Option<&str> {
        match self {
            Card::Resistor { name, .. }
            | Card::Capacitor { name, .. }
            | Card::Vccs { name, .. }
            | Card::CurrentSource { name, .. }
            | Card::VoltageSource { name, .. } => Some(name),
            Card::AcSweep { .. } | Card::PoleZero { .. } | Card::End => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpannedCard {
    pub card: Card,
    pub span: Span,
}

/// Parsed netlist: title plus cards in source order, `.END` last.
#[derive(Clone, Debug)]
pub struct NetlistAst {
    pub title: String,
    pub cards: Vec<SpannedCard>,
}

impl PartialEq for NetlistAst {
    /// Structural equality — titles and cards, not source positions, so a
    /// pretty-printed and reparsed netlist compares equal to its original.
    fn eq(&self, other: &Self) -> bool {
        self.title == other.title
            && self.cards.len() == other.cards.len()
            && self
                .cards
                .iter()
                .zip(&other.cards)
                .all(|(a, b)| a.card == b.card)
    }
}

fn diag(line: u32, col: u32, token: &str, message: impl Into<String>) -> Error {
    Error::Netlist {
        line,
        col,
        token: token.into(),
        message: message.into(),
    }
}

/// Split a line into `(column, token)` pairs, columns 1-based in chars.
fn tokens(line: &str) -> Vec<(u32, &str)> {
    let mut out = Vec::new();
    let mut start: Option<(u32, usize)> = None;
    let mut col = 0u32;
    for (byte, ch) in line.char_indices() {
        col += 1;
        if ch.is_whitespace() {
            if let Some((c, b)) = start.take() {
                out.push((c, &line[b..byte]));
            }
        } else if start.is_none() {
            start = Some((col, byte));
        }
    }
    if let Some((c, b)) = start {
        out.push((c, &line[b..]));
    }
    out
}

/// Parse netlist text. The first line is the title; `*` lines and blank
/// lines are skipped; everything else must be a card of the subset grammar,
/// with `.END` closing the deck.
pub fn parse_netlist(text: &str) -> Result<NetlistAst> {
    let mut lines = text.lines();
    let Some(title) = lines.next() else {
        return Err(diag(1, 1, "", "empty input: the first line is the title"));
    };

    let mut cards: Vec<SpannedCard> = Vec::new();
    // Uppercased element name -> defining line, for duplicate detection.
    let mut names: HashMap<String, u32> = HashMap::new();
    let mut ended = false;
    let mut last_line = 1u32;

    for (i, raw) in lines.enumerate() {
        let line_no = (i + 2) as u32;
        last_line = line_no;
        let toks = tokens(raw);
        let Some(&(first_col, first)) = toks.first() else {
            continue;
        };
        if first.starts_with('*') {
            continue;
        }
        if ended {
            return Err(diag(line_no, first_col, first, "card after .END"));
        }
        let card = parse_card(line_no, &toks)?;
        if let Some(name) = card.element_name() {
            if let Some(prev) = names.insert(name.to_string(), line_no) {
                return Err(diag(
                    line_no,
                    first_col,
                    first,
                    format!("duplicate element name `{name}` (first defined on line {prev})"),
                ));
            }
        }
        ended = matches!(card, Card::End);
        cards.push(SpannedCard {
            card,
            span: Span {
                line: line_no,
                col: first_col,
            },
        });
    }

    if !ended {
        return Err(diag(last_line, 1, "", "missing .END"));
    }
    Ok(NetlistAst {
        title: title.to_string(),
        cards,
    })
}

/// Exactly `want` tokens, or a diagnostic pointing at the gap or the
/// first excess token.
fn arity(line: u32, toks: &[(u32, &str)], want: usize, shape: &str) -> Result<()> {
    if toks.len() < want {
        let (col, tok) = toks[toks.len() - 1];
        return Err(diag(
            line,
            col + tok.chars().count() as u32,
            "",
            format!("incomplete card: expected `{shape}`"),
        ));
    }
    if toks.len() > want {
        let (col, tok) = toks[want];
        return Err(diag(
            line,
            col,
            tok,
            format!("unexpected extra token: expected `{shape}`"),
        ));
    }
    Ok(())
}

fn value(line: u32, tok: (u32, &str), what: &str) -> Result<f64> {
    parse_value(tok.1).map_err(|e| diag(line, tok.0, tok.1, format!("bad {what}: {e}")))
}

fn positive(line: u32, tok: (u32, &str), what: &str) -> Result<f64> {
    let v = value(line, tok, what)?;
    if v <= 0.0 {
        return Err(diag(line, tok.0, tok.1, format!("{what} must be positive")));
    }
    Ok(v)
}

fn parse_card(line: u32, toks: &[(u32, &str)]) -> Result<Card> {
    let (col0, leader) = toks[0];
    let upper = leader.to_ascii_uppercase();
    let node = |i: usize| toks[i].1.to_ascii_uppercase();

    if let Some(directive) = upper.strip_prefix('.') {
        return match directive {
            "AC" => {
                arity(line, toks, 5, ".AC DEC ppd fstart fstop")?;
                if !toks[1].1.eq_ignore_ascii_case("DEC") {
                    return Err(diag(
                        line,
                        toks[1].0,
                        toks[1].1,
                        "only DEC sweeps are supported",
                    ));
                }
                let ppd = toks[2].1.parse::<usize>().ok().filter(|&p| p >= 1).ok_or_else(
                    || {
                        diag(
                            line,
                            toks[2].0,
                            toks[2].1,
                            "points per decade must be a positive integer",
                        )
                    },
                )?;
                let f_start = positive(line, toks[3], "start frequency")?;
                let f_stop = positive(line, toks[4], "stop frequency")?;
                if f_stop < f_start {
                    return Err(diag(
                        line,
                        toks[4].0,
                        toks[4].1,
                        "stop frequency below start frequency",
                    ));
                }
                Ok(Card::AcSweep {
                    points_per_decade: ppd,
                    f_start_hz: f_start,
                    f_stop_hz: f_stop,
                })
            }
            "PZ" => {
                arity(line, toks, 4, ".PZ source n+ n-")?;
                Ok(Card::PoleZero {
                    source: node(1),
                    node_pos: node(2),
                    node_neg: node(3),
                })
            }
            "END" => {
                arity(line, toks, 1, ".END")?;
                Ok(Card::End)
            }
            _ => Err(diag(
                line,
                col0,
                leader,
                "unknown directive (this subset has .AC, .PZ, and .END)",
            )),
        };
    }

    match upper.as_bytes().first() {
        Some(b'R') => {
            arity(line, toks, 4, "R<id> n1 n2 ohms")?;
            Ok(Card::Resistor {
                name: upper,
                n1: node(1),
                n2: node(2),
                ohms: positive(line, toks[3], "resistance")?,
            })
        }
        Some(b'C') => {
            arity(line, toks, 4, "C<id> n1 n2 farads")?;
            Ok(Card::Capacitor {
                name: upper,
                n1: node(1),
                n2: node(2),
                farads: positive(line, toks[3], "capacitance")?,
            })
        }
        Some(b'G') => {
            arity(line, toks, 6, "G<id> n+ n- nc+ nc- gm")?;
            Ok(Card::Vccs {
                name: upper,
                node_pos: node(1),
                node_neg: node(2),
                ctrl_pos: node(3),
                ctrl_neg: node(4),
                gm: value(line, toks[5], "transconductance")?,
            })
        }
        Some(b'I') => {
            // Keyword first: `I1 1 0 0.5` should say "expected AC", not
            // complain about arity.
            if toks.len() >= 4 {
                require_ac_keyword(line, toks[3])?;
            }
            arity(line, toks, 5, "I<id> n+ n- AC amps")?;
            Ok(Card::CurrentSource {
                name: upper,
                node_pos: node(1),
                node_neg: node(2),
                amps: value(line, toks[4], "current magnitude")?,
            })
        }
        Some(b'V') => {
            if toks.len() >= 4 {
                require_ac_keyword(line, toks[3])?;
            }
            arity(line, toks, 5, "V<id> n+ n- AC volts")?;
            Ok(Card::VoltageSource {
                name: upper,
                node_pos: node(1),
                node_neg: node(2),
                volts: value(line, toks[4], "voltage magnitude")?,
            })
        }
        _ => Err(diag(
            line,
            col0,
            leader,
            "unknown card leader (expected R, C, G, I, V, or a . directive)",
        )),
    }
}

fn require_ac_keyword(line: u32, tok: (u32, &str)) -> Result<()> {
    if !tok.1.eq_ignore_ascii_case("AC") {
        return Err(diag(
            line,
            tok.0,
            tok.1,
            "independent sources are AC-only here: expected the literal `AC`",
        ));
    }
    Ok(())
}

/// Build the circuit a netlist describes. Nodes are numbered densely in
/// first-appearance order (reading the cards top to bottom, left to right),
/// so elaboration is deterministic. Analysis directives are carried by the
/// AST, not the circuit.
///
/// Returns the circuit together with advisory warnings — currently one per
/// non-ground node touched by exactly one element terminal, which almost
/// always means a typo in a node label.
pub fn elaborate(ast: &NetlistAst) -> Result<(Circuit, Vec<String>)> {
    let mut circuit = Circuit::new();
    let mut touches: HashMap<String, u32> = HashMap::new();
    let mut touch_order: Vec<String> = Vec::new();

    for spanned in &ast.cards {
        let span = spanned.span;
        let mut touch = |n: &str| {
            *touches.entry(n.to_string()).or_insert_with(|| {
                touch_order.push(n.to_string());
                0
            }) += 1;
        };
        let (name, a, b, kind) = match &spanned.card {
            Card::Resistor { name, n1, n2, ohms } => {
                (name, n1, n2, ElementKind::Resistor { ohms: *ohms })
            }
            Card::Capacitor {
                name,
                n1,
                n2,
                farads,
            } => (name, n1, n2, ElementKind::Capacitor { farads: *farads }),
            Card::Vccs {
                name,
                node_pos,
                node_neg,
                ctrl_pos,
                ctrl_neg,
                gm,
            } => {
                touch(ctrl_pos);
                touch(ctrl_neg);
                let cp = circuit.node(ctrl_pos);
                let cn = circuit.node(ctrl_neg);
                (
                    name,
                    node_pos,
                    node_neg,
                    ElementKind::Vccs {
                        gm: *gm,
                        ctrl_pos: cp,
                        ctrl_neg: cn,
                    },
                )
            }
            Card::CurrentSource {
                name,
                node_pos,
                node_neg,
                amps,
            } => (
                name,
                node_pos,
                node_neg,
                ElementKind::CurrentSource { amps: *amps },
            ),
            Card::VoltageSource {
                name,
                node_pos,
                node_neg,
                volts,
            } => (
                name,
                node_pos,
                node_neg,
                ElementKind::VoltageSource { volts: *volts },
            ),
            Card::AcSweep { .. } | Card::PoleZero { .. } | Card::End => continue,
        };
        touch(a);
        touch(b);
        let a = circuit.node(a);
        let b = circuit.node(b);
        circuit
            .add(Element {
                name: name.clone(),
                a,
                b,
                kind,
            })
            .map_err(|e| diag(span.line, span.col, name, e.to_string()))?;
    }

    if circuit.elements().is_empty() {
        let span = ast
            .cards
            .last()
            .map_or(Span { line: 1, col: 1 }, |c| c.span);
        return Err(diag(
            span.line,
            span.col,
            "",
            "empty netlist: no elements between the title and .END",
        ));
    }
    if !touches.contains_key("0") {
        let span = ast.cards[0].span;
        return Err(diag(
            span.line,
            span.col,
            "",
            "no connection to ground (node 0)",
        ));
    }

    let mut warnings = Vec::new();
    // First-appearance order for the warnings too, not hash order.
    for name in &touch_order {
        if name != "0" && touches[name] == 1 {
            warnings.push(format!("node {name} has a single connection"));
        }
    }
    Ok((circuit, warnings))
}

impl fmt::Display for Card {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Card::Resistor { name, n1, n2, ohms } => write!(f, "{name} {n1} {n2} {ohms}"),
            Card::Capacitor {
                name,
                n1,
                n2,
                farads,
            } => write!(f, "{name} {n1} {n2} {farads}"),
            Card::Vccs {
                name,
                node_pos,
                node_neg,
                ctrl_pos,
                ctrl_neg,
                gm,
            } => write!(f, "{name} {node_pos} {node_neg} {ctrl_pos} {ctrl_neg} {gm}"),
            Card::CurrentSource {
                name,
                node_pos,
                node_neg,
                amps,
            } => write!(f, "{name} {node_pos} {node_neg} AC {amps}"),
            Card::VoltageSource {
                name,
                node_pos,
                node_neg,
                volts,
            } => write!(f, "{name} {node_pos} {node_neg} AC {volts}"),
            Card::AcSweep {
                points_per_decade,
                f_start_hz,
                f_stop_hz,
            } => write!(f, ".AC DEC {points_per_decade} {f_start_hz} {f_stop_hz}"),
            Card::PoleZero {
                source,
                node_pos,
                node_neg,
            } => write!(f, ".PZ {source} {node_pos} {node_neg}"),
            Card::End => write!(f, ".END"),
        }
    }
}

impl fmt::Display for NetlistAst {
    /// Canonical text form. Reparsing the output yields an equal AST —
    /// plain `{}` float formatting round-trips every f64 exactly.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.title)?;
        for c in &self.cards {
            writeln!(f, "{}", c.card)?;
        }
        Ok(())
    }
}

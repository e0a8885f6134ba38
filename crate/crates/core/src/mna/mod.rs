//! Modified nodal analysis for linear small-signal networks.
//!
//! A [`Circuit`] is a bag of two-terminal and controlled elements over named
//! nodes; [`stamp`] assembles the real matrix pair `(G, C)` plus excitation
//! vector `b` such that `(G + jωC)·x = b` at each analysis frequency.
//! Voltage sources get the classic branch-current row extension, so the
//! unknown vector is all non-ground node voltages followed by one branch
//! current per voltage source.
//!
//! Everything here is dense and deterministic: node counts in this workbench
//! are in the single digits to dozens, so an LU with a fixed pivot rule beats
//! any sparse machinery on both simplicity and reproducibility.

mod lu;
mod pz;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par;

/// Handle to a node of one particular [`Circuit`]. Index 0 is ground.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct NodeId(usize);

impl NodeId {
    pub fn is_ground(self) -> bool {
        self.0 == 0
    }

    /// Dense index into the circuit's node table; ground is 0.
    pub fn index(self) -> usize {
        self.0
    }
}

/// Element kinds supported by the stamper.
///
/// `CrossCapacitor` is an ordinary capacitor value whose off-diagonal
/// stamps carry a *positive* sign. It realizes, inside a differential half
/// circuit, a compensation capacitor that physically connects this half's
/// internal node to the *other* half's output: under differential
/// excitation the far side swings opposite, so the branch current is
/// `sC·(v_a + v_b)` rather than `sC·(v_a − v_b)`. That folded polarity is
/// exactly the positive capacitive feedback this amplifier relies on.
#[derive(Clone, Debug, PartialEq)]
pub enum ElementKind {
    /// Resistance in ohms, > 0.
    Resistor { ohms: f64 },
    /// Capacitance in farads, > 0.
    Capacitor { farads: f64 },
    /// Positive-feedback folded capacitor, farads > 0 (see type docs).
    CrossCapacitor { farads: f64 },
    /// Voltage-controlled current source: `gm·(v(ctrl_pos) − v(ctrl_neg))`
    /// flows out of node `a`, through the source, back in at node `b`.
    /// Negative transconductance is legal.
    Vccs {
        gm: f64,
        ctrl_pos: NodeId,
        ctrl_neg: NodeId,
    },
    /// Independent AC current source, `amps` flowing from `a` to `b`.
    CurrentSource { amps: f64 },
    /// Independent AC voltage source, `v(a) − v(b) = volts`.
    VoltageSource { volts: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub name: String,
    pub a: NodeId,
    pub b: NodeId,
    pub kind: ElementKind,
}

/// A small-signal circuit: named nodes (ground is always node 0, named "0")
/// plus validated elements.
#[derive(Clone, Debug, Default)]
pub struct Circuit {
    node_names: Vec<String>,
    node_lookup: HashMap<String, usize>,
    elements: Vec<Element>,
}

impl Circuit {
    pub fn new() -> Self {
        let mut c = Circuit {
            node_names: Vec::new(),
            node_lookup: HashMap::new(),
            elements: Vec::new(),
        };
        c.node_names.push("0".to_string());
        c.node_lookup.insert("0".to_string(), 0);
        c
    }

    pub fn ground(&self) -> NodeId {
        NodeId(0)
    }

    /// Get or create the node with this name. Numbering is dense and in
    /// first-appearance order, which keeps stamping deterministic.
    pub fn node(&mut self, name: &str) -> NodeId {
        if let Some(&i) = self.node_lookup.get(name) {
            return NodeId(i);
        }
        let i = self.node_names.len();
        self.node_names.push(name.to_string());
        self.node_lookup.insert(name.to_string(), i);
        NodeId(i)
    }

    pub fn find_node(&self, name: &str) -> Option<NodeId> {
        self.node_lookup.get(name).copied().map(NodeId)
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.node_names[id.0]
    }

    /// Total node count including ground.
    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    /// All node handles in dense first-appearance order, ground first.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_names.len()).map(NodeId)
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    fn check_node(&self, element: &str, id: NodeId) -> Result<()> {
        if id.0 >= self.node_names.len() {
            return Err(Error::BadElement {
                element: element.to_string(),
                message: format!("references unknown node index {}", id.0),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, element: Element) -> Result<()> {
        let name = element.name.clone();
        if name.is_empty() {
            return Err(Error::BadElement {
                element: "<unnamed>".into(),
                message: "element name must not be empty".into(),
            });
        }
        if self
            .elements
            .iter()
            .any(|e| e.name.eq_ignore_ascii_case(&name))
        {
            return Err(Error::BadElement {
                element: name,
                message: "duplicate element name".into(),
            });
        }
        self.check_node(&name, element.a)?;
        self.check_node(&name, element.b)?;
        let positive = |what: &str, v: f64| -> Result<()> {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::BadElement {
                    element: name.clone(),
                    message: format!("{what} must be finite and > 0, got {v}"),
                });
            }
            Ok(())
        };
        match element.kind {
            ElementKind::Resistor { ohms } => positive("resistance", ohms)?,
            ElementKind::Capacitor { farads } | ElementKind::CrossCapacitor { farads } => {
                positive("capacitance", farads)?
            }
            ElementKind::Vccs {
                gm,
                ctrl_pos,
                ctrl_neg,
            } => {
                self.check_node(&name, ctrl_pos)?;
                self.check_node(&name, ctrl_neg)?;
                if !gm.is_finite() {
                    return Err(Error::BadElement {
                        element: name,
                        message: format!("transconductance must be finite, got {gm}"),
                    });
                }
            }
            ElementKind::CurrentSource { amps } => {
                if !amps.is_finite() {
                    return Err(Error::BadElement {
                        element: name,
                        message: format!("source magnitude must be finite, got {amps}"),
                    });
                }
            }
            ElementKind::VoltageSource { volts } => {
                if !volts.is_finite() {
                    return Err(Error::BadElement {
                        element: name,
                        message: format!("source magnitude must be finite, got {volts}"),
                    });
                }
            }
        }
        self.elements.push(element);
        Ok(())
    }
}

/// Assembled MNA system. Unknowns are node voltages 1..n-1 in node order,
/// then one branch current per voltage source in element order.
pub struct Stamped {
    pub g: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Human-readable label per unknown, used in singular-pivot diagnostics.
    pub labels: Vec<String>,
    branch_rows: Vec<(String, usize)>,
}

impl Stamped {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// Unknown-vector row of a voltage source's branch current, if any.
    pub fn branch_row(&self, source: &str) -> Option<usize> {
        self.branch_rows
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(source))
            .map(|&(_, r)| r)
    }
}

/// Assemble `(G, C, b)` for the circuit. Ground is eliminated; stamps to a
/// ground row/column are dropped.
pub fn stamp(circuit: &Circuit) -> Stamped {
    let n_nodes = circuit.node_count();
    let vsrcs: Vec<&Element> = circuit
        .elements
        .iter()
        .filter(|e| matches!(e.kind, ElementKind::VoltageSource { .. }))
        .collect();
    let dim = n_nodes - 1 + vsrcs.len();
    let mut g = DMatrix::zeros(dim, dim);
    let mut c = DMatrix::zeros(dim, dim);
    let mut b = DVector::zeros(dim);

    // Node k (1-based) owns unknown k-1; ground contributions vanish.
    let add = |m: &mut DMatrix<f64>, row: NodeId, col: NodeId, v: f64| {
        if row.0 > 0 && col.0 > 0 {
            m[(row.0 - 1, col.0 - 1)] += v;
        }
    };

    let mut branch_rows = Vec::new();
    let mut next_branch = n_nodes - 1;
    for e in &circuit.elements {
        match e.kind {
            ElementKind::Resistor { ohms } => {
                let y = 1.0 / ohms;
                add(&mut g, e.a, e.a, y);
                add(&mut g, e.b, e.b, y);
                add(&mut g, e.a, e.b, -y);
                add(&mut g, e.b, e.a, -y);
            }
            ElementKind::Capacitor { farads } => {
                add(&mut c, e.a, e.a, farads);
                add(&mut c, e.b, e.b, farads);
                add(&mut c, e.a, e.b, -farads);
                add(&mut c, e.b, e.a, -farads);
            }
            ElementKind::CrossCapacitor { farads } => {
                // Folded differential polarity: the branch current seen at
                // each terminal is sC·(v_a + v_b), hence +C off-diagonals.
                add(&mut c, e.a, e.a, farads);
                add(&mut c, e.b, e.b, farads);
                add(&mut c, e.a, e.b, farads);
                add(&mut c, e.b, e.a, farads);
            }
            ElementKind::Vccs {
                gm,
                ctrl_pos,
                ctrl_neg,
            } => {
                add(&mut g, e.a, ctrl_pos, gm);
                add(&mut g, e.a, ctrl_neg, -gm);
                add(&mut g, e.b, ctrl_pos, -gm);
                add(&mut g, e.b, ctrl_neg, gm);
            }
            ElementKind::CurrentSource { amps } => {
                // Source current leaves node a, re-enters at node b.
                if e.a.0 > 0 {
                    b[e.a.0 - 1] -= amps;
                }
                if e.b.0 > 0 {
                    b[e.b.0 - 1] += amps;
                }
            }
            ElementKind::VoltageSource { volts } => {
                let row = next_branch;
                next_branch += 1;
                if e.a.0 > 0 {
                    g[(e.a.0 - 1, row)] += 1.0;
                    g[(row, e.a.0 - 1)] += 1.0;
                }
                if e.b.0 > 0 {
                    g[(e.b.0 - 1, row)] -= 1.0;
                    g[(row, e.b.0 - 1)] -= 1.0;
                }
                b[row] = volts;
                branch_rows.push((e.name.clone(), row));
            }
        }
    }

    let mut labels: Vec<String> = (1..n_nodes)
        .map(|k| format!("V({})", circuit.node_names[k]))
        .collect();
    for (name, _) in &branch_rows {
        labels.push(format!("I({name})"));
    }

    Stamped {
        g,
        c,
        b,
        labels,
        branch_rows,
    }
}

/// One AC operating point. Voltages are indexed by [`NodeId`]; the ground
/// entry is pinned to zero.
#[derive(Debug)]
pub struct AcSolution {
    pub omega: f64,
    pub node_voltages: Vec<Complex64>,
    branch_currents: Vec<(String, Complex64)>,
    /// `‖(G + jωC)x − b‖ / ‖b‖`, recorded so tests can assert the KCL
    /// residual bound on every solve.
    pub residual: f64,
}

impl AcSolution {
    pub fn voltage(&self, node: NodeId) -> Complex64 {
        self.node_voltages[node.0]
    }

    /// Branch current through a voltage source, positive flowing from its
    /// `a` terminal through the source to `b`.
    pub fn source_current(&self, source: &str) -> Option<Complex64> {
        self.branch_currents
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(source))
            .map(|&(_, i)| i)
    }
}

fn assemble(stamped: &Stamped, omega: f64) -> (DMatrix<Complex64>, DVector<Complex64>) {
    let dim = stamped.dim();
    let mut a = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            a[(i, j)] = Complex64::new(stamped.g[(i, j)], omega * stamped.c[(i, j)]);
        }
    }
    let rhs = stamped.b.map(|v| Complex64::new(v, 0.0));
    (a, rhs)
}

fn solve_stamped(stamped: &Stamped, omega: f64) -> Result<(DVector<Complex64>, f64)> {
    let (a, rhs) = assemble(stamped, omega);
    let x = lu::solve(a.clone(), rhs.clone(), &stamped.labels)
        .map_err(|e| Error::AtOmega {
            omega,
            source: Box::new(e),
        })?;
    let b_norm = rhs.norm();
    let residual = if b_norm > 0.0 {
        (a * &x - rhs).norm() / b_norm
    } else {
        0.0
    };
    Ok((x, residual))
}

/// Solve the circuit at a single angular frequency.
pub fn solve_ac(circuit: &Circuit, omega: f64) -> Result<AcSolution> {
    let stamped = stamp(circuit);
    let (x, residual) = solve_stamped(&stamped, omega)?;
    Ok(package(circuit, &stamped, omega, x, residual))
}

fn package(
    circuit: &Circuit,
    stamped: &Stamped,
    omega: f64,
    x: DVector<Complex64>,
    residual: f64,
) -> AcSolution {
    let mut node_voltages = vec![Complex64::new(0.0, 0.0); circuit.node_count()];
    for k in 1..circuit.node_count() {
        node_voltages[k] = x[k - 1];
    }
    let branch_currents = stamped
        .branch_rows
        .iter()
        .map(|(name, row)| (name.clone(), x[*row]))
        .collect();
    AcSolution {
        omega,
        node_voltages,
        branch_currents,
        residual,
    }
}

/// Evaluate `H(jω) = (v(out_pos) − v(out_neg)) / source` over a batch of
/// frequencies. The system is stamped once; the per-frequency solves are
/// independent and run through the data-parallel map.
pub fn transfer(
    circuit: &Circuit,
    input: &str,
    output: (NodeId, NodeId),
    omegas: &[f64],
) -> Result<Vec<Complex64>> {
    let source = circuit
        .elements
        .iter()
        .find(|e| {
            e.name.eq_ignore_ascii_case(input)
                && matches!(
                    e.kind,
                    ElementKind::VoltageSource { .. } | ElementKind::CurrentSource { .. }
                )
        })
        .ok_or_else(|| Error::InvalidArgument(format!("no source named `{input}`")))?;
    let magnitude = match source.kind {
        ElementKind::VoltageSource { volts } => volts,
        ElementKind::CurrentSource { amps } => amps,
        _ => unreachable!(),
    };
    if magnitude == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "source `{input}` has zero AC magnitude"
        )));
    }
    circuit.check_node("transfer output", output.0)?;
    circuit.check_node("transfer output", output.1)?;

    let stamped = stamp(circuit);
    let (p, n) = (output.0 .0, output.1 .0);
    let results = par::map_vec(omegas.to_vec(), |omega| {
        solve_stamped(&stamped, omega).map(|(x, _)| {
            let vp = if p > 0 { x[p - 1] } else { Complex64::ZERO };
            let vn = if n > 0 { x[n - 1] } else { Complex64::ZERO };
            (vp - vn) / magnitude
        })
    });
    results.into_iter().collect()
}

/// Natural frequencies of the network: finite generalized eigenvalues `s`
/// of `(G + sC)x = 0`, ascending by magnitude. Structural infinities (zero
/// rows of `C`) are filtered out by the pencil solver.
pub fn poles_numeric(circuit: &Circuit) -> Result<Vec<Complex64>> {
    let stamped = stamp(circuit);
    if stamped.c.iter().all(|&v| v == 0.0) {
        return Err(Error::NoDynamics);
    }
    pz::generalized_eigs(&stamped.g, &stamped.c, "pole pencil")
}

/// Transmission zeros of the `input → output` path, via the bordered system
/// pencil: `s` is a zero iff `[[G + sC, b_in], [cᵀ_out, 0]]` is singular.
///
/// Coincident pole/zero pairs (uncontrollable or unobservable modes) are
/// reported verbatim — the caller sees both lists and can match them up;
/// nothing is cancelled silently.
pub fn zeros_numeric(
    circuit: &Circuit,
    input: &str,
    output: (NodeId, NodeId),
) -> Result<Vec<Complex64>> {
    let source = circuit
        .elements
        .iter()
        .find(|e| {
            e.name.eq_ignore_ascii_case(input)
                && matches!(
                    e.kind,
                    ElementKind::VoltageSource { .. } | ElementKind::CurrentSource { .. }
                )
        })
        .ok_or_else(|| Error::InvalidArgument(format!("no source named `{input}`")))?;
    circuit.check_node("zeros output", output.0)?;
    circuit.check_node("zeros output", output.1)?;

    let stamped = stamp(circuit);
    let dim = stamped.dim();

    // Unit excitation column for this one source only; other sources in the
    // circuit stay in G (voltage sources are AC-shorted) but do not excite.
    let mut b_in = DVector::<f64>::zeros(dim);
    match source.kind {
        ElementKind::VoltageSource { .. } => {
            let row = stamped
                .branch_row(&source.name)
                .expect("voltage source has a branch row");
            b_in[row] = 1.0;
        }
        ElementKind::CurrentSource { .. } => {
            if source.a.0 > 0 {
                b_in[source.a.0 - 1] -= 1.0;
            }
            if source.b.0 > 0 {
                b_in[source.b.0 - 1] += 1.0;
            }
        }
        _ => unreachable!(),
    }

    let mut c_out = DVector::<f64>::zeros(dim);
    if output.0 .0 > 0 {
        c_out[output.0 .0 - 1] += 1.0;
    }
    if output.1 .0 > 0 {
        c_out[output.1 .0 - 1] -= 1.0;
    }

    let mut a_z = DMatrix::<f64>::zeros(dim + 1, dim + 1);
    let mut b_z = DMatrix::<f64>::zeros(dim + 1, dim + 1);
    a_z.view_mut((0, 0), (dim, dim)).copy_from(&stamped.g);
    b_z.view_mut((0, 0), (dim, dim)).copy_from(&stamped.c);
    for i in 0..dim {
        a_z[(i, dim)] = b_in[i];
        a_z[(dim, i)] = c_out[i];
    }

    pz::generalized_eigs(&a_z, &b_z, "zero pencil")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn resistor(name: &str, a: NodeId, b: NodeId, ohms: f64) -> Element {
        Element {
            name: name.into(),
            a,
            b,
            kind: ElementKind::Resistor { ohms },
        }
    }

    fn capacitor(name: &str, a: NodeId, b: NodeId, farads: f64) -> Element {
        Element {
            name: name.into(),
            a,
            b,
            kind: ElementKind::Capacitor { farads },
        }
    }

    fn vsource(name: &str, a: NodeId, b: NodeId, volts: f64) -> Element {
        Element {
            name: name.into(),
            a,
            b,
            kind: ElementKind::VoltageSource { volts },
        }
    }

    /// Series R-R divider from a 1 V source: the midpoint sits at 0.5 V.
    #[test]
    fn symmetric_divider() {
        let mut c = Circuit::new();
        let vin = c.node("in");
        let mid = c.node("mid");
        let gnd = c.ground();
        c.add(vsource("v1", vin, gnd, 1.0)).unwrap();
        c.add(resistor("r1", vin, mid, 1e3)).unwrap();
        c.add(resistor("r2", mid, gnd, 1e3)).unwrap();
        let sol = solve_ac(&c, 0.0).unwrap();
        assert_relative_eq!(sol.voltage(mid).re, 0.5, max_relative = 1e-12);
        assert_abs_diff_eq!(sol.voltage(mid).im, 0.0);
        assert!(sol.residual <= 1e-9);
    }

    /// A 1 F capacitor straight across a 1 V source at ω = 1 rad/s draws
    /// |I| = |jωC·V| = 1 A through the source branch.
    #[test]
    fn capacitor_branch_current() {
        let mut c = Circuit::new();
        let top = c.node("top");
        let gnd = c.ground();
        c.add(vsource("v1", top, gnd, 1.0)).unwrap();
        c.add(capacitor("c1", top, gnd, 1.0)).unwrap();
        let sol = solve_ac(&c, 1.0).unwrap();
        let i = sol.source_current("V1").unwrap();
        assert_relative_eq!(i.norm(), 1.0, max_relative = 1e-12);
    }

    fn rc_lowpass() -> (Circuit, NodeId) {
        let mut c = Circuit::new();
        let vin = c.node("in");
        let out = c.node("out");
        let gnd = c.ground();
        c.add(vsource("vin", vin, gnd, 1.0)).unwrap();
        c.add(resistor("r", vin, out, 1e3)).unwrap();
        c.add(capacitor("c", out, gnd, 1e-6)).unwrap();
        (c, out)
    }

    #[test]
    fn rc_lowpass_corner() {
        let (c, out) = rc_lowpass();
        // At ω = 1/RC the magnitude is 1/√2 and the phase is -45°.
        let sol = solve_ac(&c, 1000.0).unwrap();
        let h = sol.voltage(out);
        assert_relative_eq!(h.norm(), 1.0 / 2f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(h.arg().to_degrees(), -45.0, max_relative = 1e-12);
        // Near DC it passes straight through.
        let dc = solve_ac(&c, 1e-3).unwrap();
        assert_relative_eq!(dc.voltage(out).norm(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn transfer_identity_on_driven_node() {
        let mut c = Circuit::new();
        let vin = c.node("in");
        let gnd = c.ground();
        c.add(vsource("vin", vin, gnd, 1.0)).unwrap();
        c.add(resistor("rl", vin, gnd, 50.0)).unwrap();
        let omegas = [1.0, 1e3, 1e6, 1e9];
        let h = transfer(&c, "vin", (vin, gnd), &omegas).unwrap();
        for v in h {
            assert_relative_eq!(v.re, 1.0, max_relative = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0);
        }
    }

    /// Pin down the controlled-source orientation: current
    /// `gm·(v(ctrl+) − v(ctrl−))` leaves `a` and re-enters at `b`.
    #[test]
    fn vccs_follower_and_inverter_signs() {
        // Follower: gm·(v_in − v_out) pushed *into* the output node gives
        // v_out = gm·R/(1 + gm·R)·v_in, just shy of unity for large gm·R.
        let mut c = Circuit::new();
        let vin = c.node("in");
        let out = c.node("out");
        let gnd = c.ground();
        c.add(vsource("vin", vin, gnd, 1.0)).unwrap();
        c.add(Element {
            name: "gbuf".into(),
            a: gnd,
            b: out,
            kind: ElementKind::Vccs {
                gm: 1.0,
                ctrl_pos: vin,
                ctrl_neg: out,
            },
        })
        .unwrap();
        c.add(resistor("rl", out, gnd, 1e6)).unwrap();
        let sol = solve_ac(&c, 0.0).unwrap();
        assert_relative_eq!(sol.voltage(out).re, 1e6 / (1e6 + 1.0), max_relative = 1e-12);

        // Inverter: gm·v_in pulled *out of* the output node gives
        // v_out = −gm·R·v_in.
        let mut c = Circuit::new();
        let vin = c.node("in");
        let out = c.node("out");
        let gnd = c.ground();
        c.add(vsource("vin", vin, gnd, 1.0)).unwrap();
        c.add(Element {
            name: "gstage".into(),
            a: out,
            b: gnd,
            kind: ElementKind::Vccs {
                gm: 2e-3,
                ctrl_pos: vin,
                ctrl_neg: gnd,
            },
        })
        .unwrap();
        c.add(resistor("rl", out, gnd, 5e3)).unwrap();
        let sol = solve_ac(&c, 0.0).unwrap();
        assert_relative_eq!(sol.voltage(out).re, -10.0, max_relative = 1e-12);
    }

    #[test]
    fn floating_subgraph_is_diagnosed() {
        let mut c = Circuit::new();
        let vin = c.node("in");
        let island = c.node("island");
        let gnd = c.ground();
        c.add(vsource("v1", vin, gnd, 1.0)).unwrap();
        // The capacitor is the only tie between `island` and the rest, so at
        // DC the island row of G is all zeros.
        c.add(capacitor("c1", vin, island, 1e-9)).unwrap();
        let err = solve_ac(&c, 0.0).unwrap_err();
        match err {
            Error::AtOmega { source, .. } => match *source {
                Error::SingularSystem { unknown, .. } => {
                    assert_eq!(unknown, "V(island)");
                }
                other => panic!("expected singular-system error, got {other}"),
            },
            other => panic!("expected per-frequency tag, got {other}"),
        }
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut c = Circuit::new();
        let a = c.node("a");
        let gnd = c.ground();
        c.add(resistor("R1", a, gnd, 1.0)).unwrap();
        let err = c.add(resistor("r1", a, gnd, 2.0)).unwrap_err();
        assert!(matches!(err, Error::BadElement { .. }));
    }

    #[test]
    fn rc_pole_and_decoupled_sections() {
        let (c, _) = rc_lowpass();
        let poles = poles_numeric(&c).unwrap();
        assert_eq!(poles.len(), 1);
        assert_relative_eq!(poles[0].re, -1000.0, max_relative = 1e-9);
        assert_abs_diff_eq!(poles[0].im, 0.0, epsilon = 1e-6);

        // Two RC sections isolated from each other behave as a product of
        // first-order factors: poles at -1/R1C1 and -1/R2C2.
        let mut c2 = Circuit::new();
        let vin = c2.node("in");
        let o1 = c2.node("o1");
        let o2 = c2.node("o2");
        let gnd = c2.ground();
        c2.add(vsource("vin", vin, gnd, 1.0)).unwrap();
        c2.add(resistor("ra", vin, o1, 1e3)).unwrap();
        c2.add(capacitor("ca", o1, gnd, 1e-6)).unwrap();
        c2.add(resistor("rb", vin, o2, 1e3)).unwrap();
        c2.add(capacitor("cb", o2, gnd, 1e-9)).unwrap();
        let poles = poles_numeric(&c2).unwrap();
        assert_eq!(poles.len(), 2);
        assert_relative_eq!(poles[0].re, -1e3, max_relative = 1e-8);
        assert_relative_eq!(poles[1].re, -1e6, max_relative = 1e-8);
    }

    #[test]
    fn poles_require_reactance() {
        let mut c = Circuit::new();
        let a = c.node("a");
        let gnd = c.ground();
        c.add(resistor("r1", a, gnd, 1.0)).unwrap();
        assert!(matches!(poles_numeric(&c), Err(Error::NoDynamics)));
    }

    #[test]
    fn highpass_zero_at_origin_and_divider_has_none() {
        let mut c = Circuit::new();
        let vin = c.node("in");
        let out = c.node("out");
        let gnd = c.ground();
        c.add(vsource("vin", vin, gnd, 1.0)).unwrap();
        c.add(capacitor("c", vin, out, 1e-6)).unwrap();
        c.add(resistor("r", out, gnd, 1e3)).unwrap();
        let zeros = zeros_numeric(&c, "vin", (out, gnd)).unwrap();
        assert_eq!(zeros.len(), 1);
        assert_abs_diff_eq!(zeros[0].norm(), 0.0, epsilon = 1e-3);

        let mut d = Circuit::new();
        let vin = d.node("in");
        let mid = d.node("mid");
        let gnd = d.ground();
        d.add(vsource("vin", vin, gnd, 1.0)).unwrap();
        d.add(resistor("r1", vin, mid, 1e3)).unwrap();
        d.add(resistor("r2", mid, gnd, 1e3)).unwrap();
        // One capacitor somewhere keeps the pencil non-trivial but the
        // divider path itself contributes no finite zero.
        d.add(capacitor("cl", vin, gnd, 1e-12)).unwrap();
        let zeros = zeros_numeric(&d, "vin", (mid, gnd)).unwrap();
        assert!(zeros.is_empty(), "unexpected zeros: {zeros:?}");
    }

    #[test]
    fn solve_is_bit_identical_across_runs() {
        let (c, out) = rc_lowpass();
        let a = solve_ac(&c, 777.0).unwrap().voltage(out);
        let b = solve_ac(&c, 777.0).unwrap().voltage(out);
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), b.im.to_bits());
    }

    // ---- property tests ---------------------------------------------------

    /// Chain of series resistors with a shunt capacitor on every node; the
    /// drive or first resistor lands on ground so G is nonsingular.
    fn ladder(rs: &[f64], cs: &[f64]) -> Circuit {
        let mut c = Circuit::new();
        let gnd = c.ground();
        let mut prev = gnd;
        for (k, (&r, &cap)) in rs.iter().zip(cs).enumerate() {
            let n = c.node(&format!("n{k}"));
            c.add(resistor(&format!("r{k}"), prev, n, r)).unwrap();
            c.add(capacitor(&format!("c{k}"), n, gnd, cap)).unwrap();
            prev = n;
        }
        c
    }

    /// Independent pole oracle: sample det(G + sC) at distinct shifts, fit
    /// the characteristic polynomial through a Vandermonde solve, and take
    /// companion-matrix roots. Completely different machinery from the
    /// shift-inverted pencil used by `poles_numeric`.
    fn charpoly_roots(circuit: &Circuit) -> Vec<Complex64> {
        let st = stamp(circuit);
        let dim = st.dim();
        let degree = dim; // upper bound; trailing coefficients come out ~0
        let samples: Vec<f64> = (0..=degree).map(|i| -2.0 + 0.8 * i as f64).collect();
        let mut vand = DMatrix::<f64>::zeros(samples.len(), degree + 1);
        let mut dets = DVector::<f64>::zeros(samples.len());
        for (i, &s) in samples.iter().enumerate() {
            let m = &st.g + s * &st.c;
            dets[i] = m.determinant();
            let mut p = 1.0;
            for j in 0..=degree {
                vand[(i, j)] = p;
                p *= s;
            }
        }
        let coeffs = vand.lu().solve(&dets).expect("vandermonde solve");
        // Strip numerically-zero leading coefficients before building the
        // companion matrix.
        let mut last = degree;
        let scale = coeffs.iter().map(|v| v.abs()).fold(0.0, f64::max);
        while last > 0 && coeffs[last].abs() < 1e-12 * scale {
            last -= 1;
        }
        assert!(last > 0, "constant characteristic polynomial");
        let mut comp = DMatrix::<f64>::zeros(last, last);
        for i in 1..last {
            comp[(i, i - 1)] = 1.0;
        }
        for i in 0..last {
            comp[(i, last - 1)] = -coeffs[i] / coeffs[last];
        }
        let eigs = comp.transpose().complex_eigenvalues();
        let mut roots: Vec<Complex64> = eigs.iter().copied().collect();
        roots.sort_by(|a, b| {
            a.norm()
                .partial_cmp(&b.norm())
                .unwrap()
                .then(a.re.partial_cmp(&b.re).unwrap())
                .then(a.im.partial_cmp(&b.im).unwrap())
        });
        roots
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        /// Pencil poles of an RC ladder match the expanded characteristic
        /// polynomial's roots.
        #[test]
        fn ladder_poles_match_charpoly(
            rs in proptest::collection::vec(0.5f64..2.0, 2..=4),
            cs in proptest::collection::vec(0.5f64..2.0, 2..=4),
        ) {
            let n = rs.len().min(cs.len());
            let circuit = ladder(&rs[..n], &cs[..n]);
            let poles = poles_numeric(&circuit).unwrap();
            let expected = charpoly_roots(&circuit);
            prop_assert_eq!(poles.len(), expected.len());
            for (p, e) in poles.iter().zip(&expected) {
                prop_assert!((p - e).norm() <= 1e-8 * e.norm().max(1.0),
                    "pole {p} vs charpoly root {e}");
            }
        }

        /// Reconstructing H from poles, zeros, and one gain-matching point
        /// reproduces the direct MNA transfer on few-pole networks.
        #[test]
        fn rational_reconstruction(
            rs in proptest::collection::vec(0.5f64..2.0, 2..=3),
            cs in proptest::collection::vec(0.5f64..2.0, 2..=3),
        ) {
            let n = rs.len().min(cs.len());
            let mut circuit = ladder(&rs[..n], &cs[..n]);
            let vin = circuit.node("drive");
            let first = circuit.find_node("n0").unwrap();
            let gnd = circuit.ground();
            circuit.add(vsource("vin", vin, gnd, 1.0)).unwrap();
            circuit.add(resistor("rdrive", vin, first, 1.0)).unwrap();
            let out = circuit.find_node(&format!("n{}", n - 1)).unwrap();

            let poles = poles_numeric(&circuit).unwrap();
            let zeros = zeros_numeric(&circuit, "vin", (out, gnd)).unwrap();
            prop_assert!(poles.len() <= 3);

            let omegas: Vec<f64> = (0..20).map(|i| 0.05 * 10f64.powf(i as f64 / 6.0)).collect();
            let h = transfer(&circuit, "vin", (out, gnd), &omegas).unwrap();

            let rational = |s: Complex64| {
                let num: Complex64 = zeros.iter().map(|z| s - z).product();
                let den: Complex64 = poles.iter().map(|p| s - p).product();
                num / den
            };
            let s0 = Complex64::new(0.0, omegas[omegas.len() / 2]);
            let k = h[omegas.len() / 2] / rational(s0);
            for (i, &w) in omegas.iter().enumerate() {
                let approx = k * rational(Complex64::new(0.0, w));
                prop_assert!((approx - h[i]).norm() <= 1e-6 * h[i].norm(),
                    "reconstruction mismatch at omega {w}: {approx} vs {}", h[i]);
            }
        }

        /// Every solve across random ladders keeps the KCL residual bound.
        #[test]
        fn residual_bound_holds(
            rs in proptest::collection::vec(0.5f64..2.0, 2..=4),
            cs in proptest::collection::vec(0.5f64..2.0, 2..=4),
            omega_exp in -1.0f64..4.0,
        ) {
            let n = rs.len().min(cs.len());
            let mut circuit = ladder(&rs[..n], &cs[..n]);
            let vin = circuit.node("drive");
            let first = circuit.find_node("n0").unwrap();
            let gnd = circuit.ground();
            circuit.add(vsource("vin", vin, gnd, 1.0)).unwrap();
            circuit.add(resistor("rdrive", vin, first, 1.0)).unwrap();
            let sol = solve_ac(&circuit, 10f64.powf(omega_exp)).unwrap();
            prop_assert!(sol.residual <= 1e-9);
        }
    }
}

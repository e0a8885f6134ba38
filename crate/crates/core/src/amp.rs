//! Closed-form model and half-circuit builders for the two-stage amplifier
//! with positive capacitive feedback (PCF) compensation.
//!
//! Both stages share one structure: a differential pair loaded by a
//! diode-connected / cross-coupled device quartet. With matched loads the
//! diode's `+gm` and the cross device's `−gm` cancel, leaving only output
//! conductances — small-signal resistances far above `1/gm` without
//! cascoding the signal path (the second stage does add a cascode above the
//! pair to push `R2` further). The compensation capacitors return each
//! first-stage output to the *opposite* output, so the usual Miller pole
//! splitting happens without creating a right-half-plane zero: the feedback
//! is positive, the zero lands in the left half plane.
//!
//! Everything in this module is closed-form except the `build_half_circuit`
//! constructors, which assemble the equivalent small-signal networks for the
//! numerical engine. The two routes deliberately stay independent so each
//! can check the other.

use num_complex::Complex64;

use crate::device::MosSmallSignal;
use crate::error::{Error, Result};
use crate::mna::{Circuit, Element, ElementKind};

/// Ordinary two-resistor parallel combination.
pub fn parallel(a: f64, b: f64) -> f64 {
    a * b / (a + b)
}

/// Transconductance of a device degenerated by `rs` in its source:
/// `gm / (1 + rs/ro + rs·(gm + gmb))`.
pub fn degenerated_gm(gm: f64, gmb: f64, ro: f64, rs: f64) -> f64 {
    gm / (1.0 + rs / ro + rs * (gm + gmb))
}

/// Resistance looking into the cascode drain: `ro7 + ro5·(1 + (gm7 + gmb7)·ro7)`.
pub fn cascode_resistance(ro_bottom: f64, gm_casc: f64, gmb_casc: f64, ro_casc: f64) -> f64 {
    ro_casc + ro_bottom * (1.0 + (gm_casc + gmb_casc) * ro_casc)
}

/// Stage output resistance when the load pair is *not* matched, so the
/// `gm_diode − gm_cross` term survives. A cross device stronger than the
/// diode can push the net conductance through zero: the node latches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MismatchR {
    /// Signed small-signal resistance; non-positive means latch-up.
    Ohms(f64),
    /// The conductances cancel exactly; the resistance is unbounded.
    Marginal,
}

/// First-stage output resistance with explicit (possibly mismatched)
/// devices: `1 / (gds1 + gds3a + gds3b + gm3a − gm3b)`.
pub fn r1_mismatch(
    m1: &MosSmallSignal,
    m3a: &MosSmallSignal,
    m3b: &MosSmallSignal,
) -> MismatchR {
    // The gm contrast is grouped so matched devices contribute an exact
    // zero and the result collapses bit-for-bit onto the nominal value.
    let den = m1.gds() + m3a.gds() + m3b.gds() + (m3a.gm - m3b.gm);
    if den == 0.0 {
        MismatchR::Marginal
    } else {
        MismatchR::Ohms(1.0 / den)
    }
}

/// Second-stage output resistance with explicit devices. The pair side is a
/// cascoded branch (`m5` under `m7`), the load side the second quartet.
pub fn r2_mismatch(
    m5: &MosSmallSignal,
    m7: &MosSmallSignal,
    m9a: &MosSmallSignal,
    m9b: &MosSmallSignal,
) -> MismatchR {
    let casc = cascode_resistance(m5.ro, m7.gm, m7.gmb, m7.ro);
    // Same grouping trick as `r1_mismatch`: matched loads must collapse
    // bit-for-bit onto `r2_nominal`.
    let den = 1.0 / casc + m9a.gds() + m9b.gds() + (m9a.gm - m9b.gm);
    if den == 0.0 {
        MismatchR::Marginal
    } else {
        MismatchR::Ohms(1.0 / den)
    }
}

/// Lumped capacitance at the two gain nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeCaps {
    pub c1: f64,
    pub c2: f64,
    /// True when the value came from a measured override rather than the
    /// parasitic sum.
    pub c1_overridden: bool,
    pub c2_overridden: bool,
}

/// DC differential gain, broken into per-stage factors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DcGain {
    pub av: f64,
    pub av_db: f64,
    /// First-stage factor `gm1·R1` (linear).
    pub stage1: f64,
    /// Second-stage factor `gm5·R2` (linear).
    pub stage2: f64,
    pub r1: f64,
    pub r2: f64,
}

/// Positive-supply rejection estimate and its ingredients.
///
/// Supply ripple reaches the output two ways: attenuated through the
/// common-mode path (gain `−A_cm`), and almost unattenuated through the
/// resistive divider between the cascoded branch and the `1/(2·gm9a)` load —
/// the divider term sits within a fraction of unity. The output therefore
/// tracks the supply nearly one-to-one, and referring that to the input
/// divides by the differential gain: `PSRR⁺ ≈ A_d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsrrClosedForm {
    /// `20·log10(A_d)` — the rejection estimate itself.
    pub psrr_db: f64,
    /// Magnitude of the common-mode leg, `A_cm`.
    pub cm_path_gain: f64,
    /// The near-unity divider `R_casc / (R_casc + 1/(2·gm9a))`.
    pub divider: f64,
}

/// Second-order closed-form transfer function
/// `H(s) = a0·(1 + s/z) / (1 + α·s + β·s²)` with an LHP zero at `−z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedFormTf {
    pub a0: f64,
    /// LHP zero magnitude `gm5/Cc`, rad/s (infinite when `Cc = 0`).
    pub z_rad: f64,
    pub alpha: f64,
    pub beta: f64,
    /// The `(Cc + C1)·R1` share of `alpha`, kept separate so the simplified
    /// dominant-pole form (which drops it) can be reconstructed.
    pub direct_term: f64,
}

/// Pole estimates from the quadratic denominator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedFormPoles {
    /// Dominant pole `−1/α`, rad/s (signed).
    pub p1: f64,
    /// Dominant pole with the `(Cc + C1)·R1` term dropped from `α`.
    pub p1_simplified: f64,
    /// Non-dominant pole `−α/β`, rad/s (signed).
    pub p2: f64,
    /// Exact roots of `1 + α·s + β·s² = 0`, ascending magnitude.
    pub exact: [Complex64; 2],
}

impl ClosedFormTf {
    pub fn eval(&self, omega: f64) -> Complex64 {
        let s = Complex64::new(0.0, omega);
        let num = if self.z_rad.is_finite() {
            Complex64::new(1.0, 0.0) + s / self.z_rad
        } else {
            Complex64::new(1.0, 0.0)
        };
        let den = Complex64::new(1.0, 0.0) + self.alpha * s + self.beta * s * s;
        self.a0 * num / den
    }

    pub fn poles(&self) -> ClosedFormPoles {
        let (alpha, beta) = (self.alpha, self.beta);
        let p1 = -1.0 / alpha;
        let p1_simplified = -1.0 / (alpha - self.direct_term);
        let p2 = -alpha / beta;
        // Exact quadratic roots, complex-safe and cancellation-free: compute
        // the larger-magnitude root first, then pair it via the product
        // β·s1·s2 = 1.
        let disc = alpha * alpha - 4.0 * beta;
        let exact = if disc >= 0.0 {
            let q = -0.5 * (alpha + alpha.signum() * disc.sqrt());
            let big = Complex64::new(q / beta, 0.0);
            let small = Complex64::new(1.0 / q, 0.0);
            [small, big]
        } else {
            let re = -alpha / (2.0 * beta);
            let im = (-disc).sqrt() / (2.0 * beta);
            [Complex64::new(re, -im), Complex64::new(re, im)]
        };
        ClosedFormPoles {
            p1,
            p1_simplified,
            p2,
            exact,
        }
    }
}

/// Build the closed-form response from already-resolved parts, so mismatch
/// analyses can reuse it with perturbed resistances.
pub fn closed_form_tf_from_parts(
    a0: f64,
    r1: f64,
    r2: f64,
    gm5: f64,
    c1: f64,
    c2: f64,
    cl: f64,
    cc: f64,
) -> ClosedFormTf {
    let c2l = c2 + cl;
    let alpha = r2 * (c2l + cc * (1.0 - gm5 * r1)) + (cc + c1) * r1;
    let beta = r1 * r2 * (c2l * (c1 + cc) + c1 * cc);
    let z_rad = if cc > 0.0 { gm5 / cc } else { f64::INFINITY };
    ClosedFormTf {
        a0,
        z_rad,
        alpha,
        beta,
        direct_term: (cc + c1) * r1,
    }
}

/// Outcome of the compensation stability criterion
/// `(C2 + CL)/Cc > gm5·R1 − 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stability {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs − rhs`; positive means both poles stay in the left half plane.
    pub margin: f64,
    pub stable: bool,
    /// Exact equality: the boundary case with a pole on the axis.
    pub marginal: bool,
}

/// Which equivalent network [`AmpDesign::build_half_circuit`] emits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HalfCircuitMode {
    /// Differential-mode two-node macromodel with the folded compensation
    /// capacitor. Source `vin`, output node `out`.
    Dm,
    /// Common-mode path: tail degeneration active, loads diode-connected,
    /// compensation capacitor at normal polarity.
    Cm,
    /// Positive-supply path: excitation node `vdd` drives the tail, the
    /// input-pair bulk, and the second-stage load sources.
    Psrr,
}

/// Complete small-signal design: one record per matched pair (the two sides
/// are identical by construction at the nominal point; mismatch analyses
/// instantiate the sides separately), the two tail current sources, and the
/// external capacitors.
#[derive(Clone, Debug, PartialEq)]
pub struct AmpDesign {
    /// M1/M2 input pair (first stage).
    pub input_pair: MosSmallSignal,
    /// M3a/M4a diode-connected first-stage loads.
    pub load1_diode: MosSmallSignal,
    /// M3b/M4b cross-coupled first-stage loads.
    pub load1_cross: MosSmallSignal,
    /// M5/M6 second-stage pair.
    pub stage2_pair: MosSmallSignal,
    /// M7/M8 cascodes above the second-stage pair.
    pub cascode: MosSmallSignal,
    /// M9a/M10a diode-connected second-stage loads.
    pub load2_diode: MosSmallSignal,
    /// M9b/M10b cross-coupled second-stage loads.
    pub load2_cross: MosSmallSignal,
    /// First-stage tail source, modeled as its output resistance.
    pub tail1: MosSmallSignal,
    /// Second-stage tail source.
    pub tail2: MosSmallSignal,
    /// Compensation capacitor per side, farads.
    pub cc: f64,
    /// External load per output, farads.
    pub cl: f64,
    /// Supply voltage, volts (bookkeeping only; the small-signal model does
    /// not consume it).
    pub supply: f64,
    /// Measured first-stage node capacitance; when present it replaces the
    /// parasitic sum.
    pub c1_override: Option<f64>,
    /// Measured second-stage node capacitance.
    pub c2_override: Option<f64>,
}

impl AmpDesign {
    /// The workbench's reference design point (0.18 µm, 1.8 V, 456 µA +
    /// 22 µA bias): geometry, small-signal parameters at bias, and the
    /// measured node capacitances.
    pub fn reference() -> Self {
        use crate::device::Polarity::{Nmos, Pmos};
        let ok = "reference constants are valid";
        AmpDesign {
            input_pair: MosSmallSignal::from_gm_id(
                "m1", Pmos, 4.22e-3, 1.17e-3, 10.95e3, 200.0, 0.18, 228e-6,
            )
            .expect(ok),
            load1_diode: MosSmallSignal::from_gm_vov(
                "m3a", Nmos, 1.00e-3, 0.0, 114.6e3, 10.0, 0.5, 0.2,
            )
            .expect(ok),
            load1_cross: MosSmallSignal::from_gm_vov(
                "m3b", Nmos, 1.00e-3, 0.0, 114.6e3, 10.0, 0.5, 0.2,
            )
            .expect(ok),
            stage2_pair: MosSmallSignal::from_gm_id(
                "m5", Nmos, 0.21e-3, 0.049e-3, 66.0e3, 5.0, 0.18, 11e-6,
            )
            .expect(ok),
            cascode: MosSmallSignal::from_gm_id(
                "m7", Nmos, 0.214e-3, 0.046e-3, 128.2e3, 5.0, 0.18, 11e-6,
            )
            .expect(ok),
            load2_diode: MosSmallSignal::from_gm_vov(
                "m9a", Pmos, 0.018e-3, 0.0, 12.5e6, 2.0, 3.0, 0.64,
            )
            .expect(ok),
            load2_cross: MosSmallSignal::from_gm_vov(
                "m9b", Pmos, 0.018e-3, 0.0, 12.5e6, 2.0, 3.0, 0.64,
            )
            .expect(ok),
            tail1: MosSmallSignal::from_ro("mt1", Pmos, 4.98e3, 500.0, 0.18).expect(ok),
            tail2: MosSmallSignal::from_ro("mt2", Nmos, 54.6e3, 10.0, 0.5).expect(ok),
            cc: 0.75e-12,
            cl: 5e-12,
            supply: 1.8,
            c1_override: Some(325e-15),
            c2_override: Some(137e-15),
        }
    }

    pub fn with_cl(mut self, cl: f64) -> Self {
        self.cl = cl;
        self
    }

    /// Sanity-check the externals (the device records validate themselves
    /// at construction).
    pub fn validate(&self) -> Result<()> {
        let positive = |what: &str, v: f64| -> Result<()> {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::BadDesign(format!(
                    "{what} must be finite and > 0, got {v}"
                )));
            }
            Ok(())
        };
        positive("compensation capacitor", self.cc)?;
        positive("load capacitor", self.cl)?;
        positive("supply", self.supply)?;
        if let Some(c1) = self.c1_override {
            positive("first-stage node capacitance override", c1)?;
        }
        if let Some(c2) = self.c2_override {
            positive("second-stage node capacitance override", c2)?;
        }
        for pair in [
            &self.input_pair,
            &self.load1_diode,
            &self.load1_cross,
            &self.stage2_pair,
            &self.cascode,
            &self.load2_diode,
            &self.load2_cross,
        ] {
            if !(pair.gm > 0.0) {
                return Err(Error::BadDesign(format!(
                    "pair device {} needs gm > 0",
                    pair.name
                )));
            }
        }
        Ok(())
    }

    /// Matched first-stage output resistance `1/(gds1 + gds3a + gds3b)`.
    /// The load-pair transconductances cancel by symmetry and drop out.
    pub fn r1_nominal(&self) -> f64 {
        1.0 / (self.input_pair.gds() + self.load1_diode.gds() + self.load1_cross.gds())
    }

    /// Matched second-stage output resistance: cascoded branch in parallel
    /// with the second quartet's output conductances.
    pub fn r2_nominal(&self) -> f64 {
        1.0 / (1.0 / self.cascode_nominal() + self.load2_diode.gds() + self.load2_cross.gds())
    }

    /// Resistance looking into the cascode drain at the nominal point.
    pub fn cascode_nominal(&self) -> f64 {
        cascode_resistance(
            self.stage2_pair.ro,
            self.cascode.gm,
            self.cascode.gmb,
            self.cascode.ro,
        )
    }

    /// Lumped node capacitances: measured overrides when present, otherwise
    /// sums of the connected parasitics (mirror factors included: each gain
    /// node sees both gates of its diode pair and both drains of the cross
    /// pair on the far side).
    pub fn node_caps(&self) -> Result<NodeCaps> {
        let (m1, m3a, m3b) = (&self.input_pair, &self.load1_diode, &self.load1_cross);
        let (m5, m7, m9a, m9b) = (
            &self.stage2_pair,
            &self.cascode,
            &self.load2_diode,
            &self.load2_cross,
        );
        let parasitic1 = 2.0 * m3a.cgs + 2.0 * m3a.cdb + 4.0 * m3b.cgd
            + m5.cgs
            + 2.0 * m5.cgd
            + m1.cdb
            + m1.cgd;
        let parasitic2 = 2.0 * m9a.cgs + 2.0 * m9a.cdb + 4.0 * m9b.cgd + m7.cdb + m7.cgd;
        let c1 = self.c1_override.unwrap_or(parasitic1);
        let c2 = self.c2_override.unwrap_or(parasitic2);
        if !(c1 > 0.0) || !(c2 > 0.0) {
            return Err(Error::BadDesign(format!(
                "node capacitances must be > 0 (C1 = {c1}, C2 = {c2}); provide overrides or \
                 device parasitics"
            )));
        }
        Ok(NodeCaps {
            c1,
            c2,
            c1_overridden: self.c1_override.is_some(),
            c2_overridden: self.c2_override.is_some(),
        })
    }

    /// DC differential gain `gm1·R1·gm5·R2`.
    pub fn dc_gain_dm(&self) -> Result<DcGain> {
        let r1 = self.r1_nominal();
        let r2 = self.r2_nominal();
        if r1 <= 0.0 {
            return Err(Error::LatchUp { stage: 1, r_ohms: r1 });
        }
        if r2 <= 0.0 {
            return Err(Error::LatchUp { stage: 2, r_ohms: r2 });
        }
        let stage1 = self.input_pair.gm * r1;
        let stage2 = self.stage2_pair.gm * r2;
        let av = stage1 * stage2;
        Ok(DcGain {
            av,
            av_db: 20.0 * av.log10(),
            stage1,
            stage2,
            r1,
            r2,
        })
    }

    /// Common-mode gain: both stages act as degenerated common-source
    /// stages into diode loads, `(G_m1/(2·gm3a)) · (G_m5/(2·gm9a))`, where
    /// each `G_m` is the tail-degenerated transconductance (the tail sees
    /// `2·r_o,tail` per side).
    pub fn cm_gain(&self) -> f64 {
        let g1 = degenerated_gm(
            self.input_pair.gm,
            self.input_pair.gmb,
            self.input_pair.ro,
            2.0 * self.tail1.ro,
        );
        let g5 = degenerated_gm(
            self.stage2_pair.gm,
            self.stage2_pair.gmb,
            self.stage2_pair.ro,
            2.0 * self.tail2.ro,
        );
        (g1 / (2.0 * self.load1_diode.gm)) * (g5 / (2.0 * self.load2_diode.gm))
    }

    /// Low-frequency CMRR in dB; infinite when the common-mode path
    /// vanishes entirely.
    pub fn cmrr_db(&self) -> Result<f64> {
        Ok(cmrr_db(self.dc_gain_dm()?.av, self.cm_gain()))
    }

    pub fn psrr_plus(&self) -> Result<PsrrClosedForm> {
        let casc = self.cascode_nominal();
        let divider = casc / (casc + 1.0 / (2.0 * self.load2_diode.gm));
        Ok(PsrrClosedForm {
            psrr_db: self.dc_gain_dm()?.av_db,
            cm_path_gain: self.cm_gain(),
            divider,
        })
    }

    pub fn closed_form_tf(&self) -> Result<ClosedFormTf> {
        let gain = self.dc_gain_dm()?;
        let caps = self.node_caps()?;
        Ok(closed_form_tf_from_parts(
            gain.av,
            gain.r1,
            gain.r2,
            self.stage2_pair.gm,
            caps.c1,
            caps.c2,
            self.cl,
            self.cc,
        ))
    }

    /// The compensation criterion `(C2 + CL)/Cc > gm5·R1 − 1`. Both sides
    /// are reported; `marginal` flags exact equality.
    pub fn stability_check(&self) -> Result<Stability> {
        let caps = self.node_caps()?;
        let lhs = (caps.c2 + self.cl) / self.cc;
        let rhs = self.stage2_pair.gm * self.r1_nominal() - 1.0;
        Ok(Stability {
            lhs,
            rhs,
            margin: lhs - rhs,
            stable: lhs > rhs,
            marginal: lhs == rhs,
        })
    }

    /// Assemble the equivalent network for the requested signal path. The
    /// excitation source is always named `vin`; the response is at node
    /// `out` (for [`HalfCircuitMode::Psrr`] the excited rail node is named
    /// `vdd`).
    pub fn build_half_circuit(&self, mode: HalfCircuitMode) -> Result<Circuit> {
        let caps = self.node_caps()?;
        match mode {
            HalfCircuitMode::Dm => self.build_dm(caps),
            HalfCircuitMode::Cm => self.build_cm_like(caps, false),
            HalfCircuitMode::Psrr => self.build_cm_like(caps, true),
        }
    }

    fn build_dm(&self, caps: NodeCaps) -> Result<Circuit> {
        let mut c = Circuit::new();
        let gnd = c.ground();
        let input = c.node("in");
        let n1 = c.node("n1");
        let out = c.node("out");
        let el = |name: &str, a, b, kind| Element {
            name: name.into(),
            a,
            b,
            kind,
        };
        c.add(el(
            "vin",
            input,
            gnd,
            ElementKind::VoltageSource { volts: 1.0 },
        ))?;
        // First stage: drain current gm1·vin pulled out of n1.
        c.add(el(
            "gm1",
            n1,
            gnd,
            ElementKind::Vccs {
                gm: self.input_pair.gm,
                ctrl_pos: input,
                ctrl_neg: gnd,
            },
        ))?;
        c.add(el(
            "r1",
            n1,
            gnd,
            ElementKind::Resistor {
                ohms: self.r1_nominal(),
            },
        ))?;
        c.add(el(
            "c1",
            n1,
            gnd,
            ElementKind::Capacitor { farads: caps.c1 },
        ))?;
        // Second stage.
        c.add(el(
            "gm2",
            out,
            gnd,
            ElementKind::Vccs {
                gm: self.stage2_pair.gm,
                ctrl_pos: n1,
                ctrl_neg: gnd,
            },
        ))?;
        c.add(el(
            "r2",
            out,
            gnd,
            ElementKind::Resistor {
                ohms: self.r2_nominal(),
            },
        ))?;
        c.add(el(
            "c2",
            out,
            gnd,
            ElementKind::Capacitor {
                farads: caps.c2 + self.cl,
            },
        ))?;
        // Compensation capacitor to the *other* half's output: folded
        // positive-feedback polarity.
        c.add(el(
            "cc",
            n1,
            out,
            ElementKind::CrossCapacitor { farads: self.cc },
        ))?;
        Ok(c)
    }

    /// Common skeleton for the CM and supply paths: tails degenerate the
    /// pairs, loads look diode-connected, the compensation capacitor sits at
    /// normal polarity (both halves swing together). For the supply path
    /// the rail node `vdd` carries the excitation into the first-stage tail
    /// and bulk and the second-stage load sources.
    fn build_cm_like(&self, caps: NodeCaps, supply_path: bool) -> Result<Circuit> {
        let (m1, m5, m7) = (&self.input_pair, &self.stage2_pair, &self.cascode);
        let load1 = 1.0
            / (self.load1_diode.gm
                + self.load1_diode.gds()
                + self.load1_cross.gm
                + self.load1_cross.gds());
        let load2 = 1.0
            / (self.load2_diode.gm
                + self.load2_diode.gds()
                + self.load2_cross.gm
                + self.load2_cross.gds());

        let mut c = Circuit::new();
        let gnd = c.ground();
        let drive = c.node(if supply_path { "vdd" } else { "in" });
        let s1 = c.node("s1");
        let n1 = c.node("n1");
        let s2 = c.node("s2");
        let d5 = c.node("d5");
        let out = c.node("out");
        let el = |name: &str, a, b, kind| Element {
            name: name.into(),
            a,
            b,
            kind,
        };

        c.add(el(
            "vin",
            drive,
            gnd,
            ElementKind::VoltageSource { volts: 1.0 },
        ))?;
        // First-stage tail: to the rail being excited on the supply path,
        // to small-signal ground otherwise. Two sides in parallel.
        c.add(el(
            "rt1",
            s1,
            if supply_path { drive } else { gnd },
            ElementKind::Resistor {
                ohms: 2.0 * self.tail1.ro,
            },
        ))?;
        // Input device: gate sees the drive in CM, AC ground on the supply
        // path; the bulk follows the positive rail.
        c.add(el(
            "gm1",
            n1,
            s1,
            ElementKind::Vccs {
                gm: m1.gm,
                ctrl_pos: if supply_path { gnd } else { drive },
                ctrl_neg: s1,
            },
        ))?;
        c.add(el(
            "gmb1",
            n1,
            s1,
            ElementKind::Vccs {
                gm: m1.gmb,
                ctrl_pos: if supply_path { drive } else { gnd },
                ctrl_neg: s1,
            },
        ))?;
        c.add(el("ro1", n1, s1, ElementKind::Resistor { ohms: m1.ro }))?;
        c.add(el("rl1", n1, gnd, ElementKind::Resistor { ohms: load1 }))?;
        // Second-stage tail (NMOS, returns to ground either way).
        c.add(el(
            "rt2",
            s2,
            gnd,
            ElementKind::Resistor {
                ohms: 2.0 * self.tail2.ro,
            },
        ))?;
        c.add(el(
            "gm5",
            d5,
            s2,
            ElementKind::Vccs {
                gm: m5.gm,
                ctrl_pos: n1,
                ctrl_neg: s2,
            },
        ))?;
        c.add(el(
            "gmb5",
            d5,
            s2,
            ElementKind::Vccs {
                gm: m5.gmb,
                ctrl_pos: gnd,
                ctrl_neg: s2,
            },
        ))?;
        c.add(el("ro5", d5, s2, ElementKind::Resistor { ohms: m5.ro }))?;
        // Cascode: gate and bulk at AC ground, source at d5.
        c.add(el(
            "gm7",
            out,
            d5,
            ElementKind::Vccs {
                gm: m7.gm,
                ctrl_pos: gnd,
                ctrl_neg: d5,
            },
        ))?;
        c.add(el(
            "gmb7",
            out,
            d5,
            ElementKind::Vccs {
                gm: m7.gmb,
                ctrl_pos: gnd,
                ctrl_neg: d5,
            },
        ))?;
        c.add(el("ro7", out, d5, ElementKind::Resistor { ohms: m7.ro }))?;
        // Second-stage loads: PMOS quartet sourced at the positive rail.
        c.add(el(
            "rl2",
            out,
            if supply_path { drive } else { gnd },
            ElementKind::Resistor { ohms: load2 },
        ))?;
        c.add(el(
            "c1",
            n1,
            gnd,
            ElementKind::Capacitor { farads: caps.c1 },
        ))?;
        c.add(el(
            "c2",
            out,
            gnd,
            ElementKind::Capacitor {
                farads: caps.c2 + self.cl,
            },
        ))?;
        c.add(el(
            "cc",
            n1,
            out,
            ElementKind::Capacitor { farads: self.cc },
        ))?;
        Ok(c)
    }
}

/// `20·log10(A_d/A_cm)`, with an infinite sentinel when the common-mode
/// gain is exactly zero.
pub fn cmrr_db(av: f64, acm: f64) -> f64 {
    if acm == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (av.abs() / acm.abs()).log10()
    }
}

//! Frequency-domain post-processing: Bode data, unity-gain bandwidth, phase
//! margin, −3 dB corner, the load-capacitance sweep, and the rejection-ratio
//! profiles.
//!
//! Every extractor works on sampled data rather than on analytic formulas,
//! so the closed-form and numerical routes feed through the exact same code
//! and stay comparable. Crossings are located by linear interpolation in
//! (log f, dB) — the natural coordinates of a Bode plot.

use num_complex::Complex64;

use crate::amp::{cmrr_db, AmpDesign, ClosedFormTf, HalfCircuitMode};
use crate::error::{Error, Result};
use crate::mna::{self, Circuit, NodeId};
use crate::par;
use crate::si::format_sig;

/// 10·log10(2): the magnitude drop at a first-order corner.
const THREE_DB: f64 = 3.010299956639812;

/// Logarithmic frequency grid with *exact* endpoints: `ceil(decades·ppd)`
/// uniform steps in log f, so the first and last samples equal `f_start`
/// and `f_stop` bit-for-bit.
pub fn log_grid(f_start: f64, f_stop: f64, points_per_decade: usize) -> Result<Vec<f64>> {
    if !(f_start > 0.0) || !f_start.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "start frequency must be finite and > 0, got {f_start}"
        )));
    }
    if !(f_stop > f_start) || !f_stop.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "stop frequency must exceed start ({f_start}), got {f_stop}"
        )));
    }
    if points_per_decade == 0 {
        return Err(Error::InvalidArgument(
            "points per decade must be at least 1".into(),
        ));
    }
    let decades = (f_stop / f_start).log10();
    let intervals = ((decades * points_per_decade as f64).ceil() as usize).max(1);
    let log_start = f_start.log10();
    let log_stop = f_stop.log10();
    let mut freqs = Vec::with_capacity(intervals + 1);
    freqs.push(f_start);
    for i in 1..intervals {
        let t = i as f64 / intervals as f64;
        freqs.push(10f64.powf(log_start + t * (log_stop - log_start)));
    }
    freqs.push(f_stop);
    Ok(freqs)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResponsePoint {
    pub freq_hz: f64,
    pub mag_db: f64,
    /// Unwrapped phase: continued past ±180° so margins read directly.
    pub phase_deg: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyResponse {
    pub points: Vec<ResponsePoint>,
}

impl FrequencyResponse {
    /// Convert raw complex samples to dB magnitude and unwrapped phase.
    /// Unwrapping picks, for each sample, the 360°-shifted copy of its raw
    /// argument closest to the previous point's phase.
    pub fn from_complex(freqs: &[f64], h: &[Complex64]) -> Self {
        assert_eq!(freqs.len(), h.len());
        let mut points = Vec::with_capacity(h.len());
        let mut prev_phase = 0.0;
        for (i, (&f, v)) in freqs.iter().zip(h).enumerate() {
            let mag_db = 20.0 * v.norm().log10();
            let raw = v.arg().to_degrees();
            let phase_deg = if i == 0 {
                raw
            } else {
                raw + 360.0 * ((prev_phase - raw) / 360.0).round()
            };
            prev_phase = phase_deg;
            points.push(ResponsePoint {
                freq_hz: f,
                mag_db,
                phase_deg,
            });
        }
        FrequencyResponse { points }
    }

    fn crossing_down(&self, level_db: f64) -> Option<f64> {
        for w in self.points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a.mag_db > level_db && b.mag_db <= level_db {
                let t = (level_db - a.mag_db) / (b.mag_db - a.mag_db);
                let logf = a.freq_hz.log10() + t * (b.freq_hz.log10() - a.freq_hz.log10());
                return Some(10f64.powf(logf));
            }
        }
        None
    }

    /// Unity-gain bandwidth: the first downward 0 dB crossing.
    pub fn gbw(&self) -> Result<f64> {
        self.crossing_down(0.0).ok_or(Error::NoUnityCrossing {
            f_start: self.points.first().map_or(f64::NAN, |p| p.freq_hz),
            f_stop: self.points.last().map_or(f64::NAN, |p| p.freq_hz),
        })
    }

    /// `180° + ∠H` at the unity crossing, phase interpolated in log f.
    pub fn phase_margin(&self) -> Result<f64> {
        let f_u = self.gbw()?;
        Ok(180.0 + self.phase_at(f_u))
    }

    /// Corner where the magnitude first drops 3.01 dB below its first
    /// sample (the low-frequency plateau).
    pub fn f_3db(&self) -> Result<f64> {
        let dc = self
            .points
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty response".into()))?
            .mag_db;
        self.crossing_down(dc - THREE_DB).ok_or(Error::NoCrossing {
            what: "-3 dB corner".into(),
            f_start: self.points[0].freq_hz,
            f_stop: self.points[self.points.len() - 1].freq_hz,
        })
    }

    fn phase_at(&self, freq: f64) -> f64 {
        let pts = &self.points;
        if freq <= pts[0].freq_hz {
            return pts[0].phase_deg;
        }
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if freq <= b.freq_hz {
                let t = (freq.log10() - a.freq_hz.log10())
                    / (b.freq_hz.log10() - a.freq_hz.log10());
                return a.phase_deg + t * (b.phase_deg - a.phase_deg);
            }
        }
        pts[pts.len() - 1].phase_deg
    }

    /// True when the magnitude crosses 0 dB exactly once, downward. Peaking
    /// responses that dip under and come back report `false`, which flags
    /// the unity crossing as untrustworthy for margin reading.
    pub fn single_crossing(&self) -> bool {
        let mut down = 0;
        let mut up = 0;
        for w in self.points.windows(2) {
            let (a, b) = (w[0].mag_db > 0.0, w[1].mag_db > 0.0);
            match (a, b) {
                (true, false) => down += 1,
                (false, true) => up += 1,
                _ => {}
            }
        }
        down == 1 && up == 0
    }

    /// CSV projection: one row per sample, decimal notation.
    pub fn csv(&self) -> String {
        let mut out = String::from("freq_hz,mag_db,phase_deg\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{}\n",
                format_sig(p.freq_hz, 10),
                format_sig(p.mag_db, 10),
                format_sig(p.phase_deg, 10)
            ));
        }
        out
    }
}

/// Sample the closed-form response on a frequency grid.
pub fn bode_closed(tf: &ClosedFormTf, freqs: &[f64]) -> FrequencyResponse {
    let h: Vec<Complex64> = freqs
        .iter()
        .map(|&f| tf.eval(2.0 * std::f64::consts::PI * f))
        .collect();
    FrequencyResponse::from_complex(freqs, &h)
}

/// Sample a circuit transfer function on a frequency grid.
pub fn bode_mna(
    circuit: &Circuit,
    input: &str,
    output: (NodeId, NodeId),
    freqs: &[f64],
) -> Result<FrequencyResponse> {
    let omegas: Vec<f64> = freqs.iter().map(|f| 2.0 * std::f64::consts::PI * f).collect();
    let h = mna::transfer(circuit, input, output, &omegas)?;
    Ok(FrequencyResponse::from_complex(freqs, &h))
}

/// Headline loop metrics for one design point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityReport {
    pub gbw_hz: f64,
    pub pm_deg: f64,
    pub dc_gain_db: f64,
    pub f_3db_hz: f64,
    /// From the compensation criterion (both poles in the left half plane).
    pub stable: bool,
    /// Magnitude crossed 0 dB exactly once on the sampled grid.
    pub single_crossing: bool,
}

/// Default analysis grid for the headline metrics: wide enough to catch the
/// −3 dB corner (tens of kHz) and the unity crossing (around 100 MHz) of
/// any design this workbench targets.
const REPORT_F_START: f64 = 1e3;
const REPORT_F_STOP: f64 = 1e10;
const REPORT_PPD: usize = 64;

pub fn stability_report(design: &AmpDesign) -> Result<StabilityReport> {
    let tf = design.closed_form_tf()?;
    let stab = design.stability_check()?;
    let freqs = log_grid(REPORT_F_START, REPORT_F_STOP, REPORT_PPD)?;
    let resp = bode_closed(&tf, &freqs);
    Ok(StabilityReport {
        gbw_hz: resp.gbw()?,
        pm_deg: resp.phase_margin()?,
        dc_gain_db: 20.0 * tf.a0.abs().log10(),
        f_3db_hz: resp.f_3db()?,
        stable: stab.stable,
        single_crossing: resp.single_crossing(),
    })
}

/// One row of the load-capacitance sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClSweepEntry {
    pub cl: f64,
    pub gbw_hz: f64,
    pub pm_deg: f64,
    pub dc_gain_db: f64,
    pub stable: bool,
    /// Stability-criterion margin `lhs − rhs`; grows with the load here,
    /// the signature property of this compensation style.
    pub margin: f64,
}

/// Re-derive the headline metrics at each load value. Runs load points
/// through the data-parallel map.
pub fn cl_sweep(design: &AmpDesign, cls: &[f64]) -> Result<Vec<ClSweepEntry>> {
    for &cl in cls {
        if !(cl > 0.0) || !cl.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "load capacitance must be finite and > 0, got {cl}"
            )));
        }
    }
    let base = design.clone();
    let rows = par::map_vec(cls.to_vec(), move |cl| -> Result<ClSweepEntry> {
        let d = base.clone().with_cl(cl);
        let report = stability_report(&d)?;
        let stab = d.stability_check()?;
        Ok(ClSweepEntry {
            cl,
            gbw_hz: report.gbw_hz,
            pm_deg: report.pm_deg,
            dc_gain_db: report.dc_gain_db,
            stable: stab.stable,
            margin: stab.margin,
        })
    });
    rows.into_iter().collect()
}

/// CSV projection of a sweep. The criterion margin gets a column because
/// its growth with the load is the behavior the sweep exists to show.
pub fn sweep_csv(rows: &[ClSweepEntry]) -> String {
    let mut out = String::from("cl_farad,gbw_hz,pm_deg,dc_gain_db,stable,margin\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            format_sig(r.cl, 10),
            format_sig(r.gbw_hz, 10),
            format_sig(r.pm_deg, 10),
            format_sig(r.dc_gain_db, 10),
            u8::from(r.stable),
            format_sig(r.margin, 10)
        ));
    }
    out
}

/// CMRR and PSRR⁺ magnitudes across frequency, both referenced to the
/// differential-mode response at the same frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct RejectionProfile {
    pub freqs: Vec<f64>,
    pub cmrr_db: Vec<f64>,
    pub psrr_db: Vec<f64>,
}

/// Evaluate all three signal paths with the numerical engine and form the
/// ratios. Identical differential and common-mode responses would read
/// exactly 0 dB.
pub fn rejection_profile(design: &AmpDesign, freqs: &[f64]) -> Result<RejectionProfile> {
    let run = |mode: HalfCircuitMode| -> Result<Vec<Complex64>> {
        let c = design.build_half_circuit(mode)?;
        let out = c
            .find_node("out")
            .expect("half circuits always name their output `out`");
        let omegas: Vec<f64> = freqs.iter().map(|f| 2.0 * std::f64::consts::PI * f).collect();
        mna::transfer(&c, "vin", (out, c.ground()), &omegas)
    };
    let h_dm = run(HalfCircuitMode::Dm)?;
    let h_cm = run(HalfCircuitMode::Cm)?;
    let h_dd = run(HalfCircuitMode::Psrr)?;
    let cmrr: Vec<f64> = h_dm
        .iter()
        .zip(&h_cm)
        .map(|(d, c)| cmrr_db(d.norm(), c.norm()))
        .collect();
    let psrr: Vec<f64> = h_dm
        .iter()
        .zip(&h_dd)
        .map(|(d, v)| cmrr_db(d.norm(), v.norm()))
        .collect();
    Ok(RejectionProfile {
        freqs: freqs.to_vec(),
        cmrr_db: cmrr,
        psrr_db: psrr,
    })
}

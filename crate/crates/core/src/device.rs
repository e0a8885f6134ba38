//! MOS small-signal records and pair-mismatch statistics.
//!
//! Devices here are frozen operating points, not bias solvers: each record
//! carries the transconductances, output resistance, geometry, and the
//! square-law quantities (`id`, `vov`) needed to translate a threshold or
//! current-factor perturbation into shifted small-signal parameters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Polarity {
    Nmos,
    Pmos,
}

/// Small-signal operating point of one transistor (or of each transistor in
/// a matched pair — pairs are stored once and instantiated per side).
#[derive(Clone, Debug, PartialEq)]
pub struct MosSmallSignal {
    pub name: String,
    pub polarity: Polarity,
    /// Gate transconductance, siemens.
    pub gm: f64,
    /// Body transconductance, siemens (zero when source ties to bulk).
    pub gmb: f64,
    /// Output resistance, ohms.
    pub ro: f64,
    pub w_um: f64,
    pub l_um: f64,
    /// Parasitic capacitances, farads. Left at zero when the node
    /// capacitance comes from a measured override instead.
    pub cgs: f64,
    pub cgd: f64,
    pub cdb: f64,
    /// Drain bias current, amps (zero for devices modeled only as an
    /// output resistance).
    pub id: f64,
    /// Overdrive `V_GS − V_T`, volts.
    pub vov: f64,
}

impl MosSmallSignal {
    /// Saturated device from its transconductance and bias current; the
    /// square law fixes `vov = 2·id/gm`.
    pub fn from_gm_id(
        name: &str,
        polarity: Polarity,
        gm: f64,
        gmb: f64,
        ro: f64,
        w_um: f64,
        l_um: f64,
        id: f64,
    ) -> Result<Self> {
        Self::validate_common(name, gm, gmb, ro, w_um, l_um)?;
        if !(id > 0.0) || !id.is_finite() {
            return Err(Error::BadDevice {
                device: name.into(),
                message: format!("bias current must be > 0, got {id}"),
            });
        }
        Ok(MosSmallSignal {
            name: name.into(),
            polarity,
            gm,
            gmb,
            ro,
            w_um,
            l_um,
            cgs: 0.0,
            cgd: 0.0,
            cdb: 0.0,
            id,
            vov: 2.0 * id / gm,
        })
    }

    /// Saturated device from its transconductance and overdrive; the square
    /// law fixes `id = gm·vov/2`.
    pub fn from_gm_vov(
        name: &str,
        polarity: Polarity,
        gm: f64,
        gmb: f64,
        ro: f64,
        w_um: f64,
        l_um: f64,
        vov: f64,
    ) -> Result<Self> {
        Self::validate_common(name, gm, gmb, ro, w_um, l_um)?;
        if !(vov > 0.0) || !vov.is_finite() {
            return Err(Error::BadDevice {
                device: name.into(),
                message: format!("overdrive must be > 0, got {vov}"),
            });
        }
        Ok(MosSmallSignal {
            name: name.into(),
            polarity,
            gm,
            gmb,
            ro,
            w_um,
            l_um,
            cgs: 0.0,
            cgd: 0.0,
            cdb: 0.0,
            id: gm * vov / 2.0,
            vov,
        })
    }

    /// Device that matters only as an output resistance (tail sources seen
    /// as degeneration). No gain, no bias bookkeeping.
    pub fn from_ro(
        name: &str,
        polarity: Polarity,
        ro: f64,
        w_um: f64,
        l_um: f64,
    ) -> Result<Self> {
        if !(ro > 0.0) || !ro.is_finite() {
            return Err(Error::BadDevice {
                device: name.into(),
                message: format!("output resistance must be > 0, got {ro}"),
            });
        }
        Self::validate_geometry(name, w_um, l_um)?;
        Ok(MosSmallSignal {
            name: name.into(),
            polarity,
            gm: 0.0,
            gmb: 0.0,
            ro,
            w_um,
            l_um,
            cgs: 0.0,
            cgd: 0.0,
            cdb: 0.0,
            id: 0.0,
            vov: 0.0,
        })
    }

    pub fn with_caps(mut self, cgs: f64, cgd: f64, cdb: f64) -> Self {
        self.cgs = cgs;
        self.cgd = cgd;
        self.cdb = cdb;
        self
    }

    fn validate_common(name: &str, gm: f64, gmb: f64, ro: f64, w_um: f64, l_um: f64) -> Result<()> {
        if !(gm > 0.0) || !gm.is_finite() {
            return Err(Error::BadDevice {
                device: name.into(),
                message: format!("transconductance must be > 0, got {gm}"),
            });
        }
        if gmb < 0.0 || !gmb.is_finite() {
            return Err(Error::BadDevice {
                device: name.into(),
                message: format!("body transconductance must be >= 0, got {gmb}"),
            });
        }
        if !(ro > 0.0) || !ro.is_finite() {
            return Err(Error::BadDevice {
                device: name.into(),
                message: format!("output resistance must be > 0, got {ro}"),
            });
        }
        Self::validate_geometry(name, w_um, l_um)
    }

    fn validate_geometry(name: &str, w_um: f64, l_um: f64) -> Result<()> {
        if !(w_um > 0.0) || !(l_um > 0.0) || !w_um.is_finite() || !l_um.is_finite() {
            return Err(Error::BadDevice {
                device: name.into(),
                message: format!("geometry must be > 0, got W={w_um} L={l_um}"),
            });
        }
        Ok(())
    }

    pub fn gds(&self) -> f64 {
        1.0 / self.ro
    }

    /// Square-law current factor `β = gm/vov` (zero for resistance-only
    /// devices, which carry no bias point).
    pub fn beta(&self) -> f64 {
        if self.vov > 0.0 {
            self.gm / self.vov
        } else {
            0.0
        }
    }

    pub fn gate_area_um2(&self) -> f64 {
        self.w_um * self.l_um
    }
}

/// Saturation drain current `½·β·(v_gs − v_t)²`, clamped to zero in cutoff.
pub struct SquareLawId {
    pub amps: f64,
    pub cutoff: bool,
}

pub fn square_law_id(beta: f64, v_gs: f64, v_t: f64) -> SquareLawId {
    let vov = v_gs - v_t;
    if vov <= 0.0 {
        SquareLawId {
            amps: 0.0,
            cutoff: true,
        }
    } else {
        SquareLawId {
            amps: 0.5 * beta * vov * vov,
            cutoff: false,
        }
    }
}

/// Area-law mismatch coefficients. Each `A` parameter gives the standard
/// deviation of the *difference* between two identically drawn devices:
/// `σ(ΔP) = A_P / √(W·L)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PelgromParams {
    /// Threshold-difference coefficient for NMOS, mV·µm.
    pub a_vt_nmos_mv_um: f64,
    /// Threshold-difference coefficient for PMOS, mV·µm.
    pub a_vt_pmos_mv_um: f64,
    /// Current-factor-difference coefficient for NMOS, %·µm.
    pub a_beta_nmos_pct_um: f64,
    /// Current-factor-difference coefficient for PMOS, %·µm.
    pub a_beta_pmos_pct_um: f64,
}

impl Default for PelgromParams {
    fn default() -> Self {
        PelgromParams {
            a_vt_nmos_mv_um: 6.0,
            a_vt_pmos_mv_um: 6.6,
            a_beta_nmos_pct_um: 1.04,
            a_beta_pmos_pct_um: 0.99,
        }
    }
}

impl PelgromParams {
    fn check(&self) -> Result<()> {
        let all = [
            self.a_vt_nmos_mv_um,
            self.a_vt_pmos_mv_um,
            self.a_beta_nmos_pct_um,
            self.a_beta_pmos_pct_um,
        ];
        if all.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::BadDesign(format!(
                "mismatch coefficients must be finite and >= 0, got {self:?}"
            )));
        }
        Ok(())
    }

    /// σ of the pair threshold difference, volts.
    pub fn sigma_vt(&self, device: &MosSmallSignal) -> Result<f64> {
        self.check()?;
        let a = match device.polarity {
            Polarity::Nmos => self.a_vt_nmos_mv_um,
            Polarity::Pmos => self.a_vt_pmos_mv_um,
        };
        Ok(pelgrom_sigma(a, device.w_um, device.l_um)? * 1e-3)
    }

    /// σ of the pair relative current-factor difference, dimensionless.
    pub fn sigma_beta_rel(&self, device: &MosSmallSignal) -> Result<f64> {
        self.check()?;
        let a = match device.polarity {
            Polarity::Nmos => self.a_beta_nmos_pct_um,
            Polarity::Pmos => self.a_beta_pmos_pct_um,
        };
        Ok(pelgrom_sigma(a, device.w_um, device.l_um)? * 1e-2)
    }
}

/// `σ = A / √(W·L)` in whatever unit `A` carries.
pub fn pelgrom_sigma(a: f64, w_um: f64, l_um: f64) -> Result<f64> {
    if !(w_um > 0.0) || !(l_um > 0.0) || !w_um.is_finite() || !l_um.is_finite() {
        return Err(Error::BadDesign(format!(
            "gate area must be positive, got W={w_um} L={l_um}"
        )));
    }
    if a < 0.0 || !a.is_finite() {
        return Err(Error::BadDesign(format!(
            "mismatch coefficient must be finite and >= 0, got {a}"
        )));
    }
    Ok(a / (w_um * l_um).sqrt())
}

/// One sampled pair imbalance: the full difference `(ΔV_T, Δβ/β)` between
/// the two sides of a matched pair.
#[derive(Clone, Debug, PartialEq)]
pub struct MismatchDelta {
    pub device: String,
    pub d_vt: f64,
    pub d_beta_rel: f64,
}

impl MismatchDelta {
    pub fn is_zero(&self) -> bool {
        self.d_vt == 0.0 && self.d_beta_rel == 0.0
    }
}

/// Draw one pair difference per device, in device order, two normal draws
/// each (`ΔV_T` first, then `Δβ/β`). A zero σ (degenerate coefficients or
/// huge area) yields exactly zero for that component.
pub fn sample_mismatch(
    seed: u64,
    devices: &[&MosSmallSignal],
    params: &PelgromParams,
) -> Result<Vec<MismatchDelta>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_mismatch_with_rng(&mut rng, devices, params)
}

/// Same as [`sample_mismatch`] but on a caller-managed stream, so a campaign
/// can give every run its own deterministic substream.
pub fn sample_mismatch_with_rng(
    rng: &mut ChaCha8Rng,
    devices: &[&MosSmallSignal],
    params: &PelgromParams,
) -> Result<Vec<MismatchDelta>> {
    let mut out = Vec::with_capacity(devices.len());
    for dev in devices {
        let s_vt = params.sigma_vt(dev)?;
        let s_beta = params.sigma_beta_rel(dev)?;
        let d_vt = draw_normal(rng, s_vt);
        let d_beta_rel = draw_normal(rng, s_beta);
        out.push(MismatchDelta {
            device: dev.name.clone(),
            d_vt,
            d_beta_rel,
        });
    }
    Ok(out)
}

fn draw_normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma)
        .expect("sigma validated nonnegative")
        .sample(rng)
}

/// Re-derive a device's operating point after shifting its threshold by
/// `d_vt` and its current factor by the relative amount `d_beta_rel`,
/// holding the gate drive voltage fixed (the bias network does not react at
/// the mismatch analysis level). Under the square law:
///
/// ```text
/// vov' = vov − d_vt
/// id'  = ½·β·(1 + d_beta_rel)·vov'²
/// gm'  = 2·id'/vov'
/// ro'  = ro·(id/id')          (λ fixed ⇒ gds tracks current)
/// ```
///
/// `gmb` and the parasitic capacitances stay at their nominal values —
/// their sensitivity to mismatch is second-order against the gm/ro shifts.
pub fn apply_mismatch(device: &MosSmallSignal, delta: &MismatchDelta) -> Result<MosSmallSignal> {
    if !(device.vov > 0.0) || !(device.id > 0.0) {
        return Err(Error::BadDevice {
            device: device.name.clone(),
            message: "mismatch application needs a square-law bias point (vov, id > 0)".into(),
        });
    }
    if delta.is_zero() {
        return Ok(device.clone());
    }
    let vov = device.vov - delta.d_vt;
    if vov <= 0.0 {
        return Err(Error::OutOfSaturation {
            device: device.name.clone(),
            message: format!(
                "threshold shift {:+.4e} V consumes the {:.4e} V overdrive",
                delta.d_vt, device.vov
            ),
        });
    }
    let beta_scale = 1.0 + delta.d_beta_rel;
    if beta_scale <= 0.0 {
        return Err(Error::OutOfSaturation {
            device: device.name.clone(),
            message: format!(
                "current-factor shift {:+.4e} drives beta non-positive",
                delta.d_beta_rel
            ),
        });
    }
    let id = 0.5 * device.beta() * beta_scale * vov * vov;
    let gm = 2.0 * id / vov;
    let ro = device.ro * device.id / id;
    Ok(MosSmallSignal {
        gm,
        ro,
        id,
        vov,
        ..device.clone()
    })
}

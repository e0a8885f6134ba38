//! Mismatch Monte Carlo over the amplifier's matched pairs.
//!
//! Every run redraws a pair imbalance `(ΔV_T, Δβ/β)` for each of the seven
//! matched roles, rebuilds the two stage resistances with the imbalance
//! terms kept, and re-extracts gain, bandwidth, phase margin, and the
//! input-referred offset. The campaign is deterministic: run `i` owns
//! substream `i` of a counter-based generator seeded from the config, so the
//! same config produces byte-identical CSV regardless of execution order or
//! thread count.
//!
//! # Sampling convention
//!
//! The Pelgrom coefficients describe the *pair difference*, so a drawn delta
//! is the full imbalance between the two sides. A run applies `+Δ/2` to the
//! side it keeps and verifies that the mirror-image `−Δ/2` side also holds a
//! valid square-law operating point; draws where either side falls out of
//! saturation are rejected and redrawn (counted in [`McRun::resamples`]).
//! Splitting the difference keeps the sampled population centred on the
//! nominal design instead of biasing every run one way by the full delta.
//!
//! Runs where a stage resistance comes out non-positive (the cross-coupled
//! load overpowering its diode partner) are recorded as latched and carry
//! NaN metrics; they are excluded from the summary statistics but counted.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::amp::{closed_form_tf_from_parts, r1_mismatch, r2_mismatch, AmpDesign, MismatchR};
use crate::device::{
    apply_mismatch, sample_mismatch_with_rng, MismatchDelta, MosSmallSignal, PelgromParams,
};
use crate::error::{Error, Result};
use crate::par;
use crate::response::{bode_closed, log_grid};
use crate::si::format_sig;

/// Grid the per-run bandwidth and margin are read from. Wide enough to hold
/// the unity crossing under any plausible mismatch of the reference design.
const GRID_F_START_HZ: f64 = 1e5;
const GRID_F_STOP_HZ: f64 = 1e10;
const GRID_POINTS_PER_DECADE: usize = 64;

/// Redraws allowed per run before the configuration is declared unusable
/// (sigmas so large that saturation rejects almost every draw).
const RESAMPLE_BUDGET: u32 = 10_000;

/// Campaign parameters.
#[derive(Clone, Debug)]
pub struct McConfig {
    /// Number of runs; must be ≥ 1.
    pub runs: usize,
    /// Master seed. Run `i` uses stream `i` of this seed.
    pub seed: u64,
    pub pelgrom: PelgromParams,
    pub design: AmpDesign,
}

/// One Monte Carlo sample.
#[derive(Clone, Debug)]
pub struct McRun {
    pub index: usize,
    /// Full pair differences in sampling order: input pair, first-stage
    /// diode and cross loads, second-stage pair, cascode, second-stage
    /// diode and cross loads. Tail sources are not perturbed.
    pub deltas: Vec<MismatchDelta>,
    /// Signed first-stage resistance with imbalance terms; `+∞` marks the
    /// marginal case where the conductances cancel exactly.
    pub r1_ohms: f64,
    pub r2_ohms: f64,
    /// NaN when latched, like the three metrics below.
    pub av_db: f64,
    pub gbw_hz: f64,
    pub pm_deg: f64,
    pub offset_v: f64,
    /// True iff a stage resistance is non-positive or unbounded.
    pub latched: bool,
    /// Draws rejected for saturation loss before this run's sample stuck.
    pub resamples: u32,
}

/// Population statistics over the functional (non-latched) runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation (the runs are the whole population of
    /// interest, not a sample from a larger campaign).
    pub stddev: f64,
}

impl MetricStats {
    pub fn spread(&self) -> f64 {
        self.max - self.min
    }

    fn over(values: &[f64]) -> MetricStats {
        if values.is_empty() {
            return MetricStats {
                min: f64::NAN,
                max: f64::NAN,
                mean: f64::NAN,
                stddev: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        MetricStats {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            stddev: var.sqrt(),
        }
    }
}

/// Campaign digest. Metric statistics cover functional runs only.
#[derive(Clone, Debug)]
pub struct McSummary {
    pub runs: usize,
    pub latch_count: usize,
    /// Total saturation redraws across all runs.
    pub resamples: u32,
    pub av_db: MetricStats,
    pub gbw_hz: MetricStats,
    pub pm_deg: MetricStats,
    pub offset_v: MetricStats,
    pub max_abs_offset_v: f64,
    /// Worst excursion of the resistance product: the larger of
    /// `(R₁R₂)/(R₁R₂)_nom` and its reciprocal, maximised over runs.
    pub r1r2_max_ratio_to_nominal: f64,
    /// Nominal bandwidth read through the same grid the runs use, so the
    /// deviation below compares like with like.
    pub gbw_nominal_hz: f64,
    /// `max |GBW/GBW_nom − 1|` over functional runs.
    pub max_gbw_deviation: f64,
}

/// Execute the campaign and summarize it.
///
/// Latched runs are recorded, not errors. The call fails only on an invalid
/// config, or when the redraw budget shows the sigmas are incompatible with
/// the bias overdrives.
pub fn run_campaign(config: &McConfig) -> Result<(Vec<McRun>, McSummary)> {
    if config.runs < 1 {
        return Err(Error::InvalidArgument(
            "a campaign needs at least one run".into(),
        ));
    }
    config.design.validate()?;
    let caps = config.design.node_caps()?;
    let freqs = log_grid(GRID_F_START_HZ, GRID_F_STOP_HZ, GRID_POINTS_PER_DECADE)?;
    let runs = par::map_vec((0..config.runs).collect::<Vec<_>>(), |index| {
        single_run(config, index, (caps.c1, caps.c2), &freqs)
    })
    .into_iter()
    .collect::<Result<Vec<McRun>>>()?;
    let summary = summarize(&config.design, &runs)?;
    Ok((runs, summary))
}

fn single_run(config: &McConfig, index: usize, caps: (f64, f64), freqs: &[f64]) -> Result<McRun> {
    let d = &config.design;
    let roles: [&MosSmallSignal; 7] = [
        &d.input_pair,
        &d.load1_diode,
        &d.load1_cross,
        &d.stage2_pair,
        &d.cascode,
        &d.load2_diode,
        &d.load2_cross,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);

    let mut resamples = 0u32;
    let (deltas, sides) = loop {
        let full = sample_mismatch_with_rng(&mut rng, &roles, &config.pelgrom)?;
        match split_pairs(&roles, &full) {
            Ok(sides) => break (full, sides),
            Err(_) => {
                resamples += 1;
                if resamples >= RESAMPLE_BUDGET {
                    return Err(Error::BadDesign(format!(
                        "run {index}: {RESAMPLE_BUDGET} redraws rejected for saturation loss; \
                         the mismatch sigmas are too large for the bias overdrives"
                    )));
                }
            }
        }
    };
    let [m1, m3a, m3b, m5, m7, m9a, m9b] = &sides;

    let r1 = match r1_mismatch(m1, m3a, m3b) {
        MismatchR::Ohms(v) => v,
        MismatchR::Marginal => f64::INFINITY,
    };
    let r2 = match r2_mismatch(m5, m7, m9a, m9b) {
        MismatchR::Ohms(v) => v,
        MismatchR::Marginal => f64::INFINITY,
    };
    let latched = !(r1 > 0.0 && r1.is_finite() && r2 > 0.0 && r2.is_finite());

    let (av_db, gbw_hz, pm_deg, offset_v) = if latched {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    } else {
        // Same per-stage factor order as the nominal gain, so zero deltas
        // reproduce it bit-for-bit.
        let av = (m1.gm * r1) * (m5.gm * r2);
        let tf = closed_form_tf_from_parts(av, r1, r2, m5.gm, caps.0, caps.1, d.cl, d.cc);
        let resp = bode_closed(&tf, freqs);
        (
            20.0 * av.log10(),
            resp.gbw()?,
            resp.phase_margin()?,
            input_referred_offset(d, &deltas),
        )
    };

    Ok(McRun {
        index,
        deltas,
        r1_ohms: r1,
        r2_ohms: r2,
        av_db,
        gbw_hz,
        pm_deg,
        offset_v,
        latched,
        resamples,
    })
}

/// Split each full pair difference `Δ` into `±Δ/2` sides, keep the `+Δ/2`
/// device, and insist the `−Δ/2` sibling is realizable too — otherwise the
/// draw as a whole describes a pair that cannot exist at this bias.
fn split_pairs(
    roles: &[&MosSmallSignal; 7],
    full: &[MismatchDelta],
) -> Result<[MosSmallSignal; 7]> {
    let mut kept = Vec::with_capacity(roles.len());
    for (dev, delta) in roles.iter().zip(full) {
        let half = |sign: f64| MismatchDelta {
            device: delta.device.clone(),
            d_vt: sign * 0.5 * delta.d_vt,
            d_beta_rel: sign * 0.5 * delta.d_beta_rel,
        };
        apply_mismatch(dev, &half(-1.0))?;
        kept.push(apply_mismatch(dev, &half(1.0))?);
    }
    Ok(kept
        .try_into()
        .expect("split_pairs maps exactly seven roles"))
}

/// Refer the sampled pair differences to the amplifier input.
///
/// The input pair's threshold difference appears directly; each load pair's
/// contribution is weighted by its transconductance ratio against the
/// driving pair; current-factor differences enter through the square law as
/// `(V_ov/2)·Δβ/β`. The whole second stage is attenuated by the first-stage
/// gain. Nominal (unperturbed) gm, V_ov, and R₁ weight the terms — the
/// deltas are already first-order small. Devices without a delta in the
/// list (and the cascode, which only cascades the second stage's current)
/// contribute nothing.
pub fn input_referred_offset(design: &AmpDesign, deltas: &[MismatchDelta]) -> f64 {
    let delta_of = |dev: &MosSmallSignal| -> (f64, f64) {
        deltas
            .iter()
            .find(|d| d.device == dev.name)
            .map_or((0.0, 0.0), |d| (d.d_vt, d.d_beta_rel))
    };
    let stage = |pair: &MosSmallSignal, diode: &MosSmallSignal, cross: &MosSmallSignal| -> f64 {
        let (vt_p, beta_p) = delta_of(pair);
        let (vt_d, beta_d) = delta_of(diode);
        let (vt_c, beta_c) = delta_of(cross);
        vt_p
            + (diode.gm / pair.gm) * vt_d
            + (cross.gm / pair.gm) * vt_c
            + 0.5 * pair.vov * beta_p
            + (diode.gm / pair.gm) * 0.5 * diode.vov * beta_d
            + (cross.gm / pair.gm) * 0.5 * cross.vov * beta_c
    };
    let first = stage(&design.input_pair, &design.load1_diode, &design.load1_cross);
    let second = stage(
        &design.stage2_pair,
        &design.load2_diode,
        &design.load2_cross,
    );
    first + second / (design.input_pair.gm * design.r1_nominal())
}

/// Reduce a run list to population statistics. Order-independent: the runs
/// are consumed by index, so any execution schedule summarizes identically.
pub fn summarize(design: &AmpDesign, runs: &[McRun]) -> Result<McSummary> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument(
            "summarize needs at least one run".into(),
        ));
    }
    let functional: Vec<&McRun> = runs.iter().filter(|r| !r.latched).collect();
    let column = |get: fn(&McRun) -> f64| -> Vec<f64> {
        functional.iter().map(|r| get(r)).collect()
    };

    let gain = design.dc_gain_dm()?;
    let r1r2_nominal = gain.r1 * gain.r2;
    let freqs = log_grid(GRID_F_START_HZ, GRID_F_STOP_HZ, GRID_POINTS_PER_DECADE)?;
    let gbw_nominal = bode_closed(&design.closed_form_tf()?, &freqs).gbw()?;

    let mut ratio = f64::NAN;
    let mut gbw_dev = f64::NAN;
    let mut max_offset = f64::NAN;
    for r in &functional {
        let product = (r.r1_ohms * r.r2_ohms) / r1r2_nominal;
        ratio = ratio.max(product.max(1.0 / product));
        gbw_dev = gbw_dev.max((r.gbw_hz / gbw_nominal - 1.0).abs());
        max_offset = max_offset.max(r.offset_v.abs());
    }

    Ok(McSummary {
        runs: runs.len(),
        latch_count: runs.len() - functional.len(),
        resamples: runs.iter().map(|r| r.resamples).sum(),
        av_db: MetricStats::over(&column(|r| r.av_db)),
        gbw_hz: MetricStats::over(&column(|r| r.gbw_hz)),
        pm_deg: MetricStats::over(&column(|r| r.pm_deg)),
        offset_v: MetricStats::over(&column(|r| r.offset_v)),
        max_abs_offset_v: max_offset,
        r1r2_max_ratio_to_nominal: ratio,
        gbw_nominal_hz: gbw_nominal,
        max_gbw_deviation: gbw_dev,
    })
}

/// One CSV row per run, decimal notation, NaN spelled `nan`, `latched` as
/// 0/1. Deterministic for a given run list.
pub fn campaign_csv(runs: &[McRun]) -> String {
    let mut out = String::from("run,r1_ohm,r2_ohm,av_db,gbw_hz,pm_deg,offset_v,latched\n");
    for r in runs {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.index,
            format_sig(r.r1_ohms, 10),
            format_sig(r.r2_ohms, 10),
            format_sig(r.av_db, 10),
            format_sig(r.gbw_hz, 10),
            format_sig(r.pm_deg, 10),
            format_sig(r.offset_v, 10),
            u8::from(r.latched),
        ));
    }
    out
}

/// `key = value` digest of a summary, prefixed with comment lines that pin
/// down the sampling convention the numbers were produced under.
pub fn summary_text(summary: &McSummary) -> String {
    let mut out = String::new();
    out.push_str("# pair-difference sigmas, split +d/2 / -d/2 across the pair;\n");
    out.push_str("# the +d/2 side is reported. latched runs are excluded from\n");
    out.push_str("# the statistics below but counted in latch_count.\n");
    let mut kv = |key: &str, value: String| {
        out.push_str(key);
        out.push_str(" = ");
        out.push_str(&value);
        out.push('\n');
    };
    kv("runs", summary.runs.to_string());
    kv("latch_count", summary.latch_count.to_string());
    kv("resamples", summary.resamples.to_string());
    for (name, stats) in [
        ("av_db", &summary.av_db),
        ("gbw_hz", &summary.gbw_hz),
        ("pm_deg", &summary.pm_deg),
        ("offset_v", &summary.offset_v),
    ] {
        kv(&format!("{name}_min"), format_sig(stats.min, 10));
        kv(&format!("{name}_max"), format_sig(stats.max, 10));
        kv(&format!("{name}_mean"), format_sig(stats.mean, 10));
        kv(&format!("{name}_stddev"), format_sig(stats.stddev, 10));
    }
    kv("av_db_spread", format_sig(summary.av_db.spread(), 10));
    kv(
        "max_abs_offset_v",
        format_sig(summary.max_abs_offset_v, 10),
    );
    kv(
        "r1r2_max_ratio_to_nominal",
        format_sig(summary.r1r2_max_ratio_to_nominal, 10),
    );
    kv("gbw_nominal_hz", format_sig(summary.gbw_nominal_hz, 10));
    kv(
        "max_gbw_deviation",
        format_sig(summary.max_gbw_deviation, 10),
    );
    out
}

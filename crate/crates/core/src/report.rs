//! The closed-form design report: one `key=value` line per quantity.
//!
//! This is the workbench's headline artifact — everything the hand analysis
//! produces for a design, in a byte-stable order so the output can be
//! golden-file tested and diffed across design revisions. Units ride in the
//! key names (`R1_Ohm`, `z_Mrad_s`); values are exponent-free decimals with
//! nine significant digits. Lines starting with `#` are comments.
//!
//! Pole and zero magnitudes are reported in Mrad/s because that is the
//! natural scale for this design family (dominant pole ~0.13, second pole
//! ~84, zero ~280).

use crate::amp::AmpDesign;
use crate::error::Result;
use crate::response::stability_report;
use crate::si::format_sig;

const MRAD: f64 = 1e6;

fn sig(v: f64) -> String {
    format_sig(v, 9)
}

/// Render the full closed-form report for a design.
///
/// The denominator poles appear three ways on purpose: the dominant-pole
/// split (`p1`, `p2`), the simplified dominant pole that drops the
/// `(Cc+C1)·R1` term, and the exact quadratic roots. Comparing them is how
/// one sees what each approximation costs.
pub fn design_report(design: &AmpDesign) -> Result<String> {
    let gain = design.dc_gain_dm()?;
    let caps = design.node_caps()?;
    let acm = design.cm_gain();
    let cmrr = design.cmrr_db()?;
    let psrr = design.psrr_plus()?;
    let tf = design.closed_form_tf()?;
    let poles = tf.poles();
    let stab = design.stability_check()?;
    let resp = stability_report(design)?;

    let mut out = String::new();
    let mut comment = |text: &str| {
        out.push_str("# ");
        out.push_str(text);
        out.push('\n');
    };
    comment("closed-form small-signal report");
    comment("plain SI units unless the key names one; gains in dB where marked");

    let mut kv = |key: &str, value: String| {
        out.push_str(key);
        out.push('=');
        out.push_str(&value);
        out.push('\n');
    };

    kv("Av_dB", sig(gain.av_db));
    kv("Av_linear", sig(gain.av));
    kv("stage1_gm1R1", sig(gain.stage1));
    kv("stage2_gm5R2", sig(gain.stage2));
    kv("R1_Ohm", sig(gain.r1));
    kv("R2_Ohm", sig(gain.r2));
    kv("C1_F", sig(caps.c1));
    kv("C2_F", sig(caps.c2));
    kv("C1_overridden", u8::from(caps.c1_overridden).to_string());
    kv("C2_overridden", u8::from(caps.c2_overridden).to_string());

    kv("Acm_linear", sig(acm));
    kv("Acm_dB", sig(20.0 * acm.abs().log10()));
    kv("CMRR_dB", sig(cmrr));
    kv("PSRR_dB", sig(psrr.psrr_db));
    kv("PSRR_divider", sig(psrr.divider));

    kv("alpha_s", sig(tf.alpha));
    kv("beta_s2", sig(tf.beta));
    kv("p1_Mrad_s", sig(poles.p1.abs() / MRAD));
    kv("p1_simplified_Mrad_s", sig(poles.p1_simplified.abs() / MRAD));
    kv("p2_Mrad_s", sig(poles.p2.abs() / MRAD));
    kv("p1_exact_Mrad_s", sig(poles.exact[0].norm() / MRAD));
    kv("p2_exact_Mrad_s", sig(poles.exact[1].norm() / MRAD));
    kv("z_Mrad_s", sig(tf.z_rad / MRAD));

    kv("stability_lhs", sig(stab.lhs));
    kv("stability_rhs", sig(stab.rhs));
    kv("stability_margin", sig(stab.margin));
    kv("stable", u8::from(stab.stable).to_string());

    kv("GBW_Hz", sig(resp.gbw_hz));
    kv("PM_deg", sig(resp.pm_deg));
    kv("f3dB_Hz", sig(resp.f_3db_hz));

    Ok(out)
}

/// Split report text back into `(key, value)` pairs, skipping comments.
/// The inverse of [`design_report`]'s line format; tests and downstream
/// scripts use it rather than ad-hoc string slicing.
pub fn parse_report(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .filter_map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_report() -> Vec<(String, String)> {
        parse_report(&design_report(&AmpDesign::reference()).unwrap())
    }

    fn value(report: &[(String, String)], key: &str) -> f64 {
        report
            .iter()
            .find(|(k, _)| k == key)
            .unwrap_or_else(|| panic!("report is missing key `{key}`"))
            .1
            .parse()
            .unwrap()
    }

    #[test]
    fn headline_numbers_match_the_hand_analysis() {
        let r = reference_report();
        assert!((value(&r, "Av_dB") - 82.98603853246318).abs() < 1e-6);
        assert!((value(&r, "p1_Mrad_s") - 0.12997068812885733).abs() < 1e-9);
        assert!((value(&r, "p2_Mrad_s") - 83.85092921559797).abs() < 1e-5);
        assert!((value(&r, "z_Mrad_s") - 280.0).abs() < 1e-6);
        assert!((value(&r, "CMRR_dB") - 125.89227122569923).abs() < 1e-6);
        assert!((value(&r, "PSRR_dB") - 82.98603853246318).abs() < 1e-6);
    }

    #[test]
    fn all_three_pole_views_are_present_and_consistent() {
        let r = reference_report();
        let p1 = value(&r, "p1_Mrad_s");
        let p1s = value(&r, "p1_simplified_Mrad_s");
        let p1e = value(&r, "p1_exact_Mrad_s");
        let p2 = value(&r, "p2_Mrad_s");
        let p2e = value(&r, "p2_exact_Mrad_s");
        // The three estimates agree to a fraction of a percent on this
        // design but are not the same number — the report must not collapse
        // them.
        for (a, b) in [(p1, p1e), (p1, p1s), (p2, p2e)] {
            assert!((a - b).abs() / b < 5e-3, "{a} vs {b}");
            assert_ne!(a, b);
        }
    }

    #[test]
    fn stability_block_reflects_the_criterion() {
        let r = reference_report();
        let lhs = value(&r, "stability_lhs");
        let rhs = value(&r, "stability_rhs");
        let margin = value(&r, "stability_margin");
        assert!((lhs - rhs - margin).abs() < 1e-9);
        assert_eq!(value(&r, "stable"), 1.0);
    }

    #[test]
    fn report_is_byte_stable() {
        let a = design_report(&AmpDesign::reference()).unwrap();
        let b = design_report(&AmpDesign::reference()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn report_round_trips_through_its_parser() {
        let text = design_report(&AmpDesign::reference()).unwrap();
        let pairs = parse_report(&text);
        // Every non-comment line is a key=value pair and keys are unique.
        let data_lines = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.is_empty())
            .count();
        assert_eq!(pairs.len(), data_lines);
        let mut keys: Vec<&str> = pairs.iter().map(|(k, _)| k.as_str()).collect();
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), pairs.len(), "duplicate report keys");
        // Values parse as numbers.
        for (k, v) in &pairs {
            assert!(v.parse::<f64>().is_ok(), "`{k}={v}` is not numeric");
        }
    }

    #[test]
    fn gbw_and_margin_come_from_the_sampled_response() {
        let r = reference_report();
        let gbw = value(&r, "GBW_Hz");
        let pm = value(&r, "PM_deg");
        assert!((gbw - 95_482_133.9).abs() / gbw < 1e-3, "{gbw}");
        assert!((pm - 72.937).abs() < 5e-3, "{pm}");
    }
}

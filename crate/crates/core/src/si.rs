//! SI magnitude suffixes and deterministic number formatting.
//!
//! All internal computation is strict SI; suffixes exist only at the parse
//! and print boundaries. The suffix table follows SPICE convention, in
//! particular the classic trap that `m` is milli and `meg` is mega, both
//! case-insensitive.

/// Suffixes ordered so that multi-letter ones are tried before their
/// single-letter prefixes (`meg` before `m`).
const SUFFIXES: [(&str, f64); 9] = [
    ("meg", 1e6),
    ("f", 1e-15),
    ("p", 1e-12),
    ("n", 1e-9),
    ("u", 1e-6),
    ("m", 1e-3),
    ("k", 1e3),
    ("g", 1e9),
    ("t", 1e12),
];

/// Parse a number with an optional SI suffix (`10.95k`, `0.75p`, `5meg`,
/// `1e-6`). Exponent notation and a suffix may be combined (`1e3k`).
/// Returns a plain message; callers wrap it with positional context.
pub fn parse_value(text: &str) -> Result<f64, String> {
    let t = text.trim();
    if t.is_empty() {
        return Err("empty value".into());
    }
    // Longest numeric prefix wins, so `1e-3` stays exponent notation and the
    // suffix only ever matches what the float grammar could not absorb.
    for end in (1..=t.len()).rev() {
        if !t.is_char_boundary(end) {
            continue;
        }
        let (num, rest) = t.split_at(end);
        let Ok(v) = num.parse::<f64>() else { continue };
        if !v.is_finite() {
            return Err(format!("non-finite value `{t}`"));
        }
        // `parse::<f64>` accepts words like "inf" and "nan"; require the
        // numeric part to start like a number.
        if !num.starts_with(|c: char| c.is_ascii_digit() || c == '+' || c == '-' || c == '.') {
            return Err(format!("not a number: `{t}`"));
        }
        if rest.is_empty() {
            return Ok(v);
        }
        let lower = rest.to_ascii_lowercase();
        for (suffix, scale) in SUFFIXES {
            if lower == suffix {
                return Ok(v * scale);
            }
        }
        return Err(format!("unknown unit suffix `{rest}` in `{t}`"));
    }
    Err(format!("not a number: `{t}`"))
}

/// Format with the largest suffix that keeps the mantissa in [1, 1000).
/// The mantissa uses Rust's shortest-roundtrip float printing, so
/// `parse_value(format_si(x))` recovers `x` to better than 12 significant
/// digits (exact except for the single scaling multiply).
pub fn format_si(value: f64) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let exp3 = (value.abs().log10() / 3.0).floor() * 3.0;
    let scale = 10f64.powf(exp3);
    let mantissa = value / scale;
    let suffix = match exp3 as i32 {
        -15 => "f",
        -12 => "p",
        -9 => "n",
        -6 => "u",
        -3 => "m",
        0 => "",
        3 => "k",
        6 => "meg",
        9 => "g",
        12 => "t",
        _ => return format!("{value}"),
    };
    format!("{mantissa}{suffix}")
}

/// Decimal (exponent-free) formatting with at least `sig` significant
/// digits. Used for every CSV and report number so emitted artifacts are
/// byte-stable and precise enough to re-check tolerances from the files.
pub fn format_sig(value: f64, sig: usize) -> String {
    if value.is_nan() {
        return "nan".into();
    }
    if value.is_infinite() {
        return if value > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if value == 0.0 {
        return "0".into();
    }
    let exp10 = value.abs().log10().floor() as i64;
    let decimals = (sig as i64 - 1 - exp10).max(0) as usize;
    format!("{value:.decimals$}")
}

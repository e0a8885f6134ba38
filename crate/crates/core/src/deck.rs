//! Design-deck reader: the text format that feeds the amplifier model.
//!
//! A deck is line-oriented `section.key = value unit` text. `#` starts a
//! comment (full line or trailing). Sections are the nine device roles
//! (`m1`, `m3a`, `m3b`, `m5`, `m7`, `m9a`, `m9b`, `mt1`, `mt2`), the
//! externals (`amp`), and optional mismatch-coefficient overrides
//! (`pelgrom`). Values use the same SI suffixes as netlists; the unit token
//! after the value is *required* and checked against the key, because a
//! silent ohms-for-siemens mixup costs an afternoon.
//!
//! ```text
//! m1.type = pmos
//! m1.gm   = 4.22m S
//! m1.ro   = 10.95k Ohm
//! ...
//! amp.cc  = 0.75p F
//! ```
//!
//! Pair-role devices take `gm` (plus optional `gmb`), `ro`, `w`, `l`, and
//! exactly one of `id` or `vov` — whichever the datasheet row provides; the
//! other is derived through the square law. The two tail sources are pure
//! output resistances: `ro`, `w`, `l` only.

use std::collections::HashMap;

use crate::amp::AmpDesign;
use crate::device::{MosSmallSignal, PelgromParams, Polarity};
use crate::error::{Error, Result};
use crate::si::parse_value;

/// A parsed deck: the design itself plus the mismatch coefficients to use
/// for campaigns over it.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignDeck {
    pub design: AmpDesign,
    pub pelgrom: PelgromParams,
}

const PAIR_ROLES: [&str; 7] = ["m1", "m3a", "m3b", "m5", "m7", "m9a", "m9b"];
const TAIL_ROLES: [&str; 2] = ["mt1", "mt2"];

fn fail(line: u32, message: impl Into<String>) -> Error {
    Error::Deck {
        line,
        message: message.into(),
    }
}

/// One `key = tokens` assignment and where it came from.
struct Entry {
    line: u32,
    tokens: Vec<String>,
}

/// Collected assignments for one section, plus the first line that named it
/// (for diagnostics about the section as a whole).
#[derive(Default)]
struct Section {
    first_line: u32,
    entries: HashMap<String, Entry>,
}

fn collect(text: &str) -> Result<HashMap<String, Section>> {
    let mut sections: HashMap<String, Section> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = (i + 1) as u32;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((lhs, rhs)) = line.split_once('=') else {
            return Err(fail(line_no, "expected `section.key = value`"));
        };
        let Some((section, key)) = lhs.trim().split_once('.') else {
            return Err(fail(
                line_no,
                format!("expected a dotted `section.key` before `=`, got `{}`", lhs.trim()),
            ));
        };
        let section = section.trim().to_ascii_lowercase();
        let key = key.trim().to_ascii_lowercase();
        let tokens: Vec<String> = rhs.split_whitespace().map(str::to_string).collect();
        if tokens.is_empty() {
            return Err(fail(line_no, format!("`{section}.{key}` has no value")));
        }
        let slot = sections.entry(section.clone()).or_default();
        if slot.first_line == 0 {
            slot.first_line = line_no;
        }
        if let Some(prev) = slot.entries.insert(key.clone(), Entry { line: line_no, tokens }) {
            return Err(fail(
                line_no,
                format!("`{section}.{key}` already set on line {}", prev.line),
            ));
        }
    }
    Ok(sections)
}

/// A numeric entry must be exactly `value unit` with the expected unit.
fn numeric(section: &str, key: &str, entry: &Entry, unit: &str) -> Result<f64> {
    let name = format!("{section}.{key}");
    if entry.tokens.len() != 2 {
        return Err(fail(
            entry.line,
            format!(
                "`{name}` must be `value {unit}` (units are required), got {} token(s)",
                entry.tokens.len()
            ),
        ));
    }
    if !entry.tokens[1].eq_ignore_ascii_case(unit) {
        return Err(fail(
            entry.line,
            format!("`{name}` is in {unit}, not `{}`", entry.tokens[1]),
        ));
    }
    parse_value(&entry.tokens[0]).map_err(|e| fail(entry.line, format!("`{name}`: {e}")))
}

struct SectionReader<'a> {
    name: &'a str,
    section: &'a Section,
    used: Vec<String>,
}

impl<'a> SectionReader<'a> {
    fn new(name: &'a str, section: &'a Section) -> Self {
        SectionReader {
            name,
            section,
            used: Vec::new(),
        }
    }

    fn optional(&mut self, key: &str, unit: &str) -> Result<Option<f64>> {
        self.used.push(key.to_string());
        match self.section.entries.get(key) {
            Some(e) => numeric(self.name, key, e, unit).map(Some),
            None => Ok(None),
        }
    }

    fn required(&mut self, key: &str, unit: &str) -> Result<f64> {
        self.optional(key, unit)?.ok_or_else(|| {
            fail(
                self.section.first_line,
                format!("`{}` is missing required key `{key}`", self.name),
            )
        })
    }

    /// Reject keys this section does not understand — typos must not pass
    /// silently.
    fn finish(self) -> Result<()> {
        for (key, entry) in &self.section.entries {
            if !self.used.iter().any(|u| u == key) {
                return Err(fail(
                    entry.line,
                    format!("unknown key `{}.{key}`", self.name),
                ));
            }
        }
        Ok(())
    }
}

fn polarity(name: &str, section: &Section) -> Result<Polarity> {
    let entry = section.entries.get("type").ok_or_else(|| {
        fail(
            section.first_line,
            format!("`{name}` is missing required key `type` (nmos or pmos)"),
        )
    })?;
    if entry.tokens.len() != 1 {
        return Err(fail(
            entry.line,
            format!("`{name}.type` takes a single token, nmos or pmos"),
        ));
    }
    match entry.tokens[0].to_ascii_lowercase().as_str() {
        "nmos" => Ok(Polarity::Nmos),
        "pmos" => Ok(Polarity::Pmos),
        other => Err(fail(
            entry.line,
            format!("`{name}.type` must be nmos or pmos, got `{other}`"),
        )),
    }
}

fn pair_device(name: &str, section: &Section) -> Result<MosSmallSignal> {
    let pol = polarity(name, section)?;
    let mut r = SectionReader::new(name, section);
    r.used.push("type".into());
    let gm = r.required("gm", "S")?;
    let gmb = r.optional("gmb", "S")?.unwrap_or(0.0);
    let ro = r.required("ro", "Ohm")?;
    let w = r.required("w", "um")?;
    let l = r.required("l", "um")?;
    let id = r.optional("id", "A")?;
    let vov = r.optional("vov", "V")?;
    r.finish()?;
    let made = match (id, vov) {
        (Some(id), None) => MosSmallSignal::from_gm_id(name, pol, gm, gmb, ro, w, l, id),
        (None, Some(vov)) => MosSmallSignal::from_gm_vov(name, pol, gm, gmb, ro, w, l, vov),
        (Some(_), Some(_)) => {
            return Err(fail(
                section.first_line,
                format!("`{name}` sets both `id` and `vov`; give exactly one"),
            ))
        }
        (None, None) => {
            return Err(fail(
                section.first_line,
                format!("`{name}` needs a bias point: one of `id` or `vov`"),
            ))
        }
    };
    made.map_err(|e| fail(section.first_line, e.to_string()))
}

fn tail_device(name: &str, section: &Section) -> Result<MosSmallSignal> {
    let pol = polarity(name, section)?;
    let mut r = SectionReader::new(name, section);
    r.used.push("type".into());
    let ro = r.required("ro", "Ohm")?;
    let w = r.required("w", "um")?;
    let l = r.required("l", "um")?;
    // finish() turns any gm/id/vov here into an unknown-key error: tails
    // are output resistances, nothing more.
    r.finish()?;
    MosSmallSignal::from_ro(name, pol, ro, w, l).map_err(|e| fail(section.first_line, e.to_string()))
}

/// Parse and validate a design deck.
pub fn parse_deck(text: &str) -> Result<DesignDeck> {
    let sections = collect(text)?;
    let eof = text.lines().count() as u32;

    for section in sections.keys() {
        let known = section == "amp"
            || section == "pelgrom"
            || PAIR_ROLES.contains(&section.as_str())
            || TAIL_ROLES.contains(&section.as_str());
        if !known {
            let line = sections[section].first_line;
            return Err(fail(line, format!("unknown section `{section}`")));
        }
    }

    let get = |role: &str| -> Result<&Section> {
        sections
            .get(role)
            .ok_or_else(|| fail(eof, format!("deck is missing the `{role}` device")))
    };
    let pair = |role: &str| -> Result<MosSmallSignal> { pair_device(role, get(role)?) };

    let amp = sections
        .get("amp")
        .ok_or_else(|| fail(eof, "deck is missing the `amp` section"))?;
    let mut a = SectionReader::new("amp", amp);
    let cc = a.required("cc", "F")?;
    let cl = a.required("cl", "F")?;
    let supply = a.required("supply", "V")?;
    let c1_override = a.optional("c1_override", "F")?;
    let c2_override = a.optional("c2_override", "F")?;
    a.finish()?;

    let design = AmpDesign {
        input_pair: pair("m1")?,
        load1_diode: pair("m3a")?,
        load1_cross: pair("m3b")?,
        stage2_pair: pair("m5")?,
        cascode: pair("m7")?,
        load2_diode: pair("m9a")?,
        load2_cross: pair("m9b")?,
        tail1: tail_device("mt1", get("mt1")?)?,
        tail2: tail_device("mt2", get("mt2")?)?,
        cc,
        cl,
        supply,
        c1_override,
        c2_override,
    };
    design
        .validate()
        .map_err(|e| fail(amp.first_line, e.to_string()))?;

    let mut pelgrom = PelgromParams::default();
    if let Some(section) = sections.get("pelgrom") {
        let mut p = SectionReader::new("pelgrom", section);
        for (key, unit, slot) in [
            ("avt_nmos", "mV.um", &mut pelgrom.a_vt_nmos_mv_um),
            ("avt_pmos", "mV.um", &mut pelgrom.a_vt_pmos_mv_um),
            ("abeta_nmos", "%.um", &mut pelgrom.a_beta_nmos_pct_um),
            ("abeta_pmos", "%.um", &mut pelgrom.a_beta_pmos_pct_um),
        ] {
            if let Some(v) = p.optional(key, unit)? {
                if v <= 0.0 {
                    let line = section.entries[key].line;
                    return Err(fail(
                        line,
                        format!("`pelgrom.{key}` must be positive (omit the key for the default)"),
                    ));
                }
                *slot = v;
            }
        }
        p.finish()?;
    }

    Ok(DesignDeck { design, pelgrom })
}

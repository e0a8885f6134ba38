//! `pcfamp` — command-line front end for the small-signal workbench.
//!
//! Thin by design: every subcommand reads its inputs, calls one library
//! entry point, and prints or writes the artifact. All diagnostics go to
//! stderr; stdout carries only the requested output. Exit codes:
//!
//! * `0` success
//! * `1` usage error (bad flags or values)
//! * `2` input error (unreadable files, netlist/deck rejections)
//! * `3` numeric failure on well-formed input (singular system,
//!   non-convergent eigensolve, missing unity crossing, latch-up)
//!
//! File outputs are written atomically — temp file in the destination
//! directory, then rename — so a crashed run never leaves a truncated CSV.

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pcfamp_core::deck::{parse_deck, DesignDeck};
use pcfamp_core::mna::{poles_numeric, solve_ac, zeros_numeric, Circuit, ElementKind, NodeId};
use pcfamp_core::montecarlo::{campaign_csv, run_campaign, summary_text, McConfig};
use pcfamp_core::netlist::{elaborate, parse_netlist, Card};
use pcfamp_core::report::design_report;
use pcfamp_core::response::{bode_closed, bode_mna, cl_sweep, log_grid, sweep_csv};
use pcfamp_core::si::{format_sig, parse_value};
use pcfamp_core::Error;

#[derive(Parser)]
#[command(
    name = "pcfamp",
    version,
    about = "Small-signal workbench for a two-stage amplifier with \
             positive capacitive feedback compensation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Parse a flag value that allows SI suffixes (`10.95k`, `0.75p`, `5meg`).
fn si_flag(text: &str) -> Result<f64, String> {
    parse_value(text)
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form design report: gains, node capacitances, rejection
    /// ratios, poles by all three formulas, and the stability criterion.
    Report {
        /// Design deck file.
        #[arg(long)]
        deck: PathBuf,
    },
    /// Frequency-response CSV (freq_hz, mag_db, phase_deg).
    Bode {
        /// Design deck file.
        #[arg(long)]
        deck: PathBuf,
        /// Evaluate the assembled circuit with the numerical engine.
        #[arg(long, conflicts_with = "closed")]
        mna: bool,
        /// Evaluate the closed-form transfer function (the default).
        #[arg(long)]
        closed: bool,
        /// Start frequency in Hz; SI suffixes allowed.
        #[arg(long, value_parser = si_flag, default_value = "1k")]
        fstart: f64,
        /// Stop frequency in Hz; SI suffixes allowed.
        #[arg(long, value_parser = si_flag, default_value = "10g")]
        fstop: f64,
        /// Grid points per decade.
        #[arg(long, default_value_t = 64)]
        ppd: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Numeric poles and zeros of an arbitrary netlist.
    Pz {
        /// Netlist file.
        #[arg(long)]
        netlist: PathBuf,
        /// Input source element; defaults to the netlist's .PZ directive.
        #[arg(long = "in")]
        input: Option<String>,
        /// Output node pair `n+,n-` (0 is ground); defaults to the
        /// netlist's .PZ directive.
        #[arg(long = "out-nodes", value_name = "N+,N-")]
        out_nodes: Option<String>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gain-bandwidth, phase margin, and criterion margin across loads.
    SweepCl {
        /// Design deck file.
        #[arg(long)]
        deck: PathBuf,
        /// Load capacitances in farads, comma separated; SI suffixes
        /// allowed (`5p,10p,20p`).
        #[arg(long, value_delimiter = ',', value_parser = si_flag, required = true)]
        cl: Vec<f64>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo mismatch campaign over the deck's Pelgrom coefficients.
    Mc {
        /// Design deck file.
        #[arg(long)]
        deck: PathBuf,
        /// Number of runs.
        #[arg(long)]
        runs: usize,
        /// Campaign seed; the same seed reproduces byte-identical output.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the per-run CSV here; the summary then goes to stdout.
        /// Without --out the CSV itself goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single-frequency solve of a raw netlist: every node voltage and
    /// each voltage source's branch current.
    Ac {
        /// Netlist file.
        #[arg(long)]
        netlist: PathBuf,
        /// Analysis frequency in Hz; SI suffixes allowed.
        #[arg(long, value_parser = si_flag)]
        freq: f64,
    },
}

/// A failed subcommand: message for stderr plus the exit code family.
struct Failure {
    message: String,
    code: u8,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            message: message.into(),
            code: 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_numeric() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            // --help/--version are requests, not mistakes.
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print_stdout(&e.to_string());
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read `{}`: {e}", path.display())))
}

fn load_deck(path: &Path) -> Result<DesignDeck, Failure> {
    let text = read_file(path)?;
    parse_deck(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_netlist(path: &Path) -> Result<(pcfamp_core::netlist::NetlistAst, Circuit), Failure> {
    let text = read_file(path)?;
    let ast =
        parse_netlist(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let (circuit, warnings) =
        elaborate(&ast).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    for w in warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok((ast, circuit))
}

/// Write through a temp file in the same directory so the destination is
/// never observable half-written.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let context = |e: &dyn fmt::Display| format!("cannot write `{}`: {e}", path.display());
    let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| Failure::input(context(&e)))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| Failure::input(context(&e)))?;
    tmp.persist(path).map_err(|e| Failure::input(context(&e)))?;
    Ok(())
}

/// Print to stdout, treating a vanished reader (`pcfamp bode | head`) as a
/// normal end of output rather than a panic.
fn print_stdout(contents: &str) {
    if let Err(e) = std::io::stdout().write_all(contents.as_bytes()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: cannot write to stdout: {e}");
        std::process::exit(2);
    }
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), Failure> {
    match out {
        Some(path) => write_atomic(path, contents),
        None => {
            print_stdout(contents);
            Ok(())
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Report { deck } => {
            let deck = load_deck(&deck)?;
            print_stdout(&design_report(&deck.design)?);
            Ok(())
        }
        Command::Bode {
            deck,
            mna,
            closed: _,
            fstart,
            fstop,
            ppd,
            out,
        } => {
            let deck = load_deck(&deck)?;
            let freqs = log_grid(fstart, fstop, ppd)?;
            let resp = if mna {
                let circuit = deck
                    .design
                    .build_half_circuit(pcfamp_core::amp::HalfCircuitMode::Dm)?;
                let output = circuit.find_node("out").expect("half circuit names `out`");
                bode_mna(&circuit, "vin", (output, circuit.ground()), &freqs)?
            } else {
                bode_closed(&deck.design.closed_form_tf()?, &freqs)
            };
            emit(out.as_deref(), &resp.csv())
        }
        Command::Pz {
            netlist,
            input,
            out_nodes,
            out,
        } => {
            let (ast, circuit) = load_netlist(&netlist)?;
            let (source, node_pos, node_neg) = pz_request(&ast, input, out_nodes)?;
            let pos = lookup_node(&circuit, &node_pos)?;
            let neg = lookup_node(&circuit, &node_neg)?;
            let mut poles = poles_numeric(&circuit)?;
            let mut zeros = zeros_numeric(&circuit, &source, (pos, neg))?;
            let key = |c: &pcfamp_core::Complex64| (c.norm(), c.im, c.re);
            poles.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
            zeros.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
            let mut csv = String::from("kind,re_rad_s,im_rad_s\n");
            for (kind, list) in [("pole", &poles), ("zero", &zeros)] {
                for c in list {
                    csv.push_str(&format!(
                        "{kind},{},{}\n",
                        format_sig(c.re, 10),
                        format_sig(c.im, 10)
                    ));
                }
            }
            emit(out.as_deref(), &csv)
        }
        Command::SweepCl { deck, cl, out } => {
            let deck = load_deck(&deck)?;
            let rows = cl_sweep(&deck.design, &cl)?;
            emit(out.as_deref(), &sweep_csv(&rows))
        }
        Command::Mc {
            deck,
            runs,
            seed,
            out,
        } => {
            let deck = load_deck(&deck)?;
            let config = McConfig {
                runs,
                seed,
                pelgrom: deck.pelgrom,
                design: deck.design,
            };
            let (run_rows, summary) = run_campaign(&config)?;
            let csv = campaign_csv(&run_rows);
            match out {
                Some(path) => {
                    write_atomic(&path, &csv)?;
                    print_stdout(&summary_text(&summary));
                    Ok(())
                }
                None => {
                    print_stdout(&csv);
                    Ok(())
                }
            }
        }
        Command::Ac { netlist, freq } => {
            if !(freq >= 0.0) || !freq.is_finite() {
                return Err(Failure::input(format!(
                    "analysis frequency must be finite and >= 0, got {freq}"
                )));
            }
            let (_, circuit) = load_netlist(&netlist)?;
            let omega = 2.0 * std::f64::consts::PI * freq;
            let sol = solve_ac(&circuit, omega)?;
            let mut text = format!("# f = {} Hz\nquantity,re,im,mag,phase_deg\n", format_sig(freq, 10));
            let mut row = |label: String, v: pcfamp_core::Complex64| {
                text.push_str(&format!(
                    "{label},{},{},{},{}\n",
                    format_sig(v.re, 10),
                    format_sig(v.im, 10),
                    format_sig(v.norm(), 10),
                    format_sig(v.arg().to_degrees(), 10)
                ));
            };
            for node in circuit.nodes().filter(|n| !n.is_ground()) {
                row(format!("V({})", circuit.node_name(node)), sol.voltage(node));
            }
            for element in circuit.elements() {
                if matches!(element.kind, ElementKind::VoltageSource { .. }) {
                    let i = sol
                        .source_current(&element.name)
                        .expect("every voltage source has a branch current");
                    row(format!("I({})", element.name), i);
                }
            }
            print_stdout(&text);
            Ok(())
        }
    }
}

/// Resolve the pole/zero request from flags, falling back to the netlist's
/// own `.PZ` directive for whichever part the flags leave out.
fn pz_request(
    ast: &pcfamp_core::netlist::NetlistAst,
    input: Option<String>,
    out_nodes: Option<String>,
) -> Result<(String, String, String), Failure> {
    let directive = ast.cards.iter().find_map(|c| match &c.card {
        Card::PoleZero {
            source,
            node_pos,
            node_neg,
        } => Some((source.clone(), node_pos.clone(), node_neg.clone())),
        _ => None,
    });
    let source = match input {
        Some(s) => s.to_ascii_uppercase(),
        None => match &directive {
            Some((s, _, _)) => s.clone(),
            None => {
                return Err(Failure::input(
                    "no --in given and the netlist has no .PZ directive",
                ))
            }
        },
    };
    let (pos, neg) = match out_nodes {
        Some(pair) => {
            let mut parts = pair.split(',').map(str::trim);
            match (parts.next(), parts.next(), parts.next()) {
                (Some(p), Some(n), None) if !p.is_empty() && !n.is_empty() => {
                    (p.to_ascii_uppercase(), n.to_ascii_uppercase())
                }
                _ => {
                    return Err(Failure::input(format!(
                        "--out-nodes wants exactly `n+,n-`, got `{pair}`"
                    )))
                }
            }
        }
        None => match &directive {
            Some((_, p, n)) => (p.clone(), n.clone()),
            None => {
                return Err(Failure::input(
                    "no --out-nodes given and the netlist has no .PZ directive",
                ))
            }
        },
    };
    Ok((source, pos, neg))
}

fn lookup_node(circuit: &Circuit, name: &str) -> Result<NodeId, Failure> {
    circuit
        .find_node(name)
        .ok_or_else(|| Failure::input(format!("netlist has no node named `{name}`")))
}

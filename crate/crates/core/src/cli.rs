//! Command-line front end.
//!
//! Every command writes CSV files plus a `<command>.manifest` sidecar of
//! `key=value` lines into the output directory (`--out`, else
//! `$FAULTY_POLAR_OUT`, else the working directory). Floats are written with
//! 17 significant digits so a CSV can be regenerated byte for byte from its
//! manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    default_rate_grid, fer_proxy, fer_vs_rate_sweep, protection_sweep, rate_loss_sweep, rate_to_k,
    staircase, SweepResult, Values,
};
use crate::construction::{pe_counts, CodeConstruction, DEFAULT_MAX_EXPONENT};
use crate::montecarlo::{run_simulation, SimConfig};
use crate::transfer::{Correlation, FaultSpec, Probability};
use crate::Error;

pub const OUT_DIR_ENV: &str = "FAULTY_POLAR_OUT";

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_RESOURCE: u8 = 3;
pub const EXIT_INVARIANT: u8 = 4;
const EXIT_IO: u8 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "faulty-polar",
    version,
    about = "Polar codes on the BEC under faulty successive cancellation decoding"
)]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = ".")]
    pub out: PathBuf,

    /// Worker threads; 0 picks one per core. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Print the resolved manifest and exit without computing.
    #[arg(long, global = true)]
    pub manifest_only: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute reliabilities and the frozen set of one code.
    Construct(ConstructArgs),
    /// Monte Carlo frame/bit erasure rates of one code.
    Simulate(SimulateArgs),
    /// Analytic figure sweeps.
    #[command(subcommand)]
    Sweep(SweepCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Shared,
    IndependentTree,
}

impl From<Mode> for Correlation {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Shared => Correlation::Shared,
            Mode::IndependentTree => Correlation::IndependentTree,
        }
    }
}

/// Protection layout. Without either flag every transition is faulty.
#[derive(Debug, Clone, Args)]
#[group(multiple = false)]
pub struct Protection {
    /// Protected PE levels counted from the root (0..=n+1).
    #[arg(long)]
    pub np: Option<usize>,
    /// Faulty transitions counted from the leaves.
    #[arg(long)]
    pub nu: Option<usize>,
}

impl Protection {
    fn apply(&self, fault: FaultSpec, n: usize) -> Result<FaultSpec, CliError> {
        match (self.np, self.nu) {
            (Some(np), _) => Ok(fault.with_protected_levels(n, np)?),
            (None, Some(nu)) => Ok(fault.with_unprotected_steps(nu)),
            (None, None) => Ok(fault),
        }
    }

    fn describe(&self, lines: &mut Vec<(String, String)>) {
        if let Some(np) = self.np {
            lines.push(("np".into(), np.to_string()));
        }
        if let Some(nu) = self.nu {
            lines.push(("nu".into(), nu.to_string()));
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ConstructArgs {
    /// Block length exponent; N = 2^n.
    #[arg(long)]
    pub n: usize,
    /// Channel erasure probability.
    #[arg(long, value_parser = parse_probability)]
    pub p: Probability,
    /// Decoder fault probability.
    #[arg(long, value_parser = parse_probability)]
    pub delta: Probability,
    #[command(flatten)]
    pub protection: Protection,
    /// Target rate; k = round(rate * N).
    #[arg(long)]
    pub rate: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Block length exponent; N = 2^n.
    #[arg(long)]
    pub n: usize,
    /// Channel erasure probability, also used for code design.
    #[arg(long, value_parser = parse_probability)]
    pub p: Probability,
    /// Decoder fault probability.
    #[arg(long, value_parser = parse_probability)]
    pub delta: Probability,
    #[command(flatten)]
    pub protection: Protection,
    /// Target rate; k = round(rate * N).
    #[arg(long)]
    pub rate: f64,
    /// Frames to simulate (at most 10^7).
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Master seed; each frame draws from its own substream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Shared)]
    pub mode: Mode,
    /// Feed true bits forward and write per-index erasure counts.
    #[arg(long)]
    pub genie: bool,
}

#[derive(Debug, Subcommand)]
pub enum SweepCommand {
    /// FER proxy against rate, one CSV per block length.
    FerRate(FerRateArgs),
    /// Sorted reliabilities, one CSV per block length.
    Staircase(StaircaseArgs),
    /// Rate loss against unprotected transitions, one CSV per delta.
    RateLoss(RateLossArgs),
    /// FER proxy against rate for several protected level counts.
    Protection(ProtectionArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FerRateArgs {
    /// Exponents, e.g. `10..12` or `10,12`.
    #[arg(long, value_parser = parse_index_list)]
    pub n: IndexList,
    #[arg(long, value_parser = parse_probability, default_value = "0.5")]
    pub p: Probability,
    #[arg(long, value_parser = parse_probability)]
    pub delta: Probability,
    #[command(flatten)]
    pub protection: Protection,
    /// Comma-separated rates; defaults to 0.05, 0.10, ..., 0.95.
    #[arg(long, value_parser = parse_float_list)]
    pub rates: Option<FloatList>,
}

#[derive(Debug, Clone, Args)]
pub struct StaircaseArgs {
    #[arg(long, value_parser = parse_index_list)]
    pub n: IndexList,
    #[arg(long, value_parser = parse_probability, default_value = "0.5")]
    pub p: Probability,
    #[arg(long, value_parser = parse_probability)]
    pub delta: Probability,
    #[command(flatten)]
    pub protection: Protection,
}

#[derive(Debug, Clone, Args)]
pub struct RateLossArgs {
    #[arg(long, value_parser = parse_probability, default_value = "0.5")]
    pub p: Probability,
    #[arg(long, value_parser = parse_float_list)]
    pub deltas: FloatList,
    #[arg(long, value_parser = parse_index_list)]
    pub nu: IndexList,
}

#[derive(Debug, Clone, Args)]
pub struct ProtectionArgs {
    #[arg(long, value_parser = parse_index_list)]
    pub n: IndexList,
    #[arg(long, value_parser = parse_probability, default_value = "0.5")]
    pub p: Probability,
    #[arg(long, value_parser = parse_probability)]
    pub delta: Probability,
    /// Protected level counts, e.g. `0..5`.
    #[arg(long, value_parser = parse_index_list, conflicts_with = "np_offset")]
    pub np: Option<IndexList>,
    /// Protect `n - K` levels for each exponent `n`.
    #[arg(long, required_unless_present = "np")]
    pub np_offset: Option<usize>,
    #[arg(long, value_parser = parse_float_list)]
    pub rates: Option<FloatList>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexList(pub Vec<usize>);

#[derive(Debug, Clone, PartialEq)]
pub struct FloatList(pub Vec<f64>);

fn parse_probability(s: &str) -> Result<Probability, String> {
    let v: f64 = s.trim().parse().map_err(|e| format!("{s:?}: {e}"))?;
    Probability::new(v).map_err(|e| e.to_string())
}

/// Comma-separated items, each an integer or an inclusive range `a..b`.
pub fn parse_index_list(s: &str) -> Result<IndexList, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((a, b)) = item.split_once("..") {
            let a: usize = a.trim().parse().map_err(|e| format!("{item:?}: {e}"))?;
            let b: usize = b.trim().parse().map_err(|e| format!("{item:?}: {e}"))?;
            if a > b {
                return Err(format!("empty range {item:?}"));
            }
            out.extend(a..=b);
        } else {
            out.push(item.parse().map_err(|e| format!("{item:?}: {e}"))?);
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(IndexList(out))
}

pub fn parse_float_list(s: &str) -> Result<FloatList, String> {
    let values = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err("empty list".into());
    }
    Ok(FloatList(values))
}

/// 17 significant digits: enough to round-trip any double.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_tag(v: f64) -> String {
    format!("{v:e}")
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Resource(String),
    Invariant(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Resource(_) => EXIT_RESOURCE,
            CliError::Invariant(_) => EXIT_INVARIANT,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Resource(m) => write!(f, "resource limit: {m}"),
            CliError::Invariant(m) => write!(f, "internal invariant violated: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Resource(m) => CliError::Resource(m),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Invariant(what()))
    }
}

/// A table queued for writing.
struct Table {
    file: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(file: impl Into<String>, header: &[&str]) -> Self {
        Table {
            file: file.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(dir.join(&self.file))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parameter record written next to the CSVs.
struct Manifest {
    command: String,
    params: Vec<(String, String)>,
}

impl Manifest {
    fn new(command: &str) -> Self {
        Manifest {
            command: command.to_string(),
            params: Vec::new(),
        }
    }

    fn set(&mut self, key: &str, value: impl ToString) {
        self.params.push((key.to_string(), value.to_string()));
    }

    fn render(&self, threads: usize, outputs: &[String]) -> String {
        let mut s = String::new();
        s.push_str(&format!("command={}\n", self.command));
        s.push_str(&format!("version={}\n", env!("CARGO_PKG_VERSION")));
        for (k, v) in &self.params {
            s.push_str(&format!("{k}={v}\n"));
        }
        s.push_str(&format!("threads={threads}\n"));
        s.push_str(&format!("outputs={}\n", outputs.join(",")));
        s
    }

    fn file_name(&self) -> String {
        format!("{}.manifest", self.command.replace(' ', "_"))
    }
}

fn join_usize(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn join_float(v: &[f64]) -> String {
    v.iter().map(|x| fmt_tag(*x)).collect::<Vec<_>>().join(",")
}

fn check_exponent(n: usize) -> Result<(), CliError> {
    if n > DEFAULT_MAX_EXPONENT {
        return Err(CliError::Resource(format!(
            "n = {n} exceeds the supported maximum of {DEFAULT_MAX_EXPONENT}"
        )));
    }
    Ok(())
}

fn sweep_table(file: String, result: &SweepResult, columns: &[(&str, &str)]) -> Table {
    let mut header = vec![result.axis_name.as_str()];
    header.extend(columns.iter().map(|(_, h)| *h));
    let mut table = Table::new(file, &header);
    for (row, &x) in result.axis.iter().enumerate() {
        let mut cells = vec![if result.axis_name == "n_u" {
            (x as u64).to_string()
        } else {
            fmt_float(x)
        }];
        for (name, _) in columns {
            let cell = match result.series(name).expect("series present") {
                Values::Real(v) => fmt_float(v[row]),
                Values::Count(v) => v[row].to_string(),
            };
            cells.push(cell);
        }
        table.row(cells);
    }
    table
}

fn rates_or_default(rates: &Option<FloatList>) -> Vec<f64> {
    rates
        .as_ref()
        .map(|r| r.0.clone())
        .unwrap_or_else(default_rate_grid)
}

type Plan = (
    Manifest,
    Box<dyn FnOnce() -> Result<Vec<Table>, CliError> + Send>,
);

fn plan_construct(args: ConstructArgs) -> Result<Plan, CliError> {
    check_exponent(args.n)?;
    let mut m = Manifest::new("construct");
    m.set("n", args.n);
    m.set("p", fmt_float(args.p.get()));
    m.set("delta", fmt_float(args.delta.get()));
    args.protection.describe(&mut m.params);
    m.set("rate", fmt_float(args.rate));
    let fault = args
        .protection
        .apply(FaultSpec::unprotected(args.delta), args.n)?;
    let k = rate_to_k(args.rate, 1usize << args.n)?;
    m.set("k", k);
    m.set("faulty_steps", fault.faulty_steps(args.n));

    let run = move || {
        let code = CodeConstruction::design(args.n, args.p, fault, k)?;
        let z = code.reliabilities();
        ensure(
            code.info_set().len() + code.frozen_set().len() == z.len(),
            || "information and frozen sets do not partition the indices".into(),
        )?;
        let worst_info = code
            .info_set()
            .iter()
            .map(|&i| z[i])
            .fold(f64::MIN, f64::max);
        let best_frozen = code
            .frozen_set()
            .iter()
            .map(|&i| z[i])
            .fold(f64::MAX, f64::min);
        ensure(worst_info <= best_frozen, || {
            format!("information Z {worst_info} exceeds frozen Z {best_frozen}")
        })?;

        let mut rel = Table::new("reliabilities.csv", &["index", "z"]);
        let mut frozen = Table::new("code.csv", &["index", "frozen"]);
        for (i, &zi) in z.iter().enumerate() {
            rel.row(vec![(i + 1).to_string(), fmt_float(zi)]);
            let f = if code.is_frozen(i) { "1" } else { "0" };
            frozen.row(vec![(i + 1).to_string(), f.to_string()]);
        }
        Ok(vec![rel, frozen])
    };
    Ok((m, Box::new(run)))
}

fn plan_simulate(args: SimulateArgs) -> Result<Plan, CliError> {
    check_exponent(args.n)?;
    let mut m = Manifest::new("simulate");
    m.set("n", args.n);
    m.set("p", fmt_float(args.p.get()));
    m.set("delta", fmt_float(args.delta.get()));
    args.protection.describe(&mut m.params);
    m.set("rate", fmt_float(args.rate));
    m.set("trials", args.trials);
    m.set("seed", args.seed);
    m.set("mode", Correlation::from(args.mode).as_str());
    m.set("genie", args.genie);
    let fault = args
        .protection
        .apply(FaultSpec::unprotected(args.delta), args.n)?
        .with_correlation(args.mode.into());
    let k = rate_to_k(args.rate, 1usize << args.n)?;
    m.set("k", k);
    m.set("faulty_steps", fault.faulty_steps(args.n));

    // Fail on resource limits before anything is computed.
    let nodes = if fault.correlation == Correlation::Shared {
        (args.n as u128) << args.n
    } else {
        let len = 1u128 << args.n;
        len * (len - 1)
    };
    if args.trials > crate::montecarlo::MAX_TRIALS
        || args.trials as u128 * nodes > crate::montecarlo::MAX_NODE_UPDATES
    {
        return Err(CliError::Resource(format!(
            "{} trials at n = {} exceed the simulation budget",
            args.trials, args.n
        )));
    }

    let run = move || {
        let code = CodeConstruction::design(args.n, args.p, fault, k)?;
        let config = SimConfig::new(code, args.p, fault)
            .trials(args.trials)
            .seed(args.seed)
            .genie(args.genie);
        let out = run_simulation(&config)?;
        ensure(out.ber <= out.fer, || {
            format!("ber {} exceeds fer {}", out.ber, out.fer)
        })?;
        let proxy = fer_proxy(&config.code).raw;

        let mut sim = Table::new(
            "sim.csv",
            &[
                "frames",
                "frame_erasures",
                "fer",
                "ber",
                "fer_lo95",
                "fer_hi95",
                "proxy_sum",
            ],
        );
        sim.row(vec![
            out.frames.to_string(),
            out.frame_erasures.to_string(),
            fmt_float(out.fer),
            fmt_float(out.ber),
            fmt_float(out.fer_ci95.0),
            fmt_float(out.fer_ci95.1),
            fmt_float(proxy),
        ]);
        let mut tables = vec![sim];
        if let Some(per_bit) = &out.per_bit_erasures {
            let mut t = Table::new(
                "perbit.csv",
                &["index", "erasure_count", "empirical_rate", "z"],
            );
            for (i, (&count, &z)) in per_bit.iter().zip(config.code.reliabilities()).enumerate() {
                t.row(vec![
                    (i + 1).to_string(),
                    count.to_string(),
                    fmt_float(count as f64 / out.frames as f64),
                    fmt_float(z),
                ]);
            }
            tables.push(t);
        }
        Ok(tables)
    };
    Ok((m, Box::new(run)))
}

const RATE_COLUMNS: [(&str, &str); 4] = [
    ("k", "k"),
    ("realized_rate", "realized_rate"),
    ("proxy", "proxy"),
    ("proxy_clamped", "proxy_clamped"),
];

fn plan_sweep(cmd: SweepCommand) -> Result<Plan, CliError> {
    match cmd {
        SweepCommand::FerRate(args) => {
            let rates = rates_or_default(&args.rates);
            let mut m = Manifest::new("sweep fer-rate");
            m.set("n", join_usize(&args.n.0));
            m.set("p", fmt_float(args.p.get()));
            m.set("delta", fmt_float(args.delta.get()));
            args.protection.describe(&mut m.params);
            m.set("rates", join_float(&rates));
            let mut jobs = Vec::new();
            for &n in &args.n.0 {
                check_exponent(n)?;
                let fault = args
                    .protection
                    .apply(FaultSpec::unprotected(args.delta), n)?;
                for &r in &rates {
                    rate_to_k(r, 1usize << n)?;
                }
                jobs.push((n, fault));
            }
            let p = args.p;
            let run = move || {
                jobs.into_iter()
                    .map(|(n, fault)| {
                        let s = fer_vs_rate_sweep(n, p, &fault, &rates)?;
                        Ok(sweep_table(format!("fer_rate_n{n}.csv"), &s, &RATE_COLUMNS))
                    })
                    .collect()
            };
            Ok((m, Box::new(run)))
        }
        SweepCommand::Staircase(args) => {
            let mut m = Manifest::new("sweep staircase");
            m.set("n", join_usize(&args.n.0));
            m.set("p", fmt_float(args.p.get()));
            m.set("delta", fmt_float(args.delta.get()));
            args.protection.describe(&mut m.params);
            let mut jobs = Vec::new();
            for &n in &args.n.0 {
                check_exponent(n)?;
                jobs.push((
                    n,
                    args.protection
                        .apply(FaultSpec::unprotected(args.delta), n)?,
                ));
            }
            let p = args.p;
            let run = move || {
                jobs.into_iter()
                    .map(|(n, fault)| {
                        let s = staircase(n, p, &fault)?;
                        let z = s.real("z").expect("z series");
                        ensure(z.windows(2).all(|w| w[0] <= w[1]), || {
                            "staircase is not sorted".into()
                        })?;
                        Ok(sweep_table(
                            format!("staircase_n{n}.csv"),
                            &s,
                            &[("z", "z")],
                        ))
                    })
                    .collect()
            };
            Ok((m, Box::new(run)))
        }
        SweepCommand::RateLoss(args) => {
            let deltas = args
                .deltas
                .0
                .iter()
                .map(|&d| Probability::new(d))
                .collect::<Result<Vec<_>, _>>()?;
            if args.p.get() >= 1.0 {
                return Err(CliError::Usage("rate loss needs p < 1".into()));
            }
            let mut m = Manifest::new("sweep rate-loss");
            m.set("p", fmt_float(args.p.get()));
            m.set("deltas", join_float(&args.deltas.0));
            m.set("nu", join_usize(&args.nu.0));
            let p = args.p;
            let nu = args.nu.0;
            let run = move || {
                let s = rate_loss_sweep(p, &deltas, &nu)?;
                let mut tables = Vec::new();
                for d in &deltas {
                    let tag = fmt_tag(d.get());
                    let loss = s.real(&format!("loss[delta={tag}]")).expect("loss series");
                    let pct = s
                        .real(&format!("percent[delta={tag}]"))
                        .expect("percent series");
                    ensure(d.get() == 0.0 || loss.iter().all(|&l| l >= 0.0), || {
                        "negative rate loss".into()
                    })?;
                    let mut t = Table::new(
                        format!("rate_loss_delta_{tag}.csv"),
                        &["n_u", "delta", "rate_loss", "percent_of_capacity"],
                    );
                    for (i, &n_u) in nu.iter().enumerate() {
                        t.row(vec![
                            n_u.to_string(),
                            fmt_float(d.get()),
                            fmt_float(loss[i]),
                            fmt_float(pct[i]),
                        ]);
                    }
                    tables.push(t);
                }
                Ok(tables)
            };
            Ok((m, Box::new(run)))
        }
        SweepCommand::Protection(args) => {
            let rates = rates_or_default(&args.rates);
            let mut m = Manifest::new("sweep protection");
            m.set("n", join_usize(&args.n.0));
            m.set("p", fmt_float(args.p.get()));
            m.set("delta", fmt_float(args.delta.get()));
            if let Some(np) = &args.np {
                m.set("np", join_usize(&np.0));
            }
            if let Some(off) = args.np_offset {
                m.set("np_offset", off);
            }
            m.set("rates", join_float(&rates));

            let mut jobs = Vec::new();
            for &n in &args.n.0 {
                check_exponent(n)?;
                let levels = match (&args.np, args.np_offset) {
                    (Some(list), _) => list.0.clone(),
                    (None, Some(off)) => {
                        if off > n {
                            return Err(CliError::Usage(format!(
                                "np offset {off} exceeds n = {n}"
                            )));
                        }
                        vec![n - off]
                    }
                    (None, None) => unreachable!("clap requires --np or --np-offset"),
                };
                for &np in &levels {
                    pe_counts(n, np)?;
                }
                for &r in &rates {
                    rate_to_k(r, 1usize << n)?;
                }
                jobs.push((n, levels));
            }
            let (p, delta) = (args.p, args.delta);
            let run = move || {
                let mut tables = Vec::new();
                let mut pes = Table::new(
                    "protection_pe_counts.csv",
                    &[
                        "n",
                        "np",
                        "faulty_steps",
                        "protected_pes",
                        "total_pes",
                        "fraction",
                    ],
                );
                for (n, levels) in jobs {
                    let s = protection_sweep(n, p, delta, &levels, &rates)?;
                    let ks = match s.series("k") {
                        Some(Values::Count(k)) => k.clone(),
                        _ => return Err(CliError::Invariant("missing k series".into())),
                    };
                    for &np in &levels {
                        let proxy = s.real(&format!("np={np}")).expect("protection series");
                        let mut t = Table::new(
                            format!("protection_n{n}_np{np}.csv"),
                            &["rate", "k", "realized_rate", "proxy", "proxy_clamped"],
                        );
                        let len = (1u64 << n) as f64;
                        for (i, &r) in rates.iter().enumerate() {
                            t.row(vec![
                                fmt_float(r),
                                ks[i].to_string(),
                                fmt_float(ks[i] as f64 / len),
                                fmt_float(proxy[i]),
                                fmt_float(proxy[i].min(1.0)),
                            ]);
                        }
                        tables.push(t);
                        let c = pe_counts(n, np)?;
                        let steps = FaultSpec::unprotected(delta)
                            .with_protected_levels(n, np)?
                            .faulty_steps(n);
                        pes.row(vec![
                            n.to_string(),
                            np.to_string(),
                            steps.to_string(),
                            c.protected.to_string(),
                            c.total.to_string(),
                            fmt_float(c.fraction),
                        ]);
                    }
                }
                tables.push(pes);
                Ok(tables)
            };
            Ok((m, Box::new(run)))
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (manifest, run) = match cli.command {
        Command::Construct(a) => plan_construct(a)?,
        Command::Simulate(a) => plan_simulate(a)?,
        Command::Sweep(c) => plan_sweep(c)?,
    };

    if cli.manifest_only {
        print!("{}", manifest.render(cli.threads, &[]));
        return Ok(());
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Resource(e.to_string()))?;
    let tables = pool.install(run)?;

    fs::create_dir_all(&cli.out)?;
    let mut outputs = Vec::with_capacity(tables.len());
    for t in &tables {
        t.write(&cli.out)?;
        outputs.push(t.file.clone());
    }
    let mut f = fs::File::create(cli.out.join(manifest.file_name()))?;
    f.write_all(manifest.render(cli.threads, &outputs).as_bytes())?;
    for o in &outputs {
        println!("{}", cli.out.join(o).display());
    }
    Ok(())
}

/// Parses `std::env::args` and runs; the return value is the process exit code.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("faulty-polar: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

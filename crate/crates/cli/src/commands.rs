use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use ictrl::canon::{build_conversion, verify_canonical, ConversionResult};
use ictrl::intermit::{build_intermittent, check_period, suggest_period, IntermittentResult};
use ictrl::qrt::{QuantParams, TraceTable};
use ictrl::ratmath::{format_rational, parse_rational};
use ictrl::sim::{
    compare_variants, reference_loop, sweep_settings, ComparisonReport, LoopRun, LoopVariant,
    PlantSpec,
};
use ictrl::sysobs::{is_observable, kalman_reduce, ControllerSpec};

use crate::sweep::SweepSpec;

#[derive(Debug, Parser)]
#[command(
    name = "ictrl",
    version,
    about = "Integer-arithmetic controller conversion and simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a controller so its state and output matrices are integral.
    Convert(ConvertArgs),
    /// Build the lifted controller for re-encryption every k steps.
    Intermittent(IntermittentArgs),
    /// Check whether a period keeps distinct eigenvalues distinct.
    CheckPeriod(CheckPeriodArgs),
    /// Run the closed loop and write traces plus a comparison report.
    Simulate(SimulateArgs),
    /// Print a human-readable summary of any document.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct InOut {
    /// Input document.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Output file (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    #[command(flatten)]
    io: InOut,
    /// Drop the unobservable part first.
    #[arg(long)]
    reduce: bool,
}

#[derive(Debug, Args)]
struct IntermittentArgs {
    #[command(flatten)]
    io: InOut,
    /// Re-encryption period (with --suggest-k, the smallest period tried).
    #[arg(short = 'k', value_name = "K")]
    k: Option<u32>,
    /// Use the smallest valid period at or above -k (default 2).
    #[arg(long)]
    suggest_k: bool,
    /// Drop the unobservable part first.
    #[arg(long)]
    reduce: bool,
}

#[derive(Debug, Args)]
struct CheckPeriodArgs {
    #[command(flatten)]
    io: InOut,
    #[arg(short = 'k', value_name = "K")]
    k: u32,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Controller document.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Output directory for `report.json` and the trace CSV files.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Plant document (the built-in reference plant when omitted).
    #[arg(long, value_name = "FILE")]
    plant: Option<PathBuf>,
    /// Also run the intermittent runtime with this period.
    #[arg(short = 'k', value_name = "K")]
    k: Option<u32>,
    /// Quantization step.
    #[arg(long, value_name = "RATIONAL", default_value = "1/1000")]
    r: String,
    /// Scale divisor, 0 < s <= 1.
    #[arg(long, value_name = "RATIONAL", default_value = "1/1000")]
    s: String,
    #[arg(long, default_value_t = 100)]
    horizon: usize,
    /// Modulus width for the sandbox replay (default: observed range plus one bit).
    #[arg(long, value_name = "BITS")]
    modulus_bits: Option<u64>,
    /// Decade sweep, e.g. `r,s:decades=3`; runs settings concurrently.
    #[arg(long, value_name = "SPEC")]
    sweep: Option<SweepSpec>,
    /// Drop the unobservable part first.
    #[arg(long)]
    reduce: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    io: InOut,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ictrl::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_validation() => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> String {
        let kind = match self {
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "Io",
            CliError::Usage(_) => "Usage",
        };
        json!({ "error": kind, "message": self.to_string() }).to_string()
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => write_text(p, &format!("{text}\n")),
        None => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                }),
                _ => Ok(()),
            }
        }
    }
}

fn load_spec(path: &Path, reduce: bool) -> CliResult<ControllerSpec> {
    let spec = ControllerSpec::from_json(&read(path)?)?;
    Ok(if reduce { kalman_reduce(&spec) } else { spec })
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Convert(a) => convert(a),
        Command::Intermittent(a) => intermittent(a),
        Command::CheckPeriod(a) => check(a),
        Command::Simulate(a) => simulate(a),
        Command::Report(a) => report(a),
    }
}

fn convert(a: ConvertArgs) -> CliResult<()> {
    let spec = load_spec(&a.io.input, a.reduce)?;
    let c = build_conversion(&spec)?;
    emit(a.io.out.as_deref(), &c.to_json())
}

fn intermittent(a: IntermittentArgs) -> CliResult<()> {
    let spec = load_spec(&a.io.input, a.reduce)?;
    let k = match (a.k, a.suggest_k) {
        (k, true) => suggest_period(spec.f(), k.unwrap_or(2))?,
        (Some(k), false) => k,
        (None, false) => {
            return Err(CliError::Usage(
                "either -k or --suggest-k is required".into(),
            ))
        }
    };
    let ir = build_intermittent(&spec, k)?;
    emit(a.io.out.as_deref(), &ir.to_json())
}

fn check(a: CheckPeriodArgs) -> CliResult<()> {
    let spec = ControllerSpec::from_json(&read(&a.io.input)?)?;
    let pc = check_period(spec.f(), a.k)?;
    emit(
        a.io.out.as_deref(),
        &serde_json::to_string_pretty(&pc).expect("serializable"),
    )
}

fn quant_params(r: &str, s: &str) -> CliResult<QuantParams> {
    Ok(QuantParams::new(parse_rational(r)?, parse_rational(s)?)?)
}

fn file_stem(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for ch in label.chars() {
        match ch {
            'a'..='z' | 'A'..='Z' | '0'..='9' | '-' => out.push(ch),
            '/' => out.push('_'),
            _ if !out.ends_with('.') => out.push('.'),
            _ => {}
        }
    }
    out.trim_end_matches('.').to_string()
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    let spec = load_spec(&a.input, a.reduce)?;
    let plant = match &a.plant {
        Some(p) => PlantSpec::from_json(&read(p)?)?,
        None => reference_loop().0,
    };
    plant.check_dual(&spec)?;
    let base = quant_params(&a.r, &a.s)?;
    let settings = match &a.sweep {
        Some(sw) => sweep_settings(&base, sw.decades, sw.refine_r, sw.refine_s),
        None => vec![base],
    };
    let variants_for = |q: &QuantParams| {
        let mut v = vec![LoopVariant::Converted(q.clone())];
        if let Some(k) = a.k {
            v.push(LoopVariant::Intermittent(k, q.clone()));
        }
        v
    };

    let results: Vec<ictrl::Result<(ComparisonReport, Vec<LoopRun>)>> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = settings
                .iter()
                .map(|q| {
                    let (plant, spec, variants) = (&plant, &spec, variants_for(q));
                    scope.spawn(move || {
                        compare_variants(plant, spec, &variants, a.horizon, a.modulus_bits)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("simulation thread panicked"))
                .collect()
        });

    // Settings are already ordered coarse to fine; keep that order.
    let mut merged = ComparisonReport {
        horizon: a.horizon,
        variants: Vec::new(),
    };
    let mut runs: Vec<LoopRun> = Vec::new();
    for (i, res) in results.into_iter().enumerate() {
        let (rep, mut rs) = res?;
        let skip = usize::from(i > 0);
        merged.variants.extend(rep.variants.into_iter().skip(skip));
        if i > 0 {
            rs.remove(0);
        }
        runs.extend(rs);
    }

    fs::create_dir_all(&a.out).map_err(|source| CliError::Io {
        path: a.out.clone(),
        source,
    })?;
    for run in &runs {
        let path = a
            .out
            .join(format!("trace-{}.csv", file_stem(&run.variant.label())));
        let mut buf = Vec::new();
        if run.records.is_empty() {
            loop_table(run).write(&mut buf)?;
        } else {
            TraceTable::from_records(&run.records).write(&mut buf)?;
        }
        fs::write(&path, buf).map_err(|source| CliError::Io { path, source })?;
    }
    write_text(
        &a.out.join("report.json"),
        &format!("{}\n", merged.to_json()),
    )
}

/// Trace table for an exact run: plant outputs and controller outputs.
fn loop_table(run: &LoopRun) -> TraceTable {
    let mut table = TraceTable::default();
    table.header.push("t".into());
    if let (Some(y), Some(u)) = (run.y.first(), run.u.first()) {
        table
            .header
            .extend((0..y.len()).flat_map(|i| [format!("y[{i}]"), format!("y[{i}]_f")]));
        table
            .header
            .extend((0..u.len()).flat_map(|i| [format!("u[{i}]"), format!("u[{i}]_f")]));
    }
    for (t, (y, u)) in run.y.iter().zip(&run.u).enumerate() {
        let mut row = vec![t.to_string()];
        for v in y.iter().chain(u) {
            row.push(format_rational(v));
            row.push(ictrl::ratmath::rational::to_f64(v).to_string());
        }
        table.rows.push(row);
    }
    table
}

fn report(a: ReportArgs) -> CliResult<()> {
    let text = read(&a.io.input)?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| ictrl::Error::Parse(e.to_string()))?;
    let summary = match doc.get("kind").and_then(Value::as_str) {
        Some("conversion") => conversion_summary(&ConversionResult::from_json(&text)?),
        Some("intermittent") => intermittent_summary(&IntermittentResult::from_json(&text)?),
        Some("comparison") => comparison_summary(&ComparisonReport::from_json(&text)?),
        Some(other) => {
            return Err(ictrl::Error::Parse(format!("unknown document kind `{other}`")).into())
        }
        None if doc.get("A").is_some() => plant_summary(&PlantSpec::from_json(&text)?),
        None => controller_summary(&ControllerSpec::from_json(&text)?)?,
    };
    emit(a.io.out.as_deref(), summary.trim_end())
}

fn controller_summary(spec: &ControllerSpec) -> CliResult<String> {
    let mut s = String::new();
    let _ = writeln!(s, "controller {}", spec.name().unwrap_or("(unnamed)"));
    let _ = writeln!(
        s,
        "  states n = {}, inputs p = {}, outputs m = {}",
        spec.n(),
        spec.p(),
        spec.m()
    );
    let observable = is_observable(spec.f(), spec.h())?;
    let _ = writeln!(s, "  observable: {observable}");
    let _ = writeln!(s, "  integer state matrix: {}", spec.f().is_integer());
    if observable {
        let c = build_conversion(spec)?;
        let verdict = verify_canonical(&c, spec);
        let _ = writeln!(s, "  conversion block sizes: {:?}", c.block_sizes);
        let _ = writeln!(s, "  conversion verified: {}", verdict.passed());
        let _ = writeln!(
            s,
            "  smallest valid period >= 2: {}",
            suggest_period(spec.f(), 2)?
        );
    }
    Ok(s)
}

fn plant_summary(plant: &PlantSpec) -> String {
    format!(
        "plant\n  states {}, inputs {}, outputs {}\n",
        plant.a().rows(),
        plant.b().cols(),
        plant.c().rows()
    )
}

fn conversion_summary(c: &ConversionResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "conversion");
    let _ = writeln!(s, "  n = {}, m = {}, p = {}", c.n(), c.m(), c.p());
    let _ = writeln!(s, "  block sizes: {:?}", c.block_sizes);
    let _ = writeln!(s, "  state matrix 0/1: {}", c.a_bar.is_binary());
    let _ = writeln!(s, "  output matrix 0/1: {}", c.c_bar.is_binary());
    let _ = writeln!(s, "  A_bar = {}", c.a_bar);
    let _ = writeln!(s, "  C_bar = {}", c.c_bar);
    let _ = writeln!(s, "  T_u = {}", c.t_u);
    s
}

fn intermittent_summary(ir: &IntermittentResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "intermittent controller, period k = {}", ir.k);
    let _ = writeln!(s, "  n = {}, m = {}, p = {}", ir.n(), ir.m(), ir.p());
    let _ = writeln!(s, "  state matrix integral: {}", ir.a_bar.is_integer());
    let _ = writeln!(s, "  state matrix 0/1: {}", ir.a_bar.is_binary());
    let _ = writeln!(s, "  A_bar = {}", ir.a_bar);
    s
}

fn comparison_summary(r: &ComparisonReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "closed-loop comparison over {} steps", r.horizon);
    let _ = writeln!(
        s,
        "  {:<44} {:>12} {:>10} {:>6} {:>8} {:>5}",
        "variant", "max error", "mults/step", "bits", "reencs", "wrap"
    );
    for v in &r.variants {
        let bits = v.required_bits.map_or("-".into(), |b| b.to_string());
        let wrap = v.wraparound.map_or("-".into(), |w| w.to_string());
        let _ = writeln!(
            s,
            "  {:<44} {:>12.3e} {:>10.2} {:>6} {:>8} {:>5}",
            v.variant, v.max_error_f, v.mults_per_step, bits, v.reenc_count, wrap
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_are_file_safe() {
        assert_eq!(
            file_stem("converted(r=1/10,s=1/10)"),
            "converted.r.1_10.s.1_10"
        );
        assert_eq!(file_stem("exact"), "exact");
    }
}

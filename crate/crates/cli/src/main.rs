use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use gswcert::certificate::{build_certificate, Certificate};
use gswcert::lower_bounds::{alpha_grid, envelope, huber_simulation, quad_run};
use gswcert::numerics::{configure, DEFAULT_PRECISION_BITS, DEFAULT_TOLERANCE_EXPONENT};
use gswcert::reduced_solver::{face_sign_scan, Boundary};
use gswcert::suite::{core_checks, extended_checks, CheckOutcome};
use gswcert::{par, solve_root, Error, PrecisionConfig, Scalar};

#[derive(Parser)]
#[command(name = "gswcert", version, about = "Build and verify the low-rank dual certificate for gradient descent")]
struct Cli {
    /// Working precision in bits.
    #[arg(long, global = true, env = "GSWCERT_PRECISION", default_value_t = DEFAULT_PRECISION_BITS)]
    precision: u32,
    /// Residuals must be at most 2^-T times their scale.
    #[arg(long = "tolerance-exp", global = true, default_value_t = DEFAULT_TOLERANCE_EXPONENT)]
    tolerance_exp: u32,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print rho_N, the step alpha_* and the rate r_*.
    Root {
        #[arg(long)]
        n: usize,
    },
    /// Build the certificate and emit its record.
    Build {
        #[arg(long)]
        n: usize,
        #[arg(long, conflicts_with = "csv")]
        json: bool,
        #[arg(long)]
        csv: bool,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run the check suite; exit 0 iff every check passes.
    Verify {
        #[arg(long)]
        n: usize,
        /// Also run random-point identities, alternating sums, face scans,
        /// the dual identity and the minimax closure.
        #[arg(long)]
        all_identities: bool,
    },
    /// One row per horizon in `[n-min, n-max]`.
    Table {
        #[arg(long)]
        n_min: usize,
        #[arg(long)]
        n_max: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        out: OutArg,
    },
    /// Quadratic and Huber values and their envelope on a step grid.
    Envelope {
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        alpha_min: String,
        #[arg(long, allow_hyphen_values = true)]
        alpha_max: String,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        out: OutArg,
    },
    /// Gradient descent from x_0 = 1 on a one-dimensional instance.
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        alpha: String,
        #[arg(long, value_enum)]
        function: Function,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        out: OutArg,
    },
    /// Sample the boundary faces of the simplex and report sign violations.
    Faces {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args)]
struct OutArg {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Function {
    Quadratic,
    Huber,
}

/// Serialized certificate; every real is a decimal string.
#[derive(Serialize, Deserialize)]
struct CertificateRecord {
    n: usize,
    precision_bits: u32,
    tolerance_exponent: u32,
    rho: String,
    alpha: String,
    rate: String,
    d: Vec<String>,
    c: Vec<String>,
    a: Vec<String>,
    b: Vec<String>,
    #[serde(rename = "residual_max_over_R")]
    residual_max_over_r: String,
    margins_min: String,
    checks: BTreeMap<String, bool>,
}

#[derive(Serialize)]
struct TableRow {
    n: usize,
    rho: String,
    alpha: String,
    rate: String,
    #[serde(rename = "residual_max_over_R")]
    residual_max_over_r: String,
    all_checks_pass: bool,
}

#[derive(Serialize)]
struct EnvelopeRow {
    alpha: String,
    quad: String,
    huber: Option<String>,
    envelope: String,
    rate: String,
}

#[derive(Serialize)]
struct SimulationRecord {
    function: &'static str,
    n: usize,
    alpha: String,
    delta: Option<String>,
    iterates: Vec<String>,
    final_gap: String,
}

enum CliError {
    Usage(String),
    Failed(Vec<String>),
    Core(Error),
    Io(std::io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> CliError {
        match e {
            Error::HorizonBelowThree(_) | Error::InvalidConfig(_) | Error::InvalidArgument(_) | Error::Parse(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Core(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Io(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn dec(x: &Scalar) -> String {
    x.to_decimal_string()
}

fn decs(xs: &[Scalar]) -> Vec<String> {
    xs.iter().map(dec).collect()
}

fn emit(out: &OutArg, text: &str) -> CliResult<()> {
    match &out.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn record(cert: &Certificate, cfg: &PrecisionConfig, checks: &[CheckOutcome]) -> CertificateRecord {
    CertificateRecord {
        n: cert.n(),
        precision_bits: cfg.precision_bits(),
        tolerance_exponent: cfg.tolerance_exponent(),
        rho: dec(&cert.params.rho),
        alpha: dec(&cert.params.alpha),
        rate: dec(&cert.params.rate),
        d: decs(&cert.d),
        c: decs(&cert.c),
        a: decs(&cert.a),
        b: decs(&cert.b),
        residual_max_over_r: dec(&cert.residual_max_over_r()),
        margins_min: dec(&cert.margins_min()),
        checks: checks.iter().map(|c| (c.name.to_string(), c.passed)).collect(),
    }
}

fn record_csv(rec: &CertificateRecord) -> String {
    let mut rows = Vec::new();
    let scalar = |rows: &mut Vec<Vec<String>>, field: &str, value: String| {
        rows.push(vec![field.to_string(), String::new(), value]);
    };
    scalar(&mut rows, "n", rec.n.to_string());
    scalar(&mut rows, "precision_bits", rec.precision_bits.to_string());
    scalar(&mut rows, "tolerance_exponent", rec.tolerance_exponent.to_string());
    scalar(&mut rows, "rho", rec.rho.clone());
    scalar(&mut rows, "alpha", rec.alpha.clone());
    scalar(&mut rows, "rate", rec.rate.clone());
    for (field, values) in [("d", &rec.d), ("c", &rec.c), ("a", &rec.a), ("b", &rec.b)] {
        for (i, v) in values.iter().enumerate() {
            rows.push(vec![field.to_string(), i.to_string(), v.clone()]);
        }
    }
    scalar(&mut rows, "residual_max_over_R", rec.residual_max_over_r.clone());
    scalar(&mut rows, "margins_min", rec.margins_min.clone());
    for (name, passed) in &rec.checks {
        rows.push(vec!["check".into(), name.clone(), passed.to_string()]);
    }
    csv_text(&["field", "index", "value"], &rows)
}

fn failures(checks: &[CheckOutcome]) -> Vec<String> {
    checks.iter().filter(|c| !c.passed).map(|c| c.name.to_string()).collect()
}

fn fail_if_any(names: Vec<String>) -> CliResult<()> {
    if names.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(names))
    }
}

fn cmd_root(n: usize, cfg: &PrecisionConfig) -> CliResult<()> {
    let params = solve_root(n, cfg)?;
    let mut s = String::new();
    writeln!(s, "n = {n}").unwrap();
    writeln!(s, "rho = {}", dec(&params.rho)).unwrap();
    writeln!(s, "alpha = {}", dec(&params.alpha)).unwrap();
    writeln!(s, "rate = {}", dec(&params.rate)).unwrap();
    print!("{s}");
    Ok(())
}

fn cmd_build(n: usize, csv: bool, out: &OutArg, cfg: &PrecisionConfig) -> CliResult<()> {
    let cert = build_certificate(n, cfg)?;
    let checks = core_checks(&cert, cfg);
    let rec = record(&cert, cfg, &checks);
    let text = if csv { record_csv(&rec) } else { to_json(&rec) };
    emit(out, &text)?;
    fail_if_any(failures(&checks))
}

fn cmd_verify(n: usize, all: bool, cfg: &PrecisionConfig) -> CliResult<()> {
    let cert = build_certificate(n, cfg)?;
    let mut checks = core_checks(&cert, cfg);
    if all {
        checks.extend(extended_checks(&cert, cfg));
    }
    let mut s = String::new();
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        writeln!(s, "{tag} {:<34} {}", c.name, c.detail).unwrap();
    }
    print!("{s}");
    fail_if_any(failures(&checks))
}

fn table_row(n: usize, cfg: &PrecisionConfig) -> CliResult<TableRow> {
    let cert = build_certificate(n, cfg)?;
    let checks = core_checks(&cert, cfg);
    Ok(TableRow {
        n,
        rho: dec(&cert.params.rho),
        alpha: dec(&cert.params.alpha),
        rate: dec(&cert.params.rate),
        residual_max_over_r: dec(&cert.residual_max_over_r()),
        all_checks_pass: checks.iter().all(|c| c.passed),
    })
}

fn cmd_table(n_min: usize, n_max: usize, format: Format, out: &OutArg, cfg: &PrecisionConfig) -> CliResult<()> {
    if n_min < 3 {
        return Err(Error::HorizonBelowThree(n_min).into());
    }
    if n_max < n_min {
        return Err(CliError::Usage(format!("empty range: n-max {n_max} < n-min {n_min}")));
    }
    let rows = par::map_range(n_min..n_max + 1, |n| table_row(n, cfg))
        .into_iter()
        .collect::<CliResult<Vec<_>>>()?;
    let text = match format {
        Format::Json => to_json(&rows),
        Format::Csv => csv_text(
            &["n", "rho", "alpha", "rate", "residual_max_over_R", "all_checks_pass"],
            &rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        r.rho.clone(),
                        r.alpha.clone(),
                        r.rate.clone(),
                        r.residual_max_over_r.clone(),
                        r.all_checks_pass.to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
    };
    emit(out, &text)?;
    fail_if_any(rows.iter().filter(|r| !r.all_checks_pass).map(|r| format!("table row N = {}", r.n)).collect())
}

fn cmd_envelope(
    n: usize,
    lo: &str,
    hi: &str,
    points: usize,
    format: Format,
    out: &OutArg,
    cfg: &PrecisionConfig,
) -> CliResult<()> {
    let params = solve_root(n, cfg)?;
    let lo = cfg.parse(lo)?;
    let hi = cfg.parse(hi)?;
    if hi < lo {
        return Err(CliError::Usage("alpha-max is below alpha-min".into()));
    }
    let rate = dec(&params.rate);
    let rows: Vec<EnvelopeRow> = alpha_grid(&lo, &hi, points, None)
        .iter()
        .map(|alpha| {
            let p = envelope(n, alpha);
            EnvelopeRow {
                alpha: dec(&p.alpha),
                quad: dec(&p.quad_value),
                huber: p.huber_value.as_ref().map(dec),
                envelope: dec(&p.envelope),
                rate: rate.clone(),
            }
        })
        .collect();
    let text = match format {
        Format::Json => to_json(&rows),
        Format::Csv => csv_text(
            &["alpha", "quad", "huber", "envelope", "rate"],
            &rows
                .iter()
                .map(|r| {
                    vec![
                        r.alpha.clone(),
                        r.quad.clone(),
                        r.huber.clone().unwrap_or_default(),
                        r.envelope.clone(),
                        r.rate.clone(),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
    };
    emit(out, &text)
}

fn cmd_simulate(
    n: usize,
    alpha: &str,
    function: Function,
    format: Format,
    out: &OutArg,
    cfg: &PrecisionConfig,
) -> CliResult<()> {
    if n < 3 {
        return Err(Error::HorizonBelowThree(n).into());
    }
    let alpha = cfg.parse(alpha)?;
    let run = match function {
        Function::Quadratic => quad_run(n, &alpha),
        Function::Huber => huber_simulation(n, &alpha)?,
    };
    let rec = SimulationRecord {
        function: run.function.name(),
        n,
        alpha: dec(&run.alpha),
        delta: run.delta.as_ref().map(dec),
        iterates: decs(&run.iterates),
        final_gap: dec(&run.final_gap),
    };
    let text = match format {
        Format::Json => to_json(&rec),
        Format::Csv => {
            let mut rows: Vec<Vec<String>> = rec
                .iterates
                .iter()
                .enumerate()
                .map(|(k, x)| vec![k.to_string(), x.clone(), String::new()])
                .collect();
            rows.push(vec!["final".into(), String::new(), rec.final_gap.clone()]);
            csv_text(&["k", "x", "final_gap"], &rows)
        }
    };
    emit(out, &text)
}

fn cmd_faces(n: usize, samples: usize, seed: u64, cfg: &PrecisionConfig) -> CliResult<()> {
    let report = face_sign_scan(n, samples, seed, cfg)?;
    let mut s = String::new();
    writeln!(s, "n = {n}, samples per face = {samples}, seed = {seed}").unwrap();
    for f in &report.faces {
        writeln!(
            s,
            "face d_{} = 0: max eps/R = {:.6e}, scalar bound margin = {:.6e}",
            f.face,
            f.max_eps_over_r.to_f64(),
            f.scalar_margin.to_f64()
        )
        .unwrap();
    }
    writeln!(s, "outer face: min sum eps/R = {:.6e}", report.outer_min_sum_over_r.to_f64()).unwrap();
    writeln!(s, "violations = {}", report.violations.len()).unwrap();
    for v in &report.violations {
        let at = match v.boundary {
            Boundary::Face(i) => format!("face {i}"),
            Boundary::Outer => "outer face".to_string(),
        };
        writeln!(s, "  {at}: {} claim, value {}", v.claim, dec(&v.value)).unwrap();
    }
    print!("{s}");
    fail_if_any(if report.passed() { Vec::new() } else { vec!["face_signs".into()] })
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = configure(cli.precision, cli.tolerance_exp)?;
    match cli.command {
        Command::Root { n } => cmd_root(n, &cfg),
        Command::Build { n, json: _, csv, out } => cmd_build(n, csv, &out, &cfg),
        Command::Verify { n, all_identities } => cmd_verify(n, all_identities, &cfg),
        Command::Table { n_min, n_max, format, out } => cmd_table(n_min, n_max, format, &out, &cfg),
        Command::Envelope {
            n,
            alpha_min,
            alpha_max,
            points,
            format,
            out,
        } => cmd_envelope(n, &alpha_min, &alpha_max, points, format, &out, &cfg),
        Command::Simulate {
            n,
            alpha,
            function,
            format,
            out,
        } => cmd_simulate(n, &alpha, function, format, &out, &cfg),
        Command::Faces { n, samples, seed } => cmd_faces(n, samples, seed, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failed(names)) => {
            eprintln!("failed checks: {}", names.join(", "));
            ExitCode::from(1)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

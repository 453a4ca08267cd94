use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use indexmap::IndexMap;
use serde::Serialize;

use rff_core::channel::{self, ChannelConfig, ChannelReport, NoiseModel};
use rff_core::coupling::{self, build_coupled_basis, CensusRow, CouplingMatrix};
use rff_core::encoder::{self, build_q_set, EncodedOperator, EntropyReport, QuditPovm, QuditState};
use rff_core::linalg::{self, CMatrix};
use rff_core::reference::{self, ReferenceCase};
use rff_core::spinsys::SpinRegister;
use rff_core::verify::{self, ReferenceOverride, Suite, VerifyOptions, VerifyReport};
use rff_core::{io as rio, Error};

/// Rotation-invariant logical qudits from spin-1/2 constituents.
#[derive(Parser, Debug)]
#[command(name = "rff", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Tolerance for verification checks.
    #[arg(long, global = true, default_value_t = linalg::DEFAULT_TOL)]
    tol: f64,
    /// Largest number of constituents accepted (2..=14).
    #[arg(long, global = true, env = "RFF_MAX_N", default_value_t = 12)]
    max_n: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sector multiplicities, checked against diagonalization of J².
    Census {
        #[arg(long)]
        n: usize,
    },
    /// Kets of the second-largest sector.
    Basis {
        #[arg(long)]
        n: usize,
        /// `fourier`, `conjugate-fourier`, or a JSON matrix file.
        #[arg(long, default_value = "fourier")]
        coupling: String,
    },
    /// Encode a logical state and optionally a POVM.
    Encode {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        povm: Option<PathBuf>,
        #[arg(long, default_value = "fourier")]
        coupling: String,
    },
    /// Run invariant suites.
    Verify {
        /// Inclusive range `a..b`.
        #[arg(long, default_value = "3..6")]
        n_range: String,
        #[arg(long, default_value = "all")]
        suite: String,
        /// Replace a reference matrix, `CASE:NAME=PATH`.
        #[arg(long = "override-reference", value_name = "CASE:NAME=PATH")]
        overrides: Vec<String>,
    },
    /// Send an encoded state through collective noise.
    Channel {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_enum, default_value_t = NoiseArg::Haar)]
        noise: NoiseArg,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Rotation axis `x,y,z` for fixed noise.
        #[arg(long, default_value = "0,0,1")]
        axis: String,
        /// Rotation angle for fixed noise.
        #[arg(long, default_value_t = 0.0)]
        angle: f64,
        /// Half-width of the dephasing angle distribution.
        #[arg(long, default_value_t = std::f64::consts::PI)]
        width: f64,
    },
    /// Dump a reference case.
    Reference {
        #[arg(long)]
        case: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum NoiseArg {
    Haar,
    Fixed,
    ZDephasing,
}

/// Failure with its exit code: 1 for a failed check, 2 for bad input.
#[derive(Debug)]
enum Failure {
    Check(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Consistency { .. } | Error::Numerical(_) => Failure::Check(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("rff: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("rff: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let g = &cli.global;
    if !(2..=14).contains(&g.max_n) {
        return Err(Failure::Usage(format!("--max-n must lie in 2..=14, got {}", g.max_n)));
    }
    if !(g.tol > 0.0) {
        return Err(Failure::Usage(format!("--tol must be positive, got {}", g.tol)));
    }
    linalg::set_max_dim(1usize << g.max_n);
    let out = Output {
        format: g.format,
        path: g.output.clone(),
    };
    match &cli.command {
        Command::Census { n } => cmd_census(g, &out, *n),
        Command::Basis { n, coupling } => cmd_basis(g, &out, *n, coupling),
        Command::Encode {
            n,
            state,
            povm,
            coupling,
        } => cmd_encode(g, &out, *n, state, povm.as_deref(), coupling),
        Command::Verify {
            n_range,
            suite,
            overrides,
        } => cmd_verify(g, &out, n_range, suite, overrides),
        Command::Channel {
            n,
            state,
            noise,
            trials,
            axis,
            angle,
            width,
        } => {
            let noise = match noise {
                NoiseArg::Haar => NoiseModel::Haar,
                NoiseArg::Fixed => NoiseModel::Fixed {
                    axis: parse_axis(axis)?,
                    angle: *angle,
                },
                NoiseArg::ZDephasing => NoiseModel::ZDephasing { width: *width },
            };
            cmd_channel(g, &out, *n, state, noise, *trials)
        }
        Command::Reference { case } => cmd_reference(&out, case),
    }
}

fn check_n(g: &Global, n: usize, min: usize) -> CliResult<SpinRegister> {
    if n < min || n > g.max_n {
        return Err(Failure::Usage(format!(
            "--n must lie in {min}..={}, got {n}",
            g.max_n
        )));
    }
    Ok(SpinRegister::new(n)?)
}

fn parse_axis(s: &str) -> CliResult<[f64; 3]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Failure::Usage(format!("axis {s:?} is not three comma-separated numbers")))?;
    let [x, y, z]: [f64; 3] = parts
        .try_into()
        .map_err(|_| Failure::Usage(format!("axis {s:?} needs exactly three components")))?;
    let norm = (x * x + y * y + z * z).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Failure::Usage(format!("axis {s:?} has no direction")));
    }
    Ok([x / norm, y / norm, z / norm])
}

fn parse_range(s: &str, max_n: usize) -> CliResult<(usize, usize)> {
    let bad = || Failure::Usage(format!("--n-range {s:?} is not of the form a..b"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a < 2 || b > max_n || a > b {
        return Err(Failure::Usage(format!(
            "--n-range {s:?} must satisfy 2 ≤ a ≤ b ≤ {max_n}"
        )));
    }
    Ok((a, b))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {what} {}: {e}", path.display())))?;
    rio::from_json_str(&text).map_err(|e| Failure::Usage(format!("{what} {}: {e}", path.display())))
}

fn load_coupling(spec: &str, n: usize) -> CliResult<CouplingMatrix> {
    match spec {
        "fourier" => Ok(CouplingMatrix::fourier(n)?),
        "conjugate-fourier" => Ok(CouplingMatrix::conjugate_fourier(n)?),
        path => {
            let m: CMatrix = read_json(Path::new(path), "coupling matrix")?;
            if m.rows() != n {
                return Err(Failure::Usage(format!(
                    "coupling matrix is {}x{}, expected {n}x{n}",
                    m.rows(),
                    m.cols()
                )));
            }
            Ok(CouplingMatrix::from_matrix(m)?)
        }
    }
}

struct Output {
    format: Format,
    path: Option<PathBuf>,
}

impl Output {
    fn sink(&self) -> CliResult<Box<dyn Write>> {
        Ok(match &self.path {
            Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
            None => Box::new(io::BufWriter::new(io::stdout().lock())),
        })
    }

    fn json<T: Serialize>(&self, value: &T) -> CliResult<()> {
        let mut w = self.sink()?;
        w.write_all(rio::to_json_string(value)?.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    fn csv(&self, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(self.sink()?);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn emit<T: Serialize>(&self, value: &T, header: &[&str], rows: impl FnOnce() -> Vec<Vec<String>>) -> CliResult<()> {
        match self.format {
            Format::Json => self.json(value),
            Format::Csv => self.csv(header, rows()),
        }
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Long-form rows `prefix…, row, col, re, im` for the non-zero entries of `m`.
fn matrix_rows(prefix: &[String], m: &CMatrix) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let z = m[(i, j)];
            if z.re != 0.0 || z.im != 0.0 {
                let mut r = prefix.to_vec();
                r.extend([i.to_string(), j.to_string(), num(z.re), num(z.im)]);
                rows.push(r);
            }
        }
    }
    rows
}

#[derive(Serialize)]
struct CensusOut {
    n: usize,
    total_dimension: u64,
    agrees: bool,
    sectors: Vec<CensusRow>,
}

fn cmd_census(g: &Global, out: &Output, n: usize) -> CliResult<()> {
    let reg = check_n(g, n, 2)?;
    let rows = coupling::census_table(reg)?;
    let agrees = rows.iter().all(|r| r.agrees);
    let report = CensusOut {
        n,
        total_dimension: rows.iter().map(|r| r.spec.multiplicity * r.spec.dimension).sum(),
        agrees,
        sectors: rows,
    };
    out.emit(&report, &["j", "multiplicity", "dimension", "eigen_count", "agrees"], || {
        report
            .sectors
            .iter()
            .map(|r| {
                vec![
                    r.spec.j.to_string(),
                    r.spec.multiplicity.to_string(),
                    r.spec.dimension.to_string(),
                    r.eigen_count.to_string(),
                    r.agrees.to_string(),
                ]
            })
            .collect()
    })?;
    if !agrees {
        return Err(Failure::Check("multiplicity formula disagrees with diagonalization".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct BasisOut<'a> {
    n: usize,
    d: usize,
    j2: coupling::HalfInt,
    coupling: &'a CouplingMatrix,
    orthonormality_residual: f64,
    j_squared_residual: f64,
    jz_residual: f64,
    /// `"lambda=λ"` → `"m2=m"` → amplitudes.
    kets: IndexMap<String, IndexMap<String, Vec<[f64; 2]>>>,
}

fn cmd_basis(g: &Global, out: &Output, n: usize, coupling_spec: &str) -> CliResult<()> {
    let reg = check_n(g, n, 3)?;
    let coupling = load_coupling(coupling_spec, n)?;
    let basis = build_coupled_basis(reg, &coupling)?;
    let (j2_res, jz_res) = basis.sector_residuals()?;
    let mut kets: IndexMap<String, IndexMap<String, Vec<[f64; 2]>>> = IndexMap::new();
    for (m2, lambda, v) in basis.iter() {
        kets.entry(format!("lambda={lambda}"))
            .or_default()
            .insert(format!("m2={m2}"), v.data().iter().map(|z| [z.re, z.im]).collect());
    }
    let report = BasisOut {
        n,
        d: basis.d(),
        j2: basis.j2(),
        coupling: &coupling,
        orthonormality_residual: basis.gram_residual(),
        j_squared_residual: j2_res,
        jz_residual: jz_res,
        kets,
    };
    out.emit(&report, &["lambda", "m2", "index", "label", "re", "im"], || {
        let mut rows = Vec::new();
        for (m2, lambda, v) in basis.iter() {
            for (i, z) in v.data().iter().enumerate() {
                if z.re != 0.0 || z.im != 0.0 {
                    rows.push(vec![
                        format!("lambda={lambda}"),
                        format!("m2={m2}"),
                        i.to_string(),
                        reg.label_of(i),
                        num(z.re),
                        num(z.im),
                    ]);
                }
            }
        }
        rows
    })?;
    let worst = report.orthonormality_residual.max(j2_res).max(jz_res);
    if worst > g.tol {
        return Err(Failure::Check(format!("basis residual {worst:e} exceeds --tol {:e}", g.tol)));
    }
    Ok(())
}

#[derive(Serialize)]
struct BornRow {
    outcome: usize,
    logical: f64,
    encoded: f64,
    deviation: f64,
    agrees: bool,
}

#[derive(Serialize)]
struct EncodeOut {
    state: EncodedOperator,
    entropy: EntropyReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    povm: Option<Vec<EncodedOperator>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    born_table: Option<Vec<BornRow>>,
}

fn cmd_encode(
    g: &Global,
    out: &Output,
    n: usize,
    state: &Path,
    povm: Option<&Path>,
    coupling_spec: &str,
) -> CliResult<()> {
    let reg = check_n(g, n, 3)?;
    let rho: QuditState = read_json(state, "state")?;
    let povm: Option<QuditPovm> = povm.map(|p| read_json(p, "POVM")).transpose()?;
    let coupling = load_coupling(coupling_spec, n)?;
    let qs = build_q_set(&build_coupled_basis(reg, &coupling)?)?;
    let enc = encoder::encode_state(&qs, &rho)?;
    let entropy = encoder::encoded_entropy_check(&rho, &enc)?;
    let (els, table) = match &povm {
        Some(p) => {
            let els = encoder::encode_povm(&qs, p)?;
            let logical = p.probabilities(&rho)?;
            let rows = els
                .iter()
                .zip(logical)
                .enumerate()
                .map(|(k, (e, lp))| {
                    let ep = encoder::encoded_probability(&enc, e)?;
                    Ok(BornRow {
                        outcome: k + 1,
                        logical: lp,
                        encoded: ep,
                        deviation: (ep - lp).abs(),
                        agrees: (ep - lp).abs() <= g.tol,
                    })
                })
                .collect::<rff_core::Result<Vec<_>>>()?;
            (Some(els), Some(rows))
        }
        None => (None, None),
    };
    let report = EncodeOut {
        state: enc,
        entropy,
        povm: els,
        born_table: table,
    };
    match (&report.born_table, out.format) {
        (Some(rows), Format::Csv) => out.csv(
            &["outcome", "logical", "encoded", "deviation", "agrees"],
            rows.iter().map(|r| {
                vec![
                    r.outcome.to_string(),
                    num(r.logical),
                    num(r.encoded),
                    num(r.deviation),
                    r.agrees.to_string(),
                ]
            }),
        )?,
        (None, Format::Csv) => out.csv(&["row", "col", "re", "im"], matrix_rows(&[], &report.state.payload))?,
        (_, Format::Json) => out.json(&report)?,
    }
    if let Some(rows) = &report.born_table {
        if let Some(bad) = rows.iter().find(|r| !r.agrees) {
            return Err(Failure::Check(format!(
                "outcome {}: encoded probability deviates by {:e}",
                bad.outcome, bad.deviation
            )));
        }
    }
    Ok(())
}

fn parse_override(s: &str) -> CliResult<ReferenceOverride> {
    let bad = || Failure::Usage(format!("--override-reference {s:?} is not CASE:NAME=PATH"));
    let (target, path) = s.split_once('=').ok_or_else(bad)?;
    let (case, name) = target.split_once(':').ok_or_else(bad)?;
    let matrix: CMatrix = read_json(Path::new(path), "override matrix")?;
    Ok(ReferenceOverride {
        case: case.into(),
        name: name.into(),
        matrix,
    })
}

fn cmd_verify(g: &Global, out: &Output, n_range: &str, suite: &str, overrides: &[String]) -> CliResult<()> {
    let (n_min, n_max) = parse_range(n_range, g.max_n)?;
    let suite: Suite = suite.parse()?;
    let overrides = overrides.iter().map(|s| parse_override(s)).collect::<CliResult<Vec<_>>>()?;
    verify::check_overrides(&overrides)?;
    let report: VerifyReport = verify::run_verify(&VerifyOptions {
        suite,
        n_min,
        n_max,
        tol: g.tol,
        seed: g.seed,
        overrides,
    })?;
    out.emit(&report, &["id", "residual", "tolerance", "bound", "passed"], || {
        report
            .checks
            .iter()
            .map(|c| {
                vec![
                    c.id.clone(),
                    num(c.residual),
                    num(c.tolerance),
                    match c.bound {
                        verify::Bound::AtMost => "at-most".into(),
                        verify::Bound::AtLeast => "at-least".into(),
                    },
                    c.passed.to_string(),
                ]
            })
            .collect()
    })?;
    let failures: Vec<String> = report
        .failures()
        .map(|c| format!("FAIL {} residual={:e} tolerance={:e}", c.id, c.residual, c.tolerance))
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failures.join("\n")))
    }
}

fn cmd_channel(g: &Global, out: &Output, n: usize, state: &Path, noise: NoiseModel, trials: usize) -> CliResult<()> {
    check_n(g, n, 3)?;
    let rho: QuditState = read_json(state, "state")?;
    let cfg = ChannelConfig {
        n,
        trials,
        seed: g.seed,
        noise,
    };
    let report: ChannelReport = channel::run_channel(&cfg, &rho)?;
    out.emit(&report, &ChannelReport::CSV_HEADER, || {
        report.csv_rows().into_iter().map(|r| r.to_vec()).collect()
    })
}

fn cmd_reference(out: &Output, id: &str) -> CliResult<()> {
    let case: ReferenceCase = reference::reference_case(id)?;
    out.emit(&case, &["name", "row", "col", "re", "im"], || {
        case.matrices
            .iter()
            .flat_map(|m| matrix_rows(&[m.name.clone()], &m.matrix))
            .collect()
    })
}

//! Command-line front end.
//!
//! Exit codes: 0 success, 1 input error or a failed check, 2 budget
//! exhausted.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use crate::basis::Basis;
use crate::budget::Budget;
use crate::catalog::{close_corpus, default_catalog, generate_corpus, make_basis, CatalogId};
use crate::constants::{estimate_with, EstimatorOptions, Families};
use crate::errors::{error_profile, SigmaOptions};
use crate::io::{read_json, write_atomic, BasisFile, FieldName, Format, RunConfig};
use crate::scalar::Scalar;
use crate::verify::{compare_reports, run_catalog, run_verification, to_value, VerifyOptions};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "greedy-approx", version, about = "Greedy-type constants of finite-dimensional bases")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate every constant and print the table.
    Constants(Common),
    /// Greedy ordering, greedy sets and approximation errors of one vector.
    Tga {
        /// Optional `run` keyword, accepted for compatibility.
        #[arg(value_parser = ["run"], hide = true)]
        action: Option<String>,
        /// Print only the row for this m.
        #[arg(long)]
        m: Option<usize>,
        #[command(flatten)]
        common: Common,
        /// Coefficients, comma separated (complex as `1+2i`).
        #[arg(long = "f", value_name = "COEFFS", allow_hyphen_values = true)]
        f: String,
    },
    /// Full run with ledger; writes the report.
    Verify(Common),
    /// Compare two reports.
    ReportDiff { a: PathBuf, b: PathBuf },
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Catalog id, e.g. `canonical:2:4`, `summing:4`.
    #[arg(long)]
    pub basis: Option<String>,
    #[arg(long)]
    pub basis_file: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Norm evaluations allowed per search call.
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub field: Option<FieldName>,
    #[arg(long)]
    pub net_order: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(b) = &self.basis {
            c.basis = Some(b.clone());
            c.basis_file = None;
        }
        if let Some(p) = &self.basis_file {
            c.basis_file = Some(p.display().to_string());
            c.basis = None;
        }
        if let Some(s) = self.seed {
            c.corpus.seed = s;
        }
        if self.budget.is_some() {
            c.budget = self.budget;
        }
        if let Some(t) = self.threads {
            c.threads = t.max(1);
        }
        if let Some(f) = self.format {
            c.format = f;
        }
        if let Some(o) = &self.out {
            c.output = Some(o.display().to_string());
        }
        if let Some(f) = self.field {
            c.field = f;
        }
        if let Some(n) = self.net_order {
            c.net_order = n;
        }
        Ok(c)
    }
}

fn estimator(c: &RunConfig) -> EstimatorOptions {
    EstimatorOptions {
        budget: c.budget.map(Budget::new).unwrap_or_else(Budget::from_env),
        threads: c.threads,
        ..EstimatorOptions::default()
    }
}

/// The configured basis, or `None` when no basis was given.
fn load_basis(c: &RunConfig) -> Result<Option<(Basis, Option<CatalogId>)>> {
    if let Some(p) = &c.basis_file {
        return Ok(Some((BasisFile::load(Path::new(p))?, None)));
    }
    match &c.basis {
        Some(s) => {
            let id: CatalogId = s.parse()?;
            let basis = make_basis(&id, c.field.to_field(c.net_order))?;
            Ok(Some((basis, Some(id))))
        }
        None => Ok(None),
    }
}

fn require_basis(c: &RunConfig) -> Result<(Basis, Option<CatalogId>)> {
    load_basis(c)?.ok_or_else(|| Error::input("a basis is required (--basis or --basis-file)"))
}

fn exit_code(e: &Error) -> i32 {
    if e.is_budget() {
        2
    } else {
        1
    }
}

/// Parses `args` and runs the command, writing results to `out` and
/// diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Constants(c) => cmd_constants(&c, out),
        Command::Tga { common, f, m, .. } => cmd_tga(&common, &f, m, out),
        Command::Verify(c) => cmd_verify(&c, out, err),
        Command::ReportDiff { a, b } => cmd_report_diff(&a, &b, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io {
        path: "<output>".into(),
        source: e,
    }
}

fn cmd_constants(common: &Common, out: &mut dyn Write) -> Result<i32> {
    let c = common.config()?;
    let (basis, _) = require_basis(&c)?;
    let table = common.format.is_none();
    if basis.space().field().is_complex() {
        constants_for::<Complex64>(&basis, &c, table, out)
    } else {
        constants_for::<f64>(&basis, &c, table, out)
    }
}

/// Prints a plain table unless a format was requested on the command line.
fn constants_for<S: Scalar>(basis: &Basis, c: &RunConfig, table: bool, out: &mut dyn Write) -> Result<i32> {
    let corpus = generate_corpus::<S>(basis, &c.corpus)?;
    let corpus = close_corpus(basis, &corpus, &c.corpus)?;
    let set = estimate_with(basis, &corpus, Families::all(), &estimator(c))?;
    let text = match c.format {
        Format::Json => serde_json::to_string_pretty(&set.estimates).map_err(|source| Error::Json {
            context: "serialising estimates".into(),
            source,
        })? + "\n",
        Format::Csv => {
            let mut s = String::from("name,value,infeasible\n");
            for e in &set.estimates {
                s += &format!("{},{:.16e},{}\n", e.name, e.value, e.infeasible);
            }
            s
        }
    };
    match &c.output {
        Some(p) => write_atomic(Path::new(p), text.as_bytes())?,
        None => {
            if !table {
                out.write_all(text.as_bytes()).map_err(io_err)?;
            } else {
                writeln!(out, "{:<8} {:>20} {:>10}", "name", "value", "infeasible").map_err(io_err)?;
                for e in &set.estimates {
                    writeln!(out, "{:<8} {:>20.12} {:>10}", e.name.as_str(), e.value, e.infeasible).map_err(io_err)?;
                }
            }
        }
    }
    Ok(0)
}

fn parse_coeffs<S: Scalar>(text: &str) -> Result<Vec<S>> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            if S::IS_COMPLEX {
                let z: Complex64 = t
                    .parse()
                    .map_err(|_| Error::input(format!("invalid complex coefficient '{t}'")))?;
                Ok(S::from_parts(z.re, z.im))
            } else {
                let x: f64 = t.parse().map_err(|_| Error::input(format!("invalid coefficient '{t}'")))?;
                Ok(S::from_real(x))
            }
        })
        .collect()
}

fn cmd_tga(common: &Common, f: &str, m: Option<usize>, out: &mut dyn Write) -> Result<i32> {
    let c = common.config()?;
    let (basis, _) = require_basis(&c)?;
    if basis.space().field().is_complex() {
        tga_for::<Complex64>(&basis, &c, f, m, out)
    } else {
        tga_for::<f64>(&basis, &c, f, m, out)
    }
}

/// Coefficients are given in the basis; the element is their synthesis.
fn tga_for<S: Scalar>(basis: &Basis, c: &RunConfig, text: &str, only: Option<usize>, out: &mut dyn Write) -> Result<i32> {
    let coeffs: Vec<S> = parse_coeffs(text)?;
    let f = basis.synthesize(&coeffs)?;
    let meter = estimator(c).budget.meter();
    let profile = error_profile(basis, &f, &SigmaOptions::default(), &meter)?;
    let ord: Vec<String> = profile.ordering.one_based().iter().map(|i| i.to_string()).collect();
    let mut s = format!("# pi = {}\n", ord.join(" "));
    s += "m,greedySets,residual,sigma,rho,varrho,bestProjection\n";
    let num = |v: f64| format!("{v:.16e}");
    if let Some(m) = only {
        if m > basis.dim() {
            return Err(Error::input(format!("m = {m} exceeds the dimension {}", basis.dim())));
        }
    }
    for r in profile.rows.iter().filter(|r| only.is_none_or(|m| m == r.m)) {
        let sets: Vec<String> = r
            .greedy_sets
            .sets
            .iter()
            .map(|set| {
                let v: Vec<String> = set.to_one_based().iter().map(|i| i.to_string()).collect();
                format!("{{{}}}", v.join(" "))
            })
            .collect();
        s += &format!(
            "{},{},{},{},{},{},{}\n",
            r.m,
            sets.join(";"),
            num(r.residual),
            num(r.sigma.value),
            r.rho.as_ref().map_or(num(r.residual), |e| num(e.value)),
            r.varrho.as_ref().map_or(num(r.residual), |e| num(e.value)),
            num(r.best_projection.value)
        );
    }
    match &c.output {
        Some(p) => write_atomic(Path::new(p), s.as_bytes())?,
        None => out.write_all(s.as_bytes()).map_err(io_err)?,
    }
    Ok(0)
}

fn to_json_bytes(v: &serde_json::Value) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v).map_err(|source| Error::Json {
        context: "serialising report".into(),
        source,
    })?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn cmd_verify(common: &Common, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let c = common.config()?;
    let mut opts = VerifyOptions {
        estimator: estimator(&c),
        closure_rounds: c.closure_rounds,
        ..VerifyOptions::default()
    };
    opts.estimator.collect_rows = c.format == Format::Csv;
    let output = PathBuf::from(c.output.clone().unwrap_or_else(|| "report.json".into()));
    let mut csv: Vec<(String, String)> = Vec::new();
    let (value, passed, budget) = match load_basis(&c)? {
        Some((basis, id)) => {
            macro_rules! single {
                ($s:ty) => {{
                    let r = run_verification::<$s>(&basis, id.as_ref(), &c.corpus, &opts);
                    csv.push(("rows.csv".into(), r.rows_csv()));
                    csv.push(("estimates.csv".into(), r.estimates_csv()));
                    for e in &r.errors {
                        let _ = writeln!(err, "{}: {}", e.stage, e.message);
                    }
                    (to_value(&r)?, r.passed(), r.budget_exceeded())
                }};
            }
            if basis.space().field().is_complex() {
                single!(Complex64)
            } else {
                single!(f64)
            }
        }
        None => {
            let report = run_catalog(&default_catalog(), &c.corpus, &opts)?;
            let budget = report
                .runs
                .iter()
                .any(|r| r["errors"].as_array().is_some_and(|e| e.iter().any(|e| e["budget"] == true)));
            for (label, rows, est) in &report.tables {
                csv.push((format!("{label}.rows.csv"), rows.clone()));
                csv.push((format!("{label}.estimates.csv"), est.clone()));
            }
            (to_value(&report)?, report.passed, budget)
        }
    };
    write_atomic(&output, &to_json_bytes(&value)?)?;
    if c.format == Format::Csv {
        for (suffix, text) in &csv {
            write_atomic(&sibling(&output, suffix), text.as_bytes())?;
        }
    }
    let _ = writeln!(out, "report written to {}", output.display());
    if budget {
        return Ok(2);
    }
    if !passed {
        let _ = writeln!(err, "verification failed: see {}", output.display());
        return Ok(1);
    }
    Ok(0)
}

fn cmd_report_diff(a: &Path, b: &Path, out: &mut dyn Write) -> Result<i32> {
    let va: serde_json::Value = read_json(a)?;
    let vb: serde_json::Value = read_json(b)?;
    let diffs = compare_reports(&va, &vb)?;
    for d in &diffs {
        writeln!(out, "{}: {} != {}", d.path, d.left, d.right).map_err(io_err)?;
    }
    Ok(if diffs.is_empty() { 0 } else { 1 })
}

//! Command line: verbs, flags, environment, exit codes.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Ablation, ConfigError, FaultSpec, ModelKind, RunConfig, ScalarMode, SuiteId};
use crate::record::{read_jsonl, write_jsonl};
use crate::suites::{run, RunOutput};
use crate::summary::{summarize, write_csv, write_text};

/// Exit code for a run with no violations.
pub const EXIT_PASS: i32 = 0;
/// Exit code when some family failed.
pub const EXIT_VIOLATION: i32 = 1;
/// Exit code for configuration and usage errors.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "crlab", version, about = "Checks pointwise, integral and spectral identities on contact Riemannian models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the selected suites (default: axioms, structure, commutation, bochner).
    Verify(RunArgs),
    /// Run the Bochner suite only.
    Bochner(RunArgs),
    /// Run the integral suite only.
    Integrals(RunArgs),
    /// Run the spectral suite and print its report.
    Spectral(RunArgs),
    /// Aggregate a JSON-lines record file per family.
    Summary(SummaryArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// TOML run configuration; flags and environment override it.
    #[arg(long, env = "CRLAB_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "CRLAB_MODEL")]
    pub model: Option<ModelKind>,
    #[arg(long, env = "CRLAB_N")]
    pub n: Option<usize>,
    /// Perturbation size, rational (`1/10`) or decimal.
    #[arg(long, env = "CRLAB_EPS")]
    pub eps: Option<String>,
    #[arg(long, env = "CRLAB_MODE")]
    pub mode: Option<ScalarMode>,
    #[arg(long, env = "CRLAB_JET_ORDER")]
    pub jet_order: Option<usize>,
    #[arg(long, env = "CRLAB_QUAD_ORDER")]
    pub quad_order: Option<usize>,
    #[arg(long, env = "CRLAB_QUAD_PROFILE_ORDER")]
    pub quad_profile_order: Option<usize>,
    #[arg(long, env = "CRLAB_DEGREE")]
    pub degree: Option<usize>,
    #[arg(long, env = "CRLAB_POINTS")]
    pub points: Option<usize>,
    #[arg(long, env = "CRLAB_FIELD_POINTS")]
    pub field_points: Option<usize>,
    #[arg(long, env = "CRLAB_POLYS")]
    pub polys: Option<usize>,
    #[arg(long, env = "CRLAB_TRIALS")]
    pub trials: Option<usize>,
    #[arg(long, env = "CRLAB_KAPPA_POINTS")]
    pub kappa_points: Option<usize>,
    #[arg(long, env = "CRLAB_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "CRLAB_TOL_POINT")]
    pub tol_point: Option<f64>,
    #[arg(long, env = "CRLAB_TOL_INT")]
    pub tol_int: Option<f64>,
    #[arg(long, env = "CRLAB_TOL_SPEC")]
    pub tol_spec: Option<f64>,
    #[arg(long, env = "CRLAB_TOL_EQ")]
    pub tol_eq: Option<f64>,
    #[arg(long, env = "CRLAB_TOL_STABILITY")]
    pub tol_stability: Option<f64>,
    /// Comma-separated suites, for `verify`.
    #[arg(long, env = "CRLAB_SUITES", value_delimiter = ',')]
    pub suites: Option<Vec<SuiteId>>,
    /// `drop-q-terms` and/or `drop-torsion-terms`.
    #[arg(long, env = "CRLAB_ABLATE", value_delimiter = ',')]
    pub ablate: Option<Vec<Ablation>>,
    /// `connection:j,k,l:delta`, `metric:i,j:delta` or `term:id:delta`.
    #[arg(long, env = "CRLAB_FAULT")]
    pub fault: Option<FaultSpec>,
    #[arg(long, env = "CRLAB_THREADS")]
    pub threads: Option<usize>,
    /// Add wall-clock times to records.
    #[arg(long, env = "CRLAB_TIMING")]
    pub timing: bool,
    /// Records go here instead of stdout.
    #[arg(long, env = "CRLAB_OUT")]
    pub out: Option<PathBuf>,
    /// Also write the per-family CSV summary here.
    #[arg(long, env = "CRLAB_SUMMARY")]
    pub summary: Option<PathBuf>,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Csv,
    Text,
}

#[derive(Args, Debug, Clone)]
pub struct SummaryArgs {
    /// JSON-lines records; `-` reads stdin.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// Defaults, then the TOML file, then flags and environment.
    pub fn resolve(&self, verb_suites: Option<&[SuiteId]>) -> Result<RunConfig, ConfigError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    c.$f = v.clone();
                }
            )*};
        }
        set!(model, n, eps, mode, jet_order, quad_order, quad_profile_order, degree, points, field_points, polys, trials);
        set!(kappa_points, seed, tol_point, tol_int, tol_spec, tol_eq, tol_stability, suites, ablate, threads);
        if let Some(f) = &self.fault {
            c.fault = Some(f.clone());
        }
        c.timing |= self.timing;
        if let Some(s) = verb_suites {
            c.suites = s.to_vec();
        }
        Ok(c)
    }
}

fn open_out(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn fail(msg: impl std::fmt::Display) -> i32 {
    eprintln!("crlab: {msg}");
    EXIT_CONFIG
}

fn run_verb(args: &RunArgs, verb_suites: Option<&[SuiteId]>, spectral: bool) -> i32 {
    let cfg = match args.resolve(verb_suites) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    if args.print_config {
        print!("{}", cfg.to_toml());
        return EXIT_PASS;
    }
    let out: RunOutput = match run(&cfg) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    let written = (|| -> io::Result<()> {
        if spectral {
            if let Some(s) = &out.spectral {
                println!("{}", serde_json::to_string(s)?);
            }
            if let Some(p) = &args.out {
                let mut w = open_out(Some(p))?;
                write_jsonl(&mut w, &out.records)?;
                w.flush()?;
            }
        } else {
            let mut w = open_out(args.out.as_deref())?;
            write_jsonl(&mut w, &out.records)?;
            w.flush()?;
        }
        if let Some(p) = &args.summary {
            write_csv(File::create(p)?, &summarize(&out.records))?;
        }
        Ok(())
    })();
    if let Err(e) = written {
        return fail(e);
    }
    out.exit_code()
}

fn summary_verb(args: &SummaryArgs) -> i32 {
    let records = if args.input.as_os_str() == "-" {
        read_jsonl(io::stdin().lock())
    } else {
        File::open(&args.input).and_then(|f| read_jsonl(BufReader::new(f)))
    };
    let records = match records {
        Ok(r) => r,
        Err(e) => return fail(format!("{}: {e}", args.input.display())),
    };
    if records.is_empty() {
        return fail("no records to summarize");
    }
    let rows = summarize(&records);
    let written = open_out(args.out.as_deref()).and_then(|mut w| {
        match args.format {
            Format::Csv => write_csv(&mut w, &rows)?,
            Format::Text => write_text(&mut w, &rows)?,
        }
        w.flush()
    });
    if let Err(e) = written {
        return fail(e);
    }
    if rows.iter().any(|r| r.failed()) {
        EXIT_VIOLATION
    } else {
        EXIT_PASS
    }
}

pub fn dispatch(cli: &Cli) -> i32 {
    match &cli.command {
        Command::Verify(a) => run_verb(a, None, false),
        Command::Bochner(a) => run_verb(a, Some(&[SuiteId::Bochner]), false),
        Command::Integrals(a) => run_verb(a, Some(&[SuiteId::Integrals]), false),
        Command::Spectral(a) => run_verb(a, Some(&[SuiteId::Spectral]), true),
        Command::Summary(a) => summary_verb(a),
    }
}

/// Parses `std::env::args` and runs; returns the process exit code.
pub fn main() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => dispatch(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_verbs_fix_suites() {
        let dir = std::env::temp_dir().join(format!("crlab-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        std::fs::write(&path, "model = \"sphere\"\nn = 3\nseed = 9\n").unwrap();
        let cli = Cli::try_parse_from(["crlab", "bochner", "--config", path.to_str().unwrap(), "--n", "2", "--ablate", "drop-q-terms,drop-torsion-terms"]).unwrap();
        let Command::Bochner(a) = &cli.command else { panic!("wrong verb") };
        let c = a.resolve(Some(&[SuiteId::Bochner])).unwrap();
        assert_eq!((c.model, c.n, c.seed), (ModelKind::Sphere, 2, 9));
        assert_eq!(c.suites, vec![SuiteId::Bochner]);
        assert_eq!(c.ablate, vec![Ablation::DropQTerms, Ablation::DropTorsionTerms]);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn suites_parse_as_a_list() {
        let cli = Cli::try_parse_from(["crlab", "verify", "--suites", "axioms,structure", "--mode", "exact"]).unwrap();
        let Command::Verify(a) = &cli.command else { panic!("wrong verb") };
        assert_eq!(a.suites.as_deref(), Some(&[SuiteId::Axioms, SuiteId::Structure][..]));
        assert!(Cli::try_parse_from(["crlab", "verify", "--model", "torus"]).is_err());
    }
}

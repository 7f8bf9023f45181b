//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::approx::approximate_phi;
use crate::cascade::fixed_point_iterate;
use crate::compiler::{compile, verify, CompileArtifact, CompileOptions};
use crate::cpwl::Cpwl;
use crate::gadgets::h_cpwl;
use crate::masks::Mask;
use crate::relu_net::ReluNet;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "relu-cascade",
    version,
    about = "Compile refinement iterates into ReLU networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the network for Vⁿg and write it as JSON.
    Compile(Opts),
    /// Check a network file against the exact iterate.
    Verify(Opts),
    /// Measure convergence of compiled iterates to the refinable function.
    Converge(Opts),
    /// Print the size report of a network file.
    Report(Opts),
}

/// Every flag is optional here so a `--config` file can fill the gaps.
#[derive(Args, Debug, Default, Clone)]
pub struct Opts {
    /// Builtin mask (haar, hat, bspline3, d4) or a mask JSON file.
    #[arg(long)]
    pub mask: Option<String>,
    /// `H`, `hat` (on [0, N]), `hat1` (on [0, 2]) or a CPwL JSON file.
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Extra refinement levels for the convergence reference.
    #[arg(long)]
    pub ref_extra: Option<usize>,
    /// Verification grid step; defaults to 2^(-n-6).
    #[arg(long)]
    pub grid_step: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output file (compile, report) or directory (converge).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Network JSON to verify or report on.
    #[arg(long)]
    pub net: Option<PathBuf>,
    /// Also write the report JSON here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long = "tight-M")]
    pub tight_m: bool,
    #[arg(long)]
    pub depth_heavy: bool,
    /// JSON file with defaults for any of the above; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    mask: Option<String>,
    seed: Option<String>,
    n: Option<usize>,
    nmax: Option<usize>,
    ref_extra: Option<usize>,
    grid_step: Option<f64>,
    tol: Option<f64>,
    out: Option<PathBuf>,
    net: Option<PathBuf>,
    report: Option<PathBuf>,
    #[serde(alias = "tight-M")]
    tight_m: Option<bool>,
    #[serde(alias = "depth-heavy")]
    depth_heavy: Option<bool>,
}

enum Fail {
    Input(String),
    Check(String),
}

impl From<crate::Error> for Fail {
    fn from(e: crate::Error) -> Self {
        Fail::Input(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Fail>;

fn input<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Fail::Input(msg.into()))
}

impl Opts {
    fn merged(mut self) -> CliResult<Opts> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = read(&path)?;
        let c: ConfigFile = serde_json::from_str(&text)
            .map_err(|e| Fail::Input(format!("{}: {e}", path.display())))?;
        self.mask = self.mask.or(c.mask);
        self.seed = self.seed.or(c.seed);
        self.n = self.n.or(c.n);
        self.nmax = self.nmax.or(c.nmax);
        self.ref_extra = self.ref_extra.or(c.ref_extra);
        self.grid_step = self.grid_step.or(c.grid_step);
        self.tol = self.tol.or(c.tol);
        self.out = self.out.or(c.out);
        self.net = self.net.or(c.net);
        self.report = self.report.or(c.report);
        self.tight_m |= c.tight_m.unwrap_or(false);
        self.depth_heavy |= c.depth_heavy.unwrap_or(false);
        Ok(self)
    }

    fn mask(&self) -> CliResult<Mask> {
        let spec = self.mask.as_deref().unwrap_or("hat");
        if crate::masks::BUILTIN_NAMES.contains(&spec) {
            return Ok(Mask::builtin(spec)?);
        }
        let path = Path::new(spec);
        if !path.exists() {
            return input(format!(
                "unknown mask `{spec}` (not a builtin name or a file)"
            ));
        }
        serde_json::from_str(&read(path)?).map_err(|e| Fail::Input(format!("{spec}: {e}")))
    }

    fn seed(&self, mask: &Mask, default: &str) -> CliResult<Cpwl> {
        let len = mask.support_len() as f64;
        match self.seed.as_deref().unwrap_or(default) {
            "H" => Ok(h_cpwl()),
            "hat" => Ok(Cpwl::hat(0.0, len / 2.0, len)?),
            "hat1" => Ok(Cpwl::hat(0.0, 1.0, 2.0)?),
            spec => {
                let path = Path::new(spec);
                if !path.exists() {
                    return input(format!("unknown seed `{spec}`"));
                }
                serde_json::from_str(&read(path)?).map_err(|e| Fail::Input(format!("{spec}: {e}")))
            }
        }
    }

    fn n(&self) -> CliResult<usize> {
        match self.n {
            Some(0) => input("--n must be at least 1"),
            Some(n) => Ok(n),
            None => input("--n is required"),
        }
    }

    fn tol(&self) -> CliResult<f64> {
        let tol = self.tol.unwrap_or(1e-9);
        if !(tol > 0.0 && tol.is_finite()) {
            return input("--tol must be positive");
        }
        Ok(tol)
    }

    fn grid_step(&self, n: usize) -> CliResult<f64> {
        let step = self.grid_step.unwrap_or(2f64.powi(-(n as i32) - 6));
        if !(step > 0.0 && step.is_finite()) {
            return input("--grid-step must be positive");
        }
        Ok(step)
    }

    fn compile_options(&self) -> CompileOptions {
        CompileOptions {
            tight_m: self.tight_m,
            depth_heavy: self.depth_heavy,
        }
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Fail::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Fail::Input(format!("{}: {e}", path.display())))
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct CompileSummary<'a> {
    stage: String,
    mask: &'a str,
    n: usize,
    width: usize,
    depth: usize,
    params: usize,
    width_bound: usize,
    depth_bound: usize,
    bounds_ok: bool,
    hat_terms: usize,
    #[serde(rename = "M")]
    m: f64,
}

fn summarize<'a>(art: &CompileArtifact, mask: &'a Mask) -> CompileSummary<'a> {
    let size = art.net.size_report();
    CompileSummary {
        stage: art.stage.label(),
        mask: mask.name().unwrap_or("custom"),
        n: art.params.n,
        width: size.width,
        depth: size.depth,
        params: size.params,
        width_bound: art.width_bound,
        depth_bound: art.depth_bound,
        bounds_ok: art.bounds_ok(),
        hat_terms: art.terms,
        m: art.params.m,
    }
}

fn cmd_compile(o: &Opts) -> CliResult<()> {
    let mask = o.mask()?;
    let seed = o.seed(&mask, "hat")?;
    let n = o.n()?;
    let art = compile(&seed, n, &mask, o.compile_options())?;
    let out = o.out.clone().unwrap_or_else(|| PathBuf::from("net.json"));
    write(&out, &art.net.to_json()?)?;
    let summary = json(&summarize(&art, &mask));
    print!("{summary}");
    if let Some(path) = &o.report {
        write(path, &summary)?;
    }
    if !art.bounds_ok() {
        return Err(Fail::Check(
            "network exceeds its declared size bounds".into(),
        ));
    }
    Ok(())
}

fn cmd_verify(o: &Opts) -> CliResult<()> {
    let mask = o.mask()?;
    let seed = o.seed(&mask, "hat")?;
    let n = o.n()?;
    let tol = o.tol()?;
    let step = o.grid_step(n)?;
    let Some(net_path) = &o.net else {
        return input("--net is required");
    };
    let net = ReluNet::from_json(&read(net_path)?)
        .map_err(|e| Fail::Input(format!("{}: {e}", net_path.display())))?;
    if net.input_dim() != 1 || net.output_dim() != 1 {
        return input("network must be scalar");
    }
    // The reference build supplies the stage and the declared bounds.
    let mut art = compile(&seed, n, &mask, o.compile_options())?;
    art.net = net;
    let report = verify(&art, &mask, &seed, step, tol)?;
    let text = json(&report);
    print!("{text}");
    if let Some(path) = &o.report {
        write(path, &text)?;
    }
    if !report.passed {
        return Err(Fail::Check(format!(
            "max deviation {:e} (tol {:e}), bounds_ok {}",
            report.max_dev, tol, report.bounds_ok
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct ConvergeSummary<'a> {
    mask: &'a str,
    phi0: &'a str,
    nmax: usize,
    reference_level: usize,
    fitted_lambda: Option<f64>,
    fit_max_residual: Option<f64>,
    fit_points: usize,
    increment_lambda: Option<f64>,
    final_error: f64,
}

fn cmd_converge(o: &Opts) -> CliResult<()> {
    let mask = o.mask()?;
    let seed = o.seed(&mask, "hat1")?;
    let nmax = match o.nmax.unwrap_or(8) {
        0 => return input("--nmax must be at least 1"),
        v => v,
    };
    let dir = o.out.clone().unwrap_or_else(|| PathBuf::from("."));
    if !dir.is_dir() {
        return input(format!("output directory {} does not exist", dir.display()));
    }
    let run = approximate_phi(&mask, &seed, nmax, o.ref_extra.unwrap_or(4))?;
    let inc = fixed_point_iterate(&mask, &seed, nmax);
    let mut inc_csv = String::from("n,increment\n");
    for (n, e) in &inc.increments {
        inc_csv.push_str(&format!("{n},{e:?}\n"));
    }
    let summary = ConvergeSummary {
        mask: &run.mask,
        phi0: &run.phi0,
        nmax,
        reference_level: run.reference_level,
        fitted_lambda: run.fitted_lambda,
        fit_max_residual: run.fit_max_residual,
        fit_points: run.fit_points,
        increment_lambda: inc.fit.map(|f| f.lambda),
        final_error: run.records.last().map_or(0.0, |r| r.error),
    };
    write(&dir.join("convergence.csv"), &run.to_csv())?;
    write(&dir.join("increments.csv"), &inc_csv)?;
    let text = json(&summary);
    write(&dir.join("summary.json"), &text)?;
    print!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct NetSummary {
    input_dim: usize,
    output_dim: usize,
    domain: (f64, f64),
    width: usize,
    depth: usize,
    params: usize,
    nonzero_weights: usize,
    lowered: bool,
}

fn cmd_report(o: &Opts) -> CliResult<()> {
    let Some(path) = &o.net else {
        return input("--net is required");
    };
    let net = ReluNet::from_json(&read(path)?)
        .map_err(|e| Fail::Input(format!("{}: {e}", path.display())))?;
    let size = net.size_report();
    let text = json(&NetSummary {
        input_dim: net.input_dim(),
        output_dim: net.output_dim(),
        domain: net.domain(),
        width: size.width,
        depth: size.depth,
        params: size.params,
        nonzero_weights: net.nnz(),
        lowered: net.is_lowered(),
    });
    print!("{text}");
    if let Some(out) = o.out.as_ref().or(o.report.as_ref()) {
        write(out, &text)?;
    }
    Ok(())
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let (opts, f): (Opts, fn(&Opts) -> CliResult<()>) = match cli.command {
        Command::Compile(o) => (o, cmd_compile),
        Command::Verify(o) => (o, cmd_verify),
        Command::Converge(o) => (o, cmd_converge),
        Command::Report(o) => (o, cmd_report),
    };
    match opts.merged().and_then(|o| f(&o)) {
        Ok(()) => EXIT_OK,
        Err(Fail::Input(msg)) => {
            eprintln!("error: {msg}");
            EXIT_INPUT
        }
        Err(Fail::Check(msg)) => {
            eprintln!("check failed: {msg}");
            EXIT_FAILED
        }
    }
}

mod args;
mod verify;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use whitconv::convolve::{convolve_measures, MixedMeasure, QKernel};
use whitconv::infdiv::{compound_poisson_law, diffusion_law_density, semigroup_density, ExponentFn};
use whitconv::processes::{random_walk, simulate_diffusion, simulate_levy, PathEnsemble, Scheme};
use whitconv::quad::QuadConfig;
use whitconv::specfun::bw;
use whitconv::spectral::{inverse_transform_many, SpectralPoint};
use whitconv::{Error, Params};

#[derive(Parser)]
#[command(name = "whitconv", version, about = "Index Whittaker transforms, convolutions and processes")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "WHITCONV_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    /// Output file; a manifest is written to <out>.manifest.json. Default: stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tabulate 𝑾_{α,ν}(x).
    Eval {
        #[command(flatten)]
        common: Common,
        /// real:v or imag:tau
        #[arg(long)]
        nu: String,
        /// a:b:n or geom:a:b:n
        #[arg(long)]
        x_grid: String,
        #[arg(long, default_value = "auto")]
        route: String,
    },
    /// Transform of a measure on a λ grid.
    Transform {
        #[command(flatten)]
        common: Common,
        /// dirac:x, atoms:x@w,..., file:path, density:path.csv
        #[arg(long)]
        measure: String,
        #[arg(long)]
        lambda_grid: String,
    },
    /// Inverse transform of exp:c (f̂ = e^{−cλ}) or of the transform of a measure.
    Invert {
        #[command(flatten)]
        common: Common,
        /// exp:c or measure:<measure>
        #[arg(long)]
        fhat: String,
        #[arg(long)]
        x_grid: String,
        #[arg(long, default_value_t = 1e-8)]
        tail_tol: f64,
    },
    /// Convolution of two measures.
    Convolve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        x_grid: Option<String>,
        #[arg(long, default_value_t = whitconv::convolve::MAX_ATOM_PAIRS)]
        max_pairs: usize,
    },
    /// The law μ_t of an exponent.
    Semigroup {
        #[command(flatten)]
        common: Common,
        /// gaussian:b, cp:a:<measure>, levy:b:<measure>, file:psi.json
        #[arg(long)]
        exponent: String,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        x_grid: Option<String>,
    },
    /// Paths of the *-Lévy process of an exponent.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        exponent: String,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        y0: f64,
        /// exact, euler or chain (default: exact for gaussian exponents, chain otherwise)
        #[arg(long)]
        scheme: Option<String>,
    },
    /// *-random walk S_n = S_{n−1} ⊕ X_n.
    Walk {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        step: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        chains: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Run a verification suite and print a JSON report.
    Verify {
        suite: String,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    Check,
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Lib(Error::Csv(e))
    }
}

type Res<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error: --threads must be a positive count");
            return ExitCode::from(2);
        }
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_invalid_input() { 2 } else { 3 })
        }
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Writes the version line and `body` to `out` (or stdout), then the
/// manifest next to it. Files are removed again if anything fails.
fn emit(out: &Option<PathBuf>, manifest: Value, body: impl FnOnce(&mut dyn Write) -> Res<()>) -> Res<()> {
    let Some(path) = out else {
        let stdout = io::stdout();
        let mut w = BufWriter::new(stdout.lock());
        writeln!(w, "# whitconv {}", whitconv::VERSION)?;
        body(&mut w)?;
        w.flush()?;
        return Ok(());
    };
    let mpath = manifest_path(path);
    let result = (|| -> Res<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "# whitconv {}", whitconv::VERSION)?;
        body(&mut w)?;
        w.flush()?;
        let mut m = BufWriter::new(File::create(&mpath)?);
        serde_json::to_writer_pretty(&mut m, &manifest).map_err(Error::Json)?;
        writeln!(m)?;
        m.flush()?;
        Ok(())
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(path);
        let _ = std::fs::remove_file(&mpath);
    }
    result
}

/// Shortest round-trip form, switching to exponent notation far from 1.
fn fmt_num(v: &f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn table(w: &mut dyn Write, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Res<()> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record(header)?;
    for r in rows {
        c.write_record(&r)?;
    }
    c.flush()?;
    Ok(())
}

fn mixed_rows(m: &MixedMeasure) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = m.atoms.iter().map(|a| vec!["atom".into(), fmt_num(&a.0), fmt_num(&a.1)]).collect();
    if let Some(g) = &m.density {
        rows.extend(g.grid.iter().zip(&g.values).map(|(x, v)| vec!["density".into(), fmt_num(&x), fmt_num(&v)]));
    }
    rows
}

fn base_manifest(command: &str, alpha: f64, args: Value) -> Value {
    json!({ "version": whitconv::VERSION, "command": command, "alpha": alpha, "args": args })
}

fn ensemble_manifest(command: &str, ens: &PathEnsemble, args: Value) -> Value {
    json!({ "version": whitconv::VERSION, "command": command, "ensemble": ens.manifest(), "args": args })
}

fn run(cmd: Cmd) -> Res<()> {
    match cmd {
        Cmd::Eval { common, nu, x_grid, route } => {
            let p = Params::new(common.alpha)?;
            let order = args::order(&nu)?;
            let r = args::route(&route)?;
            let xs = args::grid(&x_grid)?;
            let vals: Vec<f64> = xs.iter().map(|&x| bw(&p, order, x, r)).collect::<whitconv::Result<_>>()?;
            let m = base_manifest("eval", p.alpha, json!({ "nu": nu, "x_grid": x_grid, "route": route }));
            emit(&common.out, m, |w| {
                table(w, &["x", "value"], xs.iter().zip(&vals).map(|(x, v)| vec![fmt_num(&x), fmt_num(&v)]))
            })
        }
        Cmd::Transform { common, measure, lambda_grid } => {
            let p = Params::new(common.alpha)?;
            let mu = args::measure(&measure)?;
            let ls = args::grid(&lambda_grid)?;
            let vals: Vec<f64> =
                ls.iter().map(|&l| mu.transform(&p, SpectralPoint::new(&p, l)?)).collect::<whitconv::Result<_>>()?;
            let m = base_manifest("transform", p.alpha, json!({ "measure": measure, "lambda_grid": lambda_grid }));
            emit(&common.out, m, |w| {
                table(w, &["lambda", "value"], ls.iter().zip(&vals).map(|(l, v)| vec![fmt_num(&l), fmt_num(&v)]))
            })
        }
        Cmd::Invert { common, fhat, x_grid, tail_tol } => {
            let p = Params::new(common.alpha)?;
            let xs = args::grid(&x_grid)?;
            let cfg = QuadConfig { truncation_tail_tol: tail_tol, ..QuadConfig::loose() };
            cfg.validate()?;
            let vals = match fhat.split_once(':') {
                Some(("exp", c)) => {
                    let c: f64 = c.parse().map_err(|_| Error::Parse(format!("exp:c needs a number, got '{c}'")))?;
                    if !(c > 0.0) {
                        return Err(Error::InvalidParam("exp:c needs c > 0".into()).into());
                    }
                    inverse_transform_many(&p, |l| Ok((-c * l).exp()), &xs, &cfg)?
                }
                Some(("measure", s)) => {
                    let mu = args::measure(s)?;
                    inverse_transform_many(&p, |l| mu.transform(&p, SpectralPoint::new(&p, l)?), &xs, &cfg)?
                }
                _ => return Err(Error::Parse(format!("--fhat expects exp:c or measure:<measure>, got '{fhat}'")).into()),
            };
            let m = base_manifest("invert", p.alpha, json!({ "fhat": fhat, "x_grid": x_grid, "tail_tol": tail_tol }));
            emit(&common.out, m, |w| {
                table(w, &["x", "density"], xs.iter().zip(&vals).map(|(x, v)| vec![fmt_num(&x), fmt_num(&v)]))
            })
        }
        Cmd::Convolve { common, a, b, x_grid, max_pairs } => {
            let p = Params::new(common.alpha)?;
            let (ma, mb) = (args::measure(&a)?, args::measure(&b)?);
            let grid = x_grid.as_deref().map(args::grid).transpose()?;
            let k = QKernel::new(&p)?;
            let c = convolve_measures(&k, &ma, &mb, grid.as_deref(), max_pairs)?;
            let m = base_manifest("convolve", p.alpha, json!({ "a": a, "b": b, "x_grid": x_grid, "max_pairs": max_pairs }));
            emit(&common.out, m, |w| table(w, &["kind", "x", "value"], mixed_rows(&c)))
        }
        Cmd::Semigroup { common, exponent, t, x_grid } => {
            let p = Params::new(common.alpha)?;
            let psi = args::exponent(&exponent)?;
            let grid = x_grid.as_deref().map(args::grid).transpose()?;
            let law = semigroup_law(&p, &psi, t, grid.as_deref())?;
            let m = base_manifest("semigroup", p.alpha, json!({ "exponent": psi, "t": t, "x_grid": x_grid }));
            emit(&common.out, m, |w| table(w, &["kind", "x", "value"], mixed_rows(&law)))
        }
        Cmd::Simulate { common, exponent, t, steps, paths, seed, y0, scheme } => {
            let p = Params::new(common.alpha)?;
            let psi = args::exponent(&exponent)?;
            if !(t > 0.0) || steps == 0 {
                return Err(Error::InvalidParam("need t > 0 and steps >= 1".into()).into());
            }
            let times: Vec<f64> = (0..=steps).map(|i| t * i as f64 / steps as f64).collect();
            let gaussian = psi.levy.is_empty();
            let scheme = scheme.unwrap_or_else(|| if gaussian { "exact".into() } else { "chain".into() });
            let ens = match scheme.as_str() {
                "exact" | "euler" if gaussian => {
                    let b = psi.gaussian_coef;
                    if !(b > 0.0) {
                        return Err(Error::InvalidParam("the diffusion schemes need gaussian:b with b > 0".into()).into());
                    }
                    let s = if scheme == "exact" { Scheme::ExactExpFunctional } else { Scheme::EulerFallback };
                    let scaled: Vec<f64> = times.iter().map(|&s| b * s).collect();
                    let mut ens = simulate_diffusion(&p, y0, &scaled, paths, seed, s)?;
                    for path in &mut ens.paths {
                        path.times = times.clone();
                    }
                    ens.exponent = Some(psi.clone());
                    ens
                }
                "exact" | "euler" => {
                    return Err(Error::InvalidParam("exact and euler schemes need a gaussian exponent".into()).into())
                }
                "chain" => simulate_levy(&p, &psi, y0, &times, paths, seed)?,
                _ => return Err(Error::Parse(format!("unknown scheme '{scheme}' (exact, euler, chain)")).into()),
            };
            let m = ensemble_manifest("simulate", &ens, json!({ "t": t, "steps": steps, "y0": y0 }));
            emit(&common.out, m, |w| Ok(ens.write_csv_to(w)?))
        }
        Cmd::Walk { common, step, n, chains, seed } => {
            let p = Params::new(common.alpha)?;
            let mu = args::measure(&step)?;
            let ens = random_walk(&p, &mu, n, chains, seed)?;
            let m = ensemble_manifest("walk", &ens, json!({ "step": step, "n": n }));
            emit(&common.out, m, |w| Ok(ens.write_csv_to(w)?))
        }
        Cmd::Verify { suite, common, paths, seed } => {
            let p = Params::new(common.alpha)?;
            if !verify::SUITES.contains(&suite.as_str()) {
                return Err(Error::InvalidParam(format!("unknown suite '{suite}' (one of {})", verify::SUITES.join(", "))).into());
            }
            if verify::needs_seed(&suite) && seed.is_none() {
                return Err(Error::InvalidParam(format!("suite '{suite}' is randomized and needs --seed")).into());
            }
            if paths < 2 {
                return Err(Error::InvalidParam("--paths must be at least 2".into()).into());
            }
            let report = verify::run(&suite, &p, &verify::Options { paths, seed })?;
            let text = serde_json::to_string_pretty(&report).map_err(Error::Json)?;
            match &common.out {
                Some(path) => std::fs::write(path, text + "\n")?,
                None => println!("{text}"),
            }
            if report.pass {
                Ok(())
            } else {
                Err(Failure::Check)
            }
        }
    }
}

/// μ_t as atoms plus a density; Gaussian laws fall back to the diffusion
/// PDE when the inversion fails (small t).
fn semigroup_law(p: &Params, psi: &ExponentFn, t: f64, grid: Option<&[f64]>) -> whitconv::Result<MixedMeasure> {
    if psi.is_pure_compound_poisson() {
        return compound_poisson_law(&QKernel::new(p)?, psi, t, grid);
    }
    match semigroup_density(p, psi, t, grid, &QuadConfig::loose()) {
        Ok(g) => Ok(MixedMeasure { density: Some(g), atoms: vec![] }),
        Err(e) if psi.levy.is_empty() && !e.is_invalid_input() => {
            eprintln!("note: inversion failed ({e}); using the diffusion PDE law");
            Ok(MixedMeasure { density: Some(diffusion_law_density(p, psi.gaussian_coef * t, grid)?), atoms: vec![] })
        }
        Err(e) => Err(e),
    }
}

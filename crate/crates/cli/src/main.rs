use std::fs;
use std::io::{self as stdio, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use phnet::analysis;
use phnet::discretize::{assemble_generator_with, DiscreteGenerator, DiscretizationOptions};
use phnet::io::{self as netio, NetworkFile};
use phnet::model;
use phnet::network::{self, Network, NetworkError};
use phnet::passivity;
use phnet::scenarios;
use phnet::simulate::{self, Preset};
use serde_json::{json, Value};

const SCHEMA: u32 = 1;

#[derive(Parser)]
#[command(name = "phnet", version, about = "Certify, discretize, analyze and simulate networks of port-Hamiltonian PDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate subsystems, certify dissipativity and detect serial structure.
    Check {
        /// Network file (JSON), or `-` for stdin.
        file: PathBuf,
    },
    /// Eigenvalues of the discretized generator.
    Spectrum {
        file: PathBuf,
        #[command(flatten)]
        disc: Discretization,
        /// Write eigenvalues as CSV (`re,im`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Energy-stable time integration.
    Simulate {
        file: PathBuf,
        #[command(flatten)]
        disc: Discretization,
        /// Time step; chosen from the spectrum when omitted.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
        /// Initial condition per subsystem: sine, bump, random or random:<seed>.
        /// The last entry is reused for the remaining subsystems.
        #[arg(long, value_delimiter = ',', default_value = "sine")]
        x0: Vec<String>,
        /// Seed for `random` presets without an explicit seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the energy and trace history as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Resolvent norm along the imaginary axis.
    Resolvent {
        file: PathBuf,
        #[command(flatten)]
        disc: Discretization,
        #[arg(long)]
        beta_max: Option<f64>,
        #[arg(long, default_value_t = 400)]
        samples: usize,
        /// Write the scan as CSV (`beta,norm`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Built-in example networks.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Args)]
struct Discretization {
    /// Collocation points, one value for all subsystems or one per subsystem.
    #[arg(long, value_delimiter = ',', default_value = "48")]
    n: Vec<usize>,
    /// Disable the spectral vanishing viscosity filter.
    #[arg(long)]
    no_filter: bool,
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// List the built-in scenarios.
    List,
    /// Print a scenario as an explicit network file.
    Dump {
        name: String,
        /// Parameter overrides as a JSON object.
        #[arg(long)]
        params: Option<String>,
    },
}

/// Errors split by exit code: 2 for unreadable or malformed input, 1 for
/// everything that goes wrong afterwards.
enum Failure {
    Input(anyhow::Error),
    Run(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Run(e.into())
    }
}

fn input(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Input(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        report(&e);
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Input(e)) => {
            report(&e);
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            report(&e);
            ExitCode::from(1)
        }
    }
}

/// Prints the error chain, skipping causes already spelled out by the
/// message above them.
fn report(e: &anyhow::Error) {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !msg.contains(&c) {
            msg = format!("{msg}: {c}");
        }
    }
    eprintln!("error: {msg}");
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("PHNET_THREADS") {
        let n: usize = v.parse().with_context(|| format!("PHNET_THREADS must be a positive integer, got '{v}'"))?;
        if n == 0 {
            return Err(anyhow!("PHNET_THREADS must be a positive integer, got 0"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Check { file } => check(&file),
        Command::Spectrum { file, disc, out } => spectrum(&file, &disc, out.as_deref()),
        Command::Simulate { file, disc, dt, t_end, x0, seed, out } => {
            simulate(&file, &disc, dt, t_end, &x0, seed, out.as_deref())
        }
        Command::Resolvent { file, disc, beta_max, samples, out } => resolvent(&file, &disc, beta_max, samples, out.as_deref()),
        Command::Scenario { action } => scenario(action),
    }
}

fn load(path: &Path) -> Result<Network, Failure> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        stdio::stdin().read_to_string(&mut s).map_err(input)?;
        s
    } else {
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(input)?
    };
    // every parse failure, including structural model errors, is an input error
    netio::parse_network(&text).map_err(input)
}

fn print_json(v: &Value) -> Result<(), Failure> {
    let mut out = stdio::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn check(path: &Path) -> Result<u8, Failure> {
    let net = load(path)?;
    let mut subsystems = Vec::new();
    for (index, s) in net.subsystems.iter().enumerate() {
        subsystems.push(json!({
            "index": index,
            "validation": model::validate_subsystem(s)?,
            "sym_p0": passivity::check_sym_p0(s),
            "impedance": passivity::check_impedance(s),
            "scattering": passivity::check_scattering(s),
        }));
    }
    let (certificate, error) = match network::certify_network_dissipative(&net) {
        Ok(c) => (Some(c), None),
        Err(e @ NetworkError::InvalidSubsystem { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(input(e)),
    };
    let serial = network::detect_serial_structure(&net).ok();
    let certified = certificate.as_ref().is_some_and(|c| c.pass);
    let witness = certificate.as_ref().and_then(|c| c.witness.as_ref()).map(|w| w.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>());
    let controllers: Vec<Value> = net.controllers.iter().map(|c| json!({"passivity": c.passivity(), "hurwitz": c.eigenvalues().iter().all(|l| l.re < 0.0)})).collect();
    print_json(&json!({
        "schema": SCHEMA,
        "certified": certified,
        "serial": serial.as_ref().is_some_and(|s| s.is_serial()),
        "serial_structure": serial,
        "network": certificate,
        "witness": witness,
        "error": error,
        "subsystems": subsystems,
        "controllers": controllers,
    }))?;
    if let (Some(w), false) = (&witness, certified) {
        eprintln!("dissipativity fails along witness {w:?}");
    }
    Ok(if certified { 0 } else { 1 })
}

fn discretize(net: &Network, disc: &Discretization) -> Result<DiscreteGenerator, Failure> {
    let m = net.subsystems.len();
    let ns = match disc.n.len() {
        1 => vec![disc.n[0]; m],
        k if k == m => disc.n.clone(),
        k => return Err(input(anyhow!("--n has {k} values for {m} subsystems"))),
    };
    let opts = if disc.no_filter { DiscretizationOptions::unfiltered() } else { DiscretizationOptions::default() };
    Ok(assemble_generator_with(net, &ns, &opts)?)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, Failure> {
    let w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path);
    Ok(w.with_context(|| format!("cannot write {}", path.display()))?)
}

fn spectrum(path: &Path, disc: &Discretization, out: Option<&Path>) -> Result<u8, Failure> {
    let net = load(path)?;
    let g = discretize(&net, disc)?;
    let r = analysis::spectrum(&g);
    let (verdict, scan) = analysis::stability_verdict(&r);
    if let Some(p) = out {
        let mut w = csv_writer(p)?;
        w.write_record(["re", "im"])?;
        for l in &r.eigenvalues {
            w.serialize((l.re, l.im))?;
        }
        w.flush()?;
    }
    let resolved = (0..r.eigenvalues.len()).filter(|&k| r.is_resolved(k)).count();
    print_json(&json!({
        "schema": SCHEMA,
        "abscissa": r.abscissa,
        "verdict": verdict.label(),
        "growth_trend": scan.growth_trend,
        "beta_max": scan.beta_max,
        "eigenvalues": r.eigenvalues.len(),
        "resolved": resolved,
        "zero_modes": r.zero_modes.len(),
        "certified": g.certified,
        "dissipativity_defect": g.dissipativity_defect,
    }))?;
    Ok(0)
}

fn parse_presets(specs: &[String], seed: u64) -> Result<Vec<Preset>, Failure> {
    specs
        .iter()
        .map(|s| if s == "random" { Ok(Preset::Random(seed)) } else { s.parse().map_err(input) })
        .collect()
}

fn simulate(path: &Path, disc: &Discretization, dt: Option<f64>, t_end: f64, x0: &[String], seed: u64, out: Option<&Path>) -> Result<u8, Failure> {
    let presets = parse_presets(x0, seed)?;
    let net = load(path)?;
    let g = discretize(&net, disc)?;
    let dt = match dt {
        Some(dt) => dt,
        None => {
            // shrink the suggested step so that the run ends exactly at t_end
            let dt = simulate::default_dt(&analysis::spectrum(&g));
            if t_end > 0.0 {
                t_end / (t_end / dt).ceil()
            } else {
                dt
            }
        }
    };
    let sim = simulate::simulate(&g, &simulate::initial_state(&g, &presets), dt, t_end)?;
    let trace = &sim.trace;
    if let Some(p) = out {
        let mut w = csv_writer(p)?;
        let complex = trace.is_complex();
        let mut header = vec!["t".to_string(), "H".to_string()];
        for label in trace.trace_labels() {
            if complex {
                header.push(format!("{label}_im"));
                header.insert(header.len() - 1, label);
            } else {
                header.push(label);
            }
        }
        w.write_record(&header)?;
        for ((t, h), tau) in trace.times.iter().zip(&trace.energies).zip(&trace.traces) {
            let mut row = vec![*t, *h];
            for z in tau.iter() {
                row.push(z.re);
                if complex {
                    row.push(z.im);
                }
            }
            w.serialize(row)?;
        }
        w.flush()?;
    }
    let mut warnings = sim.warnings.clone();
    let fit = match analysis::decay_fit(trace) {
        Ok(f) => Some(f),
        Err(e) => {
            warnings.push(format!("no decay fit: {e}"));
            None
        }
    };
    print_json(&json!({
        "schema": SCHEMA,
        "dt": dt,
        "steps": trace.times.len() - 1,
        "t_end": trace.times.last(),
        "energy_initial": trace.energies.first(),
        "energy_final": trace.energies.last(),
        "projection_residual": sim.projection_residual,
        "decay_fit": fit,
        "warnings": warnings,
    }))?;
    Ok(0)
}

fn resolvent(path: &Path, disc: &Discretization, beta_max: Option<f64>, samples: usize, out: Option<&Path>) -> Result<u8, Failure> {
    if let Some(b) = beta_max {
        if !(b.is_finite() && b > 0.0) {
            return Err(input(anyhow!("--beta-max must be positive, got {b}")));
        }
    }
    let net = load(path)?;
    let g = discretize(&net, disc)?;
    let r = analysis::spectrum(&g);
    let beta_max = beta_max.unwrap_or_else(|| analysis::default_beta_max(&r));
    let scan = analysis::resolvent_scan(&r, beta_max, samples);
    let verdict = analysis::verdict(r.abscissa, scan.growth_trend);
    if let Some(p) = out {
        let mut w = csv_writer(p)?;
        w.write_record(["beta", "norm"])?;
        for (b, n) in scan.betas.iter().zip(&scan.norms) {
            w.serialize((b, n))?;
        }
        w.flush()?;
    }
    let diverged: Vec<f64> = scan.betas.iter().zip(&scan.diverged).filter(|(_, d)| **d).map(|(b, _)| *b).collect();
    print_json(&json!({
        "schema": SCHEMA,
        "beta_max": scan.beta_max,
        "samples": scan.betas.len(),
        "sup_norm": scan.sup_norm,
        "growth_trend": scan.growth_trend,
        "diverged_at": diverged,
        "abscissa": r.abscissa,
        "verdict": verdict.label(),
    }))?;
    Ok(0)
}

fn scenario(action: ScenarioAction) -> Result<u8, Failure> {
    match action {
        ScenarioAction::List => {
            let mut out = stdio::stdout().lock();
            for s in scenarios::SCENARIOS {
                writeln!(out, "{:<32} {}", s.name, s.description)?;
            }
        }
        ScenarioAction::Dump { name, params } => {
            let params: Value = match params {
                Some(p) => serde_json::from_str(&p).context("--params is not valid JSON").map_err(input)?,
                None => Value::Null,
            };
            let net = scenarios::build(&name, &params).map_err(input)?;
            let mut out = stdio::stdout().lock();
            writeln!(out, "{}", NetworkFile::from_network(&net).to_json())?;
        }
    }
    Ok(0)
}

// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.


//! Command line front end for the hyperwalk harness.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use hyperwalk::harness::{
    continuity_sweep, domination_check, escape_rate, write_run, Backend, EnsembleStats, MeasureSpec,
    Prepared, RunConfig, RunOptions, RunSummary, ULaw, RESAMPLES,
};
use hyperwalk::schottky::{
    find_schottky_in_support, h2_stratified_sampler, pingpong_construct, pingpong_for_engine, tree_ball_sampler,
    verify_schottky, PingPongLimits, SchottkySet, SupportSearchLimits, VerificationReport,
};
use hyperwalk::spaces::{FreeTree, GroupWord, HalfPlane, MoebiusIsometry};
use hyperwalk::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "hyperwalk", version, about = "Random walks, pivotal times and deviation estimates on hyperbolic spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Revalidate every pivotal stack and exit with status 3 on any failure.
    #[arg(long)]
    paranoid: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an ensemble and write every table and the summary.
    Simulate(RunArgs),
    /// Write the pivotal trace of one trajectory.
    Pivots {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0)]
        trajectory: u64,
    },
    /// Verify or construct Schottky sets.
    #[command(subcommand)]
    Schottky(SchottkyCommand),
    /// Deviation tables and decay fits.
    Deviations(RunArgs),
    /// Escape rate with a bootstrap interval.
    EscapeRate(RunArgs),
    /// Compare final pivot counts with sums of i.i.d. increments.
    Domination {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 3.0)]
        sigmas: f64,
    },
    /// Escape rates of perturbed measures against a shared Schottky set.
    Continuity {
        #[command(flatten)]
        run: RunArgs,
        /// TOML file with `[[perturbation]]` tables (`label`, `measure`).
        #[arg(long)]
        perturbations: PathBuf,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        epsilon: f64,
    },
    /// Print a summary of a finished run directory.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Tree,
    Halfplane,
}

#[derive(Subcommand, Debug)]
enum SchottkyCommand {
    /// Check a certificate or the canonical tree generators.
    Verify {
        #[arg(long, value_enum, default_value_t = BackendArg::Tree)]
        backend: BackendArg,
        /// Certificate JSON written by `schottky construct`.
        #[arg(long, conflicts_with = "generators")]
        certificate: Option<PathBuf>,
        /// Verify the generators of the free group of this rank.
        #[arg(long)]
        generators: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        eta: f64,
        #[arg(long, default_value_t = 0.0)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        d: f64,
        /// Word-length radius of the exhaustive tree sampler.
        #[arg(long, default_value_t = 4)]
        radius: usize,
        /// Pairs of the half-plane sampler.
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Ping-pong construction from two loxodromics, or a search in the
    /// support of a configured measure.
    Construct {
        #[arg(long, value_enum, default_value_t = BackendArg::Tree)]
        backend: BackendArg,
        /// A word (tree) or `a,b,c,d` (half-plane).
        #[arg(long, requires = "v", conflicts_with = "config")]
        u: Option<String>,
        #[arg(long)]
        v: Option<String>,
        /// Search inside the support of this configuration's measure.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0.25)]
        eta: f64,
        #[arg(long, default_value_t = 1.0)]
        d: f64,
        /// Raise `D` until `D ≥ 20C + 100δ + 1` holds for the certified `C`.
        #[arg(long)]
        engine: bool,
        #[arg(long, default_value = "schottky.json")]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible { .. } => 2,
        _ => 1,
    }
}

fn load(args: &RunArgs) -> Result<Prepared> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(workers) = args.workers {
        config.workers = workers;
    }
    config.paranoid |= args.paranoid;
    Prepared::new(config)
}

fn run(prepared: &Prepared, opts: &RunOptions) -> Result<EnsembleStats> {
    prepared.run(prepared.config.workers, opts)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Input(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn paranoid_status(summary: &RunSummary) -> u8 {
    match summary.paranoid_ok {
        Some(false) => {
            eprintln!("paranoid: invariant failures {:?}", summary.invariants);
            3
        }
        _ => 0,
    }
}

fn simulate(args: &RunArgs) -> Result<u8> {
    let prepared = load(args)?;
    let stats = run(&prepared, &RunOptions { trace: true, ..RunOptions::default() })?;
    let summary = write_run(&args.out, &prepared, &stats)?;
    println!(
        "{} trajectories to n = {}; ell_hat = {} [{}, {}]; wrote {}",
        stats.trials,
        stats.n_max(),
        summary.escape.ell_hat,
        summary.escape.ci.lo,
        summary.escape.ci.hi,
        args.out.display()
    );
    Ok(paranoid_status(&summary))
}

fn pivots(args: &RunArgs, trajectory: u64) -> Result<u8> {
    let prepared = load(args)?;
    let record = prepared.trajectory(trajectory, &RunOptions { trace: true, ..RunOptions::default() })?;
    fs::create_dir_all(&args.out)?;
    let path = args.out.join(format!("trace_{trajectory}.csv"));
    let trace = record.trace.expect("traces were requested");
    trace.write_csv(io::BufWriter::new(fs::File::create(&path)?))?;
    println!("{} steps, {} pivots at the end; wrote {}", trace.len(), trace.rows.last().map_or(0, |r| r.pivots), path.display());
    if prepared.config.paranoid && record.tally.failures() > 0 {
        eprintln!("paranoid: invariant failures {:?}", record.tally);
        return Ok(3);
    }
    Ok(0)
}

fn deviations(args: &RunArgs) -> Result<u8> {
    let prepared = load(args)?;
    let stats = run(&prepared, &RunOptions::default())?;
    let summary = write_run(&args.out, &prepared, &stats)?;
    for fit in &summary.decay_fits {
        match (&fit.fit, &fit.error) {
            (Some(f), _) => println!(
                "r = {}: kappa_hat = {} [{}, {}] over n in [{}, {}], {} censored{}",
                fit.r,
                f.kappa_hat,
                f.ci.lo,
                f.ci.hi,
                f.n0,
                f.n1,
                f.censored,
                if f.flagged { " (interval contains 0)" } else { "" }
            ),
            (None, Some(e)) => println!("r = {}: no fit ({e})", fit.r),
            (None, None) => {}
        }
    }
    Ok(paranoid_status(&summary))
}

fn escape(args: &RunArgs) -> Result<u8> {
    let prepared = load(args)?;
    let stats = run(&prepared, &RunOptions::default())?;
    let rate = escape_rate(&stats, RESAMPLES, prepared.config.seed)?;
    fs::create_dir_all(&args.out)?;
    write_json(&args.out.join("escape_rate.json"), &rate)?;
    println!("ell_hat = {} [{}, {}] at n = {}", rate.ell_hat, rate.ci.lo, rate.ci.hi, rate.n);
    if !rate.non_increasing {
        println!("note: E d/n rose by more than two standard errors between recorded times");
    }
    Ok(0)
}

fn domination(args: &RunArgs, sigmas: f64) -> Result<u8> {
    let prepared = load(args)?;
    let law = match &prepared.backend {
        Backend::Free { rank, .. } => ULaw::Free { d: *rank },
        Backend::Tree { plan, model, .. } => law_for(*model, plan.schottky.eta),
        Backend::Plane { plan, model, .. } => law_for(*model, plan.schottky.eta),
    };
    let stats = run(&prepared, &RunOptions::default())?;
    let report = domination_check(&stats.final_pivots, stats.n_max(), law, sigmas)?;
    fs::create_dir_all(&args.out)?;
    let mut f = io::BufWriter::new(fs::File::create(args.out.join("domination.csv"))?);
    writeln!(f, "i,law_tail,empirical_tail,sigma,violation")?;
    for row in &report.rows {
        writeln!(f, "{},{},{},{},{}", row.i, row.law_tail, row.empirical_tail, row.sigma, u8::from(row.violation))?;
    }
    f.flush()?;
    println!(
        "{:?}, n = {}, {} trials: max gap {} at i = {}, {} violations beyond {sigmas} sigma",
        report.law, report.n, report.trials, report.max_gap, report.worst_i, report.violations
    );
    let mut code = 0;
    if prepared.config.paranoid && (!report.pass || stats.tally.failures() > 0) {
        code = 3;
    }
    Ok(code)
}

fn law_for(model: hyperwalk::pivotal::Model, eta: f64) -> ULaw {
    match model {
        hyperwalk::pivotal::Model::Simple => ULaw::Simple,
        hyperwalk::pivotal::Model::Refined => ULaw::Refined { eta },
    }
}

#[derive(Deserialize)]
struct Perturbations {
    perturbation: Vec<Perturbation>,
}

#[derive(Deserialize)]
struct Perturbation {
    label: String,
    measure: MeasureSpec,
}

fn continuity(args: &RunArgs, path: &Path, r: f64, epsilon: f64) -> Result<u8> {
    let prepared = load(args)?;
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let list: Perturbations = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let rows: Vec<(String, MeasureSpec)> = list.perturbation.into_iter().map(|p| (p.label, p.measure)).collect();
    let table = continuity_sweep(&prepared.config, &rows, r, epsilon, RESAMPLES)?;
    fs::create_dir_all(&args.out)?;
    write_json(&args.out.join("continuity.json"), &table)?;
    for row in &table.rows {
        match (&row.escape, &row.error) {
            (Some(e), _) => println!("{}: ell_hat = {} [{}, {}]", row.label, e.ell_hat, e.ci.lo, e.ci.hi),
            (None, Some(err)) => println!("{}: {err}", row.label),
            _ => {}
        }
    }
    println!("min ell_hat = {}; r = {r}; {}", table.min_ell, if table.pass { "pass" } else { "FAIL" });
    Ok(if prepared.config.paranoid && !table.pass { 3 } else { 0 })
}

fn report(out: &Path) -> Result<u8> {
    let path = out.join("summary.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let summary: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let get = |p: &str| summary.pointer(p).cloned().unwrap_or(serde_json::Value::Null);
    println!("seed {}  trials {}", get("/seed"), get("/trials"));
    println!("engine {}  backend {}", get("/config/engine"), get("/config/backend"));
    println!("ell_hat {} [{}, {}] at n = {}", get("/escape/ell_hat"), get("/escape/ci/lo"), get("/escape/ci/hi"), get("/escape/n"));
    for key in ["decay_fits", "boundary_fits"] {
        if let Some(fits) = summary.get(key).and_then(|v| v.as_array()) {
            for f in fits {
                let kappa = f.pointer("/fit/kappa_hat").cloned().unwrap_or(serde_json::Value::Null);
                let lo = f.pointer("/fit/ci/lo").cloned().unwrap_or(serde_json::Value::Null);
                let hi = f.pointer("/fit/ci/hi").cloned().unwrap_or(serde_json::Value::Null);
                println!("{key} r = {}: kappa_hat {kappa} [{lo}, {hi}]", f["r"]);
            }
        }
    }
    println!("invariants {}", get("/invariants"));
    if let Some(ok) = summary.get("paranoid_ok").and_then(|v| v.as_bool()) {
        println!("paranoid {}", if ok { "ok" } else { "FAILED" });
    }
    Ok(0)
}

fn parse_matrix(s: &str) -> Result<MoebiusIsometry> {
    let v: std::result::Result<Vec<f64>, _> = s.split(',').map(|x| x.trim().parse::<f64>()).collect();
    match v.map_err(|e| Error::Input(format!("{s:?}: {e}")))?.as_slice() {
        [a, b, c, d] => MoebiusIsometry::new(*a, *b, *c, *d),
        _ => Err(Error::Input(format!("{s:?} is not four comma-separated numbers"))),
    }
}

fn print_report(report: &VerificationReport) {
    println!(
        "{} pairs ({}): worst bad fraction {} (forward {}, inverse {}), min translation {}: {}",
        report.trials,
        report.sampler,
        report.worst_bad_fraction,
        report.worst_forward,
        report.worst_inverse,
        report.translation_min,
        if report.passed { "pass" } else { "FAIL" }
    );
}

#[allow(clippy::too_many_arguments)]
fn schottky_verify(
    backend: BackendArg,
    certificate: Option<&Path>,
    generators: Option<usize>,
    (eta, c, d): (f64, f64, f64),
    radius: usize,
    pairs: usize,
    seed: u64,
) -> Result<u8> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())));
    let report = match (backend, certificate, generators) {
        (BackendArg::Tree, Some(path), _) => {
            let set: SchottkySet<GroupWord> = SchottkySet::from_json(&read(path)?)?;
            let rank = set.elements.iter().map(GroupWord::rank_hint).max().unwrap_or(1).max(1);
            verify_schottky(&FreeTree::new(rank)?, &set, &tree_ball_sampler(&FreeTree::new(rank)?, radius))?
        }
        (BackendArg::Tree, None, Some(rank)) => {
            let tree = FreeTree::new(rank)?;
            let set = SchottkySet::new(tree.generators(), eta, c, d)?;
            verify_schottky(&tree, &set, &tree_ball_sampler(&tree, radius))?
        }
        (BackendArg::Halfplane, Some(path), _) => {
            let space = HalfPlane::default();
            let set: SchottkySet<MoebiusIsometry> = SchottkySet::from_json(&read(path)?)?;
            verify_schottky(&space, &set, &h2_stratified_sampler(&space, &set.elements, pairs, seed))?
        }
        _ => return Err(Error::Config("give --certificate, or --generators with the tree backend".into())),
    };
    print_report(&report);
    Ok(if report.passed { 0 } else { 3 })
}

#[allow(clippy::too_many_arguments)]
fn schottky_construct(
    backend: BackendArg,
    uv: Option<(&str, &str)>,
    config: Option<&Path>,
    eta: f64,
    d: f64,
    engine: bool,
    out: &Path,
) -> Result<u8> {
    let limits = PingPongLimits::default();
    let (json, report, size) = match (backend, uv, config) {
        (BackendArg::Tree, Some((u, v)), _) => {
            let (u, v) = (GroupWord::parse(u)?, GroupWord::parse(v)?);
            let tree = FreeTree::new(u.rank_hint().max(v.rank_hint()).max(1))?;
            let set = if engine {
                pingpong_for_engine(&tree, &u, &v, eta, &limits)?
            } else {
                pingpong_construct(&tree, &u, &v, eta, d, &limits)?
            };
            (set.to_json()?, set.report.clone(), set.len())
        }
        (BackendArg::Halfplane, Some((u, v)), _) => {
            let space = HalfPlane::default();
            let (u, v) = (parse_matrix(u)?, parse_matrix(v)?);
            let set = if engine {
                pingpong_for_engine(&space, &u, &v, eta, &limits)?
            } else {
                pingpong_construct(&space, &u, &v, eta, d, &limits)?
            };
            (set.to_json()?, set.report.clone(), set.len())
        }
        (_, None, Some(path)) => {
            let config = RunConfig::load(path)?;
            let search = SupportSearchLimits::default();
            match config.backend {
                hyperwalk::harness::BackendSpec::Tree { rank } => {
                    let tree = FreeTree::new(rank)?;
                    let found = find_schottky_in_support(&tree, &config.measure.tree_measure(rank)?, eta, d, &search)?;
                    println!("found at power M = {}", found.power);
                    (found.set.to_json()?, found.set.report.clone(), found.set.len())
                }
                hyperwalk::harness::BackendSpec::Halfplane { .. } => {
                    let space = HalfPlane::default();
                    let found = find_schottky_in_support(&space, &config.measure.plane_measure()?, eta, d, &search)?;
                    println!("found at power M = {}", found.power);
                    (found.set.to_json()?, found.set.report.clone(), found.set.len())
                }
            }
        }
        _ => return Err(Error::Config("give --u and --v, or --config".into())),
    };
    fs::write(out, json + "\n")?;
    if let Some(r) = &report {
        print_report(r);
    }
    println!("{size} elements; wrote {}", out.display());
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::Pivots { run, trajectory } => pivots(&run, trajectory),
        Command::Deviations(args) => deviations(&args),
        Command::EscapeRate(args) => escape(&args),
        Command::Domination { run, sigmas } => domination(&run, sigmas),
        Command::Continuity { run, perturbations, r, epsilon } => continuity(&run, &perturbations, r, epsilon),
        Command::Report { out } => report(&out),
        Command::Schottky(SchottkyCommand::Verify { backend, certificate, generators, eta, c, d, radius, pairs, seed }) => {
            schottky_verify(backend, certificate.as_deref(), generators, (eta, c, d), radius, pairs, seed)
        }
        Command::Schottky(SchottkyCommand::Construct { backend, u, v, config, eta, d, engine, out }) => {
            let uv = u.as_deref().zip(v.as_deref());
            schottky_construct(backend, uv, config.as_deref(), eta, d, engine, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

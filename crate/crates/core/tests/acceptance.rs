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


//! End-to-end acceptance suite. Every criterion prints one PASS/FAIL line;
//! the test fails at the end if any criterion failed.
//!
//! Every ensemble runs twice, on 1 and on 8 workers, and the CSV bytes of
//! the two runs are compared for the determinism criterion.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::time::{Duration, Instant};

use hyperwalk::harness::{
    boundary_deviation, deviation_curve, domination_check, escape_rate, write_boundary_csv, write_stats_csv,
    EnsembleStats, MatrixAtom, MeasureSpec, Prepared, ReflectedChain, RunConfig, RunOptions, Tally, ULaw,
};
use hyperwalk::schottky::{
    h2_stratified_sampler, pingpong_construct, pingpong_for_engine, tree_ball_sampler, verify_schottky,
    PingPongLimits, SchottkySet,
};
use hyperwalk::spaces::{concat_reduce, FreeTree, Group, GroupWord, HalfPlane, MoebiusIsometry};
use hyperwalk::walks::{decompose, DiscreteMeasure, Flavor};
use hyperwalk::Error;

const ORACLE_SIGMAS: f64 = 2.0;
const DOMINATION_SIGMAS: f64 = 3.0;
const IDENTITY_TOL: f64 = 1e-10;
const ESCAPE_F2: (f64, f64) = (0.48, 0.52);
const ESCAPE_LAZY: (f64, f64) = (0.23, 0.27);
const DOMINATION_BUDGET: Duration = Duration::from_secs(120);
const DECAY_BUDGET: Duration = Duration::from_secs(600);
const WORKERS: [usize; 2] = [1, 8];

const FREE3: &str = r#"
    seed = 101
    trials = 20000
    n_max = 100
    r_grid = [0.5]
    paranoid = true
    engine = "free"
    backend = { kind = "tree", rank = 3 }
    measure = { kind = "uniform_generators" }
    free_words = { kind = "adversarial" }
"#;

const F2: &str = r#"
    seed = 202
    trials = 100000
    n_max = 200
    n_ref = 500
    r_grid = [0.25]
    paranoid = true
    engine = "simple"
    backend = { kind = "tree", rank = 2 }
    measure = { kind = "uniform_generators" }
    schottky = { kind = "generators", eta = 0.25, c0 = 0.0, d = 1.0 }
    decomposition = { n = 2, flavor = { kind = "simple" } }
"#;

const F2_LAZY: &str = r#"
    seed = 303
    trials = 20000
    n_max = 400
    r_grid = [0.125]
    paranoid = true
    engine = "simple"
    backend = { kind = "tree", rank = 2 }
    measure = { kind = "lazy_generators", hold = 0.5 }
    schottky = { kind = "generators", eta = 0.25, c0 = 0.0, d = 1.0 }
    decomposition = { n = 2, flavor = { kind = "simple" } }
"#;

const CUBES_MEASURE: &str = r#"
    backend = { kind = "tree", rank = 3 }
    measure = { kind = "words", atoms = [
        { word = "aaa", weight = 1.0 }, { word = "bbb", weight = 1.0 }, { word = "ccc", weight = 1.0 },
        { word = "AAA", weight = 1.0 }, { word = "BBB", weight = 1.0 }, { word = "CCC", weight = 1.0 },
    ] }
    schottky = { kind = "words", words = ["aaa", "bbb", "ccc", "AAA", "BBB", "CCC"], eta = 0.17, c0 = 0.0, d = 3.0 }
"#;

const TREE_SIMPLE: &str = r#"
    seed = 404
    trials = 10000
    n_max = 60
    r_grid = [0.5]
    paranoid = true
    engine = "simple"
    decomposition = { n = 2, alpha_fraction = 0.5, flavor = { kind = "simple" } }
"#;

const TREE_REFINED: &str = r#"
    seed = 505
    trials = 10000
    n_max = 60
    r_grid = [0.5]
    paranoid = true
    engine = "refined"
    decomposition = { n = 5, alpha_fraction = 0.5, flavor = { kind = "refined" } }
"#;

const SHADOW: &str = r#"
    seed = 606
    trials = 1000
    n_max = 120
    r_grid = [0.5]
    paranoid = true
    engine = "refined"
    decomposition = { n = 5, alpha_fraction = 0.5, flavor = { kind = "refined" } }
"#;

const SHADOW_ANCHOR: usize = 2;

fn line(text: &str) {
    // Written to the raw handle so the lines survive output capture.
    let mut err = std::io::stderr().lock();
    writeln!(err, "{text}").unwrap();
}

#[derive(Default)]
struct Book {
    results: BTreeMap<u32, (bool, String)>,
    tally: Tally,
    engine_runs: usize,
    csv_mismatches: Vec<String>,
    csv_runs: usize,
}

impl Book {
    fn record(&mut self, criterion: u32, pass: bool, detail: String) {
        line(&format!("criterion {criterion:>2}: {}  {detail}", if pass { "PASS" } else { "FAIL" }));
        self.results.insert(criterion, (pass, detail));
    }

    /// Runs `config` on each worker count, compares the CSV bytes and
    /// returns the single-worker statistics with the elapsed time of that run.
    fn run(&mut self, label: &str, config: RunConfig, opts: &RunOptions) -> (Prepared, EnsembleStats, Duration) {
        let prepared = Prepared::new(config).unwrap_or_else(|e| panic!("{label}: {e}"));
        let mut first: Option<(EnsembleStats, Vec<u8>, Duration)> = None;
        for workers in WORKERS {
            let start = Instant::now();
            let stats = prepared.run(workers, opts).unwrap_or_else(|e| panic!("{label}: {e}"));
            let elapsed = start.elapsed();
            let bytes = csv_bytes(&stats);
            match &first {
                None => first = Some((stats, bytes, elapsed)),
                Some((_, reference, _)) => {
                    if *reference != bytes {
                        self.csv_mismatches.push(format!("{label} ({workers} workers)"));
                    }
                }
            }
        }
        self.csv_runs += 1;
        let (stats, _, elapsed) = first.unwrap();
        if stats.tally.steps > 0 {
            self.engine_runs += 1;
            add(&mut self.tally, &stats.tally);
        }
        line(&format!("    {label}: {} trajectories to n = {} in {:.1?}", stats.trials, stats.n_max(), elapsed));
        (prepared, stats, elapsed)
    }
}

fn add(total: &mut Tally, t: &Tally) {
    total.steps += t.steps;
    total.certificate_failures += t.certificate_failures;
    total.chain_failures += t.chain_failures;
    total.origin_chain_failures += t.origin_chain_failures;
    total.bound_failures += t.bound_failures;
    total.stack_failures += t.stack_failures;
}

fn csv_bytes(stats: &EnsembleStats) -> Vec<u8> {
    let mut buf = Vec::new();
    for k in 0..stats.r_grid.len() {
        write_stats_csv(stats, k, &mut buf).unwrap();
        if stats.proxy.is_some() {
            write_boundary_csv(stats, k, &mut buf).unwrap();
        }
    }
    buf
}

fn tree_config(head: &str) -> RunConfig {
    RunConfig::from_toml(&format!("{head}\n{CUBES_MEASURE}")).unwrap()
}

fn loxodromics() -> (MoebiusIsometry, MoebiusIsometry) {
    let u = MoebiusIsometry::diag(2.0);
    let rot = MoebiusIsometry::rotation(FRAC_PI_2);
    let v = rot.compose(&u).compose(&rot.inverse());
    (u, v)
}

/// Half-plane run on the uniform measure over an engine-grade ping-pong set.
fn plane_config(dir: &std::path::Path, set: &SchottkySet<MoebiusIsometry>, head: &str) -> RunConfig {
    let path = dir.join("plane_schottky.json");
    std::fs::write(&path, set.to_json().unwrap()).unwrap();
    let mut config = RunConfig::from_toml(&format!(
        "{head}\nbackend = {{ kind = \"halfplane\" }}\nmeasure = {{ kind = \"uniform_generators\" }}\n\
         schottky = {{ kind = \"certificate\", path = {:?} }}",
        path.to_string_lossy()
    ))
    .unwrap();
    let atoms = set.elements.iter().map(|g| MatrixAtom { matrix: g.entries(), weight: 1.0 }).collect();
    config.measure = MeasureSpec::Matrices { atoms };
    config
}

const PLANE_SIMPLE: &str = r#"
    seed = 707
    trials = 10000
    n_max = 20
    r_grid = [1.0]
    paranoid = true
    engine = "simple"
    decomposition = { n = 2, flavor = { kind = "simple" } }
"#;

const PLANE_REFINED: &str = r#"
    seed = 808
    trials = 10000
    n_max = 20
    r_grid = [1.0]
    paranoid = true
    engine = "refined"
    decomposition = { n = 2, flavor = { kind = "gapped", gap = 1 } }
"#;

fn domination(book: &mut Book) {
    let config = RunConfig::from_toml(FREE3).unwrap();
    let (_, stats, elapsed) = book.run("free F3, adversarial words", config, &RunOptions::default());
    let report = domination_check(&stats.final_pivots, 100, ULaw::Free { d: 3 }, DOMINATION_SIGMAS).unwrap();
    let pass = report.pass && report.trials == 20_000 && elapsed < DOMINATION_BUDGET;
    book.record(
        1,
        pass,
        format!(
            "max gap {:.4} at i = {}, {} violations beyond {DOMINATION_SIGMAS} sigma, {:.1?}",
            report.max_gap, report.worst_i, report.violations, elapsed
        ),
    );
}

fn decay_and_escape(book: &mut Book) {
    let config = RunConfig::from_toml(F2).unwrap();
    let (_, stats, elapsed) = book.run("F2 generators, simple engine", config, &RunOptions::default());

    // Decay fit plus the exact reflected chain.
    let curve = deviation_curve(&stats, 0.25).unwrap();
    let fit = hyperwalk::harness::decay_fit(0.25, &curve);
    let oracle = ReflectedChain::new(2, 0.0).unwrap().deviation_series(0.25, 60);
    let mut worst = 0.0f64;
    let mut misses = Vec::new();
    let mut compared = 0;
    for p in curve.iter().filter(|p| p.n <= 60) {
        let exact = oracle[p.n];
        let sigma = (exact * (1.0 - exact) / p.trials as f64).sqrt();
        let z = if sigma > 0.0 { (p.p - exact).abs() / sigma } else { f64::INFINITY * (p.p - exact).abs() };
        worst = worst.max(z);
        compared += 1;
        if (p.p - exact).abs() > ORACLE_SIGMAS * sigma + 1e-12 {
            misses.push(format!("n={} z={z:.2}", p.n));
        }
    }
    let (fit_ok, fit_text) = match &fit {
        Ok(f) => (f.kappa_hat > 0.0 && f.ci.lo > 0.0, format!("kappa_hat {:.4} [{:.4}, {:.4}]", f.kappa_hat, f.ci.lo, f.ci.hi)),
        Err(e) => (false, format!("no fit: {e}")),
    };
    let pass = fit_ok && misses.is_empty() && compared >= 30 && elapsed < DECAY_BUDGET;
    book.record(
        4,
        pass,
        format!(
            "{fit_text}; oracle: {compared} points, worst |z| {worst:.2}, outside {ORACLE_SIGMAS} sigma: [{}]; {elapsed:.1?}",
            misses.join(", ")
        ),
    );

    // Escape rates.
    let rate = escape_rate(&stats, 400, 202).unwrap();
    let lazy = RunConfig::from_toml(F2_LAZY).unwrap();
    let (_, lazy_stats, _) = book.run("F2 lazy generators, simple engine", lazy, &RunOptions::default());
    let lazy_rate = escape_rate(&lazy_stats, 400, 303).unwrap();
    let inside = |x: f64, (lo, hi): (f64, f64)| lo <= x && x <= hi;
    book.record(
        5,
        inside(rate.ell_hat, ESCAPE_F2) && inside(lazy_rate.ell_hat, ESCAPE_LAZY),
        format!("ell_hat {:.4} (n = {}), lazy {:.4} (n = {})", rate.ell_hat, rate.n, lazy_rate.ell_hat, lazy_rate.n),
    );

    // Boundary proxy.
    let b = boundary_deviation(&stats, 0.25).unwrap();
    let (ok, text) = match &b.fit.fit {
        Some(f) => (f.kappa_hat > 0.0 && f.ci.lo > 0.0, format!("kappa_hat {:.4} [{:.4}, {:.4}]", f.kappa_hat, f.ci.lo, f.ci.hi)),
        None => (false, format!("no fit: {}", b.fit.error.clone().unwrap_or_default())),
    };
    book.record(9, ok && b.n_ref == 500, format!("n_ref {}: {text}", b.n_ref));
}

fn distance_bounds(book: &mut Book) {
    let space = HalfPlane::default();
    let (u, v) = loxodromics();
    let set = pingpong_for_engine(&space, &u, &v, 0.25, &PingPongLimits::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let runs = [
        ("tree simple", tree_config(TREE_SIMPLE)),
        ("tree refined", tree_config(TREE_REFINED)),
        ("plane simple", plane_config(dir.path(), &set, PLANE_SIMPLE)),
        ("plane refined", plane_config(dir.path(), &set, PLANE_REFINED)),
    ];
    let mut detail = Vec::new();
    let mut pass = true;
    for (label, config) in runs {
        let (_, stats, _) = book.run(label, config, &RunOptions::default());
        let t = &stats.tally;
        pass &= stats.trials >= 10_000 && t.steps > 0 && t.bound_failures == 0;
        detail.push(format!("{label}: {} of {} steps", t.steps - t.bound_failures, t.steps));
    }
    book.record(2, pass, detail.join("; "));
}

fn shadow(book: &mut Book) {
    let config = tree_config(SHADOW);
    let opts = RunOptions { shadow_anchor: Some(SHADOW_ANCHOR), ..RunOptions::default() };
    let (_, stats, _) = book.run("tree refined, shadow probe", config, &opts);
    let s = &stats.shadow;
    book.record(
        8,
        stats.trials == 1000 && s.held > 0 && s.checked > 0 && s.failures == 0,
        format!(
            "anchor index {SHADOW_ANCHOR}: {} anchored, {} held, {} of {} later positions in the shadow",
            s.anchored,
            s.held,
            s.checked - s.failures,
            s.checked
        ),
    );
}

fn schottky(book: &mut Book) {
    let tree = FreeTree::new(3).unwrap();
    let gens = SchottkySet::new(tree.generators(), 1.0 / 3.0, 0.0, 1.0).unwrap();
    let tree_report = verify_schottky(&tree, &gens, &tree_ball_sampler(&tree, 4)).unwrap();

    let space = HalfPlane::default();
    let (u, v) = loxodromics();
    let (plane_ok, plane_text) = match pingpong_construct(&space, &u, &v, 0.25, 5.0, &PingPongLimits::default()) {
        Ok(set) => {
            let fresh = h2_stratified_sampler(&space, &set.elements, 10_000, 0x5eed);
            let r = verify_schottky(&space, &set, &fresh).unwrap();
            (
                r.passed && r.translation_ok && r.trials >= 10_000,
                format!(
                    "ping-pong: {} elements at (eta {}, C {:.3}, D {}), {} fresh pairs, worst {:.4}, min translation {:.3}",
                    set.len(),
                    set.eta,
                    set.c,
                    set.d,
                    r.trials,
                    r.worst_bad_fraction,
                    r.translation_min
                ),
            )
        }
        Err(e) => (false, format!("ping-pong failed: {e}")),
    };
    book.record(
        6,
        tree_report.passed && plane_ok,
        format!("F3 generators: {} pairs, worst {:.4}; {plane_text}", tree_report.trials, tree_report.worst_bad_fraction),
    );
}

fn identity(book: &mut Book) {
    let tree = FreeTree::new(2).unwrap();
    let mu = DiscreteMeasure::uniform(tree.generators()).unwrap();
    let set = SchottkySet::new(tree.generators(), 0.25, 0.0, 1.0).unwrap();

    // Brute-force convolution of two uniform measures on the generators.
    let square = |m: &DiscreteMeasure<GroupWord>| {
        let mut out: BTreeMap<GroupWord, f64> = BTreeMap::new();
        for (g, p) in m.atoms() {
            for (h, q) in m.atoms() {
                *out.entry(concat_reduce(g, h)).or_default() += p * q;
            }
        }
        out
    };
    let mu2 = square(&mu);
    let mu_s2 = square(&DiscreteMeasure::uniform(set.elements.clone()).unwrap());
    let amax = mu_s2.iter().map(|(g, p)| mu2.get(g).copied().unwrap_or(0.0) / p).fold(f64::INFINITY, f64::min);

    let half = decompose(&mu, 2, &set, amax / 2.0, Flavor::Simple);
    let (half_ok, half_text) = match half {
        Ok(plan) => {
            let nu = plan.nu.as_ref().expect("alpha < 1 leaves a remainder");
            let mut keys: Vec<&GroupWord> = mu2.keys().chain(mu_s2.keys()).collect();
            keys.extend(nu.atoms().iter().map(|(g, _)| g));
            let err = keys
                .into_iter()
                .map(|g| {
                    let lhs = mu2.get(g).copied().unwrap_or(0.0);
                    let rhs = plan.alpha * mu_s2.get(g).copied().unwrap_or(0.0) + (1.0 - plan.alpha) * nu.prob(g);
                    (lhs - rhs).abs()
                })
                .fold(0.0, f64::max);
            let nu_ok = nu.atoms().iter().all(|(_, p)| *p >= 0.0);
            (
                err <= IDENTITY_TOL && nu_ok && (plan.alpha_max - amax).abs() <= IDENTITY_TOL,
                format!("alpha {} (alpha_max {}): max atom error {err:.2e}", plan.alpha, plan.alpha_max),
            )
        }
        Err(e) => (false, format!("alpha_max/2 rejected: {e}")),
    };
    let (double_ok, double_text) = match decompose(&mu, 2, &set, 2.0 * amax, Flavor::Simple) {
        Err(Error::Infeasible { alpha, alpha_max }) => (true, format!("alpha {alpha} infeasible (alpha_max {alpha_max})")),
        Err(e) => (false, format!("unexpected error at 2 alpha_max: {e}")),
        Ok(_) => (false, "2 alpha_max accepted".to_string()),
    };
    book.record(7, half_ok && double_ok, format!("{half_text}; {double_text}"));
}

#[test]
fn acceptance() {
    let mut book = Book::default();
    domination(&mut book);
    distance_bounds(&mut book);
    decay_and_escape(&mut book);
    schottky(&mut book);
    identity(&mut book);
    shadow(&mut book);

    let t = &book.tally;
    let chain_violations = t.chain_failures + t.origin_chain_failures + t.certificate_failures + t.stack_failures;
    book.record(
        3,
        book.engine_runs >= 7 && t.steps > 0 && chain_violations == 0,
        format!(
            "{} engine runs, {} snapshots: {} chain, {} origin chain, {} certificate, {} stack violations",
            book.engine_runs, t.steps, t.chain_failures, t.origin_chain_failures, t.certificate_failures, t.stack_failures
        ),
    );
    book.record(
        10,
        book.csv_mismatches.is_empty(),
        format!(
            "{} runs compared on {:?} workers; mismatches: [{}]",
            book.csv_runs,
            WORKERS,
            book.csv_mismatches.join(", ")
        ),
    );

    line("summary:");
    let mut failed = Vec::new();
    for (k, (pass, _)) in &book.results {
        line(&format!("  {k:>2} {}", if *pass { "PASS" } else { "FAIL" }));
        if !pass {
            failed.push(*k);
        }
    }
    assert_eq!(book.results.len(), 10);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

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


use std::path::Path;
use std::process::{Command, Output};

const FREE: &str = r#"
seed = 4
trials = 200
n_max = 30
r_grid = [0.5]
paranoid = true
engine = "free"
backend = { kind = "tree", rank = 3 }
measure = { kind = "uniform_generators" }
free_words = { kind = "adversarial" }
"#;

const SIMPLE: &str = r#"
seed = 4
trials = 300
n_max = 60
n_ref = 100
r_grid = [0.25]
engine = "simple"
backend = { kind = "tree", rank = 2 }
measure = { kind = "uniform_generators" }
schottky = { kind = "generators", eta = 0.25, c0 = 0.0, d = 1.0 }
decomposition = { n = 2, flavor = { kind = "simple" } }
"#;

fn hyperwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperwalk")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "run.toml", SIMPLE);
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let run = hyperwalk(&["simulate", "--config", &config, "--out", out_s, "--workers", "2", "--paranoid"]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    for f in ["summary.json", "stats_r0.25.csv", "boundary_r0.25.csv", "mean_distance.csv", "trace.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report = hyperwalk(&["report", "--out", out_s]);
    assert_eq!(code(&report), 0);
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("ell_hat"), "{text}");
    assert!(text.contains("paranoid ok"), "{text}");

    // Seed override changes the output; the same seed reproduces it.
    let again = dir.path().join("again");
    let run = hyperwalk(&["simulate", "--config", &config, "--out", again.to_str().unwrap(), "--workers", "1"]);
    assert_eq!(code(&run), 0);
    let a = std::fs::read(out.join("stats_r0.25.csv")).unwrap();
    assert_eq!(a, std::fs::read(again.join("stats_r0.25.csv")).unwrap());
    let other = dir.path().join("other");
    hyperwalk(&["simulate", "--config", &config, "--out", other.to_str().unwrap(), "--seed", "99"]);
    assert_ne!(a, std::fs::read(other.join("stats_r0.25.csv")).unwrap());
}

#[test]
fn analysis_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let free = write(dir.path(), "free.toml", FREE);
    let simple = write(dir.path(), "simple.toml", SIMPLE);
    let out = dir.path().to_str().unwrap();

    let dom = hyperwalk(&["domination", "--config", &free, "--out", out]);
    assert_eq!(code(&dom), 0, "{}", String::from_utf8_lossy(&dom.stderr));
    assert!(dir.path().join("domination.csv").exists());

    let piv = hyperwalk(&["pivots", "--config", &free, "--out", out, "--trajectory", "3"]);
    assert_eq!(code(&piv), 0);
    let trace = std::fs::read_to_string(dir.path().join("trace_3.csv")).unwrap();
    assert_eq!(trace.lines().count(), 31);

    let dev = hyperwalk(&["deviations", "--config", &simple, "--out", out]);
    assert_eq!(code(&dev), 0);
    assert!(String::from_utf8_lossy(&dev.stdout).contains("r = 0.25"));

    let esc = hyperwalk(&["escape-rate", "--config", &simple, "--out", out]);
    assert_eq!(code(&esc), 0);
    assert!(dir.path().join("escape_rate.json").exists());

    let perturb = write(
        dir.path(),
        "perturb.toml",
        r#"
[[perturbation]]
label = "base"
measure = { kind = "uniform_generators" }

[[perturbation]]
label = "lazy"
measure = { kind = "lazy_generators", hold = 0.1 }
"#,
    );
    let cont = hyperwalk(&["continuity", "--config", &simple, "--out", out, "--perturbations", &perturb, "--r", "0.2", "--epsilon", "0.1"]);
    assert_eq!(code(&cont), 0, "{}", String::from_utf8_lossy(&cont.stderr));
    assert!(String::from_utf8_lossy(&cont.stdout).contains("lazy"));
}

#[test]
fn schottky_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let verify = hyperwalk(&["schottky", "verify", "--generators", "3", "--eta", "0.3334", "--radius", "3"]);
    assert_eq!(code(&verify), 0, "{}", String::from_utf8_lossy(&verify.stdout));
    let strict = hyperwalk(&["schottky", "verify", "--generators", "3", "--eta", "0.2", "--radius", "3"]);
    assert_eq!(code(&strict), 3);

    let cert = dir.path().join("tree.json");
    let c = cert.to_str().unwrap();
    let build = hyperwalk(&["schottky", "construct", "--u", "a", "--v", "b", "--eta", "0.5", "--d", "3", "--out", c]);
    assert_eq!(code(&build), 0, "{}", String::from_utf8_lossy(&build.stderr));
    let check = hyperwalk(&["schottky", "verify", "--certificate", c, "--radius", "3"]);
    assert_eq!(code(&check), 0, "{}", String::from_utf8_lossy(&check.stdout));

    let same = hyperwalk(&["schottky", "construct", "--backend", "halfplane", "--u", "2,0,0,0.5", "--v", "2,0,0,0.5", "--out", c]);
    assert_eq!(code(&same), 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let infeasible = write(dir.path(), "inf.toml", &SIMPLE.replace("n = 2,", "n = 2, alpha = 2.0,"));
    assert_eq!(code(&hyperwalk(&["simulate", "--config", &infeasible, "--out", out])), 2);
    let broken = write(dir.path(), "bad.toml", "trials = 0\n");
    let run = hyperwalk(&["simulate", "--config", &broken, "--out", out]);
    assert_eq!(code(&run), 1);
    assert!(String::from_utf8_lossy(&run.stderr).starts_with("error:"));
    assert_eq!(code(&hyperwalk(&["report", "--out", "/nonexistent/dir"])), 1);
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name.ends_with(".toml") && name != "perturbations.toml" {
            let config = hyperwalk::harness::RunConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
            hyperwalk::harness::Prepared::new(config).unwrap_or_else(|e| panic!("{name}: {e}"));
            seen += 1;
        }
    }
    assert!(seen >= 3);
}

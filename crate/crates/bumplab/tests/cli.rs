use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bumplab::instance::{parse_instance, read_instance, to_json, InstanceFile};
use bumplab::report::parse_csv;
use bumplab_core::search::{generate_instance, GenConfig, GenKind};
use proptest::prelude::*;
use tempfile::TempDir;

fn bumplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bumplab")).args(args).arg("--quiet").output().expect("binary runs")
}

fn bumplab_env(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bumplab")).args(args).arg("--quiet").env("BUMPLAB_THREADS", threads).output().expect("binary runs")
}

fn gen(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut args = vec!["gen", "--output", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = bumplab(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn rows(out: &Output) -> Vec<BTreeMap<String, String>> {
    parse_csv(std::str::from_utf8(&out.stdout).unwrap())
}

#[test]
fn gen_then_constants_gives_one_row() {
    let dir = TempDir::new().unwrap();
    let i = gen(dir.path(), "i.json", &["--kind", "lognormal", "--d", "1", "--L", "4", "--seed", "7"]);
    let out = bumplab(&["constants", "--input", i.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = rows(&out);
    assert_eq!(r.len(), 1);
    for c in ["ap", "separated_sw", "separated_ws", "entangled_sw_one_plus_rho", "entangled_ws_rho"] {
        let v: f64 = r[0][c].parse().unwrap();
        assert!(v.is_finite() && v > 0.0, "{c} = {v}");
    }
    assert!(!r[0].contains_key("flags"));
}

#[test]
fn missing_file_exits_2() {
    let out = bumplab(&["constants", "--input", "missing.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));
}

#[test]
fn unknown_flag_exits_2() {
    assert_eq!(bumplab(&["constants", "--input", "x.json", "--frobnicate"]).status.code(), Some(2));
    assert_eq!(bumplab(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(bumplab(&["gen", "--kind", "gaussian"]).status.code(), Some(2));
}

#[test]
fn malformed_files_name_the_line_or_field() {
    let dir = TempDir::new().unwrap();
    let i = gen(dir.path(), "i.json", &["--L", "3", "--seed", "1"]);
    let text = std::fs::read_to_string(&i).unwrap();

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, text.replacen("\"sigma\": [", "\"sigma\": [,", 1)).unwrap();
    let out = bumplab(&["testing", "--input", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"), "{}", String::from_utf8_lossy(&out.stderr));

    let mut file: InstanceFile = parse_instance(&text, "i").unwrap();
    file.w.pop();
    let short = dir.path().join("short.json");
    std::fs::write(&short, to_json(&file)).unwrap();
    let out = bumplab(&["testing", "--input", short.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("field `w`"));

    let mut file: InstanceFile = parse_instance(&text, "i").unwrap();
    file.sparse = vec![vec![0, 0], vec![1, 0], vec![1, 1]];
    let dense = dir.path().join("dense.json");
    std::fs::write(&dense, to_json(&file)).unwrap();
    let out = bumplab(&["testing", "--input", dense.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("field `sparse`"));
}

#[test]
fn verify_theorem_composes_the_individual_commands() {
    let dir = TempDir::new().unwrap();
    let i = gen(dir.path(), "i.json", &["--L", "5", "--seed", "11", "--kind", "power-spike"]);
    let input = i.to_str().unwrap();
    let full = rows(&bumplab(&["verify-theorem", "--input", input, "--steps", "0"]));
    assert_eq!(full.len(), 1);
    let mut checked = 0;
    for cmd in ["testing", "norm", "constants", "corona-report"] {
        let part = rows(&bumplab(&[cmd, "--input", input]));
        for (k, v) in &part[0] {
            if k == "command" {
                continue;
            }
            assert_eq!(full[0].get(k), Some(v), "{cmd}: column {k}");
            checked += 1;
        }
    }
    assert!(checked > 40);
    let norm: f64 = full[0]["norm"].parse().unwrap();
    let ent: f64 =
        full[0]["entangled_sw_one_plus_rho"].parse::<f64>().unwrap() + full[0]["entangled_ws_one_plus_rho"].parse::<f64>().unwrap();
    let theorem: f64 = full[0]["theorem_ratio"].parse().unwrap();
    assert_eq!(theorem, norm / ent);
}

#[test]
fn commands_are_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = gen(dir.path(), "a.json", &["--L", "4", "--seed", "3"]);
    let b = gen(dir.path(), "b.json", &["--L", "4", "--seed", "3"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let input = a.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["constants", "--input", input],
        vec!["testing", "--input", input],
        vec!["norm", "--input", input],
        vec!["corona-report", "--input", input, "--arg-mode", "rho"],
        vec!["verify-theorem", "--input", input, "--steps", "20", "--format", "json"],
        vec!["prop-eta", "--input", input],
        vec!["search", "--L", "4", "--steps", "30", "--restarts", "3", "--seed", "5"],
    ];
    for args in cases {
        let x = bumplab(&args);
        let y = bumplab(&args);
        assert_eq!(x.status.code(), Some(0), "{args:?}");
        assert!(!x.stdout.is_empty());
        assert_eq!(x.stdout, y.stdout, "{args:?}");
    }
}

#[test]
fn batches_keep_input_order_for_any_thread_count() {
    let dir = TempDir::new().unwrap();
    let paths: Vec<PathBuf> = (0..6).map(|s| gen(dir.path(), &format!("i{s}.json"), &["--seed", &s.to_string()])).collect();
    let mut args = vec!["verify-theorem"];
    for p in &paths {
        args.push("--input");
        args.push(p.to_str().unwrap());
    }
    let one = bumplab_env(&args, "1");
    let four = bumplab_env(&args, "4");
    assert_eq!(one.stdout, four.stdout);
    let r = rows(&one);
    let ids: Vec<&str> = r.iter().map(|x| x["id"].as_str()).collect();
    let expected: Vec<&str> = paths.iter().map(|p| p.to_str().unwrap()).collect();
    assert_eq!(ids, expected);
    assert_eq!(bumplab_env(&args, "lots").status.code(), Some(2));
}

#[test]
fn search_writes_best_instance_and_trace() {
    let dir = TempDir::new().unwrap();
    let best = dir.path().join("best.json");
    let trace = dir.path().join("trace.csv");
    let out = bumplab(&[
        "search",
        "--L",
        "4",
        "--steps",
        "40",
        "--restarts",
        "2",
        "--output",
        best.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = rows(&out);
    assert_eq!(r.len(), 2);
    let top = r.iter().map(|x| x["search_best"].parse::<f64>().unwrap()).fold(0.0, f64::max);
    let file = read_instance(&best).unwrap();
    file.to_instance().unwrap();
    assert_eq!(std::fs::read_to_string(&trace).unwrap().lines().count(), 1 + 2 * 40);
    for x in &r {
        assert!(x["search_best"].parse::<f64>().unwrap() >= x["search_start"].parse::<f64>().unwrap());
    }
    assert!(top > 0.0);
}

#[test]
fn append_writes_one_header() {
    let dir = TempDir::new().unwrap();
    let i = gen(dir.path(), "i.json", &[]);
    let report = dir.path().join("r.csv");
    for _ in 0..3 {
        let out = bumplab(&["testing", "--input", i.to_str().unwrap(), "--output", report.to_str().unwrap(), "--append"]);
        assert_eq!(out.status.code(), Some(0));
    }
    let text = std::fs::read_to_string(&report).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert_eq!(text.lines().filter(|l| l.starts_with("id,")).count(), 1);
}

#[test]
fn overrides_replace_instance_values() {
    let dir = TempDir::new().unwrap();
    let i = gen(dir.path(), "i.json", &["--A", "loglog-bump:eta=0.5", "--eps", "log-power:b=1"]);
    let file = read_instance(&i).unwrap();
    assert_eq!(file.young.a.family, "loglog-bump");
    assert_eq!(file.young.a.eta, 0.5);
    let input = i.to_str().unwrap();
    let out = bumplab(&["constants", "--input", input, "--p", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(rows(&out)[0]["p"], "3.0000000000000000e0");
    let out = bumplab(&["prop-eta", "--input", input]);
    assert_eq!(rows(&out)[0]["prop_case"], "loglog");
    assert_eq!(bumplab(&["constants", "--input", input, "--A", "cubic"]).status.code(), Some(2));
    assert_eq!(bumplab(&["constants", "--input", input, "--eps", "power:b=1"]).status.code(), Some(2));
    assert_eq!(bumplab(&["constants", "--input", input, "--p", "1"]).status.code(), Some(2));
}

fn kind(k: u8) -> GenKind {
    [GenKind::Lognormal, GenKind::PowerSpike, GenKind::Lacunary][k as usize % 3]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn instance_files_round_trip(k in 0u8..3, d in 1u32..3, l in 1u32..4, p in 1.1f64..4.0, seed in 0u64..1000) {
        let inst = generate_instance(kind(k), d, l, p, seed, &GenConfig::default()).unwrap();
        let file = InstanceFile::from_instance(&inst);
        let text = to_json(&file);
        let back = parse_instance(&text, "mem").unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(to_json(&back), text);
        let rebuilt = back.to_instance().unwrap();
        prop_assert_eq!(rebuilt.sigma.cells(), inst.sigma.cells());
        prop_assert_eq!(rebuilt.w.cells(), inst.w.cells());
        prop_assert_eq!(rebuilt.collection.cubes(), inst.collection.cubes());
        prop_assert_eq!(rebuilt.eps_p, inst.eps_p);
        prop_assert_eq!(InstanceFile::from_instance(&rebuilt), file);
    }
}

use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlapportion"))
        .args(args)
        .env_remove("MLAPPORTION_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn allocate_adams_on_paired_halves() {
    let o = run(&["allocate", &data("paired_halves.json"), "--method", "adams", "--seats", "6"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "{\"h\":6,\"seats\":[6,2,1,2,1,3,3]}\n");
}

#[test]
fn allocate_trajectory_lists_every_house() {
    let o = run(&["allocate", &data("lopsided_two_level.json"), "--method", "quota", "--seats", "5", "--trajectory"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let allocs = v["allocations"].as_array().unwrap();
    assert_eq!(allocs.len(), 6);
    assert_eq!(allocs[0], serde_json::json!([0, 0, 0, 0, 0]));
    assert_eq!(allocs[5], serde_json::json!([5, 5, 0, 5, 0]));
}

#[test]
fn both_quotas_prints_notice() {
    let o = run(&["allocate", &data("paired_halves.json"), "--method", "both-quotas", "--seats", "6"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("not house monotone"));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let seats = v["seats"].as_array().unwrap();
    assert_eq!(seats[5], 3);
    assert_eq!(seats[6], 3);
}

#[test]
fn strict_check_fails_on_violating_allocation() {
    let o = run(&["check", &data("paired_halves.json"), &data("paired_halves_bad_alloc.json"), "--strict"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("node 5: upper quota violated"), "{out}");
    assert!(out.contains("node 6: lower quota violated"), "{out}");
}

#[test]
fn lenient_check_reports_but_succeeds() {
    let o = run(&["check", &data("paired_halves.json"), &data("paired_halves_bad_alloc.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("1 lower, 1 upper"));
}

#[test]
fn root_mode_check_sees_same_violations_here() {
    let o = run(&["check", &data("paired_halves.json"), &data("paired_halves_bad_alloc.json"), "--mode", "root", "--strict"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn broken_flow_always_fails() {
    let o = run(&["check", &data("paired_halves.json"), &data("flow_broken.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("flow violation"));
}

#[test]
fn validate_rejects_unnormalized_children() {
    let o = run(&["validate", &data("sum_five_sixths.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ChildrenWeightsNotNormalized"), "{}", stderr(&o));
    assert!(stderr(&o).contains("5/6"));
}

#[test]
fn validate_accepts_good_instance() {
    let o = run(&["validate", &data("paired_halves.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "ok: 7 nodes, height 2\n");
}

#[test]
fn malformed_json_reports_position() {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let path = dir.join("malformed.json");
    std::fs::write(&path, "{\"nodes\": [\n  {\"id\": 0,,}\n]}").unwrap();
    let o = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2 column"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["allocate", &data("paired_halves.json"), "--method", "webster", "--seats", "3"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["generate", "--family", "binary"]).status.code(), Some(2));
}

#[test]
fn reduce_emits_mapping() {
    let o = run(&["reduce", &data("paired_halves.json")]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["forward_map"].as_array().unwrap().len(), 7);
    assert!(v["introduced"].as_array().unwrap().is_empty());
}

#[test]
fn generate_is_deterministic_and_valid() {
    let a = run(&["generate", "--family", "4ary", "--height", "3", "--seed", "42"]);
    let b = run(&["generate", "--family", "4ary", "--height", "3", "--seed", "42"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let inst = mlapportion::Instance::from_json(&stdout(&a)).unwrap();
    assert_eq!(inst.len(), 29);
}

#[test]
fn seed_flag_beats_environment() {
    let with_env = |seed_env: &str, args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_mlapportion")).args(args).env("MLAPPORTION_SEED", seed_env).output().unwrap().stdout
    };
    let base = ["generate", "--family", "binary", "--height", "2"];
    let env5 = with_env("5", &base);
    let flag5 = run(&[&base[..], &["--seed", "5"]].concat()).stdout;
    assert_eq!(env5, flag5);
    let flag_wins = with_env("9", &[&base[..], &["--seed", "5"]].concat());
    assert_eq!(flag_wins, flag5);
}

#[test]
fn experiment_config_and_flags_agree() {
    let from_file = run(&["experiment", "--config", &data("experiment.json")]);
    assert_eq!(from_file.status.code(), Some(0), "{}", stderr(&from_file));
    let from_flags = run(&[
        "experiment", "--family", "binary", "--height", "3", "--instances", "5", "--seed", "7", "--houses", "10,20", "--serial",
    ]);
    assert_eq!(from_file.stdout, from_flags.stdout);
    let text = stdout(&from_file);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("method,family,height,n,h,lq_violation_rate_pct,uq_violation_rate_pct,avg_deviation,max_deviation")
    );
    assert_eq!(lines.count(), 8);
}

#[test]
fn experiment_markdown() {
    let o = run(&["experiment", "--config", &data("experiment.json"), "--out", "md", "--methods", "adams,ucquota"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with('|'));
    assert!(text.contains("UC Quota"));
    assert!(!text.contains("Jefferson"));
}

#[test]
fn oracle_lists_all_compliant_allocations() {
    let o = run(&["oracle", &data("paired_halves.json"), "--seats", "6"]);
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<_> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines.len(), 4);
    for l in lines {
        let a = mlapportion::Allocation::from_json(&l).unwrap();
        assert_eq!((a.seats[5], a.seats[6]), (3, 3));
    }
}

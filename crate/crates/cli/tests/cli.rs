use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use beliefplan::generators::minefield;
use beliefplan::table_io::load_table;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_beliefplan"));
    c.env_remove("BELIEFPLAN_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn generate(dir: &Path, args: &[&str]) -> (PathBuf, PathBuf) {
    let mut full = vec!["generate"];
    full.extend_from_slice(args);
    let out = dir.to_str().unwrap();
    full.extend_from_slice(&["--out", out]);
    let o = run(&full);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    (PathBuf::from(lines[0]), PathBuf::from(lines[1]))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_localize_5() {
    let dir = tempfile::tempdir().unwrap();
    let (d, p) = generate(dir.path(), &["localize", "--n", "5"]);
    let o = run(&["validate", s(&d), s(&p)]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("actions 9\n"), "{out}");
    assert!(out.contains("facts 27\n"), "{out}");
}

#[test]
fn malformed_input_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let (_, p) = generate(dir.path(), &["minefield"]);
    let bad = dir.path().join("bad.ppond");
    fs::write(&bad, "(define (domain x)\n  (:action a :effect (and (p)))\n  oops)").unwrap();
    let o = run(&["validate", s(&bad), s(&p)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    let at = err.find(&format!("{}:", bad.display())).expect("file name in diagnostic");
    let pos: Vec<&str> = err[at + bad.display().to_string().len() + 1..].splitn(3, ':').collect();
    assert!(pos[0].parse::<usize>().is_ok() && pos[1].parse::<usize>().is_ok(), "{err}");

    let o = run(&["validate", "/nonexistent.ppond", s(&p)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn solve_minefield() {
    let dir = tempfile::tempdir().unwrap();
    let (d, p) = generate(dir.path(), &["minefield"]);
    let table = dir.path().join("v.table");
    let args = [
        "solve",
        s(&d),
        s(&p),
        "--heuristic",
        "hff-b",
        "--seed",
        "1",
        "--omit-timing",
        "--out",
        s(&table),
    ];
    let first = run(&args);
    assert!(first.status.success(), "{}", stderr(&first));
    let out = stdout(&first);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "minefield-1");
    assert_eq!(row[6], "true");
    assert_eq!(row[7], "3.500000");
    let second = run(&args);
    assert_eq!(stdout(&second), out);

    let (header, t) = load_table(&fs::read_to_string(&table).unwrap(), &minefield::problem(), None)
        .unwrap();
    assert_eq!(header.heuristic, "hff-b");
    let b0 = minefield::problem().initial_belief().unwrap();
    assert!((t.get(&b0).unwrap() - 3.5).abs() < 1e-6);
}

#[test]
fn zero_time_limit() {
    let dir = tempfile::tempdir().unwrap();
    let (d, p) = generate(dir.path(), &["minefield"]);
    let base = ["solve", s(&d), s(&p), "--heuristic", "flat", "--time-limit", "0"];
    let o = run(&base);
    assert!(o.status.success());
    assert!(stdout(&o).lines().nth(1).unwrap().contains(",false,"));
    let mut strict = base.to_vec();
    strict.push("--strict");
    assert_eq!(run(&strict).status.code(), Some(3));
}

#[test]
fn unknown_heuristic_is_an_input_error() {
    let o = run(&["solve", "d", "p", "--heuristic", "hff"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown heuristic"));
}

#[test]
fn oracle_values() {
    let dir = tempfile::tempdir().unwrap();
    let (d, p) = generate(dir.path(), &["minefield"]);
    let o = run(&["oracle", s(&d), s(&p)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "beliefs 15\nvalue 3.500000\n");

    let o = run(&["oracle", s(&d), s(&p), "--cap", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("more than 3"));

    let at_goal = dir.path().join("goal.ppondp");
    fs::write(
        &at_goal,
        fs::read_to_string(&p).unwrap().replace("(:init (at a))", "(:init (at b))"),
    )
    .unwrap();
    let o = run(&["oracle", s(&d), s(&at_goal)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("value 0.000000"));
}

#[test]
fn oracle_gap_on_trap() {
    let dir = tempfile::tempdir().unwrap();
    let (d, p) = generate(dir.path(), &["trap"]);
    let o = run(&[
        "solve",
        s(&d),
        s(&p),
        "--heuristic",
        "ml",
        "--oracle-cap",
        "10000",
        "--eval-interval",
        "5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("suboptimal:"), "{}", stderr(&o));
}

fn manifest(dir: &Path, lines: &[&str]) -> PathBuf {
    let m = dir.join("pairs.txt");
    fs::write(&m, lines.join("\n")).unwrap();
    m
}

#[test]
fn benchmark_two_pairs() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), &["minefield"]);
    let m = manifest(
        dir.path(),
        &[
            "# minefield pair set",
            "minefield.ppond minefield.ppondp hff-b",
            "minefield.ppond minefield.ppondp flat",
        ],
    );
    let args = [
        "benchmark",
        s(&m),
        "--runs",
        "3",
        "--eval-interval",
        "5",
        "--final-runs",
        "100",
        "--omit-timing",
    ];
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<Vec<&str>> = out.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[2] == "3"));
    let trials = |r: &Vec<&str>| r[4].parse::<f64>().unwrap();
    assert!(trials(&rows[0]) <= trials(&rows[1]));

    let o2 = bin().args(args).env("BELIEFPLAN_THREADS", "1").output().unwrap();
    assert_eq!(stdout(&o2), out);
}

#[test]
fn empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path(), &["# nothing"]);
    let csv = dir.path().join("out.csv");
    let o = run(&["benchmark", s(&m), "--out", s(&csv)]);
    assert!(o.status.success());
    assert_eq!(
        fs::read_to_string(&csv).unwrap(),
        "problem,heuristic,seed_count,mean_time_s,mean_trials,converged_fraction,mean_cost,failures,mean_mdp_init_time_s\n"
    );
    let o = bin()
        .args(["benchmark", s(&m)])
        .env("BELIEFPLAN_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn generate_families() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["localize", "--n", "4", "--stochastic"][..],
        &["wumpus", "--n", "4", "--nonuniform"],
        &["maze", "--n", "7", "--bottlenecks", "2"],
    ] {
        let (d, p) = generate(dir.path(), args);
        let o = run(&["validate", s(&d), s(&p)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let o = run(&["generate", "maze", "--n", "7", "--bottlenecks", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

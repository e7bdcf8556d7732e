use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gcbha::alloc::Allocation;
use gcbha::bench::{exp2, ScenarioConfig};

fn gcbha(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcbha")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = gcbha(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn scenario(dir: &Path, tasks: usize, agents: usize) -> PathBuf {
    let file = dir.join("scenario.json");
    ok(&["gen", "--tasks", &tasks.to_string(), "--agents", &agents.to_string(), "--seed", "3", "-o", path(&file)]);
    file
}

fn read_allocation(file: &Path) -> Allocation {
    serde_json::from_slice(&std::fs::read(file).unwrap()).unwrap()
}

#[test]
fn run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path(), 20, 10);
    let out = dir.path().join("out");
    ok(&["run", path(&s), "-o", path(&out)]);
    for name in ["allocation.json", "paths.json", "metrics.json", "metrics.csv"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn unit_group_cap_matches_cbga() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path(), 30, 8);
    let (g, c) = (dir.path().join("g.json"), dir.path().join("c.json"));
    ok(&["allocate", path(&s), "--alloc", "gcbha", "--group-request", "1", "-o", path(&g)]);
    ok(&["allocate", path(&s), "--alloc", "cbga", "-o", path(&c)]);
    assert_eq!(read_allocation(&g).queues, read_allocation(&c).queues);
}

#[test]
fn corrupted_allocation_is_rejected_with_the_task_id() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path(), 20, 5);
    let file = dir.path().join("alloc.json");
    ok(&["allocate", path(&s), "-o", path(&file)]);
    let mut alloc = read_allocation(&file);
    let queue = alloc.queues.iter_mut().find(|q| !q.targets.is_empty()).unwrap();
    let task = queue.targets[0].task_id;
    let delivery = queue.targets.iter().rposition(|t| t.task_id == task).unwrap();
    queue.targets.swap(0, delivery);
    std::fs::write(&file, serde_json::to_vec(&alloc).unwrap()).unwrap();

    for verb in ["validate", "plan"] {
        let mut args = vec![verb, path(&file)];
        let paths = dir.path().join("paths.json");
        if verb == "plan" {
            args.extend(["-o", path(&paths)]);
        }
        let out = gcbha(&args);
        assert_eq!(out.status.code(), Some(2), "{verb}");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(stderr.contains(&task.to_string()), "{verb}: {stderr}");
    }
}

#[test]
fn repeated_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path(), 20, 10);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["run", path(&s), "--alloc", "cbga", "-o", path(&a)]);
    ok(&["run", path(&s), "--alloc", "cbga", "-o", path(&b)]);
    for name in ["allocation.json", "paths.json", "metrics.json", "metrics.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn planned_paths_validate_against_their_allocation() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path(), 20, 10);
    let out = dir.path().join("out");
    ok(&["run", path(&s), "-o", path(&out)]);
    ok(&["validate", path(&out.join("paths.json")), "--against", path(&out.join("allocation.json"))]);
    ok(&["validate", path(&out.join("allocation.json"))]);
    ok(&["validate", path(&s)]);
}

#[test]
fn usage_and_data_errors_have_distinct_codes() {
    assert_eq!(gcbha(&["allocate"]).status.code(), Some(1));
    assert_eq!(gcbha(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gcbha(&["validate", "/nonexistent/file.json"]).status.code(), Some(2));
    assert_eq!(gcbha(&["--help"]).status.code(), Some(0));
}

#[test]
fn bench_matrix_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let experiment = exp2(&ScenarioConfig { repetitions: 2, ..ScenarioConfig::default() }, &[(20, 10)]);
    let matrix = dir.path().join("matrix.json");
    std::fs::write(&matrix, serde_json::to_vec(&experiment).unwrap()).unwrap();
    ok(&["validate", path(&matrix)]);
    let out = dir.path().join("bench");
    ok(&["bench", path(&matrix), "--jobs", "2", "-o", path(&out)]);
    for name in ["report.json", "aggregates.csv", "runs.csv", "timings.csv"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    ok(&["validate", path(&out.join("report.json"))]);
}

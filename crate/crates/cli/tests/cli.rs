use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lcf_core::network::load_network;
use lcf_core::sim::SimRecord;

const SMALL: &[&str] = &[
    "--grid", "4x4", "--scenarios", "10", "--total-s", "3600", "--peak-s", "1800", "--warmup-s", "360",
    "--epochs", "2", "--hidden", "8", "--batches-per-epoch", "4", "--trips", "40", "--k", "2",
    "--log-level", "warn",
];

fn lcf(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcf"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> Output {
    let o = lcf(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn small(cmd: &str) -> Vec<&str> {
    let mut v = vec![cmd];
    v.extend_from_slice(SMALL);
    v
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn empty_network_runs_at_free_flow() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen-network", "--grid", "3x3"]);
    ok(dir.path(), &["simulate", "--total-s", "1800", "--peak-s", "900", "--warmup-s", "360", "--log-level", "warn"]);
    let net = load_network(dir.path().join("network.txt")).unwrap();
    let record = SimRecord::load_csv(&net, dir.path().join("record"), 180.0).unwrap();
    assert_eq!(record.num_windows(), 10);
    for t in 0..record.num_windows() {
        for z in 0..record.num_links() {
            assert!((record.speed(t, z) - record.free_flow_speed(z)).abs() <= 1e-9);
        }
    }
}

#[test]
fn help_lists_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = ok(dir.path(), &["--help"]);
    let text = String::from_utf8(o.stdout).unwrap();
    for needle in [
        "--lr <LR>",
        "[default: 0.002]",
        "[default: 400]",
        "[default: 0.85]",
        "[default: 128]",
        "[default: 1.5]",
        "[default: -1]",
        "[default: gat-gru-p]",
        "[default: 1000]",
    ] {
        assert!(text.contains(needle), "missing {needle}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| lcf(dir.path(), args).status.code();
    assert_eq!(code(&["--version"]), Some(0));
    assert_eq!(code(&["no-such-command"]), Some(1));
    assert_eq!(code(&["train", "--epochs", "many"]), Some(1));
    assert_eq!(code(&["train", "--grid", "5by5"]), Some(1));
    assert_eq!(code(&["evaluate"]), Some(1));

    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(code(&["gen-network", "--config", cfg.to_str().unwrap()]), Some(1));

    ok(dir.path(), &small("gen-network"));
    ok(dir.path(), &small("gen-dataset"));
    ok(dir.path(), &small("partition"));
    let mut diverge = small("train");
    diverge.extend(["--lr", "1e300"]);
    let o = lcf(dir.path(), &diverge);
    assert_eq!(o.status.code(), Some(2));
    let stderr = String::from_utf8(o.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small grid\ngrid = 3x4\nlink_length = 150\n").unwrap();
    ok(dir.path(), &["gen-network", "--config", cfg.to_str().unwrap(), "--link-length", "120"]);
    let net = load_network(dir.path().join("network.txt")).unwrap();
    assert!(net.links().iter().all(|l| l.length == 120.0));
    let (rows, cols) = (3, 4);
    assert_eq!(net.num_links(), 2 * (rows * (cols - 1) + cols * (rows - 1)));
}

#[test]
fn train_then_evaluate_reports_every_model() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["gen-network", "gen-dataset", "partition", "train"] {
        ok(dir.path(), &small(cmd));
    }
    assert!(dir.path().join("models/GAT-GRU-P.ckpt").exists());
    ok(dir.path(), &small("evaluate"));
    let table = std::fs::read_to_string(dir.path().join("speed/report_table.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("model,scenario_class,metric,value"));
    let models: std::collections::BTreeSet<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    let expected = ["DNN", "DNN-GRU", "GAT", "GAT-GRU", "GAT-GRU-P", "LR", "MFD", "MFD-P"];
    assert_eq!(models.into_iter().collect::<Vec<_>>(), expected);
    for m in expected {
        assert!(dir.path().join(format!("speed/hist_{m}.svg")).exists());
    }
}

#[test]
fn report_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(a.path(), &small("report"));
    ok(b.path(), &small("report"));
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert!(fa.contains_key(Path::new("travel_time/report_table.csv")));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (k, v) in &fa {
        assert!(&fb[k] == v, "{} differs", k.display());
    }
}

use std::process::Command;

use nbprofile::instances::format_instance;
use nbprofile_core::search::generate_instance;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nbprofile"))
}

fn code(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(bin().arg("--help")), 0);
    assert_eq!(code(bin().arg("--version")), 0);
    assert_eq!(code(bin().arg("frobnicate")), 1);
    assert_eq!(code(bin().args(["collect", "--frames", "x", "--config", "a.toml"])), 1);
    assert_eq!(code(bin().arg("collect")), 1);
}

#[test]
fn data_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(bin().arg("collect").arg("--config").arg(&missing)), 2);
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[instances]\npaths = [\"absent.txt\"]\n").unwrap();
    assert_eq!(code(bin().arg("analyze").arg("--config").arg(&cfg)), 2);
}

#[test]
fn collect_analyze_plot_round() {
    let dir = tempfile::tempdir().unwrap();
    for (n, seed) in [(8, 1), (9, 2)] {
        let inst = generate_instance(format!("c{n}"), n, 20, seed).unwrap();
        std::fs::write(dir.path().join(format!("c{n}.txt")), format_instance(&inst)).unwrap();
        std::fs::write(dir.path().join(format!("c{n}.lb")), "lower_bound=1.5\n").unwrap();
    }
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "[instances]\npaths = [\"c8.txt\", \"c9.txt\"]\n[collect]\nruns = 2\niterations = 2000\n",
    )
    .unwrap();
    let out = dir.path().join("results");
    for stage in ["collect", "analyze", "plot"] {
        let o = bin()
            .args([stage, "--seed", "11", "--intervals", "150", "--frames", "3", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let log = std::fs::read_to_string(out.join("logs/c8.log")).unwrap();
    assert!(log.lines().next().unwrap().ends_with("seed=11"));
    assert!(log.contains("n_intervals=150"));
    assert!(out.join("plots/c9/activity.svg").is_file());
}

use std::path::Path;
use std::process::{Command, Output};

fn confsel(args: &[&str], jobs_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_confsel"));
    cmd.args(args).env("RUST_LOG", "warn").env_remove("CONFSEL_JOBS");
    if let Some(j) = jobs_env {
        cmd.env("CONFSEL_JOBS", j);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("exp.conf");
    std::fs::write(
        &path,
        "# small ridge run\nscenario = RidgeLinearT\nn_train = 60\nn_test = 30\ndims = 3, 5\nreps = 2\nlambda_count = 10\nsearch_budget = 60\n",
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_report_and_figure_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let mut outputs = Vec::new();
    for (name, jobs) in [("a", "1"), ("b", "3")] {
        let out = dir.path().join(name);
        let res = confsel(&["run", "--config", &config, "--reps", "3", "--seed", "9", "--out", out.to_str().unwrap()], Some(jobs));
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        assert!(out.join("report.svg").exists());
        outputs.push(std::fs::read(out.join("report.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert!(text.starts_with("rep,method,d,coverage,width,threshold,chosen,runtime_ms\n"));
    assert_eq!(text.split("\n\n").next().unwrap().lines().count(), 1 + 3 * 4 * 2);
}

#[test]
fn plot_rerenders_a_saved_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("run");
    assert!(confsel(&["run", "--config", &config, "--out", out.to_str().unwrap()], None).status.success());
    let fig = dir.path().join("fig.svg");
    let csv = out.join("report.csv");
    let res = confsel(&["plot", "--in", csv.to_str().unwrap(), "--out", fig.to_str().unwrap(), "--alpha", "0.2"], None);
    assert!(res.status.success());
    assert!(std::fs::read_to_string(fig).unwrap().contains("data-value=\"0.8\""));
}

#[test]
fn bad_inputs_fail_with_messages() {
    let dir = tempfile::tempdir().unwrap();
    let res = confsel(&["run", "--config", "/no/such/file.conf"], None);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("/no/such/file.conf"));

    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "reps = 2\nflavour = mint\n").unwrap();
    let res = confsel(&["run", "--config", bad.to_str().unwrap()], None);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 2"));

    let config = write_config(dir.path());
    let res = confsel(&["run", "--config", &config, "--out", dir.path().to_str().unwrap()], Some("many"));
    assert_eq!(res.status.code(), Some(2));

    let res = confsel(&["check", "--suite", "nonsense"], None);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn check_runs_a_named_subset() {
    let res = confsel(&["check", "--suite", "1,6,8"], None);
    assert!(res.status.success());
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 3);
    assert!(stdout.contains("3/3 criteria passed"));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lpfp_core::config::RunConfig;

fn lpfp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpfp"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

/// Setting 2 cut down to four years so a run takes well under a second.
fn short_config(dir: &Path) -> String {
    let mut c = RunConfig::setting2();
    c.time.steps = 16;
    c.time.horizon_years = 4.0;
    c.rewards.horizon_years = 4.0;
    c.carbon.adjustment_dates = vec![4, 8];
    c.carbon.scenarios[0].stay_prob = vec![0.5; 2];
    c.solver.cross_check_every = 0;
    let path = dir.join("short.toml");
    fs::write(&path, c.to_toml()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path());
    let out = lpfp(
        &["run", "--config", &config, "--iters", "4", "--out", "res"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let res = dir.path().join("res");
    for f in [
        "capacities.csv",
        "prices.csv",
        "exploitability.csv",
        "curves.csv",
        "config.json",
        "run.json",
    ] {
        assert!(res.join(f).is_file(), "{f} missing");
    }
    let eps = fs::read_to_string(res.join("exploitability.csv")).unwrap();
    assert_eq!(eps.lines().count(), 5);
    assert!(!eps.contains('\r'));
    let caps = fs::read_to_string(res.join("capacities.csv")).unwrap();
    assert!(caps.lines().any(|l| l.starts_with("16,rJJ,omega_max,")));
    assert!(caps.lines().any(|l| l.starts_with("16,rSS,omega_min,")));
}

#[test]
fn relative_exploitability_option() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path());
    let o = lpfp(
        &[
            "run",
            "--config",
            &config,
            "--iters",
            "3",
            "--relative",
            "--out",
            "rel",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let run = fs::read_to_string(dir.path().join("rel/run.json")).unwrap();
    assert!(run.contains("\"relative_exploitability\": true"));
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path());
    for out in ["a", "b"] {
        let o = lpfp(
            &[
                "run", "--config", &config, "--iters", "3", "--seed", "7", "--out", out,
            ],
            dir.path(),
        );
        assert!(o.status.success());
    }
    for f in [
        "capacities.csv",
        "prices.csv",
        "exploitability.csv",
        "curves.csv",
    ] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn deterministic_path_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path());
    let levels: Vec<&str> = (0..=16).map(|t| if t >= 4 { "75" } else { "50" }).collect();
    fs::write(dir.path().join("path.csv"), levels.join(",")).unwrap();
    let o = lpfp(
        &[
            "run",
            "--config",
            &config,
            "--iters",
            "2",
            "--deterministic-path",
            "path.csv",
            "--out",
            "det",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let caps = fs::read_to_string(dir.path().join("det/capacities.csv")).unwrap();
    assert_eq!(caps.lines().count(), 18);
    assert!(caps.lines().last().unwrap().starts_with("16,rJS,"));
}

#[test]
fn error_categories_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = lpfp(&["run", "--setting", "custom"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let o = lpfp(&["run", "--config", "missing.toml"], dir.path());
    assert_eq!(o.status.code(), Some(5));
    fs::write(dir.path().join("bad.toml"), "[time]\nsteps = 1\n").unwrap();
    let o = lpfp(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let config = short_config(dir.path());
    fs::write(dir.path().join("path.csv"), "50,200").unwrap();
    let o = lpfp(
        &[
            "run",
            "--config",
            &config,
            "--deterministic-path",
            "path.csv",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    let o = lpfp(&["run", "--iters", "x"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn lp_solve_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    // max 3x + 5y s.t. x + s1 = 4, 2y + s2 = 12, 3x + 2y + s3 = 18
    fs::write(
        p.join("matrix.txt"),
        "3 5 7\n0 0 1\n0 2 1\n1 1 2\n1 3 1\n2 0 3\n2 1 2\n2 4 1\n",
    )
    .unwrap();
    fs::write(p.join("objective.txt"), "3\n5\n0\n0\n0\n").unwrap();
    fs::write(p.join("rhs.txt"), "4\n12\n18\n").unwrap();
    for backend in ["dense", "sparse"] {
        let o = lpfp(&["lp-solve", ".", "--backend", backend], p);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let x: Vec<f64> = fs::read_to_string(p.join("primal.txt"))
            .unwrap()
            .split_whitespace()
            .map(|t| t.parse().unwrap())
            .collect();
        assert!(
            (x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9,
            "{backend}: {x:?}"
        );
    }
    fs::write(p.join("rhs.txt"), "4\n").unwrap();
    assert_eq!(lpfp(&["lp-solve", "."], p).status.code(), Some(3));
}

#[test]
fn printed_config_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let o = lpfp(&["config", "--setting", "1"], dir.path());
    let back = RunConfig::from_toml(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(back, RunConfig::setting1());
}

#[test]
fn dumps_are_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = lpfp(&["dump-tree", "--setting", "1"], dir.path());
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.trim_start().starts_with('['));
    assert!(text.contains("\"posterior\""));
    let o = lpfp(&["dump-chains"], dir.path());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("{\"conventional\":"));
}

#[test]
fn lp_solve_serves_as_external_solver() {
    use lpfp_core::fictitious_play::{initial_profile, InitialProfile, MeanFieldGame};
    use lpfp_core::lp::interchange::ExternalLpSolver;
    use lpfp_core::lp::{
        best_response_dp, best_response_lp, Population, TieBreak, DEFAULT_VAR_LIMIT,
    };

    let mut c = RunConfig::setting2();
    c.time.steps = 8;
    c.time.horizon_years = 2.0;
    c.rewards.horizon_years = 2.0;
    c.carbon.adjustment_dates = vec![4];
    c.carbon.scenarios[0].stay_prob = vec![0.5];
    let model = c.build_model().unwrap();
    let profile = initial_profile(&model, InitialProfile::Uniform, 0);
    let tables = MeanFieldGame::reward_tables(&model, &profile).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let solver = ExternalLpSolver {
        program: env!("CARGO_BIN_EXE_lpfp").into(),
        args: vec!["lp-solve".into()],
        workdir: dir.path().to_path_buf(),
    };
    for (k, pop) in Population::ALL.into_iter().enumerate() {
        let chain = model.chain(pop);
        let dp = best_response_dp(&tables[k], chain, model.tree(), TieBreak::Stop).value;
        let lp =
            best_response_lp(&tables[k], chain, model.tree(), &solver, DEFAULT_VAR_LIMIT).unwrap();
        assert!(
            (lp.value - dp).abs() <= 1e-8 * dp.abs().max(1.0),
            "{pop:?}: {} vs {dp}",
            lp.value
        );
    }
}

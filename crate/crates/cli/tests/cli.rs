use std::path::Path;
use std::process::{Command, Output};

fn risopt(args: &[&str]) -> Output {
    risopt_env(args, &[])
}

fn risopt_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_risopt"));
    cmd.args(args).env_remove("RIS_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("failed to run risopt")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field<'a>(out: &'a str, key: &str) -> &'a str {
    out.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
        .unwrap_or_else(|| panic!("no `{key}` in output:\n{out}"))
}

fn value(out: &str, key: &str) -> f64 {
    field(out, key).parse().unwrap()
}

const TWO_OPERATOR_CHANNELS: &str = "\
# N L
4 2
h_RI  1.0+0.5j -0.3+0.2j 0.7-0.1j 0.2+0.9j
h_IT1 0.4-0.6j 1.1+0.0j -0.5+0.5j 0.3+0.3j
h_IT2 0.8+0.1j -0.2+0.7j 0.6-0.6j -1.0+0.2j
";

fn channels_file(dir: &Path, target: &str) -> std::path::PathBuf {
    let path = dir.join("ch.txt");
    std::fs::write(&path, format!("{TWO_OPERATOR_CHANNELS}d_2 {target}\n")).unwrap();
    path
}

#[test]
fn solve_random_is_deterministic() {
    let args = [
        "--seed", "7", "solve", "--random", "--N", "8", "--G", "2", "--L", "2",
    ];
    let a = risopt(&args);
    let b = risopt(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let out = stdout(&a);
    assert_eq!(field(&out, "branch"), "two-operator group-connected");
    assert!(value(&out, "optimal_power_W") > 0.0);
    assert!(value(&out, "residual_d_2") <= 1e-10);
    assert!(value(&out, "max_unitarity_deviation") <= 1e-10);
    let rel = (value(&out, "achieved_power_W") / value(&out, "optimal_power_W") - 1.0).abs();
    assert!(rel <= 1e-10, "achieved/optimal mismatch {rel}");
}

#[test]
fn single_connected_with_untouched_target_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let path = channels_file(dir.path(), "0.8+0.1j -0.2+0.7j 0.6-0.6j -1.0+0.2j");
    let theta = dir.path().join("theta.txt");
    let o = risopt(&[
        "solve",
        "--channels",
        path.to_str().unwrap(),
        "--G",
        "4",
        "--theta-out",
        theta.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(field(&out, "branch"), "single-connected");
    assert_eq!(field(&out, "theta_is_identity"), "true");
    assert_eq!(value(&out, "residual_d_2"), 0.0);

    let text = std::fs::read_to_string(&theta).unwrap();
    let (arch, dense) = risopt_core::formats::read_theta(&text).unwrap();
    assert_eq!((arch.n(), arch.groups()), (4, 4));
    let again = risopt_core::formats::write_theta(&arch, &dense).unwrap();
    assert_eq!(again, text, "scattering-matrix dump does not round-trip");
}

#[test]
fn small_groups_with_many_operators_use_unique_branch() {
    let o = risopt(&[
        "--seed", "3", "solve", "--random", "--N", "8", "--G", "8", "--L", "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(field(&out, "branch"), "unique solution Gs<L");
    assert!(value(&out, "residual_d_2") <= 1e-10);
    assert!(value(&out, "residual_d_3") <= 1e-10);
}

#[test]
fn infeasible_targets_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = channels_file(dir.path(), "2.0+0.0j 0.0+0.0j 1.0+0.0j 1.0+0.0j");
    let o = risopt(&["solve", "--channels", path.to_str().unwrap(), "--G", "4"]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    let err = stderr(&o);
    assert!(err.contains("infeasible"), "{err}");
    // per-group deviation report
    assert!(err.contains("group 0: deviation"), "{err}");
}

#[test]
fn malformed_channel_file_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = channels_file(dir.path(), "0.8+0.1j oops 0.6-0.6j -1.0+0.2j");
    let o = risopt(&["solve", "--channels", path.to_str().unwrap(), "--G", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 6"), "{}", stderr(&o));
}

const SMALL_SWEEP: &str = "\
[scenario]
L = 2
N_values = [4, 8]

[architectures]
group_sizes = [1, 2]

[montecarlo]
trials = 400
block_len = 4
seed = 11
";

#[test]
fn sweep_is_reproducible_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(&cfg, SMALL_SWEEP).unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let svg = dir.path().join(format!("{name}.svg"));
        let o = risopt_env(
            &[
                "sweep",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--svg",
                svg.to_str().unwrap(),
            ],
            &[("RIS_THREADS", threads)],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
        std::fs::read(&out).unwrap()
    };
    let one = run("a.csv", "1");
    let four = run("b.csv", "4");
    let again = run("c.csv", "4");
    assert_eq!(one, four);
    assert_eq!(four, again);

    let text = String::from_utf8(one).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "N,G,Gs,L,channel,trials,seed,mean_power_W,stderr_W,analytic_power_W"
    );
    assert!(!text.contains('\r'));
    // 2 sizes x (Gs 1, Gs 2, fully connected)
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(
        rows[0].starts_with("4,4,1,2,rayleigh,400,11,"),
        "{}",
        rows[0]
    );
}

#[test]
fn analytic_column_follows_two_operator_formula() {
    use risopt_core::harness::Geometry;
    use risopt_core::scaling::{expected_power_rayleigh_two_operator, ScalingQuery};

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fig.toml");
    std::fs::write(
        &cfg,
        "[scenario]\nN_values = [16, 32]\n[architectures]\ngroup_sizes = [1, 2, 4]\n[montecarlo]\ntrials = 20\n",
    )
    .unwrap();
    let out = dir.path().join("fig.csv");
    let o = risopt(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let g = Geometry::default();
    let (rho_ri, rho_it1) = (g.ris_user_gain().unwrap(), g.bs_ris_gain(0).unwrap());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut seen = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (n, gs): (usize, usize) = (f[0].parse().unwrap(), f[2].parse().unwrap());
        let arch = risopt_core::RisArchitecture::with_group_size(n, gs).unwrap();
        let q = ScalingQuery::new(arch, 2, rho_ri, rho_it1).unwrap();
        let expected = 10.0 * expected_power_rayleigh_two_operator(&q).unwrap();
        let column: f64 = f[9].parse().unwrap();
        assert!(
            (column - expected).abs() <= 1e-12 * expected,
            "N={n} Gs={gs}: {column} vs {expected}"
        );
        seen += 1;
    }
    // Gs in {1, 2, 4} plus fully connected, for two sizes
    assert_eq!(seen, 8);
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(&cfg, SMALL_SWEEP).unwrap();
    let out = dir.path().join("o.csv");
    let o = risopt(&[
        "--seed",
        "99",
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().nth(1).unwrap().contains(",99,"));
}

#[test]
fn empty_size_list_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[scenario]\nN_values = []\n").unwrap();
    let o = risopt(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        "unused.csv",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("N_values"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[montecarlo]\ntrails = 10\n").unwrap();
    let o = risopt(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        "unused.csv",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("trails"), "{}", stderr(&o));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            risopt_core::config::SweepConfig::load(&path)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 2);
}

#[test]
fn analytic_single_connected_is_linear() {
    let o = risopt(&["analytic", "--theorem", "1", "--case", "iii", "--N", "128"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(value(&stdout(&o), "expected_power"), 128.0);
}

#[test]
fn analytic_general_formula_matches_two_operator_formula() {
    for (n, gs) in [("16", "2"), ("64", "4"), ("32", "full"), ("16", "1")] {
        let a = risopt(&["analytic", "--theorem", "1", "--N", n, "--Gs", gs]);
        let b = risopt(&[
            "analytic",
            "--theorem",
            "3",
            "--L",
            "2",
            "--N",
            n,
            "--Gs",
            gs,
        ]);
        assert!(a.status.success() && b.status.success());
        let (x, y) = (
            value(&stdout(&a), "expected_power"),
            value(&stdout(&b), "expected_power"),
        );
        assert!((x - y).abs() <= 1e-9 * x, "N={n} Gs={gs}: {x} vs {y}");
    }
}

#[test]
fn analytic_kappa_and_ratio() {
    let o = risopt(&["analytic", "--kappa", "--Gs", "2", "--L", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let k = value(&stdout(&o), "kappa");
    let expected = std::f64::consts::PI.powi(2) / 64.0;
    assert!((k - expected).abs() <= 1e-12, "{k}");

    let o = risopt(&["analytic", "--ratio", "--Gs", "2", "--L", "2"]);
    assert!(o.status.success());
    let r = value(&stdout(&o), "single_operator_ratio");
    assert!((r - 16.0 / 81.0).abs() <= 1e-14, "{r}");
}

#[test]
fn analytic_rejects_case_outside_its_range() {
    let o = risopt(&[
        "analytic",
        "--theorem",
        "3",
        "--case",
        "ii",
        "--N",
        "16",
        "--Gs",
        "2",
        "--L",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Gs >= L"), "{}", stderr(&o));

    let o = risopt(&["analytic", "--theorem", "1", "--N", "12", "--Gs", "5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_oracle_passes() {
    let o = risopt(&["validate", "--suite", "oracle", "--trials", "200"]);
    let out = stdout(&o);
    assert!(o.status.success(), "{out}\n{}", stderr(&o));
    assert!(out.lines().any(|l| l.starts_with("summary:")));
    assert!(!out.contains("FAIL"));
}

#[test]
fn validate_stats_with_few_trials_is_inconclusive_not_failed() {
    let o = risopt(&["validate", "--suite", "stats", "--trials", "1000"]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    assert!(out.contains("INCONCLUSIVE"), "{out}");
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn validate_scaling_exit_code_tracks_failures() {
    let o = risopt(&["validate", "--suite", "scaling"]);
    let out = stdout(&o);
    let failed = out.lines().any(|l| l.starts_with("FAIL"));
    assert_eq!(o.status.code(), Some(if failed { 1 } else { 0 }), "{out}");
    assert!(
        out.lines().filter(|l| l.starts_with("PASS")).count() > 0,
        "{out}"
    );
}

#[test]
fn validate_rejects_zero_trials() {
    let o = risopt(&["validate", "--suite", "stats", "--trials", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

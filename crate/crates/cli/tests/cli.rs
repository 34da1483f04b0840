use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pamsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pamsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    let ok = pamsim(&["validate", "srw3"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("dimension        3"));

    let tmp = tempfile::tempdir().unwrap();
    let biased = tmp.path().join("biased.json");
    std::fs::write(
        &biased,
        r#"{"dimension": 1, "support": [[[1], 0.7], [[-1], 0.3]], "sigma": {"kind": "linear", "lip": 1, "lower": 1}}"#,
    )
    .unwrap();
    let bad = pamsim(&["validate", s(&biased)]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("NonzeroMean"));

    let missing = pamsim(&["validate", s(&tmp.path().join("nope.json"))]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(
        pamsim(&["simulate", "--lambda", "x"]).status.code(),
        Some(2)
    );
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "[simulate]\nlambda = 1\nhorizon = 1\nunknown_key = 2\n",
    )
    .unwrap();
    let out = pamsim(&["--config", s(&cfg), "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(pamsim(&["--help-config"]).status.code(), Some(0));
    assert_eq!(pamsim(&["--help"]).status.code(), Some(0));
}

#[test]
fn zero_noise_conserves_mass() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    for model in ["srw1", "srw2"] {
        let o = pamsim(&[
            "--model",
            model,
            "simulate",
            "--lambda",
            "0",
            "--horizon",
            "10",
            "--replicas",
            "2",
            "--out-dir",
            s(&out),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        let text = std::fs::read_to_string(out.join("trajectories.csv")).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let m = header.iter().position(|h| *h == "mass").unwrap();
        let mut rows = 0;
        for line in lines {
            let mass: f64 = line.split(',').nth(m).unwrap().parse().unwrap();
            assert!((mass - 1.0).abs() <= 1e-10, "{model}: {mass}");
            rows += 1;
        }
        assert!(rows > 100);
    }
}

#[test]
fn same_seed_gives_identical_bytes_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &str, threads: &str| {
        let d = tmp.path().join(dir);
        let o = pamsim(&[
            "--seed",
            "11",
            "--threads",
            threads,
            "simulate",
            "--lambda",
            "1.5",
            "--horizon",
            "3",
            "--replicas",
            "16",
            "--out-dir",
            s(&d),
        ]);
        assert_eq!(o.status.code(), Some(0));
        d
    };
    let a = run("a", "1");
    let b = run("b", "4");
    for f in [
        "trajectories.csv",
        "replicas.csv",
        "moments.csv",
        "moments.json",
        "summary.md",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let (ma, mb) = (
        json(&a.join("manifest.json")),
        json(&b.join("manifest.json")),
    );
    assert_eq!(ma["campaignId"], mb["campaignId"]);
    assert_eq!(ma["outputs"], mb["outputs"]);
    let c = run("c", "1");
    let o = pamsim(&[
        "--seed",
        "12",
        "simulate",
        "--lambda",
        "1.5",
        "--horizon",
        "3",
        "--replicas",
        "16",
        "--out-dir",
        s(&c),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(
        std::fs::read(a.join("trajectories.csv")).unwrap(),
        std::fs::read(c.join("trajectories.csv")).unwrap()
    );
}

#[test]
fn fit_recovers_the_synthetic_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = root().join("fixtures/synthetic_d1.csv");
    let o = pamsim(&[
        "fit",
        "--law",
        "d1",
        "--input",
        s(&fixture),
        "--out-dir",
        s(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let fit = json(&tmp.path().join("decay_fit.json"));
    let v = fit["vHat"].as_f64().unwrap();
    assert!((v - 2.0).abs() < 1e-9, "{v}");
    assert!((fit["intercept"].as_f64().unwrap()).abs() < 1e-9);
}

#[test]
fn greens_matches_the_watson_constant() {
    let g = libm::tgamma;
    let watson = 6f64.sqrt() / (32.0 * std::f64::consts::PI.powi(3))
        * g(1.0 / 24.0)
        * g(5.0 / 24.0)
        * g(7.0 / 24.0)
        * g(11.0 / 24.0);
    let tmp = tempfile::tempdir().unwrap();
    let o = pamsim(&[
        "--model",
        "srw3",
        "greens",
        "--mc-replicas",
        "4000",
        "--lambda",
        "0.5",
        "--out-dir",
        s(tmp.path()),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = json(&tmp.path().join("greens.json"));
    let u = r["upsilonZero"].as_f64().unwrap();
    assert!((u - watson / 2.0).abs() < 1e-3, "{u}");
    assert!((r["lambdaLowerBound"].as_f64().unwrap() - 1.0 / u.sqrt()).abs() < 1e-12);
    let eps = 0.25 * u;
    assert!(
        (r["secondMomentBound"].as_f64().unwrap() - 2.0 * (1.0 + eps) / (1.0 - eps)).abs() < 1e-12
    );
    let mc = &r["report"]["monteCarlo"];
    let (est, se) = (mc["estimate"].as_f64().unwrap(), mc["se"].as_f64().unwrap());
    assert!((est - u).abs() < 4.0 * se, "{est} ± {se}");
}

#[test]
fn recurrent_walk_has_no_greens_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pamsim(&[
        "--model",
        "srw2",
        "greens",
        "--mc-replicas",
        "10",
        "--out-dir",
        s(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("recurrent"));
}

#[test]
fn sweep_laplace_column_is_monotone() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        "[sweep]\nhorizon = 2.0\nreplicas = 80\ndt = 0.05\nscheme = \"exactLinear\"\nbox = { kind = \"fixed\", radius = 6 }\n",
    )
    .unwrap();
    let out = tmp.path().join("sw");
    let o = pamsim(&[
        "--config",
        s(&cfg),
        "--seed",
        "3",
        "sweep",
        "--lambdas",
        "0.5:8:6",
        "--d",
        "3",
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0][0], 0.5);
    assert_eq!(rows[5][0], 8.0);
    for w in rows.windows(2) {
        let (l0, s0, l1, s1) = (w[0][3], w[0][4], w[1][3], w[1][4]);
        assert!(l1 - l0 >= -3.0 * (s0 * s0 + s1 * s1).sqrt(), "{l0} -> {l1}");
    }
    let rep = json(&out.join("sweep.json"));
    assert_eq!(rep["laplaceMonotonicity"]["pass"], true);
}

#[test]
fn kernel_and_tail_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pamsim(&[
        "kernel",
        "--t",
        "2",
        "--hoeffding-times",
        "1,2,4,8",
        "--out-dir",
        s(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(tmp.path().join("kernel.csv")).unwrap();
    let mut total = 0.0;
    let mut at_zero = 0.0;
    for line in text.lines().skip(2) {
        let mut it = line.split(',');
        let x: i64 = it.next().unwrap().parse().unwrap();
        let p: f64 = it.next().unwrap().parse().unwrap();
        total += p;
        if x == 0 {
            at_zero = p;
        }
    }
    assert!((total - 1.0).abs() < 1e-12);
    // rate-1 walk in d = 1: p_t(0) = e^{-t} I_0(t); I_0(2) = Σ 1/(k!)²
    let i0: f64 = (0..30)
        .map(|k| 1.0 / libm::tgamma(k as f64 + 1.0).powi(2))
        .sum();
    assert!((at_zero - (-2f64).exp() * i0).abs() < 1e-12);
    let h = json(&tmp.path().join("hoeffding.json"));
    assert!(h["fittedC"].as_f64().unwrap() > 0.0);
    assert_eq!(h["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn odeclass_exit_code_follows_the_check() {
    let tmp = tempfile::tempdir().unwrap();
    let good = tmp.path().join("good.csv");
    let bad = tmp.path().join("bad.csv");
    let mut g = String::from("t,f\n");
    let mut b = String::from("t,f\n");
    for i in 0..61 {
        let t = 10f64.powf(i as f64 / 20.0);
        g += &format!("{t},{}\n", (-2.0 * t.cbrt()).exp());
        b += &format!("{t},2\n");
    }
    std::fs::write(&good, g).unwrap();
    std::fs::write(&bad, b).unwrap();
    let o = pamsim(&[
        "odeclass",
        "--input",
        s(&good),
        "--delta",
        "1",
        "--out-dir",
        s(&tmp.path().join("g")),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let o = pamsim(&[
        "odeclass",
        "--input",
        s(&bad),
        "--delta",
        "1",
        "--alpha",
        "0.1",
        "--out-dir",
        s(&tmp.path().join("b")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn report_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = root().join("fixtures/synthetic_d1.csv");
    assert_eq!(
        pamsim(&["fit", "--input", s(&fixture), "--out-dir", s(tmp.path())])
            .status
            .code(),
        Some(0)
    );
    let ok = pamsim(&["report", s(tmp.path())]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("outputs verified"));
    std::fs::write(tmp.path().join("summary.md"), "edited").unwrap();
    let bad = pamsim(&["report", s(tmp.path())]);
    assert_eq!(bad.status.code(), Some(1));
    std::fs::remove_file(tmp.path().join("decay.svg")).unwrap();
    assert!(
        String::from_utf8_lossy(&pamsim(&["report", s(tmp.path())]).stdout).contains("missing")
    );
}

#[test]
fn continuum_small_run() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pamsim(&[
        "--seed",
        "5",
        "continuum",
        "--dx",
        "0.25",
        "--horizon",
        "2",
        "--replicas",
        "40",
        "--out-dir",
        s(tmp.path()),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = std::fs::read_to_string(tmp.path().join("trajectories.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("continuum,"));
    let probes = json(&tmp.path().join("mean_field.json"));
    for p in probes.as_array().unwrap() {
        assert!(p["z"].as_f64().unwrap().abs() < 4.0, "{p}");
    }
}

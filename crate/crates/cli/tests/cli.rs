use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str], config: &str) -> Output {
    run_env(dir, args, config, &[])
}

fn run_env(dir: &Path, args: &[&str], config: &str, env: &[(&str, &str)]) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_copula-ssm"));
    cmd.args(args).arg("--config").arg(&cfg).env("RUST_LOG", "warn");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn out_dir(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[test]
fn simulate_scenario_one_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[scenario]\npreset = \"scenario_1\"\n";
    for name in ["a", "b"] {
        ok(run(dir.path(), &["simulate", "--seed", "4", "--out", out_dir(dir.path(), name).to_str().unwrap()], cfg));
    }
    let a = fs::read(dir.path().join("a/data.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/data.csv")).unwrap());
    let rows = csv_rows(&dir.path().join("a/data.csv"));
    assert_eq!(rows.len(), 1001);
    assert_eq!(rows[0], vec!["u_1", "u_2", "u_3", "u_4", "u_5", "u_6"]);
    assert!(rows[1..].iter().all(|r| r.len() == 6 && r.iter().all(|x| x != "NA")));
    assert_eq!(csv_rows(&dir.path().join("a/latent.csv")).len(), 1001);
    assert_eq!(csv_rows(&dir.path().join("a/params.csv")).len(), 8);
}

#[test]
fn block_mask_removes_exactly_the_block() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[scenario]\npreset = \"scenario_1\"\nn_time = 300\n\
               [mask]\nrate = 0.0\nblocks = [{ margin = 1, start = 101, length = 96 }]\n";
    let out = out_dir(dir.path(), "o");
    ok(run(dir.path(), &["simulate", "--out", out.to_str().unwrap()], cfg));
    let rows = csv_rows(&out.join("data.csv"));
    let na: Vec<(usize, usize)> = rows[1..]
        .iter()
        .enumerate()
        .flat_map(|(t, r)| r.iter().enumerate().filter(|(_, x)| *x == "NA").map(move |(j, _)| (t, j)))
        .collect();
    assert_eq!(na.len(), 96);
    assert!(na.iter().all(|&(t, j)| j == 0 && (100..196).contains(&t)));
}

#[test]
fn rate_mask_hits_requested_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[scenario]\npreset = \"scenario_1\"\nn_time = 250\n[mask]\nrate = 0.24\n";
    let out = out_dir(dir.path(), "o");
    ok(run(dir.path(), &["simulate", "--out", out.to_str().unwrap()], cfg));
    let text = fs::read_to_string(out.join("data.csv")).unwrap();
    assert_eq!(text.matches("NA").count(), 360);
}

#[test]
fn fully_missing_margin_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    fs::write(&input, "x,y\n0.2,NA\n0.4,\n0.7,na\n").unwrap();
    let cfg = format!("[data]\ninput = {:?}\n", input);
    let o = run(dir.path(), &["fit", "--out", dir.path().to_str().unwrap()], &cfg);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("configuration error") && err.contains("`y`"), "{err}");
}

#[test]
fn parse_errors_carry_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    fs::write(&input, "x,y\n0.2,0.3\n0.4,oops\n").unwrap();
    let cfg = format!("[data]\ninput = {:?}\n", input);
    let o = run(dir.path(), &["fit", "--out", dir.path().to_str().unwrap()], &cfg);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(!o.status.success() && err.contains("row 3, column y"), "{err}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["simulate"], "[scenario]\npreset = \"scenario_1\"\nsteps = 3\n");
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field"));
}

const PIPELINE: &str = "\
families = [\"gaussian\", \"clayton\"]
[scenario]
n_time = 60
tau_obs = [0.6, 0.5]
families = [\"gaussian\", \"clayton\"]
tau_lat = 0.6
latent_family = \"gaussian\"
[mask]
blocks = [{ margin = 2, start = 51, length = 10 }]
[sampler]
iterations = 120
warmup = 60
chains = 2
";

fn pipeline_config(sim: &Path, fit: &Path, extra: &str) -> String {
    format!(
        "{PIPELINE}[data]\ninput = {:?}\n[predict]\nfit_dir = {:?}\n[score]\ntruth = {:?}\nmasked = {:?}\n{extra}",
        sim.join("data.csv"),
        fit,
        sim.join("truth.csv"),
        sim.join("data.csv"),
    )
}

#[test]
fn holdout_fit_predict_score_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (sim, fit_a, fit_b) = (dir.path().join("sim"), dir.path().join("fa"), dir.path().join("fb"));
    let cfg = pipeline_config(&sim, &fit_a, "");
    ok(run(dir.path(), &["simulate", "--out", sim.to_str().unwrap()], &cfg));
    ok(run(dir.path(), &["fit", "--out", fit_a.to_str().unwrap()], &cfg));
    ok(run_env(dir.path(), &["fit", "--out", fit_b.to_str().unwrap()], &cfg, &[("RAYON_NUM_THREADS", "1")]));
    for f in ["summary.csv", "draws.csv", "latent_draws.csv"] {
        assert_eq!(fs::read(fit_a.join(f)).unwrap(), fs::read(fit_b.join(f)).unwrap(), "{f}");
    }
    let summary = csv_rows(&fit_a.join("summary.csv"));
    assert_eq!(summary[0][0], "parameter");
    assert_eq!(summary.len(), 4);

    ok(run(dir.path(), &["predict", "--out", fit_a.to_str().unwrap()], &cfg));
    let preds = fs::read(fit_a.join("predictions.csv")).unwrap();
    ok(run(dir.path(), &["predict", "--out", fit_b.to_str().unwrap()], &pipeline_config(&sim, &fit_b, "")));
    assert_eq!(preds, fs::read(fit_b.join("predictions.csv")).unwrap());
    let rows = csv_rows(&fit_a.join("predictions.csv"));
    // 10 cells x 120 retained draws
    assert_eq!(rows.len(), 1 + 10 * 120);

    ok(run(dir.path(), &["score", "--out", fit_a.to_str().unwrap()], &cfg));
    let scores = csv_rows(&fit_a.join("scores.csv"));
    assert_eq!(scores.len(), 11);
    for r in &scores[1..] {
        assert_eq!(r[1], "2");
        let c: f64 = r[3].parse().unwrap();
        assert!(c.is_finite() && c >= 0.0);
    }
}

#[test]
fn two_model_comparison_flags_one_best_per_margin() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let (full, gauss) = (dir.path().join("full"), dir.path().join("gauss"));
    let score = format!(
        "models = [{{ label = \"full\", predictions = {:?} }}, {{ label = \"gaussian\", predictions = {:?} }}]\n",
        full.join("predictions.csv"),
        gauss.join("predictions.csv")
    );
    let cfg = pipeline_config(&sim, &full, &score).replace("[mask]\n", "[mask]\nrate = 0.05\n");
    ok(run(dir.path(), &["simulate", "--out", sim.to_str().unwrap()], &cfg));
    ok(run(dir.path(), &["fit", "--out", full.to_str().unwrap()], &cfg));
    ok(run(dir.path(), &["predict", "--out", full.to_str().unwrap()], &cfg));
    let gcfg = pipeline_config(&sim, &gauss, &score);
    let gcfg = gcfg.replace("[mask]\n", "[mask]\nrate = 0.05\n");
    ok(run(dir.path(), &["fit", "--families", "gaussian", "--out", gauss.to_str().unwrap()], &gcfg));
    ok(run(dir.path(), &["predict", "--out", gauss.to_str().unwrap()], &gcfg));
    let out = dir.path().join("cmp");
    ok(run(dir.path(), &["score", "--out", out.to_str().unwrap()], &cfg));
    let rows = csv_rows(&out.join("comparison.csv"));
    assert_eq!(rows[0], vec!["model", "margin_1", "margin_2", "best_1", "best_2"]);
    assert_eq!(rows.len(), 3);
    for k in [3, 4] {
        assert_eq!(rows[1..].iter().filter(|r| r[k] == "true").count(), 1);
    }
}

#[test]
fn scoring_without_masked_cells_is_an_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let cfg = pipeline_config(&sim, &sim, "").replace("blocks = [{ margin = 2, start = 51, length = 10 }]", "");
    ok(run(dir.path(), &["simulate", "--out", sim.to_str().unwrap()], &cfg));
    fs::write(sim.join("predictions.csv"), "margin,t,draw,u,y\n").unwrap();
    let o = run(dir.path(), &["score", "--out", sim.to_str().unwrap()], &cfg);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty report"));
}

#[test]
fn data_scale_fit_produces_data_scale_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw.csv");
    let mut text = String::from("hour,a,b\n");
    for t in 0..80 {
        let h = t % 4;
        let s = (t as f64 * 0.7).sin();
        let a = if t == 70 { "NA".to_string() } else { (2.0 + h as f64 + 0.5 * s).exp().to_string() };
        let b = (1.0 + 0.1 * h as f64 + 0.3 * (t as f64 * 1.3).cos() + 0.2 * s).to_string();
        text.push_str(&format!("{h},{a},{b}\n"));
    }
    fs::write(&input, text).unwrap();
    let out = dir.path().join("o");
    let cfg = format!(
        "families = [\"gaussian\"]\n[data]\ninput = {:?}\nscale = \"data\"\ncovariates = [{{ column = \"hour\", kind = \"onehot\" }}]\n\
         [sampler]\niterations = 60\nwarmup = 30\nchains = 1\n",
        input
    );
    ok(run(dir.path(), &["fit", "--out", out.to_str().unwrap()], &cfg));
    assert!(out.join("margin_1.toml").exists() && out.join("margin_2.toml").exists());
    ok(run(dir.path(), &["predict", "--out", out.to_str().unwrap()], &cfg));
    let rows = csv_rows(&out.join("predictions.csv"));
    assert_eq!(rows.len(), 31);
    for r in &rows[1..] {
        assert_eq!((r[0].as_str(), r[1].as_str()), ("1", "71"));
        let y: f64 = r[4].parse().unwrap();
        assert!(y > 0.0);
    }
}

fn contour_values(dir: &Path, cfg: &str) -> Vec<(f64, f64, f64)> {
    let out = dir.join("c");
    ok(run(dir, &["contours", "--out", out.to_str().unwrap()], cfg));
    csv_rows(&out.join("contours.csv"))[1..]
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap()))
        .collect()
}

fn binormal(z1: f64, z2: f64, rho: f64) -> f64 {
    let q = (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / (1.0 - rho * rho);
    (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * (1.0 - rho * rho).sqrt())
}

#[test]
fn gaussian_contours_match_bivariate_normal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[scenario]\ntau_obs = [0.5, 0.3, 0.0, 0.0]\nfamilies = [\"gaussian\", \"gaussian\", \"gaussian\", \"gaussian\"]\n\
               tau_lat = 0.4\nlatent_family = \"gaussian\"\n\
               [contours]\nmargins = [1, 2]\npoints = 25\n";
    let rho = |tau: f64| (std::f64::consts::FRAC_PI_2 * tau).sin();
    let grid = contour_values(dir.path(), cfg);
    assert_eq!(grid.len(), 625);
    let err = grid.iter().map(|&(a, b, d)| (d - binormal(a, b, rho(0.5) * rho(0.3))).abs()).fold(0.0, f64::max);
    assert!(err < 1e-3, "max abs error {err}");

    let grid = contour_values(dir.path(), &cfg.replace("margins = [1, 2]", "margins = [3, 4]"));
    let err = grid.iter().map(|&(a, b, d)| (d - binormal(a, b, 0.0)).abs()).fold(0.0, f64::max);
    assert!(err < 1e-12, "independence error {err}");
}

#[test]
fn clayton_latent_temporal_contours_are_lower_tail_heavy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[scenario]\npreset = \"scenario_2\"\n[contours]\nkind = \"temporal\"\nmargins = [1]\n\
               z_min = -2.0\nz_max = 2.0\npoints = 3\n";
    let grid = contour_values(dir.path(), cfg);
    let at = |a: f64, b: f64| grid.iter().find(|g| g.0 == a && g.1 == b).unwrap().2;
    assert!(at(-2.0, -2.0) > at(2.0, 2.0), "{} vs {}", at(-2.0, -2.0), at(2.0, 2.0));
}

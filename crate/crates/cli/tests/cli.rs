use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn write_data(dir: &Path, identical: bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut rows = vec![];
    for _ in 0..150 {
        let x: f64 = rng.random_range(0.0..2.0);
        let union = u8::from(rng.random::<f64>() < 0.35);
        let e: f64 = rng.sample(rand_distr::StandardNormal);
        rows.push((1.4 + 0.3 * x + 0.1 * f64::from(union) + 0.3 * e, x, union));
    }
    let mut csv = String::from("lw,exper,union,wt,year\n");
    for (i, r) in rows.iter().enumerate() {
        csv.push_str(&format!("{},{},{},1,1979\n", r.0, r.1, r.2));
        let second = if identical { *r } else { (r.0 + 0.05 * r.1 + 0.02 * (i % 3) as f64, r.1, r.2) };
        csv.push_str(&format!("{},{},{},1,1988\n", second.0, second.1, second.2));
    }
    fs::write(dir.join("data.csv"), csv).unwrap();
}

fn config(estimator: &str, order: &str, bootstrap: bool) -> String {
    let bootstrap = if bootstrap {
        r#""bootstrap": {"scheme": {"type": "multinomial"}, "replications": 25, "level": 0.9},"#
    } else {
        ""
    };
    format!(
        r#"{{
  "input": "data.csv",
  "columns": {{"outcome": "lw", "covariates": ["exper", "union"], "weight": "wt", "group": "year", "union": "union"}},
  "estimator": {estimator},
  "grids": {{"u": {{"min": 0.1, "max": 0.9, "step": 0.1}}, "y_points": 30, "functional_u": {{"min": 0.2, "max": 0.8, "step": 0.2}}}},
  "counterfactuals": [{{"name": "cf", "conditional_group": 0, "covariate_group": 1}}],
  "functionals": ["quantile", "cdf"],
  {bootstrap}
  "decomposition": {{"policy": {{"strategy": "censoring", "m_old": 1.0, "m_new": 0.9}}, "functionals": ["quantile", "mean"], "order": "{order}"}},
  "seed": 5
}}"#
    )
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new(cfg: &str, identical: bool) -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_data(dir.path(), identical);
        fs::write(dir.path().join("config.json"), cfg).unwrap();
        Fixture { dir }
    }

    fn run(&self, sub: &str, out: &str, extra: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_cfdist"))
            .arg(sub)
            .arg(self.dir.path().join("config.json"))
            .arg("--output-dir")
            .arg(self.out(out))
            .args(extra)
            .output()
            .unwrap()
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn json(&self, out: &str, file: &str) -> Value {
        serde_json::from_slice(&fs::read(self.out(out).join(file)).unwrap()).unwrap()
    }
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn location_fit_writes_model_with_metadata() {
    let f = Fixture::new(&config(r#"{"type": "location"}"#, "forward", false), false);
    assert_ok(&f.run("fit", "o", &[]));
    let model = f.json("o", "cfdist.model.json");
    assert_eq!(model["metadata"]["tool"], "cfdist");
    assert_eq!(model["metadata"]["seed"], 5);
    assert_eq!(model["metadata"]["config_sha256"].as_str().unwrap().len(), 64);
    assert!(model.to_string().contains("location"));
}

#[test]
fn missing_column_is_a_config_error() {
    let cfg = config(r#"{"type": "location"}"#, "forward", false).replace("\"exper\"", "\"tenure\"");
    let f = Fixture::new(&cfg, false);
    let o = f.run("fit", "o", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tenure"));
}

#[test]
fn malformed_config_and_bad_thread_count_exit_with_code_2() {
    let f = Fixture::new("{\"input\": 3}", false);
    assert_eq!(f.run("fit", "o", &[]).status.code(), Some(2));
    let f = Fixture::new(&config(r#"{"type": "location"}"#, "forward", false), false);
    assert_eq!(f.run("fit", "o", &["--threads", "0"]).status.code(), Some(2));
}

#[test]
fn unparsable_data_exits_with_code_3() {
    let f = Fixture::new(&config(r#"{"type": "location"}"#, "forward", false), false);
    let mut data = fs::read_to_string(f.dir.path().join("data.csv")).unwrap();
    data.push_str("abc,1,0,1,1979\n");
    fs::write(f.dir.path().join("data.csv"), data).unwrap();
    assert_eq!(f.run("fit", "o", &[]).status.code(), Some(3));
}

#[test]
fn reruns_and_thread_counts_give_identical_bytes() {
    let f = Fixture::new(&config(r#"{"type": "dr", "link": "logit"}"#, "forward", true), false);
    assert_ok(&f.run("counterfactual", "a", &["--threads", "1"]));
    assert_ok(&f.run("counterfactual", "b", &["--threads", "1"]));
    assert_ok(&f.run("counterfactual", "c", &["--threads", "8"]));
    for file in ["cfdist.curves.csv", "cfdist.report.json"] {
        let a = fs::read(f.out("a").join(file)).unwrap();
        assert_eq!(a, fs::read(f.out("b").join(file)).unwrap(), "{file}");
        assert_eq!(a, fs::read(f.out("c").join(file)).unwrap(), "{file}");
    }
}

#[test]
fn seed_flag_changes_bootstrap_output() {
    let f = Fixture::new(&config(r#"{"type": "dr", "link": "logit"}"#, "forward", true), false);
    assert_ok(&f.run("counterfactual", "a", &[]));
    assert_ok(&f.run("counterfactual", "b", &["--seed", "6"]));
    let a = fs::read(f.out("a").join("cfdist.curves.csv")).unwrap();
    let b = fs::read(f.out("b").join("cfdist.curves.csv")).unwrap();
    assert_ne!(a, b);
    assert!(String::from_utf8_lossy(&b).contains("# seed: 6"));
}

#[test]
fn curves_csv_has_expected_columns_and_ordered_bands() {
    let f = Fixture::new(&config(r#"{"type": "dr", "link": "logit"}"#, "forward", true), false);
    assert_ok(&f.run("counterfactual", "o", &[]));
    let text = fs::read_to_string(f.out("o").join("cfdist.curves.csv")).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next().unwrap(), "functional,grid,estimate,lower,upper,se");
    let mut count = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let v: Vec<f64> = cells[2..5].iter().map(|c| c.parse().unwrap()).collect();
        assert!(v[1] <= v[0] && v[0] <= v[2], "{line}");
        count += 1;
    }
    assert!(count > 0);
}

fn totals(report: &Value) -> Vec<(String, Vec<f64>)> {
    report["reports"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            let vals = r["total"]["values"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
            (r["functional"].as_str().unwrap().to_owned(), vals)
        })
        .collect()
}

#[test]
fn identical_groups_decompose_to_zero() {
    let f = Fixture::new(
        &config(r#"{"type": "dr", "link": "logit"}"#, "forward", false).replace("\"m_new\": 0.9", "\"m_new\": 1.0")
            .replace("censoring", "ratio_scaling"),
        true,
    );
    assert_ok(&f.run("decompose", "o", &[]));
    let report = f.json("o", "cfdist.decomposition.report.json");
    for r in report["reports"].as_array().unwrap() {
        for c in std::iter::once(&r["total"]).chain(r["components"].as_array().unwrap().iter().map(|c| &c["curve"])) {
            for v in c["values"].as_array().unwrap() {
                assert!(v.as_f64().unwrap().abs() < 1e-12, "{r}");
            }
        }
    }
}

#[test]
fn reverse_order_relabels_components_and_keeps_total() {
    let f = Fixture::new(&config(r#"{"type": "dr", "link": "logit"}"#, "forward", false), false);
    assert_ok(&f.run("decompose", "fwd", &[]));
    let cfg = config(r#"{"type": "dr", "link": "logit"}"#, "reverse", false);
    fs::write(f.dir.path().join("config.json"), cfg).unwrap();
    assert_ok(&f.run("decompose", "rev", &[]));
    let fwd = f.json("fwd", "cfdist.decomposition.report.json");
    let rev = f.json("rev", "cfdist.decomposition.report.json");
    assert_eq!(fwd["order"], serde_json::json!(["minimum_wage", "unionization", "composition", "price"]));
    assert_eq!(rev["order"], serde_json::json!(["price", "composition", "unionization", "minimum_wage"]));
    for ((fa, a), (fb, b)) in totals(&fwd).iter().zip(totals(&rev).iter()) {
        assert_eq!(fa, fb);
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn bands_audit_writes_draws() {
    let f = Fixture::new(&config(r#"{"type": "dr", "link": "logit"}"#, "forward", true), false);
    assert_ok(&f.run("bands-audit", "o", &[]));
    let text = fs::read_to_string(f.out("o").join("cfdist.draws.csv")).unwrap();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "replication,functional,grid,value");
    assert!(data.len() > 25);
}

#[test]
fn duration_anchor_between_grid_points_is_added_to_the_grid() {
    let f = Fixture::new(&config(r#"{"type": "duration_dr", "link": "logit", "y0": 1.7123}"#, "forward", false), false);
    assert_ok(&f.run("fit", "o", &[]));
    assert!(fs::read_to_string(f.out("o").join("cfdist.model.json")).unwrap().contains("1.7122999999999999e0"));
}

use std::path::PathBuf;
use std::process::{Command, Output};

fn kkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kkit")).args(args).output().expect("spawn kkit")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("kkit-cli-test-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn field_info_golden_sqrt5() {
    let o = kkit(&["field", "info", "--D", "5"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let r = &v["result"];
    assert_eq!(r["D_F"], 5);
    assert_eq!(r["degree"], 2);
    assert_eq!(r["eps0"], "1*w");
    assert_eq!(r["eps0_norm"], -1);
    let log_eps = r["log_eps0"].as_f64().unwrap();
    assert!((log_eps - ((1.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-14);
    assert_eq!(v["config"]["field.D"], "5");
    assert_eq!(v["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn field_info_rational_and_d_mod_4() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&kkit(&["field", "info", "--D", "1"]))).unwrap();
    assert_eq!(v["result"]["degree"], 1);
    let v: serde_json::Value = serde_json::from_str(&stdout(&kkit(&["field", "info", "--D", "3"]))).unwrap();
    assert_eq!(v["result"]["D_F"], 12);
}

#[test]
fn missing_flag_exits_2_with_usage() {
    let o = kkit(&["field", "info"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("--D"));
    assert!(err.contains("Usage: kkit field info"));
}

#[test]
fn unknown_subcommand_exits_2() {
    assert_eq!(kkit(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn module_error_is_a_json_record() {
    let o = kkit(&["field", "info", "--D", "4"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(String::from_utf8(o.stderr).unwrap().trim()).unwrap();
    assert_eq!(v["error"]["kind"], "module");
}

#[test]
fn config_error_reports_line_and_column() {
    let dir = scratch("cfg-err");
    let p = dir.join("run.conf");
    std::fs::write(&p, "[field]\nD = 5\n  oops\n").unwrap();
    let o = kkit(&["--config", p.to_str().unwrap(), "field", "info"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(String::from_utf8(o.stderr).unwrap().trim()).unwrap();
    assert_eq!(v["error"]["kind"], "config");
    assert!(v["error"]["message"].as_str().unwrap().contains("line 3, column 3"));
}

#[test]
fn config_file_supplies_values_and_flags_override() {
    let dir = scratch("cfg-ok");
    let p = dir.join("run.conf");
    std::fs::write(&p, "# test\n[field]\nD = 2\n").unwrap();
    let v: serde_json::Value =
        serde_json::from_str(&stdout(&kkit(&["--config", p.to_str().unwrap(), "field", "info"]))).unwrap();
    assert_eq!(v["result"]["D_F"], 8);
    let v: serde_json::Value =
        serde_json::from_str(&stdout(&kkit(&["--config", p.to_str().unwrap(), "field", "info", "--D", "5"]))).unwrap();
    assert_eq!(v["result"]["D_F"], 5);
}

#[test]
fn csv_has_header_and_metadata_block() {
    let text = stdout(&kkit(&["lfun", "eval", "--D", "1", "--q", "1", "--t0", "1", "--t1", "20", "--steps", "3", "--terms", "500"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,re,im,abs,log7bound");
    let data: Vec<&str> = lines.iter().copied().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 5);
    for l in &data[1..] {
        assert_eq!(l.split(',').count(), 5);
    }
    assert!(lines.iter().any(|l| l.starts_with("# command: lfun eval")));
    let hash = lines.iter().find_map(|l| l.strip_prefix("# config-sha256: ")).unwrap();
    assert_eq!(hash.len(), 64);
    assert!(lines.contains(&"# config: lfun.steps = 3"));
    // metadata only after the data
    let first_meta = lines.iter().position(|l| l.starts_with('#')).unwrap();
    assert!(lines[first_meta..].iter().all(|l| l.starts_with('#')));
}

#[test]
fn out_flag_writes_file() {
    let dir = scratch("out");
    let p = dir.join("info.json");
    let o = kkit(&["--out", p.to_str().unwrap(), "field", "info", "--D", "13"]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(v["result"]["D_F"], 13);
}

#[test]
fn thread_count_does_not_change_output() {
    let cases: Vec<Vec<&str>> = vec![
        vec!["kloosterman", "scan", "--D", "5", "--q", "2", "--max-norm", "120"],
        vec!["density", "tauber", "--D", "5", "--model", "uniform", "--seed", "7", "--partition", "E=1;Q+=2",
             "--cube", "1:0.3,5", "--resolution", "20", "--x-max", "40", "--X", "10:40:log:3"],
        vec!["geometric", "scan", "--D", "1", "--partition", "Q+=1", "--s-grid", "0.5:0.2:log:4", "--B", "150"],
    ];
    for args in cases {
        let mut one = vec!["--threads", "1"];
        one.extend(&args);
        let mut four = vec!["--threads", "4"];
        four.extend(&args);
        let (a, b) = (kkit(&one), kkit(&four));
        assert!(a.status.success(), "{args:?}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn cache_dir_holds_ideal_tables() {
    let dir = scratch("cache");
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_kkit"))
            .env("KKIT_CACHE_DIR", &dir)
            .args(["rayclass", "table", "--D", "5", "--q", "2", "--terms", "30"])
            .output()
            .unwrap()
    };
    let first = run();
    assert!(first.status.success());
    let files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files.len(), 1);
    assert!(files[0].to_str().unwrap().starts_with("ideals-D5-"));
    assert_eq!(run().stdout, first.stdout);
}

#[test]
fn density_constants_split_identity() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&kkit(&[
        "density", "constants", "--D", "5", "--partition", "E=2;Q-=1", "--cube", "2:-2.5,-1.5",
    ])))
    .unwrap();
    let main = v["result"]["main"]["value"].as_f64().unwrap();
    let corgen = v["result"]["corgen"].as_f64().unwrap();
    // one place in Q, so the two sign splits double the constant
    assert!((corgen - 2.0 * main).abs() < 1e-14);
    // only b = 4 (lambda = -2) lies in the interval, with weight b - 1
    assert_eq!(v["result"]["main"]["factors"][0], 3.0);
}

#[test]
fn density_tauber_dgrid_tracks_target() {
    let text = stdout(&kkit(&[
        "density", "tauber", "--D", "5", "--model", "dgrid", "--seed", "1", "--partition", "E=1;Q+=2",
        "--cube", "1:0.3,5", "--resolution", "40", "--x-max", "60", "--X", "10:60:log:3",
    ]));
    let last = text.lines().filter(|l| !l.starts_with('#')).last().unwrap();
    let rel: f64 = last.split(',').nth(3).unwrap().parse().unwrap();
    assert!(rel < 0.05, "{last}");
}

#[test]
fn density_tauber_rejects_tiny_resolution() {
    let o = kkit(&[
        "density", "tauber", "--D", "1", "--model", "dgrid", "--seed", "1", "--partition", "Q+=1",
        "--cube", "", "--resolution", "3",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("resolution 3"));
}

#[test]
fn spec_csv_headers() {
    let cases: [(&[&str], &str); 3] = [
        (&["kloosterman", "scan", "--D", "5", "--q", "[2]", "--max-norm", "30"], "D,q_norm,r,c_repr,norm_c,S_value,nrr,ratio"),
        (&["bessel", "check", "--family", "minus", "--alpha", "0.6", "--y-grid", "1e-3:1:log:3"], "s,y,value_re,value_im,envelope,ratio"),
        (&["geometric", "scan", "--D", "1", "--partition", "Q+=1", "--s-grid", "0.5:0.2:log:4", "--B", "100"], "s,delta,delta_pred,kl_value,kl_tail,kl_bound"),
    ];
    for (args, header) in cases {
        let o = kkit(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(stdout(&o).lines().next(), Some(header));
    }
}

#[test]
fn eta_eval_json_fields() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&kkit(&["eta", "eval", "--family", "plus", "--s", "0.5"]))).unwrap();
    for key in ["continuous", "discrete", "total", "err"] {
        assert!(v["result"].get(key).is_some(), "{key}");
    }
}

#[test]
fn lfun_steps_required_without_grid() {
    let o = kkit(&["lfun", "eval", "--D", "1", "--t0", "1", "--t1", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("--steps"));
}

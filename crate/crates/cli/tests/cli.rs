use std::path::Path;
use std::process::{Command, Output};

fn mimo_noma(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mimo-noma"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Csv {
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn read(path: &Path) -> Self {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
        let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect();
        Self { rows }
    }

    fn col(&self, index: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[index].parse().unwrap()).collect()
    }
}

const SWEEP: usize = 0;
const P_FAR: usize = 1;
const P_NEAR: usize = 2;
const STDERR_NEAR: usize = 4;

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn empty_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "name = \"e\"\n[sweep]\naxis = \"rate_far\"\nvalues = []\n");
    let o = mimo_noma(&["sweep", &cfg], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("grid is empty"), "{}", stderr(&o));
}

#[test]
fn schema_errors_name_field_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "name = \"e\"\n[sweep]\naxis = \"rate_far\"\nvalues = [0.5]\n[run]\ntrails = 10\n",
    );
    let o = mimo_noma(&["sweep", &cfg], dir.path());
    assert!(!o.status.success());
    let msg = stderr(&o);
    assert!(msg.contains("trails") && msg.contains("line 6"), "{msg}");
}

#[test]
fn unknown_preset_lists_the_presets() {
    let dir = tempfile::tempdir().unwrap();
    let o = mimo_noma(&["sweep", "fig9"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("fig5-20db"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = mimo_noma(&["sweep", "fig1", "--trials", "20000", "--deterministic"], out);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["fig1_exact_conditional.csv", "fig1_approx_conditional.csv", "fig1_mc_conditional.csv"] {
        let (x, y) = (std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name}");
        assert!(!x.starts_with(b"#"));
    }
}

#[test]
fn timestamp_line_without_deterministic_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = mimo_noma(&["analyze", "fig5"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("fig5_exact_conditional.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# generated"));
    assert!(lines.next().unwrap().starts_with("sweep_value,p_far,p_near"));
}

#[test]
fn fig1_orders_exact_approx_and_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let o = mimo_noma(&["sweep", "fig1", "--deterministic"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let read = |m: &str| Csv::read(&dir.path().join(format!("fig1_{m}_conditional.csv")));
    let (exact, approx, mc) = (read("exact"), read("approx"), read("mc"));
    assert_eq!(exact.rows.len(), 6);
    let a = approx.col(P_NEAR);
    let mc_se = mc.col(STDERR_NEAR);
    for (i, ((e, a), m)) in exact.col(P_NEAR).iter().zip(&a).zip(mc.col(P_NEAR)).enumerate() {
        assert!(e <= a, "row {i}: exact {e} > approx {a}");
        assert!(m <= a + 3.0 * mc_se[i].max(1e-5), "row {i}: mc {m} > approx {a}");
    }
    assert!(mc.rows.iter().all(|r| r[7] == "1"));
    assert!(exact.rows.iter().all(|r| r[3].is_empty() && r[7].is_empty()));
}

#[test]
fn fig4_flat_above_threshold_and_rising_below() {
    let dir = tempfile::tempdir().unwrap();
    let o = mimo_noma(&["sweep", "fig4", "--deterministic"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for mode in ["random", "distance"] {
        let t = Csv::read(&dir.path().join(format!("fig4_exact_{mode}.csv")));
        let lambda = t.col(SWEEP);
        for col in [P_FAR, P_NEAR] {
            let p = t.col(col);
            let dense: Vec<f64> = lambda.iter().zip(&p).filter(|(l, _)| **l >= 1e-5).map(|(_, p)| *p).collect();
            let (lo, hi) = dense.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
            assert!((hi - lo) / lo <= 0.02, "{mode} column {col}: {dense:?}");
            // Outage grows as the density falls below 1e-5.
            let sparse: Vec<f64> = lambda.iter().zip(&p).filter(|(l, _)| **l <= 1e-5).map(|(_, p)| *p).collect();
            assert!(sparse.windows(2).all(|w| w[0] >= w[1]), "{mode} column {col}: {sparse:?}");
            assert!(sparse[0] > hi, "{mode} column {col}: {sparse:?}");
        }
    }
}

#[test]
fn validate_passes_and_detects_small_damping() {
    let dir = tempfile::tempdir().unwrap();
    let ok = mimo_noma(&["validate"], dir.path());
    let text = String::from_utf8_lossy(&ok.stdout);
    assert!(ok.status.success(), "{text}");
    assert!(text.contains("0 failed"));

    let bad = mimo_noma(&["validate", "--a", "3"], dir.path());
    assert!(!bad.status.success());
    let text = String::from_utf8_lossy(&bad.stdout);
    assert!(text.lines().any(|l| l.starts_with("kernel-1d") && l.ends_with("FAIL")), "{text}");
}

#[test]
fn seed_override_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        let out = dir.path().join(seed);
        let o = mimo_noma(&["simulate", "fig1", "--trials", "2000", "--seed", seed, "--deterministic"], &out);
        assert!(o.status.success(), "{}", stderr(&o));
        Csv::read(&out.join("fig1_mc_conditional.csv"))
    };
    let (a, b) = (run("11"), run("12"));
    assert!(a.rows.iter().all(|r| r[7] == "11"));
    assert!(b.rows.iter().all(|r| r[7] == "12"));
    assert_ne!(a.col(P_FAR), b.col(P_FAR));

    let v = mimo_noma(&["validate", "--seed", "5", "--trials", "3000"], dir.path());
    assert!(String::from_utf8_lossy(&v.stdout).contains("seed 5, 3000 trials"));
}

#[test]
fn optimize_writes_all_schemes() {
    let dir = tempfile::tempdir().unwrap();
    let o = mimo_noma(&["optimize", "fig7", "--deterministic"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let goodput = |m: &str| Csv::read(&dir.path().join(format!("fig7_{m}_conditional.csv"))).col(5);
    let proposed = goodput("optimize");
    for baseline in ["oma-precoded", "oma-plain", "noma-plain"] {
        for (p, b) in proposed.iter().zip(goodput(baseline)) {
            assert!(*p >= b, "{baseline}: {p} < {b}");
        }
    }
}

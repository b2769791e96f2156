use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gemlab_core::fixtures::{T1_ENV, T1_INCOMPLETE_MODEL, T1_MODEL};

fn gemlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gemlab")).args(args).current_dir(cwd).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("t1.gem"), T1_MODEL).unwrap();
        fs::write(dir.path().join("t1_incomplete.gem"), T1_INCOMPLETE_MODEL).unwrap();
        fs::write(dir.path().join("t1.env"), T1_ENV).unwrap();
        Workspace { dir }
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.file(name)).unwrap()
    }

    fn run(&self, args: &[&str]) -> Output {
        gemlab(args, self.path())
    }
}

const T1_PHENOTYPES: &str = "gene,medium,phenotype\n\
WT,M_A,growth\n\
WT,M_B,growth\n\
g1,M_A,no_growth\n\
g1,M_B,growth\n\
g2,M_A,no_growth\n\
g2,M_B,no_growth\n";

const ORACLE: &[&str] = &["campaign", "--model", "t1_incomplete.gem", "--env", "t1.env", "--oracle-deleted", "codes(g2,e2)"];

#[test]
fn simulate_all_trials_of_t1() {
    let w = Workspace::new();
    let o = w.run(&["simulate", "--model", "t1.gem", "--env", "t1.env", "--trials", "all", "--out", "pheno.csv"]);
    assert_eq!(code(&o), 0, "{o:?}");
    assert_eq!(w.read("pheno.csv"), T1_PHENOTYPES);
    let names: Vec<String> = fs::read_dir(w.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert!(names.iter().all(|n| !n.ends_with(".tmp")), "{names:?}");
}

#[test]
fn simulate_listed_trials_with_a_hypothesis() {
    let w = Workspace::new();
    fs::write(w.file("trials.csv"), "gene,medium\ng2,M_A\nWT,M_B\n").unwrap();
    let o = w.run(&["simulate", "--model", "t1_incomplete.gem", "--env", "t1.env", "--trials", "trials.csv", "--hypothesis", "codes(g2,e2)"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "gene,medium,phenotype\ng2,M_A,no_growth\nWT,M_B,growth\n");
    let o = w.run(&["simulate", "--model", "t1_incomplete.gem", "--env", "t1.env", "--trials", "trials.csv"]);
    assert_eq!(stdout(&o), "gene,medium,phenotype\ng2,M_A,growth\nWT,M_B,growth\n");
}

#[test]
fn input_errors_exit_with_one() {
    let w = Workspace::new();
    assert_eq!(code(&w.run(&["simulate", "--model", "missing.gem", "--env", "t1.env"])), 1);
    assert_eq!(code(&w.run(&["simulate", "--model", "t1.gem", "--env", "t1.env", "--bogus"])), 1);
    assert_eq!(code(&w.run(&["frobnicate"])), 1);
    assert_eq!(code(&w.run(&["--help"])), 0);
    fs::write(w.file("bad.gem"), "reaction r1 rev=0 enz=e9 sub=A prod=B\n").unwrap();
    let o = w.run(&["simulate", "--model", "bad.gem", "--env", "t1.env"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("e9"));
    assert_eq!(code(&w.run(&[ORACLE, &["--strategy", "greedy"]].concat())), 1);
    assert_eq!(code(&w.run(&[ORACLE, &["--budget", "-3"]].concat())), 1);
    assert_eq!(code(&w.run(&["campaign", "--model", "t1_incomplete.gem", "--env", "t1.env"])), 1);
    assert_eq!(code(&w.run(&[ORACLE, &["--enzyme-scope", "e7"]].concat())), 1);
}

#[test]
fn oracle_campaign_reaches_full_accuracy() {
    let w = Workspace::new();
    let o = w.run(&[ORACLE, &["--strategy", "ase", "--seed", "7", "--log", "c.jsonl", "--metrics", "m.csv"]].concat());
    assert_eq!(code(&o), 0, "{o:?}");
    let metrics = w.read("m.csv");
    assert_eq!(
        metrics,
        "step,strategy,seed,cost,cumulative_cost,log10_cumulative_cost,alive,accuracy\n\
         0,ase,,0.00,0.00,,3,0.500000\n\
         1,ase,,3.00,3.00,0.477121,2,0.833333\n\
         2,ase,,6.00,9.00,0.954243,1,1.000000\n"
    );
    assert_eq!(w.read("c.jsonl").lines().count(), 3);
    assert!(stdout(&o).contains("alive: codes(g2,e2)"));
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let w = Workspace::new();
    for workers in ["1", "3"] {
        let (log, metrics) = (format!("c{workers}.jsonl"), format!("m{workers}.csv"));
        let args = [ORACLE, &["--strategy", "random", "--seed", "4", "--workers", workers, "--log", &log, "--metrics", &metrics]].concat();
        assert_eq!(code(&w.run(&args)), 0);
        let sim = w.run(&["simulate", "--model", "t1.gem", "--env", "t1.env", "--workers", workers, "--out", &format!("p{workers}.csv")]);
        assert_eq!(code(&sim), 0);
    }
    assert_eq!(w.read("m1.csv"), w.read("m3.csv"));
    assert_eq!(w.read("c1.jsonl"), w.read("c3.jsonl"));
    assert_eq!(w.read("p1.csv"), w.read("p3.csv"));
}

#[test]
fn resuming_a_cut_log_reproduces_the_full_run() {
    let w = Workspace::new();
    let base = [ORACLE, &["--strategy", "naive"]].concat();
    assert_eq!(code(&w.run(&[&base[..], &["--log", "full.jsonl", "--metrics", "full.csv"]].concat())), 0);
    let full = w.read("full.jsonl");
    let cut: String = full.lines().take(2).map(|l| format!("{l}\n")).collect();
    fs::write(w.file("cut.jsonl"), &cut).unwrap();
    let o = w.run(&["campaign", "--model", "t1_incomplete.gem", "--env", "t1.env", "--log", "cut.jsonl", "--resume", "--metrics", "cut.csv"]);
    assert_eq!(code(&o), 0, "{o:?}");
    assert_eq!(w.read("cut.jsonl"), full);
    assert_eq!(w.read("cut.csv"), w.read("full.csv"));
}

#[test]
fn resume_rejects_a_diverging_log() {
    let w = Workspace::new();
    assert_eq!(code(&w.run(&[ORACLE, &["--log", "c.jsonl"]].concat())), 0);
    let tampered = w.read("c.jsonl").replace("\"alive_count\":2", "\"alive_count\":3");
    fs::write(w.file("c.jsonl"), tampered).unwrap();
    let o = w.run(&["campaign", "--model", "t1_incomplete.gem", "--env", "t1.env", "--log", "c.jsonl", "--resume"]);
    assert_eq!(code(&o), 2, "{o:?}");
    fs::write(w.file("t1_other.gem"), T1_MODEL).unwrap();
    let o = w.run(&["campaign", "--model", "t1_other.gem", "--env", "t1.env", "--log", "c.jsonl", "--resume"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn external_campaign_answers_from_an_outcomes_file() {
    let w = Workspace::new();
    fs::write(w.file("lab1.csv"), "gene,medium,phenotype\ng2,M_A,no_growth\n").unwrap();
    let ext = ["campaign", "--model", "t1_incomplete.gem", "--env", "t1.env", "--strategy", "ase"];
    let o = w.run(&[&ext[..], &["--outcomes", "lab1.csv", "--log", "lab.jsonl"]].concat());
    assert_eq!(code(&o), 0, "{o:?}");
    let out = stdout(&o);
    assert!(out.contains("status: awaiting_outcome"), "{out}");
    assert!(out.contains("awaiting: g2 M_B"), "{out}");
    assert_eq!(w.read("lab.jsonl").lines().count(), 2);

    fs::write(w.file("lab2.csv"), "gene,medium,phenotype\ng2,M_A,no_growth\ng2,M_B,no_growth\n").unwrap();
    let o = w.run(&[&ext[..5], &["--outcomes", "lab2.csv", "--log", "lab.jsonl", "--resume", "--metrics", "lab.csv"]].concat());
    assert_eq!(code(&o), 0, "{o:?}");
    assert!(stdout(&o).contains("status: done"));
    assert!(stdout(&o).contains("alive: codes(g2,e2)"));
    assert_eq!(
        w.read("lab.csv"),
        "step,strategy,seed,cost,cumulative_cost,log10_cumulative_cost,alive,accuracy\n\
         0,ase,,0.00,0.00,,3,\n\
         1,ase,,3.00,3.00,0.477121,2,\n\
         2,ase,,6.00,9.00,0.954243,1,\n"
    );
}

#[test]
fn abduce_prunes_and_reports_exhaustion() {
    let w = Workspace::new();
    fs::write(w.file("obs.csv"), "gene,medium,phenotype\ng2,M_A,no_growth\n").unwrap();
    let o = w.run(&["abduce", "--model", "t1_incomplete.gem", "--env", "t1.env", "--observations", "obs.csv"]);
    assert_eq!(code(&o), 0, "{o:?}");
    assert_eq!(
        stdout(&o),
        "hypothesis,status,refuted_by_gene,refuted_by_medium,refuted_by_phenotype\n\
         \"codes(g1,e2)\",refuted,g2,M_A,no_growth\n\
         \"codes(g2,e1)\",alive,,,\n\
         \"codes(g2,e2)\",alive,,,\n"
    );
    fs::write(w.file("impossible.csv"), "gene,medium,phenotype\nWT,M_A,no_growth\n").unwrap();
    let o = w.run(&["abduce", "--model", "t1_incomplete.gem", "--env", "t1.env", "--observations", "impossible.csv"]);
    assert_eq!(code(&o), 2);
    fs::write(w.file("unknown.csv"), "gene,medium,phenotype\ng2,M_A,maybe\n").unwrap();
    let o = w.run(&["abduce", "--model", "t1_incomplete.gem", "--env", "t1.env", "--observations", "unknown.csv"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn compare_reports_the_cost_ratio() {
    let w = Workspace::new();
    let args = ["compare", "--model", "t1_incomplete.gem", "--env", "t1.env", "--oracle-deleted", "codes(g2,e2)", "--strategies", "ase,random", "--seeds", "5"];
    let o = w.run(&[&args[..], &["--metrics", "runs.csv", "--out", "summary.csv", "--workers", "1"]].concat());
    assert_eq!(code(&o), 0, "{o:?}");
    let summary = w.read("summary.csv");
    let ratio: f64 = summary.lines().last().unwrap().strip_prefix("# ase_random_cost_ratio,").unwrap().parse().unwrap();
    assert!(ratio <= 1.0, "{summary}");
    assert!(summary.starts_with("strategy,runs,resolved,exhausted,median_cost_to_full_accuracy\nase,1,1,0,9.00\nrandom,5,5,0,"));
    assert_eq!(w.read("runs.csv").lines().filter(|l| l.starts_with("0,")).count(), 6);

    let o = w.run(&[&args[..], &["--metrics", "runs2.csv", "--out", "summary2.csv", "--workers", "2"]].concat());
    assert_eq!(code(&o), 0);
    assert_eq!(w.read("summary2.csv"), summary);
    assert_eq!(w.read("runs2.csv"), w.read("runs.csv"));

    let single = w.run(&["compare", "--model", "t1_incomplete.gem", "--env", "t1.env", "--oracle-deleted", "codes(g2,e2)", "--strategies", "naive"]);
    assert_eq!(code(&single), 0);
    assert!(stdout(&single).ends_with("# ase_random_cost_ratio,\n"));
}

#[test]
fn bench_reports_throughput_and_reference_cells() {
    let w = Workspace::new();
    let args = ["bench", "--genes", "40", "--reactions", "80", "--metabolites", "60", "--media", "3", "--workers", "2", "--repetitions", "1"];
    let o = w.run(&args);
    assert_eq!(code(&o), 0, "{o:?}");
    let text = stdout(&o);
    assert!(text.contains("speedup:"));
    assert!(text.contains("serial 0.6, parallel 0.06"));
    assert!(text.contains("identical across worker counts: true"));
    let o = w.run(&[&args[..], &["--json", "--out", "bench.json"]].concat());
    assert_eq!(code(&o), 0);
    let report: serde_json::Value = serde_json::from_str(&w.read("bench.json")).unwrap();
    assert_eq!(report["serial"]["simulations"], 41 * 3);
    assert_eq!(report["params"]["genes"], 40);
}

#[test]
fn serve_rejects_an_unusable_address() {
    let w = Workspace::new();
    let o = w.run(&["serve", "--addr", "not-an-address", "--data", "store"]);
    assert_eq!(code(&o), 1);
    assert!(w.file("store").join("campaigns").is_dir());
}

//! Acceptance criterion 8: every subcommand is deterministic — reruns with
//! the same inputs and seeds are byte-identical, and results do not depend on
//! the thread count.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;

use pollstrat::core_model::DimensionRegistry;
use pollstrat::synth::{random_consistent_reference, SyntheticSpec};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pollstrat")
}

fn run(args: &[&str], envs: &[(&str, &str)]) {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let output = cmd.output().expect("binary runs");
    assert!(
        output.status.success(),
        "pollstrat {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&output.stderr)
    );
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        out.insert(
            entry.file_name().to_string_lossy().into_owned(),
            fs::read(entry.path()).unwrap(),
        );
    }
    assert!(!out.is_empty(), "no outputs in {}", dir.display());
    out
}

fn assert_identical(a: &Path, b: &Path, what: &str) {
    assert_eq!(dir_contents(a), dir_contents(b), "{what} outputs differ");
}

#[test]
fn criterion_8_determinism() {
    let body = || {
        let root = tempfile::tempdir().unwrap();
        let root = root.path();

        // A spec with a consistent multi-dimension population, including bot
        // scores so every subcommand has data to work on.
        let registry = DimensionRegistry::default_registry();
        let dims: Vec<String> = ["gender", "ideology", "bot"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut coefs = BTreeMap::new();
        coefs.insert(
            "gender".to_string(),
            BTreeMap::from([("male".to_string(), 0.15)]),
        );
        coefs.insert(
            "ideology".to_string(),
            BTreeMap::from([("dem".to_string(), -0.2), ("rep".to_string(), 0.25)]),
        );
        let spec = SyntheticSpec {
            seed: 21,
            n_polls: 120,
            votes_min: 20,
            votes_max: 50_000,
            true_intercept: 0.45,
            true_coefficients: coefs,
            population: random_consistent_reference(&registry, &dims, 17),
            missingness: BTreeMap::new(),
            noise_sd: 0.03,
            proxies_mean: 25.0,
        };
        let spec_path = root.join("spec.json");
        fs::write(&spec_path, serde_json::to_string_pretty(&spec).unwrap()).unwrap();
        let spec_path = spec_path.to_str().unwrap();

        let path = |name: &str| root.join(name).to_str().unwrap().to_string();
        let corpus = path("corpus");
        run(&["synth", "--spec", spec_path, "--out-dir", &corpus], &[]);
        run(&["synth", "--spec", spec_path, "--out-dir", &path("corpus2")], &[]);
        assert_identical(&root.join("corpus"), &root.join("corpus2"), "synth");

        let polls = format!("{corpus}/polls.csv");
        let attrs = format!("{corpus}/attributes.csv");
        let reference = format!("{corpus}/reference.json");

        run(
            &["normalize", "--polls", &polls, "--season", "2020", "--out-dir", &path("norm1")],
            &[],
        );
        run(
            &["normalize", "--polls", &polls, "--season", "2020", "--out-dir", &path("norm2")],
            &[],
        );
        assert_identical(&root.join("norm1"), &root.join("norm2"), "normalize");

        let common = |out: &str| {
            vec![
                "--polls".to_string(),
                polls.clone(),
                "--attributes".to_string(),
                attrs.clone(),
                "--season".to_string(),
                "2020".to_string(),
                "--dimensions".to_string(),
                "gender,ideology".to_string(),
                "--out-dir".to_string(),
                path(out),
            ]
        };
        let as_refs = |v: &[String], head: &[&str]| -> Vec<String> {
            head.iter()
                .map(|s| s.to_string())
                .chain(v.iter().cloned())
                .collect()
        };

        for out in ["fit1", "fit2"] {
            let args = as_refs(&common(out), &["fit"]);
            run(&args.iter().map(String::as_str).collect::<Vec<_>>(), &[]);
        }
        assert_identical(&root.join("fit1"), &root.join("fit2"), "fit");

        for out in ["post1", "post2"] {
            let mut args = as_refs(&common(out), &["poststratify"]);
            args.extend([
                "--reference".to_string(),
                reference.clone(),
                "--bootstrap-replicates".to_string(),
                "200".to_string(),
            ]);
            run(&args.iter().map(String::as_str).collect::<Vec<_>>(), &[]);
        }
        assert_identical(&root.join("post1"), &root.join("post2"), "poststratify");

        // Sweep must also be invariant to the worker thread count.
        for (out, threads) in [("sweep1", "1"), ("sweep2", "4"), ("sweep3", "0")] {
            let mut args = as_refs(&common(out), &["sweep"]);
            args.extend([
                "--reference".to_string(),
                reference.clone(),
                "--thresholds".to_string(),
                "0,50,200".to_string(),
                "--bootstrap-replicates".to_string(),
                "100".to_string(),
            ]);
            run(
                &args.iter().map(String::as_str).collect::<Vec<_>>(),
                &[("POLLSTRAT_THREADS", threads)],
            );
        }
        assert_identical(&root.join("sweep1"), &root.join("sweep2"), "sweep threads");
        assert_identical(&root.join("sweep1"), &root.join("sweep3"), "sweep threads");

        let model = path("fit1") + "/model.json";
        for out in ["cond1", "cond2"] {
            run(
                &[
                    "conditional",
                    "--model",
                    &model,
                    "--reference",
                    &reference,
                    "--dimension",
                    "ideology",
                    "--out-dir",
                    &path(out),
                ],
                &[],
            );
        }
        assert_identical(&root.join("cond1"), &root.join("cond2"), "conditional");

        for out in ["corr1", "corr2"] {
            run(
                &["correlate", "--polls", &polls, "--season", "2020", "--out-dir", &path(out)],
                &[],
            );
        }
        assert_identical(&root.join("corr1"), &root.join("corr2"), "correlate");

        let ratings = root.join("ratings.csv");
        fs::write(&ratings, "r1,r2\nyes,yes\nno,no\nyes,no\nno,no\n").unwrap();
        for out in ["kap1", "kap2"] {
            run(
                &[
                    "kappa",
                    "--ratings",
                    ratings.to_str().unwrap(),
                    "--out-dir",
                    &path(out),
                ],
                &[],
            );
        }
        assert_identical(&root.join("kap1"), &root.join("kap2"), "kappa");

        for out in ["bot1", "bot2"] {
            run(
                &[
                    "calibrate-bot",
                    "--attributes",
                    &attrs,
                    "--target-fraction",
                    "0.1",
                    "--out-dir",
                    &path(out),
                ],
                &[],
            );
        }
        assert_identical(&root.join("bot1"), &root.join("bot2"), "calibrate-bot");
    };
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(()) => println!("acceptance 8 (determinism): PASS"),
        Err(cause) => {
            println!("acceptance 8 (determinism): FAIL");
            resume_unwind(cause);
        }
    }
}

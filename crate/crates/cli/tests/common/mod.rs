#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_causal-shap");
pub const PREDICTOR: &str = env!("CARGO_BIN_EXE_test-predictor");

pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    /// Three continuous features `a → {b, c}` (confounded) and a linear model.
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut data = String::from("a,b,c\n");
        for k in 0..40 {
            let t = k as f64 / 7.0;
            data += &format!("{},{},{}\n", t.sin(), 0.8 * t.sin() + 0.3 * (3.0 * t).cos(), 0.5 * t.cos() - 0.2 * t.sin());
        }
        std::fs::write(dir.path().join("data.csv"), data).unwrap();
        std::fs::write(
            dir.path().join("graph.json"),
            r#"{"features": [{"name": "a", "kind": "continuous"}, {"name": "b", "kind": "continuous"},
                             {"name": "c", "kind": "continuous"}],
                "components": [{"members": ["a"], "confounded": false},
                               {"members": ["b", "c"], "confounded": true}]}"#,
        )
        .unwrap();
        std::fs::write(dir.path().join("model.json"), r#"{"type": "linear", "intercept": 0.5, "coefficients": [1, 2, -1]}"#)
            .unwrap();
        Fixture { dir }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn run(&self, args: &[&str]) -> Output {
        Command::new(BIN).current_dir(self.dir.path()).args(args).output().unwrap()
    }

    pub fn files(&self) -> Vec<String> {
        let mut names: Vec<String> =
            std::fs::read_dir(self.dir.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
        names.sort();
        names
    }
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

pub const BASE: [&str; 6] = ["--graph", "graph.json", "--data", "data.csv", "--model", "model.json"];

pub fn args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    BASE.iter().copied().chain(extra.iter().copied()).collect()
}

//! Deterministic predictor speaking the line protocol, for tests.
//!
//! Modes: `sum`, `first`, `linear <intercept> <coef>...`, `short` (one value
//! too few), `garbage` (non-numeric token), `exit` (quits on the first
//! request), `slow <millis>` (sums after a delay).

use std::io::{BufRead, Write};

use causal_shap::LinearModel;
use serde::Deserialize;

#[derive(Deserialize)]
struct Request {
    x: Vec<Vec<f64>>,
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode = args.first().map(String::as_str).unwrap_or("sum");
    let numbers: Vec<f64> = args.iter().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout().lock();
    for line in stdin.lock().lines() {
        let line = line.expect("stdin");
        let request: Request = serde_json::from_str(&line).expect("request line");
        let sum = |r: &Vec<f64>| r.iter().sum::<f64>();
        let y: Vec<f64> = match mode {
            "sum" => request.x.iter().map(sum).collect(),
            "first" => request.x.iter().map(|r| r[0]).collect(),
            "linear" => {
                let model = LinearModel::new(numbers[0], numbers[1..].to_vec());
                request.x.iter().map(|r| model.eval(r)).collect()
            }
            "short" => request.x.iter().skip(1).map(sum).collect(),
            "garbage" => {
                writeln!(stdout, "{{\"y\": [1.0, banana]}}").unwrap();
                stdout.flush().unwrap();
                continue;
            }
            "exit" => std::process::exit(4),
            "slow" => {
                std::thread::sleep(std::time::Duration::from_millis(numbers[0] as u64));
                request.x.iter().map(sum).collect()
            }
            other => panic!("unknown mode {other}"),
        };
        writeln!(stdout, "{}", serde_json::json!({ "y": y })).unwrap();
        stdout.flush().unwrap();
    }
}

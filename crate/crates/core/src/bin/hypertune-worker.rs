//! Reference evaluator speaking the line-delimited JSON protocol on stdio.
//!
//! Besides scoring synthetic objectives it can misbehave on demand, which the
//! integration tests use to exercise timeouts, restarts and protocol errors.

use std::io::{self, BufRead, Write};
use std::thread;
use std::time::Duration;

use clap::Parser;
use hypertune::objectives::{synthetic, EvalRequest, EvalResponse, ResponseStatus};

#[derive(Parser, Debug)]
#[command(name = "hypertune-worker", about = "Line-protocol evaluator for hypertune")]
struct Args {
    /// Score requests with this synthetic objective.
    #[arg(long, conflicts_with = "constant")]
    objective: Option<String>,
    /// Reply with this value for every request.
    #[arg(long, default_value_t = 0.5)]
    constant: f64,
    /// Seconds to sleep before each reply.
    #[arg(long, default_value_t = 0.0)]
    sleep: f64,
    /// Only sleep for this trial id.
    #[arg(long)]
    sleep_on: Option<u64>,
    /// Reply `failed` for this trial id.
    #[arg(long)]
    fail_on: Option<u64>,
    /// Reply with a string where the value belongs.
    #[arg(long)]
    non_numeric: bool,
    /// Reply with a line that is not JSON.
    #[arg(long)]
    garbage: bool,
    /// Echo back a different trial id.
    #[arg(long)]
    wrong_id: bool,
    /// Exit without replying once this many requests were answered.
    #[arg(long)]
    exit_after: Option<u64>,
}

fn main() {
    let args = Args::parse();
    let objective = match args.objective.as_deref().map(synthetic).transpose() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("hypertune-worker: {e}");
            std::process::exit(2);
        }
    };
    let stdin = io::stdin();
    let mut stdout = io::stdout().lock();
    let mut answered = 0u64;
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        if args.exit_after == Some(answered) {
            std::process::exit(3);
        }
        let request: EvalRequest = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("hypertune-worker: bad request: {e}");
                continue;
            }
        };
        if args.sleep > 0.0 && args.sleep_on.is_none_or(|id| id == request.trial_id) {
            thread::sleep(Duration::from_secs_f64(args.sleep));
        }
        let trial_id = if args.wrong_id {
            request.trial_id + 1
        } else {
            request.trial_id
        };
        let reply = if args.garbage {
            "this is not json".to_string()
        } else if args.non_numeric {
            format!(r#"{{"trial_id":{trial_id},"status":"ok","value":"high"}}"#)
        } else {
            let response = if args.fail_on == Some(request.trial_id) {
                EvalResponse {
                    trial_id,
                    status: ResponseStatus::Failed,
                    value: None,
                    reason: Some("requested failure".into()),
                }
            } else {
                let value = match &objective {
                    Some(o) => o.value(&request.params),
                    None => Ok(args.constant),
                };
                match value {
                    Ok(v) => EvalResponse {
                        trial_id,
                        status: ResponseStatus::Ok,
                        value: Some(v),
                        reason: None,
                    },
                    Err(e) => EvalResponse {
                        trial_id,
                        status: ResponseStatus::Failed,
                        value: None,
                        reason: Some(e.to_string()),
                    },
                }
            };
            serde_json::to_string(&response).expect("response serializes")
        };
        if writeln!(stdout, "{reply}").and_then(|_| stdout.flush()).is_err() {
            break;
        }
        answered += 1;
    }
}

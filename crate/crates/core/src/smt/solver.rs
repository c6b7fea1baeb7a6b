//! Runs an external SMT solver on an emitted instance.
//!
//! The solver is a command template split on whitespace. `{file}` is replaced
//! by the instance path, or the path is appended when the placeholder is
//! missing. Only the first status line (`sat`, `unsat`, `unknown`) is
//! interpreted; everything after it is returned as the model text.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::SmtInstance;

/// Environment variable holding the default solver command.
pub const SOLVER_ENV: &str = "FFGMC_SOLVER";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverOutcome {
    Sat { model: String },
    Unsat,
    Unknown { reason: String },
    SolverAbsent,
}

impl SolverOutcome {
    pub fn name(&self) -> &'static str {
        match self {
            SolverOutcome::Sat { .. } => "sat",
            SolverOutcome::Unsat => "unsat",
            SolverOutcome::Unknown { .. } => "unknown",
            SolverOutcome::SolverAbsent => "solver-absent",
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("empty solver command")]
    EmptyCommand,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Writes the instance to a temporary file and runs `command` on it.
pub fn solve_instance(
    instance: &SmtInstance,
    command: &str,
    timeout: Option<Duration>,
) -> Result<SolverOutcome, SolverError> {
    let mut file = tempfile::Builder::new().prefix("ffgmc-").suffix(".smt2").tempfile()?;
    file.write_all(instance.text.as_bytes())?;
    file.flush()?;
    run_solver(file.path(), command, timeout)
}

pub fn run_solver(
    path: &std::path::Path,
    command: &str,
    timeout: Option<Duration>,
) -> Result<SolverOutcome, SolverError> {
    let path = path.to_string_lossy();
    let mut words: Vec<String> = command.split_whitespace().map(str::to_owned).collect();
    if words.is_empty() {
        return Err(SolverError::EmptyCommand);
    }
    if words.iter().any(|w| w.contains("{file}")) {
        for w in &mut words {
            *w = w.replace("{file}", &path);
        }
    } else {
        words.push(path.into_owned());
    }
    let spawned = Command::new(&words[0])
        .args(&words[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn();
    let mut child = match spawned {
        Ok(c) => c,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(SolverOutcome::SolverAbsent),
        Err(e) => return Err(e.into()),
    };
    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    let out_reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let err_reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });

    let start = Instant::now();
    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if timeout.is_some_and(|t| start.elapsed() >= t) {
            let _ = child.kill();
            timed_out = true;
            break child.wait()?;
        }
        thread::sleep(Duration::from_millis(20));
    };
    let out = out_reader.join().unwrap_or_default();
    let err = err_reader.join().unwrap_or_default();
    if timed_out {
        return Ok(SolverOutcome::Unknown { reason: format!("timeout after {:?}", timeout.unwrap_or_default()) });
    }
    Ok(parse_output(&out, &err, status.code()))
}

fn parse_output(out: &str, err: &str, code: Option<i32>) -> SolverOutcome {
    let mut lines = out.lines();
    for line in lines.by_ref() {
        match line.trim() {
            "sat" => {
                let model: Vec<&str> = lines.collect();
                return SolverOutcome::Sat { model: model.join("\n") };
            }
            "unsat" => return SolverOutcome::Unsat,
            "unknown" => return SolverOutcome::Unknown { reason: "solver answered unknown".into() },
            "" => continue,
            _ => break,
        }
    }
    let detail = if err.trim().is_empty() { out.trim() } else { err.trim() };
    let first = detail.lines().next().unwrap_or("no output");
    SolverOutcome::Unknown { reason: format!("exit code {code:?}: {first}") }
}

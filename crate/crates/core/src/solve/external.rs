//! Out-of-process solver driven through an LP file and a plain solution file.
//!
//! The solution file has one `<name> <value>` pair per line. Optional
//! `status <word>` and `objective <value>` lines are recognised; variables not
//! listed are taken as zero.

use std::collections::HashMap;
use std::process::Command;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::model::{export_lp, lp_names, MilpModel};

use super::{SolveResult, SolveStatus};

pub const SOLVER_ENV: &str = "VRPSA_SOLVER_CMD";

pub(crate) fn external_solve(model: &MilpModel, template: &str, time_limit: Duration) -> Result<SolveResult> {
    let started = Instant::now();
    let dir = tempfile::tempdir()?;
    let lp_path = dir.path().join("model.lp");
    let sol_path = dir.path().join("model.sol");
    std::fs::write(&lp_path, export_lp(model)?)?;
    let command = template
        .replace("{lp}", &lp_path.display().to_string())
        .replace("{sol}", &sol_path.display().to_string())
        .replace("{time_limit}", &format!("{}", time_limit.as_secs_f64()));
    let out = Command::new("sh")
        .arg("-c")
        .arg(&command)
        .output()
        .map_err(|e| Error::BackendUnavailable(format!("{command}: {e}")))?;
    let transcript = format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    if out.status.code() == Some(127) {
        return Err(Error::BackendUnavailable(transcript));
    }
    if !out.status.success() {
        return Err(Error::SolverCrash {
            message: format!("solver exited with {}", out.status),
            output: transcript,
        });
    }
    let text = std::fs::read_to_string(&sol_path).map_err(|e| Error::SolverCrash {
        message: format!("no solution file: {e}"),
        output: transcript.clone(),
    })?;
    let mut res = parse_solution(model, &text).map_err(|message| Error::SolverCrash {
        message,
        output: transcript,
    })?;
    res.wall_time = started.elapsed();
    Ok(res)
}

fn parse_status(word: &str) -> Option<SolveStatus> {
    Some(match word.to_ascii_lowercase().as_str() {
        "optimal" => SolveStatus::Optimal,
        "feasible" => SolveStatus::Feasible,
        "infeasible" => SolveStatus::Infeasible,
        "time_limit" | "timelimit" => SolveStatus::TimeLimit,
        "unknown" => SolveStatus::Unknown,
        _ => return None,
    })
}

pub(crate) fn parse_solution(model: &MilpModel, text: &str) -> std::result::Result<SolveResult, String> {
    let names = lp_names(model).map_err(|e| e.to_string())?;
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut values = vec![0.0; model.vars.len()];
    let mut status = None;
    let mut objective = None;
    let mut any_value = false;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(key), Some(val), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format!("line {}: expected `<name> <value>`", ln + 1));
        };
        match key {
            "status" => status = Some(parse_status(val).ok_or(format!("unknown status {val}"))?),
            "objective" => objective = Some(val.parse::<f64>().map_err(|e| format!("line {}: {e}", ln + 1))?),
            _ => {
                let &j = index.get(key).ok_or(format!("line {}: unknown variable {key}", ln + 1))?;
                values[j] = val.parse::<f64>().map_err(|e| format!("line {}: {e}", ln + 1))?;
                any_value = true;
            }
        }
    }
    let status = status.unwrap_or(if any_value { SolveStatus::Feasible } else { SolveStatus::Unknown });
    if !status.has_solution() {
        return Ok(SolveResult {
            status,
            objective: None,
            values: Vec::new(),
            wall_time: Duration::ZERO,
            nodes: 0,
        });
    }
    for (v, x) in model.vars.iter().zip(values.iter_mut()) {
        if v.kind == crate::model::VarKind::Binary {
            *x = x.round();
        }
    }
    let viol = model.max_violation(&values);
    if viol > 1e-5 {
        return Err(format!("returned point violates the model by {viol:e}"));
    }
    Ok(SolveResult {
        status,
        objective: Some(objective.unwrap_or_else(|| model.objective_value(&values))),
        values,
        wall_time: Duration::ZERO,
        nodes: 0,
    })
}

//! CSV emission and the summary statistics printed after a run.
//!
//! Traces serialize with a fixed header and `{}` float formatting, so a
//! rerun under the same seed produces a byte-identical body except for the
//! wall_ms column.

use std::path::Path;

use anyhow::{Context, Result};

use dmrl_core::TrainRecord;

use crate::evaluate::EvalReport;

pub const TRACE_HEADER: &str = "iteration,phase,mean_return,model_val_loss,env_batches,sim_batches,wall_ms";
pub const EVAL_HEADER: &str = "trial,rollout_index,return,scenario";

pub fn trace_csv(trace: &[TrainRecord]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        let val = match r.model_val_loss {
            Some(v) => format!("{v}"),
            None => String::new(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.iteration,
            r.phase.label(),
            r.mean_return,
            val,
            r.env_batches,
            r.sim_batches,
            r.wall_ms
        ));
    }
    out
}

/// Drops the wall_ms column; determinism comparisons use this view.
pub fn strip_wall_ms(csv: &str) -> String {
    csv.lines()
        .map(|line| match line.rfind(',') {
            Some(idx) => &line[..idx],
            None => line,
        })
        .map(|line| format!("{line}\n"))
        .collect()
}

pub fn write_trace(path: &Path, trace: &[TrainRecord]) -> Result<()> {
    std::fs::write(path, trace_csv(trace))
        .with_context(|| format!("cannot write trace {}", path.display()))
}

pub fn eval_csv(report: &EvalReport) -> String {
    let mut out = String::from(EVAL_HEADER);
    out.push('\n');
    for (trial, returns) in report.returns.iter().enumerate() {
        for (index, value) in returns.iter().enumerate() {
            out.push_str(&format!("{trial},{index},{value},{}\n", report.scenario.label()));
        }
    }
    out
}

pub fn write_eval(path: &Path, report: &EvalReport) -> Result<()> {
    std::fs::write(path, eval_csv(report))
        .with_context(|| format!("cannot write eval report {}", path.display()))
}

/// Convergence point of a noisy series: the first index from which the
/// trailing `window` mean stays within tolerance of the final trailing mean
/// for the rest of the series. Tolerance is `rel_tol` of the final mean's
/// magnitude with an absolute floor. Returns `None` for empty input; the
/// last index always qualifies.
pub fn converge_index(values: &[f64], window: usize, rel_tol: f64, abs_floor: f64) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    let window = window.clamp(1, values.len());
    let trailing_mean = |end: usize| {
        let start = (end + 1).saturating_sub(window);
        let slice = &values[start..=end];
        slice.iter().sum::<f64>() / slice.len() as f64
    };
    let final_mean = trailing_mean(values.len() - 1);
    let tol = (rel_tol * final_mean.abs()).max(abs_floor);
    let mut first_sustained = values.len() - 1;
    for i in (0..values.len()).rev() {
        if (trailing_mean(i) - final_mean).abs() <= tol {
            first_sustained = i;
        } else {
            break;
        }
    }
    Some(first_sustained)
}

/// The three headline figures reported for every training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub return_mean_after_convergence: f64,
    pub batches_to_converge: u64,
    pub env_batches_to_converge: u64,
}

pub const SUMMARY_REL_TOL: f64 = 0.1;
pub const SUMMARY_ABS_FLOOR: f64 = 1.0;

pub fn summarize_trace(trace: &[TrainRecord], window: usize) -> Option<TraceSummary> {
    let returns: Vec<f64> = trace.iter().map(|r| r.mean_return).collect();
    let idx = converge_index(&returns, window, SUMMARY_REL_TOL, SUMMARY_ABS_FLOOR)?;
    let after = &returns[idx..];
    Some(TraceSummary {
        return_mean_after_convergence: after.iter().sum::<f64>() / after.len() as f64,
        batches_to_converge: (idx + 1) as u64,
        env_batches_to_converge: trace[idx].env_batches,
    })
}

pub fn print_trace_summary(mode: &str, seed: u64, trace: &[TrainRecord], window: usize) {
    println!("mode={mode} seed={seed} iterations={}", trace.len());
    match summarize_trace(trace, window) {
        Some(s) => {
            println!("  return mean after convergence: {:.3}", s.return_mean_after_convergence);
            println!("  batches to converge:           {}", s.batches_to_converge);
            println!("  env batches to converge:       {}", s.env_batches_to_converge);
        }
        None => println!("  empty trace"),
    }
}

pub fn print_eval_summary(report: &EvalReport) {
    println!(
        "scenario={} trials={} adaptation steps={}",
        report.scenario.label(),
        report.returns.len(),
        report.mean_per_index.len().saturating_sub(1)
    );
    if let (Some(first), Some(last)) = (report.mean_per_index.first(), report.mean_per_index.last())
    {
        println!("  zero-shot return mean:  {first:.3}");
        println!("  adapted return mean:    {last:.3}");
    }
    match report.batches_to_converge {
        Some(b) => println!("  batches to converge:    {b}"),
        None => println!("  batches to converge:    -"),
    }
    println!("  env rollouts consumed:  {}", report.env_rollouts);
}

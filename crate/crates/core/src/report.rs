//! Run reports: per-repeat records of convergence, fired signals and
//! out-tagged values, plus the text renderer and the repeats trace table.
//!
//! Report levels: Solved shows only final converged values; All adds
//! iteration traces including non-converged attempts; AllDetails adds
//! Jacobian sparsity stats, active-arm history and limit-group logs.

use std::fmt::Write;

use crate::ast::{Domain, ModelType, ReportLevel};
use crate::newton::SolveResult;
use crate::value::{fmt_g, Value};
use crate::wls::EstimateResult;

#[derive(Debug, Clone)]
pub struct FiredSignal {
    pub name: String,
    pub group: String,
    pub repeat: usize,
    pub outer_pass: usize,
}

#[derive(Debug, Clone)]
pub enum SolveOutcome {
    Nl(SolveResult),
    Wls(EstimateResult),
}

impl SolveOutcome {
    pub fn converged(&self) -> bool {
        match self {
            SolveOutcome::Nl(r) => r.converged,
            SolveOutcome::Wls(r) => r.converged,
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            SolveOutcome::Nl(r) => r.iterations,
            SolveOutcome::Wls(r) => r.iterations,
        }
    }

    /// Final residual inf-norm (NL) or step inf-norm (WLS).
    pub fn norm(&self) -> f64 {
        match self {
            SolveOutcome::Nl(r) => r.residual_norm,
            SolveOutcome::Wls(r) => r.step_norm,
        }
    }

    pub fn as_nl(&self) -> Option<&SolveResult> {
        match self {
            SolveOutcome::Nl(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_wls(&self) -> Option<&EstimateResult> {
        match self {
            SolveOutcome::Wls(r) => Some(r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RepeatRecord {
    pub repeat: usize,
    pub converged: bool,
    /// Numeric failure note (singular Jacobian, unobservable system, ...).
    pub failure: Option<String>,
    pub outcome: Option<SolveOutcome>,
    pub outer_passes: usize,
    pub signals: Vec<FiredSignal>,
    /// Out-tagged values at record time, declaration order.
    pub outputs: Vec<(String, Value)>,
    pub submodel_log: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub model_name: String,
    pub model_type: ModelType,
    pub domain: Domain,
    pub level: ReportLevel,
    pub has_repeats: bool,
    pub out_names: Vec<String>,
    pub records: Vec<RepeatRecord>,
}

impl RunReport {
    /// Overall convergence: the final record solved.
    pub fn converged(&self) -> bool {
        self.records.last().is_some_and(|r| r.converged)
    }

    pub fn last(&self) -> Option<&RepeatRecord> {
        self.records.last()
    }

    /// All signals fired across the run, in firing order.
    pub fn signals(&self) -> impl Iterator<Item = &FiredSignal> {
        self.records.iter().flat_map(|r| r.signals.iter())
    }

    /// Output value of the final record by name.
    pub fn output(&self, name: &str) -> Option<Value> {
        self.records
            .last()?
            .outputs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

/// Render the report at the given level. Numbers carry 12 significant
/// digits; ordering is deterministic (declaration order for outputs).
pub fn emit_report(run: &RunReport, level: ReportLevel) -> String {
    let mut out = String::new();
    let kind = match run.model_type {
        ModelType::Nl => "NL",
        ModelType::Wls => "WLS",
    };
    let domain = match run.domain {
        Domain::Real => "real",
        Domain::Complex => "complex",
    };
    let _ = writeln!(
        out,
        "Model \"{}\" [{kind}, {domain} domain]",
        run.model_name
    );
    for record in &run.records {
        let prefix = if run.has_repeats {
            format!("repeat {}: ", record.repeat)
        } else {
            String::new()
        };
        match (&record.failure, &record.outcome) {
            (Some(note), _) => {
                let _ = writeln!(out, "{prefix}NOT SOLVED: {note}");
            }
            (None, Some(o)) if record.converged => {
                let what = match o {
                    SolveOutcome::Nl(r) => {
                        format!(
                            "solved in {} iteration(s), residual {}",
                            r.iterations,
                            fmt_g(r.residual_norm, 12)
                        )
                    }
                    SolveOutcome::Wls(r) => format!(
                        "estimate converged in {} iteration(s), step {}, J(x) = {}",
                        r.iterations,
                        fmt_g(r.step_norm, 12),
                        fmt_g(r.weighted_sum, 12)
                    ),
                };
                let _ = writeln!(out, "{prefix}{what}");
            }
            (None, Some(o)) => {
                let _ = writeln!(
                    out,
                    "{prefix}NOT CONVERGED after {} iteration(s) (norm {})",
                    o.iterations(),
                    fmt_g(o.norm(), 12)
                );
            }
            (None, None) => {
                let _ = writeln!(out, "{prefix}NOT SOLVED");
            }
        }
        // Final values only for converged records; never print stale values.
        if record.converged {
            for (name, value) in &record.outputs {
                let _ = writeln!(out, "  {name} = {value}");
            }
        }
        if level >= ReportLevel::All {
            if let Some(SolveOutcome::Nl(r)) = &record.outcome {
                for (i, it) in r.trace.iter().enumerate() {
                    let _ = writeln!(out, "  iter {i}: residual {}", fmt_g(it.residual_norm, 12));
                }
            }
            if let Some(SolveOutcome::Wls(r)) = &record.outcome {
                for (i, step) in r.trace.iter().enumerate() {
                    let _ = writeln!(out, "  iter {}: step {}", i + 1, fmt_g(*step, 12));
                }
            }
        }
        if level >= ReportLevel::AllDetails {
            if let Some(SolveOutcome::Nl(r)) = &record.outcome {
                let _ = writeln!(
                    out,
                    "  jacobian: {}x{} with {} nonzero(s)",
                    r.jacobian_dim, r.jacobian_dim, r.jacobian_nnz
                );
                if !r.final_arms.is_empty() {
                    let arms: Vec<String> = r.final_arms.iter().map(|a| a.to_string()).collect();
                    let _ = writeln!(out, "  active arms: [{}]", arms.join(", "));
                }
                if r.arm_oscillation {
                    let _ = writeln!(
                        out,
                        "  warning: conditional arms kept switching (arm oscillation)"
                    );
                }
            }
            for s in &record.signals {
                let _ = writeln!(
                    out,
                    "  signal {} fired (group \"{}\", repeat {}, outer pass {})",
                    s.name, s.group, s.repeat, s.outer_pass
                );
            }
            for line in &record.submodel_log {
                let _ = writeln!(out, "  {line}");
            }
        }
    }
    if !run.converged() {
        let _ = writeln!(out, "RESULT: NOT CONVERGED");
    }
    out
}

/// Comma-delimited repeats trace: header row of column names, one row per
/// converged repeat. Complex outputs split into `_re`/`_im` columns.
pub fn trace_csv(run: &RunReport) -> Option<String> {
    if !run.has_repeats {
        return None;
    }
    let mut header = vec!["repeat".to_string()];
    // Column layout from the first converged record.
    let first = run.records.iter().find(|r| r.converged)?;
    for (name, value) in &first.outputs {
        match value {
            Value::Complex(_) => {
                header.push(format!("{name}_re"));
                header.push(format!("{name}_im"));
            }
            _ => header.push(name.clone()),
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    for record in run.records.iter().filter(|r| r.converged) {
        let mut row = vec![record.repeat.to_string()];
        for (_, value) in &record.outputs {
            match value {
                Value::Complex(z) => {
                    row.push(format!("{}", z.re));
                    row.push(format!("{}", z.im));
                }
                Value::Real(x) => row.push(format!("{x}")),
                Value::Int(n) => row.push(format!("{n}")),
                Value::Bool(b) => row.push(format!("{b}")),
            }
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Some(out)
}

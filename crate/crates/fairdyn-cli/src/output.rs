//! CSV/JSON emission and the gnuplot script templates.

use crate::error::CliError;
use fairdyn::control::ValueFunction;
use fairdyn::dynamics::Trajectory;
use fairdyn::equilibrium::{classify, EquilibriumClass, EquilibriumPoint};
use std::fmt::Write as _;
use std::path::Path;

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, contents)?;
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::validation(e.to_string(), "output"))?;
    text.push('\n');
    write_file(path, &text)
}

/// Columns: t,group,mu,threshold,p_plus,mu_plus,reward. `mu_plus` is empty
/// when nobody was selected.
pub fn trajectory_csv(traj: &Trajectory, group_names: &[String]) -> String {
    let mut out = String::from("t,group,mu,threshold,p_plus,mu_plus,reward\n");
    for step in &traj.steps {
        for (g, gs) in step.groups.iter().enumerate() {
            let mu_plus = gs
                .mu_plus
                .map(|v| v.to_string())
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                step.t, group_names[g], gs.mu, gs.threshold, gs.p_plus, mu_plus, gs.reward
            );
        }
    }
    out
}

fn class_name(class: EquilibriumClass) -> &'static str {
    match class {
        EquilibriumClass::Positive => "positive",
        EquilibriumClass::Negative => "negative",
        EquilibriumClass::Mixed => "mixed",
    }
}

/// Columns: threshold,mu_inf,stable,boundary,classification. The
/// classification band is filled when exactly two initial means are given.
pub fn curve_csv(curve: &[EquilibriumPoint], initial_means: Option<(f64, f64)>) -> String {
    let mut out = String::from("threshold,mu_inf,stable,boundary,classification\n");
    for eq in curve {
        let class = initial_means
            .map(|(a, b)| class_name(classify(eq, a, b)))
            .unwrap_or("");
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            eq.threshold, eq.mu_inf, eq.stable, eq.boundary, class
        );
    }
    out
}

/// Columns: mu,value,threshold (the solved value function and its policy).
pub fn value_function_csv(vf: &ValueFunction) -> String {
    let mut out = String::from("mu,value,threshold\n");
    for ((mu, v), a) in vf.mu_grid().iter().zip(vf.values()).zip(vf.policy()) {
        let _ = writeln!(out, "{},{},{}", mu, v, a);
    }
    out
}

/// A minimal gnuplot script plotting per-group means over time.
pub fn trajectory_gnuplot(csv_name: &str, group_names: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "set datafile separator ','");
    let _ = writeln!(out, "set key autotitle columnhead outside");
    let _ = writeln!(out, "set xlabel 't'");
    let _ = writeln!(out, "set ylabel 'mean repayment probability'");
    let _ = writeln!(out, "set yrange [0:1]");
    let mut parts = Vec::new();
    for name in group_names {
        parts.push(format!(
            "'{csv_name}' using 1:(strcol(2) eq '{name}' ? $3 : 1/0) with lines title '{name}'"
        ));
    }
    let _ = writeln!(out, "plot {}", parts.join(", \\\n     "));
    out
}

pub fn curve_gnuplot(csv_name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "set datafile separator ','");
    let _ = writeln!(out, "set key autotitle columnhead");
    let _ = writeln!(out, "set xlabel 'threshold A'");
    let _ = writeln!(out, "set ylabel 'equilibrium mean'");
    let _ = writeln!(out, "plot '{csv_name}' using 1:2 with lines title 'mu_inf'");
    out
}

pub fn value_function_gnuplot(csv_name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "set datafile separator ','");
    let _ = writeln!(out, "set key autotitle columnhead");
    let _ = writeln!(out, "set xlabel 'mu'");
    let _ = writeln!(
        out,
        "plot '{csv_name}' using 1:2 with lines title 'value', \\\n     '{csv_name}' using 1:3 with lines title 'threshold'"
    );
    out
}

//! The CLI verbs.

use crate::config::{OutputTarget, PolicySpec, ScenarioConfig};
use crate::error::CliError;
use crate::output;
use fairdyn::control::{
    detect_bifurcation, policy_floor_check, solve_bellman, BifurcationOptions, LenderParams,
    ValueFunction,
};
use fairdyn::dynamics::{parity_gap, simulate, DynamicsParams, PerGroup, ThresholdRule, Trajectory};
use fairdyn::equilibrium::{equilibrium_curve, uniqueness_scan, ScanGrid};
use fairdyn::ingest::{pipeline, PipelineOptions, SyntheticGroupSpec};
use fairdyn::policy::{FairPolicy, FixedPolicy};
use fairdyn::population::PopulationState;
use fairdyn::selfcheck::{
    specfun_suite, MISESTIMATION_FD_TOL, MOMENT_IDENTITY_TOL, NORMALIZATION_TOL, ROUND_TRIP_TOL,
};
use std::path::{Path, PathBuf};

/// Built policy ready for simulation. Optimal policies carry one solved
/// value function per group so each group's shape and misestimation level
/// are honored independently.
enum BuiltPolicy {
    Fair(FairPolicy),
    Fixed(FixedPolicy),
    Optimal(Vec<ValueFunction>),
}

impl BuiltPolicy {
    fn rule(&self) -> Result<Box<dyn ThresholdRule + '_>, CliError> {
        Ok(match self {
            BuiltPolicy::Fair(p) => Box::new(*p),
            BuiltPolicy::Fixed(p) => Box::new(*p),
            BuiltPolicy::Optimal(vfs) => Box::new(PerGroup::new(
                vfs.iter().map(|vf| vf as &dyn ThresholdRule).collect(),
            )),
        })
    }
}

fn build_policy(
    spec: &PolicySpec,
    config: &ScenarioConfig,
    lender: &LenderParams,
) -> Result<BuiltPolicy, CliError> {
    Ok(match spec {
        PolicySpec::DemographicParity { s } => {
            BuiltPolicy::Fair(FairPolicy::demographic_parity(*s)?)
        }
        PolicySpec::EqualityOfOpportunity { s } => {
            BuiltPolicy::Fair(FairPolicy::equality_of_opportunity(*s)?)
        }
        PolicySpec::EqualizedOdds => BuiltPolicy::Fair(FairPolicy::equalized_odds()),
        PolicySpec::Blind { threshold } => BuiltPolicy::Fair(FairPolicy::blind(*threshold)?),
        PolicySpec::Custom { s, k1, k2 } => BuiltPolicy::Fair(FairPolicy::custom(*s, *k1, *k2)?),
        PolicySpec::Fixed { threshold } => BuiltPolicy::Fixed(FixedPolicy::new(*threshold)?),
        PolicySpec::Optimal => {
            let options = config.solver_options();
            let params = config.group_params()?;
            let mut vfs: Vec<ValueFunction> = Vec::with_capacity(config.groups.len());
            for (group, group_params) in config.groups.iter().zip(&params) {
                // Identical (shape, params) groups share one solve.
                if let Some(prev) = vfs
                    .iter()
                    .find(|vf| vf.shape() == group.c && vf.params() == group_params)
                {
                    vfs.push(prev.clone());
                    continue;
                }
                vfs.push(solve_bellman(group.c, group_params, lender, &options)?);
            }
            BuiltPolicy::Optimal(vfs)
        }
    })
}

fn group_names(config: &ScenarioConfig) -> Vec<String> {
    config.groups.iter().map(|g| g.name.clone()).collect()
}

fn run_trajectory(
    config: &ScenarioConfig,
    spec: &PolicySpec,
) -> Result<Trajectory, CliError> {
    let lender = config.lender_params()?;
    let states = config.states()?;
    let params = config.group_params()?;
    let groups: Vec<(PopulationState, DynamicsParams)> =
        states.into_iter().zip(params).collect();
    let policy = build_policy(spec, config, &lender)?;
    let rule = policy.rule()?;
    Ok(simulate(&groups, rule.as_ref(), config.horizon, &lender)?)
}

fn summary_value(
    config: &ScenarioConfig,
    spec: &PolicySpec,
    traj: &Trajectory,
) -> Result<serde_json::Value, CliError> {
    let names = group_names(config);
    let finals = traj.final_means();
    let initials: Vec<f64> = config.groups.iter().map(|g| g.mu).collect();
    let mins: Vec<f64> = (0..names.len())
        .map(|g| {
            traj.mean_series(g)
                .into_iter()
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut out = serde_json::json!({
        "policy": spec,
        "horizon": traj.horizon,
        "groups": names,
        "initial_means": initials,
        "final_means": finals,
        "min_means": mins,
    });
    if traj.group_count() == 2 {
        let gap = parity_gap(traj)?;
        out["parity_gap"] = serde_json::json!(gap.final_gap);
        out["verdict"] = serde_json::json!(if gap.final_gap
            < fairdyn::control::PARITY_TOLERANCE
        {
            "converged"
        } else {
            "not_converged"
        });
    }
    Ok(out)
}

pub fn cmd_simulate(
    config: &ScenarioConfig,
    config_path: &Path,
    target: &OutputTarget,
    gnuplot: bool,
) -> Result<String, CliError> {
    let spec = config.policy.as_ref().ok_or_else(|| {
        CliError::validation("simulate requires a `policy`", "policy")
    })?;
    let traj = run_trajectory(config, spec)?;
    let names = group_names(config);

    let csv_path = target.file("trajectory.csv");
    output::write_file(&csv_path, &output::trajectory_csv(&traj, &names))?;
    let mut summary = summary_value(config, spec, &traj)?;
    summary["config"] = serde_json::json!(config_path.display().to_string());
    output::write_json(&target.file("summary.json"), &summary)?;
    if gnuplot {
        let csv_name = csv_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        output::write_file(
            &target.file("trajectory.gp"),
            &output::trajectory_gnuplot(&csv_name, &names),
        )?;
    }

    let finals = traj.final_means();
    Ok(format!(
        "{}: simulated {} steps under `{}`; final means {:?}",
        target.stem,
        traj.horizon,
        spec.slug(),
        finals.iter().map(|m| (m * 1e4).round() / 1e4).collect::<Vec<_>>()
    ))
}

pub fn cmd_equilibrium_curve(
    config: &ScenarioConfig,
    target: &OutputTarget,
    steps: usize,
    gnuplot: bool,
) -> Result<String, CliError> {
    if steps < 2 {
        return Err(CliError::validation("need at least 2 steps", "--steps"));
    }
    let c = config.shared_shape()?;
    let alpha = config.shared_alpha()?;
    let params = DynamicsParams::new(config.dynamics.beta, config.dynamics.nu, alpha)
        .map_err(CliError::from)?;
    let grid: Vec<f64> = (0..steps)
        .map(|i| i as f64 / (steps - 1) as f64)
        .collect();
    let curve = equilibrium_curve(&grid, c, &params)?;
    let bands = if config.groups.len() == 2 {
        Some((config.groups[0].mu, config.groups[1].mu))
    } else {
        None
    };
    let csv_path = target.file("curve.csv");
    output::write_file(&csv_path, &output::curve_csv(&curve, bands))?;
    if gnuplot {
        let csv_name = csv_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        output::write_file(&target.file("curve.gp"), &output::curve_gnuplot(&csv_name))?;
    }
    let peak = curve
        .iter()
        .filter(|e| !e.boundary)
        .max_by(|a, b| a.mu_inf.total_cmp(&b.mu_inf));
    Ok(match peak {
        Some(p) => format!(
            "{}: equilibrium curve over {} thresholds; peak mu_inf {:.6} at A = {:.6}",
            target.stem, steps, p.mu_inf, p.threshold
        ),
        None => format!("{}: equilibrium curve over {steps} thresholds", target.stem),
    })
}

pub fn cmd_optimal_policy(
    config: &ScenarioConfig,
    target: &OutputTarget,
    mu0_steps: usize,
    basin_horizon: usize,
    check_floor: bool,
    gnuplot: bool,
) -> Result<String, CliError> {
    let c = config.shared_shape()?;
    let alpha = config.shared_alpha()?;
    let params = DynamicsParams::new(config.dynamics.beta, config.dynamics.nu, alpha)
        .map_err(CliError::from)?;
    let lender = config.lender_params()?;
    let vf = solve_bellman(c, &params, &lender, &config.solver_options())?;

    let csv_path = target.file("value_function.csv");
    output::write_file(&csv_path, &output::value_function_csv(&vf))?;

    if mu0_steps < 2 {
        return Err(CliError::validation("need at least 2 points", "--mu0-steps"));
    }
    let mu0_grid: Vec<f64> = (1..=mu0_steps)
        .map(|i| i as f64 / (mu0_steps + 1) as f64)
        .collect();
    let report = detect_bifurcation(
        &vf,
        &mu0_grid,
        &BifurcationOptions {
            horizon: basin_horizon,
            ..Default::default()
        },
    )?;

    let mut json = serde_json::json!({
        "shape": c,
        "dynamics": {"beta": params.beta, "nu": params.nu, "alpha": params.alpha},
        "lender": {"interest": lender.interest, "discount": lender.discount},
        "solver": {
            "iterations": vf.iterations,
            "residual": vf.residual,
            "grid_size": vf.mu_grid().len(),
        },
        "bifurcation": report,
    });
    let mut floor_line = String::new();
    if check_floor {
        let check = policy_floor_check(&vf);
        floor_line = if check.skipped {
            format!(
                "; reward bound check skipped (interest {} exceeds bound {:.4})",
                lender.interest, check.interest_bound
            )
        } else if check.passed {
            format!(
                "; policy floor respected (all thresholds >= {:.6})",
                check.threshold_floor
            )
        } else {
            format!("; POLICY FLOOR VIOLATED at {} nodes", check.violations.len())
        };
        json["policy_floor"] = serde_json::to_value(&check)
            .map_err(|e| CliError::validation(e.to_string(), "output"))?;
    }
    output::write_json(&target.file("bifurcation.json"), &json)?;
    if gnuplot {
        let csv_name = csv_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        output::write_file(
            &target.file("value_function.gp"),
            &output::value_function_gnuplot(&csv_name),
        )?;
    }

    let limits: Vec<String> = report
        .basins
        .iter()
        .map(|b| format!("{:.4}", b.limit_mean))
        .collect();
    Ok(format!(
        "{}: solved in {} sweeps (residual {:.2e}); {} basin(s) with limits [{}]{}",
        target.stem,
        vf.iterations,
        vf.residual,
        report.basins.len(),
        limits.join(", "),
        floor_line
    ))
}

pub struct FitArgs {
    pub data: PathBuf,
    pub bins: usize,
    pub cdf_smoothing: usize,
    pub delinquency_smoothing: usize,
    pub equalize_shapes: bool,
}

pub fn cmd_fit(args: &FitArgs, out: &Path) -> Result<String, CliError> {
    let options = PipelineOptions {
        bins: args.bins,
        cdf_smoothing: args.cdf_smoothing,
        delinquency_smoothing: args.delinquency_smoothing,
        equalize_shapes: args.equalize_shapes,
    };
    let outcome = pipeline(&args.data, &options)?;
    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }
    let json = serde_json::json!({
        "groups": outcome.groups.iter().map(|g| serde_json::json!({
            "name": g.label.name,
            "mu": g.mu,
            "c": g.c,
            "histogram": g.histogram,
        })).collect::<Vec<_>>(),
        "equalized_shapes": args.equalize_shapes,
        "warnings": outcome.warnings,
    });
    output::write_json(out, &json)?;
    let summary: Vec<String> = outcome
        .groups
        .iter()
        .map(|g| format!("{}: mu={:.4}, c={:.4}", g.label.name, g.mu, g.c))
        .collect();
    Ok(format!("fitted {} group(s): {}", outcome.groups.len(), summary.join("; ")))
}

pub fn cmd_compare_policies(
    config: &ScenarioConfig,
    target: &OutputTarget,
    gnuplot: bool,
) -> Result<String, CliError> {
    let specs = config.policies.as_ref().ok_or_else(|| {
        CliError::validation("compare-policies requires a `policies` list", "policies")
    })?;
    let names = group_names(config);
    let mut entries = Vec::new();
    for spec in specs {
        let traj = run_trajectory(config, spec)?;
        let csv_path = target.file(&format!("{}_trajectory.csv", spec.slug()));
        output::write_file(&csv_path, &output::trajectory_csv(&traj, &names))?;
        if gnuplot {
            let csv_name = csv_path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            output::write_file(
                &target.file(&format!("{}_trajectory.gp", spec.slug())),
                &output::trajectory_gnuplot(&csv_name, &names),
            )?;
        }
        entries.push(summary_value(config, spec, &traj)?);
    }
    output::write_json(
        &target.file("comparison.json"),
        &serde_json::json!({ "policies": entries }),
    )?;
    Ok(format!(
        "{}: compared {} policies over horizon {}",
        target.stem,
        specs.len(),
        config.horizon
    ))
}

pub fn cmd_selfcheck(mesh: usize) -> Result<String, CliError> {
    let mut lines = Vec::new();
    let report = specfun_suite()?;
    let check = |name: &str, err: f64, tol: f64| {
        format!(
            "{} {name}: max err {err:.3e} (tolerance {tol:.0e})",
            if err <= tol { "PASS" } else { "FAIL" }
        )
    };
    lines.push(check("inverse round trip", report.round_trip_max_err, ROUND_TRIP_TOL));
    lines.push(format!(
        "{} monotonicity of the regularized incomplete beta",
        if report.monotone_ok { "PASS" } else { "FAIL" }
    ));
    lines.push(check(
        "truncated-moment identity",
        report.moment_identity_max_err,
        MOMENT_IDENTITY_TOL,
    ));
    lines.push(check(
        "density normalization",
        report.normalization_max_err,
        NORMALIZATION_TOL,
    ));
    lines.push(check(
        "misestimation derivative vs finite differences",
        report.misestimation_fd_max_err,
        MISESTIMATION_FD_TOL,
    ));

    let grid = ScanGrid {
        mesh,
        ..Default::default()
    };
    let scan = uniqueness_scan(&grid)?;
    lines.push(format!(
        "{} equilibrium uniqueness scan: {} cells, {} unique interior, {} boundary-degenerate, {} anomalies",
        if scan.all_unique() { "PASS" } else { "FAIL" },
        scan.cells,
        scan.unique_interior,
        scan.boundary_cells.len(),
        scan.anomalies.len()
    ));
    for cell in scan.anomalies.iter().take(10) {
        lines.push(format!(
            "  anomaly: A={} c={} beta={} nu={} sign_changes={}",
            cell.threshold, cell.shape, cell.beta, cell.nu, cell.sign_changes
        ));
    }

    let all_pass = report.passed && scan.all_unique();
    let text = lines.join("\n");
    if all_pass {
        Ok(text)
    } else {
        println!("{text}");
        Err(CliError::numerical("selfcheck failed"))
    }
}

pub struct GenDataArgs {
    pub out: PathBuf,
    pub rows: usize,
    pub groups: Vec<String>,
}

pub fn cmd_gen_data(args: &GenDataArgs) -> Result<String, CliError> {
    let specs: Vec<SyntheticGroupSpec> = if args.groups.is_empty() {
        vec![
            SyntheticGroupSpec {
                name: "disadvantaged".to_string(),
                mu: 0.44,
                c: 0.55,
            },
            SyntheticGroupSpec {
                name: "advantaged".to_string(),
                mu: 0.85,
                c: 0.55,
            },
        ]
    } else {
        args.groups
            .iter()
            .map(|raw| {
                let parts: Vec<&str> = raw.split(':').collect();
                if parts.len() != 3 {
                    return Err(CliError::validation(
                        format!("expected name:mu:c, got `{raw}`"),
                        "--group",
                    ));
                }
                let mu: f64 = parts[1].parse().map_err(|_| {
                    CliError::validation(format!("bad mu in `{raw}`"), "--group")
                })?;
                let c: f64 = parts[2].parse().map_err(|_| {
                    CliError::validation(format!("bad c in `{raw}`"), "--group")
                })?;
                Ok(SyntheticGroupSpec {
                    name: parts[0].to_string(),
                    mu,
                    c,
                })
            })
            .collect::<Result<_, CliError>>()?
    };
    let csv = fairdyn::ingest::synthetic_tables_csv(&specs, args.rows)?;
    output::write_file(&args.out, &csv)?;
    Ok(format!(
        "wrote {} synthetic group(s) x {} rows to {}",
        specs.len(),
        args.rows,
        args.out.display()
    ))
}

//! Credit-score data to fitted population states.
//!
//! Input: per-group score tables with a cumulative score distribution and a
//! 90-day delinquency rate per score. The pipeline differentiates a
//! monotone-cubic interpolation of the CDF into a score density, composes
//! it parametrically with the repayment curve `r(s) = 1 - delinquency(s)`
//! into a repayment-probability histogram, and fits a mean-parameterized
//! Beta by the method of moments.
//!
//! CSV schema (UTF-8, one row per group and score):
//!
//! ```text
//! group,score,cdf,delinquency_90d
//! ```
//!
//! Scores must be strictly increasing and the CDF non-decreasing within a
//! group; a CDF that does not span [0, 1] is renormalized with a warning.

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::population::{equalize_shapes, fit_beta_from_histogram, GroupLabel, PopulationState};
use serde::Serialize;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

/// One row of a score table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreRow {
    pub score: f64,
    pub cdf: f64,
    pub delinquency: f64,
}

/// Score distribution and delinquency curve for one group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreTable {
    pub group: GroupLabel,
    pub rows: Vec<ScoreRow>,
}

/// Loaded tables plus any normalization warnings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadOutcome {
    pub tables: Vec<ScoreTable>,
    pub warnings: Vec<String>,
}

const HEADER: &str = "group,score,cdf,delinquency_90d";

/// Parse the score-table CSV from any reader.
pub fn parse_score_tables<R: Read>(reader: R, path: &str) -> Result<LoadOutcome> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Parse {
            path: path.to_string(),
            record: 0,
            detail: "empty file".to_string(),
        })?;
    if header.trim() != HEADER {
        return Err(Error::Parse {
            path: path.to_string(),
            record: 0,
            detail: format!("expected header `{HEADER}`, got `{}`", header.trim()),
        });
    }

    let mut order: Vec<String> = Vec::new();
    let mut rows_by_group: Vec<Vec<ScoreRow>> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let record = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                path: path.to_string(),
                record,
                detail: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let parse_num = |name: &str, raw: &str| -> Result<f64> {
            raw.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_string(),
                record,
                detail: format!("{name} is not a number: `{raw}`"),
            })
        };
        let score = parse_num("score", fields[1])?;
        let cdf = parse_num("cdf", fields[2])?;
        let delinquency = parse_num("delinquency_90d", fields[3])?;
        if !(0.0..=1.0).contains(&cdf) {
            return Err(Error::Parse {
                path: path.to_string(),
                record,
                detail: format!("cdf {cdf} outside [0,1]"),
            });
        }
        if !(0.0..=1.0).contains(&delinquency) {
            return Err(Error::Parse {
                path: path.to_string(),
                record,
                detail: format!("delinquency {delinquency} outside [0,1]"),
            });
        }
        let group = fields[0].to_string();
        let slot = match order.iter().position(|g| *g == group) {
            Some(i) => i,
            None => {
                order.push(group);
                rows_by_group.push(Vec::new());
                order.len() - 1
            }
        };
        rows_by_group[slot].push(ScoreRow {
            score,
            cdf,
            delinquency,
        });
    }

    let mut warnings = Vec::new();
    let mut tables = Vec::new();
    for (id, (name, mut rows)) in order.into_iter().zip(rows_by_group).enumerate() {
        if rows.len() < 2 {
            return Err(Error::Parse {
                path: path.to_string(),
                record: 0,
                detail: format!("group `{name}` has fewer than 2 rows"),
            });
        }
        for w in rows.windows(2) {
            if w[1].score <= w[0].score {
                return Err(Error::Parse {
                    path: path.to_string(),
                    record: 0,
                    detail: format!(
                        "group `{name}`: scores must be strictly increasing ({} then {})",
                        w[0].score, w[1].score
                    ),
                });
            }
            if w[1].cdf < w[0].cdf {
                return Err(Error::Parse {
                    path: path.to_string(),
                    record: 0,
                    detail: format!(
                        "group `{name}`: cdf decreases at score {} ({} then {})",
                        w[1].score, w[0].cdf, w[1].cdf
                    ),
                });
            }
        }
        let first = rows.first().unwrap().cdf;
        let last = rows.last().unwrap().cdf;
        if last - first <= 0.0 {
            return Err(Error::DegenerateHistogram(format!(
                "group `{name}`: cdf carries no mass over the table"
            )));
        }
        if first > 1e-9 || last < 1.0 - 1e-9 {
            warnings.push(format!(
                "group `{name}`: cdf spans [{first}, {last}]; renormalized to [0, 1]"
            ));
            for row in &mut rows {
                row.cdf = (row.cdf - first) / (last - first);
            }
        }
        tables.push(ScoreTable {
            group: GroupLabel::new(id, name),
            rows,
        });
    }
    Ok(LoadOutcome { tables, warnings })
}

/// Load score tables from a CSV file.
pub fn load_score_tables(path: &Path) -> Result<LoadOutcome> {
    let file = std::fs::File::open(path)?;
    parse_score_tables(file, &path.display().to_string())
}

/// A sampled score density point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityPoint {
    pub score: f64,
    pub density: f64,
}

/// Centered moving average with the window shrinking at the edges.
/// A window of 1 is the identity. Preserves monotonicity.
fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return values.to_vec();
    }
    let half = window / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let reach = half.min(i).min(n - 1 - i);
            let span = &values[i - reach..=i + reach];
            span.iter().sum::<f64>() / span.len() as f64
        })
        .collect()
}

/// Clamp any negative density samples to zero and rescale so the trapezoid
/// integral is exactly 1. Returns whether clamping fired.
fn normalize_density(points: &mut [DensityPoint]) -> Result<bool> {
    let mut clamped = false;
    for p in points.iter_mut() {
        if p.density < 0.0 {
            p.density = 0.0;
            clamped = true;
        }
    }
    let total: f64 = points
        .windows(2)
        .map(|w| 0.5 * (w[0].density + w[1].density) * (w[1].score - w[0].score))
        .sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::DegenerateHistogram(
            "score density integrates to zero".to_string(),
        ));
    }
    for p in points.iter_mut() {
        p.density /= total;
    }
    Ok(clamped)
}

/// Sub-samples per table interval when differentiating the CDF.
const DENSITY_REFINE: usize = 8;

/// Differentiate a monotone-cubic interpolation of the CDF into a score
/// density, sampled on a refined mesh and normalized to unit mass.
///
/// `smoothing_window` (odd, 1 = off) applies a centered moving average to
/// the CDF values before interpolation. Monotone interpolation keeps the
/// density non-negative.
pub fn score_density(table: &ScoreTable, smoothing_window: usize) -> Result<Vec<DensityPoint>> {
    if table.rows.len() < 5 {
        return Err(Error::DegenerateHistogram(format!(
            "group `{}`: need at least 5 rows to differentiate, got {}",
            table.group.name,
            table.rows.len()
        )));
    }
    if smoothing_window.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "smoothing window must be odd, got {smoothing_window}"
        )));
    }
    let scores: Vec<f64> = table.rows.iter().map(|r| r.score).collect();
    let cdf = moving_average(
        &table.rows.iter().map(|r| r.cdf).collect::<Vec<f64>>(),
        smoothing_window,
    );
    let interp = MonotoneCubic::new(scores.clone(), cdf);

    let mut points = Vec::with_capacity((scores.len() - 1) * DENSITY_REFINE + 1);
    for w in scores.windows(2) {
        for k in 0..DENSITY_REFINE {
            let s = w[0] + (w[1] - w[0]) * k as f64 / DENSITY_REFINE as f64;
            points.push(DensityPoint {
                score: s,
                density: interp.derivative(s),
            });
        }
    }
    let last = *scores.last().unwrap();
    points.push(DensityPoint {
        score: last,
        density: interp.derivative(last),
    });
    normalize_density(&mut points)?;
    Ok(points)
}

/// One bin of a repayment-probability histogram. The center is the
/// mass-weighted mean of the repayment probabilities mapped into the bin,
/// which keeps the histogram mean exactly equal to the integral it
/// discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub center: f64,
    pub weight: f64,
}

/// Compose the score density with the repayment curve `1 - delinquency`
/// into a repayment-probability histogram with `bins` equal-width cells.
/// Weights sum to 1 (the density is normalized).
pub fn repayment_histogram(
    table: &ScoreTable,
    density: &[DensityPoint],
    bins: usize,
) -> Result<Vec<HistogramBin>> {
    if bins < 1 {
        return Err(Error::Domain("need at least one bin".to_string()));
    }
    if density.len() < 2 {
        return Err(Error::DegenerateHistogram(
            "density mesh has fewer than 2 points".to_string(),
        ));
    }
    let scores: Vec<f64> = table.rows.iter().map(|r| r.score).collect();
    let repayment: Vec<f64> = table.rows.iter().map(|r| 1.0 - r.delinquency).collect();
    let repay_at = |s: f64| -> f64 {
        // Linear interpolation of the repayment curve, clamped at the ends.
        if s <= scores[0] {
            return repayment[0];
        }
        if s >= *scores.last().unwrap() {
            return *repayment.last().unwrap();
        }
        let i = scores.partition_point(|&t| t <= s) - 1;
        let t = (s - scores[i]) / (scores[i + 1] - scores[i]);
        (repayment[i] * (1.0 - t) + repayment[i + 1] * t).clamp(0.0, 1.0)
    };

    let mut weight = vec![0.0_f64; bins];
    let mut first_moment = vec![0.0_f64; bins];
    for w in density.windows(2) {
        let mass = 0.5 * (w[0].density + w[1].density) * (w[1].score - w[0].score);
        if mass <= 0.0 {
            continue;
        }
        let r = repay_at(0.5 * (w[0].score + w[1].score));
        let bin = ((r * bins as f64) as usize).min(bins - 1);
        weight[bin] += mass;
        first_moment[bin] += mass * r;
    }

    Ok((0..bins)
        .filter(|&k| weight[k] > 0.0)
        .map(|k| HistogramBin {
            center: first_moment[k] / weight[k],
            weight: weight[k],
        })
        .collect())
}

/// A fitted group: label, Beta state, and the histogram it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedGroup {
    pub label: GroupLabel,
    pub mu: f64,
    pub c: f64,
    pub histogram: Vec<HistogramBin>,
}

/// Options for [`pipeline`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineOptions {
    /// Repayment-histogram resolution.
    pub bins: usize,
    /// Moving-average window over the CDF before interpolation (odd, 1 = off).
    pub cdf_smoothing: usize,
    /// Moving-average window over the delinquency curve (odd, 1 = off).
    pub delinquency_smoothing: usize,
    /// Average the fitted shapes across groups afterwards.
    pub equalize_shapes: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            bins: 100,
            cdf_smoothing: 1,
            delinquency_smoothing: 1,
            equalize_shapes: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineOutcome {
    pub groups: Vec<FittedGroup>,
    pub warnings: Vec<String>,
}

/// Full pipeline: load -> density -> histogram -> moment fit
/// (-> shape equalization).
pub fn pipeline(path: &Path, options: &PipelineOptions) -> Result<PipelineOutcome> {
    let LoadOutcome { tables, warnings } = load_score_tables(path)?;
    fit_tables(&tables, options).map(|mut outcome| {
        let mut all = warnings;
        all.append(&mut outcome.warnings);
        PipelineOutcome {
            groups: outcome.groups,
            warnings: all,
        }
    })
}

/// The fitting stage of [`pipeline`], reusable on already-loaded tables.
pub fn fit_tables(tables: &[ScoreTable], options: &PipelineOptions) -> Result<PipelineOutcome> {
    if options.delinquency_smoothing.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "smoothing window must be odd, got {}",
            options.delinquency_smoothing
        )));
    }
    let mut states = Vec::with_capacity(tables.len());
    let mut histograms = Vec::with_capacity(tables.len());
    for table in tables {
        let density = score_density(table, options.cdf_smoothing)?;
        let smoothed = if options.delinquency_smoothing > 1 {
            let values: Vec<f64> = table.rows.iter().map(|r| r.delinquency).collect();
            let smooth = moving_average(&values, options.delinquency_smoothing);
            let rows = table
                .rows
                .iter()
                .zip(smooth)
                .map(|(r, d)| ScoreRow {
                    delinquency: d,
                    ..*r
                })
                .collect();
            ScoreTable {
                group: table.group.clone(),
                rows,
            }
        } else {
            table.clone()
        };
        let histogram = repayment_histogram(&smoothed, &density, options.bins)?;
        let pairs: Vec<(f64, f64)> = histogram.iter().map(|b| (b.center, b.weight)).collect();
        states.push(fit_beta_from_histogram(&pairs)?);
        histograms.push(histogram);
    }
    if options.equalize_shapes {
        states = equalize_shapes(&states)?;
    }
    let groups = tables
        .iter()
        .zip(states)
        .zip(histograms)
        .map(|((table, state), histogram)| FittedGroup {
            label: table.group.clone(),
            mu: state.mean(),
            c: state.shape(),
            histogram,
        })
        .collect();
    Ok(PipelineOutcome {
        groups,
        warnings: Vec::new(),
    })
}

/// Fitted groups as population states.
pub fn fitted_states(outcome: &PipelineOutcome) -> Result<Vec<PopulationState>> {
    outcome
        .groups
        .iter()
        .map(|g| PopulationState::new(g.mu, g.c))
        .collect()
}

// ---------------------------------------------------------------------------
// synthetic data
// ---------------------------------------------------------------------------

/// Specification of one synthetic group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticGroupSpec {
    pub name: String,
    pub mu: f64,
    pub c: f64,
}

/// Generate a synthetic score-table CSV whose repayment-probability
/// distribution is exactly `Beta(c*mu, c*(1-mu))` per group.
///
/// Scores run linearly over [300, 850] and map linearly onto repayment
/// probabilities in [0.001, 0.999]; the CDF column is the Beta CDF at the
/// mapped repayment probability and the delinquency column is its
/// complement. Deterministic: the same specs produce byte-identical output.
pub fn synthetic_tables_csv(specs: &[SyntheticGroupSpec], rows: usize) -> Result<String> {
    use crate::specfun::{reg_inc_beta, BetaParams};
    if rows < 5 {
        return Err(Error::Domain("need at least 5 rows per group".to_string()));
    }
    let (score_lo, score_hi) = (300.0, 850.0);
    let (r_lo, r_hi) = (1e-3, 1.0 - 1e-3);
    let mut out = String::from(HEADER);
    out.push('\n');
    for spec in specs {
        let params = BetaParams::from_mean(spec.mu, spec.c)?;
        for k in 0..rows {
            let t = k as f64 / (rows - 1) as f64;
            let score = score_lo + (score_hi - score_lo) * t;
            let r = r_lo + (r_hi - r_lo) * t;
            let cdf = reg_inc_beta(r, &params)?;
            out.push_str(&format!(
                "{},{:.2},{:.12e},{:.12e}\n",
                spec.name,
                score,
                cdf,
                1.0 - r
            ));
        }
    }
    Ok(out)
}

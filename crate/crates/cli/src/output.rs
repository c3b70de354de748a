//! Text output: trajectory and convergence CSVs, the reference dump, a
//! gnuplot script, and the human-readable study report.
//!
//! All floats are printed with 17 significant digits, so parsing a CSV back
//! recovers bit-identical values, and identical runs produce byte-identical
//! files.

use std::fmt::Write as _;
use std::path::Path;

use carfollow::{gaps_and_accels, ReferenceSolution, ScenarioSpec, StudyOutput, TrajectoryRecord};

use crate::config::ConfigError;

/// 17 significant digits: enough to make text -> f64 exact for every value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One `t,vehicle_id,x,v,gap,acc` row per vehicle per sample.
pub fn trajectory_csv(spec: &ScenarioSpec, record: &TrajectoryRecord) -> String {
    let (gaps, accs) = gaps_and_accels(spec, record);
    let mut out = String::from("t,vehicle_id,x,v,gap,acc\n");
    for (k, t) in record.sample_times.iter().enumerate() {
        for i in 0..record.n_vehicles() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_f64(*t),
                i,
                fmt_f64(record.x[k][i]),
                fmt_f64(record.v[k][i]),
                fmt_f64(gaps[k][i]),
                fmt_f64(accs[k][i]),
            )
            .expect("writing to String cannot fail");
        }
    }
    out
}

/// Reference trajectory preceded by its accuracy estimate, so downstream
/// consumers can judge how far the reference itself may be off.
pub fn reference_csv(spec: &ScenarioSpec, reference: &ReferenceSolution) -> String {
    format!(
        "# comparator_error = {}\n{}",
        fmt_f64(reference.comparator_error),
        trajectory_csv(spec, &reference.record)
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub vehicle_id: usize,
    pub x: f64,
    pub v: f64,
    pub gap: f64,
    pub acc: f64,
}

fn parse_field<T: std::str::FromStr>(
    raw: &str,
    line: usize,
    field: &str,
) -> Result<T, ConfigError> {
    raw.parse().map_err(|_| {
        ConfigError(format!("line {line}: field `{field}`: cannot parse `{raw}`"))
    })
}

/// Parses a trajectory CSV (comment lines allowed) back into rows.
pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TrajectoryRow>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if !saw_header {
            if line != "t,vehicle_id,x,v,gap,acc" {
                return Err(ConfigError(format!(
                    "line {lineno}: expected header `t,vehicle_id,x,v,gap,acc`, got `{line}`"
                )));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(ConfigError(format!(
                "line {lineno}: expected 6 comma-separated fields, got {}",
                fields.len()
            )));
        }
        rows.push(TrajectoryRow {
            t: parse_field(fields[0], lineno, "t")?,
            vehicle_id: parse_field(fields[1], lineno, "vehicle_id")?,
            x: parse_field(fields[2], lineno, "x")?,
            v: parse_field(fields[3], lineno, "v")?,
            gap: parse_field(fields[4], lineno, "gap")?,
            acc: parse_field(fields[5], lineno, "acc")?,
        });
    }
    if !saw_header {
        return Err(ConfigError("trajectory CSV has no header line".into()));
    }
    Ok(rows)
}

/// Long-format study table: one `scenario,scheme,h,C,epsilon,crashed` row
/// per (scheme, step) cell. Crashed cells keep their row with an empty
/// epsilon so the table shape is predictable.
pub fn convergence_csv(label: &str, study: &StudyOutput) -> String {
    let mut out = String::from("scenario,scheme,h,C,epsilon,crashed\n");
    for result in &study.results {
        for point in &result.points {
            let epsilon = point.error.map(fmt_f64).unwrap_or_default();
            writeln!(
                out,
                "{label},{},{},{},{epsilon},{}",
                result.scheme,
                fmt_f64(point.h),
                fmt_f64(point.complexity),
                point.crashed,
            )
            .expect("writing to String cannot fail");
        }
    }
    out
}

/// Gnuplot script drawing one work-precision curve per scheme from the
/// long-format CSV.
pub fn plot_script(label: &str, csv_name: &str) -> String {
    format!(
        "\
# Work-precision curves for the `{label}` study, one per scheme.
# Usage: gnuplot {label}_plot.gp
set terminal pngcairo size 900,600
set output \"{label}_convergence.png\"
set datafile separator comma
set logscale xy
set xlabel \"acceleration evaluations per vehicle-second\"
set ylabel \"mean speed error vs reference (m/s)\"
set key bottom left
plot for [s in \"euler ballistic trapezoidal rk4\"] \\
    \"{csv_name}\" every ::1 using 4:(strcol(2) eq s ? column(5) : NaN) \\
    with linespoints title s
"
    )
}

/// Human-readable study summary: reference quality, the validation verdict,
/// and the fitted power law per scheme.
pub fn converge_report(study: &StudyOutput, h_ref: f64) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "reference: rk4 at h = {h_ref} s, comparator error = {:.3e} m/s",
        study.reference.comparator_error
    )
    .unwrap();
    match study.smallest_analyzed_error() {
        Some(smallest) if study.reference_validated() => {
            writeln!(
                out,
                "reference validated: comparator error is below 1% of the smallest \
                 fitted error ({:.3e} m/s)",
                smallest
            )
            .unwrap();
        }
        Some(smallest) => {
            writeln!(
                out,
                "reference NOT validated: comparator error exceeds 1% of the smallest \
                 fitted error ({:.3e} m/s); refine h_ref before trusting the fits",
                smallest
            )
            .unwrap();
        }
        None => {
            writeln!(out, "reference NOT validated: no point cleared the fit filters").unwrap();
        }
    }
    for result in &study.results {
        match &result.fit {
            Some(fit) => writeln!(
                out,
                "{:>11}: p_sim = {:.3}, A = {:.3e} (fit over {} step sizes)",
                result.scheme.name(),
                fit.p_sim,
                fit.prefactor,
                fit.fit_h.len()
            )
            .unwrap(),
            None => writeln!(
                out,
                "{:>11}: no order fit (fewer than 3 points clear of the accuracy floor)",
                result.scheme.name()
            )
            .unwrap(),
        }
    }
    out
}

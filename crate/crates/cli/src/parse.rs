//! Flag value syntax: number lists with inclusive integer ranges.

use gittins_core::StepKind;

use crate::CliError;

/// Parses `1..3,5,7.5` into `[1, 2, 3, 5, 7.5]`.
pub fn number_list(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("cannot parse number list {s:?}"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let (a, b): (i64, i64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if a > b {
                return Err(bad());
            }
            out.extend((a..=b).map(|x| x as f64));
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

pub fn count_list(s: &str) -> Result<Vec<usize>, CliError> {
    number_list(s)?
        .into_iter()
        .map(|x| {
            if x >= 1.0 && x.fract() == 0.0 {
                Ok(x as usize)
            } else {
                Err(CliError::Usage(format!("expected positive integers in {s:?}")))
            }
        })
        .collect()
}

/// Parses `a,b`.
pub fn pair(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Usage(format!("expected two comma-separated numbers, got {s:?}"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

pub fn step(s: &str) -> Result<StepKind, CliError> {
    let bad = || CliError::Usage(format!("step must be adaptive, constant:<a> or linear:<A>, got {s:?}"));
    match s.split_once(':') {
        None if s == "adaptive" => Ok(StepKind::Adaptive),
        Some(("constant", a)) => Ok(StepKind::Constant(a.parse().map_err(|_| bad())?)),
        Some(("linear", a)) => Ok(StepKind::Linear(a.parse().map_err(|_| bad())?)),
        _ => Err(bad()),
    }
}

/// `GITTINS_SEED` takes precedence over the flag.
pub fn seed(flag: Option<u64>) -> Result<Option<u64>, CliError> {
    match std::env::var("GITTINS_SEED") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| CliError::Usage(format!("GITTINS_SEED={v:?} is not a u64"))),
        Err(_) => Ok(flag),
    }
}

/// Lossless decimal form of a float; NaN marks a missing value.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.16e}")
    }
}

//! Per-(scheme, round) aggregation with percentile-bootstrap intervals.

use std::collections::BTreeMap;
use std::path::Path;

use crate::baselines::SchemeId;
use crate::error::{Error, Result};
use crate::rng::{mix64, SeededRng};

use super::output::RunRow;

pub const BOOTSTRAP_RESAMPLES: usize = 1000;
pub const CONFIDENCE: f64 = 0.90;
const TAG_BOOTSTRAP: u64 = 0xB0075;

/// Mean and two-sided interval of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Percentile bootstrap of the mean. Values containing NaN give NaN bounds.
pub fn bootstrap_mean(values: &[f64], resamples: usize, confidence: f64, rng: &mut SeededRng) -> Result<Interval> {
    if values.is_empty() {
        return Err(Error::invalid("cannot aggregate zero runs"));
    }
    if resamples == 0 || !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid("bootstrap needs resamples > 0 and confidence in (0, 1)"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if values.iter().any(|v| v.is_nan()) {
        return Ok(Interval {
            mean: f64::NAN,
            lo: f64::NAN,
            hi: f64::NAN,
        });
    }
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.index(n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence) / 2.0;
    Ok(Interval {
        mean,
        lo: quantile(&means, tail),
        hi: quantile(&means, 1.0 - tail),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub scheme: SchemeId,
    pub round: usize,
    pub channel_uses: usize,
    pub n_runs: usize,
    pub gap: Interval,
    pub accuracy: Interval,
    pub worst_h: Interval,
}

/// Groups rows by `(scheme, round)`. Each group gets its own bootstrap stream,
/// so the result does not depend on row order or on which schemes are present.
pub fn aggregate(rows: &[RunRow]) -> Result<Vec<AggregateRow>> {
    let mut groups: BTreeMap<(SchemeId, usize), Vec<&RunRow>> = BTreeMap::new();
    for row in rows {
        groups.entry((row.scheme, row.round)).or_default().push(row);
    }
    groups
        .into_iter()
        .map(|((scheme, round), mut members)| {
            members.sort_by_key(|r| (r.drop, r.realization));
            let channel_uses = members[0].channel_uses;
            if members.iter().any(|r| r.channel_uses != channel_uses) {
                return Err(Error::invalid(format!(
                    "{scheme} round {round}: runs disagree on channel uses"
                )));
            }
            let mut rng = SeededRng::new(mix64(&[TAG_BOOTSTRAP, scheme.index(), round as u64]), 0);
            let mut stat = |f: fn(&RunRow) -> f64| {
                let v: Vec<f64> = members.iter().map(|r| f(r)).collect();
                bootstrap_mean(&v, BOOTSTRAP_RESAMPLES, CONFIDENCE, &mut rng)
            };
            Ok(AggregateRow {
                scheme,
                round,
                channel_uses,
                n_runs: members.len(),
                gap: stat(|r| r.gap)?,
                accuracy: stat(|r| r.accuracy)?,
                worst_h: stat(|r| r.worst_h)?,
            })
        })
        .collect()
}

/// Recomputes the aggregate from the per-run files of a `runs/` directory.
pub fn aggregate_dir(runs_dir: &Path) -> Result<Vec<AggregateRow>> {
    let rows = super::output::read_run_dir(runs_dir)?;
    aggregate(&rows)
}

/// First round at which the mean accuracy reaches `threshold`, as cumulative channel uses.
pub fn channel_uses_to_reach(rows: &[AggregateRow], scheme: SchemeId, threshold: f64) -> Option<usize> {
    rows.iter()
        .filter(|r| r.scheme == scheme)
        .find(|r| r.accuracy.mean >= threshold)
        .map(|r| r.channel_uses)
}

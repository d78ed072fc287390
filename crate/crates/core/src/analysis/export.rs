//! CSV and JSON writers for traces and cohort statistics. Floats are written
//! with 6 significant digits.

use std::path::Path;

use crate::attribution::AttributionTrace;
use crate::error::{Error, Result};

use super::stats::{CohortStats, Summary};

/// Formats like C's `%g` with precision 6.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_owned()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().flexible(true).from_writer(file))
}

fn flush(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per removal step: `image_id,iteration,token,confidence,drop`.
pub fn export_traces_csv<'a, I>(traces: I, path: impl AsRef<Path>) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a AttributionTrace)>,
{
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(["image_id", "iteration", "token", "confidence", "drop"])?;
    for (id, trace) in traces {
        for s in &trace.steps {
            w.write_record([
                id.to_owned(),
                s.iteration.to_string(),
                s.token.to_string(),
                format_sig6(f64::from(s.confidence)),
                format_sig6(f64::from(s.drop)),
            ])?;
        }
    }
    flush(w, path)
}

fn summary_row(metric: &str, s: &Summary) -> Vec<String> {
    let mut row = vec![metric.to_owned(), s.count.to_string()];
    row.extend([s.mean, s.median, s.q1, s.q3, s.min, s.max].map(format_sig6));
    row
}

/// Per-trace rows, a blank separator line, then one summary row per metric.
pub fn export_stats_csv(stats: &CohortStats, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["image_id", "tokens_discarded", "max_single_drop", "flipped"])?;
    for r in &stats.records {
        w.write_record([
            r.image_id.clone(),
            r.tokens_discarded.to_string(),
            format_sig6(r.max_single_drop),
            r.flipped.to_string(),
        ])?;
    }
    let mut out = into_bytes(w)?;
    out.push(b'\n');

    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "metric", "count", "mean", "median", "q1", "q3", "min", "max",
    ])?;
    w.write_record(summary_row("tokens_discarded", &stats.tokens_discarded))?;
    w.write_record(summary_row("max_single_drop", &stats.max_single_drop))?;
    let out = into_bytes(w)?;
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn into_bytes(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| Error::Csv(csv::Error::from(e.into_error())))
}

/// `iteration,active,mean_confidence` for the confidence curve.
pub fn export_curve_csv(stats: &CohortStats, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(["iteration", "active", "mean_confidence"])?;
    for p in &stats.curve {
        w.write_record([
            p.iteration.to_string(),
            p.active.to_string(),
            format_sig6(p.mean_confidence),
        ])?;
    }
    flush(w, path)
}

pub fn export_stats_json(stats: &CohortStats, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(stats)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_formatting() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (0.123456789, "0.123457"),
            (123456.0, "123456"),
            (1234567.0, "1.23457e6"),
            (0.0000123456, "1.23456e-5"),
            (0.0001, "0.0001"),
            (9.9999996, "10"),
            (-0.3, "-0.3"),
            (2.0, "2"),
        ];
        for (v, want) in cases {
            assert_eq!(format_sig6(v), want, "{v}");
        }
    }
}

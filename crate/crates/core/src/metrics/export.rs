//! Curve export and the per-cell metric report.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::metrics::{MetricError, UpliftCurve};

/// One evaluation cell: a treatment ranked against the shared control group
/// on one response.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub treatment: usize,
    pub response: String,
    pub qini: f64,
    pub auuc: f64,
    pub n_treated: usize,
    pub n_control: usize,
}

/// Writes a curve as CSV: three `# area_...` header rows, a column header,
/// then one `population_fraction,cumulative_uplift` row per point. Floats use
/// the shortest round-trip representation.
pub fn export_curve(curve: &UpliftCurve, path: &Path) -> Result<(), MetricError> {
    let file = File::create(path).map_err(|e| MetricError::Io(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let io = |e: std::io::Error| MetricError::Io(format!("{}: {e}", path.display()));
    writeln!(w, "# area_model,{}", curve.area_model).map_err(io)?;
    writeln!(w, "# area_random,{}", curve.area_random).map_err(io)?;
    writeln!(w, "# area_perfect,{}", curve.area_perfect).map_err(io)?;
    writeln!(w, "population_fraction,cumulative_uplift").map_err(io)?;
    for (frac, value) in &curve.points {
        writeln!(w, "{frac},{value}").map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

/// Parses a file written by [`export_curve`] back into a curve.
pub fn parse_curve(text: &str) -> Result<UpliftCurve, MetricError> {
    let mut lines = text.lines();
    let mut areas = [0.0f64; 3];
    for (i, key) in ["area_model", "area_random", "area_perfect"].iter().enumerate() {
        let line = lines
            .next()
            .ok_or_else(|| MetricError::Invalid("truncated curve file".into()))?;
        let rest = line
            .strip_prefix(&format!("# {key},"))
            .ok_or_else(|| MetricError::Invalid(format!("expected `# {key},` header")))?;
        areas[i] = rest
            .parse()
            .map_err(|_| MetricError::Invalid(format!("bad {key} value `{rest}`")))?;
    }
    match lines.next() {
        Some("population_fraction,cumulative_uplift") => {}
        _ => return Err(MetricError::Invalid("missing column header".into())),
    }
    let mut points = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| MetricError::Invalid(format!("bad point row `{line}`")))?;
        points.push((
            a.parse().map_err(|_| MetricError::Invalid(format!("bad fraction `{a}`")))?,
            b.parse().map_err(|_| MetricError::Invalid(format!("bad value `{b}`")))?,
        ));
    }
    Ok(UpliftCurve {
        points,
        area_model: areas[0],
        area_random: areas[1],
        area_perfect: areas[2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::qini;

    fn sample_curve() -> UpliftCurve {
        let scores = vec![0.9, 0.8, 0.7, 0.4, 0.3, 0.1];
        let treated = vec![true, false, true, true, false, false];
        let y = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        qini(&scores, &treated, &y).unwrap().0
    }

    #[test]
    fn round_trip_is_exact() {
        let curve = sample_curve();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        export_curve(&curve, &path).unwrap();
        let parsed = parse_curve(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(curve.points, parsed.points);
        assert_eq!(curve.area_model, parsed.area_model);
        assert_eq!(curve.area_random, parsed.area_random);
        assert_eq!(curve.area_perfect, parsed.area_perfect);
    }

    #[test]
    fn file_shape() {
        let curve = sample_curve();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        export_curve(&curve, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        // 4 header lines plus one line per point
        assert_eq!(lines.len(), 4 + curve.points.len());
        assert!(lines[0].starts_with("# area_model,"));
        let first_point = lines[4].split(',').next().unwrap();
        let last_point = lines.last().unwrap().split(',').next().unwrap();
        assert_eq!(first_point.parse::<f64>().unwrap(), 0.0);
        assert_eq!(last_point.parse::<f64>().unwrap(), 1.0);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let curve = sample_curve();
        let err = export_curve(&curve, Path::new("/nonexistent-dir/curve.csv")).unwrap_err();
        assert!(matches!(err, MetricError::Io(_)));
    }
}

//! Per-user score store: the daily-level batch artifact the decision stage
//! reads at request time.
//!
//! One CSV record per (user, response, treatment) with the treated estimate,
//! the aggregated control estimate, and the relative uplift. Refresh writes
//! a sibling temp file and renames it over the target, so readers observe
//! either the old or the new file, never a partial one.

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::ddm::DdmError;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub user_id: String,
    /// Response index, 1-based in the file format.
    pub response: usize,
    /// Treatment index, 1-based.
    pub treatment: usize,
    pub y_treated: f64,
    pub y_control_star: f64,
    pub delta: f64,
}

const HEADER: &str = "user_id,r,k,y_hat_treated,y_hat_control_star,delta";

/// Atomic write: temp file in the same directory, then rename.
pub fn write_score_store(path: &Path, records: &[ScoreRecord]) -> Result<(), DdmError> {
    let tmp = path.with_extension("tmp");
    {
        let mut file = fs::File::create(&tmp)
            .map_err(|e| DdmError::Store(format!("{}: {e}", tmp.display())))?;
        let mut buf = String::with_capacity(records.len() * 48 + HEADER.len() + 1);
        buf.push_str(HEADER);
        buf.push('\n');
        for r in records {
            buf.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.user_id, r.response, r.treatment, r.y_treated, r.y_control_star, r.delta
            ));
        }
        file.write_all(buf.as_bytes())
            .map_err(|e| DdmError::Store(format!("{}: {e}", tmp.display())))?;
        file.sync_all()
            .map_err(|e| DdmError::Store(format!("{}: {e}", tmp.display())))?;
    }
    fs::rename(&tmp, path).map_err(|e| DdmError::Store(format!("{}: {e}", path.display())))?;
    Ok(())
}

pub fn read_score_store(path: &Path) -> Result<Vec<ScoreRecord>, DdmError> {
    let text = fs::read_to_string(path).map_err(|e| DdmError::Store(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == HEADER => {}
        other => {
            return Err(DdmError::Store(format!(
                "bad header {other:?}, expected `{HEADER}`"
            )))
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 6 {
            return Err(DdmError::Store(format!("row {}: expected 6 cells", i + 2)));
        }
        let parse_f = |s: &str| -> Result<f64, DdmError> {
            s.parse().map_err(|_| DdmError::Store(format!("row {}: bad number `{s}`", i + 2)))
        };
        let parse_u = |s: &str| -> Result<usize, DdmError> {
            s.parse().map_err(|_| DdmError::Store(format!("row {}: bad index `{s}`", i + 2)))
        };
        records.push(ScoreRecord {
            user_id: cells[0].to_string(),
            response: parse_u(cells[1])?,
            treatment: parse_u(cells[2])?,
            y_treated: parse_f(cells[3])?,
            y_control_star: parse_f(cells[4])?,
            delta: parse_f(cells[5])?,
        });
    }
    Ok(records)
}

/// In-memory view keyed by user: `delta[r][k-1]`.
#[derive(Debug, Clone)]
pub struct ScoreStore {
    pub responses: usize,
    pub treatments: usize,
    deltas: HashMap<String, Vec<Vec<f64>>>,
}

impl ScoreStore {
    pub fn from_records(records: &[ScoreRecord]) -> Result<Self, DdmError> {
        let responses = records.iter().map(|r| r.response).max().unwrap_or(0);
        let treatments = records.iter().map(|r| r.treatment).max().unwrap_or(0);
        if responses == 0 || treatments == 0 {
            return Err(DdmError::Store("empty score store".into()));
        }
        let mut deltas: HashMap<String, Vec<Vec<f64>>> = HashMap::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for rec in records {
            if rec.response == 0 || rec.treatment == 0 {
                return Err(DdmError::Store("indices in the store are 1-based".into()));
            }
            let entry = deltas
                .entry(rec.user_id.clone())
                .or_insert_with(|| vec![vec![f64::NAN; treatments]; responses]);
            entry[rec.response - 1][rec.treatment - 1] = rec.delta;
            *seen.entry(rec.user_id.clone()).or_insert(0) += 1;
        }
        for (user, count) in &seen {
            if *count != responses * treatments {
                return Err(DdmError::Store(format!(
                    "user `{user}` has {count} records, expected {}",
                    responses * treatments
                )));
            }
        }
        Ok(Self {
            responses,
            treatments,
            deltas,
        })
    }

    pub fn load(path: &Path) -> Result<Self, DdmError> {
        Self::from_records(&read_score_store(path)?)
    }

    pub fn delta_matrix(&self, user_id: &str) -> Option<&Vec<Vec<f64>>> {
        self.deltas.get(user_id)
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_records() -> Vec<ScoreRecord> {
        let mut out = Vec::new();
        for user in ["u1", "u2"] {
            for r in 1..=2 {
                for k in 1..=2 {
                    out.push(ScoreRecord {
                        user_id: user.to_string(),
                        response: r,
                        treatment: k,
                        y_treated: 5.0 + k as f64 * 0.1,
                        y_control_star: 5.0,
                        delta: k as f64 * 0.02,
                    });
                }
            }
        }
        out
    }

    #[test]
    fn round_trip_and_lookup() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.csv");
        let records = sample_records();
        write_score_store(&path, &records).unwrap();
        let read = read_score_store(&path).unwrap();
        assert_eq!(read, records);
        let store = ScoreStore::from_records(&read).unwrap();
        assert_eq!(store.len(), 2);
        let m = store.delta_matrix("u1").unwrap();
        assert_eq!(m[0][1], 0.04);
        assert!(store.delta_matrix("nobody").is_none());
    }

    #[test]
    fn stored_delta_is_recomputable() {
        let records = sample_records();
        for rec in &records {
            let recomputed = rec.y_treated / rec.y_control_star - 1.0;
            assert!((recomputed - rec.delta).abs() < 1e-12);
        }
    }

    #[test]
    fn refresh_replaces_atomically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.csv");
        write_score_store(&path, &sample_records()).unwrap();
        let before = fs::read_to_string(&path).unwrap();

        let mut updated = sample_records();
        for r in &mut updated {
            r.delta += 1.0;
        }
        write_score_store(&path, &updated).unwrap();
        let after = fs::read_to_string(&path).unwrap();
        assert_ne!(before, after);
        // no temp residue, and the file parses completely
        assert!(!path.with_extension("tmp").exists());
        assert_eq!(read_score_store(&path).unwrap(), updated);
    }

    #[test]
    fn incomplete_user_is_rejected() {
        let mut records = sample_records();
        records.pop();
        assert!(ScoreStore::from_records(&records).is_err());
    }
}

//! File formats: headerless CSV points, ground-truth sidecars, JSONL
//! candidate lists.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::sampler::CandidatePair;

/// Reads one point per line, coordinates separated by commas. Blank lines
/// are skipped.
pub fn read_points_csv<R: BufRead>(reader: R) -> Result<PointSet> {
    let mut data = Vec::new();
    let mut dim = None;
    for (no, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                let v =
                    f.trim().parse::<f64>().map_err(|_| Error::Parse(format!("line {}: bad number {f:?}", no + 1)))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Parse(format!("line {}: non-finite coordinate", no + 1)))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::Parse(format!("line {}: {} coordinates, expected {d}", no + 1, row.len())))
            }
            _ => {}
        }
        data.extend(row);
    }
    let d = dim.ok_or(Error::Empty("point file has no rows"))?;
    PointSet::from_flat(d, data)
}

pub fn write_points_csv<W: Write>(mut w: W, points: &PointSet) -> Result<()> {
    for p in points.iter() {
        let row: Vec<String> = p.iter().map(|x| x.to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Ground truth of a generated instance, stored next to the point file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub labels: Vec<usize>,
    pub k: usize,
    pub centers: Vec<Vec<f64>>,
    pub sigma: f64,
    pub seed: u64,
}

impl GroundTruth {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        self.labels.iter().for_each(|&l| s[l] += 1);
        s
    }
}

/// Sidecar path for a point file: `points.csv` -> `points.truth.json`.
pub fn sidecar_path(points: &std::path::Path) -> std::path::PathBuf {
    points.with_extension("truth.json")
}

pub fn write_candidates_jsonl<W: Write>(mut w: W, pairs: &[CandidatePair]) -> Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_candidates_jsonl<R: BufRead>(reader: R) -> Result<Vec<CandidatePair>> {
    let mut out = Vec::new();
    for (no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse(format!("candidate line {}: {e}", no + 1)))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::Provenance;

    #[test]
    fn csv_round_trip_is_exact() {
        let p = PointSet::new(vec![vec![0.1, -2.5e-300], vec![1.0 / 3.0, 7.0]]).unwrap();
        let mut buf = Vec::new();
        write_points_csv(&mut buf, &p).unwrap();
        let back = read_points_csv(&buf[..]).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn csv_errors() {
        assert!(read_points_csv(&b""[..]).is_err());
        assert!(read_points_csv(&b"1,2\n3\n"[..]).is_err());
        assert!(read_points_csv(&b"1,x\n"[..]).is_err());
        assert!(read_points_csv(&b"1,NaN\n"[..]).is_err());
        assert_eq!(read_points_csv(&b"\n1, 2\n\n"[..]).unwrap().len(), 1);
    }

    #[test]
    fn jsonl_round_trip() {
        let pairs = vec![
            CandidatePair { c1: vec![0.5], c2: vec![1.5], provenance: Provenance::Bare },
            CandidatePair {
                c1: vec![0.0],
                c2: vec![2.0],
                provenance: Provenance::Phase1 { subset_a: vec![0, 1], subset_b: vec![2, 3] },
            },
        ];
        let mut buf = Vec::new();
        write_candidates_jsonl(&mut buf, &pairs).unwrap();
        assert_eq!(read_candidates_jsonl(&buf[..]).unwrap(), pairs);
        assert!(read_candidates_jsonl(&b"{\"c1\":1}\n"[..]).is_err());
    }
}

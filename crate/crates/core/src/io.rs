//! CSV and JSON artifacts. Every float is written with 17 significant digits.

use std::fs;
use std::io;
use std::path::Path;

use serde::Deserialize;

use crate::integrator::Trajectory;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> io::Result<()>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.as_ref().iter().map(|&x| fmt_f64(x)))?;
    }
    w.flush()
}

/// `t,z,p` followed by one column per name in `extra`.
pub fn write_trajectory(path: &Path, traj: &Trajectory, extra: &[&str]) -> io::Result<()> {
    let mut header = vec!["t", "z", "p"];
    header.extend_from_slice(extra);
    let width = (2 + extra.len()).min(traj.dim());
    write_csv(
        path,
        &header[..1 + width],
        traj.rows().map(|(t, row)| {
            let mut r = Vec::with_capacity(1 + width);
            r.push(t);
            r.extend_from_slice(&row[..width]);
            r
        }),
    )
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct HillSample {
    pub t: f64,
    pub f: f64,
    pub g: f64,
}

/// Reads a `t,f,g` table.
pub fn read_hill_csv(path: &Path) -> io::Result<Vec<HillSample>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let rows: Result<Vec<HillSample>, csv::Error> = r.deserialize().collect();
    Ok(rows?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.5), "-2.5000000000000000e0");
        let x = 0.004_204_302_988_625_225;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        write_csv(&path, &["t", "f", "g"], [[0.0, 0.25, 1.0], [0.5, 0.3, -1.0]]).unwrap();
        let rows = read_hill_csv(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1], HillSample { t: 0.5, f: 0.3, g: -1.0 });
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,f,g\n0.0000000000000000e0,"));
    }
}

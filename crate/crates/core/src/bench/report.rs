//! Benchmark reports: one row per (image, method, density) cell, written
//! as CSV for machines and as Markdown tables for reading.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::Method;
use crate::error::{Error, Result};
use crate::metrics::{Psnr, SSIM_MAP_OFFSET, SSIM_MAP_SCALE};

/// CSV header. Timing is last so byte comparisons can cut it off.
pub const CSV_HEADER: [&str; 11] = [
    "image",
    "resolution",
    "method",
    "density",
    "psnr_db",
    "ssim",
    "iterations",
    "converged",
    "seed",
    "error",
    "wall_time_s",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub image: String,
    pub width: usize,
    pub height: usize,
    pub method: Method,
    pub density: f64,
    /// Absent when the cell failed.
    pub psnr: Option<Psnr>,
    pub ssim: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
    pub error: Option<String>,
    pub wall_time_s: f64,
}

impl ReportRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    fn to_record(&self) -> Vec<String> {
        vec![
            self.image.clone(),
            format!("{}x{}", self.width, self.height),
            self.method.to_string(),
            self.density.to_string(),
            self.psnr.map_or_else(String::new, |p| p.to_string()),
            self.ssim.map_or_else(String::new, |s| s.to_string()),
            self.iterations.to_string(),
            self.converged.to_string(),
            self.seed.to_string(),
            self.error.clone().unwrap_or_default(),
            self.wall_time_s.to_string(),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self> {
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::Config(format!(
                "report row has {} fields, expected {}",
                rec.len(),
                CSV_HEADER.len()
            )));
        }
        let bad = |col: &str, v: &str| Error::Config(format!("bad {col} value {v:?}"));
        let num =
            |i: usize| -> Result<f64> { rec[i].parse().map_err(|_| bad(CSV_HEADER[i], &rec[i])) };
        let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
        let (w, h) = rec[1]
            .split_once('x')
            .and_then(|(w, h)| Some((w.parse().ok()?, h.parse().ok()?)))
            .ok_or_else(|| bad("resolution", &rec[1]))?;
        Ok(Self {
            image: rec[0].to_string(),
            width: w,
            height: h,
            method: rec[2].parse()?,
            density: num(3)?,
            psnr: opt(&rec[4]).map(|s| s.parse()).transpose()?,
            ssim: opt(&rec[5]).map(|_| num(5)).transpose()?,
            iterations: rec[6].parse().map_err(|_| bad("iterations", &rec[6]))?,
            converged: rec[7].parse().map_err(|_| bad("converged", &rec[7]))?,
            seed: rec[8].parse().map_err(|_| bad("seed", &rec[8]))?,
            error: opt(&rec[9]),
            wall_time_s: num(10)?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QualityReport {
    pub rows: Vec<ReportRow>,
}

impl QualityReport {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.failed()).count()
    }

    pub fn find(&self, image: &str, method: Method, density: f64) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.image == image && r.method == method && r.density == density)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for row in &self.rows {
            w.write_record(row.to_record())?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers()?.clone();
        if !header.iter().eq(CSV_HEADER) {
            return Err(Error::Config(format!(
                "unexpected report header {header:?}"
            )));
        }
        let rows = r
            .records()
            .map(|rec| ReportRow::from_record(&rec?))
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    /// Tables grouped by density: one line per image, a PSNR column group
    /// and an SSIM column group with one column per method.
    pub fn to_markdown(&self) -> String {
        let mut densities: Vec<f64> = Vec::new();
        let mut images: Vec<(String, usize, usize)> = Vec::new();
        let mut methods: Vec<Method> = Vec::new();
        for r in &self.rows {
            if !densities.contains(&r.density) {
                densities.push(r.density);
            }
            if !images.iter().any(|(n, _, _)| *n == r.image) {
                images.push((r.image.clone(), r.width, r.height));
            }
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
        }
        let mut s = String::from("# Representation quality\n");
        for &d in &densities {
            writeln!(s, "\n## Sample density {}%\n", format_percent(d)).unwrap();
            s.push_str("| Image | Resolution |");
            for m in &methods {
                write!(s, " {} PSNR (dB) |", m.label()).unwrap();
            }
            for m in &methods {
                write!(s, " {} SSIM |", m.label()).unwrap();
            }
            s.push_str("\n|---|---|");
            s.push_str(&"---:|".repeat(2 * methods.len()));
            s.push('\n');
            for (name, w, h) in &images {
                write!(s, "| {name} | {w}x{h} |").unwrap();
                let cell = |m: Method| self.find(name, m, d);
                for &m in &methods {
                    let v = match cell(m) {
                        Some(r) if r.failed() => "failed".to_string(),
                        Some(r) => r.psnr.map_or("-".into(), |p| match p {
                            Psnr::Infinite => "inf".into(),
                            Psnr::Finite(v) => format!("{v:.2}"),
                        }),
                        None => "-".into(),
                    };
                    write!(s, " {v} |").unwrap();
                }
                for &m in &methods {
                    let v = match cell(m) {
                        Some(r) if r.failed() => "failed".to_string(),
                        Some(r) => r.ssim.map_or("-".into(), |v| format!("{v:.4}")),
                        None => "-".into(),
                    };
                    write!(s, " {v} |").unwrap();
                }
                s.push('\n');
            }
        }
        s.push_str("\n## Run details\n\n| Image | Method | Density | Iterations | Converged | Seed | Time (s) |\n|---|---|---:|---:|---|---:|---:|\n");
        for r in &self.rows {
            writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {:.2} |",
                r.image,
                r.method.label(),
                r.density,
                r.iterations,
                if r.converged { "yes" } else { "no" },
                r.seed,
                r.wall_time_s
            )
            .unwrap();
        }
        let failed: Vec<&ReportRow> = self.rows.iter().filter(|r| r.failed()).collect();
        if !failed.is_empty() {
            s.push_str("\n## Failures\n\n");
            for r in failed {
                writeln!(
                    s,
                    "- {} / {} / {}: {}",
                    r.image,
                    r.method.label(),
                    r.density,
                    r.error.as_deref().unwrap_or_default()
                )
                .unwrap();
            }
        }
        writeln!(
            s,
            "\nSSIM maps are stored as 8-bit images with pixel = (ssim + {SSIM_MAP_OFFSET}) * {SSIM_MAP_SCALE}."
        )
        .unwrap();
        s
    }
}

fn format_percent(d: f64) -> String {
    let p = (d * 100.0 * 1e6).round() / 1e6;
    p.to_string()
}

/// Writes `report.csv` and `report.md` into `dir`, creating it if needed.
pub fn write_report(report: &QualityReport, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    if report.is_empty() {
        return Err(Error::InvalidParameter("report has no rows".into()));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("report.csv");
    let md_path = dir.join("report.md");
    fs::write(&csv_path, report.to_csv()?).map_err(|e| Error::io(&csv_path, e))?;
    fs::write(&md_path, report.to_markdown()).map_err(|e| Error::io(&md_path, e))?;
    Ok((csv_path, md_path))
}

/// Each CSV line with its final (timing) field removed.
pub fn strip_timing(csv_text: &str) -> String {
    csv_text
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_labels() {
        assert_eq!(format_percent(0.03), "3");
        assert_eq!(format_percent(0.1), "10");
        assert_eq!(format_percent(0.125), "12.5");
    }

    #[test]
    fn strip_timing_drops_last_field() {
        assert_eq!(strip_timing("a,b,c\n1,\"x,y\",2.5\n"), "a,b\n1,\"x,y\"");
    }
}

//! Ingestion of the Hillstrom email-marketing CSV.
//!
//! The public file has one row per customer with columns
//! `recency, history_segment, history, mens, womens, zip_code, newbie,
//! channel, segment, visit, conversion, spend`. We keep the men's-email and
//! no-email groups (`A = 1` / `A = 0`), drop the women's-email group, and use
//! the `visit` indicator as the outcome.
//!
//! Covariates: `recency` and `history` are numeric and standardized to zero
//! mean / unit variance using the rows the accompanying [`SplitSpec`] assigns
//! to training; `mens`, `womens`, `newbie` are kept as 0/1 flags; `zip_code`
//! and `channel` are one-hot encoded with category order fixed by sorting, so
//! the encoded dimensionality does not depend on row order.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::{split_indices, Dataset, Sample, SplitSpec};
use crate::error::{Error, Result};
use crate::math::{mean, sample_std};

/// How to encode and standardize the raw file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessOptions {
    /// Split whose training rows define the standardization statistics.
    pub split: SplitSpec,
    /// Standardize the numeric covariates (recency, history).
    pub standardize: bool,
}

struct RawRow {
    line: u64,
    recency: f64,
    history: f64,
    mens: f64,
    womens: f64,
    newbie: f64,
    zip_code: String,
    channel: String,
    a: u8,
    visit: f64,
}

const REQUIRED: [&str; 9] = [
    "recency", "history", "mens", "womens", "zip_code", "newbie", "channel", "segment", "visit",
];

fn column_indices(headers: &csv::StringRecord) -> Result<Vec<usize>> {
    REQUIRED
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim().eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::InvalidData(format!("missing column '{name}'")))
        })
        .collect()
}

fn parse_field(record: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<f64> {
    let raw = record.get(idx).unwrap_or("");
    raw.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidData(format!("row {line}: cannot parse {name} from '{raw}'")))
}

/// Loads and encodes the Hillstrom CSV into a [`Dataset`].
pub fn load_hillstrom(path: &Path, options: &PreprocessOptions) -> Result<Dataset> {
    options.split.validate()?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let idx = column_indices(&headers)?;
    let [i_rec, i_hist, i_mens, i_womens, i_zip, i_newbie, i_chan, i_seg, i_visit]: [usize; 9] =
        idx.try_into().expect("nine required columns");

    let mut rows: Vec<RawRow> = Vec::new();
    let mut zips: BTreeSet<String> = BTreeSet::new();
    let mut channels: BTreeSet<String> = BTreeSet::new();

    for (k, record) in reader.records().enumerate() {
        let line = k as u64 + 2; // 1-based, after the header line
        let record = record
            .map_err(|e| Error::InvalidData(format!("row {line}: unparseable record: {e}")))?;
        let segment = record.get(i_seg).unwrap_or("").trim();
        let a = match segment {
            "Mens E-Mail" => 1,
            "No E-Mail" => 0,
            "Womens E-Mail" => continue,
            other => {
                return Err(Error::InvalidData(format!(
                    "row {line}: unknown segment '{other}'"
                )))
            }
        };
        let visit = parse_field(&record, i_visit, "visit", line)?;
        if visit != 0.0 && visit != 1.0 {
            return Err(Error::InvalidData(format!(
                "row {line}: visit must be 0 or 1, got {visit}"
            )));
        }
        let row = RawRow {
            line,
            recency: parse_field(&record, i_rec, "recency", line)?,
            history: parse_field(&record, i_hist, "history", line)?,
            mens: parse_field(&record, i_mens, "mens", line)?,
            womens: parse_field(&record, i_womens, "womens", line)?,
            newbie: parse_field(&record, i_newbie, "newbie", line)?,
            zip_code: record.get(i_zip).unwrap_or("").trim().to_string(),
            channel: record.get(i_chan).unwrap_or("").trim().to_string(),
            a,
            visit,
        };
        zips.insert(row.zip_code.clone());
        channels.insert(row.channel.clone());
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(Error::InvalidData("empty result: no usable rows".into()));
    }

    let zips: Vec<String> = zips.into_iter().collect();
    let channels: Vec<String> = channels.into_iter().collect();

    let mut samples: Vec<Sample> = Vec::with_capacity(rows.len());
    for row in &rows {
        let mut x = vec![row.recency, row.history, row.mens, row.womens, row.newbie];
        for z in &zips {
            x.push(f64::from(u8::from(&row.zip_code == z)));
        }
        for c in &channels {
            x.push(f64::from(u8::from(&row.channel == c)));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "row {}: non-finite covariate",
                row.line
            )));
        }
        samples.push(Sample {
            x,
            a: row.a,
            y: row.visit,
            true_cate: None,
            true_propensity: None,
        });
    }

    if options.standardize {
        // recency and history occupy the first two covariate slots
        let (train_idx, _, _) = split_indices(samples.len(), &options.split);
        for col in 0..2 {
            let train_vals: Vec<f64> = train_idx.iter().map(|&i| samples[i].x[col]).collect();
            let m = mean(&train_vals);
            let sd = sample_std(&train_vals);
            if sd > 0.0 {
                for s in &mut samples {
                    s.x[col] = (s.x[col] - m) / sd;
                }
            }
        }
    }

    Dataset::new(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const HEADER: &str = "recency,history_segment,history,mens,womens,zip_code,newbie,channel,segment,visit,conversion,spend";

    fn fixture_rows() -> Vec<String> {
        // Small synthetic file exercising all three segments and several
        // category levels; schema matches the public dataset.
        let mut rows = Vec::new();
        let zips = ["Urban", "Surburban", "Rural"];
        let channels = ["Web", "Phone", "Multichannel"];
        let segments = ["Mens E-Mail", "No E-Mail", "Womens E-Mail"];
        for i in 0..60u32 {
            let zip = zips[(i % 3) as usize];
            let chan = channels[((i / 3) % 3) as usize];
            let seg = segments[((i / 9) % 3) as usize];
            rows.push(format!(
                "{},{}) $100 - $200,{:.2},{},{},{},{},{},{},{},0,0.0",
                1 + i % 12,
                2,
                50.0 + i as f64,
                i % 2,
                (i + 1) % 2,
                zip,
                i % 2,
                chan,
                seg,
                i % 2,
            ));
        }
        rows
    }

    fn write_fixture(rows: &[String]) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hillstrom.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "{HEADER}").unwrap();
        for r in rows {
            writeln!(f, "{r}").unwrap();
        }
        (dir, path)
    }

    fn default_options() -> PreprocessOptions {
        PreprocessOptions {
            split: SplitSpec::new(0.5, 0.2, 0.3, 0).unwrap(),
            standardize: true,
        }
    }

    #[test]
    fn womens_group_dropped_and_arms_mapped() {
        let (_dir, path) = write_fixture(&fixture_rows());
        let data = load_hillstrom(&path, &default_options()).unwrap();
        // segments cycle in blocks of 9: rows 18..27 and 45..54 are Womens E-Mail
        assert_eq!(data.len(), 42);
        assert!(data.samples.iter().any(|s| s.a == 1));
        assert!(data.samples.iter().any(|s| s.a == 0));
        assert!(data.samples.iter().all(|s| s.y == 0.0 || s.y == 1.0));
        // 2 numeric + 3 flags + 3 zip levels + 3 channel levels
        assert_eq!(data.dim(), 11);
    }

    #[test]
    fn standardization_uses_training_rows() {
        let (_dir, path) = write_fixture(&fixture_rows());
        let opts = default_options();
        let data = load_hillstrom(&path, &opts).unwrap();
        let (train_idx, _, _) = split_indices(data.len(), &opts.split);
        let rec: Vec<f64> = train_idx.iter().map(|&i| data.samples[i].x[0]).collect();
        assert!(mean(&rec).abs() < 1e-10);
        assert!((sample_std(&rec) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn encoding_is_row_order_independent() {
        let rows = fixture_rows();
        let (_d1, p1) = write_fixture(&rows);
        let mut shuffled = rows.clone();
        shuffled.reverse();
        let (_d2, p2) = write_fixture(&shuffled);
        let opts = PreprocessOptions {
            split: SplitSpec::new(1.0, 0.0, 0.0, 0).unwrap(),
            standardize: false,
        };
        let a = load_hillstrom(&p1, &opts).unwrap();
        let b = load_hillstrom(&p2, &opts).unwrap();
        assert_eq!(a.dim(), b.dim());
        // same multiset of rows
        let key = |s: &Sample| {
            let mut k: Vec<u64> = s.x.iter().map(|v| v.to_bits()).collect();
            k.push(u64::from(s.a));
            k.push(s.y.to_bits());
            k
        };
        let mut ka: Vec<_> = a.samples.iter().map(key).collect();
        let mut kb: Vec<_> = b.samples.iter().map(key).collect();
        ka.sort();
        kb.sort();
        assert_eq!(ka, kb);
    }

    #[test]
    fn header_only_file_is_empty_result() {
        let (_dir, path) = write_fixture(&[]);
        let err = load_hillstrom(&path, &default_options()).unwrap_err();
        assert!(err.to_string().contains("empty result"), "{err}");
    }

    #[test]
    fn missing_column_and_bad_rows_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "recency,history\n1,2\n").unwrap();
        let err = load_hillstrom(&path, &default_options()).unwrap_err();
        assert!(err.to_string().contains("missing column"), "{err}");

        let path2 = dir.path().join("badrow.csv");
        let mut f = std::fs::File::create(&path2).unwrap();
        writeln!(f, "{HEADER}").unwrap();
        writeln!(f, "oops,seg,1.0,0,1,Urban,0,Web,Mens E-Mail,0,0,0").unwrap();
        let err = load_hillstrom(&path2, &default_options()).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn unknown_segment_rejected_with_row_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seg.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "{HEADER}").unwrap();
        writeln!(f, "1,seg,1.0,0,1,Urban,0,Web,Mens E-Mail,0,0,0").unwrap();
        writeln!(f, "1,seg,1.0,0,1,Urban,0,Web,Mystery,0,0,0").unwrap();
        let err = load_hillstrom(&path, &default_options()).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
        assert!(err.to_string().contains("Mystery"), "{err}");
    }
}

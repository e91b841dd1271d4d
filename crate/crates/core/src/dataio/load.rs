use std::collections::HashSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RawRating {
    pub user_id: String,
    pub item_id: String,
    pub rating: f64,
    /// Carried through but unused by any model.
    pub timestamp: Option<i64>,
}

/// A column selected by header name or by 0-based position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl From<&str> for ColumnRef {
    fn from(name: &str) -> Self {
        ColumnRef::Name(name.to_owned())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnSpec {
    pub delimiter: char,
    pub has_header: bool,
    pub user: ColumnRef,
    pub item: ColumnRef,
    pub rating: ColumnRef,
    pub timestamp: Option<ColumnRef>,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            delimiter: ',',
            has_header: true,
            user: "user".into(),
            item: "item".into(),
            rating: "rating".into(),
            timestamp: None,
            scale_min: 1.0,
            scale_max: 5.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    #[default]
    Strict,
    Lenient,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadReport {
    pub ratings: Vec<RawRating>,
    pub skipped: usize,
}

struct Resolved {
    user: usize,
    item: usize,
    rating: usize,
    timestamp: Option<usize>,
}

fn resolve(col: &ColumnRef, header: Option<&csv::StringRecord>) -> Result<usize> {
    match (col, header) {
        (ColumnRef::Index(i), _) => Ok(*i),
        (ColumnRef::Name(name), Some(h)) => h
            .iter()
            .position(|c| c.trim() == name)
            .ok_or_else(|| Error::Config(format!("column {name:?} not found in header"))),
        (ColumnRef::Name(name), None) => Err(Error::Config(format!(
            "column {name:?} referenced by name but the file has no header"
        ))),
    }
}

fn parse_row(rec: &csv::StringRecord, cols: &Resolved, spec: &ColumnSpec) -> std::result::Result<RawRating, String> {
    let field = |idx: usize| {
        rec.get(idx)
            .map(str::trim)
            .ok_or_else(|| format!("missing column {idx}"))
    };
    let user_id = field(cols.user)?;
    let item_id = field(cols.item)?;
    if user_id.is_empty() || item_id.is_empty() {
        return Err("empty user or item id".into());
    }
    let raw = field(cols.rating)?;
    let rating: f64 = raw.parse().map_err(|_| format!("bad rating {raw:?}"))?;
    if !(spec.scale_min..=spec.scale_max).contains(&rating) {
        return Err(format!(
            "rating {rating} outside scale [{}, {}]",
            spec.scale_min, spec.scale_max
        ));
    }
    let timestamp = match cols.timestamp {
        Some(idx) => {
            let raw = field(idx)?;
            Some(raw.parse().map_err(|_| format!("bad timestamp {raw:?}"))?)
        }
        None => None,
    };
    Ok(RawRating {
        user_id: user_id.to_owned(),
        item_id: item_id.to_owned(),
        rating,
        timestamp,
    })
}

/// Reads delimited rating records in file order.
pub fn load_ratings(path: impl AsRef<Path>, spec: &ColumnSpec, mode: ParseMode) -> Result<LoadReport> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let report = load_ratings_from(file, spec, mode)?;
    log::info!(
        "loaded {} ratings from {} ({} skipped)",
        report.ratings.len(),
        path.display(),
        report.skipped
    );
    Ok(report)
}

pub fn load_ratings_from<R: Read>(reader: R, spec: &ColumnSpec, mode: ParseMode) -> Result<LoadReport> {
    if !spec.delimiter.is_ascii() {
        return Err(Error::Config(format!(
            "delimiter {:?} must be a single ASCII character",
            spec.delimiter
        )));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter as u8)
        .has_headers(spec.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = if spec.has_header {
        let h = rdr.headers().map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        if h.is_empty() {
            return Ok(LoadReport::default());
        }
        Some(h.clone())
    } else {
        None
    };
    let cols = Resolved {
        user: resolve(&spec.user, header.as_ref())?,
        item: resolve(&spec.item, header.as_ref())?,
        rating: resolve(&spec.rating, header.as_ref())?,
        timestamp: spec
            .timestamp
            .as_ref()
            .map(|c| resolve(c, header.as_ref()))
            .transpose()?,
    };

    let mut report = LoadReport::default();
    let mut rec = csv::StringRecord::new();
    loop {
        let read = rdr.read_record(&mut rec);
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let outcome = match read {
            Ok(false) => break,
            Ok(true) => parse_row(&rec, &cols, spec),
            Err(e) => Err(e.to_string()),
        };
        match (outcome, mode) {
            (Ok(r), _) => report.ratings.push(r),
            (Err(message), ParseMode::Strict) => return Err(Error::Parse { line, message }),
            (Err(message), ParseMode::Lenient) => {
                log::debug!("skipping line {line}: {message}");
                report.skipped += 1;
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PositivePair {
    pub user_id: String,
    pub item_id: String,
}

/// Keeps `(user, item)` pairs rated at or above `threshold`, first
/// occurrence wins.
pub fn binarize(ratings: &[RawRating], threshold: f64) -> Vec<PositivePair> {
    let mut seen = HashSet::new();
    ratings
        .iter()
        .filter(|r| r.rating >= threshold)
        .filter(|r| seen.insert((r.user_id.as_str(), r.item_id.as_str())))
        .map(|r| PositivePair {
            user_id: r.user_id.clone(),
            item_id: r.item_id.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn load_str(text: &str, mode: ParseMode) -> Result<LoadReport> {
        load_ratings_from(text.as_bytes(), &ColumnSpec::default(), mode)
    }

    #[test]
    fn three_well_formed_rows() {
        let r = load_str("user,item,rating\na,x,5\nb,y,3\na,y,4\n", ParseMode::Strict).unwrap();
        assert_eq!(r.ratings.len(), 3);
        assert_eq!(r.ratings[2].user_id, "a");
        assert_eq!(r.ratings[2].rating, 4.0);
        assert_eq!(r.skipped, 0);
    }

    #[test]
    fn empty_file_yields_nothing() {
        let r = load_str("", ParseMode::Strict).unwrap();
        assert!(r.ratings.is_empty());
        let r = load_str("user,item,rating\n", ParseMode::Strict).unwrap();
        assert!(r.ratings.is_empty());
    }

    #[test]
    fn malformed_row_strict_and_lenient() {
        let text = "user,item,rating\na,x,5\nb,y,notanumber\nc,z,1\n";
        match load_str(text, ParseMode::Strict) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let r = load_str(text, ParseMode::Lenient).unwrap();
        assert_eq!(r.ratings.len(), 2);
        assert_eq!(r.skipped, 1);
    }

    #[test]
    fn out_of_scale_and_empty_ids_are_malformed() {
        let r = load_str("user,item,rating\na,x,7\n,y,3\nb,,3\nb,y,2\n", ParseMode::Lenient).unwrap();
        assert_eq!(r.ratings.len(), 1);
        assert_eq!(r.skipped, 3);
    }

    #[test]
    fn positional_columns_with_timestamp_and_tabs() {
        let spec = ColumnSpec {
            delimiter: '\t',
            has_header: false,
            user: ColumnRef::Index(0),
            item: ColumnRef::Index(1),
            rating: ColumnRef::Index(2),
            timestamp: Some(ColumnRef::Index(3)),
            ..ColumnSpec::default()
        };
        let r = load_ratings_from("1\t10\t5\t999\n2\t11\t4\t1000\n".as_bytes(), &spec, ParseMode::Strict).unwrap();
        assert_eq!(r.ratings[1].timestamp, Some(1000));
        assert_eq!(r.ratings[0].item_id, "10");
    }

    #[test]
    fn missing_named_column_is_a_config_error() {
        assert!(matches!(load_str("u,i,r\na,b,1\n", ParseMode::Strict), Err(Error::Config(_))));
    }

    fn rating(u: &str, i: &str, r: f64) -> RawRating {
        RawRating {
            user_id: u.into(),
            item_id: i.into(),
            rating: r,
            timestamp: None,
        }
    }

    #[test]
    fn binarize_threshold_five() {
        let rs = [rating("a", "1", 5.0), rating("a", "2", 4.0), rating("b", "1", 3.0), rating("b", "2", 5.0)];
        assert_eq!(binarize(&rs, 5.0).len(), 2);
        assert_eq!(binarize(&rs, 0.0).len(), 4);
    }

    #[test]
    fn binarize_dedups_keeping_first() {
        let rs = [rating("a", "1", 5.0), rating("b", "1", 5.0), rating("a", "1", 5.0)];
        let out = binarize(&rs, 5.0);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].user_id, "a");
        assert_eq!(out[1].user_id, "b");
    }

    #[test]
    fn binarize_matches_naive_filter_on_mixed_fixture() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let rs: Vec<RawRating> = (0..100)
            .map(|_| {
                let u = rng.random_range(0..8).to_string();
                let i = rng.random_range(0..8).to_string();
                rating(&u, &i, rng.random_range(1..=5) as f64)
            })
            .collect();
        let mut expected: Vec<(String, String)> = Vec::new();
        for r in &rs {
            let key = (r.user_id.clone(), r.item_id.clone());
            if r.rating >= 4.0 && !expected.contains(&key) {
                expected.push(key);
            }
        }
        let got: Vec<(String, String)> = binarize(&rs, 4.0)
            .into_iter()
            .map(|p| (p.user_id, p.item_id))
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn binarize_is_idempotent_on_its_output() {
        let rs = [rating("a", "1", 5.0), rating("a", "1", 5.0), rating("b", "2", 5.0), rating("c", "2", 2.0)];
        let once = binarize(&rs, 5.0);
        let again: Vec<RawRating> = once.iter().map(|p| rating(&p.user_id, &p.item_id, 5.0)).collect();
        assert_eq!(binarize(&again, 5.0), once);
    }
}

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{SynthGroundTruth, SynthReport};
use crate::error::{Error, Result};

pub const GROUND_TRUTH_HEADER: &str = "DECONFREC-GT v1";

const SECTIONS: [&str; 3] = ["user_confounders", "item_confounders", "preference_matrix"];

fn write_rows<W: Write>(w: &mut W, data: &[f64], width: usize) -> std::io::Result<()> {
    for row in data.chunks(width.max(1)) {
        let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        writeln!(w, "{}", line.join("\t"))?;
    }
    Ok(())
}

pub fn write_ground_truth_to<W: Write>(gt: &SynthGroundTruth, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{GROUND_TRUTH_HEADER}")?;
    writeln!(w, "{}\t{}\t{}", gt.num_users, gt.num_items, gt.confounder_dim)?;
    writeln!(w, "{}", SECTIONS[0])?;
    write_rows(&mut w, &gt.true_user_confounders, gt.confounder_dim)?;
    writeln!(w, "{}", SECTIONS[1])?;
    write_rows(&mut w, &gt.true_item_confounders, gt.confounder_dim)?;
    writeln!(w, "{}", SECTIONS[2])?;
    write_rows(&mut w, &gt.preference_matrix, gt.num_items)?;
    w.flush()
}

/// Header, a `users items confounder_dim` line, then three named sections
/// of tab-separated decimal rows.
pub fn write_ground_truth(gt: &SynthGroundTruth, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_ground_truth_to(gt, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn read_ground_truth_from<R: Read>(reader: R) -> Result<SynthGroundTruth> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((n, Ok(l))) => Ok((n + 1, l)),
            Some((n, Err(e))) => Err(Error::Parse {
                line: n + 1,
                message: e.to_string(),
            }),
            None => Err(Error::Format(format!("ground truth ends before {what}"))),
        }
    };
    let (_, header) = next("header")?;
    if header != GROUND_TRUTH_HEADER {
        return Err(Error::Format(format!("expected {GROUND_TRUTH_HEADER:?}, found {header:?}")));
    }
    let (n, dims) = next("dimensions")?;
    let dims: Vec<usize> = dims
        .split('\t')
        .map(|f| f.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse { line: n, message: e.to_string() })?;
    let [nu, ni, c] = dims[..] else {
        return Err(Error::Parse {
            line: n,
            message: "expected three dimensions".into(),
        });
    };
    let mut sections = Vec::with_capacity(3);
    for (name, rows, width) in [(SECTIONS[0], nu, c), (SECTIONS[1], ni, c), (SECTIONS[2], nu, ni)] {
        let (n, title) = next(name)?;
        if title != name {
            return Err(Error::Parse {
                line: n,
                message: format!("expected section {name}"),
            });
        }
        let mut data = Vec::with_capacity(rows * width);
        for _ in 0..rows {
            let (n, line) = next(name)?;
            let before = data.len();
            for f in line.split('\t') {
                data.push(f.parse::<f64>().map_err(|e| Error::Parse { line: n, message: e.to_string() })?);
            }
            if data.len() - before != width {
                return Err(Error::Parse {
                    line: n,
                    message: format!("expected {width} values"),
                });
            }
        }
        sections.push(data);
    }
    if let Ok((n, extra)) = next("end") {
        if !extra.is_empty() {
            return Err(Error::Parse {
                line: n,
                message: "trailing data".into(),
            });
        }
    }
    let preference_matrix = sections.pop().unwrap_or_default();
    let true_item_confounders = sections.pop().unwrap_or_default();
    let true_user_confounders = sections.pop().unwrap_or_default();
    Ok(SynthGroundTruth {
        num_users: nu,
        num_items: ni,
        confounder_dim: c,
        true_user_confounders,
        true_item_confounders,
        preference_matrix,
        report: SynthReport::default(),
    })
}

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<SynthGroundTruth> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_ground_truth_from(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    #[test]
    fn round_trip_is_exact() {
        let cfg = SynthConfig {
            num_users: 30,
            num_items: 40,
            density_target: 0.1,
            click_offset: -2.0,
            ..SynthConfig::default()
        };
        let (_, gt) = generate(&cfg).unwrap();
        let mut buf = Vec::new();
        write_ground_truth_to(&gt, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("DECONFREC-GT v1\n"));
        let back = read_ground_truth_from(&buf[..]).unwrap();
        assert_eq!(back.true_user_confounders, gt.true_user_confounders);
        assert_eq!(back.true_item_confounders, gt.true_item_confounders);
        assert_eq!(back.preference_matrix, gt.preference_matrix);
    }

    #[test]
    fn truncation_detected() {
        let gt = SynthGroundTruth {
            num_users: 1,
            num_items: 2,
            confounder_dim: 1,
            true_user_confounders: vec![0.5],
            true_item_confounders: vec![1.0, -1.0],
            preference_matrix: vec![0.25, 2.0],
            report: SynthReport::default(),
        };
        let mut buf = Vec::new();
        write_ground_truth_to(&gt, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut = &text[..text.len() - 5];
        assert!(read_ground_truth_from(cut.as_bytes()).is_err());
        assert!(read_ground_truth_from(text.replace("GT v1", "GT v2").as_bytes()).is_err());
    }
}

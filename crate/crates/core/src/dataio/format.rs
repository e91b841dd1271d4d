//! `DECONFREC-DS v1`: a header line, a `users<TAB>items<TAB>interactions`
//! counts line, then one `user<TAB>item<TAB>split` row per interaction.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{IdMap, Interaction, InteractionDataset, Split};
use crate::error::{Error, Result};

pub const DATASET_HEADER: &str = "DECONFREC-DS v1";

pub fn write_dataset_to<W: Write>(ds: &InteractionDataset, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{DATASET_HEADER}")?;
    writeln!(w, "{}\t{}\t{}", ds.num_users(), ds.num_items(), ds.len())?;
    for it in &ds.interactions {
        writeln!(w, "{}\t{}\t{}", it.user, it.item, it.split)?;
    }
    w.flush()
}

pub fn write_dataset(ds: &InteractionDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset_to(ds, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

fn parse_field<T: std::str::FromStr>(raw: Option<&str>, line: usize, what: &str) -> Result<T> {
    raw.and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse {
        line,
        message: format!("expected {what}"),
    })
}

/// Reads a dataset file. Entity keys become the decimal indices.
pub fn read_dataset_from<R: Read>(reader: R) -> Result<InteractionDataset> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let mut next = || -> Result<Option<(usize, String)>> {
        match lines.next() {
            None => Ok(None),
            Some((n, Ok(l))) => Ok(Some((n + 1, l))),
            Some((n, Err(e))) => Err(Error::Parse {
                line: n + 1,
                message: e.to_string(),
            }),
        }
    };
    match next()? {
        Some((_, h)) if h.trim_end() == DATASET_HEADER => {}
        _ => return Err(Error::Format(format!("missing {DATASET_HEADER:?} header"))),
    }
    let (line, counts) = next()?.ok_or_else(|| Error::Format("missing counts line".into()))?;
    let mut f = counts.split('\t');
    let nu: usize = parse_field(f.next(), line, "user count")?;
    let ni: usize = parse_field(f.next(), line, "item count")?;
    let n: usize = parse_field(f.next(), line, "interaction count")?;

    let mut interactions = Vec::with_capacity(n);
    while let Some((line, row)) = next()? {
        if row.is_empty() {
            continue;
        }
        let mut f = row.split('\t');
        let user: u32 = parse_field(f.next(), line, "user index")?;
        let item: u32 = parse_field(f.next(), line, "item index")?;
        let split: Split = f
            .next()
            .ok_or_else(|| Error::Parse {
                line,
                message: "missing split tag".into(),
            })?
            .parse()?;
        interactions.push(Interaction { user, item, split });
    }
    if interactions.len() != n {
        return Err(Error::Format(format!(
            "counts line declares {n} interactions but {} rows follow",
            interactions.len()
        )));
    }
    let ds = InteractionDataset {
        users: IdMap::numeric(nu),
        items: IdMap::numeric(ni),
        interactions,
    };
    ds.validate()?;
    Ok(ds)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<InteractionDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset_from(file)
}

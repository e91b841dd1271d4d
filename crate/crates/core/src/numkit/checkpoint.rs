//! `DECONFREC-CKPT v1`: header line, tensor count line, one
//! `name<TAB>dim,dim,...` line per tensor, then every tensor's values as
//! little-endian IEEE-754 f64 in declaration order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ParamSet, ParamTensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_HEADER: &str = "DECONFREC-CKPT v1";

pub fn write_checkpoint_to<W: Write>(params: &ParamSet, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CHECKPOINT_HEADER}")?;
    writeln!(w, "{}", params.tensors.len())?;
    for t in &params.tensors {
        let dims: Vec<String> = t.shape.iter().map(usize::to_string).collect();
        writeln!(w, "{}\t{}", t.name, dims.join(","))?;
    }
    for t in &params.tensors {
        for v in &t.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn write_checkpoint(params: &ParamSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    for t in &params.tensors {
        if t.name.contains(['\t', '\n']) {
            return Err(Error::Format(format!("tensor name {:?} contains a separator", t.name)));
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint_to(params, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

fn read_line<R: BufRead>(r: &mut R) -> Result<String> {
    let mut s = String::new();
    r.read_line(&mut s)
        .map_err(|e| Error::Format(format!("checkpoint directory: {e}")))?;
    if s.is_empty() {
        return Err(Error::Format("truncated checkpoint directory".into()));
    }
    Ok(s.trim_end_matches('\n').to_owned())
}

pub fn read_checkpoint_from<R: Read>(reader: R) -> Result<ParamSet> {
    let mut r = BufReader::new(reader);
    if read_line(&mut r)? != CHECKPOINT_HEADER {
        return Err(Error::Format(format!("missing {CHECKPOINT_HEADER:?} header")));
    }
    let count: usize = read_line(&mut r)?
        .parse()
        .map_err(|_| Error::Format("bad tensor count".into()))?;
    let mut directory = Vec::with_capacity(count);
    for _ in 0..count {
        let line = read_line(&mut r)?;
        let (name, dims) = line
            .split_once('\t')
            .ok_or_else(|| Error::Format(format!("bad directory entry {line:?}")))?;
        let shape = dims
            .split(',')
            .map(str::parse)
            .collect::<std::result::Result<Vec<usize>, _>>()
            .map_err(|_| Error::Format(format!("bad shape in {line:?}")))?;
        directory.push((name.to_owned(), shape));
    }
    let mut params = ParamSet::new();
    let mut buf = [0u8; 8];
    for (name, shape) in directory {
        let n: usize = shape.iter().product();
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut buf)
                .map_err(|_| Error::Format(format!("truncated values for {name}")))?;
            values.push(f64::from_le_bytes(buf));
        }
        params.push(ParamTensor::from_values(name, &shape, values)?);
    }
    if r.read(&mut buf).map_err(|e| Error::Format(e.to_string()))? != 0 {
        return Err(Error::Format("trailing bytes after checkpoint values".into()));
    }
    Ok(params)
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<ParamSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint_from(file)
}

//! Model persistence: a text manifest naming every tensor (name, element
//! type, shape, byte offset, element count) followed by the raw
//! little-endian IEEE-754 payload in manifest order. Round-trips are
//! bit-exact.

use std::collections::BTreeMap;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::substrate::tensor::Tensor;

const MAGIC: &str = "tagbridge-manifest v1";

/// A named collection of tensors plus free-form metadata lines.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<(String, Tensor)>,
}

impl Manifest {
    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn meta_u64(&self, key: &str) -> Option<u64> {
        self.meta.get(key).and_then(|v| v.parse().ok())
    }
}

pub fn save(path: &Path, manifest: &Manifest) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);

    writeln!(w, "{MAGIC}").map_err(io_err)?;
    for (k, v) in &manifest.meta {
        debug_assert!(!k.contains(char::is_whitespace), "meta key {k}");
        writeln!(w, "meta {k} {v}").map_err(io_err)?;
    }
    let mut offset = 0usize;
    for (name, t) in &manifest.tensors {
        debug_assert!(
            !name.contains(char::is_whitespace) && !t.shape.is_empty(),
            "tensor name/shape {name}"
        );
        let dims = t
            .shape
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("x");
        writeln!(w, "tensor {name} f64 {dims} {offset} {}", t.numel()).map_err(io_err)?;
        offset += t.numel() * 8;
    }
    writeln!(w, "end").map_err(io_err)?;
    for (_, t) in &manifest.tensors {
        for v in &t.data {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn load(path: &Path) -> Result<Manifest> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };

    // Split the text header from the binary payload at the `end` line.
    let mut pos = 0usize;
    let mut line_no = 0usize;
    let mut meta = BTreeMap::new();
    struct Entry {
        name: String,
        shape: Vec<usize>,
        offset: usize,
        count: usize,
    }
    let mut entries: Vec<Entry> = Vec::new();
    loop {
        let rest = &bytes[pos..];
        let nl = rest
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| parse_err(line_no + 1, "missing end marker".into()))?;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| parse_err(line_no + 1, "non-utf8 header".into()))?;
        pos += nl + 1;
        line_no += 1;
        if line_no == 1 {
            if line != MAGIC {
                return Err(parse_err(1, format!("bad magic {line:?}")));
            }
            continue;
        }
        if line == "end" {
            break;
        }
        let mut fields = line.splitn(2, ' ');
        match fields.next() {
            Some("meta") => {
                let rest = fields.next().unwrap_or("");
                let (k, v) = rest
                    .split_once(' ')
                    .ok_or_else(|| parse_err(line_no, "meta needs key and value".into()))?;
                meta.insert(k.to_string(), v.to_string());
            }
            Some("tensor") => {
                let rest = fields.next().unwrap_or("");
                let parts: Vec<&str> = rest.split(' ').collect();
                if parts.len() != 5 || parts[1] != "f64" {
                    return Err(parse_err(line_no, format!("bad tensor line {line:?}")));
                }
                let shape: Vec<usize> = parts[2]
                    .split('x')
                    .map(|d| d.parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| parse_err(line_no, format!("bad shape {:?}", parts[2])))?;
                let offset: usize = parts[3]
                    .parse()
                    .map_err(|_| parse_err(line_no, "bad offset".into()))?;
                let count: usize = parts[4]
                    .parse()
                    .map_err(|_| parse_err(line_no, "bad count".into()))?;
                if shape.iter().product::<usize>() != count {
                    return Err(parse_err(line_no, "shape/count mismatch".into()));
                }
                entries.push(Entry {
                    name: parts[0].to_string(),
                    shape,
                    offset,
                    count,
                });
            }
            _ => return Err(parse_err(line_no, format!("unknown header line {line:?}"))),
        }
    }

    let payload = &bytes[pos..];
    let mut tensors = Vec::with_capacity(entries.len());
    for e in entries {
        let start = e.offset;
        let end = start + e.count * 8;
        if end > payload.len() {
            return Err(parse_err(
                0,
                format!("tensor {} extends past payload ({end} > {})", e.name, payload.len()),
            ));
        }
        let mut data = Vec::with_capacity(e.count);
        let mut cursor = &payload[start..end];
        let mut buf = [0u8; 8];
        for _ in 0..e.count {
            cursor.read_exact(&mut buf).expect("length checked");
            data.push(f64::from_le_bytes(buf));
        }
        tensors.push((e.name, Tensor::new(e.shape, data)?));
    }
    Ok(Manifest { meta, tensors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substrate::rng::Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = Rng::new(21);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut manifest = Manifest::default();
        manifest.meta.insert("epoch".into(), "7".into());
        manifest.tensors.push((
            "enc.w".into(),
            Tensor::uniform_init(vec![3, 5], &mut rng),
        ));
        // Values with tricky bit patterns survive exactly.
        manifest.tensors.push((
            "odd".into(),
            Tensor::new(vec![4], vec![-0.0, f64::MIN_POSITIVE, 1.0 / 3.0, 1e300]).unwrap(),
        ));
        save(&path, &manifest).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back.meta_u64("epoch"), Some(7));
        assert_eq!(back.tensors.len(), 2);
        for ((n0, t0), (n1, t1)) in manifest.tensors.iter().zip(&back.tensors) {
            assert_eq!(n0, n1);
            assert_eq!(t0.shape, t1.shape);
            let bits0: Vec<u64> = t0.data.iter().map(|v| v.to_bits()).collect();
            let bits1: Vec<u64> = t1.data.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits0, bits1);
        }
    }

    #[test]
    fn save_then_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ckpt");
        let b = dir.path().join("b.ckpt");
        let mut manifest = Manifest::default();
        manifest
            .tensors
            .push(("t".into(), Tensor::new(vec![2], vec![0.1, -0.2]).unwrap()));
        save(&a, &manifest).unwrap();
        save(&b, &manifest).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn load_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"not a manifest\n").unwrap();
        assert!(load(&path).is_err());
    }
}

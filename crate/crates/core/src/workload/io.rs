//! Dataset files.
//!
//! - text: one decimal integer key per line (blank lines and `#` comments
//!   skipped)
//! - binary: `LBK1`, u64 LE count, then per key a u32 LE length and the bytes
//! - manifest: `key = value` lines recording how a dataset was produced

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::keys::int_key;

const BINARY_MAGIC: &[u8; 4] = b"LBK1";

pub fn read_int_keys_text<R: Read>(reader: R) -> Result<Vec<u64>> {
    let mut keys = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        keys.push(
            line.parse()
                .map_err(|_| Error::Format(format!("line {}: {line:?} is not a decimal integer key", lineno + 1)))?,
        );
    }
    Ok(keys)
}

pub fn write_int_keys_text<W: Write>(mut writer: W, keys: &[u64]) -> Result<()> {
    for k in keys {
        writeln!(writer, "{k}")?;
    }
    Ok(())
}

pub fn write_keys_binary<W: Write, K: AsRef<[u8]>>(mut writer: W, keys: &[K]) -> Result<()> {
    writer.write_all(BINARY_MAGIC)?;
    writer.write_all(&(keys.len() as u64).to_le_bytes())?;
    for key in keys {
        let key = key.as_ref();
        let len = u32::try_from(key.len()).map_err(|_| Error::Parameter("key longer than u32::MAX bytes".into()))?;
        writer.write_all(&len.to_le_bytes())?;
        writer.write_all(key)?;
    }
    Ok(())
}

pub fn read_keys_binary(bytes: &[u8]) -> Result<Vec<Vec<u8>>> {
    let truncated = || Error::Format("truncated binary key list".into());
    if bytes.len() < 12 || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::Format("missing LBK1 key list header".into()));
    }
    let count = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
    let mut rest = &bytes[12..];
    let mut keys = Vec::new();
    for _ in 0..count {
        if rest.len() < 4 {
            return Err(truncated());
        }
        let len = u32::from_le_bytes(rest[..4].try_into().unwrap()) as usize;
        rest = &rest[4..];
        if rest.len() < len {
            return Err(truncated());
        }
        keys.push(rest[..len].to_vec());
        rest = &rest[len..];
    }
    if !rest.is_empty() {
        return Err(Error::Format("trailing bytes after binary key list".into()));
    }
    Ok(keys)
}

/// Reads a key file in either format. Text keys are integer-encoded.
pub fn read_keys_file(path: &Path) -> Result<Vec<Vec<u8>>> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        read_keys_binary(&bytes)
    } else {
        Ok(read_int_keys_text(bytes.as_slice())?
            .into_iter()
            .map(|k| int_key(k).to_vec())
            .collect())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut manifest = Manifest::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {}: expected `key = value`", lineno + 1)))?;
            manifest.set(k.trim(), v.trim());
        }
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_keys_round_trip() {
        let keys = vec![0, 17, u64::MAX];
        let mut buf = Vec::new();
        write_int_keys_text(&mut buf, &keys).unwrap();
        assert_eq!(read_int_keys_text(buf.as_slice()).unwrap(), keys);
        assert_eq!(read_int_keys_text("# c\n\n 5 \n".as_bytes()).unwrap(), vec![5]);
        assert!(read_int_keys_text("12\nabc\n".as_bytes()).is_err());
    }

    #[test]
    fn binary_keys_round_trip() {
        let keys: Vec<Vec<u8>> = vec![b"".to_vec(), b"hello".to_vec(), vec![0xff; 300]];
        let mut buf = Vec::new();
        write_keys_binary(&mut buf, &keys).unwrap();
        assert_eq!(read_keys_binary(&buf).unwrap(), keys);
        assert!(read_keys_binary(&buf[..buf.len() - 1]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_keys_binary(&extra).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let mut m = Manifest::default();
        m.set("seed", 42).set("kind", "uniform:0:10");
        assert_eq!(Manifest::parse(&m.to_text()).unwrap(), m);
        assert_eq!(m.get("seed"), Some("42"));
        assert!(Manifest::parse("novalue\n").is_err());
    }
}

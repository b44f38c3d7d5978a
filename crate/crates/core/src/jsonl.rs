//! JSON-lines artifacts: one object per line, UTF-8.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Write all items, replacing `path` atomically.
pub fn write_jsonl<'a, T, I>(path: &Path, items: I) -> std::io::Result<()>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        for item in items {
            serde_json::to_writer(&mut w, item).map_err(std::io::Error::other)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> std::io::Result<Vec<T>> {
    let f = std::fs::File::open(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), n + 1))
        })?;
        out.push(item);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_line_numbers() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("x.jsonl");
        write_jsonl(&p, &[vec![1, 2], vec![3]]).unwrap();
        assert_eq!(read_jsonl::<Vec<u8>>(&p).unwrap(), vec![vec![1, 2], vec![3]]);
        std::fs::write(&p, "[1]\nnot json\n").unwrap();
        let err = read_jsonl::<Vec<u8>>(&p).unwrap_err().to_string();
        assert!(err.contains("x.jsonl:2"), "{err}");
    }
}

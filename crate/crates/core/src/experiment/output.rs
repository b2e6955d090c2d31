use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// Writes `rows` as CSV preceded by `# name: description` comment lines.
/// The file appears atomically.
pub fn write_csv<T: Serialize>(path: &Path, columns: &[(&str, &str)], rows: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for (name, desc) in columns {
        buf.extend_from_slice(format!("# {name}: {desc}\n").as_bytes());
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    write_atomic(path, &buf)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`], skipping the comment header.
pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        a: f64,
        b: Option<f64>,
    }

    #[test]
    fn csv_with_comment_header_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let rows = vec![Row { a: 0.1, b: None }, Row { a: -2.5e-7, b: Some(3.0) }];
        write_csv(&path, &[("a", "first"), ("b", "second")], &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# a: first\n# b: second\na,b\n"));
        assert_eq!(read_csv::<Row>(&path).unwrap(), rows);
        assert!(!path.with_extension("tmp").exists());
    }
}

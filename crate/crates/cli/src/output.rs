//! Report files: atomic writes, CSV tables.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Reals in tables carry 17 significant digits.
pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem; the table is written to `<name>.csv`.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            name: name.into(),
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| CliError::Output(e.to_string()))
    }
}

/// `prefix_0, prefix_1, …`
pub fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}_{i}")).collect()
}

/// Writes `bytes` to `dir/name` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let io = |e: std::io::Error| CliError::Io {
        path: path.clone(),
        source: e,
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(&path).map_err(|e| io(e.error))?;
    Ok(path)
}

/// One file per table.
pub fn emit_csv(tables: &[Table], dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    tables
        .iter()
        .map(|t| write_atomic(dir, &format!("{}.csv", t.name), &t.to_bytes()?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_have_seventeen_digits() {
        assert_eq!(real(0.1), "1.0000000000000001e-1");
        assert_eq!(real(-2.0), "-2.0000000000000000e0");
        assert_eq!(real(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new("qm_m2", ["x", "Qm_0", "f0_0", "abs_dev"]);
        assert_eq!(t.to_bytes().unwrap(), b"x,Qm_0,f0_0,abs_dev\r\n");
    }

    #[test]
    fn fields_are_quoted() {
        let mut t = Table::new("laws", ["law", "passed"]);
        t.push(vec!["f(x) = f(-x), even".into(), "true".into()]);
        let text = String::from_utf8(t.to_bytes().unwrap()).unwrap();
        assert!(text.contains("\"f(x) = f(-x), even\""));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "a.json", b"one").unwrap();
        let p = write_atomic(dir.path(), "a.json", b"two").unwrap();
        assert_eq!(std::fs::read(p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn unwritable_directory_fails() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("no/such/dir");
        assert!(matches!(write_atomic(&missing, "a.csv", b""), Err(CliError::Io { .. })));
    }
}

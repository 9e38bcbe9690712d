//! `data_dir/MANIFEST`: a `# next_seq N next_file_id M` header line, then
//! one `level file_id min_key max_key entry_count` line per live table.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::config::Key;
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "MANIFEST";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableRecord {
    pub level: u32,
    pub file_id: u64,
    pub min_key: Key,
    pub max_key: Key,
    pub entry_count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub next_seq: u64,
    pub next_file_id: u64,
    pub tables: Vec<TableRecord>,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut out = format!("# next_seq {} next_file_id {}\n", self.next_seq, self.next_file_id);
        for t in &self.tables {
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                t.level, t.file_id, t.min_key, t.max_key, t.entry_count
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Manifest> {
        let bad =
            |line: usize, what: &str| Error::CorruptTable(format!("manifest line {}: {what}", line + 1));
        let mut manifest = Manifest::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                let words: Vec<&str> = header.split_whitespace().collect();
                for pair in words.chunks(2) {
                    if let [name, value] = pair {
                        let value = value.parse().map_err(|_| bad(i, "bad header number"))?;
                        match *name {
                            "next_seq" => manifest.next_seq = value,
                            "next_file_id" => manifest.next_file_id = value,
                            _ => {}
                        }
                    }
                }
                continue;
            }
            let fields: Vec<u64> = line
                .split_whitespace()
                .map(|f| f.parse::<u64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(i, "non-numeric field"))?;
            let [level, file_id, min_key, max_key, entry_count] = fields[..] else {
                return Err(bad(i, "expected 5 fields"));
            };
            if level == 0 || level > u64::from(u32::MAX) || min_key > max_key || entry_count == 0 {
                return Err(bad(i, "invalid table record"));
            }
            manifest.tables.push(TableRecord { level: level as u32, file_id, min_key, max_key, entry_count });
        }
        let max_id = manifest.tables.iter().map(|t| t.file_id + 1).max().unwrap_or(0);
        manifest.next_file_id = manifest.next_file_id.max(max_id);
        Ok(manifest)
    }

    /// Writes a temporary file and renames it over the manifest.
    pub fn store(&self, data_dir: &Path) -> Result<()> {
        let tmp = data_dir.join(format!("{MANIFEST_NAME}.tmp"));
        let mut file = fs::File::create(&tmp)?;
        file.write_all(self.render().as_bytes())?;
        file.sync_data()?;
        drop(file);
        fs::rename(&tmp, data_dir.join(MANIFEST_NAME))?;
        Ok(())
    }

    pub fn load(data_dir: &Path) -> Result<Option<Manifest>> {
        match fs::read_to_string(data_dir.join(MANIFEST_NAME)) {
            Ok(text) => Ok(Some(Manifest::parse(&text)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}

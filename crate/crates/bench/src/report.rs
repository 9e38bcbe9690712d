use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{BenchError, Result};
use crate::experiment::MetricsReport;

pub const COLUMNS: [&str; 25] = [
    "index_kind",
    "boundary",
    "epsilon",
    "sstable_mb",
    "granularity",
    "dataset",
    "workload",
    "n_ops",
    "mean_us",
    "p50_us",
    "p99_us",
    "t_table_lookup_ns",
    "t_predict_ns",
    "t_io_ns",
    "t_bsearch_ns",
    "blocks_per_op",
    "bytes_per_op",
    "index_bytes",
    "bloom_bytes",
    "compaction_total_ms",
    "compaction_train_ms",
    "compaction_index_write_ms",
    "per_level_read_share",
    "per_level_index_bytes",
    "status",
];

/// Columns that do not depend on wall-clock time.
pub const LOGICAL_COLUMNS: [&str; 14] = [
    "index_kind",
    "boundary",
    "epsilon",
    "sstable_mb",
    "granularity",
    "dataset",
    "workload",
    "n_ops",
    "blocks_per_op",
    "bytes_per_op",
    "index_bytes",
    "bloom_bytes",
    "per_level_index_bytes",
    "status",
];

/// One CSV line, typed.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub index_kind: String,
    pub boundary: u64,
    pub epsilon: f64,
    pub sstable_mb: f64,
    pub granularity: String,
    pub dataset: String,
    pub workload: String,
    pub n_ops: u64,
    pub mean_us: f64,
    pub p50_us: f64,
    pub p99_us: f64,
    pub t_table_lookup_ns: u64,
    pub t_predict_ns: u64,
    pub t_io_ns: u64,
    pub t_bsearch_ns: u64,
    pub blocks_per_op: f64,
    pub bytes_per_op: f64,
    pub index_bytes: u64,
    pub bloom_bytes: u64,
    pub compaction_total_ms: f64,
    pub compaction_train_ms: f64,
    pub compaction_index_write_ms: f64,
    pub per_level_read_share: Vec<f64>,
    pub per_level_index_bytes: Vec<u64>,
    pub status: String,
}

impl From<&MetricsReport> for CsvRow {
    fn from(r: &MetricsReport) -> Self {
        CsvRow {
            index_kind: r.index_kind.name().to_string(),
            boundary: r.boundary,
            epsilon: r.epsilon(),
            sstable_mb: r.sstable_bytes as f64 / (1u64 << 20) as f64,
            granularity: r.granularity.to_string(),
            dataset: r.dataset.clone(),
            workload: r.workload.clone(),
            n_ops: r.n_ops(),
            mean_us: r.latency.mean_us,
            p50_us: r.latency.p50_us,
            p99_us: r.latency.p99_us,
            t_table_lookup_ns: r.reads.t_table_lookup_ns,
            t_predict_ns: r.reads.t_predict_ns,
            t_io_ns: r.reads.t_io_ns,
            t_bsearch_ns: r.reads.t_bsearch_ns,
            blocks_per_op: r.blocks_per_op(),
            bytes_per_op: r.bytes_per_op(),
            index_bytes: r.index_bytes(),
            bloom_bytes: r.bloom_bytes,
            compaction_total_ms: r.compaction.total_ms(),
            compaction_train_ms: r.compaction.train_ms(),
            compaction_index_write_ms: r.compaction.index_write_ms(),
            per_level_read_share: r.per_level_read_share(),
            per_level_index_bytes: r.index_bytes_per_level.clone(),
            status: r.status(),
        }
    }
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = record.get(i).ok_or_else(|| BenchError::Parse(format!("missing {}", COLUMNS[i])))?;
    raw.parse().map_err(|_| BenchError::Parse(format!("{} = {raw:?}", COLUMNS[i])))
}

fn list<T: std::str::FromStr>(record: &csv::StringRecord, i: usize) -> Result<Vec<T>> {
    let raw = record.get(i).ok_or_else(|| BenchError::Parse(format!("missing {}", COLUMNS[i])))?;
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(';')
        .map(|v| v.parse().map_err(|_| BenchError::Parse(format!("{} = {raw:?}", COLUMNS[i]))))
        .collect()
}

impl CsvRow {
    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.index_kind.clone(),
            self.boundary.to_string(),
            self.epsilon.to_string(),
            self.sstable_mb.to_string(),
            self.granularity.clone(),
            self.dataset.clone(),
            self.workload.clone(),
            self.n_ops.to_string(),
            self.mean_us.to_string(),
            self.p50_us.to_string(),
            self.p99_us.to_string(),
            self.t_table_lookup_ns.to_string(),
            self.t_predict_ns.to_string(),
            self.t_io_ns.to_string(),
            self.t_bsearch_ns.to_string(),
            self.blocks_per_op.to_string(),
            self.bytes_per_op.to_string(),
            self.index_bytes.to_string(),
            self.bloom_bytes.to_string(),
            self.compaction_total_ms.to_string(),
            self.compaction_train_ms.to_string(),
            self.compaction_index_write_ms.to_string(),
            join(&self.per_level_read_share),
            join(&self.per_level_index_bytes),
            self.status.clone(),
        ]
    }

    pub fn from_record(record: &csv::StringRecord) -> Result<Self> {
        if record.len() != COLUMNS.len() {
            return Err(BenchError::Parse(format!(
                "expected {} fields, found {}",
                COLUMNS.len(),
                record.len()
            )));
        }
        Ok(CsvRow {
            index_kind: field(record, 0)?,
            boundary: field(record, 1)?,
            epsilon: field(record, 2)?,
            sstable_mb: field(record, 3)?,
            granularity: field(record, 4)?,
            dataset: field(record, 5)?,
            workload: field(record, 6)?,
            n_ops: field(record, 7)?,
            mean_us: field(record, 8)?,
            p50_us: field(record, 9)?,
            p99_us: field(record, 10)?,
            t_table_lookup_ns: field(record, 11)?,
            t_predict_ns: field(record, 12)?,
            t_io_ns: field(record, 13)?,
            t_bsearch_ns: field(record, 14)?,
            blocks_per_op: field(record, 15)?,
            bytes_per_op: field(record, 16)?,
            index_bytes: field(record, 17)?,
            bloom_bytes: field(record, 18)?,
            compaction_total_ms: field(record, 19)?,
            compaction_train_ms: field(record, 20)?,
            compaction_index_write_ms: field(record, 21)?,
            per_level_read_share: list(record, 22)?,
            per_level_index_bytes: list(record, 23)?,
            status: field(record, 24)?,
        })
    }

    /// Rendered values of [`LOGICAL_COLUMNS`], in that order.
    pub fn logical_fields(&self) -> Vec<String> {
        let record = self.to_record();
        LOGICAL_COLUMNS
            .iter()
            .map(|name| record[COLUMNS.iter().position(|c| c == name).unwrap()].clone())
            .collect()
    }
}

pub fn write_csv(reports: &[MetricsReport], out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(COLUMNS)?;
    for report in reports {
        writer.write_record(CsvRow::from(report).to_record())?;
    }
    writer.flush()?;
    Ok(())
}

/// Header plus one row per report.
pub fn emit_csv(reports: &[MetricsReport], path: &Path) -> Result<()> {
    if reports.is_empty() {
        return Err(BenchError::Config("no reports to write".to_string()));
    }
    write_csv(reports, File::create(path)?)
}

pub fn read_csv(input: impl Read) -> Result<Vec<CsvRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(COLUMNS) {
        return Err(BenchError::Parse(format!("unexpected header {:?}", header)));
    }
    reader.records().map(|record| CsvRow::from_record(&record?)).collect()
}

pub fn parse_csv(path: &Path) -> Result<Vec<CsvRow>> {
    read_csv(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row() -> CsvRow {
        CsvRow {
            index_kind: "pgm".into(),
            boundary: 64,
            epsilon: 32.0,
            sstable_mb: 4.0,
            granularity: "file".into(),
            dataset: "uniform".into(),
            workload: "point".into(),
            n_ops: 10,
            mean_us: 1.25,
            p50_us: 1.0,
            p99_us: 3.5,
            t_table_lookup_ns: 1,
            t_predict_ns: 2,
            t_io_ns: 3,
            t_bsearch_ns: 4,
            blocks_per_op: 1.7,
            bytes_per_op: 6963.2,
            index_bytes: 1000,
            bloom_bytes: 500,
            compaction_total_ms: 0.0,
            compaction_train_ms: 0.0,
            compaction_index_write_ms: 0.0,
            per_level_read_share: vec![0.25, 0.75],
            per_level_index_bytes: vec![200, 800],
            status: "failed: a, \"quoted\" message".into(),
        }
    }

    fn round_trip(rows: &[CsvRow]) -> Vec<CsvRow> {
        let mut buf = Vec::new();
        {
            let mut writer = csv::Writer::from_writer(&mut buf);
            writer.write_record(COLUMNS).unwrap();
            for r in rows {
                writer.write_record(r.to_record()).unwrap();
            }
        }
        read_csv(buf.as_slice()).unwrap()
    }

    #[test]
    fn header_then_rows() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), COLUMNS.join(",") + "\n");
        assert_eq!(round_trip(&[row()]), vec![row()]);
    }

    #[test]
    fn empty_lists_round_trip() {
        let mut r = row();
        r.per_level_read_share.clear();
        r.per_level_index_bytes.clear();
        assert_eq!(round_trip(&[r.clone()]), vec![r]);
    }

    #[test]
    fn rejects_foreign_header() {
        let text = "a,b\n1,2\n";
        assert!(matches!(read_csv(text.as_bytes()), Err(BenchError::Parse(_))));
    }

    #[test]
    fn logical_fields_follow_column_names() {
        let f = row().logical_fields();
        assert_eq!(f.len(), LOGICAL_COLUMNS.len());
        assert_eq!(f[0], "pgm");
        assert_eq!(f[8], "1.7");
        assert_eq!(f[12], "200;800");
    }

    proptest! {
        #[test]
        fn numeric_fields_round_trip(
            eps in 0u64..1 << 20,
            blocks in any::<f64>().prop_filter("finite", |x| x.is_finite()),
            mean in 0f64..1e9,
            shares in proptest::collection::vec(0f64..1.0, 0..6),
            bytes in proptest::collection::vec(any::<u64>(), 0..6),
        ) {
            let mut r = row();
            r.epsilon = eps as f64 / 2.0;
            r.blocks_per_op = blocks;
            r.mean_us = mean;
            r.per_level_read_share = shares;
            r.per_level_index_bytes = bytes;
            prop_assert_eq!(round_trip(&[r.clone()]), vec![r]);
        }
    }
}

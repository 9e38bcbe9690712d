use std::collections::BTreeMap;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::*;
use crate::config::{IndexKind, IndexParams};

const VALUE: usize = 16;

fn small_config(dir: &Path, kind: IndexKind) -> EngineConfig {
    let mut c = EngineConfig::new(dir);
    c.value_size = VALUE;
    c.block_bytes = 256;
    c.write_buffer_bytes = 64 * 32;
    c.sstable_target_bytes = 32 * 32;
    c.size_ratio = 3;
    c.index_kind = kind;
    c.index_params = IndexParams {
        epsilon: 4,
        fp_block_bytes: 8 * 32,
        rmi_target_boundary: Some(8),
        ..IndexParams::default()
    };
    c
}

fn value(key: Key, salt: u64) -> Vec<u8> {
    let mut v = key.wrapping_mul(31).wrapping_add(salt).to_le_bytes().to_vec();
    v.resize(VALUE, (salt % 251) as u8);
    v
}

/// Random puts and deletes mirrored into an ordered map.
fn drive(db: &Db, oracle: &mut BTreeMap<Key, Vec<u8>>, ops: usize, seed: u64, key_space: u64) {
    let mut rng = StdRng::seed_from_u64(seed);
    for i in 0..ops {
        let key = rng.random_range(0..key_space);
        if rng.random_bool(0.2) {
            db.delete(key).unwrap();
            oracle.remove(&key);
        } else {
            let v = value(key, i as u64);
            db.put(key, &v).unwrap();
            oracle.insert(key, v);
        }
    }
}

fn assert_matches_oracle(db: &Db, oracle: &BTreeMap<Key, Vec<u8>>, key_space: u64, seed: u64) {
    let mut rng = StdRng::seed_from_u64(seed);
    for _ in 0..2_000 {
        let key = rng.random_range(0..key_space + 10);
        assert_eq!(db.get(key).unwrap().as_ref(), oracle.get(&key), "key {key}");
    }
    for _ in 0..200 {
        let from = rng.random_range(0..key_space + 10);
        let n = rng.random_range(0..150);
        let want: Vec<(Key, Vec<u8>)> = oracle.range(from..).take(n).map(|(k, v)| (*k, v.clone())).collect();
        assert_eq!(db.scan(from, n).unwrap(), want, "scan from {from} n {n}");
    }
    let all: Vec<(Key, Vec<u8>)> = oracle.iter().map(|(k, v)| (*k, v.clone())).collect();
    assert_eq!(db.scan(0, usize::MAX).unwrap(), all);
}

fn assert_structure(db: &Db) {
    let version = db.version();
    for (i, level) in version.levels.iter().enumerate() {
        assert!(level.is_disjoint_sorted(), "level {} overlaps", i + 1);
        let cap = level_capacity_bytes(i as u32 + 1, db.config()).unwrap();
        assert!(level.bytes() <= cap, "level {} holds {} > {cap}", i + 1, level.bytes());
        for t in &level.tables {
            assert!(t.path().exists());
            if db.config().granularity == Granularity::PerFile {
                assert!(t.data_bytes() <= db.config().sstable_target_bytes);
            }
        }
        if db.config().granularity == Granularity::PerLevel {
            assert!(level.tables.len() <= 1);
        }
    }
}

#[test]
fn put_get_overwrite_delete() {
    let dir = tempfile::tempdir().unwrap();
    let db = Db::open(small_config(dir.path(), IndexKind::Pgm)).unwrap();
    db.put(7, b"one").unwrap();
    let mut padded = b"one".to_vec();
    padded.resize(VALUE, 0);
    assert_eq!(db.get(7).unwrap(), Some(padded));
    db.put(7, b"two").unwrap();
    assert_eq!(&db.get(7).unwrap().unwrap()[..3], b"two");
    db.delete(7).unwrap();
    assert_eq!(db.get(7).unwrap(), None);
    assert!(matches!(db.put(1, &[0; VALUE + 1]), Err(Error::InvalidInput(_))));
}

#[test]
fn memtable_hits_read_no_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let db = Db::open(small_config(dir.path(), IndexKind::Plr)).unwrap();
    db.put(1, b"x").unwrap();
    let mut stats = ReadStats::default();
    assert!(db.get_with_stats(1, &mut stats).unwrap().is_some());
    assert_eq!(stats.blocks_read, 0);
}

#[test]
fn flush_into_empty_level_one_slices_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(dir.path(), IndexKind::Pgm);
    config.write_buffer_bytes = 1 << 20;
    let db = Db::open(config).unwrap();
    for k in 0..100u64 {
        db.put(k * 3, &value(k, 0)).unwrap();
    }
    db.flush().unwrap();
    let version = db.version();
    // 100 entries · 32 bytes over 1024-byte tables
    assert_eq!(version.level(1).unwrap().tables.len(), 4);
    assert_eq!(db.memtable_len(), 0);
    let records = db.compaction_records();
    assert_eq!(records.len(), 1);
    assert_eq!((records[0].from_level, records[0].to_level), (0, 1));
    assert_eq!(records[0].output_entries, 100);
}

#[test]
fn flush_leaves_disjoint_tables_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(dir.path(), IndexKind::RadixSpline);
    config.write_buffer_bytes = 1 << 20;
    let db = Db::open(config).unwrap();
    for k in 0..64u64 {
        db.put(k, &value(k, 0)).unwrap();
    }
    db.flush().unwrap();
    let before: Vec<(u64, Vec<u8>)> =
        db.version().tables().map(|t| (t.file_id(), fs::read(t.path()).unwrap())).collect();
    for k in 1000..1010u64 {
        db.put(k, &value(k, 1)).unwrap();
    }
    db.flush().unwrap();
    let version = db.version();
    for (id, bytes) in &before {
        let t = version.tables().find(|t| t.file_id() == *id).expect("table kept");
        assert_eq!(&fs::read(t.path()).unwrap(), bytes);
    }
    assert_eq!(version.table_count(), before.len() + 1);
}

#[test]
fn tombstone_in_shallow_level_shadows_deeper_value() {
    let dir = tempfile::tempdir().unwrap();
    let db = Db::open(small_config(dir.path(), IndexKind::FitingTree)).unwrap();
    let mut oracle = BTreeMap::new();
    drive(&db, &mut oracle, 3_000, 1, 500);
    db.put(10_000, &value(1, 1)).unwrap();
    db.flush().unwrap();
    // Push the value below level 1, then delete it from the top.
    for k in 0..2_000u64 {
        db.put(20_000 + k, &value(k, 2)).unwrap();
    }
    db.flush().unwrap();
    db.delete(10_000).unwrap();
    db.flush().unwrap();
    assert_eq!(db.get(10_000).unwrap(), None);
    assert!(db.scan(10_000, 1).unwrap()[0].0 > 10_000);
}

#[test]
fn idle_compaction_does_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let db = Db::open(small_config(dir.path(), IndexKind::Pgm)).unwrap();
    db.put(1, b"a").unwrap();
    db.flush().unwrap();
    let tables: Vec<u64> = db.version().tables().map(|t| t.file_id()).collect();
    assert!(db.maybe_compact().unwrap().is_empty());
    assert_eq!(db.version().tables().map(|t| t.file_id()).collect::<Vec<_>>(), tables);
}

#[test]
fn partial_compaction_replaces_inputs_with_covering_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let db = Db::open(small_config(dir.path(), IndexKind::Pgm)).unwrap();
    let mut rng = StdRng::seed_from_u64(3);
    for i in 0..6_000u64 {
        let k = rng.random_range(0..1_000_000u64);
        db.put(k, &value(k, i)).unwrap();
    }
    let records = db.compaction_records();
    let deep: Vec<&CompactionRecord> = records.iter().filter(|r| r.from_level >= 1).collect();
    assert!(!deep.is_empty());
    for r in deep {
        assert_eq!(r.to_level, r.from_level + 1);
        assert!(r.output_entries <= r.input_entries);
        assert!(r.index_train_ns + r.index_write_ns <= r.total_ns);
        for id in &r.input_tables {
            assert!(!db.version().tables().any(|t| t.file_id() == *id));
        }
    }
    assert_structure(&db);
}

#[test]
fn merged_output_covers_union_of_input_ranges() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(dir.path(), IndexKind::Plr);
    config.write_buffer_bytes = 1 << 20;
    let db = Db::open(config).unwrap();
    // Level 1: two tables [0, 31·2] and [64, 126] at even keys.
    for k in 0..64u64 {
        db.put(k * 2, &value(k, 0)).unwrap();
    }
    db.flush().unwrap();
    let l1 = db.version().level(1).unwrap().tables.clone();
    assert_eq!(l1.len(), 2);
    // Odd keys spanning both tables.
    for k in 10..40u64 {
        db.put(k * 2 + 1, &value(k, 1)).unwrap();
    }
    db.flush().unwrap();
    let r = db.compaction_records().last().unwrap().clone();
    assert_eq!(r.input_tables, l1.iter().map(|t| t.file_id()).collect::<Vec<_>>());
    assert_eq!(r.input_entries, 94);
    let version = db.version();
    let out = &version.level(1).unwrap().tables;
    assert_eq!((out[0].min_key(), out.last().unwrap().max_key()), (0, 126));
    for t in &l1 {
        assert!(!t.path().exists());
    }
}

#[test]
fn write_only_reaches_capacity_steady_state() {
    for granularity in [Granularity::PerFile, Granularity::PerLevel] {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path(), IndexKind::Pgm);
        config.granularity = granularity;
        config.compaction = match granularity {
            Granularity::PerFile => CompactionStyle::Partial,
            Granularity::PerLevel => CompactionStyle::Full,
        };
        let db = Db::open(config).unwrap();
        let mut rng = StdRng::seed_from_u64(4);
        for i in 0..10_000u64 {
            let k = rng.random::<u64>() >> 1;
            db.put(k, &value(k, i)).unwrap();
            if i % 997 == 0 {
                assert_structure(&db);
            }
        }
        assert!(db.version().depth() >= 3);
        assert_structure(&db);
    }
}

#[test]
fn matches_oracle_for_every_kind_and_granularity() {
    for kind in IndexKind::ALL {
        for (granularity, style) in [
            (Granularity::PerFile, CompactionStyle::Partial),
            (Granularity::PerFile, CompactionStyle::Full),
            (Granularity::PerLevel, CompactionStyle::Full),
        ] {
            let dir = tempfile::tempdir().unwrap();
            let mut config = small_config(dir.path(), kind);
            config.granularity = granularity;
            config.compaction = style;
            let db = Db::open(config).unwrap();
            let mut oracle = BTreeMap::new();
            drive(&db, &mut oracle, 8_000, kind as u64 + 10, 3_000);
            assert_structure(&db);
            assert_matches_oracle(&db, &oracle, 3_000, 99);
        }
    }
}

#[test]
fn granularities_answer_identically() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut file = small_config(dirs[0].path(), IndexKind::Rmi);
    file.compaction = CompactionStyle::Partial;
    let mut level = small_config(dirs[1].path(), IndexKind::Rmi);
    level.granularity = Granularity::PerLevel;
    level.compaction = CompactionStyle::Full;
    let (a, b) = (Db::open(file).unwrap(), Db::open(level).unwrap());
    let (mut oa, mut ob) = (BTreeMap::new(), BTreeMap::new());
    drive(&a, &mut oa, 6_000, 5, 2_000);
    drive(&b, &mut ob, 6_000, 5, 2_000);
    for k in 0..2_010 {
        assert_eq!(a.get(k).unwrap(), b.get(k).unwrap());
    }
    assert_eq!(a.scan(0, usize::MAX).unwrap(), b.scan(0, usize::MAX).unwrap());
    let index_bytes = |db: &Db| db.version().index_bytes_per_level().iter().sum::<u64>();
    assert!(index_bytes(&b) < index_bytes(&a));
}

#[test]
fn per_level_granularity_requires_full_merges() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(dir.path(), IndexKind::Pgm);
    config.granularity = Granularity::PerLevel;
    config.compaction = CompactionStyle::Partial;
    assert!(matches!(Db::open(config), Err(Error::InvalidConfig(_))));
}

#[test]
fn reopen_recovers_flushed_state_and_drops_orphans() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), IndexKind::Pgm);
    let mut oracle = BTreeMap::new();
    {
        let db = Db::open(config.clone()).unwrap();
        drive(&db, &mut oracle, 5_000, 6, 2_000);
        db.flush().unwrap();
    }
    let orphan = table_path(dir.path(), 1, 999_999);
    fs::write(&orphan, b"junk").unwrap();
    let db = Db::open(config).unwrap();
    assert!(!orphan.exists());
    assert_matches_oracle(&db, &oracle, 2_000, 7);
    // Writes after reopening keep newer sequence numbers.
    db.put(5, &value(5, 77)).unwrap();
    db.flush().unwrap();
    assert_eq!(db.get(5).unwrap(), Some(value(5, 77)));
}

#[test]
fn point_reads_stay_within_block_bound() {
    let dir = tempfile::tempdir().unwrap();
    let db = Db::open(small_config(dir.path(), IndexKind::Rmi)).unwrap();
    let mut oracle = BTreeMap::new();
    drive(&db, &mut oracle, 6_000, 8, 100_000);
    db.flush().unwrap();
    let mut stats = ReadStats::default();
    for &k in oracle.keys() {
        assert!(db.get_with_stats(k, &mut stats).unwrap().is_some());
    }
    assert_eq!(stats.io_bound_violations, 0);
    let levels = db.version().depth() as u64;
    let bound = db.version().tables().map(|t| t.probe_block_bound()).max().unwrap();
    assert!(stats.max_probe_blocks <= bound);
    assert!(stats.blocks_read <= oracle.len() as u64 * bound * levels);
    let per_level: u64 = stats.per_level.iter().map(|l| l.blocks).sum();
    assert_eq!(per_level, stats.blocks_read);
}

#[test]
fn readers_run_beside_the_writer() {
    let dir = tempfile::tempdir().unwrap();
    let db = Db::open(small_config(dir.path(), IndexKind::Pgm)).unwrap();
    for k in 0..1_000u64 {
        db.put(k, &value(k, 0)).unwrap();
    }
    std::thread::scope(|s| {
        s.spawn(|| {
            for k in 1_000..6_000u64 {
                db.put(k, &value(k, 0)).unwrap();
            }
        });
        for t in 0..3u64 {
            let db = &db;
            s.spawn(move || {
                let mut rng = StdRng::seed_from_u64(t);
                for _ in 0..3_000 {
                    let k = rng.random_range(0..1_000u64);
                    assert_eq!(db.get(k).unwrap(), Some(value(k, 0)));
                    let run = db.scan(k, 5).unwrap();
                    assert_eq!(run[0].0, k);
                    assert!(run.windows(2).all(|w| w[0].0 + 1 == w[1].0));
                }
            });
        }
    });
}

//! Utterance collections and their on-disk formats.
//!
//! Two formats are supported:
//!
//! * a JSONL manifest, one `{"id", "duration_sec", "embedding"}` object per line;
//! * a `LEMB` binary blob holding only the embeddings (f32, little-endian),
//!   paired with a manifest whose rows carry `id` and `duration_sec`.
//!
//! Embeddings are kept as f64 in memory regardless of the storage format.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"LEMB";
pub const BINARY_VERSION: u8 = 1;
const BINARY_HEADER_LEN: usize = 4 + 1 + 4 + 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub id: String,
    pub duration_sec: f64,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    dim: usize,
    records: Vec<UtteranceRecord>,
}

#[derive(Deserialize)]
struct ManifestRow {
    id: String,
    duration_sec: f64,
    #[serde(default)]
    embedding: Option<Vec<f64>>,
}

impl Corpus {
    /// Validates every record invariant. An empty record list yields dimension 0.
    pub fn new(records: Vec<UtteranceRecord>) -> Result<Self> {
        let mut builder = Builder::default();
        for (i, r) in records.into_iter().enumerate() {
            builder.push(i + 1, r)?;
        }
        Ok(builder.finish())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[UtteranceRecord] {
        &self.records
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    /// Row-major `n x d` copy of the embeddings.
    pub fn matrix(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.records.len(), self.dim));
        for (mut row, r) in m.rows_mut().into_iter().zip(&self.records) {
            row.iter_mut()
                .zip(&r.embedding)
                .for_each(|(dst, &src)| *dst = src);
        }
        m
    }

    /// Scale every embedding to unit L2 norm. Zero vectors are left as is.
    pub fn normalized(&self) -> Corpus {
        let records = self
            .records
            .iter()
            .map(|r| UtteranceRecord {
                embedding: l2_normalized(&r.embedding),
                ..r.clone()
            })
            .collect();
        Corpus {
            dim: self.dim,
            records,
        }
    }

    /// Records whose id is not in `exclude`, order preserved.
    pub fn without(&self, exclude: &HashSet<String>) -> Corpus {
        Corpus {
            dim: self.dim,
            records: self
                .records
                .iter()
                .filter(|r| !exclude.contains(&r.id))
                .cloned()
                .collect(),
        }
    }

    /// First `n` records.
    pub fn head(&self, n: usize) -> Corpus {
        Corpus {
            dim: self.dim,
            records: self.records.iter().take(n).cloned().collect(),
        }
    }

    /// Concatenation; ids must stay unique.
    pub fn concat(&self, other: &Corpus) -> Result<Corpus> {
        let mut records = self.records.clone();
        records.extend(other.records.iter().cloned());
        Corpus::new(records)
    }
}

pub fn l2_normalized(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter().map(|x| x / norm).collect()
    } else {
        v.to_vec()
    }
}

#[derive(Default)]
struct Builder {
    dim: Option<usize>,
    seen: HashSet<String>,
    records: Vec<UtteranceRecord>,
}

impl Builder {
    fn push(&mut self, line: usize, r: UtteranceRecord) -> Result<()> {
        if r.id.is_empty() {
            return Err(Error::Malformed {
                line,
                msg: "empty id".into(),
            });
        }
        if !r.duration_sec.is_finite() {
            return Err(Error::NonFinite {
                line,
                field: "duration_sec",
            });
        }
        if r.duration_sec < 0.0 {
            return Err(Error::Malformed {
                line,
                msg: format!("negative duration {}", r.duration_sec),
            });
        }
        if r.embedding.is_empty() {
            return Err(Error::Malformed {
                line,
                msg: "empty embedding".into(),
            });
        }
        if r.embedding.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                line,
                field: "embedding",
            });
        }
        match self.dim {
            None => self.dim = Some(r.embedding.len()),
            Some(d) if d != r.embedding.len() => {
                return Err(Error::LineDimension {
                    line,
                    expected: d,
                    found: r.embedding.len(),
                })
            }
            Some(_) => {}
        }
        if !self.seen.insert(r.id.clone()) {
            return Err(Error::DuplicateId { line, id: r.id });
        }
        self.records.push(r);
        Ok(())
    }

    fn finish(self) -> Corpus {
        Corpus {
            dim: self.dim.unwrap_or(0),
            records: self.records,
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

/// Parse JSONL rows. Blank lines are skipped; line numbers are 1-based.
fn read_rows(path: &Path) -> Result<Vec<(usize, ManifestRow)>> {
    let reader = BufReader::new(open(path)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ManifestRow = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            line: line_no,
            msg: e.to_string(),
        })?;
        rows.push((line_no, row));
    }
    Ok(rows)
}

/// Load a JSONL manifest in file order.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Corpus> {
    let mut builder = Builder::default();
    for (line, row) in read_rows(path.as_ref())? {
        let embedding = row.embedding.ok_or_else(|| Error::Malformed {
            line,
            msg: "missing embedding".into(),
        })?;
        builder.push(
            line,
            UtteranceRecord {
                id: row.id,
                duration_sec: row.duration_sec,
                embedding,
            },
        )?;
    }
    Ok(builder.finish())
}

/// Load ids and durations from a manifest and embeddings from a `LEMB` blob.
/// Any `embedding` key in the manifest rows is ignored.
pub fn load_binary_embeddings(
    manifest_path: impl AsRef<Path>,
    blob_path: impl AsRef<Path>,
) -> Result<Corpus> {
    let rows = read_rows(manifest_path.as_ref())?;
    let blob_path = blob_path.as_ref();
    let mut bytes = Vec::new();
    open(blob_path)?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(blob_path, e))?;
    let (dim, embeddings) = decode_blob(&bytes)?;
    if embeddings.len() != rows.len() {
        return Err(Error::Binary(format!(
            "blob holds {} records but manifest has {} rows",
            embeddings.len(),
            rows.len()
        )));
    }
    let mut builder = Builder::default();
    if !rows.is_empty() {
        builder.dim = Some(dim);
    }
    for ((line, row), embedding) in rows.into_iter().zip(embeddings) {
        builder.push(
            line,
            UtteranceRecord {
                id: row.id,
                duration_sec: row.duration_sec,
                embedding,
            },
        )?;
    }
    Ok(builder.finish())
}

fn decode_blob(bytes: &[u8]) -> Result<(usize, Vec<Vec<f64>>)> {
    if bytes.len() < BINARY_HEADER_LEN {
        return Err(Error::Binary("truncated header".into()));
    }
    if &bytes[..4] != BINARY_MAGIC {
        return Err(Error::Binary("bad magic".into()));
    }
    if bytes[4] != BINARY_VERSION {
        return Err(Error::Binary(format!("unsupported version {}", bytes[4])));
    }
    let dim = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[9..17].try_into().unwrap());
    let payload = &bytes[BINARY_HEADER_LEN..];
    let expected = (count as u128) * (dim as u128) * 4;
    if (payload.len() as u128) < expected {
        return Err(Error::Binary(format!(
            "truncated payload: header declares {count} x {dim} floats, found {} bytes",
            payload.len()
        )));
    }
    if (payload.len() as u128) > expected {
        return Err(Error::Binary("trailing bytes after payload".into()));
    }
    if dim == 0 && count > 0 {
        return Err(Error::Binary("zero dimension".into()));
    }
    let embeddings = payload
        .chunks_exact(4 * dim.max(1))
        .take(count as usize)
        .map(|row| {
            row.chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                .collect()
        })
        .collect();
    Ok((dim, embeddings))
}

/// Write the manifest as JSONL. Floats use shortest round-trip formatting, so
/// reloading yields bit-identical values.
pub fn write_manifest(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(create(path)?);
    for r in &corpus.records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write embeddings as a `LEMB` blob. Values are narrowed to f32.
pub fn write_binary_embeddings(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dim = u32::try_from(corpus.dim)
        .map_err(|_| Error::Binary("dimension exceeds u32".into()))?;
    let mut w = BufWriter::new(create(path)?);
    let mut header = Vec::with_capacity(BINARY_HEADER_LEN);
    header.extend_from_slice(BINARY_MAGIC);
    header.push(BINARY_VERSION);
    header.extend_from_slice(&dim.to_le_bytes());
    header.extend_from_slice(&(corpus.len() as u64).to_le_bytes());
    w.write_all(&header).map_err(|e| Error::io(path, e))?;
    for r in &corpus.records {
        for &v in &r.embedding {
            w.write_all(&(v as f32).to_le_bytes())
                .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Sum of durations in seconds.
pub fn total_duration<'a>(records: impl IntoIterator<Item = &'a UtteranceRecord>) -> f64 {
    records.into_iter().map(|r| r.duration_sec).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn rec(id: &str, dur: f64, emb: &[f64]) -> UtteranceRecord {
        UtteranceRecord {
            id: id.into(),
            duration_sec: dur,
            embedding: emb.to_vec(),
        }
    }

    fn write_lines(dir: &tempfile::TempDir, name: &str, lines: &[&str]) -> std::path::PathBuf {
        let p = dir.path().join(name);
        let mut f = File::create(&p).unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        p
    }

    #[test]
    fn loads_in_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_lines(
            &dir,
            "m.jsonl",
            &[
                r#"{"id":"c","duration_sec":1.5,"embedding":[1,2,3,4]}"#,
                r#"{"id":"a","duration_sec":2.0,"embedding":[0,0,0,0]}"#,
                r#"{"id":"b","duration_sec":0.0,"embedding":[-1,0.5,2,9]}"#,
            ],
        );
        let c = load_manifest(&p).unwrap();
        assert_eq!(c.dim(), 4);
        assert_eq!(c.ids().collect::<Vec<_>>(), vec!["c", "a", "b"]);
        assert_eq!(c.records()[2].embedding, vec![-1.0, 0.5, 2.0, 9.0]);
    }

    #[test]
    fn duplicate_id_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_lines(
            &dir,
            "m.jsonl",
            &[
                r#"{"id":"utt1","duration_sec":1,"embedding":[1]}"#,
                r#"{"id":"utt2","duration_sec":1,"embedding":[1]}"#,
                r#"{"id":"utt1","duration_sec":1,"embedding":[2]}"#,
            ],
        );
        match load_manifest(&p) {
            Err(Error::DuplicateId { line, id }) => {
                assert_eq!(id, "utt1");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let e512 = serde_json::to_string(&vec![0.25f64; 512]).unwrap();
        let e511 = serde_json::to_string(&vec![0.25f64; 511]).unwrap();
        let l1 = format!(r#"{{"id":"a","duration_sec":1,"embedding":{e512}}}"#);
        let l2 = format!(r#"{{"id":"b","duration_sec":1,"embedding":{e512}}}"#);
        let l3 = format!(r#"{{"id":"c","duration_sec":1,"embedding":{e511}}}"#);
        let p = write_lines(&dir, "m.jsonl", &[&l1, &l2, &l3]);
        match load_manifest(&p) {
            Err(Error::LineDimension {
                line,
                expected,
                found,
            }) => assert_eq!((line, expected, found), (3, 512, 511)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_lines(&dir, "a.jsonl", &[r#"{"id":"a","duration_sec":-1,"embedding":[1]}"#]);
        assert!(matches!(load_manifest(&p), Err(Error::Malformed { line: 1, .. })));
        let p = write_lines(&dir, "b.jsonl", &[r#"{"id":"","duration_sec":1,"embedding":[1]}"#]);
        assert!(matches!(load_manifest(&p), Err(Error::Malformed { .. })));
        let p = write_lines(&dir, "c.jsonl", &[r#"{"id":"a","duration_sec":1,"embedding":[1"#]);
        assert!(matches!(load_manifest(&p), Err(Error::Malformed { line: 1, .. })));
        let p = write_lines(&dir, "d.jsonl", &[r#"{"id":"a","duration_sec":1}"#]);
        assert!(matches!(load_manifest(&p), Err(Error::Malformed { .. })));
        // JSON has no NaN literal, but an in-memory record can carry one
        let e = Corpus::new(vec![rec("x", 1.0, &[f64::NAN])]).unwrap_err();
        assert!(matches!(e, Error::NonFinite { field: "embedding", .. }));
        let e = Corpus::new(vec![rec("x", f64::INFINITY, &[1.0])]).unwrap_err();
        assert!(matches!(e, Error::NonFinite { field: "duration_sec", .. }));
    }

    #[test]
    fn empty_corpus_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.jsonl");
        write_manifest(&Corpus::default(), &p).unwrap();
        assert_eq!(std::fs::read(&p).unwrap().len(), 0);
        assert_eq!(load_manifest(&p).unwrap(), Corpus::default());
    }

    #[test]
    fn large_round_trip_keeps_full_precision() {
        let mut rng = crate::numcore::Rng::new(11);
        let records: Vec<_> = (0..1000)
            .map(|i| {
                let emb: Vec<f64> = (0..8).map(|_| rng.gaussian()).collect();
                rec(&format!("u{i:04}"), 5.0 + 20.0 * rng.uniform(), &emb)
            })
            .collect();
        let c = Corpus::new(records).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("big.jsonl");
        write_manifest(&c, &p).unwrap();
        let back = load_manifest(&p).unwrap();
        for (a, b) in c.records().iter().zip(back.records()) {
            assert_eq!(a.duration_sec.to_bits(), b.duration_sec.to_bits());
            for (x, y) in a.embedding.iter().zip(&b.embedding) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(c, back);
    }

    fn blob(dim: u32, count: u64, floats: &[f32]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(b"LEMB");
        b.push(1);
        b.extend_from_slice(&dim.to_le_bytes());
        b.extend_from_slice(&count.to_le_bytes());
        for f in floats {
            b.extend_from_slice(&f.to_le_bytes());
        }
        b
    }

    #[test]
    fn binary_load() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_lines(
            &dir,
            "m.jsonl",
            &[r#"{"id":"a","duration_sec":3}"#, r#"{"id":"b","duration_sec":4}"#],
        );
        let bp = dir.path().join("e.lemb");
        std::fs::write(&bp, blob(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.5])).unwrap();
        let c = load_binary_embeddings(&m, &bp).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.dim(), 3);
        assert_eq!(c.records()[1].embedding, vec![4.0, 5.0, 6.5]);
    }

    #[test]
    fn binary_errors() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<String> = (0..5)
            .map(|i| format!(r#"{{"id":"u{i}","duration_sec":1}}"#))
            .collect();
        let rows: Vec<&str> = rows.iter().map(String::as_str).collect();
        let m = write_lines(&dir, "m.jsonl", &rows);
        let bp = dir.path().join("e.lemb");

        std::fs::write(&bp, blob(1, 5, &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let e = load_binary_embeddings(&m, &bp).unwrap_err();
        assert!(e.to_string().contains("truncated"), "{e}");

        let mut bad = blob(1, 5, &[0.0; 5]);
        bad[0] = b'X';
        std::fs::write(&bp, bad).unwrap();
        assert!(load_binary_embeddings(&m, &bp).unwrap_err().to_string().contains("magic"));

        let mut bad = blob(1, 5, &[0.0; 5]);
        bad[4] = 2;
        std::fs::write(&bp, bad).unwrap();
        assert!(load_binary_embeddings(&m, &bp).unwrap_err().to_string().contains("version"));

        std::fs::write(&bp, blob(1, 4, &[0.0; 4])).unwrap();
        assert!(load_binary_embeddings(&m, &bp).unwrap_err().to_string().contains("manifest"));
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let mut rng = crate::numcore::Rng::new(5);
        let records: Vec<_> = (0..20)
            .map(|i| {
                let emb: Vec<f64> = (0..16).map(|_| rng.gaussian() as f32 as f64).collect();
                rec(&format!("u{i}"), 1.0 + i as f64, &emb)
            })
            .collect();
        let c = Corpus::new(records).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.jsonl");
        let b = dir.path().join("e.lemb");
        write_manifest(&c, &m).unwrap();
        write_binary_embeddings(&c, &b).unwrap();
        let back = load_binary_embeddings(&m, &b).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn durations_sum() {
        assert_eq!(total_duration(&[]), 0.0);
        let rs = [rec("a", 15.535, &[0.0]), rec("b", 15.536, &[0.0])];
        assert!((total_duration(&rs) - 31.071).abs() < 1e-12);
        assert_eq!(total_duration(&[rec("a", 3600.0, &[0.0])]), 3600.0);
    }

    #[test]
    fn normalize_is_opt_in() {
        let c = Corpus::new(vec![rec("a", 1.0, &[3.0, 4.0]), rec("z", 1.0, &[0.0, 0.0])]).unwrap();
        assert_eq!(c.records()[0].embedding, vec![3.0, 4.0]);
        let n = c.normalized();
        assert_eq!(n.records()[0].embedding, vec![0.6, 0.8]);
        assert_eq!(n.records()[1].embedding, vec![0.0, 0.0]);
    }

    proptest::proptest! {
        #[test]
        fn total_duration_permutation_invariant_and_additive(
            ds in proptest::collection::vec(0.0f64..100.0, 0..30),
            split in 0usize..30,
        ) {
            let rs: Vec<_> = ds.iter().enumerate().map(|(i, &d)| rec(&i.to_string(), d, &[0.0])).collect();
            let mut rev = rs.clone();
            rev.reverse();
            let a = total_duration(&rs);
            proptest::prop_assert!((a - total_duration(&rev)).abs() <= 1e-9 * (1.0 + a));
            let k = split.min(rs.len());
            let parts = total_duration(&rs[..k]) + total_duration(&rs[k..]);
            proptest::prop_assert!((a - parts).abs() <= 1e-9 * (1.0 + a));
        }
    }
}

//! Append-only store of evaluated runs.
//!
//! Layout under the store root:
//!
//! * `runs.log`: one record per line, `LLLLLLLL CCCCCCCC <json>\n`, where `L`
//!   is the payload length and `C` its CRC-32, both as 8 hex digits. The
//!   payload is a compact JSON `{"run": .., "report": ..}`.
//! * `index.json`: sidecar index, rebuilt by a full scan whenever it does not
//!   describe the current log length.
//! * `quarantine/<offset>.bin`: copies of damaged frames found while scanning.
//!
//! The log is only ever appended to. A frame cut short by a crash stays in
//! place and is skipped; the next append starts on a fresh line.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interchange::{run_violations, RunParams, RunRecord, Source};
use crate::metrics::MetricReport;
use crate::stats::{unique_counts, UniqueCounts};

const LOG_FILE: &str = "runs.log";
const INDEX_FILE: &str = "index.json";
const QUARANTINE_DIR: &str = "quarantine";
const HEADER_LEN: usize = 18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRecord {
    pub run: RunRecord,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub run_id: String,
    pub offset: u64,
    /// Frame length including header and trailing newline.
    pub len: u64,
    pub corpus_id: String,
    pub source: Source,
    pub params: RunParams,
    pub report: MetricReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quarantined {
    pub offset: u64,
    pub len: u64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Index {
    file_len: u64,
    entries: Vec<IndexEntry>,
    quarantined: Vec<Quarantined>,
}

fn frame(payload: &[u8]) -> Vec<u8> {
    let mut out = format!("{:08x} {:08x} ", payload.len(), crc32fast::hash(payload)).into_bytes();
    out.extend_from_slice(payload);
    out.push(b'\n');
    out
}

/// Payload of one line (without its newline) if the frame is intact.
fn unframe(line: &[u8]) -> Option<&[u8]> {
    if line.len() < HEADER_LEN || line[8] != b' ' || line[17] != b' ' {
        return None;
    }
    let hex = |b: &[u8]| std::str::from_utf8(b).ok().and_then(|s| u32::from_str_radix(s, 16).ok());
    let len = hex(&line[..8])? as usize;
    let crc = hex(&line[9..17])?;
    let payload = &line[HEADER_LEN..];
    (payload.len() == len && crc32fast::hash(payload) == crc).then_some(payload)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    MinClusterSize,
    MinTopicSize,
    NNeighbors,
    Threshold,
}

impl Param {
    fn get(self, params: &RunParams) -> Option<f64> {
        match self {
            Param::MinClusterSize => params.min_cluster_size.map(|v| v as f64),
            Param::MinTopicSize => params.min_topic_size.map(|v| v as f64),
            Param::NNeighbors => params.n_neighbors.map(|v| v as f64),
            Param::Threshold => params.threshold,
        }
    }
}

impl std::str::FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min_cluster_size" => Ok(Param::MinClusterSize),
            "min_topic_size" => Ok(Param::MinTopicSize),
            "n_neighbors" => Ok(Param::NNeighbors),
            "threshold" => Ok(Param::Threshold),
            _ => Err(Error::Config(format!("unknown parameter {s:?}"))),
        }
    }
}

/// Inclusive range on a run parameter. Runs without the parameter never match.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRange {
    pub param: Param,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Filter {
    pub corpus_id: Option<String>,
    pub source: Option<Source>,
    pub params: Vec<ParamRange>,
}

impl Filter {
    pub fn matches(&self, entry: &IndexEntry) -> bool {
        self.corpus_id.as_ref().is_none_or(|c| *c == entry.corpus_id)
            && self.source.is_none_or(|s| s == entry.source)
            && self.params.iter().all(|r| {
                r.param
                    .get(&entry.params)
                    .is_some_and(|v| r.lo <= v && v <= r.hi)
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    Corpus,
    Source,
}

impl std::str::FromStr for GroupKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corpus" | "corpus_id" => Ok(GroupKey::Corpus),
            "source" => Ok(GroupKey::Source),
            _ => Err(Error::Config(format!("unknown group key {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table6Row {
    pub group: String,
    pub counts: UniqueCounts,
}

pub struct Runstore {
    root: PathBuf,
    index: Index,
    by_id: HashMap<String, usize>,
    writable: bool,
}

impl Runstore {
    /// Opens (creating if needed) a store for writing. Damaged frames are
    /// copied to the quarantine directory and the index is refreshed.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let log = root.join(LOG_FILE);
        if !log.exists() {
            File::create(&log).map_err(|e| Error::io(&log, e))?;
        }
        Self::load(root, true)
    }

    /// Opens an existing store without modifying anything on disk.
    pub fn open_readonly(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let log = root.join(LOG_FILE);
        if !log.exists() {
            return Err(Error::io(
                &log,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no run store here"),
            ));
        }
        Self::load(root, false)
    }

    fn load(root: PathBuf, writable: bool) -> Result<Self> {
        let log = root.join(LOG_FILE);
        let file_len = fs::metadata(&log).map_err(|e| Error::io(&log, e))?.len();
        let index = match Self::read_index(&root) {
            Some(index) if index.file_len == file_len => index,
            _ => {
                let index = Self::scan(&root, writable)?;
                if writable {
                    Self::write_index(&root, &index)?;
                }
                index
            }
        };
        let by_id = index
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.run_id.clone(), i))
            .collect();
        Ok(Runstore {
            root,
            index,
            by_id,
            writable,
        })
    }

    fn read_index(root: &Path) -> Option<Index> {
        let bytes = fs::read(root.join(INDEX_FILE)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    fn write_index(root: &Path, index: &Index) -> Result<()> {
        let path = root.join(INDEX_FILE);
        let tmp = root.join("index.json.tmp");
        fs::write(&tmp, serde_json::to_vec(index).expect("index serializes")).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    /// Rebuilds the index from the log.
    fn scan(root: &Path, quarantine: bool) -> Result<Index> {
        let log = root.join(LOG_FILE);
        let bytes = fs::read(&log).map_err(|e| Error::io(&log, e))?;
        let mut index = Index {
            file_len: bytes.len() as u64,
            ..Index::default()
        };
        let mut seen = HashMap::new();
        let mut pos = 0usize;
        while pos < bytes.len() {
            let end = bytes[pos..].iter().position(|&b| b == b'\n').map(|i| pos + i);
            let line_end = end.unwrap_or(bytes.len());
            let frame_len = (end.map_or(line_end, |e| e + 1) - pos) as u64;
            let record = end
                .and_then(|_| unframe(&bytes[pos..line_end]))
                .and_then(|p| serde_json::from_slice::<StoredRecord>(p).ok());
            match record {
                Some(rec) if !seen.contains_key(&rec.run.run_id) => {
                    seen.insert(rec.run.run_id.clone(), ());
                    index.entries.push(IndexEntry {
                        run_id: rec.run.run_id,
                        offset: pos as u64,
                        len: frame_len,
                        corpus_id: rec.run.corpus_id,
                        source: rec.run.source,
                        params: rec.run.params,
                        report: rec.report,
                    });
                }
                _ => {
                    log::warn!("run store: damaged record at byte {pos} ({frame_len} bytes) quarantined");
                    if quarantine {
                        let dir = root.join(QUARANTINE_DIR);
                        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                        let path = dir.join(format!("{pos}.bin"));
                        fs::write(&path, &bytes[pos..line_end]).map_err(|e| Error::io(&path, e))?;
                    }
                    index.quarantined.push(Quarantined {
                        offset: pos as u64,
                        len: frame_len,
                    });
                }
            }
            pos = line_end + 1;
        }
        Ok(index)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.index.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.entries.is_empty()
    }

    pub fn log_len(&self) -> u64 {
        self.index.file_len
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.index.entries
    }

    pub fn quarantined(&self) -> &[Quarantined] {
        &self.index.quarantined
    }

    pub fn contains(&self, run_id: &str) -> bool {
        self.by_id.contains_key(run_id)
    }

    /// Appends a run and its report. The run must pass its internal checks
    /// and its id must be new; on error the store is unchanged.
    pub fn append_run(&mut self, run: &RunRecord, report: &MetricReport) -> Result<String> {
        if !self.writable {
            return Err(Error::Config("run store was opened read-only".into()));
        }
        run_violations(run, None).into_result()?;
        if report.run_id != run.run_id {
            return Err(Error::invalid(format!(
                "report is for run {:?}, not {:?}",
                report.run_id, run.run_id
            )));
        }
        if self.contains(&run.run_id) {
            return Err(Error::Conflict(run.run_id.clone()));
        }

        let record = StoredRecord {
            run: run.clone(),
            report: report.clone(),
        };
        let payload = serde_json::to_vec(&record).expect("record serializes");
        let log = self.root.join(LOG_FILE);
        let mut file = OpenOptions::new()
            .append(true)
            .read(true)
            .open(&log)
            .map_err(|e| Error::io(&log, e))?;
        let mut offset = file.metadata().map_err(|e| Error::io(&log, e))?.len();
        let mut bytes = Vec::with_capacity(payload.len() + HEADER_LEN + 2);
        if offset > 0 && !ends_with_newline(&mut file, offset).map_err(|e| Error::io(&log, e))? {
            bytes.push(b'\n');
            offset += 1;
        }
        let framed = frame(&payload);
        let len = framed.len() as u64;
        bytes.extend_from_slice(&framed);
        file.write_all(&bytes).map_err(|e| Error::io(&log, e))?;
        file.sync_data().map_err(|e| Error::io(&log, e))?;

        self.index.file_len = offset + len;
        self.by_id.insert(run.run_id.clone(), self.index.entries.len());
        self.index.entries.push(IndexEntry {
            run_id: run.run_id.clone(),
            offset,
            len,
            corpus_id: run.corpus_id.clone(),
            source: run.source,
            params: run.params.clone(),
            report: report.clone(),
        });
        Self::write_index(&self.root, &self.index)?;
        Ok(run.run_id.clone())
    }

    /// Reads a stored record back from the log.
    pub fn get(&self, run_id: &str) -> Result<Option<StoredRecord>> {
        let Some(&i) = self.by_id.get(run_id) else {
            return Ok(None);
        };
        let entry = &self.index.entries[i];
        let log = self.root.join(LOG_FILE);
        let mut file = File::open(&log).map_err(|e| Error::io(&log, e))?;
        let mut buf = vec![0u8; entry.len as usize];
        file.seek(SeekFrom::Start(entry.offset))
            .and_then(|_| file.read_exact(&mut buf))
            .map_err(|e| Error::io(&log, e))?;
        let line = buf.strip_suffix(b"\n").unwrap_or(&buf);
        let payload = unframe(line).ok_or_else(|| Error::Format {
            line: 0,
            column: 0,
            message: format!("stored record {run_id} failed its checksum"),
        })?;
        serde_json::from_slice(payload)
            .map(Some)
            .map_err(|e| Error::from_json(&e))
    }

    /// Reports of matching runs in insertion order.
    pub fn query(&self, filter: &Filter) -> Vec<MetricReport> {
        self.index
            .entries
            .iter()
            .filter(|e| filter.matches(e))
            .map(|e| e.report.clone())
            .collect()
    }

    /// Unique-value counts of `metric` per group, groups in lexical order.
    pub fn table6(&self, group_keys: &[GroupKey], metric: &str, precision: u32) -> Result<Vec<Table6Row>> {
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for e in &self.index.entries {
            let value = e
                .report
                .field(metric)
                .ok_or_else(|| Error::Config(format!("unknown metric field {metric:?}")))?;
            let label = if group_keys.is_empty() {
                "all".to_string()
            } else {
                group_keys
                    .iter()
                    .map(|k| match k {
                        GroupKey::Corpus => format!("corpus={}", e.corpus_id),
                        GroupKey::Source => format!("source={}", e.source),
                    })
                    .collect::<Vec<_>>()
                    .join(",")
            };
            groups.entry(label).or_default().push(value);
        }
        Ok(groups
            .into_iter()
            .map(|(group, values)| Table6Row {
                group,
                counts: unique_counts(&values, precision),
            })
            .collect())
    }
}

fn ends_with_newline(file: &mut File, len: u64) -> std::io::Result<bool> {
    let mut last = [0u8; 1];
    file.seek(SeekFrom::Start(len - 1))?;
    file.read_exact(&mut last)?;
    Ok(last[0] == b'\n')
}

pub fn write_table6_csv<W: Write>(out: W, metric: &str, rows: &[Table6Row]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::io("<csv>", e.into());
    w.write_record(["group", "metric", "total", "unique", "unique_pct"]).map_err(io)?;
    for r in rows {
        w.write_record([
            r.group.clone(),
            metric.to_string(),
            r.counts.total.to_string(),
            r.counts.unique.to_string(),
            format!("{}%", r.counts.pct),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

//! Snapshot file formats.
//!
//! CSV: one header line
//! `# koopman-snapshots n=<n> m=<m> sequential=<bool> dt=<value|none>`, then
//! `n` rows for the inputs block followed by `n` rows for the images block,
//! each row holding `m` comma-separated values (columns are snapshots).
//!
//! Binary (little endian): magic `KSNP`, version byte, `n: u64`, `m: u64`,
//! flags byte (bit 0 sequential, bit 1 dt present), `dt: f64`, then inputs and
//! images as row-major `f64`.

use std::fs;
use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{KoopmanError, Result};
use crate::snapshots::SnapshotSet;

const MAGIC: &[u8; 4] = b"KSNP";
const VERSION: u8 = 1;
const HEADER_TAG: &str = "# koopman-snapshots";
const FLAG_SEQUENTIAL: u8 = 0b01;
const FLAG_DT: u8 = 0b10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotFormat {
    Csv,
    Bin,
}

impl SnapshotFormat {
    /// Picks the format from the file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("csv") => Ok(SnapshotFormat::Csv),
            Some("bin") => Ok(SnapshotFormat::Bin),
            _ => Err(KoopmanError::Format(format!(
                "cannot infer snapshot format from {}; use a .csv/.bin extension or pass the format explicitly",
                path.display()
            ))),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            SnapshotFormat::Csv => "csv",
            SnapshotFormat::Bin => "bin",
        }
    }
}

impl std::str::FromStr for SnapshotFormat {
    type Err = KoopmanError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(SnapshotFormat::Csv),
            "bin" => Ok(SnapshotFormat::Bin),
            other => Err(KoopmanError::Format(format!("unknown snapshot format '{other}' (expected csv or bin)"))),
        }
    }
}

pub fn load(path: &Path, format: Option<SnapshotFormat>) -> Result<SnapshotSet> {
    let format = match format {
        Some(f) => f,
        None => SnapshotFormat::from_path(path)?,
    };
    let bytes = fs::read(path).map_err(|e| KoopmanError::io(path, e))?;
    let name = path.display().to_string();
    match format {
        SnapshotFormat::Csv => {
            let text = String::from_utf8(bytes).map_err(|_| KoopmanError::Parse {
                path: name.clone(),
                line: 0,
                message: "file is not valid UTF-8".into(),
            })?;
            decode_csv(&text, &name)
        }
        SnapshotFormat::Bin => decode_bin(&bytes, &name),
    }
}

pub fn store(set: &SnapshotSet, path: &Path, format: Option<SnapshotFormat>) -> Result<()> {
    let format = match format {
        Some(f) => f,
        None => SnapshotFormat::from_path(path)?,
    };
    let bytes = match format {
        SnapshotFormat::Csv => encode_csv(set).into_bytes(),
        SnapshotFormat::Bin => encode_bin(set),
    };
    write_atomic(path, &bytes)
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| KoopmanError::io(path, std::io::Error::other("path has no file name")))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| KoopmanError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| KoopmanError::io(path, e))
}

pub fn encode_csv(set: &SnapshotSet) -> String {
    let (n, m) = (set.state_dim(), set.len());
    let dt = set.dt().map_or_else(|| "none".to_string(), |d| format!("{d:e}"));
    let mut out = format!("{HEADER_TAG} n={n} m={m} sequential={} dt={dt}\n", set.is_sequential());
    for block in [set.inputs(), set.images()] {
        for i in 0..n {
            let row: Vec<String> = (0..m).map(|k| format!("{:e}", block[(i, k)])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

struct Header {
    n: usize,
    m: usize,
    sequential: bool,
    dt: Option<f64>,
}

fn parse_header(line: &str, name: &str) -> Result<Header> {
    let err = |message: String| KoopmanError::Parse {
        path: name.to_string(),
        line: 1,
        message,
    };
    let rest = line
        .strip_prefix(HEADER_TAG)
        .ok_or_else(|| err(format!("malformed header: expected '{HEADER_TAG} n=.. m=.. sequential=.. dt=..'")))?;
    let (mut n, mut m, mut sequential, mut dt) = (None, None, None, None);
    for field in rest.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| err(format!("malformed header field '{field}'")))?;
        match key {
            "n" => n = Some(value.parse::<usize>().map_err(|_| err(format!("bad n '{value}'")))?),
            "m" => m = Some(value.parse::<usize>().map_err(|_| err(format!("bad m '{value}'")))?),
            "sequential" => {
                sequential = Some(value.parse::<bool>().map_err(|_| err(format!("bad sequential flag '{value}'")))?)
            }
            "dt" => {
                dt = Some(if value == "none" {
                    None
                } else {
                    Some(value.parse::<f64>().map_err(|_| err(format!("bad dt '{value}'")))?)
                })
            }
            other => return Err(err(format!("unknown header field '{other}'"))),
        }
    }
    Ok(Header {
        n: n.ok_or_else(|| err("header is missing n".into()))?,
        m: m.ok_or_else(|| err("header is missing m".into()))?,
        sequential: sequential.ok_or_else(|| err("header is missing sequential".into()))?,
        dt: dt.ok_or_else(|| err("header is missing dt".into()))?,
    })
}

pub fn decode_csv(text: &str, name: &str) -> Result<SnapshotSet> {
    let mut lines = text.lines();
    let header_line = loop {
        match lines.next() {
            None => return Err(KoopmanError::NoSnapshots(name.to_string())),
            Some(l) if l.trim().is_empty() => continue,
            Some(l) => break l,
        }
    };
    let header = parse_header(header_line.trim(), name)?;
    if header.m == 0 {
        return Err(KoopmanError::NoSnapshots(name.to_string()));
    }
    let body_start = text.find('\n').map_or(text.len(), |i| i + 1);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(&text.as_bytes()[body_start..]);
    let mut inputs = Mat::<f64>::zeros(header.n, header.m);
    let mut images = Mat::<f64>::zeros(header.n, header.m);
    let mut row = 0;
    for record in reader.records() {
        let record = record.map_err(|e| KoopmanError::Parse {
            path: name.to_string(),
            line: e.position().map_or(0, |p| p.line() as usize + 1),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(row + 2, |p| p.line() as usize + 1);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if row >= 2 * header.n {
            return Err(KoopmanError::Parse {
                path: name.to_string(),
                line,
                message: format!("unexpected extra row (header declares 2 x {} rows)", header.n),
            });
        }
        if record.len() != header.m {
            return Err(KoopmanError::Parse {
                path: name.to_string(),
                line,
                message: format!("row has {} columns, expected m = {}", record.len(), header.m),
            });
        }
        let target = if row < header.n { &mut inputs } else { &mut images };
        let i = row % header.n;
        for (k, cell) in record.iter().enumerate() {
            target[(i, k)] = cell.parse::<f64>().map_err(|_| KoopmanError::Parse {
                path: name.to_string(),
                line,
                message: format!("non-numeric cell '{cell}' in column {}", k + 1),
            })?;
        }
        row += 1;
    }
    if row != 2 * header.n {
        return Err(KoopmanError::Parse {
            path: name.to_string(),
            line: row + 2,
            message: format!(
                "inputs/images blocks incomplete: found {row} rows, expected {} (n = {} each)",
                2 * header.n,
                header.n
            ),
        });
    }
    SnapshotSet::from_parts(inputs, images, header.sequential, header.dt)
}

pub fn encode_bin(set: &SnapshotSet) -> Vec<u8> {
    let (n, m) = (set.state_dim(), set.len());
    let mut out = Vec::with_capacity(4 + 1 + 16 + 1 + 8 + 16 * n * m);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(m as u64).to_le_bytes());
    let mut flags = 0;
    if set.is_sequential() {
        flags |= FLAG_SEQUENTIAL;
    }
    if set.dt().is_some() {
        flags |= FLAG_DT;
    }
    out.push(flags);
    out.extend_from_slice(&set.dt().unwrap_or(0.0).to_le_bytes());
    for block in [set.inputs(), set.images()] {
        for i in 0..n {
            for k in 0..m {
                out.extend_from_slice(&block[(i, k)].to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_bin(bytes: &[u8], name: &str) -> Result<SnapshotSet> {
    if bytes.is_empty() {
        return Err(KoopmanError::NoSnapshots(name.to_string()));
    }
    let format_err = |msg: String| KoopmanError::Format(format!("{name}: {msg}"));
    const HEADER_LEN: usize = 4 + 1 + 8 + 8 + 1 + 8;
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(format_err("not a snapshot file (bad magic or truncated header)".into()));
    }
    if bytes[4] != VERSION {
        return Err(format_err(format!("unsupported version {}", bytes[4])));
    }
    let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let n = u64_at(5) as usize;
    let m = u64_at(13) as usize;
    let flags = bytes[21];
    let dt = f64::from_le_bytes(bytes[22..30].try_into().expect("8 bytes"));
    if m == 0 {
        return Err(KoopmanError::NoSnapshots(name.to_string()));
    }
    let expected = n
        .checked_mul(m)
        .and_then(|nm| nm.checked_mul(16))
        .and_then(|len| len.checked_add(HEADER_LEN))
        .ok_or_else(|| format_err("dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(format_err(format!(
            "payload is {} bytes, header (n = {n}, m = {m}) implies {expected}",
            bytes.len()
        )));
    }
    let mut at = HEADER_LEN;
    let mut read_block = || {
        let mut block = Mat::<f64>::zeros(n, m);
        for i in 0..n {
            for k in 0..m {
                block[(i, k)] = f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
                at += 8;
            }
        }
        block
    };
    let inputs = read_block();
    let images = read_block();
    let dt = (flags & FLAG_DT != 0).then_some(dt);
    SnapshotSet::from_parts(inputs, images, flags & FLAG_SEQUENTIAL != 0, dt)
}

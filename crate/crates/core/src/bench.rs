//! Corpus benchmark: compress every file of a directory, verify the
//! roundtrip, and report sizes, ratios, timings and structure estimates.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{compress_with_stats, decompress, ratio};
use crate::error::{Error, Result};
use crate::optimizer::csv_err;
use crate::window_search::SearchParams;

pub const CSV_HEADER: [&str; 7] = [
    "name",
    "size",
    "compressed",
    "ratio",
    "seconds",
    "structure_bytes",
    "factor",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub name: String,
    pub size: u64,
    pub compressed: u64,
    pub ratio: f64,
    /// Compression plus verification time.
    pub seconds: f64,
    /// Estimated peak structure size (input, output, dictionary, models, index).
    pub structure_bytes: u64,
    /// `structure_bytes / size`.
    pub factor: f64,
}

impl BenchRow {
    fn new(name: String, size: u64, compressed: u64, seconds: f64, structure_bytes: u64) -> Self {
        Self {
            name,
            size,
            compressed,
            ratio: ratio(size, compressed),
            seconds,
            structure_bytes,
            factor: if size == 0 {
                0.0
            } else {
                structure_bytes as f64 / size as f64
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub aggregate: BenchRow,
}

/// Compression ratios of other codecs, keyed by file name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferenceTable {
    pub codecs: Vec<String>,
    pub ratios: BTreeMap<String, Vec<Option<f64>>>,
}

impl ReferenceTable {
    /// Reads `name,<codec>,<codec>...` rows of ratios; empty cells are allowed.
    pub fn from_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let headers = rd.headers().map_err(csv_err)?.clone();
        if headers.len() < 2 {
            return Err(Error::InvalidParams(
                "reference CSV needs a name column and at least one codec".into(),
            ));
        }
        let codecs = headers.iter().skip(1).map(str::to_owned).collect();
        let mut ratios = BTreeMap::new();
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            let name = rec.get(0).unwrap_or_default().to_owned();
            let values = rec
                .iter()
                .skip(1)
                .map(|cell| {
                    let cell = cell.trim();
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>()
                            .map(Some)
                            .map_err(|_| Error::InvalidParams(format!("bad ratio {cell:?} for {name}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            ratios.insert(name, values);
        }
        Ok(Self { codecs, ratios })
    }

    /// Published Silesia ratios of LZ4 -9, gzip --best, xz -9 -e,
    /// zstd --ultra -22 and brotli -q 11.
    pub fn silesia() -> Self {
        const ROWS: [(&str, [f64; 5]); 12] = [
            ("dickens", [2.2948, 2.6461, 3.6000, 3.5765, 3.6044]),
            ("mozilla", [2.3176, 2.6966, 3.8292, 3.3769, 3.6922]),
            ("mr", [2.3472, 2.7138, 3.6231, 3.2132, 3.5317]),
            ("nci", [9.1071, 11.2311, 23.1519, 20.7925, 22.0780]),
            ("ooffice", [1.7349, 1.9907, 2.5346, 2.3587, 2.4818]),
            ("osdb", [2.5290, 2.7138, 3.5456, 3.2855, 3.5812]),
            ("reymont", [3.1345, 3.6396, 5.0374, 4.9060, 4.9747]),
            ("samba", [3.5122, 3.9950, 5.7778, 5.5267, 5.7367]),
            ("sao", [1.2639, 1.3613, 1.6386, 1.4479, 1.5812]),
            ("webster", [2.9554, 3.4372, 4.9540, 4.8970, 4.9188]),
            ("xml", [6.9277, 8.0709, 12.2910, 11.8004, 12.4145]),
            ("x-ray", [1.1798, 1.4035, 1.8868, 1.6457, 1.8096]),
        ];
        Self {
            codecs: ["lz4", "gzip", "xz", "zstd", "brotli"].map(String::from).to_vec(),
            ratios: ROWS
                .iter()
                .map(|(name, r)| (name.to_string(), r.iter().copied().map(Some).collect()))
                .collect(),
        }
    }
}

fn bench_file(path: &Path, params: &SearchParams) -> Result<BenchRow> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let data = std::fs::read(path)?;
    let started = Instant::now();
    let (packed, stats) = compress_with_stats(&data, params)?;
    let restored = decompress(&packed)?;
    if restored != data {
        return Err(Error::RoundtripMismatch(name));
    }
    Ok(BenchRow::new(
        name,
        data.len() as u64,
        packed.len() as u64,
        started.elapsed().as_secs_f64(),
        stats.structure_bytes,
    ))
}

/// Regular files directly inside `dir`, sorted by name.
pub fn corpus_files(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

pub fn run_bench(dir: &Path, params: &SearchParams, threads: Option<usize>) -> Result<BenchReport> {
    params.validate()?;
    let files = corpus_files(dir)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads.filter(|&n| n > 0) {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
    let mut rows: Vec<BenchRow> =
        pool.install(|| files.par_iter().map(|f| bench_file(f, params)).collect::<Result<_>>())?;
    rows.sort_by(|a, b| a.name.cmp(&b.name));
    let aggregate = BenchRow::new(
        "TOTAL".into(),
        rows.iter().map(|r| r.size).sum(),
        rows.iter().map(|r| r.compressed).sum(),
        rows.iter().map(|r| r.seconds).sum(),
        rows.iter().map(|r| r.structure_bytes).sum(),
    );
    Ok(BenchReport { rows, aggregate })
}

pub fn write_csv<W: std::io::Write>(report: &BenchReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in report.rows.iter().chain(std::iter::once(&report.aggregate)) {
        w.write_record([
            r.name.clone(),
            r.size.to_string(),
            r.compressed.to_string(),
            format!("{:.4}", r.ratio),
            format!("{:.3}", r.seconds),
            r.structure_bytes.to_string(),
            format!("{:.2}", r.factor),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Markdown table, with reference codec columns when given.
pub fn render_table(report: &BenchReport, reference: Option<&ReferenceTable>) -> String {
    let codecs: &[String] = reference.map_or(&[], |r| &r.codecs);
    let mut s = String::from("| File | Size | Compressed |");
    for c in codecs {
        let _ = write!(s, " {c} |");
    }
    s.push_str(" x3 | Seconds | Structure MB (est.) | Factor (est.) |\n|---|---:|---:|");
    s.push_str(&"---:|".repeat(codecs.len()));
    s.push_str("---:|---:|---:|---:|\n");
    for r in report.rows.iter().chain(std::iter::once(&report.aggregate)) {
        let _ = write!(s, "| {} | {} | {} |", r.name, r.size, r.compressed);
        let refs = reference.and_then(|t| t.ratios.get(&r.name));
        for i in 0..codecs.len() {
            match refs.and_then(|v| v.get(i).copied().flatten()) {
                Some(x) => {
                    let _ = write!(s, " {x:.4} |");
                }
                None => s.push_str(" - |"),
            }
        }
        let _ = writeln!(
            s,
            " {:.4} | {:.2} | {:.1} | {:.1} |",
            r.ratio,
            r.seconds,
            r.structure_bytes as f64 / 1e6,
            r.factor
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_bench(dir.path(), &SearchParams::default(), Some(1)).unwrap();
        assert!(report.rows.is_empty());
        assert_eq!(report.aggregate.size, 0);
        let mut buf = Vec::new();
        write_csv(&report, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("name,size,compressed,ratio,seconds,structure_bytes,factor\n"));
    }

    #[test]
    fn rows_sorted_and_aggregated() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.txt"), b"hello hello hello hello world".repeat(30)).unwrap();
        std::fs::write(
            dir.path().join("a.bin"),
            (0..3000u32).map(|i| (i * 7 % 251) as u8).collect::<Vec<_>>(),
        )
        .unwrap();
        std::fs::create_dir(dir.path().join("subdir")).unwrap();
        let report = run_bench(dir.path(), &SearchParams::default(), None).unwrap();
        let names: Vec<&str> = report.rows.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["a.bin", "b.txt"]);
        assert_eq!(report.aggregate.size, 3000 + 29 * 30);
        for r in &report.rows {
            assert!(r.structure_bytes >= r.size);
            assert_eq!(r.ratio, r.size as f64 / r.compressed as f64);
        }
    }

    #[test]
    fn reference_csv_parsing() {
        let csv = "name,gzip,xz\ndickens,2.6461,\nmr,2.7138,3.6231\n";
        let t = ReferenceTable::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(t.codecs, ["gzip", "xz"]);
        assert_eq!(t.ratios["dickens"], [Some(2.6461), None]);
        assert!(ReferenceTable::from_csv("name,gzip\nx,abc\n".as_bytes()).is_err());
        assert_eq!(ReferenceTable::silesia().ratios["dickens"][1], Some(2.6461));
    }

    #[test]
    fn table_shows_reference_columns() {
        let report = BenchReport {
            rows: vec![BenchRow::new("dickens".into(), 1000, 300, 0.5, 5000)],
            aggregate: BenchRow::new("TOTAL".into(), 1000, 300, 0.5, 5000),
        };
        let table = render_table(&report, Some(&ReferenceTable::silesia()));
        assert!(table.contains("| dickens | 1000 | 300 | 2.2948 | 2.6461 | 3.6000 | 3.5765 | 3.6044 | 3.3333 |"));
        assert!(table.contains("| TOTAL | 1000 | 300 | - | - | - | - | - | 3.3333 |"));
    }
}

//! Readers and writers for the on-disk formats: manifest, lexicon and
//! location CSVs, JSONL artifacts, indicator and panel tables.
//!
//! CSV readers take every cell as text and parse it themselves so that
//! errors can name the offending 1-based data row.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use dtmeasure_core::annotation::Label;
use dtmeasure_core::corpus::{check_unique_keys, FilingRecord};
use dtmeasure_core::econometrics::PanelDataset;
use dtmeasure_core::indicators::{FirmYearIndicators, IndicatorMode, Patent};
use dtmeasure_core::instruments::{FirmLocation, UniversitySite};
use dtmeasure_core::lexicon::{Category, Lexicon, LexiconEntry, MatchMode};
use dtmeasure_core::sampling::Split;
use dtmeasure_core::Technology;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MANIFEST_HEADER: [&str; 6] = ["firm_id", "year", "exchange", "naics", "employees", "text_path"];
pub const LEXICON_HEADER: [&str; 4] = ["term", "category", "match_mode", "case_sensitive"];
pub const INDICATOR_HEADER: [&str; 10] = ["firm_id", "year", "ai", "bd", "cc", "iot", "bc", "mi", "dt", "mode"];

fn row_error(row: usize, message: impl Into<String>) -> Error {
    Error::Core(dtmeasure_core::Error::Row {
        row,
        message: message.into(),
    })
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').to_ascii_lowercase())
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, format!("row {}: {e}", i + 1)))?;
        rows.push(rec.iter().map(str::to_owned).collect());
    }
    Ok(Table { header, rows })
}

fn expect_header(path: &Path, table: &Table, expected: &[&str]) -> Result<()> {
    if table.header.iter().map(String::as_str).ne(expected.iter().copied()) {
        return Err(Error::format(
            path,
            format!("expected header `{}`, found `{}`", expected.join(","), table.header.join(",")),
        ));
    }
    Ok(())
}

fn parse_f64(row: usize, field: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| row_error(row, format!("malformed {field} `{value}`")))
}

fn parse_year(row: usize, value: &str) -> Result<i32> {
    value
        .parse()
        .map_err(|_| row_error(row, format!("malformed year `{value}`")))
}

/// Directory that relative paths inside `file` are resolved against.
pub fn base_dir(file: &Path) -> PathBuf {
    file.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Reads a filing manifest. Text paths are resolved relative to the
/// manifest's directory and must exist.
pub fn read_manifest(path: &Path) -> Result<Vec<FilingRecord>> {
    let table = read_table(path)?;
    expect_header(path, &table, &MANIFEST_HEADER)?;
    let base = base_dir(path);
    let mut out = Vec::with_capacity(table.rows.len());
    for (i, r) in table.rows.iter().enumerate() {
        let row = i + 1;
        let employees = match r[4].as_str() {
            "" | "NA" => None,
            s => Some(
                s.parse::<u64>()
                    .map_err(|_| row_error(row, format!("malformed employees `{s}`")))?,
            ),
        };
        let rec = FilingRecord {
            firm_id: r[0].clone(),
            year: parse_year(row, &r[1])?,
            exchange: r[2].clone(),
            naics_code: r[3].clone(),
            employees,
            text_path: r[5].clone(),
        };
        rec.validate().map_err(|e| row_error(row, inner(e)))?;
        let text = resolve(&base, &rec.text_path);
        if !text.is_file() {
            return Err(Error::validation(format!(
                "row {row}: filing text not found: {}",
                text.display()
            )));
        }
        out.push(rec);
    }
    check_unique_keys(&out)?;
    Ok(out)
}

/// Loads filing text, replacing invalid UTF-8 (with a warning).
pub fn read_text_lossy(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    match String::from_utf8(bytes) {
        Ok(s) => Ok(s),
        Err(e) => {
            log::warn!("{}: invalid UTF-8 replaced", path.display());
            Ok(String::from_utf8_lossy(e.as_bytes()).into_owned())
        }
    }
}

fn parse_bool(row: usize, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" | "" => Ok(false),
        _ => Err(row_error(row, format!("malformed boolean `{value}`"))),
    }
}

pub fn read_lexicon(path: &Path) -> Result<Lexicon> {
    let table = read_table(path)?;
    expect_header(path, &table, &LEXICON_HEADER)?;
    if table.rows.is_empty() {
        return Err(Error::format(path, "lexicon has no entries"));
    }
    let mut entries = Vec::with_capacity(table.rows.len());
    for (i, r) in table.rows.iter().enumerate() {
        let row = i + 1;
        let category: Category = r[1].parse().map_err(|e: dtmeasure_core::Error| row_error(row, inner(e)))?;
        let match_mode = match r[2].as_str() {
            "" => MatchMode::WordBoundary,
            s => s.parse().map_err(|e: dtmeasure_core::Error| row_error(row, inner(e)))?,
        };
        entries.push(LexiconEntry {
            term: r[0].clone(),
            category,
            match_mode,
            case_sensitive: parse_bool(row, &r[3])?,
        });
    }
    Ok(Lexicon::new(entries)?)
}

fn inner(e: dtmeasure_core::Error) -> String {
    match e {
        dtmeasure_core::Error::Invalid(m) => m,
        other => other.to_string(),
    }
}

pub fn write_lexicon(path: &Path, entries: &[LexiconEntry]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let map = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(LEXICON_HEADER).map_err(map)?;
    for e in entries {
        let mode = match e.match_mode {
            MatchMode::WordBoundary => "WORD_BOUNDARY",
            MatchMode::Substring => "SUBSTRING",
        };
        w.write_record([e.term.as_str(), e.category.as_str(), mode, if e.case_sensitive { "true" } else { "false" }])
            .map_err(map)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(create(path)?))
}

/// Writes rows of string cells, header first.
pub fn write_csv<R, I, S>(path: &Path, header: &[&str], rows: R) -> Result<()>
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut w = csv_writer(path)?;
    let map = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(header).map_err(map)?;
    for r in rows {
        w.write_record(r).map_err(map)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| Error::format(path, e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::format(path, e.to_string()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// One line of a pool file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolLine {
    pub sentence_id: String,
}

/// One line of a split file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitLine {
    pub sentence_id: String,
    pub split: Split,
}

pub fn write_pool(path: &Path, members: &[String]) -> Result<()> {
    let lines: Vec<PoolLine> = members
        .iter()
        .map(|id| PoolLine { sentence_id: id.clone() })
        .collect();
    write_jsonl(path, &lines)
}

pub fn read_pool(path: &Path) -> Result<Vec<String>> {
    Ok(read_jsonl::<PoolLine>(path)?
        .into_iter()
        .map(|l| l.sentence_id)
        .collect())
}

pub fn write_indicators(path: &Path, rows: &[FirmYearIndicators]) -> Result<()> {
    let bit = |b: bool| if b { "1" } else { "0" };
    write_csv(
        path,
        &INDICATOR_HEADER,
        rows.iter().map(|r| {
            let mut cells = vec![r.firm_id.clone(), r.year.to_string()];
            cells.extend(r.flags.iter().map(|&f| bit(f).to_owned()));
            cells.push(bit(r.dt).to_owned());
            cells.push(r.mode.as_str().to_owned());
            cells
        }),
    )
}

pub fn read_indicators(path: &Path) -> Result<Vec<FirmYearIndicators>> {
    let table = read_table(path)?;
    expect_header(path, &table, &INDICATOR_HEADER)?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let row = i + 1;
            let bit = |s: &str| match s {
                "1" => Ok(true),
                "0" => Ok(false),
                _ => Err(row_error(row, format!("expected 0 or 1, found `{s}`"))),
            };
            let mut flags = [false; 6];
            for (k, f) in flags.iter_mut().enumerate() {
                *f = bit(&r[2 + k])?;
            }
            let dt = bit(&r[8])?;
            if dt != flags.iter().any(|&f| f) {
                return Err(row_error(row, "dt is not the disjunction of the technology flags"));
            }
            let mode = match r[9].as_str() {
                "CUMULATIVE" => IndicatorMode::Cumulative,
                "CONTEMPORANEOUS" => IndicatorMode::Contemporaneous,
                other => return Err(row_error(row, format!("unknown mode `{other}`"))),
            };
            Ok(FirmYearIndicators {
                firm_id: r[0].clone(),
                year: parse_year(row, &r[1])?,
                flags,
                dt,
                mode,
            })
        })
        .collect()
}

pub fn read_patents(path: &Path) -> Result<Vec<Patent>> {
    let table = read_table(path)?;
    expect_header(path, &table, &["firm_id", "technology", "year"])?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let row = i + 1;
            Ok(Patent {
                firm_id: r[0].clone(),
                technology: Technology::from_code(&r[1])
                    .ok_or_else(|| row_error(row, format!("unknown technology `{}`", r[1])))?,
                year: parse_year(row, &r[2])?,
            })
        })
        .collect()
}

pub fn read_roster(path: &Path) -> Result<Vec<UniversitySite>> {
    let table = read_table(path)?;
    expect_header(path, &table, &["name", "lat", "lon"])?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let row = i + 1;
            Ok(UniversitySite {
                name: r[0].clone(),
                latitude: parse_f64(row, "lat", &r[1])?,
                longitude: parse_f64(row, "lon", &r[2])?,
            })
        })
        .collect()
}

pub fn read_locations(path: &Path) -> Result<Vec<FirmLocation>> {
    let table = read_table(path)?;
    expect_header(path, &table, &["firm_id", "lat", "lon", "city_id"])?;
    let mut seen = BTreeSet::new();
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let row = i + 1;
            if !seen.insert(r[0].clone()) {
                return Err(row_error(row, format!("duplicate firm `{}`", r[0])));
            }
            let loc = FirmLocation {
                firm_id: r[0].clone(),
                latitude: parse_f64(row, "lat", &r[1])?,
                longitude: parse_f64(row, "lon", &r[2])?,
                city_id: r[3].clone(),
            };
            dtmeasure_core::instruments::check_coordinates(loc.latitude, loc.longitude)
                .map_err(|e| row_error(row, inner(e)))?;
            if loc.city_id.is_empty() {
                return Err(row_error(row, "empty city_id"));
            }
            Ok(loc)
        })
        .collect()
}

/// Reads a firm-year panel. Columns listed in `label_columns` are kept as
/// text; every other column must be numeric, with empty cells or `NA` as
/// missing values.
pub fn read_panel(path: &Path, label_columns: &[String]) -> Result<PanelDataset> {
    let table = read_table(path)?;
    if table.header.len() < 2 || table.header[0] != "firm_id" || table.header[1] != "year" {
        return Err(Error::format(path, "panel header must start with firm_id,year"));
    }
    let mut keys = Vec::with_capacity(table.rows.len());
    for (i, r) in table.rows.iter().enumerate() {
        keys.push((r[0].clone(), parse_year(i + 1, &r[1])?));
    }
    let mut data = PanelDataset::new(keys)?;
    for (c, name) in table.header.iter().enumerate().skip(2) {
        let missing = |s: &str| s.is_empty() || s.eq_ignore_ascii_case("na");
        if label_columns.iter().any(|l| l == name) {
            let values = table
                .rows
                .iter()
                .map(|r| (!missing(&r[c])).then(|| r[c].clone()))
                .collect();
            data.add_label_column(name, values)?;
        } else {
            let mut values = Vec::with_capacity(table.rows.len());
            for (i, r) in table.rows.iter().enumerate() {
                values.push(if missing(&r[c]) { None } else { Some(parse_f64(i + 1, name, &r[c])?) });
            }
            data.add_column(name, values)?;
        }
    }
    Ok(data)
}

/// One hand-labelled training example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub sentence_id: String,
    pub text: String,
    pub label: Label,
}

/// Reads `sentence_id,text,label`. EXCLUDED rows are rejected: they never
/// enter training data.
pub fn read_labeled(path: &Path) -> Result<Vec<LabeledExample>> {
    let table = read_table(path)?;
    expect_header(path, &table, &["sentence_id", "text", "label"])?;
    let mut seen = BTreeSet::new();
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let row = i + 1;
            let label: Label = r[2].parse().map_err(|e: dtmeasure_core::Error| row_error(row, inner(e)))?;
            if !label.is_substantive() {
                return Err(row_error(row, "EXCLUDED sentences cannot be used for training"));
            }
            if !seen.insert(r[0].clone()) {
                return Err(row_error(row, format!("duplicate sentence_id `{}`", r[0])));
            }
            Ok(LabeledExample {
                sentence_id: r[0].clone(),
                text: r[1].clone(),
                label,
            })
        })
        .collect()
}

pub fn write_labeled(path: &Path, examples: &[LabeledExample]) -> Result<()> {
    write_csv(
        path,
        &["sentence_id", "text", "label"],
        examples
            .iter()
            .map(|e| [e.sentence_id.as_str(), e.text.as_str(), e.label.as_str()]),
    )
}

/// Final-label export: `sentence_id,final_label`.
pub fn write_label_export(path: &Path, labels: &[(String, Label)]) -> Result<()> {
    write_csv(
        path,
        &["sentence_id", "final_label"],
        labels.iter().map(|(id, l)| [id.as_str(), l.as_str()]),
    )
}

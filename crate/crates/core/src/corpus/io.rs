//! Readers and writers for the canonical corpus file formats.
//!
//! * Instrument: JSON lines, one item per line with `code`, `text`, `kind`
//!   (`categorical` | `numeric`), `options` or `range`, `section`, `reverse_coded`.
//! * Respondents: either a delimited table whose header holds `respondent_id`,
//!   `country`, `age` (or `birth_year`) plus one column per item code, or JSON
//!   lines where each object maps those reserved keys and item codes to answers.
//! * Reference distributions: delimited table with
//!   `item_code,stratum,option_label,proportion`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    format_number, AnswerValue, Instrument, ItemKind, MissingReason, ReferenceDistribution,
    RespondentRecord, SurveyCorpus, SurveyItem,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    DelimitedTable,
    RecordJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    /// Cell texts (compared case-insensitively) that denote a non-substantive answer.
    pub sentinels: Vec<(String, MissingReason)>,
    /// Interview year used to derive age from a `birth_year` column.
    pub reference_year: i32,
    pub delimiter: char,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            sentinels: MissingReason::ALL
                .iter()
                .map(|r| (r.label().to_string(), *r))
                .collect(),
            reference_year: 2021,
            delimiter: ',',
        }
    }
}

impl IngestOptions {
    fn sentinel(&self, text: &str) -> Option<MissingReason> {
        let t = text.trim();
        self.sentinels
            .iter()
            .find(|(s, _)| s.eq_ignore_ascii_case(t))
            .map(|(_, r)| *r)
    }

    fn sentinel_text(&self, reason: MissingReason) -> String {
        self.sentinels
            .iter()
            .find(|(_, r)| *r == reason)
            .map(|(s, _)| s.clone())
            .unwrap_or_else(|| reason.label().to_string())
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct InstrumentRecord {
    code: String,
    text: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    options: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    range: Option<[f64; 2]>,
    #[serde(default)]
    section: String,
    #[serde(default)]
    reverse_coded: bool,
}

impl InstrumentRecord {
    fn into_item(self) -> std::result::Result<SurveyItem, String> {
        let kind = match self.kind.as_str() {
            "categorical" => ItemKind::Categorical {
                options: self
                    .options
                    .ok_or_else(|| format!("categorical item `{}` lacks `options`", self.code))?,
            },
            "numeric" => {
                let [min, max] = self
                    .range
                    .ok_or_else(|| format!("numeric item `{}` lacks `range`", self.code))?;
                ItemKind::Numeric { min, max }
            }
            other => return Err(format!("unknown item kind `{other}`")),
        };
        Ok(SurveyItem {
            code: self.code,
            question_text: self.text,
            kind,
            section: self.section,
            reverse_coded: self.reverse_coded,
        })
    }

    fn from_item(item: &SurveyItem) -> Self {
        let (kind, options, range) = match &item.kind {
            ItemKind::Categorical { options } => ("categorical", Some(options.clone()), None),
            ItemKind::Numeric { min, max } => ("numeric", None, Some([*min, *max])),
        };
        InstrumentRecord {
            code: item.code.clone(),
            text: item.question_text.clone(),
            kind: kind.to_string(),
            options,
            range,
            section: item.section.clone(),
            reverse_coded: item.reverse_coded,
        }
    }
}

/// Parses an instrument from JSON lines. Blank lines are skipped.
pub fn parse_instrument<R: Read>(source_name: &str, reader: R) -> Result<Instrument> {
    let mut items = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: InstrumentRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
        let item = rec
            .into_item()
            .map_err(|m| Error::parse(source_name, line_no, m))?;
        item.validate()
            .map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
        items.push(item);
    }
    Instrument::new(items)
}

pub fn load_instrument(path: &Path) -> Result<Instrument> {
    parse_instrument(&path.display().to_string(), open(path)?)
}

pub fn write_instrument<W: Write>(instrument: &Instrument, mut out: W) -> Result<()> {
    for item in instrument.items() {
        let line = serde_json::to_string(&InstrumentRecord::from_item(item))
            .expect("instrument records serialize");
        writeln!(out, "{line}").map_err(|e| Error::io("<instrument output>", e))?;
    }
    Ok(())
}

/// Converts one raw cell into a typed answer; `None` means the cell is empty.
fn convert_cell(
    item: &SurveyItem,
    raw: &str,
    opts: &IngestOptions,
) -> std::result::Result<Option<AnswerValue>, String> {
    let text = raw.trim();
    if text.is_empty() {
        return Ok(None);
    }
    if let Some(reason) = opts.sentinel(text) {
        return Ok(Some(AnswerValue::Missing(reason)));
    }
    let value = match &item.kind {
        ItemKind::Numeric { .. } => match text.parse::<f64>() {
            Ok(v) if v.is_finite() => AnswerValue::Numeric(v),
            _ => {
                return Err(format!(
                    "item `{}` is numeric but got `{text}`",
                    item.code
                ))
            }
        },
        ItemKind::Categorical { .. } => AnswerValue::Categorical(text.to_string()),
    };
    item.check(&value).map_err(|e| e.to_string())?;
    Ok(Some(value))
}

fn age_from(
    age: Option<&str>,
    birth_year: Option<&str>,
    opts: &IngestOptions,
) -> std::result::Result<u32, String> {
    if let Some(a) = age.filter(|a| !a.trim().is_empty()) {
        return a
            .trim()
            .parse::<u32>()
            .map_err(|_| format!("invalid age `{a}`"));
    }
    if let Some(b) = birth_year.filter(|b| !b.trim().is_empty()) {
        let year: i32 = b
            .trim()
            .parse()
            .map_err(|_| format!("invalid birth_year `{b}`"))?;
        let age = opts.reference_year - year;
        return u32::try_from(age).map_err(|_| format!("birth_year {year} is after the reference year"));
    }
    Err("record has neither `age` nor `birth_year`".to_string())
}

const RESERVED: [&str; 4] = ["respondent_id", "country", "age", "birth_year"];

fn parse_respondents_table<R: Read>(
    source_name: &str,
    reader: R,
    instrument: &Instrument,
    opts: &IngestOptions,
) -> Result<Vec<RespondentRecord>> {
    let delimiter = u8::try_from(opts.delimiter)
        .map_err(|_| Error::Config(format!("delimiter `{}` is not ASCII", opts.delimiter)))?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::Headers)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| csv_error(source_name, e))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_col = col("respondent_id")
        .ok_or_else(|| Error::parse(source_name, 1, "header lacks `respondent_id`"))?;
    let country_col =
        col("country").ok_or_else(|| Error::parse(source_name, 1, "header lacks `country`"))?;
    let age_col = col("age");
    let birth_col = col("birth_year");
    if age_col.is_none() && birth_col.is_none() {
        return Err(Error::parse(source_name, 1, "header lacks `age` or `birth_year`"));
    }
    let mut unknown = BTreeSet::new();
    let mut item_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if RESERVED.contains(&h) {
            continue;
        }
        match instrument.get(h) {
            Some(item) => item_cols.push((i, item)),
            None => {
                unknown.insert(h.to_string());
            }
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownItems {
            codes: unknown.into_iter().collect(),
        });
    }

    let mut out = Vec::new();
    for result in rdr.records() {
        let record = result.map_err(|e| csv_error(source_name, e))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let get = |c: usize| record.get(c).unwrap_or("");
        let respondent_id = get(id_col).trim().to_string();
        if respondent_id.is_empty() {
            return Err(Error::parse(source_name, line, "empty respondent_id"));
        }
        let age = age_from(age_col.map(get), birth_col.map(get), opts)
            .map_err(|m| Error::parse(source_name, line, m))?;
        let mut answers = BTreeMap::new();
        for &(c, item) in &item_cols {
            match convert_cell(item, get(c), opts) {
                Ok(Some(v)) => {
                    answers.insert(item.code.clone(), v);
                }
                Ok(None) => {}
                Err(m) => {
                    return Err(Error::Integrity(format!("{source_name}:{line}: {m}")));
                }
            }
        }
        out.push(RespondentRecord {
            respondent_id,
            country: get(country_col).trim().to_string(),
            age,
            answers,
        });
    }
    Ok(out)
}

fn csv_error(source_name: &str, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::parse(source_name, line, e.to_string())
}

fn json_scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => n.as_f64().map(format_number),
        Value::Bool(b) => Some(b.to_string()),
        other => Some(other.to_string()),
    }
}

fn parse_respondents_json<R: Read>(
    source_name: &str,
    reader: R,
    instrument: &Instrument,
    opts: &IngestOptions,
) -> Result<Vec<RespondentRecord>> {
    let mut out = Vec::new();
    let mut unknown = BTreeSet::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let obj: serde_json::Map<String, Value> = serde_json::from_str(&line)
            .map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
        let text = |key: &str| obj.get(key).and_then(json_scalar_text);
        let respondent_id = text("respondent_id")
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| Error::parse(source_name, line_no, "missing `respondent_id`"))?;
        let country = text("country")
            .ok_or_else(|| Error::parse(source_name, line_no, "missing `country`"))?;
        let age = age_from(text("age").as_deref(), text("birth_year").as_deref(), opts)
            .map_err(|m| Error::parse(source_name, line_no, m))?;
        let mut answers = BTreeMap::new();
        for (key, value) in &obj {
            if RESERVED.contains(&key.as_str()) {
                continue;
            }
            let Some(item) = instrument.get(key) else {
                unknown.insert(key.clone());
                continue;
            };
            let Some(raw) = json_scalar_text(value) else {
                continue;
            };
            match convert_cell(item, &raw, opts) {
                Ok(Some(v)) => {
                    answers.insert(key.clone(), v);
                }
                Ok(None) => {}
                Err(m) => return Err(Error::Integrity(format!("{source_name}:{line_no}: {m}"))),
            }
        }
        out.push(RespondentRecord {
            respondent_id: respondent_id.trim().to_string(),
            country,
            age,
            answers,
        });
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownItems {
            codes: unknown.into_iter().collect(),
        });
    }
    Ok(out)
}

/// Parses and type-checks respondent records against `instrument`.
pub fn parse_respondents<R: Read>(
    source_name: &str,
    reader: R,
    format: CorpusFormat,
    instrument: Instrument,
    opts: &IngestOptions,
) -> Result<SurveyCorpus> {
    let respondents = match format {
        CorpusFormat::DelimitedTable => {
            parse_respondents_table(source_name, reader, &instrument, opts)?
        }
        CorpusFormat::RecordJson => parse_respondents_json(source_name, reader, &instrument, opts)?,
    };
    SurveyCorpus::new(instrument, respondents, source_name)
}

pub fn load_corpus(
    instrument_path: &Path,
    respondents_path: &Path,
    format: CorpusFormat,
    opts: &IngestOptions,
) -> Result<SurveyCorpus> {
    let instrument = load_instrument(instrument_path)?;
    parse_respondents(
        &respondents_path.display().to_string(),
        open(respondents_path)?,
        format,
        instrument,
        opts,
    )
}

fn cell_text(value: &AnswerValue, opts: &IngestOptions) -> String {
    match value {
        AnswerValue::Categorical(l) => l.clone(),
        AnswerValue::Numeric(v) => format_number(*v),
        AnswerValue::Missing(r) => opts.sentinel_text(*r),
    }
}

/// Serializes respondents in the given format; the output re-parses to an equal corpus.
pub fn write_respondents<W: Write>(
    corpus: &SurveyCorpus,
    format: CorpusFormat,
    opts: &IngestOptions,
    out: W,
) -> Result<()> {
    let io_err = |e: std::io::Error| Error::io("<respondent output>", e);
    match format {
        CorpusFormat::DelimitedTable => {
            let delimiter = u8::try_from(opts.delimiter)
                .map_err(|_| Error::Config("delimiter is not ASCII".into()))?;
            let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(out);
            let mut header = vec!["respondent_id", "country", "age"];
            header.extend(corpus.instrument().items().iter().map(|i| i.code.as_str()));
            w.write_record(&header)
                .map_err(|e| io_err(std::io::Error::other(e)))?;
            for r in corpus.respondents() {
                let mut row = vec![r.respondent_id.clone(), r.country.clone(), r.age.to_string()];
                for item in corpus.instrument().items() {
                    row.push(
                        r.answer(&item.code)
                            .map(|v| cell_text(v, opts))
                            .unwrap_or_default(),
                    );
                }
                w.write_record(&row)
                    .map_err(|e| io_err(std::io::Error::other(e)))?;
            }
            w.flush().map_err(io_err)?;
        }
        CorpusFormat::RecordJson => {
            let mut out = out;
            for r in corpus.respondents() {
                let mut obj = serde_json::Map::new();
                obj.insert("respondent_id".into(), Value::String(r.respondent_id.clone()));
                obj.insert("country".into(), Value::String(r.country.clone()));
                obj.insert("age".into(), Value::from(r.age));
                for (code, v) in &r.answers {
                    let json = match v {
                        AnswerValue::Numeric(x) => serde_json::Number::from_f64(*x)
                            .map(Value::Number)
                            .unwrap_or(Value::Null),
                        other => Value::String(cell_text(other, opts)),
                    };
                    obj.insert(code.clone(), json);
                }
                let line = serde_json::to_string(&obj).expect("json object serializes");
                writeln!(out, "{line}").map_err(io_err)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ReferenceRow {
    item_code: String,
    stratum: String,
    option_label: String,
    proportion: f64,
}

/// Parses reference distributions, grouped by (item_code, stratum) in file order.
pub fn parse_references<R: Read>(source_name: &str, reader: R) -> Result<Vec<ReferenceDistribution>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut groups: Vec<((String, String), Vec<(String, f64)>)> = Vec::new();
    for result in rdr.deserialize::<ReferenceRow>() {
        let row = result.map_err(|e| csv_error(source_name, e))?;
        let key = (row.item_code, row.stratum);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, freqs)) => {
                if freqs.iter().any(|(l, _)| *l == row.option_label) {
                    return Err(Error::Validation(format!(
                        "reference {}/{} repeats option `{}`",
                        key.0, key.1, row.option_label
                    )));
                }
                freqs.push((row.option_label, row.proportion));
            }
            None => groups.push((key, vec![(row.option_label, row.proportion)])),
        }
    }
    groups
        .into_iter()
        .map(|((item, stratum), freqs)| ReferenceDistribution::new(&item, &stratum, freqs))
        .collect()
}

pub fn load_references(path: &Path) -> Result<Vec<ReferenceDistribution>> {
    parse_references(&path.display().to_string(), open(path)?)
}

//! Coded-review ingest: CSV text to a validated [`Corpus`] with an inferred
//! facet schema.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::ContentDigest;
use crate::text::{normalize_value, value_key};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IngestError {
    #[error("required column `{0}` is missing from the header")]
    MissingRequiredColumn(String),
    #[error("the CSV has no data rows")]
    EmptyCorpus,
    #[error("malformed CSV: {0}")]
    MalformedCsv(String),
    #[error("column `{0}` appears more than once in the header")]
    DuplicateColumn(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Categorical,
    MultiCategorical,
    Numeric,
    FreeText,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub kind: FeatureKind,
    /// Observed distinct values; empty for free text.
    pub values: Vec<String>,
}

impl FeatureDef {
    /// Free-text columns are kept on studies but never filtered on.
    pub fn is_facet(&self) -> bool {
        self.kind != FeatureKind::FreeText
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Study {
    pub id: String,
    pub title: String,
    pub authors: String,
    pub year: Option<i32>,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub features: BTreeMap<String, BTreeSet<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub ingested_at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub corpus_id: String,
    pub studies: Vec<Study>,
    pub schema: Vec<FeatureDef>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    /// 1-based data row; 0 for corpus-level issues.
    pub row: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_usable(&self) -> bool {
        self.errors.is_empty()
    }

    fn error(&mut self, row: usize, message: String) {
        self.errors.push(Issue { row, message });
    }

    fn warn(&mut self, row: usize, message: String) {
        self.warnings.push(Issue { row, message });
    }

    fn extend(&mut self, other: ValidationReport) {
        self.errors.extend(other.errors);
        self.warnings.extend(other.warnings);
    }
}

/// Thresholds for column classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceThresholds {
    /// Mean non-empty cell length above which a column is free text.
    pub free_text_mean_len: f64,
    /// Distinct-value floor of the free-text cardinality rule.
    pub max_distinct_floor: usize,
    /// Fraction of rows above which distinct values make a column free text.
    pub max_distinct_ratio: f64,
}

impl Default for InferenceThresholds {
    fn default() -> Self {
        Self {
            free_text_mean_len: 200.0,
            max_distinct_floor: 20,
            max_distinct_ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub title_col: String,
    pub authors_col: String,
    pub year_col: String,
    pub abstract_col: String,
    /// Optional; `S{row}` ids are generated when the column is absent.
    pub id_col: String,
    pub delimiter: String,
    pub thresholds: InferenceThresholds,
    pub source: String,
    pub ingested_at: Option<String>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            title_col: "title".into(),
            authors_col: "authors".into(),
            year_col: "year".into(),
            abstract_col: "abstract".into(),
            id_col: "id".into(),
            delimiter: ";".into(),
            thresholds: InferenceThresholds::default(),
            source: String::new(),
            ingested_at: None,
        }
    }
}

/// Column positions of the bibliographic fields.
struct BibColumns {
    id: Option<usize>,
    title: usize,
    authors: usize,
    year: usize,
    abstract_text: usize,
}

impl BibColumns {
    fn contains(&self, col: usize) -> bool {
        self.id == Some(col)
            || col == self.title
            || col == self.authors
            || col == self.year
            || col == self.abstract_text
    }
}

/// Splits CSV text into records of raw cells.
fn read_records(text: &str) -> Result<Vec<Vec<String>>, IngestError> {
    // Every quote in well-formed RFC 4180 text opens, closes, or is half of
    // an escaped pair, so an odd count means a field was never closed.
    if text.bytes().filter(|&b| b == b'"').count() % 2 == 1 {
        return Err(IngestError::MalformedCsv("unbalanced quotes".into()));
    }

    let mut reader = csv_core::Reader::new();
    let mut input = text.as_bytes();
    let mut output = alloc::vec![0u8; 4096];
    let mut ends = alloc::vec![0usize; 64];
    let mut out_len = 0;
    let mut ends_len = 0;
    let mut records = Vec::new();

    loop {
        let (result, nin, nout, nend) =
            reader.read_record(input, &mut output[out_len..], &mut ends[ends_len..]);
        input = &input[nin..];
        out_len += nout;
        ends_len += nend;
        match result {
            csv_core::ReadRecordResult::InputEmpty => {
                // Feeding an empty slice tells the reader the input is done.
                if input.is_empty() && nin == 0 {
                    let (result, _, nout, nend) =
                        reader.read_record(&[], &mut output[out_len..], &mut ends[ends_len..]);
                    out_len += nout;
                    ends_len += nend;
                    if result == csv_core::ReadRecordResult::Record {
                        records.push(split_record(&output[..out_len], &ends[..ends_len])?);
                    }
                    break;
                }
            }
            csv_core::ReadRecordResult::OutputFull => {
                let grow = output.len();
                output.resize(grow * 2, 0);
            }
            csv_core::ReadRecordResult::OutputEndsFull => {
                let grow = ends.len();
                ends.resize(grow * 2, 0);
            }
            csv_core::ReadRecordResult::Record => {
                records.push(split_record(&output[..out_len], &ends[..ends_len])?);
                out_len = 0;
                ends_len = 0;
            }
            csv_core::ReadRecordResult::End => break,
        }
    }
    Ok(records)
}

fn split_record(output: &[u8], ends: &[usize]) -> Result<Vec<String>, IngestError> {
    let mut start = 0;
    let mut cells = Vec::with_capacity(ends.len());
    for &end in ends {
        let cell = core::str::from_utf8(&output[start..end])
            .map_err(|_| IngestError::MalformedCsv("field is not valid UTF-8".into()))?;
        cells.push(cell.to_string());
        start = end;
    }
    Ok(cells)
}

fn find_column(headers: &[String], wanted: &str) -> Option<usize> {
    let key = value_key(wanted);
    headers.iter().position(|h| value_key(h) == key)
}

/// Parses coded-review CSV text into a corpus plus every anomaly found.
///
/// The returned corpus is only usable when the report has no errors.
pub fn parse_corpus(
    csv_text: &str,
    config: &IngestConfig,
) -> Result<(Corpus, ValidationReport), IngestError> {
    let text = csv_text.strip_prefix('\u{feff}').unwrap_or(csv_text);
    let mut records = read_records(text)?.into_iter();
    let headers: Vec<String> = match records.next() {
        Some(h) => h.iter().map(|h| normalize_value(h)).collect(),
        None => return Err(IngestError::EmptyCorpus),
    };
    let rows: Vec<Vec<String>> = records
        .filter(|r| !(r.len() == 1 && r[0].trim().is_empty()))
        .collect();
    if rows.is_empty() {
        return Err(IngestError::EmptyCorpus);
    }

    let mut seen = BTreeSet::new();
    for h in &headers {
        if !seen.insert(value_key(h)) {
            return Err(IngestError::DuplicateColumn(h.clone()));
        }
    }

    let required = |name: &str| {
        find_column(&headers, name).ok_or_else(|| IngestError::MissingRequiredColumn(name.into()))
    };
    let bib = BibColumns {
        id: find_column(&headers, &config.id_col),
        title: required(&config.title_col)?,
        authors: required(&config.authors_col)?,
        year: required(&config.year_col)?,
        abstract_text: required(&config.abstract_col)?,
    };

    let mut report = ValidationReport::default();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != headers.len() {
            report.warn(
                i + 1,
                format!("row has {} fields, header has {}", row.len(), headers.len()),
            );
        }
    }
    let cell = |row: &[String], col: usize| -> String {
        row.get(col).map(|c| normalize_value(c)).unwrap_or_default()
    };

    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| !bib.contains(c)).collect();
    let feature_headers: Vec<String> = feature_cols.iter().map(|&c| headers[c].clone()).collect();
    let feature_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|row| feature_cols.iter().map(|&c| cell(row, c)).collect())
        .collect();
    let schema = infer_feature_schema(
        &feature_headers,
        &feature_rows,
        &config.delimiter,
        &config.thresholds,
    );
    // key -> display form, per feature
    let canonical: Vec<BTreeMap<String, String>> = schema
        .iter()
        .map(|def| def.values.iter().map(|v| (value_key(v), v.clone())).collect())
        .collect();

    let mut studies = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let id = match bib.id {
            Some(col) => {
                let id = cell(row, col);
                if id.is_empty() {
                    report.error(i + 1, "empty study id".into());
                }
                id
            }
            None => format!("S{}", i + 1),
        };
        let year_cell = cell(row, bib.year);
        let year = if year_cell.is_empty() {
            None
        } else {
            match year_cell.parse::<i32>() {
                Ok(y) => Some(y),
                Err(_) => {
                    report.warn(i + 1, format!("year `{year_cell}` is not an integer"));
                    None
                }
            }
        };

        let mut features = BTreeMap::new();
        for (f, def) in schema.iter().enumerate() {
            let raw = &feature_rows[i][f];
            if raw.is_empty() {
                continue;
            }
            let values: BTreeSet<String> = match def.kind {
                FeatureKind::FreeText | FeatureKind::Numeric | FeatureKind::Categorical => {
                    core::iter::once(raw.as_str())
                        .map(|v| canonical_value(&canonical[f], def.kind, v))
                        .collect()
                }
                FeatureKind::MultiCategorical => split_cell(raw, &config.delimiter)
                    .map(|v| canonical_value(&canonical[f], def.kind, &v))
                    .collect(),
            };
            if !values.is_empty() {
                features.insert(def.name.clone(), values);
            }
        }

        studies.push(Study {
            id,
            title: cell(row, bib.title),
            authors: cell(row, bib.authors),
            year,
            abstract_text: cell(row, bib.abstract_text),
            features,
        });
    }

    let corpus = Corpus {
        corpus_id: corpus_digest(&studies, &schema),
        studies,
        schema,
        provenance: Provenance {
            source: config.source.clone(),
            ingested_at: config.ingested_at.clone(),
        },
    };
    report.extend(validate_corpus(&corpus));
    Ok((corpus, report))
}

fn canonical_value(canonical: &BTreeMap<String, String>, kind: FeatureKind, raw: &str) -> String {
    if kind == FeatureKind::FreeText {
        return raw.to_string();
    }
    canonical
        .get(&value_key(raw))
        .cloned()
        .unwrap_or_else(|| raw.to_string())
}

fn split_cell<'a>(cell: &'a str, delimiter: &'a str) -> impl Iterator<Item = String> + 'a {
    cell.split(delimiter)
        .map(normalize_value)
        .filter(|v| !v.is_empty())
}

/// Content digest over studies and schema; provenance is excluded so a
/// re-ingest of the same content gets the same id.
fn corpus_digest(studies: &[Study], schema: &[FeatureDef]) -> String {
    let mut d = ContentDigest::new();
    for def in schema {
        d.field(&def.name).field(&format!("{:?}", def.kind));
        for v in &def.values {
            d.field(v);
        }
    }
    for s in studies {
        d.field(&s.id)
            .field(&s.title)
            .field(&s.authors)
            .field(&format!("{:?}", s.year))
            .field(&s.abstract_text);
        for (name, values) in &s.features {
            d.field(name);
            for v in values {
                d.field(v);
            }
        }
    }
    d.finish("c-")
}

/// Classifies each coded column. `rows[r][c]` is the normalized cell of
/// row `r` for `headers[c]`.
///
/// Rules, first match wins: every non-empty cell an integer gives numeric;
/// long cells or too many distinct values give free text; any cell holding
/// the delimiter gives multi-categorical; otherwise categorical. A column
/// with no non-empty cells is free text.
pub fn infer_feature_schema(
    headers: &[String],
    rows: &[Vec<String>],
    delimiter: &str,
    thresholds: &InferenceThresholds,
) -> Vec<FeatureDef> {
    headers
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let cells: Vec<&str> = rows
                .iter()
                .filter_map(|r| r.get(c))
                .map(String::as_str)
                .filter(|v| !v.is_empty())
                .collect();
            let kind = classify(&cells, rows.len(), delimiter, thresholds);
            FeatureDef {
                name: name.clone(),
                kind,
                values: distinct_values(&cells, kind, delimiter),
            }
        })
        .collect()
}

fn classify(
    cells: &[&str],
    row_count: usize,
    delimiter: &str,
    thresholds: &InferenceThresholds,
) -> FeatureKind {
    if cells.is_empty() {
        return FeatureKind::FreeText;
    }
    if cells.iter().all(|c| c.parse::<i64>().is_ok()) {
        return FeatureKind::Numeric;
    }
    let total_len: usize = cells.iter().map(|c| c.chars().count()).sum();
    let mean_len = total_len as f64 / cells.len() as f64;
    let distinct: BTreeSet<String> = cells
        .iter()
        .flat_map(|c| split_cell(c, delimiter))
        .map(|v| value_key(&v))
        .collect();
    let distinct_limit = thresholds
        .max_distinct_floor
        .max(libm::floor(thresholds.max_distinct_ratio * row_count as f64) as usize);
    if mean_len > thresholds.free_text_mean_len || distinct.len() > distinct_limit {
        return FeatureKind::FreeText;
    }
    if cells.iter().any(|c| c.contains(delimiter)) {
        FeatureKind::MultiCategorical
    } else {
        FeatureKind::Categorical
    }
}

fn distinct_values(cells: &[&str], kind: FeatureKind, delimiter: &str) -> Vec<String> {
    let atoms: Vec<String> = match kind {
        FeatureKind::FreeText => return Vec::new(),
        FeatureKind::MultiCategorical => cells
            .iter()
            .flat_map(|c| split_cell(c, delimiter))
            .collect(),
        FeatureKind::Categorical | FeatureKind::Numeric => {
            cells.iter().map(|c| c.to_string()).collect()
        }
    };
    // First-seen display form per case-folded key.
    let mut by_key: BTreeMap<String, String> = BTreeMap::new();
    for atom in atoms {
        by_key.entry(value_key(&atom)).or_insert(atom);
    }
    let mut values: Vec<String> = by_key.into_values().collect();
    if kind == FeatureKind::Numeric {
        values.sort_by_key(|v| v.parse::<i64>().unwrap_or(i64::MAX));
    } else {
        values.sort();
    }
    values
}

/// Corpus-level checks: duplicate ids and emptiness are errors; blank
/// titles or abstracts and unknown years are warnings.
pub fn validate_corpus(corpus: &Corpus) -> ValidationReport {
    let mut report = ValidationReport::default();
    if corpus.studies.is_empty() {
        report.error(0, "corpus has no studies".into());
    }
    let mut first_row: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, study) in corpus.studies.iter().enumerate() {
        let row = i + 1;
        if let Some(prev) = first_row.insert(study.id.as_str(), row) {
            first_row.insert(study.id.as_str(), prev);
            report.error(
                row,
                format!("duplicate study id `{}` (first seen in row {prev})", study.id),
            );
        }
        if study.title.is_empty() {
            report.warn(row, "empty title".into());
        }
        if study.abstract_text.is_empty() {
            report.warn(row, "empty abstract".into());
        }
        if study.year.is_none() {
            report.warn(row, "unknown year".into());
        }
    }
    report
}

fn push_csv_field(out: &mut String, field: &str) {
    let needs_quotes = field.is_empty()
        || field.contains([',', '"', '\n', '\r'])
        || field.starts_with(' ')
        || field.ends_with(' ');
    if needs_quotes {
        out.push('"');
        out.push_str(&field.replace('"', "\"\""));
        out.push('"');
    } else {
        out.push_str(field);
    }
}

impl Corpus {
    pub fn study(&self, id: &str) -> Option<&Study> {
        self.studies.iter().find(|s| s.id == id)
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureDef> {
        self.schema.iter().find(|f| f.name == name)
    }

    /// Facets offered for filtering, in schema order.
    pub fn facets(&self) -> impl Iterator<Item = &FeatureDef> {
        self.schema.iter().filter(|f| f.is_facet())
    }

    /// Writes the corpus back out as CSV that [`parse_corpus`] reads into an
    /// equal corpus (provenance aside) under the default column names and
    /// the given multi-value delimiter.
    pub fn to_csv(&self, delimiter: &str) -> String {
        let mut out = String::new();
        let mut header: Vec<&str> = alloc::vec!["id", "title", "authors", "year", "abstract"];
        header.extend(self.schema.iter().map(|f| f.name.as_str()));
        for (i, h) in header.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            push_csv_field(&mut out, h);
        }
        out.push_str("\r\n");

        let joiner = format!("{delimiter} ");
        for s in &self.studies {
            push_csv_field(&mut out, &s.id);
            for field in [&s.title, &s.authors] {
                out.push(',');
                push_csv_field(&mut out, field);
            }
            out.push(',');
            if let Some(year) = s.year {
                out.push_str(&year.to_string());
            }
            out.push(',');
            push_csv_field(&mut out, &s.abstract_text);
            for def in &self.schema {
                out.push(',');
                if let Some(values) = s.features.get(&def.name) {
                    let joined: Vec<&str> = values.iter().map(String::as_str).collect();
                    push_csv_field(&mut out, &joined.join(&joiner));
                }
            }
            out.push_str("\r\n");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn parse(text: &str) -> (Corpus, ValidationReport) {
        parse_corpus(text, &IngestConfig::default()).unwrap()
    }

    #[test]
    fn three_rows_one_facet() {
        let (corpus, report) = parse(
            "title,authors,year,abstract,Grade Level\n\
             A,X,2010,alpha,primary\n\
             B,Y,2011,beta,lower secondary\n\
             C,Z,2012,gamma,upper secondary\n",
        );
        assert!(report.is_usable());
        assert!(report.warnings.is_empty());
        assert_eq!(corpus.studies.len(), 3);
        assert_eq!(corpus.schema.len(), 1);
        let grade = &corpus.schema[0];
        assert_eq!(grade.name, "Grade Level");
        assert_eq!(grade.kind, FeatureKind::Categorical);
        assert_eq!(
            grade.values,
            vec!["lower secondary", "primary", "upper secondary"]
        );
        assert_eq!(
            corpus.studies.iter().map(|s| s.id.as_str()).collect::<Vec<_>>(),
            vec!["S1", "S2", "S3"]
        );
    }

    #[test]
    fn empty_year_is_unknown_with_one_warning() {
        let (corpus, report) = parse("title,authors,year,abstract\nA,X,,text\n");
        assert_eq!(corpus.studies[0].year, None);
        assert!(report.errors.is_empty());
        assert_eq!(report.warnings.len(), 1);
        assert_eq!(report.warnings[0].row, 1);
    }

    #[test]
    fn missing_required_column() {
        let err = parse_corpus("title,authors,abstract\nA,B,C\n", &IngestConfig::default())
            .unwrap_err();
        assert_eq!(err, IngestError::MissingRequiredColumn("year".into()));
    }

    #[test]
    fn header_only_is_empty_corpus() {
        let err =
            parse_corpus("title,authors,year,abstract\n", &IngestConfig::default()).unwrap_err();
        assert_eq!(err, IngestError::EmptyCorpus);
        assert_eq!(
            parse_corpus("", &IngestConfig::default()).unwrap_err(),
            IngestError::EmptyCorpus
        );
    }

    #[test]
    fn unbalanced_quote_is_malformed() {
        let err = parse_corpus(
            "title,authors,year,abstract\n\"A,B,2001,text\n",
            &IngestConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::MalformedCsv(_)));
    }

    #[test]
    fn quoted_fields_and_bom() {
        let (corpus, report) = parse(
            "\u{feff}title,authors,year,abstract\n\"Agents, \"\"tutors\"\"\",\"Doe, J.\",2020,\"line one\nline two\"\n",
        );
        assert!(report.is_usable());
        let s = &corpus.studies[0];
        assert_eq!(s.title, "Agents, \"tutors\"");
        assert_eq!(s.authors, "Doe, J.");
        assert_eq!(s.abstract_text, "line one line two");
    }

    #[test]
    fn id_column_used_and_duplicates_reported() {
        let (corpus, report) = parse(
            "ID,title,authors,year,abstract\nx1,A,B,2001,t\nx1,C,D,2002,u\n",
        );
        assert_eq!(corpus.studies[0].id, "x1");
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].row, 2);
        assert!(!report.is_usable());
    }

    #[test]
    fn empty_abstract_warns() {
        let (_, report) = parse("title,authors,year,abstract\nA,B,2001,\n");
        assert_eq!(report.errors.len(), 0);
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].message.contains("abstract"));
    }

    #[test]
    fn multi_valued_cells_split_and_sorted() {
        let (corpus, _) = parse(
            "title,authors,year,abstract,Learning Topic\n\
             A,B,2001,t,science; mathematics\n\
             C,D,2002,u,Science\n",
        );
        let def = corpus.feature("Learning Topic").unwrap();
        assert_eq!(def.kind, FeatureKind::MultiCategorical);
        assert_eq!(def.values, vec!["mathematics", "science"]);
        // case-insensitive match canonicalizes to the first-seen display form
        let second: Vec<_> = corpus.studies[1].features["Learning Topic"].iter().collect();
        assert_eq!(second, vec!["science"]);
        let first: Vec<_> = corpus.studies[0].features["Learning Topic"].iter().collect();
        assert_eq!(first, vec!["mathematics", "science"]);
    }

    #[test]
    fn empty_cell_means_absent_feature() {
        let (corpus, _) = parse("title,authors,year,abstract,Agent Type\nA,B,2001,t,\nC,D,2002,u,Pedagogical\n");
        assert!(!corpus.studies[0].features.contains_key("Agent Type"));
        assert_eq!(corpus.feature("Agent Type").unwrap().values, vec!["Pedagogical"]);
    }

    fn hdr(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn column(cells: &[&str]) -> Vec<Vec<String>> {
        cells.iter().map(|c| vec![c.to_string()]).collect()
    }

    #[test]
    fn infers_numeric() {
        let schema = infer_feature_schema(
            &hdr(&["Sample Year"]),
            &column(&["2003", "2015", "", "1999"]),
            ";",
            &InferenceThresholds::default(),
        );
        assert_eq!(schema[0].kind, FeatureKind::Numeric);
        assert_eq!(schema[0].values, vec!["1999", "2003", "2015"]);
    }

    #[test]
    fn infers_multi_categorical() {
        let schema = infer_feature_schema(
            &hdr(&["Learning Topic"]),
            &column(&["science; mathematics", "language"]),
            ";",
            &InferenceThresholds::default(),
        );
        assert_eq!(schema[0].kind, FeatureKind::MultiCategorical);
        assert_eq!(schema[0].values, vec!["language", "mathematics", "science"]);
    }

    #[test]
    fn long_cells_are_free_text() {
        let long = "x".repeat(201);
        let schema = infer_feature_schema(
            &hdr(&["Notes"]),
            &column(&[&long, &long]),
            ";",
            &InferenceThresholds::default(),
        );
        assert_eq!(schema[0].kind, FeatureKind::FreeText);
        assert!(schema[0].values.is_empty());
        assert!(!schema[0].is_facet());
    }

    #[test]
    fn high_cardinality_is_free_text() {
        let cells: Vec<String> = (0..30).map(|i| alloc::format!("finding {i}")).collect();
        let refs: Vec<&str> = cells.iter().map(String::as_str).collect();
        let schema = infer_feature_schema(
            &hdr(&["Findings"]),
            &column(&refs),
            ";",
            &InferenceThresholds::default(),
        );
        assert_eq!(schema[0].kind, FeatureKind::FreeText);
    }

    #[test]
    fn csv_round_trip_preserves_corpus() {
        let text = "title,authors,year,abstract,Learning Topic,Grade Level,Notes\n\
             \"Agents, tutors\",\"Doe, J.\",2020,\"A \"\"quoted\"\" abstract\",science; mathematics,primary,\n\
             B,Roe,,Second abstract,language,Upper Secondary,some note\n";
        let (first, _) = parse(text);
        let (second, _) = parse(&first.to_csv(";"));
        assert_eq!(first.studies, second.studies);
        assert_eq!(first.schema, second.schema);
        assert_eq!(first.corpus_id, second.corpus_id);
    }
}

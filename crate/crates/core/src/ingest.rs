//! Deficit catalog and cohort parsing.
//!
//! A catalog declares which survey columns are deficits and how each is
//! dichotomized. A cohort CSV is read against a catalog, every deficit cell
//! becomes present/absent/missing, and participants failing the inclusion
//! rules are counted in an exclusion log instead of being retained.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cell values read as missing in any column.
pub const MISSING_TOKENS: [&str; 3] = ["", "NA", "-1"];

pub const DEFAULT_MIN_AGE: u32 = 65;
pub const DEFAULT_MAX_MISSING: usize = 20;
pub const DEFAULT_OUTCOME_COL: &str = "casp19";

/// Upper end of the quality-of-life scale (19 items scored 0..=3).
pub const OUTCOME_MAX: f64 = 57.0;

/// Response labels of the five-point self-rating scale, best to worst.
pub const LIKERT5_LEVELS: [&str; 5] = ["Excellent", "Very good", "Good", "Fair", "Poor"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: {message}")]
    Value {
        row: usize,
        column: String,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeficitKind {
    Binary,
    Likert5,
    Cutoff,
}

/// Side of the threshold on which a count or score counts as a deficit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffDirection {
    Below,
    AtOrBelow,
    Above,
    AtOrAbove,
}

impl CutoffDirection {
    fn is_deficit(self, value: f64, threshold: f64) -> bool {
        match self {
            CutoffDirection::Below => value < threshold,
            CutoffDirection::AtOrBelow => value <= threshold,
            CutoffDirection::Above => value > threshold,
            CutoffDirection::AtOrAbove => value >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rule {
    Binary,
    /// Deficit when the response is one of `present` (stored lower-cased).
    Likert5 { present: Vec<String> },
    Cutoff {
        threshold: f64,
        direction: CutoffDirection,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeficitEntry {
    pub id: String,
    pub description: String,
    pub rule: Rule,
}

impl DeficitEntry {
    pub fn kind(&self) -> DeficitKind {
        match self.rule {
            Rule::Binary => DeficitKind::Binary,
            Rule::Likert5 { .. } => DeficitKind::Likert5,
            Rule::Cutoff { .. } => DeficitKind::Cutoff,
        }
    }

    /// Maps one raw cell to present (`Some(true)`), absent (`Some(false)`)
    /// or missing (`None`).
    ///
    /// Cells already coded 0/1 pass through unchanged for binary and
    /// Likert items, so re-encoding a dichotomized column is the identity.
    pub fn dichotomize(&self, raw: &str) -> Result<Option<bool>, String> {
        let cell = raw.trim();
        if is_missing(cell) {
            return Ok(None);
        }
        match &self.rule {
            Rule::Binary => parse_indicator(cell)
                .map(Some)
                .ok_or_else(|| format!("expected 0 or 1, found `{cell}`")),
            Rule::Likert5 { present } => {
                if let Some(b) = parse_indicator(cell) {
                    return Ok(Some(b));
                }
                let lower = cell.to_lowercase();
                if !LIKERT5_LEVELS.iter().any(|l| l.to_lowercase() == lower) {
                    return Err(format!("`{cell}` is not a five-point scale response"));
                }
                Ok(Some(present.contains(&lower)))
            }
            Rule::Cutoff {
                threshold,
                direction,
            } => {
                let value: f64 = cell
                    .parse()
                    .map_err(|_| format!("expected a number, found `{cell}`"))?;
                if !value.is_finite() {
                    return Err(format!("non-finite value `{cell}`"));
                }
                Ok(Some(direction.is_deficit(value, *threshold)))
            }
        }
    }
}

fn is_missing(cell: &str) -> bool {
    MISSING_TOKENS.contains(&cell)
}

fn parse_indicator(cell: &str) -> Option<bool> {
    match cell {
        "0" | "0.0" => Some(false),
        "1" | "1.0" => Some(true),
        _ => None,
    }
}

/// Validated list of deficit variables, in column order of the analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct DeficitCatalog {
    entries: Vec<DeficitEntry>,
}

// On-disk catalog layout.
#[derive(Debug, Serialize, Deserialize)]
struct CatalogFile {
    deficits: Vec<CatalogFileEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CatalogFileEntry {
    id: String,
    #[serde(default)]
    description: String,
    kind: DeficitKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rule: Option<RuleFile>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    present: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    direction: Option<CutoffDirection>,
}

impl DeficitCatalog {
    pub fn new(entries: Vec<DeficitEntry>) -> Result<Self, IngestError> {
        if entries.len() < 2 {
            return Err(IngestError::Schema(format!(
                "catalog needs at least 2 deficits, found {}",
                entries.len()
            )));
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if e.id.trim().is_empty() {
                return Err(IngestError::Schema("deficit with empty id".into()));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(IngestError::Schema(format!("duplicate deficit id `{}`", e.id)));
            }
            match &e.rule {
                Rule::Likert5 { present } if present.is_empty() => {
                    return Err(IngestError::Schema(format!(
                        "likert5 deficit `{}` declares no deficit levels",
                        e.id
                    )))
                }
                Rule::Cutoff { threshold, .. } if !threshold.is_finite() => {
                    return Err(IngestError::Schema(format!(
                        "cutoff deficit `{}` has a non-finite threshold",
                        e.id
                    )))
                }
                _ => {}
            }
        }
        Ok(Self { entries })
    }

    /// Builds a catalog of plain binary deficits.
    pub fn binary<S: AsRef<str>>(ids: &[S]) -> Result<Self, IngestError> {
        Self::new(
            ids.iter()
                .map(|id| DeficitEntry {
                    id: id.as_ref().to_string(),
                    description: String::new(),
                    rule: Rule::Binary,
                })
                .collect(),
        )
    }

    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        let file: CatalogFile =
            serde_json::from_str(text).map_err(|e| IngestError::Parse(e.to_string()))?;
        let entries = file
            .deficits
            .into_iter()
            .map(entry_from_file)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(entries)
    }

    pub fn to_json(&self) -> String {
        let file = CatalogFile {
            deficits: self.entries.iter().map(entry_to_file).collect(),
        };
        serde_json::to_string_pretty(&file).expect("catalog serializes")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[DeficitEntry] {
        &self.entries
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.id.as_str()).collect()
    }
}

fn entry_from_file(e: CatalogFileEntry) -> Result<DeficitEntry, IngestError> {
    let incomplete = |what: &str| {
        IngestError::Schema(format!("deficit `{}` has an incomplete rule: {what}", e.id))
    };
    let rule = match e.kind {
        DeficitKind::Binary => Rule::Binary,
        DeficitKind::Likert5 => {
            let present = e
                .rule
                .as_ref()
                .and_then(|r| r.present.clone())
                .ok_or_else(|| incomplete("likert5 needs `present`"))?;
            let mut lowered = Vec::with_capacity(present.len());
            for level in present {
                let l = level.trim().to_lowercase();
                if !LIKERT5_LEVELS.iter().any(|s| s.to_lowercase() == l) {
                    return Err(IngestError::Schema(format!(
                        "deficit `{}`: `{level}` is not a five-point scale level",
                        e.id
                    )));
                }
                lowered.push(l);
            }
            Rule::Likert5 { present: lowered }
        }
        DeficitKind::Cutoff => {
            let r = e
                .rule
                .as_ref()
                .ok_or_else(|| incomplete("cutoff needs `threshold` and `direction`"))?;
            Rule::Cutoff {
                threshold: r.threshold.ok_or_else(|| incomplete("missing `threshold`"))?,
                direction: r.direction.ok_or_else(|| incomplete("missing `direction`"))?,
            }
        }
    };
    Ok(DeficitEntry {
        id: e.id,
        description: e.description,
        rule,
    })
}

fn entry_to_file(e: &DeficitEntry) -> CatalogFileEntry {
    let rule = match &e.rule {
        Rule::Binary => None,
        Rule::Likert5 { present } => Some(RuleFile {
            present: Some(
                present
                    .iter()
                    .map(|p| {
                        LIKERT5_LEVELS
                            .iter()
                            .find(|l| l.to_lowercase() == *p)
                            .map_or_else(|| p.clone(), |l| l.to_string())
                    })
                    .collect(),
            ),
            ..RuleFile::default()
        }),
        Rule::Cutoff {
            threshold,
            direction,
        } => Some(RuleFile {
            threshold: Some(*threshold),
            direction: Some(*direction),
            ..RuleFile::default()
        }),
    };
    CatalogFileEntry {
        id: e.id.clone(),
        description: e.description.clone(),
        kind: e.kind(),
        rule,
    }
}

pub fn load_catalog<P: AsRef<Path>>(path: P) -> Result<DeficitCatalog, IngestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    DeficitCatalog::from_json(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sex {
    Male = 0,
    Female = 1,
}

impl Sex {
    pub fn indicator(self) -> f64 {
        self as u8 as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantRecord {
    pub id: String,
    pub age: u32,
    pub sex: Sex,
    /// One entry per catalog deficit; `None` is missing.
    pub deficits: Vec<Option<bool>>,
    pub outcome: Option<f64>,
}

impl ParticipantRecord {
    pub fn missing_count(&self) -> usize {
        self.deficits.iter().filter(|d| d.is_none()).count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionLog {
    pub under_age: usize,
    pub excess_missing: usize,
    pub malformed: usize,
}

impl ExclusionLog {
    pub fn total(&self) -> usize {
        self.under_age + self.excess_missing + self.malformed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortOptions {
    pub min_age: u32,
    pub max_missing: usize,
    pub id_col: String,
    pub age_col: String,
    pub sex_col: String,
    /// Read when present in the header; the outcome is optional.
    pub outcome_col: String,
}

impl Default for CohortOptions {
    fn default() -> Self {
        Self {
            min_age: DEFAULT_MIN_AGE,
            max_missing: DEFAULT_MAX_MISSING,
            id_col: "id".into(),
            age_col: "age".into(),
            sex_col: "sex".into(),
            outcome_col: DEFAULT_OUTCOME_COL.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub records: Vec<ParticipantRecord>,
    pub catalog: DeficitCatalog,
    pub exclusion_log: ExclusionLog,
    /// Data rows read from the input, retained or not.
    pub input_rows: usize,
}

/// Dense N × p view of the deficits, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DeficitMatrix {
    n: usize,
    p: usize,
    cells: Vec<Option<bool>>,
}

impl DeficitMatrix {
    pub fn from_rows(rows: &[Vec<Option<bool>>]) -> Self {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == p), "ragged deficit rows");
        Self {
            n,
            p,
            cells: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.p
    }

    pub fn get(&self, row: usize, col: usize) -> Option<bool> {
        self.cells[row * self.p + col]
    }

    pub fn row(&self, row: usize) -> &[Option<bool>] {
        &self.cells[row * self.p..(row + 1) * self.p]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = Option<bool>> + '_ {
        (0..self.n).map(move |i| self.get(i, col))
    }
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn deficit_matrix(&self) -> DeficitMatrix {
        DeficitMatrix {
            n: self.records.len(),
            p: self.catalog.len(),
            cells: self
                .records
                .iter()
                .flat_map(|r| r.deficits.iter().copied())
                .collect(),
        }
    }

    /// Writes the cohort in the layout `parse_cohort` reads, deficits coded 0/1.
    pub fn write_csv<W: Write>(&self, out: W, outcome_col: &str) -> Result<(), IngestError> {
        let csv_err = |e: csv::Error| IngestError::Parse(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["id", "age", "sex"];
        header.extend(self.catalog.ids());
        header.push(outcome_col);
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.records {
            let mut row = vec![r.id.clone(), r.age.to_string(), (r.sex as u8).to_string()];
            row.extend(r.deficits.iter().map(|d| match d {
                Some(true) => "1".to_string(),
                Some(false) => "0".to_string(),
                None => "NA".to_string(),
            }));
            row.push(r.outcome.map_or_else(|| "NA".to_string(), |o| format!("{o}")));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| IngestError::Parse(e.to_string()))?;
        Ok(())
    }
}

pub fn parse_cohort<P: AsRef<Path>>(
    path: P,
    catalog: &DeficitCatalog,
    opts: &CohortOptions,
) -> Result<Cohort, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_cohort_reader(file, catalog, opts)
}

/// Parses cohort CSV text from any reader. Rows keep their input order.
pub fn parse_cohort_reader<R: Read>(
    input: R,
    catalog: &DeficitCatalog,
    opts: &CohortOptions,
) -> Result<Cohort, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| IngestError::Parse(e.to_string()))?
        .clone();
    let find = |name: &str| header.iter().position(|h| h == name);
    let require = |name: &str| find(name).ok_or_else(|| IngestError::MissingColumn(name.into()));

    let age_idx = require(&opts.age_col)?;
    let sex_idx = require(&opts.sex_col)?;
    let deficit_idx = catalog
        .entries()
        .iter()
        .map(|e| require(&e.id))
        .collect::<Result<Vec<_>, _>>()?;
    let id_idx = find(&opts.id_col);
    let outcome_idx = find(&opts.outcome_col);

    let mut records = Vec::new();
    let mut log = ExclusionLog::default();
    let mut input_rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| IngestError::Parse(e.to_string()))?;
        // 1-based line number including the header
        let row = i + 2;
        input_rows += 1;
        let cell = |idx: usize| rec.get(idx).unwrap_or("").trim();
        let value_err = |column: &str, message: String| IngestError::Value {
            row,
            column: column.to_string(),
            message,
        };

        let age_raw = cell(age_idx);
        let sex_raw = cell(sex_idx);
        let age = if is_missing(age_raw) {
            None
        } else {
            Some(parse_age(age_raw).map_err(|m| value_err(&opts.age_col, m))?)
        };
        let sex = if is_missing(sex_raw) {
            None
        } else {
            Some(match sex_raw {
                "0" | "0.0" => Sex::Male,
                "1" | "1.0" => Sex::Female,
                other => {
                    return Err(value_err(
                        &opts.sex_col,
                        format!("sex must be 0 or 1, found `{other}`"),
                    ))
                }
            })
        };

        let mut deficits = Vec::with_capacity(catalog.len());
        for (entry, &idx) in catalog.entries().iter().zip(&deficit_idx) {
            deficits.push(
                entry
                    .dichotomize(cell(idx))
                    .map_err(|m| value_err(&entry.id, m))?,
            );
        }

        let outcome = match outcome_idx.map(cell) {
            None => None,
            Some(raw) if is_missing(raw) => None,
            Some(raw) => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| value_err(&opts.outcome_col, format!("not a number: `{raw}`")))?;
                if !(0.0..=OUTCOME_MAX).contains(&v) {
                    return Err(value_err(
                        &opts.outcome_col,
                        format!("outcome {v} outside [0, {OUTCOME_MAX}]"),
                    ));
                }
                Some(v)
            }
        };

        let (Some(age), Some(sex)) = (age, sex) else {
            log.malformed += 1;
            continue;
        };
        if age < opts.min_age {
            log.under_age += 1;
            continue;
        }
        let record = ParticipantRecord {
            id: id_idx.map_or_else(|| (row - 1).to_string(), |k| cell(k).to_string()),
            age,
            sex,
            deficits,
            outcome,
        };
        if record.missing_count() > opts.max_missing {
            log.excess_missing += 1;
            continue;
        }
        records.push(record);
    }

    Ok(Cohort {
        records,
        catalog: catalog.clone(),
        exclusion_log: log,
        input_rows,
    })
}

fn parse_age(raw: &str) -> Result<u32, String> {
    let v: f64 = raw
        .parse()
        .map_err(|_| format!("age must be numeric, found `{raw}`"))?;
    if !v.is_finite() || v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(format!("age must be a whole number of years, found `{raw}`"));
    }
    Ok(v as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> DeficitCatalog {
        DeficitCatalog::from_json(
            r#"{"deficits":[
                {"id":"hedibar","description":"Arthritis","kind":"binary"},
                {"id":"hehelp","description":"Self-reported general health","kind":"likert5",
                 "rule":{"present":["Fair","Poor"]}},
                {"id":"cflisen","description":"Words recalled","kind":"cutoff",
                 "rule":{"threshold":4,"direction":"below"}}
            ]}"#,
        )
        .unwrap()
    }

    fn parse(csv: &str, opts: &CohortOptions) -> Result<Cohort, IngestError> {
        parse_cohort_reader(csv.as_bytes(), &catalog(), opts)
    }

    #[test]
    fn empty_catalog_is_rejected() {
        let err = DeficitCatalog::from_json(r#"{"deficits":[]}"#).unwrap_err();
        assert!(matches!(err, IngestError::Schema(_)));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let err = DeficitCatalog::from_json(
            r#"{"deficits":[{"id":"hedibar","kind":"binary"},{"id":"hedibar","kind":"binary"}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::Schema(m) if m.contains("hedibar")));
    }

    #[test]
    fn incomplete_rules_are_rejected() {
        for json in [
            r#"{"deficits":[{"id":"a","kind":"binary"},{"id":"b","kind":"likert5"}]}"#,
            r#"{"deficits":[{"id":"a","kind":"binary"},{"id":"b","kind":"cutoff","rule":{"threshold":3}}]}"#,
            r#"{"deficits":[{"id":"a","kind":"binary"},{"id":"b","kind":"likert5","rule":{"present":["Awful"]}}]}"#,
        ] {
            assert!(matches!(
                DeficitCatalog::from_json(json),
                Err(IngestError::Schema(_))
            ));
        }
        assert!(matches!(
            DeficitCatalog::from_json("{not json"),
            Err(IngestError::Parse(_))
        ));
    }

    #[test]
    fn catalog_json_round_trips() {
        let c = catalog();
        assert_eq!(DeficitCatalog::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn likert_fair_and_poor_are_deficits() {
        let c = catalog();
        let e = &c.entries()[1];
        assert_eq!(e.dichotomize("Fair").unwrap(), Some(true));
        assert_eq!(e.dichotomize("poor").unwrap(), Some(true));
        assert_eq!(e.dichotomize("Good").unwrap(), Some(false));
        assert_eq!(e.dichotomize("Very good").unwrap(), Some(false));
        assert_eq!(e.dichotomize("NA").unwrap(), None);
        assert!(e.dichotomize("Dreadful").is_err());
    }

    #[test]
    fn cutoff_follows_declared_direction() {
        let c = catalog();
        let e = &c.entries()[2];
        assert_eq!(e.dichotomize("3").unwrap(), Some(true));
        assert_eq!(e.dichotomize("4").unwrap(), Some(false));
        assert_eq!(e.dichotomize("").unwrap(), None);
        assert!(e.dichotomize("many").is_err());
    }

    #[test]
    fn missing_tokens_map_to_missing() {
        let c = catalog();
        for token in MISSING_TOKENS {
            assert_eq!(c.entries()[0].dichotomize(token).unwrap(), None);
        }
    }

    #[test]
    fn inclusion_rules_are_applied_and_logged() {
        let csv = "\
id,age,sex,hedibar,hehelp,cflisen,casp19
a,64,0,1,Good,5,40
b,70,1,NA,NA,NA,41
c,80,1,1,Fair,2,
d,,1,0,Good,6,30
";
        let opts = CohortOptions {
            max_missing: 2,
            ..CohortOptions::default()
        };
        let cohort = parse(csv, &opts).unwrap();
        assert_eq!(cohort.input_rows, 4);
        assert_eq!(
            cohort.exclusion_log,
            ExclusionLog {
                under_age: 1,
                excess_missing: 1,
                malformed: 1
            }
        );
        assert_eq!(cohort.records.len(), 1);
        let r = &cohort.records[0];
        assert_eq!(r.id, "c");
        assert_eq!(r.sex, Sex::Female);
        assert_eq!(r.deficits, vec![Some(true), Some(true), Some(true)]);
        assert_eq!(r.outcome, None);
    }

    #[test]
    fn invalid_sex_and_age_are_value_errors() {
        let bad_sex = "id,age,sex,hedibar,hehelp,cflisen\na,70,2,1,Good,5\n";
        assert!(matches!(
            parse(bad_sex, &CohortOptions::default()),
            Err(IngestError::Value { column, .. }) if column == "sex"
        ));
        let bad_age = "id,age,sex,hedibar,hehelp,cflisen\na,old,1,1,Good,5\n";
        assert!(matches!(
            parse(bad_age, &CohortOptions::default()),
            Err(IngestError::Value { column, row: 2, .. }) if column == "age"
        ));
        let bad_outcome = "id,age,sex,hedibar,hehelp,cflisen,casp19\na,70,1,1,Good,5,58\n";
        assert!(matches!(
            parse(bad_outcome, &CohortOptions::default()),
            Err(IngestError::Value { column, .. }) if column == "casp19"
        ));
    }

    #[test]
    fn missing_deficit_column_is_named() {
        let csv = "id,age,sex,hedibar,hehelp\na,70,1,1,Good\n";
        assert!(matches!(
            parse(csv, &CohortOptions::default()),
            Err(IngestError::MissingColumn(c)) if c == "cflisen"
        ));
    }

    #[test]
    fn write_then_parse_preserves_the_cohort() {
        let csv = "\
id,age,sex,hedibar,hehelp,cflisen,casp19
a,66,0,1,Poor,5,40.5
b,91,1,NA,Excellent,0,
";
        let cohort = parse(csv, &CohortOptions::default()).unwrap();
        let mut buf = Vec::new();
        cohort.write_csv(&mut buf, DEFAULT_OUTCOME_COL).unwrap();
        // Cutoff columns are written already dichotomized, so read them back as binary.
        let binary = DeficitCatalog::binary(&["hedibar", "hehelp", "cflisen"]).unwrap();
        let again = parse_cohort_reader(buf.as_slice(), &binary, &CohortOptions::default()).unwrap();
        assert_eq!(again.records, cohort.records);
    }
}

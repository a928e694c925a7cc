//! Labeled review corpus: CSV ingestion, reproducible sampling, summary
//! statistics.
//!
//! The input format is a headerless RFC-4180 CSV with three columns:
//! raw label (`1` = negative, `2` = positive), review title, review body.
//! Bodies are preserved byte-exactly; in particular a literal two-character
//! `\n` sequence stays two characters and is never unescaped.

use std::io::{Read, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Binary sentiment class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Negative, Label::Positive];

    /// Parses the raw CSV label field (`1` or `2`).
    pub fn from_raw(raw: &str) -> Option<Label> {
        match raw {
            "1" => Some(Label::Negative),
            "2" => Some(Label::Positive),
            _ => None,
        }
    }

    pub fn as_raw(self) -> &'static str {
        match self {
            Label::Negative => "1",
            Label::Positive => "2",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    /// Signed target used by the logistic regression loss.
    pub fn signum(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Label::Negative => "negative",
            Label::Positive => "positive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReviewRecord {
    pub label: Label,
    /// May be empty; parsed but not used for classification.
    pub title: String,
    /// The text fed to tokenizers, byte-exact from the CSV field.
    pub body: String,
}

/// An ordered collection of records with per-class counts kept in sync.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    records: Vec<ReviewRecord>,
    class_counts: [usize; 2],
}

impl Dataset {
    pub fn from_records(records: Vec<ReviewRecord>) -> Dataset {
        let mut class_counts = [0usize; 2];
        for r in &records {
            class_counts[r.label.index()] += 1;
        }
        Dataset {
            records,
            class_counts,
        }
    }

    pub fn records(&self) -> &[ReviewRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn class_count(&self, label: Label) -> usize {
        self.class_counts[label.index()]
    }

    /// Counts indexed by [`Label::index`].
    pub fn class_counts(&self) -> [usize; 2] {
        self.class_counts
    }

    pub fn labels(&self) -> Vec<Label> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn bodies(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.body.as_str())
    }
}

/// Parses the three-column review CSV (no header, RFC-4180 quoting).
///
/// Raw label `1` maps to negative, `2` to positive; anything else is
/// rejected. Row numbers in errors are 1-based.
pub fn parse_review_csv<R: Read>(input: R) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = Vec::new();
    for (i, row) in reader.byte_records().enumerate() {
        let row = row?;
        let row_no = i as u64 + 1;
        if row.len() != 3 {
            return Err(Error::MalformedRow {
                row: row_no,
                found: row.len(),
            });
        }
        let field = |idx: usize| -> Result<&str> {
            std::str::from_utf8(&row[idx]).map_err(|_| Error::Encoding { row: row_no })
        };
        let raw_label = field(0)?;
        let label = Label::from_raw(raw_label).ok_or_else(|| Error::InvalidLabel {
            row: row_no,
            value: raw_label.to_string(),
        })?;
        let title = field(1)?.to_string();
        let body = field(2)?.to_string();
        records.push(ReviewRecord { label, title, body });
    }
    Ok(Dataset::from_records(records))
}

/// Writes a dataset back out in the same CSV format it is parsed from.
pub fn write_review_csv<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for r in data.records() {
        writer.write_record([r.label.as_raw(), &r.title, &r.body])?;
    }
    writer.flush()?;
    Ok(())
}

/// Draws `floor(fraction * len)` records uniformly without replacement,
/// preserving the relative order of the retained records.
///
/// Sampling is driven by a ChaCha8 stream seeded with `seed` (Fisher–Yates
/// over the index vector), so a given `(data, fraction, seed)` triple
/// selects the same records on every build and platform.
pub fn random_sample(data: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sample fraction must be in (0, 1], got {fraction}"
        )));
    }
    let n = data.len();
    let take = (fraction * n as f64).floor() as usize;
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffle(&mut indices, &mut rng);
    let mut selected = indices[..take].to_vec();
    selected.sort_unstable();
    let records = selected
        .into_iter()
        .map(|i| data.records[i].clone())
        .collect();
    Ok(Dataset::from_records(records))
}

/// Fisher–Yates with explicit `next_u64` draws so the permutation depends
/// only on the ChaCha8 stream, not on `rand`'s distribution internals.
pub(crate) fn shuffle<T>(items: &mut [T], rng: &mut impl RngCore) {
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub records: usize,
    pub negative: usize,
    pub positive: usize,
    pub mean_body_chars: f64,
}

pub fn dataset_stats(data: &Dataset) -> DatasetStats {
    let total_chars: usize = data.records().iter().map(|r| r.body.chars().count()).sum();
    let mean = if data.is_empty() {
        0.0
    } else {
        total_chars as f64 / data.len() as f64
    };
    DatasetStats {
        records: data.len(),
        negative: data.class_count(Label::Negative),
        positive: data.class_count(Label::Positive),
        mean_body_chars: mean,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(label: Label, body: &str) -> ReviewRecord {
        ReviewRecord {
            label,
            title: String::new(),
            body: body.to_string(),
        }
    }

    #[test]
    fn parses_quoted_row_with_literal_backslash_n() {
        let csv = "\"1\",\"臭い\",\"余りにも、匂いがきつく安物みたいです。\\n 安いから仕方ないかな？\"\n";
        let data = parse_review_csv(csv.as_bytes()).unwrap();
        assert_eq!(data.len(), 1);
        let r = &data.records()[0];
        assert_eq!(r.label, Label::Negative);
        assert_eq!(r.title, "臭い");
        assert_eq!(
            r.body,
            "余りにも、匂いがきつく安物みたいです。\\n 安いから仕方ないかな？"
        );
        // the two-character sequence stays two characters
        assert!(r.body.contains("\\n"));
        assert!(!r.body.contains('\n'));
    }

    #[test]
    fn parses_empty_input() {
        let data = parse_review_csv(&b""[..]).unwrap();
        assert_eq!(data.len(), 0);
        assert_eq!(data.class_counts(), [0, 0]);
    }

    #[test]
    fn rejects_label_outside_domain() {
        let err = parse_review_csv(&b"\"3\",\"x\",\"y\"\n"[..]).unwrap_err();
        match err {
            Error::InvalidLabel { row, value } => {
                assert_eq!(row, 1);
                assert_eq!(value, "3");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn rejects_wrong_field_count_with_row_number() {
        let err = parse_review_csv(&b"1,t,b\n2,only-two\n"[..]).unwrap_err();
        match err {
            Error::MalformedRow { row, found } => {
                assert_eq!(row, 2);
                assert_eq!(found, 2);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn rejects_invalid_utf8() {
        let bytes = b"1,t,\xff\xfe\n".to_vec();
        let err = parse_review_csv(bytes.as_slice()).unwrap_err();
        assert!(matches!(err, Error::Encoding { row: 1 }));
    }

    #[test]
    fn csv_round_trip_preserves_dataset() {
        let csv = "1,\"a,b\",\"line with \"\"quotes\"\" and \\n seq\"\n2,,本文です。\n";
        let data = parse_review_csv(csv.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_review_csv(&data, &mut out).unwrap();
        let reparsed = parse_review_csv(out.as_slice()).unwrap();
        assert_eq!(data, reparsed);
    }

    #[test]
    fn multiline_quoted_body_survives_round_trip() {
        let csv = "2,t,\"first\nsecond\"\n";
        let data = parse_review_csv(csv.as_bytes()).unwrap();
        assert_eq!(data.records()[0].body, "first\nsecond");
        let mut out = Vec::new();
        write_review_csv(&data, &mut out).unwrap();
        assert_eq!(parse_review_csv(out.as_slice()).unwrap(), data);
    }

    #[test]
    fn sample_is_deterministic_and_sized() {
        let records: Vec<ReviewRecord> = (0..1000)
            .map(|i| {
                record(
                    if i % 3 == 0 { Label::Negative } else { Label::Positive },
                    &format!("body {i}"),
                )
            })
            .collect();
        let data = Dataset::from_records(records);
        let a = random_sample(&data, 0.5, 42).unwrap();
        let b = random_sample(&data, 0.5, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 500);
        let c = random_sample(&data, 0.5, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sample_fraction_one_is_identity() {
        let data = Dataset::from_records(vec![
            record(Label::Negative, "x"),
            record(Label::Positive, "y"),
            record(Label::Positive, "z"),
        ]);
        let s = random_sample(&data, 1.0, 7).unwrap();
        assert_eq!(s, data);
    }

    #[test]
    fn sample_preserves_relative_order_and_subset() {
        let records: Vec<ReviewRecord> =
            (0..200).map(|i| record(Label::Positive, &format!("{i}"))).collect();
        let data = Dataset::from_records(records);
        let s = random_sample(&data, 0.3, 5).unwrap();
        assert_eq!(s.len(), 60);
        let positions: Vec<usize> = s
            .records()
            .iter()
            .map(|r| r.body.parse::<usize>().unwrap())
            .collect();
        let mut sorted = positions.clone();
        sorted.sort_unstable();
        assert_eq!(positions, sorted, "relative order preserved");
        assert!(positions.windows(2).all(|w| w[0] != w[1]), "no replacement");
    }

    #[test]
    fn sample_rejects_bad_fractions() {
        let data = Dataset::from_records(vec![record(Label::Positive, "x")]);
        for f in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(
                random_sample(&data, f, 1),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn sample_class_counts_within_three_sigma() {
        // statistical sanity, not strict: hypergeometric sd per class
        let records: Vec<ReviewRecord> = (0..10_000)
            .map(|i| {
                record(
                    if i < 6_000 { Label::Negative } else { Label::Positive },
                    "x",
                )
            })
            .collect();
        let data = Dataset::from_records(records);
        let n = data.len() as f64;
        let k = 1_000.0;
        let s = random_sample(&data, 0.1, 123).unwrap();
        for label in Label::ALL {
            let class = data.class_count(label) as f64;
            let p = class / n;
            let expect = 0.1 * class;
            let sd = (k * p * (1.0 - p) * (n - k) / (n - 1.0)).sqrt();
            let got = s.class_count(label) as f64;
            assert!(
                (got - expect).abs() <= 3.0 * sd,
                "{label}: got {got}, expected {expect} ± {}",
                3.0 * sd
            );
        }
    }

    #[test]
    fn stats_counts_and_mean_length() {
        let data = Dataset::from_records(vec![
            record(Label::Negative, "ab"),
            record(Label::Positive, "abcd"),
        ]);
        let stats = dataset_stats(&data);
        assert_eq!(stats.records, 2);
        assert_eq!(stats.negative, 1);
        assert_eq!(stats.positive, 1);
        assert_eq!(stats.mean_body_chars, 3.0);

        let empty = dataset_stats(&Dataset::default());
        assert_eq!(empty.records, 0);
        assert_eq!(empty.mean_body_chars, 0.0);
    }

    #[test]
    fn mean_length_counts_chars_not_bytes() {
        let data = Dataset::from_records(vec![record(Label::Positive, "自転車")]);
        assert_eq!(dataset_stats(&data).mean_body_chars, 3.0);
    }
}

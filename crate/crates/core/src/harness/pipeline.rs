//! The pipeline itself: fitting, prediction, artifact persistence, and
//! the orchestrated end-to-end run.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::classify::{lr_fit, lr_predict, mnb_fit, mnb_predict, LrModel, MnbModel};
use crate::corpus::{parse_review_csv, random_sample, write_review_csv, Dataset, Label};
use crate::error::{Error, Result};
use crate::harness::{emit_report, evaluate_error, EvalReport, ReportFormat};
use crate::harness::{ClassifierChoice, PipelineConfig, TokenizerChoice};
use crate::lattice::{load_dictionary, LexDictionary};
use crate::subword::{train, SubwordVocab, TrainerConfig};
use crate::tokenizer::Tokenizer;
use crate::vectorize::{fit_transform_timed, tokenize_bodies, TfidfModel};

pub const SAMPLED_TRAIN_FILE: &str = "sampled_train.csv";
pub const SAMPLED_TEST_FILE: &str = "sampled_test.csv";
pub const DICTIONARY_FILE: &str = "dictionary.tsv";
pub const SUBWORD_MODEL_FILE: &str = "subword.tsv";
pub const TFIDF_MODEL_FILE: &str = "tfidf.tsv";
pub const MNB_MODEL_FILE: &str = "mnb.tsv";
pub const LR_MODEL_FILE: &str = "lr.tsv";
pub const META_FILE: &str = "meta.tsv";
pub const CONFIG_FILE: &str = "config.txt";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const REPORT_CSV_FILE: &str = "report.csv";

#[derive(Debug, Clone)]
pub enum TokenizerArtifact {
    Lattice(LexDictionary),
    Subword(SubwordVocab),
}

impl TokenizerArtifact {
    pub fn as_tokenizer(&self) -> &dyn Tokenizer {
        match self {
            TokenizerArtifact::Lattice(dict) => dict,
            TokenizerArtifact::Subword(vocab) => vocab,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ClassifierModel {
    Mnb(MnbModel),
    Lr(LrModel),
}

/// A fitted tokenizer + vectorizer + classifier stack, with the training
/// metrics recorded at fit time.
#[derive(Debug)]
pub struct FittedPipeline {
    pub tokenizer_choice: TokenizerChoice,
    pub classifier_choice: ClassifierChoice,
    pub tokenizer: TokenizerArtifact,
    pub tfidf: TfidfModel,
    pub classifier: ClassifierModel,
    pub error_train: f64,
    pub vectorize_elapsed_seconds: f64,
    pub train_records: usize,
}

impl FittedPipeline {
    /// Builds the tokenizer, vectorizes the training data (timed), fits
    /// the classifier, and records the training error.
    pub fn fit(config: &PipelineConfig, data: &Dataset) -> Result<FittedPipeline> {
        let tokenizer = build_tokenizer(config, data).map_err(Error::stage("tokenizer"))?;
        let (tfidf, matrix, elapsed) = fit_transform_timed(tokenizer.as_tokenizer(), data)
            .map_err(Error::stage("vectorize"))?;
        let labels = data.labels();
        let classifier = match config.classifier {
            ClassifierChoice::Mnb => ClassifierModel::Mnb(
                mnb_fit(&matrix, &labels, config.alpha).map_err(Error::stage("fit"))?,
            ),
            ClassifierChoice::Lr => ClassifierModel::Lr(
                lr_fit(&matrix, &labels, config.c, config.tol, config.max_iter)
                    .map_err(Error::stage("fit"))?,
            ),
        };
        let predicted = match &classifier {
            ClassifierModel::Mnb(m) => mnb_predict(m, &matrix)?.0,
            ClassifierModel::Lr(m) => lr_predict(m, &matrix)?.0,
        };
        let error_train = evaluate_error(&predicted, &labels).map_err(Error::stage("fit"))?;
        Ok(FittedPipeline {
            tokenizer_choice: config.tokenizer,
            classifier_choice: config.classifier,
            tokenizer,
            tfidf,
            classifier,
            error_train,
            vectorize_elapsed_seconds: elapsed,
            train_records: data.len(),
        })
    }

    /// Tokenizes, transforms, and classifies a dataset.
    pub fn predict(&self, data: &Dataset) -> Result<Vec<Label>> {
        let docs = tokenize_bodies(self.tokenizer.as_tokenizer(), data)?;
        let matrix = self.tfidf.transform(&docs);
        Ok(match &self.classifier {
            ClassifierModel::Mnb(m) => mnb_predict(m, &matrix)?.0,
            ClassifierModel::Lr(m) => lr_predict(m, &matrix)?.0,
        })
    }

    /// Writes every model artifact into `dir`, returning the paths
    /// created.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        match &self.tokenizer {
            TokenizerArtifact::Lattice(_) => {}
            TokenizerArtifact::Subword(vocab) => {
                let path = dir.join(SUBWORD_MODEL_FILE);
                vocab.write_tsv(&mut BufWriter::new(File::create(&path)?))?;
                written.push(path);
            }
        }
        let path = dir.join(TFIDF_MODEL_FILE);
        self.tfidf.write_tsv(&mut BufWriter::new(File::create(&path)?))?;
        written.push(path);
        match &self.classifier {
            ClassifierModel::Mnb(m) => {
                let path = dir.join(MNB_MODEL_FILE);
                m.write_tsv(&mut BufWriter::new(File::create(&path)?))?;
                written.push(path);
            }
            ClassifierModel::Lr(m) => {
                let path = dir.join(LR_MODEL_FILE);
                m.write_tsv(&mut BufWriter::new(File::create(&path)?))?;
                written.push(path);
            }
        }
        let path = dir.join(META_FILE);
        let mut meta = BufWriter::new(File::create(&path)?);
        writeln!(meta, "tokenizer\t{}", self.tokenizer_choice)?;
        writeln!(meta, "classifier\t{}", self.classifier_choice)?;
        writeln!(meta, "error_train\t{:.16e}", self.error_train)?;
        writeln!(
            meta,
            "vectorize_elapsed_seconds\t{:.16e}",
            self.vectorize_elapsed_seconds
        )?;
        writeln!(meta, "train_records\t{}", self.train_records)?;
        meta.flush()?;
        written.push(path);
        Ok(written)
    }

    /// Loads a pipeline saved by [`FittedPipeline::save`] (the dictionary
    /// file must be present in the directory for lattice runs).
    pub fn load(dir: &Path) -> Result<FittedPipeline> {
        let meta_path = dir.join(META_FILE);
        let meta_text = fs::read_to_string(&meta_path)
            .map_err(|_| Error::MissingPath(meta_path.clone()))?;
        let mut meta: BTreeMap<String, String> = BTreeMap::new();
        for line in meta_text.lines() {
            if let Some((k, v)) = line.split_once('\t') {
                meta.insert(k.to_string(), v.to_string());
            }
        }
        let get = |key: &str| -> Result<&String> {
            meta.get(key)
                .ok_or_else(|| Error::ModelFormat(format!("meta.tsv missing {key}")))
        };
        let tokenizer_choice: TokenizerChoice = get("tokenizer")?.parse()?;
        let classifier_choice: ClassifierChoice = get("classifier")?.parse()?;
        let error_train: f64 = get("error_train")?
            .parse()
            .map_err(|_| Error::ModelFormat("bad error_train in meta.tsv".into()))?;
        let vectorize_elapsed_seconds: f64 = get("vectorize_elapsed_seconds")?
            .parse()
            .map_err(|_| Error::ModelFormat("bad vectorize_elapsed_seconds".into()))?;
        let train_records: usize = get("train_records")?
            .parse()
            .map_err(|_| Error::ModelFormat("bad train_records".into()))?;

        let tokenizer = match tokenizer_choice {
            TokenizerChoice::Lattice => {
                let path = dir.join(DICTIONARY_FILE);
                let file = File::open(&path).map_err(|_| Error::MissingPath(path))?;
                TokenizerArtifact::Lattice(load_dictionary(BufReader::new(file))?)
            }
            TokenizerChoice::Subword => {
                let path = dir.join(SUBWORD_MODEL_FILE);
                let file = File::open(&path).map_err(|_| Error::MissingPath(path))?;
                TokenizerArtifact::Subword(SubwordVocab::read_tsv(BufReader::new(file))?)
            }
        };
        let tfidf = {
            let path = dir.join(TFIDF_MODEL_FILE);
            let file = File::open(&path).map_err(|_| Error::MissingPath(path))?;
            TfidfModel::read_tsv(BufReader::new(file))?
        };
        let classifier = match classifier_choice {
            ClassifierChoice::Mnb => {
                let path = dir.join(MNB_MODEL_FILE);
                let file = File::open(&path).map_err(|_| Error::MissingPath(path))?;
                ClassifierModel::Mnb(MnbModel::read_tsv(BufReader::new(file))?)
            }
            ClassifierChoice::Lr => {
                let path = dir.join(LR_MODEL_FILE);
                let file = File::open(&path).map_err(|_| Error::MissingPath(path))?;
                ClassifierModel::Lr(LrModel::read_tsv(BufReader::new(file))?)
            }
        };
        Ok(FittedPipeline {
            tokenizer_choice,
            classifier_choice,
            tokenizer,
            tfidf,
            classifier,
            error_train,
            vectorize_elapsed_seconds,
            train_records,
        })
    }
}

fn build_tokenizer(config: &PipelineConfig, data: &Dataset) -> Result<TokenizerArtifact> {
    match config.tokenizer {
        TokenizerChoice::Lattice => {
            let path = config
                .dictionary
                .as_ref()
                .ok_or_else(|| Error::Config("tokenizer=lattice requires a dictionary".into()))?;
            let file = File::open(path).map_err(|_| Error::MissingPath(path.clone()))?;
            Ok(TokenizerArtifact::Lattice(load_dictionary(BufReader::new(
                file,
            ))?))
        }
        TokenizerChoice::Subword => match &config.subword_model {
            Some(path) => {
                let file = File::open(path).map_err(|_| Error::MissingPath(path.clone()))?;
                Ok(TokenizerArtifact::Subword(SubwordVocab::read_tsv(
                    BufReader::new(file),
                )?))
            }
            None => {
                let corpus: Vec<String> = data.bodies().map(str::to_string).collect();
                let trainer_config = TrainerConfig::with_vocab_size(config.vocab_size);
                Ok(TokenizerArtifact::Subword(train(&corpus, &trainer_config)?))
            }
        },
    }
}

/// Runs the full experiment flow: validate, load, sample, fit, evaluate,
/// and write all artifacts plus the report into the output directory.
/// Deterministic for a fixed config: everything except the timestamp and
/// wall-clock timing is identical across runs and thread counts. On
/// failure the error names the stage and any partially written outputs
/// are removed.
pub fn run_pipeline(config: &PipelineConfig) -> Result<EvalReport> {
    config.validate().map_err(Error::stage("validate"))?;
    let train_full = load_csv(&config.train_csv).map_err(Error::stage("load-train"))?;
    let test_full = load_csv(&config.test_csv).map_err(Error::stage("load-test"))?;
    let train = random_sample(&train_full, config.sample_fraction, config.sample_seed)
        .map_err(Error::stage("sample"))?;
    // test split gets its own stream so train/test selections stay
    // independent for any fraction
    let test = random_sample(
        &test_full,
        config.sample_fraction,
        config.sample_seed.wrapping_add(1),
    )
    .map_err(Error::stage("sample"))?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::Stage {
            stage: "sample",
            source: Box::new(Error::InvalidArgument(
                "sampled dataset is empty; raise sample_fraction".into(),
            )),
        });
    }

    let fitted = FittedPipeline::fit(config, &train)?;
    let predicted = fitted.predict(&test).map_err(Error::stage("predict"))?;
    let error_test =
        evaluate_error(&predicted, &test.labels()).map_err(Error::stage("evaluate"))?;

    let report = EvalReport {
        tokenizer: config.tokenizer.report_name().to_string(),
        classifier: config.classifier.report_name().to_string(),
        error_train: fitted.error_train,
        error_test,
        vectorize_elapsed_seconds: fitted.vectorize_elapsed_seconds,
        train_records: train.len(),
        test_records: test.len(),
        config_echo: config.echo(),
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .unwrap_or_default()
            .as_secs(),
    };

    write_outputs(config, &train, &test, &fitted, &report).map_err(Error::stage("write"))?;
    Ok(report)
}

fn load_csv(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|_| Error::MissingPath(path.to_path_buf()))?;
    parse_review_csv(BufReader::new(file))
}

fn write_outputs(
    config: &PipelineConfig,
    train: &Dataset,
    test: &Dataset,
    fitted: &FittedPipeline,
    report: &EvalReport,
) -> Result<()> {
    let dir = &config.output_dir;
    let mut written: Vec<PathBuf> = Vec::new();
    fn write_file(
        dir: &Path,
        name: &str,
        contents: &[u8],
        written: &mut Vec<PathBuf>,
    ) -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, contents)?;
        written.push(path);
        Ok(())
    }

    let result = (|| -> Result<()> {
        fs::create_dir_all(dir)?;

        let mut buf = Vec::new();
        write_review_csv(train, &mut buf)?;
        write_file(dir, SAMPLED_TRAIN_FILE, &buf, &mut written)?;
        let mut buf = Vec::new();
        write_review_csv(test, &mut buf)?;
        write_file(dir, SAMPLED_TEST_FILE, &buf, &mut written)?;

        if let Some(dictionary) = &config.dictionary {
            let bytes = fs::read(dictionary)?;
            write_file(dir, DICTIONARY_FILE, &bytes, &mut written)?;
        }
        let saved = fitted.save(dir)?;
        written.extend(saved);

        write_file(dir, CONFIG_FILE, config.echo().as_bytes(), &mut written)?;
        let mut meta = String::new();
        meta.push_str(&format!("error_test\t{:.16e}\n", report.error_test));
        meta.push_str(&format!("test_records\t{}\n", report.test_records));
        meta.push_str(&format!("timestamp_unix\t{}\n", report.timestamp_unix));
        let meta_path = dir.join(META_FILE);
        let mut meta_file = fs::OpenOptions::new().append(true).open(&meta_path)?;
        meta_file.write_all(meta.as_bytes())?;

        write_file(
            dir,
            REPORT_TEXT_FILE,
            emit_report(std::slice::from_ref(report), ReportFormat::Text)?.as_bytes(),
            &mut written,
        )?;
        write_file(
            dir,
            REPORT_CSV_FILE,
            emit_report(std::slice::from_ref(report), ReportFormat::Csv)?.as_bytes(),
            &mut written,
        )?;
        Ok(())
    })();

    if result.is_err() {
        for path in written {
            let _ = fs::remove_file(path);
        }
        // save() may have failed partway through its own set
        for name in [
            SAMPLED_TRAIN_FILE,
            SAMPLED_TEST_FILE,
            DICTIONARY_FILE,
            SUBWORD_MODEL_FILE,
            TFIDF_MODEL_FILE,
            MNB_MODEL_FILE,
            LR_MODEL_FILE,
            META_FILE,
            CONFIG_FILE,
            REPORT_TEXT_FILE,
            REPORT_CSV_FILE,
        ] {
            let _ = fs::remove_file(dir.join(name));
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ReviewRecord;

    fn write_mini_csv(path: &Path, rows: &[(&str, &str)]) {
        let records: Vec<ReviewRecord> = rows
            .iter()
            .map(|(label, body)| ReviewRecord {
                label: if *label == "1" { Label::Negative } else { Label::Positive },
                title: String::new(),
                body: body.to_string(),
            })
            .collect();
        let data = Dataset::from_records(records);
        let mut buf = Vec::new();
        write_review_csv(&data, &mut buf).unwrap();
        fs::write(path, buf).unwrap();
    }

    fn tiny_corpus(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
        let train = dir.join("train.csv");
        let test = dir.join("test.csv");
        let dict = dir.join("dict.tsv");
        let mut rows = Vec::new();
        for _ in 0..6 {
            rows.push(("2", "良い品 とても良い"));
            rows.push(("1", "悪い品 とても悪い"));
        }
        write_mini_csv(&train, &rows);
        write_mini_csv(
            &test,
            &[("2", "良い品"), ("1", "悪い品"), ("2", "とても良い"), ("1", "とても悪い")],
        );
        fs::write(
            &dict,
            "良い\t100\n悪い\t100\n品\t200\nとても\t150\n \t50\n__UNKNOWN__\t10000\n",
        )
        .unwrap();
        (train, test, dict)
    }

    fn base_config(dir: &Path) -> PipelineConfig {
        let (train, test, dict) = tiny_corpus(dir);
        let mut config = PipelineConfig::default();
        config.train_csv = train;
        config.test_csv = test;
        config.output_dir = dir.join("out");
        config.dictionary = Some(dict);
        config.vocab_size = 64;
        config
    }

    #[test]
    fn lattice_lr_pipeline_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = base_config(dir.path());
        config.tokenizer = TokenizerChoice::Lattice;
        let report = run_pipeline(&config).unwrap();
        assert_eq!(report.tokenizer, "Lattice");
        assert_eq!(report.classifier, "LR");
        assert_eq!(report.error_train, 0.0, "separable toy corpus");
        assert_eq!(report.error_test, 0.0);
        assert!(report.vectorize_elapsed_seconds > 0.0);
        assert_eq!(report.train_records, 12);
        assert_eq!(report.test_records, 4);
        for file in [
            SAMPLED_TRAIN_FILE,
            SAMPLED_TEST_FILE,
            DICTIONARY_FILE,
            TFIDF_MODEL_FILE,
            LR_MODEL_FILE,
            META_FILE,
            CONFIG_FILE,
            REPORT_TEXT_FILE,
            REPORT_CSV_FILE,
        ] {
            assert!(config.output_dir.join(file).exists(), "missing {file}");
        }
    }

    #[test]
    fn subword_mnb_pipeline_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = base_config(dir.path());
        config.tokenizer = TokenizerChoice::Subword;
        config.classifier = ClassifierChoice::Mnb;
        let report = run_pipeline(&config).unwrap();
        assert_eq!(report.tokenizer, "SP");
        assert_eq!(report.classifier, "MNB");

        // checkpoint equivalence: reload artifacts, re-evaluate, match
        let fitted = FittedPipeline::load(&config.output_dir).unwrap();
        assert_eq!(fitted.error_train, report.error_train);
        let test = load_csv(&config.test_csv).unwrap();
        let predicted = fitted.predict(&test).unwrap();
        let error = evaluate_error(&predicted, &test.labels()).unwrap();
        assert_eq!(error, report.error_test);

        // and the sampled training CSV reproduces the training error
        let train = load_csv(&config.output_dir.join(SAMPLED_TRAIN_FILE)).unwrap();
        let predicted = fitted.predict(&train).unwrap();
        let error = evaluate_error(&predicted, &train.labels()).unwrap();
        assert_eq!(error, report.error_train);
    }

    #[test]
    fn pipeline_is_deterministic_modulo_timestamp() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = base_config(dir.path());
        config.sample_fraction = 0.75;
        let a = run_pipeline(&config).unwrap();
        let b = run_pipeline(&config).unwrap();
        assert_eq!(a.deterministic_fields(), b.deterministic_fields());
    }

    #[test]
    fn missing_train_csv_fails_in_validate_stage() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = base_config(dir.path());
        config.train_csv = dir.path().join("nope.csv");
        let err = run_pipeline(&config).unwrap_err();
        match err {
            Error::Stage { stage, source } => {
                assert_eq!(stage, "validate");
                assert!(matches!(*source, Error::MissingPath(_)));
            }
            other => panic!("unexpected error: {other}"),
        }
        assert!(!config.output_dir.exists(), "no work before validation");
    }

    #[test]
    fn stage_error_names_the_failing_stage() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = base_config(dir.path());
        // vocab smaller than the alphabet: subword training must fail
        config.tokenizer = TokenizerChoice::Subword;
        config.vocab_size = 2;
        let err = run_pipeline(&config).unwrap_err();
        match err {
            Error::Stage { stage, .. } => assert_eq!(stage, "tokenizer"),
            other => panic!("unexpected error: {other}"),
        }
    }
}

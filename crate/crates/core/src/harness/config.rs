//! Pipeline configuration: a flat `key=value` text format where every
//! key can also be supplied or overridden by a CLI flag of the same name.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenizerChoice {
    Lattice,
    Subword,
}

impl TokenizerChoice {
    /// Display name used in report rows.
    pub fn report_name(self) -> &'static str {
        match self {
            TokenizerChoice::Lattice => "Lattice",
            TokenizerChoice::Subword => "SP",
        }
    }
}

impl FromStr for TokenizerChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lattice" => Ok(TokenizerChoice::Lattice),
            "subword" => Ok(TokenizerChoice::Subword),
            other => Err(Error::Config(format!(
                "unknown tokenizer {other:?} (expected lattice or subword)"
            ))),
        }
    }
}

impl fmt::Display for TokenizerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenizerChoice::Lattice => "lattice",
            TokenizerChoice::Subword => "subword",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierChoice {
    Mnb,
    Lr,
}

impl ClassifierChoice {
    pub fn report_name(self) -> &'static str {
        match self {
            ClassifierChoice::Mnb => "MNB",
            ClassifierChoice::Lr => "LR",
        }
    }
}

impl FromStr for ClassifierChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnb" => Ok(ClassifierChoice::Mnb),
            "lr" => Ok(ClassifierChoice::Lr),
            other => Err(Error::Config(format!(
                "unknown classifier {other:?} (expected mnb or lr)"
            ))),
        }
    }
}

impl fmt::Display for ClassifierChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierChoice::Mnb => "mnb",
            ClassifierChoice::Lr => "lr",
        })
    }
}

/// Everything one end-to-end run needs. See [`PipelineConfig::set`] for
/// the recognized keys.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub train_csv: PathBuf,
    pub test_csv: PathBuf,
    pub output_dir: PathBuf,
    pub tokenizer: TokenizerChoice,
    pub classifier: ClassifierChoice,
    /// Dictionary TSV; required for the lattice tokenizer.
    pub dictionary: Option<PathBuf>,
    /// Pre-trained subword model; trained from the data when absent.
    pub subword_model: Option<PathBuf>,
    pub sample_fraction: f64,
    pub sample_seed: u64,
    pub vocab_size: usize,
    pub alpha: f64,
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub cv_k: usize,
    pub cv_repeats: usize,
    pub cv_seed: u64,
    pub grid: Vec<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            train_csv: PathBuf::new(),
            test_csv: PathBuf::new(),
            output_dir: PathBuf::new(),
            tokenizer: TokenizerChoice::Subword,
            classifier: ClassifierChoice::Lr,
            dictionary: None,
            subword_model: None,
            sample_fraction: 1.0,
            sample_seed: 42,
            vocab_size: 2000,
            alpha: crate::classify::DEFAULT_ALPHA,
            c: crate::classify::DEFAULT_C,
            tol: crate::classify::DEFAULT_TOL,
            max_iter: crate::classify::DEFAULT_MAX_ITER,
            cv_k: 5,
            cv_repeats: 3,
            cv_seed: 42,
            grid: crate::classify::DEFAULT_GRID.to_vec(),
        }
    }
}

impl PipelineConfig {
    /// Parses a config file: one `key=value` per line, `#` comments and
    /// blank lines ignored, later keys override earlier ones.
    pub fn from_file(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = PipelineConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got {line:?}", i + 1))
            })?;
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    /// Applies one key=value pair (the same names the config file uses).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("bad {what} value {value:?}"));
        match key {
            "train_csv" => self.train_csv = PathBuf::from(value),
            "test_csv" => self.test_csv = PathBuf::from(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "tokenizer" => self.tokenizer = value.parse()?,
            "classifier" => self.classifier = value.parse()?,
            "dictionary" => self.dictionary = Some(PathBuf::from(value)),
            "subword_model" => self.subword_model = Some(PathBuf::from(value)),
            "sample_fraction" => {
                self.sample_fraction = value.parse().map_err(|_| bad("sample_fraction"))?
            }
            "sample_seed" => self.sample_seed = value.parse().map_err(|_| bad("sample_seed"))?,
            "vocab_size" => self.vocab_size = value.parse().map_err(|_| bad("vocab_size"))?,
            "alpha" => self.alpha = value.parse().map_err(|_| bad("alpha"))?,
            "c" => self.c = value.parse().map_err(|_| bad("c"))?,
            "tol" => self.tol = value.parse().map_err(|_| bad("tol"))?,
            "max_iter" => self.max_iter = value.parse().map_err(|_| bad("max_iter"))?,
            "cv_k" => self.cv_k = value.parse().map_err(|_| bad("cv_k"))?,
            "cv_repeats" => self.cv_repeats = value.parse().map_err(|_| bad("cv_repeats"))?,
            "cv_seed" => self.cv_seed = value.parse().map_err(|_| bad("cv_seed"))?,
            "grid" => self.grid = parse_grid(value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Checks paths and value ranges before any work starts.
    pub fn validate(&self) -> Result<()> {
        for (name, path) in [("train_csv", &self.train_csv), ("test_csv", &self.test_csv)] {
            if path.as_os_str().is_empty() {
                return Err(Error::Config(format!("{name} is not set")));
            }
            if !path.exists() {
                return Err(Error::MissingPath(path.clone()));
            }
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::Config("output_dir is not set".into()));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "sample_fraction must be in (0, 1], got {}",
                self.sample_fraction
            )));
        }
        match (self.tokenizer, &self.dictionary) {
            (TokenizerChoice::Lattice, None) => {
                return Err(Error::Config(
                    "tokenizer=lattice requires a dictionary path".into(),
                ))
            }
            (TokenizerChoice::Lattice, Some(path)) if !path.exists() => {
                return Err(Error::MissingPath(path.clone()))
            }
            _ => {}
        }
        if let Some(path) = &self.subword_model {
            if !path.exists() {
                return Err(Error::MissingPath(path.clone()));
            }
        }
        if self.vocab_size == 0 {
            return Err(Error::Config("vocab_size must be positive".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.c > 0.0) {
            return Err(Error::Config(format!("c must be positive, got {}", self.c)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        if self.cv_k < 2 {
            return Err(Error::Config("cv_k must be at least 2".into()));
        }
        if self.cv_repeats == 0 {
            return Err(Error::Config("cv_repeats must be positive".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::Config("grid must not be empty".into()));
        }
        Ok(())
    }

    /// The resolved configuration as config-file text; feeding it back to
    /// [`PipelineConfig::from_file`] reproduces this configuration.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut push = |key: &str, value: String| {
            out.push_str(key);
            out.push('=');
            out.push_str(&value);
            out.push('\n');
        };
        push("train_csv", self.train_csv.display().to_string());
        push("test_csv", self.test_csv.display().to_string());
        push("output_dir", self.output_dir.display().to_string());
        push("tokenizer", self.tokenizer.to_string());
        push("classifier", self.classifier.to_string());
        if let Some(path) = &self.dictionary {
            push("dictionary", path.display().to_string());
        }
        if let Some(path) = &self.subword_model {
            push("subword_model", path.display().to_string());
        }
        push("sample_fraction", self.sample_fraction.to_string());
        push("sample_seed", self.sample_seed.to_string());
        push("vocab_size", self.vocab_size.to_string());
        push("alpha", self.alpha.to_string());
        push("c", self.c.to_string());
        push("tol", self.tol.to_string());
        push("max_iter", self.max_iter.to_string());
        push("cv_k", self.cv_k.to_string());
        push("cv_repeats", self.cv_repeats.to_string());
        push("cv_seed", self.cv_seed.to_string());
        push(
            "grid",
            self.grid
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        out
    }
}

/// Accepts `0.01,0.1,1` or the CLI spelling `C=0.01,0.1,1`.
pub fn parse_grid(value: &str) -> Result<Vec<f64>> {
    let list = value.strip_prefix("C=").unwrap_or(value);
    let mut grid = Vec::new();
    for part in list.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let c: f64 = part
            .parse()
            .map_err(|_| Error::Config(format!("bad grid value {part:?}")))?;
        if !(c > 0.0) {
            return Err(Error::Config(format!("grid values must be positive, got {c}")));
        }
        grid.push(c);
    }
    if grid.is_empty() {
        return Err(Error::Config("grid must not be empty".into()));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parses_key_value_file_with_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "# comment").unwrap();
        writeln!(f, "train_csv=/tmp/train.csv").unwrap();
        writeln!(f).unwrap();
        writeln!(f, "tokenizer=lattice").unwrap();
        writeln!(f, "c=0.5").unwrap();
        writeln!(f, "grid=C=1,10").unwrap();
        drop(f);
        let config = PipelineConfig::from_file(&path).unwrap();
        assert_eq!(config.train_csv, PathBuf::from("/tmp/train.csv"));
        assert_eq!(config.tokenizer, TokenizerChoice::Lattice);
        assert_eq!(config.c, 0.5);
        assert_eq!(config.grid, vec![1.0, 10.0]);
        // untouched keys keep defaults
        assert_eq!(config.vocab_size, 2000);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let mut config = PipelineConfig::default();
        assert!(matches!(
            config.set("nonsense", "1"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn echo_round_trips_through_set() {
        let mut config = PipelineConfig::default();
        config.set("train_csv", "a.csv").unwrap();
        config.set("test_csv", "b.csv").unwrap();
        config.set("output_dir", "out").unwrap();
        config.set("dictionary", "dict.tsv").unwrap();
        config.set("sample_fraction", "0.25").unwrap();
        let echo = config.echo();
        let mut rebuilt = PipelineConfig::default();
        for line in echo.lines() {
            let (k, v) = line.split_once('=').unwrap();
            rebuilt.set(k, v).unwrap();
        }
        assert_eq!(rebuilt, config);
    }

    #[test]
    fn validate_requires_existing_paths_and_sane_ranges() {
        let dir = tempfile::tempdir().unwrap();
        let train = dir.path().join("train.csv");
        let test = dir.path().join("test.csv");
        std::fs::write(&train, "1,t,b\n").unwrap();
        std::fs::write(&test, "2,t,b\n").unwrap();

        let mut config = PipelineConfig::default();
        assert!(config.validate().is_err(), "unset paths");
        config.train_csv = train;
        config.test_csv = test.clone();
        config.output_dir = dir.path().join("out");
        config.validate().unwrap();

        config.sample_fraction = 0.0;
        assert!(config.validate().is_err());
        config.sample_fraction = 1.0;

        config.tokenizer = TokenizerChoice::Lattice;
        assert!(config.validate().is_err(), "lattice needs a dictionary");
        let dict = dir.path().join("dict.tsv");
        std::fs::write(&dict, "x\t1\n").unwrap();
        config.dictionary = Some(dict);
        config.validate().unwrap();

        config.test_csv = dir.path().join("missing.csv");
        assert!(matches!(config.validate(), Err(Error::MissingPath(_))));
    }
}

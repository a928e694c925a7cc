//! `bunrui` — train tokenizers, vectorize reviews, fit classifiers, and
//! benchmark the whole pipeline from the command line.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal
//! error.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bunrui_core::corpus::{dataset_stats, parse_review_csv, random_sample, write_review_csv, Dataset};
use bunrui_core::error::{Error, Result};
use bunrui_core::harness::{
    emit_report, evaluate_error, parse_grid, run_pipeline, EvalReport, FittedPipeline,
    PipelineConfig, ReportFormat, TokenizerArtifact, TokenizerChoice,
};
use bunrui_core::lattice::load_dictionary;
use bunrui_core::subword::{train, SubwordVocab, TrainerConfig};
use bunrui_core::tokenizer::Tokenizer;
use bunrui_core::vectorize::{fit_transform_timed, tokenize_bodies};
use bunrui_core::{classify, harness};

#[derive(Parser)]
#[command(
    name = "bunrui",
    version,
    about = "Text classification toolkit: lattice and subword tokenizers, TF-IDF, MNB/LR classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a reproducible random sample from a review CSV
    Sample {
        /// Input review CSV (label,title,body; no header)
        #[arg(long)]
        input: PathBuf,
        /// Fraction of records to keep, in (0, 1]
        #[arg(long, default_value_t = 0.1)]
        fraction: f64,
        /// PRNG seed
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output CSV path
        #[arg(long)]
        output: PathBuf,
    },
    /// Train a unigram subword model on review bodies
    TrainSubword {
        /// Training review CSV
        #[arg(long)]
        input: PathBuf,
        /// Target vocabulary size
        #[arg(long, default_value_t = 2000)]
        vocab_size: usize,
        /// Output model TSV
        #[arg(long)]
        output: PathBuf,
        /// Longest candidate piece in characters
        #[arg(long, default_value_t = 8)]
        max_piece_len: usize,
        /// Seed candidate cap (default 20 × vocab size)
        #[arg(long)]
        seed_size: Option<usize>,
        /// Vocabulary fraction kept per pruning round
        #[arg(long, default_value_t = 0.75)]
        shrink_factor: f64,
        /// EM iterations between pruning rounds
        #[arg(long, default_value_t = 2)]
        em_iters: usize,
        /// Training sentences longer than this are split
        #[arg(long, default_value_t = 4096)]
        max_sentence_len: usize,
    },
    /// Tokenize review bodies: one document per line, tokens tab-separated
    Tokenize {
        #[arg(long)]
        tokenizer: String,
        /// Dictionary TSV (lattice) or subword model TSV (subword)
        #[arg(long)]
        model: PathBuf,
        /// Input review CSV
        #[arg(long)]
        input: PathBuf,
        /// Output text file
        #[arg(long)]
        output: PathBuf,
    },
    /// Vectorize a training CSV (timed) and fit a classifier
    Fit {
        #[arg(long)]
        tokenizer: String,
        /// Dictionary TSV (lattice) or pre-trained subword model; subword
        /// trains from the data when omitted
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        classifier: String,
        /// Training review CSV
        #[arg(long)]
        train: PathBuf,
        /// Directory for model artifacts
        #[arg(long)]
        output_dir: PathBuf,
        /// Subword vocabulary size when training in-line
        #[arg(long, default_value_t = 2000)]
        vocab_size: usize,
        /// MNB smoothing
        #[arg(long, default_value_t = classify::DEFAULT_ALPHA)]
        alpha: f64,
        /// LR inverse regularization strength
        #[arg(long, default_value_t = classify::DEFAULT_C)]
        c: f64,
        /// LR gradient tolerance
        #[arg(long, default_value_t = classify::DEFAULT_TOL)]
        tol: f64,
        /// LR iteration cap
        #[arg(long, default_value_t = classify::DEFAULT_MAX_ITER)]
        max_iter: usize,
    },
    /// Evaluate a fitted model directory against a test CSV
    Evaluate {
        #[arg(long)]
        model_dir: PathBuf,
        /// Test review CSV
        #[arg(long)]
        test: PathBuf,
    },
    /// Grid-search the LR C parameter with repeated stratified k-fold CV
    Gridsearch {
        /// Training review CSV
        #[arg(long)]
        train: PathBuf,
        /// C values, e.g. "C=0.01,0.1,1,10,100"
        #[arg(long, default_value = "C=0.01,0.1,1,10,100")]
        grid: String,
        /// Folds
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Plan repetitions
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Fold-shuffle seed
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        tokenizer: String,
        /// Dictionary TSV (lattice) or subword model (subword; trained
        /// in-line when omitted)
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        vocab_size: usize,
    },
    /// Time TF-IDF vectorization per tokenizer over growing data sizes
    Bench {
        /// Training review CSV
        #[arg(long)]
        train: PathBuf,
        /// Comma-separated tokenizers: lattice,subword
        #[arg(long, default_value = "lattice,subword")]
        tokenizers: String,
        /// Comma-separated record counts, e.g. 1000,10000,100000
        #[arg(long)]
        sizes: String,
        /// Dictionary TSV for the lattice tokenizer
        #[arg(long)]
        dictionary: Option<PathBuf>,
        /// Pre-trained subword model; trained once on the full train CSV
        /// when omitted
        #[arg(long)]
        subword_model: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        vocab_size: usize,
    },
    /// Run the full pipeline from a key=value config file
    Run(RunArgs),
}

/// Every config key is also a flag of the same name; flags override the
/// file.
#[derive(Args)]
struct RunArgs {
    /// key=value config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train_csv: Option<String>,
    #[arg(long)]
    test_csv: Option<String>,
    #[arg(long)]
    output_dir: Option<String>,
    #[arg(long)]
    tokenizer: Option<String>,
    #[arg(long)]
    classifier: Option<String>,
    #[arg(long)]
    dictionary: Option<String>,
    #[arg(long)]
    subword_model: Option<String>,
    #[arg(long)]
    sample_fraction: Option<String>,
    #[arg(long)]
    sample_seed: Option<String>,
    #[arg(long)]
    vocab_size: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long)]
    cv_k: Option<String>,
    #[arg(long)]
    cv_repeats: Option<String>,
    #[arg(long)]
    cv_seed: Option<String>,
    #[arg(long)]
    grid: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Sample {
            input,
            fraction,
            seed,
            output,
        } => cmd_sample(&input, fraction, seed, &output),
        Command::TrainSubword {
            input,
            vocab_size,
            output,
            max_piece_len,
            seed_size,
            shrink_factor,
            em_iters,
            max_sentence_len,
        } => {
            let config = TrainerConfig {
                vocab_size,
                max_piece_len,
                seed_size,
                shrink_factor,
                em_iters_per_round: em_iters,
                max_sentence_len,
                ..TrainerConfig::default()
            };
            cmd_train_subword(&input, &config, &output)
        }
        Command::Tokenize {
            tokenizer,
            model,
            input,
            output,
        } => cmd_tokenize(&tokenizer.parse()?, &model, &input, &output),
        Command::Fit {
            tokenizer,
            model,
            classifier,
            train,
            output_dir,
            vocab_size,
            alpha,
            c,
            tol,
            max_iter,
        } => {
            let mut config = PipelineConfig::default();
            config.tokenizer = tokenizer.parse()?;
            config.classifier = classifier.parse()?;
            config.vocab_size = vocab_size;
            config.alpha = alpha;
            config.c = c;
            config.tol = tol;
            config.max_iter = max_iter;
            match config.tokenizer {
                TokenizerChoice::Lattice => config.dictionary = model,
                TokenizerChoice::Subword => config.subword_model = model,
            }
            cmd_fit(&config, &train, &output_dir)
        }
        Command::Evaluate { model_dir, test } => cmd_evaluate(&model_dir, &test),
        Command::Gridsearch {
            train,
            grid,
            k,
            repeats,
            seed,
            tokenizer,
            model,
            vocab_size,
        } => cmd_gridsearch(
            &train,
            &grid,
            k,
            repeats,
            seed,
            &tokenizer.parse()?,
            model.as_deref(),
            vocab_size,
        ),
        Command::Bench {
            train,
            tokenizers,
            sizes,
            dictionary,
            subword_model,
            vocab_size,
        } => cmd_bench(
            &train,
            &tokenizers,
            &sizes,
            dictionary.as_deref(),
            subword_model.as_deref(),
            vocab_size,
        ),
        Command::Run(args) => cmd_run(args),
    }
}

fn load_csv(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|_| Error::MissingPath(path.to_path_buf()))?;
    parse_review_csv(BufReader::new(file))
}

fn cmd_sample(input: &Path, fraction: f64, seed: u64, output: &Path) -> Result<()> {
    let data = load_csv(input)?;
    let sample = random_sample(&data, fraction, seed)?;
    let file = File::create(output)?;
    write_review_csv(&sample, BufWriter::new(file))?;
    let stats = dataset_stats(&sample);
    println!(
        "sampled {} of {} records (negative={}, positive={}, mean_body_chars={:.1})",
        sample.len(),
        data.len(),
        stats.negative,
        stats.positive,
        stats.mean_body_chars
    );
    Ok(())
}

fn cmd_train_subword(input: &Path, config: &TrainerConfig, output: &Path) -> Result<()> {
    let data = load_csv(input)?;
    let corpus: Vec<String> = data.bodies().map(str::to_string).collect();
    let vocab = train(&corpus, config)?;
    let file = File::create(output)?;
    vocab.write_tsv(&mut BufWriter::new(file))?;
    println!(
        "trained {} pieces (target {}) on {} documents -> {}",
        vocab.len(),
        config.vocab_size,
        data.len(),
        output.display()
    );
    Ok(())
}

fn load_tokenizer_model(choice: &TokenizerChoice, model: &Path) -> Result<TokenizerArtifact> {
    let file = File::open(model).map_err(|_| Error::MissingPath(model.to_path_buf()))?;
    Ok(match choice {
        TokenizerChoice::Lattice => {
            TokenizerArtifact::Lattice(load_dictionary(BufReader::new(file))?)
        }
        TokenizerChoice::Subword => {
            TokenizerArtifact::Subword(SubwordVocab::read_tsv(BufReader::new(file))?)
        }
    })
}

fn cmd_tokenize(
    choice: &TokenizerChoice,
    model: &Path,
    input: &Path,
    output: &Path,
) -> Result<()> {
    let artifact = load_tokenizer_model(choice, model)?;
    let data = load_csv(input)?;
    let docs = tokenize_bodies(artifact.as_tokenizer(), &data)?;
    let mut out = BufWriter::new(File::create(output)?);
    for doc in &docs {
        writeln!(out, "{}", doc.join("\t"))?;
    }
    out.flush()?;
    println!("tokenized {} documents -> {}", docs.len(), output.display());
    Ok(())
}

/// Builds the tokenizer for fit/gridsearch: loads the given model, or
/// trains a subword model on the data.
fn build_tokenizer(
    choice: &TokenizerChoice,
    model: Option<&Path>,
    data: &Dataset,
    vocab_size: usize,
) -> Result<TokenizerArtifact> {
    match (choice, model) {
        (_, Some(path)) => load_tokenizer_model(choice, path),
        (TokenizerChoice::Lattice, None) => Err(Error::Config(
            "tokenizer=lattice requires --model pointing at a dictionary TSV".into(),
        )),
        (TokenizerChoice::Subword, None) => {
            let corpus: Vec<String> = data.bodies().map(str::to_string).collect();
            Ok(TokenizerArtifact::Subword(train(
                &corpus,
                &TrainerConfig::with_vocab_size(vocab_size),
            )?))
        }
    }
}

fn cmd_fit(config: &PipelineConfig, train_path: &Path, output_dir: &Path) -> Result<()> {
    let data = load_csv(train_path)?;
    let fitted = FittedPipeline::fit(config, &data)?;
    std::fs::create_dir_all(output_dir)?;
    if let TokenizerArtifact::Lattice(_) = fitted.tokenizer {
        // keep the model dir self-contained for `evaluate`
        let dictionary = config
            .dictionary
            .as_ref()
            .expect("lattice fit validated the dictionary path");
        std::fs::copy(dictionary, output_dir.join(harness::DICTIONARY_FILE))?;
    }
    fitted.save(output_dir)?;
    println!("vectorize_seconds={:.2}", fitted.vectorize_elapsed_seconds);
    println!("error_train={:.2}", fitted.error_train);
    println!("model artifacts -> {}", output_dir.display());
    Ok(())
}

fn cmd_evaluate(model_dir: &Path, test_path: &Path) -> Result<()> {
    let fitted = FittedPipeline::load(model_dir)?;
    let test = load_csv(test_path)?;
    let predicted = fitted.predict(&test)?;
    let error_test = evaluate_error(&predicted, &test.labels())?;
    let config_echo = std::fs::read_to_string(model_dir.join(harness::CONFIG_FILE))
        .unwrap_or_default();
    let report = EvalReport {
        tokenizer: fitted.tokenizer_choice.report_name().to_string(),
        classifier: fitted.classifier_choice.report_name().to_string(),
        error_train: fitted.error_train,
        error_test,
        vectorize_elapsed_seconds: fitted.vectorize_elapsed_seconds,
        train_records: fitted.train_records,
        test_records: test.len(),
        config_echo,
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .unwrap_or_default()
            .as_secs(),
    };
    print!("{}", emit_report(&[report], ReportFormat::Text)?);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_gridsearch(
    train_path: &Path,
    grid_spec: &str,
    k: usize,
    repeats: usize,
    seed: u64,
    tokenizer: &TokenizerChoice,
    model: Option<&Path>,
    vocab_size: usize,
) -> Result<()> {
    let data = load_csv(train_path)?;
    let grid = parse_grid(grid_spec)?;
    let artifact = build_tokenizer(tokenizer, model, &data, vocab_size)?;
    let (_, matrix, elapsed) = fit_transform_timed(artifact.as_tokenizer(), &data)?;
    println!("vectorize_seconds={elapsed:.2}");
    let labels = data.labels();
    let plan = classify::repeated_stratified_kfold(&labels, k, repeats, seed)?;
    let result = classify::grid_search(&matrix, &labels, &grid, &plan)?;
    println!("C  Mean-CV-Error");
    for entry in &result.entries {
        println!("{}  {:.2}", entry.c, entry.mean_error);
    }
    let best = result.best();
    println!(
        "best C={} (mean CV error {:.2} over {} splits)",
        best.c,
        best.mean_error,
        best.fold_errors.len()
    );
    let (predicted, _) = classify::lr_predict(&result.best_model, &matrix)?;
    let error_train = evaluate_error(&predicted, &labels)?;
    println!("refit error_train={error_train:.2}");
    Ok(())
}

fn cmd_bench(
    train_path: &Path,
    tokenizers: &str,
    sizes: &str,
    dictionary: Option<&Path>,
    subword_model: Option<&Path>,
    vocab_size: usize,
) -> Result<()> {
    let data = load_csv(train_path)?;
    let mut choices = Vec::new();
    for name in tokenizers.split(',').filter(|s| !s.is_empty()) {
        choices.push(name.trim().parse::<TokenizerChoice>()?);
    }
    if choices.is_empty() {
        return Err(Error::Config("no tokenizers given".into()));
    }
    let mut parsed_sizes = Vec::new();
    for part in sizes.split(',').filter(|s| !s.is_empty()) {
        let n: usize = part
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad size {part:?}")))?;
        if n == 0 || n > data.len() {
            return Err(Error::Config(format!(
                "size {n} out of range (dataset has {} records)",
                data.len()
            )));
        }
        parsed_sizes.push(n);
    }
    if parsed_sizes.is_empty() {
        return Err(Error::Config("no sizes given".into()));
    }

    // prepare each tokenizer once, on the full dataset
    let mut artifacts = Vec::new();
    for choice in &choices {
        let artifact = match choice {
            TokenizerChoice::Lattice => {
                let path = dictionary.ok_or_else(|| {
                    Error::Config("lattice benchmarking requires --dictionary".into())
                })?;
                load_tokenizer_model(choice, path)?
            }
            TokenizerChoice::Subword => build_tokenizer(choice, subword_model, &data, vocab_size)?,
        };
        artifacts.push(artifact);
    }

    println!("Tokenizer  Size  Vectorize-s");
    for &size in &parsed_sizes {
        let subset = Dataset::from_records(data.records()[..size].to_vec());
        for artifact in &artifacts {
            let tokenizer = artifact.as_tokenizer();
            let (_, _, elapsed) = fit_transform_timed(tokenizer, &subset)?;
            println!("{}  {}  {:.2}", tokenizer.name(), size, elapsed);
        }
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    let overrides: [(&str, &Option<String>); 18] = [
        ("train_csv", &args.train_csv),
        ("test_csv", &args.test_csv),
        ("output_dir", &args.output_dir),
        ("tokenizer", &args.tokenizer),
        ("classifier", &args.classifier),
        ("dictionary", &args.dictionary),
        ("subword_model", &args.subword_model),
        ("sample_fraction", &args.sample_fraction),
        ("sample_seed", &args.sample_seed),
        ("vocab_size", &args.vocab_size),
        ("alpha", &args.alpha),
        ("c", &args.c),
        ("tol", &args.tol),
        ("max_iter", &args.max_iter),
        ("cv_k", &args.cv_k),
        ("cv_repeats", &args.cv_repeats),
        ("cv_seed", &args.cv_seed),
        ("grid", &args.grid),
    ];
    for (key, value) in overrides {
        if let Some(value) = value {
            config.set(key, value)?;
        }
    }
    let report = run_pipeline(&config)?;
    print!("{}", emit_report(&[report.clone()], ReportFormat::Text)?);
    println!(
        "train_records={} test_records={} -> {}",
        report.train_records,
        report.test_records,
        config.output_dir.display()
    );
    Ok(())
}

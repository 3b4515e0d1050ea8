use std::collections::BTreeSet;
use std::fmt::Display;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use cbsbench_core::corpus::{load_corpus, validate_corpus};
use cbsbench_core::geneval::{
    aggregate_labels, kappa_between, read_generations, read_labels, run_generation, AnnotationRecord,
    AnnotationState, GenConfig, GenEvalError, HttpGenerationBackend, LabelStore, Resolution,
    GENERATE_ENDPOINT_ENV,
};
use cbsbench_core::harness::{
    compare_runs, delta_row, format_percent, read_results, render_comparison, render_delta_report, render_report,
    run_evaluation, HarnessError, ReportFormat, RunConfig, RunOutput,
};
use cbsbench_core::scoring::RetryPolicy;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cbsbench", version, about = "Cultural bias scoring for Arabic language models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a corpus directory and print per-aspect counts and findings.
    Validate { corpus: PathBuf },
    /// Score a model over a corpus and write a results file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render one or more results files as a table.
    Report {
        #[arg(long, default_value = "plain_table")]
        format: ReportFormat,
        #[arg(required = true)]
        results: Vec<PathBuf>,
    },
    /// Per-aspect differences b - a between two runs.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value = "plain_table")]
        format: ReportFormat,
    },
    /// English-like vs pro-drop averages; repeat both flags for several models.
    Delta {
        #[arg(long = "english-like", required = true)]
        english_like: Vec<PathBuf>,
        #[arg(long, required = true)]
        prodrop: Vec<PathBuf>,
        #[arg(long, default_value = "plain_table")]
        format: ReportFormat,
    },
    /// Sample generations from a generation backend.
    Gen {
        #[arg(long)]
        config: PathBuf,
    },
    /// Cohen's kappa between two single-annotator label files.
    Kappa { labels_a: PathBuf, labels_b: PathBuf },
    /// Arab / Western / Neutral shares per aspect and model.
    LabelsReport {
        #[arg(long)]
        generations: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value = "adjudicated")]
        resolution: Resolution,
    },
    /// Serve the annotation API (and optionally the frontend assets).
    Serve {
        #[arg(long)]
        annotation: bool,
        #[arg(long)]
        generations: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value = "adjudicated")]
        resolution: Resolution,
    },
}

/// Message plus exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Display) -> Self {
        Failure {
            code: 1,
            message: message.to_string(),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

impl From<GenEvalError> for Failure {
    fn from(e: GenEvalError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with 2 on usage errors, which would read as a scorer failure.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Validate { corpus } => validate(&corpus),
        Command::Run { config } => run(&config),
        Command::Report { format, results } => report(format, &results),
        Command::Compare { a, b, format } => {
            let c = compare_runs(&read_results(a)?, &read_results(b)?)?;
            print!("{}", render_comparison(&c, format));
            Ok(())
        }
        Command::Delta {
            english_like,
            prodrop,
            format,
        } => delta(&english_like, &prodrop, format),
        Command::Gen { config } => gen(&config),
        Command::Kappa { labels_a, labels_b } => kappa(&labels_a, &labels_b),
        Command::LabelsReport {
            generations,
            labels,
            resolution,
        } => labels_report(&generations, &labels, resolution),
        Command::Serve {
            annotation,
            generations,
            labels,
            static_dir,
            addr,
            resolution,
        } => {
            if !annotation {
                return Err(Failure::config("only the annotation server exists; pass --annotation"));
            }
            serve(&generations, &labels, static_dir, addr, resolution)
        }
    }
}

fn validate(dir: &Path) -> Outcome {
    let corpus = load_corpus(dir).map_err(HarnessError::from)?;
    let report = validate_corpus(&corpus);
    println!("corpus version {}", corpus.version);
    print!("{report}");
    if report.is_ok() {
        Ok(())
    } else {
        Err(HarnessError::Validation {
            errors: report.error_count(),
        }
        .into())
    }
}

fn run(config_path: &Path) -> Outcome {
    let config = RunConfig::from_file(config_path)?;
    let out = run_evaluation(&config)?;
    print!("{}", render_report(std::slice::from_ref(&out.result), ReportFormat::PlainTable)?);
    println!("wrote {}", config.output_path.display());
    Ok(())
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<RunOutput>, Failure> {
    paths.iter().map(|p| read_results(p).map_err(Failure::from)).collect()
}

fn report(format: ReportFormat, paths: &[PathBuf]) -> Outcome {
    let results: Vec<_> = load_all(paths)?.into_iter().map(|o| o.result).collect();
    print!("{}", render_report(&results, format)?);
    Ok(())
}

fn delta(english_like: &[PathBuf], prodrop: &[PathBuf], format: ReportFormat) -> Outcome {
    if english_like.len() != prodrop.len() {
        return Err(Failure::config(format!(
            "{} --english-like files but {} --prodrop files",
            english_like.len(),
            prodrop.len()
        )));
    }
    let rows = load_all(english_like)?
        .iter()
        .zip(load_all(prodrop)?.iter())
        .map(|(e, p)| delta_row(&e.result, &p.result))
        .collect::<Result<Vec<_>, _>>()?;
    print!("{}", render_delta_report(&rows, format)?);
    Ok(())
}

fn gen(config_path: &Path) -> Outcome {
    let config = GenConfig::from_file(config_path)?;
    let endpoint = match &config.endpoint {
        Some(e) => e.clone(),
        None => std::env::var(GENERATE_ENDPOINT_ENV)
            .map_err(|_| Failure::config(format!("gen needs endpoint or {GENERATE_ENDPOINT_ENV}")))?,
    };
    let backend = HttpGenerationBackend::new(&endpoint, &config.model_id, RetryPolicy::default());
    let gens = run_generation(&config, &backend)?;
    println!("wrote {} generations to {}", gens.len(), config.output_path.display());
    Ok(())
}

/// The single annotator of a label file.
fn sole_annotator(path: &Path, records: &[AnnotationRecord]) -> Result<String, Failure> {
    let ids: BTreeSet<&str> = records.iter().map(|r| r.annotator_id.as_str()).collect();
    match ids.len() {
        1 => Ok(ids.into_iter().next().unwrap().to_string()),
        0 => Err(GenEvalError::EmptyLabels.into()),
        count => Err(GenEvalError::MixedAnnotators {
            file: path.display().to_string(),
            count,
        }
        .into()),
    }
}

fn kappa(path_a: &Path, path_b: &Path) -> Outcome {
    let a = read_labels(path_a)?;
    let b = read_labels(path_b)?;
    let (who_a, who_b) = (sole_annotator(path_a, &a)?, sole_annotator(path_b, &b)?);
    if who_a == who_b {
        return Err(Failure::config(format!("both files hold labels from {who_a}")));
    }
    let mut all = a;
    all.extend(b);
    let stats = kappa_between(&all, &who_a, &who_b)?
        .ok_or_else(|| Failure::config(format!("{who_a} and {who_b} share no labeled items")))?;
    println!("annotators  {who_a} {who_b}");
    println!("items       {}", stats.n_items);
    println!("p_o         {:.4}", stats.p_o);
    println!("p_e         {:.4}", stats.p_e);
    println!("kappa       {:.4}", stats.kappa);
    if stats.convention_applied {
        println!("note        expected agreement is 1; kappa set by convention");
    }
    Ok(())
}

fn labels_report(generations: &Path, labels: &Path, resolution: Resolution) -> Outcome {
    let gens = read_generations(generations)?;
    let records = read_labels(labels)?;
    let report = aggregate_labels(&gens, &records, resolution)?;
    let mut out = std::io::stdout().lock();
    let header = ["aspect", "model", "items", "counted", "unresolved", "unlabeled", "arab%", "western%", "neutral%"];
    let _ = writeln!(out, "{}", header.join("\t"));
    for g in &report.groups {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            g.aspect_id,
            g.model_id,
            g.total,
            g.counted,
            g.unresolved,
            g.unlabeled,
            format_percent(g.arab),
            format_percent(g.western),
            format_percent(g.neutral)
        );
    }
    Ok(())
}

fn serve(
    generations: &Path,
    labels: &Path,
    static_dir: Option<PathBuf>,
    addr: SocketAddr,
    resolution: Resolution,
) -> Outcome {
    let gens = read_generations(generations)?;
    let state = Arc::new(AnnotationState::new(gens, LabelStore::open(labels)?, resolution)?);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(Failure::config)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(Failure::config)?;
        let bound = listener.local_addr().map_err(Failure::config)?;
        println!("listening on http://{bound}");
        let _ = std::io::stdout().flush();
        cbsbench_core::geneval::serve_annotation(listener, state, static_dir)
            .await
            .map_err(Failure::config)
    })
}

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use evatlas::bundle::{Bundle, RunStatus};
use evatlas::llm::{run_llm, ChatClient, HttpChatClient, ReplayClient, RunOutcome};
use evatlas::server::{self, AppState, DEFAULT_PORT};
use evatlas::store::DATA_DIR_VAR;
use evatlas::{demo, Store, StoreError};
use evatlas_core::layout::Size;
use evatlas_core::query::{gap_matrix, run_query};
use evatlas_core::topic::{Backend, CountRange, TopicRun};
use evatlas_core::{compute_layout, extract_topics_lexical, FilterState, IngestConfig, LayoutConfig, RunConfig};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "evatlas", version, about = "Evidence atlas: topic maps and faceted queries over coded review data")]
struct Cli {
    /// Directory holding corpus bundles.
    #[arg(long, global = true, env = DATA_DIR_VAR, default_value = "evatlas-data")]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Lexical,
    Llm,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = server::PORT_VAR, default_value_t = DEFAULT_PORT)]
        port: u16,
    },
    /// Write the synthetic demo corpus as CSV.
    Demo {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = demo::DEMO_SEED)]
        seed: u64,
    },
    /// Ingest a coded CSV file.
    Ingest {
        csv: PathBuf,
        #[arg(long)]
        title_col: Option<String>,
        #[arg(long)]
        authors_col: Option<String>,
        #[arg(long)]
        year_col: Option<String>,
        #[arg(long)]
        abstract_col: Option<String>,
        #[arg(long)]
        id_col: Option<String>,
        /// Separator inside multi-valued cells.
        #[arg(long)]
        delimiter: Option<String>,
        /// Print the full validation report.
        #[arg(long)]
        verbose: bool,
    },
    /// Run a topic model and, unless told otherwise, make it the active atlas.
    Topics {
        #[arg(long)]
        corpus: Option<String>,
        #[arg(long, value_enum, default_value = "lexical")]
        backend: BackendArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        temperature: f64,
        #[arg(long, default_value_t = 6)]
        min_topics: usize,
        #[arg(long, default_value_t = 8)]
        max_topics: usize,
        #[arg(long)]
        model: Option<String>,
        /// Use a recorded LLM reply instead of calling the endpoint.
        #[arg(long)]
        reply_file: Option<PathBuf>,
        #[arg(long)]
        no_promote: bool,
    },
    /// Make a finished run the active atlas.
    Promote {
        #[arg(long)]
        corpus: Option<String>,
        #[arg(long)]
        run: String,
        #[arg(long)]
        expected_version: Option<String>,
    },
    /// List the runs of a corpus.
    Runs {
        #[arg(long)]
        corpus: Option<String>,
    },
    /// Compute and store the map layout.
    Layout {
        #[arg(long)]
        corpus: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000.0)]
        width: f64,
        #[arg(long, default_value_t = 1000.0)]
        height: f64,
    },
    /// Evaluate a serialized FilterState.
    Query {
        #[arg(long)]
        corpus: Option<String>,
        #[arg(long, default_value = "{}")]
        filter: String,
    },
    /// Cross-tabulate two facets.
    Gaps {
        #[arg(long)]
        corpus: Option<String>,
        #[arg(long)]
        row: String,
        #[arg(long)]
        col: String,
        #[arg(long, default_value = "{}")]
        filter: String,
    },
    /// Show one study with its topic labels.
    Detail {
        study_id: String,
        #[arg(long)]
        corpus: Option<String>,
    },
    /// Compare finished runs.
    Stability {
        #[arg(long)]
        corpus: Option<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        runs: Vec<String>,
    },
    /// Write the corpus bundle.
    Export {
        #[arg(long)]
        corpus: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Load a bundle as a new corpus.
    Import { bundle: PathBuf },
}

type CliResult = Result<Value, Value>;

fn err(e: StoreError) -> Value {
    e.to_json()
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable value")
}

fn read_file(path: &PathBuf) -> Result<String, Value> {
    std::fs::read_to_string(path).map_err(|e| err(StoreError::Io(format!("{}: {e}", path.display()))))
}

fn corpus_id(store: &Store, corpus: Option<String>) -> Result<String, Value> {
    corpus
        .or_else(|| store.latest())
        .ok_or_else(|| err(StoreError::BadRequest("no corpus given and none ingested yet".into())))
}

fn parse_filter(text: &str) -> Result<FilterState, Value> {
    serde_json::from_str::<FilterState>(text)
        .map(FilterState::canonical)
        .map_err(|e| err(StoreError::BadRequest(format!("filter: {e}"))))
}

fn runtime() -> Result<tokio::runtime::Runtime, Value> {
    tokio::runtime::Runtime::new().map_err(|e| err(e.into()))
}

/// Writes to stdout, ignoring a reader that went away.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            emit(&e.to_string());
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": "Usage", "message": e.to_string().trim_end() }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(Value::Null) => ExitCode::SUCCESS,
        Ok(value) => {
            emit(&format!("{value}\n"));
            ExitCode::SUCCESS
        }
        Err(value) => {
            eprintln!("{value}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> CliResult {
    if let Command::Demo { out, seed } = &cli.command {
        let csv = demo::demo_csv(*seed);
        return match out {
            Some(path) => {
                std::fs::write(path, csv).map_err(|e| err(e.into()))?;
                Ok(json!({ "written": path, "studies": demo::DEMO_SIZE }))
            }
            None => {
                emit(&csv);
                Ok(Value::Null)
            }
        };
    }

    let store = Store::open(&cli.data_dir).map_err(err)?;
    match cli.command {
        Command::Demo { .. } => unreachable!("handled above"),
        Command::Serve { port } => {
            tracing_subscriber::fmt().with_writer(std::io::stderr).init();
            let llm: Option<Arc<dyn ChatClient>> = match HttpChatClient::from_env() {
                Ok(c) => Some(Arc::new(c)),
                Err(e) => {
                    tracing::info!("LLM backend disabled: {e}");
                    None
                }
            };
            let state = AppState::new(Arc::new(store), llm);
            runtime()?
                .block_on(server::serve(state, port))
                .map_err(|e| err(e.into()))?;
            Ok(Value::Null)
        }
        Command::Ingest {
            csv,
            title_col,
            authors_col,
            year_col,
            abstract_col,
            id_col,
            delimiter,
            verbose,
        } => {
            let text = read_file(&csv)?;
            let mut config = IngestConfig {
                source: csv.display().to_string(),
                ..IngestConfig::default()
            };
            for (slot, value) in [
                (&mut config.title_col, title_col),
                (&mut config.authors_col, authors_col),
                (&mut config.year_col, year_col),
                (&mut config.abstract_col, abstract_col),
                (&mut config.id_col, id_col),
                (&mut config.delimiter, delimiter),
            ] {
                if let Some(v) = value {
                    *slot = v;
                }
            }
            let outcome = store.ingest(&text, &config).map_err(err)?;
            let mut out = json!({
                "corpus_id": outcome.corpus_id,
                "studies": outcome.studies,
                "created": outcome.created,
                "errors": outcome.report.errors.len(),
                "warnings": outcome.report.warnings.len(),
            });
            if verbose {
                out["report"] = to_value(&outcome.report);
            }
            Ok(out)
        }
        Command::Topics {
            corpus,
            backend,
            seed,
            temperature,
            min_topics,
            max_topics,
            model,
            reply_file,
            no_promote,
        } => {
            let id = corpus_id(&store, corpus)?;
            let corpus = store.corpus(&id).map_err(err)?;
            let config = RunConfig {
                backend: match backend {
                    BackendArg::Lexical => Backend::Lexical,
                    BackendArg::Llm => Backend::Llm,
                },
                seed,
                temperature,
                topic_range: CountRange::new(min_topics, max_topics),
                model,
                ..RunConfig::default()
            };
            let outcome = match config.backend {
                Backend::Lexical => {
                    config.validate().map_err(|e| err(e.into()))?;
                    RunOutcome {
                        result: extract_topics_lexical(&corpus, &config)
                            .map(|(model, assignments)| TopicRun {
                                model,
                                assignments,
                                warnings: Vec::new(),
                            })
                            .map_err(|e| {
                                evatlas::bundle::RunError::new(evatlas::topic_error_kind(&e), e.to_string())
                            }),
                        raw_reply: None,
                    }
                }
                Backend::Llm => {
                    let client: Box<dyn ChatClient> = match &reply_file {
                        Some(path) => Box::new(ReplayClient::new(read_file(path)?)),
                        None => Box::new(
                            HttpChatClient::from_env()
                                .map_err(|e| err(StoreError::Backend(e.to_string())))?,
                        ),
                    };
                    config.validate().map_err(|e| err(e.into()))?;
                    runtime()?.block_on(run_llm(&*client, &corpus, &config))
                }
            };
            let record = store.start_run(&id, &config).map_err(err)?;
            let record = store.finish_run(&record.run_id, outcome).map_err(err)?;
            if record.status != RunStatus::Done {
                let e = record.error.clone().expect("failed run has an error");
                return Err(json!({
                    "error": e.kind,
                    "message": e.message,
                    "run_id": record.run_id,
                    "raw_reply_saved": record.raw_reply.is_some(),
                }));
            }
            let mut out = json!({
                "corpus_id": id,
                "run_id": record.run_id,
                "digest": record.digest,
                "topics": record.model.as_ref().map_or(0, |m| m.topics.len()),
                "warnings": record.warnings.len(),
            });
            if !no_promote {
                out["atlas_version"] = json!(store.promote(&id, &record.run_id, None).map_err(err)?);
            }
            Ok(out)
        }
        Command::Promote {
            corpus,
            run,
            expected_version,
        } => {
            let id = corpus_id(&store, corpus)?;
            let version = store
                .promote(&id, &run, expected_version.as_deref())
                .map_err(err)?;
            Ok(json!({ "corpus_id": id, "run_id": run, "atlas_version": version }))
        }
        Command::Runs { corpus } => {
            let id = corpus_id(&store, corpus)?;
            let runs = store.runs(&id).map_err(err)?;
            Ok(Value::Array(
                runs.iter()
                    .map(|r| {
                        json!({
                            "run_id": r.run_id,
                            "status": r.status,
                            "backend": r.config.backend,
                            "seed": r.config.seed,
                            "digest": r.digest,
                            "error": r.error,
                        })
                    })
                    .collect(),
            ))
        }
        Command::Layout {
            corpus,
            seed,
            width,
            height,
        } => {
            let id = corpus_id(&store, corpus)?;
            let atlas = store.atlas(&id).map_err(err)?;
            let config = LayoutConfig {
                seed,
                canvas: Size::new(width, height),
            };
            let layout = compute_layout(&atlas, &config).map_err(|e| err(e.into()))?;
            store.set_layout(&id, layout.clone()).map_err(err)?;
            Ok(to_value(&layout))
        }
        Command::Query { corpus, filter } => {
            let id = corpus_id(&store, corpus)?;
            let filter = parse_filter(&filter)?;
            let atlas = store.atlas(&id).map_err(err)?;
            Ok(to_value(&run_query(&atlas, &filter).map_err(|e| err(e.into()))?))
        }
        Command::Gaps {
            corpus,
            row,
            col,
            filter,
        } => {
            let id = corpus_id(&store, corpus)?;
            let filter = parse_filter(&filter)?;
            let atlas = store.atlas(&id).map_err(err)?;
            Ok(to_value(
                &gap_matrix(&atlas, &row, &col, &filter).map_err(|e| err(e.into()))?,
            ))
        }
        Command::Detail { study_id, corpus } => {
            let id = corpus_id(&store, corpus)?;
            let atlas = store.atlas(&id).map_err(err)?;
            Ok(to_value(&atlas.study_detail(&study_id).map_err(|e| err(e.into()))?))
        }
        Command::Stability { corpus, runs } => {
            let id = corpus_id(&store, corpus)?;
            Ok(to_value(&store.stability(&id, &runs).map_err(err)?))
        }
        Command::Export { corpus, out } => {
            let id = corpus_id(&store, corpus)?;
            let bundle = store.export(&id).map_err(err)?;
            let text = serde_json::to_string(&bundle).expect("bundle serializes");
            match out {
                Some(path) => {
                    std::fs::write(&path, text).map_err(|e| err(e.into()))?;
                    Ok(json!({ "corpus_id": id, "written": path }))
                }
                None => {
                    emit(&format!("{text}\n"));
                    Ok(Value::Null)
                }
            }
        }
        Command::Import { bundle } => {
            let bundle = Bundle::from_json(&read_file(&bundle)?).map_err(err)?;
            let id = store.import(bundle).map_err(err)?;
            Ok(json!({ "corpus_id": id }))
        }
    }
}

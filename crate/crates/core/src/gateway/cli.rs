//! `kgforge` command line. Results go to `out`, diagnostics to `err`.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use super::engine::{AddCandidateRequest, CreateSession, Engine, LabelRequest};
use super::{Config, GatewayError};
use crate::acquisition::Verdict;
use crate::consolidation::load_alignments;
use crate::edulink::{evaluate_linking, parse_gold_jsonl, parse_records_jsonl, render_table, GoldLink, LinkResult, Mention, MentionKind};
use crate::ingest::{HeadingRules, RawExercise, TopicCatalog};
use crate::model::Iri;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "kgforge", version, about = "Build, maintain and query an educational knowledge graph")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML config file; KGF_* variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Graph file (N-Triples with a `.meta.json` sidecar, or bare N-Triples).
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    /// Ontology schema JSON, used when the graph has no sidecar.
    #[arg(long, global = true)]
    ontology: Option<PathBuf>,
    /// Directory of session event logs.
    #[arg(long, global = true)]
    sessions: Option<PathBuf>,
    /// External graph (N-Triples).
    #[arg(long, global = true)]
    external: Option<PathBuf>,
    #[arg(long, global = true)]
    qa_templates: Option<PathBuf>,
    #[arg(long, global = true)]
    role_templates: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Segment a textbook, assign key topics, parse exercises, store them.
    Ingest {
        /// Textbook markup.
        #[arg(long)]
        book: PathBuf,
        /// Defaults to the file stem.
        #[arg(long)]
        book_id: Option<String>,
        /// Topic catalog JSON.
        #[arg(long)]
        topics: PathBuf,
        /// Exercises as `{id, raw}` JSON lines.
        #[arg(long)]
        exercises: Option<PathBuf>,
        /// Heading levels of unit, lesson and section, e.g. `1,2,3`.
        #[arg(long, default_value = "1,2,3")]
        levels: String,
    },
    /// Write the entity index of the graph.
    BuildIndex {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-stage annotation sessions.
    Session {
        #[command(subcommand)]
        action: SessionAction,
    },
    /// Import external neighbours of aligned concepts; `--roles` also
    /// extracts and links rhetorical roles.
    Expand {
        /// Alignments JSON.
        #[arg(long)]
        alignments: Option<PathBuf>,
        #[arg(long)]
        roles: bool,
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Link records (JSON lines); prints one link result per line.
    Link {
        #[arg(long)]
        records: PathBuf,
        /// Also store the records and their links in the graph.
        #[arg(long)]
        store: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predicted links against gold links.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        /// Link results or gold-shaped lines.
        #[arg(long)]
        pred: PathBuf,
        /// Row name in the printed table.
        #[arg(long, default_value = "all")]
        subject: String,
        #[arg(long)]
        json: bool,
    },
    /// Answer a question from the graph.
    Qa {
        #[arg(long)]
        question: String,
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
    /// Write the graph as N-Triples (and its sidecar, with `--out`).
    Export {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum SessionAction {
    Create {
        #[arg(long)]
        doc_id: String,
        #[arg(long)]
        id: Option<String>,
        /// File holding the text to annotate.
        #[arg(long, conflicts_with = "text")]
        text_file: Option<PathBuf>,
        #[arg(long)]
        text: Option<String>,
    },
    List,
    Show {
        #[arg(long)]
        id: String,
    },
    Label {
        #[arg(long)]
        id: String,
        #[arg(long)]
        candidate: String,
        #[arg(long, value_enum)]
        verdict: CliVerdict,
        #[arg(long, default_value = "cli")]
        annotator: String,
    },
    /// Add a span the recognizers missed.
    Add {
        #[arg(long)]
        id: String,
        #[arg(long)]
        start: usize,
        #[arg(long)]
        end: usize,
        #[arg(long)]
        class: Option<String>,
        #[arg(long, default_value = "cli")]
        annotator: String,
    },
    Advance {
        #[arg(long)]
        id: String,
    },
    Commit {
        #[arg(long)]
        id: String,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CliVerdict {
    Accept,
    Reject,
}

fn read(path: &Path) -> Result<String, GatewayError> {
    fs::read_to_string(path).map_err(|e| GatewayError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>, GatewayError> {
    Ok(BufReader::new(File::open(path).map_err(|e| GatewayError::io(path, e))?))
}

fn json_line(out: &mut dyn Write, value: &impl serde::Serialize) -> Result<(), GatewayError> {
    let s = serde_json::to_string_pretty(value).expect("serializable");
    writeln!(out, "{s}").map_err(|e| GatewayError::io("<stdout>", e))
}

fn parse_levels(s: &str) -> Result<HeadingRules, GatewayError> {
    let levels: Vec<u8> = s.split(',').map(|p| p.trim().parse()).collect::<Result<_, _>>().map_err(|_| {
        GatewayError::Config(format!("--levels expects three numbers like 1,2,3, got {s:?}"))
    })?;
    match levels[..] {
        [unit, lesson, section] => Ok(HeadingRules { unit, lesson, section }),
        _ => Err(GatewayError::Config(format!("--levels expects three numbers, got {s:?}"))),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PredLine {
    Link(LinkResult),
    Gold(GoldLink),
}

fn parse_predictions(input: impl BufRead) -> Result<Vec<LinkResult>, GatewayError> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| GatewayError::io("predictions", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let pred: PredLine = serde_json::from_str(&line)
            .map_err(|e| GatewayError::BadRequest(format!("predictions line {}: {e}", n + 1)))?;
        out.push(match pred {
            PredLine::Link(l) => l,
            PredLine::Gold(g) => LinkResult {
                mention: Mention {
                    start: g.start,
                    end: g.end,
                    surface: String::new(),
                    query: String::new(),
                    kind: MentionKind::Concept,
                    source_record_id: g.record_id,
                },
                resolved: Some(g.entity_iri),
                score: 1.0,
                candidate_trace: Vec::new(),
            },
        });
    }
    Ok(out)
}

fn config_for(global: &GlobalArgs) -> Result<Config, GatewayError> {
    let mut cfg = Config::load(global.config.as_deref())?;
    let p = &mut cfg.paths;
    for (slot, flag) in [
        (&mut p.graph, &global.graph),
        (&mut p.ontology, &global.ontology),
        (&mut p.sessions, &global.sessions),
        (&mut p.external, &global.external),
        (&mut p.qa_templates, &global.qa_templates),
        (&mut p.role_templates, &global.role_templates),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    Ok(cfg)
}

fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), GatewayError> {
    let mut cfg = config_for(&cli.global)?;
    let io = |e: std::io::Error| GatewayError::io("<stdout>", e);
    match cli.command {
        Command::Evaluate { gold, pred, subject, json } => {
            let gold = parse_gold_jsonl(open(&gold)?)?;
            let predicted = parse_predictions(open(&pred)?)?;
            let report = evaluate_linking(&gold, &predicted);
            if json {
                json_line(out, &report)?;
            } else {
                write!(out, "{}", render_table(&[(subject, report)])).map_err(io)?;
            }
            return Ok(());
        }
        Command::Expand { theta: Some(t), .. } => cfg.theta = t,
        _ => {}
    }
    cfg.validate()?;
    if cfg.paths.graph.is_none() && !matches!(cli.command, Command::Qa { .. } | Command::Serve { .. }) {
        writeln!(err, "warning: no --graph given; changes are not saved").map_err(io)?;
    }
    let engine = Engine::open(cfg)?;
    match cli.command {
        Command::Ingest { book, book_id, topics, exercises, levels } => {
            let book_id = book_id.unwrap_or_else(|| book.file_stem().map_or("book".into(), |s| s.to_string_lossy().into_owned()));
            let catalog = TopicCatalog::from_json(&read(&topics)?)?;
            let raws: Vec<RawExercise> = match exercises {
                Some(p) => open(&p)?
                    .lines()
                    .enumerate()
                    .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
                    .map(|(n, l)| {
                        let l = l.map_err(|e| GatewayError::io(&p, e))?;
                        serde_json::from_str(&l).map_err(|e| GatewayError::BadRequest(format!("{}:{}: {e}", p.display(), n + 1)))
                    })
                    .collect::<Result<_, _>>()?,
                None => Vec::new(),
            };
            let (report, _) = engine.ingest(&book_id, &read(&book)?, &catalog, &parse_levels(&levels)?, &raws)?;
            for e in &report.exercise_errors {
                writeln!(err, "exercise skipped: {e}").map_err(io)?;
            }
            json_line(out, &report)?;
        }
        Command::BuildIndex { out: path } => {
            let path = path
                .or_else(|| engine.config().paths.index.clone())
                .ok_or_else(|| GatewayError::Config("build-index needs --out or paths.index".into()))?;
            let (n, _) = engine.build_index(&path)?;
            writeln!(out, "indexed {n} entities into {}", path.display()).map_err(io)?;
        }
        Command::Session { action } => run_session(&engine, action, out)?,
        Command::Expand { alignments, roles, .. } => {
            let report = match alignments {
                Some(p) => {
                    let (expansion, role_report, _) = engine.expand(&load_alignments(&read(&p)?)?, roles)?;
                    serde_json::json!({ "expansion": expansion, "roles": role_report })
                }
                None if roles => serde_json::json!({ "roles": engine.consolidate_roles()?.0 }),
                None => return Err(GatewayError::Config("expand needs --alignments, --roles, or both".into())),
            };
            json_line(out, &report)?;
        }
        Command::Link { records, store, out: path } => {
            let records = parse_records_jsonl(open(&records)?)?;
            let mut lines = String::new();
            for r in &records {
                let (report, _) = engine.link(r, store)?;
                for l in &report.links {
                    lines.push_str(&serde_json::to_string(l).expect("serializable"));
                    lines.push('\n');
                }
            }
            match path {
                Some(p) => fs::write(&p, lines).map_err(|e| GatewayError::io(&p, e))?,
                None => out.write_all(lines.as_bytes()).map_err(io)?,
            }
        }
        Command::Qa { question, json } => {
            let (a, _) = engine.answer(&question)?;
            if json {
                json_line(out, &a)?;
            } else {
                if a.answers.is_empty() {
                    writeln!(err, "no answer; query was: {}", a.plan.query()).map_err(io)?;
                }
                for ans in &a.answers {
                    writeln!(out, "{ans}").map_err(io)?;
                }
            }
        }
        Command::Serve { listen } => {
            let listen = listen.unwrap_or_else(|| engine.config().listen.clone());
            let rt = tokio::runtime::Runtime::new().map_err(|e| GatewayError::io("runtime", e))?;
            rt.block_on(super::serve(Arc::new(engine), &listen))?;
        }
        Command::Export { out: path } => match path {
            Some(p) => {
                engine.save(&p)?;
                writeln!(err, "wrote {}", p.display()).map_err(io)?;
            }
            None => {
                let (nt, _, _) = engine.export()?;
                out.write_all(nt.as_bytes()).map_err(io)?;
            }
        },
        Command::Evaluate { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn run_session(engine: &Engine, action: SessionAction, out: &mut dyn Write) -> Result<(), GatewayError> {
    if engine.config().paths.sessions.is_none() && !matches!(action, SessionAction::List) {
        return Err(GatewayError::Config("session commands need --sessions or paths.sessions".into()));
    }
    let session = match action {
        SessionAction::Create { doc_id, id, text_file, text } => {
            let text = match (text_file, text) {
                (Some(p), _) => read(&p)?,
                (None, Some(t)) => t,
                (None, None) => return Err(GatewayError::Config("session create needs --text or --text-file".into())),
            };
            engine.create_session(CreateSession { session_id: id, doc_id, text })?.0
        }
        SessionAction::List => {
            for id in engine.session_ids() {
                writeln!(out, "{id}").map_err(|e| GatewayError::io("<stdout>", e))?;
            }
            return Ok(());
        }
        SessionAction::Show { id } => engine.session(&id)?.0,
        SessionAction::Label { id, candidate, verdict, annotator } => {
            let verdict = match verdict {
                CliVerdict::Accept => Verdict::Accept,
                CliVerdict::Reject => Verdict::Reject,
            };
            engine.label(&id, LabelRequest { candidate_id: candidate, verdict, annotator })?.0
        }
        SessionAction::Add { id, start, end, class, annotator } => {
            let class_iri = class.map(Iri::new).transpose().map_err(|e| GatewayError::BadRequest(e.to_string()))?;
            engine.add_candidate(&id, AddCandidateRequest { start, end, class_iri, annotator })?.0
        }
        SessionAction::Advance { id } => engine.advance(&id)?.0,
        SessionAction::Commit { id } => {
            let (report, s, _) = engine.commit(&id)?;
            return json_line(out, &serde_json::json!({ "report": report, "session": s }));
        }
    };
    json_line(out, &session)
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    EXIT_USAGE
                }
            };
        }
    };
    match run(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DOMAIN
        }
    }
}

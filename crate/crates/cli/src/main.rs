use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use medquery::{
    cmd_convert, cmd_extract, cmd_query, cmd_show_schema, cmd_validate, LogLevel, OutFormat,
    Outcome, ProjectConfig, SchemaFormat, EXIT_USAGE,
};
use medquery_core::QueryLang;

#[derive(Parser)]
#[command(name = "medquery", version, about = "Query heterogeneous sources through an integrated schema")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ProjectArgs {
    /// Data-source descriptor file.
    #[arg(long)]
    sources: PathBuf,
    /// Integrated-schema descriptor file.
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, env = "MEDQUERY_LOG", default_value = "info", value_parser = clap::builder::PossibleValuesParser::new(["quiet", "info", "debug"]))]
    log_level: String,
}

#[derive(Args)]
struct QueryText {
    #[arg(long, conflicts_with = "query_file")]
    query: Option<String>,
    #[arg(long)]
    query_file: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Dot,
    Xml,
}

#[derive(Clone, Copy, ValueEnum)]
enum LangArg {
    Sql,
    Rdql,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutArg {
    Table,
    Xml,
    Ntriples,
}

impl From<OutArg> for OutFormat {
    fn from(o: OutArg) -> OutFormat {
        match o {
            OutArg::Table => OutFormat::Table,
            OutArg::Xml => OutFormat::Xml,
            OutArg::Ntriples => OutFormat::Ntriples,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check the integrated schema for contradictions.
    Validate {
        #[command(flatten)]
        project: ProjectArgs,
    },
    /// Print the integrated schema as a DOT graph or as XML.
    ShowSchema {
        #[command(flatten)]
        project: ProjectArgs,
        #[arg(long, value_enum, default_value = "dot")]
        format: FormatArg,
    },
    /// Translate a SQL query into RDQL without touching any source.
    Convert {
        #[command(flatten)]
        project: ProjectArgs,
        #[command(flatten)]
        text: QueryText,
    },
    /// Answer a SQL or RDQL query.
    Query {
        #[command(flatten)]
        project: ProjectArgs,
        #[command(flatten)]
        text: QueryText,
        #[arg(long, value_enum, default_value = "sql")]
        lang: LangArg,
        #[arg(long, value_enum, default_value = "table")]
        out: OutArg,
    },
    /// Dump one materialized integrated table.
    Extract {
        #[command(flatten)]
        project: ProjectArgs,
        #[arg(long)]
        table: String,
        #[arg(long, value_enum, default_value = "ntriples")]
        out: OutArg,
    },
}

impl ProjectArgs {
    fn config(&self) -> ProjectConfig {
        ProjectConfig {
            sources: self.sources.clone(),
            schema: self.schema.clone(),
            log_level: self.log_level.parse().unwrap_or(LogLevel::Info),
        }
    }
}

fn read_query(text: &QueryText) -> Result<String, Outcome> {
    let fail = |message: String| Outcome {
        stderr: format!("error: {message}\n"),
        code: EXIT_USAGE,
        ..Outcome::default()
    };
    match (&text.query, &text.query_file) {
        (Some(q), _) => Ok(q.clone()),
        (None, Some(path)) => std::fs::read_to_string(path)
            .map_err(|e| fail(format!("cannot read {}: {e}", path.display()))),
        (None, None) => Err(fail("one of --query or --query-file is required".into())),
    }
}

fn run(command: Command) -> Outcome {
    let config = match &command {
        Command::Validate { project }
        | Command::ShowSchema { project, .. }
        | Command::Convert { project, .. }
        | Command::Query { project, .. }
        | Command::Extract { project, .. } => project.config(),
    };
    env_logger::Builder::new()
        .filter_level(config.log_level.filter())
        .target(env_logger::Target::Stderr)
        .init();

    match command {
        Command::Validate { .. } => cmd_validate(&config),
        Command::ShowSchema { format, .. } => cmd_show_schema(
            &config,
            match format {
                FormatArg::Dot => SchemaFormat::Dot,
                FormatArg::Xml => SchemaFormat::Xml,
            },
        ),
        Command::Convert { text, .. } => match read_query(&text) {
            Ok(sql) => cmd_convert(&config, &sql),
            Err(o) => o,
        },
        Command::Query { text, lang, out, .. } => match read_query(&text) {
            Ok(q) => {
                let lang = match lang {
                    LangArg::Sql => QueryLang::Sql,
                    LangArg::Rdql => QueryLang::Rdql,
                };
                cmd_query(&config, &q, lang, out.into())
            }
            Err(o) => o,
        },
        Command::Extract { table, out, .. } => cmd_extract(&config, &table, out.into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = run(cli.command);
    print!("{}", outcome.stdout);
    let _ = std::io::stdout().flush();
    eprint!("{}", outcome.stderr);
    ExitCode::from(outcome.code as u8)
}

//! `avlock`: schema analysis, commutativity tables, and lock-schedule
//! simulation from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use avlock_core::commutativity::{build_table, TableSet};
use avlock_core::generate::{generate_random_schema, GenParams};
use avlock_core::render;
use avlock_core::scenario::{parse_scenario, run_scenario};
use avlock_core::schema::{parse_schema, ClassModel};

/// Exit status contract: 0 ok, 1 validation error, 2 internal error.
const EXIT_VALIDATION: u8 = 1;
const EXIT_INTERNAL: u8 = 2;

#[derive(Parser)]
#[command(
    name = "avlock",
    about = "Field-access analysis and commutativity-based lock scheduling \
             for object-oriented schemas",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a schema.
    Check {
        /// Schema file.
        schema: PathBuf,
    },
    /// Print per-method access vectors and self-call sets.
    Analyze {
        schema: PathBuf,
        /// Restrict the report to one class.
        #[arg(long)]
        class: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Print the late-binding resolution graph of a class.
    Graph {
        schema: PathBuf,
        #[arg(long)]
        class: String,
        /// Emit DOT instead of the text listing.
        #[arg(long)]
        dot: bool,
        #[arg(long)]
        json: bool,
    },
    /// Print the commutativity table of a class.
    Table {
        schema: PathBuf,
        #[arg(long)]
        class: String,
        #[arg(long)]
        json: bool,
    },
    /// Evaluate a transaction scenario over a schema.
    Simulate {
        schema: PathBuf,
        scenario: PathBuf,
        #[arg(long)]
        json: bool,
        /// Include the replay trace and the event log.
        #[arg(long)]
        trace: bool,
    },
    /// Generate a random valid schema.
    Gen(GenArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Generator seed; the output is a pure function of it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    classes: usize,
    #[arg(long, default_value_t = 3)]
    max_fields: usize,
    #[arg(long, default_value_t = 4)]
    max_methods: usize,
    #[arg(long, default_value_t = 0.3)]
    multi_inherit: f64,
    #[arg(long, default_value_t = 0.35)]
    override_prob: f64,
    #[arg(long, default_value_t = 0.8)]
    self_calls: f64,
    #[arg(long, default_value_t = 0.4)]
    prefix_calls: f64,
    #[arg(long, default_value_t = 0.25)]
    recursion: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}

enum CliError {
    Validation(avlock_core::Error),
    Internal(String),
}

impl From<avlock_core::Error> for CliError {
    fn from(e: avlock_core::Error) -> Self {
        CliError::Validation(e)
    }
}

fn read_file(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Internal(format!("cannot read {}: {e}", path.display())))
}

fn load_schema(path: &PathBuf) -> Result<ClassModel, CliError> {
    Ok(parse_schema(&read_file(path)?)?)
}

fn selected_classes<'m>(
    model: &'m ClassModel,
    class: &Option<String>,
) -> Result<Vec<&'m str>, CliError> {
    match class {
        Some(c) => {
            if !model.contains_class(c) {
                return Err(CliError::Validation(avlock_core::Error::UnknownClass(
                    c.clone(),
                )));
            }
            Ok(model.class_names().filter(|n| n == c).collect())
        }
        None => Ok(model.class_names().collect()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Check { schema } => {
            let model = load_schema(&schema)?;
            let classes = model.class_names().count();
            let methods: usize = model
                .class_names()
                .map(|c| model.methods(c).map(|t| t.len()).unwrap_or(0))
                .sum();
            println!("ok: {classes} classes, {methods} method bindings");
            Ok(())
        }
        Command::Analyze {
            schema,
            class,
            json,
        } => {
            let model = load_schema(&schema)?;
            let classes = selected_classes(&model, &class)?;
            if json {
                println!("{}", pretty(render::analysis_json(&model, &classes)?)?);
            } else {
                print!("{}", render::analysis_text(&model, &classes)?);
            }
            Ok(())
        }
        Command::Graph {
            schema,
            class,
            dot,
            json,
        } => {
            let model = load_schema(&schema)?;
            if dot {
                print!("{}", render::graph_dot(&model, &class)?);
            } else if json {
                println!("{}", pretty(render::graph_json(&model, &class)?)?);
            } else {
                print!("{}", render::graph_text(&model, &class)?);
            }
            Ok(())
        }
        Command::Table {
            schema,
            class,
            json,
        } => {
            let model = load_schema(&schema)?;
            let table = build_table(&model, &class)?;
            if json {
                println!("{}", pretty(table.to_json())?);
            } else {
                print!("{}", render::table_text(&table));
            }
            Ok(())
        }
        Command::Simulate {
            schema,
            scenario,
            json,
            trace,
        } => {
            let model = load_schema(&schema)?;
            let tables = TableSet::build(&model)?;
            let text = read_file(&scenario)?;
            let parsed = parse_scenario(&model, &text)?;
            let report = run_scenario(&model, &tables, &parsed)?;
            if json {
                println!("{}", pretty(render::simulate_json(&report))?);
            } else {
                print!("{}", render::simulate_text(&report, trace));
            }
            Ok(())
        }
        Command::Gen(args) => {
            let params = GenParams {
                classes: args.classes,
                max_fields: args.max_fields,
                max_methods: args.max_methods,
                multi_inherit: args.multi_inherit,
                override_prob: args.override_prob,
                self_calls: args.self_calls,
                prefix_calls: args.prefix_calls,
                recursion: args.recursion,
            };
            print!("{}", generate_random_schema(args.seed, &params));
            Ok(())
        }
    }
}

fn pretty(value: serde_json::Value) -> Result<String, CliError> {
    serde_json::to_string_pretty(&value).map_err(|e| CliError::Internal(e.to_string()))
}

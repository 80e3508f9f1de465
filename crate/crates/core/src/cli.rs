//! The `chorprism` command line.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::chain::{ChainError, MarkovChain, DEFAULT_MAX_STATES};
use crate::chor::{check_annotations, check_well_formed, s_conn_violation, ChorProgram};
use crate::equivalence::{lift, verify_projection, VerifyError, VerifyOptions};
use crate::expr::Value;
use crate::frontend::{auto_annotate, compile_source, AnnotationScheme, FrontendError};
use crate::prism::{alphabet, build_network_chain, emit, extension, EmitConfig};
use crate::projection::{project, ProjectOptions, ProjectionError, ProjectionMode};
use crate::semantics::build_chain;
use crate::state::{ModelKind, StateValuation};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SEMANTIC: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "chorprism",
    version,
    about = "Compile probabilistic choreographies to PRISM and check the projection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse, desugar and run the static checks.
    Check(Common),
    /// Project and write PRISM source.
    Compile {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        proj: ProjFlags,
        /// Output file; `-` for stdout. Defaults to the input with `.sm` or `.pm`.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the Markov chain of the choreography or of its projection.
    Chain {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        proj: ProjFlags,
        #[command(flatten)]
        run: RunFlags,
        #[arg(long, value_enum, default_value_t = Side::Chor)]
        side: Side,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Output file; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check that the projection behaves like the choreography.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        proj: ProjFlags,
        #[command(flatten)]
        run: RunFlags,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Source file (`.chor`).
    input: PathBuf,
    /// Override the model kind declared in the source.
    #[arg(long, value_enum)]
    model: Option<Kind>,
    /// Seed for random interaction labels; labels are `A1, A2, ...` otherwise.
    #[arg(long)]
    seed: Option<u64>,
    /// Accept choreographies that are not strongly connected.
    #[arg(long)]
    override_sconn: bool,
}

#[derive(Args, Debug)]
struct ProjFlags {
    #[arg(long, value_enum, default_value_t = Mode::Compact)]
    projection: Mode,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Args, Debug)]
struct RunFlags {
    /// Bound on reachable states.
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
    /// Initial values overriding the declarations, e.g. `x=0,y=1`.
    #[arg(long)]
    init: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Ctmc,
    Dtmc,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Formal,
    Compact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Side {
    Chor,
    Prism,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Dot,
}

/// A failure with its exit status.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<ChainError> for Failure {
    fn from(e: ChainError) -> Self {
        let code = if matches!(e, ChainError::StateBudgetExceeded { .. }) { EXIT_BUDGET } else { EXIT_SEMANTIC };
        Failure::new(code, e.to_string())
    }
}

impl From<ProjectionError> for Failure {
    fn from(e: ProjectionError) -> Self {
        Failure::new(EXIT_SEMANTIC, e.to_string())
    }
}

impl From<VerifyError> for Failure {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Chain(c) => c.into(),
            e => Failure::new(EXIT_SEMANTIC, e.to_string()),
        }
    }
}

/// Run the command line `args` (including the program name) and return the
/// exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_INPUT
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    match cmd {
        Command::Check(common) => check(&common, out),
        Command::Compile { common, proj, output } => compile(&common, &proj, output.as_deref(), out, err),
        Command::Chain { common, proj, run, side, format, output } => {
            let prog = load(&common)?;
            let init = initial_state(&prog, run.init.as_deref())?;
            let chain: MarkovChain = match side {
                Side::Chor => build_chain(&prog, init, run.max_states)?,
                Side::Prism => {
                    let p = project(&prog, &project_options(&common, &proj))?;
                    let net_init = lift(&init, &p.model).map_err(|e| Failure::new(EXIT_SEMANTIC, e.to_string()))?;
                    build_network_chain(&p.model, net_init, run.max_states)?
                }
            };
            let text = match format {
                Format::Text => chain.to_text(),
                Format::Dot => chain.to_dot(),
            };
            write_output(output.as_deref(), &text, out)?;
            Ok(EXIT_OK)
        }
        Command::Verify { common, proj, run } => {
            let prog = load(&common)?;
            let opts = VerifyOptions {
                max_states: Some(run.max_states),
                init: Some(initial_state(&prog, run.init.as_deref())?),
                projection: project_options(&common, &proj),
            };
            let report = verify_projection(&prog, &opts)?;
            let _ = write!(out, "{}", report.key_values());
            let _ = write!(err, "{}", report.details());
            Ok(if report.equivalent { EXIT_OK } else { EXIT_SEMANTIC })
        }
    }
}

fn load(common: &Common) -> Result<ChorProgram, Failure> {
    let src = std::fs::read_to_string(&common.input)
        .map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", common.input.display())))?;
    let mut prog = compile_source(&src).map_err(|e| {
        let code = if matches!(e, FrontendError::Parse(_)) { EXIT_INPUT } else { EXIT_SEMANTIC };
        Failure::new(code, format!("{}: {e}", common.input.display()))
    })?;
    if let Some(k) = common.model {
        prog.kind = match k {
            Kind::Ctmc => ModelKind::Ctmc,
            Kind::Dtmc => ModelKind::Dtmc,
        };
    }
    let scheme = match common.seed {
        Some(s) => AnnotationScheme::SeededRandom(s),
        None => AnnotationScheme::Deterministic,
    };
    Ok(auto_annotate(&prog, scheme))
}

fn project_options(common: &Common, proj: &ProjFlags) -> ProjectOptions {
    ProjectOptions {
        mode: match proj.projection {
            Mode::Formal => ProjectionMode::Formal,
            Mode::Compact => ProjectionMode::Compact,
        },
        override_sconn: common.override_sconn,
        inject_fault: proj.inject_fault,
    }
}

fn initial_state(prog: &ChorProgram, spec: Option<&str>) -> Result<StateValuation, Failure> {
    let mut s = prog.initial_state().map_err(|e| Failure::new(EXIT_SEMANTIC, e.to_string()))?;
    let Some(spec) = spec else { return Ok(s) };
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Failure::new(EXIT_INPUT, format!("--init: expected `name=value`, got `{part}`"));
        let (name, value) = part.split_once('=').ok_or_else(bad)?;
        let (name, value) = (name.trim(), value.trim());
        let value = match value {
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            v => Value::Int(v.parse().map_err(|_| bad())?),
        };
        if prog.var(name).is_none() {
            return Err(Failure::new(EXIT_INPUT, format!("--init: unknown variable `{name}`")));
        }
        s = s.with(name, value).map_err(|e| Failure::new(EXIT_INPUT, format!("--init: {e}")))?;
    }
    Ok(s)
}

fn write_output(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), Failure> {
    match path {
        None => out.write_all(text.as_bytes()).map_err(|e| Failure::new(EXIT_INPUT, e.to_string())),
        Some(p) if p == Path::new("-") => {
            out.write_all(text.as_bytes()).map_err(|e| Failure::new(EXIT_INPUT, e.to_string()))
        }
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", p.display()))),
    }
}

fn check(common: &Common, out: &mut dyn Write) -> Result<i32, Failure> {
    let prog = load(common)?;
    let mut problems: Vec<String> = Vec::new();
    if let Err(diags) = check_well_formed(&prog) {
        problems.extend(diags.iter().map(ToString::to_string));
    }
    if let Err(e) = check_annotations(&prog) {
        problems.push(e.to_string());
    }
    if problems.is_empty() {
        for (name, body) in &prog.definitions {
            match s_conn_violation(body, &prog.definitions, name) {
                Ok(None) => {}
                Ok(Some(v)) if common.override_sconn => {
                    let _ = writeln!(out, "warning: NotStronglyConnected: {v}");
                }
                Ok(Some(v)) => problems.push(format!("NotStronglyConnected: {v}")),
                Err(e) => problems.push(e.to_string()),
            }
        }
    }
    if !problems.is_empty() {
        return Err(Failure::new(EXIT_SEMANTIC, problems.join("\nerror: ")));
    }
    let _ = writeln!(
        out,
        "ok: {} roles, {} definitions, {} interactions",
        prog.roles.len(),
        prog.definitions.len(),
        prog.interactions().len()
    );
    Ok(EXIT_OK)
}

fn compile(
    common: &Common,
    proj: &ProjFlags,
    output: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let prog = load(common)?;
    let p = project(&prog, &project_options(common, proj))?;
    for w in &p.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    let text = emit(&p.model, &EmitConfig::default()).map_err(|e| Failure::new(EXIT_SEMANTIC, e.to_string()))?;
    let modules = p.model.network.modules();
    let commands: usize = modules.iter().map(|m| m.commands.len()).sum();
    let summary = format!(
        "modules={} commands={} labels={} counter_range=[0..{}]",
        modules.len(),
        commands,
        alphabet(&p.model.network).len(),
        p.ctx.counter_max()
    );
    let path = output.map(Path::to_path_buf).unwrap_or_else(|| common.input.with_extension(extension(prog.kind)));
    if path == Path::new("-") {
        write_output(None, &text, out)?;
        let _ = writeln!(err, "{summary}");
    } else {
        write_output(Some(&path), &text, out)?;
        let _ = writeln!(out, "wrote {}", path.display());
        let _ = writeln!(out, "{summary}");
    }
    Ok(EXIT_OK)
}

//! The `lpuc` command-line driver.
//!
//! Every command that writes a report embeds a [`RunManifest`] so the run can
//! be repeated. Exit codes: 0 success, 1 verification failure, 2 usage or
//! input error. Errors are printed to stderr as one JSON object.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

macro_rules! out {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! out_raw {
    ($($t:tt)*) => {{
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

use crate::gen::{gen_random_dag, GenSpec, WidthProfile};
use crate::level::{balance_paths, levelize};
use crate::netlist::{emit_ffcl, parse_ffcl, parse_structural_verilog, Netlist};
use crate::pipeline::{
    check_netlist, check_program, compile, random_batches, CheckOutcome, CompileOptions, Compiled,
};
use crate::program::{load_program, LpuConfig, Program};
use crate::sim::{
    format_vectors, parse_vectors, run, run_with, JsonLines, SimError, SimOptions, SimReport,
};

#[derive(Parser, Debug)]
#[command(
    name = "lpuc",
    version,
    about = "Compile, simulate and check combinational netlists on an LPU"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compile a netlist to a program
    Compile(CompileArgs),
    /// Run a compiled program on input vectors
    Simulate(SimulateArgs),
    /// Compare a compiled program against the reference evaluator
    Check(CheckArgs),
    /// Generate a synthetic netlist
    Gen(GenArgs),
    /// Print level, MFG and cycle statistics with and without merging
    Stats(StatsArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Ffcl,
    Verilog,
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Netlist file (`.ffcl`, or Verilog for `.v`/`.sv`)
    netlist: PathBuf,
    /// Input format; guessed from the extension when omitted
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// LPEs per LPV
    #[arg(short = 'm', default_value_t = 32)]
    m: usize,
    /// LPVs
    #[arg(short = 'n', default_value_t = 16)]
    n: usize,
    /// Switch latency in cycles
    #[arg(long = "tsw", default_value_t = 5)]
    t_sw: usize,
    /// Skip sibling MFG merging
    #[arg(long)]
    no_merge: bool,
    /// Give every MFG its own address
    #[arg(long)]
    no_share: bool,
}

impl ConfigArgs {
    fn config(&self) -> Result<LpuConfig, Failure> {
        LpuConfig::new(self.m, self.n, self.t_sw).map_err(|e| Failure::input("ConfigError", e))
    }

    fn options(&self) -> CompileOptions {
        CompileOptions {
            merge: !self.no_merge,
            share: !self.no_share,
        }
    }
}

#[derive(Args, Debug)]
struct CompileArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Program JSON to write
    #[arg(short = 'o')]
    output: PathBuf,
    /// Write the MFG partition as JSON
    #[arg(long)]
    partition: Option<PathBuf>,
    /// Write a JSON report
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Program JSON
    program: PathBuf,
    /// Input vectors, one `name <hex>` per line
    inputs: PathBuf,
    /// Output vectors; stdout when omitted
    #[arg(short = 'o')]
    output: Option<PathBuf>,
    /// Write a JSON report
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write one JSON trace record per LPE evaluation
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Check this program instead of compiling one; its config wins
    #[arg(long)]
    program: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write a JSON report
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Profile {
    Uniform,
    FaninTree,
    WideShallow,
    DeepNarrow,
    SiblingFamily,
    ChainFamily,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Read the whole generator spec from JSON; other spec flags are ignored
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Profile::Uniform)]
    profile: Profile,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    gates: usize,
    /// Maximum logic depth
    #[arg(long, default_value_t = 8)]
    depth: usize,
    /// Level width for wide-shallow and deep-narrow
    #[arg(long, default_value_t = 16)]
    width: usize,
    /// Siblings in a sibling family
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Nodes per sibling level in a sibling family
    #[arg(long, default_value_t = 1)]
    w: usize,
    /// Stages in a chain family
    #[arg(long, default_value_t = 4)]
    stages: usize,
    /// Target LPEs per LPV for family profiles
    #[arg(short = 'm', default_value_t = 32)]
    m: usize,
    #[arg(long, default_value_t = 16)]
    pis: usize,
    /// Extra internal nets to expose as outputs
    #[arg(long, default_value_t = 0)]
    pos: usize,
    /// Netlist to write; stdout when omitted
    #[arg(short = 'o')]
    output: Option<PathBuf>,
}

impl GenArgs {
    fn spec(&self) -> Result<GenSpec, Failure> {
        if let Some(path) = &self.spec {
            let text = read(path)?;
            return serde_json::from_str(&text).map_err(|e| Failure::input("SpecError", e));
        }
        let width_profile = match self.profile {
            Profile::Uniform => WidthProfile::Uniform,
            Profile::FaninTree => WidthProfile::FaninTree,
            Profile::WideShallow => WidthProfile::WideShallow { width: self.width },
            Profile::DeepNarrow => WidthProfile::DeepNarrow { width: self.width },
            Profile::SiblingFamily => WidthProfile::SiblingFamily {
                k: self.k,
                w: self.w,
                m: self.m,
            },
            Profile::ChainFamily => WidthProfile::ChainFamily {
                stages: self.stages,
                m: self.m,
            },
        };
        Ok(GenSpec {
            seed: self.seed,
            gate_count: self.gates,
            max_fanin_depth: self.depth,
            width_profile,
            pi_count: self.pis,
            po_count: self.pos,
        })
    }
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Seed of the input batch used to time each program
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write a JSON report
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Everything needed to repeat a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<LpuConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merge: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub share: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
}

impl RunManifest {
    fn new(command: &str) -> Self {
        RunManifest {
            tool: "lpuc".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            config: None,
            merge: None,
            share: None,
            seed: None,
            trials: None,
        }
    }

    fn with_config(mut self, cfg: LpuConfig, opts: CompileOptions) -> Self {
        self.config = Some(cfg);
        self.merge = Some(opts.merge);
        self.share = Some(opts.share);
        self
    }
}

#[derive(Debug)]
struct Failure {
    code: u8,
    kind: String,
    message: String,
}

impl Failure {
    fn input(kind: &str, e: impl ToString) -> Self {
        Failure {
            code: 2,
            kind: kind.into(),
            message: e.to_string(),
        }
    }

    fn verification(kind: &str, e: impl ToString) -> Self {
        Failure {
            code: 1,
            kind: kind.into(),
            message: e.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::input("IoError", format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::input("IoError", format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    write(path, &text)
}

fn read_netlist(input: &InputArgs) -> Result<Netlist, Failure> {
    let text = read(&input.netlist)?;
    let format =
        input.format.unwrap_or_else(
            || match input.netlist.extension().and_then(|e| e.to_str()) {
                Some("v" | "sv") => Format::Verilog,
                _ => Format::Ffcl,
            },
        );
    let parsed = match format {
        Format::Ffcl => parse_ffcl(&text),
        Format::Verilog => parse_structural_verilog(&text),
    };
    parsed.map_err(|e| Failure::input(e.kind(), format!("{}:{e}", input.netlist.display())))
}

/// Parses the process arguments, runs the command and maps the outcome to an
/// exit code.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run_cli(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("{}", json!({ "error": f.kind, "message": f.message }));
            ExitCode::from(f.code)
        }
    }
}

fn run_cli(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Compile(a) => cmd_compile(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Check(a) => cmd_check(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Stats(a) => cmd_stats(a),
    }
}

#[derive(Clone, Debug, Serialize)]
struct MfgRow {
    id: usize,
    bottom_level: u32,
    top_level: u32,
    address: usize,
    latency_cycles: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    replica_of: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
struct CompileStats {
    gates: usize,
    l_max: u32,
    max_width: usize,
    inserted_buffers: usize,
    mfgs_before_merge: usize,
    mfgs_after_merge: usize,
    queue_depth: usize,
    passes: usize,
    compute_cells: usize,
    utilization: f64,
    mfgs: Vec<MfgRow>,
}

impl CompileStats {
    fn new(netlist: &Netlist, c: &Compiled) -> Self {
        let t_c = c.program.config.t_c();
        CompileStats {
            gates: netlist.num_gates(),
            l_max: c.dag.l_max(),
            max_width: c.dag.max_width(),
            inserted_buffers: c.dag.inserted_buffer_count(),
            mfgs_before_merge: c.unmerged_count,
            mfgs_after_merge: c.partition.len(),
            queue_depth: c.program.queue_depth,
            passes: c.program.passes,
            compute_cells: c.program.compute_cell_count(),
            utilization: c.program.utilization(),
            mfgs: c
                .program
                .mfgs
                .iter()
                .map(|g| MfgRow {
                    id: g.id,
                    bottom_level: g.bottom_level,
                    top_level: g.top_level,
                    address: g.address,
                    latency_cycles: (g.top_level - g.bottom_level + 1) as usize * t_c,
                    replica_of: g.replica_of,
                })
                .collect(),
        }
    }

    fn print(&self) {
        out!("gates              {}", self.gates);
        out!("l_max              {}", self.l_max);
        out!("MFGs before merge  {}", self.mfgs_before_merge);
        out!("MFGs after merge   {}", self.mfgs_after_merge);
        out!("queue_depth        {}", self.queue_depth);
        out!("passes             {}", self.passes);
        out!("utilization        {:.3}", self.utilization);
        out!();
        out!(
            "{:>6} {:>7} {:>7} {:>8} {:>8}  note",
            "mfg",
            "bottom",
            "top",
            "address",
            "cycles"
        );
        for r in &self.mfgs {
            let note = r
                .replica_of
                .map(|s| format!("copy of {s}"))
                .unwrap_or_default();
            out!(
                "{:>6} {:>7} {:>7} {:>8} {:>8}  {note}",
                r.id,
                r.bottom_level,
                r.top_level,
                r.address,
                r.latency_cycles
            );
        }
    }
}

fn cmd_compile(a: CompileArgs) -> Result<u8, Failure> {
    let netlist = read_netlist(&a.input)?;
    let cfg = a.config.config()?;
    let opts = a.config.options();
    let c = compile(&netlist, &cfg, opts).map_err(|e| Failure::input(e.kind(), e))?;
    write(&a.output, &c.program.to_json())?;
    let mut manifest = RunManifest::new("compile").with_config(cfg, opts);
    manifest.inputs.push(a.input.netlist.clone());
    manifest.outputs.push(a.output.clone());
    if let Some(path) = &a.partition {
        write_json(path, &c.partition.dump(&c.dag))?;
        manifest.outputs.push(path.clone());
    }
    let stats = CompileStats::new(&netlist, &c);
    if let Some(path) = &a.report {
        manifest.outputs.push(path.clone());
        write_json(path, &json!({ "manifest": manifest, "stats": stats }))?;
    }
    stats.print();
    Ok(0)
}

fn load(path: &Path) -> Result<Program, Failure> {
    load_program(&read(path)?)
        .map_err(|e| Failure::input(e.kind(), format!("{}: {e}", path.display())))
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::MissingInput(_) | SimError::WidthMismatch { .. } => Failure::input(e.kind(), e),
        _ => Failure::verification(e.kind(), e),
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<u8, Failure> {
    let prog = load(&a.program)?;
    let inputs = parse_vectors(&read(&a.inputs)?, prog.config.width())
        .map_err(|e| Failure::input("VectorError", format!("{}: {e}", a.inputs.display())))?;
    let (outputs, report) = match &a.trace {
        Some(path) => {
            let file = fs::File::create(path)
                .map_err(|e| Failure::input("IoError", format!("{}: {e}", path.display())))?;
            let mut sink = JsonLines(BufWriter::new(file));
            let result = run_with(&prog, &inputs, SimOptions::default(), Some(&mut sink))
                .map_err(sim_failure)?;
            sink.0
                .flush()
                .map_err(|e| Failure::input("IoError", format!("{}: {e}", path.display())))?;
            result
        }
        None => run(&prog, &inputs).map_err(sim_failure)?,
    };
    let names = prog
        .output_buffer_map
        .iter()
        .filter(|e| e.is_output())
        .map(|e| e.net.as_str());
    let text = format_vectors(names, &outputs);
    let mut manifest = RunManifest::new("simulate");
    manifest.config = Some(prog.config);
    manifest.inputs = vec![a.program.clone(), a.inputs.clone()];
    manifest
        .outputs
        .extend(a.output.iter().chain(&a.trace).chain(&a.report).cloned());
    match &a.output {
        Some(path) => {
            write(path, &text)?;
            print_sim_report(&report);
        }
        None => out_raw!("{text}"),
    }
    if let Some(path) = &a.report {
        write_json(path, &json!({ "manifest": manifest, "report": report }))?;
    }
    Ok(0)
}

fn print_sim_report(r: &SimReport) {
    out!("total_cycles  {}", r.total_cycles);
    out!("queue_depth   {}", r.queue_depth);
    out!("passes        {}", r.passes);
    out!("utilization   {:.3}", r.utilization);
}

fn cmd_check(a: CheckArgs) -> Result<u8, Failure> {
    let netlist = read_netlist(&a.input)?;
    let mut manifest = RunManifest::new("check");
    manifest.inputs.push(a.input.netlist.clone());
    manifest.seed = Some(a.seed);
    manifest.trials = Some(a.trials);
    let outcome = match &a.program {
        Some(path) => {
            let prog = load(path)?;
            manifest.inputs.push(path.clone());
            manifest.config = Some(prog.config);
            check_program(&netlist, &prog, a.trials, a.seed)
        }
        None => {
            let cfg = a.config.config()?;
            let opts = a.config.options();
            manifest = manifest.with_config(cfg, opts);
            check_netlist(&netlist, &cfg, opts, a.trials, a.seed)
        }
    };
    if a.trials == 0 {
        eprintln!("warning: zero trials, PASS is vacuous");
    }
    match &outcome {
        CheckOutcome::Pass { trials } => out!("PASS ({trials} trials)"),
        CheckOutcome::Mismatch {
            trial,
            net,
            expected,
            found,
        } => {
            out!("FAIL: trial {trial}, net `{net}`: expected {expected}, found {found}")
        }
        CheckOutcome::SimFailure {
            trial,
            kind,
            message,
        } => out!("FAIL: trial {trial}, {kind}: {message}"),
        CheckOutcome::CompileFailure { kind, message } => out!("FAIL: {kind}: {message}"),
    }
    if let Some(path) = &a.report {
        manifest.outputs.push(path.clone());
        write_json(path, &json!({ "manifest": manifest, "outcome": outcome }))?;
    }
    Ok(if outcome.passed() { 0 } else { 1 })
}

fn cmd_gen(a: GenArgs) -> Result<u8, Failure> {
    let spec = a.spec()?;
    let netlist = gen_random_dag(&spec).map_err(|e| Failure::input("InfeasibleSpec", e))?;
    let text = emit_ffcl(&netlist);
    let dag = levelize(&netlist);
    let summary = format!(
        "l_max      {}\nmax_width  {}\ngates      {}\n",
        dag.l_max(),
        dag.max_width(),
        netlist.num_gates()
    );
    match &a.output {
        Some(path) => {
            write(path, &text)?;
            out_raw!("{summary}");
        }
        None => {
            out_raw!("{text}");
            eprint!("{summary}");
        }
    }
    Ok(0)
}

#[derive(Clone, Debug, Serialize)]
struct Variant {
    merge: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    mfgs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    queue_depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    passes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    total_cycles: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mfg_cycles: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn cmd_stats(a: StatsArgs) -> Result<u8, Failure> {
    let netlist = read_netlist(&a.input)?;
    let cfg = a.config.config()?;
    let share = !a.config.no_share;
    let raw = levelize(&netlist);
    let balanced = balance_paths(&raw);
    out!("gates              {}", netlist.num_gates());
    out!("inputs             {}", netlist.num_inputs());
    out!("outputs            {}", netlist.outputs().len());
    out!("l_max              {}", raw.l_max());
    out!("max_width          {}", raw.max_width());
    out!("inserted_buffers   {}", balanced.inserted_buffer_count());
    out!("balanced_width     {}", balanced.max_width());
    out!();
    out!(
        "{:>6} {:>6} {:>12} {:>7} {:>13} {:>11}",
        "merge",
        "mfgs",
        "queue_depth",
        "passes",
        "total_cycles",
        "mfg_cycles"
    );
    let batch = random_batches(&netlist, cfg.width(), 1, a.seed).remove(0);
    let mut variants = Vec::new();
    for merge in [false, true] {
        let v = match compile(&netlist, &cfg, CompileOptions { merge, share }) {
            Ok(c) => {
                let total = run(&c.program, &batch).map(|(_, r)| r.total_cycles).ok();
                let mfg_cycles = c
                    .program
                    .mfgs
                    .iter()
                    .map(|g| u64::from(g.top_level - g.bottom_level + 1) * cfg.t_c() as u64)
                    .sum();
                Variant {
                    merge,
                    mfgs: Some(c.partition.len()),
                    queue_depth: Some(c.program.queue_depth),
                    passes: Some(c.program.passes),
                    total_cycles: total,
                    mfg_cycles: Some(mfg_cycles),
                    error: None,
                }
            }
            Err(e) => Variant {
                merge,
                mfgs: None,
                queue_depth: None,
                passes: None,
                total_cycles: None,
                mfg_cycles: None,
                error: Some(format!("{}: {e}", e.kind())),
            },
        };
        let cell = |x: Option<u64>| x.map_or("-".to_string(), |x| x.to_string());
        out!(
            "{:>6} {:>6} {:>12} {:>7} {:>13} {:>11}{}",
            if merge { "on" } else { "off" },
            cell(v.mfgs.map(|x| x as u64)),
            cell(v.queue_depth.map(|x| x as u64)),
            cell(v.passes.map(|x| x as u64)),
            cell(v.total_cycles),
            cell(v.mfg_cycles),
            v.error
                .as_deref()
                .map(|e| format!("  {e}"))
                .unwrap_or_default()
        );
        variants.push(v);
    }
    if let Some(path) = &a.report {
        let mut manifest =
            RunManifest::new("stats").with_config(cfg, CompileOptions { merge: true, share });
        manifest.merge = None;
        manifest.inputs.push(a.input.netlist.clone());
        manifest.outputs.push(path.clone());
        manifest.seed = Some(a.seed);
        let summary = json!({
            "gates": netlist.num_gates(),
            "l_max": raw.l_max(),
            "max_width": raw.max_width(),
            "inserted_buffers": balanced.inserted_buffer_count(),
        });
        write_json(
            path,
            &json!({ "manifest": manifest, "netlist": summary, "variants": variants }),
        )?;
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn arguments_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn manifest_omits_unset_fields() {
        let m = RunManifest::new("gen");
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["tool"], "lpuc");
        assert!(v.get("seed").is_none());
        let m = m.with_config(LpuConfig::default(), CompileOptions::default());
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["config"]["m"], 32);
        assert_eq!(v["merge"], true);
    }

    #[test]
    fn family_flags_build_the_right_profile() {
        let cli = Cli::try_parse_from([
            "lpuc",
            "gen",
            "--profile",
            "chain-family",
            "--stages",
            "3",
            "-m",
            "4",
        ])
        .unwrap();
        let Command::Gen(a) = cli.command else {
            panic!()
        };
        assert_eq!(
            a.spec().unwrap().width_profile,
            WidthProfile::ChainFamily { stages: 3, m: 4 }
        );
    }
}

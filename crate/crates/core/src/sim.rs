//! Cycle-level LPU simulator.
//!
//! Wave `a` of pass `p` executes on LPV `v` at cycle `T_p + a + v*t_c`, where
//! `T_0 = 0` and `T_{p+1} = T_p + (D-1) + n*t_c` for queue depth `D`. Each
//! LPV writes its results into a `t_c`-deep delay line that the next LPV
//! reads exactly `t_c` cycles later. NOP results are poison, and reading
//! poison or a never-written register is an error.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::oracle::Assignment;
use crate::partition::MfgId;
use crate::program::{Cell, Program, Route, Src};
use crate::word::{BatchWord, WordParseError};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("missing value for primary input `{0}`")]
    MissingInput(String),
    #[error("input `{name}` has width {found}, expected {expected}")]
    WidthMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error(
        "uninitialized read at cycle {cycle} (pass {pass}, address {address}, LPV {lpv}, \
         LPE {lpe}): {what}"
    )]
    UninitializedRead {
        cycle: u64,
        pass: usize,
        address: usize,
        lpv: usize,
        lpe: usize,
        what: String,
    },
    #[error("output `{0}` was never written")]
    OutputNotWritten(String),
}

impl SimError {
    pub fn kind(&self) -> &'static str {
        match self {
            SimError::MissingInput(_) => "MissingInput",
            SimError::WidthMismatch { .. } => "WidthMismatch",
            SimError::UninitializedRead { .. } | SimError::OutputNotWritten(_) => {
                "UninitializedRead"
            }
        }
    }
}

/// Initial content of every snapshot register.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SnapshotInit {
    /// Unwritten; reading is an error.
    #[default]
    Empty,
    Zeros,
    Ones,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SimOptions {
    pub snapshots: SnapshotInit,
    /// Read anything unwritten as zeros instead of failing.
    pub lenient: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MfgLatency {
    pub mfg: MfgId,
    pub cycles: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimReport {
    pub total_cycles: u64,
    pub queue_depth: usize,
    pub passes: usize,
    pub utilization: f64,
    /// From the MFG's first compute cycle until its last results leave the
    /// switch.
    pub mfg_latency: Vec<MfgLatency>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub cycle: u64,
    pub pass: usize,
    pub address: usize,
    pub lpv: usize,
    pub lpe: usize,
    pub op: String,
    pub operands: Vec<String>,
    pub out: String,
    pub mfg: Option<MfgId>,
}

pub trait TraceSink {
    fn record(&mut self, r: TraceRecord) -> std::io::Result<()>;
}

impl TraceSink for Vec<TraceRecord> {
    fn record(&mut self, r: TraceRecord) -> std::io::Result<()> {
        self.push(r);
        Ok(())
    }
}

/// Writes one JSON object per line.
pub struct JsonLines<W: Write>(pub W);

impl<W: Write> TraceSink for JsonLines<W> {
    fn record(&mut self, r: TraceRecord) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.0, &r)?;
        self.0.write_all(b"\n")
    }
}

/// Pass start cycles `T_0..=T_passes`.
pub fn pass_starts(prog: &Program) -> Vec<u64> {
    let d = prog.queue_depth as u64;
    let span = d.saturating_sub(1) + (prog.config.n * prog.config.t_c()) as u64;
    (0..=prog.passes as u64).map(|p| p * span).collect()
}

struct Delay {
    tag: Option<(usize, usize)>,
    vals: Vec<Option<BatchWord>>,
}

struct Machine<'a> {
    prog: &'a Program,
    opts: SimOptions,
    width: usize,
    t_c: u64,
    delay: Vec<Vec<Delay>>,
    regs: Vec<Vec<[Option<BatchWord>; 2]>>,
    inbuf: Vec<BatchWord>,
    outbuf: Vec<Option<BatchWord>>,
    first_last: BTreeMap<MfgId, (u64, u64)>,
}

struct At {
    cycle: u64,
    pass: usize,
    address: usize,
    lpv: usize,
}

impl Machine<'_> {
    fn uninit(&self, at: &At, lpe: usize, what: String) -> Result<BatchWord, SimError> {
        if self.opts.lenient {
            return Ok(BatchWord::zeros(self.width));
        }
        Err(SimError::UninitializedRead {
            cycle: at.cycle,
            pass: at.pass,
            address: at.address,
            lpv: at.lpv,
            lpe,
            what,
        })
    }

    fn slot(&self, cell: &Cell, at: &At, lpe: usize, d: usize) -> Result<BatchWord, SimError> {
        match cell.route[d] {
            Route::Prev(j) => {
                if at.lpv == 0 {
                    return self.uninit(at, lpe, format!("slot {d} routes from before LPV 0"));
                }
                let line = &self.delay[at.lpv - 1][(at.cycle % self.t_c) as usize];
                match (&line.tag, line.vals.get(j)) {
                    (Some(tag), Some(Some(w))) if *tag == (at.pass, at.address) => Ok(w.clone()),
                    _ => self.uninit(at, lpe, format!("slot {d} carries no value from LPE {j}")),
                }
            }
            Route::Park(j, r) => match &self.regs[at.lpv][j][r.index()] {
                Some(w) => Ok(w.clone()),
                None => self.uninit(
                    at,
                    lpe,
                    format!("snapshot register {r:?} of LPE {j} is empty"),
                ),
            },
            Route::None => self.uninit(at, lpe, format!("slot {d} is not routed")),
        }
    }

    fn operand(&self, cell: &Cell, at: &At, lpe: usize, src: Src) -> Result<BatchWord, SimError> {
        match src {
            Src::Switch(d) => self.slot(cell, at, lpe, d),
            Src::Snap(r) => match &self.regs[at.lpv][lpe][r.index()] {
                Some(w) => Ok(w.clone()),
                None => self.uninit(at, lpe, format!("own snapshot register {r:?} is empty")),
            },
            Src::InputBuf(o) => Ok(self.inbuf[o].clone()),
            Src::OutputBuf(o) => match &self.outbuf[o] {
                Some(w) => Ok(w.clone()),
                None => self.uninit(at, lpe, format!("output buffer slot {o} is empty")),
            },
            Src::Const0 => Ok(BatchWord::zeros(self.width)),
        }
    }

    fn step(&mut self, at: At, sink: &mut Option<&mut dyn TraceSink>) -> Result<(), SimError> {
        let cell = &self.prog.queues[at.pass][at.lpv][at.address];
        let m = cell.lpe.len();
        let mut outs: Vec<Option<BatchWord>> = vec![None; m];
        let mut latches = Vec::new();
        let mut captures = Vec::new();
        for (e, l) in cell.lpe.iter().enumerate() {
            let binary = l.op.0.is_some_and(|op| !op.is_siso());
            let a = if l.op.0.is_some() || l.snap.a {
                Some(self.operand(cell, &at, e, l.src_a)?)
            } else {
                None
            };
            let b = if binary || l.snap.b {
                Some(self.operand(cell, &at, e, l.src_b)?)
            } else {
                None
            };
            if let Some(op) = l.op.0 {
                let x = a.as_ref().unwrap();
                let out = match &b {
                    Some(y) if binary => x.zip_with(y, |p, q| op.eval(p, q)),
                    _ => x.map(|p| op.eval(p, 0)),
                };
                if let Some(mfg) = cell.mfg {
                    let fl = self.first_last.entry(mfg).or_insert((at.cycle, at.cycle));
                    fl.0 = fl.0.min(at.cycle);
                    fl.1 = fl.1.max(at.cycle);
                }
                if let Some(s) = sink.as_deref_mut() {
                    let operands = if binary {
                        vec![a.clone(), b.clone()]
                    } else {
                        vec![a.clone()]
                    };
                    s.record(TraceRecord {
                        cycle: at.cycle,
                        pass: at.pass,
                        address: at.address,
                        lpv: at.lpv,
                        lpe: e,
                        op: op.name().to_string(),
                        operands: operands.into_iter().flatten().map(|w| w.to_hex()).collect(),
                        out: out.to_hex(),
                        mfg: cell.mfg,
                    })
                    .expect("trace sink failed");
                }
                outs[e] = Some(out);
            }
            if l.snap.a {
                latches.push((e, 0, a.clone()));
            }
            if l.snap.b {
                latches.push((e, 1, b.clone()));
            }
            if let Some(slot) = l.capture {
                captures.push((slot, outs[e].clone()));
            }
        }
        // latches commit after every operand of the cell has been read
        for (e, r, w) in latches {
            self.regs[at.lpv][e][r] = w;
        }
        for (slot, w) in captures {
            self.outbuf[slot] = w;
        }
        let line = &mut self.delay[at.lpv][(at.cycle % self.t_c) as usize];
        line.tag = Some((at.pass, at.address));
        line.vals = outs;
        Ok(())
    }
}

/// Loads the input buffer from a name-to-word map.
fn input_buffer(
    prog: &Program,
    inputs: &Assignment,
    opts: &SimOptions,
) -> Result<Vec<BatchWord>, SimError> {
    let width = prog.config.width();
    prog.input_buffer_map
        .iter()
        .map(|e| match inputs.get(&e.net) {
            Some(w) if w.width() == width => Ok(w.clone()),
            Some(w) => Err(SimError::WidthMismatch {
                name: e.net.clone(),
                expected: width,
                found: w.width(),
            }),
            None if opts.lenient => Ok(BatchWord::zeros(width)),
            None => Err(SimError::MissingInput(e.net.clone())),
        })
        .collect()
}

pub fn run_with(
    prog: &Program,
    inputs: &Assignment,
    opts: SimOptions,
    mut sink: Option<&mut dyn TraceSink>,
) -> Result<(Assignment, SimReport), SimError> {
    let cfg = prog.config;
    let width = cfg.width();
    let t_c = cfg.t_c() as u64;
    let init = match opts.snapshots {
        SnapshotInit::Empty => None,
        SnapshotInit::Zeros => Some(BatchWord::zeros(width)),
        SnapshotInit::Ones => Some(BatchWord::ones(width)),
    };
    let mut mc = Machine {
        prog,
        opts,
        width,
        t_c,
        delay: (0..cfg.n)
            .map(|_| {
                (0..t_c)
                    .map(|_| Delay {
                        tag: None,
                        vals: Vec::new(),
                    })
                    .collect()
            })
            .collect(),
        regs: vec![vec![[init.clone(), init.clone()]; cfg.m]; cfg.n],
        inbuf: input_buffer(prog, inputs, &opts)?,
        outbuf: vec![None; prog.output_buffer_map.len()],
        first_last: BTreeMap::new(),
    };
    let starts = pass_starts(prog);
    let d = prog.queue_depth as u64;
    let total = if d == 0 { 0 } else { starts[prog.passes] };
    for cycle in 0..total {
        for lpv in (0..cfg.n).rev() {
            let offset = lpv as u64 * t_c;
            let active = (0..prog.passes).find_map(|p| {
                let begin = starts[p] + offset;
                (cycle >= begin && cycle < begin + d).then(|| (p, (cycle - begin) as usize))
            });
            if let Some((pass, address)) = active {
                mc.step(
                    At {
                        cycle,
                        pass,
                        address,
                        lpv,
                    },
                    &mut sink,
                )?;
            }
        }
    }
    let mut outputs = Assignment::new();
    for e in prog.output_buffer_map.iter().filter(|e| e.is_output()) {
        match &mc.outbuf[e.slot] {
            Some(w) => {
                outputs.insert(e.net.clone(), w.clone());
            }
            None if opts.lenient => {
                outputs.insert(e.net.clone(), BatchWord::zeros(width));
            }
            None => return Err(SimError::OutputNotWritten(e.net.clone())),
        }
    }
    let report = SimReport {
        total_cycles: total,
        queue_depth: prog.queue_depth,
        passes: prog.passes,
        utilization: prog.utilization(),
        mfg_latency: mc
            .first_last
            .iter()
            .map(|(&mfg, &(first, last))| MfgLatency {
                mfg,
                cycles: last - first + t_c,
            })
            .collect(),
    };
    Ok((outputs, report))
}

pub fn run(prog: &Program, inputs: &Assignment) -> Result<(Assignment, SimReport), SimError> {
    run_with(prog, inputs, SimOptions::default(), None)
}

pub fn trace(
    prog: &Program,
    inputs: &Assignment,
    sink: &mut dyn TraceSink,
) -> Result<(), SimError> {
    run_with(prog, inputs, SimOptions::default(), Some(sink)).map(|_| ())
}

/// A program holding only `mfg`'s cells, at address 0.
pub fn isolate(prog: &Program, mfg: MfgId) -> Program {
    let mut out = Program::empty(prog.config, 1, prog.passes);
    out.input_buffer_map = prog.input_buffer_map.clone();
    out.output_buffer_map = prog.output_buffer_map.clone();
    out.net_name_table = prog.net_name_table.clone();
    out.mfgs = prog
        .mfgs
        .iter()
        .filter(|g| g.id == mfg)
        .cloned()
        .map(|mut g| {
            g.address = 0;
            g
        })
        .collect();
    for ((p, v, _), cell) in prog.cells() {
        if cell.mfg == Some(mfg) {
            *out.cell_mut(p, v, 0) = cell.clone();
        }
    }
    out
}

/// Runs `mfg` alone, with every operand from outside it read as zeros, and
/// returns its measured latency in cycles.
pub fn isolated_latency(prog: &Program, mfg: MfgId) -> Result<u64, SimError> {
    let single = isolate(prog, mfg);
    let mut records: Vec<TraceRecord> = Vec::new();
    let opts = SimOptions {
        lenient: true,
        ..SimOptions::default()
    };
    run_with(&single, &Assignment::new(), opts, Some(&mut records))?;
    let first = records.iter().map(|r| r.cycle).min().unwrap_or(0);
    let last = records.iter().map(|r| r.cycle).max().unwrap_or(0);
    Ok(last - first + prog.config.t_c() as u64)
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum VectorError {
    #[error("line {line}: expected `<name> <hex>`")]
    Format { line: usize },
    #[error("line {line}: {source}")]
    Word { line: usize, source: WordParseError },
    #[error("line {line}: `{name}` appears twice")]
    Duplicate { line: usize, name: String },
}

/// Parses a vector file: one `name <hex>` per line, `#` comments allowed.
pub fn parse_vectors(text: &str, width: usize) -> Result<Assignment, VectorError> {
    let mut out = Assignment::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let mut parts = body.split_whitespace();
        let (Some(name), Some(hex), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(VectorError::Format { line });
        };
        let w =
            BatchWord::from_hex(width, hex).map_err(|source| VectorError::Word { line, source })?;
        if out.insert(name.to_string(), w).is_some() {
            return Err(VectorError::Duplicate {
                line,
                name: name.to_string(),
            });
        }
    }
    Ok(out)
}

/// Formats `values` in the order of `names`, skipping names without a value.
pub fn format_vectors<'a>(names: impl IntoIterator<Item = &'a str>, values: &Assignment) -> String {
    let mut s = String::new();
    for n in names {
        if let Some(w) = values.get(n) {
            s.push_str(n);
            s.push(' ');
            s.push_str(&w.to_hex());
            s.push('\n');
        }
    }
    s
}

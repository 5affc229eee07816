//! The static LPU program image and its JSON encoding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::netlist::GateOp;

pub const PROGRAM_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpuConfig {
    /// LPEs per LPV.
    pub m: usize,
    /// LPVs per LPU.
    pub n: usize,
    /// Switch latency in cycles.
    pub t_sw: usize,
}

impl Default for LpuConfig {
    fn default() -> Self {
        LpuConfig {
            m: 32,
            n: 16,
            t_sw: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("invalid LPU configuration: {0}")]
pub struct ConfigError(pub String);

impl LpuConfig {
    pub fn new(m: usize, n: usize, t_sw: usize) -> Result<Self, ConfigError> {
        let cfg = LpuConfig { m, n, t_sw };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.m == 0 {
            return Err(ConfigError("m must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(ConfigError("n must be at least 1".into()));
        }
        Ok(())
    }

    /// Cycles for one LPV stage: one compute cycle plus the switch.
    pub fn t_c(&self) -> usize {
        1 + self.t_sw
    }

    /// Batch width carried by every data path.
    pub fn width(&self) -> usize {
        2 * self.m
    }

    pub fn lpv_of(&self, level: u32) -> usize {
        (level as usize - 1) % self.n
    }

    pub fn pass_of(&self, level: u32) -> usize {
        (level as usize - 1) / self.n
    }

    pub fn passes_for(&self, l_max: u32) -> usize {
        (l_max as usize).div_ceil(self.n).max(1)
    }
}

/// An LPE operation; `None` is a NOP.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Op(pub Option<GateOp>);

impl Op {
    pub const NOP: Op = Op(None);
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(op) => f.write_str(op.name()),
            None => f.write_str("NOP"),
        }
    }
}

impl FromStr for Op {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "NOP" {
            return Ok(Op::NOP);
        }
        s.parse::<GateOp>()
            .ok()
            .filter(|op| op.name() == s)
            .map(|op| Op(Some(op)))
            .ok_or_else(|| format!("unknown opcode `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Reg {
    A,
    B,
}

impl Reg {
    pub fn index(self) -> usize {
        match self {
            Reg::A => 0,
            Reg::B => 1,
        }
    }
}

/// Operand selector of an LPE.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Src {
    /// Destination slot of this LPV's switch stage.
    Switch(usize),
    /// The LPE's own snapshot register.
    Snap(Reg),
    InputBuf(usize),
    /// Output buffer slot, used for values that circulate into the next pass.
    OutputBuf(usize),
    Const0,
}

/// Source of one switch destination slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Output of LPE `j` of the previous LPV, same wave.
    Prev(usize),
    /// Snapshot register of LPE `j` of this LPV.
    Park(usize, Reg),
    None,
}

fn parse_index(s: &str, what: &str) -> Result<usize, String> {
    s.parse().map_err(|_| format!("bad {what} index in `{s}`"))
}

impl fmt::Display for Src {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Src::Switch(s) => write!(f, "SW{s}"),
            Src::Snap(Reg::A) => f.write_str("SNAP_A"),
            Src::Snap(Reg::B) => f.write_str("SNAP_B"),
            Src::InputBuf(o) => write!(f, "IN{o}"),
            Src::OutputBuf(o) => write!(f, "OUT{o}"),
            Src::Const0 => f.write_str("ZERO"),
        }
    }
}

impl FromStr for Src {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "SNAP_A" => Src::Snap(Reg::A),
            "SNAP_B" => Src::Snap(Reg::B),
            "ZERO" => Src::Const0,
            _ => {
                if let Some(r) = s.strip_prefix("SW") {
                    Src::Switch(parse_index(r, "switch slot")?)
                } else if let Some(r) = s.strip_prefix("IN") {
                    Src::InputBuf(parse_index(r, "input buffer")?)
                } else if let Some(r) = s.strip_prefix("OUT") {
                    Src::OutputBuf(parse_index(r, "output buffer")?)
                } else {
                    return Err(format!("unknown operand selector `{s}`"));
                }
            }
        })
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Route::Prev(j) => write!(f, "P{j}"),
            Route::Park(j, Reg::A) => write!(f, "A{j}"),
            Route::Park(j, Reg::B) => write!(f, "B{j}"),
            Route::None => f.write_str("-"),
        }
    }
}

impl FromStr for Route {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "-" {
            return Ok(Route::None);
        }
        let (head, rest) = s.split_at(s.chars().next().map_or(0, char::len_utf8));
        let j = parse_index(rest, "LPE")?;
        match head {
            "P" => Ok(Route::Prev(j)),
            "A" => Ok(Route::Park(j, Reg::A)),
            "B" => Ok(Route::Park(j, Reg::B)),
            _ => Err(format!("unknown route `{s}`")),
        }
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }
        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(Op);
string_serde!(Src);
string_serde!(Route);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapWrite {
    pub a: bool,
    pub b: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpeInstr {
    pub op: Op,
    pub src_a: Src,
    pub src_b: Src,
    pub snap: SnapWrite,
    /// Output buffer slot that records this LPE's result.
    pub capture: Option<usize>,
}

impl LpeInstr {
    pub const NOP: LpeInstr = LpeInstr {
        op: Op::NOP,
        src_a: Src::Const0,
        src_b: Src::Const0,
        snap: SnapWrite { a: false, b: false },
        capture: None,
    };

    pub fn is_nop(&self) -> bool {
        self.op.0.is_none()
    }

    pub fn is_idle(&self) -> bool {
        self.is_nop() && !self.snap.a && !self.snap.b && self.capture.is_none()
    }
}

/// The instruction one LPV executes at one address.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub mfg: Option<usize>,
    pub lpe: Vec<LpeInstr>,
    pub route: Vec<Route>,
}

impl Cell {
    pub fn nop(m: usize) -> Self {
        Cell {
            mfg: None,
            lpe: vec![LpeInstr::NOP; m],
            route: vec![Route::None; 2 * m],
        }
    }

    pub fn is_idle(&self) -> bool {
        self.lpe.iter().all(LpeInstr::is_idle)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputEntry {
    pub offset: usize,
    pub address: usize,
    pub lpe: usize,
    pub net: String,
}

/// Prefix of output buffer nets that carry values between passes.
pub const CIRCULATION_TAG: &str = "~circ:";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputEntry {
    pub slot: usize,
    pub pass: usize,
    pub address: usize,
    pub lpv: usize,
    pub lpe: usize,
    pub net: String,
}

impl OutputEntry {
    pub fn is_output(&self) -> bool {
        !self.net.starts_with(CIRCULATION_TAG)
    }
}

/// Where an MFG's instructions sit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub id: usize,
    pub address: usize,
    pub bottom_level: u32,
    pub top_level: u32,
    /// Level whose cell latches this MFG's outputs into snapshot registers.
    pub park_level: Option<u32>,
    /// Node ids per level, bottom first; LPE `i` of a level computes entry `i`.
    pub nodes: Vec<Vec<u32>>,
    /// Partition MFG this placement recomputes for one of its parents.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replica_of: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Program {
    pub version: u32,
    pub config: LpuConfig,
    pub queue_depth: usize,
    pub passes: usize,
    /// Indexed `[pass][lpv][address]`.
    pub queues: Vec<Vec<Vec<Cell>>>,
    pub input_buffer_map: Vec<InputEntry>,
    pub output_buffer_map: Vec<OutputEntry>,
    pub mfgs: Vec<Placement>,
    pub net_name_table: Vec<String>,
}

impl Program {
    pub fn empty(config: LpuConfig, queue_depth: usize, passes: usize) -> Self {
        Program {
            version: PROGRAM_VERSION,
            config,
            queue_depth,
            passes,
            queues: vec![vec![vec![Cell::nop(config.m); queue_depth]; config.n]; passes],
            input_buffer_map: Vec::new(),
            output_buffer_map: Vec::new(),
            mfgs: Vec::new(),
            net_name_table: Vec::new(),
        }
    }

    pub fn cell(&self, pass: usize, lpv: usize, address: usize) -> &Cell {
        &self.queues[pass][lpv][address]
    }

    pub fn cell_mut(&mut self, pass: usize, lpv: usize, address: usize) -> &mut Cell {
        &mut self.queues[pass][lpv][address]
    }

    pub fn cells(&self) -> impl Iterator<Item = ((usize, usize, usize), &Cell)> {
        self.queues.iter().enumerate().flat_map(|(p, lpvs)| {
            lpvs.iter().enumerate().flat_map(move |(v, addrs)| {
                addrs.iter().enumerate().map(move |(a, c)| ((p, v, a), c))
            })
        })
    }

    pub fn compute_cell_count(&self) -> usize {
        self.cells()
            .flat_map(|(_, c)| &c.lpe)
            .filter(|l| !l.is_nop())
            .count()
    }

    /// Share of LPE slots holding a gate operation.
    pub fn utilization(&self) -> f64 {
        let total = self.passes * self.config.n * self.queue_depth * self.config.m;
        if total == 0 {
            0.0
        } else {
            self.compute_cell_count() as f64 / total as f64
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("program serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("schema error at `{path}`: {msg}")]
    SchemaError { path: String, msg: String },
    #[error("program version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u32 },
}

impl LoadError {
    pub fn kind(&self) -> &'static str {
        match self {
            LoadError::SchemaError { .. } => "SchemaError",
            LoadError::VersionMismatch { .. } => "VersionMismatch",
        }
    }
}

fn schema(path: impl Into<String>, msg: impl Into<String>) -> LoadError {
    LoadError::SchemaError {
        path: path.into(),
        msg: msg.into(),
    }
}

/// Parses and shape-checks a program document.
pub fn load_program(text: &str) -> Result<Program, LoadError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| schema(".", e.to_string()))?;
    match value.get("version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == PROGRAM_VERSION as u64 => {}
        Some(v) => {
            return Err(LoadError::VersionMismatch {
                found: v,
                expected: PROGRAM_VERSION,
            })
        }
        None => return Err(schema("version", "missing or not an integer")),
    }
    let program: Program = serde_path_to_error::deserialize(value)
        .map_err(|e| schema(e.path().to_string(), e.inner().to_string()))?;
    check_shape(&program)?;
    Ok(program)
}

fn check_shape(p: &Program) -> Result<(), LoadError> {
    let cfg = p.config;
    cfg.validate().map_err(|e| schema("config", e.0))?;
    let (m, n, d) = (cfg.m, cfg.n, p.queue_depth);
    if p.queues.len() != p.passes {
        return Err(schema(
            "queues",
            format!("expected {} passes, found {}", p.passes, p.queues.len()),
        ));
    }
    let in_len = p.input_buffer_map.len();
    let out_len = p.output_buffer_map.len();
    for (pi, lpvs) in p.queues.iter().enumerate() {
        if lpvs.len() != n {
            return Err(schema(
                format!("queues[{pi}]"),
                format!("expected {n} LPVs, found {}", lpvs.len()),
            ));
        }
        for (v, addrs) in lpvs.iter().enumerate() {
            if addrs.len() != d {
                return Err(schema(
                    format!("queues[{pi}][{v}]"),
                    format!("expected {d} addresses, found {}", addrs.len()),
                ));
            }
            for (a, cell) in addrs.iter().enumerate() {
                let at = format!("queues[{pi}][{v}][{a}]");
                if cell.lpe.len() != m {
                    return Err(schema(
                        format!("{at}.lpe"),
                        format!("expected {m} LPEs, found {}", cell.lpe.len()),
                    ));
                }
                if cell.route.len() != 2 * m {
                    return Err(schema(
                        format!("{at}.route"),
                        format!("expected {} slots, found {}", 2 * m, cell.route.len()),
                    ));
                }
                for (j, r) in cell.route.iter().enumerate() {
                    let bad = match *r {
                        Route::Prev(k) | Route::Park(k, _) => k >= m,
                        Route::None => false,
                    };
                    if bad {
                        return Err(schema(
                            format!("{at}.route[{j}]"),
                            format!("`{r}` names an LPE outside 0..{m}"),
                        ));
                    }
                }
                for (e, l) in cell.lpe.iter().enumerate() {
                    for (name, src) in [("src_a", l.src_a), ("src_b", l.src_b)] {
                        let bad = match src {
                            Src::Switch(s) => s >= 2 * m,
                            Src::InputBuf(o) => o >= in_len,
                            Src::OutputBuf(o) => o >= out_len,
                            Src::Snap(_) | Src::Const0 => false,
                        };
                        if bad {
                            return Err(schema(
                                format!("{at}.lpe[{e}].{name}"),
                                format!("`{src}` is out of range"),
                            ));
                        }
                    }
                    if l.capture.is_some_and(|c| c >= out_len) {
                        return Err(schema(
                            format!("{at}.lpe[{e}].capture"),
                            "slot is out of range",
                        ));
                    }
                }
            }
        }
    }
    for (i, e) in p.input_buffer_map.iter().enumerate() {
        if e.offset != i {
            return Err(schema(
                format!("input_buffer_map[{i}].offset"),
                "offsets must be sequential",
            ));
        }
    }
    for (i, e) in p.output_buffer_map.iter().enumerate() {
        if e.slot != i {
            return Err(schema(
                format!("output_buffer_map[{i}].slot"),
                "slots must be sequential",
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selector_text_round_trips() {
        for s in [
            Src::Switch(3),
            Src::Snap(Reg::B),
            Src::InputBuf(0),
            Src::OutputBuf(12),
            Src::Const0,
        ] {
            assert_eq!(s.to_string().parse::<Src>().unwrap(), s);
        }
        for r in [
            Route::Prev(0),
            Route::Park(7, Reg::A),
            Route::Park(1, Reg::B),
            Route::None,
        ] {
            assert_eq!(r.to_string().parse::<Route>().unwrap(), r);
        }
        for op in [Op::NOP, Op(Some(GateOp::Xnor))] {
            assert_eq!(op.to_string().parse::<Op>().unwrap(), op);
        }
        assert!("and".parse::<Op>().is_err());
        assert!("Q3".parse::<Route>().is_err());
    }

    #[test]
    fn config_arithmetic() {
        let c = LpuConfig::default();
        assert_eq!(c.t_c(), 6);
        assert_eq!((c.lpv_of(1), c.pass_of(1)), (0, 0));
        assert_eq!((c.lpv_of(17), c.pass_of(17)), (0, 1));
        assert_eq!(c.passes_for(48), 3);
        assert_eq!(c.passes_for(49), 4);
        assert!(LpuConfig::new(0, 4, 5).is_err());
    }

    #[test]
    fn empty_program_round_trips() {
        let p = Program::empty(
            LpuConfig {
                m: 2,
                n: 2,
                t_sw: 1,
            },
            1,
            1,
        );
        let text = p.to_json();
        let back = load_program(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn load_rejects_bad_documents() {
        let p = Program::empty(
            LpuConfig {
                m: 2,
                n: 2,
                t_sw: 1,
            },
            1,
            1,
        );
        let text = p.to_json();
        assert!(matches!(
            load_program(&text[..text.len() / 2]),
            Err(LoadError::SchemaError { .. })
        ));

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["version"] = 99.into();
        assert!(matches!(
            load_program(&v.to_string()),
            Err(LoadError::VersionMismatch { found: 99, .. })
        ));

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["config"]["m"] = 3.into();
        match load_program(&v.to_string()) {
            Err(LoadError::SchemaError { path, .. }) => assert_eq!(path, "queues[0][0][0].lpe"),
            other => panic!("{other:?}"),
        }

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["queues"][0][1][0]["lpe"][1]["op"] = "MUX".into();
        match load_program(&v.to_string()) {
            Err(LoadError::SchemaError { path, .. }) => {
                assert_eq!(path, "queues[0][1][0].lpe[1].op")
            }
            other => panic!("{other:?}"),
        }
    }
}

//! Gate-level combinational netlists.
//!
//! A [`Netlist`] is always valid once constructed: nets are unique, every
//! fanin resolves, arities match and the gate graph is acyclic. Node ids are
//! assigned in file order, primary inputs first and gates after them.
//!
//! [`RawNetlist`] is the unresolved, name-based form produced by the parsers.
//! [`RawNetlist::validate`] reports the first invariant violation in node-id
//! order and [`RawNetlist::build`] resolves it into a [`Netlist`].

mod ffcl;
mod verilog;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ffcl::{emit_ffcl, parse_ffcl};
pub use verilog::parse_structural_verilog;

#[derive(
    Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// The cell library: two-input (MISO) and one-input (SISO) Boolean operations.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateOp {
    And,
    Or,
    Xor,
    Xnor,
    Nand,
    Nor,
    Not,
    Buf,
}

impl GateOp {
    pub const ALL: [GateOp; 8] = [
        GateOp::And,
        GateOp::Or,
        GateOp::Xor,
        GateOp::Xnor,
        GateOp::Nand,
        GateOp::Nor,
        GateOp::Not,
        GateOp::Buf,
    ];

    pub fn arity(self) -> usize {
        if self.is_siso() {
            1
        } else {
            2
        }
    }

    pub fn is_siso(self) -> bool {
        matches!(self, GateOp::Not | GateOp::Buf)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateOp::And => "AND",
            GateOp::Or => "OR",
            GateOp::Xor => "XOR",
            GateOp::Xnor => "XNOR",
            GateOp::Nand => "NAND",
            GateOp::Nor => "NOR",
            GateOp::Not => "NOT",
            GateOp::Buf => "BUF",
        }
    }

    /// Applies the operation to 64 packed lanes. `b` is ignored for SISO ops.
    #[inline]
    pub fn eval(self, a: u64, b: u64) -> u64 {
        match self {
            GateOp::And => a & b,
            GateOp::Or => a | b,
            GateOp::Xor => a ^ b,
            GateOp::Xnor => !(a ^ b),
            GateOp::Nand => !(a & b),
            GateOp::Nor => !(a | b),
            GateOp::Not => !a,
            GateOp::Buf => a,
        }
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateOp {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GateOp::ALL
            .into_iter()
            .find(|op| op.name().eq_ignore_ascii_case(s))
            .ok_or(())
    }
}

/// Source position, 1-based. Line 0 means "not from a document".
#[derive(Copy, Clone, PartialEq, Eq, Debug, Default)]
pub struct Loc {
    pub line: usize,
    pub col: usize,
}

impl Loc {
    pub fn new(line: usize, col: usize) -> Self {
        Loc { line, col }
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            f.write_str("<netlist>")
        } else {
            write!(f, "{}:{}", self.line, self.col)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetlistError {
    #[error("{loc}: syntax error: {msg}")]
    Syntax { msg: String, loc: Loc },
    #[error("{loc}: undefined net `{name}`")]
    UndefinedNet { name: String, loc: Loc },
    #[error("{loc}: net `{name}` is defined more than once")]
    DuplicateNet { name: String, loc: Loc },
    #[error("{loc}: gate `{name}` ({op}) expects {expected} fanin(s), found {found}")]
    ArityMismatch {
        name: String,
        op: GateOp,
        expected: usize,
        found: usize,
        loc: Loc,
    },
    #[error("{loc}: combinational cycle through `{name}`")]
    CycleDetected { name: String, loc: Loc },
    #[error("{loc}: unsupported construct `{construct}`")]
    UnsupportedConstruct { construct: String, loc: Loc },
}

impl NetlistError {
    /// Stable machine-readable error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            NetlistError::Syntax { .. } => "SyntaxError",
            NetlistError::UndefinedNet { .. } => "UndefinedNet",
            NetlistError::DuplicateNet { .. } => "DuplicateNet",
            NetlistError::ArityMismatch { .. } => "ArityMismatch",
            NetlistError::CycleDetected { .. } => "CycleDetected",
            NetlistError::UnsupportedConstruct { .. } => "UnsupportedConstruct",
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RawGate {
    pub output: String,
    pub op: GateOp,
    pub fanins: Vec<String>,
    pub loc: Loc,
}

/// Name-based netlist as read from a document, before resolution.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct RawNetlist {
    pub inputs: Vec<(String, Loc)>,
    pub outputs: Vec<(String, Loc)>,
    pub gates: Vec<RawGate>,
}

impl RawNetlist {
    pub fn validate(&self) -> Result<(), NetlistError> {
        self.clone().build().map(|_| ())
    }

    /// Resolves names into node ids. Violations are reported in node-id order.
    pub fn build(self) -> Result<Netlist, NetlistError> {
        let mut index: HashMap<String, NodeId> = HashMap::new();
        let mut nodes = Vec::with_capacity(self.inputs.len() + self.gates.len());
        let mut locs = Vec::with_capacity(nodes.capacity());

        for (name, loc) in &self.inputs {
            let id = NodeId(nodes.len() as u32);
            if index.insert(name.clone(), id).is_some() {
                return Err(NetlistError::DuplicateNet {
                    name: name.clone(),
                    loc: *loc,
                });
            }
            nodes.push(Node {
                name: name.clone(),
                kind: NodeKind::Input,
            });
            locs.push(*loc);
        }
        for g in &self.gates {
            let id = NodeId(nodes.len() as u32);
            if index.insert(g.output.clone(), id).is_some() {
                return Err(NetlistError::DuplicateNet {
                    name: g.output.clone(),
                    loc: g.loc,
                });
            }
            if g.fanins.len() != g.op.arity() {
                return Err(NetlistError::ArityMismatch {
                    name: g.output.clone(),
                    op: g.op,
                    expected: g.op.arity(),
                    found: g.fanins.len(),
                    loc: g.loc,
                });
            }
            nodes.push(Node {
                name: g.output.clone(),
                kind: NodeKind::Gate {
                    op: g.op,
                    fanins: Vec::new(),
                },
            });
            locs.push(g.loc);
        }

        let first_gate = self.inputs.len();
        for (k, g) in self.gates.iter().enumerate() {
            let mut ids = Vec::with_capacity(g.fanins.len());
            for f in &g.fanins {
                match index.get(f) {
                    Some(&id) => ids.push(id),
                    None => {
                        return Err(NetlistError::UndefinedNet {
                            name: f.clone(),
                            loc: g.loc,
                        })
                    }
                }
            }
            if let NodeKind::Gate { fanins, .. } = &mut nodes[first_gate + k].kind {
                *fanins = ids;
            }
        }

        let mut outputs = Vec::with_capacity(self.outputs.len());
        let mut seen = std::collections::HashSet::new();
        for (name, loc) in &self.outputs {
            let id = *index.get(name).ok_or_else(|| NetlistError::UndefinedNet {
                name: name.clone(),
                loc: *loc,
            })?;
            if !seen.insert(id) {
                return Err(NetlistError::DuplicateNet {
                    name: name.clone(),
                    loc: *loc,
                });
            }
            outputs.push(id);
        }

        let netlist = Netlist {
            num_inputs: self.inputs.len(),
            nodes,
            outputs,
            index,
        };
        if let Some(id) = netlist.find_cycle() {
            return Err(NetlistError::CycleDetected {
                name: netlist.name(id).to_string(),
                loc: locs[id.index()],
            });
        }
        Ok(netlist)
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum NodeKind {
    Input,
    Gate { op: GateOp, fanins: Vec<NodeId> },
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
}

impl Node {
    pub fn fanins(&self) -> &[NodeId] {
        match &self.kind {
            NodeKind::Input => &[],
            NodeKind::Gate { fanins, .. } => fanins,
        }
    }

    pub fn op(&self) -> Option<GateOp> {
        match &self.kind {
            NodeKind::Input => None,
            NodeKind::Gate { op, .. } => Some(*op),
        }
    }
}

/// A validated combinational netlist.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Netlist {
    num_inputs: usize,
    nodes: Vec<Node>,
    outputs: Vec<NodeId>,
    index: HashMap<String, NodeId>,
}

impl Netlist {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id.index()].name
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_gates(&self) -> usize {
        self.nodes.len() - self.num_inputs
    }

    pub fn is_input(&self, id: NodeId) -> bool {
        id.index() < self.num_inputs
    }

    pub fn inputs(&self) -> impl ExactSizeIterator<Item = NodeId> + '_ {
        (0..self.num_inputs as u32).map(NodeId)
    }

    pub fn gates(&self) -> impl ExactSizeIterator<Item = NodeId> + '_ {
        (self.num_inputs as u32..self.nodes.len() as u32).map(NodeId)
    }

    pub fn outputs(&self) -> &[NodeId] {
        &self.outputs
    }

    pub fn lookup(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    /// Appends a gate and returns its id. Fanins must already exist.
    pub(crate) fn push_gate(&mut self, name: String, op: GateOp, fanins: Vec<NodeId>) -> NodeId {
        debug_assert_eq!(fanins.len(), op.arity());
        debug_assert!(fanins.iter().all(|f| f.index() < self.nodes.len()));
        let id = NodeId(self.nodes.len() as u32);
        let prev = self.index.insert(name.clone(), id);
        debug_assert!(prev.is_none(), "net `{name}` already exists");
        self.nodes.push(Node {
            name,
            kind: NodeKind::Gate { op, fanins },
        });
        id
    }

    pub(crate) fn set_fanin(&mut self, gate: NodeId, slot: usize, src: NodeId) {
        if let NodeKind::Gate { fanins, .. } = &mut self.nodes[gate.index()].kind {
            fanins[slot] = src;
        }
    }

    pub fn fanouts(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for g in self.gates() {
            for &f in self.node(g).fanins() {
                if out[f.index()].last() != Some(&g) {
                    out[f.index()].push(g);
                }
            }
        }
        out
    }

    /// Topological order over all nodes (inputs first), or `None` on a cycle.
    pub fn topo_order(&self) -> Option<Vec<NodeId>> {
        let mut indeg: Vec<usize> = self.nodes.iter().map(|n| n.fanins().len()).collect();
        let fanouts = self.fanouts_with_multiplicity();
        let mut ready: Vec<NodeId> = (0..self.nodes.len() as u32)
            .rev()
            .map(NodeId)
            .filter(|id| indeg[id.index()] == 0)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(id) = ready.pop() {
            order.push(id);
            for &g in &fanouts[id.index()] {
                indeg[g.index()] -= 1;
                if indeg[g.index()] == 0 {
                    ready.push(g);
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }

    fn fanouts_with_multiplicity(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for g in self.gates() {
            for &f in self.node(g).fanins() {
                out[f.index()].push(g);
            }
        }
        out
    }

    /// Smallest node id lying on a cycle, if any. Iterative, so it terminates
    /// on arbitrarily deep or cyclic graphs.
    fn find_cycle(&self) -> Option<NodeId> {
        if self.topo_order().is_some() {
            return None;
        }
        // Nodes left with positive in-degree after Kahn's algorithm are either on
        // a cycle or downstream of one. Peel the downstream ones by repeatedly
        // removing nodes with no remaining fanout inside the residual set.
        let n = self.nodes.len();
        let mut indeg: Vec<usize> = self.nodes.iter().map(|x| x.fanins().len()).collect();
        let fanouts = self.fanouts_with_multiplicity();
        let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut removed = vec![false; n];
        while let Some(i) = stack.pop() {
            removed[i] = true;
            for &g in &fanouts[i] {
                indeg[g.index()] -= 1;
                if indeg[g.index()] == 0 {
                    stack.push(g.index());
                }
            }
        }
        let mut outdeg = vec![0usize; n];
        for i in 0..n {
            if removed[i] {
                continue;
            }
            outdeg[i] = fanouts[i].iter().filter(|g| !removed[g.index()]).count();
        }
        let mut sinks: Vec<usize> = (0..n).filter(|&i| !removed[i] && outdeg[i] == 0).collect();
        while let Some(i) = sinks.pop() {
            removed[i] = true;
            for &f in self.nodes[i].fanins() {
                let f = f.index();
                if !removed[f] {
                    outdeg[f] -= 1;
                    if outdeg[f] == 0 {
                        sinks.push(f);
                    }
                }
            }
        }
        (0..n).find(|&i| !removed[i]).map(|i| NodeId(i as u32))
    }

    /// Re-checks every invariant.
    pub fn validate(&self) -> Result<(), NetlistError> {
        self.to_raw().build().map(|_| ())
    }

    pub fn to_raw(&self) -> RawNetlist {
        let loc = Loc::default();
        RawNetlist {
            inputs: self
                .inputs()
                .map(|id| (self.name(id).to_string(), loc))
                .collect(),
            outputs: self
                .outputs
                .iter()
                .map(|&id| (self.name(id).to_string(), loc))
                .collect(),
            gates: self
                .gates()
                .map(|id| {
                    let node = self.node(id);
                    RawGate {
                        output: node.name.clone(),
                        op: node.op().unwrap(),
                        fanins: node
                            .fanins()
                            .iter()
                            .map(|&f| self.name(f).to_string())
                            .collect(),
                        loc,
                    }
                })
                .collect(),
        }
    }
}

/// Checks a name against `[A-Za-z_][A-Za-z0-9_]*`.
pub fn is_valid_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gate(out: &str, op: GateOp, fanins: &[&str]) -> RawGate {
        RawGate {
            output: out.into(),
            op,
            fanins: fanins.iter().map(|s| s.to_string()).collect(),
            loc: Loc::default(),
        }
    }

    fn raw(inputs: &[&str], outputs: &[&str], gates: Vec<RawGate>) -> RawNetlist {
        RawNetlist {
            inputs: inputs
                .iter()
                .map(|s| (s.to_string(), Loc::default()))
                .collect(),
            outputs: outputs
                .iter()
                .map(|s| (s.to_string(), Loc::default()))
                .collect(),
            gates,
        }
    }

    #[test]
    fn single_gate_validates() {
        let r = raw(
            &["a", "b"],
            &["y"],
            vec![gate("y", GateOp::And, &["a", "b"])],
        );
        assert!(r.validate().is_ok());
        let n = r.build().unwrap();
        assert_eq!(n.num_inputs(), 2);
        assert_eq!(n.num_gates(), 1);
        assert_eq!(n.lookup("y"), Some(NodeId(2)));
    }

    #[test]
    fn undefined_fanin() {
        let r = raw(&["a"], &["y"], vec![gate("y", GateOp::And, &["a", "zz"])]);
        assert!(
            matches!(r.validate(), Err(NetlistError::UndefinedNet { name, .. }) if name == "zz")
        );
    }

    #[test]
    fn undefined_output() {
        let r = raw(&["a"], &["q"], vec![gate("y", GateOp::Buf, &["a"])]);
        assert!(
            matches!(r.validate(), Err(NetlistError::UndefinedNet { name, .. }) if name == "q")
        );
    }

    #[test]
    fn two_gate_cycle_reports_smallest_id() {
        let r = raw(
            &["a"],
            &["g2"],
            vec![
                gate("g1", GateOp::And, &["a", "g2"]),
                gate("g2", GateOp::Buf, &["g1"]),
            ],
        );
        assert!(
            matches!(r.validate(), Err(NetlistError::CycleDetected { name, .. }) if name == "g1")
        );
    }

    #[test]
    fn cycle_downstream_node_is_not_blamed() {
        // g0 sits downstream of the g1/g2 loop but has a smaller id.
        let r = raw(
            &["a"],
            &["g0"],
            vec![
                gate("g0", GateOp::Buf, &["g2"]),
                gate("g1", GateOp::And, &["a", "g2"]),
                gate("g2", GateOp::Buf, &["g1"]),
            ],
        );
        assert!(
            matches!(r.validate(), Err(NetlistError::CycleDetected { name, .. }) if name == "g1")
        );
    }

    #[test]
    fn arity_and_duplicates() {
        let r = raw(&["a"], &["y"], vec![gate("y", GateOp::Not, &["a", "a"])]);
        assert!(matches!(
            r.validate(),
            Err(NetlistError::ArityMismatch {
                expected: 1,
                found: 2,
                ..
            })
        ));
        let r = raw(&["a", "a"], &[], vec![]);
        assert!(matches!(
            r.validate(),
            Err(NetlistError::DuplicateNet { .. })
        ));
        let r = raw(&["a"], &["y", "y"], vec![gate("y", GateOp::Buf, &["a"])]);
        assert!(matches!(
            r.validate(),
            Err(NetlistError::DuplicateNet { .. })
        ));
    }

    #[test]
    fn op_semantics() {
        for a in [0u64, 1] {
            for b in [0u64, 1] {
                assert_eq!(
                    GateOp::Nand.eval(a, b) & 1,
                    GateOp::Not.eval(GateOp::And.eval(a, b), 0) & 1
                );
                assert_eq!(GateOp::Nor.eval(a, b) & 1, !(a | b) & 1);
                assert_eq!(GateOp::Xnor.eval(a, b) & 1, u64::from(a == b));
            }
        }
        assert_eq!("xnor".parse::<GateOp>(), Ok(GateOp::Xnor));
        assert!("MUX".parse::<GateOp>().is_err());
    }
}

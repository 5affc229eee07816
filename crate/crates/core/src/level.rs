//! Levelization and full path balancing.
//!
//! After [`balance_paths`] every edge spans exactly one logic level and every
//! primary output is driven from level `l_max`. Inserted buffers are named
//! `__fpb_<k>` and appended after the existing gates, so original node ids
//! stay stable.

use crate::netlist::{GateOp, Netlist, NodeId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeveledDag {
    netlist: Netlist,
    level: Vec<u32>,
    l_max: u32,
    by_level: Vec<Vec<NodeId>>,
    fanouts: Vec<Vec<NodeId>>,
    po_drivers: Vec<NodeId>,
    inserted_buffer_count: usize,
    balanced: bool,
}

impl LeveledDag {
    pub fn netlist(&self) -> &Netlist {
        &self.netlist
    }

    pub fn level(&self, id: NodeId) -> u32 {
        self.level[id.index()]
    }

    pub fn levels(&self) -> &[u32] {
        &self.level
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    /// Nodes at level `l`, ascending by id.
    pub fn node_set(&self, l: u32) -> &[NodeId] {
        self.by_level.get(l as usize).map_or(&[], Vec::as_slice)
    }

    pub fn fanins(&self, id: NodeId) -> &[NodeId] {
        self.netlist.node(id).fanins()
    }

    pub fn fanouts(&self, id: NodeId) -> &[NodeId] {
        &self.fanouts[id.index()]
    }

    /// The node whose value each primary output reads, in output order. After
    /// balancing this is the end of the output's padding chain.
    pub fn po_drivers(&self) -> &[NodeId] {
        &self.po_drivers
    }

    pub fn inserted_buffer_count(&self) -> usize {
        self.inserted_buffer_count
    }

    pub fn is_balanced(&self) -> bool {
        self.balanced
    }

    pub fn max_width(&self) -> usize {
        self.by_level
            .iter()
            .skip(1)
            .map(Vec::len)
            .max()
            .unwrap_or(0)
    }

    /// Gates with no fanout that do not drive a primary output, ascending.
    pub fn dangling_sinks(&self) -> Vec<NodeId> {
        let mut is_po = vec![false; self.netlist.len()];
        for &d in &self.po_drivers {
            is_po[d.index()] = true;
        }
        self.netlist
            .gates()
            .filter(|g| self.fanouts[g.index()].is_empty() && !is_po[g.index()])
            .collect()
    }

    fn rebuild_index(&mut self) {
        self.l_max = self.level.iter().copied().max().unwrap_or(0);
        self.by_level = vec![Vec::new(); self.l_max as usize + 1];
        for (i, &l) in self.level.iter().enumerate() {
            self.by_level[l as usize].push(NodeId(i as u32));
        }
        self.fanouts = self.netlist.fanouts();
    }
}

/// ASAP levels: primary inputs at 0, every gate one above its deepest fanin.
pub fn levelize(netlist: &Netlist) -> LeveledDag {
    let order = netlist
        .topo_order()
        .expect("validated netlists are acyclic");
    let mut level = vec![0u32; netlist.len()];
    for id in order {
        level[id.index()] = netlist
            .node(id)
            .fanins()
            .iter()
            .map(|f| level[f.index()] + 1)
            .max()
            .unwrap_or(0);
    }
    let mut dag = LeveledDag {
        netlist: netlist.clone(),
        level,
        l_max: 0,
        by_level: Vec::new(),
        fanouts: Vec::new(),
        po_drivers: netlist.outputs().to_vec(),
        inserted_buffer_count: 0,
        balanced: false,
    };
    dag.rebuild_index();
    dag
}

struct BufferNamer {
    next: usize,
}

impl BufferNamer {
    fn fresh(&mut self, netlist: &Netlist) -> String {
        loop {
            let name = format!("__fpb_{}", self.next);
            self.next += 1;
            if netlist.lookup(&name).is_none() {
                return name;
            }
        }
    }
}

/// Splices a BUF chain onto every edge that spans more than one level and pads
/// every primary output up to `l_max` (at least 1).
pub fn balance_paths(dag: &LeveledDag) -> LeveledDag {
    let mut out = dag.clone();
    let mut namer = BufferNamer {
        next: dag.inserted_buffer_count,
    };
    let mut inserted = 0usize;
    let gates: Vec<NodeId> = dag.netlist.gates().collect();
    for g in gates {
        let target = out.level[g.index()];
        let fanins = out.netlist.node(g).fanins().to_vec();
        for (slot, src) in fanins.into_iter().enumerate() {
            let gap = target - out.level[src.index()];
            if gap > 1 {
                let tail = insert_chain(&mut out, &mut namer, src, gap - 1);
                out.netlist.set_fanin(g, slot, tail);
                inserted += (gap - 1) as usize;
            }
        }
    }
    let target = dag.l_max.max(1);
    for k in 0..out.po_drivers.len() {
        let d = out.po_drivers[k];
        let l = out.level[d.index()];
        if l < target {
            out.po_drivers[k] = insert_chain(&mut out, &mut namer, d, target - l);
            inserted += (target - l) as usize;
        }
    }
    out.inserted_buffer_count = dag.inserted_buffer_count + inserted;
    out.balanced = true;
    out.rebuild_index();
    out
}

fn insert_chain(dag: &mut LeveledDag, namer: &mut BufferNamer, src: NodeId, len: u32) -> NodeId {
    let mut prev = src;
    for _ in 0..len {
        let name = namer.fresh(&dag.netlist);
        let l = dag.level[prev.index()] + 1;
        prev = dag.netlist.push_gate(name, GateOp::Buf, vec![prev]);
        dag.level.push(l);
    }
    prev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_ffcl;

    /// Buffers an independent counter predicts: sum of (gap - 1) over edges
    /// plus the padding each output needs to reach l_max.
    fn predicted_buffers(dag: &LeveledDag) -> usize {
        let mut total = 0usize;
        for g in dag.netlist().gates() {
            for &f in dag.fanins(g) {
                total += (dag.level(g) - dag.level(f) - 1) as usize;
            }
        }
        let target = dag.l_max().max(1);
        for &d in dag.po_drivers() {
            total += (target - dag.level(d)) as usize;
        }
        total
    }

    fn assert_balanced(dag: &LeveledDag) {
        for g in dag.netlist().gates() {
            for &f in dag.fanins(g) {
                assert_eq!(dag.level(g), dag.level(f) + 1, "edge {f}->{g}");
            }
        }
        for &d in dag.po_drivers() {
            assert_eq!(dag.level(d), dag.l_max());
        }
        for i in dag.netlist().inputs() {
            assert_eq!(dag.level(i), 0);
        }
    }

    #[test]
    fn chain_levels() {
        let n = parse_ffcl("input a\noutput g2\ngate g1 BUF a\ngate g2 BUF g1").unwrap();
        let d = levelize(&n);
        assert_eq!(d.levels(), &[0, 1, 2]);
        assert_eq!(d.l_max(), 2);
    }

    #[test]
    fn unbalanced_edge_gets_one_buffer() {
        let n = parse_ffcl("input a b\noutput y\ngate y AND a g1\ngate g1 BUF b").unwrap();
        let d = levelize(&n);
        assert_eq!(d.level(n.lookup("y").unwrap()), 2);
        assert_eq!(predicted_buffers(&d), 1);
        let b = balance_paths(&d);
        assert_eq!(b.inserted_buffer_count(), 1);
        assert_balanced(&b);
        assert_eq!(b.netlist().lookup("__fpb_0"), Some(NodeId(4)));
    }

    #[test]
    fn balanced_and_is_a_fixpoint() {
        let n = parse_ffcl("input a b\noutput y\ngate y AND a b").unwrap();
        let b = balance_paths(&levelize(&n));
        assert_eq!(b.inserted_buffer_count(), 0);
        assert_eq!(b.netlist(), &n);
    }

    #[test]
    fn shallow_output_is_padded() {
        let text = "input a b\noutput p3 q\n\
                    gate p AND a b\ngate p1 BUF p\ngate p2 BUF p1\ngate q1 NOT a\ngate q BUF q1\n\
                    gate p3 BUF p2\n";
        let n = parse_ffcl(text).unwrap();
        let d = levelize(&n);
        assert_eq!(d.level(n.lookup("p3").unwrap()), 4);
        assert_eq!(d.level(n.lookup("q").unwrap()), 2);
        assert_eq!(predicted_buffers(&d), 2);
        let b = balance_paths(&d);
        assert_eq!(b.inserted_buffer_count(), 2);
        assert_balanced(&b);
    }

    #[test]
    fn input_wired_to_output_is_padded_to_level_one() {
        let n = parse_ffcl("input a\noutput a").unwrap();
        let b = balance_paths(&levelize(&n));
        assert_eq!(b.l_max(), 1);
        assert_eq!(b.inserted_buffer_count(), 1);
        assert_balanced(&b);
    }

    #[test]
    fn idempotent() {
        let n =
            parse_ffcl("input a b c\noutput y\ngate y AND a g2\ngate g1 BUF b\ngate g2 OR g1 c")
                .unwrap();
        let once = balance_paths(&levelize(&n));
        let twice = balance_paths(&once);
        assert_eq!(twice.inserted_buffer_count(), once.inserted_buffer_count());
        assert_eq!(twice, once);
    }
}

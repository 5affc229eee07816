//! Maximal feasible subgraph (MFG) extraction and sibling merging.
//!
//! An MFG is a level-closed slice of a balanced dag with at most `m` nodes on
//! every level, so that it can be mapped onto consecutive LPVs of an LPU with
//! `m` processing elements each. Fanins from outside the MFG are only allowed
//! into its bottom level.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::Serialize;

use crate::level::LeveledDag;
use crate::netlist::NodeId;

pub type MfgId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mfg {
    pub id: MfgId,
    pub bottom_level: u32,
    pub top_level: u32,
    /// Index `i` holds the members at level `bottom_level + i`, ascending.
    pub nodes_by_level: Vec<Vec<NodeId>>,
    pub roots: Vec<NodeId>,
    pub children: Vec<MfgId>,
    pub parents: Vec<MfgId>,
    /// Distinct fanins of the bottom level, ascending.
    pub input_nodes: Vec<NodeId>,
}

impl Mfg {
    pub fn nodes_at(&self, level: u32) -> &[NodeId] {
        if level < self.bottom_level {
            return &[];
        }
        self.nodes_by_level
            .get((level - self.bottom_level) as usize)
            .map_or(&[], Vec::as_slice)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes_by_level.iter().flatten().copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes_by_level.iter().map(Vec::len).sum()
    }

    pub fn height(&self) -> u32 {
        self.top_level - self.bottom_level + 1
    }

    pub fn contains(&self, n: NodeId, level: u32) -> bool {
        self.nodes_at(level).binary_search(&n).is_ok()
    }

    fn min_root(&self) -> NodeId {
        *self
            .roots
            .iter()
            .min()
            .expect("an MFG has at least one root")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub mfgs: Vec<Mfg>,
    /// MFGs that nothing else consumes: those rooted at output drivers or at
    /// dangling gates.
    pub root_mfg_ids: Vec<MfgId>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.mfgs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mfgs.is_empty()
    }

    pub fn coverage(&self) -> BTreeSet<NodeId> {
        self.mfgs.iter().flat_map(Mfg::nodes).collect()
    }

    pub fn dump(&self, dag: &LeveledDag) -> Vec<MfgDump> {
        let name = |n: &NodeId| dag.netlist().name(*n).to_string();
        self.mfgs
            .iter()
            .map(|g| MfgDump {
                id: g.id,
                bottom_level: g.bottom_level,
                top_level: g.top_level,
                nodes: g.nodes().map(|n| name(&n)).collect(),
                roots: g.roots.iter().map(name).collect(),
                children: g.children.clone(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MfgDump {
    pub id: MfgId,
    pub bottom_level: u32,
    pub top_level: u32,
    pub nodes: Vec<String>,
    pub roots: Vec<String>,
    pub children: Vec<MfgId>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PartitionError {
    #[error("level {level} of the MFG rooted at node {root} needs more than m={m} slots")]
    WidthOverflow { root: NodeId, level: u32, m: usize },
    #[error("cannot compare MFGs with bottom levels {a} and {b}")]
    BottomMismatch { a: u32, b: u32 },
}

/// Grows an MFG from `root` toward the inputs one level at a time and stops
/// below the first level that would hold more than `m` nodes.
pub fn find_mfg(dag: &LeveledDag, root: NodeId, m: usize) -> Result<Mfg, PartitionError> {
    let top = dag.level(root);
    if m == 0 || top == 0 {
        return Err(PartitionError::WidthOverflow {
            root,
            level: top,
            m,
        });
    }
    let mut levels: Vec<Vec<NodeId>> = Vec::new();
    let mut frontier = vec![root];
    let mut level = top;
    loop {
        if frontier.len() > m || level == 0 {
            break;
        }
        let mut next: Vec<NodeId> = frontier
            .iter()
            .flat_map(|&n| dag.fanins(n).iter().copied())
            .collect();
        next.sort_unstable();
        next.dedup();
        debug_assert!(
            next.iter().all(|&f| dag.level(f) + 1 == level),
            "dag is not balanced"
        );
        levels.push(std::mem::replace(&mut frontier, next));
        level -= 1;
    }
    levels.reverse();
    let bottom_level = level + 1;
    let input_nodes = frontier;
    Ok(Mfg {
        id: 0,
        bottom_level,
        top_level: top,
        nodes_by_level: levels,
        roots: vec![root],
        children: Vec::new(),
        parents: Vec::new(),
        input_nodes,
    })
}

/// Extracts MFGs from every output driver and dangling gate, then recursively
/// from every gate feeding an MFG's bottom level. MFGs are keyed by root node,
/// so an MFG reachable along several paths is built once. Ids follow BFS order.
pub fn partition(dag: &LeveledDag, m: usize) -> Result<Partition, PartitionError> {
    let mut roots: Vec<NodeId> = Vec::new();
    for &d in dag.po_drivers().iter().chain(&dag.dangling_sinks()) {
        if dag.level(d) > 0 && !roots.contains(&d) {
            roots.push(d);
        }
    }
    let mut by_root: HashMap<NodeId, MfgId> = HashMap::new();
    let mut mfgs: Vec<Mfg> = Vec::new();
    let mut queue: VecDeque<MfgId> = VecDeque::new();
    let mut get_or_build = |root: NodeId,
                            mfgs: &mut Vec<Mfg>,
                            queue: &mut VecDeque<MfgId>|
     -> Result<MfgId, PartitionError> {
        if let Some(&id) = by_root.get(&root) {
            return Ok(id);
        }
        let mut g = find_mfg(dag, root, m)?;
        g.id = mfgs.len();
        by_root.insert(root, g.id);
        queue.push_back(g.id);
        mfgs.push(g);
        Ok(mfgs.len() - 1)
    };
    let mut root_mfg_ids = Vec::new();
    for &r in &roots {
        let id = get_or_build(r, &mut mfgs, &mut queue)?;
        root_mfg_ids.push(id);
    }
    while let Some(id) = queue.pop_front() {
        let inputs = mfgs[id].input_nodes.clone();
        for n in inputs {
            if dag.level(n) == 0 {
                continue;
            }
            let child = get_or_build(n, &mut mfgs, &mut queue)?;
            if !mfgs[id].children.contains(&child) {
                mfgs[id].children.push(child);
                mfgs[child].parents.push(id);
            }
        }
    }
    Ok(Partition { mfgs, root_mfg_ids })
}

fn union_len(a: &[NodeId], b: &[NodeId]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
        n += 1;
    }
    n + (a.len() - i) + (b.len() - j)
}

/// Whether every level of the union of `a` and `b` still fits in `m` slots.
pub fn check_level(a: &Mfg, b: &Mfg, m: usize) -> Result<bool, PartitionError> {
    if a.bottom_level != b.bottom_level {
        return Err(PartitionError::BottomMismatch {
            a: a.bottom_level,
            b: b.bottom_level,
        });
    }
    let top = a.top_level.max(b.top_level);
    Ok((a.bottom_level..=top).all(|l| union_len(a.nodes_at(l), b.nodes_at(l)) <= m))
}

fn sorted_union(a: &[NodeId], b: &[NodeId]) -> Vec<NodeId> {
    let mut v: Vec<NodeId> = a.iter().chain(b).copied().collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn union_mfg(a: &Mfg, b: &Mfg) -> Mfg {
    let top = a.top_level.max(b.top_level);
    let mut roots = a.roots.clone();
    roots.extend(b.roots.iter().copied().filter(|r| !a.roots.contains(r)));
    Mfg {
        id: a.id,
        bottom_level: a.bottom_level,
        top_level: top,
        nodes_by_level: (a.bottom_level..=top)
            .map(|l| sorted_union(a.nodes_at(l), b.nodes_at(l)))
            .collect(),
        roots,
        children: Vec::new(),
        parents: Vec::new(),
        input_nodes: sorted_union(&a.input_nodes, &b.input_nodes),
    }
}

struct Arena {
    slots: Vec<Option<Mfg>>,
}

impl Arena {
    fn get(&self, id: MfgId) -> &Mfg {
        self.slots[id].as_ref().expect("live MFG")
    }

    fn get_mut(&mut self, id: MfgId) -> &mut Mfg {
        self.slots[id].as_mut().expect("live MFG")
    }

    /// Merges `b` into `a` and rewrites every link that pointed at `b`.
    fn absorb(&mut self, a: MfgId, b: MfgId) {
        let gb = self.slots[b].take().expect("live MFG");
        let ga = self.get(a);
        let mut merged = union_mfg(ga, &gb);
        merged.children = ga.children.clone();
        merged.parents = ga.parents.clone();
        for &c in &gb.children {
            if !merged.children.contains(&c) {
                merged.children.push(c);
            }
        }
        for &p in &gb.parents {
            if !merged.parents.contains(&p) {
                merged.parents.push(p);
            }
        }
        for &c in &gb.children {
            let ps = &mut self.get_mut(c).parents;
            ps.retain(|&x| x != b);
            if !ps.contains(&a) {
                ps.push(a);
            }
        }
        for &p in &gb.parents {
            let cs = &mut self.get_mut(p).children;
            let had_a = cs.contains(&a);
            if had_a {
                cs.retain(|&x| x != b);
            } else {
                for x in cs.iter_mut() {
                    if *x == b {
                        *x = a;
                    }
                }
            }
        }
        self.slots[a] = Some(merged);
    }

    /// One greedy pass over a sibling set. Returns whether anything merged.
    fn merge_siblings(&mut self, siblings: &[MfgId], m: usize, same_top: bool) -> bool {
        let mut order: Vec<MfgId> = siblings.to_vec();
        order.sort_by_key(|&id| (self.get(id).min_root(), id));
        let mut changed = false;
        let mut i = 0;
        while i < order.len() {
            let mut j = i + 1;
            while j < order.len() {
                let (a, b) = (self.get(order[i]), self.get(order[j]));
                let ok = a.bottom_level == b.bottom_level
                    && (!same_top || a.top_level == b.top_level)
                    && check_level(a, b, m).unwrap_or(false);
                if ok {
                    self.absorb(order[i], order[j]);
                    order.remove(j);
                    changed = true;
                } else {
                    j += 1;
                }
            }
            i += 1;
        }
        changed
    }
}

/// Greedily merges sibling MFGs that share a bottom level, visiting parents in
/// BFS order from the roots and repeating until no pair merges. Root MFGs are
/// treated as siblings of one another when their levels coincide.
pub fn merge_mfgs(p: &Partition, m: usize) -> Partition {
    let mut arena = Arena {
        slots: p.mfgs.iter().cloned().map(Some).collect(),
    };
    let mut roots = p.root_mfg_ids.clone();
    loop {
        let mut changed = arena.merge_siblings(&roots, m, true);
        roots.retain(|&r| arena.slots[r].is_some());
        let mut seen = vec![false; arena.slots.len()];
        let mut queue: VecDeque<MfgId> = roots.iter().copied().collect();
        for &r in &roots {
            seen[r] = true;
        }
        while let Some(id) = queue.pop_front() {
            if arena.slots[id].is_none() {
                continue;
            }
            let children = arena.get(id).children.clone();
            changed |= arena.merge_siblings(&children, m, false);
            for &c in &arena.get(id).children {
                if !seen[c] {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        if !changed {
            break;
        }
    }
    renumber(arena, &roots)
}

fn renumber(arena: Arena, roots: &[MfgId]) -> Partition {
    let mut new_id: Vec<Option<MfgId>> = vec![None; arena.slots.len()];
    let mut order = Vec::new();
    let mut queue: VecDeque<MfgId> = VecDeque::new();
    for &r in roots {
        if new_id[r].is_none() {
            new_id[r] = Some(order.len());
            order.push(r);
            queue.push_back(r);
        }
    }
    while let Some(id) = queue.pop_front() {
        for &c in &arena.get(id).children {
            if new_id[c].is_none() {
                new_id[c] = Some(order.len());
                order.push(c);
                queue.push_back(c);
            }
        }
    }
    let map = |v: &[MfgId]| -> Vec<MfgId> { v.iter().map(|&x| new_id[x].unwrap()).collect() };
    let mfgs = order
        .iter()
        .map(|&old| {
            let g = arena.get(old);
            Mfg {
                id: new_id[old].unwrap(),
                children: map(&g.children),
                parents: map(&g.parents),
                ..g.clone()
            }
        })
        .collect();
    Partition {
        mfgs,
        root_mfg_ids: map(roots),
    }
}

/// Reasons an MFG set fails [`validate_partition`].
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PartitionViolation {
    #[error("MFG {mfg}: node {node} at level {level} has fanin {fanin} outside the MFG")]
    NotClosed {
        mfg: MfgId,
        node: NodeId,
        level: u32,
        fanin: NodeId,
    },
    #[error("MFG {mfg}: level {level} holds {count} nodes, more than {m}")]
    TooWide {
        mfg: MfgId,
        level: u32,
        count: usize,
        m: usize,
    },
    #[error("MFG {mfg}: only {count} gate inputs at its bottom level, not more than {m}")]
    NotMaximal { mfg: MfgId, count: usize, m: usize },
    #[error("MFG {mfg}: node {node} is filed under level {filed} but sits at level {actual}")]
    WrongLevel {
        mfg: MfgId,
        node: NodeId,
        filed: u32,
        actual: u32,
    },
    #[error("gate {0} is not covered by any MFG")]
    Uncovered(NodeId),
    #[error("MFG {mfg}: input {node} is produced by no child")]
    UnsourcedInput { mfg: MfgId, node: NodeId },
    #[error("MFG links {a} and {b} are not mutual")]
    BrokenLink { a: MfgId, b: MfgId },
    #[error("MFG {0} lies on a cycle of parent/child links")]
    Cyclic(MfgId),
}

/// Independent checker for closure, width, maximality, coverage and link
/// consistency. It recomputes everything from the dag rather than trusting
/// the cached fields.
pub fn validate_partition(
    dag: &LeveledDag,
    p: &Partition,
    m: usize,
) -> Result<(), PartitionViolation> {
    let mut covered = vec![false; dag.netlist().len()];
    for (id, g) in p.mfgs.iter().enumerate() {
        for (i, level_nodes) in g.nodes_by_level.iter().enumerate() {
            let l = g.bottom_level + i as u32;
            if level_nodes.len() > m {
                return Err(PartitionViolation::TooWide {
                    mfg: id,
                    level: l,
                    count: level_nodes.len(),
                    m,
                });
            }
            for &n in level_nodes {
                if dag.level(n) != l {
                    return Err(PartitionViolation::WrongLevel {
                        mfg: id,
                        node: n,
                        filed: l,
                        actual: dag.level(n),
                    });
                }
                covered[n.index()] = true;
                if l > g.bottom_level {
                    for &f in dag.fanins(n) {
                        if !g.nodes().any(|x| x == f) {
                            return Err(PartitionViolation::NotClosed {
                                mfg: id,
                                node: n,
                                level: l,
                                fanin: f,
                            });
                        }
                    }
                }
            }
        }
        let inputs: BTreeSet<NodeId> = g
            .nodes_at(g.bottom_level)
            .iter()
            .flat_map(|&n| dag.fanins(n).iter().copied())
            .collect();
        let gate_inputs: Vec<NodeId> = inputs
            .iter()
            .copied()
            .filter(|&n| dag.level(n) > 0)
            .collect();
        if !gate_inputs.is_empty() && inputs.len() <= m {
            return Err(PartitionViolation::NotMaximal {
                mfg: id,
                count: inputs.len(),
                m,
            });
        }
        for &n in &gate_inputs {
            let sourced = g
                .children
                .iter()
                .any(|&c| p.mfgs[c].roots.contains(&n) || p.mfgs[c].contains(n, dag.level(n)));
            if !sourced {
                return Err(PartitionViolation::UnsourcedInput { mfg: id, node: n });
            }
        }
        for &c in &g.children {
            if !p.mfgs[c].parents.contains(&id) {
                return Err(PartitionViolation::BrokenLink { a: id, b: c });
            }
        }
        for &q in &g.parents {
            if !p.mfgs[q].children.contains(&id) {
                return Err(PartitionViolation::BrokenLink { a: q, b: id });
            }
        }
    }
    if let Some(g) = dag.netlist().gates().find(|g| !covered[g.index()]) {
        return Err(PartitionViolation::Uncovered(g));
    }
    // Kahn over child -> parent edges
    let mut pending: Vec<usize> = p.mfgs.iter().map(|g| g.children.len()).collect();
    let mut ready: Vec<MfgId> = (0..p.mfgs.len()).filter(|&i| pending[i] == 0).collect();
    let mut done = 0;
    while let Some(id) = ready.pop() {
        done += 1;
        for &q in &p.mfgs[id].parents {
            pending[q] -= 1;
            if pending[q] == 0 {
                ready.push(q);
            }
        }
    }
    if done != p.mfgs.len() {
        let stuck = (0..p.mfgs.len()).find(|&i| pending[i] > 0).unwrap();
        return Err(PartitionViolation::Cyclic(stuck));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{gen_mismatched_siblings, gen_sibling_family};
    use crate::level::{balance_paths, levelize};
    use crate::netlist::{parse_ffcl, Netlist};

    fn balanced(text: &str) -> LeveledDag {
        balance_paths(&levelize(&parse_ffcl(text).unwrap()))
    }

    fn prepare(n: &Netlist) -> LeveledDag {
        balance_paths(&levelize(n))
    }

    fn names(dag: &LeveledDag, g: &Mfg) -> Vec<String> {
        let mut v: Vec<String> = g
            .nodes()
            .map(|n| dag.netlist().name(n).to_string())
            .collect();
        v.sort();
        v
    }

    const THREE: &str =
        "input a b c d\noutput g3\ngate g1 AND a b\ngate g2 OR c d\ngate g3 XOR g1 g2\n";

    const TREE7: &str = "input a b c d e f g h\noutput r\n\
        gate l1 AND a b\ngate l2 AND c d\ngate l3 AND e f\ngate l4 AND g h\n\
        gate m1 AND l1 l2\ngate m2 AND l3 l4\ngate r AND m1 m2\n";

    #[test]
    fn three_gates_m2_stops_at_inputs() {
        let dag = balanced(THREE);
        let g = find_mfg(&dag, dag.netlist().lookup("g3").unwrap(), 2).unwrap();
        assert_eq!(names(&dag, &g), ["g1", "g2", "g3"]);
        assert_eq!((g.bottom_level, g.top_level), (1, 2));
        let p = partition(&dag, 2).unwrap();
        assert_eq!(p.len(), 1);
        validate_partition(&dag, &p, 2).unwrap();
    }

    #[test]
    fn three_gates_m4_exhausts_cone() {
        let dag = balanced(THREE);
        let g = find_mfg(&dag, dag.netlist().lookup("g3").unwrap(), 4).unwrap();
        assert_eq!(names(&dag, &g), ["g1", "g2", "g3"]);
        assert_eq!(g.bottom_level, 1);
    }

    #[test]
    fn single_gate() {
        let dag = balanced("input a b\noutput y\ngate y AND a b");
        let g = find_mfg(&dag, NodeId(2), 1).unwrap();
        assert_eq!((g.bottom_level, g.top_level, g.node_count()), (1, 1, 1));
    }

    #[test]
    fn zero_capacity_is_rejected() {
        let dag = balanced("input a b\noutput y\ngate y AND a b");
        assert!(matches!(
            find_mfg(&dag, NodeId(2), 0),
            Err(PartitionError::WidthOverflow { .. })
        ));
    }

    #[test]
    fn seven_gate_tree_gives_five_mfgs() {
        let dag = balanced(TREE7);
        let p = partition(&dag, 2).unwrap();
        validate_partition(&dag, &p, 2).unwrap();
        assert_eq!(p.len(), 5);
        assert_eq!(names(&dag, &p.mfgs[0]), ["m1", "m2", "r"]);
        assert_eq!(p.mfgs[0].bottom_level, 2);
        assert_eq!(p.mfgs[0].children, [1, 2, 3, 4]);
        for g in &p.mfgs[1..] {
            assert_eq!(g.node_count(), 1);
            assert_eq!(g.parents, [0]);
        }
    }

    #[test]
    fn seven_gate_tree_merges_leaf_pairs() {
        let dag = balanced(TREE7);
        let p = merge_mfgs(&partition(&dag, 2).unwrap(), 2);
        validate_partition(&dag, &p, 2).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(names(&dag, &p.mfgs[1]), ["l1", "l2"]);
        assert_eq!(names(&dag, &p.mfgs[2]), ["l3", "l4"]);
        assert_eq!(merge_mfgs(&p, 2), p);
    }

    fn single(id: MfgId, level: u32, nodes: &[u32]) -> Mfg {
        let ns: Vec<NodeId> = nodes.iter().map(|&n| NodeId(n)).collect();
        Mfg {
            id,
            bottom_level: level,
            top_level: level,
            nodes_by_level: vec![ns.clone()],
            roots: ns,
            children: vec![],
            parents: vec![],
            input_nodes: vec![],
        }
    }

    #[test]
    fn check_level_uses_set_union() {
        assert!(check_level(&single(0, 1, &[5]), &single(1, 1, &[6]), 2).unwrap());
        assert!(!check_level(&single(0, 1, &[5, 6]), &single(1, 1, &[7, 8]), 2).unwrap());
        assert!(check_level(&single(0, 1, &[5, 6]), &single(1, 1, &[5, 6]), 2).unwrap());
        assert_eq!(
            check_level(&single(0, 1, &[5]), &single(1, 2, &[6]), 2),
            Err(PartitionError::BottomMismatch { a: 1, b: 2 })
        );
    }

    fn siblings_of_largest_parent(p: &Partition) -> usize {
        p.mfgs.iter().map(|g| g.children.len()).max().unwrap_or(0)
    }

    #[test]
    fn four_siblings_merge_into_one() {
        let m = 8;
        let dag = prepare(&gen_sibling_family(4, 1, m).unwrap());
        let before = partition(&dag, m).unwrap();
        validate_partition(&dag, &before, m).unwrap();
        let narrow = |p: &Partition| {
            p.mfgs
                .iter()
                .filter(|g| g.nodes_by_level.iter().all(|l| l.len() <= 4) && !g.parents.is_empty())
                .count()
        };
        assert_eq!(before.len(), (m + 1 - 4) + 4 + 1);
        assert_eq!(narrow(&before), 4);
        let after = merge_mfgs(&before, m);
        validate_partition(&dag, &after, m).unwrap();
        assert_eq!(after.len(), (m + 1 - 4) + 1 + 1);
        assert!(siblings_of_largest_parent(&after) < siblings_of_largest_parent(&before));
    }

    #[test]
    fn different_bottoms_do_not_merge() {
        let m = 4;
        let dag = prepare(&gen_mismatched_siblings(m).unwrap());
        let before = partition(&dag, m).unwrap();
        let bottoms: BTreeSet<u32> = before.mfgs[0]
            .children
            .iter()
            .map(|&c| before.mfgs[c].bottom_level)
            .collect();
        assert!(bottoms.len() > 1);
        let after = merge_mfgs(&before, m);
        validate_partition(&dag, &after, m).unwrap();
        let merged_bottoms: BTreeSet<u32> = after.mfgs[0]
            .children
            .iter()
            .map(|&c| after.mfgs[c].bottom_level)
            .collect();
        assert_eq!(merged_bottoms, bottoms);
    }

    #[test]
    fn validator_catches_width_and_closure() {
        let dag = balanced(TREE7);
        let mut p = partition(&dag, 2).unwrap();
        assert!(matches!(
            validate_partition(&dag, &p, 1),
            Err(PartitionViolation::TooWide { .. })
        ));
        p.mfgs[0].nodes_by_level[0].pop();
        assert!(validate_partition(&dag, &p, 2).is_err());
    }

    #[test]
    fn dump_lists_names() {
        let dag = balanced(THREE);
        let p = partition(&dag, 2).unwrap();
        let json = serde_json::to_value(p.dump(&dag)).unwrap();
        assert_eq!(json[0]["roots"], serde_json::json!(["g3"]));
        assert_eq!(json[0]["bottom_level"], 1);
    }
}

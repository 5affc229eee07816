//! MFG ordering, address assignment, snapshot allocation and program emission.
//!
//! Execution model: every address is a wave that enters LPV 0 and advances
//! one LPV per `t_c` cycles, with consecutive addresses one cycle apart. Gate
//! level `l` runs on LPV `(l-1) mod n` during pass `(l-1) / n`. Inside a wave,
//! values move from one LPV to the next through the switch. A value needed by
//! a later wave is parked in a snapshot register of the consuming LPV, and a
//! value crossing a pass boundary goes through the output buffer.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::level::LeveledDag;
use crate::netlist::NodeId;
use crate::partition::{Mfg, MfgId, Partition};
use crate::program::{
    Cell, InputEntry, LpuConfig, Op, OutputEntry, Placement, Program, Reg, Route, Src,
    CIRCULATION_TAG,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecutionOrder {
    pub order: Vec<MfgId>,
    /// For every MFG with children, the child scheduled latest.
    pub most_recent_child: BTreeMap<MfgId, MfgId>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleError {
    #[error("MFG {0} lies on a cycle of parent/child links")]
    CyclicMfgGraph(MfgId),
    #[error(
        "more than 2m values parked at LPV {lpv} (level {level}, pass {pass}) when address \
         {address} runs; MFGs involved: {mfgs:?}"
    )]
    SnapshotOverflow {
        lpv: usize,
        pass: usize,
        level: u32,
        address: usize,
        mfgs: Vec<MfgId>,
    },
    #[error("MFGs {a} and {b} both occupy LPV {lpv} at address {address} in pass {pass}")]
    AddressConflict {
        pass: usize,
        lpv: usize,
        address: usize,
        a: MfgId,
        b: MfgId,
    },
}

impl ScheduleError {
    pub fn kind(&self) -> &'static str {
        match self {
            ScheduleError::CyclicMfgGraph(_) => "CyclicMfgGraph",
            ScheduleError::SnapshotOverflow { .. } => "SnapshotOverflow",
            ScheduleError::AddressConflict { .. } => "AddressConflict",
        }
    }
}

/// Children-before-parents order that keeps few values parked at a time.
///
/// An MFG runs as soon as its last child has run. Otherwise the next target is
/// the started parent with the fewest children still missing, or the next root
/// when nothing is started, and the walk descends through missing children,
/// fewest missing first, until it reaches one that is ready.
pub fn order_mfgs(p: &Partition) -> Result<ExecutionOrder, ScheduleError> {
    check_acyclic(p)?;
    let n = p.mfgs.len();
    let mut remaining: Vec<usize> = p.mfgs.iter().map(|g| g.children.len()).collect();
    let mut done = vec![false; n];
    let mut started: BTreeSet<(usize, MfgId)> = BTreeSet::new();
    let mut order = Vec::with_capacity(n);
    let mut roots: Vec<MfgId> = p.root_mfg_ids.clone();
    roots.sort_unstable();
    let mut fallback = roots.into_iter().chain(0..n);
    loop {
        let mut x = match started.first() {
            Some(&(_, x)) => x,
            None => match fallback.find(|&x| !done[x]) {
                Some(x) => x,
                None => break,
            },
        };
        while remaining[x] > 0 {
            x = p.mfgs[x]
                .children
                .iter()
                .copied()
                .filter(|&c| !done[c])
                .min_by_key(|&c| (remaining[c], c))
                .expect("a parent with missing children has an unscheduled child");
        }
        let mut ready = vec![x];
        while let Some(y) = ready.pop() {
            done[y] = true;
            order.push(y);
            let mut parents = p.mfgs[y].parents.clone();
            parents.sort_unstable();
            for &q in parents.iter().rev() {
                started.remove(&(remaining[q], q));
                remaining[q] -= 1;
                if remaining[q] == 0 {
                    ready.push(q);
                } else {
                    started.insert((remaining[q], q));
                }
            }
        }
    }
    let mut position = vec![0usize; n];
    for (i, &id) in order.iter().enumerate() {
        position[id] = i;
    }
    let most_recent_child = p
        .mfgs
        .iter()
        .filter_map(|g| {
            g.children
                .iter()
                .copied()
                .max_by_key(|&c| position[c])
                .map(|c| (g.id, c))
        })
        .collect();
    Ok(ExecutionOrder {
        order,
        most_recent_child,
    })
}

fn check_acyclic(p: &Partition) -> Result<(), ScheduleError> {
    let mut pending: Vec<usize> = p.mfgs.iter().map(|g| g.children.len()).collect();
    let mut ready: Vec<MfgId> = (0..p.mfgs.len()).filter(|&i| pending[i] == 0).collect();
    let mut seen = 0;
    while let Some(id) = ready.pop() {
        seen += 1;
        for &q in &p.mfgs[id].parents {
            pending[q] -= 1;
            if pending[q] == 0 {
                ready.push(q);
            }
        }
    }
    match (0..p.mfgs.len()).find(|&i| pending[i] > 0) {
        Some(stuck) if seen < p.mfgs.len() => Err(ScheduleError::CyclicMfgGraph(stuck)),
        _ => Ok(()),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Addressing {
    pub address: Vec<usize>,
    /// `direct[c]` is set when `c` shares its only parent's address and feeds
    /// it through the switch instead of parking.
    pub direct: Vec<bool>,
    pub queue_depth: usize,
}

/// Walks the order handing out fresh addresses. With `share`, a parent reuses
/// its most recent child's address when that child ran immediately before it
/// and has no other parent; the child's levels lie strictly below the
/// parent's, so the two never meet on an LPV.
pub fn assign_addresses(order: &ExecutionOrder, p: &Partition, share: bool) -> Addressing {
    let n = p.mfgs.len();
    let mut address = vec![usize::MAX; n];
    let mut direct = vec![false; n];
    let mut next = 0;
    let mut prev: Option<MfgId> = None;
    for &id in &order.order {
        let mrc = order.most_recent_child.get(&id).copied();
        let shared = match (mrc, prev) {
            (Some(c), Some(q)) => share && c == q && p.mfgs[c].parents.len() == 1,
            _ => false,
        };
        if shared {
            let c = mrc.unwrap();
            debug_assert!(p.mfgs[c].top_level < p.mfgs[id].bottom_level);
            address[id] = address[c];
            direct[c] = true;
        } else {
            address[id] = next;
            next += 1;
        }
        prev = Some(id);
    }
    Addressing {
        address,
        direct,
        queue_depth: next,
    }
}

/// One value held in a snapshot register between the producing wave and the
/// last consuming wave.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Park {
    pub child: MfgId,
    pub node: NodeId,
    pub level: u32,
    pub pass: usize,
    pub lpv: usize,
    pub start: usize,
    pub end: usize,
    pub readers: Vec<MfgId>,
    pub lpe: usize,
    pub reg: Reg,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SnapshotPlan {
    pub parks: Vec<Park>,
    index: HashMap<(MfgId, NodeId), usize>,
}

impl SnapshotPlan {
    pub fn lookup(&self, child: MfgId, node: NodeId) -> Option<&Park> {
        self.index.get(&(child, node)).map(|&i| &self.parks[i])
    }

    /// Largest number of simultaneously parked values on any LPV.
    pub fn peak_occupancy(&self) -> usize {
        let mut by_key: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
        for k in &self.parks {
            by_key
                .entry((k.pass, k.lpv))
                .or_default()
                .push((k.start, k.end));
        }
        by_key
            .values()
            .map(|iv| {
                iv.iter()
                    .map(|&(s, _)| iv.iter().filter(|&&(a, b)| a <= s && s <= b).count())
                    .max()
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }
}

/// The child that supplies input `f` of `x`: the direct child when it holds
/// `f`, otherwise the lowest-id child holding `f` at its top level.
fn source_child(p: &Partition, x: &Mfg, f: NodeId, level: u32, addr: &Addressing) -> MfgId {
    let holds = |c: MfgId| p.mfgs[c].top_level == level && p.mfgs[c].contains(f, level);
    let mut kids = x.children.clone();
    kids.sort_unstable();
    kids.iter()
        .copied()
        .find(|&c| is_direct(p, addr, c, x.id) && holds(c))
        .or_else(|| kids.iter().copied().find(|&c| holds(c)))
        .unwrap_or_else(|| panic!("no child of MFG {} produces node {f}", x.id))
}

fn is_direct(p: &Partition, addr: &Addressing, child: MfgId, parent: MfgId) -> bool {
    addr.direct[child] && p.mfgs[child].parents == [parent]
}

/// Assigns a snapshot register to every value a non-direct child hands to a
/// parent in the same pass. Registers are recycled once the last reader has
/// run; more than `2m` live values on one LPV is an overflow.
pub fn allocate_snapshots(
    dag: &LeveledDag,
    p: &Partition,
    addr: &Addressing,
    cfg: &LpuConfig,
) -> Result<SnapshotPlan, ScheduleError> {
    let mut requests: BTreeMap<(MfgId, NodeId), Vec<MfgId>> = BTreeMap::new();
    for x in &p.mfgs {
        let b = x.bottom_level;
        if b <= 1 || cfg.lpv_of(b) == 0 {
            continue;
        }
        for &f in &x.input_nodes {
            debug_assert_eq!(dag.level(f), b - 1);
            let c = source_child(p, x, f, b - 1, addr);
            if !is_direct(p, addr, c, x.id) {
                requests.entry((c, f)).or_default().push(x.id);
            }
        }
    }
    let mut parks: Vec<Park> = requests
        .into_iter()
        .map(|((c, f), readers)| {
            let level = p.mfgs[c].top_level + 1;
            let start = addr.address[c];
            let end = readers.iter().map(|&r| addr.address[r]).max().unwrap();
            debug_assert!(
                start < end,
                "a parked value must be written before it is read"
            );
            Park {
                child: c,
                node: f,
                level,
                pass: cfg.pass_of(level),
                lpv: cfg.lpv_of(level),
                start,
                end,
                readers,
                lpe: 0,
                reg: Reg::A,
            }
        })
        .collect();
    parks.sort_by_key(|k| (k.pass, k.lpv, k.start, k.child, k.node));

    let capacity = 2 * cfg.m;
    let mut i = 0;
    while i < parks.len() {
        let key = (parks[i].pass, parks[i].lpv);
        let mut held: Vec<Option<usize>> = vec![None; capacity];
        while i < parks.len() && (parks[i].pass, parks[i].lpv) == key {
            let start = parks[i].start;
            for slot in held.iter_mut() {
                if slot.is_some_and(|h| parks[h].end < start) {
                    *slot = None;
                }
            }
            let Some(r) = held.iter().position(Option::is_none) else {
                let mut mfgs: Vec<MfgId> = held
                    .iter()
                    .flatten()
                    .flat_map(|&h| std::iter::once(parks[h].child).chain(parks[h].readers.clone()))
                    .chain(std::iter::once(parks[i].child))
                    .collect();
                mfgs.sort_unstable();
                mfgs.dedup();
                return Err(ScheduleError::SnapshotOverflow {
                    lpv: key.1,
                    pass: key.0,
                    level: parks[i].level,
                    address: start,
                    mfgs,
                });
            };
            held[r] = Some(i);
            parks[i].lpe = r / 2;
            parks[i].reg = if r % 2 == 0 { Reg::A } else { Reg::B };
            i += 1;
        }
    }
    let index = parks
        .iter()
        .enumerate()
        .map(|(i, k)| ((k.child, k.node), i))
        .collect();
    Ok(SnapshotPlan { parks, index })
}

struct Emitter<'a> {
    dag: &'a LeveledDag,
    p: &'a Partition,
    cfg: LpuConfig,
    addr: &'a Addressing,
    prog: Program,
}

impl Emitter<'_> {
    fn claim(
        &mut self,
        level: u32,
        address: usize,
        owner: MfgId,
    ) -> Result<&mut Cell, ScheduleError> {
        let (pass, lpv) = (self.cfg.pass_of(level), self.cfg.lpv_of(level));
        let cell = self.prog.cell_mut(pass, lpv, address);
        match cell.mfg {
            Some(other) if other != owner => Err(ScheduleError::AddressConflict {
                pass,
                lpv,
                address,
                a: other,
                b: owner,
            }),
            _ => {
                cell.mfg = Some(owner);
                Ok(cell)
            }
        }
    }

    fn index_in(&self, g: MfgId, level: u32, f: NodeId) -> usize {
        self.p.mfgs[g]
            .nodes_at(level)
            .binary_search(&f)
            .unwrap_or_else(|_| panic!("node {f} is not at level {level} of MFG {g}"))
    }

    /// Output buffer slot recording LPE `lpe` of `g` at `level`.
    fn capture(
        &mut self,
        g: MfgId,
        level: u32,
        lpe: usize,
        net: String,
    ) -> Result<usize, ScheduleError> {
        let address = self.addr.address[g];
        let slot = self.prog.output_buffer_map.len();
        let cell = self.claim(level, address, g)?;
        if let Some(s) = cell.lpe[lpe].capture {
            return Ok(s);
        }
        cell.lpe[lpe].capture = Some(slot);
        self.prog.output_buffer_map.push(OutputEntry {
            slot,
            pass: self.cfg.pass_of(level),
            address,
            lpv: self.cfg.lpv_of(level),
            lpe,
            net,
        });
        Ok(slot)
    }

    fn operand(
        &mut self,
        x: &Mfg,
        level: u32,
        lpe: usize,
        k: usize,
        f: NodeId,
        snaps: &SnapshotPlan,
    ) -> Result<(Src, Option<Route>), ScheduleError> {
        let dag = self.dag;
        if dag.level(f) == 0 {
            let offset = self.prog.input_buffer_map.len();
            self.prog.input_buffer_map.push(InputEntry {
                offset,
                address: self.addr.address[x.id],
                lpe,
                net: dag.netlist().name(f).to_string(),
            });
            return Ok((Src::InputBuf(offset), None));
        }
        let below = level - 1;
        let producer = if level > x.bottom_level {
            x.id
        } else {
            source_child(self.p, x, f, below, self.addr)
        };
        let j = self.index_in(producer, below, f);
        if self.cfg.lpv_of(level) == 0 {
            let net = format!("{CIRCULATION_TAG}{}", dag.netlist().name(f));
            let slot = self.capture(producer, below, j, net)?;
            return Ok((Src::OutputBuf(slot), None));
        }
        let route = if producer == x.id || is_direct(self.p, self.addr, producer, x.id) {
            Route::Prev(j)
        } else {
            let k = snaps
                .lookup(producer, f)
                .expect("every parked input has a register");
            Route::Park(k.lpe, k.reg)
        };
        Ok((Src::Switch(2 * lpe + k), Some(route)))
    }

    fn emit_mfg(&mut self, x: &Mfg, snaps: &SnapshotPlan) -> Result<(), ScheduleError> {
        let address = self.addr.address[x.id];
        for level in x.bottom_level..=x.top_level {
            for (i, &u) in x.nodes_at(level).iter().enumerate() {
                let op = self
                    .dag
                    .netlist()
                    .node(u)
                    .op()
                    .expect("MFG members are gates");
                let fanins = self.dag.fanins(u).to_vec();
                let mut srcs = [Src::Const0, Src::Const0];
                let mut routes = [None, None];
                for (k, &f) in fanins.iter().enumerate() {
                    let (s, r) = self.operand(x, level, i, k, f, snaps)?;
                    srcs[k] = s;
                    routes[k] = r;
                }
                let cell = self.claim(level, address, x.id)?;
                let l = &mut cell.lpe[i];
                l.op = Op(Some(op));
                l.src_a = srcs[0];
                l.src_b = srcs[1];
                for (k, r) in routes.into_iter().enumerate() {
                    if let Some(r) = r {
                        cell.route[2 * i + k] = r;
                    }
                }
            }
        }
        Ok(())
    }

    fn emit_park(&mut self, k: &Park) -> Result<(), ScheduleError> {
        let top = self.p.mfgs[k.child].top_level;
        let j = self.index_in(k.child, top, k.node);
        let cell = self.claim(k.level, k.start, k.child)?;
        let slot = 2 * k.lpe + k.reg.index();
        cell.route[slot] = Route::Prev(j);
        let l = &mut cell.lpe[k.lpe];
        match k.reg {
            Reg::A => {
                l.src_a = Src::Switch(slot);
                l.snap.a = true;
            }
            Reg::B => {
                l.src_b = Src::Switch(slot);
                l.snap.b = true;
            }
        }
        Ok(())
    }
}

/// Lays every MFG, park and capture into the instruction queues.
pub fn emit_program(
    dag: &LeveledDag,
    p: &Partition,
    addr: &Addressing,
    snaps: &SnapshotPlan,
    cfg: &LpuConfig,
) -> Result<Program, ScheduleError> {
    let passes = cfg.passes_for(dag.l_max());
    let mut e = Emitter {
        dag,
        p,
        cfg: *cfg,
        addr,
        prog: Program::empty(*cfg, addr.queue_depth, passes),
    };
    let netlist = dag.netlist();
    e.prog.net_name_table = netlist.nodes().iter().map(|n| n.name.clone()).collect();

    let mut roots_first: Vec<MfgId> = p.root_mfg_ids.clone();
    roots_first.sort_unstable();
    roots_first.extend(0..p.mfgs.len());
    for (&o, &d) in netlist.outputs().iter().zip(dag.po_drivers()) {
        let l = dag.level(d);
        let owner = roots_first
            .iter()
            .copied()
            .find(|&g| p.mfgs[g].contains(d, l))
            .expect("every output driver is covered");
        let j = e.index_in(owner, l, d);
        e.capture(owner, l, j, netlist.name(o).to_string())?;
    }
    for x in &p.mfgs {
        e.emit_mfg(x, snaps)?;
    }
    for k in &snaps.parks {
        e.emit_park(k)?;
    }
    let mut park_level: Vec<Option<u32>> = vec![None; p.mfgs.len()];
    for k in &snaps.parks {
        park_level[k.child] = Some(k.level);
    }
    e.prog.mfgs = p
        .mfgs
        .iter()
        .map(|g| Placement {
            id: g.id,
            address: addr.address[g.id],
            bottom_level: g.bottom_level,
            top_level: g.top_level,
            park_level: park_level[g.id],
            nodes: g
                .nodes_by_level
                .iter()
                .map(|l| l.iter().map(|n| n.0).collect())
                .collect(),
            replica_of: None,
        })
        .collect();
    Ok(e.prog)
}

/// Full scheduling stage: order, address, allocate snapshots, emit.
pub fn schedule(
    dag: &LeveledDag,
    p: &Partition,
    cfg: &LpuConfig,
    share: bool,
) -> Result<Program, ScheduleError> {
    let first = schedule_once(dag, p, cfg, share);
    let Err(ScheduleError::SnapshotOverflow { .. }) = first else {
        return first;
    };
    let plain = 2 * cfg.m;
    for capacity in (plain.div_ceil(2)..=plain).rev() {
        let Some((q, order, source)) = plan_recompute(p, cfg, share, capacity) else {
            break;
        };
        let addr = assign_addresses(&order, &q, share);
        match allocate_snapshots(dag, &q, &addr, cfg) {
            Ok(snaps) => {
                let mut prog = emit_program(dag, &q, &addr, &snaps, cfg)?;
                for g in prog.mfgs.iter_mut().skip(p.len()) {
                    g.replica_of = Some(source[g.id]);
                }
                return Ok(prog);
            }
            Err(ScheduleError::SnapshotOverflow { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    first
}

fn schedule_once(
    dag: &LeveledDag,
    p: &Partition,
    cfg: &LpuConfig,
    share: bool,
) -> Result<Program, ScheduleError> {
    let order = order_mfgs(p)?;
    let addr = assign_addresses(&order, p, share);
    let snaps = allocate_snapshots(dag, p, &addr, cfg)?;
    emit_program(dag, p, &addr, &snaps, cfg)
}

/// Copies allowed per partition MFG before recomputation gives up.
const RECOMPUTE_BUDGET: usize = 8;

/// Memoized depth-first walk that recomputes a child for a later parent when
/// keeping its values parked that long would push some level past `capacity`
/// live values. Copies get ids after the partition's own MFGs; the returned
/// list maps every id to the partition MFG it computes.
pub fn plan_recompute(
    p: &Partition,
    cfg: &LpuConfig,
    share: bool,
    capacity: usize,
) -> Option<(Partition, ExecutionOrder, Vec<MfgId>)> {
    check_acyclic(p).ok()?;
    let mut r = Recompute::new(p, cfg, share, capacity);
    let mut roots = p.root_mfg_ids.clone();
    roots.sort_unstable();
    for x in roots.into_iter().chain(0..p.len()) {
        if r.latest[x].is_none() {
            r.eval(x)?;
        }
    }
    Some(r.finish())
}

const BLOCK: usize = 64;

/// Live parked values per order position on one level, with range updates.
#[derive(Default)]
struct Occupancy {
    vals: Vec<i32>,
    block_max: Vec<i32>,
    lazy: Vec<i32>,
}

impl Occupancy {
    fn grow(&mut self, len: usize) {
        if self.vals.len() < len {
            self.vals.resize(len, 0);
            let blocks = len.div_ceil(BLOCK);
            self.block_max.resize(blocks, 0);
            self.lazy.resize(blocks, 0);
        }
    }

    fn refresh(&mut self, b: usize) {
        let hi = ((b + 1) * BLOCK).min(self.vals.len());
        self.block_max[b] = self.vals[b * BLOCK..hi].iter().copied().max().unwrap_or(0);
    }

    fn add(&mut self, lo: usize, hi: usize, delta: i32) {
        self.grow(hi + 1);
        let (bl, bh) = (lo / BLOCK, hi / BLOCK);
        if bl == bh {
            self.vals[lo..=hi].iter_mut().for_each(|v| *v += delta);
            self.refresh(bl);
            return;
        }
        self.vals[lo..(bl + 1) * BLOCK]
            .iter_mut()
            .for_each(|v| *v += delta);
        self.refresh(bl);
        self.lazy[bl + 1..bh].iter_mut().for_each(|v| *v += delta);
        self.vals[bh * BLOCK..=hi]
            .iter_mut()
            .for_each(|v| *v += delta);
        self.refresh(bh);
    }

    fn max(&self, lo: usize, hi: usize) -> i32 {
        let hi = hi.min(self.vals.len().saturating_sub(1));
        if self.vals.is_empty() || lo > hi {
            return 0;
        }
        let (bl, bh) = (lo / BLOCK, hi / BLOCK);
        let part = |a: usize, b: usize, blk: usize| {
            self.vals[a..=b]
                .iter()
                .map(|v| v + self.lazy[blk])
                .max()
                .unwrap_or(0)
        };
        if bl == bh {
            return part(lo, hi, bl);
        }
        let mut best = part(lo, (bl + 1) * BLOCK - 1, bl).max(part(bh * BLOCK, hi, bh));
        for b in bl + 1..bh {
            best = best.max(self.block_max[b] + self.lazy[b]);
        }
        best
    }
}

type ChildReads = Vec<(MfgId, Vec<NodeId>)>;

struct Recompute<'a> {
    p: &'a Partition,
    share: bool,
    capacity: i32,
    /// Per MFG: values read from each child, or `None` when its bottom level
    /// takes no parked values.
    reads: Vec<Option<ChildReads>>,
    source: Vec<MfgId>,
    kids: Vec<Vec<usize>>,
    readers: Vec<Vec<usize>>,
    pos: Vec<usize>,
    order: Vec<usize>,
    latest: Vec<Option<usize>>,
    /// Instance whose values currently reach their only reader unparked.
    direct_for: Vec<Option<usize>>,
    end: HashMap<(usize, NodeId), usize>,
    occ: HashMap<u32, Occupancy>,
    copies: usize,
}

impl<'a> Recompute<'a> {
    fn new(p: &'a Partition, cfg: &LpuConfig, share: bool, capacity: usize) -> Self {
        let n = p.len();
        let reads = p
            .mfgs
            .iter()
            .map(|x| {
                let b = x.bottom_level;
                if b <= 1 || cfg.lpv_of(b) == 0 {
                    return None;
                }
                let mut by_child: ChildReads =
                    x.children.iter().map(|&c| (c, Vec::new())).collect();
                for &f in &x.input_nodes {
                    if let Some(e) = by_child.iter_mut().find(|(c, _)| {
                        p.mfgs[*c].top_level == b - 1 && p.mfgs[*c].contains(f, b - 1)
                    }) {
                        e.1.push(f);
                    }
                }
                Some(by_child)
            })
            .collect();
        Recompute {
            p,
            share,
            capacity: capacity as i32,
            reads,
            source: (0..n).collect(),
            kids: vec![Vec::new(); n],
            readers: vec![Vec::new(); n],
            pos: vec![0; n],
            order: Vec::with_capacity(n),
            latest: vec![None; n],
            direct_for: vec![None; n],
            end: HashMap::new(),
            occ: HashMap::new(),
            copies: 0,
        }
    }

    fn read_set(&self, x: MfgId, c: MfgId) -> Option<&[NodeId]> {
        let reads = self.reads[x].as_ref()?;
        reads
            .iter()
            .find(|(k, _)| *k == c)
            .map(|(_, f)| f.as_slice())
    }

    /// Marks value `(i, f)` live through position `to` on `level`.
    fn extend(&mut self, i: usize, f: NodeId, level: u32, to: usize, log: &mut Vec<Undo>) {
        let old = self.end.get(&(i, f)).copied();
        let from = old.map_or(self.pos[i], |e| e + 1);
        if from > to {
            return;
        }
        self.occ.entry(level).or_default().add(from, to, 1);
        self.end.insert((i, f), to);
        log.push(Undo {
            i,
            f,
            level,
            from,
            to,
            old,
        });
    }

    fn undo(&mut self, log: Vec<Undo>) {
        for u in log.into_iter().rev() {
            self.occ.get_mut(&u.level).unwrap().add(u.from, u.to, -1);
            match u.old {
                Some(e) => self.end.insert((u.i, u.f), e),
                None => self.end.remove(&(u.i, u.f)),
            };
        }
    }

    /// Keeps instance `i` of child `c` parked until `x` runs, if every level
    /// position it newly covers stays within capacity.
    fn try_reuse(&mut self, x: MfgId, c: MfgId, i: usize, phase: usize) -> bool {
        let Some(nodes) = self.read_set(x, c).map(<[NodeId]>::to_vec) else {
            return true;
        };
        if nodes.is_empty() {
            return true;
        }
        let level = self.p.mfgs[x].bottom_level;
        let mut log = Vec::new();
        if let Some(y) = self.direct_for[i] {
            let earlier = self.read_set(self.source[y], c).unwrap_or(&[]).to_vec();
            for f in earlier {
                self.extend(i, f, level, self.pos[y], &mut log);
            }
        }
        if phase > 0 {
            for &f in &nodes {
                self.extend(i, f, level, phase - 1, &mut log);
            }
        }
        let occ = &self.occ[&level];
        let fits = log.iter().all(|u| occ.max(u.from, u.to) <= self.capacity);
        if fits {
            self.direct_for[i] = None;
        } else {
            self.undo(log);
        }
        fits
    }

    fn instance(&mut self, x: MfgId) -> Option<usize> {
        if self.latest[x].is_none() {
            return Some(x);
        }
        self.copies += 1;
        if self.copies > RECOMPUTE_BUDGET * self.p.len() {
            return None;
        }
        self.source.push(x);
        self.kids.push(Vec::new());
        self.readers.push(Vec::new());
        self.pos.push(0);
        self.direct_for.push(None);
        Some(self.source.len() - 1)
    }

    fn eval(&mut self, x: MfgId) -> Option<usize> {
        let mut children = self.p.mfgs[x].children.clone();
        children.sort_unstable();
        let phase = self.order.len();
        let mut chosen: Vec<Option<usize>> = vec![None; children.len()];
        let mut fresh = Vec::new();
        for (k, &c) in children.iter().enumerate() {
            let cached = self.latest[c];
            match cached {
                Some(i) if self.try_reuse(x, c, i, phase) => chosen[k] = Some(i),
                _ => fresh.push(k),
            }
        }
        // the heaviest reader goes last so its values can skip parking
        fresh.sort_by_key(|&k| (self.read_set(x, children[k]).map_or(0, <[NodeId]>::len), k));
        for k in fresh {
            chosen[k] = Some(self.eval(children[k])?);
        }
        let id = self.instance(x)?;
        self.pos[id] = self.order.len();
        self.order.push(id);
        let kids: Vec<usize> = chosen.into_iter().map(Option::unwrap).collect();
        for &i in &kids {
            self.readers[i].push(id);
        }
        let level = self.p.mfgs[x].bottom_level;
        let prev = self.pos[id].checked_sub(1).map(|q| self.order[q]);
        let mut log = Vec::new();
        for (&c, &i) in children.iter().zip(&kids) {
            let nodes = self.read_set(x, c).unwrap_or(&[]).to_vec();
            if self.share && prev == Some(i) && self.readers[i] == [id] {
                self.direct_for[i] = Some(id);
                continue;
            }
            for f in nodes {
                self.extend(i, f, level, self.pos[id], &mut log);
            }
        }
        self.kids[id] = kids;
        self.latest[x] = Some(id);
        Some(id)
    }

    fn finish(self) -> (Partition, ExecutionOrder, Vec<MfgId>) {
        let mut mfgs: Vec<Mfg> = Vec::with_capacity(self.source.len());
        for (id, &x) in self.source.iter().enumerate() {
            let mut g = self.p.mfgs[x].clone();
            g.id = id;
            g.children = self.kids[id].clone();
            g.parents = self.readers[id].clone();
            mfgs.push(g);
        }
        let q = Partition {
            mfgs,
            root_mfg_ids: self.p.root_mfg_ids.clone(),
        };
        let mut position = vec![0; q.len()];
        for (k, &id) in self.order.iter().enumerate() {
            position[id] = k;
        }
        let most_recent_child = q
            .mfgs
            .iter()
            .filter_map(|g| {
                g.children
                    .iter()
                    .copied()
                    .max_by_key(|&c| position[c])
                    .map(|c| (g.id, c))
            })
            .collect();
        let order = ExecutionOrder {
            order: self.order,
            most_recent_child,
        };
        (q, order, self.source)
    }
}

struct Undo {
    i: usize,
    f: NodeId,
    level: u32,
    from: usize,
    to: usize,
    old: Option<usize>,
}

/// Every (pass, LPV, address) cell claimed by two placements, plus every
/// active cell not covered by its owner's placement.
pub fn find_address_conflicts(prog: &Program) -> Vec<(usize, usize, usize)> {
    let cfg = prog.config;
    let mut owner: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut conflicts = Vec::new();
    for g in &prog.mfgs {
        let levels = (g.bottom_level..=g.top_level).chain(g.park_level);
        for l in levels {
            let key = (cfg.pass_of(l), cfg.lpv_of(l), g.address);
            if owner.insert(key, g.id).is_some_and(|o| o != g.id) {
                conflicts.push(key);
            }
        }
    }
    for (key, cell) in prog.cells() {
        if cell.is_idle() {
            continue;
        }
        if cell.mfg.is_none() || owner.get(&key) != cell.mfg.as_ref() {
            conflicts.push(key);
        }
    }
    conflicts.sort_unstable();
    conflicts.dedup();
    conflicts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::{balance_paths, levelize};
    use crate::netlist::parse_ffcl;
    use crate::partition::{merge_mfgs, partition};

    fn prepared(text: &str, m: usize) -> (LeveledDag, Partition) {
        let dag = balance_paths(&levelize(&parse_ffcl(text).unwrap()));
        let p = merge_mfgs(&partition(&dag, m).unwrap(), m);
        (dag, p)
    }

    fn mfg(id: MfgId, bottom: u32, top: u32, children: &[MfgId], parents: &[MfgId]) -> Mfg {
        Mfg {
            id,
            bottom_level: bottom,
            top_level: top,
            nodes_by_level: (bottom..=top).map(|_| vec![NodeId(id as u32)]).collect(),
            roots: vec![NodeId(id as u32)],
            children: children.to_vec(),
            parents: parents.to_vec(),
            input_nodes: vec![],
        }
    }

    #[test]
    fn chain_orders_bottom_up_and_shares_one_address() {
        // A(5-6) <- B(3-4) <- C(1-2)
        let p = Partition {
            mfgs: vec![
                mfg(0, 5, 6, &[1], &[]),
                mfg(1, 3, 4, &[2], &[0]),
                mfg(2, 1, 2, &[], &[1]),
            ],
            root_mfg_ids: vec![0],
        };
        let o = order_mfgs(&p).unwrap();
        assert_eq!(o.order, [2, 1, 0]);
        assert_eq!(o.most_recent_child[&0], 1);
        assert_eq!(o.most_recent_child[&1], 2);
        let shared = assign_addresses(&o, &p, true);
        assert_eq!(shared.queue_depth, 1);
        assert_eq!(shared.direct, [false, true, true]);
        let separate = assign_addresses(&o, &p, false);
        assert_eq!(separate.queue_depth, 3);
        assert_eq!(separate.address, [2, 1, 0]);
    }

    #[test]
    fn cycle_is_reported() {
        let p = Partition {
            mfgs: vec![mfg(0, 3, 3, &[1], &[1]), mfg(1, 1, 2, &[0], &[0])],
            root_mfg_ids: vec![0],
        };
        assert!(matches!(
            order_mfgs(&p),
            Err(ScheduleError::CyclicMfgGraph(_))
        ));
    }

    #[test]
    fn siblings_with_two_parents_do_not_share() {
        // 0 and 1 are roots that both consume 2; 3 feeds only 1
        let p = Partition {
            mfgs: vec![
                mfg(0, 3, 3, &[2], &[]),
                mfg(1, 3, 3, &[2, 3], &[]),
                mfg(2, 1, 2, &[], &[0, 1]),
                mfg(3, 1, 2, &[], &[1]),
            ],
            root_mfg_ids: vec![0, 1],
        };
        let o = order_mfgs(&p).unwrap();
        assert_eq!(o.order, [2, 0, 3, 1]);
        let a = assign_addresses(&o, &p, true);
        assert_eq!(a.queue_depth, 3);
        assert_eq!(a.address[1], a.address[3]);
        assert!(!a.direct[2]);
    }

    #[test]
    fn single_gate_program() {
        let (dag, p) = prepared("input a b\noutput y\ngate y AND a b", 2);
        let prog = schedule(
            &dag,
            &p,
            &LpuConfig {
                m: 2,
                n: 16,
                t_sw: 5,
            },
            true,
        )
        .unwrap();
        assert_eq!((prog.queue_depth, prog.passes), (1, 1));
        assert_eq!(prog.compute_cell_count(), 1);
        assert_eq!(prog.input_buffer_map.len(), 2);
        assert_eq!(prog.output_buffer_map[0].net, "y");
        assert!(find_address_conflicts(&prog).is_empty());
    }

    #[test]
    fn three_gate_example_fits_one_address() {
        let text = "input a b c d\noutput g3\ngate g1 AND a b\ngate g2 OR c d\ngate g3 XOR g1 g2\n";
        let (dag, p) = prepared(text, 2);
        assert_eq!(p.len(), 1);
        let prog = schedule(
            &dag,
            &p,
            &LpuConfig {
                m: 2,
                n: 16,
                t_sw: 5,
            },
            true,
        )
        .unwrap();
        assert_eq!(prog.queue_depth, 1);
        let top = prog.cell(0, 1, 0);
        assert_eq!(top.lpe[0].op, Op(Some(crate::netlist::GateOp::Xor)));
        assert_eq!(top.route[0], Route::Prev(0));
        assert_eq!(top.route[1], Route::Prev(1));
    }

    #[test]
    fn seven_gate_tree_parks_non_direct_children() {
        let text = "input a b c d e f g h\noutput r\n\
            gate l1 AND a b\ngate l2 AND c d\ngate l3 AND e f\ngate l4 AND g h\n\
            gate m1 AND l1 l2\ngate m2 AND l3 l4\ngate r AND m1 m2\n";
        let dag = balance_paths(&levelize(&parse_ffcl(text).unwrap()));
        let p = partition(&dag, 2).unwrap();
        let cfg = LpuConfig {
            m: 2,
            n: 16,
            t_sw: 5,
        };
        let o = order_mfgs(&p).unwrap();
        let a = assign_addresses(&o, &p, true);
        let s = allocate_snapshots(&dag, &p, &a, &cfg).unwrap();
        // four leaf children, one of them direct
        assert_eq!(s.parks.len(), 3);
        assert!(s.parks.iter().all(|k| k.lpv == 1 && k.readers == [0]));
        assert!(s.peak_occupancy() <= 2 * cfg.m);
        let prog = emit_program(&dag, &p, &a, &s, &cfg).unwrap();
        assert!(find_address_conflicts(&prog).is_empty());
        assert_eq!(prog.queue_depth, 4);
    }

    #[test]
    fn deep_chain_needs_three_passes() {
        let mut text = String::from("input a\noutput g12\ngate g1 NOT a\n");
        for i in 2..=12 {
            text.push_str(&format!("gate g{i} NOT g{}\n", i - 1));
        }
        let (dag, p) = prepared(&text, 1);
        let prog = schedule(
            &dag,
            &p,
            &LpuConfig {
                m: 1,
                n: 4,
                t_sw: 5,
            },
            true,
        )
        .unwrap();
        assert_eq!(prog.passes, 3);
        let circ = prog
            .output_buffer_map
            .iter()
            .filter(|e| !e.is_output())
            .count();
        assert_eq!(circ, 2);
    }

    #[test]
    fn overflow_is_reported() {
        // p, q and r are each shared by two parents, so all three are parked
        // at once on an LPV that only has 2m = 2 registers
        let m = 1;
        let text = "input a b c d e f\noutput y\n\
            gate p AND a b\ngate q AND c d\ngate r AND e f\n\
            gate s AND p q\ngate t AND q r\ngate u AND r p\n\
            gate v AND s t\ngate w BUF u\ngate y AND v w\n";
        let dag = balance_paths(&levelize(&parse_ffcl(text).unwrap()));
        let p = partition(&dag, m).unwrap();
        let cfg = LpuConfig { m, n: 8, t_sw: 5 };
        let o = order_mfgs(&p).unwrap();
        let a = assign_addresses(&o, &p, false);
        let err = allocate_snapshots(&dag, &p, &a, &cfg).unwrap_err();
        assert!(
            matches!(err, ScheduleError::SnapshotOverflow { .. }),
            "{err}"
        );
    }

    #[test]
    fn recomputation_fits_what_parking_cannot() {
        let text = "input a b c d e f\noutput y\n\
            gate p AND a b\ngate q AND c d\ngate r AND e f\n\
            gate s AND p q\ngate t AND q r\ngate u AND r p\n\
            gate v AND s t\ngate w BUF u\ngate y AND v w\n";
        let netlist = parse_ffcl(text).unwrap();
        let dag = balance_paths(&levelize(&netlist));
        let p = partition(&dag, 1).unwrap();
        let cfg = LpuConfig {
            m: 1,
            n: 8,
            t_sw: 5,
        };
        let prog = schedule(&dag, &p, &cfg, false).unwrap();
        assert!(prog.mfgs.len() > p.len());
        assert!(prog.mfgs[p.len()..].iter().all(|g| g.replica_of.is_some()));
        assert!(crate::pipeline::check_program(&netlist, &prog, 4, 9).passed());
    }

    #[test]
    fn occupancy_matches_brute_force() {
        let mut occ = Occupancy::default();
        let mut plain = vec![0i32; 300];
        let ranges = [
            (0, 299, 1),
            (5, 70, 2),
            (64, 64, 1),
            (100, 250, -1),
            (127, 128, 3),
            (200, 210, 1),
        ];
        for &(lo, hi, d) in &ranges {
            occ.add(lo, hi, d);
            plain[lo..=hi].iter_mut().for_each(|v| *v += d);
            for (a, b) in [
                (0, 299),
                (3, 65),
                (64, 127),
                (128, 128),
                (120, 260),
                (250, 299),
            ] {
                assert_eq!(
                    occ.max(a, b),
                    *plain[a..=b].iter().max().unwrap(),
                    "{a}..{b}"
                );
            }
        }
    }
}

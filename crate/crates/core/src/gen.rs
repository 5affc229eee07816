//! Seeded synthetic netlist generators.
//!
//! Each profile stresses one compiler path: `wide-shallow` the width issue,
//! `deep-narrow` circulation, `sibling-family` and `chain-family` merging and
//! address sharing. Layered profiles draw fanins from a small window of the
//! previous layer, which mimics the locality of convolutional FFCL blocks.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::netlist::{GateOp, Loc, Netlist, RawGate, RawNetlist};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WidthProfile {
    Uniform,
    FaninTree,
    WideShallow { width: usize },
    DeepNarrow { width: usize },
    SiblingFamily { k: usize, w: usize, m: usize },
    ChainFamily { stages: usize, m: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub seed: u64,
    pub gate_count: usize,
    pub max_fanin_depth: usize,
    pub width_profile: WidthProfile,
    pub pi_count: usize,
    /// Extra internal nets exposed as outputs on top of every sink gate.
    pub po_count: usize,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            seed: 1,
            gate_count: 100,
            max_fanin_depth: 8,
            width_profile: WidthProfile::Uniform,
            pi_count: 16,
            po_count: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("infeasible generator spec: {0}")]
pub struct InfeasibleSpec(pub String);

const MISO: [GateOp; 6] = [
    GateOp::And,
    GateOp::Or,
    GateOp::Xor,
    GateOp::Xnor,
    GateOp::Nand,
    GateOp::Nor,
];

/// Probability that a gate's second fanin reaches two or three layers back.
const SKIP_PROBABILITY: f64 = 0.08;
/// Half-width of the fanin window in the previous layer.
const WINDOW: usize = 2;
/// Draws per gate before a constant or duplicate function is accepted.
const ATTEMPTS: usize = 12;

/// Values of a net under 256 random input patterns.
type Signature = [u64; 4];

struct Builder {
    rng: ChaCha8Rng,
    sig_rng: ChaCha8Rng,
    names: Vec<String>,
    raw: RawNetlist,
    has_fanout: Vec<bool>,
    sigs: Vec<Signature>,
    seen: HashSet<Signature>,
}

impl Builder {
    fn new(seed: u64) -> Self {
        Builder {
            rng: ChaCha8Rng::seed_from_u64(seed),
            sig_rng: ChaCha8Rng::seed_from_u64(!seed),
            names: Vec::new(),
            raw: RawNetlist::default(),
            has_fanout: Vec::new(),
            sigs: Vec::new(),
            seen: HashSet::new(),
        }
    }

    fn pi(&mut self) -> usize {
        let name = format!("x{}", self.raw.inputs.len());
        self.raw.inputs.push((name.clone(), Loc::default()));
        let sig = self.sig_rng.gen();
        self.push_name(name, sig)
    }

    fn push_name(&mut self, name: String, sig: Signature) -> usize {
        self.names.push(name);
        self.has_fanout.push(false);
        self.sigs.push(sig);
        self.seen.insert(sig);
        self.seen.insert(sig.map(|w| !w));
        self.names.len() - 1
    }

    fn signature(&self, op: GateOp, fanins: &[usize]) -> Signature {
        let a = self.sigs[fanins[0]];
        let b = self.sigs[*fanins.last().unwrap()];
        std::array::from_fn(|i| op.eval(a[i], b[i]))
    }

    /// Whether a gate would compute a new, non-constant function of the
    /// inputs. Buffers and inverters only need a non-constant fanin.
    fn is_fresh(&self, op: GateOp, fanins: &[usize]) -> bool {
        let sig = self.signature(op, fanins);
        let constant = sig == [0; 4] || sig == [!0; 4];
        !constant && (op.is_siso() || !self.seen.contains(&sig))
    }

    fn gate(&mut self, op: GateOp, fanins: &[usize]) -> usize {
        let name = format!("g{}", self.raw.gates.len());
        let sig = self.signature(op, fanins);
        for &f in fanins {
            self.has_fanout[f] = true;
        }
        self.raw.gates.push(RawGate {
            output: name.clone(),
            op,
            fanins: fanins.iter().map(|&f| self.names[f].clone()).collect(),
            loc: Loc::default(),
        });
        self.push_name(name, sig)
    }

    fn random_miso(&mut self) -> GateOp {
        *MISO.choose(&mut self.rng).unwrap()
    }

    fn random_siso(&mut self) -> GateOp {
        if self.rng.gen_bool(0.5) {
            GateOp::Not
        } else {
            GateOp::Buf
        }
    }

    /// Gate over one or two fanins, MISO when they differ.
    fn combine(&mut self, a: usize, b: usize) -> usize {
        if a == b {
            let op = self.random_siso();
            self.gate(op, &[a])
        } else {
            let mut op = self.random_miso();
            for _ in 1..ATTEMPTS {
                if self.is_fresh(op, &[a, b]) {
                    break;
                }
                op = self.random_miso();
            }
            self.gate(op, &[a, b])
        }
    }

    /// Marks every sink gate as an output, then `extra` random internal nets.
    fn finish(mut self, extra: usize) -> Netlist {
        let gate_ids: Vec<usize> = (self.raw.inputs.len()..self.names.len()).collect();
        let mut outs: Vec<usize> = gate_ids
            .iter()
            .copied()
            .filter(|&g| !self.has_fanout[g])
            .collect();
        let mut internal: Vec<usize> = gate_ids
            .iter()
            .copied()
            .filter(|&g| self.has_fanout[g])
            .collect();
        internal.shuffle(&mut self.rng);
        outs.extend(internal.into_iter().take(extra));
        outs.sort_unstable();
        self.raw.outputs = outs
            .into_iter()
            .map(|g| (self.names[g].clone(), Loc::default()))
            .collect();
        self.raw.build().expect("generator emits valid netlists")
    }
}

/// Generates a netlist for `spec`. Identical specs give identical netlists.
pub fn gen_random_dag(spec: &GenSpec) -> Result<Netlist, InfeasibleSpec> {
    match &spec.width_profile {
        WidthProfile::SiblingFamily { k, w, m } => {
            return gen_sibling_family_seeded(spec.seed, *k, *w, *m, false)
        }
        WidthProfile::ChainFamily { stages, m } => return gen_chain_family(spec.seed, *stages, *m),
        _ => {}
    }
    if spec.pi_count == 0 {
        return Err(InfeasibleSpec(
            "at least one primary input is required".into(),
        ));
    }
    if spec.gate_count == 0 {
        return Err(InfeasibleSpec("gate_count must be positive".into()));
    }
    if spec.max_fanin_depth == 0 {
        return Err(InfeasibleSpec("max_fanin_depth must be positive".into()));
    }
    let widths: Vec<usize> = match spec.width_profile {
        WidthProfile::Uniform => {
            let depth = spec.max_fanin_depth.min(spec.gate_count);
            split_evenly(spec.gate_count, depth)
        }
        WidthProfile::WideShallow { width } | WidthProfile::DeepNarrow { width } if width == 0 => {
            return Err(InfeasibleSpec("width must be positive".into()))
        }
        WidthProfile::WideShallow { width } => {
            let depth = spec
                .gate_count
                .div_ceil(width)
                .clamp(1, spec.max_fanin_depth);
            split_evenly(spec.gate_count.max(depth), depth)
        }
        WidthProfile::DeepNarrow { width } => vec![width; spec.max_fanin_depth],
        WidthProfile::FaninTree => return Ok(fanin_tree(spec)),
        WidthProfile::SiblingFamily { .. } | WidthProfile::ChainFamily { .. } => unreachable!(),
    };
    Ok(layered(spec, &widths))
}

fn split_evenly(total: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|i| total / parts + usize::from(i < total % parts))
        .collect()
}

fn layered(spec: &GenSpec, widths: &[usize]) -> Netlist {
    let mut b = Builder::new(spec.seed);
    let pis: Vec<usize> = (0..spec.pi_count).map(|_| b.pi()).collect();
    let mut layers: Vec<Vec<usize>> = vec![pis];
    for &width in widths {
        let prev = layers.last().unwrap().clone();
        let mut layer = Vec::with_capacity(width);
        for j in 0..width {
            // anchor spreads the layer evenly over the previous one
            let anchor = j * prev.len() / width.max(1);
            let primary = prev[anchor];
            let depth = layers.len();
            let mut attempt = 1;
            loop {
                let (op, fanins) = if b.rng.gen_bool(0.1) {
                    (b.random_siso(), vec![primary])
                } else {
                    let second = if depth >= 3 && b.rng.gen_bool(SKIP_PROBABILITY) {
                        let back = b.rng.gen_range(2..=3.min(depth - 1));
                        let src = &layers[depth - back];
                        let idx = (anchor * src.len() / prev.len().max(1)).min(src.len() - 1);
                        src[idx]
                    } else {
                        let lo = anchor.saturating_sub(WINDOW);
                        let hi = (anchor + WINDOW).min(prev.len() - 1);
                        prev[b.rng.gen_range(lo..=hi)]
                    };
                    if second == primary {
                        (b.random_siso(), vec![primary])
                    } else {
                        (b.random_miso(), vec![primary, second])
                    }
                };
                if attempt == ATTEMPTS || b.is_fresh(op, &fanins) {
                    layer.push(b.gate(op, &fanins));
                    break;
                }
                attempt += 1;
            }
        }
        layers.push(layer);
    }
    b.finish(spec.po_count)
}

fn fanin_tree(spec: &GenSpec) -> Netlist {
    let mut b = Builder::new(spec.seed);
    let pis: Vec<usize> = (0..spec.pi_count).map(|_| b.pi()).collect();
    let mut remaining = spec.gate_count;
    while remaining > 0 {
        // one reduction tree per round over a random subset of the inputs
        let leaves = (remaining + 1).min(pis.len()).max(2);
        let mut level: Vec<usize> = pis.choose_multiple(&mut b.rng, leaves).copied().collect();
        while level.len() < leaves {
            level.push(pis[0]);
        }
        while level.len() > 1 && remaining > 0 {
            let mut next = Vec::with_capacity(level.len().div_ceil(2));
            for pair in level.chunks(2) {
                if remaining == 0 {
                    break;
                }
                next.push(b.combine(pair[0], *pair.get(1).unwrap_or(&pair[0])));
                remaining -= 1;
            }
            level = next;
        }
    }
    b.finish(spec.po_count)
}

fn ceil_log2(x: usize) -> usize {
    (usize::BITS - x.saturating_sub(1).leading_zeros()) as usize
}

/// Builds a cone rooted at a single node whose level `t` below the root
/// (`t = 1..height`) has `widths[t - 1]` nodes. Level-1 nodes read `pis`.
/// Returns the root.
fn cone(b: &mut Builder, widths_bottom_up: &[usize], pis: &[usize], offset: usize) -> usize {
    let mut prev: Vec<usize> = (0..widths_bottom_up[0].max(1) * 2)
        .map(|i| pis[(offset + i) % pis.len()])
        .collect();
    let mut first = true;
    for &w in widths_bottom_up {
        let mut layer = Vec::with_capacity(w);
        for j in 0..w {
            let (x, y) = if first {
                (prev[2 * j], prev[2 * j + 1])
            } else {
                (prev[(2 * j) % prev.len()], prev[(2 * j + 1) % prev.len()])
            };
            layer.push(b.combine(x, y));
        }
        first = false;
        prev = layer;
    }
    debug_assert_eq!(prev.len(), 1);
    prev[0]
}

/// Bottom-up widths of the `height` levels below a root when the cone doubles
/// per level, capped at `cap`.
fn doubling_below(height: usize, cap: usize) -> Vec<usize> {
    (1..=height)
        .rev()
        .map(|t| (1usize << t.min(40)).min(cap))
        .collect()
}

/// Bottom-up widths of the `height` levels below a sibling root: one more node
/// per level going down, capped at `w`.
fn sibling_below(height: usize, w: usize) -> Vec<usize> {
    (1..=height).rev().map(|t| (t + 1).min(w)).collect()
}

/// A parent cone fed by `k` sibling cones of per-level width at most `w`, plus
/// filler cones that make the parent's input level wider than `m` and that can
/// never merge with anything. All siblings share bottom level 1.
pub fn gen_sibling_family(k: usize, w: usize, m: usize) -> Result<Netlist, InfeasibleSpec> {
    gen_sibling_family_seeded(1, k, w, m, false)
}

/// Two siblings whose bottom levels differ: the second sibling's cone has a
/// level of `m + 1` gates, so its own MFG stops above it.
pub fn gen_mismatched_siblings(m: usize) -> Result<Netlist, InfeasibleSpec> {
    gen_sibling_family_seeded(1, 2, 1, m, true)
}

fn family_height(m: usize) -> usize {
    (ceil_log2(m + 1) + 1).max(2)
}

fn gen_sibling_family_seeded(
    seed: u64,
    k: usize,
    w: usize,
    m: usize,
    mismatched: bool,
) -> Result<Netlist, InfeasibleSpec> {
    if k < 2 {
        return Err(InfeasibleSpec("sibling family needs k >= 2".into()));
    }
    if m == 0 || w == 0 || w > m {
        return Err(InfeasibleSpec(format!(
            "sibling width w={w} must be in 1..=m (m={m})"
        )));
    }
    let mut b = Builder::new(seed);
    let height = family_height(m);
    let pis: Vec<usize> = (0..2 * m + 2).map(|_| b.pi()).collect();
    let mut inputs = Vec::new();
    for i in 0..k {
        let below = if mismatched && i == 1 {
            let mut v = doubling_below(height - 2, m);
            v.insert(0, m + 1);
            v
        } else {
            sibling_below(height - 1, w)
        };
        inputs.push(cone(&mut b, &with_root(below), &pis, i));
    }
    let fillers = (m + 1).saturating_sub(k);
    for f in 0..fillers {
        let below = doubling_below(height - 1, m);
        inputs.push(cone(&mut b, &with_root(below), &pis, k + f));
    }
    reduce(&mut b, inputs);
    Ok(b.finish(0))
}

fn with_root(mut below: Vec<usize>) -> Vec<usize> {
    below.push(1);
    below
}

/// Pairwise reduction tree down to a single root.
fn reduce(b: &mut Builder, mut level: Vec<usize>) -> usize {
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|p| b.combine(p[0], *p.get(1).unwrap_or(&p[0])))
            .collect();
    }
    level[0]
}

/// A spine of `stages` parent cones. Stage `s` reads the root of stage `s - 1`
/// plus `m` unmergeable filler cones of the same height, so every stage is a
/// separate MFG whose children include the previous stage.
pub fn gen_chain_family(seed: u64, stages: usize, m: usize) -> Result<Netlist, InfeasibleSpec> {
    if stages == 0 || m == 0 {
        return Err(InfeasibleSpec(
            "chain family needs stages >= 1 and m >= 1".into(),
        ));
    }
    let mut b = Builder::new(seed);
    let pis: Vec<usize> = (0..2 * m + 2).map(|_| b.pi()).collect();
    let base = family_height(m);
    let mut spine = cone(&mut b, &with_root(sibling_below(base - 1, 1)), &pis, 0);
    let mut height = base;
    for s in 0..stages {
        let mut inputs = vec![spine];
        for f in 0..m {
            let below = doubling_below(height - 1, m);
            inputs.push(cone(&mut b, &with_root(below), &pis, s + f + 1));
        }
        spine = reduce(&mut b, inputs);
        height += ceil_log2(m + 1);
    }
    Ok(b.finish(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::{balance_paths, levelize};
    use crate::netlist::emit_ffcl;

    #[test]
    fn deterministic_in_seed() {
        let spec = GenSpec {
            seed: 1,
            gate_count: 100,
            ..GenSpec::default()
        };
        let a = emit_ffcl(&gen_random_dag(&spec).unwrap());
        let b = emit_ffcl(&gen_random_dag(&spec).unwrap());
        assert_eq!(a, b);
        let other = GenSpec { seed: 2, ..spec };
        assert_ne!(a, emit_ffcl(&gen_random_dag(&other).unwrap()));
    }

    #[test]
    fn wide_shallow_exceeds_width() {
        let m = 4;
        let spec = GenSpec {
            gate_count: 64,
            max_fanin_depth: 4,
            width_profile: WidthProfile::WideShallow { width: 4 * m },
            pi_count: 32,
            ..GenSpec::default()
        };
        let dag = balance_paths(&levelize(&gen_random_dag(&spec).unwrap()));
        assert!((1..=dag.l_max()).any(|l| dag.node_set(l).len() > m));
    }

    #[test]
    fn deep_narrow_reaches_depth() {
        let n = 4;
        let spec = GenSpec {
            max_fanin_depth: 3 * n,
            width_profile: WidthProfile::DeepNarrow { width: 2 },
            pi_count: 4,
            ..GenSpec::default()
        };
        let dag = levelize(&gen_random_dag(&spec).unwrap());
        assert_eq!(dag.l_max() as usize, 3 * n);
    }

    #[test]
    fn infeasible_specs() {
        let spec = GenSpec {
            pi_count: 0,
            ..GenSpec::default()
        };
        assert!(gen_random_dag(&spec).is_err());
        assert!(gen_sibling_family(1, 1, 4).is_err());
        assert!(gen_sibling_family(2, 5, 4).is_err());
        assert!(gen_chain_family(0, 0, 4).is_err());
    }

    #[test]
    fn fanin_tree_has_requested_gates() {
        let spec = GenSpec {
            gate_count: 40,
            width_profile: WidthProfile::FaninTree,
            pi_count: 8,
            ..GenSpec::default()
        };
        assert_eq!(gen_random_dag(&spec).unwrap().num_gates(), 40);
    }
}

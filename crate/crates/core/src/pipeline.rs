//! End-to-end compile and oracle check, plus single-field program mutations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::level::{balance_paths, levelize, LeveledDag};
use crate::netlist::{GateOp, Netlist};
use crate::oracle::{eval_dag, Assignment};
use crate::partition::{merge_mfgs, partition, Partition, PartitionError};
use crate::program::{ConfigError, LpuConfig, Op, Program, Reg, Route};
use crate::schedule::{schedule, ScheduleError};
use crate::sim::{run, SimError};
use crate::word::BatchWord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CompileOptions {
    pub merge: bool,
    pub share: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            merge: true,
            share: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Compiled {
    pub dag: LeveledDag,
    pub unmerged_count: usize,
    pub partition: Partition,
    pub program: Program,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

impl CompileError {
    pub fn kind(&self) -> &'static str {
        match self {
            CompileError::Config(_) => "ConfigError",
            CompileError::Partition(PartitionError::WidthOverflow { .. }) => "WidthOverflow",
            CompileError::Partition(PartitionError::BottomMismatch { .. }) => "BottomMismatch",
            CompileError::Schedule(e) => e.kind(),
        }
    }
}

pub fn compile(
    netlist: &Netlist,
    cfg: &LpuConfig,
    opts: CompileOptions,
) -> Result<Compiled, CompileError> {
    cfg.validate()?;
    let dag = balance_paths(&levelize(netlist));
    let unmerged = partition(&dag, cfg.m)?;
    let unmerged_count = unmerged.len();
    let partition = if opts.merge {
        merge_mfgs(&unmerged, cfg.m)
    } else {
        unmerged
    };
    let program = schedule(&dag, &partition, cfg, opts.share)?;
    Ok(Compiled {
        dag,
        unmerged_count,
        partition,
        program,
    })
}

/// Random input batches for `trials` runs, reproducible from `seed`.
pub fn random_batches(
    netlist: &Netlist,
    width: usize,
    trials: usize,
    seed: u64,
) -> Vec<Assignment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| {
            netlist
                .inputs()
                .map(|i| {
                    (
                        netlist.name(i).to_string(),
                        BatchWord::random(width, &mut rng),
                    )
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CheckOutcome {
    Pass {
        trials: usize,
    },
    Mismatch {
        trial: usize,
        net: String,
        expected: String,
        found: String,
    },
    SimFailure {
        trial: usize,
        kind: String,
        message: String,
    },
    CompileFailure {
        kind: String,
        message: String,
    },
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, CheckOutcome::Pass { .. })
    }
}

/// Runs `program` on random batches and compares every output to the oracle.
pub fn check_program(
    netlist: &Netlist,
    program: &Program,
    trials: usize,
    seed: u64,
) -> CheckOutcome {
    let batches = random_batches(netlist, program.config.width(), trials, seed);
    for (trial, inputs) in batches.iter().enumerate() {
        let expected = eval_dag(netlist, inputs).expect("generated inputs bind every input");
        let found = match run(program, inputs) {
            Ok((out, _)) => out,
            Err(e) => {
                return CheckOutcome::SimFailure {
                    trial,
                    kind: e.kind().to_string(),
                    message: e.to_string(),
                }
            }
        };
        for &o in netlist.outputs() {
            let name = netlist.name(o);
            let want = &expected[name];
            match found.get(name) {
                Some(got) if got == want => {}
                other => {
                    return CheckOutcome::Mismatch {
                        trial,
                        net: name.to_string(),
                        expected: want.to_hex(),
                        found: other.map_or_else(|| "missing".to_string(), BatchWord::to_hex),
                    }
                }
            }
        }
    }
    CheckOutcome::Pass { trials }
}

/// Compiles `netlist` and checks the program; a compile error is a failure.
pub fn check_netlist(
    netlist: &Netlist,
    cfg: &LpuConfig,
    opts: CompileOptions,
    trials: usize,
    seed: u64,
) -> CheckOutcome {
    match compile(netlist, cfg, opts) {
        Ok(c) => check_program(netlist, &c.program, trials, seed),
        Err(e) => CheckOutcome::CompileFailure {
            kind: e.kind().to_string(),
            message: e.to_string(),
        },
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mutation {
    Opcode {
        pass: usize,
        lpv: usize,
        address: usize,
        lpe: usize,
        to: String,
    },
    Route {
        pass: usize,
        lpv: usize,
        address: usize,
        slot: usize,
        to: String,
    },
    Snapshot {
        pass: usize,
        lpv: usize,
        address: usize,
        lpe: usize,
        reg: Reg,
    },
}

fn complement(op: GateOp) -> GateOp {
    use GateOp::*;
    match op {
        And => Nand,
        Nand => And,
        Or => Nor,
        Nor => Or,
        Xor => Xnor,
        Xnor => Xor,
        Buf => Not,
        Not => Buf,
    }
}

/// Every single-field mutation: complement each used opcode, retarget each
/// `Prev` route to the next LPE, and clear each set snapshot flag.
pub fn enumerate_mutations(prog: &Program) -> Vec<Mutation> {
    let m = prog.config.m;
    let mut out = Vec::new();
    for ((pass, lpv, address), cell) in prog.cells() {
        for (lpe, l) in cell.lpe.iter().enumerate() {
            if let Some(op) = l.op.0 {
                out.push(Mutation::Opcode {
                    pass,
                    lpv,
                    address,
                    lpe,
                    to: complement(op).name().to_string(),
                });
            }
        }
        for (slot, r) in cell.route.iter().enumerate() {
            if let Route::Prev(j) = *r {
                if m > 1 {
                    out.push(Mutation::Route {
                        pass,
                        lpv,
                        address,
                        slot,
                        to: Route::Prev((j + 1) % m).to_string(),
                    });
                }
            }
        }
        for (lpe, l) in cell.lpe.iter().enumerate() {
            for (set, reg) in [(l.snap.a, Reg::A), (l.snap.b, Reg::B)] {
                if set {
                    out.push(Mutation::Snapshot {
                        pass,
                        lpv,
                        address,
                        lpe,
                        reg,
                    });
                }
            }
        }
    }
    out
}

pub fn apply_mutation(prog: &mut Program, mutation: &Mutation) {
    match mutation {
        Mutation::Opcode {
            pass,
            lpv,
            address,
            lpe,
            to,
        } => {
            prog.cell_mut(*pass, *lpv, *address).lpe[*lpe].op =
                to.parse::<Op>().expect("valid opcode");
        }
        Mutation::Route {
            pass,
            lpv,
            address,
            slot,
            to,
        } => {
            prog.cell_mut(*pass, *lpv, *address).route[*slot] = to.parse().expect("valid route");
        }
        Mutation::Snapshot {
            pass,
            lpv,
            address,
            lpe,
            reg,
        } => {
            let snap = &mut prog.cell_mut(*pass, *lpv, *address).lpe[*lpe].snap;
            match reg {
                Reg::A => snap.a = false,
                Reg::B => snap.b = false,
            }
        }
    }
}

/// Whether a simulator error is the loud failure a mutated program should hit.
pub fn is_detection(e: &SimError) -> bool {
    matches!(
        e,
        SimError::UninitializedRead { .. } | SimError::OutputNotWritten(_)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_ffcl;

    const TREE: &str = "input a b c d e f g h\noutput r\n\
        gate l1 AND a b\ngate l2 XOR c d\ngate l3 OR e f\ngate l4 NAND g h\n\
        gate m1 NOR l1 l2\ngate m2 XNOR l3 l4\ngate r AND m1 m2\n";

    #[test]
    fn check_passes_and_zero_trials_is_vacuous() {
        let n = parse_ffcl(TREE).unwrap();
        let cfg = LpuConfig {
            m: 2,
            n: 2,
            t_sw: 1,
        };
        let c = compile(&n, &cfg, CompileOptions::default()).unwrap();
        assert_eq!(
            check_program(&n, &c.program, 4, 1),
            CheckOutcome::Pass { trials: 4 }
        );
        assert_eq!(
            check_program(&n, &c.program, 0, 1),
            CheckOutcome::Pass { trials: 0 }
        );
    }

    #[test]
    fn every_mutation_of_the_tree_is_caught() {
        let n = parse_ffcl(TREE).unwrap();
        let cfg = LpuConfig {
            m: 2,
            n: 16,
            t_sw: 5,
        };
        let c = compile(&n, &cfg, CompileOptions::default()).unwrap();
        let muts = enumerate_mutations(&c.program);
        assert!(muts.iter().any(|m| matches!(m, Mutation::Snapshot { .. })));
        for mu in &muts {
            let mut p = c.program.clone();
            apply_mutation(&mut p, mu);
            assert!(!check_program(&n, &p, 4, 3).passed(), "{mu:?} survived");
        }
    }
}

//! Reference evaluation: the single source of functional truth.

use std::collections::HashMap;

use crate::level::LeveledDag;
use crate::netlist::{Netlist, NodeId};
use crate::word::BatchWord;

/// Net name to packed batch value.
pub type Assignment = HashMap<String, BatchWord>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("missing value for primary input `{0}`")]
    MissingInput(String),
    #[error("input `{name}` has width {found}, expected {expected}")]
    WidthMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
}

/// Evaluates every node in topological order and returns the primary outputs.
pub fn eval_dag(netlist: &Netlist, inputs: &Assignment) -> Result<Assignment, OracleError> {
    let values = eval_all(netlist, inputs)?;
    Ok(netlist
        .outputs()
        .iter()
        .map(|&o| (netlist.name(o).to_string(), values[o.index()].clone()))
        .collect())
}

/// Like [`eval_dag`] but reads outputs through the dag's output drivers, which
/// differ from the netlist's output nets once outputs have been padded.
pub fn eval_leveled(dag: &LeveledDag, inputs: &Assignment) -> Result<Assignment, OracleError> {
    let netlist = dag.netlist();
    let values = eval_all(netlist, inputs)?;
    Ok(netlist
        .outputs()
        .iter()
        .zip(dag.po_drivers())
        .map(|(&o, &d)| (netlist.name(o).to_string(), values[d.index()].clone()))
        .collect())
}

fn eval_all(netlist: &Netlist, inputs: &Assignment) -> Result<Vec<BatchWord>, OracleError> {
    let width = batch_width(netlist, inputs)?;
    let mut values: Vec<Option<BatchWord>> = vec![None; netlist.len()];
    for id in netlist.inputs() {
        let name = netlist.name(id);
        let w = inputs
            .get(name)
            .ok_or_else(|| OracleError::MissingInput(name.to_string()))?;
        if w.width() != width {
            return Err(OracleError::WidthMismatch {
                name: name.to_string(),
                expected: width,
                found: w.width(),
            });
        }
        values[id.index()] = Some(w.clone());
    }
    let order = netlist
        .topo_order()
        .expect("validated netlists are acyclic");
    for id in order {
        let node = netlist.node(id);
        let Some(op) = node.op() else { continue };
        let get = |f: NodeId| values[f.index()].as_ref().expect("topological order");
        let fanins = node.fanins();
        let out = if op.is_siso() {
            get(fanins[0]).map(|a| op.eval(a, 0))
        } else {
            get(fanins[0]).zip_with(get(fanins[1]), |a, b| op.eval(a, b))
        };
        values[id.index()] = Some(out);
    }
    Ok(values
        .into_iter()
        .map(|v| v.unwrap_or_else(|| BatchWord::zeros(width)))
        .collect())
}

fn batch_width(netlist: &Netlist, inputs: &Assignment) -> Result<usize, OracleError> {
    match netlist.inputs().next() {
        None => Ok(inputs.values().next().map_or(0, BatchWord::width)),
        Some(first) => {
            let name = netlist.name(first);
            inputs
                .get(name)
                .map(BatchWord::width)
                .ok_or_else(|| OracleError::MissingInput(name.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::{balance_paths, levelize};
    use crate::netlist::parse_ffcl;
    use rand::SeedableRng;

    fn assign(pairs: &[(&str, BatchWord)]) -> Assignment {
        pairs
            .iter()
            .map(|(n, w)| (n.to_string(), w.clone()))
            .collect()
    }

    #[test]
    fn xor_with_itself_is_zero() {
        let n = parse_ffcl("input a\noutput y\ngate y XOR a a").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let a = BatchWord::random(16, &mut rng);
        let out = eval_dag(&n, &assign(&[("a", a)])).unwrap();
        assert_eq!(out["y"], BatchWord::zeros(16));
    }

    #[test]
    fn nand_matches_not_and_on_truth_table() {
        let n = parse_ffcl("input a b\noutput y z\ngate y NAND a b\ngate t AND a b\ngate z NOT t")
            .unwrap();
        // lanes 0..4 enumerate (a, b) = 00, 10, 01, 11
        let a = BatchWord::from_u64(4, 0b1010);
        let b = BatchWord::from_u64(4, 0b1100);
        let out = eval_dag(&n, &assign(&[("a", a), ("b", b)])).unwrap();
        assert_eq!(out["y"], BatchWord::from_u64(4, 0b0111));
        assert_eq!(out["y"], out["z"]);
    }

    #[test]
    fn balanced_and_unbalanced_agree() {
        let n = parse_ffcl(
            "input a b c\noutput y w\ngate g1 BUF b\ngate g2 XOR g1 c\ngate y AND a g2\ngate w NOT a",
        )
        .unwrap();
        let dag = balance_paths(&levelize(&n));
        assert!(dag.inserted_buffer_count() > 0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let inputs: Assignment = ["a", "b", "c"]
            .iter()
            .map(|s| (s.to_string(), BatchWord::random(64, &mut rng)))
            .collect();
        assert_eq!(
            eval_dag(&n, &inputs).unwrap(),
            eval_leveled(&dag, &inputs).unwrap()
        );
    }

    #[test]
    fn missing_input() {
        let n = parse_ffcl("input a b\noutput y\ngate y AND a b").unwrap();
        let err = eval_dag(&n, &assign(&[("a", BatchWord::zeros(4))])).unwrap_err();
        assert_eq!(err, OracleError::MissingInput("b".into()));
    }
}

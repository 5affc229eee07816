use lpu_core::gen::{gen_random_dag, GenSpec, WidthProfile};
use lpu_core::level::{balance_paths, levelize};
use lpu_core::netlist::{emit_ffcl, parse_ffcl, parse_structural_verilog};
use lpu_core::oracle::eval_dag;
use lpu_core::pipeline::{
    check_netlist, check_program, compile, random_batches, CheckOutcome, CompileOptions,
};
use lpu_core::program::{load_program, LpuConfig};
use lpu_core::schedule::find_address_conflicts;
use lpu_core::sim::{format_vectors, parse_vectors, run};
use proptest::prelude::*;

const ADDER: &str = "\
module add2(a0, a1, b0, b1, s0, s1, c);
  input a0, a1, b0, b1;
  output s0, s1, c;
  wire c0, t, u, v;
  xor X0(s0, a0, b0);
  and A0(c0, a0, b0);
  xor X1(t, a1, b1);
  xor X2(s1, t, c0);
  and A1(u, a1, b1);
  and A2(v, t, c0);
  or O1(c, u, v);
endmodule
";

fn profile() -> impl Strategy<Value = WidthProfile> {
    prop_oneof![
        Just(WidthProfile::Uniform),
        Just(WidthProfile::FaninTree),
        (1usize..40).prop_map(|width| WidthProfile::WideShallow { width }),
        (1usize..6).prop_map(|width| WidthProfile::DeepNarrow { width }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn compiled_programs_match_the_oracle(
        seed in 0u64..1_000_000,
        gates in 1usize..300,
        depth in 1usize..30,
        width_profile in profile(),
        pis in 1usize..20,
        cfg in prop_oneof![Just((1usize, 1usize)), Just((2, 3)), Just((4, 4)), Just((8, 8)), Just((32, 16))],
        merge: bool,
        share: bool,
    ) {
        let spec = GenSpec { seed, gate_count: gates, max_fanin_depth: depth, width_profile, pi_count: pis, po_count: 2 };
        let netlist = gen_random_dag(&spec).unwrap();
        let cfg = LpuConfig::new(cfg.0, cfg.1, 5).unwrap();
        let opts = CompileOptions { merge, share };
        let c = compile(&netlist, &cfg, opts).unwrap();
        prop_assert!(find_address_conflicts(&c.program).is_empty());
        prop_assert_eq!(c.program.passes, cfg.passes_for(c.dag.l_max()));
        prop_assert_eq!(check_program(&netlist, &c.program, 3, seed), CheckOutcome::Pass { trials: 3 });
    }

    #[test]
    fn ffcl_round_trip_preserves_function(seed in 0u64..10_000, gates in 1usize..120) {
        let spec = GenSpec { seed, gate_count: gates, ..GenSpec::default() };
        let netlist = gen_random_dag(&spec).unwrap();
        let text = emit_ffcl(&netlist);
        let back = parse_ffcl(&text).unwrap();
        prop_assert_eq!(emit_ffcl(&back), text);
        let inputs = &random_batches(&netlist, 64, 1, seed)[0];
        prop_assert_eq!(eval_dag(&netlist, inputs).unwrap(), eval_dag(&back, inputs).unwrap());
    }
}

#[test]
fn verilog_adder_runs_on_the_lpu() {
    let netlist = parse_structural_verilog(ADDER).unwrap();
    let cfg = LpuConfig::new(2, 2, 1).unwrap();
    let c = compile(&netlist, &cfg, CompileOptions::default()).unwrap();
    assert_eq!(c.program.passes, 2);
    assert!(check_netlist(&netlist, &cfg, CompileOptions::default(), 8, 4).passed());

    // bit i of the words is one addition: 3 + 0, 2 + 2, 1 + 3, 0 + 1
    let inputs = parse_vectors("a0 5\na1 3\nb0 c\nb1 6\n", cfg.width()).unwrap();
    let (out, report) = run(&c.program, &inputs).unwrap();
    let text = format_vectors(["s0", "s1", "c"], &out);
    assert_eq!(text, "s0 9\ns1 1\nc 6\n");
    assert_eq!(report.passes, 2);
}

#[test]
fn verilog_and_ffcl_spellings_compile_identically() {
    let from_verilog = parse_structural_verilog(ADDER).unwrap();
    let from_ffcl = parse_ffcl(&emit_ffcl(&from_verilog)).unwrap();
    let cfg = LpuConfig::new(4, 4, 5).unwrap();
    let a = compile(&from_verilog, &cfg, CompileOptions::default()).unwrap();
    let b = compile(&from_ffcl, &cfg, CompileOptions::default()).unwrap();
    assert_eq!(a.program.to_json(), b.program.to_json());
}

#[test]
fn program_json_survives_reload_and_still_checks() {
    let spec = GenSpec {
        seed: 5,
        gate_count: 400,
        max_fanin_depth: 20,
        ..GenSpec::default()
    };
    let netlist = gen_random_dag(&spec).unwrap();
    let cfg = LpuConfig::new(8, 4, 5).unwrap();
    let c = compile(&netlist, &cfg, CompileOptions::default()).unwrap();
    let json = c.program.to_json();
    let loaded = load_program(&json).unwrap();
    assert_eq!(loaded, c.program);
    assert_eq!(loaded.to_json(), json);
    assert!(check_program(&netlist, &loaded, 4, 1).passed());
}

#[test]
fn merging_never_changes_outputs() {
    for seed in 0..6 {
        let spec = GenSpec {
            seed,
            gate_count: 600,
            max_fanin_depth: 5,
            width_profile: WidthProfile::WideShallow { width: 120 },
            pi_count: 32,
            po_count: 0,
        };
        let netlist = gen_random_dag(&spec).unwrap();
        let cfg = LpuConfig::new(8, 8, 5).unwrap();
        let inputs = &random_batches(&netlist, cfg.width(), 1, seed)[0];
        let mut seen = Vec::new();
        for merge in [false, true] {
            let c = compile(&netlist, &cfg, CompileOptions { merge, share: true }).unwrap();
            seen.push(run(&c.program, inputs).unwrap().0);
        }
        assert_eq!(seen[0], seen[1]);
    }
}

#[test]
fn rebalancing_inserts_nothing() {
    let spec = GenSpec {
        seed: 11,
        gate_count: 300,
        max_fanin_depth: 12,
        ..GenSpec::default()
    };
    let netlist = gen_random_dag(&spec).unwrap();
    let once = balance_paths(&levelize(&netlist));
    let twice = balance_paths(&once);
    assert_eq!(twice.inserted_buffer_count(), once.inserted_buffer_count());
    assert_eq!(emit_ffcl(twice.netlist()), emit_ffcl(once.netlist()));
}

#[test]
fn compile_errors_surface_as_check_failures() {
    let netlist = parse_ffcl("input a b\noutput y\ngate y AND a b\n").unwrap();
    let bad = LpuConfig {
        m: 0,
        n: 4,
        t_sw: 5,
    };
    match check_netlist(&netlist, &bad, CompileOptions::default(), 4, 1) {
        CheckOutcome::CompileFailure { kind, .. } => assert_eq!(kind, "ConfigError"),
        other => panic!("expected a compile failure, got {other:?}"),
    }
}

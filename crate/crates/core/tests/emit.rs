mod common;

use std::collections::BTreeSet;

use chorprism::chor::ChorProgram;
use chorprism::equivalence::lift;
use chorprism::expr::{Consts, Expr, UpdateList};
use chorprism::frontend::{auto_annotate, compile_source, AnnotationScheme};
use chorprism::prism::{
    build_network_chain, emit, extension, EmitConfig, EmitError, PrismCommand, PrismModel, PrismModule, PrismNetwork,
    Weight,
};
use chorprism::projection::{project, ProjectOptions, ProjectionMode};
use chorprism::state::{ModelKind, RoleId, VarDecl};
use common::prism_reparse::reparse;
use common::{chains_match, random_program, read_fixture};

const EXAMPLE3: &str = "ctmc;
role p;
role q;
var x @ p : [0..3] init 0;
var y @ q : [0..2] init 0;
def C = [a] p -> q : { 2 : {x'=1, y'=2}; C | 3 : {x'=3, y'=1}; C };
main C;
";

fn load(src: &str) -> ChorProgram {
    auto_annotate(&compile_source(src).unwrap(), AnnotationScheme::Deterministic)
}

fn model(prog: &ChorProgram, mode: ProjectionMode) -> PrismModel {
    let opts = ProjectOptions { mode, override_sconn: true, ..Default::default() };
    project(prog, &opts).unwrap().model
}

/// Emit, read back, and compare the two network chains.
fn round_trip(prog: &ChorProgram, mode: ProjectionMode, cfg: &EmitConfig) -> Result<String, String> {
    let m = model(prog, mode);
    let text = emit(&m, cfg).map_err(|e| e.to_string())?;
    let back = reparse(&text);
    let init = prog.initial_state().unwrap();
    let a = build_network_chain(&m, lift(&init, &m).unwrap(), 50_000).unwrap();
    let b = build_network_chain(&back.model, lift(&init, &back.model).unwrap(), 50_000).unwrap();
    chains_match(&a, &b, 1e-9).map_err(|e| format!("{e}\n{text}"))?;
    Ok(text)
}

#[test]
fn example3_module_p() {
    let prog = load(EXAMPLE3);
    let text = round_trip(&prog, ProjectionMode::Formal, &EmitConfig::default()).unwrap();
    let p = text.split("module p\n").nth(1).unwrap().split("endmodule").next().unwrap();
    let lines: Vec<&str> = p.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    assert_eq!(
        lines,
        [
            "p_STATE : [0..2] init 0;",
            "x : [0..3] init 0;",
            "[a_1] (p_STATE=0) -> 2 : (x'=1)&(p_STATE'=1);",
            "[a_2] (p_STATE=0) -> 3 : (x'=3)&(p_STATE'=2);",
            "[] (p_STATE=1) -> 1 : (p_STATE'=0);",
            "[] (p_STATE=2) -> 1 : (p_STATE'=0);",
        ]
    );
    assert!(text.contains("[a_1] (q_STATE=0) -> 1 : (y'=2)&(q_STATE'=1);"), "{text}");
    assert!(text.starts_with("ctmc\n"));
    assert!(!text.contains("system"));
}

#[test]
fn fixtures_round_trip() {
    for name in ["example1", "example2", "example2_dtmc", "thinkteam", "connected", "ring", "allsynch"] {
        let prog = load(&read_fixture(&format!("{name}.chor")));
        for mode in [ProjectionMode::Formal, ProjectionMode::Compact] {
            round_trip(&prog, mode, &EmitConfig::default()).unwrap_or_else(|e| panic!("{name} {mode:?}: {e}"));
        }
    }
}

#[test]
fn random_programs_round_trip() {
    for seed in 0..40 {
        for kind in [ModelKind::Ctmc, ModelKind::Dtmc] {
            let prog = random_program(seed, kind);
            for mode in [ProjectionMode::Formal, ProjectionMode::Compact] {
                round_trip(&prog, mode, &EmitConfig::default())
                    .unwrap_or_else(|e| panic!("seed {seed} {kind:?} {mode:?}: {e}"));
            }
        }
    }
}

#[test]
fn wrapped_lines_round_trip() {
    let cfg = EmitConfig { line_width: Some(30), ..Default::default() };
    let prog = load(&read_fixture("example2_dtmc.chor"));
    let text = round_trip(&prog, ProjectionMode::Formal, &cfg).unwrap();
    assert!(text.lines().any(|l| l.trim_start().starts_with('+')), "{text}");
}

#[test]
fn thinkteam_checkout_module() {
    let prog = load(&read_fixture("thinkteam.chor"));
    let text = round_trip(&prog, ProjectionMode::Compact, &EmitConfig::default()).unwrap();
    let back = reparse(&text);
    let co = back.modules.iter().find(|m| m.name.as_str() == "CheckOut").unwrap();
    assert_eq!(co.vars.len(), 1);
    assert!(text.contains("CheckOut_STATE : [0..2] init 0;"));
    let labelled: Vec<&PrismCommand> = co.commands.iter().filter(|c| c.label.is_some()).collect();
    assert_eq!(labelled.len(), 5);
    assert_eq!(co.commands.len(), 5);
    let guards: Vec<String> = labelled.iter().map(|c| c.guard.to_string()).collect();
    let at = |k: usize| guards.iter().filter(|g| g.contains(&format!("CheckOut_STATE = {k}"))).count();
    assert_eq!((at(0), at(1), at(2)), (2, 1, 2), "{guards:?}");
}

#[test]
fn emission_is_deterministic() {
    for name in ["thinkteam", "ring", "example2_dtmc"] {
        let prog = load(&read_fixture(&format!("{name}.chor")));
        let m = model(&prog, ProjectionMode::Formal);
        let a = emit(&m, &EmitConfig::default()).unwrap();
        let b = emit(&model(&prog, ProjectionMode::Formal), &EmitConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn labels_shared_and_guards_closed() {
    let mut progs: Vec<ChorProgram> = ["example2", "thinkteam", "ring", "connected"]
        .iter()
        .map(|n| load(&read_fixture(&format!("{n}.chor"))))
        .collect();
    progs.extend((0..30).map(|s| random_program(s, if s % 2 == 0 { ModelKind::Ctmc } else { ModelKind::Dtmc })));
    for prog in &progs {
        let text = emit(&model(prog, ProjectionMode::Formal), &EmitConfig::default()).unwrap();
        let back = reparse(&text);
        let declared: BTreeSet<String> =
            back.modules.iter().flat_map(|m| m.vars.iter().map(|v| v.name.clone())).collect();
        for m in &back.modules {
            for l in m.labels() {
                let n = back.modules.iter().filter(|o| o.labels().contains(&l)).count();
                assert!(n >= 2, "label {l} only in {}\n{text}", m.name.as_str());
            }
            for c in &m.commands {
                for v in c.guard.free_vars() {
                    assert!(declared.contains(v) || back.model.consts.contains_key(v), "{v}");
                }
            }
        }
    }
}

fn single(weight: Weight) -> PrismModel {
    let m = PrismModule {
        name: RoleId::new("p"),
        vars: vec![VarDecl::int("x", "p", 0, 1, 0)],
        commands: vec![PrismCommand {
            label: None,
            guard: Expr::bool(true),
            branches: vec![(weight, UpdateList::new(vec![]))],
        }],
    };
    PrismModel { kind: ModelKind::Ctmc, consts: Consts::new(), network: PrismNetwork::Mod(m) }
}

#[test]
fn weights_that_do_not_round_trip_are_rejected() {
    let third = single(Weight::literal(1.0 / 3.0));
    let cfg = EmitConfig { precision: 8, ..Default::default() };
    assert!(matches!(emit(&third, &cfg), Err(EmitError::UnrepresentableWeight { .. })));
    assert!(emit(&single(Weight::literal(0.125)), &cfg).unwrap().contains("-> 0.125 : true;"));
    assert!(matches!(
        emit(&single(Weight::literal(f64::INFINITY)), &cfg),
        Err(EmitError::UnrepresentableWeight { .. })
    ));
    let full = EmitConfig { precision: 17, ..Default::default() };
    let text = emit(&third, &full).unwrap();
    let back = reparse(&text);
    let w = back.modules[0].commands[0].branches[0].0.value;
    assert_eq!(w, 1.0 / 3.0);
}

#[test]
fn extensions() {
    assert_eq!(extension(ModelKind::Ctmc), "sm");
    assert_eq!(extension(ModelKind::Dtmc), "pm");
}

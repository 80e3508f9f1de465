//! Checking that a projection behaves like its choreography: both chains are
//! labelled with program-variable observations, administrative steps are
//! collapsed, and the results are compared up to weighted bisimilarity.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::chain::{ChainError, MarkovChain, DEFAULT_MAX_STATES};
use crate::chor::ChorProgram;
use crate::expr::{eval_with, Consts, Value};
use crate::prism::{build_network_chain_with, NetworkSystem, PrismCommand, PrismModel, Scheduler};
use crate::projection::{project, ProjectOptions, Projection, ProjectionError};
use crate::semantics::{build_chain, is_administrative};
use crate::state::{apply_update_simultaneous, ModelKind, StateError, StateValuation};

/// Absolute tolerance on weights.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Depth bound of counterexample explanations.
pub const COUNTEREXAMPLE_DEPTH: usize = 10;

/// Extend a program state with every counter of the network, at 0.
pub fn lift(state: &StateValuation, model: &PrismModel) -> Result<StateValuation, StateError> {
    let mut s = model.network.initial_state()?;
    for (name, v) in state.layout().names().iter().zip(state.values()) {
        s = s.with(name, *v)?;
    }
    Ok(s)
}

/// A chain whose states carry an observation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledChain {
    pub kind: ModelKind,
    pub obs: Vec<Vec<Value>>,
    /// Human-readable description of each state.
    pub names: Vec<String>,
    /// States whose outgoing step is administrative: a silent command of the
    /// network or a call unfolding of the choreography.
    pub silent: Vec<bool>,
    pub succ: Vec<Vec<(usize, f64)>>,
    pub initial: usize,
}

impl LabeledChain {
    /// Observe the variables `vars` of every state.
    pub fn from_chain(chain: &MarkovChain, vars: &[String]) -> Self {
        LabeledChain {
            kind: chain.kind,
            obs: chain.states.iter().map(|s| s.valuation.project(vars)).collect(),
            names: chain.states.iter().map(|s| describe(&s.valuation, &s.tag)).collect(),
            silent: vec![false; chain.len()],
            succ: (0..chain.len()).map(|i| chain.successors(i).to_vec()).collect(),
            initial: chain.initial,
        }
    }

    /// Mark the states satisfying `f` as administrative.
    pub fn with_silent(mut self, f: impl Fn(usize) -> bool) -> Self {
        self.silent = (0..self.len()).map(f).collect();
        self
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn transition_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    /// Number of distinct observations.
    pub fn observation_count(&self) -> usize {
        let mut seen: Vec<&Vec<Value>> = self.obs.iter().collect();
        seen.sort_by_key(|o| format!("{o:?}"));
        seen.dedup();
        seen.len()
    }
}

fn describe(s: &StateValuation, tag: &str) -> String {
    let vals = s.render();
    if tag.is_empty() {
        format!("{{{vals}}}")
    } else {
        format!("{{{vals}}} {tag}")
    }
}

fn is_one(w: f64) -> bool {
    (w - 1.0).abs() <= WEIGHT_TOLERANCE
}

/// Contract stuttering states: a state with a single weight-1 exit to a
/// different state that observes the same disappears into its successor.
/// Unreachable states are dropped.
pub fn collapse(chain: &LabeledChain) -> LabeledChain {
    let n = chain.len();
    let mut succ: Vec<BTreeMap<usize, f64>> = chain
        .succ
        .iter()
        .map(|out| {
            let mut m = BTreeMap::new();
            for &(d, w) in out {
                *m.entry(d).or_insert(0.0) += w;
            }
            m
        })
        .collect();
    let mut preds: Vec<BTreeMap<usize, ()>> = vec![BTreeMap::new(); n];
    for (s, out) in succ.iter().enumerate() {
        for &d in out.keys() {
            preds[d].insert(s, ());
        }
    }
    let mut alive = vec![true; n];
    let mut initial = chain.initial;

    loop {
        let mut changed = false;
        for m in 0..n {
            if !alive[m] || succ[m].len() != 1 {
                continue;
            }
            let (&s, &w) = succ[m].iter().next().expect("one successor");
            if s == m || !is_one(w) {
                continue;
            }
            let same_as_succ = chain.obs[m] == chain.obs[s];
            if !same_as_succ {
                continue;
            }
            let incoming: Vec<usize> = preds[m].keys().copied().collect();
            for p in incoming {
                let wp = succ[p].remove(&m).expect("edge into m");
                *succ[p].entry(s).or_insert(0.0) += wp;
                preds[s].insert(p, ());
            }
            preds[s].remove(&m);
            succ[m].clear();
            preds[m].clear();
            alive[m] = false;
            if initial == m {
                initial = s;
            }
            changed = true;
        }

        // Drop whatever is no longer reachable.
        let mut reach = vec![false; n];
        let mut queue = VecDeque::from([initial]);
        reach[initial] = true;
        while let Some(s) = queue.pop_front() {
            for &d in succ[s].keys() {
                if !reach[d] {
                    reach[d] = true;
                    queue.push_back(d);
                }
            }
        }
        for s in 0..n {
            if alive[s] && !reach[s] {
                alive[s] = false;
                for d in std::mem::take(&mut succ[s]).into_keys() {
                    preds[d].remove(&s);
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut renum = vec![usize::MAX; n];
    let mut k = 0;
    for s in 0..n {
        if alive[s] {
            renum[s] = k;
            k += 1;
        }
    }
    let keep = |s: &usize| alive[*s];
    LabeledChain {
        kind: chain.kind,
        obs: (0..n).filter(keep).map(|s| chain.obs[s].clone()).collect(),
        names: (0..n).filter(keep).map(|s| chain.names[s].clone()).collect(),
        silent: (0..n).filter(keep).map(|s| chain.silent[s]).collect(),
        succ: (0..n).filter(keep).map(|s| succ[s].iter().map(|(&d, &w)| (renum[d], w)).collect()).collect(),
        initial: renum[initial],
    }
}

/// Eliminate administrative states. The result keeps the initial state and
/// every target of a non-administrative step; each kept state moves with
/// the probability of reaching a non-administrative state through
/// administrative steps times the weight of that state's step. A cycle of
/// administrative steps is cut where it closes.
pub fn eliminate_silent(chain: &LabeledChain) -> LabeledChain {
    let n = chain.len();
    let mut memo: Vec<Option<BTreeMap<usize, f64>>> = vec![None; n];
    let mut on_stack = vec![false; n];

    fn closure(
        t: usize,
        chain: &LabeledChain,
        memo: &mut Vec<Option<BTreeMap<usize, f64>>>,
        on_stack: &mut Vec<bool>,
    ) -> BTreeMap<usize, f64> {
        if let Some(d) = &memo[t] {
            return d.clone();
        }
        let mass: f64 = chain.succ[t].iter().map(|(_, w)| w).sum();
        if !chain.silent[t] || on_stack[t] || mass <= 0.0 {
            return BTreeMap::from([(t, 1.0)]);
        }
        on_stack[t] = true;
        let mut dist = BTreeMap::new();
        for &(d, w) in &chain.succ[t] {
            for (s, p) in closure(d, chain, memo, on_stack) {
                *dist.entry(s).or_insert(0.0) += w / mass * p;
            }
        }
        on_stack[t] = false;
        memo[t] = Some(dist.clone());
        dist
    }

    let mut ids: BTreeMap<usize, usize> = BTreeMap::from([(chain.initial, 0)]);
    let mut order = vec![chain.initial];
    let mut succ: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let t = order[i];
        let mut out: BTreeMap<usize, f64> = BTreeMap::new();
        for (s, p) in closure(t, chain, &mut memo, &mut on_stack) {
            for &(d, w) in &chain.succ[s] {
                if chain.silent[s] {
                    // Only reached when the administrative cycle was cut.
                    continue;
                }
                let next = ids.len();
                let id = *ids.entry(d).or_insert_with(|| {
                    order.push(d);
                    next
                });
                *out.entry(id).or_insert(0.0) += p * w;
            }
        }
        succ.push(out.into_iter().collect());
        i += 1;
    }
    LabeledChain {
        kind: chain.kind,
        obs: order.iter().map(|&s| chain.obs[s].clone()).collect(),
        names: order.iter().map(|&s| chain.names[s].clone()).collect(),
        silent: vec![false; order.len()],
        succ,
        initial: 0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisimResult {
    pub equivalent: bool,
    /// Final block of every state of the left then the right chain.
    pub blocks: Vec<usize>,
    pub block_count: usize,
    /// Explanation of why the initial states differ, at most
    /// [`COUNTEREXAMPLE_DEPTH`] lines deep.
    pub counterexample: Vec<String>,
}

type Signature = BTreeMap<usize, f64>;

fn signature(succ: &[(usize, f64)], block: &[usize]) -> Signature {
    let mut sig = BTreeMap::new();
    for &(d, w) in succ {
        *sig.entry(block[d]).or_insert(0.0) += w;
    }
    sig
}

fn same_signature(a: &Signature, b: &Signature) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|((ka, wa), (kb, wb))| ka == kb && (wa - wb).abs() <= WEIGHT_TOLERANCE)
}

/// Coarsest partition of the disjoint union of `a` and `b` that respects
/// observations and per-block weight sums.
pub fn bisimilar(a: &LabeledChain, b: &LabeledChain) -> BisimResult {
    let off = a.len();
    let obs: Vec<&Vec<Value>> = a.obs.iter().chain(&b.obs).collect();
    let names: Vec<&String> = a.names.iter().chain(&b.names).collect();
    let succ: Vec<Vec<(usize, f64)>> = a
        .succ
        .iter()
        .cloned()
        .chain(b.succ.iter().map(|out| out.iter().map(|&(d, w)| (d + off, w)).collect()))
        .collect();
    let n = succ.len();

    let mut block = vec![0; n];
    let mut keys: Vec<&Vec<Value>> = Vec::new();
    for s in 0..n {
        block[s] = match keys.iter().position(|k| *k == obs[s]) {
            Some(i) => i,
            None => {
                keys.push(obs[s]);
                keys.len() - 1
            }
        };
    }
    let mut count = keys.len();
    let mut history = vec![block.clone()];

    loop {
        let sigs: Vec<Signature> = (0..n).map(|s| signature(&succ[s], &block)).collect();
        let mut next = vec![0; n];
        // Per old block, the representatives of its sub-blocks.
        let mut reps: Vec<Vec<(usize, usize)>> = vec![Vec::new(); count];
        let mut next_count = 0;
        for s in 0..n {
            let b = block[s];
            match reps[b].iter().find(|(r, _)| same_signature(&sigs[*r], &sigs[s])) {
                Some(&(_, id)) => next[s] = id,
                None => {
                    reps[b].push((s, next_count));
                    next[s] = next_count;
                    next_count += 1;
                }
            }
        }
        let stable = next_count == count;
        block = next;
        count = next_count;
        if stable {
            break;
        }
        history.push(block.clone());
    }

    let (ia, ib) = (a.initial, b.initial + off);
    let equivalent = block[ia] == block[ib];
    let counterexample = if equivalent {
        Vec::new()
    } else {
        let mut lines = Vec::new();
        explain(ia, ib, &history, &succ, &obs, &names, &mut lines);
        lines
    };
    BisimResult { equivalent, blocks: block, block_count: count, counterexample }
}

fn explain(
    a: usize,
    b: usize,
    history: &[Vec<usize>],
    succ: &[Vec<(usize, f64)>],
    obs: &[&Vec<Value>],
    names: &[&String],
    out: &mut Vec<String>,
) {
    let mut pair = (a, b);
    while out.len() < COUNTEREXAMPLE_DEPTH {
        let (a, b) = pair;
        // First round in which the two states are apart.
        let Some(r) = history.iter().position(|p| p[a] != p[b]) else {
            return;
        };
        if r == 0 {
            out.push(format!("observations differ: {} vs {}", names[a], names[b]));
            return;
        }
        let prev = &history[r - 1];
        let sa = signature(&succ[a], prev);
        let sb = signature(&succ[b], prev);
        let target =
            sa.keys().chain(sb.keys()).copied().find(|k| {
                (sa.get(k).copied().unwrap_or(0.0) - sb.get(k).copied().unwrap_or(0.0)).abs() > WEIGHT_TOLERANCE
            });
        let Some(k) = target else {
            return;
        };
        let example = (0..prev.len()).find(|&s| prev[s] == k).map(|s| format!("{:?}", obs[s])).unwrap_or_default();
        out.push(format!(
            "{} moves with weight {} into the class observing {example}, {} with weight {}",
            names[a],
            sa.get(&k).copied().unwrap_or(0.0),
            names[b],
            sb.get(&k).copied().unwrap_or(0.0),
        ));
        // Descend into a pair of successors that are told apart earlier.
        let apart: Vec<(usize, usize)> = succ[a]
            .iter()
            .flat_map(|&(da, _)| succ[b].iter().map(move |&(db, _)| (da, db)))
            .filter(|&(da, db)| prev[da] != prev[db])
            .collect();
        let deeper = apart.iter().find(|&&(da, db)| obs[da] == obs[db]).or(apart.first()).copied();
        match deeper {
            Some(p) => pair = p,
            None => return,
        }
    }
}

/// A pair of commands that do not commute where the checker needs them to.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfluenceViolation {
    pub state: String,
    pub silent: String,
    pub other: String,
    pub reason: String,
}

/// Give precedence to silent commands only where that is harmless: in every
/// reachable state, the first enabled silent command must touch counters
/// only and commute with every other enabled command.
pub fn check_confluence(
    model: &PrismModel,
    init: &StateValuation,
    counters: &[String],
    max_states: usize,
) -> Result<Option<ConfluenceViolation>, ChainError> {
    let full = build_network_chain_with(model, init.clone(), max_states, Scheduler::Full)?.chain;
    let sys = NetworkSystem::new(model, Scheduler::Full);
    let consts = &model.consts;
    for st in &full.states {
        let s = &st.valuation;
        let enabled = sys.firing(s)?;
        let Some(&fi) = enabled.iter().find(|&&i| sys.commands[i].is_silent()) else {
            continue;
        };
        let f = &sys.commands[fi];
        let violation = |other: &PrismCommand, reason: &str| ConfluenceViolation {
            state: s.render(),
            silent: f.to_string(),
            other: other.to_string(),
            reason: reason.to_string(),
        };
        for (_, u) in &f.branches {
            if let Some(a) = u.iter().find(|a| !counters.contains(&a.target)) {
                return Ok(Some(violation(f, &format!("silent command writes `{}`", a.target))));
            }
        }
        for &gi in enabled.iter().filter(|&&i| i != fi) {
            let g = &sys.commands[gi];
            for (wf, uf) in &f.branches {
                for (wg, ug) in &g.branches {
                    if wf.value <= 0.0 || wg.value <= 0.0 {
                        continue;
                    }
                    let sf = apply_update_simultaneous(s, uf, consts)?;
                    let sg = apply_update_simultaneous(s, ug, consts)?;
                    if !holds(g, &sf, consts)? {
                        return Ok(Some(violation(g, "disabled by the silent command")));
                    }
                    if !holds(f, &sg, consts)? {
                        return Ok(Some(violation(g, "disables the silent command")));
                    }
                    let fg = apply_update_simultaneous(&sf, ug, consts)?;
                    let gf = apply_update_simultaneous(&sg, uf, consts)?;
                    if fg != gf {
                        return Ok(Some(violation(g, "updates do not commute")));
                    }
                }
            }
        }
    }
    Ok(None)
}

fn holds(cmd: &PrismCommand, s: &StateValuation, consts: &Consts) -> Result<bool, ChainError> {
    Ok(eval_with(&cmd.guard, &s.lookup(consts))?.as_bool().unwrap_or(false))
}

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub max_states: Option<usize>,
    /// Initial program state; the declared one when absent.
    pub init: Option<StateValuation>,
    pub projection: ProjectOptions,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub equivalent: bool,
    pub bisimilar: bool,
    pub chor_states: usize,
    pub chor_collapsed: LabeledChain,
    pub prism_states: usize,
    pub prism_collapsed: LabeledChain,
    pub block_count: usize,
    pub confluence: Option<ConfluenceViolation>,
    /// DTMC states of the network whose mass before normalisation was not 1.
    pub mass_anomalies: Vec<(String, f64)>,
    pub warnings: Vec<String>,
    pub counterexample: Vec<String>,
}

impl VerifyReport {
    pub fn key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "equivalent={}", self.equivalent);
        let _ = writeln!(out, "bisimilar={}", self.bisimilar);
        let _ = writeln!(out, "chor_states={}", self.chor_states);
        let _ = writeln!(out, "chor_collapsed_states={}", self.chor_collapsed.len());
        let _ = writeln!(out, "prism_states={}", self.prism_states);
        let _ = writeln!(out, "prism_collapsed_states={}", self.prism_collapsed.len());
        let _ = writeln!(out, "blocks={}", self.block_count);
        let _ = writeln!(out, "confluent={}", self.confluence.is_none());
        let _ = writeln!(out, "mass_anomalies={}", self.mass_anomalies.len());
        let _ = writeln!(out, "warnings={}", self.warnings.len());
        out
    }

    pub fn details(&self) -> String {
        let mut out = String::new();
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        if let Some(v) = &self.confluence {
            let _ = writeln!(out, "confluence violated in state {{{}}}: {}", v.state, v.reason);
            let _ = writeln!(out, "  silent: {}", v.silent);
            let _ = writeln!(out, "  other:  {}", v.other);
        }
        for (s, m) in &self.mass_anomalies {
            let _ = writeln!(out, "finding: outgoing mass {m} before normalisation in state {{{s}}}");
        }
        if !self.counterexample.is_empty() {
            let _ = writeln!(out, "counterexample:");
            for l in &self.counterexample {
                let _ = writeln!(out, "  {l}");
            }
        }
        out
    }
}

/// Build both chains, eliminate administrative steps and compare.
pub fn verify_projection(prog: &ChorProgram, opts: &VerifyOptions) -> Result<VerifyReport, VerifyError> {
    let Projection { model, ctx, warnings } = project(prog, &opts.projection)?;
    verify_model(prog, &model, ctx.counter_var.values().cloned().collect(), warnings, opts)
}

/// Compare `prog` against an already projected `model`.
pub fn verify_model(
    prog: &ChorProgram,
    model: &PrismModel,
    counters: Vec<String>,
    warnings: Vec<String>,
    opts: &VerifyOptions,
) -> Result<VerifyReport, VerifyError> {
    let max = opts.max_states.unwrap_or(DEFAULT_MAX_STATES);
    let init = match &opts.init {
        Some(s) => s.clone(),
        None => prog.initial_state()?,
    };
    let vars = prog.var_names();

    let chor = build_chain(prog, init.clone(), max)?;
    let net_init = lift(&init, model)?;
    let confluence = check_confluence(model, &net_init, &counters, max)?;
    let net = build_network_chain_with(model, net_init, max, Scheduler::SilentFirst)?;

    let a = LabeledChain::from_chain(&chor, &vars).with_silent(|i| is_administrative(&chor.states[i].tag));
    let sys = NetworkSystem::new(model, Scheduler::SilentFirst);
    let mut net_silent = Vec::with_capacity(net.chain.len());
    for st in &net.chain.states {
        let first = sys.firing(&st.valuation)?.first().copied();
        net_silent.push(first.is_some_and(|i| sys.commands[i].is_silent()));
    }
    let b = LabeledChain::from_chain(&net.chain, &vars).with_silent(|i| net_silent[i]);
    let (a, b) = (eliminate_silent(&a), eliminate_silent(&b));
    let bis = bisimilar(&a, &b);

    Ok(VerifyReport {
        equivalent: bis.equivalent && confluence.is_none(),
        bisimilar: bis.equivalent,
        chor_states: chor.len(),
        chor_collapsed: a,
        prism_states: net.chain.len(),
        prism_collapsed: b,
        block_count: bis.block_count,
        confluence,
        mass_anomalies: net.anomalies.iter().map(|m| (m.state.render(), m.mass)).collect(),
        warnings,
        counterexample: bis.counterexample,
    })
}

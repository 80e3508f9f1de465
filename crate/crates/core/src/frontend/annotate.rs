//! Automatic interaction labels.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chor::{ChorProgram, ChorTerm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotationScheme {
    /// `A1, A2, ...` in pre-order over the definitions.
    Deterministic,
    /// Five upper-case letters drawn from a seeded generator.
    SeededRandom(u64),
}

fn used_labels(prog: &ChorProgram) -> HashSet<String> {
    let mut used = HashSet::new();
    for (_, i) in prog.interactions() {
        if let Some(l) = &i.label {
            used.insert(l.clone());
        }
        for j in 0..i.branches.len() {
            if let Some(l) = i.branch_label(j) {
                used.insert(l);
            }
            if let Some(l) = &i.branches[j].label {
                used.insert(l.clone());
            }
        }
    }
    used
}

/// Label every unlabelled interaction. Labelled ones are left alone.
pub fn auto_annotate(prog: &ChorProgram, scheme: AnnotationScheme) -> ChorProgram {
    let mut used = used_labels(prog);
    let mut out = prog.clone();
    let mut k = 0usize;
    let mut rng = match scheme {
        AnnotationScheme::SeededRandom(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        AnnotationScheme::Deterministic => None,
    };
    let mut fresh = |branches: usize| -> String {
        loop {
            let cand = match rng.as_mut() {
                None => {
                    k += 1;
                    format!("A{k}")
                }
                Some(r) => (0..5).map(|_| r.gen_range(b'A'..=b'Z') as char).collect(),
            };
            let derived: Vec<String> = (1..=branches).map(|j| format!("{cand}_{j}")).collect();
            if !used.contains(&cand) && derived.iter().all(|d| !used.contains(d)) {
                used.insert(cand.clone());
                used.extend(derived);
                return cand;
            }
        }
    };
    for body in out.definitions.values_mut() {
        body.walk_mut(&mut |t| {
            if let ChorTerm::Interaction(i) = t {
                if i.label.is_none() {
                    i.label = Some(fresh(i.branches.len()));
                }
            }
        });
    }
    out
}

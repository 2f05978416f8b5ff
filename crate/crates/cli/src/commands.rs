//! Subcommand bodies. Each returns an exit code and a JSON report; the binary
//! only parses flags and writes the report.

use std::path::Path;
use std::sync::Arc;

use serde_json::{json, Value};
use torclass_core::census::{enumerate, orbit_count_invariants, CensusSpec, Dedup};
use torclass_core::classify::{canonical_form, equivalence, Mode, Verdict};
use torclass_core::localmodel::{run_localcheck, LocalCheckConfig};

use crate::document::{bigint_json, matrix_json, PairDocument, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub report: Value,
}

fn stamp(command: &str, mut body: Value) -> Value {
    let map = body.as_object_mut().expect("reports are objects");
    map.insert("schema".into(), SCHEMA_VERSION.into());
    map.insert("command".into(), command.into());
    body
}

pub fn error_outcome(command: &str, message: impl std::fmt::Display) -> Outcome {
    Outcome { code: EXIT_ERROR, report: stamp(command, json!({ "error": message.to_string() })) }
}

macro_rules! try_or_report {
    ($cmd:expr, $e:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => return error_outcome($cmd, err),
        }
    };
}

pub fn validate(path: &Path) -> Outcome {
    let cmd = "validate";
    let doc = try_or_report!(cmd, PairDocument::read(path));
    let cp = try_or_report!(cmd, doc.to_pair());
    let report = cp.validate();
    let mut body = json!({ "valid": report.valid, "violations": report.violations });
    if report.valid {
        body["stats"] = json!(orbit_count_invariants(&cp));
    }
    Outcome { code: if report.valid { EXIT_OK } else { EXIT_NEGATIVE }, report: stamp(cmd, body) }
}

fn verdict_json(v: &Verdict) -> Value {
    let witness = v.witness.as_ref().map(|w| {
        json!({
            "phi": w.phi,
            "auto": w.auto.as_ref().map(matrix_json),
        })
    });
    json!({
        "mode": v.mode,
        "equivalent": v.equivalent,
        "reason": v.reason,
        "witness": witness,
        "auto_unique": v.auto_unique,
        "justification": v.justification,
    })
}

pub fn iso(a: &Path, b: &Path, mode: Mode) -> Outcome {
    let cmd = "iso";
    let pa = try_or_report!(cmd, PairDocument::read(a).and_then(|d| d.to_pair()));
    let pb = try_or_report!(cmd, PairDocument::read(b).and_then(|d| d.to_pair()));
    let verdict = try_or_report!(cmd, equivalence(&pa, &pb, mode));
    let code = if verdict.equivalent { EXIT_OK } else { EXIT_NEGATIVE };
    Outcome { code, report: stamp(cmd, verdict_json(&verdict)) }
}

pub fn canon(path: &Path, mode: Mode) -> Outcome {
    let cmd = "canon";
    let cp = try_or_report!(cmd, PairDocument::read(path).and_then(|d| d.to_pair()));
    let form = try_or_report!(cmd, canonical_form(&cp, mode));
    Outcome { code: EXIT_OK, report: stamp(cmd, json!({ "mode": mode, "canonical": form })) }
}

#[derive(Clone, Debug)]
pub struct CensusArgs {
    pub k: usize,
    pub bound: i64,
    pub dedup: Dedup,
    pub budget: f64,
    pub threads: Option<usize>,
}

pub fn census(poset_path: &Path, args: &CensusArgs) -> Outcome {
    let cmd = "census";
    let poset = try_or_report!(cmd, PairDocument::read(poset_path).and_then(|d| d.to_poset()));
    let poset = Arc::new(poset);
    let spec = CensusSpec {
        poset: poset.clone(),
        k: args.k,
        entry_bound: args.bound,
        dedup: args.dedup,
        budget: args.budget,
        threads: args.threads,
    };
    let result = try_or_report!(cmd, enumerate(&spec));
    let mut classes = Vec::with_capacity(result.classes.len());
    for class in &result.classes {
        let lambda: serde_json::Map<String, Value> = class
            .representative
            .label_map()
            .into_iter()
            .map(|(id, v)| (id, v.iter().map(bigint_json).collect::<Vec<_>>().into()))
            .collect();
        classes.push(json!({ "size": class.size, "lambda": lambda }));
    }
    let body = json!({
        "k": result.k,
        "entry_bound": result.entry_bound,
        "dedup": result.dedup,
        "universe_size": result.universe_size,
        "search_space_estimate": result.estimate,
        "total_valid": result.total_valid,
        "class_count": result.classes.len(),
        "classes": classes,
        "stats": result.stats,
        "poset": PairDocument::from_poset(&poset).normalized(),
        "scope": "labels are primitive vectors with entries in [-entry_bound, entry_bound]; nothing outside this box is enumerated",
    });
    Outcome { code: EXIT_OK, report: stamp(cmd, body) }
}

pub fn localcheck(cfg: &LocalCheckConfig) -> Outcome {
    let cmd = "localcheck";
    let report = try_or_report!(cmd, run_localcheck(cfg));
    let code = if report.pass { EXIT_OK } else { EXIT_NEGATIVE };
    Outcome { code, report: stamp(cmd, json!(report)) }
}

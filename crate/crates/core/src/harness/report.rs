//! Suite reports and replayable counterexamples.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::action::HomeoSpec;
use crate::blowup::BlownPointSpec;
use crate::plmap::PlMap;
use crate::word::Word;
use crate::Q;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GermLaw {
    Associativity,
    Identity,
    Inverse,
    Homomorphism,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderLaw {
    Antisymmetry,
    Transitivity,
    LeftInvariance,
    Cone,
}

/// A failing instance, with everything needed to re-run it alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Counterexample {
    GermLaw {
        law: GermLaw,
        f: PlMap,
        g: PlMap,
        h: PlMap,
    },
    WellDefined {
        f: PlMap,
        g: PlMap,
        f_mutated: PlMap,
        g_mutated: PlMap,
    },
    Order {
        law: OrderLaw,
        f: PlMap,
        g: PlMap,
        h: PlMap,
    },
    Overlap {
        example: String,
        homeo: HomeoSpec,
        x: Q,
    },
    Threshold {
        example: String,
        homeo: HomeoSpec,
        detail: String,
    },
    Homomorphism {
        example: String,
        w1: Word,
        w2: Word,
        detail: String,
    },
    Witness {
        example: String,
        homeo: HomeoSpec,
        detail: String,
    },
    ActionLaw {
        example: String,
        h: Word,
        r: Word,
        q: BlownPointSpec,
        detail: String,
    },
    Stabilizer {
        example: String,
        word: Word,
        detail: String,
    },
    Injectivity {
        example: String,
        word: Word,
        detail: String,
    },
    OrbitSearch {
        example: String,
        n: Q,
        detail: String,
    },
    Structural {
        check: String,
        input: serde_json::Value,
        detail: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub claim: String,
    pub passed: bool,
    pub cases: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
}

/// No timings: identical configurations give byte-identical reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

impl Report {
    pub fn new(seed: u64, suites: Vec<SuiteReport>) -> Report {
        Report {
            seed,
            passed: suites.iter().all(|s| s.passed),
            suites,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

//! Spec files: parsing with positions, canonical re-serialization, and the
//! bundled example actions.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{load_action, ActionError, ActionSpec, Extension, Generators};
use crate::blowup::BlowupSpec;
use crate::leafspace::{LeafError, LeafSpace, LeafSpaceSpec};

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{origin}:{line}:{column}: {message}")]
    Syntax {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{origin}: cannot tell the file kind (expected one of the keys `branches`, `generators`, `marked`, `leaf_space`)")]
    UnknownKind { origin: String },
    #[error("{origin}: {source}")]
    Leaf { origin: String, source: LeafError },
    #[error("{origin}: {source}")]
    Action { origin: String, source: ActionError },
    #[error("unknown bundled example `{0}`")]
    UnknownExample(String),
}

/// A leaf space, an action on it and optionally the blow-up data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleSpec {
    pub leaf_space: LeafSpaceSpec,
    pub action: ActionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blowup: Option<BlowupSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpecFile {
    LeafSpace(LeafSpaceSpec),
    Action(ActionSpec),
    Blowup(BlowupSpec),
    Example(ExampleSpec),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed {
    pub file: SpecFile,
    /// The input is byte-identical to its re-serialization.
    pub canonical: bool,
}

/// Canonical text: pretty JSON with a trailing newline.
pub fn to_canonical<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("spec types serialize");
    s.push('\n');
    s
}

impl SpecFile {
    pub fn to_canonical(&self) -> String {
        match self {
            SpecFile::LeafSpace(s) => to_canonical(s),
            SpecFile::Action(s) => to_canonical(s),
            SpecFile::Blowup(s) => to_canonical(s),
            SpecFile::Example(s) => to_canonical(s),
        }
    }
}

fn syntax(origin: &str, e: serde_json::Error) -> InputError {
    InputError::Syntax {
        origin: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn typed<'a, T: Deserialize<'a>>(origin: &str, text: &'a str) -> Result<T, InputError> {
    serde_json::from_str(text).map_err(|e| syntax(origin, e))
}

/// Parses spec text; `origin` only labels errors.
pub fn parse_str(origin: &str, text: &str) -> Result<Parsed, InputError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| syntax(origin, e))?;
    let has = |k: &str| value.get(k).is_some();
    let file = if has("leaf_space") {
        let spec: ExampleSpec = typed(origin, text)?;
        load_example(origin, &spec, Extension::Reject)?;
        SpecFile::Example(spec)
    } else if has("branches") {
        let spec: LeafSpaceSpec = typed(origin, text)?;
        LeafSpace::from_spec(&spec).map_err(|source| InputError::Leaf {
            origin: origin.to_string(),
            source,
        })?;
        SpecFile::LeafSpace(spec)
    } else if has("generators") {
        SpecFile::Action(typed(origin, text)?)
    } else if has("marked") {
        SpecFile::Blowup(typed(origin, text)?)
    } else {
        return Err(InputError::UnknownKind {
            origin: origin.to_string(),
        });
    };
    let canonical = file.to_canonical() == text;
    Ok(Parsed { file, canonical })
}

pub fn parse_spec(path: &Path) -> Result<Parsed, InputError> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| InputError::Io {
        path: origin.clone(),
        source,
    })?;
    parse_str(&origin, &text)
}

/// A validated example, in the negative-side chart.
#[derive(Debug, Clone)]
pub struct Example {
    pub name: String,
    pub space: LeafSpace,
    pub gens: Generators,
    pub blowup: Option<BlowupSpec>,
}

pub fn load_example(name: &str, spec: &ExampleSpec, extension: Extension) -> Result<Example, InputError> {
    let l = LeafSpace::from_spec(&spec.leaf_space).map_err(|source| InputError::Leaf {
        origin: name.to_string(),
        source,
    })?;
    let (space, gens) = load_action(&l, &spec.action, extension).map_err(|source| InputError::Action {
        origin: name.to_string(),
        source,
    })?;
    Ok(Example {
        name: name.to_string(),
        space,
        gens,
        blowup: spec.blowup.clone(),
    })
}

pub const BUNDLED: [(&str, &str); 5] = [
    ("e1", include_str!("../../data/e1.json")),
    ("e2", include_str!("../../data/e2.json")),
    ("e3", include_str!("../../data/e3.json")),
    ("e3-fault-phi", include_str!("../../data/e3-fault-phi.json")),
    ("e3-fault-coset", include_str!("../../data/e3-fault-coset.json")),
];

pub fn bundled_text(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn bundled_spec(name: &str) -> Result<ExampleSpec, InputError> {
    let text = bundled_text(name).ok_or_else(|| InputError::UnknownExample(name.to_string()))?;
    typed(name, text)
}

pub fn bundled(name: &str) -> Result<Example, InputError> {
    load_example(name, &bundled_spec(name)?, Extension::Reject)
}

/// Reads a path, or a bundled example when the argument names one.
pub fn example_from_arg(arg: &str) -> Result<Example, InputError> {
    if let Some(text) = bundled_text(arg) {
        let spec: ExampleSpec = typed(arg, text)?;
        return load_example(arg, &spec, Extension::Reject);
    }
    match parse_spec(Path::new(arg))?.file {
        SpecFile::Example(spec) => load_example(arg, &spec, Extension::Reject),
        _ => Err(InputError::UnknownKind {
            origin: format!("{arg} (an example file with `leaf_space` and `action` is required)"),
        }),
    }
}

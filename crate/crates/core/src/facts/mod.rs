//! Logical data model: metabolic model facts, growth environments and
//! phenotype observations, together with their line-oriented file formats.

mod cost;
mod environment;
mod model;
mod observations;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use cost::{Cost, CostParseError};
pub use environment::{parse_environment, Environment};
pub use model::{parse_model, MetabolicModel, Reaction};
pub use observations::{parse_observations, write_observations};

/// Sentinel used in files and APIs for the unmodified strain.
pub const WILD_TYPE: &str = "WT";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactsError {
    #[error("line {line}: syntax error: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: undeclared {kind} `{id}`")]
    Undeclared { line: usize, kind: &'static str, id: String },
    #[error("line {line}: duplicate {kind} `{id}`")]
    Duplicate { line: usize, kind: &'static str, id: String },
    #[error("line {line}: reaction `{id}` has no substrates and no products")]
    EmptyReaction { line: usize, id: String },
    #[error("line {line}: reaction `{id}` lists `{metabolite}` as both substrate and product")]
    OverlappingSides { line: usize, id: String, metabolite: String },
    #[error("line {line}: medium `{medium}` uses unpriced metabolite `{metabolite}`")]
    UnpricedMetabolite { line: usize, medium: String, metabolite: String },
    #[error("line {line}: negative amount for `{id}`")]
    NegativeAmount { line: usize, id: String },
    #[error("line {line}: unknown phenotype label `{label}`")]
    UnknownPhenotype { line: usize, label: String },
}

/// Binary growth phenotype of a strain on a medium.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phenotype {
    Growth,
    NoGrowth,
}

impl Phenotype {
    pub fn from_growth(grows: bool) -> Self {
        if grows {
            Phenotype::Growth
        } else {
            Phenotype::NoGrowth
        }
    }

    pub fn grows(self) -> bool {
        self == Phenotype::Growth
    }

    pub fn label(self) -> &'static str {
        match self {
            Phenotype::Growth => "growth",
            Phenotype::NoGrowth => "no_growth",
        }
    }
}

impl fmt::Display for Phenotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown phenotype label `{0}`")]
pub struct UnknownPhenotype(pub String);

impl FromStr for Phenotype {
    type Err = UnknownPhenotype;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "growth" => Ok(Phenotype::Growth),
            "no_growth" => Ok(Phenotype::NoGrowth),
            other => Err(UnknownPhenotype(other.to_string())),
        }
    }
}

/// One auxotrophic-mutant experiment: a single-gene knockout (or the wild
/// type) grown on a named medium.
///
/// Ordering is lexicographic on (knockout, medium) with the wild type
/// sorting before every gene.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trial {
    pub knockout: Option<String>,
    pub medium: String,
}

impl Trial {
    pub fn wild_type(medium: impl Into<String>) -> Self {
        Trial { knockout: None, medium: medium.into() }
    }

    pub fn knockout(gene: impl Into<String>, medium: impl Into<String>) -> Self {
        Trial { knockout: Some(gene.into()), medium: medium.into() }
    }

    /// The gene column as written in files: the gene id or `WT`.
    pub fn gene_label(&self) -> &str {
        self.knockout.as_deref().unwrap_or(WILD_TYPE)
    }

    pub fn from_labels(gene: &str, medium: &str) -> Self {
        if gene == WILD_TYPE {
            Trial::wild_type(medium)
        } else {
            Trial::knockout(gene, medium)
        }
    }
}

impl fmt::Display for Trial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.knockout {
            Some(g) => write!(f, "(Δ{g}, {})", self.medium),
            None => write!(f, "(WT, {})", self.medium),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TrialRepr {
    gene: String,
    medium: String,
}

impl Serialize for Trial {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        TrialRepr { gene: self.gene_label().to_string(), medium: self.medium.clone() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Trial {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = TrialRepr::deserialize(deserializer)?;
        Ok(Trial::from_labels(&repr.gene, &repr.medium))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub trial: Trial,
    pub phenotype: Phenotype,
}

impl Observation {
    pub fn new(trial: Trial, phenotype: Phenotype) -> Self {
        Observation { trial, phenotype }
    }
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.trial, self.phenotype)
    }
}

/// Identifiers are case-sensitive tokens over `[A-Za-z0-9_.-]`.
pub fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-'))
}

/// Strips a `#` comment and surrounding whitespace.
pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => line[..i].trim(),
        None => line.trim(),
    }
}

use std::fmt;

use super::{CompiledModel, EngineError, EnzymeIdx, GeneIdx};

/// A candidate set of `codes(gene, enzyme)` facts absent from the model.
///
/// The id lists the facts as `codes(g,e)` in lexicographic order joined by
/// `;`, which makes it canonical: two hypotheses are equal iff their ids are.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Hypothesis {
    added: Vec<(GeneIdx, EnzymeIdx)>,
    id: String,
}

/// Splits a hypothesis id into its `(gene, enzyme)` name pairs.
pub fn parse_hypothesis_id(id: &str) -> Result<Vec<(String, String)>, EngineError> {
    let bad = || EngineError::MalformedHypothesis(id.to_string());
    let mut out = Vec::new();
    for part in id.split(';') {
        let inner = part.trim().strip_prefix("codes(").and_then(|s| s.strip_suffix(')')).ok_or_else(bad)?;
        let (g, e) = inner.split_once(',').ok_or_else(bad)?;
        let (g, e) = (g.trim(), e.trim());
        if !crate::facts::is_identifier(g) || !crate::facts::is_identifier(e) {
            return Err(bad());
        }
        out.push((g.to_string(), e.to_string()));
    }
    Ok(out)
}

pub fn fact_id(gene: &str, enzyme: &str) -> String {
    format!("codes({gene},{enzyme})")
}

impl Hypothesis {
    /// Builds a hypothesis from index pairs, rejecting empty sets and facts
    /// the model already contains. Duplicate pairs collapse.
    pub fn new(compiled: &CompiledModel, facts: impl IntoIterator<Item = (GeneIdx, EnzymeIdx)>) -> Result<Self, EngineError> {
        let mut keyed: Vec<(String, (GeneIdx, EnzymeIdx))> = Vec::new();
        for (g, e) in facts {
            if g.index() >= compiled.gene_count() || e.index() >= compiled.enzyme_count() {
                return Err(EngineError::MalformedHypothesis(format!("index out of range ({}, {})", g.0, e.0)));
            }
            let id = fact_id(compiled.gene_name(g), compiled.enzyme_name(e));
            if compiled.has_codes(g, e) {
                return Err(EngineError::KnownFact(id));
            }
            keyed.push((id, (g, e)));
        }
        if keyed.is_empty() {
            return Err(EngineError::MalformedHypothesis("empty hypothesis".into()));
        }
        keyed.sort();
        keyed.dedup();
        let id = keyed.iter().map(|(s, _)| s.as_str()).collect::<Vec<_>>().join(";");
        Ok(Hypothesis { added: keyed.into_iter().map(|(_, p)| p).collect(), id })
    }

    /// Singleton hypothesis `{codes(g,e)}`.
    pub fn single(compiled: &CompiledModel, gene: GeneIdx, enzyme: EnzymeIdx) -> Result<Self, EngineError> {
        Hypothesis::new(compiled, [(gene, enzyme)])
    }

    /// Resolves a `codes(g,e)[;...]` id against the compiled model.
    pub fn parse(compiled: &CompiledModel, id: &str) -> Result<Self, EngineError> {
        let pairs = parse_hypothesis_id(id)?;
        let mut facts = Vec::with_capacity(pairs.len());
        for (g, e) in pairs {
            let gi = compiled.gene_index(&g).ok_or(EngineError::UnknownGene(g))?;
            let ei = compiled.enzyme_index(&e).ok_or(EngineError::UnknownEnzyme(e))?;
            facts.push((gi, ei));
        }
        Hypothesis::new(compiled, facts)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn added(&self) -> &[(GeneIdx, EnzymeIdx)] {
        &self.added
    }

    /// Genes whose knockout this hypothesis can affect.
    pub fn genes(&self) -> impl Iterator<Item = GeneIdx> + '_ {
        self.added.iter().map(|&(g, _)| g)
    }

    pub fn affects(&self, gene: GeneIdx) -> bool {
        self.added.iter().any(|&(g, _)| g == gene)
    }

    /// The added facts as `(gene, enzyme)` names.
    pub fn named_facts(&self, compiled: &CompiledModel) -> Vec<(String, String)> {
        self.added
            .iter()
            .map(|&(g, e)| (compiled.gene_name(g).to_string(), compiled.enzyme_name(e).to_string()))
            .collect()
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

use indexmap::{IndexMap, IndexSet};

use super::{BitSet, EngineError, EnzymeIdx, GeneIdx, MediumIdx, TrialKey};
use crate::facts::{Environment, MetabolicModel, Trial};

/// One direction of a reaction. Reversible reactions compile to two of
/// these, forward first.
#[derive(Clone, Debug)]
pub struct DirectedReaction {
    /// Position of the source reaction in the model's reaction list.
    pub reaction: usize,
    pub reverse: bool,
    pub substrate_mask: BitSet,
    pub product_mask: BitSet,
    pub substrates: Vec<u32>,
    pub products: Vec<u32>,
    /// Catalysing enzymes; empty for spontaneous reactions.
    pub enzymes: Vec<u32>,
}

/// A model interned into dense indices and bitmasks.
///
/// Metabolites, genes and enzymes are numbered in declaration order. Media
/// are attached from an [`Environment`] and numbered in file order.
#[derive(Clone, Debug)]
pub struct CompiledModel {
    metabolites: IndexSet<String>,
    genes: IndexSet<String>,
    enzymes: IndexSet<String>,
    reaction_ids: Vec<String>,
    media: IndexMap<String, BitSet>,
    pub(crate) directed: Vec<DirectedReaction>,
    /// Per enzyme, the genes that must all be present for it to be available.
    enzyme_genes: Vec<BitSet>,
    essential: BitSet,
    // reverse indices used by the simulator
    pub(crate) gene_enzymes: Vec<Vec<u32>>,
    pub(crate) enzyme_reactions: Vec<Vec<u32>>,
    pub(crate) consumers: Vec<Vec<u32>>,
    pub(crate) sources: Vec<u32>,
    pub(crate) substrate_counts: Vec<u32>,
}

/// Compiles a validated model. The result carries no media; see
/// [`compile_with_environment`].
pub fn compile(model: &MetabolicModel) -> CompiledModel {
    let metabolites = model.metabolites.clone();
    let genes = model.genes.clone();
    let enzymes = model.enzymes.clone();
    let m_count = metabolites.len();
    let idx = |set: &IndexSet<String>, id: &str| set.get_index_of(id).expect("validated model") as u32;

    let mut enzyme_genes = vec![BitSet::new(genes.len()); enzymes.len()];
    let mut gene_enzymes = vec![Vec::new(); genes.len()];
    for (g, e) in &model.codes {
        let (gi, ei) = (idx(&genes, g), idx(&enzymes, e));
        enzyme_genes[ei as usize].insert(gi as usize);
        gene_enzymes[gi as usize].push(ei);
    }

    let mut directed = Vec::new();
    for (ri, r) in model.reactions.iter().enumerate() {
        let subs: Vec<u32> = r.substrates.iter().map(|m| idx(&metabolites, m)).collect();
        let prods: Vec<u32> = r.products.iter().map(|m| idx(&metabolites, m)).collect();
        let enz: Vec<u32> = r.enzymes.iter().map(|e| idx(&enzymes, e)).collect();
        let mask = |ids: &[u32]| BitSet::from_indices(m_count, ids.iter().map(|&i| i as usize));
        directed.push(DirectedReaction {
            reaction: ri,
            reverse: false,
            substrate_mask: mask(&subs),
            product_mask: mask(&prods),
            substrates: subs.clone(),
            products: prods.clone(),
            enzymes: enz.clone(),
        });
        if r.reversible {
            directed.push(DirectedReaction {
                reaction: ri,
                reverse: true,
                substrate_mask: mask(&prods),
                product_mask: mask(&subs),
                substrates: prods,
                products: subs,
                enzymes: enz,
            });
        }
    }

    let mut enzyme_reactions = vec![Vec::new(); enzymes.len()];
    let mut consumers = vec![Vec::new(); m_count];
    let mut sources = Vec::new();
    for (di, d) in directed.iter().enumerate() {
        for &e in &d.enzymes {
            enzyme_reactions[e as usize].push(di as u32);
        }
        for &m in &d.substrates {
            consumers[m as usize].push(di as u32);
        }
        if d.substrates.is_empty() {
            sources.push(di as u32);
        }
    }
    let substrate_counts = directed.iter().map(|d| d.substrates.len() as u32).collect();
    let essential = BitSet::from_indices(m_count, model.essential.iter().map(|m| idx(&metabolites, m) as usize));

    CompiledModel {
        metabolites,
        genes,
        enzymes,
        reaction_ids: model.reactions.iter().map(|r| r.id.clone()).collect(),
        media: IndexMap::new(),
        directed,
        enzyme_genes,
        essential,
        gene_enzymes,
        enzyme_reactions,
        consumers,
        sources,
        substrate_counts,
    }
}

/// Compiles a model and attaches the environment's media as metabolite masks.
pub fn compile_with_environment(model: &MetabolicModel, env: &Environment) -> Result<CompiledModel, EngineError> {
    let mut compiled = compile(model);
    compiled.attach_media(env)?;
    Ok(compiled)
}

impl CompiledModel {
    /// Replaces the medium table with the environment's media.
    pub fn attach_media(&mut self, env: &Environment) -> Result<(), EngineError> {
        let mut media = IndexMap::new();
        for (id, nutrients) in &env.media {
            let mut mask = BitSet::new(self.metabolites.len());
            for n in nutrients {
                let i = self.metabolites.get_index_of(n).ok_or_else(|| EngineError::UndeclaredNutrient {
                    medium: id.clone(),
                    metabolite: n.clone(),
                })?;
                mask.insert(i);
            }
            media.insert(id.clone(), mask);
        }
        self.media = media;
        Ok(())
    }

    pub fn metabolite_count(&self) -> usize {
        self.metabolites.len()
    }

    pub fn gene_count(&self) -> usize {
        self.genes.len()
    }

    pub fn enzyme_count(&self) -> usize {
        self.enzymes.len()
    }

    pub fn medium_count(&self) -> usize {
        self.media.len()
    }

    pub fn directed_reactions(&self) -> &[DirectedReaction] {
        &self.directed
    }

    pub fn essential_mask(&self) -> &BitSet {
        &self.essential
    }

    pub fn enzyme_genes(&self, e: EnzymeIdx) -> &BitSet {
        &self.enzyme_genes[e.index()]
    }

    pub fn medium_mask(&self, m: MediumIdx) -> &BitSet {
        &self.media[m.index()]
    }

    pub fn metabolite_index(&self, id: &str) -> Option<usize> {
        self.metabolites.get_index_of(id)
    }

    pub fn metabolite_name(&self, i: usize) -> &str {
        &self.metabolites[i]
    }

    pub fn gene_index(&self, id: &str) -> Option<GeneIdx> {
        self.genes.get_index_of(id).map(GeneIdx::from)
    }

    pub fn gene_name(&self, g: GeneIdx) -> &str {
        &self.genes[g.index()]
    }

    pub fn enzyme_index(&self, id: &str) -> Option<EnzymeIdx> {
        self.enzymes.get_index_of(id).map(EnzymeIdx::from)
    }

    pub fn enzyme_name(&self, e: EnzymeIdx) -> &str {
        &self.enzymes[e.index()]
    }

    pub fn medium_index(&self, id: &str) -> Option<MediumIdx> {
        self.media.get_index_of(id).map(MediumIdx::from)
    }

    pub fn medium_name(&self, m: MediumIdx) -> &str {
        self.media.get_index(m.index()).expect("medium index in range").0
    }

    pub fn reaction_id(&self, i: usize) -> &str {
        &self.reaction_ids[i]
    }

    /// Whether the model itself already has `codes(g, e)`.
    pub fn has_codes(&self, g: GeneIdx, e: EnzymeIdx) -> bool {
        self.enzyme_genes[e.index()].contains(g.index())
    }

    pub fn metabolite_mask<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Option<BitSet> {
        let mut mask = BitSet::new(self.metabolites.len());
        for id in ids {
            mask.insert(self.metabolite_index(id)?);
        }
        Some(mask)
    }

    pub fn resolve_trial(&self, trial: &Trial) -> Result<TrialKey, EngineError> {
        let medium = self
            .medium_index(&trial.medium)
            .ok_or_else(|| EngineError::UnknownMedium(trial.medium.clone()))?;
        let knockout = match &trial.knockout {
            Some(g) => Some(self.gene_index(g).ok_or_else(|| EngineError::UnknownGene(g.clone()))?),
            None => None,
        };
        Ok(TrialKey { knockout, medium })
    }

    pub fn trial(&self, key: TrialKey) -> Trial {
        Trial {
            knockout: key.knockout.map(|g| self.gene_name(g).to_string()),
            medium: self.medium_name(key.medium).to_string(),
        }
    }

    /// Every `(knockout | WT) x medium` pair, wild type first, then genes
    /// and media in declaration order.
    pub fn design_space(&self) -> Vec<TrialKey> {
        let knockouts = std::iter::once(None).chain((0..self.genes.len()).map(|g| Some(GeneIdx::from(g))));
        knockouts
            .flat_map(|k| (0..self.media.len()).map(move |m| TrialKey { knockout: k, medium: MediumIdx::from(m) }))
            .collect()
    }
}

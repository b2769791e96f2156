//! Seeded synthetic models for benchmarks, campaign experiments and
//! randomized tests.

use indexmap::IndexSet;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{compile_with_environment, simulate_batch, TrialKey};
use crate::facts::{Cost, Environment, MetabolicModel, Reaction};

/// Shape of a structured synthetic model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthParams {
    pub genes: usize,
    pub reactions: usize,
    pub metabolites: usize,
    pub media: usize,
    pub seed: u64,
}

impl SynthParams {
    /// Same size as the published E. coli iML1515 reconstruction
    /// (1515 genes, 2719 reactions).
    pub fn iml1515_scale(seed: u64) -> Self {
        SynthParams { genes: 1515, reactions: 2719, metabolites: 1800, media: 8, seed }
    }
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len().max(2);
    (0..n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

fn set_of(names: &[String], idx: impl IntoIterator<Item = usize>) -> IndexSet<String> {
    idx.into_iter().map(|i| names[i].clone()).collect()
}

fn price(rng: &mut impl Rng, lo_cents: i64, hi_cents: i64) -> Cost {
    Cost::from_cents(rng.gen_range(lo_cents..=hi_cents))
}

/// Generates a model whose wild type grows on the minimal medium.
///
/// A backbone of reaction chains, each producing one new metabolite from
/// already reachable ones, connects the nutrients to every metabolite; the
/// remaining reactions are random extra edges that create alternative
/// routes. Essential metabolites are drawn from the deeper half of the
/// backbone. Medium 0 holds the nutrients; every other medium adds one to
/// three backbone intermediates as supplements.
pub fn generate(p: &SynthParams) -> (MetabolicModel, Environment) {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let m_count = p.metabolites.max(4);
    let n_nutrients = (m_count / 40).clamp(2, 40);
    let mets = names("m", m_count);
    let mut reachable: Vec<usize> = (0..n_nutrients).collect();

    struct Draft {
        subs: Vec<usize>,
        prods: Vec<usize>,
        reversible: bool,
    }
    let mut drafts: Vec<Draft> = Vec::with_capacity(p.reactions);
    let mut backbone = Vec::new();
    for target in n_nutrients..m_count {
        if drafts.len() >= p.reactions {
            break;
        }
        let pick = |rng: &mut ChaCha8Rng, reachable: &[usize]| {
            if rng.gen_bool(0.7) {
                let lo = reachable.len().saturating_sub(20);
                reachable[rng.gen_range(lo..reachable.len())]
            } else {
                reachable[rng.gen_range(0..reachable.len())]
            }
        };
        let mut subs = vec![pick(&mut rng, &reachable)];
        if rng.gen_bool(0.3) {
            let extra = reachable[rng.gen_range(0..reachable.len())];
            if extra != subs[0] {
                subs.push(extra);
            }
        }
        drafts.push(Draft { subs, prods: vec![target], reversible: rng.gen_bool(0.05) });
        reachable.push(target);
        backbone.push(target);
    }
    while drafts.len() < p.reactions {
        let n_sub = rng.gen_range(1..=2);
        let n_prod = rng.gen_range(1..=2);
        let picked: Vec<usize> = rand::seq::index::sample(&mut rng, m_count, n_sub + n_prod).into_vec();
        drafts.push(Draft {
            subs: picked[..n_sub].to_vec(),
            prods: picked[n_sub..].to_vec(),
            reversible: rng.gen_bool(0.15),
        });
    }

    let n_enzymes = (p.reactions * 3 / 5).max(1);
    let enzymes = names("e", n_enzymes);
    let genes = names("g", p.genes.max(1));
    let spontaneous: Vec<bool> = drafts.iter().map(|_| rng.gen_bool(0.03)).collect();
    let mut order: Vec<usize> = (0..drafts.len()).filter(|&i| !spontaneous[i]).collect();
    order.shuffle(&mut rng);
    let mut catalysts: Vec<Vec<usize>> = vec![Vec::new(); drafts.len()];
    for (slot, &r) in order.iter().enumerate() {
        let e = if slot < n_enzymes { slot } else { rng.gen_range(0..n_enzymes) };
        catalysts[r].push(e);
        if rng.gen_bool(0.1) {
            let iso = rng.gen_range(0..n_enzymes);
            if iso != e {
                catalysts[r].push(iso);
            }
        }
    }

    let mut model = MetabolicModel {
        metabolites: mets.iter().cloned().collect(),
        genes: genes.iter().cloned().collect(),
        enzymes: enzymes.iter().cloned().collect(),
        ..MetabolicModel::default()
    };
    let mut gene_order: Vec<usize> = (0..genes.len()).collect();
    gene_order.shuffle(&mut rng);
    for e in 0..n_enzymes {
        let g = gene_order[e % genes.len()];
        model.codes.insert((genes[g].clone(), enzymes[e].clone()));
        if rng.gen_bool(0.15) {
            let g2 = rng.gen_range(0..genes.len());
            model.codes.insert((genes[g2].clone(), enzymes[e].clone()));
        }
    }
    let rxn_names = names("r", drafts.len());
    for (i, d) in drafts.into_iter().enumerate() {
        model.reactions.push(Reaction {
            id: rxn_names[i].clone(),
            enzymes: catalysts[i].iter().map(|&e| enzymes[e].clone()).collect(),
            substrates: set_of(&mets, d.subs),
            products: set_of(&mets, d.prods),
            reversible: d.reversible,
        });
    }

    let deep = &backbone[backbone.len() / 2..];
    let n_essential = (m_count / 60).clamp(1, 10).min(deep.len().max(1));
    if deep.is_empty() {
        model.essential.insert(mets[m_count - 1].clone());
    } else {
        for i in rand::seq::index::sample(&mut rng, deep.len(), n_essential) {
            model.essential.insert(mets[deep[i]].clone());
        }
    }

    let mut env = Environment { base_cost: Cost::from_cents(100), ..Environment::default() };
    for &n in &(0..n_nutrients).collect::<Vec<_>>() {
        env.prices.insert(mets[n].clone(), price(&mut rng, 10, 200));
    }
    let minimal: IndexSet<String> = (0..n_nutrients).map(|i| mets[i].clone()).collect();
    let media_names = names("M", p.media.max(1));
    env.media.insert(media_names[0].clone(), minimal.clone());
    for name in &media_names[1..] {
        let mut medium = minimal.clone();
        if !backbone.is_empty() {
            for _ in 0..rng.gen_range(1..=3) {
                let s = &mets[backbone[rng.gen_range(0..backbone.len())]];
                if !env.prices.contains_key(s) {
                    env.prices.insert(s.clone(), price(&mut rng, 100, 4000));
                }
                medium.insert(s.clone());
            }
        }
        env.media.insert(name.clone(), medium);
    }
    (model, env)
}

/// Picks a `codes` fact whose removal changes at least one knockout
/// phenotype, returning the incomplete model and the removed fact. Returns
/// `None` when no fact is observable.
pub fn observable_deletion(
    model: &MetabolicModel,
    env: &Environment,
    seed: u64,
    workers: usize,
) -> Option<(MetabolicModel, (String, String))> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_de1e);
    let mut facts: Vec<(String, String)> = model.codes.iter().cloned().collect();
    facts.shuffle(&mut rng);
    let truth = compile_with_environment(model, env).ok()?;
    for fact in facts {
        let incomplete = model.without_codes([&fact]);
        let compiled = compile_with_environment(&incomplete, env).ok()?;
        let gene = truth.gene_index(&fact.0)?;
        let trials: Vec<TrialKey> =
            (0..truth.medium_count()).map(|m| TrialKey { knockout: Some(gene), medium: m.into() }).collect();
        let a = simulate_batch(&truth, &[None], &trials, workers);
        let b = simulate_batch(&compiled, &[None], &trials, workers);
        if a != b {
            return Some((incomplete, fact));
        }
    }
    None
}

/// Unstructured random model for oracle comparisons: up to
/// `max_metabolites` metabolites and `max_reactions` reactions, with up to
/// 30% reversible and up to 10% spontaneous reactions. Substrate-free source
/// reactions occur.
pub fn random_model(rng: &mut impl Rng, max_metabolites: usize, max_reactions: usize) -> MetabolicModel {
    let m_count = rng.gen_range(1..=max_metabolites.max(1));
    let r_count = rng.gen_range(0..=max_reactions);
    let g_count = rng.gen_range(1..=8);
    let e_count = rng.gen_range(1..=8);
    let rev_frac = rng.gen_range(0.0..=0.3);
    let spont_frac = rng.gen_range(0.0..=0.1);
    let mets = names("m", m_count);
    let genes = names("g", g_count);
    let enzymes = names("e", e_count);
    let mut model = MetabolicModel {
        metabolites: mets.iter().cloned().collect(),
        genes: genes.iter().cloned().collect(),
        enzymes: enzymes.iter().cloned().collect(),
        ..MetabolicModel::default()
    };
    for g in &genes {
        for e in &enzymes {
            if rng.gen_bool(0.25) {
                model.codes.insert((g.clone(), e.clone()));
            }
        }
    }
    let rxn = names("r", r_count);
    for id in rxn {
        let n_sub = if m_count > 1 { rng.gen_range(0..=3.min(m_count - 1)) } else { 0 };
        let n_prod = rng.gen_range(1..=3.min(m_count - n_sub).max(1));
        let picked = rand::seq::index::sample(rng, m_count, (n_sub + n_prod).min(m_count)).into_vec();
        let enz = if rng.gen_bool(spont_frac) {
            IndexSet::new()
        } else {
            let k = rng.gen_range(1..=2.min(e_count));
            set_of(&enzymes, rand::seq::index::sample(rng, e_count, k).into_vec())
        };
        model.reactions.push(Reaction {
            id,
            enzymes: enz,
            substrates: set_of(&mets, picked[..n_sub].iter().copied()),
            products: set_of(&mets, picked[n_sub..].iter().copied()),
            reversible: rng.gen_bool(rev_frac),
        });
    }
    let n_essential = rng.gen_range(1..=3.min(m_count));
    for i in rand::seq::index::sample(rng, m_count, n_essential) {
        model.essential.insert(mets[i].clone());
    }
    model
}

/// Random medium over a model's metabolites (each included with
/// probability `density`).
pub fn random_medium(rng: &mut impl Rng, model: &MetabolicModel, density: f64) -> IndexSet<String> {
    model.metabolites.iter().filter(|_| rng.gen_bool(density)).cloned().collect()
}

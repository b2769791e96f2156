use std::collections::HashMap;
use std::fmt;

use indexmap::IndexSet;

use super::{is_identifier, strip_comment, FactsError, WILD_TYPE};

/// A directed or reversible reaction over metabolite sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reaction {
    pub id: String,
    /// Catalysing enzymes; any one suffices. Empty means spontaneous.
    pub enzymes: IndexSet<String>,
    pub substrates: IndexSet<String>,
    pub products: IndexSet<String>,
    pub reversible: bool,
}

/// Logical genome-scale model: declarations plus `codes`, `reaction` and
/// `essential` facts. Declaration order is preserved and fixes the dense
/// indices assigned on compilation.
///
/// Equality is set-wise on every field except `reactions`, which compare
/// as a list.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MetabolicModel {
    pub metabolites: IndexSet<String>,
    pub genes: IndexSet<String>,
    pub enzymes: IndexSet<String>,
    pub codes: IndexSet<(String, String)>,
    pub reactions: Vec<Reaction>,
    pub essential: IndexSet<String>,
}

impl MetabolicModel {
    /// Checks the referential invariants. Errors carry line 0 since there is
    /// no source file to point at.
    pub fn validate(&self) -> Result<(), FactsError> {
        let undeclared = |kind, id: &str| FactsError::Undeclared { line: 0, kind, id: id.to_string() };
        if self.genes.contains(WILD_TYPE) {
            return Err(FactsError::Syntax { line: 0, reason: format!("`{WILD_TYPE}` is reserved for the wild type") });
        }
        for (g, e) in &self.codes {
            if !self.genes.contains(g) {
                return Err(undeclared("gene", g));
            }
            if !self.enzymes.contains(e) {
                return Err(undeclared("enzyme", e));
            }
        }
        let mut reaction_ids = IndexSet::new();
        for r in &self.reactions {
            if !reaction_ids.insert(r.id.as_str()) {
                return Err(FactsError::Duplicate { line: 0, kind: "reaction", id: r.id.clone() });
            }
            check_reaction(self, r, 0)?;
        }
        for m in &self.essential {
            if !self.metabolites.contains(m) {
                return Err(undeclared("metabolite", m));
            }
        }
        Ok(())
    }

    pub fn reaction(&self, id: &str) -> Option<&Reaction> {
        self.reactions.iter().find(|r| r.id == id)
    }

    /// Copy of the model with extra `codes` facts appended.
    pub fn with_codes<'a>(&self, extra: impl IntoIterator<Item = &'a (String, String)>) -> MetabolicModel {
        let mut out = self.clone();
        for pair in extra {
            out.codes.insert(pair.clone());
        }
        out
    }

    /// Copy of the model with the given `codes` facts removed.
    pub fn without_codes<'a>(&self, removed: impl IntoIterator<Item = &'a (String, String)>) -> MetabolicModel {
        let mut out = self.clone();
        for pair in removed {
            out.codes.shift_remove(pair);
        }
        out
    }
}

fn check_reaction(model: &MetabolicModel, r: &Reaction, line: usize) -> Result<(), FactsError> {
    for e in &r.enzymes {
        if !model.enzymes.contains(e) {
            return Err(FactsError::Undeclared { line, kind: "enzyme", id: e.clone() });
        }
    }
    for m in r.substrates.iter().chain(&r.products) {
        if !model.metabolites.contains(m) {
            return Err(FactsError::Undeclared { line, kind: "metabolite", id: m.clone() });
        }
    }
    if r.substrates.is_empty() && r.products.is_empty() {
        return Err(FactsError::EmptyReaction { line, id: r.id.clone() });
    }
    if let Some(m) = r.substrates.iter().find(|m| r.products.contains(*m)) {
        return Err(FactsError::OverlappingSides { line, id: r.id.clone(), metabolite: m.clone() });
    }
    Ok(())
}

fn join_or_dash(items: &IndexSet<String>) -> String {
    if items.is_empty() {
        "-".to_string()
    } else {
        items.iter().map(String::as_str).collect::<Vec<_>>().join(",")
    }
}

/// Serialises the model back into the fact format accepted by
/// [`parse_model`].
impl fmt::Display for MetabolicModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.metabolites {
            writeln!(f, "metabolite {m}")?;
        }
        for g in &self.genes {
            writeln!(f, "gene {g}")?;
        }
        for e in &self.enzymes {
            writeln!(f, "enzyme {e}")?;
        }
        for (g, e) in &self.codes {
            writeln!(f, "codes {g} {e}")?;
        }
        for r in &self.reactions {
            writeln!(
                f,
                "reaction {} rev={} enz={} sub={} prod={}",
                r.id,
                u8::from(r.reversible),
                join_or_dash(&r.enzymes),
                join_or_dash(&r.substrates),
                join_or_dash(&r.products)
            )?;
        }
        for m in &self.essential {
            writeln!(f, "essential {m}")?;
        }
        Ok(())
    }
}

pub(crate) fn parse_id(tok: &str, line: usize) -> Result<String, FactsError> {
    if is_identifier(tok) {
        Ok(tok.to_string())
    } else {
        Err(FactsError::Syntax { line, reason: format!("invalid identifier `{tok}`") })
    }
}

/// Parses a comma list where `-` (or nothing) denotes the empty set.
pub(crate) fn parse_list(value: &str, line: usize) -> Result<IndexSet<String>, FactsError> {
    let mut out = IndexSet::new();
    if value.is_empty() || value == "-" {
        return Ok(out);
    }
    for tok in value.split(',') {
        let id = parse_id(tok, line)?;
        if !out.insert(id.clone()) {
            return Err(FactsError::Duplicate { line, kind: "list entry", id });
        }
    }
    Ok(out)
}

fn declare(set: &mut IndexSet<String>, id: String, kind: &'static str, line: usize) -> Result<(), FactsError> {
    if set.insert(id.clone()) {
        Ok(())
    } else {
        Err(FactsError::Duplicate { line, kind, id })
    }
}

fn expect_args(fields: &[&str], n: usize, line: usize) -> Result<(), FactsError> {
    if fields.len() == n + 1 {
        Ok(())
    } else {
        Err(FactsError::Syntax {
            line,
            reason: format!("`{}` expects {n} argument(s), found {}", fields[0], fields.len() - 1),
        })
    }
}

fn parse_reaction(fields: &[&str], line: usize) -> Result<Reaction, FactsError> {
    expect_args(fields, 5, line)?;
    let id = parse_id(fields[1], line)?;
    let mut rev = None;
    let mut enz = None;
    let mut sub = None;
    let mut prod = None;
    for field in &fields[2..] {
        let Some((key, value)) = field.split_once('=') else {
            return Err(FactsError::Syntax { line, reason: format!("expected key=value, found `{field}`") });
        };
        let slot = match key {
            "rev" => {
                let flag = match value {
                    "0" => false,
                    "1" => true,
                    _ => return Err(FactsError::Syntax { line, reason: format!("rev must be 0 or 1, found `{value}`") }),
                };
                if rev.replace(flag).is_some() {
                    return Err(FactsError::Syntax { line, reason: "repeated key `rev`".into() });
                }
                continue;
            }
            "enz" => &mut enz,
            "sub" => &mut sub,
            "prod" => &mut prod,
            other => return Err(FactsError::Syntax { line, reason: format!("unknown reaction key `{other}`") }),
        };
        if slot.replace(parse_list(value, line)?).is_some() {
            return Err(FactsError::Syntax { line, reason: format!("repeated key `{key}`") });
        }
    }
    let missing = |k: &str| FactsError::Syntax { line, reason: format!("reaction `{id}` is missing `{k}=`") };
    Ok(Reaction {
        reversible: rev.ok_or_else(|| missing("rev"))?,
        enzymes: enz.ok_or_else(|| missing("enz"))?,
        substrates: sub.ok_or_else(|| missing("sub"))?,
        products: prod.ok_or_else(|| missing("prod"))?,
        id,
    })
}

/// Parses a `.gem` fact file.
///
/// Declarations may appear in any order; references are resolved once the
/// whole file has been read and errors point at the referencing line.
pub fn parse_model(text: &str) -> Result<MetabolicModel, FactsError> {
    let mut model = MetabolicModel::default();
    let mut codes_lines = Vec::new();
    let mut reaction_lines = Vec::new();
    let mut essential_lines = Vec::new();
    let mut reaction_ids: HashMap<String, usize> = HashMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = strip_comment(raw);
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        match fields[0] {
            "metabolite" => {
                expect_args(&fields, 1, line)?;
                declare(&mut model.metabolites, parse_id(fields[1], line)?, "metabolite", line)?;
            }
            "gene" => {
                expect_args(&fields, 1, line)?;
                let id = parse_id(fields[1], line)?;
                if id == WILD_TYPE {
                    return Err(FactsError::Syntax { line, reason: format!("`{WILD_TYPE}` is reserved for the wild type") });
                }
                declare(&mut model.genes, id, "gene", line)?;
            }
            "enzyme" => {
                expect_args(&fields, 1, line)?;
                declare(&mut model.enzymes, parse_id(fields[1], line)?, "enzyme", line)?;
            }
            "essential" => {
                expect_args(&fields, 1, line)?;
                let id = parse_id(fields[1], line)?;
                if !model.essential.insert(id.clone()) {
                    return Err(FactsError::Duplicate { line, kind: "essential", id });
                }
                essential_lines.push(line);
            }
            "codes" => {
                expect_args(&fields, 2, line)?;
                let pair = (parse_id(fields[1], line)?, parse_id(fields[2], line)?);
                if !model.codes.insert(pair.clone()) {
                    return Err(FactsError::Duplicate { line, kind: "codes fact", id: format!("codes({},{})", pair.0, pair.1) });
                }
                codes_lines.push(line);
            }
            "reaction" => {
                let r = parse_reaction(&fields, line)?;
                if reaction_ids.insert(r.id.clone(), line).is_some() {
                    return Err(FactsError::Duplicate { line, kind: "reaction", id: r.id });
                }
                model.reactions.push(r);
                reaction_lines.push(line);
            }
            other => {
                return Err(FactsError::Syntax { line, reason: format!("unknown fact `{other}`") });
            }
        }
    }

    for ((g, e), &line) in model.codes.iter().zip(&codes_lines) {
        if !model.genes.contains(g) {
            return Err(FactsError::Undeclared { line, kind: "gene", id: g.clone() });
        }
        if !model.enzymes.contains(e) {
            return Err(FactsError::Undeclared { line, kind: "enzyme", id: e.clone() });
        }
    }
    for (r, &line) in model.reactions.iter().zip(&reaction_lines) {
        check_reaction(&model, r, line)?;
    }
    for (m, &line) in model.essential.iter().zip(&essential_lines) {
        if !model.metabolites.contains(m) {
            return Err(FactsError::Undeclared { line, kind: "metabolite", id: m.clone() });
        }
    }
    Ok(model)
}

use std::fmt;

use indexmap::{IndexMap, IndexSet};

use super::model::{parse_id, parse_list};
use super::{strip_comment, Cost, FactsError};

/// Growth media and the prices used to charge trials.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Environment {
    pub media: IndexMap<String, IndexSet<String>>,
    pub prices: IndexMap<String, Cost>,
    pub base_cost: Cost,
}

impl Environment {
    pub fn medium(&self, id: &str) -> Option<&IndexSet<String>> {
        self.media.get(id)
    }

    pub fn price(&self, metabolite: &str) -> Option<Cost> {
        self.prices.get(metabolite).copied()
    }
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "base_cost {}", self.base_cost)?;
        for (m, p) in &self.prices {
            writeln!(f, "price {m} {p}")?;
        }
        for (id, nutrients) in &self.media {
            let list = if nutrients.is_empty() {
                "-".to_string()
            } else {
                nutrients.iter().map(String::as_str).collect::<Vec<_>>().join(",")
            };
            writeln!(f, "medium {id} {list}")?;
        }
        Ok(())
    }
}

fn parse_amount(tok: &str, id: &str, line: usize) -> Result<Cost, FactsError> {
    let cost: Cost = tok
        .parse()
        .map_err(|e: super::CostParseError| FactsError::Syntax { line, reason: e.to_string() })?;
    if cost.is_negative() {
        return Err(FactsError::NegativeAmount { line, id: id.to_string() });
    }
    Ok(cost)
}

/// Parses an environment file (`base_cost`, `price` and `medium` lines).
///
/// Prices for metabolites no medium uses are accepted. A medium may be
/// declared before the prices of its nutrients.
pub fn parse_environment(text: &str) -> Result<Environment, FactsError> {
    let mut env = Environment::default();
    let mut base_seen = false;
    let mut medium_lines = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = strip_comment(raw);
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let arity = |n: usize| {
            if fields.len() == n + 1 {
                Ok(())
            } else {
                Err(FactsError::Syntax {
                    line,
                    reason: format!("`{}` expects {n} argument(s), found {}", fields[0], fields.len() - 1),
                })
            }
        };
        match fields[0] {
            "base_cost" => {
                arity(1)?;
                if base_seen {
                    return Err(FactsError::Duplicate { line, kind: "base_cost", id: "base_cost".into() });
                }
                base_seen = true;
                env.base_cost = parse_amount(fields[1], "base_cost", line)?;
            }
            "price" => {
                arity(2)?;
                let id = parse_id(fields[1], line)?;
                let cost = parse_amount(fields[2], &id, line)?;
                if env.prices.insert(id.clone(), cost).is_some() {
                    return Err(FactsError::Duplicate { line, kind: "price", id });
                }
            }
            "medium" => {
                if fields.len() == 2 {
                    // `medium X` with nothing listed is an empty medium
                } else {
                    arity(2)?;
                }
                let id = parse_id(fields[1], line)?;
                let nutrients = parse_list(fields.get(2).copied().unwrap_or("-"), line)?;
                if env.media.insert(id.clone(), nutrients).is_some() {
                    return Err(FactsError::Duplicate { line, kind: "medium", id });
                }
                medium_lines.push(line);
            }
            other => return Err(FactsError::Syntax { line, reason: format!("unknown directive `{other}`") }),
        }
    }

    for ((id, nutrients), &line) in env.media.iter().zip(&medium_lines) {
        if let Some(m) = nutrients.iter().find(|m| !env.prices.contains_key(*m)) {
            return Err(FactsError::UnpricedMetabolite { line, medium: id.clone(), metabolite: m.clone() });
        }
    }
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const T1_ENV: &str = "base_cost 1.0\nprice A 2.0\nprice B 5.0\nmedium M_A A\nmedium M_B B\n";

    #[test]
    fn single_nutrient_medium() {
        let env = parse_environment("base_cost 1.0\nprice A 2.0\nmedium M_A A\n").unwrap();
        let m = env.medium("M_A").unwrap();
        let total: Cost = env.base_cost + m.iter().map(|n| env.price(n).unwrap()).sum::<Cost>();
        assert_eq!(total, Cost::from_cents(300));
    }

    #[test]
    fn unpriced_medium_metabolite_is_named() {
        match parse_environment("base_cost 1\nmedium M_X X\n") {
            Err(FactsError::UnpricedMetabolite { metabolite, medium, line: 2 }) => {
                assert_eq!(metabolite, "X");
                assert_eq!(medium, "M_X");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn two_media() {
        let env = parse_environment(T1_ENV).unwrap();
        assert_eq!(env.media.len(), 2);
        assert_eq!(env.price("B"), Some(Cost::from_cents(500)));
        assert_eq!(parse_environment(&env.to_string()).unwrap(), env);
    }

    #[test]
    fn rejects_negative_and_duplicates() {
        assert!(matches!(parse_environment("price A -1\n"), Err(FactsError::NegativeAmount { .. })));
        assert!(matches!(parse_environment("base_cost -0.5\n"), Err(FactsError::NegativeAmount { .. })));
        assert!(matches!(
            parse_environment("price A 1\nmedium M A\nmedium M A\n"),
            Err(FactsError::Duplicate { kind: "medium", line: 3, .. })
        ));
        assert!(matches!(parse_environment("price A 1\nprice A 2\n"), Err(FactsError::Duplicate { .. })));
        assert!(matches!(parse_environment("base_cost 1\nbase_cost 2\n"), Err(FactsError::Duplicate { .. })));
        assert!(matches!(parse_environment("price A 1.234\n"), Err(FactsError::Syntax { .. })));
    }

    #[test]
    fn unreferenced_prices_and_missing_base_cost() {
        let env = parse_environment("price Z 9.99\nmedium EMPTY -\n").unwrap();
        assert_eq!(env.base_cost, Cost::ZERO);
        assert!(env.medium("EMPTY").unwrap().is_empty());
    }
}

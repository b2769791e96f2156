use super::{Environment, FactsError, MetabolicModel, Observation, Phenotype, Trial};

const HEADER: [&str; 3] = ["gene", "medium", "phenotype"];

/// Parses a `gene,medium,phenotype` CSV of outcomes, validating every row
/// against the model's genes and the environment's media.
pub fn parse_observations(text: &str, model: &MetabolicModel, env: &Environment) -> Result<Vec<Observation>, FactsError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    let mut saw_header = false;
    for record in reader.records() {
        let record = record.map_err(|e| FactsError::Syntax {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if !saw_header {
            if record.iter().ne(HEADER.iter().copied()) {
                return Err(FactsError::Syntax { line, reason: "expected header `gene,medium,phenotype`".into() });
            }
            saw_header = true;
            continue;
        }
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 3 {
            return Err(FactsError::Syntax { line, reason: format!("expected 3 fields, found {}", record.len()) });
        }
        let trial = Trial::from_labels(&record[0], &record[1]);
        if let Some(g) = &trial.knockout {
            if !model.genes.contains(g) {
                return Err(FactsError::Undeclared { line, kind: "gene", id: g.clone() });
            }
        }
        if !env.media.contains_key(&trial.medium) {
            return Err(FactsError::Undeclared { line, kind: "medium", id: trial.medium });
        }
        let phenotype: Phenotype = record[2]
            .parse()
            .map_err(|_| FactsError::UnknownPhenotype { line, label: record[2].to_string() })?;
        out.push(Observation { trial, phenotype });
    }
    if !saw_header {
        return Err(FactsError::Syntax { line: 1, reason: "missing header `gene,medium,phenotype`".into() });
    }
    Ok(out)
}

/// Renders observations in the format read by [`parse_observations`].
pub fn write_observations(observations: &[Observation]) -> String {
    let mut out = String::from("gene,medium,phenotype\n");
    for o in observations {
        out.push_str(o.trial.gene_label());
        out.push(',');
        out.push_str(&o.trial.medium);
        out.push(',');
        out.push_str(o.phenotype.label());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facts::{parse_environment, parse_model};

    fn t1() -> (MetabolicModel, Environment) {
        let model = parse_model(crate::fixtures::T1_MODEL).unwrap();
        let env = parse_environment(crate::fixtures::T1_ENV).unwrap();
        (model, env)
    }

    #[test]
    fn parses_rows_in_order() {
        let (model, env) = t1();
        let obs = parse_observations("gene,medium,phenotype\ng2,M_A,no_growth\nWT,M_A,growth\n", &model, &env).unwrap();
        assert_eq!(
            obs,
            vec![
                Observation::new(Trial::knockout("g2", "M_A"), Phenotype::NoGrowth),
                Observation::new(Trial::wild_type("M_A"), Phenotype::Growth),
            ]
        );
        assert_eq!(parse_observations(&write_observations(&obs), &model, &env).unwrap(), obs);
    }

    #[test]
    fn unknown_label_gene_medium_and_malformed_rows() {
        let (model, env) = t1();
        let parse = |body: &str| parse_observations(&format!("gene,medium,phenotype\n{body}"), &model, &env);
        assert!(matches!(parse("g2,M_A,maybe\n"), Err(FactsError::UnknownPhenotype { line: 2, .. })));
        assert!(matches!(parse("g9,M_A,growth\n"), Err(FactsError::Undeclared { kind: "gene", .. })));
        assert!(matches!(parse("g1,M_Z,growth\n"), Err(FactsError::Undeclared { kind: "medium", .. })));
        assert!(matches!(parse("g1,M_A\n"), Err(FactsError::Syntax { line: 2, .. })));
        assert!(matches!(
            parse_observations("gene,phenotype\n", &model, &env),
            Err(FactsError::Syntax { line: 1, .. })
        ));
        assert!(parse_observations("", &model, &env).is_err());
    }
}

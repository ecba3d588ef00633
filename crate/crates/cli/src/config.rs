//! Flat `key = value` simulation configs.
//!
//! ```text
//! # EMVN pairwise, both parameters estimated
//! model = emvn
//! p = 3
//! rho = 0.5
//! sigma2 = 1
//! spec = pairwise
//! spec = pairwise known=sigma2
//! n = 500
//! replicates = 200
//! seed = 7
//! ```
//!
//! `spec` may repeat; every other key appears at most once.

use std::collections::BTreeMap;

use clik::composite::CompositeSpec;
use clik::montecarlo::{SimConfig, SimSpec};
use clik::ModelSpec;

use crate::CliError;

const KEYS: [&str; 11] = [
    "model", "p", "k", "rho", "sigma2", "mu", "theta", "spec", "n", "replicates", "seed",
];

#[derive(Debug)]
struct Entry {
    line: usize,
    value: String,
}

fn err(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("config line {line}: {msg}"))
}

pub fn parse(text: &str) -> Result<SimConfig, CliError> {
    let mut keys: BTreeMap<&str, Entry> = BTreeMap::new();
    let mut specs: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| err(line, "expected key = value"))?;
        let (k, v) = (k.trim(), v.trim().to_string());
        let key = KEYS
            .iter()
            .find(|&&known| known == k)
            .ok_or_else(|| err(line, format!("unknown key {k:?}")))?;
        if v.is_empty() {
            return Err(err(line, format!("empty value for {k}")));
        }
        let entry = Entry { line, value: v };
        if *key == "spec" {
            specs.push(entry);
        } else if let Some(prev) = keys.insert(key, entry) {
            return Err(err(line, format!("duplicate key {k} (first on line {})", prev.line)));
        }
    }

    let get = |k: &str| keys.get(k);
    let require = |k: &str| get(k).ok_or_else(|| CliError::Usage(format!("config: missing key {k}")));
    let num = |k: &str| -> Result<Option<f64>, CliError> {
        get(k)
            .map(|e| e.value.parse::<f64>().map_err(|_| err(e.line, format!("{k} must be a number, got {:?}", e.value))))
            .transpose()
    };
    let int = |k: &str| -> Result<Option<u64>, CliError> {
        get(k)
            .map(|e| e.value.parse::<u64>().map_err(|_| err(e.line, format!("{k} must be a nonnegative integer, got {:?}", e.value))))
            .transpose()
    };
    let needs = |k: &str| -> Result<f64, CliError> {
        num(k)?.ok_or_else(|| CliError::Usage(format!("config: missing key {k}")))
    };

    let model_entry = require("model")?;
    let (model, values, allowed): (ModelSpec, Vec<f64>, &[&str]) = match model_entry.value.as_str() {
        "emvn" => {
            let p = int("p")?.unwrap_or(3) as usize;
            let m = ModelSpec::emvn(p).map_err(|e| err(get("p").map_or(model_entry.line, |e| e.line), e))?;
            (m, vec![needs("rho")?, needs("sigma2")?], &["p", "rho", "sigma2"])
        }
        "trinormal" => (
            ModelSpec::tri_normal(),
            vec![needs("mu")?, needs("rho")?, needs("sigma2")?],
            &["mu", "rho", "sigma2"],
        ),
        "multinomial" => {
            let k = needs("k")?;
            let m = ModelSpec::multinomial4(k).map_err(|e| err(get("k").map_or(model_entry.line, |e| e.line), e))?;
            (m, vec![needs("theta")?], &["k", "theta"])
        }
        other => return Err(err(model_entry.line, format!("unknown model {other:?}; use emvn, trinormal or multinomial"))),
    };
    let model_keys = ["p", "k", "rho", "sigma2", "mu", "theta"];
    for k in model_keys {
        if let Some(e) = get(k) {
            if !allowed.contains(&k) {
                return Err(err(e.line, format!("key {k} does not apply to model {}", model_entry.value)));
            }
        }
    }
    let theta_true = model.params(&values).map_err(|e| err(model_entry.line, e))?;
    model.check_domain(&theta_true).map_err(|e| err(model_entry.line, e))?;

    if specs.is_empty() {
        return Err(CliError::Usage("config: at least one spec line is required".into()));
    }
    let specs = specs
        .iter()
        .map(|e| parse_spec(&e.value, model.dim(), model.param_names()).map_err(|m| err(e.line, m)))
        .collect::<Result<Vec<_>, _>>()?;

    let config = SimConfig {
        model,
        theta_true,
        specs,
        n: int("n")?.ok_or_else(|| CliError::Usage("config: missing key n".into()))? as usize,
        replicates: int("replicates")?.ok_or_else(|| CliError::Usage("config: missing key replicates".into()))? as usize,
        seed: int("seed")?.unwrap_or(clik::verify::DEFAULT_SEED),
    };
    config.validate().map_err(|e| CliError::Usage(format!("config: {e}")))?;
    Ok(config)
}

/// `pairwise`, `chain:2,3`, `margins:1,2`, each optionally followed by
/// `known=a+b`.
fn parse_spec(text: &str, dim: usize, names: &[&'static str]) -> Result<SimSpec, String> {
    let mut parts = text.split_whitespace();
    let kind = parts.next().ok_or("empty spec")?;
    let one_based = |list: &str| -> Result<Vec<usize>, String> {
        list.split(',')
            .map(|s| match s.trim().parse::<usize>() {
                Ok(i) if i >= 1 && i <= dim => Ok(i - 1),
                _ => Err(format!("bad index {s:?} in {kind}; use 1..={dim}")),
            })
            .collect()
    };
    let spec = match kind {
        "independence" => CompositeSpec::independence(dim),
        "pairwise" => CompositeSpec::pairwise(dim),
        "full-conditional" => CompositeSpec::full_conditional(dim),
        "full" => CompositeSpec::full(dim),
        _ => match kind.split_once(':') {
            Some(("chain", list)) => CompositeSpec::chain(&one_based(list)?).map_err(|e| e.to_string())?,
            Some(("margins", list)) => CompositeSpec::margins(&one_based(list)?).map_err(|e| e.to_string())?,
            _ => return Err(format!("unknown spec {kind:?}")),
        },
    };
    let mut sim = SimSpec::new(spec);
    for extra in parts {
        let list = extra
            .strip_prefix("known=")
            .ok_or_else(|| format!("unexpected {extra:?}; only known=... may follow the spec"))?;
        for name in list.split('+') {
            let n = names
                .iter()
                .find(|n| **n == name)
                .ok_or_else(|| format!("unknown parameter {name:?}"))?;
            sim = sim.with_known(&[*n]);
        }
    }
    Ok(sim)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "model = emvn\np = 3\nrho = 0.5\nsigma2 = 1\nspec = pairwise\nn = 500\nreplicates = 200\nseed = 1\n";

    #[test]
    fn minimal_config() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!((c.n, c.replicates, c.seed), (500, 200, 1));
        assert_eq!(c.specs.len(), 1);
        assert_eq!(c.specs[0].label(), "pairwise");
    }

    #[test]
    fn specs_with_known_parameters() {
        let text = format!("{MINIMAL}spec = pairwise known=sigma2\nspec = chain:2,3 # comment\n");
        let c = parse(&text).unwrap();
        assert_eq!(c.specs[1].label(), "pairwise|known=sigma2");
        assert_eq!(c.specs[2].label(), "chain:2,3");
    }

    #[test]
    fn errors_name_the_line_and_key() {
        let e = parse(&format!("{MINIMAL}colour = blue\n")).unwrap_err().to_string();
        assert!(e.contains("line 9") && e.contains("colour"), "{e}");
        let e = parse(&MINIMAL.replace("n = 500", "n = 500\nn = 10")).unwrap_err().to_string();
        assert!(e.contains("line 7") && e.contains("duplicate"), "{e}");
        let e = parse(&MINIMAL.replace("rho = 0.5", "rho = half")).unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
        let e = parse(&MINIMAL.replace("pairwise", "pairwise known=mu")).unwrap_err().to_string();
        assert!(e.contains("line 5") && e.contains("mu"), "{e}");
        let e = parse(&MINIMAL.replace("p = 3", "k = 3")).unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
    }

    #[test]
    fn replicate_floor_is_enforced() {
        let e = parse(&MINIMAL.replace("replicates = 200", "replicates = 50")).unwrap_err().to_string();
        assert!(e.contains("replicates"), "{e}");
    }

    #[test]
    fn other_models() {
        let c = parse("model = multinomial\nk = 5\ntheta = 0.2\nspec = full\nn = 100\nreplicates = 100\n").unwrap();
        assert_eq!(c.theta_true.values(), &[0.2]);
        let c = parse("model = trinormal\nmu = 1\nrho = 0.3\nsigma2 = 2\nspec = margins:1,2,3 known=rho+sigma2\nn = 100\nreplicates = 100\n").unwrap();
        assert_eq!(c.specs[0].known, vec!["rho", "sigma2"]);
    }
}

//! Parsing of compound flag values and exit-code mapping.

use std::path::Path;

use sparsekern::regression::log_space;
use sparsekern::{BiasLaw, DegreeSpec, Nonlinearity, WeightDist, WeightLaw};

use crate::FeatureArgs;

/// A bad flag value; reported with exit code 2.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid input: {}", self.0)
    }
}

impl std::error::Error for Invalid {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

/// 2 for bad input, 1 for failures during computation.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<Invalid>() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<sparsekern::Error>() {
            return if err.is_validation() { 2 } else { 1 };
        }
    }
    1
}

/// `regular:<d>`, `binomial:<p>`, `custom:<p0>,<p1>,...`, `custom:<file.json>` or `dense`.
///
/// A JSON file holds either an array of probabilities or `{"pmf": [...]}`.
pub fn degree_spec(s: &str, l: usize) -> anyhow::Result<DegreeSpec> {
    if s == "dense" {
        return Ok(DegreeSpec::dense(l)?);
    }
    if let Some(rest) = s.strip_prefix("custom:") {
        if rest.ends_with(".json") || Path::new(rest).is_file() {
            let text = std::fs::read_to_string(rest)
                .map_err(|e| invalid(format!("cannot read degree file `{rest}`: {e}")))?;
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| invalid(format!("degree file `{rest}`: {e}")))?;
            let pmf = value.get("pmf").unwrap_or(&value);
            let pmf: Vec<f64> = serde_json::from_value(pmf.clone())
                .map_err(|_| invalid(format!("degree file `{rest}` must hold an array of probabilities")))?;
            return Ok(DegreeSpec::custom(l, pmf)?);
        }
    }
    Ok(DegreeSpec::parse(s, l)?)
}

pub fn nonlinearity(s: &str) -> anyhow::Result<Nonlinearity> {
    Ok(s.parse::<Nonlinearity>()?)
}

fn number(s: &str, what: &str) -> anyhow::Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| invalid(format!("{what}: `{s}` is not a number")))
}

pub fn weight_law(a: &FeatureArgs, nl: Nonlinearity) -> anyhow::Result<WeightLaw> {
    let weights = match a.weights.as_str() {
        "gaussian" => WeightDist::GaussianIso { sigma: a.sigma },
        "gaussian-scaled" => WeightDist::GaussianScaled { sigma: a.sigma },
        "rademacher" => WeightDist::Rademacher { scale: a.sigma },
        other => return Err(invalid(format!("unknown weight law `{other}`"))),
    };
    let default_bias = match nl {
        Nonlinearity::Cosine | Nonlinearity::SinCosPair => "phase",
        _ => "none",
    };
    let spec = a.bias.as_deref().unwrap_or(default_bias);
    let bias = if spec == "none" {
        BiasLaw::None
    } else if spec == "phase" {
        BiasLaw::phase()
    } else if let Some(v) = spec.strip_prefix("sym:") {
        BiasLaw::symmetric(number(v, "bias")?)
    } else if let Some(v) = spec.strip_prefix("uniform:") {
        let (lo, hi) = v
            .split_once(',')
            .ok_or_else(|| invalid("uniform bias needs `uniform:<a1>,<a2>`"))?;
        BiasLaw::Uniform {
            a1: number(lo, "bias")?,
            a2: number(hi, "bias")?,
        }
    } else {
        return Err(invalid(format!("unknown bias law `{spec}`")));
    };
    Ok(WeightLaw::new(weights, bias)?)
}

/// `lo:hi:count` (log-spaced, inclusive) or a comma-separated list.
pub fn lambda_grid(s: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| invalid(format!("lambda grid count `{}` is not an integer", parts[2])))?;
        return Ok(log_space(number(parts[0], "lambda grid")?, number(parts[1], "lambda grid")?, count)?);
    }
    let grid = list(s, "lambda grid")?;
    if grid.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(invalid("penalties must be finite and nonnegative"));
    }
    Ok(grid)
}

pub fn list(s: &str, what: &str) -> anyhow::Result<Vec<f64>> {
    let values = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| number(t, what))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(invalid(format!("{what} is empty")));
    }
    Ok(values)
}

pub fn usize_list(s: &str, what: &str) -> anyhow::Result<Vec<usize>> {
    let values = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| invalid(format!("{what}: `{t}` is not a nonnegative integer")))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(invalid(format!("{what} is empty")));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(lambda_grid("0.1,1,10").unwrap(), vec![0.1, 1.0, 10.0]);
        assert_eq!(lambda_grid("1e-2:1e2:5").unwrap().len(), 5);
        assert!(lambda_grid("a,b").is_err());
        assert!(lambda_grid("-1").is_err());
        assert_eq!(usize_list("1, 3,10", "d").unwrap(), vec![1, 3, 10]);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&invalid("x")), 2);
        assert_eq!(exit_code(&degree_spec("regular:0", 4).unwrap_err()), 2);
        let runtime: anyhow::Error = sparsekern::Error::Singular("boom".into()).into();
        assert_eq!(exit_code(&runtime), 1);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), 1);
    }

    #[test]
    fn bias_defaults_follow_nonlinearity() {
        let a = FeatureArgs {
            weights: "gaussian".into(),
            sigma: 1.0,
            bias: None,
        };
        assert_eq!(weight_law(&a, Nonlinearity::Cosine).unwrap().bias, BiasLaw::phase());
        assert_eq!(weight_law(&a, Nonlinearity::Sign).unwrap().bias, BiasLaw::None);
        let b = FeatureArgs {
            bias: Some("uniform:-1,2".into()),
            ..a
        };
        assert_eq!(weight_law(&b, Nonlinearity::Sign).unwrap().bias, BiasLaw::Uniform { a1: -1.0, a2: 2.0 });
    }

    #[test]
    fn degree_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deg.json");
        std::fs::write(&path, r#"{"pmf": [0.0, 0.5, 0.5]}"#).unwrap();
        let spec = degree_spec(&format!("custom:{}", path.display()), 2).unwrap();
        assert_eq!(spec.pmf(), vec![0.0, 0.5, 0.5]);
        assert_eq!(exit_code(&degree_spec("custom:/nonexistent/deg.json", 2).unwrap_err()), 2);
    }
}

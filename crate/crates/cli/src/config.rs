use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use alignkit_core::channel::ChannelMatrix;
use alignkit_core::codebook::Limits;
use alignkit_core::dofengine::{pipeline_search_bounds, DiscreteDistribution};
use alignkit_core::exactnum::{parse_scalar, ExactScalar, RadicandSet};

use crate::CliError;

/// Resource caps. Zero is rejected; `time_secs` is optional.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    #[serde(default = "default_max_values")]
    pub max_values: u64,
    #[serde(default = "default_max_work")]
    pub max_work: u64,
    #[serde(default)]
    pub time_secs: Option<u64>,
}

fn default_max_values() -> u64 {
    Limits::default().max_values
}

fn default_max_work() -> u64 {
    Limits::default().max_work
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            max_values: default_max_values(),
            max_work: default_max_work(),
            time_secs: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchBounds {
    pub deg_bound: u32,
    pub coeff_bound: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub report: String,
    pub summary: String,
    pub dof_csv: String,
    pub codebook_csv: String,
    pub inequalities_csv: String,
    pub classify: String,
    pub entropy: String,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            report: "report.json".into(),
            summary: "summary.txt".into(),
            dof_csv: "dof.csv".into(),
            codebook_csv: "codebook.csv".into(),
            inequalities_csv: "inequalities.csv".into(),
            classify: "classify3.json".into(),
            entropy: "entropy.json".into(),
        }
    }
}

/// One input of a linear combination: values with optional integer weights (uniform if absent).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub values: Vec<String>,
    #[serde(default)]
    pub weights: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropySpec {
    pub coefficients: Vec<String>,
    pub inputs: Vec<InputSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub channel: Option<Vec<Vec<String>>>,
    #[serde(default = "default_radicands")]
    pub radicands: Vec<u64>,
    #[serde(default = "default_n")]
    pub n: u64,
    #[serde(default = "default_d_max")]
    pub d_max: u32,
    #[serde(default)]
    pub caps: Caps,
    /// Polynomial-witness search; defaults to degree `d_max`, coefficients below `N^d_max`.
    #[serde(default)]
    pub search: Option<SearchBounds>,
    /// `(N, d)` codebooks for the collision scan; defaults to `[(N, 1)]`.
    #[serde(default)]
    pub grid: Option<Vec<(u64, u32)>>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub entropy: Option<EntropySpec>,
}

fn default_radicands() -> Vec<u64> {
    vec![2, 3, 5]
}

fn default_n() -> u64 {
    3
}

fn default_d_max() -> u32 {
    6
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

impl AnalysisConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        if self.caps.max_values == 0 || self.caps.max_work == 0 || self.caps.time_secs == Some(0) {
            return Err(CliError::Config("caps: every cap must be positive".into()));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && **e < 0.5)) {
            return Err(CliError::Config(format!("epsilons: {e} is outside (0, 1/2)")));
        }
        if let Some(g) = &self.grid {
            if let Some((n, d)) = g.iter().find(|(n, _)| *n < 2) {
                return Err(CliError::Config(format!("grid: ({n}, {d}) needs N > 1")));
            }
        }
        self.field()?;
        Ok(())
    }

    pub fn field(&self) -> Result<RadicandSet, CliError> {
        RadicandSet::new(self.radicands.clone()).map_err(|e| CliError::Config(format!("radicands: {e}")))
    }

    /// Parses and validates the channel matrix.
    pub fn matrix(&self) -> Result<ChannelMatrix, CliError> {
        let rows = self
            .channel
            .as_ref()
            .ok_or_else(|| CliError::Config("channel: missing field".into()))?;
        let field = self.field()?;
        for (i, row) in rows.iter().enumerate() {
            for (j, entry) in row.iter().enumerate() {
                parse_scalar(entry, &field).map_err(|e| CliError::Config(format!("channel[{i}][{j}]: {e}")))?;
            }
        }
        let h = ChannelMatrix::parse(rows, &field).map_err(|e| CliError::Config(format!("channel: {e}")))?;
        if let Err(v) = h.validate() {
            let msgs: Vec<String> = v.iter().map(ToString::to_string).collect();
            return Err(CliError::Config(format!("channel: {}", msgs.join("; "))));
        }
        Ok(h)
    }

    /// Caps as engine limits; the clock starts now.
    pub fn limits(&self) -> Limits {
        let mut l = Limits::default()
            .with_max_values(self.caps.max_values)
            .with_max_work(self.caps.max_work);
        l.deadline = self.caps.time_secs.map(|s| Instant::now() + Duration::from_secs(s));
        l
    }

    pub fn search_bounds(&self) -> (u32, u64) {
        self.search.map_or_else(
            || pipeline_search_bounds(self.n, self.d_max),
            |s| (s.deg_bound, s.coeff_bound),
        )
    }

    pub fn grid(&self) -> Vec<(u64, u32)> {
        self.grid.clone().unwrap_or_else(|| vec![(self.n, 1)])
    }

    /// Coefficients and input distributions of the `entropy` section.
    pub fn lincomb(&self) -> Result<(Vec<ExactScalar>, Vec<DiscreteDistribution>), CliError> {
        let spec = self
            .entropy
            .as_ref()
            .ok_or_else(|| CliError::Config("entropy: missing section".into()))?;
        let field = self.field()?;
        let coeffs = spec
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| {
                parse_scalar(c, &field).map_err(|e| CliError::Config(format!("entropy.coefficients[{i}]: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut dists = Vec::new();
        for (i, input) in spec.inputs.iter().enumerate() {
            let at = |what: &str| format!("entropy.inputs[{i}].{what}");
            let values = input
                .values
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    parse_scalar(v, &field).map_err(|e| CliError::Config(format!("{}[{j}]: {e}", at("values"))))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let dist = match &input.weights {
                None => DiscreteDistribution::uniform(&values),
                Some(w) if w.len() != values.len() => {
                    return Err(CliError::Config(format!(
                        "{}: {} weights for {} values",
                        at("weights"),
                        w.len(),
                        values.len()
                    )))
                }
                Some(w) => DiscreteDistribution::from_weights(values.into_iter().zip(w.iter().map(|x| *x as u128))),
            };
            dists.push(dist.map_err(|e| CliError::Config(format!("{}: {e}", at("values"))))?);
        }
        if coeffs.len() != dists.len() {
            return Err(CliError::Config(format!(
                "entropy: {} coefficients for {} inputs",
                coeffs.len(),
                dists.len()
            )));
        }
        Ok((coeffs, dists))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let c = AnalysisConfig::from_json(r#"{"channel": [["1","1","1"],["1","1","1"],["1","1","1"]]}"#).unwrap();
        assert_eq!((c.n, c.d_max), (3, 6));
        assert_eq!(c.grid(), vec![(3, 1)]);
        assert_eq!(c.search_bounds(), (6, 728));
        assert_eq!(c.matrix().unwrap().k(), 3);
    }

    #[test]
    fn errors_name_the_location() {
        let e = AnalysisConfig::from_json("{\n  \"n\": 3,\n  \"d_max\": \"x\"\n}").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = AnalysisConfig::from_json(r#"{"nn": 3}"#).unwrap_err();
        assert!(e.to_string().contains("unknown field `nn`"), "{e}");
        let c = AnalysisConfig::from_json(r#"{"channel": [["1","sqrt(7)","1"],["1","1","1"],["1","1","1"]]}"#).unwrap();
        assert!(c.matrix().unwrap_err().to_string().contains("channel[0][1]"));
        let e = AnalysisConfig::from_json(r#"{"caps": {"max_values": 0}}"#).unwrap_err();
        assert!(e.to_string().contains("caps"));
    }
}

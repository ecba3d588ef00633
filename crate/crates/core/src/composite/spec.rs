use std::fmt;

use crate::error::{Error, Result};
use crate::models::{ModelSpec, ScoreKernel, Selector};
use crate::params::ParamVector;

/// One weighted component likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub selector: Selector,
    pub weight: f64,
}

/// Which constructor produced a spec; closed-form estimators key off this.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SpecKind {
    Independence,
    Pairwise,
    FullConditional,
    /// `∏_{i ∈ A} f(y_i | y_1..y_{i-1})`, 0-based.
    Chain(Vec<usize>),
    /// The full likelihood as a single component.
    Full,
    /// Independence likelihood over a subset of coordinates, 0-based.
    Margins(Vec<usize>),
    Custom,
}

/// A composite likelihood `∏_k L_k^{w_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeSpec {
    name: String,
    kind: SpecKind,
    components: Vec<Component>,
}

fn unit(selector: Selector) -> Component {
    Component {
        selector,
        weight: 1.0,
    }
}

impl CompositeSpec {
    /// All univariate margins.
    pub fn independence(dim: usize) -> Self {
        Self {
            name: "independence".into(),
            kind: SpecKind::Independence,
            components: (0..dim).map(|r| unit(Selector::margin(&[r]))).collect(),
        }
    }

    /// All `dim(dim-1)/2` bivariate margins.
    pub fn pairwise(dim: usize) -> Self {
        let mut components = Vec::new();
        for r in 0..dim {
            for s in r + 1..dim {
                components.push(unit(Selector::margin(&[r, s])));
            }
        }
        Self {
            name: "pairwise".into(),
            kind: SpecKind::Pairwise,
            components,
        }
    }

    /// `∏_r f(y_r | y_(-r))`.
    pub fn full_conditional(dim: usize) -> Self {
        Self {
            name: "full-conditional".into(),
            kind: SpecKind::FullConditional,
            components: (0..dim)
                .map(|r| {
                    let given: Vec<usize> = (0..dim).filter(|&s| s != r).collect();
                    unit(Selector::conditional(r, &given))
                })
                .collect(),
        }
    }

    /// Conditional chain over the (0-based) index subset `subset`.
    pub fn chain(subset: &[usize]) -> Result<Self> {
        let mut a = subset.to_vec();
        a.sort_unstable();
        a.dedup();
        if a.is_empty() {
            return Err(Error::InvalidArgument("chain needs a nonempty index set".into()));
        }
        let label = a
            .iter()
            .map(|i| (i + 1).to_string())
            .collect::<Vec<_>>()
            .join(",");
        Ok(Self {
            name: format!("chain:{label}"),
            components: a
                .iter()
                .map(|&i| {
                    let given: Vec<usize> = (0..i).collect();
                    unit(Selector::conditional(i, &given))
                })
                .collect(),
            kind: SpecKind::Chain(a),
        })
    }

    /// The full likelihood.
    pub fn full(dim: usize) -> Self {
        Self {
            name: "full".into(),
            kind: SpecKind::Full,
            components: vec![unit(Selector::margin(&(0..dim).collect::<Vec<_>>()))],
        }
    }

    /// Independence likelihood over the (0-based) coordinates `subset`.
    pub fn margins(subset: &[usize]) -> Result<Self> {
        let mut a = subset.to_vec();
        a.sort_unstable();
        a.dedup();
        if a.is_empty() {
            return Err(Error::InvalidArgument("margins needs a nonempty index set".into()));
        }
        let label: String = a.iter().map(|i| (i + 1).to_string()).collect();
        Ok(Self {
            name: format!("margins:{label}"),
            components: a.iter().map(|&i| unit(Selector::margin(&[i]))).collect(),
            kind: SpecKind::Margins(a),
        })
    }

    /// Arbitrary components with nonnegative weights.
    pub fn custom(name: &str, components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("composite likelihood has no components".into()));
        }
        if let Some(c) = components.iter().find(|c| !(c.weight >= 0.0 && c.weight.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "component weight {} must be nonnegative and finite",
                c.weight
            )));
        }
        Ok(Self {
            name: name.to_string(),
            kind: SpecKind::Custom,
            components,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &SpecKind {
        &self.kind
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        self.components
            .iter()
            .try_for_each(|c| c.selector.validate(model.dim()))
    }

    /// `Σ_k w_k log L_k`.
    pub fn log_density(&self, model: &ModelSpec, y: &[f64], theta: &ParamVector) -> Result<f64> {
        self.validate(model)?;
        if y.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: y.len(),
            });
        }
        let st = model.structure(theta)?;
        self.components.iter().try_fold(0.0, |acc, c| {
            Ok(acc + c.weight * ModelSpec::logpdf_with(&st, &c.selector, y)?)
        })
    }

    /// Score kernels of each component, restricted to the free parameters.
    pub fn component_kernels(&self, model: &ModelSpec, theta: &ParamVector) -> Result<Vec<ScoreKernel>> {
        self.validate(model)?;
        let st = model.structure(theta)?;
        let free = theta.free_indices();
        self.components
            .iter()
            .map(|c| Ok(ModelSpec::selector_kernel(&st, &c.selector)?.select(&free)))
            .collect()
    }
}

impl fmt::Display for CompositeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Role of a generator in the big chart of `T[1]M ⊕ T[ε]M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Klass {
    /// Coordinate `z^a` of the graded manifold.
    Base,
    /// Differential `dz^a`; form degree 1.
    Form,
    /// Formal fibre coordinate `ε^a`; resolution degree 1.
    Fiber,
    /// Degree-0 even constant carried through computations unchanged.
    /// Used for symbolic base points; no derivation acts on it.
    Param,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Generator {
    pub name: String,
    pub zdeg: i32,
    pub klass: Klass,
    /// Ordinal within its class.
    pub index: usize,
}

impl Generator {
    pub fn is_odd(&self) -> bool {
        self.zdeg.rem_euclid(2) == 1
    }

    pub fn resdeg(&self) -> u32 {
        u32::from(self.klass == Klass::Fiber)
    }

    pub fn formdeg(&self) -> u32 {
        u32::from(self.klass == Klass::Form)
    }
}

/// Declaration of one base coordinate. Paired names default to `d<name>`
/// and `e<name>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseSpec {
    pub name: String,
    pub degree: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber: Option<String>,
}

impl BaseSpec {
    pub fn new(name: impl Into<String>, degree: i32) -> Self {
        Self {
            name: name.into(),
            degree,
            form: None,
            fiber: None,
        }
    }

    pub fn form_name(&self) -> String {
        self.form.clone().unwrap_or_else(|| format!("d{}", self.name))
    }

    pub fn fiber_name(&self) -> String {
        self.fiber.clone().unwrap_or_else(|| format!("e{}", self.name))
    }
}

/// The ambient chart: base, form and fibre generators in one global order
/// (class-major, then index), plus optional parameters at the end.
///
/// With `k` base coordinates the layout is `z^0..z^k | dz^0..dz^k |
/// ε^0..ε^k | params`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradedChart {
    generators: Vec<Generator>,
    specs: Vec<BaseSpec>,
    by_name: BTreeMap<String, usize>,
    base_point: Vec<BigRational>,
}

pub type ChartRef = Arc<GradedChart>;

impl GradedChart {
    pub fn new(base: Vec<BaseSpec>, params: Vec<String>) -> Result<ChartRef> {
        let k = base.len();
        let mut generators = Vec::with_capacity(3 * k + params.len());
        for (i, spec) in base.iter().enumerate() {
            generators.push(Generator {
                name: spec.name.clone(),
                zdeg: spec.degree,
                klass: Klass::Base,
                index: i,
            });
        }
        for (i, spec) in base.iter().enumerate() {
            generators.push(Generator {
                name: spec.form_name(),
                zdeg: spec.degree + 1,
                klass: Klass::Form,
                index: i,
            });
        }
        for (i, spec) in base.iter().enumerate() {
            generators.push(Generator {
                name: spec.fiber_name(),
                zdeg: spec.degree,
                klass: Klass::Fiber,
                index: i,
            });
        }
        for (i, name) in params.iter().enumerate() {
            generators.push(Generator {
                name: name.clone(),
                zdeg: 0,
                klass: Klass::Param,
                index: i,
            });
        }
        let mut by_name = BTreeMap::new();
        for (idx, g) in generators.iter().enumerate() {
            if !is_identifier(&g.name) {
                return Err(Error::Semantic {
                    block: "chart".into(),
                    message: format!("`{}` is not a valid generator name", g.name),
                });
            }
            if by_name.insert(g.name.clone(), idx).is_some() {
                return Err(Error::Semantic {
                    block: "chart".into(),
                    message: format!("duplicate generator name `{}`", g.name),
                });
            }
        }
        Ok(Arc::new(Self {
            generators,
            specs: base,
            by_name,
            base_point: vec![BigRational::zero(); k],
        }))
    }

    /// Chart from `(name, degree)` pairs with default paired names.
    pub fn from_degrees(base: &[(&str, i32)]) -> Result<ChartRef> {
        Self::new(base.iter().map(|(n, d)| BaseSpec::new(*n, *d)).collect(), Vec::new())
    }

    /// Same chart with a different base point.
    pub fn with_base_point(&self, point: Vec<BigRational>) -> Result<ChartRef> {
        if point.len() != self.n_base() {
            return Err(Error::Semantic {
                block: "point".into(),
                message: format!("expected {} coordinates, got {}", self.n_base(), point.len()),
            });
        }
        for (a, value) in point.iter().enumerate() {
            if self.generators[a].zdeg != 0 && !value.is_zero() {
                return Err(Error::NotBodyPoint(format!(
                    "`{}` has degree {} but value {}",
                    self.generators[a].name, self.generators[a].zdeg, value
                )));
            }
        }
        let mut chart = self.clone();
        chart.base_point = point;
        Ok(Arc::new(chart))
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn generator(&self, idx: usize) -> &Generator {
        &self.generators[idx]
    }

    pub fn specs(&self) -> &[BaseSpec] {
        &self.specs
    }

    pub fn params(&self) -> Vec<String> {
        self.generators
            .iter()
            .filter(|g| g.klass == Klass::Param)
            .map(|g| g.name.clone())
            .collect()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownGenerator(name.to_string()))
    }

    pub fn n_base(&self) -> usize {
        self.specs.len()
    }

    pub fn base(&self, a: usize) -> usize {
        a
    }

    pub fn form(&self, a: usize) -> usize {
        self.n_base() + a
    }

    pub fn fiber(&self, a: usize) -> usize {
        2 * self.n_base() + a
    }

    pub fn base_degree(&self, a: usize) -> i32 {
        self.generators[a].zdeg
    }

    pub fn is_odd(&self, idx: usize) -> bool {
        self.generators[idx].is_odd()
    }

    /// Parity of each base coordinate, in base order.
    pub fn base_parities(&self) -> Vec<bool> {
        self.specs.iter().map(|s| s.degree.rem_euclid(2) == 1).collect()
    }

    pub fn base_point(&self) -> &[BigRational] {
        &self.base_point
    }

    /// Number of degree-0 base coordinates.
    pub fn body_dim(&self) -> usize {
        self.specs.iter().filter(|s| s.degree == 0).count()
    }

    /// Number of even base coordinates of nonzero degree.
    pub fn even_dim(&self) -> usize {
        self.specs
            .iter()
            .filter(|s| s.degree != 0 && s.degree.rem_euclid(2) == 0)
            .count()
    }

    pub fn odd_dim(&self) -> usize {
        self.specs.iter().filter(|s| s.degree.rem_euclid(2) == 1).count()
    }

    pub fn all_even_degree_zero(&self) -> bool {
        self.specs.iter().all(|s| s.degree == 0)
    }

    pub fn same(a: &ChartRef, b: &ChartRef) -> bool {
        Arc::ptr_eq(a, b) || a.generators == b.generators
    }
}

impl fmt::Display for GradedChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self
            .generators
            .iter()
            .map(|g| format!("{}:{}", g.name, g.zdeg))
            .collect();
        write!(f, "[{}]", names.join(", "))
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_pairing() {
        let chart = GradedChart::from_degrees(&[("x", 0), ("th", 1)]).unwrap();
        assert_eq!(chart.len(), 6);
        assert_eq!(chart.generator(chart.form(1)).name, "dth");
        assert_eq!(chart.generator(chart.form(1)).zdeg, 2);
        assert_eq!(chart.generator(chart.fiber(1)).zdeg, 1);
        assert!(chart.is_odd(chart.fiber(1)));
        assert!(chart.is_odd(chart.form(0)));
        assert_eq!((chart.body_dim(), chart.even_dim(), chart.odd_dim()), (1, 0, 1));
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = GradedChart::new(vec![BaseSpec::new("x", 0), BaseSpec::new("dx", 1)], vec![]);
        assert!(err.is_err());
    }

    #[test]
    fn base_point_must_lie_on_body() {
        let chart = GradedChart::from_degrees(&[("x", 0), ("th", 1)]).unwrap();
        let one = BigRational::from_integer(1.into());
        assert!(chart.with_base_point(vec![one.clone(), BigRational::zero()]).is_ok());
        assert!(matches!(
            chart.with_base_point(vec![one.clone(), one]),
            Err(Error::NotBodyPoint(_))
        ));
    }
}

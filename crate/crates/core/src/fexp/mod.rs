//! Formal exponential maps and their Grothendieck connections.

mod canonical;
mod grothendieck;
mod transfer;

use std::collections::BTreeMap;

use crate::algebra::{ChartRef, GradedChart, Grading, RingMorphism, Series, SeriesMatrix, Trunc};
use crate::error::{Error, Result};
use crate::report::{Check, Report};

pub use canonical::{apply_fibre_change, canonicalize};
pub use grothendieck::{
    check_flatness, fexp_from_grothendieck, flatness_report, grothendieck_from_fexp, FlatnessResidual,
    GrothendieckConnection,
};
pub use transfer::{transfer_diffeo, Diffeo};

/// Pullbacks `fexp* z^a` as series in `z` and `ε`, truncated at the
/// resolution order of `trunc`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormalExpMap {
    chart: ChartRef,
    trunc: Trunc,
    pullbacks: Vec<Series>,
}

impl FormalExpMap {
    /// Checks shape and grading only; the defining properties are
    /// checked by [`validate_fexp`].
    pub fn new(chart: &ChartRef, trunc: Trunc, pullbacks: Vec<Series>) -> Result<Self> {
        if pullbacks.len() != chart.n_base() {
            return Err(Error::Semantic {
                block: "fexp".into(),
                message: format!("{} pullbacks for {} coordinates", pullbacks.len(), chart.n_base()),
            });
        }
        for (a, p) in pullbacks.iter().enumerate() {
            let name = chart.generator(chart.base(a)).name.clone();
            if !GradedChart::same(p.chart(), chart) {
                return Err(Error::ChartMismatch(format!("pullback of `{name}`")));
            }
            if p.trunc() != trunc {
                return Err(Error::TruncationMismatch(format!("pullback of `{name}`")));
            }
            if !p.is_homogeneous(chart.base_degree(a)) {
                return Err(Error::Inhomogeneous {
                    generator: name,
                    expected: chart.base_degree(a),
                });
            }
            if p.terms().any(|(m, _)| m.formdeg(chart) > 0) {
                return Err(Error::InvalidFexp {
                    generator: name,
                    reason: "pullback contains form generators".into(),
                });
            }
        }
        Ok(Self {
            chart: chart.clone(),
            trunc,
            pullbacks,
        })
    }

    /// `fexp* z^a = z^a + ε^a`.
    pub fn canonical(chart: &ChartRef, trunc: Trunc) -> Self {
        let pullbacks = (0..chart.n_base())
            .map(|a| &Series::generator(chart, trunc, chart.base(a)) + &Series::generator(chart, trunc, chart.fiber(a)))
            .collect();
        Self {
            chart: chart.clone(),
            trunc,
            pullbacks,
        }
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    pub fn trunc(&self) -> Trunc {
        self.trunc
    }

    pub fn order(&self) -> u32 {
        self.trunc.res
    }

    pub fn pullback(&self, a: usize) -> &Series {
        &self.pullbacks[a]
    }

    pub fn pullbacks(&self) -> &[Series] {
        &self.pullbacks
    }

    /// Resolution-degree-`n` part of every pullback.
    pub fn component(&self, n: u32) -> Vec<Series> {
        self.pullbacks
            .iter()
            .map(|p| p.grade_project(Grading::ResDeg, i64::from(n)))
            .collect()
    }

    /// `E_b^a = ∂_{ε^b} fexp* z^a` at `ε = 0` (row `b`, column `a`).
    pub fn e1(&self) -> SeriesMatrix {
        let k = self.chart.n_base();
        SeriesMatrix::from_fn(&self.chart, self.trunc, k, k, |b, a| {
            self.pullbacks[a]
                .partial(self.chart.fiber(b))
                .grade_project(Grading::ResDeg, 0)
        })
    }

    pub fn is_proper(&self) -> bool {
        self.e1().is_identity()
    }

    /// The ring morphism `e*` on the big chart: `z^a ↦ fexp* z^a`, every
    /// other generator fixed.
    pub fn pullback_morphism(&self) -> Result<RingMorphism> {
        let overrides: BTreeMap<usize, Series> = self
            .pullbacks
            .iter()
            .enumerate()
            .map(|(a, p)| (self.chart.base(a), p.clone()))
            .collect();
        RingMorphism::with_images(&self.chart, self.trunc, &overrides)
    }

    /// Same map under another truncation.
    pub fn truncate(&self, trunc: Trunc) -> FormalExpMap {
        Self {
            chart: self.chart.clone(),
            trunc,
            pullbacks: self.pullbacks.iter().map(|p| p.truncate(trunc)).collect(),
        }
    }
}

/// Property A (zero section pulls back to the identity), property B (`e₁`
/// unimodular) and properness.
pub fn validate_fexp(f: &FormalExpMap) -> Report {
    let chart = f.chart();
    let mut report = Report::new("formal exponential map");
    let mut a_check = Check::new("property A: s0* fexp* z^a = z^a");
    for a in 0..chart.n_base() {
        let z = Series::generator(chart, f.trunc(), chart.base(a));
        let r = &f.pullback(a).grade_project(Grading::ResDeg, 0) - &z;
        a_check.residual(chart.generator(chart.base(a)).name.clone(), r);
    }
    report.push(a_check);
    let mut b_check = Check::new("property B: e1 unimodular");
    let e1 = f.e1();
    if let Err(e) = e1.inverse(&chart.base_parities()) {
        b_check.fail(e.to_string());
    }
    report.push(b_check);
    report.fact("proper", f.is_proper());
    report.fact("order", f.order());
    report
}

/// Turns a failing validation report into the first offending error.
pub(crate) fn require_valid(f: &FormalExpMap) -> Result<()> {
    let report = validate_fexp(f);
    for c in &report.checks {
        if let Some((label, r)) = c.residuals.first() {
            return Err(Error::InvalidFexp {
                generator: label.clone(),
                reason: format!("{} fails by {r}", c.identity),
            });
        }
        if let Some(msg) = c.failures.first() {
            return Err(Error::InvalidFexp {
                generator: "e1".into(),
                reason: msg.clone(),
            });
        }
    }
    Ok(())
}

/// Formal exponential map from a polynomial exponential map given in
/// variables `v^a`. The series in `exp_images` live on `v_chart`, which has
/// the layout of `chart` but names its fibre generators after the `v^a`;
/// the substitution `v^a ↦ ε^a` is then a relabelling.
pub fn fexp_from_polynomial_exp(
    chart: &ChartRef,
    trunc: Trunc,
    v_chart: &ChartRef,
    exp_images: &[Series],
) -> Result<FormalExpMap> {
    if v_chart.len() != chart.len()
        || (0..chart.len()).any(|i| {
            let (g, h) = (chart.generator(i), v_chart.generator(i));
            g.zdeg != h.zdeg || g.klass != h.klass
        })
    {
        return Err(Error::ChartMismatch("exponential map chart layout".into()));
    }
    let pullbacks = exp_images
        .iter()
        .map(|e| {
            let terms = e.terms().map(|(m, c)| (m.clone(), c.clone())).collect::<Vec<_>>();
            Series::from_terms(chart, trunc, terms)
        })
        .collect::<Result<Vec<_>>>()?;
    let f = FormalExpMap::new(chart, trunc, pullbacks)?;
    require_valid(&f)?;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{parse_series, BaseSpec};

    #[test]
    fn canonical_is_valid_and_proper() {
        let c = GradedChart::from_degrees(&[("x", 0), ("th", 1)]).unwrap();
        let f = FormalExpMap::canonical(&c, Trunc::DEFAULT);
        let r = validate_fexp(&f);
        assert!(r.passed());
        assert!(f.is_proper());
    }

    #[test]
    fn identity_pullback_is_invalid() {
        let c = GradedChart::from_degrees(&[("x", 0)]).unwrap();
        let f = FormalExpMap::new(&c, Trunc::DEFAULT, vec![Series::generator(&c, Trunc::DEFAULT, 0)]).unwrap();
        assert!(!validate_fexp(&f).passed());
    }

    #[test]
    fn scaled_map_valid_not_proper() {
        let c = GradedChart::from_degrees(&[("x", 0), ("y", 0)]).unwrap();
        let t = Trunc::DEFAULT;
        let f = FormalExpMap::new(
            &c,
            t,
            vec![
                parse_series("x + 2*ex + ex*ey*x", &c, t).unwrap(),
                parse_series("y + ey", &c, t).unwrap(),
            ],
        )
        .unwrap();
        let r = validate_fexp(&f);
        assert!(r.passed());
        assert!(!f.is_proper());
        assert_eq!(f.e1().det(), Series::constant(&c, t, crate::algebra::rat(2)));
    }

    #[test]
    fn polynomial_exponential_substitutes_fibres() {
        let c = GradedChart::from_degrees(&[("z", 0)]).unwrap();
        let spec = BaseSpec {
            fiber: Some("v".into()),
            ..BaseSpec::new("z", 0)
        };
        let vc = GradedChart::new(vec![spec], vec![]).unwrap();
        let t = Trunc::DEFAULT;
        let e = parse_series("z + v + z*v^2", &vc, t).unwrap();
        let f = fexp_from_polynomial_exp(&c, t, &vc, &[e]).unwrap();
        assert_eq!(f.pullback(0), &parse_series("z + ez + z*ez^2", &c, t).unwrap());
    }
}

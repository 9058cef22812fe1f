use std::collections::BTreeMap;

use super::{FormalExpMap, GrothendieckConnection};
use crate::algebra::{ChartRef, GradedChart, RingMorphism, Series, Trunc};
use crate::derivation::Derivation;
use crate::error::{Error, Result};

/// Polynomial diffeomorphism given by pullbacks of the base coordinates,
/// with a candidate inverse. Both are base-only series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diffeo {
    pub forward: Vec<Series>,
    pub inverse: Vec<Series>,
}

impl Diffeo {
    pub fn identity(chart: &ChartRef, trunc: Trunc) -> Self {
        let ids: Vec<Series> = (0..chart.n_base())
            .map(|a| Series::generator(chart, trunc, chart.base(a)))
            .collect();
        Self {
            forward: ids.clone(),
            inverse: ids,
        }
    }

    fn check(&self, chart: &ChartRef) -> Result<()> {
        let k = chart.n_base();
        if self.forward.len() != k || self.inverse.len() != k {
            return Err(Error::Diffeo(format!("expected {k} pullbacks in each direction")));
        }
        for s in self.forward.iter().chain(&self.inverse) {
            if !GradedChart::same(s.chart(), chart) || !s.is_base_only() {
                return Err(Error::Diffeo(
                    "pullbacks must be functions of the base coordinates".into(),
                ));
            }
        }
        Ok(())
    }
}

/// `z^a ↦ φ^a`, `dz^a ↦ dφ^a`, `ε^a ↦ ε^b ∂_b φ^a`.
fn tangent_lift(chart: &ChartRef, trunc: Trunc, phi: &[Series]) -> Result<RingMorphism> {
    let d = Derivation::de_rham(chart, trunc);
    let mut images = BTreeMap::new();
    for (a, p) in phi.iter().enumerate() {
        images.insert(chart.base(a), p.clone());
        images.insert(chart.form(a), d.apply(p));
        let mut e = Series::zero(chart, trunc);
        for b in 0..chart.n_base() {
            e = &e + &(&Series::generator(chart, trunc, chart.fiber(b)) * &p.partial(chart.base(b)));
        }
        images.insert(chart.fiber(a), e);
    }
    RingMorphism::with_images(chart, trunc, &images)
}

/// Transfers a map and its connection along `φ`: `F̄ = φ⁻¹ ∘ F ∘ T[ε]φ`
/// and `D̄ = Tφ* ∘ D ∘ (Tφ*)⁻¹`.
pub fn transfer_diffeo(
    f: &FormalExpMap,
    g: &GrothendieckConnection,
    phi: &Diffeo,
) -> Result<(FormalExpMap, GrothendieckConnection)> {
    let chart = f.chart().clone();
    let t = f.trunc();
    phi.check(&chart)?;
    let lift = tangent_lift(&chart, t, &phi.forward)?;
    let lift_inv = tangent_lift(&chart, t, &phi.inverse)?;
    for idx in 0..chart.len() {
        let gen = Series::generator(&chart, t, idx);
        if lift.apply(&lift_inv.apply(&gen)?)? != gen || lift_inv.apply(&lift.apply(&gen)?)? != gen {
            return Err(Error::Diffeo(format!(
                "supplied inverse does not invert the map on `{}`",
                chart.generator(idx).name
            )));
        }
    }
    let fstar = f.pullback_morphism()?;
    let pullbacks = phi
        .inverse
        .iter()
        .map(|psi| lift.apply(&fstar.apply(psi)?))
        .collect::<Result<Vec<_>>>()?;
    let fbar = FormalExpMap::new(&chart, t, pullbacks)?;
    let d = g.derivation();
    let mut images = BTreeMap::new();
    for idx in 0..chart.len() {
        let gen = Series::generator(&chart, t, idx);
        images.insert(idx, lift.apply(&d.apply(&lift_inv.apply(&gen)?))?);
    }
    let gbar = GrothendieckConnection::new(Derivation::new(&chart, t, 1, images)?)?;
    Ok((fbar, gbar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::parse_series;
    use crate::fexp::grothendieck_from_fexp;

    #[test]
    fn identity_transfer_is_trivial() {
        let c = GradedChart::from_degrees(&[("x", 0), ("y", 0)]).unwrap();
        let t = Trunc::DEFAULT;
        let f = FormalExpMap::canonical(&c, t);
        let g = grothendieck_from_fexp(&f).unwrap();
        let (fb, gb) = transfer_diffeo(&f, &g, &Diffeo::identity(&c, t)).unwrap();
        assert_eq!((fb, gb), (f, g));
    }

    #[test]
    fn wrong_inverse_rejected() {
        let c = GradedChart::from_degrees(&[("x", 0), ("y", 0)]).unwrap();
        let t = Trunc::DEFAULT;
        let f = FormalExpMap::canonical(&c, t);
        let g = grothendieck_from_fexp(&f).unwrap();
        let phi = Diffeo {
            forward: vec![
                parse_series("x + y^2", &c, t).unwrap(),
                parse_series("y", &c, t).unwrap(),
            ],
            inverse: vec![
                parse_series("x + y^2", &c, t).unwrap(),
                parse_series("y", &c, t).unwrap(),
            ],
        };
        assert!(matches!(transfer_diffeo(&f, &g, &phi), Err(Error::Diffeo(_))));
    }
}

use std::collections::BTreeMap;

use super::{require_valid, FormalExpMap};
use crate::algebra::{Grading, RingMorphism, Series};
use crate::error::{Error, Result};

/// Fibre change `ρ` fixing `z` and `dz` with `ρ*(fexp* z^a) = z^a + ε^a`.
///
/// A non-proper map is first brought to `e₁ = 1` by `ε^b ↦ ε^c (e₁⁻¹)_c^b`;
/// then `r^a = ρ*(ε^a)` is built order by order from
/// `r_(ℓ) = −[fexp*z(r_(<ℓ))]_(ℓ)`.
pub fn canonicalize(f: &FormalExpMap) -> Result<RingMorphism> {
    require_valid(f)?;
    let chart = f.chart().clone();
    let t = f.trunc();
    let k = chart.n_base();
    let kinv = f.e1().inverse(&chart.base_parities())?;
    let linear: BTreeMap<usize, Series> = (0..k)
        .map(|b| {
            let mut img = Series::zero(&chart, t);
            for c in 0..k {
                img = &img + &(&Series::generator(&chart, t, chart.fiber(c)) * kinv.get(c, b));
            }
            (chart.fiber(b), img)
        })
        .collect();
    let linear = RingMorphism::with_images(&chart, t, &linear)?;
    let proper: Vec<Series> = f.pullbacks().iter().map(|p| linear.apply(p)).collect::<Result<_>>()?;
    let mut r: Vec<Series> = (0..k).map(|a| Series::generator(&chart, t, chart.fiber(a))).collect();
    for l in 2..=t.res {
        let sub = fibre_substitution(&chart, t, &r)?;
        let next: Vec<Series> = proper
            .iter()
            .map(|p| sub.apply(p).map(|s| s.grade_project(Grading::ResDeg, i64::from(l))))
            .collect::<Result<_>>()?;
        for (ra, n) in r.iter_mut().zip(next) {
            *ra = &*ra - &n;
        }
    }
    let rho = fibre_substitution(&chart, t, &r)?;
    let total = linear.then(&rho)?;
    for (a, p) in f.pullbacks().iter().enumerate() {
        let got = total.apply(p)?;
        let want = &Series::generator(&chart, t, chart.base(a)) + &Series::generator(&chart, t, chart.fiber(a));
        if got != want {
            return Err(Error::Assertion(format!(
                "ρ* fexp* {} = {got}",
                chart.generator(chart.base(a)).name
            )));
        }
    }
    Ok(total)
}

fn fibre_substitution(
    chart: &crate::algebra::ChartRef,
    t: crate::algebra::Trunc,
    r: &[Series],
) -> Result<RingMorphism> {
    let images: BTreeMap<usize, Series> = r.iter().enumerate().map(|(a, s)| (chart.fiber(a), s.clone())).collect();
    RingMorphism::with_images(chart, t, &images)
}

/// Applies a fibre change to a formal exponential map.
pub fn apply_fibre_change(f: &FormalExpMap, rho: &RingMorphism) -> Result<FormalExpMap> {
    let pullbacks = f.pullbacks().iter().map(|p| rho.apply(p)).collect::<Result<Vec<_>>>()?;
    FormalExpMap::new(f.chart(), f.trunc(), pullbacks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{parse_series, GradedChart, Trunc};

    #[test]
    fn canonical_map_gives_identity() {
        let c = GradedChart::from_degrees(&[("x", 0), ("th", 1)]).unwrap();
        let f = FormalExpMap::canonical(&c, Trunc::DEFAULT);
        let rho = canonicalize(&f).unwrap();
        assert_eq!(rho, RingMorphism::identity(&c, Trunc::DEFAULT));
    }

    #[test]
    fn quadratic_term_gives_rho2_minus_t() {
        let c = GradedChart::from_degrees(&[("x", 0), ("y", 0)]).unwrap();
        let t = Trunc::DEFAULT;
        // T^x_{xy} = T^x_{yx} = 3, so e2 contributes 1/2 * 2 * 3 ex ey.
        let f = FormalExpMap::new(
            &c,
            t,
            vec![
                parse_series("x + ex + 3*ex*ey", &c, t).unwrap(),
                parse_series("y + ey", &c, t).unwrap(),
            ],
        )
        .unwrap();
        let rho = canonicalize(&f).unwrap();
        let r2 = rho.image(c.fiber(0)).grade_project(Grading::ResDeg, 2);
        assert_eq!(r2, parse_series("-3*ex*ey", &c, t).unwrap());
    }

    #[test]
    fn non_proper_map_is_reduced() {
        let c = GradedChart::from_degrees(&[("x", 0), ("y", 0)]).unwrap();
        let t = Trunc::DEFAULT;
        let f = FormalExpMap::new(
            &c,
            t,
            vec![
                parse_series("x + 2*ex + ex*ey*x", &c, t).unwrap(),
                parse_series("y + ey + x*ex", &c, t).unwrap(),
            ],
        )
        .unwrap();
        let rho = canonicalize(&f).unwrap();
        let g = apply_fibre_change(&f, &rho).unwrap();
        assert_eq!(g, FormalExpMap::canonical(&c, t));
    }
}

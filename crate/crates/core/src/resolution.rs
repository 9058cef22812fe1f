use std::collections::BTreeMap;

use num_rational::BigRational;

use crate::algebra::{Grading, Series};
use crate::derivation::Derivation;
use crate::error::{Error, Result};
use crate::fexp::{grothendieck_from_fexp, FormalExpMap, GrothendieckConnection};
use crate::report::{Check, Report};

/// `ζ`, `δ = D₋₁` and the counting field for one formal exponential map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomotopyData {
    pub zeta: Derivation,
    pub delta: Derivation,
    pub eps_ht: Derivation,
}

impl HomotopyData {
    /// Builds `ζ(dz^a) = ε^b (C₋₁⁻¹)_b^a` from a connection. This is the
    /// unique choice of the form `ε^b N_b^a(z) ∂/∂dz^a` satisfying
    /// `ζδ + δζ = ε_HT`, which is asserted on every generator.
    pub fn from_connection(g: &GrothendieckConnection) -> Result<Self> {
        let chart = g.chart().clone();
        let t = g.trunc();
        let delta = g.delta();
        let n = g.c_minus1().inverse(&chart.base_parities())?;
        let mut images = BTreeMap::new();
        for a in 0..chart.n_base() {
            let mut img = Series::zero(&chart, t);
            for b in 0..chart.n_base() {
                img = &img + &(&Series::generator(&chart, t, chart.fiber(b)) * n.get(b, a));
            }
            images.insert(chart.form(a), img);
        }
        let zeta = Derivation::new(&chart, t, -1, images)?;
        zeta.check_weight(Grading::ResDeg, 1, "zeta")?;
        zeta.check_weight(Grading::FormDeg, -1, "zeta")?;
        let h = Self {
            zeta,
            delta,
            eps_ht: Derivation::eps_ht(&chart, t),
        };
        let contraction = h.zeta.commutator(&h.delta)?;
        if contraction != h.eps_ht {
            return Err(Error::Assertion("ζδ + δζ differs from ε_HT".into()));
        }
        Ok(h)
    }
}

/// Homotopy data for a formal exponential map via its connection.
pub fn build_zeta(f: &FormalExpMap) -> Result<HomotopyData> {
    HomotopyData::from_connection(&grothendieck_from_fexp(f)?)
}

/// `H f = Σ_{w>0} (1/w) ζ(f_w)` over `deg_HT` components.
pub fn homotopy_h(h: &HomotopyData, f: &Series) -> Series {
    let mut out = Series::zero(f.chart(), f.trunc());
    for w in f.weights(Grading::DegHt) {
        if w == 0 {
            continue;
        }
        let part = f.grade_project(Grading::DegHt, w);
        let z = h.zeta.apply(&part).scale(&BigRational::new(1.into(), w.into()));
        out = &out + &z;
    }
    out
}

/// `(Hδ + δH) f − f` on the positive-weight part and `(Hδ + δH) f` on the
/// weight-0 part; zero exactly when the homotopy identity holds on `f`.
/// Components at the truncation boundary are discarded.
pub fn homotopy_defect(h: &HomotopyData, f: &Series) -> Series {
    let t = f.trunc();
    let keep = |s: &Series| {
        let chart = s.chart().clone();
        s.filter(|m| m.resdeg(&chart) < t.res && m.formdeg(&chart) < t.form)
    };
    let f = keep(f);
    let lhs = &homotopy_h(h, &h.delta.apply(&f)) + &h.delta.apply(&homotopy_h(h, &f));
    let positive = f.filter(|m| {
        let c = f.chart();
        m.resdeg(c) + m.formdeg(c) > 0
    });
    keep(&(&lhs - &positive))
}

/// Contraction identity on generators and homotopy identity on the given
/// sample elements.
pub fn check_homotopy(h: &HomotopyData, samples: &[Series]) -> Report {
    let chart = h.zeta.chart().clone();
    let mut report = Report::new("contracting homotopy");
    let mut c = Check::new("zeta delta + delta zeta = eps_HT");
    let comm = h.zeta.commutator(&h.delta).expect("same chart");
    for idx in 0..chart.len() {
        let r = &comm.image(idx) - &h.eps_ht.image(idx);
        c.residual(chart.generator(idx).name.clone(), r);
    }
    report.push(c);
    let mut c = Check::new("(H delta + delta H) f = f for deg_HT f > 0, 0 otherwise");
    for (i, f) in samples.iter().enumerate() {
        c.residual(format!("sample {i}"), homotopy_defect(h, f));
    }
    report.push(c);
    report.fact("samples", samples.len());
    report
}

/// The unique `D`-closed `f` with `s₀* f = g`, built by
/// `f_{ℓ+1} = −H([D f^{(≤ℓ)}]_(ℓ))`.
pub fn cohomology_lift(g: &GrothendieckConnection, h: &HomotopyData, base: &Series) -> Result<Series> {
    let t = g.trunc();
    if !base.is_base_only() {
        return Err(Error::Semantic {
            block: "lift".into(),
            message: "input must be a function of the base coordinates".into(),
        });
    }
    let d = g.derivation();
    let mut f = base.clone();
    for l in 0..t.res {
        let r = d.apply_at_resdeg(&f, l);
        f = &f - &homotopy_h(h, &r);
    }
    let residual = d.apply_up_to_resdeg(&f, t.res - 1);
    if !residual.is_zero() {
        return Err(Error::NotClosed(format!("D of the lift leaves {residual}")));
    }
    if f.grade_project(Grading::ResDeg, 0) != *base {
        return Err(Error::Assertion("lift does not restrict to its input".into()));
    }
    Ok(f)
}

/// Some `p` with `D p = f` through resolution degree `N − 1`.
///
/// The lowest-resolution piece `g_n` of the remainder `g = f − Dp` is
/// `δ`-closed, so `p += H g_n` pushes the remainder up one degree.
pub fn find_primitive(g: &GrothendieckConnection, h: &HomotopyData, f: &Series) -> Result<Series> {
    let chart = g.chart().clone();
    let t = g.trunc();
    let top = t.res.saturating_sub(1);
    if f.terms().any(|(m, _)| m.formdeg(&chart) == 0) {
        return Err(Error::Semantic {
            block: "primitive".into(),
            message: "form degree must be positive".into(),
        });
    }
    let d = g.derivation();
    let closed = d.apply_up_to_resdeg(f, top.saturating_sub(1));
    if !closed.is_zero() {
        return Err(Error::NotClosed(format!("D f = {closed}")));
    }
    let mut p = Series::zero(&chart, t);
    for n in 0..=top {
        let rest = (f - &d.apply_up_to_resdeg(&p, top)).up_to_resdeg(top);
        if let Some(low) = rest.min_resdeg() {
            if low < n {
                return Err(Error::Assertion(format!(
                    "remainder reappeared at resolution degree {low}"
                )));
            }
        }
        let gn = rest.grade_project(Grading::ResDeg, i64::from(n));
        if gn.is_zero() {
            continue;
        }
        let dg = h.delta.apply(&gn);
        if !dg.is_zero() {
            return Err(Error::NotClosed(format!("lowest piece not δ-closed: {dg}")));
        }
        p = &p + &homotopy_h(h, &gn);
    }
    let left = (f - &d.apply_up_to_resdeg(&p, top)).up_to_resdeg(top);
    if !left.is_zero() {
        return Err(Error::Assertion(format!("remainder {left} survives")));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{parse_series, rat, GradedChart, Trunc};

    fn setup() -> (crate::algebra::ChartRef, GrothendieckConnection, HomotopyData) {
        let c = GradedChart::from_degrees(&[("x", 0), ("y", 0)]).unwrap();
        let f = FormalExpMap::canonical(&c, Trunc::DEFAULT);
        let g = grothendieck_from_fexp(&f).unwrap();
        let h = HomotopyData::from_connection(&g).unwrap();
        (c, g, h)
    }

    #[test]
    fn canonical_zeta_sign() {
        let (c, _, h) = setup();
        assert_eq!(
            h.zeta.image(c.form(0)),
            parse_series("-ex", &c, Trunc::DEFAULT).unwrap()
        );
        assert_eq!(
            homotopy_h(&h, &parse_series("dx", &c, Trunc::DEFAULT).unwrap()),
            parse_series("-ex", &c, Trunc::DEFAULT).unwrap()
        );
        assert!(homotopy_h(&h, &parse_series("x", &c, Trunc::DEFAULT).unwrap()).is_zero());
    }

    #[test]
    fn scaled_e1_zeta() {
        let c = GradedChart::from_degrees(&[("x", 0), ("y", 0)]).unwrap();
        let t = Trunc::DEFAULT;
        let f = FormalExpMap::new(
            &c,
            t,
            vec![
                parse_series("x + 2*ex", &c, t).unwrap(),
                parse_series("y + 2*ey", &c, t).unwrap(),
            ],
        )
        .unwrap();
        let h = build_zeta(&f).unwrap();
        // δ(ε) = -1/2 dz, so ζ(dz) = -2 ε
        assert_eq!(h.zeta.image(c.form(1)), parse_series("-2*ey", &c, t).unwrap());
    }

    #[test]
    fn lift_of_coordinate() {
        let (c, g, h) = setup();
        let t = Trunc::DEFAULT;
        let f = cohomology_lift(&g, &h, &parse_series("x", &c, t).unwrap()).unwrap();
        assert_eq!(f, parse_series("x + ex", &c, t).unwrap());
        let one = Series::constant(&c, t, rat(1));
        assert_eq!(cohomology_lift(&g, &h, &one).unwrap(), one);
    }

    #[test]
    fn primitive_of_dx() {
        let (c, g, h) = setup();
        let t = Trunc::DEFAULT;
        let f = parse_series("dx", &c, t).unwrap();
        let p = find_primitive(&g, &h, &f).unwrap();
        assert_eq!(p, parse_series("-ex", &c, t).unwrap());
        let f = g.derivation().apply(&parse_series("ex*ey", &c, t).unwrap());
        let p = find_primitive(&g, &h, &f).unwrap();
        assert_eq!(g.derivation().apply(&p).up_to_resdeg(5), f.up_to_resdeg(5));
    }
}

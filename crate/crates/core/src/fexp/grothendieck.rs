use std::collections::BTreeMap;

use num_rational::BigRational;

use super::{require_valid, FormalExpMap};
use crate::algebra::{ChartRef, Grading, Series, SeriesMatrix, Trunc};
use crate::derivation::Derivation;
use crate::error::{Error, Result};
use crate::report::{Check, Report};

/// Degree-1 derivation lifting `d` with `D(ε^a) = dz^b C_b^a(z, ε)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrothendieckConnection {
    d: Derivation,
}

impl GrothendieckConnection {
    /// Validates the lift condition, the form degree of the fibre images
    /// and unimodularity of `C₋₁`.
    pub fn new(d: Derivation) -> Result<Self> {
        let chart = d.chart().clone();
        let trunc = d.trunc();
        if d.zdeg() != 1 {
            return Err(Error::InvalidConnection {
                generator: "D".into(),
                reason: format!("degree {} instead of 1", d.zdeg()),
            });
        }
        for a in 0..chart.n_base() {
            let z = chart.base(a);
            let dz = chart.form(a);
            let name = |i: usize| chart.generator(i).name.clone();
            if d.image(z) != Series::generator(&chart, trunc, dz) {
                return Err(Error::InvalidConnection {
                    generator: name(z),
                    reason: "D(z^a) must equal dz^a".into(),
                });
            }
            if !d.image(dz).is_zero() {
                return Err(Error::InvalidConnection {
                    generator: name(dz),
                    reason: "D(dz^a) must vanish".into(),
                });
            }
            let x = d.image(chart.fiber(a));
            if x.terms().any(|(m, _)| m.formdeg(&chart) != 1) {
                return Err(Error::InvalidConnection {
                    generator: name(chart.fiber(a)),
                    reason: "D(ε^a) must have form degree 1".into(),
                });
            }
        }
        let g = Self { d };
        g.c_minus1()
            .inverse(&chart.base_parities())
            .map_err(|e| Error::InvalidConnection {
                generator: "C_-1".into(),
                reason: e.to_string(),
            })?;
        Ok(g)
    }

    /// `d − dz^a ∂/∂ε^a`.
    pub fn canonical(chart: &ChartRef, trunc: Trunc) -> Self {
        Self {
            d: Derivation::de_rham(chart, trunc).add(&Derivation::canonical_delta(chart, trunc)),
        }
    }

    pub fn derivation(&self) -> &Derivation {
        &self.d
    }

    pub fn chart(&self) -> &ChartRef {
        self.d.chart()
    }

    pub fn trunc(&self) -> Trunc {
        self.d.trunc()
    }

    /// `D(ε^a)`.
    pub fn fibre_image(&self, a: usize) -> Series {
        self.d.image(self.chart().fiber(a))
    }

    /// `M_b^a = ∂_{dz^b}` of the resolution-degree-0 part of `D(ε^a)`.
    pub fn c_minus1(&self) -> SeriesMatrix {
        let chart = self.chart().clone();
        let k = chart.n_base();
        SeriesMatrix::from_fn(&chart, self.trunc(), k, k, |b, a| {
            self.fibre_image(a)
                .grade_project(Grading::ResDeg, 0)
                .partial(chart.form(b))
        })
    }

    /// The resolution-weight −1 piece `δ`.
    pub fn delta(&self) -> Derivation {
        self.d.piece(Grading::ResDeg, -1)
    }

    /// Weight-homogeneous pieces `D_k`.
    pub fn pieces(&self) -> BTreeMap<i64, Derivation> {
        self.d.resdeg_decompose()
    }

    /// Same connection with fibre images cut at resolution degree `n`.
    pub fn up_to_resdeg(&self, n: u32) -> GrothendieckConnection {
        Self {
            d: self.d.map_images(|_, s| s.up_to_resdeg(n)),
        }
    }
}

fn matrix_parities(chart: &ChartRef) -> Vec<bool> {
    chart.base_parities()
}

/// Solves `D(fexp* z^a) = 0` order by order in resolution degree for the
/// fibre images `X^a = D(ε^a)`. Resolution degree `ℓ` of the equation reads
/// `X_(ℓ)^c E_c^a = −[dz^b ∂_b P^a + X_(<ℓ)^c (J − E)_c^a]_(ℓ)`, with
/// `J_c^a = ∂_{ε^c} P^a`; it is solved with `E⁻¹`. Images are kept through
/// resolution degree `N`, reading the pullbacks as exact polynomials.
pub fn grothendieck_from_fexp(f: &FormalExpMap) -> Result<GrothendieckConnection> {
    require_valid(f)?;
    let chart = f.chart().clone();
    let t = f.trunc();
    let k = chart.n_base();
    let e = f.e1();
    let kinv = e.inverse(&matrix_parities(&chart))?;
    let d = Derivation::de_rham(&chart, t);
    let r: Vec<Series> = f.pullbacks().iter().map(|p| d.apply(p)).collect();
    let jhigh: Vec<Vec<Series>> = (0..k)
        .map(|c| {
            (0..k)
                .map(|a| {
                    let j = f.pullback(a).partial(chart.fiber(c));
                    j.filter(|m| m.resdeg(&chart) > 0)
                })
                .collect()
        })
        .collect();
    // jpieces[c][a][j]: resolution-degree j part of ∂P^a/∂ε^c, j ≥ 1
    let jpieces: Vec<Vec<Vec<Series>>> = jhigh
        .iter()
        .map(|row| {
            row.iter()
                .map(|j| {
                    (0..=t.res)
                        .map(|l| j.grade_project(Grading::ResDeg, i64::from(l)))
                        .collect()
                })
                .collect()
        })
        .collect();
    // xpieces[c][i]: resolution-degree i part of D(ε^c)
    let mut xpieces: Vec<Vec<Series>> = vec![Vec::new(); k];
    for l in 0..=t.res {
        let mut y = Vec::with_capacity(k);
        for a in 0..k {
            let mut acc = r[a].grade_project(Grading::ResDeg, i64::from(l));
            for c in 0..k {
                for (i, xi) in xpieces[c].iter().enumerate() {
                    let j = l as usize - i;
                    if j >= 1 && !xi.is_zero() && !jpieces[c][a][j].is_zero() {
                        acc.add_product(xi, &jpieces[c][a][j]);
                    }
                }
            }
            y.push(acc);
        }
        for c in 0..k {
            let mut xc = Series::zero(&chart, t);
            for (a, ya) in y.iter().enumerate() {
                xc -= &(ya * kinv.get(a, c));
            }
            xpieces[c].push(xc.grade_project(Grading::ResDeg, i64::from(l)));
        }
    }
    let x: Vec<Series> = xpieces
        .into_iter()
        .map(|pieces| {
            let mut total = Series::zero(&chart, t);
            for p in &pieces {
                total += p;
            }
            total
        })
        .collect();
    let mut images = d.images().clone();
    for (a, xa) in x.into_iter().enumerate() {
        images.insert(chart.fiber(a), xa);
    }
    let g = GrothendieckConnection::new(Derivation::new(&chart, t, 1, images)?)?;
    for (a, p) in f.pullbacks().iter().enumerate() {
        let residual = g.derivation().apply(p);
        if !residual.is_zero() {
            return Err(Error::Assertion(format!(
                "D(fexp* {}) = {residual}",
                chart.generator(chart.base(a)).name
            )));
        }
    }
    Ok(g)
}

/// Recovers the formal exponential map annihilated by `G`. At resolution
/// degree `ℓ`, `C₋₁` times the `ε`-gradient of `e_{ℓ+1}` is fixed by the
/// lower orders; the gradient is solved for with `C₋₁⁻¹` and integrated by
/// the Euler identity, which must reproduce it.
pub fn fexp_from_grothendieck(g: &GrothendieckConnection) -> Result<FormalExpMap> {
    let chart = g.chart().clone();
    let t = g.trunc();
    let k = chart.n_base();
    let m = g.c_minus1();
    let minv = m.inverse(&matrix_parities(&chart))?;
    let d = g.derivation();
    let mut p: Vec<Series> = (0..k).map(|a| Series::generator(&chart, t, chart.base(a))).collect();
    for l in 0..t.res {
        let mut next = Vec::with_capacity(k);
        for a in 0..k {
            let rhs = -&d.apply_at_resdeg(&p[a], l);
            let w: Vec<Series> = (0..k).map(|b| rhs.partial(chart.form(b))).collect();
            let mut rebuilt = Series::zero(&chart, t);
            for (b, wb) in w.iter().enumerate() {
                rebuilt.add_product(&Series::generator(&chart, t, chart.form(b)), wb);
            }
            if rebuilt != rhs {
                return Err(Error::Assertion(format!(
                    "right-hand side at resolution degree {l} is not linear in dz"
                )));
            }
            let grad: Vec<Series> = (0..k)
                .map(|c| {
                    let mut acc = Series::zero(&chart, t);
                    for (b, wb) in w.iter().enumerate() {
                        acc.add_product(minv.get(c, b), wb);
                    }
                    acc
                })
                .collect();
            let mut q = Series::zero(&chart, t);
            for (c, gc) in grad.iter().enumerate() {
                q.add_product(&Series::generator(&chart, t, chart.fiber(c)), gc);
            }
            let q = q.scale(&BigRational::new(1.into(), (i64::from(l) + 1).into()));
            for (c, gc) in grad.iter().enumerate() {
                if q.partial(chart.fiber(c)) != *gc {
                    return Err(Error::NotIntegrable {
                        order: l + 1,
                        generator: chart.generator(chart.base(a)).name.clone(),
                    });
                }
            }
            next.push(q);
        }
        for (pa, q) in p.iter_mut().zip(next) {
            *pa = &*pa + &q;
        }
    }
    let f = FormalExpMap::new(&chart, t, p)?;
    for (a, pa) in f.pullbacks().iter().enumerate() {
        let residual = d.apply(pa).up_to_resdeg(t.res - 1);
        if !residual.is_zero() {
            return Err(Error::Assertion(format!(
                "D(fexp* {}) = {residual}",
                chart.generator(chart.base(a)).name
            )));
        }
    }
    require_valid(&f)?;
    Ok(f)
}

/// Nonzero piece of `D²` on one generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatnessResidual {
    pub generator: String,
    pub weight: i64,
    pub residual: Series,
}

/// Images of `½[D, D]` on generators, split by resolution weight. Only
/// components of resolution degree at most `N − 1` are kept: the degree-`N`
/// component would need fibre images beyond the truncation.
pub fn check_flatness(g: &GrothendieckConnection) -> Vec<FlatnessResidual> {
    let chart = g.chart();
    let top = g.trunc().res.saturating_sub(1);
    let d = g.derivation();
    let mut out = Vec::new();
    // D odd, so ½[D, D] = D ∘ D on generators
    for idx in 0..chart.len() {
        let img = d.apply_up_to_resdeg(&d.image(idx), top);
        let w0 = i64::from(chart.generator(idx).resdeg());
        for w in img.weights(Grading::ResDeg) {
            out.push(FlatnessResidual {
                generator: chart.generator(idx).name.clone(),
                weight: w - w0,
                residual: img.grade_project(Grading::ResDeg, w),
            });
        }
    }
    out.sort_by_key(|r| r.weight);
    out
}

pub fn flatness_report(g: &GrothendieckConnection) -> Report {
    let mut report = Report::new("flatness of D");
    let mut check = Check::new("D^2 = 0");
    for r in check_flatness(g) {
        check.residual(format!("{} weight {}", r.generator, r.weight), r.residual);
    }
    report.push(check);
    report.fact("order", g.trunc().res.saturating_sub(1));
    report
}

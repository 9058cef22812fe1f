use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::One;

use crate::algebra::{ChartRef, GradedChart, Grading, Klass, Series, Trunc};
use crate::error::{Error, Result};

/// Left derivation stored by its values on generators. Generators absent
/// from `images` are sent to zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    chart: ChartRef,
    trunc: Trunc,
    zdeg: i32,
    images: BTreeMap<usize, Series>,
}

impl Derivation {
    pub fn new(chart: &ChartRef, trunc: Trunc, zdeg: i32, images: BTreeMap<usize, Series>) -> Result<Self> {
        for (&idx, img) in &images {
            let g = chart.generator(idx);
            if !GradedChart::same(img.chart(), chart) {
                return Err(Error::ChartMismatch(format!("image of `{}`", g.name)));
            }
            if img.trunc() != trunc {
                return Err(Error::TruncationMismatch(format!("image of `{}`", g.name)));
            }
            if !img.is_homogeneous(g.zdeg + zdeg) {
                return Err(Error::Inhomogeneous {
                    generator: g.name.clone(),
                    expected: g.zdeg + zdeg,
                });
            }
            if g.klass == Klass::Param && !img.is_zero() {
                return Err(Error::Semantic {
                    block: "derivation".into(),
                    message: format!("parameter `{}` must be constant", g.name),
                });
            }
        }
        let mut d = Self {
            chart: chart.clone(),
            trunc,
            zdeg,
            images,
        };
        d.prune();
        Ok(d)
    }

    pub fn zero(chart: &ChartRef, trunc: Trunc, zdeg: i32) -> Self {
        Self {
            chart: chart.clone(),
            trunc,
            zdeg,
            images: BTreeMap::new(),
        }
    }

    fn prune(&mut self) {
        self.images.retain(|_, s| !s.is_zero());
    }

    fn from_raw(chart: &ChartRef, trunc: Trunc, zdeg: i32, images: BTreeMap<usize, Series>) -> Self {
        let mut d = Self {
            chart: chart.clone(),
            trunc,
            zdeg,
            images,
        };
        d.prune();
        d
    }

    /// De Rham differential `dz^a ∂/∂z^a`.
    pub fn de_rham(chart: &ChartRef, trunc: Trunc) -> Self {
        let images = (0..chart.n_base())
            .map(|a| (chart.base(a), Series::generator(chart, trunc, chart.form(a))))
            .collect();
        Self::from_raw(chart, trunc, 1, images)
    }

    /// `-dz^a ∂/∂ε^a`, the resolution-weight −1 piece for a proper map.
    pub fn canonical_delta(chart: &ChartRef, trunc: Trunc) -> Self {
        let images = (0..chart.n_base())
            .map(|a| (chart.fiber(a), -Series::generator(chart, trunc, chart.form(a))))
            .collect();
        Self::from_raw(chart, trunc, 1, images)
    }

    /// Counting field `dz^a ∂/∂dz^a + ε^a ∂/∂ε^a`.
    pub fn eps_ht(chart: &ChartRef, trunc: Trunc) -> Self {
        let mut images = BTreeMap::new();
        for a in 0..chart.n_base() {
            images.insert(chart.form(a), Series::generator(chart, trunc, chart.form(a)));
            images.insert(chart.fiber(a), Series::generator(chart, trunc, chart.fiber(a)));
        }
        Self::from_raw(chart, trunc, 0, images)
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    pub fn trunc(&self) -> Trunc {
        self.trunc
    }

    pub fn zdeg(&self) -> i32 {
        self.zdeg
    }

    pub fn is_odd(&self) -> bool {
        self.zdeg.rem_euclid(2) == 1
    }

    pub fn image(&self, idx: usize) -> Series {
        self.images
            .get(&idx)
            .cloned()
            .unwrap_or_else(|| Series::zero(&self.chart, self.trunc))
    }

    pub fn images(&self) -> &BTreeMap<usize, Series> {
        &self.images
    }

    pub fn is_zero(&self) -> bool {
        self.images.is_empty()
    }

    /// `Σ_g V(g) · ∂_g f`.
    pub fn apply(&self, f: &Series) -> Series {
        self.apply_filtered(f, None)
    }

    fn apply_filtered(&self, f: &Series, res: Option<(u32, u32)>) -> Series {
        let pairs: Vec<(&Series, Series)> = self
            .images
            .iter()
            .map(|(&idx, img)| (img, f.partial(idx)))
            .filter(|(_, p)| !p.is_zero())
            .collect();
        Series::sum_of_products(&self.chart, self.trunc, &pairs, res)
    }

    /// Resolution-degree `l` component of `V(f)`.
    pub fn apply_at_resdeg(&self, f: &Series, l: u32) -> Series {
        self.apply_filtered(f, Some((l, l)))
    }

    /// Components of `V(f)` of resolution degree at most `l`.
    pub fn apply_up_to_resdeg(&self, f: &Series, l: u32) -> Series {
        self.apply_filtered(f, Some((0, l)))
    }

    /// Graded commutator `[V, W] = VW − (−1)^{|V||W|} WV`.
    pub fn commutator(&self, other: &Derivation) -> Result<Derivation> {
        self.check_compatible(other)?;
        let sign_negative = !(self.is_odd() && other.is_odd());
        let mut images = BTreeMap::new();
        for idx in 0..self.chart.len() {
            let vw = self.apply(&other.image(idx));
            let wv = other.apply(&self.image(idx));
            let img = if sign_negative { &vw - &wv } else { &vw + &wv };
            images.insert(idx, img);
        }
        Ok(Self::from_raw(&self.chart, self.trunc, self.zdeg + other.zdeg, images))
    }

    /// Resolution-weight `k` piece of `V²` for odd `V`, without forming the
    /// whole square.
    pub fn square_resdeg_piece(&self, k: i64) -> Derivation {
        assert!(self.is_odd(), "square of an even derivation");
        let mut images = BTreeMap::new();
        for idx in 0..self.chart.len() {
            let target = k + i64::from(self.chart.generator(idx).resdeg());
            if target < 0 || target > i64::from(self.trunc.res) {
                continue;
            }
            images.insert(idx, self.apply_at_resdeg(&self.image(idx), target as u32));
        }
        Self::from_raw(&self.chart, self.trunc, 2 * self.zdeg, images)
    }

    /// `V² = ½[V, V]`, the square of an odd derivation.
    pub fn square(&self) -> Derivation {
        let c = self.commutator(self).expect("same chart");
        c.scale(&BigRational::new(1.into(), 2.into()))
    }

    fn check_compatible(&self, other: &Derivation) -> Result<()> {
        if !GradedChart::same(&self.chart, &other.chart) {
            return Err(Error::ChartMismatch("derivations".into()));
        }
        if self.trunc != other.trunc {
            return Err(Error::TruncationMismatch("derivations".into()));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Derivation) -> Result<Derivation> {
        self.check_compatible(other)?;
        if self.zdeg != other.zdeg && !self.is_zero() && !other.is_zero() {
            return Err(Error::Semantic {
                block: "derivation".into(),
                message: format!("adding degrees {} and {}", self.zdeg, other.zdeg),
            });
        }
        let zdeg = if self.is_zero() { other.zdeg } else { self.zdeg };
        let mut images = self.images.clone();
        for (&idx, img) in &other.images {
            let sum = &self.image(idx) + img;
            images.insert(idx, sum);
        }
        Ok(Self::from_raw(&self.chart, self.trunc, zdeg, images))
    }

    pub fn add(&self, other: &Derivation) -> Derivation {
        self.try_add(other).expect("derivation addition")
    }

    pub fn sub(&self, other: &Derivation) -> Derivation {
        self.add(&other.scale(&-BigRational::one()))
    }

    pub fn scale(&self, c: &BigRational) -> Derivation {
        let images = self.images.iter().map(|(&i, s)| (i, s.scale(c))).collect();
        Self::from_raw(&self.chart, self.trunc, self.zdeg, images)
    }

    /// Same derivation with every image passed through `f`.
    pub fn map_images(&self, f: impl Fn(usize, &Series) -> Series) -> Derivation {
        let images = self.images.iter().map(|(&i, s)| (i, f(i, s))).collect();
        Self::from_raw(&self.chart, self.trunc, self.zdeg, images)
    }

    /// Pieces of definite weight in `which`: the weight-`k` piece sends `g`
    /// to the part of `V(g)` whose weight exceeds that of `g` by `k`.
    pub fn weight_decompose(&self, which: Grading) -> BTreeMap<i64, Derivation> {
        let mut out: BTreeMap<i64, BTreeMap<usize, Series>> = BTreeMap::new();
        for (&idx, img) in &self.images {
            let g = self.chart.generator(idx);
            let base = match which {
                Grading::ResDeg => i64::from(g.resdeg()),
                Grading::FormDeg => i64::from(g.formdeg()),
                Grading::DegHt => i64::from(g.resdeg() + g.formdeg()),
            };
            for w in img.weights(which) {
                out.entry(w - base)
                    .or_default()
                    .insert(idx, img.grade_project(which, w));
            }
        }
        out.into_iter()
            .map(|(k, images)| (k, Self::from_raw(&self.chart, self.trunc, self.zdeg, images)))
            .collect()
    }

    pub fn resdeg_decompose(&self) -> BTreeMap<i64, Derivation> {
        self.weight_decompose(Grading::ResDeg)
    }

    /// Weight-`k` piece in `which`; zero when absent.
    pub fn piece(&self, which: Grading, k: i64) -> Derivation {
        self.weight_decompose(which)
            .remove(&k)
            .unwrap_or_else(|| Self::zero(&self.chart, self.trunc, self.zdeg))
    }

    /// The single weight of a weight-homogeneous derivation, `None` when the
    /// derivation mixes weights. Zero derivations report `Some(declared)`.
    pub fn homogeneous_weight(&self, which: Grading) -> Option<i64> {
        let pieces = self.weight_decompose(which);
        match pieces.len() {
            0 => Some(0),
            1 => pieces.keys().next().copied(),
            _ => None,
        }
    }

    /// Asserts the declared weight; used on pieces built by the recursions.
    pub fn check_weight(&self, which: Grading, declared: i64, label: &str) -> Result<()> {
        if self.is_zero() {
            return Ok(());
        }
        match self.homogeneous_weight(which) {
            Some(w) if w == declared => Ok(()),
            other => Err(Error::Assertion(format!(
                "{label}: declared {which:?} weight {declared}, found {other:?}"
            ))),
        }
    }

    /// Truncates every image to the given truncation.
    pub fn truncate(&self, trunc: Trunc) -> Derivation {
        let images = self.images.iter().map(|(&i, s)| (i, s.truncate(trunc))).collect();
        Self::from_raw(&self.chart, trunc, self.zdeg, images)
    }

    /// Tangent lift of a derivation acting on base coordinates to the
    /// ring with forms: `dz^a ↦ (−1)^{|V|} d(V z^a)`. The lift is the Lie
    /// derivative along `V` on forms.
    pub fn tangent_lift(&self) -> Derivation {
        let d = Derivation::de_rham(&self.chart, self.trunc);
        let mut images = BTreeMap::new();
        for a in 0..self.chart.n_base() {
            let v = self.image(self.chart.base(a));
            images.insert(self.chart.base(a), v.clone());
            let dv = d.apply(&v);
            images.insert(self.chart.form(a), if self.is_odd() { -dv } else { dv });
        }
        Self::from_raw(&self.chart, self.trunc, self.zdeg, images)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{parse_series, rat};

    fn chart() -> ChartRef {
        GradedChart::from_degrees(&[("x", 0), ("y", 0), ("th", 1)]).unwrap()
    }

    fn s(c: &ChartRef, t: &str) -> Series {
        parse_series(t, c, Trunc::DEFAULT).unwrap()
    }

    #[test]
    fn de_rham_leibniz_on_product() {
        let c = chart();
        let d = Derivation::de_rham(&c, Trunc::DEFAULT);
        assert_eq!(d.apply(&s(&c, "x*y")), s(&c, "dx*y + x*dy"));
        assert!(d.square().is_zero());
    }

    #[test]
    fn canonical_delta_on_fibre() {
        let c = chart();
        let delta = Derivation::canonical_delta(&c, Trunc::DEFAULT);
        assert_eq!(delta.apply(&s(&c, "ex")), s(&c, "-dx"));
        assert!(delta.commutator(&delta).unwrap().is_zero());
    }

    #[test]
    fn decompose_recomposes() {
        let c = chart();
        let d = Derivation::de_rham(&c, Trunc::DEFAULT);
        let v = d.add(&Derivation::canonical_delta(&c, Trunc::DEFAULT));
        let pieces = v.resdeg_decompose();
        assert_eq!(pieces.keys().copied().collect::<Vec<_>>(), vec![-1, 0]);
        assert_eq!(pieces[&-1], Derivation::canonical_delta(&c, Trunc::DEFAULT));
        assert_eq!(pieces[&0], d);
    }

    #[test]
    fn odd_square_matches_double_application() {
        let c = chart();
        let mut images = BTreeMap::new();
        images.insert(c.base(0), s(&c, "x*th"));
        images.insert(c.fiber(2), s(&c, "x*dx*eth + dth"));
        let v = Derivation::new(&c, Trunc::DEFAULT, 1, images).unwrap();
        let sq = v.square();
        for idx in 0..c.len() {
            let g = Series::generator(&c, Trunc::DEFAULT, idx);
            assert_eq!(sq.apply(&g), v.apply(&v.apply(&g)));
        }
        assert_eq!(sq.scale(&rat(2)), v.commutator(&v).unwrap());
    }

    #[test]
    fn inhomogeneous_image_rejected() {
        let c = chart();
        let mut images = BTreeMap::new();
        images.insert(c.base(0), s(&c, "dx + x"));
        assert!(Derivation::new(&c, Trunc::DEFAULT, 1, images).is_err());
    }
}

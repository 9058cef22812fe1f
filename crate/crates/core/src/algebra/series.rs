use std::collections::BTreeMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rustc_hash::FxHashMap as HashMap;
use serde::{Deserialize, Serialize};

use super::chart::{ChartRef, GradedChart};
use super::coeff::{Acc, Factor};
use super::monomial::Monomial;
use crate::error::{Error, Result};

/// Truncation orders: maximal resolution degree and form degree kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trunc {
    pub res: u32,
    pub form: u32,
}

impl Trunc {
    pub const DEFAULT: Trunc = Trunc { res: 6, form: 4 };

    pub fn new(res: u32, form: u32) -> Self {
        Self { res, form }
    }
}

impl Default for Trunc {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Which grading a homogeneous projection refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grading {
    ResDeg,
    FormDeg,
    /// `resdeg + formdeg`.
    DegHt,
}

pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Truncated graded-commutative polynomial with exact rational
/// coefficients. Terms are kept in canonical form, so equality of two
/// series is equality of their term maps.
#[derive(Debug, Clone)]
pub struct Series {
    chart: ChartRef,
    trunc: Trunc,
    terms: BTreeMap<Monomial, BigRational>,
}

impl PartialEq for Series {
    fn eq(&self, other: &Self) -> bool {
        GradedChart::same(&self.chart, &other.chart) && self.trunc == other.trunc && self.terms == other.terms
    }
}

impl Eq for Series {}

impl Series {
    pub fn zero(chart: &ChartRef, trunc: Trunc) -> Self {
        Self {
            chart: chart.clone(),
            trunc,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(chart: &ChartRef, trunc: Trunc, c: BigRational) -> Self {
        let mut s = Self::zero(chart, trunc);
        if !c.is_zero() {
            s.terms.insert(Monomial::one(chart.len()), c);
        }
        s
    }

    pub fn one(chart: &ChartRef, trunc: Trunc) -> Self {
        Self::constant(chart, trunc, BigRational::one())
    }

    pub fn generator(chart: &ChartRef, trunc: Trunc, idx: usize) -> Self {
        Self::monomial(chart, trunc, Monomial::generator(chart.len(), idx), BigRational::one())
    }

    pub fn monomial(chart: &ChartRef, trunc: Trunc, m: Monomial, c: BigRational) -> Self {
        let mut s = Self::zero(chart, trunc);
        s.insert_term(m, c);
        s
    }

    /// Builds a series from raw terms; out-of-truncation terms are dropped and
    /// repeated odd generators rejected.
    pub fn from_terms(
        chart: &ChartRef,
        trunc: Trunc,
        terms: impl IntoIterator<Item = (Monomial, BigRational)>,
    ) -> Result<Self> {
        let mut s = Self::zero(chart, trunc);
        for (m, c) in terms {
            if m.exponents().len() != chart.len() {
                return Err(Error::ChartMismatch("monomial length".into()));
            }
            for (i, &e) in m.exponents().iter().enumerate() {
                if e > 1 && chart.is_odd(i) {
                    return Err(Error::Semantic {
                        block: "series".into(),
                        message: format!("odd generator `{}` with exponent {}", chart.generator(i).name, e),
                    });
                }
            }
            s.insert_term(m, c);
        }
        Ok(s)
    }

    fn insert_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        if m.resdeg(&self.chart) > self.trunc.res || m.formdeg(&self.chart) > self.trunc.form {
            return;
        }
        add_into(&mut self.terms, m, c);
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    pub fn trunc(&self) -> Trunc {
        self.trunc
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn term_map(&self) -> &BTreeMap<Monomial, BigRational> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn constant_term(&self) -> BigRational {
        self.coefficient(&Monomial::one(self.chart.len()))
    }

    fn check_compatible(&self, other: &Series) -> Result<()> {
        if !GradedChart::same(&self.chart, &other.chart) {
            return Err(Error::ChartMismatch(format!("{} vs {}", self.chart, other.chart)));
        }
        if self.trunc != other.trunc {
            return Err(Error::TruncationMismatch(format!(
                "{:?} vs {:?}",
                self.trunc, other.trunc
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Series) -> Result<Series> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            add_into(&mut out.terms, m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Series) -> Result<Series> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            add_into(&mut out.terms, m.clone(), -c.clone());
        }
        Ok(out)
    }

    /// Graded-commutative product; terms beyond truncation are dropped.
    pub fn try_mul(&self, other: &Series) -> Result<Series> {
        self.check_compatible(other)?;
        let mut acc = HashMap::default();
        self.product_into(other, None, &mut acc);
        Ok(Series {
            chart: self.chart.clone(),
            trunc: self.trunc,
            terms: acc
                .into_iter()
                .filter(|(_, c)| !c.is_zero())
                .map(|(m, c)| (m, c.into_big()))
                .collect(),
        })
    }

    /// `self += a · b`.
    pub fn add_product(&mut self, a: &Series, b: &Series) {
        self.add_product_filtered(a, b, None);
    }

    /// `self += (a · b)` restricted to resolution degree `l`.
    pub fn add_product_at_resdeg(&mut self, a: &Series, b: &Series, l: u32) {
        self.add_product_filtered(a, b, Some((l, l)));
    }

    /// `self += (a · b)` restricted to resolution degree at most `l`.
    pub fn add_product_up_to_resdeg(&mut self, a: &Series, b: &Series, l: u32) {
        self.add_product_filtered(a, b, Some((0, l)));
    }

    /// `Σ aᵢ · bᵢ`, optionally restricted to resolution degrees in `lo..=hi`.
    pub fn sum_of_products(
        chart: &ChartRef,
        trunc: Trunc,
        pairs: &[(&Series, Series)],
        res: Option<(u32, u32)>,
    ) -> Series {
        let mut acc = HashMap::default();
        for (a, b) in pairs {
            a.check_compatible(b).expect("series multiplication");
            a.product_into(b, res, &mut acc);
        }
        let mut out = Series::zero(chart, trunc);
        out.terms = acc
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(m, c)| (m, c.into_big()))
            .filter(|(_, c)| !c.is_zero())
            .collect();
        out
    }

    fn add_product_filtered(&mut self, a: &Series, b: &Series, res: Option<(u32, u32)>) {
        a.check_compatible(b).expect("series multiplication");
        self.check_compatible(a).expect("series addition");
        let mut acc = HashMap::default();
        a.product_into(b, res, &mut acc);
        for (m, c) in acc {
            if !c.is_zero() {
                add_into(&mut self.terms, m, c.into_big());
            }
        }
    }

    fn product_into(&self, other: &Series, res: Option<(u32, u32)>, acc: &mut HashMap<Monomial, Acc>) {
        let chart = &self.chart;
        if chart.len() > 128 {
            for (m1, c1) in &self.terms {
                for (m2, c2) in &other.terms {
                    let r = m1.resdeg(chart) + m2.resdeg(chart);
                    if r > self.trunc.res
                        || res.is_some_and(|(lo, hi)| r < lo || r > hi)
                        || m1.formdeg(chart) + m2.formdeg(chart) > self.trunc.form
                    {
                        continue;
                    }
                    if let Some((m, negative)) = m1.mul(m2, chart) {
                        accumulate(acc, m, Acc::product(&Factor::new(c1), &Factor::new(c2), negative));
                    }
                }
            }
            return;
        }
        fn prep(s: &Series) -> Vec<(&Monomial, Factor, u32, u32, u128)> {
            let chart = &s.chart;
            s.terms
                .iter()
                .map(|(m, c)| (m, Factor::new(c), m.resdeg(chart), m.formdeg(chart), odd_mask(m, chart)))
                .collect()
        }
        let left = prep(self);
        // right factors bucketed by (resolution degree, form degree)
        let (nr, nf) = (self.trunc.res as usize + 1, self.trunc.form as usize + 1);
        let mut buckets = vec![Vec::new(); nr * nf];
        for t in prep(other) {
            if (t.2 as usize) < nr && (t.3 as usize) < nf {
                buckets[t.2 as usize * nf + t.3 as usize].push(t);
            }
        }
        let (lo, hi) = res.unwrap_or((0, self.trunc.res));
        for (m1, c1, r1, f1, o1) in &left {
            if *r1 > hi || *f1 > self.trunc.form {
                continue;
            }
            for r2 in lo.saturating_sub(*r1)..=(hi - r1) {
                for f2 in 0..=(self.trunc.form - f1) {
                    for (m2, c2, _, _, o2) in &buckets[r2 as usize * nf + f2 as usize] {
                        if o1 & o2 != 0 {
                            continue;
                        }
                        // each odd factor of m2 passes the odd factors of m1 above it
                        let mut passes = 0u32;
                        let mut bits = *o2;
                        while bits != 0 {
                            let j = bits.trailing_zeros();
                            bits &= bits - 1;
                            passes += (o1 >> j >> 1).count_ones();
                        }
                        let exps: Vec<u16> = m1.exponents().iter().zip(m2.exponents()).map(|(a, b)| a + b).collect();
                        accumulate(
                            acc,
                            Monomial::from_exponents(exps),
                            Acc::product(c1, c2, passes % 2 == 1),
                        );
                    }
                }
            }
        }
    }

    pub fn scale(&self, c: &BigRational) -> Series {
        if c.is_zero() {
            return Series::zero(&self.chart, self.trunc);
        }
        Series {
            chart: self.chart.clone(),
            trunc: self.trunc,
            terms: self.terms.iter().map(|(m, x)| (m.clone(), x * c)).collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Series {
        let mut out = Series::one(&self.chart, self.trunc);
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    /// Left derivative `∂/∂g`.
    pub fn partial(&self, idx: usize) -> Series {
        // lowering one exponent is injective, so no terms collide
        let terms = self
            .terms
            .iter()
            .filter_map(|(m, c)| {
                let (e, lowered, negative) = m.partial(idx, &self.chart)?;
                let v = c * rat(i64::from(e));
                Some((lowered, if negative { -v } else { v }))
            })
            .collect();
        Series {
            chart: self.chart.clone(),
            trunc: self.trunc,
            terms,
        }
    }

    /// Homogeneous component of weight `k` in the given grading.
    pub fn grade_project(&self, which: Grading, k: i64) -> Series {
        self.filter(|m| weight(m, &self.chart, which) == k)
    }

    pub fn filter(&self, keep: impl Fn(&Monomial) -> bool) -> Series {
        Series {
            chart: self.chart.clone(),
            trunc: self.trunc,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| keep(m))
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// Components with resolution degree at most `k`.
    pub fn up_to_resdeg(&self, k: u32) -> Series {
        let chart = self.chart.clone();
        self.filter(|m| m.resdeg(&chart) <= k)
    }

    /// Set of weights present in the given grading.
    pub fn weights(&self, which: Grading) -> Vec<i64> {
        let mut ws: Vec<i64> = self.terms.keys().map(|m| weight(m, &self.chart, which)).collect();
        ws.sort_unstable();
        ws.dedup();
        ws
    }

    pub fn min_resdeg(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.resdeg(&self.chart)).min()
    }

    pub fn max_resdeg(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.resdeg(&self.chart)).max()
    }

    /// `Some(d)` if every term has ℤ-degree `d`. `None` for zero or
    /// inhomogeneous series; use [`Series::is_homogeneous`] to test a degree.
    pub fn zdeg(&self) -> Option<i32> {
        let mut it = self.terms.keys().map(|m| m.zdeg(&self.chart));
        let first = it.next()?;
        it.all(|d| d == first).then_some(first)
    }

    pub fn is_homogeneous(&self, d: i32) -> bool {
        self.terms.keys().all(|m| m.zdeg(&self.chart) == d)
    }

    /// True when only base generators and parameters occur.
    pub fn is_base_only(&self) -> bool {
        self.terms.keys().all(|m| m.is_base_only(&self.chart))
    }

    /// Same terms under another truncation (terms beyond it are dropped).
    pub fn truncate(&self, trunc: Trunc) -> Series {
        let mut out = Series::zero(&self.chart, trunc);
        for (m, c) in &self.terms {
            out.insert_term(m.clone(), c.clone());
        }
        out
    }

    /// Same terms over an equal chart instance (for example after a base
    /// point change).
    pub fn rechart(&self, chart: &ChartRef) -> Result<Series> {
        if !GradedChart::same(&self.chart, chart) {
            return Err(Error::ChartMismatch(format!("{} vs {}", self.chart, chart)));
        }
        Ok(Series {
            chart: chart.clone(),
            trunc: self.trunc,
            terms: self.terms.clone(),
        })
    }

    /// Units are exactly `c + n` with `c` a nonzero rational and `n`
    /// nilpotent.
    pub fn is_unit(&self) -> bool {
        let c = self.constant_term();
        if c.is_zero() {
            return false;
        }
        self.terms
            .keys()
            .all(|m| m.is_one() || is_nilpotent_term(m, &self.chart))
    }

    /// Inverse of a unit via the terminating geometric series
    /// `(c + n)^{-1} = c^{-1} Σ (-n/c)^k`.
    pub fn inverse(&self) -> Result<Series> {
        if !self.is_unit() {
            return Err(Error::NotUnimodular(format!("`{}` is not a unit", self)));
        }
        let c = self.constant_term();
        let cinv = BigRational::one() / &c;
        let one = Series::one(&self.chart, self.trunc);
        let nil = (self - &Series::constant(&self.chart, self.trunc, c)).scale(&-cinv.clone());
        let mut out = one.clone();
        let mut power = one;
        loop {
            power = &power * &nil;
            if power.is_zero() {
                break;
            }
            out = &out + &power;
        }
        Ok(out.scale(&cinv))
    }
}

/// Odd generators are nilpotent in the ring; positive resolution or form
/// degree is nilpotent under truncation.
fn is_nilpotent_term(m: &Monomial, chart: &GradedChart) -> bool {
    m.odd_count(chart) > 0 || m.resdeg(chart) > 0 || m.formdeg(chart) > 0
}

pub(crate) fn weight(m: &Monomial, chart: &GradedChart, which: Grading) -> i64 {
    match which {
        Grading::ResDeg => i64::from(m.resdeg(chart)),
        Grading::FormDeg => i64::from(m.formdeg(chart)),
        Grading::DegHt => i64::from(m.resdeg(chart) + m.formdeg(chart)),
    }
}

fn odd_mask(m: &Monomial, chart: &GradedChart) -> u128 {
    let mut mask = 0u128;
    for (i, &e) in m.exponents().iter().enumerate() {
        if e > 0 && chart.is_odd(i) {
            mask |= 1 << i;
        }
    }
    mask
}

fn accumulate(acc: &mut HashMap<Monomial, Acc>, m: Monomial, c: Acc) {
    use std::collections::hash_map::Entry;
    match acc.entry(m) {
        Entry::Vacant(v) => {
            v.insert(c);
        }
        Entry::Occupied(mut o) => o.get_mut().add(c),
    }
}

fn add_into(terms: &mut BTreeMap<Monomial, BigRational>, m: Monomial, c: BigRational) {
    use std::collections::btree_map::Entry;
    match terms.entry(m) {
        Entry::Vacant(v) => {
            if !c.is_zero() {
                v.insert(c);
            }
        }
        Entry::Occupied(mut o) => {
            *o.get_mut() += c;
            if o.get().is_zero() {
                o.remove();
            }
        }
    }
}

impl AddAssign<&Series> for Series {
    fn add_assign(&mut self, rhs: &Series) {
        self.check_compatible(rhs).expect("series addition");
        for (m, c) in &rhs.terms {
            add_into(&mut self.terms, m.clone(), c.clone());
        }
    }
}

impl SubAssign<&Series> for Series {
    fn sub_assign(&mut self, rhs: &Series) {
        self.check_compatible(rhs).expect("series subtraction");
        for (m, c) in &rhs.terms {
            add_into(&mut self.terms, m.clone(), -c.clone());
        }
    }
}

impl<'a> Add<&'a Series> for &'a Series {
    type Output = Series;
    fn add(self, rhs: &'a Series) -> Series {
        self.try_add(rhs).expect("series addition")
    }
}

impl<'a> Sub<&'a Series> for &'a Series {
    type Output = Series;
    fn sub(self, rhs: &'a Series) -> Series {
        self.try_sub(rhs).expect("series subtraction")
    }
}

impl<'a> Mul<&'a Series> for &'a Series {
    type Output = Series;
    fn mul(self, rhs: &'a Series) -> Series {
        self.try_mul(rhs).expect("series multiplication")
    }
}

impl Neg for &Series {
    type Output = Series;
    fn neg(self) -> Series {
        self.scale(&-BigRational::one())
    }
}

impl Add for Series {
    type Output = Series;
    fn add(self, rhs: Series) -> Series {
        &self + &rhs
    }
}

impl Sub for Series {
    type Output = Series;
    fn sub(self, rhs: Series) -> Series {
        &self - &rhs
    }
}

impl Mul for Series {
    type Output = Series;
    fn mul(self, rhs: Series) -> Series {
        &self * &rhs
    }
}

impl Neg for Series {
    type Output = Series;
    fn neg(self) -> Series {
        -&self
    }
}

use std::collections::BTreeMap;

use super::chart::{ChartRef, GradedChart};
use super::series::{Series, Trunc};
use crate::error::{Error, Result};

/// Degree-preserving ring morphism determined by the images of the source
/// chart's generators. Images live over the target chart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingMorphism {
    source: ChartRef,
    target: ChartRef,
    trunc: Trunc,
    images: Vec<Series>,
}

impl RingMorphism {
    pub fn new(source: &ChartRef, target: &ChartRef, trunc: Trunc, images: Vec<Series>) -> Result<Self> {
        if images.len() != source.len() {
            return Err(Error::ChartMismatch(format!(
                "{} images for {} generators",
                images.len(),
                source.len()
            )));
        }
        for (idx, image) in images.iter().enumerate() {
            let g = source.generator(idx);
            if !GradedChart::same(image.chart(), target) {
                return Err(Error::ChartMismatch(format!("image of `{}`", g.name)));
            }
            if image.trunc() != trunc {
                return Err(Error::TruncationMismatch(format!("image of `{}`", g.name)));
            }
            if !image.is_homogeneous(g.zdeg) {
                return Err(Error::Inhomogeneous {
                    generator: g.name.clone(),
                    expected: g.zdeg,
                });
            }
            if g.is_odd() && !(image * image).is_zero() {
                return Err(Error::OddSquare(g.name.clone()));
            }
        }
        Ok(Self {
            source: source.clone(),
            target: target.clone(),
            trunc,
            images,
        })
    }

    /// Endomorphism fixing every generator except the overridden ones.
    pub fn with_images(chart: &ChartRef, trunc: Trunc, overrides: &BTreeMap<usize, Series>) -> Result<Self> {
        let images = (0..chart.len())
            .map(|idx| {
                overrides
                    .get(&idx)
                    .cloned()
                    .unwrap_or_else(|| Series::generator(chart, trunc, idx))
            })
            .collect();
        Self::new(chart, chart, trunc, images)
    }

    pub fn identity(chart: &ChartRef, trunc: Trunc) -> Self {
        Self {
            source: chart.clone(),
            target: chart.clone(),
            trunc,
            images: (0..chart.len()).map(|i| Series::generator(chart, trunc, i)).collect(),
        }
    }

    pub fn image(&self, idx: usize) -> &Series {
        &self.images[idx]
    }

    pub fn images(&self) -> &[Series] {
        &self.images
    }

    pub fn target(&self) -> &ChartRef {
        &self.target
    }

    /// Applies the morphism to `f`, truncating at the target truncation.
    pub fn apply(&self, f: &Series) -> Result<Series> {
        if !GradedChart::same(f.chart(), &self.source) {
            return Err(Error::ChartMismatch("morphism source".into()));
        }
        let mut powers: BTreeMap<(usize, u16), Series> = BTreeMap::new();
        let mut out = Series::zero(&self.target, self.trunc);
        for (m, c) in f.terms() {
            let mut term = Series::constant(&self.target, self.trunc, c.clone());
            for (idx, &e) in m.exponents().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let p = powers
                    .entry((idx, e))
                    .or_insert_with(|| self.images[idx].pow(u32::from(e)));
                term = &term * p;
                if term.is_zero() {
                    break;
                }
            }
            out = &out + &term;
        }
        Ok(out)
    }

    /// `self ∘ other`: first `self`, then `other` (pullbacks compose
    /// contravariantly, so the images are `other(self(g))`).
    pub fn then(&self, other: &RingMorphism) -> Result<RingMorphism> {
        let images = self
            .images
            .iter()
            .map(|img| other.apply(img))
            .collect::<Result<Vec<_>>>()?;
        RingMorphism::new(&self.source, &other.target, other.trunc, images)
    }
}

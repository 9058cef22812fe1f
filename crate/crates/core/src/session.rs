//! JSON session files.
//!
//! A session declares a chart and optional blocks. Series are written
//! either as text (`"x + 1/2 * ex^2"`) or as a list of terms
//! `[["1/2", [["x", 1], ["ex", 2]]], ...]`. Serialization always emits the
//! canonical text form, so a canonical file round-trips byte for byte.

use std::collections::BTreeMap;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::algebra::{format_rational, parse_rational, parse_series, BaseSpec, ChartRef, GradedChart, Series, Trunc};
use crate::connection::Connection;
use crate::derivation::Derivation;
use crate::error::{Error, Result};
use crate::fexp::{Diffeo, FormalExpMap};
use crate::qp::QPStructure;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeriesRepr {
    Text(String),
    Terms(Vec<(String, Vec<(String, u32)>)>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartBlock {
    pub base: Vec<BaseSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivationBlock {
    pub degree: i32,
    pub images: BTreeMap<String, SeriesRepr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChristoffelEntry {
    pub upper: String,
    pub lower: (String, String),
    pub value: SeriesRepr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaEntry {
    pub row: String,
    pub col: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpBlock {
    #[serde(rename = "P")]
    pub p: i32,
    pub omega: Vec<OmegaEntry>,
    #[serde(rename = "Q")]
    pub q: BTreeMap<String, SeriesRepr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffeoBlock {
    pub forward: BTreeMap<String, SeriesRepr>,
    pub inverse: BTreeMap<String, SeriesRepr>,
}

/// The file as written; see [`Session`] for the validated form.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionFile {
    pub chart: Option<ChartBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunc: Option<Trunc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fexp: Option<BTreeMap<String, SeriesRepr>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivation: Option<DerivationBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<Vec<ChristoffelEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qp: Option<QpBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffeo: Option<DiffeoBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<BTreeMap<String, SeriesRepr>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<SeriesRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<SeriesRepr>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fibre_change: Option<BTreeMap<String, SeriesRepr>>,
}

/// Parsed and validated session.
#[derive(Debug, Clone)]
pub struct Session {
    pub chart: ChartRef,
    pub trunc: Trunc,
    pub fexp: Option<FormalExpMap>,
    pub derivation: Option<Derivation>,
    pub connection: Option<Connection>,
    pub qp: Option<QPStructure>,
    pub diffeo: Option<Diffeo>,
    /// Values of the base coordinates, in base order.
    pub point: Option<Vec<Series>>,
    pub element: Option<Series>,
    pub samples: Option<Vec<Series>>,
    /// Images of the fibre generators under a fibre change, in base order.
    pub fibre_change: Option<Vec<Series>>,
}

fn semantic(block: &str, message: impl Into<String>) -> Error {
    Error::Semantic {
        block: block.into(),
        message: message.into(),
    }
}

fn series(block: &str, r: &SeriesRepr, chart: &ChartRef, t: Trunc) -> Result<Series> {
    match r {
        SeriesRepr::Text(s) => parse_series(s, chart, t).map_err(|e| match e {
            Error::Parse { column, message, .. } => semantic(block, format!("`{s}` column {column}: {message}")),
            Error::Semantic { message, .. } => semantic(block, message),
            other => other,
        }),
        SeriesRepr::Terms(terms) => {
            let mut out = Series::zero(chart, t);
            for (c, factors) in terms {
                let c = parse_rational(c).map_err(|e| semantic(block, e.to_string()))?;
                let mut term = Series::constant(chart, t, c);
                for (g, e) in factors {
                    let idx = chart.index_of(g)?;
                    let e = u16::try_from(*e).map_err(|_| semantic(block, "exponent too large"))?;
                    term = &term * &Series::generator(chart, t, idx).pow(u32::from(e));
                }
                out = &out + &term;
            }
            Ok(out)
        }
    }
}

fn text(s: &Series) -> SeriesRepr {
    SeriesRepr::Text(s.to_string())
}

/// Base-coordinate index of `name`.
fn base_index(chart: &ChartRef, block: &str, name: &str) -> Result<usize> {
    let idx = chart.index_of(name)?;
    (0..chart.n_base())
        .find(|&a| chart.base(a) == idx)
        .ok_or_else(|| semantic(block, format!("`{name}` is not a base coordinate")))
}

fn per_base(
    chart: &ChartRef,
    t: Trunc,
    block: &str,
    map: &BTreeMap<String, SeriesRepr>,
    default: impl Fn(usize) -> Series,
) -> Result<Vec<Series>> {
    let mut out: Vec<Option<Series>> = vec![None; chart.n_base()];
    for (name, r) in map {
        let a = base_index(chart, block, name)?;
        out[a] = Some(series(block, r, chart, t)?);
    }
    Ok(out
        .into_iter()
        .enumerate()
        .map(|(a, s)| s.unwrap_or_else(|| default(a)))
        .collect())
}

/// Parses a session, reporting JSON errors with their position and
/// semantic errors with the offending block. `trunc` overrides the file.
pub fn parse_session(text: &str, trunc: Option<Trunc>) -> Result<Session> {
    let file: SessionFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    from_file(&file, trunc)
}

pub fn from_file(file: &SessionFile, trunc: Option<Trunc>) -> Result<Session> {
    let block = file.chart.as_ref().ok_or_else(|| Error::MissingBlock("chart".into()))?;
    let chart = GradedChart::new(block.base.clone(), block.params.clone())?;
    let t = trunc.or(file.trunc).unwrap_or_default();
    let fexp = match &file.fexp {
        None => None,
        Some(map) => {
            for a in 0..chart.n_base() {
                let name = &chart.generator(chart.base(a)).name;
                if !map.contains_key(name) {
                    return Err(semantic("fexp", format!("no pullback for `{name}`")));
                }
            }
            let p = per_base(&chart, t, "fexp", map, |_| unreachable!())?;
            Some(FormalExpMap::new(&chart, t, p)?)
        }
    };
    let derivation = match &file.derivation {
        None => None,
        Some(d) => {
            let mut images = BTreeMap::new();
            for (name, r) in &d.images {
                images.insert(chart.index_of(name)?, series("derivation", r, &chart, t)?);
            }
            Some(Derivation::new(&chart, t, d.degree, images)?)
        }
    };
    let connection = match &file.connection {
        None => None,
        Some(entries) => {
            let mut symbols: BTreeMap<(usize, usize, usize), Series> = BTreeMap::new();
            for e in entries {
                let a = base_index(&chart, "connection", &e.upper)?;
                let b = base_index(&chart, "connection", &e.lower.0)?;
                let c = base_index(&chart, "connection", &e.lower.1)?;
                let v = series("connection", &e.value, &chart, t)?;
                if symbols.insert((a, b, c), v.clone()).is_some() {
                    return Err(semantic(
                        "connection",
                        format!("duplicate entry for {:?}", (&e.upper, &e.lower)),
                    ));
                }
                if b != c {
                    let sign = chart.is_odd(chart.base(b)) && chart.is_odd(chart.base(c));
                    let partner = if sign { -&v } else { v };
                    match symbols.get(&(a, c, b)) {
                        Some(existing) if *existing != partner => {
                            return Err(semantic("connection", "entries violate graded symmetry"));
                        }
                        _ => {
                            symbols.insert((a, c, b), partner);
                        }
                    }
                }
            }
            symbols.retain(|_, s| !s.is_zero());
            Some(Connection::new(&chart, t, symbols)?)
        }
    };
    let qp = match &file.qp {
        None => None,
        Some(q) => {
            let k = chart.n_base();
            let mut omega = vec![vec![BigRational::from_integer(0.into()); k]; k];
            for e in &q.omega {
                let (r, c) = (base_index(&chart, "qp", &e.row)?, base_index(&chart, "qp", &e.col)?);
                omega[r][c] = parse_rational(&e.value).map_err(|err| semantic("qp", err.to_string()))?;
            }
            let mut images = BTreeMap::new();
            for (name, r) in &q.q {
                images.insert(base_index(&chart, "qp", name)?, series("qp", r, &chart, t)?);
            }
            Some(QPStructure::new(&chart, t, q.p, omega, images)?)
        }
    };
    let diffeo = match &file.diffeo {
        None => None,
        Some(d) => {
            let id = |a: usize| Series::generator(&chart, t, chart.base(a));
            Some(Diffeo {
                forward: per_base(&chart, t, "diffeo", &d.forward, id)?,
                inverse: per_base(&chart, t, "diffeo", &d.inverse, id)?,
            })
        }
    };
    let point = match &file.point {
        None => None,
        Some(map) => Some(per_base(&chart, t, "point", map, |_| Series::zero(&chart, t))?),
    };
    let element = file
        .element
        .as_ref()
        .map(|r| series("element", r, &chart, t))
        .transpose()?;
    let samples = file
        .samples
        .as_ref()
        .map(|v| {
            v.iter()
                .map(|r| series("samples", r, &chart, t))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    let fibre_change = match &file.fibre_change {
        None => None,
        Some(map) => {
            let mut out: Vec<Series> = (0..chart.n_base())
                .map(|a| Series::generator(&chart, t, chart.fiber(a)))
                .collect();
            for (name, r) in map {
                let idx = chart.index_of(name)?;
                let a = (0..chart.n_base())
                    .find(|&a| chart.fiber(a) == idx)
                    .ok_or_else(|| semantic("fibre_change", format!("`{name}` is not a fibre generator")))?;
                out[a] = series("fibre_change", r, &chart, t)?;
            }
            Some(out)
        }
    };
    Ok(Session {
        chart,
        trunc: t,
        fexp,
        derivation,
        connection,
        qp,
        diffeo,
        point,
        element,
        samples,
        fibre_change,
    })
}

/// A file holding only the chart and truncation of `s`; blocks are added
/// with the `*_block` functions.
pub fn header(chart: &ChartRef, trunc: Trunc) -> SessionFile {
    SessionFile {
        chart: Some(ChartBlock {
            base: chart.specs().to_vec(),
            params: chart.params(),
        }),
        trunc: Some(trunc),
        ..SessionFile::default()
    }
}

fn base_map(chart: &ChartRef, values: &[Series]) -> BTreeMap<String, SeriesRepr> {
    values
        .iter()
        .enumerate()
        .map(|(a, s)| (chart.generator(chart.base(a)).name.clone(), text(s)))
        .collect()
}

pub fn fexp_block(f: &FormalExpMap) -> BTreeMap<String, SeriesRepr> {
    base_map(f.chart(), f.pullbacks())
}

pub fn derivation_block(d: &Derivation) -> DerivationBlock {
    let chart = d.chart();
    DerivationBlock {
        degree: d.zdeg(),
        images: d
            .images()
            .iter()
            .filter(|(_, s)| !s.is_zero())
            .map(|(&idx, s)| (chart.generator(idx).name.clone(), text(s)))
            .collect(),
    }
}

/// Entries with `b ≤ c` in base order; the rest follow by symmetry.
pub fn connection_block(c: &Connection) -> Vec<ChristoffelEntry> {
    let chart = c.chart();
    let name = |a: usize| chart.generator(chart.base(a)).name.clone();
    c.symbols()
        .iter()
        .filter(|((_, b, cc), s)| b <= cc && !s.is_zero())
        .map(|(&(a, b, cc), s)| ChristoffelEntry {
            upper: name(a),
            lower: (name(b), name(cc)),
            value: text(s),
        })
        .collect()
}

pub fn qp_block(s: &QPStructure) -> QpBlock {
    let chart = &s.chart;
    let name = |a: usize| chart.generator(chart.base(a)).name.clone();
    let mut omega = Vec::new();
    for (r, row) in s.omega.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            if !num_traits::Zero::is_zero(v) {
                omega.push(OmegaEntry {
                    row: name(r),
                    col: name(c),
                    value: format_rational(v),
                });
            }
        }
    }
    let q = (0..chart.n_base())
        .map(|a| (name(a), s.q.image(chart.base(a))))
        .filter(|(_, img)| !img.is_zero())
        .map(|(n, img)| (n, text(&img)))
        .collect();
    QpBlock { p: s.p, omega, q }
}

pub fn diffeo_block(chart: &ChartRef, d: &Diffeo) -> DiffeoBlock {
    DiffeoBlock {
        forward: base_map(chart, &d.forward),
        inverse: base_map(chart, &d.inverse),
    }
}

pub fn point_block(chart: &ChartRef, point: &[Series]) -> BTreeMap<String, SeriesRepr> {
    base_map(chart, point)
}

pub fn fibre_change_block(chart: &ChartRef, images: &[Series]) -> BTreeMap<String, SeriesRepr> {
    images
        .iter()
        .enumerate()
        .map(|(a, s)| (chart.generator(chart.fiber(a)).name.clone(), text(s)))
        .collect()
}

pub fn element_repr(s: &Series) -> SeriesRepr {
    text(s)
}

/// Canonical text of a session file: two-space indented JSON with a
/// trailing newline.
pub fn serialize(file: &SessionFile) -> String {
    let mut out = serde_json::to_string_pretty(file).expect("session files serialize");
    out.push('\n');
    out
}

/// Canonical file of a validated session.
pub fn to_file(s: &Session) -> SessionFile {
    let mut file = header(&s.chart, s.trunc);
    file.fexp = s.fexp.as_ref().map(fexp_block);
    file.derivation = s.derivation.as_ref().map(derivation_block);
    file.connection = s.connection.as_ref().map(connection_block);
    file.qp = s.qp.as_ref().map(qp_block);
    file.diffeo = s.diffeo.as_ref().map(|d| diffeo_block(&s.chart, d));
    file.point = s.point.as_ref().map(|p| point_block(&s.chart, p));
    file.element = s.element.as_ref().map(element_repr);
    file.samples = s.samples.as_ref().map(|v| v.iter().map(element_repr).collect());
    file.fibre_change = s.fibre_change.as_ref().map(|v| fibre_change_block(&s.chart, v));
    file
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "chart": {
    "base": [
      {
        "name": "x",
        "degree": 0
      }
    ]
  },
  "trunc": {
    "res": 6,
    "form": 4
  },
  "fexp": {
    "x": "x + ex"
  }
}
"#;

    #[test]
    fn minimal_round_trip() {
        let s = parse_session(MINIMAL, None).unwrap();
        assert_eq!(s.chart.len(), 3);
        assert_eq!(serialize(&to_file(&s)), MINIMAL);
    }

    #[test]
    fn term_list_form() {
        let text = r#"{"chart": {"base": [{"name": "x", "degree": 0}]},
            "element": [["1/2", [["x", 1], ["ex", 2]]], ["-3", []]]}"#;
        let s = parse_session(text, None).unwrap();
        assert_eq!(s.element.unwrap().to_string(), "-3 + 1/2 * x * ex^2");
    }

    #[test]
    fn errors() {
        let bad = r#"{"chart": {"base": [{"name": "x", "degree": 0}]}, "element": "1/0"}"#;
        assert!(matches!(parse_session(bad, None), Err(Error::Semantic { block, .. }) if block == "element"));
        let bad = "{\n  \"chart\": [,\n}";
        assert!(matches!(parse_session(bad, None), Err(Error::Parse { line: 2, .. })));
        let bad = r#"{"fexp": {}}"#;
        assert!(matches!(parse_session(bad, None), Err(Error::MissingBlock(_))));
        let bad = r#"{"chart": {"base": [{"name": "x", "degree": 0}]}, "element": "q"}"#;
        assert!(parse_session(bad, None).is_err());
    }
}

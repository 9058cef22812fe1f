//! Truncated graded-commutative polynomial ring and the objects built
//! directly on it.

pub mod chart;
mod coeff;
pub mod matrix;
pub mod monomial;
pub mod morphism;
pub mod series;
pub mod text;

pub use chart::{BaseSpec, ChartRef, Generator, GradedChart, Klass};
pub use matrix::SeriesMatrix;
pub use monomial::{koszul_sign, Monomial};
pub use morphism::RingMorphism;
pub use series::{rat, ratio, Grading, Series, Trunc};
pub use text::{format_rational, parse_rational, parse_series};

//! Machine-word fast path for rational coefficients inside the product
//! kernel. Values fall back to `BigRational` on overflow.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

/// A factor as seen by the product kernel.
#[derive(Debug, Clone)]
pub(crate) enum Factor {
    Small(i64, i64),
    Big(BigRational),
}

impl Factor {
    pub fn new(c: &BigRational) -> Self {
        match (c.numer().to_i64(), c.denom().to_i64()) {
            (Some(n), Some(d)) => Factor::Small(n, d),
            _ => Factor::Big(c.clone()),
        }
    }

    fn big(&self) -> BigRational {
        match self {
            Factor::Small(n, d) => BigRational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Factor::Big(c) => c.clone(),
        }
    }
}

/// Running sum; denominators stay positive, fractions are not always
/// reduced.
#[derive(Debug, Clone)]
pub(crate) enum Acc {
    Small(i128, i128),
    Big(BigRational),
}

impl Acc {
    pub fn product(a: &Factor, b: &Factor, negative: bool) -> Self {
        let out = match (a, b) {
            (Factor::Small(n1, d1), Factor::Small(n2, d2)) => {
                Acc::Small(i128::from(*n1) * i128::from(*n2), i128::from(*d1) * i128::from(*d2))
            }
            _ => Acc::Big(a.big() * b.big()),
        };
        if negative {
            out.neg()
        } else {
            out
        }
    }

    fn neg(self) -> Self {
        match self {
            Acc::Small(n, d) => match n.checked_neg() {
                Some(n) => Acc::Small(n, d),
                None => Acc::Big(-BigRational::new(BigInt::from(n), BigInt::from(d))),
            },
            Acc::Big(c) => Acc::Big(-c),
        }
    }

    pub fn add(&mut self, other: Acc) {
        if let (Acc::Small(n1, d1), Acc::Small(n2, d2)) = (&*self, &other) {
            if let Some((n, d)) = small_add(*n1, *d1, *n2, *d2) {
                *self = Acc::Small(n, d);
                return;
            }
        }
        let sum = self.to_big() + other.into_big();
        *self = Acc::Big(sum);
    }

    fn to_big(&self) -> BigRational {
        match self {
            Acc::Small(n, d) => BigRational::new(BigInt::from(*n), BigInt::from(*d)),
            Acc::Big(c) => c.clone(),
        }
    }

    pub fn into_big(self) -> BigRational {
        match self {
            Acc::Small(n, d) => BigRational::new(BigInt::from(n), BigInt::from(d)),
            Acc::Big(c) => c,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Acc::Small(n, _) => *n == 0,
            Acc::Big(c) => c.is_zero(),
        }
    }
}

fn small_add(n1: i128, d1: i128, n2: i128, d2: i128) -> Option<(i128, i128)> {
    if d1 == d2 {
        return Some((n1.checked_add(n2)?, d1));
    }
    let g = d1.gcd(&d2);
    let (a, b) = (d1 / g, d2 / g);
    let n = n1.checked_mul(b)?.checked_add(n2.checked_mul(a)?)?;
    let d = d1.checked_mul(b)?;
    let r = n.gcd(&d);
    if r > 1 {
        Some((n / r, d / r))
    } else {
        Some((n, d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::ratio;

    #[test]
    fn sums_match_bigrational() {
        let vals = [
            ratio(1, 2),
            ratio(-2, 3),
            ratio(5, 1),
            ratio(7, 6),
            ratio(i64::MAX, 3),
            ratio(-1, i64::MAX),
        ];
        let mut acc: Option<Acc> = None;
        let mut exact = BigRational::zero();
        for a in &vals {
            for b in &vals {
                let p = Acc::product(&Factor::new(a), &Factor::new(b), false);
                exact += a * b;
                match &mut acc {
                    None => acc = Some(p),
                    Some(x) => x.add(p),
                }
            }
        }
        assert_eq!(acc.unwrap().into_big(), exact);
    }
}

//! Exact rational arithmetic helpers.
//!
//! Demands, travel times and reliabilities are carried as exact rationals so that
//! objective values can be compared with zero tolerance. On disk a rational is
//! written as a JSON integer, a JSON decimal (when the value has a short finite
//! decimal expansion) or a `"p/q"` string.

use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Rational = Ratio<i128>;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(v as i128)
}

pub fn to_f64(v: &Rational) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Parses `"7"`, `"-3/4"`, `"0.125"` or `"1.5e-3"` exactly.
pub fn parse_rational(text: &str) -> Result<Rational, String> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: i128 = num.trim().parse().map_err(|_| format!("bad numerator in `{text}`"))?;
        let den: i128 = den.trim().parse().map_err(|_| format!("bad denominator in `{text}`"))?;
        if den == 0 {
            return Err(format!("zero denominator in `{text}`"));
        }
        return Ok(Rational::new(num, den));
    }
    parse_decimal(text)
}

fn parse_decimal(text: &str) -> Result<Rational, String> {
    let bad = || format!("not a number: `{text}`");
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = text[pos + 1..].parse().map_err(|_| bad())?;
            (&text[..pos], exp)
        }
        None => (text, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{whole}{frac}");
    let mut numer: i128 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| bad())? };
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac.len() as i32;
    let ten_pow = |n: u32| 10i128.checked_pow(n).ok_or_else(bad);
    if scale >= 0 {
        let factor = ten_pow(scale as u32)?;
        Ok(Rational::from_integer(numer.checked_mul(factor).ok_or_else(bad)?))
    } else {
        Ok(Rational::new(numer, ten_pow((-scale) as u32)?))
    }
}

/// Exact decimal text when the denominator has only the prime factors 2 and 5.
pub fn finite_decimal(v: &Rational) -> Option<String> {
    let mut den = *v.denom();
    let (mut twos, mut fives) = (0u32, 0u32);
    while den % 2 == 0 {
        den /= 2;
        twos += 1;
    }
    while den % 5 == 0 {
        den /= 5;
        fives += 1;
    }
    if den != 1 {
        return None;
    }
    let places = twos.max(fives);
    let scaled = v.numer().checked_mul(10i128.checked_pow(places)? / v.denom())?;
    if places == 0 {
        return Some(scaled.to_string());
    }
    let sign = if scaled < 0 { "-" } else { "" };
    let digits = format!("{:0>width$}", scaled.abs(), width = places as usize + 1);
    let (whole, frac) = digits.split_at(digits.len() - places as usize);
    Some(format!("{sign}{whole}.{frac}"))
}

/// Compact text form: integer, finite decimal, or `p/q`.
pub fn display(v: &Rational) -> String {
    finite_decimal(v).unwrap_or_else(|| format!("{}/{}", v.numer(), v.denom()))
}

/// `base^exp` for a rational base.
pub fn pow(base: &Rational, exp: u32) -> Rational {
    let mut acc = Rational::one();
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

pub fn lcm(a: i128, b: i128) -> Option<i128> {
    let g = a.gcd(&b);
    (a / g).checked_mul(b)
}

pub fn clamp_unit(v: &Rational) -> Rational {
    if v.is_negative() {
        Rational::zero()
    } else if *v > Rational::one() {
        Rational::one()
    } else {
        *v
    }
}

/// JSON wrapper for a [`Rational`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Q(pub Rational);

impl Serialize for Q {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let v = &self.0;
        if v.is_integer() {
            if let Some(i) = v.numer().to_i64() {
                return serializer.serialize_i64(i);
            }
        }
        if let Some(text) = finite_decimal(v) {
            let significant = text.trim_start_matches(['-', '0', '.']).replace('.', "");
            if significant.len() <= 15 {
                if let Ok(f) = text.parse::<f64>() {
                    return serializer.serialize_f64(f);
                }
            }
        }
        serializer.serialize_str(&format!("{}/{}", v.numer(), v.denom()))
    }
}

struct QVisitor;

impl<'de> Visitor<'de> for QVisitor {
    type Value = Q;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a number or a \"p/q\" string")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Q, E> {
        Ok(Q(Rational::from_integer(v as i128)))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Q, E> {
        Ok(Q(Rational::from_integer(v as i128)))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Q, E> {
        if !v.is_finite() {
            return Err(E::custom("non-finite number"));
        }
        parse_decimal(&v.to_string()).map(Q).map_err(E::custom)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Q, E> {
        parse_rational(v).map(Q).map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Q {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Q, D::Error> {
        deserializer.deserialize_any(QVisitor)
    }
}

/// `#[serde(with = "crate::rational::opt")]` for `Option<Rational>` fields.
pub mod opt {
    use super::{Rational, Q};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        v.map(Q).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        Ok(Option::<Q>::deserialize(d)?.map(|q| q.0))
    }
}

/// `#[serde(with = "crate::rational::vec")]` for `Vec<Rational>` fields.
pub mod vec {
    use super::{Rational, Q};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|r| Q(*r)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        Ok(Vec::<Q>::deserialize(d)?.into_iter().map(|q| q.0).collect())
    }
}

/// `#[serde(with = "crate::rational::scalar")]` for `Rational` fields.
pub mod scalar {
    use super::{Rational, Q};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Rational, s: S) -> Result<S::Ok, S::Error> {
        Q(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        Ok(Q::deserialize(d)?.0)
    }
}

/// `#[serde(with = "crate::rational::grid")]` for `Vec<Vec<Rational>>` fields.
pub mod grid {
    use super::{Rational, Q};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<Rational>], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|row| row.iter().map(|r| Q(*r)).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Rational>>, D::Error> {
        Ok(Vec::<Vec<Q>>::deserialize(d)?
            .into_iter()
            .map(|row| row.into_iter().map(|q| q.0).collect())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!(parse_rational("7").unwrap(), int(7));
        assert_eq!(parse_rational("-3/4").unwrap(), Rational::new(-3, 4));
        assert_eq!(parse_rational("0.125").unwrap(), Rational::new(1, 8));
        assert_eq!(parse_rational("1.5e-3").unwrap(), Rational::new(3, 2000));
        assert_eq!(parse_rational("2E2").unwrap(), int(200));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational(".").is_err());
    }

    #[test]
    fn finite_decimal_detection() {
        assert_eq!(finite_decimal(&Rational::new(1, 8)).as_deref(), Some("0.125"));
        assert_eq!(finite_decimal(&Rational::new(-123, 10)).as_deref(), Some("-12.3"));
        assert_eq!(finite_decimal(&int(42)).as_deref(), Some("42"));
        assert_eq!(finite_decimal(&Rational::new(1, 3)), None);
    }

    #[test]
    fn json_round_trip() {
        for v in [int(3), Rational::new(123, 10), Rational::new(1, 3), Rational::new(-7, 200)] {
            let text = serde_json::to_string(&Q(v)).unwrap();
            let back: Q = serde_json::from_str(&text).unwrap();
            assert_eq!(back.0, v, "{text}");
        }
        assert_eq!(serde_json::to_string(&Q(Rational::new(123, 10))).unwrap(), "12.3");
        assert_eq!(serde_json::to_string(&Q(Rational::new(1, 3))).unwrap(), "\"1/3\"");
    }

    #[test]
    fn clamp_and_pow() {
        assert_eq!(clamp_unit(&Rational::new(9, 5)), int(1));
        assert_eq!(clamp_unit(&int(-1)), int(0));
        assert_eq!(pow(&Rational::new(1, 2), 3), Rational::new(1, 8));
        assert_eq!(pow(&int(5), 0), int(1));
    }
}

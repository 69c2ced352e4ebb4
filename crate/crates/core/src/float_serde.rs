//! JSON has no infinities or NaN, so non-finite floats travel as the strings
//! `"inf"`, `"-inf"` and `"nan"`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Repr<'a> {
    Finite(f64),
    Special(&'a str),
}

fn encode(x: f64) -> Repr<'static> {
    if x.is_finite() {
        Repr::Finite(x)
    } else if x.is_nan() {
        Repr::Special("nan")
    } else if x > 0.0 {
        Repr::Special("inf")
    } else {
        Repr::Special("-inf")
    }
}

fn decode<E: serde::de::Error>(r: Repr<'_>) -> Result<f64, E> {
    match r {
        Repr::Finite(x) => Ok(x),
        Repr::Special("inf") => Ok(f64::INFINITY),
        Repr::Special("-inf") => Ok(f64::NEG_INFINITY),
        Repr::Special("nan") => Ok(f64::NAN),
        Repr::Special(other) => Err(E::custom(format!("not a number: '{other}'"))),
    }
}

pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    encode(*x).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    decode(Repr::deserialize(d)?)
}

pub mod option {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        x.map(encode).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<Repr>::deserialize(d)?.map(decode).transpose()
    }
}

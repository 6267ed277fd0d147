//! Serde adapters writing non-finite floats as the strings `"+inf"`,
//! `"-inf"` and `"nan"`, so that reports survive formats without them.

use serde::{Deserialize, Deserializer, Serializer};

pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("+inf")
    } else {
        s.serialize_str("-inf")
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Repr<'a> {
    Num(f64),
    Str(&'a str),
}

fn decode<E: serde::de::Error>(r: Repr<'_>) -> Result<f64, E> {
    match r {
        Repr::Num(x) => Ok(x),
        Repr::Str("+inf") | Repr::Str("inf") => Ok(f64::INFINITY),
        Repr::Str("-inf") => Ok(f64::NEG_INFINITY),
        Repr::Str("nan") => Ok(f64::NAN),
        Repr::Str(other) => Err(E::custom(alloc::format!("not a float: {other}"))),
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    decode(Repr::deserialize(d)?)
}

/// The same encoding for `Vec<f64>`.
pub mod seq {
    use super::{decode, Repr};
    use alloc::vec::Vec;
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    struct Wrap(f64);

    impl serde::Serialize for Wrap {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            super::serialize(&self.0, s)
        }
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&Wrap(*x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr<'de>>::deserialize(d)?.into_iter().map(decode).collect()
    }
}

/// The same encoding for `Option<f64>`.
pub mod option {
    use super::{decode, Repr};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => super::serialize(x, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<Repr<'de>>::deserialize(d)?.map(decode).transpose()
    }
}

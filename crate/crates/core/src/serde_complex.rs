//! Complex numbers travel through JSON as `[re, im]` pairs.

use num_complex::Complex64;
use serde::de::Deserializer;
use serde::ser::{SerializeSeq, Serializer};
use serde::Deserialize;

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for z in v {
            seq.serialize_element(&[z.re, z.im])?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

pub mod option_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<Vec<Complex64>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => super::vec::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<Vec<Complex64>>, D::Error> {
        let pairs: Option<Vec<[f64; 2]>> = Option::deserialize(d)?;
        Ok(pairs.map(|p| p.into_iter().map(|[re, im]| Complex64::new(re, im)).collect()))
    }
}

pub mod pairs {
    use super::*;

    pub fn serialize<S: Serializer>(
        v: &[(usize, Complex64)],
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for (i, z) in v {
            seq.serialize_element(&(i, [z.re, z.im]))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Vec<(usize, Complex64)>, D::Error> {
        let raw: Vec<(usize, [f64; 2])> = Vec::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|(i, [re, im])| (i, Complex64::new(re, im)))
            .collect())
    }
}

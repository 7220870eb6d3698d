//! Serde helpers for complex matrices: row-major nested arrays of numbers,
//! or of `[re, im]` pairs when any entry has a nonzero imaginary part.

use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;

use crate::linalg::{is_real, CMat};

#[derive(Serialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

struct Rows<'a>(&'a CMat);

impl Serialize for Rows<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let m = self.0;
        let real = is_real(m);
        let mut outer = s.serialize_seq(Some(m.nrows()))?;
        for i in 0..m.nrows() {
            let row: Vec<Entry> = (0..m.ncols())
                .map(|j| {
                    let z = m[(i, j)];
                    if real {
                        Entry::Real(z.re)
                    } else {
                        Entry::Complex([z.re, z.im])
                    }
                })
                .collect();
            outer.serialize_element(&row)?;
        }
        outer.end()
    }
}

pub fn matrix<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
    Rows(m).serialize(s)
}

pub fn option_matrix<S: Serializer>(m: &Option<CMat>, s: S) -> Result<S::Ok, S::Error> {
    match m {
        Some(m) => s.serialize_some(&Rows(m)),
        None => s.serialize_none(),
    }
}

pub fn vector<S: Serializer>(v: &crate::linalg::CVec, s: S) -> Result<S::Ok, S::Error> {
    let m = CMat::from_column_slice(1, v.len(), v.as_slice());
    let real = is_real(&m);
    let entries: Vec<Entry> = v.iter().map(|z| if real { Entry::Real(z.re) } else { Entry::Complex([z.re, z.im]) }).collect();
    entries.serialize(s)
}

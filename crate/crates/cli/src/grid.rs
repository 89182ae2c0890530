//! Value lists on the command line: `0.5,1,2`, `start:stop:step` (inclusive), or a mix.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Grid<T>(pub Vec<T>);

impl<T> Grid<T> {
    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }
}

fn scalar<T: FromStr>(s: &str) -> Result<T, String> {
    s.trim().parse().map_err(|_| format!("cannot parse `{s}`"))
}

impl FromStr for Grid<f64> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for part in s.split(',') {
            let bits: Vec<&str> = part.split(':').collect();
            match bits.as_slice() {
                [v] => out.push(scalar::<f64>(v)?),
                [a, b, h] => {
                    let (a, b, h): (f64, f64, f64) = (scalar(a)?, scalar(b)?, scalar(h)?);
                    if !(h > 0.0 && b >= a && a.is_finite() && b.is_finite()) {
                        return Err(format!("bad range `{part}`: need start <= stop and step > 0"));
                    }
                    let count = ((b - a) / h + 1e-9).floor() as usize;
                    out.extend((0..=count).map(|k| a + k as f64 * h));
                }
                _ => return Err(format!("bad item `{part}`: expected value or start:stop:step")),
            }
        }
        Ok(Self(out))
    }
}

impl FromStr for Grid<usize> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for part in s.split(',') {
            match part.split_once(':') {
                None => out.push(scalar(part)?),
                Some((a, b)) => {
                    let (a, b): (usize, usize) = (scalar(a)?, scalar(b)?);
                    if b < a {
                        return Err(format!("bad range `{part}`: stop below start"));
                    }
                    out.extend(a..=b);
                }
            }
        }
        Ok(Self(out))
    }
}

impl<T: fmt::Display> fmt::Display for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&items.join(","))
    }
}

//! Fixed multiset reducers over neighbor feature vectors.
//!
//! All reducers map the empty multiset to the zero vector. Mean, sum and std
//! accumulate in the order rows are given (ascending neighbor index in the
//! FAF engine), so results are bit-reproducible.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FafError, Result};
use crate::ka::KaEncoder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReducerKind {
    Mean,
    Sum,
    Max,
    Min,
    Std,
    Ka,
}

impl ReducerKind {
    pub const ALL: [ReducerKind; 6] = [
        ReducerKind::Mean,
        ReducerKind::Sum,
        ReducerKind::Max,
        ReducerKind::Min,
        ReducerKind::Std,
        ReducerKind::Ka,
    ];

    /// The four-reducer set `mean,sum,max,min`.
    pub const FAF4: [ReducerKind; 4] = [
        ReducerKind::Mean,
        ReducerKind::Sum,
        ReducerKind::Max,
        ReducerKind::Min,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReducerKind::Mean => "mean",
            ReducerKind::Sum => "sum",
            ReducerKind::Max => "max",
            ReducerKind::Min => "min",
            ReducerKind::Std => "std",
            ReducerKind::Ka => "ka",
        }
    }

    /// Whether permuting the input multiset leaves the output unchanged.
    pub fn is_permutation_invariant(self) -> bool {
        self != ReducerKind::Ka
    }
}

impl fmt::Display for ReducerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReducerKind {
    type Err = FafError;

    fn from_str(s: &str) -> Result<Self> {
        ReducerKind::ALL
            .into_iter()
            .find(|r| r.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| FafError::InvalidConfig(format!("unknown reducer {s:?}")))
    }
}

/// Parses a comma-separated reducer list such as `mean,sum,max,min`.
/// `faf4` expands to the four-reducer set.
pub fn parse_reducer_list(s: &str) -> Result<Vec<ReducerKind>> {
    if s.trim().eq_ignore_ascii_case("faf4") {
        return Ok(ReducerKind::FAF4.to_vec());
    }
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect()
}

pub fn format_reducer_list(reducers: &[ReducerKind]) -> String {
    reducers
        .iter()
        .map(|r| r.name())
        .collect::<Vec<_>>()
        .join(",")
}

/// Reduces a multiset of `dim`-length rows with the default KA encoder.
pub fn reduce(kind: ReducerKind, rows: &[&[f64]], dim: usize) -> Result<Vec<f64>> {
    reduce_with(kind, rows, dim, &KaEncoder::default())
}

pub fn reduce_with(
    kind: ReducerKind,
    rows: &[&[f64]],
    dim: usize,
    encoder: &KaEncoder,
) -> Result<Vec<f64>> {
    for row in rows {
        if row.len() != dim {
            return Err(FafError::DimensionMismatch {
                expected: dim,
                found: row.len(),
            });
        }
        if let Some(col) = row.iter().position(|x| !x.is_finite()) {
            return Err(FafError::NonFinite { row: 0, col });
        }
    }
    let mut out = vec![0.0; dim];
    let mut scratch = Vec::new();
    reduce_into(
        kind,
        rows.iter().copied(),
        rows.len(),
        &mut out,
        encoder,
        &mut scratch,
    )?;
    Ok(out)
}

/// Core reduction loop. `rows` must yield exactly `n` rows of length
/// `out.len()`; it is iterated more than once for some reducers.
pub(crate) fn reduce_into<'a, I>(
    kind: ReducerKind,
    rows: I,
    n: usize,
    out: &mut [f64],
    encoder: &KaEncoder,
    scratch: &mut Vec<f64>,
) -> Result<()>
where
    I: Iterator<Item = &'a [f64]> + Clone,
{
    out.fill(0.0);
    if n == 0 {
        return Ok(());
    }
    let inv_n = 1.0 / n as f64;
    match kind {
        ReducerKind::Sum | ReducerKind::Mean => {
            for row in rows {
                for (acc, x) in out.iter_mut().zip(row) {
                    *acc += x;
                }
            }
            if kind == ReducerKind::Mean {
                for acc in out.iter_mut() {
                    *acc /= n as f64;
                }
            }
        }
        ReducerKind::Max | ReducerKind::Min => {
            let mut rows = rows;
            let first = rows.next().expect("n > 0");
            out.copy_from_slice(first);
            for row in rows {
                for (acc, &x) in out.iter_mut().zip(row) {
                    *acc = if kind == ReducerKind::Max {
                        acc.max(x)
                    } else {
                        acc.min(x)
                    };
                }
            }
        }
        ReducerKind::Std => {
            scratch.clear();
            scratch.resize(out.len(), 0.0);
            for row in rows.clone() {
                for (acc, x) in scratch.iter_mut().zip(row) {
                    *acc += x;
                }
            }
            for mean in scratch.iter_mut() {
                *mean /= n as f64;
            }
            for row in rows {
                for ((acc, x), mean) in out.iter_mut().zip(row).zip(scratch.iter()) {
                    let delta = x - mean;
                    *acc += delta * delta;
                }
            }
            for acc in out.iter_mut() {
                *acc = (*acc * inv_n).sqrt();
            }
        }
        ReducerKind::Ka => {
            for (col, acc) in out.iter_mut().enumerate() {
                scratch.clear();
                scratch.extend(rows.clone().map(|row| row[col]));
                *acc = encoder.aggregate_f64(scratch)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(kind: ReducerKind, rows: &[&[f64]]) -> Vec<f64> {
        reduce(kind, rows, rows.first().map_or(2, |r| r.len())).unwrap()
    }

    #[test]
    fn sums_from_the_two_hop_example() {
        assert_eq!(run(ReducerKind::Sum, &[&[0.0, 1.0], &[0.0, 1.0]]), vec![0.0, 2.0]);
        assert_eq!(run(ReducerKind::Sum, &[&[2.0, 1.0], &[3.0, 1.0]]), vec![5.0, 2.0]);
    }

    #[test]
    fn means_from_the_two_hop_example() {
        assert_eq!(run(ReducerKind::Mean, &[&[0.0, 1.0], &[0.0, 1.0]]), vec![0.0, 1.0]);
        let out = run(ReducerKind::Mean, &[&[2.0 / 3.0, 1.0 / 3.0], &[0.75, 0.25]]);
        assert!((out[0] - 17.0 / 24.0).abs() <= f64::EPSILON);
        assert!((out[1] - 7.0 / 24.0).abs() <= f64::EPSILON);
    }

    #[test]
    fn std_of_repeated_row_is_zero() {
        let a = [0.3, -1.7, 4.0];
        assert_eq!(run(ReducerKind::Std, &[&a, &a]), vec![0.0; 3]);
    }

    #[test]
    fn std_is_population_form() {
        // values 1 and 3: mean 2, population variance 1
        assert_eq!(run(ReducerKind::Std, &[&[1.0], &[3.0]]), vec![1.0]);
    }

    #[test]
    fn empty_multiset_gives_zero_vector() {
        for kind in ReducerKind::ALL {
            assert_eq!(reduce(kind, &[], 3).unwrap(), vec![0.0; 3], "{kind}");
        }
    }

    #[test]
    fn singleton_multiset() {
        let a: &[f64] = &[0.25, 0.5];
        for kind in [ReducerKind::Mean, ReducerKind::Sum, ReducerKind::Max, ReducerKind::Min] {
            assert_eq!(run(kind, &[a]), a.to_vec());
        }
        assert_eq!(run(ReducerKind::Std, &[a]), vec![0.0, 0.0]);
    }

    #[test]
    fn ka_reduces_each_column() {
        let enc = KaEncoder::default();
        let out = run(ReducerKind::Ka, &[&[0.5, 0.0], &[0.25, 1.0]]);
        assert_eq!(out[0], enc.aggregate(&[0.5, 0.25]).unwrap().to_f64());
        assert_eq!(out[1], enc.aggregate(&[0.0, 1.0]).unwrap().to_f64());
        assert!(reduce(ReducerKind::Ka, &[&[2.0]], 1).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let err = reduce(ReducerKind::Sum, &[&[1.0, 2.0], &[1.0]], 2).unwrap_err();
        assert!(matches!(err, FafError::DimensionMismatch { expected: 2, found: 1 }));
    }

    #[test]
    fn non_finite_input() {
        assert!(reduce(ReducerKind::Max, &[&[f64::INFINITY]], 1).is_err());
    }

    #[test]
    fn names_round_trip() {
        for kind in ReducerKind::ALL {
            assert_eq!(kind.name().parse::<ReducerKind>().unwrap(), kind);
        }
        assert_eq!(parse_reducer_list("faf4").unwrap(), ReducerKind::FAF4.to_vec());
        assert_eq!(
            parse_reducer_list("mean,sum,max,min").unwrap(),
            ReducerKind::FAF4.to_vec()
        );
        assert!(parse_reducer_list("median").is_err());
    }
}

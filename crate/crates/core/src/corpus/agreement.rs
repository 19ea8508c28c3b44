//! Inter-rater agreement over ordinal ratings.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, PartialEq)]
pub struct RaterTable {
    /// `(item id, rating_a, rating_b)`.
    pub items: Vec<(String, usize, usize)>,
    pub num_classes: usize,
}

impl RaterTable {
    pub fn new(items: Vec<(String, usize, usize)>, num_classes: usize) -> Result<Self> {
        let t = Self { items, num_classes };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Data("a rater table needs at least 2 classes".into()));
        }
        for (id, a, b) in &self.items {
            if *a >= self.num_classes || *b >= self.num_classes {
                return Err(Error::Data(format!(
                    "item '{id}' has a rating outside [0, {})",
                    self.num_classes
                )));
            }
        }
        Ok(())
    }

    /// Joint histogram, rows indexed by rater a.
    pub fn observed(&self) -> Vec<Vec<f64>> {
        let mut o = vec![vec![0.0; self.num_classes]; self.num_classes];
        for (_, a, b) in &self.items {
            o[*a][*b] += 1.0;
        }
        o
    }

    /// Parses `item,rating_a,rating_b` CSV with a header line. Without
    /// `num_classes` the class count is the largest rating plus one (at
    /// least 2).
    pub fn from_csv(text: &str, num_classes: Option<usize>) -> Result<Self> {
        let mut items = Vec::new();
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, header)) if header.trim() == "item,rating_a,rating_b" => {}
            Some((i, _)) => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected header 'item,rating_a,rating_b'".into(),
                })
            }
            None => return Err(Error::Data("empty rater table".into())),
        }
        for (i, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|e| Error::Parse {
                    line: i + 1,
                    message: format!("rating '{s}': {e}"),
                })
            };
            match fields.as_slice() {
                [id, a, b] => items.push((id.to_string(), parse(a)?, parse(b)?)),
                _ => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("expected 3 fields, found {}", fields.len()),
                    })
                }
            }
        }
        let k = num_classes.unwrap_or_else(|| {
            items.iter().map(|(_, a, b)| a.max(b) + 1).max().unwrap_or(0).max(2)
        });
        Self::new(items, k)
    }
}

pub fn read_rater_table(path: &Path, num_classes: Option<usize>) -> Result<RaterTable> {
    RaterTable::from_csv(&fsutil::read_to_string(path)?, num_classes)
}

/// Quadratic weighted kappa `1 − Σ w·O / Σ w·E`, `w_ij = (i−j)²/(K−1)²`.
pub fn qwk(table: &RaterTable) -> Result<f64> {
    table.validate()?;
    if table.items.is_empty() {
        return Err(Error::Data("kappa needs at least one rated item".into()));
    }
    let k = table.num_classes;
    let o = table.observed();
    let n = table.items.len() as f64;
    let row: Vec<f64> = o.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<f64> = (0..k).map(|j| o.iter().map(|r| r[j]).sum()).collect();
    let scale = ((k - 1) * (k - 1)) as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            let w = ((i as f64) - (j as f64)).powi(2) / scale;
            num += w * o[i][j];
            den += w * row[i] * col[j] / n;
        }
    }
    if den == 0.0 {
        return Err(Error::Undefined(
            "kappa is undefined when both raters use the same single class".into(),
        ));
    }
    Ok(1.0 - num / den)
}

/// Fraction of items on which the raters agree exactly.
pub fn pairwise_agreement(table: &RaterTable) -> Result<f64> {
    if table.items.is_empty() {
        return Err(Error::Data("agreement needs at least one rated item".into()));
    }
    let same = table.items.iter().filter(|(_, a, b)| a == b).count();
    Ok(same as f64 / table.items.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_counts(counts: &[Vec<usize>]) -> RaterTable {
        let mut items = Vec::new();
        for (i, row) in counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                for _ in 0..c {
                    items.push((format!("it{}", items.len()), i, j));
                }
            }
        }
        RaterTable::new(items, counts.len()).unwrap()
    }

    // Quadratic kappa as 2·cov / (var_a + var_b + (mean_a − mean_b)²).
    fn moment_kappa(t: &RaterTable) -> f64 {
        let n = t.items.len() as f64;
        let ma = t.items.iter().map(|x| x.1 as f64).sum::<f64>() / n;
        let mb = t.items.iter().map(|x| x.2 as f64).sum::<f64>() / n;
        let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
        for (_, a, b) in &t.items {
            let (da, db) = (*a as f64 - ma, *b as f64 - mb);
            va += da * da / n;
            vb += db * db / n;
            cov += da * db / n;
        }
        2.0 * cov / (va + vb + (ma - mb).powi(2))
    }

    #[test]
    fn perfect_agreement_is_one() {
        let t = from_counts(&[vec![3, 0, 0], vec![0, 4, 0], vec![0, 0, 2]]);
        assert_eq!(qwk(&t).unwrap(), 1.0);
        assert_eq!(pairwise_agreement(&t).unwrap(), 1.0);
    }

    #[test]
    fn independence_is_zero() {
        let t = from_counts(&[vec![25, 25], vec![25, 25]]);
        assert!(qwk(&t).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn three_class_matches_moment_form() {
        let t = from_counts(&[vec![30, 5, 0], vec![4, 40, 6], vec![0, 5, 10]]);
        let k = qwk(&t).unwrap();
        assert!((k - moment_kappa(&t)).abs() <= 1e-12, "{k}");
    }

    #[test]
    fn single_shared_class_is_undefined() {
        let t = from_counts(&[vec![5, 0], vec![0, 0]]);
        assert!(matches!(qwk(&t), Err(Error::Undefined(_))));
    }

    #[test]
    fn csv_parsing() {
        let t = RaterTable::from_csv("item,rating_a,rating_b\na,0,1\nb,2,2\n", None).unwrap();
        assert_eq!(t.num_classes, 3);
        assert_eq!(t.items.len(), 2);
        assert!(matches!(
            RaterTable::from_csv("item,rating_a,rating_b\na,0\n", None),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(RaterTable::from_csv("item,rating_a,rating_b\na,0,5\n", Some(3)).is_err());
    }
}

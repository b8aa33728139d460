//! Observational data `(X, A, Y)`, cross-fitting folds and CSV I/O.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::dgp::DgpSpec;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Known truth attached to simulated data. Never serialized.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub ate: f64,
    pub spec: DgpSpec,
}

impl GroundTruth {
    pub fn cate(&self, x: &[f64]) -> f64 {
        self.spec.cate(x)
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    x: Matrix,
    a: Vec<u8>,
    y: Vec<f64>,
    truth: Option<GroundTruth>,
}

impl Dataset {
    pub fn new(x: Matrix, a: Vec<u8>, y: Vec<f64>) -> Result<Self> {
        let n = x.rows();
        if n == 0 {
            return Err(Error::Schema("dataset needs at least one row".into()));
        }
        if a.len() != n || y.len() != n {
            return Err(Error::Dimension(format!(
                "x has {n} rows, a has {}, y has {}",
                a.len(),
                y.len()
            )));
        }
        if let Some(i) = a.iter().position(|&v| v > 1) {
            return Err(Error::Domain(format!("treatment at row {i} is not 0/1")));
        }
        if x.as_slice().iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite covariate or outcome".into()));
        }
        Ok(Self { x, a, y, truth: None })
    }

    pub fn with_truth(mut self, truth: GroundTruth) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn a(&self) -> &[u8] {
        &self.a
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn truth(&self) -> Option<&GroundTruth> {
        self.truth.as_ref()
    }

    pub fn y_mut(&mut self) -> &mut [f64] {
        &mut self.y
    }

    /// Rows `idx` in the given order; ground truth is carried along.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            a: idx.iter().map(|&i| self.a[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            truth: self.truth.clone(),
        }
    }

    pub fn arm_count(&self, arm: u8) -> usize {
        self.a.iter().filter(|&&v| v == arm).count()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv_to(BufWriter::new(file))
    }

    pub fn write_csv_to<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.dim();
        let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
        header.push("a".into());
        header.push("y".into());
        writeln!(out, "{}", header.join(","))?;
        let mut line = String::new();
        for i in 0..self.n() {
            line.clear();
            for v in self.x.row(i) {
                // Display for f64 is the shortest string that round-trips exactly.
                line.push_str(&format!("{v},"));
            }
            line.push_str(&format!("{},{}", self.a[i], self.y[i]));
            writeln!(out, "{line}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset> {
        let file = std::fs::File::open(path)?;
        Self::read_csv_from(file)
    }

    pub fn read_csv_from<R: Read>(input: R) -> Result<Dataset> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let header = reader
            .headers()
            .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
            .clone();
        let cols: Vec<&str> = header.iter().collect();
        let ncol = cols.len();
        if ncol < 3 || cols[ncol - 2] != "a" || cols[ncol - 1] != "y" {
            return Err(Error::Schema(format!(
                "header must be x1,...,xd,a,y; got `{}`",
                cols.join(",")
            )));
        }
        let d = ncol - 2;
        for (j, name) in cols[..d].iter().enumerate() {
            if *name != format!("x{}", j + 1) {
                return Err(Error::Schema(format!("column {} should be x{}, got `{name}`", j + 1, j + 1)));
            }
        }

        let mut xs = Vec::new();
        let mut a = Vec::new();
        let mut y = Vec::new();
        for (r, record) in reader.records().enumerate() {
            // Data rows are numbered from 1, after the header.
            let row = r + 1;
            let record = record.map_err(|e| Error::Parse {
                row,
                column: 0,
                message: e.to_string(),
            })?;
            if record.len() != ncol {
                return Err(Error::Parse {
                    row,
                    column: record.len().min(ncol) + 1,
                    message: format!("expected {ncol} fields, found {}", record.len()),
                });
            }
            for (j, field) in record.iter().enumerate() {
                let value: f64 = field.parse().map_err(|_| Error::Parse {
                    row,
                    column: j + 1,
                    message: format!("`{field}` is not a number"),
                })?;
                if !value.is_finite() {
                    return Err(Error::Parse {
                        row,
                        column: j + 1,
                        message: "non-finite value".into(),
                    });
                }
                if j < d {
                    xs.push(value);
                } else if j == d {
                    if value != 0.0 && value != 1.0 {
                        return Err(Error::Parse {
                            row,
                            column: j + 1,
                            message: format!("treatment must be 0 or 1, got {field}"),
                        });
                    }
                    a.push(value as u8);
                } else {
                    y.push(value);
                }
            }
        }
        if y.is_empty() {
            return Err(Error::Schema("CSV has no data rows".into()));
        }
        let x = Matrix::from_vec(y.len(), d, xs)?;
        Dataset::new(x, a, y)
    }
}

/// Balanced assignment of `n` indices to `k` folds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldAssignment {
    k: usize,
    fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn from_labels(k: usize, fold_of: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = fold_of.iter().find(|&&f| f >= k) {
            return Err(Error::Domain(format!("fold label {bad} outside [0, {k})")));
        }
        Ok(Self { k, fold_of })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn complement(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Uniformly random balanced partition of `0..n` into `k` folds.
pub fn make_folds(n: usize, k: usize, rng: &mut Rng) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(Error::InvalidFoldCount { n, k });
    }
    let perm = rng.permutation(n);
    let mut fold_of = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    Ok(FoldAssignment { k, fold_of })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_balanced() {
        let f = make_folds(4, 2, &mut Rng::new(0, 0)).unwrap();
        assert_eq!(f.sizes(), vec![2, 2]);
        let mut s = make_folds(5, 2, &mut Rng::new(1, 0)).unwrap().sizes();
        s.sort_unstable();
        assert_eq!(s, vec![2, 3]);
        assert_eq!(make_folds(1000, 5, &mut Rng::new(2, 0)).unwrap().sizes(), vec![200; 5]);
    }

    #[test]
    fn fold_count_bounds() {
        let mut rng = Rng::new(0, 0);
        assert!(matches!(make_folds(10, 1, &mut rng), Err(Error::InvalidFoldCount { .. })));
        assert!(matches!(make_folds(3, 4, &mut rng), Err(Error::InvalidFoldCount { .. })));
        assert!(make_folds(3, 3, &mut rng).is_ok());
    }

    #[test]
    fn fold_membership_frequency_is_uniform() {
        let (n, k, seeds) = (10, 5, 1000);
        let mut counts = vec![vec![0usize; k]; n];
        for seed in 0..seeds {
            let f = make_folds(n, k, &mut Rng::new(seed, 3)).unwrap();
            for (i, &fold) in f.fold_of().iter().enumerate() {
                counts[i][fold] += 1;
            }
        }
        for row in &counts {
            for &c in row {
                let freq = c as f64 / seeds as f64;
                assert!((freq - 1.0 / k as f64).abs() <= 0.05, "{freq}");
            }
        }
    }

    #[test]
    fn empty_body_is_schema_error() {
        let err = Dataset::read_csv_from("x1,a,y\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }

    #[test]
    fn single_row() {
        let ds = Dataset::read_csv_from("x1,a,y\n0.0,1,2.5\n".as_bytes()).unwrap();
        assert_eq!(ds.n(), 1);
        assert_eq!(ds.dim(), 1);
        assert_eq!(ds.a(), &[1]);
        assert_eq!(ds.y(), &[2.5]);
    }

    #[test]
    fn parse_error_reports_position() {
        let err = Dataset::read_csv_from("x1,x2,a,y\n1,2,0,3\n1,zz,1,3\n".as_bytes()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => assert_eq!((row, column), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_treatment_and_header() {
        assert!(matches!(
            Dataset::read_csv_from("x1,a,y\n0,2,1\n".as_bytes()),
            Err(Error::Parse { column: 2, .. })
        ));
        assert!(matches!(
            Dataset::read_csv_from("x1,y\n0,1\n".as_bytes()),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            Dataset::read_csv_from("z1,a,y\n0,1,1\n".as_bytes()),
            Err(Error::Schema(_))
        ));
    }

    proptest::proptest! {
        #[test]
        fn csv_round_trip_is_lossless(
            rows in proptest::collection::vec(
                (proptest::num::f64::NORMAL, proptest::num::f64::NORMAL, proptest::bool::ANY, proptest::num::f64::NORMAL),
                1..20,
            )
        ) {
            let x = Matrix::from_rows(&rows.iter().map(|r| vec![r.0, r.1]).collect::<Vec<_>>()).unwrap();
            let a = rows.iter().map(|r| r.2 as u8).collect();
            let y = rows.iter().map(|r| r.3).collect();
            let ds = Dataset::new(x, a, y).unwrap();
            let mut buf = Vec::new();
            ds.write_csv_to(&mut buf).unwrap();
            let back = Dataset::read_csv_from(buf.as_slice()).unwrap();
            proptest::prop_assert_eq!(back.x(), ds.x());
            proptest::prop_assert_eq!(back.a(), ds.a());
            proptest::prop_assert_eq!(back.y(), ds.y());
        }
    }
}

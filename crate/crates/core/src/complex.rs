//! Complex matrices carried as a pair of real matrices.
//!
//! Every complex product is composed from four real products, e.g.
//! `Re(AX) = Re(A)Re(X) - Im(A)Im(X)` and `Im(AX) = Im(A)Re(X) + Re(A)Im(X)`.

use std::fmt::Write as _;
use std::io::BufRead;

use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    re: Array2<f64>,
    im: Array2<f64>,
}

impl ComplexMatrix {
    pub fn new(re: Array2<f64>, im: Array2<f64>) -> Result<Self> {
        if re.dim() != im.dim() {
            return Err(Error::shape("ComplexMatrix::new", re.dim(), im.dim()));
        }
        Ok(Self { re, im })
    }

    pub fn from_real(re: Array2<f64>) -> Self {
        let im = Array2::zeros(re.dim());
        Self { re, im }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            re: Array2::zeros((rows, cols)),
            im: Array2::zeros((rows, cols)),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_real(Array2::eye(n))
    }

    pub fn re(&self) -> &Array2<f64> {
        &self.re
    }

    pub fn im(&self) -> &Array2<f64> {
        &self.im
    }

    pub fn re_mut(&mut self) -> &mut Array2<f64> {
        &mut self.re
    }

    pub fn im_mut(&mut self) -> &mut Array2<f64> {
        &mut self.im
    }

    pub fn into_parts(self) -> (Array2<f64>, Array2<f64>) {
        (self.re, self.im)
    }

    pub fn rows(&self) -> usize {
        self.re.nrows()
    }

    pub fn cols(&self) -> usize {
        self.re.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.re.dim()
    }

    pub fn get(&self, r: usize, c: usize) -> (f64, f64) {
        (self.re[[r, c]], self.im[[r, c]])
    }

    pub fn set(&mut self, r: usize, c: usize, value: (f64, f64)) {
        self.re[[r, c]] = value.0;
        self.im[[r, c]] = value.1;
    }

    /// `self · other`.
    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols() != other.rows() {
            return Err(Error::shape("matmul", self.dim(), other.dim()));
        }
        let re = self.re.dot(&other.re) - self.im.dot(&other.im);
        let im = self.im.dot(&other.re) + self.re.dot(&other.im);
        Ok(ComplexMatrix { re, im })
    }

    /// `selfᴴ · other`.
    pub fn hermitian_matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.rows() != other.rows() {
            return Err(Error::shape("hermitian_matmul", self.dim(), other.dim()));
        }
        let (ar, ai) = (self.re.t(), self.im.t());
        let re = ar.dot(&other.re) + ai.dot(&other.im);
        let im = ar.dot(&other.im) - ai.dot(&other.re);
        Ok(ComplexMatrix { re, im })
    }

    /// `self · otherᴴ`.
    pub fn matmul_hermitian(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols() != other.cols() {
            return Err(Error::shape("matmul_hermitian", self.dim(), other.dim()));
        }
        let (br, bi) = (other.re.t(), other.im.t());
        let re = self.re.dot(&br) + self.im.dot(&bi);
        let im = self.im.dot(&br) - self.re.dot(&bi);
        Ok(ComplexMatrix { re, im })
    }

    pub fn add(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::shape("add", self.dim(), other.dim()));
        }
        Ok(ComplexMatrix {
            re: &self.re + &other.re,
            im: &self.im + &other.im,
        })
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::shape("sub", self.dim(), other.dim()));
        }
        Ok(ComplexMatrix {
            re: &self.re - &other.re,
            im: &self.im - &other.im,
        })
    }

    pub fn scale(&self, factor: f64) -> ComplexMatrix {
        ComplexMatrix {
            re: &self.re * factor,
            im: &self.im * factor,
        }
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.re.iter().map(|v| v * v).sum::<f64>() + self.im.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        sum_sq(self.re.row(i)) + sum_sq(self.im.row(i))
    }

    pub fn row_norms(&self) -> Array1<f64> {
        (0..self.rows()).map(|i| self.row_norm_sq(i).sqrt()).collect()
    }

    pub fn column_norm_sq(&self, j: usize) -> f64 {
        sum_sq(self.re.column(j)) + sum_sq(self.im.column(j))
    }

    pub fn column_norms_sq(&self) -> Array1<f64> {
        (0..self.cols()).map(|j| self.column_norm_sq(j)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(self.im.iter()).all(|v| v.is_finite())
    }

    /// Copies row `i` out as `(re, im)`.
    pub fn row(&self, i: usize) -> (Array1<f64>, Array1<f64>) {
        (self.re.row(i).to_owned(), self.im.row(i).to_owned())
    }

    pub fn set_row(&mut self, i: usize, re: ArrayView1<f64>, im: ArrayView1<f64>) {
        self.re.row_mut(i).assign(&re);
        self.im.row_mut(i).assign(&im);
    }

    /// Selects a contiguous block of columns.
    pub fn column_block(&self, start: usize, width: usize) -> ComplexMatrix {
        ComplexMatrix {
            re: self.re.slice(s![.., start..start + width]).to_owned(),
            im: self.im.slice(s![.., start..start + width]).to_owned(),
        }
    }

    /// Concatenates matrices with equal row counts side by side.
    pub fn hstack(parts: &[ComplexMatrix]) -> Result<ComplexMatrix> {
        let Some(first) = parts.first() else {
            return Ok(ComplexMatrix::zeros(0, 0));
        };
        if let Some(bad) = parts.iter().find(|p| p.rows() != first.rows()) {
            return Err(Error::shape("hstack", first.dim(), bad.dim()));
        }
        let re_views: Vec<_> = parts.iter().map(|p| p.re.view()).collect();
        let im_views: Vec<_> = parts.iter().map(|p| p.im.view()).collect();
        Ok(ComplexMatrix {
            re: ndarray::concatenate(Axis(1), &re_views).expect("rows checked"),
            im: ndarray::concatenate(Axis(1), &im_views).expect("rows checked"),
        })
    }

    /// Textual form: `rows cols` header then one line per row with
    /// interleaved `re im` pairs at 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_text(&mut out);
        out
    }

    fn write_text(&self, out: &mut String) {
        let _ = writeln!(out, "{} {}", self.rows(), self.cols());
        for r in 0..self.rows() {
            for c in 0..self.cols() {
                if c > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{:.16e} {:.16e}", self.re[[r, c]], self.im[[r, c]]);
            }
            out.push('\n');
        }
    }

    pub fn text_lines(&self) -> Vec<String> {
        self.to_text().lines().map(str::to_owned).collect()
    }

    pub fn from_text(text: &str) -> Result<ComplexMatrix> {
        let mut lines = text.lines().enumerate();
        let m = Self::read_one(&mut lines)?;
        m.ok_or(Error::Parse {
            line: 1,
            reason: "empty input".into(),
        })
    }

    /// Parses a sequence of concatenated matrices.
    pub fn read_all<R: BufRead>(reader: R) -> Result<Vec<ComplexMatrix>> {
        let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
        let mut iter = lines.iter().map(String::as_str).enumerate();
        let mut out = Vec::new();
        while let Some(m) = Self::read_one(&mut iter)? {
            out.push(m);
        }
        Ok(out)
    }

    pub fn write_all(mats: &[ComplexMatrix]) -> String {
        let mut out = String::new();
        for m in mats {
            m.write_text(&mut out);
        }
        out
    }

    fn read_one<'a>(
        lines: &mut impl Iterator<Item = (usize, &'a str)>,
    ) -> Result<Option<ComplexMatrix>> {
        let header = lines.by_ref().find(|(_, l)| !l.trim().is_empty());
        let Some((hline, header)) = header else {
            return Ok(None);
        };
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: hline + 1,
                reason: format!("bad header: {e}"),
            })?;
        let [rows, cols] = dims[..] else {
            return Err(Error::Parse {
                line: hline + 1,
                reason: "header must be `rows cols`".into(),
            });
        };
        let mut m = ComplexMatrix::zeros(rows, cols);
        for r in 0..rows {
            let (lno, line) = lines.next().ok_or(Error::Parse {
                line: hline + 2 + r,
                reason: "unexpected end of input".into(),
            })?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    line: lno + 1,
                    reason: e.to_string(),
                })?;
            if vals.len() != 2 * cols {
                return Err(Error::Parse {
                    line: lno + 1,
                    reason: format!("expected {} values, found {}", 2 * cols, vals.len()),
                });
            }
            for c in 0..cols {
                m.re[[r, c]] = vals[2 * c];
                m.im[[r, c]] = vals[2 * c + 1];
            }
        }
        Ok(Some(m))
    }
}

fn sum_sq(v: ArrayView1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Free-function form of [`ComplexMatrix::matmul`].
pub fn complex_matmul(a: &ComplexMatrix, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.matmul(x)
}

/// Real matrix text form used for network weights: `rows cols` header then
/// one line per row of 17-significant-digit decimals.
pub fn real_to_lines(m: &Array2<f64>) -> Vec<String> {
    let mut out = vec![format!("{} {}", m.nrows(), m.ncols())];
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push(line.join(" "));
    }
    out
}

pub fn real_from_lines(lines: &[String]) -> Result<Array2<f64>> {
    let bad = |line: usize, reason: String| Error::Parse { line, reason };
    let header = lines.first().ok_or_else(|| bad(1, "empty matrix".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| bad(1, format!("bad header: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(bad(1, "header must be `rows cols`".into()));
    };
    if lines.len() != rows + 1 {
        return Err(bad(lines.len(), format!("expected {rows} data lines")));
    }
    let mut m = Array2::zeros((rows, cols));
    for (r, line) in lines[1..].iter().enumerate() {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e: std::num::ParseFloatError| bad(r + 2, e.to_string()))?;
        if vals.len() != cols {
            return Err(bad(r + 2, format!("expected {cols} values, found {}", vals.len())));
        }
        m.row_mut(r).assign(&Array1::from(vals));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn identity_is_neutral() {
        let x = ComplexMatrix::new(array![[1.0, 2.0], [3.0, 4.0]], array![[0.5, -1.0], [2.0, 0.0]])
            .unwrap();
        assert_eq!(ComplexMatrix::identity(2).matmul(&x).unwrap(), x);
    }

    #[test]
    fn multiplication_by_i() {
        let a = ComplexMatrix::new(Array2::zeros((3, 3)), Array2::eye(3)).unwrap();
        let x = ComplexMatrix::from_real(array![[1.0], [-2.0], [3.5]]);
        let y = a.matmul(&x).unwrap();
        assert!(y.re().iter().all(|&v| v == 0.0));
        assert_eq!(y.im(), x.re());
    }

    #[test]
    fn shape_errors() {
        let a = ComplexMatrix::zeros(2, 3);
        let b = ComplexMatrix::zeros(2, 3);
        assert!(matches!(a.matmul(&b), Err(Error::Shape { .. })));
        assert!(ComplexMatrix::new(Array2::zeros((2, 2)), Array2::zeros((2, 3))).is_err());
    }

    #[test]
    fn hermitian_products_agree_with_explicit_conjugate() {
        let a = ComplexMatrix::new(array![[1.0, 2.0], [0.5, -1.0]], array![[0.3, 0.0], [-2.0, 1.0]])
            .unwrap();
        let b = ComplexMatrix::new(array![[0.2], [1.5]], array![[-0.7], [0.4]]).unwrap();
        let ah = ComplexMatrix::new(a.re().t().to_owned(), -a.im().t().to_owned()).unwrap();
        let lhs = a.hermitian_matmul(&b).unwrap();
        let rhs = ah.matmul(&b).unwrap();
        assert!(lhs.sub(&rhs).unwrap().frobenius_norm_sq() < 1e-28);

        let c = ComplexMatrix::new(array![[0.1, 0.9]], array![[1.1, -0.2]]).unwrap();
        let ch = ComplexMatrix::new(c.re().t().to_owned(), -c.im().t().to_owned()).unwrap();
        let lhs = a.matmul_hermitian(&c).unwrap();
        let rhs = a.matmul(&ch).unwrap();
        assert!(lhs.sub(&rhs).unwrap().frobenius_norm_sq() < 1e-28);
    }

    #[test]
    fn text_format_layout() {
        let m = ComplexMatrix::new(array![[1.0, 0.25]], array![[-2.0, 3.0]]).unwrap();
        let text = m.to_text();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("1 2"));
        assert_eq!(lines.next().unwrap().split_whitespace().count(), 4);
        assert!(ComplexMatrix::from_text("2 2\n1 2 3 4\n").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip_is_exact(
            rows in 1usize..5,
            cols in 1usize..5,
            vals in proptest::collection::vec(-1e6f64..1e6, 50),
        ) {
            let mut m = ComplexMatrix::zeros(rows, cols);
            for r in 0..rows {
                for c in 0..cols {
                    let k = 2 * (r * cols + c);
                    m.set(r, c, (vals[k] / 7.0, vals[k + 1] * 1e-9));
                }
            }
            let back = ComplexMatrix::from_text(&m.to_text()).unwrap();
            prop_assert_eq!(&back, &m);
            let many = ComplexMatrix::read_all(ComplexMatrix::write_all(&[m.clone(), m.clone()]).as_bytes()).unwrap();
            prop_assert_eq!(many.len(), 2);
            prop_assert_eq!(&many[1], &m);
            let real = real_from_lines(&real_to_lines(m.re())).unwrap();
            prop_assert_eq!(&real, m.re());
        }
    }
}

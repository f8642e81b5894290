//! Readers for IDX image files, libsvm text and count tables in CSV form.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::glm::Dataset;
use crate::tensor::{RandomSource, Tensor};

const IDX_UBYTE: u8 = 0x08;

/// Parses an unsigned-byte IDX file. One-dimensional files (labels) keep
/// their raw values; files with more dimensions become one row per item,
/// scaled from bytes into `[0, 1]`.
pub fn parse_idx(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::format(None, "bad IDX magic"));
    }
    if bytes[2] != IDX_UBYTE {
        return Err(Error::format(None, format!("unsupported IDX element type 0x{:02x}", bytes[2])));
    }
    let rank = bytes[3] as usize;
    if rank == 0 {
        return Err(Error::format(None, "IDX file of rank 0"));
    }
    let header = 4 + 4 * rank;
    if bytes.len() < header {
        return Err(Error::format(None, "truncated IDX header"));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().expect("4-byte chunk")) as usize)
        .collect();
    let count: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() != count {
        return Err(Error::format(
            None,
            format!("IDX payload has {} bytes, dims {dims:?} need {count}", payload.len()),
        ));
    }
    if rank == 1 {
        return Tensor::new(dims, payload.iter().map(|&b| b as f64).collect());
    }
    let width = count.checked_div(dims[0]).unwrap_or(0);
    Tensor::new(vec![dims[0], width], payload.iter().map(|&b| b as f64 / 255.0).collect())
}

/// Serializes an unsigned-byte IDX file with the given dims.
pub fn write_idx(dims: &[usize], bytes: &[u8]) -> Result<Vec<u8>> {
    let count: usize = dims.iter().product();
    if count != bytes.len() || dims.is_empty() || dims.len() > 255 {
        return Err(Error::Shape(format!("IDX dims {dims:?} for {} bytes", bytes.len())));
    }
    let mut out = vec![0, 0, IDX_UBYTE, dims.len() as u8];
    for &d in dims {
        let d = u32::try_from(d).map_err(|_| Error::Shape(format!("IDX dim {d} too large")))?;
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend_from_slice(bytes);
    Ok(out)
}

/// One libsvm line: a label and sparse features with 0-based, strictly
/// increasing indices.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRecord {
    pub label: f64,
    pub features: Vec<(usize, f64)>,
}

fn parse_float(s: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::format(Some(line), format!("cannot parse {what} {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::format(Some(line), format!("{what} {s:?} is not finite")));
    }
    Ok(v)
}

/// Parses `label idx:val ...` lines with 1-based indices. Blank lines and
/// `#` comments are skipped.
pub fn parse_libsvm(text: &str) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut fields = body.split_whitespace();
        let label = parse_float(fields.next().expect("non-empty line"), line, "label")?;
        let mut features = Vec::new();
        let mut last: Option<usize> = None;
        for f in fields {
            let (idx, val) = f
                .split_once(':')
                .ok_or_else(|| Error::format(Some(line), format!("feature {f:?} lacks ':'")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| Error::format(Some(line), format!("bad feature index {idx:?}")))?;
            if idx == 0 {
                return Err(Error::format(Some(line), "feature indices start at 1"));
            }
            if last.is_some_and(|l| idx <= l) {
                return Err(Error::format(Some(line), format!("feature index {idx} not increasing")));
            }
            last = Some(idx);
            features.push((idx - 1, parse_float(val, line, "feature value")?));
        }
        out.push(RawRecord { label, features });
    }
    Ok(out)
}

pub fn write_libsvm(records: &[RawRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = write!(s, "{}", r.label);
        for (i, v) in &r.features {
            let _ = write!(s, " {}:{}", i + 1, v);
        }
        s.push('\n');
    }
    s
}

/// Dense design matrix and label column. The width is the largest index
/// seen unless `width` is given.
pub fn records_to_dense(records: &[RawRecord], width: Option<usize>) -> Result<(Tensor, Tensor)> {
    let seen = records
        .iter()
        .filter_map(|r| r.features.last().map(|(i, _)| i + 1))
        .max()
        .unwrap_or(0);
    let n = width.unwrap_or(seen);
    if seen > n {
        return Err(Error::Shape(format!("feature index {seen} exceeds width {n}")));
    }
    let mut a = vec![0.0; records.len() * n];
    for (row, r) in records.iter().enumerate() {
        for &(i, v) in &r.features {
            a[row * n + i] = v;
        }
    }
    let labels = records.iter().map(|r| r.label).collect();
    Ok((Tensor::new(vec![records.len(), n], a)?, Tensor::column(labels)?))
}

/// Centers each masked column, then divides it by its largest absolute
/// value after centering. Constant columns become zero.
pub fn normalize_covariates(a: &Tensor, mask: &[bool]) -> Result<Tensor> {
    let (m, n) = a.shape2()?;
    if mask.len() != n {
        return Err(Error::Shape(format!("mask of {} for {n} columns", mask.len())));
    }
    let mut data = a.data().to_vec();
    for (j, _) in mask.iter().enumerate().filter(|(_, &on)| on) {
        if m == 0 {
            break;
        }
        let mean = (0..m).map(|i| data[i * n + j]).sum::<f64>() / m as f64;
        let mut peak = 0.0f64;
        for i in 0..m {
            data[i * n + j] -= mean;
            peak = peak.max(data[i * n + j].abs());
        }
        if peak > 0.0 {
            for i in 0..m {
                data[i * n + j] /= peak;
            }
        }
    }
    Tensor::new(vec![m, n], data)
}

/// Columns holding only integers, excluding 0/1 indicator columns.
pub fn integer_columns(a: &Tensor) -> Result<Vec<bool>> {
    let (m, n) = a.shape2()?;
    Ok((0..n)
        .map(|j| {
            let col = (0..m).map(|i| a.data()[i * n + j]);
            let integral = col.clone().all(|v| v.fract() == 0.0);
            let indicator = col.clone().all(|v| v == 0.0 || v == 1.0);
            integral && !indicator
        })
        .collect())
}

/// Covariates built from a `corps, year, count` table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovariateSet {
    /// No columns; only the bias is fitted.
    Empty,
    /// One-hot group indicator.
    Groups,
    /// `1, y - y0, (y - y0)^2` with `y0` the earliest year in the table.
    Quadratic,
    /// Group indicators followed by the quadratic columns.
    GroupsQuadratic,
}

impl CovariateSet {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            0 => Ok(CovariateSet::Empty),
            1 => Ok(CovariateSet::Groups),
            2 => Ok(CovariateSet::Quadratic),
            3 => Ok(CovariateSet::GroupsQuadratic),
            _ => Err(Error::InvalidArgument(format!("covariate set {i} not in 0..=3"))),
        }
    }
}

/// Parses a count table with header columns `corps`, `year` and `count`
/// (any order, case-insensitive; extra columns are ignored).
pub fn parse_csv_counts(text: &str, set: CovariateSet) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::format(Some(1), e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::format(Some(1), format!("missing column {name:?}")))
    };
    let (ci, yi, ki) = (col("corps")?, col("year")?, col("count")?);

    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::format(Some(line), e.to_string()))?;
        let field = |k: usize| rec.get(k).ok_or_else(|| Error::format(Some(line), "short row"));
        let group = field(ci)?.to_string();
        let year = parse_float(field(yi)?, line, "year")?;
        let count = parse_float(field(ki)?, line, "count")?;
        if count < 0.0 || count.fract() != 0.0 {
            return Err(Error::format(Some(line), format!("count {count} is not a nonnegative integer")));
        }
        rows.push((group, year, count));
    }

    let groups: BTreeMap<&str, usize> = {
        let mut names: Vec<&str> = rows.iter().map(|r| r.0.as_str()).collect();
        names.sort_by(|a, b| match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(y)) => x.total_cmp(&y),
            _ => a.cmp(b),
        });
        names.dedup();
        names.into_iter().enumerate().map(|(i, n)| (n, i)).collect()
    };
    let y0 = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let (one_hot, quad) = match set {
        CovariateSet::Empty => (false, false),
        CovariateSet::Groups => (true, false),
        CovariateSet::Quadratic => (false, true),
        CovariateSet::GroupsQuadratic => (true, true),
    };
    let width = if one_hot { groups.len() } else { 0 } + if quad { 3 } else { 0 };
    let mut a = Vec::with_capacity(rows.len() * width);
    for (group, year, _) in &rows {
        if one_hot {
            let g = groups[group.as_str()];
            a.extend((0..groups.len()).map(|j| if j == g { 1.0 } else { 0.0 }));
        }
        if quad {
            let d = year - y0;
            a.extend([1.0, d, d * d]);
        }
    }
    let t = rows.iter().map(|r| r.2).collect();
    Dataset::new(Tensor::new(vec![rows.len(), width], a)?, Tensor::column(t)?, 1)
}

/// Splits rows by a seeded permutation into the first `train` and the rest.
pub fn train_test_split(data: &Dataset, train: usize, rng: &mut RandomSource) -> Result<(Dataset, Dataset)> {
    let m = data.rows();
    if train > m {
        return Err(Error::InvalidArgument(format!("cannot take {train} of {m} rows")));
    }
    let perm = rng.permutation(m);
    Ok((data.select(&perm[..train])?, data.select(&perm[train..])?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idx_images_and_labels() {
        let img = write_idx(&[1, 2, 2], &[0, 255, 0, 255]).unwrap();
        let t = parse_idx(&img).unwrap();
        assert_eq!(t.dims(), &[1, 4]);
        assert_eq!(t.data(), &[0.0, 1.0, 0.0, 1.0]);
        let labels = parse_idx(&write_idx(&[3], &[0, 1, 9]).unwrap()).unwrap();
        assert_eq!(labels.data(), &[0.0, 1.0, 9.0]);
    }

    #[test]
    fn idx_errors() {
        let img = write_idx(&[1, 2, 2], &[0, 255, 0, 255]).unwrap();
        assert!(matches!(parse_idx(&img[..img.len() - 1]), Err(Error::Format { .. })));
        let mut bad = img.clone();
        bad[0] = 1;
        assert!(matches!(parse_idx(&bad), Err(Error::Format { .. })));
        assert!(matches!(parse_idx(&img[..6]), Err(Error::Format { .. })));
    }

    #[test]
    fn libsvm_lines() {
        let r = parse_libsvm("1 1:0.5 3:-2\n2\n").unwrap();
        let (a, t) = records_to_dense(&r, None).unwrap();
        assert_eq!(a.dims(), &[2, 3]);
        assert_eq!(&a.data()[..3], &[0.5, 0.0, -2.0]);
        assert_eq!(&a.data()[3..], &[0.0, 0.0, 0.0]);
        assert_eq!(t.data(), &[1.0, 2.0]);
    }

    #[test]
    fn libsvm_errors_carry_line_numbers() {
        match parse_libsvm("1 1:1\n1 3:1 2:1\n") {
            Err(Error::Format { line: Some(2), .. }) => {}
            other => panic!("expected line-2 format error, got {other:?}"),
        }
        assert!(matches!(parse_libsvm("1 1:abc"), Err(Error::Format { line: Some(1), .. })));
        assert!(matches!(parse_libsvm("x 1:1"), Err(Error::Format { .. })));
        assert!(matches!(parse_libsvm("1 0:1"), Err(Error::Format { .. })));
    }

    #[test]
    fn normalization() {
        let a = Tensor::from_rows(&[vec![1.0, 1.0], vec![2.0, 0.0], vec![3.0, 0.0]]).unwrap();
        let out = normalize_covariates(&a, &[true, false]).unwrap();
        assert_eq!(out.data(), &[-1.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        let c = Tensor::column(vec![5.0, 5.0]).unwrap();
        assert_eq!(normalize_covariates(&c, &[true]).unwrap().data(), &[0.0, 0.0]);
        assert_eq!(integer_columns(&a).unwrap(), vec![true, false]);
    }

    #[test]
    fn count_tables() {
        let one = "corps,year,count\n1,1875,0\n";
        let d = parse_csv_counts(one, CovariateSet::Empty).unwrap();
        assert_eq!(d.design().dims(), &[1, 0]);
        let d = parse_csv_counts(one, CovariateSet::GroupsQuadratic).unwrap();
        assert_eq!(d.design().data(), &[1.0, 1.0, 0.0, 0.0]);

        let text = "Corps, Year, Count\nA,1875,0\nB,1877,2\nA,1878,1\n";
        let d = parse_csv_counts(text, CovariateSet::Quadratic).unwrap();
        assert_eq!(d.design().data(), &[1.0, 0.0, 0.0, 1.0, 2.0, 4.0, 1.0, 3.0, 9.0]);
        let d = parse_csv_counts(text, CovariateSet::Groups).unwrap();
        assert_eq!(d.design().data(), &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        assert_eq!(d.targets().data(), &[0.0, 2.0, 1.0]);

        let bad = "corps,year,count\n1,1875,-1\n";
        assert!(matches!(parse_csv_counts(bad, CovariateSet::Empty), Err(Error::Format { line: Some(2), .. })));
        assert!(parse_csv_counts("corps,count\n1,2\n", CovariateSet::Empty).is_err());
    }

    #[test]
    fn split_partitions_rows() {
        let a = Tensor::column((0..10).map(|v| v as f64).collect()).unwrap();
        let d = Dataset::new(a, Tensor::zeros(&[10]), 1).unwrap();
        let (tr, te) = train_test_split(&d, 7, &mut RandomSource::new(1, 0)).unwrap();
        let mut all: Vec<f64> = tr.design().data().iter().chain(te.design().data()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(|v| v as f64).collect::<Vec<_>>());
        assert_eq!(tr.rows(), 7);
    }
}

//! CSV serialization of datasets, information matrices and estimates.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces every value bit for bit.

use std::io::{Read, Write};

use crate::composite::{InfoStdErr, InfoTriple, Provenance};
use crate::error::{Error, Result};
use crate::estimators::EstimateResult;
use crate::linalg::SymMatrix;
use crate::models::Dataset;

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("CSV: {e}"))
}

fn flush<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("line {line}: bad number {s:?}")))
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("line {line}: bad index {s:?}")))
}

/// Header `rep,y1,...,yp`; `rep` is the row index.
pub fn write_dataset_csv<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["rep".to_string()];
    header.extend((1..=data.dim()).map(|j| format!("y{j}")));
    w.write_record(&header).map_err(csv_err)?;
    for (i, row) in data.rows().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    flush(w)
}

pub fn read_dataset_csv<R: Read>(input: R) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    let dim = header.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("rep".to_string())
        .chain((1..=dim).map(|j| format!("y{j}")))
        .collect();
    if dim == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::InvalidArgument(format!(
            "dataset header must be rep,y1,...,yp, got {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut data = Dataset::new(dim);
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = i + 2;
        parse_usize(&rec[0], line)?;
        let row = rec.iter().skip(1).map(|s| parse_f64(s, line)).collect::<Result<Vec<_>>>()?;
        data.push_row(&row)?;
    }
    Ok(data)
}

/// `matrix,row,col,value,std_err` with `matrix` in `H`, `J`, `G`; `std_err`
/// is empty for exact matrices.
pub fn write_info_csv<W: Write>(info: &InfoTriple, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["matrix", "row", "col", "value", "std_err"]).map_err(csv_err)?;
    let se = info.std_err.as_ref();
    let blocks = [
        ("H", &info.h, se.map(|s| &s.h)),
        ("J", &info.j, se.map(|s| &s.j)),
        ("G", &info.g, se.map(|s| &s.g)),
    ];
    for (name, m, err) in blocks {
        for r in 0..m.dim() {
            for c in 0..m.dim() {
                let e = err.map_or(String::new(), |e| e.get(r, c).to_string());
                w.write_record([name.to_string(), r.to_string(), c.to_string(), m.get(r, c).to_string(), e])
                    .map_err(csv_err)?;
            }
        }
    }
    flush(w)
}

/// Inverse of [`write_info_csv`]. The bias std errors are not stored and
/// come back as zero.
pub fn read_info_csv<R: Read>(input: R) -> Result<InfoTriple> {
    let mut r = csv::Reader::from_reader(input);
    let mut entries = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = i + 2;
        if rec.len() != 5 {
            return Err(Error::InvalidArgument(format!("line {line}: expected 5 fields")));
        }
        let which = match &rec[0] {
            "H" => 0,
            "J" => 1,
            "G" => 2,
            other => return Err(Error::InvalidArgument(format!("line {line}: unknown matrix {other:?}"))),
        };
        let se = match rec[4].trim() {
            "" => None,
            s => Some(parse_f64(s, line)?),
        };
        entries.push((which, parse_usize(&rec[1], line)?, parse_usize(&rec[2], line)?, parse_f64(&rec[3], line)?, se));
    }
    let dim = entries.iter().map(|e| e.1.max(e.2) + 1).max().unwrap_or(0);
    if dim == 0 || entries.len() != 3 * dim * dim {
        return Err(Error::InvalidArgument("incomplete information matrix file".into()));
    }
    let mut vals = [SymMatrix::zeros(dim), SymMatrix::zeros(dim), SymMatrix::zeros(dim)];
    let mut errs = vals.clone();
    let with_se = entries.iter().filter(|e| e.4.is_some()).count();
    if with_se != 0 && with_se != entries.len() {
        return Err(Error::InvalidArgument("std errors given for only some entries".into()));
    }
    for (m, r, c, v, se) in entries {
        vals[m].set(r, c, v);
        errs[m].set(r, c, se.unwrap_or(0.0));
    }
    let [h, j, g] = vals;
    let std_err = (with_se > 0).then(|| {
        let [eh, ej, eg] = errs;
        InfoStdErr {
            h: eh,
            j: ej,
            g: eg,
            bias: SymMatrix::zeros(dim),
        }
    });
    Ok(InfoTriple {
        h,
        j,
        g,
        provenance: if std_err.is_some() {
            Provenance::MonteCarlo
        } else {
            Provenance::Analytic
        },
        draws: None,
        std_err,
    })
}

/// `estimator,<param>...,converged,iters`, one row per labelled estimate.
/// All estimates must share a parameter layout.
pub fn write_estimates_csv<W: Write>(rows: &[(String, EstimateResult)], out: W) -> Result<()> {
    let Some((_, first)) = rows.first() else {
        return Err(Error::InvalidArgument("no estimates to write".into()));
    };
    let names = first.theta_hat.names();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["estimator".to_string()];
    header.extend(names.iter().map(|s| s.to_string()));
    header.extend(["converged".to_string(), "iters".to_string()]);
    w.write_record(&header).map_err(csv_err)?;
    for (label, e) in rows {
        if e.theta_hat.names() != names {
            return Err(Error::InvalidArgument(format!("{label} has a different parameter layout")));
        }
        let mut rec = vec![label.clone()];
        rec.extend(e.theta_hat.values().iter().map(f64::to_string));
        rec.extend([e.converged.to_string(), e.iterations.to_string()]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    flush(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composite::{info_analytic, info_monte_carlo, CompositeSpec};
    use crate::estimators::fit;
    use crate::models::ModelSpec;

    #[test]
    fn dataset_round_trip() {
        let m = ModelSpec::emvn(4).unwrap();
        let data = m.sample(&m.params(&[0.2, 1.7]).unwrap(), 37, 5).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&data, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("rep,y1,y2,y3,y4\n0,"));
        assert_eq!(read_dataset_csv(buf.as_slice()).unwrap(), data);
        assert!(read_dataset_csv("rep,y2\n0,1\n".as_bytes()).is_err());
        assert!(read_dataset_csv("rep,y1\n0,x\n".as_bytes()).is_err());
    }

    #[test]
    fn info_round_trip() {
        let m = ModelSpec::emvn(3).unwrap();
        let t = m.params(&[0.4, 1.5]).unwrap();
        let spec = CompositeSpec::pairwise(3);
        for info in [
            info_analytic(&spec, &m, &t).unwrap(),
            info_monte_carlo(&spec, &m, &t, 2_000, 1).unwrap(),
        ] {
            let mut buf = Vec::new();
            write_info_csv(&info, &mut buf).unwrap();
            let back = read_info_csv(buf.as_slice()).unwrap();
            assert_eq!(back.h, info.h);
            assert_eq!(back.j, info.j);
            assert_eq!(back.g, info.g);
            assert_eq!(back.provenance, info.provenance);
            if let (Some(a), Some(b)) = (&back.std_err, &info.std_err) {
                assert_eq!(a.g, b.g);
            }
        }
        assert!(read_info_csv("matrix,row,col,value,std_err\nX,0,0,1,\n".as_bytes()).is_err());
    }

    #[test]
    fn estimate_rows() {
        let m = ModelSpec::emvn(3).unwrap();
        let t = m.params(&[0.4, 1.5]).unwrap();
        let data = m.sample(&t, 100, 3).unwrap();
        let rows: Vec<(String, EstimateResult)> = [CompositeSpec::pairwise(3), CompositeSpec::full(3)]
            .into_iter()
            .map(|s| (s.name().to_string(), fit(&s, &m, &data, &t).unwrap()))
            .collect();
        let mut buf = Vec::new();
        write_estimates_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "estimator,rho,sigma2,converged,iters");
        assert!(lines[1].starts_with("pairwise,") && lines[1].ends_with(",true,0"));
        assert_eq!(lines.len(), 3);
    }
}

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};

const STD_ERR_PREFIX: &str = "std_err_";

/// One named value column of a curve, with optional standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
    pub std_err: Option<Vec<f64>>,
}

/// Values on a grid of one swept parameter, all variances on the `n · avar`
/// scale. `meta` is descriptive only and is not written to CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyCurve {
    pub x_name: String,
    pub x: Vec<f64>,
    pub columns: Vec<Column>,
    pub meta: BTreeMap<String, String>,
}

impl EfficiencyCurve {
    pub fn new(x_name: &str, x: Vec<f64>) -> Self {
        Self {
            x_name: x_name.to_string(),
            x,
            columns: Vec::new(),
            meta: BTreeMap::new(),
        }
    }

    pub fn with_column(mut self, name: &str, values: Vec<f64>, std_err: Option<Vec<f64>>) -> Result<Self> {
        if self.columns.iter().any(|c| c.name == name) || name == self.x_name {
            return Err(Error::InvalidArgument(format!("duplicate column {name}")));
        }
        self.columns.push(Column {
            name: name.to_string(),
            values,
            std_err,
        });
        self.validate()?;
        Ok(self)
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Values of column `name`.
    pub fn values(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| Error::InvalidArgument(format!("no column {name}")))
    }

    /// Row index of the grid point equal to `x`.
    pub fn row_at(&self, x: f64) -> Option<usize> {
        self.x.iter().position(|&v| v == x)
    }

    /// Strictly increasing finite `x`, finite values, nonnegative std errors.
    pub fn validate(&self) -> Result<()> {
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite grid point".into()));
        }
        if self.x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("grid is not strictly increasing".into()));
        }
        for c in &self.columns {
            if c.values.len() != self.x.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.x.len(),
                    got: c.values.len(),
                });
            }
            if let Some(v) = c.values.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("column {} has value {v}", c.name)));
            }
            if let Some(se) = &c.std_err {
                if se.len() != self.x.len() {
                    return Err(Error::DimensionMismatch {
                        expected: self.x.len(),
                        got: se.len(),
                    });
                }
                if se.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::InvalidArgument(format!("bad std error in column {}", c.name)));
                }
            }
        }
        Ok(())
    }

    /// Header `x,<names>...,std_err_<name>...`; floats in shortest
    /// round-trip form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![self.x_name.clone()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        header.extend(
            self.columns
                .iter()
                .filter(|c| c.std_err.is_some())
                .map(|c| format!("{STD_ERR_PREFIX}{}", c.name)),
        );
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.x.len() {
            let mut row = vec![self.x[i].to_string()];
            row.extend(self.columns.iter().map(|c| c.values[i].to_string()));
            row.extend(
                self.columns
                    .iter()
                    .filter_map(|c| c.std_err.as_ref())
                    .map(|se| se[i].to_string()),
            );
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let Some((x_name, rest)) = header.split_first() else {
            return Err(Error::InvalidArgument("empty CSV header".into()));
        };
        let mut x = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); rest.len()];
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != header.len() {
                return Err(Error::InvalidArgument(format!(
                    "row {} has {} fields, expected {}",
                    line + 2,
                    rec.len(),
                    header.len()
                )));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("row {}: bad number {s:?}", line + 2)))
            };
            x.push(parse(&rec[0])?);
            for (j, col) in cols.iter_mut().enumerate() {
                col.push(parse(&rec[j + 1])?);
            }
        }
        let mut curve = EfficiencyCurve::new(x_name, x);
        let mut errs = Vec::new();
        for (name, values) in rest.iter().zip(cols) {
            match name.strip_prefix(STD_ERR_PREFIX) {
                Some(base) => errs.push((base.to_string(), values)),
                None => curve.columns.push(Column {
                    name: name.clone(),
                    values,
                    std_err: None,
                }),
            }
        }
        for (base, values) in errs {
            let col = curve
                .columns
                .iter_mut()
                .find(|c| c.name == base)
                .ok_or_else(|| Error::InvalidArgument(format!("std error for unknown column {base}")))?;
            col.std_err = Some(values);
        }
        curve.validate()?;
        Ok(curve)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("CSV: {e}"))
}

/// `points` equispaced values on `[lo + margin, hi − margin]`, with the
/// in-range `anchors` merged in.
pub fn grid(lo: f64, hi: f64, points: usize, margin: f64, anchors: &[f64]) -> Result<Vec<f64>> {
    let (a, b) = (lo + margin, hi - margin);
    if !(a < b) || points < 2 {
        return Err(Error::InvalidArgument(format!(
            "empty grid on [{a}, {b}] with {points} points"
        )));
    }
    let mut g: Vec<f64> = (0..points)
        .map(|i| a + (b - a) * i as f64 / (points - 1) as f64)
        .collect();
    g.extend(anchors.iter().copied().filter(|&v| v >= a && v <= b));
    g.sort_by(f64::total_cmp);
    // Drop grid points that crowd an anchor.
    let tol = 1e-9 * (b - a);
    let mut out: Vec<f64> = Vec::with_capacity(g.len());
    for v in g {
        match out.last_mut() {
            Some(last) if (v - *last).abs() <= tol => {
                if anchors.contains(&v) {
                    *last = v;
                }
            }
            _ => out.push(v),
        }
    }
    Ok(out)
}

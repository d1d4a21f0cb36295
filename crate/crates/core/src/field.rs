//! Functions of the spin variable sampled on a grid.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::format_f64;
use crate::grid::Grid;

/// A real function of t in [0,1] stored as node samples plus its value at t = 0.
///
/// Quadrature only ever reads the node values; `at_zero` is carried separately
/// because t = 0 is the normalization point and is usually not a node.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
    at_zero: f64,
}

impl Field {
    pub fn new(values: Vec<f64>, at_zero: f64) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite field value at node {i}")));
        }
        if !at_zero.is_finite() {
            return Err(Error::Numeric("non-finite field value at t = 0".into()));
        }
        Ok(Self { values, at_zero })
    }

    pub(crate) fn from_parts(values: Vec<f64>, at_zero: f64) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { values, at_zero }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_parts(vec![0.0; n], 0.0)
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::from_parts(vec![c; n], c)
    }

    /// Samples `f` at every node and at t = 0.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid.nodes().iter().map(|&t| f(t)).collect(), f(0.0))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at_zero(&self) -> f64 {
        self.at_zero
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_value_at_zero(mut self, v: f64) -> Self {
        self.at_zero = v;
        self
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_parts(self.values.iter().map(|&v| f(v)).collect(), f(self.at_zero))
    }

    /// Pointwise `a*self + b*other`.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Self {
        assert_eq!(self.len(), other.len(), "field length mismatch");
        Self::from_parts(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            a * self.at_zero + b * other.at_zero,
        )
    }

    /// Adds `c` at every node and at t = 0.
    pub fn shift(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    /// Sup over the nodes and t = 0.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .fold(self.at_zero.abs(), |m, v| m.max(v.abs()))
    }

    pub fn sup_dist(&self, other: &Field) -> f64 {
        assert_eq!(self.len(), other.len(), "field length mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .fold((self.at_zero - other.at_zero).abs(), |m, (a, b)| {
                m.max((a - b).abs())
            })
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Evaluates off-grid by monotone cubic (Fritsch-Carlson) interpolation.
    ///
    /// Knots are t = 0 (from `value_at_zero`) followed by the nodes; beyond the
    /// last knot the field is held constant.
    pub fn interpolate(&self, grid: &Grid, t: f64) -> f64 {
        let (xs, ys) = self.knots(grid);
        pchip(&xs, &ys, t)
    }

    fn knots(&self, grid: &Grid) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::with_capacity(self.len() + 1);
        let mut ys = Vec::with_capacity(self.len() + 1);
        if grid.zero_index().is_none() {
            xs.push(0.0);
            ys.push(self.at_zero);
        }
        xs.extend_from_slice(grid.nodes());
        ys.extend_from_slice(&self.values);
        (xs, ys)
    }

    /// CSV with header `t,value`; a t = 0 row leads when 0 is not a node.
    pub fn write_csv<W: Write>(&self, grid: &Grid, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["t", "value"])?;
        for (t, v) in self.rows(grid) {
            wtr.write_record([format_f64(t), format_f64(v)])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// `(t, value)` pairs in dump order.
    pub fn rows(&self, grid: &Grid) -> Vec<(f64, f64)> {
        let mut rows = Vec::with_capacity(self.len() + 1);
        if grid.zero_index().is_none() {
            rows.push((0.0, self.at_zero));
        }
        rows.extend(grid.nodes().iter().copied().zip(self.values.iter().copied()));
        rows
    }

    pub fn read_csv<R: Read>(grid: &Grid, input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            rows.push((parse_cell(&rec, 0)?, parse_cell(&rec, 1)?));
        }
        Self::from_rows(grid, &rows)
    }

    /// Rebuilds a field from `(t, value)` rows matched against the grid nodes.
    pub fn from_rows(grid: &Grid, rows: &[(f64, f64)]) -> Result<Self> {
        let mut values = vec![None; grid.len()];
        let mut at_zero = None;
        for &(t, v) in rows {
            if t == 0.0 {
                at_zero = Some(v);
            }
            match grid
                .nodes()
                .iter()
                .position(|&x| (x - t).abs() <= 1e-14 * x.abs().max(1.0))
            {
                Some(i) => values[i] = Some(v),
                None if t == 0.0 => {}
                None => {
                    return Err(Error::Config(format!(
                        "field row at t = {t} does not match any grid node"
                    )))
                }
            }
        }
        let values: Option<Vec<f64>> = values.into_iter().collect();
        let values = values.ok_or_else(|| {
            Error::Config("field dump does not cover every grid node".into())
        })?;
        let at_zero = at_zero.ok_or_else(|| Error::Config("field dump has no t = 0 row".into()))?;
        Self::new(values, at_zero)
    }
}

pub(crate) fn parse_cell(rec: &csv::StringRecord, i: usize) -> Result<f64> {
    rec.get(i)
        .ok_or_else(|| Error::Config(format!("missing column {i} in CSV row")))?
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Config(format!("bad number in CSV: {e}")))
}

/// Monotone piecewise cubic Hermite interpolation through `(xs, ys)`.
pub(crate) fn pchip(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    let n = xs.len();
    if n == 1 || t <= xs[0] {
        return ys[0];
    }
    if t >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&x| x <= t) - 1;
    if t == xs[i] {
        return ys[i];
    }
    let h = xs[i + 1] - xs[i];
    let d0 = pchip_slope(xs, ys, i);
    let d1 = pchip_slope(xs, ys, i + 1);
    let s = (t - xs[i]) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    h00 * ys[i] + h10 * h * d0 + h01 * ys[i + 1] + h11 * h * d1
}

fn pchip_slope(xs: &[f64], ys: &[f64], i: usize) -> f64 {
    let n = xs.len();
    let secant = |j: usize| (ys[j + 1] - ys[j]) / (xs[j + 1] - xs[j]);
    if i == 0 {
        return end_slope(xs[1] - xs[0], xs.get(2).map_or(0.0, |x| x - xs[1]), secant(0), if n > 2 { secant(1) } else { secant(0) });
    }
    if i == n - 1 {
        return end_slope(
            xs[n - 1] - xs[n - 2],
            if n > 2 { xs[n - 2] - xs[n - 3] } else { 0.0 },
            secant(n - 2),
            if n > 2 { secant(n - 3) } else { secant(n - 2) },
        );
    }
    let (d_prev, d_next) = (secant(i - 1), secant(i));
    if d_prev * d_next <= 0.0 {
        return 0.0;
    }
    let (h_prev, h_next) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
    let w1 = 2.0 * h_next + h_prev;
    let w2 = h_next + 2.0 * h_prev;
    (w1 + w2) / (w1 / d_prev + w2 / d_next)
}

// three-point end formula, clipped to keep monotonicity
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    if h1 == 0.0 {
        return d0;
    }
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

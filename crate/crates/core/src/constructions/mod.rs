//! Vertex-indexed solutions of
//!
//! ```text
//! h(t,x) = Σ_{y ∈ S(x)} (A h(·,y))(t)
//! ```
//!
//! and the three ways of building non-translation-invariant ones from
//! translation-invariant solutions.

mod art;
mod bg;
mod zachary;

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use art::art_lift;
pub use bg::{BgLevels, BgSetup, SensitivityReport, SensitivityRow, RATIO_FLOOR, SEED_MARGIN};
pub use zachary::{zachary_levels, ZacharyFailure, ZacharyRun};

use crate::error::{Error, Result};
use crate::field::{parse_cell, Field};
use crate::format_f64;
use crate::grid::Grid;
use crate::kernel::Kernel;
use crate::operator::apply_a;
use crate::tree::{Mode, TreeShape, VertexAddr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Art,
    Bg,
    Zachary,
    Constant,
    Manual,
}

/// One field per vertex of a depth-limited tree.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexField {
    shape: TreeShape,
    fields: Vec<Field>,
    provenance: Provenance,
}

impl VertexField {
    /// `fields` are in level order, lexicographic within a level.
    pub fn new(shape: TreeShape, fields: Vec<Field>, provenance: Provenance) -> Result<Self> {
        if fields.len() != shape.len() {
            return Err(Error::Contract(format!(
                "{} fields for a tree with {} vertices",
                fields.len(),
                shape.len()
            )));
        }
        if let Some(f) = fields.first() {
            if fields.iter().any(|g| g.len() != f.len()) {
                return Err(Error::Contract("vertex fields have different lengths".into()));
            }
        }
        if let Some(i) = fields.iter().position(|f| f.value_at_zero() != 0.0) {
            let (m, p) = shape.positions().nth(i).unwrap();
            return Err(Error::Contract(format!(
                "field at vertex `{}` does not vanish at t = 0",
                shape.addr(m, p)
            )));
        }
        Ok(Self {
            shape,
            fields,
            provenance,
        })
    }

    /// The same field at every vertex.
    ///
    /// On the full tree the root has k+1 successors, so a fixed point `h` of kA
    /// gives `(k+1)/k · h` there; the root field is set accordingly.
    pub fn translation_invariant(field: &Field, shape: TreeShape) -> Result<Self> {
        let mut fields = vec![field.clone(); shape.len()];
        if shape.mode == Mode::Full && shape.depth > 0 {
            fields[0] = field.scale((shape.k + 1) as f64 / shape.k as f64);
        }
        Self::new(shape, fields, Provenance::Constant)
    }

    /// `levels[m]` at every vertex of `W_m`.
    pub fn from_levels(levels: &[Field], shape: TreeShape, provenance: Provenance) -> Result<Self> {
        if levels.len() < shape.depth + 1 {
            return Err(Error::Contract(format!(
                "{} level fields for a tree of depth {}",
                levels.len(),
                shape.depth
            )));
        }
        let fields = shape.positions().map(|(m, _)| levels[m].clone()).collect();
        Self::new(shape, fields, provenance)
    }

    pub fn zeros(n_nodes: usize, shape: TreeShape) -> Result<Self> {
        Self::translation_invariant(&Field::zeros(n_nodes), shape)
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn k(&self) -> usize {
        self.shape.k
    }

    pub fn depth(&self) -> usize {
        self.shape.depth
    }

    pub fn mode(&self) -> Mode {
        self.shape.mode
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn n_nodes(&self) -> usize {
        self.fields[0].len()
    }

    pub fn get(&self, x: &VertexAddr) -> Option<&Field> {
        self.shape.index_of(x).map(|i| &self.fields[i])
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn at(&self, m: usize, p: usize) -> &Field {
        &self.fields[self.shape.level_offset(m) + p]
    }

    pub fn level(&self, m: usize) -> &[Field] {
        let off = self.shape.level_offset(m);
        &self.fields[off..off + self.shape.level_size(m)]
    }

    /// Restriction to `V_depth`.
    pub fn truncate(&self, depth: usize) -> Self {
        let shape = self.shape.truncate(depth);
        Self {
            shape,
            fields: self.fields[..shape.len()].to_vec(),
            provenance: self.provenance,
        }
    }

    /// Applies `f` to every vertex field (e.g. shifting the boundary layer).
    pub fn map_level(&self, m: usize, f: impl Fn(&Field) -> Field) -> Result<Self> {
        let mut fields = self.fields.clone();
        let off = self.shape.level_offset(m);
        for fld in &mut fields[off..off + self.shape.level_size(m)] {
            *fld = f(fld);
        }
        Self::new(self.shape, fields, self.provenance)
    }

    /// CSV rows `vertex,t,value` in vertex order.
    pub fn write_csv<W: Write>(&self, grid: &Grid, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["vertex", "t", "value"])?;
        for ((m, p), f) in self.shape.positions().zip(&self.fields) {
            let v = self.shape.addr(m, p).to_string();
            for (t, val) in f.rows(grid) {
                wtr.write_record([v.as_str(), &format_f64(t), &format_f64(val)])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads a dump written by [`write_csv`](Self::write_csv); depth is the
    /// deepest address present and every vertex of `V_depth` must appear.
    pub fn read_csv<R: Read>(grid: &Grid, k: usize, mode: Mode, input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut rows: std::collections::BTreeMap<VertexAddr, Vec<(f64, f64)>> = Default::default();
        for rec in rdr.records() {
            let rec = rec?;
            let addr: VertexAddr = rec.get(0).unwrap_or_default().parse()?;
            rows.entry(addr)
                .or_default()
                .push((parse_cell(&rec, 1)?, parse_cell(&rec, 2)?));
        }
        let depth = rows
            .keys()
            .map(VertexAddr::depth)
            .max()
            .ok_or_else(|| Error::Config("empty vertex field dump".into()))?;
        let shape = TreeShape::new(k, depth, mode)?;
        let mut fields = vec![None; shape.len()];
        for (addr, r) in rows {
            let i = shape.index_of(&addr).ok_or_else(|| {
                Error::Config(format!("vertex `{addr}` is not on the order-{k} {mode} tree"))
            })?;
            fields[i] = Some(Field::from_rows(grid, &r)?);
        }
        let fields: Option<Vec<Field>> = fields.into_iter().collect();
        let fields = fields.ok_or_else(|| Error::Config("vertex field dump is missing vertices".into()))?;
        Self::new(shape, fields, Provenance::Manual)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub max_res: f64,
    #[serde(serialize_with = "serialize_addr")]
    pub worst_vertex: VertexAddr,
}

fn serialize_addr<S: serde::Serializer>(a: &VertexAddr, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&a.to_string())
}

/// Largest defect `sup_t |h(·,x) - Σ_{y∈S(x)} A h(·,y)|` over non-leaf vertices.
/// Leaves are boundary data.
pub fn residual(kern: &Kernel, vf: &VertexField) -> Result<Residual> {
    let shape = vf.shape;
    if shape.depth == 0 {
        return Err(Error::Contract("residual needs a tree of depth at least 1".into()));
    }
    if vf.n_nodes() != kern.n() {
        return Err(Error::Contract("vertex field and kernel use different grids".into()));
    }
    let images: Vec<Field> = vf.fields[1..]
        .par_iter()
        .map(|f| apply_a(kern, f))
        .collect::<Result<_>>()?;
    let image = |m: usize, p: usize| &images[shape.level_offset(m) + p - 1];

    let mut max_res = 0.0;
    let mut worst = VertexAddr::root();
    for m in 0..shape.depth {
        for p in 0..shape.level_size(m) {
            let b = shape.branching(m);
            let mut sum = image(m + 1, shape.child_pos(m, p, 0)).clone();
            for c in 1..b {
                sum = sum.combine(1.0, image(m + 1, shape.child_pos(m, p, c)), 1.0);
            }
            let r = vf.at(m, p).sup_dist(&sum);
            if r > max_res {
                max_res = r;
                worst = shape.addr(m, p);
            }
        }
    }
    Ok(Residual {
        max_res,
        worst_vertex: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Rule;
    use crate::kernel::Preset;
    use crate::operator::apply_ka;
    use crate::ti_solver::find_ti_standard;

    fn grid() -> Grid {
        Grid::new(32, Rule::GaussSplit).unwrap()
    }

    #[test]
    fn zero_field_solves_zero_mean_kernels() {
        let g = grid();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        for mode in [Mode::Half, Mode::Full] {
            let vf = VertexField::zeros(g.len(), TreeShape::new(2, 4, mode).unwrap()).unwrap();
            assert!(residual(&kern, &vf).unwrap().max_res < 1e-12);
        }
    }

    #[test]
    fn zero_field_fails_for_product_kernel() {
        let g = grid();
        let kern = Kernel::from_xi(|t, u| t * u, 1.0, 1.0, &g).unwrap();
        let vf = VertexField::zeros(g.len(), TreeShape::new(2, 3, Mode::Half).unwrap()).unwrap();
        let r = residual(&kern, &vf).unwrap();
        // oracle: |2·A(0)| at the node nearest t = 1
        let t = *g.nodes().last().unwrap();
        let oracle = 2.0 * (((t.exp() - 1.0) / t) / 1.0).ln();
        assert!((r.max_res - oracle).abs() < 1e-12);
        assert!(r.max_res > 0.1);
    }

    #[test]
    fn ti_fixed_point_field_has_solver_residual() {
        let g = grid();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let fps = find_ti_standard(&kern, 2).unwrap();
        let h = fps.last().unwrap();
        let vf = VertexField::translation_invariant(h, TreeShape::new(2, 5, Mode::Half).unwrap()).unwrap();
        let r = residual(&kern, &vf).unwrap();
        let solver_res = h.sup_dist(&apply_ka(&kern, 2, h).unwrap());
        assert!(r.max_res <= solver_res + 1e-14);
    }

    #[test]
    fn residual_locates_defect() {
        let g = grid();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let shape = TreeShape::new(2, 3, Mode::Half).unwrap();
        let vf = VertexField::zeros(g.len(), shape).unwrap();
        let bump = Field::from_fn(&g, |t| t).unwrap();
        let mut fields = vf.fields().to_vec();
        fields[shape.index_of(&"1/0".parse().unwrap()).unwrap()] = bump;
        let vf = VertexField::new(shape, fields, Provenance::Manual).unwrap();
        assert_eq!(residual(&kern, &vf).unwrap().worst_vertex.to_string(), "1/0");
        assert!(residual(&kern, &vf.truncate(0)).is_err());
    }

    #[test]
    fn construction_helpers() {
        let g = grid();
        let shape = TreeShape::new(2, 0, Mode::Half).unwrap();
        let root_only = VertexField::from_levels(&[Field::zeros(g.len())], shape, Provenance::Zachary).unwrap();
        assert_eq!(root_only.fields().len(), 1);
        let levels: Vec<Field> = (0..3).map(|m| Field::from_fn(&g, |t| m as f64 * t).unwrap()).collect();
        let vf = VertexField::from_levels(&levels, TreeShape::new(3, 2, Mode::Half).unwrap(), Provenance::Zachary).unwrap();
        assert!(vf.level(2).iter().all(|f| f == &levels[2]));
        assert!(VertexField::from_levels(&levels, TreeShape::new(3, 3, Mode::Half).unwrap(), Provenance::Zachary).is_err());
        let unpinned = Field::constant(g.len(), 1.0);
        assert!(VertexField::translation_invariant(&unpinned, shape).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let g = grid();
        let levels: Vec<Field> = (0..3).map(|m| Field::from_fn(&g, |t| (m as f64 + 1.0) * t * t).unwrap()).collect();
        let vf = VertexField::from_levels(&levels, TreeShape::new(2, 2, Mode::Full).unwrap(), Provenance::Manual).unwrap();
        let mut buf = Vec::new();
        vf.write_csv(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with(",0.0"));
        assert!(text.contains("\n2/1,"));
        let back = VertexField::read_csv(&g, 2, Mode::Full, buf.as_slice()).unwrap();
        assert_eq!(back, vf);
        assert!(VertexField::read_csv(&g, 2, Mode::Half, buf.as_slice()).is_err());
    }
}

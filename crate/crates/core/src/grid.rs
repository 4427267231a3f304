//! Uniform cell-centered tensor grids (intervals and rectangles) with
//! zero-flux boundaries, and the finite-volume operators built on them.
//!
//! Cells are stored in row-major order: in 2D the cell `(i, j)` lives at
//! `i * cells[1] + j`, so the last axis varies fastest.
//!
//! All differential operators are written in flux form. Gradients live on
//! interior faces; boundary faces carry no flux, which is the same as
//! mirroring the boundary cell into a ghost cell. As a consequence every
//! discrete divergence integrates to zero up to round-off.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Smallest number of cells accepted along any axis.
pub const MIN_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    lengths: [f64; 2],
    cells: [usize; 2],
    spacing: [f64; 2],
    measure: f64,
    convex: bool,
}

impl Grid {
    pub fn new(dim: usize, lengths: &[f64], cells: &[usize]) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "unsupported dimension {dim} (only 1 and 2 are implemented)"
            )));
        }
        if lengths.len() != dim || cells.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} lengths and {dim} cell counts, got {} and {}",
                lengths.len(),
                cells.len()
            )));
        }
        let mut grid = Grid {
            dim,
            lengths: [1.0; 2],
            cells: [1; 2],
            spacing: [1.0; 2],
            measure: 1.0,
            convex: true,
        };
        for axis in 0..dim {
            let (l, n) = (lengths[axis], cells[axis]);
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "length along axis {axis} must be positive and finite, got {l}"
                )));
            }
            if n < MIN_CELLS {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} needs at least {MIN_CELLS} cells, got {n}"
                )));
            }
            grid.lengths[axis] = l;
            grid.cells[axis] = n;
            grid.spacing[axis] = l / n as f64;
        }
        grid.measure = grid.lengths[..dim].iter().product();
        Ok(grid)
    }

    pub fn interval(length: f64, cells: usize) -> Result<Self> {
        Self::new(1, &[length], &[cells])
    }

    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::new(2, &[lx, ly], &[nx, ny])
    }

    /// Overrides the convexity indicator. Rectangles are convex; this knob
    /// exists only for evaluating the structural bounds on a hypothetical
    /// non-convex domain.
    pub fn with_convex_flag(mut self, convex: bool) -> Self {
        self.convex = convex;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    /// Largest spacing over all axes.
    pub fn max_spacing(&self) -> f64 {
        self.spacing().iter().cloned().fold(0.0, f64::max)
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stride of `axis` in the flat row-major layout.
    fn stride(&self, axis: usize) -> usize {
        if axis == 0 {
            self.cells[1]
        } else {
            1
        }
    }

    /// Per-axis cell index of flat index `idx`.
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        [idx / self.cells[1], idx % self.cells[1]]
    }

    /// Cell center coordinates; the unused second coordinate is 0 in 1D.
    pub fn cell_center(&self, idx: usize) -> [f64; 2] {
        let ij = self.unflatten(idx);
        let mut x = [0.0; 2];
        for axis in 0..self.dim {
            x[axis] = (ij[axis] as f64 + 0.5) * self.spacing[axis];
        }
        x
    }

    /// Number of interior faces normal to `axis`.
    pub fn face_count(&self, axis: usize) -> usize {
        if axis >= self.dim {
            return 0;
        }
        match axis {
            0 => (self.cells[0] - 1) * self.cells[1],
            _ => self.cells[0] * (self.cells[1] - 1),
        }
    }

    /// Flat index of the interior face between cell `idx` and its upper
    /// neighbour along `axis`. Only valid when that neighbour exists.
    fn face_index(&self, axis: usize, idx: usize) -> usize {
        let [i, j] = self.unflatten(idx);
        match axis {
            0 => i * self.cells[1] + j,
            _ => i * (self.cells[1] - 1) + j,
        }
    }

    /// The two cells adjacent to interior face `face` of `axis`, lower first.
    pub fn face_cells(&self, axis: usize, face: usize) -> (usize, usize) {
        match axis {
            0 => (face, face + self.cells[1]),
            _ => {
                let n1 = self.cells[1] - 1;
                let (i, j) = (face / n1, face % n1);
                let lo = i * self.cells[1] + j;
                (lo, lo + 1)
            }
        }
    }

    /// Coordinates of the center of interior face `face` of `axis`.
    pub fn face_center(&self, axis: usize, face: usize) -> [f64; 2] {
        let (lo, _) = self.face_cells(axis, face);
        let mut x = self.cell_center(lo);
        x[axis] += 0.5 * self.spacing[axis];
        x
    }

    fn has_upper(&self, axis: usize, ij: [usize; 2]) -> bool {
        ij[axis] + 1 < self.cells[axis]
    }
}

/// One scalar per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field needs {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field {
            values: vec![c; grid.len()],
            grid,
        }
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.cell_center(i))).collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Midpoint quadrature of the field over the domain.
    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.integrate() / self.grid.measure()
    }

    /// `(∫|f|^p)^(1/p)`; pass `f64::INFINITY` for the max norm.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "Lp norm needs p >= 1 or p = inf, got {p}"
            )));
        }
        if p.is_infinite() {
            return Ok(self.values.iter().fold(0.0, |m, v| m.max(v.abs())));
        }
        let vol = self.grid.cell_volume();
        let s: f64 = if p == 1.0 {
            self.values.iter().map(|v| v.abs()).sum()
        } else if p == 2.0 {
            self.values.iter().map(|v| v * v).sum()
        } else {
            self.values.iter().map(|v| v.abs().powf(p)).sum()
        };
        Ok((s * vol).powf(1.0 / p))
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l2(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    /// `‖f − c‖_{L²}` for a constant `c`.
    pub fn l2_dist_to(&self, c: f64) -> f64 {
        let s: f64 = self.values.iter().map(|v| (v - c) * (v - c)).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    pub fn l1_dist_to(&self, c: f64) -> f64 {
        self.values.iter().map(|v| (v - c).abs()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn linf_dist_to(&self, c: f64) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max((v - c).abs()))
    }

    /// `∫ f g` by midpoint quadrature.
    pub fn inner(&self, other: &Field) -> f64 {
        dot(&self.values, &other.values) * self.grid.cell_volume()
    }
}

/// Face-normal values on the interior faces of a grid, one array per axis.
/// Boundary faces are not stored; their flux is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFlux {
    grid: Grid,
    faces: [Vec<f64>; 2],
}

impl FaceFlux {
    pub fn zeros(grid: Grid) -> Self {
        FaceFlux {
            faces: [vec![0.0; grid.face_count(0)], vec![0.0; grid.face_count(1)]],
            grid,
        }
    }

    pub fn new(grid: Grid, faces: [Vec<f64>; 2]) -> Result<Self> {
        for axis in 0..2 {
            if faces[axis].len() != grid.face_count(axis) {
                return Err(Error::InvalidArgument(format!(
                    "axis {axis} needs {} face values, got {}",
                    grid.face_count(axis),
                    faces[axis].len()
                )));
            }
        }
        Ok(FaceFlux { grid, faces })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn axis(&self, axis: usize) -> &[f64] {
        &self.faces[axis]
    }

    pub fn axis_mut(&mut self, axis: usize) -> &mut [f64] {
        &mut self.faces[axis]
    }

    /// Largest absolute face value over every axis.
    pub fn max_abs(&self) -> f64 {
        self.faces
            .iter()
            .flat_map(|f| f.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(Σ_faces g² · cellvol)^(1/2)`, the discrete `‖∇f‖_{L²}` when the
    /// flux holds face gradients. Equals `⟨−Δf, f⟩^(1/2)`.
    pub fn l2(&self) -> f64 {
        let s: f64 = self.faces.iter().flat_map(|f| f.iter()).map(|g| g * g).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    /// Per-cell gradient magnitude bound: for each axis the larger of the
    /// two adjacent face values, combined in quadrature. In 1D this is the
    /// largest adjacent face value.
    pub fn cell_magnitude_max(&self) -> f64 {
        let g = &self.grid;
        let mut best: f64 = 0.0;
        for idx in 0..g.len() {
            let ij = g.unflatten(idx);
            let mut sq = 0.0;
            for axis in 0..g.dim() {
                let mut m: f64 = 0.0;
                if ij[axis] > 0 {
                    let lower = idx - g.stride(axis);
                    m = m.max(self.faces[axis][g.face_index(axis, lower)].abs());
                }
                if g.has_upper(axis, ij) {
                    m = m.max(self.faces[axis][g.face_index(axis, idx)].abs());
                }
                sq += m * m;
            }
            best = best.max(sq.sqrt());
        }
        best
    }
}

/// Centered two-point difference on every interior face.
pub fn gradient_faces(f: &Field) -> FaceFlux {
    let g = f.grid;
    let mut out = FaceFlux::zeros(g);
    gradient_into(&g, &f.values, &mut out.faces);
    out
}

pub(crate) fn gradient_into(g: &Grid, f: &[f64], faces: &mut [Vec<f64>; 2]) {
    for axis in 0..g.dim() {
        let h = g.spacing[axis];
        let s = g.stride(axis);
        for (face, out) in faces[axis].iter_mut().enumerate() {
            let (lo, _) = g.face_cells(axis, face);
            *out = (f[lo + s] - f[lo]) / h;
        }
    }
}

/// Net outflux per cell divided by cell volume, i.e. the discrete `∇·F`.
pub fn divergence(flux: &FaceFlux) -> Field {
    let g = flux.grid;
    let mut out = vec![0.0; g.len()];
    divergence_into(&g, &flux.faces, &mut out);
    Field {
        grid: g,
        values: out,
    }
}

pub(crate) fn divergence_into(g: &Grid, faces: &[Vec<f64>; 2], out: &mut [f64]) {
    for (idx, o) in out.iter_mut().enumerate() {
        let ij = g.unflatten(idx);
        let mut acc = 0.0;
        for axis in 0..g.dim() {
            let h = g.spacing[axis];
            let lower = if ij[axis] > 0 {
                faces[axis][g.face_index(axis, idx - g.stride(axis))]
            } else {
                0.0
            };
            let upper = if g.has_upper(axis, ij) {
                faces[axis][g.face_index(axis, idx)]
            } else {
                0.0
            };
            acc += (upper - lower) / h;
        }
        *o = acc;
    }
}

/// Discrete Neumann Laplacian. Bitwise equal to
/// `divergence(&gradient_faces(f))`.
pub fn laplacian(f: &Field) -> Field {
    let mut out = vec![0.0; f.values.len()];
    apply_laplacian(&f.grid, &f.values, &mut out);
    Field {
        grid: f.grid,
        values: out,
    }
}

/// Allocation-free Laplacian on raw cell values.
pub fn apply_laplacian(g: &Grid, f: &[f64], out: &mut [f64]) {
    for (idx, o) in out.iter_mut().enumerate() {
        let ij = g.unflatten(idx);
        let mut acc = 0.0;
        for axis in 0..g.dim() {
            let h = g.spacing[axis];
            let s = g.stride(axis);
            let lower = if ij[axis] > 0 {
                (f[idx] - f[idx - s]) / h
            } else {
                0.0
            };
            let upper = if g.has_upper(axis, ij) {
                (f[idx + s] - f[idx]) / h
            } else {
                0.0
            };
            acc += (upper - lower) / h;
        }
        *o = acc;
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",")
}

/// Writes a field as CSV: a `# grid ...` header, then `index,x[,y],value`.
pub fn write_field_csv<W: Write>(f: &Field, mut w: W) -> Result<()> {
    let g = f.grid();
    let cells: Vec<String> = g.cells().iter().map(|c| c.to_string()).collect();
    writeln!(
        w,
        "# grid dim={} lengths={} cells={}",
        g.dim(),
        join_f64(g.lengths()),
        cells.join(",")
    )?;
    for (idx, v) in f.values().iter().enumerate() {
        let x = g.cell_center(idx);
        if g.dim() == 1 {
            writeln!(w, "{idx},{},{}", fmt_f64(x[0]), fmt_f64(*v))?;
        } else {
            writeln!(w, "{idx},{},{},{}", fmt_f64(x[0]), fmt_f64(x[1]), fmt_f64(*v))?;
        }
    }
    Ok(())
}

/// Reads a field written by [`write_field_csv`].
pub fn read_field_csv<R: BufRead>(r: R) -> Result<Field> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty field file".into()))??;
    let rest = header
        .strip_prefix("# grid ")
        .ok_or_else(|| Error::Parse(format!("bad header: {header}")))?;
    let (mut dim, mut lengths, mut cells) = (None, None, None);
    for tok in rest.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header token: {tok}")))?;
        let bad = |_| Error::Parse(format!("bad header value: {tok}"));
        match k {
            "dim" => dim = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "lengths" => {
                lengths = Some(
                    v.split(',')
                        .map(|s| s.parse::<f64>().map_err(|e| bad(e.to_string())))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            "cells" => {
                cells = Some(
                    v.split(',')
                        .map(|s| s.parse::<usize>().map_err(|e| bad(e.to_string())))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            _ => return Err(Error::Parse(format!("unknown header key: {k}"))),
        }
    }
    let missing = |k: &str| Error::Parse(format!("header missing {k}"));
    let grid = Grid::new(
        dim.ok_or_else(|| missing("dim"))?,
        &lengths.ok_or_else(|| missing("lengths"))?,
        &cells.ok_or_else(|| missing("cells"))?,
    )?;
    let mut values = vec![f64::NAN; grid.len()];
    let mut seen = 0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != grid.dim() + 2 {
            return Err(Error::Parse(format!("bad row: {line}")));
        }
        let idx: usize = cols[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad index in row: {line}")))?;
        if idx >= values.len() {
            return Err(Error::Parse(format!("index {idx} out of range")));
        }
        values[idx] = cols[cols.len() - 1]
            .parse()
            .map_err(|_| Error::Parse(format!("bad value in row: {line}")))?;
        seen += 1;
    }
    if seen != grid.len() {
        return Err(Error::Parse(format!(
            "expected {} rows, found {seen}",
            grid.len()
        )));
    }
    Field::new(grid, values)
}

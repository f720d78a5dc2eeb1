//! Grids of per-patch kernels and their binary file format.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! "DPPG"            4 bytes magic
//! version    u16    currently 1
//! grid_rows  u16
//! grid_cols  u16
//! radius     u16
//! view       u8     0 = left, 1 = right, 2 = combined
//! taps       f32 LE, cell-major (row-major over cells), each cell row-major
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::psf::{make_dp_psf_pair, PsfKernel};
use crate::error::{io_err, Error, Result};

const MAGIC: &[u8; 4] = b"DPPG";
const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Left,
    Right,
    Combined,
}

impl View {
    fn tag(self) -> u8 {
        match self {
            View::Left => 0,
            View::Right => 1,
            View::Combined => 2,
        }
    }

    fn from_tag(t: u8) -> Result<View> {
        match t {
            0 => Ok(View::Left),
            1 => Ok(View::Right),
            2 => Ok(View::Combined),
            _ => Err(Error::MalformedPsfGrid(format!("unknown view tag {t}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
}

impl GridShape {
    pub const fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }
}

impl Default for GridShape {
    /// 6 rows x 8 columns: 256x252 cells on a 2016x1536 frame.
    fn default() -> Self {
        Self { rows: 6, cols: 8 }
    }
}

/// Spatially varying PSF: one kernel per grid cell, all of equal radius.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfGrid {
    shape: GridShape,
    view: View,
    kernels: Vec<PsfKernel>,
}

impl PsfGrid {
    /// Builds a grid; kernels of smaller radius are zero-padded to the
    /// largest one.
    pub fn new(shape: GridShape, view: View, kernels: Vec<PsfKernel>) -> Result<Self> {
        if shape.rows == 0 || shape.cols == 0 {
            return Err(Error::Dimensions("psf grid needs at least one cell".into()));
        }
        if kernels.len() != shape.rows * shape.cols {
            return Err(Error::Dimensions(format!(
                "{}x{} grid needs {} kernels, got {}",
                shape.rows,
                shape.cols,
                shape.rows * shape.cols,
                kernels.len()
            )));
        }
        let r = kernels.iter().map(PsfKernel::radius).max().unwrap_or(0);
        let kernels = kernels.into_iter().map(|k| k.padded(r)).collect();
        Ok(Self { shape, view, kernels })
    }

    pub fn uniform(shape: GridShape, view: View, kernel: PsfKernel) -> Result<Self> {
        Self::new(shape, view, vec![kernel; shape.rows * shape.cols])
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn view(&self) -> View {
        self.view
    }

    pub fn radius(&self) -> usize {
        self.kernels[0].radius()
    }

    pub fn kernels(&self) -> &[PsfKernel] {
        &self.kernels
    }

    pub fn kernel(&self, row: usize, col: usize) -> &PsfKernel {
        &self.kernels[row * self.shape.cols + col]
    }

    /// Cell-wise mean of two grids of equal shape.
    pub fn average(a: &PsfGrid, b: &PsfGrid, view: View) -> Result<PsfGrid> {
        if a.shape != b.shape {
            return Err(Error::Dimensions("cannot average grids of different shape".into()));
        }
        let kernels = a.kernels.iter().zip(&b.kernels).map(|(p, q)| PsfKernel::average(p, q)).collect();
        PsfGrid::new(a.shape, view, kernels)
    }

    /// Swaps the roles of x and y in every kernel and in the cell layout.
    pub fn transposed(&self) -> PsfGrid {
        let GridShape { rows, cols } = self.shape;
        let mut kernels = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                let k = self.kernel(r, c);
                let rad = k.radius() as i64;
                let side = k.side();
                let mut taps = vec![0.0; side * side];
                for y in -rad..=rad {
                    for x in -rad..=rad {
                        taps[((y + rad) * side as i64 + (x + rad)) as usize] = k.at(y, x);
                    }
                }
                kernels.push(PsfKernel::new(k.radius(), taps).expect("transpose keeps normalization"));
            }
        }
        PsfGrid { shape: GridShape::new(cols, rows), view: self.view, kernels }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let narrow = |v: usize, what: &str| {
            u16::try_from(v).map_err(|_| Error::MalformedPsfGrid(format!("{what} {v} exceeds u16")))
        };
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&narrow(self.shape.rows, "grid_rows")?.to_le_bytes());
        out.extend_from_slice(&narrow(self.shape.cols, "grid_cols")?.to_le_bytes());
        out.extend_from_slice(&narrow(self.radius(), "radius")?.to_le_bytes());
        out.push(self.view.tag());
        for k in &self.kernels {
            for t in k.taps() {
                out.extend_from_slice(&t.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<PsfGrid> {
        const HEADER: usize = 4 + 2 * 4 + 1;
        if bytes.len() < HEADER || &bytes[..4] != MAGIC {
            return Err(Error::MalformedPsfGrid("missing DPPG header".into()));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]) as usize;
        let version = u16_at(4);
        if version != VERSION as usize {
            return Err(Error::MalformedPsfGrid(format!("unsupported version {version}")));
        }
        let shape = GridShape::new(u16_at(6), u16_at(8));
        let radius = u16_at(10);
        let view = View::from_tag(bytes[12])?;
        let side = 2 * radius + 1;
        let per_cell = side * side;
        let expected = HEADER + shape.rows * shape.cols * per_cell * 4;
        if bytes.len() != expected {
            return Err(Error::MalformedPsfGrid(format!(
                "payload is {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let taps: Vec<f32> = bytes[HEADER..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let kernels = taps
            .chunks_exact(per_cell)
            .map(|c| PsfKernel::new(radius, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        PsfGrid::new(shape, view, kernels)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<PsfGrid> {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        Self::from_bytes(&bytes)
    }
}

/// Rescales every kernel of `grid` by `alpha` and renormalizes.
pub fn scale_psf_grid(grid: &PsfGrid, alpha: f64) -> Result<PsfGrid> {
    let kernels = grid.kernels.iter().map(|k| k.scaled(alpha)).collect::<Result<Vec<_>>>()?;
    PsfGrid::new(grid.shape, grid.view, kernels)
}

/// The three view grids used for one blur level.
#[derive(Debug, Clone, PartialEq)]
pub struct DpGrids {
    pub left: PsfGrid,
    pub right: PsfGrid,
    pub combined: PsfGrid,
}

impl DpGrids {
    /// From calibrated left/right grids: the combined grid is their mean,
    /// and all three are rescaled by `alpha`.
    pub fn from_calibrated(left: &PsfGrid, right: &PsfGrid, alpha: f64) -> Result<DpGrids> {
        let combined = PsfGrid::average(left, right, View::Combined)?;
        Ok(DpGrids {
            left: scale_psf_grid(left, alpha)?,
            right: scale_psf_grid(right, alpha)?,
            combined: scale_psf_grid(&combined, alpha)?,
        })
    }

    pub fn transposed(&self) -> DpGrids {
        DpGrids {
            left: self.left.transposed(),
            right: self.right.transposed(),
            combined: self.combined.transposed(),
        }
    }
}

/// Parametric spatially varying PSF model.
///
/// The blur scale of each cell is `alpha * (1 - variation * rho^2)`, where
/// `rho` is the normalized distance of the cell center from the frame center
/// (1 at the corners), mimicking the radial falloff of defocus blur across
/// a real sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParametricPsf {
    pub variation: f64,
}

impl Default for ParametricPsf {
    fn default() -> Self {
        Self { variation: 0.1 }
    }
}

impl ParametricPsf {
    pub fn cell_alpha(&self, alpha: f64, shape: GridShape, row: usize, col: usize) -> f64 {
        let u = 2.0 * (col as f64 + 0.5) / shape.cols as f64 - 1.0;
        let v = 2.0 * (row as f64 + 0.5) / shape.rows as f64 - 1.0;
        let rho2 = 0.5 * (u * u + v * v);
        alpha * (1.0 - self.variation * rho2)
    }

    pub fn grids(&self, alpha: f64, shape: GridShape) -> Result<DpGrids> {
        if !(0.0..1.0).contains(&self.variation) {
            return Err(Error::InvalidArgument(format!(
                "psf variation must be in [0,1), got {}",
                self.variation
            )));
        }
        let (mut l, mut r, mut c) = (Vec::new(), Vec::new(), Vec::new());
        for row in 0..shape.rows {
            for col in 0..shape.cols {
                let pair = make_dp_psf_pair(self.cell_alpha(alpha, shape, row, col))?;
                l.push(pair.left);
                r.push(pair.right);
                c.push(pair.combined);
            }
        }
        Ok(DpGrids {
            left: PsfGrid::new(shape, View::Left, l)?,
            right: PsfGrid::new(shape, View::Right, r)?,
            combined: PsfGrid::new(shape, View::Combined, c)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_round_trip() {
        let g = ParametricPsf::default().grids(3.0, GridShape::new(2, 3)).unwrap().left;
        let bytes = g.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"DPPG");
        assert_eq!(bytes[12], 0);
        let back = PsfGrid::from_bytes(&bytes).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn malformed_files_rejected() {
        let g = PsfGrid::uniform(GridShape::new(1, 1), View::Right, PsfKernel::delta()).unwrap();
        let bytes = g.to_bytes().unwrap();
        assert!(PsfGrid::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(PsfGrid::from_bytes(&bad).is_err());
        let mut bad = bytes.clone();
        bad[12] = 9;
        assert!(PsfGrid::from_bytes(&bad).is_err());
        let mut bad = bytes;
        let n = bad.len();
        bad[n - 4..].copy_from_slice(&0.5f32.to_le_bytes());
        assert!(PsfGrid::from_bytes(&bad).is_err(), "unnormalized kernel must be rejected");
    }

    #[test]
    fn parametric_cells_share_radius_and_shrink_outward() {
        let model = ParametricPsf::default();
        let shape = GridShape::new(6, 8);
        let g = model.grids(6.0, shape).unwrap();
        let r = g.left.radius();
        assert!(g.left.kernels().iter().all(|k| k.radius() == r));
        let center = model.cell_alpha(6.0, shape, 2, 3);
        let corner = model.cell_alpha(6.0, shape, 0, 0);
        assert!(corner < center && center <= 6.0);
    }

    #[test]
    fn calibrated_scaling_identity() {
        let pair = ParametricPsf::default().grids(2.0, GridShape::new(2, 2)).unwrap();
        let s = DpGrids::from_calibrated(&pair.left, &pair.right, 1.0).unwrap();
        for (a, b) in s.combined.kernels().iter().zip(pair.combined.kernels()) {
            for (x, y) in a.taps().iter().zip(b.taps()) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }
}

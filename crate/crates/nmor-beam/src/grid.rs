//! Object-plane pixel grids and dense 2-D maps.
//!
//! Grids are centered on (y, z) = (0, 0); row index runs along y, column
//! index along z, data stored row-major.

/// Pixel layout of an object-plane grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub ny: usize,
    pub nz: usize,
    /// Object-plane pixel size along y (m).
    pub step_y: f64,
    /// Object-plane pixel size along z (m).
    pub step_z: f64,
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, iy: usize, iz: usize) -> usize {
        iy * self.nz + iz
    }

    /// y coordinate (m) of row `iy`.
    #[inline]
    pub fn y(&self, iy: usize) -> f64 {
        (iy as f64 - 0.5 * (self.ny as f64 - 1.0)) * self.step_y
    }

    /// z coordinate (m) of column `iz`.
    #[inline]
    pub fn z(&self, iz: usize) -> f64 {
        (iz as f64 - 0.5 * (self.nz as f64 - 1.0)) * self.step_z
    }

    pub fn span_y(&self) -> f64 {
        self.ny as f64 * self.step_y
    }

    pub fn span_z(&self) -> f64 {
        self.nz as f64 * self.step_z
    }
}

/// Dense scalar field over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    pub grid: GridSpec,
    pub data: Vec<f64>,
}

impl ScalarMap {
    pub fn zeros(grid: GridSpec) -> Self {
        ScalarMap {
            grid,
            data: vec![0.0; grid.len()],
        }
    }

    /// Build a map by evaluating `f(y, z)` at every pixel center.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for iy in 0..grid.ny {
            let y = grid.y(iy);
            for iz in 0..grid.nz {
                data.push(f(y, grid.z(iz)));
            }
        }
        ScalarMap { grid, data }
    }

    #[inline]
    pub fn at(&self, iy: usize, iz: usize) -> f64 {
        self.data[self.grid.idx(iy, iz)]
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Scalar field with a per-pixel validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMap {
    pub grid: GridSpec,
    pub data: Vec<f64>,
    pub mask: Vec<bool>,
}

impl MaskedMap {
    pub fn zeros(grid: GridSpec) -> Self {
        MaskedMap {
            grid,
            data: vec![0.0; grid.len()],
            mask: vec![false; grid.len()],
        }
    }

    #[inline]
    pub fn at(&self, iy: usize, iz: usize) -> f64 {
        self.data[self.grid.idx(iy, iz)]
    }

    #[inline]
    pub fn valid(&self, iy: usize, iz: usize) -> bool {
        self.mask[self.grid.idx(iy, iz)]
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Iterate `(iy, iz, value)` over valid pixels in row-major order.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let nz = self.grid.nz;
        self.data
            .iter()
            .zip(self.mask.iter())
            .enumerate()
            .filter_map(move |(i, (&v, &m))| m.then_some((i / nz, i % nz, v)))
    }

    /// Mean of valid values in each row; `None` for rows with no valid pixel.
    pub fn row_means(&self) -> Vec<Option<f64>> {
        let mut out = Vec::with_capacity(self.grid.ny);
        for iy in 0..self.grid.ny {
            let mut sum = 0.0;
            let mut n = 0usize;
            for iz in 0..self.grid.nz {
                if self.valid(iy, iz) {
                    sum += self.at(iy, iz);
                    n += 1;
                }
            }
            out.push((n > 0).then(|| sum / n as f64));
        }
        out
    }
}

/// Default relative intensity threshold below which pixels are masked out.
pub const DEFAULT_MASK_THRESHOLD: f64 = 0.05;

//! Voxel grids, brain masks and the masked-vector representation of maps.
//!
//! Every per-voxel quantity downstream of I/O is a flat vector of length `m`
//! indexed by *masked* voxel index. The grid linear index uses x-fastest order:
//! `ix + nx * (iy + ny * iz)`.

use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid3 {
    pub dims: [usize; 3],
    /// Millimetres per voxel along each axis.
    pub voxel_size: [f32; 3],
    /// Voxel index to world (mm) coordinates, row-major.
    pub affine: [[f64; 4]; 4],
}

impl Grid3 {
    pub fn new(dims: [usize; 3], voxel_size: [f32; 3], affine: [[f64; 4]; 4]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::param(format!("grid dimensions must be positive, got {dims:?}")));
        }
        if voxel_size.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::param(format!("voxel sizes must be positive, got {voxel_size:?}")));
        }
        if affine[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::param("affine last row must be (0, 0, 0, 1)"));
        }
        if affine.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data("affine contains non-finite entries".into()));
        }
        Ok(Self { dims, voxel_size, affine })
    }

    /// Axis-aligned grid whose affine scales by the voxel size and translates by `origin`.
    pub fn scaled(dims: [usize; 3], voxel_size: [f32; 3], origin: [f64; 3]) -> Result<Self> {
        let mut affine = [[0.0; 4]; 4];
        for axis in 0..3 {
            affine[axis][axis] = f64::from(voxel_size[axis]);
            affine[axis][3] = origin[axis];
        }
        affine[3][3] = 1.0;
        Self::new(dims, voxel_size, affine)
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Voxel volume in mm³.
    pub fn voxel_volume(&self) -> f64 {
        self.voxel_size.iter().map(|&v| f64::from(v)).product()
    }

    pub fn linear_index(&self, [ix, iy, iz]: [usize; 3]) -> usize {
        ix + self.dims[0] * (iy + self.dims[1] * iz)
    }

    pub fn coords(&self, linear: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [linear % nx, (linear / nx) % ny, linear / (nx * ny)]
    }

    pub fn index_to_world(&self, ijk: [f64; 3]) -> [f64; 3] {
        let a = &self.affine;
        let mut out = [0.0; 3];
        for (r, o) in out.iter_mut().enumerate() {
            *o = a[r][0] * ijk[0] + a[r][1] * ijk[1] + a[r][2] * ijk[2] + a[r][3];
        }
        out
    }

    /// Continuous voxel coordinates of a world position (inverse affine).
    pub fn world_to_index(&self, xyz: [f64; 3]) -> Result<[f64; 3]> {
        let a = &self.affine;
        let m = [
            [a[0][0], a[0][1], a[0][2]],
            [a[1][0], a[1][1], a[1][2]],
            [a[2][0], a[2][1], a[2][2]],
        ];
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        if det.abs() < f64::MIN_POSITIVE {
            return Err(Error::param("affine is singular"));
        }
        let b = [xyz[0] - a[0][3], xyz[1] - a[1][3], xyz[2] - a[2][3]];
        // Cramer's rule on the 3x3 linear part.
        let solve = |col: usize| {
            let mut mm = m;
            for r in 0..3 {
                mm[r][col] = b[r];
            }
            (mm[0][0] * (mm[1][1] * mm[2][2] - mm[1][2] * mm[2][1])
                - mm[0][1] * (mm[1][0] * mm[2][2] - mm[1][2] * mm[2][0])
                + mm[0][2] * (mm[1][0] * mm[2][1] - mm[1][1] * mm[2][0]))
                / det
        };
        Ok([solve(0), solve(1), solve(2)])
    }
}

const OUTSIDE: u32 = u32::MAX;

/// In-brain voxel set over a grid, with the masked <-> linear index tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    grid: Grid3,
    inside: Vec<bool>,
    /// Linear grid index of each masked voxel, ascending.
    voxels: Vec<usize>,
    /// Masked index of each grid voxel, `OUTSIDE` when not in the mask.
    lookup: Vec<u32>,
}

impl Mask {
    pub fn new(grid: Grid3, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != grid.len() {
            return Err(Error::Mask(format!(
                "mask has {} entries but the grid has {} voxels",
                inside.len(),
                grid.len()
            )));
        }
        if grid.len() >= OUTSIDE as usize {
            return Err(Error::Mask("grid too large for 32-bit voxel indices".into()));
        }
        let mut voxels = Vec::new();
        let mut lookup = vec![OUTSIDE; inside.len()];
        for (linear, _) in inside.iter().enumerate().filter(|(_, &keep)| keep) {
            lookup[linear] = voxels.len() as u32;
            voxels.push(linear);
        }
        if voxels.is_empty() {
            return Err(Error::Mask("mask selects no voxels".into()));
        }
        Ok(Self { grid, inside, voxels, lookup })
    }

    pub fn full(grid: Grid3) -> Self {
        let n = grid.len();
        Self::new(grid, vec![true; n]).expect("a full mask over a non-empty grid is valid")
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    /// Number of in-mask voxels.
    pub fn m(&self) -> usize {
        self.voxels.len()
    }

    pub fn linear_of(&self, masked: usize) -> Result<usize> {
        self.voxels
            .get(masked)
            .copied()
            .ok_or(Error::Index { index: masked, len: self.m() })
    }

    pub fn masked_of(&self, linear: usize) -> Option<usize> {
        match self.lookup.get(linear) {
            Some(&v) if v != OUTSIDE => Some(v as usize),
            _ => None,
        }
    }

    pub fn coords_of(&self, masked: usize) -> Result<[usize; 3]> {
        Ok(self.grid.coords(self.linear_of(masked)?))
    }

    /// Scatters a masked vector into a full grid, filling outside voxels.
    pub fn unflatten<T: Copy>(&self, values: &[T], fill: T) -> Vec<T> {
        let mut out = vec![fill; self.grid.len()];
        for (&linear, &v) in self.voxels.iter().zip(values) {
            out[linear] = v;
        }
        out
    }

    pub fn flatten<T: Copy>(&self, volume: &[T]) -> Vec<T> {
        self.voxels.iter().map(|&linear| volume[linear]).collect()
    }
}

/// World coordinates (mm) of a masked voxel.
pub fn voxel_to_world(mask: &Mask, masked_index: usize) -> Result<[f64; 3]> {
    let [i, j, k] = mask.coords_of(masked_index)?;
    Ok(mask.grid().index_to_world([i as f64, j as f64, k as f64]))
}

/// Masked per-subject maps: `n_subjects` rows of `m` values.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectStack {
    mask: Arc<Mask>,
    n_subjects: usize,
    data: Vec<f32>,
}

impl SubjectStack {
    pub fn new(mask: Arc<Mask>, n_subjects: usize, data: Vec<f32>) -> Result<Self> {
        if n_subjects == 0 {
            return Err(Error::param("a subject stack needs at least one subject"));
        }
        if data.len() != n_subjects * mask.m() {
            return Err(Error::Data(format!(
                "expected {} values ({} subjects x {} voxels), got {}",
                n_subjects * mask.m(),
                n_subjects,
                mask.m(),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value at subject {}, voxel {}",
                pos / mask.m(),
                pos % mask.m()
            )));
        }
        Ok(Self { mask, n_subjects, data })
    }

    pub fn mask(&self) -> &Arc<Mask> {
        &self.mask
    }

    pub fn grid(&self) -> &Grid3 {
        self.mask.grid()
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn m(&self) -> usize {
        self.mask.m()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn subject(&self, s: usize) -> &[f32] {
        let m = self.m();
        &self.data[s * m..(s + 1) * m]
    }
}

/// Per-voxel Z scores over a mask.
#[derive(Debug, Clone, PartialEq)]
pub struct StatMap {
    mask: Arc<Mask>,
    z: Vec<f64>,
}

impl StatMap {
    pub fn new(mask: Arc<Mask>, z: Vec<f64>) -> Result<Self> {
        if z.len() != mask.m() {
            return Err(Error::Data(format!("stat map has {} values for {} voxels", z.len(), mask.m())));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("stat map contains non-finite values".into()));
        }
        Ok(Self { mask, z })
    }

    pub fn mask(&self) -> &Arc<Mask> {
        &self.mask
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn m(&self) -> usize {
        self.z.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PValueVector {
    mask: Arc<Mask>,
    p: Vec<f64>,
}

impl PValueVector {
    pub fn new(mask: Arc<Mask>, p: Vec<f64>) -> Result<Self> {
        if p.len() != mask.m() {
            return Err(Error::Data(format!("p-value vector has {} values for {} voxels", p.len(), mask.m())));
        }
        if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("p-value {bad} outside [0, 1]")));
        }
        Ok(Self { mask, p })
    }

    /// p-values not tied to an image, over a trivial 1-D grid of length `p.len()`.
    pub fn from_values(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Mask("empty p-value vector".into()));
        }
        let grid = Grid3::scaled([p.len(), 1, 1], [1.0; 3], [0.0; 3])?;
        Self::new(Arc::new(Mask::full(grid)), p)
    }

    pub fn mask(&self) -> &Arc<Mask> {
        &self.mask
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn m(&self) -> usize {
        self.p.len()
    }

    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.p.clone();
        v.sort_unstable_by(f64::total_cmp);
        v
    }

    pub fn gather(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().map(|&i| self.p[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_grid(dims: [usize; 3]) -> Grid3 {
        Grid3::scaled(dims, [1.0; 3], [0.0; 3]).unwrap()
    }

    #[test]
    fn identity_affine_origin() {
        let mask = Mask::full(identity_grid([2, 2, 2]));
        assert_eq!(voxel_to_world(&mask, 0).unwrap(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn mni_style_affine() {
        let grid = Grid3::scaled([40, 40, 40], [3.0; 3], [-90.0, -126.0, -72.0]).unwrap();
        let mask = Mask::full(grid);
        let masked = mask.masked_of(mask.grid().linear_index([19, 1, 1])).unwrap();
        assert_eq!(voxel_to_world(&mask, masked).unwrap(), [-33.0, -123.0, -69.0]);
    }

    #[test]
    fn out_of_range_index() {
        let mask = Mask::full(identity_grid([2, 1, 1]));
        assert!(matches!(voxel_to_world(&mask, 2), Err(Error::Index { index: 2, len: 2 })));
    }

    #[test]
    fn world_round_trip_on_random_voxels() {
        use rand::{Rng, SeedableRng};
        let mut affine = [[0.0; 4]; 4];
        affine[0] = [2.5, 0.1, 0.0, -80.0];
        affine[1] = [-0.2, 3.0, 0.3, -110.0];
        affine[2] = [0.0, 0.4, 3.5, -60.0];
        affine[3] = [0.0, 0.0, 0.0, 1.0];
        let grid = Grid3::new([20, 24, 18], [2.5, 3.0, 3.5], affine).unwrap();
        let mask = Mask::full(grid);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let masked = rng.random_range(0..mask.m());
            let world = voxel_to_world(&mask, masked).unwrap();
            let back = mask.grid().world_to_index(world).unwrap();
            let ijk = mask.coords_of(masked).unwrap();
            for a in 0..3 {
                assert!((back[a] - ijk[a] as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn flatten_is_a_bijection() {
        let grid = identity_grid([3, 4, 2]);
        let inside: Vec<bool> = (0..grid.len()).map(|i| i % 3 != 1).collect();
        let mask = Mask::new(grid, inside.clone()).unwrap();
        let ids: Vec<usize> = (0..mask.m()).collect();
        let volume = mask.unflatten(&ids, usize::MAX);
        assert_eq!(mask.flatten(&volume), ids);
        for (linear, keep) in inside.iter().enumerate() {
            assert_eq!(mask.masked_of(linear).is_some(), *keep);
        }
    }

    #[test]
    fn x_fastest_order() {
        let grid = identity_grid([3, 4, 5]);
        assert_eq!(grid.linear_index([1, 2, 3]), 1 + 3 * (2 + 4 * 3));
        assert_eq!(grid.coords(grid.linear_index([2, 3, 4])), [2, 3, 4]);
    }

    #[test]
    fn empty_mask_rejected() {
        let grid = identity_grid([2, 1, 1]);
        assert!(matches!(Mask::new(grid, vec![false, false]), Err(Error::Mask(_))));
    }

    #[test]
    fn voxel_volume_exact() {
        let grid = Grid3::scaled([1, 1, 1], [3.0; 3], [0.0; 3]).unwrap();
        assert_eq!(grid.voxel_volume(), 27.0);
    }

    #[test]
    fn non_finite_subject_values_rejected() {
        let mask = Arc::new(Mask::full(identity_grid([2, 1, 1])));
        let err = SubjectStack::new(mask, 1, vec![0.0, f32::NAN]).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }
}

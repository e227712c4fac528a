//! PHDAT v1: the little-endian subject-stack container.
//!
//! ```text
//! "PHD1" | u32 nx ny nz n_subjects | f32 voxel_size[3] | f64 affine[16] (row-major)
//!        | u8 mask[nx*ny*nz] (0/1, x-fastest) | f32 data[n_subjects][m]
//! ```
//! Trailing bytes are rejected.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::data::{Grid3, Mask, SubjectStack};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PHD1";

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::format(format!(
                "truncated payload reading {what}: need {n} bytes at offset {}, file has {}",
                self.pos,
                self.buf.len()
            ))
        })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::format(format!("{} trailing bytes after payload", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn decode(bytes: &[u8]) -> Result<SubjectStack> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(format!("bad magic {:?}, expected \"PHD1\"", String::from_utf8_lossy(magic))));
    }
    let nx = r.u32("nx")? as usize;
    let ny = r.u32("ny")? as usize;
    let nz = r.u32("nz")? as usize;
    let n_subjects = r.u32("n_subjects")? as usize;
    let mut voxel_size = [0f32; 3];
    for v in &mut voxel_size {
        *v = r.f32("voxel_size")?;
    }
    let mut affine = [[0f64; 4]; 4];
    for row in &mut affine {
        for v in row.iter_mut() {
            *v = r.f64("affine")?;
        }
    }
    let grid = Grid3::new([nx, ny, nz], voxel_size, affine).map_err(|e| match e {
        Error::Param(msg) | Error::Data(msg) => Error::Format(msg),
        other => other,
    })?;
    let n_voxels = nx
        .checked_mul(ny)
        .and_then(|v| v.checked_mul(nz))
        .ok_or_else(|| Error::format("grid dimensions overflow"))?;
    let mask_bytes = r.take(n_voxels, "mask")?;
    let mut inside = Vec::with_capacity(n_voxels);
    for (i, &b) in mask_bytes.iter().enumerate() {
        match b {
            0 => inside.push(false),
            1 => inside.push(true),
            other => return Err(Error::format(format!("mask byte {i} is {other}, expected 0 or 1"))),
        }
    }
    let mask = Mask::new(grid, inside)?;
    if n_subjects == 0 {
        return Err(Error::format("zero subjects"));
    }
    let count = n_subjects
        .checked_mul(mask.m())
        .ok_or_else(|| Error::format("payload size overflow"))?;
    let raw = r.take(count * 4, "subject data")?;
    r.finish()?;
    let data: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    SubjectStack::new(Arc::new(mask), n_subjects, data)
}

pub fn encode(stack: &SubjectStack) -> Result<Vec<u8>> {
    let mask = stack.mask();
    let grid = mask.grid();
    if mask.m() == 0 {
        return Err(Error::Mask("refusing to write an empty mask".into()));
    }
    let dims: Vec<u32> = grid
        .dims
        .iter()
        .chain(std::iter::once(&stack.n_subjects()))
        .map(|&d| u32::try_from(d).map_err(|_| Error::param(format!("dimension {d} exceeds u32"))))
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(160 + grid.len() + 4 * stack.data().len());
    out.extend_from_slice(MAGIC);
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in grid.voxel_size {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in grid.affine.iter().flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(mask.inside().iter().map(|&b| u8::from(b)));
    for v in stack.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn read_phdat(path: impl AsRef<Path>) -> Result<SubjectStack> {
    decode(&fs::read(path)?)
}

pub fn write_phdat(stack: &SubjectStack, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode(stack)?;
    fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> SubjectStack {
        let grid = Grid3::scaled([1, 1, 1], [1.0; 3], [0.0; 3]).unwrap();
        SubjectStack::new(Arc::new(Mask::full(grid)), 1, vec![0.5]).unwrap()
    }

    #[test]
    fn minimal_layout() {
        let bytes = encode(&minimal()).unwrap();
        assert_eq!(bytes.len(), 4 + 16 + 12 + 128 + 1 + 4);
        assert_eq!(&bytes[..4], b"PHD1");
        let stack = decode(&bytes).unwrap();
        assert_eq!(stack.n_subjects(), 1);
        assert_eq!(stack.m(), 1);
        assert_eq!(stack.data(), &[0.5]);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode(&minimal()).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_and_trailing() {
        let bytes = encode(&minimal()).unwrap();
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(decode(&longer), Err(Error::Format(_))));
    }

    #[test]
    fn non_finite_payload() {
        let mut bytes = encode(&minimal()).unwrap();
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(Error::Data(_))));
    }

    #[test]
    fn empty_mask_in_file() {
        let mut bytes = encode(&minimal()).unwrap();
        // Clear the single mask byte and drop the data value that went with it.
        bytes[160] = 0;
        bytes.truncate(161);
        assert!(matches!(decode(&bytes), Err(Error::Mask(_))));
    }
}

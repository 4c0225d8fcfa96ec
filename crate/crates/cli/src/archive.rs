//! Binary wavefunction archive.
//!
//! Layout (all integers and floats little-endian, fixed field order):
//!
//! ```text
//! offset  size             field
//! 0       5                magic "QLSC1"
//! 5       4                u32 points_x
//! 9       4                u32 points_y
//! 13      8                f64 extent_x
//! 21      8                f64 extent_y
//! 29      4                u32 state_count
//! 33      8·state_count    f64 energies, ascending
//! ...     per state        points_x·points_y complex samples, row-major,
//!                          each as f64 re then f64 im
//! ```
//!
//! Writes go through a temp file in the destination directory followed by a
//! rename, so concurrent producers never interleave partial archives, and
//! `read(write(x)) == x` holds bit-exactly.

use crate::{CliError, CliResult};
use num_complex::Complex64;
use scarlab::lattice::{GridSpec, StateFunction};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

pub const MAGIC: &[u8; 5] = b"QLSC1";
const HEADER_FIXED: u64 = 5 + 4 + 4 + 8 + 8 + 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveHeader {
    pub grid: GridSpec,
    pub energies: Vec<f64>,
}

impl ArchiveHeader {
    pub fn state_count(&self) -> usize {
        self.energies.len()
    }

    fn state_bytes(&self) -> u64 {
        (self.grid.len() * 16) as u64
    }

    fn payload_offset(&self) -> u64 {
        HEADER_FIXED + 8 * self.energies.len() as u64
    }
}

/// Write states (with energies set) as one archive, atomically.
pub fn write_archive(path: &Path, states: &[StateFunction]) -> CliResult<()> {
    if states.is_empty() {
        return Err(CliError::Usage("refusing to write an empty archive".into()));
    }
    let grid = states[0].grid;
    let mut energies = Vec::with_capacity(states.len());
    for (i, s) in states.iter().enumerate() {
        if s.grid != grid {
            return Err(CliError::Usage(format!("state {i} grid differs from state 0")));
        }
        energies.push(s.energy.ok_or_else(|| {
            CliError::Usage(format!("state {i} has no energy; only solved states are archived"))
        })?);
    }

    let tmp = temp_sibling(path);
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(MAGIC)?;
        w.write_all(&(grid.points_x as u32).to_le_bytes())?;
        w.write_all(&(grid.points_y as u32).to_le_bytes())?;
        w.write_all(&grid.extent_x.to_le_bytes())?;
        w.write_all(&grid.extent_y.to_le_bytes())?;
        w.write_all(&(states.len() as u32).to_le_bytes())?;
        for e in &energies {
            w.write_all(&e.to_le_bytes())?;
        }
        for s in states {
            for a in &s.amplitudes {
                w.write_all(&a.re.to_le_bytes())?;
                w.write_all(&a.im.to_le_bytes())?;
            }
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp.{}", std::process::id()));
    path.with_file_name(name)
}

/// Streaming reader: header up front, states on demand.
pub struct ArchiveReader {
    header: ArchiveHeader,
    file: BufReader<File>,
}

impl ArchiveReader {
    pub fn open(path: &Path) -> CliResult<Self> {
        let mut file = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 5];
        file.read_exact(&mut magic)
            .map_err(|_| CliError::Io(format!("{}: truncated header", path.display())))?;
        if &magic != MAGIC {
            return Err(CliError::Io(format!(
                "{}: bad magic {magic:?}, not a wavefunction archive",
                path.display()
            )));
        }
        let points_x = read_u32(&mut file)? as usize;
        let points_y = read_u32(&mut file)? as usize;
        let extent_x = read_f64(&mut file)?;
        let extent_y = read_f64(&mut file)?;
        let count = read_u32(&mut file)? as usize;
        let grid = GridSpec::new(extent_x, extent_y, points_x, points_y)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut energies = Vec::with_capacity(count);
        for _ in 0..count {
            energies.push(read_f64(&mut file)?);
        }
        let header = ArchiveHeader { grid, energies };

        // length check before handing out states
        let expect = header.payload_offset() + header.state_bytes() * count as u64;
        let actual = file.get_ref().metadata()?.len();
        if actual != expect {
            return Err(CliError::Io(format!(
                "{}: payload length {actual} does not match header ({expect})",
                path.display()
            )));
        }
        Ok(ArchiveReader { header, file })
    }

    pub fn header(&self) -> &ArchiveHeader {
        &self.header
    }

    pub fn read_state(&mut self, index: usize) -> CliResult<StateFunction> {
        if index >= self.header.state_count() {
            return Err(CliError::Usage(format!(
                "state {index} out of range ({} archived)",
                self.header.state_count()
            )));
        }
        let offset = self.header.payload_offset() + self.header.state_bytes() * index as u64;
        self.file.seek(SeekFrom::Start(offset))?;
        let n = self.header.grid.len();
        let mut buf = vec![0u8; n * 16];
        self.file.read_exact(&mut buf)?;
        let amplitudes: Vec<Complex64> = buf
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Ok(StateFunction {
            grid: self.header.grid,
            amplitudes,
            energy: Some(self.header.energies[index]),
        })
    }

    pub fn read_all(&mut self) -> CliResult<Vec<StateFunction>> {
        (0..self.header.state_count()).map(|i| self.read_state(i)).collect()
    }
}


fn read_u32<R: Read>(r: &mut R) -> CliResult<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> CliResult<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

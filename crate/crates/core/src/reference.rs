//! Cached reference solutions for the error studies.
//!
//! A reference is the oracle solution on a fine grid. It is stored as a
//! little-endian binary file:
//!
//! ```text
//! offset  size     field
//! 0       8        magic "SPLTREF1"
//! 8       8        n (u64)
//! 16      8 x 8    s0, sf, v0, vf, a, c1, c2, tol (f64)
//! 80      8 x n    control samples u_0..u_{n-1} (f64)
//! ```
//!
//! The state trajectory is not stored; it is recomputed by Euler integration
//! on load.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::analytic::oracle_solve;
use crate::dynamics::euler_integrate;
use crate::error::{Error, Result};
use crate::problem::{ControlVector, Grid, ProblemSpec, StateTrajectory};
use crate::projectors::ShootingConstants;

const MAGIC: &[u8; 8] = b"SPLTREF1";
const HEADER_LEN: usize = 8 + 8 + 8 * 8;

pub const DEFAULT_REFERENCE_N: usize = 1_000_000;
pub const DEFAULT_REFERENCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub spec: ProblemSpec,
    pub grid: Grid,
    pub constants: ShootingConstants,
    pub tol: f64,
    pub control: ControlVector,
    pub trajectory: StateTrajectory,
}

impl ReferenceSolution {
    /// Runs the oracle. Fails if the instance is infeasible.
    pub fn build(spec: &ProblemSpec, grid: &Grid, tol: f64) -> Result<Self> {
        let o = oracle_solve(spec, grid, tol);
        if !o.feasible {
            return Err(Error::invalid(format!(
                "no feasible reference for a = {} (terminal miss {:?})",
                spec.a, o.miss
            )));
        }
        Ok(Self {
            spec: *spec,
            grid: *grid,
            constants: o.constants,
            tol,
            control: o.control,
            trajectory: o.trajectory,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.control.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.grid.n() as u64).to_le_bytes());
        let s = &self.spec;
        for v in [
            s.s0,
            s.sf,
            s.v0,
            s.vf,
            s.a,
            self.constants.c1,
            self.constants.c2,
            self.tol,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.control.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |detail: String| Error::Format {
            what: "reference file",
            detail,
        };
        if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
            return Err(bad("missing header".into()));
        }
        let word = |i: usize| -> [u8; 8] { bytes[i..i + 8].try_into().expect("8 bytes") };
        let n = u64::from_le_bytes(word(8)) as usize;
        let f: Vec<f64> = (0..8)
            .map(|k| f64::from_le_bytes(word(16 + 8 * k)))
            .collect();
        let expected = HEADER_LEN + 8 * n;
        if bytes.len() != expected {
            return Err(bad(format!(
                "expected {expected} bytes for n = {n}, found {}",
                bytes.len()
            )));
        }
        let spec = ProblemSpec::new(f[0], f[1], f[2], f[3], f[4])?;
        let grid = Grid::new(n)?;
        let control: ControlVector = (0..n)
            .map(|i| f64::from_le_bytes(word(HEADER_LEN + 8 * i)))
            .collect::<Vec<_>>()
            .into();
        let trajectory = euler_integrate(&control, &spec, &grid)?;
        Ok(Self {
            spec,
            grid,
            constants: ShootingConstants::new(f[5], f[6]),
            tol: f[7],
            control,
            trajectory,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        // Write to a sibling file first so concurrent readers never see a
        // partial reference.
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        {
            let mut w = BufWriter::new(fs::File::create(&tmp)?);
            w.write_all(&self.to_bytes())?;
            w.flush()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// Loads `path` if it holds a reference for the same instance and grid,
    /// otherwise builds one and writes it there.
    pub fn load_or_build(path: &Path, spec: &ProblemSpec, grid: &Grid, tol: f64) -> Result<Self> {
        if path.exists() {
            let r = Self::load(path)?;
            if r.spec == *spec && r.grid == *grid && r.tol <= tol {
                return Ok(r);
            }
            log::info!(
                "reference at {} does not match the request; rebuilding",
                path.display()
            );
        }
        let r = Self::build(spec, grid, tol)?;
        r.save(path)?;
        Ok(r)
    }
}

/// `dir/reference-<hash>.bin`, keyed by instance, grid size and tolerance.
pub fn cache_path(dir: &Path, spec: &ProblemSpec, n: usize, tol: f64) -> PathBuf {
    let mut h = Sha256::new();
    for v in [spec.s0, spec.sf, spec.v0, spec.vf, spec.a, tol] {
        h.update(v.to_le_bytes());
    }
    h.update((n as u64).to_le_bytes());
    let digest = h.finalize();
    let key: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    dir.join(format!("reference-{key}.bin"))
}

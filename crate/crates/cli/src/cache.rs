//! Ground-state cache in the `FSPK1` container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"FSPK1"
//! u32 key count, then per key: u32 byte length + UTF-8 "name=value"
//! u64 value count, then the values as f64
//! u64 FNV-1a checksum of every byte between the magic and the checksum
//! ```
//!
//! Key values use Rust's shortest round-trip decimal (`Display` for `f64`),
//! e.g. `s=0.5`, `L=40`, `M=1024`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use fracspike::{DecayFit, Field, FracParams, Grid, GroundState, SolverOptions};
use log::{info, warn};

pub const MAGIC: &[u8; 5] = b"FSPK1";
const LAYOUT_VERSION: f64 = 1.0;

/// 64-bit FNV-1a.
pub fn checksum(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeError {
    BadMagic,
    Truncated,
    BadUtf8,
    Checksum { stored: u64, computed: u64 },
    TrailingBytes(usize),
}

impl std::fmt::Display for DecodeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DecodeError::BadMagic => write!(f, "not an FSPK1 file"),
            DecodeError::Truncated => write!(f, "file is truncated"),
            DecodeError::BadUtf8 => write!(f, "key field is not UTF-8"),
            DecodeError::Checksum { stored, computed } => {
                write!(f, "checksum mismatch (stored {stored:016x}, computed {computed:016x})")
            }
            DecodeError::TrailingBytes(n) => write!(f, "{n} trailing bytes after the checksum"),
        }
    }
}

impl std::error::Error for DecodeError {}

pub fn encode(keys: &[String], values: &[f64]) -> Vec<u8> {
    let mut body = Vec::with_capacity(16 + 8 * values.len());
    body.extend_from_slice(&(keys.len() as u32).to_le_bytes());
    for k in keys {
        body.extend_from_slice(&(k.len() as u32).to_le_bytes());
        body.extend_from_slice(k.as_bytes());
    }
    body.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        body.extend_from_slice(&v.to_le_bytes());
    }
    let mut out = Vec::with_capacity(MAGIC.len() + body.len() + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&body);
    out.extend_from_slice(&checksum(&body).to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len()).ok_or(DecodeError::Truncated)?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<(Vec<String>, Vec<f64>), DecodeError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(if bytes.len() < MAGIC.len() { DecodeError::Truncated } else { DecodeError::BadMagic });
    }
    let mut r = Reader { buf: bytes, pos: MAGIC.len() };
    let n_keys = r.u32()? as usize;
    let mut keys = Vec::with_capacity(n_keys.min(64));
    for _ in 0..n_keys {
        let len = r.u32()? as usize;
        let raw = r.take(len)?;
        keys.push(String::from_utf8(raw.to_vec()).map_err(|_| DecodeError::BadUtf8)?);
    }
    let n_values = usize::try_from(r.u64()?).map_err(|_| DecodeError::Truncated)?;
    let raw = r.take(n_values.checked_mul(8).ok_or(DecodeError::Truncated)?)?;
    let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let body_end = r.pos;
    let stored = r.u64()?;
    if r.pos != bytes.len() {
        return Err(DecodeError::TrailingBytes(bytes.len() - r.pos));
    }
    let computed = checksum(&bytes[MAGIC.len()..body_end]);
    if stored != computed {
        return Err(DecodeError::Checksum { stored, computed });
    }
    Ok((keys, values))
}

/// Cache key `(s, p, N, L, M)` of a unit-height ground state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Key {
    pub s: f64,
    pub p: f64,
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
}

impl Key {
    pub fn new(params: FracParams, grid: &Grid) -> Self {
        Self { s: params.s, p: params.p, dim: grid.dim(), half_width: grid.half_width(), points: grid.points_per_axis() }
    }

    pub fn fields(&self) -> Vec<String> {
        vec![
            "kind=ground_state".to_string(),
            format!("s={}", self.s),
            format!("p={}", self.p),
            format!("N={}", self.dim),
            format!("L={}", self.half_width),
            format!("M={}", self.points),
        ]
    }

    pub fn file_name(&self) -> String {
        format!("ground_state_s{}_p{}_N{}_L{}_M{}.fspk", self.s, self.p, self.dim, self.half_width, self.points)
    }
}

/// Flattens everything a ground state needs except its (recomputable) spectrum.
pub fn ground_state_values(gs: &GroundState) -> Vec<f64> {
    let d = &gs.decay;
    let mut v = vec![
        LAYOUT_VERSION,
        gs.lambda,
        gs.energy_j,
        gs.residual_norm,
        gs.petviashvili_iterations as f64,
        gs.newton_steps as f64,
        d.c0,
        d.exponent,
        if d.valid { 1.0 } else { 0.0 },
        d.plateau_variation,
        d.tail_ratio,
        d.image_amplitude,
        gs.s_history.len() as f64,
    ];
    v.extend_from_slice(&gs.s_history);
    v.extend_from_slice(gs.profile.values());
    v
}

pub fn ground_state_from_values(key: &Key, values: &[f64]) -> Option<GroundState> {
    const HEAD: usize = 13;
    if values.len() < HEAD || values[0] != LAYOUT_VERSION {
        return None;
    }
    let params = FracParams::new(key.s, key.p, key.dim).ok()?;
    let grid = Grid::new(key.dim, key.half_width, key.points).ok()?;
    let n_hist = values[12] as usize;
    if values.len() != HEAD + n_hist + grid.len() {
        return None;
    }
    let profile = Field::new(grid, values[HEAD + n_hist..].to_vec()).ok()?;
    Some(GroundState {
        params,
        lambda: values[1],
        profile,
        energy_j: values[2],
        decay: DecayFit {
            c0: values[6],
            exponent: values[7],
            valid: values[8] != 0.0,
            plateau_variation: values[9],
            tail_ratio: values[10],
            image_amplitude: values[11],
        },
        residual_norm: values[3],
        petviashvili_iterations: values[4] as usize,
        newton_steps: values[5] as usize,
        s_history: values[HEAD..HEAD + n_hist].to_vec(),
        spectrum: None,
    })
}

#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, key: &Key) -> PathBuf {
        self.dir.join(key.file_name())
    }

    /// A hit only when the file decodes, its checksum holds and its key fields match.
    pub fn load(&self, key: &Key) -> Option<GroundState> {
        let path = self.path(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return None,
            Err(e) => {
                warn!("cache file {} unreadable, treating as a miss: {e}", path.display());
                return None;
            }
        };
        let (keys, values) = match decode(&bytes) {
            Ok(x) => x,
            Err(e) => {
                warn!("cache file {} is corrupt, treating as a miss: {e}", path.display());
                return None;
            }
        };
        if keys != key.fields() {
            info!("cache file {} holds key {keys:?}, not {:?}", path.display(), key.fields());
            return None;
        }
        let gs = ground_state_from_values(key, &values);
        if gs.is_none() {
            warn!("cache file {} has an unexpected payload layout, treating as a miss", path.display());
        }
        gs
    }

    /// Writes to a temporary file in the cache directory, then renames it into place.
    pub fn store(&self, key: &Key, gs: &GroundState) -> io::Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path(key);
        let tmp = self.dir.join(format!(".{}.{}.tmp", key.file_name(), std::process::id()));
        fs::write(&tmp, encode(&key.fields(), &ground_state_values(gs)))?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    /// Loads the ground state or solves and stores it; the flag tells whether it was a hit.
    pub fn ground_state(
        &self,
        params: FracParams,
        grid: Grid,
        opts: SolverOptions,
    ) -> fracspike::Result<(GroundState, bool)> {
        let key = Key::new(params, &grid);
        if let Some(gs) = self.load(&key) {
            info!("cache hit {}, skipping the ground-state solve", self.path(&key).display());
            return Ok((gs, true));
        }
        info!("cache miss {}, solving the ground state", self.path(&key).display());
        let gs = fracspike::solve_ground_state(params, 1.0, grid, opts)?;
        if let Err(e) = self.store(&key, &gs) {
            warn!("could not write cache file {}: {e}", self.path(&key).display());
        }
        Ok((gs, false))
    }
}

//! Versioned little-endian container for DMRG runs and density operators.
//!
//! Layout (see `docs/checkpoint-format.md`):
//!
//! ```text
//! magic   8 bytes  "BNEGCKPT"
//! version u32      FORMAT_VERSION
//! count   u32      number of sections
//! section*         tag u8, length u64, payload[length]
//! ```
//!
//! Matrices are `rows u64, cols u64` followed by `rows·cols` f64 values in
//! row-major order; vectors are `len u64` followed by the elements.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use faer::Mat;

use crate::blocks::{BasisTag, DensityOperator, SectorLabels};
use crate::dmrg::{BlockBasis, Chains, DmrgConfig, DmrgRun, Side, SuperblockState};
use crate::error::{Error, Result};
use crate::model::{ModelParams, Symmetry};

pub const MAGIC: &[u8; 8] = b"BNEGCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// Transforms read back must be isometries to this tolerance.
pub const RELOAD_ISOMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum SectionTag {
    Setup = 1,
    Block = 2,
    State = 3,
    Density = 4,
    Summary = 5,
}

impl SectionTag {
    fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            1 => SectionTag::Setup,
            2 => SectionTag::Block,
            3 => SectionTag::State,
            4 => SectionTag::Density,
            5 => SectionTag::Summary,
            other => return Err(Error::Checkpoint(format!("unknown section tag {other}"))),
        })
    }
}

#[derive(Default)]
struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u64(&mut self, v: usize) {
        self.buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }
    fn i32s(&mut self, v: &[i32]) {
        self.u64(v.len());
        v.iter().for_each(|&x| self.buf.extend_from_slice(&x.to_le_bytes()));
    }
    fn mat(&mut self, m: &Mat<f64>) {
        self.u64(m.nrows());
        self.u64(m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                self.f64(m[(i, j)]);
            }
        }
    }
}

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint("truncated section".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Checkpoint("length overflows usize".into()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self, elem: usize) -> Result<usize> {
        let n = self.u64()?;
        if n.checked_mul(elem).is_none_or(|b| b > self.buf.len() - self.pos) {
            return Err(Error::Checkpoint("declared length exceeds section".into()));
        }
        Ok(n)
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn i32s(&mut self) -> Result<Vec<i32>> {
        let n = self.len(4)?;
        (0..n)
            .map(|_| Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap())))
            .collect()
    }
    fn mat(&mut self) -> Result<Mat<f64>> {
        let rows = self.u64()?;
        let cols = self.u64()?;
        let count = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Checkpoint("matrix size overflow".into()))?;
        if count.saturating_mul(8) > self.buf.len() - self.pos {
            return Err(Error::Checkpoint("matrix exceeds section".into()));
        }
        let data = self.take(count * 8)?;
        Ok(Mat::from_fn(rows, cols, |i, j| {
            let k = (i * cols + j) * 8;
            f64::from_le_bytes(data[k..k + 8].try_into().unwrap())
        }))
    }
    fn symmetry(&mut self) -> Result<Symmetry> {
        let t = self.u8()?;
        Symmetry::from_tag(t).ok_or_else(|| Error::Checkpoint(format!("unknown symmetry tag {t}")))
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes in section", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn encode_setup(params: &ModelParams, config: &DmrgConfig) -> Vec<u8> {
    let mut e = Encoder::default();
    e.u64(params.n_sites);
    e.f64(params.gamma);
    e.f64(params.lambda);
    e.u64(config.max_kept_states);
    e.u64(config.n_sweeps);
    e.f64(config.eigensolver_tol);
    e.f64(config.target_epsilon);
    e.buf
}

fn decode_setup(d: &mut Decoder<'_>) -> Result<(ModelParams, DmrgConfig)> {
    let params = ModelParams {
        n_sites: d.u64()?,
        gamma: d.f64()?,
        lambda: d.f64()?,
    };
    let config = DmrgConfig {
        max_kept_states: d.u64()?,
        n_sweeps: d.u64()?,
        eigensolver_tol: d.f64()?,
        target_epsilon: d.f64()?,
    };
    Ok((params, config))
}

fn encode_block(b: &BlockBasis) -> Vec<u8> {
    let mut e = Encoder::default();
    e.u8(match b.side {
        Side::Left => 0,
        Side::Right => 1,
    });
    e.u64(b.block_len);
    e.u64(b.dim);
    e.u64(b.parent_dim);
    e.f64(b.truncated_weight);
    e.i32s(&b.parent_charges);
    e.i32s(&b.charges);
    e.mat(&b.transform);
    e.mat(&b.block_hamiltonian);
    e.mat(&b.edge_x);
    e.mat(&b.edge_a);
    e.buf
}

fn decode_block(d: &mut Decoder<'_>) -> Result<BlockBasis> {
    let side = match d.u8()? {
        0 => Side::Left,
        1 => Side::Right,
        s => return Err(Error::Checkpoint(format!("unknown block side {s}"))),
    };
    let block = BlockBasis {
        side,
        block_len: d.u64()?,
        dim: d.u64()?,
        parent_dim: d.u64()?,
        truncated_weight: d.f64()?,
        parent_charges: d.i32s()?,
        charges: d.i32s()?,
        transform: d.mat()?,
        block_hamiltonian: d.mat()?,
        edge_x: d.mat()?,
        edge_a: d.mat()?,
    };
    let (t, n) = (&block.transform, block.dim);
    let shapes_ok = t.nrows() == 2 * block.parent_dim
        && t.ncols() == n
        && block.charges.len() == n
        && block.parent_charges.len() == block.parent_dim
        && [&block.block_hamiltonian, &block.edge_x, &block.edge_a]
            .iter()
            .all(|m| m.nrows() == n && m.ncols() == n);
    if !shapes_ok {
        return Err(Error::Checkpoint(format!("inconsistent shapes in block of {} sites", block.block_len)));
    }
    block.check_isometry(RELOAD_ISOMETRY_TOLERANCE)?;
    Ok(block)
}

fn encode_state(s: &SuperblockState) -> Vec<u8> {
    let mut e = Encoder::default();
    for v in [s.n_sites, s.left_len, s.right_len, s.dim_s, s.dim_e] {
        e.u64(v);
    }
    e.f64(s.energy);
    e.f64(s.truncated_weight);
    e.u8(s.symmetry.tag());
    e.i32s(&s.charges_s);
    e.i32s(&s.charges_e);
    e.f64s(&s.schmidt_spectrum);
    e.f64s(&s.psi);
    e.buf
}

fn decode_state(d: &mut Decoder<'_>) -> Result<SuperblockState> {
    let s = SuperblockState {
        n_sites: d.u64()?,
        left_len: d.u64()?,
        right_len: d.u64()?,
        dim_s: d.u64()?,
        dim_e: d.u64()?,
        energy: d.f64()?,
        truncated_weight: d.f64()?,
        symmetry: d.symmetry()?,
        charges_s: d.i32s()?,
        charges_e: d.i32s()?,
        schmidt_spectrum: d.f64s()?,
        psi: d.f64s()?,
    };
    if s.psi.len() != 4 * s.dim_s * s.dim_e || s.charges_s.len() != s.dim_s || s.charges_e.len() != s.dim_e {
        return Err(Error::Checkpoint("inconsistent superblock shapes".into()));
    }
    Ok(s)
}

fn encode_density(rho: &DensityOperator) -> Vec<u8> {
    let mut e = Encoder::default();
    for v in [rho.d_s, rho.d_e, rho.block_len, rho.separation] {
        e.u64(v);
    }
    e.u8(match rho.basis {
        BasisTag::Decimated => 0,
        BasisTag::Physical => 1,
    });
    match &rho.sectors {
        Some(l) => {
            e.u8(1);
            e.u8(l.symmetry.tag());
            e.i32s(&l.system);
            e.i32s(&l.environment);
        }
        None => e.u8(0),
    }
    e.mat(&rho.matrix);
    e.buf
}

fn decode_density(d: &mut Decoder<'_>) -> Result<DensityOperator> {
    let (d_s, d_e, block_len, separation) = (d.u64()?, d.u64()?, d.u64()?, d.u64()?);
    let basis = match d.u8()? {
        0 => BasisTag::Decimated,
        1 => BasisTag::Physical,
        b => return Err(Error::Checkpoint(format!("unknown basis tag {b}"))),
    };
    let sectors = match d.u8()? {
        0 => None,
        1 => Some(SectorLabels {
            symmetry: d.symmetry()?,
            system: d.i32s()?,
            environment: d.i32s()?,
        }),
        f => return Err(Error::Checkpoint(format!("bad sector flag {f}"))),
    };
    let matrix = d.mat()?;
    let mut rho = DensityOperator::new_unchecked(matrix, d_s, d_e, block_len, separation, basis);
    rho.check_factorization().map_err(|e| Error::Checkpoint(e.to_string()))?;
    if let Some(l) = sectors {
        if l.system.len() != d_s || l.environment.len() != d_e {
            return Err(Error::Checkpoint("sector labels do not match dimensions".into()));
        }
        rho = rho.with_sectors(l);
    }
    Ok(rho)
}

fn encode_summary(run: &DmrgRun) -> Vec<u8> {
    let mut e = Encoder::default();
    e.u8(run.converged as u8);
    e.f64(run.max_truncated_weight);
    e.f64s(&run.sweep_energies);
    e.f64s(&run.step_truncated_weights);
    e.buf
}

fn write_container(path: &Path, sections: &[(SectionTag, Vec<u8>)]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    put(MAGIC)?;
    put(&FORMAT_VERSION.to_le_bytes())?;
    put(&(sections.len() as u32).to_le_bytes())?;
    for (tag, payload) in sections {
        put(&[*tag as u8])?;
        put(&(payload.len() as u64).to_le_bytes())?;
        put(payload)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_container(path: &Path) -> Result<Vec<(SectionTag, Vec<u8>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file).read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    parse_container(&bytes)
}

fn parse_container(bytes: &[u8]) -> Result<Vec<(SectionTag, Vec<u8>)>> {
    let mut d = Decoder { buf: bytes, pos: 0 };
    if d.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(d.take(4)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let count = u32::from_le_bytes(d.take(4)?.try_into().unwrap());
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let tag = SectionTag::from_u8(d.u8()?)?;
        let len = d.u64()?;
        out.push((tag, d.take(len)?.to_vec()));
    }
    d.finish()?;
    Ok(out)
}

/// Everything needed to unnest a converged run after the fact.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub config: DmrgConfig,
    pub chains: Chains,
    pub state: SuperblockState,
    pub converged: bool,
    pub max_truncated_weight: f64,
    pub sweep_energies: Vec<f64>,
    pub step_truncated_weights: Vec<f64>,
}

impl Checkpoint {
    pub fn into_run(self) -> DmrgRun {
        DmrgRun {
            params: self.params,
            config: self.config,
            chains: self.chains,
            state: self.state,
            sweep_energies: self.sweep_energies,
            converged: self.converged,
            step_truncated_weights: self.step_truncated_weights,
            max_truncated_weight: self.max_truncated_weight,
            warnings: Vec::new(),
        }
    }
}

pub fn write_run(path: impl AsRef<Path>, run: &DmrgRun) -> Result<()> {
    let mut sections = vec![(SectionTag::Setup, encode_setup(&run.params, &run.config))];
    for b in run.chains.left.iter().chain(&run.chains.right) {
        sections.push((SectionTag::Block, encode_block(b)));
    }
    sections.push((SectionTag::State, encode_state(&run.state)));
    sections.push((SectionTag::Summary, encode_summary(run)));
    write_container(path.as_ref(), &sections)
}

pub fn read_run(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let sections = read_container(path.as_ref())?;
    let mut setup = None;
    let mut chains = Chains {
        left: Vec::new(),
        right: Vec::new(),
    };
    let mut state = None;
    let mut summary = None;
    for (tag, payload) in &sections {
        let mut d = Decoder { buf: payload, pos: 0 };
        match tag {
            SectionTag::Setup => setup = Some(decode_setup(&mut d)?),
            SectionTag::Block => {
                let b = decode_block(&mut d)?;
                let stack = match b.side {
                    Side::Left => &mut chains.left,
                    Side::Right => &mut chains.right,
                };
                if b.block_len != stack.len() + 1 {
                    return Err(Error::Checkpoint(format!("block of {} sites out of order", b.block_len)));
                }
                stack.push(b);
            }
            SectionTag::State => state = Some(decode_state(&mut d)?),
            SectionTag::Summary => {
                let converged = d.u8()? != 0;
                let max_eps = d.f64()?;
                let energies = d.f64s()?;
                let weights = d.f64s()?;
                summary = Some((converged, max_eps, energies, weights));
            }
            SectionTag::Density => return Err(Error::Checkpoint("density section in a run checkpoint".into())),
        }
        d.finish()?;
    }
    let (params, config) = setup.ok_or_else(|| Error::Checkpoint("missing setup section".into()))?;
    let state = state.ok_or_else(|| Error::Checkpoint("missing state section".into()))?;
    let (converged, max_truncated_weight, sweep_energies, step_truncated_weights) =
        summary.unwrap_or((false, state.truncated_weight, Vec::new(), Vec::new()));
    Ok(Checkpoint {
        params,
        config,
        chains,
        state,
        converged,
        max_truncated_weight,
        sweep_energies,
        step_truncated_weights,
    })
}

pub fn write_density_operators(path: impl AsRef<Path>, ops: &[DensityOperator]) -> Result<()> {
    let sections: Vec<_> = ops.iter().map(|r| (SectionTag::Density, encode_density(r))).collect();
    write_container(path.as_ref(), &sections)
}

pub fn read_density_operators(path: impl AsRef<Path>) -> Result<Vec<DensityOperator>> {
    read_container(path.as_ref())?
        .iter()
        .map(|(tag, payload)| {
            if *tag != SectionTag::Density {
                return Err(Error::Checkpoint("expected only density sections".into()));
            }
            let mut d = Decoder { buf: payload, pos: 0 };
            let rho = decode_density(&mut d)?;
            d.finish()?;
            Ok(rho)
        })
        .collect()
}

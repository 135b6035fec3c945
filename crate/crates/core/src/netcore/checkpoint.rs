//! Binary parameter checkpoints. The byte layout is described in
//! `docs/FORMATS.md`; every integer and float is little-endian.

use std::io::{Read, Write};
use std::path::Path;

use super::params::ParameterStore;
use super::topology::{Activation, LayerKind, LayerSpec, NetworkTopology};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SNPCKPT1";

/// One topology with one or more parameter stores (several for grouped sharing).
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Free-form provenance, e.g. `config=<hash> seed=<n> net=actor`.
    pub provenance: String,
    pub topology: NetworkTopology,
    pub stores: Vec<ParameterStore>,
}

fn kind_code(k: LayerKind) -> u8 {
    match k {
        LayerKind::Dense => 0,
        LayerKind::Gru => 1,
    }
}

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Tanh => 1,
        Activation::Identity => 2,
        Activation::Softmax => 3,
    }
}

fn u32_of(n: usize) -> Result<[u8; 4]> {
    u32::try_from(n)
        .map(u32::to_le_bytes)
        .map_err(|_| Error::Format(format!("{n} does not fit a u32 field")))
}

impl Checkpoint {
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        for s in &self.stores {
            if !s.matches(&self.topology) {
                return Err(Error::usage("checkpoint store does not match its topology"));
            }
        }
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&u32_of(self.provenance.len())?)?;
        w.write_all(self.provenance.as_bytes())?;
        w.write_all(&u32_of(self.topology.layers().len())?)?;
        for l in self.topology.layers() {
            w.write_all(&[kind_code(l.kind), activation_code(l.activation)])?;
            w.write_all(&u32_of(l.input_width)?)?;
            w.write_all(&u32_of(l.output_width)?)?;
        }
        w.write_all(&u32_of(self.stores.len())?)?;
        for store in &self.stores {
            for (spec, blocks) in self.topology.layers().iter().zip(self.topology.blocks()) {
                for (rows, cols, range) in blocks.tensors(spec) {
                    w.write_all(&u32_of(rows)?)?;
                    w.write_all(&u32_of(cols)?)?;
                    for v in &store.values()[range] {
                        w.write_all(&v.to_le_bytes())?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a parameter checkpoint (bad magic)".into()));
        }
        let plen = read_u32(r)? as usize;
        let mut pbytes = vec![0u8; plen];
        r.read_exact(&mut pbytes)?;
        let provenance =
            String::from_utf8(pbytes).map_err(|_| Error::Format("provenance is not utf-8".into()))?;

        let n_layers = read_u32(r)? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let mut codes = [0u8; 2];
            r.read_exact(&mut codes)?;
            let kind = match codes[0] {
                0 => LayerKind::Dense,
                1 => LayerKind::Gru,
                c => return Err(Error::Format(format!("unknown layer kind code {c}"))),
            };
            let activation = match codes[1] {
                0 => Activation::Relu,
                1 => Activation::Tanh,
                2 => Activation::Identity,
                3 => Activation::Softmax,
                c => return Err(Error::Format(format!("unknown activation code {c}"))),
            };
            let input_width = read_u32(r)? as usize;
            let output_width = read_u32(r)? as usize;
            layers.push(LayerSpec { kind, input_width, output_width, activation });
        }
        let topology = NetworkTopology::new(layers)
            .map_err(|e| Error::Format(format!("invalid topology header: {e}")))?;

        let n_stores = read_u32(r)? as usize;
        let mut stores = Vec::with_capacity(n_stores);
        for _ in 0..n_stores {
            let mut values = vec![0.0; topology.parameter_count()];
            for (spec, blocks) in topology.layers().iter().zip(topology.blocks()) {
                for (rows, cols, range) in blocks.tensors(spec) {
                    let (fr, fc) = (read_u32(r)? as usize, read_u32(r)? as usize);
                    if (fr, fc) != (rows, cols) {
                        return Err(Error::Format(format!(
                            "shape record {fr}x{fc} does not match expected {rows}x{cols}"
                        )));
                    }
                    for v in &mut values[range] {
                        let mut b = [0u8; 8];
                        r.read_exact(&mut b)?;
                        *v = f64::from_le_bytes(b);
                    }
                }
            }
            stores.push(ParameterStore::from_values(values));
        }
        Ok(Self { provenance, topology, stores })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::init_parameters;

    #[test]
    fn round_trip_is_bit_exact() {
        let t = NetworkTopology::recurrent(5, 6, 3).unwrap();
        let mut a = init_parameters(&t, 3);
        a.values_mut()[0] = -0.0;
        a.values_mut()[1] = f64::MIN_POSITIVE / 4.0;
        let ck = Checkpoint {
            provenance: "config=abc seed=3".into(),
            topology: t.clone(),
            stores: vec![a, init_parameters(&t, 4)],
        };
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        let back = Checkpoint::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.topology, ck.topology);
        assert_eq!(back.provenance, ck.provenance);
        for (x, y) in back.stores.iter().zip(&ck.stores) {
            let bx: Vec<u64> = x.values().iter().map(|v| v.to_bits()).collect();
            let by: Vec<u64> = y.values().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bx, by);
        }
    }

    #[test]
    fn rejects_bad_magic() {
        let err = Checkpoint::read_from(&mut &b"NOTACKPTxxxx"[..]);
        assert!(matches!(err, Err(Error::Format(_))));
    }
}

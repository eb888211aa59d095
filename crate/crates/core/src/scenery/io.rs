//! Scenery files.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! magic "PSCN" | version u8 | domain u8 (0 lattice, 1 tree)
//! lattice: dim u32, half_width i64      tree: vertices u64, depth u64
//! alphabet u16 | seed u64 | provenance u8 (0 null, 1 perturbed)
//! label count u64 | one byte per label (row-major for lattices)
//! if perturbed: trimmed u8 | trace length u64 | trace indices u64 each
//! ```
//!
//! The JSON form is the serde encoding of [`SceneryWindow`], meant for
//! tiny instances.

use std::io::{Read, Write};

use super::{Domain, HiddenPath, Provenance, SceneryWindow};
use crate::error::{Error, Result};
use crate::trees::RayPrefix;

const MAGIC: &[u8; 4] = b"PSCN";
const VERSION: u8 = 1;

pub fn write_binary<W: Write>(scenery: &SceneryWindow, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    match scenery.domain {
        Domain::Lattice { dim, half_width } => {
            w.write_all(&[0])?;
            w.write_all(&(dim as u32).to_le_bytes())?;
            w.write_all(&half_width.to_le_bytes())?;
        }
        Domain::Tree { vertices, depth } => {
            w.write_all(&[1])?;
            w.write_all(&(vertices as u64).to_le_bytes())?;
            w.write_all(&(depth as u64).to_le_bytes())?;
        }
    }
    w.write_all(&(scenery.alphabet_size as u16).to_le_bytes())?;
    w.write_all(&scenery.seed.to_le_bytes())?;
    w.write_all(&[u8::from(scenery.is_perturbed())])?;
    w.write_all(&(scenery.labels.len() as u64).to_le_bytes())?;
    w.write_all(&scenery.labels)?;
    if let Provenance::Perturbed { hidden } = &scenery.provenance {
        let trimmed = matches!(hidden, HiddenPath::Lattice { trimmed: true, .. });
        w.write_all(&[u8::from(trimmed)])?;
        let idx = hidden.indices();
        w.write_all(&(idx.len() as u64).to_le_bytes())?;
        for &i in idx {
            w.write_all(&(i as u64).to_le_bytes())?;
        }
    }
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated scenery file: {e}")))?;
    Ok(buf)
}

fn take_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(take(r)?))
}

fn take_len<R: Read>(r: &mut R) -> Result<usize> {
    usize::try_from(take_u64(r)?).map_err(|_| Error::Format("length does not fit in memory".into()))
}

pub fn read_binary<R: Read>(mut r: R) -> Result<SceneryWindow> {
    if &take::<4, _>(&mut r)? != MAGIC {
        return Err(Error::Format("not a scenery file (bad magic)".into()));
    }
    let [version] = take::<1, _>(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported scenery version {version}")));
    }
    let domain = match take::<1, _>(&mut r)? {
        [0] => Domain::Lattice {
            dim: u32::from_le_bytes(take(&mut r)?) as usize,
            half_width: i64::from_le_bytes(take(&mut r)?),
        },
        [1] => Domain::Tree {
            vertices: take_len(&mut r)?,
            depth: take_len(&mut r)?,
        },
        [k] => return Err(Error::Format(format!("unknown domain kind {k}"))),
    };
    let alphabet = u16::from_le_bytes(take(&mut r)?) as usize;
    let seed = take_u64(&mut r)?;
    let [flag] = take::<1, _>(&mut r)?;
    let n = take_len(&mut r)?;
    if n != domain.len()? {
        return Err(Error::Format(format!("{n} labels for a domain of {} vertices", domain.len()?)));
    }
    let mut labels = vec![0u8; n];
    r.read_exact(&mut labels)
        .map_err(|e| Error::Format(format!("truncated label block: {e}")))?;
    let provenance = match flag {
        0 => Provenance::Null,
        1 => {
            let [trimmed] = take::<1, _>(&mut r)?;
            let len = take_len(&mut r)?;
            if len > n {
                return Err(Error::Format("trace longer than the domain".into()));
            }
            let indices = (0..len).map(|_| take_len(&mut r)).collect::<Result<Vec<_>>>()?;
            let hidden = match domain {
                Domain::Lattice { .. } => HiddenPath::Lattice {
                    indices,
                    trimmed: trimmed != 0,
                },
                Domain::Tree { .. } => HiddenPath::Tree {
                    ray: RayPrefix::from_vertices_unchecked(indices),
                },
            };
            Provenance::Perturbed { hidden }
        }
        k => return Err(Error::Format(format!("unknown provenance flag {k}"))),
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after scenery".into()));
    }
    SceneryWindow::new(domain, alphabet, labels, provenance, seed)
}

pub fn write_json<W: Write>(scenery: &SceneryWindow, w: W) -> Result<()> {
    serde_json::to_writer(w, scenery)?;
    Ok(())
}

pub fn read_json<R: Read>(r: R) -> Result<SceneryWindow> {
    let s: SceneryWindow = serde_json::from_reader(r)?;
    SceneryWindow::new(s.domain, s.alphabet_size, s.labels, s.provenance, s.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeBox, PathSampler, StopRule, WalkSpec};
    use crate::measures::MeasurePair;
    use crate::scenery::{sample_null, sample_perturbed, sample_perturbed_tree};
    use crate::trees::{FlowTree, TreeGenerator};

    fn round_trip(s: &SceneryWindow) {
        let mut buf = Vec::new();
        write_binary(s, &mut buf).unwrap();
        assert_eq!(&read_binary(buf.as_slice()).unwrap(), s);
        let mut js = Vec::new();
        write_json(s, &mut js).unwrap();
        assert_eq!(&read_json(js.as_slice()).unwrap(), s);
    }

    #[test]
    fn round_trips() {
        let pair = MeasurePair::new(vec![0.5, 0.25, 0.25], vec![0.1, 0.1, 0.8]).unwrap();
        let w = LatticeBox::new(2, 6).unwrap();
        round_trip(&sample_null(Domain::lattice(w), &pair, 1).unwrap());
        let sampler = PathSampler::walk(WalkSpec::simple(2).unwrap(), StopRule::WindowExit { half_width: 6 });
        round_trip(&sample_perturbed(w, &pair, &sampler, 2).unwrap());
        let t: FlowTree<f64> = FlowTree::build(&TreeGenerator::BAry { b: 2, depth: 4 }).unwrap();
        round_trip(&sample_perturbed_tree(&t, &pair, 3).unwrap());
    }

    #[test]
    fn rejects_corrupt_files() {
        let pair = MeasurePair::new(vec![0.5, 0.5], vec![0.9, 0.1]).unwrap();
        let s = sample_null(Domain::lattice(LatticeBox::new(2, 2).unwrap()), &pair, 1).unwrap();
        let mut buf = Vec::new();
        write_binary(&s, &mut buf).unwrap();
        assert!(read_binary(&buf[..buf.len() - 1]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_binary(extra.as_slice()).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_binary(bad.as_slice()).is_err());
        let mut label = buf.clone();
        let last = label.len() - 1;
        label[last] = 7;
        assert!(matches!(read_binary(label.as_slice()), Err(Error::LabelOutOfRange { .. })));
    }
}

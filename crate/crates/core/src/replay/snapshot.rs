//! Versioned binary snapshots of replay buffers.
//!
//! Layout (all integers and reals little-endian, reals as IEEE-754 binary64):
//!
//! ```text
//! magic      8 bytes  "PBWLRPL\0"
//! version    u32      1
//! kind       u8       0 = uniform, 1 = prioritized
//! capacity   u64
//! cursor     u64
//! pushed     u64
//! len        u64
//! state_dim  u64
//! len × record:
//!   rec_len  u32      byte length of the rest of the record
//!   stamp    u64
//!   action   u64
//!   reward   f64
//!   terminal u8
//!   state    state_dim × f64
//!   next     state_dim × f64
//! prioritized only:
//!   len × leaf priority f64
//!   stale    u64
//! ```

use std::io::{Read, Write};

use super::{PrioritizedBuffer, ReplayError, Transition, UniformBuffer};
use crate::Scalar;

pub const MAGIC: &[u8; 8] = b"PBWLRPL\0";
pub const VERSION: u32 = 1;

const KIND_UNIFORM: u8 = 0;
const KIND_PRIORITIZED: u8 = 1;

fn put_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_real<W: Write, T: Scalar>(w: &mut W, v: T) -> std::io::Result<()> {
    w.write_all(&v.as_f64().to_le_bytes())
}

fn get<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], ReplayError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64, ReplayError> {
    Ok(u64::from_le_bytes(get::<8, _>(r)?))
}

fn get_real<R: Read, T: Scalar>(r: &mut R) -> Result<T, ReplayError> {
    let v = f64::from_le_bytes(get::<8, _>(r)?);
    T::from_f64(v).ok_or_else(|| ReplayError::Snapshot(format!("unrepresentable real {v}")))
}

fn get_usize<R: Read>(r: &mut R) -> Result<usize, ReplayError> {
    usize::try_from(get_u64(r)?).map_err(|_| ReplayError::Snapshot("size overflow".into()))
}

fn write_ring<W: Write, T: Scalar>(w: &mut W, kind: u8, buf: &UniformBuffer<T>) -> Result<(), ReplayError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[kind])?;
    put_u64(w, buf.capacity() as u64)?;
    put_u64(w, buf.cursor() as u64)?;
    put_u64(w, buf.pushed())?;
    put_u64(w, buf.len() as u64)?;
    let dim = buf.state_dim().unwrap_or(0);
    put_u64(w, dim as u64)?;
    let rec_len = (8 + 8 + 8 + 1 + 16 * dim) as u32;
    for slot in 0..buf.len() {
        let t = buf.get(slot).expect("occupied");
        w.write_all(&rec_len.to_le_bytes())?;
        put_u64(w, buf.stamp(slot).expect("occupied"))?;
        put_u64(w, t.action as u64)?;
        put_real(w, t.reward)?;
        w.write_all(&[t.terminal as u8])?;
        for &x in t.state.iter().chain(&t.next_state) {
            put_real(w, x)?;
        }
    }
    Ok(())
}

fn read_ring<R: Read, T: Scalar>(r: &mut R) -> Result<(u8, UniformBuffer<T>), ReplayError> {
    if &get::<8, _>(r)? != MAGIC {
        return Err(ReplayError::Snapshot("bad magic".into()));
    }
    let version = u32::from_le_bytes(get::<4, _>(r)?);
    if version != VERSION {
        return Err(ReplayError::Snapshot(format!("unsupported version {version}")));
    }
    let kind = get::<1, _>(r)?[0];
    let capacity = get_usize(r)?;
    let cursor = get_usize(r)?;
    let pushed = get_u64(r)?;
    let len = get_usize(r)?;
    let dim = get_usize(r)?;
    if len > capacity {
        return Err(ReplayError::Snapshot("length exceeds capacity".into()));
    }
    let expected_rec = 8 + 8 + 8 + 1 + 16 * dim;
    let mut slots = Vec::with_capacity(len);
    let mut stamps = Vec::with_capacity(len);
    for slot in 0..len {
        let rec_len = u32::from_le_bytes(get::<4, _>(r)?) as usize;
        if rec_len != expected_rec {
            return Err(ReplayError::Snapshot(format!("record {slot} has length {rec_len}")));
        }
        stamps.push(get_u64(r)?);
        let action = get_usize(r)?;
        let reward = get_real(r)?;
        let terminal = match get::<1, _>(r)?[0] {
            0 => false,
            1 => true,
            b => return Err(ReplayError::Snapshot(format!("bad terminal flag {b}"))),
        };
        let state = (0..dim).map(|_| get_real(r)).collect::<Result<Vec<T>, _>>()?;
        let next_state = (0..dim).map(|_| get_real(r)).collect::<Result<Vec<T>, _>>()?;
        slots.push(Transition::new(state, action, reward, next_state, terminal));
    }
    Ok((kind, UniformBuffer::restore(capacity, slots, stamps, cursor, pushed)?))
}

pub fn write_uniform<W: Write, T: Scalar>(w: &mut W, buf: &UniformBuffer<T>) -> Result<(), ReplayError> {
    write_ring(w, KIND_UNIFORM, buf)
}

pub fn read_uniform<R: Read, T: Scalar>(r: &mut R) -> Result<UniformBuffer<T>, ReplayError> {
    match read_ring(r)? {
        (KIND_UNIFORM, buf) => Ok(buf),
        (kind, _) => Err(ReplayError::Snapshot(format!("expected uniform snapshot, found kind {kind}"))),
    }
}

pub fn write_prioritized<W: Write, T: Scalar>(
    w: &mut W,
    buf: &PrioritizedBuffer<T>,
) -> Result<(), ReplayError> {
    write_ring(w, KIND_PRIORITIZED, buf.storage())?;
    for slot in 0..buf.len() {
        put_real(w, buf.priority(slot))?;
    }
    put_u64(w, buf.stale_updates())?;
    Ok(())
}

pub fn read_prioritized<R: Read, T: Scalar>(r: &mut R) -> Result<PrioritizedBuffer<T>, ReplayError> {
    let (kind, storage) = read_ring(r)?;
    if kind != KIND_PRIORITIZED {
        return Err(ReplayError::Snapshot(format!("expected prioritized snapshot, found kind {kind}")));
    }
    let priorities = (0..storage.len())
        .map(|_| get_real(r))
        .collect::<Result<Vec<T>, _>>()?;
    let stale = get_u64(r)?;
    PrioritizedBuffer::restore(storage, priorities, stale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled_uniform() -> UniformBuffer<f64> {
        let mut buf = UniformBuffer::new(3).unwrap();
        for i in 0..5 {
            let x = i as f64 * 0.1;
            buf.push(Transition::new(vec![x, -x], i % 3, -1.5 * x, vec![x + 1.0, x], i == 4))
                .unwrap();
        }
        buf
    }

    #[test]
    fn header_bytes() {
        let mut bytes = Vec::new();
        write_uniform(&mut bytes, &filled_uniform()).unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(bytes[12], 0);
        assert_eq!(&bytes[13..21], &3u64.to_le_bytes());
        // header + 3 records of (4 + 25 + 32) bytes
        assert_eq!(bytes.len(), 8 + 4 + 1 + 5 * 8 + 3 * 61);
    }

    #[test]
    fn uniform_restores_exactly() {
        let buf = filled_uniform();
        let mut bytes = Vec::new();
        write_uniform(&mut bytes, &buf).unwrap();
        let back: UniformBuffer<f64> = read_uniform(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, buf);
    }

    #[test]
    fn prioritized_restores_exactly_in_single_precision() {
        let mut buf = PrioritizedBuffer::<f32>::new(4).unwrap();
        for i in 0..6 {
            buf.push(Transition::new(vec![i as f32], 1, 0.5, vec![0.25], false)).unwrap();
            buf.set_priority(i % 4, 0.1 * i as f32).unwrap();
        }
        let mut bytes = Vec::new();
        write_prioritized(&mut bytes, &buf).unwrap();
        let back: PrioritizedBuffer<f32> = read_prioritized(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, buf);
        assert!(read_uniform::<_, f32>(&mut bytes.as_slice()).is_err());
    }

    #[test]
    fn corrupt_input_rejected() {
        let mut bytes = Vec::new();
        write_uniform(&mut bytes, &filled_uniform()).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_uniform::<_, f64>(&mut bad.as_slice()).is_err());
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(read_uniform::<_, f64>(&mut bad.as_slice()).is_err());
        let truncated = &bytes[..bytes.len() - 3];
        assert!(read_uniform::<_, f64>(&mut &truncated[..]).is_err());
    }
}

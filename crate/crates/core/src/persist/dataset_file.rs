//! Dataset file format ("MTMD").
//!
//! Header: magic "MTMD", version u16, task tag u8, record count u64, all
//! little-endian. Fixed-size records follow (raw 8-bit RGB images plus
//! labels), then a CRC-32 of the record region. The count is checked against
//! the actual file size before any allocation, and the CRC before decoding.

use std::fs;
use std::path::Path;

use crate::data::{Dataset, GraspSample, Image, PokeSample, PushSample, Task, IMAGE_BYTES};
use crate::error::{Error, Result};
use crate::persist::bytes::{Reader, Writer};
use crate::persist::crc32::crc32;

pub const DATASET_MAGIC: [u8; 4] = *b"MTMD";
pub const DATASET_VERSION: u16 = 1;

const HEADER_LEN: usize = 4 + 2 + 1 + 8;

fn record_size(task: Task) -> usize {
    match task {
        Task::Grasp => IMAGE_BYTES + 2,
        Task::Push => 2 * IMAGE_BYTES + 5 * 8,
        Task::Poke => IMAGE_BYTES + 2 * 8,
    }
}

pub fn encode_dataset(ds: &Dataset) -> Vec<u8> {
    let mut payload = Writer::new();
    match ds {
        Dataset::Grasp(samples) => {
            for s in samples {
                payload.raw(s.patch.bytes());
                payload.u8(s.theta);
                payload.u8(s.label);
            }
        }
        Dataset::Push(samples) => {
            for s in samples {
                payload.raw(s.begin.bytes());
                payload.raw(s.end.bytes());
                payload.f64_slice(&s.action);
            }
        }
        Dataset::Poke(samples) => {
            for s in samples {
                payload.raw(s.image.bytes());
                payload.f64_slice(&s.response);
            }
        }
    }
    let payload = payload.into_bytes();

    let mut out = Writer::new();
    out.raw(&DATASET_MAGIC);
    out.u16(DATASET_VERSION);
    out.u8(ds.task().tag());
    out.u64(ds.len() as u64);
    out.raw(&payload);
    out.u32(crc32(&payload));
    out.into_bytes()
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4)?;
    if magic != DATASET_MAGIC {
        return Err(Error::BadMagic { expected: DATASET_MAGIC, found: magic.try_into().unwrap() });
    }
    let version = r.u16()?;
    if version != DATASET_VERSION {
        return Err(Error::BadVersion { expected: DATASET_VERSION, found: version });
    }
    let task = Task::from_tag(r.u8()?)?;
    let count = r.u64()?;

    // Validate the declared count against the real file size before touching
    // any allocation sized by it.
    let rec = record_size(task) as u64;
    let expected_len = count
        .checked_mul(rec)
        .and_then(|p| p.checked_add(HEADER_LEN as u64 + 4))
        .ok_or(Error::Truncated { expected: u64::MAX, found: bytes.len() as u64 })?;
    if bytes.len() as u64 != expected_len {
        return Err(Error::Truncated { expected: expected_len, found: bytes.len() as u64 });
    }

    let payload = r.take((count * rec) as usize)?;
    let stored_crc = r.u32()?;
    let actual_crc = crc32(payload);
    if stored_crc != actual_crc {
        return Err(Error::CrcMismatch { expected: stored_crc, found: actual_crc });
    }

    let mut pr = Reader::new(payload);
    let n = count as usize;
    Ok(match task {
        Task::Grasp => {
            let mut samples = Vec::with_capacity(n);
            for _ in 0..n {
                let patch = Image::from_bytes(pr.take(IMAGE_BYTES)?)?;
                let theta = pr.u8()?;
                let label = pr.u8()?;
                if theta >= 18 {
                    return Err(Error::parse(format!("grasp angle bin {theta} out of range")));
                }
                if label > 1 {
                    return Err(Error::parse(format!("grasp label {label} not binary")));
                }
                samples.push(GraspSample { patch, theta, label });
            }
            Dataset::Grasp(samples)
        }
        Task::Push => {
            let mut samples = Vec::with_capacity(n);
            for _ in 0..n {
                let begin = Image::from_bytes(pr.take(IMAGE_BYTES)?)?;
                let end = Image::from_bytes(pr.take(IMAGE_BYTES)?)?;
                let action: [f64; 5] = pr.f64_vec(5)?.try_into().unwrap();
                samples.push(PushSample { begin, end, action });
            }
            Dataset::Push(samples)
        }
        Task::Poke => {
            let mut samples = Vec::with_capacity(n);
            for _ in 0..n {
                let image = Image::from_bytes(pr.take(IMAGE_BYTES)?)?;
                let response: [f64; 2] = pr.f64_vec(2)?.try_into().unwrap();
                samples.push(PokeSample { image, response });
            }
            Dataset::Poke(samples)
        }
    })
}

pub fn save_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    fs::write(path, encode_dataset(ds))?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path)?;
    decode_dataset(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_grasp() -> Dataset {
        let img = |v: u8| Image::from_bytes(&vec![v; IMAGE_BYTES]).unwrap();
        Dataset::Grasp(vec![
            GraspSample { patch: img(3), theta: 0, label: 1 },
            GraspSample { patch: img(250), theta: 17, label: 0 },
        ])
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let ds = sample_grasp();
        let bytes = encode_dataset(&ds);
        let back = decode_dataset(&bytes).unwrap();
        assert_eq!(encode_dataset(&back), bytes);
        assert_eq!(back, ds);
    }

    #[test]
    fn corrupt_payload_byte_is_crc_error() {
        let mut bytes = encode_dataset(&sample_grasp());
        bytes[HEADER_LEN + 100] ^= 0x01;
        assert!(matches!(decode_dataset(&bytes).unwrap_err(), Error::CrcMismatch { .. }));
    }

    #[test]
    fn bad_magic_rejected() {
        let mut bytes = encode_dataset(&sample_grasp());
        bytes[0] = b'X';
        assert!(matches!(decode_dataset(&bytes).unwrap_err(), Error::BadMagic { .. }));
    }

    #[test]
    fn unknown_version_rejected() {
        let mut bytes = encode_dataset(&sample_grasp());
        bytes[4] = 99;
        assert!(matches!(decode_dataset(&bytes).unwrap_err(), Error::BadVersion { .. }));
    }

    #[test]
    fn truncated_file_rejected_before_decode() {
        let bytes = encode_dataset(&sample_grasp());
        let cut = &bytes[..bytes.len() - 10];
        assert!(matches!(decode_dataset(cut).unwrap_err(), Error::Truncated { .. }));
    }

    #[test]
    fn huge_declared_count_rejected_by_size_check() {
        let mut bytes = encode_dataset(&sample_grasp());
        // count field sits after magic+version+tag
        bytes[7..15].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode_dataset(&bytes).unwrap_err(), Error::Truncated { .. }));
    }
}

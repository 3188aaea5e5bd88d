//! Binary model format, all little-endian:
//!
//! ```text
//! magic    4 bytes  "NDPP"
//! version  u32      FORMAT_VERSION
//! m        u64      catalog size
//! k        u64      rank
//! tied     u8       1 = B shares storage with V
//! alpha    f64
//! beta     f64
//! v        m*k f64  row-major
//! b        m*k f64  row-major, present only when tied = 0
//! d        k*k f64  row-major
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{NdppError, Result};
use crate::kernel::NdppParams;
use crate::matcore::Mat;

pub const MAGIC: &[u8; 4] = b"NDPP";
pub const FORMAT_VERSION: u32 = 1;

const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 1 + 8 + 8;

pub fn write_model(p: &NdppParams, w: &mut impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(p.m() as u64).to_le_bytes())?;
    w.write_all(&(p.k() as u64).to_le_bytes())?;
    w.write_all(&[u8::from(p.is_tied())])?;
    w.write_all(&p.alpha().to_le_bytes())?;
    w.write_all(&p.beta().to_le_bytes())?;
    for x in p.to_flat() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// Writes atomically: data goes to a sibling temp file that is renamed into
/// place, so a failed save never leaves a partial model behind.
pub fn save_model(p: &NdppParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = Path::new(&tmp);
    let res = (|| {
        let mut w = BufWriter::new(File::create(tmp)?);
        write_model(p, &mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(tmp, path)?;
        Ok(())
    })();
    if res.is_err() {
        let _ = fs::remove_file(tmp);
    }
    res
}

fn take<'a>(buf: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if buf.len() < n {
        return Err(NdppError::Format("file truncated".into()));
    }
    let (head, tail) = buf.split_at(n);
    *buf = tail;
    Ok(head)
}

fn take_u64(buf: &mut &[u8]) -> Result<u64> {
    Ok(u64::from_le_bytes(take(buf, 8)?.try_into().unwrap()))
}

fn take_f64(buf: &mut &[u8]) -> Result<f64> {
    Ok(f64::from_le_bytes(take(buf, 8)?.try_into().unwrap()))
}

pub fn read_model(r: &mut impl Read) -> Result<NdppParams> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut buf = bytes.as_slice();
    if buf.len() < HEADER_LEN {
        return Err(NdppError::Format("file truncated".into()));
    }
    if take(&mut buf, 4)? != MAGIC {
        return Err(NdppError::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut buf, 4)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(NdppError::Format(format!("unsupported version {version}")));
    }
    let m = take_u64(&mut buf)?;
    let k = take_u64(&mut buf)?;
    let tied = match take(&mut buf, 1)?[0] {
        0 => false,
        1 => true,
        t => return Err(NdppError::Format(format!("bad tied flag {t}"))),
    };
    let alpha = take_f64(&mut buf)?;
    let beta = take_f64(&mut buf)?;
    if m == 0 || k == 0 {
        return Err(NdppError::Format(format!("bad dimensions m={m} k={k}")));
    }
    let n_factors: u64 = if tied { 1 } else { 2 };
    let expected = m
        .checked_mul(k)
        .and_then(|mk| mk.checked_mul(n_factors))
        .and_then(|x| x.checked_add(k.checked_mul(k)?))
        .and_then(|x| x.checked_mul(8))
        .ok_or_else(|| NdppError::Format("dimension overflow".into()))?;
    if buf.len() as u64 != expected {
        return Err(NdppError::Format(format!(
            "payload is {} bytes, header implies {expected}",
            buf.len()
        )));
    }
    let (m, k) = (m as usize, k as usize);
    let mut read_mat = |rows: usize, cols: usize| -> Result<Mat> {
        let data = (0..rows * cols).map(|_| take_f64(&mut buf)).collect::<Result<Vec<_>>>()?;
        Mat::from_vec(rows, cols, data).map_err(|e| NdppError::Format(e.to_string()))
    };
    let v = read_mat(m, k)?;
    let b = if tied { None } else { Some(read_mat(m, k)?) };
    let d = read_mat(k, k)?;
    NdppParams::new(v, b, d, alpha, beta).map_err(|e| NdppError::Format(e.to_string()))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<NdppParams> {
    read_model(&mut File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(tied: bool, seed: u64) -> NdppParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = Mat::gaussian(7, 3, &mut rng);
        let b = (!tied).then(|| Mat::gaussian(7, 3, &mut rng));
        NdppParams::new(v, b, Mat::gaussian(3, 3, &mut rng), 0.5, if tied { 0.0 } else { 0.25 }).unwrap()
    }

    fn encode(p: &NdppParams) -> Vec<u8> {
        let mut out = Vec::new();
        write_model(p, &mut out).unwrap();
        out
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ndpp");
        for tied in [true, false] {
            let p = params(tied, 4);
            save_model(&p, &path).unwrap();
            assert_eq!(load_model(&path).unwrap(), p);
        }
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&params(true, 1));
        assert_eq!(&bytes[..4], b"NDPP");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 7);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 3);
        assert_eq!(bytes[24], 1);
        assert_eq!(bytes.len(), HEADER_LEN + 8 * (21 + 9));
    }

    #[test]
    fn truncated_is_format_error() {
        let bytes = encode(&params(false, 2));
        for cut in [0, 3, HEADER_LEN - 1, HEADER_LEN + 5, bytes.len() - 1] {
            let r = read_model(&mut &bytes[..cut]);
            assert!(matches!(r, Err(NdppError::Format(_))), "cut {cut}");
        }
    }

    #[test]
    fn bad_version_and_magic() {
        let mut bytes = encode(&params(true, 3));
        bytes[4] = 2;
        assert!(matches!(read_model(&mut bytes.as_slice()), Err(NdppError::Format(_))));
        let mut bytes = encode(&params(true, 3));
        bytes[0] = b'X';
        assert!(matches!(read_model(&mut bytes.as_slice()), Err(NdppError::Format(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_model("/nonexistent/model.ndpp"), Err(NdppError::Io(_))));
    }

    proptest! {
        #[test]
        fn bitwise_roundtrip(seed in any::<u64>(), tied in any::<bool>()) {
            let p = params(tied, seed);
            let back = read_model(&mut encode(&p).as_slice()).unwrap();
            prop_assert_eq!(encode(&back), encode(&p));
            prop_assert_eq!(back, p);
        }
    }
}

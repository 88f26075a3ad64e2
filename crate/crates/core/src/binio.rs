//! Little-endian helpers shared by the binary file formats.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub(crate) fn write_u32<W: Write>(w: &mut W, x: u32) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_u64<W: Write>(w: &mut W, x: u64) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub(crate) fn write_f32s<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(xs.len() * 4);
    for &x in xs {
        buf.extend_from_slice(&(x as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_array<R: Read, const N: usize>(r: &mut R, what: &'static str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::format(what, format!("truncated: {e}")))?;
    Ok(buf)
}

pub(crate) fn read_magic<R: Read>(r: &mut R, magic: &[u8; 4], what: &'static str) -> Result<()> {
    let got: [u8; 4] = read_array(r, what)?;
    if &got != magic {
        return Err(Error::format(what, format!("bad magic {got:?}")));
    }
    Ok(())
}

pub(crate) fn read_u32<R: Read>(r: &mut R, what: &'static str) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r, what)?))
}

pub(crate) fn read_u64<R: Read>(r: &mut R, what: &'static str) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r, what)?))
}

pub(crate) fn read_len<R: Read>(r: &mut R, what: &'static str) -> Result<usize> {
    usize::try_from(read_u64(r, what)?).map_err(|_| Error::format(what, "length overflows usize"))
}

pub(crate) fn read_bytes<R: Read>(r: &mut R, len: usize, what: &'static str) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(Error::format(
            what,
            format!("expected {len} bytes, got {}", buf.len()),
        ));
    }
    Ok(buf)
}

pub(crate) fn read_str<R: Read>(r: &mut R, what: &'static str) -> Result<String> {
    let len = read_u32(r, what)? as usize;
    String::from_utf8(read_bytes(r, len, what)?)
        .map_err(|e| Error::format(what, format!("string is not UTF-8: {e}")))
}

pub(crate) fn read_f32s<R: Read>(r: &mut R, n: usize, what: &'static str) -> Result<Vec<f64>> {
    let bytes = read_bytes(
        r,
        n.checked_mul(4)
            .ok_or_else(|| Error::format(what, "size overflow"))?,
        what,
    )?;
    let out: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::format(what, "non-finite value"));
    }
    Ok(out)
}

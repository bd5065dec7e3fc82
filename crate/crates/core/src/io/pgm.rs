//! Binary 8-bit PGM (P5) reading and writing.

use super::IoError;
use crate::image::GrayImage;
use std::io::{Read, Write};
use std::path::Path;

/// Write `img` as binary PGM; intensities are rounded and clamped to 0..=255.
pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<(), IoError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{} {}\n255\n", img.width(), img.height())?;
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    f.write_all(&bytes)?;
    Ok(())
}

/// Read a binary PGM written by [`write_pgm`]. The parser is strict: exactly
/// the `P5`, dimensions and `255` header tokens, no comments.
pub fn read_pgm(path: &Path) -> Result<GrayImage, IoError> {
    let mut raw = Vec::new();
    std::fs::File::open(path)
        .map_err(|_| IoError::Missing(path.to_path_buf()))?
        .read_to_end(&mut raw)?;
    // Header: four whitespace-separated tokens then a single whitespace byte.
    fn next_token(raw: &[u8], pos: &mut usize, path: &Path) -> Result<String, IoError> {
        while *pos < raw.len() && raw[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        let start = *pos;
        while *pos < raw.len() && !raw[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(IoError::parse(path, 1, "truncated PGM header"));
        }
        Ok(String::from_utf8_lossy(&raw[start..*pos]).into_owned())
    }
    let mut pos = 0usize;
    let magic = next_token(&raw, &mut pos, path)?;
    if magic != "P5" {
        return Err(IoError::parse(path, 1, format!("expected P5 magic, got {magic}")));
    }
    let width: usize = next_token(&raw, &mut pos, path)?
        .parse()
        .map_err(|_| IoError::parse(path, 1, "bad width"))?;
    let height: usize = next_token(&raw, &mut pos, path)?
        .parse()
        .map_err(|_| IoError::parse(path, 1, "bad height"))?;
    let maxval = next_token(&raw, &mut pos, path)?;
    if maxval != "255" {
        return Err(IoError::parse(path, 1, format!("expected maxval 255, got {maxval}")));
    }
    pos += 1; // single whitespace after maxval
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| IoError::parse(path, 1, "image dimensions overflow"))?;
    let body = &raw[pos..];
    if body.len() != expected {
        return Err(IoError::parse(
            path,
            1,
            format!("expected {expected} pixel bytes, got {}", body.len()),
        ));
    }
    Ok(GrayImage::from_raw(
        width,
        height,
        body.iter().map(|&b| b as f32).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let img = GrayImage::from_fn(33, 21, |x, y| ((x * 5 + y * 11) % 256) as f32);
        write_pgm(&path, &img).unwrap();
        let back = read_pgm(&path).unwrap();
        assert_eq!(back, img);
        // Twice through the writer gives identical bytes.
        let path2 = dir.path().join("img2.pgm");
        write_pgm(&path2, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn malformed_headers_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        std::fs::write(&path, b"P2\n4 4\n255\n").unwrap();
        assert!(matches!(read_pgm(&path), Err(IoError::Parse { .. })));
        std::fs::write(&path, b"P5\n4 4\n255\nshort").unwrap();
        assert!(matches!(read_pgm(&path), Err(IoError::Parse { .. })));
        assert!(matches!(
            read_pgm(&dir.path().join("absent.pgm")),
            Err(IoError::Missing(_))
        ));
    }
}

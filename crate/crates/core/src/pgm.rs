//! Minimal PGM codecs: binary 16-bit (P5, maxval 65535, big-endian samples)
//! and plain ASCII (P2).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm16 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u16>,
}

pub fn encode_pgm16(width: usize, height: usize, data: &[u16]) -> Vec<u8> {
    assert_eq!(data.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(data.len() * 2);
    for v in data {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

pub fn write_pgm16(path: &Path, width: usize, height: usize, data: &[u16]) -> Result<()> {
    fs::write(path, encode_pgm16(width, height, data))?;
    Ok(())
}

pub fn decode_pgm16(bytes: &[u8]) -> Result<Pgm16> {
    let bad = |msg: &str| Error::Validation(format!("malformed PGM: {msg}"));
    // Header: magic, width, height, maxval, each separated by whitespace,
    // followed by exactly one whitespace byte.
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
    }
    pos += 1;
    if fields[0] != "P5" {
        return Err(bad("expected P5 magic"));
    }
    let width: usize = fields[1].parse().map_err(|_| bad("width"))?;
    let height: usize = fields[2].parse().map_err(|_| bad("height"))?;
    if fields[3] != "65535" {
        return Err(bad("expected 16-bit maxval 65535"));
    }
    let body = bytes.get(pos..).ok_or_else(|| bad("missing pixel data"))?;
    if body.len() != width * height * 2 {
        return Err(bad("pixel data length does not match dimensions"));
    }
    let data = body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Ok(Pgm16 { width, height, data })
}

pub fn read_pgm16(path: &Path) -> Result<Pgm16> {
    decode_pgm16(&fs::read(path)?)
}

/// Plain (P2) PGM with the given maxval; values above it are clamped.
pub fn write_pgm_plain<W: Write>(mut out: W, width: usize, height: usize, data: &[u32], maxval: u32) -> Result<()> {
    assert_eq!(data.len(), width * height);
    let maxval = maxval.clamp(1, 65535);
    writeln!(out, "P2\n{width} {height}\n{maxval}")?;
    for row in data.chunks(width.max(1)) {
        let line: Vec<String> = row.iter().map(|v| v.min(&maxval).to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

//! Minimal RIFF/WAVE reader and writer for multichannel PCM and float audio.
//!
//! Integer samples are scaled by 2^(bits-1), so full-scale positive 16-bit
//! audio reads as 32767/32768.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleFormat {
    Pcm16,
    Pcm24,
    Pcm32,
    Float32,
}

impl SampleFormat {
    fn bits(self) -> u16 {
        match self {
            SampleFormat::Pcm16 => 16,
            SampleFormat::Pcm24 => 24,
            SampleFormat::Pcm32 | SampleFormat::Float32 => 32,
        }
    }

    fn format_tag(self) -> u16 {
        match self {
            SampleFormat::Float32 => FORMAT_FLOAT,
            _ => FORMAT_PCM,
        }
    }
}

/// Decoded audio: `channels[c][n]` in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct WavAudio {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: u32,
    pub format: SampleFormat,
}

impl WavAudio {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct Format {
    channels: u16,
    sample_rate: u32,
    sample: SampleFormat,
}

fn u16_at(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

fn corrupt(offset: usize, detail: impl Into<String>) -> Error {
    Error::CorruptHeader {
        offset: offset as u64,
        detail: detail.into(),
    }
}

fn parse_format(chunk: &[u8], offset: usize) -> Result<Format> {
    if chunk.len() < 16 {
        return Err(corrupt(
            offset,
            format!("'fmt ' chunk is {} bytes, need at least 16", chunk.len()),
        ));
    }
    let mut tag = u16_at(chunk, 0);
    let channels = u16_at(chunk, 2);
    let sample_rate = u32_at(chunk, 4);
    let bits = u16_at(chunk, 14);
    if tag == FORMAT_EXTENSIBLE {
        if chunk.len() < 26 {
            return Err(corrupt(offset, "extensible 'fmt ' chunk lacks its subformat"));
        }
        tag = u16_at(chunk, 24);
    }
    let sample = match (tag, bits) {
        (FORMAT_PCM, 16) => SampleFormat::Pcm16,
        (FORMAT_PCM, 24) => SampleFormat::Pcm24,
        (FORMAT_PCM, 32) => SampleFormat::Pcm32,
        (FORMAT_FLOAT, 32) => SampleFormat::Float32,
        (tag, bits) => {
            return Err(Error::UnsupportedFormat(format!(
                "format tag {tag} with {bits} bits per sample"
            )))
        }
    };
    if channels == 0 || sample_rate == 0 {
        return Err(corrupt(
            offset,
            format!("{channels} channels at {sample_rate} Hz"),
        ));
    }
    Ok(Format {
        channels,
        sample_rate,
        sample,
    })
}

/// Decodes a WAV file image.
pub fn decode_wav(bytes: &[u8]) -> Result<WavAudio> {
    if bytes.len() < 12 {
        return Err(corrupt(bytes.len(), "missing RIFF/WAVE header"));
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(corrupt(0, "not a RIFF/WAVE file"));
    }
    let mut format = None;
    let mut data = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = u32_at(bytes, at + 4) as usize;
        let body = at + 8;
        let name = String::from_utf8_lossy(id).into_owned();
        if body + size > bytes.len() {
            return Err(corrupt(
                at,
                format!(
                    "'{name}' chunk declares {size} bytes but only {} remain",
                    bytes.len() - body
                ),
            ));
        }
        match id {
            b"fmt " => format = Some(parse_format(&bytes[body..body + size], at)?),
            b"data" => data = Some((body, size)),
            _ => {}
        }
        at = body + size + (size & 1);
    }
    let format = format.ok_or_else(|| corrupt(at.min(bytes.len()), "missing 'fmt ' chunk"))?;
    let (data_at, data_len) =
        data.ok_or_else(|| corrupt(at.min(bytes.len()), "missing 'data' chunk"))?;

    let width = format.sample.bits() as usize / 8;
    let frame = width * format.channels as usize;
    if data_len % frame != 0 {
        return Err(corrupt(
            data_at,
            format!("'data' chunk length {data_len} is not a multiple of the {frame}-byte frame"),
        ));
    }
    let frames = data_len / frame;
    let mut channels = vec![Vec::with_capacity(frames); format.channels as usize];
    for (k, sample) in bytes[data_at..data_at + data_len].chunks_exact(width).enumerate() {
        let value = match format.sample {
            SampleFormat::Pcm16 => i16::from_le_bytes([sample[0], sample[1]]) as f64 / 32768.0,
            SampleFormat::Pcm24 => {
                let raw = i32::from_le_bytes([0, sample[0], sample[1], sample[2]]) >> 8;
                raw as f64 / 8_388_608.0
            }
            SampleFormat::Pcm32 => {
                i32::from_le_bytes([sample[0], sample[1], sample[2], sample[3]]) as f64
                    / 2_147_483_648.0
            }
            SampleFormat::Float32 => {
                f32::from_le_bytes([sample[0], sample[1], sample[2], sample[3]]) as f64
            }
        };
        channels[k % format.channels as usize].push(value);
    }
    Ok(WavAudio {
        channels,
        sample_rate: format.sample_rate,
        format: format.sample,
    })
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<WavAudio> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

/// Encodes channels of equal length; samples are clamped to [-1, 1].
pub fn encode_wav(channels: &[Vec<f64>], sample_rate: u32, format: SampleFormat) -> Result<Vec<u8>> {
    let count = channels.len();
    let len = channels.first().map_or(0, Vec::len);
    if count == 0 || count > u16::MAX as usize || channels.iter().any(|c| c.len() != len) {
        return Err(Error::InvalidConfig(
            "WAV output needs 1..=65535 channels of equal length".into(),
        ));
    }
    let width = format.bits() as usize / 8;
    let data_len = len * count * width;
    if data_len + 36 > u32::MAX as usize {
        return Err(Error::InvalidConfig("audio too long for a WAV file".into()));
    }
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.format_tag().to_le_bytes());
    out.extend_from_slice(&(count as u16).to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * (count * width) as u32).to_le_bytes());
    out.extend_from_slice(&((count * width) as u16).to_le_bytes());
    out.extend_from_slice(&format.bits().to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for n in 0..len {
        for ch in channels {
            let x = ch[n].clamp(-1.0, 1.0);
            match format {
                SampleFormat::Pcm16 => {
                    let q = (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    out.extend_from_slice(&q.to_le_bytes());
                }
                SampleFormat::Pcm24 => {
                    let q = (x * 8_388_608.0).round().clamp(-8_388_608.0, 8_388_607.0) as i32;
                    out.extend_from_slice(&q.to_le_bytes()[..3]);
                }
                SampleFormat::Pcm32 => {
                    let q = (x * 2_147_483_648.0)
                        .round()
                        .clamp(-2_147_483_648.0, 2_147_483_647.0) as i32;
                    out.extend_from_slice(&q.to_le_bytes());
                }
                SampleFormat::Float32 => out.extend_from_slice(&(x as f32).to_le_bytes()),
            }
        }
    }
    Ok(out)
}

pub fn write_wav(
    path: impl AsRef<Path>,
    channels: &[Vec<f64>],
    sample_rate: u32,
    format: SampleFormat,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_wav(channels, sample_rate, format)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

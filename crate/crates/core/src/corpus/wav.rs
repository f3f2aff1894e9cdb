//! Minimal RIFF/WAVE reader and 16-bit PCM writer.
//!
//! Supports integer PCM at 8/16/24/32 bits and IEEE float at 32/64 bits,
//! including `WAVE_FORMAT_EXTENSIBLE` headers. Multi-channel files are
//! reduced to channel 0.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{CorpusError, Recording, Result};

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_IEEE_FLOAT: u16 = 0x0003;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Header fields of a decoded WAV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavInfo {
    pub format: u16,
    pub channels: u16,
    pub sample_rate_hz: u32,
    pub bits_per_sample: u16,
    pub frames: usize,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct Fmt {
    format: u16,
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    bits: u16,
}

fn parse_fmt(body: &[u8]) -> Result<Fmt> {
    if body.len() < 16 {
        return Err(CorpusError::MalformedHeader(format!(
            "fmt chunk is {} bytes, expected at least 16",
            body.len()
        )));
    }
    let mut format = u16_at(body, 0);
    let channels = u16_at(body, 2);
    let sample_rate = u32_at(body, 4);
    let block_align = u16_at(body, 12);
    let bits = u16_at(body, 14);
    if format == FORMAT_EXTENSIBLE {
        if body.len() < 40 {
            return Err(CorpusError::MalformedHeader(
                "extensible fmt chunk shorter than 40 bytes".into(),
            ));
        }
        // First two bytes of the sub-format GUID carry the actual format tag.
        format = u16_at(body, 24);
    }
    if channels == 0 {
        return Err(CorpusError::MalformedHeader("zero channels".into()));
    }
    if bits == 0 || bits % 8 != 0 {
        return Err(CorpusError::UnsupportedEncoding { format, bits });
    }
    if (block_align as usize) < channels as usize * (bits as usize / 8) {
        return Err(CorpusError::MalformedHeader(format!(
            "block align {block_align} too small for {channels} channels of {bits} bits"
        )));
    }
    Ok(Fmt {
        format,
        channels,
        sample_rate,
        block_align,
        bits,
    })
}

fn decode_sample(fmt: &Fmt, b: &[u8]) -> f64 {
    match (fmt.format, fmt.bits) {
        (FORMAT_PCM, 8) => (b[0] as f64 - 128.0) / 128.0,
        (FORMAT_PCM, 16) => i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0,
        (FORMAT_PCM, 24) => {
            let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
            v as f64 / 8_388_608.0
        }
        (FORMAT_PCM, 32) => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64 / 2_147_483_648.0,
        (FORMAT_IEEE_FLOAT, 32) => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
        (FORMAT_IEEE_FLOAT, 64) => {
            f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]])
        }
        _ => unreachable!("encoding validated before decoding"),
    }
}

/// Decodes an in-memory WAV image into channel-0 samples in [-1, 1].
pub fn read_wav(bytes: &[u8]) -> Result<(WavInfo, Vec<f64>)> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(CorpusError::MalformedHeader("missing RIFF/WAVE signature".into()));
    }
    let mut pos = 12;
    let mut fmt: Option<Fmt> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let available = bytes.len() - body_start;
        match id {
            b"fmt " => {
                if size > available {
                    return Err(CorpusError::MalformedHeader("truncated fmt chunk".into()));
                }
                fmt = Some(parse_fmt(&bytes[body_start..body_start + size])?);
            }
            b"data" => {
                // Streaming writers leave the size unset; take what is there.
                let len = size.min(available);
                data = Some(&bytes[body_start..body_start + len]);
                if size >= available {
                    break;
                }
            }
            _ => {}
        }
        pos = body_start.saturating_add(size).saturating_add(size & 1);
    }
    let fmt = fmt.ok_or_else(|| CorpusError::MalformedHeader("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| CorpusError::MalformedHeader("no data chunk".into()))?;

    let supported = matches!(
        (fmt.format, fmt.bits),
        (FORMAT_PCM, 8 | 16 | 24 | 32) | (FORMAT_IEEE_FLOAT, 32 | 64)
    );
    if !supported {
        return Err(CorpusError::UnsupportedEncoding {
            format: fmt.format,
            bits: fmt.bits,
        });
    }

    let block = fmt.block_align as usize;
    let frames = data.len() / block;
    if frames == 0 {
        return Err(CorpusError::EmptyAudio);
    }
    let width = fmt.bits as usize / 8;
    let mut samples = Vec::with_capacity(frames);
    for (i, frame) in data.chunks_exact(block).enumerate() {
        let v = decode_sample(&fmt, &frame[..width]);
        if !v.is_finite() {
            return Err(CorpusError::NonFiniteSample(i));
        }
        samples.push(v.clamp(-1.0, 1.0));
    }
    let info = WavInfo {
        format: fmt.format,
        channels: fmt.channels,
        sample_rate_hz: fmt.sample_rate,
        bits_per_sample: fmt.bits,
        frames,
    };
    Ok((info, samples))
}

/// Loads a WAV file as a [`Recording`] whose id is the path as given.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Recording> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (info, samples) = read_wav(&bytes)?;
    Recording::new(path.to_string_lossy(), samples, info.sample_rate_hz)
}

/// Writes mono 16-bit PCM. Samples are clipped to [-1, 1] and quantized by
/// rounding `x * 32768`, so a re-read is within 2^-16 of the input.
pub fn write_wav_pcm16(path: impl AsRef<Path>, samples: &[f64], sample_rate_hz: u32) -> Result<()> {
    let path = path.as_ref();
    let data_len = samples.len() * 2;
    let mut buf = Vec::with_capacity(44 + data_len);
    buf.extend_from_slice(b"RIFF");
    buf.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    buf.extend_from_slice(b"WAVE");
    buf.extend_from_slice(b"fmt ");
    buf.extend_from_slice(&16u32.to_le_bytes());
    buf.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    buf.extend_from_slice(&1u16.to_le_bytes());
    buf.extend_from_slice(&sample_rate_hz.to_le_bytes());
    buf.extend_from_slice(&(sample_rate_hz * 2).to_le_bytes());
    buf.extend_from_slice(&2u16.to_le_bytes());
    buf.extend_from_slice(&16u16.to_le_bytes());
    buf.extend_from_slice(b"data");
    buf.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in samples {
        let q = (s.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        buf.extend_from_slice(&q.to_le_bytes());
    }
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(&buf).map_err(io_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent little WAV encoder used only to build fixtures.
    fn wav_bytes(format: u16, channels: u16, rate: u32, bits: u16, payload: &[u8]) -> Vec<u8> {
        let block = channels * bits / 8;
        let mut b = Vec::new();
        b.extend_from_slice(b"RIFF");
        b.extend_from_slice(&((36 + payload.len()) as u32).to_le_bytes());
        b.extend_from_slice(b"WAVE");
        b.extend_from_slice(b"fmt ");
        b.extend_from_slice(&16u32.to_le_bytes());
        b.extend_from_slice(&format.to_le_bytes());
        b.extend_from_slice(&channels.to_le_bytes());
        b.extend_from_slice(&rate.to_le_bytes());
        b.extend_from_slice(&(rate * block as u32).to_le_bytes());
        b.extend_from_slice(&block.to_le_bytes());
        b.extend_from_slice(&bits.to_le_bytes());
        b.extend_from_slice(b"data");
        b.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        b.extend_from_slice(payload);
        b
    }

    #[test]
    fn one_second_of_silence() {
        let payload = vec![0u8; 44_100 * 2];
        let (info, s) = read_wav(&wav_bytes(1, 1, 44_100, 16, &payload)).unwrap();
        assert_eq!(info.sample_rate_hz, 44_100);
        assert_eq!(s.len(), 44_100);
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stereo_keeps_channel_zero() {
        let mut payload = Vec::new();
        let ramp: Vec<i16> = (0..100).map(|i| (i * 300) as i16).collect();
        for (i, &r) in ramp.iter().enumerate() {
            payload.extend_from_slice(&r.to_le_bytes());
            let noise = ((i * 7919) % 65_536) as u16 as i16;
            payload.extend_from_slice(&noise.to_le_bytes());
        }
        let (_, s) = read_wav(&wav_bytes(1, 2, 8000, 16, &payload)).unwrap();
        let expect: Vec<f64> = ramp.iter().map(|&r| r as f64 / 32768.0).collect();
        assert_eq!(s, expect);
    }

    #[test]
    fn truncated_header_is_malformed() {
        let full = wav_bytes(1, 1, 8000, 16, &[0u8; 64]);
        for cut in [4, 11, 20, 30] {
            let err = read_wav(&full[..cut]).unwrap_err();
            assert!(matches!(err, CorpusError::MalformedHeader(_)), "cut {cut}: {err}");
        }
    }

    #[test]
    fn compressed_codecs_rejected() {
        // 0x0006 is A-law.
        let err = read_wav(&wav_bytes(6, 1, 8000, 8, &[0u8; 16])).unwrap_err();
        assert!(matches!(err, CorpusError::UnsupportedEncoding { format: 6, .. }));
    }

    #[test]
    fn empty_data_chunk() {
        let err = read_wav(&wav_bytes(1, 1, 8000, 16, &[])).unwrap_err();
        assert!(matches!(err, CorpusError::EmptyAudio));
    }

    #[test]
    fn decodes_every_supported_depth() {
        let x = 0.5f64;
        let cases: Vec<(u16, u16, Vec<u8>)> = vec![
            (1, 8, vec![192u8]),
            (1, 16, 16384i16.to_le_bytes().to_vec()),
            (1, 24, 4_194_304i32.to_le_bytes()[..3].to_vec()),
            (1, 32, 1_073_741_824i32.to_le_bytes().to_vec()),
            (3, 32, 0.5f32.to_le_bytes().to_vec()),
            (3, 64, 0.5f64.to_le_bytes().to_vec()),
        ];
        for (format, bits, payload) in cases {
            let (_, s) = read_wav(&wav_bytes(format, 1, 16_000, bits, &payload)).unwrap();
            assert_eq!(s, vec![x], "format {format} bits {bits}");
        }
        let neg = (-8_388_608i32).to_le_bytes();
        let (_, s) = read_wav(&wav_bytes(1, 1, 16_000, 24, &neg[..3])).unwrap();
        assert_eq!(s, vec![-1.0]);
    }

    #[test]
    fn skips_unknown_chunks() {
        let mut b = wav_bytes(1, 1, 8000, 16, &1000i16.to_le_bytes());
        // Splice a LIST chunk with odd length (padded) before fmt.
        let list = [b"LIST".as_slice(), &3u32.to_le_bytes(), b"abc\0"].concat();
        b.splice(12..12, list);
        let (_, s) = read_wav(&b).unwrap();
        assert_eq!(s, vec![1000.0 / 32768.0]);
    }
}

//! Keypoint JSON Lines, 16-bit PCM WAV and the `MELS` spectrogram cache.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::keypoints::{KeypointSequence, Layout};
use super::mel::MelSpectrogram;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    layout: String,
    fps: f64,
    num_keypoints: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameRecord {
    frame: usize,
    points: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    conf: Option<Vec<f64>>,
}

fn layout_tag(layout: Layout) -> &'static str {
    match layout {
        Layout::Pose19 => "pose19",
        Layout::Lip20 => "lip20",
        Layout::Custom(_) => "custom",
    }
}

pub fn write_keypoints(path: &Path, kps: &KeypointSequence) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let header = Header {
        layout: layout_tag(kps.layout()).into(),
        fps: kps.fps(),
        num_keypoints: kps.num_keypoints(),
    };
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w)?;
    let k = kps.num_keypoints();
    for t in 0..kps.num_frames() {
        let rec = FrameRecord {
            frame: t,
            points: kps.frame(t).to_vec(),
            conf: Some(kps.confidences()[t * k..(t + 1) * k].to_vec()),
        };
        serde_json::to_writer(&mut w, &rec)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a keypoint file. Frames must appear in order starting at 0; a
/// missing `conf` array means full confidence.
pub fn read_keypoints(path: &Path) -> Result<KeypointSequence> {
    let name = path.display().to_string();
    let err = |line: usize, msg: String| Error::Parse {
        path: name.clone(),
        line,
        msg,
    };
    let reader = BufReader::new(File::open(path)?);
    let mut header: Option<(Layout, f64)> = None;
    let mut points = Vec::new();
    let mut conf = Vec::new();
    let mut expected_frame = 0;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match header {
            None => {
                let h: Header =
                    serde_json::from_str(&line).map_err(|e| err(lineno, format!("header: {e}")))?;
                let layout = Layout::parse(&h.layout, h.num_keypoints)
                    .map_err(|e| err(lineno, e.to_string()))?;
                header = Some((layout, h.fps));
            }
            Some((layout, _)) => {
                let rec: FrameRecord =
                    serde_json::from_str(&line).map_err(|e| err(lineno, e.to_string()))?;
                let k = layout.num_keypoints();
                if rec.frame != expected_frame {
                    return Err(err(
                        lineno,
                        format!("expected frame {expected_frame}, found {}", rec.frame),
                    ));
                }
                if rec.points.len() != k {
                    return Err(err(
                        lineno,
                        format!("expected {k} points, found {}", rec.points.len()),
                    ));
                }
                let c = rec.conf.unwrap_or_else(|| vec![1.0; k]);
                if c.len() != k {
                    return Err(err(
                        lineno,
                        format!("expected {k} confidences, found {}", c.len()),
                    ));
                }
                points.extend(rec.points);
                conf.extend(c);
                expected_frame += 1;
            }
        }
    }
    let (layout, fps) = header.ok_or_else(|| err(1, "missing header line".into()))?;
    KeypointSequence::new(layout, fps, points, conf)
}

/// Mono samples in `[-1, 1]` and the sample rate. Stereo is averaged.
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, f64)> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()?
        }
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
    };
    let mono = interleaved
        .chunks(channels)
        .map(|c| c.iter().sum::<f64>() / channels as f64)
        .collect();
    Ok((mono, spec.sample_rate as f64))
}

/// Writes 16-bit PCM mono, clipping to `[-1, 1]`.
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for &s in samples {
        w.write_sample((s * 32768.0).round().clamp(-32768.0, 32767.0) as i16)?;
    }
    w.finalize()?;
    Ok(())
}

const MELS_MAGIC: &[u8; 4] = b"MELS";

/// Cache layout: `MELS`, u32 n_mels, u32 n_frames, f64 hop_seconds, then
/// f32 values row-major, all little-endian. Only standardised spectrograms
/// are cached.
pub fn write_mel_cache(path: &Path, mel: &MelSpectrogram) -> Result<()> {
    if !mel.normalized {
        return Err(Error::InvalidArgument(
            "only standardised spectrograms are cached".into(),
        ));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MELS_MAGIC)?;
    w.write_all(&(mel.n_mels() as u32).to_le_bytes())?;
    w.write_all(&(mel.n_frames() as u32).to_le_bytes())?;
    w.write_all(&mel.hop_seconds.to_le_bytes())?;
    for &v in mel.values.data() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_mel_cache(path: &Path) -> Result<MelSpectrogram> {
    let name = path.display().to_string();
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |msg: &str| Error::Parse {
        path: name.clone(),
        line: 0,
        msg: msg.to_string(),
    };
    if bytes.len() < 20 || &bytes[..4] != MELS_MAGIC {
        return Err(bad("not a MELS cache"));
    }
    let u32_at =
        |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let (rows, cols) = (u32_at(4), u32_at(8));
    let hop = f64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let body = &bytes[20..];
    if body.len() != rows * cols * 4 {
        return Err(bad("value block has the wrong size"));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Ok(MelSpectrogram {
        values: Tensor::new(vec![rows, cols], data)?,
        hop_seconds: hop,
        normalized: true,
    })
}

//! Frame sequence I/O and intensity normalization.
//!
//! Sources: a directory of PNG frames, a Y4M stream, or headerless planar
//! 4:2:0 YUV with caller-supplied dimensions. Samples are 8-bit and map to
//! [0,1] by v/255 on ingest; egress rounds to nearest, so a round-trip is
//! within one quantization step and exact for already-quantized data.

use std::fmt;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, RgbImage};

use crate::error::{Error, Result};
use crate::tensor::{Shape4, Tensor4};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ChannelMode {
    #[default]
    Luma,
    Rgb,
}

impl ChannelMode {
    pub fn channels(self) -> usize {
        match self {
            ChannelMode::Luma => 1,
            ChannelMode::Rgb => 3,
        }
    }

    /// The mode that reads videos with this many channels per frame.
    pub fn for_channel_count(channels: usize) -> Result<Self> {
        match channels {
            1 => Ok(ChannelMode::Luma),
            3 => Ok(ChannelMode::Rgb),
            other => Err(Error::Config(format!(
                "no channel mode reads {other}-channel video"
            ))),
        }
    }
}

impl fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelMode::Luma => "luma",
            ChannelMode::Rgb => "rgb",
        })
    }
}

impl std::str::FromStr for ChannelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "luma" => Ok(ChannelMode::Luma),
            "rgb" => Ok(ChannelMode::Rgb),
            other => Err(Error::Config(format!("unknown channel mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VideoFormat {
    /// Directory of `frame_%06d.png` files (any `.png` set works on read;
    /// lexicographic name order is temporal order).
    PngDir,
    Y4m,
    /// Headerless planar 4:2:0, 8-bit; dimensions are not in the stream.
    RawYuv { height: usize, width: usize },
}

/// An ordered run of same-shaped frames with intensities in [0,1].
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Tensor4>,
    channel_mode: ChannelMode,
}

impl FrameSequence {
    pub fn new(frames: Vec<Tensor4>, channel_mode: ChannelMode) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Contract("a frame sequence needs at least one frame".into()))?;
        let shape = first.shape();
        if shape.n != 1 || shape.c != channel_mode.channels() {
            return Err(Error::Dimension(format!(
                "frames must be 1x{}xHxW in {channel_mode} mode, got {shape}",
                channel_mode.channels()
            )));
        }
        for (t, frame) in frames.iter().enumerate() {
            if frame.shape() != shape {
                return Err(Error::Format(format!(
                    "frame {t} has shape {}, expected {shape}",
                    frame.shape()
                )));
            }
            if frame.values().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::Contract(format!(
                    "frame {t} has intensities outside [0,1]"
                )));
            }
        }
        Ok(FrameSequence { frames, channel_mode })
    }

    pub fn frames(&self) -> &[Tensor4] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn frame_shape(&self) -> Shape4 {
        self.frames[0].shape()
    }

    pub fn channel_mode(&self) -> ChannelMode {
        self.channel_mode
    }
}

const Y4M_MAGIC: &[u8] = b"YUV4MPEG2";
const FRAME_MAGIC: &[u8] = b"FRAME";

pub fn read_sequence(path: &Path, format: VideoFormat, mode: ChannelMode) -> Result<FrameSequence> {
    match format {
        VideoFormat::PngDir => read_png_dir(path, mode),
        VideoFormat::Y4m => read_y4m(path, mode),
        VideoFormat::RawYuv { height, width } => read_raw_yuv(path, height, width, mode),
    }
}

pub fn write_sequence(seq: &FrameSequence, path: &Path, format: VideoFormat) -> Result<()> {
    match format {
        VideoFormat::PngDir => write_png_dir(seq, path),
        VideoFormat::Y4m => write_y4m(seq, path),
        VideoFormat::RawYuv { height, width } => {
            let shape = seq.frame_shape();
            if shape.h != height || shape.w != width {
                return Err(Error::Dimension(format!(
                    "sequence is {}x{} but the raw format was given {height}x{width}",
                    shape.h, shape.w
                )));
            }
            write_raw_yuv(seq, path)
        }
    }
}

/// Picks a format from the path: an extensionless path (or an existing
/// directory) is a PNG dir, `.y4m` is Y4M. The extensionless rule lets write
/// targets that do not exist yet infer cleanly. Raw YUV cannot be inferred
/// (no header), so `.yuv` asks for dimensions.
pub fn infer_format(path: &Path) -> Result<VideoFormat> {
    if path.is_dir() {
        return Ok(VideoFormat::PngDir);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("y4m") => Ok(VideoFormat::Y4m),
        Some("yuv") => Err(Error::Config(format!(
            "{}: raw YUV has no header; supply dimensions explicitly",
            path.display()
        ))),
        Some(other) => Err(Error::Config(format!(
            "{}: cannot infer a video format from `.{other}` (expected a directory of PNGs \
             or a .y4m file)",
            path.display()
        ))),
        None => Ok(VideoFormat::PngDir),
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn frame_from_bytes(shape: Shape4, bytes: &[u8]) -> Result<Tensor4> {
    let values = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
    Tensor4::new(shape, values)
}

fn read_png_dir(dir: &Path, mode: ChannelMode) -> Result<FrameSequence> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(dir, e))?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("png"))
        .collect();
    if paths.is_empty() {
        return Err(Error::Format(format!("{}: no .png frames found", dir.display())));
    }
    paths.sort();

    let mut frames = Vec::with_capacity(paths.len());
    let mut expected: Option<Shape4> = None;
    for path in &paths {
        let img = image::open(path).map_err(|e| Error::Image { path: path.clone(), source: e })?;
        let frame = decode_image(img, mode)?;
        if let Some(shape) = expected {
            if frame.shape() != shape {
                return Err(Error::Format(format!(
                    "{}: frame size {} differs from the first frame's {shape}",
                    path.display(),
                    frame.shape()
                )));
            }
        } else {
            expected = Some(frame.shape());
        }
        frames.push(frame);
    }
    FrameSequence::new(frames, mode)
}

fn decode_image(img: DynamicImage, mode: ChannelMode) -> Result<Tensor4> {
    match mode {
        ChannelMode::Luma => {
            let gray = img.to_luma8();
            let (w, h) = gray.dimensions();
            frame_from_bytes(Shape4::new(1, 1, h as usize, w as usize), gray.as_raw())
        }
        ChannelMode::Rgb => {
            let rgb = img.to_rgb8();
            let (w, h) = rgb.dimensions();
            let (w, h) = (w as usize, h as usize);
            let shape = Shape4::new(1, 3, h, w);
            let mut values = vec![0.0; shape.len()];
            let raw = rgb.as_raw();
            for y in 0..h {
                for x in 0..w {
                    for c in 0..3 {
                        values[(c * h + y) * w + x] = f64::from(raw[(y * w + x) * 3 + c]) / 255.0;
                    }
                }
            }
            Tensor4::new(shape, values)
        }
    }
}

fn write_png_dir(seq: &FrameSequence, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let shape = seq.frame_shape();
    let (h, w) = (shape.h, shape.w);
    for (t, frame) in seq.frames().iter().enumerate() {
        let path = dir.join(format!("frame_{t:06}.png"));
        let save = |img: DynamicImage| -> Result<()> {
            img.save(&path).map_err(|e| Error::Image { path: path.clone(), source: e })
        };
        match seq.channel_mode() {
            ChannelMode::Luma => {
                let bytes: Vec<u8> = frame.values().iter().map(|&v| quantize(v)).collect();
                let img = GrayImage::from_raw(w as u32, h as u32, bytes)
                    .expect("buffer length matches dimensions");
                save(DynamicImage::ImageLuma8(img))?;
            }
            ChannelMode::Rgb => {
                let mut bytes = vec![0u8; h * w * 3];
                for y in 0..h {
                    for x in 0..w {
                        for c in 0..3 {
                            bytes[(y * w + x) * 3 + c] = quantize(frame.at(0, c, y, x));
                        }
                    }
                }
                let img = RgbImage::from_raw(w as u32, h as u32, bytes)
                    .expect("buffer length matches dimensions");
                save(DynamicImage::ImageRgb8(img))?;
            }
        }
    }
    Ok(())
}

fn require_luma(mode: ChannelMode, what: &str) -> Result<()> {
    if mode != ChannelMode::Luma {
        return Err(Error::Config(format!(
            "{what} sources support luma mode only (chroma conversion is out of scope)"
        )));
    }
    Ok(())
}

fn read_y4m(path: &Path, mode: ChannelMode) -> Result<FrameSequence> {
    require_luma(mode, "y4m")?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fail = |msg: String| Error::Format(format!("{}: {msg}", path.display()));

    let header_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| fail("missing stream header terminator".into()))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| fail("stream header is not ASCII".into()))?;
    let mut tokens = header.split_ascii_whitespace();
    if tokens.next().map(str::as_bytes) != Some(Y4M_MAGIC) {
        return Err(fail("not a YUV4MPEG2 stream".into()));
    }
    let mut width = None;
    let mut height = None;
    for token in tokens {
        match token.split_at(1) {
            ("W", rest) => {
                width = Some(rest.parse::<usize>().map_err(|_| fail(format!("bad width {rest}")))?)
            }
            ("H", rest) => {
                height =
                    Some(rest.parse::<usize>().map_err(|_| fail(format!("bad height {rest}")))?)
            }
            ("C", rest) if !rest.starts_with("420") => {
                return Err(fail(format!("unsupported chroma subsampling C{rest} (need 4:2:0)")));
            }
            _ => {}
        }
    }
    let width = width.ok_or_else(|| fail("header lacks W".into()))?;
    let height = height.ok_or_else(|| fail("header lacks H".into()))?;
    check_even_dims(height, width)?;

    let (y_len, frame_len) = yuv420_plane_sizes(height, width);
    let shape = Shape4::new(1, 1, height, width);
    let mut frames = Vec::new();
    let mut pos = header_end + 1;
    while pos < bytes.len() {
        if !bytes[pos..].starts_with(FRAME_MAGIC) {
            return Err(fail(format!("expected FRAME marker at byte {pos}")));
        }
        let marker_end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| fail("unterminated FRAME marker".into()))?;
        pos += marker_end + 1;
        if bytes.len() < pos + frame_len {
            return Err(Error::Size {
                path: path.to_path_buf(),
                expected: pos + frame_len,
                actual: bytes.len(),
            });
        }
        frames.push(frame_from_bytes(shape, &bytes[pos..pos + y_len])?);
        pos += frame_len;
    }
    if frames.is_empty() {
        return Err(fail("stream contains no frames".into()));
    }
    FrameSequence::new(frames, ChannelMode::Luma)
}

fn write_y4m(seq: &FrameSequence, path: &Path) -> Result<()> {
    require_luma(seq.channel_mode(), "y4m")?;
    let shape = seq.frame_shape();
    check_even_dims(shape.h, shape.w)?;
    let (y_len, frame_len) = yuv420_plane_sizes(shape.h, shape.w);
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    writeln!(out, "YUV4MPEG2 W{} H{} F25:1 Ip A1:1 C420", shape.w, shape.h).map_err(io_err)?;
    for frame in seq.frames() {
        out.write_all(b"FRAME\n").map_err(io_err)?;
        let mut data = vec![128u8; frame_len]; // neutral chroma
        for (b, &v) in data[..y_len].iter_mut().zip(frame.values()) {
            *b = quantize(v);
        }
        out.write_all(&data).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

fn check_even_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 || !height.is_multiple_of(2) || !width.is_multiple_of(2) {
        return Err(Error::Dimension(format!(
            "4:2:0 chroma needs even positive dimensions, got {height}x{width}"
        )));
    }
    Ok(())
}

/// (luma plane bytes, whole frame bytes) for 8-bit planar 4:2:0.
fn yuv420_plane_sizes(height: usize, width: usize) -> (usize, usize) {
    let y_len = height * width;
    (y_len, y_len + y_len / 2)
}

fn read_raw_yuv(path: &Path, height: usize, width: usize, mode: ChannelMode) -> Result<FrameSequence> {
    require_luma(mode, "raw yuv")?;
    check_even_dims(height, width)?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (y_len, frame_len) = yuv420_plane_sizes(height, width);
    if bytes.is_empty() || bytes.len() % frame_len != 0 {
        // a trailing partial frame means the stream was cut short
        let frames = bytes.len().div_ceil(frame_len).max(1);
        return Err(Error::Size {
            path: path.to_path_buf(),
            expected: frames * frame_len,
            actual: bytes.len(),
        });
    }
    let shape = Shape4::new(1, 1, height, width);
    let frames = bytes
        .chunks_exact(frame_len)
        .map(|chunk| frame_from_bytes(shape, &chunk[..y_len]))
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames, ChannelMode::Luma)
}

fn write_raw_yuv(seq: &FrameSequence, path: &Path) -> Result<()> {
    require_luma(seq.channel_mode(), "raw yuv")?;
    let shape = seq.frame_shape();
    check_even_dims(shape.h, shape.w)?;
    let (y_len, frame_len) = yuv420_plane_sizes(shape.h, shape.w);
    let mut bytes = Vec::with_capacity(seq.frame_count() * frame_len);
    for frame in seq.frames() {
        bytes.extend(frame.values().iter().map(|&v| quantize(v)));
        bytes.resize(bytes.len() + (frame_len - y_len), 128);
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// The pre-padding spatial size, kept so restored frames can be cropped back.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OriginalSize {
    pub height: usize,
    pub width: usize,
}

/// Rounds spatial dims up to multiples of `factor` by edge replication.
pub fn pad_to_divisible(seq: &FrameSequence, factor: usize) -> Result<(FrameSequence, OriginalSize)> {
    if factor == 0 {
        return Err(Error::Config("padding factor must be >= 1".into()));
    }
    let shape = seq.frame_shape();
    let original = OriginalSize { height: shape.h, width: shape.w };
    let new_h = shape.h.div_ceil(factor) * factor;
    let new_w = shape.w.div_ceil(factor) * factor;
    if (new_h, new_w) == (shape.h, shape.w) {
        return Ok((seq.clone(), original));
    }
    let padded_shape = Shape4::new(1, shape.c, new_h, new_w);
    let mut frames = Vec::with_capacity(seq.frame_count());
    for frame in seq.frames() {
        let mut values = vec![0.0; padded_shape.len()];
        for c in 0..shape.c {
            for y in 0..new_h {
                for x in 0..new_w {
                    let sy = y.min(shape.h - 1);
                    let sx = x.min(shape.w - 1);
                    values[(c * new_h + y) * new_w + x] = frame.at(0, c, sy, sx);
                }
            }
        }
        frames.push(Tensor4::new(padded_shape, values)?);
    }
    Ok((FrameSequence::new(frames, seq.channel_mode())?, original))
}

/// Crops every frame back to `size` (top-left corner), inverting
/// `pad_to_divisible`.
pub fn crop_to(seq: &FrameSequence, size: OriginalSize) -> Result<FrameSequence> {
    let shape = seq.frame_shape();
    if size.height > shape.h || size.width > shape.w {
        return Err(Error::Dimension(format!(
            "cannot crop {}x{} frames to {}x{}",
            shape.h, shape.w, size.height, size.width
        )));
    }
    if (size.height, size.width) == (shape.h, shape.w) {
        return Ok(seq.clone());
    }
    let cropped = crop_frames(seq.frames(), shape.c, size)?;
    FrameSequence::new(cropped, seq.channel_mode())
}

/// Crops bare tensors; used on restored frames that never re-enter a
/// FrameSequence (their values may exceed [0,1] before clamping).
pub fn crop_frame(frame: &Tensor4, size: OriginalSize) -> Result<Tensor4> {
    let shape = frame.shape();
    if size.height > shape.h || size.width > shape.w {
        return Err(Error::Dimension(format!(
            "cannot crop {}x{} frame to {}x{}",
            shape.h, shape.w, size.height, size.width
        )));
    }
    let out_shape = Shape4::new(shape.n, shape.c, size.height, size.width);
    let mut values = Vec::with_capacity(out_shape.len());
    for n in 0..shape.n {
        for c in 0..shape.c {
            for y in 0..size.height {
                for x in 0..size.width {
                    values.push(frame.at(n, c, y, x));
                }
            }
        }
    }
    Tensor4::new(out_shape, values)
}

fn crop_frames(frames: &[Tensor4], _c: usize, size: OriginalSize) -> Result<Vec<Tensor4>> {
    frames.iter().map(|f| crop_frame(f, size)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn luma_seq(t: usize, h: usize, w: usize, fill: impl Fn(usize, usize, usize) -> f64) -> FrameSequence {
        let shape = Shape4::new(1, 1, h, w);
        let frames = (0..t)
            .map(|i| {
                let values = (0..h * w).map(|p| fill(i, p / w, p % w)).collect();
                Tensor4::new(shape, values).unwrap()
            })
            .collect();
        FrameSequence::new(frames, ChannelMode::Luma).unwrap()
    }

    fn random_seq(t: usize, h: usize, w: usize, seed: u64) -> FrameSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = Shape4::new(1, 1, h, w);
        let frames = (0..t)
            .map(|_| {
                let values = (0..h * w).map(|_| rng.random_range(0.0..=1.0)).collect();
                Tensor4::new(shape, values).unwrap()
            })
            .collect();
        FrameSequence::new(frames, ChannelMode::Luma).unwrap()
    }

    fn quantized(seq: &FrameSequence) -> FrameSequence {
        let frames = seq
            .frames()
            .iter()
            .map(|f| {
                let values = f.values().iter().map(|&v| f64::from(quantize(v)) / 255.0).collect();
                Tensor4::new(f.shape(), values).unwrap()
            })
            .collect();
        FrameSequence::new(frames, seq.channel_mode()).unwrap()
    }

    fn max_abs_diff(a: &FrameSequence, b: &FrameSequence) -> f64 {
        a.frames()
            .iter()
            .zip(b.frames())
            .flat_map(|(fa, fb)| fa.values().iter().zip(fb.values()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn png_dir_three_gray_frames() {
        let dir = tempfile::tempdir().unwrap();
        let seq = luma_seq(3, 64, 64, |t, y, x| ((t * 31 + y * 7 + x) % 256) as f64 / 255.0);
        write_sequence(&seq, dir.path(), VideoFormat::PngDir).unwrap();
        let back = read_sequence(dir.path(), VideoFormat::PngDir, ChannelMode::Luma).unwrap();
        assert_eq!(back.frame_count(), 3);
        assert_eq!(back.frame_shape(), Shape4::new(1, 1, 64, 64));
        assert_eq!(back, seq); // already quantized, so exact
    }

    #[test]
    fn normalization_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::from_raw(2, 1, vec![255, 0]).unwrap();
        img.save(dir.path().join("frame_000000.png")).unwrap();
        let seq = read_sequence(dir.path(), VideoFormat::PngDir, ChannelMode::Luma).unwrap();
        assert_eq!(seq.frames()[0].values(), &[1.0, 0.0]);
    }

    #[test]
    fn png_frames_come_back_in_name_order() {
        let dir = tempfile::tempdir().unwrap();
        let seq = luma_seq(12, 4, 4, |t, _, _| t as f64 / 255.0);
        write_sequence(&seq, dir.path(), VideoFormat::PngDir).unwrap();
        let back = read_sequence(dir.path(), VideoFormat::PngDir, ChannelMode::Luma).unwrap();
        for (t, frame) in back.frames().iter().enumerate() {
            assert_eq!(frame.values()[0], t as f64 / 255.0, "frame {t} out of order");
        }
    }

    #[test]
    fn mixed_frame_sizes_name_the_offender() {
        let dir = tempfile::tempdir().unwrap();
        GrayImage::from_raw(4, 4, vec![0; 16])
            .unwrap()
            .save(dir.path().join("frame_000000.png"))
            .unwrap();
        GrayImage::from_raw(5, 4, vec![0; 20])
            .unwrap()
            .save(dir.path().join("frame_000001.png"))
            .unwrap();
        let err =
            read_sequence(dir.path(), VideoFormat::PngDir, ChannelMode::Luma).unwrap_err();
        assert!(err.to_string().contains("frame_000001"), "{err}");
    }

    #[test]
    fn empty_dir_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = read_sequence(dir.path(), VideoFormat::PngDir, ChannelMode::Luma).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err:?}");
    }

    #[test]
    fn empty_sequence_rejected() {
        assert!(FrameSequence::new(vec![], ChannelMode::Luma).is_err());
    }

    #[test]
    fn raw_yuv_two_cif_frames() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.yuv");
        // 352*288 luma + quarter-size chroma planes = 152064 bytes per frame
        std::fs::write(&path, vec![64u8; 2 * 152_064]).unwrap();
        let seq = read_sequence(
            &path,
            VideoFormat::RawYuv { height: 288, width: 352 },
            ChannelMode::Luma,
        )
        .unwrap();
        assert_eq!(seq.frame_count(), 2);
        assert_eq!(seq.frame_shape(), Shape4::new(1, 1, 288, 352));
    }

    #[test]
    fn truncated_raw_reports_expected_and_actual() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.yuv");
        std::fs::write(&path, vec![0u8; 152_064 + 7]).unwrap();
        let err = read_sequence(
            &path,
            VideoFormat::RawYuv { height: 288, width: 352 },
            ChannelMode::Luma,
        )
        .unwrap_err();
        match err {
            Error::Size { expected, actual, .. } => {
                assert_eq!(expected, 2 * 152_064);
                assert_eq!(actual, 152_064 + 7);
            }
            other => panic!("expected size error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_error_is_within_one_step() {
        let dir = tempfile::tempdir().unwrap();
        let seq = random_seq(2, 6, 8, 3);
        for (name, format) in [
            ("png", VideoFormat::PngDir),
            ("y4m", VideoFormat::Y4m),
            ("raw", VideoFormat::RawYuv { height: 6, width: 8 }),
        ] {
            let path = dir.path().join(name);
            write_sequence(&seq, &path, format).unwrap();
            let back = read_sequence(&path, format, ChannelMode::Luma).unwrap();
            let diff = max_abs_diff(&seq, &back);
            assert!(diff <= 1.0 / 255.0, "{name}: diff {diff}");
            // once quantized, a second trip changes nothing
            let again_path = dir.path().join(format!("{name}2"));
            write_sequence(&back, &again_path, format).unwrap();
            let again = read_sequence(&again_path, format, ChannelMode::Luma).unwrap();
            assert_eq!(again, back, "{name}: quantized round-trip must be exact");
        }
        let q = quantized(&seq);
        let path = dir.path().join("quantized");
        write_sequence(&q, &path, VideoFormat::PngDir).unwrap();
        assert_eq!(read_sequence(&path, VideoFormat::PngDir, ChannelMode::Luma).unwrap(), q);
    }

    #[test]
    fn y4m_header_round_trip_and_rejections() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.y4m");
        let seq = luma_seq(2, 4, 6, |t, y, x| ((t + y + x) % 2) as f64);
        write_sequence(&seq, &path, VideoFormat::Y4m).unwrap();
        let back = read_sequence(&path, VideoFormat::Y4m, ChannelMode::Luma).unwrap();
        assert_eq!(back, seq);

        std::fs::write(&path, b"NOTY4M W4 H4\nFRAME\n").unwrap();
        assert!(read_sequence(&path, VideoFormat::Y4m, ChannelMode::Luma).is_err());

        std::fs::write(&path, b"YUV4MPEG2 W4 H4 C444\nFRAME\n").unwrap();
        let err = read_sequence(&path, VideoFormat::Y4m, ChannelMode::Luma).unwrap_err();
        assert!(err.to_string().contains("C444"), "{err}");
    }

    #[test]
    fn rgb_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let shape = Shape4::new(1, 3, 2, 2);
        let frame = Tensor4::new(
            shape,
            vec![
                1.0, 0.0, 0.0, 0.0, // R plane
                0.0, 1.0, 0.0, 0.0, // G plane
                0.0, 0.0, 1.0, 0.0, // B plane
            ],
        )
        .unwrap();
        let seq = FrameSequence::new(vec![frame], ChannelMode::Rgb).unwrap();
        write_sequence(&seq, dir.path(), VideoFormat::PngDir).unwrap();
        let back = read_sequence(dir.path(), VideoFormat::PngDir, ChannelMode::Rgb).unwrap();
        assert_eq!(back, seq);
    }

    #[test]
    fn yuv_sources_reject_rgb_mode() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.y4m");
        let seq = luma_seq(1, 4, 4, |_, _, _| 0.5);
        write_sequence(&seq, &path, VideoFormat::Y4m).unwrap();
        assert!(read_sequence(&path, VideoFormat::Y4m, ChannelMode::Rgb).is_err());
    }

    #[test]
    fn pad_leaves_divisible_sizes_alone() {
        let seq = luma_seq(1, 288, 352, |_, y, x| ((y + x) % 2) as f64);
        let (padded, original) = pad_to_divisible(&seq, 8).unwrap();
        assert_eq!(padded, seq);
        assert_eq!(original, OriginalSize { height: 288, width: 352 });
    }

    #[test]
    fn pad_rounds_up_and_replicates_edges() {
        let seq = luma_seq(2, 50, 50, |t, y, x| ((t * 13 + y * 3 + x) % 11) as f64 / 10.0);
        let (padded, original) = pad_to_divisible(&seq, 8).unwrap();
        assert_eq!(padded.frame_shape(), Shape4::new(1, 1, 56, 56));
        let f = &padded.frames()[1];
        let src = &seq.frames()[1];
        assert_eq!(f.at(0, 0, 55, 55), src.at(0, 0, 49, 49)); // corner
        assert_eq!(f.at(0, 0, 10, 53), src.at(0, 0, 10, 49)); // right edge
        assert_eq!(f.at(0, 0, 52, 20), src.at(0, 0, 49, 20)); // bottom edge
        let cropped = crop_to(&padded, original).unwrap();
        assert_eq!(cropped, seq);
    }

    #[test]
    fn crop_rejects_growing() {
        let seq = luma_seq(1, 4, 4, |_, _, _| 0.0);
        assert!(crop_to(&seq, OriginalSize { height: 8, width: 4 }).is_err());
    }

    #[test]
    fn infer_format_by_path_kind() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(infer_format(dir.path()).unwrap(), VideoFormat::PngDir);
        assert_eq!(infer_format(Path::new("clip.y4m")).unwrap(), VideoFormat::Y4m);
        // a not-yet-created write target with no extension means a PNG dir
        assert_eq!(
            infer_format(&dir.path().join("new_clip")).unwrap(),
            VideoFormat::PngDir
        );
        assert!(infer_format(Path::new("clip.yuv")).is_err());
        assert!(infer_format(Path::new("clip.mp4")).is_err());
    }
}

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::codecs::gif::{GifEncoder, Repeat};
use image::imageops::{self, FilterType};
use image::{Delay, DynamicImage, Frame, GrayImage, Luma, Rgb, RgbImage, Rgba, RgbaImage};
use serde::{Deserialize, Serialize};

use super::synth::Trajectory;
use super::MotionError;

pub const DEFAULT_CANVAS: u32 = 512;
pub const DEFAULT_DOT_RADIUS: u32 = 5;
/// Playback never runs faster than this.
pub const MAX_PLAYBACK_FPS: f64 = 60.0;

const BLACK: u8 = 0;
const WHITE: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderOptions {
    pub width: u32,
    pub height: u32,
    pub dot_radius: u32,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            width: DEFAULT_CANVAS,
            height: DEFAULT_CANVAS,
            dot_radius: DEFAULT_DOT_RADIUS,
        }
    }
}

/// A dot that did not fit entirely on the canvas and was clipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderWarning {
    pub frame: usize,
    pub marker: usize,
}

impl fmt::Display for RenderWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "frame {}: marker {} clipped at the canvas edge", self.frame, self.marker)
    }
}

/// Binary raster animation; every pixel is 0 or 255.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub width: u32,
    pub height: u32,
    /// `None` for captured animations, which have no notion of dot size.
    pub dot_radius: Option<u32>,
    pub fps: f64,
    pub frames: Vec<GrayImage>,
    pub warnings: Vec<RenderWarning>,
}

impl FrameSequence {
    pub fn is_binary(&self) -> bool {
        self.frames
            .iter()
            .all(|f| f.pixels().all(|p| p.0[0] == BLACK || p.0[0] == WHITE))
    }

    pub fn playback_fps(&self) -> f64 {
        self.fps.min(MAX_PLAYBACK_FPS)
    }

    /// Builds a sequence from arbitrary captured images: each is letterboxed
    /// onto a black `width` x `height` canvas and thresholded to black/white.
    pub fn from_captured(
        images: &[DynamicImage],
        fps: f64,
        width: u32,
        height: u32,
    ) -> Result<FrameSequence, MotionError> {
        if width == 0 || height == 0 {
            return Err(MotionError::InvalidCanvas(format!("{width}x{height}")));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(MotionError::InvalidSampling(format!("fps must be > 0, got {fps}")));
        }
        Ok(FrameSequence {
            width,
            height,
            dot_radius: None,
            fps,
            frames: images.iter().map(|i| normalize_frame(i, width, height)).collect(),
            warnings: Vec::new(),
        })
    }
}

/// Letterboxes `image` into `width` x `height` and thresholds luma at 128.
pub fn normalize_frame(image: &DynamicImage, width: u32, height: u32) -> GrayImage {
    let gray = image.to_luma8();
    let (w, h) = gray.dimensions();
    let mut canvas = GrayImage::from_pixel(width, height, Luma([BLACK]));
    if w == 0 || h == 0 {
        return canvas;
    }
    let scale = (width as f64 / w as f64).min(height as f64 / h as f64);
    let sw = ((w as f64 * scale).round() as u32).clamp(1, width);
    let sh = ((h as f64 * scale).round() as u32).clamp(1, height);
    let scaled = if (sw, sh) == (w, h) {
        gray
    } else {
        imageops::resize(&gray, sw, sh, FilterType::Triangle)
    };
    let (ox, oy) = ((width - sw) / 2, (height - sh) / 2);
    for (x, y, p) in scaled.enumerate_pixels() {
        let v = if p.0[0] >= 128 { WHITE } else { BLACK };
        canvas.put_pixel(x + ox, y + oy, Luma([v]));
    }
    canvas
}

/// Rasterizes each pose as filled white discs on black.
///
/// A pixel is lit when its center lies within `dot_radius` of a marker.
pub fn render_frames(traj: &Trajectory, opts: &RenderOptions) -> Result<FrameSequence, MotionError> {
    let RenderOptions {
        width,
        height,
        dot_radius,
    } = *opts;
    if width == 0 || height == 0 || dot_radius == 0 {
        return Err(MotionError::InvalidCanvas(format!(
            "{width}x{height} with dot radius {dot_radius}"
        )));
    }
    if !(traj.fps.is_finite() && traj.fps > 0.0) {
        return Err(MotionError::InvalidSampling(format!("fps must be > 0, got {}", traj.fps)));
    }
    let r = dot_radius as f64;
    let (wf, hf) = (width as f64, height as f64);
    let mut warnings = Vec::new();
    let mut frames = Vec::with_capacity(traj.frames.len());
    for (fi, pose) in traj.frames.iter().enumerate() {
        let mut img = GrayImage::from_pixel(width, height, Luma([BLACK]));
        for (mi, p) in pose.positions.iter().enumerate() {
            let (cx, cy) = (p[0] * wf, p[1] * hf);
            if cx - r < 0.0 || cy - r < 0.0 || cx + r > wf || cy + r > hf {
                warnings.push(RenderWarning {
                    frame: fi,
                    marker: mi,
                });
            }
            let x0 = (cx - r - 0.5).floor().max(0.0) as u32;
            let y0 = (cy - r - 0.5).floor().max(0.0) as u32;
            let x1 = ((cx + r - 0.5).ceil().max(-1.0) as i64).min(width as i64 - 1);
            let y1 = ((cy + r - 0.5).ceil().max(-1.0) as i64).min(height as i64 - 1);
            for py in y0 as i64..=y1 {
                for px in x0 as i64..=x1 {
                    let dx = px as f64 + 0.5 - cx;
                    let dy = py as f64 + 0.5 - cy;
                    if dx * dx + dy * dy <= r * r {
                        img.put_pixel(px as u32, py as u32, Luma([WHITE]));
                    }
                }
            }
        }
        frames.push(img);
    }
    Ok(FrameSequence {
        width,
        height,
        dot_radius: Some(dot_radius),
        fps: traj.fps,
        frames,
        warnings,
    })
}

pub fn to_rgb(frame: &GrayImage) -> RgbImage {
    RgbImage::from_fn(frame.width(), frame.height(), |x, y| {
        let v = frame.get_pixel(x, y).0[0];
        Rgb([v, v, v])
    })
}

/// Writes `frame_000000.png`, ... as 8-bit RGB images.
pub fn write_png_sequence(seq: &FrameSequence, dir: &Path) -> Result<Vec<PathBuf>, std::io::Error> {
    std::fs::create_dir_all(dir)?;
    seq.frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let path = dir.join(format!("frame_{i:06}.png"));
            to_rgb(f).save(&path).map_err(std::io::Error::other)?;
            Ok(path)
        })
        .collect()
}

pub fn encode_png(frame: &GrayImage) -> Vec<u8> {
    let mut buf = std::io::Cursor::new(Vec::new());
    to_rgb(frame)
        .write_to(&mut buf, image::ImageFormat::Png)
        .expect("in-memory PNG encoding does not fail");
    buf.into_inner()
}

/// Encodes a looping GIF at the playback frame rate.
pub fn encode_gif<W: Write>(seq: &FrameSequence, out: W) -> Result<(), image::ImageError> {
    let mut enc = GifEncoder::new_with_speed(out, 10);
    enc.set_repeat(Repeat::Infinite)?;
    let delay_ms = (1000.0 / seq.playback_fps()).round().max(1.0) as u32;
    let delay = Delay::from_numer_denom_ms(delay_ms, 1);
    for f in &seq.frames {
        let rgba = RgbaImage::from_fn(f.width(), f.height(), |x, y| {
            let v = f.get_pixel(x, y).0[0];
            Rgba([v, v, v, 255])
        });
        enc.encode_frame(Frame::from_parts(rgba, 0, 0, delay))?;
    }
    Ok(())
}

use std::fmt::Write;

use super::render::RenderOptions;
use super::synth::Trajectory;

/// Emits a standalone matplotlib program that animates `traj`.
///
/// The program rasterizes with the same lit-pixel rule as
/// [`render_frames`](super::render_frames) and shows the result through a
/// pixel-exact `imshow`, so a captured run reproduces the native raster.
pub fn golden_script(traj: &Trajectory, opts: &RenderOptions) -> String {
    let mut frames = String::new();
    for pose in &traj.frames {
        frames.push_str("    [");
        for (i, p) in pose.positions.iter().enumerate() {
            if i > 0 {
                frames.push_str(", ");
            }
            let _ = write!(frames, "({:?}, {:?})", p[0], p[1]);
        }
        frames.push_str("],\n");
    }
    let interval = 1000.0 / traj.fps;
    format!(
        r#"# Point-light reference animation: {description}.
# {markers} markers, {count} frames at {fps:?} fps.
import numpy as np
import matplotlib.pyplot as plt
from matplotlib.animation import FuncAnimation

WIDTH, HEIGHT, RADIUS = {width}, {height}, {radius}
FPS = {fps:?}
FRAMES = [
{frames}]

PX = np.arange(WIDTH, dtype=np.float64)[None, :] + 0.5
PY = np.arange(HEIGHT, dtype=np.float64)[:, None] + 0.5


def raster(points):
    img = np.zeros((HEIGHT, WIDTH), dtype=np.uint8)
    for x, y in points:
        cx, cy = x * WIDTH, y * HEIGHT
        dx = PX - cx
        dy = PY - cy
        img[dx * dx + dy * dy <= float(RADIUS * RADIUS)] = 255
    return img


fig = plt.figure(figsize=(WIDTH / 100, HEIGHT / 100), dpi=100, facecolor="black")
ax = fig.add_axes([0, 0, 1, 1])
ax.set_axis_off()
ax.set_facecolor("black")
image = ax.imshow(raster(FRAMES[0]), cmap="gray", vmin=0, vmax=255,
                  interpolation="nearest", aspect="auto")


def update(i):
    image.set_data(raster(FRAMES[i]))
    return (image,)


anim = FuncAnimation(fig, update, frames=len(FRAMES), interval={interval:?}, blit=True)
plt.show()
"#,
        description = traj.spec.description(),
        markers = traj.marker_count(),
        count = traj.frames.len(),
        fps = traj.fps,
        width = opts.width,
        height = opts.height,
        radius = opts.dot_radius,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{synthesize, Action, MotionSpec};

    #[test]
    fn embeds_every_frame_at_full_precision() {
        let traj = synthesize(&MotionSpec::basic(Action::Walking), 0.5, 8.0).unwrap();
        let script = golden_script(&traj, &RenderOptions::default());
        assert_eq!(script.matches("    [(").count(), traj.frames.len());
        let x = traj.frames[1].positions[3][0];
        assert!(script.contains(&format!("({x:?}, ")));
        assert!(script.contains("WIDTH, HEIGHT, RADIUS = 512, 512, 5"));
        assert!(script.contains("FPS = 8.0"));
    }
}
